#include "dumn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace dumn {

std::string GradCheckReport::summary(const ParamStore& store) const {
  std::ostringstream os;
  os << (passed ? "passed" : "FAILED") << ": " << entries.size()
     << " entries, max rel error " << max_rel_error;
  if (!entries.empty()) {
    const EntryCheck& w = entries[worst];
    os << " at " << store.at(w.param).name << "[" << w.entry << "] (analytic " << w.analytic
       << ", numeric " << w.numeric << ")";
  }
  if (!failure.empty()) os << "; " << failure;
  return os.str();
}

GradBuffer analytic_gradient(ParamStore& store, const std::function<Var(Tape&)>& build) {
  GradBuffer grads(store);
  Tape tape(&store);
  Var loss = build(tape);
  tape.backward(loss, grads);
  return grads;
}

GradCheckReport grad_check(ParamStore& store, const std::function<double()>& f,
                           const GradBuffer& analytic, const GradCheckOptions& options) {
  GradCheckReport report;
  for (std::size_t p = 0; p < store.size(); ++p) {
    Parameter& param = store.at(p);
    const std::size_t skip = param.frozen_row0 ? param.value.cols() : 0;
    for (std::size_t e = skip; e < param.value.size(); ++e) {
      if (options.include && !options.include(p, e)) continue;
      const double original = param.value[e];
      param.value[e] = original + options.step;
      const double up = f();
      param.value[e] = original - options.step;
      const double down = f();
      param.value[e] = original;

      EntryCheck c;
      c.param = p;
      c.entry = e;
      c.analytic = analytic.entry(p, e);
      if (!std::isfinite(up) || !std::isfinite(down)) {
        c.passed = false;
        c.rel_error = std::numeric_limits<double>::infinity();
        if (report.failure.empty()) {
          report.failure = "non-finite loss when perturbing " + param.name + "[" +
                           std::to_string(e) + "]";
        }
      } else {
        c.numeric = (up - down) / (2.0 * options.step);
        const double denom =
            std::max({std::abs(c.analytic), std::abs(c.numeric), options.denom_floor});
        c.rel_error = std::abs(c.analytic - c.numeric) / denom;
        c.passed = c.rel_error <= options.tol;
      }
      if (!c.passed) report.passed = false;
      if (report.entries.empty() || c.rel_error > report.max_rel_error) {
        report.max_rel_error = c.rel_error;
        report.worst = report.entries.size();
      }
      report.entries.push_back(c);
    }
  }
  return report;
}

GradCheckReport grad_check(ParamStore& store, const std::function<Var(Tape&)>& build,
                           const GradCheckOptions& options) {
  const GradBuffer grads = analytic_gradient(store, build);
  auto f = [&]() {
    Tape tape(&store);
    return build(tape).scalar();
  };
  return grad_check(store, f, grads, options);
}

}  // namespace dumn
