#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dumn/params.hpp"
#include "dumn/tape.hpp"

namespace dumn {

struct GradCheckOptions {
  double step = 1e-5;
  double tol = 1e-4;
  // Relative error is |a - n| / max(|a|, |n|, denom_floor); gradients smaller than
  // the floor are effectively compared in absolute terms.
  double denom_floor = 1e-6;
  // Optional filter; entries for which it returns false are skipped.
  std::function<bool(std::size_t param, std::size_t entry)> include;
};

struct EntryCheck {
  std::size_t param = 0;
  std::size_t entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<EntryCheck> entries;
  double max_rel_error = 0.0;
  std::size_t worst = 0;  // index into entries
  bool passed = true;
  std::string failure;  // set when f is non-finite somewhere

  std::string summary(const ParamStore& store) const;
};

/// Runs `build` on a fresh tape and returns dLoss/dParam for every parameter.
GradBuffer analytic_gradient(ParamStore& store, const std::function<Var(Tape&)>& build);

/// Central finite differences of `f` around the current parameter values, compared
/// entrywise to `analytic`. Frozen pad rows are skipped. Parameters are restored.
GradCheckReport grad_check(ParamStore& store, const std::function<double()>& f,
                           const GradBuffer& analytic, const GradCheckOptions& options = {});

/// Convenience: analytic gradient from `build`, numeric from re-running `build` forward.
GradCheckReport grad_check(ParamStore& store, const std::function<Var(Tape&)>& build,
                           const GradCheckOptions& options = {});

}  // namespace dumn
