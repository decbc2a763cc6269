#include "dumn/checkpoint.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <ios>
#include <sstream>
#include <stdexcept>

namespace dumn {

namespace {

void write_matrix(std::ostream& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? " " : "") << std::hexfloat << m(r, c);
    out << std::defaultfloat << '\n';
  }
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word(const char* what) {
    std::string w;
    if (!(in_ >> w)) throw std::runtime_error(std::string("checkpoint: unexpected end of input reading ") + what);
    return w;
  }

  void expect(const std::string& keyword) {
    const std::string w = word(keyword.c_str());
    if (w != keyword) throw std::runtime_error("checkpoint: expected '" + keyword + "', found '" + w + "'");
  }

  long long integer(const char* what) {
    const std::string w = word(what);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(w, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != w.size()) throw std::runtime_error(std::string("checkpoint: bad integer for ") + what + ": " + w);
    return v;
  }

  // operator>> does not parse hexfloats portably; strtod does.
  double real(const char* what) {
    const std::string w = word(what);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size() || errno == ERANGE)
      throw std::runtime_error(std::string("checkpoint: bad number in ") + what + ": " + w);
    return v;
  }

  void matrix(Matrix& m, const std::string& what) {
    const auto rows = integer(what.c_str());
    const auto cols = integer(what.c_str());
    if (rows != static_cast<long long>(m.rows()) || cols != static_cast<long long>(m.cols()))
      throw std::runtime_error("checkpoint: " + what + " is " + std::to_string(rows) + "x" + std::to_string(cols) +
                               ", model expects " + m.shape_string());
    for (double& v : m.values()) v = real(what.c_str());
  }

  std::string line() {
    std::string l;
    std::getline(in_, l);
    return l;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(std::ostream& out, const Model& model, const AdamState& adam) {
  const ParamStore& store = model.params();
  if (adam.first.size() != store.size() || adam.second.size() != store.size())
    throw std::invalid_argument("save_checkpoint: optimizer state does not match the parameters");
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';

  std::ostringstream cfg;
  write_config(cfg, model.config());
  const auto pairs = model.config().to_pairs();
  out << "config " << pairs.size() << '\n' << cfg.str();

  const Vocab& v = model.vocab();
  out << "vocab " << v.item_tokens << ' ' << v.brand_ids << ' ' << v.user_tokens << ' ' << v.field_sizes.size();
  for (int f : v.field_sizes) out << ' ' << f;
  out << '\n';

  out << "params " << store.size() << '\n';
  for (const Parameter& p : store.all()) {
    out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
    write_matrix(out, p.value);
  }

  out << "adam " << adam.step << '\n';
  for (std::size_t i = 0; i < store.size(); ++i) {
    out << "moments " << store.at(i).name << ' ' << adam.first[i].rows() << ' ' << adam.first[i].cols() << '\n';
    write_matrix(out, adam.first[i]);
    write_matrix(out, adam.second[i]);
  }

  out << "memory " << model.memory().size() << '\n';
  for (std::size_t b = 0; b < model.memory().size(); ++b) {
    const Matrix& slots = model.memory()[b].slots;
    out << "bank " << b << ' ' << slots.rows() << ' ' << slots.cols() << '\n';
    write_matrix(out, slots);
  }
  out << "end\n";
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

void save_checkpoint(const std::string& path, const Model& model, const AdamState& adam) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  save_checkpoint(out, model, adam);
}

Checkpoint load_checkpoint(std::istream& in) {
  Reader r(in);
  const std::string magic = r.word("magic");
  if (magic != kCheckpointMagic) throw std::runtime_error("checkpoint: not a checkpoint (magic '" + magic + "')");
  const auto version = r.integer("version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  r.expect("config");
  const auto lines = r.integer("config size");
  r.line();
  std::string text;
  for (long long i = 0; i < lines; ++i) text += r.line() + '\n';
  std::istringstream cfg_in(text);
  TrainConfig config;
  for (const auto& [k, v] : parse_key_values(cfg_in)) config.set(k, v);

  r.expect("vocab");
  Vocab vocab;
  vocab.item_tokens = static_cast<int>(r.integer("vocab"));
  vocab.brand_ids = static_cast<int>(r.integer("vocab"));
  vocab.user_tokens = static_cast<int>(r.integer("vocab"));
  const auto fields = r.integer("vocab");
  if (fields < 0) throw std::runtime_error("checkpoint: negative field count");
  for (long long f = 0; f < fields; ++f) vocab.field_sizes.push_back(static_cast<int>(r.integer("vocab")));

  Checkpoint ck{Model(config, vocab), {}};
  ParamStore& store = ck.model.params();
  ck.adam = AdamState::zeros(store);

  r.expect("params");
  if (r.integer("params") != static_cast<long long>(store.size()))
    throw std::runtime_error("checkpoint: parameter count does not match the configured model");
  for (Parameter& p : store.all()) {
    r.expect("param");
    const std::string name = r.word("param name");
    if (name != p.name) throw std::runtime_error("checkpoint: expected parameter " + p.name + ", found " + name);
    r.matrix(p.value, name);
  }

  r.expect("adam");
  ck.adam.step = r.integer("adam step");
  for (std::size_t i = 0; i < store.size(); ++i) {
    r.expect("moments");
    const std::string name = r.word("moment name");
    if (name != store.at(i).name)
      throw std::runtime_error("checkpoint: expected moments of " + store.at(i).name + ", found " + name);
    const auto rows = r.integer("moments");
    const auto cols = r.integer("moments");
    Matrix& m = ck.adam.first[i];
    if (rows != static_cast<long long>(m.rows()) || cols != static_cast<long long>(m.cols()))
      throw std::runtime_error("checkpoint: moments of " + name + " have the wrong shape");
    for (double& v : m.values()) v = r.real("first moment");
    for (double& v : ck.adam.second[i].values()) v = r.real("second moment");
  }

  r.expect("memory");
  if (r.integer("memory") != static_cast<long long>(ck.model.memory().size()))
    throw std::runtime_error("checkpoint: memory bank count does not match the configured model");
  for (std::size_t b = 0; b < ck.model.memory().size(); ++b) {
    r.expect("bank");
    if (r.integer("bank") != static_cast<long long>(b)) throw std::runtime_error("checkpoint: banks out of order");
    r.matrix(ck.model.memory()[b].slots, "bank " + std::to_string(b));
  }
  r.expect("end");
  return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace dumn
