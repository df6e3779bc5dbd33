#include "surt/chain_store.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "surt/errors.hpp"

namespace surt {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'R', 'T', 'C', 'H', 'N', '\x01'};

class Writer {
 public:
  explicit Writer(std::vector<unsigned char>& out) : out_(out) {}

  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    out_.insert(out_.end(), p, p + sizeof(T));
  }
  void u8(bool v) { pod<std::uint8_t>(v ? 1 : 0); }
  void i32(int v) { pod<std::int32_t>(v); }
  void i64(long v) { pod<std::int64_t>(v); }
  void u64(std::uint64_t v) { pod<std::uint64_t>(v); }
  void f64(double v) { pod<double>(v); }

  void str(const std::string& s) {
    u64(s.size());
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void matrix(const Matrix& m) {
    i32(static_cast<int>(m.rows()));
    i32(static_cast<int>(m.cols()));
    for (int c = 0; c < m.cols(); ++c)
      for (int r = 0; r < m.rows(); ++r) f64(m(r, c));
  }
  void bytes(const std::vector<unsigned char>& v) {
    u64(v.size());
    out_.insert(out_.end(), v.begin(), v.end());
  }

 private:
  std::vector<unsigned char>& out_;
};

class Reader {
 public:
  Reader(const std::vector<unsigned char>& in, const std::string& path)
      : in_(in), path_(path) {}

  template <typename T>
  T pod() {
    if (off_ + sizeof(T) > in_.size())
      fail(ErrorCode::ParseError, "truncated chain file: " + path_);
    T v;
    std::memcpy(&v, in_.data() + off_, sizeof(T));
    off_ += sizeof(T);
    return v;
  }
  bool u8() { return pod<std::uint8_t>() != 0; }
  int i32() { return pod<std::int32_t>(); }
  long i64() { return static_cast<long>(pod<std::int64_t>()); }
  std::uint64_t u64() { return pod<std::uint64_t>(); }
  double f64() { return pod<double>(); }

  std::uint64_t count() {
    const std::uint64_t n = u64();
    if (n > in_.size())
      fail(ErrorCode::ParseError, "corrupt length in chain file: " + path_);
    return n;
  }
  std::string str() {
    const std::uint64_t n = count();
    if (off_ + n > in_.size())
      fail(ErrorCode::ParseError, "truncated chain file: " + path_);
    std::string s(in_.begin() + off_, in_.begin() + off_ + n);
    off_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = count();
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
  Matrix matrix() {
    const int rows = i32(), cols = i32();
    if (rows < 0 || cols < 0 ||
        static_cast<std::uint64_t>(rows) * cols * sizeof(double) > in_.size())
      fail(ErrorCode::ParseError, "corrupt matrix in chain file: " + path_);
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = f64();
    return m;
  }
  std::vector<unsigned char> bytes() {
    const std::uint64_t n = count();
    if (off_ + n > in_.size())
      fail(ErrorCode::ParseError, "truncated chain file: " + path_);
    std::vector<unsigned char> v(in_.begin() + off_, in_.begin() + off_ + n);
    off_ += n;
    return v;
  }
  bool done() const { return off_ == in_.size(); }

 private:
  const std::vector<unsigned char>& in_;
  std::string path_;
  std::size_t off_ = 0;
};

void write_config(Writer& w, const ModelConfig& cfg) {
  w.u8(cfg.mode == Mode::Probit);
  w.u8(cfg.mode_declared);
  w.u8(cfg.independence);
  w.i32(cfg.m);
  w.f64(cfg.kappa);
  w.f64(cfg.q_z);
  w.f64(cfg.alpha);
  w.f64(cfg.beta);
  w.f64(cfg.nu);
  w.f64(cfg.alpha_sigma);
  w.i32(cfg.n_mcmc);
  w.i32(cfg.n_burnin);
  w.f64(cfg.nu_prop);
  w.f64(cfg.p_grow);
  w.f64(cfg.p_prune);
  w.f64(cfg.p_change);
  w.u64(cfg.seed);
  w.i32(cfg.n_chains);
  w.u8(cfg.store_forests);
  w.u8(cfg.store_latents);
}

ModelConfig read_config(Reader& r) {
  ModelConfig cfg;
  cfg.mode = r.u8() ? Mode::Probit : Mode::Continuous;
  cfg.mode_declared = r.u8();
  cfg.independence = r.u8();
  cfg.m = r.i32();
  cfg.kappa = r.f64();
  cfg.q_z = r.f64();
  cfg.alpha = r.f64();
  cfg.beta = r.f64();
  cfg.nu = r.f64();
  cfg.alpha_sigma = r.f64();
  cfg.n_mcmc = r.i32();
  cfg.n_burnin = r.i32();
  cfg.nu_prop = r.f64();
  cfg.p_grow = r.f64();
  cfg.p_prune = r.f64();
  cfg.p_change = r.f64();
  cfg.seed = r.u64();
  cfg.n_chains = r.i32();
  cfg.store_forests = r.u8();
  cfg.store_latents = r.u8();
  return cfg;
}

}  // namespace

void save_chain(const std::string& path, const StoredChain& stored) {
  std::vector<unsigned char> buf;
  Writer w(buf);
  buf.insert(buf.end(), kMagic, kMagic + sizeof(kMagic));

  w.u64(stored.x_names.size());
  for (std::size_t k = 0; k < stored.x_names.size(); ++k) {
    w.str(stored.x_names[k]);
    w.u8(stored.x_kinds[k] == ColumnKind::Categorical);
    w.i32(stored.x_levels[k]);
  }
  w.u64(stored.y_names.size());
  for (const auto& name : stored.y_names) w.str(name);

  const ChainResult& ch = stored.chain;
  write_config(w, ch.config);
  w.doubles(ch.scaler.ymin);
  w.doubles(ch.scaler.ymax);
  w.doubles(ch.priors.sigma_hat);
  w.doubles(ch.priors.sigma_hat_lasso);
  w.doubles(ch.priors.a_scale);
  w.f64(ch.priors.leaf_sd);

  w.u64(ch.design_names.size());
  for (const auto& name : ch.design_names) w.str(name);

  w.u64(ch.sigma_all.size());
  for (const Matrix& m : ch.sigma_all) w.matrix(m);
  w.u64(ch.sigma_retained.size());
  for (const Matrix& m : ch.sigma_retained) w.matrix(m);

  w.u64(ch.fits.size());
  for (const auto& design : ch.fits) {
    w.u64(design.size());
    for (const Matrix& m : design) w.matrix(m);
  }

  w.u64(ch.forests.size());
  for (const auto& draw : ch.forests) {
    w.u64(draw.size());
    for (const auto& blob : draw) w.bytes(blob);
  }

  w.u64(ch.latents.size());
  for (const Matrix& m : ch.latents) w.matrix(m);

  w.matrix(ch.importance);
  for (int i = 0; i < 3; ++i) w.i64(ch.moves.proposed[i]);
  for (int i = 0; i < 3; ++i) w.i64(ch.moves.accepted[i]);
  w.i64(ch.px_proposed);
  w.i64(ch.px_accepted);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) fail(ErrorCode::IoError, "write failed: " + path);
}

StoredChain load_chain(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open chain file: " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) ||
      std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::ParseError, "not a chain file: " + path);

  const std::vector<unsigned char> payload(buf.begin() + sizeof(kMagic),
                                           buf.end());
  Reader r(payload, path);
  StoredChain stored;
  const std::uint64_t p = r.count();
  for (std::uint64_t k = 0; k < p; ++k) {
    stored.x_names.push_back(r.str());
    stored.x_kinds.push_back(r.u8() ? ColumnKind::Categorical
                                    : ColumnKind::Continuous);
    stored.x_levels.push_back(r.i32());
  }
  const std::uint64_t d_names = r.count();
  for (std::uint64_t k = 0; k < d_names; ++k)
    stored.y_names.push_back(r.str());

  ChainResult& ch = stored.chain;
  ch.config = read_config(r);
  ch.scaler.ymin = r.doubles();
  ch.scaler.ymax = r.doubles();
  ch.priors.sigma_hat = r.doubles();
  ch.priors.sigma_hat_lasso = r.doubles();
  ch.priors.a_scale = r.doubles();
  ch.priors.leaf_sd = r.f64();

  const std::uint64_t n_designs = r.count();
  for (std::uint64_t k = 0; k < n_designs; ++k)
    ch.design_names.push_back(r.str());

  const std::uint64_t n_all = r.count();
  for (std::uint64_t k = 0; k < n_all; ++k) ch.sigma_all.push_back(r.matrix());
  const std::uint64_t n_ret = r.count();
  for (std::uint64_t k = 0; k < n_ret; ++k)
    ch.sigma_retained.push_back(r.matrix());

  const std::uint64_t n_fit_designs = r.count();
  ch.fits.resize(n_fit_designs);
  for (std::uint64_t e = 0; e < n_fit_designs; ++e) {
    const std::uint64_t n_draws = r.count();
    for (std::uint64_t k = 0; k < n_draws; ++k)
      ch.fits[e].push_back(r.matrix());
  }

  const std::uint64_t n_forest_draws = r.count();
  ch.forests.resize(n_forest_draws);
  for (std::uint64_t k = 0; k < n_forest_draws; ++k) {
    const std::uint64_t d = r.count();
    for (std::uint64_t j = 0; j < d; ++j)
      ch.forests[k].push_back(r.bytes());
  }

  const std::uint64_t n_latents = r.count();
  for (std::uint64_t k = 0; k < n_latents; ++k)
    ch.latents.push_back(r.matrix());

  ch.importance = r.matrix();
  for (int i = 0; i < 3; ++i) ch.moves.proposed[i] = r.i64();
  for (int i = 0; i < 3; ++i) ch.moves.accepted[i] = r.i64();
  ch.px_proposed = r.i64();
  ch.px_accepted = r.i64();
  if (!r.done())
    fail(ErrorCode::ParseError, "chain file has trailing bytes: " + path);
  return stored;
}

}  // namespace surt
