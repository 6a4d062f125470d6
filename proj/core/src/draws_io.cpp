#include "deconf/draws_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace deconf {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'N', 'F', 'D', 'R', 'A', 'W'};

static_assert(std::endian::native == std::endian::little,
              "draws files are written in little-endian byte order");

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void strings(const std::vector<std::string>& v) {
    u64(v.size());
    for (const auto& s : v) str(s);
  }
  template <class Derived>
  void dense(const Eigen::DenseBase<Derived>& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Index j = 0; j < m.cols(); ++j)
      for (Index i = 0; i < m.rows(); ++i) f64(static_cast<double>(m(i, j)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    std::uint64_t v = 0;
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw DataError("draws file is truncated");
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = bounded(u64());
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) throw DataError("draws file is truncated");
    return s;
  }
  std::vector<std::string> strings() {
    std::vector<std::string> v(bounded(u64()));
    for (auto& s : v) s = str();
    return v;
  }
  Matrix matrix() {
    const auto r = static_cast<Index>(bounded(u64()));
    const auto c = static_cast<Index>(bounded(u64()));
    Matrix m(r, c);
    for (Index j = 0; j < c; ++j)
      for (Index i = 0; i < r; ++i) m(i, j) = f64();
    return m;
  }

 private:
  static std::size_t bounded(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 32)) throw DataError("draws file is corrupt (implausible size)");
    return static_cast<std::size_t>(n);
  }
  std::istream& in_;
};

}  // namespace

void write_artifact(std::ostream& out, const FitArtifact& a) {
  a.draws.validate();
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kDrawsFormatVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);

  Writer w(out);
  w.str(model_name(a.draws.kind));
  w.u64(a.draws.states.size());
  for (const auto& s : a.draws.states) {
    w.dense(s.W);
    w.dense(s.A);
    w.f64(s.sigma2);
    w.dense(s.Z);
    w.dense(s.tau2);
  }
  const auto& d = a.draws.diagnostics;
  w.u64(static_cast<std::uint64_t>(d.iterations));
  w.u64(static_cast<std::uint64_t>(d.n_warmup));
  w.u64(static_cast<std::uint64_t>(d.thin));
  w.f64(d.sigma2_mean);
  w.f64(d.sigma2_sd);
  w.f64(d.sigma2_ess);
  w.f64(d.loading_norm_mean);

  w.dense(a.mask.held.cast<double>());
  w.f64(a.mask.hold_fraction);
  w.u64(a.mask.seed);

  const auto& st = a.standardization;
  w.dense(st.cause_location);
  w.dense(st.cause_scale);
  w.dense(st.covariate_location);
  w.dense(st.covariate_scale);
  w.strings(st.warnings);

  w.strings(a.cause_names);
  w.strings(a.covariate_names);
  w.str(a.config_text);
  if (!out) throw DataError("failed writing draws file");
}

FitArtifact read_artifact(std::istream& in) {
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError("not a draws file (bad magic)");
  }
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || version != kDrawsFormatVersion) {
    throw DataError("unsupported draws file version " + std::to_string(version));
  }

  Reader r(in);
  FitArtifact a;
  a.draws.kind = parse_model(r.str());
  a.draws.states.resize(r.u64());
  for (auto& s : a.draws.states) {
    s.W = r.matrix();
    s.A = r.matrix();
    s.sigma2 = r.f64();
    s.Z = r.matrix();
    s.tau2 = r.matrix();
  }
  auto& d = a.draws.diagnostics;
  d.iterations = static_cast<Index>(r.u64());
  d.n_warmup = static_cast<Index>(r.u64());
  d.thin = static_cast<Index>(r.u64());
  d.sigma2_mean = r.f64();
  d.sigma2_sd = r.f64();
  d.sigma2_ess = r.f64();
  d.loading_norm_mean = r.f64();
  for (const auto& s : a.draws.states) d.sigma2_trace.push_back(s.sigma2);

  a.mask.held = r.matrix().cast<bool>();
  a.mask.hold_fraction = r.f64();
  a.mask.seed = r.u64();

  auto& st = a.standardization;
  st.cause_location = r.matrix();
  st.cause_scale = r.matrix();
  st.covariate_location = r.matrix();
  st.covariate_scale = r.matrix();
  st.warnings = r.strings();

  a.cause_names = r.strings();
  a.covariate_names = r.strings();
  a.config_text = r.str();
  a.draws.validate();
  return a;
}

void save_artifact(const std::filesystem::path& path, const FitArtifact& artifact) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_artifact(out, artifact);
}

FitArtifact load_artifact(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_artifact(in);
}

}  // namespace deconf
