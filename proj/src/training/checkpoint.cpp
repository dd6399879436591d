#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "hpnet/errors.hpp"
#include "hpnet/training.hpp"

namespace hpnet {

namespace {

constexpr char kMagic[4] = {'H', 'P', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void doubles(std::span<const double> d) {
    for (double v : d) f64(v);
  }
  std::vector<std::uint8_t> bytes;

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
};

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> b) : bytes_(std::move(b)) {}
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(le(4, what)); }
  std::uint64_t u64(const char* what) { return le(8, what); }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string text(const char* what) {
    const std::uint32_t n = u32(what);
    need(n, what);
    std::string s(bytes_.begin() + pos_, bytes_.begin() + pos_ + n);
    pos_ += n;
    return s;
  }
  void doubles(std::span<double> out, const char* what) {
    need(out.size() * 8, what);
    for (double& v : out) v = f64(what);
  }
  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what, pos_);
    }
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::uint64_t le(int n, const char* what) {
    need(std::size_t(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += std::size_t(n);
    return v;
  }
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainState& state) {
  const auto named = state.params.named();
  Writer w;
  w.bytes.assign(kMagic, kMagic + 4);
  w.u32(kVersion);
  w.text(state.config.to_text());
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& p : named) {
    w.text(p.name);
    w.u32(static_cast<std::uint32_t>(p.tensor.rank()));
    for (auto d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.doubles(p.tensor.data());
  }
  const auto& o = state.optimizer;
  w.f64(o.config.lr);
  w.f64(o.config.beta1);
  w.f64(o.config.beta2);
  w.f64(o.config.eps);
  w.u64(o.step);
  for (const auto& m : o.m) w.doubles(m);
  for (const auto& v : o.v) w.doubles(v);
  w.u64(state.epochs_done);
  w.text(state.rng.serialize());

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(w.bytes.data()), std::streamsize(w.bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Reader r(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {}));

  r.need(4, "magic");
  if (std::memcmp(r.here(), kMagic, 4) != 0) throw FormatError("bad magic: expected \"HPNC\"", 0);
  r.skip(4);
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) +
                          " is not supported (expected 1)",
                      version_at);
  }
  TrainState s;
  const std::size_t config_at = r.pos();
  try {
    s.config = HPNetConfig::from_text(r.text("config"));
  } catch (const ContractError& e) {
    throw FormatError(std::string("invalid config in checkpoint: ") + e.what(), config_at);
  }
  s.params = HPNetParams::zeros(s.config);
  const auto named = s.params.named();
  const std::size_t count_at = r.pos();
  const std::uint32_t n = r.u32("tensor count");
  if (n != named.size()) {
    throw FormatError("checkpoint holds " + std::to_string(n) + " tensors, config implies " +
                          std::to_string(named.size()),
                      count_at);
  }
  for (const auto& p : named) {
    const std::size_t at = r.pos();
    const std::string name = r.text("tensor name");
    if (name != p.name) {
      throw FormatError("expected tensor " + p.name + ", found " + name, at);
    }
    const std::uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (auto& d : shape) d = r.u32("dims");
    if (shape != p.tensor.shape()) {
      throw FormatError("tensor " + name + " has shape " + shape_str(shape) + ", expected " +
                            shape_str(p.tensor.shape()),
                        at);
    }
    Tensor t = p.tensor;
    r.doubles(t.mutable_data(), "tensor data");
  }
  AdamConfig adam;
  adam.lr = r.f64("optimizer");
  adam.beta1 = r.f64("optimizer");
  adam.beta2 = r.f64("optimizer");
  adam.eps = r.f64("optimizer");
  s.optimizer = make_optimizer(named, adam);
  s.optimizer.step = r.u64("optimizer step");
  for (auto& m : s.optimizer.m) r.doubles(m, "first moments");
  for (auto& v : s.optimizer.v) r.doubles(v, "second moments");
  s.epochs_done = r.u64("epoch counter");
  const std::size_t rng_at = r.pos();
  try {
    s.rng.deserialize(r.text("rng state"));
  } catch (const ContractError&) {
    throw FormatError("malformed RNG state", rng_at);
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after checkpoint", r.pos());
  }
  return s;
}

}  // namespace hpnet
