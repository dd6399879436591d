#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include "hpnet/data.hpp"
#include "hpnet/errors.hpp"

namespace hpnet {

namespace {

constexpr char kMagic[4] = {'H', 'P', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("dataset truncated while reading ") + what, pos_);
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint8_t quantize_pixel(double p) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0));
}

void write_dataset(const std::filesystem::path& path, const std::vector<Sequence>& sequences) {
  std::uint32_t n_frames = 0, h = 0, w = 0;
  if (!sequences.empty() && !sequences[0].frames.empty()) {
    n_frames = static_cast<std::uint32_t>(sequences[0].frames.size());
    h = static_cast<std::uint32_t>(sequences[0].frames[0].height);
    w = static_cast<std::uint32_t>(sequences[0].frames[0].width);
  }
  for (const auto& s : sequences) {
    if (s.frames.size() != n_frames) {
      throw ContractError("write_dataset: sequences differ in length");
    }
    for (const auto& f : s.frames)
      if (f.height != h || f.width != w) {
        throw ContractError("write_dataset: frames differ in size");
      }
  }
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(sequences.size()));
  put_u32(out, n_frames);
  put_u32(out, h);
  put_u32(out, w);
  for (const auto& s : sequences) out.push_back(static_cast<std::uint8_t>(s.label));
  for (const auto& s : sequences)
    for (const auto& f : s.frames)
      for (double p : f.pixels) out.push_back(quantize_pixel(p));

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

std::vector<Sequence> read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  Reader r(std::vector<std::uint8_t>(std::istreambuf_iterator<char>(is), {}));

  r.need(4, "magic");
  if (!std::equal(kMagic, kMagic + 4, r.here())) {
    throw FormatError("bad magic: expected \"HPND\"", 0);
  }
  r.skip(4);
  const std::size_t version_at = r.pos();
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError("unsupported dataset version " + std::to_string(version) +
                          " (expected 1)",
                      version_at);
  }
  const std::uint32_t n = r.u32("sequence count");
  const std::uint32_t n_frames = r.u32("frame count");
  const std::uint32_t h = r.u32("height");
  const std::uint32_t w = r.u32("width");

  std::vector<Sequence> out(n);
  for (auto& s : out) {
    const std::size_t at = r.pos();
    const std::uint8_t label = r.u8("labels");
    if (label >= kMovementClassCount) {
      throw FormatError("invalid label " + std::to_string(label), at);
    }
    s.label = static_cast<MovementClass>(label);
  }
  const std::size_t frame_bytes = std::size_t(h) * w;
  for (auto& s : out) {
    s.frames.reserve(n_frames);
    for (std::uint32_t t = 0; t < n_frames; ++t) {
      r.need(frame_bytes, "pixels");
      Frame f(h, w);
      const std::uint8_t* px = r.here();
      for (std::size_t i = 0; i < frame_bytes; ++i) f.pixels[i] = px[i] / 255.0;
      r.skip(frame_bytes);
      s.frames.push_back(std::move(f));
    }
  }
  if (r.remaining() != 0) {
    throw FormatError(std::to_string(r.remaining()) + " trailing bytes after dataset", r.pos());
  }
  return out;
}

}  // namespace hpnet
