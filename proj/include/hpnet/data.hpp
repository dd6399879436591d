#pragma once

// Synthetic bouncing-shape video, block extraction and the HPND file format.
//
// HPND layout (little-endian): "HPND", u32 version (1), u32 n_sequences,
// u32 n_frames, u32 height, u32 width, u8 label per sequence, then every
// pixel as u8 round(255 p), sequence-major, frame-major, row-major.

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "hpnet/tensor.hpp"

namespace hpnet {

/// Grayscale frame, row-major, values in [0, 1].
struct Frame {
  std::size_t height = 0, width = 0;
  std::vector<double> pixels;

  Frame() = default;
  Frame(std::size_t h, std::size_t w, double value = 0.0)
      : height(h), width(w), pixels(h * w, value) {}
  double& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  bool operator==(const Frame&) const = default;
};

enum class ShapeKind : std::uint8_t { Square, Cross, Disk };

enum class MovementClass : std::uint8_t {
  HorizontalBounce = 0,
  VerticalBounce = 1,
  Diagonal = 2,
  Circular = 3,
  Expanding = 4,
  StaticJitter = 5,
};
inline constexpr std::size_t kMovementClassCount = 6;
std::string_view movement_name(MovementClass m);

/// Explicit object placement; overrides the random draw when given.
struct ObjectSpec {
  ShapeKind kind = ShapeKind::Square;
  int size = 6;
  int x = 0, y = 0;  // top-left corner
  int vx = 0, vy = 0;
};

struct SequenceSpec {
  std::size_t height = 32, width = 32;
  std::size_t n_frames = 40;
  std::size_t n_objects = 2;
  std::vector<ShapeKind> shape_kinds{ShapeKind::Square, ShapeKind::Cross, ShapeKind::Disk};
  int min_size = 6, max_size = 9;
  int min_speed = 1, max_speed = 3;
  MovementClass movement = MovementClass::Diagonal;
  std::vector<ObjectSpec> objects;
  std::uint64_t seed = 0;
};

struct Sequence {
  MovementClass label = MovementClass::Diagonal;
  std::vector<Frame> frames;
  bool operator==(const Sequence&) const = default;
};

Sequence generate_sequence(const SequenceSpec& spec);

/// Spec for item `index` of a generated dataset: per-item seed derived from
/// master_seed, and with `mixed` the motion class cycles through all six.
SequenceSpec dataset_item_spec(const SequenceSpec& base, std::uint64_t master_seed,
                               std::size_t index, bool mixed);

/// Block i covers frames [i*stride, i*stride + d) as a [1, d, H, W] tensor.
std::vector<Tensor> extract_blocks(const std::vector<Frame>& frames, std::size_t d,
                                   std::size_t stride);

/// Frame t of a [C, d, H, W] block (channel 0).
Frame block_frame(const Tensor& block, std::size_t t);

/// round(255 p) with p clamped to [0, 1].
std::uint8_t quantize_pixel(double p);

void write_dataset(const std::filesystem::path& path, const std::vector<Sequence>& sequences);
std::vector<Sequence> read_dataset(const std::filesystem::path& path);

}  // namespace hpnet
