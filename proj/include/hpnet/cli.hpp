#pragma once

// Command-line front end: run configuration, PGM frames, subcommands.
//
// Config files are `key=value` lines; `#` starts a comment. Command-line
// flags are applied on top through the same key schema.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hpnet/data.hpp"
#include "hpnet/network.hpp"
#include "hpnet/training.hpp"

namespace hpnet::cli {

struct RunConfig {
  HPNetConfig net;
  AdamConfig adam;
  double clip_norm = 10.0;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  // data
  std::size_t n = 200;
  std::size_t frames = 40;
  std::string motion = "diagonal";  // a class name or "mixed"
  std::size_t val = 0;              // trailing sequences held out for validation
  // prediction
  std::size_t seed_frames = 20;
  std::size_t horizon = 20;
  std::size_t index = 0;
  // neurophys
  std::size_t pairs = 4;
  // paths
  std::string data, out, checkpoint, pred_dir;

  /// Applies one key; throws ConfigError naming the key.
  void set(std::string_view key, std::string_view value);
  /// Fills derived fields (block geometry from the scheme, default channel
  /// widths) and validates; throws ConfigError.
  void finalize();

  std::vector<std::string> explicit_keys;
};

/// Every accepted key.
const std::vector<std::string_view>& config_keys();

/// Applies the key=value lines of `text` to `cfg`.
void apply_config_text(RunConfig& cfg, std::string_view text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// The base dataset spec implied by the run configuration.
SequenceSpec data_spec(const RunConfig& cfg);
/// `cfg.data` if set, otherwise the dataset generated from the seed.
std::vector<Sequence> load_or_generate(const RunConfig& cfg);

/// Binary P5, maxval 255, pixels quantized as round(255 p).
void write_pgm(const std::filesystem::path& path, const Frame& frame);
Frame read_pgm(const std::filesystem::path& path);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Gradient checks, oracle equivalences and metric axioms at small scale.
std::vector<CheckResult> run_selftest(std::ostream& log);

/// Entry point; returns 0 on success, 1 on a failed check, 2 on a usage,
/// configuration or I/O error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hpnet::cli
