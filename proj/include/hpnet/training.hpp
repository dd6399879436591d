#pragma once

// Adam training over teacher-forced sequences, plus the HPNC checkpoint.
//
// HPNC layout (little-endian): "HPNC", u32 version (1), u32 + bytes config
// text, u32 n_tensors, then per tensor u32 + bytes name, u32 rank, u32 dims,
// f64 data; Adam lr/beta1/beta2/eps as f64, u64 step, first then second
// moments (f64, tensor order); u64 epochs completed; u32 + bytes RNG state.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "hpnet/network.hpp"
#include "hpnet/random.hpp"

namespace hpnet {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m, v;  // mirrors the parameter list
};

OptimizerState make_optimizer(const std::vector<NamedTensor>& params, AdamConfig config = {});

/// Bias-corrected Adam update from the accumulated gradients, which are
/// cleared afterwards. A non-finite gradient throws NumericError naming the
/// parameter, before anything is modified.
void adam_step(const std::vector<NamedTensor>& params, OptimizerState& state);

/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(const std::vector<NamedTensor>& params, double max_norm);

/// One sequence as model input blocks.
using BlockSequence = std::vector<Tensor>;

struct TrainRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN without validation data
  double seconds = 0.0;
};

struct TrainState {
  HPNetConfig config;
  HPNetParams params;
  OptimizerState optimizer;
  Rng rng;
  std::uint64_t epochs_done = 0;
};

/// Fresh parameters drawn from Rng(seed); the same engine then drives the
/// per-epoch shuffles.
TrainState make_train_state(const HPNetConfig& config, std::uint64_t seed, AdamConfig adam = {});

struct TrainOptions {
  double clip_norm = 10.0;
  double divergence_limit = 1e6;
  std::function<void(const TrainRecord&)> on_epoch;
};

/// Runs `epochs` more epochs. Each epoch shuffles the sequence order, takes
/// one Adam step per sequence, and reports the mean training loss (summed in
/// sequence-index order) and the validation loss.
std::vector<TrainRecord> train(TrainState& state, const std::vector<BlockSequence>& train_set,
                               const std::vector<BlockSequence>& val_set, std::size_t epochs,
                               const TrainOptions& options = {});

/// Mean teacher-forced sequence loss without recording gradients.
double evaluate_loss(const HPNetConfig& config, const HPNetParams& params,
                     const std::vector<BlockSequence>& sequences);

void save_checkpoint(const std::filesystem::path& path, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace hpnet
