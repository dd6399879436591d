#pragma once

// Hierarchy of cortical modules. Level l (0-based here, 1-based in names)
// works at 1/2^l of the frame resolution with the block depth d unchanged.
//
// Per step k and level l:
//   I      = x^k (l = 0) or MaxPool(ReLU(R_{l-1}))
//   R     += spconv(I - I_prev)
//   E      = spconv(I - P_prev)
//   H, C   = ConvLSTM(concat[drive, E, Up(H_{l+1} of step k-1)], H, C)
//   P      = ReLU(conv(H)), SATLU'd at level 0: the prediction of I^{k+1}
//   loss_l = mean((I - P_prev)^2)
// where drive = x^k at level 0 and MaxPool(ReLU(concat[R_{l-1}, E_{l-1}]))
// above.

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hpnet/data.hpp"
#include "hpnet/ops.hpp"
#include "hpnet/random.hpp"
#include "hpnet/tensor.hpp"

namespace hpnet {

enum class Scheme { FrameToFrame, BlockToFrame, BlockToBlock };

/// "ff", "bf", "bb".
std::string_view scheme_name(Scheme scheme);
Scheme parse_scheme(std::string_view name);

struct HPNetConfig {
  std::size_t levels = 2;
  std::vector<std::size_t> channels{8, 16};
  std::size_t block_depth = 5;
  std::size_t block_stride = 5;
  Scheme scheme = Scheme::BlockToBlock;
  std::size_t frame_height = 32;
  std::size_t frame_width = 32;
  double p_max = 1.0;
  double upper_level_weight = 0.1;

  /// Depth/stride conventions of a scheme: ff (1, 1), bf (5, 1), bb (5, 5).
  static HPNetConfig for_scheme(Scheme scheme, std::size_t levels,
                                std::vector<std::size_t> channels);

  void validate() const;

  std::size_t kernel_depth() const { return scheme == Scheme::FrameToFrame ? 1 : 3; }
  /// Channels of the level's input I: 1 at the bottom, channels[l-1] above.
  std::size_t input_channels(std::size_t level) const;
  /// Channels of the external LSTM input (before h_prev is appended).
  std::size_t lstm_input_channels(std::size_t level) const;
  std::size_t level_height(std::size_t level) const { return frame_height >> level; }
  std::size_t level_width(std::size_t level) const { return frame_width >> level; }
  Shape input_shape(std::size_t level) const;
  Shape state_shape(std::size_t level) const;

  double level_weight(std::size_t level) const { return level == 0 ? 1.0 : upper_level_weight; }
  /// 0 for the first block, 1/(K-1) afterwards.
  static double step_weight(std::size_t k, std::size_t n_steps);

  std::string to_text() const;
  static HPNetConfig from_text(const std::string& text);

  bool operator==(const HPNetConfig&) const = default;
};

struct Conv3DLSTMParams {
  ConvKernel3D input_gate, forget_gate, output_gate, cell_gate;

  /// All four gates as one kernel over [z, h_prev], out-channel order i, f, o, g.
  ConvKernel3D fused() const;
};

struct LevelParams {
  ConvKernel3D feedforward;  // dR path, no bias
  ConvKernel3D error;        // E path, no bias
  Conv3DLSTMParams lstm;
  ConvKernel3D prediction;
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct HPNetParams {
  std::vector<LevelParams> levels;

  /// Uniform in +-sqrt(1/fan_in); biases 0 except the forget gate (+1).
  static HPNetParams initialize(const HPNetConfig& config, Rng& rng);
  /// Zero weights and biases except the forget-gate bias (+1).
  static HPNetParams zeros(const HPNetConfig& config);

  /// Every trainable tensor in a fixed order, e.g. "l1.lstm.f.bias".
  std::vector<NamedTensor> named() const;
  HPNetParams clone() const;
};

struct CorticalModuleState {
  Tensor R, H, C, E;
  Tensor I_prev;
  Tensor P_prev;  // prediction made at the previous step

  bool initialized() const {
    return R.defined() && H.defined() && C.defined() && E.defined() && I_prev.defined() &&
           P_prev.defined();
  }
};

using NetworkState = std::vector<CorticalModuleState>;

/// All-zero state for every level.
NetworkState initial_state(const HPNetConfig& config);

struct LSTMOutput {
  Tensor h, c;
};

LSTMOutput lstm3d_step(const Tensor& z, const Tensor& h_prev, const Tensor& c_prev,
                       const Conv3DLSTMParams& params);

struct ModuleOutput {
  CorticalModuleState state;
  Tensor prediction;
  Tensor loss_term;
};

/// One level. `input` is I, `drive` the bottom-up LSTM drive, `h_above_prev`
/// the previous step's H of the level above (undefined at the top).
ModuleOutput module_step(const HPNetConfig& config, const LevelParams& params,
                         std::size_t level, const Tensor& input, const Tensor& drive,
                         const Tensor& h_above_prev, const CorticalModuleState& state);

struct StepOutput {
  NetworkState state;
  Tensor prediction;  // level-0 P, shape [1, d, H, W]
  Tensor loss;        // sum_l lambda_l * loss_l
  std::vector<Tensor> level_losses;
};

/// Bottom-up sweep over all levels. With `predict` false the LSTM and the
/// prediction are skipped (the returned state then has stale H, C, P_prev);
/// used for the last block of a teacher-forced pass whose prediction has no
/// target.
StepOutput network_step(const HPNetConfig& config, const HPNetParams& params,
                        const Tensor& block, const NetworkState& state, bool predict = true);

struct SequenceResult {
  Tensor total_loss;  // sum_k lambda_k * loss_k
  std::vector<double> step_losses;
  std::vector<Tensor> predictions;
  NetworkState final_state;
};

struct SequenceOptions {
  bool keep_predictions = true;
  bool predict_after_last = true;
};

SequenceResult forward_sequence(const HPNetConfig& config, const HPNetParams& params,
                                const std::vector<Tensor>& blocks,
                                const SequenceOptions& options = {});

/// Teacher-forced over the seeds, then closed loop for n_future blocks. The
/// first returned block is the prediction made at the last seed block. Each
/// returned block is clipped to [0, p_max]; its last block_stride frames are
/// new.
std::vector<Tensor> rollout(const HPNetConfig& config, const HPNetParams& params,
                            const std::vector<Tensor>& seed_blocks, std::size_t n_future_blocks);

/// Frame-level rollout: the first seed_frames frames are teacher-forced as
/// blocks, then `horizon` new frames follow. seed_frames must tile exactly
/// into blocks (seed_frames >= d and (seed_frames - d) % stride == 0).
std::vector<Frame> predict_frames(const HPNetConfig& config, const HPNetParams& params,
                                  const std::vector<Frame>& frames, std::size_t seed_frames,
                                  std::size_t horizon);

/// Next closed-loop input: the last d - s frames of `current` followed by the
/// last s frames of `prediction`.
Tensor compose_next_input(const Tensor& current, const Tensor& prediction, std::size_t stride);

}  // namespace hpnet
