#include <algorithm>

#include "hpnet/errors.hpp"
#include "hpnet/network.hpp"

namespace hpnet {

NetworkState initial_state(const HPNetConfig& config) {
  config.validate();
  NetworkState s(config.levels);
  for (std::size_t l = 0; l < config.levels; ++l) {
    const Shape st = config.state_shape(l), in = config.input_shape(l);
    s[l].R = Tensor::zeros(st);
    s[l].H = Tensor::zeros(st);
    s[l].C = Tensor::zeros(st);
    s[l].E = Tensor::zeros(st);
    s[l].I_prev = Tensor::zeros(in);
    s[l].P_prev = Tensor::zeros(in);
  }
  return s;
}

LSTMOutput lstm3d_step(const Tensor& z, const Tensor& h_prev, const Tensor& c_prev,
                       const Conv3DLSTMParams& params) {
  const std::size_t ch = params.input_gate.weight.dim(0);
  if (h_prev.shape() != c_prev.shape() || h_prev.dim(0) != ch) {
    throw DimensionError("lstm3d_step: state shapes " + shape_str(h_prev.shape()) + " / " +
                         shape_str(c_prev.shape()) + " do not match " + std::to_string(ch) +
                         " hidden channels");
  }
  const Tensor gates = conv3d(concat_channels({z, h_prev}), params.fused());
  const Tensor i = sigmoid(slice_channels(gates, 0, ch));
  const Tensor f = sigmoid(slice_channels(gates, ch, ch));
  const Tensor o = sigmoid(slice_channels(gates, 2 * ch, ch));
  const Tensor g = tanh(slice_channels(gates, 3 * ch, ch));
  Tensor c = add(hadamard(f, c_prev), hadamard(i, g));
  Tensor h = hadamard(o, tanh(c));
  return {std::move(h), std::move(c)};
}

ModuleOutput module_step(const HPNetConfig& config, const LevelParams& params,
                         std::size_t level, const Tensor& input, const Tensor& drive,
                         const Tensor& h_above_prev, const CorticalModuleState& state) {
  if (!state.initialized()) throw ContractError("module_step: state is not initialized");
  if (input.shape() != state.I_prev.shape()) {
    throw DimensionError("module_step: input " + shape_str(input.shape()) +
                         " does not match level " + std::to_string(level + 1) + " input " +
                         shape_str(state.I_prev.shape()));
  }
  ModuleOutput out;
  auto& next = out.state;
  next.I_prev = input;
  next.R = add(state.R, sparse_conv3d(sub(input, state.I_prev), params.feedforward));
  next.E = sparse_conv3d(sub(input, state.P_prev), params.error);
  out.loss_term = mean_squared_error(input, state.P_prev);

  std::vector<Tensor> parts{drive, next.E};
  if (h_above_prev.defined()) parts.push_back(upsample_spatial(h_above_prev));
  auto [h, c] = lstm3d_step(concat_channels(parts), state.H, state.C, params.lstm);
  next.H = std::move(h);
  next.C = std::move(c);

  Tensor p = relu(conv3d(next.H, params.prediction));
  if (level == 0) p = satlu(p, config.p_max);
  next.P_prev = p;
  out.prediction = std::move(p);
  return out;
}

StepOutput network_step(const HPNetConfig& config, const HPNetParams& params,
                        const Tensor& block, const NetworkState& state, bool predict) {
  if (state.size() != config.levels || params.levels.size() != config.levels) {
    throw ContractError("network_step: state/params do not match the configured level count");
  }
  if (block.shape() != config.input_shape(0)) {
    throw DimensionError("network_step: block " + shape_str(block.shape()) +
                         " does not match configured input " + shape_str(config.input_shape(0)));
  }
  StepOutput out;
  out.state.resize(config.levels);
  Tensor loss;
  for (std::size_t l = 0; l < config.levels; ++l) {
    Tensor input, drive;
    if (l == 0) {
      input = drive = block;
    } else {
      const auto& below = out.state[l - 1];
      input = maxpool_spatial(relu(below.R));
      drive = maxpool_spatial(relu(concat_channels({below.R, below.E})));
    }
    const Tensor above = l + 1 < config.levels ? state[l + 1].H : Tensor();
    Tensor term;
    if (predict) {
      auto m = module_step(config, params.levels[l], l, input, drive, above, state[l]);
      out.state[l] = std::move(m.state);
      term = m.loss_term;
      if (l == 0) out.prediction = m.prediction;
    } else {
      if (!state[l].initialized()) throw ContractError("network_step: state is not initialized");
      const auto& lp = params.levels[l];
      auto& next = out.state[l];
      next = state[l];
      next.I_prev = input;
      next.R = add(state[l].R, sparse_conv3d(sub(input, state[l].I_prev), lp.feedforward));
      next.E = sparse_conv3d(sub(input, state[l].P_prev), lp.error);
      term = mean_squared_error(input, state[l].P_prev);
    }
    out.level_losses.push_back(term);
    const Tensor weighted = scale(term, config.level_weight(l));
    loss = loss.defined() ? add(loss, weighted) : weighted;
  }
  out.loss = loss;
  return out;
}

SequenceResult forward_sequence(const HPNetConfig& config, const HPNetParams& params,
                                const std::vector<Tensor>& blocks,
                                const SequenceOptions& options) {
  if (blocks.empty()) throw ContractError("forward_sequence: empty sequence");
  SequenceResult r;
  NetworkState state = initial_state(config);
  const std::size_t n = blocks.size();
  Tensor total;
  for (std::size_t k = 0; k < n; ++k) {
    const bool predict = options.predict_after_last || k + 1 < n;
    auto step = network_step(config, params, blocks[k], state, predict);
    r.step_losses.push_back(step.loss.item());
    const Tensor weighted = scale(step.loss, HPNetConfig::step_weight(k, n));
    total = total.defined() ? add(total, weighted) : weighted;
    if (options.keep_predictions && predict) r.predictions.push_back(step.prediction);
    state = std::move(step.state);
  }
  r.total_loss = total;
  r.final_state = std::move(state);
  return r;
}

Tensor compose_next_input(const Tensor& current, const Tensor& prediction, std::size_t stride) {
  if (current.shape() != prediction.shape() || current.rank() != 4) {
    throw DimensionError("compose_next_input: shapes " + shape_str(current.shape()) + " and " +
                         shape_str(prediction.shape()));
  }
  const std::size_t c = current.dim(0), d = current.dim(1);
  if (stride < 1 || stride > d) throw ContractError("compose_next_input: stride out of range");
  const std::size_t frame = current.dim(2) * current.dim(3);
  auto cur = current.data(), pred = prediction.data();
  std::vector<double> out(current.numel());
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t t = 0; t < d; ++t) {
      // frames [0, d - s) come from current[s..d), the rest from pred[d - s..d)
      const double* src = t + stride < d ? cur.data() + ((ch * d) + t + stride) * frame
                                         : pred.data() + ((ch * d) + t) * frame;
      std::copy(src, src + frame, out.begin() + (ch * d + t) * frame);
    }
  return Tensor::from_data(current.shape(), std::move(out));
}

std::vector<Tensor> rollout(const HPNetConfig& config, const HPNetParams& params,
                            const std::vector<Tensor>& seed_blocks, std::size_t n_future_blocks) {
  if (n_future_blocks < 1) throw ContractError("rollout: n_future_blocks must be >= 1");
  if (seed_blocks.empty()) throw ContractError("rollout: no seed blocks");
  NoGradGuard no_grad;
  NetworkState state = initial_state(config);
  Tensor last, prediction;
  auto advance = [&](const Tensor& block) {
    auto step = network_step(config, params, block, state);
    state = std::move(step.state);
    prediction = step.prediction;
    last = block;
  };
  for (const auto& b : seed_blocks) advance(b);

  std::vector<Tensor> out;
  for (std::size_t j = 0; j < n_future_blocks; ++j) {
    std::vector<double> clipped(prediction.data().begin(), prediction.data().end());
    for (auto& v : clipped) v = std::clamp(v, 0.0, config.p_max);
    out.push_back(Tensor::from_data(prediction.shape(), std::move(clipped)));
    if (j + 1 < n_future_blocks) advance(compose_next_input(last, out.back(), config.block_stride));
  }
  return out;
}

std::vector<Frame> predict_frames(const HPNetConfig& config, const HPNetParams& params,
                                  const std::vector<Frame>& frames, std::size_t seed_frames,
                                  std::size_t horizon) {
  const std::size_t d = config.block_depth, s = config.block_stride;
  if (seed_frames > frames.size() || seed_frames < d || (seed_frames - d) % s != 0) {
    throw ContractError("predict_frames: " + std::to_string(seed_frames) +
                        " seed frames do not tile into blocks of depth " + std::to_string(d) +
                        " and stride " + std::to_string(s) + " (sequence has " +
                        std::to_string(frames.size()) + ")");
  }
  std::vector<Frame> out;
  if (horizon == 0) return out;
  const std::vector<Frame> seed(frames.begin(), frames.begin() + seed_frames);
  const auto blocks = rollout(config, params, extract_blocks(seed, d, s), (horizon + s - 1) / s);
  for (const auto& b : blocks)
    for (std::size_t t = d - s; t < d && out.size() < horizon; ++t) out.push_back(block_frame(b, t));
  return out;
}

}  // namespace hpnet
