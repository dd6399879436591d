#include <chrono>
#include <cmath>
#include <numeric>

#include "hpnet/errors.hpp"
#include "hpnet/training.hpp"

namespace hpnet {

TrainState make_train_state(const HPNetConfig& config, std::uint64_t seed, AdamConfig adam) {
  config.validate();
  TrainState s;
  s.config = config;
  s.rng = Rng(seed);
  s.params = HPNetParams::initialize(config, s.rng);
  s.optimizer = make_optimizer(s.params.named(), adam);
  return s;
}

double evaluate_loss(const HPNetConfig& config, const HPNetParams& params,
                     const std::vector<BlockSequence>& sequences) {
  if (sequences.empty()) return std::nan("");
  NoGradGuard no_grad;
  const SequenceOptions opts{false, false};
  double total = 0.0;
  for (const auto& seq : sequences) total += forward_sequence(config, params, seq, opts).total_loss.item();
  return total / static_cast<double>(sequences.size());
}

std::vector<TrainRecord> train(TrainState& state, const std::vector<BlockSequence>& train_set,
                               const std::vector<BlockSequence>& val_set, std::size_t epochs,
                               const TrainOptions& options) {
  if (epochs > 0 && train_set.empty()) throw ContractError("train: empty training set");
  const auto named = state.params.named();
  const SequenceOptions opts{false, false};
  std::vector<TrainRecord> history;
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    state.rng.shuffle(order.begin(), order.end());

    std::vector<double> losses(train_set.size(), 0.0);
    for (std::size_t idx : order) {
      double loss_value;
      {
        auto result = forward_sequence(state.config, state.params, train_set[idx], opts);
        loss_value = result.total_loss.item();
        if (!std::isfinite(loss_value) || loss_value > options.divergence_limit) {
          throw NumericError("training diverged: epoch " + std::to_string(state.epochs_done + 1) +
                             ", sequence " + std::to_string(idx) + ", loss " +
                             std::to_string(loss_value));
        }
        if (result.total_loss.requires_grad()) backward(result.total_loss);
      }
      if (options.clip_norm > 0.0) clip_grad_norm(named, options.clip_norm);
      adam_step(named, state.optimizer);
      losses[idx] = loss_value;
    }
    ++state.epochs_done;

    TrainRecord rec;
    rec.epoch = static_cast<std::size_t>(state.epochs_done);
    rec.train_loss = std::accumulate(losses.begin(), losses.end(), 0.0) /
                     static_cast<double>(losses.size());
    rec.val_loss = evaluate_loss(state.config, state.params, val_set);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return history;
}

}  // namespace hpnet
