#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "hpnet/data.hpp"
#include "hpnet/tensor.hpp"

namespace hpnet {

/// Mean squared difference on the 0-255 scale.
double frame_mse(const Frame& pred, const Frame& truth);
std::vector<double> mse(const std::vector<Frame>& pred, const std::vector<Frame>& truth);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 1, averaged over all valid window positions.
double ssim(const Frame& a, const Frame& b);

std::vector<Frame> copy_last_baseline(const std::vector<Frame>& seed_frames, std::size_t horizon);

/// Nearest-class-centroid probe. Each representation [C, ...] is averaged to
/// a C-vector; features are standardised with training-split statistics.
/// Split: per class, a seeded shuffle puts round(20%) (at least 1) of the
/// items in the test set. Returns test accuracy.
double decode_accuracy(const std::vector<Tensor>& representations,
                       const std::vector<int>& labels, std::uint64_t split_seed);

struct EvalReport {
  std::vector<double> mse, ssim;
  std::vector<double> baseline_mse, baseline_ssim;

  double mean_mse() const;
  double mean_ssim() const;
  double mean_baseline_mse() const;
  double mean_baseline_ssim() const;
};

EvalReport evaluate(const std::vector<Frame>& pred, const std::vector<Frame>& truth,
                    const std::vector<Frame>& baseline);

/// "# hpnet-eval v1" header, one `frame<TAB>mse<TAB>ssim` row per frame,
/// then the aggregates and baseline deltas as comment lines.
void write_eval_report(std::ostream& os, const EvalReport& report);

}  // namespace hpnet
