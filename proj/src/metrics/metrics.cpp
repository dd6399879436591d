#include "hpnet/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>

#include "hpnet/errors.hpp"
#include "hpnet/random.hpp"

namespace hpnet {

namespace {

void require_same_size(const char* op, const Frame& a, const Frame& b) {
  if (a.height != b.height || a.width != b.width) {
    throw DimensionError(std::string(op) + ": frame " + std::to_string(a.height) + "x" +
                         std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" +
                         std::to_string(b.width));
  }
}

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> g{};
  double s = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    s += g[i];
  }
  for (auto& v : g) v /= s;
  return g;
}

// Separable valid-mode Gaussian filter.
std::vector<double> filter_valid(const std::vector<double>& in, std::size_t h, std::size_t w) {
  static const auto g = gaussian_taps();
  const std::size_t ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * in[r * w + c + k];
      rows[r * ow + c] = s;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double s = 0.0;
      for (int k = 0; k < kWindow; ++k) s += g[k] * rows[(r + k) * ow + c];
      out[r * ow + c] = s;
    }
  return out;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double frame_mse(const Frame& pred, const Frame& truth) {
  require_same_size("mse", pred, truth);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const double d = 255.0 * pred.pixels[i] - 255.0 * truth.pixels[i];
    s += d * d;
  }
  return s / static_cast<double>(pred.pixels.size());
}

std::vector<double> mse(const std::vector<Frame>& pred, const std::vector<Frame>& truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("mse: " + std::to_string(pred.size()) + " predicted vs " +
                         std::to_string(truth.size()) + " true frames");
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < pred.size(); ++i) out.push_back(frame_mse(pred[i], truth[i]));
  return out;
}

double ssim(const Frame& a, const Frame& b) {
  require_same_size("ssim", a, b);
  if (a.height < kWindow || a.width < kWindow) {
    throw ContractError("ssim: frames smaller than the 11x11 window");
  }
  const std::size_t h = a.height, w = a.width, n = h * w;
  std::vector<double> aa(n), bb(n), ab(n);
  for (std::size_t i = 0; i < n; ++i) {
    aa[i] = a.pixels[i] * a.pixels[i];
    bb[i] = b.pixels[i] * b.pixels[i];
    ab[i] = a.pixels[i] * b.pixels[i];
  }
  const auto mu_a = filter_valid(a.pixels, h, w), mu_b = filter_valid(b.pixels, h, w);
  const auto e_aa = filter_valid(aa, h, w), e_bb = filter_valid(bb, h, w);
  const auto e_ab = filter_valid(ab, h, w);
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0), c2 = (0.03 * 1.0) * (0.03 * 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = e_aa[i] - mu_a[i] * mu_a[i];
    const double vb = e_bb[i] - mu_b[i] * mu_b[i];
    const double cov = e_ab[i] - mu_a[i] * mu_b[i];
    const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
    const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2);
    total += num / den;
  }
  return total / static_cast<double>(mu_a.size());
}

std::vector<Frame> copy_last_baseline(const std::vector<Frame>& seed_frames,
                                      std::size_t horizon) {
  if (seed_frames.empty()) throw ContractError("copy_last_baseline: no seed frames");
  return std::vector<Frame>(horizon, seed_frames.back());
}

double decode_accuracy(const std::vector<Tensor>& representations,
                       const std::vector<int>& labels, std::uint64_t split_seed) {
  if (representations.size() != labels.size()) {
    throw DimensionError("decode_accuracy: " + std::to_string(representations.size()) +
                         " representations for " + std::to_string(labels.size()) + " labels");
  }
  if (representations.empty()) throw ContractError("decode_accuracy: no representations");
  const std::size_t dim = representations[0].dim(0);
  std::vector<std::vector<double>> feats;
  for (const auto& r : representations) {
    if (r.dim(0) != dim) throw DimensionError("decode_accuracy: channel counts differ");
    const std::size_t per = r.numel() / dim;
    std::vector<double> f(dim, 0.0);
    auto d = r.data();
    for (std::size_t c = 0; c < dim; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < per; ++i) s += d[c * per + i];
      f[c] = s / static_cast<double>(per);
    }
    feats.push_back(std::move(f));
  }

  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw ContractError("decode_accuracy: need at least 2 classes");

  Rng rng(split_seed);
  std::vector<std::size_t> train, test;
  for (int c : classes) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) idx.push_back(i);
    if (idx.size() < 2) {
      throw ContractError("decode_accuracy: class " + std::to_string(c) + " has " +
                          std::to_string(idx.size()) + " sequence(s), need at least 2");
    }
    rng.shuffle(idx.begin(), idx.end());
    const std::size_t n_test = std::max<std::size_t>(1, std::lround(0.2 * double(idx.size())));
    test.insert(test.end(), idx.begin(), idx.begin() + n_test);
    train.insert(train.end(), idx.begin() + n_test, idx.end());
  }

  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (auto i : train)
    for (std::size_t k = 0; k < dim; ++k) mu[k] += feats[i][k];
  for (auto& v : mu) v /= static_cast<double>(train.size());
  for (auto i : train)
    for (std::size_t k = 0; k < dim; ++k) sd[k] += (feats[i][k] - mu[k]) * (feats[i][k] - mu[k]);
  for (auto& v : sd) v = std::sqrt(v / static_cast<double>(train.size()));
  auto standard = [&](const std::vector<double>& f) {
    std::vector<double> z(dim);
    for (std::size_t k = 0; k < dim; ++k) z[k] = sd[k] > 0.0 ? (f[k] - mu[k]) / sd[k] : 0.0;
    return z;
  };

  std::vector<std::vector<double>> centroid(classes.size(), std::vector<double>(dim, 0.0));
  std::vector<std::size_t> count(classes.size(), 0);
  auto class_slot = [&](int label) {
    return std::size_t(std::lower_bound(classes.begin(), classes.end(), label) - classes.begin());
  };
  for (auto i : train) {
    const auto z = standard(feats[i]);
    const std::size_t s = class_slot(labels[i]);
    for (std::size_t k = 0; k < dim; ++k) centroid[s][k] += z[k];
    ++count[s];
  }
  for (std::size_t s = 0; s < classes.size(); ++s)
    for (auto& v : centroid[s]) v /= static_cast<double>(count[s]);

  std::size_t correct = 0;
  for (auto i : test) {
    const auto z = standard(feats[i]);
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t s = 0; s < classes.size(); ++s) {
      double d = 0.0;
      for (std::size_t k = 0; k < dim; ++k) d += (z[k] - centroid[s][k]) * (z[k] - centroid[s][k]);
      if (d < best_d) best_d = d, best = s;  // strict: ties keep the lowest label
    }
    if (classes[best] == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double EvalReport::mean_mse() const { return mean_of(mse); }
double EvalReport::mean_ssim() const { return mean_of(ssim); }
double EvalReport::mean_baseline_mse() const { return mean_of(baseline_mse); }
double EvalReport::mean_baseline_ssim() const { return mean_of(baseline_ssim); }

EvalReport evaluate(const std::vector<Frame>& pred, const std::vector<Frame>& truth,
                    const std::vector<Frame>& baseline) {
  EvalReport r;
  r.mse = hpnet::mse(pred, truth);
  r.baseline_mse = hpnet::mse(baseline, truth);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    r.ssim.push_back(hpnet::ssim(pred[i], truth[i]));
    r.baseline_ssim.push_back(hpnet::ssim(baseline[i], truth[i]));
  }
  return r;
}

void write_eval_report(std::ostream& os, const EvalReport& r) {
  const auto old_precision = os.precision(10);
  os << "# hpnet-eval v1\n";
  for (std::size_t i = 0; i < r.mse.size(); ++i)
    os << i << '\t' << r.mse[i] << '\t' << r.ssim[i] << '\n';
  os << "# mean_mse\t" << r.mean_mse() << "\n# mean_ssim\t" << r.mean_ssim() << '\n';
  if (!r.baseline_mse.empty()) {
    os << "# baseline_mean_mse\t" << r.mean_baseline_mse() << "\n# baseline_mean_ssim\t"
       << r.mean_baseline_ssim() << "\n# delta_mse\t" << r.mean_mse() - r.mean_baseline_mse()
       << "\n# delta_ssim\t" << r.mean_ssim() - r.mean_baseline_ssim() << '\n';
  }
  os.precision(old_precision);
}

}  // namespace hpnet
