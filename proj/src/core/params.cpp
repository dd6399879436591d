#include <cmath>

#include "hpnet/network.hpp"

namespace hpnet {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  std::vector<double> data(shape_numel(shape));
  for (auto& v : data) v = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(data), true);
}

struct KernelSpec {
  std::size_t cout, cin, kt;
  bool bias;
  double bias_value = 0.0;
};

ConvKernel3D make_kernel(const KernelSpec& s, Rng* rng) {
  Shape shape{s.cout, s.cin, s.kt, 3, 3};
  const double fan_in = static_cast<double>(s.cin * s.kt * 9);
  ConvKernel3D k;
  k.weight = rng ? uniform_tensor(shape, std::sqrt(1.0 / fan_in), *rng)
                 : Tensor::zeros(shape, true);
  if (s.bias) k.bias = Tensor::full({s.cout}, s.bias_value, true);
  return k;
}

HPNetParams build(const HPNetConfig& config, Rng* rng) {
  config.validate();
  const std::size_t kt = config.kernel_depth();
  HPNetParams p;
  for (std::size_t l = 0; l < config.levels; ++l) {
    const std::size_t c = config.channels[l];
    const std::size_t cin = config.input_channels(l);
    const std::size_t zin = config.lstm_input_channels(l) + c;
    LevelParams lp;
    lp.feedforward = make_kernel({c, cin, kt, false}, rng);
    lp.error = make_kernel({c, cin, kt, false}, rng);
    lp.lstm.input_gate = make_kernel({c, zin, kt, true}, rng);
    lp.lstm.forget_gate = make_kernel({c, zin, kt, true, 1.0}, rng);
    lp.lstm.output_gate = make_kernel({c, zin, kt, true}, rng);
    lp.lstm.cell_gate = make_kernel({c, zin, kt, true}, rng);
    lp.prediction = make_kernel({cin, c, kt, true}, rng);
    p.levels.push_back(std::move(lp));
  }
  return p;
}

void push_kernel(std::vector<NamedTensor>& out, const std::string& prefix, const ConvKernel3D& k) {
  out.push_back({prefix + ".weight", k.weight});
  if (k.bias.defined()) out.push_back({prefix + ".bias", k.bias});
}

ConvKernel3D clone_kernel(const ConvKernel3D& k) {
  ConvKernel3D c;
  c.weight = k.weight.detach();
  c.weight.set_requires_grad(true);
  if (k.bias.defined()) {
    c.bias = k.bias.detach();
    c.bias.set_requires_grad(true);
  }
  return c;
}

}  // namespace

ConvKernel3D Conv3DLSTMParams::fused() const {
  return {concat_channels({input_gate.weight, forget_gate.weight, output_gate.weight,
                           cell_gate.weight}),
          concat_channels({input_gate.bias, forget_gate.bias, output_gate.bias, cell_gate.bias})};
}

HPNetParams HPNetParams::initialize(const HPNetConfig& config, Rng& rng) {
  return build(config, &rng);
}

HPNetParams HPNetParams::zeros(const HPNetConfig& config) { return build(config, nullptr); }

std::vector<NamedTensor> HPNetParams::named() const {
  std::vector<NamedTensor> out;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lp = levels[l];
    const std::string pre = "l" + std::to_string(l + 1);
    push_kernel(out, pre + ".ff", lp.feedforward);
    push_kernel(out, pre + ".err", lp.error);
    push_kernel(out, pre + ".lstm.i", lp.lstm.input_gate);
    push_kernel(out, pre + ".lstm.f", lp.lstm.forget_gate);
    push_kernel(out, pre + ".lstm.o", lp.lstm.output_gate);
    push_kernel(out, pre + ".lstm.g", lp.lstm.cell_gate);
    push_kernel(out, pre + ".pred", lp.prediction);
  }
  return out;
}

HPNetParams HPNetParams::clone() const {
  HPNetParams p;
  for (const auto& lp : levels) {
    LevelParams c;
    c.feedforward = clone_kernel(lp.feedforward);
    c.error = clone_kernel(lp.error);
    c.lstm.input_gate = clone_kernel(lp.lstm.input_gate);
    c.lstm.forget_gate = clone_kernel(lp.lstm.forget_gate);
    c.lstm.output_gate = clone_kernel(lp.lstm.output_gate);
    c.lstm.cell_gate = clone_kernel(lp.lstm.cell_gate);
    c.prediction = clone_kernel(lp.prediction);
    p.levels.push_back(std::move(c));
  }
  return p;
}

}  // namespace hpnet
