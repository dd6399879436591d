#include "hpnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "hpnet/conv_kernels.hpp"
#include "hpnet/errors.hpp"
#include "hpnet/parallel.hpp"

namespace hpnet {

using detail::make_result;
using detail::Node;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

void require_rank(const char* op, const Tensor& x, std::size_t rank) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_str(x.shape()));
  }
}

// Accumulates a gradient into `parent` when it participates in the graph.
template <class F>
void accumulate(const std::shared_ptr<Node>& parent, F&& f) {
  if (!parent->requires_grad) return;
  f(parent->grad_buffer());
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  auto px = x.node();
  return make_result(x.shape(), std::move(out), {x}, [px, deriv](Node& self) {
    accumulate(px, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i)
        g[i] += self.grad[i] * deriv(px->data[i], self.data[i]);
    });
  });
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto da = a.data(), db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] + db[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
    accumulate(pa, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    accumulate(pb, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto da = a.data(), db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] - db[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
    accumulate(pa, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
    accumulate(pb, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    });
  });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("hadamard", a, b);
  auto da = a.data(), db = b.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[i] * db[i];
  auto pa = a.node(), pb = b.node();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& self) {
    accumulate(pa, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pb->data[i];
    });
    accumulate(pb, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * pa->data[i];
    });
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor satlu(const Tensor& x, double p_max) {
  return unary(
      x, [p_max](double v) { return std::min(p_max, v); },
      [p_max](double v, double) { return v < p_max ? 1.0 : 0.0; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  auto px = x.node();
  return make_result({1}, {s}, {x}, [px](Node& self) {
    accumulate(px, [&](std::span<double> g) {
      for (auto& v : g) v += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor mean_squared_error(const Tensor& a, const Tensor& b) {
  require_same_shape("mean_squared_error", a, b);
  auto da = a.data(), db = b.data();
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) {
    const double d = da[i] - db[i];
    s += d * d;
  }
  const double inv_n = 1.0 / static_cast<double>(da.size());
  auto pa = a.node(), pb = b.node();
  return make_result({1}, {s * inv_n}, {a, b}, [pa, pb, inv_n](Node& self) {
    const double k = 2.0 * inv_n * self.grad[0];
    accumulate(pa, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += k * (pa->data[i] - pb->data[i]);
    });
    accumulate(pb, [&](std::span<double> g) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= k * (pa->data[i] - pb->data[i]);
    });
  });
}

// ---- structure -------------------------------------------------------------

Tensor concat_channels(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no operands");
  Shape rest(parts[0].shape().begin() + 1, parts[0].shape().end());
  std::size_t rows = 0, total = 0;
  for (const auto& p : parts) {
    Shape r(p.shape().begin() + 1, p.shape().end());
    if (r != rest) {
      throw DimensionError("concat_channels: non-channel dims differ " +
                           shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    rows += p.dim(0);
    total += p.numel();
  }
  std::vector<double> out;
  out.reserve(total);
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    nodes.push_back(p.node());
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  return make_result(std::move(shape), std::move(out), parts, [nodes](Node& self) {
    std::size_t offset = 0;
    for (const auto& n : nodes) {
      accumulate(n, [&](std::span<double> g) {
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[offset + i];
      });
      offset += n->data.size();
    }
  });
}

Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.dim(0)) {
    throw DimensionError("slice_channels: rows [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " +
                         shape_str(x.shape()));
  }
  const std::size_t row = x.numel() / x.dim(0);
  auto d = x.data();
  std::vector<double> out(d.begin() + begin * row, d.begin() + (begin + count) * row);
  Shape shape = x.shape();
  shape[0] = count;
  auto px = x.node();
  const std::size_t offset = begin * row;
  return make_result(std::move(shape), std::move(out), {x}, [px, offset](Node& self) {
    accumulate(px, [&](std::span<double> g) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
    });
  });
}

// ---- spatial resampling ----------------------------------------------------

Tensor maxpool_spatial(const Tensor& x) {
  require_rank("maxpool_spatial", x, 4);
  const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 != 0 || w % 2 != 0) {
    throw DimensionError("maxpool_spatial: H and W must be even, got " + shape_str(x.shape()));
  }
  const std::size_t ho = h / 2, wo = w / 2;
  auto in = x.data();
  std::vector<double> out(c * t * ho * wo);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t p = 0; p < c * t; ++p)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = (p * h + 2 * i) * w + 2 * j;
        for (std::size_t di = 0; di < 2; ++di)
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const std::size_t idx = (p * h + 2 * i + di) * w + 2 * j + dj;
            if (in[idx] > in[best]) best = idx;
          }
        const std::size_t o = (p * ho + i) * wo + j;
        out[o] = in[best];
        (*argmax)[o] = best;
      }
  auto px = x.node();
  return make_result({c, t, ho, wo}, std::move(out), {x}, [px, argmax](Node& self) {
    accumulate(px, [&](std::span<double> g) {
      for (std::size_t o = 0; o < self.grad.size(); ++o) g[(*argmax)[o]] += self.grad[o];
    });
  });
}

Tensor upsample_spatial(const Tensor& x) {
  require_rank("upsample_spatial", x, 4);
  const std::size_t c = x.dim(0), t = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t h2 = 2 * h, w2 = 2 * w;
  auto in = x.data();
  std::vector<double> out(c * t * h2 * w2);
  for (std::size_t p = 0; p < c * t; ++p)
    for (std::size_t i = 0; i < h2; ++i)
      for (std::size_t j = 0; j < w2; ++j)
        out[(p * h2 + i) * w2 + j] = in[(p * h + i / 2) * w + j / 2];
  auto px = x.node();
  return make_result({c, t, h2, w2}, std::move(out), {x}, [px, h, w](Node& self) {
    accumulate(px, [&](std::span<double> g) {
      const std::size_t h2 = 2 * h, w2 = 2 * w;
      const std::size_t planes = g.size() / (h * w);
      for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t i = 0; i < h2; ++i)
          for (std::size_t j = 0; j < w2; ++j)
            g[(p * h + i / 2) * w + j / 2] += self.grad[(p * h2 + i) * w2 + j];
    });
  });
}

// ---- convolution -----------------------------------------------------------

namespace {

kernels::ConvGeometry conv_geometry(const char* op, const Tensor& input,
                                    const ConvKernel3D& kernel) {
  require_rank(op, input, 4);
  if (!kernel.weight.defined() || kernel.weight.rank() != 5) {
    throw DimensionError(std::string(op) + ": kernel weight must have rank 5");
  }
  const auto& ws = kernel.weight.shape();
  if (ws[1] != input.dim(0)) {
    throw DimensionError(std::string(op) + ": input " + shape_str(input.shape()) +
                         " does not match kernel " + shape_str(ws));
  }
  if (ws[2] % 2 == 0 || ws[3] % 2 == 0 || ws[4] % 2 == 0) {
    throw DimensionError(std::string(op) + ": kernel extents must be odd, got " + shape_str(ws));
  }
  kernels::ConvGeometry g;
  g.cin = ws[1];
  g.cout = ws[0];
  g.t = input.dim(1);
  g.h = input.dim(2);
  g.w = input.dim(3);
  g.kt = ws[2];
  g.kh = ws[3];
  g.kw = ws[4];
  return g;
}

void run_forward(const kernels::ConvGeometry& g, std::span<const double> padded,
                 std::span<const double> weights, std::span<double> out) {
  const auto& k = kernels::active_kernels();
  parallel_for(g.cout, k.channel_block, [&](std::size_t b, std::size_t e) {
    k.forward(g, padded, weights, out, b, e);
  });
}

void run_weight_grad(const kernels::ConvGeometry& g, std::span<const double> padded,
                     std::span<const double> grad_out, std::span<double> grad_w) {
  const auto& k = kernels::active_kernels();
  parallel_for(g.cout, k.channel_block, [&](std::size_t b, std::size_t e) {
    k.weight_grad(g, padded, grad_out, grad_w, b, e);
  });
}

// dL/d(input) of a same-padded correlation: correlate the padded output
// gradient with the spatially flipped, channel-transposed kernel.
void accumulate_input_grad(const kernels::ConvGeometry& g, std::span<const double> weights,
                           std::span<const double> grad_out, std::span<double> grad_in) {
  kernels::ConvGeometry gt = g;
  std::swap(gt.cin, gt.cout);
  const std::size_t taps = g.taps();
  std::vector<double> flipped(weights.size());
  for (std::size_t co = 0; co < g.cout; ++co)
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t k = 0; k < taps; ++k)
        flipped[(ci * g.cout + co) * taps + (taps - 1 - k)] = weights[(co * g.cin + ci) * taps + k];
  kernels::PaddedBuffer padded;
  kernels::pad_input(gt, gt.cin, grad_out, padded);
  std::vector<double> dx(gt.cout * gt.out_plane());
  run_forward(gt, padded, flipped, dx);
  for (std::size_t i = 0; i < dx.size(); ++i) grad_in[i] += dx[i];
}

}  // namespace

Tensor conv3d(const Tensor& input, const ConvKernel3D& kernel) {
  const auto g = conv_geometry("conv3d", input, kernel);
  const bool has_bias = kernel.bias.defined();
  if (has_bias && (kernel.bias.rank() != 1 || kernel.bias.dim(0) != g.cout)) {
    throw DimensionError("conv3d: bias " + shape_str(kernel.bias.shape()) +
                         " does not match kernel " + shape_str(kernel.weight.shape()));
  }
  auto padded = std::make_shared<kernels::PaddedBuffer>();
  kernels::pad_input(g, g.cin, input.data(), *padded);
  std::vector<double> out(g.cout * g.out_plane());
  run_forward(g, *padded, kernel.weight.data(), out);
  if (has_bias) {
    auto b = kernel.bias.data();
    for (std::size_t co = 0; co < g.cout; ++co) {
      double* o = out.data() + co * g.out_plane();
      for (std::size_t i = 0; i < g.out_plane(); ++i) o[i] += b[co];
    }
  }

  std::vector<Tensor> parents{input, kernel.weight};
  if (has_bias) parents.push_back(kernel.bias);
  auto pin = input.node(), pw = kernel.weight.node();
  auto pb = has_bias ? kernel.bias.node() : nullptr;
  return make_result({g.cout, g.t, g.h, g.w}, std::move(out), std::move(parents),
                     [g, pin, pw, pb, padded](Node& self) {
                       accumulate(pin, [&](std::span<double> gi) {
                         accumulate_input_grad(g, pw->data, self.grad, gi);
                       });
                       accumulate(pw, [&](std::span<double> gw) {
                         run_weight_grad(g, *padded, self.grad, gw);
                       });
                       if (pb) {
                         accumulate(pb, [&](std::span<double> gb) {
                           for (std::size_t co = 0; co < g.cout; ++co) {
                             double s = 0.0;
                             const double* go = self.grad.data() + co * g.out_plane();
                             for (std::size_t i = 0; i < g.out_plane(); ++i) s += go[i];
                             gb[co] += s;
                           }
                         });
                       }
                     });
}

Tensor sparse_conv3d(const Tensor& delta_input, const ConvKernel3D& kernel) {
  using kernels::SparseSite;
  const auto g = conv_geometry("sparse_conv3d", delta_input, kernel);
  const std::size_t taps = g.taps(), plane = g.out_plane(), cout = g.cout;

  auto sites = std::make_shared<std::vector<SparseSite>>();
  auto in = delta_input.data();
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t t = 0; t < g.t; ++t)
      for (std::size_t h = 0; h < g.h; ++h)
        for (std::size_t w = 0; w < g.w; ++w) {
          const double v = in[((ci * g.t + t) * g.h + h) * g.w + w];
          if (v != 0.0) sites->push_back({ci, t, h, w, v});
        }

  // Weights as [ci][tap][co] and output as [pos][co]: each scatter is a
  // contiguous axpy over output channels.
  auto wd = kernel.weight.data();
  std::vector<double> wt(wd.size());
  for (std::size_t co = 0; co < cout; ++co)
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t k = 0; k < taps; ++k)
        wt[(ci * taps + k) * cout + co] = wd[(co * g.cin + ci) * taps + k];
  std::vector<double> acc(plane * cout, 0.0);
  kernels::active_kernels().sparse_scatter(g, *sites, wt, acc);
  std::vector<double> out(cout * plane);
  for (std::size_t pos = 0; pos < plane; ++pos)
    for (std::size_t co = 0; co < cout; ++co) out[co * plane + pos] = acc[pos * cout + co];

  auto pin = delta_input.node(), pw = kernel.weight.node();
  return make_result(
      {g.cout, g.t, g.h, g.w}, std::move(out), {delta_input, kernel.weight},
      [g, pin, pw, sites](Node& self) {
        accumulate(pin, [&](std::span<double> gi) {
          accumulate_input_grad(g, pw->data, self.grad, gi);
        });
        accumulate(pw, [&](std::span<double> gw) {
          const std::size_t taps = g.taps(), plane = g.out_plane(), cout = g.cout;
          std::vector<double> go(plane * cout);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t pos = 0; pos < plane; ++pos)
              go[pos * cout + co] = self.grad[co * plane + pos];
          std::vector<double> gwt(g.cin * taps * cout, 0.0);
          kernels::active_kernels().sparse_weight_grad(g, *sites, go, gwt);
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t ci = 0; ci < g.cin; ++ci)
              for (std::size_t k = 0; k < taps; ++k)
                gw[(co * g.cin + ci) * taps + k] += gwt[(ci * taps + k) * cout + co];
        });
      });
}

}  // namespace hpnet
