#include <algorithm>

#include "hpnet/conv_kernels.hpp"
#include "sparse_impl.hpp"

namespace hpnet::kernels {
namespace {

void forward_scalar(const ConvGeometry& g, std::span<const double> padded,
                    std::span<const double> weights, std::span<double> out,
                    std::size_t co_begin, std::size_t co_end) {
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), wp = g.row_stride();
  for (std::size_t co = co_begin; co < co_end; ++co) {
    double* o = out.data() + co * g.out_plane();
    std::fill(o, o + g.out_plane(), 0.0);
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const double* wk = weights.data() + (co * g.cin + ci) * taps;
      const double* in = padded.data() + ci * g.padded_plane();
      for (std::size_t a = 0; a < g.kt; ++a)
        for (std::size_t b = 0; b < g.kh; ++b)
          for (std::size_t c = 0; c < g.kw; ++c) {
            const double wv = wk[(a * g.kh + b) * g.kw + c];
            for (std::size_t t = 0; t < g.t; ++t)
              for (std::size_t h = 0; h < g.h; ++h) {
                const double* src = in + ((t + a) * hp + (h + b)) * wp + c;
                double* dst = o + (t * g.h + h) * g.w;
                for (std::size_t x = 0; x < g.w; ++x) dst[x] += wv * src[x];
              }
          }
    }
  }
}

void weight_grad_scalar(const ConvGeometry& g, std::span<const double> padded,
                        std::span<const double> grad_out, std::span<double> grad_w,
                        std::size_t co_begin, std::size_t co_end) {
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), wp = g.row_stride();
  for (std::size_t co = co_begin; co < co_end; ++co) {
    const double* go = grad_out.data() + co * g.out_plane();
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      const double* in = padded.data() + ci * g.padded_plane();
      double* gw = grad_w.data() + (co * g.cin + ci) * taps;
      for (std::size_t a = 0; a < g.kt; ++a)
        for (std::size_t b = 0; b < g.kh; ++b)
          for (std::size_t c = 0; c < g.kw; ++c) {
            double s = 0.0;
            for (std::size_t t = 0; t < g.t; ++t)
              for (std::size_t h = 0; h < g.h; ++h) {
                const double* src = in + ((t + a) * hp + (h + b)) * wp + c;
                const double* gr = go + (t * g.h + h) * g.w;
                for (std::size_t x = 0; x < g.w; ++x) s += gr[x] * src[x];
              }
            gw[(a * g.kh + b) * g.kw + c] += s;
          }
    }
  }
}

}  // namespace

const ConvKernelSet& scalar_kernels() {
  static const ConvKernelSet set{"scalar", &forward_scalar, &weight_grad_scalar,
                                 &sparse_scatter_impl, &sparse_weight_grad_impl, 1};
  return set;
}

void pad_input(const ConvGeometry& g, std::size_t channels, std::span<const double> in,
               PaddedBuffer& padded) {
  const std::size_t hp = g.hp(), wp = g.row_stride();
  padded.assign(channels * g.padded_plane() + kPaddedSlack, 0.0);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t t = 0; t < g.t; ++t)
      for (std::size_t h = 0; h < g.h; ++h) {
        const double* src = in.data() + ((c * g.t + t) * g.h + h) * g.w;
        double* dst = padded.data() + c * g.padded_plane() +
                      ((t + g.pt()) * hp + (h + g.ph())) * wp + g.pw();
        std::copy(src, src + g.w, dst);
      }
}

}  // namespace hpnet::kernels
