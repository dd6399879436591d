#pragma once

// Scatter/gather loops of the sparse convolution. Included by every kernel
// translation unit so the compiler vectorises the channel loops for that
// unit's ISA; everything here has internal linkage for that reason.

#include <algorithm>

#include "hpnet/conv_kernels.hpp"

namespace hpnet::kernels {
namespace {

struct TapRange {
  std::size_t lo, hi;  // [lo, hi)
};

// Kernel offsets a with 0 <= pos + pad - a < extent.
inline TapRange tap_range(std::size_t pos, std::size_t pad, std::size_t k, std::size_t extent) {
  const std::size_t top = pos + pad;  // a <= top
  const std::size_t lo = top >= extent ? top - extent + 1 : 0;
  const std::size_t hi = std::min(k, top + 1);
  return {lo, hi};
}

template <class Body>
inline void for_each_hit(const ConvGeometry& g, const SparseSite& s, Body&& body) {
  const TapRange ra = tap_range(s.t, g.pt(), g.kt, g.t);
  const TapRange rb = tap_range(s.h, g.ph(), g.kh, g.h);
  const TapRange rc = tap_range(s.w, g.pw(), g.kw, g.w);
  for (std::size_t a = ra.lo; a < ra.hi; ++a) {
    const std::size_t to = s.t + g.pt() - a;
    for (std::size_t b = rb.lo; b < rb.hi; ++b) {
      const std::size_t ho = s.h + g.ph() - b;
      const std::size_t row = (to * g.h + ho) * g.w + s.w + g.pw();
      const std::size_t tap_row = (a * g.kh + b) * g.kw;
      for (std::size_t c = rc.lo; c < rc.hi; ++c) body(tap_row + c, row - c);
    }
  }
}

void sparse_scatter_impl(const ConvGeometry& g, std::span<const SparseSite> sites,
                         std::span<const double> wt, std::span<double> acc) {
  const std::size_t taps = g.taps(), cout = g.cout;
  for (const auto& s : sites) {
    const double v = s.value;
    for_each_hit(g, s, [&](std::size_t tap, std::size_t pos) {
      const double* __restrict wk = wt.data() + (s.ci * taps + tap) * cout;
      double* __restrict o = acc.data() + pos * cout;
      for (std::size_t co = 0; co < cout; ++co) o[co] += v * wk[co];
    });
  }
}

void sparse_weight_grad_impl(const ConvGeometry& g, std::span<const SparseSite> sites,
                             std::span<const double> go, std::span<double> gwt) {
  const std::size_t taps = g.taps(), cout = g.cout;
  for (const auto& s : sites) {
    const double v = s.value;
    for_each_hit(g, s, [&](std::size_t tap, std::size_t pos) {
      double* __restrict dst = gwt.data() + (s.ci * taps + tap) * cout;
      const double* __restrict src = go.data() + pos * cout;
      for (std::size_t co = 0; co < cout; ++co) dst[co] += v * src[co];
    });
  }
}

}  // namespace
}  // namespace hpnet::kernels
