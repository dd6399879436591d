// Compiled with -mavx512f; only reached after a runtime CPU check.
//
// Padded rows start on 64-byte boundaries, so for kw == 3 each input row is
// read with aligned loads and the +1/+2 column shifts are formed in registers.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "hpnet/conv_kernels.hpp"
#include "sparse_impl.hpp"
#include "kernel_variants.hpp"

namespace hpnet::kernels {
namespace {

constexpr std::size_t kLanes = 8;
constexpr std::size_t kCoBlock = 4;
constexpr std::size_t kMaxVectors = 4;  // output row segment of 32 doubles

inline __mmask8 lane_mask(std::size_t n) {
  return n >= kLanes ? __mmask8(0xFF) : __mmask8((1u << n) - 1u);
}

template <int Shift>
inline __m512d shift_lanes(__m512d lo, __m512d hi) {
  return _mm512_castsi512_pd(
      _mm512_alignr_epi64(_mm512_castpd_si512(hi), _mm512_castpd_si512(lo), Shift));
}

// Weights packed [ci][tap][4] for a block of output channels starting at co0.
void pack_weights(const ConvGeometry& g, std::span<const double> weights, std::size_t co0,
                  std::size_t cb, std::vector<double>& packed) {
  const std::size_t taps = g.taps();
  packed.assign(g.cin * taps * kCoBlock, 0.0);
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t k = 0; k < taps; ++k)
      for (std::size_t q = 0; q < cb; ++q)
        packed[(ci * taps + k) * kCoBlock + q] = weights[((co0 + q) * g.cin + ci) * taps + k];
}

inline void store_block(double* out_base, std::size_t out_plane, std::size_t cb, __mmask8 m,
                        __m512d v0, __m512d v1, __m512d v2, __m512d v3) {
  _mm512_mask_storeu_pd(out_base, m, v0);
  if (cb > 1) _mm512_mask_storeu_pd(out_base + out_plane, m, v1);
  if (cb > 2) _mm512_mask_storeu_pd(out_base + 2 * out_plane, m, v2);
  if (cb > 3) _mm512_mask_storeu_pd(out_base + 3 * out_plane, m, v3);
}

// kw == 3. `rows` holds the aligned start of each (ci, a, b) input row
// relative to in_base; NV + 1 vectors cover a segment and its halo. R output
// rows, `rs` apart in the input, share each weight broadcast.
template <int NV, int R>
void forward_segment_k3(const double* in_base, std::span<const std::size_t> rows,
                        const double* packed, std::size_t width, std::size_t rs,
                        std::size_t out_row, double* out_base, std::size_t out_plane,
                        std::size_t cb) {
  constexpr int V = NV * R;
  __m512d acc[kCoBlock][V];
#pragma GCC unroll 4
  for (int q = 0; q < int(kCoBlock); ++q)
#pragma GCC unroll 4
    for (int j = 0; j < V; ++j) acc[q][j] = _mm512_setzero_pd();
  const std::size_t n = rows.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = in_base + rows[k];
    const double* wk = packed + k * 3 * kCoBlock;
    __m512d v[R][NV + 1];
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r)
#pragma GCC unroll 5
      for (int j = 0; j <= NV; ++j) v[r][j] = _mm512_load_pd(row + r * rs + j * kLanes);
    // One column shift at a time keeps only four weight broadcasts live.
#pragma GCC unroll 3
    for (int c = 0; c < 3; ++c) {
      const __m512d w0 = _mm512_set1_pd(wk[4 * c]), w1 = _mm512_set1_pd(wk[4 * c + 1]);
      const __m512d w2 = _mm512_set1_pd(wk[4 * c + 2]), w3 = _mm512_set1_pd(wk[4 * c + 3]);
#pragma GCC unroll 4
      for (int i = 0; i < V; ++i) {
        const int r = i / NV, j = i % NV;
        const __m512d x = c == 0 ? v[r][j] : c == 1 ? shift_lanes<1>(v[r][j], v[r][j + 1])
                                                    : shift_lanes<2>(v[r][j], v[r][j + 1]);
        acc[0][i] = _mm512_fmadd_pd(w0, x, acc[0][i]);
        acc[1][i] = _mm512_fmadd_pd(w1, x, acc[1][i]);
        acc[2][i] = _mm512_fmadd_pd(w2, x, acc[2][i]);
        acc[3][i] = _mm512_fmadd_pd(w3, x, acc[3][i]);
      }
    }
  }
#pragma GCC unroll 4
  for (int i = 0; i < V; ++i) {
    const int r = i / NV, j = i % NV;
    store_block(out_base + r * out_row + j * kLanes, out_plane, cb, lane_mask(width - j * kLanes),
                acc[0][i], acc[1][i], acc[2][i], acc[3][i]);
  }
}

// Any odd kw: one masked load per tap.
template <int NV>
void forward_segment_generic(const double* in_base, std::span<const std::size_t> taps,
                             const double* packed, std::size_t width, double* out_base,
                             std::size_t out_plane, std::size_t cb) {
  __mmask8 mask[NV];
#pragma GCC unroll 4
  for (int j = 0; j < NV; ++j) mask[j] = lane_mask(width - j * kLanes);
  __m512d acc0[NV], acc1[NV], acc2[NV], acc3[NV];
#pragma GCC unroll 4
  for (int j = 0; j < NV; ++j) {
    acc0[j] = _mm512_setzero_pd();
    acc1[j] = _mm512_setzero_pd();
    acc2[j] = _mm512_setzero_pd();
    acc3[j] = _mm512_setzero_pd();
  }
  const std::size_t n = taps.size();
  for (std::size_t k = 0; k < n; ++k) {
    const double* row = in_base + taps[k];
    const double* wk = packed + k * kCoBlock;
    const __m512d w0 = _mm512_set1_pd(wk[0]);
    const __m512d w1 = _mm512_set1_pd(wk[1]);
    const __m512d w2 = _mm512_set1_pd(wk[2]);
    const __m512d w3 = _mm512_set1_pd(wk[3]);
#pragma GCC unroll 4
    for (int j = 0; j < NV; ++j) {
      const __m512d x = _mm512_maskz_loadu_pd(mask[j], row + j * kLanes);
      acc0[j] = _mm512_fmadd_pd(w0, x, acc0[j]);
      acc1[j] = _mm512_fmadd_pd(w1, x, acc1[j]);
      acc2[j] = _mm512_fmadd_pd(w2, x, acc2[j]);
      acc3[j] = _mm512_fmadd_pd(w3, x, acc3[j]);
    }
  }
#pragma GCC unroll 4
  for (int j = 0; j < NV; ++j)
    store_block(out_base + j * kLanes, out_plane, cb, mask[j], acc0[j], acc1[j], acc2[j],
                acc3[j]);
}

template <bool K3>
void forward_rows(const ConvGeometry& g, std::span<const double> padded,
                  std::span<const std::size_t> offsets, const double* pk, std::span<double> out,
                  std::size_t co0, std::size_t cb) {
  const std::size_t hp = g.hp(), rs = g.row_stride(), plane = g.out_plane();
  for (std::size_t t = 0; t < g.t; ++t)
    for (std::size_t h = 0; h < g.h;) {
      // Narrow rows fit in one segment; several of them then share a pass.
      const std::size_t left = g.h - h;
      const std::size_t step = !K3 || g.w > 2 * kLanes ? 1
                               : g.w <= kLanes && left >= 4 ? 4
                               : left >= 2 ? 2 : 1;
      for (std::size_t x0 = 0; x0 < g.w; x0 += kLanes * kMaxVectors) {
        const std::size_t width = std::min(kLanes * kMaxVectors, g.w - x0);
        const double* in = padded.data() + (t * hp + h) * rs + x0;
        double* o = out.data() + co0 * plane + (t * g.h + h) * g.w + x0;
        const std::size_t nv = (width + kLanes - 1) / kLanes;
        if constexpr (K3) {
          if (step == 4) {
            forward_segment_k3<1, 4>(in, offsets, pk, width, rs, g.w, o, plane, cb);
          } else if (step == 2) {
            if (nv == 1)
              forward_segment_k3<1, 2>(in, offsets, pk, width, rs, g.w, o, plane, cb);
            else
              forward_segment_k3<2, 2>(in, offsets, pk, width, rs, g.w, o, plane, cb);
          } else {
            switch (nv) {
              case 1: forward_segment_k3<1, 1>(in, offsets, pk, width, rs, g.w, o, plane, cb); break;
              case 2: forward_segment_k3<2, 1>(in, offsets, pk, width, rs, g.w, o, plane, cb); break;
              case 3: forward_segment_k3<3, 1>(in, offsets, pk, width, rs, g.w, o, plane, cb); break;
              default: forward_segment_k3<4, 1>(in, offsets, pk, width, rs, g.w, o, plane, cb); break;
            }
          }
        } else {
          switch (nv) {
            case 1: forward_segment_generic<1>(in, offsets, pk, width, o, plane, cb); break;
            case 2: forward_segment_generic<2>(in, offsets, pk, width, o, plane, cb); break;
            case 3: forward_segment_generic<3>(in, offsets, pk, width, o, plane, cb); break;
            default: forward_segment_generic<4>(in, offsets, pk, width, o, plane, cb); break;
          }
        }
      }
      h += step;
    }
}

void forward_avx512(const ConvGeometry& g, std::span<const double> padded,
                    std::span<const double> weights, std::span<double> out,
                    std::size_t co_begin, std::size_t co_end) {
  const std::size_t hp = g.hp(), rs = g.row_stride();
  const bool k3 = g.kw == 3;
  std::vector<std::size_t> offsets;
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kh; ++b) {
        const std::size_t row = ci * g.padded_plane() + (a * hp + b) * rs;
        if (k3)
          offsets.push_back(row);
        else
          for (std::size_t c = 0; c < g.kw; ++c) offsets.push_back(row + c);
      }

  std::vector<double> packed;
  for (std::size_t co0 = co_begin; co0 < co_end; co0 += kCoBlock) {
    const std::size_t cb = std::min(kCoBlock, co_end - co0);
    pack_weights(g, weights, co0, cb, packed);
    if (k3)
      forward_rows<true>(g, padded, offsets, packed.data(), out, co0, cb);
    else
      forward_rows<false>(g, padded, offsets, packed.data(), out, co0, cb);
  }
}

// Rows are visited in small h-blocks with all (a, b) row offsets inside, so
// the input and gradient rows of a block stay in L1 across the taps. Partial
// sums live in a vector array and are reduced once per input channel.
template <int CB>
void weight_grad_k3(const ConvGeometry& g, const double* padded, const double* grad,
                    double* grad_w, std::size_t co0) {
  constexpr std::size_t kRowBlock = 8;
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), rs = g.row_stride(), plane = g.out_plane();
  const std::size_t full = g.w / kLanes * kLanes;
  const __mmask8 tail = lane_mask(g.w - full);
  const std::size_t rows = g.kt * g.kh;
  PaddedBuffer sums(rows * CB * 3 * kLanes);
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* in_c = padded + ci * g.padded_plane();
    std::fill(sums.begin(), sums.end(), 0.0);
    for (std::size_t t = 0; t < g.t; ++t)
      for (std::size_t h0 = 0; h0 < g.h; h0 += kRowBlock) {
        const std::size_t h1 = std::min(g.h, h0 + kRowBlock);
        for (std::size_t a = 0; a < g.kt; ++a)
          for (std::size_t b = 0; b < g.kh; ++b) {
            double* acc = sums.data() + (a * g.kh + b) * CB * 3 * kLanes;
            __m512d s0[CB], s1[CB], s2[CB];
#pragma GCC unroll 8
            for (int q = 0; q < CB; ++q) {
              s0[q] = _mm512_load_pd(acc + (q * 3) * kLanes);
              s1[q] = _mm512_load_pd(acc + (q * 3 + 1) * kLanes);
              s2[q] = _mm512_load_pd(acc + (q * 3 + 2) * kLanes);
            }
            for (std::size_t h = h0; h < h1; ++h) {
              const double* xrow = in_c + ((t + a) * hp + (h + b)) * rs;
              const double* grow = grad + (t * g.h + h) * g.w;
              for (std::size_t x0 = 0; x0 < g.w; x0 += kLanes) {
                const __mmask8 m = x0 < full ? __mmask8(0xFF) : tail;
                const __m512d lo = _mm512_load_pd(xrow + x0);
                const __m512d hi = _mm512_load_pd(xrow + x0 + kLanes);
                const __m512d x1 = shift_lanes<1>(lo, hi);
                const __m512d x2 = shift_lanes<2>(lo, hi);
#pragma GCC unroll 8
                for (int q = 0; q < CB; ++q) {
                  const __m512d gv = _mm512_maskz_loadu_pd(m, grow + q * plane + x0);
                  s0[q] = _mm512_fmadd_pd(gv, lo, s0[q]);
                  s1[q] = _mm512_fmadd_pd(gv, x1, s1[q]);
                  s2[q] = _mm512_fmadd_pd(gv, x2, s2[q]);
                }
              }
            }
#pragma GCC unroll 8
            for (int q = 0; q < CB; ++q) {
              _mm512_store_pd(acc + (q * 3) * kLanes, s0[q]);
              _mm512_store_pd(acc + (q * 3 + 1) * kLanes, s1[q]);
              _mm512_store_pd(acc + (q * 3 + 2) * kLanes, s2[q]);
            }
          }
      }
    for (std::size_t r = 0; r < rows; ++r)
      for (int q = 0; q < CB; ++q) {
        double* gw = grad_w + ((co0 + q) * g.cin + ci) * taps + r * 3;
        for (int c = 0; c < 3; ++c) gw[c] += _mm512_reduce_add_pd(_mm512_load_pd(sums.data() + ((r * CB + q) * 3 + c) * kLanes));
      }
  }
}

template <int CB>
void weight_grad_k1(const ConvGeometry& g, const double* padded, const double* grad,
                    double* grad_w, std::size_t co0) {
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), rs = g.row_stride(), plane = g.out_plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* in_c = padded + ci * g.padded_plane();
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kh; ++b) {
        __m512d s[CB];
#pragma GCC unroll 4
        for (int q = 0; q < CB; ++q) s[q] = _mm512_setzero_pd();
        for (std::size_t t = 0; t < g.t; ++t)
          for (std::size_t h = 0; h < g.h; ++h) {
            const double* xrow = in_c + ((t + a) * hp + (h + b)) * rs;
            const double* grow = grad + (t * g.h + h) * g.w;
            for (std::size_t x0 = 0; x0 < g.w; x0 += kLanes) {
              const __mmask8 m = lane_mask(g.w - x0);
              const __m512d x = _mm512_load_pd(xrow + x0);
#pragma GCC unroll 4
              for (int q = 0; q < CB; ++q)
                s[q] = _mm512_fmadd_pd(_mm512_maskz_loadu_pd(m, grow + q * plane + x0), x, s[q]);
            }
          }
#pragma GCC unroll 4
        for (int q = 0; q < CB; ++q)
          grad_w[((co0 + q) * g.cin + ci) * taps + a * g.kh + b] += _mm512_reduce_add_pd(s[q]);
      }
  }
}

template <template <int> class Block>
void weight_grad_channels(const ConvGeometry& g, std::span<const double> padded,
                          std::span<const double> grad_out, std::span<double> grad_w,
                          std::size_t co_begin, std::size_t co_end) {
  // Aligned copy of the output gradient; vector rows then never split lines.
  const std::size_t plane = g.out_plane();
  PaddedBuffer aligned((co_end - co_begin) * plane);
  std::copy(grad_out.begin() + co_begin * plane, grad_out.begin() + co_end * plane,
            aligned.begin());
  std::size_t co = co_begin;
  for (; co + 2 * kCoBlock <= co_end; co += 2 * kCoBlock)
    Block<2 * kCoBlock>::run(g, padded.data(), aligned.data() + (co - co_begin) * plane,
                             grad_w.data(), co);
  for (; co + kCoBlock <= co_end; co += kCoBlock)
    Block<kCoBlock>::run(g, padded.data(), aligned.data() + (co - co_begin) * plane,
                         grad_w.data(), co);
  for (; co < co_end; ++co)
    Block<1>::run(g, padded.data(), aligned.data() + (co - co_begin) * plane, grad_w.data(), co);
}

template <int CB>
struct K3Block {
  static void run(const ConvGeometry& g, const double* p, const double* gr, double* gw,
                  std::size_t co) {
    weight_grad_k3<CB>(g, p, gr, gw, co);
  }
};
template <int CB>
struct K1Block {
  static void run(const ConvGeometry& g, const double* p, const double* gr, double* gw,
                  std::size_t co) {
    weight_grad_k1<CB>(g, p, gr, gw, co);
  }
};

void weight_grad_avx512(const ConvGeometry& g, std::span<const double> padded,
                        std::span<const double> grad_out, std::span<double> grad_w,
                        std::size_t co_begin, std::size_t co_end) {
  switch (g.kw) {
    case 1: weight_grad_channels<K1Block>(g, padded, grad_out, grad_w, co_begin, co_end); break;
    case 3: weight_grad_channels<K3Block>(g, padded, grad_out, grad_w, co_begin, co_end); break;
    default:
      scalar_kernels().weight_grad(g, padded, grad_out, grad_w, co_begin, co_end);
      break;
  }
}

}  // namespace

const ConvKernelSet& avx512_kernel_set() {
  static const ConvKernelSet set{"avx512", &forward_avx512, &weight_grad_avx512,
                                 &sparse_scatter_impl, &sparse_weight_grad_impl, kCoBlock};
  return set;
}

}  // namespace hpnet::kernels
