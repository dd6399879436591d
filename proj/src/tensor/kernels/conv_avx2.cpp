// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <vector>

#include "hpnet/conv_kernels.hpp"
#include "sparse_impl.hpp"
#include "kernel_variants.hpp"

namespace hpnet::kernels {
namespace {

constexpr std::size_t kLanes = 4;
constexpr std::size_t kCoBlock = 4;
constexpr std::size_t kMaxVectors = 2;

inline __m256i lane_mask(std::size_t n) {
  const auto count = static_cast<long long>(std::min(n, kLanes));
  return _mm256_cmpgt_epi64(_mm256_set1_epi64x(count), _mm256_setr_epi64x(0, 1, 2, 3));
}

template <int NV>
void forward_segment(const ConvGeometry& g, const double* in_base, const double* packed,
                     std::size_t width, double* out_base, std::size_t cb) {
  const std::size_t hp = g.hp(), wp = g.row_stride(), plane = g.padded_plane();
  __m256i mask[NV];
  #pragma GCC unroll 16
  for (int j = 0; j < NV; ++j) mask[j] = lane_mask(width - j * kLanes);

  __m256d acc[kCoBlock][NV];
  #pragma GCC unroll 16
  for (auto& row : acc)
    #pragma GCC unroll 16
    for (auto& v : row) v = _mm256_setzero_pd();

  const double* wk = packed;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* in_c = in_base + ci * plane;
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kh; ++b) {
        const double* row = in_c + (a * hp + b) * wp;
        for (std::size_t c = 0; c < g.kw; ++c, wk += kCoBlock) {
          __m256d xv[NV];
          #pragma GCC unroll 16
          for (int j = 0; j < NV; ++j) xv[j] = _mm256_maskload_pd(row + c + j * kLanes, mask[j]);
          #pragma GCC unroll 16
          for (std::size_t q = 0; q < kCoBlock; ++q) {
            const __m256d wv = _mm256_broadcast_sd(wk + q);
            #pragma GCC unroll 16
            for (int j = 0; j < NV; ++j) acc[q][j] = _mm256_fmadd_pd(wv, xv[j], acc[q][j]);
          }
        }
      }
  }
  const std::size_t out_plane = g.out_plane();
  for (std::size_t q = 0; q < cb; ++q)
    #pragma GCC unroll 16
    for (int j = 0; j < NV; ++j)
      _mm256_maskstore_pd(out_base + q * out_plane + j * kLanes, mask[j], acc[q][j]);
}

void forward_avx2(const ConvGeometry& g, std::span<const double> padded,
                  std::span<const double> weights, std::span<double> out,
                  std::size_t co_begin, std::size_t co_end) {
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), wp = g.row_stride();
  std::vector<double> packed(g.cin * taps * kCoBlock);
  for (std::size_t co0 = co_begin; co0 < co_end; co0 += kCoBlock) {
    const std::size_t cb = std::min(kCoBlock, co_end - co0);
    for (std::size_t ci = 0; ci < g.cin; ++ci)
      for (std::size_t k = 0; k < taps; ++k)
        #pragma GCC unroll 16
        for (std::size_t q = 0; q < kCoBlock; ++q)
          packed[(ci * taps + k) * kCoBlock + q] =
              q < cb ? weights[((co0 + q) * g.cin + ci) * taps + k] : 0.0;

    for (std::size_t t = 0; t < g.t; ++t)
      for (std::size_t h = 0; h < g.h; ++h)
        for (std::size_t x0 = 0; x0 < g.w; x0 += kLanes * kMaxVectors) {
          const std::size_t width = std::min(kLanes * kMaxVectors, g.w - x0);
          const double* in_base = padded.data() + (t * hp + h) * wp + x0;
          double* out_base = out.data() + co0 * g.out_plane() + (t * g.h + h) * g.w + x0;
          if (width > kLanes)
            forward_segment<2>(g, in_base, packed.data(), width, out_base, cb);
          else
            forward_segment<1>(g, in_base, packed.data(), width, out_base, cb);
        }
  }
}

template <int CB, int KW>
void weight_grad_block(const ConvGeometry& g, std::span<const double> padded,
                       std::span<const double> grad_out, std::span<double> grad_w,
                       std::size_t co0) {
  const std::size_t taps = g.taps();
  const std::size_t hp = g.hp(), wp = g.row_stride(), plane = g.out_plane();
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const double* in_c = padded.data() + ci * g.padded_plane();
    for (std::size_t a = 0; a < g.kt; ++a)
      for (std::size_t b = 0; b < g.kh; ++b) {
        __m256d acc[CB][KW];
        #pragma GCC unroll 16
        for (auto& row : acc)
          #pragma GCC unroll 16
          for (auto& v : row) v = _mm256_setzero_pd();
        for (std::size_t t = 0; t < g.t; ++t)
          for (std::size_t h = 0; h < g.h; ++h) {
            const double* xrow = in_c + ((t + a) * hp + (h + b)) * wp;
            const double* grow = grad_out.data() + co0 * plane + (t * g.h + h) * g.w;
            for (std::size_t x0 = 0; x0 < g.w; x0 += kLanes) {
              const __m256i m = lane_mask(g.w - x0);
              __m256d xv[KW];
              #pragma GCC unroll 16
              for (int c = 0; c < KW; ++c) xv[c] = _mm256_maskload_pd(xrow + x0 + c, m);
              #pragma GCC unroll 16
              for (int q = 0; q < CB; ++q) {
                const __m256d gv = _mm256_maskload_pd(grow + q * plane + x0, m);
                #pragma GCC unroll 16
                for (int c = 0; c < KW; ++c) acc[q][c] = _mm256_fmadd_pd(gv, xv[c], acc[q][c]);
              }
            }
          }
        #pragma GCC unroll 16
        for (int q = 0; q < CB; ++q) {
          double* gw = grad_w.data() + ((co0 + q) * g.cin + ci) * taps + (a * g.kh + b) * KW;
          #pragma GCC unroll 16
          for (int c = 0; c < KW; ++c) {
            alignas(32) double lanes[kLanes];
            _mm256_store_pd(lanes, acc[q][c]);
            gw[c] += (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
          }
        }
      }
  }
}

template <int KW>
void weight_grad_channels(const ConvGeometry& g, std::span<const double> padded,
                          std::span<const double> grad_out, std::span<double> grad_w,
                          std::size_t co_begin, std::size_t co_end) {
  std::size_t co = co_begin;
  for (; co + 2 <= co_end; co += 2) weight_grad_block<2, KW>(g, padded, grad_out, grad_w, co);
  for (; co < co_end; ++co) weight_grad_block<1, KW>(g, padded, grad_out, grad_w, co);
}

void weight_grad_avx2(const ConvGeometry& g, std::span<const double> padded,
                      std::span<const double> grad_out, std::span<double> grad_w,
                      std::size_t co_begin, std::size_t co_end) {
  switch (g.kw) {
    case 1: weight_grad_channels<1>(g, padded, grad_out, grad_w, co_begin, co_end); break;
    case 3: weight_grad_channels<3>(g, padded, grad_out, grad_w, co_begin, co_end); break;
    default:
      scalar_kernels().weight_grad(g, padded, grad_out, grad_w, co_begin, co_end);
      break;
  }
}

}  // namespace

const ConvKernelSet& avx2_kernel_set() {
  static const ConvKernelSet set{"avx2", &forward_avx2, &weight_grad_avx2,
                                 &sparse_scatter_impl, &sparse_weight_grad_impl, kCoBlock};
  return set;
}

}  // namespace hpnet::kernels
