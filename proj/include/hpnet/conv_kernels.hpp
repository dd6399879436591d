#pragma once

// Raw 3D cross-correlation kernels over zero-padded float64 buffers.
//
// Every variant computes the same sums; only the instruction selection and
// the within-element rounding (FMA contraction, horizontal reduction order in
// the weight gradient) differ. Equivalence against the scalar reference is
// covered by tests/unit/test_conv_kernels.cpp.

#include <cstddef>
#include <cstdlib>
#include <new>
#include <span>
#include <string_view>
#include <vector>

namespace hpnet::kernels {

struct ConvGeometry {
  std::size_t cin = 0, cout = 0;
  std::size_t t = 0, h = 0, w = 0;     // output extent (== unpadded input extent)
  std::size_t kt = 1, kh = 1, kw = 1;  // odd kernel extents

  std::size_t pt() const { return kt / 2; }
  std::size_t ph() const { return kh / 2; }
  std::size_t pw() const { return kw / 2; }
  std::size_t tp() const { return t + kt - 1; }
  std::size_t hp() const { return h + kh - 1; }
  std::size_t wp() const { return w + kw - 1; }
  // Padded rows start on 64-byte boundaries.
  std::size_t row_stride() const { return (wp() + 7) / 8 * 8; }
  std::size_t taps() const { return kt * kh * kw; }
  std::size_t padded_plane() const { return tp() * hp() * row_stride(); }
  std::size_t out_plane() const { return t * h * w; }
};

template <class T>
struct CacheAlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  CacheAlignedAllocator() = default;
  template <class U>
  CacheAlignedAllocator(const CacheAlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  friend bool operator==(const CacheAlignedAllocator&, const CacheAlignedAllocator&) { return true; }
};

/// Zero-padded input volume, [c][tp][hp][row_stride] plus one vector of slack
/// so whole-vector loads past the last row stay inside the allocation.
using PaddedBuffer = std::vector<double, CacheAlignedAllocator<double>>;
inline constexpr std::size_t kPaddedSlack = 8;

// out[co] = sum_{ci,a,b,c} weights[co][ci][a][b][c] * padded[ci][t+a][h+b][w+c]
// Output is overwritten. Processes output channels [co_begin, co_end).
using ForwardFn = void (*)(const ConvGeometry& g, std::span<const double> padded,
                           std::span<const double> weights, std::span<double> out,
                           std::size_t co_begin, std::size_t co_end);

// grad_w[co][ci][a][b][c] += sum_{t,h,w} grad_out[co][t][h][w] * padded[ci][t+a][h+b][w+c]
// Processes output channels [co_begin, co_end).
using WeightGradFn = void (*)(const ConvGeometry& g, std::span<const double> padded,
                              std::span<const double> grad_out, std::span<double> grad_w,
                              std::size_t co_begin, std::size_t co_end);

/// A non-zero input element of a sparse convolution.
struct SparseSite {
  std::size_t ci, t, h, w;
  double value;
};

// acc[pos][co] += value * wt[ci][tap][co] over every tap whose output lands
// inside the volume. Layouts are channel-innermost.
using SparseScatterFn = void (*)(const ConvGeometry& g, std::span<const SparseSite> sites,
                                 std::span<const double> wt, std::span<double> acc);

// gwt[ci][tap][co] += value * go[pos][co] over the same (site, tap) pairs.
using SparseWeightGradFn = void (*)(const ConvGeometry& g, std::span<const SparseSite> sites,
                                    std::span<const double> go, std::span<double> gwt);

struct ConvKernelSet {
  std::string_view name;
  ForwardFn forward;
  WeightGradFn weight_grad;
  SparseScatterFn sparse_scatter;
  SparseWeightGradFn sparse_weight_grad;
  // Granularity at which work may be split across threads without changing
  // any per-element summation order.
  std::size_t channel_block;
};

const ConvKernelSet& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const ConvKernelSet* avx2_kernels();
const ConvKernelSet* avx512_kernels();

/// Best supported variant, overridable with HPNET_SIMD={scalar,avx2,avx512}.
const ConvKernelSet& active_kernels();
/// Forces a variant for the process (tests, benchmarks). nullptr resets.
void set_active_kernels(const ConvKernelSet* kernels);

/// Every variant usable on this machine, scalar first.
std::vector<const ConvKernelSet*> available_kernels();

/// Copies a [c][t][h][w] buffer into a zero-padded PaddedBuffer.
void pad_input(const ConvGeometry& g, std::size_t channels, std::span<const double> in,
               PaddedBuffer& padded);

}  // namespace hpnet::kernels
