#include <atomic>
#include <cstdlib>
#include <string_view>

#include "hpnet/conv_kernels.hpp"
#include "kernel_variants.hpp"

namespace hpnet::kernels {
namespace {

std::atomic<const ConvKernelSet*> g_override{nullptr};

bool cpu_has_avx2() {
#if defined(HPNET_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

bool cpu_has_avx512() {
#if defined(HPNET_HAVE_AVX512)
  return __builtin_cpu_supports("avx512f");
#else
  return false;
#endif
}

const ConvKernelSet& detect() {
  if (const char* env = std::getenv("HPNET_SIMD")) {
    std::string_view want(env);
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2" && avx2_kernels()) return *avx2_kernels();
    if (want == "avx512" && avx512_kernels()) return *avx512_kernels();
  }
  if (auto* k = avx512_kernels()) return *k;
  if (auto* k = avx2_kernels()) return *k;
  return scalar_kernels();
}

}  // namespace

const ConvKernelSet* avx2_kernels() {
#if defined(HPNET_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &avx2_kernel_set() : nullptr;
#else
  return nullptr;
#endif
}

const ConvKernelSet* avx512_kernels() {
#if defined(HPNET_HAVE_AVX512)
  static const bool ok = cpu_has_avx512();
  return ok ? &avx512_kernel_set() : nullptr;
#else
  return nullptr;
#endif
}

const ConvKernelSet& active_kernels() {
  if (auto* k = g_override.load(std::memory_order_acquire)) return *k;
  static const ConvKernelSet& detected = detect();
  return detected;
}

void set_active_kernels(const ConvKernelSet* kernels) {
  g_override.store(kernels, std::memory_order_release);
}

std::vector<const ConvKernelSet*> available_kernels() {
  std::vector<const ConvKernelSet*> out{&scalar_kernels()};
  if (auto* k = avx2_kernels()) out.push_back(k);
  if (auto* k = avx512_kernels()) out.push_back(k);
  return out;
}

}  // namespace hpnet::kernels
