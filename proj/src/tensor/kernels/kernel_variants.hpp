#pragma once

#include "hpnet/conv_kernels.hpp"

namespace hpnet::kernels {

// Defined in translation units compiled with ISA flags. Callers must check
// CPU support first.
#if defined(HPNET_HAVE_AVX2)
const ConvKernelSet& avx2_kernel_set();
#endif
#if defined(HPNET_HAVE_AVX512)
const ConvKernelSet& avx512_kernel_set();
#endif

}  // namespace hpnet::kernels
