#include <iostream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "hpnet/cli.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Tensors are allocated and freed every step; keep them on the heap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return hpnet::cli::run(argc, argv, std::cout, std::cerr);
}
