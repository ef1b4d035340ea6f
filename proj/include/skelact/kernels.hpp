#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace skelact::kernels {

// Contiguous double-precision primitives behind the tensor inner loops.
//
// Variants must agree with the scalar reference as follows: the elementwise
// kernels (axpy, add_scalar, scale, add, mul, mul_acc, lerp) are bit-exact
// because every backend performs the identical per-element operation (fused
// multiply-add where noted); the reductions (dot, sum) may reassociate and
// are only required to agree to within accumulated rounding error.
struct KernelTable {
  const char* name;
  void (*axpy)(std::size_t n, double a, const double* x, double* y);  // y += a*x (fma)
  void (*add_scalar)(std::size_t n, double a, double* y);             // y += a
  void (*scale)(std::size_t n, double a, double* y);                  // y *= a
  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul_acc)(std::size_t n, const double* x, const double* y, double* acc);  // acc += x*y (fma)
  void (*lerp)(std::size_t n, double t, const double* x, const double* y,
               double* out);  // out = t*x + (1-t)*y
  double (*dot)(std::size_t n, const double* x, const double* y);
  double (*sum)(std::size_t n, const double* x);
};

const KernelTable& scalar_table();
#if defined(SKELACT_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

// The active backend. Picked once: SKELACT_KERNELS=scalar|avx2 in the
// environment wins, otherwise the widest backend the CPU supports.
const KernelTable& active();

// Force a backend by name; returns false if it is not built in or the CPU
// cannot run it. Not safe to call concurrently with kernel use.
bool set_backend(std::string_view name);

std::vector<std::string_view> available_backends();

}  // namespace skelact::kernels
