#include <cmath>

#include "skelact/kernels.hpp"

// Reference kernels. Every other backend is equivalence-tested against
// these, so keep them as plain as possible.

namespace skelact::kernels {
namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void add_scalar_scalar(std::size_t n, double a, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a;
}

void scale_scalar(std::size_t n, double a, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void add_scalar_impl(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_scalar_impl(std::size_t n, const double* x, const double* y, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void mul_acc_scalar(std::size_t n, const double* x, const double* y, double* acc) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = std::fma(x[i], y[i], acc[i]);
}

void lerp_scalar(std::size_t n, double t, const double* x, const double* y,
                 double* out) {
  const double u = 1.0 - t;
  for (std::size_t i = 0; i < n; ++i) out[i] = std::fma(t, x[i], u * y[i]);
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s = std::fma(x[i], y[i], s);
  return s;
}

double sum_scalar(std::size_t n, const double* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",        axpy_scalar, add_scalar_scalar, scale_scalar,
      add_scalar_impl, mul_scalar_impl, mul_acc_scalar, lerp_scalar,
      dot_scalar,      sum_scalar,
  };
  return table;
}

}  // namespace skelact::kernels
