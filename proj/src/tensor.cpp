#include "skelact/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace skelact {

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw DimensionError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

Tensor::Impl& Tensor::ref() {
  if (!impl_) throw ValidationError("use of undefined tensor");
  return *impl_;
}

const Tensor::Impl& Tensor::ref() const {
  if (!impl_) throw ValidationError("use of undefined tensor");
  return *impl_;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->data.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  t.impl_->shape = std::move(shape);
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
  }
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  t.set_requires_grad(requires_grad);
  return t;
}

Tensor Tensor::scalar(double value) { return from_vector({}, {value}); }

Tensor Tensor::random_uniform(Shape shape, double lo, double hi, Rng& rng,
                              bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.impl_->data) v = rng.uniform(lo, hi);
  return t;
}

Tensor Tensor::random_normal(Shape shape, double mean, double stddev, Rng& rng,
                             bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.impl_->data) v = rng.normal(mean, stddev);
  return t;
}

const Shape& Tensor::shape() const { return ref().shape; }
int Tensor::rank() const { return static_cast<int>(ref().shape.size()); }

int Tensor::dim(int axis) const {
  const Shape& s = ref().shape;
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_str(s));
  }
  return s[axis];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(ref().data.size());
}

std::span<double> Tensor::data() { return ref().data; }
std::span<const double> Tensor::data() const { return ref().data; }

double Tensor::value() const {
  if (numel() != 1) {
    throw ValidationError("value() requires a one-element tensor, got " +
                          shape_str(shape()));
  }
  return ref().data[0];
}

namespace {
std::size_t flat_index(const Shape& shape, std::initializer_list<int> index) {
  if (index.size() != shape.size()) {
    throw DimensionError("index rank does not match tensor rank");
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (int i : index) {
    if (i < 0 || i >= shape[axis]) {
      throw DimensionError("index out of bounds on axis " + std::to_string(axis));
    }
    flat = flat * static_cast<std::size_t>(shape[axis]) + static_cast<std::size_t>(i);
    ++axis;
  }
  return flat;
}
}  // namespace

double Tensor::at(std::initializer_list<int> index) const {
  return ref().data[flat_index(ref().shape, index)];
}

double& Tensor::at(std::initializer_list<int> index) {
  return ref().data[flat_index(ref().shape, index)];
}

bool Tensor::requires_grad() const { return ref().requires_grad; }

Tensor& Tensor::set_requires_grad(bool enabled) {
  ref().requires_grad = enabled;
  if (enabled) ref().needs_grad = true;
  return *this;
}

bool Tensor::needs_grad() const { return ref().needs_grad; }

bool Tensor::has_grad() const { return !ref().grad.empty(); }

std::span<double> Tensor::grad() {
  Impl& im = ref();
  if (im.grad.empty()) im.grad.assign(im.data.size(), 0.0);
  return im.grad;
}

std::span<const double> Tensor::grad() const {
  const Impl& im = ref();
  if (im.grad.empty()) {
    throw ValidationError("gradient was never populated for this tensor");
  }
  return im.grad;
}

void Tensor::zero_grad() {
  Impl& im = ref();
  std::fill(im.grad.begin(), im.grad.end(), 0.0);
}

Tensor Tensor::grad_clone() const {
  const Impl& im = ref();
  if (im.grad.empty()) {
    throw ValidationError("gradient was never populated for this tensor");
  }
  return Tensor::from_vector(im.shape, im.grad);
}

Tensor Tensor::clone() const {
  const Impl& im = ref();
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = im.shape;
  t.impl_->data = im.data;
  t.impl_->requires_grad = im.requires_grad;
  t.impl_->needs_grad = im.requires_grad;
  return t;
}

bool Tensor::all_finite() const {
  for (double v : ref().data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void mark_produced(Tensor& t) {
  t.ref().produced = true;
  t.ref().needs_grad = true;
}

// --- GradTape --------------------------------------------------------------

namespace {
thread_local GradTape* tls_current_tape = nullptr;
}

GradTape::GradTape() : previous_(tls_current_tape) { tls_current_tape = this; }

GradTape::~GradTape() { tls_current_tape = previous_; }

GradTape* GradTape::current() { return tls_current_tape; }

void GradTape::record(const Tensor& output, std::function<void()> adjoint) {
  steps_.push_back(Step{output, std::move(adjoint)});
}

void GradTape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ValidationError("backward requires a scalar loss");
  }
  if (!loss.needs_grad()) {
    throw ValidationError("loss is not connected to any recorded operation");
  }
  // Intermediates get a fresh pass; leaves keep accumulating across calls.
  for (Step& s : steps_) {
    s.output.grad();
    s.output.zero_grad();
  }
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) {
    it->adjoint();
  }
}

}  // namespace skelact
