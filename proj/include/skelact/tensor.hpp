#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "skelact/error.hpp"
#include "skelact/rng.hpp"

namespace skelact {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Dense row-major 64-bit tensor. Copies are handles onto shared storage;
// use clone() for a deep copy. Gradient buffers live beside the data and
// are filled by GradTape::backward.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value);
  static Tensor random_uniform(Shape shape, double lo, double hi, Rng& rng,
                               bool requires_grad = false);
  static Tensor random_normal(Shape shape, double mean, double stddev, Rng& rng,
                              bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  int dim(int axis) const;
  std::int64_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double value() const;  // requires numel() == 1

  double at(std::initializer_list<int> index) const;
  double& at(std::initializer_list<int> index);

  bool requires_grad() const;
  Tensor& set_requires_grad(bool enabled);

  // True when gradients must flow through this tensor (a requires_grad leaf
  // or an intermediate produced while a tape was recording).
  bool needs_grad() const;

  bool has_grad() const;
  std::span<double> grad();              // allocates zero-filled on first use
  std::span<const double> grad() const;  // throws if never populated
  void zero_grad();
  Tensor grad_clone() const;

  Tensor clone() const;
  bool all_finite() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  friend class GradTape;
  friend void mark_produced(Tensor& t);

  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first touched
    bool requires_grad = false;
    bool needs_grad = false;
    bool produced = false;  // op output: grad is reset at each backward pass
  };

  std::shared_ptr<Impl> impl_;
  Impl& ref();
  const Impl& ref() const;
};

// Reverse-mode tape. Constructing one makes it the active tape for the
// current thread (nesting restores the previous on destruction). Ops record
// adjoint steps while a tape is active and any input needs gradients.
//
// backward() zero-fills the gradients of every tensor produced under the
// tape, seeds d(loss)/d(loss) = 1 and replays the adjoints in reverse
// execution order. Gradients of leaves accumulate additively across calls.
class GradTape {
 public:
  GradTape();
  ~GradTape();
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  void backward(const Tensor& loss);

  std::size_t size() const { return steps_.size(); }

  static GradTape* current();

  // Used by op implementations.
  void record(const Tensor& output, std::function<void()> adjoint);

 private:
  struct Step {
    Tensor output;
    std::function<void()> adjoint;
  };
  std::vector<Step> steps_;
  GradTape* previous_ = nullptr;
};

struct Pad {
  int left = 0;
  int right = 0;
};

// --- differentiable operations -------------------------------------------

// Temporal convolution of x:[C_in,T,V] with w:[C_out,C_in,K,1], applied along
// the T axis independently per joint, zero padding. Output [C_out,T_out,V]
// with T_out = floor((T + pad.left + pad.right - K)/stride) + 1.
Tensor conv_time(const Tensor& x, const Tensor& w, int stride, Pad pad);

// Sparse-tap variant: w:[C_out,C_in,A,1] holds weights only for the A tap
// offsets listed in `taps` (each in [0, span)); positions that no tap covers
// never enter the accumulation. Output length uses `span` as the kernel size.
Tensor conv_time_taps(const Tensor& x, const Tensor& w,
                      const std::vector<int>& taps, int span, int stride,
                      Pad pad);

// Per-position channel map: out[:,t,v] = W * x[:,t,v] + b, W:[D,C], b:[D].
Tensor linear_channels(const Tensor& x, const Tensor& W, const Tensor& b);

// Plain affine map for vectors: out = W * x + b, x:[C], W:[K,C], b:[K].
Tensor linear_vec(const Tensor& x, const Tensor& W, const Tensor& b);

// Cosine similarity over the channel axis per (t,v) position; zero vectors
// are handled by clamping each norm to at least eps. Output [1,T,V].
Tensor cosine_sim_channel(const Tensor& a, const Tensor& b, double eps = 1e-8);

// Broadcast multiply of a [1,T,V] weight over the channels of x:[C,T,V].
Tensor mul_broadcast_c(const Tensor& w, const Tensor& x);

// Mean over all (t,v) positions per channel: [C,T,V] -> [C].
Tensor global_pool_mean(const Tensor& x);

// Row-mean KL divergence KL(target || softmax(logits)), logits/target [N,K].
// Each target row must sum to 1 within 1e-9; 0*log(0) terms are dropped.
Tensor kl_loss(const Tensor& logits, const Tensor& target);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double s);
Tensor gelu(const Tensor& x);
Tensor sum(const Tensor& x);

// Stack N rank-1 tensors of length K into [N,K].
Tensor stack_rows(const std::vector<Tensor>& rows);

// Non-differentiable helper: softmax of a raw vector.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace skelact
