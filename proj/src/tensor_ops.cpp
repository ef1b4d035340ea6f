#include <algorithm>
#include <cmath>

#include "skelact/kernels.hpp"
#include "skelact/tensor.hpp"

namespace skelact {

void mark_produced(Tensor& t);

namespace {

const kernels::KernelTable& K() { return kernels::active(); }

bool grads_wanted(std::initializer_list<const Tensor*> inputs) {
  if (!GradTape::current()) return false;
  for (const Tensor* t : inputs) {
    if (t->needs_grad()) return true;
  }
  return false;
}

void record(Tensor& out, std::function<void()> adjoint) {
  mark_produced(out);
  GradTape::current()->record(out, std::move(adjoint));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_rank(const Tensor& t, int rank, const char* op) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

// --- temporal convolution ---------------------------------------------------

namespace {

struct ConvGeometry {
  int c_in, t_in, v;
  int c_out, taps_n;
  int span, stride, t_out;
  Pad pad;
};

ConvGeometry conv_check(const Tensor& x, const Tensor& w,
                        const std::vector<int>& taps, int span, int stride,
                        Pad pad) {
  require_rank(x, 3, "conv_time");
  require_rank(w, 4, "conv_time");
  if (w.dim(1) != x.dim(0)) {
    throw DimensionError("conv_time: kernel expects " + std::to_string(w.dim(1)) +
                         " input channels, tensor has " + std::to_string(x.dim(0)));
  }
  if (w.dim(3) != 1) {
    throw DimensionError("conv_time: kernel joint extent must be 1");
  }
  if (w.dim(2) != static_cast<int>(taps.size())) {
    throw DimensionError("conv_time: kernel has " + std::to_string(w.dim(2)) +
                         " taps, expected " + std::to_string(taps.size()));
  }
  if (stride < 1) throw ValidationError("conv_time: stride must be >= 1");
  if (pad.left < 0 || pad.right < 0) {
    throw ValidationError("conv_time: padding must be non-negative");
  }
  for (int tp : taps) {
    if (tp < 0 || tp >= span) {
      throw ValidationError("conv_time: tap offset " + std::to_string(tp) +
                            " outside kernel span " + std::to_string(span));
    }
  }
  ConvGeometry g;
  g.c_in = x.dim(0);
  g.t_in = x.dim(1);
  g.v = x.dim(2);
  g.c_out = w.dim(0);
  g.taps_n = w.dim(2);
  g.span = span;
  g.stride = stride;
  g.pad = pad;
  const int padded = g.t_in + pad.left + pad.right;
  if (span > padded) {
    throw ValidationError("conv_time: kernel span " + std::to_string(span) +
                          " exceeds padded length " + std::to_string(padded));
  }
  g.t_out = (padded - span) / stride + 1;
  return g;
}

Tensor conv_time_impl(const Tensor& x, const Tensor& w,
                      const std::vector<int>& taps, int span, int stride,
                      Pad pad) {
  const ConvGeometry g = conv_check(x, w, taps, span, stride, pad);
  Tensor out = Tensor::zeros({g.c_out, g.t_out, g.v});

  const bool track = grads_wanted({&x, &w});
  {
    auto xd = x.data();
    auto wd = w.data();
    auto od = out.data();
    for (int co = 0; co < g.c_out; ++co) {
      for (int to = 0; to < g.t_out; ++to) {
        double* out_row = od.data() + (static_cast<std::size_t>(co) * g.t_out + to) * g.v;
        const int base = to * g.stride - g.pad.left;
        for (int ci = 0; ci < g.c_in; ++ci) {
          const double* x_chan = xd.data() + static_cast<std::size_t>(ci) * g.t_in * g.v;
          const double* w_row =
              wd.data() + (static_cast<std::size_t>(co) * g.c_in + ci) * g.taps_n;
          for (int j = 0; j < g.taps_n; ++j) {
            const int ti = base + taps[j];
            if (ti < 0 || ti >= g.t_in) continue;  // zero padding
            K().axpy(static_cast<std::size_t>(g.v), w_row[j],
                     x_chan + static_cast<std::size_t>(ti) * g.v, out_row);
          }
        }
      }
    }
  }

  if (track) {
    Tensor xc = x, wc = w, oc = out;
    std::vector<int> tps = taps;
    record(out, [xc, wc, oc, tps, g]() mutable {
      auto gout = oc.grad();
      auto wd = wc.data();
      auto xd = xc.data();
      const bool want_x = xc.needs_grad();
      const bool want_w = wc.needs_grad();
      std::span<double> gx, gw;
      if (want_x) gx = xc.grad();
      if (want_w) gw = wc.grad();
      for (int co = 0; co < g.c_out; ++co) {
        for (int to = 0; to < g.t_out; ++to) {
          const double* g_row =
              gout.data() + (static_cast<std::size_t>(co) * g.t_out + to) * g.v;
          const int base = to * g.stride - g.pad.left;
          for (int ci = 0; ci < g.c_in; ++ci) {
            const std::size_t w_off =
                (static_cast<std::size_t>(co) * g.c_in + ci) * g.taps_n;
            for (int j = 0; j < g.taps_n; ++j) {
              const int ti = base + tps[j];
              if (ti < 0 || ti >= g.t_in) continue;
              const std::size_t x_off =
                  (static_cast<std::size_t>(ci) * g.t_in + ti) * g.v;
              if (want_x) {
                K().axpy(static_cast<std::size_t>(g.v), wd[w_off + j], g_row,
                         gx.data() + x_off);
              }
              if (want_w) {
                gw[w_off + j] +=
                    K().dot(static_cast<std::size_t>(g.v), g_row, xd.data() + x_off);
              }
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor conv_time(const Tensor& x, const Tensor& w, int stride, Pad pad) {
  require_rank(w, 4, "conv_time");
  std::vector<int> taps(static_cast<std::size_t>(w.dim(2)));
  for (std::size_t i = 0; i < taps.size(); ++i) taps[i] = static_cast<int>(i);
  return conv_time_impl(x, w, taps, w.dim(2), stride, pad);
}

Tensor conv_time_taps(const Tensor& x, const Tensor& w,
                      const std::vector<int>& taps, int span, int stride,
                      Pad pad) {
  return conv_time_impl(x, w, taps, span, stride, pad);
}

// --- linear maps -------------------------------------------------------------

Tensor linear_channels(const Tensor& x, const Tensor& W, const Tensor& b) {
  require_rank(x, 3, "linear_channels");
  require_rank(W, 2, "linear_channels");
  require_rank(b, 1, "linear_channels");
  const int c = x.dim(0), t = x.dim(1), v = x.dim(2);
  const int d = W.dim(0);
  if (W.dim(1) != c) {
    throw DimensionError("linear_channels: weight expects " +
                         std::to_string(W.dim(1)) + " channels, tensor has " +
                         std::to_string(c));
  }
  if (b.dim(0) != d) {
    throw DimensionError("linear_channels: bias length " + std::to_string(b.dim(0)) +
                         " != output channels " + std::to_string(d));
  }
  const std::size_t plane = static_cast<std::size_t>(t) * v;
  Tensor out = Tensor::zeros({d, t, v});
  {
    auto xd = x.data();
    auto wd = W.data();
    auto bd = b.data();
    auto od = out.data();
    for (int i = 0; i < d; ++i) {
      double* out_plane = od.data() + static_cast<std::size_t>(i) * plane;
      K().add_scalar(plane, bd[i], out_plane);
      for (int j = 0; j < c; ++j) {
        K().axpy(plane, wd[static_cast<std::size_t>(i) * c + j],
                 xd.data() + static_cast<std::size_t>(j) * plane, out_plane);
      }
    }
  }

  if (grads_wanted({&x, &W, &b})) {
    Tensor xc = x, Wc = W, bc = b, oc = out;
    record(out, [xc, Wc, bc, oc, c, d, plane]() mutable {
      auto gout = oc.grad();
      auto xd = xc.data();
      auto wd = Wc.data();
      const bool want_x = xc.needs_grad();
      const bool want_w = Wc.needs_grad();
      const bool want_b = bc.needs_grad();
      std::span<double> gx, gw, gb;
      if (want_x) gx = xc.grad();
      if (want_w) gw = Wc.grad();
      if (want_b) gb = bc.grad();
      for (int i = 0; i < d; ++i) {
        const double* g_plane = gout.data() + static_cast<std::size_t>(i) * plane;
        if (want_b) gb[i] += K().sum(plane, g_plane);
        for (int j = 0; j < c; ++j) {
          const std::size_t xo = static_cast<std::size_t>(j) * plane;
          if (want_x) {
            K().axpy(plane, wd[static_cast<std::size_t>(i) * c + j], g_plane,
                     gx.data() + xo);
          }
          if (want_w) {
            gw[static_cast<std::size_t>(i) * c + j] +=
                K().dot(plane, g_plane, xd.data() + xo);
          }
        }
      }
    });
  }
  return out;
}

Tensor linear_vec(const Tensor& x, const Tensor& W, const Tensor& b) {
  require_rank(x, 1, "linear_vec");
  require_rank(W, 2, "linear_vec");
  require_rank(b, 1, "linear_vec");
  const int c = x.dim(0);
  const int k = W.dim(0);
  if (W.dim(1) != c || b.dim(0) != k) {
    throw DimensionError("linear_vec: incompatible shapes " + shape_str(x.shape()) +
                         ", " + shape_str(W.shape()) + ", " + shape_str(b.shape()));
  }
  Tensor out = Tensor::zeros({k});
  {
    auto xd = x.data();
    auto wd = W.data();
    auto bd = b.data();
    auto od = out.data();
    for (int i = 0; i < k; ++i) {
      od[i] = bd[i] + K().dot(static_cast<std::size_t>(c),
                              wd.data() + static_cast<std::size_t>(i) * c, xd.data());
    }
  }
  if (grads_wanted({&x, &W, &b})) {
    Tensor xc = x, Wc = W, bc = b, oc = out;
    record(out, [xc, Wc, bc, oc, c, k]() mutable {
      auto gout = oc.grad();
      auto xd = xc.data();
      auto wd = Wc.data();
      const bool want_x = xc.needs_grad();
      const bool want_w = Wc.needs_grad();
      const bool want_b = bc.needs_grad();
      for (int i = 0; i < k; ++i) {
        const double g = gout[i];
        if (want_b) bc.grad()[i] += g;
        if (want_x) {
          K().axpy(static_cast<std::size_t>(c), g,
                   wd.data() + static_cast<std::size_t>(i) * c, xc.grad().data());
        }
        if (want_w) {
          K().axpy(static_cast<std::size_t>(c), g, xd.data(),
                   Wc.grad().data() + static_cast<std::size_t>(i) * c);
        }
      }
    });
  }
  return out;
}

// --- cosine similarity --------------------------------------------------------

Tensor cosine_sim_channel(const Tensor& a, const Tensor& b, double eps) {
  require_rank(a, 3, "cosine_sim_channel");
  require_same_shape(a, b, "cosine_sim_channel");
  if (!(eps > 0.0)) throw ValidationError("cosine_sim_channel: eps must be > 0");
  const int d = a.dim(0), t = a.dim(1), v = a.dim(2);
  const std::size_t plane = static_cast<std::size_t>(t) * v;

  std::vector<double> dots(plane, 0.0), na2(plane, 0.0), nb2(plane, 0.0);
  {
    auto ad = a.data();
    auto bd = b.data();
    for (int i = 0; i < d; ++i) {
      const double* ap = ad.data() + static_cast<std::size_t>(i) * plane;
      const double* bp = bd.data() + static_cast<std::size_t>(i) * plane;
      K().mul_acc(plane, ap, bp, dots.data());
      K().mul_acc(plane, ap, ap, na2.data());
      K().mul_acc(plane, bp, bp, nb2.data());
    }
  }

  Tensor out = Tensor::zeros({1, t, v});
  {
    auto od = out.data();
    for (std::size_t p = 0; p < plane; ++p) {
      const double na = std::max(std::sqrt(na2[p]), eps);
      const double nb = std::max(std::sqrt(nb2[p]), eps);
      od[p] = std::clamp(dots[p] / (na * nb), -1.0, 1.0);
    }
  }

  if (grads_wanted({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc, dots, na2, nb2, eps, d, plane]() mutable {
      auto gout = oc.grad();
      auto ad = ac.data();
      auto bd = bc.data();
      const bool want_a = ac.needs_grad();
      const bool want_b = bc.needs_grad();
      // Per-position coefficients; the clamp only engages on parallel-vector
      // rounding overshoot, where the unclamped quotient derivative is still
      // the right adjoint.
      std::vector<double> cross(plane), a_self(plane), b_self(plane);
      for (std::size_t p = 0; p < plane; ++p) {
        const double na_raw = std::sqrt(na2[p]);
        const double nb_raw = std::sqrt(nb2[p]);
        const double na = std::max(na_raw, eps);
        const double nb = std::max(nb_raw, eps);
        const double denom = na * nb;
        const double s = dots[p] / denom;
        const double g = gout[p];
        cross[p] = g / denom;
        a_self[p] = na_raw > eps ? -g * s / na2[p] : 0.0;
        b_self[p] = nb_raw > eps ? -g * s / nb2[p] : 0.0;
      }
      for (int i = 0; i < d; ++i) {
        const double* ap = ad.data() + static_cast<std::size_t>(i) * plane;
        const double* bp = bd.data() + static_cast<std::size_t>(i) * plane;
        if (want_a) {
          double* ga = ac.grad().data() + static_cast<std::size_t>(i) * plane;
          K().mul_acc(plane, cross.data(), bp, ga);
          K().mul_acc(plane, a_self.data(), ap, ga);
        }
        if (want_b) {
          double* gb = bc.grad().data() + static_cast<std::size_t>(i) * plane;
          K().mul_acc(plane, cross.data(), ap, gb);
          K().mul_acc(plane, b_self.data(), bp, gb);
        }
      }
    });
  }
  return out;
}

Tensor mul_broadcast_c(const Tensor& w, const Tensor& x) {
  require_rank(w, 3, "mul_broadcast_c");
  require_rank(x, 3, "mul_broadcast_c");
  if (w.dim(0) != 1 || w.dim(1) != x.dim(1) || w.dim(2) != x.dim(2)) {
    throw DimensionError("mul_broadcast_c: weight " + shape_str(w.shape()) +
                         " does not broadcast over " + shape_str(x.shape()));
  }
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  Tensor out = Tensor::zeros(x.shape());
  {
    auto wd = w.data();
    auto xd = x.data();
    auto od = out.data();
    for (int i = 0; i < c; ++i) {
      K().mul(plane, wd.data(), xd.data() + static_cast<std::size_t>(i) * plane,
              od.data() + static_cast<std::size_t>(i) * plane);
    }
  }
  if (grads_wanted({&w, &x})) {
    Tensor wc = w, xc = x, oc = out;
    record(out, [wc, xc, oc, c, plane]() mutable {
      auto gout = oc.grad();
      auto wd = wc.data();
      auto xd = xc.data();
      for (int i = 0; i < c; ++i) {
        const double* g_plane = gout.data() + static_cast<std::size_t>(i) * plane;
        if (wc.needs_grad()) {
          K().mul_acc(plane, g_plane, xd.data() + static_cast<std::size_t>(i) * plane,
                      wc.grad().data());
        }
        if (xc.needs_grad()) {
          K().mul_acc(plane, g_plane, wd.data(),
                      xc.grad().data() + static_cast<std::size_t>(i) * plane);
        }
      }
    });
  }
  return out;
}

Tensor global_pool_mean(const Tensor& x) {
  require_rank(x, 3, "global_pool_mean");
  const int c = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(1)) * x.dim(2);
  if (plane == 0) throw ValidationError("global_pool_mean: empty (t,v) grid");
  Tensor out = Tensor::zeros({c});
  {
    auto xd = x.data();
    auto od = out.data();
    for (int i = 0; i < c; ++i) {
      od[i] = K().sum(plane, xd.data() + static_cast<std::size_t>(i) * plane) /
              static_cast<double>(plane);
    }
  }
  if (grads_wanted({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc, c, plane]() mutable {
      auto gout = oc.grad();
      for (int i = 0; i < c; ++i) {
        K().add_scalar(plane, gout[i] / static_cast<double>(plane),
                       xc.grad().data() + static_cast<std::size_t>(i) * plane);
      }
    });
  }
  return out;
}

// --- loss ---------------------------------------------------------------------

namespace {

// log-softmax into `out`; returns nothing. Stable via max subtraction.
void log_softmax_row(const double* logits, int k, double* out) {
  double m = logits[0];
  for (int i = 1; i < k; ++i) m = std::max(m, logits[i]);
  double z = 0.0;
  for (int i = 0; i < k; ++i) z += std::exp(logits[i] - m);
  const double lse = m + std::log(z);
  for (int i = 0; i < k; ++i) out[i] = logits[i] - lse;
}

}  // namespace

Tensor kl_loss(const Tensor& logits, const Tensor& target) {
  require_rank(logits, 2, "kl_loss");
  require_same_shape(logits, target, "kl_loss");
  const int n = logits.dim(0), k = logits.dim(1);
  if (k < 2) throw ValidationError("kl_loss: need at least 2 classes");
  auto td = target.data();
  for (int row = 0; row < n; ++row) {
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
      const double t = td[static_cast<std::size_t>(row) * k + i];
      if (t < 0.0) throw ValidationError("kl_loss: negative target probability");
      s += t;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ValidationError("kl_loss: target row " + std::to_string(row) +
                            " sums to " + std::to_string(s) + ", expected 1");
    }
  }

  auto ld = logits.data();
  std::vector<double> lsm(static_cast<std::size_t>(n) * k);
  double total = 0.0;
  for (int row = 0; row < n; ++row) {
    const std::size_t off = static_cast<std::size_t>(row) * k;
    log_softmax_row(ld.data() + off, k, lsm.data() + off);
    for (int i = 0; i < k; ++i) {
      const double t = td[off + i];
      if (t > 0.0) total += t * (std::log(t) - lsm[off + i]);
    }
  }
  Tensor out = Tensor::scalar(total / n);

  if (grads_wanted({&logits})) {
    Tensor lc = logits, tc = target, oc = out;
    record(out, [lc, tc, oc, lsm, n, k]() mutable {
      const double g = oc.grad()[0] / n;
      auto td2 = tc.data();
      auto gl = lc.grad();
      for (std::size_t i = 0; i < lsm.size(); ++i) {
        gl[i] += g * (std::exp(lsm[i]) - td2[i]);
      }
    });
  }
  return out;
}

// --- elementwise ----------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.data().size();
  K().add(n, a.data().data(), b.data().data(), out.data().data());
  if (grads_wanted({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc, n]() mutable {
      auto g = oc.grad();
      if (ac.needs_grad()) K().axpy(n, 1.0, g.data(), ac.grad().data());
      if (bc.needs_grad()) K().axpy(n, 1.0, g.data(), bc.grad().data());
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  const std::size_t n = out.data().size();
  K().mul(n, a.data().data(), b.data().data(), out.data().data());
  if (grads_wanted({&a, &b})) {
    Tensor ac = a, bc = b, oc = out;
    record(out, [ac, bc, oc, n]() mutable {
      auto g = oc.grad();
      if (ac.needs_grad()) K().mul_acc(n, g.data(), bc.data().data(), ac.grad().data());
      if (bc.needs_grad()) K().mul_acc(n, g.data(), ac.data().data(), bc.grad().data());
    });
  }
  return out;
}

Tensor scale(const Tensor& x, double s) {
  Tensor out = x.clone();
  out.set_requires_grad(false);
  const std::size_t n = out.data().size();
  K().scale(n, s, out.data().data());
  if (grads_wanted({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc, s, n]() mutable {
      K().axpy(n, s, oc.grad().data(), xc.grad().data());
    });
  }
  return out;
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

Tensor gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < od.size(); ++i) {
    od[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * kInvSqrt2));
  }
  if (grads_wanted({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc]() mutable {
      auto g = oc.grad();
      auto xd2 = xc.data();
      auto gx = xc.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = xd2[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
        gx[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  Tensor out = Tensor::scalar(K().sum(x.data().size(), x.data().data()));
  if (grads_wanted({&x})) {
    Tensor xc = x, oc = out;
    record(out, [xc, oc]() mutable {
      K().add_scalar(xc.data().size(), oc.grad()[0], xc.grad().data());
    });
  }
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ValidationError("stack_rows: empty input");
  const int k = rows.front().dim(0);
  for (const Tensor& r : rows) {
    require_rank(r, 1, "stack_rows");
    if (r.dim(0) != k) throw DimensionError("stack_rows: inconsistent row lengths");
  }
  const int n = static_cast<int>(rows.size());
  Tensor out = Tensor::zeros({n, k});
  auto od = out.data();
  for (int i = 0; i < n; ++i) {
    auto rd = rows[static_cast<std::size_t>(i)].data();
    std::copy(rd.begin(), rd.end(), od.begin() + static_cast<std::size_t>(i) * k);
  }
  bool track = false;
  for (const Tensor& r : rows) {
    if (r.needs_grad()) track = true;
  }
  if (GradTape::current() && track) {
    std::vector<Tensor> rc = rows;
    Tensor oc = out;
    record(out, [rc, oc, k]() mutable {
      auto g = oc.grad();
      for (std::size_t i = 0; i < rc.size(); ++i) {
        if (!rc[i].needs_grad()) continue;
        K().axpy(static_cast<std::size_t>(k), 1.0, g.data() + i * k,
                 rc[i].grad().data());
      }
    });
  }
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (out.empty()) return out;
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  double z = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (double& v : out) v /= z;
  return out;
}

}  // namespace skelact
