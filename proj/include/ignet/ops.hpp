#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ignet/autograd.hpp"
#include "ignet/blas.hpp"
#include "ignet/tensor.hpp"
#include "ignet/wavelet.hpp"

namespace ignet {

namespace detail {

template <class T>
void accum(const Value<T>& dst, const Tensor<T>& g) {
  if (!dst->requires_grad) return;
  dst->ensure_grad();
  T* d = dst->grad.data();
  const T* s = g.data();
  for (index_t i = 0; i < g.numel(); ++i) d[i] += s[i];
}

// col[(ci*k+dy)*k+dx][oy*ow+ox] = x[ci][oy+dy-p][ox+dx-p], zero outside.
template <class T>
void im2col(const T* x, index_t cin, index_t h, index_t w, index_t k, index_t pad, index_t oh,
            index_t ow, T* col) {
  for (index_t ci = 0; ci < cin; ++ci) {
    const T* plane = x + ci * h * w;
    for (index_t dy = 0; dy < k; ++dy) {
      for (index_t dx = 0; dx < k; ++dx) {
        T* row = col + ((ci * k + dy) * k + dx) * oh * ow;
        for (index_t oy = 0; oy < oh; ++oy) {
          const index_t sy = oy + dy - pad;
          if (sy < 0 || sy >= h) {
            for (index_t ox = 0; ox < ow; ++ox) row[oy * ow + ox] = T(0);
            continue;
          }
          const T* src = plane + sy * w;
          for (index_t ox = 0; ox < ow; ++ox) {
            const index_t sx = ox + dx - pad;
            row[oy * ow + ox] = (sx >= 0 && sx < w) ? src[sx] : T(0);
          }
        }
      }
    }
  }
}

// Transpose of im2col: scatter-adds col entries back into the image.
template <class T>
void col2im_add(const T* col, index_t cin, index_t h, index_t w, index_t k, index_t pad,
                index_t oh, index_t ow, T* x) {
  for (index_t ci = 0; ci < cin; ++ci) {
    T* plane = x + ci * h * w;
    for (index_t dy = 0; dy < k; ++dy) {
      for (index_t dx = 0; dx < k; ++dx) {
        const T* row = col + ((ci * k + dy) * k + dx) * oh * ow;
        for (index_t oy = 0; oy < oh; ++oy) {
          const index_t sy = oy + dy - pad;
          if (sy < 0 || sy >= h) continue;
          T* dst = plane + sy * w;
          for (index_t ox = 0; ox < ow; ++ox) {
            const index_t sx = ox + dx - pad;
            if (sx >= 0 && sx < w) dst[sx] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <class T>
Value<T> add(const Value<T>& a, const Value<T>& b) {
  require_same_shape(a->value, b->value, "add");
  Tensor<T> out(a->value.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] + b->value[i];
  check_finite(out, "add");
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    detail::accum(n.inputs[0], n.grad);
    detail::accum(n.inputs[1], n.grad);
  });
}

template <class T>
Value<T> sub(const Value<T>& a, const Value<T>& b) {
  require_same_shape(a->value, b->value, "sub");
  Tensor<T> out(a->value.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] - b->value[i];
  check_finite(out, "sub");
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    detail::accum(n.inputs[0], n.grad);
    if (n.inputs[1]->requires_grad) {
      Tensor<T> neg(n.grad.shape());
      for (index_t i = 0; i < neg.numel(); ++i) neg[i] = -n.grad[i];
      detail::accum(n.inputs[1], neg);
    }
  });
}

template <class T>
Value<T> mul(const Value<T>& a, const Value<T>& b) {
  require_same_shape(a->value, b->value, "mul");
  Tensor<T> out(a->value.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * b->value[i];
  check_finite(out, "mul");
  return make_op<T>(std::move(out), {a, b}, [](Node<T>& n) {
    if (n.inputs[0]->requires_grad) {
      Tensor<T> g(n.grad.shape());
      for (index_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * n.inputs[1]->value[i];
      detail::accum(n.inputs[0], g);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor<T> g(n.grad.shape());
      for (index_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * n.inputs[0]->value[i];
      detail::accum(n.inputs[1], g);
    }
  });
}

template <class T>
Value<T> scale(const Value<T>& a, T s) {
  Tensor<T> out(a->value.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] * s;
  check_finite(out, "scale");
  return make_op<T>(std::move(out), {a}, [s](Node<T>& n) {
    Tensor<T> g(n.grad.shape());
    for (index_t i = 0; i < g.numel(); ++i) g[i] = n.grad[i] * s;
    detail::accum(n.inputs[0], g);
  });
}

template <class T>
Value<T> relu(const Value<T>& a) {
  Tensor<T> out(a->value.shape());
  for (index_t i = 0; i < out.numel(); ++i) out[i] = a->value[i] > T(0) ? a->value[i] : T(0);
  check_finite(out, "relu");
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    if (!n.inputs[0]->requires_grad) return;
    Tensor<T> g(n.grad.shape());
    for (index_t i = 0; i < g.numel(); ++i)
      g[i] = n.inputs[0]->value[i] > T(0) ? n.grad[i] : T(0);
    detail::accum(n.inputs[0], g);
  });
}

// ---------------------------------------------------------------- reductions

template <class T>
Value<T> sum(const Value<T>& a) {
  double acc = 0;
  for (index_t i = 0; i < a->value.numel(); ++i) acc += static_cast<double>(a->value[i]);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));
  check_finite(out, "sum");
  return make_op<T>(std::move(out), {a}, [](Node<T>& n) {
    const T g = n.grad[0];
    Tensor<T> gi = Tensor<T>::full(n.inputs[0]->value.shape(), g);
    detail::accum(n.inputs[0], gi);
  });
}

template <class T>
Value<T> mean(const Value<T>& a) {
  const index_t m = a->value.numel();
  if (m == 0) throw ShapeError("mean of empty tensor");
  double acc = 0;
  for (index_t i = 0; i < m; ++i) acc += static_cast<double>(a->value[i]);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(m)));
  check_finite(out, "mean");
  return make_op<T>(std::move(out), {a}, [m](Node<T>& n) {
    const T g = n.grad[0] / static_cast<T>(m);
    Tensor<T> gi = Tensor<T>::full(n.inputs[0]->value.shape(), g);
    detail::accum(n.inputs[0], gi);
  });
}

// Mean of squared differences over all elements.
template <class T>
Value<T> mse_loss(const Value<T>& pred, const Value<T>& target) {
  require_same_shape(pred->value, target->value, "mse_loss");
  const index_t m = pred->value.numel();
  if (m == 0) throw ShapeError("mse_loss of empty tensor");
  double acc = 0;
  for (index_t i = 0; i < m; ++i) {
    const double d = static_cast<double>(pred->value[i]) - static_cast<double>(target->value[i]);
    acc += d * d;
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / static_cast<double>(m)));
  check_finite(out, "mse_loss");
  return make_op<T>(std::move(out), {pred, target}, [m](Node<T>& n) {
    const T g = n.grad[0];
    const T scale = T(2) / static_cast<T>(m);
    const Tensor<T>& p = n.inputs[0]->value;
    const Tensor<T>& t = n.inputs[1]->value;
    if (n.inputs[0]->requires_grad) {
      Tensor<T> gp(p.shape());
      for (index_t i = 0; i < m; ++i) gp[i] = g * scale * (p[i] - t[i]);
      detail::accum(n.inputs[0], gp);
    }
    if (n.inputs[1]->requires_grad) {
      Tensor<T> gt(t.shape());
      for (index_t i = 0; i < m; ++i) gt[i] = g * scale * (t[i] - p[i]);
      detail::accum(n.inputs[1], gt);
    }
  });
}

// ---------------------------------------------------------------- channel ops

template <class T>
Value<T> concat_channels(const Value<T>& a, const Value<T>& b) {
  const Tensor<T>&va = a->value, &vb = b->value;
  if (va.ndim() != 4 || vb.ndim() != 4)
    throw ShapeError("concat_channels expects [N,C,H,W] inputs");
  if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3))
    throw ShapeError("concat_channels: batch/spatial mismatch " + shape_str(va.shape()) +
                     " vs " + shape_str(vb.shape()));
  const index_t n = va.dim(0), ca = va.dim(1), cb = vb.dim(1), hw = va.dim(2) * va.dim(3);
  Tensor<T> out({n, ca + cb, va.dim(2), va.dim(3)});
  for (index_t i = 0; i < n; ++i) {
    std::copy_n(va.data() + i * ca * hw, ca * hw, out.data() + i * (ca + cb) * hw);
    std::copy_n(vb.data() + i * cb * hw, cb * hw, out.data() + (i * (ca + cb) + ca) * hw);
  }
  check_finite(out, "concat_channels");
  return make_op<T>(std::move(out), {a, b}, [n, ca, cb, hw](Node<T>& nd) {
    for (int which = 0; which < 2; ++which) {
      const auto& in = nd.inputs[static_cast<std::size_t>(which)];
      if (!in->requires_grad) continue;
      const index_t c = which == 0 ? ca : cb;
      const index_t off = which == 0 ? 0 : ca;
      Tensor<T> g(in->value.shape());
      for (index_t i = 0; i < n; ++i)
        std::copy_n(nd.grad.data() + (i * (ca + cb) + off) * hw, c * hw, g.data() + i * c * hw);
      detail::accum(in, g);
    }
  });
}

// View [c0,c1) of the channel axis as a copy.
template <class T>
Value<T> slice_channels(const Value<T>& a, index_t c0, index_t c1) {
  const Tensor<T>& v = a->value;
  if (v.ndim() != 4) throw ShapeError("slice_channels expects [N,C,H,W]");
  if (c0 < 0 || c1 > v.dim(1) || c0 >= c1)
    throw ShapeError("slice_channels: bad range [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") for C=" + std::to_string(v.dim(1)));
  const index_t n = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3), cs = c1 - c0;
  Tensor<T> out({n, cs, v.dim(2), v.dim(3)});
  for (index_t i = 0; i < n; ++i)
    std::copy_n(v.data() + (i * c + c0) * hw, cs * hw, out.data() + i * cs * hw);
  return make_op<T>(std::move(out), {a}, [n, c, c0, cs, hw](Node<T>& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    Tensor<T> g(nd.inputs[0]->value.shape());  // zeros outside the slice
    for (index_t i = 0; i < n; ++i)
      std::copy_n(nd.grad.data() + i * cs * hw, cs * hw, g.data() + (i * c + c0) * hw);
    detail::accum(nd.inputs[0], g);
  });
}

// ---------------------------------------------------------------- conv2d

// Cross-correlation with zero padding, bias per output channel.
// x [N,Cin,H,W], w [Cout,Cin,k,k], b [Cout]. Same-padding (pad = (k-1)/2)
// is the only mode the model uses; the kernel itself is general.
template <class T>
Value<T> conv2d(const Value<T>& x, const Value<T>& w, const Value<T>& b, index_t padding) {
  const Tensor<T>&vx = x->value, &vw = w->value, &vb = b->value;
  if (vx.ndim() != 4) throw ShapeError("conv2d: input must be [N,Cin,H,W], got " +
                                       shape_str(vx.shape()));
  if (vw.ndim() != 4) throw ShapeError("conv2d: weight must be [Cout,Cin,k,k], got " +
                                       shape_str(vw.shape()));
  if (vw.dim(2) != vw.dim(3)) throw ShapeError("conv2d: kernel must be square");
  if (vx.dim(1) != vw.dim(1))
    throw ShapeError("conv2d: input C_in " + std::to_string(vx.dim(1)) +
                     " != weight C_in " + std::to_string(vw.dim(1)));
  if (vb.ndim() != 1 || vb.dim(0) != vw.dim(0))
    throw ShapeError("conv2d: bias must be [Cout]");
  const index_t n = vx.dim(0), cin = vx.dim(1), h = vx.dim(2), ww = vx.dim(3);
  const index_t cout = vw.dim(0), k = vw.dim(2);
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  const index_t oh = h + 2 * padding - k + 1, ow = ww + 2 * padding - k + 1;
  if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: output would be empty");

  const index_t ckk = cin * k * k, ohw = oh * ow;
  Tensor<T> out({n, cout, oh, ow});
  std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
  for (index_t i = 0; i < n; ++i) {
    detail::im2col(vx.data() + i * cin * h * ww, cin, h, ww, k, padding, oh, ow, col.data());
    T* dst = out.data() + i * cout * ohw;
    detail::gemm(false, false, cout, ohw, ckk, T(1), vw.data(), ckk, col.data(), ohw, T(0), dst,
                 ohw);
    for (index_t co = 0; co < cout; ++co) {
      const T bias = vb[co];
      T* row = dst + co * ohw;
      for (index_t j = 0; j < ohw; ++j) row[j] += bias;
    }
  }
  check_finite(out, "conv2d");

  auto bwd = [n, cin, h, ww, cout, k, padding, oh, ow, ckk, ohw](Node<T>& nd) {
    const Tensor<T>& gx_in = nd.inputs[0]->value;
    const Tensor<T>& gw_in = nd.inputs[1]->value;
    const bool need_x = nd.inputs[0]->requires_grad;
    const bool need_w = nd.inputs[1]->requires_grad;
    const bool need_b = nd.inputs[2]->requires_grad;
    Tensor<T> gx(need_x ? gx_in.shape() : Shape{1});
    Tensor<T> gw(need_w ? gw_in.shape() : Shape{1});
    Tensor<T> gb(need_b ? Shape{cout} : Shape{1});
    std::vector<T> col(static_cast<std::size_t>(ckk * ohw));
    std::vector<T> gcol(static_cast<std::size_t>(ckk * ohw));
    for (index_t i = 0; i < n; ++i) {
      const T* gout = nd.grad.data() + i * cout * ohw;
      if (need_b) {
        for (index_t co = 0; co < cout; ++co) {
          double acc = 0;
          const T* row = gout + co * ohw;
          for (index_t j = 0; j < ohw; ++j) acc += static_cast<double>(row[j]);
          gb[co] += static_cast<T>(acc);
        }
      }
      if (need_w) {
        detail::im2col(gx_in.data() + i * cin * h * ww, cin, h, ww, k, padding, oh, ow,
                       col.data());
        // gw[cout, ckk] += gout[cout, ohw] * col[ckk, ohw]^T
        detail::gemm(false, true, cout, ckk, ohw, T(1), gout, ohw, col.data(), ohw, T(1),
                     gw.data(), ckk);
      }
      if (need_x) {
        // gcol[ckk, ohw] = w[cout, ckk]^T * gout[cout, ohw]
        detail::gemm(true, false, ckk, ohw, cout, T(1), gw_in.data(), ckk, gout, ohw, T(0),
                     gcol.data(), ohw);
        detail::col2im_add(gcol.data(), cin, h, ww, k, padding, oh, ow,
                           gx.data() + i * cin * h * ww);
      }
    }
    if (need_x) detail::accum(nd.inputs[0], gx);
    if (need_w) detail::accum(nd.inputs[1], gw);
    if (need_b) detail::accum(nd.inputs[2], gb);
  };
  return make_op<T>(std::move(out), {x, w, b}, std::move(bwd));
}

// ---------------------------------------------------------------- batch norm

enum class BnMode {
  Train,        // batch statistics, update running stats
  TrainFrozen,  // batch statistics, no update (finite-difference checks)
  Eval          // running statistics
};

template <class T>
struct BnStats {
  Tensor<T> mean, var;
  bool initialized = false;

  explicit BnStats(index_t channels = 0)
      : mean(channels > 0 ? Tensor<T>({channels}) : Tensor<T>()),
        var(channels > 0 ? Tensor<T>::ones({channels}) : Tensor<T>()) {}
};

// Per-channel normalization over (N,H,W). Variance is biased (1/m), both
// for normalization and for the running estimate.
template <class T>
Value<T> batch_norm(const Value<T>& x, const Value<T>& gamma, const Value<T>& beta,
                    BnStats<T>& stats, BnMode mode, double momentum = 0.1, double eps = 1e-5) {
  const Tensor<T>& v = x->value;
  if (v.ndim() != 4) throw ShapeError("batch_norm expects [N,C,H,W]");
  const index_t n = v.dim(0), c = v.dim(1), hw = v.dim(2) * v.dim(3);
  if (gamma->value.numel() != c || beta->value.numel() != c)
    throw ShapeError("batch_norm: gamma/beta must be [C]");
  const index_t m = n * hw;

  Tensor<T> mu({c}), inv({c});
  if (mode == BnMode::Eval) {
    if (!stats.initialized)
      throw Error(
          "batch_norm: eval mode before any running stats exist; load a checkpoint or train "
          "first");
    for (index_t ci = 0; ci < c; ++ci) {
      mu[ci] = stats.mean[ci];
      inv[ci] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(stats.var[ci]) + eps));
    }
  } else {
    if (m < 2) throw ShapeError("batch_norm: train mode needs N*H*W >= 2 per channel");
    for (index_t ci = 0; ci < c; ++ci) {
      double acc = 0;
      for (index_t i = 0; i < n; ++i) {
        const T* p = v.data() + (i * c + ci) * hw;
        for (index_t j = 0; j < hw; ++j) acc += static_cast<double>(p[j]);
      }
      const double mean_c = acc / static_cast<double>(m);
      double vacc = 0;
      for (index_t i = 0; i < n; ++i) {
        const T* p = v.data() + (i * c + ci) * hw;
        for (index_t j = 0; j < hw; ++j) {
          const double d = static_cast<double>(p[j]) - mean_c;
          vacc += d * d;
        }
      }
      const double var_c = vacc / static_cast<double>(m);
      mu[ci] = static_cast<T>(mean_c);
      inv[ci] = static_cast<T>(1.0 / std::sqrt(var_c + eps));
      if (mode == BnMode::Train) {
        stats.mean[ci] = static_cast<T>((1.0 - momentum) * static_cast<double>(stats.mean[ci]) +
                                        momentum * mean_c);
        stats.var[ci] = static_cast<T>((1.0 - momentum) * static_cast<double>(stats.var[ci]) +
                                       momentum * var_c);
      }
    }
    if (mode == BnMode::Train) stats.initialized = true;
  }

  Tensor<T> out(v.shape());
  for (index_t i = 0; i < n; ++i)
    for (index_t ci = 0; ci < c; ++ci) {
      const T* p = v.data() + (i * c + ci) * hw;
      T* q = out.data() + (i * c + ci) * hw;
      const T g = gamma->value[ci], bb = beta->value[ci], mc = mu[ci], ic = inv[ci];
      for (index_t j = 0; j < hw; ++j) q[j] = g * (p[j] - mc) * ic + bb;
    }
  check_finite(out, "batch_norm");

  const bool batch_stats = (mode != BnMode::Eval);
  auto bwd = [n, c, hw, m, mu, inv, batch_stats](Node<T>& nd) {
    const Tensor<T>& xv = nd.inputs[0]->value;
    const Tensor<T>& gammav = nd.inputs[1]->value;
    const bool need_x = nd.inputs[0]->requires_grad;
    const bool need_g = nd.inputs[1]->requires_grad;
    const bool need_b = nd.inputs[2]->requires_grad;
    Tensor<T> gx(need_x ? xv.shape() : Shape{1});
    Tensor<T> gg({c}), gb({c});
    for (index_t ci = 0; ci < c; ++ci) {
      const T mc = mu[ci], ic = inv[ci];
      double sum_dy = 0, sum_dy_xhat = 0;
      for (index_t i = 0; i < n; ++i) {
        const T* px = xv.data() + (i * c + ci) * hw;
        const T* pg = nd.grad.data() + (i * c + ci) * hw;
        for (index_t j = 0; j < hw; ++j) {
          const double xhat = static_cast<double>((px[j] - mc) * ic);
          sum_dy += static_cast<double>(pg[j]);
          sum_dy_xhat += static_cast<double>(pg[j]) * xhat;
        }
      }
      gb[ci] = static_cast<T>(sum_dy);
      gg[ci] = static_cast<T>(sum_dy_xhat);
      if (!need_x) continue;
      const double gscale = static_cast<double>(gammav[ci]) * static_cast<double>(ic);
      const double mean_dy = sum_dy / static_cast<double>(m);
      const double mean_dy_xhat = sum_dy_xhat / static_cast<double>(m);
      for (index_t i = 0; i < n; ++i) {
        const T* px = xv.data() + (i * c + ci) * hw;
        const T* pg = nd.grad.data() + (i * c + ci) * hw;
        T* pdx = gx.data() + (i * c + ci) * hw;
        for (index_t j = 0; j < hw; ++j) {
          const double xhat = static_cast<double>((px[j] - mc) * ic);
          // Batch stats couple every element of the channel; frozen (eval)
          // stats make the map elementwise-affine.
          const double d = batch_stats
                               ? gscale * (static_cast<double>(pg[j]) - mean_dy - xhat * mean_dy_xhat)
                               : gscale * static_cast<double>(pg[j]);
          pdx[j] = static_cast<T>(d);
        }
      }
    }
    if (need_x) detail::accum(nd.inputs[0], gx);
    if (need_g) detail::accum(nd.inputs[1], gg);
    if (need_b) detail::accum(nd.inputs[2], gb);
  };
  return make_op<T>(std::move(out), {x, gamma, beta}, std::move(bwd));
}

// ---------------------------------------------------------------- wavelet ops

// Graph-aware single-level Haar analysis. Output packs the four subbands
// along channels as [LL | HL | LH | HH], each block C wide, so the H bundle
// of the paper is simply channels [C, 4C).
template <class T>
Value<T> dwt2_g(const Value<T>& x) {
  const Tensor<T>& v = x->value;
  if (v.ndim() != 4) throw ShapeError("dwt2_g expects [N,C,H,W]");
  const index_t n = v.dim(0), c = v.dim(1), h = v.dim(2), w = v.dim(3);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("dwt2_g requires even H and W, got " + shape_str(v.shape()));
  const index_t h2 = h / 2, w2 = w / 2, sub = h2 * w2;
  Tensor<T> out({n, 4 * c, h2, w2});
  for (index_t i = 0; i < n; ++i)
    for (index_t ci = 0; ci < c; ++ci) {
      const T* src = v.data() + (i * c + ci) * h * w;
      T* base = out.data() + i * 4 * c * sub;
      detail::haar_forward_plane(src, h, w, base + ci * sub, base + (c + ci) * sub,
                                 base + (2 * c + ci) * sub, base + (3 * c + ci) * sub);
    }
  check_finite(out, "dwt2_g");
  auto bwd = [n, c, h2, w2, sub](Node<T>& nd) {
    if (!nd.inputs[0]->requires_grad) return;
    // Orthonormal transform: the adjoint is the inverse kernel.
    Tensor<T> gx(nd.inputs[0]->value.shape());
    for (index_t i = 0; i < n; ++i)
      for (index_t ci = 0; ci < c; ++ci) {
        const T* base = nd.grad.data() + i * 4 * c * sub;
        detail::haar_inverse_plane(base + ci * sub, base + (c + ci) * sub,
                                   base + (2 * c + ci) * sub, base + (3 * c + ci) * sub, h2, w2,
                                   gx.data() + (i * c + ci) * 4 * sub);
      }
    detail::accum(nd.inputs[0], gx);
  };
  return make_op<T>(std::move(out), {x}, std::move(bwd));
}

// Graph-aware synthesis from a low band [N,C,h,w] and an H bundle
// [N,3C,h,w] in HL,LH,HH channel order.
template <class T>
Value<T> idwt2_g(const Value<T>& ll, const Value<T>& h_bundle) {
  const Tensor<T>&vl = ll->value, &vh = h_bundle->value;
  if (vl.ndim() != 4 || vh.ndim() != 4) throw ShapeError("idwt2_g expects [N,C,h,w] inputs");
  if (vh.dim(1) != 3 * vl.dim(1))
    throw ShapeError("idwt2_g: H bundle channels " + std::to_string(vh.dim(1)) +
                     " != 3 * " + std::to_string(vl.dim(1)));
  if (vl.dim(0) != vh.dim(0) || vl.dim(2) != vh.dim(2) || vl.dim(3) != vh.dim(3))
    throw ShapeError("idwt2_g: subband shape mismatch " + shape_str(vl.shape()) + " vs " +
                     shape_str(vh.shape()));
  const index_t n = vl.dim(0), c = vl.dim(1), h2 = vl.dim(2), w2 = vl.dim(3), sub = h2 * w2;
  Tensor<T> out({n, c, 2 * h2, 2 * w2});
  for (index_t i = 0; i < n; ++i)
    for (index_t ci = 0; ci < c; ++ci) {
      const T* pll = vl.data() + (i * c + ci) * sub;
      const T* hb = vh.data() + i * 3 * c * sub;
      detail::haar_inverse_plane(pll, hb + ci * sub, hb + (c + ci) * sub, hb + (2 * c + ci) * sub,
                                 h2, w2, out.data() + (i * c + ci) * 4 * sub);
    }
  check_finite(out, "idwt2_g");
  auto bwd = [n, c, h2, w2, sub](Node<T>& nd) {
    const bool need_ll = nd.inputs[0]->requires_grad;
    const bool need_h = nd.inputs[1]->requires_grad;
    if (!need_ll && !need_h) return;
    Tensor<T> gll({n, c, h2, w2});
    Tensor<T> gh({n, 3 * c, h2, w2});
    for (index_t i = 0; i < n; ++i)
      for (index_t ci = 0; ci < c; ++ci) {
        T* ghb = gh.data() + i * 3 * c * sub;
        detail::haar_forward_plane(nd.grad.data() + (i * c + ci) * 4 * sub, 2 * h2, 2 * w2,
                                   gll.data() + (i * c + ci) * sub, ghb + ci * sub,
                                   ghb + (c + ci) * sub, ghb + (2 * c + ci) * sub);
      }
    if (need_ll) detail::accum(nd.inputs[0], gll);
    if (need_h) detail::accum(nd.inputs[1], gh);
  };
  return make_op<T>(std::move(out), {ll, h_bundle}, std::move(bwd));
}

}  // namespace ignet
