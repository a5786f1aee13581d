#pragma once

#include <array>
#include <utility>

#include "ignet/tensor.hpp"

namespace ignet {

// One decomposition level of the orthonormal 2-D Haar transform.
// All four subbands are half resolution; `level` is the pyramid stage
// (0 = first split of the full-resolution features).
template <class T>
struct SubbandSet {
  Tensor<T> ll, hl, lh, hh;
  int level = 0;
};

namespace detail {

// Leading dims of an >=2-D tensor collapse into planes; the transform acts
// on the trailing [H,W] axes.
template <class T>
void plane_geometry(const Tensor<T>& t, index_t& planes, index_t& h, index_t& w) {
  if (t.ndim() < 2) throw ShapeError("wavelet ops need >= 2 dims, got " + shape_str(t.shape()));
  h = t.dim(t.ndim() - 2);
  w = t.dim(t.ndim() - 1);
  planes = t.numel() / (h * w);
}

// Single-plane orthonormal Haar analysis. Per 2x2 block [a b; c d]:
//   ll = (a+b+c+d)/2   hl = (-a+b-c+d)/2   (detail along width)
//   lh = (-a-b+c+d)/2  hh = (a-b-c+d)/2
template <class T>
void haar_forward_plane(const T* src, index_t h, index_t w, T* ll, T* hl, T* lh, T* hh) {
  const index_t hw2 = w / 2;
  for (index_t y = 0; y < h / 2; ++y) {
    const T* r0 = src + (2 * y) * w;
    const T* r1 = r0 + w;
    T* pll = ll + y * hw2;
    T* phl = hl + y * hw2;
    T* plh = lh + y * hw2;
    T* phh = hh + y * hw2;
    for (index_t x = 0; x < hw2; ++x) {
      const T a = r0[2 * x], b = r0[2 * x + 1], c = r1[2 * x], d = r1[2 * x + 1];
      pll[x] = (a + b + c + d) * T(0.5);
      phl[x] = (-a + b - c + d) * T(0.5);
      plh[x] = (-a - b + c + d) * T(0.5);
      phh[x] = (a - b - c + d) * T(0.5);
    }
  }
}

// Exact inverse (the transform is orthogonal, so this is the transpose).
template <class T>
void haar_inverse_plane(const T* ll, const T* hl, const T* lh, const T* hh, index_t h2,
                        index_t w2, T* dst) {
  const index_t w = 2 * w2;
  for (index_t y = 0; y < h2; ++y) {
    const T* pll = ll + y * w2;
    const T* phl = hl + y * w2;
    const T* plh = lh + y * w2;
    const T* phh = hh + y * w2;
    T* r0 = dst + (2 * y) * w;
    T* r1 = r0 + w;
    for (index_t x = 0; x < w2; ++x) {
      const T s = pll[x], u = phl[x], v = plh[x], q = phh[x];
      r0[2 * x] = (s - u - v + q) * T(0.5);
      r0[2 * x + 1] = (s + u - v - q) * T(0.5);
      r1[2 * x] = (s - u + v - q) * T(0.5);
      r1[2 * x + 1] = (s + u + v + q) * T(0.5);
    }
  }
}

}  // namespace detail

// Single-level 2-D Haar analysis of an [...,H,W] tensor (H, W even).
template <class T>
SubbandSet<T> dwt2(const Tensor<T>& f, int level = 0) {
  index_t planes, h, w;
  detail::plane_geometry(f, planes, h, w);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("dwt2 requires even H and W, got " + shape_str(f.shape()) +
                     "; pad_to_even first");
  Shape sub_shape = f.shape();
  sub_shape[sub_shape.size() - 2] = h / 2;
  sub_shape[sub_shape.size() - 1] = w / 2;
  SubbandSet<T> out{Tensor<T>(sub_shape), Tensor<T>(sub_shape), Tensor<T>(sub_shape),
                    Tensor<T>(sub_shape), level};
  const index_t in_stride = h * w, out_stride = (h / 2) * (w / 2);
  for (index_t p = 0; p < planes; ++p)
    detail::haar_forward_plane(f.data() + p * in_stride, h, w, out.ll.data() + p * out_stride,
                               out.hl.data() + p * out_stride, out.lh.data() + p * out_stride,
                               out.hh.data() + p * out_stride);
  return out;
}

// Single-level synthesis; exact inverse of dwt2.
template <class T>
Tensor<T> idwt2(const SubbandSet<T>& bands) {
  require_same_shape(bands.ll, bands.hl, "idwt2");
  require_same_shape(bands.ll, bands.lh, "idwt2");
  require_same_shape(bands.ll, bands.hh, "idwt2");
  index_t planes, h2, w2;
  detail::plane_geometry(bands.ll, planes, h2, w2);
  Shape out_shape = bands.ll.shape();
  out_shape[out_shape.size() - 2] = 2 * h2;
  out_shape[out_shape.size() - 1] = 2 * w2;
  Tensor<T> out(out_shape);
  const index_t in_stride = h2 * w2, out_stride = 4 * h2 * w2;
  for (index_t p = 0; p < planes; ++p)
    detail::haar_inverse_plane(bands.ll.data() + p * in_stride, bands.hl.data() + p * in_stride,
                               bands.lh.data() + p * in_stride, bands.hh.data() + p * in_stride,
                               h2, w2, out.data() + p * out_stride);
  return out;
}

// Stack {HL, LH, HH} along channels, in that order. Input subbands
// [N,C,h,w] -> [N,3C,h,w] (or [C,h,w] -> [3C,h,w]).
template <class T>
Tensor<T> bundle_h(const SubbandSet<T>& bands) {
  const Tensor<T>* parts[3] = {&bands.hl, &bands.lh, &bands.hh};
  const Shape& s = bands.hl.shape();
  if (s.size() < 3) throw ShapeError("bundle_h needs a channel axis, got " + shape_str(s));
  const std::size_t c_axis = s.size() - 3;
  Shape out_shape = s;
  out_shape[c_axis] *= 3;
  Tensor<T> out(out_shape);
  index_t batch = 1;
  for (std::size_t i = 0; i < c_axis; ++i) batch *= s[i];
  const index_t block = s[c_axis] * s[s.size() - 2] * s[s.size() - 1];
  for (index_t n = 0; n < batch; ++n)
    for (int k = 0; k < 3; ++k) {
      const T* src = parts[k]->data() + n * block;
      T* dst = out.data() + (n * 3 + k) * block;
      for (index_t i = 0; i < block; ++i) dst[i] = src[i];
    }
  return out;
}

// Inverse of bundle_h: split an [N,3C,h,w] bundle back into (hl, lh, hh).
template <class T>
std::array<Tensor<T>, 3> unbundle_h(const Tensor<T>& hb) {
  const Shape& s = hb.shape();
  if (s.size() < 3) throw ShapeError("unbundle_h needs a channel axis, got " + shape_str(s));
  const std::size_t c_axis = s.size() - 3;
  if (s[c_axis] % 3 != 0)
    throw ShapeError("unbundle_h: channel count " + std::to_string(s[c_axis]) +
                     " not divisible by 3");
  Shape part_shape = s;
  part_shape[c_axis] /= 3;
  index_t batch = 1;
  for (std::size_t i = 0; i < c_axis; ++i) batch *= s[i];
  const index_t block = part_shape[c_axis] * s[s.size() - 2] * s[s.size() - 1];
  std::array<Tensor<T>, 3> parts{Tensor<T>(part_shape), Tensor<T>(part_shape),
                                 Tensor<T>(part_shape)};
  for (index_t n = 0; n < batch; ++n)
    for (int k = 0; k < 3; ++k) {
      const T* src = hb.data() + (n * 3 + k) * block;
      T* dst = parts[static_cast<std::size_t>(k)].data() + n * block;
      for (index_t i = 0; i < block; ++i) dst[i] = src[i];
    }
  return parts;
}

struct PadInfo {
  index_t orig_h = 0;
  index_t orig_w = 0;
};

// Reflect-pad right/bottom so H and W are multiples of 2^levels.
// Reflection excludes the edge sample (…, h-2, h-1 | h-2, h-3, …), which
// requires pad < dim; for 8-bit natural images and levels <= 3 that means
// H, W >= 8 effectively.
template <class T>
std::pair<Tensor<T>, PadInfo> pad_to_even(const Tensor<T>& f, int levels) {
  if (levels < 1) throw ValueError("pad_to_even: levels must be >= 1");
  index_t planes, h, w;
  detail::plane_geometry(f, planes, h, w);
  const index_t m = index_t(1) << levels;
  const index_t ph = (h % m == 0) ? h : (h / m + 1) * m;
  const index_t pw = (w % m == 0) ? w : (w / m + 1) * m;
  PadInfo info{h, w};
  if (ph == h && pw == w) return {f, info};
  if (ph - h >= h || pw - w >= w)
    throw ShapeError("pad_to_even: input " + shape_str(f.shape()) +
                     " too small to reflect-pad to a multiple of " + std::to_string(m));
  Shape out_shape = f.shape();
  out_shape[out_shape.size() - 2] = ph;
  out_shape[out_shape.size() - 1] = pw;
  Tensor<T> out(out_shape);
  for (index_t p = 0; p < planes; ++p) {
    const T* src = f.data() + p * h * w;
    T* dst = out.data() + p * ph * pw;
    for (index_t y = 0; y < ph; ++y) {
      const index_t sy = (y < h) ? y : 2 * h - 2 - y;
      for (index_t x = 0; x < pw; ++x) {
        const index_t sx = (x < w) ? x : 2 * w - 2 - x;
        dst[y * pw + x] = src[sy * w + sx];
      }
    }
  }
  return {out, info};
}

// Undo pad_to_even: crop back to the recorded original size.
template <class T>
Tensor<T> crop_to(const Tensor<T>& f, const PadInfo& info) {
  index_t planes, h, w;
  detail::plane_geometry(f, planes, h, w);
  if (info.orig_h > h || info.orig_w > w)
    throw ShapeError("crop_to: target larger than input");
  if (info.orig_h == h && info.orig_w == w) return f;
  Shape out_shape = f.shape();
  out_shape[out_shape.size() - 2] = info.orig_h;
  out_shape[out_shape.size() - 1] = info.orig_w;
  Tensor<T> out(out_shape);
  for (index_t p = 0; p < planes; ++p) {
    const T* src = f.data() + p * h * w;
    T* dst = out.data() + p * info.orig_h * info.orig_w;
    for (index_t y = 0; y < info.orig_h; ++y)
      for (index_t x = 0; x < info.orig_w; ++x) dst[y * info.orig_w + x] = src[y * w + x];
  }
  return out;
}

}  // namespace ignet
