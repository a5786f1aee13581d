#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "ignet/image.hpp"
#include "ignet/rng.hpp"
#include "ignet/tensor.hpp"

namespace ignet {

// AWGN parameters. Sigma is expressed on the 8-bit scale (15/25/50 in the
// usual benchmarks) and applied as sigma/255 on unit-scale pixels.
struct NoiseSpec {
  double sigma = 25.0;
  std::uint64_t seed = 0;
};

// noisy = clean + N(0, (sigma/255)^2), i.i.d. per pixel. Deliberately not
// clipped to [0,1]: clipping would skew the noise statistics; quantization
// clamps only at 8-bit export time.
template <class T>
Tensor<T> add_awgn(const Tensor<T>& clean, const NoiseSpec& spec) {
  if (spec.sigma < 0) throw ValueError("add_awgn: sigma must be >= 0");
  Tensor<T> noisy = clean;
  if (spec.sigma == 0) return noisy;
  Rng rng = Rng::stream(spec.seed, 0x4157474eULL /*"AWGN"*/);
  const double s = spec.sigma / 255.0;
  for (index_t i = 0; i < noisy.numel(); ++i)
    noisy[i] = static_cast<T>(static_cast<double>(noisy[i]) + s * rng.gaussian());
  return noisy;
}

inline TensorF add_awgn(const ImageSample& clean, const NoiseSpec& spec) {
  return add_awgn(clean.pixels, spec);
}

// Top-left anchors of a regular patch grid. The final row/column is pulled
// back to the image edge so every pixel is covered.
inline std::vector<index_t> patch_anchors(index_t extent, index_t patch, index_t stride) {
  std::vector<index_t> anchors;
  if (patch > extent) return anchors;
  for (index_t a = 0;; a += stride) {
    if (a + patch >= extent) {
      anchors.push_back(extent - patch);
      break;
    }
    anchors.push_back(a);
  }
  return anchors;
}

// Crop one [1,ph,pw] window from a [1,H,W] image.
inline TensorF crop_patch(const TensorF& image, index_t y0, index_t x0, index_t ph, index_t pw) {
  const index_t h = image.dim(1), w = image.dim(2);
  if (y0 < 0 || x0 < 0 || y0 + ph > h || x0 + pw > w)
    throw ShapeError("crop_patch: window out of bounds");
  TensorF out({1, ph, pw});
  for (index_t y = 0; y < ph; ++y)
    for (index_t x = 0; x < pw; ++x) out[y * pw + x] = image[(y0 + y) * w + (x0 + x)];
  return out;
}

// Grid crop with edge anchoring; patches returned row-major in grid order.
inline std::vector<TensorF> extract_patches(const TensorF& image, index_t patch,
                                            index_t stride) {
  if (image.ndim() != 3 || image.dim(0) != 1)
    throw ShapeError("extract_patches expects [1,H,W]");
  if (patch < 1 || stride < 1) throw ValueError("extract_patches: patch and stride must be >= 1");
  std::vector<TensorF> out;
  const auto ys = patch_anchors(image.dim(1), patch, stride);
  const auto xs = patch_anchors(image.dim(2), patch, stride);
  for (index_t y : ys)
    for (index_t x : xs) out.push_back(crop_patch(image, y, x, patch, patch));
  return out;
}

namespace detail {

// Catmull-Rom cubic kernel (a = -0.5), the common bicubic choice.
inline double cubic_weight(double t) {
  const double a = -0.5;
  const double x = std::abs(t);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

}  // namespace detail

// Bicubic resize of a [1,H,W] image with clamped borders.
inline TensorF resize_bicubic(const TensorF& image, index_t out_h, index_t out_w) {
  if (image.ndim() != 3 || image.dim(0) != 1)
    throw ShapeError("resize_bicubic expects [1,H,W]");
  if (out_h < 1 || out_w < 1) throw ValueError("resize_bicubic: empty output");
  const index_t h = image.dim(1), w = image.dim(2);
  const double sy = static_cast<double>(h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(w) / static_cast<double>(out_w);
  TensorF out({1, out_h, out_w});
  for (index_t oy = 0; oy < out_h; ++oy) {
    const double cy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    const index_t iy = static_cast<index_t>(std::floor(cy));
    const double fy = cy - static_cast<double>(iy);
    for (index_t ox = 0; ox < out_w; ++ox) {
      const double cx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      const index_t ix = static_cast<index_t>(std::floor(cx));
      const double fx = cx - static_cast<double>(ix);
      double acc = 0, wsum = 0;
      for (int dy = -1; dy <= 2; ++dy) {
        const index_t yy = std::clamp<index_t>(iy + dy, 0, h - 1);
        const double wy = detail::cubic_weight(static_cast<double>(dy) - fy);
        for (int dx = -1; dx <= 2; ++dx) {
          const index_t xx = std::clamp<index_t>(ix + dx, 0, w - 1);
          const double wx = detail::cubic_weight(static_cast<double>(dx) - fx);
          acc += wy * wx * static_cast<double>(image[yy * w + xx]);
          wsum += wy * wx;
        }
      }
      out[oy * out_w + ox] = static_cast<float>(acc / wsum);
    }
  }
  return out;
}

// One of the 8 dihedral transforms of a square [1,p,p] patch.
// code = flip*4 + rot, rot counterclockwise quarter turns.
inline TensorF dihedral(const TensorF& patch, int code) {
  if (patch.ndim() != 3 || patch.dim(1) != patch.dim(2))
    throw ShapeError("dihedral expects a square [1,p,p] patch");
  if (code < 0 || code > 7) throw ValueError("dihedral: code must be 0..7");
  const index_t p = patch.dim(1);
  const bool flip = code >= 4;
  const int rot = code % 4;
  TensorF out({1, p, p});
  for (index_t y = 0; y < p; ++y)
    for (index_t x = 0; x < p; ++x) {
      index_t sx = flip ? (p - 1 - x) : x;
      index_t sy = y;
      for (int r = 0; r < rot; ++r) {
        const index_t ny = p - 1 - sx;
        sx = sy;
        sy = ny;
      }
      out[y * p + x] = patch[sy * p + sx];
    }
  return out;
}

inline constexpr double kRescaleChoices[4] = {1.0, 0.9, 0.8, 0.7};

// Scale drawn for the rescale augmentation; the loader extracts a window of
// round(patch/scale) source pixels so that scale < 1 is a real downscale.
inline double draw_rescale(Rng& rng) { return kRescaleChoices[rng.below(4)]; }

inline index_t rescale_window(index_t patch, double scale) {
  return static_cast<index_t>(std::lround(static_cast<double>(patch) / scale));
}

// Training augmentation: bicubic rescale of the source window down to the
// patch size (identity when the window already matches), then a uniformly
// drawn dihedral transform.
inline TensorF augment(const TensorF& window, Rng& rng, index_t out_size) {
  if (window.ndim() != 3 || window.dim(1) != window.dim(2))
    throw ShapeError("augment expects a square window");
  if (window.dim(1) < out_size) throw ShapeError("augment: window smaller than output size");
  TensorF patch =
      (window.dim(1) == out_size) ? window : resize_bicubic(window, out_size, out_size);
  const int code = static_cast<int>(rng.below(8));
  return dihedral(patch, code);
}

// ------------------------------------------------------------------ datasets

// Minimal glob: '*' and '?' on the filename only.
inline bool glob_match(const std::string& pattern, const std::string& name) {
  std::size_t p = 0, n = 0, star = std::string::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

// Recursive scan for .pgm/.png files, sorted by path for determinism.
inline std::vector<std::string> list_images(const std::string& dir,
                                            const std::string& pattern = "*") {
  namespace fs = std::filesystem;
  if (!fs::exists(dir) || !fs::is_directory(dir))
    throw IoError("dataset directory '" + dir + "' does not exist");
  std::vector<std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (ext != ".pgm" && ext != ".png") continue;
    if (!glob_match(pattern, entry.path().filename().string())) continue;
    out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Deterministic 10% held-out split keyed by the file name only, so the
// split survives moving the dataset directory.
inline bool is_heldout(const std::string& path) {
  const std::string name = std::filesystem::path(path).filename().string();
  return fnv1a64(name) % 10 == 0;
}

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> heldout;
};

inline DatasetSplit split_dataset(const std::vector<std::string>& paths) {
  DatasetSplit split;
  for (const auto& p : paths)
    (is_heldout(p) ? split.heldout : split.train).push_back(p);
  return split;
}

}  // namespace ignet
