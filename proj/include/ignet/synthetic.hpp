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

// Procedural piecewise-smooth test scenes: smooth shaded background,
// soft-edged overlapping shapes (ellipses, rotated boxes, strokes) and a
// little multi-scale texture. Statistically they behave like natural
// photographs where it matters here: spectral power decays as an inverse
// power of frequency, so the low Haar bands dominate the energy.
namespace synth {

struct Shape {
  int kind = 0;  // 0 ellipse, 1 box, 2 stroke
  double cx = 0, cy = 0, rx = 1, ry = 1, angle = 0;
  double value = 0.5;
  double edge = 2.0;  // edge softness in pixels
};

inline double shape_coverage(const Shape& s, double x, double y) {
  const double dx = x - s.cx, dy = y - s.cy;
  const double ca = std::cos(s.angle), sa = std::sin(s.angle);
  const double u = ca * dx + sa * dy;
  const double v = -sa * dx + ca * dy;
  double dist = 0;  // signed pixel distance to the boundary, negative inside
  switch (s.kind) {
    case 0: {
      const double r = std::sqrt((u * u) / (s.rx * s.rx) + (v * v) / (s.ry * s.ry));
      dist = (r - 1.0) * std::min(s.rx, s.ry);
      break;
    }
    case 1: {
      const double qx = std::abs(u) - s.rx;
      const double qy = std::abs(v) - s.ry;
      dist = std::max(qx, qy);
      break;
    }
    default: {
      const double t = std::clamp(u / s.rx, -1.0, 1.0);
      const double px = t * s.rx;
      dist = std::sqrt((u - px) * (u - px) + v * v) - s.ry;
      break;
    }
  }
  return 0.5 * (1.0 - std::tanh(dist / s.edge));
}

// Value-noise octave: random lattice, bilinear interpolation.
inline std::vector<double> value_noise(index_t h, index_t w, index_t cell, double amp,
                                       Rng& rng) {
  const index_t gh = h / cell + 2, gw = w / cell + 2;
  std::vector<double> grid(static_cast<std::size_t>(gh * gw));
  for (auto& g : grid) g = rng.uniform(-amp, amp);
  std::vector<double> out(static_cast<std::size_t>(h * w));
  for (index_t y = 0; y < h; ++y) {
    const double gy = static_cast<double>(y) / static_cast<double>(cell);
    const index_t iy = static_cast<index_t>(gy);
    const double fy = gy - static_cast<double>(iy);
    for (index_t x = 0; x < w; ++x) {
      const double gx = static_cast<double>(x) / static_cast<double>(cell);
      const index_t ix = static_cast<index_t>(gx);
      const double fx = gx - static_cast<double>(ix);
      const double a = grid[static_cast<std::size_t>(iy * gw + ix)];
      const double b = grid[static_cast<std::size_t>(iy * gw + ix + 1)];
      const double c = grid[static_cast<std::size_t>((iy + 1) * gw + ix)];
      const double d = grid[static_cast<std::size_t>((iy + 1) * gw + ix + 1)];
      out[static_cast<std::size_t>(y * w + x)] =
          (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    }
  }
  return out;
}

}  // namespace synth

inline TensorF make_scene(index_t h, index_t w, std::uint64_t seed) {
  if (h < 16 || w < 16) throw ValueError("make_scene: image too small");
  Rng rng = Rng::stream(seed, 0x5343454eULL /*"SCEN"*/);

  // Smooth background: tilted ramp plus two broad radial lobes.
  const double base = rng.uniform(0.35, 0.6);
  const double gx = rng.uniform(-0.25, 0.25), gy = rng.uniform(-0.25, 0.25);
  struct Lobe {
    double cx, cy, r, a;
  };
  Lobe lobes[2];
  for (auto& l : lobes)
    l = {rng.uniform(0, static_cast<double>(w)), rng.uniform(0, static_cast<double>(h)),
         rng.uniform(0.4, 0.9) * static_cast<double>(std::min(h, w)),
         rng.uniform(-0.18, 0.18)};

  const int n_shapes = 8 + static_cast<int>(rng.below(8));
  std::vector<synth::Shape> shapes;
  const double dim = static_cast<double>(std::min(h, w));
  for (int i = 0; i < n_shapes; ++i) {
    synth::Shape s;
    s.kind = static_cast<int>(rng.below(3));
    s.cx = rng.uniform(0, static_cast<double>(w));
    s.cy = rng.uniform(0, static_cast<double>(h));
    s.rx = rng.uniform(0.04, 0.3) * dim;
    s.ry = (s.kind == 2) ? rng.uniform(0.004, 0.02) * dim : rng.uniform(0.04, 0.3) * dim;
    s.angle = rng.uniform(0, 3.14159265358979323846);
    s.value = rng.uniform(0.08, 0.92);
    s.edge = rng.uniform(0.7, 2.5);
    shapes.push_back(s);
  }

  auto tex1 = synth::value_noise(h, w, std::max<index_t>(2, std::min(h, w) / 24), 0.030, rng);
  auto tex2 = synth::value_noise(h, w, std::max<index_t>(2, std::min(h, w) / 64), 0.015, rng);

  TensorF img({1, h, w});
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(w);
      const double fy = static_cast<double>(y) / static_cast<double>(h);
      double v = base + gx * (fx - 0.5) + gy * (fy - 0.5);
      for (const auto& l : lobes) {
        const double dx = static_cast<double>(x) - l.cx, dy = static_cast<double>(y) - l.cy;
        v += l.a * std::exp(-(dx * dx + dy * dy) / (2 * l.r * l.r));
      }
      for (const auto& s : shapes) {
        const double cov = synth::shape_coverage(s, static_cast<double>(x),
                                                 static_cast<double>(y));
        v = v * (1 - cov) + s.value * cov;
      }
      v += tex1[static_cast<std::size_t>(y * w + x)] + tex2[static_cast<std::size_t>(y * w + x)];
      img[y * w + x] = static_cast<float>(std::clamp(v, 0.02, 0.98));
    }
  return img;
}

// Writes `count` scenes into `dir` as scene_###.{png|pgm}.
inline std::vector<std::string> write_corpus(const std::string& dir, int count, index_t h,
                                             index_t w, std::uint64_t seed,
                                             const std::string& ext = ".png") {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%03d%s", i, ext.c_str());
    const std::string path = (std::filesystem::path(dir) / name).string();
    save_grayscale(path, make_scene(h, w, seed + static_cast<std::uint64_t>(i) * 7919ULL));
    paths.push_back(path);
  }
  return paths;
}

}  // namespace ignet
