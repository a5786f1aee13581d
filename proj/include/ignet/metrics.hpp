#pragma once

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ignet/tensor.hpp"

namespace ignet {

// PSNR in dB on unit-scale inputs: 10*log10(1/MSE). For /255 images this is
// identical to the usual 255-scale definition. Identical inputs report the
// +infinity sentinel.
template <class T>
double psnr(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "psnr");
  if (a.numel() == 0) throw ShapeError("psnr of empty tensor");
  double mse = 0;
  for (index_t i = 0; i < a.numel(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.numel());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

namespace detail {

inline std::vector<double> gaussian_window(int radius, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    w[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Separable valid-region Gaussian filter of a [h,w] plane stored in doubles.
inline std::vector<double> gauss_filter_valid(const std::vector<double>& img, index_t h,
                                              index_t w, const std::vector<double>& win) {
  const int r = static_cast<int>(win.size() / 2);
  const index_t oh = h - 2 * r, ow = w - 2 * r;
  std::vector<double> tmp(static_cast<std::size_t>(h * ow));
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < static_cast<int>(win.size()); ++k)
        acc += win[static_cast<std::size_t>(k)] * img[static_cast<std::size_t>(y * w + x + k)];
      tmp[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh * ow));
  for (index_t y = 0; y < oh; ++y)
    for (index_t x = 0; x < ow; ++x) {
      double acc = 0;
      for (int k = 0; k < static_cast<int>(win.size()); ++k)
        acc += win[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>((y + k) * ow + x)];
      out[static_cast<std::size_t>(y * ow + x)] = acc;
    }
  return out;
}

}  // namespace detail

// Mean local SSIM with the standard Wang et al. setup: 11x11 Gaussian
// window (sigma 1.5), K1=0.01, K2=0.03, dynamic range 1.0, statistics taken
// over the valid (fully windowed) region.
template <class T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "ssim");
  if (a.ndim() < 2) throw ShapeError("ssim expects an image tensor");
  const index_t h = a.dim(a.ndim() - 2), w = a.dim(a.ndim() - 1);
  if (a.numel() != h * w) throw ShapeError("ssim expects a single-plane image");
  if (h < 11 || w < 11)
    throw ShapeError("ssim needs images of at least 11x11, got " + shape_str(a.shape()));

  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const auto win = detail::gaussian_window(5, 1.5);
  std::vector<double> xa(a.data(), a.data() + a.numel());
  std::vector<double> xb(b.data(), b.data() + b.numel());
  std::vector<double> xaa(xa.size()), xbb(xa.size()), xab(xa.size());
  for (std::size_t i = 0; i < xa.size(); ++i) {
    xaa[i] = xa[i] * xa[i];
    xbb[i] = xb[i] * xb[i];
    xab[i] = xa[i] * xb[i];
  }
  const auto mu_a = detail::gauss_filter_valid(xa, h, w, win);
  const auto mu_b = detail::gauss_filter_valid(xb, h, w, win);
  const auto s_aa = detail::gauss_filter_valid(xaa, h, w, win);
  const auto s_bb = detail::gauss_filter_valid(xbb, h, w, win);
  const auto s_ab = detail::gauss_filter_valid(xab, h, w, win);
  double acc = 0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double va = s_aa[i] - mu_a[i] * mu_a[i];
    const double vb = s_bb[i] - mu_b[i] * mu_b[i];
    const double vab = s_ab[i] - mu_a[i] * mu_b[i];
    acc += ((2 * mu_a[i] * mu_b[i] + c1) * (2 * vab + c2)) /
           ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
  }
  return acc / static_cast<double>(mu_a.size());
}

// Per-image metric rows plus aggregates for one evaluation pass.
struct EvalReport {
  struct Row {
    std::string name;
    double psnr_db = 0;
    double ssim_v = 0;
    double noisy_psnr_db = 0;
  };
  std::vector<Row> rows;
  double sigma = 0;
  std::string model_id;

  double mean_psnr() const {
    double s = 0;
    for (const auto& r : rows) s += r.psnr_db;
    return rows.empty() ? 0 : s / static_cast<double>(rows.size());
  }
  double mean_ssim() const {
    double s = 0;
    for (const auto& r : rows) s += r.ssim_v;
    return rows.empty() ? 0 : s / static_cast<double>(rows.size());
  }
  double mean_noisy_psnr() const {
    double s = 0;
    for (const auto& r : rows) s += r.noisy_psnr_db;
    return rows.empty() ? 0 : s / static_cast<double>(rows.size());
  }

  // Human-readable table.
  std::string table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    os << "model: " << model_id << "  sigma: " << sigma << "\n";
    os << std::left << std::setw(28) << "image" << std::right << std::setw(12) << "noisy dB"
       << std::setw(12) << "psnr dB" << std::setw(10) << "ssim" << "\n";
    for (const auto& r : rows)
      os << std::left << std::setw(28) << r.name << std::right << std::setw(12)
         << r.noisy_psnr_db << std::setw(12) << r.psnr_db << std::setw(10) << r.ssim_v << "\n";
    os << std::left << std::setw(28) << "mean" << std::right << std::setw(12)
       << mean_noisy_psnr() << std::setw(12) << mean_psnr() << std::setw(10) << mean_ssim()
       << "\n";
    return os.str();
  }

  // Machine-readable: one key=value record per image plus an aggregate line.
  std::string records() const {
    std::ostringstream os;
    os << std::setprecision(10);
    for (const auto& r : rows)
      os << "image=" << r.name << " noisy_psnr=" << r.noisy_psnr_db << " psnr=" << r.psnr_db
         << " ssim=" << r.ssim_v << "\n";
    os << "aggregate count=" << rows.size() << " sigma=" << sigma
       << " mean_noisy_psnr=" << mean_noisy_psnr() << " mean_psnr=" << mean_psnr()
       << " mean_ssim=" << mean_ssim() << "\n";
    return os.str();
  }
};

}  // namespace ignet
