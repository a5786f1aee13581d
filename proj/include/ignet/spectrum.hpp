#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "ignet/metrics.hpp"
#include "ignet/tensor.hpp"
#include "ignet/wavelet.hpp"

namespace ignet {

// Low-pass PSNR sweep plus a radially averaged power spectrum, the two
// frequency-prior diagnostics. Fractions are strictly increasing in (0,1],
// measured so that fraction 1 keeps the entire spectrum (corners included).
struct SpectrumCurve {
  std::vector<double> fractions;
  std::vector<double> psnr_db;
  std::vector<double> radial_freq;   // normalized bin centers in (0,1]
  std::vector<double> radial_power;  // mean |DFT|^2 per bin, DC excluded

  std::string curve_text() const {
    std::ostringstream os;
    os << "# fraction  psnr_db\n";
    for (std::size_t i = 0; i < fractions.size(); ++i)
      os << fractions[i] << " " << psnr_db[i] << "\n";
    return os.str();
  }
  std::string radial_text() const {
    std::ostringstream os;
    os << "# freq_norm  power\n";
    for (std::size_t i = 0; i < radial_freq.size(); ++i)
      os << radial_freq[i] << " " << radial_power[i] << "\n";
    return os.str();
  }
};

namespace detail {

// FFTW double-precision forward/inverse 2-D DFT of a single plane.
class Dft2 {
 public:
  Dft2(index_t h, index_t w) : h_(h), w_(w) {
    buf_ = fftw_alloc_complex(static_cast<std::size_t>(h * w));
    fwd_ = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf_, buf_, FFTW_FORWARD,
                            FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf_, buf_, FFTW_BACKWARD,
                            FFTW_ESTIMATE);
  }
  ~Dft2() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
  }
  Dft2(const Dft2&) = delete;
  Dft2& operator=(const Dft2&) = delete;

  template <class T>
  std::vector<std::complex<double>> forward(const Tensor<T>& img) {
    load(img);
    fftw_execute(fwd_);
    return dump();
  }

  // Inverse with 1/(hw) normalization; returns the real part.
  std::vector<double> inverse(const std::vector<std::complex<double>>& spec) {
    const index_t n = h_ * w_;
    for (index_t i = 0; i < n; ++i) {
      buf_[i][0] = spec[static_cast<std::size_t>(i)].real();
      buf_[i][1] = spec[static_cast<std::size_t>(i)].imag();
    }
    fftw_execute(inv_);
    std::vector<double> out(static_cast<std::size_t>(n));
    const double norm = 1.0 / static_cast<double>(n);
    for (index_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = buf_[i][0] * norm;
    return out;
  }

  index_t h() const { return h_; }
  index_t w() const { return w_; }

 private:
  template <class T>
  void load(const Tensor<T>& img) {
    for (index_t i = 0; i < h_ * w_; ++i) {
      buf_[i][0] = static_cast<double>(img[i]);
      buf_[i][1] = 0.0;
    }
  }
  std::vector<std::complex<double>> dump() const {
    std::vector<std::complex<double>> out(static_cast<std::size_t>(h_ * w_));
    for (index_t i = 0; i < h_ * w_; ++i)
      out[static_cast<std::size_t>(i)] = {buf_[i][0], buf_[i][1]};
    return out;
  }

  index_t h_, w_;
  fftw_complex* buf_;
  fftw_plan fwd_, inv_;
};

// Normalized radial frequency in [0,1]: 0 at DC, 1 at the spectrum corner
// (so the per-axis Nyquist sits at 1/sqrt(2)). Fraction-1 masks therefore
// keep everything.
inline double radial_frequency(index_t y, index_t x, index_t h, index_t w) {
  const index_t fy = (y <= h / 2) ? y : y - h;  // signed DFT frequency
  const index_t fx = (x <= w / 2) ? x : x - w;
  const double ny = static_cast<double>(fy) / (static_cast<double>(h) / 2.0);
  const double nx = static_cast<double>(fx) / (static_cast<double>(w) / 2.0);
  return std::sqrt((ny * ny + nx * nx) / 2.0);
}

template <class T>
const Tensor<T> as_plane(const Tensor<T>& t) {
  if (t.ndim() < 2) throw ShapeError("expected an image tensor");
  const index_t h = t.dim(t.ndim() - 2), w = t.dim(t.ndim() - 1);
  if (t.numel() != h * w) throw ShapeError("expected a single-plane image");
  return t.reshaped({h, w});
}

}  // namespace detail

// Ideal circular low-pass at each cutoff fraction, applied to both images in
// the DFT domain; PSNR is computed between the two band-limited results.
template <class T>
SpectrumCurve lowpass_psnr_curve(const Tensor<T>& clean, const Tensor<T>& noisy,
                                 const std::vector<double>& fractions) {
  require_same_shape(clean, noisy, "lowpass_psnr_curve");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (fractions[i] <= 0 || fractions[i] > 1)
      throw ValueError("lowpass_psnr_curve: fractions must lie in (0,1]");
    if (i > 0 && fractions[i] <= fractions[i - 1])
      throw ValueError("lowpass_psnr_curve: fractions must be strictly increasing");
  }
  const Tensor<T> a = detail::as_plane(clean), b = detail::as_plane(noisy);
  const index_t h = a.dim(0), w = a.dim(1);
  detail::Dft2 dft(h, w);
  const auto sa = dft.forward(a);
  const auto sb = dft.forward(b);

  SpectrumCurve curve;
  curve.fractions = fractions;
  std::vector<std::complex<double>> ma(sa.size()), mb(sb.size());
  for (double f : fractions) {
    for (index_t y = 0; y < h; ++y)
      for (index_t x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y * w + x);
        const bool keep = detail::radial_frequency(y, x, h, w) <= f;
        ma[i] = keep ? sa[i] : 0.0;
        mb[i] = keep ? sb[i] : 0.0;
      }
    const auto ra = dft.inverse(ma);
    const auto rb = dft.inverse(mb);
    TensorD ta({h, w}, std::vector<double>(ra.begin(), ra.end()));
    TensorD tb({h, w}, std::vector<double>(rb.begin(), rb.end()));
    curve.psnr_db.push_back(psnr(ta, tb));
  }
  return curve;
}

// Radially averaged |DFT|^2 in n_bins equal-width bins of normalized
// frequency, DC excluded.
template <class T>
SpectrumCurve radial_power_spectrum(const Tensor<T>& image, int n_bins) {
  if (n_bins < 4) throw ValueError("radial_power_spectrum: n_bins must be >= 4");
  const Tensor<T> a = detail::as_plane(image);
  const index_t h = a.dim(0), w = a.dim(1);
  detail::Dft2 dft(h, w);
  const auto spec = dft.forward(a);
  std::vector<double> power(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<index_t> count(static_cast<std::size_t>(n_bins), 0);
  for (index_t y = 0; y < h; ++y)
    for (index_t x = 0; x < w; ++x) {
      if (x == 0 && y == 0) continue;  // DC
      const double r = detail::radial_frequency(y, x, h, w);
      int bin = static_cast<int>(r * n_bins);
      if (bin >= n_bins) bin = n_bins - 1;
      const auto& c = spec[static_cast<std::size_t>(y * w + x)];
      power[static_cast<std::size_t>(bin)] += std::norm(c);
      count[static_cast<std::size_t>(bin)] += 1;
    }
  SpectrumCurve out;
  for (int i = 0; i < n_bins; ++i) {
    if (count[static_cast<std::size_t>(i)] == 0) continue;
    out.radial_freq.push_back((static_cast<double>(i) + 0.5) / n_bins);
    out.radial_power.push_back(power[static_cast<std::size_t>(i)] /
                               static_cast<double>(count[static_cast<std::size_t>(i)]));
  }
  return out;
}

// Least-squares slope of log10(power) against log10(freq); zero-power bins
// are skipped. Natural images land well below -1.
inline double log_log_slope(const SpectrumCurve& s) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  index_t n = 0;
  for (std::size_t i = 0; i < s.radial_freq.size(); ++i) {
    if (s.radial_power[i] <= 0) continue;
    const double x = std::log10(s.radial_freq[i]);
    const double y = std::log10(s.radial_power[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw ValueError("log_log_slope: not enough nonzero bins");
  const double d = static_cast<double>(n) * sxx - sx * sx;
  return (static_cast<double>(n) * sxy - sx * sy) / d;
}

namespace detail {

// Subband PSNR on the subband's own value scale: peak^2 is the larger mean
// square of the two inputs. A fixed unit peak would hide the frequency
// prior entirely (white noise spreads evenly over an orthonormal basis, so
// every band would report the same number).
template <class T>
double subband_scale_psnr(const Tensor<T>& a, const Tensor<T>& b) {
  const index_t n = a.numel();
  double mse = 0, ea = 0, eb = 0;
  for (index_t i = 0; i < n; ++i) {
    const double va = static_cast<double>(a[i]), vb = static_cast<double>(b[i]);
    const double d = va - vb;
    mse += d * d;
    ea += va * va;
    eb += vb * vb;
  }
  mse /= static_cast<double>(n);
  const double peak_sq = std::max(ea, eb) / static_cast<double>(n);
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak_sq / mse);
}

}  // namespace detail

// PSNR between the Haar subbands of the two images, on subband value scale,
// ordered {LL, HL, LH, HH}.
template <class T>
std::array<double, 4> subband_psnr(const Tensor<T>& clean, const Tensor<T>& noisy) {
  require_same_shape(clean, noisy, "subband_psnr");
  const auto bc = dwt2(detail::as_plane(clean));
  const auto bn = dwt2(detail::as_plane(noisy));
  return {detail::subband_scale_psnr(bc.ll, bn.ll), detail::subband_scale_psnr(bc.hl, bn.hl),
          detail::subband_scale_psnr(bc.lh, bn.lh), detail::subband_scale_psnr(bc.hh, bn.hh)};
}

}  // namespace ignet
