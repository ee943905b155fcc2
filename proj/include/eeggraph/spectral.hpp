#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "eeggraph/fft.hpp"
#include "eeggraph/signal.hpp"

namespace eeggraph {

enum class Band : int {
  Delta = 0,
  Theta,
  Alpha,
  LowerBeta,
  HigherBeta,
  Gamma
};
constexpr int kNumBands = 6;

struct BandDefinition {
  Band band;
  const char* name;
  double low_hz;
  double high_hz;
};

inline const std::array<BandDefinition, kNumBands>& band_definitions() {
  static const std::array<BandDefinition, kNumBands> defs = {{
      {Band::Delta, "delta", 1.0, 4.0},
      {Band::Theta, "theta", 4.0, 7.5},
      {Band::Alpha, "alpha", 7.5, 13.0},
      {Band::LowerBeta, "lower_beta", 13.0, 16.0},
      {Band::HigherBeta, "higher_beta", 16.0, 30.0},
      {Band::Gamma, "gamma", 30.0, 40.0},
  }};
  return defs;
}

constexpr double kAnalysisLowHz = 1.0;
constexpr double kAnalysisHighHz = 40.0;

struct WelchParams {
  std::size_t nperseg = 500;  // 2 s at 250 Hz
  double overlap = 0.5;

  std::size_t hop() const {
    auto h = static_cast<std::size_t>(
        std::lround(static_cast<double>(nperseg) * (1.0 - overlap)));
    return std::max<std::size_t>(1, h);
  }
};

struct PsdEstimate {
  std::vector<double> freqs_hz;
  std::vector<double> power;  // uV^2/Hz, one-sided
};

struct FeatureMatrix {
  // channels x bands
  std::array<std::array<double, kNumBands>, kNumChannels> values{};

  double& at(int ch, int band) {
    return values[static_cast<std::size_t>(ch)][static_cast<std::size_t>(band)];
  }
  double at(int ch, int band) const {
    return values[static_cast<std::size_t>(ch)][static_cast<std::size_t>(band)];
  }
};

namespace detail {

inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

// Mean-detrended, Hann-windowed FFT of every Welch segment.
inline std::vector<std::vector<cdouble>> segment_spectra(
    const std::vector<double>& signal, const WelchParams& params) {
  const std::size_t n = params.nperseg;
  const std::size_t hop = params.hop();
  const std::size_t n_seg = (signal.size() - n) / hop + 1;
  const auto window = hann_window(n);

  std::vector<std::vector<cdouble>> spectra;
  spectra.reserve(n_seg);
  std::vector<double> seg(n);
  for (std::size_t s = 0; s < n_seg; ++s) {
    const std::size_t off = s * hop;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += signal[off + i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      seg[i] = (signal[off + i] - mean) * window[i];
    spectra.push_back(rfft(seg));
  }
  return spectra;
}

inline double window_power(std::size_t n) {
  const auto w = hann_window(n);
  double u = 0.0;
  for (double v : w) u += v * v;
  return u;
}

}  // namespace detail

// Welch PSD with density scaling: sum(power) * df approximates the signal
// variance.
inline PsdEstimate welch_psd(const std::vector<double>& signal,
                             double sample_rate_hz,
                             const WelchParams& params = {}) {
  if (sample_rate_hz <= 0.0) throw InvalidRate("sample rate must be > 0");
  if (signal.size() < params.nperseg)
    throw LengthMismatch("signal shorter than one Welch segment");

  const std::size_t n = params.nperseg;
  const auto spectra = detail::segment_spectra(signal, params);
  const double scale =
      1.0 / (sample_rate_hz * detail::window_power(n) *
             static_cast<double>(spectra.size()));

  const std::size_t n_bins = n / 2 + 1;
  PsdEstimate psd;
  psd.freqs_hz.resize(n_bins);
  psd.power.assign(n_bins, 0.0);
  for (std::size_t k = 0; k < n_bins; ++k)
    psd.freqs_hz[k] =
        static_cast<double>(k) * sample_rate_hz / static_cast<double>(n);
  for (const auto& spec : spectra)
    for (std::size_t k = 0; k < n_bins; ++k)
      psd.power[k] += std::norm(spec[k]) * scale;
  // One-sided: double everything except DC and (for even n) Nyquist.
  for (std::size_t k = 1; k + 1 < n_bins; ++k) psd.power[k] *= 2.0;
  if (n % 2 != 0 && n_bins > 1) psd.power[n_bins - 1] *= 2.0;
  return psd;
}

// Integral of the piecewise-linear PSD over [low_hz, high_hz]. Linear
// interpolation at the band edges makes adjacent bands add up exactly.
inline double band_power(const PsdEstimate& psd, const BandDefinition& band) {
  if (psd.freqs_hz.size() < 2 || psd.freqs_hz.size() != psd.power.size())
    throw LengthMismatch("malformed PSD");
  const double lo = band.low_hz, hi = band.high_hz;
  if (!(lo < hi) || lo < psd.freqs_hz.front() || hi > psd.freqs_hz.back())
    throw BandOutOfRange("band [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "] outside PSD support");
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < psd.freqs_hz.size(); ++i) {
    const double f0 = psd.freqs_hz[i], f1 = psd.freqs_hz[i + 1];
    const double a = std::max(f0, lo), b = std::min(f1, hi);
    if (a >= b) continue;
    const double slope = (psd.power[i + 1] - psd.power[i]) / (f1 - f0);
    const double va = psd.power[i] + slope * (a - f0);
    const double vb = psd.power[i] + slope * (b - f0);
    total += 0.5 * (va + vb) * (b - a);
  }
  return total;
}

inline FeatureMatrix extract_features(const Window& w) {
  FeatureMatrix features;
  for (int c = 0; c < kNumChannels; ++c) {
    const auto psd =
        welch_psd(w.samples[static_cast<std::size_t>(c)], kTargetRateHz);
    for (const auto& band : band_definitions())
      features.at(c, static_cast<int>(band.band)) = band_power(psd, band);
  }
  return features;
}

// Magnitude coherence |E[Sxy]| / sqrt(E[Sxx] E[Syy]) with the expectation
// taken over Welch segments, averaged across 1-40 Hz into one scalar.
inline double spectral_coherence(const std::vector<double>& x,
                                 const std::vector<double>& y,
                                 double sample_rate_hz = kTargetRateHz,
                                 const WelchParams& params = {}) {
  if (x.size() != y.size())
    throw LengthMismatch("coherence inputs differ in length");
  if (x.size() < params.nperseg)
    throw LengthMismatch("signal shorter than one Welch segment");
  const std::size_t n_seg = (x.size() - params.nperseg) / params.hop() + 1;
  if (n_seg < 4)
    throw LengthMismatch("coherence needs at least 4 Welch segments");

  const auto sx = detail::segment_spectra(x, params);
  const auto sy = detail::segment_spectra(y, params);
  const std::size_t n_bins = params.nperseg / 2 + 1;
  const double df =
      sample_rate_hz / static_cast<double>(params.nperseg);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < kAnalysisLowHz || f > kAnalysisHighHz) continue;
    cdouble sxy(0.0, 0.0);
    double sxx = 0.0, syy = 0.0;
    for (std::size_t s = 0; s < n_seg; ++s) {
      sxy += sx[s][k] * std::conj(sy[s][k]);
      sxx += std::norm(sx[s][k]);
      syy += std::norm(sy[s][k]);
    }
    const double denom = sxx * syy;
    if (denom <= 0.0) continue;  // no power at this bin in either signal
    sum += std::abs(sxy) / std::sqrt(denom);
    ++count;
  }
  if (count == 0)
    throw DegenerateSignal("auto-spectrum is zero at every retained frequency");
  return sum / static_cast<double>(count);
}

// All pairwise coherences of one window, computing each channel's segment
// spectra exactly once.
inline std::array<double, kNumChannels * kNumChannels> coherence_matrix(
    const Window& w, double sample_rate_hz = kTargetRateHz,
    const WelchParams& params = {}) {
  const std::size_t n_bins = params.nperseg / 2 + 1;
  const double df = sample_rate_hz / static_cast<double>(params.nperseg);
  std::array<std::vector<std::vector<cdouble>>, kNumChannels> spectra;
  for (int c = 0; c < kNumChannels; ++c) {
    const auto& chan = w.samples[static_cast<std::size_t>(c)];
    if (chan.size() < params.nperseg)
      throw LengthMismatch("window channel shorter than one Welch segment");
    if ((chan.size() - params.nperseg) / params.hop() + 1 < 4)
      throw LengthMismatch("coherence needs at least 4 Welch segments");
    spectra[static_cast<std::size_t>(c)] =
        detail::segment_spectra(chan, params);
  }
  const std::size_t n_seg = spectra[0].size();

  std::array<double, kNumChannels * kNumChannels> out{};
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = i + 1; j < kNumChannels; ++j) {
      const auto& si = spectra[static_cast<std::size_t>(i)];
      const auto& sj = spectra[static_cast<std::size_t>(j)];
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < n_bins; ++k) {
        const double f = static_cast<double>(k) * df;
        if (f < kAnalysisLowHz || f > kAnalysisHighHz) continue;
        cdouble sxy(0.0, 0.0);
        double sxx = 0.0, syy = 0.0;
        for (std::size_t s = 0; s < n_seg; ++s) {
          sxy += si[s][k] * std::conj(sj[s][k]);
          sxx += std::norm(si[s][k]);
          syy += std::norm(sj[s][k]);
        }
        const double denom = sxx * syy;
        if (denom <= 0.0) continue;
        sum += std::abs(sxy) / std::sqrt(denom);
        ++count;
      }
      if (count == 0)
        throw DegenerateSignal(
            "auto-spectrum is zero at every retained frequency");
      out[static_cast<std::size_t>(i * kNumChannels + j)] =
          out[static_cast<std::size_t>(j * kNumChannels + i)] =
              sum / static_cast<double>(count);
    }
  return out;
}

}  // namespace eeggraph
