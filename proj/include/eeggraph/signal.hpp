#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "eeggraph/common.hpp"

namespace eeggraph {

constexpr int kNumChannels = 8;
constexpr double kTargetRateHz = 250.0;
constexpr double kWindowSeconds = 10.0;
constexpr int kWindowSamples = 2500;

// Bipolar derivation order is fixed; everything downstream (features,
// adjacency, electrode geometry) indexes channels in this order.
inline const std::array<std::pair<const char*, const char*>, kNumChannels>&
bipolar_pairs() {
  static const std::array<std::pair<const char*, const char*>, kNumChannels>
      pairs = {{{"F7", "F3"},
                {"F8", "F4"},
                {"T7", "C3"},
                {"T8", "C4"},
                {"P7", "P3"},
                {"P8", "P4"},
                {"O1", "P3"},
                {"O2", "P4"}}};
  return pairs;
}

inline std::string bipolar_name(int k) {
  const auto& p = bipolar_pairs()[static_cast<std::size_t>(k)];
  return std::string(p.first) + "-" + p.second;
}

struct Recording {
  std::string subject_id;
  Label label = Label::Healthy;
  double sample_rate_hz = 0.0;
  std::vector<std::pair<std::string, std::vector<double>>> channels;  // uV

  std::size_t sample_count() const {
    return channels.empty() ? 0 : channels.front().second.size();
  }
  double duration_s() const {
    return sample_rate_hz > 0.0
               ? static_cast<double>(sample_count()) / sample_rate_hz
               : 0.0;
  }
  void validate() const {
    if (sample_rate_hz <= 0.0) throw InvalidRate("sample_rate_hz must be > 0");
    for (const auto& [name, data] : channels)
      if (data.size() != sample_count())
        throw LengthMismatch("channel " + name + " has mismatched length");
  }
};

struct MontageRecording {
  std::string subject_id;
  Label label = Label::Healthy;
  double sample_rate_hz = 0.0;
  std::array<std::vector<double>, kNumChannels> channels;

  std::size_t sample_count() const { return channels.front().size(); }
};

struct Window {
  std::string subject_id;
  Label label = Label::Healthy;
  std::size_t window_index = 0;
  std::array<std::vector<double>, kNumChannels> samples;  // 8 x 2500
};

// ---------------------------------------------------------------------------
// Bipolar montage
// ---------------------------------------------------------------------------

inline MontageRecording derive_bipolar_montage(
    const Recording& raw,
    const std::array<std::pair<const char*, const char*>, kNumChannels>&
        pair_map = bipolar_pairs()) {
  raw.validate();
  auto find = [&](const std::string& name) -> const std::vector<double>& {
    for (const auto& [ch, data] : raw.channels)
      if (ch == name) return data;
    throw MissingChannel(name);
  };
  MontageRecording out;
  out.subject_id = raw.subject_id;
  out.label = raw.label;
  out.sample_rate_hz = raw.sample_rate_hz;
  for (int k = 0; k < kNumChannels; ++k) {
    const auto& anode = find(pair_map[static_cast<std::size_t>(k)].first);
    const auto& cathode = find(pair_map[static_cast<std::size_t>(k)].second);
    auto& dst = out.channels[static_cast<std::size_t>(k)];
    dst.resize(anode.size());
    for (std::size_t i = 0; i < anode.size(); ++i)
      dst[i] = anode[i] - cathode[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling: Kaiser-windowed sinc interpolation with the anti-aliasing
// cutoff at 0.9x the Nyquist of the lower rate. Taps are renormalized per
// output sample so a constant signal passes through exactly.
// ---------------------------------------------------------------------------

namespace detail {

inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double x2 = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= x2 / (static_cast<double>(k) * k);
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::fabs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace detail

namespace detail {

// Kaiser-windowed sinc tap at offset tau (input samples) for cutoff nu
// (cycles per input sample) and half-width `half`.
inline double sinc_tap(double tau, double nu, double half, double beta,
                       double i0_beta) {
  const double frac = tau / half;
  const double kw =
      bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - frac * frac))) / i0_beta;
  return 2.0 * nu * sinc(2.0 * nu * tau) * kw;
}

// Smallest q <= limit with from/to == p/q to double precision; 0 if none.
inline std::size_t rational_phase_count(double ratio, std::size_t limit) {
  for (std::size_t q = 1; q <= limit; ++q) {
    const double p = ratio * static_cast<double>(q);
    if (std::fabs(p - std::round(p)) < 1e-9 * std::max(1.0, p))
      return q;
  }
  return 0;
}

}  // namespace detail

inline std::vector<double> resample(const std::vector<double>& signal,
                                    double from_hz, double to_hz = kTargetRateHz) {
  if (from_hz <= 0.0 || to_hz <= 0.0)
    throw InvalidRate("sample rates must be positive");
  const std::size_t out_len = static_cast<std::size_t>(
      std::llround(static_cast<double>(signal.size()) * to_hz / from_hz));
  if (signal.empty() || out_len == 0) return {};
  if (from_hz == to_hz) return signal;

  // Cutoff in cycles per *input* sample.
  const double nu = 0.45 * std::min(1.0, to_hz / from_hz);
  const double lobes = 10.0;
  const double half = lobes / (2.0 * nu);
  const double beta = 8.0;  // Kaiser shape, ~80 dB stopband
  const double i0_beta = detail::bessel_i0(beta);
  const double step = from_hz / to_hz;  // input samples per output sample
  const long width = static_cast<long>(std::ceil(half));

  // Output times fall on q distinct fractional phases for rational rate
  // ratios; precompute one normalized kernel per phase and keep the sample
  // index arithmetic in integers.
  const std::size_t q = detail::rational_phase_count(step, 4096);
  std::vector<double> out(out_len);
  const long n_in = static_cast<long>(signal.size());

  if (q > 0) {
    const auto p = static_cast<unsigned long long>(
        std::llround(step * static_cast<double>(q)));
    std::vector<std::vector<double>> kernels(q);
    for (std::size_t phase = 0; phase < q; ++phase) {
      const double frac =
          static_cast<double>(phase) / static_cast<double>(q);
      auto& taps = kernels[phase];
      taps.resize(static_cast<std::size_t>(2 * width + 1));
      double wsum = 0.0;
      for (long j = -width; j <= width; ++j) {
        const double tau = static_cast<double>(j) - frac;
        const double w = std::fabs(tau) <= half
                             ? detail::sinc_tap(tau, nu, half, beta, i0_beta)
                             : 0.0;
        taps[static_cast<std::size_t>(j + width)] = w;
        wsum += w;
      }
      for (auto& w : taps) w /= wsum;
    }
    for (std::size_t n = 0; n < out_len; ++n) {
      const unsigned long long np = static_cast<unsigned long long>(n) * p;
      const long base = static_cast<long>(np / q);
      const auto& taps = kernels[static_cast<std::size_t>(np % q)];
      const long k_lo = base - width, k_hi = base + width;
      double acc = 0.0;
      if (k_lo >= 0 && k_hi < n_in) {
        // Interior fast path: the kernel sums to 1 by construction.
        const double* x = &signal[static_cast<std::size_t>(k_lo)];
        for (std::size_t j = 0; j < taps.size(); ++j) acc += x[j] * taps[j];
        out[n] = acc;
      } else {
        double wsum = 0.0;
        for (long k = std::max<long>(0, k_lo);
             k <= std::min<long>(n_in - 1, k_hi); ++k) {
          const double w = taps[static_cast<std::size_t>(k - k_lo)];
          acc += signal[static_cast<std::size_t>(k)] * w;
          wsum += w;
        }
        out[n] = wsum != 0.0 ? acc / wsum : 0.0;
      }
    }
    return out;
  }

  // Irrational ratio: evaluate the kernel per output sample.
  for (std::size_t n = 0; n < out_len; ++n) {
    const double t = static_cast<double>(n) * step;
    const long k_lo = std::max<long>(0, static_cast<long>(std::ceil(t - half)));
    const long k_hi =
        std::min<long>(n_in - 1, static_cast<long>(std::floor(t + half)));
    double acc = 0.0, wsum = 0.0;
    for (long k = k_lo; k <= k_hi; ++k) {
      const double w = detail::sinc_tap(static_cast<double>(k) - t, nu, half,
                                        beta, i0_beta);
      acc += signal[static_cast<std::size_t>(k)] * w;
      wsum += w;
    }
    out[n] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// IIR filters, applied forward-backward for zero phase.
// ---------------------------------------------------------------------------

namespace detail {

struct Biquad {
  double b0, b1, b2, a1, a2;

  // Direct form II transposed.
  void apply(std::vector<double>& x) const {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : x) {
      const double y = b0 * v + s1;
      s1 = b1 * v - a1 * y + s2;
      s2 = b2 * v - a2 * y;
      v = y;
    }
  }
};

inline Biquad biquad_highpass(double fc, double fs, double q) {
  const double w0 = 2.0 * M_PI * fc / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0,
          -2.0 * cw / a0, (1.0 - alpha) / a0};
}

inline Biquad biquad_notch(double f0, double fs, double q) {
  const double w0 = 2.0 * M_PI * f0 / fs;
  const double cw = std::cos(w0), sw = std::sin(w0);
  const double alpha = sw / (2.0 * q);
  const double a0 = 1.0 + alpha;
  return {1.0 / a0, -2.0 * cw / a0, 1.0 / a0, -2.0 * cw / a0,
          (1.0 - alpha) / a0};
}

// Forward-backward filtering over an odd-reflection extension of the signal.
inline std::vector<double> filtfilt(const std::vector<double>& x,
                                    const std::vector<Biquad>& sections,
                                    std::size_t padlen) {
  if (x.empty()) return {};
  padlen = std::min(padlen, x.size() - 1);
  std::vector<double> ext;
  ext.reserve(x.size() + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i)
    ext.push_back(2.0 * x.front() - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i)
    ext.push_back(2.0 * x.back() - x[x.size() - 1 - i]);

  for (const auto& s : sections) s.apply(ext);
  std::reverse(ext.begin(), ext.end());
  for (const auto& s : sections) s.apply(ext);
  std::reverse(ext.begin(), ext.end());

  return std::vector<double>(ext.begin() + static_cast<long>(padlen),
                             ext.begin() + static_cast<long>(padlen + x.size()));
}

}  // namespace detail

// 4th-order Butterworth highpass (two biquad sections), zero phase.
inline std::vector<double> highpass_filter(const std::vector<double>& signal,
                                           double sample_rate_hz,
                                           double cutoff_hz = 1.0) {
  if (!(cutoff_hz > 0.0) || cutoff_hz >= sample_rate_hz / 2.0)
    throw InvalidCutoff("highpass cutoff must be in (0, fs/2)");
  // Butterworth pole-pair Q factors for order 4.
  const double q1 = 1.0 / (2.0 * std::cos(M_PI / 8.0));
  const double q2 = 1.0 / (2.0 * std::cos(3.0 * M_PI / 8.0));
  const std::vector<detail::Biquad> sections = {
      detail::biquad_highpass(cutoff_hz, sample_rate_hz, q1),
      detail::biquad_highpass(cutoff_hz, sample_rate_hz, q2)};
  const auto padlen =
      static_cast<std::size_t>(std::lround(3.0 * sample_rate_hz / cutoff_hz));
  return detail::filtfilt(signal, sections, padlen);
}

// Second-order IIR notch (Q = 30), zero phase.
inline std::vector<double> notch_filter(const std::vector<double>& signal,
                                        double sample_rate_hz,
                                        double notch_hz = 50.0,
                                        double q = 30.0) {
  if (!(notch_hz > 0.0) || notch_hz >= sample_rate_hz / 2.0)
    throw InvalidCutoff("notch frequency must be in (0, fs/2)");
  const std::vector<detail::Biquad> sections = {
      detail::biquad_notch(notch_hz, sample_rate_hz, q)};
  // Ring-down of the notch resonator sets the edge transient length.
  const auto padlen = static_cast<std::size_t>(
      std::lround(3.0 * sample_rate_hz * q / (M_PI * notch_hz)));
  return detail::filtfilt(signal, sections, padlen);
}

// ---------------------------------------------------------------------------
// Windowing
// ---------------------------------------------------------------------------

inline std::vector<Window> segment_windows(const MontageRecording& rec,
                                           double window_s = kWindowSeconds,
                                           std::size_t start_index = 0) {
  if (rec.sample_rate_hz != kTargetRateHz)
    throw InvalidRate("segment_windows expects a 250 Hz recording");
  const auto win_len =
      static_cast<std::size_t>(std::llround(window_s * rec.sample_rate_hz));
  const std::size_t total = rec.sample_count();
  const std::size_t n_windows = win_len > 0 ? total / win_len : 0;
  std::vector<Window> out;
  out.reserve(n_windows);
  for (std::size_t n = 0; n < n_windows; ++n) {
    Window w;
    w.subject_id = rec.subject_id;
    w.label = rec.label;
    w.window_index = start_index + n;
    for (int c = 0; c < kNumChannels; ++c) {
      const auto& src = rec.channels[static_cast<std::size_t>(c)];
      w.samples[static_cast<std::size_t>(c)].assign(
          src.begin() + static_cast<long>(n * win_len),
          src.begin() + static_cast<long>((n + 1) * win_len));
    }
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace eeggraph
