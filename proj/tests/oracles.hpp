#pragma once

// Independent brute-force oracles for the test suites. Nothing here may
// call into the library implementations it checks.

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace oracles {

using cdouble = std::complex<double>;

// Direct O(n^2) DFT.
inline std::vector<cdouble> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<cdouble> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cdouble acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * static_cast<double>(k) *
                         static_cast<double>(t) / static_cast<double>(n);
      acc += x[t] * cdouble(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// One-sided periodogram of the full signal (no segmenting, no window),
// density scaling.
struct Periodogram {
  std::vector<double> freqs;
  std::vector<double> power;
};

inline Periodogram naive_periodogram(const std::vector<double>& x, double fs) {
  const std::size_t n = x.size();
  const auto spec = naive_dft(x);
  Periodogram p;
  const std::size_t bins = n / 2 + 1;
  p.freqs.resize(bins);
  p.power.resize(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    p.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(n);
    double v = std::norm(spec[k]) / (fs * static_cast<double>(n));
    if (k != 0 && !(n % 2 == 0 && k == bins - 1)) v *= 2.0;
    p.power[k] = v;
  }
  return p;
}

// Fraction of total periodogram power inside [lo, hi] Hz.
inline double band_fraction(const Periodogram& p, double lo, double hi) {
  double in = 0.0, total = 0.0;
  for (std::size_t k = 0; k < p.freqs.size(); ++k) {
    total += p.power[k];
    if (p.freqs[k] >= lo && p.freqs[k] <= hi) in += p.power[k];
  }
  return total > 0.0 ? in / total : 0.0;
}

// Least-squares amplitude of a known-frequency sine over [from, to).
inline double fit_sine_amplitude(const std::vector<double>& x, double fs,
                                 double freq, std::size_t from,
                                 std::size_t to) {
  double ss = 0.0, cc = 0.0, sc = 0.0, sy = 0.0, cy = 0.0;
  for (std::size_t i = from; i < to; ++i) {
    const double ang = 2.0 * M_PI * freq * static_cast<double>(i) / fs;
    const double s = std::sin(ang), c = std::cos(ang);
    ss += s * s;
    cc += c * c;
    sc += s * c;
    sy += s * x[i];
    cy += c * x[i];
  }
  const double det = ss * cc - sc * sc;
  const double a = (cc * sy - sc * cy) / det;
  const double b = (ss * cy - sc * sy) / det;
  return std::sqrt(a * a + b * b);
}

inline double rms(const std::vector<double>& x, std::size_t from,
                  std::size_t to) {
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += x[i] * x[i];
  return std::sqrt(acc / static_cast<double>(to - from));
}

// Straightforward evaluation of |E[Sxy]| / sqrt(E[Sxx] E[Syy]) averaged over
// [1, 40] Hz, with Hann-windowed mean-removed segments and the naive DFT.
inline double naive_coherence(const std::vector<double>& x,
                              const std::vector<double>& y, double fs,
                              std::size_t nperseg, std::size_t hop) {
  const std::size_t n_seg = (x.size() - nperseg) / hop + 1;
  std::vector<double> window(nperseg);
  for (std::size_t i = 0; i < nperseg; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                     static_cast<double>(nperseg));
  auto spectra = [&](const std::vector<double>& sig) {
    std::vector<std::vector<cdouble>> out;
    for (std::size_t s = 0; s < n_seg; ++s) {
      std::vector<double> seg(nperseg);
      double mean = 0.0;
      for (std::size_t i = 0; i < nperseg; ++i) mean += sig[s * hop + i];
      mean /= static_cast<double>(nperseg);
      for (std::size_t i = 0; i < nperseg; ++i)
        seg[i] = (sig[s * hop + i] - mean) * window[i];
      out.push_back(naive_dft(seg));
    }
    return out;
  };
  const auto sx = spectra(x);
  const auto sy = spectra(y);

  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k <= nperseg / 2; ++k) {
    const double f = static_cast<double>(k) * fs / static_cast<double>(nperseg);
    if (f < 1.0 || f > 40.0) continue;
    cdouble sxy(0.0, 0.0);
    double sxx = 0.0, syy = 0.0;
    for (std::size_t s = 0; s < n_seg; ++s) {
      sxy += sx[s][k] * std::conj(sy[s][k]);
      sxx += std::norm(sx[s][k]);
      syy += std::norm(sy[s][k]);
    }
    if (sxx * syy <= 0.0) continue;
    sum += std::abs(sxy) / std::sqrt(sxx * syy);
    ++count;
  }
  return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

// AUC by exhaustive pair counting; ties count one half.
inline double pair_count_auc(const std::vector<double>& scores,
                             const std::vector<int>& labels) {
  double concordant = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j])
        concordant += 1.0;
      else if (scores[i] == scores[j])
        concordant += 0.5;
    }
  }
  return concordant / static_cast<double>(pairs);
}

// Maximizer of the Bernoulli log-likelihood over a pi grid of step `step`.
inline double grid_mle_bernoulli(const std::vector<double>& y,
                                 double step = 1e-4) {
  double best_pi = step, best_ll = -1e300;
  for (double pi = step; pi < 1.0; pi += step) {
    double ll = 0.0;
    for (double v : y)
      ll += v * std::log(pi) + (1.0 - v) * std::log(1.0 - pi);
    if (ll > best_ll) {
      best_ll = ll;
      best_pi = pi;
    }
  }
  return best_pi;
}

// KS statistic by evaluating the ECDF difference at every pooled point.
inline double brute_ks_statistic(std::vector<double> a,
                                 std::vector<double> b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  double d = 0.0;
  auto ecdf = [](const std::vector<double>& v, double x) {
    std::size_t c = 0;
    for (double u : v)
      if (u <= x) ++c;
    return static_cast<double>(c) / static_cast<double>(v.size());
  };
  for (double x : pooled) d = std::max(d, std::fabs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

// Dense 8x8 symmetric normalization and the propagation triple product,
// as plain loops.
inline std::vector<double> naive_normalized_adjacency(
    const std::vector<double>& a, int m) {
  std::vector<double> ahat(a);
  for (int i = 0; i < m; ++i) ahat[static_cast<std::size_t>(i * m + i)] += 1.0;
  std::vector<double> deg(static_cast<std::size_t>(m), 0.0);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      deg[static_cast<std::size_t>(i)] += ahat[static_cast<std::size_t>(i * m + j)];
  std::vector<double> out(static_cast<std::size_t>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      out[static_cast<std::size_t>(i * m + j)] =
          ahat[static_cast<std::size_t>(i * m + j)] /
          std::sqrt(deg[static_cast<std::size_t>(i)] *
                    deg[static_cast<std::size_t>(j)]);
  return out;
}

// sigma(adj * h * w) with naive loops; relu = max(0, .).
inline std::vector<double> naive_gcn_forward(const std::vector<double>& adj,
                                             const std::vector<double>& h,
                                             const std::vector<double>& w,
                                             int m, int din, int dout,
                                             bool relu) {
  std::vector<double> ah(static_cast<std::size_t>(m * din), 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k)
      for (int j = 0; j < din; ++j)
        ah[static_cast<std::size_t>(i * din + j)] +=
            adj[static_cast<std::size_t>(i * m + k)] *
            h[static_cast<std::size_t>(k * din + j)];
  std::vector<double> out(static_cast<std::size_t>(m * dout), 0.0);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < din; ++k)
      for (int j = 0; j < dout; ++j)
        out[static_cast<std::size_t>(i * dout + j)] +=
            ah[static_cast<std::size_t>(i * din + k)] *
            w[static_cast<std::size_t>(k * dout + j)];
  if (relu)
    for (auto& v : out) v = std::max(0.0, v);
  return out;
}

}  // namespace oracles
