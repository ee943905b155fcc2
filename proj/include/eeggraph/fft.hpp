#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "eeggraph/common.hpp"

namespace eeggraph {

using cdouble = std::complex<double>;

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 Cooley-Tukey. n must be a power of two.
inline void fft_pow2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / static_cast<double>(len);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cdouble u = a[i + k];
        const cdouble v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv;
  }
}

// Bluestein chirp-z plan for one transform length. Immutable after
// construction.
struct BluesteinPlan {
  std::size_t n = 0;
  std::size_t m = 0;  // padded power-of-two length >= 2n-1
  std::vector<cdouble> chirp;      // exp(-i*pi*k^2/n), k in [0, n)
  std::vector<cdouble> chirp_fft;  // FFT of the zero-padded conjugate chirp

  explicit BluesteinPlan(std::size_t length) : n(length) {
    m = next_pow2(2 * n - 1);
    chirp.resize(n);
    std::vector<cdouble> b(m, cdouble(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
      // k^2 mod 2n keeps the angle argument small for large n.
      const std::size_t k2 = (k * k) % (2 * n);
      const double ang = -M_PI * static_cast<double>(k2) / static_cast<double>(n);
      chirp[k] = cdouble(std::cos(ang), std::sin(ang));
      b[k] = std::conj(chirp[k]);
      if (k != 0) b[m - k] = std::conj(chirp[k]);
    }
    fft_pow2(b, false);
    chirp_fft = std::move(b);
  }

  void run(std::vector<cdouble>& a, bool inverse) const {
    std::vector<cdouble> x(m, cdouble(0.0, 0.0));
    if (inverse) {
      for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * std::conj(chirp[k]);
    } else {
      for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
    }
    fft_pow2(x, false);
    for (std::size_t k = 0; k < m; ++k)
      x[k] *= inverse ? std::conj(chirp_fft[k]) : chirp_fft[k];
    fft_pow2(x, true);
    for (std::size_t k = 0; k < n; ++k) {
      const cdouble c = inverse ? std::conj(chirp[k]) : chirp[k];
      a[k] = x[k] * c;
    }
    if (inverse) {
      const double s = 1.0 / static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) a[k] *= s;
    }
  }
};

inline const BluesteinPlan& bluestein_plan(std::size_t n) {
  static std::mutex mu;
  static std::unordered_map<std::size_t, std::unique_ptr<BluesteinPlan>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, std::make_unique<BluesteinPlan>(n)).first;
  return *it->second;
}

}  // namespace detail

// In-place complex DFT of arbitrary length (radix-2 fast path, Bluestein
// otherwise). Forward transform is unnormalized; inverse divides by n.
inline void fft(std::vector<cdouble>& a, bool inverse = false) {
  if (a.empty()) return;
  if (detail::is_pow2(a.size())) {
    detail::fft_pow2(a, inverse);
  } else {
    detail::bluestein_plan(a.size()).run(a, inverse);
  }
}

// Forward DFT of a real signal; returns the n/2+1 nonnegative-frequency bins.
inline std::vector<cdouble> rfft(const std::vector<double>& x) {
  std::vector<cdouble> a(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) a[i] = cdouble(x[i], 0.0);
  fft(a, false);
  a.resize(x.size() / 2 + 1);
  return a;
}

}  // namespace eeggraph
