#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace eeggraph {

enum class Label : int { Healthy = 0, Patient = 1 };

inline const char* to_string(Label l) {
  return l == Label::Patient ? "patient" : "healthy";
}

inline Label label_from_string(const std::string& s) {
  if (s == "patient") return Label::Patient;
  if (s == "healthy") return Label::Healthy;
  throw std::invalid_argument("unknown label: " + s);
}

// ---------------------------------------------------------------------------
// Errors. One exception type per contract violation so callers can catch the
// specific failure they care about.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingChannel : Error {
  std::string channel;
  explicit MissingChannel(const std::string& name)
      : Error("missing channel: " + name), channel(name) {}
};
struct InvalidRate : Error {
  using Error::Error;
};
struct InvalidCutoff : Error {
  using Error::Error;
};
struct LengthMismatch : Error {
  using Error::Error;
};
struct BandOutOfRange : Error {
  using Error::Error;
};
struct DegenerateSignal : Error {
  using Error::Error;
};
struct OffSphere : Error {
  using Error::Error;
};
struct DegenerateGeometry : Error {
  using Error::Error;
};
struct KindMismatch : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct SingularDegree : Error {
  using Error::Error;
};
struct NonFiniteActivation : Error {
  using Error::Error;
};
struct NonFiniteGradient : Error {
  using Error::Error;
};
struct NonFiniteLoss : Error {
  using Error::Error;
};
struct TooFewSubjects : Error {
  using Error::Error;
};
struct EmptyClass : Error {
  using Error::Error;
};
struct InvalidFraction : Error {
  using Error::Error;
};
struct EmptySubject : Error {
  using Error::Error;
};
struct SingleClass : Error {
  using Error::Error;
};
struct EmptySample : Error {
  using Error::Error;
};
struct MissingCheckpoint : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Deterministic random streams. std::mt19937_64 has a standardized output
// sequence; the variate transforms below are hand-rolled because the std
// distributions are implementation-defined and would break bit-reproducible
// artifacts across toolchains.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from a base seed and a stream tag.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t s = base ^ (0x9e3779b97f4a7c15ULL * (tag + 1));
  splitmix64(s);
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (polar form avoided to keep the
  // consumption of engine outputs fixed per draw).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace eeggraph
