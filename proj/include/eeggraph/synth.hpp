#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "eeggraph/io.hpp"

namespace eeggraph {

// Desk-scale stand-in corpus: pink-noise EEG with a posterior alpha rhythm
// whose power and inter-electrode coupling depend on the class label, plus
// 50 Hz mains pickup. separation = 0 makes the classes statistically
// identical.
struct SynthSpec {
  std::size_t subjects_per_class = 60;
  double duration_s = 120.0;
  std::size_t trials = 2;  // each subject's recording splits into trials
  double native_rate_hz = 500.0;
  double separation = 1.0;
  std::uint64_t seed = 0;
};

namespace detail {

inline const std::vector<std::string>& synth_electrodes() {
  static const std::vector<std::string> names = {
      "F7", "F3", "F8", "F4", "T7", "C3", "T8",
      "C4", "P7", "P3", "P8", "P4", "O1", "O2"};
  return names;
}

// Rhythm carriers: the anode of each bipolar pair carries that pair's
// alpha stream, so the montage subtraction passes it through unchanged.
// Base amplitude in uV, the class boost applied to healthy subjects, and
// whether the site belongs to the posterior or anterior coherence block.
struct RhythmSite {
  const char* anode;
  double base_amp;
  double healthy_boost;  // fractional, scaled by `separation`
  bool posterior;
};

inline const std::array<RhythmSite, kNumChannels>& rhythm_sites() {
  static const std::array<RhythmSite, kNumChannels> sites = {{
      {"F7", 6.0, 0.0, false},
      {"F8", 6.0, 0.0, false},
      {"T7", 6.0, 0.0, false},
      {"T8", 6.0, 0.0, false},
      {"P7", 10.0, 0.10, true},
      {"P8", 10.0, 0.10, true},
      {"O1", 10.0, 0.10, true},
      {"O2", 10.0, 0.10, true},
  }};
  return sites;
}

// Paul Kellet's 1/f filter over Gaussian white noise.
inline std::vector<double> pink_noise(std::size_t n, Rng& rng) {
  std::vector<double> out(n);
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = rng.normal();
    b0 = 0.99765 * b0 + w * 0.0990460;
    b1 = 0.96300 * b1 + w * 0.2965164;
    b2 = 0.57000 * b2 + w * 1.0526913;
    out[i] = b0 + b1 + b2 + w * 0.1848;
  }
  return out;
}

// Band-limited noise around f0 (bandwidth_hz wide) via a two-pole
// resonator, normalized to unit RMS over the trial.
inline std::vector<double> narrowband(std::size_t n, double f0, double fs,
                                      double bandwidth_hz, Rng& rng) {
  const double r = std::max(0.5, 1.0 - M_PI * bandwidth_hz / fs);
  const double w0 = 2.0 * M_PI * f0 / fs;
  const double a1 = 2.0 * r * std::cos(w0), a2 = -r * r;
  std::vector<double> out(n);
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = a1 * y1 + a2 * y2 + rng.normal();
    out[i] = y;
    y2 = y1;
    y1 = y;
  }
  double rms = 0.0;
  for (double v : out) rms += v * v;
  rms = std::sqrt(rms / static_cast<double>(n));
  if (rms > 0.0)
    for (double& v : out) v /= rms;
  return out;
}

// Posterior rhythm: alpha plus a weak first harmonic in the beta range.
inline std::vector<double> posterior_rhythm(std::size_t n, double alpha_hz,
                                            double fs, Rng& rng) {
  auto base = narrowband(n, alpha_hz, fs, 4.0, rng);
  const auto harmonic = narrowband(n, 2.0 * alpha_hz, fs, 4.0, rng);
  for (std::size_t i = 0; i < n; ++i) base[i] += 0.4 * harmonic[i];
  return base;
}

}  // namespace detail

// One trial's raw multichannel signal for one subject, fully determined by
// (spec.seed, subject index, class, trial index).
inline SignalFile synth_trial(const SynthSpec& spec, Label label,
                              std::size_t subject_index,
                              std::size_t trial_index,
                              const std::string& subject_id) {
  const double fs = spec.native_rate_hz;
  const auto n = static_cast<std::size_t>(
      std::llround(spec.duration_s / static_cast<double>(spec.trials) * fs));
  const std::uint64_t subject_seed =
      derive_seed(spec.seed, (static_cast<std::uint64_t>(label) << 32) ^
                                 (subject_index * 2654435761ULL));
  const std::uint64_t trial_seed = derive_seed(subject_seed, 17 + trial_index);

  Rng subject_rng(subject_seed);
  const double subject_gain = std::exp(0.05 * subject_rng.normal());
  const double alpha_hz = 9.5 + subject_rng.uniform();

  // Per-subject rhythm topography: a lognormal jitter on each site's
  // amplitude, stable across that subject's trials.
  std::array<double, kNumChannels> site_amp{};
  const bool healthy = label == Label::Healthy;
  for (int k = 0; k < kNumChannels; ++k) {
    const auto& site = detail::rhythm_sites()[static_cast<std::size_t>(k)];
    const double boost =
        healthy ? 1.0 + site.healthy_boost * spec.separation : 1.0;
    Rng jitter(derive_seed(subject_seed, 500 + static_cast<std::size_t>(k)));
    site_amp[static_cast<std::size_t>(k)] =
        site.base_amp * boost * std::exp(0.10 * jitter.normal());
  }

  // Coherence topology: each hemisphere block (posterior, anterior) draws
  // a fraction of its rhythms from a block-shared source. Healthy subjects
  // synchronize the posterior block, patients the anterior block; at
  // separation = 0 the two classes collapse onto the same process.
  const double swing = 0.5 * std::min(1.0, spec.separation);
  const double share_posterior =
      std::clamp(0.5 + (healthy ? swing : -swing), 0.0, 1.0);
  const double share_anterior =
      std::clamp(0.5 + (healthy ? -swing : swing), 0.0, 1.0);
  Rng shared_post_rng(derive_seed(trial_seed, 999));
  Rng shared_ant_rng(derive_seed(trial_seed, 998));
  const auto shared_posterior =
      detail::posterior_rhythm(n, alpha_hz, fs, shared_post_rng);
  const auto shared_anterior =
      detail::posterior_rhythm(n, alpha_hz, fs, shared_ant_rng);

  SignalFile sig;
  sig.subject_id = subject_id;
  sig.label = label;
  sig.sample_rate_hz = fs;
  sig.channel_names = detail::synth_electrodes();
  sig.samples.reserve(sig.channel_names.size());

  for (std::size_t e = 0; e < sig.channel_names.size(); ++e) {
    const auto& name = sig.channel_names[e];
    Rng rng(derive_seed(trial_seed, 100 + e));
    auto chan = detail::pink_noise(n, rng);
    for (double& v : chan) v *= 5.0;  // broadband floor, uV

    for (int k = 0; k < kNumChannels; ++k) {
      const auto& site = detail::rhythm_sites()[static_cast<std::size_t>(k)];
      if (name != site.anode) continue;
      const double amp = site_amp[static_cast<std::size_t>(k)];
      const double share =
          site.posterior ? share_posterior : share_anterior;
      const auto& shared =
          site.posterior ? shared_posterior : shared_anterior;
      const auto own = detail::posterior_rhythm(n, alpha_hz, fs, rng);
      const double w_own = amp * std::sqrt(1.0 - share);
      const double w_shared = amp * std::sqrt(share);
      for (std::size_t i = 0; i < n; ++i)
        chan[i] += w_own * own[i] + w_shared * shared[i];
    }

    // Mains pickup, independent phase/amplitude per electrode.
    const double mains_amp = 6.0 + 4.0 * rng.uniform();
    const double mains_phase = 2.0 * M_PI * rng.uniform();
    for (std::size_t i = 0; i < n; ++i)
      chan[i] += mains_amp * std::sin(2.0 * M_PI * 50.0 *
                                          static_cast<double>(i) / fs +
                                      mains_phase);

    for (double& v : chan) v *= subject_gain;
    sig.samples.push_back(std::move(chan));
  }
  return sig;
}

// Generate the full corpus under out_dir: signal files plus manifest.json.
inline Manifest generate_synthetic(const SynthSpec& spec,
                                   const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "signals");
  Manifest manifest;
  char buf[32];
  for (Label label : {Label::Patient, Label::Healthy}) {
    for (std::size_t s = 0; s < spec.subjects_per_class; ++s) {
      std::snprintf(buf, sizeof(buf), "%c%03zu",
                    label == Label::Patient ? 'p' : 'h', s);
      const std::string subject_id(buf);
      ManifestEntry entry;
      entry.subject_id = subject_id;
      entry.label = label;
      entry.sample_rate_hz = spec.native_rate_hz;
      entry.channel_names = detail::synth_electrodes();
      for (std::size_t t = 0; t < spec.trials; ++t) {
        const auto sig = synth_trial(spec, label, s, t, subject_id);
        const std::string rel =
            "signals/" + subject_id + "_t" + std::to_string(t) + ".sig";
        save_signal(sig, (fs::path(out_dir) / rel).string());
        entry.files.push_back(rel);
      }
      manifest.recordings.push_back(std::move(entry));
    }
  }
  save_manifest(manifest, (fs::path(out_dir) / "manifest.json").string());
  return manifest;
}

}  // namespace eeggraph
