#include <doctest.h>

#include <cmath>

#include "eeggraph/signal.hpp"
#include "oracles.hpp"

using namespace eeggraph;

namespace {

std::vector<double> sine(double freq, double fs, double seconds,
                         double amp = 1.0) {
  const auto n = static_cast<std::size_t>(std::llround(fs * seconds));
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / fs);
  return x;
}

std::vector<double> white_noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

Recording constant_recording(double fs, double seconds) {
  Recording raw;
  raw.subject_id = "s0";
  raw.label = Label::Patient;
  raw.sample_rate_hz = fs;
  const auto n = static_cast<std::size_t>(fs * seconds);
  const std::vector<const char*> names = {"F7", "F3", "F8", "F4", "T7",
                                          "C3", "T8", "C4", "P7", "P3",
                                          "P8", "P4", "O1", "O2"};
  double value = 1.0;
  for (const char* name : names)
    raw.channels.emplace_back(name, std::vector<double>(n, value++));
  return raw;
}

}  // namespace

TEST_CASE("bipolar montage subtracts anode minus cathode") {
  auto raw = constant_recording(250.0, 1.0);
  // F7 = 5, F3 = 2
  raw.channels[0].second.assign(250, 5.0);
  raw.channels[1].second.assign(250, 2.0);
  const auto montage = derive_bipolar_montage(raw);
  for (double v : montage.channels[0]) CHECK(v == doctest::Approx(3.0));
  CHECK(montage.subject_id == "s0");
  CHECK(montage.label == Label::Patient);
}

TEST_CASE("anode equal to cathode gives a zero channel") {
  auto raw = constant_recording(250.0, 1.0);
  raw.channels[0].second = raw.channels[1].second;  // F7 == F3
  const auto montage = derive_bipolar_montage(raw);
  for (double v : montage.channels[0]) CHECK(v == 0.0);
}

TEST_CASE("missing electrode raises MissingChannel") {
  auto raw = constant_recording(250.0, 1.0);
  raw.channels.erase(raw.channels.begin() + 4);  // drop T7
  CHECK_THROWS_WITH_AS(derive_bipolar_montage(raw), "missing channel: T7",
                       MissingChannel);
}

TEST_CASE("montage is linear in the input") {
  auto raw = constant_recording(500.0, 1.0);
  for (auto& [name, chan] : raw.channels) {
    Rng rng(std::hash<std::string>{}(name));
    for (auto& v : chan) v = rng.normal();
  }
  auto scaled = raw;
  for (auto& [name, chan] : scaled.channels)
    for (auto& v : chan) v *= 2.5;
  const auto m1 = derive_bipolar_montage(raw);
  const auto m2 = derive_bipolar_montage(scaled);
  for (int c = 0; c < kNumChannels; ++c)
    for (std::size_t i = 0; i < m1.channels[0].size(); ++i)
      CHECK(m2.channels[c][i] ==
            doctest::Approx(2.5 * m1.channels[c][i]).epsilon(1e-12));
}

TEST_CASE("resample length arithmetic") {
  const std::vector<double> x(10000, 0.0);  // 20 s at 500 Hz
  CHECK(resample(x, 500.0, 250.0).size() == 5000);
  CHECK(resample(std::vector<double>(999, 0.0), 333.0, 250.0).size() == 750);
}

TEST_CASE("resample preserves a constant signal") {
  const std::vector<double> x(2000, 7.25);
  for (double to : {250.0, 125.0, 400.0}) {
    const auto y = resample(x, 500.0, to);
    for (double v : y) CHECK(v == doctest::Approx(7.25).epsilon(1e-9));
  }
}

TEST_CASE("resample rejects non-positive rates") {
  const std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(resample(x, 0.0, 250.0), InvalidRate);
  CHECK_THROWS_AS(resample(x, 500.0, -1.0), InvalidRate);
}

TEST_CASE("resampled 10 Hz sine matches the analytic sine mid-segment") {
  const auto x = sine(10.0, 2500.0, 4.0);
  const auto y = resample(x, 2500.0, 250.0);
  REQUIRE(y.size() == 1000);
  // Oracle: the same sine regenerated at 250 Hz.
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 100; i < 900; ++i) {
    const double t = std::sin(2.0 * M_PI * 10.0 * static_cast<double>(i) /
                              250.0);
    err += (y[i] - t) * (y[i] - t);
    ref += t * t;
  }
  CHECK(std::sqrt(err / ref) < 0.02);

  const auto p = oracles::naive_periodogram(
      std::vector<double>(y.begin() + 100, y.begin() + 900), 250.0);
  std::size_t peak = 0;
  for (std::size_t k = 1; k < p.power.size(); ++k)
    if (p.power[k] > p.power[peak]) peak = k;
  CHECK(p.freqs[peak] == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("resample round-trip keeps a band-limited signal") {
  std::vector<double> x(2500);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / 250.0;
    x[i] = std::sin(2.0 * M_PI * 3.0 * t) +
           0.5 * std::sin(2.0 * M_PI * 11.0 * t + 0.3) +
           0.2 * std::sin(2.0 * M_PI * 27.0 * t + 1.1);
  }
  const auto up = resample(x, 250.0, 500.0);
  const auto back = resample(up, 500.0, 250.0);
  REQUIRE(back.size() == x.size());
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 200; i + 200 < x.size(); ++i) {
    err += (back[i] - x[i]) * (back[i] - x[i]);
    ref += x[i] * x[i];
  }
  CHECK(std::sqrt(err / ref) < 0.01);
}

TEST_CASE("highpass removes DC") {
  const std::vector<double> x(15000, 10.0);  // 60 s at 250 Hz
  const auto y = highpass_filter(x, 250.0, 1.0);
  CHECK(oracles::rms(y, 2500, 12500) < 0.1);
}

TEST_CASE("highpass of zero is zero") {
  const std::vector<double> x(1000, 0.0);
  for (double v : highpass_filter(x, 250.0)) CHECK(v == 0.0);
}

TEST_CASE("highpass passband gain is within 5 percent") {
  const auto x = sine(10.0, 250.0, 60.0);
  const auto y = highpass_filter(x, 250.0, 1.0);
  const double amp =
      oracles::fit_sine_amplitude(y, 250.0, 10.0, 2500, 12500);
  CHECK(amp > 0.95);
  CHECK(amp < 1.05);
}

TEST_CASE("highpass rejects bad cutoffs") {
  const std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(highpass_filter(x, 250.0, 0.0), InvalidCutoff);
  CHECK_THROWS_AS(highpass_filter(x, 250.0, 125.0), InvalidCutoff);
}

TEST_CASE("notch attenuates 50 Hz by at least 20 dB") {
  const auto x = sine(50.0, 250.0, 60.0);
  const auto y = notch_filter(x, 250.0, 50.0);
  const double in_rms = oracles::rms(x, 2500, 12500);
  const double out_rms = oracles::rms(y, 2500, 12500);
  CHECK(out_rms <= 0.1 * in_rms);
}

TEST_CASE("notch leaves 10 Hz nearly untouched") {
  const auto x = sine(10.0, 250.0, 60.0);
  const auto y = notch_filter(x, 250.0, 50.0);
  const double amp =
      oracles::fit_sine_amplitude(y, 250.0, 10.0, 2500, 12500);
  CHECK(amp > 0.95);
  CHECK(amp < 1.05);
}

TEST_CASE("notch of zero is zero and bad frequencies throw") {
  const std::vector<double> x(1000, 0.0);
  for (double v : notch_filter(x, 250.0)) CHECK(v == 0.0);
  CHECK_THROWS_AS(notch_filter(x, 250.0, 0.0), InvalidCutoff);
  CHECK_THROWS_AS(notch_filter(x, 80.0, 50.0), InvalidCutoff);
}

TEST_CASE("highpass and notch commute on white noise") {
  const auto x = white_noise(15000, 99);
  const auto a = notch_filter(highpass_filter(x, 250.0), 250.0);
  const auto b = highpass_filter(notch_filter(x, 250.0), 250.0);
  // Linear time-invariant application: compare away from the edge
  // transients that the reflection padding re-seeds.
  for (std::size_t i = 1250; i + 1250 < x.size(); ++i)
    CHECK(std::fabs(a[i] - b[i]) < 1e-6);
}

TEST_CASE("segment_windows splits into whole 10 s windows") {
  MontageRecording rec;
  rec.subject_id = "s1";
  rec.label = Label::Healthy;
  rec.sample_rate_hz = 250.0;
  const auto n = static_cast<std::size_t>(95.0 * 250.0);
  for (auto& chan : rec.channels) {
    chan.resize(n);
    for (std::size_t i = 0; i < n; ++i) chan[i] = static_cast<double>(i);
  }
  const auto windows = segment_windows(rec);
  REQUIRE(windows.size() == 9);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    CHECK(windows[w].window_index == w);
    CHECK(windows[w].label == Label::Healthy);
    CHECK(windows[w].subject_id == "s1");
    for (const auto& chan : windows[w].samples)
      CHECK(chan.size() == kWindowSamples);
    CHECK(windows[w].samples[0].front() ==
          static_cast<double>(w * kWindowSamples));
  }
  // Coverage: windows plus discarded remainder account for every sample.
  CHECK(windows.size() * kWindowSamples + (n - windows.size() * kWindowSamples)
        == n);
  CHECK(n - windows.size() * kWindowSamples ==
        static_cast<std::size_t>(5.0 * 250.0));
}

TEST_CASE("exactly 10 s yields one window, short input none") {
  MontageRecording rec;
  rec.sample_rate_hz = 250.0;
  for (auto& chan : rec.channels) chan.resize(2500, 0.0);
  CHECK(segment_windows(rec).size() == 1);
  for (auto& chan : rec.channels) chan.resize(1750);
  CHECK(segment_windows(rec).empty());
}

TEST_CASE("segment_windows requires 250 Hz input") {
  MontageRecording rec;
  rec.sample_rate_hz = 500.0;
  for (auto& chan : rec.channels) chan.resize(5000, 0.0);
  CHECK_THROWS_AS(segment_windows(rec), InvalidRate);
}

TEST_CASE("preprocessing is deterministic") {
  const auto x = white_noise(5000, 123);
  const auto once = notch_filter(
      highpass_filter(resample(x, 500.0, 250.0), 250.0), 250.0);
  const auto twice = notch_filter(
      highpass_filter(resample(x, 500.0, 250.0), 250.0), 250.0);
  CHECK(once == twice);
}
