#include <doctest.h>

#include <cmath>

#include "eeggraph/graph.hpp"
#include "oracles.hpp"

using namespace eeggraph;

namespace {

std::vector<double> noise_window_channel(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(kWindowSamples);
  for (auto& v : x) v = rng.normal();
  return x;
}

Window noise_window(std::uint64_t seed) {
  Window w;
  for (int c = 0; c < kNumChannels; ++c)
    w.samples[static_cast<std::size_t>(c)] =
        noise_window_channel(seed * 100 + static_cast<std::uint64_t>(c));
  return w;
}

}  // namespace

TEST_CASE("standard positions sit on the unit sphere") {
  for (const auto& p : standard_positions())
    CHECK(std::fabs(p.norm() - 1.0) < 1e-9);
}

TEST_CASE("homologous channels mirror across the sagittal plane") {
  const auto pos = standard_positions();
  // (left index, right index) in the fixed channel order
  const std::pair<int, int> mirrors[] = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  for (const auto& [l, r] : mirrors) {
    CHECK(pos[static_cast<std::size_t>(l)].x ==
          doctest::Approx(-pos[static_cast<std::size_t>(r)].x).epsilon(1e-6));
    CHECK(pos[static_cast<std::size_t>(l)].y ==
          doctest::Approx(pos[static_cast<std::size_t>(r)].y).epsilon(1e-6));
    CHECK(pos[static_cast<std::size_t>(l)].z ==
          doctest::Approx(pos[static_cast<std::size_t>(r)].z).epsilon(1e-6));
  }
}

TEST_CASE("bipolar site is the normalized electrode midpoint per the fixture") {
  const auto table = load_electrode_table(
      std::string(EEGGRAPH_FIXTURE_DIR) + "/electrode_positions_1020.txt");
  REQUIRE(table.size() == 19);

  // Recompute T7-C3 independently from the fixture angles.
  auto angle_of = [&](const std::string& name) {
    for (const auto& a : table)
      if (a.name == name) return a;
    FAIL("electrode not in fixture: ", name);
    return table.front();
  };
  auto to_xyz = [](const ElectrodeAngle& a) {
    const double az = a.azimuth_deg * M_PI / 180.0;
    const double el = a.elevation_deg * M_PI / 180.0;
    return std::array<double, 3>{std::cos(el) * std::cos(az),
                                 std::cos(el) * std::sin(az), std::sin(el)};
  };
  const auto t7 = to_xyz(angle_of("T7"));
  const auto c3 = to_xyz(angle_of("C3"));
  std::array<double, 3> mid{(t7[0] + c3[0]) / 2.0, (t7[1] + c3[1]) / 2.0,
                            (t7[2] + c3[2]) / 2.0};
  const double n =
      std::sqrt(mid[0] * mid[0] + mid[1] * mid[1] + mid[2] * mid[2]);
  for (auto& v : mid) v /= n;

  const auto pos = standard_positions();  // built from the embedded table
  CHECK(pos[2].channel_name == "T7-C3");
  CHECK(pos[2].x == doctest::Approx(mid[0]).epsilon(1e-12));
  CHECK(pos[2].y == doctest::Approx(mid[1]).epsilon(1e-12));
  CHECK(pos[2].z == doctest::Approx(mid[2]).epsilon(1e-12));

  // The embedded table and the checked-in fixture are the same table.
  const auto builtin = standard_1020_angles();
  REQUIRE(builtin.size() == table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    CHECK(builtin[i].name == table[i].name);
    CHECK(builtin[i].azimuth_deg == table[i].azimuth_deg);
    CHECK(builtin[i].elevation_deg == table[i].elevation_deg);
  }
}

TEST_CASE("geodesic distance endpoints") {
  const ElectrodePosition px{"x", 1.0, 0.0, 0.0};
  const ElectrodePosition py{"y", 0.0, 1.0, 0.0};
  const ElectrodePosition mx{"-x", -1.0, 0.0, 0.0};
  CHECK(geodesic_distance(px, px) == 0.0);
  CHECK(geodesic_distance(px, mx) == doctest::Approx(M_PI));
  CHECK(geodesic_distance(px, py) == doctest::Approx(M_PI / 2.0));
  CHECK(geodesic_distance(px, py) == M_PI / 2.0);

  const ElectrodePosition off{"off", 1.1, 0.0, 0.0};
  CHECK_THROWS_AS(geodesic_distance(px, off), OffSphere);
}

TEST_CASE("geodesic clamps rounding noise in the dot product") {
  // Numerically |p| = 1 but p.q can exceed 1 by rounding.
  const double c = 1.0 / std::sqrt(3.0);
  const ElectrodePosition p{"p", c, c, c};
  const ElectrodePosition q{"q", c, c, c};
  const double d = geodesic_distance(p, q);
  CHECK(std::isfinite(d));
  CHECK(d >= 0.0);
  CHECK(d < 1e-6);
}

TEST_CASE("spatial adjacency endpoints and symmetry") {
  const auto adj = spatial_adjacency(standard_positions());
  CHECK(adj.kind == AdjacencyKind::Spatial);
  double lo = 2.0, hi = -1.0;
  for (int i = 0; i < kNumChannels; ++i) {
    CHECK(adj.at(i, i) == 0.0);
    for (int j = 0; j < kNumChannels; ++j) {
      CHECK(adj.at(i, j) == adj.at(j, i));
      if (i != j) {
        lo = std::min(lo, adj.at(i, j));
        hi = std::max(hi, adj.at(i, j));
      }
    }
  }
  CHECK(lo == 0.0);  // the farthest pair
  CHECK(hi == 1.0);  // the closest pair
}

TEST_CASE("identical positions are degenerate geometry") {
  std::array<ElectrodePosition, kNumChannels> positions;
  positions.fill({"same", 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(spatial_adjacency(positions), DegenerateGeometry);
}

TEST_CASE("inverting the proximity flag flips the scaling direction") {
  const auto near = spatial_adjacency(standard_positions(), true);
  const auto far = spatial_adjacency(standard_positions(), false);
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j) {
      if (i == j) continue;
      CHECK(near.at(i, j) == doctest::Approx(1.0 - far.at(i, j)));
    }
}

TEST_CASE("functional adjacency of identical channels is all ones") {
  Window w;
  const auto chan = noise_window_channel(55);
  for (auto& c : w.samples) c = chan;
  const auto adj = functional_adjacency(w);
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j) {
      if (i == j)
        CHECK(adj.at(i, j) == 0.0);
      else
        CHECK(adj.at(i, j) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("functional adjacency of independent noise is weak") {
  const auto adj = functional_adjacency(noise_window(77));
  double mean = 0.0;
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j)
      if (i != j) mean += adj.at(i, j);
  mean /= (kNumChannels * (kNumChannels - 1));
  CHECK(mean < 0.35);
}

TEST_CASE("channel permutation conjugates the functional adjacency") {
  const auto w = noise_window(88);
  Window permuted = w;
  const int perm[kNumChannels] = {3, 0, 1, 2, 7, 6, 5, 4};
  for (int c = 0; c < kNumChannels; ++c)
    permuted.samples[static_cast<std::size_t>(c)] =
        w.samples[static_cast<std::size_t>(perm[c])];
  const auto a = functional_adjacency(w);
  const auto b = functional_adjacency(permuted);
  for (int i = 0; i < kNumChannels; ++i)
    for (int j = 0; j < kNumChannels; ++j)
      CHECK(b.at(i, j) == doctest::Approx(a.at(perm[i], perm[j])));
}

TEST_CASE("combine is the arithmetic mean of the two adjacencies") {
  AdjacencyMatrix s, f;
  s.kind = AdjacencyKind::Spatial;
  f.kind = AdjacencyKind::Functional;
  s.at(0, 1) = s.at(1, 0) = 0.4;
  f.at(0, 1) = f.at(1, 0) = 0.6;
  const auto c = combine_adjacency(s, f);
  CHECK(c.kind == AdjacencyKind::Combined);
  CHECK(c.at(0, 1) == doctest::Approx(0.5));

  // Equal inputs average to themselves; zeros stay zero.
  AdjacencyMatrix f2 = f;
  f2.values = s.values;
  const auto same = combine_adjacency(s, f2);
  for (std::size_t i = 0; i < same.values.size(); ++i)
    CHECK(same.values[i] == doctest::Approx(s.values[i]));

  AdjacencyMatrix zs, zf;
  zs.kind = AdjacencyKind::Spatial;
  zf.kind = AdjacencyKind::Functional;
  for (double v : combine_adjacency(zs, zf).values) CHECK(v == 0.0);
}

TEST_CASE("combine rejects wrong kinds") {
  AdjacencyMatrix s, f;
  s.kind = AdjacencyKind::Spatial;
  f.kind = AdjacencyKind::Functional;
  CHECK_THROWS_AS(combine_adjacency(f, s), KindMismatch);
  AdjacencyMatrix c;
  c.kind = AdjacencyKind::Combined;
  CHECK_THROWS_AS(combine_adjacency(s, c), KindMismatch);
}

TEST_CASE("combined adjacency invariants over random windows") {
  const auto spatial = spatial_adjacency(standard_positions());
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto functional = functional_adjacency(noise_window(200 + s));
    const auto combined = combine_adjacency(spatial, functional);
    for (int i = 0; i < kNumChannels; ++i)
      for (int j = 0; j < kNumChannels; ++j) {
        CHECK(std::fabs(combined.at(i, j) - combined.at(j, i)) <= 1e-12);
        CHECK(combined.at(i, j) >= 0.0);
        CHECK(combined.at(i, j) <= 1.0);
        CHECK(combined.at(i, j) ==
              doctest::Approx(0.5 * (spatial.at(i, j) + functional.at(i, j)))
                  .epsilon(1e-12));
        // Fully connected whenever either component contributes.
        if (i != j &&
            (functional.at(i, j) > 0.0 || spatial.at(i, j) > 0.0))
          CHECK(combined.at(i, j) > 0.0);
      }
  }
}

TEST_CASE("combine is monotone in each entry") {
  const auto spatial = spatial_adjacency(standard_positions());
  auto functional = functional_adjacency(noise_window(300));
  const auto base = combine_adjacency(spatial, functional);
  functional.at(2, 5) = functional.at(5, 2) =
      std::min(1.0, functional.at(2, 5) + 0.1);
  const auto bumped = combine_adjacency(spatial, functional);
  CHECK(bumped.at(2, 5) > base.at(2, 5));
  CHECK(bumped.at(5, 2) > base.at(5, 2));
}
