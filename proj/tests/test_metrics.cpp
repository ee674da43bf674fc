#include <algorithm>

#include "doctest.h"
#include "neunet/metrics.hpp"
#include "oracles.hpp"

using namespace neunet;

namespace {

LabelVolume random_mask(const Index3& shape, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution b(p);
  LabelVolume l(shape, 2);
  for (Index i = 0; i < l.voxels(); ++i) l.data[i] = b(rng) ? 1 : 0;
  return l;
}

std::vector<Index3> random_points(std::size_t n, const Index3& extent, std::mt19937_64& rng) {
  std::vector<Index3> out;
  for (std::size_t i = 0; i < n; ++i) {
    Index3 p;
    for (int a = 0; a < 3; ++a) p[a] = std::uniform_int_distribution<Index>(0, extent[a] - 1)(rng);
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("dice metric examples") {
  std::mt19937_64 rng(51);
  auto a = random_mask({6, 6, 6}, 0.4, rng);
  CHECK(dice_metric(a, a, 1) == 1.0);
  LabelVolume inv = a;
  for (Index i = 0; i < inv.voxels(); ++i) inv.data[i] = 1 - a.data[i];
  CHECK(dice_metric(a, inv, 1) == 0.0);
  LabelVolume empty({6, 6, 6}, 2);
  CHECK(dice_metric(empty, empty, 1) == 1.0);
  CHECK_THROWS_AS(dice_metric(a, LabelVolume({6, 6, 5}, 2), 1), DimensionError);
}

TEST_CASE("dice metric matches voxel counting and is symmetric") {
  std::mt19937_64 rng(52);
  for (int t = 0; t < 50; ++t) {
    auto a = random_mask({6, 6, 6}, 0.3, rng);
    auto b = random_mask({6, 6, 6}, 0.5, rng);
    int tp = 0, fp = 0, fn = 0;
    for (Index i = 0; i < 6; ++i)
      for (Index j = 0; j < 6; ++j)
        for (Index k = 0; k < 6; ++k) {
          tp += a(i, j, k) == 1 && b(i, j, k) == 1;
          fp += a(i, j, k) == 1 && b(i, j, k) == 0;
          fn += a(i, j, k) == 0 && b(i, j, k) == 1;
        }
    CHECK(dice_metric(a, b, 1) == 2.0 * tp / (2.0 * tp + fp + fn));
    CHECK(dice_metric(a, b, 1) == dice_metric(b, a, 1));
  }
}

TEST_CASE("surface points match the brute-force neighbour test") {
  std::mt19937_64 rng(53);
  for (int t = 0; t < 10; ++t) {
    auto m = random_mask({7, 5, 6}, 0.6, rng);
    auto s = surface_points(m, 1);
    auto ref = oracle::surface_brute(m, 1);
    CHECK(s == ref);
  }
  LabelVolume cube({5, 5, 5}, 2);
  for (Index i = 1; i < 4; ++i)
    for (Index j = 1; j < 4; ++j)
      for (Index k = 1; k < 4; ++k) cube(i, j, k) = 1;
  CHECK(surface_points(cube, 1).size() == 26);
}

TEST_CASE("hd95 examples") {
  std::mt19937_64 rng(54);
  auto a = random_mask({8, 8, 8}, 0.3, rng);
  CHECK(hd95(a, a, 1, {1.0, 1.0, 1.0}).value() == 0.0);

  LabelVolume p({8, 8, 8}, 2), g({8, 8, 8}, 2);
  p(1, 2, 2) = 1;
  g(4, 2, 2) = 1;
  CHECK(hd95(p, g, 1, {1.0, 1.0, 1.0}).value() == doctest::Approx(3.0));
  CHECK(hd95(p, g, 1, {2.0, 1.0, 1.0}).value() == doctest::Approx(6.0));

  LabelVolume empty({8, 8, 8}, 2);
  CHECK_FALSE(hd95(empty, g, 1, {1.0, 1.0, 1.0}).has_value());
  CHECK_FALSE(hd95(p, empty, 1, {1.0, 1.0, 1.0}).has_value());
}

TEST_CASE("hd95 equals the all-pairs oracle") {
  std::mt19937_64 rng(55);
  std::uniform_int_distribution<std::size_t> count(1, 200);
  for (int t = 0; t < 100; ++t) {
    const Spacing3 sp{1.0 + 0.5 * (t % 3), 0.7, 1.0 + 0.1 * (t % 5)};
    auto a = random_points(count(rng), {20, 15, 12}, rng);
    auto b = random_points(count(rng), {20, 15, 12}, rng);
    CHECK(hd95_points(a, b, sp).value() == oracle::hd95_brute(a, b, sp));
  }
}

TEST_CASE("hd95 is symmetric and translation invariant") {
  std::mt19937_64 rng(56);
  for (int t = 0; t < 20; ++t) {
    LabelVolume a({12, 12, 12}, 2), b({12, 12, 12}, 2);
    for (Index i = 2; i < 8; ++i)
      for (Index j = 2; j < 8; ++j)
        for (Index k = 2; k < 8; ++k) {
          a(i, j, k) = std::bernoulli_distribution(0.7)(rng) ? 1 : 0;
          b(i, j, k) = std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
        }
    const Spacing3 sp{1.0, 1.5, 0.8};
    const double ab = hd95(a, b, 1, sp).value();
    CHECK(ab == hd95(b, a, 1, sp).value());
    auto shift = [](const LabelVolume& m) {
      LabelVolume s(m.shape, 2);
      for (Index i = 0; i + 3 < 12; ++i)
        for (Index j = 0; j + 2 < 12; ++j)
          for (Index k = 0; k + 1 < 12; ++k) s(i + 3, j + 2, k + 1) = m(i, j, k);
      return s;
    };
    CHECK(hd95(shift(a), shift(b), 1, sp).value() == doctest::Approx(ab).epsilon(1e-12));
    CHECK(ab >= 0.0);
  }
}

TEST_CASE("directed distances match exhaustive search") {
  std::mt19937_64 rng(57);
  auto a = random_points(150, {30, 30, 30}, rng);
  auto b = random_points(90, {30, 30, 30}, rng);
  const Spacing3 sp{0.5, 2.0, 1.25};
  auto d = directed_surface_distances(a, b, sp);
  REQUIRE(d.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double best = 1e300;
    for (const auto& q : b) best = std::min(best, voxel_distance(a[i], q, sp));
    CHECK(d[i] == best);
  }
  CHECK_THROWS_AS(directed_surface_distances(a, {}, sp), ArgumentError);
}

}  // TEST_SUITE
