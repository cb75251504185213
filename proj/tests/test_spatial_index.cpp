#include <doctest.h>

#include <random>

#include "csf/reference.hpp"
#include "csf/spatial_index.hpp"

using namespace csf;

TEST_CASE("single point and exact hits") {
  std::vector<Eigen::Vector3f> pts{{1, 2, 3}};
  const SceneIndex one(pts);
  CHECK(one.nearest({100, -5, 2}).index == 0);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  pts.clear();
  for (int i = 0; i < 500; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const SceneIndex idx(pts);
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    const auto nb = idx.nearest(pts[i].cast<double>());
    CHECK(nb.index == i);
    CHECK(nb.sq_distance == 0.0);
  }
  CHECK_THROWS_AS(build_spatial_index({}), InvariantError);
}

TEST_CASE("kd-tree equals exhaustive scan, ties included") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Eigen::Vector3f> pts;
    const bool grid = trial % 2;
    std::uniform_real_distribution<float> u(-2, 2);
    std::uniform_int_distribution<int> g(-3, 3);
    const int n = 1 + static_cast<int>(rng() % 1000);
    for (int i = 0; i < n; ++i) {
      if (grid) pts.emplace_back(g(rng) * 0.5f, g(rng) * 0.5f, g(rng) * 0.5f);  // many duplicates and ties
      else pts.emplace_back(u(rng), u(rng), u(rng));
    }
    const SceneIndex idx(pts, 1 + trial % 16);
    for (int q = 0; q < 1000; ++q) {
      const Eigen::Vector3d p = grid ? Eigen::Vector3d(g(rng) * 0.25, g(rng) * 0.25, g(rng) * 0.25)
                                     : Eigen::Vector3d(u(rng), u(rng), u(rng));
      const auto a = idx.nearest(p), b = reference::nearest_brute_force(pts, p);
      CHECK(a == b);
      const double r2 = 0.1;
      const auto w = idx.nearest_within(p, r2);
      CHECK(w.has_value() == (b.sq_distance <= r2));
      if (w) CHECK(*w == b);
    }
  }
}

TEST_CASE("radius gate is inclusive") {
  std::vector<Eigen::Vector3f> pts{{0, 0, 0}};
  const SceneIndex idx(pts);
  CHECK(idx.nearest_within({0.5, 0, 0}, 0.25).has_value());
  CHECK_FALSE(idx.nearest_within({0.5, 0, 0}, std::nextafter(0.25, 0.0)).has_value());
}
