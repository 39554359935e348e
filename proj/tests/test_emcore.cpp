#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "evf/designer.hpp"
#include "evf/emcore.hpp"
#include "evf/error.hpp"
#include "scenes.hpp"

using namespace evf;
using evf::testing::random_scene;
using evf::testing::slab_stack;

namespace {

double oracle_error(double h) {
  const auto st = slab_stack();
  const auto grid = rasterize(scene_from_stack(st), h);
  FdfdSolver solver(grid);
  double worst = 0.0;
  for (double f = 3.0 * GHz; f <= 5.0 * GHz + 1.0; f += 0.1 * GHz) {
    const auto s = solver.solve(f);
    const auto o = tline_oracle(st, f);
    worst = std::max({worst, std::abs(s.s11 - o.s11), std::abs(s.s21 - o.s21),
                      std::abs(s.s12 - o.s12), std::abs(s.s22 - o.s22)});
  }
  return worst;
}

}  // namespace

TEST_CASE("cutoff frequencies") {
  CHECK(cutoff_frequency(30 * mm, 1.0, 1) == doctest::Approx(c0 / (2 * 30 * mm)).epsilon(1e-12));
  CHECK(cutoff_frequency(30 * mm, 1.0, 1) / GHz == doctest::Approx(4.997).epsilon(1e-4));
  CHECK(cutoff_frequency(30 * mm, 3.55, 1) / GHz == doctest::Approx(2.652).epsilon(1e-3));
  CHECK(cutoff_frequency(58.17 * mm, 1.0, 1) / GHz == doctest::Approx(2.577).epsilon(1e-3));
  CHECK(cutoff_frequency(30 * mm, 3.55, 1) < 3.68 * GHz);
  CHECK(cutoff_frequency(30 * mm, 1.0, 1) > 3.68 * GHz);
}

TEST_CASE("transmission-line oracle is lossless and reciprocal") {
  const auto st = slab_stack();
  for (double f : {3.0 * GHz, 3.7 * GHz, 4.9 * GHz}) {
    const auto o = tline_oracle(st, f);
    CHECK(std::norm(o.s11) + std::norm(o.s21) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(o.s12 - o.s21) < 1e-12);
  }
  LayerStack empty;
  empty.layers = {{20 * mm, 30 * mm, 3.55}};
  empty.port_eps_in = empty.port_eps_out = 3.55;
  const auto o = tline_oracle(empty, 4.0 * GHz);
  CHECK(std::abs(o.s11) < 1e-12);
  CHECK(std::abs(std::abs(o.s21) - 1.0) < 1e-12);
}

TEST_CASE("driven solver matches the oracle and converges") {
  const double e_coarse = oracle_error(0.5 * mm);
  const double e_fine = oracle_error(0.25 * mm);
  MESSAGE("oracle error h=0.5: " << e_coarse << ", h=0.25: " << e_fine);
  CHECK(e_fine <= 1e-2);
  CHECK(e_fine < e_coarse);
}

TEST_CASE("symmetric halving reproduces the full-domain solve") {
  std::mt19937 rng(7);
  const auto g = rasterize(random_scene(rng, true), 0.5 * mm);
  SolveOptions full;
  full.use_symmetry = false;
  FdfdSolver a(g), b(g, full);
  CHECK(a.unknowns() < b.unknowns());
  for (double f : {3.3 * GHz, 4.1 * GHz}) {
    const auto sa = a.solve(f), sb = b.solve(f);
    CHECK(std::abs(sa.s11 - sb.s11) < 1e-8);
    CHECK(std::abs(sa.s21 - sb.s21) < 1e-8);
  }
}

TEST_CASE("unitarity and reciprocity over a random scene corpus") {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> uf(3.0 * GHz, 5.0 * GHz);
  int scenes = 0;
  double worst_u = 0.0, worst_r = 0.0;
  for (int n = 0; n < 24; ++n) {
    const auto s = random_scene(rng, n % 3 == 0);
    FdfdSolver solver(rasterize(s, 0.5 * mm));
    for (int k = 0; k < 3; ++k) {
      const auto m = solver.solve(uf(rng));
      worst_u = std::max({worst_u, std::abs(std::norm(m.s11) + std::norm(m.s21) - 1.0),
                          std::abs(std::norm(m.s22) + std::norm(m.s12) - 1.0)});
      worst_r = std::max(worst_r, std::abs(m.s12 - m.s21));
    }
    ++scenes;
  }
  MESSAGE("worst unitarity " << worst_u << ", worst reciprocity " << worst_r);
  CHECK(scenes >= 20);
  CHECK(worst_u <= 1e-3);
  CHECK(worst_r <= 1e-8);
}

TEST_CASE("dielectric loss makes the network passive") {
  const auto g = rasterize(reference_posts().scene(0.0053), 0.5 * mm);
  FdfdSolver solver(g);
  for (double f : {3.1 * GHz, 3.2 * GHz, 3.68 * GHz, 4.6 * GHz}) {
    const auto m = solver.solve(f);
    CHECK(std::norm(m.s11) + std::norm(m.s21) < 1.0);
    CHECK(std::abs(m.s12 - m.s21) < 1e-8);
  }
}

TEST_CASE("grid convergence of transmission") {
  std::mt19937 rng(11);
  const auto s = random_scene(rng, true);
  std::vector<double> v;
  for (double h : {1.0 * mm, 0.5 * mm, 0.25 * mm, 0.125 * mm}) {
    v.push_back(std::abs(fdfd_solve(rasterize(s, h), 3.8 * GHz).s21));
  }
  MESSAGE("|S21| " << v[0] << " " << v[1] << " " << v[2] << " " << v[3]);
  const double d1 = std::abs(v[2] - v[1]), d2 = std::abs(v[3] - v[2]);
  MESSAGE("|S21| changes " << d1 << " then " << d2);
  CHECK(d2 < 0.5 * d1);
}

TEST_CASE("dielectric cavity resonance") {
  const double a = 30 * mm, d = 40 * mm, er = 3.55;
  Scene2D s;
  s.rects.push_back({-a / 2, a / 2, -d / 2, d / 2, Material{er, 0.0}});
  const double f101 = c0 / (2 * std::sqrt(er)) * std::sqrt(1 / (a * a) + 1 / (d * d));
  const auto r = resonant_frequencies(rasterize(s, 0.25 * mm), Symmetry::none, 0.8 * f101, 1.1 * f101);
  REQUIRE_FALSE(r.frequencies.empty());
  CHECK(std::abs(r.frequencies.front() / f101 - 1.0) < 2e-3);
}

TEST_CASE("full-domain eigenvalues are the union of even and odd") {
  Scene2D s;
  const double a = 30 * mm, d = 70 * mm;
  s.rects.push_back({-a / 2, a / 2, -d / 2, d / 2, Material{1.0, 0.0}});
  s.inclusions.push_back({0.0, -15 * mm, 12 * mm, 7 * mm, Material{3.55, 0.0}});
  s.inclusions.push_back({0.0, 15 * mm, 12 * mm, 7 * mm, Material{3.55, 0.0}});
  const auto g = rasterize(s, 0.5 * mm);
  const double lo = 2.0 * GHz, hi = 6.0 * GHz;
  const auto all = resonant_frequencies(g, Symmetry::none, lo, hi);
  auto even = resonant_frequencies(g, Symmetry::even, lo, hi).frequencies;
  const auto odd = resonant_frequencies(g, Symmetry::odd, lo, hi).frequencies;
  even.insert(even.end(), odd.begin(), odd.end());
  std::sort(even.begin(), even.end());
  REQUIRE(all.frequencies.size() == even.size());
  REQUIRE(even.size() >= 2);
  for (std::size_t i = 0; i < even.size(); ++i) {
    CHECK(all.frequencies[i] == doctest::Approx(even[i]).epsilon(1e-3));
  }
}

TEST_CASE("driven solve rejects closed scenes and evanescent ports") {
  Scene2D closed;
  closed.rects.push_back({-15 * mm, 15 * mm, -20 * mm, 20 * mm, Material{}});
  CHECK_THROWS_AS(FdfdSolver(rasterize(closed, 1 * mm)), Error);
  LayerStack st;
  st.layers = {{20 * mm, 30 * mm, 1.0}};
  FdfdSolver solver(rasterize(scene_from_stack(st), 1 * mm));
  try {
    (void)solver.solve(3.0 * GHz);
    FAIL("expected a modeling error for a port below cutoff");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::modeling);
  }
}
