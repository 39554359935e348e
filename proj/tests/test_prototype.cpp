#include <doctest.h>

#include <cmath>
#include <vector>

#include "evf/error.hpp"
#include "evf/prototype.hpp"

using namespace evf;

namespace {

FilterSpec base_spec() { return FilterSpec{5, 20.0, 3.68 * GHz, 120.0 * MHz}; }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(a + (b - a) * i / (n - 1));
  return v;
}

}  // namespace

TEST_CASE("ripple from return loss") {
  const double eps = 1.0 / std::sqrt(100.0 - 1.0);
  CHECK(ripple_from_return_loss(20.0) == doctest::Approx(10.0 * std::log10(1.0 + eps * eps)).epsilon(1e-12));
  CHECK(synth_prototype(5, 20.0).ripple_db == doctest::Approx(0.04365).epsilon(1e-3));
}

TEST_CASE("prototype is symmetric for odd order") {
  const auto p = synth_prototype(5, 20.0);
  REQUIRE(p.g.size() == 7);
  CHECK(p.g[1] == doctest::Approx(p.g[5]).epsilon(1e-12));
  CHECK(p.g[2] == doctest::Approx(p.g[4]).epsilon(1e-12));
  CHECK(p.g[0] == 1.0);
  CHECK(p.g[6] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("g values against the closed-form recursion") {
  // Independent evaluation of the classic Chebyshev recursion.
  const int n = 5;
  const double rip = ripple_from_return_loss(20.0);
  const double beta = std::log(std::cosh(rip / 17.37) / std::sinh(rip / 17.37));
  const double gam = std::sinh(beta / (2 * n));
  std::vector<double> a(n + 1), b(n + 1), g(n + 1);
  for (int k = 1; k <= n; ++k) {
    a[k] = std::sin((2 * k - 1) * pi / (2 * n));
    b[k] = gam * gam + std::pow(std::sin(k * pi / n), 2);
  }
  g[1] = 2 * a[1] / gam;
  for (int k = 2; k <= n; ++k) g[k] = 4 * a[k - 1] * a[k] / (b[k - 1] * g[k - 1]);
  const auto p = synth_prototype(n, 20.0);
  for (int k = 1; k <= n; ++k) CHECK(p.g[k] == doctest::Approx(g[k]).epsilon(1e-4));
}

TEST_CASE("coupling matrix values") {
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  CHECK(std::abs(m.source_coupling() - 1.0137) <= 1e-3);
  CHECK(std::abs(m.load_coupling() - 1.0137) <= 1e-3);
  CHECK(std::abs(m.resonator_coupling(1, 2) - 0.8653) <= 1e-3);
  CHECK(std::abs(m.resonator_coupling(4, 5) - 0.8653) <= 1e-3);
  CHECK(std::abs(m.resonator_coupling(2, 3) - 0.6357) <= 1e-3);
  CHECK(std::abs(m.resonator_coupling(3, 4) - 0.6357) <= 1e-3);
  CHECK(m.source_coupling() == doctest::Approx(m.load_coupling()).epsilon(1e-12));
  for (int i = 0; i < 7; ++i) {
    for (int j = 0; j < 7; ++j) {
      if (std::abs(i - j) != 1) CHECK(m.values(i, j) == 0.0);
    }
  }
}

TEST_CASE("coupling matrix construction rule") {
  for (int n : {1, 2, 3, 4, 6, 7}) {
    const auto p = synth_prototype(n, 15.0);
    const auto m = prototype_to_coupling(p);
    CHECK(m.source_coupling() == doctest::Approx(1.0 / std::sqrt(p.g[0] * p.g[1])));
    for (int i = 1; i < n; ++i) {
      CHECK(m.resonator_coupling(i, i + 1) == doctest::Approx(1.0 / std::sqrt(p.g[i] * p.g[i + 1])));
    }
    CHECK(m.source_coupling() == doctest::Approx(m.load_coupling()));
  }
}

TEST_CASE("external Q") {
  const auto spec = base_spec();
  CHECK(std::abs(qext_required(spec, 1.0137) - 29.84) <= 0.01);
  FilterSpec s100{5, 20.0, 3.0 * GHz, 30.0 * MHz};
  CHECK(qext_required(s100, 1.0) == doctest::Approx(100.0).epsilon(1e-12));
  FilterSpec half = spec;
  half.bandwidth /= 2;
  CHECK(qext_required(half, 1.0137) == doctest::Approx(2 * qext_required(spec, 1.0137)).epsilon(1e-12));
  FilterSpec zero = spec;
  zero.bandwidth = 0;
  CHECK_THROWS_AS((void)qext_required(zero, 1.0), Error);
}

TEST_CASE("invalid inputs") {
  CHECK_THROWS_AS((void)synth_prototype(0, 20.0), Error);
  CHECK_THROWS_AS((void)synth_prototype(5, 0.0), Error);
  CHECK_THROWS_AS((void)synth_prototype(5, -3.0), Error);
  try {
    (void)synth_prototype(-1, 20.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_spec);
  }
}

TEST_CASE("band edges") {
  const auto [f1, f2] = base_spec().band_edges();
  CHECK(f2 - f1 == doctest::Approx(120.0 * MHz).epsilon(1e-12));
  CHECK(std::sqrt(f1 * f2) == doctest::Approx(3.68 * GHz).epsilon(1e-12));
}

TEST_CASE("circuit response is equiripple with five reflection zeros") {
  const auto spec = base_spec();
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  const auto [f1, f2] = spec.band_edges();
  const auto f = linspace(f1, f2, 4001);
  const auto r = cm_response(m, spec, lossless, f);
  double worst = -1e9;
  int zeros = 0;
  std::vector<double> db;
  for (const auto& s : r.s11) db.push_back(to_db(std::abs(s)));
  for (std::size_t i = 0; i < db.size(); ++i) {
    worst = std::max(worst, db[i]);
    if (i > 0 && i + 1 < db.size() && db[i] < db[i - 1] && db[i] < db[i + 1] && db[i] < -35) ++zeros;
  }
  CHECK(std::abs(worst + 20.0) <= 0.1);
  CHECK(zeros == 5);
  const std::vector<double> edges{f1, f2};
  const auto e = cm_response(m, spec, lossless, edges);
  for (const auto& s : e.s11) CHECK(std::abs(to_db(std::abs(s)) + 20.0) <= 0.2);
  const std::vector<double> centre{spec.center_frequency};
  CHECK(to_db(std::abs(cm_response(m, spec, lossless, centre).s11[0])) < -60.0);
}

TEST_CASE("circuit response unitarity and reciprocity") {
  const auto spec = base_spec();
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  const auto f = linspace(3.0 * GHz, 4.4 * GHz, 701);
  const auto r = cm_response(m, spec, lossless, f);
  CHECK(r.source == ResponseSource::circuit);
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(std::norm(r.s11[i]) + std::norm(r.s21[i]) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK_FALSE(r.singular[i]);
  }
}

TEST_CASE("loss estimate and circuit loss agree") {
  const auto spec = base_spec();
  const auto p = synth_prototype(5, 20.0);
  const auto m = prototype_to_coupling(p);
  const std::vector<double> centre{spec.center_frequency};
  for (double qu : {305.75, 303.57}) {
    const double il_circuit = -to_db(std::abs(cm_response(m, spec, qu, centre).s21[0]));
    CHECK(std::abs(il_from_qu(spec, p, qu) - il_circuit) <= 0.3);
  }
  CHECK(il_from_qu(spec, p, 1e12) < 1e-6);
  for (double qu : {50.0, 305.75, 2000.0}) {
    CHECK(qu_from_il(spec, p, il_from_qu(spec, p, qu)) == doctest::Approx(qu).epsilon(1e-9));
  }
}

TEST_CASE("centre loss increases as unloaded Q falls") {
  const auto spec = base_spec();
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  const std::vector<double> centre{spec.center_frequency};
  double prev = -1.0;
  for (double qu : {5000.0, 1000.0, 300.0, 100.0}) {
    const double il = -to_db(std::abs(cm_response(m, spec, qu, centre).s21[0]));
    CHECK(il > prev);
    prev = il;
  }
}

TEST_CASE("cm_response rejects unsorted frequencies") {
  const auto spec = base_spec();
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  const std::vector<double> f{3.7e9, 3.6e9};
  CHECK_THROWS_AS((void)cm_response(m, spec, lossless, f), Error);
}
