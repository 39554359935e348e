#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "evf/error.hpp"
#include "evf/io.hpp"

using namespace evf;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
[spec]
order = 5
return_loss = 20
center_frequency = 3.68   # GHz
bandwidth = 0.12
topology = "posts"
)";

Error parse_error(const std::string& text) {
  try {
    (void)parse_config(text);
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected a parse error");
  return Error(ErrorCode::io, "");
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("evf_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
  const auto c = parse_config(kMinimal);
  CHECK(c.spec.order == 5);
  CHECK(c.spec.return_loss == 20.0);
  CHECK(c.spec.center_frequency == doctest::Approx(3.68e9));
  CHECK(c.spec.bandwidth == doctest::Approx(120e6));
  CHECK(c.topology == Topology::posts);
  CHECK_FALSE(c.geometry.has_value());
  CHECK(c.numerics == NumericsConfig{});
  CHECK(c.numerics.f_start == doctest::Approx(3.0e9));
  CHECK(c.numerics.f_stop == doctest::Approx(5.2e9));
  CHECK(c.output_dir == "out");
}

TEST_CASE("config errors name the field and line") {
  const std::string neg = R"([spec]
order = 5
return_loss = 20
center_frequency = 3.68
bandwidth = -0.12
topology = "posts"
)";
  auto e = parse_error(neg);
  CHECK(e.code() == ErrorCode::parse);
  CHECK(std::string(e.what()).find("bandwidth") != std::string::npos);
  CHECK(std::string(e.what()).find("line 5") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "colour = 3\n");
  CHECK(std::string(e.what()).find("colour") != std::string::npos);

  e = parse_error("[spec]\norder = 5\n");
  CHECK(std::string(e.what()).find("return_loss") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[widgets]\nx = 1\n");
  CHECK(std::string(e.what()).find("widgets") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[numerics]\nthreads = 1.5\n");
  CHECK(std::string(e.what()).find("threads") != std::string::npos);

  e = parse_error(std::string(kMinimal) + "[geometry]\nl_s1 = 1\ngaps = [20]\n");
  CHECK(std::string(e.what()).find("post_rz") != std::string::npos);
}

TEST_CASE("config with geometry and housing round trips") {
  const std::string text = std::string(kMinimal) + R"(
[geometry]
l_s1 = -0.439
gaps = [24.6, 28.474]
post_rz = [13.619, 14.208, 14.219]
l_port = 15

[numerics]
h = 0.4
tan_delta = 0.0053
threads = 2
f_start = 3.1
refine_budget = 120

[curves]
variables = ["post_gap"]
lo = 12
hi = 40
samples = 7

[output]
directory = "results/posts"
)";
  const auto c = parse_config(text);
  REQUIRE(c.geometry.has_value());
  CHECK(c.geometry->posts.gaps[1] == doctest::Approx(28.474e-3));
  CHECK(c.geometry->l_tot() == doctest::Approx(275.016e-3).epsilon(1e-9));
  const auto again = parse_config(emit_config(c));
  CHECK(again == c);
  CHECK(emit_config(again) == emit_config(c));

  auto h = c;
  h.topology = Topology::airhole;
  h.geometry = reference_airhole_wideband();
  h.curves = {};
  h.housing = Housing{};
  CHECK(parse_config(emit_config(h)) == h);
}

TEST_CASE("round trip holds for awkward values") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.5, 40.0);
  for (int k = 0; k < 200; ++k) {
    RunConfig c;
    c.spec.center_frequency = u(rng) * 0.1 * GHz + 1.0 * GHz;
    c.spec.bandwidth = u(rng) * 3.7 * MHz;
    c.spec.return_loss = u(rng);
    FilterDesign d = reference_posts();
    d.posts.gaps = {u(rng) * mm, u(rng) * mm};
    d.posts.l_s1 = (u(rng) - 5.0) * mm;
    c.geometry = d;
    c.numerics.h = u(rng) * 0.0173 * mm;
    REQUIRE(parse_config(emit_config(c)) == c);
  }
}

TEST_CASE("touchstone rows") {
  SParamSet s;
  s.frequencies = {3.68e9};
  s.s = {SMatrix2{1.0, 0.0, 0.0, 1.0}};
  const auto text = format_touchstone(s);
  CHECK(text.find("# GHz S RI R 50\n") != std::string::npos);
  CHECK(text.find("\n3.68 1 0 0 0 0 0 1 0\n") != std::string::npos);
  const auto back = parse_touchstone(text);
  REQUIRE(back.data.size() == 1);
  CHECK(back.data.frequencies[0] == doctest::Approx(3.68e9).epsilon(1e-15));
}

TEST_CASE("touchstone file round trip") {
  std::mt19937 rng(3);
  std::normal_distribution<double> n(0.0, 0.5);
  SParamSet s;
  for (int i = 0; i < 50; ++i) {
    s.frequencies.push_back(3.0e9 + i * 44.123456789e6);
    s.s.push_back({{n(rng), n(rng)}, {n(rng), n(rng)}, {n(rng), n(rng)}, {n(rng), n(rng)}});
  }
  const auto dir = temp_dir("ts");
  const auto path = dir / "a.s2p";
  write_touchstone(s, path, "first line\nsecond line");
  const auto back = read_touchstone(path);
  REQUIRE(back.data.size() == s.size());
  CHECK(back.comments.size() >= 2);
  CHECK(back.comments[0] == "first line");
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(back.data.frequencies[i] / s.frequencies[i] - 1.0) < 1e-9);
    for (auto [a, b] : {std::pair{s.s[i].s11, back.data.s[i].s11}, {s.s[i].s21, back.data.s[i].s21},
                        {s.s[i].s12, back.data.s[i].s12}, {s.s[i].s22, back.data.s[i].s22}}) {
      CHECK(std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)));
    }
  }
  std::ifstream in(path);
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '!' || line[0] == '#') continue;
    std::istringstream ls(line);
    int cols = 0;
    double v;
    while (ls >> v) ++cols;
    CHECK(cols == 9);
    ++rows;
  }
  CHECK(rows == 50);
  fs::remove_all(dir);
}

TEST_CASE("touchstone writer refuses bad data") {
  SParamSet empty;
  CHECK_THROWS_AS((void)format_touchstone(empty), Error);
  SParamSet unsorted;
  unsorted.frequencies = {2e9, 1e9};
  unsorted.s.resize(2);
  CHECK_THROWS_AS((void)format_touchstone(unsorted), Error);
  try {
    write_touchstone(unsorted, "/nonexistent_dir_zz/x.s2p");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
  }
  SParamSet one;
  one.frequencies = {1e9};
  one.s.resize(1);
  try {
    write_touchstone(one, "/proc/evf_cannot_write/x.s2p");
    FAIL("expected an io error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io);
    CHECK(std::string(e.what()).find("/proc/evf_cannot_write") != std::string::npos);
  }
}

TEST_CASE("curve csv carries its context") {
  CurveContext ctx;
  const auto c = sweep_curve(CurveVariable::overhang, ctx,
                             [](double p, double) { return CurveSample{100.0 - p / mm, 20 * mm}; },
                             1 * mm, 12 * mm, 5);
  const auto text = format_csv(c, "config line");
  for (const char* key : {"# a_ev = 30 mm", "# l_d = 7 mm", "# eps_r = 3.55", "# f_c = 3.68 GHz",
                          "# variable = overhang", "# config line"}) {
    CHECK_MESSAGE(text.find(key) != std::string::npos, key);
  }
  std::istringstream in(text);
  std::string line;
  int data = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.rfind("#", 0) == 0) continue;
    if (!header) {
      header = true;
      continue;
    }
    ++data;
  }
  CHECK(data == 5);
}

TEST_CASE("report outputs") {
  DesignReport r;
  r.center_frequency = 3.68e9;
  r.bandwidth = 120e6;
  r.f_lower = 3.62e9;
  r.f_upper = 3.74e9;
  r.min_return_loss = 20.1;
  r.min_insertion_loss = 0.01;
  r.spurious = 4.8e9;
  r.sfr = 1.06e9;
  r.design = reference_posts();
  r.response.frequencies = {3.6e9, 3.7e9};
  r.response.s = {SMatrix2{0.5, 0.5, 0.5, 0.5}, SMatrix2{0.01, 1.0, 1.0, 0.01}};
  const auto csv = format_csv(r, "cfg");
  CHECK(csv.find("# sfr_ghz = 1.06") != std::string::npos);
  CHECK(csv.find("f_ghz,s11_db,s21_db") != std::string::npos);
  const auto rep = format_report(r, FilterSpec{});
  CHECK(rep.find("[geometry]") != std::string::npos);
  CHECK(rep.find("first_spurious") != std::string::npos);
  // The geometry block of a report parses back into the same design.
  const auto g = rep.substr(rep.find("[geometry]"));
  const auto c = parse_config(std::string(kMinimal) + g);
  REQUIRE(c.geometry.has_value());
  CHECK(*c.geometry == reference_posts());
}
