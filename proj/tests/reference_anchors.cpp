// Anchors against the reference designs and their dimensions, reported
// separately from the acceptance suite. Exit status 1 when any anchor fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "evf/designer.hpp"
#include "evf/error.hpp"

using namespace evf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

EvaluateSettings eval_settings() { return EvaluateSettings{}; }

const DesignReport& reference_airhole_report() {
  static std::optional<DesignReport> rep;
  if (!rep) rep = evaluate(reference_airhole(), FilterSpec{}, eval_settings());
  return *rep;
}

FilterDesign initial(Topology t) {
  const FilterSpec spec;
  return initial_dims(spec, t, default_context(t, spec, 0.5 * mm));
}

RefineResult redesign(double bw) {
  FilterSpec spec;
  spec.bandwidth = bw;
  return redesign_fixed_length(spec, Housing{}, RefineSettings{});
}

const RefineResult& redesign_narrow() {
  static std::optional<RefineResult> r;
  if (!r) r = redesign(120 * MHz);
  return *r;
}

Outcome airhole_centre() {
  const auto& rep = reference_airhole_report();
  const double err = rep.center_frequency / 3.68e9 - 1.0;
  return {std::abs(err) <= 0.015, fmt("f_c %.4f GHz (%+.1f%%)", rep.center_frequency / GHz, 100 * err)};
}

Outcome airhole_spurious() {
  const auto& rep = reference_airhole_report();
  if (!rep.spurious) return {false, "no spurious band in the sweep"};
  return {std::abs(*rep.spurious - 4.8 * GHz) <= 0.3 * GHz, fmt("f_sp %.3f GHz", *rep.spurious / GHz)};
}

Outcome posts_loss() {
  auto es = eval_settings();
  es.tan_delta = 0.0053;
  es.find_spurious = false;
  es.f_stop = 3.6 * GHz;
  const auto rep = evaluate(reference_posts(), FilterSpec{}, es);
  return {rep.min_insertion_loss >= 3.0 && rep.min_insertion_loss <= 5.5,
          fmt("min in-band IL %.2f dB, passband centre %.4f GHz", rep.min_insertion_loss,
              rep.center_frequency / GHz)};
}

Outcome posts_gap() {
  const double l23 = initial(Topology::posts).posts.gaps[1];
  return {std::abs(l23 / (28.474 * mm) - 1.0) <= 0.10, fmt("l_23 %.3f mm", l23 / mm)};
}

Outcome airhole_hole() {
  const double r2 = initial(Topology::airhole).airhole.hole_rz[1];
  return {std::abs(r2 / (14.54 * mm) - 1.0) <= 0.15, fmt("r_2 %.3f mm", r2 / mm)};
}

Outcome narrow_step() {
  const double l1 = redesign_narrow().design.airhole.l_step;
  return {std::abs(l1) <= 1.0 * mm, fmt("l_1 %.3f mm", l1 / mm)};
}

Outcome wide_holes() {
  const double r2_narrow = redesign_narrow().design.airhole.hole_rz[1];
  const auto wide = redesign(175 * MHz);
  const double r2_wide = wide.design.airhole.hole_rz[1];
  return {r2_wide < r2_narrow && wide.design.airhole.l_step > 0.0,
          fmt("r_2 %.3f mm at 175 MHz vs %.3f mm at 120 MHz, l_1 %.3f mm", r2_wide / mm, r2_narrow / mm,
              wide.design.airhole.l_step / mm)};
}

}  // namespace

int main() {
  struct Anchor {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Anchor> anchors{
      {"reference air-hole filter: centre frequency within 1.5%", airhole_centre},
      {"reference air-hole filter: first spurious at 4.8 +- 0.3 GHz", airhole_spurious},
      {"reference posts filter, tan d = 0.0053: IL in [3.0, 5.5] dB", posts_loss},
      {"posts initial dimensions: l_23 within 10% of 28.474 mm", posts_gap},
      {"air-hole initial dimensions: r_2 within 15% of 14.54 mm", airhole_hole},
      {"fixed-housing redesign at the original bandwidth: l_1 near 0", narrow_step},
      {"fixed-housing redesign at 175 MHz: smaller inner holes", wide_holes},
  };
  int failed = 0;
  for (const auto& a : anchors) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = a.run();
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failed;
    std::cout << fmt("%s  %s: %s (%.1f s)", out.pass ? "PASS" : "FAIL", a.name, out.detail.c_str(), sec)
              << std::endl;
  }
  std::cout << (failed ? fmt("%d anchors failed", failed) : std::string("all anchors passed")) << std::endl;
  return failed ? 1 : 0;
}
