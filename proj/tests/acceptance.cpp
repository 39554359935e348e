// End-to-end acceptance suite. One PASS/FAIL line per criterion; exit status 1
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evf/designer.hpp"
#include "evf/emcore.hpp"
#include "evf/error.hpp"
#include "scenes.hpp"

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

struct Options {
  double eval_h = 0.25 * mm;
  double refine_h = 0.5 * mm;
  int budget = 300;
  int threads = 1;
};

// Expensive results shared between criteria.
class Shared {
 public:
  explicit Shared(const Options& o) : opt_(o) {}

  const CurveSet& posts_curves() {
    if (!posts_curves_) {
      CurveSet cs;
      (void)initial_dims(FilterSpec{}, Topology::posts, context(Topology::posts), &cs);
      posts_curves_ = cs;
    }
    return *posts_curves_;
  }

  const RefineResult& posts_design() {
    if (!posts_) posts_ = synthesize(Topology::posts, posts_curves());
    return *posts_;
  }

  const DesignReport& posts_report() {
    if (!posts_report_) posts_report_ = evaluate(posts_design().design, FilterSpec{}, eval_settings());
    return *posts_report_;
  }

  const DesignReport& airhole_report() {
    if (!airhole_report_) {
      CurveSet cs;
      (void)initial_dims(FilterSpec{}, Topology::airhole, context(Topology::airhole), &cs);
      const auto r = synthesize(Topology::airhole, cs);
      airhole_report_ = evaluate(r.design, FilterSpec{}, eval_settings());
    }
    return *airhole_report_;
  }

  CurveContext context(Topology t) const { return default_context(t, FilterSpec{}, opt_.refine_h); }

  RefineSettings refine_settings() const {
    RefineSettings rs;
    rs.h = opt_.refine_h;
    rs.max_evaluations = opt_.budget;
    rs.threads = opt_.threads;
    return rs;
  }

  EvaluateSettings eval_settings() const {
    EvaluateSettings es;
    es.h = opt_.eval_h;
    es.threads = opt_.threads;
    return es;
  }

 private:
  RefineResult synthesize(Topology t, CurveSet cs) {
    const auto start = initial_dims(FilterSpec{}, t, context(t), &cs);
    return refine(start, FilterSpec{}, refine_settings());
  }

  Options opt_;
  std::optional<CurveSet> posts_curves_;
  std::optional<RefineResult> posts_;
  std::optional<DesignReport> posts_report_, airhole_report_;
};

bool within(double v, double target, double tol) { return std::abs(v - target) <= tol; }

Outcome coupling_matrix(Shared&) {
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  const double ms1 = m.source_coupling(), m12 = m.resonator_coupling(1, 2),
               m23 = m.resonator_coupling(2, 3);
  const bool ok = within(ms1, 1.0137, 1e-3) && within(m12, 0.8653, 1e-3) && within(m23, 0.6357, 1e-3) &&
                  within(m.load_coupling(), ms1, 1e-12) && within(m.resonator_coupling(4, 5), m12, 1e-12) &&
                  within(m.resonator_coupling(3, 4), m23, 1e-12);
  return {ok, fmt("M_S1 %.4f, M_12 %.4f, M_23 %.4f", ms1, m12, m23)};
}

Outcome external_q(Shared&) {
  const double q = qext_required(FilterSpec{}, 1.0137);
  return {within(q, 29.84, 0.01), fmt("Q_ext %.4f", q)};
}

Outcome circuit_response(Shared&) {
  const FilterSpec spec;
  const auto m = prototype_to_coupling(synth_prototype(5, 20.0));
  auto s11db = [&](double f) {
    const std::vector<double> one{f};
    return to_db(std::abs(cm_response(m, spec, lossless, one).s11[0]));
  };
  const double f1 = spec.center_frequency - 0.2 * GHz, f2 = spec.center_frequency + 0.2 * GHz;
  std::vector<double> f;
  for (int i = 0; i <= 8000; ++i) f.push_back(f1 + (f2 - f1) * i / 8000.0);
  const auto r = cm_response(m, spec, lossless, f);
  std::vector<double> db;
  for (const auto& s : r.s11) db.push_back(to_db(std::abs(s)));
  // Outermost -20 dB crossings, bisected.
  std::size_t lo = 0, hi = db.size() - 1;
  while (lo < db.size() && db[lo] > -20.0) ++lo;
  while (hi > 0 && db[hi] > -20.0) --hi;
  if (lo == 0 || hi + 1 >= db.size() || lo >= hi) return {false, "no -20 dB band found"};
  auto bisect = [&](double a, double b) {
    const bool a_above = s11db(a) > -20.0;
    for (int k = 0; k < 60; ++k) {
      const double c = 0.5 * (a + b);
      ((s11db(c) > -20.0) == a_above ? a : b) = c;
    }
    return 0.5 * (a + b);
  };
  const double e1 = bisect(f[lo - 1], f[lo]), e2 = bisect(f[hi], f[hi + 1]);
  double worst = -1e9;
  int zeros = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    if (f[i] > e1 + 1 * MHz && f[i] < e2 - 1 * MHz) worst = std::max(worst, db[i]);
    if (db[i] < db[i - 1] && db[i] < db[i + 1] && db[i] < -35.0) ++zeros;
  }
  const double fc = spec.center_frequency;
  const bool ok = within(worst, -20.0, 0.1) && zeros == 5 && within(e1, fc - 60 * MHz, 1 * MHz) &&
                  within(e2, fc + 60 * MHz, 1 * MHz);
  return {ok, fmt("max in-band S11 %.3f dB, %d zeros, edges %.4f / %.4f GHz", worst, zeros, e1 / GHz,
                  e2 / GHz)};
}

Outcome oracle(Shared&) {
  const auto st = testing::slab_stack();
  auto error = [&](double h) {
    FdfdSolver solver(rasterize(scene_from_stack(st), h));
    double worst = 0.0;
    for (int k = 0; k <= 40; ++k) {
      const double f = 3.0 * GHz + k * 50 * MHz;
      const auto s = solver.solve(f);
      const auto o = tline_oracle(st, f);
      worst = std::max({worst, std::abs(s.s11 - o.s11), std::abs(s.s21 - o.s21), std::abs(s.s12 - o.s12),
                        std::abs(s.s22 - o.s22)});
    }
    return worst;
  };
  const double e1 = error(0.5 * mm), e2 = error(0.25 * mm);
  return {e2 <= 1e-2 && e2 < e1, fmt("max |S - S_oracle| %.2e at h = 0.25 mm, %.2e at 0.5 mm", e2, e1)};
}

Outcome cavity(Shared&) {
  const double a = 30 * mm, d = 40 * mm, er = 3.55;
  Scene2D s;
  s.rects.push_back({-a / 2, a / 2, -d / 2, d / 2, Material{er, 0.0}});
  const double f101 = c0 / (2 * std::sqrt(er)) * std::sqrt(1 / (a * a) + 1 / (d * d));
  const auto r = resonant_frequencies(rasterize(s, 0.25 * mm), Symmetry::none, 0.8 * f101, 1.1 * f101);
  if (r.frequencies.empty()) return {false, "no resonance found"};
  const double err = r.frequencies.front() / f101 - 1.0;
  return {std::abs(err) < 2e-3, fmt("f_101 %.5f GHz vs %.5f GHz (%.3f%%)", r.frequencies.front() / GHz,
                                    f101 / GHz, 100 * err)};
}

Outcome unitarity(Shared&) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> uf(3.0 * GHz, 5.0 * GHz);
  const int scenes = 24;
  double worst_u = 0.0, worst_r = 0.0;
  for (int n = 0; n < scenes; ++n) {
    FdfdSolver solver(rasterize(testing::random_scene(rng, n % 3 == 0), 0.5 * mm));
    for (int k = 0; k < 3; ++k) {
      const auto m = solver.solve(uf(rng));
      worst_u = std::max({worst_u, std::abs(std::norm(m.s11) + std::norm(m.s21) - 1.0),
                          std::abs(std::norm(m.s22) + std::norm(m.s12) - 1.0)});
      worst_r = std::max(worst_r, std::abs(m.s12 - m.s21));
    }
  }
  return {worst_u <= 1e-3 && worst_r <= 1e-8,
          fmt("%d scenes, worst unitarity %.1e, worst reciprocity %.1e", scenes, worst_u, worst_r)};
}

Outcome curve_anchors(Shared& sh) {
  const auto& cs = sh.posts_curves();
  std::ostringstream os;
  bool ok = true;
  try {
    const double l23 = invert_curve(*cs.coupling, 0.6357);
    ok &= within(l23, 28.5 * mm, 1.5 * mm);
    os << fmt("l_23(M = 0.6357) %.2f mm", l23 / mm);
  } catch (const Error& e) {
    ok = false;
    os << "l_23: " << e.what();
  }
  try {
    const double ls1 = invert_curve(*cs.qext, 100.0);
    ok &= within(ls1, 16 * mm, 2 * mm);
    os << fmt(", l_s1(Q_ext = 100) %.2f mm", ls1 / mm);
  } catch (const Error& e) {
    ok = false;
    os << ", l_s1: " << e.what();
  }
  const auto gen = em_generator(CurveVariable::overhang, sh.context(Topology::airhole));
  std::vector<double> q;
  for (int ld = 1; ld <= 12; ++ld) q.push_back(gen(ld * mm, 0.0).value);
  bool decreasing = true;
  for (std::size_t i = 1; i < q.size(); ++i) decreasing &= q[i] < q[i - 1];
  const double slope3 = std::abs(q[3] - q[1]) / 2, slope9 = std::abs(q[9] - q[7]) / 2;
  const bool saturating = slope9 < 0.25 * slope3;
  ok &= decreasing && saturating;
  os << ", Q_ext(l_d = 1..12 mm)";
  for (double v : q) os << fmt(" %.1f", v);
  os << (decreasing ? " decreasing" : " not decreasing") << (saturating ? ", saturating" : ", not saturating");
  return {ok, os.str()};
}

Outcome posts_design(Shared& sh) {
  const FilterSpec spec;
  const auto& rr = sh.posts_design();
  const auto& rep = sh.posts_report();
  auto lossy = sh.eval_settings();
  lossy.tan_delta = 0.0053;
  lossy.find_spurious = false;
  lossy.f_start = 3.4 * GHz;
  lossy.f_stop = 4.0 * GHz;
  const auto loss = evaluate(rr.design, spec, lossy);
  const bool ok = rep.edges_from_return_loss && rep.min_return_loss >= 19.0 &&
                  std::abs(rep.center_frequency / spec.center_frequency - 1.0) <= 0.01 &&
                  std::abs(rep.bandwidth / spec.bandwidth - 1.0) <= 0.10 && loss.min_insertion_loss >= 3.0 &&
                  loss.min_insertion_loss <= 5.5;
  return {ok, fmt("refine %.3g -> %.3g in %d simulations; RL %.2f dB, f_c %.4f GHz, BW %.1f MHz, "
                  "IL(tan d = 0.0053) %.2f dB",
                  rr.initial_objective, rr.objective, rr.evaluations, rep.min_return_loss,
                  rep.center_frequency / GHz, rep.bandwidth / MHz, loss.min_insertion_loss)};
}

Outcome spurious(Shared& sh) {
  bool ok = true;
  std::ostringstream os;
  for (const auto& [name, rep] : {std::pair<const char*, const DesignReport*>{"posts", &sh.posts_report()},
                                  {"air-hole", &sh.airhole_report()}}) {
    os << (os.tellp() > 0 ? "; " : "") << name << ": ";
    if (!rep->spurious) {
      ok = false;
      os << "no spurious band below " << fmt("%.2f GHz", rep->response.frequencies.back() / GHz);
      continue;
    }
    ok &= within(*rep->spurious, 4.8 * GHz, 0.3 * GHz) && within(*rep->sfr, 1.0 * GHz, 0.3 * GHz);
    os << fmt("f_sp %.3f GHz, SFR %.3f GHz", *rep->spurious / GHz, *rep->sfr / GHz);
  }
  return {ok, os.str()};
}

Outcome fixed_housing(Shared& sh) {
  FilterSpec spec2;
  spec2.bandwidth = 175 * MHz;
  const Housing housing;
  const auto rr = redesign_fixed_length(spec2, housing, sh.refine_settings());
  const auto& d = rr.design.airhole;
  const auto rep = evaluate(rr.design, spec2, sh.eval_settings());
  const double r2_ref = reference_airhole().airhole.hole_rz[1];
  const bool ok = std::abs(rr.design.l_ev() - housing.l_ev) <= 1e-12 && d.l_step > 5 * mm &&
                  d.l_step < 12 * mm && d.hole_rz[1] < r2_ref && rep.edges_from_return_loss &&
                  rep.min_return_loss >= 15.0 && std::abs(rep.bandwidth / spec2.bandwidth - 1.0) <= 0.10;
  return {ok, fmt("l_ev %.6f mm, l_1 %.3f mm, r_2 %.3f mm (reference %.2f), RL %.2f dB, BW %.1f MHz",
                  rr.design.l_ev() / mm, d.l_step / mm, d.hole_rz[1] / mm, r2_ref / mm, rep.min_return_loss,
                  rep.bandwidth / MHz)};
}

Outcome loss_monotonicity(Shared& sh) {
  const auto d = reference_posts();
  auto es = sh.eval_settings();
  es.find_spurious = false;
  es.f_start = 3.0 * GHz;
  es.f_stop = 3.6 * GHz;
  std::vector<double> il;
  std::ostringstream os;
  for (double td : {0.0, 0.0023, 0.0046, 0.0053}) {
    es.tan_delta = td;
    il.push_back(evaluate(d, FilterSpec{}, es).min_insertion_loss);
    os << (il.size() > 1 ? ", " : "IL ") << fmt("%.3f", il.back());
  }
  bool ok = il[0] <= 0.1;
  for (std::size_t i = 1; i < il.size(); ++i) ok &= il[i] > il[i - 1];
  os << " dB at tan d = 0, 0.0023, 0.0046, 0.0053";
  return {ok, os.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  Options opt;
  double eval_h_mm = opt.eval_h / mm, refine_h_mm = opt.refine_h / mm;
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',');
  app.add_option("--eval-h", eval_h_mm, "Evaluation grid in mm");
  app.add_option("--refine-h", refine_h_mm, "Curve and refinement grid in mm");
  app.add_option("--budget", opt.budget, "Refinement budget in simulations");
  app.add_option("--threads,-j", opt.threads, "Worker threads");
  CLI11_PARSE(app, argc, argv);
  opt.eval_h = eval_h_mm * mm;
  opt.refine_h = refine_h_mm * mm;

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome(Shared&)> run;
  };
  const std::vector<Criterion> criteria{
      {1, "coupling matrix", coupling_matrix},
      {2, "external Q", external_q},
      {3, "circuit response", circuit_response},
      {4, "slab-loaded guide vs transmission-line oracle", oracle},
      {5, "dielectric cavity resonance", cavity},
      {6, "unitarity and reciprocity corpus", unitarity},
      {7, "design curve anchors", curve_anchors},
      {8, "end-to-end posts design", posts_design},
      {9, "spurious-free range", spurious},
      {10, "fixed-housing redesign", fixed_housing},
      {11, "loss monotonicity", loss_monotonicity},
  };
  const std::set<int> selected(only.begin(), only.end());
  Shared shared(opt);
  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run(shared);
    } catch (const std::exception& e) {
      out = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!out.pass) ++failed;
    std::cout << fmt("criterion %2d %s  %s: %s (%.1f s)", c.id, out.pass ? "PASS" : "FAIL", c.name,
                     out.detail.c_str(), sec)
              << std::endl;
  }
  std::cout << (failed ? fmt("%d criteria failed", failed) : std::string("all criteria passed")) << std::endl;
  return failed ? 1 : 0;
}
