#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "evf/designer.hpp"
#include "evf/error.hpp"
#include "evf/io.hpp"

namespace fs = std::filesystem;
using namespace evf;

namespace {

struct Flags {
  std::string config;
  std::string out;
  double grid_h = 0;  // mm
  int threads = 0;
  std::string band;   // "start:stop" in GHz
};

RunConfig resolve(const Flags& flags, const std::string& command) {
  RunConfig c = load_config(flags.config);
  c.subcommand = command;
  if (!flags.out.empty()) c.output_dir = flags.out;
  if (flags.threads > 0) c.numerics.threads = flags.threads;
  if (flags.grid_h > 0) {
    c.numerics.h = flags.grid_h * mm;
    c.numerics.eval_h = flags.grid_h * mm;
  }
  if (!flags.band.empty()) {
    const auto colon = flags.band.find(':');
    double lo = 0, hi = 0;
    try {
      if (colon == std::string::npos) throw std::invalid_argument("no colon");
      lo = std::stod(flags.band.substr(0, colon));
      hi = std::stod(flags.band.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::parse, "--band expects START:STOP in GHz, got '" + flags.band + "'");
    }
    if (!(lo > 0 && hi > lo)) throw Error(ErrorCode::parse, "--band needs 0 < START < STOP");
    c.numerics.f_start = lo * GHz;
    c.numerics.f_stop = hi * GHz;
  }
  return c;
}

std::string header(const RunConfig& c) { return emit_config(c); }

const FilterDesign& require_geometry(const RunConfig& c) {
  if (!c.geometry) {
    throw Error(ErrorCode::parse, "the " + c.subcommand + " command needs a [geometry] section");
  }
  return *c.geometry;
}

std::vector<double> sweep_points(const NumericsConfig& n) {
  std::vector<double> f;
  const int count = static_cast<int>(std::floor((n.f_stop - n.f_start) / n.coarse_step + 1e-9));
  for (int i = 0; i <= count; ++i) f.push_back(n.f_start + i * n.coarse_step);
  if (f.back() < n.f_stop - 1.0) f.push_back(n.f_stop);
  return f;
}

int run_prototype(const RunConfig& c) {
  c.spec.validate();
  const auto p = synth_prototype(c.spec.order, c.spec.return_loss);
  const auto cm = prototype_to_coupling(p);
  const auto [f1, f2] = c.spec.band_edges();
  std::ostringstream os;
  char buf[128];
  os << "order " << c.spec.order << ", return loss " << c.spec.return_loss << " dB\n";
  std::snprintf(buf, sizeof buf, "ripple %.6f dB\n", p.ripple_db);
  os << buf << "g:";
  for (double g : p.g) {
    std::snprintf(buf, sizeof buf, " %.5f", g);
    os << buf;
  }
  os << "\n\ncoupling matrix (S, 1..N, L):\n";
  for (int i = 0; i < cm.values.rows(); ++i) {
    for (int j = 0; j < cm.values.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%9.4f", cm.values(i, j));
      os << buf;
    }
    os << "\n";
  }
  std::snprintf(buf, sizeof buf, "\nQ_ext %.3f\nband edges %.6f / %.6f GHz\n",
                qext_required(c.spec, cm.source_coupling()), f1 / GHz, f2 / GHz);
  os << buf;
  std::cout << os.str();

  SParamSet s;
  s.frequencies = sweep_points(c.numerics);
  const auto resp = cm_response(cm, c.spec, lossless, s.frequencies);
  for (std::size_t i = 0; i < resp.size(); ++i) {
    s.s.push_back(SMatrix2{resp.s11[i], resp.s21[i], resp.s21[i], resp.s11[i]});
  }
  const fs::path dir = c.output_dir;
  write_text(dir / "prototype.txt", as_comment(header(c)) + os.str());
  write_touchstone(s, dir / "circuit.s2p", header(c));
  return 0;
}

int run_curves(const RunConfig& c) {
  auto vars = c.curves.variables;
  if (vars.empty()) {
    vars = c.topology == Topology::posts
               ? std::vector{CurveVariable::post_gap, CurveVariable::step_gap}
               : std::vector{CurveVariable::hole_rz, CurveVariable::input_hole};
  }
  CurveContext ctx = default_context(c.topology, c.spec, c.numerics.h);
  std::vector<DesignCurve> curves;
  for (auto v : vars) {
    auto r = default_range(v);
    if (c.curves.lo) r.lo = *c.curves.lo;
    if (c.curves.hi) r.hi = *c.curves.hi;
    if (c.curves.samples) r.n = *c.curves.samples;
    std::cerr << "sweeping " << to_string(v) << " over [" << r.lo / mm << ", " << r.hi / mm
              << "] mm, " << r.n << " samples\n";
    curves.push_back(sweep_curve(v, ctx, r.lo, r.hi, r.n));
  }
  for (const auto& cv : curves) {
    const auto path = fs::path(c.output_dir) / (std::string(to_string(cv.variable)) + ".csv");
    write_csv(cv, path, header(c));
    std::cout << path.string() << "\n";
  }
  return 0;
}

int run_synthesize(const RunConfig& c) {
  c.spec.validate();
  RefineSettings rs;
  rs.h = c.numerics.h;
  rs.threads = c.numerics.threads;
  rs.max_evaluations = c.numerics.refine_budget;
  RefineResult result;
  FilterDesign start;
  if (c.housing) {
    if (c.topology != Topology::airhole) {
      throw Error(ErrorCode::parse, "[housing] applies to the airhole topology");
    }
    result = redesign_fixed_length(c.spec, *c.housing, rs);
  } else {
    const auto ctx = default_context(c.topology, c.spec, c.numerics.h);
    start = initial_dims(c.spec, c.topology, ctx);
    std::cerr << "initial dimensions:\n" << emit_geometry(start);
    result = refine(start, c.spec, rs);
  }
  RunConfig out = c;
  out.subcommand = "evaluate";
  out.geometry = result.design;
  out.housing.reset();
  std::ostringstream log;
  log << "objective " << result.initial_objective << " -> " << result.objective << " after "
      << result.evaluations << " simulations (" << (result.converged ? "converged" : "budget spent")
      << ")\n";
  std::cout << log.str() << emit_geometry(result.design);
  const fs::path dir = c.output_dir;
  write_text(dir / "design.toml", as_comment(log.str()) + emit_config(out));
  std::ostringstream hist;
  hist << as_comment(header(c)) << "evaluation,best_objective\n";
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    hist << i + 1 << "," << result.history[i] << "\n";
  }
  write_text(dir / "refine_history.csv", hist.str());
  return 0;
}

int run_simulate(const RunConfig& c) {
  const auto& d = require_geometry(c);
  const auto grid = rasterize(d.scene(c.numerics.tan_delta), c.numerics.eval_h);
  SolveOptions opt;
  opt.mode_count = c.numerics.mode_count;
  const auto s = parallel_sweep(grid, sweep_points(c.numerics), c.numerics.threads, opt);
  const auto path = fs::path(c.output_dir) / "response.s2p";
  write_touchstone(s, path, header(c));
  std::cout << path.string() << "\n";
  return 0;
}

int run_evaluate(const RunConfig& c) {
  const auto& d = require_geometry(c);
  EvaluateSettings es;
  es.f_start = c.numerics.f_start;
  es.f_stop = c.numerics.f_stop;
  es.coarse_step = c.numerics.coarse_step;
  es.fine_step = c.numerics.fine_step;
  es.h = c.numerics.eval_h;
  es.tan_delta = c.numerics.tan_delta;
  es.threads = c.numerics.threads;
  const auto rep = evaluate(d, c.spec, es);
  const auto text = format_report(rep, c.spec);
  std::cout << text;
  const fs::path dir = c.output_dir;
  write_text(dir / "report.txt", as_comment(header(c)) + text);
  write_csv(rep, dir / "report.csv", header(c));
  write_touchstone(rep.response, dir / "response.s2p", header(c));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evanescent-mode waveguide filter design"};
  app.require_subcommand(1);
  Flags flags;
  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const RunConfig&);
  };
  const Command commands[] = {
      {"prototype", "Chebyshev prototype, coupling matrix and circuit response", run_prototype},
      {"curves", "Design curves from EM extraction", run_curves},
      {"synthesize", "Initial dimensions from curves, then EM refinement", run_synthesize},
      {"simulate", "EM frequency sweep of the [geometry] section", run_simulate},
      {"evaluate", "Band metrics, spurious search and report", run_evaluate},
  };
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config,-c", flags.config, "Configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out,-o", flags.out, "Output directory (overrides [output])");
    sub->add_option("--grid-h", flags.grid_h, "Grid spacing in mm")->check(CLI::PositiveNumber);
    sub->add_option("--threads,-j", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--band", flags.band, "Sweep band START:STOP in GHz");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorCode::parse);
  }
  for (const auto& cmd : commands) {
    if (!app.got_subcommand(cmd.name)) continue;
    try {
      return cmd.fn(resolve(flags, cmd.name));
    } catch (const Error& e) {
      std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
      return exit_code(e.code());
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return 1;
}
