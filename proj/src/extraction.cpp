#include "evf/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <math.h>  // boost 1.74 pchip calls isnan unqualified

#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/tools/roots.hpp>

#include "evf/emcore.hpp"
#include "evf/error.hpp"

namespace evf {

namespace {

[[noreturn]] void extraction_error(const std::string& what) {
  throw Error(ErrorCode::extraction, what);
}

constexpr double kDefaultPostRz = 12.0 * mm;
constexpr double kDefaultResonatorLength = 12.0 * mm;

// Adjusts a resonator dimension until freq(dim) == target. freq decreases
// with dim. Secant iteration on log-scaled quantities.
template <class F>
double tune_dimension(F&& freq, double guess, double target, double tol, double lo, double hi,
                      double* f_out) {
  double d0 = std::clamp(guess, lo, hi);
  double f0 = freq(d0);
  if (std::abs(f0 / target - 1.0) <= tol) {
    *f_out = f0;
    return d0;
  }
  double d1 = std::clamp(d0 * f0 / target, lo, hi);
  if (d1 == d0) d1 = std::clamp(d0 * (f0 > target ? 1.05 : 0.95), lo, hi);
  double f1 = freq(d1);
  for (int it = 0; it < 30; ++it) {
    if (std::abs(f1 / target - 1.0) <= tol) {
      *f_out = f1;
      return d1;
    }
    const double slope = (std::log(f1) - std::log(f0)) / (std::log(d1) - std::log(d0));
    double d2;
    if (!(slope < 0.0) || !std::isfinite(slope)) {
      d2 = d1 * f1 / target;
    } else {
      d2 = d1 * std::exp((std::log(target) - std::log(f1)) / slope);
    }
    d2 = std::clamp(d2, std::max(lo, 0.5 * d1), std::min(hi, 2.0 * d1));
    if (std::abs(d2 - d1) <= 1e-9 * d1) break;
    d0 = d1;
    f0 = f1;
    d1 = d2;
    f1 = freq(d1);
  }
  if (std::abs(f1 / target - 1.0) <= tol) {
    *f_out = f1;
    return d1;
  }
  std::ostringstream os;
  os << "resonator pre-tuning did not reach " << target / GHz << " GHz (last " << f1 / GHz
     << " GHz at " << d1 / mm << " mm)";
  extraction_error(os.str());
}

double lowest(const std::vector<double>& v) {
  return v.empty() ? std::nan("") : v.front();
}

struct EvenOdd {
  double fe, fo;
};

EvenOdd even_odd(const Scene2D& scene, double h, double fc) {
  const auto grid = rasterize(scene, h);
  const double lo = 0.4 * fc, hi = 1.8 * fc;
  const double fe = lowest(resonant_frequencies(grid, Symmetry::even, lo, hi).frequencies);
  const double fo = lowest(resonant_frequencies(grid, Symmetry::odd, lo, hi).frequencies);
  if (std::isnan(fe) || std::isnan(fo)) {
    std::ostringstream os;
    os << "no " << (std::isnan(fe) ? "even" : "odd") << " resonance between " << lo / GHz
       << " and " << hi / GHz << " GHz";
    extraction_error(os.str());
  }
  return {fe, fo};
}

// Resonance of a doubly loaded resonator. 1/|S21|^2 is a parabola in f near
// a Lorentzian peak; fit, resample around the vertex and repeat.
struct Peak {
  double f0 = 0, width = 0;  // width: estimated half-power half-width
};

class PeakFinder {
 public:
  PeakFinder(FdfdSolver& solver, double f_floor) : solver_(solver), floor_(f_floor) {}

  double power(double f) { return std::norm(solver_.solve(std::max(f, floor_)).s21); }

  Peak locate(double f_guess) {
    double center = f_guess;
    double w = 0.04 * f_guess;
    double prev = 0.0;
    for (int it = 0; it < 30; ++it) {
      const double f[3] = {center - w, center, center + w};
      const double q[3] = {1.0 / power(f[0]), 1.0 / power(f[1]), 1.0 / power(f[2])};
      const double d1 = (q[1] - q[0]) / (f[1] - f[0]);
      const double d2 = (q[2] - q[1]) / (f[2] - f[1]);
      const double a = (d2 - d1) / (f[2] - f[0]);
      double vertex = (f[0] + f[1]) / 2.0 - d1 / (2.0 * a);
      if (!(a > 0.0) || !std::isfinite(vertex)) {
        // Not bracketing a peak: step toward the smaller 1/|S21|^2.
        center += q[0] < q[2] ? -2.0 * w : 2.0 * w;
        if (center - w < floor_ || center > 1.5 * f_guess) break;
        continue;
      }
      vertex = std::clamp(vertex, std::max(center - 3.0 * w, floor_ + w), center + 3.0 * w);
      const double qmin = std::max(1.0, q[1] - a * (center - vertex) * (center - vertex));
      const double w_new = std::sqrt(qmin / a);
      const bool done = it > 1 && std::abs(vertex - prev) < 1e-7 * vertex;
      prev = vertex;
      center = vertex;
      w = std::clamp(w_new, 1e-5 * center, std::min(0.05 * center, 0.5 * (center - floor_)));
      if (done) return {prev, w};
    }
    if (prev > 0.0) return {prev, w};
    extraction_error("no transmission peak found near the target frequency");
  }

  /// Loaded Q from the half-power points around a located peak.
  double loaded_q(const Peak& p, double* peak_power) {
    const double peak = power(p.f0);
    *peak_power = peak;
    const double half = 0.5 * peak;
    auto edge = [&](double dir) {
      double step = std::max(p.width, 1e-5 * p.f0);
      double inner = p.f0, outer = p.f0 + dir * step;
      for (int k = 0; k < 40 && power(outer) > half; ++k) {
        inner = outer;
        step *= 1.6;
        outer = p.f0 + dir * step;
        if (outer <= floor_) extraction_error("half-power point lies below the port cutoff");
      }
      while (std::abs(outer - inner) > 1e-7 * p.f0) {
        const double mid = 0.5 * (inner + outer);
        (power(mid) > half ? inner : outer) = mid;
      }
      return 0.5 * (inner + outer);
    };
    const double lo = edge(-1.0), hi = edge(1.0);
    return p.f0 / (hi - lo);
  }

 private:
  FdfdSolver& solver_;
  double floor_;
};

}  // namespace

const char* to_string(Topology t) noexcept {
  return t == Topology::airhole ? "airhole" : "posts";
}

Topology topology_from_string(const std::string& s) {
  if (s == "airhole" || s == "air-hole" || s == "air_hole") return Topology::airhole;
  if (s == "posts" || s == "post") return Topology::posts;
  throw Error(ErrorCode::invalid_spec, "unknown topology '" + s + "' (airhole | posts)");
}

const char* to_string(CurveVariable v) noexcept {
  switch (v) {
    case CurveVariable::hole_rz: return "hole_rz";
    case CurveVariable::post_gap: return "post_gap";
    case CurveVariable::input_hole: return "input_hole";
    case CurveVariable::overhang: return "overhang";
    case CurveVariable::step_gap: return "step_gap";
  }
  return "?";
}

CurveVariable curve_variable_from_string(const std::string& s) {
  for (auto v : {CurveVariable::hole_rz, CurveVariable::post_gap, CurveVariable::input_hole,
                 CurveVariable::overhang, CurveVariable::step_gap}) {
    if (s == to_string(v)) return v;
  }
  throw Error(ErrorCode::invalid_spec, "unknown curve variable '" + s + "'");
}

Topology topology_of(CurveVariable v) noexcept {
  return v == CurveVariable::post_gap || v == CurveVariable::step_gap ? Topology::posts
                                                                      : Topology::airhole;
}

bool is_coupling(CurveVariable v) noexcept {
  return v == CurveVariable::hole_rz || v == CurveVariable::post_gap;
}

double CurveContext::port_length(Topology t) const {
  if (l_port > 0.0) return l_port;
  return t == Topology::airhole ? 10.0 * mm : 15.0 * mm;
}

double ksc(double fe, double fo) {
  return (fe * fe - fo * fo) / (fe * fe + fo * fo);
}

double normalize_coupling(double fc, double bw, double k) {
  if (!(bw > 0.0)) throw Error(ErrorCode::invalid_spec, "bandwidth must be positive");
  return fc / bw * k;
}

Scene2D pair_scene(Topology t, double parameter, double resonator, const CurveContext& ctx) {
  const double hw = 0.5 * ctx.a_ev;
  Scene2D s;
  if (t == Topology::posts) {
    const double g = parameter, r = resonator;
    const double zc = 0.5 * g + r;
    const double half = zc + r + ctx.tail;
    s.rects.push_back({-hw, hw, -half, half, air});
    s.inclusions.push_back({0.0, -zc, ctx.rx, r, ctx.material});
    s.inclusions.push_back({0.0, zc, ctx.rx, r, ctx.material});
  } else {
    const double r = parameter, l = resonator;
    const double half_d = r + l;
    const double half = half_d + ctx.tail;
    s.rects.push_back({-hw, hw, -half, -half_d, air});
    s.rects.push_back({-hw, hw, -half_d, half_d, ctx.material});
    s.rects.push_back({-hw, hw, half_d, half, air});
    if (r > 0.0) s.inclusions.push_back({0.0, 0.0, ctx.rx, r, air});
  }
  s.validate();
  return s;
}

PairResult extract_pair_coupling(const CoupledPairSpec& pair) {
  const auto& ctx = pair.context;
  if (!(pair.parameter > 0.0)) extraction_error("pair parameter must be positive");
  const bool posts = pair.topology == Topology::posts;
  const double guess = pair.resonator_guess > 0.0
                           ? pair.resonator_guess
                           : (posts ? kDefaultPostRz : kDefaultResonatorLength);
  const double lo = posts ? 1.5 * ctx.h : 2.0 * ctx.h;
  const double hi = posts ? 40.0 * mm : 80.0 * mm;

  EvenOdd last{};
  auto centre = [&](double dim) {
    last = even_odd(pair_scene(pair.topology, pair.parameter, dim, ctx), ctx.h, ctx.f_c);
    return std::sqrt(last.fe * last.fo);
  };
  double fm = 0.0;
  const double dim = tune_dimension(centre, guess, ctx.f_c, ctx.tune_tolerance, lo, hi, &fm);
  if (std::sqrt(last.fe * last.fo) != fm) centre(dim);

  PairResult out;
  out.f_even = last.fe;
  out.f_odd = last.fo;
  out.k = ksc(last.fe, last.fo);
  out.m = std::abs(normalize_coupling(ctx.f_c, ctx.bandwidth, out.k));
  out.resonator = dim;
  return out;
}

double isolated_resonator(Topology t, const CurveContext& ctx) {
  const bool posts = t == Topology::posts;
  const double hw = 0.5 * ctx.a_ev;
  auto single = [&](double dim) {
    Scene2D s;
    if (posts) {
      const double half = dim + ctx.tail;
      s.rects.push_back({-hw, hw, -half, half, air});
      s.inclusions.push_back({0.0, 0.0, ctx.rx, dim, ctx.material});
    } else {
      const double half_d = 0.5 * dim;
      const double half = half_d + ctx.tail;
      s.rects.push_back({-hw, hw, -half, -half_d, air});
      s.rects.push_back({-hw, hw, -half_d, half_d, ctx.material});
      s.rects.push_back({-hw, hw, half_d, half, air});
    }
    const auto grid = rasterize(s, ctx.h);
    const auto r = resonant_frequencies(grid, Symmetry::even, 0.4 * ctx.f_c, 1.8 * ctx.f_c);
    if (r.frequencies.empty()) extraction_error("isolated resonator has no resonance in band");
    return r.frequencies.front();
  };
  double f = 0.0;
  return tune_dimension(single, posts ? kDefaultPostRz : kDefaultResonatorLength, ctx.f_c,
                        ctx.tune_tolerance, posts ? 1.5 * ctx.h : 2.0 * ctx.h,
                        posts ? 40.0 * mm : 80.0 * mm, &f);
}

Scene2D qext_scene(CurveVariable v, double value, double resonator, const CurveContext& ctx) {
  if (v == CurveVariable::step_gap) {
    PostParams p;
    p.order = 1;
    p.a = ctx.a;
    p.a_ev = ctx.a_ev;
    p.l_port = ctx.port_length(Topology::posts);
    p.l_s1 = value;
    p.gaps = {};
    p.post_rz = {resonator};
    p.rx = ctx.rx;
    p.material = ctx.material;
    return build_posts(p);
  }
  if (v != CurveVariable::input_hole && v != CurveVariable::overhang) {
    extraction_error(std::string("variable ") + to_string(v) + " is not an external-Q variable");
  }
  AirHoleParams p;
  p.order = 1;
  p.a = ctx.a;
  p.a_ev = ctx.a_ev;
  p.l_port = ctx.port_length(Topology::airhole);
  p.l_d = v == CurveVariable::overhang ? value : ctx.l_d;
  p.l_step = ctx.l_step;
  p.resonator_lengths = {resonator};
  p.hole_rz = {v == CurveVariable::input_hole ? value : ctx.hole_r1};
  p.rx = ctx.rx;
  p.material = ctx.material;
  return build_airhole(p);
}

QextResult extract_qext(const QextSpec& spec) {
  const auto& ctx = spec.context;
  const bool posts = spec.variable == CurveVariable::step_gap;
  const double guess = spec.resonator_guess > 0.0
                           ? spec.resonator_guess
                           : (posts ? kDefaultPostRz : kDefaultResonatorLength);
  const double lo = posts ? 1.5 * ctx.h : 2.0 * ctx.h;
  const double hi = posts ? 40.0 * mm : 80.0 * mm;
  const double floor = 1.02 * cutoff_frequency(ctx.a, 1.0, 1);

  auto centre = [&](double dim) {
    FdfdSolver solver(rasterize(qext_scene(spec.variable, spec.value, dim, ctx), ctx.h));
    return PeakFinder(solver, floor).locate(ctx.f_c).f0;
  };
  double f0 = 0.0;
  const double dim = tune_dimension(centre, guess, ctx.f_c, ctx.tune_tolerance, lo, hi, &f0);

  FdfdSolver solver(rasterize(qext_scene(spec.variable, spec.value, dim, ctx), ctx.h));
  PeakFinder finder(solver, floor);
  const Peak peak = finder.locate(f0);
  double peak_power = 0.0;
  const double q_loaded = finder.loaded_q(peak, &peak_power);

  QextResult out;
  out.f0 = peak.f0;
  out.peak_db = 10.0 * std::log10(peak_power);
  if (out.peak_db < -3.0) {
    std::ostringstream os;
    os << "resonance peak |S21| = " << out.peak_db << " dB is below -3 dB";
    extraction_error(os.str());
  }
  out.q_ext = 2.0 * q_loaded;
  out.resonator = dim;
  return out;
}

// --- curves ---------------------------------------------------------------------

std::string DesignCurve::parameter_name() const {
  switch (variable) {
    case CurveVariable::hole_rz: return "r_i (mm)";
    case CurveVariable::post_gap: return "l_ij (mm)";
    case CurveVariable::input_hole: return "r_1 (mm)";
    case CurveVariable::overhang: return "l_d (mm)";
    case CurveVariable::step_gap: return "l_s1 (mm)";
  }
  return "?";
}

std::string DesignCurve::value_name() const {
  return is_coupling(variable) ? "M_ij" : "Q_ext";
}

bool DesignCurve::increasing() const {
  return value.size() >= 2 && value.back() > value.front();
}

void DesignCurve::validate() const {
  if (parameter.size() != value.size() || resonator.size() != value.size()) {
    throw Error(ErrorCode::curve, "design curve columns have different lengths");
  }
  if (parameter.size() < 4) throw Error(ErrorCode::curve, "design curve needs at least 4 samples");
  for (std::size_t i = 1; i < parameter.size(); ++i) {
    if (!(parameter[i] > parameter[i - 1])) {
      throw Error(ErrorCode::curve, "design curve parameters must be strictly increasing");
    }
  }
  const bool up = increasing();
  for (std::size_t i = 1; i < value.size(); ++i) {
    const bool ok = up ? value[i] > value[i - 1] : value[i] < value[i - 1];
    if (!ok) {
      std::ostringstream os;
      os << "design curve " << to_string(variable) << " is not strictly monotone near "
         << parameter[i] / mm << " mm";
      throw Error(ErrorCode::curve, os.str());
    }
  }
}

namespace {

boost::math::interpolators::pchip<std::vector<double>> make_pchip(const std::vector<double>& x,
                                                                  const std::vector<double>& y) {
  return boost::math::interpolators::pchip<std::vector<double>>(std::vector<double>(x),
                                                                std::vector<double>(y));
}

void check_inside(const DesignCurve& c, double p) {
  if (p < c.parameter.front() || p > c.parameter.back()) {
    std::ostringstream os;
    os << "parameter " << p / mm << " mm is outside the curve range [" << c.parameter.front() / mm
       << ", " << c.parameter.back() / mm << "] mm";
    throw Error(ErrorCode::range, os.str());
  }
}

}  // namespace

double DesignCurve::resonator_at(double p) const {
  validate();
  check_inside(*this, p);
  return make_pchip(parameter, resonator)(p);
}

double curve_value(const DesignCurve& curve, double p) {
  curve.validate();
  check_inside(curve, p);
  return make_pchip(curve.parameter, curve.value)(p);
}

double invert_curve(const DesignCurve& curve, double target) {
  curve.validate();
  const double vmin = std::min(curve.value.front(), curve.value.back());
  const double vmax = std::max(curve.value.front(), curve.value.back());
  if (!(target >= vmin && target <= vmax)) {
    std::ostringstream os;
    os << curve.value_name() << " target " << target << " is outside the curve range [" << vmin
       << ", " << vmax << "]";
    throw Error(ErrorCode::range, os.str());
  }
  const auto interp = make_pchip(curve.parameter, curve.value);
  // The interpolant is monotone, so the bracketing knot interval contains the root.
  std::size_t i = 1;
  const bool up = curve.increasing();
  while (i + 1 < curve.value.size() && (up ? curve.value[i] < target : curve.value[i] > target)) ++i;
  const double a = curve.parameter[i - 1], b = curve.parameter[i];
  auto g = [&](double p) { return interp(p) - target; };
  if (g(a) == 0.0) return a;
  if (g(b) == 0.0) return b;
  const auto r = boost::math::tools::bisect(g, a, b, boost::math::tools::eps_tolerance<double>(40));
  return 0.5 * (r.first + r.second);
}

CurveGenerator em_generator(CurveVariable v, const CurveContext& ctx) {
  if (is_coupling(v)) {
    return [v, ctx](double p, double guess) {
      CoupledPairSpec spec{topology_of(v), p, ctx, guess};
      const auto r = extract_pair_coupling(spec);
      return CurveSample{r.m, r.resonator};
    };
  }
  return [v, ctx](double p, double guess) {
    QextSpec spec{v, p, ctx, guess};
    const auto r = extract_qext(spec);
    return CurveSample{r.q_ext, r.resonator};
  };
}

DesignCurve sweep_curve(CurveVariable v, const CurveContext& ctx, const CurveGenerator& gen,
                        double lo, double hi, int n, bool log_spaced) {
  if (n < 4) throw Error(ErrorCode::curve, "a design curve needs n >= 4 samples");
  if (!(hi > lo)) throw Error(ErrorCode::curve, "curve range must satisfy lo < hi");
  if (log_spaced && !(lo > 0.0)) throw Error(ErrorCode::curve, "log spacing needs lo > 0");
  DesignCurve c;
  c.variable = v;
  c.context = ctx;
  double guess = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / (n - 1);
    const double p = log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    const auto s = gen(p, guess);
    c.parameter.push_back(p);
    c.value.push_back(s.value);
    c.resonator.push_back(s.resonator);
    guess = s.resonator;
  }
  c.validate();
  return c;
}

DesignCurve sweep_curve(CurveVariable v, const CurveContext& ctx, double lo, double hi, int n,
                        bool log_spaced) {
  return sweep_curve(v, ctx, em_generator(v, ctx), lo, hi, n, log_spaced);
}

SweepRange default_range(CurveVariable v) {
  switch (v) {
    case CurveVariable::hole_rz: return {6.0 * mm, 30.0 * mm, 9};
    case CurveVariable::post_gap: return {14.0 * mm, 54.0 * mm, 9};
    case CurveVariable::input_hole: return {7.0 * mm, 19.0 * mm, 7};
    case CurveVariable::overhang: return {1.0 * mm, 12.0 * mm, 9};
    case CurveVariable::step_gap: return {2.0 * mm, 34.0 * mm, 9};
  }
  return {0, 0, 0};
}

}  // namespace evf
