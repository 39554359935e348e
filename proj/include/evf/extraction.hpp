#pragma once

// Design quantities from EM solves: inter-resonator coupling from even/odd
// resonances of a symmetric pair, external Q from a doubly loaded resonator,
// and tabulated design curves with monotone inversion.

#include <functional>
#include <string>
#include <vector>

#include "evf/geometry.hpp"
#include "evf/prototype.hpp"

namespace evf {

enum class Topology { airhole, posts };

[[nodiscard]] const char* to_string(Topology t) noexcept;
[[nodiscard]] Topology topology_from_string(const std::string& s);

/// Swept dimension of a design curve.
enum class CurveVariable {
  hole_rz,      // air-hole pair coupling vs hole semi-axis
  post_gap,     // post pair coupling vs edge-to-edge spacing
  input_hole,   // air-hole Q_ext vs input hole semi-axis
  overhang,     // air-hole Q_ext vs dielectric overhang l_d
  step_gap,     // post Q_ext vs step-to-post spacing l_s1
};

[[nodiscard]] const char* to_string(CurveVariable v) noexcept;
[[nodiscard]] CurveVariable curve_variable_from_string(const std::string& s);
[[nodiscard]] Topology topology_of(CurveVariable v) noexcept;
[[nodiscard]] bool is_coupling(CurveVariable v) noexcept;

/// Everything held fixed while one dimension is swept.
struct CurveContext {
  double a = 58.17 * mm;
  double a_ev = 30.0 * mm;
  double l_port = 0;           // 0 selects the topology default (10 / 15 mm)
  double l_d = 7.0 * mm;       // air-hole overhang
  double l_step = 0.0;         // air-hole l_1
  double hole_r1 = 9.0 * mm;   // input hole when sweeping l_d
  double rx = 14.0 * mm;
  Material material{3.55, 0.0};
  double f_c = 3.68 * GHz;
  double bandwidth = 120.0 * MHz;
  double h = 0.5 * mm;
  double tail = 100.0 * mm;    // evanescent length closing post pairs
  double tune_tolerance = 5e-4;

  [[nodiscard]] double port_length(Topology t) const;
  bool operator==(const CurveContext&) const = default;
};

[[nodiscard]] double ksc(double fe, double fo);
[[nodiscard]] double normalize_coupling(double fc, double bw, double k);

struct CoupledPairSpec {
  Topology topology = Topology::posts;
  double parameter = 0;         // hole semi-axis (air-hole) or gap (posts)
  CurveContext context;
  double resonator_guess = 0;   // starting resonator dimension, 0 = default
};

struct PairResult {
  double m = 0;                 // |M_ij|
  double k = 0;                 // signed ksc(fe, fo)
  double f_even = 0, f_odd = 0;
  double resonator = 0;         // tuned post semi-axis or resonator length
};

/// Closed two-resonator scene used for even/odd extraction.
[[nodiscard]] Scene2D pair_scene(Topology t, double parameter, double resonator,
                                 const CurveContext& ctx);

[[nodiscard]] PairResult extract_pair_coupling(const CoupledPairSpec& pair);

/// Resonator dimension (post semi-axis or dielectric length) that puts a
/// single resonator, isolated in the evanescent guide, at ctx.f_c.
[[nodiscard]] double isolated_resonator(Topology t, const CurveContext& ctx);

struct QextSpec {
  CurveVariable variable = CurveVariable::step_gap;
  double value = 0;
  CurveContext context;
  double resonator_guess = 0;
};

struct QextResult {
  double q_ext = 0;
  double f0 = 0;
  double peak_db = 0;
  double resonator = 0;
};

/// Doubly loaded single-resonator scene (order-1 filter).
[[nodiscard]] Scene2D qext_scene(CurveVariable v, double value, double resonator,
                                 const CurveContext& ctx);

[[nodiscard]] QextResult extract_qext(const QextSpec& spec);

struct DesignCurve {
  CurveVariable variable = CurveVariable::post_gap;
  CurveContext context;
  std::vector<double> parameter;   // m, strictly increasing
  std::vector<double> value;       // |M| or Q_ext
  std::vector<double> resonator;   // tuned resonator dimension per sample

  [[nodiscard]] std::size_t size() const { return parameter.size(); }
  [[nodiscard]] std::string parameter_name() const;
  [[nodiscard]] std::string value_name() const;
  /// Throws curve error unless sizes agree, n >= 4 and value is strictly monotone.
  void validate() const;
  [[nodiscard]] bool increasing() const;
  /// Resonator dimension interpolated at a parameter value.
  [[nodiscard]] double resonator_at(double p) const;
};

/// One curve sample: value and tuned resonator dimension.
struct CurveSample {
  double value = 0;
  double resonator = 0;
};
using CurveGenerator = std::function<CurveSample(double parameter, double resonator_guess)>;

[[nodiscard]] CurveGenerator em_generator(CurveVariable v, const CurveContext& ctx);

/// Samples `n` parameters evenly on [lo, hi] (log-spaced when `log_spaced`).
[[nodiscard]] DesignCurve sweep_curve(CurveVariable v, const CurveContext& ctx,
                                      const CurveGenerator& gen, double lo, double hi,
                                      int n, bool log_spaced = false);
[[nodiscard]] DesignCurve sweep_curve(CurveVariable v, const CurveContext& ctx, double lo,
                                      double hi, int n, bool log_spaced = false);

/// Parameter at which the monotone piecewise-cubic interpolant hits `target`.
[[nodiscard]] double invert_curve(const DesignCurve& curve, double target);
/// Interpolated value at a parameter inside the curve range.
[[nodiscard]] double curve_value(const DesignCurve& curve, double parameter);

/// Default sweep ranges for each variable.
struct SweepRange {
  double lo, hi;
  int n;
};
[[nodiscard]] SweepRange default_range(CurveVariable v);

}  // namespace evf
