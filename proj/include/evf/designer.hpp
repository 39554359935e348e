#pragma once

// Dimension synthesis: initial dimensions from design curves, simplex
// refinement against the ideal coupling-matrix response, evaluation reports
// and the fixed-housing redesign of the air-hole filter.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "evf/emcore.hpp"
#include "evf/extraction.hpp"
#include "evf/geometry.hpp"
#include "evf/prototype.hpp"

namespace evf {

/// A filter of either topology. Only the member matching `topology` is used.
struct FilterDesign {
  Topology topology = Topology::posts;
  AirHoleParams airhole;
  PostParams posts;

  [[nodiscard]] Scene2D scene(double tan_delta = 0.0) const;
  [[nodiscard]] double l_ev() const;
  [[nodiscard]] double l_tot() const;
  [[nodiscard]] int order() const;
  void validate() const;
  bool operator==(const FilterDesign&) const = default;
};

/// Reference dimensions of the three published designs.
[[nodiscard]] FilterDesign reference_airhole();           // 120 MHz
[[nodiscard]] FilterDesign reference_posts();             // 120 MHz
[[nodiscard]] FilterDesign reference_airhole_wideband();  // 175 MHz, fixed housing

/// Curves used by initial_dims; missing ones are generated on demand.
struct CurveSet {
  std::optional<DesignCurve> coupling;
  std::optional<DesignCurve> qext;
  double isolated = 0;  // isolated resonator dimension, 0 = compute
};

[[nodiscard]] CurveContext default_context(Topology t, const FilterSpec& spec, double h);

[[nodiscard]] FilterDesign initial_dims(const FilterSpec& spec, Topology topology,
                                        const CurveContext& ctx, CurveSet* curves = nullptr);

struct RefineSettings {
  std::vector<double> frequencies;  // objective samples, empty = derived from the spec
  std::vector<double> weights;      // per sample, empty = all 1
  int max_evaluations = 300;        // EM filter simulations
  double initial_step = 0.3 * mm;     // coupling dimensions (gaps, holes, l_s1)
  double resonator_step = 0.05 * mm;  // resonator dimensions (post radii, lengths)
  double min_step = 0.002 * mm;
  double tolerance = 1e-3;          // objective value considered converged
  double floor_db = -40.0;          // |S11| dB clamp for both responses
  double h = 0.5 * mm;
  int threads = 1;
};

struct RefineResult {
  FilterDesign design;
  double initial_objective = 0;
  double objective = 0;
  int evaluations = 0;
  int accepted = 0;       // improvements of the best point after the first evaluation
  bool converged = false;
  std::vector<double> history;  // best objective after each evaluation
};

/// Objective sample frequencies: reflection-zero and ripple-peak positions of
/// the Chebyshev response, the band edges and two stopband points.
[[nodiscard]] std::vector<double> objective_frequencies(const FilterSpec& spec);

/// Response model used by refine. Returns complex S11 at each frequency or
/// throws for a geometry it cannot simulate.
using ResponseModel =
    std::function<std::vector<cplx>(const FilterDesign&, const std::vector<double>&)>;

[[nodiscard]] ResponseModel em_model(double h, int threads = 1);

[[nodiscard]] RefineResult refine(const FilterDesign& start, const FilterSpec& spec,
                                  const RefineSettings& settings);
[[nodiscard]] RefineResult refine(const FilterDesign& start, const FilterSpec& spec,
                                  const RefineSettings& settings, const ResponseModel& model);

struct DesignReport {
  double center_frequency = 0;
  double bandwidth = 0;
  double f_lower = 0, f_upper = 0;
  bool edges_from_return_loss = true;  // false: edges are the -3 dB |S21| points
  double min_return_loss = 0;          // worst in-band RL, dB
  double min_insertion_loss = 0;       // best in-band IL, dB
  std::optional<double> spurious;      // first spurious band, Hz
  std::optional<double> sfr;           // spurious-free range, Hz
  double tan_delta = 0;
  FilterDesign design;
  SParamSet response;
};

struct EvaluateSettings {
  double f_start = 3.0 * GHz;
  double f_stop = 5.2 * GHz;
  double coarse_step = 10.0 * MHz;
  double fine_step = 0.5 * MHz;
  double spurious_level_db = -20.0;
  double spurious_span = 20.0 * MHz;
  double h = 0.25 * mm;
  double tan_delta = 0.0;
  bool find_spurious = true;
  int threads = 1;
};

[[nodiscard]] DesignReport evaluate(const FilterDesign& design, const FilterSpec& spec,
                                    const EvaluateSettings& settings);

/// Band metrics from an already simulated response (sorted frequencies).
[[nodiscard]] DesignReport analyze_response(const SParamSet& response, const FilterSpec& spec,
                                            const EvaluateSettings& settings);

struct Housing {
  double a = 58.17 * mm;
  double a_ev = 30.0 * mm;
  double l_ev = 258.847 * mm;
  double l_port = 10.0 * mm;
  double l_d = 7.0 * mm;
  bool operator==(const Housing&) const = default;
};

/// Air-hole design for spec2 inside an existing housing; l_1 absorbs the
/// length difference so l_ev is preserved.
[[nodiscard]] FilterDesign close_length(FilterDesign d, const Housing& housing);
[[nodiscard]] RefineResult redesign_fixed_length(const FilterSpec& spec2, const Housing& housing,
                                                 const RefineSettings& settings,
                                                 CurveSet* curves = nullptr);

/// Frequency sweep split over worker threads, each with its own factorization.
[[nodiscard]] SParamSet parallel_sweep(const PermittivityGrid& grid,
                                       const std::vector<double>& frequencies, int threads,
                                       SolveOptions options = {});

}  // namespace evf
