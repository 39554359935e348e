#pragma once

// Run configuration (sectioned key = value text), Touchstone and CSV output.
//
// Units in config files: frequencies in GHz, lengths in mm, return loss in dB.
// Everything is stored in SI internally.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "evf/designer.hpp"

namespace evf {

struct NumericsConfig {
  double h = 0.5 * mm;            // grid for curves and refinement
  double eval_h = 0.25 * mm;      // grid for simulate / evaluate
  int mode_count = 5;
  int threads = 1;
  double f_start = 3.0 * GHz;
  double f_stop = 5.2 * GHz;
  double coarse_step = 10.0 * MHz;
  double fine_step = 0.5 * MHz;
  double tan_delta = 0.0;
  int refine_budget = 300;
  bool operator==(const NumericsConfig&) const = default;
};

struct CurvesConfig {
  std::vector<CurveVariable> variables;  // empty = both curves of the topology
  std::optional<double> lo, hi;          // override of the default range
  std::optional<int> samples;
  bool operator==(const CurvesConfig&) const = default;
};

struct RunConfig {
  std::string subcommand;
  FilterSpec spec;
  Topology topology = Topology::posts;
  std::optional<FilterDesign> geometry;  // present when a [geometry] section was given
  std::optional<Housing> housing;        // present when a [housing] section was given
  NumericsConfig numerics;
  CurvesConfig curves;
  std::string output_dir = "out";

  bool operator==(const RunConfig&) const = default;
};

/// Throws parse errors naming the line and key.
[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
/// Canonical text form; parse_config(emit_config(c)) == c.
[[nodiscard]] std::string emit_config(const RunConfig& config);

/// Design dimensions in the [geometry] section format.
[[nodiscard]] std::string emit_geometry(const FilterDesign& design);

struct TouchstoneFile {
  std::vector<std::string> comments;
  SParamSet data;
};

void write_touchstone(const SParamSet& s, const std::filesystem::path& path,
                      const std::string& comment = {});
[[nodiscard]] std::string format_touchstone(const SParamSet& s, const std::string& comment = {});
[[nodiscard]] TouchstoneFile read_touchstone(const std::filesystem::path& path);
[[nodiscard]] TouchstoneFile parse_touchstone(const std::string& text);

[[nodiscard]] std::string format_csv(const DesignCurve& curve, const std::string& comment = {});
[[nodiscard]] std::string format_csv(const DesignReport& report, const std::string& comment = {});
[[nodiscard]] std::string format_report(const DesignReport& report, const FilterSpec& spec);

void write_csv(const DesignCurve& curve, const std::filesystem::path& path,
               const std::string& comment = {});
void write_csv(const DesignReport& report, const std::filesystem::path& path,
               const std::string& comment = {});

/// Writes text to a file; io error with the path on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

/// Prefixes each line with "# ".
[[nodiscard]] std::string as_comment(const std::string& text);

}  // namespace evf
