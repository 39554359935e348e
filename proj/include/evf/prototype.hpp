#pragma once

// Chebyshev lowpass prototypes, in-line coupling matrices and their
// circuit-level response.

#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evf/units.hpp"

namespace evf {

/// Target transfer function. Frequencies in Hz, return loss in dB.
struct FilterSpec {
  int order = 5;
  double return_loss = 20.0;
  double center_frequency = 3.68e9;
  double bandwidth = 120e6;

  /// Throws invalid_spec when an invariant is violated.
  void validate() const;

  [[nodiscard]] double fractional_bandwidth() const {
    return bandwidth / center_frequency;
  }
  /// Lower and upper equal-ripple edges: f2 - f1 = BW, sqrt(f1 f2) = f_c.
  [[nodiscard]] std::pair<double, double> band_edges() const;
  bool operator==(const FilterSpec&) const = default;
};

struct LowpassPrototype {
  std::vector<double> g;  // g0 .. g(N+1)
  double ripple_db = 0.0;

  [[nodiscard]] int order() const { return static_cast<int>(g.size()) - 2; }
  /// Sum of the resonator elements g1..gN.
  [[nodiscard]] double resonator_sum() const;
};

/// (N+2)x(N+2) normalized coupling matrix indexed S, 1..N, L.
struct CouplingMatrix {
  int n = 0;
  Eigen::MatrixXd values;

  [[nodiscard]] double source_coupling() const { return values(0, 1); }
  [[nodiscard]] double load_coupling() const { return values(n, n + 1); }
  /// Coupling between resonators i and j (1-based).
  [[nodiscard]] double resonator_coupling(int i, int j) const {
    return values(i, j);
  }
};

enum class ResponseSource { circuit, em };

struct ChannelResponse {
  std::vector<double> frequencies;
  std::vector<cplx> s11;
  std::vector<cplx> s21;
  std::vector<bool> singular;  // samples where the network matrix was singular
  ResponseSource source = ResponseSource::circuit;

  [[nodiscard]] std::size_t size() const { return frequencies.size(); }
};

/// Ripple (dB) of an equal-ripple response with the given return loss.
[[nodiscard]] double ripple_from_return_loss(double return_loss_db);

[[nodiscard]] LowpassPrototype synth_prototype(int order, double return_loss_db);

[[nodiscard]] CouplingMatrix prototype_to_coupling(const LowpassPrototype& p);

/// External quality factor required at the input/output resonators.
[[nodiscard]] double qext_required(const FilterSpec& spec, double m_s1);

/// Lowpass-to-bandpass variable for the exact transform.
[[nodiscard]] double lowpass_variable(const FilterSpec& spec, double f);

/// Two-port response of the coupling matrix, unit terminations. `qu` is the
/// uniform resonator unloaded Q; pass infinity for a lossless network.
[[nodiscard]] ChannelResponse cm_response(
    const CouplingMatrix& m, const FilterSpec& spec, double qu,
    std::span<const double> frequencies);

/// Midband insertion loss estimate (dB) from the prototype element sum.
[[nodiscard]] double il_from_qu(const FilterSpec& spec,
                                const LowpassPrototype& p, double qu);
[[nodiscard]] double qu_from_il(const FilterSpec& spec,
                                const LowpassPrototype& p, double il_db);

inline constexpr double lossless = std::numeric_limits<double>::infinity();

}  // namespace evf
