#include "evf/prototype.hpp"

#include <cmath>

#include "evf/error.hpp"

namespace evf {

void FilterSpec::validate() const {
  if (order < 1) {
    throw Error(ErrorCode::invalid_spec, "filter order must be >= 1");
  }
  if (!(return_loss > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "return loss must be positive");
  }
  if (!(center_frequency > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "center frequency must be positive");
  }
  if (!(bandwidth > 0.0) || !(bandwidth < center_frequency)) {
    throw Error(ErrorCode::invalid_spec,
                "bandwidth must satisfy 0 < bandwidth < center frequency");
  }
}

std::pair<double, double> FilterSpec::band_edges() const {
  const double half = 0.5 * bandwidth;
  const double root = std::sqrt(center_frequency * center_frequency + half * half);
  return {root - half, root + half};
}

double LowpassPrototype::resonator_sum() const {
  double sum = 0.0;
  for (int k = 1; k <= order(); ++k) sum += g[k];
  return sum;
}

double ripple_from_return_loss(double return_loss_db) {
  const double eps2 = 1.0 / (std::pow(10.0, return_loss_db / 10.0) - 1.0);
  return 10.0 * std::log10(1.0 + eps2);
}

LowpassPrototype synth_prototype(int order, double return_loss_db) {
  if (order < 1) {
    throw Error(ErrorCode::invalid_spec, "prototype order must be >= 1");
  }
  if (!(return_loss_db > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "return loss must be positive");
  }
  const int n = order;
  LowpassPrototype p;
  p.ripple_db = ripple_from_return_loss(return_loss_db);

  const double beta = std::log(1.0 / std::tanh(p.ripple_db / (40.0 / std::log(10.0))));
  const double gamma = std::sinh(beta / (2.0 * n));
  auto a = [n](int k) { return std::sin((2.0 * k - 1.0) * pi / (2.0 * n)); };
  auto b = [n, gamma](int k) {
    const double s = std::sin(k * pi / n);
    return gamma * gamma + s * s;
  };

  p.g.assign(n + 2, 0.0);
  p.g[0] = 1.0;
  p.g[1] = 2.0 * a(1) / gamma;
  for (int k = 2; k <= n; ++k) {
    p.g[k] = 4.0 * a(k - 1) * a(k) / (b(k - 1) * p.g[k - 1]);
  }
  if (n % 2 == 1) {
    p.g[n + 1] = 1.0;
  } else {
    const double c = 1.0 / std::tanh(beta / 4.0);
    p.g[n + 1] = c * c;
  }
  return p;
}

CouplingMatrix prototype_to_coupling(const LowpassPrototype& p) {
  const int n = p.order();
  if (n < 1) {
    throw Error(ErrorCode::invalid_spec, "prototype has no resonators");
  }
  for (double g : p.g) {
    if (!(g > 0.0)) {
      throw Error(ErrorCode::invalid_spec, "prototype element values must be positive");
    }
  }
  CouplingMatrix m;
  m.n = n;
  m.values = Eigen::MatrixXd::Zero(n + 2, n + 2);
  for (int i = 0; i <= n; ++i) {
    const double k = 1.0 / std::sqrt(p.g[i] * p.g[i + 1]);
    m.values(i, i + 1) = k;
    m.values(i + 1, i) = k;
  }
  return m;
}

double qext_required(const FilterSpec& spec, double m_s1) {
  if (!(spec.bandwidth > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "bandwidth must be positive");
  }
  if (!(m_s1 > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "input coupling must be positive");
  }
  return spec.center_frequency / (m_s1 * m_s1 * spec.bandwidth);
}

double lowpass_variable(const FilterSpec& spec, double f) {
  const double fc = spec.center_frequency;
  return (fc / spec.bandwidth) * (f / fc - fc / f);
}

ChannelResponse cm_response(const CouplingMatrix& m, const FilterSpec& spec,
                            double qu, std::span<const double> frequencies) {
  spec.validate();
  const int n = m.n;
  const int dim = n + 2;
  if (m.values.rows() != dim || m.values.cols() != dim) {
    throw Error(ErrorCode::invalid_spec, "coupling matrix size does not match its order");
  }
  if (!(qu > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "unloaded Q must be positive");
  }
  const double delta = std::isinf(qu) ? 0.0 : spec.center_frequency / (qu * spec.bandwidth);

  ChannelResponse out;
  out.source = ResponseSource::circuit;
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.s11.reserve(frequencies.size());
  out.s21.reserve(frequencies.size());
  out.singular.reserve(frequencies.size());

  const cplx j(0.0, 1.0);
  Eigen::MatrixXcd a(dim, dim);
  double prev = 0.0;
  for (double f : frequencies) {
    if (!(f > 0.0) || f <= prev) {
      throw Error(ErrorCode::invalid_spec, "frequencies must be positive and strictly increasing");
    }
    prev = f;
    const double lambda = lowpass_variable(spec, f);
    // A = lambda W - j R + M, with resonator dissipation lambda -> lambda - j delta.
    a = m.values.cast<cplx>();
    a(0, 0) -= j;
    a(dim - 1, dim - 1) -= j;
    for (int i = 1; i <= n; ++i) a(i, i) += lambda - j * delta;

    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) {
      out.s11.emplace_back(std::nan(""), std::nan(""));
      out.s21.emplace_back(std::nan(""), std::nan(""));
      out.singular.push_back(true);
      continue;
    }
    Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(dim);
    e0(0) = 1.0;
    const Eigen::VectorXcd col = lu.solve(e0);
    out.s11.push_back(1.0 + 2.0 * j * col(0));
    out.s21.push_back(-2.0 * j * col(dim - 1));
    out.singular.push_back(false);
  }
  return out;
}

double il_from_qu(const FilterSpec& spec, const LowpassPrototype& p, double qu) {
  if (!(qu > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "unloaded Q must be positive");
  }
  if (std::isinf(qu)) return 0.0;
  return 10.0 / std::log(10.0) * (spec.center_frequency / spec.bandwidth) *
         p.resonator_sum() / qu;
}

double qu_from_il(const FilterSpec& spec, const LowpassPrototype& p, double il_db) {
  if (!(il_db > 0.0)) {
    throw Error(ErrorCode::invalid_spec, "insertion loss must be positive");
  }
  return 10.0 / std::log(10.0) * (spec.center_frequency / spec.bandwidth) *
         p.resonator_sum() / il_db;
}

}  // namespace evf
