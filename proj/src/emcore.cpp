#include "evf/emcore.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/UmfPackSupport>

#include "evf/error.hpp"

namespace evf {

namespace {

using SpMatC = Eigen::SparseMatrix<cplx>;
using SpMatR = Eigen::SparseMatrix<double>;

enum class TopWall { port_or_metal, magnetic, electric };

struct PortData {
  std::vector<int> dofs;       // unknown index of each port node, ordered in x
  Eigen::VectorXd wx;          // dual-cell widths (transverse mass)
  Eigen::MatrixXd phi;         // wx-orthonormal transverse modes, columns
  Eigen::VectorXd mu;          // discrete transverse eigenvalues, ascending
  double d = 0;                // longitudinal spacing at the port
  cplx eps{1.0, 0.0};
};

struct Assembly {
  int n = 0;
  SpMatR stiffness;
  std::vector<cplx> mass;  // eps * dual area
  std::vector<PortData> ports;
};

// Builds the finite-volume stiffness and mass for nodes k <= k_last. The top
// row is either the grid end (ports or metal from the mask) or a symmetry
// plane handled by `top`.
// Index of the x center line when the grid, material and metal mask are
// mirror symmetric in x, otherwise -1.
int x_mirror_line(const PermittivityGrid& g) {
  const int nx = g.nx(), nz = g.nz();
  if (nx % 2 == 0) return -1;
  const int mid = nx / 2;
  const double span = g.xs.back() - g.xs.front();
  for (int i = 0; i < mid; ++i) {
    if (std::abs((g.xs[i] - g.xs[mid]) + (g.xs[nx - 1 - i] - g.xs[mid])) > 1e-12 * span) return -1;
  }
  for (int k = 0; k < nz; ++k) {
    for (int i = 0; i < mid; ++i) {
      const std::size_t a = g.index(i, k), b = g.index(nx - 1 - i, k);
      if (g.metal[a] != g.metal[b]) return -1;
      if (std::abs(g.eps[a] - g.eps[b]) > 1e-12 * std::abs(g.eps[a])) return -1;
    }
  }
  for (const auto& p : g.ports) {
    if (std::abs((p.x0 - g.xs[mid]) + (p.x1 - g.xs[mid])) > 1e-12 * span) return -1;
  }
  return mid;
}

// With i_mid >= 0 only nodes i <= i_mid are kept and the center line is a
// magnetic wall: the x-even half of the problem, exact for mirror-symmetric
// grids driven by the fundamental mode.
Assembly assemble(const PermittivityGrid& g, int k_last, TopWall top, bool driven, int i_mid) {
  const int nz = g.nz();
  const int nx = i_mid >= 0 ? i_mid + 1 : g.nx();
  auto dual_x = [&](int i) {
    return i == i_mid ? 0.5 * (g.xs[i] - g.xs[i - 1]) : g.dual_x(i);
  };
  const bool has_ports = driven && !g.ports.empty();
  std::vector<int> dof(static_cast<std::size_t>(g.nx()) * nz, -1);
  int n = 0;
  for (int k = 0; k <= k_last; ++k) {
    if (top == TopWall::electric && k == k_last) break;
    for (int i = 0; i < nx; ++i) {
      if (!g.metal[g.index(i, k)]) dof[g.index(i, k)] = n++;
    }
  }
  if (n == 0) throw Error(ErrorCode::modeling, "scene has no interior unknowns");

  Assembly a;
  a.n = n;
  a.mass.assign(n, cplx(0.0, 0.0));
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 5);

  const double d_lo = g.zs[1] - g.zs[0];
  const double d_hi = g.zs[nz - 1] - g.zs[nz - 2];
  const int k_stop = top == TopWall::electric ? k_last - 1 : k_last;

  for (int k = 0; k <= k_stop; ++k) {
    const bool port_lo = has_ports && k == 0;
    const bool port_hi = has_ports && top == TopWall::port_or_metal && k == nz - 1;
    double wz;
    if (port_lo) {
      wz = d_lo;
    } else if (port_hi) {
      wz = d_hi;
    } else if (top == TopWall::magnetic && k == k_last) {
      wz = 0.5 * (g.zs[k] - g.zs[k - 1]);
    } else {
      wz = g.dual_z(k);
    }
    for (int i = 0; i < nx; ++i) {
      const int r = dof[g.index(i, k)];
      if (r < 0) continue;
      const double wx = dual_x(i);
      double diag = 0.0;
      auto couple = [&](int ni, int nk, double w) {
        diag += w;
        const int c = dof[g.index(ni, nk)];
        if (c >= 0) trip.emplace_back(r, c, -w);
      };
      couple(i - 1, k, wz / (g.xs[i] - g.xs[i - 1]));
      if (i != i_mid) couple(i + 1, k, wz / (g.xs[i + 1] - g.xs[i]));
      if (k > 0) {
        couple(i, k - 1, wx / (g.zs[k] - g.zs[k - 1]));
      } else if (port_lo) {
        diag += wx / d_lo;  // ghost node, closed by the modal condition
      }
      if (k < k_last) {
        couple(i, k + 1, wx / (g.zs[k + 1] - g.zs[k]));
      } else if (top == TopWall::electric) {
        diag += wx / (g.zs[k + 1] - g.zs[k]);
      } else if (port_hi) {
        diag += wx / d_hi;
      }
      trip.emplace_back(r, r, diag);
      a.mass[r] = g.eps[g.index(i, k)] * wx * wz;
    }
  }
  a.stiffness.resize(n, n);
  a.stiffness.setFromTriplets(trip.begin(), trip.end());

  if (has_ports) {
    for (int p = 0; p < 2; ++p) {
      const int k = p == 0 ? 0 : nz - 1;
      PortData port;
      port.d = p == 0 ? d_lo : d_hi;
      port.eps = g.ports[p].background.permittivity();
      std::vector<int> idx;
      for (int i = 0; i < nx; ++i) {
        const int r = dof[g.index(i, k)];
        if (r < 0) continue;
        if (!idx.empty() && i != idx.back() + 1) {
          throw Error(ErrorCode::modeling, "port cross-section is not a single interval");
        }
        idx.push_back(i);
        port.dofs.push_back(r);
        if (std::abs(g.eps[g.index(i, k)] - port.eps) > 1e-9 * std::abs(port.eps)) {
          throw Error(ErrorCode::modeling,
                      "port plane does not lie in a uniform region of its background material");
        }
      }
      const int m = static_cast<int>(idx.size());
      if (m == 0) throw Error(ErrorCode::modeling, "port has no interior nodes");
      if (std::abs(port.eps.imag()) > 0.0) {
        throw Error(ErrorCode::modeling, "port background must be lossless");
      }
      port.wx.resize(m);
      Eigen::MatrixXd kx = Eigen::MatrixXd::Zero(m, m);
      for (int t = 0; t < m; ++t) {
        const int i = idx[t];
        port.wx(t) = dual_x(i);
        const double wl = 1.0 / (g.xs[i] - g.xs[i - 1]);
        const double wr = i == i_mid ? 0.0 : 1.0 / (g.xs[i + 1] - g.xs[i]);
        kx(t, t) = wl + wr;
        if (t + 1 < m) {
          kx(t, t + 1) = -wr;
          kx(t + 1, t) = -wr;
        }
      }
      const Eigen::VectorXd inv_sqrt = port.wx.cwiseSqrt().cwiseInverse();
      const Eigen::MatrixXd c = inv_sqrt.asDiagonal() * kx * inv_sqrt.asDiagonal();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
      port.mu = es.eigenvalues();
      port.phi = inv_sqrt.asDiagonal() * es.eigenvectors();
      if (port.phi.col(0).sum() < 0.0) port.phi.col(0) *= -1.0;
      a.ports.push_back(std::move(port));
    }
  }
  return a;
}

// Root of lambda + 1/lambda = 2c describing decay/propagation away from the
// port: |lambda| < 1, or on the unit circle with Im(lambda) <= 0.
cplx outgoing_root(cplx c) {
  const cplx s = std::sqrt(c * c - 1.0);
  const cplx r1 = c - s;
  const cplx r2 = c + s;
  const double m1 = std::abs(r1), m2 = std::abs(r2);
  if (std::abs(m1 - m2) > 1e-12) return m1 < m2 ? r1 : r2;
  return r1.imag() <= 0.0 ? r1 : r2;
}

}  // namespace

const char* to_string(Symmetry s) noexcept {
  switch (s) {
    case Symmetry::none: return "none";
    case Symmetry::even: return "even";
    case Symmetry::odd: return "odd";
  }
  return "?";
}

bool LayerStack::uniform_width() const {
  if (layers.empty()) return false;
  return std::all_of(layers.begin(), layers.end(), [&](const Layer& l) {
    return std::abs(l.width - layers.front().width) <= 1e-12;
  });
}

double LayerStack::total_length() const {
  double t = 0.0;
  for (const auto& l : layers) t += l.length;
  return t;
}

double cutoff_frequency(double width, double eps_r, int mode_index) {
  if (!(width > 0.0) || !(eps_r >= 1.0) || mode_index < 1) {
    throw Error(ErrorCode::invalid_spec, "cutoff needs width > 0, eps_r >= 1, m >= 1");
  }
  return mode_index * c0 / (2.0 * width * std::sqrt(eps_r));
}

cplx te10_gamma(double width, cplx eps, double f) {
  const double k0 = wavenumber(f);
  const double kc = pi / width;
  cplx g = std::sqrt(cplx(kc * kc, 0.0) - eps * k0 * k0);
  if (g.real() < 0.0 || (g.real() == 0.0 && g.imag() < 0.0)) g = -g;
  return g;
}

SMatrix2 tline_oracle(const LayerStack& stack, double f) {
  if (!stack.uniform_width()) {
    throw Error(ErrorCode::modeling, "transmission-line oracle needs a uniform-width stack");
  }
  const double a = stack.layers.front().width;
  const double omega = 2.0 * pi * f;
  const cplx j(0.0, 1.0);
  auto impedance = [&](cplx gamma) { return j * omega * mu0 / gamma; };

  Eigen::Matrix2cd abcd = Eigen::Matrix2cd::Identity();
  for (const auto& l : stack.layers) {
    if (!(l.length > 0.0)) throw Error(ErrorCode::modeling, "layer lengths must be positive");
    const cplx g = te10_gamma(a, l.eps, f);
    const cplx z = impedance(g);
    Eigen::Matrix2cd t;
    t << std::cosh(g * l.length), z * std::sinh(g * l.length),
        std::sinh(g * l.length) / z, std::cosh(g * l.length);
    abcd = abcd * t;
  }
  const cplx g1 = te10_gamma(a, stack.port_eps_in, f);
  const cplx g2 = te10_gamma(a, stack.port_eps_out, f);
  if (std::abs(g1.real()) > 1e-12 * std::abs(g1) || std::abs(g2.real()) > 1e-12 * std::abs(g2)) {
    throw Error(ErrorCode::modeling, "oracle port media must propagate TE_10");
  }
  const cplx z1 = impedance(g1);
  const cplx z2 = impedance(g2);
  const cplx A = abcd(0, 0), B = abcd(0, 1), C = abcd(1, 0), D = abcd(1, 1);
  const cplx den = A * z2 + B + C * z1 * z2 + D * z1;
  const cplx root = std::sqrt(z1 * z2);
  SMatrix2 s;
  s.s11 = (A * z2 + B - C * z1 * z2 - D * z1) / den;
  s.s21 = 2.0 * root / den;
  s.s12 = 2.0 * (A * D - B * C) * root / den;
  s.s22 = (-A * z2 + B - C * z1 * z2 + D * z1) / den;
  return s;
}

Scene2D scene_from_stack(const LayerStack& stack) {
  if (!stack.uniform_width()) {
    throw Error(ErrorCode::modeling, "layer stack must have a uniform width");
  }
  auto material = [](cplx eps) {
    return Material{eps.real(), eps.real() > 0.0 ? -eps.imag() / eps.real() : 0.0};
  };
  const double half_w = 0.5 * stack.layers.front().width;
  const double total = stack.total_length();
  Scene2D s;
  double z = -0.5 * total;
  for (std::size_t n = 0; n < stack.layers.size(); ++n) {
    const auto& l = stack.layers[n];
    const double z1 = n + 1 == stack.layers.size() ? 0.5 * total : z + l.length;
    s.rects.push_back({-half_w, half_w, z, z1, material(l.eps)});
    z = z1;
  }
  s.ports.push_back({-0.5 * total, -half_w, half_w, material(stack.port_eps_in)});
  s.ports.push_back({0.5 * total, -half_w, half_w, material(stack.port_eps_out)});
  s.validate();
  return s;
}

// --- driven solver -------------------------------------------------------------

struct FdfdSolver::Impl {
  Assembly asmb;
  SolveOptions options;
  double h = 0;
  int mode_stride = 1;  // 2 when only x-even port modes are present
  SpMatC a;
  std::vector<int> stiff_pos;                 // value slot of each stiffness nonzero
  std::vector<double> stiff_val;
  std::vector<int> diag_pos;
  std::vector<std::vector<int>> block_pos;    // per port, m*m slots (row-major)
  Eigen::UmfPackLU<SpMatC> lu;
  bool analyzed = false;

  Impl(const PermittivityGrid& grid, SolveOptions opts) : options(opts), h(grid.h) {
    if (grid.ports.size() != 2) {
      throw Error(ErrorCode::modeling, "driven solve needs a scene with two ports");
    }
    if (options.mode_count < 1) throw Error(ErrorCode::modeling, "mode_count must be >= 1");
    const int i_mid = options.use_symmetry ? x_mirror_line(grid) : -1;
    mode_stride = i_mid >= 0 ? 2 : 1;
    asmb = assemble(grid, grid.nz() - 1, TopWall::port_or_metal, true, i_mid);
    const int n = asmb.n;

    std::vector<Eigen::Triplet<cplx>> trip;
    for (int c = 0; c < asmb.stiffness.outerSize(); ++c) {
      for (SpMatR::InnerIterator it(asmb.stiffness, c); it; ++it) {
        trip.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), cplx(1.0, 0.0));
      }
    }
    for (int r = 0; r < n; ++r) trip.emplace_back(r, r, cplx(1.0, 0.0));
    for (const auto& p : asmb.ports) {
      for (int r : p.dofs) {
        for (int c : p.dofs) trip.emplace_back(r, c, cplx(1.0, 0.0));
      }
    }
    a.resize(n, n);
    a.setFromTriplets(trip.begin(), trip.end());
    a.makeCompressed();

    auto slot = [this](int r, int c) {
      return static_cast<int>(&a.coeffRef(r, c) - a.valuePtr());
    };
    for (int c = 0; c < asmb.stiffness.outerSize(); ++c) {
      for (SpMatR::InnerIterator it(asmb.stiffness, c); it; ++it) {
        stiff_pos.push_back(slot(static_cast<int>(it.row()), static_cast<int>(it.col())));
        stiff_val.push_back(it.value());
      }
    }
    for (int r = 0; r < n; ++r) diag_pos.push_back(slot(r, r));
    for (const auto& p : asmb.ports) {
      std::vector<int> pos;
      pos.reserve(p.dofs.size() * p.dofs.size());
      for (int r : p.dofs) {
        for (int c : p.dofs) pos.push_back(slot(r, c));
      }
      block_pos.push_back(std::move(pos));
    }
  }

  SMatrix2 solve(double f) {
    if (!(f > 0.0)) throw Error(ErrorCode::modeling, "frequency must be positive");
    const double k0 = wavenumber(f);
    const double k2 = k0 * k0;
    cplx* v = a.valuePtr();
    std::fill(v, v + a.nonZeros(), cplx(0.0, 0.0));
    for (std::size_t e = 0; e < stiff_pos.size(); ++e) v[stiff_pos[e]] -= stiff_val[e];
    for (int r = 0; r < asmb.n; ++r) v[diag_pos[r]] += k2 * asmb.mass[r];

    Eigen::MatrixXcd rhs = Eigen::MatrixXcd::Zero(asmb.n, 2);
    double flux[2];
    for (int p = 0; p < 2; ++p) {
      const auto& port = asmb.ports[p];
      const int m = static_cast<int>(port.dofs.size());
      const double d = port.d;
      Eigen::VectorXcd lambda(m);
      int highest_propagating = 0;
      for (int q = 0; q < m; ++q) {
        const cplx c = 1.0 - 0.5 * d * d * (k2 * port.eps - port.mu(q));
        lambda(q) = outgoing_root(c);
        if (std::abs(std::abs(lambda(q)) - 1.0) < 1e-12) highest_propagating = mode_stride * q + 1;
      }
      if (highest_propagating == 0 || std::abs(std::abs(lambda(0)) - 1.0) >= 1e-12) {
        std::ostringstream os;
        os << "fundamental port mode is below cutoff at " << f / GHz << " GHz (port " << p + 1 << ")";
        throw Error(ErrorCode::modeling, os.str());
      }
      if (highest_propagating > options.mode_count) {
        std::ostringstream os;
        os << "port " << p + 1 << " mode " << highest_propagating << " propagates at " << f / GHz
           << " GHz but only " << options.mode_count << " port modes are retained";
        throw Error(ErrorCode::modeling, os.str());
      }
      flux[p] = -lambda(0).imag() / d;  // sin(beta d) / d

      const Eigen::MatrixXd g = port.wx.asDiagonal() * port.phi;
      const Eigen::MatrixXcd block = (g.cast<cplx>() * lambda.asDiagonal()) * g.transpose().cast<cplx>() / d;
      const auto& pos = block_pos[p];
      for (int r = 0; r < m; ++r) {
        for (int c = 0; c < m; ++c) v[pos[static_cast<std::size_t>(r) * m + c]] += block(r, c);
      }
      const cplx drive = (1.0 / lambda(0) - lambda(0)) / d;
      for (int r = 0; r < m; ++r) rhs(port.dofs[r], p) = -g(r, 0) * drive;
    }

    if (!analyzed) {
      lu.analyzePattern(a);
      analyzed = true;
    }
    lu.factorize(a);
    if (lu.info() != Eigen::Success) {
      std::ostringstream os;
      os << "sparse factorization failed at " << f / GHz << " GHz (" << asmb.n << " unknowns)";
      throw Error(ErrorCode::solver, os.str());
    }
    const Eigen::MatrixXcd sol = lu.solve(rhs);
    if (!sol.allFinite()) {
      throw Error(ErrorCode::solver, "sparse solve produced non-finite values");
    }

    // Modal amplitudes of the fundamental at each port for each excitation.
    cplx amp[2][2];
    for (int p = 0; p < 2; ++p) {
      const auto& port = asmb.ports[p];
      for (int e = 0; e < 2; ++e) {
        cplx acc(0.0, 0.0);
        for (std::size_t r = 0; r < port.dofs.size(); ++r) {
          acc += port.wx(static_cast<int>(r)) * port.phi(static_cast<int>(r), 0) * sol(port.dofs[r], e);
        }
        amp[p][e] = acc;
      }
    }
    SMatrix2 s;
    s.s11 = amp[0][0] - 1.0;
    s.s22 = amp[1][1] - 1.0;
    s.s21 = amp[1][0] * std::sqrt(flux[1] / flux[0]);
    s.s12 = amp[0][1] * std::sqrt(flux[0] / flux[1]);
    return s;
  }
};

FdfdSolver::FdfdSolver(const PermittivityGrid& grid, SolveOptions options)
    : impl_(std::make_unique<Impl>(grid, options)) {}
FdfdSolver::~FdfdSolver() = default;
FdfdSolver::FdfdSolver(FdfdSolver&&) noexcept = default;
FdfdSolver& FdfdSolver::operator=(FdfdSolver&&) noexcept = default;

SMatrix2 FdfdSolver::solve(double f) { return impl_->solve(f); }

SParamSet FdfdSolver::sweep(std::span<const double> frequencies) {
  SParamSet out;
  out.h = impl_->h;
  out.mode_count = impl_->options.mode_count;
  double prev = 0.0;
  for (double f : frequencies) {
    if (!(f > prev)) throw Error(ErrorCode::modeling, "sweep frequencies must be strictly increasing");
    prev = f;
    out.frequencies.push_back(f);
    out.s.push_back(solve(f));
  }
  return out;
}

std::size_t FdfdSolver::unknowns() const { return static_cast<std::size_t>(impl_->asmb.n); }

SMatrix2 fdfd_solve(const PermittivityGrid& grid, double f, SolveOptions options) {
  FdfdSolver solver(grid, options);
  return solver.solve(f);
}

SParamSet fdfd_sweep(const PermittivityGrid& grid, std::span<const double> frequencies,
                     SolveOptions options) {
  FdfdSolver solver(grid, options);
  return solver.sweep(frequencies);
}

// --- eigen solver ----------------------------------------------------------------

namespace {

std::vector<double> lanczos_band(const Assembly& asmb, double f_lo, double f_hi,
                                 const EigenOptions& opt) {
  const int n = asmb.n;
  Eigen::VectorXd dmass(n);
  for (int r = 0; r < n; ++r) dmass(r) = asmb.mass[r].real();
  const Eigen::VectorXd dsqrt = dmass.cwiseSqrt();

  const double k_lo = wavenumber(f_lo), k_hi = wavenumber(f_hi);
  const double kc = wavenumber(0.5 * (f_lo + f_hi));
  const double sigma = kc * kc;
  // Any mode in band maps to |theta| above this.
  const double theta_min = 1.0 / std::max(k_hi * k_hi - sigma, sigma - k_lo * k_lo);

  SpMatR shifted = asmb.stiffness;
  for (int r = 0; r < n; ++r) shifted.coeffRef(r, r) -= sigma * dmass(r);
  shifted.makeCompressed();
  Eigen::UmfPackLU<SpMatR> lu;
  lu.compute(shifted);
  if (lu.info() != Eigen::Success) {
    throw Error(ErrorCode::solver, "shift-invert factorization failed in the eigensolver");
  }
  auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const Eigen::VectorXd y = lu.solve(Eigen::VectorXd(dsqrt.cwiseProduct(x)));
    return dsqrt.cwiseProduct(y);
  };

  std::mt19937 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::VectorXd start(n);
  for (int r = 0; r < n; ++r) start(r) = normal(rng);

  int m_max = std::min(n, std::max(opt.krylov_dim, 8));
  while (true) {
    Eigen::MatrixXd q(n, m_max + 1);
    std::vector<double> alpha, beta;
    q.col(0) = start.normalized();
    int m = 0;
    for (; m < m_max; ++m) {
      Eigen::VectorXd w = apply(q.col(m));
      const double al = q.col(m).dot(w);
      alpha.push_back(al);
      for (int pass = 0; pass < 2; ++pass) {
        const Eigen::VectorXd coeff = q.leftCols(m + 1).transpose() * w;
        w -= q.leftCols(m + 1) * coeff;
      }
      const double be = w.norm();
      beta.push_back(be);
      if (be < 1e-14 * std::abs(al) || m + 1 == n) {
        ++m;
        break;
      }
      q.col(m + 1) = w / be;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const double last_beta = beta[m - 1];
    std::vector<double> found;
    bool unconverged_in_band = false;
    for (int i = 0; i < m; ++i) {
      const double theta = es.eigenvalues()(i);
      if (std::abs(theta) < theta_min) continue;
      const double resid = std::abs(last_beta * es.eigenvectors()(m - 1, i));
      const double kappa = sigma + 1.0 / theta;
      if (!(kappa > 0.0)) continue;
      const double f = c0 * std::sqrt(kappa) / (2.0 * pi);
      if (f < f_lo || f > f_hi) continue;
      if (resid > opt.tolerance * std::abs(theta)) {
        unconverged_in_band = true;
        continue;
      }
      found.push_back(f);
    }
    if (!unconverged_in_band || m_max >= n) {
      std::sort(found.begin(), found.end());
      return found;
    }
    m_max = std::min(n, 2 * m_max);
  }
}

}  // namespace

EigenResult resonant_frequencies(const PermittivityGrid& grid, Symmetry symmetry, double f_lo,
                                 double f_hi, EigenOptions options) {
  if (!grid.ports.empty()) {
    throw Error(ErrorCode::modeling, "resonance search needs a closed scene");
  }
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) {
    throw Error(ErrorCode::modeling, "resonance search band must satisfy 0 < f_lo < f_hi");
  }
  const int i_mid = options.x_even_only ? x_mirror_line(grid) : -1;
  EigenResult out;
  if (symmetry == Symmetry::none) {
    const auto asmb = assemble(grid, grid.nz() - 1, TopWall::port_or_metal, false, i_mid);
    out.frequencies = lanczos_band(asmb, f_lo, f_hi, options);
  } else {
    const double zmid = 0.5 * (grid.zs.front() + grid.zs.back());
    int kmid = -1;
    for (int k = 0; k < grid.nz(); ++k) {
      if (std::abs(grid.zs[k] - zmid) <= 1e-12) kmid = k;
    }
    if (kmid <= 0) throw Error(ErrorCode::modeling, "grid has no line on the symmetry plane");
    const auto top = symmetry == Symmetry::even ? TopWall::magnetic : TopWall::electric;
    const auto asmb = assemble(grid, kmid, top, false, i_mid);
    out.frequencies = lanczos_band(asmb, f_lo, f_hi, options);
  }
  out.labels.assign(out.frequencies.size(), symmetry);
  return out;
}

}  // namespace evf
