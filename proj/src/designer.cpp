#include "evf/designer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include "evf/error.hpp"

namespace evf {

// --- designs -------------------------------------------------------------------

Scene2D FilterDesign::scene(double tan_delta) const {
  Scene2D s = topology == Topology::airhole ? build_airhole(airhole) : build_posts(posts);
  return tan_delta > 0.0 ? s.with_loss_tangent(tan_delta) : s;
}

double FilterDesign::l_ev() const {
  return topology == Topology::airhole ? airhole.l_ev() : posts.l_ev();
}

double FilterDesign::l_tot() const {
  return topology == Topology::airhole ? airhole.l_tot() : posts.l_tot();
}

int FilterDesign::order() const {
  return topology == Topology::airhole ? airhole.order : posts.order;
}

void FilterDesign::validate() const {
  if (topology == Topology::airhole) {
    airhole.validate();
  } else {
    posts.validate();
  }
}

// Lengths in metres.
FilterDesign reference_airhole() {
  FilterDesign d;
  d.topology = Topology::airhole;
  d.airhole.l_port = 10.0e-3;
  d.airhole.l_d = 7.0e-3;
  d.airhole.l_step = 0.0;
  d.airhole.resonator_lengths = {22.11e-3, 23.23e-3, 23.13e-3};
  d.airhole.hole_rz = {4.859e-3, 14.54e-3, 16.86e-3};
  return d;
}

FilterDesign reference_posts() {
  FilterDesign d;
  d.topology = Topology::posts;
  d.posts.l_port = 15.0e-3;
  d.posts.l_s1 = -0.439e-3;
  d.posts.gaps = {24.6e-3, 28.474e-3};
  d.posts.post_rz = {13.619e-3, 14.208e-3, 14.219e-3};
  return d;
}

FilterDesign reference_airhole_wideband() {
  FilterDesign d;
  d.topology = Topology::airhole;
  d.airhole.l_port = 10.0e-3;
  d.airhole.l_d = 7.0e-3;
  d.airhole.l_step = 8.25e-3;
  d.airhole.resonator_lengths = {22.059e-3, 23.255e-3, 23.411e-3};
  d.airhole.hole_rz = {6.752e-3, 11.702e-3, 13.623e-3};
  return d;
}

// --- initial dimensions --------------------------------------------------------------

CurveContext default_context(Topology t, const FilterSpec& spec, double h) {
  CurveContext ctx;
  ctx.f_c = spec.center_frequency;
  ctx.bandwidth = spec.bandwidth;
  ctx.h = h;
  ctx.l_port = t == Topology::airhole ? 10.0 * mm : 15.0 * mm;
  return ctx;
}

namespace {

[[noreturn]] void infeasible(const std::string& what) {
  throw Error(ErrorCode::infeasible_spec, what);
}

double invert_named(const DesignCurve& c, double target, const std::string& name) {
  try {
    return invert_curve(c, target);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::range) throw;
    std::ostringstream os;
    os << name << " = " << target << " is outside the achievable range of the "
       << to_string(c.variable) << " curve (" << e.what() << ")";
    infeasible(os.str());
  }
}

}  // namespace

FilterDesign initial_dims(const FilterSpec& spec, Topology topology, const CurveContext& ctx,
                          CurveSet* curves) {
  spec.validate();
  if (std::abs(ctx.f_c / spec.center_frequency - 1.0) > 1e-9) {
    throw Error(ErrorCode::invalid_spec, "curve context centre frequency differs from the spec");
  }
  CurveSet local;
  CurveSet& cs = curves ? *curves : local;
  const bool posts = topology == Topology::posts;
  const auto cvar = posts ? CurveVariable::post_gap : CurveVariable::hole_rz;
  const auto qvar = posts ? CurveVariable::step_gap : CurveVariable::input_hole;
  if (!cs.coupling) {
    const auto r = default_range(cvar);
    cs.coupling = sweep_curve(cvar, ctx, r.lo, r.hi, r.n);
  }
  if (!cs.qext) {
    const auto r = default_range(qvar);
    cs.qext = sweep_curve(qvar, ctx, r.lo, r.hi, r.n);
  }
  if (cs.coupling->variable != cvar || cs.qext->variable != qvar) {
    throw Error(ErrorCode::curve, "supplied curves do not match the topology");
  }
  if (!(cs.isolated > 0.0)) cs.isolated = isolated_resonator(topology, ctx);

  const auto proto = synth_prototype(spec.order, spec.return_loss);
  const auto cm = prototype_to_coupling(proto);
  const int n = spec.order;

  // Curves store M for their own bandwidth; convert through k = M BW / f_c.
  const auto& cc = *cs.coupling;
  const double m_scale = (spec.bandwidth / cc.context.bandwidth) *
                         (cc.context.f_c / spec.center_frequency);
  std::vector<double> coupling_dim(n + 1, 0.0);  // index i: coupling between i and i+1
  std::vector<double> loading(n + 1, 0.0);       // resonator shift from each coupling element
  const double iso = cs.isolated;
  for (int i = 1; i < n; ++i) {
    std::ostringstream name;
    name << "M_" << i << (i + 1);
    const double target = cm.resonator_coupling(i, i + 1) * m_scale;
    coupling_dim[i] = invert_named(cc, target, name.str());
    loading[i] = cc.resonator_at(coupling_dim[i]) - iso;
  }
  const double q_target = qext_required(spec, cm.source_coupling());
  const double q_dim = invert_named(*cs.qext, q_target, "Q_ext");
  const double port_loading = 0.5 * (cs.qext->resonator_at(q_dim) - iso);
  loading[0] = port_loading;
  loading[n] = port_loading;
  coupling_dim[0] = q_dim;
  coupling_dim[n] = q_dim;

  std::vector<double> res(n);
  for (int i = 1; i <= n; ++i) res[i - 1] = iso + loading[i - 1] + loading[i];

  FilterDesign d;
  d.topology = topology;
  const int nh = half_count(n);
  if (posts) {
    auto& p = d.posts;
    p.order = n;
    p.a = ctx.a;
    p.a_ev = ctx.a_ev;
    p.l_port = ctx.port_length(Topology::posts);
    p.rx = ctx.rx;
    p.material = ctx.material;
    p.l_s1 = q_dim;
    p.post_rz.assign(res.begin(), res.begin() + nh);
    p.gaps.clear();
    for (int i = 1; i <= half_count(n - 1); ++i) p.gaps.push_back(coupling_dim[i]);
  } else {
    auto& p = d.airhole;
    p.order = n;
    p.a = ctx.a;
    p.a_ev = ctx.a_ev;
    p.l_port = ctx.port_length(Topology::airhole);
    p.l_d = ctx.l_d;
    p.l_step = ctx.l_step;
    p.rx = ctx.rx;
    p.material = ctx.material;
    p.hole_rz.clear();
    for (int i = 0; i < half_count(n + 1); ++i) p.hole_rz.push_back(coupling_dim[i]);
    p.resonator_lengths.assign(res.begin(), res.begin() + nh);
  }
  d.validate();
  return d;
}

// --- refinement -------------------------------------------------------------------

std::vector<double> objective_frequencies(const FilterSpec& spec) {
  spec.validate();
  const int n = spec.order;
  std::vector<double> lambdas;
  for (int k = 1; k <= n; ++k) lambdas.push_back(std::cos((2.0 * k - 1.0) * pi / (2.0 * n)));
  for (int k = 1; k < n; ++k) lambdas.push_back(std::cos(k * pi / n));
  lambdas.insert(lambdas.end(), {-1.0, 1.0, -1.6, 1.6});
  std::vector<double> f;
  for (double lam : lambdas) {
    const double u = lam * spec.bandwidth / spec.center_frequency;
    f.push_back(spec.center_frequency * 0.5 * (u + std::sqrt(u * u + 4.0)));
  }
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end(), [](double a, double b) { return std::abs(a - b) < 1.0; }),
          f.end());
  return f;
}

SParamSet parallel_sweep(const PermittivityGrid& grid, const std::vector<double>& frequencies,
                         int threads, SolveOptions options) {
  const int nf = static_cast<int>(frequencies.size());
  const int nt = std::clamp(threads, 1, std::max(1, nf));
  SParamSet out;
  out.h = grid.h;
  out.mode_count = options.mode_count;
  out.frequencies = frequencies;
  out.s.resize(frequencies.size());
  if (nt == 1) {
    FdfdSolver solver(grid, options);
    for (int i = 0; i < nf; ++i) out.s[i] = solver.solve(frequencies[i]);
    return out;
  }
  std::vector<std::exception_ptr> errors(nt);
  std::vector<std::thread> pool;
  for (int t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      try {
        FdfdSolver solver(grid, options);
        for (int i = t * nf / nt; i < (t + 1) * nf / nt; ++i) out.s[i] = solver.solve(frequencies[i]);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

ResponseModel em_model(double h, int threads) {
  return [h, threads](const FilterDesign& d, const std::vector<double>& f) {
    const auto set = parallel_sweep(rasterize(d.scene(), h), f, threads);
    std::vector<cplx> s11;
    for (const auto& s : set.s) s11.push_back(s.s11);
    return s11;
  };
}

namespace {

// Variables in mm; `resonator` flags the resonator dimensions.
std::vector<double> pack(const FilterDesign& d, std::vector<bool>& resonator) {
  std::vector<double> x;
  auto add = [&](const std::vector<double>& v, bool res) {
    for (double e : v) {
      x.push_back(e / mm);
      resonator.push_back(res);
    }
  };
  resonator.clear();
  if (d.topology == Topology::posts) {
    add({d.posts.l_s1}, false);
    add(d.posts.gaps, false);
    add(d.posts.post_rz, true);
  } else {
    add(d.airhole.hole_rz, false);
    add(d.airhole.resonator_lengths, true);
  }
  return x;
}

FilterDesign unpack(const FilterDesign& base, const double* x, const std::optional<Housing>& housing) {
  FilterDesign d = base;
  std::size_t k = 0;
  if (d.topology == Topology::posts) {
    d.posts.l_s1 = x[k++] * mm;
    for (double& g : d.posts.gaps) g = x[k++] * mm;
    for (double& r : d.posts.post_rz) r = x[k++] * mm;
  } else {
    for (double& r : d.airhole.hole_rz) r = x[k++] * mm;
    for (double& l : d.airhole.resonator_lengths) l = x[k++] * mm;
    if (housing) d = close_length(d, *housing);
  }
  return d;
}

struct Problem {
  const FilterDesign* base;
  std::optional<Housing> housing;
  const ResponseModel* model;
  std::vector<double> freqs, weights, ideal_db, ideal_mag;
  double floor_db;
  double h;
  int budget;
  int evaluations = 0;
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_x;
  std::vector<double> best_res;  // linear magnitude residuals at best_x
  std::vector<cplx> last_s11;    // S11 of the latest simulation
  std::vector<double> history;
  int accepted = 0;

  static constexpr double kRejected = 1e6;

  // Weighted mean square dB error; `res` receives the weighted |S11| residuals.
  double objective(const double* x, std::size_t nx, std::vector<double>* res = nullptr) {
    FilterDesign d;
    try {
      d = unpack(*base, x, housing);
      d.validate();
      for (const auto& e : d.scene().inclusions) {
        if (std::min(e.rx, e.rz) < h) return kRejected;
      }
    } catch (const Error&) {
      return kRejected;
    }
    if (evaluations >= budget) return kRejected;
    std::vector<cplx> s11;
    try {
      s11 = (*model)(d, freqs);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::geometry || e.code() == ErrorCode::resolution) return kRejected;
      throw;
    }
    ++evaluations;
    last_s11 = s11;
    const double den = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<double> r(freqs.size());
    double value = 0.0;
    for (std::size_t i = 0; i < freqs.size(); ++i) {
      const double db = std::max(floor_db, to_db(std::abs(s11[i])));
      value += weights[i] / den * (db - ideal_db[i]) * (db - ideal_db[i]);
      r[i] = std::sqrt(weights[i] / den) * (std::abs(s11[i]) - ideal_mag[i]);
    }
    if (value < best) {
      if (evaluations > 1) ++accepted;
      best = value;
      best_x.assign(x, x + nx);
      best_res = r;
    }
    if (res) *res = std::move(r);
    history.push_back(best);
    return value;
  }
};

double gsl_objective(const gsl_vector* v, void* params) {
  auto* p = static_cast<Problem*>(params);
  return p->objective(v->data, v->size);
}

// Damped Gauss-Newton on the |S11| magnitude residuals with forward-difference Jacobians.
// Returns true when the step size fell below `min_step`.
bool levenberg_marquardt(Problem& p, const std::vector<double>& fd, const std::vector<double>& trust,
                         double min_step, double tolerance) {
  const std::size_t nx = fd.size();
  std::vector<double> x = p.best_x;
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(p.best_res.data(), p.best_res.size());
  double f = r.squaredNorm();
  double mu = 1e-2;
  while (p.best > tolerance && p.evaluations + static_cast<int>(nx) + 1 <= p.budget) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(r.size(), nx);
    for (std::size_t j = 0; j < nx; ++j) {
      std::vector<double> xp = x, rp;
      for (double sign : {1.0, -1.0}) {
        xp[j] = x[j] + sign * fd[j];
        if (p.objective(xp.data(), nx, &rp) < Problem::kRejected) {
          jac.col(j) = (Eigen::Map<const Eigen::VectorXd>(rp.data(), rp.size()) - r) / (sign * fd[j]);
          break;
        }
      }
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;
    bool moved = false;
    double largest = 0.0;
    for (int attempt = 0; attempt < 6 && p.evaluations < p.budget; ++attempt) {
      Eigen::MatrixXd a = jtj;
      for (std::size_t j = 0; j < nx; ++j) a(j, j) += mu * jtj(j, j) + 1e-12;
      Eigen::VectorXd step = -a.ldlt().solve(g);
      double scale = 1.0;
      for (std::size_t j = 0; j < nx; ++j) scale = std::min(scale, trust[j] / (std::abs(step(j)) + 1e-300));
      step *= scale;
      largest = 0.0;
      std::vector<double> xn = x, rn;
      for (std::size_t j = 0; j < nx; ++j) {
        xn[j] += step(j);
        largest = std::max(largest, std::abs(step(j)));
      }
      if (p.objective(xn.data(), nx, &rn) >= Problem::kRejected) {
        mu *= 4.0;
        continue;
      }
      const double fn = Eigen::Map<const Eigen::VectorXd>(rn.data(), rn.size()).squaredNorm();
      if (fn < f) {
        x = xn;
        r = Eigen::Map<const Eigen::VectorXd>(rn.data(), rn.size());
        f = fn;
        mu = std::max(mu / 3.0, 1e-6);
        moved = true;
        break;
      }
      mu *= 4.0;
      if (largest < min_step) break;
    }
    if (!moved) return largest < min_step;
    if (largest < min_step) return true;
  }
  return false;
}

// Symmetric in-line circuit: couplings c_0 = M_S1, c_k = M_k,k+1, then detunings b_k.
CouplingMatrix symmetric_matrix(const Eigen::VectorXd& p, int n) {
  const int nc = half_count(n + 1);
  CouplingMatrix m;
  m.n = n;
  m.values = Eigen::MatrixXd::Zero(n + 2, n + 2);
  for (int i = 0; i <= n; ++i) {
    const double c = p(std::min(i, n - i));
    m.values(i, i + 1) = c;
    m.values(i + 1, i) = c;
  }
  for (int i = 1; i <= n; ++i) m.values(i, i) = p(nc + std::min(i - 1, n - i));
  return m;
}

// Circuit S11 with a reference-plane phase exp(j (q0 + q1 u)), u = (f - f_c) / BW.
// Returns stacked real and imaginary parts. `p` holds the circuit parameters then q0, q1.
Eigen::VectorXd circuit_s11(const Eigen::VectorXd& p, const FilterSpec& spec,
                            const std::vector<double>& freqs) {
  const Eigen::Index np = p.size() - 2;
  const auto r = cm_response(symmetric_matrix(p.head(np), spec.order), spec, lossless, freqs);
  const auto m = static_cast<Eigen::Index>(freqs.size());
  Eigen::VectorXd out(2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double u = (freqs[i] - spec.center_frequency) / spec.bandwidth;
    const cplx s = r.singular[i] ? cplx(1.0, 0.0) : r.s11[i];
    const cplx v = s * std::polar(1.0, p(np) + p(np + 1) * u);
    out(i) = v.real();
    out(m + i) = v.imag();
  }
  return out;
}

// Circuit parameters whose S11 best matches the simulated `s11` up to a reference-plane
// phase, by Levenberg-Marquardt from each guess.
Eigen::VectorXd extract_parameters(const std::vector<cplx>& s11, const FilterSpec& spec,
                                   const std::vector<double>& freqs,
                                   const std::vector<Eigen::VectorXd>& guesses) {
  const auto m = static_cast<Eigen::Index>(s11.size());
  Eigen::VectorXd target(2 * m);
  for (Eigen::Index i = 0; i < m; ++i) {
    target(i) = s11[i].real();
    target(m + i) = s11[i].imag();
  }
  Eigen::VectorXd best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (const auto& guess : guesses) {
    const Eigen::Index np = guess.size();
    Eigen::VectorXd p(np + 2);
    p.head(np) = guess;
    // Phase start: scan the slope, closed-form offset.
    double start_cost = std::numeric_limits<double>::infinity();
    Eigen::VectorXd p0 = p;
    for (double q1 = -4.0; q1 <= 4.0 + 1e-9; q1 += 0.25) {
      p0(np) = 0.0;
      p0(np + 1) = q1;
      const Eigen::VectorXd c = circuit_s11(p0, spec, freqs);
      cplx dot(0.0, 0.0);
      for (Eigen::Index i = 0; i < m; ++i) dot += cplx(target(i), target(m + i)) * cplx(c(i), -c(m + i));
      p0(np) = std::arg(dot);
      const double cost = (circuit_s11(p0, spec, freqs) - target).squaredNorm();
      if (cost < start_cost) {
        start_cost = cost;
        p = p0;
      }
    }
    Eigen::VectorXd r = circuit_s11(p, spec, freqs) - target;
    double cost = r.squaredNorm();
    double mu = 1e-3;
    for (int it = 0; it < 200 && cost > 1e-14; ++it) {
      Eigen::MatrixXd jac(r.size(), p.size());
      for (Eigen::Index j = 0; j < p.size(); ++j) {
        Eigen::VectorXd q = p;
        q(j) += 1e-6;
        jac.col(j) = (circuit_s11(q, spec, freqs) - target - r) / 1e-6;
      }
      const Eigen::MatrixXd jtj = jac.transpose() * jac;
      const Eigen::VectorXd g = jac.transpose() * r;
      bool moved = false;
      while (mu < 1e8) {
        Eigen::MatrixXd a = jtj;
        a.diagonal() += mu * (jtj.diagonal().array() + 1e-9).matrix();
        const Eigen::VectorXd q = p - a.ldlt().solve(g);
        const Eigen::VectorXd rq = circuit_s11(q, spec, freqs) - target;
        if (rq.squaredNorm() < cost) {
          const double gain = cost - rq.squaredNorm();
          p = q;
          r = rq;
          cost = rq.squaredNorm();
          mu = std::max(mu / 5.0, 1e-9);
          moved = gain > 1e-12 * cost;
          break;
        }
        mu *= 5.0;
      }
      if (!moved) break;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best = p.head(np);
    }
  }
  return best;
}

// Aggressive space mapping: drive the extracted circuit parameters to the prototype
// with a finite-difference Jacobian and Broyden updates. Needs one variable per parameter.
void space_mapping(Problem& p, const FilterSpec& spec, const std::vector<double>& fd,
                   const std::vector<double>& trust, double tolerance) {
  const int n = spec.order;
  const int nc = half_count(n + 1);
  const std::size_t nx = fd.size();
  if (static_cast<int>(nx) != nc + half_count(n)) return;
  if (p.evaluations + static_cast<int>(nx) + 1 > p.budget) return;

  const auto cm = prototype_to_coupling(synth_prototype(n, spec.return_loss));
  Eigen::VectorXd goal = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx));
  for (int k = 0; k < nc; ++k) goal(k) = std::abs(cm.values(k, k + 1));

  std::vector<double> x = p.best_x;
  if (p.objective(x.data(), nx) >= Problem::kRejected) return;
  Eigen::VectorXd par = extract_parameters(p.last_s11, spec, p.freqs, {goal});
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(nx), static_cast<Eigen::Index>(nx));
  for (std::size_t j = 0; j < nx; ++j) {
    std::vector<double> xp = x;
    double d = fd[j];
    xp[j] = x[j] + d;
    if (p.objective(xp.data(), nx) >= Problem::kRejected) {
      d = -fd[j];
      xp[j] = x[j] + d;
      if (p.objective(xp.data(), nx) >= Problem::kRejected) return;
    }
    const auto pj = extract_parameters(p.last_s11, spec, p.freqs, {par, goal});
    jac.col(static_cast<Eigen::Index>(j)) = (pj - par) / d;
  }

  double err = (goal - par).norm();
  int stalls = 0;
  while (p.best > tolerance && p.evaluations < p.budget && stalls < 3) {
    Eigen::VectorXd dx = jac.fullPivLu().solve(goal - par);
    double scale = 1.0;
    for (std::size_t j = 0; j < nx; ++j) {
      scale = std::min(scale, trust[j] / (std::abs(dx(static_cast<Eigen::Index>(j))) + 1e-300));
    }
    dx *= scale;
    std::vector<double> xn = x;
    for (std::size_t j = 0; j < nx; ++j) xn[j] += dx(static_cast<Eigen::Index>(j));
    if (p.objective(xn.data(), nx) >= Problem::kRejected) return;
    const Eigen::VectorXd pn = extract_parameters(p.last_s11, spec, p.freqs, {par, goal});
    const Eigen::VectorXd dp = pn - par;
    jac += (dp - jac * dx) * dx.transpose() / dx.squaredNorm();
    const double en = (goal - pn).norm();
    if (en < err) {
      stalls = en < 0.7 * err ? 0 : stalls + 1;
      x = xn;
      par = pn;
      err = en;
    } else {
      ++stalls;
    }
    if (err < 1e-4) return;
  }
}

}  // namespace

RefineResult refine(const FilterDesign& start, const FilterSpec& spec,
                    const RefineSettings& settings) {
  return refine(start, spec, settings, em_model(settings.h, settings.threads));
}

namespace {

RefineResult refine_impl(const FilterDesign& start, const FilterSpec& spec,
                         const RefineSettings& settings, const ResponseModel& model,
                         const std::optional<Housing>& housing) {
  if (settings.max_evaluations < 1) throw Error(ErrorCode::invalid_spec, "refine budget must be >= 1");
  spec.validate();
  start.validate();

  Problem prob;
  prob.base = &start;
  prob.housing = housing;
  prob.model = &model;
  prob.freqs = settings.frequencies.empty() ? objective_frequencies(spec) : settings.frequencies;
  prob.weights = settings.weights.empty() ? std::vector<double>(prob.freqs.size(), 1.0)
                                          : settings.weights;
  if (prob.weights.size() != prob.freqs.size()) {
    throw Error(ErrorCode::invalid_spec, "refine weights and frequencies differ in length");
  }
  prob.floor_db = settings.floor_db;
  prob.h = settings.h;
  prob.budget = settings.max_evaluations;
  const auto cm = prototype_to_coupling(synth_prototype(spec.order, spec.return_loss));
  const auto ideal = cm_response(cm, spec, lossless, prob.freqs);
  for (const auto& s : ideal.s11) {
    prob.ideal_db.push_back(std::max(settings.floor_db, to_db(std::abs(s))));
    prob.ideal_mag.push_back(std::abs(s));
  }

  std::vector<bool> is_resonator;
  std::vector<double> x0 = pack(start, is_resonator);
  const std::size_t nx = x0.size();
  if (nx > 12) throw Error(ErrorCode::invalid_spec, "refine supports at most 12 variables");

  RefineResult out;
  const double f0 = prob.objective(x0.data(), nx);
  if (f0 >= Problem::kRejected) {
    throw Error(ErrorCode::geometry, "starting dimensions cannot be simulated");
  }
  out.initial_objective = f0;

  gsl_set_error_handler_off();
  gsl_multimin_function fn{&gsl_objective, nx, &prob};
  gsl_vector* x = gsl_vector_alloc(nx);
  gsl_vector* step = gsl_vector_alloc(nx);
  gsl_multimin_fminimizer* mz = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, nx);

  std::vector<double> fd(nx), trust(nx);
  for (std::size_t i = 0; i < nx; ++i) {
    const double base_step = (is_resonator[i] ? settings.resonator_step : settings.initial_step) / mm;
    fd[i] = 0.2 * base_step;
    trust[i] = 4.0 * base_step;
  }
  std::vector<double> sm_trust(nx);
  for (std::size_t i = 0; i < nx; ++i) sm_trust[i] = 2.5 * trust[i];
  if (prob.best > settings.tolerance) {
    std::vector<double> sm_fd(nx);
    for (std::size_t i = 0; i < nx; ++i) sm_fd[i] = 5.0 * fd[i];
    space_mapping(prob, spec, sm_fd, sm_trust, settings.tolerance);
  }
  bool lm_converged = false;
  if (prob.best > settings.tolerance) {
    lm_converged = levenberg_marquardt(prob, fd, trust, settings.min_step / mm, settings.tolerance);
  }

  double step_mm = settings.initial_step / mm;
  const double res_ratio = settings.resonator_step / settings.initial_step;
  const double min_step_mm = settings.min_step / mm;
  bool converged = prob.best <= settings.tolerance;
  while (!converged && prob.evaluations < prob.budget && step_mm >= min_step_mm) {
    const double restart_best = prob.best;
    for (std::size_t i = 0; i < nx; ++i) gsl_vector_set(x, i, prob.best_x[i]);
    for (std::size_t i = 0; i < nx; ++i) {
      gsl_vector_set(step, i, is_resonator[i] ? step_mm * res_ratio : step_mm);
    }
    gsl_multimin_fminimizer_set(mz, &fn, x, step);
    while (prob.evaluations < prob.budget) {
      if (gsl_multimin_fminimizer_iterate(mz) != GSL_SUCCESS) break;
      if (prob.best <= settings.tolerance) {
        converged = true;
        break;
      }
      if (gsl_multimin_fminimizer_size(mz) < 0.05 * step_mm * res_ratio) break;
    }
    // Restart around the best point; shrink when the restart gained little.
    if (prob.best > 0.9 * restart_best) step_mm *= 0.5;
  }
  if (!converged && (step_mm < min_step_mm || lm_converged)) converged = true;

  gsl_multimin_fminimizer_free(mz);
  gsl_vector_free(step);
  gsl_vector_free(x);

  out.design = unpack(start, prob.best_x.data(), housing);
  out.objective = prob.best;
  out.evaluations = prob.evaluations;
  out.accepted = prob.accepted;
  out.converged = converged;
  out.history = prob.history;
  return out;
}

}  // namespace

RefineResult refine(const FilterDesign& start, const FilterSpec& spec,
                    const RefineSettings& settings, const ResponseModel& model) {
  return refine_impl(start, spec, settings, model, std::nullopt);
}

// --- evaluation ---------------------------------------------------------------------

namespace {

std::vector<double> grid_points(double lo, double hi, double step) {
  std::vector<double> f;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  for (int i = 0; i <= n; ++i) f.push_back(lo + i * step);
  return f;
}

struct Run {
  std::size_t lo, hi, peak;  // inclusive sample indices
};

// Contiguous transmission run (|S21| >= level) whose peak lies closest to fc.
std::optional<Run> passband_run(const std::vector<double>& f, const std::vector<double>& s21db,
                                double level, double fc) {
  std::optional<Run> best;
  double best_dist = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < f.size()) {
    if (s21db[i] < level) {
      ++i;
      continue;
    }
    Run r{i, i, i};
    while (r.hi + 1 < f.size() && s21db[r.hi + 1] >= level) ++r.hi;
    for (std::size_t k = r.lo; k <= r.hi; ++k) {
      if (s21db[k] > s21db[r.peak]) r.peak = k;
    }
    const double dist = f[r.lo] <= fc && fc <= f[r.hi] ? 0.0 : std::abs(f[r.peak] - fc);
    if (dist < best_dist) {
      best_dist = dist;
      best = r;
    }
    i = r.hi + 1;
  }
  return best;
}

double crossing(double f0, double y0, double f1, double y1, double level) {
  if (y1 == y0) return 0.5 * (f0 + f1);
  return f0 + (level - y0) * (f1 - f0) / (y1 - y0);
}

}  // namespace

DesignReport analyze_response(const SParamSet& response, const FilterSpec& spec,
                              const EvaluateSettings& settings) {
  const auto& f = response.frequencies;
  std::vector<double> s11db, s21db;
  for (const auto& s : response.s) {
    s11db.push_back(to_db(std::abs(s.s11)));
    s21db.push_back(to_db(std::abs(s.s21)));
  }
  const auto run = passband_run(f, s21db, settings.spurious_level_db, spec.center_frequency);
  if (!run) {
    throw Error(ErrorCode::evaluation, "no passband found: |S21| never exceeds the spurious level");
  }
  DesignReport rep;
  rep.tan_delta = settings.tan_delta;
  rep.response = response;

  const double rl = -spec.return_loss;
  std::optional<std::size_t> first, last;
  for (std::size_t k = run->lo; k <= run->hi; ++k) {
    if (s11db[k] <= rl) {
      if (!first) first = k;
      last = k;
    }
  }
  if (first && *first > 0 && *last + 1 < f.size()) {
    const std::size_t a = *first, b = *last;
    rep.f_lower = crossing(f[a - 1], s11db[a - 1], f[a], s11db[a], rl);
    rep.f_upper = crossing(f[b], s11db[b], f[b + 1], s11db[b + 1], rl);
    rep.edges_from_return_loss = true;
  } else {
    const double level = s21db[run->peak] - 3.0;
    std::size_t a = run->peak, b = run->peak;
    while (a > 0 && s21db[a - 1] >= level) --a;
    while (b + 1 < f.size() && s21db[b + 1] >= level) ++b;
    if (a == 0 || b + 1 == f.size()) {
      throw Error(ErrorCode::evaluation, "passband edges lie outside the swept range");
    }
    rep.f_lower = crossing(f[a - 1], s21db[a - 1], f[a], s21db[a], level);
    rep.f_upper = crossing(f[b], s21db[b], f[b + 1], s21db[b + 1], level);
    rep.edges_from_return_loss = false;
  }
  rep.bandwidth = rep.f_upper - rep.f_lower;
  rep.center_frequency = std::sqrt(rep.f_lower * rep.f_upper);
  if (!(rep.bandwidth > 0.0)) throw Error(ErrorCode::evaluation, "degenerate passband");

  double worst_rl = std::numeric_limits<double>::infinity();
  double best_il = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < f.size(); ++k) {
    if (f[k] < rep.f_lower || f[k] > rep.f_upper) continue;
    worst_rl = std::min(worst_rl, -s11db[k]);
    best_il = std::min(best_il, -s21db[k]);
  }
  if (rep.edges_from_return_loss) worst_rl = std::min(worst_rl, spec.return_loss);
  rep.min_return_loss = worst_rl;
  rep.min_insertion_loss = best_il;

  if (settings.find_spurious) {
    std::size_t k = run->hi + 1;
    while (k < f.size()) {
      if (s21db[k] < settings.spurious_level_db) {
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e + 1 < f.size() && s21db[e + 1] >= settings.spurious_level_db) ++e;
      if (f[e] - f[k] >= settings.spurious_span - 1e-3) {
        rep.spurious = k > 0 ? crossing(f[k - 1], s21db[k - 1], f[k], s21db[k],
                                        settings.spurious_level_db)
                             : f[k];
        rep.sfr = *rep.spurious - rep.f_upper;
        break;
      }
      k = e + 1;
    }
  }
  return rep;
}

DesignReport evaluate(const FilterDesign& design, const FilterSpec& spec,
                      const EvaluateSettings& settings) {
  spec.validate();
  design.validate();
  if (!(settings.f_stop > settings.f_start)) {
    throw Error(ErrorCode::invalid_spec, "evaluation band must satisfy start < stop");
  }
  const auto grid = rasterize(design.scene(settings.tan_delta), settings.h);
  FdfdSolver probe(grid);  // validates ports and mode bookkeeping up front
  (void)probe;

  const auto coarse_f = grid_points(settings.f_start, settings.f_stop, settings.coarse_step);
  const auto coarse = parallel_sweep(grid, coarse_f, settings.threads);
  std::vector<double> s21db;
  for (const auto& s : coarse.s) s21db.push_back(to_db(std::abs(s.s21)));
  const auto run = passband_run(coarse_f, s21db, settings.spurious_level_db, spec.center_frequency);
  if (!run) throw Error(ErrorCode::evaluation, "no passband found in the coarse sweep");

  const double lo = std::max(settings.f_start,
                             coarse_f[run->lo] - 2.0 * settings.coarse_step);
  const double hi = std::min(settings.f_stop,
                             coarse_f[run->hi] + 2.0 * settings.coarse_step);
  const auto fine_f = grid_points(lo, hi, settings.fine_step);
  const auto fine = parallel_sweep(grid, fine_f, settings.threads);

  SParamSet merged;
  merged.h = settings.h;
  merged.mode_count = coarse.mode_count;
  std::size_t i = 0, j = 0;
  while (i < coarse_f.size() || j < fine_f.size()) {
    const bool take_fine =
        j < fine_f.size() && (i >= coarse_f.size() || fine_f[j] <= coarse_f[i] + 1.0);
    if (take_fine) {
      if (i < coarse_f.size() && std::abs(coarse_f[i] - fine_f[j]) <= 1.0) ++i;
      merged.frequencies.push_back(fine_f[j]);
      merged.s.push_back(fine.s[j]);
      ++j;
    } else {
      merged.frequencies.push_back(coarse_f[i]);
      merged.s.push_back(coarse.s[i]);
      ++i;
    }
  }
  auto rep = analyze_response(merged, spec, settings);
  rep.design = design;
  return rep;
}

// --- fixed housing ------------------------------------------------------------------

FilterDesign close_length(FilterDesign d, const Housing& housing) {
  if (d.topology != Topology::airhole) {
    throw Error(ErrorCode::invalid_spec, "fixed-housing redesign applies to the air-hole filter");
  }
  auto& p = d.airhole;
  p.a = housing.a;
  p.a_ev = housing.a_ev;
  p.l_port = housing.l_port;
  p.l_d = housing.l_d;
  p.l_step = 0.0;
  const double chain = p.l_ev();
  const double l1 = 0.5 * (housing.l_ev - chain);
  if (l1 < 0.0) {
    std::ostringstream os;
    os << "dimension chain needs " << chain / mm << " mm but the housing provides "
       << housing.l_ev / mm << " mm";
    throw Error(ErrorCode::infeasible_spec, os.str());
  }
  p.l_step = l1;
  return d;
}

RefineResult redesign_fixed_length(const FilterSpec& spec2, const Housing& housing,
                                   const RefineSettings& settings, CurveSet* curves) {
  CurveContext ctx = default_context(Topology::airhole, spec2, settings.h);
  ctx.a = housing.a;
  ctx.a_ev = housing.a_ev;
  ctx.l_port = housing.l_port;
  ctx.l_d = housing.l_d;
  const auto start = close_length(initial_dims(spec2, Topology::airhole, ctx, curves), housing);
  return refine_impl(start, spec2, settings, em_model(settings.h, settings.threads), housing);
}

}  // namespace evf
