#include "evf/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "evf/error.hpp"

namespace evf {

namespace {

constexpr double kLengthTol = 1e-12;  // m, coordinate comparison slack
constexpr double kMergeTol = 1e-9;    // m, breakpoints closer than this merge

[[noreturn]] void geometry_error(const std::string& what) {
  throw Error(ErrorCode::geometry, what);
}

double sum_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

bool rects_touch(const Rect& a, const Rect& b) {
  const double ox = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double oz = std::min(a.z1, b.z1) - std::max(a.z0, b.z0);
  // Overlap, or a shared edge of positive length.
  return (ox >= -kLengthTol && oz > kLengthTol) || (oz >= -kLengthTol && ox > kLengthTol);
}

bool strictly_inside_ellipse(const EllipseInclusion& e, double x, double z) {
  const double u = (x - e.xc) / e.rx;
  const double v = (z - e.zc) / e.rz;
  return u * u + v * v < 1.0 - 1e-9;
}

bool ellipses_overlap(const EllipseInclusion& a, const EllipseInclusion& b) {
  if (a.xc + a.rx <= b.xc - b.rx + kLengthTol || b.xc + b.rx <= a.xc - a.rx + kLengthTol ||
      a.zc + a.rz <= b.zc - b.rz + kLengthTol || b.zc + b.rz <= a.zc - a.rz + kLengthTol) {
    return false;
  }
  if (std::abs(a.xc - b.xc) < kLengthTol && std::abs(a.rx - b.rx) < kLengthTol) {
    // Coaxial along z with equal transverse axes: overlap iff the z spans do.
    return std::abs(a.zc - b.zc) < a.rz + b.rz - kLengthTol;
  }
  if (strictly_inside_ellipse(a, b.xc, b.zc) || strictly_inside_ellipse(b, a.xc, a.zc)) {
    return true;
  }
  constexpr int kSamples = 720;
  for (int s = 0; s < kSamples; ++s) {
    const double t = 2.0 * pi * s / kSamples;
    if (strictly_inside_ellipse(b, a.xc + a.rx * std::cos(t), a.zc + a.rz * std::sin(t)) ||
        strictly_inside_ellipse(a, b.xc + b.rx * std::cos(t), b.zc + b.rz * std::sin(t))) {
      return true;
    }
  }
  return false;
}

// Signed area of the unit disc over [0, x] x [0, y].
double disc_corner_area(double x, double y) {
  const double sx = x < 0 ? -1.0 : 1.0;
  const double sy = y < 0 ? -1.0 : 1.0;
  x = std::min(std::abs(x), 1.0);
  y = std::min(std::abs(y), 1.0);
  double area;
  if (x * x + y * y <= 1.0) {
    area = x * y;
  } else {
    auto prim = [](double u) { return 0.5 * (u * std::sqrt(std::max(0.0, 1.0 - u * u)) + std::asin(u)); };
    const double xs = std::sqrt(std::max(0.0, 1.0 - y * y));
    area = xs * y + prim(x) - prim(xs);
  }
  return sx * sy * area;
}

// Order-independent sum, so mirrored nodes accumulate bit-identical values.
template <typename T, std::size_t N>
T sorted_sum(std::array<T, N>& values, std::size_t count) {
  std::sort(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(count),
            [](const T& a, const T& b) {
              if constexpr (std::is_same_v<T, cplx>) {
                return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
              } else {
                return a < b;
              }
            });
  T sum{};
  for (std::size_t i = 0; i < count; ++i) sum += values[i];
  return sum;
}

}  // namespace

void Material::validate() const {
  if (!(eps_r >= 1.0)) geometry_error("relative permittivity must be >= 1");
  if (!(tan_delta >= 0.0)) geometry_error("loss tangent must be >= 0");
}

double Scene2D::x_min() const {
  double v = rects.empty() ? 0.0 : rects.front().x0;
  for (const auto& r : rects) v = std::min(v, r.x0);
  return v;
}
double Scene2D::x_max() const {
  double v = rects.empty() ? 0.0 : rects.front().x1;
  for (const auto& r : rects) v = std::max(v, r.x1);
  return v;
}
double Scene2D::z_min() const {
  double v = rects.empty() ? 0.0 : rects.front().z0;
  for (const auto& r : rects) v = std::min(v, r.z0);
  return v;
}
double Scene2D::z_max() const {
  double v = rects.empty() ? 0.0 : rects.front().z1;
  for (const auto& r : rects) v = std::max(v, r.z1);
  return v;
}

bool Scene2D::inside(double x, double z) const {
  return std::any_of(rects.begin(), rects.end(),
                     [&](const Rect& r) { return r.contains(x, z); });
}

Material Scene2D::background_at(double x, double z) const {
  for (auto it = rects.rbegin(); it != rects.rend(); ++it) {
    if (it->contains(x, z)) return it->material;
  }
  return air;
}

void Scene2D::validate() const {
  if (rects.empty()) geometry_error("scene has no rectangles");
  for (const auto& r : rects) {
    if (!(r.x1 > r.x0) || !(r.z1 > r.z0)) geometry_error("degenerate rectangle in scene");
    r.material.validate();
  }
  // Connectivity of the outline.
  std::vector<bool> seen(rects.size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t cur = stack.back();
    stack.pop_back();
    for (std::size_t j = 0; j < rects.size(); ++j) {
      if (!seen[j] && rects_touch(rects[cur], rects[j])) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    geometry_error("scene rectangles are not connected");
  }

  for (std::size_t n = 0; n < inclusions.size(); ++n) {
    const auto& e = inclusions[n];
    if (!(e.rx > 0.0) || !(e.rz > 0.0)) geometry_error("inclusion semi-axes must be positive");
    e.material.validate();
    constexpr int kSamples = 360;
    for (int s = 0; s < kSamples; ++s) {
      const double t = 2.0 * pi * s / kSamples;
      const double x = e.xc + e.rx * std::cos(t);
      const double z = e.zc + e.rz * std::sin(t);
      if (!inside(x, z)) {
        std::ostringstream os;
        os << "inclusion " << n << " is clipped by the metal outline";
        geometry_error(os.str());
      }
    }
    for (std::size_t m = n + 1; m < inclusions.size(); ++m) {
      if (ellipses_overlap(e, inclusions[m])) {
        std::ostringstream os;
        os << "inclusions " << n << " and " << m << " overlap";
        geometry_error(os.str());
      }
    }
  }

  if (!ports.empty()) {
    if (ports.size() != 2) geometry_error("a driven scene needs exactly two ports");
    const double zs[2] = {z_min(), z_max()};
    for (int p = 0; p < 2; ++p) {
      const auto& port = ports[p];
      port.background.validate();
      if (std::abs(port.z - zs[p]) > kLengthTol) geometry_error("port plane is not at a scene end");
      if (!(port.x1 > port.x0)) geometry_error("port has no width");
      // The port span must be exactly the domain extent at that end.
      const double zin = p == 0 ? port.z + 1e-9 : port.z - 1e-9;
      double lo = port.x1, hi = port.x0;
      for (const auto& r : rects) {
        if (zin >= r.z0 && zin <= r.z1) {
          lo = std::min(lo, r.x0);
          hi = std::max(hi, r.x1);
        }
      }
      if (std::abs(lo - port.x0) > kLengthTol || std::abs(hi - port.x1) > kLengthTol) {
        geometry_error("port span does not match the guide cross-section");
      }
    }
  }
}

Scene2D Scene2D::mirrored_z() const {
  Scene2D out = *this;
  for (auto& r : out.rects) {
    const double z0 = -r.z1;
    const double z1 = -r.z0;
    r.z0 = z0;
    r.z1 = z1;
  }
  for (auto& e : out.inclusions) e.zc = -e.zc;
  if (!out.ports.empty()) {
    std::swap(out.ports[0], out.ports[1]);
    for (auto& p : out.ports) p.z = -p.z;
  }
  return out;
}

Scene2D Scene2D::with_loss_tangent(double tan_delta) const {
  Scene2D out = *this;
  for (auto& r : out.rects) {
    if (r.material.eps_r > 1.0) r.material.tan_delta = tan_delta;
  }
  for (auto& e : out.inclusions) {
    if (e.material.eps_r > 1.0) e.material.tan_delta = tan_delta;
  }
  return out;
}

std::vector<double> mirror_expand(const std::vector<double>& half, int total) {
  if (static_cast<int>(half.size()) != half_count(total)) {
    geometry_error("half-list length does not match the mirrored count");
  }
  std::vector<double> full(half);
  for (int j = total / 2 - 1; j >= 0; --j) full.push_back(half[j]);
  return full;
}

// --- air-hole filter -------------------------------------------------------

std::vector<double> AirHoleParams::full_hole_rz() const {
  return mirror_expand(hole_rz, order + 1);
}
std::vector<double> AirHoleParams::full_resonator_lengths() const {
  return mirror_expand(resonator_lengths, order);
}

double AirHoleParams::l_ev() const {
  return 2.0 * l_step + 2.0 * sum_of(full_hole_rz()) + sum_of(full_resonator_lengths());
}

void AirHoleParams::validate() const {
  if (order < 1) geometry_error("air-hole filter order must be >= 1");
  if (static_cast<int>(hole_rz.size()) != half_count(order + 1)) {
    geometry_error("air-hole filter needs one semi-axis per mirrored hole");
  }
  if (static_cast<int>(resonator_lengths.size()) != half_count(order)) {
    geometry_error("air-hole filter needs one length per mirrored resonator");
  }
  if (!(a > 0.0) || !(a_ev > 0.0) || a_ev > a) geometry_error("invalid guide widths");
  if (!(2.0 * rx < a_ev)) geometry_error("holes must leave dielectric at the side walls (2 rx < a_ev)");
  if (!(l_port > 0.0)) geometry_error("port length must be positive");
  if (l_d < 0.0 || l_step < 0.0) geometry_error("overhang and step spacing must be >= 0");
  for (double r : hole_rz) {
    if (r < 0.0) geometry_error("hole semi-axes must be >= 0");
  }
  for (double l : resonator_lengths) {
    if (!(l > 0.0)) geometry_error("resonator lengths must be positive");
  }
  material.validate();
}

Scene2D build_airhole(const AirHoleParams& p) {
  p.validate();
  const double lev = p.l_ev();
  const double half_ev = 0.5 * lev;
  const double half_tot = half_ev + p.l_d + p.l_port;
  const double ha = 0.5 * p.a;
  const double hev = 0.5 * p.a_ev;

  Scene2D s;
  s.rects.push_back({-ha, ha, -half_tot, -half_ev, air});
  s.rects.push_back({-hev, hev, -half_ev, half_ev, p.material});
  s.rects.push_back({-ha, ha, half_ev, half_tot, air});
  if (p.l_d > 0.0) {
    s.rects.push_back({-hev, hev, -half_ev - p.l_d, -half_ev, p.material});
    s.rects.push_back({-hev, hev, half_ev, half_ev + p.l_d, p.material});
  }

  const auto holes = p.full_hole_rz();
  const auto lengths = p.full_resonator_lengths();
  const int n_holes = static_cast<int>(holes.size());
  std::vector<double> centers(n_holes);
  double z = -half_ev + p.l_step;
  for (int j = 0; j < n_holes; ++j) {
    centers[j] = z + holes[j];
    z += 2.0 * holes[j];
    if (j < n_holes - 1) z += lengths[j];
  }
  for (int j = n_holes - 1; 2 * j >= n_holes; --j) centers[j] = -centers[n_holes - 1 - j];
  if (n_holes % 2 == 1) centers[n_holes / 2] = 0.0;
  for (int j = 0; j < n_holes; ++j) {
    if (holes[j] > 0.0) s.inclusions.push_back({0.0, centers[j], p.rx, holes[j], air});
  }

  s.ports.push_back({-half_tot, -ha, ha, air});
  s.ports.push_back({half_tot, -ha, ha, air});
  s.validate();
  return s;
}

// --- post filter -------------------------------------------------------------

std::vector<double> PostParams::full_post_rz() const {
  return mirror_expand(post_rz, order);
}
std::vector<double> PostParams::full_gaps() const {
  return mirror_expand(gaps, order - 1);
}

double PostParams::l_ev() const {
  return 2.0 * l_s1 + 2.0 * sum_of(full_post_rz()) + sum_of(full_gaps());
}

void PostParams::validate() const {
  if (order < 1) geometry_error("post filter order must be >= 1");
  if (static_cast<int>(post_rz.size()) != half_count(order)) {
    geometry_error("post filter needs one semi-axis per mirrored post");
  }
  if (static_cast<int>(gaps.size()) != half_count(order - 1)) {
    geometry_error("post filter needs one gap per mirrored post pair");
  }
  if (!(a > 0.0) || !(a_ev > 0.0) || a_ev > a) geometry_error("invalid guide widths");
  if (!(2.0 * rx < a_ev)) geometry_error("posts must clear the side walls (2 rx < a_ev)");
  if (!(l_port > 0.0)) geometry_error("port length must be positive");
  for (double r : post_rz) {
    if (!(r > 0.0)) geometry_error("post semi-axes must be positive");
  }
  for (double g : gaps) {
    if (!(g > 0.0)) geometry_error("posts overlap (non-positive gap)");
  }
  if (!(l_ev() > 0.0)) geometry_error("evanescent section length must be positive");
  material.validate();
}

Scene2D build_posts(const PostParams& p) {
  p.validate();
  const double lev = p.l_ev();
  const double half_ev = 0.5 * lev;
  const double half_tot = half_ev + p.l_port;
  const double ha = 0.5 * p.a;
  const double hev = 0.5 * p.a_ev;

  Scene2D s;
  s.rects.push_back({-ha, ha, -half_tot, -half_ev, air});
  s.rects.push_back({-hev, hev, -half_ev, half_ev, air});
  s.rects.push_back({-ha, ha, half_ev, half_tot, air});

  const auto radii = p.full_post_rz();
  const auto gaps = p.full_gaps();
  const int n = static_cast<int>(radii.size());
  std::vector<double> centers(n);
  double z = -half_ev + p.l_s1;
  for (int j = 0; j < n; ++j) {
    centers[j] = z + radii[j];
    z += 2.0 * radii[j];
    if (j < n - 1) z += gaps[j];
  }
  for (int j = n - 1; 2 * j >= n; --j) centers[j] = -centers[n - 1 - j];
  if (n % 2 == 1) centers[n / 2] = 0.0;
  for (int j = 0; j < n; ++j) s.inclusions.push_back({0.0, centers[j], p.rx, radii[j], p.material});

  s.ports.push_back({-half_tot, -ha, ha, air});
  s.ports.push_back({half_tot, -ha, ha, air});
  s.validate();
  return s;
}

// --- rasterization -----------------------------------------------------------

double ellipse_rect_area(const EllipseInclusion& e, double x0, double x1, double z0,
                         double z1) {
  double u0 = (x0 - e.xc) / e.rx, u1 = (x1 - e.xc) / e.rx;
  double v0 = (z0 - e.zc) / e.rz, v1 = (z1 - e.zc) / e.rz;
  if (u1 <= -1.0 || u0 >= 1.0 || v1 <= -1.0 || v0 >= 1.0) return 0.0;
  // Reflect into a canonical orientation; the disc is symmetric.
  if (u0 + u1 < 0.0) {
    const double t = -u0;
    u0 = -u1;
    u1 = t;
  }
  if (v0 + v1 < 0.0) {
    const double t = -v0;
    v0 = -v1;
    v1 = t;
  }
  const double umax = std::max(std::abs(u0), std::abs(u1));
  const double vmax = std::max(std::abs(v0), std::abs(v1));
  double area;
  if (umax * umax + vmax * vmax <= 1.0) {
    area = (u1 - u0) * (v1 - v0);
  } else {
    area = (disc_corner_area(u1, v1) - disc_corner_area(u0, v1)) -
           (disc_corner_area(u1, v0) - disc_corner_area(u0, v0));
  }
  return area * e.rx * e.rz;
}

std::vector<double> axis_lines(std::vector<double> breakpoints, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::resolution, "grid spacing must be positive");
  std::sort(breakpoints.begin(), breakpoints.end());
  std::vector<double> bp;
  for (double b : breakpoints) {
    if (bp.empty() || b - bp.back() > kMergeTol) bp.push_back(b);
  }
  if (bp.size() < 2) throw Error(ErrorCode::resolution, "axis has zero extent");

  auto subdivide = [h](const std::vector<double>& pts) {
    std::vector<double> lines{pts.front()};
    for (std::size_t s = 1; s < pts.size(); ++s) {
      const double a = pts[s - 1];
      const double len = pts[s] - a;
      const int n = std::max(1, static_cast<int>(std::ceil(len / h - 1e-9)));
      for (int k = 1; k < n; ++k) lines.push_back(a + len * k / n);
      lines.push_back(pts[s]);
    }
    return lines;
  };

  bool symmetric = bp.size() % 2 == 1;
  for (std::size_t s = 0; symmetric && s < bp.size(); ++s) {
    symmetric = std::abs(bp[s] + bp[bp.size() - 1 - s]) <= kLengthTol;
  }
  if (!symmetric) return subdivide(bp);

  std::vector<double> positive(bp.begin() + static_cast<std::ptrdiff_t>(bp.size() / 2), bp.end());
  positive.front() = 0.0;
  const auto half = subdivide(positive);
  std::vector<double> lines;
  lines.reserve(2 * half.size() - 1);
  for (auto it = half.rbegin(); it != half.rend(); ++it) lines.push_back(-*it);
  lines.pop_back();
  lines.insert(lines.end(), half.begin(), half.end());
  lines[half.size() - 1] = 0.0;
  return lines;
}

double PermittivityGrid::dual_x(int i) const {
  const double lo = i > 0 ? 0.5 * (xs[i] - xs[i - 1]) : 0.0;
  const double hi = i + 1 < nx() ? 0.5 * (xs[i + 1] - xs[i]) : 0.0;
  return lo + hi;
}

double PermittivityGrid::dual_z(int k) const {
  const double lo = k > 0 ? 0.5 * (zs[k] - zs[k - 1]) : 0.0;
  const double hi = k + 1 < nz() ? 0.5 * (zs[k + 1] - zs[k]) : 0.0;
  return lo + hi;
}

double PermittivityGrid::inclusion_area() const {
  double area = 0.0;
  for (int k = 0; k < nz(); ++k) {
    for (int i = 0; i < nx(); ++i) area += fill[index(i, k)] * dual_x(i) * dual_z(k);
  }
  return area;
}

PermittivityGrid rasterize(const Scene2D& scene, double h) {
  scene.validate();
  if (!(h > 0.0)) throw Error(ErrorCode::resolution, "grid spacing must be positive");
  for (std::size_t n = 0; n < scene.inclusions.size(); ++n) {
    const auto& e = scene.inclusions[n];
    if (2.0 * std::min(e.rx, e.rz) < 2.0 * h) {
      std::ostringstream os;
      os << "grid spacing " << h << " m cannot resolve inclusion " << n
         << " (fewer than 2 cells across)";
      throw Error(ErrorCode::resolution, os.str());
    }
  }

  std::vector<double> xb, zb;
  for (const auto& r : scene.rects) {
    xb.insert(xb.end(), {r.x0, r.x1});
    zb.insert(zb.end(), {r.z0, r.z1});
  }
  for (const auto& p : scene.ports) xb.insert(xb.end(), {p.x0, p.x1});
  xb.push_back(0.5 * (scene.x_min() + scene.x_max()));
  zb.push_back(0.5 * (scene.z_min() + scene.z_max()));

  PermittivityGrid g;
  g.h = h;
  g.xs = axis_lines(xb, h);
  g.zs = axis_lines(zb, h);
  g.ports = scene.ports;
  const int nx = g.nx(), nz = g.nz();

  // Primal cell classification: domain flag and background permittivity.
  const int cx = nx - 1, cz = nz - 1;
  std::vector<std::uint8_t> cell_in(static_cast<std::size_t>(cx) * cz, 0);
  std::vector<cplx> cell_eps(static_cast<std::size_t>(cx) * cz, cplx(1.0, 0.0));
  for (int k = 0; k < cz; ++k) {
    const double zc = 0.5 * (g.zs[k] + g.zs[k + 1]);
    for (int i = 0; i < cx; ++i) {
      const double xc = 0.5 * (g.xs[i] + g.xs[i + 1]);
      const std::size_t c = static_cast<std::size_t>(k) * cx + i;
      cell_in[c] = scene.inside(xc, zc) ? 1 : 0;
      if (cell_in[c]) cell_eps[c] = scene.background_at(xc, zc).permittivity();
    }
  }

  g.eps.assign(static_cast<std::size_t>(nx) * nz, cplx(1.0, 0.0));
  g.fill.assign(g.eps.size(), 0.0);
  g.metal.assign(g.eps.size(), 1);

  std::vector<cplx> incl_eps;
  for (const auto& e : scene.inclusions) incl_eps.push_back(e.material.permittivity());

  constexpr std::size_t kMaxTerms = 64;
  std::array<cplx, kMaxTerms> eps_terms;
  std::array<double, kMaxTerms> area_terms;
  std::array<double, kMaxTerms> fill_terms;

  for (int k = 0; k < nz; ++k) {
    for (int i = 0; i < nx; ++i) {
      std::size_t ne = 0, na = 0, nf = 0;
      int n_cells = 0, n_domain = 0;
      for (int qk = 0; qk < 2; ++qk) {
        const int ck = k - 1 + qk;
        if (ck < 0 || ck >= cz) continue;
        const double z0 = qk == 0 ? 0.5 * (g.zs[k - 1] + g.zs[k]) : g.zs[k];
        const double z1 = qk == 0 ? g.zs[k] : 0.5 * (g.zs[k] + g.zs[k + 1]);
        for (int qi = 0; qi < 2; ++qi) {
          const int ci = i - 1 + qi;
          if (ci < 0 || ci >= cx) continue;
          ++n_cells;
          const std::size_t c = static_cast<std::size_t>(ck) * cx + ci;
          if (!cell_in[c]) continue;
          ++n_domain;
          const double x0 = qi == 0 ? 0.5 * (g.xs[i - 1] + g.xs[i]) : g.xs[i];
          const double x1 = qi == 0 ? g.xs[i] : 0.5 * (g.xs[i] + g.xs[i + 1]);
          const double qa = (x1 - x0) * (z1 - z0);
          area_terms[na++] = qa;
          eps_terms[ne++] = qa * cell_eps[c];
          for (std::size_t n = 0; n < scene.inclusions.size(); ++n) {
            const auto& e = scene.inclusions[n];
            if (e.xc + e.rx <= x0 || e.xc - e.rx >= x1 || e.zc + e.rz <= z0 || e.zc - e.rz >= z1) {
              continue;
            }
            const double ea = ellipse_rect_area(e, x0, x1, z0, z1);
            if (ea <= 0.0) continue;
            if (ne >= kMaxTerms || nf >= kMaxTerms) {
              throw Error(ErrorCode::resolution, "too many inclusions meet in one grid cell");
            }
            eps_terms[ne++] = ea * (incl_eps[n] - cell_eps[c]);
            fill_terms[nf++] = ea;
          }
        }
      }
      const std::size_t idx = g.index(i, k);
      if (n_domain > 0) {
        const double area = sorted_sum(area_terms, na);
        g.eps[idx] = sorted_sum(eps_terms, ne) / area;
        g.fill[idx] = std::min(1.0, sorted_sum(fill_terms, nf) / area);
      }
      const bool x_edge = i == 0 || i == nx - 1;
      const bool z_edge = k == 0 || k == nz - 1;
      bool interior = !x_edge && n_domain == n_cells && n_cells > 0;
      if (interior && z_edge) {
        if (scene.closed()) {
          interior = false;
        } else {
          const auto& port = scene.ports[k == 0 ? 0 : 1];
          interior = g.xs[i] > port.x0 + kLengthTol && g.xs[i] < port.x1 - kLengthTol;
        }
      }
      g.metal[idx] = interior ? 0 : 1;
    }
  }
  return g;
}

}  // namespace evf
