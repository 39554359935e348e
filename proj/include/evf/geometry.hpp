#pragma once

// H-plane scenes of the two evanescent-mode filter families and their
// rasterization onto a wall-conforming tensor grid.
//
// Coordinates: x is transverse (broad wall), z is the propagation axis. All
// builders place the scene centered on the origin in both axes, so a filter
// that is mirror symmetric about its midplane maps z -> -z exactly.

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "evf/units.hpp"

namespace evf {

struct Material {
  double eps_r = 1.0;
  double tan_delta = 0.0;

  /// eps_r (1 - j tan_delta), e^{+j w t} convention.
  [[nodiscard]] cplx permittivity() const {
    return {eps_r, -eps_r * tan_delta};
  }
  void validate() const;
  bool operator==(const Material&) const = default;
};

inline const Material air{1.0, 0.0};

struct Rect {
  double x0 = 0, x1 = 0, z0 = 0, z1 = 0;
  Material material;

  [[nodiscard]] bool contains(double x, double z) const {
    return x >= x0 && x <= x1 && z >= z0 && z <= z1;
  }
};

struct EllipseInclusion {
  double xc = 0, zc = 0;
  double rx = 0, rz = 0;  // semi-axes across and along the guide
  Material material;
};

/// Transverse reference plane at one end of the scene.
struct PortPlane {
  double z = 0;
  double x0 = 0, x1 = 0;
  Material background;

  [[nodiscard]] double width() const { return x1 - x0; }
};

/// Union of rectangles (metal outline) with a painter's-order material map
/// (later rectangles override earlier ones) and elliptical inclusions on top.
/// A scene with no ports is closed by conducting walls at both z ends.
struct Scene2D {
  std::vector<Rect> rects;
  std::vector<EllipseInclusion> inclusions;
  std::vector<PortPlane> ports;  // empty, or {port at z_min, port at z_max}

  [[nodiscard]] double x_min() const;
  [[nodiscard]] double x_max() const;
  [[nodiscard]] double z_min() const;
  [[nodiscard]] double z_max() const;
  [[nodiscard]] bool inside(double x, double z) const;
  /// Background material at a point (ignores inclusions).
  [[nodiscard]] Material background_at(double x, double z) const;
  [[nodiscard]] bool closed() const { return ports.empty(); }

  /// Throws geometry errors for disconnected rectangles, clipped or
  /// overlapping inclusions and malformed ports.
  void validate() const;

  /// Scene reflected about z = 0.
  [[nodiscard]] Scene2D mirrored_z() const;
  /// Same scene with every dielectric (eps_r > 1) given the loss tangent.
  [[nodiscard]] Scene2D with_loss_tangent(double tan_delta) const;
};

/// Air-hole filter: dielectric block in a reduced-width section, coupling
/// controlled by elliptical air holes. Lists are half-lists ordered from the
/// port inward; the full chain is their mirror image about the center.
struct AirHoleParams {
  int order = 5;
  double a = 58.17 * mm;        // port width
  double a_ev = 30.0 * mm;      // reduced-section width
  double l_port = 10.0 * mm;    // empty port length beyond the overhang
  double l_d = 7.0 * mm;        // dielectric overhang into each port
  double l_step = 0.0;          // step plane to first hole edge (l_1)
  std::vector<double> resonator_lengths;  // l_2, l_3, l_4 ... (edge to edge)
  std::vector<double> hole_rz;            // r_1, r_2, r_3 ...
  double rx = 14.0 * mm;
  Material material{3.55, 0.0};

  [[nodiscard]] std::vector<double> full_hole_rz() const;
  [[nodiscard]] std::vector<double> full_resonator_lengths() const;
  /// Reduced-section length implied by the dimension chain.
  [[nodiscard]] double l_ev() const;
  [[nodiscard]] double l_tot() const { return l_ev() + 2.0 * l_d + 2.0 * l_port; }
  void validate() const;
  bool operator==(const AirHoleParams&) const = default;
};

/// Post filter: elliptical dielectric posts in an empty evanescent section.
struct PostParams {
  int order = 5;
  double a = 58.17 * mm;
  double a_ev = 30.0 * mm;
  double l_port = 15.0 * mm;
  double l_s1 = 0.0;                 // step plane to first post edge, may be < 0
  std::vector<double> gaps;          // l_12, l_23 ... (edge to edge)
  std::vector<double> post_rz;       // r_1, r_2, r_3 ...
  double rx = 14.0 * mm;
  Material material{3.55, 0.0};

  [[nodiscard]] std::vector<double> full_post_rz() const;
  [[nodiscard]] std::vector<double> full_gaps() const;
  [[nodiscard]] double l_ev() const;
  [[nodiscard]] double l_tot() const { return l_ev() + 2.0 * l_port; }
  void validate() const;
  bool operator==(const PostParams&) const = default;
};

/// Number of entries in the half-list describing `total` mirrored items.
[[nodiscard]] constexpr int half_count(int total) { return (total + 1) / 2; }

/// Expands a half-list into `total` mirrored entries.
[[nodiscard]] std::vector<double> mirror_expand(const std::vector<double>& half,
                                                int total);

[[nodiscard]] Scene2D build_airhole(const AirHoleParams& p);
[[nodiscard]] Scene2D build_posts(const PostParams& p);

/// Node-centered permittivity on a tensor grid whose lines include every
/// rectangle edge and the scene center lines. eps and metal are stored
/// row-major with z as the slow index: node (i, k) -> k * nx + i.
struct PermittivityGrid {
  double h = 0;                    // maximum line spacing
  std::vector<double> xs, zs;      // node coordinates
  std::vector<cplx> eps;           // dual-cell averaged permittivity
  std::vector<double> fill;        // inclusion area fraction of the dual cell
  std::vector<std::uint8_t> metal; // 1 where the field is pinned to zero
  std::vector<PortPlane> ports;    // copied from the scene

  [[nodiscard]] int nx() const { return static_cast<int>(xs.size()); }
  [[nodiscard]] int nz() const { return static_cast<int>(zs.size()); }
  [[nodiscard]] std::size_t index(int i, int k) const {
    return static_cast<std::size_t>(k) * xs.size() + static_cast<std::size_t>(i);
  }
  /// Dual-cell extents (full width/length around the node, clipped to the grid).
  [[nodiscard]] double dual_x(int i) const;
  [[nodiscard]] double dual_z(int k) const;
  /// Area covered by inclusions, sum over nodes of fill times dual-cell area.
  [[nodiscard]] double inclusion_area() const;
};

/// Grid lines for one axis: uniform subdivision (spacing <= h) between
/// consecutive breakpoints. Mirror-symmetric breakpoint sets give exactly
/// mirror-symmetric lines.
[[nodiscard]] std::vector<double> axis_lines(std::vector<double> breakpoints, double h);

[[nodiscard]] PermittivityGrid rasterize(const Scene2D& scene, double h);

/// Exact area of the intersection of an axis-aligned ellipse with a rectangle.
[[nodiscard]] double ellipse_rect_area(const EllipseInclusion& e, double x0,
                                       double x1, double z0, double z1);

}  // namespace evf
