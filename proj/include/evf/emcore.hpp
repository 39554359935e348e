#pragma once

// Frequency-domain solver for TE_m0 fields of height-uniform (H-plane)
// structures: (d2/dx2 + d2/dz2 + k0^2 eps(x, z)) Ey = 0, Ey = 0 on metal.
//
// The operator is discretized with a node-based finite-volume stencil on the
// tensor grid produced by rasterize(); it reduces to second-order central
// differences where the grid is uniform. Ports are terminated by the exact
// discrete modal condition of the semi-infinite uniform port guide (every
// transverse mode, with its discrete propagation constant), so a uniform guide
// is reflectionless and power is conserved to round-off on lossless scenes.
// The assembled matrix is complex symmetric, hence S12 == S21.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "evf/geometry.hpp"
#include "evf/units.hpp"

namespace evf {

struct PortSpec {
  double width = 0;
  cplx eps{1.0, 0.0};
  int mode_count = 5;
  double reference_z = 0;
};

struct SMatrix2 {
  cplx s11, s21, s12, s22;
};

struct SParamSet {
  std::vector<double> frequencies;
  std::vector<SMatrix2> s;
  double h = 0;          // grid spacing used
  int mode_count = 0;    // port modes allowed to propagate

  [[nodiscard]] std::size_t size() const { return frequencies.size(); }
};

enum class Symmetry { none, even, odd };

[[nodiscard]] const char* to_string(Symmetry s) noexcept;

struct EigenResult {
  std::vector<double> frequencies;  // Hz, ascending
  std::vector<Symmetry> labels;
};

struct Layer {
  double length = 0;
  double width = 0;
  cplx eps{1.0, 0.0};
};

/// Uniform-width layered guide between two semi-infinite port media.
struct LayerStack {
  std::vector<Layer> layers;
  cplx port_eps_in{1.0, 0.0};
  cplx port_eps_out{1.0, 0.0};

  [[nodiscard]] bool uniform_width() const;
  [[nodiscard]] double total_length() const;
};

/// Cutoff of TE_m0 in a guide of the given width and filling.
[[nodiscard]] double cutoff_frequency(double width, double eps_r, int mode_index);

/// TE_10 propagation constant gamma = sqrt((pi/a)^2 - eps k0^2), Re >= 0.
[[nodiscard]] cplx te10_gamma(double width, cplx eps, double f);

/// Transmission-line (wave-amplitude cascade) model of a layer stack,
/// referenced to the TE_10 power waves of the two port media at the stack
/// faces.
[[nodiscard]] SMatrix2 tline_oracle(const LayerStack& stack, double f);

/// Scene for a uniform-width layer stack, centered at the origin, with ports
/// at both faces. End layers should match the port media.
[[nodiscard]] Scene2D scene_from_stack(const LayerStack& stack);

struct SolveOptions {
  int mode_count = 5;
  /// Solve only the x-even half when the grid is mirror symmetric in x. Exact
  /// for fundamental-mode excitation.
  bool use_symmetry = true;
};

/// Port-to-port solver bound to one grid. Frequency-independent work
/// (numbering, stiffness, port eigenbases, symbolic factorization) is done
/// once; each frequency costs one numeric factorization and two solves.
class FdfdSolver {
 public:
  explicit FdfdSolver(const PermittivityGrid& grid, SolveOptions options = {});
  ~FdfdSolver();
  FdfdSolver(FdfdSolver&&) noexcept;
  FdfdSolver& operator=(FdfdSolver&&) noexcept;
  FdfdSolver(const FdfdSolver&) = delete;
  FdfdSolver& operator=(const FdfdSolver&) = delete;

  [[nodiscard]] SMatrix2 solve(double f);
  [[nodiscard]] SParamSet sweep(std::span<const double> frequencies);
  [[nodiscard]] std::size_t unknowns() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

[[nodiscard]] SMatrix2 fdfd_solve(const PermittivityGrid& grid, double f,
                                  SolveOptions options = {});
[[nodiscard]] SParamSet fdfd_sweep(const PermittivityGrid& grid,
                                   std::span<const double> frequencies,
                                   SolveOptions options = {});

struct EigenOptions {
  int krylov_dim = 60;
  double tolerance = 1e-10;  // relative Ritz residual
  /// On x-symmetric grids keep only modes even in x (the TE_10-like family).
  bool x_even_only = true;
};

/// Resonances of a closed scene inside [f_lo, f_hi]. With even/odd symmetry
/// the half domain z <= center is solved with a magnetic (even) or electric
/// (odd) wall on the midplane.
[[nodiscard]] EigenResult resonant_frequencies(const PermittivityGrid& grid,
                                               Symmetry symmetry, double f_lo,
                                               double f_hi,
                                               EigenOptions options = {});

}  // namespace evf
