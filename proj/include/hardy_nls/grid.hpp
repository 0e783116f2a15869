#pragma once
/// \file grid.hpp
/// \brief Uniform Dirichlet grids on (0,L) and (-L,L): trapezoid quadrature,
///        second-order difference operators, cubic Lagrange resampling.
///
/// Fields store interior node values only; both endpoint values are implied
/// zero.  With that convention the trapezoid rule is a plain scaled sum and
/// the three-point Laplacian carries homogeneous Dirichlet conditions for
/// free.  The edge (forward-difference) energy defined here pairs exactly
/// with that Laplacian under summation by parts, and it satisfies the
/// discrete Hardy inequality sum(u_j^2/x_j^2) <= 4*sum(|u_{j+1}-u_j|^2)/h^2
/// with the sharp continuum constant.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace hardy_nls {

using complexd = std::complex<double>;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument("hardy_nls: " + msg);
}

enum class GridKind { HalfLine, FullLine };

inline const char* to_string(GridKind k) {
  return k == GridKind::HalfLine ? "half-line" : "full-line";
}

/// Uniform grid; the domain is (0,L) for HalfLine and (-L,L) for FullLine.
struct Grid {
  GridKind kind = GridKind::HalfLine;
  double length = 0.0;       ///< L (half-width for FullLine)
  int n_cells = 0;           ///< N; interior node count is N-1
  double h = 0.0;            ///< spacing: L/N (HalfLine), 2L/N (FullLine)
  std::vector<double> nodes; ///< x_j for j = 1..N-1; x=0 is excluded on HalfLine

  int interior() const { return n_cells - 1; }
  double x(int j) const { return nodes[static_cast<std::size_t>(j)]; }
  double origin() const { return kind == GridKind::HalfLine ? 0.0 : -length; }
  double span() const { return kind == GridKind::HalfLine ? length : 2.0 * length; }
  bool same_layout(const Grid& o) const {
    return kind == o.kind && length == o.length && n_cells == o.n_cells;
  }
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_grid(GridKind kind, double length, int n_cells) {
  require(std::isfinite(length) && length > 0.0, "make_grid: length must be positive");
  require(n_cells >= 16, "make_grid: at least 16 cells required");
  auto g = std::make_shared<Grid>();
  g->kind = kind;
  g->length = length;
  g->n_cells = n_cells;
  g->h = g->span() / n_cells;
  g->nodes.resize(static_cast<std::size_t>(g->interior()));
  const double x0 = g->origin();
  for (int j = 1; j < n_cells; ++j) g->nodes[static_cast<std::size_t>(j - 1)] = x0 + j * g->h;
  return g;
}

/// Complex field sampled at the interior nodes of a grid.
struct Field {
  GridPtr grid;
  std::vector<complexd> v;

  int size() const { return static_cast<int>(v.size()); }
};

inline Field make_field(GridPtr g) {
  require(static_cast<bool>(g), "make_field: null grid");
  Field f;
  f.grid = std::move(g);
  f.v.assign(static_cast<std::size_t>(f.grid->interior()), complexd(0.0, 0.0));
  return f;
}

template <class F>
inline Field field_from_function(GridPtr g, F&& fn) {
  Field f = make_field(std::move(g));
  for (int j = 0; j < f.size(); ++j) f.v[static_cast<std::size_t>(j)] = complexd(fn(f.grid->x(j)));
  return f;
}

inline void check_field(const Field& u, const char* who) {
  require(static_cast<bool>(u.grid), std::string(who) + ": field has no grid");
  require(u.size() == u.grid->interior(), std::string(who) + ": sample count does not match grid");
}

inline void check_same_grid(const Field& a, const Field& b, const char* who) {
  check_field(a, who);
  check_field(b, who);
  require(a.grid->same_layout(*b.grid), std::string(who) + ": fields live on different grids");
}

/// Trapezoid rule with implied zero endpoint values: h * sum(samples).
inline double quadrature(const Grid& g, const std::vector<double>& samples) {
  require(static_cast<int>(samples.size()) == g.interior(),
          "quadrature: sample count does not match grid");
  double s = 0.0;
  for (double v : samples) s += v;
  return g.h * s;
}

/// Centered second-order first derivative with ghost zeros at the endpoints.
inline Field derivative(const Field& u) {
  check_field(u, "derivative");
  const int n = u.size();
  const double inv2h = 1.0 / (2.0 * u.grid->h);
  Field d = make_field(u.grid);
  for (int j = 0; j < n; ++j) {
    const complexd up = (j + 1 < n) ? u.v[static_cast<std::size_t>(j + 1)] : complexd(0.0);
    const complexd um = (j > 0) ? u.v[static_cast<std::size_t>(j - 1)] : complexd(0.0);
    d.v[static_cast<std::size_t>(j)] = (up - um) * inv2h;
  }
  return d;
}

/// Three-point Laplacian with ghost zeros at the endpoints.
inline Field laplacian(const Field& u) {
  check_field(u, "laplacian");
  const int n = u.size();
  const double invh2 = 1.0 / (u.grid->h * u.grid->h);
  Field d = make_field(u.grid);
  for (int j = 0; j < n; ++j) {
    const complexd up = (j + 1 < n) ? u.v[static_cast<std::size_t>(j + 1)] : complexd(0.0);
    const complexd um = (j > 0) ? u.v[static_cast<std::size_t>(j - 1)] : complexd(0.0);
    d.v[static_cast<std::size_t>(j)] = (up - 2.0 * u.v[static_cast<std::size_t>(j)] + um) * invh2;
  }
  return d;
}

/// Edge (forward-difference) Dirichlet energy: sum over the N cell edges of
/// |u_{j+1}-u_j|^2 / h, endpoints implied zero.  Equals <-laplacian(u), u>
/// in the quadrature inner product exactly.
inline double edge_grad_sq(const Field& u) {
  check_field(u, "edge_grad_sq");
  const int n = u.size();
  double s = std::norm(u.v[0]);
  for (int j = 0; j + 1 < n; ++j)
    s += std::norm(u.v[static_cast<std::size_t>(j + 1)] - u.v[static_cast<std::size_t>(j)]);
  s += std::norm(u.v[static_cast<std::size_t>(n - 1)]);
  return s / u.grid->h;
}

/// Sesquilinear edge form: sum of (Da)(conj Db)/h over edges.
inline complexd edge_grad_inner(const Field& a, const Field& b) {
  check_same_grid(a, b, "edge_grad_inner");
  const int n = a.size();
  complexd s = a.v[0] * std::conj(b.v[0]);
  for (int j = 0; j + 1 < n; ++j) {
    const complexd da = a.v[static_cast<std::size_t>(j + 1)] - a.v[static_cast<std::size_t>(j)];
    const complexd db = b.v[static_cast<std::size_t>(j + 1)] - b.v[static_cast<std::size_t>(j)];
    s += da * std::conj(db);
  }
  s += a.v[static_cast<std::size_t>(n - 1)] * std::conj(b.v[static_cast<std::size_t>(n - 1)]);
  return s / a.grid->h;
}

/// Quadrature (L2) inner product h * sum(a conj b).
inline complexd l2_inner(const Field& a, const Field& b) {
  check_same_grid(a, b, "l2_inner");
  complexd s = 0.0;
  for (int j = 0; j < a.size(); ++j)
    s += a.v[static_cast<std::size_t>(j)] * std::conj(b.v[static_cast<std::size_t>(j)]);
  return a.grid->h * s;
}

inline double l2_norm_sq(const Field& u) {
  check_field(u, "l2_norm_sq");
  double s = 0.0;
  for (const complexd& z : u.v) s += std::norm(z);
  return u.grid->h * s;
}

/// H¹ pairing ∫(a'·conj(b') + a·conj(b)) with the centered derivative.  Used
/// for orbit distances, solver residual scaling, and profile comparisons.
inline complexd h1_inner(const Field& a, const Field& b) {
  return l2_inner(derivative(a), derivative(b)) + l2_inner(a, b);
}

inline double h1_norm(const Field& u) {
  return std::sqrt(std::max(0.0, std::real(h1_inner(u, u))));
}

inline double sup_norm(const Field& u) {
  check_field(u, "sup_norm");
  double m = 0.0;
  for (const complexd& z : u.v) m = std::max(m, std::abs(z));
  return m;
}

/// Hardy weights 1/x_j^2; meaningful only where the potential is centered at
/// the boundary, hence half-line grids only.
inline std::vector<double> inverse_square_weights(const Grid& g) {
  require(g.kind == GridKind::HalfLine, "inverse_square_weights: half-line grids only");
  std::vector<double> w(static_cast<std::size_t>(g.interior()));
  for (int j = 0; j < g.interior(); ++j) {
    const double x = g.nodes[static_cast<std::size_t>(j)];
    w[static_cast<std::size_t>(j)] = 1.0 / (x * x);
  }
  return w;
}

/// Cubic Lagrange interpolation at physical coordinate y with zero extension
/// outside the open domain.
inline complexd interpolate_at(const Field& u, double y) {
  const Grid& g = *u.grid;
  const double x0 = g.origin();
  if (y <= x0 || y >= x0 + g.span()) return complexd(0.0);
  const double s = (y - x0) / g.h;  // node j sits at s = j
  int k = static_cast<int>(std::floor(s));
  if (k < 0) k = 0;
  if (k > g.n_cells - 1) k = g.n_cells - 1;
  const double t = s - k;
  auto sample = [&](int i) -> complexd {
    if (i < 1 || i > g.n_cells - 1) return complexd(0.0);
    return u.v[static_cast<std::size_t>(i - 1)];
  };
  const double wm1 = -t * (t - 1.0) * (t - 2.0) / 6.0;
  const double w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
  const double w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
  const double w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
  return wm1 * sample(k - 1) + w0 * sample(k) + w1 * sample(k + 1) + w2 * sample(k + 2);
}

/// L2-invariant dilation v(x) = sqrt(lambda) * u(lambda x) realized by cubic
/// interpolation with zero extension.  Half-line grids only: the dilation is
/// anchored at the x=0 endpoint.
inline Field rescale(const Field& u, double lambda) {
  check_field(u, "rescale");
  require(u.grid->kind == GridKind::HalfLine, "rescale: half-line grids only");
  require(std::isfinite(lambda) && lambda > 0.0, "rescale: lambda must be positive and finite");
  Field out = make_field(u.grid);
  const double amp = std::sqrt(lambda);
  for (int j = 0; j < out.size(); ++j)
    out.v[static_cast<std::size_t>(j)] = amp * interpolate_at(u, lambda * u.grid->x(j));
  return out;
}

/// Transfer a field onto another grid of the same kind (cubic interpolation,
/// zero extension).  Used for coarse-to-fine solver continuation.
inline Field resample(const Field& u, GridPtr target) {
  check_field(u, "resample");
  require(static_cast<bool>(target), "resample: null target grid");
  require(target->kind == u.grid->kind, "resample: grid kinds must match");
  Field out = make_field(std::move(target));
  for (int j = 0; j < out.size(); ++j)
    out.v[static_cast<std::size_t>(j)] = interpolate_at(u, out.grid->x(j));
  return out;
}

}  // namespace hardy_nls
