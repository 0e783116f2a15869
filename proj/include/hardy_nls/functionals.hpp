#pragma once
/// \file functionals.hpp
/// \brief Conserved quantities and variational functionals for the focusing
///        NLS with an attractive inverse-square potential on the half-line.
///
/// Everything is built from four integral parts:
///   mass    = ∫|u|²,   grad_sq = ∫|u'|²,
///   hardy_w = ∫|u|²/x², lp1     = ∫|u|^{p+1}.
/// Derived quantities:
///   H = grad_sq − c·hardy_w                 (Hardy form)
///   E = H/2 − lp1/(p+1)                     (energy)
///   S = E + (ω/2)·mass                      (action)
///   J = H + ω·mass − lp1                    (Nehari functional, ⟨S'(u),u⟩)
///   Q = H − (p−1)/(2(p+1))·lp1              (virial functional)
///
/// grad_sq is the Richardson-corrected Dirichlet form
///   G(u) = sum_edges |Δu|²/h + (h²/12)·‖Δ₃u‖²_quad,
/// which is fourth-order accurate for smooth decaying fields (the edge form
/// alone carries a −h²/12·∫|u''|² bias), still dominates the edge form, so
/// the sharp discrete Hardy inequality G(u) ≥ (1/4)∫u²/x² survives, and has
/// the explicit symmetric gradient operator −Δ₃ + (h²/12)Δ₃² implemented in
/// neg_laplacian4.  The inverse-square weight needs the half-line grid;
/// every functional that touches it therefore requires HalfLine unless c=0.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>

#include "hardy_nls/grid.hpp"

namespace hardy_nls {

enum class Regime { Subcritical, Critical, Supercritical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::Subcritical: return "subcritical";
    case Regime::Critical: return "critical";
    default: return "supercritical";
  }
}

/// Equation parameters: exponent p > 1, potential strength 0 <= c < 1/4,
/// frequency omega > 0.
struct Params {
  double p = 3.0;
  double c = 0.0;
  double omega = 1.0;

  /// Mass-critical exponent in one dimension is p = 5.
  Regime regime() const {
    if (p < 5.0) return Regime::Subcritical;
    if (p > 5.0) return Regime::Supercritical;
    return Regime::Critical;
  }
};

inline void validate(const Params& prm) {
  require(std::isfinite(prm.p) && prm.p > 1.0, "params: p must exceed 1");
  require(std::isfinite(prm.c) && prm.c >= 0.0 && prm.c < 0.25,
          "params: c must lie in [0, 1/4)");
  require(std::isfinite(prm.omega) && prm.omega > 0.0,
          "params: omega must be positive");
}

inline Params make_params(double p, double c, double omega) {
  Params prm{p, c, omega};
  validate(prm);
  return prm;
}

/// The inverse-square weight is only meaningful on (0,L); with c = 0 it never
/// enters, so full-line fields are fine there.
inline void check_hardy_domain(const Field& u, const Params& prm,
                               const char* who = "functionals") {
  check_field(u, who);
  validate(prm);
  require(prm.c == 0.0 || u.grid->kind == GridKind::HalfLine,
          std::string(who) + ": inverse-square term requires a half-line grid when c > 0");
}

inline double mass(const Field& u) {
  check_field(u, "mass");
  const int n = u.grid->interior();
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += std::norm(u.v[static_cast<std::size_t>(j)]);
  return u.grid->h * s;
}

/// Fourth-order discrete −u'': −Δ₃u + (h²/12)Δ₃(Δ₃u), with the usual zero
/// ghost values.  This is the exact (quadrature-inner-product) gradient of
/// ½·grad_norm_sq, so finite differences of the energy match it to round-off.
inline Field neg_laplacian4(const Field& u) {
  check_field(u, "neg_laplacian4");
  const Field lap = laplacian(u);
  const Field lap2 = laplacian(lap);
  const double k = u.grid->h * u.grid->h / 12.0;
  Field out = make_field(u.grid);
  const int n = u.grid->interior();
  for (int j = 0; j < n; ++j) {
    const std::size_t i = static_cast<std::size_t>(j);
    out.v[i] = -lap.v[i] + k * lap2.v[i];
  }
  return out;
}

/// Dirichlet gradient energy; fourth-order accurate, ≥ the plain edge form.
inline double grad_norm_sq(const Field& u) {
  check_field(u, "grad_norm_sq");
  const double k = u.grid->h * u.grid->h / 12.0;
  return edge_grad_sq(u) + k * l2_norm_sq(laplacian(u));
}

/// ∫ |u|²/x².  Half-line only (x = 0 is a node of the full-line grid).
inline double hardy_term(const Field& u) {
  check_field(u, "hardy_term");
  require(u.grid->kind == GridKind::HalfLine,
          "hardy_term requires a half-line grid");
  const int n = u.grid->interior();
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = u.grid->x(j);
    s += std::norm(u.v[static_cast<std::size_t>(j)]) / (x * x);
  }
  return u.grid->h * s;
}

inline double lp1_norm(const Field& u, double p) {
  check_field(u, "lp1_norm");
  require(std::isfinite(p) && p > 1.0, "lp1_norm: p must exceed 1");
  const int n = u.grid->interior();
  const double q = (p + 1.0) / 2.0;  // |u|^{p+1} = (|u|²)^{(p+1)/2}
  double s = 0.0;
  for (int j = 0; j < n; ++j)
    s += std::pow(std::norm(u.v[static_cast<std::size_t>(j)]), q);
  return u.grid->h * s;
}

/// All four integral parts in one pass over the field.
struct FunctionalParts {
  double mass = 0.0;
  double grad_sq = 0.0;
  double hardy_w = 0.0;  ///< ∫|u|²/x²; zero when it does not enter (c = 0 off half-line)
  double lp1 = 0.0;
};

inline FunctionalParts functional_parts(const Field& u, const Params& prm) {
  check_hardy_domain(u, prm);
  FunctionalParts parts;
  parts.mass = mass(u);
  parts.grad_sq = grad_norm_sq(u);
  parts.hardy_w = u.grid->kind == GridKind::HalfLine ? hardy_term(u) : 0.0;
  parts.lp1 = lp1_norm(u, prm.p);
  return parts;
}

inline double hardy_of(const FunctionalParts& f, const Params& prm) {
  return f.grad_sq - prm.c * f.hardy_w;
}

inline double energy_of(const FunctionalParts& f, const Params& prm) {
  return 0.5 * hardy_of(f, prm) - f.lp1 / (prm.p + 1.0);
}

inline double action_of(const FunctionalParts& f, const Params& prm) {
  return energy_of(f, prm) + 0.5 * prm.omega * f.mass;
}

inline double nehari_of(const FunctionalParts& f, const Params& prm) {
  return hardy_of(f, prm) + prm.omega * f.mass - f.lp1;
}

inline double q_of(const FunctionalParts& f, const Params& prm) {
  return hardy_of(f, prm) - (prm.p - 1.0) / (2.0 * (prm.p + 1.0)) * f.lp1;
}

/// H(u) = ∫|u'|² − c∫|u|²/x²; positive for u ≠ 0 whenever c < 1/4.
inline double hardy(const Field& u, const Params& prm) {
  return hardy_of(functional_parts(u, prm), prm);
}

inline double energy(const Field& u, const Params& prm) {
  return energy_of(functional_parts(u, prm), prm);
}

inline double action(const Field& u, const Params& prm) {
  return action_of(functional_parts(u, prm), prm);
}

/// J(u) = ⟨S'(u),u⟩; its zero set is the Nehari manifold.
inline double nehari_value(const Field& u, const Params& prm) {
  return nehari_of(functional_parts(u, prm), prm);
}

/// Q(u) drives the virial identity d²/dt² ∫x²|u|² = 8 Q(u).
inline double q_value(const Field& u, const Params& prm) {
  return q_of(functional_parts(u, prm), prm);
}

/// Residuals of the two stationary-solution identities: r1 = J(u), r2 = Q(u).
struct PohozaevResiduals {
  double r1 = 0.0;
  double r2 = 0.0;
};

inline PohozaevResiduals pohozaev_residuals(const Field& u, const Params& prm) {
  const FunctionalParts f = functional_parts(u, prm);
  return {nehari_of(f, prm), q_of(f, prm)};
}

/// ∫ x²|u|².  Finite automatically on the truncated domain.
inline double virial_moment(const Field& u) {
  check_field(u, "virial_moment");
  require(u.grid->kind == GridKind::HalfLine,
          "virial_moment requires a half-line grid");
  const int n = u.grid->interior();
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const double x = u.grid->x(j);
    s += x * x * std::norm(u.v[static_cast<std::size_t>(j)]);
  }
  return u.grid->h * s;
}

/// 4 Im ∫ x ū u'; equals d/dt ∫x²|u|² along the flow.  Exactly zero for
/// real-valued fields.
inline double virial_flux(const Field& u) {
  check_field(u, "virial_flux");
  require(u.grid->kind == GridKind::HalfLine,
          "virial_flux requires a half-line grid");
  const Field du = derivative(u);
  const int n = u.grid->interior();
  double s = 0.0;
  for (int j = 0; j < n; ++j) {
    const std::size_t k = static_cast<std::size_t>(j);
    s += u.grid->x(j) * std::imag(std::conj(u.v[k]) * du.v[k]);
  }
  return 4.0 * u.grid->h * s;
}

/// Distance to the standing-wave orbit {e^{iθ}φ}: the minimizing phase has
/// the closed form θ* = arg⟨u,φ⟩_{H¹}, and
/// dist² = ‖u‖² + ‖φ‖² − 2|⟨u,φ⟩| in H¹.
struct OrbitalDistance {
  double theta_star = 0.0;
  double dist = 0.0;
  bool degenerate = false;  ///< ⟨u,φ⟩ ≈ 0: every phase is minimizing, θ* = 0 by convention
};

inline OrbitalDistance orbital_distance(const Field& u, const Field& reference) {
  check_same_grid(u, reference, "orbital_distance");
  const complexd ip = h1_inner(u, reference);
  const double nu = std::sqrt(std::max(0.0, std::real(h1_inner(u, u))));
  const double nr = std::sqrt(std::max(0.0, std::real(h1_inner(reference, reference))));
  OrbitalDistance od;
  if (std::abs(ip) <= 1e-14 * nu * nr) {
    od.degenerate = true;
    od.theta_star = 0.0;
    od.dist = std::sqrt(std::max(0.0, nu * nu + nr * nr));
    return od;
  }
  od.theta_star = std::arg(ip);
  od.dist = std::sqrt(std::max(0.0, nu * nu + nr * nr - 2.0 * std::abs(ip)));
  return od;
}

/// One diagnostics row.  Column order is fixed; optional columns are written
/// as empty cells so every file has the same header.
struct DiagnosticsRecord {
  double t = 0.0;
  double mass = 0.0;
  double energy = 0.0;
  double action = 0.0;
  double nehari = 0.0;  ///< J column
  double q = 0.0;       ///< Q column
  double grad_norm_sq = 0.0;
  double hardy_term = 0.0;
  double lp1 = 0.0;
  std::optional<double> virial_moment;
  std::optional<double> virial_flux;
  std::optional<double> orbital_dist;
  std::optional<double> theta_star;
};

/// Full diagnostics sweep.  Virial columns are filled on half-line grids;
/// orbital columns when a reference profile is supplied.
inline DiagnosticsRecord diagnostics(const Field& u, const Params& prm, double t,
                                     const Field* reference = nullptr) {
  const FunctionalParts f = functional_parts(u, prm);
  DiagnosticsRecord rec;
  rec.t = t;
  rec.mass = f.mass;
  rec.energy = energy_of(f, prm);
  rec.action = action_of(f, prm);
  rec.nehari = nehari_of(f, prm);
  rec.q = q_of(f, prm);
  rec.grad_norm_sq = f.grad_sq;
  rec.hardy_term = f.hardy_w;
  rec.lp1 = f.lp1;
  if (u.grid->kind == GridKind::HalfLine) {
    rec.virial_moment = virial_moment(u);
    rec.virial_flux = virial_flux(u);
  }
  if (reference != nullptr) {
    const OrbitalDistance od = orbital_distance(u, *reference);
    rec.orbital_dist = od.dist;
    rec.theta_star = od.theta_star;
  }
  return rec;
}

/// Shortest decimal form that round-trips a double.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string diagnostics_csv_header() {
  return "t,mass,energy,action,J,Q,grad_norm_sq,hardy_term,lp1,"
         "virial_moment,virial_flux,orbital_dist,theta_star";
}

inline std::string diagnostics_csv_row(const DiagnosticsRecord& r) {
  auto opt = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
  };
  std::string row;
  row += format_double(r.t);
  row += ',';
  row += format_double(r.mass);
  row += ',';
  row += format_double(r.energy);
  row += ',';
  row += format_double(r.action);
  row += ',';
  row += format_double(r.nehari);
  row += ',';
  row += format_double(r.q);
  row += ',';
  row += format_double(r.grad_norm_sq);
  row += ',';
  row += format_double(r.hardy_term);
  row += ',';
  row += format_double(r.lp1);
  row += ',';
  row += opt(r.virial_moment);
  row += ',';
  row += opt(r.virial_flux);
  row += ',';
  row += opt(r.orbital_dist);
  row += ',';
  row += opt(r.theta_star);
  return row;
}

}  // namespace hardy_nls
