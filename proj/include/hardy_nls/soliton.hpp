#pragma once
/// \file soliton.hpp
/// \brief Closed-form reference objects for the c = 0 problem: the explicit
///        soliton, its translates, two-bump test fields, the overlap
///        integral, and the full-line reference levels.
///
/// The free one-dimensional soliton is
///   q(x) = ((p+1)ω/2)^{1/(p−1)} · sech((p−1)√ω·x/2)^{2/(p−1)},
/// the unique positive even solution of q'' − ωq + q^p = 0.  Everything the
/// half-line comparisons need (m∞, overlap of translates, mass of q) is
/// derived from it on dedicated fine grids, independent of any caller grid,
/// so these values can serve as oracles for coarser computations.

#include <utility>

#include "hardy_nls/functionals.hpp"

namespace hardy_nls {

inline void check_soliton_params(double p, double omega) {
  require(std::isfinite(p) && p > 1.0, "soliton: p must exceed 1");
  require(std::isfinite(omega) && omega > 0.0, "soliton: omega must be positive");
}

/// Pointwise soliton value; evaluated through exp(−|z|) so large arguments
/// underflow cleanly instead of overflowing cosh.
inline double soliton_profile(double p, double omega, double x) {
  check_soliton_params(p, omega);
  const double z = 0.5 * (p - 1.0) * std::sqrt(omega) * std::abs(x);
  const double e = std::exp(-z);
  const double sech = 2.0 * e / (1.0 + e * e);
  return std::pow(0.5 * (p + 1.0) * omega, 1.0 / (p - 1.0)) *
         std::pow(sech, 2.0 / (p - 1.0));
}

/// Samples of q(x − shift) on the grid nodes.
inline Field soliton_field(const GridPtr& grid, double p, double omega,
                           double shift = 0.0) {
  check_soliton_params(p, omega);
  require(std::isfinite(shift), "soliton_field: shift must be finite");
  return field_from_function(
      grid, [&](double x) { return soliton_profile(p, omega, x - shift); });
}

namespace detail {

/// Trapezoid rule for a decaying integrand over (−X, X) (implied zero ends).
/// For analytic exponentially decaying integrands this is accurate to the
/// tail cutoff, far beyond the O(h²) of generic data.
template <class F>
double dedicated_integral(double half_width, int m, F&& f) {
  const double h = 2.0 * half_width / m;
  double s = 0.0;
  for (int j = 1; j < m; ++j) s += f(-half_width + h * j);
  return h * s;
}

}  // namespace detail

/// ∫_R q(x+A)q(x−A) dx on a dedicated fine grid sized from the decay rate;
/// the neglected tail is below 1e−12 relative.
inline double overlap_integral(double p, double omega, double A) {
  check_soliton_params(p, omega);
  require(std::isfinite(A) && A > 0.0, "overlap_integral: A must be positive");
  const double X = A + 16.0 / std::sqrt(omega);
  return detail::dedicated_integral(X, 1 << 17, [&](double x) {
    return soliton_profile(p, omega, x + A) * soliton_profile(p, omega, x - A);
  });
}

/// Full-line reference integrals of the soliton itself.
struct SolitonIntegrals {
  double mass = 0.0;
  double grad_sq = 0.0;
  double lp1 = 0.0;
};

inline SolitonIntegrals soliton_line_integrals(double p, double omega,
                                               int m = 1 << 15) {
  check_soliton_params(p, omega);
  const double sw = std::sqrt(omega);
  const double X = 24.0 / sw;
  SolitonIntegrals out;
  out.mass = detail::dedicated_integral(X, m, [&](double x) {
    const double q = soliton_profile(p, omega, x);
    return q * q;
  });
  // q'(x) = −√ω·tanh((p−1)√ω x/2)·q(x), so the gradient integral needs no
  // difference quotients.
  out.grad_sq = detail::dedicated_integral(X, m, [&](double x) {
    const double q = soliton_profile(p, omega, x);
    const double t = std::tanh(0.5 * (p - 1.0) * sw * x);
    return omega * t * t * q * q;
  });
  out.lp1 = detail::dedicated_integral(X, m, [&](double x) {
    return std::pow(soliton_profile(p, omega, x), p + 1.0);
  });
  return out;
}

/// Full-line soliton mass as a function of the frequency.
inline double soliton_mass(double p, double omega, int m = 1 << 14) {
  check_soliton_params(p, omega);
  const double X = 24.0 / std::sqrt(omega);
  return detail::dedicated_integral(X, m, [&](double x) {
    const double q = soliton_profile(p, omega, x);
    return q * q;
  });
}

/// Two-bump test field ψ_A(x) = q(x+A) − q(x−A) on the half-line, optionally
/// rescaled so its mass is exactly a prescribed μ.  ψ_A vanishes at x = 0 and
/// is a valid Dirichlet trial function for every A > 0.
enum class TwoBumpNormalization { Raw, MassNormalized };

struct TwoBumpSpec {
  double p = 3.0;
  double omega = 1.0;
  double A = 1.0;
  TwoBumpNormalization normalization = TwoBumpNormalization::Raw;
  double mu = 0.0;  ///< target mass, MassNormalized only
};

inline Field two_bump(const GridPtr& grid, const TwoBumpSpec& spec) {
  check_soliton_params(spec.p, spec.omega);
  require(static_cast<bool>(grid), "two_bump: null grid");
  require(grid->kind == GridKind::HalfLine, "two_bump: half-line grid required");
  require(std::isfinite(spec.A) && spec.A > 0.0, "two_bump: A must be positive");
  double scale = 1.0;
  if (spec.normalization == TwoBumpNormalization::MassNormalized) {
    require(std::isfinite(spec.mu) && spec.mu > 0.0, "two_bump: mu must be positive");
    const double ov = overlap_integral(spec.p, spec.omega, spec.A);
    require(spec.mu > ov, "two_bump: mu must exceed the overlap integral");
    // ‖ψ_A‖² over (0,∞) is exactly ‖q‖²_R − overlap(A); with μ = ‖q‖²_R the
    // factor below normalizes the mass back to μ.
    scale = std::sqrt(spec.mu / (spec.mu - ov));
  }
  return field_from_function(grid, [&](double x) {
    return scale * (soliton_profile(spec.p, spec.omega, x + spec.A) -
                    soliton_profile(spec.p, spec.omega, x - spec.A));
  });
}

/// Reference action level m∞ = S(q) of the free problem, evaluated on a
/// dedicated full-line grid (the soliton is the minimizer).
inline double infinity_level(double p, double omega, int n_cells = 1 << 16) {
  check_soliton_params(p, omega);
  const GridPtr grid =
      make_grid(GridKind::FullLine, 30.0 / std::sqrt(omega), n_cells);
  const Field q = soliton_field(grid, p, omega);
  return action(q, Params{p, 0.0, omega});
}

/// Frequency ω with soliton_mass(p, ω) = μ, by bisection.  The mass scales
/// like ω^{(5−p)/(2(p−1))}: strictly monotone except at p = 5, where the mass
/// is frequency-independent and no such map exists.
inline double lambda_for_mass(double p, double mu) {
  require(std::isfinite(p) && p > 1.0 && p != 5.0,
          "lambda_for_mass: need p > 1, p != 5");
  require(std::isfinite(mu) && mu > 0.0, "lambda_for_mass: mu must be positive");
  const bool increasing = p < 5.0;
  auto value = [&](double w) { return soliton_mass(p, w); };
  double lo = 1.0, hi = 1.0;
  while ((value(lo) > mu) == increasing) {
    lo /= 4.0;
    require(lo > 1e-30, "lambda_for_mass: bracketing failed");
  }
  while ((value(hi) < mu) == increasing) {
    hi *= 4.0;
    require(hi < 1e30, "lambda_for_mass: bracketing failed");
  }
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((value(mid) < mu) == increasing)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Reference constrained-energy level I∞(μ) of the free problem for
/// 1 < p < 5: the energy of the soliton whose mass is μ, together with its
/// frequency.  (For p ≥ 5 the constrained infimum is not attained.)
struct ConstrainedInfinityLevel {
  double level = 0.0;
  double omega = 0.0;
};

inline ConstrainedInfinityLevel infinity_energy_level(double p, double mu,
                                                      int n_cells = 1 << 16) {
  require(std::isfinite(p) && p > 1.0 && p < 5.0,
          "infinity_energy_level: need 1 < p < 5");
  const double w = lambda_for_mass(p, mu);
  const GridPtr grid =
      make_grid(GridKind::FullLine, 30.0 / std::sqrt(w), n_cells);
  const Field q = soliton_field(grid, p, w);
  return {energy(q, Params{p, 0.0, w}), w};
}

}  // namespace hardy_nls
