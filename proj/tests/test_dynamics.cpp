/// \file test_dynamics.cpp
/// Strang-split evolution: sub-step algebra, conservation, orbital
/// stability, virial identities, and blow-up detection.

#include <algorithm>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <complex>
#include <limits>

#include "hardy_nls/dynamics.hpp"
#include "hardy_nls/groundstate.hpp"
#include "oracle.hpp"

using namespace hardy_nls;
using Catch::Approx;

namespace {

Field conj_field(const Field& u) {
  Field out = u;
  for (auto& z : out.v) z = std::conj(z);
  return out;
}

double h1_diff(const Field& a, const Field& b) {
  Field d = a;
  for (int j = 0; j < d.size(); ++j)
    d.v[static_cast<std::size_t>(j)] -= b.v[static_cast<std::size_t>(j)];
  return h1_norm(d);
}

/// Mild off-center bump: nonlinear enough to exercise the splitting, tame
/// enough that no gradient-growth threshold trips during short runs.
Field gentle_bump(const GridPtr& g) {
  return field_from_function(g, [](double x) {
    return 0.35 * std::exp(-0.25 * (x - 8.0) * (x - 8.0)) * std::tanh(x);
  });
}

void check_increasing(const EvolutionTrace& tr) {
  for (std::size_t k = 1; k < tr.records.size(); ++k)
    CHECK(tr.records[k].t > tr.records[k - 1].t);
}

}  // namespace

TEST_CASE("linear_half_step is the Cayley transform of the discrete operator",
          "[dynamics]") {
  SECTION("zero field maps to zero") {
    const GridPtr g = make_grid(GridKind::HalfLine, 10.0, 128);
    const Field out = linear_half_step(make_field(g), Params{3.0, 0.1, 1.0}, 1e-2);
    for (const auto& z : out.v) CHECK(std::abs(z) == 0.0);
  }

  SECTION("Dirichlet eigenmode advances by the exact Cayley phase") {
    const double L = 10.0;
    const GridPtr g = make_grid(GridKind::HalfLine, L, 256);
    const Params prm{3.0, 0.0, 1.0};
    const int k = 3;
    const Field mode = field_from_function(
        g, [&](double x) { return std::sin(k * M_PI * x / L); });
    const double dt = 5e-4;
    const Field out = linear_half_step(mode, prm, dt);
    const double lam =
        4.0 / (g->h * g->h) * std::pow(std::sin(k * M_PI * g->h / (2.0 * L)), 2);
    const complexd cayley = std::exp(complexd(0.0, -2.0 * std::atan(0.5 * lam * dt)));
    const complexd contin = std::exp(complexd(0.0, -lam * dt));
    double err_exact = 0.0, err_small_dt = 0.0;
    for (int j = 0; j < mode.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(j);
      err_exact = std::max(err_exact, std::abs(out.v[i] - cayley * mode.v[i]));
      err_small_dt = std::max(err_small_dt, std::abs(out.v[i] - contin * mode.v[i]));
    }
    CHECK(err_exact <= 1e-13);
    CHECK(err_small_dt <= 1e-10);
  }

  SECTION("one step is unitary in the quadrature norm") {
    const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 2048);
    const Params prm{3.0, 0.1, 1.0};
    const Field u = testutil::random_smooth_field(g, 11);
    const double m0 = mass(u);
    CHECK(std::abs(mass(linear_half_step(u, prm, 0.1)) - m0) <= 1e-12 * m0);
  }

  SECTION("error cases") {
    const GridPtr gf = make_grid(GridKind::FullLine, 10.0, 128);
    CHECK_THROWS_AS(linear_half_step(make_field(gf), Params{3.0, 0.1, 1.0}, 1e-3),
                    std::invalid_argument);
    const GridPtr g = make_grid(GridKind::HalfLine, 10.0, 128);
    CHECK_THROWS_AS(
        linear_half_step(make_field(g), Params{3.0, 0.1, 1.0},
                         std::numeric_limits<double>::quiet_NaN()),
        std::invalid_argument);
  }
}

TEST_CASE("nonlinear_step is a pure pointwise phase", "[dynamics]") {
  const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 512);
  const Params prm{3.0, 0.1, 1.0};

  SECTION("modulus is unchanged") {
    const Field u = testutil::random_smooth_field(g, 21);
    const Field out = nonlinear_step(u, prm, 0.37);
    for (int j = 0; j < u.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(j);
      CHECK(std::abs(out.v[i]) ==
            Approx(std::abs(u.v[i])).margin(1e-14 * (1.0 + std::abs(u.v[i]))));
    }
  }

  SECTION("single-node amplitude alpha rotates by alpha^2 dt at p = 3") {
    Field u = make_field(g);
    const double alpha = 1.7;
    const double dt = 0.23;
    u.v[5] = alpha;
    const Field out = nonlinear_step(u, prm, dt);
    const complexd expect = alpha * std::exp(complexd(0.0, alpha * alpha * dt));
    CHECK(std::abs(out.v[5] - expect) <= 1e-15 * alpha);
    CHECK(std::abs(out.v[6]) == 0.0);
  }

  SECTION("dt then -dt composes to the identity") {
    const Field u = testutil::random_smooth_field(g, 22);
    const Field round = nonlinear_step(nonlinear_step(u, prm, 0.8), prm, -0.8);
    for (int j = 0; j < u.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(j);
      CHECK(std::abs(round.v[i] - u.v[i]) <= 1e-14 * (1.0 + std::abs(u.v[i])));
    }
  }
}

TEST_CASE("evolve holds a standing wave for ten periods", "[dynamics]") {
  static const GridPtr g = make_grid(GridKind::HalfLine, 40.0, 8192);
  const Params prm{3.0, 0.1, 1.0};
  static const GroundStateResult gs =
      minimize_nehari(prm, default_initial_guess(g, prm));
  REQUIRE(gs.converged);

  static const EvolutionTrace tr = [&] {
    EvolveOptions opts;
    opts.orbital_reference = &gs.profile;
    opts.snapshot_every = 1 << 20;  // initial and final states only
    return evolve(gs.profile, prm, 10.0, 1e-3, opts);
  }();

  REQUIRE(tr.status == EvolveStatus::Completed);
  check_increasing(tr);
  CHECK(tr.records.back().t == Approx(10.0).margin(1e-9));

  SECTION("mass, energy and action drift within the conservation budget") {
    CHECK(tr.mass_drift <= 1e-10);
    const double e0 = tr.records.front().energy;
    const double s0 = tr.records.front().action;
    for (const auto& r : tr.records) {
      CHECK(std::abs(r.energy - e0) <= 1e-5 * std::abs(e0));
      CHECK(std::abs(r.action - s0) <= 1e-5 * std::abs(s0));
    }
  }

  SECTION("the orbit stays within 1e-3 of the ground state") {
    for (const auto& r : tr.records) {
      REQUIRE(r.orbital_dist.has_value());
      CHECK(*r.orbital_dist <= 1e-3);
    }
    // The modulus itself is steady, not just the orbit distance.
    const Field& final_u = tr.snapshots.back().second;
    double sup_dev = 0.0;
    for (int j = 0; j < final_u.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(j);
      sup_dev = std::max(sup_dev, std::abs(std::abs(final_u.v[i]) -
                                           std::abs(gs.profile.v[i])));
    }
    CHECK(sup_dev <= 1e-3);
  }

  SECTION("virial sides are constant and blow-up is absent") {
    const VirialReport vr = track_virial(tr);
    CHECK(vr.points >= 100);
    CHECK(vr.max_second_diff_rel <= 1e-3);
    CHECK(vr.max_first_diff_rel <= 1e-3);
    const BlowupReport br = detect_blowup(tr);
    CHECK_FALSE(br.detected);
    CHECK_FALSE(br.t_star.has_value());
    CHECK(br.growth_curve.size() == tr.records.size());
  }
}

TEST_CASE("evolve input validation and trivial data", "[dynamics]") {
  const GridPtr g = make_grid(GridKind::HalfLine, 10.0, 256);
  const Params prm{3.0, 0.1, 1.0};
  const Field zero = make_field(g);

  SECTION("zero data stays zero and completes") {
    const EvolutionTrace tr = evolve(zero, prm, 1.0, 1e-2);
    CHECK(tr.status == EvolveStatus::Completed);
    check_increasing(tr);
    for (const auto& r : tr.records) CHECK(r.mass == 0.0);
    CHECK(tr.mass_drift == 0.0);
  }

  SECTION("parameter validation") {
    CHECK_THROWS_AS(evolve(zero, prm, -1.0, 1e-2), std::invalid_argument);
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 0.0), std::invalid_argument);
    EvolveOptions bad;
    bad.cadence = 0;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, bad), std::invalid_argument);
    bad = {};
    bad.blowup_factor = 1.0;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, bad), std::invalid_argument);
    bad = {};
    bad.mass_step_tol = 0.0;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, bad), std::invalid_argument);
    bad = {};
    bad.snapshot_every = -1;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, bad), std::invalid_argument);
    bad = {};
    bad.max_halvings = -1;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, bad), std::invalid_argument);
  }

  SECTION("accuracy guard rejects oversized dt") {
    EvolveOptions opts;
    opts.dt_guard = 1.0;  // requires dt <= h^2 = (10/256)^2
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, opts), std::invalid_argument);
    CHECK_NOTHROW(evolve(zero, prm, 1e-2, 1e-3, opts));
  }

  SECTION("orbital reference must share the grid") {
    const GridPtr g2 = make_grid(GridKind::HalfLine, 10.0, 128);
    const Field ref = make_field(g2);
    EvolveOptions opts;
    opts.orbital_reference = &ref;
    CHECK_THROWS_AS(evolve(zero, prm, 1.0, 1e-2, opts), std::invalid_argument);
  }

  SECTION("non-finite state ends as Diverged with the initial record kept") {
    Field bad = make_field(g);
    bad.v[3] = std::numeric_limits<double>::quiet_NaN();
    const EvolutionTrace tr = evolve(bad, prm, 1.0, 1e-2);
    CHECK(tr.status == EvolveStatus::Diverged);
    CHECK(tr.records.size() == 1);
  }
}

TEST_CASE("strang splitting is second order in dt", "[dynamics]") {
  const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 2048);
  const Params prm{3.0, 0.1, 1.0};
  const Field u0 = gentle_bump(g);
  EvolveOptions opts;
  opts.cadence = 1 << 20;
  opts.snapshot_every = 1 << 20;  // final state arrives as the last snapshot
  const auto run = [&](double dt) {
    const EvolutionTrace tr = evolve(u0, prm, 1.0, dt, opts);
    REQUIRE(tr.status == EvolveStatus::Completed);
    return tr.snapshots.back().second;
  };
  const Field ua = run(2e-3);
  const Field ub = run(1e-3);
  const Field uc = run(5e-4);
  const double ratio = h1_diff(ua, ub) / h1_diff(ub, uc);
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("evolution is reversible through conjugation", "[dynamics]") {
  // Conjugation maps the equation to itself with time reversed, and both
  // sub-steps commute with it exactly, so a forward run re-entered backward
  // returns the initial data up to round-off.
  const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 2048);
  const Params prm{3.0, 0.1, 1.0};
  const Field u0 = gentle_bump(g);
  EvolveOptions opts;
  opts.cadence = 1 << 20;
  opts.snapshot_every = 1 << 20;
  const EvolutionTrace fwd = evolve(u0, prm, 1.0, 1e-3, opts);
  REQUIRE(fwd.status == EvolveStatus::Completed);
  const EvolutionTrace bwd =
      evolve(conj_field(fwd.snapshots.back().second), prm, 1.0, 1e-3, opts);
  REQUIRE(bwd.status == EvolveStatus::Completed);
  CHECK(h1_diff(conj_field(bwd.snapshots.back().second), u0) <= 1e-8);
}

TEST_CASE("dispersive tail trips the boundary-mass flag", "[dynamics]") {
  const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 2048);
  const Params prm{3.0, 0.1, 1.0};
  const EvolutionTrace tr = evolve(gentle_bump(g), prm, 2.0, 1e-3);
  REQUIRE(tr.status == EvolveStatus::Completed);
  REQUIRE(tr.boundary_flag_t.has_value());
  CHECK(*tr.boundary_flag_t > 0.0);
  CHECK(*tr.boundary_flag_t < 2.0);
}

TEST_CASE("per-step mass-drift guard halves dt and marks the onset",
          "[dynamics]") {
  const GridPtr g = make_grid(GridKind::HalfLine, 10.0, 512);
  const Params prm{3.0, 0.1, 1.0};
  const Field u0 = field_from_function(
      g, [](double x) { return 0.5 * x * std::exp(-x); });
  EvolveOptions opts;
  opts.mass_step_tol = 1e-18;  // below round-off, so the guard must fire
  opts.max_halvings = 3;
  const EvolutionTrace tr = evolve(u0, prm, 0.05, 1e-3, opts);
  CHECK(tr.status == EvolveStatus::Completed);
  CHECK(tr.dt_halvings >= 1);
  CHECK(tr.dt_halvings <= 3);
  REQUIRE(tr.resolution_loss_t.has_value());
  CHECK(*tr.resolution_loss_t > 0.0);
  check_increasing(tr);
}

TEST_CASE("virial identities hold along the flow", "[dynamics]") {
  static const GridPtr g = make_grid(GridKind::HalfLine, 20.0, 8192);
  const Params prm{3.0, 0.1, 1.0};

  // Records widely spaced: the finite-difference term then dominates the
  // fixed spatial error, making the second-order improvement visible.
  static const EvolutionTrace t1 = [&] {
    EvolveOptions o;
    o.cadence = 100;
    return evolve(gentle_bump(g), prm, 1.0, 1e-3, o);
  }();
  static const EvolutionTrace t2 = [&] {
    EvolveOptions o;
    o.cadence = 100;
    return evolve(gentle_bump(g), prm, 1.0, 5e-4, o);
  }();
  REQUIRE(t1.status == EvolveStatus::Completed);
  REQUIRE(t2.status == EvolveStatus::Completed);

  SECTION("second difference matches 8Q within 1%, improving ~4x at dt/2") {
    const VirialReport v1 = track_virial(t1);
    const VirialReport v2 = track_virial(t2);
    CHECK(v1.max_second_diff_rel <= 1e-2);
    const double ratio = v1.max_second_diff_rel / v2.max_second_diff_rel;
    CHECK(ratio >= 3.2);
    CHECK(ratio <= 4.8);
  }

  SECTION("first difference matches the flux, which vanishes for real data") {
    const VirialReport v1 = track_virial(t1);
    CHECK(v1.max_first_diff_rel <= 1e-2);
    CHECK(t1.records.front().virial_flux.value() == 0.0);
  }

  SECTION("traces without virial columns or enough records are rejected") {
    const GridPtr gf = make_grid(GridKind::FullLine, 10.0, 256);
    const Params free_prm{3.0, 0.0, 1.0};
    const EvolutionTrace tf =
        evolve(testutil::random_smooth_field(gf, 5), free_prm, 0.1, 1e-2);
    CHECK_THROWS_AS(track_virial(tf), std::invalid_argument);

    EvolutionTrace stub = t1;
    stub.records.resize(2);
    CHECK_THROWS_AS(track_virial(stub), std::invalid_argument);
  }
}

TEST_CASE("critical blow-up: detection, quadratic law, and the fitted root",
          "[dynamics]") {
  static const GridPtr g = make_grid(GridKind::HalfLine, 40.0, 8192);
  const Params prm{5.0, 0.1, 1.0};
  static const GroundStateResult gs =
      minimize_nehari(prm, default_initial_guess(g, prm));
  REQUIRE(gs.converged);

  static const Field u0 = [&] {
    Field w = gs.profile;
    for (auto& z : w.v) z *= 1.01;
    return w;
  }();
  static const double e0 = energy(u0, prm);
  static const EvolutionTrace tr = evolve(u0, prm, 50.0, 1e-3);

  REQUIRE(e0 < 0.0);  // the amplified state has negative energy
  REQUIRE(tr.status == EvolveStatus::BlowupDetected);
  REQUIRE(tr.t_blowup.has_value());
  CHECK(*tr.t_blowup > 0.0);
  CHECK(*tr.t_blowup < 50.0);

  SECTION("report mirrors the halt and fits the virial parabola") {
    const BlowupReport rep = detect_blowup(tr);
    REQUIRE(rep.detected);
    CHECK(*rep.t_star == Approx(*tr.t_blowup));
    REQUIRE(rep.virial_fit.has_value());
    const auto& fit = *rep.virial_fit;
    // Second derivative of the moment is 8Q = 16E at p = 5, E conserved.
    CHECK(2.0 * fit[2] == Approx(16.0 * e0).epsilon(0.05));
    // Real data: the linear coefficient is the (zero) initial flux.
    CHECK(std::abs(fit[1]) <= 1e-3 * std::abs(fit[0]));
    REQUIRE(rep.virial_root.has_value());
    CHECK(*rep.virial_root > 0.0);
  }

  SECTION("moment follows the exact quadratic law until the halt") {
    const double v0 = tr.records.front().virial_moment.value();
    const double f0 = tr.records.front().virial_flux.value();
    for (const auto& r : tr.records) {
      const double law = v0 + f0 * r.t + 8.0 * e0 * r.t * r.t;
      CHECK(std::abs(r.virial_moment.value() - law) <= 1e-3 * v0);
    }
  }

  SECTION("threshold configuration is validated") {
    BlowupThresholds thr;
    thr.growth_factor = 1.0;
    CHECK_THROWS_AS(detect_blowup(tr, thr), std::invalid_argument);
    EvolutionTrace empty;
    CHECK_THROWS_AS(detect_blowup(empty), std::invalid_argument);
  }
}

TEST_CASE("supercritical invariant set persists until blow-up", "[dynamics]") {
  static const GridPtr g = make_grid(GridKind::HalfLine, 40.0, 8192);
  const Params prm{7.0, 0.1, 1.0};
  static const GroundStateResult gs =
      minimize_nehari(prm, default_initial_guess(g, prm));
  REQUIRE(gs.converged);

  static const Field u0 = rescale(gs.profile, 1.05);
  const FunctionalParts f0 = functional_parts(u0, prm);
  REQUIRE(nehari_of(f0, prm) < 0.0);
  REQUIRE(q_of(f0, prm) < 0.0);
  REQUIRE(action_of(f0, prm) < gs.level_m);

  static const EvolutionTrace tr = evolve(u0, prm, 50.0, 1e-3);
  REQUIRE(tr.status == EvolveStatus::BlowupDetected);

  double max_j = -std::numeric_limits<double>::infinity();
  double max_q = max_j, max_s = max_j;
  for (const auto& r : tr.records) {
    max_j = std::max(max_j, r.nehari);
    max_q = std::max(max_q, r.q);
    max_s = std::max(max_s, r.action);
  }
  CHECK(max_j < 0.0);
  CHECK(max_s < gs.level_m);
  // Q stays below a strictly negative level, the fitted barrier.
  CHECK(max_q < 0.0);
  const double eps_fitted = -max_q;
  CHECK(eps_fitted > 1e-3);
}
