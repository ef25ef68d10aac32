//! Local Pohozaev balances and gauge tangency on concrete fields.
//!
//! The identity under test couples every piece of the model: spectral
//! gradients, the gauge solve, the potential's analytic gradient, and the
//! Newton solution itself. A converged solution must balance on any
//! interior ball; a field that merely looks plausible must not.

mod common;

use std::sync::LazyLock;

use css_peaks::gauge::compute_gauge;
use css_peaks::grid::{Grid2D, ScalarField};
use css_peaks::pohozaev::{pohozaev_check, tangency_residual};
use css_peaks::potential::{PotentialSpec, Well};
use css_peaks::radial::{build_ansatz, cached_profile};
use css_peaks::solve::{newton_solve, NewtonParams, SolveReport};

const P: f64 = 4.0;
const EPS: f64 = 0.15;
const M_QUAD: usize = 720;

fn single_well() -> PotentialSpec {
    PotentialSpec {
        wells: vec![Well {
            center: [0.0, 0.0],
            v_at_a: 1.0,
            b: [1.0, 1.0],
            m: 2.0,
            eta: 0.4,
        }],
        v_inf: 2.0,
        theta: 1.0,
    }
}

static SOLVED: LazyLock<SolveReport> = LazyLock::new(|| {
    let spec = single_well();
    let grid = Grid2D::new(256, 1.6).unwrap();
    let profile = cached_profile(1.0, P).unwrap();
    let w = build_ansatz(grid, &[profile], &[[0.0, 0.0]], EPS).unwrap();
    let report = newton_solve(&w, &spec, EPS, P, &NewtonParams::default()).unwrap();
    assert!(report.converged, "fixture solve must converge");
    report
});

#[test]
fn balance_holds_on_off_center_balls_of_a_converged_solution() {
    let spec = single_well();
    let u = &SOLVED.u;
    let gauge = compute_gauge(u);
    // both coordinates on one ball, then a second geometry for variety
    for (center, d, k) in [
        ([0.12, 0.12], 0.36, 1),
        ([0.12, 0.12], 0.36, 2),
        ([0.15, 0.09], 0.42, 1),
    ] {
        let rep = pohozaev_check(u, &gauge, &spec, EPS, P, center, d, k, M_QUAD).unwrap();
        assert!(
            rep.rel_residual < 1e-2,
            "ball ({}, {}) k={k}: rel {:.3e}",
            center[0],
            center[1],
            rep.rel_residual
        );
        assert!(rep.term_scale > 0.0 && rep.rhs.is_finite());
    }
}

#[test]
fn flat_potential_control_ball_balances_to_noise() {
    let spec = single_well();
    let u = &SOLVED.u;
    let gauge = compute_gauge(u);
    let main = pohozaev_check(u, &gauge, &spec, EPS, P, [0.12, 0.12], 0.36, 1, M_QUAD).unwrap();
    // ball entirely outside the blend disc: grad V vanishes identically
    let ctrl = pohozaev_check(u, &gauge, &spec, EPS, P, [0.9, 0.4], 0.3, 1, M_QUAD).unwrap();
    assert_eq!(ctrl.lhs, 0.0);
    assert!(
        ctrl.rhs.abs() <= 1e-6 * main.term_scale,
        "control rhs {:.3e} vs floor {:.3e}",
        ctrl.rhs,
        1e-6 * main.term_scale
    );
}

#[test]
fn balance_fails_for_a_rescaled_nonsolution() {
    let spec = single_well();
    let mut v = SOLVED.u.clone();
    v.scale(1.3);
    let gauge = compute_gauge(&v);
    let good = pohozaev_check(&SOLVED.u, &compute_gauge(&SOLVED.u), &spec, EPS, P, [0.12, 0.12], 0.36, 1, M_QUAD)
        .unwrap();
    let bad = pohozaev_check(&v, &gauge, &spec, EPS, P, [0.12, 0.12], 0.36, 1, M_QUAD).unwrap();
    assert!(
        bad.rel_residual > 1e-2 && bad.rel_residual > 10.0 * good.rel_residual,
        "scaled field should break the balance: {:.3e} vs {:.3e}",
        bad.rel_residual,
        good.rel_residual
    );
}

#[test]
fn tangency_vanishes_for_a_wide_radial_bump() {
    let grid = Grid2D::new(512, 7.0).unwrap();
    let u = ScalarField::from_fn(grid, |x1, x2| common::cutoff_bump((x1 * x1 + x2 * x2).sqrt()));
    let gauge = compute_gauge(&u);
    let t = tangency_residual(&u, &gauge);
    assert!(t < 1e-6, "radial bump tangency {t:.3e}");
}

#[test]
fn tangency_of_the_converged_single_peak_is_small() {
    let gauge = compute_gauge(&SOLVED.u);
    let t = tangency_residual(&SOLVED.u, &gauge);
    assert!(t < 1e-3, "converged solution tangency {t:.3e}");
}

#[test]
fn tangency_flags_an_asymmetric_nonsolution() {
    let grid = Grid2D::new(256, 3.2).unwrap();
    let u = ScalarField::from_fn(grid, |x1, x2| {
        let g1 = (-((x1 - 0.7).powi(2) + (x2 - 0.3).powi(2)) / (2.0 * 0.4 * 0.4)).exp();
        let g2 = (-((x1 + 0.5).powi(2) + (x2 + 0.45).powi(2)) / (2.0 * 0.3 * 0.3)).exp();
        g1 + 0.55 * g2
    });
    let gauge = compute_gauge(&u);
    let t = tangency_residual(&u, &gauge);
    assert!(t > 1e-2, "asymmetric control tangency {t:.3e}");
}
