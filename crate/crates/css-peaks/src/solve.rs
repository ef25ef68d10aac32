//! Newton-Krylov solver for the full system and drivers built on it:
//! continuation down a list of eps values, remainder measurement against
//! the fitted ansatz, and the local-uniqueness probe.
//!
//! The outer iteration is a damped Newton method on the discrete residual.
//! Each step solves the symmetric Jacobian system inexactly with MINRES,
//! preconditioned by the constant-coefficient operator
//! `(-eps^2 Laplacian + mean(V))^{-1}` applied spectrally. Gauge fields are
//! recomputed once per Newton iterate and held fixed inside the Krylov
//! solve; their first variation enters through the Jacobian itself.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::{energy, norm_eps, residual_with_fields, EnergyBreakdown, Linearization};
use crate::error::{validation, Result};
use crate::gauge::compute_gauge;
use crate::grid::{Grid2D, ScalarField};
use crate::peaks::{default_delta, match_to_wells, minimize_peaks, peak_locations, PeakFit};
use crate::potential::PotentialSpec;
use crate::radial::{build_ansatz, cached_profile, RadialProfile};
use crate::spectral::{fft2, forward_real, wavenumbers};

/// Knobs of the damped Newton iteration.
#[derive(Clone, Copy, Debug)]
pub struct NewtonParams {
    /// Success threshold on the relative residual `|F(u)|_2 / |u|_2`.
    pub tol: f64,
    /// Maximum Newton updates.
    pub max_iter: usize,
    /// Maximum step halvings in the line search before giving up.
    pub damping_cap: usize,
    /// Iteration cap of the inner MINRES solve.
    pub minres_max: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            tol: 1e-10,
            max_iter: 40,
            damping_cap: 20,
            minres_max: 400,
        }
    }
}

/// Outcome of a Newton solve, converged or not.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Final iterate.
    pub u: ScalarField,
    /// Fitted maxima of the final iterate; ordered by well when their count
    /// matches the well count, otherwise in scan order.
    pub peaks: Vec<PeakFit>,
    /// Relative residual at the final iterate.
    pub residual_norm: f64,
    /// Newton updates performed.
    pub iterations: usize,
    /// Total inner MINRES iterations.
    pub minres_iterations: usize,
    pub converged: bool,
    /// Relative residual before each update, in order.
    pub history: Vec<f64>,
    /// `|u - W|_eps` with the ansatz rebuilt at the fitted peaks; absent
    /// when the peak count does not match the well count.
    pub remainder_norm: Option<f64>,
    /// Distances of the fitted peaks to their well centers, in well order;
    /// absent under the same condition.
    pub peak_offsets: Option<Vec<f64>>,
}

/// Spectral multiplier of `(-eps^2 Laplacian + vbar)^{-1}` on the solve grid.
fn precond_symbol(grid: Grid2D, eps: f64, vbar: f64) -> Vec<f64> {
    let n = grid.n();
    let k = wavenumbers(n, grid.spacing());
    let mut sym = Vec::with_capacity(n * n);
    for i2 in 0..n {
        for i1 in 0..n {
            sym.push(1.0 / (eps * eps * (k[i1] * k[i1] + k[i2] * k[i2]) + vbar));
        }
    }
    sym
}

fn apply_precond(v: &ScalarField, sym: &[f64]) -> ScalarField {
    let grid = v.grid();
    let n = grid.n();
    let mut buf = forward_real(v.values(), n);
    for (b, s) in buf.iter_mut().zip(sym) {
        *b *= *s;
    }
    fft2(&mut buf, n, true);
    let mut out = ScalarField::zeros(grid);
    for (o, b) in out.values_mut().iter_mut().zip(&buf) {
        *o = b.re;
    }
    out
}

/// Preconditioned MINRES for the symmetric Jacobian system `A x = b`.
///
/// Follows the Paige-Saunders recurrence; stops when either the estimated
/// relative residual `|r| / (|A| |x|)` or the normal-equations estimate
/// falls below `rtol`, or at `maxiter`. Returns the iterate and the
/// iteration count. The preconditioner symbol must be positive.
fn minres(
    lin: &Linearization,
    b: &ScalarField,
    sym: &[f64],
    rtol: f64,
    maxiter: usize,
) -> (ScalarField, usize) {
    let grid = b.grid();
    let mut x = ScalarField::zeros(grid);
    let mut r1 = b.clone();
    let mut y = apply_precond(&r1, sym);
    let beta1sq = r1.dot(&y);
    if beta1sq <= 0.0 {
        return (x, 0);
    }
    let beta1 = beta1sq.sqrt();

    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0f64;
    let mut sn = 0.0f64;
    let mut tnorm2 = 0.0;
    let mut r2 = r1.clone();
    let mut w = ScalarField::zeros(grid);
    let mut w2 = ScalarField::zeros(grid);
    let macheps = f64::EPSILON;
    let mut itn = 0usize;

    while itn < maxiter {
        itn += 1;
        let s = 1.0 / beta;
        let mut v = y.clone();
        v.scale(s);
        let mut ynew = lin.apply(&v);
        if itn >= 2 {
            ynew.add_scaled(-beta / oldb, &r1);
        }
        let alfa = v.dot(&ynew);
        ynew.add_scaled(-alfa / beta, &r2);
        r1 = std::mem::replace(&mut r2, ynew);
        y = apply_precond(&r2, sym);
        oldb = beta;
        let betasq = r2.dot(&y);
        if betasq < 0.0 {
            // indefinite preconditioner; cannot happen with a positive symbol
            break;
        }
        beta = betasq.sqrt();
        tnorm2 += alfa * alfa + oldb * oldb + beta * beta;

        // previous plane rotation
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let root = (gbar * gbar + dbar * dbar).sqrt();

        // current plane rotation
        let gamma = (gbar * gbar + beta * beta).sqrt().max(macheps);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // solution update
        let w1 = std::mem::replace(&mut w2, w.clone());
        let mut wn = v;
        wn.add_scaled(-oldeps, &w1);
        wn.add_scaled(-delta, &w2);
        wn.scale(1.0 / gamma);
        w = wn;
        x.add_scaled(phi, &w);

        let anorm = tnorm2.sqrt();
        let ynorm = x.l2_norm();
        if anorm > 0.0 && ynorm > 0.0 {
            let test1 = phibar / (anorm * ynorm);
            let test2 = root / anorm;
            if test1 <= rtol || test2 <= rtol {
                break;
            }
            // machine-precision floors
            if 1.0 + test1 <= 1.0 || 1.0 + test2 <= 1.0 || anorm * ynorm * macheps >= beta1 {
                break;
            }
        }
    }
    (x, itn)
}

/// Damped inexact Newton iteration on the full discrete system.
///
/// The forcing of the inner solve follows the outer progress
/// (`min(0.1, sqrt(rel))`), so early steps are cheap and the terminal
/// phase recovers the quadratic tail. The line search halves the step
/// until the nonlinear residual norm decreases by the Armijo margin; a
/// stagnant search ends the run with the last iterate in the report.
pub fn newton_solve(
    u0: &ScalarField,
    spec: &PotentialSpec,
    eps: f64,
    p: f64,
    prm: &NewtonParams,
) -> Result<SolveReport> {
    spec.validate()?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(validation!("eps must be positive, got {eps}"));
    }
    if !(p.is_finite() && p > 2.0) {
        return Err(validation!("p must exceed 2, got {p}"));
    }
    if !u0.is_finite() {
        return Err(validation!("start iterate contains non-finite values"));
    }

    let grid = u0.grid();
    let v_field = spec.eval_on_grid(grid);
    let vbar = v_field.values().iter().sum::<f64>() / grid.len() as f64;
    let sym = precond_symbol(grid, eps, vbar);

    let mut u = u0.clone();
    let mut gauge = compute_gauge(&u);
    let mut f = residual_with_fields(&u, &v_field, &gauge, eps, p);
    let mut nf = f.l2_norm();
    let mut hist = Vec::new();
    let mut minres_total = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..prm.max_iter {
        let rel = nf / u.l2_norm().max(f64::MIN_POSITIVE);
        hist.push(rel);
        if rel < prm.tol {
            converged = true;
            break;
        }

        let forcing = rel.sqrt().min(0.1);
        let lin = Linearization::from_fields(u.clone(), &v_field, gauge, eps, p);
        let mut rhs = f.clone();
        rhs.scale(-1.0);
        let (dv, nit) = minres(&lin, &rhs, &sym, forcing, prm.minres_max);
        minres_total += nit;

        let mut lam = 1.0;
        let mut accepted = None;
        for _ in 0..prm.damping_cap {
            let mut un = u.clone();
            un.add_scaled(lam, &dv);
            let gn = compute_gauge(&un);
            let fnext = residual_with_fields(&un, &v_field, &gn, eps, p);
            let nfn = fnext.l2_norm();
            if nfn < (1.0 - 1e-4 * lam) * nf {
                accepted = Some((un, gn, fnext, nfn));
                break;
            }
            lam *= 0.5;
        }
        match accepted {
            Some((un, gn, fnext, nfn)) => {
                u = un;
                gauge = gn;
                f = fnext;
                nf = nfn;
                iterations += 1;
            }
            None => break,
        }
    }
    if !converged {
        // record the final state when the loop ended on max_iter or a
        // stagnant line search; on convergence the last entry already is it
        let rel = nf / u.l2_norm().max(f64::MIN_POSITIVE);
        if rel < prm.tol {
            converged = true;
        }
        if hist.len() == iterations {
            hist.push(rel);
        }
    }
    let residual_norm = nf / u.l2_norm().max(f64::MIN_POSITIVE);
    if converged {
        iterations = hist.len() - 1;
    }

    let raw = peak_locations(&u);
    let centers: Vec<[f64; 2]> = spec.wells.iter().map(|w| w.center).collect();
    let (peaks, remainder_norm, peak_offsets) = if raw.len() == centers.len() && !raw.is_empty() {
        let matched = match_to_wells(&raw, &centers)?;
        let offsets: Vec<f64> = matched
            .iter()
            .zip(&centers)
            .map(|(pk, c)| ((pk.point[0] - c[0]).powi(2) + (pk.point[1] - c[1]).powi(2)).sqrt())
            .collect();
        let profiles = profiles_for(spec, p)?;
        let y: Vec<[f64; 2]> = matched.iter().map(|pk| pk.point).collect();
        let rem = match build_ansatz(grid, &profiles, &y, eps) {
            Ok(wfit) => {
                let mut diff = u.clone();
                diff.add_scaled(-1.0, &wfit);
                Some(norm_eps(&diff, spec, eps))
            }
            // fitted peaks can land outside the ansatz margin on a failed run
            Err(_) => None,
        };
        (matched, rem, Some(offsets))
    } else {
        (raw, None, None)
    };

    Ok(SolveReport {
        u,
        peaks,
        residual_norm,
        iterations,
        minres_iterations: minres_total,
        converged,
        history: hist,
        remainder_norm,
        peak_offsets,
    })
}

/// One ground-state profile per well, at that well's center depth.
pub fn profiles_for(spec: &PotentialSpec, p: f64) -> Result<Vec<Arc<RadialProfile>>> {
    spec.wells
        .iter()
        .map(|w| cached_profile(w.v_at_a, p))
        .collect()
}

/// Result of [`remainder_norm`]: the eps-norm of the remainder and the
/// fitted peak locations it was measured at.
#[derive(Clone, Debug)]
pub struct RemainderFit {
    pub phi_norm: f64,
    pub y_fit: Vec<[f64; 2]>,
}

/// Measures `|u - W|_eps` with the ansatz rebuilt at the fitted peaks of
/// `u`. Errors when the number of detected peaks does not match the number
/// of profiles.
pub fn remainder_norm(
    u: &ScalarField,
    spec: &PotentialSpec,
    profiles: &[Arc<RadialProfile>],
    eps: f64,
) -> Result<RemainderFit> {
    let raw = peak_locations(u);
    if raw.len() != profiles.len() {
        return Err(validation!(
            "{} peaks detected but {} profiles supplied",
            raw.len(),
            profiles.len()
        ));
    }
    let centers: Vec<[f64; 2]> = spec.wells.iter().map(|w| w.center).collect();
    let matched = if centers.len() == raw.len() {
        match_to_wells(&raw, &centers)?
    } else {
        raw
    };
    let y: Vec<[f64; 2]> = matched.iter().map(|pk| pk.point).collect();
    let w = build_ansatz(u.grid(), profiles, &y, eps)?;
    let mut diff = u.clone();
    diff.add_scaled(-1.0, &w);
    Ok(RemainderFit {
        phi_norm: norm_eps(&diff, spec, eps),
        y_fit: y,
    })
}

/// One step of a continuation plan: target eps and the grid to solve it on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRung {
    pub eps: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

/// Converged solve at one rung, with the measurements the sweep reports.
#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub rung: SweepRung,
    pub report: SolveReport,
    pub energy: EnergyBreakdown,
    /// `|u - W|_eps` at the fitted peaks.
    pub phi_norm: f64,
    /// `|y^i - a^i|` per well.
    pub offsets: Vec<f64>,
    /// Fitted peak locations, in well order.
    pub peaks: Vec<[f64; 2]>,
}

/// Continuation over a descending eps plan, largest first.
///
/// Each rung starts from the ansatz rebuilt at the current eps at the
/// previously fitted peak locations; the reduced variables are what
/// continue across rungs. Interpolating the raw field across an octave of
/// eps gives peaks twice too wide and the Newton line search stalls.
/// With `minimize_first` the first rung seeds its peaks from the reduced
/// minimizer instead of the well centers.
pub fn continuation_run(
    spec: &PotentialSpec,
    p: f64,
    rungs: &[SweepRung],
    prm: &NewtonParams,
    minimize_first: bool,
) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    if rungs.is_empty() {
        return Err(validation!("empty continuation plan"));
    }
    for pair in rungs.windows(2) {
        if pair[1].eps >= pair[0].eps {
            return Err(validation!(
                "continuation plan must have strictly decreasing eps, got {} then {}",
                pair[0].eps,
                pair[1].eps
            ));
        }
    }
    for rung in rungs {
        let grid = Grid2D::new(rung.n, rung.l)?;
        if grid.spacing() > rung.eps / 8.0 {
            return Err(validation!(
                "rung eps = {} underresolved: h = {} exceeds eps/8",
                rung.eps,
                grid.spacing()
            ));
        }
    }

    let profiles = profiles_for(spec, p)?;
    let centers: Vec<[f64; 2]> = spec.wells.iter().map(|w| w.center).collect();
    let mut warm: Option<Vec<[f64; 2]>> = None;
    let mut out = Vec::with_capacity(rungs.len());
    for rung in rungs {
        let grid = Grid2D::new(rung.n, rung.l)?;
        let y0 = match &warm {
            Some(y) => y.clone(),
            None if minimize_first => {
                let delta = default_delta(spec, grid);
                let m = minimize_peaks(grid, spec, &profiles, &centers, rung.eps, p, delta)?;
                if !m.config.converged {
                    log::warn!(
                        "reduced minimization hit its evaluation cap after {} evaluations",
                        m.evaluations
                    );
                }
                m.config.y
            }
            None => centers.clone(),
        };
        let u0 = build_ansatz(grid, &profiles, &y0, rung.eps)?;
        let report = newton_solve(&u0, spec, rung.eps, p, prm)?;
        if !report.converged {
            return Err(crate::error::Error::Solver(format!(
                "newton stalled at eps = {} (relative residual {:.3e} after {} iterations)",
                rung.eps, report.residual_norm, report.iterations
            )));
        }
        let (offsets, phi) = match (&report.peak_offsets, report.remainder_norm) {
            (Some(o), Some(phi)) => (o.clone(), phi),
            _ => {
                return Err(crate::error::Error::Solver(format!(
                    "solve at eps = {} found {} peaks for {} wells",
                    rung.eps,
                    report.peaks.len(),
                    centers.len()
                )))
            }
        };
        let peaks: Vec<[f64; 2]> = report.peaks.iter().map(|pk| pk.point).collect();
        warm = Some(peaks.clone());
        let energy = energy(&report.u, spec, rung.eps, p);
        out.push(SweepPoint {
            rung: *rung,
            report,
            energy,
            phi_norm: phi,
            offsets,
            peaks,
        });
    }
    Ok(out)
}

/// Outcome of [`uniqueness_probe`].
#[derive(Clone, Debug)]
pub struct UniquenessProbe {
    /// Newton reports per start, in start order.
    pub reports: Vec<SolveReport>,
    /// The random displacement applied to each well center, per start.
    pub perturbations: Vec<Vec<[f64; 2]>>,
    /// Indices of starts whose solve did not converge; excluded from the
    /// pairwise comparison.
    pub excluded: Vec<usize>,
    /// Largest sup-norm distance between converged solutions; absent with
    /// fewer than two of them.
    pub max_pairwise_sup: Option<f64>,
    /// Newton tolerance the starts were solved to.
    pub tol: f64,
    pub seed: u64,
    /// Normalized difference field of the most separated pair, reported
    /// only when that pair differs by more than `10 * tol`.
    pub xi: Option<ScalarField>,
}

/// Solves from `k_perturbations` randomly displaced ansatz starts and
/// compares the converged solutions pairwise in sup norm.
///
/// Each start displaces every peak by `magnitude * eps` in a uniformly
/// random direction drawn from a seeded generator, so runs reproduce. A
/// spread below the Newton tolerance is the numerical signature of a
/// locally unique solution.
pub fn uniqueness_probe(
    grid: Grid2D,
    spec: &PotentialSpec,
    profiles: &[Arc<RadialProfile>],
    eps: f64,
    p: f64,
    k_perturbations: usize,
    magnitude: f64,
    seed: u64,
    prm: &NewtonParams,
) -> Result<UniquenessProbe> {
    spec.validate()?;
    if profiles.len() != spec.wells.len() {
        return Err(validation!(
            "{} profiles for {} wells",
            profiles.len(),
            spec.wells.len()
        ));
    }
    if !(magnitude.is_finite() && magnitude >= 0.0) {
        return Err(validation!("perturbation magnitude must be nonnegative"));
    }
    let delta = default_delta(spec, grid);
    if magnitude * eps > delta {
        return Err(validation!(
            "displacement {} exceeds the admissible radius {delta}",
            magnitude * eps
        ));
    }

    let centers: Vec<[f64; 2]> = spec.wells.iter().map(|w| w.center).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(k_perturbations);
    let mut perturbations = Vec::with_capacity(k_perturbations);
    for _ in 0..k_perturbations {
        let mut dys = Vec::with_capacity(centers.len());
        let mut y = Vec::with_capacity(centers.len());
        for c in &centers {
            let theta: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
            let dy = [magnitude * eps * theta.cos(), magnitude * eps * theta.sin()];
            dys.push(dy);
            y.push([c[0] + dy[0], c[1] + dy[1]]);
        }
        let u0 = build_ansatz(grid, profiles, &y, eps)?;
        reports.push(newton_solve(&u0, spec, eps, p, prm)?);
        perturbations.push(dys);
    }

    let excluded: Vec<usize> = reports
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.converged)
        .map(|(i, _)| i)
        .collect();
    for i in &excluded {
        log::warn!("uniqueness start {i} did not converge; excluded from comparison");
    }
    let kept: Vec<usize> = (0..reports.len()).filter(|i| !excluded.contains(i)).collect();

    let mut max_pairwise_sup = None;
    let mut worst: Option<(usize, usize)> = None;
    for (ii, &i) in kept.iter().enumerate() {
        for &j in &kept[ii + 1..] {
            let mut diff = reports[i].u.clone();
            diff.add_scaled(-1.0, &reports[j].u);
            let d = diff.sup_norm();
            if max_pairwise_sup.is_none_or(|m| d > m) {
                max_pairwise_sup = Some(d);
                worst = Some((i, j));
            }
        }
    }
    let xi = match (max_pairwise_sup, worst) {
        (Some(d), Some((i, j))) if d > 10.0 * prm.tol => {
            let mut diff = reports[i].u.clone();
            diff.add_scaled(-1.0, &reports[j].u);
            diff.scale(1.0 / d);
            Some(diff)
        }
        _ => None,
    };

    Ok(UniquenessProbe {
        reports,
        perturbations,
        excluded,
        max_pairwise_sup,
        tol: prm.tol,
        seed,
        xi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Well;

    fn toy_spec() -> PotentialSpec {
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

    #[test]
    fn preconditioner_inverts_its_own_operator() {
        let grid = Grid2D::new(64, 2.0).unwrap();
        let eps = 0.3;
        let vbar = 1.7;
        let sym = precond_symbol(grid, eps, vbar);
        let f = ScalarField::from_fn(grid, |x1, x2| {
            (-2.0 * (x1 * x1 + x2 * x2)).exp() * (1.0 + x1)
        });
        // apply (-eps^2 lap + vbar) then its inverse
        let mut g = crate::spectral::laplacian(&f);
        g.scale(-eps * eps);
        g.add_scaled(vbar, &f);
        let back = apply_precond(&g, &sym);
        let mut diff = back.clone();
        diff.add_scaled(-1.0, &f);
        assert!(diff.sup_norm() < 1e-11 * f.sup_norm());
    }

    #[test]
    fn minres_solves_a_definite_jacobian_like_system() {
        // at u = 0 the Jacobian reduces to -eps^2 lap + V, a definite
        // operator that minres must solve to the requested tolerance
        let grid = Grid2D::new(64, 2.0).unwrap();
        let spec = toy_spec();
        let eps = 0.3;
        let u = ScalarField::zeros(grid);
        let lin = Linearization::new(&u, &spec, eps, 4.0);
        let b = ScalarField::from_fn(grid, |x1, x2| (-3.0 * (x1 * x1 + x2 * x2)).exp());
        let vbar = spec.eval_on_grid(grid).values().iter().sum::<f64>() / grid.len() as f64;
        let sym = precond_symbol(grid, eps, vbar);
        let (x, itn) = minres(&lin, &b, &sym, 1e-10, 400);
        let mut res = lin.apply(&x);
        res.add_scaled(-1.0, &b);
        assert!(
            res.l2_norm() < 1e-7 * b.l2_norm(),
            "residual {} after {} iterations",
            res.l2_norm() / b.l2_norm(),
            itn
        );
    }

    #[test]
    fn probe_rejects_oversized_displacement() {
        let grid = Grid2D::new(64, 1.6).unwrap();
        let spec = toy_spec();
        let profiles = profiles_for(&spec, 4.0).unwrap();
        let err = uniqueness_probe(
            grid,
            &spec,
            &profiles,
            0.1,
            4.0,
            1,
            1e6,
            7,
            &NewtonParams::default(),
        );
        assert!(err.is_err());
    }
}
