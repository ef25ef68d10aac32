//! Peak extraction and the reduced problem over peak locations.
//!
//! The multi-peak ansatz turns the PDE into a finite-dimensional outer
//! problem: place one rescaled profile per well and minimize the energy
//! over the peak positions `Y = (y^1, ..., y^k)` restricted to the product
//! of closed balls `D_delta = B_delta(a^1) x ... x B_delta(a^k)` around the
//! well centers. This module provides the sub-cell peak fitter used to read
//! positions back off a gridded field, the reduced energy `Y -> I(W_Y)`,
//! and a projected Nelder-Mead minimizer over `D_delta`.

use std::sync::Arc;

use crate::energy::energy;
use crate::error::{validation, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::potential::PotentialSpec;
use crate::radial::{build_ansatz, RadialProfile};

/// A local maximum of a gridded field, refined to sub-cell accuracy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeakFit {
    /// Fitted position `(x1, x2)`.
    pub point: [f64; 2],
    /// Set when the three-point quadratic fit was degenerate (flat plateau)
    /// and the position fell back to the cell center along that axis.
    pub low_confidence: bool,
}

/// Local maxima of `u` above half its global maximum.
///
/// See [`peak_locations_above`] for the detection rule.
pub fn peak_locations(u: &ScalarField) -> Vec<PeakFit> {
    peak_locations_above(u, 0.5)
}

/// Local maxima of `u` above `frac * max(u)`, refined by a separable
/// three-point quadratic fit.
///
/// A node counts as a maximum when it is strictly larger than its four
/// already-scanned neighbors and at least as large as the four not yet
/// scanned; exact plateaus therefore report exactly one node. Boundary
/// nodes are never candidates. The quadratic refinement solves the 1D
/// parabola through each axis triple; a vanishing curvature leaves the
/// offset at zero and marks the fit low-confidence.
pub fn peak_locations_above(u: &ScalarField, frac: f64) -> Vec<PeakFit> {
    let grid = u.grid();
    let n = grid.n();
    let h = grid.spacing();
    let umax = u.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let thr = frac * umax;
    let mut out = Vec::new();
    for i2 in 1..n - 1 {
        for i1 in 1..n - 1 {
            let c = u.at(i1, i2);
            if c <= thr {
                continue;
            }
            let before = c > u.at(i1 - 1, i2 - 1)
                && c > u.at(i1, i2 - 1)
                && c > u.at(i1 + 1, i2 - 1)
                && c > u.at(i1 - 1, i2);
            if !before {
                continue;
            }
            let after = c >= u.at(i1 + 1, i2)
                && c >= u.at(i1 - 1, i2 + 1)
                && c >= u.at(i1, i2 + 1)
                && c >= u.at(i1 + 1, i2 + 1);
            if !after {
                continue;
            }
            let (d1, flat1) = parabola_offset(u.at(i1 - 1, i2), c, u.at(i1 + 1, i2));
            let (d2, flat2) = parabola_offset(u.at(i1, i2 - 1), c, u.at(i1, i2 + 1));
            out.push(PeakFit {
                point: [grid.coord(i1) + d1 * h, grid.coord(i2) + d2 * h],
                low_confidence: flat1 || flat2,
            });
        }
    }
    out
}

/// Vertex offset of the parabola through `(-1, ul), (0, uc), (1, ur)`,
/// in cell units, plus a flatness flag when the curvature underflows.
fn parabola_offset(ul: f64, uc: f64, ur: f64) -> (f64, bool) {
    let denom = ul - 2.0 * uc + ur;
    if denom.abs() <= 1e-12 * uc.abs().max(f64::MIN_POSITIVE) {
        return (0.0, true);
    }
    (0.5 * (ul - ur) / denom, false)
}

/// For each center, the nearest fitted peak. Errors when `peaks` is empty
/// so callers cannot silently match against nothing.
pub fn match_to_wells(peaks: &[PeakFit], centers: &[[f64; 2]]) -> Result<Vec<PeakFit>> {
    if peaks.is_empty() {
        return Err(validation!("no peaks to match against {} centers", centers.len()));
    }
    Ok(centers
        .iter()
        .map(|c| {
            *peaks
                .iter()
                .min_by(|a, b| {
                    let da = dist2(a.point, *c);
                    let db = dist2(b.point, *c);
                    da.partial_cmp(&db).expect("finite peak distances")
                })
                .expect("peaks nonempty")
        })
        .collect())
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// An admissible peak configuration: one location per well, each inside the
/// closed ball of radius `delta` around its well center.
#[derive(Clone, Debug)]
pub struct PeakConfig {
    /// Peak locations, one per well, in well order.
    pub y: Vec<[f64; 2]>,
    pub eps: f64,
    /// Radius of the admissible ball around each well center.
    pub delta: f64,
    /// False when the minimizer hit its evaluation cap first.
    pub converged: bool,
    /// Set when the energy varied by less than `1e-12 * eps^2` across the
    /// final simplex: the landscape is flat at solver resolution and the
    /// reported minimizer is only defined up to that flatness.
    pub flat: bool,
}

impl PeakConfig {
    /// Checks the admissibility constraints against the wells of `spec`.
    pub fn validate(&self, spec: &PotentialSpec) -> Result<()> {
        spec.validate()?;
        if self.y.len() != spec.wells.len() {
            return Err(validation!(
                "{} peak locations for {} wells",
                self.y.len(),
                spec.wells.len()
            ));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(validation!("eps must be positive, got {}", self.eps));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(validation!("delta must be positive, got {}", self.delta));
        }
        let sep = spec.min_separation();
        if self.delta >= sep / 4.0 {
            return Err(validation!(
                "delta = {} must stay below a quarter of the well separation {sep}",
                self.delta
            ));
        }
        for (i, (yi, w)) in self.y.iter().zip(&spec.wells).enumerate() {
            let d = dist2(*yi, w.center).sqrt();
            // closed ball, so allow a hair of roundoff on the boundary
            if d > self.delta * (1.0 + 1e-12) {
                return Err(validation!(
                    "peak {i} is {d} from its well center, outside the delta = {} ball",
                    self.delta
                ));
            }
        }
        Ok(())
    }
}

/// The largest admissible ball radius for this potential on this grid:
/// a quarter of the minimal well separation, capped so every ball stays
/// inside the ansatz margin of the domain.
pub fn default_delta(spec: &PotentialSpec, grid: Grid2D) -> f64 {
    let margin = 0.75 * grid.half_extent();
    let room = spec
        .wells
        .iter()
        .map(|w| margin - w.center[0].abs().max(w.center[1].abs()))
        .fold(f64::INFINITY, f64::min);
    (spec.min_separation() / 4.0).min(room) * (1.0 - 1e-9)
}

/// The reduced energy `j(Y) = I(W_Y)`: total energy of the multi-peak
/// ansatz at peak locations `Y`.
///
/// The correction layer that a full solve adds on top of `W_Y` shifts the
/// energy at higher order in `eps`, so the outer minimization works on the
/// bare ansatz.
pub fn reduced_energy(
    grid: Grid2D,
    spec: &PotentialSpec,
    profiles: &[Arc<RadialProfile>],
    y: &[[f64; 2]],
    eps: f64,
    p: f64,
    delta: f64,
) -> Result<f64> {
    let cfg = PeakConfig {
        y: y.to_vec(),
        eps,
        delta,
        converged: true,
        flat: false,
    };
    cfg.validate(spec)?;
    let w = build_ansatz(grid, profiles, y, eps)?;
    Ok(energy(&w, spec, eps, p).total)
}

/// Outcome of [`minimize_peaks`].
#[derive(Clone, Debug)]
pub struct ReducedMinimization {
    pub config: PeakConfig,
    /// Reduced energy at the reported minimizer.
    pub energy: f64,
    pub evaluations: usize,
}

/// Minimizes the reduced energy over `D_delta` by Nelder-Mead with
/// projection: every trial point is radially clamped, peak by peak, onto
/// the closed ball around its well center before evaluation.
///
/// Terminates when the simplex diameter falls below `1e-3 * eps`; hitting
/// the evaluation cap instead returns the best vertex flagged
/// non-converged.
pub fn minimize_peaks(
    grid: Grid2D,
    spec: &PotentialSpec,
    profiles: &[Arc<RadialProfile>],
    y0: &[[f64; 2]],
    eps: f64,
    p: f64,
    delta: f64,
) -> Result<ReducedMinimization> {
    let centers: Vec<[f64; 2]> = spec.wells.iter().map(|w| w.center).collect();
    let k = centers.len();
    let dim = 2 * k;
    let project = |x: &mut Vec<f64>| {
        for (i, c) in centers.iter().enumerate() {
            let dx = x[2 * i] - c[0];
            let dy = x[2 * i + 1] - c[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d > delta {
                let s = delta / d;
                x[2 * i] = c[0] + dx * s;
                x[2 * i + 1] = c[1] + dy * s;
            }
        }
    };
    let unflatten = |x: &[f64]| -> Vec<[f64; 2]> {
        x.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
    };

    let mut evals = 0usize;
    let cap = 60 * dim + 60;
    let eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        reduced_energy(grid, spec, profiles, &unflatten(x), eps, p, delta)
    };

    let mut x0: Vec<f64> = y0.iter().flat_map(|y| [y[0], y[1]]).collect();
    if x0.len() != dim {
        return Err(validation!("{} start locations for {k} wells", y0.len()));
    }
    project(&mut x0);

    // initial simplex: coordinate steps small enough to stay meaningful
    // inside the ball but large enough to see the eps^2-scale curvature
    let step = (0.3 * eps).min(0.5 * delta);
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let f0 = eval(&x0, &mut evals)?;
    simplex.push((x0.clone(), f0));
    for j in 0..dim {
        let mut xj = x0.clone();
        xj[j] += step;
        project(&mut xj);
        let fj = eval(&xj, &mut evals)?;
        simplex.push((xj, fj));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    while evals < cap {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite energies"));
        if simplex_diameter(&simplex) < 1e-3 * eps {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let mut xr: Vec<f64> = (0..dim)
            .map(|j| centroid[j] + alpha * (centroid[j] - worst.0[j]))
            .collect();
        project(&mut xr);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let mut xe: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + gamma * (xr[j] - centroid[j]))
                .collect();
            project(&mut xe);
            let fe = eval(&xe, &mut evals)?;
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let towards = if fr < worst.1 { &xr } else { &worst.0 };
            let mut xc: Vec<f64> = (0..dim)
                .map(|j| centroid[j] + rho * (towards[j] - centroid[j]))
                .collect();
            project(&mut xc);
            let fc = eval(&xc, &mut evals)?;
            if fc < fr.min(worst.1) {
                simplex[dim] = (xc, fc);
            } else {
                // shrink toward the best vertex
                let best = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    for j in 0..dim {
                        v.0[j] = best[j] + sigma * (v.0[j] - best[j]);
                    }
                    project(&mut v.0);
                    v.1 = eval(&v.0, &mut evals)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite energies"));
    let spread = simplex[dim].1 - simplex[0].1;
    let best = simplex[0].clone();
    Ok(ReducedMinimization {
        config: PeakConfig {
            y: unflatten(&best.0),
            eps,
            delta,
            converged,
            flat: spread.abs() < 1e-12 * eps * eps,
        },
        energy: best.1,
        evaluations: evals,
    })
}

fn simplex_diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let mut d2max = 0.0f64;
    for i in 0..simplex.len() {
        for j in i + 1..simplex.len() {
            let d2 = simplex[i]
                .0
                .iter()
                .zip(&simplex[j].0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            d2max = d2max.max(d2);
        }
    }
    d2max.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_bump(grid: Grid2D, y: [f64; 2], s: f64) -> ScalarField {
        ScalarField::from_fn(grid, |x1, x2| {
            (-((x1 - y[0]).powi(2) + (x2 - y[1]).powi(2)) / (2.0 * s * s)).exp()
        })
    }

    #[test]
    fn gaussian_peak_is_fit_below_a_tenth_cell() {
        let grid = Grid2D::new(128, 2.0).unwrap();
        let h = grid.spacing();
        let y = [0.31 * h + 0.25, -0.44 * h - 0.5];
        let u = one_bump(grid, y, 0.2);
        let peaks = peak_locations(&u);
        assert_eq!(peaks.len(), 1);
        assert!(!peaks[0].low_confidence);
        let e = ((peaks[0].point[0] - y[0]).powi(2) + (peaks[0].point[1] - y[1]).powi(2)).sqrt();
        assert!(e < h / 10.0, "fit error {e} vs cell {h}");
    }

    #[test]
    fn plateau_tie_break_keeps_one_peak() {
        let grid = Grid2D::new(64, 1.0).unwrap();
        let h = grid.spacing();
        let mut u = ScalarField::zeros(grid);
        // 2x2 flat top; the scan-order tie break keeps exactly one node and
        // the parabola fit lands on the block center
        for (i1, i2) in [(30usize, 30usize), (31, 30), (30, 31), (31, 31)] {
            u.values_mut()[grid.index(i1, i2)] = 1.0;
        }
        let peaks = peak_locations(&u);
        assert_eq!(peaks.len(), 1);
        assert_eq!(
            peaks[0].point,
            [grid.coord(30) + 0.5 * h, grid.coord(30) + 0.5 * h]
        );
    }

    #[test]
    fn degenerate_curvature_reports_cell_center_low_confidence() {
        let grid = Grid2D::new(64, 1.0).unwrap();
        // curvature along x1 far below fit resolution: a ridge that is a
        // genuine maximum but flat at working precision
        let a = 3e-13;
        let u = ScalarField::from_fn(grid, |x1, x2| {
            (1.0 + a * (std::f64::consts::PI * x1).cos()) * (-x2 * x2 / 0.08).exp()
        });
        let peaks = peak_locations(&u);
        assert_eq!(peaks.len(), 1);
        assert!(peaks[0].low_confidence);
        assert_eq!(peaks[0].point[0], grid.coord(32));
        assert!(peaks[0].point[1].abs() < grid.spacing() / 10.0);
    }

    #[test]
    fn matching_orders_peaks_by_well() {
        let grid = Grid2D::new(128, 2.0).unwrap();
        let mut u = one_bump(grid, [0.8, 0.1], 0.15);
        let other = one_bump(grid, [-0.7, -0.2], 0.15);
        u.add_scaled(0.9, &other);
        let peaks = peak_locations(&u);
        assert_eq!(peaks.len(), 2);
        let m = match_to_wells(&peaks, &[[-0.7, -0.2], [0.8, 0.1]]).unwrap();
        assert!(m[0].point[0] < 0.0 && m[1].point[0] > 0.0);
        assert!(match_to_wells(&[], &[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn peak_config_validation_rejects_escaped_peaks() {
        let spec = PotentialSpec {
            wells: vec![
                crate::potential::Well {
                    center: [-0.6, 0.0],
                    v_at_a: 1.0,
                    b: [1.0, 1.0],
                    m: 2.0,
                    eta: 0.4,
                },
                crate::potential::Well {
                    center: [0.6, 0.0],
                    v_at_a: 1.3,
                    b: [1.2, 0.8],
                    m: 2.0,
                    eta: 0.4,
                },
            ],
            v_inf: 2.0,
            theta: 1.0,
        };
        let ok = PeakConfig {
            y: vec![[-0.55, 0.02], [0.6, -0.01]],
            eps: 0.1,
            delta: 0.2,
            converged: true,
            flat: false,
        };
        ok.validate(&spec).unwrap();
        let escaped = PeakConfig {
            y: vec![[-0.3, 0.0], [0.6, 0.0]],
            eps: 0.1,
            delta: 0.2,
            converged: true,
            flat: false,
        };
        assert!(escaped.validate(&spec).is_err());
        let wide = PeakConfig {
            delta: 0.31,
            ..ok.clone()
        };
        assert!(wide.validate(&spec).is_err(), "delta must stay below sep/4");
    }
}
