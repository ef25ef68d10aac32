//! Local Pohozaev balance on balls and the gauge tangency identity.
//!
//! For a solution of the full system, the weighted volume integral of
//! `d_k V u^2` over a ball equals a signed sum of five boundary integrals:
//! an energy-flux term, a normal-derivative term, the nonlinear flux, a
//! gauge cross term and a gauge diagonal term. Checking that balance on
//! concrete balls is a solution-quality diagnostic that is independent of
//! the solver: it only sees the fields. The tangency residual measures the
//! identity `A_1 d_1 u + A_2 d_2 u = 0` that holds for radial profiles and
//! powers the balance's gauge bookkeeping.

use serde::Serialize;

use crate::error::{validation, Result};
use crate::gauge::GaugeFields;
use crate::grid::ScalarField;
use crate::potential::PotentialSpec;
use crate::spectral::gradient;

/// Outcome of [`pohozaev_check`] on one ball and coordinate.
#[derive(Clone, Debug, Serialize)]
pub struct PohozaevReport {
    pub center: [f64; 2],
    pub d: f64,
    pub k: usize,
    /// Volume side: `1/2 int_{B_d} d_k V u^2`.
    pub lhs: f64,
    /// The five boundary integrals: energy flux, normal derivative,
    /// nonlinear flux, gauge cross term, gauge diagonal term.
    pub rhs_terms: [f64; 5],
    /// Signed sum of `rhs_terms`.
    pub rhs: f64,
    pub abs_residual: f64,
    /// `abs_residual / (|lhs| + |rhs| + floor)`.
    pub rel_residual: f64,
    /// Largest boundary-term magnitude; the scale that a vanishing balance
    /// should be compared against.
    pub term_scale: f64,
}

const FLOOR: f64 = 1e-30;

/// Bilinear interpolation of a gridded field at off-grid points, clamped
/// to the boundary (nearest-edge extension).
fn bilinear(f: &ScalarField, pts: &[[f64; 2]]) -> Vec<f64> {
    let grid = f.grid();
    let n = grid.n();
    let h = grid.spacing();
    let l = grid.half_extent();
    let top = (n - 1) as f64;
    pts.iter()
        .map(|pt| {
            let fx = ((pt[0] + l) / h).clamp(0.0, top);
            let fy = ((pt[1] + l) / h).clamp(0.0, top);
            let i0 = fx.floor() as usize;
            let j0 = fy.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            let j1 = (j0 + 1).min(n - 1);
            let tx = fx - i0 as f64;
            let ty = fy - j0 as f64;
            let f00 = f.at(i0, j0);
            let f10 = f.at(i1, j0);
            let f01 = f.at(i0, j1);
            let f11 = f.at(i1, j1);
            (1.0 - ty) * ((1.0 - tx) * f00 + tx * f10) + ty * ((1.0 - tx) * f01 + tx * f11)
        })
        .collect()
}

/// Checks the local Pohozaev balance for coordinate `k` on the ball
/// `B_d(center)`.
///
/// The volume side uses a sharp indicator (cells whose center lies inside
/// the ball) with the analytic potential gradient; the boundary side uses
/// the trapezoid rule over `m_quad` equispaced circle points, sampling
/// `u`, its spectral gradient and the gauge fields by bilinear
/// interpolation and the potential exactly.
#[allow(clippy::too_many_arguments)]
pub fn pohozaev_check(
    u: &ScalarField,
    gauge: &GaugeFields,
    spec: &PotentialSpec,
    eps: f64,
    p: f64,
    center: [f64; 2],
    d: f64,
    k: usize,
    m_quad: usize,
) -> Result<PohozaevReport> {
    if k != 1 && k != 2 {
        return Err(validation!("coordinate index must be 1 or 2, got {k}"));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(validation!("ball radius must be positive, got {d}"));
    }
    if m_quad < 8 {
        return Err(validation!("need at least 8 quadrature points, got {m_quad}"));
    }
    let grid = u.grid();
    let h = grid.spacing();
    let l = grid.half_extent();
    // the boundary stencil needs a full cell of room inside the domain
    if center[0].abs() + d > l - 2.0 * h || center[1].abs() + d > l - 2.0 * h {
        return Err(validation!(
            "ball of radius {d} at ({}, {}) leaves the grid margin",
            center[0],
            center[1]
        ));
    }
    let sep = spec.min_separation();
    if d >= sep / 2.0 {
        return Err(validation!(
            "ball radius {d} must stay below half the well separation {sep}"
        ));
    }

    let n = grid.n();
    let mut lhs = 0.0;
    for i2 in 0..n {
        let x2 = grid.coord(i2);
        for i1 in 0..n {
            let x1 = grid.coord(i1);
            let dx = x1 - center[0];
            let dy = x2 - center[1];
            if dx * dx + dy * dy < d * d {
                let g = spec.grad(x1, x2);
                lhs += g[k - 1] * u.at(i1, i2).powi(2);
            }
        }
    }
    lhs *= 0.5 * h * h;

    let (ux, uy) = gradient(u);
    let pts: Vec<[f64; 2]> = (0..m_quad)
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / m_quad as f64;
            [center[0] + d * th.cos(), center[1] + d * th.sin()]
        })
        .collect();
    let ub = bilinear(u, &pts);
    let uxb = bilinear(&ux, &pts);
    let uyb = bilinear(&uy, &pts);
    let a0b = bilinear(&gauge.a0, &pts);
    let a1b = bilinear(&gauge.a1, &pts);
    let a2b = bilinear(&gauge.a2, &pts);
    let dsig = std::f64::consts::TAU * d / m_quad as f64;

    let mut t = [0.0f64; 5];
    for j in 0..m_quad {
        let th = std::f64::consts::TAU * j as f64 / m_quad as f64;
        let nu = [th.cos(), th.sin()];
        let nuk = nu[k - 1];
        let vb = spec.eval(pts[j][0], pts[j][1]);
        let gradsq = uxb[j] * uxb[j] + uyb[j] * uyb[j];
        let dnu = uxb[j] * nu[0] + uyb[j] * nu[1];
        let dk = if k == 1 { uxb[j] } else { uyb[j] };
        let ak = if k == 1 { a1b[j] } else { a2b[j] };
        t[0] += 0.5 * (eps * eps * gradsq + vb * ub[j] * ub[j]) * nuk;
        t[1] -= eps * eps * dnu * dk;
        t[2] -= ub[j].abs().powf(p) / p * nuk;
        t[3] -= (a1b[j] * nu[0] + a2b[j] * nu[1]) * ak * ub[j] * ub[j];
        t[4] += 0.5 * (a0b[j] + a1b[j] * a1b[j] + a2b[j] * a2b[j]) * ub[j] * ub[j] * nuk;
    }
    for term in &mut t {
        *term *= dsig;
    }
    let rhs = t.iter().sum::<f64>();
    let abs_residual = (lhs - rhs).abs();
    Ok(PohozaevReport {
        center,
        d,
        k,
        lhs,
        rhs_terms: t,
        rhs,
        abs_residual,
        rel_residual: abs_residual / (lhs.abs() + rhs.abs() + FLOOR),
        term_scale: t.iter().fold(0.0f64, |m, v| m.max(v.abs())),
    })
}

/// Relative size of `A_1 d_1 u + A_2 d_2 u`, normalized by the product of
/// the gauge and gradient norms. Near zero for radial data; order one for
/// generic fields.
pub fn tangency_residual(u: &ScalarField, gauge: &GaugeFields) -> f64 {
    let (ux, uy) = gradient(u);
    let grid = u.grid();
    let mut mix = ScalarField::zeros(grid);
    for j in 0..grid.len() {
        mix.values_mut()[j] =
            gauge.a1.values()[j] * ux.values()[j] + gauge.a2.values()[j] * uy.values()[j];
    }
    let anorm = (gauge.a1.l2_norm().powi(2) + gauge.a2.l2_norm().powi(2)).sqrt();
    let gnorm = (ux.l2_norm().powi(2) + uy.l2_norm().powi(2)).sqrt();
    mix.l2_norm() / (anorm * gnorm + FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn bilinear_reproduces_a_linear_function_exactly() {
        let grid = Grid2D::new(64, 2.0).unwrap();
        let f = ScalarField::from_fn(grid, |x1, x2| 0.3 + 1.7 * x1 - 0.4 * x2);
        let pts = [[0.123, -0.456], [-1.01, 0.77], [0.0, 0.0]];
        let vals = bilinear(&f, &pts);
        for (v, pt) in vals.iter().zip(&pts) {
            let exact = 0.3 + 1.7 * pt[0] - 0.4 * pt[1];
            assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        }
    }

    #[test]
    fn geometry_preconditions_are_enforced() {
        let grid = Grid2D::new(64, 1.0).unwrap();
        let u = ScalarField::zeros(grid);
        let gauge = crate::gauge::compute_gauge(&u);
        let spec = PotentialSpec {
            wells: vec![crate::potential::Well {
                center: [0.0, 0.0],
                v_at_a: 1.0,
                b: [1.0, 1.0],
                m: 2.0,
                eta: 0.4,
            }],
            v_inf: 2.0,
            theta: 1.0,
        };
        // ball poking out of the margin
        assert!(pohozaev_check(&u, &gauge, &spec, 0.1, 4.0, [0.8, 0.0], 0.3, 1, 720).is_err());
        // bad coordinate index
        assert!(pohozaev_check(&u, &gauge, &spec, 0.1, 4.0, [0.0, 0.0], 0.3, 3, 720).is_err());
        // fine
        assert!(pohozaev_check(&u, &gauge, &spec, 0.1, 4.0, [0.0, 0.0], 0.3, 1, 720).is_ok());
    }
}
