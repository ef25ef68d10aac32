//! The reduced energy functional, the Euler-Lagrange residual of the full
//! gauged system, and Jacobian-vector products.
//!
//! The functional is
//!
//! ```text
//! I(u) = 1/2 int eps^2 |grad u|^2 + V u^2 + (A1^2 + A2^2) u^2  -  1/p int |u|^p
//! ```
//!
//! with `(A1, A2)` induced by `u^2`.  Note `A0` carries no energy term, yet
//! the residual of the full system does contain it: varying the quadratic
//! gauge terms through the constraint regenerates exactly `A0 u`.  The
//! variational-consistency tests pin that identity, so the energy, the
//! residual, and the Jacobian here cannot drift apart silently.

use serde::{Deserialize, Serialize};

use crate::gauge::{compute_gauge, gauge_variation, GaugeFields};
use crate::grid::ScalarField;
use crate::potential::PotentialSpec;
use crate::spectral::{gradient, laplacian};

/// Term-by-term decomposition of the energy of one field.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    /// `1/2 int eps^2 |grad u|^2`
    pub kinetic: f64,
    /// `1/2 int V u^2`
    pub potential: f64,
    /// `-(1/p) int |u|^p`
    pub nonlinear: f64,
    /// `1/2 int A1^2 u^2`
    pub gauge1: f64,
    /// `1/2 int A2^2 u^2`
    pub gauge2: f64,
    /// Sum of the five parts, exactly.
    pub total: f64,
    pub eps: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

fn sign_power(u: f64, q: f64) -> f64 {
    u.signum() * u.abs().powf(q)
}

/// Energy of `u` given precomputed potential samples and gauge fields.
pub fn energy_with_fields(
    u: &ScalarField,
    v_field: &ScalarField,
    gauge: &GaugeFields,
    eps: f64,
    p: f64,
) -> EnergyBreakdown {
    let grid = u.grid();
    let h2 = grid.spacing() * grid.spacing();
    let (g1, g2) = gradient(u);
    let mut kin = 0.0;
    let mut pot = 0.0;
    let mut nl = 0.0;
    let mut ga1 = 0.0;
    let mut ga2 = 0.0;
    for j in 0..grid.len() {
        let uj = u.values()[j];
        let rho = uj * uj;
        kin += g1.values()[j].powi(2) + g2.values()[j].powi(2);
        pot += v_field.values()[j] * rho;
        nl += uj.abs().powf(p);
        ga1 += gauge.a1.values()[j].powi(2) * rho;
        ga2 += gauge.a2.values()[j].powi(2) * rho;
    }
    let kinetic = 0.5 * eps * eps * h2 * kin;
    let potential = 0.5 * h2 * pot;
    let nonlinear = -h2 * nl / p;
    let gauge1 = 0.5 * h2 * ga1;
    let gauge2 = 0.5 * h2 * ga2;
    EnergyBreakdown {
        kinetic,
        potential,
        nonlinear,
        gauge1,
        gauge2,
        total: kinetic + potential + nonlinear + gauge1 + gauge2,
        eps,
        n: grid.n(),
        l: grid.half_extent(),
    }
}

/// Energy of `u` in the potential `spec` at parameter `eps`.
pub fn energy(u: &ScalarField, spec: &PotentialSpec, eps: f64, p: f64) -> EnergyBreakdown {
    let v_field = spec.eval_on_grid(u.grid());
    let gauge = compute_gauge(u);
    energy_with_fields(u, &v_field, &gauge, eps, p)
}

/// Euler-Lagrange residual with precomputed potential and gauge fields:
/// `F(u) = -eps^2 lap u + V u + (A0 + A1^2 + A2^2) u - |u|^{p-2} u`.
pub fn residual_with_fields(
    u: &ScalarField,
    v_field: &ScalarField,
    gauge: &GaugeFields,
    eps: f64,
    p: f64,
) -> ScalarField {
    let mut out = laplacian(u);
    out.scale(-eps * eps);
    for j in 0..u.grid().len() {
        let uj = u.values()[j];
        let coeff = v_field.values()[j]
            + gauge.a0.values()[j]
            + gauge.a1.values()[j].powi(2)
            + gauge.a2.values()[j].powi(2);
        out.values_mut()[j] += coeff * uj - sign_power(uj, p - 1.0);
    }
    out
}

/// Euler-Lagrange residual of the full system at `u`.
pub fn residual(u: &ScalarField, spec: &PotentialSpec, eps: f64, p: f64) -> ScalarField {
    let v_field = spec.eval_on_grid(u.grid());
    let gauge = compute_gauge(u);
    residual_with_fields(u, &v_field, &gauge, eps, p)
}

/// The linearization of the residual at a fixed `u`, set up once and applied
/// many times inside Krylov iterations.
pub struct Linearization {
    u: ScalarField,
    gauge: GaugeFields,
    /// `V + A0 + A1^2 + A2^2 - (p-1)|u|^{p-2}` at each node.
    local_coeff: Vec<f64>,
    eps: f64,
}

impl Linearization {
    pub fn from_fields(
        u: ScalarField,
        v_field: &ScalarField,
        gauge: GaugeFields,
        eps: f64,
        p: f64,
    ) -> Self {
        let local_coeff = (0..u.grid().len())
            .map(|j| {
                let uj = u.values()[j];
                v_field.values()[j]
                    + gauge.a0.values()[j]
                    + gauge.a1.values()[j].powi(2)
                    + gauge.a2.values()[j].powi(2)
                    - (p - 1.0) * uj.abs().powf(p - 2.0)
            })
            .collect();
        Linearization {
            u,
            gauge,
            local_coeff,
            eps,
        }
    }

    pub fn new(u: &ScalarField, spec: &PotentialSpec, eps: f64, p: f64) -> Self {
        let v_field = spec.eval_on_grid(u.grid());
        let gauge = compute_gauge(u);
        Self::from_fields(u.clone(), &v_field, gauge, eps, p)
    }

    /// `DF(u) v`, including the nonlocal variation of the gauge fields.
    pub fn apply(&self, v: &ScalarField) -> ScalarField {
        let (da0, da1, da2) = gauge_variation(&self.u, v, &self.gauge);
        let mut out = laplacian(v);
        out.scale(-self.eps * self.eps);
        for j in 0..v.grid().len() {
            let uj = self.u.values()[j];
            out.values_mut()[j] += self.local_coeff[j] * v.values()[j]
                + uj
                    * (da0.values()[j]
                        + 2.0 * self.gauge.a1.values()[j] * da1.values()[j]
                        + 2.0 * self.gauge.a2.values()[j] * da2.values()[j]);
        }
        out
    }
}

/// `DF(u) v` as a one-shot call; builds the linearization internally.
pub fn apply_jacobian(
    u: &ScalarField,
    v: &ScalarField,
    spec: &PotentialSpec,
    eps: f64,
    p: f64,
) -> ScalarField {
    Linearization::new(u, spec, eps, p).apply(v)
}

/// The eps-weighted energy norm `sqrt(int eps^2 |grad u|^2 + V u^2)`, the
/// natural scale for remainders of concentrating solutions.
pub fn norm_eps(u: &ScalarField, spec: &PotentialSpec, eps: f64) -> f64 {
    let grid = u.grid();
    let h2 = grid.spacing() * grid.spacing();
    let (g1, g2) = gradient(u);
    let mut acc = 0.0;
    for j in 0..grid.len() {
        let x1 = grid.coord(j % grid.n());
        let x2 = grid.coord(j / grid.n());
        acc += eps * eps * (g1.values()[j].powi(2) + g2.values()[j].powi(2))
            + spec.eval(x1, x2) * u.values()[j].powi(2);
    }
    (h2 * acc).sqrt()
}
