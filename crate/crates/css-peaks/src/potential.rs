//! Multi-well trapping potentials.
//!
//! A potential is a flat background `v_inf` carrying finitely many local
//! wells.  Each well contributes, inside a disc of radius `eta` around its
//! center `a`, the anisotropic profile
//!
//! ```text
//! P(x) = v_at_a + b1 |x1 - a1|^m + b2 |x2 - a2|^m
//! ```
//!
//! blended into the background by a quintic smoothstep in the radius, so `V`
//! is C^2 everywhere, equals `P` on the inner half-disc `r <= eta/2`, and
//! equals `v_inf` outside `r >= eta`.  Wells must be separated enough that
//! their blend regions never overlap.

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::grid::{Grid2D, ScalarField};

/// One local well of an anisotropic power profile.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Well {
    /// Well center `a`.
    pub center: [f64; 2],
    /// Potential value at the center; the depth of the well.
    pub v_at_a: f64,
    /// Anisotropy coefficients of the two coordinate directions.
    pub b: [f64; 2],
    /// Power of the profile; at least 2 so the gradient is Lipschitz.
    pub m: f64,
    /// Radius of the blend region around the center.
    pub eta: f64,
}

fn default_theta() -> f64 {
    1.0
}

/// A background level plus a collection of non-overlapping wells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub wells: Vec<Well>,
    /// Background value away from every well.
    pub v_inf: f64,
    /// Concentration exponent selector, in `(0, 1]`.
    #[serde(default = "default_theta")]
    pub theta: f64,
}

/// Quintic smoothstep blend: `s = 1` on `r <= eta/2`, `s = 0` on `r >= eta`.
/// Returns `(s, ds/dr)`.
fn blend(r: f64, eta: f64) -> (f64, f64) {
    let w = ((r - eta / 2.0) / (eta / 2.0)).clamp(0.0, 1.0);
    let s = 1.0 - (10.0 * w.powi(3) - 15.0 * w.powi(4) + 6.0 * w.powi(5));
    let sp = -(30.0 * w.powi(2) - 60.0 * w.powi(3) + 30.0 * w.powi(4)) * (2.0 / eta);
    (s, sp)
}

impl PotentialSpec {
    /// Check all structural constraints.  Every other method assumes these
    /// hold, so run this once after deserializing a config.
    pub fn validate(&self) -> Result<()> {
        if self.wells.is_empty() {
            return Err(validation!("potential needs at least one well"));
        }
        if !(self.v_inf.is_finite() && self.v_inf > 0.0) {
            return Err(validation!("v_inf must be positive, got {}", self.v_inf));
        }
        if !(self.theta.is_finite() && self.theta > 0.0 && self.theta <= 1.0) {
            return Err(validation!("theta must lie in (0, 1], got {}", self.theta));
        }
        for (i, w) in self.wells.iter().enumerate() {
            if !(w.center[0].is_finite() && w.center[1].is_finite()) {
                return Err(validation!("well {i} center is not finite"));
            }
            if !(w.v_at_a.is_finite() && w.v_at_a > 0.0) {
                return Err(validation!("well {i}: v_at_a must be positive, got {}", w.v_at_a));
            }
            if !(w.b[0].is_finite() && w.b[1].is_finite() && w.b[0] >= 0.0 && w.b[1] >= 0.0) {
                return Err(validation!("well {i}: coefficients b must be nonnegative"));
            }
            if !(w.m.is_finite() && w.m >= 2.0) {
                return Err(validation!("well {i}: power m must be at least 2, got {}", w.m));
            }
            if !(w.eta.is_finite() && w.eta > 0.0) {
                return Err(validation!("well {i}: eta must be positive, got {}", w.eta));
            }
            // sup of the profile over the blend disc, so the well never pokes
            // above the background (conservative: |d1|, |d2| <= eta there)
            let sup = w.v_at_a + (w.b[0] + w.b[1]) * w.eta.powf(w.m);
            if sup > self.v_inf {
                return Err(validation!(
                    "well {i} profile can exceed v_inf inside its blend disc \
                     ({sup} > {}); shrink eta or the coefficients",
                    self.v_inf
                ));
            }
        }
        for i in 0..self.wells.len() {
            for j in (i + 1)..self.wells.len() {
                let a = self.wells[i].center;
                let c = self.wells[j].center;
                let d = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
                let lim = 0.5 * d;
                if self.wells[i].eta >= lim || self.wells[j].eta >= lim {
                    return Err(validation!(
                        "wells {i} and {j} are {d} apart; every eta must stay \
                         below half that distance"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Pointwise value `V(x)`.
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut v = self.v_inf;
        for w in &self.wells {
            let d1 = x1 - w.center[0];
            let d2 = x2 - w.center[1];
            let r = (d1 * d1 + d2 * d2).sqrt();
            if r >= w.eta {
                continue;
            }
            let (s, _) = blend(r, w.eta);
            let prof = w.v_at_a + w.b[0] * d1.abs().powf(w.m) + w.b[1] * d2.abs().powf(w.m);
            v += s * (prof - self.v_inf);
        }
        v
    }

    /// Pointwise gradient of `V`.
    pub fn grad(&self, x1: f64, x2: f64) -> [f64; 2] {
        let mut g = [0.0, 0.0];
        for w in &self.wells {
            let d1 = x1 - w.center[0];
            let d2 = x2 - w.center[1];
            let r = (d1 * d1 + d2 * d2).sqrt();
            if r >= w.eta {
                continue;
            }
            let (s, sp) = blend(r, w.eta);
            let prof = w.v_at_a + w.b[0] * d1.abs().powf(w.m) + w.b[1] * d2.abs().powf(w.m);
            let rsafe = r.max(1e-300);
            let pg1 = w.m * w.b[0] * d1.abs().powf(w.m - 1.0) * d1.signum();
            let pg2 = w.m * w.b[1] * d2.abs().powf(w.m - 1.0) * d2.signum();
            g[0] += sp * (d1 / rsafe) * (prof - self.v_inf) + s * pg1;
            g[1] += sp * (d2 / rsafe) * (prof - self.v_inf) + s * pg2;
        }
        g
    }

    /// Sample `V` at every grid node.
    pub fn eval_on_grid(&self, grid: Grid2D) -> ScalarField {
        ScalarField::from_fn(grid, |x1, x2| self.eval(x1, x2))
    }

    /// Smallest pairwise distance between well centers; infinite for a
    /// single well.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.wells.len() {
            for j in (i + 1)..self.wells.len() {
                let a = self.wells[i].center;
                let c = self.wells[j].center;
                let d = ((a[0] - c[0]).powi(2) + (a[1] - c[1]).powi(2)).sqrt();
                best = best.min(d);
            }
        }
        best
    }
}
