//! Gauge fields induced by a charge density on the doubled grid.
//!
//! The connection components solve the planar constraint system
//!
//! ```text
//! curl A = -rho / 2,   div A = 0,   grad A0 = (A2 rho, -A1 rho)
//! ```
//!
//! with `rho = u^2`, and decay at infinity.  They are Riesz-type
//! convolutions against `K_i(x) = -x_i / (2 pi |x|^2)`:
//!
//! ```text
//! A1 = -(1/2) K2 * rho        A2 = +(1/2) K1 * rho
//! A0 = K2 * (A1 rho) - K1 * (A2 rho)
//! ```
//!
//! Periodic FFT convolution on the solve grid would wrap the slowly decaying
//! kernels around the torus; instead every convolution here runs on a grid
//! doubled in both directions, with the kernel sampled on `[-L, L)^2` and
//! the density zero-padded, which makes the discrete convolution linear
//! (free space) rather than circular.  Derivatives of the gauge fields are
//! taken spectrally on the doubled grid before restriction, so constraint
//! residuals measure the construction itself, not a second differentiation
//! scheme.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rustfft::num_complex::Complex;

use crate::error::{validation, Result};
use crate::grid::{Grid2D, ScalarField};
use crate::spectral::{derivative_wavenumbers, fft2, forward_two_real, inverse_two_real, to_complex};

struct PaddedKernels {
    k1h: Vec<Complex<f64>>,
    k2h: Vec<Complex<f64>>,
}

static KERNELS: LazyLock<Mutex<HashMap<(usize, u64), Arc<PaddedKernels>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Signed sample offset of a padded-grid index: `0..=n` map to themselves,
/// the upper half wraps to negative offsets.
fn offset(idx: usize, n: usize) -> isize {
    if idx <= n {
        idx as isize
    } else {
        idx as isize - 2 * n as isize
    }
}

fn kernels_for(grid: Grid2D) -> Arc<PaddedKernels> {
    let key = (grid.n(), grid.spacing().to_bits());
    if let Some(hit) = KERNELS.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let n = grid.n();
    let m = 2 * n;
    let h = grid.spacing();
    let mut k1 = vec![0.0; m * m];
    let mut k2 = vec![0.0; m * m];
    for i2 in 0..m {
        let d2 = offset(i2, n) as f64 * h;
        for i1 in 0..m {
            let d1 = offset(i1, n) as f64 * h;
            // the origin sample and the ambiguous +-L line carry no weight
            if (i1 == 0 && i2 == 0) || i1 == n || i2 == n {
                continue;
            }
            let r2 = d1 * d1 + d2 * d2;
            let c = -1.0 / (std::f64::consts::TAU * r2);
            k1[i2 * m + i1] = c * d1;
            k2[i2 * m + i1] = c * d2;
        }
    }
    let (k1h, k2h) = forward_two_real(&k1, &k2, m);
    let entry = Arc::new(PaddedKernels { k1h, k2h });
    KERNELS
        .lock()
        .unwrap()
        .entry(key)
        .or_insert_with(|| entry.clone());
    entry
}

/// Zero-pad an `n x n` field into the doubled grid.
fn pad(vals: &[f64], n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for i2 in 0..n {
        out[i2 * m..i2 * m + n].copy_from_slice(&vals[i2 * n..(i2 + 1) * n]);
    }
    out
}

/// Restrict a doubled-grid field back to the original corner.
fn restrict(vals: &[f64], n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut out = vec![0.0; n * n];
    for i2 in 0..n {
        out[i2 * n..(i2 + 1) * n].copy_from_slice(&vals[i2 * m..i2 * m + n]);
    }
    out
}

/// Spectral derivatives of the gauge fields, restricted to the solve grid.
#[derive(Clone, Debug)]
pub struct GaugeDerivs {
    pub curl: ScalarField,
    pub div: ScalarField,
    pub a0_x1: ScalarField,
    pub a0_x2: ScalarField,
}

/// The induced connection `(A0, A1, A2)` of a charge density.
#[derive(Clone, Debug)]
pub struct GaugeFields {
    pub a0: ScalarField,
    pub a1: ScalarField,
    pub a2: ScalarField,
    derivs: Option<GaugeDerivs>,
}

/// Relative residuals of the four gauge constraints.
#[derive(Clone, Copy, Debug)]
pub struct ConstraintResiduals {
    /// `curl A + rho/2`, against `|rho/2|`.
    pub curl: f64,
    /// `div A`, against `|A|`.
    pub div: f64,
    /// `d1 A0 - A2 rho`, against `|A2 rho|`.
    pub a0_x1: f64,
    /// `d2 A0 + A1 rho`, against `|A1 rho|`.
    pub a0_x2: f64,
}

impl ConstraintResiduals {
    pub fn max(&self) -> f64 {
        self.curl.max(self.div).max(self.a0_x1).max(self.a0_x2)
    }
}

fn compute_impl(u: &ScalarField, with_derivs: bool) -> GaugeFields {
    let grid = u.grid();
    let n = grid.n();
    let m = 2 * n;
    let h = grid.spacing();
    let h2 = h * h;
    let kern = kernels_for(grid);

    let rho: Vec<f64> = u.values().iter().map(|v| v * v).collect();
    let mut rhoh = to_complex(&pad(&rho, n));
    fft2(&mut rhoh, m, false);

    let mut a1spec = Vec::with_capacity(m * m);
    let mut a2spec = Vec::with_capacity(m * m);
    for j in 0..m * m {
        a1spec.push(kern.k2h[j] * rhoh[j] * (-0.5 * h2));
        a2spec.push(kern.k1h[j] * rhoh[j] * (0.5 * h2));
    }
    drop(rhoh);
    let (a1pad, a2pad) = inverse_two_real(&a1spec, &a2spec, m);
    let a1 = restrict(&a1pad, n);
    let a2 = restrict(&a2pad, n);

    let b1: Vec<f64> = a1.iter().zip(&rho).map(|(a, r)| a * r).collect();
    let b2: Vec<f64> = a2.iter().zip(&rho).map(|(a, r)| a * r).collect();
    let (b1h, b2h) = forward_two_real(&pad(&b1, n), &pad(&b2, n), m);
    let mut a0spec = Vec::with_capacity(m * m);
    for j in 0..m * m {
        a0spec.push((kern.k2h[j] * b1h[j] - kern.k1h[j] * b2h[j]) * h2);
    }
    drop(b1h);
    drop(b2h);
    let mut a0pad = a0spec.clone();
    fft2(&mut a0pad, m, true);
    let a0: Vec<f64> = restrict(
        &a0pad.iter().map(|z| z.re).collect::<Vec<_>>(),
        n,
    );
    drop(a0pad);

    let derivs = if with_derivs {
        let dw = derivative_wavenumbers(m, h);
        let mut curl_spec = Vec::with_capacity(m * m);
        let mut div_spec = Vec::with_capacity(m * m);
        let mut grad_spec = Vec::with_capacity(m * m);
        for i2 in 0..m {
            let d2 = Complex::new(0.0, dw[i2]);
            for i1 in 0..m {
                let d1 = Complex::new(0.0, dw[i1]);
                let j = i2 * m + i1;
                curl_spec.push(d1 * a2spec[j] - d2 * a1spec[j]);
                div_spec.push(d1 * a1spec[j] + d2 * a2spec[j]);
                // both partials of A0 in one transform: real part carries
                // d1 A0, imaginary part d2 A0
                grad_spec.push(Complex::new(-dw[i2], dw[i1]) * a0spec[j]);
            }
        }
        let (curlpad, divpad) = inverse_two_real(&curl_spec, &div_spec, m);
        drop(curl_spec);
        drop(div_spec);
        fft2(&mut grad_spec, m, true);
        let mut a0x = vec![0.0; m * m];
        let mut a0y = vec![0.0; m * m];
        for (j, z) in grad_spec.iter().enumerate() {
            a0x[j] = z.re;
            a0y[j] = z.im;
        }
        Some(GaugeDerivs {
            curl: ScalarField::from_values(grid, restrict(&curlpad, n)).unwrap(),
            div: ScalarField::from_values(grid, restrict(&divpad, n)).unwrap(),
            a0_x1: ScalarField::from_values(grid, restrict(&a0x, n)).unwrap(),
            a0_x2: ScalarField::from_values(grid, restrict(&a0y, n)).unwrap(),
        })
    } else {
        None
    };

    GaugeFields {
        a0: ScalarField::from_values(grid, a0).unwrap(),
        a1: ScalarField::from_values(grid, a1).unwrap(),
        a2: ScalarField::from_values(grid, a2).unwrap(),
        derivs,
    }
}

/// Gauge fields of the density `u^2`, without derivative diagnostics.
pub fn compute_gauge(u: &ScalarField) -> GaugeFields {
    compute_impl(u, false)
}

/// Gauge fields plus their spectral derivatives for constraint checks and
/// boundary integrals.
pub fn compute_gauge_with_derivs(u: &ScalarField) -> GaugeFields {
    compute_impl(u, true)
}

impl GaugeFields {
    pub fn derivs(&self) -> Option<&GaugeDerivs> {
        self.derivs.as_ref()
    }

    /// Relative residuals of the constraint system for the density `u^2`.
    /// Requires fields built by [`compute_gauge_with_derivs`].
    pub fn constraint_residuals(&self, u: &ScalarField) -> Result<ConstraintResiduals> {
        let derivs = self
            .derivs
            .as_ref()
            .ok_or_else(|| validation!("constraint residuals need derivative fields"))?;
        let grid = u.grid();
        let h = grid.spacing();
        let l2 = |acc: f64| h * acc.sqrt();

        let mut n_curl = 0.0;
        let mut d_curl = 0.0;
        let mut n_div = 0.0;
        let mut d_div = 0.0;
        let mut n_x1 = 0.0;
        let mut d_x1 = 0.0;
        let mut n_x2 = 0.0;
        let mut d_x2 = 0.0;
        for j in 0..grid.len() {
            let rho = u.values()[j] * u.values()[j];
            let a1 = self.a1.values()[j];
            let a2 = self.a2.values()[j];
            let half = 0.5 * rho;
            n_curl += (derivs.curl.values()[j] + half).powi(2);
            d_curl += half * half;
            n_div += derivs.div.values()[j].powi(2);
            d_div += a1 * a1 + a2 * a2;
            n_x1 += (derivs.a0_x1.values()[j] - a2 * rho).powi(2);
            d_x1 += (a2 * rho).powi(2);
            n_x2 += (derivs.a0_x2.values()[j] + a1 * rho).powi(2);
            d_x2 += (a1 * rho).powi(2);
        }
        if d_curl == 0.0 || d_div == 0.0 || d_x1 == 0.0 || d_x2 == 0.0 {
            return Err(validation!(
                "constraint residuals are undefined for a vanishing density"
            ));
        }
        Ok(ConstraintResiduals {
            curl: l2(n_curl) / l2(d_curl),
            div: l2(n_div) / l2(d_div),
            a0_x1: l2(n_x1) / l2(d_x1),
            a0_x2: l2(n_x2) / l2(d_x2),
        })
    }
}

/// First variation of the gauge fields at `u` in direction `v`, i.e. the
/// derivative of `(A0, A1, A2)` along `rho = u^2 -> u^2 + 2uv t`.  Used by
/// the Jacobian of the full system.
pub fn gauge_variation(
    u: &ScalarField,
    v: &ScalarField,
    base: &GaugeFields,
) -> (ScalarField, ScalarField, ScalarField) {
    let grid = u.grid();
    let n = grid.n();
    let m = 2 * n;
    let h2 = grid.spacing() * grid.spacing();
    let kern = kernels_for(grid);

    let drho: Vec<f64> = u
        .values()
        .iter()
        .zip(v.values())
        .map(|(a, b)| 2.0 * a * b)
        .collect();
    let mut drhoh = to_complex(&pad(&drho, n));
    fft2(&mut drhoh, m, false);
    let mut da1spec = Vec::with_capacity(m * m);
    let mut da2spec = Vec::with_capacity(m * m);
    for j in 0..m * m {
        da1spec.push(kern.k2h[j] * drhoh[j] * (-0.5 * h2));
        da2spec.push(kern.k1h[j] * drhoh[j] * (0.5 * h2));
    }
    drop(drhoh);
    let (da1pad, da2pad) = inverse_two_real(&da1spec, &da2spec, m);
    drop(da1spec);
    drop(da2spec);
    let da1 = restrict(&da1pad, n);
    let da2 = restrict(&da2pad, n);

    // variation of A0 = K2 * (A1 rho) - K1 * (A2 rho) by the product rule
    let mut c1 = vec![0.0; n * n];
    let mut c2 = vec![0.0; n * n];
    for j in 0..n * n {
        let rho = u.values()[j] * u.values()[j];
        c1[j] = da1[j] * rho + base.a1.values()[j] * drho[j];
        c2[j] = da2[j] * rho + base.a2.values()[j] * drho[j];
    }
    let (c1h, c2h) = forward_two_real(&pad(&c1, n), &pad(&c2, n), m);
    let mut da0spec = Vec::with_capacity(m * m);
    for j in 0..m * m {
        da0spec.push((kern.k2h[j] * c1h[j] - kern.k1h[j] * c2h[j]) * h2);
    }
    fft2(&mut da0spec, m, true);
    let da0: Vec<f64> = restrict(
        &da0spec.iter().map(|z| z.re).collect::<Vec<_>>(),
        n,
    );

    (
        ScalarField::from_values(grid, da0).unwrap(),
        ScalarField::from_values(grid, da1).unwrap(),
        ScalarField::from_values(grid, da2).unwrap(),
    )
}
