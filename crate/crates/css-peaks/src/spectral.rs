//! Fourier machinery: cached transform plans, 2-D FFTs, and the spectral
//! derivative operators used on decaying fields.
//!
//! Derivative multipliers zero the Nyquist mode (`ik` is not meaningful
//! there); the Laplacian keeps it, matching the usual `-|k|^2` symbol.  Pairs
//! of real transforms are packed into one complex transform where the call
//! sites allow it, which roughly halves the transform count in the gauge
//! pipeline.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, LazyLock, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::grid::ScalarField;

type Plan = Arc<dyn Fft<f64>>;

/// Plans are cached per transform size behind a lock; the transforms
/// themselves run lock-free on caller-owned buffers.
static PLANS: LazyLock<Mutex<HashMap<usize, (Plan, Plan)>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

fn plans_for(n: usize) -> (Plan, Plan) {
    let mut cache = PLANS.lock().unwrap();
    let entry = cache.entry(n).or_insert_with(|| {
        let mut planner = FftPlanner::new();
        (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
    });
    (entry.0.clone(), entry.1.clone())
}

fn transpose_square(buf: &mut [Complex<f64>], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            buf.swap(i * n + j, j * n + i);
        }
    }
}

/// In-place 2-D FFT of an `n x n` complex buffer (row-major).  The inverse
/// transform is normalized by `1/n^2`.
pub(crate) fn fft2(buf: &mut [Complex<f64>], n: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), n * n);
    let (fwd, inv) = plans_for(n);
    let plan = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex::default(); plan.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose_square(buf, n);
    for row in buf.chunks_exact_mut(n) {
        plan.process_with_scratch(row, &mut scratch);
    }
    transpose_square(buf, n);
    if inverse {
        let s = 1.0 / (n * n) as f64;
        for v in buf.iter_mut() {
            *v *= s;
        }
    }
}

/// Angular wavenumbers `2 pi f` in FFT order for side `n`, spacing `h`.
pub(crate) fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let scale = 2.0 * PI / (n as f64 * h);
    (0..n)
        .map(|i| {
            let f = if i <= n / 2 - 1 {
                i as f64
            } else {
                i as f64 - n as f64
            };
            scale * f
        })
        .collect()
}

/// Wavenumbers with the Nyquist entry zeroed: the first-derivative symbol.
pub(crate) fn derivative_wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let mut k = wavenumbers(n, h);
    k[n / 2] = 0.0;
    k
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex<f64>> {
    values.iter().map(|&v| Complex::new(v, 0.0)).collect()
}

/// Forward transform of a real field.
pub(crate) fn forward_real(values: &[f64], n: usize) -> Vec<Complex<f64>> {
    let mut buf = to_complex(values);
    fft2(&mut buf, n, false);
    buf
}

/// One inverse transform recovering two real fields: for Hermitian spectra
/// `s1`, `s2`, `ifft(s1 + i s2) = f1 + i f2` exactly.
pub(crate) fn inverse_two_real(
    s1: &[Complex<f64>],
    s2: &[Complex<f64>],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut buf: Vec<Complex<f64>> = s1
        .iter()
        .zip(s2)
        .map(|(a, b)| a + Complex::new(0.0, 1.0) * b)
        .collect();
    fft2(&mut buf, n, true);
    (
        buf.iter().map(|z| z.re).collect(),
        buf.iter().map(|z| z.im).collect(),
    )
}

/// One forward transform producing two real fields' spectra: transform
/// `f1 + i f2` and split by conjugate symmetry.
pub(crate) fn forward_two_real(
    f1: &[f64],
    f2: &[f64],
    n: usize,
) -> (Vec<Complex<f64>>, Vec<Complex<f64>>) {
    let mut buf: Vec<Complex<f64>> = f1
        .iter()
        .zip(f2)
        .map(|(&a, &b)| Complex::new(a, b))
        .collect();
    fft2(&mut buf, n, false);
    let mut s1 = vec![Complex::default(); n * n];
    let mut s2 = vec![Complex::default(); n * n];
    for i2 in 0..n {
        let m2 = (n - i2) % n;
        for i1 in 0..n {
            let m1 = (n - i1) % n;
            let z = buf[i2 * n + i1];
            let zc = buf[m2 * n + m1].conj();
            s1[i2 * n + i1] = 0.5 * (z + zc);
            s2[i2 * n + i1] = Complex::new(0.0, -0.5) * (z - zc);
        }
    }
    (s1, s2)
}

/// Spectral gradient `(d/dx1, d/dx2)` of a decaying field.
pub fn gradient(f: &ScalarField) -> (ScalarField, ScalarField) {
    let grid = f.grid();
    let n = grid.n();
    let d = derivative_wavenumbers(n, grid.spacing());
    let mut spec = forward_real(f.values(), n);
    for i2 in 0..n {
        for i1 in 0..n {
            // pack: spectrum of dx1 plus i times spectrum of dx2
            spec[i2 * n + i1] *= Complex::new(-d[i2], d[i1]);
        }
    }
    fft2(&mut spec, n, true);
    let mut g1 = ScalarField::zeros(grid);
    let mut g2 = ScalarField::zeros(grid);
    for (i, z) in spec.iter().enumerate() {
        g1.values_mut()[i] = z.re;
        g2.values_mut()[i] = z.im;
    }
    (g1, g2)
}

/// Spectral Laplacian of a decaying field.
pub fn laplacian(f: &ScalarField) -> ScalarField {
    let grid = f.grid();
    let n = grid.n();
    let k = wavenumbers(n, grid.spacing());
    let mut spec = forward_real(f.values(), n);
    for i2 in 0..n {
        for i1 in 0..n {
            spec[i2 * n + i1] *= -(k[i1] * k[i1] + k[i2] * k[i2]);
        }
    }
    fft2(&mut spec, n, true);
    let mut out = ScalarField::zeros(grid);
    for (i, z) in spec.iter().enumerate() {
        out.values_mut()[i] = z.re;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid2D;

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 64;
        let vals: Vec<f64> = (0..n * n).map(|i| ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut buf = to_complex(&vals);
        fft2(&mut buf, n, false);
        fft2(&mut buf, n, true);
        for (a, b) in vals.iter().zip(&buf) {
            assert!((a - b.re).abs() < 1e-12 && b.im.abs() < 1e-12);
        }
    }

    #[test]
    fn packed_pair_matches_separate_transforms() {
        let n = 64;
        let f1: Vec<f64> = (0..n * n).map(|i| ((i * 31) % 17) as f64).collect();
        let f2: Vec<f64> = (0..n * n).map(|i| ((i * 13) % 23) as f64 - 11.0).collect();
        let (s1, s2) = forward_two_real(&f1, &f2, n);
        let e1 = forward_real(&f1, n);
        let e2 = forward_real(&f2, n);
        let err = |a: &[Complex<f64>], b: &[Complex<f64>]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).norm())
                .fold(0.0f64, f64::max)
        };
        let scale = e1.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        assert!(err(&s1, &e1) < 1e-10 * scale);
        assert!(err(&s2, &e2) < 1e-10 * scale);

        let (b1, b2) = inverse_two_real(&s1, &s2, n);
        let worst = f1
            .iter()
            .zip(&b1)
            .chain(f2.iter().zip(&b2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(worst < 1e-10);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = Grid2D::new(64, 3.0).unwrap();
        let f = ScalarField::from_fn(g, |_, _| 4.2);
        let (g1, g2) = gradient(&f);
        assert!(g1.sup_norm() < 1e-13 && g2.sup_norm() < 1e-13);
    }

    #[test]
    fn divergence_of_gradient_is_laplacian_for_periodic_modes() {
        let l = 2.5;
        let g = Grid2D::new(64, l).unwrap();
        let pi = std::f64::consts::PI;
        let (k1, k2) = (3.0 * pi / l, 2.0 * pi / l);
        let f = ScalarField::from_fn(g, |x1, x2| (k1 * x1).cos() * (k2 * x2).sin());
        let (g1, g2) = gradient(&f);
        let (g11, _) = gradient(&g1);
        let (_, g22) = gradient(&g2);
        let lap = laplacian(&f);
        let mut diff = g11;
        diff.add_scaled(1.0, &g22);
        diff.add_scaled(-1.0, &lap);
        assert!(diff.sup_norm() < 1e-11 * lap.sup_norm());
        // and the laplacian itself is exact on commensurate modes
        let mut exact = f.clone();
        exact.scale(-(k1 * k1 + k2 * k2));
        exact.add_scaled(-1.0, &lap);
        assert!(exact.sup_norm() < 1e-11 * lap.sup_norm());
    }

    #[test]
    fn laplacian_matches_analytic_on_decaying_gaussian() {
        // wide enough that the boundary tail sits at machine precision
        let g = Grid2D::new(128, 8.0).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| (-(x1 * x1 + x2 * x2) / 2.0).exp());
        let lap = laplacian(&f);
        let exact = ScalarField::from_fn(g, |x1, x2| {
            let r2 = x1 * x1 + x2 * x2;
            (r2 - 2.0) * (-r2 / 2.0).exp()
        });
        let mut diff = lap.clone();
        diff.add_scaled(-1.0, &exact);
        assert!(diff.sup_norm() < 1e-8 * exact.sup_norm());
    }
}
