//! Fixtures shared by the integration test binaries.
#![allow(dead_code)]

/// Quintic falloff: 1 for w <= 0, 0 for w >= 1, C^2 in between.
pub fn falloff(w: f64) -> f64 {
    let w = w.clamp(0.0, 1.0);
    1.0 - (10.0 * w.powi(3) - 15.0 * w.powi(4) + 6.0 * w.powi(5))
}

/// Wide radial bump with compact support: a Gaussian of width 2.3 cut off
/// smoothly between r = 4.6 and r = 6.86.  Fits inside a half-extent-7 grid
/// with room to spare, which makes free-space convolutions against it exact
/// up to quadrature error.
pub fn cutoff_bump(r: f64) -> f64 {
    (-r * r / (2.0 * 2.3 * 2.3)).exp() * falloff((r - 4.6) / 2.26)
}

/// Cumulative radial mass `m(r) = 2 pi int_0^r s u(s)^2 ds` tabulated by
/// trapezoid quadrature, for closed-form gauge fields of radial densities.
pub struct RadialMass {
    dr: f64,
    table: Vec<f64>,
}

impl RadialMass {
    pub fn build(u: impl Fn(f64) -> f64, r_max: f64, dr: f64) -> Self {
        let n = (r_max / dr).ceil() as usize;
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = 0.0;
        let mut prev = 0.0; // r * u(r)^2 at r = 0
        for i in 1..=n {
            let r = i as f64 * dr;
            let cur = r * u(r).powi(2);
            acc += 0.5 * (prev + cur) * dr;
            table.push(acc * std::f64::consts::TAU);
            prev = cur;
        }
        RadialMass { dr, table }
    }

    pub fn at(&self, r: f64) -> f64 {
        let t = r / self.dr;
        let j = t as usize;
        if j + 1 >= self.table.len() {
            return *self.table.last().unwrap();
        }
        let frac = t - j as f64;
        self.table[j] * (1.0 - frac) + self.table[j + 1] * frac
    }
}

/// Exponential integral `E1(x) = int_x^inf e^{-t}/t dt` for `x > 0`.
/// Power series below 1, modified-Lentz continued fraction above.
pub fn exp_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument");
    if x <= 1.0 {
        const GAMMA: f64 = 0.577_215_664_901_532_9;
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..=50 {
            term *= x / k as f64;
            let add = term / k as f64;
            if k % 2 == 1 {
                sum += add;
            } else {
                sum -= add;
            }
            if add < 1e-18 {
                break;
            }
        }
        -GAMMA - x.ln() + sum
    } else {
        // E1 = e^{-x} / (x+1 - 1^2/(x+3 - 2^2/(x+5 - ...)))
        let tiny = 1e-300;
        let mut f = x + 1.0;
        let mut c = f;
        let mut d = 0.0;
        for k in 1..200 {
            let a = -((k * k) as f64);
            let b = x + 1.0 + 2.0 * k as f64;
            d = b + a * d;
            if d == 0.0 {
                d = tiny;
            }
            c = b + a / c;
            if c == 0.0 {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x).exp() / f
    }
}
