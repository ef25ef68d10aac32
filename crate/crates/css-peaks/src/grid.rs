//! Uniform square grid on `[-L, L)^2` and real scalar fields living on it.
//!
//! Storage is row-major with the `x1` coordinate fastest: the sample at
//! `(x1[i1], x2[i2])` sits at linear index `i2 * n + i1`.  Grid sides are
//! powers of two for the transforms.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{validation, Error, Result};

const SNAPSHOT_MAGIC: &[u8; 4] = b"CSSF";
pub const MIN_GRID: usize = 64;

/// Square grid: `n` points per side, half-extent `L`, spacing `h = 2L/n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid2D {
    n: usize,
    l: f64,
}

impl Grid2D {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < MIN_GRID || !n.is_power_of_two() {
            return Err(validation!(
                "grid side must be a power of two >= {MIN_GRID}, got {n}"
            ));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(validation!("grid half-extent must be positive, got {l}"));
        }
        Ok(Grid2D { n, l })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-extent `L`; the domain is `[-L, L)^2`.
    pub fn half_extent(&self) -> f64 {
        self.l
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.l / self.n as f64
    }

    /// Coordinate of sample `i` along either axis: `-L + i h`.
    pub fn coord(&self, i: usize) -> f64 {
        -self.l + self.spacing() * i as f64
    }

    pub fn index(&self, i1: usize, i2: usize) -> usize {
        i2 * self.n + i1
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Real samples on a [`Grid2D`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid2D,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2D) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    /// Sample `f(x1, x2)` at every grid point.
    pub fn from_fn(grid: Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i2 in 0..n {
            let x2 = grid.coord(i2);
            for i1 in 0..n {
                values.push(f(grid.coord(i1), x2));
            }
        }
        ScalarField { grid, values }
    }

    pub fn from_values(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(validation!(
                "field length {} does not match grid {}^2",
                values.len(),
                grid.n()
            ));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn grid(&self) -> Grid2D {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn at(&self, i1: usize, i2: usize) -> f64 {
        self.values[self.grid.index(i1, i2)]
    }

    /// `sqrt(h^2 sum f^2)`: the grid L2 norm.
    pub fn l2_norm(&self) -> f64 {
        self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `h^2 sum f g`: the grid inner product.
    pub fn dot(&self, other: &ScalarField) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let h = self.grid.spacing();
        h * h
            * self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    /// `h^2 sum f`.
    pub fn integral(&self) -> f64 {
        let h = self.grid.spacing();
        h * h * self.values.iter().sum::<f64>()
    }

    /// `self += c * other`, in place.
    pub fn add_scaled(&mut self, c: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Binary snapshot: magic `CSSF`, `u32` side, `f64` half-extent, then the
    /// `n^2` samples, all little-endian, row-major with `x1` fastest.
    pub fn write_snapshot(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&(self.grid.n() as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_extent().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(Error::Format(format!(
                "bad snapshot magic {magic:?} in {}",
                path.display()
            )));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let l = f64::from_le_bytes(b8);
        let grid = Grid2D::new(n, l)
            .map_err(|e| Error::Format(format!("snapshot header: {e}")))?;
        let mut values = vec![0.0f64; grid.len()];
        for v in &mut values {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::Format("snapshot has trailing bytes".into()));
        }
        let field = ScalarField { grid, values };
        if !field.is_finite() {
            return Err(Error::Format("snapshot contains non-finite values".into()));
        }
        Ok(field)
    }

    /// CSV export `(x1, x2, value)` for offline plotting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x1,x2,value")?;
        let n = self.grid.n();
        for i2 in 0..n {
            for i1 in 0..n {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    self.grid.coord(i1),
                    self.grid.coord(i2),
                    self.at(i1, i2)
                )?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_sides() {
        assert!(Grid2D::new(48, 1.0).is_err());
        assert!(Grid2D::new(96, 1.0).is_err());
        assert!(Grid2D::new(64, 0.0).is_err());
        assert!(Grid2D::new(64, f64::NAN).is_err());
        let g = Grid2D::new(64, 2.0).unwrap();
        assert_eq!(g.spacing(), 4.0 / 64.0);
        assert_eq!(g.coord(0), -2.0);
        assert_eq!(g.coord(32), 0.0);
    }

    #[test]
    fn row_major_x1_fastest() {
        let g = Grid2D::new(64, 1.0).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| x1 + 100.0 * x2);
        assert_eq!(f.values()[1] - f.values()[0], g.spacing());
        assert_eq!(f.values()[64] - f.values()[0], 100.0 * g.spacing());
    }

    #[test]
    fn snapshot_roundtrip() {
        let g = Grid2D::new(64, 1.5).unwrap();
        let f = ScalarField::from_fn(g, |x1, x2| (x1 * 3.0).sin() * (-x2 * x2).exp());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.cssf");
        f.write_snapshot(&path).unwrap();
        let back = ScalarField::read_snapshot(&path).unwrap();
        assert_eq!(f, back);

        // header is 4 + 4 + 8 bytes, payload n^2 doubles
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 64 * 64 * 8);
        assert_eq!(&bytes[..4], b"CSSF");
    }

    #[test]
    fn snapshot_rejects_corruption() {
        let g = Grid2D::new(64, 1.0).unwrap();
        let f = ScalarField::zeros(g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.cssf");
        f.write_snapshot(&path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            ScalarField::read_snapshot(&path),
            Err(Error::Format(_))
        ));

        let mut nan = f.clone();
        nan.values_mut()[10] = f64::NAN;
        nan.write_snapshot(&path).unwrap();
        assert!(ScalarField::read_snapshot(&path).is_err());
    }

    #[test]
    fn norms_and_dot() {
        let g = Grid2D::new(64, 1.0).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values_mut()[5] = -3.0;
        let h = g.spacing();
        assert!((f.l2_norm() - 3.0 * h).abs() < 1e-15);
        assert_eq!(f.sup_norm(), 3.0);
        assert!((f.dot(&f) - 9.0 * h * h).abs() < 1e-15);
    }
}
