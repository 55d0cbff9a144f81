//! Dense row-major matrix kernel.
//!
//! Everything the layers touch is a [`Matrix2D`] of `f64`. There is no
//! broadcasting: every shape is explicit and mismatches are hard errors.

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Dense row-major matrix of doubles.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Pointwise functions available to [`elementwise`].
///
/// The `*Deriv` variants are expressed in terms of the activation *output*:
/// `SigmoidDeriv` maps `s` to `s * (1 - s)`, `TanhDeriv` maps `t` to
/// `1 - t^2`, `ReluDeriv` maps `r` to `1` if `r > 0` else `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapFn {
    Sigmoid,
    Tanh,
    Relu,
    SigmoidDeriv,
    TanhDeriv,
    ReluDeriv,
}

/// Weight initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// I.i.d. uniform on `[-s, +s]` with `s = sqrt(6 / (rows + cols))`.
    UniformScaled,
    Zeros,
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn apply_map(f: MapFn, v: f64) -> f64 {
    match f {
        MapFn::Sigmoid => sigmoid(v),
        MapFn::Tanh => v.tanh(),
        MapFn::Relu => v.max(0.0),
        MapFn::SigmoidDeriv => v * (1.0 - v),
        MapFn::TanhDeriv => 1.0 - v * v,
        MapFn::ReluDeriv => {
            if v > 0.0 {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Applies `f` to every entry, returning a new matrix of the same shape.
pub fn elementwise(f: MapFn, x: &Matrix2D) -> Matrix2D {
    let mut out = x.clone();
    for v in &mut out.data {
        *v = apply_map(f, *v);
    }
    out
}

impl Matrix2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix2D { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                detail: format!("{rows}x{cols} needs {} values, got {}", rows * cols, data.len()),
            });
        }
        Ok(Matrix2D { rows, cols, data })
    }

    /// Builds a matrix from explicit rows; handy in tests.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Matrix2D { rows: r, cols: c, data }
    }

    /// Seeded initialization. `UniformScaled` consumes `rows * cols` draws in
    /// row-major order, so identical `(rows, cols, scheme, seed)` always
    /// produces bit-identical matrices.
    pub fn init(rows: usize, cols: usize, scheme: InitScheme, rng: &mut SeededRng) -> Self {
        match scheme {
            InitScheme::Zeros => Matrix2D::zeros(rows, cols),
            InitScheme::UniformScaled => {
                let s = (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols).map(|_| rng.uniform(-s, s)).collect();
                Matrix2D { rows, cols, data }
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self @ other`.
    pub fn matmul(&self, other: &Matrix2D) -> Result<Matrix2D> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                detail: format!(
                    "{}x{} cannot be multiplied by {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = Matrix2D::zeros(self.rows, other.cols);
        for (a_row, out_row) in self
            .data
            .chunks_exact(self.cols)
            .zip(out.data.chunks_exact_mut(other.cols))
        {
            for (k, &aik) in a_row.iter().enumerate() {
                if aik == 0.0 {
                    continue;
                }
                let b_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += aik * b;
                }
            }
        }
        Ok(out)
    }

    /// `self @ other^T` without materializing the transpose.
    pub fn matmul_bt(&self, other: &Matrix2D) -> Result<Matrix2D> {
        if self.cols != other.cols {
            return Err(Error::Shape {
                op: "matmul_bt",
                detail: format!(
                    "{}x{} cannot be multiplied by the transpose of {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = Matrix2D::zeros(self.rows, other.rows);
        for (i, a_row) in self.data.chunks_exact(self.cols).enumerate() {
            let out_row = out.row_mut(i);
            for (j, b_row) in other.data.chunks_exact(other.cols).enumerate() {
                out_row[j] = a_row.iter().zip(b_row).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix2D {
        let mut out = Matrix2D::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, other: &Matrix2D) -> Result<Matrix2D> {
        self.check_same_shape("add", other)?;
        let mut out = self.clone();
        for (o, &v) in out.data.iter_mut().zip(&other.data) {
            *o += v;
        }
        Ok(out)
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &Matrix2D) -> Result<()> {
        self.check_same_shape("axpy", other)?;
        for (o, &v) in self.data.iter_mut().zip(&other.data) {
            *o += scale * v;
        }
        Ok(())
    }

    /// Entry-wise product.
    pub fn hadamard(&self, other: &Matrix2D) -> Result<Matrix2D> {
        self.check_same_shape("hadamard", other)?;
        let mut out = self.clone();
        for (o, &v) in out.data.iter_mut().zip(&other.data) {
            *o *= v;
        }
        Ok(out)
    }

    /// Rank-one update `self += col^T @ row`, used by gradient accumulation.
    pub fn add_outer(&mut self, col: &[f64], row: &[f64]) {
        assert_eq!(self.rows, col.len(), "add_outer: row count mismatch");
        assert_eq!(self.cols, row.len(), "add_outer: col count mismatch");
        for (out_row, &c) in self.data.chunks_exact_mut(self.cols).zip(col) {
            if c == 0.0 {
                continue;
            }
            for (o, &r) in out_row.iter_mut().zip(row) {
                *o += c * r;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    fn check_same_shape(&self, op: &'static str, other: &Matrix2D) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op,
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let i2 = Matrix2D::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let m = Matrix2D::from_rows(&[&[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(i2.matmul(&m).unwrap(), m);
    }

    #[test]
    fn matmul_dot_product() {
        // [[1,2]] x [[3],[4]] = [[11]]
        let a = Matrix2D::from_rows(&[&[1.0, 2.0]]);
        let b = Matrix2D::from_rows(&[&[3.0], &[4.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (1, 1));
        assert_eq!(c.get(0, 0), 11.0);
    }

    #[test]
    fn matmul_zeros() {
        let z = Matrix2D::zeros(2, 3);
        let mut rng = SeededRng::new(1);
        let m = Matrix2D::init(3, 4, InitScheme::UniformScaled, &mut rng);
        let out = z.matmul(&m).unwrap();
        assert_eq!(out, Matrix2D::zeros(2, 4));
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let a = Matrix2D::zeros(2, 3);
        let b = Matrix2D::zeros(4, 5);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("2x3"), "{err}");
        assert!(err.contains("4x5"), "{err}");
    }

    #[test]
    fn matmul_associative_within_tolerance() {
        let mut rng = SeededRng::new(42);
        for _ in 0..20 {
            let a = Matrix2D::init(4, 4, InitScheme::UniformScaled, &mut rng);
            let b = Matrix2D::init(4, 4, InitScheme::UniformScaled, &mut rng);
            let c = Matrix2D::init(4, 4, InitScheme::UniformScaled, &mut rng);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let max_diff = left
                .data()
                .iter()
                .zip(right.data())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            assert!(max_diff <= 1e-9, "associativity violated: {max_diff}");
        }
    }

    #[test]
    fn matmul_bt_matches_explicit_transpose() {
        let mut rng = SeededRng::new(9);
        let a = Matrix2D::init(3, 5, InitScheme::UniformScaled, &mut rng);
        let b = Matrix2D::init(4, 5, InitScheme::UniformScaled, &mut rng);
        let fast = a.matmul_bt(&b).unwrap();
        let slow = a.matmul(&b.transpose()).unwrap();
        for (x, y) in fast.data().iter().zip(slow.data()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn elementwise_fixed_points() {
        let x = Matrix2D::from_rows(&[&[0.0, 1.0, -2.0]]);
        let s = elementwise(MapFn::Sigmoid, &x);
        assert_eq!(s.get(0, 0), 0.5);
        assert!((s.get(0, 1) - 0.7310585786300049).abs() < 1e-12);
        let t = elementwise(MapFn::Tanh, &x);
        assert_eq!(t.get(0, 0), 0.0);
        let r = elementwise(MapFn::Relu, &x);
        assert_eq!(r.get(0, 2), 0.0);
        assert_eq!(r.get(0, 1), 1.0);
    }

    /// Analytic derivatives (expressed in terms of the activation output)
    /// against central finite differences of the base functions.
    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = SeededRng::new(2024);
        let eps = 1e-5;
        for _ in 0..100 {
            let z = rng.uniform(-5.0, 5.0);
            for (base, deriv) in [
                (MapFn::Sigmoid, MapFn::SigmoidDeriv),
                (MapFn::Tanh, MapFn::TanhDeriv),
                (MapFn::Relu, MapFn::ReluDeriv),
            ] {
                if base == MapFn::Relu && z.abs() < 1e-3 {
                    continue; // kink
                }
                let numeric = (apply_map(base, z + eps) - apply_map(base, z - eps)) / (2.0 * eps);
                let analytic = apply_map(deriv, apply_map(base, z));
                let denom = numeric.abs().max(analytic.abs()).max(1e-12);
                assert!(
                    (numeric - analytic).abs() / denom <= 1e-6,
                    "{base:?} at {z}: numeric {numeric} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn init_zeros() {
        let mut rng = SeededRng::new(0);
        let m = Matrix2D::init(2, 2, InitScheme::Zeros, &mut rng);
        assert_eq!(m, Matrix2D::zeros(2, 2));
    }

    #[test]
    fn init_uniform_scaled_within_bound() {
        let mut rng = SeededRng::new(7);
        let m = Matrix2D::init(100, 100, InitScheme::UniformScaled, &mut rng);
        let bound = (6.0 / 200.0f64).sqrt();
        assert!((bound - 0.17320508075688773).abs() < 1e-15);
        assert!(m.data().iter().all(|v| v.abs() <= bound));
        // Not degenerate: draws actually spread out.
        assert!(m.data().iter().any(|v| v.abs() > bound / 2.0));
    }

    #[test]
    fn init_deterministic_per_seed() {
        let a = Matrix2D::init(13, 7, InitScheme::UniformScaled, &mut SeededRng::new(99));
        let b = Matrix2D::init(13, 7, InitScheme::UniformScaled, &mut SeededRng::new(99));
        assert_eq!(a, b);
    }

    #[test]
    fn from_vec_length_check() {
        assert!(Matrix2D::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix2D::from_vec(2, 2, vec![1.0; 4]).is_ok());
    }

    #[test]
    fn add_outer_accumulates() {
        let mut m = Matrix2D::zeros(2, 3);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0, 5.0]);
        m.add_outer(&[1.0, 0.0], &[1.0, 1.0, 1.0]);
        assert_eq!(m, Matrix2D::from_rows(&[&[4.0, 5.0, 6.0], &[6.0, 8.0, 10.0]]));
    }
}
