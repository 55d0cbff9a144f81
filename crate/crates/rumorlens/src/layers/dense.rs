//! Dense sigmoid read-out head: one probability from one hidden vector.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{sigmoid, InitScheme, Matrix2D};

/// Binary classification head `p = sigmoid(h w + b)` with `w` of shape
/// `(hidden, 1)`.
#[derive(Debug, Clone)]
pub struct DenseSigmoid {
    pub w: Matrix2D,
    pub b: f64,
}

pub struct DenseCache {
    h: Matrix2D,
    p: f64,
}

impl DenseSigmoid {
    pub fn new(hidden: usize, rng: &mut SeededRng) -> Self {
        DenseSigmoid { w: Matrix2D::init(hidden, 1, InitScheme::UniformScaled, rng), b: 0.0 }
    }

    pub fn hidden(&self) -> usize {
        self.w.rows()
    }

    pub fn forward(&self, h: &Matrix2D) -> Result<(f64, DenseCache)> {
        if h.shape() != (1, self.w.rows()) {
            return Err(Error::Shape {
                op: "dense_sigmoid",
                detail: format!(
                    "hidden state is {}x{}, expected 1x{}",
                    h.rows(),
                    h.cols(),
                    self.w.rows()
                ),
            });
        }
        let z = h.matmul(&self.w)?.get(0, 0) + self.b;
        let p = sigmoid(z);
        Ok((p, DenseCache { h: h.clone(), p }))
    }

    /// Given `dL/dp`, returns `(dL/dw, dL/db, dL/dh)`.
    pub fn backward(&self, cache: &DenseCache, d_p: f64) -> (Matrix2D, f64, Matrix2D) {
        let dz = d_p * cache.p * (1.0 - cache.p);
        let mut grad_w = Matrix2D::zeros(self.w.rows(), 1);
        for (g, &hv) in grad_w.data_mut().iter_mut().zip(cache.h.data()) {
            *g = dz * hv;
        }
        let mut grad_h = Matrix2D::zeros(1, self.w.rows());
        for (g, &wv) in grad_h.data_mut().iter_mut().zip(self.w.data()) {
            *g = dz * wv;
        }
        (grad_w, dz, grad_h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_half() {
        let head = DenseSigmoid { w: Matrix2D::zeros(3, 1), b: 0.0 };
        let (p, _) = head.forward(&Matrix2D::from_rows(&[&[1.0, -4.0, 2.0]])).unwrap();
        assert_eq!(p, 0.5);
    }

    #[test]
    fn hand_computed_probability() {
        let head = DenseSigmoid { w: Matrix2D::from_rows(&[&[1.0], &[1.0]]), b: 0.0 };
        let (p, _) = head.forward(&Matrix2D::from_rows(&[&[1.0, 1.0]])).unwrap();
        assert!((p - 0.8807970779778823).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut rng = SeededRng::new(1);
        let head = DenseSigmoid::new(3, &mut rng);
        assert!(head.forward(&Matrix2D::zeros(1, 4)).is_err());
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = SeededRng::new(77);
        let head = DenseSigmoid::new(4, &mut rng);
        let h = Matrix2D::init(1, 4, InitScheme::UniformScaled, &mut rng);

        let objective = |head: &DenseSigmoid, h: &Matrix2D| head.forward(h).unwrap().0;

        let (_, cache) = head.forward(&h).unwrap();
        let (grad_w, grad_b, grad_h) = head.backward(&cache, 1.0);

        let eps = 1e-6;
        let check = |numeric: f64, analytic: f64, what: &str| {
            let denom = numeric.abs().max(analytic.abs()).max(1e-9);
            assert!(
                (numeric - analytic).abs() / denom <= 1e-6,
                "{what}: numeric {numeric} vs analytic {analytic}"
            );
        };

        for r in 0..4 {
            let mut plus = head.clone();
            plus.w.set(r, 0, head.w.get(r, 0) + eps);
            let mut minus = head.clone();
            minus.w.set(r, 0, head.w.get(r, 0) - eps);
            check(
                (objective(&plus, &h) - objective(&minus, &h)) / (2.0 * eps),
                grad_w.get(r, 0),
                "w",
            );

            let mut hp = h.clone();
            hp.set(0, r, h.get(0, r) + eps);
            let mut hm = h.clone();
            hm.set(0, r, h.get(0, r) - eps);
            check(
                (objective(&head, &hp) - objective(&head, &hm)) / (2.0 * eps),
                grad_h.get(0, r),
                "h",
            );
        }
        let mut plus = head.clone();
        plus.b += eps;
        let mut minus = head.clone();
        minus.b -= eps;
        check((objective(&plus, &h) - objective(&minus, &h)) / (2.0 * eps), grad_b, "b");
    }
}
