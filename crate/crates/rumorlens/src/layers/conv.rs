//! Valid 1D convolution over a token-feature matrix, plus non-overlapping
//! max pooling.

use crate::error::{Error, Result};
use crate::layers::Activation;
use crate::rng::SeededRng;
use crate::tensor::{InitScheme, Matrix2D};

/// 1D convolution: `n_filters` kernels of shape `(kernel_width, in_dim)`
/// slide over the rows of the input with stride 1 and no padding, producing
/// `(T - kernel_width + 1, n_filters)` activations.
#[derive(Debug, Clone)]
pub struct Conv1dLayer {
    pub filters: Vec<Matrix2D>,
    /// Shape `(1, n_filters)`.
    pub bias: Matrix2D,
    pub activation: Activation,
}

#[derive(Debug)]
pub struct ConvCache {
    x: Matrix2D,
    /// Activated outputs; both relu and tanh derivatives are recoverable
    /// from the output value alone.
    out: Matrix2D,
}

#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub filters: Vec<Matrix2D>,
    pub bias: Matrix2D,
    pub x: Matrix2D,
}

impl Conv1dLayer {
    pub fn new(
        in_dim: usize,
        n_filters: usize,
        kernel_width: usize,
        activation: Activation,
        rng: &mut SeededRng,
    ) -> Self {
        assert!(kernel_width >= 1 && n_filters >= 1);
        let filters = (0..n_filters)
            .map(|_| Matrix2D::init(kernel_width, in_dim, InitScheme::UniformScaled, rng))
            .collect();
        Conv1dLayer { filters, bias: Matrix2D::zeros(1, n_filters), activation }
    }

    pub fn n_filters(&self) -> usize {
        self.filters.len()
    }

    pub fn kernel_width(&self) -> usize {
        self.filters[0].rows()
    }

    pub fn in_dim(&self) -> usize {
        self.filters[0].cols()
    }

    pub fn forward(&self, x: &Matrix2D) -> Result<(Matrix2D, ConvCache)> {
        let k = self.kernel_width();
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "conv1d_forward",
                detail: format!(
                    "input is {}x{}, filters expect feature dim {}",
                    x.rows(),
                    x.cols(),
                    self.in_dim()
                ),
            });
        }
        if x.rows() < k {
            return Err(Error::SequenceTooShort { op: "conv1d", needed: k, got: x.rows() });
        }
        let out_len = x.rows() - k + 1;
        let mut out = Matrix2D::zeros(out_len, self.n_filters());
        for t in 0..out_len {
            for (fi, filter) in self.filters.iter().enumerate() {
                let mut acc = self.bias.get(0, fi);
                for j in 0..k {
                    let x_row = x.row(t + j);
                    let w_row = filter.row(j);
                    acc += x_row.iter().zip(w_row).map(|(a, b)| a * b).sum::<f64>();
                }
                let v = match self.activation {
                    Activation::Relu => acc.max(0.0),
                    Activation::Tanh => acc.tanh(),
                };
                out.set(t, fi, v);
            }
        }
        let cache = ConvCache { x: x.clone(), out: out.clone() };
        Ok((out, cache))
    }

    pub fn backward(&self, cache: &ConvCache, grad_out: &Matrix2D) -> Result<ConvGrads> {
        if grad_out.shape() != cache.out.shape() {
            return Err(Error::Shape {
                op: "conv1d_backward",
                detail: format!(
                    "gradient is {}x{}, cache expects {}x{}",
                    grad_out.rows(),
                    grad_out.cols(),
                    cache.out.rows(),
                    cache.out.cols()
                ),
            });
        }
        let k = self.kernel_width();
        let mut grads = ConvGrads {
            filters: self
                .filters
                .iter()
                .map(|f| Matrix2D::zeros(f.rows(), f.cols()))
                .collect(),
            bias: Matrix2D::zeros(1, self.n_filters()),
            x: Matrix2D::zeros(cache.x.rows(), cache.x.cols()),
        };
        for t in 0..cache.out.rows() {
            for fi in 0..self.n_filters() {
                let out_v = cache.out.get(t, fi);
                let act_deriv = match self.activation {
                    Activation::Relu => {
                        if out_v > 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Activation::Tanh => 1.0 - out_v * out_v,
                };
                let dz = grad_out.get(t, fi) * act_deriv;
                if dz == 0.0 {
                    continue;
                }
                grads.bias.set(0, fi, grads.bias.get(0, fi) + dz);
                for j in 0..k {
                    let x_row = cache.x.row(t + j);
                    let w_row = self.filters[fi].row(j);
                    let gf_row = grads.filters[fi].row_mut(j);
                    for (g, &xv) in gf_row.iter_mut().zip(x_row) {
                        *g += dz * xv;
                    }
                    let gx_row = grads.x.row_mut(t + j);
                    for (g, &wv) in gx_row.iter_mut().zip(w_row) {
                        *g += dz * wv;
                    }
                }
            }
        }
        Ok(grads)
    }
}

/// Cache of winning row indices for the pooling backward pass.
pub struct PoolCache {
    in_rows: usize,
    in_cols: usize,
    pool: usize,
    /// `argmax[w * cols + j]` = input row that won window `w`, column `j`.
    argmax: Vec<usize>,
}

/// Column-wise max over non-overlapping windows of `pool` rows; trailing
/// rows that do not fill a window are dropped. Ties go to the first
/// occurrence.
pub fn maxpool1d(x: &Matrix2D, pool: usize) -> Result<(Matrix2D, PoolCache)> {
    assert!(pool >= 1, "pool must be at least 1");
    if x.rows() < pool {
        return Err(Error::SequenceTooShort { op: "maxpool1d", needed: pool, got: x.rows() });
    }
    let windows = x.rows() / pool;
    let mut out = Matrix2D::zeros(windows, x.cols());
    let mut argmax = vec![0usize; windows * x.cols()];
    for w in 0..windows {
        for j in 0..x.cols() {
            let mut best_row = w * pool;
            let mut best = x.get(best_row, j);
            for r in w * pool + 1..(w + 1) * pool {
                let v = x.get(r, j);
                if v > best {
                    best = v;
                    best_row = r;
                }
            }
            out.set(w, j, best);
            argmax[w * x.cols() + j] = best_row;
        }
    }
    Ok((out, PoolCache { in_rows: x.rows(), in_cols: x.cols(), pool, argmax }))
}

/// Routes each upstream gradient entry to the input position that won its
/// window.
pub fn maxpool1d_backward(cache: &PoolCache, grad_out: &Matrix2D) -> Result<Matrix2D> {
    let windows = cache.in_rows / cache.pool;
    if grad_out.shape() != (windows, cache.in_cols) {
        return Err(Error::Shape {
            op: "maxpool1d_backward",
            detail: format!(
                "gradient is {}x{}, expected {}x{}",
                grad_out.rows(),
                grad_out.cols(),
                windows,
                cache.in_cols
            ),
        });
    }
    let mut grad_x = Matrix2D::zeros(cache.in_rows, cache.in_cols);
    for w in 0..windows {
        for j in 0..cache.in_cols {
            let row = cache.argmax[w * cache.in_cols + j];
            grad_x.set(row, j, grad_x.get(row, j) + grad_out.get(w, j));
        }
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_like_kernel_copies_a_column() {
        let mut rng = SeededRng::new(1);
        let mut layer = Conv1dLayer::new(2, 1, 1, Activation::Relu, &mut rng);
        layer.filters[0] = Matrix2D::from_rows(&[&[1.0, 0.0]]);
        layer.bias.data_mut().fill(0.0);
        let x = Matrix2D::from_rows(&[&[0.5, 9.0], &[2.0, 9.0], &[0.0, 9.0]]);
        let (out, _) = layer.forward(&x).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[0.5], &[2.0], &[0.0]]));
    }

    #[test]
    fn sliding_dot_product() {
        let mut rng = SeededRng::new(1);
        let mut layer = Conv1dLayer::new(1, 1, 2, Activation::Relu, &mut rng);
        layer.filters[0] = Matrix2D::from_rows(&[&[1.0], &[1.0]]);
        layer.bias.data_mut().fill(0.0);
        let x = Matrix2D::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let (out, _) = layer.forward(&x).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[3.0], &[5.0]]));
    }

    #[test]
    fn sequence_shorter_than_kernel_is_an_error() {
        let mut rng = SeededRng::new(1);
        let layer = Conv1dLayer::new(2, 1, 3, Activation::Relu, &mut rng);
        let x = Matrix2D::zeros(2, 2);
        match layer.forward(&x) {
            Err(Error::SequenceTooShort { needed: 3, got: 2, .. }) => {}
            other => panic!("expected SequenceTooShort, got {other:?}"),
        }
    }

    #[test]
    fn output_shape_contract() {
        let mut rng = SeededRng::new(3);
        let layer = Conv1dLayer::new(4, 6, 3, Activation::Tanh, &mut rng);
        let x = Matrix2D::init(10, 4, InitScheme::UniformScaled, &mut rng);
        let (out, _) = layer.forward(&x).unwrap();
        assert_eq!(out.shape(), (8, 6));
    }

    #[test]
    fn backward_matches_finite_differences() {
        for (seed, activation) in [(11, Activation::Relu), (12, Activation::Tanh)] {
            let mut rng = SeededRng::new(seed);
            let layer = Conv1dLayer::new(3, 2, 2, activation, &mut rng);
            let x = Matrix2D::init(5, 3, InitScheme::UniformScaled, &mut rng);
            let readout = Matrix2D::init(4, 2, InitScheme::UniformScaled, &mut rng);

            let objective = |l: &Conv1dLayer, x: &Matrix2D| -> f64 {
                let (out, _) = l.forward(x).unwrap();
                out.data().iter().zip(readout.data()).map(|(a, b)| a * b).sum()
            };

            let (_, cache) = layer.forward(&x).unwrap();
            let grads = layer.backward(&cache, &readout).unwrap();

            let eps = 1e-5;
            let check = |numeric: f64, analytic: f64, what: String| {
                let denom = numeric.abs().max(analytic.abs()).max(1e-7);
                assert!(
                    (numeric - analytic).abs() / denom <= 1e-4,
                    "{what}: numeric {numeric} vs analytic {analytic}"
                );
            };

            for fi in 0..2 {
                for r in 0..2 {
                    for c in 0..3 {
                        let mut plus = layer.clone();
                        plus.filters[fi].set(r, c, layer.filters[fi].get(r, c) + eps);
                        let mut minus = layer.clone();
                        minus.filters[fi].set(r, c, layer.filters[fi].get(r, c) - eps);
                        let numeric = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * eps);
                        check(numeric, grads.filters[fi].get(r, c), format!("filter{fi}[{r},{c}]"));
                    }
                }
                let mut plus = layer.clone();
                plus.bias.set(0, fi, layer.bias.get(0, fi) + eps);
                let mut minus = layer.clone();
                minus.bias.set(0, fi, layer.bias.get(0, fi) - eps);
                let numeric = (objective(&plus, &x) - objective(&minus, &x)) / (2.0 * eps);
                check(numeric, grads.bias.get(0, fi), format!("bias[{fi}]"));
            }
            for t in 0..5 {
                for c in 0..3 {
                    let mut plus = x.clone();
                    plus.set(t, c, x.get(t, c) + eps);
                    let mut minus = x.clone();
                    minus.set(t, c, x.get(t, c) - eps);
                    let numeric =
                        (objective(&layer, &plus) - objective(&layer, &minus)) / (2.0 * eps);
                    check(numeric, grads.x.get(t, c), format!("x[{t},{c}]"));
                }
            }
        }
    }

    #[test]
    fn maxpool_basic_and_remainder() {
        let x = Matrix2D::from_rows(&[&[1.0], &[3.0], &[2.0], &[5.0]]);
        let (out, _) = maxpool1d(&x, 2).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[3.0], &[5.0]]));

        let x = Matrix2D::from_rows(&[&[1.0], &[2.0], &[3.0]]);
        let (out, _) = maxpool1d(&x, 2).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[2.0]]));
    }

    #[test]
    fn maxpool_tie_routes_to_first_occurrence() {
        let x = Matrix2D::from_rows(&[&[7.0], &[7.0]]);
        let (out, cache) = maxpool1d(&x, 2).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[7.0]]));
        let grad = maxpool1d_backward(&cache, &Matrix2D::from_rows(&[&[1.0]])).unwrap();
        assert_eq!(grad, Matrix2D::from_rows(&[&[1.0], &[0.0]]));
    }

    #[test]
    fn maxpool_too_short_is_an_error() {
        let x = Matrix2D::zeros(1, 2);
        assert!(maxpool1d(&x, 2).is_err());
    }

    #[test]
    fn maxpool_backward_routes_to_argmax() {
        let x = Matrix2D::from_rows(&[&[1.0, 9.0], &[3.0, 0.0], &[2.0, 4.0], &[5.0, 4.0]]);
        let (out, cache) = maxpool1d(&x, 2).unwrap();
        assert_eq!(out, Matrix2D::from_rows(&[&[3.0, 9.0], &[5.0, 4.0]]));
        let upstream = Matrix2D::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let grad = maxpool1d_backward(&cache, &upstream).unwrap();
        assert_eq!(
            grad,
            Matrix2D::from_rows(&[&[0.0, 2.0], &[1.0, 0.0], &[0.0, 4.0], &[3.0, 0.0]])
        );
    }
}
