//! LSTM cell with full backpropagation through time.
//!
//! The forget-gate formulation, in row-vector convention with `x_t` of shape
//! `(1, in_dim)` and `h_t`, `c_t` of shape `(1, hidden)`:
//!
//! ```text
//! i_t = sigmoid(x_t W_i + h_{t-1} U_i + b_i)
//! f_t = sigmoid(x_t W_f + h_{t-1} U_f + b_f)
//! o_t = sigmoid(x_t W_o + h_{t-1} U_o + b_o)
//! g_t = tanh   (x_t W_g + h_{t-1} U_g + b_g)
//! c_t = f_t * c_{t-1} + i_t * g_t
//! h_t = o_t * tanh(c_t)
//! ```
//!
//! with `h_0 = c_0 = 0`. The forward pass returns the final hidden state
//! `h_T`; the backward pass propagates a gradient on `h_T` through all `T`
//! steps and yields gradients for the twelve parameter blocks and the input.

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{elementwise, InitScheme, MapFn, Matrix2D};

/// Parameter block names in the canonical ordering used by
/// [`LstmLayer::params`] and model persistence.
pub const LSTM_BLOCK_NAMES: [&str; 12] = [
    "w_i", "w_f", "w_o", "w_g", "u_i", "u_f", "u_o", "u_g", "b_i", "b_f", "b_o", "b_g",
];

/// LSTM parameters: four input maps `(in_dim, hidden)`, four recurrent maps
/// `(hidden, hidden)` and four biases `(1, hidden)`.
#[derive(Debug, Clone)]
pub struct LstmLayer {
    pub w_i: Matrix2D,
    pub w_f: Matrix2D,
    pub w_o: Matrix2D,
    pub w_g: Matrix2D,
    pub u_i: Matrix2D,
    pub u_f: Matrix2D,
    pub u_o: Matrix2D,
    pub u_g: Matrix2D,
    pub b_i: Matrix2D,
    pub b_f: Matrix2D,
    pub b_o: Matrix2D,
    pub b_g: Matrix2D,
}

struct Step {
    h_prev: Matrix2D,
    c_prev: Matrix2D,
    i: Matrix2D,
    f: Matrix2D,
    o: Matrix2D,
    g: Matrix2D,
    tanh_c: Matrix2D,
}

/// Everything the backward pass needs: the input and per-step activations.
pub struct LstmCache {
    x: Matrix2D,
    steps: Vec<Step>,
}

/// Gradients for the twelve parameter blocks plus the layer input.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub w_i: Matrix2D,
    pub w_f: Matrix2D,
    pub w_o: Matrix2D,
    pub w_g: Matrix2D,
    pub u_i: Matrix2D,
    pub u_f: Matrix2D,
    pub u_o: Matrix2D,
    pub u_g: Matrix2D,
    pub b_i: Matrix2D,
    pub b_f: Matrix2D,
    pub b_o: Matrix2D,
    pub b_g: Matrix2D,
    pub x: Matrix2D,
}

impl LstmLayer {
    /// Uniform-scaled init for the weight matrices, zero biases except the
    /// forget-gate bias, which starts at +1.0 so early training does not
    /// immediately forget the cell state.
    pub fn new(in_dim: usize, hidden: usize, rng: &mut SeededRng) -> Self {
        let w = |rng: &mut SeededRng| Matrix2D::init(in_dim, hidden, InitScheme::UniformScaled, rng);
        let u = |rng: &mut SeededRng| Matrix2D::init(hidden, hidden, InitScheme::UniformScaled, rng);
        let mut b_f = Matrix2D::zeros(1, hidden);
        b_f.data_mut().fill(1.0);
        LstmLayer {
            w_i: w(rng),
            w_f: w(rng),
            w_o: w(rng),
            w_g: w(rng),
            u_i: u(rng),
            u_f: u(rng),
            u_o: u(rng),
            u_g: u(rng),
            b_i: Matrix2D::zeros(1, hidden),
            b_f,
            b_o: Matrix2D::zeros(1, hidden),
            b_g: Matrix2D::zeros(1, hidden),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_i.rows()
    }

    pub fn hidden(&self) -> usize {
        self.w_i.cols()
    }

    /// The twelve parameter blocks in the canonical order of
    /// [`LSTM_BLOCK_NAMES`].
    pub fn params(&self) -> [&Matrix2D; 12] {
        [
            &self.w_i, &self.w_f, &self.w_o, &self.w_g, &self.u_i, &self.u_f, &self.u_o,
            &self.u_g, &self.b_i, &self.b_f, &self.b_o, &self.b_g,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Matrix2D; 12] {
        [
            &mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_g, &mut self.u_i,
            &mut self.u_f, &mut self.u_o, &mut self.u_g, &mut self.b_i, &mut self.b_f,
            &mut self.b_o, &mut self.b_g,
        ]
    }

    /// Runs the recurrence over the `T` rows of `x` and returns `h_T`.
    pub fn forward(&self, x: &Matrix2D) -> Result<(Matrix2D, LstmCache)> {
        if x.cols() != self.in_dim() {
            return Err(Error::Shape {
                op: "lstm_forward",
                detail: format!(
                    "input is {}x{}, layer expects feature dim {}",
                    x.rows(),
                    x.cols(),
                    self.in_dim()
                ),
            });
        }
        if x.rows() == 0 {
            return Err(Error::Shape {
                op: "lstm_forward",
                detail: "sequence length must be at least 1".into(),
            });
        }
        let hidden = self.hidden();
        let mut h = Matrix2D::zeros(1, hidden);
        let mut c = Matrix2D::zeros(1, hidden);
        let mut steps = Vec::with_capacity(x.rows());

        for t in 0..x.rows() {
            let x_t = Matrix2D::from_vec(1, x.cols(), x.row(t).to_vec())?;
            let pre = |w: &Matrix2D, u: &Matrix2D, b: &Matrix2D| -> Result<Matrix2D> {
                x_t.matmul(w)?.add(&h.matmul(u)?)?.add(b)
            };
            let i = elementwise(MapFn::Sigmoid, &pre(&self.w_i, &self.u_i, &self.b_i)?);
            let f = elementwise(MapFn::Sigmoid, &pre(&self.w_f, &self.u_f, &self.b_f)?);
            let o = elementwise(MapFn::Sigmoid, &pre(&self.w_o, &self.u_o, &self.b_o)?);
            let g = elementwise(MapFn::Tanh, &pre(&self.w_g, &self.u_g, &self.b_g)?);

            let c_next = f.hadamard(&c)?.add(&i.hadamard(&g)?)?;
            let tanh_c = elementwise(MapFn::Tanh, &c_next);
            let h_next = o.hadamard(&tanh_c)?;

            steps.push(Step { h_prev: h, c_prev: c, i, f, o, g, tanh_c });
            h = h_next;
            c = c_next;
        }
        Ok((h, LstmCache { x: x.clone(), steps }))
    }

    /// Backpropagation through time from a gradient on `h_T`.
    pub fn backward(&self, cache: &LstmCache, grad_h_last: &Matrix2D) -> Result<LstmGrads> {
        let hidden = self.hidden();
        if grad_h_last.shape() != (1, hidden) {
            return Err(Error::Shape {
                op: "lstm_backward",
                detail: format!(
                    "gradient is {}x{}, expected 1x{hidden}",
                    grad_h_last.rows(),
                    grad_h_last.cols()
                ),
            });
        }

        let mut grads = LstmGrads {
            w_i: Matrix2D::zeros(self.in_dim(), hidden),
            w_f: Matrix2D::zeros(self.in_dim(), hidden),
            w_o: Matrix2D::zeros(self.in_dim(), hidden),
            w_g: Matrix2D::zeros(self.in_dim(), hidden),
            u_i: Matrix2D::zeros(hidden, hidden),
            u_f: Matrix2D::zeros(hidden, hidden),
            u_o: Matrix2D::zeros(hidden, hidden),
            u_g: Matrix2D::zeros(hidden, hidden),
            b_i: Matrix2D::zeros(1, hidden),
            b_f: Matrix2D::zeros(1, hidden),
            b_o: Matrix2D::zeros(1, hidden),
            b_g: Matrix2D::zeros(1, hidden),
            x: Matrix2D::zeros(cache.x.rows(), cache.x.cols()),
        };

        let mut dh = grad_h_last.clone();
        let mut dc = Matrix2D::zeros(1, hidden);

        for (t, step) in cache.steps.iter().enumerate().rev() {
            // h_t = o * tanh(c_t)
            let d_o = dh.hadamard(&step.tanh_c)?;
            let tanh_deriv = elementwise(MapFn::TanhDeriv, &step.tanh_c);
            dc.axpy(1.0, &dh.hadamard(&step.o)?.hadamard(&tanh_deriv)?)?;

            // c_t = f * c_prev + i * g
            let d_i = dc.hadamard(&step.g)?;
            let d_g = dc.hadamard(&step.i)?;
            let d_f = dc.hadamard(&step.c_prev)?;

            let da_i = d_i.hadamard(&elementwise(MapFn::SigmoidDeriv, &step.i))?;
            let da_f = d_f.hadamard(&elementwise(MapFn::SigmoidDeriv, &step.f))?;
            let da_o = d_o.hadamard(&elementwise(MapFn::SigmoidDeriv, &step.o))?;
            let da_g = d_g.hadamard(&elementwise(MapFn::TanhDeriv, &step.g))?;

            let x_t = cache.x.row(t);
            let h_prev = step.h_prev.row(0);
            for (dw, du, db, da) in [
                (&mut grads.w_i, &mut grads.u_i, &mut grads.b_i, &da_i),
                (&mut grads.w_f, &mut grads.u_f, &mut grads.b_f, &da_f),
                (&mut grads.w_o, &mut grads.u_o, &mut grads.b_o, &da_o),
                (&mut grads.w_g, &mut grads.u_g, &mut grads.b_g, &da_g),
            ] {
                dw.add_outer(x_t, da.row(0));
                du.add_outer(h_prev, da.row(0));
                db.axpy(1.0, da)?;
            }

            // dx_t = sum over gates of da W^T; dh_prev = sum of da U^T
            let mut dx_t = da_i.matmul_bt(&self.w_i)?;
            dx_t.axpy(1.0, &da_f.matmul_bt(&self.w_f)?)?;
            dx_t.axpy(1.0, &da_o.matmul_bt(&self.w_o)?)?;
            dx_t.axpy(1.0, &da_g.matmul_bt(&self.w_g)?)?;
            grads.x.row_mut(t).copy_from_slice(dx_t.row(0));

            let mut dh_prev = da_i.matmul_bt(&self.u_i)?;
            dh_prev.axpy(1.0, &da_f.matmul_bt(&self.u_f)?)?;
            dh_prev.axpy(1.0, &da_o.matmul_bt(&self.u_o)?)?;
            dh_prev.axpy(1.0, &da_g.matmul_bt(&self.u_g)?)?;

            dh = dh_prev;
            dc = dc.hadamard(&step.f)?;
        }
        Ok(grads)
    }
}

impl LstmGrads {
    /// Gradient blocks in the same order as [`LstmLayer::params`].
    pub fn blocks(&self) -> [&Matrix2D; 12] {
        [
            &self.w_i, &self.w_f, &self.w_o, &self.w_g, &self.u_i, &self.u_f, &self.u_o,
            &self.u_g, &self.b_i, &self.b_f, &self.b_o, &self.b_g,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix2D; 12] {
        [
            &mut self.w_i, &mut self.w_f, &mut self.w_o, &mut self.w_g, &mut self.u_i,
            &mut self.u_f, &mut self.u_o, &mut self.u_g, &mut self.b_i, &mut self.b_f,
            &mut self.b_o, &mut self.b_g,
        ]
    }
}
