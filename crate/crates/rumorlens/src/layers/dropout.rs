//! Inverted dropout on activations.

use crate::layers::Mode;
use crate::rng::SeededRng;
use crate::tensor::Matrix2D;

/// Dropout configuration. `rate` is the probability of zeroing an entry and
/// must be strictly below 1.
#[derive(Debug, Clone, Copy)]
pub struct DropoutSpec {
    pub rate: f64,
    pub mode: Mode,
}

impl DropoutSpec {
    pub fn new(rate: f64, mode: Mode) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
        DropoutSpec { rate, mode }
    }
}

/// Multiplier mask from the forward pass; `None` means the pass was an
/// identity (eval mode or rate 0) and backward is an identity too.
pub struct DropoutCache {
    mask: Option<Matrix2D>,
}

/// Eval mode and rate 0 return the input bit-for-bit and consume no
/// randomness. In train mode each entry is kept with probability
/// `1 - rate` and scaled by `1 / (1 - rate)`, so the expected output equals
/// the input and evaluation needs no rescaling.
pub fn dropout(x: &Matrix2D, spec: &DropoutSpec, rng: &mut SeededRng) -> (Matrix2D, DropoutCache) {
    if spec.mode == Mode::Eval || spec.rate == 0.0 {
        return (x.clone(), DropoutCache { mask: None });
    }
    let keep_scale = 1.0 / (1.0 - spec.rate);
    let mut mask = Matrix2D::zeros(x.rows(), x.cols());
    for m in mask.data_mut() {
        if !rng.chance(spec.rate) {
            *m = keep_scale;
        }
    }
    let out = x.hadamard(&mask).expect("mask shape matches by construction");
    (out, DropoutCache { mask: Some(mask) })
}

/// Applies the cached mask (and scale) to the upstream gradient.
pub fn dropout_backward(cache: &DropoutCache, grad_out: &Matrix2D) -> Matrix2D {
    match &cache.mask {
        None => grad_out.clone(),
        Some(mask) => grad_out.hadamard(mask).expect("mask shape matches by construction"),
    }
}
