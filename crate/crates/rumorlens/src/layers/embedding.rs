use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::tensor::{InitScheme, Matrix2D};
use crate::text::PAD_INDEX;

/// Token embedding table of shape `(vocab_size, embed_dim)`.
///
/// Row 0 is the padding row: it is zero at construction, receives no
/// gradient, and is never updated, so padded positions contribute nothing
/// to the layers above.
#[derive(Debug, Clone)]
pub struct EmbeddingLayer {
    table: Matrix2D,
}

/// Forward cache: the looked-up indices.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    indices: Vec<usize>,
}

impl EmbeddingLayer {
    pub fn new(vocab_size: usize, embed_dim: usize, rng: &mut SeededRng) -> Self {
        let mut table = Matrix2D::init(vocab_size, embed_dim, InitScheme::UniformScaled, rng);
        table.row_mut(PAD_INDEX).fill(0.0);
        EmbeddingLayer { table }
    }

    pub fn from_table(table: Matrix2D) -> Self {
        EmbeddingLayer { table }
    }

    pub fn table(&self) -> &Matrix2D {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut Matrix2D {
        &mut self.table
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn embed_dim(&self) -> usize {
        self.table.cols()
    }

    /// Looks up each index; output row `t` is table row `indices[t]`.
    pub fn forward(&self, indices: &[usize]) -> Result<(Matrix2D, EmbeddingCache)> {
        let mut out = Matrix2D::zeros(indices.len(), self.embed_dim());
        for (t, &idx) in indices.iter().enumerate() {
            if idx >= self.vocab_size() {
                return Err(Error::Encoding(format!(
                    "token index {idx} out of range for vocabulary of size {}",
                    self.vocab_size()
                )));
            }
            out.row_mut(t).copy_from_slice(self.table.row(idx));
        }
        Ok((out, EmbeddingCache { indices: indices.to_vec() }))
    }

    /// Scatters the upstream gradient back into table rows. Repeated indices
    /// accumulate; the PAD row is skipped and stays zero.
    pub fn backward(&self, cache: &EmbeddingCache, grad_out: &Matrix2D) -> Matrix2D {
        let mut grad = Matrix2D::zeros(self.vocab_size(), self.embed_dim());
        for (t, &idx) in cache.indices.iter().enumerate() {
            if idx == PAD_INDEX {
                continue;
            }
            let g = grad_out.row(t);
            for (dst, &src) in grad.row_mut(idx).iter_mut().zip(g) {
                *dst += src;
            }
        }
        grad
    }
}
