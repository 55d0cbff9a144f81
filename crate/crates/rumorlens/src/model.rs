//! The three classifier architectures, the loss, and SGD training.
//!
//! All variants share the pipeline skeleton `embedding -> ... -> LSTM ->
//! sigmoid head`; they differ only in what sits between the embedding and
//! the recurrence:
//!
//! * `lstm` - nothing,
//! * `lstm_dropout` - inverted dropout on the embedding output,
//! * `lstm_cnn` - a valid 1D convolution followed by max pooling.
//!
//! Training is plain minibatch SGD on the mean binary cross entropy, with
//! gradients averaged over the batch so the learning rate does not depend
//! on the batch size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{
    dropout, dropout_backward, maxpool1d, maxpool1d_backward, Activation, Conv1dLayer, ConvCache,
    DenseCache, DenseSigmoid, DropoutCache, DropoutSpec, EmbeddingCache, EmbeddingLayer,
    LstmCache, LstmGrads, LstmLayer, Mode, PoolCache,
};
use crate::rng::SeededRng;
use crate::tensor::Matrix2D;
use crate::text::EncodedExample;

/// Offset applied to the model seed to decorrelate the training-time
/// stream (shuffling, dropout masks) from parameter initialization.
const TRAIN_STREAM: u64 = 0x5452_4149_4e00;

/// Architecture selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Lstm,
    LstmDropout,
    LstmCnn,
}

impl Variant {
    pub fn parse(s: &str) -> Option<Variant> {
        match s {
            "lstm" => Some(Variant::Lstm),
            "lstm_dropout" => Some(Variant::LstmDropout),
            "lstm_cnn" => Some(Variant::LstmCnn),
            _ => None,
        }
    }

    pub const ALL: [Variant; 3] = [Variant::Lstm, Variant::LstmDropout, Variant::LstmCnn];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lstm => "lstm",
            Variant::LstmDropout => "lstm_dropout",
            Variant::LstmCnn => "lstm_cnn",
        }
    }

    /// Display name used in report tables.
    pub fn technique(self) -> &'static str {
        match self {
            Variant::Lstm => "LSTM",
            Variant::LstmDropout => "LSTMDrop",
            Variant::LstmCnn => "LSTM-CNN",
        }
    }
}

/// Everything needed to construct a model deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub max_len: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    /// Only consumed by `lstm_dropout`; the other variants run at rate 0.
    pub dropout_rate: f64,
    pub n_filters: usize,
    pub kernel_width: usize,
    pub pool: usize,
    pub conv_activation: Activation,
    pub seed: u64,
}

impl ModelConfig {
    /// Spec-level defaults; callers override fields as needed.
    pub fn new(variant: Variant, vocab_size: usize, max_len: usize) -> Self {
        ModelConfig {
            variant,
            vocab_size,
            max_len,
            embed_dim: 32,
            hidden: 64,
            dropout_rate: 0.2,
            n_filters: 32,
            kernel_width: 3,
            pool: 2,
            conv_activation: Activation::Relu,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::Config("vocab_size must be at least 2 (PAD and OOV)".into()));
        }
        if self.max_len < 1 {
            return Err(Error::Config("max_len must be at least 1".into()));
        }
        if self.embed_dim < 1 || self.hidden < 1 {
            return Err(Error::Config("embed_dim and hidden must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        if self.variant == Variant::LstmCnn {
            if self.n_filters < 1 || self.kernel_width < 1 || self.pool < 1 {
                return Err(Error::Config(
                    "n_filters, kernel_width and pool must be at least 1".into(),
                ));
            }
            if self.max_len < self.kernel_width {
                return Err(Error::Config(format!(
                    "max_len {} is shorter than kernel_width {}",
                    self.max_len, self.kernel_width
                )));
            }
            if self.max_len - self.kernel_width + 1 < self.pool {
                return Err(Error::Config(format!(
                    "conv output length {} is shorter than pool {}",
                    self.max_len - self.kernel_width + 1,
                    self.pool
                )));
            }
        }
        Ok(())
    }

    /// Sequence length the LSTM actually consumes.
    pub fn lstm_steps(&self) -> usize {
        match self.variant {
            Variant::LstmCnn => (self.max_len - self.kernel_width + 1) / self.pool,
            _ => self.max_len,
        }
    }

    /// Feature dimension of each LSTM input step.
    pub fn lstm_in_dim(&self) -> usize {
        match self.variant {
            Variant::LstmCnn => self.n_filters,
            _ => self.embed_dim,
        }
    }
}

/// A fully wired classifier.
#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    embedding: EmbeddingLayer,
    conv: Option<Conv1dLayer>,
    lstm: LstmLayer,
    head: DenseSigmoid,
    mode: Mode,
}

/// Per-example caches collected during a forward pass.
pub struct ExampleCache {
    embedding: EmbeddingCache,
    dropout: Option<DropoutCache>,
    conv: Option<ConvCache>,
    pool: Option<PoolCache>,
    lstm: LstmCache,
    dense: DenseCache,
}

/// Probabilities plus everything backward needs.
pub struct ForwardPass {
    pub probs: Vec<f64>,
    caches: Vec<ExampleCache>,
}

/// Accumulated parameter gradients, averaged over a batch.
pub struct ModelGrads {
    embedding: Matrix2D,
    conv_filters: Vec<Matrix2D>,
    conv_bias: Option<Matrix2D>,
    lstm: LstmGrads,
    head_w: Matrix2D,
    head_b: f64,
}

/// Builds the variant's pipeline with seeded initialization. The same
/// config (seed included) always yields bit-identical parameters.
pub fn build_model(config: &ModelConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let embedding = EmbeddingLayer::new(config.vocab_size, config.embed_dim, &mut rng);
    let conv = match config.variant {
        Variant::LstmCnn => Some(Conv1dLayer::new(
            config.embed_dim,
            config.n_filters,
            config.kernel_width,
            config.conv_activation,
            &mut rng,
        )),
        _ => None,
    };
    let lstm = LstmLayer::new(config.lstm_in_dim(), config.hidden, &mut rng);
    let head = DenseSigmoid::new(config.hidden, &mut rng);
    Ok(Model { config: config.clone(), embedding, conv, lstm, head, mode: Mode::Eval })
}

impl Model {
    /// Reassembles a model from persisted parts, validating every shape
    /// against the config.
    pub fn from_parts(
        config: ModelConfig,
        embedding: EmbeddingLayer,
        conv: Option<Conv1dLayer>,
        lstm: LstmLayer,
        head: DenseSigmoid,
    ) -> Result<Model> {
        config.validate().map_err(|e| Error::CorruptModel(e.to_string()))?;
        let mut consistent = embedding.vocab_size() == config.vocab_size
            && embedding.embed_dim() == config.embed_dim
            && lstm.in_dim() == config.lstm_in_dim()
            && lstm.hidden() == config.hidden
            && head.hidden() == config.hidden
            && conv.is_some() == (config.variant == Variant::LstmCnn);
        if let Some(conv) = &conv {
            consistent = consistent
                && conv.n_filters() == config.n_filters
                && conv.kernel_width() == config.kernel_width
                && conv.in_dim() == config.embed_dim
                && conv.filters.iter().all(|f| f.shape() == (config.kernel_width, config.embed_dim));
        }
        if !consistent {
            return Err(Error::CorruptModel(
                "parameter shapes are inconsistent with the stored config".into(),
            ));
        }
        Ok(Model { config, embedding, conv, lstm, head, mode: Mode::Eval })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn embedding(&self) -> &EmbeddingLayer {
        &self.embedding
    }

    pub fn conv(&self) -> Option<&Conv1dLayer> {
        self.conv.as_ref()
    }

    pub fn lstm(&self) -> &LstmLayer {
        &self.lstm
    }

    pub fn head(&self) -> &DenseSigmoid {
        &self.head
    }

    /// Effective dropout rate given the variant.
    fn dropout_rate(&self) -> f64 {
        match self.config.variant {
            Variant::LstmDropout => self.config.dropout_rate,
            _ => 0.0,
        }
    }

    /// Runs the configured pipeline over each example independently. In
    /// train mode `rng` drives the dropout masks; in eval mode it is not
    /// touched and dropout is the identity.
    pub fn forward(&self, batch: &[EncodedExample], rng: &mut SeededRng) -> Result<ForwardPass> {
        let mut probs = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        let spec = DropoutSpec::new(self.dropout_rate(), self.mode);
        for example in batch {
            if example.indices.len() != self.config.max_len {
                return Err(Error::Shape {
                    op: "model_forward",
                    detail: format!(
                        "example has {} indices, model expects max_len {}",
                        example.indices.len(),
                        self.config.max_len
                    ),
                });
            }
            let (embedded, emb_cache) = self.embedding.forward(&example.indices)?;
            let (dropped, drop_cache) = match self.config.variant {
                Variant::LstmDropout => {
                    let (d, c) = dropout(&embedded, &spec, rng);
                    (d, Some(c))
                }
                _ => (embedded, None),
            };
            let (lstm_in, conv_cache, pool_cache) = match &self.conv {
                Some(conv) => {
                    let (conv_out, c_cache) = conv.forward(&dropped)?;
                    let (pooled, p_cache) = maxpool1d(&conv_out, self.config.pool)?;
                    (pooled, Some(c_cache), Some(p_cache))
                }
                None => (dropped, None, None),
            };
            let (h_last, lstm_cache) = self.lstm.forward(&lstm_in)?;
            let (p, dense_cache) = self.head.forward(&h_last)?;
            probs.push(p);
            caches.push(ExampleCache {
                embedding: emb_cache,
                dropout: drop_cache,
                conv: conv_cache,
                pool: pool_cache,
                lstm: lstm_cache,
                dense: dense_cache,
            });
        }
        Ok(ForwardPass { probs, caches })
    }

    /// Eval-mode probabilities; the model must not be in train mode.
    pub fn predict(&self, batch: &[EncodedExample]) -> Result<Vec<f64>> {
        assert_eq!(self.mode, Mode::Eval, "predict requires eval mode");
        let mut rng = SeededRng::new(0); // untouched in eval mode
        Ok(self.forward(batch, &mut rng)?.probs)
    }

    /// Backward through the whole pipeline for every example, producing
    /// batch-mean gradients.
    fn backward(&self, pass: &ForwardPass, d_probs: &[f64]) -> Result<ModelGrads> {
        let mut grads = ModelGrads {
            embedding: Matrix2D::zeros(self.config.vocab_size, self.config.embed_dim),
            conv_filters: self
                .conv
                .as_ref()
                .map(|c| {
                    c.filters
                        .iter()
                        .map(|f| Matrix2D::zeros(f.rows(), f.cols()))
                        .collect()
                })
                .unwrap_or_default(),
            conv_bias: self.conv.as_ref().map(|c| Matrix2D::zeros(1, c.n_filters())),
            lstm: {
                let hidden = self.config.hidden;
                let in_dim = self.config.lstm_in_dim();
                LstmGrads {
                    w_i: Matrix2D::zeros(in_dim, hidden),
                    w_f: Matrix2D::zeros(in_dim, hidden),
                    w_o: Matrix2D::zeros(in_dim, hidden),
                    w_g: Matrix2D::zeros(in_dim, hidden),
                    u_i: Matrix2D::zeros(hidden, hidden),
                    u_f: Matrix2D::zeros(hidden, hidden),
                    u_o: Matrix2D::zeros(hidden, hidden),
                    u_g: Matrix2D::zeros(hidden, hidden),
                    b_i: Matrix2D::zeros(1, hidden),
                    b_f: Matrix2D::zeros(1, hidden),
                    b_o: Matrix2D::zeros(1, hidden),
                    b_g: Matrix2D::zeros(1, hidden),
                    x: Matrix2D::zeros(0, 0),
                }
            },
            head_w: Matrix2D::zeros(self.config.hidden, 1),
            head_b: 0.0,
        };

        for (cache, &d_p) in pass.caches.iter().zip(d_probs) {
            let (grad_w, grad_b, grad_h) = self.head.backward(&cache.dense, d_p);
            grads.head_w.axpy(1.0, &grad_w)?;
            grads.head_b += grad_b;

            let lstm_grads = self.lstm.backward(&cache.lstm, &grad_h)?;
            for (acc, g) in grads.lstm.blocks_mut().into_iter().zip(lstm_grads.blocks()) {
                acc.axpy(1.0, g)?;
            }

            let grad_embedded = match (&self.conv, &cache.conv, &cache.pool) {
                (Some(conv), Some(conv_cache), Some(pool_cache)) => {
                    let grad_pooled = maxpool1d_backward(pool_cache, &lstm_grads.x)?;
                    let conv_grads = conv.backward(conv_cache, &grad_pooled)?;
                    for (acc, g) in grads.conv_filters.iter_mut().zip(&conv_grads.filters) {
                        acc.axpy(1.0, g)?;
                    }
                    grads
                        .conv_bias
                        .as_mut()
                        .expect("bias grad allocated with conv")
                        .axpy(1.0, &conv_grads.bias)?;
                    conv_grads.x
                }
                _ => lstm_grads.x,
            };

            let grad_embedded = match &cache.dropout {
                Some(drop_cache) => dropout_backward(drop_cache, &grad_embedded),
                None => grad_embedded,
            };

            grads
                .embedding
                .axpy(1.0, &self.embedding.backward(&cache.embedding, &grad_embedded))?;
        }
        Ok(grads)
    }

    /// One SGD step on one minibatch: forward, mean BCE, full backward,
    /// `theta -= lr * grad`. Returns the batch loss. The embedding PAD row
    /// receives no update.
    pub fn train_step(
        &mut self,
        batch: &[EncodedExample],
        learning_rate: f64,
        rng: &mut SeededRng,
    ) -> Result<f64> {
        assert_eq!(self.mode, Mode::Train, "train_step requires train mode");
        assert!(learning_rate >= 0.0, "learning rate must be non-negative");
        let pass = self.forward(batch, rng)?;
        let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
        let (loss, d_probs) = bce_loss(&pass.probs, &labels)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch: 0, batch: 0, fold: None });
        }
        let grads = self.backward(&pass, &d_probs)?;
        self.apply_sgd(&grads, learning_rate)?;
        Ok(loss)
    }

    fn apply_sgd(&mut self, grads: &ModelGrads, lr: f64) -> Result<()> {
        // Gradients were accumulated summed over dL where L is already the
        // batch mean, so no extra 1/N here.
        self.embedding.table_mut().axpy(-lr, &grads.embedding)?;
        debug_assert!(self
            .embedding
            .table()
            .row(crate::text::PAD_INDEX)
            .iter()
            .all(|&v| v == 0.0));
        if let Some(conv) = &mut self.conv {
            for (f, g) in conv.filters.iter_mut().zip(&grads.conv_filters) {
                f.axpy(-lr, g)?;
            }
            conv.bias.axpy(-lr, grads.conv_bias.as_ref().expect("conv bias grad"))?;
        }
        for (p, g) in self.lstm.params_mut().into_iter().zip(grads.lstm.blocks()) {
            p.axpy(-lr, g)?;
        }
        self.head.w.axpy(-lr, &grads.head_w)?;
        self.head.b -= lr * grads.head_b;
        Ok(())
    }

    /// Full training loop: shuffles example order each epoch, walks
    /// minibatches of `batch_size` (the last, possibly smaller, batch is
    /// kept), and returns the mean loss per epoch. Divergence errors carry
    /// the offending epoch and batch index.
    pub fn fit(
        &mut self,
        examples: &[EncodedExample],
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        mut progress: Option<&mut dyn FnMut(usize, f64)>,
    ) -> Result<Vec<f64>> {
        assert!(batch_size >= 1 && epochs >= 1);
        self.set_mode(Mode::Train);
        let mut rng = SeededRng::new(self.config.seed ^ TRAIN_STREAM);
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut epoch_losses = Vec::with_capacity(epochs);
        for epoch in 0..epochs {
            rng.shuffle(&mut order);
            let mut total = 0.0;
            let mut batches = 0usize;
            for (batch_idx, chunk) in order.chunks(batch_size).enumerate() {
                let batch: Vec<EncodedExample> =
                    chunk.iter().map(|&i| examples[i].clone()).collect();
                let loss = self.train_step(&batch, learning_rate, &mut rng).map_err(|e| {
                    match e {
                        Error::TrainingDiverged { .. } => {
                            Error::TrainingDiverged { epoch, batch: batch_idx, fold: None }
                        }
                        other => other,
                    }
                })?;
                total += loss;
                batches += 1;
            }
            let mean = total / batches as f64;
            epoch_losses.push(mean);
            if let Some(report) = progress.as_deref_mut() {
                report(epoch, mean);
            }
        }
        self.set_mode(Mode::Eval);
        Ok(epoch_losses)
    }

    /// Flat view of every trainable parameter (PAD embedding row excluded),
    /// paired with [`Model::grads_flat`] for gradient checking.
    pub fn trainable_param_count(&self) -> usize {
        let mut n = (self.config.vocab_size - 1) * self.config.embed_dim;
        if let Some(conv) = &self.conv {
            n += conv.filters.len() * conv.filters[0].data().len() + conv.n_filters();
        }
        n += self.lstm.params().iter().map(|p| p.data().len()).sum::<usize>();
        n += self.head.w.data().len() + 1;
        n
    }

    /// Reads or perturbs trainable parameter `i`; used by the
    /// finite-difference tests. Ordering matches [`Model::grads_flat`].
    pub fn param_at(&mut self, i: usize) -> &mut f64 {
        let embed_dim = self.config.embed_dim;
        let mut idx = i;
        let embed_entries = (self.config.vocab_size - 1) * embed_dim;
        if idx < embed_entries {
            // skip the frozen PAD row
            return &mut self.embedding.table_mut().data_mut()[embed_dim + idx];
        }
        idx -= embed_entries;
        if let Some(conv) = &mut self.conv {
            for f in &mut conv.filters {
                let n = f.data().len();
                if idx < n {
                    return &mut f.data_mut()[idx];
                }
                idx -= n;
            }
            let n = conv.bias.data().len();
            if idx < n {
                return &mut conv.bias.data_mut()[idx];
            }
            idx -= n;
        }
        for p in self.lstm.params_mut() {
            let n = p.data().len();
            if idx < n {
                return &mut p.data_mut()[idx];
            }
            idx -= n;
        }
        let n = self.head.w.data().len();
        if idx < n {
            return &mut self.head.w.data_mut()[idx];
        }
        idx -= n;
        assert_eq!(idx, 0, "parameter index out of range");
        &mut self.head.b
    }

    /// Mean-batch loss and the flat analytic gradient, ordered to match
    /// [`Model::param_at`]. Dropout masks are drawn from `rng`, so passing
    /// clones of one generator makes repeated calls comparable.
    pub fn loss_and_grads_flat(
        &self,
        batch: &[EncodedExample],
        rng: &mut SeededRng,
    ) -> Result<(f64, Vec<f64>)> {
        let pass = self.forward(batch, rng)?;
        let labels: Vec<u8> = batch.iter().map(|e| e.label).collect();
        let (loss, d_probs) = bce_loss(&pass.probs, &labels)?;
        let grads = self.backward(&pass, &d_probs)?;

        let mut flat =
            Vec::with_capacity(self.trainable_param_count());
        flat.extend_from_slice(&grads.embedding.data()[self.config.embed_dim..]);
        for f in &grads.conv_filters {
            flat.extend_from_slice(f.data());
        }
        if let Some(bias) = &grads.conv_bias {
            flat.extend_from_slice(bias.data());
        }
        for b in grads.lstm.blocks() {
            flat.extend_from_slice(b.data());
        }
        flat.extend_from_slice(grads.head_w.data());
        flat.push(grads.head_b);
        Ok((loss, flat))
    }
}

/// Mean binary cross entropy with probability clamping, plus the gradient
/// of the mean loss with respect to each probability.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != labels.len() {
        return Err(Error::Shape {
            op: "bce_loss",
            detail: format!("{} probabilities vs {} labels", probs.len(), labels.len()),
        });
    }
    if probs.is_empty() {
        return Err(Error::Shape { op: "bce_loss", detail: "empty batch".into() });
    }
    const EPS: f64 = 1e-12;
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut d_probs = Vec::with_capacity(probs.len());
    for (&p, &y) in probs.iter().zip(labels) {
        debug_assert!(y <= 1, "labels must be binary");
        let p = p.clamp(EPS, 1.0 - EPS);
        let y = y as f64;
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        d_probs.push((-(y / p) + (1.0 - y) / (1.0 - p)) / n);
    }
    Ok((loss / n, d_probs))
}
