use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CnnConfig, EmbeddingMode};
use crate::corpus::{pad_document, PaddedDocument, Vocabulary, PAD};
use crate::embeddings::EmbeddingTable;
use crate::neural::{dot, dropout_mask, matmul_bt, softmax_xent, ConvFilter, Matrix, Mode};
use crate::util::{rng_for, Rng as ChaRng};
use crate::{Error, Result};

const INIT_STREAM: u64 = 0xC0FFEE;

/// Every trainable array of the model. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    /// `filters[g][f]` is filter `f` of length `filter_lengths[g]`.
    pub filters: Vec<Vec<ConvFilter>>,
    /// Length-1 attention filters; empty for the plain CNN.
    pub attention: Vec<ConvFilter>,
    /// `num_features x num_classes`.
    pub softmax_weights: Matrix,
    pub softmax_bias: Vec<f64>,
    /// `V x d`; row [`PAD`] stays zero.
    pub embedding: Matrix,
}

impl CnnParams {
    pub fn zeros_like(&self) -> CnnParams {
        let zero = |f: &ConvFilter| ConvFilter {
            weights: Matrix::zeros(f.length(), f.width()),
            bias: 0.0,
        };
        CnnParams {
            filters: self.filters.iter().map(|g| g.iter().map(zero).collect()).collect(),
            attention: self.attention.iter().map(zero).collect(),
            softmax_weights: Matrix::zeros(self.softmax_weights.rows(), self.softmax_weights.cols()),
            softmax_bias: vec![0.0; self.softmax_bias.len()],
            embedding: Matrix::zeros(self.embedding.rows(), self.embedding.cols()),
        }
    }

    /// Mutable views in canonical order: convolution filters (weights then
    /// bias), attention filters, softmax weights, softmax bias, and the
    /// embedding when `with_embedding` is set.
    pub fn slices_mut(&mut self, with_embedding: bool) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for f in self.filters.iter_mut().flatten().chain(self.attention.iter_mut()) {
            out.push(f.weights.as_mut_slice());
            out.push(std::slice::from_mut(&mut f.bias));
        }
        out.push(self.softmax_weights.as_mut_slice());
        out.push(&mut self.softmax_bias);
        if with_embedding {
            out.push(self.embedding.as_mut_slice());
        }
        out
    }

    pub fn flatten(&self, with_embedding: bool) -> Vec<f64> {
        let mut out = Vec::new();
        for f in self.filters.iter().flatten().chain(self.attention.iter()) {
            out.extend_from_slice(f.weights.as_slice());
            out.push(f.bias);
        }
        out.extend_from_slice(self.softmax_weights.as_slice());
        out.extend_from_slice(&self.softmax_bias);
        if with_embedding {
            out.extend_from_slice(self.embedding.as_slice());
        }
        out
    }

    pub fn assign(&mut self, flat: &[f64], with_embedding: bool) -> Result<()> {
        let mut slices = self.slices_mut(with_embedding);
        let want: usize = slices.iter().map(|s| s.len()).sum();
        if want != flat.len() {
            return Err(Error::Shape(format!("expected {want} parameters, got {}", flat.len())));
        }
        let mut at = 0;
        for s in slices.iter_mut() {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.flatten(true).iter().all(|x| x.is_finite())
    }
}

/// Record of one forward pass, sufficient for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub logits: Vec<f64>,
    /// `[pooled ‖ v_e]` before dropout.
    pub features: Vec<f64>,
    /// Winning window start per filter, grouped by filter length.
    pub argmax: Vec<Vec<usize>>,
    /// Pre-activation value at each winning window.
    pub pre_activation: Vec<Vec<f64>>,
    pub attention: Option<AttentionTrace>,
    pub dropout_mask: Option<Vec<f64>>,
}

impl ForwardPass {
    pub fn predicted(&self) -> usize {
        crate::util::argmax(&self.logits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionTrace {
    /// Per-token attention `v_a`.
    pub v_a: Vec<f64>,
    /// Winning attention filter per token.
    pub columns: Vec<usize>,
    pub pre_activation: Vec<f64>,
    pub v_e: Vec<f64>,
}

/// Filter responses `e_t · W_f[k]` for a set of embedding rows, so that each
/// window's convolution is a sum of `l` table lookups.
pub(crate) struct Projections {
    slot: Vec<usize>,
    /// Per filter length, rows of width `l * m` laid out as `[k * m + f]`.
    groups: Vec<Vec<f64>>,
    /// Rows of width `m_a`.
    attention: Vec<f64>,
}

/// The classifier: parameters plus the vocabulary the embedding rows index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub vocab: Vocabulary,
    /// Content hash of the embedding table the model was initialized from.
    pub embedding_hash: String,
    pub params: CnnParams,
}

impl CnnModel {
    /// Random filters and softmax weights; the embedding is copied from `table`.
    pub fn new(config: CnnConfig, table: &EmbeddingTable) -> Result<Self> {
        config.validate()?;
        let d = table.dim();
        let mut embedding = Matrix::from_vec(
            table.len(),
            d,
            table.input_vectors().iter().map(|&x| x as f64).collect(),
        )?;
        embedding.row_mut(PAD).fill(0.0);
        let mut rng = rng_for(config.seed, INIT_STREAM);
        let m = config.filters_per_length;
        let mut uniform = |rows: usize, cols: usize, bound: f64| {
            let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
            Matrix::from_vec(rows, cols, data).expect("valid shape")
        };
        let filters = config
            .filter_lengths
            .iter()
            .map(|&l| {
                let bound = 1.0 / ((l * d) as f64).sqrt();
                (0..m)
                    .map(|_| ConvFilter {
                        weights: uniform(l, d, bound),
                        bias: 0.0,
                    })
                    .collect()
            })
            .collect();
        let attention = match &config.attention {
            Some(a) => (0..a.num_filters)
                .map(|_| ConvFilter {
                    weights: uniform(1, d, 1.0 / (d as f64).sqrt()),
                    bias: 0.0,
                })
                .collect(),
            None => Vec::new(),
        };
        let features = config.num_conv_features() + if config.attention.is_some() { d } else { 0 };
        let bound = (6.0 / (features + config.num_classes) as f64).sqrt();
        let softmax_weights = uniform(features, config.num_classes, bound);
        let params = CnnParams {
            filters,
            attention,
            softmax_weights,
            softmax_bias: vec![0.0; config.num_classes],
            embedding,
        };
        let model = CnnModel {
            embedding_hash: table.content_hash(),
            vocab: table.vocab().clone(),
            config,
            params,
        };
        model.check_shapes()?;
        Ok(model)
    }

    /// Assembles a model from explicit parameters; shapes are validated.
    pub fn from_parts(config: CnnConfig, vocab: Vocabulary, params: CnnParams) -> Result<Self> {
        config.validate()?;
        let model = CnnModel {
            embedding_hash: String::new(),
            vocab,
            config,
            params,
        };
        model.check_shapes()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.params.embedding.cols()
    }

    pub fn has_attention(&self) -> bool {
        self.config.attention.is_some()
    }

    pub fn num_features(&self) -> usize {
        self.config.num_conv_features() + if self.has_attention() { self.dim() } else { 0 }
    }

    pub fn fine_tunes_embedding(&self) -> bool {
        self.config.embedding_mode == EmbeddingMode::FineTune
    }

    pub fn check_shapes(&self) -> Result<()> {
        let cfg = &self.config;
        let p = &self.params;
        let d = self.dim();
        let shape_err = |m: String| Err(Error::Shape(m));
        if p.embedding.rows() != self.vocab.len() {
            return shape_err(format!(
                "embedding has {} rows but the vocabulary has {} tokens",
                p.embedding.rows(),
                self.vocab.len()
            ));
        }
        if p.embedding.row(PAD).iter().any(|&x| x != 0.0) {
            return Err(Error::Data("the padding embedding row must be zero".into()));
        }
        if p.filters.len() != cfg.filter_lengths.len() {
            return shape_err("one filter group per filter length is required".into());
        }
        for (g, &l) in p.filters.iter().zip(&cfg.filter_lengths) {
            if g.len() != cfg.filters_per_length || g.iter().any(|f| f.length() != l || f.width() != d) {
                return shape_err(format!("filter group of length {l} must hold {} {l}x{d} filters", cfg.filters_per_length));
            }
        }
        let m_a = cfg.attention.as_ref().map_or(0, |a| a.num_filters);
        if p.attention.len() != m_a || p.attention.iter().any(|f| f.length() != 1 || f.width() != d) {
            return shape_err(format!("expected {m_a} attention filters of shape 1x{d}"));
        }
        if p.softmax_weights.shape() != (self.num_features(), cfg.num_classes) || p.softmax_bias.len() != cfg.num_classes
        {
            return shape_err(format!(
                "softmax weights are {:?} but the model has {} features and {} classes",
                p.softmax_weights.shape(),
                self.num_features(),
                cfg.num_classes
            ));
        }
        Ok(())
    }

    fn check_document(&self, doc: &PaddedDocument) -> Result<()> {
        if doc.n() != self.config.n {
            return Err(Error::Shape(format!(
                "document has length {} but the model expects n = {}",
                doc.n(),
                self.config.n
            )));
        }
        if let Some(&i) = doc.indices.iter().find(|&&i| i >= self.vocab.len()) {
            return Err(Error::Shape(format!(
                "token index {i} is outside the model vocabulary of {} entries",
                self.vocab.len()
            )));
        }
        Ok(())
    }

    /// Row-major `n x d` document matrix.
    pub fn document_matrix(&self, doc: &PaddedDocument) -> Matrix {
        let d = self.dim();
        let mut data = Vec::with_capacity(doc.n() * d);
        for &i in &doc.indices {
            data.extend_from_slice(self.params.embedding.row(i));
        }
        Matrix::from_vec(doc.n(), d, data).expect("finite embedding")
    }

    pub(crate) fn projections<I: IntoIterator<Item = usize>>(&self, tokens: I) -> Projections {
        let mut slot = vec![usize::MAX; self.vocab.len()];
        let mut rows = Vec::new();
        for t in tokens {
            if slot[t] == usize::MAX {
                slot[t] = rows.len();
                rows.push(t);
            }
        }
        let e = &self.params.embedding;
        let d = e.cols();
        let gathered: Vec<f64> = rows.iter().flat_map(|&t| e.row(t).iter().copied()).collect();
        let groups = self
            .params
            .filters
            .iter()
            .map(|g| {
                let m = g.len();
                let l = g[0].length();
                let mut packed = Vec::with_capacity(l * m * d);
                for k in 0..l {
                    for filt in g {
                        packed.extend_from_slice(filt.weights.row(k));
                    }
                }
                matmul_bt(&gathered, rows.len(), d, &packed, l * m)
            })
            .collect();
        let packed: Vec<f64> = self.params.attention.iter().flat_map(|f| f.weights.row(0).iter().copied()).collect();
        let attention = matmul_bt(&gathered, rows.len(), d, &packed, self.params.attention.len());
        Projections {
            slot,
            groups,
            attention,
        }
    }

    pub(crate) fn full_projections(&self) -> Projections {
        self.projections(0..self.vocab.len())
    }

    /// One forward pass. `Mode::Train` applies dropout with masks drawn from `rng`.
    pub fn forward(&self, doc: &PaddedDocument, mode: Mode, rng: &mut impl Rng) -> Result<ForwardPass> {
        self.check_document(doc)?;
        let proj = self.projections(doc.indices.iter().copied());
        let mask = self.draw_mask(mode, rng)?;
        Ok(self.forward_with(&proj, doc, mask))
    }

    /// Eval-mode label for raw tokens; out-of-vocabulary tokens map to UNK.
    pub fn predict(&self, tokens: &[String]) -> Result<usize> {
        let doc = pad_document(tokens, &self.vocab, self.config.n)?;
        Ok(self.forward_many(std::slice::from_ref(&doc))?[0].predicted())
    }

    /// Eval-mode forward passes sharing one projection table.
    pub fn forward_many(&self, docs: &[PaddedDocument]) -> Result<Vec<ForwardPass>> {
        for d in docs {
            self.check_document(d)?;
        }
        let proj = if docs.len() * self.config.n > 4 * self.vocab.len() {
            self.full_projections()
        } else {
            self.projections(docs.iter().flat_map(|d| d.indices.iter().copied()))
        };
        Ok(docs.iter().map(|d| self.forward_with(&proj, d, None)).collect())
    }

    pub(crate) fn draw_mask(&self, mode: Mode, rng: &mut impl Rng) -> Result<Option<Vec<f64>>> {
        match mode {
            Mode::Train if self.config.dropout_rate > 0.0 => {
                Ok(Some(dropout_mask(self.num_features(), self.config.dropout_rate, rng)?))
            }
            _ => Ok(None),
        }
    }

    pub(crate) fn forward_with(&self, proj: &Projections, doc: &PaddedDocument, mask: Option<Vec<f64>>) -> ForwardPass {
        let act = self.config.activation;
        let n = doc.n();
        let slots: Vec<usize> = doc.indices.iter().map(|&t| proj.slot[t]).collect();
        let mut features = Vec::with_capacity(self.num_features());
        let mut argmax = Vec::with_capacity(self.params.filters.len());
        let mut pre_activation = Vec::with_capacity(self.params.filters.len());
        let mut acc = Vec::new();
        let last_real = doc.indices.iter().rposition(|&t| t != PAD).map_or(0, |p| p + 1);
        for (g, filters) in self.params.filters.iter().enumerate() {
            let m = filters.len();
            let l = filters[0].length();
            let width = l * m;
            let table = &proj.groups[g];
            let bias: Vec<f64> = filters.iter().map(|f| f.bias).collect();
            let mut best = vec![f64::NEG_INFINITY; m];
            let mut arg = vec![0usize; m];
            let mut pre = vec![0.0; m];
            // Windows starting past the last real token cover only PAD rows and
            // share one value, so the first of them stands in for the rest.
            let real = last_real.min(n - l + 1);
            for i in 0..real {
                acc.clear();
                acc.extend_from_slice(&bias);
                for k in 0..l {
                    let base = slots[i + k] * width + k * m;
                    for (a, p) in acc.iter_mut().zip(&table[base..base + m]) {
                        *a += p;
                    }
                }
                for f in 0..m {
                    let v = act.apply(acc[f]);
                    if v > best[f] {
                        best[f] = v;
                        arg[f] = i;
                        pre[f] = acc[f];
                    }
                }
            }
            if real < n - l + 1 {
                for f in 0..m {
                    let z = bias[f] + (0..l).map(|k| table[slots[real] * width + k * m + f]).sum::<f64>();
                    let v = act.apply(z);
                    if v > best[f] {
                        best[f] = v;
                        arg[f] = real;
                        pre[f] = z;
                    }
                }
            }
            features.extend_from_slice(&best);
            argmax.push(arg);
            pre_activation.push(pre);
        }
        let attention = self.config.attention.as_ref().map(|cfg| {
            let m_a = self.params.attention.len();
            let d = self.dim();
            let mut v_a = Vec::with_capacity(n);
            let mut columns = Vec::with_capacity(n);
            let mut pre = Vec::with_capacity(n);
            let mut v_e = vec![0.0; d];
            for (i, &s) in slots.iter().enumerate() {
                let row = &proj.attention[s * m_a..(s + 1) * m_a];
                let (mut best, mut col, mut z) = (f64::NEG_INFINITY, 0, 0.0);
                for (j, (p, f)) in row.iter().zip(&self.params.attention).enumerate() {
                    let zz = p + f.bias;
                    let v = cfg.activation.apply(zz);
                    if v > best {
                        best = v;
                        col = j;
                        z = zz;
                    }
                }
                if best != 0.0 {
                    for (o, e) in v_e.iter_mut().zip(self.params.embedding.row(doc.indices[i])) {
                        *o += best * e;
                    }
                }
                v_a.push(best);
                columns.push(col);
                pre.push(z);
            }
            features.extend_from_slice(&v_e);
            AttentionTrace {
                v_a,
                columns,
                pre_activation: pre,
                v_e,
            }
        });
        let w = &self.params.softmax_weights;
        let mut logits = self.params.softmax_bias.clone();
        for (f, &h) in features.iter().enumerate() {
            let h = match &mask {
                Some(m) => h * m[f],
                None => h,
            };
            if h != 0.0 {
                for (o, wv) in logits.iter_mut().zip(w.row(f)) {
                    *o += h * wv;
                }
            }
        }
        ForwardPass {
            logits,
            features,
            argmax,
            pre_activation,
            attention,
            dropout_mask: mask,
        }
    }

    /// Accumulates `weight * dLoss/dParams` into `grads`; returns the weighted loss.
    pub(crate) fn backward(
        &self,
        doc: &PaddedDocument,
        pass: &ForwardPass,
        gold: usize,
        weight: f64,
        grads: &mut CnnParams,
    ) -> Result<f64> {
        let sx = softmax_xent(&pass.logits, gold)?;
        let dlogits: Vec<f64> = sx.gradient.iter().map(|g| g * weight).collect();
        let w = &self.params.softmax_weights;
        let fine_tune = self.fine_tunes_embedding();
        let mut dh = vec![0.0; pass.features.len()];
        for (f, &h) in pass.features.iter().enumerate() {
            let scale = pass.dropout_mask.as_ref().map_or(1.0, |m| m[f]);
            if scale == 0.0 {
                continue;
            }
            let hv = h * scale;
            let row = grads.softmax_weights.row_mut(f);
            for (g, dl) in row.iter_mut().zip(&dlogits) {
                *g += hv * dl;
            }
            dh[f] = scale * dot(w.row(f), &dlogits);
        }
        for (b, dl) in grads.softmax_bias.iter_mut().zip(&dlogits) {
            *b += dl;
        }
        let act = self.config.activation;
        let mut offset = 0;
        for (g, filters) in self.params.filters.iter().enumerate() {
            for (f, filt) in filters.iter().enumerate() {
                let dz = dh[offset + f] * act.derivative(pass.pre_activation[g][f]);
                if dz == 0.0 {
                    continue;
                }
                let start = pass.argmax[g][f];
                let gf = &mut grads.filters[g][f];
                gf.bias += dz;
                for k in 0..filt.length() {
                    let t = doc.indices[start + k];
                    let e = self.params.embedding.row(t);
                    for (gw, ev) in gf.weights.row_mut(k).iter_mut().zip(e) {
                        *gw += dz * ev;
                    }
                    if fine_tune && t != PAD {
                        for (ge, wv) in grads.embedding.row_mut(t).iter_mut().zip(filt.weights.row(k)) {
                            *ge += dz * wv;
                        }
                    }
                }
            }
            offset += filters.len();
        }
        if let (Some(trace), Some(cfg)) = (&pass.attention, &self.config.attention) {
            let de = &dh[offset..];
            for (i, &t) in doc.indices.iter().enumerate() {
                let e = self.params.embedding.row(t);
                let dva = dot(de, e);
                if fine_tune && t != PAD && trace.v_a[i] != 0.0 {
                    for (ge, dv) in grads.embedding.row_mut(t).iter_mut().zip(de) {
                        *ge += trace.v_a[i] * dv;
                    }
                }
                let dz = dva * cfg.activation.derivative(trace.pre_activation[i]);
                if dz == 0.0 {
                    continue;
                }
                let j = trace.columns[i];
                let ga = &mut grads.attention[j];
                ga.bias += dz;
                for (gw, ev) in ga.weights.row_mut(0).iter_mut().zip(e) {
                    *gw += dz * ev;
                }
                if fine_tune && t != PAD {
                    for (ge, wv) in grads.embedding.row_mut(t).iter_mut().zip(self.params.attention[j].weights.row(0)) {
                        *ge += dz * wv;
                    }
                }
            }
        }
        Ok(sx.loss * weight)
    }

    /// Mean eval-mode cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_gradient(&self, batch: &[(PaddedDocument, usize)]) -> Result<(f64, CnnParams)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        let mut rng = rng_for(0, 0);
        for (doc, gold) in batch {
            let pass = self.forward(doc, Mode::Eval, &mut rng)?;
            loss += self.backward(doc, &pass, *gold, 1.0, &mut grads)?;
        }
        let scale = 1.0 / batch.len() as f64;
        for s in grads.slices_mut(true) {
            s.iter_mut().for_each(|x| *x *= scale);
        }
        Ok((loss * scale, grads))
    }

    pub(crate) fn train_rng(&self, stream: u64) -> ChaRng {
        rng_for(self.config.seed, stream)
    }
}
