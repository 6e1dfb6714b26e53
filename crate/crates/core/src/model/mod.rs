//! Network assembly: single-view streams (encoder + BLSTM + head), the fused
//! multi-view model, weight transfer between them, and checkpoint I/O.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, AnyModel, CHECKPOINT_MAGIC};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ndcore::{Matrix, Rng, Scalar};
use crate::net::{
    blstm_backward, blstm_forward, delta_backward, delta_features, Activation, BlstmCache,
    DeltaConfig, DenseLayer, Encoder, EncoderCache, LstmParams, SequenceBatch,
};

/// One of the five supported camera poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewId(u16);

impl ViewId {
    pub const ANGLES: [u16; 5] = [0, 30, 45, 60, 90];
    pub const FRONTAL: ViewId = ViewId(0);

    pub fn new(angle: u16) -> Result<ViewId> {
        if Self::ANGLES.contains(&angle) {
            Ok(ViewId(angle))
        } else {
            Err(Error::InvalidView { angle })
        }
    }

    pub fn angle(&self) -> u16 {
        self.0
    }

    pub fn all() -> Vec<ViewId> {
        Self::ANGLES.iter().map(|&a| ViewId(a)).collect()
    }
}

impl std::fmt::Display for ViewId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Mouth ROI size in pixels for one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ViewDims {
    pub height: usize,
    pub width: usize,
}

impl ViewDims {
    pub fn dim(&self) -> usize {
        self.height * self.width
    }
}

/// Architecture hyperparameters. Defaults: encoder 2000/1000/500 with a
/// 50-dim linear bottleneck, 250 BLSTM units per direction in both the
/// streams and the fusion layer, 10 classes, and the standard ROI sizes
/// per view.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub view_dims: BTreeMap<ViewId, ViewDims>,
    pub encoder_sizes: [usize; 3],
    pub bottleneck_dim: usize,
    pub stream_hidden: usize,
    pub fusion_hidden: usize,
    pub num_classes: usize,
    pub delta_window: usize,
    pub views: Vec<ViewId>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let sizes = [(0, 29, 50), (30, 29, 44), (45, 29, 43), (60, 35, 44), (90, 44, 30)];
        let view_dims = sizes
            .iter()
            .map(|&(a, h, w)| (ViewId(a), ViewDims { height: h, width: w }))
            .collect();
        ModelConfig {
            view_dims,
            encoder_sizes: [2000, 1000, 500],
            bottleneck_dim: 50,
            stream_hidden: 250,
            fusion_hidden: 250,
            num_classes: 10,
            delta_window: 2,
            views: ViewId::all(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::invalid("config needs at least one view"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.views {
            if !seen.insert(*v) {
                return Err(Error::invalid(format!("duplicate view {v}")));
            }
            if !self.view_dims.contains_key(v) {
                return Err(Error::invalid(format!("no dimensions declared for view {v}")));
            }
        }
        let dims_ok = self
            .encoder_sizes
            .iter()
            .chain([&self.bottleneck_dim, &self.stream_hidden, &self.fusion_hidden, &self.num_classes, &self.delta_window])
            .all(|&d| d >= 1);
        if !dims_ok {
            return Err(Error::invalid("all model dimensions must be >= 1"));
        }
        Ok(())
    }

    pub fn input_dim(&self, view: ViewId) -> Result<usize> {
        self.view_dims
            .get(&view)
            .map(ViewDims::dim)
            .ok_or_else(|| Error::invalid(format!("no dimensions declared for view {view}")))
    }

    pub fn delta(&self) -> DeltaConfig {
        DeltaConfig {
            window: self.delta_window,
        }
    }
}

/// Which layer family a tensor belongs to; gradient clipping applies to LSTM
/// tensors only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Encoder,
    Lstm,
    Head,
}

pub type TensorEntry<'a, F> = (String, TensorKind, &'a Matrix<F>);
pub type TensorEntryMut<'a, F> = (String, TensorKind, &'a mut Matrix<F>);

/// Per-view sub-network: encoder, delta append, BLSTM, and (during
/// single-stream training only) a softmax head.
#[derive(Debug, Clone)]
pub struct StreamParams<F> {
    pub view: ViewId,
    pub delta: DeltaConfig,
    pub encoder: Encoder<F>,
    pub blstm_fwd: LstmParams<F>,
    pub blstm_bwd: LstmParams<F>,
    pub head: Option<DenseLayer<F>>,
}

/// Fused model: per-view streams (heads removed), a fusion BLSTM over the
/// concatenated stream outputs, and the shared softmax head.
#[derive(Debug, Clone)]
pub struct MultiViewParams<F> {
    pub streams: BTreeMap<ViewId, StreamParams<F>>,
    pub fusion_fwd: LstmParams<F>,
    pub fusion_bwd: LstmParams<F>,
    pub head: DenseLayer<F>,
}

pub(crate) enum Init {
    Glorot,
    Zeros,
}

fn make_dense<F: Scalar>(
    in_dim: usize,
    out_dim: usize,
    act: Activation,
    init: &Init,
    rng: &mut Rng,
) -> Result<DenseLayer<F>> {
    match init {
        Init::Glorot => DenseLayer::glorot(in_dim, out_dim, act, rng),
        Init::Zeros => Ok(DenseLayer {
            w: Matrix::zeros(in_dim, out_dim),
            b: Matrix::zeros(1, out_dim),
            activation: act,
        }),
    }
}

fn make_lstm<F: Scalar>(
    in_dim: usize,
    hidden: usize,
    init: &Init,
    rng: &mut Rng,
) -> Result<LstmParams<F>> {
    match init {
        Init::Glorot => LstmParams::glorot(in_dim, hidden, rng),
        Init::Zeros => Ok(LstmParams {
            wx: Matrix::zeros(in_dim, 4 * hidden),
            wh: Matrix::zeros(hidden, 4 * hidden),
            b: Matrix::zeros(1, 4 * hidden),
        }),
    }
}

pub(crate) fn build_stream_with<F: Scalar>(
    cfg: &ModelConfig,
    view: ViewId,
    pretrained: Option<Encoder<F>>,
    init: Init,
    rng: &mut Rng,
) -> Result<StreamParams<F>> {
    cfg.validate()?;
    let input_dim = cfg.input_dim(view)?;
    let encoder = match pretrained {
        Some(enc) => {
            let expected = [
                (input_dim, cfg.encoder_sizes[0]),
                (cfg.encoder_sizes[0], cfg.encoder_sizes[1]),
                (cfg.encoder_sizes[1], cfg.encoder_sizes[2]),
                (cfg.encoder_sizes[2], cfg.bottleneck_dim),
            ];
            let actual: Vec<_> = enc.layers.iter().map(|l| l.w.shape()).collect();
            if actual != expected {
                return Err(Error::invalid(format!(
                    "pretrained encoder shapes {actual:?} do not match config {expected:?}"
                )));
            }
            enc
        }
        None => match init {
            Init::Glorot => {
                Encoder::glorot(input_dim, &cfg.encoder_sizes, cfg.bottleneck_dim, rng)?
            }
            Init::Zeros => {
                let dims = [
                    input_dim,
                    cfg.encoder_sizes[0],
                    cfg.encoder_sizes[1],
                    cfg.encoder_sizes[2],
                    cfg.bottleneck_dim,
                ];
                let mut layers = Vec::with_capacity(4);
                for i in 0..4 {
                    let act = if i == 3 { Activation::Linear } else { Activation::Relu };
                    layers.push(make_dense(dims[i], dims[i + 1], act, &Init::Zeros, rng)?);
                }
                Encoder { layers }
            }
        },
    };
    let blstm_in = 3 * cfg.bottleneck_dim;
    Ok(StreamParams {
        view,
        delta: cfg.delta(),
        encoder,
        blstm_fwd: make_lstm(blstm_in, cfg.stream_hidden, &init, rng)?,
        blstm_bwd: make_lstm(blstm_in, cfg.stream_hidden, &init, rng)?,
        head: Some(make_dense(
            2 * cfg.stream_hidden,
            cfg.num_classes,
            Activation::Linear,
            &init,
            rng,
        )?),
    })
}

/// Builds one stream for `view`. The encoder comes from pretraining when
/// given (shape-checked against the config), otherwise Glorot; the BLSTM and
/// head are always Glorot-initialised with zero biases apart from the LSTM
/// forget gates.
pub fn build_stream<F: Scalar>(
    cfg: &ModelConfig,
    view: ViewId,
    pretrained: Option<Encoder<F>>,
    rng: &mut Rng,
) -> Result<StreamParams<F>> {
    build_stream_with(cfg, view, pretrained, Init::Glorot, rng)
}

/// Transfers trained single streams into the fused architecture: stream
/// weights are copied (heads dropped), the fusion BLSTM and output head are
/// Glorot-initialised.
pub fn build_multiview<F: Scalar>(
    single_streams: BTreeMap<ViewId, StreamParams<F>>,
    cfg: &ModelConfig,
    rng: &mut Rng,
) -> Result<MultiViewParams<F>> {
    cfg.validate()?;
    let mut streams = BTreeMap::new();
    for view in &cfg.views {
        let mut s = single_streams
            .get(view)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("missing trained stream for view {view}")))?;
        if s.view != *view {
            return Err(Error::invalid(format!(
                "stream labelled view {} provided for view {view}",
                s.view
            )));
        }
        if s.blstm_fwd.hidden() != cfg.stream_hidden {
            return Err(Error::invalid(format!(
                "stream hidden {} does not match config {}",
                s.blstm_fwd.hidden(),
                cfg.stream_hidden
            )));
        }
        s.head = None;
        streams.insert(*view, s);
    }
    let fusion_in: usize = streams.len() * 2 * cfg.stream_hidden;
    Ok(MultiViewParams {
        streams,
        fusion_fwd: LstmParams::glorot(fusion_in, cfg.fusion_hidden, rng)?,
        fusion_bwd: LstmParams::glorot(fusion_in, cfg.fusion_hidden, rng)?,
        head: DenseLayer::glorot(2 * cfg.fusion_hidden, cfg.num_classes, Activation::Linear, rng)?,
    })
}

/// Cached activations of one stream's encoder + delta + BLSTM chain.
pub struct StreamFeatureCache<F> {
    valid_frames: Matrix<F>,
    enc_cache: EncoderCache<F>,
    delta_out: Matrix<F>,
    blstm_cache: BlstmCache<F>,
    pub features: Matrix<F>, // T x 2*hidden
}

impl<F: Scalar> StreamParams<F> {
    pub fn bottleneck_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn hidden(&self) -> usize {
        self.blstm_fwd.hidden()
    }

    /// Encoder -> delta append -> BLSTM; shared by standalone streams and the
    /// fused model, so transferred streams produce bitwise-identical features.
    pub fn features(&self, frames: &Matrix<F>) -> Result<StreamFeatureCache<F>> {
        let (bottleneck, enc_cache) = self.encoder.forward(frames)?;
        let delta_out = delta_features(&bottleneck, self.delta);
        let (features, blstm_cache) =
            blstm_forward(&self.blstm_fwd, &self.blstm_bwd, &delta_out)?;
        Ok(StreamFeatureCache {
            valid_frames: frames.clone(),
            enc_cache,
            delta_out,
            blstm_cache,
            features,
        })
    }

    /// Gradient of the feature chain; returns parameter grads (head untouched).
    fn features_backward(
        &self,
        cache: &StreamFeatureCache<F>,
        d_features: &Matrix<F>,
    ) -> Result<StreamParams<F>> {
        let (d_delta, g_fwd, g_bwd) = blstm_backward(
            &self.blstm_fwd,
            &self.blstm_bwd,
            &cache.delta_out,
            &cache.blstm_cache,
            d_features,
        )?;
        let d_bottleneck = delta_backward(&d_delta, self.delta);
        let (_, g_enc) = self.encoder.backward(&cache.enc_cache, &d_bottleneck)?;
        Ok(StreamParams {
            view: self.view,
            delta: self.delta,
            encoder: g_enc,
            blstm_fwd: g_fwd,
            blstm_bwd: g_bwd,
            head: self.head.as_ref().map(|h| h.zeros_like()),
        })
    }

    /// Per-frame logits (head required).
    pub fn forward_logits(
        &self,
        frames: &Matrix<F>,
    ) -> Result<(Matrix<F>, StreamFeatureCache<F>)> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::invalid("stream has no head; it was moved into a fused model"))?;
        let cache = self.features(frames)?;
        let logits = head.forward(&cache.features)?;
        Ok((logits, cache))
    }

    pub fn backward(
        &self,
        cache: &StreamFeatureCache<F>,
        d_logits: &Matrix<F>,
    ) -> Result<StreamParams<F>> {
        let head = self
            .head
            .as_ref()
            .ok_or_else(|| Error::invalid("stream has no head"))?;
        let logits = head.forward(&cache.features)?;
        let (d_features, g_head) = head.backward(&cache.features, &logits, d_logits)?;
        let mut grads = self.features_backward(cache, &d_features)?;
        grads.head = Some(g_head);
        Ok(grads)
    }

    pub fn zeros_like(&self) -> Self {
        StreamParams {
            view: self.view,
            delta: self.delta,
            encoder: self.encoder.zeros_like(),
            blstm_fwd: self.blstm_fwd.zeros_like(),
            blstm_bwd: self.blstm_bwd.zeros_like(),
            head: self.head.as_ref().map(|h| h.zeros_like()),
        }
    }

    pub fn tensors(&self) -> Vec<TensorEntry<'_, F>> {
        let prefix = format!("view/{}", self.view);
        let mut out = Vec::new();
        for (i, layer) in self.encoder.layers.iter().enumerate() {
            out.push((format!("{prefix}/encoder/{i}/w"), TensorKind::Encoder, &layer.w));
            out.push((format!("{prefix}/encoder/{i}/b"), TensorKind::Encoder, &layer.b));
        }
        for (dir, p) in [("fwd", &self.blstm_fwd), ("bwd", &self.blstm_bwd)] {
            out.push((format!("{prefix}/blstm/{dir}/wx"), TensorKind::Lstm, &p.wx));
            out.push((format!("{prefix}/blstm/{dir}/wh"), TensorKind::Lstm, &p.wh));
            out.push((format!("{prefix}/blstm/{dir}/b"), TensorKind::Lstm, &p.b));
        }
        if let Some(h) = &self.head {
            out.push((format!("{prefix}/head/w"), TensorKind::Head, &h.w));
            out.push((format!("{prefix}/head/b"), TensorKind::Head, &h.b));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorEntryMut<'_, F>> {
        let prefix = format!("view/{}", self.view);
        let mut out: Vec<TensorEntryMut<'_, F>> = Vec::new();
        for (i, layer) in self.encoder.layers.iter_mut().enumerate() {
            out.push((format!("{prefix}/encoder/{i}/w"), TensorKind::Encoder, &mut layer.w));
            out.push((format!("{prefix}/encoder/{i}/b"), TensorKind::Encoder, &mut layer.b));
        }
        for (dir, p) in [("fwd", &mut self.blstm_fwd), ("bwd", &mut self.blstm_bwd)] {
            out.push((format!("{prefix}/blstm/{dir}/wx"), TensorKind::Lstm, &mut p.wx));
            out.push((format!("{prefix}/blstm/{dir}/wh"), TensorKind::Lstm, &mut p.wh));
            out.push((format!("{prefix}/blstm/{dir}/b"), TensorKind::Lstm, &mut p.b));
        }
        if let Some(h) = &mut self.head {
            out.push((format!("{prefix}/head/w"), TensorKind::Head, &mut h.w));
            out.push((format!("{prefix}/head/b"), TensorKind::Head, &mut h.b));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, m)| m.data().len()).sum()
    }
}

/// Caches for a fused forward pass.
pub struct MultiViewCache<F> {
    stream_caches: BTreeMap<ViewId, StreamFeatureCache<F>>,
    concat: Matrix<F>,
    fusion_cache: BlstmCache<F>,
    pub fusion_out: Matrix<F>,
}

impl<F: Scalar> MultiViewParams<F> {
    pub fn views(&self) -> Vec<ViewId> {
        self.streams.keys().copied().collect()
    }

    fn check_views(&self, sample: &BTreeMap<ViewId, Matrix<F>>) -> Result<()> {
        let have: Vec<u16> = sample.keys().map(|v| v.angle()).collect();
        let want: Vec<u16> = self.streams.keys().map(|v| v.angle()).collect();
        if have != want {
            return Err(Error::ViewMismatch {
                checkpoint: want,
                requested: have,
            });
        }
        let mut lens = sample.values().map(|m| m.rows());
        let first = lens.next().unwrap_or(0);
        if lens.any(|l| l != first) {
            return Err(Error::invalid(
                "per-utterance frame counts must agree across views",
            ));
        }
        Ok(())
    }

    pub fn forward_logits(
        &self,
        sample: &BTreeMap<ViewId, Matrix<F>>,
    ) -> Result<(Matrix<F>, MultiViewCache<F>)> {
        self.check_views(sample)?;
        let mut stream_caches = BTreeMap::new();
        let mut per_view = Vec::new();
        for (view, stream) in &self.streams {
            let cache = stream.features(&sample[view])?;
            per_view.push((view, cache.features.clone()));
            stream_caches.insert(*view, cache);
        }
        let t_len = per_view[0].1.rows();
        let total: usize = per_view.iter().map(|(_, m)| m.cols()).sum();
        let mut concat = Matrix::zeros(t_len, total);
        for t in 0..t_len {
            let row = concat.row_mut(t);
            let mut at = 0;
            for (_, m) in &per_view {
                row[at..at + m.cols()].copy_from_slice(m.row(t));
                at += m.cols();
            }
        }
        let (fusion_out, fusion_cache) =
            blstm_forward(&self.fusion_fwd, &self.fusion_bwd, &concat)?;
        let logits = self.head.forward(&fusion_out)?;
        Ok((
            logits,
            MultiViewCache {
                stream_caches,
                concat,
                fusion_cache,
                fusion_out,
            },
        ))
    }

    pub fn backward(
        &self,
        cache: &MultiViewCache<F>,
        d_logits: &Matrix<F>,
    ) -> Result<MultiViewParams<F>> {
        let logits = self.head.forward(&cache.fusion_out)?;
        let (d_fusion_out, g_head) = self.head.backward(&cache.fusion_out, &logits, d_logits)?;
        let (d_concat, g_ffwd, g_fbwd) = blstm_backward(
            &self.fusion_fwd,
            &self.fusion_bwd,
            &cache.concat,
            &cache.fusion_cache,
            &d_fusion_out,
        )?;
        let mut grads_streams = BTreeMap::new();
        let mut at = 0;
        for (view, stream) in &self.streams {
            let width = 2 * stream.hidden();
            let mut d_feat = Matrix::zeros(d_concat.rows(), width);
            for t in 0..d_concat.rows() {
                d_feat
                    .row_mut(t)
                    .copy_from_slice(&d_concat.row(t)[at..at + width]);
            }
            at += width;
            let g = stream.features_backward(&cache.stream_caches[view], &d_feat)?;
            grads_streams.insert(*view, g);
        }
        Ok(MultiViewParams {
            streams: grads_streams,
            fusion_fwd: g_ffwd,
            fusion_bwd: g_fbwd,
            head: g_head,
        })
    }

    pub fn zeros_like(&self) -> Self {
        MultiViewParams {
            streams: self
                .streams
                .iter()
                .map(|(v, s)| (*v, s.zeros_like()))
                .collect(),
            fusion_fwd: self.fusion_fwd.zeros_like(),
            fusion_bwd: self.fusion_bwd.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    pub fn tensors(&self) -> Vec<TensorEntry<'_, F>> {
        let mut out = Vec::new();
        for stream in self.streams.values() {
            out.extend(stream.tensors());
        }
        for (dir, p) in [("fwd", &self.fusion_fwd), ("bwd", &self.fusion_bwd)] {
            out.push((format!("fusion/{dir}/wx"), TensorKind::Lstm, &p.wx));
            out.push((format!("fusion/{dir}/wh"), TensorKind::Lstm, &p.wh));
            out.push((format!("fusion/{dir}/b"), TensorKind::Lstm, &p.b));
        }
        out.push(("head/w".to_string(), TensorKind::Head, &self.head.w));
        out.push(("head/b".to_string(), TensorKind::Head, &self.head.b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorEntryMut<'_, F>> {
        let mut out: Vec<TensorEntryMut<'_, F>> = Vec::new();
        for stream in self.streams.values_mut() {
            out.extend(stream.tensors_mut());
        }
        for (dir, p) in [("fwd", &mut self.fusion_fwd), ("bwd", &mut self.fusion_bwd)] {
            out.push((format!("fusion/{dir}/wx"), TensorKind::Lstm, &mut p.wx));
            out.push((format!("fusion/{dir}/wh"), TensorKind::Lstm, &mut p.wh));
            out.push((format!("fusion/{dir}/b"), TensorKind::Lstm, &mut p.b));
        }
        out.push(("head/w".to_string(), TensorKind::Head, &mut self.head.w));
        out.push(("head/b".to_string(), TensorKind::Head, &mut self.head.b));
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, _, m)| m.data().len()).sum()
    }
}

/// A batch holding the same utterances across several views, with per-view
/// padding. Frame counts must agree across views for every utterance.
pub struct MultiViewBatch<F> {
    views: BTreeMap<ViewId, SequenceBatch<F>>,
}

impl<F: Scalar> MultiViewBatch<F> {
    pub fn new(views: BTreeMap<ViewId, SequenceBatch<F>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("multi-view batch needs at least one view"));
        }
        let mut iter = views.values();
        let first = iter.next().unwrap();
        for other in iter {
            if other.len() != first.len() {
                return Err(Error::invalid("utterance counts differ across views"));
            }
            for i in 0..first.len() {
                if other.length(i) != first.length(i) {
                    return Err(Error::invalid(format!(
                        "frame counts disagree across views for utterance {i}"
                    )));
                }
                if other.label(i) != first.label(i) || other.subject(i) != first.subject(i) {
                    return Err(Error::invalid(format!(
                        "metadata disagrees across views for utterance {i}"
                    )));
                }
            }
        }
        Ok(MultiViewBatch { views })
    }

    pub fn len(&self) -> usize {
        self.views.values().next().map(|b| b.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> usize {
        self.views.values().next().unwrap().label(i)
    }

    pub fn subject(&self, i: usize) -> u32 {
        self.views.values().next().unwrap().subject(i)
    }

    /// Valid frames of utterance `i`, per view.
    pub fn sample(&self, i: usize) -> BTreeMap<ViewId, Matrix<F>> {
        self.views
            .iter()
            .map(|(v, b)| (*v, b.valid_frames(i)))
            .collect()
    }

    pub fn view_ids(&self) -> Vec<ViewId> {
        self.views.keys().copied().collect()
    }

    pub fn views_mut(&mut self) -> &mut BTreeMap<ViewId, SequenceBatch<F>> {
        &mut self.views
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::activations::softmax;
    use crate::ndcore::glorot_bound;

    fn toy_config(views: &[u16]) -> ModelConfig {
        let mut cfg = ModelConfig {
            encoder_sizes: [6, 5, 4],
            bottleneck_dim: 2,
            stream_hidden: 3,
            fusion_hidden: 3,
            num_classes: 4,
            delta_window: 2,
            views: views.iter().map(|&a| ViewId::new(a).unwrap()).collect(),
            ..ModelConfig::default()
        };
        cfg.view_dims.insert(ViewId(0), ViewDims { height: 2, width: 4 });
        cfg.view_dims.insert(ViewId(90), ViewDims { height: 3, width: 2 });
        cfg
    }

    #[test]
    fn frontal_input_dim_matches_roi_table() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.input_dim(ViewId::FRONTAL).unwrap(), 29 * 50);
        assert_eq!(cfg.input_dim(ViewId(90)).unwrap(), 44 * 30);
    }

    #[test]
    fn blstm_input_is_three_times_bottleneck() {
        let mut rng = Rng::new(1);
        let cfg = toy_config(&[0]);
        let s: StreamParams<f64> = build_stream(&cfg, ViewId(0), None, &mut rng).unwrap();
        assert_eq!(s.blstm_fwd.input_dim(), 3 * cfg.bottleneck_dim);
        // With the default 50-dim bottleneck the BLSTM input is 150.
        assert_eq!(3 * ModelConfig::default().bottleneck_dim, 150);
    }

    #[test]
    fn fresh_stream_weights_respect_glorot_bounds() {
        let mut rng = Rng::new(2);
        let cfg = toy_config(&[0]);
        let s: StreamParams<f64> = build_stream(&cfg, ViewId(0), None, &mut rng).unwrap();
        for layer in &s.encoder.layers {
            let bound = glorot_bound(layer.w.rows(), layer.w.cols());
            assert!(layer.w.data().iter().all(|&x| x.abs() <= bound));
        }
    }

    #[test]
    fn fusion_input_dim_counts_streams_and_directions() {
        let mut rng = Rng::new(3);
        let cfg = toy_config(&[0, 90]);
        let mut streams = BTreeMap::new();
        for &v in &[0u16, 90] {
            let view = ViewId::new(v).unwrap();
            streams.insert(view, build_stream::<f64>(&cfg, view, None, &mut rng).unwrap());
        }
        let mv = build_multiview(streams, &cfg, &mut rng).unwrap();
        assert_eq!(mv.fusion_fwd.input_dim(), 2 * 2 * cfg.stream_hidden);
        assert!(mv.streams.values().all(|s| s.head.is_none()));
    }

    #[test]
    fn transferred_weights_are_bitwise_identical() {
        let mut rng = Rng::new(4);
        let cfg = toy_config(&[0]);
        let view = ViewId(0);
        let s = build_stream::<f64>(&cfg, view, None, &mut rng).unwrap();
        let mut streams = BTreeMap::new();
        streams.insert(view, s.clone());
        let mv = build_multiview(streams, &cfg, &mut rng).unwrap();
        assert_eq!(mv.streams[&view].blstm_fwd.wx, s.blstm_fwd.wx);
        assert_eq!(mv.streams[&view].encoder.layers[0].w, s.encoder.layers[0].w);
    }

    #[test]
    fn stream_features_agree_standalone_and_fused() {
        let mut rng = Rng::new(5);
        let cfg = toy_config(&[0, 90]);
        let mut streams = BTreeMap::new();
        for view in &cfg.views {
            streams.insert(*view, build_stream::<f64>(&cfg, *view, None, &mut rng).unwrap());
        }
        let mv = build_multiview(streams.clone(), &cfg, &mut rng).unwrap();
        let mut sample = BTreeMap::new();
        for view in &cfg.views {
            let dim = cfg.input_dim(*view).unwrap();
            sample.insert(*view, Matrix::from_fn(4, dim, |_, _| rng.normal()));
        }
        let (_, cache) = mv.forward_logits(&sample).unwrap();
        for view in &cfg.views {
            let standalone = streams[view].features(&sample[view]).unwrap();
            assert_eq!(standalone.features, cache.stream_caches[view].features);
        }
    }

    #[test]
    fn single_view_fused_model_runs_degenerate_forward() {
        let mut rng = Rng::new(6);
        let cfg = toy_config(&[0]);
        let view = ViewId(0);
        let mut streams = BTreeMap::new();
        streams.insert(view, build_stream::<f64>(&cfg, view, None, &mut rng).unwrap());
        let mv = build_multiview(streams, &cfg, &mut rng).unwrap();
        let mut sample = BTreeMap::new();
        sample.insert(view, Matrix::from_fn(1, 8, |_, _| rng.normal()));
        let (logits, _) = mv.forward_logits(&sample).unwrap();
        assert_eq!(logits.shape(), (1, cfg.num_classes));
    }

    #[test]
    fn zero_model_emits_uniform_distributions() {
        let mut rng = Rng::new(7);
        let cfg = toy_config(&[0]);
        let view = ViewId(0);
        let s = build_stream_with::<f64>(&cfg, view, None, Init::Zeros, &mut rng).unwrap();
        let (logits, _) = s.forward_logits(&Matrix::from_fn(3, 8, |_, _| rng.normal())).unwrap();
        for t in 0..3 {
            let dist = softmax(logits.row(t));
            for &p in &dist {
                assert!((p - 0.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_rejects_view_mismatch_and_ragged_lengths() {
        let mut rng = Rng::new(8);
        let cfg = toy_config(&[0, 90]);
        let mut streams = BTreeMap::new();
        for view in &cfg.views {
            streams.insert(*view, build_stream::<f64>(&cfg, *view, None, &mut rng).unwrap());
        }
        let mv = build_multiview(streams, &cfg, &mut rng).unwrap();
        let mut sample = BTreeMap::new();
        sample.insert(ViewId(0), Matrix::<f64>::zeros(3, 8));
        assert!(matches!(
            mv.forward_logits(&sample),
            Err(Error::ViewMismatch { .. })
        ));
        sample.insert(ViewId(90), Matrix::<f64>::zeros(4, 6));
        assert!(mv.forward_logits(&sample).is_err());
    }

    #[test]
    fn parameter_count_matches_closed_form() {
        let mut rng = Rng::new(9);
        let cfg = toy_config(&[0, 90]);
        let dense = |i: usize, o: usize| i * o + o;
        let lstm = |i: usize, h: usize| 4 * h * i + 4 * h * h + 4 * h;
        let enc = |input: usize| {
            dense(input, 6) + dense(6, 5) + dense(5, 4) + dense(4, 2)
        };
        let stream_no_head = |input: usize| enc(input) + 2 * lstm(6, 3);
        let view0 = ViewId(0);
        let s = build_stream::<f64>(&cfg, view0, None, &mut rng).unwrap();
        assert_eq!(s.param_count(), stream_no_head(8) + dense(6, 4));
        let mut streams = BTreeMap::new();
        streams.insert(view0, s);
        let view90 = ViewId(90);
        streams.insert(view90, build_stream::<f64>(&cfg, view90, None, &mut rng).unwrap());
        let mv = build_multiview(streams, &cfg, &mut rng).unwrap();
        let expected = stream_no_head(8) + stream_no_head(6) + 2 * lstm(12, 3) + dense(6, 4);
        assert_eq!(mv.param_count(), expected);
    }

    #[test]
    fn build_multiview_requires_every_view() {
        let mut rng = Rng::new(10);
        let cfg = toy_config(&[0, 90]);
        let view = ViewId(0);
        let mut streams = BTreeMap::new();
        streams.insert(view, build_stream::<f64>(&cfg, view, None, &mut rng).unwrap());
        assert!(build_multiview(streams, &cfg, &mut rng).is_err());
    }

    #[test]
    fn view_id_rejects_unknown_angles() {
        assert!(ViewId::new(17).is_err());
        assert!(ViewId::new(45).is_ok());
    }
}
