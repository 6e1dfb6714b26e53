//! Greedy layer-wise pretraining of the encoder stack: four Gaussian-visible
//! RBMs trained by contrastive divergence, rectified-linear hidden units for
//! the three hidden layers and linear hidden units for the bottleneck.
//!
//! Visible units assume unit variance (inputs are z-normalised), so no
//! per-unit variance is learned.

use crate::error::{Error, Result};
use crate::ndcore::activations::relu;
use crate::ndcore::{Matrix, Rng, Scalar};
use crate::net::{Activation, DenseLayer, Encoder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HiddenKind {
    /// Rectified linear hidden units; sampled as `max(0, x + N(0, sigmoid(x)))`
    /// when sampling is enabled.
    NoisyRelu,
    /// Gaussian-linear hidden units, used only for the bottleneck layer.
    Linear,
}

#[derive(Debug, Clone)]
pub struct GaussianRbm<F> {
    pub w: Matrix<F>,     // visible x hidden
    pub vbias: Matrix<F>, // 1 x visible
    pub hbias: Matrix<F>, // 1 x hidden
    pub hidden_kind: HiddenKind,
}

/// Contrastive-divergence hyperparameters (defaults follow the training
/// recipe: 20 epochs, batch 100, L2 2e-4, learning rate 1e-3, CD-1, momentum
/// 0.5 switching to 0.9 at epoch 5).
#[derive(Debug, Clone, serde::Serialize)]
pub struct CdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub l2: f64,
    pub lr: f64,
    pub cd_steps: usize,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub momentum_switch_epoch: usize,
    /// When set, the Gibbs chain starts from stochastic hidden samples instead
    /// of mean activations. Off by default: the deterministic chain keeps CD a
    /// pure function of the data, so zero-information input exercises only the
    /// L2 decay term.
    pub sample_hidden: bool,
}

impl Default for CdConfig {
    fn default() -> Self {
        CdConfig {
            epochs: 20,
            batch_size: 100,
            l2: 0.0002,
            lr: 0.001,
            cd_steps: 1,
            momentum_early: 0.5,
            momentum_late: 0.9,
            momentum_switch_epoch: 5,
            sample_hidden: false,
        }
    }
}

/// Momentum velocities carried across updates, plus the epoch counter that
/// drives the momentum schedule.
pub struct CdState<F> {
    pub vel_w: Matrix<F>,
    pub vel_vbias: Matrix<F>,
    pub vel_hbias: Matrix<F>,
    pub epoch: usize,
}

impl<F: Scalar> GaussianRbm<F> {
    /// Small-normal weights (std 0.01), zero biases.
    pub fn new(visible: usize, hidden: usize, kind: HiddenKind, rng: &mut Rng) -> Self {
        let w = Matrix::from_fn(visible, hidden, |_, _| F::from_f64(0.01 * rng.normal()));
        GaussianRbm {
            w,
            vbias: Matrix::zeros(1, visible),
            hbias: Matrix::zeros(1, hidden),
            hidden_kind: kind,
        }
    }

    pub fn state(&self) -> CdState<F> {
        CdState {
            vel_w: Matrix::zeros(self.w.rows(), self.w.cols()),
            vel_vbias: Matrix::zeros(1, self.vbias.cols()),
            vel_hbias: Matrix::zeros(1, self.hbias.cols()),
            epoch: 0,
        }
    }

    /// Pre-activations `v W + hbias`.
    fn hidden_pre(&self, v: &Matrix<F>) -> Result<Matrix<F>> {
        let mut pre = v.matmul(&self.w)?;
        pre.add_row(&self.hbias)?;
        Ok(pre)
    }

    /// Deterministic mean activation of the hidden units.
    pub fn hidden_mean(&self, v: &Matrix<F>) -> Result<Matrix<F>> {
        let pre = self.hidden_pre(v)?;
        Ok(match self.hidden_kind {
            HiddenKind::NoisyRelu => pre.map(relu),
            HiddenKind::Linear => pre,
        })
    }

    fn hidden_sample(&self, pre: &Matrix<F>, rng: &mut Rng) -> Matrix<F> {
        match self.hidden_kind {
            HiddenKind::NoisyRelu => pre.map(|x| {
                let sd = sigmoid_f64(x.to_f64()).sqrt();
                relu(x + F::from_f64(sd * rng.normal()))
            }),
            HiddenKind::Linear => pre.map(|x| x + F::from_f64(rng.normal())),
        }
    }

    /// Mean reconstruction of the visible units (unit-variance Gaussian).
    fn visible_mean(&self, h: &Matrix<F>) -> Result<Matrix<F>> {
        let mut v = h.matmul_nt(&self.w)?;
        v.add_row(&self.vbias)?;
        Ok(v)
    }
}

fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One CD-k update on a mini-batch (rows are z-normalised visible vectors).
/// Applies the gradient estimate minus L2 decay on `w`, with momentum, and
/// returns the mean squared reconstruction error of the batch.
pub fn cd_update<F: Scalar>(
    rbm: &mut GaussianRbm<F>,
    batch: &Matrix<F>,
    cfg: &CdConfig,
    state: &mut CdState<F>,
    rng: &mut Rng,
) -> Result<f64> {
    if batch.cols() != rbm.w.rows() {
        return Err(Error::ShapeMismatch {
            op: "cd_update",
            lrows: batch.rows(),
            lcols: batch.cols(),
            rrows: rbm.w.rows(),
            rcols: rbm.w.cols(),
        });
    }
    if batch.rows() == 0 {
        return Err(Error::invalid("cd_update: empty batch"));
    }
    let n = batch.rows();
    let inv_n = F::from_f64(1.0 / n as f64);

    let pre0 = rbm.hidden_pre(batch)?;
    let h0_mean = match rbm.hidden_kind {
        HiddenKind::NoisyRelu => pre0.map(relu),
        HiddenKind::Linear => pre0.clone(),
    };
    let mut chain_h = if cfg.sample_hidden {
        rbm.hidden_sample(&pre0, rng)
    } else {
        h0_mean.clone()
    };

    let mut v_model = rbm.visible_mean(&chain_h)?;
    let v_recon = v_model.clone(); // first reconstruction, used for the error
    for _ in 1..cfg.cd_steps {
        let pre = rbm.hidden_pre(&v_model)?;
        chain_h = if cfg.sample_hidden {
            rbm.hidden_sample(&pre, rng)
        } else {
            match rbm.hidden_kind {
                HiddenKind::NoisyRelu => pre.map(relu),
                HiddenKind::Linear => pre,
            }
        };
        v_model = rbm.visible_mean(&chain_h)?;
    }
    let h_model = rbm.hidden_mean(&v_model)?;

    if !v_model.is_all_finite() || !h_model.is_all_finite() {
        return Err(Error::numeric("cd_update", "non-finite activations"));
    }

    // grad_w = <v0 h0>/n - <vk hk>/n - l2 * w
    let mut grad_w = batch.matmul_tn(&h0_mean)?;
    grad_w.scale(inv_n);
    let mut neg = v_model.matmul_tn(&h_model)?;
    neg.scale(inv_n);
    grad_w.axpy(-F::one(), &neg)?;
    grad_w.axpy(F::from_f64(-cfg.l2), &rbm.w)?;

    let mut grad_vb = batch.col_sums();
    grad_vb.axpy(-F::one(), &v_model.col_sums())?;
    grad_vb.scale(inv_n);
    let mut grad_hb = h0_mean.col_sums();
    grad_hb.axpy(-F::one(), &h_model.col_sums())?;
    grad_hb.scale(inv_n);

    let momentum = if state.epoch < cfg.momentum_switch_epoch {
        cfg.momentum_early
    } else {
        cfg.momentum_late
    };
    let (m, lr) = (F::from_f64(momentum), F::from_f64(cfg.lr));
    state.vel_w.scale(m);
    state.vel_w.axpy(lr, &grad_w)?;
    state.vel_vbias.scale(m);
    state.vel_vbias.axpy(lr, &grad_vb)?;
    state.vel_hbias.scale(m);
    state.vel_hbias.axpy(lr, &grad_hb)?;
    rbm.w.add_assign(&state.vel_w)?;
    rbm.vbias.add_assign(&state.vel_vbias)?;
    rbm.hbias.add_assign(&state.vel_hbias)?;

    let diff = batch.sub(&v_recon)?;
    let err = diff.data().iter().map(|x| x.to_f64() * x.to_f64()).sum::<f64>()
        / (batch.rows() * batch.cols()) as f64;
    if !err.is_finite() {
        return Err(Error::numeric("cd_update", "non-finite reconstruction error"));
    }
    Ok(err)
}

/// Epoch-level training record for one RBM layer.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PretrainReport {
    /// Per-layer, per-epoch mean reconstruction error.
    pub layer_errors: Vec<Vec<f64>>,
}

/// Trains one RBM for `cfg.epochs` epochs over shuffled mini-batches.
pub fn train_rbm<F: Scalar>(
    data: &Matrix<F>,
    hidden: usize,
    kind: HiddenKind,
    cfg: &CdConfig,
    rng: &mut Rng,
) -> Result<(GaussianRbm<F>, Vec<f64>)> {
    if data.rows() == 0 {
        return Err(Error::invalid("train_rbm: empty data"));
    }
    let mut rbm = GaussianRbm::new(data.cols(), hidden, kind, rng);
    let mut state = rbm.state();
    let mut epoch_errors = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    for epoch in 0..cfg.epochs {
        state.epoch = epoch;
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut frames = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let mut batch = Matrix::zeros(chunk.len(), data.cols());
            for (r, &idx) in chunk.iter().enumerate() {
                batch.row_mut(r).copy_from_slice(data.row(idx));
            }
            let err = cd_update(&mut rbm, &batch, cfg, &mut state, rng)?;
            sum += err * chunk.len() as f64;
            frames += chunk.len();
        }
        epoch_errors.push(sum / frames as f64);
    }
    Ok((rbm, epoch_errors))
}

/// Greedy layer-wise pretraining: RBM 1 trains on the data, RBM k on the
/// deterministic mean activations of RBM k-1. `layer_sizes` must hold the
/// three hidden sizes plus the bottleneck size; the bottleneck RBM uses
/// linear hidden units. Returns the stacked weights as encoder initialisation.
pub fn pretrain_stack<F: Scalar>(
    data: &Matrix<F>,
    layer_sizes: &[usize],
    cfg: &CdConfig,
    rng: &mut Rng,
) -> Result<(Encoder<F>, PretrainReport)> {
    if data.rows() == 0 {
        return Err(Error::invalid("pretrain_stack: empty data"));
    }
    if layer_sizes.len() != 4 {
        return Err(Error::invalid(format!(
            "pretrain_stack expects 4 layer sizes (3 hidden + bottleneck), got {}",
            layer_sizes.len()
        )));
    }
    let mut layers = Vec::with_capacity(4);
    let mut report = PretrainReport {
        layer_errors: Vec::with_capacity(4),
    };
    let mut current = data.clone();
    for (k, &hidden) in layer_sizes.iter().enumerate() {
        let kind = if k == 3 {
            HiddenKind::Linear
        } else {
            HiddenKind::NoisyRelu
        };
        let mut layer_rng = rng.derive("rbm-layer", k as u64);
        let (rbm, errors) = train_rbm(&current, hidden, kind, cfg, &mut layer_rng)
            .map_err(|e| annotate_layer(e, k))?;
        current = rbm.hidden_mean(&current)?;
        report.layer_errors.push(errors);
        layers.push(DenseLayer {
            w: rbm.w,
            b: rbm.hbias,
            activation: if k == 3 {
                Activation::Linear
            } else {
                Activation::Relu
            },
        });
    }
    Ok((Encoder { layers }, report))
}

fn annotate_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::Numeric { location, detail } => Error::Numeric {
            location: format!("rbm layer {layer}: {location}"),
            detail,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_rbm(visible: usize, hidden: usize, kind: HiddenKind) -> GaussianRbm<f64> {
        GaussianRbm {
            w: Matrix::zeros(visible, hidden),
            vbias: Matrix::zeros(1, visible),
            hbias: Matrix::zeros(1, hidden),
            hidden_kind: kind,
        }
    }

    #[test]
    fn zero_parameters_report_mean_square_of_batch() {
        let mut rbm = zero_rbm(3, 2, HiddenKind::NoisyRelu);
        let mut state = rbm.state();
        let mut rng = Rng::new(0);
        let batch =
            Matrix::from_rows(&[vec![1.0, -1.0, 2.0], vec![0.5, 0.0, -0.5]]).unwrap();
        let expected: f64 = batch.data().iter().map(|x| x * x).sum::<f64>() / 6.0;
        let err = cd_update(&mut rbm, &batch, &CdConfig::default(), &mut state, &mut rng).unwrap();
        assert!((err - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_lr_leaves_parameters_bitwise_unchanged() {
        let mut rng = Rng::new(1);
        let mut rbm = GaussianRbm::<f64>::new(4, 3, HiddenKind::NoisyRelu, &mut rng);
        let before = rbm.clone();
        let mut state = rbm.state();
        let cfg = CdConfig {
            lr: 0.0,
            ..CdConfig::default()
        };
        let batch = Matrix::from_fn(5, 4, |_, _| rng.normal());
        cd_update(&mut rbm, &batch, &cfg, &mut state, &mut rng).unwrap();
        assert_eq!(rbm.w, before.w);
        assert_eq!(rbm.vbias, before.vbias);
        assert_eq!(rbm.hbias, before.hbias);
    }

    #[test]
    fn zero_information_data_only_decays_weights() {
        let mut rng = Rng::new(2);
        let mut rbm = GaussianRbm::<f64>::new(6, 4, HiddenKind::NoisyRelu, &mut rng);
        let mut state = rbm.state();
        let cfg = CdConfig::default();
        let batch = Matrix::zeros(10, 6);
        let mut prev = rbm.w.frobenius_norm();
        assert!(prev > 0.0);
        for _ in 0..30 {
            cd_update(&mut rbm, &batch, &cfg, &mut state, &mut rng).unwrap();
            let now = rbm.w.frobenius_norm();
            assert!(now < prev, "norm must shrink monotonically: {now} >= {prev}");
            prev = now;
        }
    }

    #[test]
    fn reconstruction_error_nonnegative_and_finite_each_epoch() {
        let mut rng = Rng::new(3);
        let data = Matrix::from_fn(60, 5, |_, _| rng.normal());
        let cfg = CdConfig {
            epochs: 5,
            batch_size: 16,
            ..CdConfig::default()
        };
        let (_, errors) = train_rbm(&data, 3, HiddenKind::NoisyRelu, &cfg, &mut rng).unwrap();
        assert_eq!(errors.len(), 5);
        assert!(errors.iter().all(|e| e.is_finite() && *e >= 0.0));
    }

    #[test]
    fn training_reduces_reconstruction_error_on_gaussian_data() {
        // 2-D correlated Gaussian; epoch-20 error below epoch-1 on >= 9/10 seeds.
        let mut wins = 0;
        for seed in 0..10u64 {
            let mut rng = Rng::new(seed);
            let data = Matrix::from_fn(200, 2, |_, c| {
                let z = rng.normal();
                if c == 0 {
                    z
                } else {
                    0.8 * z + 0.6 * rng.normal()
                }
            });
            let cfg = CdConfig {
                epochs: 20,
                batch_size: 50,
                ..CdConfig::default()
            };
            let (_, errors) = train_rbm(&data, 4, HiddenKind::NoisyRelu, &cfg, &mut rng).unwrap();
            if errors[19] < errors[0] {
                wins += 1;
            }
        }
        assert!(wins >= 9, "error decreased on only {wins}/10 seeds");
    }

    #[test]
    fn stack_shapes_follow_layer_sizes() {
        let mut rng = Rng::new(4);
        let data = Matrix::from_fn(40, 6, |_, _| rng.normal());
        let cfg = CdConfig {
            epochs: 2,
            batch_size: 10,
            ..CdConfig::default()
        };
        let (enc, report) = pretrain_stack(&data, &[4, 3, 2, 2], &cfg, &mut rng).unwrap();
        let shapes: Vec<_> = enc.layers.iter().map(|l| l.w.shape()).collect();
        assert_eq!(shapes, vec![(6, 4), (4, 3), (3, 2), (2, 2)]);
        assert_eq!(enc.layers[3].activation, Activation::Linear);
        assert_eq!(report.layer_errors.len(), 4);
    }

    #[test]
    fn stack_rejects_bad_inputs() {
        let mut rng = Rng::new(5);
        let data = Matrix::<f64>::zeros(0, 6);
        assert!(pretrain_stack(&data, &[4, 3, 2, 2], &CdConfig::default(), &mut rng).is_err());
        let data = Matrix::<f64>::zeros(5, 6);
        assert!(pretrain_stack(&data, &[4, 3, 2], &CdConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn default_config_echoes_training_recipe() {
        let cfg = CdConfig::default();
        assert_eq!(cfg.epochs, 20);
        assert_eq!(cfg.batch_size, 100);
        assert_eq!(cfg.l2, 0.0002);
        assert_eq!(cfg.lr, 0.001);
        assert_eq!(cfg.cd_steps, 1);
    }
}
