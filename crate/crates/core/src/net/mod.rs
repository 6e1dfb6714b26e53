//! Differentiable layers with hand-written forward and backward passes:
//! dense layers, delta feature append, LSTM/BLSTM and the softmax head.

mod batch;
mod dense;
mod delta;
mod lstm;

pub use batch::SequenceBatch;
pub use delta::{delta_backward, delta_features, DeltaConfig};
pub use dense::{Activation, DenseLayer, Encoder, EncoderCache};
pub use lstm::{
    blstm_backward, blstm_forward, lstm_backward, lstm_forward, BlstmCache, LstmCache, LstmParams,
};

use crate::error::Result;
use crate::ndcore::activations::softmax_rows;
use crate::ndcore::{Matrix, Scalar};

/// Affine map plus row-wise softmax: per-frame class distributions.
pub fn softmax_head<F: Scalar>(head: &DenseLayer<F>, x: &Matrix<F>) -> Result<Matrix<F>> {
    let mut logits = head.forward(x)?;
    softmax_rows(&mut logits);
    Ok(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcore::Rng;

    #[test]
    fn zero_head_gives_uniform_distributions() {
        let head = DenseLayer::<f64> {
            w: Matrix::zeros(4, 10),
            b: Matrix::zeros(1, 10),
            activation: Activation::Linear,
        };
        let x = Matrix::from_fn(3, 4, |t, d| (t + d) as f64);
        let dists = softmax_head(&head, &x).unwrap();
        for t in 0..3 {
            for &p in dists.row(t) {
                assert!((p - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn huge_logit_saturates_without_overflow() {
        let mut rng = Rng::new(2);
        let mut head = DenseLayer::<f64>::glorot(2, 3, Activation::Linear, &mut rng).unwrap();
        head.b.row_mut(0)[1] = 1e4;
        let x = Matrix::zeros(1, 2);
        let dists = softmax_head(&head, &x).unwrap();
        assert!(dists[(0, 1)] > 0.9999);
        assert!(dists.is_all_finite());
    }
}
