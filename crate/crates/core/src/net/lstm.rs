use crate::error::{Error, Result};
use crate::ndcore::{glorot_init, Matrix, Rng, Scalar};

/// Parameters of one LSTM direction. The four gates (input, forget, cell
/// candidate, output) are stored fused along the column axis in the order
/// `[i | f | g | o]`, so `wx` is `input_dim x 4H`, `wh` is `H x 4H` and `b`
/// is `1 x 4H`.
///
/// Standard cell, no peephole connections:
/// `i,f,o = sigmoid(..)`, `g = tanh(..)`,
/// `c_t = f . c_{t-1} + i . g`, `h_t = o . tanh(c_t)`.
#[derive(Debug, Clone)]
pub struct LstmParams<F> {
    pub wx: Matrix<F>,
    pub wh: Matrix<F>,
    pub b: Matrix<F>,
}

impl<F: Scalar> LstmParams<F> {
    /// Glorot weights, zero biases except the forget gate at 1.0.
    pub fn glorot(input_dim: usize, hidden: usize, rng: &mut Rng) -> Result<Self> {
        let wx = glorot_init(input_dim, 4 * hidden, rng)?;
        let wh = glorot_init(hidden, 4 * hidden, rng)?;
        let mut b = Matrix::zeros(1, 4 * hidden);
        for j in hidden..2 * hidden {
            b.row_mut(0)[j] = F::one();
        }
        Ok(LstmParams { wx, wh, b })
    }

    pub fn zeros_like(&self) -> Self {
        LstmParams {
            wx: Matrix::zeros(self.wx.rows(), self.wx.cols()),
            wh: Matrix::zeros(self.wh.rows(), self.wh.cols()),
            b: Matrix::zeros(1, self.b.cols()),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.wx.rows()
    }

    pub fn hidden(&self) -> usize {
        self.wh.rows()
    }
}

fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Forward state cached for backpropagation through time. All matrices are
/// indexed by sequence position `t` regardless of traversal direction.
pub struct LstmCache<F> {
    i: Matrix<F>,
    f: Matrix<F>,
    g: Matrix<F>,
    o: Matrix<F>,
    c: Matrix<F>,
    tc: Matrix<F>,
    h: Matrix<F>,
    reverse: bool,
}

/// Runs the recurrence over `seq` (`T x D`, valid frames only). `reverse`
/// traverses right-to-left; outputs land at their sequence positions either
/// way, so row `t` of the result is this direction's state at frame `t`.
pub fn lstm_forward<F: Scalar>(
    p: &LstmParams<F>,
    seq: &Matrix<F>,
    reverse: bool,
) -> Result<(Matrix<F>, LstmCache<F>)> {
    if seq.cols() != p.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "lstm_forward",
            lrows: seq.rows(),
            lcols: seq.cols(),
            rrows: p.wx.rows(),
            rcols: p.wx.cols(),
        });
    }
    let t_len = seq.rows();
    let h_dim = p.hidden();
    let xw = seq.matmul(&p.wx)?; // T x 4H, input contribution for every step
    let mut cache = LstmCache {
        i: Matrix::zeros(t_len, h_dim),
        f: Matrix::zeros(t_len, h_dim),
        g: Matrix::zeros(t_len, h_dim),
        o: Matrix::zeros(t_len, h_dim),
        c: Matrix::zeros(t_len, h_dim),
        tc: Matrix::zeros(t_len, h_dim),
        h: Matrix::zeros(t_len, h_dim),
        reverse,
    };
    let mut h_prev = vec![F::zero(); h_dim];
    let mut c_prev = vec![F::zero(); h_dim];
    let mut pre = vec![F::zero(); 4 * h_dim];
    let steps: Vec<usize> = if reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    for &t in &steps {
        pre.copy_from_slice(xw.row(t));
        for (j, v) in pre.iter_mut().enumerate() {
            *v = *v + p.b.row(0)[j];
        }
        for (k, &hp) in h_prev.iter().enumerate() {
            let wh_row = p.wh.row(k);
            for j in 0..4 * h_dim {
                pre[j] = pre[j] + hp * wh_row[j];
            }
        }
        for j in 0..h_dim {
            let i = sigmoid(pre[j]);
            let f = sigmoid(pre[h_dim + j]);
            let g = pre[2 * h_dim + j].tanh();
            let o = sigmoid(pre[3 * h_dim + j]);
            let c = f * c_prev[j] + i * g;
            let tc = c.tanh();
            let h = o * tc;
            cache.i[(t, j)] = i;
            cache.f[(t, j)] = f;
            cache.g[(t, j)] = g;
            cache.o[(t, j)] = o;
            cache.c[(t, j)] = c;
            cache.tc[(t, j)] = tc;
            cache.h[(t, j)] = h;
        }
        if !cache.h.row(t).iter().all(|x| x.is_finite()) {
            return Err(Error::numeric(
                format!("lstm_forward timestep {t}"),
                "non-finite hidden state",
            ));
        }
        h_prev.copy_from_slice(cache.h.row(t));
        c_prev.copy_from_slice(cache.c.row(t));
    }
    Ok((cache.h.clone(), cache))
}

/// BPTT for one direction. `d_hidden` is `T x H`; returns the input gradient
/// and parameter gradients in the parameter layout.
pub fn lstm_backward<F: Scalar>(
    p: &LstmParams<F>,
    seq: &Matrix<F>,
    cache: &LstmCache<F>,
    d_hidden: &Matrix<F>,
) -> Result<(Matrix<F>, LstmParams<F>)> {
    let t_len = seq.rows();
    let h_dim = p.hidden();
    if d_hidden.shape() != (t_len, h_dim) {
        return Err(Error::ShapeMismatch {
            op: "lstm_backward",
            lrows: d_hidden.rows(),
            lcols: d_hidden.cols(),
            rrows: t_len,
            rcols: h_dim,
        });
    }
    let mut grads = p.zeros_like();
    let mut d_seq = Matrix::zeros(t_len, seq.cols());
    let mut dh_carry = vec![F::zero(); h_dim];
    let mut dc_carry = vec![F::zero(); h_dim];
    let mut dpre = vec![F::zero(); 4 * h_dim];
    let steps: Vec<usize> = if cache.reverse {
        (0..t_len).rev().collect()
    } else {
        (0..t_len).collect()
    };
    // Walk the traversal order backwards; step k saw step k-1's state.
    for k in (0..steps.len()).rev() {
        let t = steps[k];
        let prev = if k > 0 { Some(steps[k - 1]) } else { None };
        for j in 0..h_dim {
            let dh = d_hidden[(t, j)] + dh_carry[j];
            let o = cache.o[(t, j)];
            let tc = cache.tc[(t, j)];
            let d_o = dh * tc;
            let dc = dh * o * (F::one() - tc * tc) + dc_carry[j];
            let i = cache.i[(t, j)];
            let f = cache.f[(t, j)];
            let g = cache.g[(t, j)];
            let c_prev = match prev {
                Some(tp) => cache.c[(tp, j)],
                None => F::zero(),
            };
            let d_i = dc * g;
            let d_g = dc * i;
            let d_f = dc * c_prev;
            dc_carry[j] = dc * f;
            dpre[j] = d_i * i * (F::one() - i);
            dpre[h_dim + j] = d_f * f * (F::one() - f);
            dpre[2 * h_dim + j] = d_g * (F::one() - g * g);
            dpre[3 * h_dim + j] = d_o * o * (F::one() - o);
        }
        let x_row = seq.row(t);
        for (d, &x) in x_row.iter().enumerate() {
            let wrow = grads.wx.row_mut(d);
            for j in 0..4 * h_dim {
                wrow[j] = wrow[j] + x * dpre[j];
            }
        }
        if let Some(tp) = prev {
            let hp = cache.h.row(tp).to_vec();
            for (kdim, &h) in hp.iter().enumerate() {
                let wrow = grads.wh.row_mut(kdim);
                for j in 0..4 * h_dim {
                    wrow[j] = wrow[j] + h * dpre[j];
                }
            }
        }
        {
            let brow = grads.b.row_mut(0);
            for j in 0..4 * h_dim {
                brow[j] = brow[j] + dpre[j];
            }
        }
        {
            let dx_row = d_seq.row_mut(t);
            for (d, slot) in dx_row.iter_mut().enumerate() {
                let wx_row = p.wx.row(d);
                let mut s = F::zero();
                for j in 0..4 * h_dim {
                    s = s + dpre[j] * wx_row[j];
                }
                *slot = s;
            }
        }
        for (kdim, carry) in dh_carry.iter_mut().enumerate() {
            let wh_row = p.wh.row(kdim);
            let mut s = F::zero();
            for j in 0..4 * h_dim {
                s = s + dpre[j] * wh_row[j];
            }
            *carry = s;
        }
    }
    Ok((d_seq, grads))
}

pub struct BlstmCache<F> {
    pub fwd: LstmCache<F>,
    pub bwd: LstmCache<F>,
}

/// Bidirectional pass: per-frame output is `[fwd_t ; bwd_t]`, `T x 2H`.
pub fn blstm_forward<F: Scalar>(
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
    seq: &Matrix<F>,
) -> Result<(Matrix<F>, BlstmCache<F>)> {
    let (hf, cf) = lstm_forward(fwd, seq, false)?;
    let (hb, cb) = lstm_forward(bwd, seq, true)?;
    let h_dim = fwd.hidden();
    let mut out = Matrix::zeros(seq.rows(), 2 * h_dim);
    for t in 0..seq.rows() {
        out.row_mut(t)[..h_dim].copy_from_slice(hf.row(t));
        out.row_mut(t)[h_dim..].copy_from_slice(hb.row(t));
    }
    Ok((out, BlstmCache { fwd: cf, bwd: cb }))
}

pub fn blstm_backward<F: Scalar>(
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
    seq: &Matrix<F>,
    cache: &BlstmCache<F>,
    d_out: &Matrix<F>,
) -> Result<(Matrix<F>, LstmParams<F>, LstmParams<F>)> {
    let h_dim = fwd.hidden();
    if d_out.shape() != (seq.rows(), 2 * h_dim) {
        return Err(Error::ShapeMismatch {
            op: "blstm_backward",
            lrows: d_out.rows(),
            lcols: d_out.cols(),
            rrows: seq.rows(),
            rcols: 2 * h_dim,
        });
    }
    let mut d_f = Matrix::zeros(seq.rows(), h_dim);
    let mut d_b = Matrix::zeros(seq.rows(), h_dim);
    for t in 0..seq.rows() {
        d_f.row_mut(t).copy_from_slice(&d_out.row(t)[..h_dim]);
        d_b.row_mut(t).copy_from_slice(&d_out.row(t)[h_dim..]);
    }
    let (dx_f, g_f) = lstm_backward(fwd, seq, &cache.fwd, &d_f)?;
    let (dx_b, g_b) = lstm_backward(bwd, seq, &cache.bwd, &d_b)?;
    let mut d_seq = dx_f;
    d_seq.add_assign(&dx_b)?;
    Ok((d_seq, g_f, g_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_parameters_give_zero_states() {
        let p = LstmParams::<f64> {
            wx: Matrix::zeros(3, 8),
            wh: Matrix::zeros(2, 8),
            b: Matrix::zeros(1, 8),
        };
        let seq = Matrix::from_fn(4, 3, |t, d| (t + d) as f64);
        let (out, _) = blstm_forward(&p, &p, &seq).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn palindromic_input_with_tied_directions_is_symmetric() {
        let mut rng = Rng::new(31);
        let p = LstmParams::<f64>::glorot(2, 3, &mut rng).unwrap();
        // seq[t] == seq[T-1-t]
        let rows = vec![
            vec![0.3, -0.8],
            vec![1.1, 0.2],
            vec![-0.5, 0.9],
            vec![1.1, 0.2],
            vec![0.3, -0.8],
        ];
        let seq = Matrix::from_rows(&rows).unwrap();
        let (hf, _) = lstm_forward(&p, &seq, false).unwrap();
        let (hb, _) = lstm_forward(&p, &seq, true).unwrap();
        let t_len = seq.rows();
        for t in 0..t_len {
            for j in 0..3 {
                let a = hf[(t, j)];
                let b = hb[(t_len - 1 - t, j)];
                assert!((a - b).abs() < 1e-12, "t={t} j={j}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_direction_ignores_future_frames() {
        let mut rng = Rng::new(55);
        let p = LstmParams::<f64>::glorot(2, 2, &mut rng).unwrap();
        let mut seq = Matrix::from_fn(5, 2, |_, _| rng.normal());
        let (h1, _) = lstm_forward(&p, &seq, false).unwrap();
        // Perturb the last frame; outputs before it must be bitwise identical.
        seq[(4, 0)] = seq[(4, 0)] + 3.0;
        let (h2, _) = lstm_forward(&p, &seq, false).unwrap();
        for t in 0..4 {
            assert_eq!(h1.row(t), h2.row(t));
        }
        assert_ne!(h1.row(4), h2.row(4));
    }

    #[test]
    fn backward_direction_ignores_past_frames() {
        let mut rng = Rng::new(56);
        let p = LstmParams::<f64>::glorot(2, 2, &mut rng).unwrap();
        let mut seq = Matrix::from_fn(5, 2, |_, _| rng.normal());
        let (h1, _) = lstm_forward(&p, &seq, true).unwrap();
        seq[(0, 0)] = seq[(0, 0)] + 3.0;
        let (h2, _) = lstm_forward(&p, &seq, true).unwrap();
        for t in 1..5 {
            assert_eq!(h1.row(t), h2.row(t));
        }
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_grads() {
        let mut rng = Rng::new(57);
        let fwd = LstmParams::<f64>::glorot(3, 2, &mut rng).unwrap();
        let bwd = LstmParams::<f64>::glorot(3, 2, &mut rng).unwrap();
        let seq = Matrix::from_fn(4, 3, |_, _| rng.normal());
        let (out, cache) = blstm_forward(&fwd, &bwd, &seq).unwrap();
        let d_out = Matrix::zeros(out.rows(), out.cols());
        let (d_seq, g_f, g_b) = blstm_backward(&fwd, &bwd, &seq, &cache, &d_out).unwrap();
        assert!(d_seq.data().iter().all(|&v| v == 0.0));
        assert!(g_f.wx.data().iter().all(|&v| v == 0.0));
        assert!(g_b.wh.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forget_gate_bias_initialised_to_one() {
        let mut rng = Rng::new(58);
        let p = LstmParams::<f64>::glorot(3, 4, &mut rng).unwrap();
        let b = p.b.row(0);
        assert!(b[..4].iter().all(|&v| v == 0.0));
        assert!(b[4..8].iter().all(|&v| v == 1.0));
        assert!(b[8..].iter().all(|&v| v == 0.0));
    }
}
