use crate::ndcore::{Matrix, Scalar};

/// Window for the delta regression. Sequences shorter than `2*window + 1`
/// work through edge replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaConfig {
    pub window: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        DeltaConfig { window: 2 }
    }
}

fn clamp(t: isize, max: usize) -> usize {
    t.clamp(0, max as isize) as usize
}

/// One pass of the windowed regression:
/// `d_t = sum_theta theta * (c_{t+theta} - c_{t-theta}) / (2 * sum_theta theta^2)`,
/// with first/last frames replicated past the edges.
fn regress<F: Scalar>(seq: &Matrix<F>, window: usize) -> Matrix<F> {
    let (t_len, dim) = seq.shape();
    let denom: f64 = 2.0 * (1..=window).map(|t| (t * t) as f64).sum::<f64>();
    let inv = F::from_f64(1.0 / denom);
    let mut out = Matrix::zeros(t_len, dim);
    for t in 0..t_len {
        for theta in 1..=window {
            let ahead = seq.row(clamp(t as isize + theta as isize, t_len - 1));
            let behind = seq.row(clamp(t as isize - theta as isize, t_len - 1));
            let w = F::from_f64(theta as f64);
            let row = out.row_mut(t);
            for d in 0..dim {
                row[d] = row[d] + w * (ahead[d] - behind[d]);
            }
        }
        for v in out.row_mut(t) {
            *v = *v * inv;
        }
    }
    out
}

/// Adjoint of `regress`: exact transpose of the linear map.
fn regress_adjoint<F: Scalar>(d: &Matrix<F>, window: usize) -> Matrix<F> {
    let (t_len, dim) = d.shape();
    let denom: f64 = 2.0 * (1..=window).map(|t| (t * t) as f64).sum::<f64>();
    let inv = F::from_f64(1.0 / denom);
    let mut out = Matrix::zeros(t_len, dim);
    for t in 0..t_len {
        for theta in 1..=window {
            let ahead = clamp(t as isize + theta as isize, t_len - 1);
            let behind = clamp(t as isize - theta as isize, t_len - 1);
            let w = F::from_f64(theta as f64) * inv;
            for dcol in 0..dim {
                let g = w * d[(t, dcol)];
                out[(ahead, dcol)] = out[(ahead, dcol)] + g;
                out[(behind, dcol)] = out[(behind, dcol)] - g;
            }
        }
    }
    out
}

/// Appends delta and delta-delta features: `T x D` -> `T x 3D` with frame `t`
/// laid out as `[c_t, delta_t, deltadelta_t]`. The second derivative applies
/// the same regression to the deltas.
pub fn delta_features<F: Scalar>(seq: &Matrix<F>, cfg: DeltaConfig) -> Matrix<F> {
    let (t_len, dim) = seq.shape();
    let d1 = regress(seq, cfg.window);
    let d2 = regress(&d1, cfg.window);
    let mut out = Matrix::zeros(t_len, 3 * dim);
    for t in 0..t_len {
        let row = out.row_mut(t);
        row[..dim].copy_from_slice(seq.row(t));
        row[dim..2 * dim].copy_from_slice(d1.row(t));
        row[2 * dim..].copy_from_slice(d2.row(t));
    }
    out
}

/// Backward pass of [`delta_features`]: splits the upstream `T x 3D` gradient
/// and applies the regression adjoint along both delta paths.
pub fn delta_backward<F: Scalar>(d_out: &Matrix<F>, cfg: DeltaConfig) -> Matrix<F> {
    let t_len = d_out.rows();
    let dim = d_out.cols() / 3;
    debug_assert_eq!(d_out.cols(), 3 * dim);
    let mut dc = Matrix::zeros(t_len, dim);
    let mut dd1 = Matrix::zeros(t_len, dim);
    let mut dd2 = Matrix::zeros(t_len, dim);
    for t in 0..t_len {
        let row = d_out.row(t);
        dc.row_mut(t).copy_from_slice(&row[..dim]);
        dd1.row_mut(t).copy_from_slice(&row[dim..2 * dim]);
        dd2.row_mut(t).copy_from_slice(&row[2 * dim..]);
    }
    // out = [c, R(c), R(R(c))]  =>  dc_total = dc + R^T(dd1 + R^T(dd2))
    let dd1_total = {
        let mut d = dd1;
        d.add_assign(&regress_adjoint(&dd2, cfg.window)).unwrap();
        d
    };
    dc.add_assign(&regress_adjoint(&dd1_total, cfg.window))
        .unwrap();
    dc
}
