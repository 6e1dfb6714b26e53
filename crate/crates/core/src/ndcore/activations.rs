use super::{Matrix, Scalar};

#[inline]
pub fn relu<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

/// Derivative of relu as a function of the *pre-activation* input.
#[inline]
pub fn relu_grad<F: Scalar>(x: F) -> F {
    if x > F::zero() {
        F::one()
    } else {
        F::zero()
    }
}

#[inline]
pub fn identity<F: Scalar>(x: F) -> F {
    x
}

/// In-place softmax with max subtraction, so huge logits cannot overflow.
pub fn softmax_slice<F: Scalar>(xs: &mut [F]) {
    if xs.is_empty() {
        return;
    }
    let mut max = xs[0];
    for &x in xs.iter() {
        if x > max {
            max = x;
        }
    }
    let mut sum = F::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in xs.iter_mut() {
        *x = *x / sum;
    }
}

pub fn softmax<F: Scalar>(xs: &[F]) -> Vec<F> {
    let mut out = xs.to_vec();
    softmax_slice(&mut out);
    out
}

/// Row-wise softmax over a `T x C` matrix of logits.
pub fn softmax_rows<F: Scalar>(m: &mut Matrix<F>) {
    for r in 0..m.rows() {
        softmax_slice(m.row_mut(r));
    }
}

/// Stable `log(sum_i exp(x_i))`.
pub fn log_sum_exp<F: Scalar>(xs: &[F]) -> F {
    let mut max = xs[0];
    for &x in xs.iter() {
        if x > max {
            max = x;
        }
    }
    let mut sum = F::zero();
    for &x in xs.iter() {
        sum = sum + (x - max).exp();
    }
    max + sum.ln()
}
