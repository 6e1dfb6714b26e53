use super::Scalar;
use crate::error::{Error, Result};

/// Dense row-major matrix. The only tensor shape in the crate; sequences are
/// handled as `T x D` matrices (one frame per row) and vectors as `1 x n`.
///
/// Summation order in every product is fixed, so results are bitwise
/// reproducible run to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Matrix<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<F>]) -> Result<Self> {
        let cols = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid("ragged rows in Matrix::from_rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[F] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of the first `n` rows; used to strip padding before any compute.
    pub fn top_rows(&self, n: usize) -> Matrix<F> {
        assert!(n <= self.rows, "top_rows: {} > {}", n, self.rows);
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    fn shape_err(&self, op: &'static str, other: &Matrix<F>) -> Error {
        Error::ShapeMismatch {
            op,
            lrows: self.rows,
            lcols: self.cols,
            rrows: other.rows,
            rcols: other.cols,
        }
    }

    /// `self (m x k) * other (k x n)`.
    pub fn matmul(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.rows {
            return Err(self.shape_err("matmul", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = self.row(i);
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate().take(k) {
                let b_row = &other.data[p * n..(p + 1) * n];
                for j in 0..n {
                    out_row[j] = out_row[j] + a * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// Computes `self^T * other` without materializing the transpose;
    /// `self (k x m)`, `other (k x n)` -> `(m x n)`.
    pub fn matmul_tn(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.rows != other.rows {
            return Err(self.shape_err("matmul_tn", other));
        }
        let (k, m, n) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, n);
        for p in 0..k {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a) in a_row.iter().enumerate().take(m) {
                let out_row = &mut out.data[i * n..(i + 1) * n];
                for j in 0..n {
                    out_row[j] = out_row[j] + a * b_row[j];
                }
            }
        }
        Ok(out)
    }

    /// Computes `self * other^T`; `self (m x k)`, `other (n x k)` -> `(m x n)`.
    pub fn matmul_nt(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.cols != other.cols {
            return Err(self.shape_err("matmul_nt", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, n);
        for i in 0..m {
            let a_row = self.row(i);
            for j in 0..n {
                let b_row = other.row(j);
                let mut s = F::zero();
                for p in 0..k {
                    s = s + a_row[p] * b_row[p];
                }
                out.data[i * n + j] = s;
            }
        }
        Ok(out)
    }

    /// Adds a `1 x cols` bias row to every row.
    pub fn add_row(&mut self, bias: &Matrix<F>) -> Result<()> {
        if bias.rows != 1 || bias.cols != self.cols {
            return Err(self.shape_err("add_row", bias));
        }
        for r in 0..self.rows {
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (x, &b) in row.iter_mut().zip(&bias.data) {
                *x = *x + b;
            }
        }
        Ok(())
    }

    /// Column sums as a `1 x cols` matrix.
    pub fn col_sums(&self) -> Matrix<F> {
        let mut out = Matrix::zeros(1, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c] = out.data[c] + self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix<F> {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Matrix<F> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn map_inplace(&mut self, f: impl Fn(F) -> F) {
        for x in &mut self.data {
            *x = f(*x);
        }
    }

    pub fn fill(&mut self, v: F) {
        for x in &mut self.data {
            *x = v;
        }
    }

    pub fn scale(&mut self, a: F) {
        for x in &mut self.data {
            *x = *x * a;
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: F, other: &Matrix<F>) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(self.shape_err("axpy", other));
        }
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x = *x + alpha * y;
        }
        Ok(())
    }

    pub fn add_assign(&mut self, other: &Matrix<F>) -> Result<()> {
        self.axpy(F::one(), other)
    }

    pub fn sub(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.shape() != other.shape() {
            return Err(self.shape_err("sub", other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Elementwise product.
    pub fn hadamard(&self, other: &Matrix<F>) -> Result<Matrix<F>> {
        if self.shape() != other.shape() {
            return Err(self.shape_err("hadamard", other));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| a * b)
            .collect();
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|x| x.to_f64() * x.to_f64())
            .sum::<f64>()
            .sqrt()
    }

    pub fn identity(n: usize) -> Matrix<F> {
        Matrix::from_fn(n, n, |r, c| if r == c { F::one() } else { F::zero() })
    }
}

impl<F: Scalar> std::ops::Index<(usize, usize)> for Matrix<F> {
    type Output = F;

    fn index(&self, (r, c): (usize, usize)) -> &F {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<F: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<F> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut F {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

/// Layer outputs are checked for finiteness in debug/test builds.
#[inline]
pub fn debug_assert_finite<F: Scalar>(m: &Matrix<F>, context: &str) {
    debug_assert!(m.is_all_finite(), "non-finite values after {context}");
    let _ = (m, context);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity_leaves_operand_unchanged() {
        let a = Matrix::<f64>::from_rows(&[vec![1.0, -2.0, 0.5], vec![3.0, 4.0, -1.0]]).unwrap();
        let eye = Matrix::<f64>::identity(3);
        assert_eq!(a.matmul(&eye).unwrap(), a);
    }

    #[test]
    fn matmul_small_instance_matches_hand_computation() {
        // (2x3)*(3x1): [1 2 3; 4 5 6] * [7; 8; 9] = [50; 122]
        let a = Matrix::<f64>::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Matrix::<f64>::from_rows(&[vec![7.0], vec![8.0], vec![9.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.shape(), (2, 1));
        assert_eq!(c[(0, 0)], 50.0);
        assert_eq!(c[(1, 0)], 122.0);
    }

    #[test]
    fn matmul_shape_mismatch_errors() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(2, 3);
        assert!(matches!(
            a.matmul(&b),
            Err(Error::ShapeMismatch { op: "matmul", .. })
        ));
    }

    #[test]
    fn transpose_products_agree_with_explicit_transpose() {
        let a = Matrix::<f64>::from_fn(4, 3, |r, c| (r * 3 + c) as f64 * 0.37 - 1.0);
        let b = Matrix::<f64>::from_fn(4, 2, |r, c| (r * 2 + c) as f64 * 0.11 + 0.5);
        assert_eq!(a.matmul_tn(&b).unwrap(), a.transpose().matmul(&b).unwrap());
        let c = Matrix::<f64>::from_fn(5, 3, |r, c| (r + c) as f64 * 0.21 - 0.4);
        assert_eq!(
            a.matmul_nt(&c).unwrap(),
            a.matmul(&c.transpose()).unwrap()
        );
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Matrix::<f32>::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn col_sums_and_add_row() {
        let mut a = Matrix::<f64>::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let s = a.col_sums();
        assert_eq!(s.data(), &[4.0, 6.0]);
        let bias = Matrix::<f64>::from_vec(1, 2, vec![10.0, 20.0]).unwrap();
        a.add_row(&bias).unwrap();
        assert_eq!(a.row(1), &[13.0, 24.0]);
    }
}
