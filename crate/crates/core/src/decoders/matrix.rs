//! Row-major dense matrices; just enough linear algebra for the decoders.

use super::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Real> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [S] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }

    /// self (rows x cols) * x (cols) -> rows
    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .fold(S::zero(), |acc, (&w, &xi)| acc + w * xi)
            })
            .collect()
    }

    /// self^T (cols x rows) * x (rows) -> cols
    pub fn matvec_t(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![S::zero(); self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            for (o, &w) in out.iter_mut().zip(self.row(r)) {
                *o = *o + w * xr;
            }
        }
        out
    }

    /// self += a * x y^T (rank-1 accumulate; for weight gradients)
    pub fn add_outer(&mut self, x: &[S], y: &[S]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let xr = x[r];
            for (w, &yc) in self.row_mut(r).iter_mut().zip(y) {
                *w = *w + xr * yc;
            }
        }
    }
}

/// a (n x k) * b^T where b is (m x k) -> (n x m). This is `X . W^T`.
pub fn matmul_nt<S: Real>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    assert_eq!(a.cols, b.cols);
    let mut out = Matrix::zeros(a.rows, b.rows);
    for i in 0..a.rows {
        let arow = a.row(i);
        for j in 0..b.rows {
            let mut acc = S::zero();
            for (&av, &bv) in arow.iter().zip(b.row(j)) {
                acc = acc + av * bv;
            }
            out.set(i, j, acc);
        }
    }
    out
}

/// a (n x k) * b (k x m) -> (n x m)
pub fn matmul_nn<S: Real>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    assert_eq!(a.cols, b.rows);
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if aik == S::zero() {
                continue;
            }
            let brow = b.row(k);
            let orow = out.row_mut(i);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + aik * bv;
            }
        }
    }
    out
}

/// a^T (k x n) * b (n x m) -> (k x m) where a is (n x k). This is `dY^T . X`.
pub fn matmul_tn<S: Real>(a: &Matrix<S>, b: &Matrix<S>) -> Matrix<S> {
    assert_eq!(a.rows, b.rows);
    let mut out = Matrix::zeros(a.cols, b.cols);
    for i in 0..a.rows {
        let arow = a.row(i);
        let brow = b.row(i);
        for (k, &av) in arow.iter().enumerate() {
            if av == S::zero() {
                continue;
            }
            let orow = out.row_mut(k);
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o = *o + av * bv;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix<f64> {
        Matrix::from_rows(rows, cols, v.to_vec())
    }

    #[test]
    fn matvec_and_transpose_agree_with_hand_math() {
        let w = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(w.matvec(&[1.0, 0.0, -1.0]), vec![-2.0, -2.0]);
        assert_eq!(w.matvec_t(&[1.0, -1.0]), vec![-3.0, -3.0, -3.0]);
    }

    #[test]
    fn matmul_variants_agree() {
        let x = m(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = m(4, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let y = matmul_nt(&x, &w); // 2x4
        assert_eq!(y.row(0), &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(y.row(1), &[4.0, 5.0, 6.0, 15.0]);

        // (x^T y) spot check: 3x4
        let t = matmul_tn(&x, &y);
        assert_eq!(t.get(0, 0), 1.0 * 1.0 + 4.0 * 4.0);

        let id = m(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(matmul_nn(&x, &id), x);
    }

    #[test]
    fn add_outer_accumulates() {
        let mut g = Matrix::<f64>::zeros(2, 3);
        g.add_outer(&[1.0, 2.0], &[1.0, 0.0, -1.0]);
        g.add_outer(&[1.0, 0.0], &[0.0, 1.0, 0.0]);
        assert_eq!(g.row(0), &[1.0, 1.0, -1.0]);
        assert_eq!(g.row(1), &[2.0, 0.0, -2.0]);
    }
}
