//! Closed-form ridge regression baseline.

use super::matrix::Matrix;
use super::real::Real;
use super::DecoderError;

#[derive(Clone, Debug, PartialEq)]
pub struct LinearDecoder<S> {
    /// 2 x in weight matrix.
    pub w: Matrix<S>,
    pub intercept: [S; 2],
}

impl<S: Real> LinearDecoder<S> {
    pub fn input_dim(&self) -> usize {
        self.w.cols
    }

    pub fn predict_vec(&self, x: &[S]) -> Result<[S; 2], DecoderError> {
        if x.len() != self.input_dim() {
            return Err(DecoderError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let y = self.w.matvec(x);
        Ok([y[0] + self.intercept[0], y[1] + self.intercept[1]])
    }

    pub fn param_count(&self) -> usize {
        self.w.data.len() + 2
    }

    pub fn params(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.w.data);
        out.extend_from_slice(&self.intercept);
        out
    }

    pub fn set_params(&mut self, params: &[S]) {
        assert_eq!(params.len(), self.param_count());
        let (w, rest) = params.split_at(self.w.data.len());
        self.w.data.copy_from_slice(w);
        self.intercept = [rest[0], rest[1]];
    }
}

/// Solves `(X^T X + lambda I) W = X^T Y` with an unpenalized intercept
/// column, in f64. `rows` yields the training feature rows, `targets` the
/// matching `(v_x, v_y)` pairs.
pub fn linear_fit<S: Real>(
    rows: &[&[f32]],
    targets: &[[f32; 2]],
    ridge_lambda: f64,
) -> Result<LinearDecoder<S>, DecoderError> {
    if rows.is_empty() {
        return Err(DecoderError::EmptyPartition("linear fit".into()));
    }
    if ridge_lambda < 0.0 {
        return Err(DecoderError::Config("ridge_lambda must be >= 0".into()));
    }
    assert_eq!(rows.len(), targets.len());
    let d = rows[0].len();
    let da = d + 1; // augmented with the intercept column

    // normal equations in f64
    let mut gram = vec![0.0f64; da * da];
    let mut rhs = vec![[0.0f64; 2]; da];
    let mut xa = vec![0.0f64; da];
    for (row, t) in rows.iter().zip(targets) {
        for (v, &r) in xa.iter_mut().zip(row.iter()) {
            *v = f64::from(r);
        }
        xa[d] = 1.0;
        for i in 0..da {
            if xa[i] == 0.0 {
                continue;
            }
            for j in i..da {
                gram[i * da + j] += xa[i] * xa[j];
            }
            rhs[i][0] += xa[i] * f64::from(t[0]);
            rhs[i][1] += xa[i] * f64::from(t[1]);
        }
    }
    for i in 0..da {
        for j in 0..i {
            gram[i * da + j] = gram[j * da + i];
        }
    }
    // penalize the weights, never the intercept
    for i in 0..d {
        gram[i * da + i] += ridge_lambda;
    }

    let solution = solve_two_rhs(&mut gram, &mut rhs, da)?;

    let mut w = Matrix::zeros(2, d);
    for c in 0..d {
        w.set(0, c, S::of(solution[c][0]));
        w.set(1, c, S::of(solution[c][1]));
    }
    Ok(LinearDecoder {
        w,
        intercept: [S::of(solution[d][0]), S::of(solution[d][1])],
    })
}

/// Gaussian elimination with partial pivoting for two right-hand sides.
fn solve_two_rhs(
    a: &mut [f64],
    b: &mut [[f64; 2]],
    n: usize,
) -> Result<Vec<[f64; 2]>, DecoderError> {
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap();
        if pivot < 1e-12 {
            return Err(DecoderError::Numeric(
                "singular normal equations; use ridge_lambda > 0".into(),
            ));
        }
        if pivot_row != col {
            for c in 0..n {
                a.swap(pivot_row * n + c, col * n + c);
            }
            b.swap(pivot_row, col);
        }
        let diag = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= factor * a[col * n + c];
            }
            b[r][0] -= factor * b[col][0];
            b[r][1] -= factor * b[col][1];
        }
    }
    let mut x = vec![[0.0f64; 2]; n];
    for r in (0..n).rev() {
        let mut acc = b[r];
        for c in r + 1..n {
            acc[0] -= a[r * n + c] * x[c][0];
            acc[1] -= a[r * n + c] * x[c][1];
        }
        let diag = a[r * n + r];
        x[r] = [acc[0] / diag, acc[1] / diag];
    }
    Ok(x)
}
