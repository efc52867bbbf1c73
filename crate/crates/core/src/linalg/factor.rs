use crate::error::{Error, Result};

use super::matrix::{dot, DenseMatrix, DenseVector, IndexSet};

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: DenseMatrix,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix.
    ///
    /// Symmetry is checked against `1e-12 * max|a_ij|`; only the lower
    /// triangle takes part in the factorization.
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        let asymmetry = a.max_asymmetry();
        if asymmetry > 1e-12 * a.max_abs() {
            return Err(Error::NotSymmetric { asymmetry });
        }
        Self::factor_lower(a)
    }

    fn factor_lower(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows();
        // column-major buffer of L, filled column by column
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = a.get(j, j);
            for k in 0..j {
                let ljk = l[k * n + j];
                d -= ljk * ljk;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { column: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l[k * n + i] * l[k * n + j];
                }
                l[j * n + i] = s / djj;
            }
        }
        Ok(Self {
            l: DenseMatrix::new(n, n, l)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn factor(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn into_factor(self) -> DenseMatrix {
        self.l
    }

    /// Solves `A x = b` in place by forward and back substitution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        let l = self.l.as_slice();
        // L y = b (column-oriented forward substitution)
        for j in 0..n {
            b[j] /= l[j * n + j];
            let yj = b[j];
            for i in (j + 1)..n {
                b[i] -= l[j * n + i] * yj;
            }
        }
        // Lᵀ x = y
        for j in (0..n).rev() {
            let col = &l[j * n..(j + 1) * n];
            let s = dot(&col[j + 1..], &b[j + 1..]);
            b[j] = (b[j] - s) / col[j];
        }
    }

    pub fn solve(&self, b: &[f64]) -> DenseVector {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        DenseVector::new(x).expect("finite solve of a positive definite system")
    }
}

/// Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::new(a).map(Cholesky::into_factor)
}

/// Factors `a`; on failure retries once with `ridge * trace(a) / n` added to
/// the diagonal. Returns the factor and whether the ridge was needed.
pub fn cholesky_with_ridge(a: &DenseMatrix, ridge: f64) -> Result<(Cholesky, bool)> {
    match Cholesky::new(a) {
        Ok(c) => Ok((c, false)),
        Err(Error::NotPositiveDefinite { .. }) => {
            let n = a.rows();
            let shift = ridge * a.trace() / n as f64;
            if !(shift > 0.0) {
                return Err(Error::RankDeficient { support: n });
            }
            let mut shifted = a.clone();
            for i in 0..n {
                shifted.set(i, i, a.get(i, i) + shift);
            }
            Cholesky::factor_lower(&shifted)
                .map(|c| (c, true))
                .map_err(|_| Error::RankDeficient { support: n })
        }
        Err(e) => Err(e),
    }
}

/// Relative ridge used when a normal-equation Gram matrix is singular.
pub const GRAM_RIDGE: f64 = 1e-10;

/// Solution of a support-restricted least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquaresFit {
    /// Full-length coefficients, exactly zero off the support.
    pub beta: DenseVector,
    /// True when the Gram matrix needed the ridge fallback.
    pub regularized: bool,
}

/// Minimizes `|A_S x_S - b|₂` over vectors supported on `support`.
///
/// Solves the normal equations of the column submatrix through a Cholesky
/// factorization of its Gram matrix, falling back once to a ridge of
/// `1e-10 * trace(Gram) / |S|` when the Gram matrix is singular.
pub fn restricted_least_squares(
    a: &DenseMatrix,
    b: &[f64],
    support: &IndexSet,
) -> Result<LeastSquaresFit> {
    if b.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            expected: (a.rows(), 1),
            got: (b.len(), 1),
        });
    }
    if support.is_empty() {
        return Err(Error::InvalidIndexSet("support must be non-empty".into()));
    }
    if support.len() > a.rows() {
        return Err(Error::InvalidIndexSet(format!(
            "support of size {} exceeds {} rows",
            support.len(),
            a.rows()
        )));
    }
    if let Some(bad) = support.iter().find(|&j| j >= a.cols()) {
        return Err(Error::InvalidIndexSet(format!(
            "index {bad} out of range for {} columns",
            a.cols()
        )));
    }
    let k = support.len();
    let cols: Vec<&[f64]> = support.iter().map(|j| a.col(j)).collect();
    let mut gram = DenseMatrix::zeros(k, k);
    for c in 0..k {
        for r in c..k {
            let g = dot(cols[r], cols[c]);
            gram.set(r, c, g);
            gram.set(c, r, g);
        }
    }
    let (chol, regularized) = cholesky_with_ridge(&gram, GRAM_RIDGE)
        .map_err(|_| Error::RankDeficient { support: k })?;
    let mut rhs: Vec<f64> = cols.iter().map(|c| dot(c, b)).collect();
    chol.solve_in_place(&mut rhs);
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient { support: k });
    }
    let mut beta = vec![0.0; a.cols()];
    for (j, v) in support.iter().zip(rhs) {
        beta[j] = v;
    }
    Ok(LeastSquaresFit {
        beta: DenseVector::new(beta)?,
        regularized,
    })
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(a: &DenseMatrix) -> Result<DenseMatrix> {
    let chol = Cholesky::new(a)?;
    let n = a.rows();
    let columns: Vec<DenseVector> = (0..n)
        .map(|j| chol.solve(&DenseVector::unit(n, j)))
        .collect();
    let inv = DenseMatrix::from_columns(&columns)?;
    // average the two triangles so the inverse is exactly symmetric
    Ok(DenseMatrix::from_fn(n, n, |i, j| {
        0.5 * (inv.get(i, j) + inv.get(j, i))
    }))
}
