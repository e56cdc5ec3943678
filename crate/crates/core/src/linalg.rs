//! Dense complex linear algebra shared by every module: factorization-based
//! solves, singular values with vectors, determinants, and a standard
//! eigendecomposition built on the complex Schur form.

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Singular values with the corresponding singular vectors, sorted in
/// descending order. `u` holds left vectors and `v` right vectors as columns.
#[derive(Debug, Clone)]
pub struct SingularTriplets {
    pub values: Vec<f64>,
    pub u: CMatrix,
    pub v: CMatrix,
}

impl SingularTriplets {
    pub fn largest(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Smallest of the min(rows, cols) singular values.
    pub fn smallest(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn left(&self, k: usize) -> CVector {
        self.u.column(k).into_owned()
    }

    pub fn right(&self, k: usize) -> CVector {
        self.v.column(k).into_owned()
    }
}

pub fn svd(matrix: &CMatrix) -> SingularTriplets {
    let (rows, cols) = matrix.shape();
    if rows == 0 || cols == 0 {
        return SingularTriplets {
            values: Vec::new(),
            u: CMatrix::zeros(rows, 0),
            v: CMatrix::zeros(cols, 0),
        };
    }
    let decomposition = SVD::new(matrix.clone(), true, true);
    let values = decomposition.singular_values.iter().copied().collect();
    let u = decomposition.u.expect("left singular vectors requested");
    let v = decomposition
        .v_t
        .expect("right singular vectors requested")
        .adjoint();
    SingularTriplets { values, u, v }
}

pub fn singular_values(matrix: &CMatrix) -> Vec<f64> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Vec::new();
    }
    matrix.singular_values().iter().copied().collect()
}

pub fn spectral_norm(matrix: &CMatrix) -> f64 {
    singular_values(matrix).first().copied().unwrap_or(0.0)
}

/// Smallest of the min(rows, cols) singular values; 0 for an empty matrix.
pub fn sigma_min(matrix: &CMatrix) -> f64 {
    singular_values(matrix).last().copied().unwrap_or(0.0)
}

pub fn frobenius_norm(matrix: &CMatrix) -> f64 {
    matrix.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vector_norm(vector: &CVector) -> f64 {
    vector.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hölder p-norm of a real vector, p in {1, 2, inf}.
pub fn holder_norm(values: &[f64], p: f64) -> f64 {
    if p == f64::INFINITY {
        values.iter().fold(0.0, |acc: f64, &x| acc.max(x.abs()))
    } else if p == 1.0 {
        values.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        values.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        values
            .iter()
            .map(|x| x.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Solves `a * x = b` through an LU factorization.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "cannot solve {}x{} system against {}x{} right-hand side",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(CMatrix::zeros(0, b.ncols()));
    }
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Degenerate("singular matrix in linear solve".into()))
}

pub fn solve_vector(a: &CMatrix, b: &CVector) -> Result<CVector> {
    let rhs = CMatrix::from_column_slice(b.len(), 1, b.as_slice());
    let x = solve(a, &rhs)?;
    Ok(x.column(0).into_owned())
}

/// Solves `a^* * x = b`.
pub fn solve_adjoint(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    solve(&a.adjoint(), b)
}

/// Determinant through an LU factorization; the empty determinant is 1.
pub fn determinant(a: &CMatrix) -> Complex64 {
    if a.nrows() == 0 {
        return ONE;
    }
    a.clone().lu().determinant()
}

/// Block of `rows x cols` starting at `(row, col)`, copied out.
pub fn block(matrix: &CMatrix, row: usize, col: usize, rows: usize, cols: usize) -> CMatrix {
    matrix.view((row, col), (rows, cols)).into_owned()
}

pub fn set_block(target: &mut CMatrix, row: usize, col: usize, source: &CMatrix) {
    target
        .view_mut((row, col), source.shape())
        .copy_from(source);
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Rank-one outer product `a b^*`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

/// All finite parts.
pub fn is_finite_matrix(matrix: &CMatrix) -> bool {
    matrix.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Eigenvalues and unit eigenvectors of a square matrix, from the complex
/// Schur form `M = Q T Q^*` followed by triangular back-substitution.
pub fn eigen(matrix: &CMatrix) -> Result<Vec<(Complex64, CVector)>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(Error::Dimension("eigendecomposition of non-square matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(matrix[(0, 0)], CVector::from_element(1, ONE))]);
    }
    let schur = Schur::try_new(matrix.clone(), f64::EPSILON, 1000 * n)
        .ok_or(Error::NoConvergence)?;
    let (q, t) = schur.unpack();
    let small = f64::EPSILON * frobenius_norm(&t).max(f64::MIN_POSITIVE);

    let mut pairs = Vec::with_capacity(n);
    for k in 0..n {
        let mu = t[(k, k)];
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for j in (0..k).rev() {
            let mut acc = ZERO;
            for l in (j + 1)..=k {
                acc += t[(j, l)] * y[l];
            }
            let mut d = t[(j, j)] - mu;
            if d.norm() < small {
                d = Complex64::new(small, 0.0);
            }
            y[j] = -acc / d;
        }
        let mut z = &q * y;
        let norm = vector_norm(&z);
        z /= Complex64::new(norm, 0.0);
        pairs.push((mu, z));
    }
    Ok(pairs)
}
