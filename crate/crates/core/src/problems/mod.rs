//! Test instance generators and on-disk formats.

pub mod io;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::realization::{MatrixPolynomial, Realization, Tolerances};

const MAX_REJECTIONS: usize = 100;

/// Relative singular-value cutoff of [`LowRankFactor::from_dense`].
pub const FACTOR_TOL: f64 = 1e-12;

/// Complex Gaussian with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Raises every singular value to at least `σ_max / conditioning`.
fn clamp_condition(matrix: &CMatrix, conditioning: f64) -> CMatrix {
    if matrix.is_empty() {
        return matrix.clone();
    }
    let svd = linalg::svd(matrix);
    let floor = svd.largest() / conditioning;
    let sigma = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        svd.values.len(),
        svd.values.iter().map(|&s| Complex64::new(s.max(floor), 0.0)),
    ));
    &svd.u * sigma * svd.v.adjoint()
}

/// Draws a regular realization with complex Gaussian blocks and
/// `E = I + 0.1 G`. The condition numbers of `E` and `A_m` are capped at
/// `conditioning` by clamping small singular values.
pub fn random_realization(n: usize, m: usize, r: usize, seed: u64, conditioning: f64) -> Result<Realization> {
    if n == 0 {
        return Err(Error::Dimension("n must be positive".into()));
    }
    if conditioning.is_nan() || conditioning < 1.0 {
        return Err(Error::Validation("conditioning must be at least 1".into()));
    }
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_REJECTIONS {
        let mut coeffs: Vec<CMatrix> = (0..=m).map(|_| gaussian_matrix(&mut rng, n, n)).collect();
        coeffs[m] = clamp_condition(&coeffs[m], conditioning);
        let c = gaussian_matrix(&mut rng, n, r);
        let a = gaussian_matrix(&mut rng, r, r);
        let e = clamp_condition(&(linalg::identity(r) + gaussian_matrix(&mut rng, r, r) * Complex64::new(0.1, 0.0)), conditioning);
        let b = gaussian_matrix(&mut rng, r, n);
        let probe_seed: u64 = rng.random();
        let Ok(rep) = Realization::new(MatrixPolynomial::new(coeffs)?, c, a, e, b) else {
            continue;
        };
        if rep.probe_regularity(8, probe_seed, &tol).regular {
            return Ok(rep);
        }
    }
    Err(Error::Generation {
        attempts: MAX_REJECTIONS,
    })
}

/// `C_j = F G` with F n×k and G k×n.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRankFactor {
    pub f: CMatrix,
    pub g: CMatrix,
}

impl LowRankFactor {
    pub fn new(f: CMatrix, g: CMatrix) -> Result<Self> {
        if f.ncols() != g.nrows() || f.nrows() != g.ncols() {
            return Err(Error::Dimension(format!(
                "factors {:?} and {:?} do not form a square product",
                f.shape(),
                g.shape()
            )));
        }
        Ok(Self { f, g })
    }

    /// Truncated singular value factorization dropping values below
    /// `FACTOR_TOL · σ_max`.
    pub fn from_dense(matrix: &CMatrix) -> Result<Self> {
        let svd = linalg::svd(matrix);
        let rank = svd.values.iter().take_while(|&&s| s > FACTOR_TOL * svd.largest()).count();
        let mut f = svd.u.columns(0, rank).into_owned();
        for (k, s) in svd.values.iter().take(rank).enumerate() {
            f.column_mut(k).scale_mut(*s);
        }
        let g = svd.v.columns(0, rank).adjoint();
        Self::new(f, g)
    }

    pub fn rank(&self) -> usize {
        self.f.ncols()
    }

    pub fn dense(&self) -> CMatrix {
        &self.f * &self.g
    }
}

/// One rational term of an application problem, `ρλ/(k − λ m) C_j` in the
/// fluid-solid family and `ρλ²/(k − λ m) C_j` in the condensed family
/// (there ρ = m = 1 and k = ω_j).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPoleTerm {
    pub rho: Complex64,
    pub k: Complex64,
    pub m_coef: Complex64,
    pub factor: LowRankFactor,
}

impl ScalarPoleTerm {
    pub fn pole(&self) -> Complex64 {
        self.k / self.m_coef
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoleFamily {
    FluidSolid,
    Condensed,
}

/// Converts pole-form terms into a block-diagonal realization.
///
/// The proper part of each term is split off analytically:
///
/// * `ρλ/(k − λm) = −ρ/m + (ρk/m)/(k − λm)`
/// * `ρλ²/(k − λm) = −ρλ/m − ρk/m² + (ρk²/m²)/(k − λm)`
///
/// Polynomial pieces are folded into `A₀` (and `A₁`), and each residue
/// `s/(a − λe)` with factor `F G` contributes a state block with `A = aI`,
/// `E = eI`, `C = F`, `B = sG`.
pub fn from_scalar_poles(poly: &MatrixPolynomial, terms: &[ScalarPoleTerm], family: PoleFamily) -> Result<Realization> {
    let n = poly.size();
    for (i, term) in terms.iter().enumerate() {
        if term.m_coef == Complex64::new(0.0, 0.0) {
            return Err(Error::Validation(format!("term {i} has m_coef = 0")));
        }
        if term.factor.f.nrows() != n {
            return Err(Error::Dimension(format!("term {i} factor does not match n = {n}")));
        }
        for other in &terms[..i] {
            let (p, q) = (term.pole(), other.pole());
            if (p - q).norm() <= 1e-12 * p.norm().max(q.norm()).max(1.0) {
                return Err(Error::PoleCollision { pole: p });
            }
        }
    }

    let mut coeffs = poly.coeffs().to_vec();
    if family == PoleFamily::Condensed && coeffs.len() < 2 {
        coeffs.push(CMatrix::zeros(n, n));
    }
    let r: usize = terms.iter().map(|t| t.factor.rank()).sum();
    let mut c = CMatrix::zeros(n, r);
    let mut a = CMatrix::zeros(r, r);
    let mut e = CMatrix::zeros(r, r);
    let mut b = CMatrix::zeros(r, n);

    let mut offset = 0;
    for term in terms {
        let (rho, k, mc) = (term.rho, term.k, term.m_coef);
        let dense = term.factor.dense();
        let residue = match family {
            PoleFamily::FluidSolid => {
                coeffs[0] += &dense * (-rho / mc);
                rho * k / mc
            }
            PoleFamily::Condensed => {
                coeffs[1] += &dense * (-rho / mc);
                coeffs[0] += &dense * (-rho * k / (mc * mc));
                rho * k * k / (mc * mc)
            }
        };
        let kj = term.factor.rank();
        linalg::set_block(&mut a, offset, offset, &(linalg::identity(kj) * k));
        linalg::set_block(&mut e, offset, offset, &(linalg::identity(kj) * mc));
        linalg::set_block(&mut c, 0, offset, &term.factor.f);
        linalg::set_block(&mut b, offset, 0, &(&term.factor.g * residue));
        offset += kj;
    }
    Realization::new(MatrixPolynomial::new(coeffs)?, c, a, e, b)
}

/// A random member of an application family: `−K + λM` plus `terms`
/// rank-`rank` rational terms with distinct real poles in [1, 1 + terms].
pub fn application_instance(family: PoleFamily, n: usize, terms: usize, rank: usize, seed: u64) -> Result<Realization> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hermitian = |rng: &mut ChaCha8Rng| {
        let g = gaussian_matrix(rng, n, n);
        &g * g.adjoint() + linalg::identity(n)
    };
    let k_mat = hermitian(&mut rng);
    let m_mat = hermitian(&mut rng);
    let poly = MatrixPolynomial::new(vec![-k_mat, m_mat])?;
    let list = (0..terms)
        .map(|j| {
            let f = gaussian_matrix(&mut rng, n, rank.min(n).max(1));
            let g = f.adjoint();
            let pole = 1.0 + j as f64 + rng.random_range(0.0..0.5);
            let (rho, k, m_coef) = match family {
                PoleFamily::FluidSolid => (Complex64::new(rng.random_range(0.5..2.0), 0.0), Complex64::new(pole, 0.0), Complex64::new(1.0, 0.0)),
                PoleFamily::Condensed => (Complex64::new(1.0, 0.0), Complex64::new(pole, 0.0), Complex64::new(1.0, 0.0)),
            };
            Ok(ScalarPoleTerm {
                rho,
                k,
                m_coef,
                factor: LowRankFactor::new(f, g)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    from_scalar_poles(&poly, &list, family)
}
