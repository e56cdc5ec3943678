//! Companion linearization `C₁(λ) = λX + Y` of a realization, its
//! generalized eigenproblem, and recovery of eigentriples of `R`.
//!
//! Block layout for N = nm + r:
//!
//! ```text
//! X = diag(A_m, I_n, …, I_n, −E)
//!
//!     [ A_{m−1}  A_{m−2} …  A₀ |  C ]
//!     [ −I_n     0       …  0  |    ]
//! Y = [          ⋱          ⋮  |    ]
//!     [             −I_n    0  |    ]
//!     [ 0        …       −B    |  A ]
//! ```
//!
//! With this layout `det C₁(λ) = det(A − λE) · det R(λ)` and an eigenvector
//! has the form `z = [λ^{m−1}x; …; λx; x; w]` with `w = (A − λE)⁻¹ B x`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector, ZERO};
use crate::realization::{Realization, Tolerances};

/// Eigenvalues μ of the shift-inverted matrix with `|μ| ≤ INFINITE_TOL · ‖M‖`
/// are reported as infinite eigenvalues of the pencil.
pub const INFINITE_TOL: f64 = 1e-10;

const SHIFT_ATTEMPTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct CompanionPencil {
    x: CMatrix,
    y: CMatrix,
    n: usize,
    m: usize,
    r: usize,
}

impl CompanionPencil {
    pub fn build(rep: &Realization) -> Result<Self> {
        let (n, m, r) = (rep.n(), rep.m(), rep.r());
        if m == 0 {
            return Err(Error::Degree { m });
        }
        let size = n * m + r;
        let mut x = CMatrix::zeros(size, size);
        let mut y = CMatrix::zeros(size, size);
        let poly = rep.poly();

        linalg::set_block(&mut x, 0, 0, poly.coeff(m));
        for i in 1..m {
            linalg::set_block(&mut x, i * n, i * n, &linalg::identity(n));
        }
        linalg::set_block(&mut x, n * m, n * m, &(-rep.e()));

        for j in 0..m {
            linalg::set_block(&mut y, 0, j * n, poly.coeff(m - 1 - j));
        }
        let minus_identity = -linalg::identity(n);
        for i in 1..m {
            linalg::set_block(&mut y, i * n, (i - 1) * n, &minus_identity);
        }
        if r > 0 {
            linalg::set_block(&mut y, 0, n * m, rep.c());
            linalg::set_block(&mut y, n * m, (m - 1) * n, &(-rep.b()));
            linalg::set_block(&mut y, n * m, n * m, rep.a());
        }
        Ok(Self { x, y, n, m, r })
    }

    pub fn x(&self) -> &CMatrix {
        &self.x
    }

    pub fn y(&self) -> &CMatrix {
        &self.y
    }

    pub fn size(&self) -> usize {
        self.x.nrows()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.r)
    }

    /// `λX + Y`.
    pub fn eval(&self, lambda: Complex64) -> CMatrix {
        &self.x * lambda + &self.y
    }
}

/// Relative discrepancy `|det C₁(λ) − det(A − λE) det R(λ)| / max(|det C₁(λ)|, tiny)`.
pub fn det_identity_check(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<f64> {
    let pencil = CompanionPencil::build(rep)?;
    let shifted = rep.shifted_state(lambda, tol)?;
    let value = rep.eval_r(lambda, tol)?;
    let lhs = linalg::determinant(&pencil.eval(lambda));
    let rhs = linalg::determinant(&shifted) * linalg::determinant(&value);
    Ok((lhs - rhs).norm() / lhs.norm().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone)]
pub struct PencilEigenpair {
    pub lambda: Complex64,
    /// Unit eigenvector.
    pub z: CVector,
    /// `‖(λX + Y)z‖ / ((|λ|‖X‖ + ‖Y‖)‖z‖)`.
    pub residual: f64,
    /// Set when `residual` exceeds the eigenpair tolerance.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct PencilSpectrum {
    pub finite: Vec<PencilEigenpair>,
    /// Eigenvectors belonging to infinite eigenvalues.
    pub infinite: Vec<CVector>,
    pub shift: Complex64,
}

impl PencilSpectrum {
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        self.finite.iter().map(|p| p.lambda).collect()
    }

    pub fn pairs(&self) -> Vec<(Complex64, CVector)> {
        self.finite.iter().map(|p| (p.lambda, p.z.clone())).collect()
    }
}

/// Shift-and-invert eigensolve: the eigenvalues μ of `M = (σX + Y)⁻¹X` map
/// to pencil eigenvalues `λ = σ − 1/μ`.
pub fn eigensolve(pencil: &CompanionPencil, shift: Complex64, tol: &Tolerances) -> Result<PencilSpectrum> {
    let shifted = pencil.eval(shift);
    let s = linalg::singular_values(&shifted);
    if s.is_empty() || *s.last().unwrap() <= tol.pole * s[0] {
        return Err(Error::ShiftSingular { shift });
    }
    let m = linalg::solve(&shifted, &pencil.x).map_err(|_| Error::ShiftSingular { shift })?;
    let m_norm = linalg::frobenius_norm(&m);
    let x_norm = linalg::spectral_norm(&pencil.x);
    let y_norm = linalg::spectral_norm(&pencil.y);

    let mut finite = Vec::new();
    let mut infinite = Vec::new();
    for (mu, z) in linalg::eigen(&m)? {
        if mu.norm() <= INFINITE_TOL * m_norm {
            infinite.push(z);
            continue;
        }
        let lambda = shift - mu.inv();
        let r = pencil.eval(lambda) * &z;
        let scale = (lambda.norm() * x_norm + y_norm) * linalg::vector_norm(&z);
        let residual = linalg::vector_norm(&r) / scale.max(f64::MIN_POSITIVE);
        finite.push(PencilEigenpair {
            lambda,
            z,
            residual,
            flagged: residual > tol.eig,
        });
    }
    Ok(PencilSpectrum {
        finite,
        infinite,
        shift,
    })
}

/// Tries shift 0 first, then up to four pseudo-random shifts on a circle of
/// radius `1 + ‖Y‖/‖X‖`.
pub fn eigensolve_auto(pencil: &CompanionPencil, tol: &Tolerances, seed: u64) -> Result<PencilSpectrum> {
    let radius = 1.0 + linalg::spectral_norm(&pencil.y) / linalg::spectral_norm(&pencil.x).max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift = ZERO;
    let mut last = None;
    for _ in 0..SHIFT_ATTEMPTS {
        match eigensolve(pencil, shift, tol) {
            Err(err @ Error::ShiftSingular { .. }) => {
                log::debug!("{err}; retrying with a new shift");
                last = Some(err);
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                shift = Complex64::from_polar(radius, angle);
            }
            other => return other,
        }
    }
    Err(last.expect("at least one attempt"))
}

/// An eigenvalue of `R` with its unit eigenvector `x`, the realization state
/// `w = (A − λE)⁻¹ B x`, and the raw companion eigenvector `z`.
#[derive(Debug, Clone, Serialize)]
pub struct EigenTriple {
    #[serde(serialize_with = "crate::problems::io::ser_complex")]
    pub lambda: Complex64,
    #[serde(serialize_with = "crate::problems::io::ser_cvector")]
    pub x: CVector,
    #[serde(serialize_with = "crate::problems::io::ser_cvector")]
    pub w: CVector,
    #[serde(skip)]
    pub z: CVector,
    /// `‖R(λ)x‖` relative to the scale of [`Realization::eval_r_scaled`]; `None` when λ is a pole.
    pub residual: Option<f64>,
    /// `‖w − (A − λE)⁻¹ B x‖`; `None` when λ is a pole.
    pub state_mismatch: Option<f64>,
    /// `max_j ‖z_j − λ^{m−1−j} x̂‖ / ‖z‖` where `x̂` is the unscaled x-block.
    pub block_mismatch: f64,
}

/// Reads `x` from the last n-block of `z` (the block multiplying A₀) and `w`
/// from the trailing r entries, normalizing so that `‖x‖ = 1` and the
/// largest entry of `x` is real positive. Pairs whose x-block vanishes
/// relative to `‖z‖` carry no eigenvector of `R` and are skipped.
pub fn recover_triples(
    rep: &Realization,
    pairs: &[(Complex64, CVector)],
    tol: &Tolerances,
) -> Result<Vec<EigenTriple>> {
    let (n, m, r) = (rep.n(), rep.m(), rep.r());
    if m == 0 {
        return Err(Error::Degree { m });
    }
    let mut triples = Vec::with_capacity(pairs.len());
    for (lambda, z) in pairs {
        let lambda = *lambda;
        if z.len() != n * m + r {
            return Err(Error::Dimension(format!(
                "companion eigenvector has length {}, expected {}",
                z.len(),
                n * m + r
            )));
        }
        let z_norm = linalg::vector_norm(z);
        if z_norm == 0.0 {
            return Err(Error::ZeroVector);
        }
        let x_raw: CVector = z.rows((m - 1) * n, n).into_owned();
        let x_raw_norm = linalg::vector_norm(&x_raw);
        if x_raw_norm <= 1e-12 * z_norm {
            log::debug!("skipping pencil eigenvalue {lambda}: x-block vanishes");
            continue;
        }

        let mut block_mismatch: f64 = 0.0;
        let mut power = linalg::ONE;
        for j in (0..m).rev() {
            let block = z.rows(j * n, n);
            let diff = block - &x_raw * power;
            block_mismatch = block_mismatch.max(linalg::vector_norm(&diff) / z_norm);
            power *= lambda;
        }

        let pivot = x_raw
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(i, _)| i)
            .unwrap();
        let phase = x_raw[pivot].conj() / x_raw[pivot].norm();
        let scale = phase / x_raw_norm;
        let x = &x_raw * scale;
        let w: CVector = z.rows(n * m, r).into_owned() * scale;

        let (residual, state_mismatch) = match (rep.eval_r_scaled(lambda, tol), rep.state_response(lambda, tol)) {
            (Ok((value, scale)), Ok(response)) => {
                let rx = linalg::vector_norm(&(&value * &x));
                let rn = scale.max(f64::MIN_POSITIVE);
                let w_check = &response * &x;
                (Some(rx / rn), Some(linalg::vector_norm(&(&w - w_check))))
            }
            _ => (None, None),
        };

        triples.push(EigenTriple {
            lambda,
            x,
            w,
            z: z.clone(),
            residual,
            state_mismatch,
            block_mismatch,
        });
    }
    Ok(triples)
}

/// Linearize, eigensolve with automatic shift selection, and recover triples.
pub fn eigentriples(rep: &Realization, tol: &Tolerances, seed: u64) -> Result<(PencilSpectrum, Vec<EigenTriple>)> {
    let pencil = CompanionPencil::build(rep)?;
    let spectrum = eigensolve_auto(&pencil, tol, seed)?;
    let triples = recover_triples(rep, &spectrum.pairs(), tol)?;
    Ok((spectrum, triples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::{real_matrix, MatrixPolynomial};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn r0() -> Realization {
        let poly = MatrixPolynomial::new(vec![real_matrix(1, 1, &[0.0]), real_matrix(1, 1, &[1.0])]).unwrap();
        Realization::new(
            poly,
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[2.0]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
        )
        .unwrap()
    }

    #[test]
    fn companion_of_scalar_instance() {
        let p = CompanionPencil::build(&r0()).unwrap();
        assert_eq!(p.x(), &real_matrix(2, 2, &[1.0, 0.0, 0.0, -1.0]));
        assert_eq!(p.y(), &real_matrix(2, 2, &[0.0, 1.0, -1.0, 2.0]));
        assert_eq!(p.eval(c(3.0)), real_matrix(2, 2, &[3.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn companion_of_pure_polynomial() {
        let poly = MatrixPolynomial::new(vec![real_matrix(1, 1, &[-1.0]), real_matrix(1, 1, &[1.0])]).unwrap();
        let p = CompanionPencil::build(&Realization::polynomial(poly)).unwrap();
        assert_eq!(p.x(), &real_matrix(1, 1, &[1.0]));
        assert_eq!(p.y(), &real_matrix(1, 1, &[-1.0]));
        let spectrum = eigensolve(&p, ZERO, &Tolerances::default()).unwrap();
        assert_eq!(spectrum.finite.len(), 1);
        assert!((spectrum.finite[0].lambda - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn companion_of_quadratic_with_state() {
        let poly = MatrixPolynomial::new(vec![
            real_matrix(1, 1, &[0.0]),
            real_matrix(1, 1, &[0.0]),
            real_matrix(1, 1, &[1.0]),
        ])
        .unwrap();
        let one = real_matrix(1, 1, &[1.0]);
        let rep = Realization::new(poly, one.clone(), real_matrix(1, 1, &[2.0]), one.clone(), one).unwrap();
        let p = CompanionPencil::build(&rep).unwrap();
        assert_eq!(p.x(), &real_matrix(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0]));
        assert_eq!(
            p.y(),
            &real_matrix(3, 3, &[0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 2.0])
        );
    }

    #[test]
    fn degree_zero_is_rejected() {
        let rep = Realization::polynomial(MatrixPolynomial::new(vec![real_matrix(1, 1, &[1.0])]).unwrap());
        assert!(matches!(CompanionPencil::build(&rep), Err(Error::Degree { m: 0 })));
    }

    #[test]
    fn det_identity_scalar() {
        let tol = Tolerances::default();
        assert!(det_identity_check(&r0(), c(1.0), &tol).unwrap() < 1e-15);
        assert!(det_identity_check(&r0(), c(3.0), &tol).unwrap() < 1e-15);
        assert!(matches!(det_identity_check(&r0(), c(2.0), &tol), Err(Error::Pole { .. })));
    }

    #[test]
    fn eigenvalues_of_scalar_instance() {
        let p = CompanionPencil::build(&r0()).unwrap();
        let spectrum = eigensolve(&p, ZERO, &Tolerances::default()).unwrap();
        let mut values: Vec<f64> = spectrum.eigenvalues().iter().map(|z| z.re).collect();
        values.sort_by(f64::total_cmp);
        assert!((values[0] - (1.0 - 2f64.sqrt())).abs() < 1e-12);
        assert!((values[1] - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(spectrum.infinite.is_empty());
        assert!(spectrum.finite.iter().all(|p| !p.flagged));
    }

    #[test]
    fn identity_leading_block_reduces_to_standard_problem() {
        let y = real_matrix(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let poly = MatrixPolynomial::new(vec![y.clone(), linalg::identity(2)]).unwrap();
        let p = CompanionPencil::build(&Realization::polynomial(poly)).unwrap();
        let spectrum = eigensolve(&p, Complex64::new(0.3, 0.1), &Tolerances::default()).unwrap();
        let mut values: Vec<f64> = spectrum.eigenvalues().iter().map(|z| z.re).collect();
        values.sort_by(f64::total_cmp);
        assert!((values[0] + 3.0).abs() < 1e-12);
        assert!((values[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_shift_is_reported_and_auto_retries() {
        let p = CompanionPencil::build(&r0()).unwrap();
        let root = c(1.0 + 2f64.sqrt());
        assert!(matches!(
            eigensolve(&p, root, &Tolerances::default()),
            Err(Error::ShiftSingular { .. })
        ));
        // singular leading coefficient: λ·0 + 1 has only an infinite eigenvalue
        let poly = MatrixPolynomial::new(vec![real_matrix(1, 1, &[1.0]), real_matrix(1, 1, &[0.0])]).unwrap();
        let p = CompanionPencil::build(&Realization::polynomial(poly)).unwrap();
        let spectrum = eigensolve_auto(&p, &Tolerances::default(), 0).unwrap();
        assert!(spectrum.finite.is_empty());
        assert_eq!(spectrum.infinite.len(), 1);
    }

    #[test]
    fn recover_scalar_triple() {
        let rep = r0();
        let lambda = c(1.0 + 2f64.sqrt());
        let z = CVector::from_vec(vec![c(1.0), -lambda]);
        let triples = recover_triples(&rep, &[(lambda, z.clone())], &Tolerances::default()).unwrap();
        assert_eq!(triples.len(), 1);
        let t = &triples[0];
        assert!((t.x[0] - c(1.0)).norm() < 1e-15);
        assert!((t.w[0] + lambda).norm() < 1e-14);
        assert!(t.residual.unwrap() < 1e-14);
        assert!(t.state_mismatch.unwrap() < 1e-14);

        let scaled = z * Complex64::new(-0.3, 2.0);
        let again = recover_triples(&rep, &[(lambda, scaled)], &Tolerances::default()).unwrap();
        assert!((again[0].x[0] - t.x[0]).norm() < 1e-15);
        assert!((again[0].residual.unwrap() - t.residual.unwrap()).abs() < 1e-15);
    }
}
