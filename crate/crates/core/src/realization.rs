//! Rational matrix functions in realization form
//! `R(λ) = P(λ) + C (A − λE)⁻¹ B` and their evaluation.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ONE};

/// Numerical thresholds used across the crate. All are relative unless the
/// name says otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// `A − λE` counts as singular when `σ_min ≤ pole · ‖A − λE‖`.
    pub pole: f64,
    /// `R(λ)` counts as singular when `σ_min ≤ regular · (Σ|λ|^j‖A_j‖ + ‖W(λ)‖)`.
    pub regular: f64,
    /// Pencil eigenpair residual threshold.
    pub eig: f64,
    pub verify: f64,
    pub verify_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            pole: 1e-12,
            regular: 1e-10,
            eig: 1e-8,
            verify: 1e-8,
            verify_abs: 1e-14,
        }
    }
}

/// Inner norm applied to each coefficient matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatrixNorm {
    Spectral,
    Frobenius,
}

/// Outer Hölder exponent combining the per-block norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HolderExponent {
    One,
    Two,
    Infinity,
}

impl HolderExponent {
    pub fn value(self) -> f64 {
        match self {
            HolderExponent::One => 1.0,
            HolderExponent::Two => 2.0,
            HolderExponent::Infinity => f64::INFINITY,
        }
    }

    /// The conjugate exponent q with 1/p + 1/q = 1.
    pub fn conjugate(self) -> HolderExponent {
        match self {
            HolderExponent::One => HolderExponent::Infinity,
            HolderExponent::Two => HolderExponent::Two,
            HolderExponent::Infinity => HolderExponent::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormSelector {
    pub kind: MatrixNorm,
    pub p: HolderExponent,
}

impl NormSelector {
    pub const FROBENIUS_2: NormSelector = NormSelector {
        kind: MatrixNorm::Frobenius,
        p: HolderExponent::Two,
    };
    pub const SPECTRAL_2: NormSelector = NormSelector {
        kind: MatrixNorm::Spectral,
        p: HolderExponent::Two,
    };

    pub fn matrix_norm(&self, matrix: &CMatrix) -> f64 {
        match self.kind {
            MatrixNorm::Spectral => linalg::spectral_norm(matrix),
            MatrixNorm::Frobenius => linalg::frobenius_norm(matrix),
        }
    }
}

impl Default for NormSelector {
    fn default() -> Self {
        Self::FROBENIUS_2
    }
}

/// The monomial weights `(1, λ, …, λ^m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomials(Vec<Complex64>);

impl Monomials {
    pub fn new(lambda: Complex64, degree: usize) -> Self {
        let mut entries = Vec::with_capacity(degree + 1);
        entries.push(ONE);
        for j in 1..=degree {
            let previous = entries[j - 1];
            entries.push(previous * lambda);
        }
        Monomials(entries)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm(&self, p: HolderExponent) -> f64 {
        let moduli: Vec<f64> = self.0.iter().map(|z| z.norm()).collect();
        linalg::holder_norm(&moduli, p.value())
    }
}

/// `P(λ) = Σ λ^j A_j` with square coefficients of a common size.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    coeffs: Vec<CMatrix>,
}

impl MatrixPolynomial {
    pub fn new(coeffs: Vec<CMatrix>) -> Result<Self> {
        let first = coeffs
            .first()
            .ok_or_else(|| Error::Dimension("matrix polynomial needs at least one coefficient".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::Dimension("coefficient size n must be positive".into()));
        }
        for (j, a) in coeffs.iter().enumerate() {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "coefficient A{j} is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if !linalg::is_finite_matrix(a) {
                return Err(Error::Validation(format!("coefficient A{j} has non-finite entries")));
            }
        }
        Ok(Self { coeffs })
    }

    pub fn size(&self) -> usize {
        self.coeffs[0].nrows()
    }

    /// Degree bound m (number of coefficients minus one).
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[CMatrix] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &CMatrix {
        &self.coeffs[j]
    }

    /// Horner evaluation.
    pub fn eval(&self, lambda: Complex64) -> CMatrix {
        let mut iter = self.coeffs.iter().rev();
        let mut acc = iter.next().expect("nonempty").clone();
        for a in iter {
            acc *= lambda;
            acc += a;
        }
        acc
    }
}

/// A rational matrix function `R(λ) = P(λ) + C (A − λE)⁻¹ B`.
///
/// `C` is n×r, `A` and `E` are r×r and `B` is r×n. With r = 0 the rational
/// part vanishes and `R = P`. When r > 0, `E` must be invertible.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    poly: MatrixPolynomial,
    c: CMatrix,
    a: CMatrix,
    e: CMatrix,
    b: CMatrix,
}

impl Realization {
    pub fn new(poly: MatrixPolynomial, c: CMatrix, a: CMatrix, e: CMatrix, b: CMatrix) -> Result<Self> {
        let n = poly.size();
        let r = a.nrows();
        let expect = |name: &str, m: &CMatrix, shape: (usize, usize)| -> Result<()> {
            if m.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.nrows(),
                    m.ncols(),
                    shape.0,
                    shape.1
                )));
            }
            if !linalg::is_finite_matrix(m) {
                return Err(Error::Validation(format!("{name} has non-finite entries")));
            }
            Ok(())
        };
        expect("A", &a, (r, r))?;
        expect("E", &e, (r, r))?;
        expect("C", &c, (n, r))?;
        expect("B", &b, (r, n))?;
        if r > 0 {
            let s = linalg::singular_values(&e);
            let smin = *s.last().unwrap();
            if smin.is_nan() || smin <= Tolerances::default().pole * s[0] {
                return Err(Error::Validation(format!(
                    "E is singular (sigma_min = {smin:e})"
                )));
            }
        }
        Ok(Self { poly, c, a, e, b })
    }

    /// Pure polynomial instance (r = 0).
    pub fn polynomial(poly: MatrixPolynomial) -> Self {
        let n = poly.size();
        Self {
            poly,
            c: CMatrix::zeros(n, 0),
            a: CMatrix::zeros(0, 0),
            e: CMatrix::zeros(0, 0),
            b: CMatrix::zeros(0, n),
        }
    }

    pub fn n(&self) -> usize {
        self.poly.size()
    }

    pub fn m(&self) -> usize {
        self.poly.degree()
    }

    pub fn r(&self) -> usize {
        self.a.nrows()
    }

    pub fn poly(&self) -> &MatrixPolynomial {
        &self.poly
    }

    pub fn c(&self) -> &CMatrix {
        &self.c
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn e(&self) -> &CMatrix {
        &self.e
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn into_parts(self) -> (MatrixPolynomial, CMatrix, CMatrix, CMatrix, CMatrix) {
        (self.poly, self.c, self.a, self.e, self.b)
    }

    pub fn eval_p(&self, lambda: Complex64) -> CMatrix {
        self.poly.eval(lambda)
    }

    /// `A − λE`, refused when λ is numerically a pole.
    pub fn shifted_state(&self, lambda: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        let shifted = &self.a - &self.e * lambda;
        if self.r() == 0 {
            return Ok(shifted);
        }
        let s = linalg::singular_values(&shifted);
        let smin = *s.last().unwrap();
        if smin <= tol.pole * s[0] {
            return Err(Error::Pole { lambda, sigma: smin });
        }
        Ok(shifted)
    }

    /// `W₁(λ) = (A − λE)⁻¹ B` (r×n).
    pub fn state_response(&self, lambda: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        let shifted = self.shifted_state(lambda, tol)?;
        linalg::solve(&shifted, &self.b)
    }

    /// `Ŵ(λ) = C (A − λE)⁻¹` (n×r), computed as the adjoint of a solve with `(A − λE)^*`.
    pub fn output_resolvent(&self, lambda: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        let shifted = self.shifted_state(lambda, tol)?;
        Ok(linalg::solve_adjoint(&shifted, &self.c.adjoint())?.adjoint())
    }

    /// `W(λ) = C (A − λE)⁻¹ B`.
    pub fn eval_w(&self, lambda: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        if self.r() == 0 {
            return Ok(CMatrix::zeros(self.n(), self.n()));
        }
        Ok(&self.c * self.state_response(lambda, tol)?)
    }

    pub fn eval_r(&self, lambda: Complex64, tol: &Tolerances) -> Result<CMatrix> {
        Ok(self.eval_p(lambda) + self.eval_w(lambda, tol)?)
    }

    /// `R(λ)` together with the reference magnitude
    /// `Σ_j |λ|^j ‖A_j‖₂ + ‖W(λ)‖₂`.
    ///
    /// Singularity of `R(λ)` is judged against this magnitude rather than
    /// `‖R(λ)‖` or `‖P(λ)‖`, both of which collapse at an eigenvalue when n = 1.
    pub fn eval_r_scaled(&self, lambda: Complex64, tol: &Tolerances) -> Result<(CMatrix, f64)> {
        let w = self.eval_w(lambda, tol)?;
        let modulus = lambda.norm();
        let poly_scale: f64 = self
            .poly
            .coeffs()
            .iter()
            .enumerate()
            .map(|(j, a)| modulus.powi(j as i32) * linalg::spectral_norm(a))
            .sum();
        let scale = poly_scale + linalg::spectral_norm(&w);
        Ok((self.eval_p(lambda) + w, scale))
    }

    /// `σ_min(R(λ)) ≤ tol.regular · (Σ_j |λ|^j ‖A_j‖ + ‖W(λ)‖)`.
    pub fn is_singular_at(&self, lambda: Complex64, tol: &Tolerances) -> Result<bool> {
        let (value, scale) = self.eval_r_scaled(lambda, tol)?;
        Ok(linalg::sigma_min(&value) <= tol.regular * scale)
    }

    /// Norm on the space of realizations: the outer Hölder norm of
    /// `(‖A₀‖, …, ‖A_m‖, ‖C‖, ‖A‖, ‖E‖, ‖B‖)`.
    pub fn norm(&self, sel: NormSelector) -> f64 {
        let mut parts: Vec<f64> = self.poly.coeffs().iter().map(|a| sel.matrix_norm(a)).collect();
        parts.extend([&self.c, &self.a, &self.e, &self.b].into_iter().map(|m| sel.matrix_norm(m)));
        linalg::holder_norm(&parts, sel.p.value())
    }

    /// Probabilistic regularity test: looks for a λ with `R(λ)` numerically
    /// nonsingular among `trials` pseudo-random samples. A `false` answer is
    /// evidence, not proof, of singularity.
    pub fn probe_regularity(&self, trials: usize, seed: u64, tol: &Tolerances) -> RegularityProbe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sampled = 0;
        let mut pole_hits = 0;
        while sampled < trials.max(1) {
            let lambda = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let singular = match self.is_singular_at(lambda, tol) {
                Ok(s) => s,
                Err(_) if pole_hits < 10 * trials.max(1) => {
                    pole_hits += 1;
                    continue;
                }
                Err(_) => break,
            };
            sampled += 1;
            if !singular {
                return RegularityProbe {
                    regular: true,
                    witness: Some(lambda),
                };
            }
        }
        RegularityProbe {
            regular: false,
            witness: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityProbe {
    pub regular: bool,
    pub witness: Option<Complex64>,
}

/// Helper for building small matrices from real row-major data.
pub fn real_matrix(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_slice(
        rows,
        cols,
        &data.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// n = m = r = 1: A₀ = 0, A₁ = 1, C = B = E = 1, A = 2.
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

    fn scalar(m: &CMatrix) -> Complex64 {
        assert_eq!(m.shape(), (1, 1));
        m[(0, 0)]
    }

    #[test]
    fn eval_p_scalar_values() {
        let r = r0();
        assert_eq!(scalar(&r.eval_p(c(1.0))), c(1.0));
        assert_eq!(scalar(&r.eval_p(c(3.0))), c(3.0));
    }

    #[test]
    fn eval_p_of_zero_polynomial() {
        let poly = MatrixPolynomial::new(vec![CMatrix::zeros(3, 3); 3]).unwrap();
        let r = Realization::polynomial(poly);
        assert_eq!(r.eval_p(Complex64::new(1.5, -2.0)), CMatrix::zeros(3, 3));
    }

    #[test]
    fn eval_w_scalar_values_and_pole() {
        let r = r0();
        let tol = Tolerances::default();
        assert!((scalar(&r.eval_w(c(1.0), &tol).unwrap()) - c(1.0)).norm() < 1e-15);
        assert!((scalar(&r.eval_w(c(0.0), &tol).unwrap()) - c(0.5)).norm() < 1e-15);
        assert!(matches!(r.eval_w(c(2.0), &tol), Err(Error::Pole { .. })));
    }

    #[test]
    fn eval_r_scalar_values() {
        let r = r0();
        let tol = Tolerances::default();
        assert!((scalar(&r.eval_r(c(1.0), &tol).unwrap()) - c(2.0)).norm() < 1e-15);
        assert!((scalar(&r.eval_r(c(0.0), &tol).unwrap()) - c(0.5)).norm() < 1e-15);
        let root = 1.0 + 2f64.sqrt();
        assert!(scalar(&r.eval_r(c(root), &tol).unwrap()).norm() < 1e-14);
    }

    #[test]
    fn pole_propagates_through_eval_r() {
        assert!(matches!(
            r0().eval_r(c(2.0), &Tolerances::default()),
            Err(Error::Pole { .. })
        ));
    }

    #[test]
    fn realization_norms() {
        let r = r0();
        let f2 = r.norm(NormSelector::FROBENIUS_2);
        assert!((f2 - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let finf = r.norm(NormSelector {
            kind: MatrixNorm::Frobenius,
            p: HolderExponent::Infinity,
        });
        assert_eq!(finf, 2.0);
        let zero = Realization::polynomial(MatrixPolynomial::new(vec![CMatrix::zeros(2, 2)]).unwrap());
        assert_eq!(zero.norm(NormSelector::SPECTRAL_2), 0.0);
    }

    #[test]
    fn regularity_probe() {
        let tol = Tolerances::default();
        let probe = r0().probe_regularity(4, 1, &tol);
        assert!(probe.regular);
        assert!(probe.witness.is_some());

        let zero = Realization::new(
            MatrixPolynomial::new(vec![CMatrix::zeros(2, 2); 2]).unwrap(),
            CMatrix::zeros(2, 1),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
            CMatrix::zeros(1, 2),
        )
        .unwrap();
        assert!(!zero.probe_regularity(8, 1, &tol).regular);

        let lambda_i = Realization::polynomial(
            MatrixPolynomial::new(vec![CMatrix::zeros(2, 2), linalg::identity(2)]).unwrap(),
        );
        assert!(lambda_i.probe_regularity(1, 3, &tol).regular);
    }

    #[test]
    fn construction_rejects_bad_blocks() {
        let poly = || MatrixPolynomial::new(vec![real_matrix(1, 1, &[1.0])]).unwrap();
        let singular_e = Realization::new(
            poly(),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[0.0]),
            real_matrix(1, 1, &[1.0]),
        );
        assert!(matches!(singular_e, Err(Error::Validation(_))));
        let wrong_c = Realization::new(
            poly(),
            real_matrix(2, 1, &[1.0, 1.0]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
            real_matrix(1, 1, &[1.0]),
        );
        assert!(matches!(wrong_c, Err(Error::Dimension(_))));
        assert!(MatrixPolynomial::new(vec![real_matrix(1, 1, &[f64::NAN])]).is_err());
    }

    #[test]
    fn monomials_recurrence() {
        let lambda = Complex64::new(0.5, 2.0);
        let mono = Monomials::new(lambda, 4);
        assert_eq!(mono.entries()[0], ONE);
        for j in 1..=4 {
            assert_eq!(mono.entries()[j], mono.entries()[j - 1] * lambda);
        }
        assert!((Monomials::new(c(1.0), 1).norm(HolderExponent::Two) - 2f64.sqrt()).abs() < 1e-15);
    }
}
