//! Backward errors of approximate eigenvalues.
//!
//! Two structured regimes perturb the polynomial coefficients together with
//! either `C` or `B`:
//!
//! * `T(λ) = [R⁻¹; λR⁻¹; …; λ^m R⁻¹; W₁R⁻¹]` with `W₁ = (A − λE)⁻¹B`. A
//!   perturbation `Δ = [ΔA₀ … ΔA_m ΔC]` makes λ exact iff `Δ T(λ) v = −v`
//!   for some v, and the minimal Frobenius/2-norm is `1/σ_max(T)`.
//! * `S(λ) = [R⁻¹, λR⁻¹, …, λ^m R⁻¹, R⁻¹Ŵ]` with `Ŵ = C(A − λE)⁻¹`. A stacked
//!   `Δ = [ΔA₀; …; ΔA_m; ΔB]` makes λ exact iff `S(λ) Δ x = −x`, and the
//!   least-norm solution for a unit x is `−S⁺x x^*` with norm `‖S⁺x‖`.
//!   Minimizing over x gives `1/σ_max(S)`; the closed-form candidate
//!   `1/σ_min(S)` is reported alongside it.
//!
//! Also here: polynomial-only bounds, the eigenpair formula for matrix
//! polynomials and the backward error of the companion pencil.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::linearize::CompanionPencil;
use crate::realization::{MatrixPolynomial, Monomials, NormSelector, Realization, Tolerances};

/// Slack used by the ratio bound comparison.
pub const RATIO_SLACK: f64 = 1e-12;

/// `R(λ)` and `R⁻¹(λ)`, refusing poles and numerically singular `R(λ)`.
fn value_and_inverse(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<(CMatrix, CMatrix)> {
    let (value, scale) = rep.eval_r_scaled(lambda, tol)?;
    let smin = linalg::sigma_min(&value);
    if smin <= tol.regular * scale {
        return Err(Error::SingularR {
            lambda,
            sigma: smin,
            scale,
        });
    }
    let inverse = linalg::solve(&value, &linalg::identity(rep.n()))?;
    Ok((value, inverse))
}

/// Tall ((m+1)n + r) × n matrix of the C-regime.
#[derive(Debug, Clone)]
pub struct TMatrix {
    data: CMatrix,
    n: usize,
    m: usize,
    r: usize,
}

impl TMatrix {
    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    /// Block j (0 ≤ j ≤ m) equals `λ^j R⁻¹(λ)`.
    pub fn block(&self, j: usize) -> CMatrix {
        linalg::block(&self.data, j * self.n, 0, self.n, self.n)
    }

    /// Trailing `W₁(λ) R⁻¹(λ)` block (r×n).
    pub fn trailing(&self) -> CMatrix {
        linalg::block(&self.data, (self.m + 1) * self.n, 0, self.r, self.n)
    }
}

/// Wide n × ((m+1)n + r) matrix of the B-regime.
#[derive(Debug, Clone)]
pub struct SMatrix {
    data: CMatrix,
    n: usize,
    m: usize,
    r: usize,
}

impl SMatrix {
    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn block(&self, j: usize) -> CMatrix {
        linalg::block(&self.data, 0, j * self.n, self.n, self.n)
    }

    /// Trailing `R⁻¹(λ) Ŵ(λ)` block (n×r).
    pub fn trailing(&self) -> CMatrix {
        linalg::block(&self.data, 0, (self.m + 1) * self.n, self.n, self.r)
    }

    /// `S⁺x = S^*(S S^*)⁻¹ x`, valid since S has full row rank.
    pub fn pinv_apply(&self, x: &CVector) -> Result<CVector> {
        let gram = &self.data * self.data.adjoint();
        let y = linalg::solve_vector(&gram, x)?;
        Ok(self.data.adjoint() * y)
    }

    /// `S⁺ G` for a block of right-hand sides.
    pub fn pinv_apply_matrix(&self, g: &CMatrix) -> Result<CMatrix> {
        let gram = &self.data * self.data.adjoint();
        Ok(self.data.adjoint() * linalg::solve(&gram, g)?)
    }
}

pub fn build_t(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<TMatrix> {
    let (n, m, r) = (rep.n(), rep.m(), rep.r());
    let (_, inverse) = value_and_inverse(rep, lambda, tol)?;
    let mut data = CMatrix::zeros((m + 1) * n + r, n);
    for (j, power) in Monomials::new(lambda, m).entries().iter().enumerate() {
        linalg::set_block(&mut data, j * n, 0, &(&inverse * *power));
    }
    if r > 0 {
        let response = rep.state_response(lambda, tol)?;
        linalg::set_block(&mut data, (m + 1) * n, 0, &(response * &inverse));
    }
    Ok(TMatrix { data, n, m, r })
}

pub fn build_s(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<SMatrix> {
    let (n, m, r) = (rep.n(), rep.m(), rep.r());
    let (_, inverse) = value_and_inverse(rep, lambda, tol)?;
    let mut data = CMatrix::zeros(n, (m + 1) * n + r);
    for (j, power) in Monomials::new(lambda, m).entries().iter().enumerate() {
        linalg::set_block(&mut data, 0, j * n, &(&inverse * *power));
    }
    if r > 0 {
        let resolvent = rep.output_resolvent(lambda, tol)?;
        linalg::set_block(&mut data, 0, (m + 1) * n, &(&inverse * resolvent));
    }
    Ok(SMatrix { data, n, m, r })
}

fn unit(v: &CVector) -> Result<CVector> {
    let norm = linalg::vector_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v / Complex64::new(norm, 0.0))
}

#[derive(Debug, Clone)]
pub struct CRegimeError {
    /// `1/σ_max(T(λ))`.
    pub eta: f64,
    pub sigma_max: f64,
    /// Right singular vector of T for σ_max.
    pub v: CVector,
}

/// Backward error when the polynomial coefficients and `C` may move.
pub fn eta_perturb_c(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<CRegimeError> {
    let t = build_t(rep, lambda, tol)?;
    let svd = linalg::svd(t.data());
    Ok(CRegimeError {
        eta: 1.0 / svd.largest(),
        sigma_max: svd.largest(),
        v: svd.right(0),
    })
}

/// `1/‖T(λ)v‖` for a given direction v (normalized first).
pub fn eta_perturb_c_vector(rep: &Realization, lambda: Complex64, v: &CVector, tol: &Tolerances) -> Result<f64> {
    let v = unit(v)?;
    let t = build_t(rep, lambda, tol)?;
    Ok(1.0 / linalg::vector_norm(&(t.data() * v)))
}

#[derive(Debug, Clone)]
pub struct BRegimeError {
    /// `min_{‖x‖=1} ‖S⁺x‖ = 1/σ_max(S)`.
    pub eta_variational: f64,
    /// `1/σ_min(S)` with σ_min the n-th singular value.
    pub eta_sigma_min: f64,
    pub sigma_max: f64,
    pub sigma_min: f64,
    /// Left singular vector of S for σ_max, the minimizing x.
    pub x: CVector,
}

/// Backward error when the polynomial coefficients and `B` may move.
pub fn eta_perturb_b(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<BRegimeError> {
    let s = build_s(rep, lambda, tol)?;
    let svd = linalg::svd(s.data());
    Ok(BRegimeError {
        eta_variational: 1.0 / svd.largest(),
        eta_sigma_min: 1.0 / svd.smallest(),
        sigma_max: svd.largest(),
        sigma_min: svd.smallest(),
        x: svd.left(0),
    })
}

/// `‖S(λ)⁺x‖` for a unit x: the least Frobenius norm of a stacked Δ with `S Δ x = −x`.
pub fn eta_perturb_b_vector(rep: &Realization, lambda: Complex64, x: &CVector, tol: &Tolerances) -> Result<f64> {
    let x = unit(x)?;
    let s = build_s(rep, lambda, tol)?;
    Ok(linalg::vector_norm(&s.pinv_apply(&x)?))
}

/// `σ_min(R(λ)) / ‖(1, λ, …, λ^m)‖₂`: an upper bound on the backward error
/// when only the polynomial coefficients move.
pub fn eta_poly_only_bound(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<f64> {
    let value = rep.eval_r(lambda, tol)?;
    Ok(linalg::sigma_min(&value) / Monomials::new(lambda, rep.m()).norm(crate::realization::HolderExponent::Two))
}

/// Backward error of λ as an eigenvalue of the matrix polynomial alone:
/// `σ_min(P(λ)) / ‖(1, λ, …, λ^m)‖_q` with q conjugate to the outer exponent.
pub fn eta_poly(poly: &MatrixPolynomial, lambda: Complex64, sel: NormSelector) -> f64 {
    let value = poly.eval(lambda);
    linalg::sigma_min(&value) / Monomials::new(lambda, poly.degree()).norm(sel.p.conjugate())
}

/// `‖P(λ)x‖₂ / ((Σ |λ|^i ‖A_i‖₂) ‖x‖₂)`.
pub fn eta_poly_pair(poly: &MatrixPolynomial, lambda: Complex64, x: &CVector) -> Result<f64> {
    let x_norm = linalg::vector_norm(x);
    if x_norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let weight: f64 = poly
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, a)| lambda.norm().powi(i as i32) * linalg::spectral_norm(a))
        .sum();
    if weight == 0.0 {
        return Err(Error::Degenerate("all polynomial coefficients vanish".into()));
    }
    Ok(linalg::vector_norm(&(poly.eval(lambda) * x)) / (weight * x_norm))
}

/// Backward error of λ for the pencil `λX + Y`: `σ_min(C₁(λ)) / ‖(1, λ)‖_q`.
pub fn eta_companion(pencil: &CompanionPencil, lambda: Complex64, sel: NormSelector) -> f64 {
    linalg::sigma_min(&pencil.eval(lambda)) / Monomials::new(lambda, 1).norm(sel.p.conjugate())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioBound {
    /// `eta_companion / eta_poly_only_bound`.
    pub ratio: f64,
    /// `√(m/2) · σ_min(C₁(λ)) / σ_min(R(λ))`.
    pub bound: f64,
    pub holds: bool,
}

/// Compares the companion backward error against the polynomial-only bound
/// of `R`. Only defined for `|λ| ≥ 1`.
pub fn ratio_bound_check(rep: &Realization, lambda: Complex64, tol: &Tolerances) -> Result<RatioBound> {
    if lambda.norm() < 1.0 {
        return Err(Error::Domain {
            lambda,
            reason: "the ratio bound requires |lambda| >= 1".into(),
        });
    }
    let pencil = CompanionPencil::build(rep)?;
    let (value, _) = value_and_inverse(rep, lambda, tol)?;
    let sigma_r = linalg::sigma_min(&value);
    let sigma_c = linalg::sigma_min(&pencil.eval(lambda));
    let companion = eta_companion(&pencil, lambda, NormSelector::SPECTRAL_2);
    let poly_bound = eta_poly_only_bound(rep, lambda, tol)?;
    let ratio = companion / poly_bound;
    let bound = (rep.m() as f64 / 2.0).sqrt() * sigma_c / sigma_r;
    Ok(RatioBound {
        ratio,
        bound,
        holds: ratio >= bound - RATIO_SLACK,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SigmaValues {
    pub sigma_max_t: Option<f64>,
    pub sigma_min_s: Option<f64>,
    pub sigma_max_s: Option<f64>,
    pub sigma_min_r: f64,
    pub sigma_min_c1: Option<f64>,
}

/// Every backward-error quantity at one λ.
///
/// When `R(λ)` is numerically singular the structured errors are reported
/// as 0 and `singular` is set; T and S are not formed.
#[derive(Debug, Clone, Serialize)]
pub struct BackwardErrorReport {
    #[serde(serialize_with = "crate::problems::io::ser_complex")]
    pub lambda: Complex64,
    pub singular: bool,
    pub eta_poly_bound: f64,
    /// Backward error of λ for the polynomial part `P` on its own.
    pub eta_poly_exact: f64,
    /// Eigenpair backward error of `(λ, x)` for `P`, when x is supplied.
    pub eta_pair: Option<f64>,
    #[serde(rename = "eta_C")]
    pub eta_c: f64,
    #[serde(rename = "eta_B_variational")]
    pub eta_b_variational: f64,
    #[serde(rename = "eta_B_paper")]
    pub eta_b_sigma_min: f64,
    pub eta_companion: Option<f64>,
    pub sigma_values: SigmaValues,
}

pub fn report(
    rep: &Realization,
    lambda: Complex64,
    sel: NormSelector,
    x: Option<&CVector>,
    tol: &Tolerances,
) -> Result<BackwardErrorReport> {
    let (value, scale) = rep.eval_r_scaled(lambda, tol)?;
    let sigma_min_r = linalg::sigma_min(&value);
    let singular = sigma_min_r <= tol.regular * scale;

    let pencil = CompanionPencil::build(rep).ok();
    let sigma_min_c1 = pencil.as_ref().map(|p| linalg::sigma_min(&p.eval(lambda)));
    let eta_companion = pencil.as_ref().map(|p| eta_companion(p, lambda, sel));
    let eta_pair = x.map(|x| eta_poly_pair(rep.poly(), lambda, x)).transpose()?;

    let mut sigma_values = SigmaValues {
        sigma_max_t: None,
        sigma_min_s: None,
        sigma_max_s: None,
        sigma_min_r,
        sigma_min_c1,
    };
    let (eta_c, eta_b_variational, eta_b_sigma_min) = if singular {
        (0.0, 0.0, 0.0)
    } else {
        let c = eta_perturb_c(rep, lambda, tol)?;
        let b = eta_perturb_b(rep, lambda, tol)?;
        sigma_values.sigma_max_t = Some(c.sigma_max);
        sigma_values.sigma_min_s = Some(b.sigma_min);
        sigma_values.sigma_max_s = Some(b.sigma_max);
        (c.eta, b.eta_variational, b.eta_sigma_min)
    };

    Ok(BackwardErrorReport {
        lambda,
        singular,
        eta_poly_bound: sigma_min_r / Monomials::new(lambda, rep.m()).norm(crate::realization::HolderExponent::Two),
        eta_poly_exact: eta_poly(rep.poly(), lambda, sel),
        eta_pair,
        eta_c,
        eta_b_variational,
        eta_b_sigma_min,
        eta_companion,
        sigma_values,
    })
}
