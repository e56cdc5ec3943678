//! Minimal structured perturbations that turn an approximate eigenvalue into
//! an exact one, and their verification.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::backward_error::{build_s, build_t};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::realization::{MatrixPolynomial, Realization, Tolerances};

/// Which realization blocks move besides the polynomial coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    PolyAndC,
    PolyAndB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    regime: Regime,
    dpoly: Vec<CMatrix>,
    dc: Option<CMatrix>,
    db: Option<CMatrix>,
    lambda_target: Complex64,
    total_norm: f64,
}

impl Perturbation {
    /// Exactly one of `dc`/`db` must be given, matching `regime`.
    pub fn new(
        regime: Regime,
        dpoly: Vec<CMatrix>,
        dc: Option<CMatrix>,
        db: Option<CMatrix>,
        lambda_target: Complex64,
    ) -> Result<Self> {
        match (regime, &dc, &db) {
            (Regime::PolyAndC, Some(_), None) | (Regime::PolyAndB, None, Some(_)) => {}
            _ => {
                return Err(Error::Validation(format!(
                    "perturbation regime {regime:?} needs exactly its own realization block"
                )))
            }
        }
        if dpoly.is_empty() {
            return Err(Error::Dimension("perturbation needs at least one coefficient".into()));
        }
        let blocks = dpoly.iter().chain(dc.iter()).chain(db.iter());
        if !blocks.clone().all(linalg::is_finite_matrix) {
            return Err(Error::Validation("perturbation has non-finite entries".into()));
        }
        let total_norm = blocks.map(|b| linalg::frobenius_norm(b).powi(2)).sum::<f64>().sqrt();
        Ok(Self {
            regime,
            dpoly,
            dc,
            db,
            lambda_target,
            total_norm,
        })
    }

    pub fn zero(rep: &Realization, regime: Regime, lambda_target: Complex64) -> Self {
        let (n, m, r) = (rep.n(), rep.m(), rep.r());
        let (dc, db) = match regime {
            Regime::PolyAndC => (Some(CMatrix::zeros(n, r)), None),
            Regime::PolyAndB => (None, Some(CMatrix::zeros(r, n))),
        };
        Self::new(regime, vec![CMatrix::zeros(n, n); m + 1], dc, db, lambda_target).expect("consistent zero")
    }

    /// Slices a row block `[ΔA₀ … ΔA_m ΔC]`.
    pub fn from_row_block(rep: &Realization, delta: &CMatrix, lambda_target: Complex64) -> Result<Self> {
        let (n, m, r) = (rep.n(), rep.m(), rep.r());
        if delta.shape() != (n, (m + 1) * n + r) {
            return Err(Error::Dimension("row block has the wrong shape".into()));
        }
        let dpoly = (0..=m).map(|j| linalg::block(delta, 0, j * n, n, n)).collect();
        let dc = linalg::block(delta, 0, (m + 1) * n, n, r);
        Self::new(Regime::PolyAndC, dpoly, Some(dc), None, lambda_target)
    }

    /// Slices a column block `[ΔA₀; …; ΔA_m; ΔB]`.
    pub fn from_column_block(rep: &Realization, delta: &CMatrix, lambda_target: Complex64) -> Result<Self> {
        let (n, m, r) = (rep.n(), rep.m(), rep.r());
        if delta.shape() != ((m + 1) * n + r, n) {
            return Err(Error::Dimension("column block has the wrong shape".into()));
        }
        let dpoly = (0..=m).map(|j| linalg::block(delta, j * n, 0, n, n)).collect();
        let db = linalg::block(delta, (m + 1) * n, 0, r, n);
        Self::new(Regime::PolyAndB, dpoly, None, Some(db), lambda_target)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn dpoly(&self) -> &[CMatrix] {
        &self.dpoly
    }

    pub fn dc(&self) -> Option<&CMatrix> {
        self.dc.as_ref()
    }

    pub fn db(&self) -> Option<&CMatrix> {
        self.db.as_ref()
    }

    pub fn lambda_target(&self) -> Complex64 {
        self.lambda_target
    }

    /// `sqrt(Σ‖ΔA_j‖_F² + ‖ΔC or ΔB‖_F²)`.
    pub fn total_norm(&self) -> f64 {
        self.total_norm
    }

    /// All blocks in storage order, realization block last.
    pub fn blocks(&self) -> impl Iterator<Item = &CMatrix> {
        self.dpoly.iter().chain(self.dc.iter()).chain(self.db.iter())
    }

    pub fn negated(&self) -> Self {
        Self {
            regime: self.regime,
            dpoly: self.dpoly.iter().map(|a| -a).collect(),
            dc: self.dc.as_ref().map(|c| -c),
            db: self.db.as_ref().map(|b| -b),
            lambda_target: self.lambda_target,
            total_norm: self.total_norm,
        }
    }
}

/// `Δ = −v (T(λ)v)^* / ‖T(λ)v‖²` sliced into `ΔA_j` and `ΔC`. Without an
/// explicit `v` the σ_max right singular vector of T is used, which makes
/// the norm equal to the backward error `1/σ_max(T)`.
pub fn construct_perturb_c(
    rep: &Realization,
    lambda: Complex64,
    v: Option<&CVector>,
    tol: &Tolerances,
) -> Result<Perturbation> {
    let t = build_t(rep, lambda, tol)?;
    let v = match v {
        Some(v) => normalized(v)?,
        None => linalg::svd(t.data()).right(0),
    };
    let tv = t.data() * &v;
    let scale = Complex64::new(-1.0 / linalg::vector_norm(&tv).powi(2), 0.0);
    let delta = linalg::outer(&v, &tv) * scale;
    Perturbation::from_row_block(rep, &delta, lambda)
}

/// `Δ = −S(λ)⁺ x x^*` sliced into `ΔA_j` and `ΔB`. Without an explicit `x`
/// the σ_max left singular vector of S is used.
pub fn construct_perturb_b(
    rep: &Realization,
    lambda: Complex64,
    x: Option<&CVector>,
    tol: &Tolerances,
) -> Result<Perturbation> {
    let s = build_s(rep, lambda, tol)?;
    let x = match x {
        Some(x) => normalized(x)?,
        None => linalg::svd(s.data()).left(0),
    };
    let delta = -linalg::outer(&s.pinv_apply(&x)?, &x);
    Perturbation::from_column_block(rep, &delta, lambda)
}

fn normalized(v: &CVector) -> Result<CVector> {
    let norm = linalg::vector_norm(v);
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v / Complex64::new(norm, 0.0))
}

/// Adds the perturbation to the polynomial coefficients and to `C` or `B`.
pub fn apply(rep: &Realization, delta: &Perturbation) -> Result<Realization> {
    let (n, m, r) = (rep.n(), rep.m(), rep.r());
    if delta.dpoly.len() != m + 1 || delta.dpoly.iter().any(|d| d.shape() != (n, n)) {
        return Err(Error::Dimension(format!(
            "perturbation coefficients do not match an n = {n}, m = {m} realization"
        )));
    }
    let coeffs = rep.poly().coeffs().iter().zip(&delta.dpoly).map(|(a, d)| a + d).collect();
    let mut c = rep.c().clone();
    let mut b = rep.b().clone();
    if let Some(dc) = &delta.dc {
        if dc.shape() != (n, r) {
            return Err(Error::Dimension(format!("dC is {:?}, expected ({n}, {r})", dc.shape())));
        }
        c += dc;
    }
    if let Some(db) = &delta.db {
        if db.shape() != (r, n) {
            return Err(Error::Dimension(format!("dB is {:?}, expected ({r}, {n})", db.shape())));
        }
        b += db;
    }
    Realization::new(MatrixPolynomial::new(coeffs)?, c, rep.a().clone(), rep.e().clone(), b)
}

#[derive(Debug, Clone)]
pub struct Verification {
    /// `σ_min` of the perturbed `R(λ)`.
    pub sigma: f64,
    /// `Σ_j |λ|^j ‖Ã_j‖ + ‖W̃(λ)‖` of the perturbed realization.
    pub scale: f64,
    pub ok: bool,
    /// Right singular vector for `sigma`: an eigenvector of the perturbed problem.
    pub witness: CVector,
}

/// Checks that λ is an eigenvalue of the perturbed realization:
/// `σ_min ≤ verify · scale + verify_abs`, with the scale of
/// [`Realization::eval_r_scaled`] taken for the perturbed realization.
pub fn verify_exactness(
    rep: &Realization,
    delta: &Perturbation,
    lambda: Complex64,
    tol: &Tolerances,
) -> Result<Verification> {
    let perturbed = apply(rep, delta)?;
    let (value, scale) = perturbed.eval_r_scaled(lambda, tol)?;
    let svd = linalg::svd(&value);
    let sigma = svd.smallest();
    Ok(Verification {
        sigma,
        scale,
        ok: sigma <= tol.verify * scale + tol.verify_abs,
        witness: svd.right(svd.values.len() - 1),
    })
}
