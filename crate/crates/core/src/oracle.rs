//! Brute-force checks of the backward-error formulas.
//!
//! The samplers draw feasible perturbations (least-norm part plus a random
//! null-space part) and report the smallest norm seen. [`minimize_over_x`]
//! searches the unit sphere for the minimum of `‖S(λ)⁺x‖` using only linear
//! solves with `S S^*`, so it never touches a singular value routine.
//! [`adjudicate`] compares its result against both B-regime candidates.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::backward_error::{build_s, build_t, eta_perturb_b, SMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::perturb::{construct_perturb_b, verify_exactness, Perturbation, Verification};
use crate::problems::{self, gaussian_matrix};
use crate::realization::{Realization, Tolerances};

/// Relative tolerance for ties and for restart agreement.
pub const ADJUDICATION_TOL: f64 = 1e-6;

const MAX_ITERATIONS: usize = 500;
const STALL: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

/// Every `VERIFY_EVERY`-th sample is checked with [`verify_exactness`].
const VERIFY_EVERY: usize = 50;

/// Random generator for task `stream` of a master seed.
pub fn task_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A seed for task `stream`, drawn from its own generator stream.
pub fn task_seed(seed: u64, stream: u64) -> u64 {
    task_rng(seed, stream).next_u64()
}

fn random_unit<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CVector {
    loop {
        let v = CVector::from_fn(n, |_, _| problems::complex_gaussian(rng));
        let norm = linalg::vector_norm(&v);
        if norm > 1e-8 {
            return v / Complex64::new(norm, 0.0);
        }
    }
}

/// Null-space parts are scaled to `10^u` times the least-norm part, u ∈ [−4, 1].
fn null_scale<R: Rng + ?Sized>(rng: &mut R, base: f64, null: &CMatrix) -> Complex64 {
    let size = linalg::frobenius_norm(null);
    if size == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let exponent: f64 = rng.random_range(-4.0..1.0);
    Complex64::new(base * 10f64.powf(exponent) / size, 0.0)
}

/// Feasible row block `−v(Tv)^*/‖Tv‖² + N(I − uu^*)` with `u = Tv/‖Tv‖`.
/// The first term is the least-norm solution of `Δ T v = −v`.
pub fn feasible_c(t: &CMatrix, v: &CVector, null: &CMatrix) -> CMatrix {
    let tv = t * v;
    let norm2 = linalg::vector_norm(&tv).powi(2);
    let least = linalg::outer(v, &tv) * Complex64::new(-1.0 / norm2, 0.0);
    let u = &tv / Complex64::new(norm2.sqrt(), 0.0);
    let projector = linalg::identity(tv.len()) - linalg::outer(&u, &u);
    least + null * projector
}

/// Feasible column block `−S⁺x x^* + (I − S⁺S)N₁ + N₂(I − xx^*)` for a unit x.
pub fn feasible_b(s: &SMatrix, x: &CVector, null_range: &CMatrix, null_vector: &CMatrix) -> Result<CMatrix> {
    let least = -linalg::outer(&s.pinv_apply(x)?, x);
    let k = s.data().ncols();
    let range_projector = linalg::identity(k) - s.pinv_apply_matrix(s.data())?;
    let vector_projector = linalg::identity(x.len()) - linalg::outer(x, x);
    Ok(least + range_projector * null_range + null_vector * vector_projector)
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    /// Smallest Frobenius norm among the sampled feasible perturbations.
    pub min_norm: f64,
    pub samples: usize,
    pub verified: usize,
    /// Subsampled perturbations that failed [`verify_exactness`].
    pub verify_failures: usize,
}

fn summarize(
    rep: &Realization,
    lambda: Complex64,
    tol: &Tolerances,
    count: usize,
    mut draw: impl FnMut(usize) -> Result<Perturbation>,
) -> Result<SampleSummary> {
    if count == 0 {
        return Err(Error::Validation("sample count must be at least 1".into()));
    }
    let mut summary = SampleSummary {
        min_norm: f64::INFINITY,
        samples: count,
        verified: 0,
        verify_failures: 0,
    };
    for i in 0..count {
        let delta = draw(i)?;
        summary.min_norm = summary.min_norm.min(delta.total_norm());
        if i % VERIFY_EVERY == 0 {
            summary.verified += 1;
            if !verify_exactness(rep, &delta, lambda, tol)?.ok {
                summary.verify_failures += 1;
            }
        }
    }
    Ok(summary)
}

/// Samples feasible perturbations of the polynomial coefficients and `C`.
pub fn sample_feasible_c(
    rep: &Realization,
    lambda: Complex64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SampleSummary> {
    let t = build_t(rep, lambda, tol)?;
    let (rows, n) = t.data().shape();
    let mut rng = task_rng(seed, 0);
    summarize(rep, lambda, tol, count, |_| {
        let v = random_unit(&mut rng, n);
        let base = 1.0 / linalg::vector_norm(&(t.data() * &v));
        let g = gaussian_matrix(&mut rng, n, rows);
        let null = &g * null_scale(&mut rng, base, &g);
        Perturbation::from_row_block(rep, &feasible_c(t.data(), &v, &null), lambda)
    })
}

/// Samples feasible perturbations of the polynomial coefficients and `B`.
pub fn sample_feasible_b(
    rep: &Realization,
    lambda: Complex64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<SampleSummary> {
    let s = build_s(rep, lambda, tol)?;
    let (n, cols) = s.data().shape();
    let mut rng = task_rng(seed, 0);
    summarize(rep, lambda, tol, count, |_| {
        let x = random_unit(&mut rng, n);
        let base = linalg::vector_norm(&s.pinv_apply(&x)?);
        let g1 = gaussian_matrix(&mut rng, cols, n);
        let g2 = gaussian_matrix(&mut rng, cols, n);
        let g1 = &g1 * null_scale(&mut rng, base, &g1);
        let g2 = &g2 * null_scale(&mut rng, base, &g2);
        Perturbation::from_column_block(rep, &feasible_b(&s, &x, &g1, &g2)?, lambda)
    })
}

#[derive(Debug, Clone)]
pub struct Minimum {
    /// Best `‖S⁺x‖` found.
    pub eta: f64,
    pub x: CVector,
    /// Best value of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// False when the restarts disagree by more than [`ADJUDICATION_TOL`].
    pub agree: bool,
}

/// `x ↦ (S S^*)⁻¹ x`, so that `‖S⁺x‖² = x^* M x`.
struct Quadratic {
    lu: nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl Quadratic {
    fn new(s: &SMatrix) -> Result<Self> {
        let gram = s.data() * s.data().adjoint();
        let lu = gram.lu();
        if !lu.is_invertible() {
            return Err(Error::Degenerate("S(lambda) S(lambda)^* is singular".into()));
        }
        Ok(Self { lu })
    }

    /// `(f(x), Mx)` for a unit x.
    fn eval(&self, x: &CVector) -> Result<(f64, CVector)> {
        let mx = self.lu.solve(x).ok_or(Error::NoConvergence)?;
        Ok((x.dotc(&mx).re, mx))
    }
}

fn normalize(v: CVector) -> CVector {
    let norm = linalg::vector_norm(&v);
    v / Complex64::new(norm, 0.0)
}

/// Projected gradient descent on `f(x) = x^* M x` over the complex unit sphere.
fn descend(q: &Quadratic, mut x: CVector) -> Result<(f64, CVector)> {
    let (mut f, mut mx) = q.eval(&x)?;
    // First trial step 1/(2‖Mx‖); afterwards each iteration starts from twice the last accepted step.
    let mut step = 0.5 / linalg::vector_norm(&mx).max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITERATIONS {
        let grad = (&mx - &x * Complex64::new(f, 0.0)) * Complex64::new(2.0, 0.0);
        let slope = linalg::vector_norm(&grad).powi(2);
        if slope == 0.0 {
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let candidate = normalize(&x - &grad * Complex64::new(step, 0.0));
            let (fc, mc) = q.eval(&candidate)?;
            if fc <= f - ARMIJO * step * slope {
                accepted = Some((candidate, fc, mc));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, fc, mc)) = accepted else {
            break;
        };
        let decrease = (f - fc) / f;
        x = candidate;
        f = fc;
        mx = mc;
        if decrease < STALL {
            break;
        }
    }
    Ok((f, x))
}

/// Minimizes `‖S(λ)⁺x‖` over unit x with `restarts` random starts. Restarts run
/// in parallel; restart k draws its start from stream k of `seed`.
pub fn minimize_over_x(
    rep: &Realization,
    lambda: Complex64,
    restarts: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Minimum> {
    if restarts == 0 {
        return Err(Error::Validation("at least one restart is required".into()));
    }
    let s = build_s(rep, lambda, tol)?;
    let q = Quadratic::new(&s)?;
    let n = rep.n();
    let runs = (0..restarts as u64)
        .into_par_iter()
        .map(|k| descend(&q, random_unit(&mut task_rng(seed, k), n)))
        .collect::<Result<Vec<_>>>()?;

    let restart_values: Vec<f64> = runs.iter().map(|(f, _)| f.max(0.0).sqrt()).collect();
    let (best, _) = restart_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let lo = restart_values[best];
    let hi = restart_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let agree = hi - lo <= ADJUDICATION_TOL * lo;
    if !agree {
        log::warn!("oracle restarts disagree at lambda = {lambda}: min {lo:e}, max {hi:e}");
    }
    Ok(Minimum {
        eta: lo,
        x: runs[best].1.clone(),
        restart_values,
        agree,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    Variational,
    Paper,
    Tie,
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Winner::Variational => "variational",
            Winner::Paper => "paper",
            Winner::Tie => "tie",
        })
    }
}

/// Tie when both candidates are within `tol` (relative) of the oracle value,
/// otherwise the nearer one.
pub fn pick_winner(eta_oracle: f64, eta_variational: f64, eta_paper: f64, tol: f64) -> Winner {
    let dv = (eta_oracle - eta_variational).abs();
    let dp = (eta_oracle - eta_paper).abs();
    let scale = eta_oracle.abs();
    if dv <= tol * scale && dp <= tol * scale {
        Winner::Tie
    } else if dv <= dp {
        Winner::Variational
    } else {
        Winner::Paper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdjudicationRecord {
    pub instance_id: usize,
    #[serde(serialize_with = "crate::problems::io::ser_complex")]
    pub lambda: Complex64,
    pub eta_oracle: f64,
    pub eta_variational: f64,
    pub eta_paper: f64,
    pub winner: Winner,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct AdjudicationConfig {
    pub restarts: usize,
    /// Feasible samples drawn to confirm that nothing beats the oracle.
    pub samples: usize,
    pub seed: u64,
    pub instance_id: usize,
}

impl Default for AdjudicationConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            samples: 200,
            seed: 0,
            instance_id: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Adjudication {
    pub record: AdjudicationRecord,
    pub minimum: Minimum,
    /// Verification of `−S⁺x x^*` at the oracle's x.
    pub verification: Verification,
    pub sampling: SampleSummary,
}

pub fn adjudicate(
    rep: &Realization,
    lambda: Complex64,
    config: &AdjudicationConfig,
    tol: &Tolerances,
) -> Result<Adjudication> {
    let minimum = minimize_over_x(rep, lambda, config.restarts, task_seed(config.seed, 0), tol)?;
    let delta = construct_perturb_b(rep, lambda, Some(&minimum.x), tol)?;
    let verification = verify_exactness(rep, &delta, lambda, tol)?;
    let sampling = sample_feasible_b(rep, lambda, config.samples.max(1), task_seed(config.seed, 1), tol)?;
    let candidates = eta_perturb_b(rep, lambda, tol)?;
    let record = AdjudicationRecord {
        instance_id: config.instance_id,
        lambda,
        eta_oracle: minimum.eta,
        eta_variational: candidates.eta_variational,
        eta_paper: candidates.eta_sigma_min,
        winner: pick_winner(
            minimum.eta,
            candidates.eta_variational,
            candidates.eta_sigma_min,
            ADJUDICATION_TOL,
        ),
        samples: sampling.samples,
        seed: config.seed,
    };
    Ok(Adjudication {
        record,
        minimum,
        verification,
        sampling,
    })
}

/// Random instances for [`adjudicate_suite`]: n ∈ {2, 3}, m ∈ {1, 2}, r ∈ {0..4}.
pub fn adjudication_instance(seed: u64) -> Result<(Realization, Complex64)> {
    let tol = Tolerances::default();
    let mut rng = task_rng(seed, 0);
    let n = rng.random_range(2..=3);
    let m = rng.random_range(1..=2);
    let r = rng.random_range(0..=4);
    let rep = problems::random_realization(n, m, r, rng.next_u64(), 1e3)?;
    for _ in 0..100 {
        let lambda = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if build_s(&rep, lambda, &tol).is_ok() {
            return Ok((rep, lambda));
        }
    }
    Err(Error::Generation { attempts: 100 })
}

/// Adjudicates `count` generated instances in parallel; instance i uses seed
/// stream i of `seed`. Results come back in instance order.
pub fn adjudicate_suite(
    count: usize,
    seed: u64,
    restarts: usize,
    samples: usize,
    tol: &Tolerances,
) -> Vec<Result<Adjudication>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let instance_seed = task_seed(seed, i as u64);
            let (rep, lambda) = adjudication_instance(instance_seed)?;
            let config = AdjudicationConfig {
                restarts,
                samples,
                seed: instance_seed,
                instance_id: i,
            };
            adjudicate(&rep, lambda, &config, tol)
        })
        .collect()
}

/// Writes the adjudication CSV with 17 significant digits.
pub fn write_adjudication_csv<W: Write>(out: W, records: &[AdjudicationRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    writer
        .write_record([
            "instance_id",
            "lambda_re",
            "lambda_im",
            "eta_oracle",
            "eta_variational",
            "eta_paper",
            "winner",
            "samples",
            "seed",
        ])
        .map_err(csv_err)?;
    for r in records {
        writer
            .write_record([
                r.instance_id.to_string(),
                problems::io::format_real(r.lambda.re),
                problems::io::format_real(r.lambda.im),
                problems::io::format_real(r.eta_oracle),
                problems::io::format_real(r.eta_variational),
                problems::io::format_real(r.eta_paper),
                r.winner.to_string(),
                r.samples.to_string(),
                r.seed.to_string(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}
