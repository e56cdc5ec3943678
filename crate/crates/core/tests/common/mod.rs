#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ratbek_core::backward_error::build_s;
use ratbek_core::perturb::Perturbation;
use ratbek_core::problems::random_realization;
use ratbek_core::realization::real_matrix;
use ratbek_core::{CMatrix, Complex64, MatrixPolynomial, Realization, Tolerances};

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// P(λ) = λ, C = B = E = 1, A = 2, so R(λ) = λ + 1/(2 − λ).
pub fn r0() -> Realization {
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

pub struct Case {
    pub seed: u64,
    pub rep: Realization,
    pub lambda: Complex64,
}

/// A λ in [−2, 2]² where R is defined and numerically nonsingular.
pub fn admissible_lambda(rep: &Realization, rng: &mut ChaCha8Rng) -> Complex64 {
    let tol = Tolerances::default();
    loop {
        let lambda = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        if build_s(rep, lambda, &tol).is_ok() {
            return lambda;
        }
    }
}

/// `count` random regular instances with 1 ≤ n ≤ n_max, 1 ≤ m ≤ m_max and
/// 0 ≤ r ≤ r_max, each with an admissible λ.
pub fn random_suite(count: usize, seed: u64, n_max: usize, m_max: usize, r_max: usize) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=n_max);
            let m = rng.random_range(1..=m_max);
            let r = rng.random_range(0..=r_max);
            let seed: u64 = rng.random();
            let rep = random_realization(n, m, r, seed, 1e3).unwrap();
            let lambda = admissible_lambda(&rep, &mut rng);
            Case { seed, rep, lambda }
        })
        .collect()
}

pub fn same_bits(a: &CMatrix, b: &CMatrix) -> bool {
    a.shape() == b.shape()
        && a.iter()
            .zip(b.iter())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
}

pub fn same_realization(a: &Realization, b: &Realization) -> bool {
    a.poly().coeffs().len() == b.poly().coeffs().len()
        && a.poly().coeffs().iter().zip(b.poly().coeffs()).all(|(x, y)| same_bits(x, y))
        && same_bits(a.c(), b.c())
        && same_bits(a.a(), b.a())
        && same_bits(a.e(), b.e())
        && same_bits(a.b(), b.b())
}

pub fn same_perturbation(a: &Perturbation, b: &Perturbation) -> bool {
    let blocks_a: Vec<_> = a.blocks().collect();
    let blocks_b: Vec<_> = b.blocks().collect();
    a.regime() == b.regime()
        && a.lambda_target().re.to_bits() == b.lambda_target().re.to_bits()
        && a.lambda_target().im.to_bits() == b.lambda_target().im.to_bits()
        && a.dc().is_some() == b.dc().is_some()
        && blocks_a.len() == blocks_b.len()
        && blocks_a.iter().zip(&blocks_b).all(|(x, y)| same_bits(x, y))
}
