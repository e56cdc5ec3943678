mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ratbek_core::backward_error::{
    build_s, build_t, eta_perturb_b, eta_perturb_c, eta_perturb_c_vector, eta_poly_only_bound, ratio_bound_check,
};
use ratbek_core::linalg::{self, CMatrix, CVector};
use ratbek_core::linearize::{eigensolve, recover_triples, CompanionPencil};
use ratbek_core::oracle::{self, minimize_over_x, sample_feasible_b, sample_feasible_c, Winner};
use ratbek_core::perturb::{construct_perturb_b, construct_perturb_c, verify_exactness};
use ratbek_core::problems::{self, from_scalar_poles, random_realization, LowRankFactor, PoleFamily, ScalarPoleTerm};
use ratbek_core::{Complex64, MatrixPolynomial, NormSelector, Realization, Tolerances};

use common::{admissible_lambda, same_realization};

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

/// Determinant by the permutation expansion, independent of any factorization.
fn leibniz(m: &CMatrix) -> Complex64 {
    let n = m.nrows();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut total = Complex64::new(0.0, 0.0);
    let mut sign = 1.0;
    let mut c = vec![0usize; n];
    let term = |perm: &[usize], sign: f64| perm.iter().enumerate().fold(Complex64::new(sign, 0.0), |acc, (i, &j)| acc * m[(i, j)]);
    total += term(&perm, sign);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            total += term(&perm, sign);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    total
}

/// `Σ λ^j A_j` with explicit powers.
fn power_sum(poly: &MatrixPolynomial, lambda: Complex64) -> CMatrix {
    poly.coeffs()
        .iter()
        .enumerate()
        .fold(CMatrix::zeros(poly.size(), poly.size()), |acc, (j, a)| acc + a * lambda.powu(j as u32))
}

fn rel(a: &CMatrix, b: &CMatrix) -> f64 {
    linalg::frobenius_norm(&(a - b)) / linalg::frobenius_norm(b).max(f64::MIN_POSITIVE)
}

fn instance(n_max: usize, m_max: usize, r_max: usize) -> impl Strategy<Value = (Realization, Complex64, u64)> {
    (1..=n_max, 1..=m_max, 0..=r_max, any::<u64>()).prop_map(|(n, m, r, seed)| {
        let rep = random_realization(n, m, r, seed, 1e3).unwrap();
        let lambda = admissible_lambda(&rep, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed));
        (rep, lambda, seed)
    })
}

proptest! {
    #![proptest_config(config(48))]

    #[test]
    fn horner_matches_power_sum(n in 1usize..=6, m in 0usize..=4, seed in any::<u64>(), re in -10.0..10.0f64, im in -10.0..10.0f64) {
        let rep = random_realization(n, m, 0, seed, 1e3).unwrap();
        let lambda = Complex64::new(re, im);
        prop_assume!(lambda.norm() <= 10.0);
        let expected = power_sum(rep.poly(), lambda);
        prop_assert!(rel(&rep.poly().eval(lambda), &expected) <= 1e-12);
        // Without a state space R and P coincide.
        prop_assert_eq!(rep.eval_r(lambda, &Tolerances::default()).unwrap(), rep.eval_p(lambda));
    }

    #[test]
    fn state_solve_residual((rep, lambda, _) in instance(5, 3, 4)) {
        prop_assume!(rep.r() > 0);
        let tol = Tolerances::default();
        let y = rep.state_response(lambda, &tol).unwrap();
        let shifted = rep.a() - rep.e() * lambda;
        prop_assert!(linalg::frobenius_norm(&(&shifted * &y - rep.b())) <= 1e-10 * linalg::frobenius_norm(rep.b()));
        prop_assert!(rel(&rep.eval_w(lambda, &tol).unwrap(), &(rep.c() * &y)) <= 1e-14);
    }

    #[test]
    fn frobenius_norm_is_root_sum_of_squares((rep, _, _) in instance(4, 3, 3)) {
        let mut sum: f64 = rep.poly().coeffs().iter().map(|a| linalg::frobenius_norm(a).powi(2)).sum();
        sum += [rep.c(), rep.a(), rep.e(), rep.b()].iter().map(|m| linalg::frobenius_norm(m).powi(2)).sum::<f64>();
        let norm = rep.norm(NormSelector::FROBENIUS_2);
        prop_assert!((norm - sum.sqrt()).abs() <= 1e-13 * norm);
    }

    #[test]
    fn determinant_identity_against_permutation_expansion(n in 1usize..=2, m in 1usize..=2, r in 0usize..=2, seed in any::<u64>()) {
        let rep = random_realization(n, m, r, seed, 1e3).unwrap();
        let lambda = admissible_lambda(&rep, &mut ChaCha8Rng::seed_from_u64(seed));
        let pencil = CompanionPencil::build(&rep).unwrap();
        let tol = Tolerances::default();
        let lhs = leibniz(&pencil.eval(lambda));
        let rhs = leibniz(&(rep.a() - rep.e() * lambda)) * leibniz(&rep.eval_r(lambda, &tol).unwrap());
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm());
    }

    #[test]
    fn shift_invariance((rep, _, seed) in instance(4, 3, 3)) {
        let tol = Tolerances::default();
        let pencil = CompanionPencil::build(&rep).unwrap();
        let radius = 1.0 + linalg::spectral_norm(pencil.y()) / linalg::spectral_norm(pencil.x());
        let shift = Complex64::from_polar(radius, (seed % 628) as f64 / 100.0);
        let (Ok(a), Ok(b)) = (eigensolve(&pencil, Complex64::new(0.0, 0.0), &tol), eigensolve(&pencil, shift, &tol)) else {
            return Err(TestCaseError::reject("shift hit the spectrum"));
        };
        let ea = a.eigenvalues();
        let eb = b.eigenvalues();
        prop_assert_eq!(ea.len(), eb.len());
        let mut used = vec![false; eb.len()];
        for l in &ea {
            let (k, d) = eb.iter().enumerate().filter(|(k, _)| !used[*k])
                .map(|(k, x)| (k, (x - l).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1)).unwrap();
            used[k] = true;
            prop_assert!(d <= 1e-8 * l.norm().max(1.0), "{} vs {}", l, eb[k]);
        }
    }

    #[test]
    fn eigenvector_block_structure((rep, _, seed) in instance(4, 3, 3)) {
        let tol = Tolerances::default();
        let (spectrum, triples) = ratbek_core::linearize::eigentriples(&rep, &tol, seed).unwrap();
        let again = recover_triples(&rep, &spectrum.pairs(), &tol).unwrap();
        prop_assert_eq!(triples.len(), again.len());
        for t in &triples {
            prop_assert!(t.block_mismatch <= 1e-8);
            prop_assert!((linalg::vector_norm(&t.x) - 1.0).abs() <= 1e-12);
            if let Some(mismatch) = t.state_mismatch {
                prop_assert!(mismatch <= 1e-7 * linalg::vector_norm(&t.w).max(1.0));
            }
        }
    }

    #[test]
    fn t_and_s_structure((rep, lambda, _) in instance(5, 3, 4)) {
        let tol = Tolerances::default();
        let t = build_t(&rep, lambda, &tol).unwrap();
        let s = build_s(&rep, lambda, &tol).unwrap();
        for j in 0..=rep.m() {
            prop_assert!(rel(&t.block(j), &(t.block(0) * lambda.powu(j as u32))) <= 1e-13);
            prop_assert!(rel(&s.block(j), &(s.block(0) * lambda.powu(j as u32))) <= 1e-13);
        }
        let st = linalg::singular_values(t.data());
        let ss = linalg::singular_values(s.data());
        prop_assert_eq!(st.len(), rep.n());
        prop_assert!(st[rep.n() - 1] > 1e-10 * st[0]);
        prop_assert!(ss[rep.n() - 1] > 1e-10 * ss[0]);
        let sp = s.pinv_apply_matrix(&linalg::identity(rep.n())).unwrap();
        prop_assert!(linalg::frobenius_norm(&(s.data() * sp - linalg::identity(rep.n()))) <= 1e-10);
    }

    #[test]
    fn c_regime_optimum_dominates_every_direction((rep, lambda, seed) in instance(4, 3, 3)) {
        let tol = Tolerances::default();
        let best = eta_perturb_c(&rep, lambda, &tol).unwrap();
        let at_optimum = eta_perturb_c_vector(&rep, lambda, &best.v, &tol).unwrap();
        prop_assert!((at_optimum - best.eta).abs() <= 1e-12 * best.eta);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let v = CVector::from_fn(rep.n(), |_, _| problems::complex_gaussian(&mut rng));
            prop_assert!(eta_perturb_c_vector(&rep, lambda, &v, &tol).unwrap() >= best.eta * (1.0 - 1e-12));
        }
    }

    #[test]
    fn regime_orderings((rep, lambda, _) in instance(5, 3, 4)) {
        let tol = Tolerances::default();
        let eta_c = eta_perturb_c(&rep, lambda, &tol).unwrap().eta;
        prop_assert!(eta_c <= eta_poly_only_bound(&rep, lambda, &tol).unwrap() + 1e-12);
        let b = eta_perturb_b(&rep, lambda, &tol).unwrap();
        prop_assert!(b.eta_variational <= b.eta_sigma_min * (1.0 + 1e-14));
        if rep.n() == 1 {
            prop_assert!((b.eta_variational - b.eta_sigma_min).abs() <= 1e-14 * b.eta_sigma_min);
        }
    }

    #[test]
    fn constructed_perturbations((rep, lambda, _) in instance(5, 3, 4)) {
        let tol = Tolerances::default();
        let eta_c = eta_perturb_c(&rep, lambda, &tol).unwrap().eta;
        let eta_b = eta_perturb_b(&rep, lambda, &tol).unwrap().eta_variational;
        let dc = construct_perturb_c(&rep, lambda, None, &tol).unwrap();
        let db = construct_perturb_b(&rep, lambda, None, &tol).unwrap();
        prop_assert!((dc.total_norm() - eta_c).abs() <= 1e-12 * eta_c);
        prop_assert!((db.total_norm() - eta_b).abs() <= 1e-12 * eta_b);
        for delta in [&dc, &db] {
            prop_assert!(verify_exactness(&rep, delta, lambda, &tol).unwrap().ok);
            let mut spectral_sq = 0.0;
            for block in delta.blocks() {
                let s = linalg::singular_values(block);
                if s.is_empty() || s[0] == 0.0 {
                    continue;
                }
                prop_assert!(s.get(1).is_none_or(|&s2| s2 <= 1e-12 * s[0]));
                prop_assert!((s[0] - linalg::frobenius_norm(block)).abs() <= 1e-12 * s[0]);
                spectral_sq += s[0] * s[0];
            }
            prop_assert!((spectral_sq.sqrt() - delta.total_norm()).abs() <= 1e-12 * delta.total_norm());
        }
        for (j, block) in dc.dpoly().iter().enumerate() {
            let expected = &dc.dpoly()[0] * lambda.conj().powu(j as u32);
            prop_assert!(linalg::frobenius_norm(&(block - expected)) <= 1e-13 * dc.total_norm());
        }
    }

    #[test]
    fn ratio_bound_outside_unit_disc((rep, _, seed) in instance(5, 3, 4), modulus in 1.0..4.0f64, angle in 0.0..std::f64::consts::TAU) {
        let tol = Tolerances::default();
        let lambda = Complex64::from_polar(modulus, angle);
        let Ok(check) = ratio_bound_check(&rep, lambda, &tol) else {
            return Err(TestCaseError::reject(format!("lambda {lambda} not admissible (seed {seed})")));
        };
        prop_assert!(check.holds, "ratio {} < bound {}", check.ratio, check.bound);
    }

    #[test]
    fn generator_is_deterministic(n in 1usize..=4, m in 0usize..=3, r in 0usize..=3, seed in any::<u64>()) {
        let a = random_realization(n, m, r, seed, 1e3).unwrap();
        let b = random_realization(n, m, r, seed, 1e3).unwrap();
        prop_assert!(same_realization(&a, &b));
        prop_assert!(a.probe_regularity(8, seed, &Tolerances::default()).regular);
    }
}

proptest! {
    #![proptest_config(config(12))]

    #[test]
    fn sampled_perturbations_never_undercut_eta((rep, lambda, seed) in instance(3, 2, 3)) {
        let tol = Tolerances::default();
        let eta_c = eta_perturb_c(&rep, lambda, &tol).unwrap().eta;
        let eta_b = eta_perturb_b(&rep, lambda, &tol).unwrap().eta_variational;
        let sc = sample_feasible_c(&rep, lambda, 300, seed, &tol).unwrap();
        let sb = sample_feasible_b(&rep, lambda, 300, seed, &tol).unwrap();
        prop_assert!(sc.min_norm >= eta_c * (1.0 - 1e-9));
        prop_assert!(sb.min_norm >= eta_b * (1.0 - 1e-9));
        prop_assert_eq!(sc.verify_failures + sb.verify_failures, 0);
    }

    #[test]
    fn oracle_finds_the_variational_value((rep, lambda, seed) in instance(3, 2, 3)) {
        let tol = Tolerances::default();
        let min = minimize_over_x(&rep, lambda, 8, seed, &tol).unwrap();
        let b = eta_perturb_b(&rep, lambda, &tol).unwrap();
        prop_assert!(min.eta >= b.eta_variational * (1.0 - 1e-9));
        prop_assert!((min.eta - b.eta_variational).abs() <= 1e-8 * b.eta_variational);
        let delta = construct_perturb_b(&rep, lambda, Some(&min.x), &tol).unwrap();
        prop_assert!(verify_exactness(&rep, &delta, lambda, &tol).unwrap().ok);
        if b.eta_sigma_min - b.eta_variational > 1e-6 * b.eta_variational {
            prop_assert!((min.eta - b.eta_sigma_min).abs() > 1e-6 * min.eta);
        }
    }
}

#[test]
fn scalar_pole_terms_match_direct_evaluation() {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 3;
    for family in [PoleFamily::FluidSolid, PoleFamily::Condensed] {
        let poly = MatrixPolynomial::new(vec![
            problems::gaussian_matrix(&mut rng, n, n),
            problems::gaussian_matrix(&mut rng, n, n),
        ])
        .unwrap();
        let terms: Vec<ScalarPoleTerm> = (0..3)
            .map(|j| {
                let rank = j % 2 + 1;
                ScalarPoleTerm {
                    rho: problems::complex_gaussian(&mut rng),
                    k: Complex64::new(2.0 + j as f64, 0.5),
                    m_coef: Complex64::new(1.0 + 0.5 * j as f64, -0.25),
                    factor: LowRankFactor::new(
                        problems::gaussian_matrix(&mut rng, n, rank),
                        problems::gaussian_matrix(&mut rng, rank, n),
                    )
                    .unwrap(),
                }
            })
            .collect();
        let rep = from_scalar_poles(&poly, &terms, family).unwrap();
        let mut checked = 0;
        while checked < 20 {
            let lambda = admissible_lambda(&rep, &mut rng);
            let mut direct = poly.eval(lambda);
            for t in &terms {
                let weight = match family {
                    PoleFamily::FluidSolid => lambda,
                    PoleFamily::Condensed => lambda * lambda,
                };
                direct += t.factor.dense() * (t.rho * weight / (t.k - lambda * t.m_coef));
            }
            let built = rep.eval_r(lambda, &tol).unwrap();
            assert!(rel(&built, &direct) <= 1e-10, "{family:?} at {lambda}");
            checked += 1;
        }
    }
}

#[test]
fn repeated_sigma_gives_a_tie() {
    // A unitary constant polynomial makes every singular value of S equal to 1.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let u = CMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(s, 0.0), Complex64::new(0.0, s), Complex64::new(0.0, s), Complex64::new(s, 0.0)],
    );
    let rep = Realization::polynomial(MatrixPolynomial::new(vec![u]).unwrap());
    let tol = Tolerances::default();
    let out = oracle::adjudicate(&rep, Complex64::new(0.3, 0.1), &oracle::AdjudicationConfig::default(), &tol).unwrap();
    assert_eq!(out.record.winner, Winner::Tie);
    assert!((out.record.eta_oracle - 1.0).abs() < 1e-12);
}

#[test]
fn adjudication_records_repeat_exactly() {
    let tol = Tolerances::default();
    let run = || {
        let records: Vec<_> = oracle::adjudicate_suite(6, 77, 8, 50, &tol)
            .into_iter()
            .map(|r| r.unwrap().record)
            .collect();
        let mut csv = Vec::new();
        oracle::write_adjudication_csv(&mut csv, &records).unwrap();
        csv
    };
    assert_eq!(run(), run());
}

#[test]
fn sampling_ratio_on_a_three_by_three_instance() {
    let tol = Tolerances::default();
    let rep = random_realization(3, 2, 2, 3, 1e3).unwrap();
    let lambda = admissible_lambda(&rep, &mut ChaCha8Rng::seed_from_u64(3));
    let eta = eta_perturb_c(&rep, lambda, &tol).unwrap().eta;
    let sample = sample_feasible_c(&rep, lambda, 1000, 3, &tol).unwrap();
    assert!(sample.min_norm / eta >= 1.0 - 1e-9);
}
