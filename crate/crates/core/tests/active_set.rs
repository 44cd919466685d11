mod common;

use exclasso::active_set::*;
use exclasso::partition::*;
use exclasso::solvers::*;
use nalgebra::DMatrix;

#[test]
fn per_group_necessary_test_equals_enumeration() {
    let mut checked = 0;
    let mut passes = 0;
    for t in 0..200u64 {
        let mut rng = common::rng(20, t);
        let p = common::int(&mut rng, 2, 8);
        let k = common::int(&mut rng, 1, p.min(4));
        let part = common::random_partition(&mut rng, p, k);
        let n = common::int(&mut rng, p, 20);
        let support: Vec<usize> = (0..p).filter(|_| rng.uniform() < 0.5).collect();
        let pb = common::planted_problem(&mut rng, n, p, &support, 0.05);
        let mu = 10f64.powf(-3.0 + 2.5 * rng.uniform());
        let state = common::restricted_state(&pb, &part, support, mu);
        for zero_tol in [1e-6, 1e-2, 1.0] {
            let fast = necessary_condition(&state, &part, EvolutionMode::Plain, mu, zero_tol).unwrap();
            assert_eq!(fast.pass, common::exhaustive_necessary(&state, &part, mu, zero_tol), "trial {t}");
            checked += 1;
            passes += fast.pass as usize;
        }
    }
    // Both outcomes must be exercised.
    assert!(passes > 0 && passes < checked, "{passes} of {checked}");
}

#[test]
fn converged_runs_are_epsilon_optimal() {
    for t in 0..30u64 {
        let mut rng = common::rng(21, t);
        let p = common::int(&mut rng, 4, 30);
        let k = common::int(&mut rng, 1, p.min(6));
        let part = common::random_partition(&mut rng, p, k);
        let n = common::int(&mut rng, 5, 40);
        let support: Vec<usize> = (0..p).filter(|_| rng.uniform() < 0.3).collect();
        let pb = common::planted_problem(&mut rng, n, p, &support, 0.1);
        let mu = 10f64.powf(-2.0 + 2.0 * rng.uniform());
        let eps = 1e-6 * ls_loss(&pb, &vec![0.0; p]).unwrap();
        let out = active_set_solve(&pb, &part, &ActiveSetConfig::new(mu, p, eps, EvolutionMode::Plain)).unwrap();
        assert!(out.trace.len() <= p);
        for w in out.trace.windows(2) {
            assert_eq!(w[1].support_size, w[0].support_size + 1);
        }
        if out.report.converged {
            let g = common::squared_gap(&pb, &part, &out.report.x_hat, mu);
            assert!(g <= eps, "trial {t}: gap {g} > {eps}");
        }
    }
}

#[test]
fn strings_mode_keeps_few_runs() {
    for t in 0..20u64 {
        let mut rng = common::rng(22, t);
        let p = common::int(&mut rng, 8, 30);
        let part = GroupPartition::modulo(p, 4.min(p)).unwrap();
        let start = common::int(&mut rng, 0, p - 1);
        let support: Vec<usize> = (0..4).map(|k| (start + k) % p).collect();
        let pb = common::planted_problem(&mut rng, 40, p, &support, 0.05);
        let mode = EvolutionMode::Strings { max_strings: 2, wrap: true };
        let eps = 1e-6 * ls_loss(&pb, &vec![0.0; p]).unwrap();
        let out = active_set_solve(&pb, &part, &ActiveSetConfig::new(0.05, p / 2, eps, mode)).unwrap();
        let mut in_j = vec![false; p];
        for e in &out.trace {
            assert!(!in_j[e.added]);
            in_j[e.added] = true;
            let starts = (0..p).filter(|&i| in_j[i] && !in_j[(i + p - 1) % p]).count();
            let runs = if starts == 0 && in_j.iter().any(|&b| b) { 1 } else { starts };
            assert!(runs <= 2, "trial {t}: {runs} runs");
        }
        assert!(out.state.support.len() <= p / 2);
    }
}

#[test]
fn orthogonal_one_sparse() {
    // A = √n I, y = √n c e_k: the loss is ½‖x − c e_k‖² and the optimum is
    // c/(1 + μ) e_k because Ω(x)² = x_k² on a single coordinate.
    let (n, k, c, mu) = (6usize, 2usize, 1.5, 0.25);
    let a = DMatrix::identity(n, n) * (n as f64).sqrt();
    let mut y = vec![0.0; n];
    y[k] = c * (n as f64).sqrt();
    let pb = RegressionProblem::new(a, y).unwrap();
    let part = GroupPartition::modulo(n, 3).unwrap();
    let out = active_set_solve(&pb, &part, &ActiveSetConfig::new(mu, n, 1e-12, EvolutionMode::Plain)).unwrap();
    assert!(out.report.converged);
    assert_eq!(out.state.support, vec![k]);
    assert_eq!(out.trace.len(), 1);
    assert!((out.report.x_hat[k] - c / (1.0 + mu)).abs() < 1e-12);
}

#[test]
fn necessary_passes_at_the_exact_optimum() {
    for t in 0..30u64 {
        let mut rng = common::rng(23, t);
        let p = common::int(&mut rng, 4, 16);
        let n = common::int(&mut rng, p + 2, 40);
        let k = common::int(&mut rng, 1, 4.min(p));
        let part = common::random_partition(&mut rng, p, k);
        let pb = common::gaussian_problem(&mut rng, n, p);
        let lambda = 0.05 + 0.2 * rng.uniform();
        let cfg = SolverConfig { max_iter: 200_000, obj_tol: 1e-12, gap_tol: 1e-15 };
        let f = fista_solve(&pb, &part, lambda, &cfg).unwrap();
        let om = omega(&f.x_hat, &part).unwrap();
        if om == 0.0 {
            continue;
        }
        let mu = lambda / om;
        let state = common::restricted_state(&pb, &part, signed_support(&f.x_hat, 1e-9).support(), mu);
        let eps = 1e-6 * ls_loss(&pb, &vec![0.0; p]).unwrap();
        let zero_tol = (2.0 * mu * eps).sqrt();
        let nec = necessary_condition(&state, &part, EvolutionMode::Plain, mu, zero_tol).unwrap();
        assert!(nec.pass, "trial {t}: {:?}", nec.worst);
        assert!(sufficient_condition(&state, &part, mu, eps).unwrap().pass, "trial {t}");
    }
}

#[test]
fn matched_fista_and_active_set_certify_each_other() {
    for t in 0..20u64 {
        let mut rng = common::rng(24, t);
        let p = common::int(&mut rng, 4, 20);
        let n = common::int(&mut rng, p + 2, 40);
        let k = common::int(&mut rng, 1, 4.min(p));
        let part = common::random_partition(&mut rng, p, k);
        let support: Vec<usize> = (0..p).filter(|_| rng.uniform() < 0.4).collect();
        let pb = common::planted_problem(&mut rng, n, p, &support, 0.1);
        let mu = 0.02 + 0.2 * rng.uniform();
        let eps = 1e-9 * ls_loss(&pb, &vec![0.0; p]).unwrap();
        let out = active_set_solve(&pb, &part, &ActiveSetConfig::new(mu, p, eps, EvolutionMode::Plain)).unwrap();
        assert!(out.report.converged, "trial {t}");
        let xa = &out.report.x_hat;
        let lambda = mu * omega(xa, &part).unwrap();
        let cfg = SolverConfig { max_iter: 200_000, obj_tol: 1e-12, gap_tol: 1e-15 };
        let xf = fista_solve(&pb, &part, lambda, &cfg).unwrap().x_hat;
        let cert = |x: &[f64], scale: f64| {
            let u: Vec<f64> = ls_grad(&pb, x).unwrap().iter().map(|g| -g / scale).collect();
            subgradient_certificate(x, &u, &part, 1e-5).unwrap()
        };
        let a = cert(xa, lambda);
        assert!(a.holds, "trial {t}: active-set point fails the norm certificate by {}", a.max_violation);
        let b = cert(&xf, mu * omega(&xf, &part).unwrap());
        assert!(b.holds, "trial {t}: FISTA point fails the squared certificate by {}", b.max_violation);
    }
}

#[test]
fn sufficient_gap_matches_hand_computation() {
    // Unit design with n = 2, one group, μ = 1/2, J = {0}: the restricted
    // optimum is x₀ = y₀/2 = 1 and ∇L = (−1/2, −y₁/2). The gap is
    // (y₁²/4 − 1/4)₊ / (2μ): zero for y₁ = 1, 5/16 for y₁ = 3/2.
    let part = GroupPartition::single_group(2).unwrap();
    for (y1, expect) in [(1.0, 0.0), (1.5, 0.3125)] {
        let pb = RegressionProblem::new(DMatrix::identity(2, 2), vec![2.0, y1]).unwrap();
        let state = common::restricted_state(&pb, &part, vec![0], 0.5);
        assert!((state.x_hat[0] - 1.0).abs() < 1e-12, "{:?}", state.x_hat);
        let rep = sufficient_condition(&state, &part, 0.5, 1e-3).unwrap();
        assert!((rep.certified_gap - expect).abs() < 1e-12);
        assert!((common::squared_gap(&pb, &part, &state.x_hat, 0.5) - expect).abs() < 1e-12);
        assert_eq!(rep.pass, expect == 0.0);
    }
}
