use pcsim_core::linalg::densify;
use pcsim_core::random::{noiseless, positive_vector};
use pcsim_core::solver::{resolve_b, solve, SolverConfig};
use pcsim_core::utility::{LogRate, SumLogSinr, Utility};
use pcsim_core::verify::{jacobian_check, kkt_residual, left_eigen_residual, perron_check};
use pcsim_core::NormalizedProblem;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn noiseless_instance(seed: u64) -> NormalizedProblem<f64> {
    let n = [2, 3, 5, 8, 12][seed as usize % 5];
    noiseless(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn optimum<U: Utility<f64>>(prob: &NormalizedProblem<f64>, u: &U) -> Vec<f64> {
    let out = solve(prob, u, &SolverConfig::for_problem(prob, u).unwrap().with_tol(1e-12)).unwrap();
    assert!(out.converged);
    out.p
}

#[test]
fn sinr_operator_has_unit_radius_with_p_as_eigenvector() {
    for seed in 0..50 {
        let prob = noiseless_instance(seed);
        let p: Vec<f64> = positive_vector(prob.dim(), &mut ChaCha8Rng::seed_from_u64(1000 + seed));
        let pc = perron_check(&prob, &p).unwrap();
        assert!((pc.rho - 1.0).abs() <= 1e-10, "seed {seed}: rho {}", pc.rho);
        assert!(pc.misalignment <= 1e-10, "seed {seed}: misalignment {:e}", pc.misalignment);

        // direct check: D(γ)V p = p
        let s = prob.interference_and_sinr(&p).unwrap();
        let v = densify(prob.v());
        let sp = v.mul_vec(&p);
        for i in 0..p.len() {
            assert!((s.gamma[i] * sp[i] - p[i]).abs() <= 1e-13 * p[i]);
        }
    }
}

#[test]
fn alpha_is_left_eigenvector_at_optimum() {
    let rate = LogRate::from_gap_db(7.0).unwrap();
    for seed in 0..20 {
        let prob = noiseless_instance(seed);
        let p = optimum(&prob, &SumLogSinr::new());
        assert!(left_eigen_residual(&prob, &SumLogSinr::new(), &p).unwrap() <= 1e-6, "seed {seed}");
        let p = optimum(&prob, &rate);
        assert!(left_eigen_residual(&prob, &rate, &p).unwrap() <= 1e-6, "seed {seed}");
    }
}

fn jacobian_suite<U: Utility<f64>>(u: &U) {
    for seed in 0..20 {
        let prob = noiseless_instance(seed);
        let p = optimum(&prob, u);
        let b = resolve_b(u, prob.dim()).unwrap();
        let r = jacobian_check(&p, &prob, u, &[0.1, 0.5, 1.0], b).unwrap();
        assert!(r.passed(), "{} seed {seed}: {:?}", u.name(), r.failures);
        assert!(r.sym_max_eig <= 1e-6);
        assert!(r.sym_min_eig >= r.sym_lower_bound - 1e-3);
        assert!(r.zero_mode_misalignment <= 1e-6);
        assert!(r.scale_line.iter().all(|&(_, e)| e <= 1e-4));
    }
}

#[test]
fn jacobian_structure_sum_log_sinr() {
    jacobian_suite(&SumLogSinr::new());
}

#[test]
fn jacobian_structure_log_rate() {
    jacobian_suite(&LogRate::from_gap_db(7.0).unwrap());
}

#[test]
fn noiseless_optimum_is_a_ray() {
    let u = LogRate::from_gap_db(7.0).unwrap();
    for seed in 0..10 {
        let prob = noiseless_instance(seed);
        let p = optimum(&prob, &u);
        let base = u.value(&prob.interference_and_sinr(&p).unwrap().gamma).unwrap();
        for c in [0.1, 10.0] {
            let pc: Vec<f64> = p.iter().map(|x| c * x).collect();
            let s = prob.interference_and_sinr(&pc).unwrap();
            assert!((u.value(&s.gamma).unwrap() - base).abs() <= 1e-12 * base.abs().max(1.0));
            let kkt = kkt_residual(&pc, &prob, &u).unwrap();
            assert!(kkt.relative <= 1e-8, "seed {seed} c {c}: {:e}", kkt.relative);
        }
    }
}
