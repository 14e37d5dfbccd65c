use pcsim_core::random::noisy_box;
use pcsim_core::solver::{solve, SolverConfig};
use pcsim_core::utility::{LogRate, Utility};
use pcsim_core::verify::{grid_search, kkt_residual, oracle_solve, OracleConfig};
use pcsim_core::{InitialPower, NormalizedProblem};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64) -> NormalizedProblem<f64> {
    let n = [2, 5, 10, 20][seed as usize % 4];
    noisy_box(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn rate() -> LogRate<f64> {
    LogRate::from_gap_db(7.0).unwrap()
}

#[test]
fn fixed_point_matches_projected_gradient() {
    let u = rate();
    for seed in 0..100 {
        let prob = instance(seed);
        let cfg = SolverConfig::for_problem(&prob, &u).unwrap();
        let out = solve(&prob, &u, &cfg).unwrap();
        let or = oracle_solve(&prob, &u, &OracleConfig::default()).unwrap();
        assert!(out.converged && or.converged, "seed {seed}");
        let rel = (out.utility - or.utility).abs() / or.utility.abs();
        assert!(rel <= 1e-6, "seed {seed}: rel {rel:e}");
        let kkt = kkt_residual(&out.p, &prob, &u).unwrap();
        assert!(kkt.relative <= 1e-8, "seed {seed}: kkt {:e}", kkt.relative);
    }
}

#[test]
fn random_start_reaches_same_optimum() {
    let u = rate();
    for seed in 0..20 {
        let prob = instance(seed);
        let base = SolverConfig::for_problem(&prob, &u).unwrap();
        let a = solve(&prob, &u, &base).unwrap();
        let b = solve(&prob, &u, &base.clone().with_p0(InitialPower::Random { seed: seed + 1000 })).unwrap();
        assert!((a.utility - b.utility).abs() <= 1e-8 * a.utility.abs(), "seed {seed}");
    }
}

#[test]
fn grid_search_never_beats_solver() {
    let u = rate();
    for seed in 0..5 {
        let prob = noisy_box::<f64, _>(5, &mut ChaCha8Rng::seed_from_u64(500 + seed)).unwrap();
        let out = solve(&prob, &u, &SolverConfig::for_problem(&prob, &u).unwrap()).unwrap();
        let (_, best) = grid_search(&prob, &u, 11).unwrap();
        assert!(best <= out.utility + 1e-9 * out.utility.abs(), "seed {seed}: grid {best} > {}", out.utility);
    }
}

#[test]
fn oracle_multipliers_are_consistent() {
    let u = rate();
    for seed in 0..20 {
        let prob = instance(seed);
        let or = oracle_solve(&prob, &u, &OracleConfig::default()).unwrap();
        let s = prob.interference_and_sinr(&or.p).unwrap();
        let g = u.gradient(&s.gamma).unwrap();
        for i in 0..prob.dim() {
            let lam = s.gamma[i] * g[i];
            assert!((or.lambda[i] - lam).abs() <= 1e-10 * lam, "seed {seed} link {i}");
            assert!(or.lambda[i] > 0.0);
            assert!(or.mu[i].is_finite());
        }
        // a positive box multiplier only where the upper bound is active
        let pmax = prob.p_max().unwrap();
        for i in 0..prob.dim() {
            if or.beta[i] > 1e-6 {
                assert!(or.p[i] >= pmax[i] * (1.0 - 1e-9), "seed {seed} link {i}");
            }
        }
    }
}

#[test]
fn single_precision_tracks_double() {
    let u64_ = rate();
    let u32_ = LogRate::<f32>::from_gap_db(7.0).unwrap();
    for seed in 0..10 {
        let n = [2, 5][seed as usize % 2];
        let p64 = noisy_box::<f64, _>(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let p32 = noisy_box::<f32, _>(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let a = solve(&p64, &u64_, &SolverConfig::for_problem(&p64, &u64_).unwrap()).unwrap();
        let cfg32 = SolverConfig::for_problem(&p32, &u32_).unwrap().with_tol(1e-5);
        let b = solve(&p32, &u32_, &cfg32).unwrap();
        let rel = (a.utility - b.utility as f64).abs() / a.utility.abs();
        assert!(rel <= 1e-3, "seed {seed}: rel {rel:e}");
    }
}
