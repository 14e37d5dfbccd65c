use pcsim_core::solver::{solve, SolverConfig};
use pcsim_core::utility::{LogRate, Utility};
use pcsim_core::{InitialPower, SolverMode};
use pcsim_netsim::relay::{median_candidates, relay_deployment, relay_links, RelayConfig, Routing};
use pcsim_netsim::{build_relay_problem, generate_topology, Channel, Scenario, TopologyConfig};

fn pc_config(theta: f64) -> SolverConfig<f64> {
    SolverConfig { check_log_concavity: false, ..SolverConfig::new(SolverMode::MinMaxClamped).with_theta(theta).with_p0(InitialPower::Max) }
}

#[test]
fn all_direct_reduces_to_the_plain_uplink() {
    let cfg = TopologyConfig::default();
    let rcfg = RelayConfig { routing: Routing::AllDirect, ..Default::default() };
    let rate = LogRate::from_gap_db(7.0).unwrap();
    for seed in 0..3 {
        let dep = generate_topology(&cfg, seed);
        let (dep_r, relayed) = relay_deployment(&dep, &cfg, seed, &rcfg).unwrap();
        assert!(relayed.iter().all(|&r| !r));
        let (prob, u) = build_relay_problem(&dep_r, &cfg, seed, &relayed, &rcfg).unwrap();
        let stacked = solve(&prob, &u, &pc_config(0.3)).unwrap();

        let sc = Scenario::generate(&cfg, seed).unwrap();
        let plain_prob = sc.uplink_problem(None).unwrap();
        let plain = solve(&plain_prob, &rate, &SolverConfig::for_problem(&plain_prob, &rate).unwrap()).unwrap();
        assert!(stacked.converged && plain.converged);

        // both slots repeat the plain optimum
        let n = dep.n_users();
        for i in 0..n {
            for p in [stacked.p[i], stacked.p[n + i]] {
                assert!((p - plain.p[i]).abs() <= 1e-6 * plain.p[i].max(1e-6), "seed {seed} user {i}");
            }
        }
        // per-user rate log2(1 + γ/Γ) in both cases
        let g = plain_prob.interference_and_sinr(&plain.p).unwrap().gamma;
        let expect: f64 = g.iter().map(|&x| (1.0 + x / rate.gap()).log2().ln()).sum();
        assert!((stacked.utility - expect).abs() <= 1e-6 * expect.abs(), "seed {seed}");
    }
}

#[test]
fn single_relayed_user_gets_decode_and_forward_rate() {
    let cfg = TopologyConfig { n_cells: 1, users_per_cell: 1, ..Default::default() };
    let rcfg = RelayConfig { routing: Routing::Explicit(vec![true]), ..Default::default() };
    let dep = generate_topology(&cfg, 5);
    let (dep_r, relayed) = relay_deployment(&dep, &cfg, 5, &rcfg).unwrap();
    let (prob, u) = build_relay_problem(&dep_r, &cfg, 5, &relayed, &rcfg).unwrap();
    let out = solve(&prob, &u, &pc_config(0.5)).unwrap();
    let g = prob.interference_and_sinr(&out.p).unwrap().gamma;
    let gap = 10f64.powf(0.7);
    let expect = 0.5 * (1.0 + g[0].min(g[1]) / gap).log2();
    assert_eq!(u.exact_rates(&g), vec![expect]);
    // the weaker hop runs at full power; the access hop only needs to stay
    // above it (its marginal value decays like e^(-k·Δγ), so it creeps)
    assert_eq!(out.p[1], cfg.p_max_w());
    assert!(g[0] >= g[1]);
}

#[test]
fn relayed_user_needs_relays() {
    let cfg = TopologyConfig::default();
    let dep = generate_topology(&cfg, 0);
    let ch = Channel::new(&dep, &cfg, 0).unwrap();
    let mut relayed = vec![false; dep.n_users()];
    relayed[3] = true;
    assert!(relay_links(&dep, &ch, &relayed, cfg.channel_access).is_err());
    assert!(build_relay_problem(&dep, &cfg, 0, &relayed, &RelayConfig::default()).is_err());
    let bad = RelayConfig { routing: Routing::Explicit(vec![true; 3]), ..Default::default() };
    assert!(relay_deployment(&dep, &cfg, 0, &bad).is_err());
}

#[test]
fn auto_routing_picks_from_weak_users() {
    let cfg = TopologyConfig::default();
    for seed in 0..5 {
        let dep = generate_topology(&cfg, seed);
        let cand = median_candidates(&dep, &cfg, seed).unwrap();
        assert_eq!(cand.iter().filter(|&&c| c).count(), dep.n_users() / 2);
        let (dep_r, relayed) = relay_deployment(&dep, &cfg, seed, &RelayConfig::default()).unwrap();
        assert!(relayed.iter().zip(&cand).all(|(&r, &c)| !r || c));
        assert!(relayed.iter().any(|&r| r), "seed {seed}");
        assert_eq!(dep_r.relays.as_ref().unwrap().len(), dep.n_cells());
    }
}

#[test]
fn relay_utility_couples_the_two_hops() {
    let cfg = TopologyConfig::default();
    let dep = generate_topology(&cfg, 1);
    let (dep_r, relayed) = relay_deployment(&dep, &cfg, 1, &RelayConfig::default()).unwrap();
    let (prob, u) = build_relay_problem(&dep_r, &cfg, 1, &relayed, &RelayConfig::default()).unwrap();
    let g = prob.interference_and_sinr(prob.p_max().unwrap()).unwrap().gamma;
    assert!(!u.hessian(&g).unwrap().is_diagonal());
    assert!(!u.is_separable());
}

#[test]
fn power_control_never_loses_to_max_power() {
    let cfg = TopologyConfig::default();
    let rcfg = RelayConfig::default();
    for seed in 0..5 {
        let dep = generate_topology(&cfg, seed);
        let (dep_r, relayed) = relay_deployment(&dep, &cfg, seed, &rcfg).unwrap();
        let (prob, u) = build_relay_problem(&dep_r, &cfg, seed, &relayed, &rcfg).unwrap();
        let at_max = u.value(&prob.interference_and_sinr(prob.p_max().unwrap()).unwrap().gamma).unwrap();
        let out = solve(&prob, &u, &pc_config(0.5)).unwrap();
        assert!(out.utility >= at_max - 1e-9, "seed {seed}");
    }
}
