use dqtopo_core::admm::Backend;
use dqtopo_core::closed_loop::{run_closed_loop, ClosedLoopConfig, PerturbationConfig, TerminationReason};
use dqtopo_core::graph::{path_topology, EdgeSpace, TopologyVector};

fn assert_deployable(cfg: &ClosedLoopConfig) -> dqtopo_core::closed_loop::ClosedLoopTrace {
    let trace = run_closed_loop(cfg).unwrap();
    assert_eq!(trace.initial_topology, path_topology(cfg.n).unwrap().to_bitstring());
    for (j, e) in trace.events.iter().enumerate() {
        let expected = cfg.t_first_update + j as f64 * cfg.update_period;
        assert!((e.t - expected).abs() < 1e-9, "event {j} at {}", e.t);
        assert!(e.lambda2 > 1e-9);
        assert!(e.degrees.iter().all(|&d| d <= cfg.gamma));
        assert_eq!(e.backend, cfg.binary_backend);
    }
    trace
}

#[test]
fn first_order_runs_deploy_only_valid_graphs() {
    for seed in [1, 4, 9] {
        let cfg = ClosedLoopConfig::standard(5, 1, Backend::Brute, seed);
        let trace = assert_deployable(&cfg);
        let last = trace.trajectory.last().unwrap();
        assert!((trace.termination.t_end - last.t).abs() < 1e-9);
        assert!(matches!(trace.termination.reason, TerminationReason::Tolerance | TerminationReason::TMax));
    }
}

#[test]
fn min_cost_topologies_are_hamiltonian_paths() {
    // with γ = 2 the cheapest connected graph has n − 1 edges and max degree
    // 2, so λ₂ is pinned at the path value 2 − 2cos(π/n)
    for n in [5, 6] {
        let cfg = ClosedLoopConfig::standard(n, 1, Backend::Brute, 2);
        let trace = assert_deployable(&cfg);
        let space = EdgeSpace::new(n).unwrap();
        let lam_path = 2.0 - 2.0 * (std::f64::consts::PI / n as f64).cos();
        for e in &trace.events {
            let t = TopologyVector::from_bitstring(&e.bits, &space).unwrap();
            assert_eq!(t.active_count(), n - 1);
            assert!((e.lambda2 - lam_path).abs() < 1e-9);
        }
    }
}

#[test]
fn second_order_keeps_mean_velocity_at_zero() {
    let cfg = ClosedLoopConfig::standard(6, 2, Backend::ExactQite, 3);
    let trace = assert_deployable(&cfg);
    for row in &trace.trajectory {
        let v = row.v.as_ref().unwrap();
        assert!(v.iter().sum::<f64>().abs() < 1e-9);
    }
    assert!(trace.termination.final_ev.is_some());
}

#[test]
fn perturbations_fire_after_a_stagnant_window() {
    let cfg = ClosedLoopConfig {
        perturbation: PerturbationConfig {
            enabled: true,
            window: 2.0,
            magnitude: 0.5,
        },
        ..ClosedLoopConfig::standard(5, 1, Backend::Brute, 6)
    };
    let trace = assert_deployable(&cfg);
    assert!(!trace.perturbations.is_empty());
    for w in trace.perturbations.windows(2) {
        assert!(w[1] - w[0] >= 2.0 - 1e-9);
    }
    assert!(trace.perturbations[0] >= 2.0 - 1e-9);
    assert_eq!(run_closed_loop(&cfg).unwrap(), trace);
}
