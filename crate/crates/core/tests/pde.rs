use hmf_core::heat4d::GammaContext;
use hmf_core::kernels::steady_q;
use hmf_core::pde::{
    build_grid, dirichlet_energy, extract_mu, sample_steady_state, simulate, stretch_for, Boundary, OriginCondition,
    OuterCondition, RadialGrid, RunConfig, Solver, State, StepperConfig,
};
use hmf_core::quad::Tolerance;
use std::f64::consts::PI;

fn graded(r_max: f64, n: usize, h_min: f64) -> RadialGrid {
    build_grid(r_max, n, stretch_for(r_max, n, h_min).unwrap()).unwrap()
}

#[test]
fn steady_state_energy_is_eight_pi() {
    let g = graded(2000.0, 4000, 2e-3);
    for mu in [0.5, 1.0, 2.0] {
        let e = dirichlet_energy(&sample_steady_state(&g, mu, 0.0), &g);
        assert!((e / (8.0 * PI) - 1.0).abs() < 1e-4, "μ={mu}: {e}");
    }
}

#[test]
fn unit_bubble_is_preserved() {
    // Small disc, fine uniform mesh: the scaling mode amplifies truncation error roughly like R².
    let r_max = 5.0;
    let g = build_grid(r_max, 5001, 0.0).unwrap();
    let b = Boundary { origin: OriginCondition::Pi, outer: OuterCondition::Fixed(steady_q(r_max)) };
    let cfg = StepperConfig { dt0: 1e-4, ..Default::default() };
    assert!(Solver::new(g.clone(), b, cfg, sample_steady_state(&build_grid(1.0, 3, 0.0).unwrap(), 1.0, 1.0)).is_err());
    let state = sample_steady_state(&g, 1.0, 1.0);
    let v0 = state.v.clone();
    let mut solver = Solver::new(g, b, cfg, state).unwrap();
    let e0 = solver.energy();
    for _ in 0..10_000 {
        solver.advance().unwrap();
    }
    let drift = solver.state.v.iter().zip(&v0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift < 1e-6, "{drift}");
    let est = extract_mu(&solver.state, &solver.grid).unwrap();
    assert!((est.grad - 1.0).abs() < 1e-6 && (est.fit - 1.0).abs() < 1e-6, "{est:?}");
    assert!(solver.energy() <= e0 * (1.0 + 1e-13));
}

#[test]
fn energy_is_non_increasing_with_free_outer_end() {
    let g = graded(60.0, 800, 5e-3);
    let b = Boundary { origin: OriginCondition::Pi, outer: OuterCondition::Neumann };
    // Bubble plus a bump: a genuinely dissipating configuration.
    let v = g.nodes.iter().map(|r| steady_q(r / 0.7) + 0.3 * (-(r - 3.0) * (r - 3.0)).exp()).collect();
    let mut solver = Solver::new(g, b, StepperConfig::default(), State { t: 1.0, v }).unwrap();
    let mut last = solver.energy();
    for _ in 0..300 {
        let rep = solver.advance().unwrap();
        assert!(rep.energy <= last * (1.0 + 1e-13), "{} > {last}", rep.energy);
        last = rep.energy;
    }
    assert!(last < 8.0 * PI * 1.5);
}

#[test]
fn small_data_follows_the_linear_heat_flow() {
    let gamma = 2.0;
    let eps = 1e-6;
    let ctx = GammaContext::new(gamma).unwrap();
    let r_max = 400.0;
    let g = graded(r_max, 2500, 2e-3);
    let v = g.nodes.iter().map(|r| eps * r * (1.0 + r * r).powf(-gamma / 2.0)).collect();
    let b = Boundary {
        origin: OriginCondition::Zero,
        outer: OuterCondition::HeatTail { gamma, t_origin: 0.0, amplitude: eps },
    };
    let cfg = StepperConfig { dt0: 1e-3, max_dt_fraction: 0.01, ..Default::default() };
    let mut solver = Solver::new(g, b, cfg, State { t: 0.0, v }).unwrap();
    let t_end = 50.0;
    while solver.state.t < t_end {
        solver.advance_to(t_end).unwrap();
    }
    let tol = Tolerance::relative(1e-11).with_abs(1e-300);
    let mut worst: f64 = 0.0;
    for (r, v) in solver.grid.nodes.iter().zip(&solver.state.v) {
        if *r < 0.5 || *r > 60.0 {
            continue;
        }
        let exact = eps * r * ctx.psi_star(*r, t_end, tol).unwrap();
        worst = worst.max(((v - exact) / exact).abs());
    }
    assert!(worst < 1e-3, "{worst}");
}

fn run_fixed(n: usize, dt: f64, init: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let r_max = 20.0;
    let g = build_grid(r_max, n, 2.0).unwrap();
    let b = Boundary { origin: OriginCondition::Pi, outer: OuterCondition::Fixed(init(r_max)) };
    let cfg = StepperConfig { dt0: dt, growth: 1.0 + 1e-12, max_dt_fraction: 0.05, ..Default::default() };
    let state = State { t: 1.0, v: g.nodes.iter().map(|r| init(*r)).collect() };
    let mut solver = Solver::new(g, b, cfg, state).unwrap();
    while solver.state.t < 1.5 - 1e-12 {
        solver.advance_to(1.5).unwrap();
    }
    (solver.grid.nodes.clone(), solver.state.v.clone())
}

fn transient(r: f64) -> f64 {
    steady_q(r) + 0.3 * r * r * (-r * r).exp()
}

/// Sup difference on the coarse nodes, which the refined grid shares.
fn coarse_diff(a: &(Vec<f64>, Vec<f64>), b: &(Vec<f64>, Vec<f64>), stride: usize) -> f64 {
    a.1.iter().enumerate().fold(0.0f64, |m, (i, v)| {
        assert!((a.0[i] - b.0[stride * i]).abs() < 1e-12);
        m.max((v - b.1[stride * i]).abs())
    })
}

#[test]
fn refinement_study_shows_second_order() {
    let runs: Vec<_> = [(101, 0.01), (201, 0.005), (401, 0.0025)].iter().map(|&(n, dt)| run_fixed(n, dt, transient)).collect();
    let (d1, d2) = (coarse_diff(&runs[0], &runs[1], 2), coarse_diff(&runs[1], &runs[2], 2));
    let order = (d1 / d2).log2();
    assert!(order >= 1.9, "{d1} {d2} {order}");
}

#[test]
fn spatial_order_at_fixed_step() {
    let runs: Vec<_> = [101, 201, 401].iter().map(|&n| run_fixed(n, 0.005, transient)).collect();
    let (d1, d2) = (coarse_diff(&runs[0], &runs[1], 2), coarse_diff(&runs[1], &runs[2], 2));
    let order = (d1 / d2).log2();
    assert!(order >= 1.9, "{d1} {d2} {order}");
}

#[test]
fn temporal_order_at_fixed_mesh() {
    let runs: Vec<_> = [0.02, 0.01, 0.005].iter().map(|&dt| run_fixed(201, dt, transient)).collect();
    let (d1, d2) = (coarse_diff(&runs[0], &runs[1], 1), coarse_diff(&runs[1], &runs[2], 1));
    let order = (d1 / d2).log2();
    assert!(order >= 1.9, "{d1} {d2} {order}");
}

#[test]
fn ordered_data_stay_ordered() {
    let lower = run_fixed(201, 0.01, transient);
    let upper = run_fixed(201, 0.01, |r| transient(r) + 0.05 * (-(r - 2.0) * (r - 2.0)).exp());
    assert!(lower.1.iter().zip(&upper.1).all(|(a, b)| *a <= *b + 1e-14));
}

#[test]
fn extraction_is_robust_to_noise_and_far_tails() {
    let g = build_grid(300.0, 4000, stretch_for(300.0, 4000, 2e-3).unwrap()).unwrap();
    let mut s = sample_steady_state(&g, 2.0, 1.0);
    // Deterministic pseudo-noise of size 1e-8.
    let mut x: u64 = 0x9e3779b97f4a7c15;
    for v in s.v.iter_mut().skip(1) {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        *v += 1e-8 * ((x >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0;
    }
    let e = extract_mu(&s, &g).unwrap();
    assert!((e.grad - 2.0).abs() < 1e-6 && (e.fit - 2.0).abs() < 1e-6, "{e:?}");

    let clean = sample_steady_state(&g, 0.5, 1.0);
    let base = extract_mu(&clean, &g).unwrap();
    let mut tail = clean.clone();
    // r^{1−γ}, γ = 3, switched on beyond the core.
    for (v, r) in tail.v.iter_mut().zip(&g.nodes) {
        if *r > 10.0 {
            *v += ((r - 10.0) / 10.0).min(1.0) * r.powf(-2.0);
        }
    }
    let e = extract_mu(&tail, &g).unwrap();
    assert!((e.grad / base.grad - 1.0).abs() < 1e-4 && (e.fit / base.fit - 1.0).abs() < 1e-4, "{e:?}");
}

#[test]
fn outer_peak_invalidates_extraction() {
    let g = build_grid(10.0, 200, 0.0).unwrap();
    let s = State { t: 1.0, v: g.nodes.iter().map(|r| PI - 0.01 * r * r).collect() };
    assert!(!extract_mu(&s, &g).unwrap().valid);
}

#[test]
fn simulation_samples_are_consistent() {
    let mut cfg = RunConfig::new(2.0, 100.0, 1e3);
    cfg.nodes = 600;
    cfg.samples_per_decade = 10;
    let rec = simulate(&cfg).unwrap();
    assert_eq!(rec.samples.len(), 11);
    assert!((rec.samples[10].t - 1e3).abs() < 1e-9);
    assert!(rec.samples.iter().all(|s| s.valid && s.mu_grad > 0.0 && s.mu_fit > 0.0));
    assert_eq!(rec.snapshots.len(), 2);
    assert!(rec.r_max >= 8.0 * 1e3f64.sqrt());
}
