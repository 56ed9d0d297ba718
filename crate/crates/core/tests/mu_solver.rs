use hmf_core::heat4d::GammaContext;
use hmf_core::mu_dynamics::{
    eval_nonlocal_residual, eval_nonlocal_residual_scaled, refine_base, solve_mu, Forcing, Mu0, SolveOptions,
    SplitParameters, Trajectory,
};

fn solve_full(gamma: f64, lambda: f64, horizon: f64) -> (GammaContext, hmf_core::mu_dynamics::MuSolution) {
    let c = GammaContext::new(gamma).unwrap();
    let split = SplitParameters::default_for(&c);
    let opts = SolveOptions { horizon, forcing_scale: lambda, ..SolveOptions::default() };
    let base = Mu0::new(c).with_forcing_scale(lambda);
    let forcing = Forcing::full_problem(&c, &base, lambda);
    let sol = solve_mu(&c, &split, &opts, &base, &forcing, None).unwrap();
    (c, sol)
}

#[test]
fn critical_full_problem_reduces_residual() {
    let (c, sol) = solve_full(2.0, 1.0, 1e8);
    let base = Mu0::new(c);
    let mu = sol.corrected(base);
    let t = 1e6;
    let before = eval_nonlocal_residual(&c, &base, t).unwrap().abs();
    let after = eval_nonlocal_residual(&c, &mu, t).unwrap().abs();
    assert!(before >= 5.0 * after, "{before} vs {after}");
}

#[test]
fn regime_monotonicity_over_last_decade() {
    for (gamma, sign) in [(1.5, 1.0), (2.0, -1.0), (3.0, -1.0)] {
        let (c, sol) = solve_full(gamma, 1.0, 1e7);
        let mu = sol.corrected(Mu0::new(c));
        for k in 0..=20 {
            let t = 1e6 * 10f64.powf(k as f64 / 20.0);
            assert!(sign * mu.mu_dot(t) > 0.0, "γ={gamma} t={t}");
            assert!(mu.mu(t) > 0.0);
        }
        if gamma == 2.0 {
            // Settles near 2C₂ = 1/2 with a logarithmic approach.
            let end = mu.mu(1e7);
            assert!(end > 0.5 && end < 0.6, "{end}");
            let drift = (mu.mu(1e6) - end) / end;
            assert!(drift < 0.02, "{drift}");
        }
    }
}

#[test]
fn forcing_scale_rescales_critical_leading_mu() {
    let t = 1e7;
    let (c, one) = solve_full(2.0, 1.0, 1e8);
    let mu1 = one.corrected(Mu0::new(c)).mu(t);
    for lambda in [1.5, 2.0] {
        let (c, sol) = solve_full(2.0, lambda, 1e8);
        let traj = sol.corrected(Mu0::new(c).with_forcing_scale(lambda));
        let ratio = traj.mu(t) / mu1;
        assert!((ratio / lambda - 1.0).abs() < 0.10, "λ={lambda}: {ratio}");
        let res = eval_nonlocal_residual_scaled(&c, &traj, t, lambda).unwrap();
        assert!(res.abs() * t < 0.01 * 2.0 * lambda * c.c_gamma);
    }
}

#[test]
fn refined_base_keeps_improving() {
    let c = GammaContext::new(3.0).unwrap();
    let split = SplitParameters::default_for(&c);
    let opts = SolveOptions { horizon: 1e7, ..SolveOptions::default() };
    let once = refine_base(&c, &split, &opts, 1).unwrap();
    let twice = refine_base(&c, &split, &opts, 2).unwrap();
    let t = 1e5;
    let r0 = eval_nonlocal_residual(&c, &Mu0::new(c), t).unwrap().abs();
    let r1 = eval_nonlocal_residual(&c, &once, t).unwrap().abs();
    let r2 = eval_nonlocal_residual(&c, &twice, t).unwrap().abs();
    assert!(r1 < r0 && r2 <= r1 * 1.5, "{r0} {r1} {r2}");
}
