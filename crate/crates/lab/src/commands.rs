//! The subcommands: each turns a validated config into tables and a summary.

use rayon::prelude::*;

use hmf_core::ansatz::{eval_error_v_star, eval_first_error_terms, AnsatzBundle, AnsatzOptions};
use hmf_core::constraints::{active_inequalities, feasible_parameters, slacks, verify_independently, Feasibility, Reading};
use hmf_core::heat4d::{GammaContext, VGammaForm};
use hmf_core::mu_dynamics::{check_log_integral, eval_nonlocal_residual, refine_base, Mu0, SolveOptions, SplitParameters, Trajectory};
use hmf_core::pde::{simulate, Outcome, RunRecord};
use hmf_core::quad::Tolerance;
use hmf_core::rates::{rate_table, trichotomy_verdict, Verdict, VerdictOptions};

use crate::config::ScenarioConfig;
use crate::error::LabError;
use crate::io::{gamma_tag, Cell, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    MuSolve,
    VerifyAnsatz,
    Constants,
    Constraints,
    CheckIntegrals,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::MuSolve => "mu-solve",
            Command::VerifyAnsatz => "verify-ansatz",
            Command::Constants => "constants",
            Command::Constraints => "constraints",
            Command::CheckIntegrals => "check-integrals",
        }
    }
}

/// One output file in the making.
#[derive(Debug, Clone)]
pub enum Artifact {
    Csv { name: String, table: Table },
    /// CSV and `.dat`, with optional gnuplot block column.
    CsvDat { name: String, table: Table, block: Option<usize> },
    Markdown { name: String, text: String },
}

/// Everything a subcommand produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    /// Facts derived during the run, echoed in the manifest.
    pub derived: Vec<(String, String)>,
    /// One line per headline result, printed to stdout.
    pub lines: Vec<String>,
}

pub fn execute(cfg: &ScenarioConfig, command: Command) -> Result<Report, LabError> {
    match command {
        Command::Simulate => run_simulate(cfg),
        Command::MuSolve => run_mu_solve(cfg),
        Command::VerifyAnsatz => run_verify_ansatz(cfg),
        Command::Constants => run_constants(cfg),
        Command::Constraints => run_constraints(cfg),
        Command::CheckIntegrals => run_check_integrals(cfg),
    }
}

fn context(gamma: f64) -> Result<GammaContext, LabError> {
    GammaContext::new(gamma).map_err(|e| LabError::Config(format!("gamma = {gamma}: {e}")))
}

fn min_max(v: impl Iterator<Item = f64>) -> (f64, f64) {
    v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

/// One simulated γ.
pub struct SimulationResult {
    pub gamma: f64,
    pub record: RunRecord,
    pub verdict: Option<Verdict>,
    /// Why no verdict could be formed.
    pub verdict_error: Option<String>,
    /// `μ_grad/μ_fit` over the last decade.
    pub grad_over_fit: (f64, f64),
    /// `μ_grad/μ₀` over the last decade.
    pub over_mu0: (f64, f64),
}

pub fn simulate_gamma(cfg: &ScenarioConfig, gamma: f64) -> Result<SimulationResult, LabError> {
    let ctx = context(gamma)?;
    let record = simulate(&cfg.run_config(gamma)).map_err(LabError::numerical(format!("simulate gamma = {gamma}")))?;
    let valid: Vec<_> = record.samples.iter().filter(|s| s.valid).collect();
    let ts: Vec<f64> = valid.iter().map(|s| s.t).collect();
    let ys: Vec<f64> = valid.iter().map(|s| s.grad_max).collect();
    let opts = VerdictOptions { power_tolerance: cfg.power_tolerance, band: cfg.band };
    let (verdict, verdict_error) = match trichotomy_verdict(gamma, &ts, &ys, opts) {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let t_end = record.samples.last().map_or(cfg.t0, |s| s.t);
    let last: Vec<_> = valid.iter().filter(|s| s.t >= t_end / 10.0 * (1.0 - 1e-12)).collect();
    let mu0 = Mu0::new(ctx);
    let grad_over_fit = min_max(last.iter().map(|s| s.mu_grad / s.mu_fit));
    let over_mu0 = min_max(last.iter().map(|s| s.mu_grad / mu0.mu(s.t)));
    Ok(SimulationResult { gamma, record, verdict, verdict_error, grad_over_fit, over_mu0 })
}

const TIMESERIES: [&str; 8] = ["t", "mu_est_grad", "mu_est_fit", "grad_max", "energy", "dt", "mu0", "valid"];

pub fn timeseries_table(gamma: f64, record: &RunRecord) -> Table {
    let mu0 = Mu0::new(GammaContext::new(gamma).expect("validated gamma"));
    let mut t = Table::new(&TIMESERIES);
    for s in &record.samples {
        t.push(vec![
            s.t.into(),
            s.mu_grad.into(),
            s.mu_fit.into(),
            s.grad_max.into(),
            s.energy.into(),
            s.dt.into(),
            mu0.mu(s.t).into(),
            s.valid.into(),
        ]);
    }
    t
}

/// Regime rows of the predicted behaviour; the `‖v_r‖_∞` column comes from the rate table.
pub fn regime_table_markdown() -> String {
    let hmf = rate_table()[0];
    let mut s = String::from("| regime | gamma | ||v_r||_inf | mu(t) |\n|---|---|---|---|\n");
    s += &format!(
        "| subcritical | 1 < gamma < 2 | {} | (1-gamma/2)^-1 (gamma-1)^-1 2 C_gamma t^(1-gamma/2) (ln t)^-1 |\n",
        hmf.subcritical
    );
    s += &format!("| critical | gamma = 2 | {} | 2 C_2 + (ln t)^-1 |\n", hmf.critical);
    s += &format!("| supercritical | gamma > 2 | {} | (ln t)^-1 |\n", hmf.supercritical);
    s
}

fn outcome_cells(o: &Outcome) -> (String, f64, f64) {
    match o {
        Outcome::Completed => ("completed".into(), f64::NAN, f64::NAN),
        Outcome::Collapsed { t, mu } => ("collapsed".into(), *t, *mu),
    }
}

fn run_simulate(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let gammas = cfg.gammas()?;
    let results: Vec<SimulationResult> =
        gammas.par_iter().map(|g| simulate_gamma(cfg, *g)).collect::<Result<_, _>>()?;
    let mut report = Report::default();
    let mut verdicts = Table::new(&[
        "gamma",
        "outcome",
        "collapse_t",
        "collapse_mu",
        "behaviour",
        "expected",
        "matches",
        "predicted_beta",
        "predicted_sigma",
        "free_beta",
        "free_sigma",
        "power_beta",
        "log1_amplitude",
        "log1_beta",
        "last_decade_spread",
        "grad_over_fit_min",
        "grad_over_fit_max",
        "mu_over_mu0_min",
        "mu_over_mu0_max",
    ]);
    let mut md = String::from("# Trichotomy verdict\n\nPredicted long-time behaviour:\n\n");
    md += &regime_table_markdown();
    md += "\nMeasured (fit of ||v_r||_inf over the final two decades):\n\n";
    md += "| gamma | outcome | behaviour | expected | fitted beta | fitted sigma | last-decade spread |\n|---|---|---|---|---|---|---|\n";
    for r in &results {
        let tag = gamma_tag(r.gamma);
        report.artifacts.push(Artifact::CsvDat {
            name: format!("timeseries_{tag}"),
            table: timeseries_table(r.gamma, &r.record),
            block: None,
        });
        let mut snaps = Table::new(&["t", "r", "v"]);
        for (t, nodes, values) in &r.record.snapshots {
            for (x, v) in nodes.iter().zip(values) {
                snaps.push(vec![(*t).into(), (*x).into(), (*v).into()]);
            }
        }
        report.artifacts.push(Artifact::CsvDat { name: format!("snapshots_{tag}"), table: snaps, block: Some(0) });
        let (outcome, ct, cm) = outcome_cells(&r.record.outcome);
        let nan = f64::NAN;
        let (behaviour, expected, matches, pb, ps, fb, fs, pw, la, lb, sp) = match &r.verdict {
            Some(v) => (
                v.behaviour.label().to_string(),
                v.expected.label().to_string(),
                v.matches(),
                v.predicted_beta,
                v.predicted_sigma,
                v.free.beta,
                v.free.sigma,
                v.pure_power.beta,
                v.log_one.amplitude,
                v.log_one.beta,
                v.last_decade_spread,
            ),
            None => {
                let exp = hmf_core::rates::expected_behaviour(r.gamma).label().to_string();
                let (pb, ps) = hmf_core::rates::predicted_exponents(r.gamma);
                ("insufficient-data".into(), exp, false, pb, ps, nan, nan, nan, nan, nan, nan)
            }
        };
        verdicts.push(vec![
            r.gamma.into(),
            outcome.as_str().into(),
            ct.into(),
            cm.into(),
            behaviour.as_str().into(),
            expected.as_str().into(),
            matches.into(),
            pb.into(),
            ps.into(),
            fb.into(),
            fs.into(),
            pw.into(),
            la.into(),
            lb.into(),
            sp.into(),
            r.grad_over_fit.0.into(),
            r.grad_over_fit.1.into(),
            r.over_mu0.0.into(),
            r.over_mu0.1.into(),
        ]);
        md += &format!("| {} | {outcome} | {behaviour} | {expected} | {fb:.4} | {fs:.4} | {sp:.4} |\n", r.gamma);
        report.lines.push(format!("gamma = {}: {outcome}, {behaviour} (expected {expected})", r.gamma));
        if let Some(e) = &r.verdict_error {
            report.lines.push(format!("gamma = {}: no verdict: {e}", r.gamma));
        }
        report.derived.extend([
            (format!("{tag}.r_max"), format!("{:?}", r.record.r_max)),
            (format!("{tag}.min_spacing"), format!("{:?}", r.record.min_spacing)),
            (format!("{tag}.under_resolved"), r.record.under_resolved.to_string()),
            (format!("{tag}.steps"), r.record.steps.to_string()),
            (format!("{tag}.rejections"), r.record.rejections.to_string()),
            (format!("{tag}.regrids"), r.record.regrids.to_string()),
        ]);
    }
    report.artifacts.push(Artifact::Csv { name: "verdict".into(), table: verdicts });
    report.artifacts.push(Artifact::Markdown { name: "summary.md".into(), text: md });
    Ok(report)
}

fn solve_options(cfg: &ScenarioConfig) -> SolveOptions {
    SolveOptions {
        t0: cfg.t0,
        horizon: cfg.mu_horizon,
        points_per_decade: cfg.mu_points_per_decade,
        relaxation: cfg.mu_relaxation,
        tolerance: cfg.mu_tolerance,
        max_iterations: cfg.mu_max_iterations,
        ..SolveOptions::default()
    }
}

fn logspace(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).ceil() as usize;
    (0..=n).map(|k| lo * (hi / lo).powf(k as f64 / n.max(1) as f64)).collect()
}

fn run_mu_solve(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let gammas = cfg.gammas()?;
    let opts = solve_options(cfg);
    let per_gamma: Vec<(f64, Table, Vec<Cell>)> = gammas
        .par_iter()
        .map(|&gamma| {
            let ctx = context(gamma)?;
            let what = format!("mu-solve gamma = {gamma}");
            let split = SplitParameters::default_for(&ctx);
            let traj = refine_base(&ctx, &split, &opts, cfg.mu_rounds).map_err(LabError::numerical(what.clone()))?;
            let base = Mu0::new(ctx);
            let mut t = Table::new(&["t", "mu0", "mu", "mu_dot", "residual_mu0", "residual"]);
            for s in logspace(cfg.t0, cfg.mu_horizon, cfg.mu_output_per_decade) {
                let r0 = eval_nonlocal_residual(&ctx, &base, s).map_err(LabError::numerical(what.clone()))?;
                let r1 = eval_nonlocal_residual(&ctx, &traj, s).map_err(LabError::numerical(what.clone()))?;
                t.push(vec![s.into(), base.mu(s).into(), traj.mu(s).into(), traj.mu_dot(s).into(), r0.into(), r1.into()]);
            }
            let tc = cfg.mu_check_time;
            let r0 = eval_nonlocal_residual(&ctx, &base, tc).map_err(LabError::numerical(what.clone()))?;
            let r1 = eval_nonlocal_residual(&ctx, &traj, tc).map_err(LabError::numerical(what))?;
            let row = vec![gamma.into(), cfg.mu_rounds.into(), tc.into(), r0.into(), r1.into(), (r0.abs() / r1.abs()).into()];
            Ok((gamma, t, row))
        })
        .collect::<Result<_, LabError>>()?;
    let mut report = Report::default();
    let mut summary = Table::new(&["gamma", "rounds", "check_t", "residual_mu0", "residual", "improvement"]);
    for (gamma, table, row) in per_gamma {
        if let Cell::Float(f) = row[5] {
            report.lines.push(format!("gamma = {gamma}: residual improved {f:.3e}x at t = {}", cfg.mu_check_time));
        }
        report.artifacts.push(Artifact::CsvDat { name: format!("mu_{}", gamma_tag(gamma)), table, block: None });
        summary.push(row);
    }
    report.artifacts.push(Artifact::Csv { name: "mu_solve".into(), table: summary });
    Ok(report)
}

/// The default slab: `r = 10⁻³√t · (8·10³)^{i/(n−1)}`.
pub fn slab_radii(t: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| 1e-3 * t.sqrt() * 8e3f64.powf(i as f64 / (n - 1) as f64)).collect()
}

/// Values below this are treated as exact zeros in the identity check.
pub const IDENTITY_FLOOR: f64 = 1e-14;

fn run_verify_ansatz(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let gammas = cfg.gammas()?;
    let results: Vec<(f64, Table, Vec<Cell>)> = gammas
        .par_iter()
        .map(|&gamma| {
            let ctx = context(gamma)?;
            let what = format!("verify-ansatz gamma = {gamma}");
            let tr = Mu0::new(ctx);
            let bundle = if cfg.slab_v1 {
                let traj = refine_base(&ctx, &SplitParameters::default_for(&ctx), &solve_options(cfg), cfg.mu_rounds)
                    .map_err(LabError::numerical(what.clone()))?;
                let opts = AnsatzOptions {
                    t0: cfg.t0,
                    duhamel_tol: Tolerance::relative(cfg.duhamel_tol).with_abs(1e-20),
                    psi_tol: Tolerance::relative(cfg.psi_tol).with_abs(1e-300),
                    ..AnsatzOptions::default()
                };
                Some(AnsatzBundle::new(ctx, traj, opts).map_err(LabError::numerical(what.clone()))?)
            } else {
                None
            };
            let mut cols = vec!["r", "t", "e_v_star", "e_grouped", "rel_diff", "e1", "e21", "e22", "trig"];
            if bundle.is_some() {
                cols.push("e_v1");
            }
            let mut table = Table::new(&cols);
            let (mut checked, mut worst) = (0usize, 0.0f64);
            let mut points = 0usize;
            for &t in &cfg.slab_times {
                for r in slab_radii(t, cfg.slab_points) {
                    let direct = eval_error_v_star(&tr, r, t).map_err(LabError::numerical(what.clone()))?;
                    let g = eval_first_error_terms(&tr, r, t).map_err(LabError::numerical(what.clone()))?;
                    let grouped = g.sum();
                    let rel = if direct.abs() > IDENTITY_FLOOR { (direct - grouped).abs() / direct.abs() } else { f64::NAN };
                    if rel.is_finite() {
                        checked += 1;
                        worst = worst.max(rel);
                    }
                    points += 1;
                    let mut row: Vec<Cell> =
                        vec![r.into(), t.into(), direct.into(), grouped.into(), rel.into(), g.e1.into(), g.e21.into(), g.e22.into(), g.trig.into()];
                    if let Some(b) = &bundle {
                        row.push(b.error_v1(r, t).map_err(LabError::numerical(what.clone()))?.into());
                    }
                    table.push(row);
                }
            }
            Ok((gamma, table, vec![gamma.into(), points.into(), checked.into(), worst.into()]))
        })
        .collect::<Result<_, LabError>>()?;
    let mut report = Report::default();
    let mut summary = Table::new(&["gamma", "points", "checked", "max_rel_diff"]);
    for (gamma, table, row) in results {
        if let Cell::Float(w) = row[3] {
            report.lines.push(format!("gamma = {gamma}: max relative difference {w:.3e}"));
        }
        report.artifacts.push(Artifact::Csv { name: format!("ansatz_{}", gamma_tag(gamma)), table });
        summary.push(row);
    }
    report.artifacts.push(Artifact::Csv { name: "ansatz_summary".into(), table: summary });
    Ok(report)
}

pub fn constants_table(gammas: &[f64]) -> Result<Table, LabError> {
    let mut t = Table::new(&["gamma", "regime", "c_gamma", "v_gamma_form"]);
    for &g in gammas {
        let ctx = context(g)?;
        let form = match ctx.v_form {
            VGammaForm::Power => "t^(-gamma/2)",
            VGammaForm::PowerLog => "t^(-2) ln(1+t)",
            VGammaForm::Quartic => "t^(-2)",
        };
        t.push(vec![g.into(), ctx.regime.label().into(), ctx.c_gamma.into(), form.into()]);
    }
    Ok(t)
}

fn run_constants(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let table = constants_table(cfg.gammas()?)?;
    let mut report = Report::default();
    for row in table.rows() {
        if let (Cell::Float(g), Cell::Float(c)) = (&row[0], &row[2]) {
            report.lines.push(format!("C_{g} = {c:.16e}"));
        }
    }
    report.artifacts.push(Artifact::Csv { name: "constants".into(), table });
    Ok(report)
}

fn reading_label(r: Reading) -> &'static str {
    match r {
        Reading::PerRegime => "per-regime",
        Reading::AllBlocks => "all-blocks",
    }
}

/// gamma, reading, outcome, independently recomputed slacks.
type ConstraintRun = (f64, Reading, Feasibility, Vec<(&'static str, f64)>);

fn run_constraints(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let gammas = cfg.gammas()?;
    let jobs: Vec<(f64, Reading)> = gammas.iter().flat_map(|g| cfg.reading.list().into_iter().map(move |r| (*g, r))).collect();
    let results: Vec<ConstraintRun> = jobs
        .par_iter()
        .map(|&(gamma, reading)| {
            context(gamma)?;
            let what = format!("constraints gamma = {gamma}");
            let f = feasible_parameters(gamma, reading, cfg.per_axis).map_err(LabError::numerical(what.clone()))?;
            let tuple = match &f {
                Feasibility::Witness { tuple, .. } => tuple,
                Feasibility::Infeasible { best, .. } => best,
            };
            let again = verify_independently(gamma, tuple, reading).map_err(LabError::numerical(what))?;
            Ok((gamma, reading, f, again))
        })
        .collect::<Result<_, LabError>>()?;
    let mut report = Report::default();
    let mut witnesses = Table::new(&[
        "gamma", "reading", "status", "omega", "a", "alpha", "nu", "kappa", "ell", "p", "delta", "min_slack", "tightest",
        "verified_min_slack",
    ]);
    for (gamma, reading, f, again) in results {
        let (status, x, min_slack, tightest) = match f {
            Feasibility::Witness { tuple, min_slack, tightest } => ("witness", tuple, min_slack, tightest),
            Feasibility::Infeasible { best, min_slack, tightest } => ("infeasible", best, min_slack, tightest),
        };
        let verified = again.iter().fold(f64::INFINITY, |m, (_, s)| m.min(*s));
        witnesses.push(vec![
            gamma.into(),
            reading_label(reading).into(),
            status.into(),
            x.omega.into(),
            x.a.into(),
            x.alpha.into(),
            x.nu.into(),
            x.kappa.into(),
            x.ell.into(),
            x.p.into(),
            x.delta.into(),
            min_slack.into(),
            tightest.into(),
            verified.into(),
        ]);
        let mut detail = Table::new(&["name", "inequality", "slack", "independent_slack"]);
        let texts = active_inequalities(gamma, reading);
        for ((q, (name, s)), (_, s2)) in texts.iter().zip(slacks(gamma, &x, reading)).zip(&again) {
            detail.push(vec![name.into(), q.text.into(), s.into(), (*s2).into()]);
        }
        report.lines.push(format!("gamma = {gamma} ({}): {status}, min slack {min_slack:.3e} at {tightest}", reading_label(reading)));
        report.artifacts.push(Artifact::Csv {
            name: format!("slacks_{}_{}", gamma_tag(gamma), reading_label(reading)),
            table: detail,
        });
    }
    report.artifacts.push(Artifact::Csv { name: "constraints".into(), table: witnesses });
    Ok(report)
}

fn run_check_integrals(cfg: &ScenarioConfig) -> Result<Report, LabError> {
    let mut table = Table::new(&["p0", "t", "t1", "value", "expected", "deviation", "bound"]);
    let mut report = Report::default();
    for &p0 in &cfg.p0 {
        for &t in &cfg.log_times {
            let t1 = cfg.log_t1_fraction * t;
            let v = check_log_integral(p0, t, t1).map_err(LabError::numerical(format!("log integral p0 = {p0}, t = {t}")))?;
            let expected = 2.0 * p0 - 1.0;
            let dev = (v - expected).abs();
            let bound = 5.0 / t.ln();
            report.lines.push(format!("p0 = {p0}, t = {t:e}: {v:.6} (deviation {dev:.3e}, bound {bound:.3e})"));
            table.push(vec![p0.into(), t.into(), t1.into(), v.into(), expected.into(), dev.into(), bound.into()]);
        }
    }
    report.artifacts.push(Artifact::Csv { name: "log_integrals".into(), table });
    Ok(report)
}
