//! Flat `key = value` scenario files with a typed schema.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use hmf_core::constraints::Reading;
use hmf_core::pde::{OuterKind, RunConfig, Scheme, StepperConfig};

use crate::error::LabError;

/// Typed value of one key.
pub trait Param: Sized {
    const KIND: &'static str;
    fn parse(text: &str) -> Result<Self, String>;
    fn echo(&self) -> String;
}

fn float(text: &str) -> Result<f64, String> {
    let v: f64 = text.parse().map_err(|_| format!("expected a number, got {text:?}"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a finite number, got {text:?}"))
    }
}

/// Shortest round-trip representation.
fn echo_float(v: f64) -> String {
    format!("{v:?}")
}

impl Param for f64 {
    const KIND: &'static str = "float";
    fn parse(text: &str) -> Result<Self, String> {
        float(text)
    }
    fn echo(&self) -> String {
        echo_float(*self)
    }
}

impl Param for usize {
    const KIND: &'static str = "integer";
    fn parse(text: &str) -> Result<Self, String> {
        text.parse().map_err(|_| format!("expected a non-negative integer, got {text:?}"))
    }
    fn echo(&self) -> String {
        self.to_string()
    }
}

impl Param for bool {
    const KIND: &'static str = "bool";
    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "true" => Ok(true),
            "false" => Ok(false),
            _ => Err(format!("expected true or false, got {text:?}")),
        }
    }
    fn echo(&self) -> String {
        self.to_string()
    }
}

impl Param for Vec<f64> {
    const KIND: &'static str = "float list";
    /// An empty value is the empty list.
    fn parse(text: &str) -> Result<Self, String> {
        if text.trim().is_empty() {
            return Ok(Vec::new());
        }
        text.split(',').map(|s| float(s.trim())).collect()
    }
    fn echo(&self) -> String {
        self.iter().map(|v| echo_float(*v)).collect::<Vec<_>>().join(", ")
    }
}

/// `auto` leaves the choice to the solver.
impl Param for Option<f64> {
    const KIND: &'static str = "float or auto";
    fn parse(text: &str) -> Result<Self, String> {
        if text == "auto" {
            Ok(None)
        } else {
            float(text).map(Some)
        }
    }
    fn echo(&self) -> String {
        self.map_or_else(|| "auto".into(), echo_float)
    }
}

impl Param for Scheme {
    const KIND: &'static str = "bdf2-newton | linearly-implicit";
    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "bdf2-newton" => Ok(Scheme::Bdf2Newton),
            "linearly-implicit" => Ok(Scheme::LinearlyImplicit),
            _ => Err(format!("unknown scheme {text:?}")),
        }
    }
    fn echo(&self) -> String {
        match self {
            Scheme::Bdf2Newton => "bdf2-newton",
            Scheme::LinearlyImplicit => "linearly-implicit",
        }
        .into()
    }
}

impl Param for OuterKind {
    const KIND: &'static str = "heat-tail | neumann";
    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "heat-tail" => Ok(OuterKind::HeatTail),
            "neumann" => Ok(OuterKind::Neumann),
            _ => Err(format!("unknown outer condition {text:?}")),
        }
    }
    fn echo(&self) -> String {
        match self {
            OuterKind::HeatTail => "heat-tail",
            OuterKind::Neumann => "neumann",
        }
        .into()
    }
}

/// Which brace reading(s) of the inner-problem system to search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readings {
    PerRegime,
    AllBlocks,
    Both,
}

impl Readings {
    pub fn list(self) -> Vec<Reading> {
        match self {
            Readings::PerRegime => vec![Reading::PerRegime],
            Readings::AllBlocks => vec![Reading::AllBlocks],
            Readings::Both => vec![Reading::PerRegime, Reading::AllBlocks],
        }
    }
}

impl Param for Readings {
    const KIND: &'static str = "per-regime | all-blocks | both";
    fn parse(text: &str) -> Result<Self, String> {
        match text {
            "per-regime" => Ok(Readings::PerRegime),
            "all-blocks" => Ok(Readings::AllBlocks),
            "both" => Ok(Readings::Both),
            _ => Err(format!("unknown reading {text:?}")),
        }
    }
    fn echo(&self) -> String {
        match self {
            Readings::PerRegime => "per-regime",
            Readings::AllBlocks => "all-blocks",
            Readings::Both => "both",
        }
        .into()
    }
}

macro_rules! schema {
    ($( $(#[doc = $doc:literal])* $field:ident : $ty:ty = $default:expr ;)*) => {
        /// Every tunable of every subcommand. `gamma` has no default.
        #[derive(Debug, Clone, PartialEq)]
        pub struct ScenarioConfig {
            pub gamma: Option<Vec<f64>>,
            $( $(#[doc = $doc])* pub $field: $ty, )*
        }

        impl Default for ScenarioConfig {
            fn default() -> Self {
                Self { gamma: None, $( $field: $default, )* }
            }
        }

        impl ScenarioConfig {
            /// `(key, kind)` for every key, in manifest order.
            pub fn schema() -> Vec<(&'static str, &'static str)> {
                let mut out = vec![("gamma", <Vec<f64> as Param>::KIND)];
                $( out.push((stringify!($field), <$ty as Param>::KIND)); )*
                out
            }

            fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
                match key {
                    "gamma" => self.gamma = Some(Param::parse(value)?),
                    $( stringify!($field) => self.$field = Param::parse(value)?, )*
                    _ => return Err("unknown key".into()),
                }
                Ok(())
            }

            /// Resolved `(key, value)` pairs.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                let mut out = vec![("gamma", self.gamma.as_ref().map_or_else(|| "unset".into(), Param::echo))];
                $( out.push((stringify!($field), self.$field.echo())); )*
                out
            }
        }
    };
}

schema! {
    /// Initial time.
    t0: f64 = 100.0;
    /// Final time of simulations and of the scale solver.
    horizon: f64 = 1e6;
    nodes: usize = 2000;
    /// Outer radius; `10 sqrt(horizon)` when auto.
    r_max: Option<f64> = None;
    /// Grading parameter; resolves the smallest anticipated scale when auto.
    stretch: Option<f64> = None;
    scheme: Scheme = Scheme::Bdf2Newton;
    dt0: f64 = 1e-3;
    growth: f64 = 1.05;
    max_dt_fraction: f64 = 0.05;
    newton_tol: f64 = 1e-12;
    max_newton: usize = 20;
    max_rejections: usize = 10;
    energy_slack: f64 = 1e-13;
    outer: OuterKind = OuterKind::HeatTail;
    tail_amplitude: f64 = 1.0;
    /// Initial bubble scale; `mu0(t0)` when auto.
    mu_init: Option<f64> = None;
    /// Bubble cutoff radius; `sqrt(t0)` when auto.
    r0: Option<f64> = None;
    samples_per_decade: usize = 40;
    max_regrids: usize = 3;
    power_tolerance: f64 = 0.05;
    band: f64 = 0.25;
    mu_points_per_decade: usize = 64;
    mu_relaxation: f64 = 0.5;
    mu_tolerance: f64 = 1e-10;
    mu_max_iterations: usize = 200;
    mu_rounds: usize = 1;
    mu_output_per_decade: usize = 8;
    /// Horizon of the scale solver, which needs room past the check time.
    mu_horizon: f64 = 1e8;
    /// Time at which the residual improvement is reported.
    mu_check_time: f64 = 1e6;
    slab_points: usize = 200;
    slab_times: Vec<f64> = vec![1e3, 1e4, 1e5];
    /// Also assemble `v1` and its error (slow).
    slab_v1: bool = false;
    duhamel_tol: f64 = 1e-8;
    psi_tol: f64 = 1e-11;
    reading: Readings = Readings::Both;
    per_axis: usize = 20;
    p0: Vec<f64> = vec![0.75];
    log_times: Vec<f64> = vec![1e8, 1e10, 1e12];
    /// `t1 = log_t1_fraction * t`.
    log_t1_fraction: f64 = 0.5;
}

/// Parses `key = value` lines; `#` starts a comment. Keys may appear once.
pub fn parse(text: &str) -> Result<ScenarioConfig, LabError> {
    let mut cfg = ScenarioConfig::default();
    let mut seen = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let line_no = no + 1;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| LabError::Config(format!("line {line_no}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        if let Some(prev) = seen.insert(key.to_string(), line_no) {
            return Err(LabError::Config(format!("line {line_no}: {key} already set on line {prev}")));
        }
        cfg.set(key, value).map_err(|e| LabError::Config(format!("line {line_no}: {key}: {e}")))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

impl ScenarioConfig {
    /// Replaces the gamma list (the `--gamma` flag).
    pub fn override_gamma(&mut self, text: &str) -> Result<(), LabError> {
        self.set("gamma", text).map_err(|e| LabError::Config(format!("--gamma: {e}")))?;
        self.validate()
    }

    pub fn gammas(&self) -> Result<&[f64], LabError> {
        match &self.gamma {
            Some(g) if !g.is_empty() => Ok(g),
            _ => Err(LabError::Config("gamma is required (set it in the config or pass --gamma)".into())),
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |what: &str| Err(LabError::Config(what.to_string()));
        if let Some(g) = &self.gamma {
            if g.iter().any(|g| !(*g > 1.0)) {
                return bad("every gamma must exceed 1");
            }
        }
        if !(self.t0 > 0.0) || !(self.horizon > self.t0) {
            return bad("need 0 < t0 < horizon");
        }
        if !(self.mu_horizon > self.t0) || !(self.mu_check_time > self.t0 && self.mu_check_time <= self.mu_horizon) {
            return bad("need t0 < mu_check_time <= mu_horizon");
        }
        if self.slab_points < 2 || self.slab_times.iter().any(|t| !(*t > 0.0)) {
            return bad("slab needs >= 2 points and positive times");
        }
        if self.samples_per_decade == 0 || self.mu_output_per_decade == 0 || self.per_axis < 2 {
            return bad("sampling densities must be positive (per_axis >= 2)");
        }
        if !(self.log_t1_fraction > 0.0 && self.log_t1_fraction < 1.0) {
            return bad("log_t1_fraction must lie in (0, 1)");
        }
        if !(self.duhamel_tol > 0.0) || !(self.psi_tol > 0.0) {
            return bad("quadrature tolerances must be positive");
        }
        if !(self.band > 0.0) || !(self.power_tolerance > 0.0) {
            return bad("verdict thresholds must be positive");
        }
        self.run_config(2.0).validate().map_err(|e| LabError::Config(format!("simulation settings: {e}")))?;
        Ok(())
    }

    pub fn stepper(&self) -> StepperConfig {
        StepperConfig {
            scheme: self.scheme,
            dt0: self.dt0,
            growth: self.growth,
            newton_tol: self.newton_tol,
            max_newton: self.max_newton,
            max_dt_fraction: self.max_dt_fraction,
            max_rejections: self.max_rejections,
            energy_slack: self.energy_slack,
        }
    }

    pub fn run_config(&self, gamma: f64) -> RunConfig {
        RunConfig {
            gamma,
            t0: self.t0,
            horizon: self.horizon,
            mu_init: self.mu_init,
            r0: self.r0,
            tail_amplitude: self.tail_amplitude,
            nodes: self.nodes,
            r_max: self.r_max,
            stretch: self.stretch,
            stepper: self.stepper(),
            outer: self.outer,
            samples_per_decade: self.samples_per_decade,
            max_regrids: self.max_regrids,
        }
    }

    /// The resolved configuration in the input format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ScenarioConfig { gamma: Some(vec![1.5, 2.0]), ..Default::default() };
        let again = parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse("# scenario\n\ngamma = 2, 3  # two runs\nnodes=800\nr_max = auto\n").unwrap();
        assert_eq!(cfg.gamma, Some(vec![2.0, 3.0]));
        assert_eq!(cfg.nodes, 800);
        assert_eq!(cfg.r_max, None);
    }

    #[test]
    fn schema_errors_name_the_line() {
        for (text, needle) in [
            ("gamma = 2\nbogus = 1", "line 2: bogus"),
            ("gamma = two", "line 1: gamma"),
            ("gamma = 2\ngamma = 3", "already set"),
            ("nodes = -4", "nodes"),
            ("gamma = 0.5", "exceed 1"),
            ("t0 = 100\nhorizon = 10", "t0 < horizon"),
            ("gamma 2", "key = value"),
            ("growth = 1.5", "simulation settings"),
        ] {
            let e = parse(text).unwrap_err().to_string();
            assert!(e.contains(needle), "{text:?}: {e}");
        }
    }

    #[test]
    fn missing_gamma_is_reported_on_use() {
        let cfg = parse("nodes = 100").unwrap();
        assert!(cfg.gammas().is_err());
    }

    #[test]
    fn schema_lists_every_key_once() {
        let keys: Vec<_> = ScenarioConfig::schema().into_iter().map(|(k, _)| k).collect();
        let entries: Vec<_> = ScenarioConfig::default().entries().into_iter().map(|(k, _)| k).collect();
        assert_eq!(keys, entries);
        let mut sorted = keys.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), keys.len());
    }
}
