use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::algorithms::AlgorithmOptions;
use crate::error::{Error, Result};
use crate::geometry::{Placement, ScenarioConfig, USER_HEIGHT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    LineSweep,
    Cdf,
    ElementSweep,
    Convergence,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::LineSweep => "line_sweep",
            ExperimentKind::Cdf => "cdf",
            ExperimentKind::ElementSweep => "element_sweep",
            ExperimentKind::Convergence => "convergence",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line_sweep" => Ok(ExperimentKind::LineSweep),
            "cdf" => Ok(ExperimentKind::Cdf),
            "element_sweep" => Ok(ExperimentKind::ElementSweep),
            "convergence" => Ok(ExperimentKind::Convergence),
            other => Err(Error::config(format!(
                "unknown experiment '{other}' (expected line_sweep, cdf, element_sweep or convergence)"
            ))),
        }
    }
}

/// One scheme to run, parsed from strings such as `alg6:2` or `random_phase`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgorithmSpec {
    Alg1,
    Alg2 { bits: u32 },
    Alg5,
    Alg6 { bits: u32 },
    /// `None` draws continuous phases.
    RandomPhase { bits: Option<u32> },
    NoRis,
}

impl AlgorithmSpec {
    /// Parses `name[:bits]`; `default_bits` fills in alg2/alg6 without a suffix.
    pub fn parse(s: &str, default_bits: u32) -> Result<Self> {
        let (name, bits) = match s.trim().split_once(':') {
            Some((n, b)) => {
                let b: u32 = b
                    .trim()
                    .parse()
                    .map_err(|_| Error::config(format!("bad bit count in algorithm '{s}'")))?;
                (n.trim(), Some(b))
            }
            None => (s.trim(), None),
        };
        if let Some(b) = bits {
            check_bits(b)?;
        }
        let spec = match name {
            "alg1" => AlgorithmSpec::Alg1,
            "alg2" => AlgorithmSpec::Alg2 { bits: bits.unwrap_or(default_bits) },
            "alg5" => AlgorithmSpec::Alg5,
            "alg6" => AlgorithmSpec::Alg6 { bits: bits.unwrap_or(default_bits) },
            "random_phase" => AlgorithmSpec::RandomPhase { bits },
            "no_ris" => AlgorithmSpec::NoRis,
            _ => return Err(Error::config(format!("unknown algorithm '{s}'"))),
        };
        if bits.is_some() && matches!(spec, AlgorithmSpec::Alg1 | AlgorithmSpec::Alg5 | AlgorithmSpec::NoRis) {
            return Err(Error::config(format!("algorithm '{name}' takes no bit setting")));
        }
        Ok(spec)
    }

    pub fn single_user_only(self) -> bool {
        matches!(self, AlgorithmSpec::Alg1 | AlgorithmSpec::Alg2 { .. })
    }
}

impl fmt::Display for AlgorithmSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmSpec::Alg1 => write!(f, "alg1"),
            AlgorithmSpec::Alg2 { bits } => write!(f, "alg2:{bits}"),
            AlgorithmSpec::Alg5 => write!(f, "alg5"),
            AlgorithmSpec::Alg6 { bits } => write!(f, "alg6:{bits}"),
            AlgorithmSpec::RandomPhase { bits: None } => write!(f, "random_phase"),
            AlgorithmSpec::RandomPhase { bits: Some(b) } => write!(f, "random_phase:{b}"),
            AlgorithmSpec::NoRis => write!(f, "no_ris"),
        }
    }
}

fn check_bits(b: u32) -> Result<()> {
    if b > 8 {
        return Err(Error::config(format!("bit setting {b} is out of range 0..=8")));
    }
    Ok(())
}

/// Sweep axes; only the one matching the experiment is used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// User x coordinates for `line_sweep`.
    pub x_positions: Vec<f64>,
    /// Elements per RIS for `element_sweep`.
    pub elements: Vec<usize>,
    /// y coordinate of the line the users move along.
    pub y: f64,
    pub height: f64,
    /// With several users they sit on a circle of this radius around the sweep point.
    pub radius: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            x_positions: (0..=24).map(|i| 5.0 * i as f64).collect(),
            elements: vec![6, 9, 12, 15, 18],
            y: 0.0,
            height: USER_HEIGHT,
            radius: 1.0,
        }
    }
}

/// Solver knobs exposed in the `[options]` table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub rand_count: usize,
    pub eps: f64,
    pub alt_iters: usize,
    pub zf_updates: usize,
    pub random_init: bool,
    pub sdr_seed: bool,
    pub ilp_node_limit: usize,
    pub ilp_max_lp_vars: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let o = AlgorithmOptions::default();
        SolverSettings {
            rand_count: o.rand_count,
            eps: o.eps,
            alt_iters: o.alt_iters,
            zf_updates: o.zf_updates,
            random_init: o.random_init,
            sdr_seed: o.sdr_seed,
            ilp_node_limit: o.bilp.node_limit,
            ilp_max_lp_vars: o.bilp.max_lp_vars,
        }
    }
}

impl SolverSettings {
    pub fn to_options(&self) -> AlgorithmOptions {
        let mut o = AlgorithmOptions {
            rand_count: self.rand_count,
            eps: self.eps,
            alt_iters: self.alt_iters,
            zf_updates: self.zf_updates,
            random_init: self.random_init,
            sdr_seed: self.sdr_seed,
            ..AlgorithmOptions::default()
        };
        o.bilp.node_limit = self.ilp_node_limit;
        o.bilp.max_lp_vars = self.ilp_max_lp_vars;
        o
    }
}

/// Contents of an experiment TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub trials: usize,
    pub seed: u64,
    /// Bits for `alg2`/`alg6` entries without an explicit `:b` suffix.
    pub bits: u32,
    /// Empty selects the defaults for the user count.
    pub algorithms: Vec<String>,
    pub out: PathBuf,
    pub sweep: SweepConfig,
    pub scenario: ScenarioConfig,
    pub options: SolverSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Cdf,
            trials: 100,
            seed: 1,
            bits: 2,
            algorithms: vec![],
            out: PathBuf::from("results"),
            sweep: SweepConfig::default(),
            scenario: ScenarioConfig::default(),
            options: SolverSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_kind(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            experiment: kind,
            ..Default::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| e.context(path.display().to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn num_users(&self) -> usize {
        self.scenario.users.count()
    }

    /// Algorithm list after defaults and `bits` are applied.
    pub fn algorithm_specs(&self) -> Result<Vec<AlgorithmSpec>> {
        check_bits(self.bits)?;
        let names: Vec<String> = if !self.algorithms.is_empty() {
            self.algorithms.clone()
        } else if self.num_users() == 1 {
            ["alg1", "alg2", "random_phase", "no_ris"].map(String::from).to_vec()
        } else {
            ["alg5", "alg6:2", "alg6:1", "random_phase", "no_ris"].map(String::from).to_vec()
        };
        let specs = names
            .iter()
            .map(|s| AlgorithmSpec::parse(s, self.bits))
            .collect::<Result<Vec<_>>>()?;
        let mut labels: Vec<String> = specs.iter().map(|s| s.to_string()).collect();
        labels.sort();
        labels.dedup();
        if labels.len() != specs.len() {
            return Err(Error::config("algorithm list contains duplicates"));
        }
        Ok(specs)
    }

    /// Sweep values: x positions, element counts, or a single unlabeled point.
    pub fn points(&self) -> Vec<SweepPoint> {
        match self.experiment {
            ExperimentKind::LineSweep => self.sweep.x_positions.iter().map(|&x| SweepPoint::X(x)).collect(),
            ExperimentKind::ElementSweep => self.sweep.elements.iter().map(|&n| SweepPoint::Elements(n)).collect(),
            ExperimentKind::Cdf | ExperimentKind::Convergence => vec![SweepPoint::Base],
        }
    }

    /// Scenario for one sweep point.
    pub fn scenario_at(&self, point: SweepPoint) -> ScenarioConfig {
        let mut sc = self.scenario.clone();
        match point {
            SweepPoint::X(x) => {
                let k = self.num_users();
                let center = [x, self.sweep.y, self.sweep.height];
                sc.users = if k == 1 {
                    Placement::Fixed { points: vec![center] }
                } else {
                    Placement::Circle {
                        count: k,
                        center,
                        radius: self.sweep.radius,
                    }
                };
            }
            SweepPoint::Elements(n) => {
                sc.elements = n;
                sc.ris_rows = None;
            }
            SweepPoint::Base => {}
        }
        sc
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<Vec<AlgorithmSpec>> {
        if self.trials < 1 {
            return Err(Error::config("trials must be at least 1"));
        }
        let specs = self.algorithm_specs()?;
        let k = self.num_users();
        if let Some(s) = specs.iter().find(|s| s.single_user_only() && k != 1) {
            return Err(Error::config(format!("{s} requires exactly one user, the scenario has {k}")));
        }
        let points = self.points();
        if points.is_empty() {
            return Err(Error::config(format!("{} needs at least one sweep value", self.experiment.name())));
        }
        if self.experiment == ExperimentKind::Convergence
            && !specs.iter().any(|s| matches!(s, AlgorithmSpec::Alg5 | AlgorithmSpec::Alg6 { .. }))
        {
            return Err(Error::config("convergence traces need alg5 or alg6"));
        }
        let o = &self.options;
        if o.rand_count == 0 || o.alt_iters == 0 || !(o.eps > 0.0) || o.ilp_node_limit == 0 {
            return Err(Error::config(
                "options: rand_count, alt_iters and ilp_node_limit must be positive and eps > 0",
            ));
        }
        for p in points {
            if let SweepPoint::X(x) = p {
                if !x.is_finite() {
                    return Err(Error::config("x positions must be finite"));
                }
            }
            self.scenario_at(p)
                .validate()
                .map_err(|e| Error::config(format!("scenario at {}: {e}", p.label())))?;
        }
        Ok(specs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SweepPoint {
    X(f64),
    Elements(usize),
    Base,
}

impl SweepPoint {
    pub fn label(self) -> String {
        match self {
            SweepPoint::X(x) => format!("x={x}"),
            SweepPoint::Elements(n) => format!("N={n}"),
            SweepPoint::Base => "base scenario".into(),
        }
    }

    /// Value written to the point column, if the experiment has one.
    pub fn value(self) -> Option<String> {
        match self {
            SweepPoint::X(x) => Some(x.to_string()),
            SweepPoint::Elements(n) => Some(n.to_string()),
            SweepPoint::Base => None,
        }
    }
}
