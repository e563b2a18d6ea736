use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::control::TerminalMode;
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::predictors::GdOptions;
use crate::system::LtiModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    #[serde(alias = "fig1")]
    Fig1Bias,
    #[serde(alias = "fig2")]
    Fig2WellspecRate,
    #[serde(alias = "fig3")]
    Fig3MisspecBias,
    #[serde(alias = "fig4")]
    Fig4MultistepLoss,
    #[serde(alias = "fig5")]
    Fig5Control,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Fig1Bias,
        Experiment::Fig2WellspecRate,
        Experiment::Fig3MisspecBias,
        Experiment::Fig4MultistepLoss,
        Experiment::Fig5Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Fig1Bias => "fig1_bias",
            Experiment::Fig2WellspecRate => "fig2_wellspec_rate",
            Experiment::Fig3MisspecBias => "fig3_misspec_bias",
            Experiment::Fig4MultistepLoss => "fig4_multistep_loss",
            Experiment::Fig5Control => "fig5_control",
        }
    }

    pub fn short(self) -> &'static str {
        &self.as_str()[..4]
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s || e.short() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// A model with every matrix optional. Missing `A` means the experiment
/// family `[[a, 1], [0, 0.75]]`; an empty `B` means no inputs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemTemplate {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B_w", default, skip_serializing_if = "Option::is_none")]
    pub b_w: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C", default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "D_v", default, skip_serializing_if = "Option::is_none")]
    pub d_v: Option<Vec<Vec<f64>>>,
}

fn rows(v: &[&[f64]]) -> Vec<Vec<f64>> {
    v.iter().map(|r| r.to_vec()).collect()
}

impl SystemTemplate {
    /// Fully observed, `B = [0, 1]ᵀ`, `B_w = I`.
    pub fn well() -> Self {
        SystemTemplate {
            a: None,
            b: Some(rows(&[&[0.0], &[1.0]])),
            b_w: Some(rows(&[&[1.0, 0.0], &[0.0, 1.0]])),
            c: Some(rows(&[&[1.0, 0.0], &[0.0, 1.0]])),
            d_v: Some(rows(&[&[0.0, 0.0], &[0.0, 0.0]])),
        }
    }

    /// `B = 0`, `C = [1, 0]`, unit sensor noise.
    pub fn mis() -> Self {
        SystemTemplate {
            b: Some(vec![]),
            c: Some(rows(&[&[1.0, 0.0]])),
            d_v: Some(rows(&[&[1.0]])),
            ..Self::well()
        }
    }

    pub fn example1() -> Self {
        SystemTemplate { a: Some(rows(&[&[0.9, 1.0], &[0.0, 0.9]])), ..Self::mis() }
    }

    /// Fields set in `patch` replace those in `self`.
    pub fn merged(&self, patch: &SystemTemplate) -> SystemTemplate {
        SystemTemplate {
            a: patch.a.clone().or_else(|| self.a.clone()),
            b: patch.b.clone().or_else(|| self.b.clone()),
            b_w: patch.b_w.clone().or_else(|| self.b_w.clone()),
            c: patch.c.clone().or_else(|| self.c.clone()),
            d_v: patch.d_v.clone().or_else(|| self.d_v.clone()),
        }
    }

    /// `a` labels the record when `A` is given explicitly.
    pub fn fixed_a(&self) -> Option<f64> {
        self.a.as_ref().and_then(|r| r.first()).and_then(|r| r.first()).copied()
    }

    pub fn build(&self, a: f64) -> Result<LtiModel> {
        fn need<'a>(f: &'a Option<Vec<Vec<f64>>>, name: &str) -> Result<&'a Vec<Vec<f64>>> {
            f.as_ref().ok_or_else(|| Error::Config(format!("system is missing `{name}`")))
        }
        let am = match &self.a {
            Some(r) => Matrix::from_rows(r)?,
            None => LtiModel::experiment_a(a),
        };
        let b = match &self.b {
            Some(r) if r.iter().any(|row| !row.is_empty()) => Some(Matrix::from_rows(r)?),
            _ => None,
        };
        LtiModel::new(
            am,
            b,
            Matrix::from_rows(need(&self.b_w, "B_w")?)?,
            Matrix::from_rows(need(&self.c, "C")?)?,
            Matrix::from_rows(need(&self.d_v, "D_v")?)?,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub predictor_horizon: usize,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GdPatch {
    step: Option<f64>,
    iters: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MpcPatch {
    horizon: Option<usize>,
    predictor_horizon: Option<usize>,
}

/// On-disk config. Every key is optional and overrides the per-experiment
/// default. `system` patches every model the experiment uses.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<Experiment>,
    a_grid: Option<Vec<f64>>,
    system: Option<SystemTemplate>,
    well_system: Option<SystemTemplate>,
    mis_system: Option<SystemTemplate>,
    horizons: Option<Vec<usize>>,
    n_grid: Option<Vec<usize>>,
    reps: Option<usize>,
    base_seed: Option<u64>,
    gd: Option<GdPatch>,
    mpc: Option<MpcPatch>,
    empirical_eval: Option<bool>,
    eval_len: Option<usize>,
    ridge: Option<f64>,
    terminal_mode: Option<TerminalMode>,
    threads: Option<usize>,
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub a_grid: Vec<f64>,
    pub well_system: SystemTemplate,
    pub mis_system: SystemTemplate,
    pub horizons: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub gd: GdOptions,
    pub mpc: MpcConfig,
    /// Score each fit on a fresh rollout instead of the exact loss.
    pub empirical_eval: bool,
    pub eval_len: usize,
    pub ridge: f64,
    pub terminal_mode: TerminalMode,
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
}

/// `count` points between `lo` and `hi`, log-spaced and rounded, duplicates
/// removed.
pub fn log_grid(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let (l, h) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<usize> = (0..count)
        .map(|i| {
            let t = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
            (l + t * (h - l)).exp().round() as usize
        })
        .collect();
    out.dedup();
    out
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = ExperimentConfig {
            experiment,
            a_grid: vec![0.5, 0.75, 0.9],
            well_system: SystemTemplate::well(),
            mis_system: SystemTemplate::mis(),
            horizons: vec![5],
            n_grid: log_grid(20, 3000, 25),
            reps: 1000,
            base_seed: 0,
            gd: GdOptions::default(),
            mpc: MpcConfig { horizon: 20, predictor_horizon: 20 },
            empirical_eval: false,
            eval_len: 100_000,
            ridge: 0.0,
            terminal_mode: TerminalMode::Strict,
            threads: None,
            output: None,
        };
        match experiment {
            Experiment::Fig1Bias => ExperimentConfig {
                a_grid: vec![0.9],
                mis_system: SystemTemplate::example1(),
                horizons: (1..=30).collect(),
                n_grid: vec![],
                reps: 1,
                ..base
            },
            Experiment::Fig2WellspecRate => ExperimentConfig { reps: 2000, ..base },
            Experiment::Fig3MisspecBias => base,
            Experiment::Fig4MultistepLoss => ExperimentConfig {
                a_grid: vec![0.9],
                horizons: vec![10],
                n_grid: vec![50, 100, 200, 400, 800, 1600, 3000],
                reps: 100,
                ..base
            },
            Experiment::Fig5Control => ExperimentConfig {
                a_grid: vec![0.9],
                // B = 0 leaves nothing to control, so the partially observed
                // plant keeps the input channel of the observed one
                mis_system: SystemTemplate { b: Some(rows(&[&[0.0], &[1.0]])), ..SystemTemplate::mis() },
                horizons: vec![20],
                n_grid: vec![100, 150, 200, 300, 500, 1000, 2000, 3000],
                ..base
            },
        }
    }

    /// Parse a JSON config. `experiment` picks the defaults when the file
    /// does not name one; both must agree when both are given.
    pub fn from_json(text: &str, experiment: Option<Experiment>) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text)?;
        let exp = match (file.experiment, experiment) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config is for {a}, command is {b}")));
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("config does not name an experiment".into())),
        };
        let mut cfg = Self::defaults(exp);
        cfg.apply(file);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, f: ConfigFile) {
        if let Some(v) = f.a_grid {
            self.a_grid = v;
        }
        if let Some(s) = &f.system {
            self.well_system = self.well_system.merged(s);
            self.mis_system = self.mis_system.merged(s);
        }
        if let Some(s) = &f.well_system {
            self.well_system = self.well_system.merged(s);
        }
        if let Some(s) = &f.mis_system {
            self.mis_system = self.mis_system.merged(s);
        }
        if let Some(v) = f.horizons {
            self.horizons = v;
        }
        if let Some(v) = f.n_grid {
            self.n_grid = v;
        }
        if let Some(v) = f.reps {
            self.reps = v;
        }
        if let Some(v) = f.base_seed {
            self.base_seed = v;
        }
        if let Some(g) = f.gd {
            self.gd.step = g.step.unwrap_or(self.gd.step);
            self.gd.iters = g.iters.unwrap_or(self.gd.iters);
        }
        if let Some(m) = f.mpc {
            self.mpc.horizon = m.horizon.unwrap_or(self.mpc.horizon);
            self.mpc.predictor_horizon = m.predictor_horizon.unwrap_or(self.mpc.predictor_horizon);
        }
        if let Some(v) = f.empirical_eval {
            self.empirical_eval = v;
        }
        if let Some(v) = f.eval_len {
            self.eval_len = v;
        }
        if let Some(v) = f.ridge {
            self.ridge = v;
        }
        if let Some(v) = f.terminal_mode {
            self.terminal_mode = v;
        }
        if f.threads.is_some() {
            self.threads = f.threads;
        }
        if f.output.is_some() {
            self.output = f.output;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return bad("horizons must be a non-empty list of positive integers");
        }
        if self.a_grid.is_empty() || self.a_grid.iter().any(|a| !a.is_finite()) {
            return bad("a_grid must be a non-empty list of finite numbers");
        }
        let needs_n = self.experiment != Experiment::Fig1Bias;
        if needs_n && self.n_grid.is_empty() {
            return bad("n_grid must not be empty");
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n_grid must be strictly increasing");
        }
        if !(self.ridge >= 0.0) {
            return bad("ridge must be non-negative");
        }
        if !(self.gd.step > 0.0) {
            return bad("gd.step must be positive");
        }
        if self.mpc.horizon == 0 || self.mpc.horizon > self.mpc.predictor_horizon {
            return bad("mpc.horizon must be in 1..=mpc.predictor_horizon");
        }
        Ok(())
    }

    /// The `a` values actually swept: an explicit `A` pins a single value.
    pub fn effective_a_grid(&self, template: &SystemTemplate) -> Vec<f64> {
        match template.fixed_a() {
            Some(a) => vec![a],
            None => self.a_grid.clone(),
        }
    }

    pub fn max_n(&self) -> usize {
        self.n_grid.last().copied().unwrap_or(0)
    }
}
