use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, SystemTemplate};
use super::record::{CellStats, SweepRecord};
use crate::control::{closed_loop_metrics, synthesize_mpc};
use crate::error::{Error, Result};
use crate::predictors::{
    analytic_loss, empirical_loss, fit_multi_step_ridge, fit_single_step_ridge, fit_structured_gd_on,
    compose_rollout, MultiStepObjective, Predictor, RegressionData,
};
use crate::system::rng::EVAL_SEED_OFFSET;
use crate::system::{covariances, rollout_operators, simulate, CovarianceBundle, LtiModel, RolloutOperators};
use crate::theory;

/// Outcome of one replication: `[cell][series]`, `None` when dropped.
type RepOutcome = Vec<Vec<Option<f64>>>;

/// Runs `reps` replications in parallel and reduces them in index order,
/// so the result does not depend on the thread count.
pub fn replicate<F>(reps: usize, base_seed: u64, cells: usize, series: usize, f: F) -> Vec<Vec<CellStats>>
where
    F: Fn(usize, u64) -> RepOutcome + Sync + Send,
{
    let outcomes: Vec<RepOutcome> =
        (0..reps).into_par_iter().map(|r| f(r, base_seed.wrapping_add(r as u64))).collect();
    let mut acc = vec![vec![CellStats::default(); series]; cells];
    for out in &outcomes {
        debug_assert_eq!(out.len(), cells);
        for (cell, row) in acc.iter_mut().zip(out) {
            for (s, v) in cell.iter_mut().zip(row) {
                s.push(*v);
            }
        }
    }
    acc
}

/// Seed for the evaluation rollout of replication `r`, disjoint from the
/// training seeds.
pub fn eval_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed.wrapping_add(EVAL_SEED_OFFSET).wrapping_add(rep as u64)
}

struct Setting {
    model: LtiModel,
    bundle: CovarianceBundle,
    ops: RolloutOperators,
}

impl Setting {
    fn new(template: &SystemTemplate, a: f64, horizon: usize) -> Result<Self> {
        let model = template.build(a)?;
        let bundle = covariances(&model, horizon)?;
        let ops = rollout_operators(&model, &bundle, horizon)?;
        Ok(Setting { model, bundle, ops })
    }

    fn loss(&self, p: &Predictor, cfg: &ExperimentConfig, rep: usize) -> Result<f64> {
        if cfg.empirical_eval {
            empirical_loss(p, &self.model, cfg.eval_len, eval_seed(cfg.base_seed, rep))
        } else {
            analytic_loss(p, &self.model, &self.bundle, &self.ops)
        }
    }
}

struct RowBuilder<'a> {
    cfg: &'a ExperimentConfig,
    a: f64,
    horizon: usize,
    out: &'a mut Vec<SweepRecord>,
}

impl RowBuilder<'_> {
    fn eval_tag(&self) -> &'static str {
        if self.cfg.empirical_eval { "eval=empirical" } else { "eval=analytic" }
    }

    fn analytic(&mut self, predictor: &str, metric: &str, value: f64, notes: String) {
        self.out.push(SweepRecord {
            experiment: self.cfg.experiment.as_str().into(),
            a: self.a,
            horizon: self.horizon,
            n: None,
            predictor: predictor.into(),
            metric: metric.into(),
            mean: value,
            stderr: 0.0,
            reps: self.cfg.reps,
            seed: self.cfg.base_seed,
            notes,
        });
    }

    fn monte_carlo(&mut self, n: usize, predictor: &str, metric: &str, cs: &CellStats, tag: &str) {
        self.out.push(SweepRecord {
            experiment: self.cfg.experiment.as_str().into(),
            a: self.a,
            horizon: self.horizon,
            n: Some(n),
            predictor: predictor.into(),
            metric: metric.into(),
            mean: cs.stats.mean(),
            stderr: cs.stats.stderr(),
            reps: self.cfg.reps,
            seed: self.cfg.base_seed,
            notes: format!("{tag};dropped={}", cs.dropped),
        });
    }
}

fn require(cfg: &ExperimentConfig, exp: Experiment) -> Result<()> {
    if cfg.experiment != exp {
        return Err(Error::Config(format!("config is for {}, expected {exp}", cfg.experiment)));
    }
    cfg.validate()
}

const SINGLE: &str = "single_step";
const MULTI: &str = "multi_step";
const GD: &str = "structured_gd";

/// Bias of both predictors across horizons; no sampling.
pub fn run_fig1(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    require(cfg, Experiment::Fig1Bias)?;
    let mut out = Vec::new();
    for a in cfg.effective_a_grid(&cfg.mis_system) {
        for &h in &cfg.horizons {
            let s = Setting::new(&cfg.mis_system, a, h)?;
            let rho_g = theory::lemma1_check(&s.model, &s.bundle)?;
            let rho_a = crate::numerics::spectral_radius(s.model.a())?;
            let notes = format!("analytic;rho_g={rho_g:.6};rho_a={rho_a:.6}");
            let b4 = theory::prop4_singlestep_bias(&s.model, &s.bundle, &s.ops)?;
            let b3 = theory::prop3_multistep_bias(&s.model, &s.bundle, &s.ops)?;
            let mut rb = RowBuilder { cfg, a, horizon: h, out: &mut out };
            rb.analytic(SINGLE, "bias", b4, notes.clone());
            rb.analytic(MULTI, "bias", b3, notes);
        }
    }
    Ok(out)
}

/// `N · E[L − ‖Γ_w‖²]` for both least-squares predictors, with the
/// closed-form rates as reference rows.
pub fn run_fig2(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    require(cfg, Experiment::Fig2WellspecRate)?;
    let mut out = Vec::new();
    for a in cfg.effective_a_grid(&cfg.well_system) {
        for &h in &cfg.horizons {
            let s = Setting::new(&cfg.well_system, a, h)?;
            let noise = s.ops.gamma_w()?.frobenius_sq();
            let stats = replicate(cfg.reps, cfg.base_seed, cfg.n_grid.len(), 2, |rep, seed| {
                let full = simulate(&s.model, cfg.max_n(), seed);
                cfg.n_grid
                    .iter()
                    .map(|&n| {
                        let data = full.prefix(n);
                        let scaled = |p: Result<Predictor>| {
                            p.and_then(|p| s.loss(&p, cfg, rep)).ok().map(|l| n as f64 * (l - noise))
                        };
                        let single = fit_single_step_ridge(&data, cfg.ridge)
                            .map(|(gy, gu)| compose_rollout(&gy, &gu, h));
                        vec![scaled(single), scaled(fit_multi_step_ridge(&data, h, cfg.ridge))]
                    })
                    .collect()
            });
            let p1 = theory::prop1_multistep_rate(&s.model, &s.ops)?;
            let p2 = theory::prop2_singlestep_rate(&s.model, &s.bundle, &s.ops)?;
            let mut rb = RowBuilder { cfg, a, horizon: h, out: &mut out };
            rb.analytic(SINGLE, "reference_rate", p2, "analytic".into());
            rb.analytic(MULTI, "reference_rate", p1, "analytic".into());
            let tag = rb.eval_tag();
            for (i, &n) in cfg.n_grid.iter().enumerate() {
                rb.monte_carlo(n, SINGLE, "n_excess", &stats[i][0], tag);
                rb.monte_carlo(n, MULTI, "n_excess", &stats[i][1], tag);
            }
        }
    }
    Ok(out)
}

/// Mean loss under partial observation, plus `N · E[L − bias]`, against the
/// closed-form bias and rate lines.
pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    require(cfg, Experiment::Fig3MisspecBias)?;
    let mut out = Vec::new();
    for a in cfg.effective_a_grid(&cfg.mis_system) {
        for &h in &cfg.horizons {
            let s = Setting::new(&cfg.mis_system, a, h)?;
            let b4 = theory::prop4_singlestep_bias(&s.model, &s.bundle, &s.ops)?;
            let b3 = theory::prop3_multistep_bias(&s.model, &s.bundle, &s.ops)?;
            let stats = replicate(cfg.reps, cfg.base_seed, cfg.n_grid.len(), 4, |rep, seed| {
                let full = simulate(&s.model, cfg.max_n(), seed);
                cfg.n_grid
                    .iter()
                    .map(|&n| {
                        let data = full.prefix(n);
                        let single = fit_single_step_ridge(&data, cfg.ridge)
                            .map(|(gy, gu)| compose_rollout(&gy, &gu, h))
                            .and_then(|p| s.loss(&p, cfg, rep))
                            .ok();
                        let multi =
                            fit_multi_step_ridge(&data, h, cfg.ridge).and_then(|p| s.loss(&p, cfg, rep)).ok();
                        let nf = n as f64;
                        vec![single, multi, single.map(|l| nf * (l - b4)), multi.map(|l| nf * (l - b3))]
                    })
                    .collect()
            });
            let mut rb = RowBuilder { cfg, a, horizon: h, out: &mut out };
            rb.analytic(SINGLE, "reference_bias", b4, "analytic".into());
            rb.analytic(MULTI, "reference_bias", b3, "analytic".into());
            if s.model.input_dim() == 0 {
                let r4 = theory::prop4_reducible_rate(&s.model, &s.bundle, &s.ops)?;
                let r3 = theory::prop3_reducible_rate(&s.model, &s.bundle, &s.ops)?;
                rb.analytic(SINGLE, "reference_rate", r4, "analytic".into());
                rb.analytic(MULTI, "reference_rate", r3, "analytic".into());
            }
            let tag = rb.eval_tag();
            for (i, &n) in cfg.n_grid.iter().enumerate() {
                rb.monte_carlo(n, SINGLE, "loss", &stats[i][0], tag);
                rb.monte_carlo(n, MULTI, "loss", &stats[i][1], tag);
                rb.monte_carlo(n, SINGLE, "n_excess", &stats[i][2], tag);
                rb.monte_carlo(n, MULTI, "n_excess", &stats[i][3], tag);
            }
        }
    }
    Ok(out)
}

/// Direct multi-step, single-step and structured multi-step-loss fits in
/// both regimes. Observed state: excess loss `L − ‖Γ_w‖²`. Partial
/// observation: total loss.
pub fn run_fig4(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    require(cfg, Experiment::Fig4MultistepLoss)?;
    let mut out = Vec::new();
    for (template, metric) in [(&cfg.well_system, "well_excess_loss"), (&cfg.mis_system, "mis_loss")] {
        for a in cfg.effective_a_grid(template) {
            for &h in &cfg.horizons {
                let s = Setting::new(template, a, h)?;
                let well = s.model.regime() == crate::system::Regime::Well;
                let offset = if well { s.ops.gamma_w()?.frobenius_sq() } else { 0.0 };
                let stats = replicate(cfg.reps, cfg.base_seed, cfg.n_grid.len(), 3, |rep, seed| {
                    let full = simulate(&s.model, cfg.max_n(), seed);
                    cfg.n_grid
                        .iter()
                        .map(|&n| {
                            let data = full.prefix(n);
                            let score = |p: Result<Predictor>| p.and_then(|p| s.loss(&p, cfg, rep)).ok().map(|l| l - offset);
                            let one = fit_single_step_ridge(&data, cfg.ridge);
                            let single = score(one.clone().map(|(gy, gu)| compose_rollout(&gy, &gu, h)));
                            let multi = score(fit_multi_step_ridge(&data, h, cfg.ridge));
                            let gd = score(one.and_then(|(gy, gu)| {
                                let obj = MultiStepObjective::new(&RegressionData::build(&data, h)?);
                                Ok(fit_structured_gd_on(&obj, (&gy, &gu), cfg.gd)?.predictor)
                            }));
                            vec![single, multi, gd]
                        })
                        .collect()
                });
                let mut rb = RowBuilder { cfg, a, horizon: h, out: &mut out };
                if well {
                    let p2 = theory::prop2_singlestep_rate(&s.model, &s.bundle, &s.ops)?;
                    let p1 = theory::prop1_multistep_rate(&s.model, &s.ops)?;
                    rb.analytic(SINGLE, "reference_rate", p2, "analytic".into());
                    rb.analytic(MULTI, "reference_rate", p1, "analytic".into());
                } else {
                    let b4 = theory::prop4_singlestep_bias(&s.model, &s.bundle, &s.ops)?;
                    let b3 = theory::prop3_multistep_bias(&s.model, &s.bundle, &s.ops)?;
                    rb.analytic(SINGLE, "reference_bias", b4, "analytic".into());
                    rb.analytic(MULTI, "reference_bias", b3, "analytic".into());
                }
                let tag = format!("{};gd_step={:e};gd_iters={}", rb.eval_tag(), cfg.gd.step, cfg.gd.iters);
                for (i, &n) in cfg.n_grid.iter().enumerate() {
                    for (k, name) in [SINGLE, MULTI, GD].into_iter().enumerate() {
                        rb.monte_carlo(n, name, metric, &stats[i][k], &tag);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// MPC gains from fitted predictors, scored on the true plant.
pub fn run_fig5(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    require(cfg, Experiment::Fig5Control)?;
    let mut out = Vec::new();
    let ph = cfg.mpc.predictor_horizon;
    let mh = cfg.mpc.horizon;
    let gain_of = |p: Result<Predictor>| p.and_then(|p| synthesize_mpc(&p, mh, cfg.terminal_mode));
    for (template, prefix) in [(&cfg.well_system, "well"), (&cfg.mis_system, "mis")] {
        for a in cfg.effective_a_grid(template) {
            let model = template.build(a)?;
            // series per predictor: cost, rho, unstable indicator
            let stats = replicate(cfg.reps, cfg.base_seed, cfg.n_grid.len(), 6, |_, seed| {
                let full = simulate(&model, cfg.max_n(), seed);
                cfg.n_grid
                    .iter()
                    .map(|&n| {
                        let data = full.prefix(n);
                        let single = fit_single_step_ridge(&data, cfg.ridge).map(|(gy, gu)| compose_rollout(&gy, &gu, ph));
                        let multi = fit_multi_step_ridge(&data, ph, cfg.ridge);
                        let mut row = Vec::with_capacity(6);
                        for p in [single, multi] {
                            match gain_of(p).and_then(|g| closed_loop_metrics(&model, &g)) {
                                Ok(m) => row.extend([Some(m.lqr_cost), Some(m.rho_cl), Some(f64::from(!m.stable as u8))]),
                                Err(_) => row.extend([None, None, None]),
                            }
                        }
                        row
                    })
                    .collect()
            });
            let mut rb = RowBuilder { cfg, a, horizon: mh, out: &mut out };
            let horizons = format!("mpc_horizon={mh};predictor_horizon={ph}");
            if prefix == "well" {
                let bundle = covariances(&model, ph)?;
                let ops = rollout_operators(&model, &bundle, ph)?;
                let exact = Predictor::direct(ops.full_predictor(), ph, model.output_dim(), model.input_dim())?;
                let m = closed_loop_metrics(&model, &synthesize_mpc(&exact, mh, cfg.terminal_mode)?)?;
                rb.analytic("exact", "well_lqr_cost_exact", m.lqr_cost, format!("analytic;{horizons}"));
            }
            let tag = format!("eval=closed_loop;{horizons}");
            for (i, &n) in cfg.n_grid.iter().enumerate() {
                for (k, name) in [SINGLE, MULTI].into_iter().enumerate() {
                    rb.monte_carlo(n, name, &format!("{prefix}_lqr_cost"), &stats[i][3 * k], &tag);
                    rb.monte_carlo(n, name, &format!("{prefix}_rho_cl"), &stats[i][3 * k + 1], &tag);
                    rb.monte_carlo(n, name, &format!("{prefix}_unstable_fraction"), &stats[i][3 * k + 2], &tag);
                }
            }
        }
    }
    Ok(out)
}

/// Every closed-form quantity for one model and horizon, as `(name, value)`.
pub fn theory_table(model: &LtiModel, horizon: usize) -> Result<Vec<(String, f64)>> {
    let bundle = covariances(model, horizon)?;
    let ops = rollout_operators(model, &bundle, horizon)?;
    let mut rows = vec![("rho_a".to_string(), crate::numerics::spectral_radius(model.a())?)];
    for r in theory::report(model, &bundle, &ops)? {
        let kind = r.predictor_kind.as_str();
        let bias_name = if r.regime == crate::system::Regime::Well { "noise_floor" } else { "bias" };
        rows.push((format!("{kind}_{bias_name}"), r.irreducible));
        if let Some(rate) = r.reducible_rate {
            rows.push((format!("{kind}_rate"), rate));
        }
    }
    if model.regime() == crate::system::Regime::Mis {
        rows.insert(1, ("rho".to_string(), theory::lemma1_check(model, &bundle)?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(exp: Experiment, json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json, Some(exp)).unwrap()
    }

    #[test]
    fn fig1_ordering_and_notes() {
        let recs = run_fig1(&ExperimentConfig::defaults(Experiment::Fig1Bias)).unwrap();
        assert_eq!(recs.len(), 60);
        for pair in recs.chunks(2) {
            assert_eq!(pair[0].predictor, SINGLE);
            assert!(pair[0].mean >= pair[1].mean - 1e-10, "H={}", pair[0].horizon);
            let rho: f64 = pair[0].notes.split("rho_g=").nth(1).unwrap()[..8].parse().unwrap();
            assert!((rho - 0.99).abs() < 0.005);
        }
    }

    #[test]
    fn replication_is_deterministic() {
        let cfg = small(Experiment::Fig2WellspecRate, r#"{"a_grid":[0.5],"n_grid":[40,80],"reps":3,"base_seed":7}"#);
        let a = run_fig2(&cfg).unwrap();
        assert_eq!(a, run_fig2(&cfg).unwrap());
        assert_eq!(a.len(), 2 + 2 * 2);
        assert!(a.iter().all(|r| r.reps == 3 && r.seed == 7));
    }

    #[test]
    fn stderr_shrinks_with_reps() {
        let se = |reps: usize| {
            let cfg = small(
                Experiment::Fig3MisspecBias,
                &format!(r#"{{"a_grid":[0.5],"horizons":[5],"n_grid":[3000],"reps":{reps}}}"#),
            );
            run_fig3(&cfg).unwrap().iter().find(|r| r.metric == "loss" && r.predictor == MULTI).unwrap().stderr
        };
        let (s1, s2, s3) = (se(100), se(400), se(1600));
        for ratio in [s2 / s1, s3 / s2] {
            assert!((ratio - 0.5).abs() < 0.3 * 0.5, "{ratio}");
        }
    }

    #[test]
    fn fig5_reference_and_metrics() {
        let cfg = small(Experiment::Fig5Control, r#"{"n_grid":[200],"reps":4}"#);
        let recs = run_fig5(&cfg).unwrap();
        let exact = recs.iter().find(|r| r.metric == "well_lqr_cost_exact").unwrap();
        assert!((exact.mean - 6.0889676).abs() < 1e-6);
        assert!(recs.iter().any(|r| r.metric == "mis_rho_cl"));
        assert!(recs.iter().any(|r| r.metric == "well_unstable_fraction"));
    }

    #[test]
    fn example1_theory_table() {
        let rows = theory_table(&LtiModel::example1(), 5).unwrap();
        let get = |k: &str| rows.iter().find(|(n, _)| n == k).unwrap().1;
        assert!((get("rho") - 0.99).abs() < 0.005);
        assert_eq!(get("rho_a"), 0.9);
        assert!(get("single_step_bias") >= get("multi_step_bias"));
    }

    #[test]
    fn eval_seeds_are_disjoint() {
        assert_ne!(eval_seed(0, 0), 0);
        assert_eq!(eval_seed(5, 3), 5 + EVAL_SEED_OFFSET + 3);
    }
}
