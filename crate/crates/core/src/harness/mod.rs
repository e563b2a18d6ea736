//! Seeded Monte Carlo sweeps and CSV output for each experiment.

mod config;
mod experiments;
mod record;

pub use config::{log_grid, Experiment, ExperimentConfig, MpcConfig, SystemTemplate};
pub use experiments::{
    eval_seed, replicate, run_fig1, run_fig2, run_fig3, run_fig4, run_fig5, theory_table,
};
pub use record::{format_float, write_csv, CellStats, RunningStats, SweepRecord, CSV_HEADER};

use crate::error::{Error, Result};

/// Environment variable that overrides any thread count given elsewhere.
pub const THREADS_ENV: &str = "PHL_THREADS";

/// `PHL_THREADS` wins over `requested`; `None` lets rayon decide.
pub fn resolve_threads(requested: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        Err(_) => Ok(requested),
    }
}

/// Run the configured experiment on a dedicated pool.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = resolve_threads(cfg.threads)? {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| match cfg.experiment {
        Experiment::Fig1Bias => run_fig1(cfg),
        Experiment::Fig2WellspecRate => run_fig2(cfg),
        Experiment::Fig3MisspecBias => run_fig3(cfg),
        Experiment::Fig4MultistepLoss => run_fig4(cfg),
        Experiment::Fig5Control => run_fig5(cfg),
    })
}
