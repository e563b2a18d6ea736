use std::io::Write;

use crate::error::Result;

pub const CSV_HEADER: [&str; 11] =
    ["experiment", "a", "H", "N", "predictor", "metric", "mean", "stderr", "reps", "seed", "notes"];

/// One output row: a statistic of one metric for one predictor in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub experiment: String,
    pub a: f64,
    pub horizon: usize,
    /// `None` for analytic rows.
    pub n: Option<usize>,
    pub predictor: String,
    pub metric: String,
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
    pub notes: String,
}

/// 17 significant digits; infinities as `inf`/`-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.experiment.clone(),
            format_float(r.a),
            r.horizon.to_string(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.predictor.clone(),
            r.metric.clone(),
            format_float(r.mean),
            format_float(r.stderr),
            r.reps.to_string(),
            r.seed.to_string(),
            r.notes.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Welford accumulator. Any infinite sample makes both the mean and the
/// standard error infinite.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
    infinite: bool,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        if x.is_infinite() {
            self.infinite = true;
            return;
        }
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        match (self.infinite, self.count) {
            (true, _) => f64::INFINITY,
            (_, 0) => f64::NAN,
            _ => self.mean,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.infinite {
            return f64::INFINITY;
        }
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count - 1) as f64
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

/// Running statistics plus the number of replications that produced no value.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CellStats {
    pub stats: RunningStats,
    pub dropped: usize,
}

impl CellStats {
    pub fn push(&mut self, v: Option<f64>) {
        match v {
            Some(x) => self.stats.push(x),
            None => self.dropped += 1,
        }
    }
}
