//! Runs every primary acceptance criterion at its stated scale and tolerance.
//! Prints one PASS/FAIL line per criterion and exits nonzero on any failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{bias_minimum, gaussian, random_matrix, random_mis_system, random_well_system};
use phl_core::harness::{self, Experiment, ExperimentConfig, SweepRecord};
use phl_core::numerics::min_eigenvalue;
use phl_core::predictors::{compose_rollout, fit_multi_step, fit_single_step, MultiStepObjective, RegressionData};
use phl_core::system::{covariances, rollout_operators, simulate};
use phl_core::theory::*;
use phl_core::{LtiModel, Matrix, Trajectory};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn find<'a>(recs: &'a [SweepRecord], a: f64, h: usize, pred: &str, metric: &str, n: Option<usize>) -> &'a SweepRecord {
    recs.iter()
        .find(|r| (r.a - a).abs() < 1e-12 && r.horizon == h && r.predictor == pred && r.metric == metric && r.n == n)
        .unwrap_or_else(|| panic!("missing row a={a} H={h} {pred} {metric} {n:?}"))
}

fn rel(x: f64, want: f64) -> f64 {
    (x - want).abs() / want.abs()
}

fn example1_golden() -> Outcome {
    let t = Instant::now();
    let rows = harness::theory_table(&LtiModel::example1(), 1).map_err(|e| e.to_string())?;
    let get = |k: &str| rows.iter().find(|(n, _)| n == k).map(|(_, v)| *v).unwrap();
    let (rho, rho_a) = (get("rho"), get("rho_a"));
    let secs = t.elapsed().as_secs_f64();
    check(
        (rho - 0.99).abs() <= 0.005 && rho_a == 0.9 && secs < 1.0,
        format!("rho={rho:.6} rho_a={rho_a} ({secs:.3}s)"),
    )
}

fn lemma1() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..200 {
        let m = random_mis_system(seed);
        let b = covariances(&m, 1).map_err(|e| e.to_string())?;
        worst = worst.max(lemma1_check(&m, &b).map_err(|e| e.to_string())?);
    }
    check(worst <= 1.0 + 1e-9, format!("max rho={worst:.9} over 200 systems"))
}

fn fig2_rates() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::Fig2WellspecRate);
    cfg.n_grid = vec![3000];
    cfg.horizons = vec![5];
    let recs = harness::run(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for a in [0.5, 0.75, 0.9] {
        let p1 = find(&recs, a, 5, "multi_step", "reference_rate", None).mean;
        let p2 = find(&recs, a, 5, "single_step", "reference_rate", None).mean;
        let ms = find(&recs, a, 5, "multi_step", "n_excess", Some(3000)).mean;
        let ss = find(&recs, a, 5, "single_step", "n_excess", Some(3000)).mean;
        ok &= rel(ms, p1) <= 0.10 && rel(ss, p2) <= 0.10 && p2 <= p1;
        parts.push(format!("a={a}: ms {ms:.1}/{p1:.1} ss {ss:.1}/{p2:.1}"));
    }
    check(ok, parts.join("; "))
}

fn scalar_closed_forms() -> Outcome {
    let h = 6;
    let mut worst = 0.0f64;
    for a in [0.1, 0.5, 0.9, 0.99] {
        let m = LtiModel::new(Matrix::scalar(a), None, Matrix::scalar(1.0), Matrix::scalar(1.0), Matrix::scalar(0.0))
            .map_err(|e| e.to_string())?;
        let b = covariances(&m, h).map_err(|e| e.to_string())?;
        let ms = multistep_matrix(m.a(), h);
        let ss = singlestep_matrix(&m, &b, h).map_err(|e| e.to_string())?;
        for i in 0..h {
            for j in 0..h {
                worst = worst.max((ms[(i, j)] - a.powi(i.abs_diff(j) as i32)).abs());
                worst = worst.max((ss[(i, j)] - a.powi((i + j) as i32)).abs());
            }
        }
    }
    check(worst <= 1e-12, format!("max abs err={worst:.2e}"))
}

fn psd_gap() -> Outcome {
    let mut worst = f64::INFINITY;
    for seed in 0..200u64 {
        let m = random_well_system(seed, 0);
        let h = 1 + (seed % 8) as usize;
        let b = covariances(&m, h).map_err(|e| e.to_string())?;
        let g = gap_matrices(&m, &b, h).map_err(|e| e.to_string())?;
        worst = worst.min(min_eigenvalue(&g.gap).map_err(|e| e.to_string())?);
    }
    check(worst >= -1e-10, format!("min eig={worst:.3e} over 200 systems"))
}

fn fig3_bias() -> Outcome {
    let mut cfg = ExperimentConfig::defaults(Experiment::Fig3MisspecBias);
    cfg.a_grid = vec![0.9];
    cfg.horizons = vec![5];
    cfg.n_grid = vec![3000];
    cfg.reps = 1000;
    let recs = harness::run(&cfg).map_err(|e| e.to_string())?;
    let b3 = find(&recs, 0.9, 5, "multi_step", "reference_bias", None).mean;
    let b4 = find(&recs, 0.9, 5, "single_step", "reference_bias", None).mean;
    let ms = find(&recs, 0.9, 5, "multi_step", "loss", Some(3000)).mean;
    let ss = find(&recs, 0.9, 5, "single_step", "loss", Some(3000)).mean;
    check(
        rel(ms, b3) <= 0.05 && rel(ss, b4) <= 0.05 && b4 > b3,
        format!("ms {ms:.3}/{b3:.3} ss {ss:.3}/{b4:.3}"),
    )
}

fn minimiser_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let m = random_mis_system(seed);
        let h = 1 + (seed % 8) as usize;
        let b = covariances(&m, h).map_err(|e| e.to_string())?;
        let ops = rollout_operators(&m, &b, h).map_err(|e| e.to_string())?;
        let b3 = prop3_multistep_bias(&m, &b, &ops).map_err(|e| e.to_string())?;
        let (_, min) = bias_minimum(&m, h);
        worst = worst.max((b3 - min).abs() / b3.max(1.0));
    }
    check(worst <= 1e-8, format!("max rel err={worst:.2e} over 50 systems"))
}

fn rate_oracles() -> Outcome {
    let cfg = ExperimentConfig::from_json(include_str!("../../../configs/fig3_scalar_rates.json"), None)
        .map_err(|e| e.to_string())?;
    let recs = harness::run(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for h in [2, 3] {
        let r3 = find(&recs, 0.8, h, "multi_step", "reference_rate", None).mean;
        let r4 = find(&recs, 0.8, h, "single_step", "reference_rate", None).mean;
        let ms = find(&recs, 0.8, h, "multi_step", "n_excess", Some(3000)).mean;
        let ss = find(&recs, 0.8, h, "single_step", "n_excess", Some(3000)).mean;
        ok &= rel(ms, r3) <= 0.15 && rel(ss, r4) <= 0.20;
        parts.push(format!("H={h}: ms {ms:.2}/{r3:.2} ss {ss:.2}/{r4:.2}"));
    }
    check(ok, parts.join("; "))
}

fn gradient_check() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut g = gaussian(seed);
        let (dy, du, h) = (2, 1, 4);
        let data = Trajectory::new(random_matrix(&mut g, 60, dy), random_matrix(&mut g, 60, du)).unwrap();
        let reg = RegressionData::build(&data, h).map_err(|e| e.to_string())?;
        let obj = MultiStepObjective::new(&reg);
        let gy = random_matrix(&mut g, dy, dy).scale(0.4);
        let gu = random_matrix(&mut g, dy, du);
        let (_, ay, au) = obj.loss_and_gradient(&gy, &gu);
        let eps = 1e-6;
        let (mut err, mut norm) = (0.0, 0.0);
        for (which, rows, cols) in [(0, dy, dy), (1, dy, du)] {
            for i in 0..rows {
                for j in 0..cols {
                    let bump = |s: f64| {
                        let (mut y2, mut u2) = (gy.clone(), gu.clone());
                        if which == 0 { y2[(i, j)] += s } else { u2[(i, j)] += s }
                        obj.loss_and_gradient(&y2, &u2).0
                    };
                    let fd = (bump(eps) - bump(-eps)) / (2.0 * eps);
                    let an = if which == 0 { ay[(i, j)] } else { au[(i, j)] };
                    err += (fd - an).powi(2);
                    norm += an * an;
                }
            }
        }
        worst = worst.max(err.sqrt() / norm.sqrt());
    }
    check(worst <= 1e-5, format!("max rel err={worst:.2e} over 20 instances"))
}

/// Least-squares slope of `ln y` on `ln n`.
fn loglog_slope(ns: &[usize], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ls.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn fig4_qualitative() -> Outcome {
    let cfg = ExperimentConfig::defaults(Experiment::Fig4MultistepLoss);
    let recs = harness::run(&cfg).map_err(|e| e.to_string())?;
    let series = |pred: &str, metric: &str| -> Vec<f64> {
        cfg.n_grid.iter().map(|&n| find(&recs, 0.9, 10, pred, metric, Some(n)).mean).collect()
    };
    let s_single = loglog_slope(&cfg.n_grid, &series("single_step", "well_excess_loss"));
    let s_gd = loglog_slope(&cfg.n_grid, &series("structured_gd", "well_excess_loss"));
    let ratio = s_gd / s_single;
    let last = *cfg.n_grid.last().unwrap();
    let plateau = |p: &str| find(&recs, 0.9, 10, p, "mis_loss", Some(last)).mean;
    let (ss, ms, gd) = (plateau("single_step"), plateau("multi_step"), plateau("structured_gd"));
    check(
        (ratio - 1.0).abs() <= 0.20 && gd >= ms && gd <= 1.10 * ms && gd < ss,
        format!("slopes gd {s_gd:.3} single {s_single:.3} (ratio {ratio:.3}); plateau ms {ms:.2} gd {gd:.2} ss {ss:.2}"),
    )
}

fn fig5_qualitative() -> Outcome {
    let cfg = ExperimentConfig::defaults(Experiment::Fig5Control);
    let recs = harness::run(&cfg).map_err(|e| e.to_string())?;
    let (h, a) = (cfg.mpc.horizon, 0.9);
    let (first, last) = (cfg.n_grid[0], *cfg.n_grid.last().unwrap());
    let exact = find(&recs, a, h, "exact", "well_lqr_cost_exact", None).mean;
    let cost = |p: &str, n: usize| find(&recs, a, h, p, "well_lqr_cost", Some(n)).mean;
    let well_ok = cost("single_step", first) <= cost("multi_step", first)
        && rel(cost("single_step", last), exact) <= 0.05
        && rel(cost("multi_step", last), exact) <= 0.05;
    let rho = |p: &str| -> Vec<f64> { cfg.n_grid.iter().map(|&n| find(&recs, a, h, p, "mis_rho_cl", Some(n)).mean).collect() };
    let (rs, rm) = (rho("single_step"), rho("multi_step"));
    let single_unstable = rs.iter().any(|&r| r > 1.0);
    let multi_stable = rm.iter().all(|&r| r < 1.0);
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    check(
        well_ok && single_unstable && multi_stable,
        format!(
            "well: ss {:.3}/ms {:.3} at N={first}, ss {:.4} ms {:.4} exact {exact:.4} at N={last}; mis mean rho ss [{}] ms [{}]",
            cost("single_step", first),
            cost("multi_step", first),
            cost("single_step", last),
            cost("multi_step", last),
            fmt(&rs),
            fmt(&rm),
        ),
    )
}

fn h1_collapse() -> Outcome {
    for seed in 0..20u64 {
        let m = random_well_system(seed, 1 + (seed % 2) as usize);
        let data = simulate(&m, 50 + 10 * seed as usize, seed);
        let (gy, gu) = fit_single_step(&data).map_err(|e| e.to_string())?;
        let p = fit_multi_step(&data, 1).map_err(|e| e.to_string())?;
        if p.g != Matrix::hstack(&[&gy, &gu]) {
            return Err(format!("dataset {seed} differs"));
        }
    }
    Ok("bit-identical on 20 datasets".into())
}

fn rollout_identity() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut g = gaussian(seed);
        let (dy, du, h) = (1 + (seed % 3) as usize, (seed % 3) as usize, 1 + (seed % 7) as usize);
        let gy = random_matrix(&mut g, dy, dy).scale(0.5);
        let gu = random_matrix(&mut g, dy, du);
        let p = compose_rollout(&gy, &gu, h);
        let y0: Vec<f64> = (0..dy).map(|_| g.next()).collect();
        let us: Vec<f64> = (0..h * du).map(|_| g.next()).collect();
        let stacked = p.predict(&y0, &us).map_err(|e| e.to_string())?;
        let mut y = y0;
        for k in 0..h {
            let mut next = gy.mul_vec(&y);
            for (a, b) in next.iter_mut().zip(gu.mul_vec(&us[k * du..(k + 1) * du])) {
                *a += b;
            }
            for i in 0..dy {
                worst = worst.max((stacked[k * dy + i] - next[i]).abs() / (1.0 + next[i].abs()));
            }
            y = next;
        }
    }
    check(worst <= 1e-10, format!("max err={worst:.2e} over 100 draws"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 13] = [
        ("example1_golden", example1_golden),
        ("lemma1_property", lemma1),
        ("wellspec_rate_convergence", fig2_rates),
        ("scalar_closed_forms", scalar_closed_forms),
        ("psd_gap", psd_gap),
        ("misspec_bias_convergence", fig3_bias),
        ("bias_minimiser_identity", minimiser_identity),
        ("rate_oracles", rate_oracles),
        ("gradient_check", gradient_check),
        ("fig4_qualitative", fig4_qualitative),
        ("fig5_qualitative", fig5_qualitative),
        ("h1_collapse", h1_collapse),
        ("rollout_identity", rollout_identity),
    ];
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, f) in criteria {
        if !only.is_empty() && !only.iter().any(|o| name.contains(o.as_str())) {
            continue;
        }
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {name} [{secs:.1}s] {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s] {d}");
            }
        }
    }
    if failed > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS }
}
