//! `results.csv` and `summary.json`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::run::{RunResult, Series};
use super::scenario::ScenarioKind;
use crate::coordination::Algorithm;
use crate::error::{Error, Result};
use crate::oracle::exp3ix_allowance;

pub const CSV_HEADER: [&str; 7] = [
    "trial",
    "algorithm",
    "t",
    "value",
    "total_min_distance",
    "strategy",
    "seed",
];

/// Number of points the summary curves are decimated to.
pub const CURVE_POINTS: usize = 100;

/// Confidence level of the allowance and paired comparisons.
pub const CONFIDENCE_DELTA: f64 = 0.05;

/// C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        trim_fraction(format!("{:.*}", (P - 1 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa.to_string()), exp.abs())
    }
}

fn trim_fraction(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_csv<W: Write>(result: &RunResult, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::StateCorruption(format!("csv: {other:?}")),
    };
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for s in &result.series {
        let (trial, seed) = (s.trial.to_string(), s.seed.to_string());
        for t in 0..s.len() {
            let strategy = s.strategies[t].map(|x| x.as_str()).unwrap_or("");
            w.write_record([
                trial.as_str(),
                s.algorithm.as_str(),
                &t.to_string(),
                &format_g9(s.values[t]),
                &format_g9(s.total_min_distance[t]),
                strategy,
                seed.as_str(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanStderr {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, stderr, n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint {
    pub t: usize,
    pub mean: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleSummary {
    pub opt_total: MeanStderr,
    pub delta_t: MeanStderr,
    pub min_shift_delta_t: MeanStderr,
    /// Executed-to-optimal ratio; empirical β for CommandOnly.
    pub beta: Option<MeanStderr>,
    pub beta_min: Option<f64>,
    pub beta_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub cumulative_value: MeanStderr,
    pub final_quartile_total_min_distance: MeanStderr,
    pub total_min_distance_curve: Vec<CurvePoint>,
    pub ext_comm_mass_final_quartile: Option<MeanStderr>,
    pub evaluations_per_agent: Vec<f64>,
    pub meta_updates: f64,
    pub oracle: Option<OracleSummary>,
}

/// One-sided paired comparison of final-quartile total-min-distance,
/// MetaBSG minus `baseline` per trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairedComparison {
    pub baseline: Algorithm,
    pub mean_difference: f64,
    pub stderr: f64,
    pub t_statistic: f64,
    pub critical_value: f64,
    pub meta_strictly_better: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundSummary {
    pub confidence_delta: f64,
    pub exp3ix_allowance: f64,
    /// Per trial `meta − max(bsg, command)` cumulative value.
    pub meta_vs_best_slack: MeanStderr,
    pub trials_within_allowance: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: ScenarioKind,
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub with_oracle: bool,
    pub algorithms: Vec<AlgorithmSummary>,
    pub comparisons: Vec<PairedComparison>,
    pub bounds: Option<BoundSummary>,
}

/// First step of the final quartile.
pub fn final_quartile_start(horizon: usize) -> usize {
    horizon * 3 / 4
}

fn tail_mean(xs: &[f64]) -> f64 {
    let tail = &xs[final_quartile_start(xs.len())..];
    tail.iter().sum::<f64>() / tail.len().max(1) as f64
}

/// Final-quartile mean of total-min-distance for one series.
pub fn final_quartile_distance(s: &Series) -> f64 {
    tail_mean(&s.total_min_distance)
}

/// Final-quartile mean EXP3-IX mass on ExtComm for one MetaBSG series.
pub fn final_quartile_ext_comm(s: &Series) -> Option<f64> {
    (!s.ext_comm_mass.is_empty()).then(|| tail_mean(&s.ext_comm_mass))
}

/// Step indices of a curve decimated to at most [`CURVE_POINTS`] points.
pub fn decimation(horizon: usize) -> Vec<usize> {
    if horizon <= CURVE_POINTS {
        return (0..horizon).collect();
    }
    (0..CURVE_POINTS)
        .map(|k| (k * (horizon - 1) + (CURVE_POINTS - 1) / 2) / (CURVE_POINTS - 1))
        .collect()
}

fn summarize(result: &RunResult, algorithm: Algorithm) -> AlgorithmSummary {
    let series: Vec<&Series> = result.of(algorithm).collect();
    let horizon = result.config.horizon;
    let totals: Vec<f64> = series.iter().map(|s| s.total_value()).collect();
    let tails: Vec<f64> = series.iter().map(|s| final_quartile_distance(s)).collect();
    let curve = decimation(horizon)
        .into_iter()
        .map(|t| CurvePoint {
            t,
            mean: series.iter().map(|s| s.total_min_distance[t]).sum::<f64>() / series.len() as f64,
        })
        .collect();
    let masses: Vec<f64> = series.iter().filter_map(|s| final_quartile_ext_comm(s)).collect();
    let agents = series.first().map_or(0, |s| s.evaluations_per_agent.len());
    let evaluations_per_agent = (0..agents)
        .map(|i| series.iter().map(|s| s.evaluations_per_agent[i] as f64).sum::<f64>() / series.len() as f64)
        .collect();
    let oracle = result.with_oracle.then(|| {
        let stats: Vec<_> = series.iter().filter_map(|s| s.oracle.as_ref()).collect();
        let pick = |f: &dyn Fn(&super::run::OracleStats) -> f64| {
            MeanStderr::of(&stats.iter().map(|o| f(o)).collect::<Vec<_>>())
        };
        let betas: Vec<f64> = stats.iter().filter_map(|o| o.beta).collect();
        OracleSummary {
            opt_total: pick(&|o| o.opt_total),
            delta_t: pick(&|o| o.delta_t as f64),
            min_shift_delta_t: pick(&|o| o.min_shift_delta_t as f64),
            beta: (!betas.is_empty()).then(|| MeanStderr::of(&betas)),
            beta_min: betas.iter().copied().reduce(f64::min),
            beta_max: betas.iter().copied().reduce(f64::max),
        }
    });
    AlgorithmSummary {
        algorithm,
        cumulative_value: MeanStderr::of(&totals),
        final_quartile_total_min_distance: MeanStderr::of(&tails),
        total_min_distance_curve: curve,
        ext_comm_mass_final_quartile: (!masses.is_empty()).then(|| MeanStderr::of(&masses)),
        evaluations_per_agent,
        meta_updates: series.iter().map(|s| s.meta_updates as f64).sum::<f64>() / series.len() as f64,
        oracle,
    }
}

/// Per-trial pairs `(meta, baseline)` in trial order.
fn pairs(result: &RunResult, baseline: Algorithm) -> Vec<(&Series, &Series)> {
    let meta: Vec<&Series> = result.of(Algorithm::MetaBsg).collect();
    let base: Vec<&Series> = result.of(baseline).collect();
    meta.into_iter().zip(base).collect()
}

pub fn paired_comparison(result: &RunResult, baseline: Algorithm) -> PairedComparison {
    let diffs: Vec<f64> = pairs(result, baseline)
        .iter()
        .map(|(m, b)| final_quartile_distance(m) - final_quartile_distance(b))
        .collect();
    let ms = MeanStderr::of(&diffs);
    let df = (diffs.len().max(2) - 1) as f64;
    let critical_value = StudentsT::new(0.0, 1.0, df)
        .map(|d| d.inverse_cdf(1.0 - CONFIDENCE_DELTA))
        .unwrap_or(f64::INFINITY);
    let t_statistic = if ms.stderr > 0.0 {
        ms.mean / ms.stderr
    } else if ms.mean < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    PairedComparison {
        baseline,
        mean_difference: ms.mean,
        stderr: ms.stderr,
        t_statistic,
        critical_value,
        meta_strictly_better: diffs.len() >= 2 && t_statistic < -critical_value,
    }
}

pub fn summary(result: &RunResult) -> Summary {
    let algos = &result.config.algorithms;
    let has = |a| algos.contains(&a);
    let comparisons = if has(Algorithm::MetaBsg) {
        algos
            .iter()
            .filter(|&&a| a != Algorithm::MetaBsg)
            .map(|&a| paired_comparison(result, a))
            .collect()
    } else {
        Vec::new()
    };
    let bounds = (has(Algorithm::MetaBsg) && has(Algorithm::Bsg) && has(Algorithm::CommandOnly)).then(|| {
        let allowance = exp3ix_allowance(result.config.horizon, CONFIDENCE_DELTA);
        let bsg: Vec<f64> = result.of(Algorithm::Bsg).map(Series::total_value).collect();
        let cmd: Vec<f64> = result.of(Algorithm::CommandOnly).map(Series::total_value).collect();
        let slack: Vec<f64> = result
            .of(Algorithm::MetaBsg)
            .zip(bsg.iter().zip(&cmd))
            .map(|(m, (b, c))| m.total_value() - b.max(*c))
            .collect();
        BoundSummary {
            confidence_delta: CONFIDENCE_DELTA,
            exp3ix_allowance: allowance,
            meta_vs_best_slack: MeanStderr::of(&slack),
            trials_within_allowance: slack.iter().filter(|&&s| s >= -allowance).count(),
            trials: slack.len(),
        }
    });
    Summary {
        scenario: result.config.scenario,
        trials: result.config.trials,
        horizon: result.config.horizon,
        seed: result.config.seed,
        with_oracle: result.with_oracle,
        algorithms: algos.iter().map(|&a| summarize(result, a)).collect(),
        comparisons,
        bounds,
    }
}

/// Writes `results.csv` and `summary.json` into `dir`, creating it.
pub fn write_outputs(result: &RunResult, dir: &Path) -> Result<Summary> {
    fs::create_dir_all(dir)?;
    let mut csv = Vec::new();
    write_csv(result, &mut csv)?;
    fs::write(dir.join("results.csv"), csv)?;
    let s = summary(result);
    let mut json = serde_json::to_vec_pretty(&s)?;
    json.push(b'\n');
    fs::write(dir.join("summary.json"), json)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.5, "0.5"),
            (-2.25, "-2.25"),
            (1.0 / 3.0, "0.333333333"),
            (2.0 / 3.0, "0.666666667"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (1e100, "1e+100"),
            (999999999.5, "1e+09"),
            (0.95, "0.95"),
            (f64::NAN, "nan"),
            (f64::INFINITY, "inf"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g9(x), want, "{x}");
        }
    }

    #[test]
    fn decimation_hits_both_ends() {
        let d = decimation(2000);
        assert_eq!(d.len(), CURVE_POINTS);
        assert_eq!((d[0], d[99]), (0, 1999));
        assert!(d.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(decimation(10), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn mean_stderr() {
        let m = MeanStderr::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
        assert_eq!(MeanStderr::of(&[7.0]).stderr, 0.0);
    }
}
