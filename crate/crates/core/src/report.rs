//! CSV and JSON outputs. Every row and every summary carries the config hash
//! and the seed that produced it.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::config::{Method, ScenarioConfig};
use crate::error::{Error, Result};
use crate::experiment::{AggregatePoint, Axis, SweepResult};
use crate::game::{GameTrace, NashReport, Scheme};
use crate::matrix_io::write_matrix;
use crate::transceiver::TransceiverState;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 13] = [
    "config_hash",
    "seed",
    "scheme",
    "iteration",
    "player",
    "mse",
    "mse_db",
    "payoff",
    "mui_power_w",
    "mui_power_db",
    "power",
    "gamma",
    "residual",
];

pub const SWEEP_HEADER: [&str; 11] = [
    "config_hash",
    "seed",
    "axis",
    "axis_value",
    "method",
    "network_mse_db",
    "network_accuracy",
    "mui_power_db",
    "converged",
    "iterations",
    "player_mse_db",
];

/// Shortest round-trip decimal, `n/a` for values without a finite representation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "n/a".to_string()
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| v.to_string())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

/// One row per `(iteration, player)`.
pub fn write_trace_csv<W: Write>(out: W, trace: &GameTrace, scheme: Scheme, seed: u64, hash: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in &trace.records {
        for l in 0..r.mse.len() {
            w.write_record([
                hash.to_string(),
                seed.to_string(),
                scheme.name().to_string(),
                r.iteration.to_string(),
                l.to_string(),
                num(r.mse[l]),
                num(10.0 * r.mse[l].log10()),
                num(r.payoff[l]),
                num(r.mui_power[l]),
                num(r.mui_power_db[l]),
                num(r.power[l]),
                num(r.gamma),
                num(r.residual),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per `(axis value, method, seed)`; per-player MSE values are `;`-separated.
pub fn write_sweep_csv<W: Write>(out: W, result: &SweepResult, hash: &str) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for r in &result.records {
        w.write_record([
            hash.to_string(),
            r.seed.to_string(),
            result.axis.name().to_string(),
            num(r.axis_value),
            r.method.name().to_string(),
            num(r.network_mse_db),
            r.network_accuracy.map_or_else(|| "n/a".to_string(), num),
            num(r.mui_power_db),
            opt(r.converged),
            opt(r.iterations),
            r.mse_db.iter().map(|v| num(*v)).collect::<Vec<_>>().join(";"),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: &Path, trace: &GameTrace, scheme: Scheme, seed: u64, hash: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv(std::io::BufWriter::new(file), trace, scheme, seed, hash).map_err(csv_err(path))
}

pub fn write_sweep_file(path: &Path, result: &SweepResult, hash: &str) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_sweep_csv(std::io::BufWriter::new(file), result, hash).map_err(csv_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `F_<l>.txt` and `G_<l>.txt` for every link into `dir`.
pub fn write_transceivers(dir: &Path, states: &[TransceiverState], seed: u64, hash: &str) -> Result<()> {
    for (l, s) in states.iter().enumerate() {
        let meta = [
            ("config_hash", hash.to_string()),
            ("seed", seed.to_string()),
            ("link", l.to_string()),
        ];
        write_matrix(&dir.join(format!("F_{l}.txt")), &s.f, &meta)?;
        write_matrix(&dir.join(format!("G_{l}.txt")), &s.g, &meta)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary<'a> {
    pub schema_version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub scheme: Scheme,
    pub converged: bool,
    pub iterations: usize,
    pub final_mse: Vec<f64>,
    pub final_mse_db: Vec<f64>,
    pub final_payoff: Vec<f64>,
    pub final_mui_power_db: Vec<Option<f64>>,
    pub final_power: Vec<f64>,
    pub nash: Option<NashReport>,
    pub config: &'a ScenarioConfig,
}

impl<'a> RunSummary<'a> {
    pub fn new(
        config: &'a ScenarioConfig,
        seed: u64,
        scheme: Scheme,
        trace: &GameTrace,
        nash: Option<NashReport>,
    ) -> Self {
        let last = trace.records.last();
        let pick = |f: fn(&crate::game::IterationRecord) -> &Vec<f64>| last.map(|r| f(r).clone()).unwrap_or_default();
        let mse = pick(|r| &r.mse);
        RunSummary {
            schema_version: SCHEMA_VERSION,
            config_hash: config.hash(),
            seed,
            scheme,
            converged: trace.converged,
            iterations: trace.iterations_used,
            final_mse_db: mse.iter().map(|m| 10.0 * m.log10()).collect(),
            final_mse: mse,
            final_payoff: pick(|r| &r.payoff),
            final_mui_power_db: pick(|r| &r.mui_power_db)
                .into_iter()
                .map(|v| v.is_finite().then_some(v))
                .collect(),
            final_power: pick(|r| &r.power),
            nash,
            config,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary<'a> {
    pub schema_version: u32,
    pub config_hash: String,
    pub axis: Axis,
    pub axis_values: &'a [f64],
    pub methods: &'a [Method],
    pub seeds: &'a [u64],
    pub aggregates: Vec<AggregatePoint>,
    pub config: &'a ScenarioConfig,
}

impl<'a> SweepSummary<'a> {
    pub fn new(config: &'a ScenarioConfig, result: &'a SweepResult) -> Self {
        SweepSummary {
            schema_version: SCHEMA_VERSION,
            config_hash: config.hash(),
            axis: result.axis,
            axis_values: &result.axis_values,
            methods: &result.methods,
            seeds: &result.seeds,
            aggregates: result.aggregate(),
            config,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::SweepRecord;
    use crate::game::IterationRecord;

    fn trace() -> GameTrace {
        GameTrace {
            records: vec![IterationRecord {
                iteration: 1,
                mse: vec![0.5, 2.0],
                payoff: vec![1.0, 0.25],
                mui_power: vec![0.0, 1e-4],
                mui_power_db: vec![f64::NEG_INFINITY, -40.0],
                power: vec![10.0, 10.0],
                gamma: 1.0,
                residual: 0.125,
            }],
            converged: false,
            iterations_used: 1,
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace(), Scheme::Jacobi, 42, "abc").unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TRACE_HEADER.join(","));
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("abc,42,jacobi,1,0,0.5,"));
        assert!(lines[1].contains(",n/a,"));
        assert!(lines[2].contains(",-40,"));
    }

    #[test]
    fn sweep_csv_layout() {
        let result = SweepResult {
            axis: Axis::Alpha,
            axis_values: vec![3.0],
            methods: vec![Method::MuiLess],
            seeds: vec![7],
            records: vec![SweepRecord {
                axis_value: 3.0,
                method: Method::MuiLess,
                seed: 7,
                mse_db: vec![1.5, 2.5],
                network_mse_db: 2.0,
                network_accuracy: Some(0.75),
                mui_power_db: f64::NEG_INFINITY,
                converged: None,
                iterations: None,
            }],
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &result, "h").unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "h,7,alpha,3,mui-less,2,0.75,n/a,n/a,n/a,1.5;2.5"
        );
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1e-300, -3.25, 123456.789] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(f64::NAN), "n/a");
    }
}
