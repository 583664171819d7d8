//! Baselines, the task-accuracy proxy and parameter sweeps.
//!
//! Three methods are compared on the same channels and pilots:
//!
//! * `game`: the equilibrium of the power-allocation game, evaluated under the
//!   interference its own precoders create;
//! * `mui-less`: each link designed and evaluated as if it were alone, the
//!   interference-free bound;
//! * `mui-agnostic`: the same interference-blind design, evaluated under the
//!   interference the blind precoders actually create.

use std::sync::Arc;

use serde::Serialize;

use crate::channel::ChannelOp;
use crate::config::{Method, ScenarioConfig};
use crate::error::{Error, Result};
use crate::exec::{stream, Domain, Execution};
use crate::game::{run_game, to_db, waterfill, GameConfig, GameProblem, GameTrace};
use crate::linalg::{complex_gaussian, real, scaled_identity, CMat, RMat};
use crate::scenario::{Scenario, SeedData, TaskData};
use crate::semantics::unpair_columns;
use crate::transceiver::{pilot_objective, TransceiverState};

/// Interference power per channel use at receiver `l` in dB, negative infinity without rivals.
pub fn mui_power_db(problem: &GameProblem, l: usize, factors: &[CMat]) -> Result<f64> {
    if problem.links() < 2 {
        return Ok(f64::NEG_INFINITY);
    }
    let rn = problem.muin(l, factors)?;
    Ok(to_db(problem.mui_power(l, &rn)))
}

/// Closed-form design of every link with `Rn = σ²·I`.
pub fn mui_less_baseline(problem: &GameProblem) -> Result<Vec<TransceiverState>> {
    (0..problem.links())
        .map(|l| {
            let rn = scaled_identity(problem.players[l].link.rx_symbols(), problem.channels.sigma2);
            let (v, gains) = problem.response_basis(l, &rn)?;
            let phi = match waterfill(&gains.lambda, &gains.sigma2, gains.n, problem.players[l].link.budget()) {
                Ok(phi) => phi,
                Err(Error::Degenerate) => vec![0.0; gains.modes()],
                Err(e) => return Err(e),
            };
            let lambda = gains.lambda.iter().map(|x| x / gains.n as f64).collect();
            problem.transceiver(l, &v, &phi, rn, lambda)
        })
        .collect()
}

/// The interference-blind design. Its transceivers are those of
/// [`mui_less_baseline`]; only the evaluation differs.
pub fn mui_agnostic_baseline(problem: &GameProblem) -> Result<Vec<TransceiverState>> {
    mui_less_baseline(problem)
}

/// Transmit factors whose outer products equal each precoder's `F·Fᴴ`.
fn factors(states: &[TransceiverState]) -> Vec<CMat> {
    states.iter().map(|s| s.tx_factor()).collect()
}

/// Fraction of test latents classified correctly after transmission over link `l`.
///
/// Each test latent is precoded, sent through the direct channel, hit by
/// independent unit-covariance symbols of every rival (when `interference` is
/// set) and by receiver noise, equalized, unpaired and assigned to the nearest
/// receiver-space class mean. Random draws depend only on `(seed, l)`, so methods
/// compared on one scenario see the same noise.
pub fn task_proxy_accuracy(
    problem: &GameProblem,
    states: &[TransceiverState],
    task: &TaskData,
    l: usize,
    interference: bool,
    seed: u64,
) -> Result<f64> {
    let count = task.test.len();
    if count == 0 {
        return Err(Error::domain("test set is empty"));
    }
    let links = problem.links();
    let h = &problem.channels.direct[l];
    let mut r = h.apply(&(&states[l].f * &task.test.x));
    if interference {
        for (j, hj) in problem.channels.interferers(l) {
            let mut rng = stream(seed, Domain::Transmission, (l * links + j) as u64);
            let symbols = complex_gaussian(&mut rng, states[j].f.ncols(), count);
            r += hj.apply(&(&states[j].f * symbols));
        }
    }
    let mut rng = stream(seed, Domain::Transmission, (links * links + l) as u64);
    r += complex_gaussian(&mut rng, r.nrows(), count) * real(problem.channels.sigma2.sqrt());
    let estimate = unpair_columns(&(&states[l].g * r));
    Ok(nearest_mean_accuracy(&estimate, &task.rx_means, &task.test.labels))
}

/// Share of columns of `samples` whose nearest column of `means` carries their label.
pub fn nearest_mean_accuracy(samples: &RMat, means: &RMat, labels: &[usize]) -> f64 {
    let hits = samples
        .column_iter()
        .zip(labels)
        .filter(|(s, &label)| {
            let mut best = (f64::INFINITY, usize::MAX);
            for (c, m) in means.column_iter().enumerate() {
                let d = (s - m).norm_squared();
                if d < best.0 {
                    best = (d, c);
                }
            }
            best.1 == label
        })
        .count();
    hits as f64 / labels.len() as f64
}

/// Result of one method on one scenario.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub method: Method,
    pub states: Vec<TransceiverState>,
    /// Per-player pilot MSE, linear scale.
    pub mse: Vec<f64>,
    /// Per-player task accuracy; `None` without labelled test data.
    pub accuracy: Option<Vec<f64>>,
    /// Per-player interference power per channel use in watts, zero for `mui-less`.
    pub mui_power: Vec<f64>,
    pub trace: Option<GameTrace>,
}

impl MethodOutcome {
    pub fn mse_db(&self) -> Vec<f64> {
        self.mse.iter().map(|m| to_db(*m)).collect()
    }

    /// Mean per-player MSE in dB.
    pub fn network_mse_db(&self) -> f64 {
        to_db(mean(&self.mse))
    }

    pub fn network_accuracy(&self) -> Option<f64> {
        self.accuracy.as_ref().map(|a| mean(a))
    }

    /// Mean per-player interference power in dB.
    pub fn mui_power_db(&self) -> f64 {
        to_db(mean(&self.mui_power))
    }

    pub fn converged(&self) -> Option<bool> {
        self.trace.as_ref().map(|t| t.converged)
    }

    pub fn iterations(&self) -> Option<usize> {
        self.trace.as_ref().map(|t| t.iterations_used)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs `method` on `scenario` and evaluates pilot MSE and task accuracy.
pub fn evaluate(scenario: &Scenario, method: Method, game: &GameConfig, exec: Execution) -> Result<MethodOutcome> {
    let problem = scenario.problem()?;
    let seed = scenario.seed();
    let (states, trace) = match method {
        Method::Game => {
            let out = run_game(&problem, game, seed, exec)?;
            (out.states, Some(out.trace))
        }
        Method::MuiLess => (mui_less_baseline(&problem)?, None),
        Method::MuiAgnostic => (mui_agnostic_baseline(&problem)?, None),
    };
    let interference = method != Method::MuiLess;
    let fs = factors(&states);
    let links = problem.links();
    let mut mse = Vec::with_capacity(links);
    let mut mui_power = Vec::with_capacity(links);
    for (l, state) in states.iter().enumerate() {
        let rn = if interference {
            problem.muin(l, &fs)?
        } else {
            scaled_identity(problem.players[l].link.rx_symbols(), problem.channels.sigma2)
        };
        let player = &problem.players[l];
        mse.push(pilot_objective(
            &state.f,
            &state.g,
            &problem.channels.direct[l],
            &rn,
            &problem.pilots[l].p,
            player.sy,
            player.n,
        )?);
        mui_power.push(problem.mui_power(l, &rn));
    }
    let accuracy = if scenario.data.tasks.iter().all(Option::is_some) {
        let acc = (0..links)
            .map(|l| {
                let task = scenario.data.tasks[l].as_ref().expect("checked above");
                task_proxy_accuracy(&problem, &states, task, l, interference, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        Some(acc)
    } else {
        None
    };
    Ok(MethodOutcome {
        method,
        states,
        mse,
        accuracy,
        mui_power,
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    /// Compression factor `K·N_T / (d/2)`.
    Xi,
    /// Interferer distance over intended-link distance.
    Alpha,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Xi => "xi",
            Axis::Alpha => "alpha",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi" => Ok(Axis::Xi),
            "alpha" => Ok(Axis::Alpha),
            other => Err(Error::domain(format!("unknown sweep axis `{other}` (expected xi or alpha)"))),
        }
    }
}

/// One `(axis value, method, seed)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub axis_value: f64,
    pub method: Method,
    pub seed: u64,
    pub mse_db: Vec<f64>,
    pub network_mse_db: f64,
    pub network_accuracy: Option<f64>,
    pub mui_power_db: f64,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

/// Seed statistics of one `(axis value, method)` pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatePoint {
    pub axis_value: f64,
    pub method: Method,
    pub mse_db_mean: f64,
    pub mse_db_min: f64,
    pub mse_db_max: f64,
    pub accuracy_mean: Option<f64>,
    pub accuracy_min: Option<f64>,
    pub accuracy_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axis: Axis,
    pub axis_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Ordered by axis value, then method, then seed.
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn records_for(&self, axis_value: f64, method: Method) -> impl Iterator<Item = &SweepRecord> {
        self.records
            .iter()
            .filter(move |r| r.axis_value == axis_value && r.method == method)
    }

    pub fn aggregate(&self) -> Vec<AggregatePoint> {
        let mut out = Vec::new();
        for &x in &self.axis_values {
            for &m in &self.methods {
                let cells: Vec<&SweepRecord> = self.records_for(x, m).collect();
                let mse: Vec<f64> = cells.iter().map(|r| r.network_mse_db).collect();
                let acc: Option<Vec<f64>> = cells.iter().map(|r| r.network_accuracy).collect();
                let (amean, amin, amax) = match acc {
                    Some(a) if !a.is_empty() => (Some(mean(&a)), Some(min(&a)), Some(max(&a))),
                    _ => (None, None, None),
                };
                out.push(AggregatePoint {
                    axis_value: x,
                    method: m,
                    mse_db_mean: mean(&mse),
                    mse_db_min: min(&mse),
                    mse_db_max: max(&mse),
                    accuracy_mean: amean,
                    accuracy_min: amin,
                    accuracy_max: amax,
                });
            }
        }
        out
    }

    pub fn point(&self, axis_value: f64, method: Method) -> Option<AggregatePoint> {
        self.aggregate()
            .into_iter()
            .find(|p| p.axis_value == axis_value && p.method == method)
    }
}

fn min(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn record(axis_value: f64, seed: u64, out: &MethodOutcome) -> SweepRecord {
    SweepRecord {
        axis_value,
        method: out.method,
        seed,
        mse_db: out.mse_db(),
        network_mse_db: out.network_mse_db(),
        network_accuracy: out.network_accuracy(),
        mui_power_db: out.mui_power_db(),
        converged: out.converged(),
        iterations: out.iterations(),
    }
}

/// Runs every `(axis value, method, seed)` cell.
///
/// Seeds are processed one after another so that only one seed's pilot data is
/// alive at a time; the cells of a seed run through `exec`, each internally
/// sequential.
pub fn sweep(
    cfg: &ScenarioConfig,
    axis: Axis,
    values: &[f64],
    methods: &[Method],
    seeds: &[u64],
    exec: Execution,
) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::config(
            match axis {
                Axis::Xi => "experiment.xi_values",
                Axis::Alpha => "experiment.alpha_values",
            },
            "the sweep has no values",
        ));
    }
    let cell_cfgs: Vec<(ScenarioConfig, Option<f64>)> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| match axis {
            Axis::Xi => {
                let k = cfg
                    .uses_for_xi(v)
                    .map_err(|msg| Error::config(format!("experiment.xi_values[{i}]"), msg))?;
                Ok((cfg.with_uses(k), None))
            }
            Axis::Alpha => {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(format!("experiment.alpha_values[{i}]"), "must be positive"));
                }
                crate::scenario::topology(cfg, Some(v))?;
                Ok((cfg.clone(), Some(v)))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut by_seed = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let data = Arc::new(SeedData::generate(cfg, seed, exec)?);
        let cells = exec.map(values.len() * methods.len(), |idx| -> Result<SweepRecord> {
            let (vi, mi) = (idx / methods.len(), idx % methods.len());
            let (c, alpha) = &cell_cfgs[vi];
            let scenario = Scenario::with_data(c, *alpha, data.clone())?;
            let out = evaluate(&scenario, methods[mi], &cfg.game, Execution::Sequential)?;
            Ok(record(values[vi], seed, &out))
        });
        by_seed.push(cells.into_iter().collect::<Result<Vec<_>>>()?);
    }

    let mut records = Vec::with_capacity(values.len() * methods.len() * seeds.len());
    for vi in 0..values.len() {
        for mi in 0..methods.len() {
            for cells in &by_seed {
                records.push(cells[vi * methods.len() + mi].clone());
            }
        }
    }
    Ok(SweepResult {
        axis,
        axis_values: values.to_vec(),
        methods: methods.to_vec(),
        seeds: seeds.to_vec(),
        records,
    })
}

pub fn sweep_alpha(
    cfg: &ScenarioConfig,
    alphas: &[f64],
    methods: &[Method],
    seeds: &[u64],
    exec: Execution,
) -> Result<SweepResult> {
    sweep(cfg, Axis::Alpha, alphas, methods, seeds, exec)
}

pub fn sweep_compression(
    cfg: &ScenarioConfig,
    xis: &[f64],
    methods: &[Method],
    seeds: &[u64],
    exec: Execution,
) -> Result<SweepResult> {
    sweep(cfg, Axis::Xi, xis, methods, seeds, exec)
}
