//! Non-cooperative power-allocation game between links.
//!
//! Each player owns the per-mode powers `φ_l` of its precoder
//! `F_l = V_l·diag(√φ_l)·Q̃_lᴴ`. Its best response to fixed rivals is the
//! water-filling solution over the eigenmodes of its effective channel. Players
//! update sequentially (Gauss-Seidel) or simultaneously (Jacobi), blending the
//! best response into their current powers with a diminishing step size.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelOp, ChannelSet, LiftedChannel};
use crate::error::{Error, Result};
use crate::exec::{stream, Domain, Execution};
use crate::linalg::{complex_gaussian, frob2, real, trace_re, CMat};
use crate::link::LinkConfig;
use crate::semantics::{CrossCovarianceSvd, SemanticPilots, Truncation};
use crate::transceiver::{
    assemble_precoder, eig_descending, effective_channel_cov, muin_covariance, structured_mse, tx_factor,
    wiener_equalizer, ModeGains, TransceiverState,
};

/// Smallest step size the schedule may reach.
pub const MIN_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Players update one after another, each seeing the freshest rivals.
    #[default]
    GaussSeidel,
    /// Players respond to the previous round's snapshot and commit together.
    Jacobi,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::GaussSeidel => "gauss-seidel",
            Scheme::Jacobi => "jacobi",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gauss-seidel" => Ok(Scheme::GaussSeidel),
            "jacobi" => Ok(Scheme::Jacobi),
            other => Err(Error::domain(format!(
                "unknown scheme `{other}` (expected gauss-seidel or jacobi)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GameConfig {
    pub scheme: Scheme,
    pub max_iterations: usize,
    /// Threshold on the max-norm of the power change between iterations.
    pub tolerance: f64,
    pub gamma0: f64,
    pub epsilon: f64,
    /// Random deviations tried per player when verifying an equilibrium.
    pub ne_check_trials: usize,
    /// Relative payoff slack accepted by the equilibrium check.
    pub ne_tolerance: f64,
}

impl Default for GameConfig {
    fn default() -> Self {
        GameConfig {
            scheme: Scheme::GaussSeidel,
            max_iterations: 1000,
            tolerance: 1e-5,
            gamma0: 1.0,
            epsilon: 0.01,
            ne_check_trials: 1000,
            ne_tolerance: 1e-6,
        }
    }
}

impl GameConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let field = |f: &str| format!("{path}.{f}");
        if !(self.gamma0 > 0.0 && self.gamma0 <= 1.0) {
            return Err(Error::config(field("gamma0"), format!("must lie in (0, 1], got {}", self.gamma0)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config(field("epsilon"), format!("must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.tolerance >= 0.0) || !self.tolerance.is_finite() {
            return Err(Error::config(field("tolerance"), "must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config(field("max_iterations"), "must be at least 1"));
        }
        if self.ne_check_trials == 0 {
            return Err(Error::config(field("ne_check_trials"), "must be at least 1"));
        }
        if !(self.ne_tolerance >= 0.0) {
            return Err(Error::config(field("ne_tolerance"), "must be non-negative"));
        }
        Ok(())
    }
}

fn check_gains(lambda: &[f64], sigma2: &[f64], n: usize) -> Result<()> {
    if lambda.len() != sigma2.len() {
        return Err(Error::domain(format!(
            "{} eigenvalues but {} semantic gains",
            lambda.len(),
            sigma2.len()
        )));
    }
    if lambda.iter().chain(sigma2).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::domain("mode gains must be finite and non-negative"));
    }
    if n == 0 {
        return Err(Error::domain("pilot count must be positive"));
    }
    Ok(())
}

/// Per-mode powers at multiplier `mu`:
/// `φ_m = [(σ_m·√(λ_m/(n·μ)) − 1)/λ_m]_+`, zero for dead modes.
pub fn powers_at(mu: f64, lambda: &[f64], sigma2: &[f64], n: usize) -> Vec<f64> {
    let nf = n as f64;
    lambda
        .iter()
        .zip(sigma2)
        .map(|(&l, &s2)| {
            if l <= 0.0 || s2 <= 0.0 {
                0.0
            } else {
                ((s2.sqrt() * (l / (nf * mu)).sqrt() - 1.0) / l).max(0.0)
            }
        })
        .collect()
}

/// Multiplier of the budget constraint of the water-filling problem.
///
/// Bisects on `(0, μ_max]` where `μ_max = max σ²λ/n`, then solves the power
/// equation in closed form on the active set the bisection identified.
pub fn waterfill_mu(lambda: &[f64], sigma2: &[f64], n: usize, budget: f64) -> Result<f64> {
    check_gains(lambda, sigma2, n)?;
    if !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::domain(format!("budget must be positive, got {budget}")));
    }
    let nf = n as f64;
    let mu_max = lambda
        .iter()
        .zip(sigma2)
        .map(|(l, s)| l * s / nf)
        .fold(0.0, f64::max);
    if mu_max <= 0.0 {
        return Err(Error::Degenerate);
    }
    let total = |mu: f64| powers_at(mu, lambda, sigma2, n).iter().sum::<f64>();

    let mut hi = mu_max;
    let mut lo = mu_max / 2.0;
    while total(lo) < budget {
        hi = lo;
        lo /= 2.0;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::Numerical("water-filling bracket collapsed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= 1e-15 * hi {
            break;
        }
    }

    let phi = powers_at(lo, lambda, sigma2, n);
    let active: Vec<usize> = (0..phi.len()).filter(|&m| phi[m] > 0.0).collect();
    let inv_sum: f64 = active.iter().map(|&m| 1.0 / lambda[m]).sum();
    let root_sum: f64 = active.iter().map(|&m| sigma2[m].sqrt() / lambda[m].sqrt()).sum();
    if root_sum > 0.0 {
        let t = (budget + inv_sum) / root_sum;
        let mu = 1.0 / (nf * t * t);
        let consistent = (0..phi.len()).all(|m| {
            let v = lambda[m] * sigma2[m] / nf;
            if active.contains(&m) {
                v > mu
            } else {
                v <= mu
            }
        });
        if consistent && mu > 0.0 && mu <= mu_max {
            return Ok(mu);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Power allocation maximizing `(1/n)·Σ φ_m·λ_m·σ²_m/(φ_m·λ_m + 1)` subject to `Σφ ≤ budget`.
pub fn waterfill(lambda: &[f64], sigma2: &[f64], n: usize, budget: f64) -> Result<Vec<f64>> {
    check_gains(lambda, sigma2, n)?;
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::domain(format!("budget must be non-negative, got {budget}")));
    }
    if budget == 0.0 {
        return Ok(vec![0.0; lambda.len()]);
    }
    let mu = waterfill_mu(lambda, sigma2, n, budget)?;
    Ok(powers_at(mu, lambda, sigma2, n))
}

/// Largest violation of the water-filling optimality conditions at `(φ, μ)`.
pub fn kkt_residual(phi: &[f64], lambda: &[f64], sigma2: &[f64], n: usize, mu: f64) -> f64 {
    let nf = n as f64;
    let mut worst: f64 = 0.0;
    for ((&p, &l), &s2) in phi.iter().zip(lambda).zip(sigma2) {
        let marginal = s2 * l / (nf * (p * l + 1.0).powi(2));
        let violation = if p > 0.0 {
            (marginal - mu).abs()
        } else {
            (marginal - mu).max(0.0)
        };
        worst = worst.max(violation);
    }
    worst
}

/// `φ + γ·(φ̂ − φ)`.
pub fn step_blend(phi: &[f64], phi_hat: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::domain(format!("step size must lie in (0, 1], got {gamma}")));
    }
    if phi.len() != phi_hat.len() {
        return Err(Error::domain("power vectors differ in length"));
    }
    Ok(phi
        .iter()
        .zip(phi_hat)
        .map(|(&a, &b)| if gamma == 1.0 { b } else { (a + gamma * (b - a)).max(0.0) })
        .collect())
}

/// `γ·(1 − ε·γ)`, never below [`MIN_STEP`].
pub fn step_size_update(gamma: f64, epsilon: f64) -> f64 {
    (gamma * (1.0 - epsilon * gamma)).max(MIN_STEP)
}

/// Static data of one player.
#[derive(Debug, Clone)]
pub struct Player {
    pub link: LinkConfig,
    /// Rank `K·N_T` truncation of the player's cross-covariance.
    pub trunc: Truncation,
    pub n: usize,
    pub sy: f64,
}

/// Channels plus per-player data; everything the game needs besides the schedule.
#[derive(Debug, Clone)]
pub struct GameProblem<'a> {
    pub channels: &'a ChannelSet,
    pub pilots: &'a [SemanticPilots],
    pub players: Vec<Player>,
}

impl<'a> GameProblem<'a> {
    pub fn new(channels: &'a ChannelSet, pilots: &'a [SemanticPilots], links: &[LinkConfig]) -> Result<Self> {
        let svds = pilots
            .iter()
            .map(|p| CrossCovarianceSvd::new(&p.p))
            .collect::<Result<Vec<_>>>()?;
        Self::with_svds(channels, pilots, links, &svds)
    }

    /// Builds the problem from precomputed singular value decompositions of each `P_l`.
    pub fn with_svds(
        channels: &'a ChannelSet,
        pilots: &'a [SemanticPilots],
        links: &[LinkConfig],
        svds: &[CrossCovarianceSvd],
    ) -> Result<Self> {
        let l = channels.links();
        if links.len() != l || pilots.len() != l || svds.len() != l {
            return Err(Error::config(
                "links",
                format!(
                    "{} links, {} channel pairs, {} pilot sets",
                    links.len(),
                    l,
                    pilots.len()
                ),
            ));
        }
        let mut players = Vec::with_capacity(l);
        for (i, link) in links.iter().enumerate() {
            link.validate(&format!("links[{i}]"))?;
            let h = &channels.direct[i];
            let pil = &pilots[i];
            if h.cols() != link.modes() || h.rows() != link.rx_symbols() {
                return Err(Error::config(format!("links[{i}]"), "channel size does not match the link"));
            }
            if pil.p.shape() != (link.rx_complex_dim(), link.tx_complex_dim()) {
                return Err(Error::config(
                    format!("links[{i}]"),
                    "pilot dimensions do not match the link's d and m",
                ));
            }
            players.push(Player {
                link: link.clone(),
                trunc: svds[i].truncate(link.modes())?,
                n: pil.n,
                sy: pil.sy,
            });
        }
        Ok(GameProblem {
            channels,
            pilots,
            players,
        })
    }

    pub fn links(&self) -> usize {
        self.players.len()
    }

    /// MUIN covariance at receiver `l` for the given transmit factors.
    pub fn muin(&self, l: usize, factors: &[CMat]) -> Result<CMat> {
        let rivals: Vec<(&LiftedChannel, &CMat)> =
            self.channels.interferers(l).map(|(j, h)| (h, &factors[j])).collect();
        muin_covariance(&rivals, self.channels.sigma2, self.players[l].link.rx_symbols())
    }

    /// Eigen-structure and payoff gains of player `l` under the MUIN covariance `rn`.
    pub fn response_basis(&self, l: usize, rn: &CMat) -> Result<(CMat, ModeGains)> {
        let player = &self.players[l];
        let rh = effective_channel_cov(&self.channels.direct[l], rn, player.n)?;
        let (v, lam) = eig_descending(&rh)?;
        let gains = ModeGains::from_decompositions(&lam, &player.trunc, player.n, player.sy)?;
        Ok((v, gains))
    }

    /// Best response of player `l` to the rivals' transmit factors.
    pub fn best_response(&self, l: usize, factors: &[CMat]) -> Result<BestResponse> {
        let rn = self.muin(l, factors)?;
        let (v, gains) = self.response_basis(l, &rn)?;
        let phi = match waterfill(&gains.lambda, &gains.sigma2, gains.n, self.players[l].link.budget()) {
            Ok(phi) => phi,
            Err(Error::Degenerate) => vec![0.0; gains.modes()],
            Err(e) => return Err(e),
        };
        Ok(BestResponse { phi, v, gains, rn })
    }

    /// Closed-form transceiver of player `l` with powers `phi` on basis `v`.
    pub fn transceiver(&self, l: usize, v: &CMat, phi: &[f64], rn: CMat, lambda: Vec<f64>) -> Result<TransceiverState> {
        let player = &self.players[l];
        let f = assemble_precoder(v, phi, &player.trunc.q)?;
        let g = wiener_equalizer(&self.pilots[l].p, &self.channels.direct[l], &f, &rn, player.n)?;
        Ok(TransceiverState {
            f,
            g,
            phi: phi.to_vec(),
            rn,
            v: v.clone(),
            lambda,
        })
    }

    /// Exact pilot MSE of player `l` for powers `phi` on basis `v` under `rn`.
    pub fn mse(&self, l: usize, v: &CMat, phi: &[f64], rn: &CMat) -> Result<f64> {
        let player = &self.players[l];
        structured_mse(&self.channels.direct[l], v, phi, &player.trunc, rn, player.sy, player.n)
    }

    /// Interference power per channel use at receiver `l`, watts.
    pub fn mui_power(&self, l: usize, rn: &CMat) -> f64 {
        let dim = self.players[l].link.rx_symbols();
        let k = self.players[l].link.k as f64;
        ((trace_re(rn) - self.channels.sigma2 * dim as f64) / k).max(0.0)
    }
}

#[derive(Debug, Clone)]
pub struct BestResponse {
    pub phi: Vec<f64>,
    /// Eigenvectors of the effective channel covariance.
    pub v: CMat,
    pub gains: ModeGains,
    pub rn: CMat,
}

/// One row of the game trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub mse: Vec<f64>,
    /// `(1/n)·S_y − MSE_l`, the payoff realized by the current transceiver.
    pub payoff: Vec<f64>,
    pub mui_power: Vec<f64>,
    pub mui_power_db: Vec<f64>,
    pub power: Vec<f64>,
    pub gamma: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
    pub iterations_used: usize,
}

#[derive(Debug, Clone)]
pub struct GameOutcome {
    pub states: Vec<TransceiverState>,
    pub trace: GameTrace,
}

impl GameOutcome {
    /// Per-player pilot MSE at the final state.
    pub fn final_mse(&self) -> Vec<f64> {
        self.trace.records.last().map(|r| r.mse.clone()).unwrap_or_default()
    }
}

/// Power in decibels; zero power maps to negative infinity.
pub fn to_db(watts: f64) -> f64 {
    10.0 * watts.log10()
}

/// Initial precoder: complex Gaussian entries rescaled to `‖F‖² = K·P_max`.
pub fn initial_precoder(link: &LinkConfig, seed: u64, l: usize) -> CMat {
    let mut rng = stream(seed, Domain::Init, l as u64);
    let f = complex_gaussian(&mut rng, link.modes(), link.tx_complex_dim());
    let scale = (link.budget() / frob2(&f)).sqrt();
    f * real(scale)
}

struct PlayerState {
    phi: Vec<f64>,
    v: CMat,
    lambda: Vec<f64>,
}

/// Runs best-response dynamics until the powers settle or the iteration cap is hit.
///
/// The initial powers are the equal split `K·P_max / (K·N_T)`, the per-mode
/// power that the random initial precoder carries on average; rivals see the
/// random precoder itself until their first update.
pub fn run_game(problem: &GameProblem, config: &GameConfig, seed: u64, exec: Execution) -> Result<GameOutcome> {
    config.validate("game")?;
    let links = problem.links();
    let mut factors: Vec<CMat> = problem
        .players
        .iter()
        .enumerate()
        .map(|(l, p)| initial_precoder(&p.link, seed, l))
        .collect();
    let mut states: Vec<Option<PlayerState>> = (0..links).map(|_| None).collect();
    let mut phis: Vec<Vec<f64>> = problem
        .players
        .iter()
        .map(|p| vec![p.link.budget() / p.link.modes() as f64; p.link.modes()])
        .collect();

    let mut records = Vec::new();
    let mut gamma = config.gamma0;
    let mut converged = false;

    for t in 1..=config.max_iterations {
        let mut residual: f64 = 0.0;
        match config.scheme {
            Scheme::GaussSeidel => {
                for l in 0..links {
                    let br = problem.best_response(l, &factors)?;
                    let next = step_blend(&phis[l], &br.phi, gamma)?;
                    residual = residual.max(max_change(&phis[l], &next));
                    factors[l] = tx_factor(&br.v, &next);
                    phis[l] = next;
                    states[l] = Some(PlayerState {
                        phi: phis[l].clone(),
                        v: br.v,
                        lambda: br.gains.lambda.iter().map(|x| x / br.gains.n as f64).collect(),
                    });
                }
            }
            Scheme::Jacobi => {
                let responses = exec.map(links, |l| problem.best_response(l, &factors));
                for (l, br) in responses.into_iter().enumerate() {
                    let br = br?;
                    let next = step_blend(&phis[l], &br.phi, gamma)?;
                    residual = residual.max(max_change(&phis[l], &next));
                    factors[l] = tx_factor(&br.v, &next);
                    phis[l] = next;
                    states[l] = Some(PlayerState {
                        phi: phis[l].clone(),
                        v: br.v,
                        lambda: br.gains.lambda.iter().map(|x| x / br.gains.n as f64).collect(),
                    });
                }
            }
        }

        let metrics = exec.map(links, |l| -> Result<(f64, f64, f64)> {
            let st = states[l].as_ref().expect("every player responded");
            let rn = problem.muin(l, &factors)?;
            let mse = problem.mse(l, &st.v, &st.phi, &rn)?;
            let player = &problem.players[l];
            Ok((mse, player.sy / player.n as f64 - mse, problem.mui_power(l, &rn)))
        });
        let metrics = metrics.into_iter().collect::<Result<Vec<_>>>()?;
        records.push(IterationRecord {
            iteration: t,
            mse: metrics.iter().map(|m| m.0).collect(),
            payoff: metrics.iter().map(|m| m.1).collect(),
            mui_power: metrics.iter().map(|m| m.2).collect(),
            mui_power_db: metrics.iter().map(|m| to_db(m.2)).collect(),
            power: phis.iter().map(|p| p.iter().sum()).collect(),
            gamma,
            residual,
        });

        if residual < config.tolerance {
            converged = true;
            break;
        }
        gamma = step_size_update(gamma, config.epsilon);
    }

    let iterations_used = records.len();
    let finals = exec.map(links, |l| -> Result<TransceiverState> {
        let st = states[l].as_ref().expect("at least one iteration ran");
        let rn = problem.muin(l, &factors)?;
        problem.transceiver(l, &st.v, &st.phi, rn, st.lambda.clone())
    });
    Ok(GameOutcome {
        states: finals.into_iter().collect::<Result<Vec<_>>>()?,
        trace: GameTrace {
            records,
            converged,
            iterations_used,
        },
    })
}

fn max_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerNashReport {
    pub payoff: f64,
    pub best_response_payoff: f64,
    /// Largest payoff gain over all candidates, relative to `|payoff|`.
    pub improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashReport {
    pub is_ne: bool,
    pub worst_improvement: f64,
    pub players: Vec<PlayerNashReport>,
}

/// Uniform point of `{φ ≥ 0 : Σφ ≤ budget}` scaled by a uniform budget fraction.
pub fn random_deviation<R: Rng + ?Sized>(rng: &mut R, modes: usize, budget: f64) -> Vec<f64> {
    let e: Vec<f64> = (0..modes).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = e.iter().sum();
    let fraction: f64 = rng.random();
    e.into_iter().map(|x| x / total * fraction * budget).collect()
}

/// Checks that no player can raise its payoff by deviating unilaterally.
///
/// Candidates per player are the exact best response against the final
/// rivals and `trials` random feasible power vectors. Improvements are measured
/// relative to the player's current payoff.
pub fn verify_nash(
    problem: &GameProblem,
    states: &[TransceiverState],
    trials: usize,
    tolerance: f64,
    seed: u64,
) -> Result<NashReport> {
    if trials == 0 {
        return Err(Error::domain("at least one trial is required"));
    }
    if states.len() != problem.links() {
        return Err(Error::domain("one state per player is required"));
    }
    let factors: Vec<CMat> = states.iter().map(|s| s.tx_factor()).collect();
    let mut players = Vec::with_capacity(states.len());
    for (l, state) in states.iter().enumerate() {
        let br = problem.best_response(l, &factors)?;
        let current = br.gains.payoff(&state.phi)?;
        let best = br.gains.payoff(&br.phi)?;
        let budget = problem.players[l].link.budget();
        let mut rng = stream(seed, Domain::Nash, l as u64);
        let mut top = best;
        for _ in 0..trials {
            let cand = random_deviation(&mut rng, br.gains.modes(), budget);
            top = top.max(br.gains.payoff(&cand)?);
        }
        let scale = current.abs().max(f64::MIN_POSITIVE);
        players.push(PlayerNashReport {
            payoff: current,
            best_response_payoff: best,
            improvement: (top - current) / scale,
        });
    }
    let worst = players.iter().map(|p| p.improvement).fold(f64::NEG_INFINITY, f64::max);
    Ok(NashReport {
        is_ne: worst <= tolerance,
        worst_improvement: worst,
        players,
    })
}
