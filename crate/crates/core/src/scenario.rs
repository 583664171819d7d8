//! Turns a configuration and a seed into channels, pilots and test data.
//!
//! Pilot data does not depend on node positions or on the number of channel
//! uses, so [`SeedData`] is generated once per seed and shared by every point of
//! a sweep.

use std::sync::Arc;

use crate::channel::{build_channel_set, noise_power_for_snr, ChannelSet, Topology};
use crate::config::{Layout, ScenarioConfig};
use crate::error::{Error, Result};
use crate::exec::{stream, Domain, Execution};
use crate::game::GameProblem;
use crate::linalg::RMat;
use crate::link::LinkConfig;
use crate::matrix_io::read_matrix;
use crate::semantics::{synthesize_latents, CrossCovarianceSvd, LatentModel, SemanticPilots, TestSet};

/// Labelled held-out data of one link.
#[derive(Debug, Clone)]
pub struct TaskData {
    pub test: TestSet,
    /// Class means in the receiver's real latent space, one column per class.
    pub rx_means: RMat,
}

/// Everything drawn from a seed that is independent of geometry and `K`.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    pub pilots: Vec<SemanticPilots>,
    pub svds: Vec<CrossCovarianceSvd>,
    /// Absent for imported pilots, which carry no labels.
    pub tasks: Vec<Option<TaskData>>,
}

impl SeedData {
    pub fn generate(cfg: &ScenarioConfig, seed: u64, exec: Execution) -> Result<Self> {
        let links = cfg.links.len();
        let per_link: Vec<Result<(SemanticPilots, Option<TaskData>)>> = match &cfg.latent.pilot_files {
            Some(files) => exec.map(links, |l| {
                let tx = read_matrix(&files[l].tx)?;
                let rx = read_matrix(&files[l].rx)?;
                let link = &cfg.links[l];
                if tx.nrows() != link.tx_complex_dim() || rx.nrows() != link.rx_complex_dim() || tx.ncols() != rx.ncols() {
                    return Err(Error::config(
                        format!("latent.pilot_files[{l}]"),
                        format!(
                            "matrices are {}x{} and {}x{}, expected d/2 = {} and m/2 = {} rows with equal columns",
                            tx.nrows(),
                            tx.ncols(),
                            rx.nrows(),
                            rx.ncols(),
                            link.tx_complex_dim(),
                            link.rx_complex_dim()
                        ),
                    ));
                }
                Ok((SemanticPilots::from_raw(&tx, rx, None, l)?, None))
            }),
            None => {
                let params = cfg.latent.params();
                let class_means = params.class_means(&mut stream(seed, Domain::Dataset, 0));
                exec.map(links, |l| {
                    let link = &cfg.links[l];
                    let mut mix_rng = stream(seed, Domain::Dataset, 1 + l as u64);
                    let model = LatentModel::random(params.clone(), class_means.clone(), link.d, link.m, &mut mix_rng)?;
                    let mut rng = stream(seed, Domain::Pilots, l as u64);
                    let (pilots, test) =
                        synthesize_latents(&model, cfg.latent.pilots, cfg.latent.test_samples, l, &mut rng)?;
                    Ok((
                        pilots,
                        Some(TaskData {
                            test,
                            rx_means: model.rx_class_means(),
                        }),
                    ))
                })
            }
        };
        let mut pilots = Vec::with_capacity(links);
        let mut tasks = Vec::with_capacity(links);
        for r in per_link {
            let (p, t) = r?;
            pilots.push(p);
            tasks.push(t);
        }
        let svds = exec
            .map(links, |l| CrossCovarianceSvd::new(&pilots[l].p))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(SeedData {
            seed,
            pilots,
            svds,
            tasks,
        })
    }
}

/// Node positions and noise power; `alpha` overrides the spacing of a linear layout.
pub fn topology(cfg: &ScenarioConfig, alpha: Option<f64>) -> Result<Topology> {
    let t = &cfg.topology;
    let (tx, rx) = match (&t.layout, alpha) {
        (Layout::Linear { tx_rx_distance, spacing }, a) => {
            let spacing = a.map_or(*spacing, |a| a * tx_rx_distance);
            let lin = Topology::linear(cfg.links.len(), *tx_rx_distance, spacing, 0.0, 0.0, 0.0);
            (lin.tx, lin.rx)
        }
        (Layout::Explicit { tx, rx }, None) => (tx.clone(), rx.clone()),
        (Layout::Explicit { .. }, Some(_)) => {
            return Err(Error::config(
                "topology.layout",
                "an alpha sweep repositions transmitters along a line and needs the linear layout",
            ))
        }
    };
    let noise_power = noise_power_for_snr(&tx, &rx, &cfg.links, t.path_loss_exponent, t.reference_distance, t.snr_db)?;
    let topo = Topology {
        tx,
        rx,
        path_loss_exponent: t.path_loss_exponent,
        rice_factor: t.rice_factor,
        reference_distance: t.reference_distance,
        noise_power,
    };
    topo.validate()?;
    Ok(topo)
}

/// One fully drawn scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub links: Vec<LinkConfig>,
    pub topology: Topology,
    pub channels: ChannelSet,
    pub data: Arc<SeedData>,
}

impl Scenario {
    pub fn build(cfg: &ScenarioConfig, seed: u64, exec: Execution) -> Result<Self> {
        let data = Arc::new(SeedData::generate(cfg, seed, exec)?);
        Self::with_data(cfg, None, data)
    }

    /// Scenario on previously generated seed data, optionally at a different `α`.
    pub fn with_data(cfg: &ScenarioConfig, alpha: Option<f64>, data: Arc<SeedData>) -> Result<Self> {
        let topology = topology(cfg, alpha)?;
        let channels = build_channel_set(&topology, &cfg.links, data.seed)?;
        Ok(Scenario {
            links: cfg.links.clone(),
            topology,
            channels,
            data,
        })
    }

    pub fn seed(&self) -> u64 {
        self.data.seed
    }

    pub fn problem(&self) -> Result<GameProblem<'_>> {
        GameProblem::with_svds(&self.channels, &self.data.pilots, &self.links, &self.data.svds)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn small_config() -> ScenarioConfig {
        let text = r#"
[topology]
layout = { kind = "linear", tx_rx_distance = 30.0, spacing = 90.0 }

[[links]]
d = 16
m = 12
nt = 2
nr = 2
k = 2
p_max = 1.0

[[links]]
d = 16
m = 12
nt = 2
nr = 2
k = 2
p_max = 1.0

[latent]
true_dim = 6
pilots = 200
test_samples = 50
"#;
        ScenarioConfig::parse(text, Path::new("small.toml")).unwrap()
    }

    #[test]
    fn builds_deterministically() {
        let cfg = small_config();
        let a = Scenario::build(&cfg, 5, Execution::Sequential).unwrap();
        let b = Scenario::build(&cfg, 5, Execution::Parallel).unwrap();
        assert_eq!(a.data.pilots[1].p, b.data.pilots[1].p);
        assert_eq!(a.channels.direct[0], b.channels.direct[0]);
        assert_eq!(a.data.tasks[0].as_ref().unwrap().test.len(), 50);
        a.problem().unwrap();
    }

    #[test]
    fn alpha_moves_interferers_only() {
        let cfg = small_config();
        let s = Scenario::build(&cfg, 6, Execution::Sequential).unwrap();
        let far = Scenario::with_data(&cfg, Some(10.0), s.data.clone()).unwrap();
        assert!((far.topology.alpha(0, 1) - 10.0).abs() < 1e-12);
        assert_eq!(s.channels.direct[1], far.channels.direct[1]);
        assert_eq!(s.channels.sigma2, far.channels.sigma2);
        let near = s.channels.cross[&(0, 1)].base().norm();
        let away = far.channels.cross[&(0, 1)].base().norm();
        assert!(away < near);
    }

    #[test]
    fn snr_sets_noise_power() {
        let cfg = small_config();
        let topo = topology(&cfg, None).unwrap();
        let gain = 30f64.powf(-2.5);
        assert!((topo.noise_power - gain / 10.0).abs() < 1e-15);
    }

    #[test]
    fn explicit_layout_refuses_alpha() {
        let mut cfg = small_config();
        cfg.topology.layout = Layout::Explicit {
            tx: vec![[0.0, 0.0], [50.0, 0.0]],
            rx: vec![[0.0, 30.0], [50.0, 30.0]],
        };
        assert!(topology(&cfg, None).is_ok());
        assert!(topology(&cfg, Some(2.0)).is_err());
    }

    #[test]
    fn imported_pilots_are_used() {
        use crate::linalg::complex_gaussian;
        use crate::matrix_io::write_matrix;
        use rand::SeedableRng;
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut cfg = small_config();
        let mut files = Vec::new();
        for l in 0..2 {
            let tx = dir.path().join(format!("tx{l}.txt"));
            let rx = dir.path().join(format!("rx{l}.txt"));
            write_matrix(&tx, &complex_gaussian(&mut rng, 8, 40), &[]).unwrap();
            write_matrix(&rx, &complex_gaussian(&mut rng, 6, 40), &[]).unwrap();
            files.push(crate::config::PilotFiles { tx, rx });
        }
        cfg.latent.pilot_files = Some(files);
        let s = Scenario::build(&cfg, 1, Execution::Sequential).unwrap();
        assert_eq!(s.data.pilots[0].n, 40);
        assert!(s.data.tasks[0].is_none());
    }
}
