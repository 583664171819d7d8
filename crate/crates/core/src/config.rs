//! Scenario configuration: TOML schema, defaults and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::Point;
use crate::error::{Error, Result};
use crate::game::GameConfig;
use crate::link::LinkConfig;
use crate::semantics::LatentParams;

/// Node placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Layout {
    /// Transmitters on a line `spacing` apart, each receiver `tx_rx_distance` away
    /// perpendicular to the line.
    Linear { tx_rx_distance: f64, spacing: f64 },
    /// Explicit coordinates in metres.
    Explicit { tx: Vec<Point>, rx: Vec<Point> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub layout: Layout,
    #[serde(default = "defaults::path_loss_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "defaults::rice_factor")]
    pub rice_factor: f64,
    #[serde(default = "defaults::reference_distance")]
    pub reference_distance: f64,
    /// Receive SNR of each link from its own transmitter at full power.
    #[serde(default = "defaults::snr_db")]
    pub snr_db: f64,
    /// Recorded with the outputs; it does not enter the channel model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_frequency_ghz: Option<f64>,
}

/// Raw pilot matrices read from disk for one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PilotFiles {
    /// Complex transmitter latents, `d/2 × n`.
    pub tx: PathBuf,
    /// Complex receiver latents, `m/2 × n`.
    pub rx: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatentConfig {
    pub true_dim: usize,
    pub class_count: usize,
    pub class_separation: f64,
    pub noise_std: f64,
    /// Pilot pairs per link.
    pub pilots: usize,
    /// Held-out samples per link for the accuracy proxy.
    pub test_samples: usize,
    /// Imported pilots replacing the synthetic mixture, one entry per link.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pilot_files: Option<Vec<PilotFiles>>,
}

impl Default for LatentConfig {
    fn default() -> Self {
        let p = LatentParams::default();
        LatentConfig {
            true_dim: p.true_dim,
            class_count: p.class_count,
            class_separation: p.class_separation,
            noise_std: p.noise_std,
            pilots: 4096,
            test_samples: 2000,
            pilot_files: None,
        }
    }
}

impl LatentConfig {
    pub fn params(&self) -> LatentParams {
        LatentParams {
            true_dim: self.true_dim,
            class_count: self.class_count,
            class_separation: self.class_separation,
            noise_std: self.noise_std,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Game,
    MuiLess,
    MuiAgnostic,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Game => "game",
            Method::MuiLess => "mui-less",
            Method::MuiAgnostic => "mui-agnostic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    /// Interferer distance over intended-link distance.
    pub alpha_values: Vec<f64>,
    /// Fractions `K·N_T / (d/2)` of the transmit latent space carried per vector.
    /// Valid values depend on the link sizes, so there is no default list.
    pub xi_values: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: vec![Method::Game, Method::MuiLess, Method::MuiAgnostic],
            seeds: vec![27, 42, 100, 123, 144, 200],
            alpha_values: vec![1.0, 2.0, 3.0, 5.0, 10.0, 40.0],
            xi_values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub topology: TopologyConfig,
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub latent: LatentConfig,
    #[serde(default)]
    pub game: GameConfig,
    #[serde(default)]
    pub experiment: ExperimentConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

mod defaults {
    pub fn path_loss_exponent() -> f64 {
        2.5
    }
    pub fn rice_factor() -> f64 {
        1.5
    }
    pub fn reference_distance() -> f64 {
        1.0
    }
    pub fn snr_db() -> f64 {
        10.0
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(path, format!("must be positive and finite, got {v}")))
    }
}

impl ScenarioConfig {
    /// Reads, parses and validates a TOML scenario. Relative pilot paths resolve
    /// against the directory of the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text, path)?;
        if let (Some(files), Some(dir)) = (cfg.latent.pilot_files.as_mut(), path.parent()) {
            for f in files {
                f.tx = dir.join(&f.tx);
                f.rx = dir.join(&f.rx);
            }
        }
        Ok(cfg)
    }

    /// Parses and validates TOML text; `origin` is only used in messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("configuration is always representable as TOML")
    }

    /// First 16 hex digits of the SHA-256 of the canonical TOML echo.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.topology;
        if self.links.is_empty() {
            return Err(Error::config("links", "at least one link is required"));
        }
        match &t.layout {
            Layout::Linear { tx_rx_distance, spacing } => {
                positive("topology.layout.tx_rx_distance", *tx_rx_distance)?;
                positive("topology.layout.spacing", *spacing)?;
            }
            Layout::Explicit { tx, rx } => {
                for (name, pts) in [("tx", tx), ("rx", rx)] {
                    if pts.len() != self.links.len() {
                        return Err(Error::config(
                            format!("topology.layout.{name}"),
                            format!("{} positions for {} links", pts.len(), self.links.len()),
                        ));
                    }
                }
            }
        }
        positive("topology.path_loss_exponent", t.path_loss_exponent)?;
        positive("topology.reference_distance", t.reference_distance)?;
        if !(t.rice_factor >= 0.0) {
            return Err(Error::config("topology.rice_factor", "must be non-negative"));
        }
        if !t.snr_db.is_finite() {
            return Err(Error::config("topology.snr_db", "must be finite"));
        }
        if let Some(f) = t.carrier_frequency_ghz {
            positive("topology.carrier_frequency_ghz", f)?;
        }

        let k = self.links[0].k;
        for (i, link) in self.links.iter().enumerate() {
            let path = format!("links[{i}]");
            link.validate(&path)?;
            if link.k != k {
                return Err(Error::config(
                    format!("{path}.k"),
                    format!("all links must share the number of channel uses ({k}), got {}", link.k),
                ));
            }
        }

        let lat = &self.latent;
        lat.params().validate("latent")?;
        if let Some(files) = &lat.pilot_files {
            if files.len() != self.links.len() {
                return Err(Error::config(
                    "latent.pilot_files",
                    format!("{} entries for {} links", files.len(), self.links.len()),
                ));
            }
        } else {
            for (i, link) in self.links.iter().enumerate() {
                let need = link.d.max(link.m);
                if lat.pilots < need {
                    return Err(Error::config(
                        "latent.pilots",
                        format!("{} pilots are fewer than max(d, m) = {need} of links[{i}]", lat.pilots),
                    ));
                }
            }
            if lat.test_samples == 0 {
                return Err(Error::config("latent.test_samples", "must be at least 1"));
            }
        }

        self.game.validate("game")?;

        let e = &self.experiment;
        if e.methods.is_empty() {
            return Err(Error::config("experiment.methods", "at least one method is required"));
        }
        if e.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "at least one seed is required"));
        }
        for (i, a) in e.alpha_values.iter().enumerate() {
            positive(&format!("experiment.alpha_values[{i}]"), *a)?;
        }
        for (i, xi) in e.xi_values.iter().enumerate() {
            self.uses_for_xi(*xi)
                .map_err(|msg| Error::config(format!("experiment.xi_values[{i}]"), msg))?;
        }
        if self.output.formats.is_empty() {
            return Err(Error::config("output.formats", "at least one format is required"));
        }
        Ok(())
    }

    /// Channel uses `K` realizing the fraction `ξ = K·N_T / (d/2)` on every link.
    pub fn uses_for_xi(&self, xi: f64) -> std::result::Result<usize, String> {
        let mut k_common = None;
        for link in &self.links {
            let exact = xi * link.tx_complex_dim() as f64 / link.nt as f64;
            let k = exact.round();
            if !(xi > 0.0) || (exact - k).abs() > 1e-9 || k < 1.0 {
                return Err(format!(
                    "ξ = {xi} gives non-integral K = {exact:.4}; valid values are {}",
                    self.valid_xi()
                        .iter()
                        .map(|v| format!("{v:.6}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                ));
            }
            let k = k as usize;
            if k_common.is_some_and(|c| c != k) {
                return Err(format!("ξ = {xi} maps to different K on different links"));
            }
            let candidate = LinkConfig { k, ..link.clone() };
            candidate.validate("link").map_err(|e| format!("ξ = {xi}: {e}"))?;
            k_common = Some(k);
        }
        Ok(k_common.expect("at least one link"))
    }

    /// Fractions reachable with an integer `K` on every link.
    pub fn valid_xi(&self) -> Vec<f64> {
        let link = &self.links[0];
        let kmax = link.tx_complex_dim().min(link.rx_complex_dim()) / link.nt;
        (1..=kmax)
            .map(|k| (k * link.nt) as f64 / link.tx_complex_dim() as f64)
            .filter(|xi| self.links.iter().all(|l| {
                let exact = xi * l.tx_complex_dim() as f64 / l.nt as f64;
                (exact - exact.round()).abs() < 1e-9
                    && LinkConfig { k: exact.round() as usize, ..l.clone() }.validate("link").is_ok()
            }))
            .collect()
    }

    /// Copy with every link using `k` channel uses.
    pub fn with_uses(&self, k: usize) -> Self {
        let mut cfg = self.clone();
        for l in &mut cfg.links {
            l.k = k;
        }
        cfg
    }
}
