use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions and power budget of one transmitter–receiver pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Real transmitter latent dimension (even).
    pub d: usize,
    /// Real receiver latent dimension (even).
    pub m: usize,
    /// Transmit antennas.
    pub nt: usize,
    /// Receive antennas.
    pub nr: usize,
    /// Channel uses per latent vector.
    pub k: usize,
    /// Power budget per channel use, watts.
    pub p_max: f64,
}

impl LinkConfig {
    pub fn tx_complex_dim(&self) -> usize {
        self.d / 2
    }

    pub fn rx_complex_dim(&self) -> usize {
        self.m / 2
    }

    /// Number of transmit modes `K·N_T`, also the truncation rank of the cross-covariance.
    pub fn modes(&self) -> usize {
        self.k * self.nt
    }

    /// Receive dimension `K·N_R`.
    pub fn rx_symbols(&self) -> usize {
        self.k * self.nr
    }

    /// Total power budget `K·P_max`.
    pub fn budget(&self) -> f64 {
        self.k as f64 * self.p_max
    }

    /// Compression factor `K / (d/2)`.
    pub fn xi(&self) -> f64 {
        self.k as f64 / self.tx_complex_dim() as f64
    }

    /// Checks the per-link preconditions. `path` prefixes error field paths.
    pub fn validate(&self, path: &str) -> Result<()> {
        let field = |f: &str| format!("{path}.{f}");
        for (name, v) in [("d", self.d), ("m", self.m)] {
            if v == 0 || v % 2 != 0 {
                return Err(Error::config(field(name), format!("must be even and positive, got {v}")));
            }
        }
        for (name, v) in [("nt", self.nt), ("nr", self.nr), ("k", self.k)] {
            if v == 0 {
                return Err(Error::config(field(name), "must be at least 1"));
            }
        }
        if !(self.p_max > 0.0) || !self.p_max.is_finite() {
            return Err(Error::config(field("p_max"), format!("must be positive, got {}", self.p_max)));
        }
        let limit = self.tx_complex_dim().min(self.rx_complex_dim());
        if self.modes() > limit {
            return Err(Error::config(
                field("k"),
                format!(
                    "{path}: K·N_T = {}·{} = {} exceeds min(d/2, m/2) = {limit}",
                    self.k,
                    self.nt,
                    self.modes()
                ),
            ));
        }
        Ok(())
    }
}
