//! Physical-layer scenario: path loss, Rician flat fading and the
//! block-diagonal lift of a per-use channel over `K` channel uses.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::exec::{stream, Domain};
use crate::link::LinkConfig;
use crate::linalg::{complex_gaussian, CMat};

pub type Point = [f64; 2];

/// Node placement and propagation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub tx: Vec<Point>,
    pub rx: Vec<Point>,
    /// Path-loss exponent η.
    pub path_loss_exponent: f64,
    /// Rice factor κ.
    pub rice_factor: f64,
    /// Distance of unit path gain, meters.
    pub reference_distance: f64,
    /// Noise power σ², watts.
    pub noise_power: f64,
}

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Topology {
    /// Transmitters on the x axis `spacing` apart, each receiver `tx_rx_distance`
    /// above its transmitter.
    pub fn linear(
        links: usize,
        tx_rx_distance: f64,
        spacing: f64,
        path_loss_exponent: f64,
        rice_factor: f64,
        noise_power: f64,
    ) -> Self {
        let tx: Vec<Point> = (0..links).map(|i| [i as f64 * spacing, 0.0]).collect();
        let rx = tx.iter().map(|p| [p[0], tx_rx_distance]).collect();
        Topology {
            tx,
            rx,
            path_loss_exponent,
            rice_factor,
            reference_distance: 1.0,
            noise_power,
        }
    }

    pub fn links(&self) -> usize {
        self.tx.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tx.len() != self.rx.len() {
            return Err(Error::config(
                "topology",
                format!("{} transmitters but {} receivers", self.tx.len(), self.rx.len()),
            ));
        }
        if !(self.path_loss_exponent >= 0.0) {
            return Err(Error::config("topology.path_loss_exponent", "must be non-negative"));
        }
        if !(self.rice_factor >= 0.0) {
            return Err(Error::config("topology.rice_factor", "must be non-negative"));
        }
        if !(self.reference_distance > 0.0) {
            return Err(Error::config("topology.reference_distance", "must be positive"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::config("topology.noise_power", "must be positive"));
        }
        let nodes: Vec<(String, Point)> = self
            .tx
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("tx[{i}]"), *p))
            .chain(self.rx.iter().enumerate().map(|(i, p)| (format!("rx[{i}]"), *p)))
            .collect();
        for (i, (na, a)) in nodes.iter().enumerate() {
            for (nb, b) in &nodes[i + 1..] {
                if !(distance(*a, *b) > 0.0) {
                    return Err(Error::config(
                        "topology.positions",
                        format!("{na} and {nb} coincide"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// MUI scaling factor `d(T_i, T_j) / d(T_i, R_i)`.
    pub fn alpha(&self, i: usize, j: usize) -> f64 {
        distance(self.tx[i], self.tx[j]) / distance(self.tx[i], self.rx[i])
    }
}

/// Linear path gain `(d₀ / max(d, d₀))^η`.
pub fn path_loss_gain(distance: f64, eta: f64, reference_distance: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::domain(format!("distance must be positive, got {distance}")));
    }
    if !(reference_distance > 0.0) {
        return Err(Error::domain(format!(
            "reference distance must be positive, got {reference_distance}"
        )));
    }
    if !(eta >= 0.0) {
        return Err(Error::domain(format!("path-loss exponent must be non-negative, got {eta}")));
    }
    Ok((reference_distance / distance.max(reference_distance)).powf(eta))
}

/// Rician flat-fading matrix with an all-ones line-of-sight component.
///
/// `√g · (√(κ/(1+κ))·1 + √(1/(1+κ))·W)` with `W` i.i.d. CN(0, 1). `κ = ∞` yields the
/// pure line-of-sight matrix; the scattered part is still drawn so the stream position
/// does not depend on κ.
pub fn rician_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    nr: usize,
    nt: usize,
    kappa: f64,
    gain: f64,
) -> Result<CMat> {
    if nr == 0 || nt == 0 {
        return Err(Error::domain("channel dimensions must be positive"));
    }
    if !(kappa >= 0.0) {
        return Err(Error::domain(format!("rice factor must be non-negative, got {kappa}")));
    }
    if !(gain > 0.0) || !gain.is_finite() {
        return Err(Error::domain(format!("gain must be positive, got {gain}")));
    }
    let (los, nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    let w = complex_gaussian(rng, nr, nt);
    let amp = gain.sqrt();
    Ok(w.map(|z| (z * nlos + los) * amp))
}

/// Dense `I_K ⊗ base`.
pub fn kronecker_lift(base: &CMat, k: usize) -> Result<CMat> {
    if k == 0 {
        return Err(Error::domain("number of channel uses must be at least 1"));
    }
    let (r, c) = base.shape();
    let mut out = CMat::zeros(k * r, k * c);
    for b in 0..k {
        out.view_mut((b * r, b * c), (r, c)).copy_from(base);
    }
    Ok(out)
}

/// Linear map applied by a channel. Implemented for dense matrices and for the
/// structured lift, which multiplies block by block.
pub trait ChannelOp: Sync {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `H · M`.
    fn apply(&self, m: &CMat) -> CMat;
    /// `Hᴴ · M`.
    fn apply_adjoint(&self, m: &CMat) -> CMat;
    fn dense(&self) -> CMat;
}

impl ChannelOp for CMat {
    fn rows(&self) -> usize {
        self.nrows()
    }
    fn cols(&self) -> usize {
        self.ncols()
    }
    fn apply(&self, m: &CMat) -> CMat {
        self * m
    }
    fn apply_adjoint(&self, m: &CMat) -> CMat {
        self.ad_mul(m)
    }
    fn dense(&self) -> CMat {
        self.clone()
    }
}

/// `I_K ⊗ H̄` stored by its base block.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedChannel {
    base: CMat,
    k: usize,
}

impl LiftedChannel {
    pub fn new(base: CMat, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("number of channel uses must be at least 1"));
        }
        Ok(LiftedChannel { base, k })
    }

    pub fn base(&self) -> &CMat {
        &self.base
    }

    pub fn uses(&self) -> usize {
        self.k
    }

    fn blockwise(&self, m: &CMat, blk: &CMat, in_rows: usize, out_rows: usize) -> CMat {
        assert_eq!(m.nrows(), self.k * in_rows, "channel input dimension mismatch");
        let mut out = CMat::zeros(self.k * out_rows, m.ncols());
        for b in 0..self.k {
            let part = blk * m.rows(b * in_rows, in_rows);
            out.rows_mut(b * out_rows, out_rows).copy_from(&part);
        }
        out
    }
}

impl ChannelOp for LiftedChannel {
    fn rows(&self) -> usize {
        self.k * self.base.nrows()
    }
    fn cols(&self) -> usize {
        self.k * self.base.ncols()
    }
    fn apply(&self, m: &CMat) -> CMat {
        self.blockwise(m, &self.base, self.base.ncols(), self.base.nrows())
    }
    fn apply_adjoint(&self, m: &CMat) -> CMat {
        self.blockwise(m, &self.base.adjoint(), self.base.nrows(), self.base.ncols())
    }
    fn dense(&self) -> CMat {
        kronecker_lift(&self.base, self.k).expect("k validated at construction")
    }
}

/// All direct and cross channels of a scenario.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// `direct[l]` is `H_{l,l}`.
    pub direct: Vec<LiftedChannel>,
    /// `cross[(j, l)]` is `H_{j,l}` from transmitter `j` to receiver `l`.
    pub cross: BTreeMap<(usize, usize), LiftedChannel>,
    pub sigma2: f64,
    /// `alpha[(i, j)] = d(T_i, T_j) / d(T_i, R_i)`.
    pub alpha: BTreeMap<(usize, usize), f64>,
}

impl ChannelSet {
    pub fn links(&self) -> usize {
        self.direct.len()
    }

    /// Channels from every rival `j ≠ l` into receiver `l`, in ascending `j`.
    pub fn interferers(&self, l: usize) -> impl Iterator<Item = (usize, &LiftedChannel)> {
        (0..self.links())
            .filter(move |&j| j != l)
            .map(move |j| (j, &self.cross[&(j, l)]))
    }
}

/// Draws every channel of the scenario from `seed`.
///
/// Matrix `H_{j,l}` uses its own random stream indexed by the ordered pair, so
/// moving nodes changes only path gains and leaves the fading draws untouched.
pub fn build_channel_set(topology: &Topology, links: &[LinkConfig], seed: u64) -> Result<ChannelSet> {
    topology.validate()?;
    let n = links.len();
    if topology.links() != n {
        return Err(Error::config(
            "topology",
            format!("{} node pairs for {} links", topology.links(), n),
        ));
    }
    if n == 0 {
        return Err(Error::config("links", "at least one link is required"));
    }
    let k = links[0].k;
    if let Some((i, l)) = links.iter().enumerate().find(|(_, l)| l.k != k) {
        return Err(Error::config(
            format!("links[{i}].k"),
            format!("all links must share the number of channel uses ({k}), got {}", l.k),
        ));
    }

    let draw = |j: usize, l: usize| -> Result<LiftedChannel> {
        let dist = distance(topology.tx[j], topology.rx[l]);
        let gain = path_loss_gain(dist, topology.path_loss_exponent, topology.reference_distance)?;
        let mut rng = stream(seed, Domain::Channel, (j * n + l) as u64);
        let base = rician_matrix(&mut rng, links[l].nr, links[j].nt, topology.rice_factor, gain)?;
        LiftedChannel::new(base, k)
    };

    let direct = (0..n).map(|l| draw(l, l)).collect::<Result<Vec<_>>>()?;
    let mut cross = BTreeMap::new();
    let mut alpha = BTreeMap::new();
    for j in 0..n {
        for l in 0..n {
            if j != l {
                cross.insert((j, l), draw(j, l)?);
                alpha.insert((j, l), topology.alpha(j, l));
            }
        }
    }
    Ok(ChannelSet {
        direct,
        cross,
        sigma2: topology.noise_power,
        alpha,
    })
}

/// Noise power giving `snr_db` at each receiver from its own transmitter at full power,
/// averaged over links: `mean_l(P_max · g(d_ll)) / 10^(snr/10)`.
pub fn noise_power_for_snr(
    tx: &[Point],
    rx: &[Point],
    links: &[LinkConfig],
    eta: f64,
    reference_distance: f64,
    snr_db: f64,
) -> Result<f64> {
    if links.is_empty() || tx.len() != links.len() || rx.len() != links.len() {
        return Err(Error::config("topology", "positions do not match the link list"));
    }
    let mut acc = 0.0;
    for (l, link) in links.iter().enumerate() {
        acc += link.p_max * path_loss_gain(distance(tx[l], rx[l]), eta, reference_distance)?;
    }
    Ok(acc / links.len() as f64 / 10f64.powf(snr_db / 10.0))
}
