//! Slotted tandem FIFO queues fed by LRD cross traffic, observed by probes.
//!
//! Queues are fluid: each slot node i receives y_i(t) units of cross traffic
//! and serves up to C_i units. A probe sent in slot s sees the workload
//! q_i + y_i of every node along the path, i.e. it queues behind the traffic
//! that arrived in its own slot.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::CovarianceSeries;
use crate::sampling::SamplingPattern;
use crate::sub_seed;
use crate::traffic::{gen_fgn, gen_onoff, LrdModel, Trace, TraceKind, DEFAULT_SLOT_SECONDS};

pub const DEFAULT_BUFFER: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CrossGenerator {
    /// Gaussian fGn clipped at zero.
    Fgn,
    /// Superposed Pareto on/off sources; H follows from the tail index.
    OnOff { sources: usize, tail_index: f64 },
    /// y(t) = utilization·C in every slot.
    Constant,
}

fn default_generator() -> CrossGenerator {
    CrossGenerator::Fgn
}

fn default_burstiness() -> f64 {
    1.0
}

/// Cross traffic offered to one node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTraffic {
    pub hurst: f64,
    /// Mean offered load over capacity, measured after clipping.
    pub utilization: f64,
    /// Standard deviation of the unclipped Gaussian over capacity.
    #[serde(default = "default_burstiness")]
    pub burstiness: f64,
    #[serde(default = "default_generator")]
    pub generator: CrossGenerator,
    /// Fixed seed for this node; derived from the run seed if absent.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl CrossTraffic {
    pub fn fgn(hurst: f64, utilization: f64) -> Self {
        Self {
            hurst,
            utilization,
            burstiness: 1.0,
            generator: CrossGenerator::Fgn,
            seed: None,
        }
    }

    pub fn idle() -> Self {
        Self {
            utilization: 0.0,
            generator: CrossGenerator::Constant,
            ..Self::fgn(0.75, 0.0)
        }
    }

    pub fn constant(utilization: f64) -> Self {
        Self {
            utilization,
            generator: CrossGenerator::Constant,
            ..Self::fgn(0.75, utilization)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.utilization >= 0.0) || !self.utilization.is_finite() {
            return Err(invalid(format!("utilization must be >= 0, got {}", self.utilization)));
        }
        match self.generator {
            CrossGenerator::Fgn => {
                if self.utilization > 0.0 {
                    LrdModel::new(self.hurst, 1.0, 0.0)?;
                    if !(self.burstiness > 0.0) || !self.burstiness.is_finite() {
                        return Err(invalid(format!("burstiness must be > 0, got {}", self.burstiness)));
                    }
                }
            }
            CrossGenerator::OnOff { sources, tail_index } => {
                if sources == 0 {
                    return Err(invalid("on/off generator needs at least one source"));
                }
                if !(tail_index > 1.0 && tail_index < 2.0) {
                    return Err(invalid(format!("tail index must lie in (1, 2), got {tail_index}")));
                }
            }
            CrossGenerator::Constant => {}
        }
        Ok(())
    }

    /// Generate `length` slots of cross traffic for a node of capacity `capacity`.
    pub fn generate(&self, capacity: f64, length: usize, seed: u64) -> Result<Trace> {
        self.validate()?;
        let mean = self.utilization * capacity;
        if mean == 0.0 {
            return Trace::increments(vec![0.0; length]);
        }
        match self.generator {
            CrossGenerator::Constant => Trace::increments(vec![mean; length]),
            CrossGenerator::OnOff { sources, tail_index } => gen_onoff(sources, tail_index, mean, length, seed),
            CrossGenerator::Fgn => {
                let sigma = self.burstiness * capacity;
                let mu0 = clipped_gaussian_shift(mean, sigma);
                let model = LrdModel::new(self.hurst, sigma * sigma, mu0.max(0.0))?;
                let mut tr = gen_fgn(&model, length, seed)?;
                if mu0 < 0.0 {
                    // gen_fgn requires a nonnegative mean; shift afterwards.
                    for v in &mut tr.values {
                        *v += mu0;
                    }
                }
                Ok(tr.clip_nonnegative())
            }
        }
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// E[max(μ₀ + σX, 0)] for standard normal X.
pub fn clipped_gaussian_mean(mu0: f64, sigma: f64) -> f64 {
    let z = mu0 / sigma;
    mu0 * std_normal_cdf(z) + sigma * std_normal_pdf(z)
}

/// Shift μ₀ such that max(μ₀ + σX, 0) has mean `target`.
pub fn clipped_gaussian_shift(target: f64, sigma: f64) -> f64 {
    // The clipped mean is increasing in μ₀, between 0 and ≥ μ₀.
    let (mut lo, mut hi) = (-10.0 * sigma, target.max(0.0) + sigma);
    while clipped_gaussian_mean(lo, sigma) > target {
        lo *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if clipped_gaussian_mean(mid, sigma) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * sigma {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeConfig {
    /// Service units per slot.
    pub capacity: f64,
    pub cross: CrossTraffic,
    /// Buffer in service units; `None` is unbounded.
    #[serde(default = "default_buffer")]
    pub buffer: Option<f64>,
    /// Fixed forwarding latency to the next hop, in slots.
    #[serde(default)]
    pub latency: usize,
}

fn default_buffer() -> Option<f64> {
    Some(DEFAULT_BUFFER)
}

impl NodeConfig {
    pub fn new(capacity: f64, cross: CrossTraffic) -> Self {
        Self {
            capacity,
            cross,
            buffer: Some(DEFAULT_BUFFER),
            latency: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity > 0.0) || !self.capacity.is_finite() {
            return Err(invalid(format!("capacity must be > 0, got {}", self.capacity)));
        }
        if let Some(b) = self.buffer {
            if !(b >= 0.0) {
                return Err(invalid(format!("buffer must be >= 0, got {b}")));
            }
        }
        self.cross.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathConfig {
    pub nodes: Vec<NodeConfig>,
    /// Volume each probe adds to the queues it crosses.
    #[serde(default)]
    pub probe_volume: f64,
}

impl PathConfig {
    pub fn new(nodes: Vec<NodeConfig>) -> Self {
        Self { nodes, probe_volume: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(invalid("path needs at least one node"));
        }
        if !(self.probe_volume >= 0.0) || !self.probe_volume.is_finite() {
            return Err(invalid(format!("probe volume must be >= 0, got {}", self.probe_volume)));
        }
        self.nodes.iter().try_for_each(NodeConfig::validate)
    }

    /// Slot offset at which a probe sent at slot 0 reaches node `i`.
    pub fn offset(&self, i: usize) -> usize {
        self.nodes[..i].iter().map(|n| n.latency).sum()
    }

    /// Delay of a probe that finds every queue empty.
    pub fn d_min(&self) -> f64 {
        self.nodes
            .iter()
            .map(|n| n.latency as f64 + self.probe_volume / n.capacity)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    Single,
    Pair,
}

/// Volume bookkeeping for one node.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeStats {
    pub arrived: f64,
    pub served: f64,
    pub dropped: f64,
    pub final_backlog: f64,
    pub utilization: f64,
    /// Offered load ≥ capacity: the queue has no stationary regime.
    pub unstable: bool,
}

/// Queue state of one node over the whole horizon.
#[derive(Debug, Clone)]
pub struct NodeState {
    pub capacity: f64,
    /// Arrivals per slot, probes included.
    pub arrivals: Vec<f64>,
    /// q(t) + y(t): backlog plus arrivals of slot t.
    pub workload: Vec<f64>,
    /// Buffer overflow happened in slot t.
    pub overflow: Vec<bool>,
    pub stats: NodeStats,
}

impl NodeState {
    /// Run the fluid Lindley recursion q(t+1) = min(max(q + y − C, 0), B).
    pub fn run(capacity: f64, buffer: Option<f64>, arrivals: Vec<f64>) -> Self {
        let n = arrivals.len();
        let mut workload = Vec::with_capacity(n);
        let mut overflow = vec![false; n];
        let mut q = 0.0f64;
        let mut stats = NodeStats::default();
        for (t, &y) in arrivals.iter().enumerate() {
            let w = q + y;
            workload.push(w);
            let served = w.min(capacity);
            let mut rest = w - served;
            if let Some(b) = buffer {
                if rest > b {
                    stats.dropped += rest - b;
                    overflow[t] = true;
                    rest = b;
                }
            }
            stats.arrived += y;
            stats.served += served;
            q = rest;
        }
        stats.final_backlog = q;
        stats.utilization = if n > 0 { stats.arrived / (n as f64 * capacity) } else { 0.0 };
        stats.unstable = stats.utilization >= 1.0;
        Self {
            capacity,
            arrivals,
            workload,
            overflow,
            stats,
        }
    }

    pub fn len(&self) -> usize {
        self.workload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.workload.is_empty()
    }

    /// Y_i(t): the node serves any traffic in slot t.
    pub fn busy(&self) -> Trace {
        let values = self.workload.iter().map(|&w| if w > 0.0 { 1.0 } else { 0.0 }).collect();
        Trace {
            slot_seconds: DEFAULT_SLOT_SECONDS,
            values,
            kind: TraceKind::Binary,
            clipped_fraction: 0.0,
        }
    }

    /// Fluid volume arriving in the real interval [a, b), with slot t
    /// carrying arrivals at constant rate over [t, t+1).
    fn volume(&self, a: f64, b: f64) -> f64 {
        let n = self.arrivals.len();
        let (a, b) = (a.max(0.0), b.min(n as f64));
        if b <= a {
            return 0.0;
        }
        let (ia, ib) = (a.floor() as usize, (b.ceil() as usize).min(n));
        let mut v = 0.0;
        for t in ia..ib {
            let lo = a.max(t as f64);
            let hi = b.min(t as f64 + 1.0);
            v += self.arrivals[t] * (hi - lo);
        }
        v
    }

    fn slots_busy(&self, a: f64, b: f64) -> bool {
        let n = self.workload.len();
        let (ia, ib) = (a.floor().max(0.0) as usize, (b.ceil() as usize).min(n).max(a as usize + 1));
        (ia..ib.min(n)).all(|t| self.workload[t] > 0.0)
    }

    fn overflows(&self, a: f64, b: f64) -> bool {
        let n = self.workload.len();
        let (ia, ib) = (a.floor().max(0.0) as usize, (b.ceil() as usize).max(a as usize + 1).min(n));
        (ia..ib).any(|t| self.overflow[t])
    }
}

/// Outcome of one single probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeDelay {
    pub send_slot: u64,
    pub delay_slots: f64,
    pub dropped: bool,
}

/// Outcome of one probe pair sent g_s slots apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairDispersion {
    pub send_slot: u64,
    /// Delay of the first member.
    pub delay_slots: f64,
    pub g_r: f64,
    pub dropped: bool,
    /// Every queue stayed busy between the two members.
    pub valid: bool,
}

/// The simulated path, queried slot by slot.
#[derive(Debug, Clone)]
pub struct PathState {
    pub nodes: Vec<NodeState>,
    offsets: Vec<usize>,
    latencies: Vec<usize>,
    probe_volume: f64,
}

impl PathState {
    /// Simulate `path` on explicit cross-traffic traces; probes injected at
    /// `probe_slots` add `path.probe_volume` to each node they cross.
    pub fn build(path: &PathConfig, cross: Vec<Trace>, probe_slots: &[u64]) -> Result<Self> {
        path.validate()?;
        if cross.len() != path.nodes.len() {
            return Err(Error::LengthMismatch { left: cross.len(), right: path.nodes.len() });
        }
        let len = cross[0].len();
        let mut nodes = Vec::with_capacity(cross.len());
        let mut offsets = Vec::with_capacity(cross.len());
        for (i, (cfg, tr)) in path.nodes.iter().zip(cross).enumerate() {
            if tr.len() != len {
                return Err(Error::LengthMismatch { left: tr.len(), right: len });
            }
            let mut arrivals = tr.values;
            let off = path.offset(i);
            if path.probe_volume > 0.0 {
                for &s in probe_slots {
                    if let Some(a) = arrivals.get_mut(s as usize + off) {
                        *a += path.probe_volume;
                    }
                }
            }
            nodes.push(NodeState::run(cfg.capacity, cfg.buffer, arrivals));
            offsets.push(off);
        }
        Ok(Self {
            nodes,
            offsets,
            latencies: path.nodes.iter().map(|n| n.latency).collect(),
            probe_volume: path.probe_volume,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[0].is_empty()
    }

    pub fn d_min(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.latencies)
            .map(|(n, &l)| l as f64 + self.probe_volume / n.capacity)
            .sum()
    }

    /// Single probe sent at slot `s`.
    pub fn probe(&self, s: u64) -> ProbeDelay {
        let mut delay = 0.0;
        let mut dropped = false;
        for ((node, &off), &lat) in self.nodes.iter().zip(&self.offsets).zip(&self.latencies) {
            let t = s as usize + off;
            if t >= node.len() {
                dropped = true;
                break;
            }
            dropped |= node.overflow[t];
            // An injected probe's own volume is already inside the workload.
            delay += node.workload[t] / node.capacity + lat as f64;
        }
        ProbeDelay {
            send_slot: s,
            delay_slots: delay,
            dropped,
        }
    }

    /// Pair sent at slot `s` with spacing `g_s` slots: per hop the spacing
    /// grows by the cross volume arriving between the members over capacity.
    pub fn pair(&self, s: u64, g_s: f64) -> PairDispersion {
        let first = self.probe(s);
        let mut g = g_s;
        let mut valid = true;
        let mut dropped = first.dropped;
        for (node, &off) in self.nodes.iter().zip(&self.offsets) {
            let a = s as f64 + off as f64;
            let b = a + g;
            if b > node.len() as f64 {
                dropped = true;
                break;
            }
            valid &= node.slots_busy(a, b);
            dropped |= node.overflows(a, b);
            g += node.volume(a, b) / node.capacity;
        }
        PairDispersion {
            send_slot: s,
            delay_slots: first.delay_slots,
            g_r: g,
            dropped,
            valid,
        }
    }

    /// OR of the per-node busy indicators, each read at its probe offset.
    pub fn path_busy(&self) -> Trace {
        let n = self.len();
        let mut values = vec![0.0; n];
        for (node, &off) in self.nodes.iter().zip(&self.offsets) {
            for (s, v) in values.iter_mut().enumerate() {
                if *v == 0.0 && s + off < n && node.workload[s + off] > 0.0 {
                    *v = 1.0;
                }
            }
        }
        Trace {
            slot_seconds: DEFAULT_SLOT_SECONDS,
            values,
            kind: TraceKind::Binary,
            clipped_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimResult {
    /// Y_i(t) per node.
    pub busy: Vec<Trace>,
    pub probe_delays: Vec<ProbeDelay>,
    pub pair_dispersions: Vec<PairDispersion>,
    pub d_min: f64,
    pub stats: Vec<NodeStats>,
}

impl SimResult {
    pub fn unstable(&self) -> bool {
        self.stats.iter().any(|s| s.unstable)
    }

    /// CSV `send_slot,delay_slots,dropped`.
    pub fn write_delays_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["send_slot", "delay_slots", "dropped"])?;
        for p in &self.probe_delays {
            wr.write_record([p.send_slot.to_string(), p.delay_slots.to_string(), (p.dropped as u8).to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Generate cross traffic for every node of `path`.
pub fn generate_cross(path: &PathConfig, length: usize, seed: u64) -> Result<Vec<Trace>> {
    path.validate()?;
    path.nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let s = n.cross.seed.unwrap_or_else(|| sub_seed(seed, 1000 + i as u64));
            n.cross.generate(n.capacity, length, s)
        })
        .collect()
}

/// Simulate the path over the pattern's horizon and probe at its 1-slots.
///
/// Pairs are sent one slot apart.
pub fn simulate_path(path: &PathConfig, pattern: &SamplingPattern, kind: ProbeKind, seed: u64) -> Result<SimResult> {
    let cross = generate_cross(path, pattern.len(), seed)?;
    simulate_with_traffic(path, cross, pattern, kind, 1.0)
}

pub fn simulate_with_traffic(
    path: &PathConfig,
    cross: Vec<Trace>,
    pattern: &SamplingPattern,
    kind: ProbeKind,
    pair_gap: f64,
) -> Result<SimResult> {
    if cross.first().map(Trace::len) != Some(pattern.len()) {
        return Err(Error::LengthMismatch {
            left: cross.first().map(Trace::len).unwrap_or(0),
            right: pattern.len(),
        });
    }
    let slots = pattern.sample_slots();
    let state = PathState::build(path, cross, &slots)?;
    let (mut delays, mut pairs) = (Vec::new(), Vec::new());
    match kind {
        ProbeKind::Single => delays = slots.iter().map(|&s| state.probe(s)).collect(),
        ProbeKind::Pair => pairs = slots.iter().map(|&s| state.pair(s, pair_gap)).collect(),
    }
    Ok(SimResult {
        busy: state.nodes.iter().map(NodeState::busy).collect(),
        probe_delays: delays,
        pair_dispersions: pairs,
        d_min: state.d_min(),
        stats: state.nodes.iter().map(|n| n.stats).collect(),
    })
}

/// Elementwise OR by W_i = W_{i−1} + Y_i − W_{i−1}Y_i.
pub fn or_compose(indicators: &[Trace]) -> Result<Trace> {
    let first = indicators.first().ok_or_else(|| invalid("or_compose needs at least one indicator"))?;
    let mut w = first.values.clone();
    for y in &indicators[1..] {
        if y.len() != w.len() {
            return Err(Error::LengthMismatch { left: w.len(), right: y.len() });
        }
        for (a, &b) in w.iter_mut().zip(&y.values) {
            *a = *a + b - *a * b;
        }
    }
    Trace::new(w, first.slot_seconds, TraceKind::Binary)
}

/// c_{W_N}(τ) for the OR of independent binary indicators with covariances
/// `c` and means `mu`, via
/// c_{W_i} = c_{W_{i−1}}c_{Y_i} + c_{W_{i−1}}(1−μ_{Y_i})² + c_{Y_i}(1−μ_{W_{i−1}})².
pub fn compose_cov_values(c: &[f64], mu: &[f64]) -> Result<f64> {
    if c.len() != mu.len() {
        return Err(Error::LengthMismatch { left: c.len(), right: mu.len() });
    }
    if c.is_empty() {
        return Err(invalid("compose_cov needs at least one node"));
    }
    if let Some(m) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(invalid(format!("busy-indicator mean must lie in [0, 1], got {m}")));
    }
    let (mut cw, mut mw) = (c[0], mu[0]);
    for (&ci, &mi) in c[1..].iter().zip(&mu[1..]) {
        cw = cw * ci + cw * (1.0 - mi).powi(2) + ci * (1.0 - mw).powi(2);
        mw = mw + mi - mw * mi;
    }
    Ok(cw)
}

/// [`compose_cov_values`] at lag `tau` of each series.
pub fn compose_cov(c_list: &[CovarianceSeries], mu_list: &[f64], tau: usize) -> Result<f64> {
    let c = c_list
        .iter()
        .map(|s| s.get(tau).ok_or_else(|| invalid(format!("covariance series lacks lag {tau}"))))
        .collect::<Result<Vec<_>>>()?;
    compose_cov_values(&c, mu_list)
}
