//! Active probing: delays and pair dispersions turned into observations W(t),
//! and the measurement/analysis pipeline around them.

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::accuracy::{self, AccuracyInputs, AccuracyReport};
use crate::error::{invalid, Error, Result};
use crate::estimation::{
    aggregate_variance, default_block_sizes, hurst_agg_var, hurst_cov_slope, log_lag_grid, sample_autocov,
    CovarianceSeries, HurstEstimate, MeanMode,
};
use crate::reconstruction::{estimate_moments, reconstruct_aggvar, reconstruct_cov, MomentEstimate};
use crate::sampling::{draw_pattern, InterSampleSpec, SamplingPattern};
pub use crate::simnet::ProbeKind;
use crate::simnet::{generate_cross, PathConfig, PathState};
use crate::sub_seed;
use crate::traffic::{Trace, TraceKind, DEFAULT_SLOT_SECONDS};

/// Relative tolerance on the delay reference when classifying a probe busy.
pub const REFERENCE_TOLERANCE: f64 = 1e-9;

/// Largest lag used by the covariance-slope fit.
pub const MAX_FIT_LAG: usize = 1000;

/// Smallest aggregation level for the aggregate-variance fit.
pub const M_LOW: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Busy iff delay exceeds the smallest observed delay.
    #[default]
    MinDelay,
    /// Busy iff delay exceeds the mean delay (robust to clock jitter).
    MeanDelay,
}

/// One probe (or probe pair) as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub send_slot: u64,
    /// One-way delay in slots; `None` if lost.
    pub delay: Option<f64>,
    /// Receive spacing g_r of a pair; `None` for single probes and lost pairs.
    pub pair_dispersion: Option<f64>,
}

impl ProbeRecord {
    pub fn lost(&self) -> bool {
        self.delay.is_none()
    }
}

/// CSV `send_slot,delay_slots,lost,pair_dispersion`.
pub fn write_records_csv<W: Write>(records: &[ProbeRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["send_slot", "delay_slots", "lost", "pair_dispersion"])?;
    for r in records {
        wr.write_record([
            r.send_slot.to_string(),
            r.delay.map(|d| d.to_string()).unwrap_or_default(),
            (r.lost() as u8).to_string(),
            r.pair_dispersion.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(r: R) -> Result<Vec<ProbeRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let field = |k: usize| row.get(k).unwrap_or("").trim();
        let bad = |what: &str| Error::Format(format!("probe record {}: bad {what}", i + 1));
        let send_slot = field(0).parse().map_err(|_| bad("send_slot"))?;
        let lost = matches!(field(2), "1" | "true");
        let delay = if lost || field(1).is_empty() {
            None
        } else {
            Some(field(1).parse::<f64>().map_err(|_| bad("delay_slots"))?)
        };
        if delay.is_some_and(|d| !(d >= 0.0)) {
            return Err(bad("delay_slots (negative)"));
        }
        let pair_dispersion = if field(3).is_empty() {
            None
        } else {
            Some(field(3).parse().map_err(|_| bad("pair_dispersion"))?)
        };
        out.push(ProbeRecord { send_slot, delay, pair_dispersion });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementConfig {
    pub sampling: InterSampleSpec,
    pub slot_seconds: f64,
    pub n_probes: usize,
    pub reference_mode: ReferenceMode,
    pub probe_kind: ProbeKind,
    /// Send spacing g_s of pair members, in slots.
    pub pair_gap: f64,
    /// Bottleneck capacity for the intensity scaling of pair dispersions.
    pub capacity: Option<f64>,
    /// Assumed H for the observation limit τ*; estimated in a first pass if absent.
    pub model_hurst: Option<f64>,
    pub seed: u64,
}

impl Default for MeasurementConfig {
    fn default() -> Self {
        Self {
            sampling: InterSampleSpec::Geometric { p: 0.1 },
            slot_seconds: DEFAULT_SLOT_SECONDS,
            n_probes: 1_000_000,
            reference_mode: ReferenceMode::MinDelay,
            probe_kind: ProbeKind::Single,
            pair_gap: 1.0,
            capacity: None,
            model_hurst: None,
            seed: 42,
        }
    }
}

impl MeasurementConfig {
    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        if self.n_probes == 0 {
            return Err(invalid("n_probes must be >= 1"));
        }
        if !(self.slot_seconds > 0.0) {
            return Err(invalid("slot_seconds must be > 0"));
        }
        if !(self.pair_gap > 0.0) {
            return Err(invalid("pair gap must be > 0"));
        }
        if let Some(h) = self.model_hurst {
            if !(h > 0.5 && h < 1.0) {
                return Err(invalid(format!("model hurst must lie in (0.5, 1), got {h}")));
            }
        }
        Ok(())
    }

    /// Slots covered by the measurement: n_probes / μ_A.
    pub fn pattern_length(&self) -> usize {
        (self.n_probes as f64 / self.sampling.mean_intensity()).round() as usize
    }

    pub fn draw_pattern(&self) -> Result<SamplingPattern> {
        self.validate()?;
        let mut p = draw_pattern(&self.sampling, self.pattern_length(), sub_seed(self.seed, 1))?;
        p.indicator.slot_seconds = self.slot_seconds;
        Ok(p)
    }
}

/// A network path that can be probed slot by slot.
pub trait PathDriver {
    /// Called once with the full probe schedule before the first send.
    fn prepare(&mut self, _pattern: &SamplingPattern, _config: &MeasurementConfig) -> Result<()> {
        Ok(())
    }

    /// Probe the path at `slot`.
    fn send(&mut self, slot: u64, config: &MeasurementConfig) -> Result<ProbeRecord>;
}

/// Drives probes through a simulated path.
pub struct SimnetDriver {
    pub path: PathConfig,
    pub seed: u64,
    state: Option<PathState>,
}

impl SimnetDriver {
    pub fn new(path: PathConfig, seed: u64) -> Self {
        Self { path, seed, state: None }
    }

    /// The simulated path after `prepare`.
    pub fn state(&self) -> Option<&PathState> {
        self.state.as_ref()
    }
}

impl PathDriver for SimnetDriver {
    fn prepare(&mut self, pattern: &SamplingPattern, _config: &MeasurementConfig) -> Result<()> {
        let cross = generate_cross(&self.path, pattern.len(), self.seed)?;
        self.state = Some(PathState::build(&self.path, cross, &pattern.sample_slots())?);
        Ok(())
    }

    fn send(&mut self, slot: u64, config: &MeasurementConfig) -> Result<ProbeRecord> {
        let st = self.state.as_ref().ok_or_else(|| Error::Driver {
            slot,
            reason: "simulator not prepared".into(),
        })?;
        if slot as usize >= st.len() {
            return Err(Error::Driver { slot, reason: "slot beyond simulated horizon".into() });
        }
        Ok(match config.probe_kind {
            ProbeKind::Single => {
                let p = st.probe(slot);
                ProbeRecord {
                    send_slot: slot,
                    delay: (!p.dropped).then_some(p.delay_slots),
                    pair_dispersion: None,
                }
            }
            ProbeKind::Pair => {
                let p = st.pair(slot, config.pair_gap);
                ProbeRecord {
                    send_slot: slot,
                    delay: (!p.dropped).then_some(p.delay_slots),
                    pair_dispersion: (!p.dropped).then_some(p.g_r),
                }
            }
        })
    }
}

/// Replays recorded probes.
pub struct ReplayDriver {
    records: HashMap<u64, ProbeRecord>,
}

impl ReplayDriver {
    pub fn new(records: &[ProbeRecord]) -> Self {
        Self {
            records: records.iter().map(|r| (r.send_slot, *r)).collect(),
        }
    }

    pub fn from_csv<R: Read>(r: R) -> Result<Self> {
        Ok(Self::new(&read_records_csv(r)?))
    }
}

impl PathDriver for ReplayDriver {
    fn send(&mut self, slot: u64, _config: &MeasurementConfig) -> Result<ProbeRecord> {
        self.records.get(&slot).copied().ok_or_else(|| Error::Driver {
            slot,
            reason: "no recorded probe for this slot".into(),
        })
    }
}

/// Send one probe per 1-slot of the configured pattern, in order.
pub fn run_measurement(driver: &mut dyn PathDriver, config: &MeasurementConfig) -> Result<Vec<ProbeRecord>> {
    let pattern = config.draw_pattern()?;
    driver.prepare(&pattern, config)?;
    pattern.sample_slots().into_iter().map(|s| driver.send(s, config)).collect()
}

/// Sampling pattern implied by a record list over `length` slots.
pub fn pattern_from_records(records: &[ProbeRecord], spec: &InterSampleSpec, length: usize) -> Result<SamplingPattern> {
    let mut values = vec![0.0; length];
    for r in records {
        let s = r.send_slot as usize;
        if s >= length {
            return Err(invalid(format!("probe slot {s} beyond pattern length {length}")));
        }
        values[s] = 1.0;
    }
    Ok(SamplingPattern {
        indicator: Trace::new(values, DEFAULT_SLOT_SECONDS, TraceKind::Binary)?,
        spec: *spec,
        seed: 0,
    })
}

fn check_alignment(records: &[ProbeRecord], pattern: &SamplingPattern) -> Result<()> {
    if records.len() != pattern.count() {
        return Err(Error::LengthMismatch { left: records.len(), right: pattern.count() });
    }
    let a = &pattern.indicator.values;
    if let Some(r) = records.iter().find(|r| a.get(r.send_slot as usize) != Some(&1.0)) {
        return Err(invalid(format!("probe at slot {} does not match a sampling slot", r.send_slot)));
    }
    Ok(())
}

/// W(t) = 1 if A(t) = 1 and the probe saw a delay above the reference
/// (or was lost), 0 otherwise.
pub fn busy_from_delays(records: &[ProbeRecord], pattern: &SamplingPattern, mode: ReferenceMode) -> Result<Trace> {
    check_alignment(records, pattern)?;
    let delays: Vec<f64> = records.iter().filter_map(|r| r.delay).collect();
    if delays.is_empty() {
        return Err(Error::InsufficientData("no successful probes".into()));
    }
    let reference = match mode {
        ReferenceMode::MinDelay => delays.iter().copied().fold(f64::INFINITY, f64::min),
        ReferenceMode::MeanDelay => delays.iter().sum::<f64>() / delays.len() as f64,
    };
    let threshold = reference + REFERENCE_TOLERANCE * reference.abs();
    let mut values = vec![0.0; pattern.len()];
    for r in records {
        let busy = match r.delay {
            None => true,
            Some(d) => d > threshold,
        };
        values[r.send_slot as usize] = if busy { 1.0 } else { 0.0 };
    }
    Trace::new(values, pattern.indicator.slot_seconds, TraceKind::Observation)
}

/// W(t) = C (g_r − g_s)/g_s, or g_r − g_s without a capacity; lost pairs give 0.
pub fn pair_intensity(records: &[ProbeRecord], pattern: &SamplingPattern, g_s: f64, capacity: Option<f64>) -> Result<Trace> {
    if !(g_s > 0.0) {
        return Err(invalid("g_s must be > 0"));
    }
    check_alignment(records, pattern)?;
    let mut values = vec![0.0; pattern.len()];
    for r in records {
        if let (Some(g_r), Some(_)) = (r.pair_dispersion, r.delay) {
            values[r.send_slot as usize] = match capacity {
                Some(c) => c * (g_r - g_s) / g_s,
                None => g_r - g_s,
            };
        }
    }
    Trace::new(values, pattern.indicator.slot_seconds, TraceKind::Observation)
}

/// Result of the probe analysis pipeline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    /// Reconstructed c_Y = c̃_W/μ_A² at lags ≥ 1.
    pub covariance: CovarianceSeries,
    pub cov_slope: HurstEstimate,
    pub agg_var: Option<HurstEstimate>,
    pub agg_var_error: Option<String>,
    pub moments: MomentEstimate,
    pub tau_star: f64,
    /// H used for τ*, and whether it came from the configuration.
    pub tau_star_hurst: f64,
    pub tau_star_hurst_configured: bool,
    /// Lag range of the covariance fit: [1, min(10³, τ*)].
    pub fit_range: (f64, f64),
    pub n_probes: usize,
    pub lost: usize,
    pub accuracy: AccuracyReport,
}

/// Observations → c̃_W → c_Y → Hurst estimates, for memoryless sampling.
///
/// `fit_range` overrides the covariance fit range.
pub fn analyze(records: &[ProbeRecord], config: &MeasurementConfig, fit_range: Option<(f64, f64)>) -> Result<Analysis> {
    config.validate()?;
    let spec = config.sampling;
    if !spec.is_geometric() {
        return Err(Error::Unsupported(format!(
            "probe analysis assumes geometric inter-probe times, got {}",
            spec.name()
        )));
    }
    let length = config
        .pattern_length()
        .max(records.iter().map(|r| r.send_slot as usize + 1).max().unwrap_or(0));
    let pattern = pattern_from_records(records, &spec, length)?;
    let w = observations(records, &pattern, config)?;
    analyze_observations(&w, config, fit_range, records.len(), records.iter().filter(|r| r.lost()).count())
}

/// Observation trace W(t) for the configured probe kind.
pub fn observations(records: &[ProbeRecord], pattern: &SamplingPattern, config: &MeasurementConfig) -> Result<Trace> {
    match config.probe_kind {
        ProbeKind::Single => busy_from_delays(records, pattern, config.reference_mode),
        ProbeKind::Pair => pair_intensity(records, pattern, config.pair_gap, config.capacity),
    }
}

/// The analysis half of [`analyze`], starting from W(t).
pub fn analyze_observations(
    w: &Trace,
    config: &MeasurementConfig,
    fit_range: Option<(f64, f64)>,
    n_probes: usize,
    lost: usize,
) -> Result<Analysis> {
    let spec = config.sampling;
    let t = w.len();
    let moments = estimate_moments(w, &spec)?;
    let max_lag = MAX_FIT_LAG.min(t / 10).max(1);
    let lags = log_lag_grid(1, max_lag, 20);
    let c_w = sample_autocov(&w.values, &lags, MeanMode::PerWindow)?;
    let c_y = reconstruct_cov(&c_w, &spec, &moments.moments)?.series;

    let mut inputs = AccuracyInputs {
        hurst: 0.75,
        variance: moments.moments.variance,
        mean: moments.moments.mean,
        prefactor: 1.0,
        mu_a: spec.mean_intensity(),
        sigma_a2: spec.variance(),
        sample_length: t,
    };
    let (h_tau, configured) = match config.model_hurst {
        Some(h) => (h, true),
        None => {
            let first = hurst_cov_slope(&c_y, (1.0, max_lag as f64))?;
            (first.value.clamp(0.51, 0.99), false)
        }
    };
    inputs.hurst = h_tau;
    let tau_star = accuracy::tau_star(&inputs)?;
    let range = fit_range.unwrap_or((1.0, (max_lag as f64).min(tau_star)));
    let cov_slope = hurst_cov_slope(&c_y, range)?;

    let sizes = default_block_sizes(t, M_LOW, 10);
    let (agg_var, agg_var_error) = match aggregate_variance(&w.values, &sizes)
        .and_then(|av| reconstruct_aggvar(&av, &spec, &moments.moments))
        .and_then(|av| hurst_agg_var(&av, (M_LOW as f64, (t / 100) as f64)))
    {
        Ok(h) => (Some(h), None),
        Err(e) => (None, Some(e.to_string())),
    };

    inputs.hurst = cov_slope.value.clamp(0.51, 0.99);
    let accuracy = accuracy::report(&inputs, &lags, 0.1, Some(&c_y))?;
    Ok(Analysis {
        covariance: c_y,
        cov_slope,
        agg_var,
        agg_var_error,
        moments,
        tau_star,
        tau_star_hurst: h_tau,
        tau_star_hurst_configured: configured,
        fit_range: range,
        n_probes,
        lost,
        accuracy,
    })
}
