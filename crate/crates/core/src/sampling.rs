//! Sampling point processes A(t) and their analytic autocovariances.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng_for;
use crate::traffic::{Trace, TraceKind};

/// Inter-sample time distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case")]
pub enum InterSampleSpec {
    /// Bernoulli(p) per slot, i.e. geometric gaps.
    Geometric { p: f64 },
    /// Deterministic comb with period Δ and a random phase.
    Periodic { delta: usize },
    /// Gamma(α, β) gaps with μ_A = β/α.
    Gamma { alpha: u32, mean_intensity: f64 },
    /// Uniform(0, b) gaps, μ_A = 2/b.
    Uniform { support_b: f64 },
}

/// Analytic c_A(τ), flagged when the closed form is only an approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaValue {
    pub value: f64,
    pub exact: bool,
}

impl InterSampleSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            InterSampleSpec::Geometric { p } => {
                if !(p > 0.0 && p <= 1.0) {
                    return Err(invalid(format!("geometric p must lie in (0, 1], got {p}")));
                }
            }
            InterSampleSpec::Periodic { delta } => {
                if delta == 0 {
                    return Err(invalid("periodic delta must be >= 1"));
                }
            }
            InterSampleSpec::Gamma { alpha, mean_intensity } => {
                if alpha != 2 && alpha != 4 {
                    return Err(Error::Unsupported(format!(
                        "Gamma sampling supports alpha in {{2, 4}} only, got {alpha}"
                    )));
                }
                if !(mean_intensity > 0.0 && mean_intensity < 1.0) {
                    return Err(invalid(format!(
                        "Gamma mean intensity must lie in (0, 1), got {mean_intensity}"
                    )));
                }
            }
            InterSampleSpec::Uniform { support_b } => {
                // μ_A = 2/b must stay a probability per slot.
                if !(support_b >= 2.0) || !support_b.is_finite() {
                    return Err(invalid(format!("uniform support b must be >= 2, got {support_b}")));
                }
            }
        }
        Ok(())
    }

    /// μ_A.
    pub fn mean_intensity(&self) -> f64 {
        match *self {
            InterSampleSpec::Geometric { p } => p,
            InterSampleSpec::Periodic { delta } => 1.0 / delta as f64,
            InterSampleSpec::Gamma { mean_intensity, .. } => mean_intensity,
            InterSampleSpec::Uniform { support_b } => 2.0 / support_b,
        }
    }

    /// σ_A² of the binary per-slot indicator.
    pub fn variance(&self) -> f64 {
        let mu = self.mean_intensity();
        mu * (1.0 - mu)
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self, InterSampleSpec::Geometric { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            InterSampleSpec::Geometric { .. } => "geometric",
            InterSampleSpec::Periodic { .. } => "periodic",
            InterSampleSpec::Gamma { .. } => "gamma",
            InterSampleSpec::Uniform { .. } => "uniform",
        }
    }

    /// Whether the closed-form c_A holds for the slotted process at this lag.
    ///
    /// Uniform: only strictly inside the support. Rounded gaps put half the
    /// density mass on a gap of exactly b, so the slotted c_A(b) falls well
    /// short of the continuous form.
    pub fn lag_is_exact(&self, lag: usize) -> bool {
        match *self {
            InterSampleSpec::Uniform { support_b } => (lag as f64) < support_b,
            _ => true,
        }
    }

    pub fn analytic_autocov(&self, lag: usize) -> CaValue {
        let mu = self.mean_intensity();
        if lag == 0 {
            return CaValue { value: mu * (1.0 - mu), exact: true };
        }
        let tau = lag as f64;
        let value = match *self {
            InterSampleSpec::Geometric { .. } => 0.0,
            InterSampleSpec::Periodic { delta } => {
                let d = delta as f64;
                if lag % delta == 0 {
                    1.0 / d - 1.0 / (d * d)
                } else {
                    -1.0 / (d * d)
                }
            }
            InterSampleSpec::Gamma { alpha: 2, .. } => -mu * mu * (-4.0 * mu * tau).exp(),
            InterSampleSpec::Gamma { .. } => {
                let beta = 4.0 * mu;
                -mu * mu * ((-2.0 * beta * tau).exp() + 2.0 * (beta * tau).sin() * (-beta * tau).exp())
            }
            InterSampleSpec::Uniform { support_b } => {
                if tau <= support_b {
                    let value = mu * mu * (0.5 * (mu * tau / 2.0).exp() - 1.0);
                    return CaValue { value, exact: self.lag_is_exact(lag) };
                }
                return CaValue { value: 0.0, exact: false };
            }
        };
        CaValue { value, exact: true }
    }

    /// Shorthand for the value of [`analytic_autocov`](Self::analytic_autocov).
    pub fn c_a(&self, lag: usize) -> f64 {
        self.analytic_autocov(lag).value
    }
}

/// A realised sampling indicator A(t).
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPattern {
    pub indicator: Trace,
    pub spec: InterSampleSpec,
    pub seed: u64,
}

impl SamplingPattern {
    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indicator.is_empty()
    }

    /// Slots where A(t) = 1, in increasing order.
    pub fn sample_slots(&self) -> Vec<u64> {
        self.indicator
            .values
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == 1.0)
            .map(|(t, _)| t as u64)
            .collect()
    }

    pub fn count(&self) -> usize {
        self.indicator.values.iter().filter(|&&a| a == 1.0).count()
    }
}

fn round_gap(x: f64) -> usize {
    (x.round() as usize).max(1)
}

/// Place renewal events into `values`, starting well before slot 0 so that
/// the pattern observed from slot 0 on is in its stationary regime.
fn renewal_fill(values: &mut [f64], mean_intensity: f64, mut gap: impl FnMut() -> usize) {
    let burn_in = (50.0 / mean_intensity).ceil() as i64;
    let mut t = -burn_in;
    let n = values.len() as i64;
    while t < n {
        if t >= 0 {
            values[t as usize] = 1.0;
        }
        t += gap() as i64;
    }
}

/// Draw a stationary sampling pattern of the given length.
///
/// Continuous gaps are rounded to the nearest slot, at least one.
pub fn draw_pattern(spec: &InterSampleSpec, length: usize, seed: u64) -> Result<SamplingPattern> {
    spec.validate()?;
    if length == 0 {
        return Err(invalid("pattern length must be >= 1"));
    }
    let mut rng = rng_for(seed);
    let mut values = vec![0.0; length];
    match *spec {
        InterSampleSpec::Geometric { p } => {
            for v in &mut values {
                if rng.random::<f64>() < p {
                    *v = 1.0;
                }
            }
        }
        InterSampleSpec::Periodic { delta } => {
            let phase = rng.random_range(0..delta);
            for t in (phase..length).step_by(delta) {
                values[t] = 1.0;
            }
        }
        InterSampleSpec::Gamma { alpha, mean_intensity } => {
            let beta = alpha as f64 * mean_intensity;
            let dist = Gamma::new(alpha as f64, 1.0 / beta).map_err(|e| invalid(e.to_string()))?;
            renewal_fill(&mut values, spec.mean_intensity(), || round_gap(dist.sample(&mut rng)));
        }
        InterSampleSpec::Uniform { support_b } => {
            renewal_fill(&mut values, spec.mean_intensity(), || round_gap(rng.random::<f64>() * support_b));
        }
    }
    Ok(SamplingPattern {
        indicator: Trace::new(values, crate::traffic::DEFAULT_SLOT_SECONDS, TraceKind::Binary)?,
        spec: *spec,
        seed,
    })
}

/// W(t) = A(t) Y(t).
pub fn apply(pattern: &SamplingPattern, traffic: &Trace) -> Result<Trace> {
    let a = &pattern.indicator;
    if a.len() != traffic.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: traffic.len() });
    }
    if (a.slot_seconds - traffic.slot_seconds).abs() > 1e-12 * traffic.slot_seconds {
        return Err(invalid(format!(
            "slot durations differ: pattern {} s, traffic {} s",
            a.slot_seconds, traffic.slot_seconds
        )));
    }
    let values = a.values.iter().zip(&traffic.values).map(|(x, y)| x * y).collect();
    Trace::new(values, traffic.slot_seconds, TraceKind::Observation)
}
