//! Inverting sampling distortion: covariance, aggregate variance and spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::{AggVarSeries, CovarianceSeries, SeriesSource, SpectrumSeries};
use crate::sampling::{InterSampleSpec, SamplingPattern};
use crate::traffic::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficMoments {
    pub mean: f64,
    pub variance: f64,
}

/// Moments recovered from observations, with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub moments: TrafficMoments,
    /// Derived for Bernoulli sampling only; other variants are approximate.
    pub approximate: bool,
    /// The variance estimate came out negative and was clipped to 0.
    pub variance_clipped: bool,
}

/// c_W(τ) = (c_A(τ) + μ_A²) c_Y(τ) + c_A(τ) μ_Y², lag by lag.
pub fn forward_cov(c_y: &CovarianceSeries, spec: &InterSampleSpec, mu_y: f64) -> CovarianceSeries {
    let mu_a = spec.mean_intensity();
    let values = c_y
        .lags
        .iter()
        .zip(&c_y.values)
        .map(|(&lag, &cy)| {
            let ca = spec.c_a(lag);
            (ca + mu_a * mu_a) * cy + ca * mu_y * mu_y
        })
        .collect();
    CovarianceSeries {
        lags: c_y.lags.clone(),
        values,
        sample_length: c_y.sample_length,
        source: SeriesSource::Observation,
    }
}

/// Whether c_Y(τ) can be reconstructed at this lag under `spec`.
pub fn lag_admissible(spec: &InterSampleSpec, lag: usize) -> bool {
    match *spec {
        InterSampleSpec::Periodic { delta } => lag % delta == 0,
        InterSampleSpec::Uniform { .. } => spec.lag_is_exact(lag),
        _ => true,
    }
}

/// Filter a lag grid down to the admissible lags.
pub fn admissible_lags(spec: &InterSampleSpec, lags: &[usize]) -> Vec<usize> {
    lags.iter().copied().filter(|&l| lag_admissible(spec, l)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedCov {
    pub series: CovarianceSeries,
    /// Lags dropped because c_A(τ) + μ_A² vanished.
    pub dropped_lags: Vec<usize>,
}

/// Invert the covariance distortion: c_Y(τ) = (c_W(τ) − c_A(τ) μ_Y²) / (c_A(τ) + μ_A²).
///
/// For the four sampling variants this reduces to
/// geometric c_W/μ_A², periodic (c_W − μ_A μ_Y²(1 − μ_A))/μ_A at τ = kΔ,
/// Gamma(2) (c_W + μ_A²μ_Y² e^{−4μ_Aτ})/(μ_A²(1 − e^{−4μ_Aτ})), and the
/// uniform row for τ ≤ b.
pub fn reconstruct_cov(
    c_w: &CovarianceSeries,
    spec: &InterSampleSpec,
    moments: &TrafficMoments,
) -> Result<ReconstructedCov> {
    spec.validate()?;
    let mu_a = spec.mean_intensity();
    let mut lags = Vec::with_capacity(c_w.len());
    let mut values = Vec::with_capacity(c_w.len());
    let mut dropped = Vec::new();
    for (&lag, &cw) in c_w.lags.iter().zip(&c_w.values) {
        if !lag_admissible(spec, lag) {
            let reason = match spec {
                InterSampleSpec::Periodic { delta } => format!("periodic sampling only observes multiples of {delta}"),
                InterSampleSpec::Uniform { support_b } => format!("uniform c_A has no closed form beyond b = {support_b}"),
                _ => unreachable!(),
            };
            return Err(Error::InadmissibleLag { lag, reason });
        }
        let value = if spec.is_geometric() && lag > 0 {
            cw / (mu_a * mu_a)
        } else {
            let ca = spec.c_a(lag);
            let den = ca + mu_a * mu_a;
            if den.abs() < 1e-12 * mu_a * mu_a {
                dropped.push(lag);
                continue;
            }
            (cw - ca * moments.mean * moments.mean) / den
        };
        lags.push(lag);
        values.push(value);
    }
    Ok(ReconstructedCov {
        series: CovarianceSeries {
            lags,
            values,
            sample_length: c_w.sample_length,
            source: SeriesSource::Reconstructed,
        },
        dropped_lags: dropped,
    })
}

fn population_moments(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
    (m, v)
}

fn moments_from(mu_w: f64, var_w: f64, mu_a: f64, approximate: bool) -> MomentEstimate {
    let sigma_a2 = mu_a * (1.0 - mu_a);
    let mean = mu_w / mu_a;
    let raw = (var_w - sigma_a2 * mean * mean) / mu_a;
    // Exact zeros are common (constant traffic); ignore rounding noise.
    let tol = 1e-12 * (var_w.abs() + sigma_a2 * mean * mean) / mu_a;
    let variance_clipped = raw < -tol;
    MomentEstimate {
        moments: TrafficMoments { mean, variance: if raw > tol { raw } else { 0.0 } },
        approximate,
        variance_clipped,
    }
}

/// μ_Y = μ_W/μ_A and σ_Y² = (σ_W² − σ_A²μ_Y²)/μ_A with the design μ_A.
pub fn estimate_moments(w: &Trace, spec: &InterSampleSpec) -> Result<MomentEstimate> {
    spec.validate()?;
    let (mu_w, var_w) = population_moments(&w.values);
    Ok(moments_from(mu_w, var_w, spec.mean_intensity(), !spec.is_geometric()))
}

/// As [`estimate_moments`] but with the realised sampling fraction as μ_A.
pub fn estimate_moments_observed(w: &Trace, pattern: &SamplingPattern) -> Result<MomentEstimate> {
    if w.len() != pattern.len() {
        return Err(Error::LengthMismatch { left: w.len(), right: pattern.len() });
    }
    let n = pattern.count();
    if n == 0 {
        return Err(Error::InsufficientData("pattern contains no samples".into()));
    }
    let (mu_w, var_w) = population_moments(&w.values);
    let mu_a = n as f64 / pattern.len() as f64;
    if mu_a >= 1.0 {
        return Ok(MomentEstimate {
            moments: TrafficMoments { mean: mu_w, variance: var_w },
            approximate: false,
            variance_clipped: false,
        });
    }
    Ok(moments_from(mu_w, var_w, mu_a, !pattern.spec.is_geometric()))
}

/// Var(X^{(M)}) = c(0)/M + (2/M²) Σ_{τ=1}^{M−1} (M − τ) c(τ).
///
/// `c` must hold c(0), …, c(M−1).
pub fn aggvar_from_cov(c: impl Fn(usize) -> f64, m: usize) -> f64 {
    let mf = m as f64;
    let mut s = 0.0;
    for tau in 1..m {
        s += (mf - tau as f64) * c(tau);
    }
    c(0) / mf + 2.0 * s / (mf * mf)
}

/// Var(A^{(M)}) from the analytic c_A.
pub fn sampling_aggvar(spec: &InterSampleSpec, m: usize) -> f64 {
    if spec.is_geometric() {
        return spec.variance() / m as f64;
    }
    aggvar_from_cov(|t| spec.c_a(t), m)
}

/// Forward aggregate-variance distortion: Var(W^{(M)}) from Var(Y^{(M)}), the sampling process and c_Y.
///
/// `c_y` must contain lags 0..max(M)−1; its lag 0 supplies σ_Y².
pub fn forward_aggvar(
    var_y: &AggVarSeries,
    spec: &InterSampleSpec,
    mu_y: f64,
    c_y: &CovarianceSeries,
) -> Result<AggVarSeries> {
    let mu_a = spec.mean_intensity();
    let sigma_a2 = spec.variance();
    let max_m = var_y.block_sizes.iter().copied().max().unwrap_or(1);
    let needed = max_m.max(1);
    // Dense lookup 0..needed−1.
    let mut dense = vec![f64::NAN; needed];
    for (&l, &v) in c_y.lags.iter().zip(&c_y.values) {
        if l < needed {
            dense[l] = v;
        }
    }
    if let Some(missing) = dense.iter().position(|v| v.is_nan()) {
        return Err(invalid(format!("c_Y is missing lag {missing} (needs 0..{})", needed - 1)));
    }
    let sigma_y2 = dense[0];
    let variances = var_y
        .block_sizes
        .iter()
        .zip(&var_y.variances)
        .map(|(&m, &vy)| {
            let mf = m as f64;
            let mut cross = 0.0;
            if !spec.is_geometric() {
                for (tau, &c) in dense.iter().enumerate().take(m).skip(1) {
                    cross += (mf - tau as f64) * c * spec.c_a(tau);
                }
            }
            mu_y * mu_y * sampling_aggvar(spec, m)
                + mu_a * mu_a * vy
                + sigma_y2 * sigma_a2 / mf
                + 2.0 * cross / (mf * mf)
        })
        .collect();
    Ok(AggVarSeries {
        block_sizes: var_y.block_sizes.clone(),
        variances,
        sample_length: var_y.sample_length,
    })
}

/// Solve the aggregate-variance distortion for Var(Y^{(M)}) under Bernoulli sampling.
pub fn reconstruct_aggvar(
    var_w: &AggVarSeries,
    spec: &InterSampleSpec,
    moments: &TrafficMoments,
) -> Result<AggVarSeries> {
    if !spec.is_geometric() {
        return Err(Error::Unsupported(format!(
            "aggregate-variance inversion needs memoryless sampling; the {} cross term cannot be removed",
            spec.name()
        )));
    }
    let mu_a = spec.mean_intensity();
    let sigma_a2 = spec.variance();
    let TrafficMoments { mean, variance } = *moments;
    let variances = var_w
        .block_sizes
        .iter()
        .zip(&var_w.variances)
        .map(|(&m, &vw)| {
            let mf = m as f64;
            vw / (mu_a * mu_a) - (mean * mean * sigma_a2 / mf + variance * sigma_a2 / mf) / (mu_a * mu_a)
        })
        .collect();
    Ok(AggVarSeries {
        block_sizes: var_w.block_sizes.clone(),
        variances,
        sample_length: var_w.sample_length,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedPsd {
    pub series: SpectrumSeries,
    /// Bins whose inverted density was negative and floored at 0.
    pub floored: usize,
}

/// Ψ_Y(f) = (Ψ_W(f) − λ(1 − λ)(σ_Y² + μ_Y²)) / λ² with λ = μ_A.
///
/// Slotted Bernoulli sampling has Ψ_A(f) = λ²δ(f) + λ(1 − λ); the
/// continuous-time Poisson form subtracts λ(σ_Y² + μ_Y²) instead, which
/// agrees as λ → 0 but over-subtracts the white floor at λ = 0.1.
pub fn reconstruct_psd(
    psd_w: &SpectrumSeries,
    spec: &InterSampleSpec,
    moments: &TrafficMoments,
) -> Result<ReconstructedPsd> {
    match spec {
        InterSampleSpec::Geometric { .. } => {}
        InterSampleSpec::Periodic { .. } => return Err(Error::Aliasing),
        other => {
            return Err(Error::Unsupported(format!(
                "no closed-form spectral inversion for {} sampling",
                other.name()
            )))
        }
    }
    let lambda = spec.mean_intensity();
    let white = lambda * (1.0 - lambda) * (moments.variance + moments.mean * moments.mean);
    let mut floored = 0;
    let densities = psd_w
        .densities
        .iter()
        .map(|&d| {
            let v = (d - white) / (lambda * lambda);
            if v < 0.0 {
                floored += 1;
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(ReconstructedPsd {
        series: SpectrumSeries {
            frequencies: psd_w.frequencies.clone(),
            densities,
            segments: psd_w.segments,
            segment_len: psd_w.segment_len,
        },
        floored,
    })
}
