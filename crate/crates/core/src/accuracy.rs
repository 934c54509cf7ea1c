//! Closed-form finite-sample accuracy model for sampled covariance estimates.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimation::CovarianceSeries;
use crate::sampling::InterSampleSpec;
use crate::traffic::LrdModel;

/// Minimum T·(1/τ) ratio under which the CLT formulas are trusted.
pub const MIN_T_OVER_TAU: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyInputs {
    pub hurst: f64,
    /// σ_Y²
    pub variance: f64,
    /// μ_Y
    pub mean: f64,
    /// K
    pub prefactor: f64,
    /// μ_A
    pub mu_a: f64,
    /// σ_A²
    pub sigma_a2: f64,
    pub sample_length: usize,
}

impl AccuracyInputs {
    pub fn new(model: &LrdModel, spec: &InterSampleSpec, sample_length: usize) -> Self {
        Self {
            hurst: model.hurst,
            variance: model.variance,
            mean: model.mean_rate,
            prefactor: model.prefactor,
            mu_a: spec.mean_intensity(),
            sigma_a2: spec.variance(),
            sample_length,
        }
    }

    fn t(&self) -> f64 {
        self.sample_length as f64
    }

    /// σ_A²μ_Y² + μ_Aσ_Y², the variance of W under Bernoulli sampling.
    fn var_w(&self) -> f64 {
        self.sigma_a2 * self.mean * self.mean + self.mu_a * self.variance
    }

    /// Model covariance K σ_Y² τ^{2H−2}.
    pub fn model_cov(&self, tau: f64) -> f64 {
        self.prefactor * self.variance * tau.powf(2.0 * self.hurst - 2.0)
    }
}

/// Half-width of the 95% band of c̃_W(τ) for sampled iid Gaussian traffic.
pub fn noise_floor(inputs: &AccuracyInputs) -> Result<f64> {
    if inputs.sample_length < 1000 {
        return Err(invalid(format!("noise floor needs T >= 1000, got {}", inputs.sample_length)));
    }
    let a = inputs.var_w();
    let m2 = inputs.mu_a * inputs.mu_a * inputs.mean * inputs.mean;
    Ok(2.0 * (a * a + 4.0 * m2 * a).sqrt() / inputs.t().sqrt())
}

/// Largest lag at which K σ_Y² τ^{2H−2} μ_A² stays above the noise floor.
pub fn tau_star(inputs: &AccuracyInputs) -> Result<f64> {
    if !(inputs.hurst > 0.5 && inputs.hurst < 1.0) {
        return Err(invalid(format!("hurst must lie in (0.5, 1), got {}", inputs.hurst)));
    }
    let floor = noise_floor(inputs)?;
    let base = inputs.prefactor * inputs.variance * inputs.mu_a * inputs.mu_a / floor;
    Ok(base.powf(1.0 / (2.0 - 2.0 * inputs.hurst)))
}

/// c^{.95}_A: half-width 2σ_A√(σ_A² + 4μ_A²)/√(T − τ).
pub fn sampling_cov_ci(mu_a: f64, sigma_a2: f64, sample_length: usize, tau: usize) -> Result<f64> {
    if tau >= sample_length {
        return Err(Error::InadmissibleLag { lag: tau, reason: format!("lag must be below T = {sample_length}") });
    }
    let n = (sample_length - tau) as f64;
    Ok(2.0 * sigma_a2.sqrt() * (sigma_a2 + 4.0 * mu_a * mu_a).sqrt() / n.sqrt())
}

/// c^{.95}_Y(τ) = c^{.95}_A (c_Y(τ) + μ_Y²)/μ_A², the noise cone of c̃_W/μ_A².
pub fn noise_cone_y(inputs: &AccuracyInputs, tau: usize, c_y: f64) -> Result<f64> {
    let ci = sampling_cov_ci(inputs.mu_a, inputs.sigma_a2, inputs.sample_length, tau)?;
    Ok(ci * (c_y + inputs.mean * inputs.mean) / (inputs.mu_a * inputs.mu_a))
}

/// Band for a reconstructed c_Y(τ) combining the noise floor (iid part of
/// the observation noise) with the c_Y-proportional part of the noise cone,
/// in c_Y units. The μ_Y² part of the cone is already inside the floor.
pub fn reconstruction_band(inputs: &AccuracyInputs, tau: usize, c_y: f64) -> Result<f64> {
    let floor = noise_floor(inputs)?;
    let ci = sampling_cov_ci(inputs.mu_a, inputs.sigma_a2, inputs.sample_length, tau)?;
    let extra = ci * c_y.abs();
    Ok((floor * floor + extra * extra).sqrt() / (inputs.mu_a * inputs.mu_a))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeError {
    pub value: f64,
    /// Large-lag asymptote, reported once c_Y(τ) < μ_Y²/100.
    pub asymptote: Option<f64>,
    pub ratio: Option<f64>,
}

fn relative_prefactor(inputs: &AccuracyInputs, tau: usize) -> Result<f64> {
    let ci = sampling_cov_ci(inputs.mu_a, inputs.sigma_a2, inputs.sample_length, tau)?;
    Ok(ci / (inputs.mu_a * inputs.mu_a))
}

/// ε(τ) = 2σ_A√(σ_A²+4μ_A²)/(√(T−τ) μ_A²) · (1 + μ_Y²/c_Y(τ)).
pub fn relative_error(inputs: &AccuracyInputs, tau: usize, c_y: f64) -> Result<RelativeError> {
    if !(c_y > 0.0) {
        return Err(invalid(format!("relative error needs c_Y > 0, got {c_y}")));
    }
    let pre = relative_prefactor(inputs, tau)?;
    let mu2 = inputs.mean * inputs.mean;
    let value = pre * (1.0 + mu2 / c_y);
    let (asymptote, ratio) = if c_y < mu2 / 100.0 {
        // c_Y ≈ σ_Y² τ^{2H−2} substituted
        let a = pre * mu2 * (tau as f64).powf(2.0 - 2.0 * inputs.hurst) / inputs.variance;
        (Some(a), Some(value / a))
    } else {
        (None, None)
    };
    Ok(RelativeError { value, asymptote, ratio })
}

/// T achieving relative error `target_eps` at lag τ in the large-lag regime:
/// T = τ + [2σ_A√(σ_A²+4μ_A²) μ_Y² τ^{2−2H} / (ε μ_A² σ_Y²)]².
pub fn required_duration(inputs: &AccuracyInputs, tau: usize, target_eps: f64) -> Result<f64> {
    if !(target_eps > 0.0) {
        return Err(invalid("target relative error must be > 0"));
    }
    let s = inputs.sigma_a2.sqrt() * 2.0 * (inputs.sigma_a2 + 4.0 * inputs.mu_a * inputs.mu_a).sqrt();
    let root = s * inputs.mean * inputs.mean * (tau as f64).powf(2.0 - 2.0 * inputs.hurst)
        / (target_eps * inputs.mu_a * inputs.mu_a * inputs.variance);
    Ok(tau as f64 + root * root)
}

/// −σ_Y²/(T−τ)^{2−2H}, the expected underestimate of c̃_Y(τ).
pub fn bias_y(inputs: &AccuracyInputs, tau: usize) -> Result<f64> {
    if tau >= inputs.sample_length {
        return Err(Error::InadmissibleLag { lag: tau, reason: "lag must be below T".into() });
    }
    let n = (inputs.sample_length - tau) as f64;
    Ok(-inputs.variance / n.powf(2.0 - 2.0 * inputs.hurst))
}

/// −c_W(0)/(T−τ) − (2/(T−τ)²) Σ_{t=1}^{T−τ−1} (T−τ−t) c_W(t).
///
/// `c_w` must contain every lag 0..T−τ−1.
pub fn bias_w(c_w: &CovarianceSeries, sample_length: usize, tau: usize) -> Result<f64> {
    if tau >= sample_length {
        return Err(Error::InadmissibleLag { lag: tau, reason: "lag must be below T".into() });
    }
    let n = sample_length - tau;
    if c_w.lags.len() < n || c_w.lags[..n].iter().enumerate().any(|(i, &l)| i != l) {
        return Err(invalid(format!("c_W must hold the dense lags 0..{}", n - 1)));
    }
    let nf = n as f64;
    let mut s = 0.0;
    for t in 1..n {
        s += (nf - t as f64) * c_w.values[t];
    }
    Ok(-c_w.values[0] / nf - 2.0 * s / (nf * nf))
}

/// Evaluated accuracy model for a set of lags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub inputs: AccuracyInputs,
    pub tau_star: f64,
    pub noise_floor_halfwidth: f64,
    pub lags: Vec<usize>,
    pub sampling_ci_halfwidth: Vec<f64>,
    pub relative_error: Vec<f64>,
    pub bias_y: Vec<f64>,
    /// Required T for `target_eps` at each lag.
    pub required_t: Vec<f64>,
    pub target_eps: f64,
    /// Lags violating T ≥ 10τ, for which the CLT formulas are not trusted.
    pub flagged_lags: Vec<usize>,
    /// Where c_Y inside the relative error came from.
    pub c_y_source: String,
}

/// Build a report on `lags`; c_Y comes from the model unless `c_y` is given.
pub fn report(
    inputs: &AccuracyInputs,
    lags: &[usize],
    target_eps: f64,
    c_y: Option<&CovarianceSeries>,
) -> Result<AccuracyReport> {
    let mut out = AccuracyReport {
        inputs: *inputs,
        tau_star: tau_star(inputs)?,
        noise_floor_halfwidth: noise_floor(inputs)?,
        lags: Vec::new(),
        sampling_ci_halfwidth: Vec::new(),
        relative_error: Vec::new(),
        bias_y: Vec::new(),
        required_t: Vec::new(),
        target_eps,
        flagged_lags: Vec::new(),
        c_y_source: if c_y.is_some() { "estimate".into() } else { "model".into() },
    };
    for &lag in lags.iter().filter(|&&l| l >= 1 && l < inputs.sample_length) {
        if (inputs.sample_length as f64) < MIN_T_OVER_TAU * lag as f64 {
            out.flagged_lags.push(lag);
        }
        let cy = match c_y {
            Some(s) => s.get(lag).unwrap_or(f64::NAN),
            None => inputs.model_cov(lag as f64),
        };
        out.lags.push(lag);
        out.sampling_ci_halfwidth.push(sampling_cov_ci(inputs.mu_a, inputs.sigma_a2, inputs.sample_length, lag)?);
        out.relative_error.push(if cy > 0.0 { relative_error(inputs, lag, cy)?.value } else { f64::NAN });
        out.bias_y.push(bias_y(inputs, lag)?);
        out.required_t.push(required_duration(inputs, lag, target_eps)?);
    }
    Ok(out)
}
