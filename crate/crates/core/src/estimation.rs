//! Sample autocovariance, aggregate variance, periodogram and Hurst fits.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSource {
    Traffic,
    Observation,
    Sampling,
    Reconstructed,
}

impl SeriesSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesSource::Traffic => "traffic",
            SeriesSource::Observation => "observation",
            SeriesSource::Sampling => "sampling",
            SeriesSource::Reconstructed => "reconstructed",
        }
    }
}

/// (lag, value) pairs of an autocovariance function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSeries {
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub sample_length: usize,
    pub source: SeriesSource,
}

impl CovarianceSeries {
    pub fn new(lags: Vec<usize>, values: Vec<f64>, sample_length: usize, source: SeriesSource) -> Result<Self> {
        let s = Self { lags, values, sample_length, source };
        s.validate()?;
        Ok(s)
    }

    /// Evaluate `f` on the given lags.
    pub fn from_fn(lags: &[usize], sample_length: usize, source: SeriesSource, f: impl Fn(usize) -> f64) -> Self {
        Self {
            lags: lags.to_vec(),
            values: lags.iter().map(|&l| f(l)).collect(),
            sample_length,
            source,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lags.len() != self.values.len() {
            return Err(Error::LengthMismatch { left: self.lags.len(), right: self.values.len() });
        }
        if self.lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("lags must be strictly increasing"));
        }
        if let Some(&last) = self.lags.last() {
            if last >= self.sample_length {
                return Err(invalid(format!("max lag {last} must be below sample length {}", self.sample_length)));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn get(&self, lag: usize) -> Option<f64> {
        self.lags.binary_search(&lag).ok().map(|i| self.values[i])
    }

    /// Keep only lags in `[lo, hi]`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Self {
        let (lags, values) = self
            .lags
            .iter()
            .zip(&self.values)
            .filter(|(&l, _)| l >= lo && l <= hi)
            .map(|(&l, &v)| (l, v))
            .unzip();
        Self { lags, values, sample_length: self.sample_length, source: self.source }
    }

    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        writeln!(w, "# T={}", self.sample_length)?;
        writeln!(w, "# source={}", self.source.as_str())?;
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "lag,value")?;
        for (l, v) in self.lags.iter().zip(&self.values) {
            writeln!(w, "{l},{v:e}")?;
        }
        Ok(())
    }
}

/// Block sizes M and variances of the M-aggregated series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggVarSeries {
    pub block_sizes: Vec<usize>,
    pub variances: Vec<f64>,
    pub sample_length: usize,
}

impl AggVarSeries {
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        writeln!(w, "# T={}", self.sample_length)?;
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "M,variance")?;
        for (m, v) in self.block_sizes.iter().zip(&self.variances) {
            writeln!(w, "{m},{v:e}")?;
        }
        Ok(())
    }
}

/// One-sided density estimate over (0, 0.5] cycles/slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSeries {
    pub frequencies: Vec<f64>,
    pub densities: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
}

impl SpectrumSeries {
    /// Lowest 1.5 decades of frequency, dropping the 3 lowest bins.
    pub fn default_fit_range(&self) -> (f64, f64) {
        let f0 = self.frequencies[0];
        let lo = self.frequencies[3.min(self.frequencies.len() - 1)];
        (lo, f0 * 10f64.powf(1.5))
    }

    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> Result<()> {
        writeln!(w, "# segments={} segment_len={}", self.segments, self.segment_len)?;
        for (k, v) in meta {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "freq,density")?;
        for (f, d) in self.frequencies.iter().zip(&self.densities) {
            writeln!(w, "{f:e},{d:e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanMode {
    /// Separate means of the two overlapping windows.
    PerWindow,
    /// One mean over the whole series.
    Global,
    /// A known population mean.
    Known(f64),
}

/// Largest lag accepted relative to the series length, T ≥ 10·τ.
pub const MAX_LAG_FRACTION: usize = 10;

/// Log-spaced integer lags, about `per_decade` per decade, deduplicated.
pub fn log_lag_grid(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    assert!(lo >= 1 && hi >= lo);
    let decades = (hi as f64 / lo as f64).log10();
    let n = ((per_decade as f64 * decades).ceil() as usize).max(1);
    let mut out: Vec<usize> = (0..=n)
        .map(|i| (lo as f64 * 10f64.powf(decades * i as f64 / n as f64)).round() as usize)
        .map(|l| l.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

/// Σ a_i b_i with independent partial sums (lets the compiler vectorise).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s: f64 = acc.iter().sum();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let c = a.chunks_exact(8);
    let r = c.remainder();
    for x in c {
        for k in 0..8 {
            acc[k] += x[k];
        }
    }
    acc.iter().sum::<f64>() + r.iter().sum::<f64>()
}

/// c̃(τ) = (1/(T−τ)) Σ (y(t) − μ̃₀)(y(t+τ) − μ̃_τ) for each lag.
pub fn sample_autocov(series: &[f64], lags: &[usize], mode: MeanMode) -> Result<CovarianceSeries> {
    let t = series.len();
    if t < 2 {
        return Err(Error::InsufficientData("autocovariance needs at least 2 values".into()));
    }
    for &lag in lags {
        if lag >= t {
            return Err(Error::InadmissibleLag { lag, reason: format!("lag must be below T = {t}") });
        }
        if lag > 0 && lag * MAX_LAG_FRACTION > t {
            return Err(Error::InadmissibleLag {
                lag,
                reason: format!("T = {t} must be at least {MAX_LAG_FRACTION}x the lag"),
            });
        }
    }
    let mut sorted = lags.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    // Centre once; every mode is shift-invariant after the correction below.
    let centre = match mode {
        MeanMode::Known(mu) => mu,
        _ => sum(series) / t as f64,
    };
    let d: Vec<f64> = series.iter().map(|y| y - centre).collect();

    let values = sorted
        .iter()
        .map(|&lag| {
            let n = t - lag;
            let s = dot(&d[..n], &d[lag..]) / n as f64;
            match mode {
                MeanMode::PerWindow => s - (sum(&d[..n]) / n as f64) * (sum(&d[lag..]) / n as f64),
                MeanMode::Global | MeanMode::Known(_) => s,
            }
        })
        .collect();
    CovarianceSeries::new(sorted, values, t, SeriesSource::Traffic)
}

/// Variance of the non-overlapping M-block means; the trailing partial block is dropped.
pub fn aggregate_variance(series: &[f64], block_sizes: &[usize]) -> Result<AggVarSeries> {
    let t = series.len();
    let mut sizes = block_sizes.to_vec();
    sizes.sort_unstable();
    sizes.dedup();
    let mut variances = Vec::with_capacity(sizes.len());
    for &m in &sizes {
        if m == 0 {
            return Err(invalid("block size must be >= 1"));
        }
        if m * 100 > t {
            return Err(Error::InsufficientData(format!(
                "block size {m} leaves fewer than 100 blocks in T = {t}"
            )));
        }
        let means: Vec<f64> = series.chunks_exact(m).map(|b| sum(b) / m as f64).collect();
        let k = means.len() as f64;
        let grand = sum(&means) / k;
        variances.push(means.iter().map(|x| (x - grand) * (x - grand)).sum::<f64>() / k);
    }
    Ok(AggVarSeries { block_sizes: sizes, variances, sample_length: t })
}

/// Default block sizes: log grid on [lo, T/100].
pub fn default_block_sizes(t: usize, lo: usize, per_decade: usize) -> Vec<usize> {
    let hi = t / 100;
    if hi < lo {
        return Vec::new();
    }
    log_lag_grid(lo, hi, per_decade)
}

/// Minimum number of Welch segments.
pub const MIN_SEGMENTS: usize = 32;

/// Welch periodogram with a Hann window and per-segment mean removal.
///
/// Normalised so that a zero-mean iid series of variance σ² has density σ²
/// at every frequency. The segment length is the largest power of two
/// leaving at least 64 segments.
pub fn periodogram(series: &[f64]) -> Result<SpectrumSeries> {
    let t = series.len();
    if t < 1 << 12 {
        return Err(Error::InsufficientData(format!("periodogram needs T >= 4096, got {t}")));
    }
    let seg = prev_power_of_two(t / (2 * MIN_SEGMENTS));
    periodogram_with(series, seg)
}

pub fn periodogram_with(series: &[f64], segment_len: usize) -> Result<SpectrumSeries> {
    let t = series.len();
    if segment_len < 16 || !segment_len.is_power_of_two() {
        return Err(invalid("segment length must be a power of two >= 16"));
    }
    let k = t / segment_len;
    if k < MIN_SEGMENTS {
        return Err(Error::InsufficientData(format!(
            "only {k} segments of length {segment_len}; need {MIN_SEGMENTS}"
        )));
    }
    let l = segment_len;
    let window: Vec<f64> = (0..l)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / l as f64).cos())
        .collect();
    let wnorm: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(l);
    let half = l / 2;
    let mut acc = vec![0.0; half];
    let mut buf = vec![Complex::new(0.0, 0.0); l];
    for s in series.chunks_exact(l).take(k) {
        let m = sum(s) / l as f64;
        for ((b, x), w) in buf.iter_mut().zip(s).zip(&window) {
            *b = Complex::new((x - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf[1..=half]) {
            *a += b.norm_sqr();
        }
    }
    let scale = 1.0 / (wnorm * k as f64);
    Ok(SpectrumSeries {
        frequencies: (1..=half).map(|j| j as f64 / l as f64).collect(),
        densities: acc.into_iter().map(|a| a * scale).collect(),
        segments: k,
        segment_len: l,
    })
}

fn prev_power_of_two(n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    1 << (usize::BITS - 1 - n.leading_zeros())
}

/// OLS of log₁₀ y on log₁₀ x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub used: usize,
    /// Points in range with y ≤ 0.
    pub excluded: usize,
}

pub fn loglog_fit(x: &[f64], y: &[f64], fit_range: (f64, f64)) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let (lo, hi) = fit_range;
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    let mut excluded = 0;
    for (&xi, &yi) in x.iter().zip(y) {
        if !(xi >= lo && xi <= hi) || !(xi > 0.0) {
            continue;
        }
        if yi > 0.0 && yi.is_finite() {
            lx.push(xi.log10());
            ly.push(yi.log10());
        } else {
            excluded += 1;
        }
    }
    let n = lx.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "log-log fit needs >= 5 positive points in range, got {n} ({excluded} excluded)"
        )));
    }
    let nf = n as f64;
    let mx = lx.iter().sum::<f64>() / nf;
    let my = ly.iter().sum::<f64>() / nf;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("fit range contains a single abscissa".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    Ok(LogLogFit { slope, intercept, stderr, used: n, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HurstMethod {
    CovSlope,
    AggVar,
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub value: f64,
    pub slope: f64,
    pub slope_stderr: f64,
    pub method: HurstMethod,
    pub lag_or_scale_range: (f64, f64),
    /// The raw mapping fell outside (0, 1) and was clamped.
    pub out_of_range: bool,
    pub points_used: usize,
    pub points_excluded: usize,
}

/// cov_slope / agg_var: H = 1 + slope/2; psd: H = (1 − slope)/2.
pub fn hurst_from_slope(slope: f64, method: HurstMethod) -> HurstEstimate {
    let raw = match method {
        HurstMethod::CovSlope | HurstMethod::AggVar => 1.0 + slope / 2.0,
        HurstMethod::Psd => (1.0 - slope) / 2.0,
    };
    let eps = 1e-9;
    let out_of_range = !(raw > 0.0 && raw < 1.0);
    HurstEstimate {
        value: raw.clamp(eps, 1.0 - eps),
        slope,
        slope_stderr: 0.0,
        method,
        lag_or_scale_range: (f64::NAN, f64::NAN),
        out_of_range,
        points_used: 0,
        points_excluded: 0,
    }
}

fn hurst_from_fit(fit: &LogLogFit, method: HurstMethod, range: (f64, f64)) -> HurstEstimate {
    let mut h = hurst_from_slope(fit.slope, method);
    h.slope_stderr = fit.stderr;
    h.lag_or_scale_range = range;
    h.points_used = fit.used;
    h.points_excluded = fit.excluded;
    h
}

/// Covariance-slope H over lags in `[lo, hi]`.
pub fn hurst_cov_slope(cov: &CovarianceSeries, range: (f64, f64)) -> Result<HurstEstimate> {
    let x: Vec<f64> = cov.lags.iter().map(|&l| l as f64).collect();
    let fit = loglog_fit(&x, &cov.values, range)?;
    Ok(hurst_from_fit(&fit, HurstMethod::CovSlope, range))
}

pub fn hurst_agg_var(av: &AggVarSeries, range: (f64, f64)) -> Result<HurstEstimate> {
    let x: Vec<f64> = av.block_sizes.iter().map(|&m| m as f64).collect();
    let fit = loglog_fit(&x, &av.variances, range)?;
    Ok(hurst_from_fit(&fit, HurstMethod::AggVar, range))
}

pub fn hurst_psd(spec: &SpectrumSeries, range: (f64, f64)) -> Result<HurstEstimate> {
    let fit = loglog_fit(&spec.frequencies, &spec.densities, range)?;
    Ok(hurst_from_fit(&fit, HurstMethod::Psd, range))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_for;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn iid(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng_for(seed);
        (0..n).map(|_| r.sample(StandardNormal)).collect()
    }

    #[test]
    fn constant_series_has_zero_autocov() {
        let c = sample_autocov(&[3.0; 1000], &[1, 5, 50], MeanMode::PerWindow).unwrap();
        assert!(c.values.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn alternating_known_mean() {
        let x: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c = sample_autocov(&x, &[1], MeanMode::Known(0.0)).unwrap();
        assert_eq!(c.values[0], -1.0);
    }

    #[test]
    fn lag_guards() {
        let x = vec![0.0; 100];
        assert!(matches!(sample_autocov(&x, &[100], MeanMode::Global), Err(Error::InadmissibleLag { .. })));
        assert!(sample_autocov(&x, &[11], MeanMode::Global).is_err());
        assert!(sample_autocov(&x, &[10], MeanMode::Global).is_ok());
    }

    #[test]
    fn per_window_matches_definition() {
        let x = iid(500, 1);
        let tau = 7;
        let n = x.len() - tau;
        let m0 = x[..n].iter().sum::<f64>() / n as f64;
        let mt = x[tau..].iter().sum::<f64>() / n as f64;
        let direct = (0..n).map(|t| (x[t] - m0) * (x[t + tau] - mt)).sum::<f64>() / n as f64;
        let c = sample_autocov(&x, &[tau], MeanMode::PerWindow).unwrap();
        assert!((c.values[0] - direct).abs() < 1e-12);
    }

    #[test]
    fn iid_autocov_small() {
        let x = iid(1_000_000, 2);
        let c = sample_autocov(&x, &[10], MeanMode::PerWindow).unwrap();
        assert!(c.values[0].abs() < 4.0 / 1000.0);
    }

    #[test]
    fn grid_shape() {
        let g = log_lag_grid(1, 1000, 20);
        assert_eq!(g[0], 1);
        assert_eq!(*g.last().unwrap(), 1000);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g.len() > 40 && g.len() <= 61);
    }

    #[test]
    fn aggvar_m1_is_variance() {
        let x = iid(10_000, 3);
        let av = aggregate_variance(&x, &[1]).unwrap();
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / x.len() as f64;
        assert!((av.variances[0] - v).abs() < 1e-12);
    }

    #[test]
    fn aggvar_iid_slope_minus_one() {
        let x = iid(1_000_000, 4);
        let sizes = default_block_sizes(x.len(), 10, 10);
        let av = aggregate_variance(&x, &sizes).unwrap();
        let h = hurst_agg_var(&av, (10.0, 1e4)).unwrap();
        assert!((h.slope + 1.0).abs() < 0.05, "{}", h.slope);
        assert!(aggregate_variance(&x, &[10_001]).is_err());
    }

    #[test]
    fn white_spectrum_is_flat() {
        let x = iid(1 << 18, 5);
        let s = periodogram(&x).unwrap();
        assert!(s.segments >= MIN_SEGMENTS);
        let lowdec: Vec<f64> = s
            .frequencies
            .iter()
            .zip(&s.densities)
            .filter(|(&f, _)| f <= 10.0 * s.frequencies[0])
            .map(|(_, &d)| d)
            .collect();
        let mean = lowdec.iter().sum::<f64>() / lowdec.len() as f64;
        assert!((mean - 1.0).abs() < 0.1, "{mean}");
    }

    #[test]
    fn cosine_peak() {
        let n = 1 << 14;
        let f0 = 0.125;
        let x: Vec<f64> = (0..n).map(|t| (2.0 * std::f64::consts::PI * f0 * t as f64).cos()).collect();
        let s = periodogram(&x).unwrap();
        let (imax, _) = s
            .densities
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        assert!((s.frequencies[imax] - f0).abs() < 1e-12);
    }

    #[test]
    fn short_series_rejected() {
        assert!(periodogram(&[0.0; 4095]).is_err());
    }

    #[test]
    fn fit_exact_power_laws() {
        let x: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|a| a.powf(-0.4)).collect();
        let f = loglog_fit(&x, &y, (1.0, 100.0)).unwrap();
        assert!((f.slope + 0.4).abs() < 1e-12 && f.stderr < 1e-10);

        let y3: Vec<f64> = x.iter().map(|a| 3.0 * a.sqrt()).collect();
        let f = loglog_fit(&x, &y3, (1.0, 100.0)).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.intercept - 3f64.log10()).abs() < 1e-12);

        let neg = vec![-1.0; x.len()];
        assert!(loglog_fit(&x, &neg, (1.0, 100.0)).is_err());
    }

    #[test]
    fn fit_counts_exclusions() {
        let x: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let mut y: Vec<f64> = x.iter().map(|a| 1.0 / a).collect();
        y[9] = -0.1;
        y[8] = 0.0;
        let f = loglog_fit(&x, &y, (1.0, 10.0)).unwrap();
        assert_eq!((f.used, f.excluded), (8, 2));
    }

    #[test]
    fn slope_mappings() {
        assert!((hurst_from_slope(-0.4, HurstMethod::CovSlope).value - 0.8).abs() < 1e-12);
        assert!((hurst_from_slope(-0.6, HurstMethod::Psd).value - 0.8).abs() < 1e-12);
        assert!((hurst_from_slope(-1.0, HurstMethod::AggVar).value - 0.5).abs() < 1e-12);
        let h = hurst_from_slope(0.5, HurstMethod::CovSlope);
        assert!(h.out_of_range && h.value < 1.0);
    }
}
