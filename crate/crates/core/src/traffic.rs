//! LRD traffic synthesis, reference autocovariances and trace persistence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng_for;

/// Second-order description of an LRD increment process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrdModel {
    pub hurst: f64,
    /// σ_Y², per-slot units².
    pub variance: f64,
    /// μ_Y, units per slot.
    pub mean_rate: f64,
    /// K in c_Y(τ) ≈ K σ_Y² τ^{2H−2}.
    #[serde(default = "default_prefactor")]
    pub prefactor: f64,
}

fn default_prefactor() -> f64 {
    1.0
}

impl LrdModel {
    pub fn new(hurst: f64, variance: f64, mean_rate: f64) -> Result<Self> {
        let m = Self {
            hurst,
            variance,
            mean_rate,
            prefactor: 1.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_prefactor(mut self, prefactor: f64) -> Result<Self> {
        self.prefactor = prefactor;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.hurst > 0.5 && self.hurst < 1.0) {
            return Err(invalid(format!("hurst must lie in (0.5, 1), got {}", self.hurst)));
        }
        if !(self.variance > 0.0) || !self.variance.is_finite() {
            return Err(invalid(format!("variance must be > 0, got {}", self.variance)));
        }
        if !(self.mean_rate >= 0.0) || !self.mean_rate.is_finite() {
            return Err(invalid(format!("mean_rate must be >= 0, got {}", self.mean_rate)));
        }
        if !(self.prefactor > 0.0) || !self.prefactor.is_finite() {
            return Err(invalid(format!("prefactor must be > 0, got {}", self.prefactor)));
        }
        Ok(())
    }

    /// Asymptotic prefactor of exact fGn, H(2H−1).
    pub fn fgn_prefactor(&self) -> f64 {
        self.hurst * (2.0 * self.hurst - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Increments,
    Binary,
    Observation,
}

impl TraceKind {
    fn code(self) -> u16 {
        match self {
            TraceKind::Increments => 0,
            TraceKind::Binary => 1,
            TraceKind::Observation => 2,
        }
    }

    fn from_code(code: u16) -> Result<Self> {
        match code {
            0 => Ok(TraceKind::Increments),
            1 => Ok(TraceKind::Binary),
            2 => Ok(TraceKind::Observation),
            c => Err(Error::Format(format!("unknown trace kind {c}"))),
        }
    }
}

/// Discrete-time series with slot metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub slot_seconds: f64,
    pub values: Vec<f64>,
    pub kind: TraceKind,
    /// Fraction of slots clipped at zero when a Gaussian trace was made nonnegative.
    pub clipped_fraction: f64,
}

pub const DEFAULT_SLOT_SECONDS: f64 = 1e-3;

impl Trace {
    pub fn new(values: Vec<f64>, slot_seconds: f64, kind: TraceKind) -> Result<Self> {
        let t = Self {
            slot_seconds,
            values,
            kind,
            clipped_fraction: 0.0,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn increments(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DEFAULT_SLOT_SECONDS, TraceKind::Increments)
    }

    pub fn binary(values: Vec<f64>) -> Result<Self> {
        Self::new(values, DEFAULT_SLOT_SECONDS, TraceKind::Binary)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(invalid("trace must contain at least one value"));
        }
        if !(self.slot_seconds > 0.0) || !self.slot_seconds.is_finite() {
            return Err(invalid(format!("slot_seconds must be > 0, got {}", self.slot_seconds)));
        }
        if self.kind == TraceKind::Binary && self.values.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(invalid("binary trace contains values other than 0 and 1"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Population variance (divisor T).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.values.len() as f64
    }

    /// Clip negative values to zero, recording the clipped fraction.
    pub fn clip_nonnegative(mut self) -> Self {
        let mut clipped = 0usize;
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
                clipped += 1;
            }
        }
        self.clipped_fraction = clipped as f64 / self.values.len() as f64;
        self
    }
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Exact fGn autocovariance (σ²/2)(|τ+1|^{2H} − 2|τ|^{2H} + |τ−1|^{2H}).
pub fn fgn_autocov(model: &LrdModel, lag: usize) -> f64 {
    model.variance * fgn_unit_autocov(model.hurst, lag)
}

/// Unit-variance fGn autocovariance, valid for any H in (0, 1].
///
/// The second difference of k^{2H} cancels catastrophically for large k,
/// so beyond a cutoff the binomial expansion
/// k^{2H} · 2 Σ_{j≥1} C(2H, 2j) k^{−2j} is summed instead.
pub fn fgn_unit_autocov(hurst: f64, lag: usize) -> f64 {
    const SERIES_CUTOFF: usize = 64;
    let a = 2.0 * hurst;
    if lag == 0 {
        return 1.0;
    }
    let k = lag as f64;
    if lag < SERIES_CUTOFF {
        return 0.5 * ((k + 1.0).powf(a) - 2.0 * k.powf(a) + (k - 1.0).powf(a));
    }
    let x2 = 1.0 / (k * k);
    let mut total = 0.0;
    let mut power = 1.0;
    let mut binom = 1.0; // C(a, i), advanced incrementally
    let mut i = 0.0;
    for _ in 0..8 {
        // two factors per term: C(a, 2j) from C(a, 2j-2)
        binom *= (a - i) / (i + 1.0);
        binom *= (a - i - 1.0) / (i + 2.0);
        i += 2.0;
        power *= x2;
        total += binom * power;
    }
    k.powf(a) * total
}

/// Largest circulant embedding we are willing to allocate (complex f64 entries).
pub const MAX_EMBEDDING: usize = 1 << 26;

/// Davies–Harte synthesiser for unit-variance fGn of a fixed length.
///
/// One FFT yields two independent traces (real and imaginary parts).
#[derive(Debug)]
pub struct FgnGenerator {
    hurst: f64,
    length: usize,
    /// sqrt(λ_k / m)
    scale: Vec<f64>,
}

impl FgnGenerator {
    pub fn new(hurst: f64, length: usize) -> Result<Self> {
        if !(hurst > 0.0 && hurst < 1.0) {
            return Err(invalid(format!("hurst must lie in (0, 1), got {hurst}")));
        }
        if length < 2 {
            return Err(invalid("fGn length must be >= 2"));
        }
        let m = (2 * (length - 1)).next_power_of_two();
        if m > MAX_EMBEDDING {
            return Err(invalid(format!(
                "length {length} needs a circulant embedding of {m} > {MAX_EMBEDDING} points (memory budget)"
            )));
        }
        let half = m / 2;
        let mut row: Vec<Complex<f64>> = Vec::with_capacity(m);
        for k in 0..=half {
            row.push(Complex::new(fgn_unit_autocov(hurst, k), 0.0));
        }
        for k in (1..half).rev() {
            row.push(Complex::new(fgn_unit_autocov(hurst, k), 0.0));
        }
        FftPlanner::new().plan_fft_forward(m).process(&mut row);

        let mut min_eig = f64::INFINITY;
        let scale = row
            .iter()
            .map(|c| {
                min_eig = min_eig.min(c.re);
                (c.re.max(0.0) / m as f64).sqrt()
            })
            .collect();
        // Round-off may push exact zeros slightly negative; anything larger is a real failure.
        if min_eig < -1e-8 {
            return Err(Error::Internal(format!(
                "circulant embedding has negative eigenvalue {min_eig:.3e} (H={hurst}, n={length})"
            )));
        }
        Ok(Self { hurst, length, scale })
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    pub fn length(&self) -> usize {
        self.length
    }

    /// Two independent unit-variance fGn paths.
    pub fn generate_pair<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let m = self.scale.len();
        let mut buf: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|&s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(re * s, im * s)
            })
            .collect();
        FftPlanner::new().plan_fft_forward(m).process(&mut buf);
        buf.truncate(self.length);
        let re = buf.iter().map(|c| c.re).collect();
        let im = buf.iter().map(|c| c.im).collect();
        (re, im)
    }
}

static GENERATOR_CACHE: Mutex<Option<Arc<FgnGenerator>>> = Mutex::new(None);

/// Shared generator for (H, n); the eigenvalue vector is the expensive part.
pub fn cached_generator(hurst: f64, length: usize) -> Result<Arc<FgnGenerator>> {
    let mut slot = GENERATOR_CACHE.lock().unwrap_or_else(|p| p.into_inner());
    if let Some(g) = slot.as_ref() {
        if g.hurst.to_bits() == hurst.to_bits() && g.length == length {
            return Ok(Arc::clone(g));
        }
    }
    // Release the old embedding before allocating the next one.
    *slot = None;
    let g = Arc::new(FgnGenerator::new(hurst, length)?);
    *slot = Some(Arc::clone(&g));
    Ok(g)
}

/// Exact fGn trace: σ_Y·X + μ_Y with X unit fGn.
pub fn gen_fgn(model: &LrdModel, length: usize, seed: u64) -> Result<Trace> {
    Ok(gen_fgn_pair(model, length, seed)?.0)
}

/// Both traces of one circulant draw; they are independent realisations.
pub fn gen_fgn_pair(model: &LrdModel, length: usize, seed: u64) -> Result<(Trace, Trace)> {
    model.validate()?;
    let generator = cached_generator(model.hurst, length)?;
    let (a, b) = generator.generate_pair(&mut rng_for(seed));
    let sigma = model.variance.sqrt();
    let wrap = |v: Vec<f64>| {
        let values = v.into_iter().map(|x| sigma * x + model.mean_rate).collect();
        Trace::new(values, DEFAULT_SLOT_SECONDS, TraceKind::Increments)
    };
    Ok((wrap(a)?, wrap(b)?))
}

/// Superposition of heavy-tailed on-off sources.
///
/// On and off periods are iid Pareto(α) with unit scale, rounded up to whole
/// slots; each source starts in its stationary regime (equilibrium residual
/// of the first period). The aggregate is scaled so that its sample mean is
/// `mean_rate`.
pub fn gen_onoff(n_sources: usize, tail_index: f64, mean_rate: f64, length: usize, seed: u64) -> Result<Trace> {
    if n_sources == 0 {
        return Err(invalid("n_sources must be >= 1"));
    }
    if !(tail_index > 1.0 && tail_index < 2.0) {
        return Err(invalid(format!("tail index must lie in (1, 2), got {tail_index}")));
    }
    if !(mean_rate >= 0.0) || length == 0 {
        return Err(invalid("mean_rate must be >= 0 and length >= 1"));
    }
    let alpha = tail_index;
    let mut rng = rng_for(seed);
    // Difference array of active-source counts.
    let mut delta = vec![0i64; length + 1];
    let inv_alpha = 1.0 / alpha;

    let pareto = |u: f64| -> f64 { (1.0 - u).powf(-inv_alpha) };
    // Inverse of the equilibrium residual survival function for Pareto(α, 1).
    let residual = |u: f64| -> f64 {
        if u <= inv_alpha {
            (alpha * u).max(f64::MIN_POSITIVE).powf(-1.0 / (alpha - 1.0))
        } else {
            1.0 - (u - inv_alpha) * alpha / (alpha - 1.0)
        }
    };
    let to_slots = |x: f64| -> usize {
        if x >= length as f64 {
            length
        } else {
            (x.ceil() as usize).max(1)
        }
    };

    for _ in 0..n_sources {
        let mut on = rng.random::<f64>() < 0.5;
        let mut t = 0usize;
        let mut dur = to_slots(residual(rng.random::<f64>()));
        loop {
            let end = (t + dur).min(length);
            if on {
                delta[t] += 1;
                delta[end] -= 1;
            }
            if end >= length {
                break;
            }
            t = end;
            on = !on;
            dur = to_slots(pareto(rng.random::<f64>()));
        }
    }

    let mut active = 0i64;
    let mut values = Vec::with_capacity(length);
    for d in &delta[..length] {
        active += d;
        values.push(active as f64);
    }
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        let rate = mean_rate * length as f64 / total;
        for v in &mut values {
            *v *= rate;
        }
    }
    Trace::new(values, DEFAULT_SLOT_SECONDS, TraceKind::Increments)
}

/// Target Hurst parameter of an on-off superposition, H = (3 − α)/2.
pub fn onoff_hurst(tail_index: f64) -> f64 {
    (3.0 - tail_index) / 2.0
}

const MAGIC: &[u8; 4] = b"LRDT";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 2 + 8 + 8 + 8;

pub fn write_trace<W: Write>(trace: &Trace, mut w: W) -> Result<()> {
    trace.validate()?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&trace.kind.code().to_le_bytes())?;
    w.write_all(&(trace.values.len() as u64).to_le_bytes())?;
    w.write_all(&trace.slot_seconds.to_le_bytes())?;
    w.write_all(&trace.clipped_fraction.to_le_bytes())?;
    for v in &trace.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace<R: Read>(mut r: R) -> Result<Trace> {
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &header[0..4] != MAGIC {
        return Err(Error::Format("bad magic, not an LRDT trace".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let kind = TraceKind::from_code(u16::from_le_bytes([header[6], header[7]]))?;
    let len = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let slot_seconds = f64::from_le_bytes(header[16..24].try_into().unwrap());
    let clipped_fraction = f64::from_le_bytes(header[24..32].try_into().unwrap());

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != len * 8 {
        return Err(Error::Format(format!(
            "truncated payload: header announces {len} values, found {} bytes",
            payload.len()
        )));
    }
    let values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut t = Trace::new(values, slot_seconds, kind).map_err(|e| Error::Format(e.to_string()))?;
    t.clipped_fraction = clipped_fraction;
    Ok(t)
}

pub fn store_trace(trace: &Trace, path: impl AsRef<Path>) -> Result<()> {
    trace.validate()?;
    write_trace(trace, BufWriter::new(File::create(path)?))
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace> {
    read_trace(BufReader::new(File::open(path)?))
}

/// One value per line under a `# slot_seconds=` header.
pub fn write_trace_csv<W: Write>(trace: &Trace, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "# slot_seconds={}", trace.slot_seconds)?;
    for v in &trace.values {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}
