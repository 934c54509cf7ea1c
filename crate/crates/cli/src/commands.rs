use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use hprobe::accuracy::{self, AccuracyInputs};
use hprobe::estimation::{
    aggregate_variance, default_block_sizes, hurst_agg_var, hurst_cov_slope, hurst_psd, log_lag_grid, periodogram,
    sample_autocov, HurstEstimate, MeanMode,
};
use hprobe::probe::{analyze, run_measurement, write_records_csv, SimnetDriver};
use hprobe::reconstruction::{
    admissible_lags, estimate_moments, reconstruct_aggvar, reconstruct_cov, reconstruct_psd, TrafficMoments,
};
use hprobe::sampling::{apply, draw_pattern, InterSampleSpec};
use hprobe::simnet::{generate_cross, simulate_with_traffic, CrossGenerator, CrossTraffic, NodeConfig, PathConfig};
use hprobe::traffic::{gen_fgn, gen_onoff, load_trace, onoff_hurst, store_trace, LrdModel, Trace};
use hprobe::{sub_seed, MeasurementConfig, ProbeKind, ReferenceMode};
use serde_json::{json, Value};

use crate::args::*;
use crate::config::{failed, usage, FileConfig, Result};
use crate::output::{meta_beside, write_meta, RunDir, DEFAULT_OUTDIR};

/// Global settings resolved from flags, config file and environment.
pub struct Ctx {
    pub seed: u64,
    pub outdir: PathBuf,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub file: FileConfig,
}

impl Ctx {
    pub fn resolve(g: &Global) -> Result<Self> {
        let file = match &g.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Ok(Self {
            seed: g.seed.or(file.get("seed")?).unwrap_or(DEFAULT_SEED),
            outdir: g.outdir.clone().or(file.get("outdir")?).unwrap_or_else(|| PathBuf::from(DEFAULT_OUTDIR)),
            output: g.output.clone(),
            format: g.format.or(file.get("format")?).unwrap_or(Format::Csv),
            file,
        })
    }

    pub fn run_dir(&self, command: &str) -> Result<RunDir> {
        let dir = self
            .output
            .clone()
            .unwrap_or_else(|| self.outdir.join(format!("{command}-{}", self.seed)));
        RunDir::create(dir, self.format)
    }

    /// Primary file for single-trace commands, and where its meta goes.
    fn trace_target(&self, command: &str, default_name: &str) -> Result<(PathBuf, PathBuf)> {
        match &self.output {
            Some(p) => {
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                Ok((p.clone(), meta_beside(p)))
            }
            None => {
                let dir = self.run_dir(command)?;
                Ok((dir.path(default_name), dir.path("meta.json")))
            }
        }
    }
}

pub fn run(command: &Command, ctx: &Ctx) -> Result<Value> {
    let name = command.name();
    match command {
        Command::Generate(a) => generate(&ctx.file.merge(name, a)?, ctx),
        Command::Sample(a) => sample(&ctx.file.merge(name, a)?, ctx),
        Command::Estimate(a) => estimate(&ctx.file.merge(name, a)?, ctx),
        Command::Reconstruct(a) => reconstruct(&ctx.file.merge(name, a)?, ctx),
        Command::Accuracy(a) => accuracy_cmd(&ctx.file.merge(name, a)?, ctx),
        Command::Simulate(a) => simulate(&ctx.file.merge(name, a)?, ctx),
        Command::ProbeSim(a) => probe_sim(&ctx.file.merge(name, a)?, ctx),
        Command::Report(a) => crate::report::report(&ctx.file.merge(name, a)?, ctx),
    }
}

fn input_trace(input: &Option<PathBuf>) -> Result<(PathBuf, Trace)> {
    let path = input.clone().ok_or_else(|| usage("missing input trace"))?;
    let trace = load_trace(&path).map_err(|e| failed(format!("{}: {e}", path.display())))?;
    Ok((path, trace))
}

/// The distribution named by `--dist`, or implied by its parameter flags.
pub fn sampling_spec(a: &SamplingArgs, default: Option<Dist>) -> Result<Option<InterSampleSpec>> {
    let implied = if a.p.is_some() {
        Some(Dist::Geometric)
    } else if a.delta.is_some() {
        Some(Dist::Periodic)
    } else if a.alpha.is_some() || a.mu_a.is_some() {
        Some(Dist::Gamma)
    } else if a.b.is_some() {
        Some(Dist::Uniform)
    } else {
        None
    };
    let spec = match a.dist.or(implied).or(default) {
        None => return Ok(None),
        Some(Dist::Geometric) => InterSampleSpec::Geometric { p: a.p.unwrap_or(0.1) },
        Some(Dist::Periodic) => InterSampleSpec::Periodic { delta: a.delta.unwrap_or(10) },
        Some(Dist::Gamma) => InterSampleSpec::Gamma {
            alpha: a.alpha.unwrap_or(2),
            mean_intensity: a.mu_a.unwrap_or(0.1),
        },
        Some(Dist::Uniform) => InterSampleSpec::Uniform { support_b: a.b.unwrap_or(20.0) },
    };
    spec.validate()?;
    Ok(Some(spec))
}

/// `H=0.6:util=0.5,H=0.9:util=0.5`; keys H, util, cap, buffer, latency, burst, gen, sources, alpha, seed.
pub fn parse_nodes(s: &str) -> Result<PathConfig> {
    let mut nodes = Vec::new();
    for (i, spec) in s.split(',').map(str::trim).filter(|p| !p.is_empty()).enumerate() {
        let mut cross = CrossTraffic::fgn(0.8, 0.5);
        let mut node = NodeConfig::new(1.0, cross);
        let (mut gen, mut sources, mut alpha) = ("fgn".to_string(), 1000usize, 1.4f64);
        for kv in spec.split(':') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| usage(format!("node {}: expected key=value, got `{kv}`", i + 1)))?;
            let num = || v.parse::<f64>().map_err(|_| usage(format!("node {}: `{k}` needs a number, got `{v}`", i + 1)));
            let int = || v.parse::<u64>().map_err(|_| usage(format!("node {}: `{k}` needs an integer, got `{v}`", i + 1)));
            match k {
                "H" | "h" | "hurst" => cross.hurst = num()?,
                "util" | "utilization" => cross.utilization = num()?,
                "burst" | "burstiness" => cross.burstiness = num()?,
                "seed" => cross.seed = Some(int()?),
                "cap" | "capacity" => node.capacity = num()?,
                "buffer" => node.buffer = if v == "inf" { None } else { Some(num()?) },
                "latency" => node.latency = int()? as usize,
                "gen" => gen = v.to_string(),
                "sources" => sources = int()? as usize,
                "alpha" | "tail" => alpha = num()?,
                _ => return Err(usage(format!("node {}: unknown key `{k}`", i + 1))),
            }
        }
        cross.generator = match gen.as_str() {
            "fgn" => CrossGenerator::Fgn,
            "onoff" => {
                cross.hurst = onoff_hurst(alpha);
                CrossGenerator::OnOff { sources, tail_index: alpha }
            }
            "const" | "constant" => CrossGenerator::Constant,
            other => return Err(usage(format!("node {}: unknown generator `{other}`", i + 1))),
        };
        node.cross = cross;
        nodes.push(node);
    }
    if nodes.is_empty() {
        return Err(usage("--nodes needs at least one node"));
    }
    let path = PathConfig::new(nodes);
    path.validate()?;
    Ok(path)
}

fn generate(a: &GenerateArgs, ctx: &Ctx) -> Result<Value> {
    let len = a.len.unwrap_or(1_000_000);
    let kind = a.kind.unwrap_or(TrafficKind::Fgn);
    let trace = match kind {
        TrafficKind::Fgn => {
            let h = a.hurst.ok_or_else(|| usage("generate: --hurst is required for fGn"))?;
            let model = LrdModel::new(h, a.variance.unwrap_or(1.0), a.mean.unwrap_or(0.0))?;
            gen_fgn(&model, len, ctx.seed)?
        }
        TrafficKind::Onoff => gen_onoff(
            a.sources.unwrap_or(1000),
            a.tail_index.unwrap_or(1.4),
            a.mean.unwrap_or(1.0),
            len,
            ctx.seed,
        )?,
    };
    let trace = if a.clip { trace.clip_nonnegative() } else { trace };
    let (file, meta) = ctx.trace_target("generate", "trace.trc")?;
    store_trace(&trace, &file)?;
    write_meta(&meta, "generate", ctx.seed, serde_json::to_value(a)?)?;
    Ok(json!({
        "trace": file,
        "kind": kind,
        "length": trace.len(),
        "mean": trace.mean(),
        "variance": trace.variance(),
        "hurst": match kind {
            TrafficKind::Fgn => a.hurst,
            TrafficKind::Onoff => Some(onoff_hurst(a.tail_index.unwrap_or(1.4))),
        },
        "clipped_fraction": trace.clipped_fraction,
    }))
}

fn sample(a: &SampleArgs, ctx: &Ctx) -> Result<Value> {
    let (_, y) = input_trace(&a.input)?;
    let spec = sampling_spec(&a.sampling, Some(Dist::Geometric))?.expect("defaulted");
    let pattern = draw_pattern(&spec, y.len(), ctx.seed)?;
    let w = apply(&pattern, &y)?;
    let (file, meta) = ctx.trace_target("sample", "observations.trc")?;
    store_trace(&w, &file)?;
    write_meta(&meta, "sample", ctx.seed, json!({ "args": a, "spec": spec }))?;
    Ok(json!({
        "observations": file,
        "spec": spec,
        "samples": pattern.count(),
        "mu_a_empirical": pattern.indicator.mean(),
    }))
}

fn fit_range(lo: Option<f64>, hi: Option<f64>, default: (f64, f64)) -> (f64, f64) {
    (lo.unwrap_or(default.0), hi.unwrap_or(default.1))
}

fn cov_lags(t: usize, max_lag: Option<usize>, spec: Option<&InterSampleSpec>) -> Result<(usize, Vec<usize>)> {
    let max_lag = max_lag.unwrap_or(1000).min(t / 10);
    if max_lag < 1 {
        return Err(failed(format!("trace of {t} slots is too short for covariance lags")));
    }
    let mut lags = log_lag_grid(1, max_lag, 20);
    if let Some(spec) = spec {
        lags = admissible_lags(spec, &lags);
        if let InterSampleSpec::Periodic { delta } = spec {
            // The log grid rarely hits multiples of Δ; use them directly.
            lags = (1..=max_lag / delta).map(|k| k * delta).collect();
        }
        if lags.is_empty() {
            return Err(failed(format!("no admissible lag up to {max_lag} for {} sampling", spec.name())));
        }
    }
    Ok((max_lag, lags))
}

fn estimate(a: &EstimateArgs, ctx: &Ctx) -> Result<Value> {
    let (path, trace) = input_trace(&a.input)?;
    let spec = sampling_spec(&a.sampling, None)?;
    let method = a.method.unwrap_or(Method::Cov);
    let t = trace.len();
    let moments = spec.as_ref().map(|s| estimate_moments(&trace, s)).transpose()?;
    let dir = ctx.run_dir("estimate")?;
    let meta = [("source", path.display().to_string())];
    let est: HurstEstimate = match method {
        Method::Cov => {
            let (max_lag, lags) = cov_lags(t, a.max_lag, spec.as_ref())?;
            let c = sample_autocov(&trace.values, &lags, MeanMode::PerWindow)?;
            let c = match (&spec, &moments) {
                (Some(s), Some(m)) => {
                    dir.covariance("c_w", &c, &meta)?;
                    reconstruct_cov(&c, s, &m.moments)?.series
                }
                _ => c,
            };
            dir.covariance("covariance", &c, &meta)?;
            hurst_cov_slope(&c, fit_range(a.fit_lo, a.fit_hi, (1.0, max_lag as f64)))?
        }
        Method::Aggvar => {
            let sizes = default_block_sizes(t, 100, 10);
            if sizes.is_empty() {
                return Err(failed(format!("aggregate variance needs T >= 10^4 slots, got {t}")));
            }
            let av = aggregate_variance(&trace.values, &sizes)?;
            let av = match (&spec, &moments) {
                (Some(s), Some(m)) => {
                    dir.aggvar("aggvar_w", &av, &meta)?;
                    reconstruct_aggvar(&av, s, &m.moments)?
                }
                _ => av,
            };
            dir.aggvar("aggvar", &av, &meta)?;
            hurst_agg_var(&av, fit_range(a.fit_lo, a.fit_hi, (100.0, (t / 100) as f64)))?
        }
        Method::Psd => {
            if let Some(InterSampleSpec::Periodic { .. }) = spec {
                // Refuse before spending time on the periodogram.
                return Err(hprobe::Error::Aliasing.into());
            }
            let psd = periodogram(&trace.values)?;
            let psd = match (&spec, &moments) {
                (Some(s), Some(m)) => {
                    dir.spectrum("psd_w", &psd, &meta)?;
                    reconstruct_psd(&psd, s, &m.moments)?.series
                }
                _ => psd,
            };
            dir.spectrum("psd", &psd, &meta)?;
            hurst_psd(&psd, fit_range(a.fit_lo, a.fit_hi, psd.default_fit_range()))?
        }
    };
    let summary = json!({
        "method": method,
        "hurst": est.value,
        "estimate": est,
        "reconstructed": spec.is_some(),
        "spec": spec,
        "moments": moments,
        "length": t,
    });
    dir.json("estimate.json", &summary)?;
    write_meta(&dir.path("meta.json"), "estimate", ctx.seed, serde_json::to_value(a)?)?;
    Ok(summary)
}

fn reconstruct(a: &ReconstructArgs, ctx: &Ctx) -> Result<Value> {
    let (path, w) = input_trace(&a.input)?;
    let spec = sampling_spec(&a.sampling, None)?
        .ok_or_else(|| usage("reconstruct: name the sampling distribution with --dist"))?;
    let t = w.len();
    let est = estimate_moments(&w, &spec)?;
    let moments = TrafficMoments {
        mean: a.mean.unwrap_or(est.moments.mean),
        variance: a.variance.unwrap_or(est.moments.variance),
    };
    let dir = ctx.run_dir("reconstruct")?;
    let meta = [("source", path.display().to_string()), ("spec", spec.name().to_string())];
    let (max_lag, lags) = cov_lags(t, a.max_lag, Some(&spec))?;
    let c_w = sample_autocov(&w.values, &lags, MeanMode::PerWindow)?;
    let rec = reconstruct_cov(&c_w, &spec, &moments)?;
    dir.covariance("c_w", &c_w, &meta)?;
    dir.covariance("c_y", &rec.series, &meta)?;
    let cov_h = hurst_cov_slope(&rec.series, (1.0, max_lag as f64)).ok();

    let mut agg_h = None;
    let mut psd_h = None;
    if spec.is_geometric() {
        let sizes = default_block_sizes(t, 100, 10);
        if !sizes.is_empty() {
            let av_y = reconstruct_aggvar(&aggregate_variance(&w.values, &sizes)?, &spec, &moments)?;
            dir.aggvar("aggvar_y", &av_y, &meta)?;
            agg_h = hurst_agg_var(&av_y, (100.0, (t / 100) as f64)).ok();
        }
        if let Ok(psd) = periodogram(&w.values) {
            let rec = reconstruct_psd(&psd, &spec, &moments)?;
            dir.spectrum("psd_y", &rec.series, &meta)?;
            psd_h = hurst_psd(&rec.series, rec.series.default_fit_range()).ok();
        }
    }
    let summary = json!({
        "spec": spec,
        "moments": moments,
        "moments_estimated": est,
        "dropped_lags": rec.dropped_lags,
        "hurst_cov": cov_h.map(|h| h.value),
        "hurst_aggvar": agg_h.map(|h| h.value),
        "hurst_psd": psd_h.map(|h| h.value),
    });
    dir.json("reconstruct.json", &summary)?;
    write_meta(&dir.path("meta.json"), "reconstruct", ctx.seed, serde_json::to_value(a)?)?;
    Ok(summary)
}

fn accuracy_cmd(a: &AccuracyArgs, ctx: &Ctx) -> Result<Value> {
    let h = a.hurst.ok_or_else(|| usage("accuracy: --hurst is required"))?;
    let model = LrdModel::new(h, a.variance.unwrap_or(1.0), a.mean.unwrap_or(0.0))?
        .with_prefactor(a.prefactor.unwrap_or(1.0))?;
    let spec = sampling_spec(&a.sampling, Some(Dist::Geometric))?.expect("defaulted");
    let t = a.len.unwrap_or(1_000_000);
    let inputs = AccuracyInputs::new(&model, &spec, t);
    let max_lag = a.max_lag.unwrap_or(1000).min(t.saturating_sub(1)).max(1);
    let rep = accuracy::report(&inputs, &log_lag_grid(1, max_lag, 20), a.target_eps.unwrap_or(0.1), None)?;
    let dir = ctx.run_dir("accuracy")?;
    let col = |v: &[f64]| v.iter().map(|&x| json!(x)).collect::<Vec<_>>();
    dir.table(
        "accuracy",
        &[
            ("lag", rep.lags.iter().map(|&l| json!(l)).collect()),
            ("c_y_model", rep.lags.iter().map(|&l| json!(inputs.model_cov(l as f64))).collect()),
            ("sampling_ci", col(&rep.sampling_ci_halfwidth)),
            ("relative_error", col(&rep.relative_error)),
            ("bias_y", col(&rep.bias_y)),
            ("required_t", col(&rep.required_t)),
        ],
    )?;
    dir.json("report.json", &rep)?;
    write_meta(&dir.path("meta.json"), "accuracy", ctx.seed, serde_json::to_value(a)?)?;
    Ok(json!({
        "tau_star": rep.tau_star,
        "noise_floor": rep.noise_floor_halfwidth,
        "noise_floor_over_mu_a2": rep.noise_floor_halfwidth / (inputs.mu_a * inputs.mu_a),
        "target_eps": rep.target_eps,
        "flagged_lags": rep.flagged_lags,
        "inputs": inputs,
    }))
}

fn nodes_arg(nodes: &Option<String>) -> Result<PathConfig> {
    parse_nodes(nodes.as_deref().ok_or_else(|| usage("--nodes is required"))?)
}

fn simulate(a: &SimulateArgs, ctx: &Ctx) -> Result<Value> {
    let path = nodes_arg(&a.nodes)?;
    let len = a.len.unwrap_or(1_000_000);
    let spec = sampling_spec(&a.sampling, Some(Dist::Geometric))?.expect("defaulted");
    let kind = match a.kind.unwrap_or(Kind::Single) {
        Kind::Single => ProbeKind::Single,
        Kind::Pair => ProbeKind::Pair,
    };
    let pattern = draw_pattern(&spec, len, sub_seed(ctx.seed, 1))?;
    let cross = generate_cross(&path, len, ctx.seed)?;
    let res = simulate_with_traffic(&path, cross, &pattern, kind, a.pair_gap.unwrap_or(1.0))?;
    let dir = ctx.run_dir("simulate")?;
    match kind {
        ProbeKind::Single => res.write_delays_csv(File::create(dir.path("delays.csv"))?)?,
        ProbeKind::Pair => write_pairs(&dir.path("pairs.csv"), &res.pair_dispersions)?,
    }
    for (i, b) in res.busy.iter().enumerate() {
        store_trace(b, dir.path(&format!("busy-{i}.trc")))?;
    }
    let summary = json!({
        "d_min": res.d_min,
        "probes": pattern.count(),
        "unstable": res.unstable(),
        "busy_fraction": res.busy.iter().map(Trace::mean).collect::<Vec<_>>(),
        "stats": res.stats,
    });
    dir.json("simulate.json", &summary)?;
    write_meta(&dir.path("meta.json"), "simulate", ctx.seed, json!({ "args": a, "path": path, "spec": spec }))?;
    Ok(summary)
}

fn write_pairs(path: &Path, pairs: &[hprobe::simnet::PairDispersion]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "send_slot,delay_slots,g_r,dropped,valid")?;
    for p in pairs {
        writeln!(w, "{},{},{},{},{}", p.send_slot, p.delay_slots, p.g_r, p.dropped, p.valid)?;
    }
    w.flush()?;
    Ok(())
}

fn probe_sim(a: &ProbeSimArgs, ctx: &Ctx) -> Result<Value> {
    let path = nodes_arg(&a.nodes)?;
    let bottleneck = path.nodes.iter().map(|n| n.capacity).fold(f64::INFINITY, f64::min);
    let model_hurst = a
        .model_hurst
        .unwrap_or_else(|| path.nodes.iter().map(|n| n.cross.hurst).fold(0.5, f64::max).clamp(0.51, 0.99));
    let cfg = MeasurementConfig {
        sampling: InterSampleSpec::Geometric { p: a.p.unwrap_or(0.1) },
        slot_seconds: a.slot_seconds.unwrap_or(hprobe::traffic::DEFAULT_SLOT_SECONDS),
        n_probes: a.probes.unwrap_or(1_000_000),
        reference_mode: match a.reference.unwrap_or(Reference::Min) {
            Reference::Min => ReferenceMode::MinDelay,
            Reference::Mean => ReferenceMode::MeanDelay,
        },
        probe_kind: match a.kind.unwrap_or(Kind::Single) {
            Kind::Single => ProbeKind::Single,
            Kind::Pair => ProbeKind::Pair,
        },
        pair_gap: a.pair_gap.unwrap_or(1.0),
        capacity: Some(bottleneck),
        model_hurst: Some(model_hurst),
        seed: ctx.seed,
    };
    cfg.validate()?;
    let mut driver = SimnetDriver::new(path.clone(), ctx.seed);
    let records = run_measurement(&mut driver, &cfg)?;
    let range = match (a.fit_lo, a.fit_hi) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(1.0), hi.unwrap_or(1000.0))),
    };
    let an = analyze(&records, &cfg, range)?;
    let dir = ctx.run_dir("probe-sim")?;
    write_records_csv(&records, BufWriter::new(File::create(dir.path("records.csv"))?))?;
    dir.covariance("covariance", &an.covariance, &[("kind", format!("{:?}", cfg.probe_kind))])?;
    dir.json("analysis.json", &an)?;
    write_meta(&dir.path("meta.json"), "probe-sim", ctx.seed, json!({ "args": a, "path": path, "measurement": cfg }))?;
    Ok(json!({
        "hurst": an.cov_slope.value,
        "hurst_aggvar": an.agg_var.map(|h| h.value),
        "kind": cfg.probe_kind,
        "tau_star": an.tau_star,
        "tau_star_hurst": an.tau_star_hurst,
        "fit_range": an.fit_range,
        "n_probes": an.n_probes,
        "lost": an.lost,
        "moments": an.moments.moments,
    }))
}
