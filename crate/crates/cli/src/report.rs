//! Figure data: sampled covariances (2), τ* and noise floor (3), relative
//! error (4) and aggregate variances (5), one table per panel.

use hprobe::accuracy::{self, AccuracyInputs};
use hprobe::estimation::{
    aggregate_variance, default_block_sizes, hurst_agg_var, hurst_cov_slope, log_lag_grid, sample_autocov, MeanMode,
};
use hprobe::reconstruction::{admissible_lags, estimate_moments, reconstruct_aggvar, reconstruct_cov};
use hprobe::sampling::{apply, draw_pattern, InterSampleSpec};
use hprobe::traffic::{fgn_autocov, gen_fgn, LrdModel};
use hprobe::sub_seed;
use serde_json::{json, Map, Value};

use crate::args::ReportArgs;
use crate::commands::Ctx;
use crate::config::{usage, Result};
use crate::output::write_meta;

fn col<T: Into<Value> + Copy>(v: &[T]) -> Vec<Value> {
    v.iter().map(|&x| x.into()).collect()
}

fn variants(mu_a: f64) -> Vec<InterSampleSpec> {
    vec![
        InterSampleSpec::Geometric { p: mu_a },
        InterSampleSpec::Periodic { delta: (1.0 / mu_a).round().max(1.0) as usize },
        InterSampleSpec::Gamma { alpha: 2, mean_intensity: mu_a },
        InterSampleSpec::Uniform { support_b: 2.0 / mu_a },
    ]
}

pub fn report(a: &ReportArgs, ctx: &Ctx) -> Result<Value> {
    let figures = if a.figures.is_empty() { vec![2, 3, 4, 5] } else { a.figures.clone() };
    if let Some(f) = figures.iter().find(|f| !(2..=5).contains(*f)) {
        return Err(usage(format!("report: no figure {f}; choose from 2, 3, 4, 5")));
    }
    let model = LrdModel::new(a.hurst.unwrap_or(0.8), a.variance.unwrap_or(1.0), a.mean.unwrap_or(1.0))?;
    let mu_a = a.mu_a.unwrap_or(0.1);
    let t = a.len.unwrap_or(1_000_000);
    let max_lag = a.max_lag.unwrap_or(1000).min(t / 10).max(1);
    let dir = ctx.run_dir("report")?;
    let mut summary = Map::new();

    for f in figures {
        let v = match f {
            2 => fig2(&model, mu_a, t, max_lag, ctx, &dir)?,
            3 => fig3(&model, mu_a, &dir)?,
            4 => fig4(&model, mu_a, t, max_lag, a.runs.unwrap_or(20), ctx, &dir)?,
            _ => fig5(&model, mu_a, t, ctx, &dir)?,
        };
        summary.insert(format!("fig{f}"), v);
    }
    let summary = Value::Object(summary);
    dir.json("report.json", &summary)?;
    write_meta(&dir.path("meta.json"), "report", ctx.seed, serde_json::to_value(a)?)?;
    Ok(summary)
}

/// c_Y of the traffic, c_W of the samples, reconstructed c_Y and the model, per variant.
fn fig2(model: &LrdModel, mu_a: f64, t: usize, max_lag: usize, ctx: &Ctx, dir: &crate::output::RunDir) -> Result<Value> {
    let y = gen_fgn(model, t, sub_seed(ctx.seed, 2))?;
    let grid = log_lag_grid(1, max_lag, 20);
    let mut out = Map::new();
    for (i, spec) in variants(mu_a).into_iter().enumerate() {
        let lags = match spec {
            InterSampleSpec::Periodic { delta } => (1..=max_lag / delta).map(|k| k * delta).collect(),
            _ => admissible_lags(&spec, &grid),
        };
        let pattern = draw_pattern(&spec, t, sub_seed(ctx.seed, 20 + i as u64))?;
        let w = apply(&pattern, &y)?;
        let c_w = sample_autocov(&w.values, &lags, MeanMode::PerWindow)?;
        let m = estimate_moments(&w, &spec)?;
        let rec = reconstruct_cov(&c_w, &spec, &m.moments)?;
        let exact = sample_autocov(&y.values, &rec.series.lags, MeanMode::PerWindow)?;
        dir.table(
            &format!("fig2-{}", spec.name()),
            &[
                ("lag", col(&rec.series.lags)),
                ("c_y_traffic", col(&exact.values)),
                ("c_w", rec.series.lags.iter().map(|&l| c_w.get(l).into()).collect()),
                ("c_y_estimate", col(&rec.series.values)),
                ("c_y_model", rec.series.lags.iter().map(|&l| fgn_autocov(model, l).into()).collect()),
            ],
        )?;
        let h = hurst_cov_slope(&rec.series, (1.0, max_lag as f64)).ok().map(|h| h.value);
        out.insert(spec.name().to_string(), json!({ "hurst": h, "moments": m.moments, "lags": rec.series.len() }));
    }
    Ok(Value::Object(out))
}

/// τ* over H for three durations, and the noise floor over T.
fn fig3(model: &LrdModel, mu_a: f64, dir: &crate::output::RunDir) -> Result<Value> {
    let spec = InterSampleSpec::Geometric { p: mu_a };
    let hs: Vec<f64> = (0..=8).map(|i| (55 + 5 * i) as f64 / 100.0).collect();
    let ts = [100_000usize, 1_000_000, 10_000_000];
    let mut cols: Vec<(String, Vec<Value>)> = vec![("hurst".into(), col(&hs))];
    for &t in &ts {
        let taus = hs
            .iter()
            .map(|&h| {
                let m = LrdModel::new(h, model.variance, model.mean_rate)?;
                accuracy::tau_star(&AccuracyInputs::new(&m, &spec, t)).map(Value::from)
            })
            .collect::<hprobe::Result<Vec<_>>>()?;
        cols.push((format!("tau_star_t{t}"), taus));
    }
    let named: Vec<(&str, Vec<Value>)> = cols.iter().map(|(k, v)| (k.as_str(), v.clone())).collect();
    dir.table("fig3-tau-star", &named)?;

    let t_grid: Vec<usize> = (3..=8).flat_map(|e| [1usize, 2, 5].map(|k| k * 10usize.pow(e))).collect();
    let floors = t_grid
        .iter()
        .map(|&t| accuracy::noise_floor(&AccuracyInputs::new(model, &spec, t)))
        .collect::<hprobe::Result<Vec<_>>>()?;
    dir.table(
        "fig3-noise-floor",
        &[
            ("t", col(&t_grid)),
            ("noise_floor", col(&floors)),
            ("noise_floor_over_mu_a2", floors.iter().map(|f| (f / (mu_a * mu_a)).into()).collect()),
        ],
    )?;
    let at = |t| accuracy::tau_star(&AccuracyInputs::new(model, &spec, t));
    Ok(json!({ "tau_star_t1e6": at(1_000_000)?, "tau_star_t1e7": at(10_000_000)? }))
}

/// 95th percentile of the empirical relative error against the model prediction.
fn fig4(
    model: &LrdModel,
    mu_a: f64,
    t: usize,
    max_lag: usize,
    runs: usize,
    ctx: &Ctx,
    dir: &crate::output::RunDir,
) -> Result<Value> {
    if runs < 2 {
        return Err(usage("report: --runs must be at least 2"));
    }
    let spec = InterSampleSpec::Geometric { p: mu_a };
    let lags = log_lag_grid(1, max_lag, 10);
    let truth: Vec<f64> = lags.iter().map(|&l| fgn_autocov(model, l)).collect();
    let mut errs = vec![Vec::with_capacity(runs); lags.len()];
    for r in 0..runs {
        let y = gen_fgn(model, t, sub_seed(ctx.seed, 400 + 2 * r as u64))?;
        let pattern = draw_pattern(&spec, t, sub_seed(ctx.seed, 401 + 2 * r as u64))?;
        let w = apply(&pattern, &y)?;
        let c_w = sample_autocov(&w.values, &lags, MeanMode::PerWindow)?;
        let m = estimate_moments(&w, &spec)?;
        let rec = reconstruct_cov(&c_w, &spec, &m.moments)?;
        for (e, (&c, &c0)) in errs.iter_mut().zip(rec.series.values.iter().zip(&truth)) {
            e.push(((c - c0) / c0).abs());
        }
    }
    let p95: Vec<f64> = errs
        .iter_mut()
        .map(|e| {
            e.sort_by(f64::total_cmp);
            e[((0.95 * e.len() as f64).ceil() as usize).clamp(1, e.len()) - 1]
        })
        .collect();
    let inputs = AccuracyInputs::new(model, &spec, t);
    let predicted = lags
        .iter()
        .zip(&truth)
        .map(|(&l, &c)| accuracy::relative_error(&inputs, l, c).map(|r| r.value))
        .collect::<hprobe::Result<Vec<_>>>()?;
    dir.table(
        "fig4-relative-error",
        &[("lag", col(&lags)), ("empirical_p95", col(&p95)), ("predicted", col(&predicted))],
    )?;
    let within = p95.iter().zip(&predicted).filter(|(e, p)| e <= p).count();
    Ok(json!({ "runs": runs, "lags": lags.len(), "lags_within_prediction": within }))
}

/// Var(Y^{(M)}), Var(W^{(M)}), the reconstruction and the model σ²M^{2H−2}.
fn fig5(model: &LrdModel, mu_a: f64, t: usize, ctx: &Ctx, dir: &crate::output::RunDir) -> Result<Value> {
    let sizes = default_block_sizes(t, 1, 10);
    if sizes.len() < 2 {
        return Err(usage(format!("report: --len {t} is too short for aggregate variances")));
    }
    let spec = InterSampleSpec::Geometric { p: mu_a };
    let y = gen_fgn(model, t, sub_seed(ctx.seed, 5))?;
    let w = apply(&draw_pattern(&spec, t, sub_seed(ctx.seed, 6))?, &y)?;
    let av_y = aggregate_variance(&y.values, &sizes)?;
    let av_w = aggregate_variance(&w.values, &sizes)?;
    let m = estimate_moments(&w, &spec)?;
    let av_r = reconstruct_aggvar(&av_w, &spec, &m.moments)?;
    let model_av: Vec<f64> =
        sizes.iter().map(|&s| model.variance * (s as f64).powf(2.0 * model.hurst - 2.0)).collect();
    dir.table(
        "fig5-aggvar",
        &[
            ("block_size", col(&sizes)),
            ("var_y", col(&av_y.variances)),
            ("var_w", col(&av_w.variances)),
            ("var_y_reconstructed", col(&av_r.variances)),
            ("var_y_model", col(&model_av)),
        ],
    )?;
    let range = (100.0, (t / 100).max(101) as f64);
    Ok(json!({
        "hurst_traffic": hurst_agg_var(&av_y, range).ok().map(|h| h.value),
        "hurst_reconstructed": hurst_agg_var(&av_r, range).ok().map(|h| h.value),
    }))
}
