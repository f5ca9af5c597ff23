//! The pipeline commands behind the CLI: ingest, train-base, forecast,
//! train-reconciler, evaluate, and the activation sweep.

use super::artifact::{ModelArtifact, ReconcilerArtifact, ARTIFACT_VERSION};
use super::config::{Pairing, RunConfig, WeightMode};
use super::dataset::{self, PreparedData};
use super::report::{steps_csv, EvalReport, PairwiseAnova, SeriesMetrics, StepRow};
use super::scenario::ScenarioFile;
use super::train;
use crate::data::{aggregate_sessions, build_features, parse_sessions_csv};
use crate::error::{Error, Result};
use crate::metrics::{
    anova_with_pairwise, empirical_quantile, point_metrics, quantile_loss, winkler,
};
use crate::numerics::rng::Rng;
use crate::picnn::QuantileLevel;
use crate::reconcile::{
    coef_weight_from_errors, reconcile, train_reconciler, Hierarchy, OriginData,
    ReconcilerDataset, ReconcilerParams, ReconcilerTrainConfig,
};
use crate::score::{energy_score, EnergyScoreConfig};
use chrono::{Duration, NaiveDateTime, Timelike};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Deterministic parallel map: results land in input order regardless of
/// worker interleaving.
fn parallel_map<T, U, F>(items: Vec<T>, workers: usize, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn(T) -> Result<U> + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let inputs: Vec<Mutex<Option<T>>> = items.into_iter().map(|t| Mutex::new(Some(t))).collect();
    let outputs: Vec<Mutex<Option<Result<U>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(n) {
            scope.spawn(|| loop {
                let idx = cursor.fetch_add(1, Ordering::SeqCst);
                if idx >= n {
                    break;
                }
                let item = inputs[idx].lock().unwrap().take().expect("unclaimed item");
                let result = f(item);
                *outputs[idx].lock().unwrap() = Some(result);
            });
        }
    });
    outputs
        .into_iter()
        .map(|m| m.into_inner().unwrap().expect("worker wrote result"))
        .collect()
}

#[derive(Debug)]
pub struct IngestSummary {
    pub sessions: usize,
    pub hours: usize,
    pub stations: usize,
    pub warnings: Vec<String>,
}

pub fn cmd_ingest(cfg: &RunConfig) -> Result<IngestSummary> {
    let content = std::fs::read_to_string(&cfg.sessions_file).map_err(|e| {
        Error::Config(format!(
            "cannot read sessions file `{}`: {e}",
            cfg.sessions_file.display()
        ))
    })?;
    let records = parse_sessions_csv(&content, &cfg.sessions_file.display().to_string())?;
    if records.is_empty() {
        return Err(Error::EmptyDataset("no sessions".into()));
    }
    let min_connect = records.iter().map(|r| r.connect_time).min().unwrap();
    let max_disconnect = records.iter().map(|r| r.disconnect_time).max().unwrap();
    let start = min_connect
        .with_minute(0)
        .unwrap()
        .with_second(0)
        .unwrap();
    let mut end = max_disconnect;
    if end.minute() != 0 || end.second() != 0 {
        end = end.with_minute(0).unwrap().with_second(0).unwrap() + Duration::hours(1);
    }
    let (frame, warnings) = aggregate_sessions(&records, (start, end), None)?;

    let weather = dataset::load_weather(cfg)?;
    let holidays = dataset::load_holidays(cfg)?;
    let covariates = build_features(&frame, &weather, &holidays)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::write(dataset::hourly_path(cfg), frame.to_csv())?;
    std::fs::write(
        dataset::features_path(cfg),
        dataset::features_csv(&frame, &covariates),
    )?;
    Ok(IngestSummary {
        sessions: records.len(),
        hours: frame.len(),
        stations: frame.station_names().len(),
        warnings,
    })
}

pub fn model_path(cfg: &RunConfig, series: &str) -> PathBuf {
    cfg.out_dir.join(format!("model_{series}.json"))
}

pub fn cmd_train_base(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = dataset::prepare(cfg)?;
    let mut paths = Vec::new();
    for series in &data.series_names {
        let artifact = train::train_series(cfg, &data, series)?;
        let path = model_path(cfg, series);
        artifact.save(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn load_artifacts(cfg: &RunConfig, data: &PreparedData) -> Result<BTreeMap<String, ModelArtifact>> {
    let mut out = BTreeMap::new();
    for series in &data.series_names {
        let path = model_path(cfg, series);
        if !path.exists() {
            return Err(Error::Config(format!(
                "missing model artifact `{}` (run train-base first)",
                path.display()
            )));
        }
        out.insert(series.clone(), ModelArtifact::load(&path)?);
    }
    Ok(out)
}

/// Window indices of a partition, thinned to the forecast stride. The base
/// validation partition strides inside each nested reconciler sub-partition
/// so both always receive coverage.
fn partition_origins(data: &PreparedData, partition: &str, stride: usize) -> Result<Vec<usize>> {
    let stride = stride.max(1);
    if partition == "val" {
        let mut chosen: Vec<usize> = data
            .split
            .dcl_train
            .iter()
            .copied()
            .step_by(stride)
            .chain(data.split.dcl_val.iter().copied().step_by(stride))
            .collect();
        chosen.sort_unstable();
        return Ok(chosen);
    }
    let idx = data.partition_indices(partition)?;
    Ok(idx.iter().copied().step_by(stride).collect())
}

pub fn scenario_dir(cfg: &RunConfig, partition: &str) -> PathBuf {
    cfg.out_dir.join("scenarios").join(partition)
}

pub fn cmd_forecast(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let data = dataset::prepare(cfg)?;
    let artifacts = load_artifacts(cfg, &data)?;
    let partition = cfg.forecast_partition.as_str();
    let chosen = partition_origins(&data, partition, cfg.forecast_stride)?;
    if chosen.is_empty() {
        return Err(Error::Config(format!("partition `{partition}` is empty")));
    }
    let dir = scenario_dir(cfg, partition);
    std::fs::create_dir_all(&dir)?;

    let jobs: Vec<usize> = chosen;
    let paths = parallel_map(jobs, cfg.worker_count(), |wi| {
        let origin = data.origin_of(wi);
        let mut per_series: Vec<Vec<Vec<f64>>> = Vec::new(); // [series][s][t]
        for series in &data.series_names {
            let artifact = &artifacts[series];
            let seed = train::scenario_seed(cfg.seed, series, origin);
            let scaled =
                train::scenarios_scaled(artifact, &data, series, wi, cfg.scenarios, seed, cfg)?;
            let scaler = &artifact.target_scaler;
            let kwh: Vec<Vec<f64>> = scaled
                .iter()
                .map(|row| row.iter().map(|&v| scaler.inverse(v)).collect())
                .collect();
            per_series.push(kwh);
        }
        // reorder into [scenario][series][step]
        let m = cfg.scenarios;
        let values: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|s| per_series.iter().map(|ser| ser[s].clone()).collect())
            .collect();
        let file = ScenarioFile::new(origin, cfg.seed, data.series_names.clone(), values)?;
        let path = dir.join(format!("{}.csv", origin.format("%Y%m%dT%H%M")));
        file.save(&path)?;
        Ok(path)
    })?;
    Ok(paths)
}

fn load_scenarios(cfg: &RunConfig, partition: &str) -> Result<Vec<ScenarioFile>> {
    let dir = scenario_dir(cfg, partition);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| {
            Error::Config(format!(
                "cannot read scenario directory `{}` (run forecast first): {e}",
                dir.display()
            ))
        })?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "csv").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!(
            "no scenario files under `{}`",
            dir.display()
        )));
    }
    paths.iter().map(|p| ScenarioFile::load(p)).collect()
}

fn actual_cross_section(
    data: &PreparedData,
    origin: NaiveDateTime,
    step: usize,
) -> Result<Vec<f64>> {
    let offset = (origin - data.frame.start()).num_hours();
    if offset < 0 {
        return Err(Error::Numerical("origin precedes the frame".into()));
    }
    let t = offset as usize + step;
    if t >= data.frame.len() {
        return Err(Error::Numerical(
            "scenario horizon extends past the frame".into(),
        ));
    }
    Ok(data
        .series_names
        .iter()
        .map(|name| data.frame.series(name).expect("known series")[t])
        .collect())
}

/// Build a reconciler dataset from scenario files, truncated to `m_keep`
/// scenarios and paired by index (or randomly, when configured).
fn dataset_from_files(
    files: &[&ScenarioFile],
    data: &PreparedData,
    m_keep: usize,
    pairing: Pairing,
    seed: u64,
) -> Result<ReconcilerDataset<f64>> {
    let mut out = ReconcilerDataset::default();
    for file in files {
        let [m, s_count, tau] = file.header.shape;
        let keep = m_keep.min(m);
        let mut index_maps: Vec<Vec<usize>> = (0..s_count).map(|_| (0..m).collect()).collect();
        if matches!(pairing, Pairing::Random) {
            let mut rng = Rng::derive(
                seed,
                &format!("pairing/{}", file.header.origin.format("%Y%m%d%H")),
            );
            for map in &mut index_maps {
                rng.shuffle(map);
            }
        }
        let mut scenarios = Vec::with_capacity(keep);
        for s in 0..keep {
            let mut steps = Vec::with_capacity(tau);
            for t in 0..tau {
                let v: Vec<f64> = (0..s_count)
                    .map(|k| file.values[index_maps[k][s]][k][t])
                    .collect();
                steps.push(v);
            }
            scenarios.push(steps);
        }
        let actuals: Result<Vec<Vec<f64>>> = (0..tau)
            .map(|t| actual_cross_section(data, file.header.origin, t))
            .collect();
        out.origins.push(OriginData {
            scenarios,
            actuals: actuals?,
        });
    }
    Ok(out)
}

pub fn reconciler_path(cfg: &RunConfig, mode: WeightMode) -> PathBuf {
    cfg.out_dir.join(format!("reconciler_{}.json", mode.name()))
}

pub fn cmd_train_reconciler(cfg: &RunConfig) -> Result<PathBuf> {
    let data = dataset::prepare(cfg)?;
    let hier: Hierarchy = Hierarchy::single_total(data.series_names.len() - 1);
    let files = load_scenarios(cfg, "val")?;

    // match files to the nested dcl partitions by origin
    let dcl_train_origins: std::collections::BTreeSet<NaiveDateTime> = data
        .split
        .dcl_train
        .iter()
        .map(|&i| data.origin_of(i))
        .collect();
    let dcl_val_origins: std::collections::BTreeSet<NaiveDateTime> = data
        .split
        .dcl_val
        .iter()
        .map(|&i| data.origin_of(i))
        .collect();
    let train_files: Vec<&ScenarioFile> = files
        .iter()
        .filter(|f| dcl_train_origins.contains(&f.header.origin))
        .collect();
    let val_files: Vec<&ScenarioFile> = files
        .iter()
        .filter(|f| dcl_val_origins.contains(&f.header.origin))
        .collect();
    if train_files.is_empty() {
        return Err(Error::Config(
            "no validation scenario files fall in the reconciler training partition".into(),
        ));
    }

    let params = match cfg.weight_mode {
        WeightMode::Id => ReconcilerParams::identity(data.series_names.len()),
        WeightMode::Coef => {
            // base-forecast errors per (origin, step): actual − scenario mean
            let mut errors = Vec::new();
            for file in &files {
                let [m, s_count, tau] = file.header.shape;
                for t in 0..tau {
                    let actual = actual_cross_section(&data, file.header.origin, t)?;
                    let mut row = Vec::with_capacity(s_count);
                    for k in 0..s_count {
                        let mean: f64 =
                            (0..m).map(|s| file.values[s][k][t]).sum::<f64>() / m as f64;
                        row.push(actual[k] - mean);
                    }
                    errors.push(row);
                }
            }
            coef_weight_from_errors(&errors, 1e-6)?.clone()
        }
        WeightMode::Dcl => {
            if val_files.is_empty() {
                return Err(Error::Config(
                    "no validation scenario files fall in the reconciler validation partition"
                        .into(),
                ));
            }
            let train_set = dataset_from_files(
                &train_files,
                &data,
                cfg.dcl_scenarios,
                cfg.scenario_pairing,
                cfg.seed,
            )?;
            let val_set = dataset_from_files(
                &val_files,
                &data,
                cfg.dcl_scenarios,
                cfg.scenario_pairing,
                cfg.seed,
            )?;
            let train_cfg = ReconcilerTrainConfig {
                epochs: cfg.dcl_epochs,
                learning_rate: cfg.dcl_learning_rate,
                score: EnergyScoreConfig::new(cfg.beta)?,
                seed: cfg.seed,
            };
            let report = train_reconciler(&train_set, &val_set, &hier, &train_cfg)?;
            report.params
        }
    };

    let artifact = ReconcilerArtifact {
        version: ARTIFACT_VERSION,
        mode: cfg.weight_mode.name().to_string(),
        series: data.series_names.clone(),
        params,
    };
    let path = reconciler_path(cfg, cfg.weight_mode);
    artifact.save(&path)?;
    std::fs::write(
        cfg.out_dir
            .join(format!("q_matrix_{}.csv", cfg.weight_mode.name())),
        artifact.q_matrix_csv(),
    )?;
    Ok(path)
}

struct MethodData {
    /// per (origin, step) energy score over the cross-section
    es_series: Vec<f64>,
    es_flat: Vec<f64>,
    /// per series: (actuals, means, per-step scenario values)
    per_series: BTreeMap<String, SeriesEval>,
    worst_coherency: f64,
}

struct SeriesEval {
    actuals: Vec<f64>,
    means: Vec<f64>,
    timestamps: Vec<NaiveDateTime>,
    /// scenario values per step (for empirical quantiles)
    step_values: Vec<Vec<f64>>,
}

fn evaluate_method(
    files: &[ScenarioFile],
    data: &PreparedData,
    hier: &Hierarchy<f64>,
    params: Option<&ReconcilerParams<f64>>,
    es_cfg: &EnergyScoreConfig<f64>,
    workers: usize,
) -> Result<MethodData> {
    let names = &data.series_names;
    let jobs: Vec<&ScenarioFile> = files.iter().collect();
    let per_origin = parallel_map(jobs, workers, |file| {
        let [m, s_count, tau] = file.header.shape;
        if s_count != names.len() {
            return Err(Error::Numerical(format!(
                "scenario file has {s_count} series, frame has {}",
                names.len()
            )));
        }
        let mut es_series = Vec::with_capacity(tau);
        let mut worst: f64 = 0.0;
        let mut step_values: Vec<Vec<Vec<f64>>> =
            vec![vec![Vec::with_capacity(m); tau]; s_count];
        let mut flat_samples: Vec<Vec<f64>> = vec![Vec::with_capacity(s_count * tau); m];
        let mut flat_actual = Vec::with_capacity(s_count * tau);
        for t in 0..tau {
            let actual = actual_cross_section(data, file.header.origin, t)?;
            let mut cross_sections = Vec::with_capacity(m);
            for s in 0..m {
                let x_hat = file.cross_section(s, t);
                let x = match params {
                    Some(p) => {
                        let sol = reconcile(&x_hat, p, hier)?;
                        worst = worst.max(hier.coherency_residual(&sol.x_star));
                        let min = sol.x_star.iter().cloned().fold(f64::INFINITY, f64::min);
                        worst = worst.max((-min).max(0.0));
                        sol.x_star
                    }
                    None => {
                        // surfaced for contrast: how incoherent the base
                        // scenarios actually are
                        worst = worst.max(hier.coherency_residual(&x_hat));
                        x_hat
                    }
                };
                for (k, v) in x.iter().enumerate() {
                    step_values[k][t].push(*v);
                }
                cross_sections.push(x);
            }
            es_series.push(energy_score(&cross_sections, &actual, es_cfg)?);
            for (s, cs) in cross_sections.iter().enumerate() {
                flat_samples[s].extend_from_slice(cs);
            }
            flat_actual.extend_from_slice(&actual);
        }
        let es_flat = energy_score(&flat_samples, &flat_actual, es_cfg)?;
        // per-series actuals/means/timestamps
        let mut series_eval = Vec::with_capacity(s_count);
        for (k, _name) in names.iter().enumerate() {
            let mut actuals = Vec::with_capacity(tau);
            let mut means = Vec::with_capacity(tau);
            let mut timestamps = Vec::with_capacity(tau);
            for t in 0..tau {
                let actual = actual_cross_section(data, file.header.origin, t)?;
                actuals.push(actual[k]);
                let mean: f64 =
                    step_values[k][t].iter().sum::<f64>() / step_values[k][t].len() as f64;
                means.push(mean);
                timestamps.push(file.header.origin + Duration::hours(t as i64));
            }
            series_eval.push(SeriesEval {
                actuals,
                means,
                timestamps,
                step_values: std::mem::take(&mut step_values[k]),
            });
        }
        Ok((es_series, es_flat, series_eval, worst))
    })?;

    let mut method = MethodData {
        es_series: Vec::new(),
        es_flat: Vec::new(),
        per_series: names
            .iter()
            .map(|n| {
                (
                    n.clone(),
                    SeriesEval {
                        actuals: Vec::new(),
                        means: Vec::new(),
                        timestamps: Vec::new(),
                        step_values: Vec::new(),
                    },
                )
            })
            .collect(),
        worst_coherency: 0.0,
    };
    for (es_series, es_flat, series_eval, worst) in per_origin {
        method.es_series.extend(es_series);
        method.es_flat.push(es_flat);
        method.worst_coherency = method.worst_coherency.max(worst);
        for (k, eval) in series_eval.into_iter().enumerate() {
            let slot = method.per_series.get_mut(&names[k]).unwrap();
            slot.actuals.extend(eval.actuals);
            slot.means.extend(eval.means);
            slot.timestamps.extend(eval.timestamps);
            slot.step_values.extend(eval.step_values);
        }
    }
    Ok(method)
}

fn series_metrics(data: &PreparedData, eval: &SeriesEval, series: &str) -> Result<SeriesMetrics> {
    let frame_series = data.frame.series(series).expect("known series");
    let base = point_metrics(&eval.actuals, &eval.means, &[], &[])?;
    // MASE against seasonal-naive references resolved on the actual timeline
    let mut mase = Vec::new();
    for t0 in [24usize, 168] {
        let mut model_sum = 0.0;
        let mut naive_sum = 0.0;
        let mut steps = 0usize;
        for (i, ts) in eval.timestamps.iter().enumerate() {
            let offset = (*ts - data.frame.start()).num_hours();
            if offset < t0 as i64 {
                continue;
            }
            let reference = frame_series[(offset - t0 as i64) as usize];
            model_sum += (eval.actuals[i] - eval.means[i]).abs();
            naive_sum += (eval.actuals[i] - reference).abs();
            steps += 1;
        }
        let value = if steps == 0 || naive_sum == 0.0 {
            None
        } else {
            Some(model_sum / naive_sum)
        };
        mase.push(value);
    }

    let mut ql = BTreeMap::new();
    for level in 1..=9 {
        let alpha = level as f64 / 10.0;
        let preds: Result<Vec<f64>> = eval
            .step_values
            .iter()
            .map(|vals| empirical_quantile(vals, alpha))
            .collect();
        ql.insert(
            format!("{alpha:.1}"),
            quantile_loss(&eval.actuals, &preds?, alpha)?,
        );
    }
    let mut ws = BTreeMap::new();
    for conf in [0.6, 0.8] {
        let lo_level = (1.0 - conf) / 2.0;
        let hi_level = (1.0 + conf) / 2.0;
        let lower: Result<Vec<f64>> = eval
            .step_values
            .iter()
            .map(|vals| empirical_quantile(vals, lo_level))
            .collect();
        let lower = lower?;
        // interpolation roundoff can flip near-identical order statistics
        // by one ulp; the interval stays well-formed
        let upper: Result<Vec<f64>> = eval
            .step_values
            .iter()
            .map(|vals| empirical_quantile(vals, hi_level))
            .collect();
        let upper: Vec<f64> = upper?
            .into_iter()
            .zip(&lower)
            .map(|(u, &l)| u.max(l))
            .collect();
        ws.insert(
            format!("{conf:.1}"),
            winkler(&eval.actuals, &lower, &upper, conf)?,
        );
    }
    Ok(SeriesMetrics {
        mae: base.mae,
        rmse: base.rmse,
        mase24: mase[0],
        mase168: mase[1],
        ql,
        ws,
    })
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<EvalReport> {
    let data = dataset::prepare(cfg)?;
    let hier: Hierarchy = Hierarchy::single_total(data.series_names.len() - 1);
    let files = load_scenarios(cfg, "test")?;
    let es_cfg = EnergyScoreConfig::new(cfg.beta)?;

    let mut methods: Vec<(String, Option<ReconcilerParams<f64>>)> =
        vec![("original".to_string(), None)];
    for mode in [WeightMode::Dcl, WeightMode::Coef, WeightMode::Id] {
        let path = reconciler_path(cfg, mode);
        if path.exists() {
            let artifact = ReconcilerArtifact::load(&path)?;
            methods.push((mode.name().to_string(), Some(artifact.params)));
        }
    }

    let workers = cfg.worker_count();
    let mut evaluated: BTreeMap<String, MethodData> = BTreeMap::new();
    for (name, params) in &methods {
        evaluated.insert(
            name.clone(),
            evaluate_method(&files, &data, &hier, params.as_ref(), &es_cfg, workers)?,
        );
    }

    let method_names: Vec<String> = methods.iter().map(|(n, _)| n.clone()).collect();
    let mut metrics: BTreeMap<String, BTreeMap<String, SeriesMetrics>> = BTreeMap::new();
    for series in &data.series_names {
        let mut per_method = BTreeMap::new();
        for name in &method_names {
            per_method.insert(
                name.clone(),
                series_metrics(&data, &evaluated[name].per_series[series], series)?,
            );
        }
        metrics.insert(series.clone(), per_method);
    }

    let mut energy_score_mean = BTreeMap::new();
    let mut energy_flat_mean = BTreeMap::new();
    let mut coherency = BTreeMap::new();
    for name in &method_names {
        let m = &evaluated[name];
        energy_score_mean.insert(
            name.clone(),
            m.es_series.iter().sum::<f64>() / m.es_series.len() as f64,
        );
        energy_flat_mean.insert(
            name.clone(),
            m.es_flat.iter().sum::<f64>() / m.es_flat.len() as f64,
        );
        coherency.insert(name.clone(), m.worst_coherency);
    }

    let groups: Vec<Vec<f64>> = method_names
        .iter()
        .map(|n| evaluated[n].es_series.clone())
        .collect();
    let (overall, pairwise_raw) = anova_with_pairwise(&groups)?;
    let anova_pairwise: Vec<PairwiseAnova> = pairwise_raw
        .into_iter()
        .map(|((i, j), r)| PairwiseAnova {
            method_a: method_names[i].clone(),
            method_b: method_names[j].clone(),
            f_statistic: r.f_statistic,
            p_value: r.p_value,
        })
        .collect();

    // plot-ready per-step series
    let mut rows: Vec<StepRow> = Vec::new();
    for name in &method_names {
        for series in &data.series_names {
            let eval = &evaluated[name].per_series[series];
            for i in 0..eval.actuals.len() {
                rows.push(StepRow {
                    method: name.clone(),
                    series: series.clone(),
                    timestamp: eval.timestamps[i].format("%Y-%m-%dT%H:%M").to_string(),
                    actual: eval.actuals[i],
                    mean: eval.means[i],
                    q10: empirical_quantile(&eval.step_values[i], 0.1)?,
                    q50: empirical_quantile(&eval.step_values[i], 0.5)?,
                    q90: empirical_quantile(&eval.step_values[i], 0.9)?,
                });
            }
        }
    }

    let report = EvalReport {
        series: data.series_names.clone(),
        methods: method_names,
        metrics,
        energy_score: energy_score_mean,
        energy_score_flat: if cfg.eval_flat_energy_score {
            Some(energy_flat_mean)
        } else {
            None
        },
        anova_overall: overall,
        anova_pairwise,
        coherency,
    };
    report.save(&cfg.out_dir)?;
    std::fs::write(cfg.out_dir.join("plot_series.csv"), steps_csv(&rows))?;
    Ok(report)
}

/// All r/g combinations of the given depth in lexicographic order (g < r).
pub fn activation_combinations(depths: &[usize]) -> Vec<String> {
    let mut out = Vec::new();
    for &len in depths {
        for i in 0..(1usize << len) {
            let combo: String = (0..len)
                .map(|pos| {
                    if (i >> (len - 1 - pos)) & 1 == 1 {
                        'r'
                    } else {
                        'g'
                    }
                })
                .collect();
            out.push(combo);
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub combination: String,
    pub depth: usize,
    pub val_mae: f64,
}

use serde::Serialize;

pub fn cmd_sweep_activations(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let data = dataset::prepare(cfg)?;
    let series = "total";
    let combos = activation_combinations(&[2, 3, 4]);
    let epochs = if cfg.sweep_epochs > 0 {
        cfg.sweep_epochs
    } else {
        cfg.max_epochs
    };

    let mut rows: Vec<SweepRow> = Vec::new();
    let mut curves: Vec<(String, Vec<f64>)> = Vec::new();
    let alpha_grid: Vec<f64> = (1..=99).map(|i| i as f64 / 100.0).collect();

    for combo in &combos {
        let mut sub = cfg.clone();
        sub.activations = combo.clone();
        sub.picnn_layers = combo.len();
        sub.max_epochs = epochs;
        let (model, _history, _best) = train::train_lstm_picnn(&sub, &data, series)?;

        // validation MAE of scenario-mean point forecasts, in kWh
        let scaler = &data.target_scalers[series];
        let mut actual_all = Vec::new();
        let mut pred_all = Vec::new();
        for &wi in &data.split.base_val {
            let context = data.context_tensors(series, wi);
            let future = data.future_flat(series, wi);
            let u0 = model.condition_eval(&context, &future, sub.future_covariates)?;
            let seed = train::scenario_seed(sub.seed, series, data.origin_of(wi));
            let set = crate::picnn::sample_scenarios(&model.picnn, &u0, sub.val_scenarios, seed)?;
            let tau = sub.horizon;
            for t in 0..tau {
                let mean: f64 =
                    set.samples.iter().map(|row| row[t]).sum::<f64>() / set.samples.len() as f64;
                pred_all.push(scaler.inverse(mean));
                actual_all
                    .push(scaler.inverse(data.windows[series][wi].horizon[t]));
            }
        }
        let m = point_metrics(&actual_all, &pred_all, &[], &[])?;
        rows.push(SweepRow {
            combination: combo.clone(),
            depth: combo.len(),
            val_mae: m.mae,
        });

        // scaled conditional CDF curve at a fixed context: q₁ against α with
        // the other horizon coordinates pinned at 0.5
        let wi = data.split.base_val[0];
        let context = data.context_tensors(series, wi);
        let future = data.future_flat(series, wi);
        let u0 = model.condition_eval(&context, &future, sub.future_covariates)?;
        let mut curve = Vec::with_capacity(alpha_grid.len());
        for &a in &alpha_grid {
            let mut alpha_vec = vec![0.5; sub.horizon];
            alpha_vec[0] = a;
            let alpha = QuantileLevel::new(crate::numerics::Tensor::vector(alpha_vec)?)?;
            let q = crate::picnn::quantile(&model.picnn, &alpha, &u0)?;
            curve.push(q.data()[0]);
        }
        curves.push((combo.clone(), curve));
    }

    let mut report_csv = String::from("combination,depth,val_mae\n");
    for r in &rows {
        report_csv.push_str(&format!("{},{},{}\n", r.combination, r.depth, r.val_mae));
    }
    std::fs::create_dir_all(&cfg.out_dir)?;
    let report_path = cfg.out_dir.join("sweep_report.csv");
    std::fs::write(&report_path, report_csv)?;

    let mut cdf_csv = String::from("alpha");
    for (combo, _) in &curves {
        cdf_csv.push(',');
        cdf_csv.push_str(combo);
    }
    cdf_csv.push('\n');
    for (i, &a) in alpha_grid.iter().enumerate() {
        cdf_csv.push_str(&format!("{a}"));
        for (_, curve) in &curves {
            cdf_csv.push_str(&format!(",{}", curve[i]));
        }
        cdf_csv.push('\n');
    }
    let cdf_path = cfg.out_dir.join("cdf_curves.csv");
    std::fs::write(&cdf_path, cdf_csv)?;
    Ok((report_path, cdf_path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_enumeration() {
        let all = activation_combinations(&[2, 3, 4]);
        assert_eq!(all.len(), 4 + 8 + 16);
        let depth2 = activation_combinations(&[2]);
        assert_eq!(depth2, vec!["gg", "gr", "rg", "rr"]);
        // no duplicates
        let set: std::collections::BTreeSet<_> = all.iter().collect();
        assert_eq!(set.len(), all.len());
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = parallel_map(items, 4, |x| Ok(x * 2)).unwrap();
        assert_eq!(out, (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn parallel_map_propagates_errors() {
        let items: Vec<usize> = (0..10).collect();
        let out = parallel_map(items, 3, |x| {
            if x == 7 {
                Err(Error::Numerical("boom".into()))
            } else {
                Ok(x)
            }
        });
        assert!(out.is_err());
    }
}
