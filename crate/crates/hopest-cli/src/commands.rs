//! Subcommand implementations and artifact emission.
//!
//! Every file write is whole-file atomic (write a sibling temp file, then
//! rename), outputs carry no timestamps, and all randomness flows from the
//! config seed, so a re-run with the same inputs produces byte-identical
//! artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hopest::dynamics::ControlSource;
use hopest::filter::FilterKind;
use hopest::hoplog::HopLog;
use hopest::metrics::{
    agility, agility_from_times, baseline_estimates, compute_metrics, hop_records, AgilityInputs,
    BaselineKind, HopRecord, MetricsReport,
};
use hopest::params::EstimatorParams;
use hopest::replay::{replay_log, replayed_log};
use hopest::sim::{simulate_trial, ScheduleSeg, TrialConfig};
use hopest::trainer::{evaluate_cost, run_ga, stratified_subset, CostBreakdown, Dataset};
use hopest::{Error, Result};

use crate::config::{
    effective_params, load_toml, resolve, EvalConfig, RunConfig, SubsetConfig, SweepConfig,
    TrainConfig,
};

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::data(format!("create {}: {e}", dir.display())))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("bad output path {}", path.display())))?;
    let tmp = path.with_file_name(format!("{}.tmp", name.to_string_lossy()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::data(format!("write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| Error::data(format!("rename to {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::data(format!("serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn save_log(path: &Path, log: &HopLog) -> Result<()> {
    let mut buf = Vec::new();
    log.write_csv(&mut buf)?;
    write_atomic(path, &buf)
}

fn load_logs(cfg_path: &Path, rel: &[PathBuf]) -> Result<Vec<HopLog>> {
    if rel.is_empty() {
        return Err(Error::config("logs list is empty"));
    }
    rel.iter().map(|p| HopLog::load(&resolve(cfg_path, p))).collect()
}

fn parse_filter(s: &Option<String>) -> Result<Option<FilterKind>> {
    s.as_deref().map(FilterKind::parse).transpose()
}

/// Per-hop summary row for the JSON report; the full sample arrays stay in
/// the CSV logs.
#[derive(Debug, Serialize)]
struct HopSummary {
    t_td: f64,
    t_ha: f64,
    true_t_ha: f64,
    h_td: f64,
    h_ha: f64,
    true_h_ha: f64,
    h_desired: f64,
    n_samples: usize,
}

impl From<&HopRecord> for HopSummary {
    fn from(r: &HopRecord) -> Self {
        HopSummary {
            t_td: r.t_td,
            t_ha: r.t_ha,
            true_t_ha: r.true_t_ha,
            h_td: r.h_td,
            h_ha: r.h_ha,
            true_h_ha: r.true_h_ha,
            h_desired: r.h_desired,
            n_samples: r.z_true.len(),
        }
    }
}

#[derive(Debug, Serialize)]
struct TrialReport {
    log: String,
    rows: usize,
    metrics: Option<MetricsReport>,
    hops: Vec<HopSummary>,
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    filter: &'static str,
    control_source: &'static str,
    pooled: MetricsReport,
    trials: Vec<TrialReport>,
}

pub fn cmd_simulate(
    cfg_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    filter: &Option<String>,
    control_source: &Option<String>,
) -> Result<()> {
    let rc: RunConfig = load_toml(cfg_path)?;
    if rc.trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let estimator = effective_params(cfg_path, rc.estimator, &rc.params_file)?;
    let mut base = TrialConfig {
        robot: rc.robot,
        estimator,
        filter: rc.filter,
        sensors: rc.sensors,
        phase: rc.phase,
        control: rc.control,
        schedule: rc.schedule,
        duration: rc.duration,
        seed: rc.seed,
    };
    if let Some(s) = seed {
        base.seed = s;
    }
    if let Some(k) = parse_filter(filter)? {
        base.filter = k;
    }
    if let Some(src) = control_source {
        base.control.source = ControlSource::parse(src)?;
    }
    base.validate()?;

    let logs: Vec<HopLog> = (0..rc.trials)
        .into_par_iter()
        .map(|i| {
            let mut c = base.clone();
            c.seed = base.seed + i as u64;
            simulate_trial(&c)
        })
        .collect::<Result<_>>()?;

    let mut pooled_records = Vec::new();
    let mut trials = Vec::new();
    for (i, log) in logs.iter().enumerate() {
        let name = format!("log_{i:03}.csv");
        save_log(&out_dir.join(&name), log)?;
        let recs = hop_records(log, rc.aerial_only);
        let metrics = if recs.is_empty() { None } else { Some(compute_metrics(&recs)?) };
        trials.push(TrialReport {
            log: name,
            rows: log.len(),
            metrics,
            hops: recs.iter().map(HopSummary::from).collect(),
        });
        pooled_records.extend(recs);
    }
    if pooled_records.is_empty() {
        return Err(Error::data("no complete hop cycle was detected in any trial"));
    }
    let pooled = compute_metrics(&pooled_records)?;
    let report = SimulateReport {
        filter: base.filter.as_str(),
        control_source: base.control.source.as_str(),
        pooled,
        trials,
    };
    write_json(&out_dir.join("metrics.json"), &report)?;
    println!(
        "{} trial(s), {} hop(s): M3 = {:.2}%, M5 = {:.3} m; wrote logs and metrics.json to {}",
        rc.trials,
        report.pooled.n_hops,
        report.pooled.m3,
        report.pooled.m5,
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainReport {
    filter: &'static str,
    population: usize,
    generations: usize,
    hops: usize,
    initial_median_cost: f64,
    best_cost: f64,
    /// Fractional cost reduction versus the initial-population median.
    improvement: f64,
}

pub fn cmd_train(
    cfg_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    filter: &Option<String>,
) -> Result<()> {
    let tc: TrainConfig = load_toml(cfg_path)?;
    let kind = parse_filter(filter)?.unwrap_or(tc.filter);
    let base = effective_params(cfg_path, tc.estimator, &tc.params_file)?;
    let mut ds = Dataset::new(load_logs(cfg_path, &tc.logs)?)?;
    if !tc.per_height.is_empty() {
        ds = stratified_subset(&ds, &tc.per_height, tc.subset_seed)?;
    }
    let mut ga = tc.ga.clone();
    if let Some(s) = seed {
        ga.seed = s;
    }

    let outcome = run_ga(&ga, &ds, kind, &tc.phase, &tc.robot, &base)?;

    write_json(&out_dir.join("best_params.json"), &outcome.best)?;
    let mut hist = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut hist);
        for stat in &outcome.history {
            w.serialize(stat).map_err(|e| Error::data(format!("history csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::data(format!("history csv: {e}")))?;
    }
    write_atomic(&out_dir.join("history.csv"), &hist)?;
    let report = TrainReport {
        filter: kind.as_str(),
        population: ga.population,
        generations: ga.generations,
        hops: ds.hop_count(),
        initial_median_cost: outcome.initial_median_cost,
        best_cost: outcome.best_cost,
        improvement: 1.0 - outcome.best_cost / outcome.initial_median_cost,
    };
    write_json(&out_dir.join("train_report.json"), &report)?;
    println!(
        "{} on {} hop(s): best L_c {:.4} vs initial median {:.4} ({:.0}% lower); wrote best_params.json, history.csv, train_report.json to {}",
        report.filter,
        report.hops,
        report.best_cost,
        report.initial_median_cost,
        100.0 * report.improvement,
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct BaselineErr {
    pos_rmse: f64,
    vel_rmse: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport {
    filter: &'static str,
    logs: usize,
    cost: CostBreakdown,
    metrics: MetricsReport,
    baselines: BTreeMap<String, BaselineErr>,
}

pub fn cmd_evaluate(cfg_path: &Path, out_dir: &Path, filter: &Option<String>) -> Result<()> {
    let ec: EvalConfig = load_toml(cfg_path)?;
    let kind = parse_filter(filter)?.unwrap_or(ec.filter);
    let params = effective_params(cfg_path, ec.estimator, &ec.params_file)?;
    let logs = load_logs(cfg_path, &ec.logs)?;

    let ds = Dataset::new(logs.clone())?;
    let cost = evaluate_cost(&params, &ds, kind, &ec.phase, &ec.robot)?;

    let mut records = Vec::new();
    for log in &logs {
        let ests = replay_log(kind, &params, &ec.phase, &ec.robot, log)?;
        let replayed = replayed_log(log, &ests);
        records.extend(hop_records(&replayed, ec.aerial_only));
    }
    let metrics = compute_metrics(&records)?;

    let mut baselines = BTreeMap::new();
    for name in &ec.baselines {
        let bk = BaselineKind::parse(name)?;
        let mut sq_z = 0.0;
        let mut sq_v = 0.0;
        let mut n = 0usize;
        for log in &logs {
            let tr = baseline_estimates(log, bk, &params, &ec.phase, &ec.robot)?;
            for (i, row) in log.rows.iter().enumerate() {
                sq_z += (tr.z[i] - row.z_true).powi(2);
                sq_v += (tr.v[i] - row.v_true).powi(2);
                n += 1;
            }
        }
        baselines.insert(
            bk.as_str().to_string(),
            BaselineErr {
                pos_rmse: (sq_z / n as f64).sqrt(),
                vel_rmse: (sq_v / n as f64).sqrt(),
            },
        );
    }

    let report = EvalReport {
        filter: kind.as_str(),
        logs: logs.len(),
        cost,
        metrics,
        baselines,
    };
    write_json(&out_dir.join("metrics.json"), &report)?;
    println!(
        "{} over {} log(s): L_c = {:.4}, M1 = {:.2}%, M3 = {:.2}%; wrote metrics.json to {}",
        report.filter,
        report.logs,
        report.cost.l_c,
        report.metrics.m1,
        report.metrics.m3,
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SweepRow {
    freq_hz: f64,
    noise: &'static str,
    pos_err_mean: f64,
    pos_err_std: f64,
    vel_err_mean: f64,
    vel_err_std: f64,
    /// Std of position error over the 20–40% stretch of the run.
    early_pos_std: f64,
    /// Std of position error over the final 20% of the run.
    late_pos_std: f64,
    /// Error std grew from the early to the late window.
    unbounded: bool,
}

fn window_std(errs: &[(f64, f64)], t_lo: f64, t_hi: f64) -> f64 {
    let w: Vec<f64> =
        errs.iter().filter(|(t, _)| *t >= t_lo && *t < t_hi).map(|(_, e)| *e).collect();
    if w.is_empty() {
        return f64::NAN;
    }
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    (w.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / w.len() as f64).sqrt()
}

fn sweep_one(sc: &SweepConfig, params: &EstimatorParams, freq: f64, noise: bool, seed: u64) -> Result<SweepRow> {
    let mut sensors = if noise { sc.sensors } else { sc.sensors.noiseless() };
    sensors.sensor_rate = freq;
    sensors.est_rate = freq;
    let trial = TrialConfig {
        robot: sc.robot.clone(),
        estimator: *params,
        filter: sc.filter,
        sensors,
        phase: sc.phase,
        control: sc.control,
        schedule: vec![ScheduleSeg { t: 0.0, h: sc.h_ch }],
        duration: sc.duration,
        seed,
    };
    let log = simulate_trial(&trial)?;

    let pos: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.t, r.z_est - r.z_true)).collect();
    let vel: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.t, r.v_est - r.v_true)).collect();
    let mean_abs = |e: &[(f64, f64)]| e.iter().map(|(_, x)| x.abs()).sum::<f64>() / e.len() as f64;
    let d = sc.duration;
    let early = window_std(&pos, 0.2 * d, 0.4 * d);
    let late = window_std(&pos, 0.8 * d, d + 1.0);
    Ok(SweepRow {
        freq_hz: freq,
        noise: if noise { "on" } else { "off" },
        pos_err_mean: mean_abs(&pos),
        pos_err_std: window_std(&pos, 0.0, d + 1.0),
        vel_err_mean: mean_abs(&vel),
        vel_err_std: window_std(&vel, 0.0, d + 1.0),
        early_pos_std: early,
        late_pos_std: late,
        unbounded: late > early,
    })
}

pub fn cmd_sweep_freq(cfg_path: &Option<PathBuf>, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let mut sc: SweepConfig = match cfg_path {
        Some(p) => load_toml(p)?,
        None => SweepConfig::default(),
    };
    if let Some(s) = seed {
        sc.seed = s;
    }
    if sc.freqs.is_empty() {
        return Err(Error::config("freqs list is empty"));
    }
    if sc.freqs.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(Error::config("freqs must be positive"));
    }
    let params = match cfg_path {
        Some(p) => effective_params(p, sc.estimator, &sc.params_file)?,
        None => sc.estimator,
    };

    let jobs: Vec<(usize, f64, bool)> = sc
        .freqs
        .iter()
        .enumerate()
        .flat_map(|(i, f)| [(2 * i, *f, true), (2 * i + 1, *f, false)])
        .collect();
    let rows: Vec<SweepRow> = jobs
        .par_iter()
        .map(|(idx, f, noise)| sweep_one(&sc, &params, *f, *noise, sc.seed + *idx as u64))
        .collect::<Result<_>>()?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        for row in &rows {
            w.serialize(row).map_err(|e| Error::data(format!("sweep csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::data(format!("sweep csv: {e}")))?;
    }
    write_atomic(&out_dir.join("sweep.csv"), &buf)?;
    println!(
        "swept {} frequencies (noise on and off, {} rows); wrote sweep.csv to {}",
        sc.freqs.len(),
        rows.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(Debug, Deserialize)]
struct MeasuredRow {
    name: String,
    h1: f64,
    t_apogee: f64,
    t_cycle: f64,
}

fn default_g() -> f64 {
    9.81
}

#[derive(Debug, Deserialize)]
struct ModelRow {
    name: String,
    h1: f64,
    h0: f64,
    t_s: f64,
    gamma_r: f64,
    gamma_d: f64,
    gamma_lr: f64,
    gamma_ld: f64,
    zeta_s: f64,
    beta: f64,
    #[serde(default = "default_g")]
    g: f64,
}

#[derive(Debug, Serialize)]
struct MeasuredOut {
    name: String,
    nu_vja: f64,
    nu_ha: f64,
}

#[derive(Debug, Serialize)]
struct ModelOut {
    name: String,
    nu_uha: f64,
    nu_vja: f64,
    nu_ha: f64,
    t_r: f64,
    t_d: f64,
    h0_implied: f64,
}

pub fn cmd_agility(inputs: &Path, out_dir: &Path) -> Result<()> {
    let text = std::fs::read_to_string(inputs)
        .map_err(|e| Error::data(format!("read {}: {e}", inputs.display())))?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers =
        rdr.headers().map_err(|e| Error::data(format!("{}: {e}", inputs.display())))?.clone();
    let measured = headers.iter().any(|h| h == "t_apogee");

    let mut buf = Vec::new();
    let mut failures = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        if measured {
            for (i, rec) in rdr.deserialize::<MeasuredRow>().enumerate() {
                let line = i + 2;
                let out = rec
                    .map_err(|e| Error::data(e.to_string()))
                    .and_then(|r| {
                        agility_from_times(r.h1, r.t_apogee, r.t_cycle)
                            .map(|(nu_vja, nu_ha)| MeasuredOut { name: r.name, nu_vja, nu_ha })
                    });
                match out {
                    Ok(row) => w
                        .serialize(row)
                        .map_err(|e| Error::data(format!("agility csv: {e}")))?,
                    Err(e) => failures.push(format!("row {line}: {e}")),
                }
            }
        } else {
            for (i, rec) in rdr.deserialize::<ModelRow>().enumerate() {
                let line = i + 2;
                let out = rec.map_err(|e| Error::data(e.to_string())).and_then(|r| {
                    let a = AgilityInputs {
                        h1: r.h1,
                        h0: r.h0,
                        t_s: r.t_s,
                        gamma_r: r.gamma_r,
                        gamma_d: r.gamma_d,
                        gamma_lr: r.gamma_lr,
                        gamma_ld: r.gamma_ld,
                        zeta_s: r.zeta_s,
                        beta: r.beta,
                        g: r.g,
                    };
                    agility(&a).map(|res| ModelOut {
                        name: r.name,
                        nu_uha: res.nu_uha,
                        nu_vja: res.nu_vja,
                        nu_ha: res.nu_ha,
                        t_r: res.t_r,
                        t_d: res.t_d,
                        h0_implied: res.h0_implied,
                    })
                });
                match out {
                    Ok(row) => w
                        .serialize(row)
                        .map_err(|e| Error::data(format!("agility csv: {e}")))?,
                    Err(e) => failures.push(format!("row {line}: {e}")),
                }
            }
        }
        w.flush().map_err(|e| Error::data(format!("agility csv: {e}")))?;
    }
    write_atomic(&out_dir.join("agility.csv"), &buf)?;
    println!("wrote agility.csv to {}", out_dir.display());
    if !failures.is_empty() {
        for f in &failures {
            eprintln!("{f}");
        }
        return Err(Error::data(format!("{} input row(s) rejected", failures.len())));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct SubsetReport {
    per_height: Vec<(f64, usize)>,
    hops: usize,
    files: Vec<String>,
}

pub fn cmd_subset(cfg_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<()> {
    let sc: SubsetConfig = load_toml(cfg_path)?;
    let ds = Dataset::new(load_logs(cfg_path, &sc.logs)?)?;
    let picked = stratified_subset(&ds, &sc.per_height, seed.unwrap_or(sc.seed))?;

    let mut files = Vec::new();
    for (i, hop) in picked.trials.iter().enumerate() {
        let name = format!("hop_{i:03}.csv");
        save_log(&out_dir.join(&name), hop)?;
        files.push(name);
    }
    let report = SubsetReport {
        per_height: picked.subset_spec.clone(),
        hops: picked.trials.len(),
        files,
    };
    write_json(&out_dir.join("subset.json"), &report)?;
    println!("selected {} hop(s); wrote files and subset.json to {}", report.hops, out_dir.display());
    Ok(())
}
