//! Genetic-algorithm training of the estimator parameters.
//!
//! Fitness comes from replaying recorded hop logs through a candidate
//! parameter set and scoring the result. The headline score is the
//! mean-absolute-percentage error of detected apex heights; when a
//! candidate misses or invents apexes that error is meaningless, so the
//! cost switches to state RMSE to keep a usable gradient:
//!
//! ```text
//! L_c = 100·γ1                 when detected apex count == true count
//!     = 10·γ2 + 10·γ3          otherwise
//! ```
//!
//! γ1 is apex-height MAPE over time-ordered pairs, γ2/γ3 are RMSE of
//! position/velocity pooled over every tick in the dataset.
//!
//! The GA itself is conventional: rank-weighted stochastic universal
//! sampling, uniform scatter crossover, and an adaptive mutation whose step
//! grows as `exp(gen/generations)` and backs off by halving when it leaves
//! the bounds. Elites carry their cached cost forward so are never
//! re-evaluated. Fitness evaluation runs in parallel; every random draw
//! comes either from the sequential master stream or from a stream keyed by
//! (seed, generation, child), so thread scheduling cannot change results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::RobotParams;
use crate::error::{Error, Result};
use crate::hoplog::{detect_true_transitions, HopLog};
use crate::params::{EstimatorParams, ParamId};
use crate::phase::{PhaseConfig, Transition};
use crate::replay::replay_log;
use crate::filter::FilterKind;

/// Apex-error weight.
pub const W1: f64 = 100.0;
/// Position-RMSE weight.
pub const W2: f64 = 10.0;
/// Velocity-RMSE weight.
pub const W3: f64 = 10.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    /// Fraction of the population carried over unchanged each generation.
    pub elite_frac: f64,
    /// Fraction produced by crossover; the remainder after elites and
    /// crossover children is filled with mutants.
    pub crossover_frac: f64,
    pub mutation_frac: f64,
    /// Initial mutation step, as a fraction of each parameter's bound range.
    pub alpha0_frac: f64,
    /// Per-parameter [lo, hi] in trained-vector order. Empty means use the
    /// built-in bounds for the filter kind.
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population: 1000,
            generations: 20,
            elite_frac: 0.05,
            crossover_frac: 0.80,
            mutation_frac: 0.15,
            alpha0_frac: 0.05,
            bounds: Vec::new(),
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::config("population must be at least 2"));
        }
        if self.generations == 0 {
            return Err(Error::config("generations must be at least 1"));
        }
        for (name, f) in [
            ("elite_frac", self.elite_frac),
            ("crossover_frac", self.crossover_frac),
            ("mutation_frac", self.mutation_frac),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("{name} must be in [0, 1]")));
            }
        }
        if self.elite_frac + self.crossover_frac + self.mutation_frac > 1.0 + 1e-9 {
            return Err(Error::config("generation fractions exceed 1"));
        }
        if !(self.alpha0_frac > 0.0 && self.alpha0_frac.is_finite()) {
            return Err(Error::config("alpha0_frac must be positive"));
        }
        for &(lo, hi) in &self.bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config("each bound must satisfy lo < hi"));
            }
        }
        Ok(())
    }
}

/// A set of recorded trials used as training or evaluation data.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub trials: Vec<HopLog>,
    /// Per-height hop counts this set was stratified to; empty for raw
    /// trial collections.
    pub subset_spec: Vec<(f64, usize)>,
}

impl Dataset {
    /// Builds a dataset, requiring at least one true apex in every trial.
    pub fn new(trials: Vec<HopLog>) -> Result<Dataset> {
        for (i, log) in trials.iter().enumerate() {
            if log.true_ha_count() == 0 {
                return Err(Error::data(format!("trial {i} contains no true hop apex")));
            }
        }
        Ok(Dataset {
            trials,
            subset_spec: Vec::new(),
        })
    }

    pub fn hop_count(&self) -> usize {
        self.trials.iter().map(|t| t.true_ha_count()).sum()
    }
}

/// One cost evaluation, with the branch inputs kept for inspection.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub l_c: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Apexes the replayed estimator detected.
    pub n_ha: usize,
    /// True apexes in the dataset.
    pub n_ha_true: usize,
}

impl CostBreakdown {
    /// The cost branch: apex MAPE when the detected apex count is right,
    /// state RMSE otherwise.
    pub fn weighted(n_ha: usize, n_ha_true: usize, g1: f64, g2: f64, g3: f64) -> f64 {
        if n_ha == n_ha_true {
            W1 * g1
        } else {
            W2 * g2 + W3 * g3
        }
    }
}

/// Replays every trial with `params` and scores the result.
pub fn evaluate_cost(
    params: &EstimatorParams,
    ds: &Dataset,
    kind: FilterKind,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
) -> Result<CostBreakdown> {
    let mut true_apex_z = Vec::new();
    let mut est_apex_z = Vec::new();
    let mut sq_z = 0.0;
    let mut sq_v = 0.0;
    let mut n_samples = 0usize;

    for log in &ds.trials {
        let ests = replay_log(kind, params, phase_cfg, rp, log)?;
        for tr in detect_true_transitions(log) {
            if tr.kind == Transition::Ha {
                true_apex_z.push(tr.z);
            }
        }
        for (row, est) in log.rows.iter().zip(&ests) {
            if est.event == Some(Transition::Ha) {
                est_apex_z.push(est.z);
            }
            sq_z += (est.z - row.z_true).powi(2);
            sq_v += (est.v - row.v_true).powi(2);
            n_samples += 1;
        }
    }

    if true_apex_z.is_empty() {
        return Err(Error::data("dataset contains no true hop apexes"));
    }

    let pairs = true_apex_z.len().min(est_apex_z.len());
    let gamma1 = if pairs == 0 {
        0.0
    } else {
        (0..pairs)
            .map(|i| ((est_apex_z[i] - true_apex_z[i]) / true_apex_z[i]).abs())
            .sum::<f64>()
            / pairs as f64
    };
    let gamma2 = (sq_z / n_samples as f64).sqrt();
    let gamma3 = (sq_v / n_samples as f64).sqrt();
    let n_ha = est_apex_z.len();
    let n_ha_true = true_apex_z.len();

    let l_c = CostBreakdown::weighted(n_ha, n_ha_true, gamma1, gamma2, gamma3);
    if !l_c.is_finite() {
        return Err(Error::numeric("cost evaluated to a non-finite value"));
    }
    Ok(CostBreakdown {
        l_c,
        gamma1,
        gamma2,
        gamma3,
        n_ha,
        n_ha_true,
    })
}

/// Cuts a trial into single-hop logs at touchdown boundaries.
///
/// Each piece runs from one touchdown to the tick before the next, so it
/// holds one full cycle with exactly one apex. The lead-in before the first
/// touchdown and the unfinished tail are dropped.
pub fn slice_hops(log: &HopLog) -> Vec<HopLog> {
    let td_rows: Vec<usize> = detect_true_transitions(log)
        .iter()
        .filter(|tr| tr.kind == Transition::Td)
        .map(|tr| tr.row)
        .collect();
    td_rows
        .windows(2)
        .map(|w| HopLog::new(log.rows[w[0]..w[1]].to_vec()))
        .collect()
}

/// Draws a fixed number of hops per commanded height from a trial
/// collection, without replacement.
pub fn stratified_subset(
    ds: &Dataset,
    per_height: &[(f64, usize)],
    seed: u64,
) -> Result<Dataset> {
    let mut hops: Vec<HopLog> = Vec::new();
    for log in &ds.trials {
        hops.extend(slice_hops(log));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    let mut shortfalls = Vec::new();
    for &(h, want) in per_height {
        let mut pool: Vec<usize> = hops
            .iter()
            .enumerate()
            .filter(|(_, hop)| (hop.rows[0].h_desired - h).abs() < 1e-9)
            .map(|(i, _)| i)
            .collect();
        if pool.len() < want {
            shortfalls.push(format!("height {h} m: requested {want}, available {}", pool.len()));
            continue;
        }
        for k in 0..want {
            let j = k + rng.random_range(0..pool.len() - k);
            pool.swap(k, j);
            picked.push(pool[k]);
        }
    }
    if !shortfalls.is_empty() {
        return Err(Error::data(format!("not enough hops: {}", shortfalls.join("; "))));
    }

    picked.sort_unstable();
    Ok(Dataset {
        trials: picked.iter().map(|&i| hops[i].clone()).collect(),
        subset_spec: per_height.to_vec(),
    })
}

/// Stochastic universal sampling: `n` picks with expected counts
/// proportional to `weights`. All-zero weights degrade to uniform.
pub fn sus_select<R: Rng>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    let uniform = vec![1.0; weights.len()];
    let (w, total) = if total > 0.0 {
        (weights, total)
    } else {
        (uniform.as_slice(), weights.len() as f64)
    };

    let step = total / n as f64;
    let start = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0];
    let mut i = 0;
    for k in 0..n {
        let p = start + k as f64 * step;
        while p >= cum && i + 1 < w.len() {
            i += 1;
            cum += w[i];
        }
        out.push(i);
    }
    out
}

/// Linear ranking for minimization: best cost gets weight 2, worst gets 1.
fn ranking_weights(costs: &[f64]) -> Vec<f64> {
    let n = costs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let mut w = vec![0.0; n];
    for (rank, &idx) in order.iter().enumerate() {
        w[idx] = if n == 1 {
            2.0
        } else {
            2.0 - rank as f64 / (n - 1) as f64
        };
    }
    w
}

/// Uniform scatter crossover with an explicit mask; bit set takes the
/// parameter from the first parent.
pub fn crossover_with_mask(p1: &[f64], p2: &[f64], mask: &[bool]) -> Vec<f64> {
    p1.iter()
        .zip(p2)
        .zip(mask)
        .map(|((a, b), &bit)| if bit { *a } else { *b })
        .collect()
}

/// Uniform scatter crossover with a fair-coin mask.
pub fn crossover_uniform_scatter<R: Rng>(p1: &[f64], p2: &[f64], rng: &mut R) -> Vec<f64> {
    let mask: Vec<bool> = (0..p1.len()).map(|_| rng.random()).collect();
    crossover_with_mask(p1, p2, &mask)
}

/// Mutation along a given direction; halves the step while the candidate
/// leaves the bounds, then clamps whatever still pokes out.
pub fn mutate_with_direction(
    x: &[f64],
    d: &[f64],
    gen: usize,
    generations: usize,
    alpha0: &[f64],
    bounds: &[(f64, f64)],
) -> Vec<f64> {
    let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let growth = (gen as f64 / generations as f64).exp();
    let mut scale = 1.0;
    for _ in 0..=10 {
        let candidate: Vec<f64> = x
            .iter()
            .zip(d)
            .zip(alpha0)
            .map(|((xi, di), a0)| xi + scale * a0 * growth * di / norm)
            .collect();
        let ok = candidate
            .iter()
            .zip(bounds)
            .all(|(v, &(lo, hi))| *v >= lo && *v <= hi);
        if ok {
            return candidate;
        }
        scale *= 0.5;
    }
    x.iter()
        .zip(d)
        .zip(alpha0.iter().zip(bounds))
        .map(|((xi, di), (a0, &(lo, hi)))| (xi + scale * a0 * growth * di / norm).clamp(lo, hi))
        .collect()
}

/// Adaptive mutation with a random unit direction.
pub fn mutate_adaptive<R: Rng>(
    x: &[f64],
    gen: usize,
    generations: usize,
    alpha0: &[f64],
    bounds: &[(f64, f64)],
    rng: &mut R,
) -> Vec<f64> {
    loop {
        let d: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        if d.iter().map(|v| v * v).sum::<f64>() > 0.0 {
            return mutate_with_direction(x, &d, gen, generations, alpha0, bounds);
        }
    }
}

/// Best and mean cost of the population produced by one generation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GenStat {
    pub gen: usize,
    pub best_cost: f64,
    pub mean_cost: f64,
}

/// What a training run produced.
#[derive(Debug, Clone)]
pub struct GaOutcome {
    pub best: EstimatorParams,
    pub best_cost: f64,
    /// One entry per generation.
    pub history: Vec<GenStat>,
    /// Median cost of the random initial population, before any evolution.
    pub initial_median_cost: f64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn child_seed(seed: u64, gen: u64, idx: u64) -> u64 {
    splitmix64(seed ^ splitmix64(gen.wrapping_add(splitmix64(idx))))
}

fn resolve_bounds(cfg: &GaConfig, kind: FilterKind) -> Result<Vec<(f64, f64)>> {
    let ids = ParamId::trained_set(kind);
    if cfg.bounds.is_empty() {
        return Ok(ids.iter().map(|id| id.bounds()).collect());
    }
    if cfg.bounds.len() != ids.len() {
        return Err(Error::config(format!(
            "{} bounds given, {} trains {} parameters",
            cfg.bounds.len(),
            kind.as_str(),
            ids.len()
        )));
    }
    Ok(cfg.bounds.clone())
}

/// Runs the GA and returns the best individual ever evaluated.
///
/// Untrained parameters are taken from `base`, which also joins the initial
/// population so the defaults compete against the random draws.
pub fn run_ga(
    cfg: &GaConfig,
    ds: &Dataset,
    kind: FilterKind,
    phase_cfg: &PhaseConfig,
    rp: &RobotParams,
    base: &EstimatorParams,
) -> Result<GaOutcome> {
    cfg.validate()?;
    if ds.trials.is_empty() {
        return Err(Error::data("training dataset is empty"));
    }
    let bounds = resolve_bounds(cfg, kind)?;
    let alpha0: Vec<f64> = bounds.iter().map(|&(lo, hi)| cfg.alpha0_frac * (hi - lo)).collect();

    // A candidate whose filter diverges (overflowing state, non-finite
    // measurement) is infinitely bad, not a reason to abort the search.
    let eval = |vecs: &[Vec<f64>]| -> Vec<f64> {
        vecs.par_iter()
            .map(|v| {
                base.with_vector(kind, v)
                    .and_then(|p| evaluate_cost(&p, ds, kind, phase_cfg, rp))
                    .map_or(f64::INFINITY, |cb| cb.l_c)
            })
            .collect()
    };

    let mut master = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed));
    let mut pop: Vec<Vec<f64>> = (0..cfg.population)
        .map(|i| {
            if i == 0 {
                base.to_vector(kind)
                    .iter()
                    .zip(&bounds)
                    .map(|(v, &(lo, hi))| v.clamp(lo, hi))
                    .collect()
            } else {
                bounds
                    .iter()
                    .map(|&(lo, hi)| lo + master.random::<f64>() * (hi - lo))
                    .collect()
            }
        })
        .collect();
    let mut costs = eval(&pop);

    let mut sorted_costs = costs.clone();
    sorted_costs.sort_by(f64::total_cmp);
    let initial_median_cost = sorted_costs[sorted_costs.len() / 2];

    let mut best_cost = f64::INFINITY;
    let mut best_vec = pop[0].clone();
    let note_best = |costs: &[f64], pop: &[Vec<f64>], best_cost: &mut f64, best_vec: &mut Vec<f64>| {
        for (c, v) in costs.iter().zip(pop) {
            if *c < *best_cost {
                *best_cost = *c;
                *best_vec = v.clone();
            }
        }
    };
    note_best(&costs, &pop, &mut best_cost, &mut best_vec);

    let n_elite = ((cfg.population as f64 * cfg.elite_frac).round() as usize).max(1);
    let n_cross = ((cfg.population as f64 * cfg.crossover_frac).round() as usize)
        .min(cfg.population - n_elite);
    let n_mut = cfg.population - n_elite - n_cross;

    let mut history = Vec::with_capacity(cfg.generations);
    for gen in 0..cfg.generations {
        let weights = ranking_weights(&costs);
        let parents = sus_select(&weights, 2 * n_cross + n_mut, &mut master);

        let mut elite_order: Vec<usize> = (0..cfg.population).collect();
        elite_order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        elite_order.truncate(n_elite);

        let children: Vec<Vec<f64>> = (0..n_cross)
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, gen as u64 + 1, c as u64));
                crossover_uniform_scatter(&pop[parents[2 * c]], &pop[parents[2 * c + 1]], &mut rng)
            })
            .collect();
        let mutants: Vec<Vec<f64>> = (0..n_mut)
            .map(|m| {
                let mut rng = ChaCha8Rng::seed_from_u64(child_seed(
                    cfg.seed,
                    gen as u64 + 1,
                    (n_cross + m) as u64,
                ));
                mutate_adaptive(
                    &pop[parents[2 * n_cross + m]],
                    gen,
                    cfg.generations,
                    &alpha0,
                    &bounds,
                    &mut rng,
                )
            })
            .collect();

        let mut fresh: Vec<Vec<f64>> = children;
        fresh.extend(mutants);
        let fresh_costs = eval(&fresh);

        let mut next_pop = Vec::with_capacity(cfg.population);
        let mut next_costs = Vec::with_capacity(cfg.population);
        for &e in &elite_order {
            next_pop.push(pop[e].clone());
            next_costs.push(costs[e]);
        }
        next_pop.extend(fresh);
        next_costs.extend(fresh_costs);
        pop = next_pop;
        costs = next_costs;

        note_best(&costs, &pop, &mut best_cost, &mut best_vec);
        let mean = costs.iter().sum::<f64>() / costs.len() as f64;
        history.push(GenStat {
            gen,
            best_cost,
            mean_cost: mean,
        });
    }

    if !best_cost.is_finite() {
        return Err(Error::numeric("every candidate in every generation diverged"));
    }
    Ok(GaOutcome {
        best: base.with_vector(kind, &best_vec)?,
        best_cost,
        history,
        initial_median_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ControlConfig, ControlSource};
    use crate::replay::{replay_log, replayed_log};
    use crate::sensing::SensorConfig;
    use crate::sim::{simulate_trial, ScheduleSeg, TrialConfig};
    use approx::assert_relative_eq;

    fn gt_trial(h: f64, duration: f64, seed: u64) -> HopLog {
        let cfg = TrialConfig {
            duration,
            seed,
            schedule: vec![ScheduleSeg { t: 0.0, h }],
            sensors: SensorConfig::default().noiseless(),
            control: ControlConfig {
                source: ControlSource::TrueState,
                ..ControlConfig::default()
            },
            ..TrialConfig::default()
        };
        simulate_trial(&cfg).unwrap()
    }

    #[test]
    fn cost_branch_follows_apex_count() {
        assert_relative_eq!(CostBreakdown::weighted(4, 4, 0.1, 9.0, 9.0), 10.0);
        assert_relative_eq!(CostBreakdown::weighted(3, 4, 0.9, 0.3, 0.5), 8.0);
        assert_relative_eq!(CostBreakdown::weighted(0, 1, 0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn self_consistent_log_costs_zero() {
        // Overwrite truth with one replay's own output; scoring the same
        // params against it must then be exact. Row 0 keeps its original
        // truth: the replay reads its start state from there.
        let log = gt_trial(1.0, 4.0, 1);
        let p = EstimatorParams::default();
        let pc = PhaseConfig::default();
        let rp = RobotParams::default();
        let ests = replay_log(FilterKind::Kf1, &p, &pc, &rp, &log).unwrap();
        let mut doctored = replayed_log(&log, &ests);
        for (row, est) in doctored.rows.iter_mut().zip(&ests) {
            row.phase = est.phase;
        }
        for (row, est) in doctored.rows.iter_mut().zip(&ests).skip(1) {
            row.z_true = est.z;
            row.v_true = est.v;
        }
        let ds = Dataset::new(vec![doctored]).unwrap();
        let cost = evaluate_cost(&p, &ds, FilterKind::Kf1, &pc, &rp).unwrap();
        assert_eq!(cost.n_ha, cost.n_ha_true);
        assert_eq!(cost.l_c, 0.0);
        assert_eq!(cost.gamma1, 0.0);
        assert!(cost.gamma2 < 1e-6, "gamma2 = {}", cost.gamma2);
        assert!(cost.gamma3 < 1e-3, "gamma3 = {}", cost.gamma3);
    }

    #[test]
    fn cost_is_a_pure_function() {
        let log = gt_trial(1.0, 3.0, 2);
        let ds = Dataset::new(vec![log]).unwrap();
        let p = EstimatorParams::default();
        let a = evaluate_cost(&p, &ds, FilterKind::Kf1, &PhaseConfig::default(), &RobotParams::default())
            .unwrap();
        let b = evaluate_cost(&p, &ds, FilterKind::Kf1, &PhaseConfig::default(), &RobotParams::default())
            .unwrap();
        assert_eq!(a.l_c.to_bits(), b.l_c.to_bits());
    }

    #[test]
    fn apexless_dataset_is_rejected() {
        let log = gt_trial(1.0, 4.0, 1);
        let short = HopLog::new(log.rows[..10].to_vec());
        assert!(Dataset::new(vec![short.clone()]).is_err());
        let ds = Dataset {
            trials: vec![short],
            subset_spec: Vec::new(),
        };
        let err = evaluate_cost(
            &EstimatorParams::default(),
            &ds,
            FilterKind::Kf1,
            &PhaseConfig::default(),
            &RobotParams::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("apex"));
    }

    #[test]
    fn sus_equal_weights_select_everyone_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut picks = sus_select(&[1.0, 1.0, 1.0, 1.0], 4, &mut rng);
        picks.sort_unstable();
        assert_eq!(picks, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sus_three_to_one_weights_split_three_to_one() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let picks = sus_select(&[3.0, 1.0], 4, &mut rng);
            assert_eq!(picks.iter().filter(|&&i| i == 0).count(), 3);
            assert_eq!(picks.iter().filter(|&&i| i == 1).count(), 1);
        }
    }

    #[test]
    fn sus_degenerate_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(sus_select(&[7.0], 3, &mut rng), vec![0, 0, 0]);
        let uniform = sus_select(&[0.0, 0.0], 4, &mut rng);
        assert_eq!(uniform.iter().filter(|&&i| i == 0).count(), 2);
    }

    #[test]
    fn crossover_of_identical_parents_is_identity() {
        let p = vec![1.0, 2.0, 3.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(crossover_uniform_scatter(&p, &p, &mut rng), p);
        assert_eq!(crossover_with_mask(&p, &[9.0, 9.0, 9.0], &[true, true, true]), p);
    }

    #[test]
    fn crossover_mask_is_a_fair_coin() {
        let p1 = vec![1.0; 6];
        let p2 = vec![0.0; 6];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut from_p1 = [0usize; 6];
        let n = 10_000;
        for _ in 0..n {
            let child = crossover_uniform_scatter(&p1, &p2, &mut rng);
            for (count, v) in from_p1.iter_mut().zip(&child) {
                *count += (*v == 1.0) as usize;
            }
        }
        for count in from_p1 {
            let rate = count as f64 / n as f64;
            assert!((0.45..=0.55).contains(&rate), "rate {rate}");
        }
    }

    #[test]
    fn mutation_moves_by_alpha_along_the_direction() {
        let x = vec![0.5, 0.5];
        let bounds = vec![(0.0, 1.0), (0.0, 1.0)];
        let moved = mutate_with_direction(&x, &[1.0, 0.0], 0, 20, &[0.1, 0.1], &bounds);
        assert_relative_eq!(moved[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(moved[1], 0.5, epsilon = 1e-12);

        let late = mutate_with_direction(&x, &[1.0, 0.0], 20, 20, &[0.1, 0.1], &bounds);
        assert_relative_eq!(late[0], 0.5 + 0.1 * 1.0f64.exp(), epsilon = 1e-12);
    }

    #[test]
    fn mutation_respects_bounds_at_the_edge() {
        let bounds = vec![(0.0, 1.0); 3];
        let alpha0 = vec![0.3; 3];
        let x = vec![1.0, 1.0, 1.0];
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = mutate_adaptive(&x, 10, 20, &alpha0, &bounds, &mut rng);
            for v in m {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn hop_slices_carry_one_apex_each() {
        let log = gt_trial(1.0, 8.0, 0);
        let hops = slice_hops(&log);
        assert!(hops.len() >= 4);
        for hop in &hops {
            assert_eq!(hop.true_ha_count(), 1);
        }
    }

    #[test]
    fn stratified_subset_exact_counts_and_determinism() {
        let ds = Dataset::new(vec![gt_trial(1.0, 8.0, 0), gt_trial(2.0, 10.0, 1)]).unwrap();
        let spec = [(1.0, 3), (2.0, 2)];
        let a = stratified_subset(&ds, &spec, 7).unwrap();
        assert_eq!(a.trials.len(), 5);
        let ones = a.trials.iter().filter(|h| h.rows[0].h_desired == 1.0).count();
        assert_eq!(ones, 3);
        let b = stratified_subset(&ds, &spec, 7).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.rows[0].t.to_bits(), y.rows[0].t.to_bits());
        }
        let err = stratified_subset(&ds, &[(3.0, 1)], 7).unwrap_err();
        assert!(err.to_string().contains("height 3"));
    }

    #[test]
    fn ga_smoke_run_improves_and_repeats() {
        let ds = Dataset::new(vec![gt_trial(1.0, 3.0, 4)]).unwrap();
        let cfg = GaConfig {
            population: 8,
            generations: 2,
            seed: 3,
            ..GaConfig::default()
        };
        let pc = PhaseConfig::default();
        let rp = RobotParams::default();
        let base = EstimatorParams::default();
        let out = run_ga(&cfg, &ds, FilterKind::Kf1, &pc, &rp, &base).unwrap();
        assert_eq!(out.history.len(), 2);
        assert!(out.best_cost.is_finite());
        assert!(out.history[1].best_cost <= out.history[0].best_cost);
        assert!(out.best_cost <= out.initial_median_cost);

        let again = run_ga(&cfg, &ds, FilterKind::Kf1, &pc, &rp, &base).unwrap();
        assert_eq!(
            out.best.to_vector(FilterKind::Kf1),
            again.best.to_vector(FilterKind::Kf1)
        );
        assert_eq!(out.best_cost.to_bits(), again.best_cost.to_bits());
    }

    #[test]
    fn ga_config_fraction_validation() {
        let bad = GaConfig {
            elite_frac: 0.5,
            crossover_frac: 0.6,
            ..GaConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(GaConfig::default().validate().is_ok());
    }
}
