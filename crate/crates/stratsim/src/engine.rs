//! The simulation loop: recommendations, consumer decisions, feedback
//! collection, scheduled retraining, per-step metrics, and replication runs.
//!
//! One replication is sequential: consumers act in id order within a step,
//! and feedback/posts take effect immediately (visible to later consumers in
//! the same step), while retraining only happens at period boundaries.
//! Replications and grid cells are independent and may run in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::consumer::{
    choose_item, decide_consume, expectation_threshold, experience_utility, maybe_feedback,
    maybe_post, maybe_refresh_reputation, update_trust, ConsumerState, PositionBias,
};
use crate::data::{init_consumer, ConsumerInit, Ingest, ItemCatalog, RatingRecord, RatingStore};
use crate::error::{Result, SimError};
use crate::predictor::{retrain_due, train, PredictionMatrix, TrainConfig};
use crate::social::ReputationLedger;
use crate::strategy::{RecommendationPlan, Strategy, StrategyConfig};

// Independent rng streams per subsystem, derived from the replication seed.
const SALT_SETUP: u64 = 0x5e7u64;
const SALT_TRAIN: u64 = 0x7261_696e;
const SALT_STEPS: u64 = 0x5374_6570;

/// Everything a run needs besides the seed-dependent state: the initial
/// store, the catalog, and per-consumer initial experience counters. Shared
/// read-only across replications.
#[derive(Debug, Clone)]
pub struct SimData {
    pub store: RatingStore,
    pub catalog: ItemCatalog,
    pub inits: Vec<ConsumerInit>,
}

impl SimData {
    pub fn prepare(ingest: Ingest, catalog: ItemCatalog) -> Result<Self> {
        if catalog.item_count() != ingest.store.item_count() {
            return Err(SimError::validation(format!(
                "catalog has {} items, store has {}",
                catalog.item_count(),
                ingest.store.item_count()
            )));
        }
        let inits = (0..ingest.store.consumer_count() as u32)
            .map(|c| init_consumer(&ingest.store, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(SimData {
            store: ingest.store,
            catalog,
            inits,
        })
    }
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub strategy: StrategyConfig,
    pub delta: f64,
    pub psi: f64,
    pub steps: usize,
    pub replications: usize,
    pub retrain_period: usize,
    pub base_seed: u64,
    pub p_feed: f64,
    pub p_soc: f64,
    pub nu: u64,
    pub noise_sd: f64,
    /// Scales the U-shaped posting probability; 0 disables posting.
    pub post_scale: f64,
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, v: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&v) {
                return Err(SimError::validation(format!("{name} = {v} outside [0,1]")));
            }
            Ok(())
        };
        prob("p_feed", self.p_feed)?;
        prob("p_soc", self.p_soc)?;
        prob("delta", self.delta)?;
        prob("post_scale", self.post_scale)?;
        if !(self.psi > 0.0 && self.psi < 1.0) {
            return Err(SimError::validation(format!(
                "psi = {} outside (0,1)",
                self.psi
            )));
        }
        if self.replications < 1 {
            return Err(SimError::validation("replications must be >= 1"));
        }
        if self.retrain_period == 0 {
            return Err(SimError::validation("retrain_period must be >= 1"));
        }
        if self.strategy.list_len == 0 {
            return Err(SimError::validation("list_len must be >= 1"));
        }
        if self.nu == 0 {
            return Err(SimError::validation("nu must be >= 1"));
        }
        if self.noise_sd < 0.0 {
            return Err(SimError::validation("noise_sd must be >= 0"));
        }
        Ok(())
    }
}

/// Per-step aggregates of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub mean_trust: f64,
    pub mean_consumption_prob: f64,
    pub profit_step: f64,
    pub cumulative_profit: f64,
    pub s_plus: u64,
    pub s_minus: u64,
    pub consumption_count: usize,
}

/// Mean and 95% CI half-width across replications (half-width absent for a
/// single replication).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanCi {
    pub mean: f64,
    pub ci_half_width: Option<f64>,
}

/// Cross-replication aggregate for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatePoint {
    pub step: usize,
    pub mean_trust: MeanCi,
    pub mean_consumption_prob: MeanCi,
    pub profit_step: MeanCi,
    pub cumulative_profit: MeanCi,
}

/// All replications of one configuration plus the per-step aggregate.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    pub per_replication: Vec<Vec<StepMetrics>>,
    pub aggregate: Vec<AggregatePoint>,
}

/// Runs one replication. Deterministic given (data, cfg, seed).
pub fn run_replication(data: &SimData, cfg: &RunConfig, seed: u64) -> Result<Vec<StepMetrics>> {
    cfg.validate()?;
    let catalog = &data.catalog;
    let item_count = catalog.item_count();
    let mut store = data.store.clone();
    let initial_store_len = store.len();

    let mut rng_setup = ChaCha8Rng::seed_from_u64(seed ^ SALT_SETUP);
    let mut rng_train = ChaCha8Rng::seed_from_u64(seed ^ SALT_TRAIN);
    let mut rng_step = ChaCha8Rng::seed_from_u64(seed ^ SALT_STEPS);

    let bias = PositionBias::sample(cfg.strategy.list_len, &mut rng_setup);

    let mut consumers: Vec<ConsumerState> = data
        .inits
        .iter()
        .map(|init| ConsumerState::new(init.alpha0, init.beta0, item_count, &init.rated_items))
        .collect();

    let model = train(&store, &cfg.train, &mut rng_train)?;
    let mut matrix = PredictionMatrix::build(&model, &store, 0);
    refresh_thresholds(&mut consumers, &matrix, cfg.psi)?;
    let mut plan = RecommendationPlan::build(
        &matrix,
        catalog,
        &store,
        |c| consumers[c as usize].consumed.as_slice(),
        &cfg.strategy,
        cfg.retrain_period,
    );

    let mut ledger = ReputationLedger::default();
    let mut warned_exhausted = vec![false; consumers.len()];
    let mut posts_recorded: u64 = 0;
    let mut feedback_recorded: usize = 0;
    let mut cumulative_profit = 0.0;
    let mut metrics = Vec::with_capacity(cfg.steps);

    for step in 1..=cfg.steps {
        let mut trust_sum = 0.0;
        let mut prob_sum = 0.0;
        let mut active = 0usize;
        let mut profit_step = 0.0;
        let mut consumption_count = 0usize;

        for c in 0..consumers.len() {
            if consumers[c].exhausted() {
                if !warned_exhausted[c] {
                    log::warn!("consumer {c} exhausted the catalog at step {step}; skipping");
                    warned_exhausted[c] = true;
                }
                continue;
            }
            active += 1;
            trust_sum += consumers[c].trust;
            let (buys, prob) =
                decide_consume(&consumers[c], &ledger, cfg.delta, cfg.nu, &mut rng_step);
            prob_sum += prob;
            if buys {
                let list = plan.top_n(
                    c as u32,
                    &matrix,
                    catalog,
                    &store,
                    &consumers[c].consumed,
                    &cfg.strategy,
                );
                let item = choose_item(&list, &bias, &mut rng_step)?;
                let r_hat = matrix.value(c as u32, item) as f64;
                let utility = experience_utility(r_hat, cfg.noise_sd, &mut rng_step);
                let threshold = consumers[c].threshold;
                let satisfied = utility >= threshold;
                update_trust(&mut consumers[c], utility, threshold);
                consumers[c].mark_consumed(item);
                profit_step += catalog.profit(item);
                consumption_count += 1;
                if let Some(rating) = maybe_feedback(utility, cfg.p_feed, &mut rng_step) {
                    store.append(RatingRecord {
                        consumer: c as u32,
                        item,
                        rating: rating as f32,
                        timestamp: step as i64,
                    })?;
                    plan.note_feedback(item, store.item_counts()[item as usize]);
                    feedback_recorded += 1;
                }
                if let Some(direction) =
                    maybe_post(utility, satisfied, cfg.post_scale, &mut rng_step)
                {
                    ledger.record_post(direction);
                    posts_recorded += 1;
                }
            }
            maybe_refresh_reputation(&mut consumers[c], &ledger, cfg.p_soc, &mut rng_step);
        }

        if active == 0 {
            return Err(SimError::Internal(format!(
                "all consumers exhausted the catalog by step {step}"
            )));
        }
        cumulative_profit += profit_step;
        let point = StepMetrics {
            step,
            mean_trust: trust_sum / active as f64,
            mean_consumption_prob: prob_sum / active as f64,
            profit_step,
            cumulative_profit,
            s_plus: ledger.s_plus,
            s_minus: ledger.s_minus,
            consumption_count,
        };
        if !point.mean_trust.is_finite()
            || !point.mean_consumption_prob.is_finite()
            || !point.profit_step.is_finite()
            || !point.cumulative_profit.is_finite()
        {
            return Err(SimError::Internal(format!(
                "non-finite metrics at step {step}: {point:?}"
            )));
        }
        debug_assert!(consumption_count <= consumers.len());
        debug_assert!(profit_step <= consumption_count as f64 * 5.0 + 1e-9);
        metrics.push(point);

        if retrain_due(step, cfg.retrain_period) {
            // Cross-check the event accounting before retraining.
            assert_eq!(ledger.total(), posts_recorded, "ledger diverged from posts");
            assert_eq!(
                store.len(),
                initial_store_len + feedback_recorded,
                "store diverged from feedback events"
            );
            let model = train(&store, &cfg.train, &mut rng_train)?;
            matrix = PredictionMatrix::build(&model, &store, step);
            refresh_thresholds(&mut consumers, &matrix, cfg.psi)?;
            for c in 0..consumers.len() as u32 {
                if !consumers[c as usize].exhausted() {
                    plan.rebuild_consumer(
                        c,
                        &matrix,
                        catalog,
                        &consumers[c as usize].consumed,
                        &cfg.strategy,
                    );
                }
            }
            log::debug!(
                "step {step}: retrained on {} ratings ({} posts so far)",
                store.len(),
                ledger.total()
            );
        }
    }

    assert_eq!(store.len(), initial_store_len + feedback_recorded);
    assert_eq!(ledger.total(), posts_recorded);
    Ok(metrics)
}

/// Recomputes every consumer's expectation threshold as the psi-quantile of
/// the predicted utilities over their remaining items.
fn refresh_thresholds(
    consumers: &mut [ConsumerState],
    matrix: &PredictionMatrix,
    psi: f64,
) -> Result<()> {
    for (c, state) in consumers.iter_mut().enumerate() {
        if state.exhausted() {
            continue;
        }
        let row = matrix.row(c as u32);
        let remaining: Vec<f64> = row
            .iter()
            .zip(&state.consumed)
            .filter(|(_, &done)| !done)
            .map(|(&v, _)| v as f64)
            .collect();
        state.threshold = expectation_threshold(remaining, psi)?;
    }
    Ok(())
}

/// Runs all replications of a configuration (seeds base_seed + index) and
/// aggregates them.
pub fn run_experiment(data: &SimData, cfg: &RunConfig) -> Result<RunResult> {
    cfg.validate()?;
    let per_replication: Vec<Vec<StepMetrics>> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = cfg.base_seed.wrapping_add(rep as u64);
            run_replication(data, cfg, seed).map_err(|e| SimError::Replication {
                seed,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let aggregate = aggregate_steps(&per_replication)?;
    log::info!(
        "{} delta={} psi={}: {} replications x {} steps done",
        cfg.strategy.kind,
        cfg.delta,
        cfg.psi,
        cfg.replications,
        cfg.steps
    );
    Ok(RunResult {
        config: cfg.clone(),
        per_replication,
        aggregate,
    })
}

/// Per-step mean and two-sided 95% Student-t confidence half-width across
/// replications.
pub fn aggregate_steps(per_replication: &[Vec<StepMetrics>]) -> Result<Vec<AggregatePoint>> {
    let n = per_replication.len();
    if n == 0 {
        return Err(SimError::validation("no replications to aggregate"));
    }
    let steps = per_replication[0].len();
    if per_replication.iter().any(|r| r.len() != steps) {
        return Err(SimError::Internal(
            "replications produced different step counts".into(),
        ));
    }
    let t_factor = if n > 1 {
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .map_err(|e| SimError::Internal(format!("student-t setup: {e}")))?;
        Some(t.inverse_cdf(0.975))
    } else {
        None
    };
    let summarize = |values: &[f64]| -> MeanCi {
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci_half_width = t_factor.map(|t| {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            t * (var / n as f64).sqrt()
        });
        MeanCi {
            mean,
            ci_half_width,
        }
    };
    Ok((0..steps)
        .map(|s| {
            let collect = |f: fn(&StepMetrics) -> f64| -> Vec<f64> {
                per_replication.iter().map(|r| f(&r[s])).collect()
            };
            AggregatePoint {
                step: per_replication[0][s].step,
                mean_trust: summarize(&collect(|m| m.mean_trust)),
                mean_consumption_prob: summarize(&collect(|m| m.mean_consumption_prob)),
                profit_step: summarize(&collect(|m| m.profit_step)),
                cumulative_profit: summarize(&collect(|m| m.cumulative_profit)),
            }
        })
        .collect())
}

/// Cartesian product of the experiment factors, strategy-major then delta
/// then psi, with everything else taken from `template`.
pub fn grid(
    strategies: &[Strategy],
    deltas: &[f64],
    psis: &[f64],
    template: &RunConfig,
) -> Result<Vec<RunConfig>> {
    if strategies.is_empty() || deltas.is_empty() || psis.is_empty() {
        return Err(SimError::validation(
            "grid factors must be non-empty (strategies, deltas, psis)",
        ));
    }
    let mut configs = Vec::with_capacity(strategies.len() * deltas.len() * psis.len());
    for &kind in strategies {
        for &delta in deltas {
            for &psi in psis {
                let cfg = RunConfig {
                    strategy: StrategyConfig::new(kind, template.strategy.list_len),
                    delta,
                    psi,
                    ..template.clone()
                };
                cfg.validate()?;
                configs.push(cfg);
            }
        }
    }
    Ok(configs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{load_ratings, ColumnSchema};
    use crate::synth::{generate, SynthConfig};
    use std::io::Write;

    fn mini_data() -> SimData {
        let cfg = SynthConfig::tiny(24, 160, 960, 77);
        let csv = generate(&cfg).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(csv.as_bytes()).unwrap();
        f.flush().unwrap();
        let ingest = load_ratings(f.path(), &ColumnSchema::default()).unwrap();
        let profits = crate::data::sample_profits(
            ingest.store.item_count(),
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let catalog = ItemCatalog::new(profits, ingest.item_ids.clone()).unwrap();
        SimData::prepare(ingest, catalog).unwrap()
    }

    fn mini_config(steps: usize) -> RunConfig {
        RunConfig {
            strategy: StrategyConfig::new(Strategy::ConsumerCentric, 10),
            delta: 0.0,
            psi: 0.75,
            steps,
            replications: 2,
            retrain_period: 25,
            base_seed: 99,
            p_feed: 0.10,
            p_soc: 0.15,
            nu: 5_000,
            noise_sd: 0.3,
            post_scale: 1.0,
            train: TrainConfig {
                factors: 12,
                epochs: 6,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn zero_steps_yield_empty_metrics() {
        let data = mini_data();
        let metrics = run_replication(&data, &mini_config(0), 1).unwrap();
        assert!(metrics.is_empty());
    }

    #[test]
    fn no_social_media_means_probability_equals_trust() {
        let data = mini_data();
        let cfg = RunConfig {
            delta: 0.0,
            ..mini_config(50)
        };
        let metrics = run_replication(&data, &cfg, 3).unwrap();
        assert_eq!(metrics.len(), 50);
        for m in &metrics {
            assert_eq!(
                m.mean_consumption_prob, m.mean_trust,
                "step {}: probability diverged from trust at delta=0",
                m.step
            );
        }
    }

    #[test]
    fn replications_are_deterministic() {
        let data = mini_data();
        let cfg = mini_config(30);
        let a = run_replication(&data, &cfg, 11).unwrap();
        let b = run_replication(&data, &cfg, 11).unwrap();
        assert_eq!(a, b);
        let c = run_replication(&data, &cfg, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn cumulative_profit_accumulates_step_profit() {
        let data = mini_data();
        let metrics = run_replication(&data, &mini_config(40), 2).unwrap();
        let mut acc = 0.0;
        for m in &metrics {
            acc += m.profit_step;
            assert!((m.cumulative_profit - acc).abs() < 1e-9);
            assert!(m.profit_step >= 0.0);
            assert!(m.profit_step <= m.consumption_count as f64 * 5.0);
            assert!(m.consumption_count <= data.store.consumer_count());
        }
    }

    #[test]
    fn store_growth_matches_feedback_events() {
        let data = mini_data();
        // with p_feed = 1 every consumption stores a rating, so the final
        // ledger equality asserted inside run_replication pins the bookkeeping
        let cfg = RunConfig {
            p_feed: 1.0,
            ..mini_config(30)
        };
        let metrics = run_replication(&data, &cfg, 7).unwrap();
        assert!(metrics.iter().map(|m| m.consumption_count).sum::<usize>() > 0);
    }

    #[test]
    fn frozen_stochastics_give_a_fixed_trajectory() {
        let data = mini_data();
        let cfg = RunConfig {
            noise_sd: 0.0,
            p_feed: 0.0,
            p_soc: 0.0,
            post_scale: 0.0,
            delta: 0.0,
            ..mini_config(25)
        };
        let a = run_replication(&data, &cfg, 4).unwrap();
        let b = run_replication(&data, &cfg, 4).unwrap();
        assert_eq!(a, b);
        // no posts and no feedback can occur
        let last = a.last().unwrap();
        assert_eq!((last.s_plus, last.s_minus), (0, 0));
        // the trajectory is a pure function of the initial model: freeze a probe
        let probe = (
            format!("{:.12}", a[0].mean_trust),
            format!("{:.12}", a[24].mean_trust),
        );
        let again = run_replication(&data, &cfg, 4).unwrap();
        assert_eq!(probe.0, format!("{:.12}", again[0].mean_trust));
        assert_eq!(probe.1, format!("{:.12}", again[24].mean_trust));
    }

    #[test]
    fn experiment_aggregates_replications() {
        let data = mini_data();
        let cfg = mini_config(20);
        let result = run_experiment(&data, &cfg).unwrap();
        assert_eq!(result.per_replication.len(), 2);
        assert_eq!(result.aggregate.len(), 20);
        let point = &result.aggregate[10];
        let manual = (result.per_replication[0][10].mean_trust
            + result.per_replication[1][10].mean_trust)
            / 2.0;
        assert!((point.mean_trust.mean - manual).abs() < 1e-12);
        assert!(point.mean_trust.ci_half_width.is_some());
    }

    #[test]
    fn single_replication_has_no_half_width() {
        let data = mini_data();
        let cfg = RunConfig {
            replications: 1,
            ..mini_config(10)
        };
        let result = run_experiment(&data, &cfg).unwrap();
        assert!(result.aggregate[0].mean_trust.ci_half_width.is_none());
    }

    #[test]
    fn constant_metrics_aggregate_with_zero_width() {
        let point = |v: f64| StepMetrics {
            step: 1,
            mean_trust: v,
            mean_consumption_prob: v,
            profit_step: v,
            cumulative_profit: v,
            s_plus: 0,
            s_minus: 0,
            consumption_count: 0,
        };
        let reps = vec![vec![point(5.0)], vec![point(5.0)], vec![point(5.0)]];
        let agg = aggregate_steps(&reps).unwrap();
        assert_eq!(agg[0].profit_step.mean, 5.0);
        assert_eq!(agg[0].profit_step.ci_half_width, Some(0.0));
    }

    #[test]
    fn grid_is_the_cartesian_product() {
        use crate::strategy::ALL_STRATEGIES;
        let template = mini_config(1);
        let configs = grid(
            &ALL_STRATEGIES,
            &[0.0, 0.05, 0.1, 0.5],
            &[0.75, 0.85, 0.95],
            &template,
        )
        .unwrap();
        assert_eq!(configs.len(), 60);
        let single = grid(&[Strategy::Balanced], &[0.1], &[0.75], &template).unwrap();
        assert_eq!(single.len(), 1);
        assert!(grid(&[], &[0.1], &[0.75], &template).is_err());
    }
}
