//! Consumer-side behavior: expectation thresholds, the consumption decision,
//! position-biased item choice, utility experience, trust updates, feedback,
//! and social posting.
//!
//! Per step and consumer, random draws happen in a fixed order so runs are
//! reproducible: consume decision, then (only on consumption) rank choice,
//! utility noise, feedback, post, and finally the reputation refresh.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};
use crate::social::{PostDirection, ReputationLedger};
use crate::strategy::RecommendationList;

/// Evolving per-consumer state. Trust is the Beta-mean alpha/(alpha+beta);
/// both counters only grow. The threshold is recomputed only at retrain
/// boundaries; `consumed` only grows.
#[derive(Debug, Clone)]
pub struct ConsumerState {
    pub alpha: f64,
    pub beta: f64,
    pub trust: f64,
    pub cached_reputation: f64,
    pub threshold: f64,
    pub consumed: Vec<bool>,
    pub consumed_count: usize,
}

impl ConsumerState {
    pub fn new(alpha: f64, beta: f64, item_count: usize, rated_items: &[u32]) -> Self {
        let mut consumed = vec![false; item_count];
        let mut consumed_count = 0;
        for &item in rated_items {
            if !consumed[item as usize] {
                consumed[item as usize] = true;
                consumed_count += 1;
            }
        }
        ConsumerState {
            alpha,
            beta,
            trust: alpha / (alpha + beta),
            cached_reputation: 0.5, // neutral start, no reputation data yet
            threshold: 0.0,
            consumed,
            consumed_count,
        }
    }

    pub fn mark_consumed(&mut self, item: u32) {
        if !self.consumed[item as usize] {
            self.consumed[item as usize] = true;
            self.consumed_count += 1;
        }
    }

    pub fn exhausted(&self) -> bool {
        self.consumed_count >= self.consumed.len()
    }
}

/// What happened when a consumer consumed an item this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsumptionEvent {
    pub consumer: u32,
    pub item: u32,
    pub utility: f64,
    pub satisfied: bool,
    pub profit: f64,
    pub gave_feedback: bool,
    pub posted: Option<PostDirection>,
}

/// Empirical psi-quantile by the nearest-rank rule: sort ascending and take
/// the element at 1-based index ceil(psi * n). Scratch is consumed.
pub fn expectation_threshold(mut utils: Vec<f64>, psi: f64) -> Result<f64> {
    if utils.is_empty() {
        return Err(SimError::Internal(
            "expectation threshold over an empty utility set (consumer should have been skipped)"
                .into(),
        ));
    }
    debug_assert!(psi > 0.0 && psi < 1.0);
    let n = utils.len();
    let rank = ((psi * n as f64).ceil() as usize).clamp(1, n);
    let (_, value, _) = utils.select_nth_unstable_by(rank - 1, |a, b| a.total_cmp(b));
    Ok(*value)
}

/// The consumption decision: the mean of trust and cached reputation, clamped
/// into the band trust +- a_t * delta, then a Bernoulli draw. Returns the
/// draw and the probability used.
pub fn decide_consume<R: Rng>(
    state: &ConsumerState,
    ledger: &ReputationLedger,
    delta: f64,
    nu: u64,
    rng: &mut R,
) -> (bool, f64) {
    let a_t = ledger.volume_weight(nu);
    let reach = a_t * delta;
    let lower = (state.trust - reach).max(0.0);
    let upper = (state.trust + reach).min(1.0);
    let mid = (state.trust + state.cached_reputation) / 2.0;
    let p = mid.clamp(lower, upper);
    assert!(
        (lower..=upper).contains(&p),
        "consumption probability {p} outside [{lower}, {upper}]"
    );
    (rng.random::<f64>() < p, p)
}

/// Rank-selection probabilities over the recommendation list: positive,
/// non-increasing, summing to 1. Drawn once per replication from a symmetric
/// Dirichlet(1,...,1) and sorted descending.
#[derive(Debug, Clone)]
pub struct PositionBias {
    probs: Vec<f64>,
}

impl PositionBias {
    pub fn sample<R: Rng>(len: usize, rng: &mut R) -> Self {
        // Normalized iid Exp(1) draws are exactly Dirichlet(1,...,1).
        let mut probs: Vec<f64> = (0..len)
            .map(|_| -rng.random::<f64>().max(f64::MIN_POSITIVE).ln())
            .collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        probs.sort_unstable_by(|a, b| b.total_cmp(a));
        PositionBias { probs }
    }

    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| p <= 0.0) {
            return Err(SimError::validation("position bias needs positive probabilities"));
        }
        if probs.windows(2).any(|w| w[0] < w[1]) {
            return Err(SimError::validation("position bias must be non-increasing"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SimError::validation(format!(
                "position bias sums to {total}, expected 1"
            )));
        }
        Ok(PositionBias { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Samples a rank for a list of `list_len` items. Shorter lists use the
    /// first `list_len` probabilities renormalized (still descending).
    pub fn sample_rank<R: Rng>(&self, list_len: usize, rng: &mut R) -> usize {
        debug_assert!(list_len >= 1 && list_len <= self.probs.len());
        let slice = &self.probs[..list_len];
        let total: f64 = slice.iter().sum();
        let mut draw = rng.random::<f64>() * total;
        for (rank, &p) in slice.iter().enumerate() {
            draw -= p;
            if draw < 0.0 {
                return rank;
            }
        }
        list_len - 1
    }
}

/// Picks an item from the list under the position bias.
pub fn choose_item<R: Rng>(
    list: &RecommendationList,
    bias: &PositionBias,
    rng: &mut R,
) -> Result<u32> {
    if list.items.is_empty() {
        return Err(SimError::Internal(
            "choose_item on an empty recommendation list".into(),
        ));
    }
    let rank = bias.sample_rank(list.items.len().min(bias.probs().len()), rng);
    Ok(list.items[rank])
}

/// Experienced utility: the predicted rating plus N(0, noise_sd) noise,
/// clamped to the rating scale so stored feedback stays in [0,5].
pub fn experience_utility<R: Rng>(r_hat: f64, noise_sd: f64, rng: &mut R) -> f64 {
    let noise = if noise_sd > 0.0 {
        Normal::new(0.0, noise_sd).expect("valid sd").sample(rng)
    } else {
        0.0
    };
    (r_hat + noise).clamp(0.0, 5.0)
}

/// Trust update: the squared distance between utility and threshold is added
/// to alpha on satisfaction (utility >= threshold) and to beta otherwise;
/// trust is then the Beta mean.
pub fn update_trust(state: &mut ConsumerState, utility: f64, threshold: f64) {
    let d = (utility - threshold).powi(2);
    if utility >= threshold {
        state.alpha += d;
    } else {
        state.beta += d;
    }
    state.trust = state.alpha / (state.alpha + state.beta);
}

/// With probability `p_feed`, the consumer reports the experienced utility as
/// a rating.
pub fn maybe_feedback<R: Rng>(utility: f64, p_feed: f64, rng: &mut R) -> Option<f64> {
    if rng.random::<f64>() < p_feed {
        Some(utility)
    } else {
        None
    }
}

/// U-shaped posting probability over the rating scale: certain at the
/// extremes, zero at the midpoint.
pub fn post_probability(utility: f64) -> f64 {
    let x = utility / 5.0;
    1.0 - 4.0 * x * (1.0 - x)
}

/// Extreme experiences get posted; thumbs direction follows satisfaction.
/// `post_scale` scales the U-shaped probability (1 = nominal, 0 = never).
pub fn maybe_post<R: Rng>(
    utility: f64,
    satisfied: bool,
    post_scale: f64,
    rng: &mut R,
) -> Option<PostDirection> {
    let p = post_probability(utility) * post_scale;
    if rng.random::<f64>() < p {
        Some(if satisfied {
            PostDirection::Up
        } else {
            PostDirection::Down
        })
    } else {
        None
    }
}

/// With probability `p_soc` the consumer refreshes their cached view of the
/// provider's reputation; an empty ledger leaves the cache unchanged.
pub fn maybe_refresh_reputation<R: Rng>(
    state: &mut ConsumerState,
    ledger: &ReputationLedger,
    p_soc: f64,
    rng: &mut R,
) {
    if rng.random::<f64>() < p_soc {
        if let Some(rep) = ledger.reputation() {
            state.cached_reputation = rep;
        }
    }
}
