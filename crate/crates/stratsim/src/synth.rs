//! Deterministic generator for a MovieLens-shaped ratings file.
//!
//! Environments that do not ship the real ml-latest-small dataset can
//! generate a stand-in with the same shape: 610 consumers, 9,742 items,
//! 100,836 ratings on the 0.5-step scale in [0.5, 5.0]. The generated data
//! has the structural properties the simulation depends on:
//!
//! - a low-rank latent structure (user/item biases plus an 8-dimensional
//!   interaction term) with observation noise, so a matrix-factorization
//!   model beats the global-mean baseline on a holdout;
//! - a long-tail item popularity distribution, positively correlated with
//!   item quality (popular items tend to be good, like blockbusters);
//! - a long-tail per-consumer rating-count distribution with a floor of 20.
//!
//! Every item is rated at least once, every consumer at least
//! `min_ratings_per_consumer` times, and the total row count is exact. Output
//! is a function of the seed alone.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, SimError};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub consumers: usize,
    pub items: usize,
    pub ratings: usize,
    pub seed: u64,
    /// Latent model: rating = mean + consumer bias + item quality + u.v + noise.
    pub global_mean: f64,
    pub consumer_bias_sd: f64,
    /// Item quality is left-skewed like movie averages: a bunched top near
    /// `cap` and a long tail of bad items, quality = cap - Exp(tail) + N(0, sd).
    pub item_quality_cap: f64,
    pub item_quality_tail: f64,
    pub item_quality_sd: f64,
    pub latent_dim: usize,
    pub latent_coord_sd: f64,
    pub noise_sd: f64,
    /// Item sampling weight: exp(coupling * quality + N(0, pop_noise_sd)).
    pub pop_quality_coupling: f64,
    pub pop_noise_sd: f64,
    /// Per-consumer count distribution: lognormal(median, log_sd), bounded.
    pub count_median: f64,
    pub count_log_sd: f64,
    pub min_ratings_per_consumer: usize,
    pub max_ratings_per_consumer: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            consumers: 610,
            items: 9_742,
            ratings: 100_836,
            seed: 1337,
            global_mean: 3.8,
            consumer_bias_sd: 0.35,
            item_quality_cap: 0.3,
            item_quality_tail: 1.45,
            item_quality_sd: 0.1,
            latent_dim: 8,
            latent_coord_sd: 0.25,
            noise_sd: 0.55,
            pop_quality_coupling: 0.3,
            pop_noise_sd: 0.9,
            count_median: 50.0,
            count_log_sd: 1.5,
            min_ratings_per_consumer: 20,
            max_ratings_per_consumer: 2_700,
        }
    }
}

impl SynthConfig {
    /// A small dataset for tests and quick runs; scales the count bounds down
    /// with the requested density.
    pub fn tiny(consumers: usize, items: usize, ratings: usize, seed: u64) -> Self {
        let per = (ratings / consumers.max(1)).max(2);
        SynthConfig {
            consumers,
            items,
            ratings,
            seed,
            count_median: per as f64,
            min_ratings_per_consumer: (per / 2).max(1),
            max_ratings_per_consumer: items,
            ..SynthConfig::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.consumers == 0 || self.items == 0 {
            return Err(SimError::validation("need at least one consumer and item"));
        }
        if self.ratings < self.items {
            return Err(SimError::validation(format!(
                "{} ratings cannot cover {} items",
                self.ratings, self.items
            )));
        }
        if self.ratings < self.consumers * self.min_ratings_per_consumer {
            return Err(SimError::validation(format!(
                "{} ratings cannot give {} consumers {} ratings each",
                self.ratings, self.consumers, self.min_ratings_per_consumer
            )));
        }
        if self.ratings > self.consumers * self.items {
            return Err(SimError::validation("more ratings requested than consumer-item pairs"));
        }
        Ok(())
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Sparse external movie id for dense item index `i` (strictly increasing).
fn external_item_id(i: usize) -> u64 {
    i as u64 * 20 + splitmix64(i as u64) % 17 + 1
}

/// Per-consumer rating counts: lognormal, bounded, adjusted to an exact total.
fn sample_counts(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let log_normal = Normal::new(cfg.count_median.ln(), cfg.count_log_sd).expect("valid");
    let lo = cfg.min_ratings_per_consumer;
    let hi = cfg.max_ratings_per_consumer.min(cfg.items);
    let mut raw: Vec<f64> = (0..cfg.consumers)
        .map(|_| log_normal.sample(rng).exp().clamp(lo as f64, hi as f64))
        .collect();

    // Rescale toward the target total, then fix the residual one by one.
    let total: f64 = raw.iter().sum();
    let scale = cfg.ratings as f64 / total;
    for v in raw.iter_mut() {
        *v = (*v * scale).clamp(lo as f64, hi as f64);
    }
    let mut counts: Vec<usize> = raw.iter().map(|v| v.round() as usize).collect();
    let mut diff = cfg.ratings as i64 - counts.iter().sum::<usize>() as i64;

    // Visit consumers largest-first when adding, and only those above the
    // floor when removing; cycle until the total is exact.
    let mut order: Vec<usize> = (0..cfg.consumers).collect();
    order.sort_by(|&a, &b| raw[b].partial_cmp(&raw[a]).unwrap().then(a.cmp(&b)));
    let mut cursor = 0;
    while diff != 0 {
        let j = order[cursor % order.len()];
        if diff > 0 && counts[j] < hi {
            counts[j] += 1;
            diff -= 1;
        } else if diff < 0 && counts[j] > lo {
            counts[j] -= 1;
            diff += 1;
        }
        cursor += 1;
    }
    counts
}

/// Weighted sample of `n` distinct items (exponential race keyed by weight).
fn sample_items(n: usize, weights: &[f64], rng: &mut ChaCha8Rng) -> Vec<u32> {
    let mut keyed: Vec<(f64, u32)> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (-u.ln() / w, i as u32)
        })
        .collect();
    let n = n.min(keyed.len());
    keyed.select_nth_unstable_by(n.saturating_sub(1), |a, b| a.0.total_cmp(&b.0));
    let mut items: Vec<u32> = keyed[..n].iter().map(|&(_, i)| i).collect();
    items.sort_unstable();
    items
}

/// Generates the ratings CSV as a string (header included).
pub fn generate(cfg: &SynthConfig) -> Result<String> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let normal = |sd: f64| Normal::new(0.0, sd).expect("valid sd");
    let quality_smear = normal(cfg.item_quality_sd);
    let bias_dist = normal(cfg.consumer_bias_sd);
    let latent_dist = normal(cfg.latent_coord_sd);
    let pop_dist = normal(cfg.pop_noise_sd);
    let noise_dist = normal(cfg.noise_sd);

    let item_quality: Vec<f64> = (0..cfg.items)
        .map(|_| {
            let tail = -cfg.item_quality_tail * rng.random::<f64>().max(f64::MIN_POSITIVE).ln();
            cfg.item_quality_cap - tail + quality_smear.sample(&mut rng)
        })
        .collect();
    // Item coordinates are Laplace so every consumer has a few niche gems
    // with outsized predicted appeal, like real catalogs.
    let laplace_b = cfg.latent_coord_sd / std::f64::consts::SQRT_2;
    let mut laplace = || {
        let a: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        let b: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        laplace_b * (a.ln() - b.ln())
    };
    let item_latent: Vec<f64> = (0..cfg.items * cfg.latent_dim).map(|_| laplace()).collect();
    let item_weight: Vec<f64> = item_quality
        .iter()
        .map(|&q| (cfg.pop_quality_coupling * q + pop_dist.sample(&mut rng)).exp())
        .collect();

    let consumer_bias: Vec<f64> = (0..cfg.consumers).map(|_| bias_dist.sample(&mut rng)).collect();
    let consumer_latent: Vec<f64> = (0..cfg.consumers * cfg.latent_dim)
        .map(|_| latent_dist.sample(&mut rng))
        .collect();

    let counts = sample_counts(cfg, &mut rng);
    let mut baskets: Vec<Vec<u32>> = counts
        .iter()
        .map(|&n| sample_items(n, &item_weight, &mut rng))
        .collect();

    // Coverage pass: move each unrated item into the basket of a large
    // consumer, evicting that consumer's most redundant item.
    let mut item_counts = vec![0u32; cfg.items];
    for basket in &baskets {
        for &i in basket {
            item_counts[i as usize] += 1;
        }
    }
    let mut donors: Vec<usize> = (0..cfg.consumers).collect();
    donors.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut donor_cursor = 0;
    for missing in 0..cfg.items as u32 {
        if item_counts[missing as usize] > 0 {
            continue;
        }
        let mut placed = false;
        for _ in 0..donors.len() {
            let j = donors[donor_cursor % donors.len()];
            donor_cursor += 1;
            let basket = &mut baskets[j];
            if basket.binary_search(&missing).is_ok() {
                continue;
            }
            // evict the basket item with the highest global count (> 1)
            let evict = basket
                .iter()
                .enumerate()
                .filter(|&(_, &i)| item_counts[i as usize] > 1)
                .max_by_key(|&(pos, &i)| (item_counts[i as usize], std::cmp::Reverse(pos)))
                .map(|(pos, _)| pos);
            if let Some(pos) = evict {
                item_counts[basket[pos] as usize] -= 1;
                basket.remove(pos);
                let at = basket.binary_search(&missing).unwrap_err();
                basket.insert(at, missing);
                item_counts[missing as usize] += 1;
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(SimError::Internal(format!(
                "could not place item {missing} while fixing coverage"
            )));
        }
    }

    let mut out = String::with_capacity(cfg.ratings * 26 + 32);
    out.push_str("userId,movieId,rating,timestamp\n");
    for (j, basket) in baskets.iter().enumerate() {
        let bias = consumer_bias[j];
        let u = &consumer_latent[j * cfg.latent_dim..(j + 1) * cfg.latent_dim];
        for (pos, &i) in basket.iter().enumerate() {
            let v = &item_latent[i as usize * cfg.latent_dim..(i as usize + 1) * cfg.latent_dim];
            let interaction: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let raw = cfg.global_mean
                + bias
                + item_quality[i as usize]
                + interaction
                + noise_dist.sample(&mut rng);
            let rating = ((raw * 2.0).round() / 2.0).clamp(0.5, 5.0);
            let ts = 900_000_000 + j as i64 * 7_919 + pos as i64 * 97;
            let _ = writeln!(
                out,
                "{},{},{},{}",
                j + 1,
                external_item_id(i as usize),
                rating,
                ts
            );
        }
    }
    Ok(out)
}

/// Generates and writes the dataset to `path`.
pub fn write_dataset(cfg: &SynthConfig, path: &Path) -> Result<()> {
    let csv = generate(cfg)?;
    std::fs::write(path, csv).map_err(|e| SimError::io(path, e))?;
    log::info!(
        "wrote stand-in dataset to {} ({} consumers, {} items, {} ratings, seed {})",
        path.display(),
        cfg.consumers,
        cfg.items,
        cfg.ratings,
        cfg.seed
    );
    Ok(())
}
