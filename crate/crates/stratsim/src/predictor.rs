//! Latent-factor rating model and the merged prediction matrix.
//!
//! The provider predicts unobserved ratings with biased matrix factorization
//! trained by stochastic gradient descent: score(c, i) = mean + b_c + b_i +
//! p_c . q_i, minimizing squared error with L2 regularization applied per
//! observation. Training is single-threaded and deterministic given the rng:
//! factors are initialized from N(0, init_sd), the record order is shuffled
//! once, and every epoch walks the same order.

use ndarray::ArrayView2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::RatingStore;
use crate::error::{Result, SimError};

/// Training hyperparameters. The latent dimension is 100 by default; the rest
/// are the usual defaults of this algorithm family.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub factors: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub regularization: f64,
    pub init_sd: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            factors: 100,
            epochs: 20,
            learning_rate: 0.005,
            regularization: 0.02,
            init_sd: 0.1,
        }
    }
}

/// Trained factor model. All parameters finite; raw scores are clamped to
/// [0,5] at query time.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    pub consumer_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub consumer_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub global_mean: f64,
    pub factors: usize,
    pub consumer_count: usize,
    pub item_count: usize,
}

impl FactorModel {
    fn consumer_row(&self, c: u32) -> &[f64] {
        let k = self.factors;
        &self.consumer_factors[c as usize * k..(c as usize + 1) * k]
    }

    fn item_row(&self, i: u32) -> &[f64] {
        let k = self.factors;
        &self.item_factors[i as usize * k..(i as usize + 1) * k]
    }

    /// Unclamped model score.
    pub fn score(&self, consumer: u32, item: u32) -> f64 {
        let dot: f64 = self
            .consumer_row(consumer)
            .iter()
            .zip(self.item_row(item))
            .map(|(p, q)| p * q)
            .sum();
        self.global_mean + self.consumer_bias[consumer as usize] + self.item_bias[item as usize] + dot
    }

    /// Score clamped to the rating scale.
    pub fn predict(&self, consumer: u32, item: u32) -> f64 {
        self.score(consumer, item).clamp(0.0, 5.0)
    }

    /// Plain-text dump of all parameters, for debugging.
    pub fn dump_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "factors {} consumers {} items {} global_mean {}",
            self.factors, self.consumer_count, self.item_count, self.global_mean
        );
        for (c, b) in self.consumer_bias.iter().enumerate() {
            let _ = writeln!(
                out,
                "consumer {c} bias {b} factors {:?}",
                self.consumer_row(c as u32)
            );
        }
        for (i, b) in self.item_bias.iter().enumerate() {
            let _ = writeln!(out, "item {i} bias {b} factors {:?}", self.item_row(i as u32));
        }
        out
    }
}

/// Trains the factor model on the current store.
pub fn train<R: Rng>(store: &RatingStore, cfg: &TrainConfig, rng: &mut R) -> Result<FactorModel> {
    if store.is_empty() {
        return Err(SimError::validation("cannot train on an empty rating store"));
    }
    let k = cfg.factors;
    let consumers = store.consumer_count();
    let items = store.item_count();
    let init = Normal::new(0.0, cfg.init_sd).expect("valid sd");

    let mut model = FactorModel {
        consumer_factors: (0..consumers * k).map(|_| init.sample(rng)).collect(),
        item_factors: (0..items * k).map(|_| init.sample(rng)).collect(),
        consumer_bias: vec![0.0; consumers],
        item_bias: vec![0.0; items],
        global_mean: store.records().iter().map(|r| r.rating as f64).sum::<f64>()
            / store.len() as f64,
        factors: k,
        consumer_count: consumers,
        item_count: items,
    };

    // One seeded shuffle; every epoch then walks the same order.
    let mut order: Vec<u32> = (0..store.len() as u32).collect();
    order.shuffle(rng);

    let lr = cfg.learning_rate;
    let reg = cfg.regularization;
    let records = store.records();
    for epoch in 0..cfg.epochs {
        for &idx in &order {
            let rec = &records[idx as usize];
            let c = rec.consumer as usize;
            let i = rec.item as usize;
            let p = &mut model.consumer_factors[c * k..(c + 1) * k];
            let q = &mut model.item_factors[i * k..(i + 1) * k];
            let dot: f64 = p.iter().zip(q.iter()).map(|(a, b)| a * b).sum();
            let err = rec.rating as f64
                - (model.global_mean + model.consumer_bias[c] + model.item_bias[i] + dot);
            model.consumer_bias[c] += lr * (err - reg * model.consumer_bias[c]);
            model.item_bias[i] += lr * (err - reg * model.item_bias[i]);
            for (pf, qf) in p.iter_mut().zip(q.iter_mut()) {
                let p_old = *pf;
                *pf += lr * (err * *qf - reg * p_old);
                *qf += lr * (err * p_old - reg * *qf);
            }
        }
        let finite = model.consumer_factors.iter().all(|v| v.is_finite())
            && model.item_factors.iter().all(|v| v.is_finite())
            && model.consumer_bias.iter().all(|v| v.is_finite())
            && model.item_bias.iter().all(|v| v.is_finite());
        if !finite {
            return Err(SimError::TrainingDiverged { epoch });
        }
    }
    Ok(model)
}

/// The regularized loss the SGD minimizes, with the L2 term applied per
/// observation: L = 1/2 * sum over observed (c,i) of
/// err^2 + reg * (|p_c|^2 + |q_i|^2 + b_c^2 + b_i^2).
pub fn regularized_loss(model: &FactorModel, store: &RatingStore, reg: f64) -> f64 {
    let mut loss = 0.0;
    for rec in store.records() {
        let err = rec.rating as f64 - model.score(rec.consumer, rec.item);
        let p = model.consumer_row(rec.consumer);
        let q = model.item_row(rec.item);
        let sq: f64 = p.iter().map(|v| v * v).sum::<f64>() + q.iter().map(|v| v * v).sum::<f64>();
        let b2 = model.consumer_bias[rec.consumer as usize].powi(2)
            + model.item_bias[rec.item as usize].powi(2);
        loss += 0.5 * (err * err + reg * (sq + b2));
    }
    loss
}

/// Gradient of [`regularized_loss`] with respect to every trained parameter
/// (the global mean is fixed at the data mean and not trained). This is the
/// batch sum of the per-sample gradients the SGD steps along.
pub struct LossGradient {
    pub consumer_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub consumer_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

pub fn loss_gradient(model: &FactorModel, store: &RatingStore, reg: f64) -> LossGradient {
    let k = model.factors;
    let mut grad = LossGradient {
        consumer_factors: vec![0.0; model.consumer_factors.len()],
        item_factors: vec![0.0; model.item_factors.len()],
        consumer_bias: vec![0.0; model.consumer_bias.len()],
        item_bias: vec![0.0; model.item_bias.len()],
    };
    for rec in store.records() {
        let c = rec.consumer as usize;
        let i = rec.item as usize;
        let err = rec.rating as f64 - model.score(rec.consumer, rec.item);
        grad.consumer_bias[c] += -err + reg * model.consumer_bias[c];
        grad.item_bias[i] += -err + reg * model.item_bias[i];
        let p = model.consumer_row(rec.consumer);
        let q = model.item_row(rec.item);
        for f in 0..k {
            grad.consumer_factors[c * k + f] += -err * q[f] + reg * p[f];
            grad.item_factors[i * k + f] += -err * p[f] + reg * q[f];
        }
    }
    grad
}

/// Dense consumer-by-item utility matrix: observed ratings where feedback
/// exists, clamped model scores everywhere else. Total, no missing entries.
#[derive(Debug, Clone)]
pub struct PredictionMatrix {
    values: Vec<f32>,
    consumer_count: usize,
    item_count: usize,
    pub trained_at: usize,
}

impl PredictionMatrix {
    /// Builds the merged matrix from a trained model and the store the model
    /// was trained on.
    pub fn build(model: &FactorModel, store: &RatingStore, trained_at: usize) -> Self {
        let consumers = model.consumer_count;
        let items = model.item_count;
        let k = model.factors;
        let mut values = vec![0f32; consumers * items];

        // Blocked P * Q^T keeps the f64 temporary small.
        let q = ArrayView2::from_shape((items, k), &model.item_factors).expect("shape");
        let qt = q.t();
        const BLOCK: usize = 64;
        let mut c0 = 0;
        while c0 < consumers {
            let c1 = (c0 + BLOCK).min(consumers);
            let p = ArrayView2::from_shape(
                (c1 - c0, k),
                &model.consumer_factors[c0 * k..c1 * k],
            )
            .expect("shape");
            let scores = p.dot(&qt);
            for c in c0..c1 {
                let bias_c = model.global_mean + model.consumer_bias[c];
                let row = &mut values[c * items..(c + 1) * items];
                for (i, out) in row.iter_mut().enumerate() {
                    let raw = bias_c + model.item_bias[i] + scores[(c - c0, i)];
                    *out = raw.clamp(0.0, 5.0) as f32;
                }
            }
            c0 = c1;
        }

        // Observed feedback wins over the model score.
        for rec in store.records() {
            values[rec.consumer as usize * items + rec.item as usize] = rec.rating;
        }

        PredictionMatrix {
            values,
            consumer_count: consumers,
            item_count: items,
            trained_at,
        }
    }

    /// Builds a matrix from explicit values (row-major consumer x item).
    pub fn from_values(
        values: Vec<f32>,
        consumer_count: usize,
        item_count: usize,
        trained_at: usize,
    ) -> crate::error::Result<Self> {
        if values.len() != consumer_count * item_count {
            return Err(SimError::validation(format!(
                "{} values for a {}x{} matrix",
                values.len(),
                consumer_count,
                item_count
            )));
        }
        if values.iter().any(|v| !v.is_finite() || !(0.0..=5.0).contains(v)) {
            return Err(SimError::validation("prediction values must be finite in [0,5]"));
        }
        Ok(PredictionMatrix {
            values,
            consumer_count,
            item_count,
            trained_at,
        })
    }

    pub fn consumer_count(&self) -> usize {
        self.consumer_count
    }

    pub fn item_count(&self) -> usize {
        self.item_count
    }

    pub fn value(&self, consumer: u32, item: u32) -> f32 {
        self.values[consumer as usize * self.item_count + item as usize]
    }

    pub fn row(&self, consumer: u32) -> &[f32] {
        let c = consumer as usize;
        &self.values[c * self.item_count..(c + 1) * self.item_count]
    }
}

/// True when a retrain is due at the end of `step` (the initial training at
/// setup is handled separately, so step 0 never retrains).
pub fn retrain_due(step: usize, period: usize) -> bool {
    step > 0 && step % period == 0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::RatingRecord;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_from(triples: &[(u32, u32, f32)]) -> RatingStore {
        let consumers = triples.iter().map(|t| t.0).max().unwrap() as usize + 1;
        let items = triples.iter().map(|t| t.1).max().unwrap() as usize + 1;
        RatingStore::from_records(
            consumers,
            items,
            triples.iter().map(|&(consumer, item, rating)| RatingRecord {
                consumer,
                item,
                rating,
                timestamp: 0,
            }),
        )
        .unwrap()
    }

    fn constant_store(value: f32) -> RatingStore {
        let mut triples = Vec::new();
        for c in 0..4u32 {
            for i in 0..4u32 {
                if (c + i) % 2 == 0 {
                    triples.push((c, i, value));
                }
            }
        }
        store_from(&triples)
    }

    #[test]
    fn constant_data_predicts_the_constant() {
        let store = constant_store(3.0);
        let cfg = TrainConfig {
            factors: 8,
            ..TrainConfig::default()
        };
        let model = train(&store, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for c in 0..4 {
            for i in 0..4 {
                let p = model.predict(c, i);
                assert!((p - 3.0).abs() < 0.05, "predict({c},{i}) = {p}");
            }
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let store = store_from(&[(0, 0, 4.0), (0, 1, 2.0), (1, 0, 3.5), (2, 2, 1.0)]);
        let cfg = TrainConfig {
            factors: 16,
            ..TrainConfig::default()
        };
        let a = train(&store, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = train(&store, &cfg, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_store_is_rejected() {
        let store = RatingStore::from_records(2, 2, []).unwrap();
        assert!(train(&store, &TrainConfig::default(), &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn divergence_names_the_epoch() {
        let store = store_from(&[(0, 0, 5.0), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 5.0)]);
        let cfg = TrainConfig {
            factors: 4,
            learning_rate: 50.0,
            ..TrainConfig::default()
        };
        match train(&store, &cfg, &mut ChaCha8Rng::seed_from_u64(2)) {
            Err(SimError::TrainingDiverged { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    fn degenerate_model(consumers: usize, items: usize, mean: f64) -> FactorModel {
        FactorModel {
            consumer_factors: vec![0.0; consumers * 2],
            item_factors: vec![0.0; items * 2],
            consumer_bias: vec![0.0; consumers],
            item_bias: vec![0.0; items],
            global_mean: mean,
            factors: 2,
            consumer_count: consumers,
            item_count: items,
        }
    }

    #[test]
    fn zero_model_predicts_global_mean_everywhere() {
        let model = degenerate_model(3, 5, 2.5);
        let store = RatingStore::from_records(3, 5, []).unwrap();
        let matrix = PredictionMatrix::build(&model, &store, 0);
        for c in 0..3 {
            for i in 0..5 {
                assert_eq!(matrix.value(c, i), 2.5);
            }
        }
    }

    #[test]
    fn scores_clamp_to_the_rating_scale() {
        let mut model = degenerate_model(1, 1, 2.5);
        model.item_bias[0] = 3.2; // raw score 5.7
        assert_eq!(model.predict(0, 0), 5.0);
        let store = RatingStore::from_records(1, 1, []).unwrap();
        let matrix = PredictionMatrix::build(&model, &store, 0);
        assert_eq!(matrix.value(0, 0), 5.0);
    }

    #[test]
    fn observed_ratings_win_over_model_scores() {
        let mut model = degenerate_model(2, 2, 2.5);
        model.item_bias[1] = 1.0;
        let store = store_from(&[(0, 1, 4.5)]);
        let matrix = PredictionMatrix::build(&model, &store, 0);
        assert_eq!(matrix.value(0, 1), 4.5);
        assert_eq!(matrix.value(1, 1), 3.5); // unobserved keeps the model score
    }

    #[test]
    fn merged_matrix_is_total_and_bounded() {
        let store = store_from(&[(0, 0, 4.0), (1, 2, 0.5), (2, 1, 5.0)]);
        let model = train(
            &store,
            &TrainConfig {
                factors: 4,
                ..TrainConfig::default()
            },
            &mut ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let matrix = PredictionMatrix::build(&model, &store, 0);
        for c in 0..3 {
            for i in 0..3 {
                let v = matrix.value(c, i);
                assert!(v.is_finite() && (0.0..=5.0).contains(&v));
            }
        }
        for rec in store.records() {
            assert_eq!(matrix.value(rec.consumer, rec.item), rec.rating);
        }
    }

    #[test]
    fn retrain_schedule() {
        assert!(retrain_due(100, 100));
        assert!(!retrain_due(0, 100));
        assert!(!retrain_due(250, 100));
        assert!(retrain_due(1000, 100));
    }

    #[test]
    fn gradient_matches_finite_differences_on_toy_store() {
        let store = store_from(&[(0, 0, 4.0), (0, 1, 2.5), (1, 1, 3.0), (2, 0, 1.0)]);
        let mut model = train(
            &store,
            &TrainConfig {
                factors: 3,
                epochs: 2,
                ..TrainConfig::default()
            },
            &mut ChaCha8Rng::seed_from_u64(5),
        )
        .unwrap();
        let reg = 0.02;
        let grad = loss_gradient(&model, &store, reg);
        let h = 1e-6;
        let mut check = |get: &mut dyn FnMut(&mut FactorModel) -> &mut f64, expected: f64| {
            let orig = *get(&mut model);
            *get(&mut model) = orig + h;
            let up = regularized_loss(&model, &store, reg);
            *get(&mut model) = orig - h;
            let down = regularized_loss(&model, &store, reg);
            *get(&mut model) = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = expected.abs().max(1e-8);
            assert!(
                ((fd - expected) / denom).abs() < 1e-4,
                "fd {fd} vs analytic {expected}"
            );
        };
        check(&mut |m| &mut m.consumer_bias[0], grad.consumer_bias[0]);
        check(&mut |m| &mut m.item_bias[1], grad.item_bias[1]);
        check(&mut |m| &mut m.consumer_factors[1], grad.consumer_factors[1]);
        check(&mut |m| &mut m.item_factors[4], grad.item_factors[4]);
    }
}
