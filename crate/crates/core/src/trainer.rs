//! Likelihood maximisation by asynchronous SGD with Adagrad step sizes.
//!
//! For an interaction with label `y` (1 positive, 0 negative) and prediction
//! `r = sigmoid(s)`, the negative log-likelihood term is
//! `-(y log r + (1 - y) log(1 - r))` and its derivative with respect to the
//! raw score `s` is `r - y`. Since `s = q_u . p_i + b_u + b_i` and `q_u`,
//! `p_i` are sums of feature embeddings, every user feature row receives
//! gradient `(r - y) p_i`, every item feature row `(r - y) q_u`, and every
//! feature bias `(r - y)`.
//!
//! Each scalar parameter keeps an Adagrad accumulator `G`, starting at 1.
//! A step applies `theta -= lr / sqrt(G) * grad` and then `G += grad^2`.
//!
//! With more than one thread, workers update the shared parameter tables
//! without locking (Hogwild); lost updates are tolerated.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{evaluate, Scorer};
use crate::interactions::{Interaction, InteractionSet, Label};
use crate::mapping::{FeatureMapping, Side};
use crate::model::{sigmoid, EntityRepresentations, ModelState};
use crate::shared::SharedF32s;

/// Each log term of the likelihood is floored at `ln(LOG_FLOOR)`.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs_max: usize,
    pub threads: usize,
    /// Consecutive non-improving epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs_max: 100,
            threads: 4,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning rate must be positive"));
        }
        if self.epochs_max == 0 || self.threads == 0 || self.patience == 0 {
            return Err(Error::validation(
                "epochs_max, threads and patience must all be at least 1",
            ));
        }
        Ok(())
    }
}

fn check_compatible(model: &ModelState, mapping: &FeatureMapping) -> Result<()> {
    for side in [Side::User, Side::Item] {
        if model.n_features(side) != mapping.n_features(side) {
            return Err(Error::validation(format!(
                "model has {} {side} features, mapping has {}",
                model.n_features(side),
                mapping.n_features(side)
            )));
        }
    }
    Ok(())
}

fn check_ids(mapping: &FeatureMapping, data: &InteractionSet) -> Result<()> {
    let (n_users, n_items) = (mapping.n_users(), mapping.n_items());
    for x in data {
        if x.user as usize >= n_users {
            return Err(Error::EntityIndex {
                side: Side::User,
                id: x.user as usize,
                len: n_users,
            });
        }
        if x.item as usize >= n_items {
            return Err(Error::EntityIndex {
                side: Side::Item,
                id: x.item as usize,
                len: n_items,
            });
        }
    }
    Ok(())
}

fn log_term(probability: f64, label: Label) -> f64 {
    let p = match label {
        Label::Positive => probability,
        Label::Negative => 1.0 - probability,
    };
    p.max(LOG_FLOOR).ln()
}

pub(crate) fn log_likelihood_from(reps: &EntityRepresentations, data: &InteractionSet) -> Result<f64> {
    data.iter().try_fold(0.0, |acc, x| {
        Ok(acc + log_term(sigmoid(reps.score(x.user, x.item)?), x.label))
    })
}

/// Log-likelihood of `data`: sum of `ln r` over positives and `ln(1 - r)`
/// over negatives.
pub fn log_likelihood(model: &ModelState, mapping: &FeatureMapping, data: &InteractionSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::validation("log-likelihood of an empty interaction set"));
    }
    check_compatible(model, mapping)?;
    check_ids(mapping, data)?;
    log_likelihood_from(&model.representations(mapping)?, data)
}

/// Gradient of the log-likelihood with respect to every parameter, laid out
/// like the model tables (row-major embeddings, one bias per feature).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub user_embeddings: Vec<f64>,
    pub user_biases: Vec<f64>,
    pub item_embeddings: Vec<f64>,
    pub item_biases: Vec<f64>,
}

/// Analytic gradient of [`log_likelihood`] (ignoring the floor).
pub fn log_likelihood_gradient(
    model: &ModelState,
    mapping: &FeatureMapping,
    data: &InteractionSet,
) -> Result<Gradient> {
    check_compatible(model, mapping)?;
    check_ids(mapping, data)?;
    let dim = model.dim();
    let n_uf = model.n_features(Side::User);
    let n_if = model.n_features(Side::Item);
    let mut grad = Gradient {
        user_embeddings: vec![0.0; n_uf * dim],
        user_biases: vec![0.0; n_uf],
        item_embeddings: vec![0.0; n_if * dim],
        item_biases: vec![0.0; n_if],
    };
    for x in data {
        let uf = mapping.user_features(x.user)?;
        let itf = mapping.item_features(x.item)?;
        let q = model.combine(Side::User, uf)?;
        let p = model.combine(Side::Item, itf)?;
        let r = sigmoid(q.dot(&p) + q.bias + p.bias);
        // d(log-likelihood)/d(score) = y - r
        let g = x.label.target() - r;
        for &f in uf {
            let f = f as usize;
            for k in 0..dim {
                grad.user_embeddings[f * dim + k] += g * p.latent[k];
            }
            grad.user_biases[f] += g;
        }
        for &f in itf {
            let f = f as usize;
            for k in 0..dim {
                grad.item_embeddings[f * dim + k] += g * q.latent[k];
            }
            grad.item_biases[f] += g;
        }
    }
    Ok(grad)
}

#[inline]
fn adagrad_update(values: &SharedF32s, accum: &SharedF32s, idx: usize, grad: f64, learning_rate: f64) {
    let g_sum = accum.get(idx) as f64;
    let value = values.get(idx) as f64 - learning_rate / g_sum.sqrt() * grad;
    values.set(idx, value as f32);
    accum.set(idx, (g_sum + grad * grad) as f32);
}

/// Per-thread scratch space for SGD steps on a shared model.
struct Worker<'a> {
    model: &'a ModelState,
    user_latent: Vec<f64>,
    item_latent: Vec<f64>,
    learning_rate: f64,
}

impl<'a> Worker<'a> {
    fn new(model: &'a ModelState, learning_rate: f64) -> Self {
        Worker {
            model,
            user_latent: vec![0.0; model.dim()],
            item_latent: vec![0.0; model.dim()],
            learning_rate,
        }
    }

    /// Feature indices must already be validated against the model.
    fn step(&mut self, user_features: &[u32], item_features: &[u32], label: Label) {
        let model = self.model;
        let user_bias = model.combine_unchecked(Side::User, user_features, &mut self.user_latent);
        let item_bias = model.combine_unchecked(Side::Item, item_features, &mut self.item_latent);
        let dot: f64 = self
            .user_latent
            .iter()
            .zip(&self.item_latent)
            .map(|(a, b)| a * b)
            .sum();
        let loss_grad = sigmoid(dot + user_bias + item_bias) - label.target();
        self.apply(user_features, item_features, loss_grad);
    }

    /// Applies one Adagrad update given `d(-log L)/d(score)`, using the
    /// representations currently held in the scratch buffers.
    fn apply(&self, user_features: &[u32], item_features: &[u32], loss_grad: f64) {
        let model = self.model;
        let dim = model.dim();
        let lr = self.learning_rate;
        for (side, features, other) in [
            (Side::User, user_features, &self.item_latent),
            (Side::Item, item_features, &self.user_latent),
        ] {
            let table = model.table(side);
            for &f in features {
                let start = f as usize * dim;
                for (k, &o) in other.iter().enumerate() {
                    adagrad_update(&table.embeddings, &table.embedding_accum, start + k, loss_grad * o, lr);
                }
                adagrad_update(&table.biases, &table.bias_accum, f as usize, loss_grad, lr);
            }
        }
    }
}

/// One Adagrad SGD update on a single interaction.
///
/// Takes `&ModelState`: parameters are updated in place through the
/// lock-free tables, so concurrent callers race by design.
pub fn sgd_step(
    model: &ModelState,
    mapping: &FeatureMapping,
    interaction: Interaction,
    config: &TrainConfig,
) -> Result<()> {
    check_compatible(model, mapping)?;
    let uf = mapping.user_features(interaction.user)?;
    let itf = mapping.item_features(interaction.item)?;
    model.check_features(Side::User, uf)?;
    model.check_features(Side::Item, itf)?;
    Worker::new(model, config.learning_rate).step(uf, itf, interaction.label);
    Ok(())
}

/// Visit order for one epoch: a permutation of `0..n` seeded by
/// `(seed, epoch)`.
pub fn epoch_order(seed: u64, epoch: u64, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

/// One pass over `data` in a shuffled order, then advances the epoch
/// counter. With `threads > 1` the order is cut into contiguous shards, one
/// per worker, and workers update the shared tables without locks.
pub fn train_epoch(
    model: &mut ModelState,
    mapping: &FeatureMapping,
    data: &InteractionSet,
    config: &TrainConfig,
) -> Result<()> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::validation("cannot train on an empty interaction set"));
    }
    check_compatible(model, mapping)?;
    check_ids(mapping, data)?;

    let order = epoch_order(config.seed, model.epoch, data.len());
    let interactions = data.as_slice();
    let shared: &ModelState = model;
    let run_shard = |shard: &[usize]| {
        let mut worker = Worker::new(shared, config.learning_rate);
        for &idx in shard {
            let x = interactions[idx];
            // ids were checked above and mapping lists are validated on insertion
            let uf = mapping.user_features(x.user).expect("checked id");
            let itf = mapping.item_features(x.item).expect("checked id");
            worker.step(uf, itf, x.label);
        }
    };

    if config.threads == 1 {
        run_shard(&order);
    } else {
        let shard_len = order.len().div_ceil(config.threads);
        std::thread::scope(|s| {
            for shard in order.chunks(shard_len) {
                s.spawn(|| run_shard(shard));
            }
        });
    }
    model.epoch += 1;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    /// Value of the model's epoch counter after the epoch.
    pub epoch: u64,
    pub log_likelihood: f64,
    pub validation_auc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose snapshot was kept.
    pub best_epoch: Option<u64>,
}

impl TrainingHistory {
    /// Tab-delimited `epoch loglik val_auc` table with a header row.
    pub fn write_table<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epoch\tloglik\tval_auc")?;
        for r in &self.epochs {
            writeln!(out, "{}\t{}\t{}", r.epoch, r.log_likelihood, r.validation_auc)?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best value; keep a snapshot.
    Improved,
    Continue,
    Stop,
}

/// Patience-based early stopping on a score that should increase.
#[derive(Clone, Debug)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<f64>,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn best(&self) -> Option<f64> {
        self.best
    }

    pub fn observe(&mut self, value: f64) -> StopDecision {
        match self.best {
            Some(best) if value <= best || value.is_nan() => {
                self.stale += 1;
                if self.stale >= self.patience {
                    StopDecision::Stop
                } else {
                    StopDecision::Continue
                }
            }
            _ => {
                self.best = Some(value);
                self.stale = 0;
                StopDecision::Improved
            }
        }
    }
}

/// Trains until validation AUC stops improving for `config.patience`
/// consecutive epochs or `config.epochs_max` epochs have run. On return
/// `model` holds the snapshot with the best validation AUC.
///
/// The stopping signal comes from a held-out slice of the training data,
/// never from the test set.
pub fn fit(
    model: &mut ModelState,
    mapping: &FeatureMapping,
    train: &InteractionSet,
    validation: &InteractionSet,
    config: &TrainConfig,
) -> Result<TrainingHistory> {
    config.validate()?;
    check_ids(mapping, validation)?;
    fit_with(model, mapping, train, config, |reps| reps.evaluate_on(validation))
}

/// `fit` with a caller-supplied validation metric, evaluated on the
/// representations after every epoch.
pub fn fit_with<F>(
    model: &mut ModelState,
    mapping: &FeatureMapping,
    train: &InteractionSet,
    config: &TrainConfig,
    mut validate: F,
) -> Result<TrainingHistory>
where
    F: FnMut(&EntityRepresentations) -> Result<f64>,
{
    config.validate()?;
    let mut history = TrainingHistory::default();
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = model.clone();

    for _ in 0..config.epochs_max {
        train_epoch(model, mapping, train, config)?;
        let reps = model.representations(mapping)?;
        let record = EpochRecord {
            epoch: model.epoch,
            log_likelihood: log_likelihood_from(&reps, train)?,
            validation_auc: validate(&reps)?,
        };
        history.epochs.push(record);
        log::debug!(
            "epoch {}: loglik {:.4} val_auc {:.4}",
            record.epoch,
            record.log_likelihood,
            record.validation_auc
        );
        match stopper.observe(record.validation_auc) {
            StopDecision::Improved => {
                best = model.clone();
                history.best_epoch = Some(record.epoch);
            }
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    *model = best;
    Ok(history)
}

impl EntityRepresentations {
    fn evaluate_on(&self, data: &InteractionSet) -> Result<f64> {
        evaluate(self as &dyn Scorer, data)
    }
}

/// Adds representations for previously unseen features. Existing parameters
/// are untouched; new rows get the standard initialisation and fresh
/// accumulators, so their first updates use the full base learning rate.
pub fn fold_in_features<S: AsRef<str>>(
    model: &mut ModelState,
    mapping: &mut FeatureMapping,
    names: &[S],
    side: Side,
    rng: &mut impl Rng,
) -> Result<()> {
    check_compatible(model, mapping)?;
    mapping.extend_features(side, names)?;
    model.append_features(side, names.len(), rng);
    Ok(())
}
