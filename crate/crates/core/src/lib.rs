//! Hybrid matrix factorisation for cold-start recommendation.
//!
//! Users and items are described by sets of features (indicators, tags,
//! words). Each feature owns a latent vector and a bias; an entity's
//! representation is the sum over its features, and the probability of a
//! positive interaction is the sigmoid of the user-item dot product plus
//! both biases. Because new items are represented through their metadata,
//! the model can score items that never appeared in training.
//!
//! Besides the model and its Hogwild/Adagrad trainer, the crate contains the
//! comparison baselines, dataset parsers, the warm/cold evaluation protocol
//! and similarity search over learned embeddings.

pub mod ann;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod interactions;
pub mod mapping;
pub mod model;
pub mod persist;
mod shared;
pub mod trainer;

pub use error::{Error, Result};
pub use interactions::{Interaction, InteractionSet, Label};
pub use mapping::{FeatureMapping, Side, Vocabulary};
pub use model::{sigmoid, EntityRepresentations, ModelState, Representation};
pub use persist::{load_model, load_model_file, save_model, save_model_file};
pub use trainer::{
    fit, fold_in_features, log_likelihood, sgd_step, train_epoch, TrainConfig, TrainingHistory,
};
