//! Nearest-neighbor algorithms for learning to rank under the Plackett-Luce
//! latent-space model.
//!
//! Agents and alternatives live in a box `[0, c]^d`. Each agent ranks
//! alternatives by a Plackett-Luce draw whose weights are the RBF utilities
//! `exp(-|x - y|)`. On top of that model this crate provides:
//!
//! * [`latent`]: populations, utilities and ground-truth pairwise probabilities.
//! * [`plackett_luce`]: ranking samplers (sequential and Gumbel-max) and exact
//!   order probabilities.
//! * [`rank_metrics`]: Kendall-tau distances, the pair-sampled NKT estimator,
//!   global feature matrices and the agent distance built from them.
//! * [`agent_knn`]: KT-kNN, Global-kNN and latent oracle neighbors, plus
//!   pairwise prediction by neighbor voting.
//! * [`alt_similarity`]: sign statistics, candidate sets and split-cluster
//!   filtering for alternative neighbors.
//! * [`theory`]: numerical checks of the bias of KT-kNN and of the distance
//!   bound shapes, backed by [`quadrature`].
//! * [`experiment`]: the reproducible synthetic experiment runner.
//!
//! All randomness flows from a `u64` seed through counter-derived substreams
//! (see [`rng`]), so every result is reproducible regardless of thread count.

pub mod agent_knn;
pub mod alt_similarity;
pub mod error;
pub mod experiment;
pub mod latent;
pub mod plackett_luce;
pub mod quadrature;
pub mod rank_metrics;
pub mod rng;
pub mod theory;

pub use agent_knn::{Method, NeighborSet, Selector};
pub use alt_similarity::{CandidateSet, HalfStat};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ExperimentReport, ReportRow};
pub use latent::{Distribution, LatentPoint, ModelConfig, Population};
pub use plackett_luce::{Ranking, Sampler};
pub use rank_metrics::{FeatureMatrix, FeatureVector, Pairing};
pub use theory::{Claim, ClaimStatus, CurveSample, Report};
