//! Latent space, sampling distributions, the RBF utility and ground-truth
//! pairwise preference probabilities.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, StreamKind};

/// Position of an agent or alternative in `[0, c]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentPoint(Vec<f64>);

impl LatentPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        LatentPoint(coords)
    }

    /// Builds a point and checks it lies inside `[0, box_size]^d`.
    pub fn in_box(coords: Vec<f64>, box_size: f64) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidConfig("latent point needs d >= 1".into()));
        }
        if let Some(c) = coords.iter().find(|c| !(0.0..=box_size).contains(*c)) {
            return Err(Error::InvalidConfig(format!(
                "coordinate {c} outside [0, {box_size}]"
            )));
        }
        Ok(LatentPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &LatentPoint) -> Result<f64> {
        check_dims(self, other)?;
        Ok(euclidean(&self.0, &other.0))
    }
}

impl From<f64> for LatentPoint {
    fn from(x: f64) -> Self {
        LatentPoint(vec![x])
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_dims(a: &LatentPoint, b: &LatentPoint) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// RBF utility `exp(-|x - y|_2)`, in `(0, 1]`.
pub fn utility(x: &LatentPoint, y: &LatentPoint) -> Result<f64> {
    Ok((-x.distance(y)?).exp())
}

/// Probability that the agent at `x` ranks `y1` above `y2` under
/// Plackett-Luce: `u(x, y1) / (u(x, y1) + u(x, y2))`.
pub fn pairwise_prob(x: &LatentPoint, y1: &LatentPoint, y2: &LatentPoint) -> Result<f64> {
    check_dims(x, y1)?;
    check_dims(x, y2)?;
    Ok(pairwise_prob_from_distances(
        euclidean(&x.0, &y1.0),
        euclidean(&x.0, &y2.0),
    ))
}

/// Logistic form of the pairwise probability given the two latent distances.
#[inline]
pub fn pairwise_prob_from_distances(d1: f64, d2: f64) -> f64 {
    1.0 / (1.0 + (d1 - d2).exp())
}

/// One-dimensional shortcut used by the quadrature code.
#[inline]
pub fn pairwise_prob_1d(x: f64, y1: f64, y2: f64) -> f64 {
    pairwise_prob_from_distances((x - y1).abs(), (x - y2).abs())
}

/// Sampling distribution over `[0, c]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform on the whole box.
    Uniform,
    /// Uniform on the sub-box `[low, high]^d`.
    UniformOn { low: f64, high: f64 },
    /// Product of identical 1-D piecewise-constant densities on `bins` equal
    /// cells of `[0, c]`; cell weights rise linearly from 1 to `ratio`.
    NearUniform { ratio: f64, bins: usize },
}

impl Distribution {
    pub fn validate(&self, box_size: f64) -> Result<()> {
        match *self {
            Distribution::Uniform => Ok(()),
            Distribution::UniformOn { low, high } => {
                if !(0.0 <= low && low < high && high <= box_size) {
                    return Err(Error::InvalidDistribution(format!(
                        "support [{low}, {high}] is not inside [0, {box_size}]"
                    )));
                }
                Ok(())
            }
            Distribution::NearUniform { ratio, bins } => {
                if !ratio.is_finite() || ratio < 1.0 {
                    return Err(Error::InvalidDistribution(format!(
                        "density ratio must be a finite value >= 1, got {ratio}"
                    )));
                }
                if bins == 0 {
                    return Err(Error::InvalidDistribution("bins must be >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// `sup f / inf f` over the support, for a `dim`-dimensional product.
    pub fn density_ratio(&self, dim: usize) -> f64 {
        match *self {
            Distribution::Uniform | Distribution::UniformOn { .. } => 1.0,
            Distribution::NearUniform { ratio, bins } if bins > 1 => ratio.powi(dim as i32),
            Distribution::NearUniform { .. } => 1.0,
        }
    }

    fn sample_coord<R: Rng + ?Sized>(&self, box_size: f64, rng: &mut R) -> f64 {
        match *self {
            Distribution::Uniform => rng.random::<f64>() * box_size,
            Distribution::UniformOn { low, high } => low + rng.random::<f64>() * (high - low),
            Distribution::NearUniform { ratio, bins } => {
                let weight = |b: usize| {
                    if bins == 1 {
                        1.0
                    } else {
                        1.0 + (ratio - 1.0) * b as f64 / (bins - 1) as f64
                    }
                };
                let total: f64 = (0..bins).map(weight).sum();
                let mut target = rng.random::<f64>() * total;
                let mut cell = bins - 1;
                for b in 0..bins {
                    let w = weight(b);
                    if target < w {
                        cell = b;
                        break;
                    }
                    target -= w;
                }
                let width = box_size / bins as f64;
                (cell as f64 + rng.random::<f64>()) * width
            }
        }
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, dim: usize, box_size: f64, rng: &mut R) -> LatentPoint {
        LatentPoint((0..dim).map(|_| self.sample_coord(box_size, rng)).collect())
    }
}

fn default_c_obs() -> f64 {
    1.0
}

/// Everything needed to draw a population and its rankings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_agents: usize,
    pub n_alternatives: usize,
    pub dim: usize,
    #[serde(rename = "box")]
    pub box_size: f64,
    pub dist_x: Distribution,
    pub dist_y: Distribution,
    pub seed: u64,
    /// Each agent observes `floor(m / c_obs)` alternatives; 1 means full rankings.
    #[serde(default = "default_c_obs")]
    pub c_obs: f64,
}

impl ModelConfig {
    /// Uniform agents and alternatives on `[0, box_size]^dim`, full observation.
    pub fn uniform(n_agents: usize, n_alternatives: usize, dim: usize, box_size: f64, seed: u64) -> Self {
        ModelConfig {
            n_agents,
            n_alternatives,
            dim,
            box_size,
            dist_x: Distribution::Uniform,
            dist_y: Distribution::Uniform,
            seed,
            c_obs: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents == 0 || self.n_alternatives == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig(
                "n_agents, n_alternatives and dim must be positive".into(),
            ));
        }
        if !(self.box_size.is_finite() && self.box_size > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "box must be positive, got {}",
                self.box_size
            )));
        }
        if !(self.c_obs >= 1.0) {
            return Err(Error::InvalidConfig(format!("c_obs must be >= 1, got {}", self.c_obs)));
        }
        if self.observed_per_agent() < 2 {
            return Err(Error::InvalidConfig(
                "each agent must observe at least 2 alternatives".into(),
            ));
        }
        self.dist_x.validate(self.box_size)?;
        self.dist_y.validate(self.box_size)
    }

    /// `c_X`, the agent density ratio.
    pub fn c_x(&self) -> f64 {
        self.dist_x.density_ratio(self.dim)
    }

    /// `c_Y`, the alternative density ratio.
    pub fn c_y(&self) -> f64 {
        self.dist_y.density_ratio(self.dim)
    }

    pub fn observed_per_agent(&self) -> usize {
        (self.n_alternatives as f64 / self.c_obs).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub agents: Vec<LatentPoint>,
    pub alternatives: Vec<LatentPoint>,
}

impl Population {
    pub fn dim(&self) -> usize {
        self.agents
            .first()
            .or(self.alternatives.first())
            .map_or(0, LatentPoint::dim)
    }
}

/// Draws agents and alternatives i.i.d.; agent `i` uses substream
/// `(seed, Agent, i)` and alternative `j` uses `(seed, Alternative, j)`.
pub fn sample_population(cfg: &ModelConfig) -> Result<Population> {
    cfg.validate()?;
    let agents = (0..cfg.n_agents)
        .map(|i| {
            let mut rng = substream(cfg.seed, StreamKind::Agent, i as u64);
            cfg.dist_x.sample_point(cfg.dim, cfg.box_size, &mut rng)
        })
        .collect();
    let alternatives = (0..cfg.n_alternatives)
        .map(|j| {
            let mut rng = substream(cfg.seed, StreamKind::Alternative, j as u64);
            cfg.dist_y.sample_point(cfg.dim, cfg.box_size, &mut rng)
        })
        .collect();
    Ok(Population { agents, alternatives })
}
