//! Synthetic experiment runner: prediction error against `k`, error by
//! query position, and neighbor distance across latent dimensions.
//!
//! Every agent serves once as the query. Its own ranking feeds the distance
//! computation of the methods that need one but never the vote. Queries run
//! in parallel and are reduced in `(method, k, query)` order, so the CSV
//! output is byte-identical across reruns and thread counts.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent_knn::{Method, QueryContext};
use crate::error::{Error, Result};
use crate::latent::{pairwise_prob, sample_population, ModelConfig, Population};
use crate::plackett_luce::{sample_rankings, Ranking, Sampler};
use crate::rank_metrics::feature_matrix;
use crate::rng::{substream, StreamKind};

/// Number of position bins used by [`run_error_vs_position`].
pub const POSITION_BINS: usize = 40;

fn default_pair_sample_size() -> usize {
    1000
}

fn default_fixed_k() -> usize {
    205
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub k_grid: Vec<usize>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_pair_sample_size")]
    pub pair_sample_size: usize,
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Excluded from the config hash.
    #[serde(default)]
    pub output_dir: PathBuf,
    pub replicate_seeds: Vec<u64>,
    /// Neighborhood size for the position and dimension runs.
    #[serde(default = "default_fixed_k")]
    pub fixed_k: usize,
    #[serde(default)]
    pub sampler: Sampler,
}

impl ExperimentConfig {
    /// Reduced-scale default: 300 agents, 1500 alternatives on `[0, 5]`,
    /// three seeds and five values of `k`.
    pub fn reduced() -> Self {
        Self {
            model: ModelConfig::uniform(300, 1500, 1, 5.0, 0),
            k_grid: vec![20, 80, 160, 240, 320],
            methods: default_methods(),
            pair_sample_size: default_pair_sample_size(),
            dims: vec![1, 2, 5, 10],
            output_dir: PathBuf::from("out"),
            replicate_seeds: vec![0, 1, 2],
            fixed_k: default_fixed_k(),
            sampler: Sampler::default(),
        }
    }

    /// Full-scale setting: 1200 agents, 6000 alternatives, `k` from 20 to 500.
    pub fn full() -> Self {
        Self {
            model: ModelConfig::uniform(1200, 6000, 1, 5.0, 0),
            k_grid: (0..25).map(|i| 20 + 20 * i).collect(),
            dims: (1..=10).collect(),
            replicate_seeds: vec![0],
            ..Self::reduced()
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.k_grid.is_empty() || self.k_grid.contains(&0) {
            return Err(Error::InvalidConfig("k_grid must hold positive integers".into()));
        }
        if self.k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("k_grid must be strictly ascending".into()));
        }
        if self.model.n_agents < 2 {
            return Err(Error::InsufficientAgents { need: 2, got: self.model.n_agents });
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        if self.pair_sample_size == 0 {
            return Err(Error::InvalidConfig("pair_sample_size must be positive".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::InvalidConfig("dims must be positive".into()));
        }
        if self.replicate_seeds.is_empty() {
            return Err(Error::InvalidConfig("replicate_seeds is empty".into()));
        }
        if self.fixed_k == 0 {
            return Err(Error::InvalidConfig("fixed_k must be positive".into()));
        }
        Ok(())
    }

    /// `k_grid` with every value capped at `n - 1`, deduplicated.
    pub fn effective_k_grid(&self) -> Vec<usize> {
        let cap = self.model.n_agents - 1;
        let mut ks: Vec<usize> = self.k_grid.iter().map(|&k| k.min(cap)).collect();
        ks.dedup();
        ks
    }

    pub fn effective_fixed_k(&self) -> usize {
        self.fixed_k.min(self.model.n_agents - 1)
    }

    /// First 16 hex digits of the SHA-256 of the JSON encoding, with
    /// `output_dir` cleared.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: Method,
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    /// Empty unless the row aggregates one query-position bin.
    pub query_bin: Option<usize>,
    pub error_mean: f64,
    pub error_stderr: f64,
    pub neighbor_dist_mean: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(config_hash: String) -> Self {
        Self { config_hash, rows: Vec::new() }
    }

    /// Appends `other`'s rows. Reports from different configs are refused.
    pub fn merge(&mut self, other: ExperimentReport) -> Result<()> {
        if other.config_hash != self.config_hash {
            return Err(Error::ConfigMismatch(self.config_hash.clone(), other.config_hash));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }

    /// Row with the smallest mean error for `method` and `seed`.
    pub fn best_row(&self, method: Method, seed: u64) -> Option<&ReportRow> {
        self.rows_for(method)
            .filter(|r| r.seed == seed)
            .min_by(|a, b| a.error_mean.total_cmp(&b.error_mean).then(a.k.cmp(&b.k)))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            out.serialize(row)?;
        }
        if self.rows.is_empty() {
            out.write_record([
                "method",
                "k",
                "dim",
                "seed",
                "query_bin",
                "error_mean",
                "error_stderr",
                "neighbor_dist_mean",
                "config_hash",
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads a report back; every row must carry the same hash.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let rows: Vec<ReportRow> = rdr.deserialize().collect::<std::result::Result<_, _>>()?;
        let hash = rows.first().map(|r| r.config_hash.clone()).unwrap_or_default();
        if let Some(bad) = rows.iter().find(|r| r.config_hash != hash) {
            return Err(Error::ConfigMismatch(hash, bad.config_hash.clone()));
        }
        Ok(Self { config_hash: hash, rows })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// One replicate's sampled world.
pub struct World {
    pub population: Population,
    pub rankings: Vec<Ranking>,
    pub features: crate::rank_metrics::FeatureMatrix,
}

impl World {
    pub fn sample(model: &ModelConfig, sampler: Sampler) -> Result<Self> {
        let population = sample_population(model)?;
        let rankings = sample_rankings(model, &population, sampler)?;
        let features = feature_matrix(&rankings, model.seed)?;
        Ok(Self { population, rankings, features })
    }

    pub fn context(&self) -> QueryContext<'_> {
        QueryContext {
            population: &self.population,
            rankings: &self.rankings,
            features: &self.features,
        }
    }
}

/// Alternative pairs `(a, b)` with `a != b` drawn for `query`. Shared by all
/// methods and neighborhood sizes.
pub fn sample_pairs(seed: u64, query: usize, n_alternatives: usize, count: usize) -> Vec<(usize, usize)> {
    let mut rng = substream(seed, StreamKind::PairSample, query as u64);
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n_alternatives);
            let mut b = rng.random_range(0..n_alternatives - 1);
            if b >= a {
                b += 1;
            }
            (a, b)
        })
        .collect()
}

/// Error and mean neighbor distance for one query at each `k` in `ks`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryCurve {
    pub errors: Vec<f64>,
    pub neighbor_dists: Vec<f64>,
}

/// Walks the query's neighbor order once, voting incrementally, and reads
/// off the error at every `k`. Neighbors that did not observe a pair abstain.
pub fn query_curve(
    ctx: &QueryContext<'_>,
    method: Method,
    query: usize,
    ks: &[usize],
    pairs: &[(usize, usize)],
) -> Result<QueryCurve> {
    let k_max = *ks.last().ok_or_else(|| Error::InvalidConfig("empty k grid".into()))?;
    let order = ctx.order(method, query)?;
    if order.len() < k_max {
        return Err(Error::InsufficientAgents { need: k_max + 1, got: ctx.n_agents() });
    }
    let agents = &ctx.population.agents;
    let alts = &ctx.population.alternatives;
    let xq = &agents[query];
    let truth: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| pairwise_prob(xq, &alts[a], &alts[b]))
        .collect::<Result<_>>()?;

    let mut wins = vec![0u32; pairs.len()];
    let mut usable = vec![0u32; pairs.len()];
    let mut dist_sum = 0.0;
    let mut next = 0;
    let mut curve = QueryCurve {
        errors: Vec::with_capacity(ks.len()),
        neighbor_dists: Vec::with_capacity(ks.len()),
    };
    for (t, &j) in order.iter().take(k_max).enumerate() {
        dist_sum += xq.distance(&agents[j])?;
        let r = &ctx.rankings[j];
        for (p, &(a, b)) in pairs.iter().enumerate() {
            if let Some(above) = r.prefers(a, b) {
                usable[p] += 1;
                wins[p] += above as u32;
            }
        }
        while next < ks.len() && ks[next] == t + 1 {
            let mut err = 0.0;
            for p in 0..pairs.len() {
                if usable[p] == 0 {
                    return Err(Error::NoUsableNeighbor(pairs[p].0, pairs[p].1));
                }
                err += (wins[p] as f64 / usable[p] as f64 - truth[p]).abs();
            }
            curve.errors.push(err / pairs.len() as f64);
            curve.neighbor_dists.push(dist_sum / (t + 1) as f64);
            next += 1;
        }
    }
    Ok(curve)
}

fn all_query_curves(world: &World, method: Method, ks: &[usize], seed: u64, pair_count: usize) -> Result<Vec<QueryCurve>> {
    let ctx = world.context();
    let m = world.population.alternatives.len();
    (0..ctx.n_agents())
        .into_par_iter()
        .map(|q| query_curve(&ctx, method, q, ks, &sample_pairs(seed, q, m, pair_count)))
        .collect()
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn replicate_model(cfg: &ExperimentConfig, seed: u64) -> ModelConfig {
    ModelConfig { seed, ..cfg.model.clone() }
}

/// Mean prediction error over all queries for each method and `k`.
pub fn run_error_vs_k(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let ks = cfg.effective_k_grid();
    let mut report = ExperimentReport::new(hash.clone());
    for &seed in &cfg.replicate_seeds {
        let model = replicate_model(cfg, seed);
        let world = World::sample(&model, cfg.sampler)?;
        for &method in &cfg.methods {
            let curves = all_query_curves(&world, method, &ks, seed, cfg.pair_sample_size)?;
            for (t, &k) in ks.iter().enumerate() {
                let errors: Vec<f64> = curves.iter().map(|c| c.errors[t]).collect();
                let dists: Vec<f64> = curves.iter().map(|c| c.neighbor_dists[t]).collect();
                let (error_mean, error_stderr) = mean_and_stderr(&errors);
                report.rows.push(ReportRow {
                    method,
                    k,
                    dim: model.dim,
                    seed,
                    query_bin: None,
                    error_mean,
                    error_stderr,
                    neighbor_dist_mean: mean_and_stderr(&dists).0,
                    config_hash: hash.clone(),
                });
            }
        }
    }
    Ok(report)
}

/// Bin of a one-dimensional position among [`POSITION_BINS`] equal bins of
/// `[0, box_size]`.
pub fn position_bin(x: f64, box_size: f64) -> usize {
    ((x / box_size * POSITION_BINS as f64).floor().max(0.0) as usize).min(POSITION_BINS - 1)
}

/// Error at `fixed_k` grouped by the query's latent position. Requires `d = 1`.
pub fn run_error_vs_position(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.model.dim != 1 {
        return Err(Error::InvalidConfig(format!(
            "position binning needs dim = 1, got {}",
            cfg.model.dim
        )));
    }
    let hash = cfg.hash();
    let k = cfg.effective_fixed_k();
    let mut report = ExperimentReport::new(hash.clone());
    for &seed in &cfg.replicate_seeds {
        let model = replicate_model(cfg, seed);
        let world = World::sample(&model, cfg.sampler)?;
        for &method in &cfg.methods {
            let curves = all_query_curves(&world, method, &[k], seed, cfg.pair_sample_size)?;
            let mut bins: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); POSITION_BINS];
            for (q, c) in curves.iter().enumerate() {
                let b = position_bin(world.population.agents[q].coords()[0], model.box_size);
                bins[b].0.push(c.errors[0]);
                bins[b].1.push(c.neighbor_dists[0]);
            }
            for (b, (errors, dists)) in bins.iter().enumerate() {
                if errors.is_empty() {
                    continue;
                }
                let (error_mean, error_stderr) = mean_and_stderr(errors);
                report.rows.push(ReportRow {
                    method,
                    k,
                    dim: 1,
                    seed,
                    query_bin: Some(b),
                    error_mean,
                    error_stderr,
                    neighbor_dist_mean: mean_and_stderr(dists).0,
                    config_hash: hash.clone(),
                });
            }
        }
    }
    Ok(report)
}

/// Mean latent distance to the `fixed_k` selected neighbors for every
/// dimension in `dims`, with the box side scaled to `box / sqrt(d)`.
pub fn run_dim_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.dims.is_empty() {
        return Err(Error::InvalidConfig("dims is empty".into()));
    }
    let hash = cfg.hash();
    let k = cfg.effective_fixed_k();
    let mut report = ExperimentReport::new(hash.clone());
    for &seed in &cfg.replicate_seeds {
        for &dim in &cfg.dims {
            let model = ModelConfig {
                dim,
                box_size: cfg.model.box_size / (dim as f64).sqrt(),
                ..replicate_model(cfg, seed)
            };
            let world = World::sample(&model, cfg.sampler)?;
            for &method in &cfg.methods {
                let curves = all_query_curves(&world, method, &[k], seed, cfg.pair_sample_size)?;
                let errors: Vec<f64> = curves.iter().map(|c| c.errors[0]).collect();
                let dists: Vec<f64> = curves.iter().map(|c| c.neighbor_dists[0]).collect();
                let (error_mean, error_stderr) = mean_and_stderr(&errors);
                report.rows.push(ReportRow {
                    method,
                    k,
                    dim,
                    seed,
                    query_bin: None,
                    error_mean,
                    error_stderr,
                    neighbor_dist_mean: mean_and_stderr(&dists).0,
                    config_hash: hash.clone(),
                });
            }
        }
    }
    Ok(report)
}

/// The three experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig1c,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig1a => "fig1a",
            Figure::Fig1b => "fig1b",
            Figure::Fig1c => "fig1c",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
        match self {
            Figure::Fig1a => run_error_vs_k(cfg),
            Figure::Fig1b => run_error_vs_position(cfg),
            Figure::Fig1c => run_dim_sweep(cfg),
        }
    }
}
