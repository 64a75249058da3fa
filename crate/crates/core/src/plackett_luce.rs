//! Plackett-Luce rankings: sampling (sequential choice and Gumbel-max), exact
//! order probabilities and restriction to observed subsets.

use std::io::{BufRead, Write};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution as _, Gumbel};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::latent::{euclidean, LatentPoint, ModelConfig, Population};
use crate::rng::{substream, StreamKind};

const UNRANKED: u32 = 0;

/// A strict total order over an observed subset of alternatives, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking {
    observed: Vec<u32>,
    order: Vec<u32>,
    // 1-based rank per alternative id, UNRANKED when not observed
    pos: Vec<u32>,
}

impl Ranking {
    /// Builds a ranking from a best-first order over a universe of
    /// `n_alternatives` ids. Duplicates (ties) are rejected.
    pub fn from_order(order: Vec<u32>, n_alternatives: usize) -> Result<Self> {
        if order.is_empty() {
            return Err(Error::EmptyAlternatives);
        }
        let mut pos = vec![UNRANKED; n_alternatives];
        for (r, &j) in order.iter().enumerate() {
            let slot = pos
                .get_mut(j as usize)
                .ok_or(Error::AlternativeOutOfRange(j as usize))?;
            if *slot != UNRANKED {
                return Err(Error::NotAPermutation(format!("alternative {j} appears twice")));
            }
            *slot = r as u32 + 1;
        }
        let mut observed = order.clone();
        observed.sort_unstable();
        Ok(Ranking { observed, order, pos })
    }

    /// Sorted ids of the ranked alternatives.
    pub fn observed(&self) -> &[u32] {
        &self.observed
    }

    /// Best-first order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Size of the alternative universe.
    pub fn n_alternatives(&self) -> usize {
        self.pos.len()
    }

    /// 1-based position of `j`, if observed.
    #[inline]
    pub fn rank_of(&self, j: usize) -> Option<usize> {
        match self.pos.get(j) {
            Some(&p) if p != UNRANKED => Some(p as usize),
            _ => None,
        }
    }

    #[inline]
    pub fn contains(&self, j: usize) -> bool {
        self.rank_of(j).is_some()
    }

    /// `Some(true)` when `a` is ranked above `b`, `None` unless both are observed.
    #[inline]
    pub fn prefers(&self, a: usize, b: usize) -> Option<bool> {
        Some(self.rank_of(a)? < self.rank_of(b)?)
    }

    pub(crate) fn positions(&self) -> &[u32] {
        &self.pos
    }

    pub fn is_full(&self) -> bool {
        self.order.len() == self.pos.len()
    }
}

/// How a Plackett-Luce ranking is drawn. Both produce the same distribution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Repeated utility-proportional choice among the remaining alternatives.
    Sequential,
    /// Sort by `ln u + G` with i.i.d. standard Gumbel `G`.
    #[default]
    GumbelMax,
}

/// Samples a full ranking of `alternatives` for the agent at `x`.
pub fn sample_ranking<R: Rng + ?Sized>(
    x: &LatentPoint,
    alternatives: &[LatentPoint],
    sampler: Sampler,
    rng: &mut R,
) -> Result<Ranking> {
    let subset: Vec<u32> = (0..alternatives.len() as u32).collect();
    sample_ranking_on(x, alternatives, &subset, sampler, rng)
}

/// Samples a ranking of the alternatives listed in `subset` only.
pub fn sample_ranking_on<R: Rng + ?Sized>(
    x: &LatentPoint,
    alternatives: &[LatentPoint],
    subset: &[u32],
    sampler: Sampler,
    rng: &mut R,
) -> Result<Ranking> {
    if subset.is_empty() {
        return Err(Error::EmptyAlternatives);
    }
    let mut dists = Vec::with_capacity(subset.len());
    for &j in subset {
        let y = alternatives
            .get(j as usize)
            .ok_or(Error::AlternativeOutOfRange(j as usize))?;
        if y.dim() != x.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                got: y.dim(),
            });
        }
        dists.push(euclidean(x.coords(), y.coords()));
    }
    let picks = match sampler {
        Sampler::Sequential => sequential_order(&dists, rng),
        Sampler::GumbelMax => gumbel_order(&dists, rng),
    };
    let order = picks.into_iter().map(|p| subset[p]).collect();
    Ranking::from_order(order, alternatives.len())
}

fn gumbel_order<R: Rng + ?Sized>(dists: &[f64], rng: &mut R) -> Vec<usize> {
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let mut keyed: Vec<(f64, usize)> = dists
        .iter()
        .enumerate()
        .map(|(p, d)| (gumbel.sample(rng) - d, p))
        .collect();
    keyed.sort_unstable_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, p)| p).collect()
}

/// Sequential choice using a Fenwick tree over the weights, O(m log m).
fn sequential_order<R: Rng + ?Sized>(dists: &[f64], rng: &mut R) -> Vec<usize> {
    let m = dists.len();
    // shift so the largest weight is 1 and nothing underflows needlessly
    let dmin = dists.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = dists.iter().map(|d| (dmin - d).exp()).collect();
    let mut tree = Fenwick::new(&weights);
    let mut alive = vec![true; m];
    let mut out = Vec::with_capacity(m);
    for remaining in (1..=m).rev() {
        let total = tree.total();
        let mut p = if remaining == 1 || total <= 0.0 {
            usize::MAX
        } else {
            tree.find(rng.random::<f64>() * total)
        };
        if p >= m || !alive[p] {
            // rounding drift in the tree; fall back to the next live slot
            p = (p.min(m - 1)..m).chain(0..m).find(|&q| alive[q]).expect("live slot");
        }
        alive[p] = false;
        tree.add(p, -weights[p]);
        out.push(p);
    }
    out
}

struct Fenwick {
    tree: Vec<f64>,
}

impl Fenwick {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let mut tree = vec![0.0; n + 1];
        for (i, &w) in weights.iter().enumerate() {
            tree[i + 1] += w;
            let parent = (i + 1) + ((i + 1) & (i + 1).wrapping_neg());
            if parent <= n {
                let carry = tree[i + 1];
                tree[parent] += carry;
            }
        }
        Fenwick { tree }
    }

    fn add(&mut self, i: usize, delta: f64) {
        let mut k = i + 1;
        while k < self.tree.len() {
            self.tree[k] += delta;
            k += k & k.wrapping_neg();
        }
    }

    fn total(&self) -> f64 {
        let mut k = self.tree.len() - 1;
        let mut s = 0.0;
        while k > 0 {
            s += self.tree[k];
            k -= k & k.wrapping_neg();
        }
        s
    }

    /// Smallest index whose inclusive prefix sum exceeds `target`.
    fn find(&self, mut target: f64) -> usize {
        let n = self.tree.len() - 1;
        let mut pos = 0;
        let mut step = n.next_power_of_two();
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= target {
                pos = next;
                target -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }
}

/// Probability of the complete best-first `order` (a permutation of the
/// alternative indices) under sequential Plackett-Luce choice.
pub fn exact_order_prob(x: &LatentPoint, alternatives: &[LatentPoint], order: &[usize]) -> Result<f64> {
    let m = alternatives.len();
    if m == 0 {
        return Err(Error::EmptyAlternatives);
    }
    if order.len() != m {
        return Err(Error::NotAPermutation(format!(
            "order has {} entries for {m} alternatives",
            order.len()
        )));
    }
    let mut seen = vec![false; m];
    for &j in order {
        if j >= m || std::mem::replace(&mut seen[j], true) {
            return Err(Error::NotAPermutation(format!("bad or repeated index {j}")));
        }
    }
    let mut utils = Vec::with_capacity(m);
    for &j in order {
        utils.push((-x.distance(&alternatives[j])?).exp());
    }
    let mut tail: f64 = utils.iter().sum();
    let mut prob = 1.0;
    for u in utils {
        prob *= u / tail;
        tail -= u;
    }
    Ok(prob)
}

/// All `m!` orders with their exact probabilities, lexicographic order.
/// Limited to `m <= 8`.
pub fn order_distribution(x: &LatentPoint, alternatives: &[LatentPoint]) -> Result<Vec<(Vec<usize>, f64)>> {
    let m = alternatives.len();
    if m > 8 {
        return Err(Error::TooManyAlternatives(m));
    }
    let mut perm: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    loop {
        out.push((perm.clone(), exact_order_prob(x, alternatives, &perm)?));
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// The ranking induced on `subset`; relative order is preserved.
pub fn restrict_ranking(r: &Ranking, subset: &[u32]) -> Result<Ranking> {
    if let Some(&j) = subset.iter().find(|&&j| !r.contains(j as usize)) {
        return Err(Error::NotObserved(j));
    }
    let mut order = subset.to_vec();
    order.sort_unstable_by_key(|&j| r.rank_of(j as usize));
    order.dedup();
    Ranking::from_order(order, r.n_alternatives())
}

/// Observed subset for agent `i`: all alternatives when `c_obs == 1`,
/// otherwise a uniform subset of size `floor(m / c_obs)`, independent
/// across agents.
pub fn observation_subset(cfg: &ModelConfig, agent: usize) -> Vec<u32> {
    let m = cfg.n_alternatives;
    let size = cfg.observed_per_agent();
    if size >= m {
        return (0..m as u32).collect();
    }
    let mut rng = substream(cfg.seed, StreamKind::Observation, agent as u64);
    let mut subset: Vec<u32> = index::sample(&mut rng, m, size)
        .into_iter()
        .map(|j| j as u32)
        .collect();
    subset.sort_unstable();
    subset
}

/// One ranking per agent, each from its own substream; parallel and
/// bit-identical to the serial computation.
pub fn sample_rankings(cfg: &ModelConfig, population: &Population, sampler: Sampler) -> Result<Vec<Ranking>> {
    population
        .agents
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let subset = observation_subset(cfg, i);
            let mut rng = substream(cfg.seed, StreamKind::Ranking, i as u64);
            sample_ranking_on(x, &population.alternatives, &subset, sampler, &mut rng)
        })
        .collect()
}

/// Writes rankings as CSV: a header line `n=..,m=..,seed=..`, then one row
/// per agent `agent_id,alt,alt,...` best first.
pub fn write_rankings_csv<W: Write>(mut w: W, rankings: &[Ranking], seed: u64) -> Result<()> {
    let m = rankings.first().map_or(0, Ranking::n_alternatives);
    writeln!(w, "n={},m={},seed={}", rankings.len(), m, seed)?;
    for (i, r) in rankings.iter().enumerate() {
        write!(w, "{i}")?;
        for j in r.order() {
            write!(w, ",{j}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads the format written by [`write_rankings_csv`]; returns rankings and seed.
pub fn read_rankings_csv<R: BufRead>(r: R) -> Result<(Vec<Ranking>, u64)> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("missing header".into()))??;
    let mut n = None;
    let mut m = None;
    let mut seed = None;
    for field in header.trim().split(',') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header field {field:?}")))?;
        let value: u64 = value
            .parse()
            .map_err(|_| Error::Parse(format!("bad header value {value:?}")))?;
        match key {
            "n" => n = Some(value as usize),
            "m" => m = Some(value as usize),
            "seed" => seed = Some(value),
            _ => return Err(Error::Parse(format!("unknown header key {key:?}"))),
        }
    }
    let (n, m, seed) = match (n, m, seed) {
        (Some(n), Some(m), Some(s)) => (n, m, s),
        _ => return Err(Error::Parse("header must name n, m and seed".into())),
    };
    let mut rankings = Vec::with_capacity(n);
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.trim().split(',');
        let id: usize = parse_field(fields.next())?;
        if id != rankings.len() {
            return Err(Error::Parse(format!("expected agent {}, found {id}", rankings.len())));
        }
        let order = fields.map(|f| parse_field(Some(f))).collect::<Result<Vec<u32>>>()?;
        rankings.push(Ranking::from_order(order, m)?);
    }
    if rankings.len() != n {
        return Err(Error::Parse(format!("header says {n} agents, found {}", rankings.len())));
    }
    Ok((rankings, seed))
}

fn parse_field<T: std::str::FromStr>(f: Option<&str>) -> Result<T> {
    let f = f.ok_or_else(|| Error::Parse("missing field".into()))?;
    f.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad field {f:?}")))
}
