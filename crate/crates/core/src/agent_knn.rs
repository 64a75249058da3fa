//! Agent neighbor algorithms: KT-kNN (raw Kendall-tau), Global-kNN (feature
//! distance) and the latent-space oracle, plus pairwise prediction by
//! neighbor voting.
//!
//! Ties in every distance are broken by ascending agent index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{euclidean, pairwise_prob, LatentPoint, Population};
use crate::plackett_luce::Ranking;
use crate::rank_metrics::{agent_distances_from, kendall_tau, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KtKnn,
    GlobalKnn,
    Oracle,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::KtKnn, Method::GlobalKnn, Method::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Method::KtKnn => "kt_knn",
            Method::GlobalKnn => "global_knn",
            Method::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kt_knn" | "kt-knn" | "kt" => Ok(Method::KtKnn),
            "global_knn" | "global-knn" | "global" => Ok(Method::GlobalKnn),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Selector {
    TopK { k: usize },
    Threshold { eps: f64 },
}

/// Result of a neighbor query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub query: usize,
    pub members: Vec<usize>,
    pub method: Method,
    pub selector: Selector,
}

/// Indices other than `query`, sorted by `(distance, index)`.
pub fn order_by_distance(dists: &[f64], query: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dists.len()).filter(|&j| j != query).collect();
    idx.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));
    idx
}

fn check_query(n: usize, query: usize, k: usize) -> Result<()> {
    if query >= n {
        return Err(Error::AgentOutOfRange(query));
    }
    if k == 0 || n < k + 1 {
        return Err(Error::InsufficientAgents { need: k + 1, got: n });
    }
    Ok(())
}

/// Raw Kendall-tau distances from the query's ranking to every ranking
/// (`u64::MAX` at the query itself).
pub fn kt_distances(rankings: &[Ranking], query: usize) -> Result<Vec<u64>> {
    let rq = rankings.get(query).ok_or(Error::AgentOutOfRange(query))?;
    rankings
        .par_iter()
        .enumerate()
        .map(|(j, rj)| if j == query { Ok(u64::MAX) } else { kendall_tau(rq, rj) })
        .collect()
}

/// Every other agent ordered by Kendall-tau distance to the query.
pub fn kt_order(rankings: &[Ranking], query: usize) -> Result<Vec<usize>> {
    let d = kt_distances(rankings, query)?;
    let mut idx: Vec<usize> = (0..rankings.len()).filter(|&j| j != query).collect();
    idx.sort_by_key(|&j| (d[j], j));
    Ok(idx)
}

/// The `k` agents with the smallest Kendall-tau distance to the query.
pub fn kt_knn(rankings: &[Ranking], query: usize, k: usize) -> Result<NeighborSet> {
    check_query(rankings.len(), query, k)?;
    let mut members = kt_order(rankings, query)?;
    members.truncate(k);
    Ok(NeighborSet {
        query,
        members,
        method: Method::KtKnn,
        selector: Selector::TopK { k },
    })
}

/// Every other agent ordered by feature distance to the query.
pub fn global_order(features: &FeatureMatrix, query: usize) -> Result<Vec<usize>> {
    let n = features.n_agents();
    if n < 3 {
        return Err(Error::InsufficientAgents { need: 3, got: n });
    }
    if query >= n {
        return Err(Error::AgentOutOfRange(query));
    }
    Ok(order_by_distance(&agent_distances_from(features, query), query))
}

/// Global-kNN: threshold form returns every agent with feature distance at
/// most `eps`; top-k form returns the `k` closest.
pub fn global_knn(features: &FeatureMatrix, query: usize, selector: Selector) -> Result<NeighborSet> {
    let n = features.n_agents();
    if n < 3 {
        return Err(Error::InsufficientAgents { need: 3, got: n });
    }
    let members = match selector {
        Selector::TopK { k } => {
            check_query(n, query, k)?;
            let mut order = global_order(features, query)?;
            order.truncate(k);
            order
        }
        Selector::Threshold { eps } => {
            if query >= n {
                return Err(Error::AgentOutOfRange(query));
            }
            let d = agent_distances_from(features, query);
            order_by_distance(&d, query)
                .into_iter()
                .take_while(|&j| d[j] <= eps)
                .collect()
        }
    };
    Ok(NeighborSet {
        query,
        members,
        method: Method::GlobalKnn,
        selector,
    })
}

/// Every other agent ordered by latent distance to the query.
pub fn oracle_order(agents: &[LatentPoint], query: usize) -> Result<Vec<usize>> {
    let xq = agents.get(query).ok_or(Error::AgentOutOfRange(query))?;
    let d: Vec<f64> = agents.iter().map(|x| euclidean(xq.coords(), x.coords())).collect();
    Ok(order_by_distance(&d, query))
}

/// The `k` agents closest to the query in latent space (simulation only).
pub fn oracle_knn(population: &Population, query: usize, k: usize) -> Result<NeighborSet> {
    check_query(population.agents.len(), query, k)?;
    let mut members = oracle_order(&population.agents, query)?;
    members.truncate(k);
    Ok(NeighborSet {
        query,
        members,
        method: Method::Oracle,
        selector: Selector::TopK { k },
    })
}

/// Fraction of neighbors ranking `a` above `b`, over neighbors that rank both.
pub fn predict_pair(neighbors: &NeighborSet, rankings: &[Ranking], a: usize, b: usize) -> Result<f64> {
    let mut usable = 0usize;
    let mut wins = 0usize;
    for &j in &neighbors.members {
        let r = rankings.get(j).ok_or(Error::AgentOutOfRange(j))?;
        if let Some(above) = r.prefers(a, b) {
            usable += 1;
            wins += above as usize;
        }
    }
    if usable == 0 {
        return Err(Error::NoUsableNeighbor(a, b));
    }
    Ok(wins as f64 / usable as f64)
}

/// Inputs shared by every method when answering queries.
#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub population: &'a Population,
    pub rankings: &'a [Ranking],
    pub features: &'a FeatureMatrix,
}

impl QueryContext<'_> {
    pub fn n_agents(&self) -> usize {
        self.population.agents.len()
    }

    /// Full neighbor order of `query` under `method`.
    pub fn order(&self, method: Method, query: usize) -> Result<Vec<usize>> {
        match method {
            Method::KtKnn => kt_order(self.rankings, query),
            Method::GlobalKnn => global_order(self.features, query),
            Method::Oracle => oracle_order(&self.population.agents, query),
        }
    }

    pub fn neighbors(&self, method: Method, query: usize, k: usize) -> Result<NeighborSet> {
        match method {
            Method::KtKnn => kt_knn(self.rankings, query, k),
            Method::GlobalKnn => global_knn(self.features, query, Selector::TopK { k }),
            Method::Oracle => oracle_knn(self.population, query, k),
        }
    }
}

/// Mean over `pairs` of `|vote - p_query(a, b)|`, where the vote comes from
/// the query's `k` nearest neighbors under `method`.
pub fn prediction_error(
    ctx: &QueryContext<'_>,
    method: Method,
    query: usize,
    k: usize,
    pairs: &[(usize, usize)],
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("pair sample is empty".into()));
    }
    let neighbors = ctx.neighbors(method, query, k)?;
    let xq = &ctx.population.agents[query];
    let alts = &ctx.population.alternatives;
    let mut total = 0.0;
    for &(a, b) in pairs {
        let (ya, yb) = (
            alts.get(a).ok_or(Error::AlternativeOutOfRange(a))?,
            alts.get(b).ok_or(Error::AlternativeOutOfRange(b))?,
        );
        let vote = predict_pair(&neighbors, ctx.rankings, a, b)?;
        total += (vote - pairwise_prob(xq, ya, yb)?).abs();
    }
    Ok(total / pairs.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{sample_population, ModelConfig};
    use crate::plackett_luce::{sample_rankings, Sampler};
    use crate::rank_metrics::feature_matrix;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Population {
        Population {
            agents: xs.iter().map(|&x| LatentPoint::from(x)).collect(),
            alternatives: vec![LatentPoint::from(0.0), LatentPoint::from(1.0)],
        }
    }

    #[test]
    fn oracle_all_agents() {
        let pop = line(&[0.1, 0.5, 0.3, 0.9]);
        let set = oracle_knn(&pop, 1, 3).unwrap();
        let mut m = set.members.clone();
        m.sort();
        assert_eq!(m, vec![0, 2, 3]);
        assert!(matches!(oracle_knn(&pop, 1, 4), Err(Error::InsufficientAgents { .. })));
    }

    #[test]
    fn oracle_window_in_one_dimension() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let pop = line(&xs);
        let set = oracle_knn(&pop, 7, 6).unwrap();
        let mut m = set.members.clone();
        m.sort();
        // contiguous around 7, excluding it; ties at equal spacing go to the lower index
        assert_eq!(m, vec![4, 5, 6, 8, 9, 10]);
    }

    #[test]
    fn oracle_matches_brute_force() {
        let cfg = ModelConfig::uniform(60, 2, 3, 1.0, 21);
        let pop = sample_population(&cfg).unwrap();
        for q in [0, 17, 59] {
            let set = oracle_knn(&pop, q, 10).unwrap();
            let mut brute: Vec<(f64, usize)> = (0..60)
                .filter(|&j| j != q)
                .map(|j| (pop.agents[q].distance(&pop.agents[j]).unwrap(), j))
                .collect();
            brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let expect: Vec<usize> = brute.iter().take(10).map(|p| p.1).collect();
            assert_eq!(set.members, expect);
        }
    }

    #[test]
    fn prediction_votes() {
        let rankings = vec![
            Ranking::from_order(vec![0, 1], 2).unwrap(),
            Ranking::from_order(vec![0, 1], 2).unwrap(),
            Ranking::from_order(vec![1, 0], 2).unwrap(),
            Ranking::from_order(vec![1, 0], 2).unwrap(),
        ];
        let set = |members: Vec<usize>| NeighborSet {
            query: 9,
            members,
            method: Method::Oracle,
            selector: Selector::TopK { k: 2 },
        };
        assert_eq!(predict_pair(&set(vec![0, 1]), &rankings, 0, 1).unwrap(), 1.0);
        assert_eq!(predict_pair(&set(vec![0, 1, 2, 3]), &rankings, 0, 1).unwrap(), 0.5);
        let partial = vec![Ranking::from_order(vec![1], 2).unwrap()];
        assert!(matches!(predict_pair(&set(vec![0]), &partial, 0, 1), Err(Error::NoUsableNeighbor(0, 1))));
    }

    fn small_world(seed: u64) -> (Population, Vec<Ranking>, FeatureMatrix) {
        let cfg = ModelConfig::uniform(40, 120, 1, 1.0, seed);
        let pop = sample_population(&cfg).unwrap();
        let rankings = sample_rankings(&cfg, &pop, Sampler::GumbelMax).unwrap();
        let f = feature_matrix(&rankings, seed).unwrap();
        (pop, rankings, f)
    }

    #[test]
    fn global_threshold_covers_everything_for_large_eps() {
        let (_, _, f) = small_world(3);
        let set = global_knn(&f, 5, Selector::Threshold { eps: 1.0 }).unwrap();
        assert_eq!(set.members.len(), 39);
        assert!(!set.members.contains(&5));
    }

    #[test]
    fn threshold_grows_with_eps() {
        let (_, _, f) = small_world(4);
        let mut prev = 0;
        for eps in [0.0, 0.01, 0.02, 0.03, 0.05, 0.1, 1.0] {
            let size = global_knn(&f, 0, Selector::Threshold { eps }).unwrap().members.len();
            assert!(size >= prev);
            prev = size;
        }
    }

    #[test]
    fn top_k_sets_nest() {
        let (pop, rankings, f) = small_world(5);
        let ctx = QueryContext { population: &pop, rankings: &rankings, features: &f };
        for method in Method::ALL {
            for k in 1..39 {
                let small = ctx.neighbors(method, 3, k).unwrap();
                let big = ctx.neighbors(method, 3, k + 1).unwrap();
                assert_eq!(small.members.len(), k);
                assert!(small.members.iter().all(|j| big.members.contains(j)), "{method} {k}");
                assert!(!big.members.contains(&3));
            }
        }
    }

    #[test]
    fn relabeling_is_equivariant() {
        let (pop, rankings, f) = small_world(6);
        let n = pop.agents.len();
        // reverse the agent labels
        let map = |i: usize| n - 1 - i;
        let pop2 = Population {
            agents: (0..n).map(|i| pop.agents[map(i)].clone()).collect(),
            alternatives: pop.alternatives.clone(),
        };
        let rankings2: Vec<Ranking> = (0..n).map(|i| rankings[map(i)].clone()).collect();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                v[i * n + j] = f.get(map(i), map(j));
            }
        }
        let f2 = FeatureMatrix::from_rows(n, v).unwrap();
        let ctx = QueryContext { population: &pop, rankings: &rankings, features: &f };
        let ctx2 = QueryContext { population: &pop2, rankings: &rankings2, features: &f2 };
        for method in Method::ALL {
            let a = ctx.order(method, 10).unwrap();
            let b: Vec<usize> = ctx2.order(method, map(10)).unwrap().into_iter().map(map).collect();
            // equal up to reordering among exact ties
            let mut sa = a.clone();
            let mut sb = b.clone();
            sa.sort();
            sb.sort();
            assert_eq!(sa, sb);
            assert_eq!(a.len(), n - 1);
        }
        let ta = threshold_set(&f, 10, 0.05);
        let tb: Vec<usize> = threshold_set(&f2, map(10), 0.05).into_iter().map(map).collect();
        let mut tb = tb;
        tb.sort();
        assert_eq!(ta, tb);
    }

    fn threshold_set(f: &FeatureMatrix, q: usize, eps: f64) -> Vec<usize> {
        let mut m = global_knn(f, q, Selector::Threshold { eps }).unwrap().members;
        m.sort();
        m
    }

    #[test]
    fn prediction_error_bounds() {
        let (pop, rankings, f) = small_world(7);
        let ctx = QueryContext { population: &pop, rankings: &rankings, features: &f };
        let pairs: Vec<(usize, usize)> = (0..60).map(|a| (a, a + 60)).collect();
        for method in Method::ALL {
            let e = prediction_error(&ctx, method, 2, 10, &pairs).unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
        assert!(prediction_error(&ctx, Method::Oracle, 2, 10, &[]).is_err());
    }

    #[test]
    fn neighbor_set_json() {
        let set = NeighborSet {
            query: 1,
            members: vec![3, 2],
            method: Method::GlobalKnn,
            selector: Selector::Threshold { eps: 0.25 },
        };
        let text = serde_json::to_string(&set).unwrap();
        assert_eq!(
            text,
            r#"{"query":1,"members":[3,2],"method":"global_knn","selector":{"mode":"threshold","eps":0.25}}"#
        );
        assert_eq!(serde_json::from_str::<NeighborSet>(&text).unwrap(), set);
    }

    proptest! {
        #[test]
        fn order_by_distance_sorted(d in proptest::collection::vec(0.0..1.0f64, 2..40), q in 0usize..40) {
            let q = q % d.len();
            let order = order_by_distance(&d, q);
            prop_assert_eq!(order.len(), d.len() - 1);
            prop_assert!(!order.contains(&q));
            for w in order.windows(2) {
                prop_assert!(d[w[0]] < d[w[1]] || (d[w[0]] == d[w[1]] && w[0] < w[1]));
            }
        }
    }
}
