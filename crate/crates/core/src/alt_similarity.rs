//! Alternative neighbors from local statistics only.
//!
//! Step one keeps every alternative whose sign statistic against the query
//! is small. In one dimension that set also contains the mirror cluster
//! around `1 - y`, so step two splits candidates by how often they land in
//! the same half of an agent's ranking as the query, using an exact
//! two-cluster 1-D k-means.
//!
//! The split-cluster step is only meaningful for `d = 1`; for higher
//! dimensions treat [`candidate_set`] as experimental and skip filtering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plackett_luce::Ranking;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query: usize,
    pub members: Vec<usize>,
    pub ell: f64,
}

/// Fraction of agents placing both alternatives in the same half of their
/// ranking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfStat {
    pub value: f64,
}

fn n_alternatives(rankings: &[Ranking]) -> Result<usize> {
    rankings
        .first()
        .map(Ranking::n_alternatives)
        .ok_or(Error::InsufficientAgents { need: 1, got: 0 })
}

fn check_alt(m: usize, a: usize) -> Result<()> {
    if a >= m {
        return Err(Error::AlternativeOutOfRange(a));
    }
    Ok(())
}

/// `|mean_k s_k|` with `s_k = +1` when agent `k` ranks `a` below `b` and
/// `-1` otherwise, over agents ranking both.
pub fn sign_distance(rankings: &[Ranking], a: usize, b: usize) -> Result<f64> {
    let m = n_alternatives(rankings)?;
    check_alt(m, a)?;
    check_alt(m, b)?;
    if a == b {
        return Err(Error::SelfPair(a));
    }
    let mut count = 0i64;
    let mut sum = 0i64;
    for r in rankings {
        if let Some(above) = r.prefers(a, b) {
            count += 1;
            sum += if above { -1 } else { 1 };
        }
    }
    if count == 0 {
        return Err(Error::NoCommonRaters(a, b));
    }
    Ok((sum as f64 / count as f64).abs())
}

/// Sign distances from `a` to every alternative in one pass over agents.
/// Entry `a` is 0 by convention; alternatives never co-ranked with `a` are `None`.
pub fn sign_distances_from(rankings: &[Ranking], a: usize) -> Result<Vec<Option<f64>>> {
    let m = n_alternatives(rankings)?;
    check_alt(m, a)?;
    let mut sum = vec![0i64; m];
    let mut count = vec![0i64; m];
    for r in rankings {
        let Some(pa) = r.rank_of(a) else { continue };
        for (p, &b) in r.order().iter().enumerate() {
            let b = b as usize;
            count[b] += 1;
            sum[b] += if pa > p + 1 { 1 } else { -1 };
        }
    }
    Ok((0..m)
        .map(|b| {
            if b == a {
                Some(0.0)
            } else if count[b] == 0 {
                None
            } else {
                Some((sum[b] as f64 / count[b] as f64).abs())
            }
        })
        .collect())
}

/// `{b : sign_distance(a, b) <= 1/ell}`, always containing `a` itself.
pub fn candidate_set(rankings: &[Ranking], a: usize, ell: f64) -> Result<CandidateSet> {
    if !(ell >= 1.0) {
        return Err(Error::InvalidConfig(format!("ell must be >= 1, got {ell}")));
    }
    let dists = sign_distances_from(rankings, a)?;
    let threshold = 1.0 / ell;
    let mut members = Vec::new();
    for (b, d) in dists.into_iter().enumerate() {
        match d {
            Some(d) if d <= threshold => members.push(b),
            Some(_) => {}
            None => return Err(Error::NoCommonRaters(a, b)),
        }
    }
    Ok(CandidateSet { query: a, members, ell })
}

#[inline]
fn in_first_half(rank: usize, len: usize) -> bool {
    rank <= len.div_ceil(2)
}

/// Same-half frequency of `a` and `b` over agents ranking both.
pub fn half_stat(rankings: &[Ranking], a: usize, b: usize) -> Result<HalfStat> {
    Ok(half_stats(rankings, a, &[b])?[0])
}

fn half_stats(rankings: &[Ranking], a: usize, others: &[usize]) -> Result<Vec<HalfStat>> {
    let m = n_alternatives(rankings)?;
    check_alt(m, a)?;
    for &b in others {
        check_alt(m, b)?;
    }
    let mut same = vec![0usize; others.len()];
    let mut count = vec![0usize; others.len()];
    for r in rankings {
        let Some(pa) = r.rank_of(a) else { continue };
        let ha = in_first_half(pa, r.len());
        for (slot, &b) in others.iter().enumerate() {
            if let Some(pb) = r.rank_of(b) {
                count[slot] += 1;
                same[slot] += (in_first_half(pb, r.len()) == ha) as usize;
            }
        }
    }
    others
        .iter()
        .enumerate()
        .map(|(slot, &b)| {
            if count[slot] == 0 {
                Err(Error::NoCommonRaters(a, b))
            } else {
                Ok(HalfStat {
                    value: same[slot] as f64 / count[slot] as f64,
                })
            }
        })
        .collect()
}

/// Optimal two-cluster partition of 1-D values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoMeans {
    /// Values `>= threshold` form the high cluster. `None` when the values
    /// cannot be split (fewer than two distinct values).
    pub threshold: Option<f64>,
    pub low_centroid: f64,
    pub high_centroid: f64,
    pub sse: f64,
}

/// Exact 2-means on a line: sort, then try every split between distinct
/// neighbors using prefix sums. Ties resolve to the leftmost split.
pub fn two_means_1d(values: &[f64]) -> TwoMeans {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mean_all = if n == 0 { 0.0 } else { v.iter().sum::<f64>() / n as f64 };
    let sse_all: f64 = v.iter().map(|x| (x - mean_all).powi(2)).sum();
    let mut best = TwoMeans {
        threshold: None,
        low_centroid: mean_all,
        high_centroid: mean_all,
        sse: sse_all,
    };
    let mut prefix = Vec::with_capacity(n + 1);
    let mut prefix_sq = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    prefix_sq.push(0.0);
    for x in &v {
        prefix.push(prefix.last().unwrap() + x);
        prefix_sq.push(prefix_sq.last().unwrap() + x * x);
    }
    let seg = |i: usize, j: usize| {
        let cnt = (j - i) as f64;
        let s = prefix[j] - prefix[i];
        let s2 = prefix_sq[j] - prefix_sq[i];
        ((s2 - s * s / cnt).max(0.0), s / cnt)
    };
    let mut best_sse = f64::INFINITY;
    for split in 1..n {
        if v[split - 1] == v[split] {
            continue;
        }
        let (lo_sse, lo_mean) = seg(0, split);
        let (hi_sse, hi_mean) = seg(split, n);
        let sse = lo_sse + hi_sse;
        if sse < best_sse {
            best_sse = sse;
            best = TwoMeans {
                threshold: Some(0.5 * (v[split - 1] + v[split])),
                low_centroid: lo_mean,
                high_centroid: hi_mean,
                sse,
            };
        }
    }
    best
}

/// Everything the split-cluster step computed, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub query: usize,
    /// `(candidate, half statistic)` for every candidate other than the query.
    pub half_stats: Vec<(usize, f64)>,
    pub clusters: TwoMeans,
    /// Centroid gap below which the two clusters are treated as one.
    pub merge_threshold: f64,
    pub merged: bool,
    /// Query plus the high-centroid cluster (or all candidates when merged), sorted.
    pub kept: Vec<usize>,
}

/// Keeps the candidates co-located with the query: 2-means over half
/// statistics, retaining the cluster with the larger centroid. When the
/// centroid gap is under `2 / sqrt(n)` every candidate is kept.
pub fn split_cluster(rankings: &[Ranking], a: usize, candidates: &CandidateSet) -> Result<SplitOutcome> {
    if candidates.members.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let others: Vec<usize> = candidates.members.iter().copied().filter(|&b| b != a).collect();
    let stats = half_stats(rankings, a, &others)?;
    let values: Vec<f64> = stats.iter().map(|h| h.value).collect();
    let clusters = two_means_1d(&values);
    let merge_threshold = 2.0 / (rankings.len() as f64).sqrt();
    let merged = match clusters.threshold {
        None => true,
        Some(_) => clusters.high_centroid - clusters.low_centroid < merge_threshold,
    };
    let mut kept: Vec<usize> = match (merged, clusters.threshold) {
        (false, Some(t)) => others
            .iter()
            .zip(&values)
            .filter(|(_, &v)| v >= t)
            .map(|(&b, _)| b)
            .collect(),
        _ => others.clone(),
    };
    kept.push(a);
    kept.sort_unstable();
    kept.dedup();
    Ok(SplitOutcome {
        query: a,
        half_stats: others.into_iter().zip(values).collect(),
        clusters,
        merge_threshold,
        merged,
        kept,
    })
}

/// Candidate construction followed by split-cluster filtering.
pub fn alt_neighbors(rankings: &[Ranking], a: usize, ell: f64) -> Result<Vec<usize>> {
    let candidates = candidate_set(rankings, a, ell)?;
    Ok(split_cluster(rankings, a, &candidates)?.kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(order: &[u32]) -> Ranking {
        Ranking::from_order(order.to_vec(), 4).unwrap()
    }

    #[test]
    fn sign_distance_basics() {
        let rs = vec![r(&[0, 1, 2, 3]), r(&[1, 0, 2, 3]), r(&[0, 2, 1, 3])];
        // a=0 above b=1 twice, below once -> |(-1 -1 +1)/3|
        assert!((sign_distance(&rs, 0, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sign_distance(&rs, 0, 1).unwrap(), sign_distance(&rs, 1, 0).unwrap());
        assert_eq!(sign_distance(&rs, 0, 3).unwrap(), 1.0);
        assert!(matches!(sign_distance(&rs, 2, 2), Err(Error::SelfPair(2))));
        let partial = vec![Ranking::from_order(vec![0, 1], 4).unwrap()];
        assert!(matches!(sign_distance(&partial, 0, 3), Err(Error::NoCommonRaters(0, 3))));
        let from = sign_distances_from(&rs, 0).unwrap();
        for b in 1..4 {
            assert_eq!(from[b].unwrap(), sign_distance(&rs, 0, b).unwrap());
        }
    }

    #[test]
    fn ell_one_keeps_everything() {
        let rs = vec![r(&[0, 1, 2, 3]), r(&[3, 2, 1, 0])];
        let c = candidate_set(&rs, 2, 1.0).unwrap();
        assert_eq!(c.members, vec![0, 1, 2, 3]);
        assert!(candidate_set(&rs, 2, 0.5).is_err());
    }

    #[test]
    fn half_stat_basics() {
        let rs = vec![r(&[0, 1, 2, 3]), r(&[2, 0, 3, 1])];
        assert_eq!(half_stat(&rs, 0, 0).unwrap().value, 1.0);
        // agent 0: {0,1} first half; agent 1: 0 first, 1 second
        assert_eq!(half_stat(&rs, 0, 1).unwrap().value, 0.5);
        assert_eq!(half_stat(&rs, 0, 1).unwrap(), half_stat(&rs, 1, 0).unwrap());
    }

    #[test]
    fn odd_length_first_half_includes_middle() {
        assert!(in_first_half(3, 5));
        assert!(!in_first_half(4, 5));
        assert!(in_first_half(2, 4));
        assert!(!in_first_half(3, 4));
    }

    #[test]
    fn two_means_examples() {
        let t = two_means_1d(&[0.1, 0.12, 0.11, 0.9, 0.95]);
        assert!((t.low_centroid - 0.11).abs() < 1e-12);
        assert!((t.high_centroid - 0.925).abs() < 1e-12);
        assert!(t.threshold.unwrap() > 0.12 && t.threshold.unwrap() < 0.9);
        let flat = two_means_1d(&[0.4, 0.4, 0.4]);
        assert_eq!(flat.threshold, None);
    }

    #[test]
    fn split_rejects_empty() {
        let rs = vec![r(&[0, 1, 2, 3])];
        let empty = CandidateSet { query: 0, members: vec![], ell: 2.0 };
        assert!(matches!(split_cluster(&rs, 0, &empty), Err(Error::EmptyCandidates)));
    }

    fn brute_two_means(v: &[f64]) -> f64 {
        // every threshold between sorted distinct values
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let sse = |xs: &[f64]| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        };
        let mut best = sse(&s);
        for i in 1..s.len() {
            if s[i - 1] != s[i] {
                best = best.min(sse(&s[..i]) + sse(&s[i..]));
            }
        }
        best
    }

    proptest! {
        #[test]
        fn two_means_matches_brute_force(v in proptest::collection::vec(0.0..1.0f64, 2..30)) {
            let t = two_means_1d(&v);
            prop_assert!((t.sse - brute_two_means(&v)).abs() < 1e-9);
        }

        #[test]
        fn two_means_order_invariant(v in proptest::collection::vec(0.0..1.0f64, 2..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut w = v.clone();
            w.shuffle(&mut crate::rng::substream(seed, crate::rng::StreamKind::Trial, 1));
            prop_assert_eq!(two_means_1d(&v), two_means_1d(&w));
        }
    }
}
