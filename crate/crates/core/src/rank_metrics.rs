//! Kendall-tau distances, the pair-sampled NKT estimator, global feature
//! matrices and the agent distance built on them.
//!
//! The estimator indicator is 1 when a pair is *discordant*, so that its mean
//! is unbiased for the expected normalized Kendall-tau distance.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::plackett_luce::Ranking;
use crate::rng::{substream, StreamKind};

/// Alternatives observed by both rankings, in `r1`'s best-first order.
fn shared_in_order(r1: &Ranking, r2: &Ranking) -> Vec<u32> {
    r1.order()
        .iter()
        .copied()
        .filter(|&j| r2.contains(j as usize))
        .collect()
}

fn pairs_of(s: usize) -> u64 {
    (s as u64) * (s as u64).saturating_sub(1) / 2
}

/// Number of discordant pairs over the shared alternatives, by merge-sort
/// inversion counting.
pub fn kendall_tau(r1: &Ranking, r2: &Ranking) -> Result<u64> {
    let shared = shared_in_order(r1, r2);
    if shared.len() < 2 {
        return Err(Error::InsufficientOverlap(shared.len()));
    }
    let pos2 = r2.positions();
    let mut seq: Vec<u32> = shared.iter().map(|&j| pos2[j as usize]).collect();
    let mut buf = vec![0u32; seq.len()];
    Ok(count_inversions(&mut seq, &mut buf))
}

fn count_inversions(seq: &mut [u32], buf: &mut [u32]) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    if n <= 16 {
        // insertion sort counts its shifts
        let mut inv = 0;
        for i in 1..n {
            let v = seq[i];
            let mut k = i;
            while k > 0 && seq[k - 1] > v {
                seq[k] = seq[k - 1];
                k -= 1;
            }
            seq[k] = v;
            inv += (i - k) as u64;
        }
        return inv;
    }
    let mid = n / 2;
    let mut inv = {
        let (left, right) = seq.split_at_mut(mid);
        let (lb, rb) = buf.split_at_mut(mid);
        count_inversions(left, lb) + count_inversions(right, rb)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if seq[i] <= seq[j] {
            buf[k] = seq[i];
            i += 1;
        } else {
            buf[k] = seq[j];
            inv += (mid - i) as u64;
            j += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&seq[i..mid]);
    k += mid - i;
    buf[k..n].copy_from_slice(&seq[j..n]);
    seq.copy_from_slice(&buf[..n]);
    inv
}

/// Reference O(s^2) Kendall-tau, kept for differential testing.
pub fn kendall_tau_naive(r1: &Ranking, r2: &Ranking) -> Result<u64> {
    let shared = shared_in_order(r1, r2);
    if shared.len() < 2 {
        return Err(Error::InsufficientOverlap(shared.len()));
    }
    let mut count = 0;
    for (p, &a) in shared.iter().enumerate() {
        for &b in &shared[p + 1..] {
            let d1 = r1.rank_of(a as usize).unwrap() as i64 - r1.rank_of(b as usize).unwrap() as i64;
            let d2 = r2.rank_of(a as usize).unwrap() as i64 - r2.rank_of(b as usize).unwrap() as i64;
            if d1 * d2 < 0 {
                count += 1;
            }
        }
    }
    Ok(count)
}

/// Normalized Kendall-tau: discordant fraction of the shared pairs.
pub fn nkt(r1: &Ranking, r2: &Ranking) -> Result<f64> {
    let kt = kendall_tau(r1, r2)?;
    let s = r1.order().iter().filter(|&&j| r2.contains(j as usize)).count();
    Ok(kt as f64 / pairs_of(s) as f64)
}

/// Disjoint alternative pairs used by the NKT estimator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pairing {
    pairs: Vec<(u32, u32)>,
}

impl Pairing {
    pub fn new(pairs: Vec<(u32, u32)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len() * 2);
        for &(a, b) in &pairs {
            if a == b || !seen.insert(a) || !seen.insert(b) {
                return Err(Error::InvalidPairing(format!("pair ({a}, {b}) overlaps another pair")));
            }
        }
        Ok(Pairing { pairs })
    }

    /// Consecutive pairs `(ids[0], ids[1]), (ids[2], ids[3]), ...`; an odd
    /// leftover is dropped.
    pub fn consecutive(ids: &[u32]) -> Self {
        Pairing {
            pairs: ids.chunks_exact(2).map(|c| (c[0], c[1])).collect(),
        }
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// A seed-derived shuffle of all alternative ids, shared by every agent pair.
/// The pairing for `(i, j)` pairs consecutive shuffled ids that both observe.
#[derive(Debug, Clone)]
pub struct PairingPlan {
    perm: Vec<u32>,
}

impl PairingPlan {
    pub fn new(n_alternatives: usize, seed: u64) -> Self {
        let mut perm: Vec<u32> = (0..n_alternatives as u32).collect();
        perm.shuffle(&mut substream(seed, StreamKind::Pairing, 0));
        PairingPlan { perm }
    }

    pub fn pairing_for(&self, r1: &Ranking, r2: &Ranking) -> Pairing {
        let shared: Vec<u32> = self
            .perm
            .iter()
            .copied()
            .filter(|&j| r1.contains(j as usize) && r2.contains(j as usize))
            .collect();
        Pairing::consecutive(&shared)
    }

    pub fn full(&self) -> Pairing {
        Pairing::consecutive(&self.perm)
    }
}

/// Fraction of pairs in `pairing` on which the two rankings disagree.
pub fn enkt_feature(r1: &Ranking, r2: &Ranking, pairing: &Pairing) -> Result<f64> {
    if pairing.is_empty() {
        return Err(Error::InvalidPairing("empty pairing".into()));
    }
    let mut discordant = 0usize;
    for &(a, b) in pairing.pairs() {
        let (a, b) = (a as usize, b as usize);
        let (Some(p1), Some(p2)) = (r1.prefers(a, b), r2.prefers(a, b)) else {
            return Err(Error::InvalidPairing(format!("pair ({a}, {b}) not observed by both rankings")));
        };
        if p1 != p2 {
            discordant += 1;
        }
    }
    Ok(discordant as f64 / pairing.len() as f64)
}

/// Agent `owner`'s row of the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub owner: usize,
    pub values: BTreeMap<usize, f64>,
}

/// Symmetric `n x n` matrix of estimator values `F[i][j]`; the diagonal is
/// unused and stored as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn from_rows(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Parse(format!("expected {} values, got {}", n * n, values.len())));
        }
        Ok(FeatureMatrix { n, values })
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn feature_vector(&self, i: usize) -> FeatureVector {
        FeatureVector {
            owner: i,
            values: (0..self.n).filter(|&j| j != i).map(|j| (j, self.get(i, j))).collect(),
        }
    }

    /// Rows as vectors; `i, j, F_ij` for `i != j`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,F_ij")?;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    writeln!(w, "{i},{j},{}", self.get(i, j))?;
                }
            }
        }
        Ok(())
    }

    /// Little-endian dump: `n` as u64, then `n * n` f64 row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let n = u64::from_le_bytes(word) as usize;
        let mut values = Vec::with_capacity(n * n);
        for _ in 0..n * n {
            r.read_exact(&mut word)?;
            values.push(f64::from_le_bytes(word));
        }
        FeatureMatrix::from_rows(n, values)
    }
}

/// Builds `F[i][j] = enkt_feature(R_i, R_j, pairing_ij)` for all `i != j`.
///
/// Pairings come from one [`PairingPlan`] shared by all agent pairs. When
/// every ranking is complete the pair outcomes are packed into bitsets and
/// `F[i][j]` is a popcount of their xor.
pub fn feature_matrix(rankings: &[Ranking], pairing_seed: u64) -> Result<FeatureMatrix> {
    let n = rankings.len();
    if n < 3 {
        return Err(Error::InsufficientAgents { need: 3, got: n });
    }
    let m = rankings[0].n_alternatives();
    let plan = PairingPlan::new(m, pairing_seed);
    let all_full = rankings.iter().all(|r| r.is_full() && r.n_alternatives() == m);
    let upper: Vec<Vec<f64>> = if all_full {
        full_observation_rows(rankings, &plan.full())?
    } else {
        (0..n)
            .into_par_iter()
            .map(|i| {
                (i + 1..n)
                    .map(|j| {
                        let pairing = plan.pairing_for(&rankings[i], &rankings[j]);
                        if pairing.is_empty() {
                            let shared = rankings[i]
                                .observed()
                                .iter()
                                .filter(|&&a| rankings[j].contains(a as usize))
                                .count();
                            return Err(Error::InsufficientOverlap(shared));
                        }
                        enkt_feature(&rankings[i], &rankings[j], &pairing)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?
    };
    let mut values = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(FeatureMatrix { n, values })
}

fn full_observation_rows(rankings: &[Ranking], pairing: &Pairing) -> Result<Vec<Vec<f64>>> {
    if pairing.is_empty() {
        return Err(Error::InsufficientOverlap(rankings[0].len()));
    }
    let words = pairing.len().div_ceil(64);
    let bits: Vec<Vec<u64>> = rankings
        .par_iter()
        .map(|r| {
            let pos = r.positions();
            let mut row = vec![0u64; words];
            for (k, &(a, b)) in pairing.pairs().iter().enumerate() {
                if pos[a as usize] < pos[b as usize] {
                    row[k / 64] |= 1 << (k % 64);
                }
            }
            row
        })
        .collect();
    let p = pairing.len() as f64;
    let n = rankings.len();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .map(|j| {
                    let d: u32 = bits[i].iter().zip(&bits[j]).map(|(x, y)| (x ^ y).count_ones()).sum();
                    d as f64 / p
                })
                .collect()
        })
        .collect())
}

/// Mean over `k` outside `{i, j}` of `|F[i][k] - F[j][k]|`.
pub fn agent_distance(features: &FeatureMatrix, i: usize, j: usize) -> Result<f64> {
    let n = features.n_agents();
    if n < 3 {
        return Err(Error::InsufficientAgents { need: 3, got: n });
    }
    if i >= n {
        return Err(Error::AgentOutOfRange(i));
    }
    if j >= n {
        return Err(Error::AgentOutOfRange(j));
    }
    if i == j {
        return Err(Error::SelfDistance);
    }
    Ok(row_distance(features.row(i), features.row(j), i, j))
}

#[inline]
fn row_distance(ri: &[f64], rj: &[f64], i: usize, j: usize) -> f64 {
    let total: f64 = ri.iter().zip(rj).map(|(a, b)| (a - b).abs()).sum();
    let own = (ri[i] - rj[i]).abs() + (ri[j] - rj[j]).abs();
    (total - own) / (ri.len() - 2) as f64
}

/// Distances from `query` to every agent (`NaN` at `query`).
pub fn agent_distances_from(features: &FeatureMatrix, query: usize) -> Vec<f64> {
    let n = features.n_agents();
    let rq = features.row(query);
    (0..n)
        .map(|j| if j == query { f64::NAN } else { row_distance(rq, features.row(j), query, j) })
        .collect()
}
