//! Numerical checks of the distance and bias results in one dimension.
//!
//! Every check produces a [`Report`]: named claims with a pass, fail or
//! inconclusive status plus the numbers behind them, and the curves they
//! were read from. Curves are integrated by piecewise Gauss-Legendre with
//! breakpoints at every kink of the integrand; Monte Carlo runs with
//! per-point substreams so results do not depend on thread count.

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::{pairwise_prob_1d, LatentPoint};
use crate::plackett_luce::{sample_ranking, Sampler};
use crate::quadrature::{mapped_nodes, panels, Adaptive, GaussLegendre};
use crate::rank_metrics::{enkt_feature, PairingPlan};
use crate::rng::{derive_seed, substream, StreamKind};

/// A curve on a grid with per-point Monte Carlo standard errors (zero for
/// quadrature).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl CurveSample {
    pub fn new(x_grid: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if x_grid.len() != values.len() || x_grid.len() != stderr.len() {
            return Err(Error::DimensionMismatch {
                expected: x_grid.len(),
                got: values.len().min(stderr.len()),
            });
        }
        if stderr.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidConfig("negative standard error".into()));
        }
        Ok(Self { x_grid, values, stderr })
    }

    pub fn len(&self) -> usize {
        self.x_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x_grid.is_empty()
    }

    /// Index of the smallest value; the first one on ties.
    pub fn argmin(&self) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
    }

    /// `values[i + 1] - values[i]`.
    pub fn forward_differences(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["x", "value", "stderr"])?;
        for i in 0..self.len() {
            out.write_record([
                self.x_grid[i].to_string(),
                self.values[i].to_string(),
                self.stderr[i].to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Pass,
    Inconclusive,
    Fail,
}

impl ClaimStatus {
    fn from_bool(ok: bool) -> Self {
        if ok { Self::Pass } else { Self::Fail }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    #[serde(rename = "claim")]
    pub name: String,
    pub status: ClaimStatus,
    pub numbers: BTreeMap<String, f64>,
}

impl Claim {
    fn new(name: impl Into<String>, status: ClaimStatus) -> Self {
        Self {
            name: name.into(),
            status,
            numbers: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.numbers.insert(key.to_string(), value);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub target: String,
    pub status: ClaimStatus,
    pub claims: Vec<Claim>,
    #[serde(skip)]
    pub curves: Vec<(String, CurveSample)>,
}

impl Report {
    fn new(target: &str, claims: Vec<Claim>, curves: Vec<(String, CurveSample)>) -> Self {
        // Fail dominates inconclusive, which dominates pass.
        let status = claims.iter().map(|c| c.status).max().unwrap_or(ClaimStatus::Pass);
        Self {
            target: target.to_string(),
            status,
            claims,
            curves,
        }
    }

    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    /// Writes `<target>.json` and one `<target>_<curve>.csv` per curve.
    pub fn write_to_dir(&self, dir: &std::path::Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let json = std::fs::File::create(dir.join(format!("{}.json", self.target)))?;
        serde_json::to_writer_pretty(json, self)?;
        for (name, curve) in &self.curves {
            let f = std::fs::File::create(dir.join(format!("{}_{}.csv", self.target, name)))?;
            curve.write_csv(f)?;
        }
        Ok(())
    }
}

/// `P(the two agents disagree on (y1, y2))` for agents at `x_q` and `x`.
pub fn expected_nkt_pair(x_q: f64, x: f64, y1: f64, y2: f64) -> f64 {
    let px = pairwise_prob_1d(x, y1, y2);
    let pq = pairwise_prob_1d(x_q, y1, y2);
    px * (1.0 - pq) + pq * (1.0 - px)
}

/// How `F(x) = E_{y1, y2 ~ U[0,1]}[expected_nkt_pair]` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Integrator {
    Quadrature(Adaptive),
    MonteCarlo { samples: usize, seed: u64 },
}

/// The uniform grid `0, 1/steps, ..., 1`.
pub fn unit_grid(steps: usize) -> Vec<f64> {
    (0..=steps).map(|i| i as f64 / steps as f64).collect()
}

fn expected_nkt_point(x_q: f64, x: f64, point: usize, integrator: Integrator) -> Result<(f64, f64)> {
    match integrator {
        Integrator::Quadrature(adaptive) => {
            let breaks = [x, x_q];
            let v = adaptive.integrate_2d((0.0, 1.0), (0.0, 1.0), &breaks, &breaks, |y1, y2| {
                expected_nkt_pair(x_q, x, y1, y2)
            })?;
            Ok((v, 0.0))
        }
        Integrator::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::InvalidConfig("Monte Carlo needs at least 2 samples".into()));
            }
            let mut rng = substream(seed, StreamKind::Trial, point as u64);
            let (mean, se) = mean_stderr((0..samples).map(|_| {
                let y1: f64 = rng.random();
                let y2: f64 = rng.random();
                expected_nkt_pair(x_q, x, y1, y2)
            }));
            Ok((mean, se))
        }
    }
}

/// `F(x)` for every grid point.
pub fn expected_nkt_curve(x_q: f64, grid: &[f64], integrator: Integrator) -> Result<CurveSample> {
    if !(0.0..=1.0).contains(&x_q) {
        return Err(Error::InvalidConfig(format!("query position {x_q} outside [0, 1]")));
    }
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("grid must be strictly increasing inside [0, 1]".into()));
    }
    let points: Vec<(f64, f64)> = grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| expected_nkt_point(x_q, x, i, integrator))
        .collect::<Result<_>>()?;
    let (values, stderr) = points.into_iter().unzip();
    CurveSample::new(grid.to_vec(), values, stderr)
}

fn mean_stderr(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut n = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / n as f64;
        m2 += delta * (v - mean);
    }
    if n < 2 {
        return (mean, 0.0);
    }
    (mean, (m2 / (n - 1) as f64 / n as f64).sqrt())
}

/// Query positions covered by [`theorem_bias_check`]: near the left edge, the
/// mirrored right edge, and the center.
pub const BIAS_QUERIES: [f64; 7] = [0.05, 0.1, 0.2, 0.25, 0.5, 0.75, 0.9];

/// Checks where `F` is minimized for each query on a `1/steps` grid.
///
/// For `x_q <= 0.25` the minimizer must be the left endpoint with every
/// forward difference over `(0, x_q]` strictly positive; mirrored for
/// `x_q >= 0.75`. The center query must be its own minimizer.
pub fn theorem_bias_check(queries: &[f64], steps: usize, rel_tol: f64) -> Result<Report> {
    let grid = unit_grid(steps);
    let integrator = Integrator::Quadrature(Adaptive::with_rel_tol(rel_tol));
    let mut claims = Vec::new();
    let mut curves = Vec::new();
    for &x_q in queries {
        let curve = expected_nkt_curve(x_q, &grid, integrator)?;
        let argmin = curve.argmin().expect("non-empty grid");
        let diffs = curve.forward_differences();
        let q_idx = (x_q * steps as f64).round() as usize;
        let claim = if x_q < 0.5 {
            // differences over [0, x_q] must all increase away from 0
            let min_diff = diffs[..q_idx].iter().copied().fold(f64::INFINITY, f64::min);
            Claim::new(
                format!("argmin_left_edge(x_q={x_q})"),
                ClaimStatus::from_bool(argmin == 0 && min_diff > 0.0),
            )
            .with("min_forward_difference", min_diff)
        } else if x_q > 0.5 {
            let min_diff = diffs[q_idx..].iter().map(|d| -d).fold(f64::INFINITY, f64::min);
            Claim::new(
                format!("argmin_right_edge(x_q={x_q})"),
                ClaimStatus::from_bool(argmin == steps && min_diff > 0.0),
            )
            .with("min_backward_difference", min_diff)
        } else {
            Claim::new(format!("argmin_center(x_q={x_q})"), ClaimStatus::from_bool(argmin == q_idx))
        };
        claims.push(
            claim
                .with("x_q", x_q)
                .with("argmin_x", grid[argmin])
                .with("f_at_argmin", curve.values[argmin])
                .with("f_at_x_q", curve.values[q_idx]),
        );
        curves.push((format!("F_xq_{x_q}"), curve));
    }
    Ok(Report::new("theorem-bias", claims, curves))
}

/// Two alternatives at 0.4 and 0.7 and a fixed agent at 0.5.
pub const EXAMPLE_ALTERNATIVES: (f64, f64) = (0.4, 0.7);
pub const EXAMPLE_AGENT: f64 = 0.5;

/// `E[KT(R_1, R_2)]` for the two-alternative example as a function of the
/// second agent's position.
pub fn example_expected_kt(x2: f64) -> f64 {
    let (y1, y2) = EXAMPLE_ALTERNATIVES;
    expected_nkt_pair(EXAMPLE_AGENT, x2, y1, y2)
}

/// Analytic derivative of [`example_expected_kt`]. Off the kinks at the
/// alternatives, `d/dx2 = (1 - 2 p_1) * dp_2/dx2` with
/// `dp_2/dx2 = -p_2 (1 - p_2) (sgn(x2 - y1) - sgn(x2 - y2))`.
pub fn example_expected_kt_derivative(x2: f64) -> f64 {
    let (y1, y2) = EXAMPLE_ALTERNATIVES;
    let p1 = pairwise_prob_1d(EXAMPLE_AGENT, y1, y2);
    let p2 = pairwise_prob_1d(x2, y1, y2);
    let slope = sign(x2 - y1) - sign(x2 - y2);
    (1.0 - 2.0 * p1) * (-p2 * (1.0 - p2) * slope)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Deterministic KT between the noise-free rankings of the two agents.
/// Ties in utility count as disagreement.
pub fn example_deterministic_kt(x2: f64) -> u32 {
    let (y1, y2) = EXAMPLE_ALTERNATIVES;
    let first = |x: f64| {
        let (d1, d2) = ((x - y1).abs(), (x - y2).abs());
        if d1 < d2 {
            Some(true)
        } else if d2 < d1 {
            Some(false)
        } else {
            None
        }
    };
    match (first(EXAMPLE_AGENT), first(x2)) {
        (Some(a), Some(b)) if a == b => 0,
        _ => 1,
    }
}

/// Positions where the derivative of the expected KT is examined.
pub const EXAMPLE_DERIVATIVE_POINTS: [f64; 3] = [0.0, 0.25, 0.5];

/// Contrasts the minimizers of deterministic and expected KT for two
/// alternatives. Tolerance `tol` bounds the gap between analytic and
/// central-difference derivatives.
pub fn example_one(tol: f64) -> Report {
    let (y1, y2) = EXAMPLE_ALTERNATIVES;
    let mut claims = Vec::new();

    // Zero-KT set is {x2 : |x2 - y1| < |x2 - y2|}, i.e. below the midpoint.
    let boundary = 0.5 * (y1 + y2);
    let grid: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
    let scan_ok = grid
        .iter()
        .all(|&x| (example_deterministic_kt(x) == 0) == (x < boundary))
        && example_deterministic_kt(boundary) == 1
        && example_deterministic_kt(boundary - 1e-9) == 0;
    claims.push(
        Claim::new(
            "deterministic_boundary",
            ClaimStatus::from_bool((boundary - 0.55).abs() <= f64::EPSILON && scan_ok),
        )
        .with("boundary", boundary),
    );

    let mut derivative = Claim::new("expected_kt_derivative_positive", ClaimStatus::Pass);
    let h = 1e-6;
    for &x in &EXAMPLE_DERIVATIVE_POINTS {
        let analytic = example_expected_kt_derivative(x);
        let central = (example_expected_kt(x + h) - example_expected_kt(x - h)) / (2.0 * h);
        if !(analytic > 0.0) || (central - analytic).abs() > tol {
            derivative.status = ClaimStatus::Fail;
        }
        derivative = derivative
            .with(&format!("analytic_at_{x}"), analytic)
            .with(&format!("central_at_{x}"), central);
    }
    claims.push(derivative);

    let left = example_expected_kt(-1.0);
    let at_agent = example_expected_kt(EXAMPLE_AGENT);
    claims.push(
        Claim::new("tail_beats_agent_position", ClaimStatus::from_bool(left < at_agent))
            .with("expected_kt_at_-1", left)
            .with("expected_kt_at_0.5", at_agent),
    );

    let values: Vec<f64> = grid.iter().map(|&x| example_expected_kt(x)).collect();
    let p1 = pairwise_prob_1d(EXAMPLE_AGENT, y1, y2);
    let complement_gap = grid
        .iter()
        .zip(&values)
        .map(|(&x, v)| {
            let p2 = pairwise_prob_1d(x, y1, y2);
            (v + p1 * p2 + (1.0 - p1) * (1.0 - p2) - 1.0).abs()
        })
        .fold(0.0, f64::max);
    claims.push(
        Claim::new("complement_sums_to_one", ClaimStatus::from_bool(complement_gap < 1e-12))
            .with("max_gap", complement_gap),
    );

    let curve = CurveSample::new(grid.clone(), values, vec![0.0; grid.len()]).expect("equal lengths");
    let argmin = curve.argmin().expect("non-empty");
    claims.push(
        Claim::new("expected_kt_minimum", ClaimStatus::Pass)
            .with("argmin_x", grid[argmin])
            .with("min_value", curve.values[argmin]),
    );
    Report::new("example-1", claims, vec![("expected_kt".into(), curve)])
}

/// Least-squares fit of `ln y = slope * ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn loglog_fit(xs: &[f64], ys: &[f64]) -> Result<PowerFit> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    if xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidConfig("log-log fit needs two or more positive points".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ok(PowerFit { slope, intercept, r_squared })
}

/// `|int int (p_i - p_j)(1 - 2 p_k) dy1 dy2|` over the unit square: the gap
/// between the expected features of agents `i` and `j` against agent `k`.
pub fn expected_feature_gap(rule: &GaussLegendre, x_i: f64, x_j: f64, x_k: f64) -> f64 {
    let nodes = mapped_nodes(rule, &panels(0.0, 1.0, &[x_i, x_j, x_k]));
    let util = |x: f64| -> Vec<f64> { nodes.iter().map(|(y, _)| (-(x - y).abs()).exp()).collect() };
    let (ui, uj, uk) = (util(x_i), util(x_j), util(x_k));
    let mut total = 0.0;
    for (b, &(_, wb)) in nodes.iter().enumerate() {
        let mut row = 0.0;
        for (a, &(_, wa)) in nodes.iter().enumerate() {
            let pi = ui[a] / (ui[a] + ui[b]);
            let pj = uj[a] / (uj[a] + uj[b]);
            let pk = uk[a] / (uk[a] + uk[b]);
            row += wa * (pi - pj) * (1.0 - 2.0 * pk);
        }
        total += wb * row;
    }
    total.abs()
}

/// `|int_0^1 (2 p_x(y_i, y_j) - 1) dx|`: the expected sign statistic between
/// two alternatives over uniform agents.
pub fn expected_sign_gap(rule: &GaussLegendre, y_i: f64, y_j: f64) -> f64 {
    let cuts = panels(0.0, 1.0, &[y_i, y_j]);
    mapped_nodes(rule, &cuts)
        .into_iter()
        .map(|(x, w)| w * (2.0 * pairwise_prob_1d(x, y_i, y_j) - 1.0))
        .sum::<f64>()
        .abs()
}

/// Spacing grid used by the shape checks: `points` values log-spaced over
/// `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

const SHAPE_RULE_ORDER: usize = 16;
const MAX_REL_STDERR: f64 = 0.2;
const MIN_R_SQUARED: f64 = 0.98;

fn validate_spacing_grid(grid: &[f64], upper: f64) -> Result<()> {
    if grid.len() < 2 || grid.iter().any(|e| !(*e > 0.0 && *e < upper)) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig(format!(
            "grid must hold two or more increasing values in (0, {upper})"
        )));
    }
    Ok(())
}

/// Shared claims for a Monte Carlo curve that should grow like a power
/// between 1 and 2 of the spacing.
fn shape_claims(curve: &CurveSample) -> Result<Vec<Claim>> {
    let mut claims = Vec::new();
    let worst_rel = curve
        .values
        .iter()
        .zip(&curve.stderr)
        .map(|(v, s)| s / v)
        .fold(0.0, f64::max);
    claims.push(
        Claim::new(
            "statistical_power",
            if worst_rel <= MAX_REL_STDERR { ClaimStatus::Pass } else { ClaimStatus::Inconclusive },
        )
        .with("max_relative_stderr", worst_rel),
    );
    let increasing = curve.values.windows(2).all(|w| w[0] < w[1]);
    claims.push(Claim::new("increasing", ClaimStatus::from_bool(increasing)));
    let fit = loglog_fit(&curve.x_grid, &curve.values)?;
    claims.push(
        Claim::new(
            "loglog_slope_between_1_and_2",
            ClaimStatus::from_bool((1.0..=2.0).contains(&fit.slope) && fit.r_squared > MIN_R_SQUARED),
        )
        .with("slope", fit.slope)
        .with("intercept", fit.intercept)
        .with("r_squared", fit.r_squared),
    );
    let min_ratio = curve
        .x_grid
        .iter()
        .zip(&curve.values)
        .map(|(e, v)| v / (e * e))
        .fold(f64::INFINITY, f64::min);
    claims.push(
        Claim::new("quadratic_lower_bound", ClaimStatus::from_bool(min_ratio > 0.0))
            .with("min_value_over_spacing_squared", min_ratio),
    );
    Ok(claims)
}

/// Monte Carlo expected agent distance against spacing `eps`: agents at
/// `x_i ~ U[0, 1 - eps]` and `x_i + eps`, compared through a third agent
/// `x_k ~ U[0, 1]`, with the inner expectation over alternative pairs done
/// by quadrature.
pub fn agent_distance_curve(eps_grid: &[f64], trials: usize, seed: u64) -> Result<CurveSample> {
    validate_spacing_grid(eps_grid, 1.0)?;
    let rule = GaussLegendre::new(SHAPE_RULE_ORDER);
    let points: Vec<(f64, f64)> = eps_grid
        .par_iter()
        .enumerate()
        .map(|(p, &eps)| {
            let mut rng = substream(seed, StreamKind::Trial, p as u64);
            mean_stderr((0..trials).map(|_| {
                let x_i = rng.random::<f64>() * (1.0 - eps);
                let x_k: f64 = rng.random();
                expected_feature_gap(&rule, x_i, x_i + eps, x_k)
            }))
        })
        .collect();
    let (values, stderr) = points.into_iter().unzip();
    CurveSample::new(eps_grid.to_vec(), values, stderr)
}

/// Shape checks on the expected agent distance: increasing in the spacing,
/// log-log slope in `[1, 2]`, and bounded below by a multiple of `eps^2`.
/// Also checks that the sampled distance concentrates as alternatives grow.
pub fn agent_bound_check(eps_grid: &[f64], trials: usize, seed: u64) -> Result<Report> {
    let curve = agent_distance_curve(eps_grid, trials, seed)?;
    let mut claims = shape_claims(&curve)?;
    claims.push(distance_concentration_check(200, 48, 400, derive_seed(seed, 2))?);
    Ok(Report::new("agent-bounds", claims, vec![("expected_distance".into(), curve)]))
}

/// The alternative at the same distance from the center as `y`, on the
/// other side.
pub fn mirror(y: f64) -> f64 {
    1.0 - y
}

/// Monte Carlo expected sign statistic against the center-offset gap
/// `delta = | |y_i - 1/2| - |y_j - 1/2| |`, with `y_i ~ U[0, 1]` and `y_j`
/// placed on a random side of the center.
pub fn sign_gap_curve(delta_grid: &[f64], trials: usize, seed: u64) -> Result<CurveSample> {
    validate_spacing_grid(delta_grid, 0.5)?;
    let rule = GaussLegendre::new(SHAPE_RULE_ORDER);
    let points: Vec<(f64, f64)> = delta_grid
        .par_iter()
        .enumerate()
        .map(|(p, &delta)| {
            let mut rng = substream(seed, StreamKind::Trial, p as u64);
            mean_stderr((0..trials).map(|_| {
                let y_i: f64 = rng.random();
                let tau_i = (y_i - 0.5).abs();
                let tau_j = if tau_i + delta <= 0.5 { tau_i + delta } else { tau_i - delta };
                let y_j = if rng.random::<bool>() { 0.5 + tau_j } else { 0.5 - tau_j };
                expected_sign_gap(&rule, y_i, y_j)
            }))
        })
        .collect();
    let (values, stderr) = points.into_iter().unzip();
    CurveSample::new(delta_grid.to_vec(), values, stderr)
}

/// Shape checks on the expected sign statistic, plus the mirror pair
/// vanishing and monotone growth along fixed-`y_i` slices.
pub fn item_bound_check(delta_grid: &[f64], trials: usize, seed: u64) -> Result<Report> {
    let curve = sign_gap_curve(delta_grid, trials, seed)?;
    let mut claims = shape_claims(&curve)?;
    let rule = GaussLegendre::new(SHAPE_RULE_ORDER);

    let mut rng = substream(seed, StreamKind::Trial, delta_grid.len() as u64);
    let mirror_max = (0..1000)
        .map(|_| {
            let y: f64 = rng.random();
            expected_sign_gap(&rule, y, mirror(y))
        })
        .fold(0.0, f64::max);
    claims.push(
        Claim::new("mirror_pair_vanishes", ClaimStatus::from_bool(mirror_max < 1e-12))
            .with("max_abs_sign_statistic", mirror_max),
    );

    // Slices: y_i fixed below the center, y_j pushed outward on either side.
    let mut monotone = true;
    let mut slices = 0.0;
    for &y_i in &[0.05, 0.15, 0.3, 0.45] {
        let tau_i: f64 = 0.5 - y_i;
        for side in [-1.0, 1.0] {
            let values: Vec<f64> = delta_grid
                .iter()
                .filter(|&&d| tau_i + d <= 0.5)
                .map(|&d| expected_sign_gap(&rule, y_i, 0.5 + side * (tau_i + d)))
                .collect();
            if values.len() >= 2 {
                slices += 1.0;
                monotone &= values.windows(2).all(|w| w[0] < w[1]);
            }
        }
    }
    claims.push(Claim::new("monotone_along_slices", ClaimStatus::from_bool(monotone)).with("slices", slices));
    Ok(Report::new("item-bounds", claims, vec![("expected_sign_statistic".into(), curve)]))
}

/// Sample variance of the agent distance between two fixed agents when each
/// replicate redraws the alternatives and every ranking.
pub fn distance_variance(
    x_i: f64,
    x_j: f64,
    others: &[f64],
    n_alternatives: usize,
    replicates: usize,
    seed: u64,
) -> Result<f64> {
    if others.is_empty() || replicates < 2 || n_alternatives < 2 {
        return Err(Error::InvalidConfig("need other agents, two alternatives and two replicates".into()));
    }
    let draws: Vec<f64> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, StreamKind::Trial, r as u64);
            let alts: Vec<LatentPoint> = (0..n_alternatives).map(|_| LatentPoint::from(rng.random::<f64>())).collect();
            let rank = |x: f64, rng: &mut _| sample_ranking(&LatentPoint::from(x), &alts, Sampler::GumbelMax, rng);
            let ri = rank(x_i, &mut rng)?;
            let rj = rank(x_j, &mut rng)?;
            let pairing = PairingPlan::new(n_alternatives, derive_seed(seed, r as u64)).full();
            let mut total = 0.0;
            for &x_k in others {
                let rk = rank(x_k, &mut rng)?;
                total += (enkt_feature(&ri, &rk, &pairing)? - enkt_feature(&rj, &rk, &pairing)?).abs();
            }
            Ok(total / others.len() as f64)
        })
        .collect::<Result<_>>()?;
    let n = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / n;
    Ok(draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Variance of the agent distance at `m` alternatives over that at `2m`.
/// Concentration predicts a ratio near two.
pub fn distance_concentration_check(n_alternatives: usize, n_others: usize, replicates: usize, seed: u64) -> Result<Claim> {
    let others: Vec<f64> = (0..n_others).map(|k| (k as f64 + 0.5) / n_others as f64).collect();
    let v1 = distance_variance(0.4, 0.5, &others, n_alternatives, replicates, seed)?;
    let v2 = distance_variance(0.4, 0.5, &others, 2 * n_alternatives, replicates, derive_seed(seed, 1))?;
    let ratio = v1 / v2;
    Ok(Claim::new("variance_halves_when_alternatives_double", ClaimStatus::from_bool((1.4..=2.8).contains(&ratio)))
        .with("variance_m", v1)
        .with("variance_2m", v2)
        .with("ratio", ratio))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_comparison_at_most_half() {
        for &(x, y1, y2) in &[(0.3, 0.1, 0.9), (0.5, 0.5, 0.2), (0.0, 1.0, 0.0)] {
            let p = pairwise_prob_1d(x, y1, y2);
            let v = expected_nkt_pair(x, x, y1, y2);
            assert!((v - 2.0 * p * (1.0 - p)).abs() < 1e-15);
            assert!(v <= 0.5);
        }
    }

    #[test]
    fn indifferent_query_gives_half() {
        // query equidistant from both alternatives
        assert!((expected_nkt_pair(0.5, 0.13, 0.3, 0.7) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn curve_validates_inputs() {
        let q = Integrator::Quadrature(Adaptive::default());
        assert!(expected_nkt_curve(0.2, &[0.5, 0.1], q).is_err());
        assert!(expected_nkt_curve(0.2, &[0.5, 1.1], q).is_err());
        assert!(expected_nkt_curve(1.2, &[0.5], q).is_err());
        assert!(CurveSample::new(vec![0.0], vec![1.0], vec![-1.0]).is_err());
    }

    #[test]
    fn example_derivative_matches_central_difference_off_kinks() {
        for &x in &[-1.0, 0.1, 0.45, 0.5, 0.6, 0.9] {
            let h = 1e-6;
            let fd = (example_expected_kt(x + h) - example_expected_kt(x - h)) / (2.0 * h);
            assert!((fd - example_expected_kt_derivative(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn loglog_recovers_power() {
        let xs = log_grid(0.02, 0.2, 6);
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(1.5)).collect();
        let fit = loglog_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_status_takes_worst() {
        let r = Report::new(
            "t",
            vec![Claim::new("a", ClaimStatus::Pass), Claim::new("b", ClaimStatus::Inconclusive)],
            vec![],
        );
        assert_eq!(r.status, ClaimStatus::Inconclusive);
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["claims"][1]["status"], "inconclusive");
        assert_eq!(json["claims"][0]["claim"], "a");
    }

    #[test]
    fn identical_agents_have_no_feature_gap() {
        let rule = GaussLegendre::new(8);
        assert!(expected_feature_gap(&rule, 0.3, 0.3, 0.8) < 1e-15);
    }

    proptest! {
        #[test]
        fn pair_expectation_reflects(x_q in 0.0..1.0f64, x in 0.0..1.0f64, y1 in 0.0..1.0f64, y2 in 0.0..1.0f64) {
            let a = expected_nkt_pair(x_q, x, y1, y2);
            let b = expected_nkt_pair(1.0 - x_q, 1.0 - x, 1.0 - y1, 1.0 - y2);
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }

        #[test]
        fn pair_expectation_symmetric_in_agents(x_q in 0.0..1.0f64, x in 0.0..1.0f64, y1 in 0.0..1.0f64, y2 in 0.0..1.0f64) {
            prop_assert!((expected_nkt_pair(x_q, x, y1, y2) - expected_nkt_pair(x, x_q, y1, y2)).abs() < 1e-15);
        }
    }
}
