//! Gauss-Legendre rules and piecewise integration over boxes whose
//! integrands are smooth between known breakpoints.

use crate::error::{Error, Result};

/// Nodes and weights of an `n`-point Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sorted, deduplicated cut points of `[lo, hi]`: the endpoints plus every
/// breakpoint strictly inside.
pub fn panels(lo: f64, hi: f64, breakpoints: &[f64]) -> Vec<f64> {
    let mut cuts = vec![lo, hi];
    cuts.extend(breakpoints.iter().copied().filter(|&b| b > lo && b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts
}

/// Fixed-order product rule on the panel grid built from the breakpoints.
/// Exact up to the rule order when the integrand is smooth on each panel.
pub fn piecewise_2d<F: FnMut(f64, f64) -> f64>(
    rule: &GaussLegendre,
    x_cuts: &[f64],
    y_cuts: &[f64],
    mut f: F,
) -> f64 {
    let xs = mapped_nodes(rule, x_cuts);
    let ys = mapped_nodes(rule, y_cuts);
    let mut total = 0.0;
    for &(y, wy) in &ys {
        let mut row = 0.0;
        for &(x, wx) in &xs {
            row += wx * f(x, y);
        }
        total += wy * row;
    }
    total
}

/// Concatenated nodes and weights of `rule` on each panel of `cuts`.
pub fn mapped_nodes(rule: &GaussLegendre, cuts: &[f64]) -> Vec<(f64, f64)> {
    cuts.windows(2).flat_map(|w| rule.mapped(w[0], w[1])).collect()
}

/// Adaptive 2-D integration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Order of the coarse rule; the fine rule has twice as many nodes.
    pub order: usize,
    pub max_panels: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            order: 12,
            max_panels: 20_000,
        }
    }
}

struct Panel {
    rect: [f64; 4],
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error).is_eq()
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

impl Adaptive {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }

    /// Integrates `f` over `[x0, x1] x [y0, y1]`.
    ///
    /// Every panel carries an error estimate `|fine - coarse|` from an
    /// `order`-point and a `2 * order`-point product rule. The worst panel is
    /// quartered until the summed estimate drops under
    /// `max(rel_tol * |I|, abs_tol)`.
    pub fn integrate_2d<F: Fn(f64, f64) -> f64>(
        &self,
        (x0, x1): (f64, f64),
        (y0, y1): (f64, f64),
        x_breaks: &[f64],
        y_breaks: &[f64],
        f: F,
    ) -> Result<f64> {
        let coarse = GaussLegendre::new(self.order);
        let fine = GaussLegendre::new(2 * self.order);
        let eval = |rect: [f64; 4]| {
            let value = rect_rule(&fine, rect, &f);
            let error = (value - rect_rule(&coarse, rect, &f)).abs();
            Panel { rect, value, error }
        };

        let xc = panels(x0, x1, x_breaks);
        let yc = panels(y0, y1, y_breaks);
        let mut heap = std::collections::BinaryHeap::new();
        for xw in xc.windows(2) {
            for yw in yc.windows(2) {
                heap.push(eval([xw[0], xw[1], yw[0], yw[1]]));
            }
        }
        loop {
            let value: f64 = heap.iter().map(|p| p.value).sum();
            let error: f64 = heap.iter().map(|p| p.error).sum();
            if error <= (self.rel_tol * value.abs()).max(self.abs_tol) {
                return Ok(value);
            }
            if heap.len() + 3 > self.max_panels {
                return Err(Error::NonConvergence(format!(
                    "error estimate {error:.3e} on |I| = {:.6e} after {} panels",
                    value.abs(),
                    heap.len()
                )));
            }
            let worst = heap.pop().expect("at least one panel");
            let [a, b, c, d] = worst.rect;
            let xm = 0.5 * (a + b);
            let ym = 0.5 * (c + d);
            for sub in [[a, xm, c, ym], [xm, b, c, ym], [a, xm, ym, d], [xm, b, ym, d]] {
                heap.push(eval(sub));
            }
        }
    }
}

fn rect_rule<F: Fn(f64, f64) -> f64>(rule: &GaussLegendre, [x0, x1, y0, y1]: [f64; 4], f: &F) -> f64 {
    let mut total = 0.0;
    for (y, wy) in rule.mapped(y0, y1) {
        let mut row = 0.0;
        for (x, wx) in rule.mapped(x0, x1) {
            row += wx * f(x, y);
        }
        total += wy * row;
    }
    total
}
