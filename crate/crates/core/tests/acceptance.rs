//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Positional arguments filter criteria by substring. The full-scale
//! error-vs-k reproduction runs only with `--include-ignored` (or
//! `--ignored`), since it takes hours.

use std::process::ExitCode;
use std::time::Instant;

use plnn_core::agent_knn::{global_knn, kt_knn, oracle_knn, NeighborSet, Selector};
use plnn_core::alt_similarity::{split_cluster, CandidateSet};
use plnn_core::experiment::{run_error_vs_k, ExperimentConfig, World};
use plnn_core::latent::{sample_population, LatentPoint, ModelConfig};
use plnn_core::plackett_luce::{exact_order_prob, restrict_ranking, sample_ranking, sample_rankings, Ranking, Sampler};
use plnn_core::rank_metrics::{enkt_feature, feature_matrix, kendall_tau, kendall_tau_naive, nkt, PairingPlan};
use plnn_core::rng::{derive_seed, substream, StreamKind};
use plnn_core::theory::{self, expected_nkt_curve, log_grid, unit_grid, ClaimStatus, Integrator};
use plnn_core::{Method, Report};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn report_detail(r: &Report) -> String {
    r.claims
        .iter()
        .map(|c| format!("{}={:?}", c.name, c.status))
        .collect::<Vec<_>>()
        .join(" ")
}

fn sampler_fidelity() -> Outcome {
    const SAMPLES: usize = 1_000_000;
    let x = LatentPoint::from(0.35);
    let alts: Vec<LatentPoint> = [0.1, 0.5, 0.9].iter().map(|&y| LatentPoint::from(y)).collect();
    let orders: Vec<[usize; 3]> = vec![[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut pass = true;
    let mut worst = 0.0f64;
    for (s, sampler) in [Sampler::Sequential, Sampler::GumbelMax].into_iter().enumerate() {
        let mut counts = [0usize; 6];
        let mut rng = substream(1, StreamKind::Trial, s as u64);
        for _ in 0..SAMPLES {
            let r = sample_ranking(&x, &alts, sampler, &mut rng).unwrap();
            let o = r.order();
            let idx = orders
                .iter()
                .position(|p| p.iter().zip(o).all(|(&a, &b)| a as u32 == b))
                .unwrap();
            counts[idx] += 1;
        }
        for (idx, order) in orders.iter().enumerate() {
            let p = exact_order_prob(&x, &alts, order).unwrap();
            let freq = counts[idx] as f64 / SAMPLES as f64;
            let se = (p * (1.0 - p) / SAMPLES as f64).sqrt();
            let z = (freq - p).abs() / se;
            worst = worst.max(z);
            pass &= z <= 4.0;
        }
    }
    outcome(pass, format!("max |z| = {worst:.2} over 6 orders x 2 samplers (limit 4)"))
}

fn estimator_unbiasedness() -> Outcome {
    const DRAWS: usize = 10_000;
    const M: usize = 30;
    let mut pos_rng = substream(2, StreamKind::Planted, 0);
    let mut pass = true;
    let mut worst = 0.0f64;
    for case in 0..5u64 {
        let x_i = LatentPoint::from(pos_rng.random::<f64>());
        let x_j = LatentPoint::from(pos_rng.random::<f64>());
        let alts: Vec<LatentPoint> = (0..M).map(|_| LatentPoint::from(pos_rng.random::<f64>())).collect();
        let mut rng = substream(2, StreamKind::Trial, case);
        let (mut enkt, mut full) = (Vec::with_capacity(DRAWS), Vec::with_capacity(DRAWS));
        for d in 0..DRAWS {
            let ri = sample_ranking(&x_i, &alts, Sampler::GumbelMax, &mut rng).unwrap();
            let rj = sample_ranking(&x_j, &alts, Sampler::GumbelMax, &mut rng).unwrap();
            let pairing = PairingPlan::new(M, derive_seed(case, d as u64)).full();
            enkt.push(enkt_feature(&ri, &rj, &pairing).unwrap());
            full.push(nkt(&ri, &rj).unwrap());
        }
        let (m1, s1) = mean_se(&enkt);
        let (m2, s2) = mean_se(&full);
        let z = (m1 - m2).abs() / (s1 * s1 + s2 * s2).sqrt();
        worst = worst.max(z);
        pass &= z < 3.0;
    }
    outcome(pass, format!("max gap / combined stderr = {worst:.2} over 5 pairs (limit 3)"))
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn kt_bias_quadrature() -> Outcome {
    let queries = [0.05, 0.1, 0.2, 0.25, 0.75, 0.9];
    let r = theory::theorem_bias_check(&queries, 200, 1e-8).unwrap();
    let min_gap = r
        .claims
        .iter()
        .flat_map(|c| c.numbers.iter())
        .filter(|(k, _)| k.starts_with("min_"))
        .map(|(_, v)| *v)
        .fold(f64::INFINITY, f64::min);
    outcome(
        r.status == ClaimStatus::Pass,
        format!("{}; smallest monotone step {min_gap:.3e}", report_detail(&r)),
    )
}

fn two_alternative_example() -> Outcome {
    let r = theory::example_one(1e-6);
    let d = r.claim("expected_kt_derivative_positive").unwrap();
    let needed = ["deterministic_boundary", "expected_kt_derivative_positive", "tail_beats_agent_position"];
    let pass = needed.iter().all(|n| r.claim(n).unwrap().status == ClaimStatus::Pass);
    outcome(
        pass,
        format!(
            "boundary {} ; dE/dx2 at 0, 0.25, 0.5 = {:.3e}, {:.3e}, {:.3e}; E(-1) {:.5} vs E(0.5) {:.5}",
            r.claim("deterministic_boundary").unwrap().numbers["boundary"],
            d.numbers["analytic_at_0"],
            d.numbers["analytic_at_0.25"],
            d.numbers["analytic_at_0.5"],
            r.claim("tail_beats_agent_position").unwrap().numbers["expected_kt_at_-1"],
            r.claim("tail_beats_agent_position").unwrap().numbers["expected_kt_at_0.5"],
        ),
    )
}

fn bias_witness() -> Outcome {
    let mut kt_hits = 0;
    let mut global_hits = 0;
    let mut oracle_hits = 0;
    let mut means = Vec::new();
    for seed in 0..5u64 {
        let cfg = ModelConfig::uniform(500, 2000, 1, 1.0, seed);
        let mut pop = sample_population(&cfg).unwrap();
        pop.agents[0] = LatentPoint::from(0.2);
        let rankings = sample_rankings(&cfg, &pop, Sampler::GumbelMax).unwrap();
        let features = feature_matrix(&rankings, seed).unwrap();
        let mean = |s: &NeighborSet| s.members.iter().map(|&j| pop.agents[j].coords()[0]).sum::<f64>() / s.members.len() as f64;
        let kt = mean(&kt_knn(&rankings, 0, 10).unwrap());
        let gl = mean(&global_knn(&features, 0, Selector::TopK { k: 10 }).unwrap());
        let or = mean(&oracle_knn(&pop, 0, 10).unwrap());
        kt_hits += (kt < 0.1) as usize;
        global_hits += ((gl - 0.2).abs() <= 0.05) as usize;
        oracle_hits += ((or - 0.2).abs() <= 0.05) as usize;
        means.push(format!("({kt:.3}, {gl:.3}, {or:.3})"));
    }
    outcome(
        kt_hits >= 4 && global_hits >= 4 && oracle_hits >= 4,
        format!(
            "seeds hitting: kt<0.1 {kt_hits}/5, global {global_hits}/5, oracle {oracle_hits}/5; (kt, global, oracle) means {}",
            means.join(" ")
        ),
    )
}

fn error_ordering_reduced() -> Outcome {
    let cfg = ExperimentConfig::reduced();
    let report = run_error_vs_k(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for &seed in &cfg.replicate_seeds {
        let best = |m| report.best_row(m, seed).unwrap().error_mean;
        let (kt, gl, or) = (best(Method::KtKnn), best(Method::GlobalKnn), best(Method::Oracle));
        pass &= or <= gl && gl < kt && kt - gl > 0.01;
        parts.push(format!("seed {seed}: oracle {or:.4} global {gl:.4} kt {kt:.4}"));
    }
    outcome(pass, parts.join("; "))
}

fn error_full_scale() -> Outcome {
    let cfg = ExperimentConfig::full();
    let report = run_error_vs_k(&cfg).unwrap();
    let seed = cfg.replicate_seeds[0];
    let targets = [(Method::KtKnn, 0.0466), (Method::GlobalKnn, 0.0258), (Method::Oracle, 0.0246)];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, target) in targets {
        let best = report.best_row(m, seed).unwrap();
        pass &= (best.error_mean - target).abs() <= 0.010;
        parts.push(format!("{m}: {:.4} at k={} (target {target})", best.error_mean, best.k));
    }
    outcome(pass, parts.join("; "))
}

fn bound_shapes() -> Outcome {
    let grid = log_grid(0.02, 0.2, 8);
    let agent = theory::agent_bound_check(&grid, 10_000, 7).unwrap();
    let item = theory::item_bound_check(&grid, 10_000, 7).unwrap();
    let fit = |r: &Report| {
        let c = r.claim("loglog_slope_between_1_and_2").unwrap();
        format!("slope {:.3} R2 {:.4}", c.numbers["slope"], c.numbers["r_squared"])
    };
    let shape_ok = |r: &Report| {
        r.claim("loglog_slope_between_1_and_2").unwrap().status == ClaimStatus::Pass
            && r.claim("statistical_power").unwrap().status == ClaimStatus::Pass
    };
    outcome(
        shape_ok(&agent) && shape_ok(&item),
        format!("agent distance {} ; sign statistic {}", fit(&agent), fit(&item)),
    )
}

fn split_cluster_planted() -> Outcome {
    const TRIALS: u64 = 100;
    const DELTA: f64 = 0.02;
    const M: usize = 100;
    let n = (50.0 / (DELTA * DELTA)).round() as usize;
    let mut good = 0;
    for trial in 0..TRIALS {
        let cfg = ModelConfig::uniform(n, M, 1, 1.0, derive_seed(8, trial));
        let mut pop = sample_population(&cfg).unwrap();
        let mut rng = substream(8, StreamKind::Planted, trial);
        pop.alternatives[0] = LatentPoint::from(0.2);
        for i in 1..=20 {
            pop.alternatives[i] = LatentPoint::from(0.2 + rng.random_range(-DELTA..=DELTA));
        }
        for i in 21..=40 {
            pop.alternatives[i] = LatentPoint::from(0.8 + rng.random_range(-DELTA..=DELTA));
        }
        let rankings = sample_rankings(&cfg, &pop, Sampler::GumbelMax).unwrap();
        let candidates = CandidateSet { query: 0, members: (0..=40).collect(), ell: 1.0 };
        let out = split_cluster(&rankings, 0, &candidates).unwrap();
        let near_kept = (1..=20).all(|i| out.kept.binary_search(&i).is_ok());
        let mirror_dropped = (21..=40).all(|i| out.kept.binary_search(&i).is_err());
        good += (near_kept && mirror_dropped) as usize;
    }
    outcome(good >= 95, format!("{good}/{TRIALS} trials exact with n = {n}, m = {M} (need 95)"))
}

fn all_permutations(s: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for _ in 0..s {
        let mut next = Vec::new();
        for p in &out {
            for j in (0..s as u32).filter(|j| !p.contains(j)) {
                let mut q = p.clone();
                q.push(j);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

fn metric_and_property_suites() -> Outcome {
    let mut failures = Vec::new();
    // Kendall-tau metric axioms over every permutation triple.
    for s in 2..=5 {
        let perms: Vec<Ranking> = all_permutations(s).into_iter().map(|p| Ranking::from_order(p, s).unwrap()).collect();
        let n = perms.len();
        let mut d = vec![0u64; n * n];
        for a in 0..n {
            for b in 0..n {
                let v = kendall_tau(&perms[a], &perms[b]).unwrap();
                if v != kendall_tau_naive(&perms[a], &perms[b]).unwrap() {
                    failures.push(format!("merge vs naive s={s}"));
                }
                d[a * n + b] = v;
            }
        }
        for a in 0..n {
            for b in 0..n {
                if (d[a * n + b] == 0) != (a == b) || d[a * n + b] != d[b * n + a] {
                    failures.push(format!("identity/symmetry s={s}"));
                }
                for c in 0..n {
                    if d[a * n + c] > d[a * n + b] + d[b * n + c] {
                        failures.push(format!("triangle s={s}"));
                    }
                }
            }
        }
    }
    // Restriction commutes with itself and preserves Kendall-tau on the overlap.
    for p in all_permutations(5) {
        let r = Ranking::from_order(p, 5).unwrap();
        for mask_a in 1u32..32 {
            let a: Vec<u32> = (0..5).filter(|j| mask_a >> j & 1 == 1).collect();
            let ra = restrict_ranking(&r, &a).unwrap();
            for mask_b in [0b00111u32, 0b10101, 0b11010] {
                let ab: Vec<u32> = a.iter().copied().filter(|j| mask_b >> j & 1 == 1).collect();
                if ab.is_empty() {
                    continue;
                }
                if restrict_ranking(&ra, &ab).unwrap() != restrict_ranking(&r, &ab).unwrap() {
                    failures.push("restriction commutation".into());
                }
            }
            let full = Ranking::from_order(vec![4, 3, 2, 1, 0], 5).unwrap();
            if a.len() >= 2
                && kendall_tau(&ra, &full).unwrap() != kendall_tau(&ra, &restrict_ranking(&full, &a).unwrap()).unwrap() {
                failures.push("restriction vs overlap".into());
            }
        }
    }
    // Bit-identical results on one thread and four.
    let run = || {
        let model = ModelConfig::uniform(40, 60, 2, 5.0, 11);
        let world = World::sample(&model, Sampler::GumbelMax).unwrap();
        let mut cfg = ExperimentConfig::reduced();
        cfg.model = ModelConfig::uniform(40, 60, 1, 5.0, 0);
        cfg.k_grid = vec![3, 9];
        cfg.pair_sample_size = 100;
        cfg.replicate_seeds = vec![4, 5];
        let mut csv = Vec::new();
        run_error_vs_k(&cfg).unwrap().write_csv(&mut csv).unwrap();
        let mc = expected_nkt_curve(0.3, &unit_grid(20), Integrator::MonteCarlo { samples: 500, seed: 3 }).unwrap();
        (world.features, csv, mc)
    };
    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let one = pool(1).install(run);
    let four = pool(4).install(run);
    if one.0 != four.0 || one.1 != four.1 || one.2 != four.2 {
        failures.push("thread-count determinism".into());
    }
    failures.dedup();
    let pass = failures.is_empty();
    outcome(
        pass,
        if pass {
            "metric axioms s<=5, restriction commutation, 1 vs 4 threads: zero failures".to_string()
        } else {
            format!("failures: {}", failures.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let long = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();

    let criteria: Vec<(&str, fn() -> Outcome, bool)> = vec![
        ("sampler_fidelity", sampler_fidelity, false),
        ("estimator_unbiasedness", estimator_unbiasedness, false),
        ("kt_bias_quadrature", kt_bias_quadrature, false),
        ("two_alternative_example", two_alternative_example, false),
        ("bias_witness_system", bias_witness, false),
        ("error_ordering_reduced", error_ordering_reduced, false),
        ("error_full_scale", error_full_scale, true),
        ("bound_shapes", bound_shapes, false),
        ("split_cluster_planted", split_cluster_planted, false),
        ("metric_and_property_suites", metric_and_property_suites, false),
    ];

    let mut failed = 0;
    for (name, check, is_long) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        if is_long && !long {
            println!("acceptance {name}: SKIPPED (long run, pass --include-ignored)");
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("acceptance {name}: {verdict} [{:.1}s] {}", start.elapsed().as_secs_f64(), o.detail);
        failed += (!o.pass) as usize;
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion/criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
