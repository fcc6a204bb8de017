//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run a subset by number: `cargo test --test acceptance -- 3 7`.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use symtc::harness::{
    convergence_run, max3lin_trials, phase_sweep, rmse_ratios, spectral_sweep, ConvergenceConfig, PhaseRow,
    PhaseSweepConfig, SpectralSweepConfig,
};
use symtc::max3lin::{counterexample_report, PUBLISHED_SOLUTIONS};
use symtc::rtpm::clip_to_incoherent;
use symtc::sampling::sample_bernoulli;
use symtc::spectral::{
    degree_bound_audit, discrepancy_audit, hypergraph_stats, loglog_slope, median, DiscrepancyConfig,
    SubsetSampler, TripartiteHypergraph,
};
use symtc::altmin::inner_update;
use symtc::tensor::{frobenius_error_bound_check, generate_orthogonal_model};
use symtc::FactorModel;

const RECOVERY_RMSE: f64 = 1e-7;

// 1
const C1_N: usize = 50;
const C1_TRIALS: usize = 40;
const C1_ALPHA_STAR_MAX: f64 = 12.0;
const C1_HIGH_RATE: f64 = 0.9;
const C1_LOW_RATE: f64 = 0.1;
// 2
const C2_NS: [usize; 3] = [30, 50, 70];
const C2_ALPHA: (f64, f64) = (1.0, 5.5);
const C2_TRIALS: usize = 100;
const C2_GAP: f64 = 0.15;
// 3
const C3_SEEDS: u64 = 20;
const C3_RATIO: f64 = 0.9;
const C3_REGIME: (f64, f64) = (1e-1, 1e-12);
const C3_TRACK: f64 = 10.0;
// 4
const C4_SLOPE: (f64, f64) = (-0.8, -0.2);
// 5
const C5_SEEDS: u64 = 100;
const C5_PASS_FRACTION: f64 = 0.99;
// 6
const C6_SEEDS: u64 = 20;
const C6_TRIPLES: usize = 10_000;
const C6_XI: (f64, f64) = (8.0, 40.0);
// 7, 8, 9
const C7_TRIALS: u64 = 1000;
const C8_TRIALS: u64 = 1000;
const C9_INSTANCES: u64 = 200;
const C9_TOL: f64 = 1e-10;
// 11
const C11_N: usize = 100;
const C11_SEEDS: usize = 20;
const C11_RATE: f64 = 0.9;
const C11_OUTER_ITERS: usize = 50;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn sweep(n_list: Vec<usize>, alpha: (f64, f64), steps: usize, trials: usize, seed: u64) -> Vec<PhaseRow> {
    let cfg = PhaseSweepConfig {
        n_list,
        alpha_min: alpha.0,
        alpha_max: alpha.1,
        alpha_steps: steps,
        trials,
        threshold: RECOVERY_RMSE,
        seed,
        ..PhaseSweepConfig::default()
    };
    phase_sweep(&cfg).expect("phase sweep")
}

fn c1_recovery_regime() -> Verdict {
    let rows = sweep(vec![C1_N], (1.0, 12.0), 12, C1_TRIALS, 101);
    let rates: Vec<(f64, f64)> = rows.iter().map(|r| (r.alpha, r.recovery_rate)).collect();
    let alpha_star = rates
        .iter()
        .map(|&(a, _)| a)
        .find(|&a| rates.iter().filter(|&&(b, _)| b >= a).all(|&(_, q)| q >= C1_HIGH_RATE));
    let low_ok = rates.iter().filter(|&&(a, _)| a <= 1.0).all(|&(_, q)| q <= C1_LOW_RATE);
    let curve: Vec<String> = rates.iter().map(|(a, q)| format!("{a}:{q:.3}")).collect();
    verdict(
        alpha_star.is_some_and(|a| a <= C1_ALPHA_STAR_MAX) && low_ok,
        format!("alpha* = {alpha_star:?}, low end ok = {low_ok}, rates [{}]", curve.join(" ")),
    )
}

fn c2_universal_curve() -> Verdict {
    let rows = sweep(C2_NS.to_vec(), C2_ALPHA, 10, C2_TRIALS, 202);
    let grid: Vec<f64> = rows.iter().filter(|r| r.n == C2_NS[0]).map(|r| r.alpha).collect();
    let mut worst = (0.0f64, 0.0f64);
    let mut table = Vec::new();
    for &a in &grid {
        let at: Vec<f64> = rows.iter().filter(|r| r.alpha == a).map(|r| r.recovery_rate).collect();
        let gap = at.iter().cloned().fold(f64::MIN, f64::max) - at.iter().cloned().fold(f64::MAX, f64::min);
        if gap > worst.0 {
            worst = (gap, a);
        }
        table.push(format!("{a}:{}", at.iter().map(|q| format!("{q:.2}")).collect::<Vec<_>>().join("/")));
    }
    verdict(
        worst.0 <= C2_GAP,
        format!("max gap {:.3} at alpha {}; rates n=30/50/70 [{}]", worst.0, worst.1, table.join(" ")),
    )
}

fn c3_linear_convergence() -> Verdict {
    let mut worst_ratios = Vec::new();
    let mut track_violations = 0;
    let mut recovered = 0;
    for seed in 0..C3_SEEDS {
        let run = convergence_run(&ConvergenceConfig::new(50, 3, 12.0, 300 + seed)).expect("run");
        if !run.recovered {
            continue;
        }
        recovered += 1;
        let ratios = rmse_ratios(&run.trace, C3_REGIME.0, C3_REGIME.1);
        if let Some(w) = ratios.iter().cloned().reduce(f64::max) {
            worst_ratios.push(w);
        }
        for row in run.trace.rows.iter().filter(|r| r.iter >= 1) {
            let rmse = row.rmse.expect("traced against truth");
            if rmse > C3_REGIME.1 {
                let q = row.fit_error / rmse;
                if !(1.0 / C3_TRACK..=C3_TRACK).contains(&q) {
                    track_violations += 1;
                }
            }
        }
    }
    let med = if worst_ratios.is_empty() { f64::INFINITY } else { median(&worst_ratios) };
    verdict(
        recovered > 0 && med <= C3_RATIO && track_violations == 0,
        format!(
            "{recovered}/{C3_SEEDS} recovered, median worst ratio {med:.3}, fit/rmse outside [0.1, 10]: {track_violations}"
        ),
    )
}

fn c4_spectral_slope() -> Verdict {
    let rows = spectral_sweep(&SpectralSweepConfig::new(100, vec![16.0, 64.0, 256.0], 404)).expect("sweep");
    let xs: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let slope = loglog_slope(&xs, &ys).expect("slope");
    let medians: Vec<String> = [16.0, 64.0, 256.0]
        .iter()
        .map(|&a| {
            let v: Vec<f64> = rows.iter().filter(|r| r.alpha == a).map(|r| r.ratio).collect();
            format!("{a}:{:.3e}", median(&v))
        })
        .collect();
    verdict(
        (C4_SLOPE.0..=C4_SLOPE.1).contains(&slope),
        format!("slope {slope:.3}, medians [{}]", medians.join(" ")),
    )
}

fn c5_degree_bounds() -> Verdict {
    let n = 50usize;
    let nf = n as f64;
    let p = nf.ln() / (nf * nf);
    let delta = nf.powi(-5);
    let passed = (0..C5_SEEDS)
        .filter(|&s| {
            let g = TripartiteHypergraph::random([n; 3], p, 500 + s).expect("graph");
            degree_bound_audit(&hypergraph_stats(&g), p, delta).expect("audit").all_pass()
        })
        .count();
    let frac = passed as f64 / C5_SEEDS as f64;
    verdict(frac >= C5_PASS_FRACTION, format!("{passed}/{C5_SEEDS} seeds pass all six bounds"))
}

fn c6_discrepancy() -> Verdict {
    let n = 40usize;
    let p = 20.0 / (n as f64).powf(1.5);
    let mut checked = 0;
    let mut failed = 0;
    for s in 0..C6_SEEDS {
        let g = TripartiteHypergraph::random([n; 3], p, 600 + s).expect("graph");
        for (k, sampler) in [SubsetSampler::Random, SubsetSampler::LevelSet].into_iter().enumerate() {
            let cfg = DiscrepancyConfig {
                p,
                xi1: C6_XI.0,
                xi2: C6_XI.1,
                sampler,
                samples: C6_TRIPLES / 2,
                seed: 6000 + 2 * s + k as u64,
            };
            let samples = discrepancy_audit(&g, &cfg).expect("audit");
            checked += samples.len();
            failed += samples.iter().filter(|d| !d.either_pass()).count();
        }
    }
    verdict(failed == 0, format!("{checked} subset triples checked, {failed} violate both inequalities"))
}

fn c7_clipping() -> Verdict {
    let n = 50;
    let mut g = rng(700);
    let mut worst_dist = 0.0f64;
    let mut worst_mu = 0.0f64;
    let mut failures = 0;
    for t in 0..C7_TRIALS {
        let r = 1 + (t % 3) as usize;
        let truth = generate_orthogonal_model(n, r, &vec![1.0; r], 7000 + t).expect("truth");
        let mu = truth.incoherence();
        let alpha = g.random_range(1e-6..0.25);
        let vecs: Vec<Vec<f64>> = truth
            .vectors()
            .iter()
            .map(|u| {
                let d = alpha * g.random_range(0.0..=1.0);
                // Alternate diffuse and single-coordinate perturbations; the
                // latter put the largest possible mass where clipping acts.
                let w = if g.random_bool(0.5) {
                    gaussian(n, &mut g)
                } else {
                    let mut e = vec![0.0; n];
                    e[g.random_range(0..n)] = 1.0;
                    e
                };
                rotate_towards(u, &w, d)
            })
            .collect();
        let est = FactorModel::new(n, truth.sigmas().to_vec(), vecs).expect("estimate");
        let out = clip_to_incoherent(&est, mu).expect("clip");
        let d = out
            .vectors()
            .iter()
            .zip(truth.vectors())
            .map(|(a, b)| dist(a, b) / alpha)
            .fold(0.0f64, f64::max);
        let m = out.incoherence() / mu;
        worst_dist = worst_dist.max(d);
        worst_mu = worst_mu.max(m);
        if d > 3.0 || m > 2.0 {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!("{failures} failures; worst distance/alpha {worst_dist:.3}, worst mu_out/mu {worst_mu:.3}"),
    )
}

fn c8_frobenius_bound() -> Verdict {
    let n = 20;
    let mut g = rng(800);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for t in 0..C8_TRIALS {
        let r = 1 + (t % 3) as usize;
        let sigmas: Vec<f64> = (0..r)
            .map(|_| g.random_range(0.2..3.0) * if g.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let truth = generate_orthogonal_model(n, r, &sigmas, 8000 + t).expect("truth");
        let eps = g.random_range(1e-6..0.1);
        // Half the trials sit exactly on the allowed perturbation radius.
        let edge = t % 2 == 0;
        let mut est_sigmas = Vec::new();
        let mut est_vecs = Vec::new();
        for (s, u) in truth.sigmas().iter().zip(truth.vectors()) {
            let d = if edge { eps } else { eps * g.random_range(0.0..=1.0) };
            let k = if edge { if g.random_bool(0.5) { 1.0 } else { -1.0 } } else { g.random_range(-1.0..=1.0) };
            est_vecs.push(rotate_towards(u, &gaussian(n, &mut g), d));
            est_sigmas.push(s * (1.0 + k * eps));
        }
        let est = FactorModel::new(n, est_sigmas, est_vecs).expect("estimate");
        let library = frobenius_error_bound_check(&truth, &est, eps).expect("preconditions hold");
        let dt = dense_model(&truth);
        let measured = frob(&sub(&dt, &dense_model(&est)));
        let bound = 4.0 * (r as f64).sqrt() * frob(&dt) * eps;
        worst = worst.max(measured / bound);
        if !library || measured > bound {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures} failures; worst measured/bound {worst:.3}"))
}

fn c9_inner_update_oracle() -> Verdict {
    let mut g = rng(900);
    let mut worst = 0.0f64;
    for t in 0..C9_INSTANCES {
        let n = g.random_range(3..=10usize);
        let r = g.random_range(1..=3usize.min(n));
        let p = g.random_range(0.2..0.9);
        let truth = random_model(n, r, 9000 + t);
        let omega = sample_bernoulli(&truth, p, 9500 + t).expect("sample");
        let model = random_model(n, r, 9900 + t);
        let q = g.random_range(0..r);
        let (v, _) = inner_update(&omega, &model, q, 1e-14).expect("update");
        let want = normal_equations_update(&omega, &model, q);
        let diff = v.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max);
        worst = worst.max(diff);
    }
    verdict(worst <= C9_TOL, format!("worst coordinate difference {worst:.2e} over {C9_INSTANCES} instances"))
}

fn c10_counterexample() -> Verdict {
    let rep = counterexample_report().expect("report");
    let published: Vec<Vec<i8>> = PUBLISHED_SOLUTIONS.iter().map(|s| s.to_vec()).collect();
    let missing: Vec<&Vec<i8>> = published.iter().filter(|s| !rep.solutions.contains(s)).collect();
    let extra: Vec<&Vec<i8>> = rep.solutions.iter().filter(|s| !published.contains(s)).collect();
    verdict(
        rep.connected && rep.solution_count == 4 && rep.matches_published,
        format!(
            "connected = {} via {:?}, {} solutions; published-only {:?}, found-only {:?}",
            rep.connected, rep.sequence, rep.solution_count, missing, extra
        ),
    )
}

fn c11_planted_max3lin() -> Verdict {
    let nf = C11_N as f64;
    let p = 40.0 * nf.ln() / nf.powf(1.5);
    let rows = max3lin_trials(C11_N, p, C11_SEEDS, 1100, C11_OUTER_ITERS).expect("trials");
    let ok = rows.iter().filter(|r| r.success).count();
    let rate = ok as f64 / rows.len() as f64;
    verdict(rate >= C11_RATE, format!("{ok}/{} instances fully satisfied at p = {p:.4}", rows.len()))
}

fn main() {
    let criteria: [(usize, &str, fn() -> Verdict); 11] = [
        (1, "exact-recovery regime", c1_recovery_regime),
        (2, "universal-curve collapse", c2_universal_curve),
        (3, "linear convergence", c3_linear_convergence),
        (4, "spectral concentration slope", c4_spectral_slope),
        (5, "degree bounds", c5_degree_bounds),
        (6, "discrepancy audit", c6_discrepancy),
        (7, "clipping lemma", c7_clipping),
        (8, "Frobenius bound", c8_frobenius_bound),
        (9, "inner-update oracle", c9_inner_update_oracle),
        (10, "MAX-3LIN counterexample", c10_counterexample),
        (11, "MAX-3LIN planted recovery", c11_planted_max3lin),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {status} {name} ({:.1}s): {}", start.elapsed().as_secs_f64(), v.detail);
        if !v.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
