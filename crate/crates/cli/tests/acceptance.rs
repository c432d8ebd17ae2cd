//! Exit-gate checks. Each criterion prints one `PASS`/`FAIL` line; the test
//! fails if any criterion does.
//!
//! Run with `cargo test -p fedpoison-cli --release --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use fedpoison_cli::config::RunConfig;
use fedpoison_cli::{cmd_run, parse_config, RunOptions};
use fedpoison_core::aggregation::{copod_scores, dos_aggregate, krum, trimmed_mean, KRUM_TIE_RTOL};
use fedpoison_core::attacks::{
    self, binary_search_scale, label_flip, AttackContext, Extreme, MaliciousTraining,
};
use fedpoison_core::federation::{
    local_train_grads, local_train_params, run_experiment, DefenseKind, ExperimentConfig,
    OptimizerChoice, Simulation,
};
use fedpoison_core::metrics::roc_auc_binary;
use fedpoison_core::rng::{rng_for, SimRng};
use fedpoison_core::train::TrainConfig;
use fedpoison_core::{Batch, Dataset, LossSign, Matrix, ModelSpec, ModelState, ParamVector, UpdateKind};
use rand::Rng;
use rayon::prelude::*;

const SEEDS: [u64; 3] = [0, 1, 2];

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load(name: &str) -> RunConfig {
    parse_config(&config_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Verdict {
    id: u32,
    passed: bool,
    detail: String,
}

fn report(id: u32, passed: bool, detail: String) -> Verdict {
    println!("{} criterion {id}: {detail}", if passed { "PASS" } else { "FAIL" });
    Verdict { id, passed, detail }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Median over [`SEEDS`] of the final-round AUC.
fn median_final_auc(rc: &RunConfig, attack: &str, defense: &str, tweak: impl Fn(&mut ExperimentConfig) + Sync) -> f64 {
    let mut base = rc.with_matrix_cell(attack, defense).expect("valid cell");
    tweak(&mut base);
    let aucs: Vec<f64> = SEEDS
        .par_iter()
        .map(|&seed| {
            let cfg = ExperimentConfig { seed, ..base.clone() };
            run_experiment(&cfg).expect("run").last().unwrap().test_auc
        })
        .collect();
    median(aucs)
}

// ---------------------------------------------------------------- criterion 1

type Check = (&'static str, Result<(), String>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn random_vectors(rng: &mut SimRng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()
}

fn sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn krum_brute_force(v: &[Vec<f64>], f: usize) -> usize {
    let n = v.len();
    let m = n - f - 2;
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << others.len()) {
                if mask.count_ones() as usize == m {
                    let s = (0..others.len())
                        .filter(|b| mask & (1 << b) != 0)
                        .map(|b| sq(&v[i], &v[others[b]]))
                        .sum::<f64>();
                    best = best.min(s);
                }
            }
            best
        })
        .collect();
    (0..n).fold(0, |b, i| if scores[i] < scores[b] * (1.0 - KRUM_TIE_RTOL) { i } else { b })
}

fn trimmed_brute_force(v: &[Vec<f64>], k: usize) -> Vec<f64> {
    (0..v[0].len())
        .map(|j| {
            let mut col: Vec<f64> = v.iter().map(|x| x[j]).collect();
            for _ in 0..k {
                let (lo, _) = col.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                col.remove(lo);
                let (hi, _) = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
                col.remove(hi);
            }
            col.iter().sum::<f64>() / col.len() as f64
        })
        .collect()
}

fn check_aggregator_oracles() -> Result<(), String> {
    let mut rng = rng_for(101, 0, &[]);
    for case in 0..200 {
        let n = rng.random_range(3..=7);
        let d = rng.random_range(1..=3);
        let v = random_vectors(&mut rng, n, d);
        let views: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        if n >= 4 {
            let f = rng.random_range(0..=n - 3);
            let got = krum(&views, f).map_err(|e| e.to_string())?.selected.unwrap();
            ensure(got == krum_brute_force(&v, f), || format!("KRUM case {case}: {got}"))?;
        }
        let k = rng.random_range(0..=(n - 1) / 2);
        let got = trimmed_mean(&views, k).map_err(|e| e.to_string())?.aggregate;
        let want = trimmed_brute_force(&v, k);
        for (a, b) in got.iter().zip(&want) {
            ensure((a - b).abs() <= 1e-12 * (1.0 + b.abs()), || format!("trimmed mean case {case}: {a} vs {b}"))?;
        }
    }
    Ok(())
}

fn check_auc_oracle() -> Result<(), String> {
    let mut rng = rng_for(102, 0, &[]);
    for case in 0..100 {
        let n = rng.random_range(2..=500);
        // coarse scores so ties are common
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64) / 4.0).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let (mut wins, mut pairs) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        let got = roc_auc_binary(&scores, &labels).map_err(|e| e.to_string())?;
        ensure((got - wins / pairs).abs() <= 1e-12, || format!("AUC case {case}: {got} vs {}", wins / pairs))?;
    }
    Ok(())
}

fn check_gradients() -> Result<(), String> {
    let mut worst = 0.0f64;
    for (layers, seed) in [(vec![3, 5, 2], 1u64), (vec![4, 6, 5, 3], 2), (vec![6, 3], 3)] {
        let spec = ModelSpec::new(layers.clone()).unwrap();
        let model = ModelState::init(&spec, seed);
        let mut rng = rng_for(seed, 9, &[]);
        let rows = 7;
        let inputs = Matrix::new(rows, layers[0], (0..rows * layers[0]).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap();
        let labels = (0..rows).map(|_| rng.random_range(0..*layers.last().unwrap())).collect();
        let batch = Batch::new(inputs, labels).unwrap();
        for sign in [LossSign::Minimize, LossSign::Maximize] {
            let (_, grad) = model.loss_and_grad(&batch, sign).map_err(|e| e.to_string())?;
            for i in 0..grad.len() {
                let h = 1e-5;
                let mut p = model.params().clone();
                p[i] += h;
                let up = ModelState::from_params(&spec, p.clone()).unwrap().loss(&batch, sign).unwrap();
                p[i] -= 2.0 * h;
                let down = ModelState::from_params(&spec, p).unwrap().loss(&batch, sign).unwrap();
                let numeric = (up - down) / (2.0 * h);
                let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    ensure(worst <= 1e-4, || format!("worst relative error {worst:.2e}"))
}

fn check_dos() -> Result<(), String> {
    let mut rng = rng_for(104, 0, &[]);
    for case in 0..100 {
        let n = rng.random_range(3..=10);
        let d = rng.random_range(1..=6);
        let v = random_vectors(&mut rng, n, d);
        let views: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
        let w = dos_aggregate(&views).map_err(|e| e.to_string())?.weights;
        let total: f64 = w.iter().sum();
        ensure(w.iter().all(|x| *x >= 0.0) && (total - 1.0).abs() <= 1e-12, || format!("DOS case {case}: {w:?}"))?;
    }
    // nine updates near the origin and one far away
    let mut v: Vec<Vec<f64>> = (0..9).map(|i| vec![0.01 * i as f64, -0.02 * i as f64, 0.005]).collect();
    v.push(vec![50.0, 40.0, -30.0]);
    let views: Vec<&[f64]> = v.iter().map(|x| x.as_slice()).collect();
    let w = dos_aggregate(&views).map_err(|e| e.to_string())?.weights;
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(w[9] == min && w[9] < w[..9].iter().copied().fold(f64::INFINITY, f64::min), || format!("outlier weights {w:?}"))?;
    let copod = copod_scores(&Matrix::new(4, 1, vec![1.0, 2.0, 3.0, 100.0]).unwrap());
    ensure(copod[3] > copod[..3].iter().copied().fold(f64::NEG_INFINITY, f64::max), || format!("COPOD {copod:?}"))
}

fn check_label_flip() -> Result<(), String> {
    let mut rng = rng_for(105, 0, &[]);
    for _ in 0..100 {
        let c = rng.random_range(2..=10);
        let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..c)).collect();
        let once = label_flip(&labels, c).map_err(|e| e.to_string())?;
        ensure(once.iter().zip(&labels).all(|(a, b)| *a == c - 1 - b), || "flip is not C-1-y".into())?;
        ensure(label_flip(&once, c).map_err(|e| e.to_string())? == labels, || "flip is not an involution".into())?;
    }
    Ok(())
}

/// Honest results of the controlled clients for one randomized round.
fn attack_context(mode: UpdateKind, seed: u64) -> (AttackContext, MaliciousTraining) {
    let mut rng = rng_for(seed, 77, &[]);
    let f = rng.random_range(2..=4);
    let cfg = ExperimentConfig {
        n: 10,
        f,
        mode,
        seed,
        data: fedpoison_core::federation::DataSpec {
            source: fedpoison_core::federation::DataSource::Blobs { classes: 2, per_class: 60, input_dim: 6, spread: 1.0 },
            partition: fedpoison_core::federation::PartitionSpec::Dirichlet { alpha: rng.random_range(0.3..3.0) },
            seed: None,
        },
        hidden: vec![rng.random_range(2..=8)],
        ..ExperimentConfig::default()
    };
    let sim = Simulation::new(cfg).unwrap();
    let honest = TrainConfig {
        optimizer: OptimizerChoice::Sgd.with_lr(rng.random_range(0.005..0.2)),
        batch_size: rng.random_range(4..=32),
        epochs: rng.random_range(1..=3),
    };
    let mut updates = Vec::new();
    let mut params = Vec::new();
    for id in 0..f {
        let r = match mode {
            UpdateKind::Parameters => local_train_params(&sim.shards()[id], sim.spec(), sim.global(), &honest, id, seed + id as u64),
            UpdateKind::Gradients => local_train_grads(&sim.shards()[id], sim.spec(), sim.global(), &honest, id, seed + id as u64),
        }
        .unwrap();
        updates.push(r.update.vector);
        params.push(r.final_params);
    }
    let ctx = AttackContext {
        malicious_updates: updates,
        malicious_params: params,
        combined_data: Dataset::concat(&sim.shards()[..f]).unwrap(),
        mode,
        model: sim.spec().clone(),
    };
    let opt = if rng.random_bool(0.5) { OptimizerChoice::Sgd } else { OptimizerChoice::Adam };
    let training = MaliciousTraining {
        train: TrainConfig { optimizer: opt.with_lr(rng.random_range(0.001..0.5)), batch_size: rng.random_range(4..=64), epochs: rng.random_range(1..=5) },
        seed,
    };
    (ctx, training)
}

fn check_disbelieve_params_ball() -> Result<(), String> {
    (0..60u64).into_par_iter().try_for_each(|seed| {
        let (ctx, training) = attack_context(UpdateKind::Parameters, seed);
        let (out, diag) = attacks::disbelieve_params(&ctx, &training).map_err(|e| e.to_string())?;
        let mu = ParamVector::mean_of(&ctx.malicious_params).unwrap();
        let mut p_dist = 0.0f64;
        for a in &ctx.malicious_params {
            for b in &ctx.malicious_params {
                p_dist = p_dist.max(sq(a, b));
            }
        }
        let got = sq(&out, &mu);
        ensure(got <= p_dist && diag.threshold == p_dist, || format!("round {seed}: {got} > {p_dist}"))
    })
}

fn check_disbelieve_grads() -> Result<(), String> {
    let outcomes: Result<Vec<bool>, String> = (0..60u64)
        .into_par_iter()
        .map(|seed| {
            let (ctx, training) = attack_context(UpdateKind::Gradients, 1000 + seed);
            let (out, diag) = attacks::disbelieve_grads(&ctx, &training).map_err(|e| e.to_string())?;
            let sf = diag.sf.unwrap();
            ensure((out.norm() - sf).abs() <= 1e-9 * sf.max(1.0), || format!("round {seed}: norm {} vs sf {sf}", out.norm()))?;
            let mu = ParamVector::mean_of(&ctx.malicious_updates).unwrap();
            let g_dist = attacks::pairwise_extreme_sqdist(&ctx.malicious_updates, Extreme::Min).unwrap();
            let g_hat = out.scaled(1.0 / sf);
            // did the scaling loop visit any feasible midpoint?
            let (mut start, mut end, mut feasible) = (0.001f64, 1000.0f64, false);
            while (start - end).abs() > 0.01 {
                let mid = (start + end) / 2.0;
                if sq(&g_hat.scaled(mid), &mu) > g_dist { start = mid } else { end = mid; feasible = true }
            }
            ensure(diag.fallback_used == !feasible, || format!("round {seed}: fallback flag {}", diag.fallback_used))?;
            if diag.fallback_used {
                let proj: f64 = g_hat.iter().zip(mu.iter()).map(|(a, b)| a * b).sum();
                ensure((sf - proj.clamp(0.001, 1000.0)).abs() <= 1e-9 * sf.max(1.0), || format!("round {seed}: fallback sf {sf}"))?;
            } else {
                ensure(sq(&out, &mu) <= g_dist * (1.0 + 1e-12), || format!("round {seed}: outside ball"))?;
            }
            Ok(diag.fallback_used)
        })
        .collect();
    let flags = outcomes?;
    println!("    disbelieve-grad rounds: {} of {} used the fallback", flags.iter().filter(|f| **f).count(), flags.len());
    Ok(())
}

fn check_scale_iterations() -> Result<(), String> {
    let mut rng = rng_for(106, 0, &[]);
    for case in 0..2000 {
        let d = rng.random_range(1..=8);
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-6 {
            continue;
        }
        let g: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let scale = 10f64.powf(rng.random_range(-3.0..4.0));
        let mu: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
        let g_dist = 10f64.powf(rng.random_range(-4.0..7.0));
        let s = binary_search_scale(&g, &mu, g_dist).map_err(|e| e.to_string())?;
        ensure(s.iterations <= 17, || format!("case {case}: {} iterations", s.iterations))?;
    }
    Ok(())
}

fn check_run_determinism() -> Result<(), String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cfg = load("blobs_parameters.cfg").with_matrix_cell("disbelieve", "dos").unwrap();
    cfg.rounds = 5;
    let a = cmd_run(&cfg, 7, &tmp.path().join("a"), RunOptions::default()).map_err(|e| e.to_string())?;
    let b = cmd_run(&cfg, 7, &tmp.path().join("b"), RunOptions::default()).map_err(|e| e.to_string())?;
    let (ta, tb) = (std::fs::read(&a.csv_path).unwrap(), std::fs::read(&b.csv_path).unwrap());
    ensure(ta == tb && !ta.is_empty(), || "run CSVs differ".into())
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let checks: Vec<Check> = vec![
        ("disbelieve-param ball (60 rounds)", check_disbelieve_params_ball()),
        ("disbelieve-grad norm/ball/fallback (60 rounds)", check_disbelieve_grads()),
        ("scale search <= 17 iterations", check_scale_iterations()),
        ("KRUM / trimmed mean brute force (200 cases)", check_aggregator_oracles()),
        ("AUC all-pairs oracle", check_auc_oracle()),
        ("gradients vs central differences", check_gradients()),
        ("DOS simplex and outlier example", check_dos()),
        ("label flip involution", check_label_flip()),
        ("byte-identical run CSVs", check_run_determinism()),
    ];
    let elapsed = start.elapsed();
    let mut failed = Vec::new();
    for (name, res) in &checks {
        match res {
            Ok(()) => println!("    ok   {name}"),
            Err(e) => {
                println!("    FAIL {name}: {e}");
                failed.push(*name);
            }
        }
    }
    let in_time = elapsed < Duration::from_secs(60);
    report(
        1,
        failed.is_empty() && in_time,
        format!("invariant suite, {} checks, {} failed, {:.1}s (limit 60s)", checks.len(), failed.len(), elapsed.as_secs_f64()),
    )
}

// ------------------------------------------------------- criteria 2, 3 and 5

struct ParamResults {
    none: Vec<(DefenseKind, f64)>,
    disbelieve: Vec<(DefenseKind, f64)>,
}

fn lookup(v: &[(DefenseKind, f64)], d: DefenseKind) -> f64 {
    v.iter().find(|(k, _)| *k == d).unwrap().1
}

fn criterion_2(rc: &RunConfig) -> (Verdict, Vec<(DefenseKind, f64)>) {
    let start = Instant::now();
    let defenses = [DefenseKind::FedAvg, DefenseKind::Krum, DefenseKind::TrimmedMean, DefenseKind::Dos];
    let none: Vec<(DefenseKind, f64)> = defenses.iter().map(|&d| (d, median_final_auc(rc, "none", d.name(), |_| {}))).collect();
    let elapsed = start.elapsed();
    let ok = none.iter().all(|(_, a)| *a >= 0.90) && elapsed <= Duration::from_secs(120);
    let detail = none.iter().map(|(d, a)| format!("{}={a:.3}", d.name())).collect::<Vec<_>>().join(" ");
    (report(2, ok, format!("no-attack median AUC >= 0.90: {detail}; {:.1}s (limit 120s)", elapsed.as_secs_f64())), none)
}

fn criterion_3(rc: &RunConfig, none: Vec<(DefenseKind, f64)>) -> (Verdict, ParamResults) {
    let start = Instant::now();
    let defenses = [DefenseKind::Dos, DefenseKind::Krum, DefenseKind::TrimmedMean];
    let disbelieve: Vec<(DefenseKind, f64)> =
        defenses.iter().map(|&d| (d, median_final_auc(rc, "disbelieve", d.name(), |_| {}))).collect();
    let lie: Vec<(DefenseKind, f64)> =
        defenses[..2].iter().map(|&d| (d, median_final_auc(rc, "lie", d.name(), |_| {}))).collect();
    let elapsed = start.elapsed();
    let mut ok = elapsed <= Duration::from_secs(300);
    let mut parts = Vec::new();
    for d in [DefenseKind::Dos, DefenseKind::Krum] {
        let (n, x, l) = (lookup(&none, d), lookup(&disbelieve, d), lookup(&lie, d));
        ok &= x <= n - 0.10 && x < l;
        parts.push(format!("{}: disbelieve={x:.3} lie={l:.3} none={n:.3}", d.name()));
    }
    (
        report(3, ok, format!("disbelieve <= none - 0.10 and < lie; {}; {:.1}s (limit 300s)", parts.join("; "), elapsed.as_secs_f64())),
        ParamResults { none, disbelieve },
    )
}

fn criterion_5(r: &ParamResults) -> Verdict {
    let drop_tm = lookup(&r.none, DefenseKind::TrimmedMean) - lookup(&r.disbelieve, DefenseKind::TrimmedMean);
    let drop_krum = lookup(&r.none, DefenseKind::Krum) - lookup(&r.disbelieve, DefenseKind::Krum);
    report(
        5,
        drop_tm < drop_krum,
        format!("AUC drop under trimmed_mean (trim_k = f) {drop_tm:.3} < under krum {drop_krum:.3}"),
    )
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Verdict {
    let rc = load("blobs_gradients.cfg");
    let start = Instant::now();
    let none = median_final_auc(&rc, "none", "krum", |_| {});
    let dis = median_final_auc(&rc, "disbelieve", "krum", |_| {});
    let mm = median_final_auc(&rc, "min_max", "krum", |_| {});
    let elapsed = start.elapsed();
    let ok = dis <= 0.65 && none >= 0.85 && dis <= mm + 0.05 && elapsed <= Duration::from_secs(300);
    report(
        4,
        ok,
        format!(
            "gradient mode under krum: disbelieve={dis:.3} (<= 0.65), none={none:.3} (>= 0.85), min_max={mm:.3} (disbelieve <= min_max + 0.05); {:.1}s (limit 300s)",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- criterion 6

/// Literal scaling loop: returns the last midpoint, its diff, the final `end`
/// and the number of iterations.
fn literal_loop(g: &[f64], mu: &[f64], g_dist: f64) -> (f64, f64, f64, u32) {
    let (mut start, mut end) = (0.001f64, 1000.0f64);
    let (mut sf, mut diff, mut it) = (f64::NAN, f64::NAN, 0);
    while (start - end).abs() > 0.01 {
        sf = (start + end) / 2.0;
        let new: Vec<f64> = g.iter().map(|x| sf * x).collect();
        diff = sq(&new, mu);
        if diff > g_dist { start = sf } else { end = sf }
        it += 1;
    }
    (sf, diff, end, it)
}

fn criterion_6() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;

    let (g, mu) = ([1.0, 0.0], [999.0, 0.0]);
    let s = binary_search_scale(&g, &mu, 10_000.0).unwrap();
    let (last, _, end, it) = literal_loop(&g, &mu, 10_000.0);
    let conv = !s.fallback_used
        && (898.99..=899.02).contains(&s.sf)
        && s.diff <= 10_000.0
        && (898.99..=899.02).contains(&last)
        && s.last_midpoint == last
        && s.sf == end
        && s.iterations == it;
    ok &= conv;
    notes.push(format!("convergent sf={:.4} diff={:.2} fallback={}", s.sf, s.diff, s.fallback_used));

    let (g, mu) = ([1.0, 0.0], [2.0, 0.0]);
    let s = binary_search_scale(&g, &mu, 1.0).unwrap();
    let (last, diff, end, it) = literal_loop(&g, &mu, 1.0);
    let infeasible = last >= 500.0 && diff > 1.0 && end == 1000.0 && s.fallback_used && s.sf == 2.0 && s.diff == 0.0 && s.iterations == it;
    ok &= infeasible;
    notes.push(format!("infeasible sf={} diff={} fallback={}", s.sf, s.diff, s.fallback_used));

    let bound = (1000.0f64 - 0.001) / 0.01;
    let max_it = bound.log2().ceil() as u32;
    let iters_ok = s.iterations <= max_it && max_it == 17 && literal_loop(&[1.0], &[0.0], 0.0).3 <= 17;
    ok &= iters_ok;
    notes.push(format!("iterations={} (bound {max_it})", s.iterations));

    report(6, ok, format!("scale-search examples match the literal loop: {}", notes.join("; ")))
}

#[test]
fn acceptance_criteria() {
    let rc = load("blobs_parameters.cfg");
    let c1 = criterion_1();
    let (c2, none) = criterion_2(&rc);
    let (c3, param_results) = criterion_3(&rc, none);
    let c4 = criterion_4();
    let c5 = criterion_5(&param_results);
    let c6 = criterion_6();
    let verdicts = [c1, c2, c3, c4, c5, c6];
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.passed).map(|v| format!("{}: {}", v.id, v.detail)).collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

#[test]
fn acceptance_configs_match_the_documented_setup() {
    let p = load("blobs_parameters.cfg").experiment;
    assert_eq!((p.n, p.f, p.rounds, p.mode), (10, 4, 30, UpdateKind::Parameters));
    let g = load("blobs_gradients.cfg").experiment;
    assert_eq!((g.n, g.f, g.rounds, g.mode), (10, 3, 50, UpdateKind::Gradients));
    for cfg in [&p, &g] {
        assert_eq!(
            cfg.data.source,
            fedpoison_core::federation::DataSource::Blobs { classes: 2, per_class: 500, input_dim: 20, spread: 1.0 }
        );
        assert_eq!(cfg.defense.trim_k, None, "trim_k defaults to f");
    }
}
