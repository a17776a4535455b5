//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p fedgnids --release --test acceptance`.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Instant;

use fedgnids::adversary::AttackConfig;
use fedgnids::experiment::{evaluate, prepare, train, ExperimentConfig, RunStatus};
use fedgnids::fed::{aggregate, ClientMeta, DpConfig, FederationConfig, Scheme};
use fedgnids::graph::{ba_generate, jaccard_similarity, wl_histogram, NodeId, Snapshot, StaticGraph};
use fedgnids::io::{write_json, write_weights_csv, SynthSpec};
use fedgnids::metrics::{average_precision, roc_auc, ScoredEdges};
use fedgnids::nn::{init_params, loss_and_grad, ModelDims, ModelParams, Segment, SnapshotTensors, TrainBatch};
use fedgnids::{seed, Scalar};
use rand::seq::SliceRandom;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient oracle", gradient_oracle),
        ("ACS weight and L1 bound", weight_bound),
        ("update clip bound", clip_bound),
        ("WL isomorphism invariance", wl_invariance),
        ("BA contract", ba_contract),
        ("metric oracles", metric_oracles),
        ("end-to-end effectiveness", effectiveness),
        ("poisoning robustness", robustness),
        ("DP noise calibration", dp_calibration),
        ("training determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let secs = start.elapsed().as_secs_f64();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {:>2}. {name}: {} ({secs:.2}s)", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}

// 1

fn gradient_oracle() -> Outcome {
    const STEP: f64 = 1e-5;
    let start = Instant::now();
    let dims = ModelDims::new(3, 4, 4).unwrap();
    let mut rng = seed::rng(11);
    let order: Vec<NodeId> = (0..6).collect();
    let feats: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut tensors = Vec::new();
    for t in 0..3 {
        let mut s = Snapshot::empty(t, (0, 1));
        for a in 0..6u64 {
            for b in a + 1..6 {
                if rng.random::<f64>() < 0.45 {
                    s.add_event(a, b, false);
                }
            }
        }
        tensors.push(SnapshotTensors::build(&s, &order, 3, |n| feats[n as usize].as_slice()).unwrap());
    }
    let batch = TrainBatch::new(tensors, 0).unwrap().with_negatives(1.0, 5).unwrap();
    let params: ModelParams<f64> = init_params(dims, 3);
    let (_, analytic) = loss_and_grad(&params, &batch, None).unwrap();
    let mut probe = params.clone();
    let numeric: Vec<f64> = (0..params.len())
        .map(|i| {
            let x = probe.flat[i];
            probe.flat[i] = x + STEP;
            let up = loss_and_grad(&probe, &batch, None).unwrap().0;
            probe.flat[i] = x - STEP;
            let down = loss_and_grad(&probe, &batch, None).unwrap().0;
            probe.flat[i] = x;
            (up - down) / (2.0 * STEP)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for seg in [Segment::Enc, Segment::Temp] {
        let r = seg.range(&dims);
        let (a, n) = (&analytic[r.clone()], &numeric[r]);
        let diff = a.iter().zip(n).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = l2(a).max(l2(n));
        worst = worst.max(if scale == 0.0 { 0.0 } else { diff / scale });
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-4 && secs < 10.0,
        format!("max segment relative error {worst:.2e} (< 1e-4), {} parameters", params.len()),
    )
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l1<T: Scalar>(v: &[T]) -> f64 {
    v.iter().map(|x| x.to_f64_lossy().abs()).sum()
}

// 2

fn random_params(dims: ModelDims, scale: f64, rng: &mut impl Rng) -> ModelParams<f64> {
    let flat = (0..dims.len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    ModelParams::from_flat(dims, flat).unwrap()
}

fn weight_bound() -> Outcome {
    let dims = ModelDims::new(3, 4, 4).unwrap();
    let cfg = FederationConfig {
        scheme: Scheme::EntenteUb,
        ..Default::default()
    };
    let cap = cfg.c1 + cfg.c2 * cfg.omega;
    let mut rng = seed::rng(2);
    let (mut weight_violations, mut norm_violations, mut checked) = (0, 0, 0);
    for step in 0..50 {
        let k = rng.random_range(2..=8);
        let global = random_params(dims, 1.0, &mut rng);
        let subs: Vec<_> = (0..k)
            .map(|_| {
                let scale = 10f64.powf(rng.random_range(-2.0..3.0));
                random_params(dims, scale, &mut rng)
            })
            .collect();
        let meta: Vec<_> = (0..k)
            .map(|_| ClientMeta {
                s_jac: rng.random_range(0.0..=1.0),
                nodes: 1,
            })
            .collect();
        let agg = aggregate(&cfg, &global, &subs, &meta, step + 1).unwrap();
        for w in &agg.weights {
            checked += 1;
            if w.r > cap {
                weight_violations += 1;
            }
        }
        let bound = cap * subs.iter().map(|w| l1(&w.flat)).sum::<f64>() / k as f64;
        // slack covers only the rounding of the two sums
        if l1(&agg.params.flat) > bound * (1.0 + 1e-12) {
            norm_violations += 1;
        }
    }
    outcome(
        weight_violations == 0 && norm_violations == 0,
        format!(
            "{checked} client weights, {weight_violations} above c1 + c2*omega = {cap}; \
             {norm_violations} of 50 L1 bound violations"
        ),
    )
}

// 3

fn clip_trials<T: Scalar>(trials: usize, seed_value: u64) -> (usize, f64) {
    let dims = ModelDims::new(3, 4, 4).unwrap();
    let cfg = FederationConfig {
        scheme: Scheme::Entente,
        ..Default::default()
    };
    let limit = (cfg.c1 + cfg.c2 * cfg.omega) * cfg.bound;
    let mut rng = seed::rng(seed_value);
    let mut violations = 0;
    let mut largest: f64 = 0.0;
    for i in 0..trials {
        let k = rng.random_range(2..=8);
        let global: ModelParams<T> = init_params(dims, rng.random());
        let subs: Vec<ModelParams<T>> = (0..k)
            .map(|_| {
                let gamma = match rng.random_range(0..3) {
                    0 => 1e6,
                    1 => 10f64.powf(rng.random_range(-3.0..3.0)),
                    _ => 1.0,
                };
                let mut w = global.clone();
                for x in &mut w.flat {
                    *x += T::of(gamma * rng.random_range(-1.0..1.0));
                }
                if rng.random::<f64>() < 0.3 {
                    // scaled-model attacker: submits gamma * w
                    for x in &mut w.flat {
                        *x *= T::of(1e6);
                    }
                }
                w
            })
            .collect();
        let meta: Vec<_> = (0..k)
            .map(|_| ClientMeta {
                s_jac: rng.random_range(0.0..=1.0),
                nodes: 1,
            })
            .collect();
        let agg = aggregate(&cfg, &global, &subs, &meta, i + 1).unwrap();
        let step: Vec<f64> = agg
            .params
            .flat
            .iter()
            .zip(&global.flat)
            .map(|(a, b)| a.to_f64_lossy() - b.to_f64_lossy())
            .collect();
        let n = l2(&step);
        largest = largest.max(n);
        if n > limit {
            violations += 1;
        }
    }
    (violations, largest)
}

fn clip_bound() -> Outcome {
    let (v64, m64) = clip_trials::<f64>(10_000, 3);
    let (v32, m32) = clip_trials::<f32>(10_000, 4);
    outcome(
        v64 == 0 && v32 == 0,
        format!(
            "10^4 trials per precision, limit (c1 + c2*omega)*M = 9; violations f64 {v64}, f32 {v32}; \
             largest step {:.4}",
            m64.max(m32)
        ),
    )
}

// 4

fn wl_invariance() -> Outcome {
    let mut rng = seed::rng(4);
    let mut mismatches = 0;
    let mut self_sim_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=64);
        let p = rng.random_range(0.02..0.5);
        let mut g = StaticGraph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < p {
                    g.add_edge(a, b);
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let h = wl_histogram(&g, 3);
        if h != wl_histogram(&g.permuted(&perm), 3) {
            mismatches += 1;
        }
        if jaccard_similarity(&h, &h).unwrap() != 1.0 {
            self_sim_failures += 1;
        }
    }
    outcome(
        mismatches == 0 && self_sim_failures == 0,
        format!("100 graphs: {mismatches} histogram mismatches, {self_sim_failures} self-similarities != 1"),
    )
}

// 5

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !std::mem::replace(&mut seen[v], true) {
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn ba_contract() -> Outcome {
    let mut rng = seed::rng(5);
    let mut bad = Vec::new();
    for s in 0..100u64 {
        let m = rng.random_range(1..=8);
        let n = rng.random_range(m + 1..=300);
        let g = ba_generate(n, m, s).unwrap();
        let edges: Vec<(usize, usize)> = g.edges.iter().copied().collect();
        let mut canon: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        canon.sort_unstable();
        canon.dedup();
        let ok = edges.len() == m * (m - 1) / 2 + (n - m) * m
            && canon.len() == edges.len()
            && edges.iter().all(|&(a, b)| a != b && a < n && b < n)
            && connected(n, &edges)
            && ba_generate(n, m, s).unwrap() == g;
        if !ok {
            bad.push(s);
        }
    }
    outcome(bad.is_empty(), format!("100 seeds, failing seeds {bad:?}"))
}

// 6

fn brute_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();
    let (mut ap, mut prev_recall) = (0.0, 0.0);
    for t in thresholds {
        let flagged: Vec<bool> = scores.iter().map(|&s| s >= t).collect();
        let tp = flagged.iter().zip(labels).filter(|(&f, &l)| f && l).count() as f64;
        let fl = flagged.iter().filter(|&&f| f).count() as f64;
        let recall = tp / pos;
        ap += (recall - prev_recall) * (tp / fl);
        prev_recall = recall;
    }
    ap
}

fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut sum, mut pairs) = (0.0, 0.0);
    for (i, &li) in labels.iter().enumerate() {
        if !li {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj {
                continue;
            }
            pairs += 1.0;
            sum += match scores[i].partial_cmp(&scores[j]).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    sum / pairs
}

fn metric_oracles() -> Outcome {
    let mut rng = seed::rng(6);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < 1000 {
        let n = rng.random_range(2..=50);
        let grid = rng.random_range(2..=20) as f64;
        let scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * grid).floor() / grid).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            continue;
        }
        let s = ScoredEdges::new(scores.clone(), labels.clone()).unwrap();
        worst = worst
            .max((average_precision(&s).unwrap() - brute_ap(&scores, &labels)).abs())
            .max((roc_auc(&s).unwrap() - brute_auc(&scores, &labels)).abs());
        done += 1;
    }
    let ex = ScoredEdges::new(vec![0.9, 0.8, 0.3], vec![true, false, true]).unwrap();
    let (ap, auc) = (average_precision(&ex).unwrap(), roc_auc(&ex).unwrap());
    let example_ok = (ap - 5.0 / 6.0).abs() < 1e-12 && (auc - 0.5).abs() < 1e-12;
    outcome(
        worst <= 1e-9 && example_ok,
        format!("10^3 instances, max deviation {worst:.1e}; worked example AP {ap:.6} AUC {auc:.6}"),
    )
}

// 7 and 8 share this configuration: the default synthetic dataset (200 nodes,
// 4 blocks, T = 20, 40 anomalies), K = 4, c1 = 0.8, c2 = 0.2, omega = 5, M = 5, E = 1.

fn experiment(seed_value: u64, scheme: Scheme) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(SynthSpec::default());
    cfg.seed = seed_value;
    cfg.federation.scheme = scheme;
    cfg
}

struct RunResult {
    status: RunStatus,
    iterations: usize,
    finite: bool,
    ap: f64,
    auc: f64,
    base: f64,
    sr: Option<f64>,
    secs: f64,
}

fn run(cfg: &ExperimentConfig) -> RunResult {
    let start = Instant::now();
    let prep = prepare(cfg).unwrap();
    let trained = train::<f32>(cfg, &prep).unwrap();
    let (mut ap, mut auc, mut base, mut sr, mut finite) = (f64::NAN, f64::NAN, f64::NAN, None, false);
    if let Some(o) = &trained.outcome {
        finite = o.params().is_finite();
        let r = evaluate(cfg, &prep, o.params()).unwrap().report;
        (ap, auc, base, sr) = (r.ap, r.auc, r.base_rate, r.sr);
    }
    RunResult {
        status: trained.history.status,
        iterations: trained.history.iterations,
        finite,
        ap,
        auc,
        base,
        sr,
        secs: start.elapsed().as_secs_f64(),
    }
}

fn effectiveness() -> Outcome {
    let mut wins = 0;
    let mut absolute_ok = true;
    let mut rows = Vec::new();
    let mut slowest: f64 = 0.0;
    for s in 0..5 {
        let e = run(&experiment(s, Scheme::Entente));
        let f = run(&experiment(s, Scheme::FedAvg));
        slowest = slowest.max(e.secs);
        wins += usize::from(e.ap >= f.ap);
        let ok = e.status == RunStatus::Completed
            && e.iterations <= 30
            && e.auc >= 0.85
            && e.ap >= 3.0 * e.base
            && e.secs < 300.0;
        absolute_ok &= ok;
        rows.push(format!(
            "seed {s}: entente AUC {:.3} AP {:.3} (base {:.3}, {} it) vs fedavg AP {:.3}",
            e.auc, e.ap, e.base, e.iterations, f.ap
        ));
    }
    outcome(
        absolute_ok && wins >= 4,
        format!(
            "AUC >= 0.85 and AP >= 3x base on every seed: {absolute_ok}; entente AP >= fedavg AP in \
             {wins}/5 seeds; slowest entente run {slowest:.1}s\n        {}",
            rows.join("\n        ")
        ),
    )
}

fn robustness() -> Outcome {
    let attack = AttackConfig {
        malicious_clients: [1].into_iter().collect(),
        p: 1.0,
        gamma: 100.0,
    };
    let config = |scheme: Scheme, attacked: bool| {
        let mut cfg = experiment(0, scheme);
        // every one of the R iterations has to run
        cfg.federation.early_stop.enabled = false;
        cfg.attack = attacked.then(|| attack.clone());
        cfg
    };
    let clean = run(&config(Scheme::Entente, false));
    let hit = run(&config(Scheme::Entente, true));
    let ub = run(&config(Scheme::EntenteUb, true));
    let pct = |x: Option<f64>| x.map_or(f64::NAN, |v| 100.0 * v);
    let entente_ok = hit.status == RunStatus::Completed
        && hit.iterations == 30
        && hit.finite
        && pct(hit.sr) - pct(clean.sr) <= 15.0;
    let ub_ok = ub.status == RunStatus::Nan || pct(ub.sr) >= pct(hit.sr) + 10.0;
    let ub_text = match ub.status {
        RunStatus::Nan => format!("aborted with NaN at iteration {}", ub.iterations),
        RunStatus::Completed => format!("SR {:.2}%", pct(ub.sr)),
    };
    outcome(
        entente_ok && ub_ok,
        format!(
            "entente {} iterations, finite {}, SR {:.2}% vs {:.2}% without attack; entente_ub {ub_text}",
            hit.iterations,
            hit.finite,
            pct(hit.sr),
            pct(clean.sr)
        ),
    )
}

// 9

fn dp_calibration() -> Outcome {
    let dims = ModelDims::new(3200, 32, 8).unwrap();
    let global: ModelParams<f64> = init_params(dims, 9);
    let subs = vec![global.clone(); 4];
    let meta = vec![ClientMeta { s_jac: 0.5, nodes: 1 }; 4];
    let mut pass = dims.len() >= 100_000;
    let mut parts = Vec::new();
    for sigma in [1.0, 0.2] {
        let cfg = FederationConfig {
            scheme: Scheme::EntenteDp,
            dp: Some(DpConfig {
                sigma,
                ..DpConfig::default()
            }),
            ..Default::default()
        };
        let agg = aggregate(&cfg, &global, &subs, &meta, 1).unwrap();
        let d: Vec<f64> = agg.params.flat.iter().zip(&global.flat).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        let target = cfg.bound * sigma;
        let rel = (std / target - 1.0).abs();
        pass &= rel <= 0.05;
        parts.push(format!("sigma {sigma}: std {std:.4} vs {target} ({:.2}% off)", 100.0 * rel));
    }
    outcome(pass, format!("{} coordinates; {}", dims.len(), parts.join("; ")))
}

// 10

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for (i, workers) in [1, 8, 1, 8].into_iter().enumerate() {
        let mut cfg = experiment(7, Scheme::Entente);
        cfg.federation.workers = workers;
        let prep = prepare(&cfg).unwrap();
        let trained = train::<f32>(&cfg, &prep).unwrap();
        let rows = &trained.outcome.as_ref().unwrap().weight_log;
        let csv = dir.path().join(format!("weights{i}.csv"));
        let json = dir.path().join(format!("history{i}.json"));
        write_weights_csv(&csv, rows).unwrap();
        write_json(&json, &trained.history).unwrap();
        outputs.push((read(&csv), read(&json)));
    }
    let identical = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical,
        format!(
            "4 runs (workers 1, 8, 1, 8): byte-identical weights CSV ({} B) and history JSON ({} B): {identical}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}
