//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line to
//! stderr (bypassing libtest capture) and then asserts its verdict.

#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dmlp_core::eac::{classifier_loss_and_grad, eac_label_update, LinearClassifier};
use dmlp_core::evaluate::{evaluate_classifier, linear_probe, train_linear_ce, TrainConfig};
use dmlp_core::ipc::{label_gradient, ridge_fit, IpcConfig};
use dmlp_core::noise::{inject_asymmetric, inject_symmetric, label_accuracy, ClassMap, GaussianMixture, MixtureSpec};
use dmlp_core::{purify, CleanValidationSet, FeatureMatrix, HardLabels, PurifierConfig};
use oracle::{from_matrix, to_matrix, Hyper, M};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn verdict(n: u32, pass: bool, detail: impl AsRef<str>) {
    let line = format!(
        "criterion {n}: {} | {}\n",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {}", detail.as_ref());
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

#[test]
fn criterion_1_ridge_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_residual, mut worst_gap) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let (b, d, c) = (rng.gen_range(1..=16), rng.gen_range(1..=10), rng.gen_range(2..=5));
        let lambda = 10f64.powf(rng.gen_range(-3.0..1.0));
        let alpha = rng.gen_range(0.25..4.0);
        let f = oracle::random(&mut rng, b, d, 1.0);
        let y = oracle::random(&mut rng, b, c, 3.0);
        let s = oracle::softmax_all(&y, alpha);
        let w = from_matrix(
            &ridge_fit(&to_matrix(&f), &to_matrix(&y), alpha, lambda)
                .unwrap()
                .weights,
        );

        let ft = oracle::transpose(&f);
        let rhs = oracle::mul(&ft, &s);
        let lhs = oracle::mul(&ft, &oracle::mul(&f, &w));
        let resid: M = lhs
            .iter()
            .zip(&rhs)
            .zip(&w)
            .map(|((l, r), wr)| l.iter().zip(r).zip(wr).map(|((a, b), x)| a + lambda * x - b).collect())
            .collect();
        worst_residual = worst_residual.max(oracle::frobenius(&resid) / oracle::frobenius(&rhs));
        worst_gap = worst_gap.max(oracle::max_abs_diff(&w, &oracle::ridge_iterative(&f, &s, lambda)));
    }
    let elapsed = start.elapsed();
    verdict(
        1,
        worst_residual <= 1e-8 && worst_gap <= 1e-5 && elapsed < Duration::from_secs(10),
        format!(
            "100 instances, max normal-equation residual {worst_residual:.2e} (<= 1e-8), max gap to iterative minimizer {worst_gap:.2e} (<= 1e-5), {}",
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_2_hypergradient_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = (0.0f64, 0usize);
    for trial in 0..100 {
        let (b, d, c, nv) = (8, 5, 3, 6);
        let f = oracle::random(&mut rng, b, d, 1.0);
        let y = oracle::random(&mut rng, b, c, 2.0);
        let fv = oracle::random(&mut rng, nv, d, 1.0);
        let yv: M = (0..nv)
            .map(|_| {
                let l = rng.gen_range(0..c);
                (0..c).map(|k| if k == l { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let h = Hyper {
            alpha: rng.gen_range(0.5..2.0),
            lambda: 10f64.powf(rng.gen_range(-2.0..1.0)),
            gamma: rng.gen_range(0.0..1.0),
        };
        let val = CleanValidationSet::new(FeatureMatrix::new(to_matrix(&fv)).unwrap(), to_matrix(&yv)).unwrap();
        let cfg = IpcConfig {
            alpha: h.alpha,
            lambda: h.lambda,
            entropy_weight: h.gamma,
            ..IpcConfig::default()
        };
        let g = from_matrix(&label_gradient(&to_matrix(&f), &to_matrix(&y), &val, &cfg).unwrap());
        let fd = oracle::central_diff(&y, 1e-5, |yy| oracle::composed_loss(&f, yy, &fv, &yv, h));
        let (ratio, _) = oracle::worst_mismatch(&g, &fd, 1e-4, 1e-8, 1e-8);
        if ratio > worst.0 {
            worst = (ratio, trial);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        worst.0 <= 1.0 && elapsed < Duration::from_secs(30),
        format!(
            "100 instances, worst entry at {:.3} of the 1e-4 relative tolerance (instance {}), {}",
            worst.0,
            worst.1,
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_3_eac_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (n, d, c) = (rng.gen_range(2..=6), rng.gen_range(1..=4), rng.gen_range(2..=4));
        let x = oracle::random(&mut rng, n, d, 1.5);
        let w = oracle::random(&mut rng, d, c, 1.0);
        let b: Vec<f64> = (0..c).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let t = oracle::softmax_all(&oracle::random(&mut rng, n, c, 2.0), 1.0);
        let gamma = rng.gen_range(0.0..1.5);
        let clf = LinearClassifier::new(to_matrix(&w), b.clone()).unwrap();
        let (_, g) = classifier_loss_and_grad(&clf, &to_matrix(&x), &to_matrix(&t), gamma).unwrap();
        let fd_w = oracle::central_diff(&w, 1e-5, |ww| oracle::classifier_loss(&x, ww, &b, &t, gamma));
        let fd_b = oracle::central_diff(&vec![b.clone()], 1e-5, |bb| {
            oracle::classifier_loss(&x, &w, &bb[0], &t, gamma)
        });
        worst = worst
            .max(oracle::worst_mismatch(&from_matrix(&g.weights), &fd_w, 1e-4, 1e-8, 1e-8).0)
            .max(oracle::worst_mismatch(&vec![g.bias.clone()], &fd_b, 1e-4, 1e-8, 1e-8).0);
    }

    let y = to_matrix(&oracle::random(&mut rng, 7, 3, 5.0));
    let z = to_matrix(&oracle::random(&mut rng, 7, 3, 5.0));
    let identity = eac_label_update(&y, &z, 0.0).unwrap() == y;
    let replace = eac_label_update(&y, &z, 1.0).unwrap() == z;
    verdict(
        3,
        worst <= 1.0 && identity && replace,
        format!(
            "50 instances, worst entry at {worst:.3} of the 1e-4 relative tolerance; eta_E=0 identity {identity}, eta_E=1 replacement {replace}"
        ),
    );
}

#[test]
fn criterion_4_noise_statistics() {
    let y = HardLabels::new((0..10_000).map(|i| i % 10).collect(), 10).unwrap();
    let noisy = inject_symmetric(&y, 0.5, 7).unwrap();
    let frac = 1.0 - label_accuracy(&noisy, &y).unwrap();
    let fixed = y
        .as_slice()
        .iter()
        .zip(inject_symmetric(&y, 1.0, 7).unwrap().as_slice())
        .filter(|(a, b)| a == b)
        .count();
    let map = ClassMap::cifar10();
    let asym = inject_asymmetric(&y, 0.4, &map, 7).unwrap();
    let stray = y
        .as_slice()
        .iter()
        .zip(asym.as_slice())
        .filter(|&(&a, &b)| a != b && map.target(a) != Some(b))
        .count();
    let deterministic =
        noisy == inject_symmetric(&y, 0.5, 7).unwrap() && asym == inject_asymmetric(&y, 0.4, &map, 7).unwrap();
    verdict(
        4,
        (0.48..=0.52).contains(&frac) && fixed == 0 && stray == 0 && deterministic,
        format!(
            "flip fraction {frac:.4} in [0.48, 0.52], fixed points at pi=1: {fixed}, off-map flips: {stray}, deterministic {deterministic}"
        ),
    );
}

struct Split {
    train: FeatureMatrix,
    clean: HardLabels,
    val: CleanValidationSet,
    test: FeatureMatrix,
    test_labels: HardLabels,
}

fn split(seed: u64) -> Split {
    let spec = MixtureSpec {
        n: 2000,
        dim: 32,
        classes: 5,
        separation: 8.0,
        seed,
    };
    let mix = GaussianMixture::new(&spec).unwrap();
    let (train, clean) = mix.sample(2000, 0).unwrap();
    let (vf, vl) = mix.sample(100, 1).unwrap();
    let (test, test_labels) = mix.sample(2000, 2).unwrap();
    Split {
        train,
        clean,
        val: CleanValidationSet::from_hard(vf, &vl).unwrap(),
        test,
        test_labels,
    }
}

fn pinned_config(seed: u64) -> PurifierConfig {
    let mut cfg = PurifierConfig {
        shuffle_seed: seed,
        ..PurifierConfig::default()
    };
    cfg.ipc.alpha = 1.0;
    cfg.ipc.eta = 0.01;
    cfg.ipc.lambda = 1.0;
    cfg.eac.eta = 1.0;
    cfg.eac.period = 50;
    cfg.batch_size = 256;
    cfg.epochs = 100;
    cfg
}

fn corrected(s: &Split, ratio: f64, seed: u64, cfg: &PurifierConfig) -> (f64, HardLabels) {
    let noisy = inject_symmetric(&s.clean, ratio, seed).unwrap();
    let out = purify(&s.train, &noisy, &s.val, cfg, Some(&s.clean)).unwrap();
    (out.report.summary.final_acc.unwrap(), out.labels)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fmt(v: &[f64]) -> String {
    v.iter().map(|a| format!("{a:.4}")).collect::<Vec<_>>().join(" ")
}

#[test]
fn criterion_5_correction_benchmark() {
    let start = Instant::now();
    let mut probes = Vec::new();
    let mut accs = Vec::new();
    for seed in SEEDS {
        let s = split(seed);
        probes.push(
            linear_probe(
                &s.train,
                &s.clean,
                &s.test,
                &s.test_labels,
                &TrainConfig {
                    seed,
                    ..TrainConfig::default()
                },
            )
            .unwrap(),
        );
        accs.push(corrected(&s, 0.5, seed, &pinned_config(seed)).0);
    }
    let elapsed = start.elapsed();
    let probe_ok = probes.iter().all(|&p| p >= 0.99);
    let min = accs.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        5,
        probe_ok && mean(&accs) >= 0.90 && min >= 0.85 && elapsed < Duration::from_secs(120),
        format!(
            "clean probe [{}] (>= 0.99); corrected accuracy at 50% noise [{}], mean {:.4} (>= 0.90), min {min:.4} (>= 0.85), {}",
            fmt(&probes),
            fmt(&accs),
            mean(&accs),
            secs(elapsed)
        ),
    );
}

#[test]
fn criterion_6_ablation_shape() {
    let mut ok = true;
    let mut detail = Vec::new();
    for ratio in [0.2, 0.8] {
        let (mut full, mut ipc, mut eac) = (Vec::new(), Vec::new(), Vec::new());
        for seed in SEEDS {
            let s = split(seed);
            let cfg = pinned_config(seed);
            full.push(corrected(&s, ratio, seed, &cfg).0);
            ipc.push(
                corrected(
                    &s,
                    ratio,
                    seed,
                    &PurifierConfig {
                        eac_enabled: false,
                        ..cfg.clone()
                    },
                )
                .0,
            );
            eac.push(
                corrected(
                    &s,
                    ratio,
                    seed,
                    &PurifierConfig {
                        ipc_enabled: false,
                        ..cfg
                    },
                )
                .0,
            );
        }
        let (f, i, e) = (mean(&full), mean(&ipc), mean(&eac));
        let dominates = f >= i.max(e) - 0.01;
        ok &= dominates;
        let mut part = format!(
            "{:.0}% noise: full {f:.4} [{}], ipc-only {i:.4} [{}], eac-only {e:.4} [{}], full >= max-0.01 {dominates}",
            ratio * 100.0,
            fmt(&full),
            fmt(&ipc),
            fmt(&eac)
        );
        if ratio == 0.8 {
            let ordering = i >= e;
            ok &= ordering;
            part.push_str(&format!(", ipc-only >= eac-only {ordering}"));
        }
        detail.push(part);
    }
    verdict(6, ok, detail.join("; "));
}

#[test]
fn criterion_7_retraining_gap() {
    let mut gaps = Vec::new();
    let mut pairs = Vec::new();
    for seed in SEEDS {
        let s = split(seed);
        let noisy = inject_symmetric(&s.clean, 0.5, seed).unwrap();
        let purified = purify(&s.train, &noisy, &s.val, &pinned_config(seed), None)
            .unwrap()
            .labels;
        let tc = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let acc = |labels: &HardLabels| {
            let clf = train_linear_ce(&s.train, labels, &tc).unwrap();
            evaluate_classifier(&clf, &s.test, &s.test_labels).unwrap()
        };
        let (on_noisy, on_purified) = (acc(&noisy), acc(&purified));
        gaps.push(on_purified - on_noisy);
        pairs.push(format!("{on_noisy:.4}->{on_purified:.4}"));
    }
    let min = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    verdict(
        7,
        min >= 0.15,
        format!(
            "held-out accuracy noisy->purified [{}], gaps [{}], min gap {min:.4} (>= 0.15)",
            pairs.join(" "),
            fmt(&gaps)
        ),
    );
}

fn dmlp(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_dmlp"))
        .args(args)
        .output()
        .expect("spawn dmlp");
    assert!(
        out.status.success(),
        "dmlp {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn criterion_8_determinism_and_truth_isolation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (name, n, draw) in [("train", "2000", "0"), ("val", "100", "1")] {
        dmlp(&[
            "synth",
            "--n",
            n,
            "--dim",
            "32",
            "--classes",
            "5",
            "--separation",
            "8",
            "--seed",
            "0",
            "--draw",
            draw,
            "--out-features",
            &p(d, &format!("{name}.feat")),
            "--out-labels",
            &p(d, &format!("{name}.labels")),
        ]);
    }
    dmlp(&[
        "corrupt",
        "--labels",
        &p(d, "train.labels"),
        "--kind",
        "symmetric",
        "--ratio",
        "0.5",
        "--seed",
        "0",
        "--out",
        &p(d, "noisy.labels"),
    ]);

    let purify_into = |tag: &str, extra: &[&str]| {
        let mut args: Vec<String> = [
            ("--features", "train.feat"),
            ("--labels", "noisy.labels"),
            ("--val-features", "val.feat"),
            ("--val-labels", "val.labels"),
            ("--out-labels", &format!("{tag}.labels")),
            ("--out-logits", &format!("{tag}.logits.csv")),
        ]
        .iter()
        .flat_map(|(flag, file)| [flag.to_string(), p(d, file)])
        .collect();
        args.insert(0, "purify".into());
        args.extend(["--threads".into(), "1".into()]);
        args.extend(extra.iter().map(|a| a.to_string()));
        dmlp(&args.iter().map(String::as_str).collect::<Vec<_>>());
    };
    purify_into("first", &["--seed", "0"]);
    let manifest = p(d, "first.labels.manifest.json");
    purify_into("replay", &["--config", &manifest]);
    let truth = p(d, "train.labels");
    purify_into("truth", &["--config", &manifest, "--truth", &truth]);

    let read = |name: &str| std::fs::read(d.join(name)).unwrap();
    let same = |a: &str, b: &str| {
        read(&format!("{a}.labels")) == read(&format!("{b}.labels"))
            && read(&format!("{a}.logits.csv")) == read(&format!("{b}.logits.csv"))
    };
    let repeat = same("first", "replay");
    let isolated = same("first", "truth");
    verdict(
        8,
        repeat && isolated,
        format!("replay from manifest bitwise identical {repeat}, with/without --truth bitwise identical {isolated}"),
    );
}
