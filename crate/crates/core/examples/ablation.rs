//! IPC/EAC ablation on the synthetic benchmark.
//!
//! `cargo run --release -p dmlp-core --example ablation -- [ratio] [eta_i]`

use dmlp_core::noise::{inject_symmetric, GaussianMixture, MixtureSpec};
use dmlp_core::{purify, CleanValidationSet, PurifierConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let ratio: f64 = args.next().map_or(0.5, |s| s.parse().expect("ratio"));
    let eta_i: f64 = args.next().map_or(0.01, |s| s.parse().expect("eta_i"));

    println!("seed  initial  full    ipc     eac");
    for seed in 0..5u64 {
        let mix = GaussianMixture::new(&MixtureSpec {
            n: 2000,
            dim: 32,
            classes: 5,
            separation: 8.0,
            seed,
        })
        .unwrap();
        let (features, clean) = mix.sample(2000, 0).unwrap();
        let (vf, vl) = mix.sample(100, 1).unwrap();
        let val = CleanValidationSet::from_hard(vf, &vl).unwrap();
        let noisy = inject_symmetric(&clean, ratio, seed).unwrap();

        let mut row = Vec::new();
        let mut initial = 0.0;
        for (ipc, eac) in [(true, true), (true, false), (false, true)] {
            let mut cfg = PurifierConfig {
                shuffle_seed: seed,
                ipc_enabled: ipc,
                eac_enabled: eac,
                ..Default::default()
            };
            cfg.ipc.eta = eta_i;
            let s = purify(&features, &noisy, &val, &cfg, Some(&clean))
                .unwrap()
                .report
                .summary;
            initial = s.initial_acc.unwrap();
            row.push(s.final_acc.unwrap());
        }
        println!("{seed:>4}  {initial:.4}   {:.4}  {:.4}  {:.4}", row[0], row[1], row[2]);
    }
}
