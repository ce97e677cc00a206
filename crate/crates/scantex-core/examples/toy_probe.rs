//! Scratch probe: generates the toy dataset and runs both experiment
//! configs, printing per-fold EERs. Used to sanity-check the bundled
//! generator's operating range.

use scantex_core::imgcore::read_manifest;
use scantex_core::protocol::toy::{generate_toy_dataset, ToyOptions};
use scantex_core::protocol::{run_experiment, ExperimentConfig};

fn main() {
    let t0 = std::time::Instant::now();
    let dir = std::env::temp_dir().join("scantex_toy_probe");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();

    let scale: f64 = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(0.5);
    let seed: u64 = std::env::args()
        .nth(2)
        .and_then(|a| a.parse().ok())
        .unwrap_or(42);
    let opts = ToyOptions {
        texture_scale: scale,
        seed,
        ..ToyOptions::default()
    };
    println!("seed = {seed}");
    println!("texture_scale = {scale}");
    let toy = generate_toy_dataset(&dir, &opts).unwrap();
    println!("generated {} records in {:?}", toy.manifest.records.len(), t0.elapsed());

    let manifest = read_manifest(&toy.manifest_path).unwrap();
    let out = dir.join("results");
    for config_path in [&toy.exp1_config_path, &toy.exp3_config_path] {
        let config = ExperimentConfig::load(config_path).unwrap();
        let t = std::time::Instant::now();
        let results = run_experiment(&config, &manifest, &dir, &out).unwrap();
        println!("== {} ({:?})", config.name, t.elapsed());
        for r in &results {
            println!(
                "  fold={:<10} feature={:<10} eer={:.4} (train {}bf/{}m, test {}bf/{}m)",
                r.held_out_tool.to_string(),
                r.feature.to_string(),
                r.eer,
                r.n_train_bonafide,
                r.n_train_morph,
                r.n_test_bonafide,
                r.n_test_morph
            );
        }
        for kind in config.feature_kinds().unwrap() {
            let eers: Vec<f64> = results
                .iter()
                .filter(|r| r.feature == kind)
                .map(|r| r.eer)
                .collect();
            let mean = eers.iter().sum::<f64>() / eers.len() as f64;
            println!("  avg {kind}: {mean:.4}");
        }
    }
    println!("total {:?}", t0.elapsed());
}
