//! Generate the default 600-pair dataset and print its label histogram.
//!
//!     cargo run --example generate_dataset -- [out.jsonl]

use std::collections::BTreeMap;
use std::path::PathBuf;

use judge_bench::generator::{assemble_dataset, GeneratorConfig, UtteranceBackend};
use judge_bench::model::write_dataset;
use judge_bench::travel::TravelTimeEstimator;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("dataset.jsonl"), PathBuf::from);
    let config = GeneratorConfig::default();
    let pairs = assemble_dataset(&config, &UtteranceBackend::Template, &TravelTimeEstimator::default())?;
    write_dataset(&out, &pairs)?;

    let mut histogram: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &pairs {
        *histogram.entry(p.label.slug()).or_default() += 1;
    }
    println!("seed {} → {} pairs in {}", config.seed, pairs.len(), out.display());
    for (label, n) in histogram {
        println!("  {label:<9} {n}");
    }
    let first = &pairs[0];
    println!("\nfirst user: {}", first.user.utterance);
    println!("aligned venue: {} ({})", first.system.venue_name, first.system.location.district_label);
    Ok(())
}
