//! Runs a named experiment end to end, the same way the binary does, and
//! prints the manifest it writes.
//!
//! Run with `cargo run --example run_experiment`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::experiments::{run_experiment, Experiment, RunOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let out = std::env::temp_dir().join("nearfield-polar-example");
    let opts = RunOptions {
        out_dir: out.clone(),
        seed: Some(3),
        force: true,
    };
    let summary = run_experiment(Experiment::LevelCurves, &config, &opts)?;
    for f in &summary.files {
        println!("wrote {}", f.display());
    }
    println!(
        "{}",
        std::fs::read_to_string(out.join("level-curves").join("manifest.json"))?
    );
    Ok(())
}
