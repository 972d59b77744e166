//! Builds the level-curve grid and the angle/distance baseline grid and
//! writes both as CSV to stdout.
//!
//! Run with `cargo run --example proposed_grid > grids.csv`.

use std::io::{stdout, Write};

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::grid::{
    build_baseline_grid, build_proposed_grid, GridDesignParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let (geom, roi) = (config.geometry()?, config.region()?);

    let proposed = build_proposed_grid(&GridDesignParams::new(310, 1.81), &geom, &roi)?;
    let baseline = build_baseline_grid(2.5, &geom, &roi)?;
    eprintln!("proposed (N_Γ=310, β=1.81): Q = {}", proposed.len());
    eprintln!("baseline (β=2.5): Q = {}", baseline.len());

    let mut out = stdout().lock();
    writeln!(out, "# proposed")?;
    proposed.write_csv(&mut out)?;
    writeln!(out, "# baseline")?;
    baseline.write_csv(&mut out)?;
    Ok(())
}
