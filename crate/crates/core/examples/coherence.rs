//! Mutual coherence and size of the baseline dictionary as β varies.
//!
//! Run with `cargo run --release --example coherence`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::analysis::dirichlet_correlation;
use nearfield_polar::dictionary::grid::build_baseline_grid;
use nearfield_polar::dictionary::{assemble_dictionary, mutual_coherence};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let (geom, roi) = (config.geometry()?, config.region()?);
    for beta in [1.0, 1.5, 2.0, 2.5, 3.0] {
        let grid = build_baseline_grid(beta, &geom, &roi)?;
        let dict = assemble_dictionary(&grid, &geom)?;
        println!(
            "β = {beta:.1}: Q = {:>5}, μ = {:.5}",
            grid.len(),
            mutual_coherence(&dict)?
        );
    }
    // With δ > λ/2 the far-field beam pattern repeats every ΔΓ = λ/δ.
    let lobe = geom.wavelength() / geom.spacing();
    println!(
        "grating lobe ΔΓ = {lobe:.3}: Dirichlet correlation {:.3}",
        dirichlet_correlation(lobe, &geom)
    );
    Ok(())
}
