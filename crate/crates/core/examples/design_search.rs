//! Searches `(N_Γ, β)` for the lowest optimal NMSE at a target grid size.
//!
//! Run with `cargo run --release --example design_search`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::design::{optimize_design, DesignSearch, NmseOptEvaluator};
use nearfield_polar::rng::{purpose, stream};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let (geom, roi) = (config.geometry()?, config.region()?);
    let mut rng = stream(7, purpose::NMSE_OPT_SAMPLES, 0);
    let evaluator = NmseOptEvaluator::sample(&geom, &roi, 500, &mut rng)?;
    let search = DesignSearch {
        coarse_candidates: 16,
        refine_top: 1,
        refine_points: 4,
        ..DesignSearch::default()
    };
    let target = 4 * geom.num_antennas();
    let result = optimize_design(target, &geom, &roi, &evaluator, &search)?;
    for c in &result.trace {
        println!(
            "N_Γ = {:>4}, β = {:.3}, Q = {:>4}, NMSE_opt = {:.2} dB",
            c.n_curves,
            c.beta,
            c.size,
            c.nmse_opt_db()
        );
    }
    let best = result.best;
    println!(
        "best: N_Γ = {}, β = {:.3}, NMSE_opt = {:.2} dB",
        best.n_curves,
        best.beta,
        best.nmse_opt_db()
    );
    Ok(())
}
