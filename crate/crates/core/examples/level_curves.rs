//! Traces constant-Γ level curves on the ground plane for several BS heights.
//!
//! Run with `cargo run --example level_curves`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::grid::{gamma_max, level_curve_trace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let roi = config.region()?;
    for height in [0.0, 5.0, 15.0] {
        println!("b = {height} m, Γ_max = {:.4}", gamma_max(&roi, height));
        for g in [-0.4, 0.0, 0.4] {
            let trace = level_curve_trace(g, height, roi.rho_min(), roi.rho_max(), 5);
            let pts: Vec<String> = trace
                .iter()
                .map(|(rho, phi)| format!("({rho:.1}, {:.1}°)", phi.to_degrees()))
                .collect();
            println!("  Γ = {g:+.1}: {}", pts.join(" "));
        }
    }
    Ok(())
}
