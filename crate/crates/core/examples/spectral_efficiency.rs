//! Small Monte-Carlo comparison of the two dictionaries: NMSE and the
//! use-and-then-forget sum SE with MR and MMSE combining.
//!
//! Run with `cargo run --release --example spectral_efficiency`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::assemble_dictionary;
use nearfield_polar::dictionary::grid::{
    build_baseline_grid, build_proposed_grid, GridDesignParams,
};
use nearfield_polar::evaluation::{run_monte_carlo, DesignUnderTest, Metric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let (geom, roi) = (config.geometry()?, config.region()?);
    let proposed = build_proposed_grid(&GridDesignParams::new(310, 1.81), &geom, &roi)?;
    let baseline = build_baseline_grid(2.33, &geom, &roi)?;
    let designs = vec![
        DesignUnderTest {
            name: "proposed".into(),
            dictionary: assemble_dictionary(&proposed, &geom)?,
        },
        DesignUnderTest {
            name: "baseline".into(),
            dictionary: assemble_dictionary(&baseline, &geom)?,
        },
    ];
    let mut settings = config.monte_carlo_settings();
    settings.drops = 3;
    settings.realizations = 4;
    settings.powers_dbm = vec![5.0, 15.0];
    let result = run_monte_carlo(&geom, &roi, &designs, &settings)?;
    for p in &settings.powers_dbm {
        for d in &designs {
            let get = |m| result.get(&d.name, m, *p).map_or(f64::NAN, |c| c.value);
            println!(
                "p = {p:>4} dBm {:<9} NMSE {:>6.2} dB, SE MR {:>6.2}, SE MMSE {:>6.2} bit/s/Hz",
                d.name,
                get(Metric::NmseDb),
                get(Metric::SumSeMr),
                get(Metric::SumSeMmse)
            );
        }
    }
    Ok(())
}
