//! Pilot transmission through random hybrid combiners and P-SOMP recovery
//! of a single user's channel at several transmit powers.
//!
//! Run with `cargo run --release --example psomp_estimation`.

use nearfield_polar::channel::channel_vector;
use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::assemble_dictionary;
use nearfield_polar::dictionary::grid::{build_proposed_grid, GridDesignParams};
use nearfield_polar::estimation::{generate_combiners, nmse, simulate_pilot, PsompEstimator};
use nearfield_polar::geometry::ScenePoint;
use nearfield_polar::rng::master;
use nearfield_polar::units::{dbm_to_watt, to_db};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let (geom, roi) = (config.geometry()?, config.region()?);
    let est = &config.estimation;
    let grid = build_proposed_grid(&GridDesignParams::new(568, 1.51), &geom, &roi)?;
    let dict = assemble_dictionary(&grid, &geom)?;
    println!("dictionary: {} atoms", dict.len());

    let mut rng = master(1);
    let h = channel_vector(&ScenePoint::on_ground(13.0, 0.25, geom.height()), &geom)?;
    let comb = generate_combiners(&geom, est.rf_chains, est.pilot_slots, &mut rng)?;
    let estimator = PsompEstimator::new(&comb, &dict, est.whiten)?;
    let noise = dbm_to_watt(est.noise_dbm);
    for p_dbm in [0.0, 10.0, 20.0] {
        let obs = simulate_pilot(&h, &comb, dbm_to_watt(p_dbm), est.users, noise, &mut rng)?;
        let res = estimator.estimate(&obs, est.sparsity)?;
        let err = nmse(res.estimate(), &h.coefficients)?;
        println!(
            "p = {p_dbm:>4} dBm: support {:?}, NMSE = {:.2} dB",
            res.support,
            to_db(err)
        );
    }
    Ok(())
}
