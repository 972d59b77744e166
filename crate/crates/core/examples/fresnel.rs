//! Fresnel approximation of the on-curve correlation compared with the
//! exact steering-vector correlation.
//!
//! Run with `cargo run --example fresnel`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::analysis::{correlation_exact, fresnel_g, range_at_beta};
use nearfield_polar::geometry::ScenePoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let geom = config.geometry()?;
    let g = 0.2;
    let r_p = 60.0;
    let p = ScenePoint::new(
        (r_p * r_p * (1.0 - g * g) - geom.height().powi(2)).sqrt(),
        r_p * g,
        -geom.height(),
    );
    println!("{:>5} {:>10} {:>10}", "β", "|G(β)|", "exact");
    for beta in [0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        let r_q = range_at_beta(r_p, g, beta, &geom);
        let q = ScenePoint::new(
            (r_q * r_q * (1.0 - g * g) - geom.height().powi(2)).sqrt(),
            r_q * g,
            -geom.height(),
        );
        let c = correlation_exact(&p, &q, &geom)?;
        println!(
            "{beta:>5.2} {:>10.5} {:>10.5}",
            fresnel_g(beta).norm(),
            c.exact
        );
    }
    Ok(())
}
