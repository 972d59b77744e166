//! Exact versus parabolic distances and the steering-vector correlation of
//! two users on the same level curve.
//!
//! Run with `cargo run --example steering_vectors`.

use nearfield_polar::config::parse_config_str;
use nearfield_polar::dictionary::analysis::correlation_exact;
use nearfield_polar::geometry::ScenePoint;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = parse_config_str(include_str!("../configs/reference.toml"))?;
    let geom = config.geometry()?;
    println!(
        "M = {}, δ = {:.2} mm, b = {} m, aperture = {:.3} m",
        geom.num_antennas(),
        geom.spacing() * 1e3,
        geom.height(),
        geom.aperture()
    );

    let user = ScenePoint::on_ground(12.0, 0.4, geom.height());
    let exact = geom.exact_distances(&user)?;
    let (r, g) = (user.range(), user.gamma());
    let worst = (0..geom.num_antennas())
        .map(|m| (exact[m] - r - geom.parabolic_distance(r, g, m)).abs())
        .fold(0.0, f64::max);
    println!(
        "user at R = {r:.3} m, Γ = {g:.4}: worst parabolic error {:.3e} λ",
        worst / geom.wavelength()
    );

    for rho in [10.0, 14.0, 20.0] {
        let other = ScenePoint::on_ground(rho, 0.4, geom.height());
        let c = correlation_exact(&user, &other, &geom)?;
        println!(
            "ρ = {rho:>4} m: exact {:.4}, quadratic-phase {:.4}",
            c.exact, c.quadratic
        );
    }
    Ok(())
}
