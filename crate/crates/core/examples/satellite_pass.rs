//! Elevation, slant range, path loss and delay seen from the beam centre as
//! the satellite moves away from overhead.
//!
//!     cargo run --example satellite_pass

use satmc::channel::fspl_db;
use satmc::geometry::{
    elevation_and_slant_range, slant_range_from_elevation, GroundPosition, SatelliteState, Visibility,
};
use satmc::{ScenarioConfig, SimTime};

fn main() {
    let cfg = ScenarioConfig::default();
    let s = &cfg.satellite;
    let sat = SatelliteState {
        altitude_m: s.altitude_m,
        speed_mps: s.speed_mps,
        ground_track_heading: s.heading_deg,
        position_at_epoch: GroundPosition::new(s.epoch_lat, s.epoch_lon),
    };
    let ue = GroundPosition::new(cfg.layout.center_lat, cfg.layout.center_lon);

    println!("  t_s  elev_deg  slant_km  fspl_db  one_way_ms");
    for step in 0..=16 {
        let t = SimTime::from_secs_f64(step as f64 * 25.0);
        match elevation_and_slant_range(&ue, &sat.propagate(t), sat.altitude_m) {
            Visibility::Visible {
                elevation,
                slant_range_m,
            } => println!(
                "{:>5.0} {:>9.2} {:>9.1} {:>8.2} {:>11.3}",
                t.as_secs_f64(),
                elevation.degrees(),
                slant_range_m / 1e3,
                fspl_db(slant_range_m, cfg.ntn.carrier_hz),
                slant_range_m / satmc::geometry::SPEED_OF_LIGHT_MPS * 1e3
            ),
            Visibility::BelowHorizon => println!("{:>5.0}  below horizon", t.as_secs_f64()),
        }
    }

    println!("\nelev_deg  slant_km");
    for e in [10.0f64, 20.0, 30.0, 45.0, 60.0, 90.0] {
        println!(
            "{e:>8.0} {:>9.1}",
            slant_range_from_elevation(e.to_radians(), sat.altitude_m) / 1e3
        );
    }
}
