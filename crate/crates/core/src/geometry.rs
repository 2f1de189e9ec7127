//! Terrestrial layout, UE placement and LEO pass geometry on a spherical Earth.

use serde::Serialize;

use crate::engine::{RngStream, SimTime};

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;
pub const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GroundPosition {
    pub latitude: f64,
    pub longitude: f64,
    pub altitude_m: f64,
}

impl GroundPosition {
    pub fn new(latitude: f64, longitude: f64) -> Self {
        GroundPosition {
            latitude,
            longitude,
            altitude_m: 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.latitude.abs() <= 90.0 && self.longitude.abs() <= 180.0
    }

    /// Great-circle central angle to `other`, radians (haversine).
    pub fn central_angle(&self, other: &GroundPosition) -> f64 {
        let (p1, p2) = (self.latitude.to_radians(), other.latitude.to_radians());
        let dp = p2 - p1;
        let dl = (other.longitude - self.longitude).to_radians();
        let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * a.sqrt().min(1.0).asin()
    }

    /// Point reached by travelling `angle` radians along a great circle with
    /// initial bearing `heading_deg` (clockwise from north).
    pub fn destination(&self, heading_deg: f64, angle: f64) -> GroundPosition {
        let p1 = self.latitude.to_radians();
        let l1 = self.longitude.to_radians();
        let th = heading_deg.to_radians();
        let p2 = (p1.sin() * angle.cos() + p1.cos() * angle.sin() * th.cos()).asin();
        let l2 = l1 + (th.sin() * angle.sin() * p1.cos()).atan2(angle.cos() - p1.sin() * p2.sin());
        let mut lon = l2.to_degrees();
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GroundPosition {
            latitude: p2.to_degrees(),
            longitude: lon,
            altitude_m: self.altitude_m,
        }
    }
}

/// East/north offsets in meters on the local tangent plane of the TN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPoint {
    pub east_m: f64,
    pub north_m: f64,
}

impl LocalPoint {
    pub fn new(east_m: f64, north_m: f64) -> Self {
        LocalPoint { east_m, north_m }
    }

    pub fn distance(&self, other: &LocalPoint) -> f64 {
        (self.east_m - other.east_m).hypot(self.north_m - other.north_m)
    }

    /// Azimuth of `other` seen from `self`, degrees clockwise from north in [0, 360).
    pub fn azimuth_to(&self, other: &LocalPoint) -> f64 {
        let az = (other.east_m - self.east_m)
            .atan2(other.north_m - self.north_m)
            .to_degrees();
        az.rem_euclid(360.0)
    }

    pub fn to_ground(&self, origin: &GroundPosition) -> GroundPosition {
        let lat0 = origin.latitude.to_radians();
        GroundPosition {
            latitude: origin.latitude + (self.north_m / EARTH_RADIUS_M).to_degrees(),
            longitude: origin.longitude + (self.east_m / (EARTH_RADIUS_M * lat0.cos())).to_degrees(),
            altitude_m: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SatelliteState {
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub ground_track_heading: f64,
    pub position_at_epoch: GroundPosition,
}

impl SatelliteState {
    /// Sub-satellite point at `t`, for a circular orbit at constant speed.
    pub fn propagate(&self, t: SimTime) -> GroundPosition {
        propagate_satellite(self, t)
    }
}

pub fn propagate_satellite(state: &SatelliteState, t: SimTime) -> GroundPosition {
    // ground-track speed is v * R / (R + h); the central angle is that over R
    let angle = state.speed_mps * t.as_secs_f64() / (EARTH_RADIUS_M + state.altitude_m);
    if angle == 0.0 {
        return state.position_at_epoch;
    }
    state.position_at_epoch.destination(state.ground_track_heading, angle)
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ElevationAngle(f64);

impl ElevationAngle {
    pub fn degrees(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Visibility {
    Visible {
        elevation: ElevationAngle,
        slant_range_m: f64,
    },
    BelowHorizon,
}

impl Visibility {
    pub fn slant_range_m(&self) -> Option<f64> {
        match self {
            Visibility::Visible { slant_range_m, .. } => Some(*slant_range_m),
            Visibility::BelowHorizon => None,
        }
    }
}

/// Slant range for elevation `elev_rad` at altitude `h` over a spherical Earth.
pub fn slant_range_from_elevation(elev_rad: f64, h: f64) -> f64 {
    let r = EARTH_RADIUS_M;
    let s = elev_rad.sin();
    (r * r * s * s + h * h + 2.0 * h * r).sqrt() - r * s
}

pub fn elevation_and_slant_range(ue: &GroundPosition, sat_subpoint: &GroundPosition, h: f64) -> Visibility {
    assert!(h > 0.0, "satellite altitude must be positive");
    let r = EARTH_RADIUS_M;
    let gamma = ue.central_angle(sat_subpoint);
    let sin_elev = ((r + h) * gamma.cos() - r) / (r * r + (r + h) * (r + h) - 2.0 * r * (r + h) * gamma.cos()).sqrt();
    if sin_elev <= 0.0 {
        return Visibility::BelowHorizon;
    }
    let elev = sin_elev.min(1.0).asin();
    Visibility::Visible {
        elevation: ElevationAngle(elev.to_degrees()),
        slant_range_m: slant_range_from_elevation(elev, h),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sector {
    pub site: usize,
    pub boresight_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TnLayout {
    pub site_positions: Vec<LocalPoint>,
    pub sectors: Vec<Sector>,
    pub isd_m: f64,
    pub origin: GroundPosition,
}

const SECTOR_BORESIGHTS: [f64; 3] = [30.0, 150.0, 270.0];

/// Sites on a triangular grid centred on `origin`, three 120° sectors each.
///
/// Supports 1 to 3 sites; the NTN beam centre is the site centroid, which
/// is placed at `origin`.
pub fn build_tn_layout(isd_m: f64, n_sites: usize, origin: GroundPosition) -> TnLayout {
    assert!(isd_m > 0.0, "ISD must be positive");
    assert!((1..=3).contains(&n_sites), "1..=3 sites supported");
    let raw: Vec<LocalPoint> = match n_sites {
        1 => vec![LocalPoint::new(0.0, 0.0)],
        2 => vec![LocalPoint::new(-isd_m / 2.0, 0.0), LocalPoint::new(isd_m / 2.0, 0.0)],
        _ => {
            // equilateral triangle, circumradius isd/sqrt(3)
            let rc = isd_m / 3f64.sqrt();
            [90.0f64, 210.0, 330.0]
                .iter()
                .map(|deg| {
                    let a = deg.to_radians();
                    LocalPoint::new(rc * a.cos(), rc * a.sin())
                })
                .collect()
        }
    };
    let sectors = (0..n_sites)
        .flat_map(|site| {
            SECTOR_BORESIGHTS
                .iter()
                .map(move |&b| Sector { site, boresight_deg: b })
        })
        .collect();
    TnLayout {
        site_positions: raw,
        sectors,
        isd_m,
        origin,
    }
}

impl TnLayout {
    pub fn centroid(&self) -> LocalPoint {
        let n = self.site_positions.len() as f64;
        let (e, nn) = self
            .site_positions
            .iter()
            .fold((0.0, 0.0), |(e, n), p| (e + p.east_m, n + p.north_m));
        LocalPoint::new(e / n, nn / n)
    }

    pub fn ntn_beam_center(&self) -> GroundPosition {
        self.centroid().to_ground(&self.origin)
    }

    pub fn sector_site(&self, sector: usize) -> LocalPoint {
        self.site_positions[self.sectors[sector].site]
    }

    pub fn placement_region(&self, sector: usize, min_distance_m: f64) -> PlacementRegion {
        PlacementRegion {
            center: self.sector_site(sector),
            boresight_deg: self.sectors[sector].boresight_deg,
            half_width_deg: 60.0,
            r_min: min_distance_m,
            r_max: self.isd_m / 2.0,
        }
    }
}

/// Annular 120° sector around a site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacementRegion {
    pub center: LocalPoint,
    pub boresight_deg: f64,
    pub half_width_deg: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl PlacementRegion {
    pub fn contains(&self, p: &LocalPoint) -> bool {
        let d = self.center.distance(p);
        if d < self.r_min - 1e-6 || d > self.r_max + 1e-6 {
            return false;
        }
        angle_diff_deg(self.center.azimuth_to(p), self.boresight_deg).abs() <= self.half_width_deg + 1e-9
    }

    /// Area-uniform sample.
    pub fn sample(&self, rng: &mut RngStream) -> LocalPoint {
        let u = rng.unit();
        let v = rng.unit();
        let r = (u * (self.r_max * self.r_max - self.r_min * self.r_min) + self.r_min * self.r_min).sqrt();
        let az = (self.boresight_deg + (2.0 * v - 1.0) * self.half_width_deg).to_radians();
        LocalPoint::new(self.center.east_m + r * az.sin(), self.center.north_m + r * az.cos())
    }
}

/// Signed difference `a - b` wrapped into (-180, 180].
pub fn angle_diff_deg(a: f64, b: f64) -> f64 {
    let mut d = (a - b).rem_euclid(360.0);
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DroppedUe {
    pub sector: usize,
    pub position: LocalPoint,
}

pub fn drop_ues(layout: &TnLayout, per_sector: usize, min_distance_m: f64, rng: &mut RngStream) -> Vec<DroppedUe> {
    let mut out = Vec::with_capacity(per_sector * layout.sectors.len());
    for sector in 0..layout.sectors.len() {
        let region = layout.placement_region(sector, min_distance_m);
        for _ in 0..per_sector {
            out.push(DroppedUe {
                sector,
                position: region.sample(rng),
            });
        }
    }
    out
}

/// Hexagonal beam lattice in axial coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HexCell {
    pub q: i32,
    pub r: i32,
}

impl HexCell {
    pub fn ring_distance(&self) -> i32 {
        (self.q.abs() + self.r.abs() + (self.q + self.r).abs()) / 2
    }

    /// Three-colouring of the hex lattice; equal colours share a sub-band.
    pub fn reuse3_color(&self) -> i32 {
        (self.q - self.r).rem_euclid(3)
    }

    /// Centre offset for a lattice with neighbour spacing `spacing_m`.
    pub fn center(&self, spacing_m: f64) -> LocalPoint {
        let q = self.q as f64;
        let r = self.r as f64;
        LocalPoint::new(spacing_m * (q + r / 2.0), spacing_m * (r * 3f64.sqrt() / 2.0))
    }
}

/// All cells within `tiers` rings of the origin, excluding the origin.
pub fn wraparound_ring(tiers: i32) -> Vec<HexCell> {
    let mut out = vec![];
    for q in -tiers..=tiers {
        for r in -tiers..=tiers {
            let c = HexCell { q, r };
            let d = c.ring_distance();
            if d >= 1 && d <= tiers {
                out.push(c);
            }
        }
    }
    out
}

pub fn propagation_delay(distance_m: f64) -> SimTime {
    SimTime::from_secs_f64(distance_m / SPEED_OF_LIGHT_MPS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sat() -> SatelliteState {
        SatelliteState {
            altitude_m: 600_000.0,
            speed_mps: 7560.0,
            ground_track_heading: 0.0,
            position_at_epoch: GroundPosition::new(41.59, 1.74),
        }
    }

    #[test]
    fn propagate_identity_at_zero() {
        assert_eq!(propagate_satellite(&sat(), SimTime::ZERO), sat().position_at_epoch);
    }

    #[test]
    fn propagate_one_second_north() {
        let p = propagate_satellite(&sat(), SimTime::from_secs_f64(1.0));
        // ground speed v*R/(R+h) over the meters-per-degree of the sphere
        let expected = 7560.0 * 6_371_000.0 / 6_971_000.0 / (std::f64::consts::PI * 6_371_000.0 / 180.0);
        assert!((p.latitude - 41.59 - expected).abs() < 1e-9);
        assert!((expected - 0.0621).abs() < 1e-4);
        assert!((p.longitude - 1.74).abs() < 1e-9);
        assert_eq!(p, propagate_satellite(&sat(), SimTime::from_secs_f64(1.0)));
    }

    #[test]
    fn overhead_geometry() {
        let ue = GroundPosition::new(41.59, 1.74);
        match elevation_and_slant_range(&ue, &ue, 600_000.0) {
            Visibility::Visible {
                elevation,
                slant_range_m,
            } => {
                assert!((elevation.degrees() - 90.0).abs() < 1e-6);
                assert_eq!(slant_range_m, 600_000.0);
            }
            _ => panic!("overhead must be visible"),
        }
    }

    #[test]
    fn slant_range_at_30_degrees() {
        let d = slant_range_from_elevation(30f64.to_radians(), 600_000.0);
        assert!((d / 1000.0 - 1075.1).abs() < 0.05, "{d}");
    }

    #[test]
    fn elevation_route_matches_law_of_cosines() {
        // pick a central angle, compute elevation, then compare the two slant-range routes
        let ue = GroundPosition::new(0.0, 0.0);
        for deg in [0.5, 2.0, 5.0, 10.0, 15.0] {
            let sub = GroundPosition::new(deg, 0.0);
            let gamma = deg.to_radians();
            let (r, h) = (EARTH_RADIUS_M, 600_000.0);
            let direct = (r * r + (r + h).powi(2) - 2.0 * r * (r + h) * gamma.cos()).sqrt();
            let d = elevation_and_slant_range(&ue, &sub, h).slant_range_m().unwrap();
            assert!((d - direct).abs() < 1e-3, "{deg}: {d} vs {direct}");
        }
    }

    #[test]
    fn below_horizon_signalled() {
        let ue = GroundPosition::new(0.0, 0.0);
        let sub = GroundPosition::new(30.0, 0.0);
        assert_eq!(
            elevation_and_slant_range(&ue, &sub, 600_000.0),
            Visibility::BelowHorizon
        );
    }

    #[test]
    fn slant_range_decreasing_in_elevation() {
        let mut prev = f64::INFINITY;
        for e in 1..=90 {
            let d = slant_range_from_elevation((e as f64).to_radians(), 600_000.0);
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn tn_layout_distances() {
        let l = build_tn_layout(7500.0, 3, GroundPosition::new(41.59, 1.74));
        assert_eq!(l.sectors.len(), 9);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let d = l.site_positions[i].distance(&l.site_positions[j]);
                assert!((d - 7500.0).abs() < 1e-6, "{d}");
            }
        }
        let c = l.centroid();
        assert!(c.east_m.abs() < 1e-9 && c.north_m.abs() < 1e-9);
        assert_eq!(l.ntn_beam_center(), l.origin);
    }

    #[test]
    fn single_site_layout() {
        let l = build_tn_layout(7500.0, 1, GroundPosition::new(0.0, 0.0));
        assert_eq!(l.site_positions.len(), 1);
        assert_eq!(l.sectors.len(), 3);
    }

    #[test]
    fn drop_counts_and_membership() {
        let l = build_tn_layout(7500.0, 3, GroundPosition::new(41.59, 1.74));
        let mut rng = RngStream::new(1, 1, "ue-drop");
        assert_eq!(drop_ues(&l, 10, 35.0, &mut rng).len(), 90);
        assert!(drop_ues(&l, 0, 35.0, &mut rng).is_empty());
        let ues = drop_ues(&l, 1200, 35.0, &mut rng);
        assert!(ues.len() >= 10_000);
        for u in &ues {
            let region = l.placement_region(u.sector, 35.0);
            assert!(region.contains(&u.position), "{u:?}");
        }
    }

    #[test]
    fn reuse3_two_tiers_has_six_cochannel() {
        let ring = wraparound_ring(2);
        assert_eq!(ring.len(), 18);
        let center = HexCell { q: 0, r: 0 };
        let same = ring
            .iter()
            .filter(|c| c.reuse3_color() == center.reuse3_color())
            .count();
        assert_eq!(same, 6);
        // first tier never shares the centre colour
        assert!(ring
            .iter()
            .filter(|c| c.ring_distance() == 1)
            .all(|c| c.reuse3_color() != 0));
    }
}
