//! Link model: path loss, shadowing, antenna gains, RSRP, SINR and link
//! adaptation.
//!
//! TN links use a rural-macro two-branch path loss with a LOS state and
//! lognormal shadowing drawn once per UE-sector pair. NTN links are LOS
//! free-space with a flat beam (0 dB inside the 3 dB radius, a fixed floor
//! outside). There is no fast fading and no BLER: a UE is served error-free
//! at the highest MCS whose threshold its SINR meets.

use serde::Serialize;

use crate::config::{McsTableParams, NtnParams, ScenarioConfig, TnParams};
use crate::engine::{RngStream, SimTime};
use crate::geometry::{
    angle_diff_deg, elevation_and_slant_range, wraparound_ring, GroundPosition, LocalPoint, SatelliteState, TnLayout,
    Visibility, SPEED_OF_LIGHT_MPS,
};
use crate::ids::{NodeId, UeId};

pub const SUBCARRIER_SPACING_HZ: f64 = 15_000.0;
pub const SUBCARRIERS_PER_PRB: u32 = 12;
pub const SYMBOLS_PER_TTI: u32 = 14;
const MIN_TN_DISTANCE_M: f64 = 35.0;
const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Power sum of dBm values.
pub fn sum_dbm(values: impl IntoIterator<Item = f64>) -> f64 {
    linear_to_db(values.into_iter().map(db_to_linear).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum LosState {
    Los,
    Nlos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct McsIndex(u8);

impl McsIndex {
    pub const MAX: u8 = 31;

    pub fn new(v: u8) -> Option<Self> {
        (v <= Self::MAX).then_some(McsIndex(v))
    }

    pub fn value(self) -> u8 {
        self.0
    }
}

impl std::fmt::Display for McsIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// SINR thresholds and spectral efficiencies for the 32 MCS indices.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    thresholds_db: Vec<f64>,
    efficiencies: Vec<f64>,
}

impl McsTable {
    pub fn from_params(p: &McsTableParams) -> Self {
        assert_eq!(p.thresholds_db.len(), 32);
        assert_eq!(p.efficiencies.len(), 32);
        McsTable {
            thresholds_db: p.thresholds_db.clone(),
            efficiencies: p.efficiencies.clone(),
        }
    }

    /// Highest index whose threshold is met, clamped to 0..=31.
    pub fn sinr_to_mcs(&self, sinr_db: f64) -> McsIndex {
        let met = self.thresholds_db.partition_point(|&th| th <= sinr_db);
        McsIndex(met.saturating_sub(1) as u8)
    }

    /// Useful bits per resource element.
    pub fn spectral_efficiency(&self, mcs: McsIndex) -> f64 {
        self.efficiencies[mcs.0 as usize]
    }

    pub fn threshold_db(&self, mcs: McsIndex) -> f64 {
        self.thresholds_db[mcs.0 as usize]
    }

    /// Transport block size in whole bits for `res` resource elements.
    pub fn tb_bits(&self, mcs: McsIndex, res: u32) -> u64 {
        (self.spectral_efficiency(mcs) * res as f64).floor() as u64
    }

    pub fn rows(&self) -> impl Iterator<Item = (McsIndex, f64, f64)> + '_ {
        (0..32u8).map(move |i| {
            (
                McsIndex(i),
                self.thresholds_db[i as usize],
                self.efficiencies[i as usize],
            )
        })
    }
}

/// Resource elements available per 1 ms TTI.
pub fn res_per_tti(prbs: u32) -> u32 {
    prbs * SUBCARRIERS_PER_PRB * SYMBOLS_PER_TTI
}

pub fn los_probability(distance_m: f64) -> f64 {
    if distance_m <= 10.0 {
        1.0
    } else {
        (-(distance_m - 10.0) / 1000.0).exp()
    }
}

/// Free-space path loss with distance in meters and carrier in hertz.
pub fn fspl_db(distance_m: f64, carrier_hz: f64) -> f64 {
    20.0 * (distance_m / 1000.0).log10() + 20.0 * (carrier_hz / 1e9).log10() + 92.45
}

pub fn ntn_pathloss(slant_range_m: f64, carrier_hz: f64) -> f64 {
    assert!(slant_range_m > 0.0);
    fspl_db(slant_range_m, carrier_hz)
}

/// Rural-macro path loss without shadowing. Distances below 35 m are clamped.
pub fn tn_pathloss(distance_m: f64, los: LosState, p: &TnParams) -> f64 {
    let d2d = distance_m.max(MIN_TN_DISTANCE_M);
    let dh = p.bs_height_m - p.ue_height_m;
    let d3d = (d2d * d2d + dh * dh).sqrt();
    let fc = p.carrier_hz / 1e9;
    let h = p.building_height_m;
    let pl1 = |d: f64| {
        20.0 * (40.0 * std::f64::consts::PI * d * fc / 3.0).log10() + (0.03 * h.powf(1.72)).min(10.0) * d.log10()
            - (0.044 * h.powf(1.72)).min(14.77)
            + 0.002 * h.log10() * d
    };
    let d_bp = 2.0 * std::f64::consts::PI * p.bs_height_m * p.ue_height_m * p.carrier_hz / 3e8;
    let los_pl = if d2d <= d_bp {
        pl1(d3d)
    } else {
        pl1(d_bp) + 40.0 * (d3d / d_bp).log10()
    };
    match los {
        LosState::Los => los_pl,
        LosState::Nlos => {
            let w = p.street_width_m;
            let hbs = p.bs_height_m;
            let nlos = 161.04 - 7.1 * w.log10() + 7.5 * h.log10() - (24.37 - 3.7 * (h / hbs).powi(2)) * hbs.log10()
                + (43.42 - 3.1 * hbs.log10()) * (d3d.log10() - 3.0)
                + 20.0 * fc.log10()
                - (3.2 * (11.75 * p.ue_height_m).log10().powi(2) - 4.97);
            nlos.max(los_pl)
        }
    }
}

/// Horizontal sector pattern, dBi.
pub fn tn_antenna_gain(offset_deg: f64, p: &TnParams) -> f64 {
    let a = 12.0 * (offset_deg / p.antenna_hpbw_deg).powi(2);
    p.antenna_max_gain_dbi - a.min(p.antenna_max_attenuation_db)
}

/// Thermal noise over one subcarrier plus the receiver noise figure.
pub fn noise_per_re_dbm(noise_figure_db: f64) -> f64 {
    THERMAL_NOISE_DBM_PER_HZ + linear_to_db(SUBCARRIER_SPACING_HZ) + noise_figure_db
}

/// Satellite EIRP per subcarrier.
pub fn ntn_eirp_per_re_dbm(p: &NtnParams) -> f64 {
    p.eirp_density_dbw_per_mhz + 30.0 + linear_to_db(SUBCARRIER_SPACING_HZ / 1e6)
}

/// TN transmit power per subcarrier, spread evenly over the occupied grid.
pub fn tn_tx_per_re_dbm(p: &TnParams) -> f64 {
    p.tx_power_dbm - linear_to_db((p.prbs * SUBCARRIERS_PER_PRB) as f64)
}

/// The active MCS table followed by the derived per-RE link constants, as CSV.
pub fn table_dump_csv(cfg: &ScenarioConfig) -> String {
    let table = McsTable::from_params(&cfg.mcs);
    let mut out = String::from("mcs,sinr_threshold_db,spectral_efficiency\n");
    for (i, th, eff) in table.rows() {
        out.push_str(&format!("{i},{th:.4},{eff:.4}\n"));
    }
    out.push_str("\nconstant,value\n");
    let consts = [
        ("noise_per_re_dbm", noise_per_re_dbm(cfg.ue.noise_figure_db)),
        ("tn_tx_per_re_dbm", tn_tx_per_re_dbm(&cfg.tn)),
        ("ntn_eirp_per_re_dbm", ntn_eirp_per_re_dbm(&cfg.ntn)),
        ("ntn_additional_loss_db", cfg.ntn.additional_loss_db),
        (
            "fspl_at_altitude_db",
            fspl_db(cfg.satellite.altitude_m, cfg.ntn.carrier_hz),
        ),
        ("tn_res_per_tti", res_per_tti(cfg.tn.prbs) as f64),
        ("ntn_res_per_tti", res_per_tti(cfg.ntn.prbs) as f64),
    ];
    for (k, v) in consts {
        out.push_str(&format!("{k},{v:.4}\n"));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsrpMeasurement {
    pub ue_id: UeId,
    pub cell_id: NodeId,
    pub rsrp_dbm: f64,
    pub time: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinrReport {
    pub ue_id: UeId,
    pub cell_id: NodeId,
    pub sinr_db: f64,
    pub timestamp: SimTime,
}

/// SINR from signal and interferer powers in dBm (same per-RE reference).
pub fn sinr_db(signal_dbm: f64, noise_dbm: f64, interferers_dbm: &[f64]) -> f64 {
    let denom = db_to_linear(noise_dbm) + interferers_dbm.iter().map(|&i| db_to_linear(i)).sum::<f64>();
    linear_to_db(db_to_linear(signal_dbm) / denom)
}

/// Static TN link state for one UE toward one sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TnLink {
    pub distance_m: f64,
    pub los: LosState,
    pub shadowing_db: f64,
    pub antenna_gain_dbi: f64,
    /// Received power per RE, dBm.
    pub rx_per_re_dbm: f64,
}

/// NTN link toward the serving beam at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NtnLinkSample {
    pub slant_range_m: f64,
    pub elevation_deg: f64,
    pub rsrp_dbm: f64,
    pub sinr_db: f64,
    pub one_way_delay: SimTime,
}

/// A co-channel wraparound beam footprint.
#[derive(Debug, Clone, Copy, PartialEq)]
struct WaBeam {
    center: LocalPoint,
}

/// Per-run channel state: TN links drawn at drop time plus NTN geometry.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    ntn: NtnParams,
    ue_gain_dbi: f64,
    noise_re_dbm: f64,
    satellite: SatelliteState,
    origin: GroundPosition,
    beam_center: LocalPoint,
    wa_cochannel: Vec<WaBeam>,
    ue_positions: Vec<LocalPoint>,
    ue_ground: Vec<GroundPosition>,
    /// `tn_links[ue][sector]`
    tn_links: Vec<Vec<TnLink>>,
    pub mcs: McsTable,
}

impl ChannelModel {
    pub fn new(
        cfg: &ScenarioConfig,
        layout: &TnLayout,
        ue_positions: &[LocalPoint],
        los_rng: &mut RngStream,
        shadow_rng: &mut RngStream,
    ) -> Self {
        let tn = cfg.tn.clone();
        let tx_re = tn_tx_per_re_dbm(&tn);
        let tn_links = ue_positions
            .iter()
            .map(|ue| {
                (0..layout.sectors.len())
                    .map(|s| {
                        let site = layout.sector_site(s);
                        let d = site.distance(ue);
                        let los = if los_rng.unit() < los_probability(d) {
                            LosState::Los
                        } else {
                            LosState::Nlos
                        };
                        let sigma = match los {
                            LosState::Los => tn.shadowing_los_db,
                            LosState::Nlos => tn.shadowing_nlos_db,
                        };
                        let shadowing_db = shadow_rng.normal(0.0, sigma);
                        let offset = angle_diff_deg(site.azimuth_to(ue), layout.sectors[s].boresight_deg);
                        let antenna_gain_dbi = tn_antenna_gain(offset, &tn);
                        let rx = tx_re + antenna_gain_dbi + cfg.ue.antenna_gain_dbi
                            - tn_pathloss(d, los, &tn)
                            - shadowing_db;
                        TnLink {
                            distance_m: d,
                            los,
                            shadowing_db,
                            antenna_gain_dbi,
                            rx_per_re_dbm: rx,
                        }
                    })
                    .collect()
            })
            .collect();

        let beam_center = layout.centroid();
        let reuse = cfg.ntn.frequency_reuse as i32;
        let wa_cochannel = wraparound_ring(cfg.ntn.wa_tiers as i32)
            .into_iter()
            .filter(|c| reuse == 1 || (c.q - c.r).rem_euclid(reuse) == 0)
            .map(|c| {
                let off = c.center(cfg.ntn.beam_spacing_m);
                WaBeam {
                    center: LocalPoint::new(beam_center.east_m + off.east_m, beam_center.north_m + off.north_m),
                }
            })
            .collect();

        ChannelModel {
            ntn: cfg.ntn.clone(),
            ue_gain_dbi: cfg.ue.antenna_gain_dbi,
            noise_re_dbm: noise_per_re_dbm(cfg.ue.noise_figure_db),
            satellite: SatelliteState {
                altitude_m: cfg.satellite.altitude_m,
                speed_mps: cfg.satellite.speed_mps,
                ground_track_heading: cfg.satellite.heading_deg,
                position_at_epoch: GroundPosition::new(cfg.satellite.epoch_lat, cfg.satellite.epoch_lon),
            },
            origin: layout.origin,
            beam_center,
            wa_cochannel,
            ue_positions: ue_positions.to_vec(),
            ue_ground: ue_positions.iter().map(|p| p.to_ground(&layout.origin)).collect(),
            tn_links,
            mcs: McsTable::from_params(&cfg.mcs),
        }
    }

    pub fn ue_count(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn tn_link(&self, ue: usize, sector: usize) -> &TnLink {
        &self.tn_links[ue][sector]
    }

    pub fn tn_rsrp_dbm(&self, ue: usize, sector: usize) -> f64 {
        self.tn_links[ue][sector].rx_per_re_dbm
    }

    /// Downlink SINR toward `serving` with every other TN sector co-channel
    /// and fully loaded.
    pub fn tn_sinr_db(&self, ue: usize, serving: usize) -> f64 {
        let links = &self.tn_links[ue];
        let interferers: Vec<f64> = links
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != serving)
            .map(|(_, l)| l.rx_per_re_dbm)
            .collect();
        sinr_db(links[serving].rx_per_re_dbm, self.noise_re_dbm, &interferers)
    }

    pub fn noise_per_re_dbm(&self) -> f64 {
        self.noise_re_dbm
    }

    pub fn satellite(&self) -> &SatelliteState {
        &self.satellite
    }

    fn beam_gain_db(&self, ue: &LocalPoint, center: &LocalPoint) -> f64 {
        if ue.distance(center) <= self.ntn.beam_radius_m {
            0.0
        } else {
            -self.ntn.outside_beam_attenuation_db
        }
    }

    /// NTN link sample toward the serving beam at `t`; `None` below the horizon.
    pub fn ntn_sample(&self, ue: usize, t: SimTime) -> Option<NtnLinkSample> {
        let sub = self.satellite.propagate(t);
        self.ntn_sample_at(ue, &sub, t)
    }

    pub fn ntn_sample_at(&self, ue: usize, sat_subpoint: &GroundPosition, _t: SimTime) -> Option<NtnLinkSample> {
        let (elev, slant) =
            match elevation_and_slant_range(&self.ue_ground[ue], sat_subpoint, self.satellite.altitude_m) {
                Visibility::Visible {
                    elevation,
                    slant_range_m,
                } => (elevation.degrees(), slant_range_m),
                Visibility::BelowHorizon => return None,
            };
        let common = ntn_eirp_per_re_dbm(&self.ntn) + self.ue_gain_dbi
            - ntn_pathloss(slant, self.ntn.carrier_hz)
            - self.ntn.additional_loss_db;
        let pos = &self.ue_positions[ue];
        let rsrp = common + self.beam_gain_db(pos, &self.beam_center);
        let interferers: Vec<f64> = self
            .wa_cochannel
            .iter()
            .map(|b| common + self.beam_gain_db(pos, &b.center))
            .collect();
        Some(NtnLinkSample {
            slant_range_m: slant,
            elevation_deg: elev,
            rsrp_dbm: rsrp,
            sinr_db: sinr_db(rsrp, self.noise_re_dbm, &interferers),
            // transparent payload: service + feeder, gateway under the beam
            one_way_delay: SimTime::from_secs_f64(2.0 * slant / SPEED_OF_LIGHT_MPS),
        })
    }

    pub fn wa_cochannel_count(&self) -> usize {
        self.wa_cochannel.len()
    }

    pub fn origin(&self) -> &GroundPosition {
        &self.origin
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    fn table() -> McsTable {
        McsTable::from_params(&ScenarioConfig::default().mcs)
    }

    #[test]
    fn los_probability_values() {
        assert_eq!(los_probability(10.0), 1.0);
        assert_eq!(los_probability(0.0), 1.0);
        assert!((los_probability(1010.0) - (-1f64).exp()).abs() < 1e-12);
        assert!((los_probability(1010.0) - 0.3679).abs() < 1e-4);
        let mut prev = 1.0;
        for d in (0..20_000).step_by(37) {
            let p = los_probability(d as f64);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn fspl_values() {
        assert!((ntn_pathloss(600_000.0, 2e9) - 154.03).abs() < 0.01);
        assert!((ntn_pathloss(1_075_100.0, 2e9) - 159.09).abs() < 0.01);
        let halved = ntn_pathloss(300_000.0, 2e9);
        assert!((ntn_pathloss(600_000.0, 2e9) - halved - 20.0 * 2f64.log10()).abs() < 1e-9);
        assert!((fspl_db(1000.0, 2e9) - 98.47).abs() < 0.01);
    }

    #[test]
    fn tn_los_at_one_km_matches_hand_evaluation() {
        let p = ScenarioConfig::default().tn;
        // hand evaluation of the LOS branch below breakpoint
        let d3d = (1000f64.powi(2) + 33.5f64.powi(2)).sqrt();
        let h = 5f64;
        let hand = 20.0 * (40.0 * std::f64::consts::PI * d3d * 2.0 / 3.0).log10() + 0.03 * h.powf(1.72) * d3d.log10()
            - 0.044 * h.powf(1.72)
            + 0.002 * h.log10() * d3d;
        let got = tn_pathloss(1000.0, LosState::Los, &p);
        assert!((got - hand).abs() < 1e-9);
        // FSPL plus a small positive model offset
        let offset = got - fspl_db(1000.0, 2e9);
        assert!(offset > 1.0 && offset < 3.0, "offset {offset}");
    }

    #[test]
    fn nlos_not_below_los_and_monotone() {
        let p = ScenarioConfig::default().tn;
        assert!(tn_pathloss(2000.0, LosState::Nlos, &p) >= tn_pathloss(2000.0, LosState::Los, &p));
        for los in [LosState::Los, LosState::Nlos] {
            let mut prev = 0.0;
            for d in (35..10_000).step_by(13) {
                let pl = tn_pathloss(d as f64, los, &p);
                assert!(pl > prev, "{los:?} at {d}");
                prev = pl;
            }
        }
        assert_eq!(
            tn_pathloss(5.0, LosState::Los, &p),
            tn_pathloss(35.0, LosState::Los, &p)
        );
    }

    #[test]
    fn mcs_clamps_and_monotone() {
        let t = table();
        assert_eq!(t.sinr_to_mcs(-20.0).value(), 0);
        assert_eq!(t.sinr_to_mcs(40.0).value(), 31);
        let mut prev = 0;
        for i in -300..400 {
            let m = t.sinr_to_mcs(i as f64 / 10.0).value();
            assert!(m >= prev);
            prev = m;
        }
        assert!(t.rows().zip(t.rows().skip(1)).all(|(a, b)| b.1 > a.1 && b.2 >= a.2));
    }

    #[test]
    fn spectral_efficiency_ladder() {
        let t = table();
        let e = |i| t.spectral_efficiency(McsIndex::new(i).unwrap());
        assert!(e(31) > e(15) && e(15) > e(0));
        assert!(t.rows().all(|(_, _, eff)| eff >= e(0) && e(0) > 0.0));
        // 0.6016 bits/RE over 1000 REs = 601.6 -> 601 bits
        assert_eq!(t.tb_bits(McsIndex::new(6).unwrap(), 1000), 601);
        assert_eq!(res_per_tti(52), 8736);
    }

    #[test]
    fn exact_threshold_selects_that_index() {
        let t = table();
        for (m, th, _) in t.rows() {
            assert_eq!(t.sinr_to_mcs(th), m);
        }
    }

    #[test]
    fn sinr_degenerates_to_snr_and_drops_with_interference() {
        let snr = sinr_db(-100.0, -110.0, &[]);
        assert!((snr - 10.0).abs() < 1e-12);
        let one = sinr_db(-100.0, -110.0, &[-115.0]);
        let two = sinr_db(-100.0, -110.0, &[-115.0, -120.0]);
        assert!(two < one && one < snr);
    }

    #[test]
    fn antenna_pattern() {
        let p = ScenarioConfig::default().tn;
        assert_eq!(tn_antenna_gain(0.0, &p), p.antenna_max_gain_dbi);
        assert!((tn_antenna_gain(32.5, &p) - (p.antenna_max_gain_dbi - 3.0)).abs() < 1e-9);
        assert_eq!(tn_antenna_gain(180.0, &p), p.antenna_max_gain_dbi - 30.0);
    }
}
