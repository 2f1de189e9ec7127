//! Scenario configuration: defaults, the `key = value` file format, env
//! overrides and validation.
//!
//! File format: one `key = value` per line, `[section]` headers, `#` comments.
//! Keys are addressed as `section.key`; a key outside any section is looked
//! up verbatim. Every key has a default, so an empty file is a complete
//! configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Secondary-node addition policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Policy {
    Off,
    RsrpBased,
    BoBased,
    McsBased,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Off, Policy::RsrpBased, Policy::BoBased, Policy::McsBased];

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Off => "OFF",
            Policy::RsrpBased => "RSRP_BASED",
            Policy::BoBased => "BO_BASED",
            Policy::McsBased => "MCS_BASED",
        }
    }

    /// Short lowercase label used in CLI lists and output file names.
    pub fn short(self) -> &'static str {
        match self {
            Policy::Off => "off",
            Policy::RsrpBased => "rsrp",
            Policy::BoBased => "bo",
            Policy::McsBased => "mcs",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Policy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OFF" => Ok(Policy::Off),
            "RSRP" | "RSRP_BASED" => Ok(Policy::RsrpBased),
            "BO" | "BO_BASED" => Ok(Policy::BoBased),
            "MCS" | "MCS_BASED" => Ok(Policy::McsBased),
            other => Err(format!(
                "unknown policy `{other}` (expected OFF, RSRP_BASED, BO_BASED or MCS_BASED)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimParams {
    pub sim_time_s: f64,
    pub warmup_s: f64,
    pub base_seed: u64,
    pub rng_runs: u64,
    pub channel_update_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayoutParams {
    pub n_sites: usize,
    pub sectors_per_site: usize,
    pub ues_per_sector: usize,
    pub isd_m: f64,
    pub min_ue_distance_m: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    /// Serve each UE from its strongest TN sector instead of its drop sector.
    pub strongest_cell_association: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SatelliteParams {
    pub altitude_m: f64,
    pub speed_mps: f64,
    pub epoch_lat: f64,
    pub epoch_lon: f64,
    pub heading_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TnParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub prbs: u32,
    pub tx_power_dbm: f64,
    pub antenna_max_gain_dbi: f64,
    pub antenna_hpbw_deg: f64,
    pub antenna_max_attenuation_db: f64,
    pub bs_height_m: f64,
    pub ue_height_m: f64,
    pub building_height_m: f64,
    pub street_width_m: f64,
    pub shadowing_los_db: f64,
    pub shadowing_nlos_db: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NtnParams {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub prbs: u32,
    pub eirp_density_dbw_per_mhz: f64,
    pub additional_loss_db: f64,
    pub beam_radius_m: f64,
    pub beam_spacing_m: f64,
    pub outside_beam_attenuation_db: f64,
    pub wa_tiers: u32,
    pub frequency_reuse: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UeParams {
    pub antenna_gain_dbi: f64,
    pub noise_figure_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrafficParams {
    pub cbr_rate_bps: f64,
    pub packet_bytes: u32,
    pub max_queue_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdcpParams {
    pub reorder_timer_ms: f64,
    pub reorder_buffer_pdus: usize,
    /// MN drops queued PDUs that the UE's receive window has already passed.
    pub discard_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McPolicyConfig {
    pub policy: Policy,
    pub rsrp_th_dbm: f64,
    pub mcs_th: u8,
    pub o_th: f64,
    pub l_th: f64,
    pub t_eval_ms: f64,
    pub t_req_period_ms: f64,
    pub t_add_ms: f64,
    pub t_val_ms: f64,
    pub rsrp_report_interval_ms: f64,
    pub load_window_ms: f64,
    pub xn_latency_ms: f64,
    pub uu_latency_ms: f64,
    pub rr_primary_priority: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitParams {
    pub alpha: f64,
    pub delta_t_ms: f64,
    pub t_off_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McsTableParams {
    pub thresholds_db: Vec<f64>,
    pub efficiencies: Vec<f64>,
}

/// Single source of truth for one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub sim: SimParams,
    pub layout: LayoutParams,
    pub satellite: SatelliteParams,
    pub tn: TnParams,
    pub ntn: NtnParams,
    pub ue: UeParams,
    pub traffic: TrafficParams,
    pub pdcp: PdcpParams,
    pub mc: McPolicyConfig,
    pub split: SplitParams,
    pub mcs: McsTableParams,
}

/// 256-point ladder shape; thresholds put each entry at 0.75 of Shannon capacity.
pub const DEFAULT_MCS_THRESHOLDS_DB: [f64; 32] = [
    -12.55, -11.26, -10.25, -8.21, -6.16, -3.8, -1.29, 0.97, 2.93, 4.65, 5.79, 6.87, 8.04, 9.16, 9.89, 10.6, 11.89,
    13.13, 14.33, 15.54, 16.82, 18.09, 19.28, 20.49, 21.37, 22.27, 23.62, 24.98, 26.36, 27.74, 28.73, 29.72,
];

pub const DEFAULT_MCS_EFFICIENCIES: [f64; 32] = [
    0.0586, 0.0781, 0.0977, 0.1523, 0.2344, 0.377, 0.6016, 0.877, 1.1758, 1.4766, 1.6953, 1.9141, 2.1602, 2.4063,
    2.5703, 2.7305, 3.0293, 3.3223, 3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.332, 5.5547, 5.8906, 6.2266,
    6.5703, 6.9141, 7.1602, 7.4063,
];

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            sim: SimParams {
                sim_time_s: 5.0,
                warmup_s: 2.5,
                base_seed: 20230,
                rng_runs: 15,
                channel_update_ms: 10.0,
            },
            layout: LayoutParams {
                n_sites: 3,
                sectors_per_site: 3,
                ues_per_sector: 10,
                isd_m: 7500.0,
                min_ue_distance_m: 35.0,
                center_lat: 41.59,
                center_lon: 1.74,
                strongest_cell_association: true,
            },
            satellite: SatelliteParams {
                altitude_m: 600_000.0,
                speed_mps: 7560.0,
                epoch_lat: 41.59,
                epoch_lon: 1.74,
                heading_deg: 0.0,
            },
            tn: TnParams {
                carrier_hz: 2e9,
                bandwidth_hz: 10e6,
                prbs: 52,
                tx_power_dbm: 46.0,
                antenna_max_gain_dbi: 15.0,
                antenna_hpbw_deg: 65.0,
                antenna_max_attenuation_db: 30.0,
                bs_height_m: 35.0,
                ue_height_m: 1.5,
                building_height_m: 5.0,
                street_width_m: 20.0,
                shadowing_los_db: 4.0,
                shadowing_nlos_db: 8.0,
                latency_ms: 0.5,
            },
            ntn: NtnParams {
                carrier_hz: 2e9,
                bandwidth_hz: 10e6,
                prbs: 52,
                eirp_density_dbw_per_mhz: 34.0,
                additional_loss_db: 2.0,
                beam_radius_m: 25_000.0,
                beam_spacing_m: 43_301.27,
                outside_beam_attenuation_db: 30.0,
                wa_tiers: 2,
                frequency_reuse: 3,
            },
            ue: UeParams {
                antenna_gain_dbi: 0.0,
                noise_figure_db: 7.0,
            },
            traffic: TrafficParams {
                cbr_rate_bps: 3_200_000.0,
                packet_bytes: 1500,
                max_queue_bytes: 500_000,
            },
            pdcp: PdcpParams {
                reorder_timer_ms: 100.0,
                reorder_buffer_pdus: 1000,
                discard_passed: true,
            },
            mc: McPolicyConfig {
                policy: Policy::McsBased,
                rsrp_th_dbm: -111.0,
                mcs_th: 15,
                o_th: 0.8,
                l_th: 0.975,
                t_eval_ms: 10.0,
                t_req_period_ms: 100.0,
                t_add_ms: 100.0,
                t_val_ms: 120.0,
                rsrp_report_interval_ms: 120.0,
                load_window_ms: 100.0,
                xn_latency_ms: 0.0,
                uu_latency_ms: 0.0,
                rr_primary_priority: true,
            },
            split: SplitParams {
                alpha: 0.6,
                delta_t_ms: 25.0,
                t_off_ms: 25.0,
            },
            mcs: McsTableParams {
                thresholds_db: DEFAULT_MCS_THRESHOLDS_DB.to_vec(),
                efficiencies: DEFAULT_MCS_EFFICIENCIES.to_vec(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Io(String),
    Syntax(String),
    UnknownKey,
    DuplicateKey,
    TypeMismatch(String),
    Constraint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub path: Option<PathBuf>,
    pub line: Option<usize>,
    pub key: Option<String>,
    pub kind: ConfigErrorKind,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.path {
            write!(f, "{}", p.display())?;
            if let Some(l) = self.line {
                write!(f, ":{l}")?;
            }
            write!(f, ": ")?;
        } else if let Some(l) = self.line {
            write!(f, "line {l}: ")?;
        }
        if let Some(k) = &self.key {
            write!(f, "key `{k}`: ")?;
        }
        match &self.kind {
            ConfigErrorKind::Io(e) => write!(f, "cannot read config: {e}"),
            ConfigErrorKind::Syntax(e) => write!(f, "syntax error: {e}"),
            ConfigErrorKind::UnknownKey => write!(f, "unknown key"),
            ConfigErrorKind::DuplicateKey => write!(f, "key set twice"),
            ConfigErrorKind::TypeMismatch(e) => write!(f, "type mismatch: {e}"),
            ConfigErrorKind::Constraint(e) => write!(f, "constraint violated: {e}"),
        }
    }
}

impl ConfigError {
    fn at(line: Option<usize>, key: Option<&str>, kind: ConfigErrorKind) -> Self {
        ConfigError {
            path: None,
            line,
            key: key.map(str::to_string),
            kind,
        }
    }

    pub fn with_path(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }
}

trait ConfigValue: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> Result<Self, String> {
        let v: f64 = s.parse().map_err(|_| format!("expected a number, got `{s}`"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("expected a finite number, got `{s}`"))
        }
    }
    fn render(&self) -> String {
        format!("{self}")
    }
}

macro_rules! int_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|_| format!("expected a non-negative integer, got `{s}`"))
            }
            fn render(&self) -> String {
                format!("{self}")
            }
        }
    )*};
}
int_value!(u8, u32, u64, usize);

impl ConfigValue for bool {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "on" | "1" => Ok(true),
            "false" | "no" | "off" | "0" => Ok(false),
            _ => Err(format!("expected true/false, got `{s}`")),
        }
    }
    fn render(&self) -> String {
        format!("{self}")
    }
}

impl ConfigValue for Policy {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.parse()
    }
    fn render(&self) -> String {
        self.as_str().to_string()
    }
}

impl ConfigValue for Vec<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.split(',').map(|p| f64::parse_value(p.trim())).collect()
    }
    fn render(&self) -> String {
        self.iter().map(|v| v.render()).collect::<Vec<_>>().join(", ")
    }
}

macro_rules! config_keys {
    ($( $key:literal => $($field:ident).+ ),* $(,)?) => {
        /// Every recognised key, in dump order.
        pub const CONFIG_KEYS: &[&str] = &[$($key),*];

        impl ScenarioConfig {
            fn set_key(&mut self, key: &str, value: &str) -> Result<(), Option<String>> {
                match key {
                    $( $key => {
                        self.$($field).+ = ConfigValue::parse_value(value).map_err(Some)?;
                        Ok(())
                    } )*
                    _ => Err(None),
                }
            }

            /// `(key, rendered value)` for every key.
            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![$( ($key, self.$($field).+.render()) ),*]
            }
        }
    };
}

config_keys! {
    "sim.sim_time_s" => sim.sim_time_s,
    "sim.warmup_s" => sim.warmup_s,
    "sim.base_seed" => sim.base_seed,
    "sim.rng_runs" => sim.rng_runs,
    "sim.channel_update_ms" => sim.channel_update_ms,
    "layout.n_sites" => layout.n_sites,
    "layout.sectors_per_site" => layout.sectors_per_site,
    "layout.ues_per_sector" => layout.ues_per_sector,
    "layout.isd_m" => layout.isd_m,
    "layout.min_ue_distance_m" => layout.min_ue_distance_m,
    "layout.center_lat" => layout.center_lat,
    "layout.center_lon" => layout.center_lon,
    "layout.strongest_cell_association" => layout.strongest_cell_association,
    "satellite.altitude_m" => satellite.altitude_m,
    "satellite.speed_mps" => satellite.speed_mps,
    "satellite.epoch_lat" => satellite.epoch_lat,
    "satellite.epoch_lon" => satellite.epoch_lon,
    "satellite.heading_deg" => satellite.heading_deg,
    "tn.carrier_hz" => tn.carrier_hz,
    "tn.bandwidth_hz" => tn.bandwidth_hz,
    "tn.prbs" => tn.prbs,
    "tn.tx_power_dbm" => tn.tx_power_dbm,
    "tn.antenna_max_gain_dbi" => tn.antenna_max_gain_dbi,
    "tn.antenna_hpbw_deg" => tn.antenna_hpbw_deg,
    "tn.antenna_max_attenuation_db" => tn.antenna_max_attenuation_db,
    "tn.bs_height_m" => tn.bs_height_m,
    "tn.ue_height_m" => tn.ue_height_m,
    "tn.building_height_m" => tn.building_height_m,
    "tn.street_width_m" => tn.street_width_m,
    "tn.shadowing_los_db" => tn.shadowing_los_db,
    "tn.shadowing_nlos_db" => tn.shadowing_nlos_db,
    "tn.latency_ms" => tn.latency_ms,
    "ntn.carrier_hz" => ntn.carrier_hz,
    "ntn.bandwidth_hz" => ntn.bandwidth_hz,
    "ntn.prbs" => ntn.prbs,
    "ntn.eirp_density_dbw_per_mhz" => ntn.eirp_density_dbw_per_mhz,
    "ntn.additional_loss_db" => ntn.additional_loss_db,
    "ntn.beam_radius_m" => ntn.beam_radius_m,
    "ntn.beam_spacing_m" => ntn.beam_spacing_m,
    "ntn.outside_beam_attenuation_db" => ntn.outside_beam_attenuation_db,
    "ntn.wa_tiers" => ntn.wa_tiers,
    "ntn.frequency_reuse" => ntn.frequency_reuse,
    "ue.antenna_gain_dbi" => ue.antenna_gain_dbi,
    "ue.noise_figure_db" => ue.noise_figure_db,
    "traffic.cbr_rate_bps" => traffic.cbr_rate_bps,
    "traffic.packet_bytes" => traffic.packet_bytes,
    "traffic.max_queue_bytes" => traffic.max_queue_bytes,
    "pdcp.reorder_timer_ms" => pdcp.reorder_timer_ms,
    "pdcp.reorder_buffer_pdus" => pdcp.reorder_buffer_pdus,
    "pdcp.discard_passed" => pdcp.discard_passed,
    "mc.policy" => mc.policy,
    "mc.rsrp_th_dbm" => mc.rsrp_th_dbm,
    "mc.mcs_th" => mc.mcs_th,
    "mc.o_th" => mc.o_th,
    "mc.l_th" => mc.l_th,
    "mc.t_eval_ms" => mc.t_eval_ms,
    "mc.t_req_period_ms" => mc.t_req_period_ms,
    "mc.t_add_ms" => mc.t_add_ms,
    "mc.t_val_ms" => mc.t_val_ms,
    "mc.rsrp_report_interval_ms" => mc.rsrp_report_interval_ms,
    "mc.load_window_ms" => mc.load_window_ms,
    "mc.xn_latency_ms" => mc.xn_latency_ms,
    "mc.uu_latency_ms" => mc.uu_latency_ms,
    "mc.rr_primary_priority" => mc.rr_primary_priority,
    "split.alpha" => split.alpha,
    "split.delta_t_ms" => split.delta_t_ms,
    "split.t_off_ms" => split.t_off_ms,
    "mcs.thresholds_db" => mcs.thresholds_db,
    "mcs.efficiencies" => mcs.efficiencies,
}

/// Environment variable that overrides `key`: `mc.rsrp_th_dbm` → `SIM_MC_RSRP_TH_DBM`.
pub fn env_var_name(key: &str) -> String {
    format!("SIM_{}", key.replace('.', "_").to_ascii_uppercase())
}

impl ScenarioConfig {
    /// Parses config text on top of the defaults and validates the result.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let lines = cfg.apply_text(text)?;
        cfg.validate_with_lines(&lines)?;
        Ok(cfg)
    }

    /// Applies `key = value` text; returns the line each key was set on.
    pub fn apply_text(&mut self, text: &str) -> Result<BTreeMap<String, usize>, ConfigError> {
        let mut section = String::new();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    ConfigError::at(
                        Some(lineno),
                        None,
                        ConfigErrorKind::Syntax("unterminated section header".into()),
                    )
                })?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(ConfigError::at(
                        Some(lineno),
                        None,
                        ConfigErrorKind::Syntax(format!("bad section name `{name}`")),
                    ));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError::at(
                    Some(lineno),
                    None,
                    ConfigErrorKind::Syntax("expected `key = value`".into()),
                )
            })?;
            let k = k.trim();
            let v = v.trim();
            if k.is_empty() {
                return Err(ConfigError::at(
                    Some(lineno),
                    None,
                    ConfigErrorKind::Syntax("empty key".into()),
                ));
            }
            let full = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if seen.contains_key(&full) {
                return Err(ConfigError::at(
                    Some(lineno),
                    Some(&full),
                    ConfigErrorKind::DuplicateKey,
                ));
            }
            self.set(&full, v).map_err(|e| ConfigError {
                line: Some(lineno),
                ..e
            })?;
            seen.insert(full, lineno);
        }
        Ok(seen)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_key(key, value).map_err(|e| match e {
            None => ConfigError::at(None, Some(key), ConfigErrorKind::UnknownKey),
            Some(msg) => ConfigError::at(None, Some(key), ConfigErrorKind::TypeMismatch(msg)),
        })
    }

    /// Applies `SIM_*` overrides from an iterator of environment pairs.
    /// Variables that do not name a known key are ignored.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let map: BTreeMap<String, String> = vars
            .into_iter()
            .map(|(k, v)| (k.as_ref().to_string(), v.as_ref().to_string()))
            .collect();
        for key in CONFIG_KEYS {
            if let Some(v) = map.get(&env_var_name(key)) {
                self.set(key, v.trim()).map_err(|e| ConfigError {
                    key: Some(format!("{key} (from {})", env_var_name(key))),
                    ..e
                })?;
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with_lines(&BTreeMap::new())
    }

    fn validate_with_lines(&self, lines: &BTreeMap<String, usize>) -> Result<(), ConfigError> {
        let fail = |key: &str, msg: String| {
            Err(ConfigError::at(
                lines.get(key).copied(),
                Some(key),
                ConfigErrorKind::Constraint(msg),
            ))
        };
        let positive = [
            ("sim.sim_time_s", self.sim.sim_time_s),
            ("sim.channel_update_ms", self.sim.channel_update_ms),
            ("layout.isd_m", self.layout.isd_m),
            ("satellite.altitude_m", self.satellite.altitude_m),
            ("tn.carrier_hz", self.tn.carrier_hz),
            ("tn.bandwidth_hz", self.tn.bandwidth_hz),
            ("tn.antenna_hpbw_deg", self.tn.antenna_hpbw_deg),
            ("tn.bs_height_m", self.tn.bs_height_m),
            ("tn.ue_height_m", self.tn.ue_height_m),
            ("tn.building_height_m", self.tn.building_height_m),
            ("tn.street_width_m", self.tn.street_width_m),
            ("ntn.carrier_hz", self.ntn.carrier_hz),
            ("ntn.bandwidth_hz", self.ntn.bandwidth_hz),
            ("ntn.beam_radius_m", self.ntn.beam_radius_m),
            ("ntn.beam_spacing_m", self.ntn.beam_spacing_m),
            ("traffic.cbr_rate_bps", self.traffic.cbr_rate_bps),
            ("pdcp.reorder_timer_ms", self.pdcp.reorder_timer_ms),
            ("mc.t_eval_ms", self.mc.t_eval_ms),
            ("mc.t_req_period_ms", self.mc.t_req_period_ms),
            ("mc.t_add_ms", self.mc.t_add_ms),
            ("mc.t_val_ms", self.mc.t_val_ms),
            ("mc.rsrp_report_interval_ms", self.mc.rsrp_report_interval_ms),
            ("mc.load_window_ms", self.mc.load_window_ms),
            ("split.delta_t_ms", self.split.delta_t_ms),
            ("split.t_off_ms", self.split.t_off_ms),
        ];
        for (k, v) in positive {
            if !(v > 0.0) {
                return fail(k, format!("must be > 0, got {v}"));
            }
        }
        let non_negative = [
            ("sim.warmup_s", self.sim.warmup_s),
            ("layout.min_ue_distance_m", self.layout.min_ue_distance_m),
            ("satellite.speed_mps", self.satellite.speed_mps),
            ("tn.shadowing_los_db", self.tn.shadowing_los_db),
            ("tn.shadowing_nlos_db", self.tn.shadowing_nlos_db),
            ("tn.latency_ms", self.tn.latency_ms),
            ("tn.antenna_max_attenuation_db", self.tn.antenna_max_attenuation_db),
            ("ntn.additional_loss_db", self.ntn.additional_loss_db),
            ("ntn.outside_beam_attenuation_db", self.ntn.outside_beam_attenuation_db),
            ("ue.noise_figure_db", self.ue.noise_figure_db),
            ("mc.xn_latency_ms", self.mc.xn_latency_ms),
            ("mc.uu_latency_ms", self.mc.uu_latency_ms),
        ];
        for (k, v) in non_negative {
            if v < 0.0 {
                return fail(k, format!("must be >= 0, got {v}"));
            }
        }
        if self.sim.warmup_s >= self.sim.sim_time_s {
            return fail(
                "sim.warmup_s",
                format!(
                    "warmup {} must be below sim_time {}",
                    self.sim.warmup_s, self.sim.sim_time_s
                ),
            );
        }
        if self.sim.rng_runs == 0 {
            return fail("sim.rng_runs", "must be >= 1".into());
        }
        if !(1..=3).contains(&self.layout.n_sites) {
            return fail(
                "layout.n_sites",
                format!("1..=3 sites supported, got {}", self.layout.n_sites),
            );
        }
        if self.layout.sectors_per_site != 3 {
            return fail("layout.sectors_per_site", "only 3-sector sites are modelled".into());
        }
        if self.layout.min_ue_distance_m >= self.layout.isd_m / 2.0 {
            return fail("layout.min_ue_distance_m", "must be below isd/2".into());
        }
        for (k, v, lim) in [
            ("layout.center_lat", self.layout.center_lat, 90.0),
            ("layout.center_lon", self.layout.center_lon, 180.0),
            ("satellite.epoch_lat", self.satellite.epoch_lat, 90.0),
            ("satellite.epoch_lon", self.satellite.epoch_lon, 180.0),
        ] {
            if v.abs() > lim {
                return fail(k, format!("|{v}| exceeds {lim}"));
            }
        }
        if self.tn.prbs == 0 {
            return fail("tn.prbs", "must be >= 1".into());
        }
        if self.ntn.prbs == 0 {
            return fail("ntn.prbs", "must be >= 1".into());
        }
        if self.ntn.frequency_reuse == 0 {
            return fail("ntn.frequency_reuse", "must be >= 1".into());
        }
        if self.traffic.packet_bytes == 0 {
            return fail("traffic.packet_bytes", "must be >= 1".into());
        }
        if self.traffic.max_queue_bytes < self.traffic.packet_bytes as u64 {
            return fail("traffic.max_queue_bytes", "must hold at least one packet".into());
        }
        if self.pdcp.reorder_buffer_pdus == 0 {
            return fail("pdcp.reorder_buffer_pdus", "must be >= 1".into());
        }
        if self.mc.mcs_th > 31 {
            return fail("mc.mcs_th", format!("MCS index must be 0..=31, got {}", self.mc.mcs_th));
        }
        if !(self.mc.o_th > 0.0 && self.mc.o_th <= 1.0) {
            return fail("mc.o_th", "must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.mc.l_th) {
            return fail("mc.l_th", "must be in [0, 1]".into());
        }
        if !(self.split.alpha > 0.0 && self.split.alpha <= 1.0) {
            return fail("split.alpha", "must be in (0, 1]".into());
        }
        let th = &self.mcs.thresholds_db;
        let eff = &self.mcs.efficiencies;
        if th.len() != 32 {
            return fail("mcs.thresholds_db", format!("need 32 entries, got {}", th.len()));
        }
        if eff.len() != 32 {
            return fail("mcs.efficiencies", format!("need 32 entries, got {}", eff.len()));
        }
        if th.windows(2).any(|w| w[1] <= w[0]) {
            return fail("mcs.thresholds_db", "must be strictly increasing".into());
        }
        if eff[0] <= 0.0 || eff.windows(2).any(|w| w[1] < w[0]) {
            return fail("mcs.efficiencies", "must be positive and non-decreasing".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::at(None, None, ConfigErrorKind::Io(e.to_string())).with_path(path))?;
        Self::parse_str(&text).map_err(|e| e.with_path(path))
    }

    /// Defaults, then the file (if any), then `SIM_*` variables from `env`.
    pub fn resolve<I, K, V>(path: Option<&Path>, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut cfg = ScenarioConfig::default();
        let mut lines = BTreeMap::new();
        if let Some(p) = path {
            let text = fs::read_to_string(p)
                .map_err(|e| ConfigError::at(None, None, ConfigErrorKind::Io(e.to_string())).with_path(p))?;
            lines = cfg.apply_text(&text).map_err(|e| e.with_path(p))?;
        }
        cfg.apply_env(env)?;
        let validated = cfg.validate_with_lines(&lines);
        match path {
            Some(p) => validated.map_err(|e| e.with_path(p))?,
            None => validated?,
        }
        Ok(cfg)
    }

    /// Renders the effective configuration in the file format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (key, value) in self.entries() {
            let (section, name) = key.split_once('.').expect("all keys are sectioned");
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section;
            }
            out.push_str(&format!("{name} = {value}\n"));
        }
        out
    }

    pub fn sim_time(&self) -> crate::engine::SimTime {
        crate::engine::SimTime::from_secs_f64(self.sim.sim_time_s)
    }

    pub fn warmup(&self) -> crate::engine::SimTime {
        crate::engine::SimTime::from_secs_f64(self.sim.warmup_s)
    }

    pub fn total_ues(&self) -> usize {
        self.layout.n_sites * self.layout.sectors_per_site * self.layout.ues_per_sector
    }
}

/// Milliseconds to engine time.
pub fn ms(v: f64) -> crate::engine::SimTime {
    crate::engine::SimTime::from_secs_f64(v * 1e-3)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ScenarioConfig::parse_str("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.sim.sim_time_s, 5.0);
        assert_eq!(cfg.sim.warmup_s, 2.5);
        assert_eq!(cfg.layout.ues_per_sector, 10);
        assert_eq!(cfg.layout.isd_m, 7500.0);
        assert_eq!(cfg.mc.rsrp_th_dbm, -111.0);
        assert_eq!(cfg.mc.mcs_th, 15);
        assert_eq!(cfg.mc.l_th, 0.975);
        assert_eq!(cfg.mc.o_th, 0.8);
        assert_eq!(cfg.mc.t_val_ms, 120.0);
        assert_eq!(cfg.split.alpha, 0.6);
        assert_eq!(cfg.sim.rng_runs, 15);
        assert_eq!(cfg.total_ues(), 90);
    }

    #[test]
    fn warmup_beyond_sim_time_is_rejected_with_line() {
        let err = ScenarioConfig::parse_str("[sim]\n# comment\nwarmup_s = 6.0\n").unwrap_err();
        assert_eq!(err.key.as_deref(), Some("sim.warmup_s"));
        assert_eq!(err.line, Some(3));
        assert!(matches!(err.kind, ConfigErrorKind::Constraint(_)));
    }

    #[test]
    fn policy_enum_parses() {
        let cfg = ScenarioConfig::parse_str("[mc]\npolicy = MCS_BASED\n").unwrap();
        assert_eq!(cfg.mc.policy, Policy::McsBased);
        let cfg = ScenarioConfig::parse_str("[mc]\npolicy = rsrp_based").unwrap();
        assert_eq!(cfg.mc.policy, Policy::RsrpBased);
    }

    #[test]
    fn unknown_key_rejected() {
        let err = ScenarioConfig::parse_str("[mc]\n\nbogus = 1\n").unwrap_err();
        assert_eq!(err.kind, ConfigErrorKind::UnknownKey);
        assert_eq!(err.line, Some(3));
        assert_eq!(err.key.as_deref(), Some("mc.bogus"));
    }

    #[test]
    fn type_mismatch_reported() {
        let err = ScenarioConfig::parse_str("[mc]\nmcs_th = high\n").unwrap_err();
        assert!(matches!(err.kind, ConfigErrorKind::TypeMismatch(_)));
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn dump_round_trips() {
        let mut cfg = ScenarioConfig::default();
        cfg.mc.policy = Policy::BoBased;
        cfg.split.alpha = 0.55;
        let back = ScenarioConfig::parse_str(&cfg.dump()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn env_override_mapping() {
        assert_eq!(env_var_name("mc.rsrp_th_dbm"), "SIM_MC_RSRP_TH_DBM");
        let mut cfg = ScenarioConfig::default();
        cfg.apply_env([("SIM_MC_RSRP_TH_DBM", "-100"), ("SIM_UNRELATED", "x")])
            .unwrap();
        assert_eq!(cfg.mc.rsrp_th_dbm, -100.0);
    }

    #[test]
    fn mcs_table_must_be_monotone() {
        let mut th: Vec<String> = DEFAULT_MCS_THRESHOLDS_DB.iter().map(|v| v.to_string()).collect();
        th.swap(3, 4);
        let text = format!("[mcs]\nthresholds_db = {}\n", th.join(","));
        let err = ScenarioConfig::parse_str(&text).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("mcs.thresholds_db"));
    }
}
