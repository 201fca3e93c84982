//! Run configuration: a flat `key = value` text format with section
//! prefixes (`mac.`, `radio.`, `scenario.`, ...), merged with command-line
//! overrides. The effective configuration is echoed back into the output
//! directory in the same format, so every run is reproducible from its
//! artifacts.

use std::path::Path;

use vanetsim_core::error::{Error, Result};
use vanetsim_core::estimator::SensingClusterMode;
use vanetsim_core::mac::{EifsMode, MacPhyParams, SimOptions};
use vanetsim_core::metrics::MeanDelayMode;
use vanetsim_core::radio::RadioConfig;
use vanetsim_core::scenarios::{ScenarioSpec, DEFAULT_LANE_WIDTH_M};

/// Scenario selector plus every per-kind parameter, so a single settings
/// record can round-trip any scenario through the file format.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSettings {
    pub kind: String,
    pub seed: u64,
    pub n_neighbors: u32,
    pub neighbor_distance_m: f64,
    pub total_neighbors: u32,
    pub separation_m: f64,
    pub length_m: f64,
    pub lanes_per_direction: u32,
    pub n_obu: u32,
    pub lane_width_m: f64,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        ScenarioSettings {
            kind: "highway".into(),
            seed: 1,
            n_neighbors: 40,
            neighbor_distance_m: 60.0,
            total_neighbors: 80,
            separation_m: 0.0,
            length_m: 1500.0,
            lanes_per_direction: 3,
            n_obu: 500,
            lane_width_m: DEFAULT_LANE_WIDTH_M,
        }
    }
}

impl ScenarioSettings {
    pub fn to_spec(&self) -> Result<ScenarioSpec> {
        match self.kind.as_str() {
            "collocated" => Ok(ScenarioSpec::Collocated {
                n_neighbors: self.n_neighbors,
                neighbor_distance_m: self.neighbor_distance_m,
                seed: self.seed,
            }),
            "hidden_sweep" => Ok(ScenarioSpec::HiddenSweep {
                total_neighbors: self.total_neighbors,
                separation_m: self.separation_m,
                seed: self.seed,
            }),
            "highway" => Ok(ScenarioSpec::Highway {
                length_m: self.length_m,
                lanes_per_direction: self.lanes_per_direction,
                n_obu: self.n_obu,
                lane_width_m: self.lane_width_m,
                seed: self.seed,
            }),
            other => Err(Error::Config(format!("unknown scenario kind '{other}'"))),
        }
    }
}

/// Effective run settings: defaults, overridden by a config file,
/// overridden by flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub seed: u64,
    pub duration_s: f64,
    /// Independent seed-averaged runs pooled before aggregation.
    pub runs: u32,
    pub params: MacPhyParams,
    pub radio: RadioConfig,
    pub options: SimOptions,
    pub mean_delay_mode: MeanDelayMode,
    pub sensing_cluster: SensingClusterMode,
    pub scenario: ScenarioSettings,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            seed: 1,
            duration_s: 30.0,
            runs: 1,
            params: MacPhyParams::default(),
            radio: RadioConfig::default(),
            options: SimOptions::default(),
            // All-packets averaging: the additive two-cluster estimate
            // needs expected delays, and table rows stay resolvable at
            // modest sample counts. Delayed-only averaging is available
            // via metrics.mean_delay_all_packets = false.
            mean_delay_mode: MeanDelayMode::AllPackets,
            sensing_cluster: SensingClusterMode::default(),
            scenario: ScenarioSettings::default(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::format(Some(line), format!("bad value '{value}' for {key}")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::format(
            Some(line),
            format!("bad boolean '{other}' for {key}"),
        )),
    }
}

impl Settings {
    /// Parse `key = value` lines; `#` starts a comment. Unknown keys are
    /// rejected with their line number.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::format(Some(lineno), format!("expected 'key = value', got '{line}'"))
            })?;
            self.apply_kv(lineno, key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    /// Apply one `key = value` override.
    pub fn apply_kv(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_num(line, key, value)?,
            "duration_s" => self.duration_s = parse_num(line, key, value)?,
            "runs" => self.runs = parse_num(line, key, value)?,

            "mac.tx_power_dbm" => {
                // Table-I transmit power drives both the MAC record and the
                // link budget.
                self.params.tx_power_dbm = parse_num(line, key, value)?;
                self.radio.budget.tx_power_dbm = self.params.tx_power_dbm;
            }
            "mac.packet_length_bytes" => self.params.packet_length_bytes = parse_num(line, key, value)?,
            "mac.cam_rate_hz" => self.params.cam_rate_hz = parse_num(line, key, value)?,
            "mac.channel_width_mhz" => self.params.channel_width_mhz = parse_num(line, key, value)?,
            "mac.header_rate_mbps" => self.params.header_rate_mbps = parse_num(line, key, value)?,
            "mac.payload_rate_mbps" => self.params.payload_rate_mbps = parse_num(line, key, value)?,
            "mac.cw_min" => self.params.cw_min = parse_num(line, key, value)?,
            "mac.aifsn" => self.params.aifsn = parse_num(line, key, value)?,
            "mac.slot_us" => self.params.slot_us = parse_num(line, key, value)?,
            "mac.sifs_us" => self.params.sifs_us = parse_num(line, key, value)?,
            "mac.eifs_us" => self.params.eifs_us = parse_num(line, key, value)?,
            "mac.plcp_overhead_us" => self.params.plcp_overhead_us = parse_num(line, key, value)?,
            "mac.eifs_mode" => {
                self.options.eifs_mode = match value {
                    "replace_sifs_core" => EifsMode::ReplaceSifsCore,
                    "append_to_aifs" => EifsMode::AppendToAifs,
                    other => {
                        return Err(Error::format(
                            Some(line),
                            format!("bad eifs_mode '{other}'"),
                        ))
                    }
                }
            }

            "radio.pl_d0_db" => self.radio.model.pl_d0_db = parse_num(line, key, value)?,
            "radio.d0_m" => self.radio.model.d0_m = parse_num(line, key, value)?,
            "radio.exponent" => self.radio.model.exponent = parse_num(line, key, value)?,
            "radio.sinr_threshold_db" => {
                self.radio.budget.sinr_threshold_db = parse_num(line, key, value)?
            }
            "radio.rx_sensitivity_dbm" => {
                self.radio.budget.rx_sensitivity_dbm = parse_num(line, key, value)?
            }
            "radio.carrier_sense_dbm" => {
                self.radio.budget.carrier_sense_dbm = parse_num(line, key, value)?
            }
            "radio.noise_floor_dbm" => {
                self.radio.budget.noise_floor_dbm = parse_num(line, key, value)?
            }
            "radio.rx_lockout" => self.options.rx_lockout = parse_bool(line, key, value)?,
            "radio.loss_all_in_range" => {
                self.options.loss_all_in_range = parse_bool(line, key, value)?
            }

            "metrics.mean_delay_all_packets" => {
                self.mean_delay_mode = if parse_bool(line, key, value)? {
                    MeanDelayMode::AllPackets
                } else {
                    MeanDelayMode::DelayedOnly
                }
            }
            "estimator.sensing_cluster" => {
                self.sensing_cluster = match value {
                    "annulus" => SensingClusterMode::Annulus,
                    "full_disc" => SensingClusterMode::FullDisc,
                    other => {
                        return Err(Error::format(
                            Some(line),
                            format!("bad sensing_cluster '{other}'"),
                        ))
                    }
                }
            }

            "scenario.kind" => self.scenario.kind = value.to_string(),
            "scenario.seed" => self.scenario.seed = parse_num(line, key, value)?,
            "scenario.n_neighbors" => self.scenario.n_neighbors = parse_num(line, key, value)?,
            "scenario.neighbor_distance_m" => {
                self.scenario.neighbor_distance_m = parse_num(line, key, value)?
            }
            "scenario.total_neighbors" => {
                self.scenario.total_neighbors = parse_num(line, key, value)?
            }
            "scenario.separation_m" => self.scenario.separation_m = parse_num(line, key, value)?,
            "scenario.length_m" => self.scenario.length_m = parse_num(line, key, value)?,
            "scenario.lanes_per_direction" => {
                self.scenario.lanes_per_direction = parse_num(line, key, value)?
            }
            "scenario.n_obu" => self.scenario.n_obu = parse_num(line, key, value)?,
            "scenario.lane_width_m" => self.scenario.lane_width_m = parse_num(line, key, value)?,

            other => {
                return Err(Error::format(Some(line), format!("unknown key '{other}'")));
            }
        }
        Ok(())
    }

    /// Render the effective configuration; parsing it back reproduces the
    /// same settings.
    pub fn to_config_text(&self) -> String {
        let p = &self.params;
        let m = &self.radio.model;
        let b = &self.radio.budget;
        let s = &self.scenario;
        let mut out = String::new();
        out.push_str("# effective configuration\n");
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("duration_s = {}\n", self.duration_s));
        out.push_str(&format!("runs = {}\n", self.runs));
        out.push_str(&format!("mac.tx_power_dbm = {}\n", p.tx_power_dbm));
        out.push_str(&format!("mac.packet_length_bytes = {}\n", p.packet_length_bytes));
        out.push_str(&format!("mac.cam_rate_hz = {}\n", p.cam_rate_hz));
        out.push_str(&format!("mac.channel_width_mhz = {}\n", p.channel_width_mhz));
        out.push_str(&format!("mac.header_rate_mbps = {}\n", p.header_rate_mbps));
        out.push_str(&format!("mac.payload_rate_mbps = {}\n", p.payload_rate_mbps));
        out.push_str(&format!("mac.cw_min = {}\n", p.cw_min));
        out.push_str(&format!("mac.aifsn = {}\n", p.aifsn));
        out.push_str(&format!("mac.slot_us = {}\n", p.slot_us));
        out.push_str(&format!("mac.sifs_us = {}\n", p.sifs_us));
        out.push_str(&format!("mac.eifs_us = {}\n", p.eifs_us));
        out.push_str(&format!("mac.plcp_overhead_us = {}\n", p.plcp_overhead_us));
        out.push_str(&format!(
            "mac.eifs_mode = {}\n",
            match self.options.eifs_mode {
                EifsMode::ReplaceSifsCore => "replace_sifs_core",
                EifsMode::AppendToAifs => "append_to_aifs",
            }
        ));
        out.push_str(&format!("radio.pl_d0_db = {}\n", m.pl_d0_db));
        out.push_str(&format!("radio.d0_m = {}\n", m.d0_m));
        out.push_str(&format!("radio.exponent = {}\n", m.exponent));
        out.push_str(&format!("radio.sinr_threshold_db = {}\n", b.sinr_threshold_db));
        out.push_str(&format!("radio.rx_sensitivity_dbm = {}\n", b.rx_sensitivity_dbm));
        out.push_str(&format!("radio.carrier_sense_dbm = {}\n", b.carrier_sense_dbm));
        out.push_str(&format!("radio.noise_floor_dbm = {}\n", b.noise_floor_dbm));
        out.push_str(&format!("radio.rx_lockout = {}\n", self.options.rx_lockout));
        out.push_str(&format!(
            "radio.loss_all_in_range = {}\n",
            self.options.loss_all_in_range
        ));
        out.push_str(&format!(
            "metrics.mean_delay_all_packets = {}\n",
            self.mean_delay_mode == MeanDelayMode::AllPackets
        ));
        out.push_str(&format!(
            "estimator.sensing_cluster = {}\n",
            match self.sensing_cluster {
                SensingClusterMode::Annulus => "annulus",
                SensingClusterMode::FullDisc => "full_disc",
            }
        ));
        out.push_str(&format!("scenario.kind = {}\n", s.kind));
        out.push_str(&format!("scenario.seed = {}\n", s.seed));
        out.push_str(&format!("scenario.n_neighbors = {}\n", s.n_neighbors));
        out.push_str(&format!("scenario.neighbor_distance_m = {}\n", s.neighbor_distance_m));
        out.push_str(&format!("scenario.total_neighbors = {}\n", s.total_neighbors));
        out.push_str(&format!("scenario.separation_m = {}\n", s.separation_m));
        out.push_str(&format!("scenario.length_m = {}\n", s.length_m));
        out.push_str(&format!("scenario.lanes_per_direction = {}\n", s.lanes_per_direction));
        out.push_str(&format!("scenario.n_obu = {}\n", s.n_obu));
        out.push_str(&format!("scenario.lane_width_m = {}\n", s.lane_width_m));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_text_round_trips() {
        let mut s = Settings::default();
        s.seed = 77;
        s.duration_s = 12.5;
        s.params.cam_rate_hz = 20.0;
        s.options.rx_lockout = false;
        s.scenario.kind = "hidden_sweep".into();
        s.scenario.separation_m = 120.0;
        let text = s.to_config_text();
        let mut back = Settings::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn unknown_keys_carry_line_numbers() {
        let mut s = Settings::default();
        let err = s.apply_text("seed = 1\nbogus.key = 2\n").unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut s = Settings::default();
        s.apply_text("# comment\n\nseed = 9 # trailing\n").unwrap();
        assert_eq!(s.seed, 9);
    }

    #[test]
    fn tx_power_updates_both_records() {
        let mut s = Settings::default();
        s.apply_kv(1, "mac.tx_power_dbm", "20").unwrap();
        assert_eq!(s.params.tx_power_dbm, 20.0);
        assert_eq!(s.radio.budget.tx_power_dbm, 20.0);
    }

    #[test]
    fn scenario_spec_construction() {
        let mut s = Settings::default();
        s.apply_text("scenario.kind = collocated\nscenario.n_neighbors = 10\n")
            .unwrap();
        let spec = s.scenario.to_spec().unwrap();
        assert!(matches!(
            spec,
            ScenarioSpec::Collocated { n_neighbors: 10, .. }
        ));
        s.scenario.kind = "nope".into();
        assert!(s.scenario.to_spec().is_err());
    }
}
