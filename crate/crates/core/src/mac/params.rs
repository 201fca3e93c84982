//! MAC/PHY parameter record.

use crate::error::{Error, Result};

/// Timing, power, rate and packet configuration for a run.
///
/// Defaults are the 802.11p CAM setup this project studies: 17 dBm,
/// 450-byte packets at 10 Hz on a 10 MHz channel, BPSK header at 3 Mbps,
/// QPSK payload at 6 Mbps, CWmin 15, AIFSN 7, 13 µs slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacPhyParams {
    pub tx_power_dbm: f64,
    pub packet_length_bytes: u32,
    pub cam_rate_hz: f64,
    pub channel_width_mhz: f64,
    pub header_rate_mbps: f64,
    pub payload_rate_mbps: f64,
    /// Contention window upper bound; back-off draws are uniform integers
    /// in `[0, cw_min]`.
    pub cw_min: u16,
    pub aifsn: u32,
    pub slot_us: u64,
    pub sifs_us: u64,
    pub eifs_us: u64,
    /// PLCP preamble + SIGNAL duration at 10 MHz.
    pub plcp_overhead_us: u64,
}

impl Default for MacPhyParams {
    fn default() -> Self {
        MacPhyParams {
            tx_power_dbm: 17.0,
            packet_length_bytes: 450,
            cam_rate_hz: 10.0,
            channel_width_mhz: 10.0,
            header_rate_mbps: 3.0,
            payload_rate_mbps: 6.0,
            cw_min: 15,
            aifsn: 7,
            slot_us: 13,
            sifs_us: 32,
            eifs_us: 120,
            plcp_overhead_us: 40,
        }
    }
}

/// How the contention gap is extended after sensing an undecodable frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EifsMode {
    /// EIFS replaces the SIFS core of AIFS: gap = eifs + aifsn * slot.
    /// This is the 802.11 rule and the default.
    #[default]
    ReplaceSifsCore,
    /// EIFS appended to the full AIFS: gap = aifs + eifs.
    AppendToAifs,
}

impl MacPhyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.cam_rate_hz > 0.0) || !self.cam_rate_hz.is_finite() {
            return Err(Error::invalid("cam_rate_hz must be positive"));
        }
        if self.packet_length_bytes == 0 {
            return Err(Error::invalid("packet_length_bytes must be positive"));
        }
        if !(self.payload_rate_mbps > 0.0) || !(self.header_rate_mbps > 0.0) {
            return Err(Error::invalid("data rates must be positive"));
        }
        if self.slot_us == 0 || self.sifs_us == 0 || self.eifs_us == 0 {
            return Err(Error::invalid("slot, SIFS and EIFS must be positive"));
        }
        if !(self.tx_power_dbm.is_finite()) {
            return Err(Error::invalid("tx_power_dbm must be finite"));
        }
        Ok(())
    }

    /// Arbitration interframe space: SIFS + AIFSN * slot (123 µs default).
    pub fn aifs_us(&self) -> u64 {
        self.sifs_us + self.aifsn as u64 * self.slot_us
    }

    /// Contention gap after an undecodable sensed frame.
    pub fn eifs_gap_us(&self, mode: EifsMode) -> u64 {
        match mode {
            EifsMode::ReplaceSifsCore => self.eifs_us + self.aifsn as u64 * self.slot_us,
            EifsMode::AppendToAifs => self.aifs_us() + self.eifs_us,
        }
    }

    /// Frame airtime: PLCP overhead plus payload bits at the payload rate,
    /// rounded up to the next microsecond (640 µs default).
    pub fn airtime_us(&self) -> u64 {
        let payload_bits = self.packet_length_bytes as u64 * 8;
        let rate_bits_per_us = self.payload_rate_mbps; // Mbps == bits/µs
        self.plcp_overhead_us + (payload_bits as f64 / rate_bits_per_us).ceil() as u64
    }

    /// CAM inter-arrival period in microseconds.
    pub fn cam_period_us(&self) -> u64 {
        (1e6 / self.cam_rate_hz).round().max(1.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_timings_match_table() {
        let p = MacPhyParams::default();
        assert_eq!(p.aifs_us(), 123);
        assert_eq!(p.airtime_us(), 640);
        assert_eq!(p.cam_period_us(), 100_000);
        assert_eq!(p.eifs_gap_us(EifsMode::ReplaceSifsCore), 211);
        assert_eq!(p.eifs_gap_us(EifsMode::AppendToAifs), 243);
    }

    #[test]
    fn validation_catches_zeroes() {
        let mut p = MacPhyParams::default();
        p.slot_us = 0;
        assert!(p.validate().is_err());
        let mut p = MacPhyParams::default();
        p.cam_rate_hz = 0.0;
        assert!(p.validate().is_err());
    }
}
