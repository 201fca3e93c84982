//! Deterministic propagation model and link-level decision rules.
//!
//! Path loss follows the log-distance law
//! `PL(d) = PL(d0) + 10 n log10(d / d0)` with no fading or shadowing term:
//! received power is a pure function of distance. Two power floors derive
//! the two ranges the MAC cares about:
//!
//! - `rx_sensitivity_dbm` — below it a frame cannot be decoded
//!   (transmission range, 115 m with defaults);
//! - `carrier_sense_dbm` — below it the channel does not even register as
//!   busy (sensing range, 175 m with defaults).
//!
//! Payload decode additionally requires the SINR against the linear sum of
//! interferer powers to clear `sinr_threshold_db` (6.49825 dB). The
//! boundary is inclusive on every test so ties break deterministically.

use crate::error::{Error, Result};

/// Log-distance path loss parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    /// Path loss at the reference distance, dB.
    pub pl_d0_db: f64,
    /// Reference distance, meters.
    pub d0_m: f64,
    /// Path loss distance exponent (dimensionless).
    pub exponent: f64,
}

impl Default for PathLossModel {
    /// 46.6777 dB at 1 m with exponent 3: free-space loss at one meter
    /// near 5.9 GHz, the operating band of 802.11p.
    fn default() -> Self {
        PathLossModel {
            pl_d0_db: 46.6777,
            d0_m: 1.0,
            exponent: 3.0,
        }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0) {
            return Err(Error::invalid("path loss exponent must be > 0"));
        }
        if !(self.d0_m > 0.0) {
            return Err(Error::invalid("reference distance d0 must be > 0"));
        }
        if !self.pl_d0_db.is_finite() {
            return Err(Error::invalid("PL(d0) must be finite"));
        }
        Ok(())
    }

    /// Path loss in dB at distance `d_m`.
    ///
    /// Distances below `d0` clamp to `d0` (near-field guard), so the
    /// function is monotone non-decreasing over all positive inputs.
    pub fn path_loss_db(&self, d_m: f64) -> Result<f64> {
        if !d_m.is_finite() || d_m <= 0.0 {
            return Err(Error::invalid(format!(
                "distance must be finite and positive, got {d_m}"
            )));
        }
        let d = d_m.max(self.d0_m);
        Ok(self.pl_d0_db + 10.0 * self.exponent * (d / self.d0_m).log10())
    }
}

/// Transmit power plus the receive-side decision floors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Transmit power, dBm.
    pub tx_power_dbm: f64,
    /// SINR required to decode a payload, dB.
    pub sinr_threshold_db: f64,
    /// Minimum power for a frame to be decodable, dBm.
    pub rx_sensitivity_dbm: f64,
    /// Minimum power for the channel to register busy, dBm.
    pub carrier_sense_dbm: f64,
    /// Thermal noise floor, dBm.
    pub noise_floor_dbm: f64,
}

impl Default for LinkBudget {
    /// Floors calibrated so the default model reproduces a 115 m
    /// transmission range and a 175 m sensing range exactly.
    fn default() -> Self {
        LinkBudget::calibrated(17.0, &PathLossModel::default(), 115.0, 175.0, 6.49825, -99.0)
            .expect("default link budget is well-formed")
    }
}

impl LinkBudget {
    /// Build a budget whose floors are the received power at the requested
    /// transmission and sensing ranges under `model`.
    pub fn calibrated(
        tx_power_dbm: f64,
        model: &PathLossModel,
        transmission_range_m: f64,
        sensing_range_m: f64,
        sinr_threshold_db: f64,
        noise_floor_dbm: f64,
    ) -> Result<Self> {
        let budget = LinkBudget {
            tx_power_dbm,
            sinr_threshold_db,
            rx_sensitivity_dbm: tx_power_dbm - model.path_loss_db(transmission_range_m)?,
            carrier_sense_dbm: tx_power_dbm - model.path_loss_db(sensing_range_m)?,
            noise_floor_dbm,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tx_power_dbm", self.tx_power_dbm),
            ("sinr_threshold_db", self.sinr_threshold_db),
            ("rx_sensitivity_dbm", self.rx_sensitivity_dbm),
            ("carrier_sense_dbm", self.carrier_sense_dbm),
            ("noise_floor_dbm", self.noise_floor_dbm),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite")));
            }
        }
        if self.carrier_sense_dbm > self.rx_sensitivity_dbm {
            return Err(Error::invalid(
                "carrier_sense_dbm must not exceed rx_sensitivity_dbm \
                 (sensing range must cover the transmission range)",
            ));
        }
        Ok(())
    }
}

/// Convert dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Convert linear milliwatts to dBm.
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Propagation model and link budget, bundled with the derived ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioConfig {
    pub model: PathLossModel,
    pub budget: LinkBudget,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            model: PathLossModel::default(),
            budget: LinkBudget::default(),
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.budget.validate()?;
        // The floor ordering implies range ordering; check both anyway so a
        // bad hand-edited config fails loudly.
        if self.transmission_range_m()? > self.sensing_range_m()? {
            return Err(Error::invalid(
                "derived transmission range exceeds derived sensing range",
            ));
        }
        Ok(())
    }

    /// Received power in dBm at distance `d_m`.
    pub fn rx_power_dbm(&self, d_m: f64) -> Result<f64> {
        Ok(self.budget.tx_power_dbm - self.model.path_loss_db(d_m)?)
    }

    /// Distance at which received power equals `floor_dbm`: the exact
    /// closed-form inverse of the path loss law.
    pub fn invert_range(&self, floor_dbm: f64) -> Result<f64> {
        let at_d0 = self.budget.tx_power_dbm - self.model.pl_d0_db;
        // A floor exactly at the d0 power maps to d0 itself; tolerate float
        // rounding around that identity.
        if floor_dbm > at_d0 + 1e-9 {
            return Err(Error::NoSolution(format!(
                "floor {floor_dbm} dBm is not below the received power {at_d0} dBm at d0"
            )));
        }
        let exp = ((at_d0 - floor_dbm) / (10.0 * self.model.exponent)).max(0.0);
        Ok(self.model.d0_m * 10f64.powf(exp))
    }

    /// Maximum distance at which a lone frame decodes.
    pub fn transmission_range_m(&self) -> Result<f64> {
        self.invert_range(self.budget.rx_sensitivity_dbm)
    }

    /// Maximum distance at which a transmission marks the channel busy.
    pub fn sensing_range_m(&self) -> Result<f64> {
        self.invert_range(self.budget.carrier_sense_dbm)
    }

    /// SINR reception test: `signal / (noise + interference)` against the
    /// threshold. Boundary inclusive: comparison happens in dB with a
    /// nano-dB slack so exact-threshold signals pass despite rounding.
    pub fn reception_ok(&self, signal_dbm: f64, interference_mw: f64, noise_dbm: f64) -> bool {
        let sinr_db = signal_dbm - mw_to_dbm(dbm_to_mw(noise_dbm) + interference_mw);
        sinr_db >= self.sinr_threshold_db() - 1e-9
    }

    pub fn sinr_threshold_db(&self) -> f64 {
        self.budget.sinr_threshold_db
    }
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn path_loss_monotone_in_distance(d1 in 1.0f64..10_000.0, d2 in 1.0f64..10_000.0) {
            let m = PathLossModel::default();
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let pl_lo = m.path_loss_db(lo).unwrap();
            let pl_hi = m.path_loss_db(hi).unwrap();
            prop_assert!(pl_hi >= pl_lo);
            if hi > lo * (1.0 + 1e-12) && lo >= m.d0_m {
                prop_assert!(pl_hi > pl_lo);
            }
        }

        #[test]
        fn invert_range_round_trips(d in 1.0f64..10_000.0) {
            let r = RadioConfig::default();
            let floor = r.rx_power_dbm(d).unwrap();
            let back = r.invert_range(floor).unwrap();
            prop_assert!((back - d).abs() <= 1e-6 * d);
        }

        #[test]
        fn sensing_range_dominates_transmission_range(delta in 0.001f64..30.0) {
            let mut r = RadioConfig::default();
            r.budget.carrier_sense_dbm = r.budget.rx_sensitivity_dbm - delta;
            prop_assert!(r.sensing_range_m().unwrap() > r.transmission_range_m().unwrap());
        }

        #[test]
        fn reception_monotone_in_interference(
            signal in -100.0f64..0.0,
            i1 in 0.0f64..1e-6,
            i2 in 0.0f64..1e-6,
        ) {
            let r = RadioConfig::default();
            let (lo, hi) = if i1 <= i2 { (i1, i2) } else { (i2, i1) };
            let noise = r.budget.noise_floor_dbm;
            // Raising interference never flips a failed reception to success.
            if !r.reception_ok(signal, lo, noise) {
                prop_assert!(!r.reception_ok(signal, hi, noise));
            }
        }
    }
}
