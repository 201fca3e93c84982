//! Aggregation of packet records into the four performance metrics, plus
//! the Pearson correlation used for validation.

use crate::error::{Error, Result};
use crate::mac::PacketRecord;

/// The four-metric record: collision probability, delay probability, loss
/// probability and mean delay.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PerfMetrics {
    pub p_collision: f64,
    pub p_delay: f64,
    pub p_loss: f64,
    pub mean_delay_us: f64,
}

impl PerfMetrics {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_collision", self.p_collision),
            ("p_delay", self.p_delay),
            ("p_loss", self.p_loss),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.mean_delay_us >= 0.0) {
            return Err(Error::invalid("mean_delay_us must be non-negative"));
        }
        Ok(())
    }
}

/// Which packets enter the mean-delay average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanDelayMode {
    /// Average over delayed packets only; 0 when nothing was delayed.
    #[default]
    DelayedOnly,
    /// Average over every transmitted packet, zeros included.
    AllPackets,
}

/// Reduce a set of packet records to [`PerfMetrics`].
///
/// `p_delay` is the fraction of packets that were delayed (granted late or
/// dropped), `p_collision` the fraction whose request landed in another
/// node's airtime, and `p_loss` the fraction of (packet, receiver)
/// outcomes that failed, dropped packets counting as lost.
pub fn aggregate<'a, I>(records: I) -> Result<PerfMetrics>
where
    I: IntoIterator<Item = &'a PacketRecord>,
{
    aggregate_with(records, MeanDelayMode::DelayedOnly)
}

pub fn aggregate_with<'a, I>(records: I, mode: MeanDelayMode) -> Result<PerfMetrics>
where
    I: IntoIterator<Item = &'a PacketRecord>,
{
    let mut total = 0u64;
    let mut delayed = 0u64;
    let mut collided = 0u64;
    let mut delay_sum = 0u64;
    let mut delay_count = 0u64;
    let mut outcomes = 0u64;
    let mut failures = 0u64;

    for r in records {
        total += 1;
        if r.delayed() {
            delayed += 1;
        }
        if r.collided {
            collided += 1;
        }
        match r.delay_us() {
            Some(d) => {
                match mode {
                    MeanDelayMode::DelayedOnly => {
                        if d > 0 {
                            delay_sum += d;
                            delay_count += 1;
                        }
                    }
                    MeanDelayMode::AllPackets => {
                        delay_sum += d;
                        delay_count += 1;
                    }
                }
                outcomes += r.received_ok.len() as u64;
                failures += r.received_ok.values().filter(|ok| !**ok).count() as u64;
            }
            None => {
                // Dropped: one lost outcome, no delay sample.
                outcomes += 1;
                failures += 1;
            }
        }
    }

    if total == 0 {
        return Err(Error::UndefinedMetric("no packet records".into()));
    }

    Ok(PerfMetrics {
        p_collision: collided as f64 / total as f64,
        p_delay: delayed as f64 / total as f64,
        p_loss: if outcomes == 0 {
            0.0
        } else {
            failures as f64 / outcomes as f64
        },
        mean_delay_us: if delay_count == 0 {
            0.0
        } else {
            delay_sum as f64 / delay_count as f64
        },
    })
}

/// Pearson correlation coefficient of two equal-length samples.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid("correlation inputs differ in length"));
    }
    if a.len() < 2 {
        return Err(Error::invalid("correlation needs at least two samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::UndefinedMetric(
            "correlation undefined for a constant vector".into(),
        ));
    }
    Ok((cov / (va * vb).sqrt()).clamp(-1.0, 1.0))
}

/// Relative closeness of two sample means:
/// `|mean(a) - mean(b)| <= tolerance * max(mean(a), mean(b), eps)`.
pub fn two_sample_close(a: &[f64], b: &[f64], tolerance: f64) -> bool {
    const EPS: f64 = 1e-9;
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    (ma - mb).abs() <= tolerance * ma.max(mb).max(EPS)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn arb_record() -> impl Strategy<Value = PacketRecord> {
        (
            proptest::option::of(0u64..1000),
            proptest::bool::ANY,
            proptest::option::of(proptest::bool::ANY),
        )
            .prop_map(|(delay, collided, rx)| {
                let mut received_ok = BTreeMap::new();
                if let Some(ok) = rx {
                    received_ok.insert(9, ok);
                }
                PacketRecord {
                    tx_node: 0,
                    seq: 0,
                    requested_at_us: 0,
                    granted_at_us: delay,
                    collided,
                    received_ok,
                }
            })
    }

    proptest! {
        #[test]
        fn aggregate_is_permutation_invariant(
            mut records in proptest::collection::vec(arb_record(), 1..40),
            seed in 0u64..1000,
        ) {
            let before = aggregate(&records).unwrap();
            // Cheap deterministic shuffle.
            let n = records.len();
            for i in 0..n {
                let j = (crate::mix_seed(seed, i as u64) % n as u64) as usize;
                records.swap(i, j);
            }
            let after = aggregate(&records).unwrap();
            prop_assert_eq!(before, after);
        }

        #[test]
        fn correlation_invariant_under_positive_affine(
            xs in proptest::collection::vec(-100.0f64..100.0, 3..20),
            scale in 0.01f64..50.0,
            shift in -100.0f64..100.0,
        ) {
            let ys: Vec<f64> = xs.iter().map(|&x| x * 2.0 + 1.0).collect();
            if let Ok(r1) = correlation(&xs, &ys) {
                let xs2: Vec<f64> = xs.iter().map(|&x| x * scale + shift).collect();
                if let Ok(r2) = correlation(&xs2, &ys) {
                    prop_assert!((r1 - r2).abs() < 1e-6);
                }
            }
        }
    }
}
