//! Single-photon detector: efficiency thinning, Gaussian timing jitter,
//! non-paralyzable dead-time and after-pulsing.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::correlator::{adjacent_interval_histogram, CorrelationHistogram};
use crate::error::{Error, Result};
use crate::rng::{rng_for, salt, to_ps};
use crate::stream::{Origin, TimestampStream};

/// After-pulse chains deeper than this are cut and counted in
/// [`DetectorStats::cascade_truncated`].
pub const MAX_AFTERPULSE_GENERATION: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub efficiency: f64,
    pub dead_time_ps: u64,
    pub afterpulse_prob: f64,
    pub afterpulse_tau_ps: f64,
    pub jitter_sigma_ps: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            dead_time_ps: 22_000,
            afterpulse_prob: 0.0,
            afterpulse_tau_ps: 25_000.0,
            jitter_sigma_ps: 350.0,
        }
    }
}

impl DetectorModel {
    /// Perfect detector: every photon registered at its arrival time.
    pub fn transparent() -> Self {
        Self {
            efficiency: 1.0,
            dead_time_ps: 0,
            afterpulse_prob: 0.0,
            afterpulse_tau_ps: 25_000.0,
            jitter_sigma_ps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("efficiency", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.afterpulse_prob) {
            return Err(Error::param("afterpulse_prob", "must lie in [0, 1)"));
        }
        if !(self.afterpulse_tau_ps > 0.0) {
            return Err(Error::param("afterpulse_tau", "must be positive"));
        }
        if !(self.jitter_sigma_ps >= 0.0) {
            return Err(Error::param("jitter", "must be non-negative"));
        }
        Ok(())
    }

    /// Minimum separation between registered events. Two events in the same
    /// picosecond are never resolved, even with zero dead-time.
    pub fn min_gap_ps(&self) -> u64 {
        self.dead_time_ps.max(1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DetectorStats {
    pub incident: u64,
    pub after_efficiency: u64,
    pub registered_photons: u64,
    pub dead_time_rejected: u64,
    pub afterpulses_spawned: u64,
    pub afterpulses_registered: u64,
    pub afterpulses_past_end: u64,
    pub cascade_truncated: u64,
}

pub fn detect(stream: &TimestampStream, model: &DetectorModel, seed: u64) -> Result<TimestampStream> {
    detect_with_stats(stream, model, seed).map(|(s, _)| s)
}

pub fn detect_with_stats(
    stream: &TimestampStream,
    model: &DetectorModel,
    seed: u64,
) -> Result<(TimestampStream, DetectorStats)> {
    model.validate()?;
    if stream.origin() != Origin::Emission {
        return Err(Error::Config("detector input must be an emission stream".into()));
    }
    let duration = stream.duration_ps();
    let mut stats = DetectorStats {
        incident: stream.len() as u64,
        ..Default::default()
    };

    // One uniform and one jitter draw per incident photon, so two runs with
    // the same seed and different efficiencies keep nested subsets.
    let mut rng = rng_for(seed, salt::DETECTION);
    let jitter = (model.jitter_sigma_ps > 0.0).then(|| Normal::new(0.0, model.jitter_sigma_ps).unwrap());
    let mut arrivals = Vec::with_capacity((stream.len() as f64 * model.efficiency) as usize + 16);
    for &t in stream.times() {
        let keep = rng.random::<f64>() < model.efficiency;
        let dt = jitter.map_or(0.0, |j| j.sample(&mut rng));
        if keep {
            let shifted = (t as f64 + dt).clamp(0.0, duration as f64);
            arrivals.push(to_ps(shifted));
        }
    }
    stats.after_efficiency = arrivals.len() as u64;
    if jitter.is_some() {
        arrivals.sort_unstable();
    }

    let mut ap_rng = rng_for(seed, salt::AFTERPULSE);
    let ap_delay = Exp::new(1.0 / model.afterpulse_tau_ps).unwrap();
    let gap = model.min_gap_ps();
    let mut pending: BinaryHeap<Reverse<(u64, u32)>> = BinaryHeap::new();
    let mut out = Vec::with_capacity(arrivals.len());
    let mut last: Option<u64> = None;
    let mut i = 0;

    loop {
        // Earliest of the next photon and the next pending after-pulse;
        // photons win ties.
        let next_photon = arrivals.get(i).copied();
        let next_ap = pending.peek().map(|Reverse(x)| *x);
        let (t, generation) = match (next_photon, next_ap) {
            (None, None) => break,
            (Some(p), Some((a, _))) if p <= a => {
                i += 1;
                (p, 0)
            }
            (Some(p), None) => {
                i += 1;
                (p, 0)
            }
            (_, Some(_)) => {
                let Reverse(x) = pending.pop().unwrap();
                x
            }
        };

        if last.is_some_and(|l| t < l + gap) {
            stats.dead_time_rejected += 1;
            continue;
        }
        out.push(t);
        last = Some(t);
        if generation == 0 {
            stats.registered_photons += 1;
        } else {
            stats.afterpulses_registered += 1;
        }

        if model.afterpulse_prob > 0.0 && ap_rng.random_bool(model.afterpulse_prob) {
            if generation >= MAX_AFTERPULSE_GENERATION {
                stats.cascade_truncated += 1;
                continue;
            }
            stats.afterpulses_spawned += 1;
            let at = t + to_ps(ap_delay.sample(&mut ap_rng));
            if at > duration {
                stats.afterpulses_past_end += 1;
            } else {
                pending.push(Reverse((at, generation + 1)));
            }
        }
    }

    Ok((TimestampStream::from_sorted(out, Origin::Detection, duration), stats))
}

/// Adjacent-interval histogram over `[0, window_ps)`, showing the dead-time
/// void and the after-pulse excess just beyond it.
pub fn afterpulse_artifact_profile(
    stream: &TimestampStream,
    window_ps: u64,
    bin_width_ps: u64,
) -> Result<CorrelationHistogram> {
    if stream.origin() != Origin::Detection {
        return Err(Error::Config("artifact profile needs a detection stream".into()));
    }
    adjacent_interval_histogram(stream, bin_width_ps, window_ps)
}
