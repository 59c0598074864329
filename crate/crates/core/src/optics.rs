//! Passive optics: a T:R beamsplitter, a fixed fiber delay on the reflected
//! path, and recombination onto one detector or two separate arms.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{rng_for, salt};
use crate::stream::{Origin, TimestampStream};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Both paths merged onto one detector, path 2 delayed by `delay_ps`.
    SingleDetectorDelay,
    /// Two detectors, one per output port.
    StandardHbt,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelConfig {
    /// Counting ratio of path 1 (T). Path 2 gets R = 1 - T.
    pub t_ratio: f64,
    /// Optical delay on path 2.
    pub delay_ps: u64,
    pub scheme: Scheme,
}

impl ChannelConfig {
    pub fn single_detector(t_ratio: f64, delay_ps: u64) -> Self {
        Self {
            t_ratio,
            delay_ps,
            scheme: Scheme::SingleDetectorDelay,
        }
    }

    pub fn hbt(t_ratio: f64) -> Self {
        Self {
            t_ratio,
            delay_ps: 0,
            scheme: Scheme::StandardHbt,
        }
    }

    pub fn r_ratio(&self) -> f64 {
        1.0 - self.t_ratio
    }

    pub fn validate(&self) -> Result<()> {
        // T = 0 and T = 1 are accepted as degenerate (all photons on one path).
        if !(0.0..=1.0).contains(&self.t_ratio) {
            return Err(Error::param("t_ratio", format!("{} is outside [0, 1]", self.t_ratio)));
        }
        Ok(())
    }

    fn expect(&self, scheme: Scheme) -> Result<()> {
        self.validate()?;
        if self.scheme != scheme {
            return Err(Error::Config(format!(
                "operation needs {scheme:?}, got {:?}",
                self.scheme
            )));
        }
        Ok(())
    }
}

/// Routes each photon independently; returns (path 1, path 2) undelayed.
fn route(stream: &TimestampStream, t_ratio: f64, seed: u64) -> (Vec<u64>, Vec<u64>) {
    let mut rng = rng_for(seed, salt::ROUTING);
    let expected = ((stream.len() as f64 * t_ratio) as usize).min(stream.len());
    let mut transmitted = Vec::with_capacity(expected + 16);
    let mut reflected = Vec::with_capacity(stream.len() - expected + 16);
    for &t in stream.times() {
        if rng.random::<f64>() < t_ratio {
            transmitted.push(t);
        } else {
            reflected.push(t);
        }
    }
    (transmitted, reflected)
}

/// Single-detector network. Path 2 photons arrive `delay_ps` late; the
/// merged stream breaks ties by path index, path 1 first.
pub fn split_delay_merge(stream: &TimestampStream, cfg: &ChannelConfig, seed: u64) -> Result<TimestampStream> {
    cfg.expect(Scheme::SingleDetectorDelay)?;
    let (path1, path2) = route(stream, cfg.t_ratio, seed);
    let delay = cfg.delay_ps;
    let mut out = Vec::with_capacity(stream.len());
    let (mut i, mut j) = (0, 0);
    while i < path1.len() && j < path2.len() {
        if path1[i] <= path2[j] + delay {
            out.push(path1[i]);
            i += 1;
        } else {
            out.push(path2[j] + delay);
            j += 1;
        }
    }
    out.extend_from_slice(&path1[i..]);
    out.extend(path2[j..].iter().map(|&t| t + delay));
    Ok(TimestampStream::from_sorted(
        out,
        Origin::Emission,
        stream.duration_ps() + delay,
    ))
}

/// Two-detector network: returns the (start, stop) arm streams.
pub fn split_two_arms(
    stream: &TimestampStream,
    cfg: &ChannelConfig,
    seed: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    cfg.expect(Scheme::StandardHbt)?;
    let (start, stop) = route(stream, cfg.t_ratio, seed);
    let d = stream.duration_ps();
    Ok((
        TimestampStream::from_sorted(start, Origin::Emission, d),
        TimestampStream::from_sorted(stop, Origin::Emission, d),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_stream(n: u64, gap: u64) -> TimestampStream {
        TimestampStream::new((0..n).map(|i| i * gap).collect(), Origin::Emission, n * gap).unwrap()
    }

    #[test]
    fn full_transmission_is_identity() {
        let s = uniform_stream(1000, 1234);
        let out = split_delay_merge(&s, &ChannelConfig::single_detector(1.0, 300_000), 1).unwrap();
        assert_eq!(out.times(), s.times());
    }

    #[test]
    fn zero_delay_preserves_multiset() {
        let s = uniform_stream(5000, 777);
        let out = split_delay_merge(&s, &ChannelConfig::single_detector(0.5, 0), 3).unwrap();
        assert_eq!(out.times(), s.times());
    }

    #[test]
    fn delayed_fraction_is_binomial() {
        let n = 100_000u64;
        let gap = 10_000_000; // far larger than the delay, so order is preserved
        let s = uniform_stream(n, gap);
        let delay = 300_000;
        let out = split_delay_merge(&s, &ChannelConfig::single_detector(0.5, delay), 5).unwrap();
        assert_eq!(out.len(), s.len());
        let delayed = out.times().iter().filter(|&&t| t % gap == delay).count() as f64;
        let sd = (n as f64 * 0.25).sqrt();
        assert!((delayed - 0.5 * n as f64).abs() < 3.0 * sd);
    }

    #[test]
    fn arms_are_exclusive_and_balanced() {
        let one = TimestampStream::new(vec![42], Origin::Emission, 100).unwrap();
        let (a, b) = split_two_arms(&one, &ChannelConfig::hbt(0.5), 9).unwrap();
        assert_eq!(a.len() + b.len(), 1);

        let s = uniform_stream(100_000, 100);
        let (a, b) = split_two_arms(&s, &ChannelConfig::hbt(0.5), 9).unwrap();
        assert_eq!(a.len() + b.len(), s.len());
        // a - b = 2a - n, variance 4 n T R = n.
        let diff = a.len() as f64 - b.len() as f64;
        assert!(diff.abs() < 3.0 * (s.len() as f64).sqrt());
    }

    #[test]
    fn wrong_scheme_is_rejected() {
        let s = uniform_stream(10, 10);
        assert!(split_two_arms(&s, &ChannelConfig::single_detector(0.5, 10), 1).is_err());
        assert!(split_delay_merge(&s, &ChannelConfig::hbt(0.5), 1).is_err());
        assert!(split_delay_merge(&s, &ChannelConfig::single_detector(1.5, 10), 1).is_err());
    }
}
