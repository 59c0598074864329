//! Timestamp streams in integer picoseconds.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// Ideal photon arrival or emission times. Ties are allowed.
    Emission,
    /// Registered detector events. Strictly increasing.
    Detection,
}

/// Sorted photon timestamps over the observation window `[0, duration_ps]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TimestampStream {
    times: Vec<u64>,
    origin: Origin,
    duration_ps: u64,
}

impl TimestampStream {
    /// Validates ordering and range. Emission streams may contain ties,
    /// detection streams may not.
    pub fn new(times: Vec<u64>, origin: Origin, duration_ps: u64) -> Result<Self> {
        for (i, w) in times.windows(2).enumerate() {
            let ok = match origin {
                Origin::Emission => w[1] >= w[0],
                Origin::Detection => w[1] > w[0],
            };
            if !ok {
                return Err(Error::NonMonotonic {
                    index: i + 1,
                    previous: w[0],
                    value: w[1],
                });
            }
        }
        if let Some(&last) = times.last() {
            if last > duration_ps {
                return Err(Error::OutOfRange {
                    index: times.len() - 1,
                    value: last,
                    duration: duration_ps,
                });
            }
        }
        Ok(Self {
            times,
            origin,
            duration_ps,
        })
    }

    pub(crate) fn from_sorted(times: Vec<u64>, origin: Origin, duration_ps: u64) -> Self {
        debug_assert!(times.windows(2).all(|w| w[1] >= w[0]));
        debug_assert!(times.last().is_none_or(|&t| t <= duration_ps));
        Self {
            times,
            origin,
            duration_ps,
        }
    }

    pub fn empty(origin: Origin, duration_ps: u64) -> Self {
        Self::from_sorted(Vec::new(), origin, duration_ps)
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn into_times(self) -> Vec<u64> {
        self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn duration_ps(&self) -> u64 {
        self.duration_ps
    }

    /// Mean event rate in Hz over the observation window.
    pub fn rate_hz(&self) -> f64 {
        if self.duration_ps == 0 {
            return 0.0;
        }
        self.times.len() as f64 / (self.duration_ps as f64 * 1e-12)
    }

    /// Sorted union of two streams; ties keep `self` first.
    pub fn merge(&self, other: &TimestampStream) -> TimestampStream {
        let times = merge_sorted(&self.times, &other.times);
        let origin = if self.origin == Origin::Detection && other.origin == Origin::Detection {
            Origin::Detection
        } else {
            Origin::Emission
        };
        TimestampStream::from_sorted(times, origin, self.duration_ps.max(other.duration_ps))
    }
}

pub(crate) fn merge_sorted(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}
