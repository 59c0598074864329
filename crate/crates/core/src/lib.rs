//! Monte Carlo photon-correlation toolkit.
//!
//! Emission from a (possibly non-ideal) two-level system, beamsplitter
//! optics, a dead-time-limited detector, correlation estimators over
//! timestamp streams and the extraction of g2 from the resulting
//! histograms. Two measurement schemes are modeled: the standard
//! two-detector start-stop arrangement and a single detector fed by both
//! beamsplitter outputs, one of them optically delayed.
//!
//! All times are integer picoseconds.

pub mod analysis;
pub mod correlator;
pub mod detector;
pub mod emission;
mod error;
pub mod io;
pub mod optics;
pub mod pipeline;
mod rng;
pub mod stream;

pub use error::{Error, Result};
pub use stream::{Origin, TimestampStream};
