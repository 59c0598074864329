//! Scalar g2 extraction, background correction, the mixing relation of the
//! single-detector scheme, and design checks.

mod design;
mod dip;
mod extract;
mod mixing;
mod peaks;

pub use design::{check_design_constraints, DesignInputs, DesignReport};
pub use dip::{fit_dip, DipFit};
pub use extract::{
    background_correct, cw_dip_floor, g2_cw_from_dip, g2_cw_from_measured_dip, g2_cw_standard, g2_pulsed_delay,
    g2_pulsed_standard, signal_fraction, G2Result,
};
pub use mixing::{compare_curves, compose_mixing, mixing_weights, CurveComparison};
pub use peaks::{integrate_peaks, PeakArea, PeakLabel, PeakLayout, PeakSet};
