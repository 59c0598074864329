use crate::analysis::peaks::{PeakLabel, PeakSet};
use crate::error::{Error, Result};
use crate::optics::Scheme;

/// Scalar g2(0) estimate with its statistical error.
#[derive(Clone, Debug, PartialEq)]
pub struct G2Result {
    pub g2_zero: f64,
    pub sigma: f64,
    pub scheme: Scheme,
    /// The measured quantity before inversion or correction: the peak-area
    /// ratio (pulsed) or the dip value (c.w.).
    pub raw_dip_or_ratio: f64,
    pub raw_sigma: f64,
    /// Signal fraction S/(S+B) used by [`background_correct`].
    pub background_rho: Option<f64>,
    pub corrected: bool,
    /// The estimate fell below zero and was clamped.
    pub clamped: bool,
}

impl G2Result {
    fn new(g2_zero: f64, sigma: f64, scheme: Scheme, raw: f64, raw_sigma: f64) -> Self {
        Self {
            g2_zero,
            sigma,
            scheme,
            raw_dip_or_ratio: raw,
            raw_sigma,
            background_rho: None,
            corrected: false,
            clamped: false,
        }
    }
}

fn ratio(peaks: &PeakSet, numerator: PeakLabel, sides: [PeakLabel; 2], scheme: Scheme) -> Result<G2Result> {
    let num = peaks.require(numerator)?;
    let usable: Vec<_> = sides
        .iter()
        .filter_map(|&l| peaks.get(l).filter(|p| p.usable()))
        .collect();
    if usable.is_empty() {
        // Surface the reason of the first side.
        peaks.require(sides[0])?;
    }
    let n = usable.len() as f64;
    let side = usable.iter().map(|p| p.area).sum::<f64>() / n;
    let side_var = usable.iter().map(|p| p.variance).sum::<f64>() / (n * n);
    if side <= 0.0 {
        return Err(Error::ZeroSideArea);
    }
    let g = num.area / side;
    let num_var = num.variance.max(num.unit_variance);
    let sigma = ((num_var + g * g * side_var) / (side * side)).sqrt();
    Ok(G2Result::new(g, sigma, scheme, g, sigma))
}

/// Center-peak area over the mean of the adjacent side peaks.
pub fn g2_pulsed_standard(peaks: &PeakSet) -> Result<G2Result> {
    ratio(
        peaks,
        PeakLabel::Center0,
        [PeakLabel::Side1Minus, PeakLabel::Side1Plus],
        Scheme::StandardHbt,
    )
}

/// Zero-delay replica area over the mean of the 1L and 1R triplet peaks.
pub fn g2_pulsed_delay(peaks: &PeakSet) -> Result<G2Result> {
    ratio(
        peaks,
        PeakLabel::Delay0,
        [PeakLabel::Triplet1L, PeakLabel::Triplet1R],
        Scheme::SingleDetectorDelay,
    )
}

/// Value the c.w. single-detector histogram takes at `tau = delay` for a
/// perfect single-photon source: `(R^2 + T^2) + R T`.
pub fn cw_dip_floor(t_ratio: f64) -> f64 {
    let r = 1.0 - t_ratio;
    t_ratio * t_ratio + r * r + t_ratio * r
}

fn check_t(t_ratio: f64) -> Result<f64> {
    let rt = t_ratio * (1.0 - t_ratio);
    if !(t_ratio > 0.0 && t_ratio < 1.0) {
        return Err(Error::param("t_ratio", "dip inversion needs 0 < T < 1"));
    }
    Ok(rt)
}

/// Inverts the c.w. dip at `tau = delay` to the two-detector g2(0):
/// `(dip - (R^2 + T^2) - R T) / (R T)`, which is `4 (dip - 0.75)` at T = 0.5.
pub fn g2_cw_from_dip(dip_value: f64, t_ratio: f64) -> Result<G2Result> {
    let rt = check_t(t_ratio)?;
    let floor = cw_dip_floor(t_ratio);
    if dip_value < floor {
        return Err(Error::BelowFloor { dip: dip_value, floor });
    }
    Ok(G2Result::new(
        (dip_value - floor) / rt,
        0.0,
        Scheme::SingleDetectorDelay,
        dip_value,
        0.0,
    ))
}

/// As [`g2_cw_from_dip`] for a measured dip with error `sigma`. A dip up to
/// three sigma below the floor is read as g2(0) = 0 (flagged as clamped);
/// anything lower is rejected.
pub fn g2_cw_from_measured_dip(dip_value: f64, sigma: f64, t_ratio: f64) -> Result<G2Result> {
    let rt = check_t(t_ratio)?;
    let floor = cw_dip_floor(t_ratio);
    if dip_value < floor - 3.0 * sigma {
        return Err(Error::BelowFloor { dip: dip_value, floor });
    }
    let g = (dip_value - floor) / rt;
    let mut res = G2Result::new(g.max(0.0), sigma / rt, Scheme::SingleDetectorDelay, dip_value, sigma);
    res.clamped = g < 0.0;
    Ok(res)
}

/// Two-detector c.w. g2(0): the dip is read directly.
pub fn g2_cw_standard(dip_value: f64, sigma: f64) -> G2Result {
    let mut res = G2Result::new(dip_value.max(0.0), sigma, Scheme::StandardHbt, dip_value, sigma);
    res.clamped = dip_value < 0.0;
    res
}

/// Removes uncorrelated background with signal fraction `rho = S/(S+B)`:
/// `g = (g_raw - (1 - rho^2)) / rho^2`, clamped at zero.
pub fn background_correct(result: &G2Result, rho: f64) -> Result<G2Result> {
    if result.corrected {
        return Err(Error::Config("result is already background corrected".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::param("rho", format!("{rho} is outside (0, 1]")));
    }
    let rho2 = rho * rho;
    let g = (result.g2_zero - (1.0 - rho2)) / rho2;
    Ok(G2Result {
        g2_zero: g.max(0.0),
        sigma: result.sigma / rho2,
        background_rho: Some(rho),
        corrected: true,
        clamped: result.clamped || g < 0.0,
        ..result.clone()
    })
}

/// `S / (S + B)` from signal and background count rates (or counts).
pub fn signal_fraction(signal: f64, background: f64) -> Result<f64> {
    if !(signal > 0.0) || !(background >= 0.0) {
        return Err(Error::param(
            "rho",
            "signal must be positive and background non-negative",
        ));
    }
    Ok(signal / (signal + background))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cw_inversion_reference_points() {
        assert!((g2_cw_from_dip(0.75, 0.5).unwrap().g2_zero).abs() < 1e-12);
        assert!((g2_cw_from_dip(0.875, 0.5).unwrap().g2_zero - 0.5).abs() < 1e-12);
        assert!((g2_cw_from_dip(0.764, 0.5).unwrap().g2_zero - 0.056).abs() < 1e-12);
    }

    #[test]
    fn cw_inversion_below_floor() {
        assert!(matches!(g2_cw_from_dip(0.70, 0.5), Err(Error::BelowFloor { .. })));
        let clamped = g2_cw_from_measured_dip(0.745, 0.01, 0.5).unwrap();
        assert!(clamped.clamped);
        assert_eq!(clamped.g2_zero, 0.0);
        assert!(g2_cw_from_measured_dip(0.70, 0.01, 0.5).is_err());
    }

    #[test]
    fn general_t_floor() {
        // T = 0.7: R^2 + T^2 = 0.58, RT = 0.21
        assert!((cw_dip_floor(0.7) - 0.79).abs() < 1e-12);
        let g = g2_cw_from_dip(0.79 + 0.21 * 0.3, 0.7).unwrap();
        assert!((g.g2_zero - 0.3).abs() < 1e-12);
    }

    #[test]
    fn background_identity_and_inverse() {
        let raw = G2Result::new(0.3, 0.01, Scheme::StandardHbt, 0.3, 0.01);
        let same = background_correct(&raw, 1.0).unwrap();
        assert!((same.g2_zero - 0.3).abs() < 1e-15);
        assert!(background_correct(&raw, 0.0).is_err());
        assert!(background_correct(&same, 0.5).is_err());

        let low = G2Result::new(0.1, 0.01, Scheme::StandardHbt, 0.1, 0.01);
        let c = background_correct(&low, 0.8).unwrap();
        assert!(c.clamped);
        assert_eq!(c.g2_zero, 0.0);
    }
}
