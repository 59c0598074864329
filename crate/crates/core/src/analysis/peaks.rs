use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::correlator::CorrelationHistogram;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeakLabel {
    /// Zero delay.
    Center0,
    /// Mean of the peaks at `-k T`, `k = 1..=side_orders` (two-detector).
    Side1Minus,
    /// Mean of the peaks at `+k T`, `k = 1..=side_orders` (two-detector).
    Side1Plus,
    /// Zero-delay replica at `+delay` (single detector).
    Delay0,
    /// `T - delay`
    Triplet1L,
    /// `T`
    Triplet1,
    /// `T + delay`
    Triplet1R,
}

impl PeakLabel {
    pub fn name(self) -> &'static str {
        match self {
            PeakLabel::Center0 => "center0",
            PeakLabel::Side1Minus => "side1_minus",
            PeakLabel::Side1Plus => "side1_plus",
            PeakLabel::Delay0 => "delay0",
            PeakLabel::Triplet1L => "triplet_1l",
            PeakLabel::Triplet1 => "triplet_1",
            PeakLabel::Triplet1R => "triplet_1r",
        }
    }
}

impl fmt::Display for PeakLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where to look for peaks on a delay axis.
#[derive(Clone, Debug, PartialEq)]
pub struct PeakLayout {
    pub period_ps: u64,
    /// Optical delay; zero selects the two-detector labels.
    pub delay_ps: u64,
    /// Integration half-width around each peak center.
    pub window_ps: u64,
    /// Side peaks averaged per side in the two-detector layout.
    pub side_orders: u32,
    /// `|tau|` below this is blinded by dead-time and after-pulsing.
    pub blind_ps: u64,
    /// Decay scale of the two-sided exponential peak shape (the emitter
    /// lifetime). When set, window sums are corrected for the tails that
    /// neighbouring peaks spill into each other's windows.
    pub peak_decay_ps: Option<f64>,
}

impl PeakLayout {
    pub fn two_detector(period_ps: u64, window_ps: u64) -> Self {
        Self {
            period_ps,
            delay_ps: 0,
            window_ps,
            side_orders: 3,
            blind_ps: 0,
            peak_decay_ps: None,
        }
    }

    pub fn single_detector(period_ps: u64, delay_ps: u64, window_ps: u64, blind_ps: u64) -> Self {
        Self {
            period_ps,
            delay_ps,
            window_ps,
            side_orders: 1,
            blind_ps,
            peak_decay_ps: None,
        }
    }

    /// Every feature center of the pulsed comb near the labeled peaks.
    fn comb(&self) -> Vec<i64> {
        let t = self.period_ps as i64;
        let d = self.delay_ps as i64;
        let reach = self.side_orders as i64 + 1;
        let offsets: &[i64] = if d > 0 { &[-d, 0, d] } else { &[0] };
        let mut c: Vec<i64> = (-reach..=reach)
            .flat_map(|k| offsets.iter().map(move |o| k * t + o))
            .collect();
        c.sort_unstable();
        c.dedup();
        c
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakArea {
    pub center_ps: i64,
    /// Integrated counts (or normalized g2 bins), averaged over
    /// `peaks_averaged` peaks for the side labels.
    pub area: f64,
    pub variance: f64,
    /// Variance contributed by a single count.
    pub unit_variance: f64,
    pub peaks_averaged: u32,
    /// Why the peak cannot be used, if so.
    pub unusable: Option<String>,
}

impl PeakArea {
    pub fn usable(&self) -> bool {
        self.unusable.is_none()
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakSet {
    pub areas: BTreeMap<PeakLabel, PeakArea>,
    pub window_ps: u64,
    pub period_ps: u64,
    pub delay_ps: u64,
    pub normalized: bool,
}

impl PeakSet {
    pub fn get(&self, label: PeakLabel) -> Option<&PeakArea> {
        self.areas.get(&label)
    }

    /// The peak, or an error naming why it cannot be used.
    pub fn require(&self, label: PeakLabel) -> Result<&PeakArea> {
        let p = self.areas.get(&label).ok_or_else(|| Error::UnusablePeak {
            label: label.name(),
            center_ps: 0,
            reason: "not part of this layout".into(),
        })?;
        match &p.unusable {
            None => Ok(p),
            Some(reason) => Err(Error::UnusablePeak {
                label: label.name(),
                center_ps: p.center_ps,
                reason: reason.clone(),
            }),
        }
    }

    /// Areas of the (1L, 1, 1R) triplet divided by their sum.
    pub fn triplet_fractions(&self) -> Result<[f64; 3]> {
        let l = self.require(PeakLabel::Triplet1L)?.area;
        let c = self.require(PeakLabel::Triplet1)?.area;
        let r = self.require(PeakLabel::Triplet1R)?.area;
        let sum = l + c + r;
        if sum <= 0.0 {
            return Err(Error::ZeroSideArea);
        }
        Ok([l / sum, c / sum, r / sum])
    }
}

fn integrate_one(hist: &CorrelationHistogram, center: i64, layout: &PeakLayout) -> PeakArea {
    let w = layout.window_ps;
    let mut peak = PeakArea {
        center_ps: center,
        area: 0.0,
        variance: 0.0,
        unit_variance: 1.0,
        peaks_averaged: 1,
        unusable: None,
    };
    if !hist.covers(center, w) {
        peak.unusable = Some(format!(
            "window [{}, {}) ps leaves the histogram span",
            center - w as i64,
            center + w as i64
        ));
        return peak;
    }
    let blind = layout.blind_ps as i64;
    if blind > 0 && center - (w as i64) < blind && center + (w as i64) > -blind {
        peak.unusable = Some(format!(
            "window overlaps the dead-time/after-pulse region |tau| < {blind} ps; increase the optical delay"
        ));
    }
    let bins = hist.window(center, w);
    match hist.normalized() {
        Some(n) => {
            peak.area = n.values[bins.clone()].iter().sum();
            peak.variance = n.variances[bins.clone()].iter().sum();
            let u = &n.unit[bins];
            peak.unit_variance = u.iter().map(|x| x * x).sum::<f64>() / u.len().max(1) as f64;
        }
        None => {
            let c: u64 = hist.counts()[bins].iter().sum();
            peak.area = c as f64;
            peak.variance = c as f64;
        }
    }
    peak
}

/// Fraction of a two-sided exponential centered at 0 with scale `s` that
/// falls in `[a, b)`.
fn laplace_mass(a: f64, b: f64, s: f64) -> f64 {
    let cdf = |x: f64| {
        if x < 0.0 {
            0.5 * (x / s).exp()
        } else {
            1.0 - 0.5 * (-x / s).exp()
        }
    };
    cdf(b) - cdf(a)
}

/// Replaces the window sums of the usable comb peaks by the solution of
/// `M a = S`, where `M[i][j]` is the share of peak `j` inside window `i`.
fn unmix(
    hist: &CorrelationHistogram,
    layout: &PeakLayout,
    decay: f64,
    raw: &mut BTreeMap<i64, PeakArea>,
) -> Result<()> {
    if !(decay > 0.0 && decay.is_finite()) {
        return Err(Error::param("peak_decay", "must be positive"));
    }
    let centers: Vec<i64> = raw.iter().filter(|(_, p)| p.usable()).map(|(&c, _)| c).collect();
    let n = centers.len();
    if n == 0 {
        return Ok(());
    }
    let edges: Vec<(f64, f64)> = centers
        .iter()
        .map(|&c| {
            let bins = hist.window(c, layout.window_ps);
            (hist.bin_start_ps(bins.start) as f64, hist.bin_start_ps(bins.end) as f64)
        })
        .collect();
    let m = DMatrix::from_fn(n, n, |i, j| {
        let c = centers[j] as f64;
        laplace_mass(edges[i].0 - c, edges[i].1 - c, decay)
    });
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::Fit("peak overlap matrix is singular".into()))?;
    let s = DVector::from_iterator(n, centers.iter().map(|c| raw[c].area));
    let var = DVector::from_iterator(n, centers.iter().map(|c| raw[c].variance));
    let unit = DVector::from_iterator(n, centers.iter().map(|c| raw[c].unit_variance));
    let a = &inv * s;
    let sq = inv.map(|x| x * x);
    let a_var = &sq * var;
    for (i, c) in centers.iter().enumerate() {
        let p = raw.get_mut(c).expect("center from raw");
        p.area = a[i];
        p.variance = a_var[i];
        p.unit_variance = unit[i] * inv[(i, i)] * inv[(i, i)];
    }
    Ok(())
}

fn average(peaks: Vec<PeakArea>, center: i64) -> PeakArea {
    let ok: Vec<&PeakArea> = peaks.iter().filter(|p| p.usable()).collect();
    if ok.is_empty() {
        return PeakArea {
            center_ps: center,
            area: 0.0,
            variance: 0.0,
            unit_variance: 1.0,
            peaks_averaged: 0,
            unusable: Some("no side peak inside the histogram span".into()),
        };
    }
    let n = ok.len() as f64;
    PeakArea {
        center_ps: center,
        area: ok.iter().map(|p| p.area).sum::<f64>() / n,
        variance: ok.iter().map(|p| p.variance).sum::<f64>() / (n * n),
        unit_variance: ok.iter().map(|p| p.unit_variance).sum::<f64>() / (n * n),
        peaks_averaged: ok.len() as u32,
        unusable: None,
    }
}

/// Integrates the labeled peaks of a pulsed correlation histogram whose
/// axis is the optical delay `tau`. A zero `delay_ps` gives the
/// two-detector labels (center and averaged sides); otherwise the
/// single-detector replica and triplet labels.
pub fn integrate_peaks(hist: &CorrelationHistogram, layout: &PeakLayout) -> Result<PeakSet> {
    if layout.period_ps == 0 || layout.window_ps == 0 {
        return Err(Error::param("period", "peak integration needs a period and window"));
    }
    let t = layout.period_ps as i64;
    let d = layout.delay_ps as i64;
    let w = layout.window_ps as i64;

    let mut targets: Vec<(PeakLabel, Vec<i64>)> = vec![(PeakLabel::Center0, vec![0])];
    if d == 0 {
        let orders = 1..=layout.side_orders.max(1) as i64;
        targets.push((PeakLabel::Side1Minus, orders.clone().map(|k| -k * t).collect()));
        targets.push((PeakLabel::Side1Plus, orders.map(|k| k * t).collect()));
    } else {
        targets.push((PeakLabel::Delay0, vec![d]));
        targets.push((PeakLabel::Triplet1L, vec![t - d]));
        targets.push((PeakLabel::Triplet1, vec![t]));
        targets.push((PeakLabel::Triplet1R, vec![t + d]));
    }

    let comb = layout.comb();
    for (_, centers) in &targets {
        for &c in centers {
            if let Some(&other) = comb.iter().find(|&&o| o != c && (o - c).abs() < 2 * w) {
                return Err(Error::OverlappingWindows {
                    a: c.min(other),
                    b: c.max(other),
                    window: w,
                });
            }
        }
    }

    let mut raw: BTreeMap<i64, PeakArea> = comb.iter().map(|&c| (c, integrate_one(hist, c, layout))).collect();
    if let Some(decay) = layout.peak_decay_ps {
        unmix(hist, layout, decay, &mut raw)?;
    }
    let pick = |c: i64| raw.get(&c).cloned().unwrap_or_else(|| integrate_one(hist, c, layout));

    let areas = targets
        .into_iter()
        .map(|(label, centers)| {
            let area = if centers.len() == 1 {
                pick(centers[0])
            } else {
                let c0 = centers[0];
                average(centers.into_iter().map(pick).collect(), c0)
            };
            (label, area)
        })
        .collect();

    Ok(PeakSet {
        areas,
        window_ps: layout.window_ps,
        period_ps: layout.period_ps,
        delay_ps: layout.delay_ps,
        normalized: hist.is_normalized(),
    })
}
