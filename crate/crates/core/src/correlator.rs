//! Correlation histograms from timestamp streams.
//!
//! Four estimators are provided:
//!
//! * [`start_stop_histogram`]: TAC emulation. Each start is matched with the
//!   first later stop (stop times shifted by the electrical delay).
//! * [`adjacent_interval_histogram`]: successive differences of a single
//!   stream, the only quantity a single-channel recorder sees directly.
//! * [`all_pairs_correlation`]: every ordered pair within the span. Its
//!   Poisson-normalized form is the direct `<n(t) n(t+tau)> / <n>^2`
//!   estimator and serves as the reference for the two above.
//! * [`cross_pairs_histogram`]: every start/stop pair within the span
//!   (multi-stop time-tagger mode).
//!
//! All estimators run in O(N + P) for N events and P pairs inside the span.

use std::ops::Range;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stream::TimestampStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Estimator {
    StartStop,
    AdjacentInterval,
    AllPairs,
    CrossPairs,
    /// Derived curve (e.g. a mixing composition); carries no raw counts.
    Composed,
}

/// Normalized g2 values with their variances. `unit` is the normalized
/// value of a single count in each bin.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    pub unit: Vec<f64>,
}

/// Binned delays over `[t_min_ps, t_max_ps)`, optionally normalized to g2.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationHistogram {
    bin_width_ps: u64,
    t_min_ps: i64,
    t_max_ps: i64,
    counts: Vec<u64>,
    total_events: u64,
    partner_events: u64,
    total_time_ps: u64,
    estimator: Estimator,
    normalized: Option<Normalized>,
}

impl CorrelationHistogram {
    pub fn new(estimator: Estimator, bin_width_ps: u64, t_min_ps: i64, t_max_ps: i64) -> Result<Self> {
        if bin_width_ps == 0 {
            return Err(Error::param("bin_width", "must be positive"));
        }
        if t_max_ps <= t_min_ps {
            return Err(Error::param("span", "must be positive"));
        }
        let span = (t_max_ps - t_min_ps) as u64;
        if !span.is_multiple_of(bin_width_ps) {
            return Err(Error::param(
                "span",
                format!("{span} ps is not a whole number of {bin_width_ps} ps bins"),
            ));
        }
        Ok(Self {
            bin_width_ps,
            t_min_ps,
            t_max_ps,
            counts: vec![0; (span / bin_width_ps) as usize],
            total_events: 0,
            partner_events: 0,
            total_time_ps: 0,
            estimator,
            normalized: None,
        })
    }

    /// A normalized curve without raw counts.
    pub fn from_curve(
        bin_width_ps: u64,
        t_min_ps: i64,
        values: Vec<f64>,
        variances: Vec<f64>,
        unit: Vec<f64>,
    ) -> Result<Self> {
        if values.len() != variances.len() || values.len() != unit.len() {
            return Err(Error::param("values", "value/variance lengths differ"));
        }
        let t_max = t_min_ps + (values.len() as u64 * bin_width_ps) as i64;
        let mut h = Self::new(Estimator::Composed, bin_width_ps, t_min_ps, t_max)?;
        h.normalized = Some(Normalized {
            values,
            variances,
            unit,
        });
        Ok(h)
    }

    /// Raw counts read back from a file. Event totals are unknown, so only
    /// pulsed or c.w. normalization applies.
    pub fn from_counts(
        estimator: Estimator,
        bin_width_ps: u64,
        t_min_ps: i64,
        t_max_ps: i64,
        counts: Vec<u64>,
    ) -> Result<Self> {
        let mut h = Self::new(estimator, bin_width_ps, t_min_ps, t_max_ps)?;
        if counts.len() != h.counts.len() {
            return Err(Error::AxisMismatch(format!(
                "{} counts for {} bins",
                counts.len(),
                h.counts.len()
            )));
        }
        h.counts = counts;
        Ok(h)
    }

    fn with_stats(mut self, total_events: u64, partner_events: u64, total_time_ps: u64) -> Self {
        self.total_events = total_events;
        self.partner_events = partner_events;
        self.total_time_ps = total_time_ps;
        self
    }

    #[inline]
    fn record(&mut self, delay: i64) {
        if delay >= self.t_min_ps && delay < self.t_max_ps {
            let i = ((delay - self.t_min_ps) as u64 / self.bin_width_ps) as usize;
            self.counts[i] += 1;
        }
    }

    pub fn bin_width_ps(&self) -> u64 {
        self.bin_width_ps
    }

    pub fn t_min_ps(&self) -> i64 {
        self.t_min_ps
    }

    pub fn t_max_ps(&self) -> i64 {
        self.t_max_ps
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn total_events(&self) -> u64 {
        self.total_events
    }

    pub fn partner_events(&self) -> u64 {
        self.partner_events
    }

    pub fn total_time_ps(&self) -> u64 {
        self.total_time_ps
    }

    pub fn estimator(&self) -> Estimator {
        self.estimator
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized.is_some()
    }

    pub fn normalized(&self) -> Option<&Normalized> {
        self.normalized.as_ref()
    }

    pub fn values(&self) -> Option<&[f64]> {
        self.normalized.as_ref().map(|n| n.values.as_slice())
    }

    pub fn bin_start_ps(&self, i: usize) -> i64 {
        self.t_min_ps + (i as u64 * self.bin_width_ps) as i64
    }

    pub fn bin_center_ps(&self, i: usize) -> f64 {
        self.bin_start_ps(i) as f64 + 0.5 * self.bin_width_ps as f64
    }

    /// Index of the bin containing `t`.
    pub fn bin_of(&self, t: i64) -> Option<usize> {
        (t >= self.t_min_ps && t < self.t_max_ps).then(|| ((t - self.t_min_ps) as u64 / self.bin_width_ps) as usize)
    }

    /// Bins whose centers fall in `[center - half, center + half)`.
    pub fn window(&self, center_ps: i64, half_width_ps: u64) -> Range<usize> {
        let lo = center_ps as f64 - half_width_ps as f64;
        let hi = center_ps as f64 + half_width_ps as f64;
        let bw = self.bin_width_ps as f64;
        let first = ((lo - self.t_min_ps as f64) / bw - 0.5).ceil().max(0.0) as usize;
        let end = ((hi - self.t_min_ps as f64) / bw - 0.5).ceil().max(0.0) as usize;
        first.min(self.n_bins())..end.min(self.n_bins())
    }

    /// True when `[center - half, center + half)` lies inside the axis.
    pub fn covers(&self, center_ps: i64, half_width_ps: u64) -> bool {
        let h = half_width_ps as i64;
        center_ps - h >= self.t_min_ps && center_ps + h <= self.t_max_ps
    }

    /// Adds the counts of a histogram with an identical axis.
    pub fn merge(&mut self, other: &CorrelationHistogram) -> Result<()> {
        if self.is_normalized() || other.is_normalized() {
            return Err(Error::AlreadyNormalized);
        }
        self.check_axis(other)?;
        if self.estimator != other.estimator {
            return Err(Error::AxisMismatch("estimators differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub(crate) fn check_axis(&self, other: &CorrelationHistogram) -> Result<()> {
        if self.bin_width_ps != other.bin_width_ps || self.t_min_ps != other.t_min_ps || self.t_max_ps != other.t_max_ps
        {
            return Err(Error::AxisMismatch(format!(
                "[{}, {}) / {} ps vs [{}, {}) / {} ps",
                self.t_min_ps, self.t_max_ps, self.bin_width_ps, other.t_min_ps, other.t_max_ps, other.bin_width_ps
            )));
        }
        Ok(())
    }

    /// Relabels a start-stop axis as optical delay, `tau = t - t_d`.
    pub fn into_delay_axis(mut self, electrical_delay_ps: u64) -> Self {
        self.t_min_ps -= electrical_delay_ps as i64;
        self.t_max_ps -= electrical_delay_ps as i64;
        self
    }

    /// Merges groups of `factor` adjacent bins. Normalized values are
    /// averaged within each group.
    pub fn rebin(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.n_bins().is_multiple_of(factor) {
            return Err(Error::param(
                "rebin",
                format!("{factor} does not divide {} bins", self.n_bins()),
            ));
        }
        let mut out = Self::new(
            self.estimator,
            self.bin_width_ps * factor as u64,
            self.t_min_ps,
            self.t_max_ps,
        )?
        .with_stats(self.total_events, self.partner_events, self.total_time_ps);
        out.counts = self.counts.chunks(factor).map(|c| c.iter().sum()).collect();
        if let Some(n) = &self.normalized {
            let f = factor as f64;
            let mean = |v: &[f64]| v.chunks(factor).map(|c| c.iter().sum::<f64>() / f).collect();
            let var = |v: &[f64]| v.chunks(factor).map(|c| c.iter().sum::<f64>() / (f * f)).collect();
            let unit = n
                .unit
                .chunks(factor)
                .map(|c| (c.iter().map(|u| u * u).sum::<f64>()).sqrt() / f)
                .collect();
            out.normalized = Some(Normalized {
                values: mean(&n.values),
                variances: var(&n.variances),
                unit,
            });
        }
        Ok(out)
    }

    /// `a * x + b * y` for two normalized curves on the same axis.
    pub fn linear_combination(a: f64, x: &Self, b: f64, y: &Self) -> Result<Self> {
        x.check_axis(y)?;
        let (nx, ny) = match (&x.normalized, &y.normalized) {
            (Some(nx), Some(ny)) => (nx, ny),
            _ => return Err(Error::NotNormalized),
        };
        let zip = |u: &[f64], v: &[f64], f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            u.iter().zip(v).map(|(&p, &q)| f(p, q)).collect()
        };
        Self::from_curve(
            x.bin_width_ps,
            x.t_min_ps,
            zip(&nx.values, &ny.values, &|p, q| a * p + b * q),
            zip(&nx.variances, &ny.variances, &|p, q| a * a * p + b * b * q),
            zip(&nx.unit, &ny.unit, &|p, q| (a * a * p * p + b * b * q * q).sqrt()),
        )
    }
}

/// Start-stop electronics: electrical delay on the stop input, bin width
/// and full-scale span, all in ps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TacConfig {
    pub electrical_delay_ps: u64,
    pub bin_width_ps: u64,
    pub span_ps: u64,
}

impl TacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.electrical_delay_ps >= self.span_ps {
            return Err(Error::param("electrical_delay", "must be shorter than the span"));
        }
        Ok(())
    }
}

/// Each start is paired with the first stop strictly after it (stop times
/// shifted by `t_d`); a stop coincident with its start is not resolved.
/// The axis is the start-stop coordinate `tau + t_d` over `[0, span)`.
pub fn start_stop_histogram(
    start: &TimestampStream,
    stop: &TimestampStream,
    cfg: &TacConfig,
) -> Result<CorrelationHistogram> {
    cfg.validate()?;
    let mut h = CorrelationHistogram::new(Estimator::StartStop, cfg.bin_width_ps, 0, cfg.span_ps as i64)?.with_stats(
        start.len() as u64,
        stop.len() as u64,
        start.duration_ps().max(stop.duration_ps()),
    );
    let td = cfg.electrical_delay_ps;
    let stops = stop.times();
    let mut j = 0;
    for &s in start.times() {
        while j < stops.len() && stops[j] + td <= s {
            j += 1;
        }
        match stops.get(j) {
            Some(&p) => h.record((p + td - s) as i64),
            None => break,
        }
    }
    Ok(h)
}

/// All start/stop pairs with `stop + t_d - start` in `[0, span)`.
pub fn cross_pairs_histogram(
    start: &TimestampStream,
    stop: &TimestampStream,
    cfg: &TacConfig,
) -> Result<CorrelationHistogram> {
    cfg.validate()?;
    let mut h = CorrelationHistogram::new(Estimator::CrossPairs, cfg.bin_width_ps, 0, cfg.span_ps as i64)?.with_stats(
        start.len() as u64,
        stop.len() as u64,
        start.duration_ps().max(stop.duration_ps()),
    );
    let td = cfg.electrical_delay_ps;
    let span = cfg.span_ps;
    let stops = stop.times();
    let mut lo = 0;
    for &s in start.times() {
        while lo < stops.len() && stops[lo] + td < s {
            lo += 1;
        }
        for &p in &stops[lo..] {
            let d = p + td - s;
            if d >= span {
                break;
            }
            h.record(d as i64);
        }
    }
    Ok(h)
}

fn auto_histogram(
    estimator: Estimator,
    stream: &TimestampStream,
    bin_width_ps: u64,
    span_ps: u64,
) -> Result<CorrelationHistogram> {
    let n = stream.len() as u64;
    Ok(CorrelationHistogram::new(estimator, bin_width_ps, 0, span_ps as i64)?.with_stats(n, n, stream.duration_ps()))
}

/// Successive differences `t[i+1] - t[i]` over `[0, span)`.
pub fn adjacent_interval_histogram(
    stream: &TimestampStream,
    bin_width_ps: u64,
    span_ps: u64,
) -> Result<CorrelationHistogram> {
    let mut h = auto_histogram(Estimator::AdjacentInterval, stream, bin_width_ps, span_ps)?;
    for w in stream.times().windows(2) {
        h.record((w[1] - w[0]) as i64);
    }
    Ok(h)
}

fn all_pairs_into(h: &mut CorrelationHistogram, times: &[u64], range: Range<usize>, span: u64) {
    for i in range {
        let t = times[i];
        for &u in &times[i + 1..] {
            let d = u - t;
            if d >= span {
                break;
            }
            h.record(d as i64);
        }
    }
}

/// Every ordered pair `i < j` with `t[j] - t[i]` in `[0, span)`.
pub fn all_pairs_correlation(
    stream: &TimestampStream,
    bin_width_ps: u64,
    span_ps: u64,
) -> Result<CorrelationHistogram> {
    let mut h = auto_histogram(Estimator::AllPairs, stream, bin_width_ps, span_ps)?;
    all_pairs_into(&mut h, stream.times(), 0..stream.len(), span_ps);
    Ok(h)
}

fn chunk_ranges(n: usize, chunks: usize) -> Vec<Range<usize>> {
    let chunks = chunks.max(1);
    let size = n.div_ceil(chunks).max(1);
    (0..n).step_by(size).map(|a| a..(a + size).min(n)).collect()
}

/// Parallel [`all_pairs_correlation`]. Each chunk owns the pairs whose
/// first event it holds and reads past its end, so seam pairs are counted
/// exactly once and the result does not depend on `chunks`.
pub fn all_pairs_correlation_chunked(
    stream: &TimestampStream,
    bin_width_ps: u64,
    span_ps: u64,
    chunks: usize,
) -> Result<CorrelationHistogram> {
    let empty = auto_histogram(Estimator::AllPairs, stream, bin_width_ps, span_ps)?;
    let times = stream.times();
    chunk_ranges(times.len(), chunks)
        .into_par_iter()
        .map(|r| {
            let mut h = empty.clone();
            all_pairs_into(&mut h, times, r, span_ps);
            Ok(h)
        })
        .try_reduce(|| empty.clone(), |mut a, b| a.merge(&b).map(|_| a))
}

/// Parallel [`adjacent_interval_histogram`] with the same seam rule.
pub fn adjacent_interval_histogram_chunked(
    stream: &TimestampStream,
    bin_width_ps: u64,
    span_ps: u64,
    chunks: usize,
) -> Result<CorrelationHistogram> {
    let empty = auto_histogram(Estimator::AdjacentInterval, stream, bin_width_ps, span_ps)?;
    let times = stream.times();
    let pairs = times.len().saturating_sub(1);
    chunk_ranges(pairs, chunks)
        .into_par_iter()
        .map(|r| {
            let mut h = empty.clone();
            for i in r {
                h.record((times[i + 1] - times[i]) as i64);
            }
            Ok(h)
        })
        .try_reduce(|| empty.clone(), |mut a, b| a.merge(&b).map(|_| a))
}

/// Shape assumed for the slowly varying baseline of a c.w. histogram.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Envelope {
    Flat,
    /// `c * exp(-lambda * tau)`, the waiting-time envelope of first-event
    /// estimators.
    Exponential,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NormContext {
    /// Divide by the uncorrelated expectation `N_start * N_stop * bin / T`.
    Poisson,
    /// Divide by the mean peak-group area at orders `k` and `-k`, spread
    /// over the bins of one peak window. A group is the peak at `k T` plus,
    /// when `delay_ps > 0`, its replicas at `k T -/+ delay`.
    Pulsed {
        period_ps: u64,
        delay_ps: u64,
        window_ps: u64,
        orders: Range<i64>,
    },
    /// Fit the baseline over plateau windows (on the histogram axis) that
    /// must stay clear of every `feature +/- feature_halfwidth_ps`.
    Cw {
        plateau: Vec<(i64, i64)>,
        features: Vec<i64>,
        feature_halfwidth_ps: u64,
        envelope: Envelope,
    },
}

/// Converts raw counts into a g2 estimate. Normalizing twice is an error.
pub fn normalize(hist: &CorrelationHistogram, ctx: &NormContext) -> Result<CorrelationHistogram> {
    if hist.is_normalized() {
        return Err(Error::AlreadyNormalized);
    }
    let norm: Vec<f64> = match ctx {
        NormContext::Poisson => {
            if hist.total_time_ps == 0 || hist.total_events == 0 || hist.partner_events == 0 {
                return Err(Error::Config(
                    "Poisson normalization needs events and a duration".into(),
                ));
            }
            let level = hist.total_events as f64 * hist.partner_events as f64 * hist.bin_width_ps as f64
                / hist.total_time_ps as f64;
            vec![level; hist.n_bins()]
        }
        NormContext::Pulsed {
            period_ps,
            delay_ps,
            window_ps,
            orders,
        } => {
            let level = pulsed_reference(hist, *period_ps as i64, *delay_ps as i64, *window_ps, orders.clone())?;
            vec![level; hist.n_bins()]
        }
        NormContext::Cw {
            plateau,
            features,
            feature_halfwidth_ps,
            envelope,
        } => {
            let (c, lambda) = fit_plateau(hist, plateau, features, *feature_halfwidth_ps, *envelope)?;
            (0..hist.n_bins())
                .map(|i| c * (-lambda * hist.bin_center_ps(i)).exp())
                .collect()
        }
    };
    let mut out = hist.clone();
    let values = hist.counts.iter().zip(&norm).map(|(&c, &n)| c as f64 / n).collect();
    let variances = hist
        .counts
        .iter()
        .zip(&norm)
        .map(|(&c, &n)| c as f64 / (n * n))
        .collect();
    let unit = norm.iter().map(|&n| 1.0 / n).collect();
    out.normalized = Some(Normalized {
        values,
        variances,
        unit,
    });
    Ok(out)
}

/// Per-bin count level that maps a reference peak group to unit height.
fn pulsed_reference(
    hist: &CorrelationHistogram,
    period: i64,
    delay: i64,
    window: u64,
    orders: Range<i64>,
) -> Result<f64> {
    if period <= 0 || window == 0 {
        return Err(Error::param("period", "pulsed normalization needs a period and window"));
    }
    let offsets: Vec<i64> = if delay > 0 { vec![-delay, 0, delay] } else { vec![0] };
    let mut areas = Vec::new();
    for k in orders.filter(|&k| k != 0).flat_map(|k| [k, -k]) {
        let centers: Vec<i64> = offsets.iter().map(|o| k * period + o).collect();
        if centers.iter().all(|&c| hist.covers(c, window)) {
            let area: u64 = centers
                .iter()
                .map(|&c| hist.counts[hist.window(c, window)].iter().sum::<u64>())
                .sum();
            areas.push(area as f64);
        }
    }
    if areas.is_empty() {
        return Err(Error::SpanTooSmall(
            "no reference peak group inside the histogram".into(),
        ));
    }
    let mean = areas.iter().sum::<f64>() / areas.len() as f64;
    let bins = hist.window(0, window).len().max(1) as f64;
    if mean <= 0.0 {
        return Err(Error::ZeroSideArea);
    }
    Ok(mean / bins)
}

fn fit_plateau(
    hist: &CorrelationHistogram,
    plateau: &[(i64, i64)],
    features: &[i64],
    halfwidth: u64,
    envelope: Envelope,
) -> Result<(f64, f64)> {
    if plateau.is_empty() {
        return Err(Error::Config(
            "c.w. normalization needs at least one plateau window".into(),
        ));
    }
    let h = halfwidth as i64;
    for &(lo, hi) in plateau {
        if hi <= lo {
            return Err(Error::Config(format!("empty plateau window [{lo}, {hi})")));
        }
        if let Some(f) = features.iter().find(|&&f| lo < f + h && f - h < hi) {
            return Err(Error::Config(format!(
                "plateau window [{lo}, {hi}) ps overlaps the feature at {f} +/- {halfwidth} ps"
            )));
        }
    }
    let bins: Vec<usize> = (0..hist.n_bins())
        .filter(|&i| {
            let c = hist.bin_center_ps(i);
            plateau.iter().any(|&(lo, hi)| c >= lo as f64 && c < hi as f64)
        })
        .collect();
    if bins.is_empty() {
        return Err(Error::SpanTooSmall("plateau windows hold no bins".into()));
    }
    match envelope {
        Envelope::Flat => {
            let mean = bins.iter().map(|&i| hist.counts[i] as f64).sum::<f64>() / bins.len() as f64;
            if mean <= 0.0 {
                return Err(Error::Fit("plateau is empty".into()));
            }
            Ok((mean, 0.0))
        }
        Envelope::Exponential => {
            // Weighted least squares on ln(count); var(ln n) ~ 1/n.
            let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            let mut used = 0;
            for &i in &bins {
                let n = hist.counts[i] as f64;
                if n <= 0.0 {
                    continue;
                }
                used += 1;
                let x = hist.bin_center_ps(i);
                let y = n.ln();
                sw += n;
                sx += n * x;
                sy += n * y;
                sxx += n * x * x;
                sxy += n * x * y;
            }
            let det = sw * sxx - sx * sx;
            if used < 2 || det.abs() < f64::EPSILON * sw * sxx {
                return Err(Error::Fit("exponential plateau needs two populated bins".into()));
            }
            let slope = (sw * sxy - sx * sy) / det;
            let intercept = (sy - slope * sx) / sw;
            Ok((intercept.exp(), -slope))
        }
    }
}
