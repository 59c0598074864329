//! End-to-end runs: emission, optics, detection, correlation, analysis.

mod config;
mod presets;
mod report;

use std::fs;
use std::path::Path;

pub use config::{
    default_envelope, default_estimator, estimator_fits, estimator_name, parse_duration_ps, parse_rate_hz,
    AnalysisConfig, CompareOverrides, CorrelatorConfig, PipelineConfig, Source,
};
pub use presets::{preset, preset_names, preset_text};
pub use report::Report;

use crate::analysis::{
    background_correct, check_design_constraints, fit_dip, g2_cw_from_measured_dip, g2_cw_standard, g2_pulsed_delay,
    g2_pulsed_standard, integrate_peaks, DesignInputs, DesignReport, DipFit, G2Result, PeakLabel, PeakLayout, PeakSet,
};
use crate::correlator::{
    adjacent_interval_histogram_chunked, all_pairs_correlation_chunked, cross_pairs_histogram, normalize,
    start_stop_histogram, CorrelationHistogram, Estimator, NormContext, TacConfig,
};
use crate::detector::{detect_with_stats, DetectorStats};
use crate::emission::{simulate_emitter, simulate_poisson_source, ExcitationMode};
use crate::error::{Error, Result};
use crate::io::{write_histogram_csv, write_stream};
use crate::optics::{split_delay_merge, split_two_arms, ChannelConfig, Scheme};
use crate::stream::TimestampStream;

/// Seed offset of the second detector in the two-detector scheme.
const STOP_DETECTOR_SEED: u64 = 1;
/// Seed perturbation for the other scheme of a comparison run.
const COMPARE_SEED_MIX: u64 = 0x5851_F42D_4C95_7F2D;

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// `("detections", s)` for one detector, `("start", s)` and `("stop", s)`
    /// for two.
    pub streams: Vec<(&'static str, TimestampStream)>,
    pub detector_stats: Vec<DetectorStats>,
    pub emitted_photons: u64,
    /// Raw counts on the optical delay axis.
    pub histogram: CorrelationHistogram,
    pub g2: CorrelationHistogram,
    pub peaks: Option<PeakSet>,
    pub dip: Option<DipFit>,
    pub result: Option<G2Result>,
    pub design: Option<DesignReport>,
    pub report: Report,
}

impl RunOutput {
    pub fn detected_photons(&self) -> u64 {
        self.streams.iter().map(|(_, s)| s.len() as u64).sum()
    }
}

pub fn design_check(cfg: &PipelineConfig) -> Option<DesignReport> {
    if cfg.channel.scheme != Scheme::SingleDetectorDelay {
        return None;
    }
    let mut inp = DesignInputs::new(
        cfg.channel.delay_ps as f64,
        cfg.detector.dead_time_ps as f64,
        cfg.lifetime_ps(),
        cfg.is_pulsed().then_some(cfg.excitation.rep_rate_hz),
        cfg.channel.t_ratio,
    );
    inp.lifetimes_margin = cfg.analysis.lifetimes_margin;
    inp.period_divisor = cfg.analysis.period_divisor;
    Some(check_design_constraints(&inp))
}

/// Mean signal photons per pulse (pulsed) or per second (c.w.).
fn signal_level(cfg: &PipelineConfig) -> f64 {
    match &cfg.source {
        Source::Laser { rate_hz } => match cfg.excitation.mode {
            ExcitationMode::Pulsed => rate_hz / cfg.excitation.rep_rate_hz,
            ExcitationMode::Cw => *rate_hz,
        },
        Source::Emitter(m) => match cfg.excitation.mode {
            ExcitationMode::Pulsed => m.excitation_prob * (1.0 + m.pair_prob),
            ExcitationMode::Cw => {
                let gamma = 1e12 / m.lifetime_ps;
                m.pump_rate_hz * gamma / (m.pump_rate_hz + gamma) * (1.0 + m.pair_prob)
            }
        },
    }
}

/// Signal fraction `S / (S + B)`. Under pulsed excitation the background is
/// counted over one peak window, where it competes with one pulse's signal.
pub fn background_rho(cfg: &PipelineConfig) -> f64 {
    let b = cfg.background_rate_hz();
    let s = signal_level(cfg);
    let b = match cfg.excitation.mode {
        ExcitationMode::Pulsed => b * 2.0 * cfg.analysis.window_ps as f64 * 1e-12,
        ExcitationMode::Cw => b,
    };
    if s + b > 0.0 {
        s / (s + b)
    } else {
        1.0
    }
}

/// Raw correlation histogram of the configured estimator on the delay axis.
/// Single-stream estimators take one stream, start-stop and cross-pairs two
/// (start, stop).
pub fn correlate(cfg: &PipelineConfig, streams: &[&TimestampStream]) -> Result<CorrelationHistogram> {
    let c = &cfg.correlator;
    let chunks = rayon::current_num_threads();
    let want = match c.estimator {
        Estimator::StartStop | Estimator::CrossPairs => 2,
        _ => 1,
    };
    if streams.len() != want {
        return Err(Error::Config(format!(
            "estimator `{}` takes {want} stream(s), got {}",
            estimator_name(c.estimator),
            streams.len()
        )));
    }
    match c.estimator {
        Estimator::AdjacentInterval => {
            adjacent_interval_histogram_chunked(streams[0], c.bin_width_ps, c.span_ps, chunks)
        }
        Estimator::AllPairs => all_pairs_correlation_chunked(streams[0], c.bin_width_ps, c.span_ps, chunks),
        Estimator::StartStop | Estimator::CrossPairs => {
            let tac = TacConfig {
                electrical_delay_ps: c.electrical_delay_ps,
                bin_width_ps: c.bin_width_ps,
                span_ps: c.span_ps,
            };
            let (start, stop) = (streams[0], streams[1]);
            let h = if c.estimator == Estimator::StartStop {
                start_stop_histogram(start, stop, &tac)?
            } else {
                cross_pairs_histogram(start, stop, &tac)?
            };
            Ok(h.into_delay_axis(c.electrical_delay_ps))
        }
        Estimator::Composed => Err(Error::Config("`composed` is not a measurement estimator".into())),
    }
}

/// Dip centers on the delay axis.
fn features(cfg: &PipelineConfig) -> Vec<i64> {
    match cfg.channel.scheme {
        Scheme::StandardHbt => vec![0],
        Scheme::SingleDetectorDelay => vec![0, cfg.channel.delay_ps as i64],
    }
}

/// Every stretch of the axis clear of the dips and the blind region.
fn default_plateau(cfg: &PipelineConfig, hist: &CorrelationHistogram) -> Vec<(i64, i64)> {
    let hw = 2 * cfg.analysis.dip_half_width_ps as i64;
    let mut excluded: Vec<(i64, i64)> = features(cfg).into_iter().map(|f| (f - hw, f + hw)).collect();
    if cfg.channel.scheme == Scheme::SingleDetectorDelay {
        excluded.push((i64::MIN, cfg.analysis.blind_ps as i64));
    }
    excluded.sort_unstable();
    let mut out = Vec::new();
    let mut lo = hist.t_min_ps();
    for (a, b) in excluded {
        if a > lo {
            out.push((lo, a.min(hist.t_max_ps())));
        }
        lo = lo.max(b);
    }
    if lo < hist.t_max_ps() {
        out.push((lo, hist.t_max_ps()));
    }
    out.retain(|(a, b)| b > a);
    out
}

fn norm_context(cfg: &PipelineConfig, hist: &CorrelationHistogram) -> NormContext {
    let a = &cfg.analysis;
    match cfg.excitation.mode {
        ExcitationMode::Pulsed => NormContext::Pulsed {
            period_ps: cfg.excitation.period_ps(),
            delay_ps: cfg.channel.delay_ps,
            window_ps: a.window_ps,
            orders: match cfg.channel.scheme {
                // Groups next to the blind region and the triplet overlap
                // are skipped.
                Scheme::SingleDetectorDelay => 2..6,
                Scheme::StandardHbt => 1..(a.side_orders as i64 + 1),
            },
        },
        ExcitationMode::Cw => NormContext::Cw {
            plateau: if a.plateau.is_empty() {
                default_plateau(cfg, hist)
            } else {
                a.plateau.clone()
            },
            features: features(cfg),
            feature_halfwidth_ps: a.dip_half_width_ps,
            envelope: a
                .envelope
                .unwrap_or_else(|| config::default_envelope(cfg.correlator.estimator)),
        },
    }
}

fn f6(x: f64) -> String {
    format!("{x:.6}")
}

/// Runs one scheme end to end without touching the file system. With
/// `strict`, design-constraint violations abort before simulating.
pub fn run(cfg: &PipelineConfig, strict: bool) -> Result<RunOutput> {
    let design = design_check(cfg);
    if let Some(d) = &design {
        if strict && !d.passes {
            return Err(Error::Config(format!(
                "design constraints violated: {}",
                d.violations.join("; ")
            )));
        }
    }
    let seed = cfg.excitation.seed;
    let emitted = match &cfg.source {
        Source::Emitter(m) => simulate_emitter(m, &cfg.excitation)?,
        Source::Laser { rate_hz } => simulate_poisson_source(*rate_hz, &cfg.excitation)?,
    };

    let (streams, stats) = match cfg.channel.scheme {
        Scheme::SingleDetectorDelay => {
            let merged = split_delay_merge(&emitted, &cfg.channel, seed)?;
            let (s, st) = detect_with_stats(&merged, &cfg.detector, seed)?;
            (vec![("detections", s)], vec![st])
        }
        Scheme::StandardHbt => {
            let (a, b) = split_two_arms(&emitted, &cfg.channel, seed)?;
            let (sa, st_a) = detect_with_stats(&a, &cfg.detector, seed)?;
            let (sb, st_b) = detect_with_stats(&b, &cfg.detector, seed.wrapping_add(STOP_DETECTOR_SEED))?;
            (vec![("start", sa), ("stop", sb)], vec![st_a, st_b])
        }
    };

    let refs: Vec<&TimestampStream> = streams.iter().map(|(_, s)| s).collect();
    let histogram = correlate(cfg, &refs)?;

    let mut report = Report::default();
    report.push("run", &cfg.name);
    report.push(
        "scheme",
        match cfg.channel.scheme {
            Scheme::SingleDetectorDelay => "single",
            Scheme::StandardHbt => "hbt",
        },
    );
    report.push(
        "excitation",
        match cfg.excitation.mode {
            ExcitationMode::Pulsed => "pulsed",
            ExcitationMode::Cw => "cw",
        },
    );
    report.push(
        "source",
        match cfg.source {
            Source::Emitter(_) => "emitter",
            Source::Laser { .. } => "laser",
        },
    );
    report.push("seed", seed);
    report.push("estimator", estimator_name(cfg.correlator.estimator));
    report.push("t_ratio", f6(cfg.channel.t_ratio));
    report.push("delay_ns", f6(cfg.channel.delay_ps as f64 / 1e3));
    report.push("duration_s", f6(cfg.excitation.duration_ps as f64 / 1e12));
    if let Source::Emitter(m) = &cfg.source {
        if cfg.is_pulsed() {
            report.push("emitter.true_g2_zero", f6(m.pulsed_g2_zero()));
        }
        report.push("emitter.pair_prob", f6(m.pair_prob));
    }
    report.push("photons.emitted", emitted.len());
    for ((name, s), st) in streams.iter().zip(&stats) {
        report.push(format!("detector.{name}.registered"), s.len());
        report.push(format!("detector.{name}.rate_hz"), format!("{:.3}", s.rate_hz()));
        report.push(format!("detector.{name}.dead_time_rejected"), st.dead_time_rejected);
        report.push(format!("detector.{name}.afterpulses"), st.afterpulses_registered);
        if st.cascade_truncated > 0 {
            report.push(
                format!("detector.{name}.afterpulse_cascades_truncated"),
                st.cascade_truncated,
            );
        }
    }
    let Analysis { g2, peaks, dip, result } = analyze_histogram(cfg, &histogram, &mut report)?;

    if let Some(d) = &design {
        report.push("design.passes", d.passes);
        report.push("design.min_delay_ns", f6(d.min_delay_ps / 1e3));
        if let Some(m) = d.max_delay_ps {
            report.push("design.max_delay_ns", f6(m / 1e3));
        }
        report.push("design.efficiency", f6(d.efficiency));
        report.push("design.efficiency_gap", f6(d.efficiency_gap));
        for (i, v) in d.violations.iter().enumerate() {
            report.push(format!("design.violation.{i}"), v);
        }
    }

    Ok(RunOutput {
        streams,
        detector_stats: stats,
        emitted_photons: emitted.len() as u64,
        histogram,
        g2,
        peaks,
        dip,
        result,
        design,
        report,
    })
}

/// What [`analyze_histogram`] extracts from a raw histogram.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub g2: CorrelationHistogram,
    pub peaks: Option<PeakSet>,
    pub dip: Option<DipFit>,
    pub result: Option<G2Result>,
}

/// Normalizes a raw delay-axis histogram and extracts g2(0) as the
/// configuration prescribes, appending the findings to `report`.
pub fn analyze_histogram(
    cfg: &PipelineConfig,
    histogram: &CorrelationHistogram,
    report: &mut Report,
) -> Result<Analysis> {
    report.push("histogram.bin_width_ns", f6(histogram.bin_width_ps() as f64 / 1e3));
    report.push("histogram.t_min_ns", f6(histogram.t_min_ps() as f64 / 1e3));
    report.push("histogram.t_max_ns", f6(histogram.t_max_ps() as f64 / 1e3));
    report.push("histogram.counts", histogram.total_counts());
    let g2 = normalize(histogram, &norm_context(cfg, histogram))?;

    let mut peaks = None;
    let mut dip = None;
    let mut result = None;
    let a = &cfg.analysis;
    match cfg.excitation.mode {
        ExcitationMode::Pulsed => {
            let period = cfg.excitation.period_ps();
            let mut layout = match cfg.channel.scheme {
                Scheme::StandardHbt => PeakLayout::two_detector(period, a.window_ps),
                Scheme::SingleDetectorDelay => {
                    PeakLayout::single_detector(period, cfg.channel.delay_ps, a.window_ps, a.blind_ps)
                }
            };
            if cfg.channel.scheme == Scheme::StandardHbt {
                layout.side_orders = a.side_orders;
            }
            if let Source::Emitter(e) = &cfg.source {
                layout.peak_decay_ps = Some(e.lifetime_ps);
                report.push("peak.overlap_decay_ns", f6(e.lifetime_ps / 1e3));
            }
            let p = integrate_peaks(histogram, &layout)?;
            for (label, area) in &p.areas {
                report.push(format!("peak.{label}.center_ns"), f6(area.center_ps as f64 / 1e3));
                report.push(format!("peak.{label}.area"), area.area);
                match &area.unusable {
                    None => report.push(format!("peak.{label}.sigma"), f6(area.sigma())),
                    Some(why) => report.push(format!("peak.{label}.unusable"), why),
                }
            }
            if cfg.channel.scheme == Scheme::SingleDetectorDelay {
                if let Ok(fr) = p.triplet_fractions() {
                    report.push("triplet.fraction_1l", f6(fr[0]));
                    report.push("triplet.fraction_1", f6(fr[1]));
                    report.push("triplet.fraction_1r", f6(fr[2]));
                }
                if let (Ok(d0), Ok(l)) = (p.require(PeakLabel::Delay0), p.require(PeakLabel::Triplet1L)) {
                    if l.area > 0.0 {
                        report.push("ratio.delay0_over_1l", f6(d0.area / l.area));
                    }
                }
            }
            let r = match cfg.channel.scheme {
                Scheme::StandardHbt => g2_pulsed_standard(&p)?,
                Scheme::SingleDetectorDelay => g2_pulsed_delay(&p)?,
            };
            result = Some(r);
            peaks = Some(p);
        }
        ExcitationMode::Cw => match cfg.source {
            Source::Emitter(_) => {
                let center = match cfg.channel.scheme {
                    Scheme::StandardHbt => 0,
                    Scheme::SingleDetectorDelay => cfg.channel.delay_ps as i64,
                };
                let fit = fit_dip(&g2, center, a.dip_half_width_ps)?;
                report.push("dip.center_ns", f6(center as f64 / 1e3));
                report.push("dip.value", f6(fit.dip));
                report.push("dip.sigma", f6(fit.sigma));
                report.push("dip.baseline", f6(fit.baseline));
                report.push("dip.recovery_time_ns", f6(1.0 / fit.rate_per_ps / 1e3));
                report.push("dip.chi2_per_dof", f6(fit.chi2_per_dof));
                result = Some(match cfg.channel.scheme {
                    Scheme::StandardHbt => g2_cw_standard(fit.dip, fit.sigma),
                    Scheme::SingleDetectorDelay => g2_cw_from_measured_dip(fit.dip, fit.sigma, cfg.channel.t_ratio)?,
                });
                dip = Some(fit);
            }
            Source::Laser { .. } => {
                let from = a.blind_ps as f64;
                let vals = g2.values().expect("normalized");
                let tail: Vec<f64> = (0..g2.n_bins())
                    .filter(|&i| g2.bin_start_ps(i) as f64 >= from)
                    .map(|i| vals[i])
                    .collect();
                if !tail.is_empty() {
                    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
                    let dev = tail.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
                    report.push("flat.from_ns", f6(from / 1e3));
                    report.push("flat.mean", f6(mean));
                    report.push("flat.max_abs_dev", f6(dev));
                }
            }
        },
    }

    if let Some(r) = result.take() {
        let r = if a.background_correct {
            let rho = background_rho(cfg);
            report.push("background.rho", f6(rho));
            report.push("g2_zero.uncorrected", f6(r.g2_zero));
            background_correct(&r, rho)?
        } else {
            r
        };
        report.push("g2_zero.raw_measure", f6(r.raw_dip_or_ratio));
        report.push("g2_zero", f6(r.g2_zero));
        report.push("g2_zero.sigma", f6(r.sigma));
        report.push("g2_zero.clamped", r.clamped);
        if matches!(cfg.source, Source::Emitter(_)) && cfg.is_pulsed() {
            report.push(
                "note",
                "under saturated pulsed excitation g2_zero approximates the biexciton to exciton quantum-yield ratio",
            );
        }
        result = Some(r);
    }

    Ok(Analysis { g2, peaks, dip, result })
}

/// Writes the artifacts of a run into `out_dir`: one `.phst` stream per
/// detector, `histogram.csv` and `report.txt`.
pub fn write_outputs(out: &RunOutput, out_dir: impl AsRef<Path>) -> Result<()> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    for (name, s) in &out.streams {
        write_stream(dir.join(format!("{name}.phst")), s)?;
    }
    write_histogram_csv(&out.g2, dir.join("histogram.csv"))?;
    fs::write(dir.join("report.txt"), out.report.to_string())?;
    Ok(())
}

pub fn run_pipeline(cfg: &PipelineConfig, out_dir: impl AsRef<Path>, strict: bool) -> Result<RunOutput> {
    let out = run(cfg, strict)?;
    write_outputs(&out, out_dir)?;
    Ok(out)
}

/// The same source measured with the other scheme, on an independent seed.
pub fn counterpart(cfg: &PipelineConfig) -> Result<PipelineConfig> {
    let mut other = cfg.clone();
    other.excitation.seed = cfg.excitation.seed ^ COMPARE_SEED_MIX;
    let o = &cfg.compare;
    let span = cfg.correlator.span_ps;
    match cfg.channel.scheme {
        Scheme::SingleDetectorDelay => {
            other.channel = ChannelConfig::hbt(cfg.channel.t_ratio);
            let estimator = o.estimator.unwrap_or(Estimator::StartStop);
            let td = o.electrical_delay_ps.unwrap_or(span);
            other.correlator = CorrelatorConfig {
                estimator,
                bin_width_ps: cfg.correlator.bin_width_ps,
                span_ps: o.span_ps.unwrap_or(td + span),
                electrical_delay_ps: td,
            };
        }
        Scheme::StandardHbt => {
            let delay = cfg.compare_delay_ps.ok_or_else(|| {
                Error::Config("comparing against the single-detector scheme needs `scheme.delay`".into())
            })?;
            other.channel = ChannelConfig::single_detector(cfg.channel.t_ratio, delay);
            other.correlator = CorrelatorConfig {
                estimator: o
                    .estimator
                    .unwrap_or_else(|| default_estimator(Scheme::SingleDetectorDelay, cfg.excitation.mode)),
                bin_width_ps: cfg.correlator.bin_width_ps,
                span_ps: o.span_ps.unwrap_or(span - cfg.correlator.electrical_delay_ps),
                electrical_delay_ps: 0,
            };
        }
    }
    if !estimator_fits(other.channel.scheme, other.correlator.estimator) {
        return Err(Error::Config(format!(
            "compare.estimator `{}` does not fit the other scheme",
            estimator_name(other.correlator.estimator)
        )));
    }
    other.analysis.envelope = None;
    other.analysis.plateau.clear();
    Ok(other)
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub single: RunOutput,
    pub hbt: RunOutput,
    pub report: Report,
}

/// Runs both schemes on the configured source and compares their g2(0).
pub fn compare_schemes(cfg: &PipelineConfig, strict: bool) -> Result<Comparison> {
    let other_cfg = counterpart(cfg)?;
    let (single_cfg, hbt_cfg) = match cfg.channel.scheme {
        Scheme::SingleDetectorDelay => (cfg, &other_cfg),
        Scheme::StandardHbt => (&other_cfg, cfg),
    };
    let single = run(single_cfg, strict)?;
    let hbt = run(hbt_cfg, strict)?;

    let mut report = Report::default();
    for (k, v) in single.report.entries() {
        report.push(format!("single.{k}"), v);
    }
    for (k, v) in hbt.report.entries() {
        report.push(format!("hbt.{k}"), v);
    }
    let (ds, dh) = (single.detected_photons(), hbt.detected_photons());
    report.push("compare.detected_single", ds);
    report.push("compare.detected_hbt", dh);
    report.push("compare.detected_ratio", f6(ds as f64 / dh.max(1) as f64));
    if let (Some(a), Some(b)) = (&single.result, &hbt.result) {
        let diff = (a.g2_zero - b.g2_zero).abs();
        let sigma = (a.sigma * a.sigma + b.sigma * b.sigma).sqrt();
        report.push("compare.g2_zero_single", f6(a.g2_zero));
        report.push("compare.g2_zero_single_sigma", f6(a.sigma));
        report.push("compare.g2_zero_hbt", f6(b.g2_zero));
        report.push("compare.g2_zero_hbt_sigma", f6(b.sigma));
        report.push("compare.abs_diff", f6(diff));
        report.push("compare.combined_sigma", f6(sigma));
        report.push("compare.agree_3sigma", diff <= 3.0 * sigma);
    }
    if let (Some(ps), Some(ph)) = (&single.peaks, &hbt.peaks) {
        let side = |p: &PeakSet, labels: [PeakLabel; 2]| {
            let v: Vec<f64> = labels
                .iter()
                .filter_map(|&l| p.require(l).ok())
                .map(|a| a.area)
                .collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        };
        if let (Some(s), Some(h)) = (
            side(ps, [PeakLabel::Triplet1L, PeakLabel::Triplet1R]),
            side(ph, [PeakLabel::Side1Minus, PeakLabel::Side1Plus]),
        ) {
            report.push("compare.side_raw_single", f6(s));
            report.push("compare.side_raw_hbt", f6(h));
            report.push("compare.side_parity", f6(s / h.max(f64::MIN_POSITIVE)));
        }
    }
    Ok(Comparison { single, hbt, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_plateau_avoids_features() {
        let cfg = preset("fig2c").unwrap();
        let h = CorrelationHistogram::new(Estimator::AllPairs, 1000, 0, cfg.correlator.span_ps as i64).unwrap();
        let p = default_plateau(&cfg, &h);
        let hw = cfg.analysis.dip_half_width_ps as i64;
        let d = cfg.channel.delay_ps as i64;
        assert!(!p.is_empty());
        for (a, b) in p {
            assert!(a >= cfg.analysis.blind_ps as i64);
            assert!(b <= d - hw || a >= d + hw, "({a}, {b})");
        }
    }

    #[test]
    fn rho_without_background_is_one() {
        let cfg = preset("fig2b").unwrap();
        assert_eq!(background_rho(&cfg), 1.0);
    }

    #[test]
    fn pulsed_rho_counts_background_in_window() {
        let mut cfg = preset("fig2b").unwrap();
        if let Source::Emitter(m) = &mut cfg.source {
            m.pair_prob = 0.0;
            m.background_rate_hz = 1e6;
        }
        cfg.analysis.window_ps = 50_000;
        // 1 photon per pulse against 1e6/s * 100 ns = 0.1 background
        assert!((background_rho(&cfg) - 1.0 / 1.1).abs() < 1e-12);
    }

    #[test]
    fn counterpart_flips_scheme() {
        let cfg = preset("fig3").unwrap();
        let o = counterpart(&cfg).unwrap();
        assert_eq!(o.channel.scheme, Scheme::StandardHbt);
        assert_ne!(o.excitation.seed, cfg.excitation.seed);
        assert_eq!(o.correlator.electrical_delay_ps, 1_500_000);
    }
}
