//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use photocorr::analysis::{compare_curves, compose_mixing, g2_cw_from_dip, PeakLabel};
use photocorr::correlator::{
    adjacent_interval_histogram_chunked, all_pairs_correlation_chunked, cross_pairs_histogram, normalize,
    CorrelationHistogram, Envelope, NormContext, TacConfig,
};
use photocorr::detector::{afterpulse_artifact_profile, detect, DetectorModel};
use photocorr::emission::{simulate_emitter, simulate_poisson_source, EmitterModel, ExcitationConfig};
use photocorr::io::{read_histogram_csv, read_stream, write_stream_text, TimestampFileHeader};
use photocorr::optics::{split_delay_merge, split_two_arms, ChannelConfig};
use photocorr::pipeline::{compare_schemes, preset, run, run_pipeline};
use photocorr::{Error, TimestampStream};

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;
type Criterion = (u32, &'static str, fn() -> Outcome);

const NS: u64 = 1000;

fn threads() -> usize {
    rayon::current_num_threads()
}

fn true_g2_scheme_equivalence() -> Outcome {
    let cfg = preset("fig3")?;
    let t0 = Instant::now();
    let c = compare_schemes(&cfg, true)?;
    let secs = t0.elapsed().as_secs_f64();
    let s = c.single.result.as_ref().ok_or("single scheme gave no g2")?;
    let h = c.hbt.result.as_ref().ok_or("hbt scheme gave no g2")?;
    let truth = 0.05;
    let joint = (s.sigma.powi(2) + h.sigma.powi(2)).sqrt();
    let pass = (s.g2_zero - truth).abs() <= 0.01
        && (h.g2_zero - truth).abs() <= 0.01
        && (s.g2_zero - h.g2_zero).abs() <= 3.0 * joint
        && secs < 60.0;
    Ok((
        pass,
        format!(
            "delay scheme {:.4} +/- {:.4}, two-detector {:.4} +/- {:.4}, |diff| = {:.2} sigma, {secs:.1} s",
            s.g2_zero,
            s.sigma,
            h.g2_zero,
            h.sigma,
            (s.g2_zero - h.g2_zero).abs() / joint
        ),
    ))
}

fn cw_floor_and_inversion() -> Outcome {
    let out = run(&preset("fig2c")?, true)?;
    let dip = out.dip.as_ref().ok_or("no dip fit")?;
    let detected = out.detected_photons();
    let inverted = g2_cw_from_dip(0.764, 0.5)?.g2_zero;
    let pass = (dip.dip - 0.75).abs() <= 0.02 && detected >= 1_000_000 && (inverted - 0.056).abs() < 1e-12;
    Ok((
        pass,
        format!(
            "dip at delay {:.4} +/- {:.4} on {detected} detections; inversion of 0.764 -> {inverted:.6}",
            dip.dip, dip.sigma
        ),
    ))
}

fn triplet_ratio() -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for t in [0.5, 0.7] {
        let mut cfg = preset("fig2b")?;
        cfg.channel.t_ratio = t;
        cfg.detector.efficiency = 0.3;
        let out = run(&cfg, true)?;
        let fr = out.peaks.as_ref().ok_or("no peaks")?.triplet_fractions()?;
        let r = 1.0 - t;
        let want = [r * t, r * r + t * t, r * t];
        let worst = fr
            .iter()
            .zip(&want)
            .map(|(f, w)| (f / w - 1.0).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.05;
        detail.push(format!(
            "T={t}: {:.3}:{:.3}:{:.3} (expected {:.2}:{:.2}:{:.2}, worst {:.1}%)",
            fr[0],
            fr[1],
            fr[2],
            want[0],
            want[1],
            want[2],
            worst * 100.0
        ));
    }
    Ok((pass, detail.join("; ")))
}

/// Poisson-normalized two-detector curve and single-detector curve of the
/// same kind of source on independent seeds; the first is composed with
/// the mixing weights and compared bin by bin.
struct MixingCase {
    label: &'static str,
    model: EmitterModel,
    excitation: ExcitationConfig,
    delay_ps: u64,
    bin_width_ps: u64,
    electrical_delay_ps: u64,
    span_ps: u64,
    seed: u64,
}

fn mixing_case(c: &MixingCase) -> Result<(bool, String), Box<dyn std::error::Error>> {
    let detector = DetectorModel {
        efficiency: 0.3,
        dead_time_ps: 0,
        afterpulse_prob: 0.0,
        afterpulse_tau_ps: 25_000.0,
        jitter_sigma_ps: 350.0,
    };
    let t = 0.5;

    let emitted = simulate_emitter(&c.model, &c.excitation.clone().with_seed(c.seed))?;
    let merged = split_delay_merge(&emitted, &ChannelConfig::single_detector(t, c.delay_ps), c.seed)?;
    let single = detect(&merged, &detector, c.seed)?;
    let single_span = c.span_ps - c.electrical_delay_ps - c.delay_ps;
    let g_single = normalize(
        &all_pairs_correlation_chunked(&single, c.bin_width_ps, single_span, threads())?,
        &NormContext::Poisson,
    )?;

    let seed = c.seed + 100;
    let emitted = simulate_emitter(&c.model, &c.excitation.clone().with_seed(seed))?;
    let (a, b) = split_two_arms(&emitted, &ChannelConfig::hbt(t), seed)?;
    let (a, b) = (detect(&a, &detector, seed)?, detect(&b, &detector, seed + 1)?);
    let tac = TacConfig {
        electrical_delay_ps: c.electrical_delay_ps,
        bin_width_ps: c.bin_width_ps,
        span_ps: c.span_ps,
    };
    let g_std = normalize(
        &cross_pairs_histogram(&a, &b, &tac)?.into_delay_axis(c.electrical_delay_ps),
        &NormContext::Poisson,
    )?;

    let composed = compose_mixing(&g_std, t, c.delay_ps)?;
    let cmp = compare_curves(&composed, &g_single)?;
    Ok((
        cmp.within_3sigma(),
        format!(
            "{}: {} bins, max |z| {:.2} at {:.0} ns, chi2/bin {:.2}",
            c.label,
            cmp.bins,
            cmp.max_abs_z,
            cmp.worst_center_ps / 1e3,
            cmp.chi2_per_bin
        ),
    ))
}

fn mixing_relation() -> Outcome {
    let pulsed = MixingCase {
        label: "pulsed",
        model: EmitterModel {
            pair_prob: EmitterModel::pair_prob_for_g2(0.1, 1.0)?,
            ..EmitterModel::ideal(10_000.0)
        },
        excitation: ExcitationConfig::pulse_train(1e6, 2_000_000, 0),
        delay_ps: 300 * NS,
        bin_width_ps: 100 * NS,
        electrical_delay_ps: 1000 * NS,
        span_ps: 4000 * NS,
        seed: 71,
    };
    let cw = MixingCase {
        label: "c.w.",
        model: EmitterModel {
            pump_rate_hz: 10e6,
            ..EmitterModel::ideal(10_000.0)
        },
        excitation: ExcitationConfig::cw(1_200_000_000_000, 0),
        delay_ps: 300 * NS,
        bin_width_ps: 30 * NS,
        electrical_delay_ps: 600 * NS,
        span_ps: 1800 * NS,
        seed: 72,
    };
    let (p_ok, p) = mixing_case(&pulsed)?;
    let (c_ok, c) = mixing_case(&cw)?;
    Ok((p_ok && c_ok, format!("{p}; {c}")))
}

fn interval_counts(s: &TimestampStream, lo_ps: u64, hi_ps: u64) -> u64 {
    s.times()
        .windows(2)
        .filter(|w| (lo_ps..hi_ps).contains(&(w[1] - w[0])))
        .count() as u64
}

fn detector_artifacts() -> Outcome {
    let dead = 22 * NS;
    let mut below = 0;
    for name in ["fig3", "fig4c"] {
        let out = run(&preset(name)?, false)?;
        for (_, s) in &out.streams {
            let profile = afterpulse_artifact_profile(s, 100 * NS, NS)?;
            below += profile.counts()[..22].iter().sum::<u64>();
        }
    }

    let exc = ExcitationConfig::cw(50_000_000_000_000, 51);
    let light = simulate_poisson_source(20e3, &exc)?;
    let model = |ap: f64| DetectorModel {
        efficiency: 1.0,
        dead_time_ps: dead,
        afterpulse_prob: ap,
        afterpulse_tau_ps: 25_000.0,
        jitter_sigma_ps: 350.0,
    };
    let with = interval_counts(&detect(&light, &model(0.01), 51)?, dead, 100 * NS);
    let base = interval_counts(&detect(&light, &model(0.0), 51)?, dead, 100 * NS);
    let ratio = with as f64 / base.max(1) as f64;
    Ok((
        below == 0 && ratio > 1.5,
        format!(
            "{below} intervals below 22 ns; 22-100 ns counts {with} vs {base} without after-pulsing, ratio {ratio:.2}"
        ),
    ))
}

fn estimator_validity() -> Outcome {
    let rate = 1e6;
    let s = simulate_poisson_source(rate, &ExcitationConfig::cw(1_000_000_000_000, 61))?;
    let inv_rate = (1e12 / rate) as u64;

    let fine = inv_rate / 100;
    let span = 5 * inv_rate;
    let adj = normalize(
        &adjacent_interval_histogram_chunked(&s, fine, span, threads())?,
        &NormContext::Cw {
            plateau: vec![(0, span as i64)],
            features: vec![],
            feature_halfwidth_ps: 0,
            envelope: Envelope::Exponential,
        },
    )?;
    let ap = normalize(
        &all_pairs_correlation_chunked(&s, fine, span, threads())?,
        &NormContext::Poisson,
    )?;
    let short = (inv_rate / 20 / fine) as usize;
    let (va, vp) = (adj.values().unwrap(), ap.values().unwrap());
    let worst_pair = (0..short).map(|i| (va[i] / vp[i] - 1.0).abs()).fold(0.0, f64::max);

    let coarse: CorrelationHistogram = normalize(
        &all_pairs_correlation_chunked(&s, inv_rate / 20, span, threads())?,
        &NormContext::Poisson,
    )?;
    let worst_flat = coarse
        .values()
        .unwrap()
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((
        worst_pair <= 0.02 && worst_flat <= 0.02,
        format!(
            "{} events; adjacent vs all-pairs worst {:.2}% over {short} bins below 0.05/r; all-pairs worst |g2-1| {:.4} over {} bins",
            s.len(),
            worst_pair * 100.0,
            worst_flat,
            coarse.n_bins()
        ),
    ))
}

fn rate_law() -> Outcome {
    let dead = 22 * NS;
    let mut pass = true;
    let mut detail = Vec::new();
    for (i, x) in [0.01, 0.1, 0.5].into_iter().enumerate() {
        let r = x / (dead as f64 * 1e-12);
        let duration_s = 4e6 / r;
        let exc = ExcitationConfig::cw((duration_s * 1e12) as u64, 81 + i as u64);
        let light = simulate_poisson_source(r, &exc)?;
        let model = DetectorModel {
            efficiency: 1.0,
            dead_time_ps: dead,
            afterpulse_prob: 0.0,
            afterpulse_tau_ps: 25_000.0,
            jitter_sigma_ps: 0.0,
        };
        let out = detect(&light, &model, 81 + i as u64)?;
        let measured = out.len() as f64 / duration_s;
        let expected = r / (1.0 + x);
        let dev = measured / expected - 1.0;
        pass &= dev.abs() <= 0.01;
        detail.push(format!("r*t_d={x}: {:+.3}%", dev * 100.0));
    }
    Ok((pass, detail.join(", ")))
}

fn laser_controls() -> Outcome {
    let out = run(&preset("fig3d")?, false)?;
    let p = out.peaks.as_ref().ok_or("no peaks")?;
    let ratio = p.require(PeakLabel::Delay0)?.area / p.require(PeakLabel::Triplet1L)?.area;

    let out = run(&preset("fig4c")?, false)?;
    let g = &out.g2;
    let vals = g.values().ok_or("not normalized")?;
    let tail: Vec<f64> = (0..g.n_bins())
        .filter(|&i| g.bin_start_ps(i) >= 100_000)
        .map(|i| vals[i])
        .collect();
    let worst = tail.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    Ok((
        (ratio - 1.0).abs() <= 0.05 && worst <= 0.02 && !tail.is_empty(),
        format!(
            "pulsed laser A(delay)/A(1L) = {ratio:.4}; c.w. laser worst |g2-1| beyond 100 ns = {worst:.4} over {} bins",
            tail.len()
        ),
    ))
}

fn determinism_and_formats() -> Outcome {
    let cfg = preset("fig2b")?;
    let (a, b) = (tempfile::tempdir()?, tempfile::tempdir()?);
    let out = run_pipeline(&cfg, a.path(), false)?;
    run_pipeline(&cfg, b.path(), false)?;
    let mut identical = true;
    for f in ["detections.phst", "histogram.csv", "report.txt"] {
        identical &= fs::read(a.path().join(f))? == fs::read(b.path().join(f))?;
    }

    let stream = &out.streams[0].1;
    let txt = a.path().join("detections.txt");
    write_stream_text(&txt, stream)?;
    let round_trip =
        read_stream(a.path().join("detections.phst"))? == *stream && read_stream(&txt)?.times() == stream.times();
    let table = read_histogram_csv(a.path().join("histogram.csv"))?;
    let vals = out.g2.values().ok_or("not normalized")?;
    let csv_ok = table.rows.len() == out.g2.n_bins()
        && table.rows.iter().zip(out.g2.counts()).all(|(r, &c)| r.counts == c)
        && table
            .rows
            .iter()
            .zip(vals)
            .all(|(r, &v)| r.g2.is_some_and(|g| (g - v).abs() <= 5e-7));

    let dir = tempfile::tempdir()?;
    let try_bytes = |bytes: &[u8]| -> photocorr::Result<TimestampStream> {
        let p = dir.path().join("bad.phst");
        fs::write(&p, bytes).map_err(Error::from)?;
        read_stream(&p)
    };
    let file = |count: u64, ts: &[u64]| {
        let mut v = TimestampFileHeader {
            resolution_ps: 1,
            count,
            duration_ps: 1000,
        }
        .to_bytes()
        .to_vec();
        ts.iter().for_each(|t| v.extend_from_slice(&t.to_le_bytes()));
        v
    };
    let mut bad_magic = file(1, &[1]);
    bad_magic[..4].copy_from_slice(b"JUNK");
    let mut trailing = file(1, &[1]);
    trailing.push(0);
    let rejected = [
        matches!(try_bytes(&bad_magic), Err(Error::BadMagic { .. })),
        matches!(try_bytes(&file(1, &[1])[..16]), Err(Error::TruncatedHeader { .. })),
        matches!(try_bytes(&file(3, &[1, 2])), Err(Error::Truncated { .. })),
        matches!(try_bytes(&trailing), Err(Error::TrailingBytes { .. })),
        matches!(
            try_bytes(&file(3, &[1, 5, 4])),
            Err(Error::NonMonotonic { index: 2, .. })
        ),
    ];
    let n_rejected = rejected.iter().filter(|&&r| r).count();
    Ok((
        identical && round_trip && csv_ok && n_rejected == rejected.len(),
        format!(
            "byte-identical reruns: {identical}; stream round trip: {round_trip}; CSV round trip: {csv_ok}; malformed files rejected: {n_rejected}/{}",
            rejected.len()
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        (1, "scheme equivalence, pulsed", true_g2_scheme_equivalence),
        (2, "c.w. floor and inversion", cw_floor_and_inversion),
        (3, "triplet ratio", triplet_ratio),
        (4, "mixing relation", mixing_relation),
        (5, "dead-time and after-pulse artifacts", detector_artifacts),
        (6, "estimator validity on Poisson light", estimator_validity),
        (7, "dead-time rate law", rate_law),
        (8, "laser controls", laser_controls),
        (9, "determinism and file formats", determinism_and_formats),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        let t0 = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {n} ({name}): {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
