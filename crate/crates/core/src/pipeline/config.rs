//! Plain-text pipeline configuration.
//!
//! One `key = value` per line, keys grouped by dotted section prefixes,
//! `#` starts a comment. Durations take a unit suffix (`ps`, `ns`, `us`,
//! `ms`, `s`; bare numbers are ps), rates take `Hz`, `kHz`, `MHz` or `GHz`
//! (bare numbers are Hz).

use std::collections::BTreeMap;
use std::path::Path;

use crate::correlator::{Envelope, Estimator};
use crate::detector::DetectorModel;
use crate::emission::{EmitterModel, ExcitationConfig, ExcitationMode, DEFAULT_PULSE_WIDTH_PS};
use crate::error::{Error, Result};
use crate::optics::{ChannelConfig, Scheme};

const KEYS: &[&str] = &[
    "run.name",
    "source.kind",
    "source.laser_rate",
    "emitter.lifetime",
    "emitter.pair_prob",
    "emitter.g2_zero",
    "emitter.excitation_prob",
    "emitter.pump_rate",
    "emitter.background_rate",
    "excitation.mode",
    "excitation.rep_rate",
    "excitation.pulses",
    "excitation.duration",
    "excitation.seed",
    "excitation.pulse_width",
    "scheme.kind",
    "scheme.t_ratio",
    "scheme.delay",
    "detector.efficiency",
    "detector.dead_time",
    "detector.afterpulse_prob",
    "detector.afterpulse_tau",
    "detector.jitter",
    "correlator.estimator",
    "correlator.bin_width",
    "correlator.span",
    "correlator.electrical_delay",
    "compare.estimator",
    "compare.span",
    "compare.electrical_delay",
    "analysis.window",
    "analysis.blind",
    "analysis.side_orders",
    "analysis.plateau",
    "analysis.envelope",
    "analysis.dip_half_width",
    "analysis.background_correct",
    "analysis.lifetimes_margin",
    "analysis.period_divisor",
];

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Emitter(EmitterModel),
    /// Attenuated laser: Poisson photons at `rate_hz`.
    Laser {
        rate_hz: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorConfig {
    pub estimator: Estimator,
    pub bin_width_ps: u64,
    pub span_ps: u64,
    /// Start-stop only.
    pub electrical_delay_ps: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisConfig {
    /// Half-width of each pulsed peak window.
    pub window_ps: u64,
    /// `|tau|` below this is treated as detector artifacts.
    pub blind_ps: u64,
    pub side_orders: u32,
    /// C.w. baseline windows on the delay axis; empty selects every bin
    /// clear of the dip features and the blind region.
    pub plateau: Vec<(i64, i64)>,
    pub envelope: Option<Envelope>,
    pub dip_half_width_ps: u64,
    pub background_correct: bool,
    pub lifetimes_margin: f64,
    pub period_divisor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub name: String,
    pub source: Source,
    pub excitation: ExcitationConfig,
    pub channel: ChannelConfig,
    pub detector: DetectorModel,
    pub correlator: CorrelatorConfig,
    /// Correlator settings for the other scheme in a comparison run.
    pub compare: CompareOverrides,
    /// Optical delay for the single-detector counterpart of a two-detector
    /// configuration.
    pub compare_delay_ps: Option<u64>,
    pub analysis: AnalysisConfig,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CompareOverrides {
    pub estimator: Option<Estimator>,
    pub span_ps: Option<u64>,
    pub electrical_delay_ps: Option<u64>,
}

impl PipelineConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Raw::parse(text)?.build()
    }

    pub fn lifetime_ps(&self) -> f64 {
        match &self.source {
            Source::Emitter(m) => m.lifetime_ps,
            Source::Laser { .. } => 0.0,
        }
    }

    pub fn background_rate_hz(&self) -> f64 {
        match &self.source {
            Source::Emitter(m) => m.background_rate_hz,
            Source::Laser { .. } => 0.0,
        }
    }

    pub fn is_pulsed(&self) -> bool {
        self.excitation.mode == ExcitationMode::Pulsed
    }
}

pub fn default_estimator(scheme: Scheme, mode: ExcitationMode) -> Estimator {
    match (scheme, mode) {
        (Scheme::StandardHbt, _) => Estimator::StartStop,
        (Scheme::SingleDetectorDelay, ExcitationMode::Pulsed) => Estimator::AdjacentInterval,
        (Scheme::SingleDetectorDelay, ExcitationMode::Cw) => Estimator::AllPairs,
    }
}

pub fn default_envelope(estimator: Estimator) -> Envelope {
    match estimator {
        Estimator::StartStop | Estimator::AdjacentInterval => Envelope::Exponential,
        _ => Envelope::Flat,
    }
}

/// Whether `estimator` reads the stream(s) that `scheme` produces.
pub fn estimator_fits(scheme: Scheme, estimator: Estimator) -> bool {
    match scheme {
        Scheme::StandardHbt => matches!(estimator, Estimator::StartStop | Estimator::CrossPairs),
        Scheme::SingleDetectorDelay => matches!(estimator, Estimator::AdjacentInterval | Estimator::AllPairs),
    }
}

pub fn parse_duration_ps(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, scale) = [("ps", 1.0), ("ns", 1e3), ("us", 1e6), ("ms", 1e9), ("s", 1e12)]
        .iter()
        .find_map(|&(u, k)| s.strip_suffix(u).map(|n| (n, k)))
        .unwrap_or((s, 1.0));
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a duration (e.g. 22ns, 1.5us)"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("`{s}` is not a non-negative duration"));
    }
    Ok(v * scale)
}

pub fn parse_rate_hz(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    let (num, scale) = [("GHz", 1e9), ("MHz", 1e6), ("kHz", 1e3), ("Hz", 1.0)]
        .iter()
        .find_map(|&(u, k)| s.strip_suffix(u).map(|n| (n, k)))
        .unwrap_or((s, 1.0));
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a rate (e.g. 1MHz, 20kHz)"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("`{s}` is not a non-negative rate"));
    }
    Ok(v * scale)
}

fn parse_estimator(s: &str) -> std::result::Result<Estimator, String> {
    match s {
        "start_stop" => Ok(Estimator::StartStop),
        "cross_pairs" => Ok(Estimator::CrossPairs),
        "adjacent" => Ok(Estimator::AdjacentInterval),
        "all_pairs" => Ok(Estimator::AllPairs),
        _ => Err(format!(
            "unknown estimator `{s}` (start_stop, cross_pairs, adjacent, all_pairs)"
        )),
    }
}

pub fn estimator_name(e: Estimator) -> &'static str {
    match e {
        Estimator::StartStop => "start_stop",
        Estimator::CrossPairs => "cross_pairs",
        Estimator::AdjacentInterval => "adjacent",
        Estimator::AllPairs => "all_pairs",
        Estimator::Composed => "composed",
    }
}

struct Raw {
    entries: BTreeMap<&'static str, (usize, String)>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: n,
                message: format!("expected `key = value`, found `{line}`"),
            })?;
            let k = k.trim();
            let key = KEYS.iter().find(|&&known| known == k).ok_or_else(|| Error::Parse {
                line: n,
                message: format!("unknown key `{k}`"),
            })?;
            if let Some((first, _)) = entries.insert(*key, (n, v.trim().to_string())) {
                return Err(Error::Parse {
                    line: n,
                    message: format!("duplicate key `{k}` (first set on line {first})"),
                });
            }
        }
        Ok(Self { entries })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn get<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => f(v).map(Some).map_err(|m| Error::Parse {
                line: *line,
                message: format!("`{key}`: {m}"),
            }),
        }
    }

    fn require<T>(&self, key: &str, f: impl FnOnce(&str) -> std::result::Result<T, String>) -> Result<T> {
        self.get(key, f)?
            .ok_or_else(|| Error::Config(format!("missing required key `{key}`")))
    }

    fn check<T>(&self, key: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| match self.entries.get(key) {
            Some((line, _)) => Error::Parse {
                line: *line,
                message: e.to_string(),
            },
            None => e,
        })
    }

    fn build(&self) -> Result<PipelineConfig> {
        let dur = |s: &str| parse_duration_ps(s);
        let dur_int = |s: &str| parse_duration_ps(s).map(|v| v.round() as u64);
        let rate = |s: &str| parse_rate_hz(s);
        let prob = |s: &str| -> std::result::Result<f64, String> {
            let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("{v} is outside [0, 1]"))
            }
        };
        let positive = |s: &str| -> std::result::Result<f64, String> {
            match s.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
                _ => Err(format!("`{s}` is not a positive number")),
            }
        };
        let count = |s: &str| -> std::result::Result<u64, String> {
            if let Ok(v) = s.parse::<u64>() {
                return Ok(v);
            }
            match s.parse::<f64>() {
                Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
                _ => Err(format!("`{s}` is not a non-negative integer")),
            }
        };
        let flag = |s: &str| match s {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(format!("`{s}` is not a boolean")),
        };

        let name = self
            .get("run.name", |s| Ok(s.to_string()))?
            .unwrap_or_else(|| "run".into());

        let mode = self.require("excitation.mode", |s| match s {
            "pulsed" => Ok(ExcitationMode::Pulsed),
            "cw" => Ok(ExcitationMode::Cw),
            _ => Err(format!("`{s}` is not `pulsed` or `cw`")),
        })?;
        let seed = self.get("excitation.seed", count)?.unwrap_or(1);
        let rep_rate = match mode {
            ExcitationMode::Pulsed => self.require("excitation.rep_rate", rate)?,
            ExcitationMode::Cw => 0.0,
        };
        if rep_rate == 0.0 && mode == ExcitationMode::Pulsed {
            return self.check("excitation.rep_rate", Err(Error::param("rep_rate", "must be positive")));
        }
        let duration_ps = match (self.has("excitation.pulses"), self.has("excitation.duration")) {
            (true, true) => {
                return self.check(
                    "excitation.duration",
                    Err(Error::Config(
                        "set either `excitation.pulses` or `excitation.duration`".into(),
                    )),
                )
            }
            (true, false) => {
                if mode != ExcitationMode::Pulsed {
                    return self.check(
                        "excitation.pulses",
                        Err(Error::Config("`excitation.pulses` needs pulsed excitation".into())),
                    );
                }
                let pulses = self.require("excitation.pulses", count)?;
                (1e12 / rep_rate).round() as u64 * pulses
            }
            (false, _) => self.require("excitation.duration", dur_int)?,
        };
        let excitation = ExcitationConfig {
            mode,
            rep_rate_hz: rep_rate,
            duration_ps,
            seed,
            pulse_width_ps: self
                .get("excitation.pulse_width", dur)?
                .unwrap_or(DEFAULT_PULSE_WIDTH_PS),
        };
        self.check("excitation.mode", excitation.validate())?;

        let kind = self
            .get("source.kind", |s| match s {
                "emitter" | "laser" => Ok(s.to_string()),
                _ => Err(format!("`{s}` is not `emitter` or `laser`")),
            })?
            .unwrap_or_else(|| "emitter".into());
        let source = if kind == "laser" {
            for k in KEYS.iter().filter(|k| k.starts_with("emitter.")) {
                if self.has(k) {
                    return self.check(k, Err(Error::Config(format!("`{k}` does not apply to a laser source"))));
                }
            }
            Source::Laser {
                rate_hz: self.require("source.laser_rate", rate)?,
            }
        } else {
            if self.has("source.laser_rate") {
                return self.check(
                    "source.laser_rate",
                    Err(Error::Config("`source.laser_rate` needs `source.kind = laser`".into())),
                );
            }
            let mut m = EmitterModel::ideal(self.require("emitter.lifetime", dur)?);
            m.excitation_prob = self.get("emitter.excitation_prob", prob)?.unwrap_or(1.0);
            m.pump_rate_hz = self.get("emitter.pump_rate", rate)?.unwrap_or(0.0);
            m.background_rate_hz = self.get("emitter.background_rate", rate)?.unwrap_or(0.0);
            m.pair_prob = match (
                self.get("emitter.pair_prob", prob)?,
                self.get("emitter.g2_zero", |s| s.parse::<f64>().map_err(|e| e.to_string()))?,
            ) {
                (Some(_), Some(_)) => {
                    return self.check(
                        "emitter.g2_zero",
                        Err(Error::Config(
                            "set either `emitter.pair_prob` or `emitter.g2_zero`".into(),
                        )),
                    )
                }
                (Some(q), None) => q,
                (None, Some(g)) => {
                    self.check("emitter.g2_zero", EmitterModel::pair_prob_for_g2(g, m.excitation_prob))?
                }
                (None, None) => 0.0,
            };
            if mode == ExcitationMode::Cw && m.pump_rate_hz == 0.0 {
                return Err(Error::Config("c.w. excitation needs `emitter.pump_rate`".into()));
            }
            self.check("emitter.lifetime", m.validate())?;
            Source::Emitter(m)
        };

        let scheme = self.require("scheme.kind", |s| match s {
            "single" => Ok(Scheme::SingleDetectorDelay),
            "hbt" => Ok(Scheme::StandardHbt),
            _ => Err(format!("`{s}` is not `single` or `hbt`")),
        })?;
        let t_ratio = self.get("scheme.t_ratio", prob)?.unwrap_or(0.5);
        let channel = match scheme {
            Scheme::SingleDetectorDelay => {
                ChannelConfig::single_detector(t_ratio, self.require("scheme.delay", dur_int)?)
            }
            Scheme::StandardHbt => ChannelConfig::hbt(t_ratio),
        };
        // A two-detector run ignores the delay; a comparison uses it.
        let compare_delay_ps = match scheme {
            Scheme::StandardHbt => self.get("scheme.delay", dur_int)?,
            Scheme::SingleDetectorDelay => None,
        };

        let base = DetectorModel::default();
        let detector = DetectorModel {
            efficiency: self.get("detector.efficiency", prob)?.unwrap_or(base.efficiency),
            dead_time_ps: self.get("detector.dead_time", dur_int)?.unwrap_or(base.dead_time_ps),
            afterpulse_prob: self
                .get("detector.afterpulse_prob", prob)?
                .unwrap_or(base.afterpulse_prob),
            afterpulse_tau_ps: self
                .get("detector.afterpulse_tau", dur)?
                .unwrap_or(base.afterpulse_tau_ps),
            jitter_sigma_ps: self.get("detector.jitter", dur)?.unwrap_or(base.jitter_sigma_ps),
        };
        self.check("detector.afterpulse_prob", detector.validate())?;

        let estimator = self
            .get("correlator.estimator", parse_estimator)?
            .unwrap_or_else(|| default_estimator(scheme, mode));
        if !estimator_fits(scheme, estimator) {
            return self.check(
                "correlator.estimator",
                Err(Error::Config(format!(
                    "estimator `{}` does not apply to the {} scheme",
                    estimator_name(estimator),
                    if scheme == Scheme::StandardHbt { "hbt" } else { "single" }
                ))),
            );
        }
        let bin_width_ps = self.get("correlator.bin_width", dur_int)?.unwrap_or(1000);
        let span_ps = self.require("correlator.span", dur_int)?;
        let electrical_delay_ps = self.get("correlator.electrical_delay", dur_int)?.unwrap_or(0);
        if scheme == Scheme::SingleDetectorDelay && electrical_delay_ps != 0 {
            return self.check(
                "correlator.electrical_delay",
                Err(Error::Config(
                    "the single-detector scheme has no stop channel to delay".into(),
                )),
            );
        }
        if bin_width_ps == 0 || span_ps % bin_width_ps != 0 || electrical_delay_ps % bin_width_ps != 0 {
            return self.check(
                "correlator.span",
                Err(Error::Config(
                    "span and electrical delay must be whole multiples of the bin width".into(),
                )),
            );
        }
        if electrical_delay_ps >= span_ps {
            return self.check(
                "correlator.electrical_delay",
                Err(Error::Config("electrical delay must be shorter than the span".into())),
            );
        }
        let correlator = CorrelatorConfig {
            estimator,
            bin_width_ps,
            span_ps,
            electrical_delay_ps,
        };
        let compare = CompareOverrides {
            estimator: self.get("compare.estimator", parse_estimator)?,
            span_ps: self.get("compare.span", dur_int)?,
            electrical_delay_ps: self.get("compare.electrical_delay", dur_int)?,
        };

        let lifetime = match &source {
            Source::Emitter(m) => m.lifetime_ps,
            Source::Laser { .. } => 0.0,
        };
        let dip_default = match &source {
            // Recovery time of the c.w. dip is 1 / (P + G).
            Source::Emitter(m) if mode == ExcitationMode::Cw => 8.0 / (m.pump_rate_hz * 1e-12 + 1.0 / m.lifetime_ps),
            Source::Emitter(m) => 8.0 * m.lifetime_ps,
            Source::Laser { .. } => 50_000.0,
        };
        let blind_default = detector.dead_time_ps
            + if detector.afterpulse_prob > 0.0 {
                (4.0 * detector.afterpulse_tau_ps) as u64
            } else {
                0
            };
        let plateau = self
            .get("analysis.plateau", |s| {
                s.split(',')
                    .map(|r| {
                        let (a, b) = r
                            .split_once("..")
                            .ok_or_else(|| format!("`{r}` is not a range like `1000ns..2000ns`"))?;
                        let signed = |x: &str| -> std::result::Result<i64, String> {
                            let x = x.trim();
                            match x.strip_prefix('-') {
                                Some(rest) => parse_duration_ps(rest).map(|v| -(v.round() as i64)),
                                None => parse_duration_ps(x).map(|v| v.round() as i64),
                            }
                        };
                        Ok((signed(a)?, signed(b)?))
                    })
                    .collect::<std::result::Result<Vec<_>, String>>()
            })?
            .unwrap_or_default();
        let analysis = AnalysisConfig {
            window_ps: self.get("analysis.window", dur_int)?.unwrap_or(if lifetime > 0.0 {
                (4.0 * lifetime) as u64
            } else {
                10_000
            }),
            blind_ps: self.get("analysis.blind", dur_int)?.unwrap_or(blind_default),
            side_orders: self
                .get("analysis.side_orders", |s| {
                    s.parse::<u32>()
                        .ok()
                        .filter(|&v| v >= 1)
                        .ok_or_else(|| format!("`{s}` is not a positive integer"))
                })?
                .unwrap_or(1),
            plateau,
            envelope: self.get("analysis.envelope", |s| match s {
                "flat" => Ok(Envelope::Flat),
                "exponential" => Ok(Envelope::Exponential),
                _ => Err(format!("`{s}` is not `flat` or `exponential`")),
            })?,
            dip_half_width_ps: self
                .get("analysis.dip_half_width", dur_int)?
                .unwrap_or(dip_default.round() as u64),
            background_correct: self
                .get("analysis.background_correct", flag)?
                .unwrap_or(matches!(&source, Source::Emitter(m) if m.background_rate_hz > 0.0)),
            lifetimes_margin: self.get("analysis.lifetimes_margin", positive)?.unwrap_or(3.0),
            period_divisor: self.get("analysis.period_divisor", positive)?.unwrap_or(2.0),
        };

        Ok(PipelineConfig {
            name,
            source,
            excitation,
            channel,
            detector,
            correlator,
            compare,
            compare_delay_ps,
            analysis,
        })
    }
}
