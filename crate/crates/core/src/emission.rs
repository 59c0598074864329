//! Ground-truth photon sources: a non-ideal two-level emitter under pulsed
//! or continuous-wave pumping, plus Poissonian background and laser light.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};

use crate::error::{Error, Result};
use crate::rng::{rng_for, salt, to_ps};
use crate::stream::{merge_sorted, Origin, TimestampStream};

/// Emitter lifetimes must fit this many times into one pulse period.
pub const LIFETIME_GUARD: f64 = 3.0;

/// Default Gaussian smear of the excitation pulse, in ps.
pub const DEFAULT_PULSE_WIDTH_PS: f64 = 50.0;

#[derive(Clone, Debug, PartialEq)]
pub struct EmitterModel {
    /// Excited-state lifetime.
    pub lifetime_ps: f64,
    /// Probability that a decay is followed by a second, cascade photon.
    pub pair_prob: f64,
    /// Per-pulse excitation probability (pulsed mode).
    pub excitation_prob: f64,
    /// Ground to excited pumping rate (c.w. mode).
    pub pump_rate_hz: f64,
    /// Uncorrelated background added by [`simulate_emitter`].
    pub background_rate_hz: f64,
}

impl EmitterModel {
    pub fn ideal(lifetime_ps: f64) -> Self {
        Self {
            lifetime_ps,
            pair_prob: 0.0,
            excitation_prob: 1.0,
            pump_rate_hz: 0.0,
            background_rate_hz: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lifetime_ps > 0.0 && self.lifetime_ps.is_finite()) {
            return Err(Error::param("lifetime", "must be positive"));
        }
        check_prob("pair_prob", self.pair_prob)?;
        check_prob("excitation_prob", self.excitation_prob)?;
        check_rate("pump_rate", self.pump_rate_hz)?;
        check_rate("background_rate", self.background_rate_hz)?;
        Ok(())
    }

    /// Decay rate of the excited state in 1/ps.
    pub fn decay_rate_per_ps(&self) -> f64 {
        1.0 / self.lifetime_ps
    }

    /// Pulsed g2(0) implied by the per-cycle photon-number distribution
    /// (0, 1 or 2 photons): `2 q / (p (1 + q)^2)`.
    pub fn pulsed_g2_zero(&self) -> f64 {
        let p = self.excitation_prob;
        let q = self.pair_prob;
        if p == 0.0 {
            return 0.0;
        }
        2.0 * q / (p * (1.0 + q) * (1.0 + q))
    }

    /// Cascade probability that yields the requested pulsed g2(0).
    pub fn pair_prob_for_g2(g2_zero: f64, excitation_prob: f64) -> Result<f64> {
        check_prob("excitation_prob", excitation_prob)?;
        if excitation_prob == 0.0 {
            return Err(Error::param("excitation_prob", "must be positive"));
        }
        // g p (1 + q)^2 = 2 q  ->  a q^2 + (2a - 2) q + a = 0 with a = g p
        let a = g2_zero * excitation_prob;
        if a < 0.0 {
            return Err(Error::param("g2_zero", "must be non-negative"));
        }
        if a == 0.0 {
            return Ok(0.0);
        }
        let b = 2.0 * a - 2.0;
        let disc = b * b - 4.0 * a * a;
        if disc < 0.0 {
            return Err(Error::param(
                "g2_zero",
                format!("{g2_zero} is unreachable with excitation_prob {excitation_prob}"),
            ));
        }
        let q = (-b - disc.sqrt()) / (2.0 * a);
        check_prob("pair_prob", q).map(|_| q)
    }
}

fn check_prob(name: &'static str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(name, format!("{p} is not a probability")))
    }
}

fn check_rate(name: &'static str, r: f64) -> Result<()> {
    if r >= 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{r} is not a non-negative rate")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExcitationMode {
    Pulsed,
    Cw,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationConfig {
    pub mode: ExcitationMode,
    pub rep_rate_hz: f64,
    pub duration_ps: u64,
    pub seed: u64,
    pub pulse_width_ps: f64,
}

impl ExcitationConfig {
    pub fn pulsed(rep_rate_hz: f64, duration_ps: u64, seed: u64) -> Self {
        Self {
            mode: ExcitationMode::Pulsed,
            rep_rate_hz,
            duration_ps,
            seed,
            pulse_width_ps: DEFAULT_PULSE_WIDTH_PS,
        }
    }

    /// Pulsed excitation covering exactly `pulses` periods.
    pub fn pulse_train(rep_rate_hz: f64, pulses: u64, seed: u64) -> Self {
        let period = (1e12 / rep_rate_hz).round() as u64;
        Self::pulsed(rep_rate_hz, period * pulses, seed)
    }

    pub fn cw(duration_ps: u64, seed: u64) -> Self {
        Self {
            mode: ExcitationMode::Cw,
            rep_rate_hz: 0.0,
            duration_ps,
            seed,
            pulse_width_ps: DEFAULT_PULSE_WIDTH_PS,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_ps == 0 {
            return Err(Error::param("duration", "must be positive"));
        }
        if self.mode == ExcitationMode::Pulsed && !(self.rep_rate_hz > 0.0) {
            return Err(Error::param("rep_rate", "must be positive for pulsed excitation"));
        }
        if !(self.pulse_width_ps >= 0.0) {
            return Err(Error::param("pulse_width", "must be non-negative"));
        }
        Ok(())
    }

    /// Pulse period in integer ps.
    pub fn period_ps(&self) -> u64 {
        (1e12 / self.rep_rate_hz).round() as u64
    }

    pub fn pulse_count(&self) -> u64 {
        self.duration_ps / self.period_ps()
    }

    fn pulse_smear(&self) -> Option<Normal<f64>> {
        (self.pulse_width_ps > 0.0).then(|| Normal::new(0.0, self.pulse_width_ps).unwrap())
    }
}

/// Emission stream with the excitation cycle that produced each photon.
#[derive(Clone, Debug)]
pub struct LabeledEmission {
    pub stream: TimestampStream,
    /// Cycle index per photon, aligned with `stream.times()`.
    pub cycles: Vec<u64>,
    pub pulses: u64,
}

/// Bernoulli excitation per pulse followed by an exponential decay; with
/// probability `pair_prob` a second exponential delay adds a cascade photon.
pub fn simulate_pulsed_emission(model: &EmitterModel, cfg: &ExcitationConfig) -> Result<TimestampStream> {
    simulate_pulsed_emission_labeled(model, cfg).map(|l| l.stream)
}

pub fn simulate_pulsed_emission_labeled(model: &EmitterModel, cfg: &ExcitationConfig) -> Result<LabeledEmission> {
    model.validate()?;
    cfg.validate()?;
    if cfg.mode != ExcitationMode::Pulsed {
        return Err(Error::Config("pulsed emission needs pulsed excitation".into()));
    }
    let period = cfg.period_ps();
    if model.lifetime_ps * LIFETIME_GUARD >= period as f64 {
        return Err(Error::Config(format!(
            "lifetime {} ps is not below period/{LIFETIME_GUARD} ({} ps): peaks would overlap",
            model.lifetime_ps, period
        )));
    }

    let mut rng = rng_for(cfg.seed, salt::EMISSION);
    let decay = Exp::new(model.decay_rate_per_ps()).unwrap();
    let smear = cfg.pulse_smear();
    let pulses = cfg.pulse_count();

    let mut photons: Vec<(u64, u64)> = Vec::with_capacity((pulses as f64 * model.excitation_prob * 1.1) as usize);
    for k in 0..pulses {
        if !rng.random_bool(model.excitation_prob) {
            continue;
        }
        let start = (k * period) as f64 + smear.map_or(0.0, |n| n.sample(&mut rng));
        let first = start + decay.sample(&mut rng);
        photons.push((to_ps(first), k));
        if model.pair_prob > 0.0 && rng.random_bool(model.pair_prob) {
            let second = first + decay.sample(&mut rng);
            photons.push((to_ps(second), k));
        }
    }
    photons.retain(|&(t, _)| t <= cfg.duration_ps);
    photons.sort_unstable();

    let (times, cycles) = photons.into_iter().unzip();
    Ok(LabeledEmission {
        stream: TimestampStream::from_sorted(times, Origin::Emission, cfg.duration_ps),
        cycles,
        pulses,
    })
}

/// Two-state telegraph emitter: ground -> excited at the pump rate,
/// excited -> ground at 1/lifetime with one photon per decay.
pub fn simulate_cw_emission(model: &EmitterModel, cfg: &ExcitationConfig) -> Result<TimestampStream> {
    model.validate()?;
    cfg.validate()?;
    if cfg.mode != ExcitationMode::Cw {
        return Err(Error::Config("c.w. emission needs c.w. excitation".into()));
    }
    if model.pump_rate_hz <= 0.0 {
        return Err(Error::param("pump_rate", "must be positive for c.w. excitation"));
    }

    let mut rng = rng_for(cfg.seed, salt::EMISSION);
    let pump = Exp::new(model.pump_rate_hz * 1e-12).unwrap();
    let decay = Exp::new(model.decay_rate_per_ps()).unwrap();
    let end = cfg.duration_ps as f64;

    let mut times = Vec::new();
    let mut t = 0.0;
    loop {
        t += pump.sample(&mut rng) + decay.sample(&mut rng);
        if t > end {
            break;
        }
        times.push(to_ps(t));
        if model.pair_prob > 0.0 && rng.random_bool(model.pair_prob) {
            t += decay.sample(&mut rng);
            if t > end {
                break;
            }
            times.push(to_ps(t));
        }
    }
    Ok(TimestampStream::from_sorted(times, Origin::Emission, cfg.duration_ps))
}

fn poisson_times(rate_hz: f64, duration_ps: u64, rng: &mut impl Rng) -> Vec<u64> {
    if rate_hz <= 0.0 {
        return Vec::new();
    }
    let gap = Exp::new(rate_hz * 1e-12).unwrap();
    let end = duration_ps as f64;
    let mut out = Vec::with_capacity((rate_hz * end * 1e-12 * 1.05) as usize + 16);
    let mut t = gap.sample(rng);
    while t <= end {
        out.push(to_ps(t));
        t += gap.sample(rng);
    }
    out
}

/// Merges a homogeneous Poisson background into `stream`.
pub fn add_background(stream: &TimestampStream, rate_hz: f64, cfg: &ExcitationConfig) -> Result<TimestampStream> {
    check_rate("background_rate", rate_hz)?;
    if rate_hz == 0.0 {
        return Ok(stream.clone());
    }
    let duration = cfg.duration_ps.max(stream.duration_ps());
    let mut rng = rng_for(cfg.seed, salt::BACKGROUND);
    let bg = poisson_times(rate_hz, duration, &mut rng);
    Ok(TimestampStream::from_sorted(
        merge_sorted(stream.times(), &bg),
        stream.origin(),
        duration,
    ))
}

/// Coherent light. In c.w. mode a homogeneous Poisson process; in pulsed
/// mode a Poisson number of photons per pulse (mean `rate / rep_rate`),
/// each smeared by the pulse width.
pub fn simulate_poisson_source(rate_hz: f64, cfg: &ExcitationConfig) -> Result<TimestampStream> {
    cfg.validate()?;
    if !(rate_hz > 0.0 && rate_hz.is_finite()) {
        return Err(Error::param("rate", "laser rate must be positive"));
    }
    let mut rng = rng_for(cfg.seed, salt::POISSON_SOURCE);
    let times = match cfg.mode {
        ExcitationMode::Cw => poisson_times(rate_hz, cfg.duration_ps, &mut rng),
        ExcitationMode::Pulsed => {
            let period = cfg.period_ps();
            let count = Poisson::new(rate_hz / cfg.rep_rate_hz).map_err(|e| Error::param("rate", e.to_string()))?;
            let smear = cfg.pulse_smear();
            let mut times = Vec::new();
            for k in 0..cfg.pulse_count() {
                let n = count.sample(&mut rng) as u64;
                for _ in 0..n {
                    let t = (k * period) as f64 + smear.map_or(0.0, |s| s.sample(&mut rng));
                    times.push(to_ps(t));
                }
            }
            times.retain(|&t| t <= cfg.duration_ps);
            times.sort_unstable();
            times
        }
    };
    Ok(TimestampStream::from_sorted(times, Origin::Emission, cfg.duration_ps))
}

/// Emitter photons for the configured excitation plus its background.
pub fn simulate_emitter(model: &EmitterModel, cfg: &ExcitationConfig) -> Result<TimestampStream> {
    let signal = match cfg.mode {
        ExcitationMode::Pulsed => simulate_pulsed_emission(model, cfg)?,
        ExcitationMode::Cw => simulate_cw_emission(model, cfg)?,
    };
    add_background(&signal, model.background_rate_hz, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const NS: u64 = 1000;

    #[test]
    fn zero_excitation_is_empty() {
        let mut m = EmitterModel::ideal(10_000.0);
        m.excitation_prob = 0.0;
        let s = simulate_pulsed_emission(&m, &ExcitationConfig::pulse_train(1e6, 1000, 1)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn lifetime_guard() {
        let m = EmitterModel::ideal(400_000.0);
        let err = simulate_pulsed_emission(&m, &ExcitationConfig::pulse_train(1e6, 10, 1));
        assert!(matches!(err, Err(Error::Config(_))));
        let ok = EmitterModel::ideal(300_000.0);
        assert!(simulate_pulsed_emission(&ok, &ExcitationConfig::pulse_train(1e6, 10, 1)).is_ok());
    }

    #[test]
    fn pulsed_mean_delay_matches_lifetime() {
        let mut m = EmitterModel::ideal(10_000.0);
        m.excitation_prob = 1.0;
        let mut cfg = ExcitationConfig::pulse_train(1e6, 100_000, 7);
        cfg.pulse_width_ps = 0.0;
        let l = simulate_pulsed_emission_labeled(&m, &cfg).unwrap();
        let period = cfg.period_ps();
        let n = l.stream.len() as f64;
        let mean = l
            .stream
            .times()
            .iter()
            .zip(&l.cycles)
            .map(|(&t, &k)| (t - k * period) as f64)
            .sum::<f64>()
            / n;
        // Exponential: sd = mean, so the standard error is lifetime / sqrt(n).
        let se = 10_000.0 / n.sqrt();
        assert!((mean - 10_000.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn no_pair_means_one_photon_per_cycle() {
        let m = EmitterModel::ideal(10_000.0);
        let l = simulate_pulsed_emission_labeled(&m, &ExcitationConfig::pulse_train(1e6, 20_000, 3)).unwrap();
        let mut sorted = l.cycles.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), l.cycles.len());
    }

    #[test]
    fn two_photon_cycle_fraction() {
        let mut m = EmitterModel::ideal(10_000.0);
        m.excitation_prob = 0.8;
        m.pair_prob = 0.1;
        let l = simulate_pulsed_emission_labeled(&m, &ExcitationConfig::pulse_train(1e6, 200_000, 11)).unwrap();
        let mut counts = std::collections::HashMap::<u64, u32>::new();
        for &c in &l.cycles {
            *counts.entry(c).or_default() += 1;
        }
        let doubles = counts.values().filter(|&&n| n == 2).count() as f64;
        let n = l.pulses as f64;
        let p = 0.8 * 0.1;
        let sd = (n * p * (1.0 - p)).sqrt();
        assert!((doubles - n * p).abs() < 3.0 * sd, "{doubles} vs {}", n * p);
    }

    #[test]
    fn pair_prob_inversion() {
        for &g in &[0.0, 0.01, 0.05, 0.2, 0.5] {
            let q = EmitterModel::pair_prob_for_g2(g, 1.0).unwrap();
            let mut m = EmitterModel::ideal(1.0);
            m.pair_prob = q;
            assert!((m.pulsed_g2_zero() - g).abs() < 1e-12);
        }
        assert!(EmitterModel::pair_prob_for_g2(3.0, 1.0).is_err());
    }

    #[test]
    fn cw_requires_pump() {
        let m = EmitterModel::ideal(10_000.0);
        assert!(simulate_cw_emission(&m, &ExcitationConfig::cw(1_000_000, 1)).is_err());
    }

    #[test]
    fn cw_without_pairs_has_no_ties() {
        let mut m = EmitterModel::ideal(10_000.0);
        m.pump_rate_hz = 5e7;
        let s = simulate_cw_emission(&m, &ExcitationConfig::cw(100_000 * NS, 2)).unwrap();
        assert!(s.len() > 1000);
        assert!(s.times().windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn cw_rate_matches_stationary_chain() {
        // Mean cycle 1/P + 1/G gives rate P G / (P + G).
        let mut m = EmitterModel::ideal(10_000.0);
        m.pump_rate_hz = 1e9;
        let cfg = ExcitationConfig::cw(10_000_000 * NS, 5);
        let s = simulate_cw_emission(&m, &cfg).unwrap();
        let (p, g): (f64, f64) = (1e9, 1e8);
        let expected = p * g / (p + g);
        // Renewal process: var(N) ~ T cv^2 / mean_cycle.
        let mean_cycle = 1.0 / p + 1.0 / g;
        let var_cycle = 1.0 / (p * p) + 1.0 / (g * g);
        let t = 1e-2;
        let sd_rate = (t * var_cycle / mean_cycle.powi(3)).sqrt() / t;
        assert!(
            (s.rate_hz() - expected).abs() < 3.0 * sd_rate,
            "{} vs {expected}",
            s.rate_hz()
        );
    }

    #[test]
    fn background_identity_and_count() {
        let cfg = ExcitationConfig::cw(1_000_000 * NS, 9);
        let s = TimestampStream::new(vec![5, 10, 20], Origin::Emission, cfg.duration_ps).unwrap();
        assert_eq!(add_background(&s, 0.0, &cfg).unwrap(), s);

        let empty = TimestampStream::empty(Origin::Emission, cfg.duration_ps);
        let bg = add_background(&empty, 1e6, &cfg).unwrap();
        let expected = 1e6 * 1e-3;
        assert!((bg.len() as f64 - expected).abs() < 3.0 * expected.sqrt());
    }

    #[test]
    fn poisson_source_rejects_zero_rate() {
        assert!(simulate_poisson_source(0.0, &ExcitationConfig::cw(1000, 1)).is_err());
    }

    #[test]
    fn pulsed_laser_photons_sit_on_pulses() {
        let cfg = ExcitationConfig::pulse_train(1e6, 10_000, 4);
        let s = simulate_poisson_source(5e5, &cfg).unwrap();
        let period = cfg.period_ps() as i64;
        for &t in s.times() {
            let off = (t as i64 + period / 2) % period - period / 2;
            assert!(off.abs() < 500, "offset {off}");
        }
        let mean = s.len() as f64 / 10_000.0;
        assert!((mean - 0.5).abs() < 3.0 * (0.5f64 / 10_000.0).sqrt());
    }

    #[test]
    fn deterministic_given_seed() {
        let mut m = EmitterModel::ideal(10_000.0);
        m.pair_prob = 0.2;
        let cfg = ExcitationConfig::pulse_train(1e6, 5000, 42);
        let a = simulate_pulsed_emission(&m, &cfg).unwrap();
        let b = simulate_pulsed_emission(&m, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_pulsed_emission(&m, &cfg.clone().with_seed(43)).unwrap();
        assert_ne!(a, c);
    }
}
