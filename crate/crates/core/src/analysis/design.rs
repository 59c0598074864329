use crate::analysis::mixing::mixing_weights;

/// Inputs for [`check_design_constraints`].
#[derive(Clone, Debug, PartialEq)]
pub struct DesignInputs {
    pub delay_ps: f64,
    pub dead_time_ps: f64,
    pub lifetime_ps: f64,
    /// `None` for c.w. excitation.
    pub rep_rate_hz: Option<f64>,
    pub t_ratio: f64,
    /// Lifetimes the replica must clear beyond the dead-time.
    pub lifetimes_margin: f64,
    /// The delay must stay below `period / period_divisor`.
    pub period_divisor: f64,
}

impl DesignInputs {
    pub fn new(delay_ps: f64, dead_time_ps: f64, lifetime_ps: f64, rep_rate_hz: Option<f64>, t_ratio: f64) -> Self {
        Self {
            delay_ps,
            dead_time_ps,
            lifetime_ps,
            rep_rate_hz,
            t_ratio,
            lifetimes_margin: 3.0,
            period_divisor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignReport {
    pub passes: bool,
    pub min_delay_ps: f64,
    pub max_delay_ps: Option<f64>,
    /// Fraction 2RT of zero-delay pairs moved to the delay replica.
    pub efficiency: f64,
    /// Distance below the 50 % optimum.
    pub efficiency_gap: f64,
    pub violations: Vec<String>,
}

/// Checks that the optical delay clears the detector's blind time and,
/// under pulsed excitation, that the replica and the period triplet do not
/// overlap.
pub fn check_design_constraints(inp: &DesignInputs) -> DesignReport {
    let margin = inp.lifetimes_margin * inp.lifetime_ps;
    let min_delay = inp.dead_time_ps + margin;
    let mut violations = Vec::new();
    if inp.delay_ps <= min_delay {
        violations.push(format!(
            "delay {:.0} ps does not exceed dead-time + {} lifetimes ({:.0} ps)",
            inp.delay_ps, inp.lifetimes_margin, min_delay
        ));
    }
    let max_delay = inp.rep_rate_hz.map(|rate| {
        let period = 1e12 / rate;
        let by_divisor = period / inp.period_divisor;
        if inp.delay_ps >= by_divisor {
            violations.push(format!(
                "delay {:.0} ps is not below period/{} ({:.0} ps): replica overlaps the next cycle",
                inp.delay_ps, inp.period_divisor, by_divisor
            ));
        }
        // Replica at +delay and triplet peak at period - delay need
        // separate integration windows.
        if period - 2.0 * inp.delay_ps <= 2.0 * margin {
            violations.push(format!(
                "replica at {:.0} ps overlaps triplet peak at {:.0} ps",
                inp.delay_ps,
                period - inp.delay_ps
            ));
        }
        by_divisor.min(0.5 * period - margin)
    });
    let (_, rt) = mixing_weights(inp.t_ratio);
    let efficiency = 2.0 * rt;
    DesignReport {
        passes: violations.is_empty(),
        min_delay_ps: min_delay,
        max_delay_ps: max_delay,
        efficiency,
        efficiency_gap: 0.5 - efficiency,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experimental_setup_passes() {
        let r = check_design_constraints(&DesignInputs::new(373_000.0, 22_000.0, 29_500.0, Some(1e6), 0.5));
        assert!(r.passes, "{:?}", r.violations);
        assert!((r.efficiency - 0.5).abs() < 1e-12);
        assert!(r.efficiency_gap.abs() < 1e-12);
    }

    #[test]
    fn delay_equal_to_period_fails() {
        let r = check_design_constraints(&DesignInputs::new(1e6, 22_000.0, 10_000.0, Some(1e6), 0.5));
        assert!(!r.passes);
        assert!(r.violations.iter().any(|v| v.contains("overlap")));
    }

    #[test]
    fn short_delay_fails() {
        let r = check_design_constraints(&DesignInputs::new(40_000.0, 22_000.0, 10_000.0, None, 0.5));
        assert!(!r.passes);
        assert_eq!(r.max_delay_ps, None);
    }

    #[test]
    fn unbalanced_split_loses_efficiency() {
        let r = check_design_constraints(&DesignInputs::new(300_000.0, 22_000.0, 10_000.0, Some(1e6), 0.7));
        assert!((r.efficiency - 0.42).abs() < 1e-12);
        assert!((r.efficiency_gap - 0.08).abs() < 1e-12);
    }
}
