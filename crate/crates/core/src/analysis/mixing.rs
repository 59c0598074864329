use crate::correlator::CorrelationHistogram;
use crate::error::{Error, Result};

/// Weights `(R^2 + T^2, R T, R T)` applied to `g(tau)`, `g(tau - delay)` and
/// `g(tau + delay)` when a beamsplitter with one delayed arm feeds a single
/// detector.
pub fn mixing_weights(t_ratio: f64) -> (f64, f64) {
    let r = 1.0 - t_ratio;
    (t_ratio * t_ratio + r * r, t_ratio * r)
}

/// Bin index holding `[edge, edge + bw)`, mirroring negative delays onto
/// positive ones when the curve does not reach them (`g` is even in tau).
fn lookup(g: &CorrelationHistogram, edge: i64) -> Option<usize> {
    let bw = g.bin_width_ps() as i64;
    let direct = |e: i64| -> Option<usize> {
        let off = e - g.t_min_ps();
        (off >= 0 && off % bw == 0 && e + bw <= g.t_max_ps()).then(|| (off / bw) as usize)
    };
    direct(edge).or_else(|| direct(-edge - bw))
}

/// Predicts the single-detector curve from a two-detector `g_std` on a
/// delay axis: `(R^2 + T^2) g(tau) + R T g(tau - delay) + R T g(tau + delay)`.
/// The output covers `[0, t_max - delay)` on the same bin grid.
pub fn compose_mixing(g_std: &CorrelationHistogram, t_ratio: f64, delay_ps: u64) -> Result<CorrelationHistogram> {
    let norm = g_std.normalized().ok_or(Error::NotNormalized)?;
    if !(0.0..=1.0).contains(&t_ratio) {
        return Err(Error::param("t_ratio", "must lie in [0, 1]"));
    }
    let bw = g_std.bin_width_ps();
    if !delay_ps.is_multiple_of(bw) || g_std.t_min_ps().rem_euclid(bw as i64) != 0 {
        return Err(Error::param("delay", "delay and axis origin must sit on the bin grid"));
    }
    let delay = delay_ps as i64;
    if g_std.t_max_ps() < 2 * delay || g_std.t_max_ps() - delay <= 0 {
        return Err(Error::SpanTooSmall(format!(
            "curve ends at {} ps, composition with delay {delay} ps needs at least {}",
            g_std.t_max_ps(),
            2 * delay
        )));
    }

    let (w_same, w_cross) = mixing_weights(t_ratio);
    let n_out = ((g_std.t_max_ps() - delay) as u64 / bw) as usize;
    let mut values = Vec::with_capacity(n_out);
    let mut variances = Vec::with_capacity(n_out);
    let mut unit = Vec::with_capacity(n_out);
    for i in 0..n_out {
        let edge = (i as u64 * bw) as i64;
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(3);
        for (e, w) in [(edge, w_same), (edge - delay, w_cross), (edge + delay, w_cross)] {
            let j =
                lookup(g_std, e).ok_or_else(|| Error::SpanTooSmall(format!("no bin of g_std covers delay {e} ps")))?;
            match terms.iter_mut().find(|(k, _)| *k == j) {
                Some(t) => t.1 += w,
                None => terms.push((j, w)),
            }
        }
        values.push(terms.iter().map(|&(j, w)| w * norm.values[j]).sum());
        variances.push(terms.iter().map(|&(j, w)| w * w * norm.variances[j]).sum());
        unit.push(
            terms
                .iter()
                .map(|&(j, w)| w * w * norm.unit[j] * norm.unit[j])
                .sum::<f64>()
                .sqrt(),
        );
    }
    CorrelationHistogram::from_curve(bw, 0, values, variances, unit)
}

/// Bin-by-bin agreement of two normalized curves.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveComparison {
    pub bins: usize,
    pub max_abs_z: f64,
    pub worst_center_ps: f64,
    pub outside_3sigma: usize,
    pub chi2_per_bin: f64,
}

impl CurveComparison {
    pub fn within_3sigma(&self) -> bool {
        self.outside_3sigma == 0
    }
}

/// Compares two curves on the same bin grid over their common range.
/// Each side's variance is floored at that of a single count.
pub fn compare_curves(a: &CorrelationHistogram, b: &CorrelationHistogram) -> Result<CurveComparison> {
    let (na, nb) = match (a.normalized(), b.normalized()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(Error::NotNormalized),
    };
    if a.bin_width_ps() != b.bin_width_ps() {
        return Err(Error::AxisMismatch("bin widths differ".into()));
    }
    let lo = a.t_min_ps().max(b.t_min_ps());
    let hi = a.t_max_ps().min(b.t_max_ps());
    if hi <= lo {
        return Err(Error::AxisMismatch("curves do not overlap".into()));
    }
    let bw = a.bin_width_ps() as i64;
    let (off_a, off_b) = ((lo - a.t_min_ps()) / bw, (lo - b.t_min_ps()) / bw);
    if (lo - a.t_min_ps()) % bw != 0 || (lo - b.t_min_ps()) % bw != 0 {
        return Err(Error::AxisMismatch("bin grids are offset".into()));
    }
    let n = ((hi - lo) / bw) as usize;
    let mut out = CurveComparison {
        bins: n,
        max_abs_z: 0.0,
        worst_center_ps: lo as f64,
        outside_3sigma: 0,
        chi2_per_bin: 0.0,
    };
    let mut chi2 = 0.0;
    for k in 0..n {
        let (i, j) = (off_a as usize + k, off_b as usize + k);
        let diff = na.values[i] - nb.values[j];
        if diff == 0.0 {
            continue;
        }
        let var = na.variances[i].max(na.unit[i] * na.unit[i]) + nb.variances[j].max(nb.unit[j] * nb.unit[j]);
        let z = diff / var.sqrt();
        chi2 += z * z;
        if z.abs() > 3.0 {
            out.outside_3sigma += 1;
        }
        if z.abs() > out.max_abs_z {
            out.max_abs_z = z.abs();
            out.worst_center_ps = (lo + k as i64 * bw) as f64 + 0.5 * bw as f64;
        }
    }
    out.chi2_per_bin = chi2 / n as f64;
    Ok(out)
}
