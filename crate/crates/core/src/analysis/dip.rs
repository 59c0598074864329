//! Reading the depth of an antibunching dip from a normalized c.w. curve.
//!
//! The dip is fitted with `y(x) = c + s x - a exp(-k |x|)` integrated over
//! each bin, where `x` is the delay from the dip center. The linear terms
//! absorb residual envelope slope. The reported dip is the model value at
//! `x = 0` relative to the local baseline, `1 - a / c`, so it does not
//! depend on a single noisy bin or on bin width.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::correlator::CorrelationHistogram;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DipFit {
    /// `1 - a / c`: the curve at the dip center relative to its baseline.
    pub dip: f64,
    pub sigma: f64,
    pub baseline: f64,
    pub amplitude: f64,
    /// Recovery rate of the dip, 1/ps.
    pub rate_per_ps: f64,
    pub chi2_per_dof: f64,
    pub bins: usize,
}

struct Point {
    x0: f64,
    x1: f64,
    y: f64,
    w: f64,
}

/// Mean of `exp(-k |x|)` over `[x0, x1]`.
fn bin_mean_cusp(k: f64, x0: f64, x1: f64) -> f64 {
    let prim = |x: f64| {
        // Antiderivative of exp(-k|x|), odd and continuous at 0.
        if x >= 0.0 {
            (1.0 - (-k * x).exp()) / k
        } else {
            -(1.0 - (k * x).exp()) / k
        }
    };
    (prim(x1) - prim(x0)) / (x1 - x0)
}

fn basis(p: &Point, k: f64) -> Vector3<f64> {
    Vector3::new(1.0, 0.5 * (p.x0 + p.x1), -bin_mean_cusp(k, p.x0, p.x1))
}

/// Weighted linear solve for (c, s, a) at fixed `k`. Returns params and chi2.
fn solve_linear(points: &[Point], k: f64) -> Option<(Vector3<f64>, f64)> {
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for p in points {
        let b = basis(p, k);
        ata += p.w * b * b.transpose();
        aty += p.w * p.y * b;
    }
    let params = ata.cholesky()?.solve(&aty);
    let chi2 = points
        .iter()
        .map(|p| {
            let r = p.y - basis(p, k).dot(&params);
            p.w * r * r
        })
        .sum();
    Some((params, chi2))
}

/// Fits the dip centered at `center_ps` using bins within `half_width_ps`.
pub fn fit_dip(hist: &CorrelationHistogram, center_ps: i64, half_width_ps: u64) -> Result<DipFit> {
    let norm = hist.normalized().ok_or(Error::NotNormalized)?;
    if !hist.covers(center_ps, half_width_ps) {
        return Err(Error::SpanTooSmall(format!(
            "dip window {center_ps} +/- {half_width_ps} ps leaves the histogram"
        )));
    }
    // Work in ns so the normal equations stay well conditioned.
    let bw = hist.bin_width_ps() as f64 * 1e-3;
    let points: Vec<Point> = hist
        .window(center_ps, half_width_ps)
        .map(|i| {
            let x0 = (hist.bin_start_ps(i) - center_ps) as f64 * 1e-3;
            let var = norm.variances[i].max(norm.unit[i] * norm.unit[i]);
            Point {
                x0,
                x1: x0 + bw,
                y: norm.values[i],
                w: 1.0 / var,
            }
        })
        .collect();
    if points.len() < 6 {
        return Err(Error::Fit(format!("only {} bins in the dip window", points.len())));
    }

    let half = half_width_ps as f64 * 1e-3;
    let k_lo = 0.5 / half;
    let k_hi = 10.0 / bw;
    let chi2_at = |k: f64| solve_linear(&points, k).map_or(f64::INFINITY, |(_, c)| c);

    // Coarse log grid, then golden-section refinement around the best node.
    let n_grid = 120;
    let grid: Vec<f64> = (0..n_grid)
        .map(|i| k_lo * (k_hi / k_lo).powf(i as f64 / (n_grid - 1) as f64))
        .collect();
    let best = (0..n_grid)
        .min_by(|&a, &b| chi2_at(grid[a]).total_cmp(&chi2_at(grid[b])))
        .unwrap();
    let (mut lo, mut hi) = (grid[best.saturating_sub(1)].ln(), grid[(best + 1).min(n_grid - 1)].ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - phi * (hi - lo);
        let b = lo + phi * (hi - lo);
        if chi2_at(a.exp()) < chi2_at(b.exp()) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let k = (0.5 * (lo + hi)).exp();
    let (params, chi2) = solve_linear(&points, k).ok_or_else(|| Error::Fit("singular normal equations".into()))?;
    let (c, a) = (params[0], params[2]);
    if c <= 0.0 {
        return Err(Error::Fit(format!("non-positive baseline {c}")));
    }

    // Full covariance of (c, s, a, k) from the Gauss-Newton Hessian.
    let dk = 1e-6 * k;
    let mut jtj = Matrix4::zeros();
    for p in &points {
        let b = basis(p, k);
        let db = (bin_mean_cusp(k + dk, p.x0, p.x1) - bin_mean_cusp(k - dk, p.x0, p.x1)) / (2.0 * dk);
        let j = Vector4::new(b[0], b[1], b[2], -params[2] * db);
        jtj += p.w * j * j.transpose();
    }
    let dof = points.len().saturating_sub(4).max(1) as f64;
    let cov = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("singular covariance".into()))?;
    let grad = Vector4::new(a / (c * c), 0.0, -1.0 / c, 0.0);
    let var = (grad.transpose() * cov * grad)[0].max(0.0);

    Ok(DipFit {
        dip: 1.0 - a / c,
        sigma: var.sqrt(),
        baseline: c,
        amplitude: a,
        rate_per_ps: k * 1e-3,
        chi2_per_dof: chi2 / dof,
        bins: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(depth: f64, k_per_ns: f64, center: i64) -> CorrelationHistogram {
        let bw = 1000u64;
        let n = 400;
        let t_min = center - 200_000;
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let x0 = (t_min + (i as i64) * bw as i64 - center) as f64 * 1e-3;
            values.push(1.0 - (1.0 - depth) * bin_mean_cusp(k_per_ns, x0, x0 + 1.0));
        }
        let var = vec![1e-4; n];
        let unit = vec![1e-3; n];
        CorrelationHistogram::from_curve(bw, t_min, values, var, unit).unwrap()
    }

    #[test]
    fn recovers_exact_cusp() {
        let h = synthetic(0.75, 0.11, 300_000);
        let fit = fit_dip(&h, 300_000, 80_000).unwrap();
        assert!((fit.dip - 0.75).abs() < 1e-6, "{fit:?}");
        assert!((fit.rate_per_ps * 1e3 - 0.11).abs() < 1e-4);
        assert!(fit.sigma > 0.0);
    }

    #[test]
    fn needs_normalized_input() {
        let h = CorrelationHistogram::new(crate::correlator::Estimator::AllPairs, 1000, 0, 100_000).unwrap();
        assert!(matches!(fit_dip(&h, 50_000, 10_000), Err(Error::NotNormalized)));
    }

    #[test]
    fn cusp_mean_limits() {
        assert!((bin_mean_cusp(1.0, -1e-9, 1e-9) - 1.0).abs() < 1e-6);
        let m = bin_mean_cusp(0.5, 0.0, 2.0);
        assert!((m - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }
}
