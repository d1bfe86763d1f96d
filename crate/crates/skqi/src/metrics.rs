//! Error functionals for the convergence experiments: quadrature L2 error,
//! dense-set sup error, max empirical mean squared error over repeated
//! randomized builds, and log-log slope fits.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sphere::{PointSet, QuadratureRule};

/// One experiment row. `mmse` is present only for randomized-site runs.
#[derive(Debug, Clone, Copy)]
pub struct ErrorReport {
    pub n: usize,
    pub l2: f64,
    pub linf: f64,
    pub mmse: Option<f64>,
    pub wall_time_s: f64,
}

impl ErrorReport {
    pub const CSV_HEADER: &'static str = "N,L2err,Linferr,MMSE,time_s";

    /// Serializes in the fixed column order `N,L2err,Linferr,MMSE,time_s`,
    /// leaving MMSE blank when absent.
    pub fn csv_row(&self) -> String {
        let mmse = match self.mmse {
            Some(m) => format!("{m:.10e}"),
            None => String::new(),
        };
        format!(
            "{},{:.10e},{:.10e},{},{:.6}",
            self.n, self.l2, self.linf, mmse, self.wall_time_s
        )
    }
}

/// Quadrature L2 error `sqrt(sum_j w_j (approx(x_j) - f(x_j))^2)` under the
/// normalized (unit-mass) weights of the rule.
pub fn l2_error(
    approx: impl Fn(&[f64; 3]) -> f64,
    f: impl Fn(&[f64; 3]) -> f64,
    rule: &QuadratureRule,
) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for (x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let d = approx(x) - f(x);
        let term = w * d * d;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum.max(0.0).sqrt()
}

/// Max absolute deviation over a dense evaluation set.
pub fn linf_error(
    approx: impl Fn(&[f64; 3]) -> f64,
    f: impl Fn(&[f64; 3]) -> f64,
    eval_pts: &PointSet,
) -> f64 {
    assert!(!eval_pts.is_empty(), "linf_error: empty evaluation set");
    assert_eq!(eval_pts.dim(), 2, "linf_error evaluates on S^2");
    let mut m = 0.0f64;
    for i in 0..eval_pts.len() {
        let x = eval_pts.xyz(i);
        m = m.max((approx(&x) - f(&x)).abs());
    }
    m
}

/// Max empirical mean squared error: for each evaluation point, the average
/// squared deviation over `trials` independently seeded rebuilds of the
/// approximant; the max over points is returned.
///
/// Trials run in parallel. The per-point mean uses compensated accumulation
/// in a fixed trial order, so the result does not depend on the parallel
/// schedule and is invariant under permutation of the trial seeds (the same
/// seeds produce the same set of summands).
pub fn mmse<A>(
    builder: impl Fn(u64) -> A + Sync,
    f: impl Fn(&[f64; 3]) -> f64 + Sync,
    trials: usize,
    seeds: &[u64],
    eval_pts: &PointSet,
) -> f64
where
    A: Fn(&[f64; 3]) -> f64 + Sync,
{
    assert!(trials >= 1, "mmse: need at least one trial");
    assert_eq!(seeds.len(), trials, "mmse: one seed per trial");
    assert!(!eval_pts.is_empty(), "mmse: empty evaluation set");
    let pts: Vec<[f64; 3]> = (0..eval_pts.len()).map(|i| eval_pts.xyz(i)).collect();
    let f_vals: Vec<f64> = pts.iter().map(|p| f(p)).collect();

    // One row of squared errors per trial, computed independently.
    let mut sorted_seeds: Vec<u64> = seeds.to_vec();
    sorted_seeds.sort_unstable();
    let rows: Vec<Vec<f64>> = sorted_seeds
        .par_iter()
        .map(|&seed| {
            let approx = builder(seed);
            pts.iter()
                .zip(&f_vals)
                .map(|(p, fv)| {
                    let d = approx(p) - fv;
                    d * d
                })
                .collect()
        })
        .collect();

    let mut worst = 0.0f64;
    for k in 0..pts.len() {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for row in &rows {
            let y = row[k] - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        worst = worst.max(sum / trials as f64);
    }
    worst
}

/// Least-squares line through (log10 n, log10 err). Returns (slope, intercept).
pub fn fit_slope(ns: &[f64], errs: &[f64]) -> Result<(f64, f64)> {
    if ns.len() != errs.len() || ns.len() < 2 {
        return Err(Error::invalid(format!(
            "fit_slope: need >= 2 paired points, got {} and {}",
            ns.len(),
            errs.len()
        )));
    }
    for (&n, &e) in ns.iter().zip(errs) {
        if n <= 0.0 || e <= 0.0 || !n.is_finite() || !e.is_finite() {
            return Err(Error::invalid(format!(
                "fit_slope: log fit requires positive finite data, got ({n}, {e})"
            )));
        }
    }
    let m = ns.len() as f64;
    let xs: Vec<f64> = ns.iter().map(|n| n.log10()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.log10()).collect();
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(Error::invalid("fit_slope: degenerate abscissae"));
    }
    let slope = (m * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / m;
    Ok((slope, intercept))
}
