//! Hyperinterpolation and filtered hyperinterpolation on S^2: discrete
//! spectral projection through a quadrature rule, optionally shaped by a
//! smooth cutoff filter. These serve as comparison methods for the
//! noisy-data experiments.

use crate::error::{Error, Result};
use crate::harmonics::{harmonics_upto, project_values, SpectralFunction};
use crate::sphere::{PointSet, QuadratureRule};

/// Smooth cutoff filter: 1 on [0, 1], 0 on [a, infinity), and the C-infinity
/// bridge `exp(2 exp(-2/y) / (y - 1))` with `y = (x-1)/(a-1)` in between.
///
/// The interior branch is evaluated inner-exponential first; for y below
/// 1e-12 the inner exponential underflows and the analytic limit 1 is
/// returned directly.
pub fn filter_h(x: f64, a: f64) -> f64 {
    assert!(a > 1.0, "filter transition endpoint must exceed 1, got {a}");
    assert!(x >= 0.0, "filter argument must be nonnegative, got {x}");
    if x <= 1.0 {
        return 1.0;
    }
    if x >= a {
        return 0.0;
    }
    let y = (x - 1.0) / (a - 1.0);
    if y < 1e-12 {
        return 1.0;
    }
    let u = (-2.0 / y).exp();
    (2.0 * u / (y - 1.0)).exp()
}

/// A validated filter with its transition endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    a: f64,
}

impl FilterSpec {
    pub const DEFAULT_A: f64 = 1.2;

    pub fn new(a: f64) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::invalid(format!(
                "filter endpoint must be finite and > 1, got {a}"
            )));
        }
        Ok(FilterSpec { a })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn eval(&self, x: f64) -> f64 {
        filter_h(x, self.a)
    }

    /// Truncation degree of the filtered projection at nominal degree L:
    /// `max(ceil(a L) - 1, L)`. The ceiling is taken with a small snap to
    /// the nearest integer so that binary representation of `a` does not
    /// shift the cutoff by one.
    pub fn truncation_degree(&self, l: usize) -> usize {
        let al = self.a * l as f64;
        let ceil = if (al - al.round()).abs() < 1e-9 {
            al.round()
        } else {
            al.ceil()
        } as usize;
        ceil.saturating_sub(1).max(l)
    }
}

/// A (possibly filtered) discrete spectral projection of sampled values.
#[derive(Debug, Clone)]
pub struct Hyperinterpolant {
    degree: usize,
    coeffs: SpectralFunction,
    filter: Option<FilterSpec>,
}

impl Hyperinterpolant {
    /// Nominal projection degree L.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Truncation degree of the stored coefficients (L, or the filter's
    /// extended cutoff).
    pub fn truncation(&self) -> usize {
        self.coeffs.l_max()
    }

    pub fn coeffs(&self) -> &SpectralFunction {
        &self.coeffs
    }

    pub fn filter(&self) -> Option<&FilterSpec> {
        self.filter.as_ref()
    }

    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        self.coeffs.eval(x)
    }

    /// Writes the coefficients as CSV rows `ell,k,coeff`.
    pub fn write_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "ell,k,coeff")?;
        for ell in 0..=self.coeffs.l_max() {
            for k in 1..=(2 * ell + 1) {
                writeln!(w, "{ell},{k},{:.17e}", self.coeffs.coeff(ell, k))?;
            }
        }
        Ok(())
    }
}

/// Discrete projection of sampled values to degree L:
/// `f_hat_{l,k} = sum_j w_j v_j Y_{l,k}(x_j)`. The rule must be exact to
/// degree 2L so the projection reproduces every polynomial of degree <= L.
pub fn hyperinterpolate(
    l: usize,
    rule: &QuadratureRule,
    values: &[f64],
) -> Result<Hyperinterpolant> {
    if rule.exact_degree < 2 * l {
        return Err(Error::invalid(format!(
            "projection to degree {l} needs a rule exact to {}, got {}",
            2 * l,
            rule.exact_degree
        )));
    }
    if values.len() != rule.len() {
        return Err(Error::invalid(format!(
            "{} values for a rule with {} nodes",
            values.len(),
            rule.len()
        )));
    }
    let coeffs = project_values(values, l, rule);
    Ok(Hyperinterpolant {
        degree: l,
        coeffs,
        filter: None,
    })
}

/// Filtered discrete projection: coefficients `h(ell/L) f_hat_{l,k}` kept up
/// to the filter's truncation degree. The rule must be exact to twice the
/// truncation degree.
pub fn filtered_hyperinterpolate(
    l: usize,
    a: f64,
    rule: &QuadratureRule,
    values: &[f64],
) -> Result<Hyperinterpolant> {
    let filter = FilterSpec::new(a)?;
    let l_bar = filter.truncation_degree(l);
    if rule.exact_degree < 2 * l_bar {
        return Err(Error::invalid(format!(
            "filtered projection at degree {l} (cutoff {l_bar}) needs a rule exact to {}, got {}",
            2 * l_bar,
            rule.exact_degree
        )));
    }
    if values.len() != rule.len() {
        return Err(Error::invalid(format!(
            "{} values for a rule with {} nodes",
            values.len(),
            rule.len()
        )));
    }
    let mut coeffs = project_values(values, l_bar, rule);
    let mut offset = 0usize;
    for ell in 0..=l_bar {
        let h = filter.eval(ell as f64 / l as f64);
        let width = 2 * ell + 1;
        for c in &mut coeffs.coeffs_mut()[offset..offset + width] {
            *c *= h;
        }
        offset += width;
    }
    Ok(Hyperinterpolant {
        degree: l,
        coeffs,
        filter: Some(filter),
    })
}

/// Wraps a supplied point set as an equal-weight quadrature rule claimed
/// exact to degree t, verifying the claim empirically: every harmonic of
/// degree 1..=t must integrate to zero (and the constant to one) within
/// 1e-8. Intended for spherical designs loaded from files.
pub fn rule_from_points(pts: &PointSet, t: usize) -> Result<QuadratureRule> {
    if pts.dim() != 2 {
        return Err(Error::invalid("design rules are supported on S^2 only"));
    }
    let n = pts.len();
    let w = 1.0 / n as f64;
    let mut sums = vec![0.0f64; (t + 1) * (t + 1)];
    let mut basis = Vec::new();
    for i in 0..n {
        let x = pts.xyz(i);
        harmonics_upto(t, &x, &mut basis);
        for (s, b) in sums.iter_mut().zip(&basis) {
            *s += w * b;
        }
    }
    if (sums[0] - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "design weight normalization is off: constant integrates to {}",
            sums[0]
        )));
    }
    for ell in 1..=t {
        for k in 1..=(2 * ell + 1) {
            let v = sums[ell * ell + k - 1];
            if v.abs() > 1e-8 {
                return Err(Error::invalid(format!(
                    "point set is not a degree-{t} design: degree-{ell} harmonic integrates to {v:e}"
                )));
            }
        }
    }
    Ok(QuadratureRule {
        nodes: pts.to_xyz(),
        weights: vec![w; n],
        exact_degree: t,
    })
}

/// Largest projection degree whose (filtered) quadrature requirement fits a
/// product rule with at most `budget` nodes. Used to match baseline degrees
/// to a site budget N in comparisons.
pub fn degree_for_budget(budget: usize, a: f64) -> Result<usize> {
    let filter = FilterSpec::new(a)?;
    let mut best = None;
    let mut l = 1usize;
    loop {
        let l_bar = filter.truncation_degree(l);
        let need = crate::sphere::ProductRule::new(2 * l_bar).len();
        if need > budget {
            break;
        }
        best = Some(l);
        l += 1;
    }
    best.ok_or_else(|| {
        Error::invalid(format!(
            "budget of {budget} nodes cannot support even a degree-1 projection"
        ))
    })
}
