//! Legendre polynomials P_ell(d+1; t), a real orthonormal spherical-harmonic
//! basis on S^2, and truncated spectral representations.
//!
//! Harmonics are orthonormal with respect to the normalized measure sigma, so
//! Y_{0,1} is identically 1 and the addition formula reads
//! `sum_k Y_{lk}(x) Y_{lk}(y) = Z(2,l) P_l(3; x.y)` with no surface-area
//! factor. Values are sqrt(4 pi) times the physics convention.
//!
//! Within a degree, the order index k runs 1..=Z(2,l) and maps to the
//! longitudinal order m through k = m + l + 1; positive m carries the cosine
//! factor, negative m the sine factor.

use crate::error::{Error, Result};
use crate::sphere::QuadratureRule;

/// Dimension Z(d, ell) of the space of degree-ell spherical harmonics on S^d,
/// computed in exact integer arithmetic.
pub fn harmonic_dim(d: usize, ell: usize) -> u64 {
    assert!(d >= 1, "harmonic_dim: d must be >= 1");
    if ell == 0 {
        return 1;
    }
    if d == 1 {
        return 2;
    }
    // Z = (2 ell + d - 1) * C(ell + d - 2, d - 2) / (d - 1), an exact integer.
    let l = ell as u128;
    let dd = d as u128;
    let mut binom: u128 = 1;
    for i in 1..=(dd - 2) {
        binom = binom * (l + i) / i;
    }
    let z = (2 * l + dd - 1) * binom / (dd - 1);
    u64::try_from(z).expect("harmonic_dim overflow")
}

/// Legendre polynomial P_ell(d+1; t) normalized so P_ell(d+1; 1) = 1.
pub fn legendre(ell: usize, d: usize, t: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::invalid(format!("legendre: |t| <= 1 required, got {t}")));
    }
    let mut vals = [0.0f64; 2];
    legendre_scan(ell, d, t, |l, v| {
        if l == ell {
            vals[0] = v;
        }
    });
    Ok(vals[0])
}

/// Evaluates P_0..P_L(d+1; t) in one recurrence pass into `out`.
pub fn legendre_upto(l_max: usize, d: usize, t: f64, out: &mut Vec<f64>) {
    out.clear();
    out.reserve(l_max + 1);
    legendre_scan(l_max, d, t, |_, v| out.push(v));
}

fn legendre_scan(l_max: usize, d: usize, t: f64, mut visit: impl FnMut(usize, f64)) {
    let df = d as f64;
    let mut p_prev = 1.0f64;
    visit(0, p_prev);
    if l_max == 0 {
        return;
    }
    let mut p = t;
    visit(1, p);
    for l in 1..l_max {
        let lf = l as f64;
        // (l + d - 1) P_{l+1} = (2l + d - 1) t P_l - l P_{l-1}
        let p_next = ((2.0 * lf + df - 1.0) * t * p - lf * p_prev) / (lf + df - 1.0);
        p_prev = p;
        p = p_next;
        visit(l + 1, p);
    }
}

/// Index (ell, k) of a real spherical harmonic on S^2, with 1 <= k <= 2 ell + 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarmonicIndex {
    pub ell: usize,
    pub k: usize,
}

impl HarmonicIndex {
    pub fn new(ell: usize, k: usize) -> Result<Self> {
        let z = harmonic_dim(2, ell) as usize;
        if k < 1 || k > z {
            return Err(Error::invalid(format!(
                "harmonic index k = {k} out of range 1..={z} for degree {ell}"
            )));
        }
        Ok(HarmonicIndex { ell, k })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Longitudinal order m in -ell..=ell, via k = m + ell + 1.
    pub fn m(&self) -> i64 {
        self.k as i64 - self.ell as i64 - 1
    }

    /// Position in the flattened (ell, k) ordering: ell^2 + k - 1.
    pub fn flat(&self) -> usize {
        self.ell * self.ell + self.k - 1
    }
}

/// Evaluates the real orthonormal harmonic Y_{ell,k} at a unit vector.
pub fn eval_harmonic(idx: HarmonicIndex, x: &[f64; 3]) -> f64 {
    let ell = idx.ell;
    let m_signed = idx.m();
    let m = m_signed.unsigned_abs() as usize;
    let z = x[2].clamp(-1.0, 1.0);
    let s = (1.0 - z * z).max(0.0).sqrt();

    // Climb the diagonal to Pbar_m^m, then recurse up in degree to ell.
    let mut pmm = 1.0f64;
    for mm in 1..=m {
        pmm *= s * ((2.0 * mm as f64 + 1.0) / (2.0 * mm as f64)).sqrt();
    }
    let pbar = if ell == m {
        pmm
    } else {
        let mut p_prev = pmm;
        let mut p = z * (2.0 * m as f64 + 3.0).sqrt() * pmm;
        for l in (m + 2)..=ell {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                .sqrt();
            let p_next = a * (z * p - b * p_prev);
            p_prev = p;
            p = p_next;
        }
        p
    };

    if m == 0 {
        return pbar;
    }
    let phi = x[1].atan2(x[0]);
    let mphi = m as f64 * phi;
    let lon = if m_signed > 0 { mphi.cos() } else { mphi.sin() };
    std::f64::consts::SQRT_2 * pbar * lon
}

/// Evaluates all Y_{ell,k} for ell <= l_max at one point, into a flat vector
/// ordered by `ell^2 + k - 1`. Returns the filled vector length (l_max+1)^2.
pub fn harmonics_upto(l_max: usize, x: &[f64; 3], out: &mut Vec<f64>) {
    let n = (l_max + 1) * (l_max + 1);
    out.clear();
    out.resize(n, 0.0);
    let z = x[2].clamp(-1.0, 1.0);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let phi = x[1].atan2(x[0]);
    let (sin_phi, cos_phi) = phi.sin_cos();

    // cos(m phi), sin(m phi) by angle addition as m climbs.
    let mut cos_m = 1.0f64;
    let mut sin_m = 0.0f64;

    let mut pmm = 1.0f64; // Pbar_m^m
    for m in 0..=l_max {
        if m > 0 {
            pmm *= s * ((2.0 * m as f64 + 1.0) / (2.0 * m as f64)).sqrt();
            let c = cos_m * cos_phi - sin_m * sin_phi;
            let sn = sin_m * cos_phi + cos_m * sin_phi;
            cos_m = c;
            sin_m = sn;
        }
        // Degree recurrence along fixed order m.
        let mut p_prev = 0.0f64;
        let mut p = pmm;
        for l in m..=l_max {
            if l > m {
                let lf = l as f64;
                let mf = m as f64;
                let p_next = if l == m + 1 {
                    z * (2.0 * mf + 3.0).sqrt() * pmm
                } else {
                    let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
                    let b = (((lf - 1.0) * (lf - 1.0) - mf * mf)
                        / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0))
                        .sqrt();
                    a * (z * p - b * p_prev)
                };
                p_prev = p;
                p = p_next;
            }
            let base = l * l + l; // flat index of (l, m = 0)
            if m == 0 {
                out[base] = p;
            } else {
                let v = std::f64::consts::SQRT_2 * p;
                out[base + m] = v * cos_m; // k = m + l + 1
                out[base - m] = v * sin_m; // k = -m + l + 1
            }
        }
    }
}

/// A function known through its Fourier-Legendre coefficients up to degree
/// `l_max`, stored flat in the `ell^2 + k - 1` ordering.
#[derive(Debug, Clone)]
pub struct SpectralFunction {
    l_max: usize,
    coeffs: Vec<f64>,
}

impl SpectralFunction {
    pub fn zero(l_max: usize) -> Self {
        SpectralFunction {
            l_max,
            coeffs: vec![0.0; (l_max + 1) * (l_max + 1)],
        }
    }

    /// The single basis function Y_{ell,k} as a spectral object.
    pub fn harmonic(idx: HarmonicIndex) -> Self {
        let mut f = SpectralFunction::zero(idx.ell);
        f.coeffs[idx.flat()] = 1.0;
        f
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn coeff(&self, ell: usize, k: usize) -> f64 {
        debug_assert!(k >= 1 && k <= 2 * ell + 1);
        self.coeffs[ell * ell + k - 1]
    }

    pub fn coeff_mut(&mut self, ell: usize, k: usize) -> &mut f64 {
        debug_assert!(k >= 1 && k <= 2 * ell + 1);
        &mut self.coeffs[ell * ell + k - 1]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Pointwise synthesis at a unit vector.
    pub fn eval(&self, x: &[f64; 3]) -> f64 {
        let mut basis = Vec::new();
        harmonics_upto(self.l_max, x, &mut basis);
        let mut sum = 0.0;
        let mut comp = 0.0;
        for (c, y) in self.coeffs.iter().zip(&basis) {
            let term = c * y;
            let t = sum + (term - comp);
            comp = (t - sum) - (term - comp);
            sum = t;
        }
        sum
    }

    /// L2(sigma) norm by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Truncated Sobolev H^s norm: sqrt(sum (1+ell)^{2s} |c|^2).
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        let mut total = 0.0;
        for ell in 0..=self.l_max {
            let w = (1.0 + ell as f64).powf(2.0 * s);
            for k in 1..=(2 * ell + 1) {
                let c = self.coeffs[ell * ell + k - 1];
                total += w * c * c;
            }
        }
        total.sqrt()
    }
}

/// Discrete projection coefficients from samples at quadrature nodes:
/// `f_hat(l,k) = sum_j w_j values_j Y_{lk}(x_j)`.
pub fn project_values(values: &[f64], l_max: usize, rule: &QuadratureRule) -> SpectralFunction {
    assert_eq!(values.len(), rule.len(), "project_values: length mismatch");
    let n = (l_max + 1) * (l_max + 1);
    let mut acc = vec![0.0f64; n];
    let mut comp = vec![0.0f64; n];
    let mut basis = Vec::new();
    for (j, x) in rule.nodes.iter().enumerate() {
        let wv = rule.weights[j] * values[j];
        harmonics_upto(l_max, x, &mut basis);
        for i in 0..n {
            let term = wv * basis[i];
            let y = term - comp[i];
            let t = acc[i] + y;
            comp[i] = (t - acc[i]) - y;
            acc[i] = t;
        }
    }
    SpectralFunction {
        l_max,
        coeffs: acc,
    }
}

/// Discrete projection of an evaluable function. The rule should be exact to
/// degree 2 l_max for the coefficients of a degree-l_max function to be exact.
pub fn project(
    f: impl Fn(&[f64; 3]) -> f64,
    l_max: usize,
    rule: &QuadratureRule,
) -> SpectralFunction {
    let values: Vec<f64> = rule.nodes.iter().map(f).collect();
    project_values(&values, l_max, rule)
}
