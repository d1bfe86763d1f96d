//! Quasi-interpolants built from point samples: weighted, equal-weight QMC,
//! Monte Carlo, and noisy-data variants, plus the exact spectral convolution
//! reference operator they approximate.
//!
//! An approximant is the finite sum `x -> sum_j alpha_j v_j phi_rho(x.x_j)`.
//! It is immutable once built; evaluation is pure and batch evaluation
//! parallelizes over points with schedule-independent results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harmonics::SpectralFunction;
use crate::kernel::{KernelSpectrum, ZonalKernel};
use crate::sphere::{CapBuckets, PointSet, ProductRule};

/// Site count from which the compact-support cap index is built. Below this
/// the direct sum is at least as fast as the bucket walk.
const BUCKET_THRESHOLD: usize = 512;

/// Construction recipe tag, carried for reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproximantKind {
    Weighted,
    Qmc,
    Mc,
    Noisy,
}

impl std::fmt::Display for ApproximantKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ApproximantKind::Weighted => "weighted",
            ApproximantKind::Qmc => "qmc",
            ApproximantKind::Mc => "mc",
            ApproximantKind::Noisy => "noisy",
        };
        f.write_str(s)
    }
}

/// Additive noise law attached to sampled values, deterministic per
/// (seed, sample index): each index gets its own counter stream, so draws
/// are independent of slice length and order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Zero-mean Gaussian with the given standard deviation.
    GaussianStd(f64),
    /// Zero-mean uniform on [-M, M]; |draw| <= M exactly.
    UniformBounded(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::GaussianStd(sigma),
            seed,
        }
    }

    pub fn uniform(bound: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::UniformBounded(bound),
            seed,
        }
    }

    /// The single draw for a given sample index.
    pub fn draw(&self, index: u64) -> f64 {
        match self.kind {
            NoiseKind::GaussianStd(sigma) => {
                if sigma == 0.0 {
                    return 0.0;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(index);
                let n: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                sigma * n
            }
            NoiseKind::UniformBounded(bound) => {
                if bound == 0.0 {
                    return 0.0;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(index);
                rand::Rng::gen_range(&mut rng, -bound..=bound)
            }
        }
    }
}

/// Adds one independent draw per index to the values.
pub fn add_noise(values: &[f64], model: &NoiseModel) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, v)| v + model.draw(i as u64))
        .collect()
}

/// An evaluable quasi-interpolant `x -> sum_j alpha_j v_j phi_rho(x.x_j)`.
#[derive(Debug, Clone)]
pub struct Approximant {
    sites: PointSet,
    weights: Vec<f64>,
    values: Vec<f64>,
    kernel: ZonalKernel,
    kind: ApproximantKind,
    buckets: Option<CapBuckets>,
}

impl Approximant {
    fn build(
        sites: PointSet,
        weights: Vec<f64>,
        values: Vec<f64>,
        kernel: ZonalKernel,
        kind: ApproximantKind,
    ) -> Result<Self> {
        if weights.len() != sites.len() || values.len() != sites.len() {
            return Err(Error::invalid(format!(
                "quasi-interpolant: {} sites, {} weights, {} values",
                sites.len(),
                weights.len(),
                values.len()
            )));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("non-finite weight {w}")));
        }
        if sites.dim() != kernel.dim() {
            return Err(Error::invalid(format!(
                "site dimension {} does not match kernel dimension {}",
                sites.dim(),
                kernel.dim()
            )));
        }
        let buckets = if kernel.is_compact() && sites.dim() == 2 && sites.len() >= BUCKET_THRESHOLD
        {
            let pts = sites.to_xyz();
            // Colatitude granularity rho/2 keeps the candidate superset tight
            // relative to the kernel cap.
            Some(CapBuckets::build_with_band_height(
                &pts,
                0.5 * kernel.rho(),
            ))
        } else {
            None
        };
        Ok(Approximant {
            sites,
            weights,
            values,
            kernel,
            kind,
            buckets,
        })
    }

    pub fn sites(&self) -> &PointSet {
        &self.sites
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kernel(&self) -> &ZonalKernel {
        &self.kernel
    }

    pub fn kind(&self) -> ApproximantKind {
        self.kind
    }

    /// Re-tags the approximant as built from noisy data (reporting only).
    pub fn mark_noisy(mut self) -> Self {
        self.kind = ApproximantKind::Noisy;
        self
    }

    /// Evaluates at a unit vector of length dim+1.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.sites.dim() + 1);
        if let Some(b) = &self.buckets {
            let xp = [x[0], x[1], x[2]];
            let mut idx = Vec::new();
            b.within_chord(xp, self.kernel.support_chord(), &mut idx);
            let mut sum = 0.0f64;
            let mut comp = 0.0f64;
            for &j in &idx {
                let j = j as usize;
                let s = self.sites.point(j);
                let t = x[0] * s[0] + x[1] * s[1] + x[2] * s[2];
                let term = self.weights[j] * self.values[j] * self.kernel.eval(t);
                let y = term - comp;
                let tt = sum + y;
                comp = (tt - sum) - y;
                sum = tt;
            }
            sum
        } else {
            self.eval_reference(x)
        }
    }

    /// Direct full sum over all sites, bypassing the spatial index. Used as
    /// the reference path when validating the bucketed evaluation.
    pub fn eval_reference(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for j in 0..self.sites.len() {
            let s = self.sites.point(j);
            let mut t = 0.0;
            for (a, b) in x.iter().zip(s) {
                t += a * b;
            }
            let term = self.weights[j] * self.values[j] * self.kernel.eval(t);
            let y = term - comp;
            let tt = sum + y;
            comp = (tt - sum) - y;
            sum = tt;
        }
        sum
    }

    /// Evaluates at many points on S^2. Runs in parallel; the output order
    /// and values are independent of the parallel schedule.
    pub fn eval_batch(&self, points: &[[f64; 3]]) -> Vec<f64> {
        points.par_iter().map(|p| self.eval(p)).collect()
    }

    /// Dumps per-site data as CSV rows `x,y,z,value` (S^2 only).
    pub fn write_sample_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "x,y,z,value")?;
        for j in 0..self.sites.len() {
            let p = self.sites.point(j);
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", p[0], p[1], p[2], self.values[j])?;
        }
        Ok(())
    }
}

/// General weighted quasi-interpolant `x -> sum_j alpha_j v_j phi_rho(x.x_j)`.
pub fn qi_weighted(
    sites: PointSet,
    weights: Vec<f64>,
    values: Vec<f64>,
    kernel: ZonalKernel,
) -> Result<Approximant> {
    Approximant::build(sites, weights, values, kernel, ApproximantKind::Weighted)
}

/// Equal-weight quasi-interpolant `x -> (1/N) sum_j v_j phi_rho(x.x_j)`.
pub fn qi_qmc(sites: PointSet, values: Vec<f64>, kernel: ZonalKernel) -> Result<Approximant> {
    let n = sites.len();
    if n == 0 {
        return Err(Error::invalid("qi_qmc: empty site set"));
    }
    let w = vec![1.0 / n as f64; n];
    Approximant::build(sites, w, values, kernel, ApproximantKind::Qmc)
}

/// Equal-weight quasi-interpolant on externally drawn random sites: the
/// Monte Carlo analogue of `qi_qmc` for values sampled ahead of time (for
/// example with noise added).
pub fn qi_mc_values(sites: PointSet, values: Vec<f64>, kernel: ZonalKernel) -> Result<Approximant> {
    let n = sites.len();
    if n == 0 {
        return Err(Error::invalid("qi_mc_values: empty site set"));
    }
    let w = vec![1.0 / n as f64; n];
    Approximant::build(sites, w, values, kernel, ApproximantKind::Mc)
}

/// Monte Carlo quasi-interpolant: n uniform random sites from the given
/// seed, sampled values, equal weights 1/n.
pub fn qi_mc(
    n: usize,
    seed: u64,
    f: impl Fn(&[f64]) -> f64,
    kernel: ZonalKernel,
) -> Result<Approximant> {
    if n == 0 {
        return Err(Error::invalid("qi_mc: need n >= 1"));
    }
    let sites = crate::sphere::random_points(n, kernel.dim(), seed)?;
    let values: Vec<f64> = (0..n).map(|j| f(sites.point(j))).collect();
    let w = vec![1.0 / n as f64; n];
    Approximant::build(sites, w, values, kernel, ApproximantKind::Mc)
}

/// Exact convolution with the kernel in spectral form: coefficient-wise
/// multiplication by the kernel eigenvalues. This is the bias oracle the
/// discrete quasi-interpolants converge to.
pub fn convolution_reference(
    f_spec: &SpectralFunction,
    spec: &KernelSpectrum,
) -> Result<SpectralFunction> {
    if f_spec.l_max() > spec.l_max() {
        return Err(Error::invalid(format!(
            "convolution_reference: function degree {} exceeds spectrum degree {}",
            f_spec.l_max(),
            spec.l_max()
        )));
    }
    let mut out = SpectralFunction::zero(f_spec.l_max());
    let mut offset = 0usize;
    for ell in 0..=f_spec.l_max() {
        let dim = crate::harmonics::harmonic_dim(2, ell) as usize;
        for k in 0..dim {
            out.coeffs_mut()[offset + k] = spec.coeff(ell) * f_spec.coeffs()[offset + k];
        }
        offset += dim;
    }
    Ok(out)
}

/// Discrete convolution of f with the kernel over a structured latitude ring
/// rule: `sum_{r,i} w_r phi_rho(x . y_{ri}) f(y_{ri})`, evaluated at x.
///
/// For compactly supported kernels, rings and ring segments outside the
/// support cap are skipped without being visited, so the cost per point is
/// proportional to the cap area times the rule density. The rule is never
/// flattened; memory stays O(number of rings).
pub fn convolve_rule(
    kernel: &ZonalKernel,
    rule: &ProductRule,
    f: impl Fn([f64; 3]) -> f64,
    x: [f64; 3],
) -> f64 {
    assert_eq!(kernel.dim(), 2, "ring rules are specific to S^2");
    let t_min = kernel.support_cos();
    let z_x = x[2].clamp(-1.0, 1.0);
    let s_x = (1.0 - z_x * z_x).max(0.0).sqrt();
    let phi_x = x[1].atan2(x[0]);
    let n_phi = rule.n_phi;
    let h_phi = std::f64::consts::TAU / n_phi as f64;

    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut add = |term: f64| {
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };

    for r in 0..rule.z_nodes.len() {
        let z_r = rule.z_nodes[r];
        let s_r = (1.0 - z_r * z_r).max(0.0).sqrt();
        let w_r = rule.ring_weight(r);
        let zz = z_r * z_x;
        let ss = s_r * s_x;
        if zz + ss < t_min {
            continue;
        }
        let full = if zz - ss >= t_min {
            true
        } else {
            // A window survives only with ss > 0 (otherwise one of the two
            // branches above fired), so the division is safe.
            let c = ((t_min - zz) / ss).clamp(-1.0, 1.0);
            let span = (c.acos() / h_phi).ceil() as i64 + 1;
            2 * span + 1 >= n_phi as i64
        };
        if full {
            for i in 0..n_phi {
                let p = rule.node(r, i);
                let t = x[0] * p[0] + x[1] * p[1] + x[2] * p[2];
                let kv = kernel.eval(t);
                if kv != 0.0 {
                    add(w_r * kv * f(p));
                }
            }
        } else {
            let c = ((t_min - zz) / ss).clamp(-1.0, 1.0);
            let span = (c.acos() / h_phi).ceil() as i64 + 1;
            let center = (phi_x / h_phi).round() as i64;
            for j in -span..=span {
                let i = (center + j).rem_euclid(n_phi as i64) as usize;
                let p = rule.node(r, i);
                let t = x[0] * p[0] + x[1] * p[1] + x[2] * p[2];
                let kv = kernel.eval(t);
                if kv != 0.0 {
                    add(w_r * kv * f(p));
                }
            }
        }
    }
    sum
}
