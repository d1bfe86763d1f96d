//! Multilevel quasi-interpolation: a sequence of single-level operators on
//! refining site sets, each applied to the residual left by the levels
//! before it, with scales coupled to the mesh by rho_j = nu * sqrt(h_j).

use crate::error::{Error, Result};
use crate::kernel::{RadialProfile, ZonalKernel};
use crate::quasi::{qi_qmc, Approximant, NoiseModel};
use crate::sphere::{product_quadrature, spiral_points, PointSet};
use serde::{Deserialize, Serialize};

/// How per-level mesh norms are estimated when building a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HMode {
    /// Geodesic fill distance measured against a dense probe set.
    Empirical,
    /// The quasi-uniform surrogate N^{-1/d}.
    Nominal,
}

/// Relative slack allowed between consecutive mesh ratios before the
/// schedule builder warns about uneven refinement.
pub const DEFAULT_C_DELTA: f64 = 0.9;

/// An ordered refinement plan: per-level sites, scales, and mesh estimates.
#[derive(Debug, Clone)]
pub struct LevelSchedule {
    sites: Vec<PointSet>,
    rho: Vec<f64>,
    h: Vec<f64>,
    nu: f64,
    delta: f64,
    warnings: Vec<String>,
}

impl LevelSchedule {
    pub fn n_levels(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self, j: usize) -> &PointSet {
        &self.sites[j]
    }

    pub fn rho(&self, j: usize) -> f64 {
        self.rho[j]
    }

    pub fn h(&self, j: usize) -> f64 {
        self.h[j]
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The (largest observed) mesh contraction factor h_{j+1}/h_j.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Non-fatal observations recorded while building (uneven refinement,
    /// thin contraction margins). Empty for well-formed schedules.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn total_sites(&self) -> usize {
        self.sites.iter().map(|s| s.len()).sum()
    }
}

/// Builds a schedule from ordered site sets: mesh estimates per `h_mode`,
/// scales rho_j = nu * sqrt(h_j).
pub fn build_schedule(
    base_sites: Vec<PointSet>,
    nu: f64,
    h_mode: HMode,
) -> Result<LevelSchedule> {
    if base_sites.is_empty() {
        return Err(Error::InvalidSchedule("no levels given".into()));
    }
    if !(nu > 1.0) {
        return Err(Error::InvalidSchedule(format!("need nu > 1, got {nu}")));
    }
    let d = base_sites[0].dim();
    if base_sites.iter().any(|s| s.dim() != d) {
        return Err(Error::InvalidSchedule(
            "levels live on spheres of different dimension".into(),
        ));
    }
    let mut h = Vec::with_capacity(base_sites.len());
    for s in &base_sites {
        let hj = match h_mode {
            HMode::Nominal => (s.len() as f64).powf(-1.0 / d as f64),
            HMode::Empirical => {
                if d != 2 {
                    return Err(Error::InvalidSchedule(
                        "empirical mesh estimation is implemented for S^2 only".into(),
                    ));
                }
                let probe = spiral_points((4 * s.len()).max(4096))?;
                crate::sphere::fill_distance(s, &probe)?
            }
        };
        h.push(hj);
    }
    for w in h.windows(2) {
        if w[1] >= w[0] {
            return Err(Error::InvalidSchedule(format!(
                "mesh norms must strictly decrease across levels, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    let rho: Vec<f64> = h.iter().map(|hj| nu * hj.sqrt()).collect();
    if let Some((j, r)) = rho.iter().enumerate().find(|(_, r)| **r >= 1.0) {
        return Err(Error::InvalidSchedule(format!(
            "level {j} has scale rho = {r:.4} >= 1; lower nu or refine the coarsest level"
        )));
    }

    let mut warnings = Vec::new();
    let ratios: Vec<f64> = h.windows(2).map(|w| w[1] / w[0]).collect();
    let delta = ratios.iter().cloned().fold(0.0f64, f64::max).min(1.0);
    if h_mode == HMode::Empirical {
        for (j, r) in ratios.iter().enumerate() {
            if *r < DEFAULT_C_DELTA * delta {
                warnings.push(format!(
                    "uneven refinement: h ratio {:.3} between levels {} and {} falls below {:.3} of the slowest ratio {:.3}",
                    r, j, j + 1, DEFAULT_C_DELTA, delta,
                ));
            }
        }
    }
    if nu < 1.2 {
        warnings.push(format!(
            "nu = {nu} leaves little smoothing margin; per-level error contraction may stall"
        ));
    }
    Ok(LevelSchedule {
        sites: base_sites,
        rho,
        h,
        nu,
        delta: if ratios.is_empty() { 0.0 } else { delta },
        warnings,
    })
}

/// Per-level progress record: errors of the accumulated approximant against
/// the clean target function.
#[derive(Debug, Clone, Copy)]
pub struct LevelRecord {
    pub level: usize,
    pub n: usize,
    pub rho: f64,
    pub l2: f64,
    pub linf: f64,
}

/// The accumulated multilevel approximant M_n = s_1 + ... + s_n, where each
/// s_j quasi-interpolates the residual of the levels before it. The values
/// stored in level j's approximant are exactly the residual samples used to
/// build it.
#[derive(Debug, Clone)]
pub struct MultilevelApproximant {
    levels: Vec<Approximant>,
    records: Vec<LevelRecord>,
}

impl MultilevelApproximant {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, j: usize) -> &Approximant {
        &self.levels[j]
    }

    pub fn records(&self) -> &[LevelRecord] {
        &self.records
    }

    /// Evaluates M_n at a point on S^2.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for s in &self.levels {
            let term = s.eval(x);
            let y = term - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        sum
    }

    pub fn eval_batch(&self, points: &[[f64; 3]]) -> Vec<f64> {
        let mut out = vec![0.0f64; points.len()];
        for s in &self.levels {
            let vals = s.eval_batch(points);
            for (o, v) in out.iter_mut().zip(&vals) {
                *o += v;
            }
        }
        out
    }

    /// Largest violation of the telescoping identity M_n + E_n = y at the
    /// final level's sample sites, where y are the (possibly noisy) samples
    /// and E_n is carried by the residual recursion. Zero up to roundoff by
    /// construction.
    pub fn telescoping_defect(
        &self,
        f: impl Fn(&[f64; 3]) -> f64,
        noise: Option<&NoiseModel>,
    ) -> f64 {
        let n = self.levels.len();
        let last = &self.levels[n - 1];
        let sites = last.sites();
        let mut worst = 0.0f64;
        for i in 0..sites.len() {
            let x = sites.xyz(i);
            let mut y = f(&x);
            if let Some(m) = noise {
                y += m.draw(level_noise_index(n - 1, i));
            }
            // E_n at a level-n site: the stored residual sample minus s_n.
            let e_n = last.values()[i] - last.eval(&x);
            let m_n = self.eval(&x);
            worst = worst.max((m_n + e_n - y).abs());
        }
        worst
    }

    /// Writes the per-level progress log as CSV `level,N,rho,L2err,Linferr`.
    pub fn write_level_csv(&self, w: &mut impl std::io::Write) -> Result<()> {
        writeln!(w, "level,N,rho,L2err,Linferr")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{:.6},{:.10e},{:.10e}",
                r.level, r.n, r.rho, r.l2, r.linf
            )?;
        }
        Ok(())
    }
}

/// Noise stream index for site i at level j: levels get disjoint index
/// blocks so each level draws fresh noise at its sites.
fn level_noise_index(level: usize, site: usize) -> u64 {
    ((level as u64) << 40) | site as u64
}

/// Runs the multilevel recursion: at each level, sample the residual
/// y_i - M_{j-1}(x_i) (noise, when present, is drawn once per site per level
/// and attached to the f-sample), quasi-interpolate it at scale rho_j, and
/// add the result to the accumulated approximant. Per-level errors against
/// the clean f are recorded along the way.
pub fn multilevel_approximate(
    schedule: &LevelSchedule,
    f: impl Fn(&[f64; 3]) -> f64 + Sync,
    kernel_family: &RadialProfile,
    noise: Option<&NoiseModel>,
) -> Result<MultilevelApproximant> {
    if schedule.sites(0).dim() != 2 {
        return Err(Error::invalid(
            "the multilevel driver currently runs on S^2 only",
        ));
    }
    let rule = product_quadrature(60);
    let probe = spiral_points(4096)?;
    let rule_pts: Vec<[f64; 3]> = rule.nodes.clone();
    let f_at_rule: Vec<f64> = rule_pts.iter().map(|p| f(p)).collect();
    let probe_pts: Vec<[f64; 3]> = (0..probe.len()).map(|i| probe.xyz(i)).collect();
    let f_at_probe: Vec<f64> = probe_pts.iter().map(|p| f(p)).collect();
    let mut m_at_rule = vec![0.0f64; rule_pts.len()];
    let mut m_at_probe = vec![0.0f64; probe_pts.len()];

    let mut levels: Vec<Approximant> = Vec::with_capacity(schedule.n_levels());
    let mut records = Vec::with_capacity(schedule.n_levels());
    for j in 0..schedule.n_levels() {
        let sites = schedule.sites(j).clone();
        let rho = schedule.rho(j);
        let kern = ZonalKernel::new(kernel_family.clone(), rho, 2)?;
        let site_pts: Vec<[f64; 3]> = (0..sites.len()).map(|i| sites.xyz(i)).collect();
        let mut residuals: Vec<f64> = site_pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut y = f(p);
                if let Some(m) = noise {
                    y += m.draw(level_noise_index(j, i));
                }
                y
            })
            .collect();
        for s in &levels {
            let vals = s.eval_batch(&site_pts);
            for (r, v) in residuals.iter_mut().zip(&vals) {
                *r -= v;
            }
        }
        let s_j = qi_qmc(sites, residuals, kern)?;
        let at_rule = s_j.eval_batch(&rule_pts);
        for (m, v) in m_at_rule.iter_mut().zip(&at_rule) {
            *m += v;
        }
        let at_probe = s_j.eval_batch(&probe_pts);
        for (m, v) in m_at_probe.iter_mut().zip(&at_probe) {
            *m += v;
        }
        let n_j = s_j.sites().len();
        levels.push(s_j);

        let mut l2sq = 0.0f64;
        for ((w, m), fv) in rule.weights.iter().zip(&m_at_rule).zip(&f_at_rule) {
            l2sq += w * (m - fv) * (m - fv);
        }
        let linf = m_at_probe
            .iter()
            .zip(&f_at_probe)
            .map(|(m, fv)| (m - fv).abs())
            .fold(0.0f64, f64::max);
        records.push(LevelRecord {
            level: j + 1,
            n: n_j,
            rho,
            l2: l2sq.max(0.0).sqrt(),
            linf,
        });
    }
    Ok(MultilevelApproximant { levels, records })
}

/// Result of checking the recursion against its expanded operator form.
#[derive(Debug, Clone, Copy)]
pub struct OperatorExpansionReport {
    pub n_levels: usize,
    /// Max |M_n(recursive) - M_n(expanded)| over the check points.
    pub max_deviation: f64,
    /// Max |f - M_n - E_n(expanded)| over the check points.
    pub residual_max_deviation: f64,
}

/// Cross-checks the residual recursion against the expanded product-sum
/// form of the same operator on a fixed smooth function:
///
/// ```text
/// M_n = sum over nonempty S subset of {1..n}, S = {a_1 < ... < a_k}, of
///       (-1)^{k-1} Q_{a_k} ... Q_{a_1}
/// ```
///
/// which is the inclusion-exclusion expansion of
/// `M_n = sum_j Q_j prod_{l<j} (I - Q_l)`. The two paths share no code:
/// the recursion subtracts sampled residuals, the expansion composes
/// freshly built single-level operators.
pub fn expand_operators(n: usize) -> Result<OperatorExpansionReport> {
    if n == 0 || n > 4 {
        return Err(Error::invalid(format!(
            "expand_operators: test harness covers 1..=4 levels, got {n}"
        )));
    }
    let sizes = [96usize, 212, 464, 1021];
    let mut site_sets = Vec::with_capacity(n);
    for &s in sizes.iter().take(n) {
        site_sets.push(spiral_points(s)?);
    }
    let schedule = build_schedule(site_sets, 1.5, HMode::Nominal)?;
    let profile = RadialProfile::wendland(3, 1)?;

    // Fixed smooth target: a low-degree spectral function with seeded
    // coefficients.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let mut target = crate::harmonics::SpectralFunction::zero(8);
    for c in target.coeffs_mut() {
        *c = rng.gen_range(-1.0..1.0);
    }
    let f = |x: &[f64; 3]| target.eval(x);

    let recursive = multilevel_approximate(&schedule, f, &profile, None)?;

    // Single-level operators; applying Q_a to any evaluable builds a fresh
    // approximant from its values at the level-a sites.
    let mut kernels = Vec::with_capacity(n);
    for j in 0..n {
        kernels.push(ZonalKernel::new(profile.clone(), schedule.rho(j), 2)?);
    }
    let apply_q = |a: usize, g: &dyn Fn(&[f64; 3]) -> f64| -> Result<Approximant> {
        let sites = schedule.sites(a).clone();
        let vals: Vec<f64> = (0..sites.len()).map(|i| g(&sites.xyz(i))).collect();
        qi_qmc(sites, vals, kernels[a].clone())
    };

    // Every nonempty subset of levels contributes one composed chain.
    let mut chains: Vec<(f64, Approximant)> = Vec::new();
    for mask in 1u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
        let mut current = apply_q(members[0], &f)?;
        for &a in &members[1..] {
            let prev = current;
            current = apply_q(a, &|x: &[f64; 3]| prev.eval(x))?;
        }
        let sign = if members.len() % 2 == 1 { 1.0 } else { -1.0 };
        chains.push((sign, current));
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
    let mut max_dev = 0.0f64;
    let mut max_res_dev = 0.0f64;
    for _ in 0..50 {
        let v = [
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
            rng.sample::<f64, _>(rand_distr::StandardNormal),
        ];
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if norm < 1e-9 {
            continue;
        }
        let x = [v[0] / norm, v[1] / norm, v[2] / norm];
        let expanded: f64 = chains.iter().map(|(s, q)| s * q.eval(&x)).sum();
        let rec = recursive.eval(&x);
        max_dev = max_dev.max((rec - expanded).abs());
        // Expanded residual operator: E_n = f - M_n.
        let e_expanded = f(&x) - expanded;
        max_res_dev = max_res_dev.max((f(&x) - rec - e_expanded).abs());
    }
    Ok(OperatorExpansionReport {
        n_levels: n,
        max_deviation: max_dev,
        residual_max_deviation: max_res_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasi::NoiseKind;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_target(x: &[f64; 3]) -> f64 {
        x[2].exp() + 0.5 * (3.0 * x[0]).sin()
    }

    #[test]
    fn single_level_nominal_schedule() {
        let sites = spiral_points(144).unwrap();
        let s = build_schedule(vec![sites], 1.5, HMode::Nominal).unwrap();
        assert_eq!(s.n_levels(), 1);
        assert!((s.h(0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((s.rho(0) - 1.5 / 12f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn doubling_sizes_give_half_delta() {
        let sets = vec![
            spiral_points(144).unwrap(),
            spiral_points(576).unwrap(),
            spiral_points(2304).unwrap(),
        ];
        let s = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
        assert_eq!(s.delta(), 0.5);
        for j in 0..3 {
            assert!((s.rho(j) - 1.5 * s.h(j).sqrt()).abs() < 1e-12);
        }
        assert!(s.warnings().is_empty());
    }

    #[test]
    fn schedule_rejections() {
        let a = spiral_points(144).unwrap();
        let b = spiral_points(576).unwrap();
        // Increasing h (coarsening) is rejected.
        assert!(matches!(
            build_schedule(vec![b.clone(), a.clone()], 1.5, HMode::Nominal),
            Err(Error::InvalidSchedule(_))
        ));
        assert!(build_schedule(vec![], 1.5, HMode::Nominal).is_err());
        assert!(build_schedule(vec![a.clone()], 1.0, HMode::Nominal).is_err());
        // Scale >= 1 at the coarsest level is rejected.
        let tiny = spiral_points(16).unwrap();
        assert!(matches!(
            build_schedule(vec![tiny], 4.0, HMode::Nominal),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn empirical_mode_measures_spiral_mesh() {
        let sets = vec![spiral_points(400).unwrap(), spiral_points(1600).unwrap()];
        let s = build_schedule(sets, 1.5, HMode::Empirical).unwrap();
        // Spiral fill distance is close to 2/sqrt(N).
        assert!((s.h(0) * 20.0 / 2.0 - 1.0).abs() < 0.4, "h0 = {}", s.h(0));
        assert!(s.h(1) < s.h(0));
    }

    #[test]
    fn empirical_mode_warns_on_uneven_refinement() {
        let sets = vec![
            spiral_points(144).unwrap(),
            spiral_points(256).unwrap(),
            spiral_points(2304).unwrap(),
        ];
        let s = build_schedule(sets, 1.5, HMode::Empirical).unwrap();
        assert!(
            !s.warnings().is_empty(),
            "expected a ratio warning, got none"
        );
    }

    #[test]
    fn one_level_equals_single_level_qi() {
        let sites = spiral_points(500).unwrap();
        let schedule = build_schedule(vec![sites.clone()], 1.5, HMode::Nominal).unwrap();
        let profile = RadialProfile::wendland(3, 1).unwrap();
        let ml = multilevel_approximate(&schedule, smooth_target, &profile, None).unwrap();
        assert_eq!(ml.n_levels(), 1);
        let kern = ZonalKernel::new(profile, schedule.rho(0), 2).unwrap();
        let values: Vec<f64> = (0..sites.len())
            .map(|i| smooth_target(&sites.xyz(i)))
            .collect();
        let single = qi_qmc(sites, values, kern).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let v = [
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
                rng.sample::<f64, _>(rand_distr::StandardNormal),
            ];
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            let x = [v[0] / norm, v[1] / norm, v[2] / norm];
            assert_eq!(ml.eval(&x), single.eval(&x));
        }
    }

    #[test]
    fn zero_function_stays_zero() {
        let sets = vec![spiral_points(144).unwrap(), spiral_points(576).unwrap()];
        let schedule = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
        let profile = RadialProfile::wendland(3, 1).unwrap();
        let ml =
            multilevel_approximate(&schedule, |_: &[f64; 3]| 0.0, &profile, None).unwrap();
        for j in 0..2 {
            assert!(ml.level(j).values().iter().all(|v| *v == 0.0));
        }
        assert_eq!(ml.eval(&[0.0, 0.0, 1.0]), 0.0);
    }

    #[test]
    fn telescoping_holds_clean_and_noisy() {
        let sets = vec![
            spiral_points(144).unwrap(),
            spiral_points(576).unwrap(),
            spiral_points(2304).unwrap(),
        ];
        let schedule = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
        let profile = RadialProfile::wendland(3, 1).unwrap();

        let clean = multilevel_approximate(&schedule, smooth_target, &profile, None).unwrap();
        let defect = clean.telescoping_defect(smooth_target, None);
        assert!(defect < 1e-12, "clean telescoping defect {defect:e}");

        let noise = NoiseModel {
            kind: NoiseKind::GaussianStd(0.05),
            seed: 17,
        };
        let noisy =
            multilevel_approximate(&schedule, smooth_target, &profile, Some(&noise)).unwrap();
        let defect_noisy = noisy.telescoping_defect(smooth_target, Some(&noise));
        assert!(defect_noisy < 1e-12, "noisy telescoping defect {defect_noisy:e}");
    }

    #[test]
    fn fresh_noise_per_level() {
        // The same site index at different levels must receive different
        // draws.
        let noise = NoiseModel {
            kind: NoiseKind::GaussianStd(0.1),
            seed: 5,
        };
        let a = noise.draw(level_noise_index(0, 7));
        let b = noise.draw(level_noise_index(1, 7));
        assert_ne!(a, b);
    }

    #[test]
    fn clean_errors_decrease_per_level() {
        let sets = vec![
            spiral_points(144).unwrap(),
            spiral_points(576).unwrap(),
            spiral_points(2304).unwrap(),
        ];
        let schedule = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
        let profile = RadialProfile::wendland(3, 1).unwrap();
        let ml = multilevel_approximate(&schedule, smooth_target, &profile, None).unwrap();
        let recs = ml.records();
        assert_eq!(recs.len(), 3);
        for w in recs.windows(2) {
            assert!(
                w[1].l2 < w[0].l2,
                "level {} l2 {} did not improve on {}",
                w[1].level,
                w[1].l2,
                w[0].l2
            );
        }
        // Geometric decay: the worst per-level ratio stays below 1.
        let worst = recs
            .windows(2)
            .map(|w| w[1].l2 / w[0].l2)
            .fold(0.0f64, f64::max);
        assert!(worst < 1.0, "per-level ratio {worst}");
    }

    #[test]
    fn expansion_matches_recursion() {
        for n in 1..=3 {
            let rep = expand_operators(n).unwrap();
            assert!(
                rep.max_deviation < 1e-10,
                "n={n}: recursion vs expansion deviates by {:e}",
                rep.max_deviation
            );
            assert!(
                rep.residual_max_deviation < 1e-10,
                "n={n}: residual deviates by {:e}",
                rep.residual_max_deviation
            );
        }
        assert!(expand_operators(0).is_err());
        assert!(expand_operators(5).is_err());
    }

    #[test]
    fn level_csv_format() {
        let sets = vec![spiral_points(144).unwrap(), spiral_points(576).unwrap()];
        let schedule = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
        let profile = RadialProfile::wendland(3, 1).unwrap();
        let ml = multilevel_approximate(&schedule, smooth_target, &profile, None).unwrap();
        let mut buf = Vec::new();
        ml.write_level_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("level,N,rho,L2err,Linferr"));
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().starts_with("1,144,"));
    }
}
