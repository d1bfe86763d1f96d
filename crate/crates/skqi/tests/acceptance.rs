//! Acceptance suite: one test per criterion. Every test prints its measured
//! quantities before asserting, so failures carry the observed numbers.

use std::time::Instant;

use skqi::baselines::filter_h;
use skqi::harness::{
    franke, run_convergence, run_multilevel_compare, run_noise_compare, Experiment,
    ExperimentConfig, KernelConfig, NoiseConfig, RhoRule, SiteKind, TargetConfig,
};
use skqi::harmonics::{eval_harmonic, HarmonicIndex};
use skqi::kernel::{
    spectrum_quadrature, spectrum_wendland_closed_upto, KernelFamily, RadialProfile, ZonalKernel,
};
use skqi::metrics::{fit_slope, l2_error};
use skqi::multilevel::{build_schedule, expand_operators, multilevel_approximate, HMode};
use skqi::quasi::{convolve_rule, qi_mc};
use skqi::sphere::{product_quadrature, random_points, spiral_points, ProductRule};

/// Ratio between norms of the uniform measure with total mass 4 pi and the
/// probability measure used by the library: reference error tables quote
/// the former, `l2_error` reports the latter.
const SQRT_4PI: f64 = 3.544_907_701_811_032;

fn base_config(experiment: Experiment) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        seed: 1,
        output: None,
        point_kind: SiteKind::Spiral,
        n_grid: vec![],
        nu: 1.5,
        h_mode: HMode::Nominal,
        noise_levels: vec![],
        trials: 20,
        eval_points: 5000,
        filter_a: 1.2,
        paper_scale: false,
        kernel: KernelConfig {
            family: KernelFamily::Gaussian,
            order: 2,
            moment_corrected: None,
        },
        rho_rule: RhoRule::PowQmc {
            exponent: -0.25,
            c_rho: 1.0,
        },
        target: TargetConfig::Franke,
        noise: None,
    }
}

#[test]
fn criterion_01_funk_hecke_eigenvalue_identity() {
    let started = Instant::now();
    let pts = random_points(20, 2, 20_260_816).unwrap();
    let xs: Vec<[f64; 3]> = (0..pts.len()).map(|i| pts.xyz(i)).collect();

    let mut worst = 0.0f64;
    for family in ["gaussian", "compact-support"] {
        for &rho in &[0.05, 0.1, 0.2] {
            let profile = match family {
                "gaussian" => RadialProfile::gaussian(),
                _ => RadialProfile::wendland(3, 1).unwrap(),
            };
            let kernel = ZonalKernel::new(profile, rho, 2).unwrap();
            let spectrum = spectrum_quadrature(&kernel, 10);
            let degree = if kernel.is_compact() {
                (200.0 / rho).ceil() as usize
            } else {
                400
            };
            let rule = ProductRule::new(degree);
            for ell in 0..=10usize {
                let k = if ell % 2 == 0 { ell + 1 } else { 2 * ell + 1 };
                let idx = HarmonicIndex::new(ell, k).unwrap();
                let want_factor = spectrum.coeff(ell);
                for &x in &xs {
                    let conv = convolve_rule(&kernel, &rule, |y| eval_harmonic(idx, &y), x);
                    let want = want_factor * eval_harmonic(idx, &x);
                    worst = worst.max((conv - want).abs());
                }
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 01: max |(C_phi Y)(x) - phi_hat(ell) Y(x)| = {worst:.3e} \
         over both families, rho in {{0.05, 0.1, 0.2}}, ell <= 10, 20 points ({elapsed:.1}s)"
    );
    assert!(worst < 1e-7, "eigenvalue identity violated: {worst:.3e} >= 1e-7");
    assert!(elapsed < 10.0, "runtime budget exceeded: {elapsed:.1}s >= 10s");
}

#[test]
fn criterion_02_closed_form_matches_quadrature_spectrum() {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for &k in &[1usize, 2] {
        for &rho in &[0.05, 0.1, 0.2] {
            let closed = spectrum_wendland_closed_upto(50, rho, 0, k);
            let profile = RadialProfile::wendland(k as u32 + 2, k as u32).unwrap();
            let kernel = ZonalKernel::new(profile, rho, 2).unwrap();
            let quad = spectrum_quadrature(&kernel, 50);
            for ell in 0..=50 {
                worst = worst.max((closed.coeff(ell) - quad.coeff(ell)).abs());
            }
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 02: max |closed-form - quadrature| coefficient gap = {worst:.3e} \
         for smoothness k in {{1, 2}}, ell <= 50 ({elapsed:.1}s)"
    );
    assert!(worst < 1e-8, "spectra disagree: {worst:.3e} >= 1e-8");
    assert!(elapsed < 5.0, "runtime budget exceeded: {elapsed:.1}s >= 5s");
}

#[test]
fn criterion_03_norm_scalings_track_rho() {
    let started = Instant::now();
    let rhos = [0.4, 0.2, 0.1, 0.05];
    for (name, profile) in [
        ("gaussian", RadialProfile::gaussian()),
        ("compact-support", RadialProfile::wendland(3, 1).unwrap()),
    ] {
        let mut inf_scaled = Vec::new();
        let mut l2_scaled = Vec::new();
        for &rho in &rhos {
            let kernel = ZonalKernel::new(profile.clone(), rho, 2).unwrap();
            inf_scaled.push(kernel.linf_norm() * rho * rho);
            l2_scaled.push(kernel.l2_norm() * rho);
        }
        let spread = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(0.0f64, f64::max);
            hi / lo
        };
        let inf_ratio = spread(&inf_scaled);
        let l2_ratio = spread(&l2_scaled);
        println!(
            "criterion 03 [{name}]: sup-norm * rho^2 spread = {inf_ratio:.4}, \
             L2-norm * rho spread = {l2_ratio:.4} across rho in {rhos:?}"
        );
        assert!(inf_ratio < 2.0, "{name}: sup-norm scaling varies {inf_ratio:.3}x >= 2x");
        assert!(l2_ratio < 2.0, "{name}: L2-norm scaling varies {l2_ratio:.3}x >= 2x");
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion 03: ({elapsed:.1}s)");
    assert!(elapsed < 5.0, "runtime budget exceeded: {elapsed:.1}s >= 5s");
}

#[test]
fn criterion_04_deterministic_convergence_slope() {
    let started = Instant::now();
    let mut cfg = base_config(Experiment::Convergence);
    cfg.n_grid = vec![1024, 2048, 4096, 8192, 16384];
    cfg.kernel = KernelConfig {
        family: KernelFamily::Gaussian,
        order: 4,
        moment_corrected: None,
    };
    cfg.target = TargetConfig::Harmonic { ell: 6, k: 4 };
    let res = run_convergence(&cfg).unwrap();
    let slope = res.slope_l2.unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    for r in &res.rows {
        println!("criterion 04: N = {:6}  L2 = {:.6e}", r.n, r.l2);
    }
    println!("criterion 04: fitted L2 slope = {slope:.4}, expected -0.96 +/- 0.2 ({elapsed:.1}s)");
    assert!(
        (slope + 0.96).abs() <= 0.2,
        "slope {slope:.4} outside -0.96 +/- 0.2"
    );
    assert!(elapsed < 300.0, "runtime budget exceeded: {elapsed:.1}s >= 300s");
}

#[test]
fn criterion_05_random_site_mmse_slope() {
    let started = Instant::now();
    let mut cfg = base_config(Experiment::Convergence);
    cfg.point_kind = SiteKind::Random;
    cfg.n_grid = vec![1024, 4096, 16384];
    cfg.rho_rule = RhoRule::PowMc {
        exponent: -0.25,
        c_rho: 1.0,
    };
    cfg.target = TargetConfig::Harmonic { ell: 6, k: 4 };
    let res = run_convergence(&cfg).unwrap();
    let slope = res.slope_mmse.unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    for r in &res.rows {
        println!(
            "criterion 05: N = {:6}  MMSE = {:.6e}",
            r.n,
            r.mmse.unwrap()
        );
    }
    println!(
        "criterion 05: fitted MMSE slope = {slope:.4}, expected -0.46 +/- 0.2 \
         (J = 20, M = 5000) ({elapsed:.1}s)"
    );
    assert!(
        (slope + 0.46).abs() <= 0.2,
        "slope {slope:.4} outside -0.46 +/- 0.2"
    );
    assert!(elapsed < 600.0, "runtime budget exceeded: {elapsed:.1}s >= 600s");
}

#[test]
fn criterion_06_multilevel_vs_single_level_under_noise() {
    let started = Instant::now();
    let mut cfg = base_config(Experiment::Multilevel);
    cfg.n_grid = vec![144, 576, 2304, 9216, 36864];
    cfg.nu = 2.3;
    cfg.kernel = KernelConfig {
        family: KernelFamily::CompactSupport,
        order: 2,
        moment_corrected: None,
    };
    cfg.rho_rule = RhoRule::PowQmc {
        exponent: -0.25,
        c_rho: 2.6,
    };
    cfg.target = TargetConfig::Franke;
    cfg.noise_levels = vec![0.01, 0.1];
    let res = run_multilevel_compare(&cfg).unwrap();

    let final_level = cfg.n_grid.len();
    let pick = |sigma: f64| {
        res.rows
            .iter()
            .find(|r| r.sigma == sigma && r.level == final_level)
            .copied()
            .unwrap()
    };
    let at_001 = pick(0.01);
    let at_010 = pick(0.1);
    let elapsed = started.elapsed().as_secs_f64();

    // Reference values are quoted in the measure with total mass 4 pi.
    let multi_target = 6.82e-3 / SQRT_4PI;
    let single_target = 2.55e-2 / SQRT_4PI;
    let ratio_001 = at_001.single_l2 / at_001.multi_l2;
    let ratio_010 = at_010.single_l2 / at_010.multi_l2;
    println!(
        "criterion 06: sigma = 0.01: multilevel L2 = {:.4e} (target {:.4e} within 2x), \
         single L2 = {:.4e} (target {:.4e} within 2x), single/multi = {:.3}",
        at_001.multi_l2, multi_target, at_001.single_l2, single_target, ratio_001
    );
    println!(
        "criterion 06: sigma = 0.10: multilevel L2 = {:.4e}, single L2 = {:.4e}, \
         single/multi = {:.3}",
        at_010.multi_l2, at_010.single_l2, ratio_010
    );
    println!("criterion 06: ({elapsed:.1}s)");
    assert!(elapsed < 600.0, "runtime budget exceeded: {elapsed:.1}s >= 600s");

    assert!(
        at_001.multi_l2 >= multi_target / 2.0 && at_001.multi_l2 <= multi_target * 2.0,
        "multilevel error {:.4e} outside factor 2 of {:.4e}",
        at_001.multi_l2,
        multi_target
    );
    assert!(
        at_001.single_l2 >= single_target / 2.0 && at_001.single_l2 <= single_target * 2.0,
        "single-level error {:.4e} outside factor 2 of {:.4e}",
        at_001.single_l2,
        single_target
    );
    assert!(
        ratio_001 >= 2.0,
        "multilevel advantage at sigma = 0.01 is {ratio_001:.3}, below 2x"
    );
    // With noise redrawn at every level, the last level's noise floor
    // matches the single-level one, which caps the achievable advantage
    // when the noise term dominates. See the project notes on this clause.
    assert!(
        ratio_010 >= 2.0,
        "multilevel advantage at sigma = 0.1 is {ratio_010:.3}, below 2x"
    );
}

#[test]
fn criterion_07_telescoping_and_expanded_operator_identities() {
    let started = Instant::now();
    let sets = vec![
        spiral_points(128).unwrap(),
        spiral_points(512).unwrap(),
        spiral_points(2048).unwrap(),
    ];
    let schedule = build_schedule(sets, 1.5, HMode::Nominal).unwrap();
    let profile = RadialProfile::wendland(3, 1).unwrap();
    let ml = multilevel_approximate(&schedule, |x| franke(x), &profile, None).unwrap();
    let defect = ml.telescoping_defect(|x| franke(x), None);
    println!("criterion 07: max |M_n f + E_n f - f| at final sites = {defect:.3e}");
    assert!(defect <= 1e-10, "telescoping defect {defect:.3e} > 1e-10");

    for n in 1..=3 {
        let rep = expand_operators(n).unwrap();
        println!(
            "criterion 07: n = {n}: |recursive - expanded| = {:.3e}, \
             residual defect = {:.3e}",
            rep.max_deviation, rep.residual_max_deviation
        );
        assert!(
            rep.max_deviation <= 1e-10,
            "expanded form deviates by {:.3e} at n = {n}",
            rep.max_deviation
        );
        assert!(
            rep.residual_max_deviation <= 1e-10,
            "expanded residual deviates by {:.3e} at n = {n}",
            rep.residual_max_deviation
        );
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion 07: ({elapsed:.1}s)");
    assert!(elapsed < 30.0, "runtime budget exceeded: {elapsed:.1}s >= 30s");
}

#[test]
fn criterion_08_noise_robustness_contrast() {
    let started = Instant::now();
    let mut cfg = base_config(Experiment::NoiseCompare);
    cfg.n_grid = vec![1024, 2048, 4096, 8192, 16384];
    cfg.kernel = KernelConfig {
        family: KernelFamily::CompactSupport,
        order: 2,
        moment_corrected: None,
    };
    cfg.target = TargetConfig::Franke;
    cfg.noise = Some(NoiseConfig::Gaussian { sigma: 0.1 });
    let res = run_noise_compare(&cfg).unwrap();

    let qi: Vec<f64> = res.qmcqi.iter().map(|r| r.l2).collect();
    let fhi: Vec<f64> = res.fhi.iter().map(|r| r.l2).collect();
    for (i, n) in cfg.n_grid.iter().enumerate() {
        println!(
            "criterion 08: N = {:6}  QI L2 = {:.6e}  FHI(L = {}) L2 = {:.6e}",
            n, qi[i], res.fhi_degrees[i], fhi[i]
        );
    }

    let strictly_decreasing = qi.windows(2).all(|w| w[1] < w[0]);
    let upper = cfg.n_grid.len() / 2;
    let ns_upper: Vec<f64> = cfg.n_grid[upper..].iter().map(|&n| n as f64).collect();
    let fhi_upper: Vec<f64> = fhi[upper..].to_vec();
    let (fhi_slope, _) = fit_slope(&ns_upper, &fhi_upper).unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    println!(
        "criterion 08: QI strictly decreasing = {strictly_decreasing}, \
         FHI upper-half slope = {fhi_slope:.4} (fails to decrease when >= -0.05) ({elapsed:.1}s)"
    );
    assert!(strictly_decreasing, "QI errors are not strictly decreasing: {qi:?}");
    assert!(
        fhi_slope >= -0.05,
        "FHI error still decreases over the upper half: slope {fhi_slope:.4}"
    );
    assert!(elapsed < 300.0, "runtime budget exceeded: {elapsed:.1}s >= 300s");
}

#[test]
fn criterion_09_failure_frequency_decays_with_n() {
    let started = Instant::now();
    let idx = HarmonicIndex::new(6, 4).unwrap();
    let target = |p: &[f64]| eval_harmonic(idx, &[p[0], p[1], p[2]]);
    let rule = product_quadrature(60);
    let profile = RadialProfile::gaussian();
    let grid = [256usize, 1024, 4096];
    let seeds: Vec<u64> = (0..200).collect();

    let mut errs_per_n: Vec<Vec<f64>> = Vec::new();
    for &n in &grid {
        let rho = (n as f64).powf(-0.25);
        let kernel = ZonalKernel::new(profile.clone(), rho, 2).unwrap();
        let errs: Vec<f64> = seeds
            .iter()
            .map(|&s| {
                let approx = qi_mc(n, s, target, kernel.clone()).unwrap();
                l2_error(
                    |x| approx.eval(x),
                    |x| eval_harmonic(idx, x),
                    &rule,
                )
            })
            .collect();
        errs_per_n.push(errs);
    }

    let median_of = |errs: &[f64]| {
        let mut sorted = errs.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        (sorted[99] + sorted[100]) / 2.0
    };
    let eps = 2.0 * median_of(&errs_per_n[0]);

    let freqs: Vec<f64> = errs_per_n
        .iter()
        .map(|errs| errs.iter().filter(|e| **e >= eps).count() as f64 / 200.0)
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    for (i, n) in grid.iter().enumerate() {
        let max = errs_per_n[i].iter().cloned().fold(0.0f64, f64::max);
        println!(
            "criterion 09: N = {:5}  median L2 = {:.4e}  max L2 = {:.4e}  \
             freq(err >= eps) = {}",
            n,
            median_of(&errs_per_n[i]),
            max,
            freqs[i]
        );
    }
    println!(
        "criterion 09: eps = 2 x median at N = 256 = {eps:.4e}; \
         failure frequencies {freqs:?} must be non-increasing ({elapsed:.1}s)"
    );
    assert!(
        freqs[0] >= freqs[1] && freqs[1] >= freqs[2],
        "failure frequency not non-increasing: {freqs:?}"
    );
    assert!(elapsed < 600.0, "runtime budget exceeded: {elapsed:.1}s >= 600s");
}

#[test]
fn criterion_10_filter_values_and_monotonicity() {
    let started = Instant::now();
    let a = 1.2;
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        assert_eq!(filter_h(x, a), 1.0, "filter must be 1 on [0, 1], broke at {x}");
    }
    for i in 0..=100 {
        let x = a + 2.0 * i as f64 / 100.0;
        assert_eq!(filter_h(x, a), 0.0, "filter must be 0 on [a, inf), broke at {x}");
    }
    let mid = filter_h(1.1, a);
    // Frozen high-precision evaluation of exp(2 exp(-2/y) / (y - 1)) at
    // y = 1/2, which is exp(-4 e^{-4}).
    let want = 0.929_356_790_202_403_2;
    println!("criterion 10: filter(1.1, 1.2) = {mid:.12}, frozen oracle {want:.12}");
    assert!(
        (mid - want).abs() < 1e-6,
        "midpoint value {mid:.12} differs from {want:.12} by >= 1e-6"
    );
    let mut prev = 1.0f64;
    for i in 0..=10_000 {
        let x = 1.0 + (a - 1.0) * i as f64 / 10_000.0;
        let h = filter_h(x, a);
        assert!(
            h <= prev + 1e-15,
            "filter increases at x = {x}: {h} > {prev}"
        );
        prev = h;
    }
    let elapsed = started.elapsed().as_secs_f64();
    println!("criterion 10: monotone non-increasing on [1, a] verified ({elapsed:.2}s)");
    assert!(elapsed < 1.0, "runtime budget exceeded: {elapsed:.2}s >= 1s");
}
