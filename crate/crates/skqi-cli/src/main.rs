//! Command-line front end for the sphere quasi-interpolation experiments.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skqi::harness::{
    run_approx, run_convergence, run_multilevel_compare, run_noise_compare, run_timing,
    ExperimentConfig,
};
use skqi::kernel::{
    profile_for_label, spectrum_quadrature, spectrum_wendland_closed_upto, KernelFamily,
    ZonalKernel,
};
use skqi::sphere::{random_points, save_points, spiral_points};
use skqi::{Error, Result};

#[derive(Parser)]
#[command(
    name = "skqi",
    version,
    about = "Scaled-kernel quasi-interpolation experiments on the unit sphere"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PointKindArg {
    Spiral,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    CompactSupport,
}

impl From<FamilyArg> for KernelFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Gaussian => KernelFamily::Gaussian,
            FamilyArg::CompactSupport => KernelFamily::CompactSupport,
        }
    }
}

/// Flags shared by every config-driven experiment command.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configuration's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configuration's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Full study sizes for randomized error estimates instead of the
    /// desk-scale defaults.
    #[arg(long)]
    paper_scale: bool,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        if cfg.output.is_none() {
            cfg.output = Some(PathBuf::from("out"));
        }
        if self.paper_scale {
            cfg.paper_scale = true;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generates a point set and writes it as a plain-text coordinate file.
    GenPoints {
        #[arg(long, value_enum, default_value_t = PointKindArg::Spiral)]
        kind: PointKindArg,
        /// Number of points.
        #[arg(long)]
        n: usize,
        /// Seed for random point sets.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Destination file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulates kernel eigenvalues ell -> phi_hat(ell) as CSV.
    Spectrum {
        #[arg(long, value_enum)]
        family: FamilyArg,
        /// Kernel order label m.
        #[arg(long, default_value_t = 2)]
        order: usize,
        /// Kernel scale in (0, 1).
        #[arg(long)]
        rho: f64,
        #[arg(long, default_value_t = 50)]
        l_max: usize,
        /// Destination file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Uses the finite-sum coefficients instead of radial quadrature
        /// (plain compact-support kernels only).
        #[arg(long)]
        closed_form: bool,
    },
    /// Builds one quasi-interpolant per grid entry; dumps samples and errors.
    Approx(RunArgs),
    /// Single-level versus multilevel comparison.
    Multilevel(RunArgs),
    /// Convergence study over the sample grid.
    Convergence(RunArgs),
    /// Quasi-interpolation versus filtered projection under noise.
    NoiseCompare(RunArgs),
    /// Construction plus evaluation timings (informational).
    Timing(RunArgs),
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenPoints { kind, n, seed, out } => {
            let pts = match kind {
                PointKindArg::Spiral => spiral_points(n)?,
                PointKindArg::Random => random_points(n, 2, seed)?,
            };
            save_points(&out, &pts)?;
            println!("wrote {} points to {}", pts.len(), out.display());
        }
        Command::Spectrum {
            family,
            order,
            rho,
            l_max,
            out,
            closed_form,
        } => {
            let family: KernelFamily = family.into();
            let spectrum = if closed_form {
                if family != KernelFamily::CompactSupport {
                    return Err(Error::InvalidArgument(
                        "--closed-form applies to the compact-support family only".into(),
                    ));
                }
                if !(rho > 0.0 && rho < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "need 0 < rho < 1, got {rho}"
                    )));
                }
                let k = order / 2;
                spectrum_wendland_closed_upto(l_max, rho, 0, k)
            } else {
                let profile = profile_for_label(
                    family,
                    order,
                    family == KernelFamily::Gaussian && order > 2,
                )?;
                let kernel = ZonalKernel::new(profile, rho, 2)?;
                spectrum_quadrature(&kernel, l_max)
            };
            match out {
                Some(path) => {
                    let mut f = fs::File::create(&path)?;
                    spectrum.write_csv(&mut f)?;
                    println!("wrote {} coefficients to {}", l_max + 1, path.display());
                }
                None => {
                    let mut buf = Vec::new();
                    spectrum.write_csv(&mut buf)?;
                    print!("{}", String::from_utf8_lossy(&buf));
                }
            }
        }
        Command::Approx(args) => {
            let cfg = args.load()?;
            let rows = run_approx(&cfg)?;
            for r in &rows {
                println!(
                    "N = {:6}  L2 = {:.6e}  Linf = {:.6e}  ({:.2}s)",
                    r.n, r.l2, r.linf, r.wall_time_s
                );
            }
            report_output(&cfg);
        }
        Command::Convergence(args) => {
            let cfg = args.load()?;
            let res = run_convergence(&cfg)?;
            for r in &res.rows {
                match r.mmse {
                    Some(m) => println!(
                        "N = {:6}  L2 = {:.6e}  Linf = {:.6e}  MMSE = {:.6e}  ({:.2}s)",
                        r.n, r.l2, r.linf, m, r.wall_time_s
                    ),
                    None => println!(
                        "N = {:6}  L2 = {:.6e}  Linf = {:.6e}  ({:.2}s)",
                        r.n, r.l2, r.linf, r.wall_time_s
                    ),
                }
            }
            if let Some(s) = res.slope_l2 {
                println!("fitted L2 slope:   {s:.4}");
            }
            if let Some(s) = res.slope_linf {
                println!("fitted Linf slope: {s:.4}");
            }
            if let Some(s) = res.slope_mmse {
                println!("fitted MMSE slope: {s:.4}");
            }
            report_output(&cfg);
        }
        Command::Multilevel(args) => {
            let cfg = args.load()?;
            let res = run_multilevel_compare(&cfg)?;
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            for r in &res.rows {
                println!(
                    "sigma = {:<5} level {} (N = {:6})  single L2 = {:.6e}  multi L2 = {:.6e}",
                    r.sigma, r.level, r.n, r.single_l2, r.multi_l2
                );
            }
            report_output(&cfg);
        }
        Command::NoiseCompare(args) => {
            let cfg = args.load()?;
            let res = run_noise_compare(&cfg)?;
            for (i, n) in cfg.n_grid.iter().enumerate() {
                println!(
                    "N = {:6}  qmcqi L2 = {:.6e}  mcqi L2 = {:.6e}  fhi(L={}) L2 = {:.6e}",
                    n,
                    res.qmcqi[i].l2,
                    res.mcqi[i].l2,
                    res.fhi_degrees[i],
                    res.fhi[i].l2
                );
            }
            report_output(&cfg);
        }
        Command::Timing(args) => {
            let cfg = args.load()?;
            let res = run_timing(&cfg)?;
            for r in &res.rows {
                println!("{:<6} N = {:6}  {:.4}s", r.method, r.n, r.time_s);
            }
            report_output(&cfg);
        }
    }
    Ok(())
}

fn report_output(cfg: &ExperimentConfig) {
    if let Some(dir) = &cfg.output {
        println!("artifacts in {}", dir.display());
    }
}
