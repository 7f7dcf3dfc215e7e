use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bwb_core::bootstrap::{
    band_csv, cdf_csv, cdf_from_csv, check_grid, confidence_bands, linear_grid, run_bootstrap, BootstrapReport,
    EmpiricalCdf, StatKind, WeightScheme,
};
use bwb_core::dataset::{self, matrix_to_csv};
use bwb_core::estimators::{self, DiagnosticBundle};
use bwb_core::geometry::{condition_number, spectrum_diag};
use bwb_core::sbm::{self, SbmConfig};
use bwb_core::truth::{run_truth, SbmSource};
use bwb_core::{barycenter, ks_distance, mean_map_check, BarycenterResult, SampleSet, SolverConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

#[derive(Parser, Debug)]
#[command(name = "bwb", version, about = "Bures-Wasserstein barycenters with multiplier-bootstrap uncertainty")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "BWB_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a block-model dataset of inverse regularized Laplacians.
    Gen(GenArgs),
    /// Fit the barycenter of a dataset.
    Barycenter(BarycenterArgs),
    /// Multiplier bootstrap around the dataset barycenter.
    Bootstrap(BootstrapArgs),
    /// Monte-Carlo reference distribution of the statistic.
    Truth(TruthArgs),
    /// Operator diagnostics and Gaussian-limit draws.
    Diag(DiagArgs),
    /// Compare CDFs from truth, bootstrap and Gaussian runs.
    Compare(CompareArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Preset {
    /// d = 20, two blocks of 10 ± 2 nodes.
    Paper6,
    /// d = 8, two fixed blocks of 4 nodes.
    Desk,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Stat {
    Bw,
    Frob,
}

impl From<Stat> for StatKind {
    fn from(s: Stat) -> Self {
        match s {
            Stat::Bw => StatKind::BuresWasserstein,
            Stat::Frob => StatKind::Frobenius,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Scheme {
    Bern2,
    Po1,
    Exp1,
    /// Every weight equal to one.
    Ones,
}

impl Scheme {
    fn build(self, n: usize) -> WeightScheme {
        match self {
            Scheme::Bern2 => WeightScheme::Bern2,
            Scheme::Po1 => WeightScheme::Po1,
            Scheme::Exp1 => WeightScheme::Exp1,
            Scheme::Ones => WeightScheme::Provided(vec![1.0; n]),
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SbmArgs {
    #[arg(long, value_enum, default_value = "paper6")]
    preset: Preset,
    /// Node count; must match the preset.
    #[arg(long)]
    d: Option<usize>,
    /// Laplacian regularization in `(L + rI)^{-1}`.
    #[arg(long, default_value_t = 1.0)]
    r: f64,
}

impl SbmArgs {
    fn config(&self, seed: u64) -> Result<SbmConfig> {
        let cfg = match self.preset {
            Preset::Paper6 => SbmConfig::full_preset(seed),
            Preset::Desk => SbmConfig::desk_preset(seed),
        };
        if let Some(d) = self.d {
            if d != cfg.d {
                bail!(bwb_core::BwError::Config(format!(
                    "preset {:?} fixes d = {}, got --d {d}",
                    self.preset, cfg.d
                )));
            }
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SolverConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    sbm: SbmArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BarycenterArgs {
    /// Dataset directory or manifest file.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BootstrapArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "bw")]
    stat: Stat,
    /// Number of bootstrap replicates.
    #[arg(long = "B", default_value_t = 100)]
    b: usize,
    #[arg(long, value_enum, default_value = "bern2")]
    scheme: Scheme,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct TruthArgs {
    #[command(flatten)]
    sbm: SbmArgs,
    /// Sample size of each repetition.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Sample size of the reference barycenter.
    #[arg(long, default_value_t = 20_000)]
    n_truth: usize,
    #[arg(long, default_value_t = 500)]
    n_reps: usize,
    #[arg(long, value_enum, default_value = "bw")]
    stat: Stat,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DiagArgs {
    #[arg(long)]
    data: PathBuf,
    /// Reference dataset for the q/f/eta discrepancies.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Bootstrap report to compare the Gaussian draws with.
    #[arg(long)]
    bootstrap: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "bw")]
    stat: Stat,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// True CDF table (CSV) or a bootstrap report (JSON).
    #[arg(long)]
    truth: PathBuf,
    /// Bootstrap reports (JSON) or CDF tables (CSV); repeatable.
    #[arg(long, required = true)]
    bootstrap: Vec<PathBuf>,
    /// Gaussian CDF table.
    #[arg(long)]
    gaussian: Option<PathBuf>,
    /// Explicit evaluation grid, comma separated and ascending.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Number of grid points when no explicit grid is given.
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long)]
    out: PathBuf,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn require_positive(name: &str, value: usize) -> Result<()> {
    if value == 0 {
        bail!(bwb_core::BwError::Config(format!("{name} must be at least 1")));
    }
    Ok(())
}

fn fit(data: &SampleSet, solver: &SolverConfig) -> Result<BarycenterResult> {
    let res = barycenter(data, solver)?;
    if !res.converged {
        eprintln!(
            "warning: barycenter stopped after {} iterations at residual {:.3e}",
            res.iterations, res.residual
        );
    }
    Ok(res)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    require_positive("n", args.n)?;
    let cfg = args.sbm.config(args.seed)?;
    let mats = sbm::generate_dataset(&cfg, args.sbm.r, args.n, 0)?;
    let echo = json!({ "preset": format!("{:?}", args.sbm.preset).to_lowercase(), "sbm": cfg, "r": args.sbm.r });
    let manifest = dataset::save_dataset(&mats, &args.out, Some(args.seed), echo)?;
    println!(
        "generated d = {}, n = {}, seed = {} into {}",
        manifest.d,
        manifest.n,
        args.seed,
        args.out.display()
    );
    Ok(())
}

fn cmd_barycenter(args: BarycenterArgs) -> Result<()> {
    let solver = args.solver.config()?;
    let data = dataset::load_dataset(&args.data)?;
    let res = fit(&data, &solver)?;
    create_dir(&args.out)?;
    write(&args.out.join("barycenter.csv"), &matrix_to_csv(res.q.matrix()))?;
    let log = json!({
        "d": data.dim(),
        "n": data.len(),
        "converged": res.converged,
        "iterations": res.iterations,
        "residual": res.residual,
        "mean_map": mean_map_check(&res.q, &data)?,
        "tol": solver.tol,
    });
    write_json(&args.out.join("barycenter.json"), &log)?;
    println!(
        "converged = {}, iterations = {}, residual = {:.3e}",
        res.converged, res.iterations, res.residual
    );
    Ok(())
}

fn cmd_bootstrap(args: BootstrapArgs) -> Result<()> {
    require_positive("B", args.b)?;
    let solver = args.solver.config()?;
    let data = dataset::load_dataset(&args.data)?;
    let q_n = fit(&data, &solver)?.q;
    let scheme = args.scheme.build(data.len());
    let mut report = run_bootstrap(&data, &q_n, args.b, &scheme, args.stat.into(), &solver, args.seed)?;
    if matches!(args.scheme, Scheme::Ones) {
        report.scheme = "ones".into();
    }
    create_dir(&args.out)?;
    write(&args.out.join("bootstrap.json"), &(report.to_json() + "\n"))?;
    write(&args.out.join("bootstrap_cdf.csv"), &cdf_csv(&report.cdf()))?;
    println!(
        "{} replicates ({} rejected draws), median {:.4}",
        report.replicates.len(),
        report.rejected_draws,
        report.quantiles.get("0.5").copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn cmd_truth(args: TruthArgs) -> Result<()> {
    require_positive("n", args.n)?;
    require_positive("n_truth", args.n_truth)?;
    require_positive("n_reps", args.n_reps)?;
    let solver = args.solver.config()?;
    let source = SbmSource {
        config: args.sbm.config(args.seed)?,
        r: args.sbm.r,
    };
    let report = run_truth(&source, args.n_truth, args.n, args.n_reps, args.stat.into(), &solver, args.seed)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    create_dir(&args.out)?;
    write(&args.out.join("truth.csv"), &cdf_csv(&report.cdf()))?;
    write_json(&args.out.join("truth.json"), &report)?;
    write(&args.out.join("reference.csv"), &matrix_to_csv(report.q_star.matrix()))?;
    println!("{} sampling replicates against a reference from {} matrices", report.n_reps, report.n_truth);
    Ok(())
}

fn spectral_summary(op: &bwb_core::SymOperator) -> serde_json::Value {
    match spectrum_diag(op) {
        Ok(s) => json!({
            "lambda1_sq": s.lambda1_sq,
            "lambda2_sq": s.lambda2_sq,
            "varkappa": s.varkappa,
            "gamma": s.gamma,
            "trace": s.trace,
        }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    }
}

fn cmd_diag(args: DiagArgs) -> Result<()> {
    require_positive("draws", args.draws)?;
    let solver = args.solver.config()?;
    let data = dataset::load_dataset(&args.data)?;
    let q_n = fit(&data, &solver)?.q;
    let bundle = DiagnosticBundle::at(&q_n, &data)?;
    let f_eig = bundle.f.eigenvalues();

    let discrepancy = match &args.reference {
        Some(path) => {
            let reference = dataset::load_dataset(path)?;
            let q_ref = fit(&reference, &solver)?.q;
            let f_ref = estimators::f_op(&q_ref, &reference, None)?;
            Some(estimators::discrepancy(&q_ref, &q_n, &f_ref, &bundle.f)?)
        }
        None => None,
    };

    let stat: StatKind = args.stat.into();
    let a = matches!(stat, StatKind::BuresWasserstein).then_some(&bundle.a);
    let draws = estimators::sample_gaussian_stat(&bundle.xi, a, args.draws, args.seed)?;
    let gaussian = EmpiricalCdf::new(draws)?;
    let ks_bootstrap = match &args.bootstrap {
        Some(path) => Some(ks_distance(&gaussian, &load_cdf(path)?)?),
        None => None,
    };

    let summary = json!({
        "d": data.dim(),
        "n": data.len(),
        "seed": args.seed,
        "stat_kind": stat,
        "trace_sigma": bundle.sigma.trace(),
        "f_lambda_min": f_eig.first(),
        "f_lambda_max": f_eig.last(),
        "kappa_f": condition_number(&bundle.f).ok(),
        "kappa_q": condition_number(&q_n).ok(),
        "xi": spectral_summary(&bundle.xi),
        "a_xi_a": spectral_summary(&bundle.a_xi_a()?),
        "discrepancy": discrepancy,
        "gaussian_draws": args.draws,
        "ks_gaussian_vs_bootstrap": ks_bootstrap,
    });
    create_dir(&args.out)?;
    write_json(&args.out.join("diag.json"), &summary)?;
    write(&args.out.join("gaussian_cdf.csv"), &cdf_csv(&gaussian))?;
    println!("tr Sigma = {:.4e}, kappa(F) = {:?}", bundle.sigma.trace(), summary["kappa_f"]);
    if let Some(ks) = ks_bootstrap {
        println!("KS(Gaussian, bootstrap) = {ks:.4}");
    }
    Ok(())
}

fn load_cdf(path: &Path) -> Result<EmpiricalCdf> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let cdf = if is_json {
        BootstrapReport::from_json(&text)?.cdf()
    } else {
        cdf_from_csv(&text)?
    };
    if cdf.is_empty() {
        bail!(bwb_core::BwError::Domain(format!("{} holds no values", path.display())));
    }
    Ok(cdf)
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let truth = load_cdf(&args.truth)?;
    let boots: Vec<EmpiricalCdf> = args.bootstrap.iter().map(|p| load_cdf(p)).collect::<Result<_>>()?;
    let gaussian = args.gaussian.as_deref().map(load_cdf).transpose()?;

    let grid = match args.grid {
        Some(g) => {
            check_grid(&g)?;
            g
        }
        None => {
            require_positive("grid_points", args.grid_points)?;
            let all = std::iter::once(&truth).chain(&boots).chain(gaussian.as_ref());
            let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
                (lo.min(c.points()[0]), hi.max(c.points()[c.len() - 1]))
            });
            linear_grid(lo, hi, args.grid_points)
        }
    };

    let ks_each: Vec<f64> = boots.iter().map(|b| ks_distance(b, &truth)).collect::<bwb_core::Result<_>>()?;
    let equal_sizes = boots.iter().all(|b| b.len() == boots[0].len());
    let ks_mean = if equal_sizes {
        Some(ks_distance(&EmpiricalCdf::pooled(&boots)?, &truth)?)
    } else {
        None
    };
    let ks_gaussian = gaussian.as_ref().map(|g| ks_distance(g, &truth)).transpose()?;

    let bands = if boots.len() >= 2 {
        confidence_bands(&boots, &grid)?
    } else {
        confidence_bands(&[boots[0].clone(), boots[0].clone()], &grid)?
    };

    let mut curves = String::from("x,truth,bootstrap_mean,gaussian\n");
    for band in &bands {
        let g = gaussian.as_ref().map_or(String::new(), |g| format!("{:.16e}", g.eval(band.x)));
        curves.push_str(&format!("{:.16e},{:.16e},{:.16e},{g}\n", band.x, truth.eval(band.x), band.mean));
    }
    let summary = json!({
        "n_bootstrap_cdfs": boots.len(),
        "grid_points": grid.len(),
        "ks_each": ks_each,
        "ks_mean_bootstrap": ks_mean,
        "ks_gaussian": ks_gaussian,
        "band_coverage": bands.iter().filter(|b| (b.lo..=b.hi).contains(&truth.eval(b.x))).count() as f64
            / bands.len().max(1) as f64,
    });
    create_dir(&args.out)?;
    write(&args.out.join("bands.csv"), &band_csv(&bands))?;
    write(&args.out.join("curves.csv"), &curves)?;
    write_json(&args.out.join("compare.json"), &summary)?;
    match ks_mean {
        Some(k) => println!("KS(mean bootstrap, truth) = {k:.4}"),
        None => println!("KS per bootstrap CDF: {ks_each:?}"),
    }
    if let Some(k) = ks_gaussian {
        println!("KS(Gaussian, truth) = {k:.4}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        require_positive("threads", t)?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Barycenter(a) => cmd_barycenter(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Truth(a) => cmd_truth(a),
        Command::Diag(a) => cmd_diag(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
