//! Experiment CLI: thin argument parsing over the library harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crushed_ice::capacity::{
    ball_capacity_classical, check_scaling, estimate_capacity_mc, ClassicalKernelSpec,
};
use crushed_ice::error::Error;
use crushed_ice::harness::{run_crushed_ice, run_dirichlet, run_schrodinger, ExperimentConfig};
use crushed_ice::model::{Ball, ObstacleSet};

#[derive(Parser)]
#[command(
    name = "cilab",
    about = "Stochastic laboratory for diffusion among many small random obstacles",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for CSV and JSON results.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Paths per environment override.
    #[arg(long)]
    paths: Option<usize>,
    /// Reduced sizes for smoke runs.
    #[arg(long)]
    quick: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Hard entrance-time ensembles against the limit clock.
    CrushedIce(RunArgs),
    /// Soft-potential clocks against hard and shrunk entrance times.
    Schrodinger(RunArgs),
    /// Hard-obstacle Dirichlet solutions against the relaxed limit.
    Dirichlet(RunArgs),
    /// Closed-form and Monte Carlo capacity battery.
    Capacity {
        /// Paths for the Monte Carlo estimates.
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 0x0c1e)]
        seed: u64,
        /// Optional config whose model gets a scaling check.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quick: bool,
    },
    /// Fast closed-form self-checks.
    Selftest {
        #[arg(long)]
        quick: bool,
    },
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        cfg.model.seed = seed;
    }
    if let Some(paths) = args.paths {
        cfg.paths_per_env = paths;
    }
    if args.quick {
        cfg.quicken();
    }
    Ok(cfg)
}

fn finish(result: Result<crushed_ice::harness::ExperimentResult, Error>) -> ExitCode {
    match result {
        Ok(res) => {
            for w in &res.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} statistics in {:.1}s",
                res.experiment,
                res.rows.len(),
                res.metadata.elapsed_secs
            );
            ExitCode::SUCCESS
        }
        Err(Error::ScalingViolation(msg)) => {
            eprintln!("hypothesis violation: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn capacity_battery(
    paths: usize,
    seed: u64,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    quick: bool,
) -> ExitCode {
    let paths = if quick { paths.min(20_000) } else { paths };
    let spec3 = ClassicalKernelSpec::new(3).unwrap();
    let mut report = serde_json::Map::new();

    let mut rows = Vec::new();
    for r in [0.05, 0.1, 0.5] {
        let exact = ball_capacity_classical(&spec3, r).unwrap();
        let set = ObstacleSet::new(
            3,
            vec![Ball {
                center: [0.0; 3],
                radius: r,
            }],
        )
        .unwrap();
        let launch = (2.0 * r).max(0.5);
        let est = match estimate_capacity_mc(&set, launch, 100.0 * launch, paths, seed) {
            Ok(e) => e,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        };
        let sigmas = if est.capacity.stderr > 0.0 {
            (est.capacity.value - exact).abs() / est.capacity.stderr
        } else {
            0.0
        };
        println!(
            "ball r = {r}: exact {exact:.6}, MC {:.6} +- {:.6} ({sigmas:.2} sigma)",
            est.capacity.value, est.capacity.stderr
        );
        rows.push(serde_json::json!({
            "radius": r,
            "exact": exact,
            "mc": est.capacity.value,
            "stderr": est.capacity.stderr,
        }));
    }
    report.insert("balls".into(), serde_json::Value::Array(rows));

    if let Some(path) = config {
        match std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(e.to_string()))
            .and_then(|text| ExperimentConfig::from_toml(&text))
        {
            Ok(cfg) => {
                let scaling = check_scaling(&cfg.model, 4.0);
                println!(
                    "scaling: sup = {:.4}, bounded = {}",
                    scaling.sup, scaling.bounded
                );
                report.insert(
                    "scaling".into(),
                    serde_json::to_value(&scaling).unwrap_or_default(),
                );
                if !scaling.bounded {
                    eprintln!("hypothesis violation: capacity scaling unbounded");
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        }
    }

    if let Some(dir) = out {
        if let Err(e) = std::fs::create_dir_all(&dir).and_then(|_| {
            std::fs::write(
                dir.join("capacity.json"),
                serde_json::to_string_pretty(&serde_json::Value::Object(report)).unwrap(),
            )
        }) {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    ExitCode::SUCCESS
}

fn selftest(quick: bool) -> ExitCode {
    use crushed_ice::fields::ScalarField;
    use crushed_ice::energy::GreenKernel;
    use crushed_ice::solvers::{solve_fd_reference, DirichletProblem, GridSpec};

    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "ok" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    let pi = std::f64::consts::PI;
    let k3 = ClassicalKernelSpec::new(3).unwrap();
    let k2 = ClassicalKernelSpec::new(2).unwrap();
    check(
        "classical kernel d=3 at |y-z|=1",
        (k3.kernel(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap() - 1.0 / (4.0 * pi)).abs() < 1e-12,
    );
    check(
        "ball capacity d=3",
        (k3.ball_capacity(1.0).unwrap() - 4.0 * pi).abs() < 1e-12,
    );
    check(
        "ball capacity d=2 at r = 1/e",
        (k2.ball_capacity((-1.0f64).exp()).unwrap() - 2.0 * pi).abs() < 1e-12,
    );
    let g = GreenKernel::new(3, 1.0).unwrap();
    check(
        "resolvent kernel d=3 at r=1",
        (g.at_distance(1.0).unwrap() - (-1.0f64).exp() / (4.0 * pi)).abs() < 1e-12,
    );

    // Indexed vs brute-force obstacle queries.
    let mut rng = crushed_ice::rng::substream(7, &[1]);
    use rand::Rng as _;
    let balls: Vec<Ball> = (0..if quick { 100 } else { 500 })
        .map(|_| Ball {
            center: [
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
            ],
            radius: rng.random_range(0.001..0.02),
        })
        .collect();
    let set = ObstacleSet::new(3, balls).unwrap();
    let mut agree = true;
    for _ in 0..if quick { 1000 } else { 10_000 } {
        let p = [
            rng.random_range(-0.2..1.2),
            rng.random_range(-0.2..1.2),
            rng.random_range(-0.2..1.2),
        ];
        if (set.nearest_distance(&p) - set.nearest_distance_brute(&p)).abs() > 1e-12 {
            agree = false;
            break;
        }
    }
    check("indexed vs brute-force obstacle distance", agree);

    // Constant solution of the grid solver.
    let p = DirichletProblem::new(1.0, ScalarField::constant(1.0), ScalarField::constant(1.0))
        .unwrap()
        .with_rate(ScalarField::constant(2.0))
        .unwrap();
    let grid = GridSpec {
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        m: 17,
    };
    let ok = solve_fd_reference(&grid, &p, None)
        .map(|sol| sol.values.iter().all(|v| (v - 1.0).abs() < 1e-7))
        .unwrap_or(false);
    check("grid solver constant solution", ok);

    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::CrushedIce(args) => match load_config(&args) {
            Ok(cfg) => finish(run_crushed_ice(&cfg, args.out.as_deref())),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Schrodinger(args) => match load_config(&args) {
            Ok(cfg) => finish(run_schrodinger(&cfg, args.out.as_deref())),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Dirichlet(args) => match load_config(&args) {
            Ok(cfg) => finish(run_dirichlet(&cfg, args.out.as_deref())),
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Capacity {
            paths,
            seed,
            config,
            out,
            quick,
        } => capacity_battery(paths, seed, config, out, quick),
        Command::Selftest { quick } => selftest(quick),
    }
}
