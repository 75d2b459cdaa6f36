use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use morphopt::driver::export::read_vtk;
use morphopt::driver::render::composite_export;
use morphopt::driver::{parse_config, run, ProblemSpec};
use morphopt::verify::{fd_gradient_check, profile_coefficient, with_tight_solver, ProfilePotential, ProfileSettings};
use morphopt::{DesignField, Mesh, StimulusField, VectorField};

#[derive(Parser)]
#[command(name = "morphopt", version, about = "Phase-field co-design of compliant morphing structures")]
struct Cli {
    /// Fail if the selected command would draw random numbers.
    #[arg(long, global = true)]
    seed_free: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Problem configuration file.
    #[arg(long)]
    config: PathBuf,

    /// Dotted KEY=VALUE override, applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ProblemSpec> {
        parse_config(&self.config, &self.overrides).with_context(|| format!("loading {}", self.config.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Potential {
    Multiwell,
    DoubleWell,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the configured problem and write all artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare adjoint gradients against central differences at random iterates.
    CheckGradient {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Linear solver tolerance used for the difference quotients.
        #[arg(long, default_value_t = 1e-12)]
        solver_rtol: f64,
        /// Exit with failure above this relative error.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Optimal 1D transition energies for a sequence of ε, as CSV on stdout.
    ProfileOracle {
        #[arg(long, value_delimiter = ',', default_value = "0.08,0.04,0.02,0.01")]
        epsilons: Vec<f64>,
        #[arg(long, value_enum, default_value = "multiwell")]
        potential: Potential,
        /// Phases joined by the transition (0 void, 1 passive, 2 responsive).
        #[arg(long, default_value_t = 0)]
        from: usize,
        #[arg(long, default_value_t = 2)]
        to: usize,
        #[arg(long, default_value_t = 4000)]
        intervals: usize,
    },
    /// Composite image of a saved field file.
    Render {
        /// VTK file written by `run`.
        #[arg(long)]
        vtk: PathBuf,
        /// Output image (plain PPM).
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 600)]
        width: usize,
    },
    /// Print mesh statistics for a configuration.
    MeshInfo {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

fn configure_threads() -> Result<()> {
    let threads = match std::env::var("MORPHOPT_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .with_context(|| format!("MORPHOPT_THREADS must be a non-negative integer, got `{v}`"))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .context("configuring the worker pool")?;
    Ok(())
}

fn cmd_run(config: &ConfigArgs, out: Option<&Path>) -> Result<()> {
    let mut spec = config.load()?;
    if let Some(dir) = out {
        spec.output.dir = dir.to_path_buf();
    }
    let artifacts = run(&spec).with_context(|| format!("run failed; partial output in {}", spec.output.dir.display()))?;
    let s = &artifacts.summary;
    println!(
        "{}: {} after {} iterations; objective {:.6e} (tracking {:.6e}); volume fractions {:.4}/{:.4}; connected: {}",
        s.name, s.termination, s.iterations, s.breakdown.total, s.breakdown.tracking, s.vol_frac2, s.vol_frac3, s.connected
    );
    println!("artifacts in {}", artifacts.dir.display());
    Ok(())
}

fn cmd_check_gradient(
    config: &ConfigArgs,
    trials: usize,
    delta: f64,
    seed: u64,
    solver_rtol: f64,
    tol: f64,
) -> Result<bool> {
    let spec = config.load()?;
    let problem = with_tight_solver(&spec.build_problem()?, solver_rtol);
    let report = fd_gradient_check(&problem, trials, delta, seed)?;
    println!("trials: {}", report.trials);
    println!("design max relative error: {:.3e}", report.design);
    println!("stimulus max relative error: {:.3e}", report.stimulus);
    let ok = report.passes(tol);
    println!("{} (tolerance {tol:.1e})", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn cmd_profile(epsilons: &[f64], potential: Potential, from: usize, to: usize, intervals: usize) -> Result<()> {
    let potential = match potential {
        Potential::Multiwell => ProfilePotential::MultiWell { from, to },
        Potential::DoubleWell => ProfilePotential::DoubleWell { scale: 1.0 },
    };
    let settings = ProfileSettings {
        intervals,
        ..ProfileSettings::default()
    };
    let points = profile_coefficient(epsilons, potential, &settings)?;
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    w.write_record(["epsilon", "energy", "off_edge", "iterations"])?;
    for p in points {
        w.write_record([
            p.epsilon.to_string(),
            p.energy.to_string(),
            p.off_edge.to_string(),
            p.iterations.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_render(vtk: &Path, out: &Path, scale: f64, width: usize) -> Result<()> {
    let data = read_vtk(BufReader::new(File::open(vtk).with_context(|| format!("opening {}", vtk.display()))?))?;
    let mesh = Mesh::new(data.points.clone(), data.triangles.clone(), Vec::new(), Vec::new(), 0.0)?;
    let get = |name: &str| -> Result<Vec<f64>> {
        data.scalar(name)
            .map(<[f64]>::to_vec)
            .with_context(|| format!("{} has no `{name}` field", vtk.display()))
    };
    let design = DesignField {
        rho2: get("rho2")?,
        rho3: get("rho3")?,
    };
    let mut cases = Vec::new();
    let mut displacement = Vec::new();
    for j in 1.. {
        let (Some(s), Some(u)) = (data.scalar(&format!("s{j}")), data.vector(&format!("u{j}"))) else {
            break;
        };
        cases.push(s.to_vec());
        displacement.push(VectorField::from_dofs(u.to_vec()));
    }
    if cases.is_empty() {
        bail!("{} has no s1/u1 fields", vtk.display());
    }
    let rendered = composite_export(&mesh, &design, &StimulusField { cases }, &displacement, scale, width)?;
    let mut w = BufWriter::new(File::create(out)?);
    rendered.image.write_ppm(&mut w)?;
    w.flush()?;
    println!(
        "wrote {} ({}x{}, {} inverted triangles)",
        out.display(),
        rendered.image.width,
        rendered.image.height,
        rendered.inverted
    );
    Ok(())
}

fn cmd_mesh_info(config: &ConfigArgs) -> Result<()> {
    let spec = config.load()?;
    let mesh = spec.build_mesh()?;
    println!("name: {}", spec.name);
    println!("nodes: {}", mesh.num_nodes());
    println!("triangles: {}", mesh.num_triangles());
    println!("dofs: {}", 2 * mesh.num_nodes());
    println!("dirichlet nodes: {}", mesh.dirichlet_nodes.len());
    println!("target elements: {}", mesh.target_elements.len());
    println!("domain area: {}", mesh.total_area());
    println!("target area: {}", mesh.target_area());
    println!("h: {}  epsilon: {}", spec.h, spec.regularization.epsilon);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    if cli.seed_free && matches!(cli.command, Command::CheckGradient { .. }) {
        bail!("check-gradient samples random iterates and cannot run with --seed-free");
    }
    match &cli.command {
        Command::Run { config, out } => cmd_run(config, out.as_deref()).map(|_| true),
        Command::CheckGradient {
            config,
            trials,
            delta,
            seed,
            solver_rtol,
            tol,
        } => cmd_check_gradient(config, *trials, *delta, *seed, *solver_rtol, *tol),
        Command::ProfileOracle {
            epsilons,
            potential,
            from,
            to,
            intervals,
        } => cmd_profile(epsilons, *potential, *from, *to, *intervals).map(|_| true),
        Command::Render { vtk, out, scale, width } => cmd_render(vtk, out, *scale, *width).map(|_| true),
        Command::MeshInfo { config } => cmd_mesh_info(config).map(|_| true),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| dispatch(cli));
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
