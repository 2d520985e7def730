use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, ValueEnum};
use log::info;

use rmtr::rmtr::CoarseModelKind;
use rmtr::sim::{emit_csv, summary_text, Method, ProblemSpec, Scenario, SimEvent, Simulation, SolverChoice};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SolverArg {
    Tr,
    Rmtr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    First,
    Galerkin,
    Second,
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportArg {
    None,
    Every,
    Last,
}

/// Quasi-static phase-field fracture with trust-region and multilevel
/// trust-region solvers.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML problem file; without it the `--scenario` preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used when no config file is given.
    #[arg(long, default_value = "tension")]
    scenario: String,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Number of refinements of the coarse mesh.
    #[arg(long)]
    levels: Option<usize>,
    /// Overrides the number of load steps.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "last")]
    export_fields: ExportArg,
    /// Accepted for reproducible scripting; all solvers are deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(args: Args) -> anyhow::Result<bool> {
    let mut spec = match &args.config {
        Some(path) => ProblemSpec::from_file(path)?,
        None => ProblemSpec::preset(args.scenario.parse::<Scenario>()?),
    };
    if let Some(levels) = args.levels {
        spec.geometry.levels = levels;
    }
    if let Some(steps) = args.steps {
        spec.steps = steps;
    }
    if let Some(s) = args.solver {
        spec.solver.method = match s {
            SolverArg::Tr => Method::Tr,
            SolverArg::Rmtr => Method::Rmtr,
        };
    }
    if let Some(m) = args.model {
        spec.solver.rmtr.model = match m {
            ModelArg::First => CoarseModelKind::FirstOrder,
            ModelArg::Galerkin => CoarseModelKind::Galerkin,
            ModelArg::Second => CoarseModelKind::SecondOrder,
            ModelArg::Sd => CoarseModelKind::SolutionDependent,
        };
    }
    let choice = match spec.solver.method {
        Method::Tr => SolverChoice::Tr,
        Method::Rmtr => SolverChoice::Rmtr(spec.solver.rmtr.model),
    };
    info!("seed {} (unused: solvers are deterministic)", args.seed);

    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("config.toml"), spec.to_toml())?;
    let mut sim = Simulation::new(spec)?;
    let n_steps = sim.spec.steps;
    let mut export_error = None;
    let fields_dir = args.out_dir.clone();
    let out = {
        let mut snapshots: Vec<(usize, Vec<f64>)> = Vec::new();
        let out = sim.run(choice, &mut |ev| {
            if let SimEvent::Step { record, x, .. } = ev {
                let keep = match args.export_fields {
                    ExportArg::None => false,
                    ExportArg::Every => true,
                    ExportArg::Last => record.step == n_steps || !record.converged(),
                };
                if keep {
                    snapshots.push((record.step, x.to_vec()));
                }
            }
        })?;
        for (step, x) in snapshots {
            let path = fields_dir.join(format!("fields_{step:04}.vtk"));
            if let Err(e) = sim.export_fields(&x, &path) {
                export_error = Some(e);
            }
        }
        out
    };
    if let Some(e) = export_error {
        return Err(e.into());
    }
    emit_csv(&out.records, &args.out_dir.join("history.csv"))?;
    let summary = summary_text(&sim, choice, &out);
    fs::write(args.out_dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    Ok(out.failed_step.is_none())
}
