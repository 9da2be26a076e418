use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use versatile_ns::cli::{
    convergence_to_dir, parse_config, write_diagnostics, write_field_output, CaseKind, ConfigOverrides, Formulation,
};
use versatile_ns::solver::run_case_with;
use versatile_ns::verify::{run_suite, SuiteOptions};

#[derive(Parser)]
#[command(name = "versatile-ns", version, about = "Mixed finite element incompressible Navier-Stokes solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case and write diagnostics and field snapshots.
    Run(CaseArgs),
    /// Run the mesh sweep and write the error table.
    Convergence(CaseArgs),
    /// Run the identity and property suite.
    Verify {
        /// Random draws per identity.
        #[arg(long, default_value_t = 100)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    case: Option<CaseKind>,
    #[arg(long)]
    formulation: Option<Formulation>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    zeta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated mesh resolutions for `convergence`.
    #[arg(long, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,
    /// Print one line per time step.
    #[arg(long)]
    verbose: bool,
}

impl CaseArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            case: self.case,
            formulation: self.formulation,
            k: self.k,
            nx: self.nx,
            ny: self.ny,
            nu: self.nu,
            zeta: self.zeta,
            eta: self.eta,
            delta: self.delta,
            dt: self.dt,
            t_end: self.t_end,
            out_dir: self.out_dir.clone(),
            meshes: self.meshes.clone(),
        }
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("VNS_THREADS") else { return Ok(()) };
    let n: usize = v.parse().map_err(|_| format!("VNS_THREADS must be a positive integer, got '{v}'"))?;
    if n == 0 {
        return Err("VNS_THREADS must be positive".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn run(cli: Cli) -> Result<(), String> {
    init_threads()?;
    match cli.command {
        Command::Run(args) => {
            let cfg = parse_config(args.config.as_deref(), &args.overrides()).map_err(|e| e.to_string())?;
            let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out).map_err(|e| e.to_string())?;
            let verbose = args.verbose;
            let res = run_case_with(&cfg, |d| {
                if verbose {
                    eprintln!(
                        "step {:5} t={:.4} order={} KE={:.10e} div={:.2e} picard={}",
                        d.step, d.t, d.bdf_order, d.kinetic_energy, d.max_divergence, d.picard_iterations
                    );
                }
            })
            .map_err(|e| e.to_string())?;
            let tag = cfg.tag();
            write_diagnostics(&res.steps, &out.join(format!("diagnostics_{tag}.csv"))).map_err(|e| e.to_string())?;
            let vtk = out.join(format!("fields_{tag}_nx{}_t{:.2}.vtk", cfg.nx, res.t));
            write_field_output(&res.u, &res.p, res.t, &vtk).map_err(|e| e.to_string())?;
            let last = res.steps.last().expect("at least one step");
            println!("case {} {} k={} nx={} dofs={}", cfg.case, cfg.formulation, cfg.k, cfg.nx, res.system_size);
            println!("t={:.4} KE={:.10e} max_div={:.3e}", res.t, last.kinetic_energy, last.max_divergence);
            let st = res.solver_stats;
            println!(
                "solves={} factorizations={} krylov_iterations={} lu_fallbacks={}",
                st.solves, st.factorizations, st.krylov_iterations, st.lu_fallbacks
            );
            if res.setup.exact.is_some() {
                let r = versatile_ns::cli::error_report(&res).map_err(|e| e.to_string())?;
                println!("vel_l2={:.3e} pres_l2={:.3e}", r.vel_l2, r.pres_l2);
            }
            println!("fields written to {}", vtk.display());
            Ok(())
        }
        Command::Convergence(args) => {
            let cfg = parse_config(args.config.as_deref(), &args.overrides()).map_err(|e| e.to_string())?;
            let out = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
            let verbose = args.verbose;
            let path = convergence_to_dir(&cfg, &out, |n, d| {
                if verbose {
                    eprintln!("nx={n} step {} t={:.4} picard={}", d.step, d.t, d.picard_iterations);
                }
            })
            .map_err(|e| e.to_string())?;
            print!("{}", std::fs::read_to_string(&path).map_err(|e| e.to_string())?);
            println!("table written to {}", path.display());
            Ok(())
        }
        Command::Verify { draws, seed } => {
            let report = run_suite(&SuiteOptions { draws, seed });
            for line in &report.lines {
                println!("{line}");
            }
            if report.passed {
                Ok(())
            } else {
                Err("verification failed".into())
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
