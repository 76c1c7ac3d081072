//! Command-line front end. Flags override values from `--config`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::export;
use crate::oracle::run_oracle_suite;
use crate::pipeline::{check_field, run_lyapunov, run_recurrence, FieldVerdict};
use crate::systems::SystemId;

#[derive(Debug, Parser)]
#[command(name = "strongchain", version, about = "Strong chain recurrence and Lyapunov functions for sampled flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate A_T, SCR, CR and components; write recurrence.csv/json and heatmaps.
    Recur(RunArgs),
    /// Build the Lyapunov function u and verify it; write u.csv, u.svg, verify.json.
    Lyap(RunArgs),
    /// Compare budgeted Dijkstra with brute force on random 6-node graphs.
    VerifyOracle(OracleArgs),
    /// Classify a tabulated function (CSV with a `value` column) on the run's grid.
    CheckField(CheckArgs),
    /// Print the resolved configuration with every default filled in.
    PrintConfig(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<SystemId>,
    /// Samples per axis, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub resolution: Option<Vec<usize>>,
    /// Minimal flow times T, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Option<Vec<f64>>,
    #[arg(long)]
    pub time_steps: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kappa_cr: Option<f64>,
    #[arg(long)]
    pub kappa_component: Option<f64>,
    #[arg(long)]
    pub budget_factor: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub j_max: Option<usize>,
    #[arg(long)]
    pub n_max: Option<usize>,
    #[arg(long)]
    pub s_max: Option<f64>,
    #[arg(long)]
    pub ds: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb one edge weight before the Dijkstra run; the suite must then fail.
    #[arg(long)]
    pub inject_corruption: bool,
    #[arg(long, default_value = "out")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Field values, one row per sample in index order.
    #[arg(long)]
    pub field: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

impl RunArgs {
    /// Config file (or defaults) with the given flags applied on top.
    pub fn to_config(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone(); })*};
        }
        set!(resolution, t_list, time_steps, kappa, kappa_cr, kappa_component, budget_factor, j_max, n_max, s_max, ds, dt, seed, output_dir);
        if let Some(s) = self.system {
            c.system = Some(s);
            c.field = None;
        }
        if self.eta.is_some() {
            c.eta = self.eta;
        }
        if self.threads.is_some() {
            c.threads = self.threads;
        }
        Ok(c)
    }
}

fn init_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        // Fails only if a pool already exists, e.g. in tests; keep that one.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

/// Run one command; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::PrintConfig(args) => {
            let c = args.to_config()?;
            let c = if c.system.is_some() || c.field.is_some() { c.resolved()? } else { c };
            println!("{}", c.to_json());
            Ok(0)
        }
        Command::Recur(args) => {
            let c = args.to_config()?;
            init_threads(c.threads);
            let run = run_recurrence(&c)?;
            let r = &run.report;
            println!(
                "samples {}  |SCR| {}  |CR| {}  components {}",
                run.prepared.grid.len(),
                r.scr_count(),
                r.cr_count(),
                r.component_count()
            );
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            list(&export::write_recurrence(&run, &run.prepared.config.output_dir)?);
            Ok(0)
        }
        Command::Lyap(args) => {
            let c = args.to_config()?;
            init_threads(c.threads);
            let run = run_lyapunov(&c)?;
            let v = &run.verification;
            println!(
                "violation {:e}  eta {:e}  margin {}  |N(u) Δ SCR| {} of {}",
                v.violation,
                run.eta,
                v.margin.map_or("n/a".to_string(), |m| format!("{m:e}")),
                v.symmetric_difference,
                run.u.len()
            );
            list(&export::write_lyapunov(&run, &run.recurrence.prepared.config.output_dir)?);
            let ok = v.violation <= run.eta && v.margin.is_none_or(|m| m > 0.0);
            Ok(if ok { 0 } else { 1 })
        }
        Command::CheckField(args) => {
            let c = args.run.to_config()?;
            init_threads(c.threads);
            let file = std::fs::File::open(&args.field).map_err(|e| Error::Input(format!("{}: {e}", args.field.display())))?;
            let values = export::read_field_csv(std::io::BufReader::new(file))?;
            let run = check_field(&c, values)?;
            let k = &run.check;
            println!(
                "verdict {:?}  violation {:e}  eta {:e}  dominated {} (excess {:e}, K {:e})",
                k.verdict, k.verification.violation, k.eta, k.dominated, k.dominated_excess, k.lipschitz
            );
            list(&export::write_check(&run, &run.recurrence.prepared.config.output_dir)?);
            Ok(if k.verdict == FieldVerdict::NotLyapunov { 1 } else { 0 })
        }
        Command::VerifyOracle(args) => {
            let summary = run_oracle_suite(args.count, args.seed, args.inject_corruption)?;
            std::fs::create_dir_all(&args.output_dir)?;
            let path = args.output_dir.join("oracle.json");
            let mut text = serde_json::to_string_pretty(&summary)?;
            text.push('\n');
            std::fs::write(&path, text)?;
            println!("{} of {} instances agree", summary.passed, summary.instances);
            println!("wrote {}", path.display());
            if summary.all_pass() {
                Ok(0)
            } else {
                for o in summary.outcomes.iter().filter(|o| !o.pass) {
                    let edge = o.injected.map_or(String::new(), |(a, b)| format!(" (injected edge {a}->{b})"));
                    eprintln!("FAIL seed {}: {} mismatching pairs{edge}", o.seed, o.mismatches.len());
                }
                Ok(1)
            }
        }
    }
}

/// Parse arguments, run, and map errors to exit codes 2 and 3.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
