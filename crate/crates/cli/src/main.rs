mod commands;
mod report;
mod svg;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

/// Contact forms, Reeb flows, closed-orbit searches and certificates on
/// built-in or user-supplied scenarios.
#[derive(Parser, Debug)]
#[command(name = "reeb-lab", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Output directory for report.json, CSV and SVG files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for data-parallel work.
    #[arg(long, global = true, env = "REEB_LAB_JOBS")]
    pub jobs: Option<usize>,
    /// Parameter override, `name=value`; repeatable.
    #[arg(long = "set", global = true, value_name = "NAME=VALUE")]
    pub set: Vec<String>,
    /// Scenario file to use instead of a built-in id.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct Target {
    /// Built-in scenario id (omit with --config).
    pub scenario: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the built-in scenarios.
    List,
    /// Sample |α ∧ dα| on the declared grid of each active contact form.
    VerifyContact {
        #[command(flatten)]
        target: Target,
        /// Only this contact structure.
        #[arg(long)]
        contact: Option<String>,
        /// Grid counts, e.g. 20x20x20.
        #[arg(long)]
        grid: Option<String>,
    },
    /// Reeb vector and its residuals at a point.
    Reeb {
        #[command(flatten)]
        target: Target,
        /// Comma-separated coordinates; constants such as pi/2 are accepted.
        #[arg(long, allow_hyphen_values = true)]
        at: String,
        #[arg(long)]
        contact: Option<String>,
    },
    /// Integrate the Reeb flow (or a geodesic flow with --metric).
    Flow {
        #[command(flatten)]
        target: Target,
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        #[arg(long, allow_hyphen_values = true)]
        time: f64,
        #[arg(long)]
        contact: Option<String>,
        /// Integrate the geodesic field of this metric; --from is then (q, dq).
        #[arg(long)]
        metric: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        /// Dense samples written to CSV.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Closed-orbit search from the scenario's seed grid.
    Orbits {
        #[command(flatten)]
        target: Target,
        /// Value of the scenario's leaf parameter.
        #[arg(long, allow_hyphen_values = true)]
        leaf: Option<f64>,
        /// Seed grid counts, e.g. 6x6x6.
        #[arg(long, alias = "seed-grid")]
        grid: Option<String>,
        #[arg(long)]
        tmax: Option<f64>,
    },
    /// Run the scenario's monotonicity certificates.
    Certify {
        #[command(flatten)]
        target: Target,
        /// Only this certificate.
        #[arg(long)]
        only: Option<String>,
    },
    /// Christoffel symbols and a geodesic with speed conservation check.
    Geodesics {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        metric: Option<String>,
        /// Base point, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        from: String,
        /// Initial velocity; Christoffel symbols only when omitted.
        #[arg(long, allow_hyphen_values = true)]
        velocity: Option<String>,
        #[arg(long, default_value_t = 10.0)]
        time: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Compare the Reeb flow of the unit Liouville form with the geodesic flow.
    CompareCogeodesic {
        #[command(flatten)]
        target: Target,
        /// Only this compare entry.
        #[arg(long)]
        only: Option<String>,
        /// Ad hoc comparison on this metric (needs --at and --psi).
        #[arg(long)]
        metric: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        time: f64,
    },
    /// Horizontal or boundary energy of a map.
    Energy {
        #[command(flatten)]
        target: Target,
        /// Energy entry id, `all`, or a JSON file with one energy entry.
        #[arg(long, default_value = "all")]
        map: String,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(n) = cli.global.jobs {
        reeb_lab::par::set_jobs(n);
    }
    let start = Instant::now();
    let mut rep = match commands::run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    rep.wall_time_s = start.elapsed().as_secs_f64();
    rep.settle();
    // a closed stdout (e.g. piped into `head`) must not abort the run
    let mut stdout = std::io::stdout().lock();
    for c in &rep.checks {
        let _ = writeln!(stdout, "[{}] {}: {}", c.verdict.as_str(), c.name, c.summary);
    }
    if let Err(e) = std::fs::create_dir_all(&cli.global.out).map_err(anyhow::Error::from).and_then(|_| rep.write(&cli.global.out)) {
        eprintln!("error: writing report: {e:#}");
        return ExitCode::from(2);
    }
    let _ = writeln!(stdout, "{} -> {}", rep.verdict.as_str(), cli.global.out.join("report.json").display());
    if rep.failed() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
