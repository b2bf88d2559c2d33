//! `owqc` command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or parse error,
//! 3 domain or singular phases, 4 I/O.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use owqc::analysis::{area_counts, match_phases, scan_surface, ScanGrid};
use owqc::compiler::{budget_norm, compile_circuit};
use owqc::formats::{
    format_sig, format_vector, parse_circuit, plan_to_json, write_scan_csv, PlanDocument,
};
use owqc::montecarlo::{estimate_variance, SampleConfig};
use owqc::schemes::{realize, SchemeId, SchemePhases};
use owqc::symplectic::{PhaseAngle, SqueezeVariance};
use owqc::Error;

#[derive(Debug, Parser)]
#[command(
    name = "owqc",
    version,
    about = "Error accounting for one-way Gaussian computation on small cluster states"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Squeezed ancilla variance, 0 < sigma2 < 0.25.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub sigma2: f64,

    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (default: stdout).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Grid points per axis.
    #[arg(long, global = true, default_value_t = 1001)]
    pub grid: usize,

    /// Monte Carlo trials.
    #[arg(long, global = true, default_value_t = 1_000_000)]
    pub trials: usize,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a scheme's transformation matrix and error variances.
    ///
    /// Phases: four-node `theta_plus theta_minus theta3 theta4`; two-node
    /// `theta_plus theta_minus`; pair `plus1 minus1 plus2 minus2`; rotator
    /// `phi theta_plus theta_minus`; CZ schemes take none.
    Scheme {
        id: String,
        #[arg(allow_negative_numbers = true)]
        phases: Vec<f64>,
    },
    /// Phases of all five four-node configurations matching configuration 3.
    MatchPhases {
        #[arg(allow_negative_numbers = true)]
        theta3: f64,
        #[arg(allow_negative_numbers = true)]
        theta4: f64,
        #[arg(allow_negative_numbers = true)]
        theta_plus: f64,
    },
    /// Write both error surfaces over (theta3, theta4) as CSV.
    Scan {
        /// Cells closer than this to 0 or pi are excluded.
        #[arg(long, default_value_t = 1e-6)]
        margin: f64,
    },
    /// Area where the pair scheme wins over area where the four-node scheme wins.
    AreaRatio {
        #[arg(long, default_value_t = 1e-6)]
        margin: f64,
        /// Print the reciprocal.
        #[arg(long)]
        reverse: bool,
    },
    /// Compile a circuit JSON file into a plan with an error budget.
    Compile { circuit: PathBuf },
    /// Compare analytic and sampled error variances of a scheme.
    Validate {
        id: String,
        #[arg(allow_negative_numbers = true)]
        phases: Vec<f64>,
        /// Expected variances in units of sigma2, comma separated, used
        /// instead of the analytic ones.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        expect: Option<Vec<f64>>,
    },
}

#[derive(Debug)]
pub enum CliError {
    ValidationFailed,
    Usage(String),
    Domain(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ValidationFailed => 1,
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::ValidationFailed => "validation failed".into(),
            CliError::Usage(m) | CliError::Domain(m) | CliError::Io(m) => m.clone(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::SingularPhase(_) => CliError::Domain(e.to_string()),
            Error::DegenerateSqueezePhase(_) => {
                CliError::Domain(format!("singular phase configuration ({e})"))
            }
            Error::Parse { .. } | Error::InvalidCircuit(_) | Error::InvalidPhases { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Domain(e.to_string()),
        }
    }
}

fn io_error(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Validated global settings.
struct Config {
    sigma2: SqueezeVariance,
    seed: u64,
    out: Option<PathBuf>,
    grid: usize,
    trials: usize,
}

impl Config {
    fn from_args(g: &GlobalArgs) -> Result<Self, CliError> {
        let sigma2 = SqueezeVariance::new(g.sigma2)
            .map_err(|e| CliError::Usage(format!("--sigma2: {e}")))?;
        if g.grid < 2 {
            return Err(CliError::Usage(format!(
                "--grid must be >= 2, got {}",
                g.grid
            )));
        }
        if g.trials == 0 {
            return Err(CliError::Usage("--trials must be >= 1".into()));
        }
        if g.threads == Some(0) {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        Ok(Config {
            sigma2,
            seed: g.seed,
            out: g.out.clone(),
            grid: g.grid,
            trials: g.trials,
        })
    }

    /// Write `text` to `--out`, or to `stdout` when unset.
    fn emit(&self, stdout: &mut dyn Write, text: &str) -> Result<(), CliError> {
        match &self.out {
            Some(p) => fs::write(p, text).map_err(|e| io_error(p, e)),
            None => stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string())),
        }
    }
}

fn parse_scheme(id: &str) -> Result<SchemeId, CliError> {
    id.parse()
        .map_err(|e: Error| CliError::Usage(e.to_string()))
}

/// Map command-line phases onto the library layout.
fn scheme_phases(id: SchemeId, values: &[f64]) -> Result<SchemePhases, CliError> {
    if values.len() != id.arity() {
        return Err(CliError::Usage(format!(
            "{id} takes {} phases, got {}",
            id.arity(),
            values.len()
        )));
    }
    let p = if id.four_node_index().is_some() {
        SchemePhases::four_node_from_sums(values[0], values[1], values[2], values[3])
    } else {
        SchemePhases::new(values)
    };
    p.map_err(|e| CliError::Usage(e.to_string()))
}

fn clean(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        0.0
    } else {
        x
    }
}

fn phase(v: f64, name: &str) -> Result<PhaseAngle, CliError> {
    PhaseAngle::new(v).map_err(|e| CliError::Usage(format!("{name}: {e}")))
}

/// Parse `args` and run; output goes to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    let cfg = Config::from_args(&cli.global)?;
    if let Some(n) = cli.global.threads {
        // A second initialisation in the same process is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut text = String::new();
    match cli.command {
        Command::Scheme { id, phases } => {
            let id = parse_scheme(&id)?;
            let r = realize(id, &scheme_phases(id, &phases)?)?;
            let m = r.matrix.to_dmatrix();
            text.push_str(&format!("scheme: {id}\nmatrix:\n"));
            for row in m.row_iter() {
                let row: Vec<f64> = row.iter().map(|&x| clean(x)).collect();
                text.push_str(&format_vector(&row));
                text.push('\n');
            }
            let units = r.variance(SqueezeVariance::UNIT);
            text.push_str(&format!(
                "variance: {}\n",
                format_vector(units.components())
            ));
            text.push_str(&format!(
                "variance_abs: {}\n",
                format_vector(r.variance(cfg.sigma2).components())
            ));
            if r.error_map.is_surrogate() {
                text.push_str("note: error map is a variance-level surrogate\n");
            }
        }
        Command::MatchPhases {
            theta3,
            theta4,
            theta_plus,
        } => {
            let m = match_phases(
                phase(theta3, "theta3")?,
                phase(theta4, "theta4")?,
                phase(theta_plus, "theta_plus")?,
            )?;
            text.push_str("config,theta3,theta4,theta_plus\n");
            for j in 1..=5 {
                let c = m.config(j);
                text.push_str(&format!(
                    "{j},{},{},{}\n",
                    format_sig(c.theta3, 12),
                    format_sig(c.theta4, 12),
                    format_sig(c.theta_plus, 12)
                ));
            }
        }
        Command::Scan { margin } => {
            let grid =
                ScanGrid::new(cfg.grid, margin).map_err(|e| CliError::Usage(e.to_string()))?;
            let scan = scan_surface(&grid);
            let mut buf = Vec::new();
            write_scan_csv(&scan, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            text = String::from_utf8(buf).expect("ascii csv");
        }
        Command::AreaRatio { margin, reverse } => {
            if cfg.grid < 500 {
                return Err(CliError::Usage(format!(
                    "area-ratio needs --grid >= 500, got {}",
                    cfg.grid
                )));
            }
            let grid =
                ScanGrid::new(cfg.grid, margin).map_err(|e| CliError::Usage(e.to_string()))?;
            let counts = area_counts(&grid);
            let ratio = if reverse {
                counts.reversed()?
            } else {
                counts.ratio()?
            };
            text.push_str(&format!("ratio: {}\n", format_sig(ratio, 12)));
            text.push_str(&format!("pair_better_cells: {}\n", counts.pair_better));
            text.push_str(&format!(
                "four_node_better_cells: {}\n",
                counts.four_node_better
            ));
            text.push_str(&format!("tied_cells: {}\n", counts.ties));
            text.push_str(&format!("excluded_cells: {}\n", grid.excluded_cells()));
        }
        Command::Compile { circuit } => {
            let src = fs::read_to_string(&circuit).map_err(|e| io_error(&circuit, e))?;
            let c = parse_circuit(&src).map_err(|e| match e {
                Error::NonSymplecticGate { .. } => CliError::Domain(e.to_string()),
                other => CliError::from(other),
            })?;
            let compiled = compile_circuit(&c, cfg.sigma2)?;
            let doc = PlanDocument::from(&compiled);
            let json = plan_to_json(&doc) + "\n";
            match &cfg.out {
                Some(p) => fs::write(p, json).map_err(|e| io_error(p, e))?,
                None => text.push_str(&json),
            }
            let b = &compiled.budget;
            text.push_str(&format!(
                "budget: {}\n",
                format_vector(b.variance_vector().components())
            ));
            text.push_str(&format!(
                "budget_abs: {}\n",
                format_vector(b.absolute().components())
            ));
            text.push_str(&format!("linf: {}\n", format_sig(budget_norm(b), 12)));
            return stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Io(e.to_string()));
        }
        Command::Validate { id, phases, expect } => {
            let id = parse_scheme(&id)?;
            let r = realize(id, &scheme_phases(id, &phases)?)?;
            let sample = SampleConfig::new(cfg.trials, cfg.seed, cfg.sigma2)?;
            let analytic = r.variance(cfg.sigma2);
            let reference = match expect {
                Some(v) => {
                    if v.len() != analytic.len() {
                        return Err(CliError::Usage(format!(
                            "--expect needs {} values, got {}",
                            analytic.len(),
                            v.len()
                        )));
                    }
                    v.iter().map(|x| x * cfg.sigma2.value()).collect()
                }
                None => analytic.components().to_vec(),
            };
            let empirical = estimate_variance(&r.error_map, &sample);
            let tol = sample.relative_tolerance();
            let pass = empirical
                .components()
                .iter()
                .zip(&reference)
                .all(|(e, a)| (e - a).abs() <= tol * a.abs());
            text.push_str(&format!("scheme: {id}\n"));
            text.push_str(&format!("expected: {}\n", format_vector(&reference)));
            text.push_str(&format!(
                "analytic: {}\n",
                format_vector(analytic.components())
            ));
            text.push_str(&format!(
                "empirical: {}\n",
                format_vector(empirical.components())
            ));
            text.push_str(&format!("relative_tolerance: {}\n", format_sig(tol, 12)));
            text.push_str(if pass { "PASS\n" } else { "FAIL\n" });
            cfg.emit(stdout, &text)?;
            return if pass {
                Ok(())
            } else {
                Err(CliError::ValidationFailed)
            };
        }
    }
    cfg.emit(stdout, &text)
}
