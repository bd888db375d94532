use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loglin_ins::config::{load_config, ExperimentConfig};
use loglin_ins::error_dynamics::Side;
use loglin_ins::experiment::{self, RunReport};
use loglin_ins::identities::{identity_suite, mutation_self_test};
use loglin_ins::Vec3;

#[derive(Parser)]
#[command(name = "loglin-ins", version, about = "Verification experiments for exact log-linear INS error models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group-affine identity on random states and inputs.
    AffineCheck {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value = "affine.csv")]
        output: PathBuf,
    },
    /// True error against the linear model and its closed form.
    Exactness(ExperimentArgs),
    /// Direct integration against the three-factor decomposition.
    Decompose(ExperimentArgs),
    /// Algebraic identity suite.
    Identities {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also rerun the suite with corrupted adjoints and expect failures.
        #[arg(long)]
        self_test: bool,
    },
    /// Difference-quotient check of d/dt(Ad F_t) = F (Ad F_t).
    Factorization {
        #[arg(long, value_enum, default_value_t = SideArg::Both)]
        side: SideArg,
        #[arg(long, default_value_t = 5.0)]
        time: f64,
        #[arg(long, default_value_t = 1e-4)]
        diff_step: f64,
    },
}

#[derive(Args)]
struct ExperimentArgs {
    /// Configuration file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    /// Magnitude of the initial attitude error, degrees.
    #[arg(long)]
    angle_deg: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    duration: Option<f64>,
    /// CSV path; with `--side both` the side is appended to the file stem.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
    Both,
}

impl SideArg {
    fn sides(self) -> Vec<Side> {
        match self {
            SideArg::Left => vec![Side::Left],
            SideArg::Right => vec![Side::Right],
            SideArg::Both => vec![Side::Left, Side::Right],
        }
    }
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn resolve_config(args: &ExperimentArgs) -> AnyResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            load_config(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(step) = args.step {
        cfg.trajectory.step = step;
    }
    if let Some(duration) = args.duration {
        cfg.trajectory.duration = duration;
    }
    if let Some(deg) = args.angle_deg {
        let phi = cfg.initial_error.phi;
        let axis = if phi.norm() > 0.0 { phi.normalize() } else { Vec3::x() };
        cfg.initial_error.phi = axis * deg.to_radians();
    }
    if let Some(path) = &args.output {
        cfg.output_path = path.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}-{suffix}.{ext}"))
}

fn write_csv<F>(path: &Path, write: F) -> AnyResult<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(File::create(path).map_err(|e| format!("{}: {e}", path.display()))?);
    write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn exactness_reports(args: &ExperimentArgs) -> AnyResult<Vec<RunReport>> {
    let base = resolve_config(args)?;
    let sides = match args.side {
        Some(s) => s.sides(),
        None => vec![base.error_side],
    };
    let several = sides.len() > 1;
    thread::scope(|scope| {
        let handles: Vec<_> = sides
            .into_iter()
            .map(|side| {
                let mut cfg = base.clone();
                cfg.error_side = side;
                if several {
                    cfg.output_path = with_suffix(Path::new(&base.output_path), &side.to_string())
                        .display()
                        .to_string();
                }
                scope.spawn(move || -> AnyResult<RunReport> {
                    let (report, run) = experiment::exactness(&cfg)?;
                    write_csv(Path::new(&cfg.output_path), |w| experiment::write_exactness_csv(w, &run))?;
                    Ok(report)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("experiment thread panicked"))
            .collect()
    })
}

fn run(command: Command) -> AnyResult<Vec<RunReport>> {
    Ok(match command {
        Command::AffineCheck { samples, seed, output } => {
            if samples == 0 {
                return Err("--samples must be at least 1".into());
            }
            let (report, run) = experiment::affine_check(samples, seed);
            write_csv(&output, |w| experiment::write_affine_csv(w, &run))?;
            vec![report]
        }
        Command::Exactness(args) => exactness_reports(&args)?,
        Command::Decompose(args) => {
            let cfg = resolve_config(&args)?;
            let (report, run) = experiment::decompose(&cfg)?;
            let path = args.output.unwrap_or_else(|| PathBuf::from("decompose.csv"));
            write_csv(&path, |w| experiment::write_decompose_csv(w, &run))?;
            vec![report]
        }
        Command::Identities { seed, self_test } => {
            let (report, results) = identity_suite(seed);
            for r in &results {
                println!(
                    "  {:<34} {:.3e} <= {:.0e} {}",
                    r.name,
                    r.residual,
                    r.tolerance,
                    if r.pass() { "ok" } else { "FAILED" }
                );
            }
            let mut reports = vec![report];
            if self_test {
                reports.push(mutation_self_test(seed).0);
            }
            reports
        }
        Command::Factorization { side, time, diff_step } => side
            .sides()
            .into_iter()
            .map(|s| experiment::factorization(s, time, diff_step))
            .collect::<Result<_, _>>()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(mut reports) => {
            reports.sort_by(|a, b| a.name.cmp(&b.name));
            for r in &reports {
                println!("{r}");
                for note in &r.notes {
                    println!("  {note}");
                }
            }
            if reports.iter().all(|r| r.pass) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
