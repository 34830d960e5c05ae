use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

mod config;
mod error;
mod figure;
mod solve;
mod svg;
mod train;

use config::{parse_lines, Settings};
use error::{config_err, CliResult, Failure};

#[derive(Parser)]
#[command(name = "wide2nn", version, about = "Wide two-layer network experiments and max-margin solvers")]
struct Cli {
    /// Worker threads for replicates and sweep points (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train on cluster-grid data and write trajectories, certificates and a summary.
    Train(TrainArgs),
    /// Run a sweep and write a long-format CSV plus an SVG plot.
    Figure(FigureArgs),
    /// Standalone solvers and evaluators; prints JSON.
    Solve(SolveArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// `key = value` config file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// two-layer, fixed-directions or output-layer.
    #[arg(long)]
    mode: Option<String>,
    /// relu or squared-relu.
    #[arg(long)]
    activation: Option<String>,
    /// exponential or logistic.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Width (hidden units or fixed directions).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// `schedule` (per-mode default) or a constant step.
    #[arg(long)]
    step_size: Option<String>,
    /// default, balanced-sphere, gaussian:<sigma>, uniform-mass or zero.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    n_test: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "runs/train")]
    out: PathBuf,
}

#[derive(Args)]
struct FigureArgs {
    /// test_vs_n, test_vs_d, margin_vs_m or lazy (may come from the config).
    which: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// desk or full.
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated sweep values.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_test: Option<usize>,
    #[arg(long)]
    activation: Option<String>,
    /// Regenerate the SVG from an existing figure CSV instead of running.
    #[arg(long)]
    from_csv: Option<PathBuf>,
    /// SVG path for --from-csv (default: next to the CSV).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Output directory (default: runs/<figure>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(subcommand)]
    what: SolveCommand,
}

#[derive(Args)]
struct DataArgs {
    /// Labeled dataset CSV; otherwise a cluster grid is generated.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 20)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DataArgs {
    fn source(&self) -> solve::DataSource<'_> {
        solve::DataSource {
            file: self.data.as_deref(),
            k: self.k,
            d: self.d,
            n: self.n,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand)]
enum SolveCommand {
    /// Max-min margin over the simplex (exact LP).
    Gamma1 {
        #[arg(long)]
        z: PathBuf,
    },
    /// Max-min margin over the scaled l2 ball.
    Gamma2 {
        #[arg(long)]
        z: PathBuf,
    },
    /// Certified lower bound of the F1 max-margin from a random direction grid.
    Reference {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "relu")]
        activation: String,
        /// Number of direction pairs.
        #[arg(long, default_value_t = 4000)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        grid_seed: u64,
    },
    /// Projected interclass distance.
    Delta {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        r: usize,
        /// auto, exact, random or plane.
        #[arg(long, default_value = "auto")]
        strategy: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        search_seed: u64,
    },
    /// Margin-based generalization bound.
    Bound {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        n: usize,
        /// Bound on sup |f(x)|.
        #[arg(long = "C")]
        sup_norm: Option<f64>,
        /// Input radius R; uses C = R + 1.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        delta: f64,
        /// Rademacher complexity (default 1/sqrt(n)).
        #[arg(long)]
        rad: Option<f64>,
    },
}

fn opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn train_settings(a: &TrainArgs) -> CliResult<Settings> {
    let mut s = Settings::with_defaults(train::DEFAULTS);
    if let Some(path) = &a.config {
        s.apply_file(path)?;
    }
    s.apply_flags(vec![
        ("mode", opt(&a.mode)),
        ("activation", opt(&a.activation)),
        ("loss", opt(&a.loss)),
        ("k", opt(&a.k)),
        ("d", opt(&a.d)),
        ("n", opt(&a.n)),
        ("m", opt(&a.m)),
        ("seed", opt(&a.seed)),
        ("steps", opt(&a.steps)),
        ("step-size", opt(&a.step_size)),
        ("init", opt(&a.init)),
        ("replicates", opt(&a.replicates)),
        ("record-every", opt(&a.record_every)),
        ("n-test", opt(&a.n_test)),
    ])?;
    Ok(s)
}

/// Figure defaults depend on the figure and preset, which may themselves
/// come from the config file.
fn figure_settings(a: &FigureArgs) -> CliResult<Settings> {
    let file = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            parse_lines(&text)?
        }
        None => Vec::new(),
    };
    let from_file = |key: &str| file.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.clone());
    let Some(which) = a.which.clone().or_else(|| from_file("figure")) else {
        return config_err("name a figure: test_vs_n, test_vs_d, margin_vs_m or lazy");
    };
    let kind = figure::parse_kind(&which)?;
    let preset = a.preset.clone().or_else(|| from_file("preset")).unwrap_or_else(|| "desk".into());
    let mut s = figure::defaults(kind, &preset)?;
    s.apply(file)?;
    s.set("figure", kind.name());
    s.set("preset", &preset);
    s.apply_flags(vec![
        ("values", a.values.clone()),
        ("k", opt(&a.k)),
        ("d", opt(&a.d)),
        ("n", opt(&a.n)),
        ("m", opt(&a.m)),
        ("steps", opt(&a.steps)),
        ("replicates", opt(&a.replicates)),
        ("seed", opt(&a.seed)),
        ("n-test", opt(&a.n_test)),
        ("activation", a.activation.clone()),
    ])?;
    Ok(s)
}

fn print_json(v: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(v).context("serializing output")?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Train(a) => {
            let s = train_settings(&a)?;
            train::cmd_train(&s, &a.out)
        }
        Command::Figure(a) => {
            if let Some(csv) = &a.from_csv {
                let kind = match &a.which {
                    Some(w) => figure::parse_kind(w)?,
                    None => figure::parse_kind(figure_settings(&a)?.raw("figure"))?,
                };
                let svg = a.svg.clone().unwrap_or_else(|| csv.with_extension("svg"));
                return figure::cmd_from_csv(kind, csv, &svg);
            }
            let s = figure_settings(&a)?;
            let out = a
                .out
                .clone()
                .unwrap_or_else(|| Path::new("runs").join(s.raw("figure")));
            figure::cmd_figure(&s, &out)
        }
        Command::Solve(a) => {
            let v = match a.what {
                SolveCommand::Gamma1 { z } => solve::gamma1(&z)?,
                SolveCommand::Gamma2 { z } => solve::gamma2(&z)?,
                SolveCommand::Reference {
                    data,
                    activation,
                    grid,
                    grid_seed,
                } => solve::reference(&data.source(), &activation, grid, grid_seed)?,
                SolveCommand::Delta {
                    data,
                    r,
                    strategy,
                    trials,
                    search_seed,
                } => solve::delta(&data.source(), r, &strategy, trials, search_seed)?,
                SolveCommand::Bound {
                    gamma,
                    n,
                    sup_norm,
                    radius,
                    delta,
                    rad,
                } => solve::bound(solve::BoundArgs {
                    gamma,
                    n,
                    sup_norm,
                    radius,
                    delta,
                    rademacher: rad,
                })?,
            };
            print_json(&v)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("{}", Failure::Config("--jobs must be >= 1".into()));
            return ExitCode::from(2);
        }
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
