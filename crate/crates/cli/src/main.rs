use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use eigenspline::datagen::{
    add_noise, augment_log_linear, first_order_series, spring_mass_series, EdcComponent, NoiseSpec, Regime,
    SpringParams,
};
use eigenspline::pipeline::{
    benchmark_edc, benchmark_spring, discover, sparsity_map, EdcOptions, EdcTable, RunConfig, RunReport,
    SpringOptions, SpringTable, CONFIG_KEYS,
};
use eigenspline::series::TimeSeries;
use eigenspline::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "eigenspline",
    version,
    about = "Discover linear constant-coefficient ODEs from sampled data"
)]
#[command(after_help = config_help())]
struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset and write it as `x,y` CSV.
    Simulate(SimulateArgs),
    /// Run the discovery pipeline on a CSV series.
    Discover(DiscoverArgs),
    /// Spring-mass benchmark over three regimes, with and without noise.
    BenchSpring(BenchSpringArgs),
    /// Rate constants for the eight photolysis series.
    BenchEdc(BenchEdcArgs),
    /// Threshold-and-normalize map of discovered coefficients.
    Sparsity(SparsityArgs),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Flat TOML file with run-configuration keys.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum System {
    Spring,
    FirstOrder,
    Edc,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(value_enum)]
    system: System,
    /// Spring regime preset.
    #[arg(long, default_value = "underdamped")]
    regime: String,
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    stiffness: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    v0: Option<f64>,
    /// First-order rate constant.
    #[arg(long, default_value_t = 0.3)]
    rate: f64,
    /// First-order initial concentration.
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// EDC component name, e.g. UVC-E1.
    #[arg(long, default_value = "UVC-E1")]
    component: String,
    /// Directory of replacement EDC CSVs (`<component>.csv`).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Add benchmark noise: scale 0.001 times N(0.5, 0.1).
    #[arg(long)]
    noise: bool,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiscoverArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Start from the first-order kinetics preset instead of spring-mass.
    #[arg(long)]
    kinetics: bool,
}

#[derive(Args, Debug)]
struct BenchSpringArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Restrict to regimes (repeatable).
    #[arg(long)]
    regime: Vec<String>,
    /// Only clean cells.
    #[arg(long, conflicts_with = "noisy_only")]
    clean_only: bool,
    /// Only noisy cells.
    #[arg(long)]
    noisy_only: bool,
}

#[derive(Args, Debug)]
struct BenchEdcArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Directory of replacement CSVs (`uva_e1.csv`, ...).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Restrict to components (repeatable).
    #[arg(long)]
    component: Vec<String>,
    /// Points after augmentation.
    #[arg(long, default_value_t = 1000)]
    points: usize,
    /// Skip the augmentation noise.
    #[arg(long)]
    no_noise: bool,
}

#[derive(Args, Debug)]
struct SparsityArgs {
    /// Run reports or benchmark tables (JSON).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    zero_tol: f64,
    /// Defaults to the first report's `one_tol`.
    #[arg(long)]
    one_tol: Option<f64>,
    /// Output CSV (stdout when omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn config_help() -> String {
    format!(
        "Run-configuration keys (set in --config or as --key=value):\n  {}",
        CONFIG_KEYS.join(", ")
    )
}

/// Pulls `--key=value` / `--key value` pairs for configuration keys out of
/// the argument list so clap only sees its own flags.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<String>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match body.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (body.to_string(), None),
        };
        let key = name.replace('-', "_");
        if !CONFIG_KEYS.contains(&key.as_str()) {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => match it.next_if(|next| !next.starts_with("--")) {
                Some(v) => v,
                None => {
                    rest.push(arg);
                    continue;
                }
            },
        };
        overrides.push(format!("{key}={value}"));
    }
    (rest, overrides)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    // `sparsity` has its own `--zero-tol` / `--one-tol` flags.
    let is_sparsity = argv
        .iter()
        .skip(1)
        .find(|a| !a.starts_with('-'))
        .is_some_and(|a| a == "sparsity");
    let (rest, overrides) = if is_sparsity {
        (argv, Vec::new())
    } else {
        split_overrides(argv)
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match e.stage() {
                Some(stage) => eprintln!("error: numerical failure in stage {stage}: {}", e.root()),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_INPUT
            })
        }
    }
}

fn run(command: Command, overrides: &[String]) -> Result<(), Error> {
    match command {
        Command::Simulate(args) => {
            if !overrides.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "simulate takes no run-configuration keys (got {})",
                    overrides.join(" ")
                )));
            }
            simulate(args)
        }
        Command::Discover(args) => {
            let preset = if args.kinetics {
                RunConfig::kinetics()
            } else {
                RunConfig::spring()
            };
            let cfg = load_config(preset, &args.config, overrides)?;
            discover_cmd(cfg)
        }
        Command::BenchSpring(args) => {
            let cfg = load_config(RunConfig::spring(), &args.config, overrides)?;
            let mut opts = SpringOptions::new(cfg.clone());
            opts.regimes = args.regime.iter().map(|r| r.parse()).collect::<Result<_, _>>()?;
            opts.noise = match (args.clean_only, args.noisy_only) {
                (true, _) => Some(false),
                (_, true) => Some(true),
                _ => None,
            };
            let table = benchmark_spring(&opts)?;
            emit_table(cfg.output.as_deref(), &table.to_json(), &table.to_csv())?;
            warn_failures(table.cells.iter().filter_map(|c| c.error.as_deref()));
            Ok(())
        }
        Command::BenchEdc(args) => {
            let cfg = load_config(RunConfig::kinetics(), &args.config, overrides)?;
            let mut opts = EdcOptions::new(cfg.clone());
            opts.data_dir = args.data_dir;
            opts.components = args.component;
            opts.n_new = args.points;
            opts.noise = !args.no_noise;
            let table = benchmark_edc(&opts)?;
            emit_table(cfg.output.as_deref(), &table.to_json(), &table.to_csv())?;
            warn_failures(table.rows.iter().filter_map(|r| r.error.as_deref()));
            Ok(())
        }
        Command::Sparsity(args) => sparsity_cmd(args),
    }
}

fn load_config(preset: RunConfig, args: &ConfigArgs, overrides: &[String]) -> Result<RunConfig, Error> {
    let cfg = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            preset.merge_toml(&text)?
        }
        None => preset,
    };
    let cfg = cfg.apply_overrides(overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let noise = if args.noise {
        NoiseSpec::benchmark(args.noise_seed)
    } else {
        NoiseSpec::none()
    };
    let series = match args.system {
        System::Spring => {
            let regime: Regime = args.regime.parse()?;
            let mut p = match regime {
                Regime::Overdamped => SpringParams::benchmark_overdamped(),
                Regime::Critical => SpringParams::benchmark_critical(),
                Regime::Underdamped => SpringParams::benchmark_underdamped(),
            };
            p.mass = args.mass.unwrap_or(p.mass);
            p.damping = args.damping.unwrap_or(p.damping);
            p.stiffness = args.stiffness.unwrap_or(p.stiffness);
            p.x0 = args.x0.unwrap_or(p.x0);
            p.v0 = args.v0.unwrap_or(p.v0);
            p.duration = args.duration.unwrap_or(p.duration);
            p.n_points = args.points.unwrap_or(p.n_points);
            add_noise(&spring_mass_series(&p)?, &noise)?
        }
        System::FirstOrder => {
            let clean = first_order_series(
                args.rate,
                args.c0,
                args.duration.unwrap_or(10.0),
                args.points.unwrap_or(1000),
            )?;
            add_noise(&clean, &noise)?
        }
        System::Edc => {
            let comp = EdcComponent::by_name(&args.component)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown EDC component `{}`", args.component)))?;
            let sparse = eigenspline::pipeline::load_edc_series(comp, args.data_dir.as_deref())?;
            augment_log_linear(&sparse, args.points.unwrap_or(1000), sparse.ys()[0], &noise)?
        }
    };
    write_or_print(args.out.as_deref(), &series.to_csv())
}

fn discover_cmd(cfg: RunConfig) -> Result<(), Error> {
    if !cfg.seed_given {
        return Err(Error::InvalidConfig(
            "discover needs a seed: pass --seed=<n> or set `seed` in the config".into(),
        ));
    }
    let input = cfg
        .input
        .clone()
        .ok_or_else(|| Error::InvalidConfig("discover needs --input=<csv>".into()))?;
    let data = TimeSeries::read_csv(&input)?;
    let run = discover(&data, &cfg)?;
    match cfg.output.as_deref() {
        Some(stem) => {
            for path in run.write_outputs(&data, stem)? {
                println!("{}", path.display());
            }
        }
        None => print!("{}", run.report.to_json()),
    }
    Ok(())
}

fn emit_table(stem: Option<&str>, json: &str, csv: &str) -> Result<(), Error> {
    match stem {
        Some(stem) => {
            let stem = Path::new(stem);
            if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            for (ext, body) in [("json", json), ("csv", csv)] {
                let path = PathBuf::from(format!("{}.{ext}", stem.display()));
                std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                println!("{}", path.display());
            }
            Ok(())
        }
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

fn warn_failures<'a>(errors: impl Iterator<Item = &'a str>) {
    for e in errors {
        eprintln!("warning: {e}");
    }
}

/// Reads a single run report, or every report inside a benchmark table.
fn reports_in(path: &Path) -> Result<Vec<(String, RunReport)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if let Ok(r) = RunReport::from_json(&text) {
        return Ok(vec![(stem, r)]);
    }
    if let Ok(t) = serde_json::from_str::<SpringTable>(&text) {
        return Ok(t
            .cells
            .into_iter()
            .filter_map(|c| {
                let label = format!("{}_{}", c.regime.name(), if c.noise { "noisy" } else { "clean" });
                c.report.map(|r| (label, r))
            })
            .collect());
    }
    if let Ok(t) = serde_json::from_str::<EdcTable>(&text) {
        return Ok(t
            .rows
            .into_iter()
            .filter_map(|r| r.report.map(|rep| (r.component, rep)))
            .collect());
    }
    Err(Error::Parse(format!(
        "{}: neither a run report nor a benchmark table",
        path.display()
    )))
}

fn sparsity_cmd(args: SparsityArgs) -> Result<(), Error> {
    let mut reports = Vec::new();
    for path in &args.reports {
        reports.extend(reports_in(path)?);
    }
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidConfig("no run reports found in the inputs".into()))?;
    let one_tol = args.one_tol.unwrap_or(first.1.provenance.config.one_tol);
    let map = sparsity_map(&reports, args.zero_tol, one_tol)?;
    write_or_print(args.out.as_deref(), &map.to_csv())
}

fn write_or_print(out: Option<&Path>, body: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn overrides_are_split_from_clap_flags() {
        let (rest, o) = split_overrides(strs(&[
            "eigenspline",
            "discover",
            "--config",
            "run.toml",
            "--seed",
            "7",
            "--spline-tau=1e-8",
            "--input=data.csv",
            "-v",
        ]));
        assert_eq!(
            rest,
            strs(&["eigenspline", "discover", "--config", "run.toml", "-v"])
        );
        assert_eq!(o, strs(&["seed=7", "spline_tau=1e-8", "input=data.csv"]));
    }

    #[test]
    fn dangling_key_is_left_for_clap() {
        let (rest, o) = split_overrides(strs(&["eigenspline", "discover", "--seed"]));
        assert_eq!(rest, strs(&["eigenspline", "discover", "--seed"]));
        assert!(o.is_empty());
    }
}
