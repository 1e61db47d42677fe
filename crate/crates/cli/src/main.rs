use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use upc::analysis::{
    analyze_ar1, analyze_bernoulli, analyze_normal, matched_normal, Analysis, AnalysisOptions,
    DEFAULT_TABLE_REPLICATES, DEFAULT_TABLE_SEED,
};
use upc::io::{read_dataset_csv, ser_vec_f64, to_json, write_tilted_csv};
use upc::models::data::{bernoulli_gelman, newcomb};
use upc::models::{binary_from_f64, Ar1Model, McmcConfig, TruncNormal, AR1_MIN_N};
use upc::rng::derive_seed;
use upc::simharness::{run_scenario, scenario_tables, selfcheck, Scenario, SelfCheckConfig};
use upc::stat_tests::HoeffdingNullTable;
use upc::UpcError;

#[derive(Parser, Debug)]
#[command(name = "upc", version, about = "Uniform parametrization checks for Bayesian models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Normal model with an NIG prior on Newcomb's speed-of-light data
    Newcomb(NewcombArgs),
    /// Beta–Bernoulli model on a binary sequence
    Bernoulli(BernoulliArgs),
    /// Fit an AR(1) model by MCMC and run the six AR(1) checks
    Ar1Fit(Ar1FitArgs),
    /// Expected p-value CDFs over datasets from an AR(1) misspecification scenario
    Ar1Scenario(ScenarioArgs),
    /// Build and cache Hoeffding null tables
    CalibrateHoeffding(CalibrateArgs),
    /// Reduced-scale property suite; exits 1 if any property fails
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for output files; the report is always printed to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Format of the curve exports
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Debug)]
struct TableArgs {
    /// Null-table size J
    #[arg(long = "j", default_value_t = DEFAULT_TABLE_REPLICATES)]
    j: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_SEED)]
    table_seed: u64,
    #[arg(long, env = "UPC_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct NewcombArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 50_000)]
    draws: usize,
    /// weak, data_dependent or poor
    #[arg(long, default_value = "weak")]
    prior: String,
    /// CSV with a `y` column; defaults to the bundled Newcomb data
    #[arg(long)]
    data: Option<PathBuf>,
    /// Replace the data by a normal sample with the same size, mean and sd
    #[arg(long)]
    synthetic: bool,
}

#[derive(Args, Debug)]
struct BernoulliArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tables: TableArgs,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    /// uniform, jeffreys or poor
    #[arg(long, default_value = "uniform")]
    prior: String,
    /// CSV with a binary `y` column; defaults to the bundled sequence
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct McmcArgs {
    #[arg(long, default_value_t = 2000)]
    mcmc_iters: usize,
    #[arg(long, default_value_t = 1000)]
    mcmc_burnin: usize,
    #[arg(long, default_value_t = 1)]
    mcmc_thin: usize,
}

impl McmcArgs {
    fn config(&self, seed: u64) -> McmcConfig {
        McmcConfig {
            iterations: self.mcmc_iters,
            burn_in: self.mcmc_burnin,
            thin: self.mcmc_thin,
            seed,
            ..McmcConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct Ar1FitArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tables: TableArgs,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// CSV with a `y` column
    #[arg(long)]
    data: PathBuf,
    /// Truncated-normal prior on φ as m,s,lo,hi
    #[arg(long, default_value = "0,0.4,-0.5,0.5")]
    phi_prior: String,
    /// Truncated-normal prior on σ as m,s,lo,hi
    #[arg(long, default_value = "1.5,0.4,1,2")]
    sigma_prior: String,
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    tables: TableArgs,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Scenario 1..5
    #[arg(long)]
    id: u8,
    #[arg(long, default_value_t = 1000)]
    datasets: usize,
    /// Series length
    #[arg(long, default_value_t = 500)]
    n: usize,
}

#[derive(Args, Debug)]
struct CalibrateArgs {
    /// Sample sizes, comma separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long = "j", default_value_t = DEFAULT_TABLE_REPLICATES)]
    j: usize,
    #[arg(long, default_value_t = DEFAULT_TABLE_SEED)]
    seed: u64,
    #[arg(long, env = "UPC_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelfcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace the external covariate by the data itself
    #[arg(long)]
    inject_dependence: bool,
}

enum Failure {
    Input(String),
    Property,
}

impl From<UpcError> for Failure {
    fn from(e: UpcError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn default_cache_dir() -> PathBuf {
    match std::env::var_os("HOME") {
        Some(home) => Path::new(&home).join(".cache").join("upc"),
        None => PathBuf::from(".upc-cache"),
    }
}

fn read_data(path: &Path) -> Result<Vec<f64>, Failure> {
    let file = fs::File::open(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    read_dataset_csv(file).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> CmdResult {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[derive(Serialize)]
struct CurveJson<'a> {
    draw: usize,
    #[serde(serialize_with = "ser_vec_f64")]
    grid: &'a [f64],
    #[serde(serialize_with = "ser_vec_f64")]
    tilted: &'a [f64],
}

fn emit_analysis(analysis: &Analysis, common: &Common) -> CmdResult {
    let json = to_json(&analysis.report)?;
    print!("{json}");
    let Some(dir) = &common.out else {
        return Ok(());
    };
    write_file(dir, "aggregate.json", json.as_bytes())?;
    let mut per_draw = Vec::new();
    analysis.write_per_draw_csv(&mut per_draw)?;
    write_file(dir, "per_draw_pvalues.csv", &per_draw)?;
    match common.format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_tilted_csv(&mut buf, &analysis.tilted)?;
            write_file(dir, "tilted_cdf.csv", &buf)?;
        }
        Format::Json => {
            let curves: Vec<CurveJson> = analysis
                .tilted
                .iter()
                .enumerate()
                .map(|(draw, c)| CurveJson { draw, grid: &c.grid, tilted: &c.values })
                .collect();
            write_file(dir, "tilted_cdf.json", to_json(&curves)?.as_bytes())?;
        }
    }
    Ok(())
}

fn options(common: &Common, draws: usize, tables: Option<&TableArgs>) -> AnalysisOptions {
    let mut opts = AnalysisOptions { draws, seed: common.seed, ..Default::default() };
    if let Some(t) = tables {
        opts.table_replicates = t.j;
        opts.table_seed = t.table_seed;
        opts.cache_dir = Some(t.cache_dir.clone().unwrap_or_else(default_cache_dir));
    }
    opts
}

fn cmd_newcomb(args: &NewcombArgs) -> CmdResult {
    let (mut data, mut name) = match &args.data {
        Some(p) => (read_data(p)?, p.display().to_string()),
        None => (newcomb(), "newcomb".to_string()),
    };
    if args.synthetic {
        data = matched_normal(&data, derive_seed(args.common.seed, 0x5E))?;
        name = format!("{name} (matched normal)");
    }
    let opts = options(&args.common, args.draws, None);
    emit_analysis(&analyze_normal(&data, &name, &args.prior, &opts)?, &args.common)
}

fn cmd_bernoulli(args: &BernoulliArgs) -> CmdResult {
    let (data, name) = match &args.data {
        Some(p) => (binary_from_f64(&read_data(p)?)?, p.display().to_string()),
        None => (bernoulli_gelman(), "bernoulli_gelman".to_string()),
    };
    let opts = options(&args.common, args.draws, Some(&args.tables));
    emit_analysis(&analyze_bernoulli(&data, &name, &args.prior, &opts)?, &args.common)
}

fn parse_tn(spec: &str) -> Result<TruncNormal, Failure> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::Input(format!("prior `{spec}`: {e}")))?;
    let [m, s, lo, hi] = v[..] else {
        return Err(Failure::Input(format!("prior `{spec}` needs four values m,s,lo,hi")));
    };
    Ok(TruncNormal::new(m, s, lo, hi)?)
}

fn cmd_ar1_fit(args: &Ar1FitArgs) -> CmdResult {
    let y = read_data(&args.data)?;
    if y.len() < AR1_MIN_N {
        return Err(Failure::Input(format!("AR(1) fit needs n >= {AR1_MIN_N}, got {}", y.len())));
    }
    let model = Ar1Model::new(parse_tn(&args.phi_prior)?, parse_tn(&args.sigma_prior)?, y.len())?;
    let opts = options(&args.common, 0, Some(&args.tables));
    let config = args.mcmc.config(args.common.seed);
    let analysis = analyze_ar1(&y, &args.data.display().to_string(), &model, &config, &opts)?;
    emit_analysis(&analysis, &args.common)
}

fn cmd_ar1_scenario(args: &ScenarioArgs) -> CmdResult {
    let scenario = Scenario::new(args.id, args.n)?;
    let cache = args.tables.cache_dir.clone().unwrap_or_else(default_cache_dir);
    let tables = scenario_tables(&scenario, args.tables.j, args.tables.table_seed, Some(&cache))?;
    let config = args.mcmc.config(0);
    let result = run_scenario(&scenario, args.datasets, &config, args.common.seed, &tables)?;
    let json = to_json(&result)?;
    print!("{json}");
    if let Some(dir) = &args.common.out {
        match args.common.format {
            Format::Json => write_file(dir, "scenario.json", json.as_bytes())?,
            Format::Csv => {
                write_file(dir, "scenario.json", json.as_bytes())?;
                let mut buf = Vec::new();
                result.write_csv(&mut buf)?;
                write_file(dir, "expected_cdf.csv", &buf)?;
            }
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct TableEntry {
    n: usize,
    #[serde(rename = "J")]
    j: usize,
    seed: u64,
    path: String,
}

fn cmd_calibrate(args: &CalibrateArgs) -> CmdResult {
    let dir = args.cache_dir.clone().unwrap_or_else(default_cache_dir);
    fs::create_dir_all(&dir).map_err(|e| Failure::Input(format!("cache dir {}: {e}", dir.display())))?;
    let mut entries = Vec::new();
    for &n in &args.n {
        let (table, built) = HoeffdingNullTable::load_or_build(&dir, n, args.j, args.seed)?;
        // Kept out of the JSON so reruns print identical output.
        eprintln!("n = {n}: {}", if built { "built" } else { "cached" });
        entries.push(TableEntry {
            n,
            j: table.replicates(),
            seed: args.seed,
            path: dir.join(HoeffdingNullTable::file_name(n, args.j, args.seed)).display().to_string(),
        });
    }
    print!("{}", to_json(&entries)?);
    Ok(())
}

fn cmd_selfcheck(args: &SelfcheckArgs) -> CmdResult {
    let config = SelfCheckConfig {
        seed: args.seed,
        inject_dependence: args.inject_dependence,
        ..Default::default()
    };
    let report = selfcheck(&config)?;
    let json = to_json(&report)?;
    print!("{json}");
    if let Some(dir) = &args.out {
        write_file(dir, "selfcheck.json", json.as_bytes())?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {} ({})", c.name, c.statistic, c.criterion);
    }
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Property)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Newcomb(a) => cmd_newcomb(a),
        Command::Bernoulli(a) => cmd_bernoulli(a),
        Command::Ar1Fit(a) => cmd_ar1_fit(a),
        Command::Ar1Scenario(a) => cmd_ar1_scenario(a),
        Command::CalibrateHoeffding(a) => cmd_calibrate(a),
        Command::Selfcheck(a) => cmd_selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Property) => ExitCode::from(1),
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
