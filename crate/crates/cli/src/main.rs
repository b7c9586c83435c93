mod document;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use cic_core::dataset::{load_csv, CsvOptions, PanelDataset, Period};
use cic_core::estimators::{
    counterfactual_strong_conditional, counterfactual_strong_unconditional, counterfactual_weak,
    EffectRequest, Mode, Parameter,
};
use cic_core::inference::BootstrapConfig;
use cic_core::simulation::{latent_path, simulate_panel, write_latent_csv, write_observations_csv, DgpConfig};
use cic_core::Error;

use document::{cell_summaries, evaluate, to_csv, Diagnostics, Metadata, ResultDocument, SCHEMA_VERSION};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NOT_IDENTIFIED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "cic", version, about = "Changes-in-changes estimation for discrete treatments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate effect parameters from a two-period CSV.
    Estimate(EstimateArgs),
    /// Draw a synthetic dataset (and its latent table) from a config.
    Simulate(SimulateArgs),
    /// Report cell sizes, shares and support diagnostics.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "outcome")]
    outcome: String,
    #[arg(long, default_value = "treatment")]
    treatment: String,
    #[arg(long, default_value = "period")]
    period: String,
    /// Raw labels of the two periods, pre first.
    #[arg(long, default_value = "0,1", value_delimiter = ',', num_args = 2)]
    period_labels: Vec<String>,
    #[arg(long, default_value = "0")]
    control: String,
    /// Ordered levels, control first. Needed for ACR and ACRT.
    #[arg(long, value_delimiter = ',')]
    ordered: Option<Vec<String>>,
    #[arg(long, default_value_t = cic_core::dataset::DEFAULT_MIN_CELL_SIZE)]
    min_cell_size: usize,
    #[arg(long, default_value = "weak")]
    mode: Mode,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Comma list of qte, ate, qtt, att, acr, acrt, did.
    #[arg(long, default_value = "att", value_delimiter = ',')]
    params: Vec<Parameter>,
    /// START:STOP:STEP or a comma list.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    taus: String,
    /// Treatment level; all non-control levels when omitted.
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    dprime: Option<String>,
    #[arg(long)]
    cond: Option<String>,
    /// Bootstrap replicates; no intervals when omitted.
    #[arg(long)]
    bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for the bootstrap; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Units per period.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    input: InputArgs,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Usage(String),
    Io(PathBuf, std::io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(Error::NotIdentified { .. }) => EXIT_NOT_IDENTIFIED,
            Failure::Core(Error::Io(_)) | Failure::Io(..) => EXIT_IO,
            Failure::Core(Error::Csv(e)) if matches!(e.kind(), csv::ErrorKind::Io(_)) => EXIT_IO,
            _ => EXIT_VALIDATION,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Usage(m) => f.write_str(m),
            Failure::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| Failure::Io(path.to_path_buf(), e))
}

fn csv_options(a: &InputArgs) -> CsvOptions {
    CsvOptions {
        outcome: a.outcome.clone(),
        treatment: a.treatment.clone(),
        period: a.period.clone(),
        period_labels: (a.period_labels[0].clone(), a.period_labels[1].clone()),
        control: a.ordered.as_ref().map(|o| o[0].clone()).unwrap_or_else(|| a.control.clone()),
        ordered: a.ordered.clone(),
        min_cell_size: a.min_cell_size,
    }
}

fn load(a: &InputArgs) -> CliResult<(PanelDataset, Vec<u8>)> {
    let bytes = read_bytes(&a.input)?;
    let ds = load_csv(bytes.as_slice(), &csv_options(a))?;
    Ok((ds, bytes))
}

fn round_tau(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// `START:STOP:STEP` (inclusive of STOP) or `a,b,c`.
fn parse_taus(spec: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &str| Failure::Usage(format!("malformed tau grid `{spec}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{s}` is not a number")));
    let taus = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected START:STOP:STEP"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("STEP must be positive and STOP >= START"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| round_tau(start + k as f64 * step)).collect()
    } else {
        spec.split(',').map(num).collect::<CliResult<Vec<f64>>>()?
    };
    if taus.is_empty() {
        return Err(bad("no grid points"));
    }
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(bad(&format!("{t} is outside (0, 1)")));
    }
    Ok(taus)
}

/// One request per parameter and treated level. Missing `d` expands to
/// every non-control level.
fn build_requests(args: &EstimateArgs, ds: &PanelDataset) -> CliResult<Vec<EffectRequest>> {
    let levels = ds.levels();
    let targets: Vec<String> = match &args.d {
        Some(d) => {
            levels.index_of(d)?;
            vec![d.clone()]
        }
        None => levels.labels()[1..].to_vec(),
    };
    let mode = args.input.mode;
    let mut out = Vec::new();
    for &p in &args.params {
        for d in &targets {
            let mut req = EffectRequest::new(p, mode, d.as_str());
            if p.is_quantile() {
                req.tau = Some(0.5);
            }
            if let Some(dp) = &args.dprime {
                req = req.with_d_prime(dp.as_str());
            }
            if let Some(c) = &args.cond {
                if matches!(p, Parameter::Qtt | Parameter::Att | Parameter::Acrt) {
                    req = req.with_cond(c.as_str());
                }
            }
            // surface scope and argument errors before any work
            req.resolve(levels)?;
            out.push(req);
        }
    }
    Ok(out)
}

fn settings(args: &EstimateArgs, taus: &[f64]) -> BTreeMap<&'static str, String> {
    let a = &args.input;
    let mut s = BTreeMap::new();
    s.insert("outcome", a.outcome.clone());
    s.insert("treatment", a.treatment.clone());
    s.insert("period", a.period.clone());
    s.insert("period_labels", a.period_labels.join(","));
    s.insert("control", a.control.clone());
    if let Some(o) = &a.ordered {
        s.insert("ordered", o.join(","));
    }
    s.insert("min_cell_size", a.min_cell_size.to_string());
    s.insert(
        "params",
        args.params.iter().map(|p| p.name().to_ascii_lowercase()).collect::<Vec<_>>().join(","),
    );
    s.insert("taus", taus.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
    for (k, v) in [("d", &args.d), ("dprime", &args.dprime), ("cond", &args.cond)] {
        if let Some(v) = v {
            s.insert(k, v.clone());
        }
    }
    if let Some(b) = args.bootstrap {
        s.insert("bootstrap", b.to_string());
        s.insert("level", args.level.to_string());
    }
    s
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn run_estimate(args: EstimateArgs) -> CliResult<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let taus = parse_taus(&args.taus)?;
    let (ds, bytes) = load(&args.input)?;
    let requests = build_requests(&args, &ds)?;
    let boot = args
        .bootstrap
        .map(|b| BootstrapConfig::new(b, args.level, args.seed))
        .transpose()?;
    let (estimates, curves) = evaluate(&ds, &requests, &taus, boot.as_ref())?;

    let support = ds.support_check(args.input.mode);
    let mut warnings: Vec<String> = ds.warnings().to_vec();
    warnings.extend(support.iter().map(|f| f.to_string()));
    let out_of_range_total = estimates.iter().map(|e| e.out_of_range).sum::<usize>()
        + curves.iter().map(|c| c.out_of_range).sum::<usize>();
    let doc = ResultDocument {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            input_sha256: hex(&Sha256::digest(&bytes)),
            mode: args.input.mode,
            seed: args.bootstrap.map(|_| args.seed),
            settings: settings(&args, &taus),
        },
        estimates,
        curves,
        diagnostics: Diagnostics {
            cells: cell_summaries(&ds),
            support,
            out_of_range_total,
        },
        warnings,
    };
    let mut text = match args.format {
        Format::Json => serde_json::to_string_pretty(&doc).expect("document serializes"),
        Format::Csv => to_csv(&doc),
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &args.output {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn run_simulate(args: SimulateArgs) -> CliResult<()> {
    let text = String::from_utf8(read_bytes(&args.config)?)
        .map_err(|_| Failure::Usage(format!("{}: config is not UTF-8", args.config.display())))?;
    let cfg = DgpConfig::from_toml_str(&text)?;
    let sim = simulate_panel(&cfg, args.n, args.seed)?;
    let mut data = Vec::new();
    write_observations_csv(&sim.observations, &mut data)?;
    let mut latent = Vec::new();
    write_latent_csv(&sim.latent, &mut latent)?;
    write_bytes(&args.output, &data)?;
    write_bytes(&latent_path(&args.output), &latent)?;
    Ok(())
}

fn run_validate(args: ValidateArgs) -> CliResult<()> {
    let (ds, _) = load(&args.input)?;
    let mode = args.input.mode;
    let levels = ds.levels();
    let mut out = String::new();
    out.push_str(&format!("mode: {mode}\n"));
    out.push_str("cells (level: period 0 / period 1)\n");
    for c in cell_summaries(&ds) {
        out.push_str(&format!("  {}: {} / {}\n", c.level, c.n_pre, c.n_post));
    }
    for p in Period::BOTH {
        let shares = ds.shares(p);
        let line: Vec<String> = levels
            .labels()
            .iter()
            .zip(&shares)
            .map(|(l, s)| format!("{l}={s:.4}"))
            .collect();
        out.push_str(&format!("shares period {p}: {}\n", line.join(" ")));
    }
    for w in ds.warnings() {
        out.push_str(&format!("WARNING: {w}\n"));
    }
    let findings = ds.support_check(mode);
    if findings.is_empty() {
        out.push_str("support: no findings\n");
    } else {
        for f in &findings {
            out.push_str(&format!("{f}\n"));
        }
    }
    out.push_str("out-of-range compositions\n");
    let labels = levels.labels();
    match mode {
        Mode::Weak => {
            for d in &labels[1..] {
                let cf = counterfactual_weak(&ds, d)?;
                out.push_str(&format!("  Y_10 | D={d}: {}\n", cf.out_of_range));
            }
        }
        Mode::Strong => {
            for d in labels {
                let cf = counterfactual_strong_unconditional(&ds, d)?;
                out.push_str(&format!("  Y_1{d}: {}\n", cf.out_of_range));
                for dp in labels.iter().filter(|dp| *dp != d) {
                    let cf = counterfactual_strong_conditional(&ds, d, dp)?;
                    out.push_str(&format!("  Y_1{d} | D={dp}: {}\n", cf.out_of_range));
                }
            }
        }
    }
    std::io::stdout()
        .write_all(out.as_bytes())
        .map_err(|e| Failure::Io(PathBuf::from("<stdout>"), e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Validate(a) => run_validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
