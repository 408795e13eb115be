use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wtele::bench::{
    analytic_fidelity, avg_fidelity_grid, avg_fidelity_mc, linspace, run_trials, summarize, sweep, InputSource,
    SweepParam, TrialRecord, TrialStats, DEFAULT_GRID,
};
use wtele::measurement::{validate_povm_elements, POVM_TOL};
use wtele::states::GeneralWAmplitudes;
use wtele::wpovm::{build_w_povm, lambda_max, w_povm_elements, WMeasurementFamily, A_KINK, LAMBDA_PLATEAU};
use wtele::{BlochAngles, Protocol, WPovmParams};

/// A requested lambda this close above the feasible bound is treated as the
/// bound itself (typed decimals of 2/3 and sqrt(3)/2 land just outside).
const LAMBDA_CLAMP_SLACK: f64 = 1e-6;

#[derive(Parser)]
#[command(name = "wtele", version, about = "Teleportation of a qubit over GHZ and W channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a protocol repeatedly and emit one record per trial.
    Run(RunArgs),
    /// Estimate the average fidelity over uniformly random inputs.
    Fidelity(FidelityArgs),
    /// Check positivity and completeness of the W-channel POVM.
    ValidatePovm(PovmArgs),
    /// Sweep the W-POVM scheme over `a` or `lambda`.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProtocolName {
    GhzBm,
    #[value(name = "ghz-2q")]
    Ghz2q,
    WBm,
    WPovm,
    WGeneralBm,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Mc,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamName {
    A,
    Lambda,
}

/// Accepts decimals plus `p/q`, `sqrt(x)` and `sqrt(x)/q`.
fn parse_real(s: &str) -> Result<f64, String> {
    fn atom(s: &str) -> Result<f64, String> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("sqrt(").and_then(|r| r.strip_suffix(')')) {
            return atom(inner).map(f64::sqrt);
        }
        s.parse::<f64>().map_err(|_| format!("`{s}` is not a number"))
    }
    let v = match s.rsplit_once('/') {
        Some((num, den)) => atom(num)? / atom(den)?,
        None => atom(s)?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

#[derive(Args)]
struct PovmParamArgs {
    /// Frame parameter a (default sqrt(3)/2).
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    a: Option<f64>,
    /// Frame parameter a' (defaults to a).
    #[arg(long = "a-prime", value_parser = parse_real, allow_negative_numbers = true)]
    a_prime: Option<f64>,
    /// POVM scale lambda (default 2/3).
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    lambda: Option<f64>,
}

impl PovmParamArgs {
    fn any(&self) -> bool {
        self.a.is_some() || self.a_prime.is_some() || self.lambda.is_some()
    }

    fn values(&self) -> (f64, f64, f64) {
        let a = self.a.unwrap_or(A_KINK);
        (a, self.a_prime.unwrap_or(a), self.lambda.unwrap_or(LAMBDA_PLATEAU))
    }
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolName,
    #[command(flatten)]
    povm: PovmParamArgs,
    /// Real amplitudes `a,b,c` of the general W channel; rescaled to unit norm.
    #[arg(long = "w-amps", allow_hyphen_values = true)]
    w_amps: Option<String>,
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    /// Polar angle of the input in radians; Haar-random inputs if omitted.
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true, conflicts_with = "alpha2")]
    theta: Option<f64>,
    /// Azimuth of the input in radians (default 0 when --theta is given).
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true, requires = "theta")]
    phi: Option<f64>,
    /// |alpha|^2 of the input, with phi = 0.
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    alpha2: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct FidelityArgs {
    #[command(flatten)]
    protocol: ProtocolArgs,
    #[arg(long, value_enum, default_value_t = Mode::Mc)]
    mode: Mode,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gauss-Legendre nodes in cos(theta) for grid mode.
    #[arg(long, default_value_t = DEFAULT_GRID.0)]
    grid_theta: usize,
    /// Uniform nodes in phi for grid mode.
    #[arg(long, default_value_t = DEFAULT_GRID.1)]
    grid_phi: usize,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Args)]
struct PovmArgs {
    #[command(flatten)]
    params: PovmParamArgs,
    /// Emit the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_enum)]
    param: ParamName,
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    from: f64,
    #[arg(long, value_parser = parse_real, allow_negative_numbers = true)]
    to: f64,
    #[arg(long)]
    steps: usize,
    #[command(flatten)]
    params: PovmParamArgs,
    /// Monte Carlo trials per grid point.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutputArgs,
}

/// Protocol parameters as echoed in JSON output.
#[derive(Serialize)]
struct Params {
    #[serde(skip_serializing_if = "Option::is_none")]
    a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    a_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    w_amps: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    phi: Option<f64>,
}

impl Params {
    fn of(protocol: &Protocol) -> Self {
        let mut p = Params {
            a: None,
            a_prime: None,
            lambda: None,
            w_amps: None,
            theta: None,
            phi: None,
        };
        match protocol {
            Protocol::WPovm(w) => {
                p.a = Some(w.a);
                p.a_prime = Some(w.a_prime);
                p.lambda = Some(w.lambda);
            }
            Protocol::WGeneralBm(g) => p.w_amps = Some([g.a().re, g.b().re, g.c().re]),
            _ => {}
        }
        p
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    protocol: &'static str,
    params: Params,
    n_trials: usize,
    success_rate: f64,
    success_stderr: f64,
    avg_fidelity: f64,
    fidelity_stderr: f64,
    conclusive_part: f64,
    inconclusive_part: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<&'a [TrialRecord]>,
}

#[derive(Serialize)]
struct FidelityRecord {
    protocol: &'static str,
    mode: &'static str,
    n_trials: usize,
    analytic_fidelity: Option<f64>,
    avg_fidelity: f64,
    fidelity_stderr: f64,
    success_rate: f64,
    success_stderr: f64,
    conclusive_part: f64,
    inconclusive_part: f64,
    inconclusive_fidelity: Option<f64>,
    inconclusive_residual: Option<f64>,
    seed: Option<u64>,
}

#[derive(Serialize)]
struct PovmValidation {
    a: f64,
    a_prime: f64,
    lambda: f64,
    lambda_max_a: f64,
    lambda_max_a_prime: f64,
    duality_residual: f64,
    completeness_residual: f64,
    kraus_residual: Option<f64>,
    min_eigenvalues: Vec<f64>,
    valid: bool,
}

type CmdResult = Result<ExitCode, String>;

fn resolve_protocol(args: &ProtocolArgs) -> Result<Protocol, String> {
    if args.protocol != ProtocolName::WPovm && args.povm.any() {
        return Err("--a, --a-prime and --lambda apply only to --protocol w-povm".into());
    }
    if args.protocol != ProtocolName::WGeneralBm && args.w_amps.is_some() {
        return Err("--w-amps applies only to --protocol w-general-bm".into());
    }
    let protocol = match args.protocol {
        ProtocolName::GhzBm => Protocol::GhzBm,
        ProtocolName::Ghz2q => Protocol::GhzTwoQubit,
        ProtocolName::WBm => Protocol::WBm,
        ProtocolName::WPovm => {
            let (a, a_prime, lambda) = args.povm.values();
            let mut params = WPovmParams::new(a, a_prime, lambda).map_err(|e| e.to_string())?;
            let bound = params.lambda_bound();
            if params.lambda > bound && params.lambda - bound <= LAMBDA_CLAMP_SLACK {
                eprintln!("note: lambda = {} exceeds lambda_max = {bound} by less than {LAMBDA_CLAMP_SLACK:e}; using lambda_max", params.lambda);
                params.lambda = bound;
            }
            Protocol::WPovm(params)
        }
        ProtocolName::WGeneralBm => {
            let raw = args
                .w_amps
                .as_deref()
                .ok_or("--protocol w-general-bm requires --w-amps a,b,c")?;
            let v = raw.split(',').map(parse_real).collect::<Result<Vec<_>, _>>()?;
            let [a, b, c] = v[..] else {
                return Err(format!(
                    "--w-amps expects three comma-separated values, got {}",
                    v.len()
                ));
            };
            let norm = (a * a + b * b + c * c).sqrt();
            if norm == 0.0 {
                return Err("--w-amps must not all be zero".into());
            }
            let amps = GeneralWAmplitudes::real(a / norm, b / norm, c / norm).map_err(|e| e.to_string())?;
            Protocol::WGeneralBm(amps)
        }
    };
    // Surfaces infeasible POVM parameters before any work is done.
    protocol.prepare().map_err(|e| e.to_string())?;
    Ok(protocol)
}

fn emit(out: &OutputArgs, bytes: Vec<u8>) -> Result<(), String> {
    match &out.output {
        Some(path) => fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, String> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| e.to_string())?;
    v.push(b'\n');
    Ok(v)
}

fn csv_bytes<F>(fill: F) -> Result<Vec<u8>, String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    fill(&mut w).map_err(|e| e.to_string())?;
    w.into_inner().map_err(|e| e.to_string())
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let protocol = resolve_protocol(&args.protocol)?;
    if args.trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let angles = match (args.theta, args.alpha2) {
        (Some(theta), _) => Some(BlochAngles::new(theta, args.phi.unwrap_or(0.0))),
        (None, Some(p)) => Some(BlochAngles::from_alpha_sqr(p)),
        (None, None) => None,
    }
    .transpose()
    .map_err(|e| e.to_string())?;
    let source = angles.map_or(InputSource::Haar, InputSource::Fixed);
    let prepared = protocol.prepare().map_err(|e| e.to_string())?;
    let records = run_trials(&prepared, source, args.trials, args.seed).map_err(|e| e.to_string())?;
    let stats = summarize(&records).map_err(|e| e.to_string())?;

    let mut params = Params::of(&protocol);
    params.theta = angles.map(|a| a.theta());
    params.phi = angles.map(|a| a.phi());
    let with_trials = matches!(args.out.format, Format::Json).then_some(records.as_slice());
    let summary = summary(&protocol, params, &stats, args.seed, with_trials);

    let bytes = match args.out.format {
        Format::Json => json_bytes(&summary)?,
        Format::Csv => {
            eprintln!(
                "summary: protocol={} n_trials={} success_rate={} success_stderr={} avg_fidelity={} fidelity_stderr={} conclusive_part={} inconclusive_part={} seed={}",
                summary.protocol,
                summary.n_trials,
                summary.success_rate,
                summary.success_stderr,
                summary.avg_fidelity,
                summary.fidelity_stderr,
                summary.conclusive_part,
                summary.inconclusive_part,
                summary.seed
            );
            csv_bytes(|w| {
                w.write_record([
                    "trial",
                    "protocol",
                    "theta",
                    "phi",
                    "alice_outcome",
                    "bob_outcome",
                    "conclusive",
                    "fidelity",
                    "classical_bits",
                ])?;
                for r in &records {
                    w.serialize((
                        r.trial,
                        protocol.name(),
                        r.theta,
                        r.phi,
                        &r.alice_outcome,
                        r.bob_outcome.as_deref().unwrap_or(""),
                        r.conclusive,
                        r.fidelity,
                        r.classical_bits,
                    ))?;
                }
                Ok(())
            })?
        }
    };
    emit(&args.out, bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn summary<'a>(
    protocol: &Protocol,
    params: Params,
    stats: &TrialStats,
    seed: u64,
    trials: Option<&'a [TrialRecord]>,
) -> Summary<'a> {
    Summary {
        protocol: protocol.name(),
        params,
        n_trials: stats.n_trials,
        success_rate: stats.success_rate,
        success_stderr: stats.success_stderr,
        avg_fidelity: stats.avg_fidelity,
        fidelity_stderr: stats.fidelity_stderr,
        conclusive_part: stats.conclusive_part,
        inconclusive_part: stats.inconclusive_part,
        seed,
        trials,
    }
}

fn cmd_fidelity(args: &FidelityArgs) -> CmdResult {
    let protocol = resolve_protocol(&args.protocol)?;
    let (stats, mode, seed) = match args.mode {
        Mode::Mc => {
            if args.trials == 0 {
                return Err("--trials must be at least 1".into());
            }
            let stats = avg_fidelity_mc(&protocol, args.trials, args.seed).map_err(|e| e.to_string())?;
            (stats, "mc", Some(args.seed))
        }
        Mode::Grid => {
            let stats = avg_fidelity_grid(&protocol, args.grid_theta, args.grid_phi).map_err(|e| e.to_string())?;
            (stats, "grid", None)
        }
    };
    let record = FidelityRecord {
        protocol: protocol.name(),
        mode,
        n_trials: stats.n_trials,
        analytic_fidelity: analytic_fidelity(&protocol),
        avg_fidelity: stats.avg_fidelity,
        fidelity_stderr: stats.fidelity_stderr,
        success_rate: stats.success_rate,
        success_stderr: stats.success_stderr,
        conclusive_part: stats.conclusive_part,
        inconclusive_part: stats.inconclusive_part,
        inconclusive_fidelity: stats.inconclusive_fidelity,
        inconclusive_residual: stats.inconclusive_residual(),
        seed,
    };
    let bytes = match args.out.format {
        Format::Csv => csv_bytes(|w| w.serialize(&record))?,
        Format::Json => {
            #[derive(Serialize)]
            struct WithParams<'a> {
                #[serde(flatten)]
                record: &'a FidelityRecord,
                params: Params,
            }
            json_bytes(&WithParams {
                record: &record,
                params: Params::of(&protocol),
            })?
        }
    };
    emit(&args.out, bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate_povm(args: &PovmArgs) -> CmdResult {
    let (a, a_prime, lambda) = args.params.values();
    let params = WPovmParams::new(a, a_prime, lambda).map_err(|e| e.to_string())?;
    let family = WMeasurementFamily::new(a, a_prime).map_err(|e| e.to_string())?;
    let elements = w_povm_elements(&params).map_err(|e| e.to_string())?;
    let report = validate_povm_elements(&elements, POVM_TOL);
    let kraus_residual = if report.passed {
        build_w_povm(&params)
            .ok()
            .and_then(|p| p.validate(POVM_TOL).kraus_residual)
    } else {
        None
    };
    let duality_residual = family.duality_residual();
    let v = PovmValidation {
        a,
        a_prime,
        lambda,
        lambda_max_a: lambda_max(a).map_err(|e| e.to_string())?,
        lambda_max_a_prime: lambda_max(a_prime).map_err(|e| e.to_string())?,
        duality_residual,
        completeness_residual: report.completeness_residual,
        kraus_residual,
        min_eigenvalues: report.min_eigenvalues.clone(),
        valid: report.passed && duality_residual <= POVM_TOL,
    };
    if args.json {
        io::stdout().write_all(&json_bytes(&v)?).map_err(|e| e.to_string())?;
    } else {
        let mut s = String::new();
        s += &format!("a = {}\na' = {}\nlambda = {}\n", v.a, v.a_prime, v.lambda);
        s += &format!(
            "lambda_max(a) = {}\nlambda_max(a') = {}\n",
            v.lambda_max_a, v.lambda_max_a_prime
        );
        s += &format!("duality residual = {:e}\n", v.duality_residual);
        s += &format!("completeness residual = {:e}\n", v.completeness_residual);
        if let Some(k) = v.kraus_residual {
            s += &format!("kraus residual = {k:e}\n");
        }
        for (i, e) in v.min_eigenvalues.iter().enumerate() {
            s += &format!("min eigenvalue M{} = {e:e}\n", i + 1);
        }
        s += if v.valid {
            "status: valid\n"
        } else {
            "status: invalid\n"
        };
        io::stdout().write_all(s.as_bytes()).map_err(|e| e.to_string())?;
    }
    Ok(if v.valid { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    if matches!(args.param, ParamName::A) && (args.params.a.is_some() || args.params.a_prime.is_some()) {
        return Err("--a and --a-prime cannot be fixed in an a sweep".into());
    }
    if matches!(args.param, ParamName::Lambda) && args.params.lambda.is_some() {
        return Err("--lambda cannot be fixed in a lambda sweep".into());
    }
    if args.trials == 0 {
        return Err("--trials must be at least 1".into());
    }
    let values = linspace(args.from, args.to, args.steps).map_err(|e| e.to_string())?;
    let param = match args.param {
        ParamName::A => SweepParam::A,
        ParamName::Lambda => SweepParam::Lambda,
    };
    let rows = sweep(args.params.values(), param, &values, args.trials, args.seed).map_err(|e| e.to_string())?;
    let bytes = match args.out.format {
        Format::Csv => csv_bytes(|w| rows.iter().try_for_each(|r| w.serialize(r)))?,
        Format::Json => json_bytes(&rows)?,
    };
    emit(&args.out, bytes)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Fidelity(a) => cmd_fidelity(a),
        Command::ValidatePovm(a) => cmd_validate_povm(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    result.unwrap_or_else(|msg| {
        eprintln!("error: {}", msg.replace('\n', " "));
        ExitCode::from(2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_real_forms() {
        assert_eq!(parse_real("0.25").unwrap(), 0.25);
        assert_eq!(parse_real("2/3").unwrap(), 2.0 / 3.0);
        assert_eq!(parse_real("sqrt(3)/2").unwrap(), 3f64.sqrt() / 2.0);
        assert_eq!(parse_real("sqrt(2)").unwrap(), 2f64.sqrt());
        assert!(parse_real("abc").is_err());
        assert!(parse_real("1/0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
