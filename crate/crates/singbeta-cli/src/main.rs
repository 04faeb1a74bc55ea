//! Command-line front end: density evaluation, sampling, table generation
//! and the verification suite, with reproducible and scriptable IO.
//!
//! Exit codes: 0 ok, 2 validation error, 3 numerical error, 4 verification
//! failure.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::json;

use singbeta::betadist::{BetaKind, BetaParams, DensityContext, DensityFamily, SpectralPoint};
use singbeta::error::ErrorKind;
use singbeta::hypermat::SeriesControl;
use singbeta::invariant::{self, InvariantTables};
use singbeta::zonal;

mod checks;

#[derive(Parser)]
#[command(
    name = "singbeta",
    version,
    about = "matrix-variate beta densities, samplers and verification"
)]
struct Cli {
    /// JSON file with default values for the common flags; explicit flags win
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write output here instead of stdout (written only on success)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a density at one or more points
    Eval(EvalArgs),
    /// Draw samples from the beta type I/II constructions
    Sample(SampleArgs),
    /// Emit zonal or invariant-polynomial coefficient tables
    Tables(TablesArgs),
    /// Run the verification suite and report pass/fail per check
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Dist {
    Beta1Central,
    Beta2Central,
    Beta1Dnc,
    Beta2Dnc,
    Beta1Nca,
    Beta1Ncb,
    Beta2Nca,
    Beta2Ncb,
    Beta1Sym,
    Beta2Sym,
}

impl Dist {
    fn kind(self) -> BetaKind {
        match self {
            Dist::Beta1Central
            | Dist::Beta1Dnc
            | Dist::Beta1Nca
            | Dist::Beta1Ncb
            | Dist::Beta1Sym => BetaKind::Beta1,
            _ => BetaKind::Beta2,
        }
    }

    fn family(self) -> DensityFamily {
        match self {
            Dist::Beta1Central | Dist::Beta2Central => DensityFamily::Central,
            Dist::Beta1Dnc | Dist::Beta2Dnc => DensityFamily::DoublyNoncentral,
            Dist::Beta1Nca | Dist::Beta2Nca => DensityFamily::NoncentralA,
            Dist::Beta1Ncb | Dist::Beta2Ncb => DensityFamily::NoncentralB,
            Dist::Beta1Sym | Dist::Beta2Sym => DensityFamily::Symmetrised,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Jsonl,
}

#[derive(Args)]
struct CommonParams {
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    /// Noncentrality for the numerator scatter matrix: scalar, `diag:a,b`
    /// or `file:path.csv`; omitted means central
    #[arg(long)]
    omega1: Option<String>,
    /// Noncentrality for the denominator scatter matrix
    #[arg(long)]
    omega2: Option<String>,
    /// Series truncation by total degree
    #[arg(long)]
    kmax: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    /// Worker threads for independent checks; results do not depend on it
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_enum)]
    dist: Dist,
    /// Evaluation point: scalar, `diag:l1,l2`, `file:U.csv` (full matrix) or
    /// `spectral:point.json` ({"eigenvalues": [...], "frame": [[...]]});
    /// repeatable
    #[arg(long, required = true)]
    point: Vec<String>,
    /// Multiply by the eigenvalue/frame measure factor (joint density of
    /// (L, H1))
    #[arg(long, default_value_t = false)]
    joint: bool,
    #[command(flatten)]
    common: CommonParams,
}

#[derive(Args)]
struct SampleArgs {
    /// beta1 draws U = (A+B)^{-1/2} A (A+B)^{-1/2}; beta2 draws B^{-1/2} A B^{-1/2}
    #[arg(long, value_parser = ["beta1", "beta2"])]
    dist: String,
    #[command(flatten)]
    common: CommonParams,
}

#[derive(Args)]
struct TablesArgs {
    /// Which table family to emit
    #[arg(long, value_parser = ["zonal", "invariant"])]
    what: String,
    /// Invariant bidegree (X side)
    #[arg(long)]
    k: Option<usize>,
    /// Invariant bidegree (Y side)
    #[arg(long)]
    l: Option<usize>,
    /// Invariant table source
    #[arg(long, value_parser = ["fixture", "bootstrap"], default_value = "fixture")]
    source: String,
    #[command(flatten)]
    common: CommonParams,
}

#[derive(Args)]
struct VerifyArgs {
    /// Named check to run (default: the whole suite)
    #[arg(long)]
    check: Option<String>,
    #[command(flatten)]
    common: CommonParams,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e.downcast_ref::<singbeta::Error>() {
                Some(err) if err.kind() == ErrorKind::Numerical => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

type AnyError = Box<dyn std::error::Error>;

fn run(cli: Cli) -> Result<ExitCode, AnyError> {
    let overrides = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| format!("config is not valid JSON: {e}"))?
        }
        None => serde_json::Value::Null,
    };
    let (output, code) = match cli.command {
        Command::Eval(args) => (cmd_eval(args, &overrides)?, ExitCode::SUCCESS),
        Command::Sample(args) => (cmd_sample(args, &overrides)?, ExitCode::SUCCESS),
        Command::Tables(args) => (cmd_tables(args, &overrides)?, ExitCode::SUCCESS),
        Command::Verify(args) => cmd_verify(args, &overrides)?,
    };
    // output is materialized fully before any write, so failures never leave
    // partial files behind
    match &cli.out {
        Some(path) => std::fs::write(path, output)
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(code)
}

/// flag > config file > default
fn resolve<T: Clone + serde::de::DeserializeOwned>(
    flag: &Option<T>,
    overrides: &serde_json::Value,
    key: &str,
    default: T,
) -> T {
    if let Some(v) = flag {
        return v.clone();
    }
    if let Some(v) = overrides.get(key) {
        if let Ok(v) = serde_json::from_value::<T>(v.clone()) {
            return v;
        }
    }
    default
}

fn parse_matrix(spec: &str, m: usize, what: &str) -> Result<DMatrix<f64>, AnyError> {
    if let Some(rest) = spec.strip_prefix("diag:") {
        let vals = parse_floats(rest)?;
        if vals.len() != m {
            return Err(format!("{what}: diag has {} entries, need {m}", vals.len()).into());
        }
        return Ok(DMatrix::from_fn(m, m, |i, j| if i == j { vals[i] } else { 0.0 }));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        return read_csv_matrix(path, m, what);
    }
    let v: f64 = spec
        .parse()
        .map_err(|_| format!("{what}: cannot parse '{spec}' (use diag:, file: or a scalar)"))?;
    if m != 1 {
        return Err(format!("{what}: scalar shorthand requires m = 1").into());
    }
    Ok(DMatrix::from_element(1, 1, v))
}

fn parse_floats(s: &str) -> Result<Vec<f64>, AnyError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| -> AnyError { format!("bad number '{t}'").into() })
        })
        .collect()
}

fn read_csv_matrix(path: &str, m: usize, what: &str) -> Result<DMatrix<f64>, AnyError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{what}: cannot read {path}: {e}"))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_floats(line) {
            Ok(vals) => rows.push(vals),
            Err(e) => {
                // a non-numeric first line is treated as a header
                if i == 0 {
                    continue;
                }
                return Err(format!("{what}: line {}: {e}", i + 1).into());
            }
        }
    }
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(format!("{what}: expected a {m}x{m} matrix in {path}").into());
    }
    Ok(DMatrix::from_fn(m, m, |i, j| rows[i][j]))
}

fn build_params(c: &CommonParams, overrides: &serde_json::Value) -> Result<BetaParams, AnyError> {
    let m = resolve(&c.m, overrides, "m", 1);
    let q = resolve(&c.q, overrides, "q", m);
    let r = resolve(&c.r, overrides, "r", 2.0);
    let s = resolve(&c.s, overrides, "s", 2.0);
    let from_cfg = |key: &str| {
        overrides.get(key).and_then(|v| v.as_str()).map(String::from)
    };
    let omega1_spec = c.omega1.clone().or_else(|| from_cfg("omega1"));
    let omega2_spec = c.omega2.clone().or_else(|| from_cfg("omega2"));
    let omega1 = match &omega1_spec {
        Some(sp) => parse_matrix(sp, m, "omega1")?,
        None => DMatrix::zeros(m, m),
    };
    let omega2 = match &omega2_spec {
        Some(sp) => parse_matrix(sp, m, "omega2")?,
        None => DMatrix::zeros(m, m),
    };
    Ok(BetaParams::new(m, q, r, s, omega1, omega2)?)
}

fn params_json(p: &BetaParams, kmax: usize, seed: u64) -> serde_json::Value {
    let mat = |x: &DMatrix<f64>| {
        (0..x.nrows())
            .map(|i| (0..x.ncols()).map(|j| x[(i, j)]).collect::<Vec<_>>())
            .collect::<Vec<_>>()
    };
    json!({
        "m": p.m, "q": p.q, "r": p.r, "s": p.s,
        "omega1": mat(&p.omega1), "omega2": mat(&p.omega2),
        "kmax": kmax, "seed": seed,
    })
}

fn parse_point(spec: &str, params: &BetaParams, kind: BetaKind) -> Result<SpectralPoint, AnyError> {
    if let Some(path) = spec.strip_prefix("spectral:") {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("point: cannot read {path}: {e}"))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let eig: Vec<f64> = serde_json::from_value(
            v.get("eigenvalues").cloned().ok_or("point JSON lacks 'eigenvalues'")?,
        )?;
        let frame_rows: Vec<Vec<f64>> =
            serde_json::from_value(v.get("frame").cloned().ok_or("point JSON lacks 'frame'")?)?;
        if frame_rows.len() != params.m || frame_rows.iter().any(|r| r.len() != eig.len()) {
            return Err("point frame must be m x q".into());
        }
        let frame = DMatrix::from_fn(params.m, eig.len(), |i, j| frame_rows[i][j]);
        return Ok(SpectralPoint::new(eig, frame, kind)?);
    }
    if let Some(rest) = spec.strip_prefix("diag:") {
        let mut vals = parse_floats(rest)?;
        if vals.len() != params.q {
            return Err(format!("point: diag needs q = {} eigenvalues", params.q).into());
        }
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let frame = DMatrix::from_fn(params.m, params.q, |i, j| if i == j { 1.0 } else { 0.0 });
        return Ok(SpectralPoint::new(vals, frame, kind)?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let x = read_csv_matrix(path, params.m, "point")?;
        let d = singbeta::eigdecomp_rank_q(&x, params.q)?;
        return Ok(d.point(kind)?);
    }
    let v: f64 = spec.parse().map_err(|_| format!("point: cannot parse '{spec}'"))?;
    if params.m != 1 {
        return Err("point: scalar shorthand requires m = 1".into());
    }
    Ok(SpectralPoint::new(vec![v], DMatrix::from_element(1, 1, 1.0), kind)?)
}

fn cmd_eval(args: EvalArgs, overrides: &serde_json::Value) -> Result<String, AnyError> {
    let params = build_params(&args.common, overrides)?;
    let kmax = resolve(&args.common.kmax, overrides, "kmax", 3);
    let seed = resolve(&args.common.seed, overrides, "seed", 0);
    let format = resolve(&args.common.format, overrides, "format", Format::Json);
    let ctx = DensityContext::new(params.m, kmax)?;
    let ctrl = SeriesControl::new(kmax);
    let family = args.dist.family();
    let kind = args.dist.kind();

    let mut records = Vec::new();
    for spec in &args.point {
        let point = parse_point(spec, &params, kind)?;
        let eval = if args.joint {
            ctx.eigen_joint_density(&point, &params, &ctrl, family)?
        } else {
            ctx.density(family, &point, &params, &ctrl)?
        };
        records.push(json!({
            "point": spec,
            "log_density": eval.value.log_magnitude,
            "sign": eval.value.sign,
            "tail_ratio": eval.tail_ratio,
            "series_negative": eval.series_negative,
        }));
    }
    let resolved = json!({
        "subcommand": "eval",
        "dist": args.dist,
        "joint": args.joint,
        "params": params_json(&params, kmax, seed),
    });
    match format {
        Format::Json => Ok(format!(
            "{}\n",
            serde_json::to_string_pretty(&json!({
                "resolved_config": resolved,
                "evaluations": records,
            }))?
        )),
        Format::Csv | Format::Jsonl => {
            let mut out = String::new();
            writeln!(out, "# {}", serde_json::to_string(&resolved)?)?;
            writeln!(out, "point,log_density,sign,tail_ratio")?;
            for r in &records {
                writeln!(
                    out,
                    "{},{},{},{}",
                    r["point"].as_str().unwrap_or(""),
                    r["log_density"],
                    r["sign"],
                    r["tail_ratio"]
                )?;
            }
            Ok(out)
        }
    }
}

fn cmd_sample(args: SampleArgs, overrides: &serde_json::Value) -> Result<String, AnyError> {
    let params = build_params(&args.common, overrides)?;
    let n = resolve(&args.common.n, overrides, "n", 1000);
    let seed = resolve(&args.common.seed, overrides, "seed", 0);
    let format = resolve(&args.common.format, overrides, "format", Format::Csv);
    let meta = json!({
        "subcommand": "sample",
        "dist": args.dist,
        "n": n,
        "params": params_json(&params, 0, seed),
    });
    let mut rng = singbeta::stream_rng(seed, 0);
    let mut out = String::new();
    match format {
        Format::Csv => {
            writeln!(out, "# {}", serde_json::to_string(&meta)?)?;
            let mut header: Vec<String> = (1..=params.q).map(|i| format!("l{i}")).collect();
            for j in 1..=params.q {
                for i in 1..=params.m {
                    header.push(format!("h{i}{j}"));
                }
            }
            writeln!(out, "{}", header.join(","))?;
        }
        Format::Jsonl => {
            writeln!(out, "{}", serde_json::to_string(&meta)?)?;
        }
        Format::Json => return Err("sample supports --format csv or jsonl".into()),
    }
    for _ in 0..n {
        let point = match args.dist.as_str() {
            "beta1" => singbeta::beta1_sample(&params, &mut rng)?,
            _ => singbeta::beta2_sample(&params, &mut rng)?,
        };
        match format {
            Format::Csv => {
                let mut cells: Vec<String> =
                    point.eigenvalues().iter().map(|v| format!("{v}")).collect();
                for j in 0..params.q {
                    for i in 0..params.m {
                        cells.push(format!("{}", point.frame()[(i, j)]));
                    }
                }
                writeln!(out, "{}", cells.join(","))?;
            }
            Format::Jsonl => {
                let frame: Vec<Vec<f64>> = (0..params.m)
                    .map(|i| (0..params.q).map(|j| point.frame()[(i, j)]).collect())
                    .collect();
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string(&json!({
                        "eigenvalues": point.eigenvalues(),
                        "frame": frame,
                    }))?
                )?;
            }
            Format::Json => unreachable!(),
        }
    }
    Ok(out)
}

fn cmd_tables(args: TablesArgs, overrides: &serde_json::Value) -> Result<String, AnyError> {
    match args.what.as_str() {
        "zonal" => {
            let kmax = resolve(&args.common.kmax, overrides, "kmax", 4);
            let tables = zonal::build_zonal_table(kmax)?;
            Ok(format!("{}\n", zonal::records_to_json(&tables)))
        }
        _ => {
            let k = args.k.ok_or("invariant tables need --k")?;
            let l = args.l.ok_or("invariant tables need --l")?;
            let tables = match args.source.as_str() {
                "fixture" => {
                    let all = InvariantTables::fixture()?;
                    let comps: Vec<_> = all
                        .components()
                        .iter()
                        .filter(|c| c.bidegree() == (k, l))
                        .cloned()
                        .collect();
                    if comps.is_empty() {
                        return Err(format!("fixture holds no bidegree ({k},{l}) tables").into());
                    }
                    InvariantTables::from_components(comps)?
                }
                _ => {
                    let n = resolve(&args.common.n, overrides, "n", 200_000);
                    let seed = resolve(&args.common.seed, overrides, "seed", 42);
                    let zonal_tables = zonal::build_zonal_table(6)?;
                    let comps = invariant::bootstrap_invariants(k, l, n, seed, &zonal_tables)?;
                    InvariantTables::from_components(comps)?
                }
            };
            Ok(format!("{}\n", invariant::to_records_json(&tables)))
        }
    }
}

fn cmd_verify(
    args: VerifyArgs,
    overrides: &serde_json::Value,
) -> Result<(String, ExitCode), AnyError> {
    let n = resolve(&args.common.n, overrides, "n", 100_000);
    let seed = resolve(&args.common.seed, overrides, "seed", 1);
    let workers = resolve(
        &args.common.workers,
        overrides,
        "workers",
        std::thread::available_parallelism().map(|v| v.get()).unwrap_or(1),
    );
    let reports = checks::run_suite(args.check.as_deref(), n, seed, workers)?;
    let all_pass = reports.iter().all(|r| r.pass);
    let doc = json!({
        "resolved_config": {
            "subcommand": "verify",
            "n": n, "seed": seed, "workers": workers,
            "check": args.check,
        },
        "checks": reports,
    });
    let out = format!("{}\n", serde_json::to_string_pretty(&doc)?);
    Ok((out, if all_pass { ExitCode::SUCCESS } else { ExitCode::from(4) }))
}
