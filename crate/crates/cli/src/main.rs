use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use polya_profile::constants::compute_constants;
use polya_profile::enumeration::count_trees;
use polya_profile::limits::{self, LimitEvaluation};
use polya_profile::profile::{
    exact_distribution, exact_joint_distribution, exact_tree_series, finite_covariance, RootSelector,
};
use polya_profile::sampling::{extract_profile, monte_carlo, sample_many, MonteCarloSpec, TreeSampler};
use polya_profile::scalar::ratio_to_f64 as ratio_f64;
use polya_profile::verify::{self, VerifyContext, VerifyOptions};
use polya_profile::Error;

const VERSION: &str = env!("CARGO_PKG_VERSION");
const OUT_DIR_ENV: &str = "POLYA_PROFILE_OUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "polya-profile", version, about = "Exact and simulated degree profiles of random Pólya trees")]
struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; relative paths resolve against $POLYA_PROFILE_OUT_DIR when set. Default: stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Omit the timestamp line from output headers.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Number of trees y_n for n = 1..=n_max.
    Count {
        #[arg(long)]
        n_max: usize,
    },
    /// Singular constants rho, b, C and the degree constants C_d.
    Constants {
        #[arg(long, default_value_t = 400)]
        order: usize,
        /// Degree list, e.g. `1..10` or `1,2,5`.
        #[arg(long, default_value = "1..10", value_parser = parse_degrees)]
        degrees: Degrees,
    },
    /// Exact finite-size laws and moments.
    ProfileExact(ProfileArgs),
    /// Per-level profiles of uniform random trees.
    Sample(SampleArgs),
    /// Monte Carlo estimates with standard errors.
    Montecarlo(MonteCarloArgs),
    /// Limit laws.
    Limits(LimitArgs),
    /// Acceptance checks.
    Verify {
        /// Reduced sizes for criteria 1-5 and smoke versions of 6-10.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        /// Subset of criteria, e.g. `1,2,9`.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
struct Degrees(Vec<usize>);

fn parse_degrees(s: &str) -> Result<Degrees, String> {
    let bad = || format!("expected a degree list like `1..10` or `1,2,5`, got `{s}`");
    let list = if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
        (a..=b).collect::<Vec<_>>()
    } else {
        s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<Vec<usize>, _>>()?
    };
    if list.is_empty() || list.contains(&0) {
        return Err(format!("degrees must be a nonempty list of positive integers, got `{s}`"));
    }
    Ok(Degrees(list))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ProfileMode {
    Dist,
    Moments,
    Cov,
}

#[derive(Args, Debug, Serialize)]
struct ProfileArgs {
    #[arg(long)]
    n: usize,
    /// Degree class; omit to count all vertices.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: usize,
    /// Second level `k + h` for the joint law.
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long, value_enum, default_value = "dist")]
    mode: ProfileMode,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "1..3", value_parser = parse_degrees)]
    degrees: Degrees,
}

#[derive(Args, Debug, Serialize)]
struct MonteCarloArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "1..3", value_parser = parse_degrees)]
    degrees: Degrees,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    kappas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    t_grid: Vec<f64>,
    /// Add the fourth-moment increment grid.
    #[arg(long)]
    tightness: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum LimitWhat {
    Psi,
    Cov,
    Var,
    Corr,
    Mean,
}

#[derive(Args, Debug, Serialize)]
struct LimitArgs {
    #[arg(long, value_enum)]
    what: LimitWhat,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long)]
    d1: Option<usize>,
    #[arg(long)]
    d2: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    kappa: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "-2,-1,0,1,2")]
    t_grid: Vec<f64>,
    /// Sizes for the correlation table.
    #[arg(long, value_delimiter = ',', default_value = "100,400,1600")]
    sizes: Vec<usize>,
    /// Series order for the constants.
    #[arg(long, default_value_t = 400)]
    order: usize,
}

enum Failure {
    Lib(Error),
    Io(String),
    Verification,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

/// Provenance lines shared by every output.
struct Header {
    lines: Vec<(String, String)>,
}

impl Header {
    fn new(cli: &Cli, seed: Option<u64>) -> Self {
        let params = serde_json::to_string(&cli.command).expect("serializable arguments");
        let hash = hex::encode(Sha256::digest(params.as_bytes()));
        let mut lines = vec![("version".to_string(), VERSION.to_string())];
        if let Some(seed) = seed {
            lines.push(("seed".into(), seed.to_string()));
        }
        lines.push(("params_sha256".into(), hash));
        lines.push(("params".into(), params));
        if !cli.no_timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
            lines.push(("generated_unix".into(), secs.to_string()));
        }
        Self { lines }
    }

    fn csv(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("# {k}: {v}\n")).collect()
    }

    fn json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.lines.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect(),
        )
    }
}

struct Output {
    format: Format,
    header: Header,
}

impl Output {
    fn table(&self, columns: &str, rows: Vec<String>, json: impl Serialize) -> String {
        match self.format {
            Format::Csv => {
                let mut s = self.header.csv();
                s.push_str(columns);
                s.push('\n');
                for r in rows {
                    s.push_str(&r);
                    s.push('\n');
                }
                s
            }
            Format::Json => self.json(json),
        }
    }

    fn json(&self, data: impl Serialize) -> String {
        let v = serde_json::json!({ "header": self.header.json(), "data": data });
        let mut s = serde_json::to_string_pretty(&v).expect("serializable output");
        s.push('\n');
        s
    }
}

fn emit(cli: &Cli, text: &str) -> Result<(), Failure> {
    match &cli.out {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        Some(path) => {
            let path = match std::env::var_os(OUT_DIR_ENV) {
                Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
                _ => path.clone(),
            };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&path, text)?;
        }
    }
    Ok(())
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let seed = match &cli.command {
        Command::Sample(a) => Some(a.seed),
        Command::Montecarlo(a) => Some(a.seed),
        Command::Verify { seed, .. } => Some(*seed),
        _ => None,
    };
    let default_format = match cli.command {
        Command::Constants { .. } => Format::Json,
        _ => Format::Csv,
    };
    let out = Output { format: cli.format.unwrap_or(default_format), header: Header::new(cli, seed) };

    let text = match &cli.command {
        Command::Count { n_max } => {
            let t = count_trees(*n_max)?;
            let rows: Vec<String> = (1..=*n_max).map(|n| format!("{n},{}", t.y(n))).collect();
            let json: Vec<_> = (1..=*n_max).map(|n| serde_json::json!({ "n": n, "y_n": t.y(n).to_string() })).collect();
            out.table("n,y_n", rows, json)
        }
        Command::Constants { order, degrees } => {
            let c = compute_constants(*order, &degrees.0)?;
            let rows = std::iter::once(format!("rho,,{:.16e},{:.3e}", c.rho.value, c.rho.error))
                .chain([format!("b,,{:.16e},{:.3e}", c.b.value, c.b.error)])
                .chain([format!("C,,{:.16e},{:.3e}", c.c.value, c.c.error)])
                .chain(c.degrees.iter().flat_map(|g| {
                    [
                        format!("C_d,{},{:.16e},{:.3e}", g.d, g.cd.value, g.cd.error),
                        format!("mu_d,{},{:.16e},{:.3e}", g.d, g.mu.value, g.mu.error),
                    ]
                }))
                .collect();
            out.table("name,d,value,error", rows, &c)
        }
        Command::ProfileExact(a) => profile_exact(a, &out)?,
        Command::Sample(a) => {
            let sampler = TreeSampler::new(a.n)?;
            let d_max = a.degrees.0.iter().copied().max().unwrap_or(1);
            let mut rows = Vec::new();
            for (i, tree) in sample_many(&sampler, a.n, a.samples, a.seed)?.iter().enumerate() {
                let p = extract_profile(tree, d_max);
                for k in 0..=p.height {
                    let mut r = format!("{i},{k},{}", p.level(k));
                    for &d in &a.degrees.0 {
                        let _ = write!(r, ",{}", p.degree_level(d, k));
                    }
                    rows.push(r);
                }
            }
            let mut columns = String::from("sample,k,total");
            for d in &a.degrees.0 {
                let _ = write!(columns, ",d{d}");
            }
            let data: Vec<Vec<&str>> = rows.iter().map(|r| r.split(',').collect()).collect();
            out.table(&columns, rows.clone(), serde_json::json!({ "columns": columns.split(',').collect::<Vec<_>>(), "rows": data }))
        }
        Command::Montecarlo(a) => {
            let sampler = TreeSampler::new(a.n)?;
            let spec = MonteCarloSpec {
                n: a.n,
                samples: a.samples,
                seed: a.seed,
                degrees: a.degrees.0.clone(),
                kappas: a.kappas.clone(),
                t_values: a.t_grid.clone(),
                tightness: a.tightness,
            };
            let report = monte_carlo(&spec, &sampler)?;
            match out.format {
                Format::Csv => {
                    let mut s = out.header.csv();
                    s.push_str(&report.to_csv());
                    s
                }
                Format::Json => out.json(&report),
            }
        }
        Command::Limits(a) => limits_table(a, &out)?,
        Command::Verify { quick, seed, criteria } => {
            let opts = VerifyOptions { quick: *quick, seed: *seed };
            let ctx = VerifyContext::new();
            let ids: Vec<u32> = if criteria.is_empty() { verify::CRITERIA.collect() } else { criteria.clone() };
            let mut reports = Vec::new();
            for id in ids {
                reports.push(verify::run_criterion(id, &opts, &ctx)?);
            }
            let failed = reports.iter().filter(|r| !r.passed).count();
            let text = match out.format {
                Format::Csv => {
                    let mut s = out.header.csv();
                    for r in &reports {
                        s.push_str(&r.render());
                    }
                    let _ = writeln!(s, "{} of {} criteria passed", reports.len() - failed, reports.len());
                    s
                }
                Format::Json => out.json(&reports),
            };
            emit(cli, &text)?;
            return if failed == 0 { Ok(()) } else { Err(Failure::Verification) };
        }
    };
    emit(cli, &text)
}

fn profile_exact(a: &ProfileArgs, out: &Output) -> Result<String, Failure> {
    let sel = match a.d {
        Some(d) => RootSelector::Degree(d),
        None => RootSelector::Any,
    };
    polya_profile::profile::check_selector(sel)?;
    if a.n == 0 {
        return Err(Error::Usage("--n must be positive".into()).into());
    }
    let table = count_trees(a.n)?;
    Ok(match a.mode {
        ProfileMode::Dist => match a.h {
            None => {
                let dist = exact_distribution(&table, a.n, sel, a.k)?;
                let rows =
                    dist.probs.iter().enumerate().map(|(l, p)| format!("{l},{p},{:.12e}", ratio_f64(p))).collect();
                out.table("l,probability,probability_float", rows, &dist)
            }
            Some(h) => {
                let joint = exact_joint_distribution(&table, a.n, sel, a.k, h)?;
                let mut rows = Vec::new();
                for (x, row) in joint.probs.iter().enumerate() {
                    for (y, p) in row.iter().enumerate() {
                        if p.numer().bits() != 0 {
                            rows.push(format!("{x},{y},{p},{:.12e}", ratio_f64(p)));
                        }
                    }
                }
                out.table("l_k,l_k_plus_h,probability,probability_float", rows, &joint)
            }
        },
        ProfileMode::Moments | ProfileMode::Cov => {
            let d1 = a.d.ok_or_else(|| Error::Usage("moments need --d".into()))?;
            let d2 = match a.mode {
                ProfileMode::Cov => a.d2.ok_or_else(|| Error::Usage("--mode cov needs --d2".into()))?,
                _ => d1,
            };
            let y = exact_tree_series(&table, a.n)?;
            let m = finite_covariance(&y, d1, d2, a.n, a.k)?;
            let mut entries = vec![
                ("mean1", m.mean1.clone()),
                ("second_factorial1", m.second_factorial1.clone()),
                ("variance1", m.var1.clone()),
            ];
            if d1 != d2 {
                entries.extend([
                    ("mean2", m.mean2.clone()),
                    ("second_factorial2", m.second_factorial2.clone()),
                    ("variance2", m.var2.clone()),
                    ("mixed", m.mixed.clone()),
                    ("covariance", m.covariance.clone()),
                ]);
            }
            let mut rows: Vec<String> =
                entries.iter().map(|(k, v)| format!("{k},{v},{:.12e}", ratio_f64(v))).collect();
            if d1 != d2 {
                rows.push(format!("correlation,,{}", fmt_opt(m.correlation.map(|c| format!("{c:.12e}")))));
            }
            let json: serde_json::Map<String, serde_json::Value> = entries
                .iter()
                .map(|(k, v)| ((*k).to_string(), serde_json::json!({ "exact": v.to_string(), "float": ratio_f64(v) })))
                .chain([
                    ("n".to_string(), serde_json::json!(a.n)),
                    ("k".to_string(), serde_json::json!(a.k)),
                    ("d1".to_string(), serde_json::json!(d1)),
                    ("d2".to_string(), serde_json::json!(d2)),
                    ("correlation".to_string(), serde_json::json!(m.correlation)),
                ])
                .collect();
            out.table("quantity,exact,float", rows, json)
        }
    })
}


fn limits_table(a: &LimitArgs, out: &Output) -> Result<String, Failure> {
    let d1 = a.d1.unwrap_or(a.d);
    let d2 = a.d2.unwrap_or(d1);
    let mut rows: Vec<LimitEvaluation> = Vec::new();
    let degrees: Vec<usize> = (1..=d1.max(d2)).collect();
    let constants = || compute_constants(a.order, &degrees);
    match a.what {
        LimitWhat::Psi => {
            let c = constants()?;
            for &kappa in &a.kappa {
                rows.extend(limits::psi_table(d1, kappa, &a.t_grid, &c)?);
            }
        }
        LimitWhat::Cov => {
            let c = constants()?;
            for &kappa in &a.kappa {
                rows.push(limits::cov_row(d1, d2, kappa, &c)?);
            }
        }
        LimitWhat::Var => {
            let c = constants()?;
            for &kappa in &a.kappa {
                rows.push(limits::var_row(d1, kappa, &c)?);
            }
        }
        LimitWhat::Corr => {
            let n_max = a.sizes.iter().copied().max().unwrap_or(0);
            if n_max == 0 {
                return Err(Error::Usage("--sizes needs a positive size".into()).into());
            }
            let table = count_trees(n_max)?;
            for &kappa in &a.kappa {
                rows.extend(limits::correlation_rows(d1, d2, kappa, &a.sizes, &table)?);
            }
        }
        LimitWhat::Mean => {
            let table = count_trees(*limits::MEAN_SIZES.iter().max().expect("sizes"))?;
            for &kappa in &a.kappa {
                rows.push(limits::mean_row(d1, kappa, &table)?);
            }
        }
    }
    let lines = rows.iter().map(|r| r.csv_line()).collect();
    Ok(out.table(limits::CSV_HEADER, lines, &rows))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Usage(_) | Error::Domain(_) => 2,
                Error::Accuracy(_) => 3,
            })
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Verification) => {
            eprintln!("verification failed");
            ExitCode::from(4)
        }
    }
}
