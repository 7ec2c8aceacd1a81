//! Batch front end for the approximation-bounds library: parses a run
//! configuration, dispatches to the library, and writes a reproducible
//! `results.csv` plus a `manifest.json` recording every input.
//!
//! Exit codes: 0 success, 2 configuration error, 3 a mathematical check
//! failed (artifacts are still written), 4 numeric failure.

mod system;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use steinchen::bootstrap::{
    estimate_rho, m_t, mc_t_distribution, percolation_run, regime_classify, Regime, UpdateEngine,
};
use steinchen::bounds::{
    barbour_hall_lower, classical_bounds, compound_local_bounds, compound_perturbation_bound,
    local_bounds, monotone_coupling_bound, size_bias_bound, sum_of_squares, IndicatorSystem,
    MomentSource, MonotoneRelation,
};
use steinchen::dist::CompoundSpec;
use steinchen::oracle::{
    exact_b_terms, exact_size_bias_gap, exact_tv_to_poisson, exact_variance, law_of_w,
};
use steinchen::seq::{
    ap_gumbel_approx, ap_index_count_brute, ap_mc_estimate, ap_threshold_from_offset,
    headrun_asymptotic_check, headrun_bound, headrun_exact, headrun_exact_tail,
    headrun_mc_estimate, ApModel,
    HeadRunModel,
};
use steinchen::stein::{verify_cp_solution_bounds, verify_poisson_solution_bounds};

use system::{load_system, LoadedSystem};

#[derive(Parser)]
#[command(
    name = "steinchen",
    version,
    about = "Poisson and compound-Poisson approximation bounds, exact small-system \
             oracles, and seeded Monte Carlo experiments"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Base RNG seed; replicate i draws from stream i of this seed.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory receiving results.csv and manifest.json.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (0 = one per core). Never affects emitted numbers.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Numerical slack for the mathematical checks behind exit code 3.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Every computable approximation bound for a system described in JSON.
    Bounds {
        /// Path to the system description.
        #[arg(long)]
        system: PathBuf,
    },
    /// Exact brute-force quantities for a small system with a joint law.
    Oracle {
        /// Path to the system description.
        #[arg(long)]
        system: PathBuf,
    },
    /// Verify the sup-norm caps on Stein-equation solutions over target
    /// sets.
    SteinCheck {
        /// Poisson rate to check.
        #[arg(long, conflicts_with = "spec")]
        lambda: Option<f64>,
        /// Compound cluster rates, e.g. "0.8,0.2,0.05".
        #[arg(long, value_delimiter = ',')]
        spec: Option<Vec<f64>>,
        /// Exhaustive prefix width: all subsets of {0..K-1} are tested.
        #[arg(long = "K", default_value_t = 10)]
        k: usize,
        /// Truncation override for the compound solver.
        #[arg(long)]
        k_max: Option<usize>,
    },
    /// Longest-success-run probabilities and their Poisson approximation.
    Headrun {
        /// Sequence length.
        #[arg(long)]
        n: usize,
        /// Run length of interest.
        #[arg(long, conflicts_with = "offset")]
        t: Option<usize>,
        /// Integer offset from the centering log_{1/p}(n(1-p)); evaluates
        /// the double-exponential limit there instead of a fixed t.
        #[arg(long)]
        offset: Option<i64>,
        /// Per-trial success probability.
        #[arg(long)]
        p: f64,
        /// Monte Carlo replicates (0 = skip sampling).
        #[arg(long, default_value_t = 0)]
        reps: u64,
    },
    /// Maximal arithmetic progressions of successes in {1..n}.
    Ap {
        /// Ground-set size.
        #[arg(long)]
        n: usize,
        /// Progression length of interest.
        #[arg(long, conflicts_with = "offset")]
        t: Option<usize>,
        /// Real offset from the Gumbel centering (2 ln n - ln ln n)/ln(1/p);
        /// fixes t and the rounding remainder.
        #[arg(long)]
        offset: Option<f64>,
        /// Per-site success probability.
        #[arg(long)]
        p: f64,
        /// Monte Carlo replicates (0 = skip sampling).
        #[arg(long, default_value_t = 0)]
        reps: u64,
    },
    /// Bootstrap percolation on the d-dimensional torus of side n.
    Bootstrap {
        /// Dimension; a site needs d infected neighbours to flip.
        #[arg(long)]
        d: usize,
        /// Torus side length.
        #[arg(long)]
        n: usize,
        /// Seeding (infected) probability.
        #[arg(long, conflicts_with = "q")]
        p: Option<f64>,
        /// Uninfected density 1-p.
        #[arg(long)]
        q: Option<f64>,
        /// Time horizon for rho and classify.
        #[arg(long)]
        t: Option<usize>,
        /// Monte Carlo replicates.
        #[arg(long, default_value_t = 0)]
        reps: u64,
        #[arg(long, value_enum, default_value_t = BootstrapMode::TimeDist)]
        mode: BootstrapMode,
        /// Window scale for classify; defaults to ln n.
        #[arg(long)]
        omega: Option<f64>,
        /// Also write snapshots.csv (t,count_infected) from replicate 0.
        #[arg(long, default_value_t = false)]
        snapshots: bool,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BootstrapMode {
    /// Empirical law of the percolation time.
    TimeDist,
    /// Per-site survival probability on the dependence ball.
    Rho,
    /// Density-window classification of the expected time.
    Classify,
}

impl BootstrapMode {
    fn name(self) -> &'static str {
        match self {
            BootstrapMode::TimeDist => "time-dist",
            BootstrapMode::Rho => "rho",
            BootstrapMode::Classify => "classify",
        }
    }
}

/// One failure category per exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid or inconsistent configuration (exit 2).
    Config(String),
    /// A mathematical check failed (exit 3); artifacts were written.
    BoundViolation(String),
    /// Numeric breakdown inside the library (exit 4).
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::BoundViolation(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }

    fn category(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::BoundViolation(_) => "bound-violation",
            CliError::Numeric(_) => "numeric",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::BoundViolation(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<steinchen::Error> for CliError {
    fn from(e: steinchen::Error) -> Self {
        match e {
            steinchen::Error::Numeric(m) => CliError::Numeric(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o failure: {e}"))
    }
}

/// Everything a runner produces: the rows of results.csv, any extra
/// artifacts, failed checks, and the resolved parameters for the manifest.
struct RunOutput {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    violations: Vec<String>,
    params: serde_json::Value,
    extra: Vec<(String, Vec<u8>)>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .and_then(|_| rows.iter().try_for_each(|r| w.write_record(r)))
        .map_err(|e| CliError::Config(format!("csv serialization failed: {e}")))?;
    w.into_inner()
        .map_err(|e| CliError::Config(format!("csv serialization failed: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(
            e.kind(),
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
        ) =>
        {
            // Tolerate a closed pipe (`steinchen --help | head`).
            use std::io::Write;
            let _ = write!(std::io::stdout(), "{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // Same single-line contract as every other configuration
            // error: flatten the message body (everything before the usage
            // block) onto one line.
            let msg = e.to_string();
            let body = msg
                .lines()
                .take_while(|l| !l.trim().is_empty())
                .map(str::trim)
                .collect::<Vec<_>>()
                .join(" ");
            let body = body.strip_prefix("error: ").unwrap_or(&body);
            let quoted = body.replace('"', "\"\"");
            eprintln!("error,config,\"{quoted}\"");
            return ExitCode::from(2);
        }
    };
    if cli.global.threads > 0 {
        // A second global build attempt only fails if a pool already
        // exists, which cannot happen this early in the binary.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global();
    }
    let started = Instant::now();
    match dispatch(&cli).and_then(|output| {
        let violations = output.violations.clone();
        let (path, rows) = write_artifacts(&cli, output, started)?;
        if violations.is_empty() {
            Ok((path, rows))
        } else {
            Err(CliError::BoundViolation(violations.join("; ")))
        }
    }) {
        Ok((path, rows)) => {
            println!("ok: {rows} rows -> {}", path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            // Single machine-parsable line: error,<category>,"<message>".
            let quoted = e.message().replace('\n', " ").replace('"', "\"\"");
            eprintln!("error,{},\"{quoted}\"", e.category());
            ExitCode::from(e.exit_code())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<RunOutput, CliError> {
    let g = &cli.global;
    if !(g.tol >= 0.0) {
        return Err(CliError::Config(format!(
            "--tol must be nonnegative, got {}",
            g.tol
        )));
    }
    match &cli.command {
        Command::Bounds { system } => run_bounds(system, g),
        Command::Oracle { system } => run_oracle(system, g),
        Command::SteinCheck {
            lambda,
            spec,
            k,
            k_max,
        } => run_stein_check(*lambda, spec.clone(), *k, *k_max, g),
        Command::Headrun {
            n,
            t,
            offset,
            p,
            reps,
        } => run_headrun(*n, *t, *offset, *p, *reps, g),
        Command::Ap {
            n,
            t,
            offset,
            p,
            reps,
        } => run_ap(*n, *t, *offset, *p, *reps, g),
        Command::Bootstrap {
            d,
            n,
            p,
            q,
            t,
            reps,
            mode,
            omega,
            snapshots,
        } => run_bootstrap(*d, *n, *p, *q, *t, *reps, *mode, *omega, *snapshots, g),
    }
}

fn subcommand_name(c: &Command) -> &'static str {
    match c {
        Command::Bounds { .. } => "bounds",
        Command::Oracle { .. } => "oracle",
        Command::SteinCheck { .. } => "stein-check",
        Command::Headrun { .. } => "headrun",
        Command::Ap { .. } => "ap",
        Command::Bootstrap { .. } => "bootstrap",
    }
}

fn write_artifacts(
    cli: &Cli,
    output: RunOutput,
    started: Instant,
) -> Result<(PathBuf, usize), CliError> {
    let g = &cli.global;
    fs::create_dir_all(&g.out)?;
    let results = g.out.join("results.csv");
    fs::write(&results, csv_bytes(&output.header, &output.rows)?)?;
    let mut artifacts = vec!["results.csv".to_string()];
    for (name, bytes) in &output.extra {
        fs::write(g.out.join(name), bytes)?;
        artifacts.push(name.clone());
    }
    artifacts.push("manifest.json".to_string());
    let manifest = json!({
        "tool": "steinchen",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand_name(&cli.command),
        "parameters": output.params,
        "seed": g.seed,
        "threads": g.threads,
        "tol": g.tol,
        "out": g.out.display().to_string(),
        "artifacts": artifacts,
        "checks_failed": output.violations,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    });
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Config(format!("manifest serialization failed: {e}")))?;
    fs::write(g.out.join("manifest.json"), text + "\n")?;
    Ok((results, output.rows.len()))
}

/// Whether a bound row takes part in the dominance gate against the exact
/// distance to the Poisson law.
#[derive(Clone, Copy, PartialEq)]
enum Gate {
    /// Must sit above the exact distance.
    Upper,
    /// Must sit below it.
    Lower,
    /// Not comparable (different target law, or not a bound).
    None,
}

struct BoundRow {
    name: &'static str,
    value: f64,
    applicable: bool,
    conditions: String,
    method: &'static str,
    gate: Gate,
}

impl BoundRow {
    fn record(&self) -> Vec<String> {
        vec![
            self.name.to_string(),
            num(self.value),
            self.applicable.to_string(),
            self.conditions.clone(),
            self.method.to_string(),
        ]
    }
}

fn run_bounds(path: &Path, g: &GlobalArgs) -> Result<RunOutput, CliError> {
    let loaded = load_system(path)?;
    let mut rows: Vec<BoundRow> = Vec::new();
    let independence_note = if loaded.independent {
        "independent family"
    } else {
        "independence not established; value shown for reference"
    };

    let exact = match loaded.system.as_ref().and_then(IndicatorSystem::joint) {
        Some(table) => {
            let tv = exact_tv_to_poisson(table)?;
            rows.push(BoundRow {
                name: "exact_tv_distance",
                value: tv.value,
                applicable: true,
                conditions: format!(
                    "exact distance to the Poisson law; truncation error bar {}",
                    num(tv.error_bar)
                ),
                method: "brute_force",
                gate: Gate::None,
            });
            Some(tv)
        }
        None => None,
    };

    let cb = classical_bounds(&loaded.marginals)?;
    rows.push(BoundRow {
        name: "lecam_sum_squares",
        value: cb.lecam1,
        applicable: loaded.independent,
        conditions: independence_note.to_string(),
        method: "lecam",
        gate: Gate::Upper,
    });
    if let Some(l2) = cb.lecam2 {
        rows.push(BoundRow {
            name: "lecam_scaled",
            value: l2,
            applicable: loaded.independent,
            conditions: format!("{independence_note}; max marginal <= 1/4"),
            method: "lecam",
            gate: Gate::Upper,
        });
    }
    rows.push(BoundRow {
        name: "classical_combined",
        value: cb.combined,
        applicable: loaded.independent,
        conditions: independence_note.to_string(),
        method: "lecam",
        gate: Gate::Upper,
    });
    if let Some(pa) = cb.prohorov_asymptotic {
        rows.push(BoundRow {
            name: "prohorov_leading_term",
            value: pa,
            applicable: false,
            conditions: "asymptotic leading term for identical marginals; never a finite-n bound"
                .to_string(),
            method: "prohorov",
            gate: Gate::None,
        });
    }
    rows.push(BoundRow {
        name: "barbour_hall_lower",
        value: barbour_hall_lower(&loaded.marginals)?,
        applicable: loaded.independent,
        conditions: format!("{independence_note}; LOWER bound on the exact distance"),
        method: "barbour_hall",
        gate: Gate::Lower,
    });

    let lambda = cb.lambda;
    let sumsq = sum_of_squares(&loaded.marginals);
    match loaded.system.as_ref() {
        Some(sys) => {
            match local_bounds(sys) {
                Ok(lb) => {
                    let terms = format!(
                        "b1={}; b2={}; b3={}",
                        num(lb.b1),
                        num(lb.b2),
                        num(lb.b3)
                    );
                    rows.push(BoundRow {
                        name: "local_tv",
                        value: lb.tv_bound,
                        applicable: true,
                        conditions: terms.clone(),
                        method: "local_neighbourhoods",
                        gate: Gate::Upper,
                    });
                    rows.push(BoundRow {
                        name: "local_void",
                        value: lb.void_bound,
                        applicable: true,
                        conditions: format!("{terms}; bounds only |P(W=0) - e^-lambda|"),
                        method: "local_neighbourhoods",
                        gate: Gate::None,
                    });
                }
                Err(steinchen::Error::Unsupported(_)) => {}
                Err(e) => return Err(e.into()),
            }
            let var_w = match sys.source() {
                MomentSource::FullJoint(table) => Some(exact_variance(table)?),
                MomentSource::Pairwise(m) => {
                    let mut second = 0.0;
                    for row in m {
                        for &v in row {
                            second += v;
                        }
                    }
                    Some(second - lambda * lambda)
                }
                MomentSource::Sampler(_) => None,
            };
            if let Some(var_w) = var_w {
                push_monotone_rows(&mut rows, &loaded, lambda, var_w, sumsq)?;
            }
            if let Some(table) = sys.joint() {
                match exact_size_bias_gap(table) {
                    Ok(coupling) => rows.push(BoundRow {
                        name: "size_bias",
                        value: size_bias_bound(lambda, coupling.mean_abs_gap)?,
                        applicable: true,
                        conditions: format!(
                            "canonical coupling; exact mean absolute gap {}",
                            num(coupling.mean_abs_gap)
                        ),
                        method: "size_bias_coupling",
                        gate: Gate::Upper,
                    }),
                    Err(steinchen::Error::Size(_)) => {}
                    Err(e) => return Err(e.into()),
                }
                if loaded.has_outer {
                    push_compound_rows(&mut rows, sys)?;
                }
            }
        }
        None => {
            // Independent family too wide for a table: the neighbourhood
            // terms close over products of marginals and b3 vanishes.
            let p = &loaded.marginals;
            let (mut b1, mut b2) = (0.0f64, 0.0f64);
            for (a, hood) in loaded.hoods.iter().enumerate() {
                for &b in hood {
                    b1 += p[a] * p[b];
                    if b != a {
                        b2 += p[a] * p[b];
                    }
                }
            }
            let unit = 1.0f64.min(1.0 / lambda);
            rows.push(BoundRow {
                name: "local_tv",
                value: unit * (b1 + b2),
                applicable: true,
                conditions: format!("independent family; b1={}; b2={}; b3=0", num(b1), num(b2)),
                method: "local_neighbourhoods",
                gate: Gate::Upper,
            });
            push_monotone_rows(&mut rows, &loaded, lambda, lambda - sumsq, sumsq)?;
        }
    }

    let mut violations = Vec::new();
    if let Some(tv) = exact {
        let upper_reading = tv.value + tv.error_bar;
        for row in &rows {
            if !row.applicable {
                continue;
            }
            match row.gate {
                Gate::Upper if upper_reading > row.value + g.tol => violations.push(format!(
                    "exact distance {} exceeds {} = {}",
                    num(tv.value),
                    row.name,
                    num(row.value)
                )),
                Gate::Lower if row.value > upper_reading + g.tol => violations.push(format!(
                    "{} = {} exceeds the exact distance {}",
                    row.name,
                    num(row.value),
                    num(tv.value)
                )),
                _ => {}
            }
        }
    }

    Ok(RunOutput {
        header: vec!["bound_name", "value", "applicable", "conditions", "method"],
        rows: rows.iter().map(BoundRow::record).collect(),
        violations,
        params: json!({
            "system_file": path.display().to_string(),
            "n": loaded.n,
            "lambda": lambda,
            "independent": loaded.independent,
            "has_joint": exact.is_some(),
        }),
        extra: Vec::new(),
    })
}

fn push_monotone_rows(
    rows: &mut Vec<BoundRow>,
    loaded: &LoadedSystem,
    lambda: f64,
    var_w: f64,
    sumsq: f64,
) -> Result<(), CliError> {
    for (name, relation) in [
        ("monotone_negative", MonotoneRelation::Negative),
        ("monotone_positive", MonotoneRelation::Positive),
    ] {
        let asserted = loaded.monotone == Some(relation);
        let applicable = asserted || loaded.independent;
        let why = if asserted {
            "asserted by the description"
        } else if loaded.independent {
            "independent families satisfy both coupling directions"
        } else {
            "requires a monotone coupling hypothesis; not asserted"
        };
        rows.push(BoundRow {
            name,
            value: monotone_coupling_bound(lambda, var_w, sumsq, relation)?,
            applicable,
            conditions: format!("{why}; variance {}", num(var_w)),
            method: "variance_gap_coupling",
            gate: Gate::Upper,
        });
    }
    Ok(())
}

fn push_compound_rows(rows: &mut Vec<BoundRow>, sys: &IndicatorSystem) -> Result<(), CliError> {
    let cl = compound_local_bounds(sys)?;
    let rates = cl
        .rates
        .rates()
        .iter()
        .map(|r| num(*r))
        .collect::<Vec<_>>()
        .join("; ");
    rows.push(BoundRow {
        name: "compound_exp",
        value: cl.exp_bound,
        applicable: true,
        conditions: format!(
            "distance to the compound law with cluster rates [{rates}], nu={}",
            num(cl.nu)
        ),
        method: "compound_local",
        gate: Gate::None,
    });
    if let Some(mb) = cl.monotone_bound {
        rows.push(BoundRow {
            name: "compound_monotone",
            value: mb,
            applicable: true,
            conditions: "distance to the compound law; needs non-increasing i*rate_i".to_string(),
            method: "compound_local",
            gate: Gate::None,
        });
    }
    let pb = compound_perturbation_bound(sys)?;
    if let Some(bound) = pb.bound {
        rows.push(BoundRow {
            name: "compound_perturbation",
            value: bound,
            applicable: true,
            conditions: format!("distance to the compound law; theta={}", num(pb.theta)),
            method: "compound_perturbation",
            gate: Gate::None,
        });
    }
    Ok(())
}

fn run_oracle(path: &Path, g: &GlobalArgs) -> Result<RunOutput, CliError> {
    let _ = g;
    let loaded = load_system(path)?;
    let sys = loaded.system.as_ref().ok_or_else(|| {
        CliError::Config("oracle needs a joint law; this family is too wide to tabulate".into())
    })?;
    let table = sys.joint().ok_or_else(|| {
        CliError::Config("oracle needs a joint table; pair moments are not enough".into())
    })?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut push = |quantity: String, value: f64, method: &str| {
        rows.push(vec![quantity, num(value), method.to_string()]);
    };
    push("n_indicators".into(), loaded.n as f64, "brute_force");
    push("lambda".into(), sys.lambda(), "brute_force");
    push("variance".into(), exact_variance(table)?, "brute_force");
    let tv = exact_tv_to_poisson(table)?;
    push("tv_to_poisson".into(), tv.value, "brute_force");
    push("tv_error_bar".into(), tv.error_bar, "brute_force");
    let b = exact_b_terms(table, sys.hoods())?;
    push("b1".into(), b.b1, "brute_force");
    push("b2".into(), b.b2, "brute_force");
    push("b3".into(), b.b3, "brute_force");
    match exact_size_bias_gap(table) {
        Ok(c) => push("size_bias_mean_abs_gap".into(), c.mean_abs_gap, "brute_force"),
        Err(steinchen::Error::Size(_)) => {}
        Err(e) => return Err(e.into()),
    }
    let law = law_of_w(table)?;
    for k in 0..=law.max_support() {
        push(format!("w_pmf_{k}"), law.prob(k), "brute_force");
    }
    push("w_tail_mass".into(), law.tail_mass(), "brute_force");
    Ok(RunOutput {
        header: vec!["quantity", "value", "method"],
        rows,
        violations: Vec::new(),
        params: json!({
            "system_file": path.display().to_string(),
            "n": loaded.n,
        }),
        extra: Vec::new(),
    })
}

fn run_stein_check(
    lambda: Option<f64>,
    spec: Option<Vec<f64>>,
    k: usize,
    k_max: Option<usize>,
    g: &GlobalArgs,
) -> Result<RunOutput, CliError> {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let mut gate = |label: &str, what: &str, ratio: f64, at: &str| {
        if ratio > 1.0 + g.tol {
            violations.push(format!(
                "{label}: sup {what} ratio {} exceeds 1 at target {at}",
                num(ratio)
            ));
        }
    };
    let params;
    match (lambda, spec) {
        (Some(l), None) => {
            let r = verify_poisson_solution_bounds(l, k, g.seed)?;
            let label = num(l);
            gate(&label, "|f|", r.worst_f_ratio, &r.worst_f_set);
            gate(&label, "|df|", r.worst_delta_ratio, &r.worst_delta_set);
            rows.push(vec![
                label,
                r.n_sets_tested.to_string(),
                num(r.worst_f_ratio),
                num(r.worst_delta_ratio),
                num(r.worst_residual),
                "poisson_stein_caps".to_string(),
            ]);
            params = json!({ "lambda": l, "K": k });
        }
        (None, Some(rates)) => {
            let spec = CompoundSpec::new(rates.clone())?;
            let truncation = match k_max {
                Some(v) => v,
                None => (spec.cutoff(1e-14)? + 120).max(k + 8),
            };
            let r = verify_cp_solution_bounds(&spec, truncation, k, g.seed)?;
            let label = format!(
                "cp[{}]",
                rates.iter().map(|v| num(*v)).collect::<Vec<_>>().join("; ")
            );
            gate(&label, "|f|", r.worst_f_ratio(), &r.worst_set);
            gate(&label, "|df|", r.worst_delta_ratio(), &r.worst_set);
            rows.push(vec![
                label,
                r.n_sets_tested.to_string(),
                num(r.worst_f_ratio()),
                num(r.worst_delta_ratio()),
                num(r.worst_residual),
                "compound_stein_caps".to_string(),
            ]);
            params = json!({ "rates": rates, "K": k, "k_max": truncation, "theta": r.theta });
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --lambda or --spec is required".into(),
            ))
        }
    }
    Ok(RunOutput {
        header: vec![
            "lambda_or_spec",
            "n_sets_tested",
            "worst_f_ratio",
            "worst_df_ratio",
            "worst_residual",
            "method",
        ],
        rows,
        violations,
        params,
        extra: Vec::new(),
    })
}

/// Header shared by the sequence and percolation subcommands.
const SEQ_HEADER: [&str; 4] = ["quantity", "value", "stderr", "method"];

fn seq_row(quantity: &str, value: f64, stderr: Option<f64>, method: &str) -> Vec<String> {
    vec![
        quantity.to_string(),
        num(value),
        stderr.map(num).unwrap_or_default(),
        method.to_string(),
    ]
}

fn run_headrun(
    n: usize,
    t: Option<usize>,
    offset: Option<i64>,
    p: f64,
    reps: u64,
    g: &GlobalArgs,
) -> Result<RunOutput, CliError> {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let resolved_t = match (t, offset) {
        (Some(t), None) => Some(t),
        (None, Some(c)) => {
            let a = headrun_asymptotic_check(n, p, c)?;
            rows.push(seq_row(
                "threshold",
                a.threshold as f64,
                None,
                "double_exponential_limit",
            ));
            rows.push(seq_row(
                "limit_below",
                a.limit,
                None,
                "double_exponential_limit",
            ));
            (a.threshold >= 1 && a.threshold <= n as i64).then_some(a.threshold as usize)
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --t or --offset is required".into(),
            ))
        }
    };
    if let Some(t) = resolved_t {
        let model = HeadRunModel::new(n, t, p)?;
        let lambda = model.lambda();
        let exact = headrun_exact(&model);
        let tail = headrun_exact_tail(&model);
        let approx = (-lambda).exp();
        let bound = headrun_bound(&model).bound;
        rows.push(seq_row("lambda", lambda, None, "declumped_mean"));
        rows.push(seq_row("exact_below", exact, None, "transfer_dp"));
        rows.push(seq_row("exact_tail", tail, None, "transfer_dp"));
        rows.push(seq_row("poisson_approx", approx, None, "poisson_limit"));
        rows.push(seq_row(
            "approx_error_bound",
            bound,
            None,
            "local_dependence_bound",
        ));
        // The same difference in complementary form: whichever of the two
        // is well conditioned gives the true gap, so gate on the smaller.
        let gap = (exact - approx).abs().min((tail - -(-lambda).exp_m1()).abs());
        if gap > bound + g.tol {
            violations.push(format!(
                "|exact - poisson| = {} exceeds the error bound {}",
                num(gap),
                num(bound)
            ));
        }
        if reps > 0 {
            let mc = headrun_mc_estimate(&model, reps, g.seed)?;
            rows.push(seq_row(
                "mc_below",
                mc.estimate,
                Some(mc.std_error),
                "monte_carlo",
            ));
        }
    }
    Ok(RunOutput {
        header: SEQ_HEADER.to_vec(),
        rows,
        violations,
        params: json!({
            "n": n, "t": resolved_t, "offset": offset, "p": p, "reps": reps,
        }),
        extra: Vec::new(),
    })
}

fn run_ap(
    n: usize,
    t: Option<usize>,
    offset: Option<f64>,
    p: f64,
    reps: u64,
    g: &GlobalArgs,
) -> Result<RunOutput, CliError> {
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    let (resolved_t, delta) = match (t, offset) {
        (Some(t), None) => (t, None),
        (None, Some(x)) => {
            let (t, delta) = ap_threshold_from_offset(n, p, x)?;
            (t, Some((x, delta)))
        }
        _ => {
            return Err(CliError::Config(
                "exactly one of --t or --offset is required".into(),
            ))
        }
    };
    let model = ApModel::new(n, resolved_t, p)?;
    let count = model.index_count();
    rows.push(seq_row(
        "index_count",
        count as f64,
        None,
        "stride_count_formula",
    ));
    if n <= 1000 {
        let brute = ap_index_count_brute(n as u64, resolved_t as u64);
        if brute != count {
            violations.push(format!(
                "index count formula {count} disagrees with enumeration {brute}"
            ));
        }
    }
    let lambda = model.lambda();
    rows.push(seq_row("lambda", lambda, None, "mean_count"));
    rows.push(seq_row(
        "poisson_approx",
        (-lambda).exp(),
        None,
        "poisson_limit",
    ));
    if let Some((x, delta)) = delta {
        rows.push(seq_row(
            "threshold_t",
            resolved_t as f64,
            None,
            "gumbel_centering",
        ));
        rows.push(seq_row("delta", delta, None, "gumbel_centering"));
        rows.push(seq_row(
            "gumbel_approx",
            ap_gumbel_approx(x, p, delta),
            None,
            "gumbel_limit",
        ));
    }
    if reps > 0 {
        let mc = ap_mc_estimate(&model, reps, g.seed)?;
        rows.push(seq_row(
            "mc_below",
            mc.estimate,
            Some(mc.std_error),
            "monte_carlo",
        ));
    }
    Ok(RunOutput {
        header: SEQ_HEADER.to_vec(),
        rows,
        violations,
        params: json!({
            "n": n, "t": resolved_t, "offset": offset, "p": p, "reps": reps,
        }),
        extra: Vec::new(),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_bootstrap(
    d: usize,
    n: usize,
    p: Option<f64>,
    q: Option<f64>,
    t: Option<usize>,
    reps: u64,
    mode: BootstrapMode,
    omega: Option<f64>,
    snapshots: bool,
    g: &GlobalArgs,
) -> Result<RunOutput, CliError> {
    let p = match (p, q) {
        (Some(p), None) => p,
        (None, Some(q)) => 1.0 - q,
        _ => {
            return Err(CliError::Config(
                "exactly one of --p and --q is required".into(),
            ))
        }
    };
    if snapshots && mode != BootstrapMode::TimeDist {
        return Err(CliError::Config(
            "--snapshots only applies to --mode time-dist".into(),
        ));
    }
    let mut rows = Vec::new();
    let mut extra = Vec::new();
    let mut params = json!({
        "d": d, "n": n, "p": p, "q": 1.0 - p, "t": t, "reps": reps,
        "mode": mode.name(), "snapshots": snapshots,
    });
    match mode {
        BootstrapMode::TimeDist => {
            if reps == 0 {
                return Err(CliError::Config("time-dist needs --reps >= 1".into()));
            }
            let dist = mc_t_distribution(d, n, p, reps, g.seed)?;
            for &(time, count) in &dist.counts {
                let _ = count;
                rows.push(seq_row(
                    &format!("prob_time_{time}"),
                    dist.prob(time),
                    Some(dist.std_error(time)),
                    "frontier_monte_carlo",
                ));
            }
            let never = dist.prob_never();
            rows.push(seq_row(
                "prob_never",
                never,
                Some((never * (1.0 - never) / reps as f64).sqrt()),
                "frontier_monte_carlo",
            ));
            if snapshots {
                let run = percolation_run(d, n, p, g.seed, 0, UpdateEngine::FrontierQueue)?;
                let mut snap_rows = Vec::new();
                for (time, &count) in run.trajectory.iter().enumerate() {
                    snap_rows.push(vec![time.to_string(), count.to_string()]);
                }
                extra.push((
                    "snapshots.csv".to_string(),
                    csv_bytes(&["t", "count_infected"], &snap_rows)?,
                ));
            }
        }
        BootstrapMode::Rho => {
            if reps == 0 {
                return Err(CliError::Config("rho needs --reps >= 1".into()));
            }
            let t = t.ok_or_else(|| CliError::Config("rho needs --t".into()))?;
            let est = estimate_rho(d, t, p, reps, g.seed)?;
            rows.push(seq_row(
                "rho_hat",
                est.estimate,
                Some(est.std_error),
                "ball_monte_carlo",
            ));
            let scale = (n as f64).powi(d as i32);
            rows.push(seq_row(
                "lambda_hat",
                scale * est.estimate,
                Some(scale * est.std_error),
                "site_survival_scaling",
            ));
        }
        BootstrapMode::Classify => {
            let t = t.ok_or_else(|| CliError::Config("classify needs --t".into()))?;
            let q = 1.0 - p;
            let omega = omega.unwrap_or((n as f64).ln());
            params["omega"] = json!(omega);
            let regime = regime_classify(d, n, t, q, Some(omega))?;
            let exponent = m_t(d, t)? as f64;
            let nd = (n as f64).powi(d as i32);
            rows.push(seq_row("m_t", exponent, None, "exponent_sum"));
            rows.push(seq_row("omega", omega, None, "density_window"));
            if t > 0 {
                rows.push(seq_row(
                    "fast_lower",
                    (omega / nd).powf(1.0 / m_t(d, t - 1)? as f64),
                    None,
                    "density_window",
                ));
            }
            rows.push(seq_row(
                "fast_upper",
                (1.0 / (omega * nd)).powf(1.0 / exponent),
                None,
                "density_window",
            ));
            rows.push(seq_row(
                "two_point_upper",
                (omega / nd).powf(1.0 / exponent),
                None,
                "density_window",
            ));
            let name = match regime {
                Regime::Fast(_) => "fast",
                Regime::TwoPoint(_) => "two_point",
                Regime::Outside => "outside",
            };
            rows.push(vec![
                "regime".to_string(),
                name.to_string(),
                String::new(),
                "density_window".to_string(),
            ]);
        }
    }
    Ok(RunOutput {
        header: SEQ_HEADER.to_vec(),
        rows,
        violations: Vec::new(),
        params,
        extra,
    })
}
