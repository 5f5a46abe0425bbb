//! `kruns` — exact laws and approximation bounds for the (k1,k2)-runs
//! statistic over Bernoulli trials.
//!
//! Subcommands: `pmf` (exact law of M), `bounds` (total-variation bounds
//! against Poisson / pseudo-binomial / negative-binomial targets), `table`
//! (the frozen reference bound table behind `--preset paper-table-1`), and
//! `verify` (self-checking property suite).
//!
//! Exit codes: 0 success, 1 verification/runtime failure, 2 usage error.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::exit;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use kruns::distributions::{
    pgf_recursive, pmf_row, tv_consecutive, tv_consecutive_expansion, waiting_pgf,
    waiting_pgf_uncorrected, waiting_pmf,
};
use kruns::embedding::{build_chain, pmf_embedding};
use kruns::oracle::{
    brute_force_pmf, monte_carlo_pmf, monte_carlo_pmf_sequential, verify_bound,
};
use kruns::params::TrialParams;
use kruns::scalar::Scalar;
use kruns::stein::{
    bound_nb_one, bound_nb_two, bound_pb_one, bound_pb_two, bound_poisson_one, BoundConvention,
    BoundReport, C7Policy, OneParamFix,
};
use kruns::util::{format_fixed6, format_fixed6_trunc, par_map};
use kruns::RunsPattern;
use num_rational::BigRational;

type R = BigRational;

/// Default PRNG seed: the ASCII bytes of "kruns" (0x6B72756E73).
const DEFAULT_SEED: u64 = 0x6B_72_75_6E_73;

#[derive(Parser)]
#[command(
    name = "kruns",
    version,
    about = "Exact distribution and approximation bounds for the (k1,k2)-runs statistic",
    after_help = "Exit codes: 0 success, 1 verification/runtime failure, 2 usage error."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact PMF of the runs statistic M over a grid of n and p (or q)
    Pmf(PmfArgs),
    /// Total-variation approximation bounds over a grid
    Bounds(BoundsArgs),
    /// Reproduce the frozen reference bound table
    Table(TableArgs),
    /// Run the self-verification suite (exit 0 iff everything passes)
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliMode {
    /// Big-rational arithmetic; probabilities are decimals parsed exactly
    Exact,
    /// IEEE double arithmetic
    Double,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliFamily {
    Poisson,
    PseudoBinomial,
    NegativeBinomial,
}

impl CliFamily {
    fn name(self) -> &'static str {
        match self {
            CliFamily::Poisson => "poisson",
            CliFamily::PseudoBinomial => "pseudo-binomial",
            CliFamily::NegativeBinomial => "negative-binomial",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CliConvention {
    /// Verbatim theorem denominator
    Theorem,
    /// Matched-mean denominator (reproduces the reference table)
    TableMean,
}

#[derive(Args)]
struct CommonGrid {
    /// Failure run length k1 (>= 1)
    #[arg(long)]
    k1: usize,
    /// Success run length k2 (>= 1)
    #[arg(long)]
    k2: usize,
    /// Trial counts, comma-separated
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Success probabilities (coupled trials: q = 1 - p), comma-separated
    #[arg(long, value_delimiter = ',')]
    p: Vec<String>,
    /// Failure probabilities (coupled trials: p = 1 - q), comma-separated
    #[arg(long, value_delimiter = ',')]
    q: Vec<String>,
    /// Arithmetic mode
    #[arg(long, value_enum, default_value = "double")]
    mode: CliMode,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: CliFormat,
    /// Output path (standard output when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PmfArgs {
    #[command(flatten)]
    grid: CommonGrid,
}

#[derive(Args)]
struct BoundsArgs {
    #[command(flatten)]
    grid: CommonGrid,
    /// Approximating family
    #[arg(long, value_enum)]
    family: CliFamily,
    /// One-parameter matching (mean only; the default)
    #[arg(long, conflicts_with = "two")]
    one: bool,
    /// Two-parameter matching (mean and variance)
    #[arg(long)]
    two: bool,
    /// One-parameter convention: fix alpha and solve for the success
    /// probability (default: alpha = n - k)
    #[arg(long, conflicts_with = "fix_p")]
    fix_alpha: Option<String>,
    /// One-parameter convention: fix the success probability, solve alpha
    #[arg(long)]
    fix_p: Option<String>,
    /// Two-parameter denominator convention
    #[arg(long, value_enum, default_value = "theorem")]
    denominator: CliConvention,
    /// Substitute c6 for the undefined constant c7 in the two-parameter
    /// negative-binomial bound (rows are then tagged ASSUMED(c7))
    #[arg(long)]
    assume_c7: bool,
}

#[derive(Args)]
struct TableArgs {
    /// Table preset to reproduce (decoupled p = 0.89, q per column,
    /// alpha = floor(n/k) for one-parameter rows, matched-mean denominators,
    /// exact arithmetic, six-decimal rendering)
    #[arg(long, value_parser = ["paper-table-1"])]
    preset: String,
    /// Substitute c6 for c7 so the two-parameter negative-binomial row
    /// carries ASSUMED(c7) values instead of BLOCKED(c7)
    #[arg(long)]
    assume_c7: bool,
    /// Output format
    #[arg(long, value_enum, default_value = "csv")]
    format: CliFormat,
    /// Output path (standard output when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest trial count in the verification grids (6..=18)
    #[arg(long, default_value_t = 12)]
    n_max: usize,
    /// Also verify the waiting-time law (PGF normalization, the 1/q
    /// regression of the uncorrected form, and counting duality)
    #[arg(long)]
    waiting: bool,
    /// PRNG seed for the Monte Carlo checks (default: ASCII "kruns")
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Monte Carlo sample size
    #[arg(long, default_value_t = 65_536)]
    trials: u64,
    /// Test hook: perturb the embedding chain and demand the suite notices
    #[arg(long, hide = true)]
    inject_chain_defect: bool,
}

// ---- errors ---------------------------------------------------------------

enum Failure {
    /// Invalid configuration: exit 2.
    Usage(String),
    /// Valid request that could not be completed: exit 1.
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => m,
        }
    }
}

fn usage<T>(message: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(message.into()))
}

// ---- row types ------------------------------------------------------------

#[derive(Serialize)]
struct PmfRowOut {
    k1: usize,
    k2: usize,
    n: usize,
    p: String,
    q: String,
    m: usize,
    probability: f64,
}

#[derive(Serialize)]
struct BoundRowOut {
    k1: usize,
    k2: usize,
    n: usize,
    p: String,
    q: String,
    family: &'static str,
    parameters: &'static str,
    convention: String,
    /// Six-decimal rendering, or one of the markers `NA(s_nk)`,
    /// `NA(n_condition)`, `NA(matching)`, `BLOCKED(c7)`.
    bound: String,
    annotation: &'static str,
    value: Option<f64>,
    notes: String,
}

// ---- emission -------------------------------------------------------------

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, Failure> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| Failure::Runtime(format!("CSV serialization failed: {e}")))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Failure::Runtime(format!("CSV flush failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Failure::Runtime(format!("CSV not UTF-8: {e}")))
}

fn to_json<T: Serialize>(
    config: serde_json::Value,
    rows: &[T],
) -> Result<String, Failure> {
    let envelope = serde_json::json!({
        "schema": 1,
        "config": config,
        "rows": rows,
    });
    serde_json::to_string_pretty(&envelope)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| Failure::Runtime(format!("JSON serialization failed: {e}")))
}

fn emit(text: String, output: &Option<PathBuf>) -> Result<(), Failure> {
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Runtime(format!("cannot write to stdout: {e}"))),
    }
}

// ---- shared grid handling --------------------------------------------------

struct ProbSpec {
    /// The literal decimal supplied on the command line.
    input: String,
    /// Whether the literal is a success (`--p`) or failure (`--q`) value.
    is_p: bool,
}

fn prob_specs(grid: &CommonGrid) -> Result<Vec<ProbSpec>, Failure> {
    match (grid.p.is_empty(), grid.q.is_empty()) {
        (false, true) => Ok(grid
            .p
            .iter()
            .map(|s| ProbSpec { input: s.clone(), is_p: true })
            .collect()),
        (true, false) => Ok(grid
            .q
            .iter()
            .map(|s| ProbSpec { input: s.clone(), is_p: false })
            .collect()),
        (false, false) => usage("give exactly one of --p and --q, not both"),
        (true, true) => usage("one of --p or --q is required"),
    }
}

fn pattern_of(k1: usize, k2: usize) -> Result<RunsPattern, Failure> {
    RunsPattern::new(k1, k2).map_err(|e| Failure::Usage(format!("invalid pattern: {e}")))
}

/// Parse a decimal literal in the requested arithmetic and build coupled
/// trial parameters from it.
fn coupled_params<S: Scalar>(spec: &ProbSpec) -> Result<TrialParams<S>, Failure> {
    let value = S::from_decimal_str(&spec.input)
        .map_err(|e| Failure::Usage(format!("cannot parse '{}': {e}", spec.input)))?;
    let p = if spec.is_p { value } else { S::one() - value };
    TrialParams::from_p(p).map_err(|e| Failure::Usage(format!("invalid probability: {e}")))
}

/// Echo columns identifying the grid cell: the given side is the literal
/// from the command line, the complement is computed exactly in decimal.
/// Falls back to the shortest double rendering for literals only `f64`
/// understands.
fn echo_pq<S: Scalar>(spec: &ProbSpec, params: &TrialParams<S>) -> (String, String) {
    let pair = <R as Scalar>::from_decimal_str(&spec.input)
        .ok()
        .map(|value| {
            let complement = format!("{}", (R::one() - value).to_f64());
            if spec.is_p {
                (spec.input.clone(), complement)
            } else {
                (complement, spec.input.clone())
            }
        });
    pair.unwrap_or_else(|| {
        (
            format!("{}", params.p().to_f64()),
            format!("{}", params.q().to_f64()),
        )
    })
}

// ---- pmf command ------------------------------------------------------------

fn pmf_rows<S: Scalar + Send + Sync>(args: &PmfArgs) -> Result<Vec<PmfRowOut>, Failure> {
    let grid = &args.grid;
    let pattern = pattern_of(grid.k1, grid.k2)?;
    let specs = prob_specs(grid)?;
    let mut cells = Vec::new();
    for spec in &specs {
        let params = coupled_params::<S>(spec)?;
        let echo = echo_pq(spec, &params);
        for &n in &grid.n {
            cells.push((params.clone(), echo.clone(), n));
        }
    }
    let (k1, k2) = (grid.k1, grid.k2);
    let per_cell = par_map(cells, move |(params, (p_echo, q_echo), n)| {
        let pmf = pmf_row(n, &params, pattern);
        // Rows run from m = 0 up to the last point carrying mass, so the
        // empty-support case prints the single row (m = 0, probability 1).
        let probs = pmf.probs();
        let last = probs
            .iter()
            .rposition(|value| !value.is_zero())
            .unwrap_or(0);
        probs[..=last]
            .iter()
            .enumerate()
            .map(|(m, value)| PmfRowOut {
                k1,
                k2,
                n,
                p: p_echo.clone(),
                q: q_echo.clone(),
                m,
                probability: value.to_f64(),
            })
            .collect::<Vec<_>>()
    });
    Ok(per_cell.into_iter().flatten().collect())
}

fn cmd_pmf(args: &PmfArgs) -> Result<(), Failure> {
    let rows = match args.grid.mode {
        CliMode::Exact => pmf_rows::<R>(args)?,
        CliMode::Double => pmf_rows::<f64>(args)?,
    };
    let text = match args.grid.format {
        CliFormat::Csv => to_csv(&rows)?,
        CliFormat::Json => to_json(config_echo_pmf(args), &rows)?,
    };
    emit(text, &args.grid.output)
}

fn config_echo_pmf(args: &PmfArgs) -> serde_json::Value {
    let grid = &args.grid;
    serde_json::json!({
        "command": "pmf",
        "k1": grid.k1,
        "k2": grid.k2,
        "n": grid.n,
        "p": grid.p,
        "q": grid.q,
        "mode": mode_name(grid.mode),
        "format": "json",
    })
}

fn mode_name(mode: CliMode) -> &'static str {
    match mode {
        CliMode::Exact => "exact",
        CliMode::Double => "double",
    }
}

// ---- bounds command ----------------------------------------------------------

struct BoundRequest<S: Scalar> {
    family: CliFamily,
    two: bool,
    fix: Option<OneParamFix<S>>,
    convention: BoundConvention,
    c7: C7Policy,
}

fn bound_report<S: Scalar>(
    request: &BoundRequest<S>,
    n: usize,
    params: &TrialParams<S>,
    pattern: RunsPattern,
) -> BoundReport<S> {
    match (request.family, request.two) {
        (CliFamily::Poisson, _) => bound_poisson_one(n, params, pattern),
        (CliFamily::PseudoBinomial, false) => {
            bound_pb_one(n, params, pattern, request.fix.clone())
        }
        (CliFamily::NegativeBinomial, false) => {
            bound_nb_one(n, params, pattern, request.fix.clone())
        }
        (CliFamily::PseudoBinomial, true) => {
            bound_pb_two(n, params, pattern, request.convention)
        }
        (CliFamily::NegativeBinomial, true) => {
            bound_nb_two(n, params, pattern, request.convention, request.c7)
        }
    }
}

/// Render a report as (bound cell, annotation, double value). The cell is
/// the six-decimal rendering or one of the documented markers.
fn render_report<S: Scalar>(
    report: &BoundReport<S>,
    c7: C7Policy,
) -> (String, &'static str, Option<f64>) {
    if !report.snk_sign_ok {
        return ("NA(s_nk)".into(), "", None);
    }
    if !report.n_condition_ok {
        return ("NA(n_condition)".into(), "", None);
    }
    if report.matched.is_none() {
        return ("NA(matching)".into(), "", None);
    }
    match &report.bound {
        None => ("BLOCKED(c7)".into(), "", None),
        Some(value) => {
            let tagged = report.family == "negative-binomial"
                && report.parameter_count == 2
                && c7 == C7Policy::ExtrapolateC6;
            (
                format_fixed6(value),
                if tagged { "ASSUMED(c7)" } else { "" },
                Some(value.to_f64()),
            )
        }
    }
}

fn convention_label<S: Scalar>(request: &BoundRequest<S>) -> String {
    if request.two {
        match request.convention {
            BoundConvention::Theorem => "theorem".into(),
            BoundConvention::TableMean => "table-mean".into(),
        }
    } else {
        match &request.fix {
            None => "alpha=n-k".into(),
            Some(OneParamFix::Alpha(a)) => format!("alpha={}", a.to_f64()),
            Some(OneParamFix::SuccessProb(p)) => format!("p={}", p.to_f64()),
        }
    }
}

fn bounds_rows<S: Scalar + Send + Sync>(args: &BoundsArgs) -> Result<Vec<BoundRowOut>, Failure> {
    let grid = &args.grid;
    let pattern = pattern_of(grid.k1, grid.k2)?;
    let specs = prob_specs(grid)?;
    let fix = match (&args.fix_alpha, &args.fix_p) {
        (None, None) => None,
        (Some(a), None) => Some(OneParamFix::Alpha(S::from_decimal_str(a).map_err(
            |e| Failure::Usage(format!("cannot parse --fix-alpha '{a}': {e}")),
        )?)),
        (None, Some(p)) => Some(OneParamFix::SuccessProb(S::from_decimal_str(p).map_err(
            |e| Failure::Usage(format!("cannot parse --fix-p '{p}': {e}")),
        )?)),
        (Some(_), Some(_)) => return usage("--fix-alpha conflicts with --fix-p"),
    };
    if args.two && fix.is_some() {
        return usage("--fix-alpha/--fix-p apply to one-parameter matching only");
    }
    if args.family == CliFamily::Poisson {
        if args.two {
            return usage("the poisson family has a single parameter; --two is not available");
        }
        if fix.is_some() {
            return usage(
                "--fix-alpha/--fix-p apply to the pseudo-binomial and negative-binomial families",
            );
        }
    }
    let request = BoundRequest::<S> {
        family: args.family,
        two: args.two,
        fix,
        convention: match args.denominator {
            CliConvention::Theorem => BoundConvention::Theorem,
            CliConvention::TableMean => BoundConvention::TableMean,
        },
        c7: if args.assume_c7 {
            C7Policy::ExtrapolateC6
        } else {
            C7Policy::Blocked
        },
    };
    let mut cells = Vec::new();
    for spec in &specs {
        let params = coupled_params::<S>(spec)?;
        let echo = echo_pq(spec, &params);
        for &n in &grid.n {
            cells.push((params.clone(), echo.clone(), n));
        }
    }
    let (k1, k2) = (grid.k1, grid.k2);
    let request_ref = &request;
    let rows = par_map(cells, move |(params, (p_echo, q_echo), n)| {
        let report = bound_report(request_ref, n, &params, pattern);
        let (cell, annotation, value) = render_report(&report, request_ref.c7);
        BoundRowOut {
            k1,
            k2,
            n,
            p: p_echo,
            q: q_echo,
            family: report.family,
            parameters: if request_ref.two { "two" } else { "one" },
            convention: convention_label(request_ref),
            bound: cell,
            annotation,
            value,
            notes: report.notes,
        }
    });
    Ok(rows)
}

fn cmd_bounds(args: &BoundsArgs) -> Result<(), Failure> {
    let rows = match args.grid.mode {
        CliMode::Exact => bounds_rows::<R>(args)?,
        CliMode::Double => bounds_rows::<f64>(args)?,
    };
    let text = match args.grid.format {
        CliFormat::Csv => to_csv(&rows)?,
        CliFormat::Json => to_json(config_echo_bounds(args), &rows)?,
    };
    emit(text, &args.grid.output)
}

fn config_echo_bounds(args: &BoundsArgs) -> serde_json::Value {
    let grid = &args.grid;
    serde_json::json!({
        "command": "bounds",
        "k1": grid.k1,
        "k2": grid.k2,
        "n": grid.n,
        "p": grid.p,
        "q": grid.q,
        "family": args.family.name(),
        "parameters": if args.two { "two" } else { "one" },
        "denominator": match args.denominator {
            CliConvention::Theorem => "theorem",
            CliConvention::TableMean => "table-mean",
        },
        "assume_c7": args.assume_c7,
        "mode": mode_name(grid.mode),
        "format": "json",
    })
}

// ---- table command -----------------------------------------------------------

fn cmd_table(args: &TableArgs) -> Result<(), Failure> {
    // Preset conventions: decoupled weights with p fixed at 0.89 and q the
    // column label, alpha fixed to the support size floor(n/k) for the
    // one-parameter rows, matched-mean denominators for the two-parameter
    // rows, exact arithmetic throughout.
    let blocks: [(usize, usize, usize); 3] = [(3, 4, 50), (3, 5, 150), (4, 5, 250)];
    let q_columns = ["0.11", "0.12", "0.13", "0.14"];
    // The reference table rounds to six decimals everywhere except these
    // four cells, which it truncates; the preset reproduces the printed
    // strings, so the rendering choice is frozen per cell (keyed by
    // k1, k2, q column, family row) and called out in the notes.
    let truncated_cells: [(usize, usize, &str, usize); 4] = [
        (4, 5, "0.14", 0),
        (4, 5, "0.12", 1),
        (4, 5, "0.13", 1),
        (3, 5, "0.14", 3),
    ];
    let p_fixed = <R as Scalar>::from_decimal_str("0.89").unwrap();
    let c7 = if args.assume_c7 {
        C7Policy::ExtrapolateC6
    } else {
        C7Policy::Blocked
    };
    let mut cells = Vec::new();
    for &(k1, k2, n) in &blocks {
        for family_row in 0..5usize {
            for q in q_columns {
                cells.push((k1, k2, n, family_row, q));
            }
        }
    }
    let p_ref = &p_fixed;
    let rows = par_map(cells, move |(k1, k2, n, family_row, q)| {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        let params = TrialParams::decoupled(
            p_ref.clone(),
            <R as Scalar>::from_decimal_str(q).unwrap(),
        )
        .unwrap();
        let alpha = <R as Scalar>::from_u64((n / pattern.k()) as u64);
        let fix = Some(OneParamFix::Alpha(alpha.clone()));
        let (report, two) = match family_row {
            0 => (bound_poisson_one(n, &params, pattern), false),
            1 => (bound_pb_one(n, &params, pattern, fix), false),
            2 => (bound_nb_one(n, &params, pattern, fix), false),
            3 => (
                bound_pb_two(n, &params, pattern, BoundConvention::TableMean),
                true,
            ),
            _ => (
                bound_nb_two(n, &params, pattern, BoundConvention::TableMean, c7),
                true,
            ),
        };
        let (mut cell, annotation, value) = render_report(&report, c7);
        let mut notes = report.notes.clone();
        if truncated_cells.contains(&(k1, k2, q, family_row)) {
            if let Some(bound) = &report.bound {
                cell = format_fixed6_trunc(bound);
                notes.push_str("; reference table renders this cell truncated, not rounded");
            }
        }
        BoundRowOut {
            k1,
            k2,
            n,
            p: "0.89".into(),
            q: q.into(),
            family: report.family,
            parameters: if two { "two" } else { "one" },
            convention: if two {
                "table-mean".into()
            } else {
                format!("alpha={}", alpha.to_f64())
            },
            bound: cell,
            annotation,
            value,
            notes,
        }
    });
    let text = match args.format {
        CliFormat::Csv => to_csv(&rows)?,
        CliFormat::Json => to_json(
            serde_json::json!({
                "command": "table",
                "preset": args.preset,
                "assume_c7": args.assume_c7,
                "mode": "exact",
                "format": "json",
            }),
            &rows,
        )?,
    };
    emit(text, &args.output)
}

// ---- verify command ------------------------------------------------------------

struct Verifier {
    failures: usize,
}

impl Verifier {
    fn report(&mut self, name: &str, outcome: Result<String, String>) {
        match outcome {
            Ok(detail) => println!("verify {name}: ok — {detail}"),
            Err(first) => {
                self.failures += 1;
                println!("verify {name}: FAIL — {first}");
            }
        }
    }
}

fn rational(num: i64, den: i64) -> R {
    <R as Scalar>::from_ratio(num, den)
}

fn four_way_check(n_max: usize, inject: bool) -> Result<String, String> {
    let mut cells = 0usize;
    for (k1, k2) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        for (num, den) in [(3i64, 10i64), (1, 2), (7, 10)] {
            let params = TrialParams::from_p(rational(num, den)).unwrap();
            let mut chain = build_chain(&params, pattern);
            if inject {
                chain.perturb_for_testing(&rational(1, 1_000_000));
            }
            for n in 0..=n_max {
                let brute = brute_force_pmf(n, &params, pattern)
                    .map_err(|e| format!("enumeration failed: {e}"))?
                    .pmf;
                let embedded = pmf_embedding(&chain, n);
                let recursive = pmf_row(n, &params, pattern);
                for m in 0..=brute.support_max() {
                    let reference = brute.prob(m);
                    if embedded.prob(m) != reference || recursive.prob(m) != reference {
                        return Err(format!(
                            "first mismatch at k1={k1} k2={k2} p={num}/{den} n={n} m={m}"
                        ));
                    }
                    cells += 1;
                }
            }
        }
    }
    Ok(format!(
        "enumeration, embedding and recursion identical on {cells} exact cells"
    ))
}

fn normalization_check(n_max: usize) -> Result<String, String> {
    let params = TrialParams::from_p(0.4f64).unwrap();
    let pattern = RunsPattern::new(1, 2).unwrap();
    for n in 0..=(n_max + 40) {
        let deviation = (pgf_recursive(n, &params, pattern).eval(&1.0) - 1.0).abs();
        if deviation > 1e-12 {
            return Err(format!("phi_{n}(1) deviates by {deviation:.3e}"));
        }
    }
    let exact_params = TrialParams::from_p(rational(2, 5)).unwrap();
    let exact_pattern = RunsPattern::new(2, 1).unwrap();
    let phi = pgf_recursive(n_max, &exact_params, exact_pattern);
    if phi.eval(&R::one()) != R::one() {
        return Err(format!("exact phi_{n_max}(1) != 1"));
    }
    Ok(format!("phi_n(1) = 1 up to n = {}", n_max + 40))
}

fn margins_check(n_max: usize) -> Result<String, String> {
    let mut applicable = 0usize;
    let mut sub_unit = 0usize;
    for (k1, k2) in [(1usize, 1usize), (1, 2), (2, 1), (2, 2)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        for p in [0.05f64, 0.2, 0.5] {
            let params = TrialParams::from_p(p).unwrap();
            for n in 1..=n_max {
                let reports = [
                    bound_poisson_one(n, &params, pattern),
                    bound_pb_one(n, &params, pattern, None),
                    bound_nb_one(n, &params, pattern, None),
                    bound_pb_two(n, &params, pattern, BoundConvention::Theorem),
                    bound_nb_two(
                        n,
                        &params,
                        pattern,
                        BoundConvention::Theorem,
                        C7Policy::ExtrapolateC6,
                    ),
                ];
                for report in reports {
                    if !report.is_applicable() {
                        continue;
                    }
                    let Some(bound) = report.bound else { continue };
                    applicable += 1;
                    // A bound >= 1 dominates any total-variation distance
                    // trivially; only sub-unit bounds are informative.
                    if bound >= 1.0 {
                        continue;
                    }
                    let margin = verify_bound(&report, n, &params, pattern)
                        .map_err(|e| format!("verification failed: {e}"))?;
                    if margin < 0.0 {
                        return Err(format!(
                            "negative margin {margin:.3e}: {} k1={k1} k2={k2} p={p} n={n}",
                            report.family
                        ));
                    }
                    sub_unit += 1;
                }
            }
        }
    }
    if applicable == 0 {
        return Err("grid produced no applicable bounds".into());
    }
    Ok(format!(
        "{applicable} applicable bounds, {sub_unit} sub-unit ones dominate the exact distance"
    ))
}

fn monte_carlo_check(n_max: usize, seed: u64, trials: u64) -> Result<String, String> {
    let params = TrialParams::from_p(0.4f64).unwrap();
    let pattern = RunsPattern::new(1, 2).unwrap();
    let n = n_max.max(10);
    let parallel = monte_carlo_pmf(n, trials, seed, &params, pattern);
    let sequential = monte_carlo_pmf_sequential(n, trials, seed, &params, pattern);
    for m in 0..parallel.pmf_estimate.probs().len() {
        if parallel.pmf_estimate.prob(m).to_bits() != sequential.pmf_estimate.prob(m).to_bits() {
            return Err(format!("parallel/sequential estimates differ at m={m}"));
        }
    }
    let coverage_n = n_max.min(16);
    let exact = brute_force_pmf(coverage_n, &params, pattern)
        .map_err(|e| format!("enumeration failed: {e}"))?
        .pmf;
    let estimate = monte_carlo_pmf(coverage_n, trials, seed, &params, pattern);
    for m in 0..=exact.support_max() {
        let deviation = (estimate.pmf_estimate.prob(m) - exact.prob(m)).abs();
        let slack = 4.0 * estimate.std_errors[m] + 6.0 / trials as f64;
        if deviation > slack {
            return Err(format!(
                "estimate off by {deviation:.3e} (> {slack:.3e}) at n={coverage_n} m={m}"
            ));
        }
    }
    Ok(format!(
        "deterministic across execution strategies; covers the exact law at n={coverage_n} ({trials} trials, seed {seed:#x})"
    ))
}

fn tv_dual_check(n_max: usize) -> Result<String, String> {
    let mut worst = 0.0f64;
    for (k1, k2) in [(1usize, 1usize), (2, 1)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        for p in [0.3f64, 0.6] {
            let params = TrialParams::from_p(p).unwrap();
            for n in 0..=(n_max + 6) {
                let deviation = (tv_consecutive(n, &params, pattern)
                    - tv_consecutive_expansion(n, &params, pattern))
                .abs();
                worst = worst.max(deviation);
                if deviation > 1e-10 {
                    return Err(format!(
                        "dual routes deviate by {deviation:.3e} at k1={k1} k2={k2} p={p} n={n}"
                    ));
                }
            }
        }
    }
    let params = TrialParams::from_p(rational(1, 3)).unwrap();
    let pattern = RunsPattern::new(2, 1).unwrap();
    if tv_consecutive(n_max, &params, pattern) != tv_consecutive_expansion(n_max, &params, pattern)
    {
        return Err(format!("exact dual-route mismatch at n={n_max}"));
    }
    Ok(format!("worst double deviation {worst:.2e}"))
}

fn waiting_check(n_max: usize) -> Result<String, String> {
    let one = R::one();
    for (k1, k2, num, den) in [(1usize, 1usize, 1i64, 2i64), (2, 1, 2, 5)] {
        let pattern = RunsPattern::new(k1, k2).unwrap();
        let params = TrialParams::from_p(rational(num, den)).unwrap();
        for r in 0..=5usize {
            let value = waiting_pgf(r, &params, pattern, &one)
                .map_err(|e| format!("waiting PGF failed: {e}"))?;
            if value != R::one() {
                return Err(format!("M_{r}(1) != 1 at k1={k1} k2={k2}"));
            }
        }
        let q = one.clone() - rational(num, den);
        let uncorrected = waiting_pgf_uncorrected(3, &params, pattern, &one)
            .map_err(|e| format!("uncorrected PGF failed: {e}"))?;
        if uncorrected != one.clone() / q {
            return Err(format!("H_r(1) != 1/q at k1={k1} k2={k2}"));
        }
        // Counting duality: P(T_r <= n) = P(M_n >= r).
        for r in 1..=3usize {
            let waiting = waiting_pmf(r, n_max, &params, pattern);
            for n in 0..=n_max {
                let row = pmf_row(n, &params, pattern);
                let mut tail = R::zero();
                for m in r..=row.support_max() {
                    tail = tail + row.prob(m);
                }
                if waiting.cdf(n) != tail {
                    return Err(format!("duality fails at k1={k1} k2={k2} r={r} n={n}"));
                }
            }
        }
    }
    Ok("PGF normalization, the 1/q regression pin, and counting duality hold".into())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    if !(6..=18).contains(&args.n_max) {
        return usage("--n-max must be between 6 and 18");
    }
    let mut verifier = Verifier { failures: 0 };
    verifier.report(
        "four-way agreement",
        four_way_check(args.n_max, args.inject_chain_defect),
    );
    verifier.report("pgf normalization", normalization_check(args.n_max));
    verifier.report("bound margins", margins_check(args.n_max));
    verifier.report(
        "monte carlo",
        monte_carlo_check(args.n_max, args.seed, args.trials),
    );
    verifier.report("shift-distance dual routes", tv_dual_check(args.n_max));
    if args.waiting {
        verifier.report("waiting-time law", waiting_check(args.n_max));
    }
    if verifier.failures > 0 {
        return Err(Failure::Runtime(format!(
            "{} verification check(s) failed",
            verifier.failures
        )));
    }
    println!("verify: all checks passed");
    Ok(())
}

// ---- entry point ----------------------------------------------------------------

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Pmf(args) => cmd_pmf(args),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Table(args) => cmd_table(args),
        Command::Verify(args) => cmd_verify(args),
    };
    if let Err(failure) = outcome {
        eprintln!("kruns: {}", failure.message());
        exit(failure.exit_code());
    }
}
