//! Command-line driver: parses argv, runs one experiment and renders a
//! versioned JSON record (or CSV rows).

use std::collections::BTreeMap;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use froblab_core::coding::{
    self, acl_experiment, code_chain, interpret_truncated_arithmetic, measure_experiment, pair_inject,
    paley_count, tp2_witness, ArithOptions, CodeKind, SearchOptions, SearchOrder,
};
use froblab_core::count::{count, default_budget, CountOptions};
use froblab_core::diffalg::{root_count_stability, sigma_degree_probe, sigma_specialize, torus_subgroup, DiffPoly};
use froblab_core::dimension::{check_subadditivity, estimate_dimension, theta_test, DimOptions, DEFAULT_TOLERANCE};
use froblab_core::field::format_poly;
use froblab_core::formula::{parse, parse_binding, ParamEnv};
use froblab_core::{make_field, ErrorKind, FieldCtx, GFElem, LabError};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a finished invocation produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Seed for every randomized choice.
    #[arg(long, default_value_t = 0, global = true)]
    seed: u64,
    /// Evaluation budget; defaults to $FROBLAB_BUDGET or 1e10.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 1, global = true)]
    #[serde(skip)]
    workers: usize,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FieldArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, default_value_t = 1)]
    k: u32,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    m: i64,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ScheduleArgs {
    #[arg(long)]
    p: u64,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    m: i64,
    /// Strictly increasing extension degrees, e.g. `4,6,8`.
    #[arg(long, value_delimiter = ',', required = true)]
    schedule: Vec<u32>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FormulaArgs {
    #[arg(long)]
    formula: String,
    /// `name=int:V | gen | nonsq | idx:V`, repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SetArgs {
    /// Canonical indices of the elements of A.
    #[arg(long, value_delimiter = ',', conflicts_with = "random")]
    set: Vec<u64>,
    /// Draw A as this many distinct seeded elements of the prime field.
    #[arg(long)]
    random: Option<usize>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Square,
    Cube,
    Paley,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum OrderArg {
    Canonical,
    Random,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SearchArgs {
    #[arg(long, value_enum, default_value_t = OrderArg::Canonical)]
    order: OrderArg,
    #[arg(long)]
    max_probes: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Modulus, generator and subfield data of GF(p^k).
    FieldInfo {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Exact solution count of a formula.
    Count {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        formula: FormulaArgs,
    },
    /// Dimension fit along a k-schedule.
    Dim {
        #[command(flatten)]
        sched: ScheduleArgs,
        #[command(flatten)]
        formula: FormulaArgs,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
    },
    /// Difference-quotient test of a one-variable set.
    Theta {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        formula: FormulaArgs,
    },
    /// Fiber sandwich for a split of the free variables.
    Subadd {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        formula: FormulaArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
    },
    /// Residue code of a subset E of a small set A.
    CodeSubset {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        set: SetArgs,
        /// Indices of E; ignored with --all-subsets.
        #[arg(long, value_delimiter = ',')]
        target: Vec<u64>,
        #[arg(long, value_enum, default_value_t = KindArg::Square)]
        kind: KindArg,
        /// Code every subset of A.
        #[arg(long)]
        all_subsets: bool,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Common-neighbourhood count in the Paley graph.
    Paley {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        set: SetArgs,
        #[arg(long, value_delimiter = ',')]
        target: Vec<u64>,
    },
    /// Seeded shifted-square pattern counts.
    Measure {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Injective pair code on a small set.
    PairInject {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        set: SetArgs,
    },
    /// Coded n×n grid witnessing TP2.
    Tp2 {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Coded strictly increasing chain.
    Chain {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        length: usize,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Truncated arithmetic on a small set via coded graphs.
    InterpretArith {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        set: SetArgs,
    },
    /// The ξ count against its curve bound.
    Acl {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        n: u32,
    },
    /// Frobenius specialization of a difference polynomial.
    SigmaSpec {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: u32,
    },
    /// Root counts of the specialization along a k-schedule.
    SigmaStability {
        #[arg(long)]
        poly: String,
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<u32>,
    },
    /// Image and kernel of x ↦ x^{-1}σ(x).
    Torus {
        #[command(flatten)]
        field: FieldArgs,
    },
    /// Bounded-versus-growing probe of a quantifier-free set.
    Probe {
        #[arg(long)]
        p: u64,
        #[arg(long, default_value_t = 1)]
        m: u32,
        #[arg(long, value_delimiter = ',', required = true)]
        schedule: Vec<u32>,
        #[command(flatten)]
        formula: FormulaArgs,
    },
}

#[derive(Parser, Debug)]
#[command(name = "froblab", version, about = "Finite difference field laboratory")]
struct Top {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

/// A finished experiment before rendering.
struct Record {
    result: Value,
    /// Tabular view for CSV output; the flat scalar fields otherwise.
    rows: Option<Vec<Value>>,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn record<T: Serialize>(v: &T) -> Record {
    Record {
        result: to_value(v),
        rows: None,
    }
}

fn with_rows<T: Serialize, R: Serialize>(v: &T, rows: &[R]) -> Record {
    Record {
        result: to_value(v),
        rows: Some(rows.iter().map(to_value).collect()),
    }
}

fn params(list: &[String]) -> Result<ParamEnv, LabError> {
    let mut env = ParamEnv::new();
    for b in list {
        let (name, spec) = parse_binding(b)?;
        env.insert(name, spec);
    }
    Ok(env)
}

fn field(f: &FieldArgs) -> Result<FieldCtx, LabError> {
    make_field(f.p, f.k, f.m)
}

fn search(s: &SearchArgs, common: &Common) -> SearchOptions {
    SearchOptions {
        order: match s.order {
            OrderArg::Canonical => SearchOrder::Canonical,
            OrderArg::Random => SearchOrder::Random { seed: common.seed },
        },
        max_probes: s.max_probes,
        workers: common.workers,
    }
}

/// The explicit set, or `n` distinct seeded prime-field elements in
/// increasing order.
fn small_set(ctx: &FieldCtx, s: &SetArgs, seed: u64) -> Result<Vec<GFElem>, LabError> {
    match s.random {
        Some(n) => {
            let p = ctx.p();
            if n as u64 > p {
                return Err(LabError::TuplesExhausted { n, q: p });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx: Vec<u64> = sample(&mut rng, p as usize, n).into_iter().map(|i| i as u64).collect();
            idx.sort_unstable();
            coding::elems(ctx, &idx)
        }
        None => coding::elems(ctx, &s.set),
    }
}

fn subsets(a: &[GFElem]) -> Vec<Vec<GFElem>> {
    (0..1usize << a.len())
        .map(|mask| {
            a.iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, e)| *e)
                .collect()
        })
        .collect()
}

#[derive(Serialize)]
struct FieldInfo {
    p: u64,
    k: u32,
    m: u64,
    q: u64,
    label: String,
    modulus: String,
    tables: bool,
    generator: GFElem,
    nonsquare: Option<GFElem>,
    fixed_degree: u32,
    fixed_size: u64,
}

fn execute(cmd: &Command, common: &Common) -> Result<Record, LabError> {
    let budget = common.budget.unwrap_or_else(default_budget);
    let copts = CountOptions::with_budget(budget).workers(common.workers);
    Ok(match cmd {
        Command::FieldInfo { field: f } => {
            let ctx = field(f)?;
            let d = ctx.fixed_degree(1);
            record(&FieldInfo {
                p: ctx.p(),
                k: ctx.k(),
                m: ctx.m(),
                q: ctx.q(),
                label: ctx.label(),
                modulus: format_poly(ctx.modulus(), "t"),
                tables: ctx.has_tables(),
                generator: ctx.find_generator(),
                nonsquare: ctx.find_nonsquare().ok(),
                fixed_degree: d,
                fixed_size: ctx.p().pow(d),
            })
        }
        Command::Count { field: f, formula } => {
            let ctx = field(f)?;
            let phi = parse(&formula.formula)?;
            let r = count(&ctx, &phi, &params(&formula.params)?, copts)?;
            record(&r)
        }
        Command::Dim { sched, formula, tolerance } => {
            let phi = parse(&formula.formula)?;
            let opts = DimOptions {
                tolerance: *tolerance,
                count: copts,
            };
            let e = estimate_dimension(sched.p, &sched.schedule, sched.m, &phi, &params(&formula.params)?, opts)?;
            with_rows(&e, &e.per_k)
        }
        Command::Theta { field: f, formula } => {
            let ctx = field(f)?;
            let phi = parse(&formula.formula)?;
            record(&theta_test(&ctx, &phi, &params(&formula.params)?, copts)?)
        }
        Command::Subadd { field: f, formula, x, y } => {
            let ctx = field(f)?;
            let phi = parse(&formula.formula)?;
            record(&check_subadditivity(&ctx, &phi, x, y, &params(&formula.params)?, copts)?)
        }
        Command::CodeSubset {
            field: f,
            set,
            target,
            kind,
            all_subsets,
            search: s,
        } => {
            let ctx = field(f)?;
            let a = small_set(&ctx, set, common.seed)?;
            let kind = match kind {
                KindArg::Square => CodeKind::Square,
                KindArg::Cube => CodeKind::Cube,
                KindArg::Paley => CodeKind::Paley,
            };
            let opts = search(s, common);
            if *all_subsets {
                let outcomes = subsets(&a)
                    .iter()
                    .map(|e| coding::code_subset(&ctx, kind, &a, e, opts))
                    .collect::<Result<Vec<_>, _>>()?;
                let coded = outcomes
                    .iter()
                    .filter(|o| o.certificate().is_some_and(|c| c.verified))
                    .count();
                let v = json!({
                    "set_a": a,
                    "subsets": outcomes.len(),
                    "coded": coded,
                    "all_coded": coded == outcomes.len(),
                    "outcomes": outcomes,
                });
                Record { result: v, rows: None }
            } else {
                let e = coding::elems(&ctx, target)?;
                record(&coding::code_subset(&ctx, kind, &a, &e, opts)?)
            }
        }
        Command::Paley { field: f, set, target } => {
            let ctx = field(f)?;
            let a = small_set(&ctx, set, common.seed)?;
            record(&paley_count(&ctx, &a, &coding::elems(&ctx, target)?)?)
        }
        Command::Measure { field: f, n, trials } => {
            let ctx = field(f)?;
            let s = measure_experiment(&ctx, *n, *trials, common.seed)?;
            let rows: Vec<Value> = s
                .counts
                .iter()
                .zip(&s.deviations)
                .enumerate()
                .map(|(i, (c, d))| json!({"trial": i, "count": c, "deviation": d}))
                .collect();
            Record {
                result: to_value(&s),
                rows: Some(rows),
            }
        }
        Command::PairInject { field: f, set } => {
            let ctx = field(f)?;
            record(&pair_inject(&ctx, &small_set(&ctx, set, common.seed)?)?)
        }
        Command::Tp2 { field: f, n, search: s } => {
            let ctx = field(f)?;
            record(&tp2_witness(&ctx, *n, search(s, common))?)
        }
        Command::Chain { field: f, length, search: s } => {
            let ctx = field(f)?;
            record(&code_chain(&ctx, *length, search(s, common))?)
        }
        Command::InterpretArith { field: f, set } => {
            let ctx = field(f)?;
            let y = small_set(&ctx, set, common.seed)?;
            let opts = ArithOptions {
                budget,
                search: SearchOptions {
                    workers: common.workers,
                    ..SearchOptions::default()
                },
            };
            record(&interpret_truncated_arithmetic(&ctx, &y, opts)?)
        }
        Command::Acl { field: f, n } => {
            let ctx = field(f)?;
            record(&acl_experiment(&ctx, *n, copts)?)
        }
        Command::SigmaSpec { poly, p, m } => {
            let f = DiffPoly::parse(poly)?;
            let g = sigma_specialize(&f, *p, *m)?;
            record(&json!({
                "poly": f,
                "order": f.order(),
                "specialized": g,
                "degree": g.degree(),
            }))
        }
        Command::SigmaStability { poly, p, m, schedule } => {
            let f = DiffPoly::parse(poly)?;
            let r = root_count_stability(&f, *p, *m, schedule, copts)?;
            with_rows(&r, &r.per_k)
        }
        Command::Torus { field: f } => {
            let ctx = field(f)?;
            record(&torus_subgroup(&ctx, budget)?)
        }
        Command::Probe { p, m, schedule, formula } => {
            let phi = parse(&formula.formula)?;
            let r = sigma_degree_probe(&phi, *p, *m, schedule, &params(&formula.params)?, copts)?;
            with_rows(&r, &r.per_k)
        }
    })
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::FieldInfo { .. } => "field-info",
        Command::Count { .. } => "count",
        Command::Dim { .. } => "dim",
        Command::Theta { .. } => "theta",
        Command::Subadd { .. } => "subadd",
        Command::CodeSubset { .. } => "code-subset",
        Command::Paley { .. } => "paley",
        Command::Measure { .. } => "measure",
        Command::PairInject { .. } => "pair-inject",
        Command::Tp2 { .. } => "tp2",
        Command::Chain { .. } => "chain",
        Command::InterpretArith { .. } => "interpret-arith",
        Command::Acl { .. } => "acl",
        Command::SigmaSpec { .. } => "sigma-spec",
        Command::SigmaStability { .. } => "sigma-stability",
        Command::Torus { .. } => "torus",
        Command::Probe { .. } => "probe",
    }
}

/// The resolved configuration: every flag of the subcommand plus the
/// common ones except the worker count.
fn config(cmd: &Command, common: &Common) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), json!(command_name(cmd)));
    let inner = match cmd {
        Command::FieldInfo { field } | Command::Torus { field } => to_value(field),
        Command::Count { field, formula } | Command::Theta { field, formula } => merge(&[to_value(field), to_value(formula)]),
        Command::Dim { sched, formula, tolerance } => {
            merge(&[to_value(sched), to_value(formula), json!({"tolerance": tolerance})])
        }
        Command::Subadd { field, formula, x, y } => merge(&[to_value(field), to_value(formula), json!({"x": x, "y": y})]),
        Command::CodeSubset {
            field,
            set,
            target,
            kind,
            all_subsets,
            search,
        } => merge(&[
            to_value(field),
            to_value(set),
            to_value(search),
            json!({"target": target, "kind": kind, "all_subsets": all_subsets}),
        ]),
        Command::Paley { field, set, target } => merge(&[to_value(field), to_value(set), json!({"target": target})]),
        Command::Measure { field, n, trials } => merge(&[to_value(field), json!({"n": n, "trials": trials})]),
        Command::PairInject { field, set } | Command::InterpretArith { field, set } => merge(&[to_value(field), to_value(set)]),
        Command::Tp2 { field, n, search } => merge(&[to_value(field), to_value(search), json!({"n": n})]),
        Command::Chain { field, length, search } => merge(&[to_value(field), to_value(search), json!({"length": length})]),
        Command::Acl { field, n } => merge(&[to_value(field), json!({"n": n})]),
        Command::SigmaSpec { poly, p, m } => json!({"poly": poly, "p": p, "m": m}),
        Command::SigmaStability { poly, p, m, schedule } => json!({"poly": poly, "p": p, "m": m, "schedule": schedule}),
        Command::Probe { p, m, schedule, formula } => merge(&[json!({"p": p, "m": m, "schedule": schedule}), to_value(formula)]),
    };
    let common_v = to_value(common);
    for v in [inner, common_v] {
        if let Value::Object(o) = v {
            map.extend(o);
        }
    }
    map.insert("budget".into(), json!(common.budget.unwrap_or_else(default_budget)));
    Value::Object(map)
}

fn merge(parts: &[Value]) -> Value {
    let mut map = Map::new();
    for p in parts {
        if let Value::Object(o) = p {
            map.extend(o.clone());
        }
    }
    Value::Object(map)
}

/// Renders one record: schema, version and config first, then the result
/// fields, then `runtime`.
fn render_json(name: &str, config: Value, result: Value, runtime: Value) -> String {
    let mut map = Map::new();
    map.insert("schema".into(), json!(format!("froblab/{name}/v1")));
    map.insert("version".into(), json!(VERSION));
    map.insert("config".into(), config);
    match result {
        Value::Object(o) => {
            for (k, v) in o {
                map.insert(k, v);
            }
        }
        other => {
            map.insert("result".into(), other);
        }
    }
    map.insert("runtime".into(), runtime);
    serde_json::to_string(&Value::Object(map)).expect("json") + "\n"
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render_csv(name: &str, config: &Value, rec: &Record) -> Result<String, String> {
    let rows: Vec<Map<String, Value>> = match &rec.rows {
        Some(rows) => rows
            .iter()
            .filter_map(|r| r.as_object().cloned())
            .collect(),
        None => {
            let flat: Map<String, Value> = rec
                .result
                .as_object()
                .map(|o| {
                    o.iter()
                        .filter(|(_, v)| !v.is_array() && !v.is_object())
                        .map(|(k, v)| (k.clone(), v.clone()))
                        .collect()
                })
                .unwrap_or_default();
            vec![flat]
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let keys: Vec<String> = rows.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
    let mut header = vec!["schema".to_string(), "seed".to_string()];
    header.extend(keys.iter().cloned());
    w.write_record(&header).map_err(|e| e.to_string())?;
    let seed = cell(&config["seed"]);
    for r in &rows {
        let mut line = vec![format!("froblab/{name}/v1"), seed.clone()];
        line.extend(keys.iter().map(|k| r.get(k).map(cell).unwrap_or_default()));
        w.write_record(&line).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn exit_code(e: &LabError) -> i32 {
    match e.kind() {
        ErrorKind::Precondition => 2,
        ErrorKind::Budget => 3,
        ErrorKind::Internal => 1,
    }
}

/// Runs one command. `argv[0]` is the program name.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let top = match Top::try_parse_from(argv) {
        Ok(t) => t,
        Err(e) => {
            use clap::error::ErrorKind as K;
            let text = e.render().to_string();
            return match e.kind() {
                K::DisplayHelp | K::DisplayVersion | K::DisplayHelpOnMissingArgumentOrSubcommand => Outcome {
                    code: if e.kind() == K::DisplayHelpOnMissingArgumentOrSubcommand { 2 } else { 0 },
                    stdout: text,
                    stderr: String::new(),
                },
                K::InvalidSubcommand => Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: format!("UnknownCommand: {text}"),
                },
                _ => Outcome {
                    code: 2,
                    stdout: String::new(),
                    stderr: format!("BadFlag: {text}"),
                },
            };
        }
    };
    let name = command_name(&top.command);
    let cfg = config(&top.command, &top.common);
    let start = Instant::now();
    let rec = match execute(&top.command, &top.common) {
        Ok(r) => r,
        Err(e) => {
            return Outcome {
                code: exit_code(&e),
                stdout: String::new(),
                stderr: format!("{e}\n"),
            }
        }
    };
    let runtime = json!({
        "workers": top.common.workers,
        "elapsed_ms": start.elapsed().as_secs_f64() * 1e3,
    });
    match top.common.format {
        Format::Json => Outcome {
            code: 0,
            stdout: render_json(name, cfg, rec.result, runtime),
            stderr: String::new(),
        },
        Format::Csv => match render_csv(name, &cfg, &rec) {
            Ok(s) => Outcome {
                code: 0,
                stdout: s,
                stderr: String::new(),
            },
            Err(e) => Outcome {
                code: 1,
                stdout: String::new(),
                stderr: format!("InvariantViolated: csv rendering failed: {e}\n"),
            },
        },
    }
}

/// Drops the `runtime` object of a rendered record, leaving the fields that
/// must be reproducible.
pub fn strip_runtime(json_line: &str) -> Option<String> {
    let mut v: BTreeMap<String, Value> = serde_json::from_str(json_line).ok()?;
    v.remove("runtime");
    serde_json::to_string(&v).ok()
}
