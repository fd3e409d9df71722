//! Exact satisfaction, solution counts and fibered counts over `GF(p^k)^n`.

mod compile;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};
use crate::formula::{free_vars, resolve_params, validate, Formula, ParamEnv};
use compile::{Budget, Machine, Program};

/// Default cap on atomic evaluations per run.
pub const DEFAULT_BUDGET: u64 = 10_000_000_000;

/// Budget from `FROBLAB_BUDGET` when set and valid, otherwise the default.
pub fn default_budget() -> u64 {
    std::env::var("FROBLAB_BUDGET")
        .ok()
        .and_then(|s| s.trim().replace('_', "").parse::<f64>().ok())
        .filter(|v| *v >= 1.0)
        .map(|v| v as u64)
        .unwrap_or(DEFAULT_BUDGET)
}

#[derive(Clone, Copy, Debug)]
pub struct CountOptions {
    /// Maximum number of atomic (equation) evaluations.
    pub budget: u64,
    pub workers: usize,
}

impl Default for CountOptions {
    fn default() -> Self {
        CountOptions {
            budget: default_budget(),
            workers: 1,
        }
    }
}

impl CountOptions {
    pub fn with_budget(budget: u64) -> Self {
        CountOptions {
            budget,
            ..Default::default()
        }
    }

    pub fn workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FieldTriple {
    pub p: u64,
    pub k: u32,
    pub m: u64,
}

impl FieldTriple {
    pub fn of(ctx: &FieldCtx) -> Self {
        FieldTriple {
            p: ctx.p(),
            k: ctx.k(),
            m: ctx.m(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CountReport {
    pub count: u128,
    pub q: u64,
    pub n_free: usize,
    /// `log(count) / log(q)`; zero when `empty`.
    pub normalized: f64,
    pub empty: bool,
    pub field: FieldTriple,
    #[serde(skip)]
    pub elapsed_ms: f64,
}

impl CountReport {
    /// Equality ignoring the elapsed time.
    pub fn same_result(&self, other: &CountReport) -> bool {
        self.count == other.count
            && self.q == other.q
            && self.n_free == other.n_free
            && self.field == other.field
            && self.normalized.to_bits() == other.normalized.to_bits()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FiberReport {
    /// Smallest nonempty fiber; zero when every fiber is empty.
    pub min_fiber: u128,
    pub max_fiber: u128,
    pub image_count: u128,
    pub total: u128,
}

impl FiberReport {
    fn empty() -> Self {
        FiberReport {
            min_fiber: u128::MAX,
            max_fiber: 0,
            image_count: 0,
            total: 0,
        }
    }

    fn add_fiber(&mut self, size: u128) {
        if size == 0 {
            return;
        }
        self.min_fiber = self.min_fiber.min(size);
        self.max_fiber = self.max_fiber.max(size);
        self.image_count += 1;
        self.total += size;
    }

    fn merge(&mut self, other: &FiberReport) {
        self.min_fiber = self.min_fiber.min(other.min_fiber);
        self.max_fiber = self.max_fiber.max(other.max_fiber);
        self.image_count += other.image_count;
        self.total += other.total;
    }

    fn finish(mut self) -> Self {
        if self.image_count == 0 {
            self.min_fiber = 0;
        }
        self
    }
}

/// Truth value of `phi` with free variables and parameters taken from `env`.
pub fn evaluate(ctx: &FieldCtx, phi: &Formula, env: &BTreeMap<String, GFElem>) -> Result<bool> {
    evaluate_with(ctx, phi, env, CountOptions::default())
}

pub fn evaluate_with(
    ctx: &FieldCtx,
    phi: &Formula,
    env: &BTreeMap<String, GFElem>,
    opts: CountOptions,
) -> Result<bool> {
    crate::formula::check_alpha(phi)?;
    let free = free_vars(phi);
    for name in free.iter().chain(phi.params().iter()) {
        let e = env
            .get(name)
            .ok_or_else(|| LabError::MissingBinding(name.clone()))?;
        ctx.check(*e)?;
    }
    let prog = Program::compile(ctx, phi, &free, env)?;
    let budget = Budget::new(opts.budget, 1);
    let mut machine = Machine::new(ctx, &prog, &budget);
    for (slot, name) in free.iter().enumerate() {
        machine.assign(slot, env[name].index());
    }
    let value = machine.eval_root();
    machine.flush();
    if budget.exceeded() {
        return Err(budget.error("single evaluation".into()));
    }
    Ok(value)
}

/// Converts free variables named in `params` into parameters and resolves
/// every binding.
fn prepare(
    ctx: &FieldCtx,
    phi: &Formula,
    params: &ParamEnv,
) -> Result<(Formula, BTreeMap<String, GFElem>)> {
    let names: Vec<&str> = params.keys().map(|s| s.as_str()).collect();
    let phi = phi.bind_params(&names);
    validate(&phi, params)?;
    Ok((phi, resolve_params(ctx, params)?))
}

fn space_size(q: u64, n: usize) -> Option<u128> {
    (0..n).try_fold(1u128, |acc, _| acc.checked_mul(q as u128))
}

fn check_space(ctx: &FieldCtx, n: usize, budget: u64) -> Result<()> {
    match space_size(ctx.q(), n) {
        Some(s) if s <= budget as u128 => Ok(()),
        _ => Err(LabError::BudgetExceeded {
            budget,
            evaluated: 0,
            context: Some(format!(
                "assignment space {}^{} exceeds the budget before evaluation",
                ctx.q(),
                n
            )),
        }),
    }
}

/// Contiguous blocks of the outermost range, one per worker.
fn blocks(q: u64, workers: usize) -> Vec<(u64, u64)> {
    let w = (workers.max(1) as u64).min(q.max(1));
    (0..w)
        .map(|i| {
            let lo = (q as u128 * i as u128 / w as u128) as u64;
            let hi = (q as u128 * (i + 1) as u128 / w as u128) as u64;
            (lo, hi)
        })
        .collect()
}

/// Runs `work` over each block, in parallel when more than one block.
fn run_blocks<T: Send>(
    ranges: &[(u64, u64)],
    work: impl Fn(u64, u64) -> T + Sync,
) -> Vec<T> {
    if ranges.len() == 1 {
        return vec![work(ranges[0].0, ranges[0].1)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|&(lo, hi)| {
                let work = &work;
                s.spawn(move || work(lo, hi))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("count worker panicked"))
            .collect()
    })
}

/// Counts satisfying assignments of slots `from..to`, the earlier slots
/// already assigned.
fn count_slots(machine: &mut Machine<'_>, q: u64, from: usize, to: usize) -> u128 {
    if from == to {
        return machine.eval_root() as u128;
    }
    let mut total = 0u128;
    if from + 1 == to {
        for v in 0..q {
            machine.assign(from, v);
            total += machine.eval_root() as u128;
            if machine.stop {
                break;
            }
        }
        return total;
    }
    for v in 0..q {
        machine.assign(from, v);
        total += count_slots(machine, q, from + 1, to);
        if machine.stop {
            break;
        }
    }
    total
}

struct BlockResult<T> {
    value: T,
    covered: u64,
    stopped: bool,
}

fn budget_context(ranges: &[(u64, u64)], covered: &[u64], q: u64, what: &str) -> String {
    let done: u64 = covered.iter().sum();
    let parts: Vec<String> = ranges
        .iter()
        .zip(covered)
        .map(|(&(lo, _), &c)| format!("[{lo},{})", lo + c))
        .collect();
    format!(
        "{what}: completed {done} of {q} outermost values ({})",
        parts.join(" ")
    )
}

/// Exact number of assignments to the free variables of `phi` that satisfy
/// it. Free variables named in `params` are treated as parameters.
pub fn count(
    ctx: &FieldCtx,
    phi: &Formula,
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<CountReport> {
    let start = Instant::now();
    let (phi, resolved) = prepare(ctx, phi, params)?;
    let free = free_vars(&phi);
    let n = free.len();
    check_space(ctx, n, opts.budget)?;
    let prog = Program::compile(ctx, &phi, &free, &resolved)?;
    let q = ctx.q();
    let budget = Budget::new(opts.budget, opts.workers);

    let count = if n == 0 {
        let mut machine = Machine::new(ctx, &prog, &budget);
        let v = machine.eval_root();
        machine.flush();
        if budget.exceeded() {
            return Err(budget.error("closed formula".into()));
        }
        v as u128
    } else {
        let ranges = blocks(q, opts.workers);
        let results = run_blocks(&ranges, |lo, hi| {
            let mut machine = Machine::new(ctx, &prog, &budget);
            let mut value = 0u128;
            let mut covered = 0;
            for v in lo..hi {
                machine.assign(0, v);
                value += count_slots(&mut machine, q, 1, n);
                if machine.stop {
                    break;
                }
                covered += 1;
            }
            machine.flush();
            BlockResult {
                value,
                covered,
                stopped: machine.stop,
            }
        });
        if budget.exceeded() || results.iter().any(|r| r.stopped) {
            let covered: Vec<u64> = results.iter().map(|r| r.covered).collect();
            return Err(budget.error(budget_context(&ranges, &covered, q, "count")));
        }
        results.iter().map(|r| r.value).sum()
    };

    let empty = count == 0;
    let normalized = if empty || q < 2 {
        0.0
    } else {
        (count as f64).ln() / (q as f64).ln()
    };
    Ok(CountReport {
        count,
        q,
        n_free: n,
        normalized,
        empty,
        field: FieldTriple::of(ctx),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Fiber statistics of `phi(x; y)`: for each assignment to `y_block`, the
/// number of satisfying assignments to `x_block`.
pub fn fiber_counts<S: AsRef<str>>(
    ctx: &FieldCtx,
    phi: &Formula,
    x_block: &[S],
    y_block: &[S],
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<FiberReport> {
    let (phi, resolved) = prepare(ctx, phi, params)?;
    let free = free_vars(&phi);
    let xs: Vec<String> = x_block.iter().map(|s| s.as_ref().to_string()).collect();
    let ys: Vec<String> = y_block.iter().map(|s| s.as_ref().to_string()).collect();
    let mut order = ys.clone();
    order.extend(xs.iter().cloned());
    for (i, v) in order.iter().enumerate() {
        if order[..i].contains(v) {
            return Err(LabError::BadVariableSplit(format!("`{v}` appears twice")));
        }
    }
    if let Some(v) = free.iter().find(|v| !order.contains(v)) {
        return Err(LabError::BadVariableSplit(format!(
            "free variable `{v}` is in neither block"
        )));
    }
    let (ny, n) = (ys.len(), order.len());
    check_space(ctx, n, opts.budget)?;
    let prog = Program::compile(ctx, &phi, &order, &resolved)?;
    let q = ctx.q();
    let budget = Budget::new(opts.budget, opts.workers);

    let report = if ny == 0 {
        let mut machine = Machine::new(ctx, &prog, &budget);
        let size = count_slots(&mut machine, q, 0, n);
        machine.flush();
        if machine.stop || budget.exceeded() {
            return Err(budget.error("fiber_counts: single fiber".into()));
        }
        let mut r = FiberReport::empty();
        r.add_fiber(size);
        r
    } else {
        fn walk(m: &mut Machine<'_>, q: u64, level: usize, ny: usize, n: usize, acc: &mut FiberReport) {
            if level == ny {
                let size = count_slots(m, q, ny, n);
                if !m.stop {
                    acc.add_fiber(size);
                }
                return;
            }
            for v in 0..q {
                m.assign(level, v);
                walk(m, q, level + 1, ny, n, acc);
                if m.stop {
                    return;
                }
            }
        }
        let ranges = blocks(q, opts.workers);
        let results = run_blocks(&ranges, |lo, hi| {
            let mut machine = Machine::new(ctx, &prog, &budget);
            let mut acc = FiberReport::empty();
            let mut covered = 0;
            for v in lo..hi {
                machine.assign(0, v);
                walk(&mut machine, q, 1, ny, n, &mut acc);
                if machine.stop {
                    break;
                }
                covered += 1;
            }
            machine.flush();
            BlockResult {
                value: acc,
                covered,
                stopped: machine.stop,
            }
        });
        if budget.exceeded() || results.iter().any(|r| r.stopped) {
            let covered: Vec<u64> = results.iter().map(|r| r.covered).collect();
            return Err(budget.error(budget_context(&ranges, &covered, q, "fiber_counts")));
        }
        let mut r = FiberReport::empty();
        for b in &results {
            r.merge(&b.value);
        }
        r
    };
    Ok(report.finish())
}

/// Elements satisfying a formula with exactly one free variable, in
/// canonical order.
pub fn solution_set(
    ctx: &FieldCtx,
    phi: &Formula,
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<Vec<GFElem>> {
    let (phi, resolved) = prepare(ctx, phi, params)?;
    let free = free_vars(&phi);
    if free.len() != 1 {
        return Err(LabError::BadArity {
            expected: 1,
            found: free.len(),
        });
    }
    check_space(ctx, 1, opts.budget)?;
    let prog = Program::compile(ctx, &phi, &free, &resolved)?;
    let budget = Budget::new(opts.budget, 1);
    let mut machine = Machine::new(ctx, &prog, &budget);
    let mut out = Vec::new();
    for v in 0..ctx.q() {
        machine.assign(0, v);
        if machine.eval_root() {
            out.push(ctx.elem(v)?);
        }
        if machine.stop {
            return Err(budget.error(format!("solution_set: completed {v} of {}", ctx.q())));
        }
    }
    machine.flush();
    if budget.exceeded() {
        return Err(budget.error("solution_set".into()));
    }
    Ok(out)
}
