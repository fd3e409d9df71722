//! Dimension estimates along growing fields, the quotient test for
//! definable subsets and the fiber sandwich check.

use serde::{Serialize, Serializer};

use crate::count::{count, fiber_counts, solution_set, CountOptions, FiberReport};
use crate::error::{LabError, Result};
use crate::field::{make_field, FieldCtx};
use crate::formula::{Formula, ParamEnv};

pub const DEFAULT_TOLERANCE: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FittedDim {
    Integer(u32),
    Divergent,
}

impl FittedDim {
    pub fn value(self) -> Option<u32> {
        match self {
            FittedDim::Integer(d) => Some(d),
            FittedDim::Divergent => None,
        }
    }
}

impl Serialize for FittedDim {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            FittedDim::Integer(d) => s.serialize_u32(*d),
            FittedDim::Divergent => s.serialize_str("divergent"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct KPoint {
    pub k: u32,
    pub count: u128,
    /// `log(count) / (k log p)`; zero for an empty set.
    pub delta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DimensionEstimate {
    pub p: u64,
    pub m: i64,
    pub schedule: Vec<u32>,
    pub n_free: usize,
    pub per_k: Vec<KPoint>,
    pub fitted_dim: FittedDim,
    pub residual: f64,
    /// Linear extrapolation of `k·δ(k)` in `1/k` through the last two
    /// points.
    pub extrapolated: Option<f64>,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct DimOptions {
    pub tolerance: f64,
    pub count: CountOptions,
}

impl Default for DimOptions {
    fn default() -> Self {
        DimOptions {
            tolerance: DEFAULT_TOLERANCE,
            count: CountOptions::default(),
        }
    }
}

pub(crate) fn check_schedule(schedule: &[u32]) -> Result<()> {
    if schedule.is_empty() {
        return Err(LabError::BadSchedule("schedule is empty".into()));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(LabError::BadSchedule(format!(
            "schedule {schedule:?} is not strictly increasing"
        )));
    }
    if schedule[0] == 0 {
        return Err(LabError::BadSchedule("degrees must be at least 1".into()));
    }
    Ok(())
}

/// Counts `phi` in `GF(p^k)` for every `k` in `schedule` and fits an integer
/// dimension to `δ(k) = log(count) / (k log p)`.
pub fn estimate_dimension(
    p: u64,
    schedule: &[u32],
    m: i64,
    phi: &Formula,
    params: &ParamEnv,
    opts: DimOptions,
) -> Result<DimensionEstimate> {
    check_schedule(schedule)?;
    if let Some((name, spec)) = params.iter().find(|(_, s)| !s.is_schedule_stable()) {
        return Err(LabError::BadParamSpec(format!(
            "`{name}={spec}` names a field-specific element and cannot follow a schedule"
        )));
    }
    let mut per_k = Vec::with_capacity(schedule.len());
    let mut n_free = 0;
    for &k in schedule {
        let ctx = make_field(p, k, m)?;
        let report = count(&ctx, phi, params, opts.count).map_err(|e| match e {
            LabError::BudgetExceeded {
                budget,
                evaluated,
                context,
            } => LabError::BudgetExceeded {
                budget,
                evaluated,
                context: Some(match context {
                    Some(c) => format!("at k={k}: {c}"),
                    None => format!("at k={k}"),
                }),
            },
            other => other,
        })?;
        n_free = report.n_free;
        let delta = if report.count == 0 {
            0.0
        } else {
            (report.count as f64).ln() / (k as f64 * (p as f64).ln())
        };
        per_k.push(KPoint {
            k,
            count: report.count,
            delta,
        });
    }
    let (fitted_dim, residual, extrapolated) = fit(&per_k, n_free, opts.tolerance);
    Ok(DimensionEstimate {
        p,
        m,
        schedule: schedule.to_vec(),
        n_free,
        per_k,
        fitted_dim,
        residual,
        extrapolated,
        tolerance: opts.tolerance,
    })
}

fn fit(points: &[KPoint], n_free: usize, tol: f64) -> (FittedDim, f64, Option<f64>) {
    let last = &points[points.len() - 1];
    let d = last.delta.round().clamp(0.0, n_free as f64);
    let residual = (last.delta - d).abs();
    if last.count == 0 {
        return (FittedDim::Divergent, residual, None);
    }
    let n = points.len();
    let settling = n < 3 || {
        let (a, b, c) = (points[n - 3].delta, points[n - 2].delta, last.delta);
        (c - b).abs() <= (b - a).abs() + 1e-12
    };
    let extrapolated = (n >= 2 && points[n - 2].count > 0).then(|| {
        let prev = &points[n - 2];
        let (k1, k2) = (prev.k as f64, last.k as f64);
        (k2 * last.delta - k1 * prev.delta) / (k2 - k1)
    });
    let close = residual < tol || extrapolated.is_some_and(|e| (e - d).abs() < tol);
    if close && settling {
        (FittedDim::Integer(d as u32), residual, extrapolated)
    } else {
        (FittedDim::Divergent, residual, extrapolated)
    }
}

fn mark(bits: &mut [u64], v: u64) -> bool {
    let (w, b) = ((v / 64) as usize, v % 64);
    let fresh = bits[w] >> b & 1 == 0;
    bits[w] |= 1 << b;
    fresh
}

#[derive(Clone, Debug, Serialize)]
pub struct ThetaReport {
    pub theta_holds: bool,
    pub card: u64,
    pub q: u64,
    /// Number of distinct quotients `(a - b) / (c - d)` found before the
    /// search stopped.
    pub quotients: u64,
}

/// Decides whether every field element is a quotient `(x1 - x2)/(x3 - x4)`
/// of elements of `psi(F)` and checks the cardinality dichotomy.
pub fn theta_test(
    ctx: &FieldCtx,
    psi: &Formula,
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<ThetaReport> {
    let set: Vec<u64> = solution_set(ctx, psi, params, opts)?
        .iter()
        .map(|e| e.index())
        .collect();
    let q = ctx.q();
    let words = q.div_ceil(64) as usize;
    let mut seen = vec![0u64; words];
    let mut diffs = Vec::new();
    let mut work: u64 = 0;
    let over = |work: u64| -> Result<()> {
        if work > opts.budget {
            Err(LabError::BudgetExceeded {
                budget: opts.budget,
                evaluated: work,
                context: Some("theta_test quotient search".into()),
            })
        } else {
            Ok(())
        }
    };
    for &a in &set {
        for &b in &set {
            let d = ctx.sub_idx(a, b);
            if mark(&mut seen, d) {
                diffs.push(d);
            }
        }
        work += set.len() as u64;
        over(work)?;
    }
    diffs.sort_unstable();
    let inverses: Vec<u64> = diffs.iter().filter_map(|&d| ctx.inv_idx(d)).collect();
    let mut quot = vec![0u64; words];
    let mut found = 0u64;
    'outer: for &inv in &inverses {
        for &d in &diffs {
            if mark(&mut quot, ctx.mul_idx(d, inv)) {
                found += 1;
                if found == q {
                    break 'outer;
                }
            }
        }
        work += diffs.len() as u64;
        over(work)?;
    }
    let theta_holds = found == q;
    let card = set.len() as u64;
    let c = card as u128;
    if theta_holds && c.pow(4) < q as u128 {
        return Err(LabError::InvariantViolated(format!(
            "quotients cover GF({q}) but |psi(F)|^4 = {} < q",
            c.pow(4)
        )));
    }
    if !theta_holds && c * c > q as u128 {
        return Err(LabError::InvariantViolated(format!(
            "quotients miss an element of GF({q}) but |psi(F)|^2 = {} > q",
            c * c
        )));
    }
    Ok(ThetaReport {
        theta_holds,
        card,
        q,
        quotients: found,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityReport {
    pub fibers: FiberReport,
    pub q: u64,
    /// `log(total) / log q`.
    pub total_dim: f64,
    /// `(log max_fiber + log image_count) / log q`.
    pub upper_dim: f64,
    /// `(log min_fiber + log image_count) / log q`.
    pub lower_dim: f64,
    pub sandwich_holds: bool,
}

/// Fiber statistics of `phi(x; y)` together with the sandwich
/// `min·image ≤ total ≤ max·image`.
pub fn check_subadditivity<S: AsRef<str>>(
    ctx: &FieldCtx,
    phi: &Formula,
    x_block: &[S],
    y_block: &[S],
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<SubadditivityReport> {
    let f = fiber_counts(ctx, phi, x_block, y_block, params, opts)?;
    let lo = f.min_fiber.checked_mul(f.image_count);
    let hi = f.max_fiber.checked_mul(f.image_count);
    let sandwich_holds = lo.is_some_and(|l| l <= f.total) && hi.is_some_and(|h| f.total <= h);
    if !sandwich_holds {
        return Err(LabError::InvariantViolated(format!("fiber sandwich fails: {f:?}")));
    }
    let lq = (ctx.q() as f64).ln();
    let ln = |v: u128| if v == 0 { 0.0 } else { (v as f64).ln() };
    Ok(SubadditivityReport {
        q: ctx.q(),
        total_dim: ln(f.total) / lq,
        upper_dim: (ln(f.max_fiber) + ln(f.image_count)) / lq,
        lower_dim: (ln(f.min_fiber) + ln(f.image_count)) / lq,
        sandwich_holds,
        fibers: f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{parse, ParamSpec};

    fn est(p: u64, sched: &[u32], src: &str) -> DimensionEstimate {
        estimate_dimension(p, sched, 1, &parse(src).unwrap(), &ParamEnv::new(), DimOptions::default())
            .unwrap()
    }

    #[test]
    fn spec_dimension_examples() {
        let e = est(3, &[4, 6, 8], "x = x");
        assert_eq!(e.fitted_dim, FittedDim::Integer(1));
        assert!(e.per_k.iter().all(|pt| (pt.delta - 1.0).abs() < 1e-12));

        let e = est(3, &[4, 6, 8], "s(x) = x");
        assert_eq!(e.per_k.iter().map(|p| p.count).collect::<Vec<_>>(), vec![3, 3, 3]);
        assert_eq!(e.fitted_dim, FittedDim::Integer(0));

        let e = est(5, &[1, 2, 3], "y = x * x");
        assert_eq!(e.per_k[0].count, 5);
        assert_eq!(e.fitted_dim, FittedDim::Integer(1));
    }

    #[test]
    #[ignore = "enumerates 5^14 pairs at k = 7; takes minutes"]
    fn graph_dimension_full_schedule() {
        let e = est(5, &[3, 5, 7], "y = x * x");
        assert_eq!(e.per_k[0].count, 125);
        assert_eq!(e.fitted_dim, FittedDim::Integer(1));
    }

    #[test]
    fn divergent_when_far_from_integer() {
        let pts = [
            KPoint { k: 2, count: 3, delta: 0.5 },
            KPoint { k: 4, count: 9, delta: 0.5 },
        ];
        assert_eq!(fit(&pts, 1, 0.1).0, FittedDim::Divergent);
        assert!(serde_json::to_string(&FittedDim::Divergent).unwrap().contains("divergent"));
    }

    #[test]
    fn bad_schedules_and_params() {
        let phi = parse("x = x").unwrap();
        for s in [&[][..], &[4, 4], &[6, 4]] {
            let e = estimate_dimension(3, s, 1, &phi, &ParamEnv::new(), DimOptions::default());
            assert!(matches!(e, Err(LabError::BadSchedule(_))));
        }
        let env = ParamEnv::from([("c".to_string(), ParamSpec::ElemIndex(2))]);
        let e = estimate_dimension(3, &[2, 3], 1, &parse("x = c").unwrap(), &env, DimOptions::default());
        assert!(matches!(e, Err(LabError::BadParamSpec(_))));
    }

    #[test]
    fn theta_examples() {
        let f27 = make_field(3, 3, 1).unwrap();
        let r = theta_test(&f27, &parse("x = x").unwrap(), &ParamEnv::new(), CountOptions::default()).unwrap();
        assert!(r.theta_holds);
        assert_eq!(r.card, 27);
        let r = theta_test(&f27, &parse("s(x) = x").unwrap(), &ParamEnv::new(), CountOptions::default()).unwrap();
        assert!(!r.theta_holds);
        assert_eq!((r.card, r.quotients), (3, 3));
        let env = ParamEnv::from([("c".to_string(), ParamSpec::IntConst(1))]);
        let r = theta_test(&f27, &parse("x = c").unwrap(), &env, CountOptions::default()).unwrap();
        assert!(!r.theta_holds);
        assert_eq!(r.card, 1);
    }

    #[test]
    fn subadditivity_examples() {
        let f7 = make_field(7, 1, 1).unwrap();
        let r = check_subadditivity(&f7, &parse("E z. z*z = x + y").unwrap(), &["x"], &["y"], &ParamEnv::new(), CountOptions::default())
            .unwrap();
        assert_eq!(r.fibers.total, 28);
        assert_eq!(r.fibers.max_fiber * r.fibers.image_count, 28);
        let f9 = make_field(3, 2, 1).unwrap();
        let r = check_subadditivity(&f9, &parse("y = x * x").unwrap(), &["x"], &["y"], &ParamEnv::new(), CountOptions::default())
            .unwrap();
        let f = &r.fibers;
        assert_eq!((f.min_fiber, f.max_fiber, f.image_count, f.total), (1, 2, 5, 9));
        let r = check_subadditivity(&f9, &parse("x = x & y = y").unwrap(), &["x"], &["y"], &ParamEnv::new(), CountOptions::default())
            .unwrap();
        assert_eq!(r.fibers.total, 81);
        assert!((r.total_dim - 2.0).abs() < 1e-12);
    }
}
