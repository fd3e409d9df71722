//! Counts of shifted-square patterns against an explicit curve point-count bound, and
//! the definable-closure experiment built on them.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::count::{count, CountOptions};
use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};
use crate::formula::{parse, ParamEnv, ParamSpec};

/// Square indicator for all of F when it fits comfortably in memory.
fn square_table(ctx: &FieldCtx) -> Option<Vec<bool>> {
    let q = ctx.q();
    if q > 1 << 26 {
        return None;
    }
    let mut t = vec![false; q as usize];
    for x in 0..q {
        t[ctx.mul_idx(x, x) as usize] = true;
    }
    Some(t)
}

/// `#{x : x + b₁ is a square, x + bᵢ a nonzero non-square for i ≥ 2}`.
fn pattern_count(ctx: &FieldCtx, table: Option<&[bool]>, b: &[u64]) -> u64 {
    let is_sq = |v: u64| match table {
        Some(t) => t[v as usize],
        None => ctx.is_square_idx(v),
    };
    (0..ctx.q())
        .filter(|&x| {
            is_sq(ctx.add_idx(x, b[0]))
                && b[1..].iter().all(|&bi| {
                    let v = ctx.add_idx(x, bi);
                    v != 0 && !is_sq(v)
                })
        })
        .count() as u64
}

/// `(ℓ−1)(ℓ−2)√q + 5ℓ^{13/3}`, the point-count error for a curve of degree
/// `ℓ` in the plane.
fn curve_error(ell: f64, q: f64) -> f64 {
    (ell - 1.0) * (ell - 2.0) * q.sqrt() + 5.0 * ell.powf(13.0 / 3.0)
}

#[derive(Clone, Debug, Serialize)]
pub struct MeasureStats {
    pub n: usize,
    pub q: u64,
    pub trials: usize,
    pub seed: u64,
    pub counts: Vec<u64>,
    /// `|count − q/2^n| / √q` per trial.
    pub deviations: Vec<f64>,
    pub max_dev: f64,
    /// `[(ℓ−1)(ℓ−2) + 5ℓ^{13/3}/√q] / 2^n` with `ℓ = 2^n`.
    pub theoretical_bound: f64,
    /// `q > 4ℓ²`.
    pub precondition_holds: bool,
    pub violations: usize,
}

/// Draws `trials` tuples of distinct elements and counts the pattern
/// "square at `b₁`, non-square at the rest" exactly for each.
pub fn measure_experiment(ctx: &FieldCtx, n: usize, trials: usize, seed: u64) -> Result<MeasureStats> {
    if ctx.p() == 2 {
        return Err(LabError::CharTwo);
    }
    let q = ctx.q();
    if n == 0 || (n as u64) > q || n > 40 {
        return Err(LabError::TuplesExhausted { n, q });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let table = square_table(ctx);
    let ell = (1u64 << n) as f64;
    let qf = q as f64;
    let mut counts = Vec::with_capacity(trials);
    let mut deviations = Vec::with_capacity(trials);
    let mut violations = 0;
    for _ in 0..trials {
        let b: Vec<u64> = sample(&mut rng, q as usize, n).into_iter().map(|i| i as u64).collect();
        let c = pattern_count(ctx, table.as_deref(), &b);
        let dev = (c as f64 - qf / ell).abs();
        if dev > curve_error(ell, qf) / ell {
            violations += 1;
        }
        counts.push(c);
        deviations.push(dev / qf.sqrt());
    }
    let precondition_holds = qf > 4.0 * ell * ell;
    Ok(MeasureStats {
        n,
        q,
        trials,
        seed,
        max_dev: deviations.iter().copied().fold(0.0, f64::max),
        theoretical_bound: curve_error(ell, qf) / qf.sqrt() / ell,
        precondition_holds,
        violations,
        counts,
        deviations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AclReport {
    pub p: u64,
    pub k: u32,
    pub m: u64,
    pub n: u32,
    pub q: u64,
    pub a_n: GFElem,
    pub fixed: Vec<GFElem>,
    pub formula: String,
    /// `|ξ(F, a_n)|` from the counting engine.
    pub count: u128,
    /// The same count from a direct residue scan.
    pub direct_count: u64,
    /// `q / 2^{p^n}`.
    pub expected: f64,
    pub deviation: f64,
    /// `ℓ = 2^{p^n}`.
    pub ell: f64,
    /// `[(ℓ−1)(ℓ−2)√q + 5ℓ^{13/3}] / ℓ`.
    pub bound: f64,
    pub precondition_holds: bool,
    pub within_bound: bool,
}

fn orbit_size(ctx: &FieldCtx, a: u64) -> u64 {
    let mut x = ctx.frob_idx(a);
    let mut j = 1;
    while x != a {
        x = ctx.frob_idx(x);
        j += 1;
    }
    j
}

/// Counts `ξ(x, a_n)`: `x + a_n` is a square and `x + y` is not for every
/// other `y` fixed by `σ^n`.
pub fn acl_experiment(ctx: &FieldCtx, n: u32, opts: CountOptions) -> Result<AclReport> {
    if ctx.p() == 2 {
        return Err(LabError::CharTwo);
    }
    if n == 0 {
        return Err(LabError::FixedFieldMismatch {
            n,
            actual: ctx.q(),
            expected: 1,
        });
    }
    let fixed = ctx.fixed_set(n as u64);
    let expected_size = (ctx.p() as u128).pow(n);
    if fixed.len() as u128 != expected_size {
        return Err(LabError::FixedFieldMismatch {
            n,
            actual: fixed.len() as u64,
            expected: expected_size.min(u64::MAX as u128) as u64,
        });
    }
    let a_n = *fixed
        .iter()
        .find(|e| orbit_size(ctx, e.index()) == n as u64)
        .ok_or(LabError::FixedFieldMismatch {
            n,
            actual: fixed.len() as u64,
            expected: expected_size as u64,
        })?;
    let sigma = if n == 1 { "s".to_string() } else { format!("s^{n}") };
    let formula = format!(
        "(E z. z * z = a + x) & A y. ({sigma}(y) = y -> !(y = a) -> !(E w. w * w = y + x))"
    );
    let phi = parse(&formula)?;
    let params = ParamEnv::from([("a".to_string(), ParamSpec::ElemIndex(a_n.index()))]);
    let report = count(ctx, &phi, &params, opts)?;

    let table = square_table(ctx);
    let mut b = vec![a_n.index()];
    b.extend(fixed.iter().map(|e| e.index()).filter(|&y| y != a_n.index()));
    let direct_count = pattern_count(ctx, table.as_deref(), &b);
    if direct_count as u128 != report.count {
        return Err(LabError::InvariantViolated(format!(
            "xi count {} disagrees with the residue scan {direct_count}",
            report.count
        )));
    }

    let q = ctx.q() as f64;
    let ell = 2f64.powf(expected_size as f64);
    let expected = q / ell;
    let deviation = (report.count as f64 - expected).abs();
    let bound = curve_error(ell, q) / ell;
    Ok(AclReport {
        p: ctx.p(),
        k: ctx.k(),
        m: ctx.m(),
        n,
        q: ctx.q(),
        a_n,
        fixed,
        formula,
        count: report.count,
        direct_count,
        expected,
        deviation,
        ell,
        bound,
        precondition_holds: q > 4.0 * ell * ell,
        within_bound: deviation <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    #[test]
    fn single_shift_counts() {
        let f7 = make_field(7, 1, 1).unwrap();
        assert_eq!(pattern_count(&f7, None, &[0]), 4);
        for q in [7u64, 11, 101, 1009] {
            let ctx = make_field(q, 1, 1).unwrap();
            let s = measure_experiment(&ctx, 1, 20, 5).unwrap();
            assert!(s.counts.iter().all(|&c| c == (q + 1) / 2));
        }
    }

    #[test]
    fn table_and_euler_paths_agree() {
        let ctx = make_field(1009, 1, 1).unwrap();
        let t = square_table(&ctx).unwrap();
        for b in [[1u64, 2, 3], [0, 500, 1008], [7, 8, 900]] {
            assert_eq!(pattern_count(&ctx, Some(&t), &b), pattern_count(&ctx, None, &b));
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let ctx = make_field(1009, 1, 1).unwrap();
        let a = measure_experiment(&ctx, 3, 10, 42).unwrap();
        let b = measure_experiment(&ctx, 3, 10, 42).unwrap();
        assert_eq!(a.counts, b.counts);
        assert_eq!(a.violations, 0);
        assert!(a.precondition_holds);
    }

    #[test]
    fn tuple_errors() {
        let f3 = make_field(3, 1, 1).unwrap();
        assert!(matches!(
            measure_experiment(&f3, 4, 1, 0),
            Err(LabError::TuplesExhausted { n: 4, q: 3 })
        ));
        let f4 = make_field(2, 2, 1).unwrap();
        assert!(matches!(measure_experiment(&f4, 1, 1, 0), Err(LabError::CharTwo)));
    }

    #[test]
    fn acl_small_fields() {
        let ctx = make_field(3, 2, 1).unwrap();
        let r = acl_experiment(&ctx, 1, CountOptions::default()).unwrap();
        assert_eq!(r.fixed.len(), 3);
        assert!(!r.precondition_holds);
        let ctx = make_field(3, 4, 1).unwrap();
        let r = acl_experiment(&ctx, 2, CountOptions::default()).unwrap();
        assert_eq!(r.fixed.len(), 9);
        assert_eq!(orbit_size(&ctx, r.a_n.index()), 2);
        let ctx = make_field(3, 3, 1).unwrap();
        assert!(matches!(
            acl_experiment(&ctx, 2, CountOptions::default()),
            Err(LabError::FixedFieldMismatch { n: 2, actual: 3, expected: 9 })
        ));
    }
}
