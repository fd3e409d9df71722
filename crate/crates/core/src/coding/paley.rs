//! Common-neighbourhood counts in the Paley graph and the matching
//! deviation bound.

use serde::Serialize;

use super::{code_subset, target_mask, CodeKind, CodeOutcome, SearchOptions};
use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};

#[derive(Clone, Debug, Serialize)]
pub struct PaleyReport {
    pub q: u64,
    pub m: usize,
    /// `|V(E, A∖E)|`.
    pub v_count: u64,
    /// `q / 2^m`.
    pub expected: f64,
    pub deviation: f64,
    /// `½(m − 2 + 2^{1−m})√q + m/2`.
    pub bound: f64,
    /// `None` for `m = 0`, where no bound is asserted.
    pub bound_ok: Option<bool>,
}

fn adjacent(ctx: &FieldCtx, x: u64, y: u64) -> bool {
    let d = ctx.sub_idx(x, y);
    d != 0 && ctx.is_square_idx(d)
}

/// Exact form of `|V − q/2^m| ≤ ½(m−2+2^{1−m})√q + m/2`, scaled by `2^m`.
fn bound_holds(v: u64, q: u64, m: usize) -> bool {
    let scale = 1i128 << m;
    let d = (scale * v as i128 - q as i128).abs();
    let half = 1i128 << (m - 1);
    let lin = m as i128 * half;
    let coef = (m as i128 - 2) * half + 1;
    d <= lin || (d - lin).pow(2) <= coef * coef * q as i128
}

/// Counts `V(E, A∖E) = {v ∉ A : v ~ e for e ∈ E, v ≁ d for d ∈ A∖E}`.
pub fn paley_count(ctx: &FieldCtx, set_a: &[GFElem], target: &[GFElem]) -> Result<PaleyReport> {
    let q = ctx.q();
    if q % 4 != 1 {
        return Err(LabError::BadCharacteristic(q));
    }
    let in_e = target_mask(ctx, set_a, target)?;
    let a: Vec<u64> = set_a.iter().map(|e| e.index()).collect();
    let m = a.len();
    if m > 60 {
        return Err(LabError::BadArity {
            expected: 60,
            found: m,
        });
    }
    let v_count = (0..q)
        .filter(|v| !a.contains(v))
        .filter(|&v| {
            a.iter()
                .zip(&in_e)
                .all(|(&x, &inside)| adjacent(ctx, v, x) == inside)
        })
        .count() as u64;
    let expected = q as f64 / (1u64 << m) as f64;
    let mf = m as f64;
    let bound = 0.5 * (mf - 2.0 + 2f64.powf(1.0 - mf)) * (q as f64).sqrt() + mf / 2.0;
    Ok(PaleyReport {
        q,
        m,
        v_count,
        expected,
        deviation: (v_count as f64 - expected).abs(),
        bound,
        bound_ok: (m > 0).then(|| bound_holds(v_count, q, m)),
    })
}

/// A vertex outside `A` adjacent to exactly the elements of `E`.
pub fn paley_code(
    ctx: &FieldCtx,
    set_a: &[GFElem],
    target: &[GFElem],
    opts: SearchOptions,
) -> Result<CodeOutcome> {
    code_subset(ctx, CodeKind::Paley, set_a, target, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coding::elems;
    use crate::field::make_field;

    #[test]
    fn spec_examples() {
        let f13 = make_field(13, 1, 1).unwrap();
        let a = elems(&f13, &[0, 1, 2]).unwrap();
        let r = paley_count(&f13, &a, &elems(&f13, &[1]).unwrap()).unwrap();
        // oracle: brute force over v with Legendre symbols by table
        let sq: Vec<bool> = (0..13u64).map(|v| v != 0 && (1..13u64).any(|z| z * z % 13 == v)).collect();
        let oracle = (3..13u64)
            .filter(|&v| sq[((v + 12) % 13) as usize] && !sq[v as usize] && !sq[(v - 2) as usize])
            .count() as u64;
        assert_eq!(r.v_count, oracle);
        assert!((r.bound - 3.753).abs() < 1e-3);
        assert_eq!(r.bound_ok, Some(true));

        let r = paley_count(&f13, &[], &[]).unwrap();
        assert_eq!((r.v_count, r.bound_ok), (13, None));
        assert_eq!(r.deviation, 0.0);

        let f17 = make_field(17, 1, 1).unwrap();
        let z = elems(&f17, &[0]).unwrap();
        let r = paley_count(&f17, &z, &z).unwrap();
        assert_eq!(r.v_count, 8);
        assert!((r.deviation - 0.5).abs() < 1e-12);
        assert_eq!(r.bound_ok, Some(true));

        let f7 = make_field(7, 1, 1).unwrap();
        assert!(matches!(paley_count(&f7, &[], &[]), Err(LabError::BadCharacteristic(7))));
    }

    #[test]
    fn exact_bound_agrees_with_float_bound() {
        for q in [13u64, 17, 29, 37, 41, 101, 1009] {
            for m in 1..=4usize {
                let mf = m as f64;
                let b = 0.5 * (mf - 2.0 + 2f64.powf(1.0 - mf)) * (q as f64).sqrt() + mf / 2.0;
                for v in 0..q {
                    let float_ok = (v as f64 - q as f64 / (1u64 << m) as f64).abs() <= b + 1e-9;
                    let exact = bound_holds(v, q, m);
                    if exact != float_ok {
                        // only disagreements within rounding distance are acceptable
                        let dev = (v as f64 - q as f64 / (1u64 << m) as f64).abs();
                        assert!((dev - b).abs() < 1e-6, "q={q} m={m} v={v}");
                    }
                }
            }
        }
    }

    #[test]
    fn paley_codes_verify() {
        let f101 = make_field(101, 1, 1).unwrap();
        let a = elems(&f101, &[3, 7, 50]).unwrap();
        let e = elems(&f101, &[7]).unwrap();
        let c = paley_code(&f101, &a, &e, SearchOptions::default()).unwrap();
        let c = c.certificate().unwrap();
        assert!(c.verified);
        assert!(!a.contains(&c.code));
    }
}
