//! Explicit finite witnesses of TP2 and of the strict order property, built
//! from codes of subsets of the fixed field.

use std::collections::BTreeSet;

use serde::Serialize;

use super::{code_subset, decode, CodeKind, CodingCertificate, SearchOptions};
use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};

#[derive(Clone, Debug, Serialize)]
pub struct Tp2Witness {
    pub n: usize,
    /// `A_n`, the first `n^n` elements of `Fix(σ)`; element `t` stands for
    /// the function whose value at `i` is digit `i` of `t` in base `n`.
    pub ambient: Vec<GFElem>,
    /// `cells[i][j]` codes `B_ij = {a : η(a)(i) = j}`.
    pub cells: Vec<Vec<CodingCertificate>>,
    /// Row `i` decodes to a partition of `A_n`.
    pub rows_ok: Vec<bool>,
    pub paths_checked: u64,
    pub paths_ok: bool,
    pub verified: bool,
}

fn digit(t: usize, i: usize, n: usize) -> usize {
    t / n.pow(i as u32) % n
}

fn code_or_fail(
    ctx: &FieldCtx,
    ambient: &[GFElem],
    target: &[GFElem],
    opts: SearchOptions,
    label: String,
) -> Result<CodingCertificate> {
    code_subset(ctx, CodeKind::Square, ambient, target, opts)?
        .into_certificate()
        .filter(|c| c.verified)
        .ok_or(LabError::CodingFailed(label))
}

/// Codes the `n × n` grid `B_ij` and checks, on decoded sets only, that each
/// row is a partition and that every path `f` has a common element.
pub fn tp2_witness(ctx: &FieldCtx, n: usize, opts: SearchOptions) -> Result<Tp2Witness> {
    if n == 0 {
        return Err(LabError::BadArity {
            expected: 1,
            found: 0,
        });
    }
    let size = (n as u64).checked_pow(n as u32).unwrap_or(u64::MAX);
    let fixed = ctx.fixed_set(1);
    if (fixed.len() as u64) < size {
        return Err(LabError::FixedFieldTooSmall {
            needed: size,
            available: fixed.len() as u64,
        });
    }
    let ambient: Vec<GFElem> = fixed[..size as usize].to_vec();
    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let target: Vec<GFElem> = (0..ambient.len())
                .filter(|&t| digit(t, i, n) == j)
                .map(|t| ambient[t])
                .collect();
            row.push(code_or_fail(ctx, &ambient, &target, opts, format!("({},{})", i + 1, j + 1))?);
        }
        cells.push(row);
    }

    // decoded membership, independent of the search
    let member: Vec<Vec<BTreeSet<u64>>> = cells
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| decode(ctx, CodeKind::Square, c.code, &ambient).iter().map(|e| e.index()).collect())
                .collect()
        })
        .collect();
    let all: BTreeSet<u64> = ambient.iter().map(|e| e.index()).collect();
    let rows_ok: Vec<bool> = member
        .iter()
        .map(|row| {
            let total: usize = row.iter().map(|s| s.len()).sum();
            let union: BTreeSet<u64> = row.iter().flatten().copied().collect();
            total == all.len() && union == all
        })
        .collect();
    let mut paths_ok = true;
    for f in 0..size as usize {
        let mut common = member[0][digit(f, 0, n)].clone();
        for (i, row) in member.iter().enumerate().skip(1) {
            common = common.intersection(&row[digit(f, i, n)]).copied().collect();
        }
        if common.is_empty() {
            paths_ok = false;
            break;
        }
    }
    let verified = paths_ok && rows_ok.iter().all(|&r| r);
    Ok(Tp2Witness {
        n,
        ambient,
        cells,
        rows_ok,
        paths_checked: size,
        paths_ok,
        verified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainWitness {
    pub length: usize,
    pub ambient: Vec<GFElem>,
    pub codes: Vec<CodingCertificate>,
    /// Decoded sizes of `A_1, …, A_ℓ`.
    pub decoded_sizes: Vec<usize>,
    pub strictly_increasing: bool,
    pub verified: bool,
}

/// Codes `A_1 ⊊ … ⊊ A_ℓ`, `A_i` the first `i` fixed elements, inside
/// `A_ℓ`, and checks strict inclusion of the decoded sets.
pub fn code_chain(ctx: &FieldCtx, length: usize, opts: SearchOptions) -> Result<ChainWitness> {
    let fixed = ctx.fixed_set(1);
    if fixed.len() < length {
        return Err(LabError::FixedFieldTooSmall {
            needed: length as u64,
            available: fixed.len() as u64,
        });
    }
    let ambient: Vec<GFElem> = fixed[..length].to_vec();
    let codes = (1..=length)
        .map(|i| code_or_fail(ctx, &ambient, &ambient[..i], opts, format!("A_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let decoded: Vec<BTreeSet<u64>> = codes
        .iter()
        .map(|c| decode(ctx, CodeKind::Square, c.code, &ambient).iter().map(|e| e.index()).collect())
        .collect();
    let strictly_increasing = decoded
        .windows(2)
        .all(|w| w[0].is_subset(&w[1]) && w[0].len() < w[1].len())
        && decoded.first().is_none_or(|s| !s.is_empty());
    let verified = strictly_increasing && codes.iter().all(|c| c.verified);
    Ok(ChainWitness {
        length,
        ambient,
        decoded_sizes: decoded.iter().map(|s| s.len()).collect(),
        codes,
        strictly_increasing,
        verified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    #[test]
    fn tp2_small() {
        let ctx = make_field(7, 4, 1).unwrap();
        let w = tp2_witness(&ctx, 2, SearchOptions::default()).unwrap();
        assert!(w.verified);
        assert_eq!(w.paths_checked, 4);
        assert_eq!(w.rows_ok, vec![true, true]);
        let w = tp2_witness(&ctx, 1, SearchOptions::default()).unwrap();
        assert!(w.verified);
        assert_eq!(w.cells.len(), 1);
    }

    #[test]
    fn tp2_needs_room() {
        let ctx = make_field(3, 4, 1).unwrap();
        assert!(matches!(
            tp2_witness(&ctx, 2, SearchOptions::default()),
            Err(LabError::FixedFieldTooSmall { needed: 4, available: 3 })
        ));
    }

    #[test]
    fn chains() {
        let ctx = make_field(7, 6, 1).unwrap();
        let c = code_chain(&ctx, 3, SearchOptions::default()).unwrap();
        assert!(c.verified);
        assert_eq!(c.decoded_sizes, vec![1, 2, 3]);
        let c = code_chain(&ctx, 1, SearchOptions::default()).unwrap();
        assert_eq!(c.decoded_sizes, vec![1]);
        assert!(matches!(
            code_chain(&ctx, 8, SearchOptions::default()),
            Err(LabError::FixedFieldTooSmall { needed: 8, available: 7 })
        ));
    }

    #[test]
    #[ignore = "codes 27-element patterns in a field near 2^31; takes minutes"]
    fn tp2_three() {
        let ctx = make_field(2147483647, 1, 1).unwrap();
        let w = tp2_witness(&ctx, 3, SearchOptions::default()).unwrap();
        assert!(w.verified);
        assert_eq!(w.paths_checked, 27);
    }
}
