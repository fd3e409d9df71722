//! Coding arbitrary subsets of a small set by single field elements, and the
//! constructions built on top of it.

pub mod arith;
pub mod measure;
pub mod paley;
pub mod witness;

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};

pub use arith::{interpret_truncated_arithmetic, pair_inject, ArithOptions, ArithReport, PairInjection};
pub use measure::{acl_experiment, measure_experiment, AclReport, MeasureStats};
pub use paley::{paley_code, paley_count, PaleyReport};
pub use witness::{code_chain, tp2_witness, ChainWitness, Tp2Witness};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeKind {
    /// `a ∈ S_y` iff `y + a` is a square (zero included).
    Square,
    /// `a ∈ S_y` iff `y + a` is a cube (zero included).
    Cube,
    /// `a ∈ S_y` iff `y - a` is a nonzero square, for `y` outside the set.
    Paley,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchOrder {
    Canonical,
    Random { seed: u64 },
}

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    pub order: SearchOrder,
    /// Cap on the number of candidates tried; `None` means all of F.
    pub max_probes: Option<u64>,
    pub workers: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            order: SearchOrder::Canonical,
            max_probes: None,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CodingCertificate {
    pub code: GFElem,
    pub set_a: Vec<GFElem>,
    pub target: Vec<GFElem>,
    pub kind: CodeKind,
    pub verified: bool,
    /// Number of candidates examined, the returned one included.
    pub search_range: u64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CodeOutcome {
    Found(CodingCertificate),
    NotFound { search_range: u64 },
}

impl CodeOutcome {
    pub fn certificate(&self) -> Option<&CodingCertificate> {
        match self {
            CodeOutcome::Found(c) => Some(c),
            CodeOutcome::NotFound { .. } => None,
        }
    }

    pub fn into_certificate(self) -> Option<CodingCertificate> {
        match self {
            CodeOutcome::Found(c) => Some(c),
            CodeOutcome::NotFound { .. } => None,
        }
    }

    pub fn search_range(&self) -> u64 {
        match self {
            CodeOutcome::Found(c) => c.search_range,
            CodeOutcome::NotFound { search_range } => *search_range,
        }
    }
}

/// Whether `a` belongs to the set coded by `code`.
pub fn member(ctx: &FieldCtx, kind: CodeKind, code: u64, a: u64) -> bool {
    match kind {
        CodeKind::Square => ctx.is_square_idx(ctx.add_idx(code, a)),
        CodeKind::Cube => ctx.is_cube_idx(ctx.add_idx(code, a)),
        CodeKind::Paley => {
            let d = ctx.sub_idx(code, a);
            d != 0 && ctx.is_square_idx(d)
        }
    }
}

/// Whether `a` is strictly outside the set coded by `code`: for residue
/// codes `code + a` must be a nonzero non-residue.
pub fn excluded(ctx: &FieldCtx, kind: CodeKind, code: u64, a: u64) -> bool {
    match kind {
        CodeKind::Square | CodeKind::Cube => ctx.add_idx(code, a) != 0 && !member(ctx, kind, code, a),
        CodeKind::Paley => !member(ctx, kind, code, a),
    }
}

/// Elements of `set_a` that `code` puts in its set.
pub fn decode(ctx: &FieldCtx, kind: CodeKind, code: GFElem, set_a: &[GFElem]) -> Vec<GFElem> {
    set_a
        .iter()
        .copied()
        .filter(|a| member(ctx, kind, code.index(), a.index()))
        .collect()
}

fn pattern_matches(ctx: &FieldCtx, kind: CodeKind, code: u64, a: &[u64], in_e: &[bool]) -> bool {
    if kind == CodeKind::Paley && a.contains(&code) {
        return false;
    }
    a.iter().zip(in_e).all(|(&x, &inside)| {
        if inside {
            member(ctx, kind, code, x)
        } else {
            excluded(ctx, kind, code, x)
        }
    })
}

/// Re-derives the membership pattern of a certificate element by element.
pub fn verify_certificate(ctx: &FieldCtx, cert: &CodingCertificate) -> bool {
    let target: BTreeSet<u64> = cert.target.iter().map(|e| e.index()).collect();
    let a: BTreeSet<u64> = cert.set_a.iter().map(|e| e.index()).collect();
    if !target.is_subset(&a) || a.len() != cert.set_a.len() {
        return false;
    }
    if cert.kind == CodeKind::Paley && a.contains(&cert.code.index()) {
        return false;
    }
    cert.set_a.iter().all(|x| {
        if target.contains(&x.index()) {
            member(ctx, cert.kind, cert.code.index(), x.index())
        } else {
            excluded(ctx, cert.kind, cert.code.index(), x.index())
        }
    })
}

fn check_kind(ctx: &FieldCtx, kind: CodeKind) -> Result<()> {
    match kind {
        CodeKind::Square if ctx.p() == 2 => Err(LabError::CharTwo),
        CodeKind::Cube if (ctx.q() - 1) % 3 != 0 => Err(LabError::NoNonCubes(ctx.q() - 1)),
        CodeKind::Paley if ctx.q() % 4 != 1 => Err(LabError::BadCharacteristic(ctx.q())),
        _ => Ok(()),
    }
}

/// Validates `A` (distinct, in `ctx`) and `E ⊆ A`; returns the membership
/// mask of `E` over `A`.
pub(crate) fn target_mask(ctx: &FieldCtx, set_a: &[GFElem], target: &[GFElem]) -> Result<Vec<bool>> {
    let mut seen = BTreeSet::new();
    for a in set_a {
        ctx.check(*a)?;
        if !seen.insert(a.index()) {
            return Err(LabError::DuplicateElements);
        }
    }
    let mut wanted = BTreeSet::new();
    for e in target {
        ctx.check(*e)?;
        if !seen.contains(&e.index()) {
            return Err(LabError::NotSubset);
        }
        wanted.insert(e.index());
    }
    Ok(set_a.iter().map(|a| wanted.contains(&a.index())).collect())
}

const CHUNK: u64 = 1 << 12;

/// First code in canonical order within `[0, limit)`, scanning in rounds of
/// one chunk per worker; the smallest hit of a round wins.
fn scan_canonical(
    ctx: &FieldCtx,
    kind: CodeKind,
    a: &[u64],
    in_e: &[bool],
    limit: u64,
    workers: usize,
) -> Option<u64> {
    let scan = |lo: u64, hi: u64| (lo..hi).find(|&y| pattern_matches(ctx, kind, y, a, in_e));
    if workers <= 1 {
        return scan(0, limit);
    }
    let mut start = 0u64;
    while start < limit {
        let bounds: Vec<(u64, u64)> = (0..workers as u64)
            .map(|w| {
                let lo = (start + w * CHUNK).min(limit);
                (lo, (lo + CHUNK).min(limit))
            })
            .collect();
        let hits: Vec<Option<u64>> = std::thread::scope(|s| {
            let handles: Vec<_> = bounds
                .iter()
                .map(|&(lo, hi)| {
                    let scan = &scan;
                    s.spawn(move || scan(lo, hi))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("code search worker panicked"))
                .collect()
        });
        if let Some(y) = hits.into_iter().flatten().min() {
            return Some(y);
        }
        start = bounds.last().map(|b| b.1).unwrap_or(limit);
    }
    None
}

/// Searches for `y` whose coded set meets `set_a` exactly in `target`.
pub fn code_subset(
    ctx: &FieldCtx,
    kind: CodeKind,
    set_a: &[GFElem],
    target: &[GFElem],
    opts: SearchOptions,
) -> Result<CodeOutcome> {
    check_kind(ctx, kind)?;
    let in_e = target_mask(ctx, set_a, target)?;
    let a: Vec<u64> = set_a.iter().map(|e| e.index()).collect();
    let q = ctx.q();
    let limit = opts.max_probes.map_or(q, |m| m.min(q));
    let (hit, range) = match opts.order {
        SearchOrder::Canonical => {
            let hit = scan_canonical(ctx, kind, &a, &in_e, limit, opts.workers);
            (hit, hit.map_or(limit, |y| y + 1))
        }
        SearchOrder::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let limit = opts.max_probes.unwrap_or(q);
            let mut hit = None;
            let mut tried = 0;
            while tried < limit {
                tried += 1;
                let y = rng.gen_range(0..q);
                if pattern_matches(ctx, kind, y, &a, &in_e) {
                    hit = Some(y);
                    break;
                }
            }
            (hit, tried)
        }
    };
    Ok(match hit {
        None => CodeOutcome::NotFound { search_range: range },
        Some(y) => {
            let target: Vec<GFElem> = set_a
                .iter()
                .zip(&in_e)
                .filter(|(_, &inside)| inside)
                .map(|(e, _)| *e)
                .collect();
            let mut cert = CodingCertificate {
                code: ctx.elem(y)?,
                set_a: set_a.to_vec(),
                target,
                kind,
                verified: false,
                search_range: range,
            };
            cert.verified = verify_certificate(ctx, &cert);
            CodeOutcome::Found(cert)
        }
    })
}

pub fn code_subset_square(
    ctx: &FieldCtx,
    set_a: &[GFElem],
    target: &[GFElem],
    opts: SearchOptions,
) -> Result<CodeOutcome> {
    code_subset(ctx, CodeKind::Square, set_a, target, opts)
}

pub fn code_subset_cube(
    ctx: &FieldCtx,
    set_a: &[GFElem],
    target: &[GFElem],
    opts: SearchOptions,
) -> Result<CodeOutcome> {
    code_subset(ctx, CodeKind::Cube, set_a, target, opts)
}

/// Elements of `GF(q)` given by index, in order.
pub fn elems(ctx: &FieldCtx, idx: &[u64]) -> Result<Vec<GFElem>> {
    idx.iter().map(|&i| ctx.elem(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_field;

    fn all_subsets(a: &[GFElem]) -> Vec<Vec<GFElem>> {
        (0..1u32 << a.len())
            .map(|mask| {
                a.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, e)| *e)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn square_coding_small_examples() {
        let f29 = make_field(29, 1, 1).unwrap();
        let a = elems(&f29, &[0, 1, 2]).unwrap();
        let out = code_subset_square(&f29, &a, &[], SearchOptions::default()).unwrap();
        let cert = out.certificate().unwrap();
        assert!(cert.verified);
        // scan oracle: the least y with y, y+1, y+2 all non-squares mod 29
        let sq: Vec<bool> = (0..29u64).map(|v| (0..29u64).any(|z| z * z % 29 == v)).collect();
        let first = (0..29u64).find(|&y| (0..3).all(|d| !sq[((y + d) % 29) as usize])).unwrap();
        assert_eq!(cert.code.index(), first);
        assert_eq!(cert.search_range, first + 1);

        for q in [5u64, 7, 11, 13] {
            let ctx = make_field(q, 1, 1).unwrap();
            for a in 0..q {
                let s = elems(&ctx, &[a]).unwrap();
                let c = code_subset_square(&ctx, &s, &s, SearchOptions::default()).unwrap();
                assert!(c.certificate().unwrap().verified);
            }
        }
    }

    #[test]
    fn full_field_is_not_generically_codable() {
        let f5 = make_field(5, 1, 1).unwrap();
        let a = elems(&f5, &[0, 1, 2, 3, 4]).unwrap();
        let e = elems(&f5, &[0, 2]).unwrap();
        let out = code_subset_square(&f5, &a, &e, SearchOptions::default()).unwrap();
        assert!(matches!(out, CodeOutcome::NotFound { search_range: 5 }));
    }

    #[test]
    fn cube_coding() {
        let f4 = make_field(2, 2, 1).unwrap();
        let a = elems(&f4, &[0]).unwrap();
        let c = code_subset_cube(&f4, &a, &a, SearchOptions::default()).unwrap();
        let c = c.certificate().unwrap();
        assert!(c.verified);
        assert_eq!(c.code.index(), 0);
        // y = 1 is the first nonzero code and is also valid
        assert!(member(&f4, CodeKind::Cube, 1, 0));
        let f8 = make_field(2, 3, 1).unwrap();
        assert!(matches!(
            code_subset_cube(&f8, &a, &[], SearchOptions::default()),
            Err(LabError::NoNonCubes(7))
        ));
        let f1024 = make_field(2, 10, 1).unwrap();
        let a = elems(&f1024, &[3, 100, 517]).unwrap();
        for e in all_subsets(&a) {
            let c = code_subset_cube(&f1024, &a, &e, SearchOptions::default()).unwrap();
            assert!(c.certificate().unwrap().verified);
        }
    }

    #[test]
    fn preconditions() {
        let f7 = make_field(7, 1, 1).unwrap();
        let a = elems(&f7, &[1, 1]).unwrap();
        assert!(matches!(
            code_subset_square(&f7, &a, &[], SearchOptions::default()),
            Err(LabError::DuplicateElements)
        ));
        let a = elems(&f7, &[1, 2]).unwrap();
        let e = elems(&f7, &[3]).unwrap();
        assert!(matches!(
            code_subset_square(&f7, &a, &e, SearchOptions::default()),
            Err(LabError::NotSubset)
        ));
        let f8 = make_field(2, 3, 1).unwrap();
        assert!(matches!(
            code_subset_square(&f8, &[], &[], SearchOptions::default()),
            Err(LabError::CharTwo)
        ));
    }

    #[test]
    fn parallel_and_random_search_agree_on_validity() {
        let ctx = make_field(10007, 1, 1).unwrap();
        let a = elems(&ctx, &[5, 17, 900, 4000, 9999]).unwrap();
        for e in all_subsets(&a) {
            let seq = code_subset_square(&ctx, &a, &e, SearchOptions::default()).unwrap();
            let par = code_subset_square(
                &ctx,
                &a,
                &e,
                SearchOptions {
                    workers: 3,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(
                seq.certificate().unwrap().code,
                par.certificate().unwrap().code
            );
            let rnd = code_subset_square(
                &ctx,
                &a,
                &e,
                SearchOptions {
                    order: SearchOrder::Random { seed: 3 },
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rnd.certificate().unwrap().verified);
        }
    }

    #[test]
    fn tampered_certificates_fail_verification() {
        let ctx = make_field(101, 1, 1).unwrap();
        let a = elems(&ctx, &[1, 2, 3]).unwrap();
        let e = elems(&ctx, &[2]).unwrap();
        let mut c = code_subset_square(&ctx, &a, &e, SearchOptions::default())
            .unwrap()
            .into_certificate()
            .unwrap();
        assert!(verify_certificate(&ctx, &c));
        c.target = elems(&ctx, &[1]).unwrap();
        assert!(!verify_certificate(&ctx, &c));
    }
}
