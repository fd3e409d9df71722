//! Pair injections `(u, v) ↦ u + a·v` and the interpretation of truncated
//! arithmetic on `{0, …, |Y|}` through coded subsets of `Y`, `Y²` and `Y³`.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::{code_subset, member, CodeKind, CodeOutcome, SearchOptions};
use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};

#[derive(Clone, Debug, Serialize)]
pub struct PairInjection {
    /// Least nonzero element outside the quotient set `W`.
    pub a: GFElem,
    /// `u_i + a·v_j` in row-major order over `(i, j)`.
    pub t: Vec<GFElem>,
    pub quotient_set_size: usize,
}

fn distinct(ctx: &FieldCtx, xs: &[GFElem]) -> Result<Vec<u64>> {
    let mut seen = BTreeSet::new();
    for x in xs {
        ctx.check(*x)?;
        if !seen.insert(x.index()) {
            return Err(LabError::DuplicateElements);
        }
    }
    Ok(xs.iter().map(|x| x.index()).collect())
}

/// `a ∉ {(u₁−u₂)/(v₁−v₂)} ∪ {0}` so that `(u, v) ↦ u + a·v` is injective on
/// `U × V`.
pub fn pair_inject_between(ctx: &FieldCtx, u: &[GFElem], v: &[GFElem]) -> Result<PairInjection> {
    let ui = distinct(ctx, u)?;
    let vi = distinct(ctx, v)?;
    let mut w: HashSet<u64> = HashSet::new();
    for &v1 in &vi {
        for &v2 in &vi {
            let Some(inv) = ctx.inv_idx(ctx.sub_idx(v1, v2)) else {
                continue;
            };
            for &u1 in &ui {
                for &u2 in &ui {
                    w.insert(ctx.mul_idx(ctx.sub_idx(u1, u2), inv));
                }
            }
        }
    }
    let a = (1..ctx.q()).find(|x| !w.contains(x)).ok_or(LabError::NoInjector)?;
    let t: Vec<u64> = ui
        .iter()
        .flat_map(|&x| vi.iter().map(move |&y| (x, y)))
        .map(|(x, y)| ctx.add_idx(x, ctx.mul_idx(a, y)))
        .collect();
    if t.iter().collect::<BTreeSet<_>>().len() != t.len() {
        return Err(LabError::InvariantViolated(format!(
            "u + {a}·v is not injective although {a} avoids the quotient set"
        )));
    }
    Ok(PairInjection {
        a: ctx.elem(a)?,
        t: t.into_iter().map(|x| ctx.elem(x)).collect::<Result<_>>()?,
        quotient_set_size: w.len(),
    })
}

/// [`pair_inject_between`] with `U = V = Y`.
pub fn pair_inject(ctx: &FieldCtx, y: &[GFElem]) -> Result<PairInjection> {
    pair_inject_between(ctx, y, y)
}

pub const MAX_ARITH_SET: usize = 4;

#[derive(Clone, Copy, Debug)]
pub struct ArithOptions {
    /// Total number of code candidates that may be examined.
    pub budget: u64,
    pub search: SearchOptions,
}

impl Default for ArithOptions {
    fn default() -> Self {
        ArithOptions {
            budget: 100_000_000,
            search: SearchOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RelationTally {
    pub instances: u64,
    /// Instances where truncated arithmetic says the relation holds.
    pub positive: u64,
    /// Positive instances with a coded, decoded and checked witness graph.
    pub witnessed: u64,
    /// Negative instances: no graph of the required kind exists because
    /// the cardinalities do not allow one.
    pub refuted_by_cardinality: u64,
    /// Instances where the relation and the arithmetic disagree.
    pub mismatches: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentativeCode {
    pub cardinality: usize,
    pub members: Vec<GFElem>,
    pub code: GFElem,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArithReport {
    pub y: Vec<GFElem>,
    pub classes: usize,
    pub pair_injector: Option<GFElem>,
    pub triple_injector: Option<GFElem>,
    pub representatives: Vec<RepresentativeCode>,
    pub equivalence: RelationTally,
    pub addition: RelationTally,
    pub multiplication: RelationTally,
    pub probes: u64,
    pub isomorphic: bool,
}

struct Coder<'a> {
    ctx: &'a FieldCtx,
    opts: ArithOptions,
    used: u64,
}

impl Coder<'_> {
    fn code(&mut self, ambient: &[GFElem], target: &[GFElem], label: &str) -> Result<u64> {
        let remaining = self.opts.budget.saturating_sub(self.used);
        let cap = self.opts.search.max_probes.map_or(remaining, |m| m.min(remaining));
        let opts = SearchOptions {
            max_probes: Some(cap),
            ..self.opts.search
        };
        let out = code_subset(self.ctx, CodeKind::Square, ambient, target, opts)?;
        self.used += out.search_range();
        match out {
            CodeOutcome::Found(c) if c.verified => Ok(c.code.index()),
            CodeOutcome::Found(_) => Err(LabError::InvariantViolated(format!(
                "certificate for {label} does not re-verify"
            ))),
            CodeOutcome::NotFound { search_range } if search_range < self.ctx.q() => {
                Err(LabError::BudgetExceeded {
                    budget: self.opts.budget,
                    evaluated: self.used,
                    context: Some(format!("no witness code found for {label}")),
                })
            }
            CodeOutcome::NotFound { .. } => Err(LabError::CodingFailed(label.to_string())),
        }
    }
}

/// Whether `graph` (domain key ↦ target) is a function defined on all of
/// `domain` with image exactly `codomain`, injective when `bijective`.
fn is_graph<K: Ord + Copy>(
    graph: &[(K, usize)],
    domain: &BTreeSet<K>,
    codomain: &BTreeSet<usize>,
    bijective: bool,
) -> bool {
    let mut f: BTreeMap<K, usize> = BTreeMap::new();
    for &(k, v) in graph {
        if !domain.contains(&k) || !codomain.contains(&v) || f.insert(k, v).is_some() {
            return false;
        }
    }
    let image: BTreeSet<usize> = f.values().copied().collect();
    f.len() == domain.len() && image == *codomain && (!bijective || image.len() == f.len())
}

/// Interprets `({0..|Y|}, truncated +, truncated ×)` by codes: subsets of
/// `Y` stand for their sizes, `E` relates sets in coded bijection, and the
/// arithmetic relations are witnessed by coded graphs in `Y³`.
pub fn interpret_truncated_arithmetic(
    ctx: &FieldCtx,
    y: &[GFElem],
    opts: ArithOptions,
) -> Result<ArithReport> {
    let n = y.len();
    if n > MAX_ARITH_SET {
        return Err(LabError::SetTooLarge {
            max: MAX_ARITH_SET,
            found: n,
        });
    }
    if ctx.p() == 2 {
        return Err(LabError::CharTwo);
    }
    distinct(ctx, y)?;
    if n == 0 {
        return Ok(ArithReport {
            y: Vec::new(),
            classes: 1,
            pair_injector: None,
            triple_injector: None,
            representatives: Vec::new(),
            equivalence: RelationTally::default(),
            addition: RelationTally::default(),
            multiplication: RelationTally::default(),
            probes: 0,
            isomorphic: true,
        });
    }
    let pair = pair_inject(ctx, y)?;
    let triple = pair_inject_between(ctx, &pair.t, y)?;
    let (t2, t3) = (&pair.t, &triple.t);
    let mut coder = Coder { ctx, opts, used: 0 };

    // representatives: the first and the last c elements of Y
    let mut reps: Vec<BTreeSet<usize>> = Vec::new();
    for c in 0..=n {
        for set in [(0..c).collect::<BTreeSet<_>>(), (n - c..n).collect()] {
            if !reps.contains(&set) {
                reps.push(set);
            }
        }
    }
    let mut representatives = Vec::new();
    for set in &reps {
        let members: Vec<GFElem> = set.iter().map(|&i| y[i]).collect();
        let code = coder.code(y, &members, &format!("S1 {set:?}"))?;
        let decoded: BTreeSet<usize> = (0..n).filter(|&i| member(ctx, CodeKind::Square, code, y[i].index())).collect();
        if decoded != *set {
            return Err(LabError::InvariantViolated(format!("S1 code for {set:?} decodes to {decoded:?}")));
        }
        representatives.push(RepresentativeCode {
            cardinality: set.len(),
            members,
            code: ctx.elem(code)?,
        });
    }
    let decode2 = |g: u64| -> Vec<((usize, usize), usize)> {
        (0..n * n)
            .filter(|&ij| member(ctx, CodeKind::Square, g, t2[ij].index()))
            .map(|ij| ((ij / n, 0), ij % n))
            .collect()
    };
    let decode3 = |g: u64| -> Vec<((usize, usize), usize)> {
        (0..n * n * n)
            .filter(|&ijl| member(ctx, CodeKind::Square, g, t3[ijl].index()))
            .map(|ijl| ((ijl / (n * n), ijl / n % n), ijl % n))
            .collect()
    };

    let mut equivalence = RelationTally::default();
    for a in &reps {
        for b in &reps {
            equivalence.instances += 1;
            if a.len() != b.len() {
                equivalence.refuted_by_cardinality += 1;
                continue;
            }
            equivalence.positive += 1;
            let graph: Vec<GFElem> = a.iter().zip(b).map(|(&i, &j)| t2[i * n + j]).collect();
            let g = coder.code(t2, &graph, &format!("E({a:?},{b:?})"))?;
            let domain: BTreeSet<(usize, usize)> = a.iter().map(|&i| (i, 0)).collect();
            if is_graph(&decode2(g), &domain, b, true) {
                equivalence.witnessed += 1;
            } else {
                equivalence.mismatches += 1;
            }
        }
    }

    let full: BTreeSet<usize> = (0..n).collect();
    let tag2 = if n >= 2 { 1 } else { 0 };
    let mut addition = RelationTally::default();
    let mut multiplication = RelationTally::default();
    for a in &reps {
        for b in &reps {
            let sum_dom: BTreeSet<(usize, usize)> =
                a.iter().map(|&u| (u, 0)).chain(b.iter().map(|&u| (u, tag2))).collect();
            let prod_dom: BTreeSet<(usize, usize)> =
                a.iter().flat_map(|&u| b.iter().map(move |&v| (u, v))).collect();
            for c in &reps {
                for (tally, domain, value) in [
                    (&mut addition, &sum_dom, (a.len() + b.len()).min(n)),
                    (&mut multiplication, &prod_dom, (a.len() * b.len()).min(n)),
                ] {
                    tally.instances += 1;
                    let arith = value == c.len();
                    let bijective = domain.len() == c.len();
                    let holds = bijective || (*c == full && domain.len() >= n);
                    if holds != arith {
                        tally.mismatches += 1;
                        continue;
                    }
                    if !holds {
                        tally.refuted_by_cardinality += 1;
                        continue;
                    }
                    tally.positive += 1;
                    let targets: Vec<usize> = c.iter().copied().collect();
                    let graph: Vec<GFElem> = domain
                        .iter()
                        .enumerate()
                        .map(|(t, &(u, v))| t3[(u * n + v) * n + targets[t.min(targets.len() - 1)]])
                        .collect();
                    let g = coder.code(t3, &graph, &format!("R({a:?},{b:?},{c:?})"))?;
                    if is_graph(&decode3(g), domain, c, bijective) {
                        tally.witnessed += 1;
                    } else {
                        tally.mismatches += 1;
                    }
                }
            }
        }
    }

    let isomorphic = [&equivalence, &addition, &multiplication]
        .iter()
        .all(|t| t.mismatches == 0 && t.witnessed == t.positive);
    Ok(ArithReport {
        y: y.to_vec(),
        classes: n + 1,
        pair_injector: Some(pair.a),
        triple_injector: Some(triple.a),
        representatives,
        equivalence,
        addition,
        multiplication,
        probes: coder.used,
        isomorphic,
    })
}
