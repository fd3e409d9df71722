//! Univariate difference polynomials, their Frobenius specializations,
//! root-count stability, the torus `x ↦ x^{-1}σ(x)` and the σ-degree probe.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::count::{count, CountOptions};
use crate::error::{LabError, Result};
use crate::field::{make_field, poly, FieldCtx};
use crate::formula::{parse_term, Formula, ParamEnv, Term};

/// A polynomial in `x, σx, σ²x, …` with integer coefficients, stored as
/// monomial exponent vectors (`e[j]` is the power of `σ^j x`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffPoly {
    terms: BTreeMap<Vec<u32>, i128>,
    source: Term,
}

type Monomials = BTreeMap<Vec<u32>, i128>;

fn normalize(mut m: Monomials) -> Monomials {
    m.retain(|_, c| *c != 0);
    m.into_iter()
        .map(|(mut e, c)| {
            while e.last() == Some(&0) {
                e.pop();
            }
            (e, c)
        })
        .fold(BTreeMap::new(), |mut acc, (e, c)| {
            *acc.entry(e).or_insert(0) += c;
            acc
        })
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .collect()
}

fn overflow() -> LabError {
    LabError::BadPolynomial("integer coefficient overflow".into())
}

fn add_polys(a: &Monomials, b: &Monomials, sign: i128) -> Result<Monomials> {
    let mut out = a.clone();
    for (e, c) in b {
        let slot = out.entry(e.clone()).or_insert(0);
        *slot = c
            .checked_mul(sign)
            .and_then(|v| slot.checked_add(v))
            .ok_or_else(overflow)?;
    }
    Ok(normalize(out))
}

fn mul_polys(a: &Monomials, b: &Monomials) -> Result<Monomials> {
    let mut out: Monomials = BTreeMap::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let len = ea.len().max(eb.len());
            let e: Vec<u32> = (0..len)
                .map(|i| ea.get(i).unwrap_or(&0) + eb.get(i).unwrap_or(&0))
                .collect();
            let c = ca.checked_mul(*cb).ok_or_else(overflow)?;
            let slot = out.entry(e).or_insert(0);
            *slot = slot.checked_add(c).ok_or_else(overflow)?;
        }
    }
    Ok(normalize(out))
}

fn shift(a: &Monomials, j: u32) -> Monomials {
    a.iter()
        .map(|(e, c)| {
            if e.is_empty() {
                (Vec::new(), *c)
            } else {
                let mut s = vec![0; j as usize];
                s.extend(e);
                (s, *c)
            }
        })
        .collect()
}

fn lower(t: &Term) -> Result<Monomials> {
    Ok(match t {
        Term::Var(v) if v == "x" => BTreeMap::from([(vec![1], 1)]),
        Term::Var(v) => {
            return Err(LabError::BadPolynomial(format!(
                "only the variable x may occur, found `{v}`"
            )))
        }
        Term::Param(v) => {
            return Err(LabError::BadPolynomial(format!(
                "coefficients must be integers, found parameter `${v}`"
            )))
        }
        Term::FrobLit(..) => {
            return Err(LabError::BadPolynomial("frob(..) is not a difference operator".into()))
        }
        Term::IntLit(n) => normalize(BTreeMap::from([(Vec::new(), *n as i128)])),
        Term::Add(a, b) => add_polys(&lower(a)?, &lower(b)?, 1)?,
        Term::Sub(a, b) => add_polys(&lower(a)?, &lower(b)?, -1)?,
        Term::Mul(a, b) => mul_polys(&lower(a)?, &lower(b)?)?,
        Term::Neg(a) => add_polys(&BTreeMap::new(), &lower(a)?, -1)?,
        Term::Sigma(j, a) => shift(&lower(a)?, *j),
    })
}

impl DiffPoly {
    pub fn from_term(t: &Term) -> Result<DiffPoly> {
        let terms = lower(t)?;
        if terms.is_empty() {
            return Err(LabError::BadPolynomial("the polynomial is zero".into()));
        }
        Ok(DiffPoly {
            terms,
            source: t.clone(),
        })
    }

    /// Parses term syntax such as `s(x) - x^2`.
    pub fn parse(text: &str) -> Result<DiffPoly> {
        DiffPoly::from_term(&parse_term(text)?)
    }

    /// Highest σ-power that occurs.
    pub fn order(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.len().saturating_sub(1) as u32)
            .max()
            .unwrap_or(0)
    }

    /// Total degree in `x, σx, …`.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn monomials(&self) -> impl Iterator<Item = (&[u32], i128)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    /// The equation `f = 0` as a one-variable formula.
    pub fn equation(&self) -> Formula {
        Formula::eq(self.source.clone(), Term::IntLit(0))
    }
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.source)
    }
}

impl Serialize for DiffPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A sparse polynomial over `F_p`: exponent ↦ nonzero coefficient.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingPoly {
    pub p: u64,
    pub terms: BTreeMap<u128, u64>,
}

impl RingPoly {
    pub fn degree(&self) -> u128 {
        self.terms.keys().next_back().copied().unwrap_or(0)
    }

    /// Value at a field element.
    pub fn eval_idx(&self, ctx: &FieldCtx, a: u64) -> u64 {
        self.terms.iter().fold(0, |acc, (&e, &c)| {
            let term = ctx.mul_idx(c, ctx.pow_idx(a, e));
            ctx.add_idx(acc, term)
        })
    }

    /// Dense little-endian coefficients when the degree is at most `limit`.
    pub fn dense(&self, limit: u128) -> Option<Vec<u64>> {
        if self.degree() > limit {
            return None;
        }
        let mut v = vec![0; self.degree() as usize + 1];
        for (&e, &c) in &self.terms {
            v[e as usize] = c;
        }
        Some(v)
    }
}

impl fmt::Display for RingPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, (&e, &c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            match (c, e) {
                (c, 0) => write!(f, "{c}")?,
                (1, 1) => f.write_str("x")?,
                (1, e) => write!(f, "x^{e}")?,
                (c, 1) => write!(f, "{c}*x")?,
                (c, e) => write!(f, "{c}*x^{e}")?,
            }
        }
        Ok(())
    }
}

impl Serialize for RingPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Substitutes `σ^j x ↦ x^{p^{j·m}}` and reduces coefficients mod `p`.
pub fn sigma_specialize(f: &DiffPoly, p: u64, m: u32) -> Result<RingPoly> {
    if p < 2 || !num_prime::nt_funcs::is_prime64(p) {
        return Err(LabError::NotPrime(p));
    }
    let mut terms: BTreeMap<u128, u64> = BTreeMap::new();
    for (e, c) in f.monomials() {
        let mut exp: u128 = 0;
        for (j, &ej) in e.iter().enumerate() {
            if ej == 0 {
                continue;
            }
            let power = (j as u32)
                .checked_mul(m)
                .and_then(|jm| (p as u128).checked_pow(jm))
                .ok_or(LabError::DegreeOverflow)?;
            exp = power
                .checked_mul(ej as u128)
                .and_then(|v| exp.checked_add(v))
                .ok_or(LabError::DegreeOverflow)?;
        }
        let c = c.rem_euclid(p as i128) as u64;
        let slot = terms.entry(exp).or_insert(0);
        *slot = poly::add_mod(*slot, c, p);
    }
    terms.retain(|_, c| *c != 0);
    if terms.is_empty() {
        return Err(LabError::BadPolynomial(format!(
            "the specialization vanishes identically mod {p}"
        )));
    }
    Ok(RingPoly { p, terms })
}

const SCAN_LIMIT: u64 = 1 << 22;
const DENSE_LIMIT: u128 = 1 << 13;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RootMethod {
    Scan,
    Gcd,
}

#[derive(Clone, Debug, Serialize)]
pub struct RootCount {
    pub k: u32,
    pub q: u64,
    pub roots: u64,
    pub method: RootMethod,
    /// Solutions of `f = 0` from the counting engine, when cheap enough.
    pub engine_count: Option<u128>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityVerdict {
    Bounded,
    Growing,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub poly: DiffPoly,
    pub specialized: RingPoly,
    pub degree: u128,
    pub p: u64,
    pub m: u32,
    pub per_k: Vec<RootCount>,
    pub constant: bool,
    pub verdict: StabilityVerdict,
}

/// Number of distinct roots of `g` in `ctx`.
pub fn count_roots(ctx: &FieldCtx, g: &RingPoly, budget: u64) -> Result<(u64, RootMethod)> {
    let q = ctx.q();
    if q <= SCAN_LIMIT && q <= budget {
        let n = (0..q).filter(|&a| g.eval_idx(ctx, a) == 0).count() as u64;
        return Ok((n, RootMethod::Scan));
    }
    let dense = g.dense(DENSE_LIMIT).ok_or_else(|| LabError::BudgetExceeded {
        budget,
        evaluated: 0,
        context: Some(format!(
            "degree {} is too large for the gcd method and q = {q} too large to scan",
            g.degree()
        )),
    })?;
    if poly::degree(&dense) == Some(0) {
        return Ok((0, RootMethod::Gcd));
    }
    let p = ctx.p();
    let xq = poly::pow_rem(&[0, 1], q as u128, &dense, p);
    let h = poly::sub(&xq, &[0, 1], p);
    let d = poly::gcd(&dense, &h, p);
    Ok((poly::degree(&d).unwrap_or(0) as u64, RootMethod::Gcd))
}

/// Root counts of the specialization of `f` along `schedule`, cross-checked
/// against the counting engine where a scan is affordable.
pub fn root_count_stability(
    f: &DiffPoly,
    p: u64,
    m: u32,
    schedule: &[u32],
    opts: CountOptions,
) -> Result<StabilityReport> {
    crate::dimension::check_schedule(schedule)?;
    let g = sigma_specialize(f, p, m)?;
    let phi = f.equation();
    let mut per_k = Vec::with_capacity(schedule.len());
    for &k in schedule {
        let ctx = make_field(p, k, m as i64)?;
        let (roots, method) = count_roots(&ctx, &g, opts.budget)?;
        let engine_count = if ctx.q() <= SCAN_LIMIT {
            let c = count(&ctx, &phi, &ParamEnv::new(), opts)?.count;
            if c != roots as u128 {
                return Err(LabError::InvariantViolated(format!(
                    "{f}: {roots} roots of the specialization but {c} solutions in GF({p}^{k})"
                )));
            }
            Some(c)
        } else {
            None
        };
        per_k.push(RootCount {
            k,
            q: ctx.q(),
            roots,
            method,
            engine_count,
        });
    }
    let counts: Vec<u64> = per_k.iter().map(|r| r.roots).collect();
    let constant = counts.windows(2).all(|w| w[0] == w[1]);
    let last = *counts.last().unwrap();
    let earlier_max = counts[..counts.len() - 1].iter().copied().max();
    let growing = earlier_max.is_some_and(|e| last > e) || g.degree() < last as u128;
    Ok(StabilityReport {
        poly: f.clone(),
        degree: g.degree(),
        specialized: g,
        p,
        m,
        per_k,
        constant,
        verdict: if growing {
            StabilityVerdict::Growing
        } else {
            StabilityVerdict::Bounded
        },
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TorusReport {
    pub p: u64,
    pub k: u32,
    pub m: u64,
    pub q: u64,
    /// `|T|` for `T = {x^{-1}σ(x) : x ≠ 0}`.
    pub subgroup: u64,
    /// `|{x ≠ 0 : σ(x) = x}|`.
    pub kernel: u64,
    /// `(q − 1) / |T|`.
    pub index: u64,
    /// Exhaustive product and inverse closure, run when `q ≤ 2^14`.
    pub closure_exhaustive: Option<bool>,
    /// `T` equals the cyclic group generated by `g^{-1}σ(g)` for a generator `g`.
    pub cyclic_check: bool,
    /// `log|T| / log q`.
    pub normalized: f64,
}

pub const EXHAUSTIVE_TORUS_LIMIT: u64 = 1 << 14;

/// Image and kernel of `x ↦ x^{-1}σ(x)` on `F^×`.
pub fn torus_subgroup(ctx: &FieldCtx, budget: u64) -> Result<TorusReport> {
    let q = ctx.q();
    if q > budget {
        return Err(LabError::BudgetExceeded {
            budget,
            evaluated: 0,
            context: Some(format!("torus scan over {q} elements")),
        });
    }
    let mut in_t = vec![false; q as usize];
    let mut kernel = 0;
    for x in 1..q {
        let s = ctx.frob_idx(x);
        if s == x {
            kernel += 1;
        }
        let inv = ctx.inv_idx(x).expect("nonzero");
        in_t[ctx.mul_idx(inv, s) as usize] = true;
    }
    let members: Vec<u64> = (1..q).filter(|&t| in_t[t as usize]).collect();
    let subgroup = members.len() as u64;
    if subgroup * kernel != q - 1 {
        return Err(LabError::InvariantViolated(format!(
            "|T| = {subgroup} and kernel {kernel} do not multiply to q - 1 = {}",
            q - 1
        )));
    }
    let closure_exhaustive = (q <= EXHAUSTIVE_TORUS_LIMIT).then(|| {
        members.iter().all(|&a| {
            in_t[ctx.inv_idx(a).expect("nonzero") as usize]
                && members.iter().all(|&b| in_t[ctx.mul_idx(a, b) as usize])
        })
    });
    let g = ctx.find_generator().index();
    let h = ctx.mul_idx(ctx.inv_idx(g).expect("nonzero"), ctx.frob_idx(g));
    let mut cyclic = vec![false; q as usize];
    let mut cur = 1u64;
    loop {
        if cyclic[cur as usize] {
            break;
        }
        cyclic[cur as usize] = true;
        cur = ctx.mul_idx(cur, h);
    }
    let cyclic_check = cyclic == in_t;
    Ok(TorusReport {
        p: ctx.p(),
        k: ctx.k(),
        m: ctx.m(),
        q,
        subgroup,
        kernel,
        index: (q - 1) / subgroup,
        closure_exhaustive,
        cyclic_check,
        normalized: if q > 2 {
            (subgroup as f64).ln() / (q as f64).ln()
        } else {
            0.0
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeVerdict {
    FiniteSigmaDegreeConsistent,
    DimensionOneConsistent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbePoint {
    pub k: u32,
    pub count: u128,
    /// `log(count) / log q`, zero for an empty set.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub p: u64,
    pub m: u32,
    pub per_k: Vec<ProbePoint>,
    pub verdict: ProbeVerdict,
}

pub const PROBE_LOW: f64 = 0.2;
pub const PROBE_HIGH: f64 = 0.8;

/// Classifies a quantifier-free one-variable set by the trend of
/// `log(count) / log q` along the schedule.
pub fn sigma_degree_probe(
    phi: &Formula,
    p: u64,
    m: u32,
    schedule: &[u32],
    params: &ParamEnv,
    opts: CountOptions,
) -> Result<ProbeReport> {
    crate::dimension::check_schedule(schedule)?;
    let names: Vec<&str> = params.keys().map(|s| s.as_str()).collect();
    let bound = phi.bind_params(&names);
    if !bound.is_quantifier_free() {
        return Err(LabError::NotQuantifierFree);
    }
    let free = crate::formula::free_vars(&bound);
    if free.len() != 1 {
        return Err(LabError::BadArity {
            expected: 1,
            found: free.len(),
        });
    }
    let mut per_k = Vec::with_capacity(schedule.len());
    for &k in schedule {
        let ctx = make_field(p, k, m as i64)?;
        let r = count(&ctx, &bound, params, opts)?;
        per_k.push(ProbePoint {
            k,
            count: r.count,
            ratio: r.normalized,
        });
    }
    let n = per_k.len();
    let last = per_k[n - 1].ratio;
    let prev = (n >= 2).then(|| per_k[n - 2].ratio);
    let eps = 1e-12;
    let verdict = if last < PROBE_LOW && prev.is_none_or(|v| last <= v + eps) {
        ProbeVerdict::FiniteSigmaDegreeConsistent
    } else if last > PROBE_HIGH && prev.is_none_or(|v| last + eps >= v) {
        ProbeVerdict::DimensionOneConsistent
    } else {
        ProbeVerdict::Inconclusive
    };
    Ok(ProbeReport { p, m, per_k, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse;

    fn spec(text: &str, p: u64, m: u32) -> RingPoly {
        sigma_specialize(&DiffPoly::parse(text).unwrap(), p, m).unwrap()
    }

    #[test]
    fn specialization_examples() {
        assert_eq!(spec("s(x) - x", 3, 1).to_string(), "x^3 + 2*x");
        assert_eq!(spec("s(x) - x^2", 5, 1).to_string(), "x^5 + 4*x^2");
        assert_eq!(spec("s^2(x) - x - 1", 2, 1).to_string(), "x^4 + x + 1");
        assert_eq!(spec("s(x * s(x))", 3, 2).degree(), 9 + 81);
        assert_eq!(DiffPoly::parse("s^2(x) * x + s(x)").unwrap().order(), 2);
        assert_eq!(DiffPoly::parse("x").unwrap().order(), 0);
    }

    #[test]
    fn bad_polynomials() {
        assert!(matches!(DiffPoly::parse("x - x"), Err(LabError::BadPolynomial(_))));
        assert!(matches!(DiffPoly::parse("x + y"), Err(LabError::BadPolynomial(_))));
        assert!(matches!(DiffPoly::parse("x + $c"), Err(LabError::BadPolynomial(_))));
        let f = DiffPoly::parse("3 * x").unwrap();
        assert!(matches!(sigma_specialize(&f, 3, 1), Err(LabError::BadPolynomial(_))));
        let big = DiffPoly::parse("s^50(x)").unwrap();
        assert!(matches!(sigma_specialize(&big, 7, 1), Err(LabError::DegreeOverflow)));
    }

    #[test]
    fn stability_examples() {
        let o = CountOptions::default();
        let r = root_count_stability(&DiffPoly::parse("s(x) - x").unwrap(), 3, 1, &[2, 4, 6], o).unwrap();
        assert_eq!(r.per_k.iter().map(|c| c.roots).collect::<Vec<_>>(), vec![3, 3, 3]);
        assert!(r.constant);
        assert_eq!(r.verdict, StabilityVerdict::Bounded);
        let r = root_count_stability(&DiffPoly::parse("s(x) - x^2").unwrap(), 5, 1, &[2, 4], o).unwrap();
        assert_eq!(r.per_k.iter().map(|c| c.roots).collect::<Vec<_>>(), vec![4, 4]);
        let r = root_count_stability(&DiffPoly::parse("x").unwrap(), 7, 1, &[1, 2, 3], o).unwrap();
        assert!(r.per_k.iter().all(|c| c.roots == 1 && c.engine_count == Some(1)));
    }

    #[test]
    fn gcd_and_scan_agree() {
        for (text, p, k) in [("s(x) - x^2", 5u64, 4u32), ("s^2(x) - x - 1", 2, 8), ("x * s(x) - 1", 3, 6), ("s(x)*s(x) - x + 2", 7, 3)] {
            let ctx = make_field(p, k, 1).unwrap();
            let g = spec(text, p, 1);
            let (a, ma) = count_roots(&ctx, &g, u64::MAX).unwrap();
            assert_eq!(ma, RootMethod::Scan);
            let dense = g.dense(DENSE_LIMIT).unwrap();
            let xq = poly::pow_rem(&[0, 1], ctx.q() as u128, &dense, p);
            let d = poly::gcd(&dense, &poly::sub(&xq, &[0, 1], p), p);
            assert_eq!(poly::degree(&d).unwrap_or(0) as u64, a, "{text}");
        }
        let big = make_field(3, 20, 1).unwrap();
        let (n, method) = count_roots(&big, &spec("s(x) - x", 3, 1), u64::MAX).unwrap();
        assert_eq!((n, method), (3, RootMethod::Gcd));
    }

    #[test]
    fn torus_examples() {
        let r = torus_subgroup(&make_field(5, 2, 1).unwrap(), u64::MAX).unwrap();
        assert_eq!((r.index, r.kernel, r.subgroup), (4, 4, 6));
        assert_eq!(r.closure_exhaustive, Some(true));
        assert!(r.cyclic_check);
        let r = torus_subgroup(&make_field(2, 3, 1).unwrap(), u64::MAX).unwrap();
        assert_eq!((r.index, r.subgroup), (1, 7));
        let r = torus_subgroup(&make_field(3, 1, 1).unwrap(), u64::MAX).unwrap();
        assert_eq!((r.index, r.subgroup), (2, 1));
        let r = torus_subgroup(&make_field(3, 4, 2).unwrap(), u64::MAX).unwrap();
        assert_eq!(r.kernel, 8);
        assert!(r.cyclic_check);
    }

    #[test]
    fn probe_examples() {
        let o = CountOptions::default();
        let p = |src: &str| sigma_degree_probe(&parse(src).unwrap(), 3, 1, &[4, 6, 8], &ParamEnv::new(), o).unwrap();
        assert_eq!(p("s(x) = x").verdict, ProbeVerdict::FiniteSigmaDegreeConsistent);
        assert_eq!(p("x = x").verdict, ProbeVerdict::DimensionOneConsistent);
        let r = p("!(s(x) = x)");
        assert_eq!(r.verdict, ProbeVerdict::DimensionOneConsistent);
        assert_eq!(r.per_k[0].count, 81 - 3);
        assert!(matches!(
            sigma_degree_probe(&parse("E y. y = x").unwrap(), 3, 1, &[2], &ParamEnv::new(), o),
            Err(LabError::NotQuantifierFree)
        ));
    }
}
