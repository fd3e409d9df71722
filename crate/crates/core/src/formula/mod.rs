//! First-order formulas in the language of difference rings.
//!
//! `s(t)` is σ(t), `s^j(t)` is σ^j(t); quantifiers are `E x.` and `A x.`;
//! connectives are `!`, `&`, `|`, `->`. After [`specialize`], every σ^j is
//! replaced by the ring term `frob^e(t)` standing for `t^{p^e}`, where `p`
//! is the characteristic of whichever field the formula is evaluated in.

mod parse;
mod print;
pub mod random;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::field::{FieldCtx, GFElem};

pub use parse::{parse, parse_term};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    /// Integer constant, read in the prime field.
    IntLit(u64),
    Param(String),
    Add(Box<Term>, Box<Term>),
    Sub(Box<Term>, Box<Term>),
    Mul(Box<Term>, Box<Term>),
    Neg(Box<Term>),
    /// σ^j(t), `j >= 1`.
    Sigma(u32, Box<Term>),
    /// t^{p^e}; only produced by specialization.
    FrobLit(Box<Term>, u32),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Eq(Term, Term),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(String, Box<Formula>),
    Forall(String, Box<Formula>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }
    pub fn param(name: &str) -> Term {
        Term::Param(name.to_string())
    }
    pub fn add(a: Term, b: Term) -> Term {
        Term::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Term, b: Term) -> Term {
        Term::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Term, b: Term) -> Term {
        Term::Mul(Box::new(a), Box::new(b))
    }
    pub fn neg(a: Term) -> Term {
        Term::Neg(Box::new(a))
    }
    pub fn sigma(j: u32, a: Term) -> Term {
        Term::Sigma(j, Box::new(a))
    }

    pub fn has_sigma(&self) -> bool {
        match self {
            Term::Sigma(..) => true,
            Term::Var(_) | Term::IntLit(_) | Term::Param(_) => false,
            Term::Neg(a) | Term::FrobLit(a, _) => a.has_sigma(),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => a.has_sigma() || b.has_sigma(),
        }
    }

    fn visit_names(&self, f: &mut impl FnMut(&str, bool)) {
        match self {
            Term::Var(v) => f(v, false),
            Term::Param(v) => f(v, true),
            Term::IntLit(_) => {}
            Term::Neg(a) | Term::Sigma(_, a) | Term::FrobLit(a, _) => a.visit_names(f),
            Term::Add(a, b) | Term::Sub(a, b) | Term::Mul(a, b) => {
                a.visit_names(f);
                b.visit_names(f);
            }
        }
    }

    fn map_vars(&self, f: &impl Fn(&str) -> Option<Term>) -> Term {
        match self {
            Term::Var(v) => f(v).unwrap_or_else(|| self.clone()),
            Term::IntLit(_) | Term::Param(_) => self.clone(),
            Term::Add(a, b) => Term::add(a.map_vars(f), b.map_vars(f)),
            Term::Sub(a, b) => Term::sub(a.map_vars(f), b.map_vars(f)),
            Term::Mul(a, b) => Term::mul(a.map_vars(f), b.map_vars(f)),
            Term::Neg(a) => Term::neg(a.map_vars(f)),
            Term::Sigma(j, a) => Term::Sigma(*j, Box::new(a.map_vars(f))),
            Term::FrobLit(a, e) => Term::FrobLit(Box::new(a.map_vars(f)), *e),
        }
    }

    fn specialize(&self, m: u32) -> Term {
        match self {
            Term::Var(_) | Term::IntLit(_) | Term::Param(_) => self.clone(),
            Term::Add(a, b) => Term::add(a.specialize(m), b.specialize(m)),
            Term::Sub(a, b) => Term::sub(a.specialize(m), b.specialize(m)),
            Term::Mul(a, b) => Term::mul(a.specialize(m), b.specialize(m)),
            Term::Neg(a) => Term::neg(a.specialize(m)),
            Term::Sigma(j, a) => Term::FrobLit(Box::new(a.specialize(m)), j * m),
            Term::FrobLit(a, e) => Term::FrobLit(Box::new(a.specialize(m)), *e),
        }
    }
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }
    pub fn not(a: Formula) -> Formula {
        Formula::Not(Box::new(a))
    }
    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }
    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }
    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }
    pub fn exists(v: &str, body: Formula) -> Formula {
        Formula::Exists(v.to_string(), Box::new(body))
    }
    pub fn forall(v: &str, body: Formula) -> Formula {
        Formula::Forall(v.to_string(), Box::new(body))
    }

    pub fn has_sigma(&self) -> bool {
        match self {
            Formula::Eq(a, b) => a.has_sigma() || b.has_sigma(),
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => a.has_sigma(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.has_sigma() || b.has_sigma()
            }
        }
    }

    pub fn is_quantifier_free(&self) -> bool {
        match self {
            Formula::Eq(..) => true,
            Formula::Exists(..) | Formula::Forall(..) => false,
            Formula::Not(a) => a.is_quantifier_free(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.is_quantifier_free() && b.is_quantifier_free()
            }
        }
    }

    /// Walks every name occurrence left to right, reporting whether it is
    /// bound by an enclosing quantifier and whether it is a parameter.
    fn walk(&self, bound: &mut Vec<String>, f: &mut impl FnMut(&str, bool, bool)) {
        match self {
            Formula::Eq(a, b) => {
                for t in [a, b] {
                    t.visit_names(&mut |name, is_param| {
                        let is_bound = !is_param && bound.iter().any(|v| v == name);
                        f(name, is_bound, is_param)
                    });
                }
            }
            Formula::Not(a) => a.walk(bound, f),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.walk(bound, f);
                b.walk(bound, f);
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                bound.push(v.clone());
                body.walk(bound, f);
                bound.pop();
            }
        }
    }

    /// Parameter names in first-occurrence order.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.walk(&mut Vec::new(), &mut |name, _, is_param| {
            if is_param && !out.iter().any(|v| v == name) {
                out.push(name.to_string());
            }
        });
        out
    }

    /// Replaces free occurrences of the named variables by parameters.
    pub fn bind_params<S: AsRef<str>>(&self, names: &[S]) -> Formula {
        let names: BTreeSet<&str> = names.iter().map(|s| s.as_ref()).collect();
        self.bind_inner(&names, &mut Vec::new())
    }

    fn bind_inner(&self, names: &BTreeSet<&str>, bound: &mut Vec<String>) -> Formula {
        let swap = |t: &Term, bound: &Vec<String>| {
            t.map_vars(&|v| {
                (names.contains(v) && !bound.iter().any(|b| b == v)).then(|| Term::param(v))
            })
        };
        match self {
            Formula::Eq(a, b) => Formula::Eq(swap(a, bound), swap(b, bound)),
            Formula::Not(a) => Formula::not(a.bind_inner(names, bound)),
            Formula::And(a, b) => Formula::and(a.bind_inner(names, bound), b.bind_inner(names, bound)),
            Formula::Or(a, b) => Formula::or(a.bind_inner(names, bound), b.bind_inner(names, bound)),
            Formula::Implies(a, b) => {
                Formula::implies(a.bind_inner(names, bound), b.bind_inner(names, bound))
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                bound.push(v.clone());
                let inner = body.bind_inner(names, bound);
                bound.pop();
                match self {
                    Formula::Exists(..) => Formula::exists(v, inner),
                    _ => Formula::forall(v, inner),
                }
            }
        }
    }

    /// Depth of the connective/quantifier tree (an atom has depth 1).
    pub fn depth(&self) -> usize {
        match self {
            Formula::Eq(..) => 1,
            Formula::Not(a) | Formula::Exists(_, a) | Formula::Forall(_, a) => 1 + a.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                1 + a.depth().max(b.depth())
            }
        }
    }

    /// The connective/quantifier skeleton with all terms erased.
    pub fn skeleton(&self) -> String {
        match self {
            Formula::Eq(..) => "=".into(),
            Formula::Not(a) => format!("!({})", a.skeleton()),
            Formula::And(a, b) => format!("&({},{})", a.skeleton(), b.skeleton()),
            Formula::Or(a, b) => format!("|({},{})", a.skeleton(), b.skeleton()),
            Formula::Implies(a, b) => format!(">({},{})", a.skeleton(), b.skeleton()),
            Formula::Exists(v, a) => format!("E{v}({})", a.skeleton()),
            Formula::Forall(v, a) => format!("A{v}({})", a.skeleton()),
        }
    }
}

/// Free variables in first-occurrence order (parameters excluded).
pub fn free_vars(phi: &Formula) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    phi.walk(&mut Vec::new(), &mut |name, is_bound, is_param| {
        if !is_bound && !is_param && !out.iter().any(|v| v == name) {
            out.push(name.to_string());
        }
    });
    out
}

/// Rejects formulas where a quantifier binds a name that is already bound
/// in an enclosing scope, occurs free somewhere, or names a parameter.
pub fn check_alpha(phi: &Formula) -> Result<()> {
    let free: BTreeSet<String> = free_vars(phi).into_iter().collect();
    let params: BTreeSet<String> = phi.params().into_iter().collect();
    fn go(
        f: &Formula,
        bound: &mut Vec<String>,
        free: &BTreeSet<String>,
        params: &BTreeSet<String>,
    ) -> Result<()> {
        match f {
            Formula::Eq(..) => Ok(()),
            Formula::Not(a) => go(a, bound, free, params),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                go(a, bound, free, params)?;
                go(b, bound, free, params)
            }
            Formula::Exists(v, body) | Formula::Forall(v, body) => {
                if bound.contains(v) || free.contains(v) || params.contains(v) {
                    return Err(LabError::ShadowedVariable(v.clone()));
                }
                bound.push(v.clone());
                let r = go(body, bound, free, params);
                bound.pop();
                r
            }
        }
    }
    go(phi, &mut Vec::new(), &free, &params)
}

/// Checks alpha-validity and that every parameter has a binding.
pub fn validate(phi: &Formula, env: &ParamEnv) -> Result<()> {
    check_alpha(phi)?;
    for name in phi.params() {
        if !env.contains_key(&name) {
            return Err(LabError::MissingParam(name));
        }
    }
    Ok(())
}

/// Replaces every σ^j(t) by t^{p^{j·m}}, node for node.
pub fn specialize(phi: &Formula, m: u32) -> Formula {
    match phi {
        Formula::Eq(a, b) => Formula::Eq(a.specialize(m), b.specialize(m)),
        Formula::Not(a) => Formula::not(specialize(a, m)),
        Formula::And(a, b) => Formula::and(specialize(a, m), specialize(b, m)),
        Formula::Or(a, b) => Formula::or(specialize(a, m), specialize(b, m)),
        Formula::Implies(a, b) => Formula::implies(specialize(a, m), specialize(b, m)),
        Formula::Exists(v, a) => Formula::exists(v, specialize(a, m)),
        Formula::Forall(v, a) => Formula::forall(v, specialize(a, m)),
    }
}

/// How a parameter is realized in each field of a schedule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParamSpec {
    /// An integer, reduced into the prime field.
    IntConst(i128),
    /// The least-index multiplicative generator.
    Generator,
    /// The least-index non-square.
    NonSquare,
    /// An explicit canonical index; only meaningful for one field size.
    ElemIndex(u64),
}

pub type ParamEnv = BTreeMap<String, ParamSpec>;

impl ParamSpec {
    pub fn resolve(&self, ctx: &FieldCtx) -> Result<GFElem> {
        match self {
            ParamSpec::IntConst(v) => Ok(ctx.from_int(*v)),
            ParamSpec::Generator => Ok(ctx.find_generator()),
            ParamSpec::NonSquare => ctx.find_nonsquare(),
            ParamSpec::ElemIndex(i) => ctx.elem(*i),
        }
    }

    /// Whether the binding means the same thing at every field size.
    pub fn is_schedule_stable(&self) -> bool {
        !matches!(self, ParamSpec::ElemIndex(_))
    }
}

impl FromStr for ParamSpec {
    type Err = LabError;

    /// `int:V`, `gen`, `nonsq` or `idx:V`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || LabError::BadParamSpec(format!("cannot read binding `{s}`"));
        match s {
            "gen" => return Ok(ParamSpec::Generator),
            "nonsq" => return Ok(ParamSpec::NonSquare),
            _ => {}
        }
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        match kind {
            "int" => value.trim().parse().map(ParamSpec::IntConst).map_err(|_| bad()),
            "idx" => value.trim().parse().map(ParamSpec::ElemIndex).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for ParamSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamSpec::IntConst(v) => write!(f, "int:{v}"),
            ParamSpec::Generator => f.write_str("gen"),
            ParamSpec::NonSquare => f.write_str("nonsq"),
            ParamSpec::ElemIndex(i) => write!(f, "idx:{i}"),
        }
    }
}

/// Parses `name=spec` into an entry of a [`ParamEnv`].
pub fn parse_binding(s: &str) -> Result<(String, ParamSpec)> {
    let (name, spec) = s
        .split_once('=')
        .ok_or_else(|| LabError::BadParamSpec(format!("expected name=spec, got `{s}`")))?;
    Ok((name.trim().to_string(), spec.trim().parse()?))
}

/// Resolves every binding of `env` in `ctx`.
pub fn resolve_params(ctx: &FieldCtx, env: &ParamEnv) -> Result<BTreeMap<String, GFElem>> {
    env.iter()
        .map(|(k, v)| v.resolve(ctx).map(|e| (k.clone(), e)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_vars_examples() {
        assert_eq!(free_vars(&parse("E z. z*z = x + y").unwrap()), vec!["x", "y"]);
        assert_eq!(free_vars(&parse("s(x)=x").unwrap()), vec!["x"]);
        assert_eq!(
            free_vars(&parse("y = x * x & E w. w = y").unwrap()),
            vec!["y", "x"]
        );
    }

    #[test]
    fn validate_reports_missing_param() {
        let phi = parse("x = c").unwrap().bind_params(&["c"]);
        assert_eq!(phi.params(), vec!["c"]);
        assert_eq!(
            validate(&phi, &ParamEnv::new()).unwrap_err(),
            LabError::MissingParam("c".into())
        );
        let mut env = ParamEnv::new();
        env.insert("c".into(), ParamSpec::IntConst(3));
        assert!(validate(&phi, &env).is_ok());
    }

    #[test]
    fn shadowing_is_rejected() {
        let phi = Formula::and(
            Formula::eq(Term::var("x"), Term::IntLit(0)),
            Formula::exists("x", Formula::eq(Term::var("x"), Term::IntLit(1))),
        );
        assert_eq!(check_alpha(&phi).unwrap_err(), LabError::ShadowedVariable("x".into()));
        let nested = Formula::exists(
            "z",
            Formula::forall("z", Formula::eq(Term::var("z"), Term::var("z"))),
        );
        assert!(check_alpha(&nested).is_err());
        // sibling scopes may reuse a name
        let siblings = Formula::and(
            Formula::exists("z", Formula::eq(Term::var("z"), Term::IntLit(0))),
            Formula::exists("z", Formula::eq(Term::var("z"), Term::IntLit(1))),
        );
        assert!(check_alpha(&siblings).is_ok());
    }

    #[test]
    fn specialize_examples() {
        let phi = parse("s(x) = x").unwrap();
        let ring = specialize(&phi, 1);
        assert_eq!(
            ring,
            Formula::eq(Term::FrobLit(Box::new(Term::var("x")), 1), Term::var("x"))
        );
        assert!(!ring.has_sigma());

        let phi = parse("s(s(x)) * x = 1").unwrap();
        let ring = specialize(&phi, 1);
        let x = Term::var("x");
        let inner = Term::FrobLit(Box::new(x.clone()), 1);
        assert_eq!(
            ring,
            Formula::eq(Term::mul(Term::FrobLit(Box::new(inner), 1), x), Term::IntLit(1))
        );

        let plain = parse("E z. z*z = x + 1").unwrap();
        assert_eq!(specialize(&plain, 3), plain);
        assert_eq!(specialize(&parse("s^2(x) = x").unwrap(), 3).to_string(), "frob^6(x) = x");
    }

    #[test]
    fn param_spec_syntax() {
        assert_eq!("int:-3".parse::<ParamSpec>().unwrap(), ParamSpec::IntConst(-3));
        assert_eq!("gen".parse::<ParamSpec>().unwrap(), ParamSpec::Generator);
        assert_eq!("nonsq".parse::<ParamSpec>().unwrap(), ParamSpec::NonSquare);
        assert_eq!("idx:17".parse::<ParamSpec>().unwrap(), ParamSpec::ElemIndex(17));
        assert!("foo".parse::<ParamSpec>().is_err());
        assert_eq!(
            parse_binding("c=int:0").unwrap(),
            ("c".to_string(), ParamSpec::IntConst(0))
        );
        let f7 = crate::field::make_field(7, 1, 1).unwrap();
        assert_eq!(ParamSpec::IntConst(-1).resolve(&f7).unwrap().index(), 6);
        assert_eq!(ParamSpec::NonSquare.resolve(&f7).unwrap().index(), 3);
        assert!(ParamSpec::ElemIndex(7).resolve(&f7).is_err());
    }
}
