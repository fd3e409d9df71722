use std::fmt::{self, Display, Formatter, Write};

use super::{Formula, Term};

// Term precedence: sums 1, products 2, negation 3, atoms 4.
fn term_prec(t: &Term) -> u8 {
    match t {
        Term::Add(..) | Term::Sub(..) => 1,
        Term::Mul(..) => 2,
        Term::Neg(..) => 3,
        _ => 4,
    }
}

fn write_term(f: &mut Formatter<'_>, t: &Term, min_prec: u8) -> fmt::Result {
    let paren = term_prec(t) < min_prec;
    if paren {
        f.write_char('(')?;
    }
    match t {
        Term::Var(v) => f.write_str(v)?,
        Term::Param(v) => write!(f, "${v}")?,
        Term::IntLit(n) => write!(f, "{n}")?,
        Term::Add(a, b) | Term::Sub(a, b) => {
            write_term(f, a, 1)?;
            f.write_str(if matches!(t, Term::Add(..)) { " + " } else { " - " })?;
            write_term(f, b, 2)?;
        }
        Term::Mul(a, b) => {
            write_term(f, a, 2)?;
            f.write_str(" * ")?;
            write_term(f, b, 3)?;
        }
        Term::Neg(a) => {
            f.write_char('-')?;
            write_term(f, a, 3)?;
        }
        Term::Sigma(j, a) => {
            if *j == 1 {
                f.write_str("s(")?;
            } else {
                write!(f, "s^{j}(")?;
            }
            write_term(f, a, 0)?;
            f.write_char(')')?;
        }
        Term::FrobLit(a, e) => {
            if *e == 1 {
                f.write_str("frob(")?;
            } else {
                write!(f, "frob^{e}(")?;
            }
            write_term(f, a, 0)?;
            f.write_char(')')?;
        }
    }
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_term(f, self, 0)
    }
}

// Formula precedence: -> 1, | 2, & 3, prefix forms 4. Quantifier bodies
// extend as far right as possible, so a quantifier is parenthesized whenever
// something could follow it.
fn formula_prec(phi: &Formula) -> u8 {
    match phi {
        Formula::Implies(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        _ => 4,
    }
}

fn write_formula(f: &mut Formatter<'_>, phi: &Formula, min_prec: u8, tail: bool) -> fmt::Result {
    let is_quant = matches!(phi, Formula::Exists(..) | Formula::Forall(..));
    let paren = formula_prec(phi) < min_prec || (is_quant && !tail);
    if paren {
        f.write_char('(')?;
    }
    // inside parentheses the formula is in tail position again
    let tail = tail || paren;
    match phi {
        Formula::Eq(a, b) => {
            write_term(f, a, 0)?;
            f.write_str(" = ")?;
            write_term(f, b, 0)?;
        }
        Formula::Not(a) => {
            f.write_char('!')?;
            let min = if matches!(**a, Formula::Not(_)) { 4 } else { 5 };
            write_formula(f, a, min, tail)?;
        }
        Formula::And(a, b) => {
            write_formula(f, a, 3, false)?;
            f.write_str(" & ")?;
            write_formula(f, b, 4, tail)?;
        }
        Formula::Or(a, b) => {
            write_formula(f, a, 2, false)?;
            f.write_str(" | ")?;
            write_formula(f, b, 3, tail)?;
        }
        Formula::Implies(a, b) => {
            write_formula(f, a, 2, false)?;
            f.write_str(" -> ")?;
            write_formula(f, b, 1, tail)?;
        }
        Formula::Exists(v, body) => {
            write!(f, "E {v}. ")?;
            write_formula(f, body, 0, true)?;
        }
        Formula::Forall(v, body) => {
            write!(f, "A {v}. ")?;
            write_formula(f, body, 0, true)?;
        }
    }
    if paren {
        f.write_char(')')?;
    }
    Ok(())
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write_formula(f, self, 0, true)
    }
}
