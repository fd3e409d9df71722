//! Recursive-descent parser for the formula text format.
//!
//! ```text
//! formula := implies
//! implies := or ( "->" implies )?
//! or      := and ( "|" and )*
//! and     := unary ( "&" unary )*
//! unary   := "!" unary | ("E" | "A") ident+ "." formula | atom
//! atom    := term ("=" | "!=") term | "(" formula ")"
//! term    := prod (("+" | "-") prod)*
//! prod    := neg ("*" neg)*
//! neg     := "-" neg | power
//! power   := primary ("^" INT)?
//! primary := INT | ident | "$" ident | "(" term ")"
//!          | "s" ("^" INT)? "(" term ")" | "frob" ("^" INT)? "(" term ")"
//! ```
//!
//! `t^n` is shorthand for an n-fold product and `a != b` for `!(a = b)`.

use super::{check_alpha, Formula, Term};
use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Dollar,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Caret,
    Eq,
    Neq,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Dot,
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let mut push = |tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            '+' => push(Tok::Plus, 1, &mut i, &mut col),
            '*' => push(Tok::Star, 1, &mut i, &mut col),
            '^' => push(Tok::Caret, 1, &mut i, &mut col),
            '=' => push(Tok::Eq, 1, &mut i, &mut col),
            '&' => push(Tok::Amp, 1, &mut i, &mut col),
            '|' => push(Tok::Pipe, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '$' => push(Tok::Dollar, 1, &mut i, &mut col),
            '-' if chars.get(i + 1) == Some(&'>') => push(Tok::Arrow, 2, &mut i, &mut col),
            '-' => push(Tok::Minus, 1, &mut i, &mut col),
            '!' if chars.get(i + 1) == Some(&'=') => push(Tok::Neq, 2, &mut i, &mut col),
            '!' => push(Tok::Bang, 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let value = text.parse().map_err(|_| LabError::Parse {
                    line: l0,
                    column: c0,
                    message: format!("integer literal `{text}` is too large"),
                })?;
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Int(value),
                    line: l0,
                    column: c0,
                });
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                {
                    i += 1;
                }
                col += i - start;
                out.push(Spanned {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    line: l0,
                    column: c0,
                });
            }
            other => {
                return Err(LabError::Parse {
                    line,
                    column: col,
                    message: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    out.push(Spanned {
        tok: Tok::End,
        line,
        column: col,
    });
    Ok(out)
}

const RESERVED: [&str; 4] = ["E", "A", "s", "frob"];

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let s = &self.toks[self.pos];
        Err(LabError::Parse {
            line: s.line,
            column: s.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn formula(&mut self) -> Result<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Formula> {
        let mut acc = self.conjunction()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            acc = Formula::or(acc, self.conjunction()?);
        }
        Ok(acc)
    }

    fn conjunction(&mut self) -> Result<Formula> {
        let mut acc = self.unary()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            acc = Formula::and(acc, self.unary()?);
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Formula> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(q) if (q == "E" || q == "A") && matches!(self.peek_at(1), Tok::Ident(_)) => {
                self.bump();
                let mut vars = Vec::new();
                while let Tok::Ident(v) = self.peek().clone() {
                    if RESERVED.contains(&v.as_str()) {
                        return self.error(format!("`{v}` is reserved and cannot be bound"));
                    }
                    self.bump();
                    vars.push(v);
                }
                self.expect(Tok::Dot, "`.` after quantified variables")?;
                let body = self.formula()?;
                Ok(vars.iter().rev().fold(body, |acc, v| {
                    if q == "E" {
                        Formula::exists(v, acc)
                    } else {
                        Formula::forall(v, acc)
                    }
                }))
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Formula> {
        if *self.peek() == Tok::LParen {
            // Either a parenthesized formula or an equation whose left side
            // starts with a parenthesized term; try the equation first.
            let save = self.pos;
            match self.equation() {
                Ok(f) => return Ok(f),
                Err(eq_err) => {
                    let eq_pos = self.pos;
                    self.pos = save;
                    self.bump();
                    let inner = self.formula();
                    match inner {
                        Ok(f) if *self.peek() == Tok::RParen => {
                            self.bump();
                            return Ok(f);
                        }
                        Ok(_) => {
                            if self.pos >= eq_pos {
                                return self.error(format!(
                                    "expected `)`, found {}",
                                    describe(self.peek())
                                ));
                            }
                            return Err(eq_err);
                        }
                        Err(e) => {
                            return Err(if self.pos >= eq_pos { e } else { eq_err });
                        }
                    }
                }
            }
        }
        self.equation()
    }

    fn equation(&mut self) -> Result<Formula> {
        let lhs = self.term()?;
        match self.bump() {
            Tok::Eq => Ok(Formula::eq(lhs, self.term()?)),
            Tok::Neq => Ok(Formula::not(Formula::eq(lhs, self.term()?))),
            _ => {
                self.pos -= 1;
                self.error(format!("expected `=` or `!=`, found {}", describe(self.peek())))
            }
        }
    }

    fn term(&mut self) -> Result<Term> {
        let mut acc = self.product()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = Term::add(acc, self.product()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Term::sub(acc, self.product()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn product(&mut self) -> Result<Term> {
        let mut acc = self.negation()?;
        while *self.peek() == Tok::Star {
            self.bump();
            acc = Term::mul(acc, self.negation()?);
        }
        Ok(acc)
    }

    fn negation(&mut self) -> Result<Term> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Term::neg(self.negation()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Term> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let n = self.integer("exponent")?;
            return Ok(match n {
                0 => Term::IntLit(1),
                _ => (1..n).fold(base.clone(), |acc, _| Term::mul(acc, base.clone())),
            });
        }
        Ok(base)
    }

    fn integer(&mut self, what: &str) -> Result<u64> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            other => self.error(format!("expected {what}, found {}", describe(&other))),
        }
    }

    fn operator_power(&mut self) -> Result<u64> {
        if *self.peek() == Tok::Caret {
            self.bump();
            self.integer("power")
        } else {
            Ok(1)
        }
    }

    fn primary(&mut self) -> Result<Term> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Term::IntLit(n))
            }
            Tok::Dollar => {
                self.bump();
                match self.bump() {
                    Tok::Ident(name) if !RESERVED.contains(&name.as_str()) => Ok(Term::Param(name)),
                    _ => {
                        self.pos -= 1;
                        self.error("expected parameter name after `$`")
                    }
                }
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Ident(name) if name == "s" || name == "frob" => {
                self.bump();
                let power = self.operator_power()?;
                self.expect(Tok::LParen, "`(`")?;
                let arg = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                let power = u32::try_from(power).or_else(|_| self.error("power too large"))?;
                if name == "s" {
                    if power == 0 {
                        return self.error("σ power must be at least 1");
                    }
                    Ok(Term::Sigma(power, Box::new(arg)))
                } else {
                    Ok(Term::FrobLit(Box::new(arg), power))
                }
            }
            Tok::Ident(name) if RESERVED.contains(&name.as_str()) => {
                self.error(format!("`{name}` is reserved"))
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Term::Var(name))
            }
            other => self.error(format!("expected a term, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::End => "end of input".into(),
        Tok::Dollar => "`$`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Caret => "`^`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Neq => "`!=`".into(),
        Tok::Bang => "`!`".into(),
        Tok::Amp => "`&`".into(),
        Tok::Pipe => "`|`".into(),
        Tok::Arrow => "`->`".into(),
        Tok::Dot => "`.`".into(),
    }
}

/// Parses a formula and checks that no quantifier shadows another binding.
pub fn parse(text: &str) -> Result<Formula> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let phi = p.formula()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {}", describe(p.peek())));
    }
    check_alpha(&phi)?;
    Ok(phi)
}

/// Parses a single term, e.g. a difference polynomial `s(x) - x^2`.
pub fn parse_term(text: &str) -> Result<Term> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
    };
    let t = p.term()?;
    if *p.peek() != Tok::End {
        return p.error(format!("unexpected {}", describe(p.peek())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Term {
        Term::var(n)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(
            parse("E z. z*z = x + y").unwrap(),
            Formula::exists(
                "z",
                Formula::eq(Term::mul(v("z"), v("z")), Term::add(v("x"), v("y")))
            )
        );
        assert_eq!(
            parse("s(x) = x").unwrap(),
            Formula::eq(Term::sigma(1, v("x")), v("x"))
        );
        assert!(matches!(
            parse("E z. z*z = x +"),
            Err(LabError::Parse { line: 1, column: 15, .. })
        ));
    }

    #[test]
    fn sugar() {
        assert_eq!(
            parse("x^3 != 1").unwrap(),
            Formula::not(Formula::eq(
                Term::mul(Term::mul(v("x"), v("x")), v("x")),
                Term::IntLit(1)
            ))
        );
        assert_eq!(
            parse("E a b. a = b").unwrap(),
            Formula::exists("a", Formula::exists("b", Formula::eq(v("a"), v("b"))))
        );
        assert_eq!(
            parse("s^2(x) = frob(x)").unwrap(),
            Formula::eq(Term::sigma(2, v("x")), Term::FrobLit(Box::new(v("x")), 1))
        );
    }

    #[test]
    fn parenthesized_term_versus_formula() {
        let a = parse("(x + 1) * y = 0").unwrap();
        assert!(matches!(a, Formula::Eq(Term::Mul(..), _)));
        let b = parse("(x = 1 | y = 2) & z = 3").unwrap();
        assert!(matches!(b, Formula::And(..)));
        let c = parse("((x)) = x").unwrap();
        assert_eq!(c, Formula::eq(v("x"), v("x")));
        let d = parse("((x = 1))").unwrap();
        assert_eq!(d, Formula::eq(v("x"), Term::IntLit(1)));
    }

    #[test]
    fn error_positions() {
        let err = parse("x = y &\n  z = ").unwrap_err();
        assert!(matches!(err, LabError::Parse { line: 2, .. }), "{err:?}");
        assert!(parse("(x = 1").is_err());
        assert!(parse("x = 1)").is_err());
        assert!(parse("E . x = x").is_err());
        assert!(parse("s^0(x) = x").is_err());
        assert!(parse("x # y").is_err());
        assert_eq!(
            parse("E x. E x. x = x").unwrap_err(),
            LabError::ShadowedVariable("x".into())
        );
    }

    #[test]
    fn multiline_input() {
        let phi = parse("E z.\n  z * z = x\n  & x != 0").unwrap();
        assert_eq!(phi.to_string(), "E z. z * z = x & !(x = 0)");
    }
}
