//! Exact arithmetic in GF(p^k) together with the Frobenius power x ↦ x^{p^m}.
//!
//! Elements are identified with their canonical index: the coefficient
//! vector `(c_0, …, c_{k-1})` of the reduced polynomial read as a base-p
//! integer `c_0 + c_1 p + … + c_{k-1} p^{k-1}`. Index 0 is zero and index 1
//! is one. The hot loops of the counting engine work on raw indices through
//! the `*_idx` methods; [`GFElem`] is the checked, context-tagged handle used
//! at API boundaries.
//!
//! Four arithmetic backends sit behind one context:
//! * `k = 1`: residues mod p;
//! * `k > 1`, `q <= 2^20`: discrete-log, antilog and Zech tables;
//! * `p = 2`, larger `q`: bit-packed carry-less multiplication;
//! * otherwise: polynomial arithmetic modulo the canonical modulus.

pub mod poly;

use std::fmt;
use std::sync::OnceLock;

use num_prime::nt_funcs::{factorize64, is_prime64};
use serde::{Serialize, Serializer};

use crate::error::{LabError, Result};

/// Largest field (for `k > 1`) that gets log/antilog tables.
pub const TABLE_LIMIT: u64 = 1 << 20;

const NO_LOG: u32 = u32::MAX;

/// A field element tagged with the `(p, k)` of the field it belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GFElem {
    index: u64,
    p: u64,
    k: u32,
}

impl GFElem {
    /// Canonical index in `[0, q)`.
    #[inline]
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_zero(&self) -> bool {
        self.index == 0
    }
}

impl Serialize for GFElem {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u64(self.index)
    }
}

impl fmt::Display for GFElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Inv,
    Neg,
    Pow,
}

/// Right-hand operand of [`FieldCtx::arith`].
#[derive(Clone, Copy, Debug)]
pub enum Operand {
    None,
    Elem(GFElem),
    Int(u128),
}

struct Tables {
    /// `exp[i] = g^i`, stored twice over so sums of two logs need no reduction.
    exp: Vec<u32>,
    log: Vec<u32>,
    /// `zech[i] = log(1 + g^i)`, or `NO_LOG` when `1 + g^i = 0`.
    zech: Vec<u32>,
    frob: Vec<u32>,
}

enum Backend {
    Prime,
    Table(Tables),
    /// Bits of `x^k mod modulus`, i.e. the modulus without its leading term.
    Binary { low: u64 },
    Poly,
}

/// Immutable description of GF(p^k) with the automorphism x ↦ x^{p^m}.
pub struct FieldCtx {
    p: u64,
    k: u32,
    m: u64,
    /// `m mod k`; the Frobenius map only depends on this.
    m_eff: u32,
    q: u64,
    modulus: Vec<u64>,
    /// Column `i` is `(x^i)^{p^m}` reduced, as a length-k coefficient vector.
    frob_matrix: Vec<Vec<u64>>,
    backend: Backend,
    order_primes: OnceLock<Vec<u64>>,
    generator: OnceLock<u64>,
    nonsquare: OnceLock<Option<u64>>,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldCtx")
            .field("p", &self.p)
            .field("k", &self.k)
            .field("m", &self.m)
            .field("modulus", &self.modulus)
            .finish()
    }
}

/// Builds GF(p^k) with Frobenius power `m`.
pub fn make_field(p: u64, k: u32, m: i64) -> Result<FieldCtx> {
    FieldCtx::new(p, k, m)
}

/// Least monic irreducible polynomial of degree `k` over F_p, ordering the
/// candidates by their lower coefficients read as a base-p integer.
pub fn canonical_modulus(p: u64, k: u32) -> Vec<u64> {
    let k = k as usize;
    if k == 1 {
        return vec![0, 1];
    }
    let mut digits = vec![0u64; k];
    loop {
        // odometer increment over (c_0, …, c_{k-1}), c_0 least significant
        for d in digits.iter_mut() {
            *d += 1;
            if *d < p {
                break;
            }
            *d = 0;
        }
        if digits[0] == 0 {
            continue;
        }
        let mut f = digits.clone();
        f.push(1);
        if poly::is_irreducible(&f, p) {
            return f;
        }
    }
}

impl FieldCtx {
    pub fn new(p: u64, k: u32, m: i64) -> Result<Self> {
        if p < 2 || !is_prime64(p) {
            return Err(LabError::NotPrime(p));
        }
        if k == 0 {
            return Err(LabError::InvalidDegree);
        }
        let q = (p as u128)
            .checked_pow(k)
            .filter(|&q| q < 1u128 << 63)
            .ok_or(LabError::DegreeTooLarge { p, k })? as u64;
        if m < 0 {
            return Err(LabError::InvalidFrobPower(m));
        }
        let m = m as u64;
        let m_eff = (m % k as u64) as u32;
        let modulus = canonical_modulus(p, k);

        let mut ctx = FieldCtx {
            p,
            k,
            m,
            m_eff,
            q,
            modulus,
            frob_matrix: Vec::new(),
            backend: Backend::Poly,
            order_primes: OnceLock::new(),
            generator: OnceLock::new(),
            nonsquare: OnceLock::new(),
        };
        if k == 1 {
            ctx.backend = Backend::Prime;
            return Ok(ctx);
        }
        ctx.frob_matrix = ctx.build_frob_matrix();
        if q <= TABLE_LIMIT {
            let g = ctx.generator_idx();
            ctx.backend = Backend::Table(ctx.build_tables(g));
        } else if p == 2 {
            let low = ctx.modulus[..k as usize]
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, &c)| acc | (c << i));
            ctx.backend = Backend::Binary { low };
        }
        Ok(ctx)
    }

    /// Same field, but forced onto the polynomial backend. Used to cross-check
    /// the table and binary backends.
    #[cfg(test)]
    pub(crate) fn new_poly_backend(p: u64, k: u32, m: i64) -> Result<Self> {
        let mut ctx = FieldCtx::new(p, k, m)?;
        if k > 1 {
            ctx.backend = Backend::Poly;
        }
        Ok(ctx)
    }

    fn build_frob_matrix(&self) -> Vec<Vec<u64>> {
        let k = self.k as usize;
        let p = self.p;
        let exponent = (p as u128).pow(self.m_eff);
        let xp = poly::pow_rem(&[0, 1], exponent, &self.modulus, p);
        let mut cols = Vec::with_capacity(k);
        let mut cur = vec![1u64];
        for _ in 0..k {
            let mut col = cur.clone();
            col.resize(k, 0);
            cols.push(col);
            cur = poly::mul_rem(&cur, &xp, &self.modulus, p);
        }
        cols
    }

    fn build_tables(&self, g: u64) -> Tables {
        let q = self.q as usize;
        let n = q - 1;
        let p = self.p;
        let gpoly = {
            let mut c = self.to_coeffs(g);
            poly::trim(&mut c);
            c
        };
        let mut exp = vec![0u32; 2 * n];
        let mut log = vec![NO_LOG; q];
        let mut cur = vec![1u64];
        for i in 0..n {
            let idx = self.from_coeff_slice(&cur) as u32;
            exp[i] = idx;
            exp[i + n] = idx;
            log[idx as usize] = i as u32;
            cur = poly::mul_rem(&cur, &gpoly, &self.modulus, p);
        }
        let mut zech = vec![NO_LOG; n];
        for (i, z) in zech.iter_mut().enumerate() {
            let v = exp[i] as u64;
            let w = if v % p == p - 1 { v - (p - 1) } else { v + 1 };
            if w != 0 {
                *z = log[w as usize];
            }
        }
        let pm = poly::pow_mod(p, self.m_eff as u128, n as u64) as u128;
        let mut frob = vec![0u32; q];
        for (idx, f) in frob.iter_mut().enumerate().skip(1) {
            let l = log[idx] as u128;
            *f = exp[((l * pm) % n as u128) as usize];
        }
        Tables {
            exp,
            log,
            zech,
            frob,
        }
    }

    pub fn p(&self) -> u64 {
        self.p
    }
    pub fn k(&self) -> u32 {
        self.k
    }
    /// The Frobenius power as given at construction.
    pub fn m(&self) -> u64 {
        self.m
    }
    pub fn q(&self) -> u64 {
        self.q
    }
    /// Canonical modulus, little-endian, monic of degree k.
    pub fn modulus(&self) -> &[u64] {
        &self.modulus
    }
    pub fn has_tables(&self) -> bool {
        matches!(self.backend, Backend::Table(_))
    }

    pub fn label(&self) -> String {
        if self.k == 1 {
            format!("GF({})", self.p)
        } else {
            format!("GF({}^{})", self.p, self.k)
        }
    }

    // ----- element handles -------------------------------------------------

    #[inline]
    fn wrap(&self, index: u64) -> GFElem {
        GFElem {
            index,
            p: self.p,
            k: self.k,
        }
    }

    pub fn elem(&self, index: u64) -> Result<GFElem> {
        if index >= self.q {
            return Err(LabError::IndexOutOfRange { index, q: self.q });
        }
        Ok(self.wrap(index))
    }

    pub fn zero(&self) -> GFElem {
        self.wrap(0)
    }

    pub fn one(&self) -> GFElem {
        self.wrap(1)
    }

    /// Image of an integer in the prime field.
    pub fn from_int(&self, v: i128) -> GFElem {
        self.wrap(v.rem_euclid(self.p as i128) as u64)
    }

    pub fn from_coeffs(&self, coeffs: &[u64]) -> Result<GFElem> {
        if coeffs.len() > self.k as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(LabError::BadParamSpec(format!(
                "coefficient vector {coeffs:?} is not an element of {}",
                self.label()
            )));
        }
        Ok(self.wrap(self.from_coeff_slice(coeffs)))
    }

    pub fn coeffs(&self, a: GFElem) -> Vec<u64> {
        self.to_coeffs(a.index)
    }

    pub fn check(&self, a: GFElem) -> Result<()> {
        if a.p != self.p || a.k != self.k {
            return Err(LabError::MixedContext {
                left_p: self.p,
                left_k: self.k,
                right_p: a.p,
                right_k: a.k,
            });
        }
        Ok(())
    }

    /// Human-readable polynomial form, e.g. `x^2 + 2x + 1`.
    pub fn format(&self, a: GFElem) -> String {
        format_poly(&self.to_coeffs(a.index), "x")
    }

    /// All q elements in canonical index order.
    pub fn enumerate(&self) -> impl Iterator<Item = GFElem> + '_ {
        (0..self.q).map(move |i| self.wrap(i))
    }

    // ----- checked arithmetic ---------------------------------------------

    pub fn add(&self, a: GFElem, b: GFElem) -> Result<GFElem> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.wrap(self.add_idx(a.index, b.index)))
    }

    pub fn sub(&self, a: GFElem, b: GFElem) -> Result<GFElem> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.wrap(self.sub_idx(a.index, b.index)))
    }

    pub fn mul(&self, a: GFElem, b: GFElem) -> Result<GFElem> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.wrap(self.mul_idx(a.index, b.index)))
    }

    pub fn neg(&self, a: GFElem) -> Result<GFElem> {
        self.check(a)?;
        Ok(self.wrap(self.neg_idx(a.index)))
    }

    pub fn inv(&self, a: GFElem) -> Result<GFElem> {
        self.check(a)?;
        self.inv_idx(a.index)
            .map(|i| self.wrap(i))
            .ok_or(LabError::DivisionByZero)
    }

    pub fn pow(&self, a: GFElem, e: u128) -> Result<GFElem> {
        self.check(a)?;
        Ok(self.wrap(self.pow_idx(a.index, e)))
    }

    pub fn frobenius(&self, a: GFElem) -> Result<GFElem> {
        self.check(a)?;
        Ok(self.wrap(self.frob_idx(a.index)))
    }

    pub fn is_square(&self, a: GFElem) -> Result<bool> {
        self.check(a)?;
        Ok(self.is_square_idx(a.index))
    }

    /// One entry point for the six ring operations.
    pub fn arith(&self, op: ArithOp, a: GFElem, rhs: Operand) -> Result<GFElem> {
        let need_elem = || match rhs {
            Operand::Elem(b) => Ok(b),
            _ => Err(LabError::BadParamSpec(format!(
                "{op:?} needs an element operand"
            ))),
        };
        match op {
            ArithOp::Add => self.add(a, need_elem()?),
            ArithOp::Sub => self.sub(a, need_elem()?),
            ArithOp::Mul => self.mul(a, need_elem()?),
            ArithOp::Neg => self.neg(a),
            ArithOp::Inv => self.inv(a),
            ArithOp::Pow => match rhs {
                Operand::Int(e) => self.pow(a, e),
                _ => Err(LabError::BadParamSpec("Pow needs an integer exponent".into())),
            },
        }
    }

    // ----- raw index arithmetic -------------------------------------------

    pub fn to_coeffs(&self, mut idx: u64) -> Vec<u64> {
        let mut out = Vec::with_capacity(self.k as usize);
        for _ in 0..self.k {
            out.push(idx % self.p);
            idx /= self.p;
        }
        out
    }

    fn from_coeff_slice(&self, coeffs: &[u64]) -> u64 {
        coeffs.iter().rev().fold(0u64, |acc, &c| acc * self.p + c)
    }

    #[inline]
    pub fn add_idx(&self, a: u64, b: u64) -> u64 {
        match &self.backend {
            Backend::Prime => poly::add_mod(a, b, self.p),
            Backend::Table(t) => {
                if self.p == 2 {
                    return a ^ b;
                }
                if a == 0 {
                    return b;
                }
                if b == 0 {
                    return a;
                }
                let n = self.q as u32 - 1;
                let la = t.log[a as usize];
                let lb = t.log[b as usize];
                let d = if lb >= la { lb - la } else { lb + n - la };
                let z = t.zech[d as usize];
                if z == NO_LOG {
                    0
                } else {
                    t.exp[(la + z) as usize] as u64
                }
            }
            Backend::Binary { .. } => a ^ b,
            Backend::Poly => self.digitwise(a, b, poly::add_mod),
        }
    }

    #[inline]
    pub fn neg_idx(&self, a: u64) -> u64 {
        match &self.backend {
            Backend::Prime => {
                if a == 0 {
                    0
                } else {
                    self.p - a
                }
            }
            Backend::Binary { .. } => a,
            Backend::Table(t) => {
                if self.p == 2 || a == 0 {
                    return a;
                }
                let n = self.q as u32 - 1;
                t.exp[(t.log[a as usize] + n / 2) as usize] as u64
            }
            Backend::Poly => self.digitwise(0, a, poly::sub_mod),
        }
    }

    #[inline]
    pub fn sub_idx(&self, a: u64, b: u64) -> u64 {
        match &self.backend {
            Backend::Prime => poly::sub_mod(a, b, self.p),
            Backend::Binary { .. } => a ^ b,
            Backend::Poly => self.digitwise(a, b, poly::sub_mod),
            Backend::Table(_) => self.add_idx(a, self.neg_idx(b)),
        }
    }

    #[inline]
    pub fn mul_idx(&self, a: u64, b: u64) -> u64 {
        match &self.backend {
            Backend::Prime => poly::mul_mod(a, b, self.p),
            Backend::Table(t) => {
                if a == 0 || b == 0 {
                    0
                } else {
                    t.exp[(t.log[a as usize] + t.log[b as usize]) as usize] as u64
                }
            }
            Backend::Binary { low } => gf2_mul(a, b, self.k, *low),
            Backend::Poly => {
                let r = poly::mul_rem(
                    &self.to_coeffs(a),
                    &self.to_coeffs(b),
                    &self.modulus,
                    self.p,
                );
                self.from_coeff_slice(&r)
            }
        }
    }

    /// Multiplicative inverse; `None` for zero.
    pub fn inv_idx(&self, a: u64) -> Option<u64> {
        if a == 0 {
            return None;
        }
        Some(match &self.backend {
            Backend::Prime => poly::inv_mod(a, self.p),
            Backend::Table(t) => {
                let n = self.q as u32 - 1;
                t.exp[(n - t.log[a as usize]) as usize] as u64
            }
            _ => self.pow_idx(a, (self.q - 2) as u128),
        })
    }

    /// `a^e` by square-and-multiply; `0^0 = 1`.
    pub fn pow_idx(&self, a: u64, e: u128) -> u64 {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let n = (self.q - 1) as u128;
        let mut e = e % n;
        if e == 0 {
            return 1;
        }
        let mut acc = 1u64;
        let mut base = a;
        loop {
            if e & 1 == 1 {
                acc = self.mul_idx(acc, base);
            }
            e >>= 1;
            if e == 0 {
                break;
            }
            base = self.mul_idx(base, base);
        }
        acc
    }

    /// The automorphism x ↦ x^{p^m}, applied through its F_p-linear matrix
    /// (or a table built from logs for small fields).
    #[inline]
    pub fn frob_idx(&self, a: u64) -> u64 {
        match &self.backend {
            Backend::Prime => a,
            Backend::Table(t) => t.frob[a as usize] as u64,
            _ => self.frob_linear(a),
        }
    }

    /// x ↦ x^{p^m} through the Frobenius matrix, on any backend.
    pub fn frob_linear(&self, a: u64) -> u64 {
        if self.k == 1 {
            return a;
        }
        let p = self.p;
        let c = self.to_coeffs(a);
        let mut out = vec![0u64; self.k as usize];
        for (ci, col) in c.iter().zip(&self.frob_matrix) {
            if *ci == 0 {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(col) {
                *o = poly::add_mod(*o, poly::mul_mod(*ci, v, p), p);
            }
        }
        self.from_coeff_slice(&out)
    }

    /// `a^{p^e}` computed by exponentiation rather than through the
    /// Frobenius matrix.
    pub fn frob_pow_idx(&self, a: u64, e: u64) -> u64 {
        let e = (e % self.k as u64) as u32;
        if e == 0 {
            return a;
        }
        self.pow_idx(a, (self.p as u128).pow(e))
    }

    /// Zero counts as a square.
    #[inline]
    pub fn is_square_idx(&self, a: u64) -> bool {
        if a == 0 || self.p == 2 {
            return true;
        }
        match &self.backend {
            Backend::Prime => poly::pow_mod(a, ((self.p - 1) / 2) as u128, self.p) == 1,
            Backend::Table(t) => t.log[a as usize] % 2 == 0,
            _ => self.pow_idx(a, ((self.q - 1) / 2) as u128) == 1,
        }
    }

    /// Zero counts as a cube.
    pub fn is_cube_idx(&self, a: u64) -> bool {
        if a == 0 || (self.q - 1) % 3 != 0 {
            return true;
        }
        match &self.backend {
            Backend::Table(t) => t.log[a as usize] % 3 == 0,
            _ => self.pow_idx(a, ((self.q - 1) / 3) as u128) == 1,
        }
    }

    fn digitwise(&self, a: u64, b: u64, op: fn(u64, u64, u64) -> u64) -> u64 {
        let p = self.p;
        let (mut a, mut b) = (a, b);
        let mut out = 0u64;
        let mut scale = 1u64;
        for i in 0..self.k {
            out += op(a % p, b % p, p) * scale;
            a /= p;
            b /= p;
            if i + 1 < self.k {
                scale *= p;
            }
        }
        out
    }

    // ----- structure ------------------------------------------------------

    /// Distinct prime factors of q - 1.
    pub fn order_primes(&self) -> &[u64] {
        self.order_primes.get_or_init(|| {
            if self.q <= 2 {
                return Vec::new();
            }
            factorize64(self.q - 1).keys().copied().collect()
        })
    }

    /// Multiplicative order of a nonzero element.
    pub fn order_idx(&self, a: u64) -> u64 {
        assert!(a != 0, "zero has no multiplicative order");
        let mut order = self.q - 1;
        for &r in self.order_primes() {
            while order % r == 0 && self.pow_idx(a, (order / r) as u128) == 1 {
                order /= r;
            }
        }
        order
    }

    fn generator_idx(&self) -> u64 {
        *self.generator.get_or_init(|| {
            let n = self.q - 1;
            (1..self.q)
                .find(|&a| {
                    self.order_primes()
                        .iter()
                        .all(|&r| self.pow_idx(a, (n / r) as u128) != 1)
                })
                .expect("the multiplicative group of a finite field is cyclic")
        })
    }

    /// Least-index element of multiplicative order q - 1.
    pub fn find_generator(&self) -> GFElem {
        self.wrap(self.generator_idx())
    }

    /// Least-index element that is not a square.
    pub fn find_nonsquare(&self) -> Result<GFElem> {
        if self.p == 2 {
            return Err(LabError::CharTwo);
        }
        let idx = self
            .nonsquare
            .get_or_init(|| (1..self.q).find(|&a| !self.is_square_idx(a)))
            .expect("odd characteristic always has non-squares");
        Ok(self.wrap(idx))
    }

    /// Degree over F_p of the subfield fixed by σ^n, i.e. gcd(m·n, k).
    pub fn fixed_degree(&self, n: u64) -> u32 {
        let mn = self.m as u128 * n as u128;
        gcd_u128(mn, self.k as u128) as u32
    }

    /// `Fix(σ^n) = {x : x^{p^{mn}} = x}`, sorted by index. It is the subfield
    /// of size `p^{gcd(mn, k)}`, built from powers of the generator.
    pub fn fixed_set(&self, n: u64) -> Vec<GFElem> {
        let d = self.fixed_degree(n);
        let size = self.p.pow(d);
        if size == self.q {
            return self.enumerate().collect();
        }
        let step = ((self.q - 1) / (size - 1)) as u128;
        let g = self.generator_idx();
        let h = self.pow_idx(g, step);
        let mut out = Vec::with_capacity(size as usize);
        out.push(0);
        let mut cur = 1u64;
        for _ in 0..size - 1 {
            out.push(cur);
            cur = self.mul_idx(cur, h);
        }
        out.sort_unstable();
        out.into_iter().map(|i| self.wrap(i)).collect()
    }

    /// Applies σ^j = (x ↦ x^{p^m})^j by iterating the Frobenius map.
    pub fn sigma_pow_idx(&self, a: u64, j: u64) -> u64 {
        let steps = if self.k == 1 { 0 } else { j % self.k as u64 };
        (0..steps).fold(a, |x, _| self.frob_idx(x))
    }
}

fn gcd_u128(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd_u128(b, a % b)
    }
}

fn gf2_mul(mut a: u64, b: u64, k: u32, low: u64) -> u64 {
    let top = 1u64 << (k - 1);
    let mask = if k == 64 { u64::MAX } else { (1u64 << k) - 1 };
    let mut r = 0u64;
    for i in 0..k {
        if (b >> i) & 1 == 1 {
            r ^= a;
        }
        let carry = a & top;
        a = (a << 1) & mask;
        if carry != 0 {
            a ^= low;
        }
    }
    r
}

/// Formats a little-endian coefficient vector as a polynomial in `var`.
pub fn format_poly(coeffs: &[u64], var: &str) -> String {
    let mut terms = Vec::new();
    for (i, &c) in coeffs.iter().enumerate().rev() {
        if c == 0 {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => var.to_string(),
            _ => format!("{var}^{i}"),
        };
        terms.push(match (c, i) {
            (_, 0) => c.to_string(),
            (1, _) => mono,
            _ => format!("{c}{mono}"),
        });
    }
    if terms.is_empty() {
        "0".into()
    } else {
        terms.join(" + ")
    }
}
