//! Dense univariate polynomials over the prime field F_p.
//!
//! Coefficients are little-endian (`f[i]` multiplies `x^i`) and always
//! reduced into `[0, p)`. A trimmed polynomial has a nonzero last
//! coefficient; the zero polynomial is the empty vector.

#[inline]
pub fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    if p <= u32::MAX as u64 {
        (a * b) % p
    } else {
        ((a as u128 * b as u128) % p as u128) as u64
    }
}

#[inline]
pub fn add_mod(a: u64, b: u64, p: u64) -> u64 {
    let s = a as u128 + b as u128;
    let p128 = p as u128;
    (if s >= p128 { s - p128 } else { s }) as u64
}

#[inline]
pub fn sub_mod(a: u64, b: u64, p: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        p - (b - a)
    }
}

pub fn pow_mod(mut base: u64, mut exp: u128, p: u64) -> u64 {
    let mut acc = 1 % p;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, p);
        }
        base = mul_mod(base, base, p);
        exp >>= 1;
    }
    acc
}

/// Inverse of a nonzero residue modulo the prime `p`.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    debug_assert!(a % p != 0);
    pow_mod(a, (p - 2) as u128, p)
}

pub fn trim(f: &mut Vec<u64>) {
    while f.last() == Some(&0) {
        f.pop();
    }
}

/// Degree, or `None` for the zero polynomial.
pub fn degree(f: &[u64]) -> Option<usize> {
    f.iter().rposition(|&c| c != 0)
}

pub fn sub(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let n = a.len().max(b.len());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = a.get(i).copied().unwrap_or(0);
        let y = b.get(i).copied().unwrap_or(0);
        out.push(sub_mod(x, y, p));
    }
    trim(&mut out);
    out
}

pub fn mul(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0u64; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] = add_mod(out[i + j], mul_mod(x, y, p), p);
        }
    }
    trim(&mut out);
    out
}

/// Remainder of `a` modulo the nonzero polynomial `m`.
pub fn rem(a: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    let dm = degree(m).expect("division by the zero polynomial");
    let mut r: Vec<u64> = a.to_vec();
    trim(&mut r);
    if r.len() <= dm {
        return r;
    }
    let lead_inv = inv_mod(m[dm], p);
    while let Some(dr) = degree(&r) {
        if dr < dm {
            break;
        }
        let factor = mul_mod(r[dr], lead_inv, p);
        let shift = dr - dm;
        for (i, &c) in m.iter().enumerate().take(dm + 1) {
            let t = mul_mod(factor, c, p);
            r[shift + i] = sub_mod(r[shift + i], t, p);
        }
        trim(&mut r);
    }
    r
}

pub fn mul_rem(a: &[u64], b: &[u64], m: &[u64], p: u64) -> Vec<u64> {
    rem(&mul(a, b, p), m, p)
}

/// `base^exp mod m` by square-and-multiply.
pub fn pow_rem(base: &[u64], mut exp: u128, m: &[u64], p: u64) -> Vec<u64> {
    let mut acc = rem(&[1], m, p);
    let mut b = rem(base, m, p);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_rem(&acc, &b, m, p);
        }
        exp >>= 1;
        if exp > 0 {
            b = mul_rem(&b, &b, m, p);
        }
    }
    acc
}

/// Monic greatest common divisor.
pub fn gcd(a: &[u64], b: &[u64], p: u64) -> Vec<u64> {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    trim(&mut x);
    trim(&mut y);
    while !y.is_empty() {
        let r = rem(&x, &y, p);
        x = y;
        y = r;
    }
    make_monic(&mut x, p);
    x
}

pub fn make_monic(f: &mut [u64], p: u64) {
    if let Some(d) = degree(f) {
        let inv = inv_mod(f[d], p);
        for c in f.iter_mut() {
            *c = mul_mod(*c, inv, p);
        }
    }
}

/// Irreducibility of a monic polynomial of degree `k >= 1` over F_p:
/// `f` is irreducible iff `gcd(f, x^{p^i} - x) = 1` for every `i <= k/2`.
pub fn is_irreducible(f: &[u64], p: u64) -> bool {
    let k = match degree(f) {
        Some(d) if d >= 1 => d,
        _ => return false,
    };
    if k == 1 {
        return true;
    }
    if f[0] == 0 {
        return false;
    }
    let x = vec![0, 1];
    let mut h = x.clone();
    for _ in 0..k / 2 {
        h = pow_rem(&h, p as u128, f, p);
        let g = gcd(f, &sub(&h, &x, p), p);
        if degree(&g).unwrap_or(0) > 0 {
            return false;
        }
    }
    true
}
