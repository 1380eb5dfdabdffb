//! Dense univariate polynomials over a [`Field`], stored low degree first.
//!
//! Used for modulus selection (irreducibility testing), critical points of the
//! master polynomial, and characteristic polynomials with their roots.

use rand::Rng;

use crate::error::{KzError, Result};
use crate::fields::{Fe, Field};

/// Removes trailing zero coefficients.
pub fn trim(f: &mut Vec<Fe>) {
    while f.last().is_some_and(|c| c.is_zero()) {
        f.pop();
    }
}

/// Degree, or `None` for the zero polynomial.
pub fn degree(f: &[Fe]) -> Option<usize> {
    f.iter().rposition(|c| !c.is_zero())
}

/// Sum.
pub fn add(k: &Field, f: &[Fe], g: &[Fe]) -> Vec<Fe> {
    let mut out = vec![Fe::ZERO; f.len().max(g.len())];
    for (i, o) in out.iter_mut().enumerate() {
        let a = f.get(i).copied().unwrap_or(Fe::ZERO);
        let b = g.get(i).copied().unwrap_or(Fe::ZERO);
        *o = k.add(a, b);
    }
    trim(&mut out);
    out
}

/// Difference.
pub fn sub(k: &Field, f: &[Fe], g: &[Fe]) -> Vec<Fe> {
    let neg: Vec<Fe> = g.iter().map(|&c| k.neg(c)).collect();
    add(k, f, &neg)
}

/// Product.
pub fn mul(k: &Field, f: &[Fe], g: &[Fe]) -> Vec<Fe> {
    if f.is_empty() || g.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Fe::ZERO; f.len() + g.len() - 1];
    for (i, &a) in f.iter().enumerate() {
        if a.is_zero() {
            continue;
        }
        for (j, &b) in g.iter().enumerate() {
            out[i + j] = k.add(out[i + j], k.mul(a, b));
        }
    }
    trim(&mut out);
    out
}

/// Quotient and remainder of `f` by a nonzero `g`.
pub fn divrem(k: &Field, f: &[Fe], g: &[Fe]) -> Result<(Vec<Fe>, Vec<Fe>)> {
    let dg = degree(g).ok_or(KzError::ZeroInverse)?;
    let lead_inv = k.inv(g[dg])?;
    let mut r: Vec<Fe> = f.to_vec();
    trim(&mut r);
    if r.len() <= dg {
        return Ok((Vec::new(), r));
    }
    let mut q = vec![Fe::ZERO; r.len() - dg];
    for top in (dg..r.len()).rev() {
        let c = r[top];
        if c.is_zero() {
            continue;
        }
        let factor = k.mul(c, lead_inv);
        q[top - dg] = factor;
        for j in 0..=dg {
            r[top - dg + j] = k.sub(r[top - dg + j], k.mul(factor, g[j]));
        }
    }
    trim(&mut q);
    trim(&mut r);
    Ok((q, r))
}

/// Remainder of `f` modulo a nonzero `g`.
pub fn rem(k: &Field, f: &[Fe], g: &[Fe]) -> Vec<Fe> {
    divrem(k, f, g).expect("nonzero divisor").1
}

/// Scales to a monic polynomial (the zero polynomial is returned unchanged).
pub fn monic(k: &Field, f: &[Fe]) -> Vec<Fe> {
    match degree(f) {
        None => Vec::new(),
        Some(d) => {
            let inv = k.inv(f[d]).expect("nonzero leading coefficient");
            f[..=d].iter().map(|&c| k.mul(c, inv)).collect()
        }
    }
}

/// Monic greatest common divisor.
pub fn gcd(k: &Field, f: &[Fe], g: &[Fe]) -> Vec<Fe> {
    let mut a = f.to_vec();
    let mut b = g.to_vec();
    trim(&mut a);
    trim(&mut b);
    while !b.is_empty() {
        let r = rem(k, &a, &b);
        a = b;
        b = r;
    }
    monic(k, &a)
}

/// `base^e mod m`.
pub fn powmod(k: &Field, base: &[Fe], mut e: u64, m: &[Fe]) -> Vec<Fe> {
    let mut acc = rem(k, &[Fe::ONE], m);
    let mut b = rem(k, base, m);
    while e > 0 {
        if e & 1 == 1 {
            acc = rem(k, &mul(k, &acc, &b), m);
        }
        e >>= 1;
        if e > 0 {
            b = rem(k, &mul(k, &b, &b), m);
        }
    }
    acc
}

/// Formal derivative.
pub fn derivative(k: &Field, f: &[Fe]) -> Vec<Fe> {
    let mut out: Vec<Fe> = f.iter().enumerate().skip(1).map(|(i, &c)| k.mul(k.from_u64(i as u64), c)).collect();
    trim(&mut out);
    out
}

/// Horner evaluation.
pub fn eval(k: &Field, f: &[Fe], x: Fe) -> Fe {
    f.iter().rev().fold(Fe::ZERO, |acc, &c| k.add(k.mul(acc, x), c))
}

/// The monic polynomial `prod (x - r)` over the given roots.
pub fn from_roots(k: &Field, roots: &[Fe]) -> Vec<Fe> {
    roots.iter().fold(vec![Fe::ONE], |acc, &r| mul(k, &acc, &[k.neg(r), Fe::ONE]))
}

fn prime_divisors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// `x^(p^j) mod f` for the characteristic `p` of the prime field `k`.
fn frobenius_power_of_x(k: &Field, j: usize, f: &[Fe]) -> Vec<Fe> {
    let mut x = rem(k, &[Fe::ZERO, Fe::ONE], f);
    for _ in 0..j {
        x = powmod(k, &x, k.order(), f);
    }
    x
}

/// Rabin's test: a monic `f` of degree `d` over the field `k` is irreducible iff
/// `x^(q^d) = x mod f` and `gcd(x^(q^(d/r)) - x, f) = 1` for every prime `r | d`,
/// where `q = |k|`.
pub fn is_irreducible_over_prime(k: &Field, f: &[Fe]) -> bool {
    let Some(d) = degree(f) else { return false };
    if d == 0 {
        return false;
    }
    if d == 1 {
        return true;
    }
    let x = vec![Fe::ZERO, Fe::ONE];
    if sub(k, &frobenius_power_of_x(k, d, f), &rem(k, &x, f)).iter().any(|c| !c.is_zero()) {
        return false;
    }
    prime_divisors(d).into_iter().all(|r| {
        let h = sub(k, &frobenius_power_of_x(k, d / r, f), &x);
        degree(&gcd(k, &h, f)) == Some(0)
    })
}

/// Degrees (with multiplicity) of the irreducible factors of a squarefree `f` over `k`,
/// by distinct-degree factorization.
pub fn factor_degrees(k: &Field, f: &[Fe]) -> Vec<usize> {
    let mut rest = monic(k, f);
    let mut out = Vec::new();
    let x = vec![Fe::ZERO, Fe::ONE];
    let mut xq = rem(k, &x, &rest);
    let mut d = 0;
    while degree(&rest).unwrap_or(0) > 0 {
        d += 1;
        if 2 * d > degree(&rest).unwrap() {
            out.push(degree(&rest).unwrap());
            break;
        }
        xq = powmod(k, &xq, k.order(), &rest);
        let g = gcd(k, &sub(k, &xq, &x), &rest);
        let dg = degree(&g).unwrap_or(0);
        if dg > 0 {
            out.extend(std::iter::repeat(d).take(dg / d));
            rest = divrem(k, &rest, &g).expect("divisor").0;
            xq = rem(k, &xq, &rest);
        }
    }
    out.sort_unstable();
    out
}

/// All roots (with multiplicity) of `f` lying in `k`, sorted by packed value.
///
/// Uses Cantor–Zassenhaus equal-degree splitting on the squarefree part of the
/// product of linear factors; requires odd characteristic.
pub fn roots<R: Rng + ?Sized>(k: &Field, f: &[Fe], rng: &mut R) -> Result<Vec<Fe>> {
    if k.p() == 2 {
        return Err(KzError::Unsupported("root finding in characteristic 2".into()));
    }
    let f = monic(k, f);
    if degree(&f).is_none() {
        return Err(KzError::Unsupported("roots of the zero polynomial".into()));
    }
    let x = vec![Fe::ZERO, Fe::ONE];
    // Product of the distinct linear factors.
    let xq = powmod(k, &x, k.order(), &f);
    let lin = gcd(k, &sub(k, &xq, &x), &f);
    let mut distinct = Vec::new();
    split_linear(k, &lin, rng, &mut distinct);
    let mut out = Vec::new();
    for r in distinct {
        let mut g = f.clone();
        loop {
            let (q, rm) = divrem(k, &g, &[k.neg(r), Fe::ONE])?;
            if !rm.is_empty() {
                break;
            }
            out.push(r);
            g = q;
        }
    }
    out.sort();
    Ok(out)
}

fn split_linear<R: Rng + ?Sized>(k: &Field, f: &[Fe], rng: &mut R, out: &mut Vec<Fe>) {
    match degree(f) {
        None | Some(0) => {}
        Some(1) => out.push(k.neg(k.mul(f[0], k.inv(f[1]).expect("unit")))),
        Some(_) => loop {
            let delta = k.random(rng);
            let h = powmod(k, &[delta, Fe::ONE], (k.order() - 1) / 2, f);
            let g = gcd(k, &sub(k, &h, &[Fe::ONE]), f);
            let dg = degree(&g).unwrap_or(0);
            if dg > 0 && dg < degree(f).unwrap() {
                let (q, _) = divrem(k, f, &g).expect("divisor");
                split_linear(k, &g, rng, out);
                split_linear(k, &q, rng, out);
                return;
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn irreducibility_matches_root_scan_for_quadratics() {
        let k = Field::prime(7).unwrap();
        for c0 in 0..7u64 {
            for c1 in 0..7u64 {
                let f = vec![Fe(c0), Fe(c1), Fe::ONE];
                let rootless = (0..7u64).all(|x| (x * x + c1 * x + c0) % 7 != 0);
                assert_eq!(is_irreducible_over_prime(&k, &f), rootless, "c0={c0} c1={c1}");
            }
        }
    }

    #[test]
    fn roots_recover_product() {
        let k = crate::fields::build_extension(5, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut rs: Vec<Fe> = (0..4).map(|_| k.random(&mut rng)).collect();
        rs.push(rs[0]);
        let f = from_roots(&k, &rs);
        let mut found = roots(&k, &f, &mut rng).unwrap();
        rs.sort();
        found.sort();
        assert_eq!(found, rs);
    }

    #[test]
    fn factor_degrees_of_product() {
        let k = Field::prime(5).unwrap();
        // (x^2 + x + 1)(x - 1)(x - 2): degrees {1, 1, 2}.
        let f = mul(&k, &[Fe(1), Fe(1), Fe(1)], &from_roots(&k, &[Fe(1), Fe(2)]));
        assert_eq!(factor_degrees(&k, &f), vec![1, 1, 2]);
    }
}
