//! Exact arithmetic in prime fields `F_p` and their extensions `F_{p^k}`.
//!
//! A [`Field`] is a cheap, clonable handle describing `F_p[t]/(f(t))`. Elements are
//! plain [`Fe`] values (coefficient digits bit-packed into a `u64`), and every
//! operation goes through the field handle. Elements of the prime subfield are
//! stored as their residue, so `F_p` embeds into every extension as the identity
//! on the packed value.
//!
//! [`FieldElement`] pairs a value with its field for a self-contained public API
//! with operator overloading.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use rand::{Rng, SeedableRng};

use crate::error::{KzError, Result};
use crate::upoly;

/// Largest supported characteristic (exclusive).
pub const MAX_PRIME: u64 = 1 << 31;

/// Maximal number of coefficient digits of an extension element.
const MAX_DIGITS: usize = 64;

/// A field element stored as bit-packed coefficient digits `c_0 + c_1 t + ...`.
///
/// The value is only meaningful together with the [`Field`] that produced it.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fe(pub(crate) u64);

impl Fe {
    /// The zero element of every field.
    pub const ZERO: Fe = Fe(0);
    /// The unit element of every field.
    pub const ONE: Fe = Fe(1);

    /// Returns `true` for the zero element.
    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// Raw packed representation.
    #[inline]
    pub fn raw(self) -> u64 {
        self.0
    }
}

#[derive(Debug, PartialEq, Eq)]
struct FieldData {
    p: u64,
    k: usize,
    bits: u32,
    mask: u64,
    /// Low coefficients `c_0..c_{k-1}` of the monic modulus `t^k + ... + c_0`.
    modulus: Vec<u64>,
    order: u64,
}

/// Handle to a finite field `F_p[t]/(f)` with `f` monic irreducible of degree `k`.
///
/// Two handles compare equal when they describe the same characteristic and modulus.
#[derive(Clone, PartialEq, Eq)]
pub struct Field(Arc<FieldData>);

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.k == 1 {
            write!(f, "F_{}", self.0.p)
        } else {
            write!(f, "F_{}^{}[mod {:?}]", self.0.p, self.0.k, self.0.modulus)
        }
    }
}

/// Deterministic primality test for `n < 2^32` by trial division.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

fn check_prime(p: u64) -> Result<()> {
    if p >= MAX_PRIME || !is_prime(p) {
        return Err(KzError::NotPrime(p));
    }
    Ok(())
}

impl Field {
    /// The prime field `F_p`.
    pub fn prime(p: u64) -> Result<Field> {
        check_prime(p)?;
        Ok(Self::from_parts(p, vec![0]))
    }

    /// The extension of degree `k` whose modulus is the lexicographically smallest
    /// monic irreducible polynomial, comparing coefficient lists `(c_0, c_1, ..., c_{k-1})`.
    pub fn extension(p: u64, k: usize) -> Result<Field> {
        check_prime(p)?;
        if k == 0 {
            return Err(KzError::InvalidConfig("extension degree must be at least 1".into()));
        }
        if k == 1 {
            return Ok(Self::from_parts(p, vec![0]));
        }
        Self::check_capacity(p, k)?;
        let base = Self::from_parts(p, vec![0]);
        // A zero constant term makes t a factor, so the scan starts at c_0 = 1.
        let mut digits = vec![0u64; k];
        digits[0] = 1;
        loop {
            if upoly::is_irreducible_over_prime(&base, &monic_with_low(&digits)) {
                return Ok(Self::from_parts(p, digits));
            }
            // Advance lexicographically with c_{k-1} varying fastest.
            let mut pos = k;
            loop {
                if pos == 0 {
                    unreachable!("irreducible polynomials exist in every degree");
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < p {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// An extension with an explicitly given monic modulus `t^k + low[k-1] t^{k-1} + ... + low[0]`.
    pub fn with_modulus(p: u64, low: &[u64]) -> Result<Field> {
        check_prime(p)?;
        let k = low.len();
        if k == 0 || low.iter().any(|&c| c >= p) {
            return Err(KzError::NotIrreducible(k));
        }
        if k == 1 {
            return Ok(Self::from_parts(p, low.to_vec()));
        }
        Self::check_capacity(p, k)?;
        let base = Self::from_parts(p, vec![0]);
        if !upoly::is_irreducible_over_prime(&base, &monic_with_low(low)) {
            return Err(KzError::NotIrreducible(k));
        }
        Ok(Self::from_parts(p, low.to_vec()))
    }

    fn check_capacity(p: u64, k: usize) -> Result<()> {
        let bits = 64 - (p - 1).leading_zeros();
        if bits as usize * k > 64 || k > MAX_DIGITS {
            return Err(KzError::Unsupported(format!(
                "extension F_{p}^{k} does not fit the packed representation"
            )));
        }
        Ok(())
    }

    fn from_parts(p: u64, modulus: Vec<u64>) -> Field {
        let k = modulus.len();
        let bits = (64 - (p - 1).leading_zeros()).max(1);
        let mask = if bits == 64 { u64::MAX } else { (1u64 << bits) - 1 };
        let order = (0..k).fold(1u64, |acc, _| acc.saturating_mul(p));
        Field(Arc::new(FieldData { p, k, bits, mask, modulus, order }))
    }

    /// The characteristic.
    #[inline]
    pub fn p(&self) -> u64 {
        self.0.p
    }

    /// The extension degree over the prime field.
    #[inline]
    pub fn degree(&self) -> usize {
        self.0.k
    }

    /// Number of elements `p^k`.
    #[inline]
    pub fn order(&self) -> u64 {
        self.0.order
    }

    /// Returns `true` when this is the prime field itself.
    #[inline]
    pub fn is_prime_field(&self) -> bool {
        self.0.k == 1
    }

    /// Low coefficients of the monic modulus (`[0]` for the prime field, meaning `t`).
    pub fn modulus(&self) -> &[u64] {
        &self.0.modulus
    }

    /// The prime subfield of this field.
    pub fn prime_subfield(&self) -> Field {
        Self::from_parts(self.0.p, vec![0])
    }

    /// Zero.
    #[inline]
    pub fn zero(&self) -> Fe {
        Fe::ZERO
    }

    /// One.
    #[inline]
    pub fn one(&self) -> Fe {
        Fe::ONE
    }

    /// The image of an integer.
    #[inline]
    pub fn from_i64(&self, v: i64) -> Fe {
        let p = self.0.p as i64;
        Fe(v.rem_euclid(p) as u64)
    }

    /// The image of an unsigned integer.
    #[inline]
    pub fn from_u64(&self, v: u64) -> Fe {
        Fe(v % self.0.p)
    }

    /// The element `c_0 + c_1 t + ...`; coefficients beyond the degree are reduced by the modulus.
    pub fn from_coeffs(&self, coeffs: &[u64]) -> Fe {
        let p = self.0.p;
        let mut acc = self.zero();
        let mut tpow = self.one();
        let t = self.generator();
        for &c in coeffs {
            acc = self.add(acc, self.mul(self.from_u64(c % p), tpow));
            tpow = self.mul(tpow, t);
        }
        acc
    }

    /// The class of `t` (equals `-c_0` in the prime field, where the modulus is `t + c_0`).
    pub fn generator(&self) -> Fe {
        if self.0.k == 1 {
            self.neg(Fe(self.0.modulus[0]))
        } else {
            Fe(1u64 << self.0.bits)
        }
    }

    /// Coefficient digits `c_0..c_{k-1}` of an element.
    pub fn coeffs(&self, a: Fe) -> Vec<u64> {
        let mut d = [0u64; MAX_DIGITS];
        self.unpack(a, &mut d);
        d[..self.0.k].to_vec()
    }

    /// The residue of `a` when `a` lies in the prime subfield.
    #[inline]
    pub fn prime_lift(&self, a: Fe) -> Option<u64> {
        if a.0 < self.0.p {
            Some(a.0)
        } else {
            None
        }
    }

    /// Returns `true` iff `a` lies in the prime subfield, tested as `frobenius(a) == a`.
    pub fn in_prime_subfield(&self, a: Fe) -> bool {
        self.frobenius(a) == a
    }

    #[inline]
    fn unpack(&self, a: Fe, out: &mut [u64; MAX_DIGITS]) {
        let d = &*self.0;
        let mut v = a.0;
        for slot in out.iter_mut().take(d.k) {
            *slot = v & d.mask;
            v = if d.bits == 64 { 0 } else { v >> d.bits };
        }
    }

    #[inline]
    fn pack(&self, digits: &[u64]) -> Fe {
        let d = &*self.0;
        let mut v = 0u64;
        for &c in digits[..d.k].iter().rev() {
            v = if d.bits == 64 { c } else { (v << d.bits) | c };
        }
        Fe(v)
    }

    /// Sum.
    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        let p = self.0.p;
        if self.0.k == 1 {
            let s = a.0 + b.0;
            return Fe(if s >= p { s - p } else { s });
        }
        let (mut x, mut y) = ([0u64; MAX_DIGITS], [0u64; MAX_DIGITS]);
        self.unpack(a, &mut x);
        self.unpack(b, &mut y);
        for i in 0..self.0.k {
            let s = x[i] + y[i];
            x[i] = if s >= p { s - p } else { s };
        }
        self.pack(&x)
    }

    /// Negation.
    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        let p = self.0.p;
        if self.0.k == 1 {
            return Fe(if a.0 == 0 { 0 } else { p - a.0 });
        }
        let mut x = [0u64; MAX_DIGITS];
        self.unpack(a, &mut x);
        for c in x.iter_mut().take(self.0.k) {
            if *c != 0 {
                *c = p - *c;
            }
        }
        self.pack(&x)
    }

    /// Difference.
    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    /// Product.
    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        let d = &*self.0;
        if d.k == 1 {
            return Fe(a.0 * b.0 % d.p);
        }
        if a.0 < d.p && b.0 < d.p {
            return Fe(a.0 * b.0 % d.p);
        }
        let (mut x, mut y) = ([0u64; MAX_DIGITS], [0u64; MAX_DIGITS]);
        self.unpack(a, &mut x);
        self.unpack(b, &mut y);
        if b.0 < d.p {
            for c in x.iter_mut().take(d.k) {
                *c = *c * b.0 % d.p;
            }
            return self.pack(&x);
        }
        if a.0 < d.p {
            for c in y.iter_mut().take(d.k) {
                *c = *c * a.0 % d.p;
            }
            return self.pack(&y);
        }
        let k = d.k;
        let mut prod = [0u64; 2 * MAX_DIGITS];
        for i in 0..k {
            if x[i] == 0 {
                continue;
            }
            for j in 0..k {
                prod[i + j] = (prod[i + j] + x[i] * y[j]) % d.p;
            }
        }
        // Reduce by t^k = -(c_0 + ... + c_{k-1} t^{k-1}).
        for top in (k..2 * k - 1).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for (j, &m) in d.modulus.iter().enumerate() {
                let idx = top - k + j;
                prod[idx] = (prod[idx] + (d.p - m) * c) % d.p;
            }
        }
        self.pack(&prod[..k])
    }

    /// Power by a non-negative exponent (square and multiply).
    pub fn pow(&self, a: Fe, mut e: u64) -> Fe {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Power by a signed exponent; negative exponents invert first.
    pub fn pow_i64(&self, a: Fe, e: i64) -> Result<Fe> {
        if e >= 0 {
            Ok(self.pow(a, e as u64))
        } else {
            Ok(self.pow(self.inv(a)?, e.unsigned_abs()))
        }
    }

    /// Multiplicative inverse.
    pub fn inv(&self, a: Fe) -> Result<Fe> {
        if a.is_zero() {
            return Err(KzError::ZeroInverse);
        }
        if self.0.k == 1 || a.0 < self.0.p {
            return Ok(Fe(inv_mod(a.0, self.0.p)));
        }
        Ok(self.pow(a, self.0.order - 2))
    }

    /// Quotient `a / b`.
    pub fn div(&self, a: Fe, b: Fe) -> Result<Fe> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// The absolute Frobenius `a -> a^p`.
    pub fn frobenius(&self, a: Fe) -> Fe {
        if self.0.k == 1 || a.0 < self.0.p {
            return a;
        }
        self.pow(a, self.0.p)
    }

    /// Uniformly random element.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        let mut digits = [0u64; MAX_DIGITS];
        for d in digits.iter_mut().take(self.0.k) {
            *d = rng.gen_range(0..self.0.p);
        }
        self.pack(&digits)
    }

    /// Uniformly random nonzero element.
    pub fn random_nonzero<R: Rng + ?Sized>(&self, rng: &mut R) -> Fe {
        loop {
            let a = self.random(rng);
            if !a.is_zero() {
                return a;
            }
        }
    }

    /// Canonical string: a decimal residue in the prime field, otherwise a polynomial
    /// in `t` with descending powers such as `4t+4` or `t^2+3`.
    pub fn format(&self, a: Fe) -> String {
        if self.0.k == 1 {
            return a.0.to_string();
        }
        let c = self.coeffs(a);
        let mut parts = Vec::new();
        for i in (0..c.len()).rev() {
            if c[i] == 0 {
                continue;
            }
            let coef = if c[i] == 1 && i > 0 { String::new() } else { c[i].to_string() };
            let var = match i {
                0 => String::new(),
                1 => "t".to_string(),
                _ => format!("t^{i}"),
            };
            parts.push(format!("{coef}{var}"));
        }
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join("+")
        }
    }

    /// Parses the canonical string produced by [`Field::format`]; also accepts signed integers.
    pub fn parse(&self, s: &str) -> Result<Fe> {
        let s = s.trim();
        if let Ok(v) = s.parse::<i64>() {
            return Ok(self.from_i64(v));
        }
        let bad = || KzError::InvalidConfig(format!("cannot parse field element {s:?}"));
        let mut coeffs = vec![0u64; self.0.k.max(1)];
        for term in s.split('+') {
            let term = term.trim();
            let (coef, power) = match term.find('t') {
                None => (term.parse::<u64>().map_err(|_| bad())?, 0usize),
                Some(pos) => {
                    let coef = if pos == 0 { 1 } else { term[..pos].parse::<u64>().map_err(|_| bad())? };
                    let rest = &term[pos + 1..];
                    let power = if rest.is_empty() {
                        1
                    } else {
                        rest.strip_prefix('^').ok_or_else(bad)?.parse::<usize>().map_err(|_| bad())?
                    };
                    (coef, power)
                }
            };
            if power >= coeffs.len() {
                coeffs.resize(power + 1, 0);
            }
            coeffs[power] = (coeffs[power] + coef) % self.0.p;
        }
        Ok(self.from_coeffs(&coeffs))
    }

    /// Wraps a raw value into a self-describing element.
    pub fn elem(&self, v: Fe) -> FieldElement {
        FieldElement { field: self.clone(), value: v }
    }
}

fn monic_with_low(low: &[u64]) -> Vec<Fe> {
    let mut f: Vec<Fe> = low.iter().map(|&c| Fe(c)).collect();
    f.push(Fe::ONE);
    f
}

/// Inverse of `a` modulo the prime `p` by the extended Euclidean algorithm.
pub fn inv_mod(a: u64, p: u64) -> u64 {
    let (mut t, mut new_t) = (0i64, 1i64);
    let (mut r, mut new_r) = (p as i64, (a % p) as i64);
    while new_r != 0 {
        let q = r / new_r;
        (t, new_t) = (new_t, t - q * new_t);
        (r, new_r) = (new_r, r - q * new_r);
    }
    t.rem_euclid(p as i64) as u64
}

/// Builds `F_{p^k}` with the deterministic lexicographically smallest modulus.
pub fn build_extension(p: u64, k: usize) -> Result<Field> {
    Field::extension(p, k)
}

/// A field embedding `F_{p^k} -> F_{p^m}` for `k | m`, sending the generator of the
/// source to the smallest root of its modulus in the target.
#[derive(Clone, Debug)]
pub struct Embedding {
    source: Field,
    target: Field,
    image: Fe,
}

impl Embedding {
    /// The embedding of `source` into `target`.
    pub fn new(source: &Field, target: &Field) -> Result<Embedding> {
        if source.p() != target.p() || target.degree() % source.degree() != 0 {
            return Err(KzError::FieldMismatch);
        }
        if source.is_prime_field() {
            return Ok(Embedding { source: source.clone(), target: target.clone(), image: Fe::ZERO });
        }
        let modulus = monic_with_low(source.modulus());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x656d_6264);
        let roots = upoly::roots(target, &modulus, &mut rng)?;
        let image = *roots.first().ok_or(KzError::FieldMismatch)?;
        Ok(Embedding { source: source.clone(), target: target.clone(), image })
    }

    /// The source field.
    pub fn source(&self) -> &Field {
        &self.source
    }

    /// The target field.
    pub fn target(&self) -> &Field {
        &self.target
    }

    /// Image of an element of the source.
    pub fn apply(&self, a: Fe) -> Fe {
        if self.source.is_prime_field() {
            return a;
        }
        let t = &self.target;
        self.source.coeffs(a).iter().rev().fold(Fe::ZERO, |acc, &c| t.add(t.mul(acc, self.image), t.from_u64(c)))
    }
}

/// An element together with its field.
///
/// Binary operators panic when the operands belong to different fields; the
/// `try_*` methods report [`KzError::FieldMismatch`] instead.
#[derive(Clone, PartialEq, Eq)]
pub struct FieldElement {
    field: Field,
    value: Fe,
}

impl FieldElement {
    /// The parent field.
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// The packed value.
    pub fn value(&self) -> Fe {
        self.value
    }

    /// Returns `true` for zero.
    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    fn same_field(&self, other: &FieldElement) -> Result<()> {
        if Arc::ptr_eq(&self.field.0, &other.field.0) || self.field == other.field {
            Ok(())
        } else {
            Err(KzError::FieldMismatch)
        }
    }

    /// Checked sum.
    pub fn try_add(&self, other: &FieldElement) -> Result<FieldElement> {
        self.same_field(other)?;
        Ok(self.field.elem(self.field.add(self.value, other.value)))
    }

    /// Checked difference.
    pub fn try_sub(&self, other: &FieldElement) -> Result<FieldElement> {
        self.same_field(other)?;
        Ok(self.field.elem(self.field.sub(self.value, other.value)))
    }

    /// Checked product.
    pub fn try_mul(&self, other: &FieldElement) -> Result<FieldElement> {
        self.same_field(other)?;
        Ok(self.field.elem(self.field.mul(self.value, other.value)))
    }

    /// Checked quotient.
    pub fn try_div(&self, other: &FieldElement) -> Result<FieldElement> {
        self.same_field(other)?;
        Ok(self.field.elem(self.field.div(self.value, other.value)?))
    }

    /// Multiplicative inverse.
    pub fn inv(&self) -> Result<FieldElement> {
        Ok(self.field.elem(self.field.inv(self.value)?))
    }

    /// Power.
    pub fn pow(&self, e: u64) -> FieldElement {
        self.field.elem(self.field.pow(self.value, e))
    }

    /// The absolute Frobenius `a^p`.
    pub fn frobenius(&self) -> FieldElement {
        self.field.elem(self.field.frobenius(self.value))
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.field.format(self.value))
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in {:?}", self.field.format(self.value), self.field)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $checked:ident) => {
        impl $tr for &FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: &FieldElement) -> FieldElement {
                self.$checked(rhs).expect("field element operation")
            }
        }
        impl $tr for FieldElement {
            type Output = FieldElement;
            fn $method(self, rhs: FieldElement) -> FieldElement {
                (&self).$checked(&rhs).expect("field element operation")
            }
        }
    };
}

binop!(Add, add, try_add);
binop!(Sub, sub, try_sub);
binop!(Mul, mul, try_mul);
binop!(Div, div, try_div);

impl Neg for &FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        self.field.elem(self.field.neg(self.value))
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inverse_in_f7() {
        let f = Field::prime(7).unwrap();
        assert_eq!(f.inv(f.from_u64(3)).unwrap(), f.from_u64(5));
        assert_eq!(f.inv(f.one()).unwrap(), f.one());
        assert_eq!(f.inv(f.zero()), Err(KzError::ZeroInverse));
    }

    #[test]
    fn inverse_of_t_in_f25() {
        let f = Field::with_modulus(5, &[1, 1]).unwrap();
        let t = f.generator();
        let expected = f.from_coeffs(&[4, 4]);
        // Oracle: t * (4t + 4) = 4t^2 + 4t = 4(-t - 1) + 4t = -4 = 1.
        assert_eq!(f.mul(t, expected), f.one());
        assert_eq!(f.inv(t).unwrap(), expected);
        assert_eq!(f.format(expected), "4t+4");
    }

    #[test]
    fn frobenius_examples() {
        let f7 = Field::prime(7).unwrap();
        assert_eq!(f7.frobenius(f7.from_u64(4)), f7.from_u64(4));
        assert_eq!(f7.frobenius(Fe::ZERO), Fe::ZERO);
        let f = Field::with_modulus(5, &[1, 1]).unwrap();
        let t = f.generator();
        let mut t5 = f.one();
        for _ in 0..5 {
            t5 = f.mul(t5, t);
        }
        assert_eq!(f.frobenius(t), t5);
        // The conjugate of a root of t^2+t+1 is the other root -1-t.
        assert_eq!(f.frobenius(t), f.from_coeffs(&[4, 4]));
    }

    #[test]
    fn build_extension_is_lexicographically_smallest() {
        let f1 = build_extension(5, 1).unwrap();
        assert_eq!(f1.modulus(), &[0]);
        assert!(f1.is_prime_field());
        let f2 = build_extension(5, 2).unwrap();
        // Oracle: scan all monic quadratics in lexicographic order of (c0, c1) for roots.
        let mut first = None;
        'scan: for c0 in 0..5u64 {
            for c1 in 0..5u64 {
                let has_root = (0..5u64).any(|x| (x * x + c1 * x + c0) % 5 == 0);
                if !has_root {
                    first = Some(vec![c0, c1]);
                    break 'scan;
                }
            }
        }
        assert_eq!(f2.modulus(), first.unwrap().as_slice());
        assert_eq!(build_extension(4, 2).unwrap_err(), KzError::NotPrime(4));
        assert_eq!(Field::prime(6).unwrap_err(), KzError::NotPrime(6));
    }

    #[test]
    fn reducible_modulus_is_rejected() {
        // t^2 + 1 = (t - 2)(t + 2) over F_5.
        assert_eq!(Field::with_modulus(5, &[1, 0]).unwrap_err(), KzError::NotIrreducible(2));
    }

    #[test]
    fn parse_roundtrip() {
        let f = build_extension(13, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a = f.random(&mut rng);
            assert_eq!(f.parse(&f.format(a)).unwrap(), a);
        }
        assert_eq!(f.parse("-1").unwrap(), f.from_i64(-1));
    }

    #[test]
    fn field_element_mismatch() {
        let a = Field::prime(5).unwrap().elem(Fe(2));
        let b = Field::prime(7).unwrap().elem(Fe(2));
        assert_eq!(a.try_add(&b).unwrap_err(), KzError::FieldMismatch);
        let c = Field::prime(5).unwrap().elem(Fe(4));
        assert_eq!((&a * &c).value(), Fe(3));
        assert_eq!((-&a).value(), Fe(3));
    }

    #[test]
    fn prime_subfield_predicate() {
        let f = build_extension(7, 2).unwrap();
        for v in 0..7 {
            assert!(f.in_prime_subfield(f.from_u64(v)));
        }
        assert!(!f.in_prime_subfield(f.generator()));
    }

    #[test]
    fn embedding_is_a_ring_map() {
        let small = build_extension(5, 2).unwrap();
        let big = build_extension(5, 4).unwrap();
        let e = Embedding::new(&small, &big).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (a, b) = (small.random(&mut rng), small.random(&mut rng));
            assert_eq!(e.apply(small.mul(a, b)), big.mul(e.apply(a), e.apply(b)));
            assert_eq!(e.apply(small.add(a, b)), big.add(e.apply(a), e.apply(b)));
        }
        assert_eq!(e.apply(small.from_u64(3)), big.from_u64(3));
        assert!(Embedding::new(&big, &build_extension(5, 3).unwrap()).is_err());
    }
}
