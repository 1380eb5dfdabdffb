//! Sparse multivariate polynomials in `z_1..z_n`, dense layers in a distinguished
//! variable `x`, and truncated one-variable jets.
//!
//! Monomials are packed into a single `u128`: the top 16 bits hold the total degree
//! and each of at most [`MAX_VARS`] exponents occupies 14 bits, `z_1` most
//! significant. Integer order on the packed key is therefore graded-lexicographic,
//! which is the canonical term order.

use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use serde_json::{json, Value};

use crate::error::{KzError, Result};
use crate::fields::{Fe, Field};

/// Maximal number of variables of a [`ZPolynomial`].
pub const MAX_VARS: usize = 8;
/// Largest exponent of a single variable.
pub const MAX_EXP: u32 = (1 << EXP_BITS) - 1;
/// Largest total degree of a monomial.
pub const MAX_DEGREE: u32 = u16::MAX as u32;

const EXP_BITS: u32 = 14;
const DEG_SHIFT: u32 = 112;

/// A packed monomial `z^e`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mono(u128);

impl Mono {
    /// The constant monomial `1`.
    pub const ONE: Mono = Mono(0);

    #[inline]
    fn shift(i: usize) -> u32 {
        DEG_SHIFT - EXP_BITS * (i as u32 + 1)
    }

    /// Packs an exponent vector; panics if an exponent exceeds [`MAX_EXP`] or there are too many entries.
    pub fn new(e: &[u32]) -> Mono {
        assert!(e.len() <= MAX_VARS, "too many variables");
        let mut bits = 0u128;
        let mut deg = 0u32;
        for (i, &x) in e.iter().enumerate() {
            assert!(x <= MAX_EXP, "exponent {x} too large");
            bits |= (x as u128) << Self::shift(i);
            deg += x;
        }
        assert!(deg <= MAX_DEGREE, "degree {deg} too large");
        Mono(bits | ((deg as u128) << DEG_SHIFT))
    }

    /// The monomial `z_i^k`.
    pub fn var_pow(i: usize, k: u32) -> Mono {
        assert!(i < MAX_VARS && k <= MAX_EXP);
        Mono(((k as u128) << Self::shift(i)) | ((k as u128) << DEG_SHIFT))
    }

    /// Total degree.
    #[inline]
    pub fn degree(self) -> u32 {
        (self.0 >> DEG_SHIFT) as u32
    }

    /// Exponent of variable `i` (0-based).
    #[inline]
    pub fn exp(self, i: usize) -> u32 {
        ((self.0 >> Self::shift(i)) as u32) & MAX_EXP
    }

    /// Exponent vector of length `n`.
    pub fn exps(self, n: usize) -> Vec<u32> {
        (0..n).map(|i| self.exp(i)).collect()
    }

    /// Product of monomials (caller guarantees no exponent overflow).
    #[inline]
    pub fn mul(self, other: Mono) -> Mono {
        Mono(self.0 + other.0)
    }

    /// Quotient by `z_i` (caller guarantees the exponent is positive).
    #[inline]
    pub fn div_var(self, i: usize) -> Mono {
        Mono(self.0 - (1u128 << Self::shift(i)) - (1u128 << DEG_SHIFT))
    }

    /// Raw packed key.
    pub fn raw(self) -> u128 {
        self.0
    }
}

/// Fast multiplicative hasher for packed keys.
#[derive(Default, Clone, Copy)]
pub struct KeyHasher(u64);

impl Hasher for KeyHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 = (self.0.rotate_left(5) ^ b as u64).wrapping_mul(0x51_7c_c1_b7_27_22_0a_95);
        }
    }
    fn write_u128(&mut self, v: u128) {
        let x = (v as u64) ^ ((v >> 64) as u64).rotate_left(29);
        self.0 = (x ^ (x >> 31)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 ^= self.0 >> 29;
    }
    fn write_u64(&mut self, v: u64) {
        self.0 = (v ^ (v >> 31)).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.0 ^= self.0 >> 29;
    }
}

/// Hash map keyed by packed monomials.
pub type MonoMap<V> = HashMap<Mono, V, BuildHasherDefault<KeyHasher>>;

/// A multivariate polynomial in `z_1..z_n` over a field, terms sorted graded-lexicographically.
#[derive(Clone, PartialEq, Eq)]
pub struct ZPolynomial {
    field: Field,
    n: usize,
    terms: Vec<(Mono, Fe)>,
}

impl std::fmt::Debug for ZPolynomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl ZPolynomial {
    /// The zero polynomial in `n` variables.
    pub fn zero(field: &Field, n: usize) -> ZPolynomial {
        assert!(n <= MAX_VARS, "too many variables");
        ZPolynomial { field: field.clone(), n, terms: Vec::new() }
    }

    /// A constant.
    pub fn constant(field: &Field, n: usize, c: Fe) -> ZPolynomial {
        let mut p = Self::zero(field, n);
        if !c.is_zero() {
            p.terms.push((Mono::ONE, c));
        }
        p
    }

    /// The single term `c z^m`.
    pub fn term(field: &Field, n: usize, m: Mono, c: Fe) -> ZPolynomial {
        let mut p = Self::zero(field, n);
        if !c.is_zero() {
            p.terms.push((m, c));
        }
        p
    }

    /// The variable `z_i` (0-based index).
    pub fn var(field: &Field, n: usize, i: usize) -> ZPolynomial {
        assert!(i < n);
        Self::term(field, n, Mono::var_pow(i, 1), Fe::ONE)
    }

    /// Builds a polynomial from arbitrary (possibly repeated or zero) terms.
    pub fn from_terms(field: &Field, n: usize, terms: Vec<(Mono, Fe)>) -> ZPolynomial {
        let mut terms = terms;
        terms.sort_unstable_by_key(|t| t.0);
        let mut out: Vec<(Mono, Fe)> = Vec::with_capacity(terms.len());
        for (m, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == m => last.1 = field.add(last.1, c),
                _ => out.push((m, c)),
            }
        }
        out.retain(|t| !t.1.is_zero());
        ZPolynomial { field: field.clone(), n, terms: out }
    }

    /// Builds from exponent vectors and coefficients.
    pub fn from_exps(field: &Field, n: usize, terms: &[(Vec<u32>, Fe)]) -> ZPolynomial {
        let t = terms
            .iter()
            .map(|(e, c)| {
                assert_eq!(e.len(), n, "exponent length");
                (Mono::new(e), *c)
            })
            .collect();
        Self::from_terms(field, n, t)
    }

    /// Collects a hash accumulator into a canonical polynomial.
    pub fn from_map(field: &Field, n: usize, map: MonoMap<Fe>) -> ZPolynomial {
        let mut terms: Vec<(Mono, Fe)> = map.into_iter().filter(|t| !t.1.is_zero()).collect();
        terms.sort_unstable_by_key(|t| t.0);
        ZPolynomial { field: field.clone(), n, terms }
    }

    /// The coefficient field.
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Number of variables.
    pub fn nvars(&self) -> usize {
        self.n
    }

    /// Terms in canonical (ascending graded-lex) order.
    pub fn terms(&self) -> &[(Mono, Fe)] {
        &self.terms
    }

    /// Number of nonzero terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    /// Returns `true` for the zero polynomial.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Returns `true` when there are no terms (the zero polynomial).
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a monomial.
    pub fn coeff(&self, m: Mono) -> Fe {
        self.terms.binary_search_by_key(&m, |t| t.0).map_or(Fe::ZERO, |i| self.terms[i].1)
    }

    fn compatible(&self, other: &ZPolynomial) -> Result<()> {
        if self.field != other.field {
            return Err(KzError::FieldMismatch);
        }
        if self.n != other.n {
            return Err(KzError::LengthMismatch(self.n, other.n));
        }
        Ok(())
    }

    /// Linear combination `self + c * other` by a sorted merge.
    pub fn add_scaled(&self, other: &ZPolynomial, c: Fe) -> ZPolynomial {
        self.compatible(other).expect("compatible polynomials");
        let k = &self.field;
        if c.is_zero() || other.is_zero() {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.terms.len() + other.terms.len());
        let (a, b) = (&self.terms, &other.terms);
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push((b[j].0, k.mul(c, b[j].1)));
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    let v = k.add(a[i].1, k.mul(c, b[j].1));
                    if !v.is_zero() {
                        out.push((a[i].0, v));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend(b[j..].iter().map(|&(m, v)| (m, k.mul(c, v))));
        ZPolynomial { field: self.field.clone(), n: self.n, terms: out }
    }

    /// Sum.
    pub fn add(&self, other: &ZPolynomial) -> ZPolynomial {
        self.add_scaled(other, Fe::ONE)
    }

    /// Difference.
    pub fn sub(&self, other: &ZPolynomial) -> ZPolynomial {
        self.add_scaled(other, self.field.neg(Fe::ONE))
    }

    /// Negation.
    pub fn neg(&self) -> ZPolynomial {
        self.scale(self.field.neg(Fe::ONE))
    }

    /// Multiplication by a scalar.
    pub fn scale(&self, c: Fe) -> ZPolynomial {
        if c.is_zero() {
            return Self::zero(&self.field, self.n);
        }
        let k = &self.field;
        let terms = self.terms.iter().map(|&(m, v)| (m, k.mul(v, c))).collect();
        ZPolynomial { field: self.field.clone(), n: self.n, terms }
    }

    /// Multiplication by the single term `c z^m` (preserves term order).
    pub fn mul_term(&self, m: Mono, c: Fe) -> ZPolynomial {
        if c.is_zero() {
            return Self::zero(&self.field, self.n);
        }
        self.check_exponent_room(&[(m, c)]).expect("exponent overflow");
        let k = &self.field;
        let terms = self.terms.iter().map(|&(t, v)| (t.mul(m), k.mul(v, c))).collect();
        ZPolynomial { field: self.field.clone(), n: self.n, terms }
    }

    pub(crate) fn max_exps(terms: &[(Mono, Fe)], n: usize) -> Vec<u32> {
        let mut mx = vec![0u32; n];
        for (m, _) in terms {
            for (i, x) in mx.iter_mut().enumerate() {
                *x = (*x).max(m.exp(i));
            }
        }
        mx
    }

    fn check_exponent_room(&self, other: &[(Mono, Fe)]) -> Result<()> {
        let a = Self::max_exps(&self.terms, self.n);
        let b = Self::max_exps(other, self.n);
        let da = self.terms.iter().map(|t| t.0.degree()).max().unwrap_or(0);
        let db = other.iter().map(|t| t.0.degree()).max().unwrap_or(0);
        if a.iter().zip(&b).any(|(x, y)| x + y > MAX_EXP) || da + db > MAX_DEGREE {
            return Err(KzError::DegreeGuard((da + db) as u64));
        }
        Ok(())
    }

    /// Exact product.
    pub fn pmul(&self, other: &ZPolynomial) -> Result<ZPolynomial> {
        self.compatible(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(&self.field, self.n));
        }
        self.check_exponent_room(&other.terms)?;
        let (small, big) = if self.len() <= other.len() { (self, other) } else { (other, self) };
        if small.len() == 1 {
            let (m, c) = small.terms[0];
            return Ok(big.mul_term(m, c));
        }
        let k = &self.field;
        let mut acc: MonoMap<Fe> = MonoMap::default();
        acc.reserve(big.len() * 2);
        for &(ma, ca) in &small.terms {
            for &(mb, cb) in &big.terms {
                let e = acc.entry(ma.mul(mb)).or_insert(Fe::ZERO);
                *e = k.add(*e, k.mul(ca, cb));
            }
        }
        Ok(Self::from_map(&self.field, self.n, acc))
    }

    /// Formal partial derivative in `z_i` (1-based index); terms whose exponent is
    /// divisible by the characteristic vanish.
    pub fn partial(&self, i: usize) -> Result<ZPolynomial> {
        if i == 0 || i > self.n {
            return Err(KzError::IndexOutOfRange { index: i, min: 1, max: self.n });
        }
        Ok(self.partial0(i - 1))
    }

    /// Partial derivative in the 0-based variable `i`.
    pub fn partial0(&self, i: usize) -> ZPolynomial {
        let k = &self.field;
        let terms: Vec<(Mono, Fe)> = self
            .terms
            .iter()
            .filter_map(|&(m, c)| {
                let e = m.exp(i);
                let f = k.from_u64(e as u64);
                if f.is_zero() {
                    None
                } else {
                    Some((m.div_var(i), k.mul(c, f)))
                }
            })
            .collect();
        // Subtracting the same exponent vector from every term preserves graded-lex order.
        debug_assert!(terms.windows(2).all(|w| w[0].0 < w[1].0));
        ZPolynomial { field: self.field.clone(), n: self.n, terms }
    }

    /// Evaluation at a point.
    pub fn evaluate(&self, point: &[Fe]) -> Result<Fe> {
        self.evaluate_in(&self.field, point)
    }

    /// Evaluation at a point whose coordinates live in `k`, which must be the
    /// coefficient field or share its characteristic when all coefficients lie in
    /// the prime subfield.
    pub fn evaluate_in(&self, k: &Field, point: &[Fe]) -> Result<Fe> {
        if point.len() != self.n {
            return Err(KzError::LengthMismatch(point.len(), self.n));
        }
        if k != &self.field
            && (k.p() != self.field.p() || self.terms.iter().any(|t| self.field.prime_lift(t.1).is_none()))
        {
            return Err(KzError::FieldMismatch);
        }
        let mut powers: Vec<Vec<Fe>> = Vec::with_capacity(self.n);
        for (i, &a) in point.iter().enumerate() {
            let top = self.terms.iter().map(|t| t.0.exp(i)).max().unwrap_or(0) as usize;
            let mut pw = Vec::with_capacity(top + 1);
            let mut cur = Fe::ONE;
            for _ in 0..=top {
                pw.push(cur);
                cur = k.mul(cur, a);
            }
            powers.push(pw);
        }
        let mut acc = Fe::ZERO;
        for &(m, c) in &self.terms {
            let mut v = c;
            for (i, pw) in powers.iter().enumerate() {
                v = k.mul(v, pw[m.exp(i) as usize]);
            }
            acc = k.add(acc, v);
        }
        Ok(acc)
    }

    /// Maximal total degree (`None` for zero).
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.last().map(|t| t.0.degree())
    }

    /// Returns `Some(d)` when every term has total degree `d`; `None` for zero or mixed degrees.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let d = self.terms.first()?.0.degree();
        self.terms.iter().all(|t| t.0.degree() == d).then_some(d)
    }

    /// Maximal exponent of the 0-based variable `i`.
    pub fn degree_in(&self, i: usize) -> u32 {
        self.terms.iter().map(|t| t.0.exp(i)).max().unwrap_or(0)
    }

    /// Substitutes `z = a + w` and returns the polynomial in `w`.
    pub fn translate(&self, a: &[Fe]) -> ZPolynomial {
        self.shift(a, None)
    }

    /// The terms of total degree `< bound` of `self(a + w)`, as a polynomial in `w`.
    pub fn translate_below(&self, a: &[Fe], bound: u32) -> ZPolynomial {
        self.shift(a, Some(bound))
    }

    /// Taylor shift one variable at a time. Terms whose already-shifted degree
    /// reaches `bound` can only produce terms of degree `>= bound` and are dropped.
    fn shift(&self, a: &[Fe], bound: Option<u32>) -> ZPolynomial {
        assert_eq!(a.len(), self.n);
        let k = &self.field;
        let maxe = Self::max_exps(&self.terms, self.n);
        let mut current: Vec<(Mono, Fe)> = self.terms.clone();
        for i in 0..self.n {
            if maxe[i] == 0 {
                continue;
            }
            // rows[e][j] = C(e, j) a_i^(e - j).
            let mut rows: Vec<Vec<Fe>> = vec![vec![Fe::ONE]];
            for e in 1..=maxe[i] as usize {
                let prev = &rows[e - 1];
                let mut next = vec![Fe::ZERO; e + 1];
                for (j, &c) in prev.iter().enumerate() {
                    next[j] = k.add(next[j], k.mul(c, a[i]));
                    next[j + 1] = k.add(next[j + 1], c);
                }
                rows.push(next);
            }
            let mut acc: MonoMap<Fe> = MonoMap::default();
            acc.reserve(current.len());
            for &(m, c) in &current {
                let e = m.exp(i);
                let done: u32 = (0..i).map(|v| m.exp(v)).sum();
                let base = Mono(m.0 - Mono::var_pow(i, e).0);
                for (j, &b) in rows[e as usize].iter().enumerate() {
                    if bound.is_some_and(|d| done + j as u32 >= d) {
                        break;
                    }
                    if b.is_zero() {
                        continue;
                    }
                    let slot = acc.entry(base.mul(Mono::var_pow(i, j as u32))).or_insert(Fe::ZERO);
                    *slot = k.add(*slot, k.mul(c, b));
                }
            }
            current = acc.into_iter().filter(|t| !t.1.is_zero()).collect();
        }
        if let Some(d) = bound {
            current.retain(|t| t.0.degree() < d);
        }
        Self::from_terms(k, self.n, current)
    }

    /// Substitutes the constant `c` for the variable `i` (0-based); the variable remains
    /// in the ring with exponent zero.
    pub fn specialize(&self, i: usize, c: Fe) -> ZPolynomial {
        let k = &self.field;
        let mut acc: MonoMap<Fe> = MonoMap::default();
        for &(m, v) in &self.terms {
            let e = m.exp(i);
            let base = Mono(m.0 - Mono::var_pow(i, e).0);
            let slot = acc.entry(base).or_insert(Fe::ZERO);
            *slot = k.add(*slot, k.mul(v, k.pow(c, e as u64)));
        }
        Self::from_map(k, self.n, acc)
    }

    /// The same polynomial over another field of the same characteristic.
    ///
    /// Errors with [`KzError::FieldMismatch`] unless the fields coincide or every
    /// coefficient lies in the prime field.
    pub fn in_field(&self, field: &Field) -> Result<ZPolynomial> {
        if field == &self.field {
            return Ok(self.clone());
        }
        if field.p() != self.field.p() || self.terms.iter().any(|t| self.field.prime_lift(t.1).is_none()) {
            return Err(KzError::FieldMismatch);
        }
        Ok(ZPolynomial { field: field.clone(), n: self.n, terms: self.terms.clone() })
    }

    /// Keeps the terms of total degree `< bound`.
    pub fn truncate_degree(&self, bound: u32) -> ZPolynomial {
        let terms = self.terms.iter().copied().filter(|t| t.0.degree() < bound).collect();
        ZPolynomial { field: self.field.clone(), n: self.n, terms }
    }

    /// The polynomial JSON form `{"n": .., "terms": [{"c": .., "e": [..]}]}` in canonical order.
    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|&(m, c)| json!({"e": m.exps(self.n), "c": self.field.format(c)}))
            .collect();
        json!({"n": self.n, "terms": terms})
    }

    /// Parses the polynomial JSON form.
    pub fn from_json(field: &Field, v: &Value) -> Result<ZPolynomial> {
        let bad = |what: &str| KzError::InvalidConfig(format!("polynomial JSON: {what}"));
        let n = v.get("n").and_then(Value::as_u64).ok_or_else(|| bad("missing n"))? as usize;
        if n > MAX_VARS {
            return Err(KzError::TooManyVariables(n));
        }
        let mut terms = Vec::new();
        for t in v.get("terms").and_then(Value::as_array).ok_or_else(|| bad("missing terms"))? {
            let e: Vec<u32> = t
                .get("e")
                .and_then(Value::as_array)
                .ok_or_else(|| bad("missing e"))?
                .iter()
                .map(|x| x.as_u64().map(|x| x as u32).ok_or_else(|| bad("bad exponent")))
                .collect::<Result<_>>()?;
            if e.len() != n {
                return Err(bad("exponent length"));
            }
            let c = field.parse(t.get("c").and_then(Value::as_str).ok_or_else(|| bad("missing c"))?)?;
            terms.push((Mono::new(&e), c));
        }
        Ok(Self::from_terms(field, n, terms))
    }
}

/// A dense polynomial (or truncated series) in `x` with [`ZPolynomial`] coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct XSeries {
    field: Field,
    n: usize,
    coeffs: Vec<ZPolynomial>,
    precision: Option<usize>,
}

impl XSeries {
    /// The exact polynomial with the given coefficients (trailing zeros trimmed).
    pub fn new(field: &Field, n: usize, coeffs: Vec<ZPolynomial>) -> XSeries {
        let mut s = XSeries { field: field.clone(), n, coeffs, precision: None };
        s.trim();
        s
    }

    /// A series truncated at `x^precision`.
    pub fn truncated(field: &Field, n: usize, mut coeffs: Vec<ZPolynomial>, precision: usize) -> XSeries {
        coeffs.truncate(precision);
        XSeries { field: field.clone(), n, coeffs, precision: Some(precision) }
    }

    fn trim(&mut self) {
        if self.precision.is_none() {
            while self.coeffs.last().is_some_and(ZPolynomial::is_zero) {
                self.coeffs.pop();
            }
        }
    }

    /// Coefficient of `x^i` (zero beyond the stored range).
    pub fn coeff(&self, i: usize) -> ZPolynomial {
        self.coeffs.get(i).cloned().unwrap_or_else(|| ZPolynomial::zero(&self.field, self.n))
    }

    /// Borrowed coefficient list.
    pub fn coeffs(&self) -> &[ZPolynomial] {
        &self.coeffs
    }

    /// Truncation order, if any.
    pub fn precision(&self) -> Option<usize> {
        self.precision
    }

    /// Degree in `x` (`None` for zero).
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|c| !c.is_zero())
    }

    /// Product (truncated to the smaller precision when either factor is truncated).
    pub fn mul(&self, other: &XSeries) -> Result<XSeries> {
        let precision = match (self.precision, other.precision) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let len = self.coeffs.len() + other.coeffs.len();
        let len = precision.map_or(len.saturating_sub(1), |p| p.min(len.saturating_sub(1)));
        let mut out: Vec<ZPolynomial> = vec![ZPolynomial::zero(&self.field, self.n); len];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if i + j >= len || b.is_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&a.pmul(b)?);
            }
        }
        let mut s = XSeries { field: self.field.clone(), n: self.n, coeffs: out, precision };
        s.trim();
        Ok(s)
    }

    /// The `m`-th derivative in `x`.
    pub fn derivative(&self, m: usize) -> XSeries {
        let k = &self.field;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(m)
            .map(|(i, c)| {
                let f = (0..m as u64).fold(Fe::ONE, |acc, t| k.mul(acc, k.from_u64(i as u64 - t)));
                c.scale(f)
            })
            .collect();
        let mut s = XSeries {
            field: self.field.clone(),
            n: self.n,
            coeffs,
            precision: self.precision.map(|p| p.saturating_sub(m)),
        };
        s.trim();
        s
    }

    /// Scalar multiple.
    pub fn scale(&self, c: Fe) -> XSeries {
        let coeffs = self.coeffs.iter().map(|p| p.scale(c)).collect();
        let mut s = XSeries { field: self.field.clone(), n: self.n, coeffs, precision: self.precision };
        s.trim();
        s
    }
}

/// Binomial coefficients `C(m, 0..=m)` reduced into the field.
pub fn binomial_row(k: &Field, m: u64) -> Vec<Fe> {
    // Lucas-free computation: build Pascal's row modulo p.
    let mut row = vec![Fe::ONE];
    for _ in 0..m {
        let mut next = vec![Fe::ONE; row.len() + 1];
        for j in 1..row.len() {
            next[j] = k.add(row[j - 1], row[j]);
        }
        row = next;
    }
    row
}

/// The power `P(x, z)^h` of the master polynomial `P = prod_s (x - z_s)`, as an
/// [`XSeries`] of exact degree `n h` with monic leading coefficient.
///
/// Built by multiplying the binomial expansions of `(x - z_s)^h` one factor at a time.
pub fn master_power(field: &Field, n: usize, h: u32) -> Result<XSeries> {
    if n > MAX_VARS {
        return Err(KzError::TooManyVariables(n));
    }
    let total = n as u64 * h as u64;
    if total > 20000 {
        return Err(KzError::DegreeGuard(total));
    }
    let binom = binomial_row(field, h as u64);
    let mut acc: Vec<ZPolynomial> = vec![ZPolynomial::constant(field, n, Fe::ONE)];
    for s in 0..n {
        // Factor (x - z_s)^h = sum_b C(h, b) (-z_s)^b x^(h - b).
        let mut next: Vec<Vec<ZPolynomial>> = vec![Vec::new(); acc.len() + h as usize];
        for (i, a) in acc.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (b, &c) in binom.iter().enumerate() {
                let sign = if b % 2 == 0 { c } else { field.neg(c) };
                if sign.is_zero() {
                    continue;
                }
                next[i + h as usize - b].push(a.mul_term(Mono::var_pow(s, b as u32), sign));
            }
        }
        acc = next.into_iter().map(|parts| merge_many(field, n, parts)).collect();
    }
    Ok(XSeries::new(field, n, acc))
}

/// Sum of many polynomials by hash accumulation.
pub fn merge_many(field: &Field, n: usize, parts: Vec<ZPolynomial>) -> ZPolynomial {
    match parts.len() {
        0 => ZPolynomial::zero(field, n),
        1 => parts.into_iter().next().unwrap(),
        2 => parts[0].add(&parts[1]),
        _ => {
            let mut acc: MonoMap<Fe> = MonoMap::default();
            acc.reserve(parts.iter().map(ZPolynomial::len).max().unwrap_or(0) * 2);
            for p in &parts {
                for &(m, c) in p.terms() {
                    let e = acc.entry(m).or_insert(Fe::ZERO);
                    *e = field.add(*e, c);
                }
            }
            ZPolynomial::from_map(field, n, acc)
        }
    }
}

/// Exact `sum_j xs[j] * ys[j]`.
///
/// When all nonzero `xs` are homogeneous of one degree, all nonzero `ys` of another,
/// and every coefficient lies in the prime field, the product is accumulated in a
/// dense array indexed by the exponents of `z_1..z_{n-1}` (the last exponent is then
/// implied by homogeneity). Otherwise it falls back to sparse multiplication.
pub fn dot_product(xs: &[ZPolynomial], ys: &[ZPolynomial]) -> Result<ZPolynomial> {
    if xs.len() != ys.len() {
        return Err(KzError::LengthMismatch(xs.len(), ys.len()));
    }
    let Some(first) = xs.first() else {
        return Err(KzError::LengthMismatch(0, 0));
    };
    let field = first.field().clone();
    let n = first.nvars();
    if let Some(result) = dot_product_dense(&field, n, xs, ys)? {
        return Ok(result);
    }
    let mut acc = ZPolynomial::zero(&field, n);
    for (x, y) in xs.iter().zip(ys) {
        acc = acc.add(&x.pmul(y)?);
    }
    Ok(acc)
}

const DENSE_BOX_LIMIT: u64 = 1 << 24;

fn dot_product_dense(field: &Field, n: usize, xs: &[ZPolynomial], ys: &[ZPolynomial]) -> Result<Option<ZPolynomial>> {
    let p = field.p();
    let common_degree = |ps: &[ZPolynomial]| -> Option<Option<u32>> {
        let mut deg = None;
        for q in ps.iter().filter(|q| !q.is_zero()) {
            let d = q.homogeneous_degree()?;
            if deg.is_some_and(|e| e != d) {
                return None;
            }
            deg = Some(d);
        }
        Some(deg)
    };
    let (Some(dx), Some(dy)) = (common_degree(xs), common_degree(ys)) else { return Ok(None) };
    let (Some(dx), Some(dy)) = (dx, dy) else { return Ok(Some(ZPolynomial::zero(field, n))) };
    let all_prime = xs.iter().chain(ys).all(|q| q.terms().iter().all(|t| t.1.raw() < p));
    if !all_prime || n == 0 {
        return Ok(None);
    }
    let free = n - 1;
    let bx = ZPolynomial::max_exps(&xs.iter().flat_map(|q| q.terms().iter().copied()).collect::<Vec<_>>(), n);
    let by = ZPolynomial::max_exps(&ys.iter().flat_map(|q| q.terms().iter().copied()).collect::<Vec<_>>(), n);
    if (0..n).any(|i| bx[i] + by[i] > MAX_EXP) || dx + dy > MAX_DEGREE {
        return Err(KzError::DegreeGuard((dx + dy) as u64));
    }
    let dims: Vec<u64> = (0..free).map(|i| (bx[i] + by[i] + 1) as u64).collect();
    let size = dims.iter().try_fold(1u64, |acc, &d| acc.checked_mul(d).filter(|&s| s <= DENSE_BOX_LIMIT));
    let Some(size) = size else { return Ok(None) };
    let mut strides = vec![1u64; free];
    for i in (0..free.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let index = |m: Mono| -> usize { (0..free).map(|i| m.exp(i) as u64 * strides[i]).sum::<u64>() as usize };
    let mut acc = vec![0u64; size as usize];
    // Products are below p^2; flush before the running sums could overflow.
    let flush_every = (u64::MAX / ((p - 1) * (p - 1)).max(1)).max(1);
    let mut pending = 0u64;
    for (x, y) in xs.iter().zip(ys) {
        if x.is_zero() || y.is_zero() {
            continue;
        }
        let yi: Vec<(usize, u64)> = y.terms().iter().map(|&(m, c)| (index(m), c.raw())).collect();
        for &(mx, cx) in x.terms() {
            let base = index(mx);
            let cx = cx.raw();
            if pending + yi.len() as u64 > flush_every {
                acc.iter_mut().for_each(|v| *v %= p);
                pending = 0;
            }
            for &(iy, cy) in &yi {
                acc[base + iy] += cx * cy;
            }
            pending += yi.len() as u64;
        }
    }
    let total = dx + dy;
    let mut terms = Vec::new();
    let mut exps = vec![0u32; n];
    for (idx, &v) in acc.iter().enumerate() {
        let v = v % p;
        if v == 0 {
            continue;
        }
        let mut rest = idx as u64;
        let mut s = 0;
        for i in 0..free {
            exps[i] = (rest / strides[i]) as u32;
            rest %= strides[i];
            s += exps[i];
        }
        exps[n - 1] = total - s;
        terms.push((Mono::new(&exps), Fe(v)));
    }
    Ok(Some(ZPolynomial::from_terms(field, n, terms)))
}

/// A point `a` of the configuration space `S` (pairwise distinct coordinates).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPoint {
    coords: Vec<Fe>,
}

impl EvalPoint {
    /// Validates pairwise distinctness.
    pub fn new(coords: Vec<Fe>) -> Result<EvalPoint> {
        for i in 0..coords.len() {
            for j in i + 1..coords.len() {
                if coords[i] == coords[j] {
                    return Err(KzError::PointNotInS(i + 1, j + 1));
                }
            }
        }
        Ok(EvalPoint { coords })
    }

    /// A uniformly random point of `S(F)` by rejection sampling.
    pub fn random<R: rand::Rng + ?Sized>(field: &Field, n: usize, rng: &mut R) -> Result<EvalPoint> {
        if (field.order() as u128) < n as u128 {
            return Err(KzError::Unsupported(format!("{field:?} has fewer than {n} elements")));
        }
        loop {
            let coords: Vec<Fe> = (0..n).map(|_| field.random(rng)).collect();
            if let Ok(p) = EvalPoint::new(coords) {
                return Ok(p);
            }
        }
    }

    /// Coordinates.
    pub fn coords(&self) -> &[Fe] {
        &self.coords
    }

    /// Number of coordinates.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    /// Returns `true` for the empty point.
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Canonical strings of the coordinates.
    pub fn to_json(&self, field: &Field) -> Value {
        Value::Array(self.coords.iter().map(|&c| Value::String(field.format(c))).collect())
    }
}

/// A truncated one-variable jet `sum_{i < precision} c_i t^i` with field coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Jet {
    /// Coefficients, length equal to the precision.
    pub coeffs: Vec<Fe>,
}

impl Jet {
    /// The zero jet of the given precision.
    pub fn zero(precision: usize) -> Jet {
        Jet { coeffs: vec![Fe::ZERO; precision] }
    }

    /// The constant jet `c`.
    pub fn constant(c: Fe, precision: usize) -> Jet {
        let mut j = Jet::zero(precision);
        if precision > 0 {
            j.coeffs[0] = c;
        }
        j
    }

    /// Builds from coefficients, truncating or zero-padding to `precision`.
    pub fn from_coeffs(mut coeffs: Vec<Fe>, precision: usize) -> Jet {
        coeffs.resize(precision, Fe::ZERO);
        Jet { coeffs }
    }

    /// Truncation order.
    pub fn precision(&self) -> usize {
        self.coeffs.len()
    }

    /// Derivative `d/dt`; the top coefficient becomes unknown and is dropped to zero,
    /// which is exact whenever the precision is a multiple of the characteristic.
    pub fn derivative(&self, k: &Field) -> Jet {
        let prec = self.precision();
        let mut out = Jet::zero(prec);
        for i in 1..prec {
            out.coeffs[i - 1] = k.mul(k.from_u64(i as u64), self.coeffs[i]);
        }
        out
    }

    /// Truncated product.
    pub fn mul(&self, k: &Field, other: &Jet) -> Jet {
        let prec = self.precision().min(other.precision());
        let mut out = Jet::zero(prec);
        for i in 0..prec {
            let a = self.coeffs[i];
            if a.is_zero() {
                continue;
            }
            for j in 0..prec - i {
                out.coeffs[i + j] = k.add(out.coeffs[i + j], k.mul(a, other.coeffs[j]));
            }
        }
        out
    }

    /// Sum.
    pub fn add(&self, k: &Field, other: &Jet) -> Jet {
        let prec = self.precision().min(other.precision());
        Jet { coeffs: (0..prec).map(|i| k.add(self.coeffs[i], other.coeffs[i])).collect() }
    }
}

/// Applies the operator `v -> dv/dt + M(t) v` to a vector of jets `iterations` times,
/// where `M` is a square matrix of jets.
///
/// The ideal `(t^p)` is stable under `d/dt` in characteristic `p`, so the computation
/// is exact modulo `t^precision` when the precision is a multiple of `p`. Each
/// iteration loses no information below that order, but the caller must request at
/// most `precision` iterations.
pub fn jet_compose_matrix(k: &Field, series: &[Jet], op: &[Vec<Jet>], iterations: usize) -> Result<Vec<Jet>> {
    let dim = series.len();
    if op.len() != dim || op.iter().any(|r| r.len() != dim) {
        return Err(KzError::LengthMismatch(op.len(), dim));
    }
    let prec = series.iter().map(Jet::precision).min().unwrap_or(0);
    if prec < iterations || op.iter().flatten().any(|j| j.precision() < prec) {
        return Err(KzError::PrecisionExceeded { precision: prec, needed: iterations });
    }
    let mut cur: Vec<Jet> = series.to_vec();
    for _ in 0..iterations {
        let mut next: Vec<Jet> = cur.iter().map(|j| j.derivative(k)).collect();
        for (i, row) in op.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                if m.coeffs.iter().all(|c| c.is_zero()) {
                    continue;
                }
                next[i] = next[i].add(k, &m.mul(k, &cur[j]));
            }
        }
        cur = next;
    }
    Ok(cur)
}

/// Scalar version of [`jet_compose_matrix`]: applies `d/dt + m(t)` to `series`.
pub fn jet_compose(k: &Field, series: &Jet, m: &Jet, iterations: usize) -> Result<Jet> {
    Ok(jet_compose_matrix(k, std::slice::from_ref(series), &[vec![m.clone()]], iterations)?.remove(0))
}
