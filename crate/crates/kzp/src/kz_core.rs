//! The KZ connection: Omega matrices, Gaudin Hamiltonians, the Shapovalov form,
//! the denominator-cleared operators `D_k (d_k + h H_k)` on polynomial vectors and
//! the flatness verifier.
//!
//! Indices of variables, directions and components are 1-based in the public API.

use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::error::{KzError, Result};
use crate::fields::{Fe, Field};
use crate::linalg::Matrix;
use crate::multipoly::{EvalPoint, Mono, ZPolynomial, MAX_VARS};

/// The data `(n, field, h)` of a KZ system together with the derived counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KzContext {
    n: usize,
    field: Field,
    h: Fe,
    h_lift: Option<u32>,
    d_plus: usize,
    d_minus: usize,
}

impl KzContext {
    /// A context for the level `h` in `field` with `n` points.
    ///
    /// When `h` lies in the prime field and is nonzero, its integer representative
    /// `h~` in `[1, p-1]` and the counts `dPlus = floor(n h~ / p)`,
    /// `dMinus = floor(n (p - h~) / p)` are recorded. Otherwise both counts are zero.
    pub fn new(field: &Field, n: usize, h: Fe) -> Result<KzContext> {
        if n < 2 {
            return Err(KzError::InvalidConfig(format!("need n >= 2 points, got {n}")));
        }
        if n > MAX_VARS {
            return Err(KzError::TooManyVariables(n));
        }
        let p = field.p();
        let h_lift = if h.is_zero() { None } else { field.prime_lift(h).map(|v| v as u32) };
        let (d_plus, d_minus) = match h_lift {
            Some(t) => ((n as u64 * t as u64 / p) as usize, (n as u64 * (p - t as u64) / p) as usize),
            None => (0, 0),
        };
        Ok(KzContext { n, field: field.clone(), h, h_lift, d_plus, d_minus })
    }

    /// A context with `h` given by its integer representative.
    pub fn with_lift(field: &Field, n: usize, h_lift: u64) -> Result<KzContext> {
        Self::new(field, n, field.from_u64(h_lift))
    }

    /// Number of points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The field.
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Characteristic.
    pub fn p(&self) -> u64 {
        self.field.p()
    }

    /// The level `h`.
    pub fn h(&self) -> Fe {
        self.h
    }

    /// The representative `h~` in `[1, p-1]` when `h` is a nonzero element of the prime field.
    pub fn h_lift(&self) -> Option<u32> {
        self.h_lift
    }

    /// Number of p-hypergeometric solutions for `+h`.
    pub fn d_plus(&self) -> usize {
        self.d_plus
    }

    /// Number of p-hypergeometric solutions for `-h`.
    pub fn d_minus(&self) -> usize {
        self.d_minus
    }

    /// Returns `true` when `h` is fixed by Frobenius.
    pub fn h_in_prime_field(&self) -> bool {
        self.field.in_prime_subfield(self.h)
    }

    /// Returns `true` when the characteristic divides `n`.
    pub fn p_divides_n(&self) -> bool {
        self.n as u64 % self.p() == 0
    }

    /// Errors unless `p` does not divide `n`.
    pub fn require_coprime(&self) -> Result<()> {
        if self.p_divides_n() {
            Err(KzError::CharacteristicDividesN { p: self.p(), n: self.n })
        } else {
            Ok(())
        }
    }

    /// Errors unless `h` is a nonzero element of the prime field; returns `h~`.
    pub fn require_rational_h(&self) -> Result<u32> {
        self.h_lift.ok_or(KzError::RationalH)
    }

    /// The context at level `-h`.
    pub fn negated(&self) -> KzContext {
        KzContext::new(&self.field, self.n, self.field.neg(self.h)).expect("valid context")
    }

    /// The same level transported to another field containing it.
    pub fn with_field(&self, field: &Field, h: Fe) -> Result<KzContext> {
        KzContext::new(field, self.n, h)
    }

    /// The same context over an extension of a prime context field.
    pub fn lifted_to(&self, field: &Field) -> Result<KzContext> {
        if field == &self.field {
            return Ok(self.clone());
        }
        if !self.field.is_prime_field() || field.p() != self.p() {
            return Err(KzError::FieldMismatch);
        }
        self.with_field(field, self.h)
    }

    /// The field random points are drawn from: the context field when it has more
    /// than `n` elements, otherwise the smallest extension of the prime field that does.
    pub fn point_field(&self) -> Result<Field> {
        if self.field.order() > self.n as u64 {
            return Ok(self.field.clone());
        }
        let p = self.p();
        let mut k = 1;
        let mut order = p;
        while order <= self.n as u64 {
            k += 1;
            order *= p;
        }
        crate::fields::build_extension(p, k)
    }

    /// Parameter echo extended by check-specific entries.
    pub fn params_with(&self, extra: &[(&str, Value)]) -> Value {
        let mut v = self.params_json();
        if let Value::Object(m) = &mut v {
            for (k, x) in extra {
                m.insert((*k).to_string(), x.clone());
            }
        }
        v
    }

    /// Parameter echo for certificates.
    pub fn params_json(&self) -> Value {
        json!({
            "n": self.n,
            "p": self.p(),
            "ext_degree": self.field.degree(),
            "h": self.field.format(self.h),
            "h_lift": self.h_lift,
            "d_plus": self.d_plus,
            "d_minus": self.d_minus,
        })
    }
}

fn check_index(i: usize, n: usize) -> Result<usize> {
    if i == 0 || i > n {
        Err(KzError::IndexOutOfRange { index: i, min: 1, max: n })
    } else {
        Ok(i - 1)
    }
}

/// The elementary matrix `Omega_ij` of size `n` with entries `(i,i) = (j,j) = -1`,
/// `(i,j) = (j,i) = 1`.
pub fn omega(field: &Field, i: usize, j: usize, n: usize) -> Result<Matrix> {
    let (a, b) = (check_index(i, n)?, check_index(j, n)?);
    if a == b {
        return Err(KzError::IndexError(i));
    }
    let mut m = Matrix::zeros(n, n);
    let minus = field.neg(Fe::ONE);
    m.set(a, a, minus);
    m.set(b, b, minus);
    m.set(a, b, Fe::ONE);
    m.set(b, a, Fe::ONE);
    Ok(m)
}

/// The denominator `D_k(z) = prod_{j != k} (z_k - z_j)` (1-based `k`).
pub fn denominator(field: &Field, n: usize, k: usize) -> Result<ZPolynomial> {
    let k0 = check_index(k, n)?;
    let mut d = ZPolynomial::constant(field, n, Fe::ONE);
    for j in (0..n).filter(|&j| j != k0) {
        d = d.pmul(&linear_difference(field, n, k0, j))?;
    }
    Ok(d)
}

/// The polynomial `z_a - z_b` (0-based indices).
pub fn linear_difference(field: &Field, n: usize, a: usize, b: usize) -> ZPolynomial {
    ZPolynomial::var(field, n, a).sub(&ZPolynomial::var(field, n, b))
}

/// `H_k(z)` with its implicit denominator `D_k(z)`: the numerators
/// `sum_{j != k} Omega_kj prod_{m != k, j} (z_k - z_m)`.
#[derive(Clone, Debug)]
pub struct GaudinMatrix {
    /// Direction (1-based).
    pub k: usize,
    /// Numerator entries, `n x n`.
    pub numerators: Vec<Vec<ZPolynomial>>,
}

/// Builds the cleared Gaudin Hamiltonian `D_k H_k`.
pub fn gaudin(ctx: &KzContext, k: usize) -> Result<GaudinMatrix> {
    let n = ctx.n;
    let f = &ctx.field;
    let k0 = check_index(k, n)?;
    let mut num = vec![vec![ZPolynomial::zero(f, n); n]; n];
    for j in (0..n).filter(|&j| j != k0) {
        let mut e = ZPolynomial::constant(f, n, Fe::ONE);
        for m in (0..n).filter(|&m| m != k0 && m != j) {
            e = e.pmul(&linear_difference(f, n, k0, m))?;
        }
        let om = omega(f, k0 + 1, j + 1, n)?;
        for r in 0..n {
            for c in 0..n {
                let w = om.get(r, c);
                if !w.is_zero() {
                    num[r][c] = num[r][c].add_scaled(&e, w);
                }
            }
        }
    }
    Ok(GaudinMatrix { k, numerators: num })
}

/// `H_k(a)` evaluated at a point of `S`.
pub fn gaudin_at(ctx: &KzContext, k: usize, a: &EvalPoint) -> Result<Matrix> {
    let n = ctx.n;
    let f = &ctx.field;
    let k0 = check_index(k, n)?;
    if a.len() != n {
        return Err(KzError::LengthMismatch(a.len(), n));
    }
    let z = a.coords();
    let mut h = Matrix::zeros(n, n);
    for j in (0..n).filter(|&j| j != k0) {
        let w = f.inv(f.sub(z[k0], z[j])).map_err(|_| KzError::PointNotInS(k, j + 1))?;
        for (r, c) in [(k0, k0), (j, j)] {
            h.set(r, c, f.sub(h.get(r, c), w));
        }
        for (r, c) in [(k0, j), (j, k0)] {
            h.set(r, c, f.add(h.get(r, c), w));
        }
    }
    Ok(h)
}

/// The Shapovalov form `sum_i x_i y_i` on evaluated vectors.
pub fn shapovalov(field: &Field, x: &[Fe], y: &[Fe]) -> Result<Fe> {
    if x.len() != y.len() {
        return Err(KzError::LengthMismatch(x.len(), y.len()));
    }
    Ok(x.iter().zip(y).fold(Fe::ZERO, |acc, (&a, &b)| field.add(acc, field.mul(a, b))))
}

/// A column vector of polynomials; an element of `V` when its components sum to zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolutionVector {
    /// Components `I_1..I_n`.
    pub comps: Vec<ZPolynomial>,
}

impl SolutionVector {
    /// Wraps components.
    pub fn new(comps: Vec<ZPolynomial>) -> SolutionVector {
        SolutionVector { comps }
    }

    /// The zero vector.
    pub fn zero(field: &Field, n: usize) -> SolutionVector {
        SolutionVector { comps: vec![ZPolynomial::zero(field, n); n] }
    }

    /// A constant vector.
    pub fn constant(field: &Field, values: &[Fe]) -> SolutionVector {
        let n = values.len();
        SolutionVector { comps: values.iter().map(|&c| ZPolynomial::constant(field, n, c)).collect() }
    }

    /// Number of components.
    pub fn len(&self) -> usize {
        self.comps.len()
    }

    /// Returns `true` without components.
    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    /// Sum of components.
    pub fn component_sum(&self) -> ZPolynomial {
        let first = &self.comps[0];
        self.comps[1..].iter().fold(first.clone(), |acc, c| acc.add(c))
    }

    /// Returns `true` when the components sum to zero.
    pub fn in_v(&self) -> bool {
        self.component_sum().is_zero()
    }

    /// Returns `true` when every component is zero.
    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(ZPolynomial::is_zero)
    }

    /// Evaluation at a point.
    pub fn evaluate(&self, a: &[Fe]) -> Result<Vec<Fe>> {
        self.comps.iter().map(|c| c.evaluate(a)).collect()
    }

    /// Evaluation at a point with coordinates in `field` (see [`ZPolynomial::evaluate_in`]).
    pub fn evaluate_in(&self, field: &Field, a: &[Fe]) -> Result<Vec<Fe>> {
        self.comps.iter().map(|c| c.evaluate_in(field, a)).collect()
    }

    /// Componentwise linear combination `self + c * other`.
    pub fn add_scaled(&self, other: &SolutionVector, c: Fe) -> SolutionVector {
        SolutionVector { comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a.add_scaled(b, c)).collect() }
    }

    /// JSON list of polynomial JSON forms.
    pub fn to_json(&self) -> Value {
        Value::Array(self.comps.iter().map(ZPolynomial::to_json).collect())
    }
}

/// Polynomial Shapovalov pairing `sum_i x_i(z) y_i(z)`.
pub fn shapovalov_poly(x: &SolutionVector, y: &SolutionVector) -> Result<ZPolynomial> {
    if x.len() != y.len() {
        return Err(KzError::LengthMismatch(x.len(), y.len()));
    }
    crate::multipoly::dot_product(&x.comps, &y.comps)
}

/// `D_k(z) (d_k I + h H_k(z) I)` as an exact polynomial vector (1-based `k`).
pub fn nabla_apply(ctx: &KzContext, k: usize, vector: &SolutionVector) -> Result<SolutionVector> {
    let n = ctx.n;
    if vector.len() != n {
        return Err(KzError::LengthMismatch(vector.len(), n));
    }
    let d = denominator(&ctx.field, n, k)?;
    let g = gaudin(ctx, k)?;
    let mut out = Vec::with_capacity(n);
    for r in 0..n {
        let mut acc = d.pmul(&vector.comps[r].partial(k)?)?;
        for c in 0..n {
            if g.numerators[r][c].is_zero() || vector.comps[c].is_zero() {
                continue;
            }
            acc = acc.add_scaled(&g.numerators[r][c].pmul(&vector.comps[c])?, ctx.h);
        }
        out.push(acc);
    }
    Ok(SolutionVector::new(out))
}

/// The polynomial `(z_k - z_m) d_k I_m + h (I_k - I_m)` (0-based `k != m`).
///
/// Component `m` of `D_k (d_k I + h H_k I)` equals this polynomial times the nonzero
/// product `prod_{j != k, m} (z_k - z_j)`, so it vanishes exactly when this does.
pub fn flatness_bracket(ctx: &KzContext, k: usize, m: usize, vector: &SolutionVector) -> ZPolynomial {
    let dk = vector.comps[m].partial0(k);
    let shifted = dk.mul_term(Mono::var_pow(k, 1), Fe::ONE).sub(&dk.mul_term(Mono::var_pow(m, 1), Fe::ONE));
    shifted.add_scaled(&vector.comps[k].sub(&vector.comps[m]), ctx.h)
}

fn first_term_json(field: &Field, p: &ZPolynomial) -> Value {
    let (m, c) = p.terms()[0];
    json!({"monomial": m.exps(p.nvars()), "coefficient": field.format(c)})
}

/// Verifies that `vector` is a flat section: components sum to zero and
/// `D_k (d_k I + h H_k I) = 0` for every `k`.
///
/// Using the component sum, component `k` of the cleared operator is minus the sum of
/// the other components plus `D_k d_k (sum I)`, and component `m != k` factors as in
/// [`flatness_bracket`]. Both reductions are exact, so the check inspects the
/// brackets only.
pub fn flatness_check(ctx: &KzContext, vector: &SolutionVector) -> Certificate {
    let params = ctx.params_json();
    let name = "flatness";
    if vector.len() != ctx.n {
        return Certificate::error(name, params, &KzError::LengthMismatch(vector.len(), ctx.n).to_string());
    }
    let sum = vector.component_sum();
    if !sum.is_zero() {
        return Certificate::fail(
            name,
            params,
            json!({"reason": "component sum is nonzero", "term": first_term_json(&ctx.field, &sum)}),
        );
    }
    for k in 0..ctx.n {
        for m in (0..ctx.n).filter(|&m| m != k) {
            let b = flatness_bracket(ctx, k, m, vector);
            if !b.is_zero() {
                return Certificate::fail(
                    name,
                    params,
                    json!({
                        "reason": "connection does not annihilate the vector",
                        "direction": k + 1,
                        "component": m + 1,
                        "term": first_term_json(&ctx.field, &b),
                    }),
                );
            }
        }
    }
    Certificate::pass(name, params)
}
