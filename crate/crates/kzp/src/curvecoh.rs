//! De Rham cohomology of the superelliptic curves `y^q = prod (x - z_i)` in the
//! bases used to identify it with the KZ local system.
//!
//! Classes of isotypic degree `r` (`0 < r < q`) are coefficient vectors on the forms
//! `omega_i^(r) = dx / (y^r (x - z_i))`, subject to `sum_i [omega_i^(r)] = 0`, and on
//! the regular forms `mu_k^(r) = x^(k-1) dx / y^r` for `k <= floor(n r / q)`. All
//! coefficients are evaluated at points of the configuration space.
//!
//! For a KZ level `h` with representative `h~` the curve with exponent `q` is linked
//! to the KZ system through `q h~ + 1 = a p`: the classes of degree `1` then carry the
//! connection of level `-h`. Their p-curvature is the Cartier operator followed by
//! the Frobenius twist of the Kodaira–Spencer map, pulled back along Frobenius.

use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::error::{KzError, Result};
use crate::fields::{Fe, Field};
use crate::hyperg::{evaluate_family, QFamily};
use crate::kz_core::KzContext;
use crate::linalg::Matrix;
use crate::multipoly::EvalPoint;
use crate::pcurv::{closed_form_values, over_points, psi_at_point, vector_json};

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Genus `(q n - q - n + 1) / 2` of the curve `y^q = prod_{i=1}^n (x - z_i)`.
pub fn genus(q: u64, n: u64) -> u64 {
    (q - 1) * (n - 1) / 2
}

/// Rank `floor(n r / q)` of the regular forms in isotypic degree `r`.
pub fn hodge_rank(n: u64, q: u64, r: u64) -> u64 {
    n * r / q
}

/// A curve `y^q = prod (x - z_i)` over a field, with a chosen isotypic degree `r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveContext {
    field: Field,
    n: usize,
    q: u64,
    r: u64,
}

impl CurveContext {
    /// Validates `0 < r < q`, `gcd(q, n) = 1` and `p` not dividing `q`.
    pub fn new(field: &Field, n: usize, q: u64, r: u64) -> Result<CurveContext> {
        if n < 2 {
            return Err(KzError::InvalidConfig(format!("need n >= 2 points, got {n}")));
        }
        if r == 0 || r >= q {
            return Err(KzError::InvalidConfig(format!("isotypic degree {r} outside 0 < r < {q}")));
        }
        if gcd(q, n as u64) != 1 {
            return Err(KzError::InvalidConfig(format!("q = {q} is not coprime to n = {n}")));
        }
        if q % field.p() == 0 {
            return Err(KzError::InvalidConfig(format!("q = {q} is divisible by p = {}", field.p())));
        }
        Ok(CurveContext { field: field.clone(), n, q, r })
    }

    /// The field.
    pub fn field(&self) -> &Field {
        &self.field
    }

    /// Number of branch points.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Exponent of `y`.
    pub fn q(&self) -> u64 {
        self.q
    }

    /// Isotypic degree.
    pub fn r(&self) -> u64 {
        self.r
    }

    /// Genus of the curve.
    pub fn genus(&self) -> u64 {
        genus(self.q, self.n as u64)
    }

    /// Number of regular forms `mu_k^(r)`.
    pub fn hodge_rank(&self) -> usize {
        hodge_rank(self.n as u64, self.q, self.r) as usize
    }

    /// The curve in the complementary degree `q - r`.
    pub fn complementary(&self) -> CurveContext {
        CurveContext { r: self.q - self.r, ..self.clone() }
    }

    /// `r / q` in the field.
    pub fn ratio(&self) -> Fe {
        let k = &self.field;
        k.div(k.from_u64(self.r), k.from_u64(self.q)).expect("p does not divide q")
    }

    /// The level `-r / q` attached to the degree.
    pub fn level(&self) -> Fe {
        self.field.neg(self.ratio())
    }

    fn check_point(&self, point: &EvalPoint) -> Result<()> {
        if point.len() != self.n {
            return Err(KzError::LengthMismatch(point.len(), self.n));
        }
        Ok(())
    }

    fn check_mu(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.hodge_rank() {
            return Err(KzError::IndexOutOfRange { index: k, min: 1, max: self.hodge_rank() });
        }
        Ok(())
    }

    fn check_branch(&self, i: usize) -> Result<usize> {
        if i == 0 || i > self.n {
            return Err(KzError::IndexOutOfRange { index: i, min: 1, max: self.n });
        }
        Ok(i - 1)
    }

    /// Parameter echo for certificates.
    pub fn params_json(&self) -> Value {
        json!({"n": self.n, "p": self.field.p(), "q": self.q, "r": self.r})
    }
}

/// A cohomology class: coefficients on `omega_1..omega_n` and on `mu_1..mu_d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CohClass {
    /// Coefficients on the forms `omega_i`, defined modulo adding a constant vector.
    pub omega: Vec<Fe>,
    /// Coefficients on the regular forms `mu_k`.
    pub mu: Vec<Fe>,
}

impl CohClass {
    /// The zero class with `n` omega slots and `d` mu slots.
    pub fn zero(n: usize, d: usize) -> CohClass {
        CohClass { omega: vec![Fe::ZERO; n], mu: vec![Fe::ZERO; d] }
    }

    /// The representative whose last omega coefficient is zero.
    pub fn canonical(&self, field: &Field) -> CohClass {
        let last = self.omega.last().copied().unwrap_or(Fe::ZERO);
        CohClass { omega: self.omega.iter().map(|&c| field.sub(c, last)).collect(), mu: self.mu.clone() }
    }

    /// Returns `true` when the class is zero.
    pub fn is_zero(&self, field: &Field) -> bool {
        let c = self.canonical(field);
        c.omega.iter().chain(&c.mu).all(|x| x.is_zero())
    }

    /// JSON form with canonical field strings.
    pub fn to_json(&self, field: &Field) -> Value {
        json!({"omega": vector_json(field, &self.omega), "mu": vector_json(field, &self.mu)})
    }
}

/// `nabla_{d/dz_i} [mu_k^(r)] = (r/q) (mu_{k-1} + z_i mu_{k-2} + ... + z_i^(k-2) mu_1 + z_i^(k-1) omega_i)`
/// at a point (1-based `i`, `k`).
pub fn gm_on_mu(curve: &CurveContext, i: usize, k: usize, point: &EvalPoint) -> Result<CohClass> {
    curve.check_point(point)?;
    curve.check_mu(k)?;
    let i0 = curve.check_branch(i)?;
    let f = &curve.field;
    let c = curve.ratio();
    let z = point.coords()[i0];
    let mut class = CohClass::zero(curve.n, curve.hodge_rank());
    // Coefficient of mu_j is (r/q) z^(k-1-j).
    let mut power = c;
    for j in (1..k).rev() {
        class.mu[j - 1] = power;
        power = f.mul(power, z);
    }
    class.omega[i0] = power;
    Ok(class)
}

/// The Kodaira–Spencer map on `mu_k^(r)`: the coefficient `(r/q) z_i^(k-1)` of
/// `omega_i` (modulo the regular forms) along `dz_i`, for each direction `i`.
pub fn kodaira_spencer(curve: &CurveContext, k: usize, point: &EvalPoint) -> Result<Vec<Fe>> {
    curve.check_point(point)?;
    curve.check_mu(k)?;
    let f = &curve.field;
    let c = curve.ratio();
    Ok(point.coords().iter().map(|&z| f.mul(c, f.pow(z, k as u64 - 1))).collect())
}

/// `C_k(a) = prod_{i != k} (a_k - a_i)` (0-based `k0`).
fn vandermonde_factor(field: &Field, a: &[Fe], k0: usize) -> Fe {
    (0..a.len()).filter(|&i| i != k0).fold(Fe::ONE, |acc, i| field.mul(acc, field.sub(a[k0], a[i])))
}

/// Poincaré pairing `([omega_k^(r)], [mu_j^(q-r)]) = -q / (r C_k(z)) z_k^(j-1)` at a
/// point (1-based `k`, `j`).
pub fn pair_omega_mu(curve: &CurveContext, k: usize, j: usize, point: &EvalPoint) -> Result<Fe> {
    curve.check_point(point)?;
    let k0 = curve.check_branch(k)?;
    curve.complementary().check_mu(j)?;
    let f = &curve.field;
    let z = point.coords();
    let c = vandermonde_factor(f, z, k0);
    if c.is_zero() {
        return Err(KzError::PointNotInS(k, k));
    }
    let denom = f.mul(f.from_u64(curve.r), c);
    let value = f.div(f.neg(f.from_u64(curve.q)), denom)?;
    Ok(f.mul(value, f.pow(z[k0], j as u64 - 1)))
}

/// `(KS_k [mu_l^(r)], [mu_m^(q-r)]) = -z_k^(l+m-2) / C_k(z)`: the Kodaira–Spencer image
/// of `mu_l^(r)` along `dz_k` paired with a regular form of the complementary degree.
///
/// This is `(r/q) z_k^(l-1)` times [`pair_omega_mu`] with the factor `r` cancelled,
/// so it is also defined when `p` divides `r`.
pub fn ks_pairing(curve: &CurveContext, k: usize, l: usize, m: usize, point: &EvalPoint) -> Result<Fe> {
    curve.check_point(point)?;
    let k0 = curve.check_branch(k)?;
    curve.check_mu(l)?;
    curve.complementary().check_mu(m)?;
    let f = &curve.field;
    let z = point.coords();
    let c = vandermonde_factor(f, z, k0);
    if c.is_zero() {
        return Err(KzError::PointNotInS(k, k));
    }
    Ok(f.neg(f.div(f.pow(z[k0], (l + m - 2) as u64), c)?))
}

/// Pairing `([omega_i^(r)], [omega_j^(-r)]) = -h^(-1) (delta_ij - 1/n)` for the level
/// `h = -r/q` (1-based `i`, `j`).
pub fn pair_omega_omega(field: &Field, n: usize, h: Fe, i: usize, j: usize) -> Result<Fe> {
    if i == 0 || i > n || j == 0 || j > n {
        return Err(KzError::IndexOutOfRange { index: i.max(j), min: 1, max: n });
    }
    let inv_n = field.inv(field.from_u64(n as u64))?;
    let delta = if i == j { Fe::ONE } else { Fe::ZERO };
    let inv_h = field.inv(h)?;
    Ok(field.neg(field.mul(inv_h, field.sub(delta, inv_n))))
}

/// Auxiliary curve data linking a KZ level `h~` to the curve `y^q = P`: `q h~ + 1 = a p`.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Linkage {
    /// Exponent of the curve.
    pub q: u64,
    /// The degree reached by the Cartier operator from degree `1`.
    pub a: u64,
    /// Representative of the level.
    pub h_lift: u32,
}

impl Linkage {
    /// The linkage for a given `q`, validating `q > n`, `gcd(q, n) = 1`, `p` not
    /// dividing `q` and `p | q h~ + 1`.
    pub fn with_q(n: usize, p: u64, h_lift: u32, q: u64) -> Result<Linkage> {
        let fail = |why: &str| Err(KzError::LinkageError(format!("q = {q}: {why}")));
        if q <= n as u64 {
            return fail("need q > n");
        }
        if gcd(q, n as u64) != 1 {
            return fail("q is not coprime to n");
        }
        if q % p == 0 {
            return fail("p divides q");
        }
        let top = q * h_lift as u64 + 1;
        if top % p != 0 {
            return fail("p does not divide q h~ + 1");
        }
        Ok(Linkage { q, a: top / p, h_lift })
    }

    /// The smallest admissible `q` below `bound`, by ascending scan.
    pub fn search(n: usize, p: u64, h_lift: u32, bound: u64) -> Result<Linkage> {
        (n as u64 + 1..bound)
            .find_map(|q| Linkage::with_q(n, p, h_lift, q).ok())
            .ok_or_else(|| KzError::LinkageError(format!("no admissible q below {bound}")))
    }

    /// JSON form.
    pub fn to_json(&self) -> Value {
        json!({"q": self.q, "a": self.a, "h_lift": self.h_lift})
    }
}

/// Default search bound for [`Linkage::search`].
pub const LINKAGE_SEARCH_BOUND: u64 = 1000;

/// The Cartier operator on `[omega_i]` in the degree linked to the family's level.
///
/// For the `+h` family (degree `1`) the image is `sum_l Q_i^(lp-1)(z, h) mu_l^(a)`;
/// for the `-h` family (degree `-1`, reached through `q (p - h~) - 1 = p (q - a)`)
/// it is `sum_m Q_i^(mp-1)(z, -h) mu_m^(q-a)`. The coefficients are the family's
/// values at the point; the number of regular forms matches the family size.
pub fn cartier_on_omega(field: &Field, family: &QFamily, linkage: &Linkage, i: usize, point: &EvalPoint) -> Result<CohClass> {
    let n = family.ctx.n();
    if i == 0 || i > n {
        return Err(KzError::IndexOutOfRange { index: i, min: 1, max: n });
    }
    check_cartier_degree(family, linkage)?;
    let values = evaluate_family(field, family, point)?;
    Ok(cartier_from_values(&values, n, i))
}

/// The number of regular forms in the degree reached by the Cartier operator must
/// equal the family size.
fn check_cartier_degree(family: &QFamily, linkage: &Linkage) -> Result<()> {
    let degree = match family.sign {
        crate::hyperg::Sign::Plus => linkage.a,
        crate::hyperg::Sign::Minus => linkage.q - linkage.a,
    };
    let rank = hodge_rank(family.ctx.n() as u64, linkage.q, degree) as usize;
    if rank != family.len() {
        return Err(KzError::LinkageError(format!(
            "degree {degree} has {rank} regular forms but the family has {} vectors",
            family.len()
        )));
    }
    Ok(())
}

/// The Cartier image of `[omega_i]` from the family's values at a point (1-based `i`).
fn cartier_from_values(values: &[Vec<Fe>], n: usize, i: usize) -> CohClass {
    CohClass { omega: vec![Fe::ZERO; n], mu: values.iter().map(|v| v[i - 1]).collect() }
}

/// Solves for the coordinates `x` (with `sum x = 0`) of a degree-1 class from its
/// pairings `pairings[j] = (x, [omega_j^(-1)])`, using the Gram matrix of
/// [`pair_omega_omega`].
fn from_pairings(field: &Field, n: usize, h: Fe, pairings: &[Fe]) -> Result<Vec<Fe>> {
    // Rows: sum_b x_b G_bj = pairings_j for every j, plus sum_b x_b = 0.
    let mut rows = Vec::with_capacity(n + 1);
    for j in 1..=n {
        let mut row = (1..=n).map(|b| pair_omega_omega(field, n, h, b, j)).collect::<Result<Vec<_>>>()?;
        row.push(pairings[j - 1]);
        rows.push(row);
    }
    let mut last = vec![Fe::ONE; n];
    last.push(Fe::ZERO);
    rows.push(last);
    let mut m = Matrix::from_rows(&rows);
    let pivots = m.rref(field);
    if pivots.contains(&n) || pivots.len() != n {
        return Err(KzError::Unsupported("inconsistent pairing data".into()));
    }
    Ok((0..n).map(|r| m.get(r, n)).collect())
}

/// The three legs of the p-curvature of the degree-1 classes along `d/dz_k`,
/// applied to `[omega_i^(1)]` for every `i` (1-based `k`).
///
/// 1. Cartier: `C[omega_i] = sum_l Q_i^(lp-1)(z, h) mu_l^(a)`.
/// 2. `katz_sign` times the Frobenius twist of the Kodaira–Spencer map along `dz_k`,
///    which sends `mu_l^(a)` to `((a/q) z_k^(l-1))^p` times the class of `omega_k^(a)`
///    modulo regular forms. Katz's formula uses `katz_sign = -1`.
/// 3. Frobenius pullback of that class, determined by its pairings with
///    `[omega_j^(-1)]`: `(omega_k^(a), C[omega_j^(-1)])^(F)`, i.e.
///    `sum_m Q_j^(mp-1)(z, -h) (omega_k^(a), mu_m^(q-a))^p`. Legs 2 and 3 are
///    combined through [`ks_pairing`], which stays defined when `p` divides `a`.
///
/// The resulting degree-1 class is converted to coordinates through the pairing of
/// [`pair_omega_omega`] and read in `V_{-h}` via `omega_b^(1) -> e_b - (1/n)(1, ..., 1)`.
/// Column `i` of the returned `n x n` matrix is the image of `[omega_i^(1)]`.
pub fn katz_composition(
    field: &Field,
    plus: &QFamily,
    minus: &QFamily,
    linkage: &Linkage,
    k: usize,
    point: &EvalPoint,
    katz_sign: Fe,
) -> Result<Matrix> {
    let ctx = &plus.ctx;
    let n = ctx.n();
    if k == 0 || k > n {
        return Err(KzError::IndexOutOfRange { index: k, min: 1, max: n });
    }
    let curve_a = CurveContext::new(field, n, linkage.q, linkage.a)?;
    let h = ctx.h();
    // Legs 2 and 3 meet in the pairings of F*(KS_k mu_l^(a)) with the classes mu_m^(q-a)
    // produced by the Cartier operator on [omega_j^(-1)].
    let d_minus = minus.len();
    let kernel: Vec<Vec<Fe>> = (1..=curve_a.hodge_rank())
        .map(|l| {
            (1..=d_minus)
                .map(|m| Ok(field.mul(katz_sign, field.frobenius(ks_pairing(&curve_a, k, l, m, point)?))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    check_cartier_degree(plus, linkage)?;
    check_cartier_degree(minus, linkage)?;
    let plus_values = evaluate_family(field, plus, point)?;
    let minus_values = evaluate_family(field, minus, point)?;
    let minus_coefs: Vec<Vec<Fe>> = (1..=n).map(|j| cartier_from_values(&minus_values, n, j).mu).collect();
    let mut out = Matrix::zeros(n, n);
    for i in 1..=n {
        let plus_coefs = cartier_from_values(&plus_values, n, i).mu;
        let pairings: Vec<Fe> = minus_coefs
            .iter()
            .map(|right| {
                let mut acc = Fe::ZERO;
                for (l, &x) in plus_coefs.iter().enumerate() {
                    for (m, &y) in right.iter().enumerate() {
                        acc = field.add(acc, field.mul(field.mul(x, y), kernel[l][m]));
                    }
                }
                acc
            })
            .collect();
        let x = from_pairings(field, n, h, &pairings)?;
        for (b, &v) in x.iter().enumerate() {
            out.set(b, i - 1, v);
        }
    }
    Ok(out)
}

/// `M (e_i - e_n)` for every `i < n`, as columns.
fn on_v_basis(field: &Field, m: &Matrix) -> Vec<Vec<Fe>> {
    let n = m.rows;
    (0..n - 1).map(|i| (0..n).map(|r| field.sub(m.get(r, i), m.get(r, n - 1))).collect()).collect()
}

/// The Katz factorization of the p-curvature of the degree-1 classes against the
/// closed formula for `Psi^{-h}_k(a)` and the jet computation of `Psi^{-h}_k(a)`, at
/// seeded points, on the basis `e_i - e_n` of `V`. All three must agree entrywise.
///
/// As a negative control the composition is repeated with the sign of Katz's
/// formula dropped; in the rank-one case that variant must differ from the
/// closed formula, otherwise the comparison would be vacuous.
pub fn katz_composition_check(plus: &QFamily, minus: &QFamily, linkage: &Linkage, trials: usize, seed: u64) -> Certificate {
    let name = "katz-composition";
    let ctx = &plus.ctx;
    let n = ctx.n();
    let params = ctx.params_with(&[("trials", json!(trials)), ("linkage", linkage.to_json())]);
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    let Some(h_lift) = ctx.h_lift() else {
        return Certificate::not_applicable(name, params, "h is zero or not in the prime field");
    };
    if h_lift != linkage.h_lift {
        return Certificate::error(name, params, "linkage was computed for another level");
    }
    let rank_one = ctx.d_plus() > 0 && ctx.d_plus() < n - 1;
    let mut control_broke = !rank_one;
    let mut first: Option<Value> = None;
    let mut jets_ratio: Option<(Fe, bool)> = None;
    let mut point_field = ctx.field().clone();
    let outcome = over_points(ctx, trials, seed, |lifted, a| {
        let field = lifted.field();
        point_field = field.clone();
        let negated = lifted.negated();
        let xs = evaluate_family(field, plus, a)?;
        let ys = evaluate_family(field, minus, a)?;
        let minus_one = field.neg(Fe::ONE);
        for k in 1..=n {
            let composed = on_v_basis(field, &katz_composition(field, plus, minus, linkage, k, a, minus_one)?);
            let control = on_v_basis(field, &katz_composition(field, plus, minus, linkage, k, a, Fe::ONE)?);
            let jets = on_v_basis(field, &psi_at_point(&negated, k, a)?.full);
            for i in 0..n - 1 {
                let mut v = vec![Fe::ZERO; n];
                v[i] = Fe::ONE;
                v[n - 1] = minus_one;
                let formula = closed_form_values(field, lifted.h(), &xs, &ys, k, a, &v)?.1;
                if control[i] != formula {
                    control_broke = true;
                }
                for (&x, &y) in jets[i].iter().zip(&composed[i]) {
                    if y.is_zero() {
                        continue;
                    }
                    let c = field.div(x, y)?;
                    jets_ratio = Some(match jets_ratio {
                        None => (c, true),
                        Some((prev, ok)) => (prev, ok && prev == c),
                    });
                }
                if (composed[i] != formula || composed[i] != jets[i]) && first.is_none() {
                    first = Some(json!({
                        "point": a.to_json(field),
                        "k": k,
                        "basis_vector": i + 1,
                        "composition": vector_json(field, &composed[i]),
                        "formula": vector_json(field, &formula),
                        "jets": vector_json(field, &jets[i]),
                        "composition_matches_formula": composed[i] == formula,
                        "composition_matches_jets": composed[i] == jets[i],
                    }));
                }
            }
        }
        Ok(None)
    });
    let outcome = outcome.map(|_| {
        let mut witness = first?;
        if let Value::Object(m) = &mut witness {
            let ratio = jets_ratio.filter(|r| r.1).map(|r| r.0);
            m.insert("jets_over_composition".into(), ratio.map_or(Value::Null, |c| json!(point_field.format(c))));
            m.insert(
                "jets_equal_minus_composition".into(),
                json!(ratio == Some(point_field.neg(Fe::ONE))),
            );
        }
        Some(witness)
    });
    let outcome = match outcome {
        Ok(None) if !control_broke => Ok(Some(json!({"negative_control": "sign flip did not change the result"}))),
        other => other,
    };
    Certificate::from_outcome(name, params, seed, outcome)
}

/// `genus(q, n) = sum_{r=1}^{q-1} floor(n r / q) = (q n - q - n + 1) / 2` and
/// `floor(n r / q) + floor(n (q - r) / q) = n - 1` for every `0 < r < q`.
pub fn genus_identity_check(n: usize, q: u64) -> Certificate {
    let name = "genus";
    let params = json!({"n": n, "q": q});
    if gcd(q, n as u64) != 1 {
        return Certificate::not_applicable(name, params, "q is not coprime to n");
    }
    let nn = n as u64;
    let total: u64 = (1..q).map(|r| hodge_rank(nn, q, r)).sum();
    let closed = (q - 1) * (nn - 1) / 2;
    if total != closed || (q - 1) * (nn - 1) % 2 != 0 {
        return Certificate::fail(name, params, json!({"sum": total, "closed_form": closed}));
    }
    for r in 1..q {
        let pair = hodge_rank(nn, q, r) + hodge_rank(nn, q, q - r);
        if pair != nn - 1 {
            return Certificate::fail(name, params, json!({"r": r, "sum": pair}));
        }
    }
    Certificate::pass(name, params).with_witness(json!({"genus": closed}))
}

/// Context check used by callers that receive `(q, a)` from configuration.
pub fn linkage_for(ctx: &KzContext, q: Option<u64>) -> Result<Linkage> {
    let h_lift = ctx.require_rational_h()?;
    match q {
        Some(q) => Linkage::with_q(ctx.n(), ctx.p(), h_lift, q),
        None => Linkage::search(ctx.n(), ctx.p(), h_lift, LINKAGE_SEARCH_BOUND),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperg::{p_solutions, Sign};
    use crate::pcurv::families;

    fn f(p: u64) -> Field {
        Field::prime(p).unwrap()
    }

    fn point(field: &Field, coords: &[u64]) -> EvalPoint {
        EvalPoint::new(coords.iter().map(|&c| field.from_u64(c)).collect()).unwrap()
    }

    #[test]
    fn genus_identity_for_small_curves() {
        for n in 2..=6 {
            for q in [3u64, 5, 7, 11] {
                let cert = genus_identity_check(n, q);
                if gcd(q, n as u64) == 1 {
                    assert!(cert.passed(), "n={n} q={q}");
                }
            }
        }
        assert_eq!(genus(3, 2), 1);
        assert_eq!(genus(5, 3), 4);
    }

    #[test]
    fn gauss_manin_on_regular_forms() {
        let k = f(11);
        let curve = CurveContext::new(&k, 3, 5, 4).unwrap();
        assert_eq!(curve.hodge_rank(), 2);
        let a = point(&k, &[2, 3, 7]);
        let c = curve.ratio();
        // k = 1: (r/q) omega_i.
        let one = gm_on_mu(&curve, 2, 1, &a).unwrap();
        assert_eq!(one.omega, vec![Fe::ZERO, c, Fe::ZERO]);
        assert!(one.mu.iter().all(|x| x.is_zero()));
        // k = 2: (r/q)(mu_1 + z_i omega_i).
        let two = gm_on_mu(&curve, 2, 2, &a).unwrap();
        assert_eq!(two.mu, vec![c, Fe::ZERO]);
        assert_eq!(two.omega[1], k.mul(c, k.from_u64(3)));
        assert!(gm_on_mu(&curve, 1, 0, &a).is_err());
        assert!(gm_on_mu(&curve, 1, 3, &a).is_err());
    }

    #[test]
    fn kodaira_spencer_is_gauss_manin_modulo_regular_forms() {
        let k = f(11);
        let curve = CurveContext::new(&k, 3, 5, 4).unwrap();
        let a = point(&k, &[2, 3, 7]);
        for m in 1..=curve.hodge_rank() {
            let ks = kodaira_spencer(&curve, m, &a).unwrap();
            for i in 1..=3 {
                assert_eq!(gm_on_mu(&curve, i, m, &a).unwrap().omega[i - 1], ks[i - 1]);
            }
        }
        // Top index: (4/5) z_i^(k-1) with k = floor(12/5) = 2.
        let ks = kodaira_spencer(&curve, 2, &a).unwrap();
        let c = k.div(k.from_u64(4), k.from_u64(5)).unwrap();
        assert_eq!(ks, vec![k.mul(c, k.from_u64(2)), k.mul(c, k.from_u64(3)), k.mul(c, k.from_u64(7))]);
    }

    #[test]
    fn omega_mu_pairing_examples() {
        let k = f(5);
        let curve = CurveContext::new(&k, 2, 3, 1).unwrap();
        let a = point(&k, &[0, 1]);
        // C_1 = -1, pairing -q/(r C_1) = 3.
        assert_eq!(pair_omega_mu(&curve, 1, 1, &a).unwrap(), k.from_u64(3));
        assert!(pair_omega_mu(&curve, 1, 2, &a).is_err());
    }

    #[test]
    fn ks_pairing_factors_through_the_omega_mu_pairing() {
        let k = f(11);
        let curve = CurveContext::new(&k, 4, 7, 5).unwrap();
        let a = point(&k, &[2, 3, 7, 9]);
        assert_eq!((curve.hodge_rank(), curve.complementary().hodge_rank()), (2, 1));
        for l in 1..=2 {
            for kk in 1..=4 {
                let ks = kodaira_spencer(&curve, l, &a).unwrap()[kk - 1];
                let direct = k.mul(ks, pair_omega_mu(&curve, kk, 1, &a).unwrap());
                assert_eq!(ks_pairing(&curve, kk, l, 1, &a).unwrap(), direct);
            }
        }
        // p divides r: the pairing alone is undefined but the combination is not.
        let degenerate = CurveContext::new(&f(5), 3, 8, 5).unwrap();
        let b = point(&f(5), &[1, 2, 4]);
        assert!(pair_omega_mu(&degenerate, 1, 1, &b).is_err());
        assert!(ks_pairing(&degenerate, 1, 1, 1, &b).is_ok());
    }

    #[test]
    fn omega_omega_pairing_examples() {
        let k = f(5);
        let h = k.from_u64(2);
        assert_eq!(pair_omega_omega(&k, 2, h, 1, 1).unwrap(), k.from_u64(1));
        for i in 1..=3 {
            let row = (1..=3).fold(Fe::ZERO, |acc, j| k.add(acc, pair_omega_omega(&k, 3, h, i, j).unwrap()));
            assert!(row.is_zero());
            for j in 1..=3 {
                assert_eq!(pair_omega_omega(&k, 3, h, i, j).unwrap(), pair_omega_omega(&k, 3, h, j, i).unwrap());
            }
        }
    }

    #[test]
    fn linkage_scan() {
        // n = 3, p = 5, h~ = 3: q = 8 is the first q > 3 with 3q + 1 = 0 mod 5.
        let l = Linkage::search(3, 5, 3, 100).unwrap();
        assert_eq!((l.q, l.a), (8, 5));
        assert!(Linkage::with_q(3, 5, 3, 7).is_err());
        assert_eq!(hodge_rank(3, 8, 5), 1);
    }

    #[test]
    fn cartier_coefficients_are_the_family() {
        let ctx = KzContext::with_lift(&f(5), 2, 3).unwrap();
        let plus = p_solutions(&ctx, Sign::Plus).unwrap();
        let l = Linkage::search(2, 5, 3, 100).unwrap();
        assert_eq!(l.q, 3);
        let a = point(ctx.field(), &[1, 4]);
        let values = evaluate_family(ctx.field(), &plus, &a).unwrap();
        let mut sum = Fe::ZERO;
        for i in 1..=2 {
            let c = cartier_on_omega(ctx.field(), &plus, &l, i, &a).unwrap();
            assert_eq!(c.mu, vec![values[0][i - 1]]);
            sum = ctx.field().add(sum, c.mu[0]);
        }
        assert!(sum.is_zero());
    }

    #[test]
    fn cartier_is_zero_without_regular_forms() {
        let ctx = KzContext::with_lift(&f(7), 3, 1).unwrap();
        assert_eq!(ctx.d_plus(), 0);
        let plus = p_solutions(&ctx, Sign::Plus).unwrap();
        let l = linkage_for(&ctx, None).unwrap();
        let a = point(ctx.field(), &[1, 2, 4]);
        assert!(cartier_on_omega(ctx.field(), &plus, &l, 1, &a).unwrap().is_zero(ctx.field()));
    }

    #[test]
    fn pullback_coordinates_reproduce_pairings() {
        let k = f(7);
        let h = k.from_u64(3);
        let pairings = vec![k.from_u64(1), k.from_u64(2), k.from_i64(-3)];
        let x = from_pairings(&k, 3, h, &pairings).unwrap();
        for j in 1..=3 {
            let s = (1..=3).fold(Fe::ZERO, |acc, b| k.add(acc, k.mul(x[b - 1], pair_omega_omega(&k, 3, h, b, j).unwrap())));
            assert_eq!(s, pairings[j - 1]);
        }
    }

    #[test]
    fn composition_reproduces_the_closed_formula_and_minus_the_jets() {
        for (p, n, h) in [(5, 3, 3), (7, 4, 3), (7, 5, 3), (11, 4, 5)] {
            let ctx = KzContext::with_lift(&f(p), n, h).unwrap();
            let (plus, minus) = families(&ctx).unwrap();
            let l = linkage_for(&ctx, None).unwrap();
            let cert = katz_composition_check(&plus, &minus, &l, 3, 2);
            assert!(!cert.passed(), "{p} {n} {h}");
            assert_eq!(cert.witness["composition_matches_formula"], json!(true), "{:?}", cert.witness);
            assert_eq!(cert.witness["jets_equal_minus_composition"], json!(true), "{:?}", cert.witness);
        }
    }

    #[test]
    fn composition_vanishes_in_extreme_cases() {
        for (p, n, h) in [(5, 2, 3), (7, 3, 1), (7, 3, 6)] {
            let ctx = KzContext::with_lift(&f(p), n, h).unwrap();
            let (plus, minus) = families(&ctx).unwrap();
            let l = linkage_for(&ctx, None).unwrap();
            let cert = katz_composition_check(&plus, &minus, &l, 3, 2);
            assert!(cert.passed(), "{p} {n} {h}: {:?}", cert.witness);
        }
    }

    #[test]
    fn dropping_the_katz_sign_changes_the_composition() {
        let ctx = KzContext::with_lift(&f(5), 3, 3).unwrap();
        let (plus, minus) = families(&ctx).unwrap();
        let l = linkage_for(&ctx, None).unwrap();
        let k = ctx.field();
        let a = point(k, &[1, 2, 4]);
        let with = katz_composition(k, &plus, &minus, &l, 1, &a, k.neg(Fe::ONE)).unwrap();
        let without = katz_composition(k, &plus, &minus, &l, 1, &a, Fe::ONE).unwrap();
        assert!(!with.is_zero());
        assert_eq!(without, with.scale(k, k.neg(Fe::ONE)));
    }
}
