//! p-curvature of the KZ connection at points.
//!
//! The p-curvature `Psi_k = (d_k + h H_k)^p` is linear over functions, so its value
//! at a point `a` is obtained by applying the operator `p` times to constant
//! sections along the line `a + t e_k`, with all series truncated modulo `t^p`.
//!
//! For `h` in the prime field the operators square to zero pairwise, vanish in the
//! extreme cases and otherwise have rank one with kernel and image given by the
//! p-hypergeometric solutions of levels `-h` and `h`. For `h` outside the prime
//! field their eigenvalues are read off the critical points of the master
//! polynomial `P(x) = prod (x - a_i)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::error::{KzError, Result};
use crate::fields::{build_extension, Embedding, Fe, Field};
use crate::hyperg::{evaluate_family, p_solutions, sample_points, QFamily, Sign};
use crate::kz_core::{shapovalov, KzContext, SolutionVector};
use crate::linalg::Matrix;
use crate::multipoly::{jet_compose_matrix, EvalPoint, Jet, Mono};
use crate::upoly;

/// Sign relating the p-curvature eigenvalues to the critical points: the eigenvalues
/// of `Psi_k(a)` are `SIGMA (h^p - h) / (a_k - c)^p` over the critical points `c`.
///
/// Pinned by the two-point case, where `Psi_1 = -2 (h^p - h) / (a_1 - a_2)^p` and the
/// only critical point is the midpoint `c = (a_1 + a_2) / 2`, so
/// `(h^p - h) / (a_1 - c)^p = 2 (h^p - h) / (a_1 - a_2)^p`.
pub const SIGMA: i64 = -1;

/// The p-curvature operator `Psi_k` at a point.
#[derive(Clone, Debug)]
pub struct PCurvatureMatrix {
    /// Direction (1-based).
    pub k: usize,
    /// The point.
    pub point: EvalPoint,
    /// Field of the entries.
    pub field: Field,
    /// The operator on `K^n` in the standard basis (`n x n`).
    pub full: Matrix,
}

impl PCurvatureMatrix {
    /// The restriction to `V` in the basis `e_i - e_n`, `(n - 1) x (n - 1)`.
    ///
    /// Coordinates of a vector of `V` in this basis are its first `n - 1` entries.
    pub fn on_v(&self) -> Matrix {
        let k = &self.field;
        let n = self.full.rows;
        let mut m = Matrix::zeros(n - 1, n - 1);
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                m.set(i, j, k.sub(self.full.get(i, j), self.full.get(i, n - 1)));
            }
        }
        m
    }

    /// `Psi_k(a) v`.
    pub fn apply(&self, v: &[Fe]) -> Vec<Fe> {
        self.full.mul_vec(&self.field, v)
    }

    /// Rank of the operator on `V`.
    pub fn rank(&self) -> usize {
        self.on_v().rank(&self.field)
    }
}

/// Expansion of `1 / (c + t)` modulo `t^precision`.
fn inverse_jet(k: &Field, c: Fe, precision: usize) -> Result<Jet> {
    let inv = k.inv(c)?;
    let minus_inv = k.neg(inv);
    let mut coeffs = Vec::with_capacity(precision);
    let mut cur = inv;
    for _ in 0..precision {
        coeffs.push(cur);
        cur = k.mul(cur, minus_inv);
    }
    Ok(Jet::from_coeffs(coeffs, precision))
}

/// The matrix of jets `h H_k(a + t e_k)` modulo `t^precision` (0-based `k0`).
fn hamiltonian_jets(ctx: &KzContext, k0: usize, a: &EvalPoint, precision: usize) -> Result<Vec<Vec<Jet>>> {
    let k = ctx.field();
    let n = ctx.n();
    let z = a.coords();
    let mut op = vec![vec![Jet::zero(precision); n]; n];
    for j in (0..n).filter(|&j| j != k0) {
        let g = inverse_jet(k, k.sub(z[k0], z[j]), precision).map_err(|_| KzError::PointNotInS(k0 + 1, j + 1))?;
        let hg = Jet::from_coeffs(g.coeffs.iter().map(|&c| k.mul(ctx.h(), c)).collect(), precision);
        let minus = Jet::from_coeffs(hg.coeffs.iter().map(|&c| k.neg(c)).collect(), precision);
        op[k0][k0] = op[k0][k0].add(k, &minus);
        op[j][j] = op[j][j].add(k, &minus);
        op[k0][j] = op[k0][j].add(k, &hg);
        op[j][k0] = op[j][k0].add(k, &hg);
    }
    Ok(op)
}

fn check_direction(k: usize, n: usize) -> Result<usize> {
    if k == 0 || k > n {
        return Err(KzError::IndexOutOfRange { index: k, min: 1, max: n });
    }
    Ok(k - 1)
}

/// `Psi_k(a)` for `a` with coordinates in the context field (1-based `k`).
pub fn psi_at_point(ctx: &KzContext, k: usize, a: &EvalPoint) -> Result<PCurvatureMatrix> {
    let n = ctx.n();
    if a.len() != n {
        return Err(KzError::LengthMismatch(a.len(), n));
    }
    let k0 = check_direction(k, n)?;
    let field = ctx.field();
    let p = ctx.p() as usize;
    let op = hamiltonian_jets(ctx, k0, a, p)?;
    let mut full = Matrix::zeros(n, n);
    for col in 0..n {
        let series: Vec<Jet> =
            (0..n).map(|r| Jet::constant(if r == col { Fe::ONE } else { Fe::ZERO }, p)).collect();
        let out = jet_compose_matrix(field, &series, &op, p)?;
        for (r, jet) in out.iter().enumerate() {
            full.set(r, col, jet.coeffs[0]);
        }
    }
    Ok(PCurvatureMatrix { k, point: a.clone(), field: field.clone(), full })
}

/// `((d_k + h H_k)^p s)(a)` for a polynomial section `s`, computed along the line
/// `a + t e_k` without using linearity over functions.
pub fn psi_on_section(ctx: &KzContext, k: usize, a: &EvalPoint, section: &SolutionVector) -> Result<Vec<Fe>> {
    let n = ctx.n();
    let k0 = check_direction(k, n)?;
    let field = ctx.field();
    let p = ctx.p() as usize;
    let op = hamiltonian_jets(ctx, k0, a, p)?;
    let series: Vec<Jet> = section
        .comps
        .iter()
        .map(|c| {
            let shifted = c.translate(a.coords());
            let coeffs = (0..p).map(|d| shifted.coeff(Mono::var_pow(k0, d as u32))).collect();
            Jet::from_coeffs(coeffs, p)
        })
        .collect();
    Ok(jet_compose_matrix(field, &series, &op, p)?.into_iter().map(|j| j.coeffs[0]).collect())
}

/// `C_k(a) = prod_{i != k} (a_k - a_i)` (0-based `k0`).
fn vandermonde_factor(field: &Field, a: &[Fe], k0: usize) -> Fe {
    (0..a.len()).filter(|&i| i != k0).fold(Fe::ONE, |acc, i| field.mul(acc, field.sub(a[k0], a[i])))
}

/// `sum_l a_k^(p(l-1)) Q^(lp-1)(a)` over the evaluated family (0-based `k0`).
fn weighted_sum(field: &Field, values: &[Vec<Fe>], a: &[Fe], k0: usize, n: usize) -> Vec<Fe> {
    let step = field.pow(a[k0], field.p());
    let mut weight = Fe::ONE;
    let mut out = vec![Fe::ZERO; n];
    for v in values {
        for (o, &x) in out.iter_mut().zip(v) {
            *o = field.add(*o, field.mul(weight, x));
        }
        weight = field.mul(weight, step);
    }
    out
}

/// Kernel functional and image vector of `Psi_k(a)` predicted by the
/// p-hypergeometric solutions of levels `-h` and `h` (1-based `k`).
///
/// The kernel is `{v in V : phi . v = 0}` with
/// `phi = sum_m a_k^(p(m-1)) Q^(mp-1)(a, -h)` and the image is spanned by
/// `u = sum_l a_k^(p(l-1)) Q^(lp-1)(a, h)`. Returns `(phi, u)`.
pub fn kernel_and_image(
    field: &Field,
    plus: &QFamily,
    minus: &QFamily,
    k: usize,
    a: &EvalPoint,
) -> Result<(Vec<Fe>, Vec<Fe>)> {
    let ctx = &plus.ctx;
    let n = ctx.n();
    let k0 = check_direction(k, n)?;
    let d = ctx.d_plus();
    if ctx.h_lift().is_none() {
        return Err(KzError::RationalH);
    }
    if d == 0 || d == n - 1 {
        return Err(KzError::DegenerateCase { d_plus: d, n });
    }
    let phi = weighted_sum(field, &evaluate_family(field, minus, a)?, a.coords(), k0, n);
    let u = weighted_sum(field, &evaluate_family(field, plus, a)?, a.coords(), k0, n);
    Ok((phi, u))
}

fn matrix_json(field: &Field, m: &Matrix) -> Value {
    Value::Array((0..m.rows).map(|i| Value::Array(m.row(i).iter().map(|&c| json!(field.format(c))).collect())).collect())
}

pub(crate) fn vector_json(field: &Field, v: &[Fe]) -> Value {
    Value::Array(v.iter().map(|&c| json!(field.format(c))).collect())
}

/// Runs `body` on each seeded point of the context's point field with the context
/// lifted to that field, returning the first witness.
pub(crate) fn over_points(
    ctx: &KzContext,
    trials: usize,
    seed: u64,
    mut body: impl FnMut(&KzContext, &EvalPoint) -> Result<Option<Value>>,
) -> Result<Option<Value>> {
    let (field, points) = sample_points(ctx, trials, seed)?;
    let lifted = ctx.lifted_to(&field)?;
    for a in &points {
        if let Some(w) = body(&lifted, a)? {
            return Ok(Some(w));
        }
    }
    Ok(None)
}

/// `Psi_k(a) Psi_l(a) = 0` for all pairs of directions at seeded points.
pub fn nilpotency_check(ctx: &KzContext, trials: usize, seed: u64) -> Certificate {
    let name = "nilpotency";
    let n = ctx.n();
    let params = ctx.params_with(&[("trials", json!(trials)), ("pairs", json!(n * n))]);
    if !ctx.h_in_prime_field() {
        return Certificate::not_applicable(name, params, "h is not in the prime field");
    }
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    let outcome = over_points(ctx, trials, seed, |lifted, a| {
        let field = lifted.field();
        let psis = (1..=n).map(|k| psi_at_point(lifted, k, a)).collect::<Result<Vec<_>>>()?;
        for x in &psis {
            for y in &psis {
                let prod = x.full.mul(field, &y.full);
                if !prod.is_zero() {
                    return Ok(Some(json!({
                        "point": a.to_json(field),
                        "k": x.k,
                        "l": y.k,
                        "product": matrix_json(field, &prod),
                    })));
                }
            }
        }
        Ok(None)
    });
    Certificate::from_outcome(name, params, seed, outcome)
}

/// Rank structure of the p-curvature at seeded points.
///
/// When `h = 0`, `dPlus = 0` or `dPlus = n - 1` every `Psi_k(a)` must vanish.
/// Otherwise each `Psi_k(a)` has rank one on `V`, kills every p-hypergeometric
/// solution of level `h`, its kernel on `V` is cut out by the functional `phi` and its
/// image is spanned by `u` (see [`kernel_and_image`]).
pub fn rank_structure_check(plus: &QFamily, minus: &QFamily, trials: usize, seed: u64) -> Certificate {
    let name = "rank-structure";
    let ctx = &plus.ctx;
    let n = ctx.n();
    let d = ctx.d_plus();
    let vanishing = ctx.h_lift().is_none() || d == 0 || d == n - 1;
    let case = if vanishing { "vanishing" } else { "rank-one" };
    let params = ctx.params_with(&[("trials", json!(trials)), ("case", json!(case))]);
    if !ctx.h_in_prime_field() {
        return Certificate::not_applicable(name, params, "h is not in the prime field");
    }
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    let outcome = over_points(ctx, trials, seed, |lifted, a| {
        let field = lifted.field();
        let flats = evaluate_family(field, plus, a)?;
        for k in 1..=n {
            let psi = psi_at_point(lifted, k, a)?;
            let witness = |what: &str, extra: Value| {
                Some(json!({"point": a.to_json(field), "k": k, "failure": what, "detail": extra}))
            };
            if vanishing {
                if !psi.full.is_zero() {
                    return Ok(witness("nonzero", matrix_json(field, &psi.full)));
                }
                continue;
            }
            let on_v = psi.on_v();
            let rank = on_v.rank(field);
            if rank != 1 {
                return Ok(witness("rank", json!(rank)));
            }
            for (l, q) in flats.iter().enumerate() {
                let image = psi.apply(q);
                if image.iter().any(|c| !c.is_zero()) {
                    return Ok(witness("flat-section", json!({"l": l + 1, "image": vector_json(field, &image)})));
                }
            }
            let (phi, u) = kernel_and_image(field, plus, minus, k, a)?;
            // phi restricted to V in the basis e_i - e_n.
            let phi_v: Vec<Fe> = (0..n - 1).map(|i| field.sub(phi[i], phi[n - 1])).collect();
            let u_v = u[..n - 1].to_vec();
            let mut rows: Vec<Vec<Fe>> = (0..n - 1).map(|i| on_v.row(i).to_vec()).collect();
            rows.push(phi_v.clone());
            let kernel_ok = phi_v.iter().any(|c| !c.is_zero()) && Matrix::from_rows(&rows).rank(field) == 1;
            if !kernel_ok {
                return Ok(witness("kernel", json!({"functional": vector_json(field, &phi)})));
            }
            let mut cols: Vec<Vec<Fe>> = (0..n - 1).map(|j| on_v.col(j)).collect();
            cols.push(u_v.clone());
            let image_ok = u_v.iter().any(|c| !c.is_zero()) && Matrix::from_rows(&cols).rank(field) == 1;
            if !image_ok {
                return Ok(witness("image", json!({"generator": vector_json(field, &u)})));
            }
        }
        Ok(None)
    });
    Certificate::from_outcome(name, params, seed, outcome)
}

/// Right-hand sides of the closed formulas for `Psi^h_k(a) v` and `Psi^{-h}_k(a) v`:
///
/// `h / C_k(a)^p * S(phi, v) * u` and `-h / C_k(a)^p * S(u, v) * phi`,
///
/// where `phi` and `u` are the weighted sums of the evaluated `-h` and `+h`
/// families (see [`kernel_and_image`]) and `C_k(a) = prod_{i != k} (a_k - a_i)`.
pub fn closed_form_values(
    field: &Field,
    h: Fe,
    plus_values: &[Vec<Fe>],
    minus_values: &[Vec<Fe>],
    k: usize,
    a: &EvalPoint,
    v: &[Fe],
) -> Result<(Vec<Fe>, Vec<Fe>)> {
    let n = a.len();
    let k0 = check_direction(k, n)?;
    let u = weighted_sum(field, plus_values, a.coords(), k0, n);
    let phi = weighted_sum(field, minus_values, a.coords(), k0, n);
    let c = field.pow(vandermonde_factor(field, a.coords(), k0), field.p());
    let scale = field.div(h, c)?;
    let plus_coef = field.mul(scale, shapovalov(field, &phi, v)?);
    let minus_coef = field.neg(field.mul(scale, shapovalov(field, &u, v)?));
    Ok((
        u.iter().map(|&x| field.mul(plus_coef, x)).collect(),
        phi.iter().map(|&x| field.mul(minus_coef, x)).collect(),
    ))
}

/// Tracks whether every compared pair satisfies `lhs = c * rhs` for one common `c`.
struct RatioTracker {
    ratio: Option<Fe>,
    consistent: bool,
}

impl RatioTracker {
    fn new() -> RatioTracker {
        RatioTracker { ratio: None, consistent: true }
    }

    fn observe(&mut self, field: &Field, lhs: &[Fe], rhs: &[Fe]) {
        for (&l, &r) in lhs.iter().zip(rhs) {
            if r.is_zero() {
                self.consistent &= l.is_zero();
                continue;
            }
            let c = field.div(l, r).expect("nonzero");
            match self.ratio {
                None => self.ratio = Some(c),
                Some(prev) => self.consistent &= prev == c,
            }
        }
    }

    fn to_json(&self, field: &Field) -> Value {
        match (self.consistent, self.ratio) {
            (true, Some(c)) => json!({
                "global_ratio": field.format(c),
                "ratio_is_minus_one": c == field.neg(Fe::ONE),
            }),
            _ => json!({"global_ratio": Value::Null, "ratio_is_minus_one": false}),
        }
    }
}

/// The closed formulas of [`closed_form_values`] against the jet computation of
/// both `Psi^h_k(a)` and `Psi^{-h}_k(a)` at seeded points, on the basis `e_i - e_n`
/// of `V`, entrywise.
///
/// On failure the scan continues over all points, and the witness reports the
/// first mismatch together with the common ratio `jets / formula` when one exists.
pub fn closed_form_check(plus: &QFamily, minus: &QFamily, trials: usize, seed: u64) -> Certificate {
    let name = "closed-form";
    let ctx = &plus.ctx;
    let n = ctx.n();
    let params = ctx.params_with(&[("trials", json!(trials))]);
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    if ctx.h_lift().is_none() {
        return Certificate::not_applicable(name, params, "h is zero or not in the prime field");
    }
    let mut first: Option<Value> = None;
    let mut tracker = RatioTracker::new();
    let mut point_field = ctx.field().clone();
    let outcome = over_points(ctx, trials, seed, |lifted, a| {
        let field = lifted.field();
        point_field = field.clone();
        let negated = lifted.negated();
        let xs = evaluate_family(field, plus, a)?;
        let ys = evaluate_family(field, minus, a)?;
        for k in 1..=n {
            let psi_plus = psi_at_point(lifted, k, a)?;
            let psi_minus = psi_at_point(&negated, k, a)?;
            for i in 0..n - 1 {
                let mut v = vec![Fe::ZERO; n];
                v[i] = Fe::ONE;
                v[n - 1] = field.neg(Fe::ONE);
                let (rhs_plus, rhs_minus) = closed_form_values(field, lifted.h(), &xs, &ys, k, a, &v)?;
                for (level, psi, rhs) in [("h", &psi_plus, rhs_plus), ("-h", &psi_minus, rhs_minus)] {
                    let lhs = psi.apply(&v);
                    tracker.observe(field, &lhs, &rhs);
                    if lhs != rhs && first.is_none() {
                        first = Some(json!({
                            "point": a.to_json(field),
                            "k": k,
                            "level": level,
                            "basis_vector": i + 1,
                            "jets": vector_json(field, &lhs),
                            "formula": vector_json(field, &rhs),
                        }));
                    }
                }
            }
        }
        Ok(None)
    });
    let outcome = outcome.map(|_| {
        first.map(|mut w| {
            if let (Value::Object(m), Value::Object(r)) = (&mut w, tracker.to_json(&point_field)) {
                m.extend(r);
            }
            w
        })
    });
    Certificate::from_outcome(name, params, seed, outcome)
}

/// Critical points of `P(x) = prod (x - a_i)` over a point.
#[derive(Clone, Debug)]
pub struct CriticalSet {
    /// Field of the point.
    pub base: Field,
    /// Splitting field of `dP/dx` over the base field.
    pub splitting: Field,
    /// Embedding of the base field into the splitting field.
    pub embedding: Embedding,
    /// The point.
    pub point: EvalPoint,
    /// Roots of `dP/dx` in the splitting field, with multiplicity, sorted.
    pub roots: Vec<Fe>,
}

impl CriticalSet {
    /// Returns `true` when the critical points are pairwise distinct.
    pub fn is_etale(&self) -> bool {
        self.roots.windows(2).all(|w| w[0] != w[1])
    }
}

/// `dP/dx` for `P(x) = prod (x - a_i)`, low degree first.
fn master_derivative(field: &Field, a: &[Fe]) -> Vec<Fe> {
    upoly::derivative(field, &upoly::from_roots(field, a))
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// The critical set over `a` (coordinates in `field`), computed in the deterministic
/// splitting field of `dP/dx`.
pub fn critical_points(field: &Field, a: &EvalPoint) -> Result<CriticalSet> {
    let deriv = master_derivative(field, a.coords());
    if upoly::degree(&deriv) != Some(a.len() - 1) {
        return Err(KzError::CharacteristicDividesN { p: field.p(), n: a.len() });
    }
    let squarefree = upoly::degree(&upoly::gcd(field, &deriv, &upoly::derivative(field, &deriv))) == Some(0);
    let splitting_degree = if squarefree {
        upoly::factor_degrees(field, &deriv).into_iter().fold(1, lcm)
    } else {
        // Split the squarefree part; repeated roots stay in the same field.
        let core = upoly::divrem(field, &deriv, &upoly::gcd(field, &deriv, &upoly::derivative(field, &deriv)))?.0;
        upoly::factor_degrees(field, &core).into_iter().fold(1, lcm)
    };
    let splitting = build_extension(field.p(), field.degree() * splitting_degree)?;
    let embedding = Embedding::new(field, &splitting)?;
    let lifted: Vec<Fe> = deriv.iter().map(|&c| embedding.apply(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6372_6974);
    let roots = upoly::roots(&splitting, &lifted, &mut rng)?;
    let point = EvalPoint::new(a.coords().iter().map(|&c| embedding.apply(c)).collect())?;
    Ok(CriticalSet { base: field.clone(), splitting, embedding, point, roots })
}

/// The predicted characteristic polynomial `prod_c (x - SIGMA (h^p - h) / (a_k - c)^p)`
/// over the critical points, in the splitting field (1-based `k`).
pub fn predicted_charpoly(crit: &CriticalSet, h: Fe, k: usize) -> Result<Vec<Fe>> {
    let l = &crit.splitting;
    let k0 = check_direction(k, crit.point.len())?;
    let h = crit.embedding.apply(h);
    let shift = l.mul(l.from_i64(SIGMA), l.sub(l.frobenius(h), h));
    let ak = crit.point.coords()[k0];
    let eigen = crit
        .roots
        .iter()
        .map(|&c| l.div(shift, l.frobenius(l.sub(ak, c))))
        .collect::<Result<Vec<_>>>()?;
    Ok(upoly::from_roots(l, &eigen))
}

/// Eigenvalues of `Psi_k(a)` for `h` outside the prime field at seeded étale points:
/// the characteristic polynomial of `Psi_k(a)` on `V` equals
/// `prod_c (x - SIGMA (h^p - h) / (a_k - c)^p)`, and `Psi_k(a)` is invertible.
///
/// Points whose critical points collide are skipped; up to `20 * trials` points are
/// drawn to find `trials` étale ones.
pub fn steepest_descent_spectrum_check(ctx: &KzContext, trials: usize, seed: u64) -> Certificate {
    let name = "spectrum";
    let n = ctx.n();
    let params = ctx.params_with(&[("trials", json!(trials)), ("sigma", json!(SIGMA))]);
    if ctx.h_in_prime_field() {
        return Certificate::not_applicable(name, params, "h is in the prime field");
    }
    if ctx.p() == 2 {
        return Certificate::not_applicable(name, params, "characteristic 2");
    }
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    let field = ctx.field().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = || -> Result<Option<Value>> {
        let mut found = 0;
        let mut drawn = 0;
        while found < trials {
            if drawn >= 20 * trials.max(1) {
                return Err(KzError::NotEtale);
            }
            drawn += 1;
            let a = EvalPoint::random(&field, n, &mut rng)?;
            let crit = critical_points(&field, &a)?;
            if !crit.is_etale() {
                continue;
            }
            found += 1;
            let l = &crit.splitting;
            for k in 1..=n {
                let psi = psi_at_point(ctx, k, &a)?.on_v();
                let actual: Vec<Fe> = psi.charpoly(&field).iter().map(|&c| crit.embedding.apply(c)).collect();
                let expected = predicted_charpoly(&crit, ctx.h(), k)?;
                let det = psi.det(&field);
                if actual != expected || det.is_zero() {
                    return Ok(Some(json!({
                        "point": a.to_json(&field),
                        "k": k,
                        "splitting_degree": l.degree(),
                        "charpoly": vector_json(l, &actual),
                        "expected": vector_json(l, &expected),
                        "determinant": field.format(det),
                    })));
                }
            }
        }
        Ok(None)
    };
    Certificate::from_outcome(name, params, seed, run())
}

/// Families of both signs for a context with `h` in the prime field.
pub fn families(ctx: &KzContext) -> Result<(QFamily, QFamily)> {
    Ok((p_solutions(ctx, Sign::Plus)?, p_solutions(ctx, Sign::Minus)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::build_extension;

    fn ctx(p: u64, n: usize, h: u64) -> KzContext {
        KzContext::with_lift(&Field::prime(p).unwrap(), n, h).unwrap()
    }

    fn point(field: &Field, coords: &[u64]) -> EvalPoint {
        EvalPoint::new(coords.iter().map(|&c| field.from_u64(c)).collect()).unwrap()
    }

    /// Rank-one oracle: for `d + f` on a line bundle, `(d + f)^p = f^p + f^(p-1)`.
    fn line_bundle_curvature(k: &Field, h: Fe, a1: Fe, a2: Fe) -> Fe {
        // f(t) = -2h / (a1 - a2 + t); f^(p-1)(0) = -2h (p-1)! (-1)^(p-1) / c^p = 2h / c^p.
        let c = k.sub(a1, a2);
        let cp = k.pow(c, k.p());
        let f0 = k.div(k.mul(k.from_i64(-2), h), c).unwrap();
        let fp = k.pow(f0, k.p());
        let deriv = k.div(k.mul(k.from_u64(2), h), cp).unwrap();
        k.add(fp, deriv)
    }

    #[test]
    fn two_points_irrational_level_matches_line_bundle() {
        let k = build_extension(5, 2).unwrap();
        let h = k.generator();
        let c = KzContext::new(&k, 2, h).unwrap();
        let a = point(&k, &[0, 1]);
        let psi = psi_at_point(&c, 1, &a).unwrap().on_v();
        let oracle = line_bundle_curvature(&k, h, Fe::ZERO, Fe::ONE);
        assert_eq!(psi.get(0, 0), oracle);
        // Closed form -2 (h^5 - h) / (a1 - a2)^5 = 2 (h^5 - h) at a = (0, 1).
        let expected = k.mul(k.from_u64(2), k.sub(k.frobenius(h), h));
        assert_eq!(psi.get(0, 0), expected);
    }

    #[test]
    fn sigma_is_pinned_by_two_points() {
        let k = build_extension(5, 2).unwrap();
        let h = k.generator();
        let a = point(&k, &[0, 1]);
        let c = KzContext::new(&k, 2, h).unwrap();
        let psi = psi_at_point(&c, 1, &a).unwrap().on_v().get(0, 0);
        let crit = critical_points(&k, &a).unwrap();
        assert_eq!(crit.roots.len(), 1);
        let half = k.inv(k.from_u64(2)).unwrap();
        assert_eq!(crit.embedding.apply(half), crit.roots[0]);
        let l = &crit.splitting;
        let raw = l.div(l.sub(l.frobenius(crit.embedding.apply(h)), crit.embedding.apply(h)), l.frobenius(l.sub(Fe::ZERO, crit.roots[0]))).unwrap();
        let psi_l = crit.embedding.apply(psi);
        assert_eq!(psi_l, l.mul(l.from_i64(SIGMA), raw));
        assert_eq!(psi_l, l.neg(raw));
    }

    #[test]
    fn zero_level_and_extreme_counts_vanish() {
        let f = Field::prime(5).unwrap();
        let zero = KzContext::new(&f, 3, Fe::ZERO).unwrap();
        let a = point(&f, &[0, 1, 3]);
        for k in 1..=3 {
            assert!(psi_at_point(&zero, k, &a).unwrap().full.is_zero());
        }
        let c = ctx(5, 2, 3);
        assert_eq!(c.d_plus(), 1);
        let a = point(&f, &[2, 4]);
        assert!(psi_at_point(&c, 1, &a).unwrap().full.is_zero());
    }

    #[test]
    fn rank_one_for_four_points() {
        let c = ctx(5, 4, 2);
        assert_eq!(c.d_plus(), 1);
        let f = c.field().clone();
        let a = point(&f, &[0, 1, 2, 4]);
        for k in 1..=4 {
            assert_eq!(psi_at_point(&c, k, &a).unwrap().rank(), 1);
        }
    }

    #[test]
    fn linearity_over_functions() {
        let c = ctx(7, 3, 3);
        let f = c.field().clone();
        let a = point(&f, &[1, 3, 6]);
        let n = 3;
        // A polynomial section: (z1^2 z2 + 3 z3^8, -z1^2 z2, -3 z3^8) in V.
        let m1 = crate::multipoly::ZPolynomial::from_exps(&f, n, &[(vec![2, 1, 0], Fe::ONE)]);
        let m2 = crate::multipoly::ZPolynomial::from_exps(&f, n, &[(vec![0, 0, 8], f.from_u64(3))]);
        let s = SolutionVector::new(vec![m1.add(&m2), m1.neg(), m2.neg()]);
        let value = s.evaluate(a.coords()).unwrap();
        for k in 1..=n {
            let direct = psi_on_section(&c, k, &a, &s).unwrap();
            let linear = psi_at_point(&c, k, &a).unwrap().apply(&value);
            assert_eq!(direct, linear, "k = {k}");
        }
    }

    #[test]
    fn structure_checks_pass_on_small_cells() {
        for (p, n, h) in [(5, 3, 3), (5, 4, 2), (7, 3, 4), (5, 2, 3), (7, 4, 1), (7, 5, 3), (11, 4, 5)] {
            let c = ctx(p, n, h);
            let (plus, minus) = families(&c).unwrap();
            assert!(nilpotency_check(&c, 3, 1).passed(), "{p} {n} {h}");
            let r = rank_structure_check(&plus, &minus, 3, 1);
            assert!(r.passed(), "{p} {n} {h}: {:?}", r.witness);
        }
    }

    #[test]
    fn closed_form_holds_when_the_operators_vanish() {
        // dPlus = n - 1 and dPlus = 0: both sides are zero.
        for (p, n, h) in [(5, 2, 3), (7, 3, 6), (7, 3, 1)] {
            let c = ctx(p, n, h);
            let (plus, minus) = families(&c).unwrap();
            let cert = closed_form_check(&plus, &minus, 3, 1);
            assert!(cert.passed(), "{p} {n} {h}: {:?}", cert.witness);
        }
    }

    #[test]
    fn jets_are_minus_the_closed_form() {
        // In the rank-one case the jet computation equals -1 times both closed
        // formulas at every entry.
        for (p, n, h) in [(5, 3, 3), (5, 4, 2), (7, 3, 4), (7, 4, 2), (7, 5, 3), (11, 4, 5), (13, 5, 9)] {
            let c = ctx(p, n, h);
            let (plus, minus) = families(&c).unwrap();
            let cert = closed_form_check(&plus, &minus, 3, 1);
            assert!(!cert.passed(), "{p} {n} {h}");
            assert_eq!(cert.witness["ratio_is_minus_one"], json!(true), "{p} {n} {h}: {:?}", cert.witness);
        }
    }

    #[test]
    fn negated_closed_form_matches_jets_entrywise() {
        let c = ctx(7, 4, 3);
        let (plus, minus) = families(&c).unwrap();
        let f = c.field().clone();
        let a = point(&f, &[1, 2, 4, 6]);
        let xs = evaluate_family(&f, &plus, &a).unwrap();
        let ys = evaluate_family(&f, &minus, &a).unwrap();
        let neg = c.negated();
        for k in 1..=4 {
            let psi = psi_at_point(&c, k, &a).unwrap();
            let psi_neg = psi_at_point(&neg, k, &a).unwrap();
            for i in 0..3 {
                let mut v = vec![Fe::ZERO; 4];
                v[i] = Fe::ONE;
                v[3] = f.neg(Fe::ONE);
                let (rp, rm) = closed_form_values(&f, c.h(), &xs, &ys, k, &a, &v).unwrap();
                let flip = |w: Vec<Fe>| w.into_iter().map(|x| f.neg(x)).collect::<Vec<_>>();
                assert_eq!(psi.apply(&v), flip(rp));
                assert_eq!(psi_neg.apply(&v), flip(rm));
            }
        }
    }

    #[test]
    fn kernel_and_image_reject_extreme_counts() {
        let c = ctx(5, 2, 3);
        let (plus, minus) = families(&c).unwrap();
        let a = point(c.field(), &[0, 1]);
        assert!(matches!(kernel_and_image(c.field(), &plus, &minus, 1, &a), Err(KzError::DegenerateCase { .. })));
    }

    #[test]
    fn spectrum_matches_critical_points() {
        for (p, n) in [(5, 2), (7, 3), (5, 3), (7, 4)] {
            let k = build_extension(p, 2).unwrap();
            let c = KzContext::new(&k, n, k.generator()).unwrap();
            let cert = steepest_descent_spectrum_check(&c, 3, 5);
            assert!(cert.passed(), "{p} {n}: {:?}", cert.witness);
        }
    }

    #[test]
    fn spectrum_refuses_rational_level() {
        let c = ctx(7, 3, 2);
        assert_eq!(steepest_descent_spectrum_check(&c, 1, 1).status, crate::cert::Status::NotApplicable);
    }
}
