//! p-hypergeometric solutions.
//!
//! For `h` in the prime field with representative `h~ in [1, p-1]`, the vector
//! `P(x, z)^h~ (1/(x - z_1), ..., 1/(x - z_n))` with `P = prod (x - z_i)` is a
//! polynomial in `x` whose coefficients are polynomial vectors in `z`. The
//! coefficients of `x^(lp - 1)` are flat sections of the KZ connection modulo `p`.
//! The same construction with `p - h~` produces the solutions at level `-h`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::cert::Certificate;
use crate::error::{KzError, Result};
use crate::fields::{Fe, Field};
use crate::kz_core::{shapovalov, shapovalov_poly, KzContext, SolutionVector};
use crate::linalg::Matrix;
use crate::multipoly::{master_power, EvalPoint, Mono, XSeries, ZPolynomial};

/// Which level a family of solutions belongs to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    /// Solutions of the system at level `h`.
    Plus,
    /// Solutions of the system at level `-h`.
    Minus,
}

impl Sign {
    /// Wire name.
    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// The p-hypergeometric solutions of one sign.
#[derive(Clone, Debug)]
pub struct QFamily {
    /// The context at level `h` (for both signs).
    pub ctx: KzContext,
    /// The sign of the level the vectors solve.
    pub sign: Sign,
    /// The exponent of the master polynomial: `h~` for `+`, `p - h~` for `-`.
    pub exponent: u32,
    /// `vectors[l - 1]` is the coefficient of `x^(lp - 1)`.
    pub vectors: Vec<SolutionVector>,
}

impl QFamily {
    /// The context whose connection annihilates the vectors.
    pub fn level_ctx(&self) -> KzContext {
        match self.sign {
            Sign::Plus => self.ctx.clone(),
            Sign::Minus => self.ctx.negated(),
        }
    }

    /// Number of vectors.
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    /// Returns `true` for an empty family.
    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Expected total degree of the `l`-th vector (1-based), `n e - l p`.
    pub fn expected_degree(&self, l: usize) -> u32 {
        self.ctx.n() as u32 * self.exponent - l as u32 * self.ctx.p() as u32
    }

    /// A copy whose first vector is perturbed while keeping the component sum zero.
    ///
    /// Used as a negative control: checks that should hold for genuine solutions
    /// must fail on the perturbed family.
    pub fn mutated(&self) -> QFamily {
        let mut out = self.clone();
        if let Some(v) = out.vectors.first_mut() {
            let field = self.ctx.field();
            let n = self.ctx.n();
            let m = v.comps[0].terms().first().map_or(Mono::new(&vec![0; n]), |t| t.0);
            let bump = ZPolynomial::term(field, n, m, Fe::ONE);
            v.comps[0] = v.comps[0].add(&bump);
            v.comps[1] = v.comps[1].sub(&bump);
        }
        out
    }

    /// JSON form: sign, exponent and the list of vectors.
    pub fn to_json(&self) -> Value {
        json!({
            "sign": self.sign.as_str(),
            "exponent": self.exponent,
            "vectors": self.vectors.iter().map(SolutionVector::to_json).collect::<Vec<_>>(),
        })
    }
}

/// The quotient `P^e / (x - z_j)` as an [`XSeries`] (0-based `j`).
pub fn quotient_series(field: &Field, n: usize, exponent: u32, j: usize) -> Result<XSeries> {
    let top = n * exponent as usize;
    let all: Vec<usize> = (0..top).collect();
    let slices = divide_master_power(field, n, exponent, &all)?;
    Ok(XSeries::new(field, n, slices.into_iter().map(|mut per_j| per_j.swap_remove(j)).collect()))
}

/// Selected coefficients of `P^e (1/(x - z_1), ..., 1/(x - z_n))`.
///
/// `out[w][j]` is the coefficient of `x^wanted[w]` in `P^e / (x - z_j)`. Each
/// quotient is produced by synthetic division of one shared expansion of `P^e`;
/// only the requested slices are kept.
fn divide_master_power(field: &Field, n: usize, exponent: u32, wanted: &[usize]) -> Result<Vec<Vec<ZPolynomial>>> {
    if exponent == 0 {
        return Err(KzError::InvalidLevel("the master polynomial exponent must be positive".into()));
    }
    let top = n * exponent as usize;
    if let Some(&w) = wanted.iter().find(|&&w| w >= top) {
        return Err(KzError::IndexOutOfRange { index: w, min: 0, max: top - 1 });
    }
    let power = master_power(field, n, exponent)?;
    let mut out: Vec<Vec<ZPolynomial>> = vec![Vec::with_capacity(n); wanted.len()];
    let lowest = wanted.iter().copied().min();
    for j in 0..n {
        let zj = Mono::var_pow(j, 1);
        // The quotient coefficients satisfy R_{top-1} = 1 and R_{i-1} = P_i + z_j R_i.
        let mut r = ZPolynomial::constant(field, n, Fe::ONE);
        let mut i = top - 1;
        loop {
            for (w, &target) in wanted.iter().enumerate() {
                if target == i {
                    out[w].push(r.clone());
                }
            }
            if i == 0 {
                break;
            }
            if lowest.is_some_and(|l| i <= l) {
                // Nothing below is requested; skip the remaining steps and the remainder test.
                break;
            }
            r = r.mul_term(zj, Fe::ONE).add(&power.coeff(i));
            i -= 1;
        }
        if i == 0 && !r.mul_term(zj, Fe::ONE).add(&power.coeff(0)).is_zero() {
            return Err(KzError::Unsupported("division by (x - z_j) left a remainder".into()));
        }
    }
    Ok(out)
}

/// Every coefficient slice `Q^(i)` of `P^h~ (1/(x - z_j))_j`, for `i = 0 .. n h~ - 1`.
pub fn q_expansion(ctx: &KzContext) -> Result<Vec<SolutionVector>> {
    if !ctx.h_in_prime_field() {
        return Err(KzError::RationalH);
    }
    let e = ctx.require_rational_h()?;
    let all: Vec<usize> = (0..ctx.n() * e as usize).collect();
    Ok(divide_master_power(ctx.field(), ctx.n(), e, &all)?.into_iter().map(SolutionVector::new).collect())
}

/// The slices `Q^(lp - 1)` of `P^e (1/(x - z_j))_j` for `l = 1 .. floor(n e / p)`.
pub fn q_slices(field: &Field, n: usize, exponent: u32) -> Result<Vec<SolutionVector>> {
    let p = field.p() as usize;
    let count = n * exponent as usize / p;
    if count == 0 {
        return Ok(Vec::new());
    }
    let wanted: Vec<usize> = (1..=count).map(|l| l * p - 1).collect();
    Ok(divide_master_power(field, n, exponent, &wanted)?.into_iter().map(SolutionVector::new).collect())
}

/// The p-hypergeometric family of the given sign.
///
/// For `h = 0` both families are empty.
pub fn p_solutions(ctx: &KzContext, sign: Sign) -> Result<QFamily> {
    if !ctx.h_in_prime_field() {
        return Err(KzError::RationalH);
    }
    let Some(h) = ctx.h_lift() else {
        return Ok(QFamily { ctx: ctx.clone(), sign, exponent: 0, vectors: Vec::new() });
    };
    let exponent = match sign {
        Sign::Plus => h,
        Sign::Minus => ctx.p() as u32 - h,
    };
    let vectors = q_slices(ctx.field(), ctx.n(), exponent)?;
    Ok(QFamily { ctx: ctx.clone(), sign, exponent, vectors })
}

fn first_term(field: &Field, p: &ZPolynomial) -> Value {
    p.terms().first().map_or(Value::Null, |&(m, c)| json!({"monomial": m.exps(p.nvars()), "coefficient": field.format(c)}))
}

/// Left side `-(P^h~ / (x - z_j))^(p-1)` of the derivative identity (0-based `j`).
fn derivative_left(field: &Field, n: usize, exponent: u32, j: usize) -> Result<XSeries> {
    let q = quotient_series(field, n, exponent, j)?;
    Ok(q.derivative(field.p() as usize - 1).scale(field.neg(Fe::ONE)))
}

/// Verifies `-(P^h~ / (x - z_j))^(p-1) = sum_l Q_j^(lp-1) x^(p(l-1))` exactly (1-based `j`).
pub fn derivative_identity_check(ctx: &KzContext, j: usize) -> Certificate {
    let name = "derivative-identity";
    let params = ctx.params_with(&[("j", json!(j))]);
    let e = match ctx.require_rational_h() {
        Ok(e) if ctx.h_in_prime_field() => e,
        _ => return Certificate::error(name, params, &KzError::RationalH.to_string()),
    };
    if j == 0 || j > ctx.n() {
        return Certificate::error(name, params, &KzError::IndexOutOfRange { index: j, min: 1, max: ctx.n() }.to_string());
    }
    let field = ctx.field();
    let n = ctx.n();
    let run = || -> Result<Option<Value>> {
        let left = derivative_left(field, n, e, j - 1)?;
        let family = q_slices(field, n, e)?;
        let p = ctx.p() as usize;
        let top = left.degree().map_or(0, |d| d + 1).max(family.len() * p);
        for i in 0..top {
            let right = if i % p == 0 && i / p < family.len() {
                family[i / p].comps[j - 1].clone()
            } else {
                ZPolynomial::zero(field, n)
            };
            let diff = left.coeff(i).sub(&right);
            if !diff.is_zero() {
                return Ok(Some(json!({"x_power": i, "term": first_term(field, &diff)})));
            }
        }
        Ok(None)
    };
    match run() {
        Ok(None) => Certificate::pass(name, params),
        Ok(Some(w)) => Certificate::fail(name, params, w),
        Err(err) => Certificate::error(name, params, &err.to_string()),
    }
}

/// Verifies that the left sides of the derivative identity sum to zero over `j`.
pub fn derivative_sum_check(ctx: &KzContext) -> Certificate {
    let name = "derivative-sum";
    let params = ctx.params_json();
    let e = match ctx.require_rational_h() {
        Ok(e) if ctx.h_in_prime_field() => e,
        _ => return Certificate::error(name, params, &KzError::RationalH.to_string()),
    };
    let field = ctx.field();
    let n = ctx.n();
    let run = || -> Result<Option<Value>> {
        let lefts: Vec<XSeries> = (0..n).map(|j| derivative_left(field, n, e, j)).collect::<Result<_>>()?;
        let top = lefts.iter().filter_map(XSeries::degree).max().map_or(0, |d| d + 1);
        for i in 0..top {
            let sum = lefts.iter().fold(ZPolynomial::zero(field, n), |acc, s| acc.add(&s.coeff(i)));
            if !sum.is_zero() {
                return Ok(Some(json!({"x_power": i, "term": first_term(field, &sum)})));
            }
        }
        Ok(None)
    };
    match run() {
        Ok(None) => Certificate::pass(name, params),
        Ok(Some(w)) => Certificate::fail(name, params, w),
        Err(err) => Certificate::error(name, params, &err.to_string()),
    }
}

/// Runs the flatness verifier on every member of a family at its own level.
pub fn family_flatness_check(family: &QFamily) -> Certificate {
    let level = family.level_ctx();
    let params = family.ctx.params_with(&[("sign", json!(family.sign.as_str())), ("count", json!(family.len()))]);
    for (idx, v) in family.vectors.iter().enumerate() {
        let c = crate::kz_core::flatness_check(&level, v);
        if !c.passed() {
            let mut witness = c.witness;
            if let Value::Object(m) = &mut witness {
                m.insert("l".into(), json!(idx + 1));
            }
            return Certificate::new("flatness", params, c.status).with_witness(witness);
        }
    }
    Certificate::pass("flatness", params)
}

/// Verifies homogeneity of degree `n e - l p` and the bounds
/// `deg_{z_i} Q_j <= e - [i = j]` for every member of a family.
pub fn homogeneity_check(family: &QFamily) -> Certificate {
    let name = "homogeneity";
    let params = family.ctx.params_with(&[("sign", json!(family.sign.as_str()))]);
    let n = family.ctx.n();
    for (idx, v) in family.vectors.iter().enumerate() {
        let expected = family.expected_degree(idx + 1);
        for (j, comp) in v.comps.iter().enumerate() {
            for &(m, _) in comp.terms() {
                let exps = m.exps(n);
                let bad_degree = m.degree() != expected;
                let bad_var = (0..n).find(|&i| exps[i] > family.exponent - u32::from(i == j));
                if bad_degree || bad_var.is_some() {
                    return Certificate::fail(
                        name,
                        params,
                        json!({
                            "l": idx + 1,
                            "component": j + 1,
                            "monomial": exps,
                            "expected_degree": expected,
                            "variable": bad_var.map(|i| i + 1),
                        }),
                    );
                }
            }
        }
    }
    Certificate::pass(name, params)
}

/// Verifies `dPlus + dMinus = n - 1` for the generated families.
pub fn counting_check(ctx: &KzContext, plus: &QFamily, minus: &QFamily) -> Certificate {
    let name = "counting";
    let params = ctx.params_json();
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    if ctx.h_lift().is_none() {
        return Certificate::not_applicable(name, params, "h is zero or not in the prime field");
    }
    let witness = json!({"d_plus": plus.len(), "d_minus": minus.len(), "expected": ctx.n() - 1});
    if plus.len() == ctx.d_plus() && minus.len() == ctx.d_minus() && plus.len() + minus.len() == ctx.n() - 1 {
        Certificate::pass(name, params).with_witness(witness)
    } else {
        Certificate::fail(name, params, witness)
    }
}

pub(crate) fn sample_points(ctx: &KzContext, trials: usize, seed: u64) -> Result<(Field, Vec<EvalPoint>)> {
    let field = ctx.point_field()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..trials).map(|_| EvalPoint::random(&field, ctx.n(), &mut rng)).collect::<Result<_>>()?;
    Ok((field, points))
}

pub(crate) fn evaluate_family(field: &Field, family: &QFamily, a: &EvalPoint) -> Result<Vec<Vec<Fe>>> {
    family.vectors.iter().map(|v| v.evaluate_in(field, a.coords())).collect()
}

/// At `trials` seeded random points, the `dPlus x n` matrix of values has rank `dPlus`.
pub fn point_independence_check(family: &QFamily, trials: usize, seed: u64) -> Certificate {
    let name = "point-independence";
    let ctx = &family.ctx;
    let params = ctx.params_with(&[("sign", json!(family.sign.as_str())), ("trials", json!(trials))]);
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    let run = || -> Result<Option<Value>> {
        let (field, points) = sample_points(ctx, trials, seed)?;
        for a in &points {
            let rows = evaluate_family(&field, family, a)?;
            if rows.is_empty() {
                continue;
            }
            let rank = Matrix::from_rows(&rows).rank(&field);
            if rank != rows.len() {
                return Ok(Some(json!({"point": a.to_json(&field), "rank": rank, "expected": rows.len()})));
            }
        }
        Ok(None)
    };
    match run() {
        Ok(None) => Certificate::pass(name, params).with_seed(seed),
        Ok(Some(w)) => Certificate::fail(name, params, w).with_seed(seed),
        Err(err) => Certificate::error(name, params, &err.to_string()).with_seed(seed),
    }
}

/// Every pairing `S(Q^(lp-1)(z, h), Q^(mp-1)(z, -h))` is the zero polynomial.
pub fn orthogonality_check(plus: &QFamily, minus: &QFamily) -> Certificate {
    let name = "orthogonality";
    let ctx = &plus.ctx;
    let params = ctx.params_with(&[("pairs", json!(plus.len() * minus.len()))]);
    for (l, x) in plus.vectors.iter().enumerate() {
        for (m, y) in minus.vectors.iter().enumerate() {
            match shapovalov_poly(x, y) {
                Ok(s) if s.is_zero() => {}
                Ok(s) => {
                    return Certificate::fail(
                        name,
                        params,
                        json!({"l": l + 1, "m": m + 1, "term": first_term(ctx.field(), &s)}),
                    )
                }
                Err(err) => return Certificate::error(name, params, &err.to_string()),
            }
        }
    }
    Certificate::pass(name, params)
}

/// At seeded random points: the Gram block between the two families vanishes and
/// `y -> S(., y)` identifies the span of the `-h` family with the dual of `V / U_h`,
/// where `U_h` is the span of the `+h` family.
///
/// The identification holds when both families have full rank, their counts add up
/// to `n - 1`, and the pairing of `V` with the `-h` family has full rank. The two
/// spans need not be complementary: an isotropic vector can lie in both. The
/// witness reports how many sampled points had complementary spans.
pub fn lagrangian_check(plus: &QFamily, minus: &QFamily, trials: usize, seed: u64) -> Certificate {
    let name = "lagrangian";
    let ctx = &plus.ctx;
    let params = ctx.params_with(&[("trials", json!(trials))]);
    if ctx.p_divides_n() {
        return Certificate::not_applicable(name, params, "p divides n");
    }
    if ctx.h_lift().is_none() {
        return Certificate::not_applicable(name, params, "h is zero or not in the prime field");
    }
    let n = ctx.n();
    if plus.len() + minus.len() != n - 1 {
        return Certificate::fail(name, params, json!({"d_plus": plus.len(), "d_minus": minus.len()}));
    }
    let rank_of = |field: &Field, rows: &[Vec<Fe>]| if rows.is_empty() { 0 } else { Matrix::from_rows(rows).rank(field) };
    let run = || -> Result<std::result::Result<usize, Value>> {
        let (field, points) = sample_points(ctx, trials, seed)?;
        let mut complementary = 0;
        for a in &points {
            let xs = evaluate_family(&field, plus, a)?;
            let ys = evaluate_family(&field, minus, a)?;
            for (l, x) in xs.iter().enumerate() {
                for (m, y) in ys.iter().enumerate() {
                    let s = shapovalov(&field, x, y)?;
                    if !s.is_zero() {
                        return Ok(Err(json!({
                            "point": a.to_json(&field),
                            "l": l + 1,
                            "m": m + 1,
                            "pairing": field.format(s),
                        })));
                    }
                }
            }
            // Pairing of the basis e_i - e_n of V with the -h family.
            let pairing: Vec<Vec<Fe>> =
                ys.iter().map(|y| (0..n - 1).map(|i| field.sub(y[i], y[n - 1])).collect()).collect();
            let ranks = (rank_of(&field, &xs), rank_of(&field, &ys), rank_of(&field, &pairing));
            if ranks != (xs.len(), ys.len(), ys.len()) {
                return Ok(Err(json!({
                    "point": a.to_json(&field),
                    "rank_plus": ranks.0,
                    "rank_minus": ranks.1,
                    "rank_pairing": ranks.2,
                })));
            }
            // Coordinates of V in the basis e_i - e_n are the first n - 1 entries.
            let stacked: Vec<Vec<Fe>> = xs.iter().chain(&ys).map(|v| v[..n - 1].to_vec()).collect();
            if rank_of(&field, &stacked) == n - 1 {
                complementary += 1;
            }
        }
        Ok(Ok(complementary))
    };
    match run() {
        Ok(Ok(c)) => Certificate::pass(name, params).with_witness(json!({"complementary_points": c})).with_seed(seed),
        Ok(Err(w)) => Certificate::fail(name, params, w).with_seed(seed),
        Err(err) => Certificate::error(name, params, &err.to_string()).with_seed(seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kz_core::flatness_check;

    fn ctx(p: u64, n: usize, h: u64) -> KzContext {
        KzContext::with_lift(&Field::prime(p).unwrap(), n, h).unwrap()
    }

    fn poly(field: &Field, n: usize, terms: &[(&[u32], i64)]) -> ZPolynomial {
        let t: Vec<(Vec<u32>, Fe)> = terms.iter().map(|(e, c)| (e.to_vec(), field.from_i64(*c))).collect();
        ZPolynomial::from_exps(field, n, &t)
    }

    #[test]
    fn expansion_for_h_one() {
        let c = ctx(5, 2, 1);
        let f = c.field().clone();
        let q = q_expansion(&c).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].comps, vec![poly(&f, 2, &[(&[0, 1], -1)]), poly(&f, 2, &[(&[1, 0], -1)])]);
        assert_eq!(q[1].comps, vec![poly(&f, 2, &[(&[0, 0], 1)]); 2]);
    }

    #[test]
    fn expansion_matches_product_of_factors() {
        // Oracle: multiply out prod_{s != j} (x - z_s)^e (x - z_j)^(e-1) directly.
        let c = ctx(7, 3, 3);
        let f = c.field().clone();
        let q = q_expansion(&c).unwrap();
        for j in 0..3 {
            let mut series = XSeries::new(&f, 3, vec![ZPolynomial::constant(&f, 3, Fe::ONE)]);
            for s in 0..3 {
                let e = if s == j { 2 } else { 3 };
                for _ in 0..e {
                    let lin = XSeries::new(&f, 3, vec![ZPolynomial::var(&f, 3, s).neg(), ZPolynomial::constant(&f, 3, Fe::ONE)]);
                    series = series.mul(&lin).unwrap();
                }
            }
            for (i, v) in q.iter().enumerate() {
                assert_eq!(v.comps[j], series.coeff(i), "slice {i} component {j}");
            }
        }
        let top = q.last().unwrap();
        assert!(top.comps.iter().all(|c| *c == ZPolynomial::constant(&f, 3, Fe::ONE)));
    }

    #[test]
    fn two_point_family() {
        let c = ctx(5, 2, 3);
        let f = c.field().clone();
        let fam = p_solutions(&c, Sign::Plus).unwrap();
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.vectors[0].comps[0], poly(&f, 2, &[(&[1, 0], 3), (&[0, 1], 2)]));
        assert_eq!(fam.vectors[0].comps[1], poly(&f, 2, &[(&[1, 0], 2), (&[0, 1], 3)]));
        let a = EvalPoint::new(vec![Fe(0), Fe(1)]).unwrap();
        assert_eq!(fam.vectors[0].evaluate(a.coords()).unwrap(), vec![Fe(2), Fe(3)]);
        assert!(p_solutions(&c, Sign::Minus).unwrap().is_empty());
        assert!(point_independence_check(&fam, 5, 1).passed());
        assert!(lagrangian_check(&fam, &p_solutions(&c, Sign::Minus).unwrap(), 5, 1).passed());
    }

    #[test]
    fn counts_and_empty_families() {
        assert!(p_solutions(&ctx(5, 3, 1), Sign::Plus).unwrap().is_empty());
        let c = ctx(5, 3, 3);
        let plus = p_solutions(&c, Sign::Plus).unwrap();
        let minus = p_solutions(&c, Sign::Minus).unwrap();
        assert_eq!((plus.len(), minus.len()), (1, 1));
        assert!(counting_check(&c, &plus, &minus).passed());
        assert!(orthogonality_check(&plus, &minus).passed());
        assert!(lagrangian_check(&plus, &minus, 5, 2).passed());
    }

    #[test]
    fn irrational_level_is_rejected() {
        let f = crate::fields::build_extension(5, 2).unwrap();
        let c = KzContext::new(&f, 3, f.generator()).unwrap();
        assert_eq!(q_expansion(&c).unwrap_err(), KzError::RationalH);
        assert_eq!(p_solutions(&c, Sign::Plus).unwrap_err(), KzError::RationalH);
    }

    #[test]
    fn families_are_flat_homogeneous_and_orthogonal() {
        for &(p, n, h) in &[(5u64, 3usize, 3u64), (7, 4, 4), (7, 3, 5), (5, 4, 2), (11, 3, 7)] {
            let c = ctx(p, n, h);
            let plus = p_solutions(&c, Sign::Plus).unwrap();
            let minus = p_solutions(&c, Sign::Minus).unwrap();
            for fam in [&plus, &minus] {
                assert!(family_flatness_check(fam).passed(), "p={p} n={n} h={h}");
                assert!(homogeneity_check(fam).passed());
                for v in &fam.vectors {
                    assert!(v.in_v());
                }
            }
            assert!(orthogonality_check(&plus, &minus).passed());
            assert!(counting_check(&c, &plus, &minus).passed());
            let lag = lagrangian_check(&plus, &minus, 4, 3);
            assert!(lag.passed(), "{}", lag.to_line());
            assert!(derivative_sum_check(&c).passed());
            for j in 1..=n {
                assert!(derivative_identity_check(&c, j).passed());
            }
        }
        let c = ctx(7, 4, 4);
        assert_eq!((c.d_plus(), c.d_minus()), (2, 1));
    }

    #[test]
    fn isotropic_solution_lies_in_both_spans() {
        // At this point the -h solution is twice the second +h solution, and it is
        // isotropic: the spans are not complementary, yet the duality still holds.
        let c = ctx(7, 4, 4);
        let f = c.field().clone();
        let plus = p_solutions(&c, Sign::Plus).unwrap();
        let minus = p_solutions(&c, Sign::Minus).unwrap();
        let a = EvalPoint::new(vec![Fe(4), Fe(0), Fe(1), Fe(6)]).unwrap();
        let xs = evaluate_family(&f, &plus, &a).unwrap();
        let ys = evaluate_family(&f, &minus, &a).unwrap();
        let twice: Vec<Fe> = xs[1].iter().map(|&v| f.mul(Fe(2), v)).collect();
        assert_eq!(ys[0], twice);
        assert!(shapovalov(&f, &ys[0], &ys[0]).unwrap().is_zero());
        let cert = lagrangian_check(&plus, &minus, 4, 3);
        assert!(cert.passed());
        assert_eq!(cert.witness["complementary_points"], json!(3));
    }

    #[test]
    fn mutated_families_fail() {
        let c = ctx(7, 4, 4);
        let plus = p_solutions(&c, Sign::Plus).unwrap();
        let minus = p_solutions(&c, Sign::Minus).unwrap();
        let bad = plus.mutated();
        assert!(!family_flatness_check(&bad).passed());
        assert!(!orthogonality_check(&bad, &minus).passed());
        assert!(!flatness_check(&c, &bad.vectors[0]).witness.is_null());
    }

    #[test]
    fn derivative_identity_two_points() {
        // Oracle: -(d/dx)^4 of (x - z_1)^2 (x - z_2)^3 is -4! times its x^4 coefficient.
        let c = ctx(5, 2, 3);
        let f = c.field().clone();
        assert!(derivative_identity_check(&c, 1).passed());
        let left = derivative_left(&f, 2, 3, 0).unwrap();
        let x4 = poly(&f, 2, &[(&[1, 0], -2), (&[0, 1], -3)]);
        assert_eq!(left.coeff(0), x4.scale(f.from_i64(-24)));
        assert!(left.coeff(1).is_zero());
    }

    #[test]
    fn extension_point_field_for_small_primes() {
        let c = ctx(5, 6, 2);
        assert_eq!(c.point_field().unwrap().order(), 25);
        let plus = p_solutions(&c, Sign::Plus).unwrap();
        assert!(point_independence_check(&plus, 3, 4).passed());
    }
}
