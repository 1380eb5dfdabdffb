//! Run configuration and the ordered verification suite.
//!
//! A [`RunConfig`] describes one cell: the number of points, the field, the level
//! and the sampling parameters. [`Suite`] runs the checks for that cell in a fixed
//! order and returns one certificate per check (two for checks that are run on each
//! family sign), so the emitted stream is deterministic for a fixed configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cert::{Certificate, Status};
use crate::curvecoh::{genus_identity_check, katz_composition_check, linkage_for, Linkage};
use crate::error::{KzError, Result};
use crate::fields::{build_extension, Field};
use crate::hyperg::{
    counting_check, family_flatness_check, homogeneity_check, lagrangian_check, orthogonality_check,
    point_independence_check, sample_points, QFamily,
};
use crate::kz_core::KzContext;
use crate::pcurv::{closed_form_check, families, nilpotency_check, rank_structure_check, steepest_descent_spectrum_check};
use crate::solspace::{hyperg_span_check, module_rank_check, no_solution_check, Method};

/// The level: an integer (read in the prime field) or the coefficient list of an
/// element of the extension field in its power basis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSpec {
    /// An integer representative.
    Integer(u64),
    /// Coefficients `c_0, c_1, ...` of `c_0 + c_1 g + ...` for the field generator `g`.
    Coefficients(Vec<u64>),
}

impl Default for LevelSpec {
    fn default() -> Self {
        LevelSpec::Integer(1)
    }
}

/// How the auxiliary curve exponent is chosen.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LinkageSpec {
    /// A fixed exponent `q`.
    Exponent(u64),
    /// The literal string `"auto"`: smallest admissible exponent by ascending scan.
    Auto(String),
}

fn one() -> usize {
    1
}

fn default_trials() -> usize {
    5
}

/// Configuration of one run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Number of points `z_1, ..., z_n`.
    pub n: usize,
    /// Characteristic.
    pub p: u64,
    /// Degree of the coefficient field over the prime field.
    #[serde(default = "one")]
    pub ext_degree: usize,
    /// The level `h`.
    #[serde(default)]
    pub h: LevelSpec,
    /// Seed for all sampled points.
    #[serde(default)]
    pub seed: u64,
    /// Number of sampled points per pointwise check.
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Truncation `D` for formal solutions (jets modulo total degree `>= D`); defaults to `p`.
    #[serde(default)]
    pub depth: Option<u32>,
    /// Auxiliary curve exponent for the Katz composition; absent means the check is skipped.
    #[serde(default)]
    pub q: Option<LinkageSpec>,
    /// Output path for the certificate stream; absent means standard output.
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// A configuration with default sampling parameters.
    pub fn new(n: usize, p: u64, h: LevelSpec) -> RunConfig {
        RunConfig { n, p, ext_degree: 1, h, seed: 0, trials: default_trials(), depth: None, q: None, out: None }
    }

    /// Parses a JSON configuration.
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| KzError::InvalidConfig(e.to_string()))
    }

    /// The coefficient field `F_{p^k}`; fails with `NotPrime` for composite `p`.
    pub fn field(&self) -> Result<Field> {
        if self.ext_degree == 0 {
            return Err(KzError::InvalidConfig("extension degree must be at least 1".into()));
        }
        if self.ext_degree == 1 {
            Field::prime(self.p)
        } else {
            build_extension(self.p, self.ext_degree)
        }
    }

    /// Validates the configuration and builds the KZ context.
    pub fn context(&self) -> Result<KzContext> {
        let field = self.field()?;
        if self.n < 2 {
            return Err(KzError::InvalidConfig(format!("need n >= 2 points, got {}", self.n)));
        }
        if self.trials == 0 {
            return Err(KzError::InvalidConfig("trials must be positive".into()));
        }
        let h = match &self.h {
            LevelSpec::Integer(v) => field.from_u64(*v),
            LevelSpec::Coefficients(c) => {
                if c.len() > self.ext_degree {
                    return Err(KzError::InvalidConfig(format!(
                        "{} level coefficients for an extension of degree {}",
                        c.len(),
                        self.ext_degree
                    )));
                }
                field.from_coeffs(c)
            }
        };
        if let Some(LinkageSpec::Auto(s)) = &self.q {
            if s != "auto" {
                return Err(KzError::InvalidConfig(format!("q must be an integer or \"auto\", got {s:?}")));
            }
        }
        let ctx = KzContext::new(&field, self.n, h)?;
        let depth = self.truncation();
        if (depth as u64) < self.p {
            return Err(KzError::TruncationTooSmall { got: depth as usize, p: self.p });
        }
        Ok(ctx)
    }

    /// Truncation for formal solutions.
    pub fn truncation(&self) -> u32 {
        self.depth.unwrap_or(self.p as u32)
    }

    /// Number of points used by the formal-solution checks.
    pub fn formal_points(&self) -> usize {
        self.trials.min(3)
    }
}

/// Names of the checks in suite order.
pub const CHECK_NAMES: &[&str] = &[
    "counting",
    "flatness",
    "homogeneity",
    "point-independence",
    "orthogonality",
    "lagrangian",
    "nilpotency",
    "rank-structure",
    "closed-form",
    "module-rank",
    "hyperg-span",
    "no-flat-sections",
    "spectrum",
    "genus",
    "katz-composition",
];

/// Named groups of checks, for running part of the suite.
pub fn group(name: &str) -> Option<&'static [&'static str]> {
    match name {
        "all" => Some(CHECK_NAMES),
        "hyperg" => Some(&CHECK_NAMES[..6]),
        "pcurv" => Some(&CHECK_NAMES[6..9]),
        "formal" => Some(&CHECK_NAMES[9..12]),
        "spectrum" => Some(&CHECK_NAMES[12..13]),
        "katz" => Some(&CHECK_NAMES[13..]),
        _ => None,
    }
}

/// The checks of one configuration, sharing the generated families.
pub struct Suite {
    config: RunConfig,
    ctx: KzContext,
    families: Option<(QFamily, QFamily)>,
    mutate: bool,
}

impl Suite {
    /// Validates the configuration. With `mutate` every family has its first vector
    /// perturbed, which must make the flatness, orthogonality and closed-form checks fail.
    pub fn new(config: &RunConfig, mutate: bool) -> Result<Suite> {
        let ctx = config.context()?;
        Ok(Suite { config: config.clone(), ctx, families: None, mutate })
    }

    /// The KZ context.
    pub fn context(&self) -> &KzContext {
        &self.ctx
    }

    fn families(&mut self) -> Option<&(QFamily, QFamily)> {
        if self.families.is_none() && self.ctx.h_in_prime_field() && !self.ctx.p_divides_n() {
            if let Ok((plus, minus)) = families(&self.ctx) {
                self.families =
                    Some(if self.mutate { (plus.mutated(), minus.mutated()) } else { (plus, minus) });
            }
        }
        self.families.as_ref()
    }

    fn linkage(&self) -> Option<Result<Linkage>> {
        let q = match self.config.q.as_ref()? {
            LinkageSpec::Exponent(q) => Some(*q),
            LinkageSpec::Auto(_) => None,
        };
        Some(linkage_for(&self.ctx, q))
    }

    fn family_unavailable(&self, name: &str) -> Vec<Certificate> {
        let reason = if self.ctx.p_divides_n() { "p divides n" } else { "h is not in the prime field" };
        vec![Certificate::not_applicable(name, self.ctx.params_json(), reason)]
    }

    /// Runs one named check. Checks whose preconditions exclude the configuration
    /// entirely (formal rank for `h` outside the prime field, the no-solution and
    /// spectrum checks for `h` inside it, the curve checks without a linkage)
    /// produce no certificate.
    pub fn run_check(&mut self, name: &str) -> Result<Vec<Certificate>> {
        let seed = self.config.seed;
        let trials = self.config.trials;
        let rational = self.ctx.h_in_prime_field();
        let depth = self.config.truncation();
        let certs = match name {
            "counting" | "flatness" | "homogeneity" | "point-independence" | "orthogonality" | "lagrangian"
            | "rank-structure" | "closed-form" => {
                let ctx = self.ctx.clone();
                match self.families() {
                    None => self.family_unavailable(name),
                    Some((plus, minus)) => match name {
                        "counting" => vec![counting_check(&ctx, plus, minus)],
                        "flatness" => vec![family_flatness_check(plus), family_flatness_check(minus)],
                        "homogeneity" => vec![homogeneity_check(plus), homogeneity_check(minus)],
                        "point-independence" => vec![
                            point_independence_check(plus, trials, seed),
                            point_independence_check(minus, trials, seed),
                        ],
                        "orthogonality" => vec![orthogonality_check(plus, minus)],
                        "lagrangian" => vec![lagrangian_check(plus, minus, trials, seed)],
                        "rank-structure" => vec![rank_structure_check(plus, minus, trials, seed)],
                        _ => vec![closed_form_check(plus, minus, trials, seed)],
                    },
                }
            }
            "nilpotency" => vec![nilpotency_check(&self.ctx, trials, seed)],
            "module-rank" | "hyperg-span" | "no-flat-sections" => {
                if rational == (name == "no-flat-sections") {
                    Vec::new()
                } else {
                    let (_, points) = sample_points(&self.ctx, self.config.formal_points(), seed)?;
                    let check = match name {
                        "module-rank" => module_rank_check,
                        "hyperg-span" => hyperg_span_check,
                        _ => no_solution_check,
                    };
                    points.iter().map(|a| check(&self.ctx, a, depth, Method::Auto).with_seed(seed)).collect()
                }
            }
            "spectrum" if rational => Vec::new(),
            "spectrum" => vec![steepest_descent_spectrum_check(&self.ctx, trials, seed)],
            "genus" | "katz-composition" => match self.linkage() {
                None => Vec::new(),
                Some(Err(err)) => {
                    let params = self.ctx.params_json();
                    vec![Certificate::error(name, params, &err.to_string())]
                }
                Some(Ok(linkage)) if name == "genus" => vec![genus_identity_check(self.ctx.n(), linkage.q)],
                Some(Ok(linkage)) => match self.families().cloned() {
                    None => self.family_unavailable(name),
                    Some((plus, minus)) => vec![katz_composition_check(&plus, &minus, &linkage, trials, seed)],
                },
            },
            other => return Err(KzError::InvalidConfig(format!("unknown check {other:?}"))),
        };
        Ok(certs)
    }

    /// Runs the named checks in the order given.
    pub fn run(&mut self, names: &[&str]) -> Result<Vec<Certificate>> {
        let mut out = Vec::new();
        for name in names {
            out.extend(self.run_check(name)?);
        }
        Ok(out)
    }

    /// Runs every check in suite order.
    pub fn run_all(&mut self) -> Result<Vec<Certificate>> {
        self.run(CHECK_NAMES)
    }
}

/// Process exit status for a certificate stream: `0` when nothing failed, `1` when
/// some check failed, `2` when some check could not be carried out.
pub fn exit_status(certs: &[Certificate]) -> i32 {
    if certs.iter().any(|c| c.status == Status::Error) {
        2
    } else if certs.iter().any(|c| c.status == Status::Fail) {
        1
    } else {
        0
    }
}

/// Newline-delimited JSON for a certificate stream.
pub fn to_ndjson(certs: &[Certificate]) -> String {
    certs.iter().map(|c| c.to_line() + "\n").collect()
}

/// Both families as JSON, with the parameters they were generated for.
pub fn families_json(ctx: &KzContext) -> Result<serde_json::Value> {
    let (plus, minus) = families(ctx)?;
    let mut out = json!({"params": ctx.params_json(), "plus": plus.to_json(), "minus": minus.to_json()});
    if plus.is_empty() && minus.is_empty() {
        out["note"] = json!("h = 0: both families are empty");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_overrides() {
        let c = RunConfig::from_json(r#"{"n": 3, "p": 7, "h": 2}"#).unwrap();
        assert_eq!(c, RunConfig::new(3, 7, LevelSpec::Integer(2)));
        assert_eq!(c.truncation(), 7);
        let e = RunConfig::from_json(r#"{"n": 3, "p": 7, "ext_degree": 2, "h": [1, 1], "q": "auto"}"#).unwrap();
        assert_eq!(e.h, LevelSpec::Coefficients(vec![1, 1]));
        assert!(!e.context().unwrap().h_in_prime_field());
        assert!(RunConfig::from_json(r#"{"n": 3, "p": 7, "colour": 1}"#).is_err());
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        assert!(matches!(RunConfig::new(2, 6, LevelSpec::Integer(1)).context(), Err(KzError::NotPrime(6))));
        assert!(RunConfig::new(1, 5, LevelSpec::Integer(1)).context().is_err());
        let mut c = RunConfig::new(2, 5, LevelSpec::Integer(1));
        c.depth = Some(3);
        assert!(c.context().is_err());
        c.depth = None;
        c.h = LevelSpec::Coefficients(vec![1, 1]);
        assert!(c.context().is_err());
        c.h = LevelSpec::Integer(1);
        c.q = Some(LinkageSpec::Auto("soon".into()));
        assert!(c.context().is_err());
    }

    #[test]
    fn suite_on_a_small_cell_follows_the_order() {
        let mut c = RunConfig::new(3, 5, LevelSpec::Integer(3));
        c.trials = 2;
        c.q = Some(LinkageSpec::Auto("auto".into()));
        let certs = Suite::new(&c, false).unwrap().run_all().unwrap();
        let names: Vec<&str> = certs.iter().map(|c| c.check.as_str()).collect();
        let order: Vec<usize> = names.iter().map(|n| CHECK_NAMES.iter().position(|m| m == n).unwrap()).collect();
        assert!(order.windows(2).all(|w| w[0] <= w[1]));
        assert!(!names.contains(&"spectrum") && !names.contains(&"no-flat-sections"));
        for cert in &certs {
            let expected_fail = matches!(cert.check.as_str(), "closed-form" | "katz-composition");
            assert_eq!(cert.passed(), !expected_fail, "{}", cert.to_line());
        }
    }

    #[test]
    fn irrational_level_runs_the_no_solution_checks() {
        let mut c = RunConfig::new(2, 5, LevelSpec::Coefficients(vec![0, 1]));
        c.ext_degree = 2;
        c.trials = 2;
        let certs = Suite::new(&c, false).unwrap().run_all().unwrap();
        let names: Vec<&str> = certs.iter().map(|c| c.check.as_str()).collect();
        assert!(names.contains(&"no-flat-sections") && names.contains(&"spectrum"));
        assert!(!names.contains(&"module-rank"));
        assert_eq!(exit_status(&certs), 0, "{}", to_ndjson(&certs));
    }

    #[test]
    fn mutation_breaks_the_guarded_checks() {
        let mut c = RunConfig::new(3, 5, LevelSpec::Integer(3));
        c.trials = 2;
        let mut suite = Suite::new(&c, true).unwrap();
        for name in ["flatness", "orthogonality", "closed-form"] {
            let certs = suite.run_check(name).unwrap();
            assert!(certs.iter().any(|c| c.status == Status::Fail && !c.witness.is_null()), "{name}");
        }
    }

    #[test]
    fn families_json_notes_empty_families() {
        let ctx = RunConfig::new(2, 5, LevelSpec::Integer(0)).context().unwrap();
        let v = families_json(&ctx).unwrap();
        assert!(v["note"].is_string());
        let ctx = RunConfig::new(2, 5, LevelSpec::Integer(3)).context().unwrap();
        let v = families_json(&ctx).unwrap();
        assert_eq!(v["plus"]["vectors"].as_array().unwrap().len(), 1);
        assert_eq!(v["minus"]["vectors"].as_array().unwrap().len(), 0);
    }
}
