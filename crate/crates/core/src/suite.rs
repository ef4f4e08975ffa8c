//! Seeded property suites over random elements, with machine-readable reports.
//!
//! Every check reduces a trial to a scalar violation; a check passes when the
//! largest violation over its trials is at most its tolerance. Trial `t` of the
//! check with table index `c` draws from the ChaCha stream `(c << 32) | t` of
//! the configured seed, so reports are reproducible bit for bit.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::element::Element;
use crate::error::{Error, Result};
use crate::factor::{
    arveson_factor, inner_outer, is_outer, outer_factor_scalar, riesz_factor, riesz_factor_attained,
    szego_factor, szego_factor_projection, wilson_factor,
};
use crate::functional::{
    det_as_limit, fk_det, fk_det_resolved, in_a, in_a0, in_d, newton_power_root, phi, pnorm, polar, trace, MembershipMode,
};
use crate::linalg::{self, cx, CMat, SIGMA_FLOOR};
use crate::model::AlgebraModel;
use crate::random::{complex_gaussian, random_element_with, random_unitary, ElementClass};
use crate::szego_opt::{brute_force_infimum, closed_form_p2, szego_infimum_with};

/// Suites accepted by [`run_suite`] besides `all`.
pub const SUITES: &[&str] = &[
    "contractivity",
    "jensen",
    "holder",
    "phi",
    "membership",
    "newton",
    "polar",
    "arveson",
    "szego-projection",
    "szego",
    "riesz",
    "outer",
    "wilson",
    "szego-formula",
    "det-limit",
];

/// Every check: name, suite, default tolerance, and trial divisor (expensive
/// checks run `ceil(trials / divisor)` trials). The position in this table is
/// the check's random stream.
pub const CHECKS: &[(&str, &str, f64, usize)] = &[
    ("contractivity/matrix", "contractivity", 1e-9, 1),
    ("contractivity/torus", "contractivity", 1e-9, 1),
    ("jensen/matrix", "jensen", 1e-9, 1),
    ("jensen/torus", "jensen", 1e-9, 1),
    ("holder/matrix", "holder", 1e-9, 1),
    ("holder/torus", "holder", 1e-9, 1),
    ("det-multiplicativity/matrix", "holder", 1e-8, 1),
    ("det-multiplicativity/torus", "holder", 1e-8, 1),
    ("pnorm-monotone", "holder", 1e-12, 1),
    ("phi/trace", "phi", 1e-12, 1),
    ("phi/module", "phi", 1e-10, 1),
    ("phi/multiplicative", "phi", 1e-10, 1),
    ("membership/modes", "membership", 0.0, 1),
    ("newton", "newton", 1e-10, 1),
    ("polar/matrix", "polar", 1e-10, 1),
    ("polar/torus", "polar", 1e-8, 4),
    ("arveson", "arveson", 1e-10, 1),
    ("szego-projection/certificate", "szego-projection", 1e-8, 1),
    ("szego-projection/rank", "szego-projection", 0.0, 1),
    ("szego-projection/agreement", "szego-projection", 1e-8, 1),
    ("szego/matrix", "szego", 1e-8, 1),
    ("szego/torus", "szego", 1e-8, 10),
    ("riesz/reconstruction", "riesz", 1e-8, 1),
    ("riesz/bound", "riesz", 1e-8, 1),
    ("riesz/attained", "riesz", 1e-6, 1),
    ("riesz/torus", "riesz", 1e-8, 20),
    ("outer/agreement", "outer", 0.0, 1),
    ("outer/full-support", "outer", 0.0, 1),
    ("outer/counterexample", "outer", 0.0, 20),
    ("inner-outer/matrix", "outer", 1e-8, 1),
    ("wilson/scalar-example", "wilson", 1e-8, usize::MAX),
    ("wilson/boundary-zero", "wilson", 1e-4, usize::MAX),
    ("wilson/diagonal", "wilson", 1e-8, 20),
    ("wilson/reconstruction", "wilson", 1e-8, 4),
    ("wilson/outer-gap", "wilson", 1e-6, 4),
    ("szego-formula/closed-form", "szego-formula", 1e-10, 1),
    ("szego-formula/p2", "szego-formula", 1e-4, 10),
    ("szego-formula/p1-p4", "szego-formula", 1e-2, 20),
    ("szego-formula/one-sided", "szego-formula", 1e-9, 10),
    ("det-limit/monotone", "det-limit", 1e-12, 1),
    ("det-limit/limit", "det-limit", 1e-2, 1),
];

/// Exponents of the contractivity and Jensen runs.
pub const SUB_UNIT_EXPONENTS: [f64; 4] = [0.25, 0.375, 0.5, 0.75];
/// Exponent grid of the determinant-limit run.
pub const DET_LIMIT_GRID: [f64; 4] = [1.0, 0.1, 0.01, 0.001];
/// Exponent triples `(p, q, r)` of the Riesz run.
pub const RIESZ_TRIPLES: [(f64, f64, f64); 3] = [(1.0, 2.0, 2.0), (0.5, 1.0, 1.0), (2.0 / 3.0, 1.0, 2.0)];
/// Slacks of the Riesz run.
pub const RIESZ_EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: String,
    pub trials: usize,
    pub seed: u64,
    /// Flag of the matrix model.
    pub blocks: Vec<usize>,
    /// Matrix size of the torus model.
    pub torus_n: usize,
    /// Fourier degree `N` of the torus model.
    pub degree: usize,
    /// Quadrature nodes `K` of the torus model.
    pub quad_nodes: usize,
    /// Sizes of the fully triangular models in the Szegő-formula run.
    pub szego_n: Vec<usize>,
    /// Fixed weight for the Szegő-formula run instead of random ones.
    pub szego_w: Option<Element>,
    /// Per-check tolerance overrides.
    pub tolerances: BTreeMap<String, f64>,
    /// Record the wall-clock runtime (the report is then no longer reproducible).
    pub timing: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            suite: "all".into(),
            trials: 200,
            seed: 0,
            blocks: vec![1, 1, 2],
            torus_n: 2,
            degree: 4,
            quad_nodes: 17,
            szego_n: vec![2, 3, 4],
            szego_w: None,
            tolerances: BTreeMap::new(),
            timing: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub trials: usize,
    /// Largest violation; negative values measure slack, `null` means a trial errored.
    #[serde(deserialize_with = "null_as_infinity")]
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Trials that raised an error (counted as failures).
    pub errors: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_error: Option<String>,
    /// Reported quantities of single-input runs.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
}

/// serde_json writes non-finite floats as `null`.
fn null_as_infinity<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
    pub pointer_width: usize,
    pub debug_assertions: bool,
}

impl Environment {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            pointer_width: usize::BITS as usize,
            debug_assertions: cfg!(debug_assertions),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub trials: usize,
    pub pass: bool,
    pub checks: Vec<CheckRecord>,
    pub environment: Environment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl SuiteReport {
    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.suite != "all" && !SUITES.contains(&self.suite.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "unknown suite {:?}; expected one of all, {}",
                self.suite,
                SUITES.join(", ")
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        for (name, tol) in &self.tolerances {
            if !CHECKS.iter().any(|c| c.0 == name) {
                return Err(Error::InvalidArgument(format!("tolerance override for unknown check {name:?}")));
            }
            if tol.is_nan() || *tol < 0.0 {
                return Err(Error::InvalidArgument(format!("tolerance for {name} must be nonnegative")));
            }
        }
        if self.szego_n.is_empty() || self.szego_n.contains(&0) {
            return Err(Error::InvalidArgument("szego_n must list positive sizes".into()));
        }
        self.matrix_model()?;
        self.torus_model()?;
        Ok(())
    }

    pub fn matrix_model(&self) -> Result<AlgebraModel> {
        AlgebraModel::matrix_block(&self.blocks)
    }

    pub fn torus_model(&self) -> Result<AlgebraModel> {
        AlgebraModel::torus(self.torus_n, self.degree, self.quad_nodes)
    }
}

type Trial<'a> = dyn FnMut(usize, &mut ChaCha8Rng, &mut BTreeMap<String, f64>) -> Result<f64> + 'a;

struct Runner<'a> {
    cfg: &'a SuiteConfig,
    checks: Vec<CheckRecord>,
}

impl Runner<'_> {
    fn run(&mut self, name: &str, trial: &mut Trial<'_>) {
        self.run_n(name, None, trial)
    }

    fn run_n(&mut self, name: &str, count: Option<usize>, trial: &mut Trial<'_>) {
        let (index, &(_, _, default_tol, divisor)) =
            CHECKS.iter().enumerate().find(|(_, c)| c.0 == name).expect("check listed in CHECKS");
        let trials = count.unwrap_or_else(|| self.cfg.trials.div_ceil(divisor).max(1));
        let tolerance = self.cfg.tolerances.get(name).copied().unwrap_or(default_tol);
        let mut max_violation = f64::NEG_INFINITY;
        let mut errors = 0;
        let mut first_error = None;
        let mut values = BTreeMap::new();
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
            rng.set_stream(((index as u64) << 32) | t as u64);
            match trial(t, &mut rng, &mut values) {
                Ok(v) if v.is_nan() => {
                    errors += 1;
                    first_error.get_or_insert_with(|| format!("trial {t}: NaN violation"));
                }
                Ok(v) => max_violation = max_violation.max(v),
                Err(e) => {
                    errors += 1;
                    first_error.get_or_insert_with(|| format!("trial {t}: {e}"));
                }
            }
        }
        if errors > 0 {
            max_violation = f64::INFINITY;
        }
        self.checks.push(CheckRecord {
            name: name.into(),
            trials,
            max_violation,
            tolerance,
            pass: errors == 0 && max_violation <= tolerance,
            errors,
            first_error,
            values,
        });
    }
}

/// Runs the configured suite. Fails only on an invalid configuration; numerical
/// failures are recorded in the report.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut runner = Runner { cfg, checks: Vec::new() };
    let selected: Vec<&str> = if cfg.suite == "all" { SUITES.to_vec() } else { vec![cfg.suite.as_str()] };
    for suite in selected {
        match suite {
            "contractivity" => contractivity(&mut runner)?,
            "jensen" => jensen(&mut runner)?,
            "holder" => holder(&mut runner)?,
            "phi" => phi_suite(&mut runner)?,
            "membership" => membership(&mut runner)?,
            "newton" => newton(&mut runner)?,
            "polar" => polar_suite(&mut runner)?,
            "arveson" => arveson(&mut runner)?,
            "szego-projection" => szego_projection(&mut runner)?,
            "szego" => szego(&mut runner)?,
            "riesz" => riesz(&mut runner)?,
            "outer" => outer(&mut runner)?,
            "wilson" => wilson(&mut runner)?,
            "szego-formula" => szego_formula(&mut runner)?,
            "det-limit" => det_limit(&mut runner)?,
            _ => unreachable!("validated suite name"),
        }
    }
    let checks = runner.checks;
    Ok(SuiteReport {
        suite: cfg.suite.clone(),
        seed: cfg.seed,
        trials: cfg.trials,
        pass: checks.iter().all(|c| c.pass),
        checks,
        environment: Environment::current(),
        runtime_seconds: cfg.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

// ---------------------------------------------------------------------------
// Helpers

fn sample(model: &AlgebraModel, class: ElementClass, rng: &mut ChaCha8Rng) -> Element {
    random_element_with(model, class, rng)
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Random block-diagonal unitary (a unitary of `D`).
fn diagonal_unitary(model: &AlgebraModel, rng: &mut ChaCha8Rng) -> Result<Element> {
    let mut u = linalg::zeros(model.n());
    for r in model.block_ranges() {
        let b = random_unitary(rng, r.len());
        u.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&b);
    }
    Element::from_matrix(model, u)
}

/// Outer scalar polynomial `(1 + c_1 z)(1 + c_2 z)` with `|c_i| <= 0.7`.
fn outer_scalar(rng: &mut ChaCha8Rng) -> [num_complex::Complex64; 3] {
    let mut c = [cx(0.0, 0.0); 2];
    for ci in &mut c {
        let r = 0.7 * rng.random::<f64>();
        let t = std::f64::consts::TAU * rng.random::<f64>();
        *ci = num_complex::Complex64::from_polar(r, t);
    }
    [cx(1.0, 0.0), c[0] + c[1], c[0] * c[1]]
}

fn scalar_poly(model: &AlgebraModel, coeffs: &[(i64, num_complex::Complex64)]) -> Result<Element> {
    let map = coeffs.iter().map(|&(k, c)| (k, CMat::from_element(1, 1, c))).collect();
    Element::from_coefficients(model, map)
}

// ---------------------------------------------------------------------------
// Suites

fn contractivity(r: &mut Runner) -> Result<()> {
    for (name, model) in [("contractivity/matrix", r.cfg.matrix_model()?), ("contractivity/torus", r.cfg.torus_model()?)]
    {
        r.run(name, &mut |_, rng, _| {
            let a = sample(&model, ElementClass::A, rng);
            let d = phi(&a);
            let mut worst = f64::NEG_INFINITY;
            for p in SUB_UNIT_EXPONENTS {
                worst = worst.max(pnorm(&d, p)? / pnorm(&a, p)? - 1.0);
            }
            Ok(worst)
        });
    }
    Ok(())
}

fn jensen(r: &mut Runner) -> Result<()> {
    for (name, model) in [("jensen/matrix", r.cfg.matrix_model()?), ("jensen/torus", r.cfg.torus_model()?)] {
        r.run(name, &mut |_, rng, _| {
            let a = sample(&model, ElementClass::A, rng);
            let da = fk_det(&a);
            let dphi = fk_det(&phi(&a));
            if !da.is_positive() {
                // Jensen then forces det(Phi(a)) = 0.
                return Ok(if dphi.is_positive() { f64::INFINITY } else { 0.0 });
            }
            Ok(dphi.value / da.value - 1.0)
        });
    }
    Ok(())
}

/// Torus model whose node count already integrates products of two elements,
/// so that all norms of the Hölder run use the same quadrature.
fn product_torus(cfg: &SuiteConfig) -> Result<AlgebraModel> {
    let k = cfg.torus_model()?.with_degree(2 * cfg.degree).quad_nodes();
    AlgebraModel::torus(cfg.torus_n, cfg.degree, k)
}

fn holder(r: &mut Runner) -> Result<()> {
    const PAIRS: [(f64, f64); 6] = [(0.25, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 2.0), (0.75, 4.0)];
    let models = [r.cfg.matrix_model()?, product_torus(r.cfg)?];
    for (name, model) in ["holder/matrix", "holder/torus"].into_iter().zip(&models) {
        r.run(name, &mut |_, rng, _| {
            let x = sample(model, ElementClass::M, rng);
            let y = sample(model, ElementClass::M, rng);
            let xy = x.mul(&y)?;
            let mut worst = f64::NEG_INFINITY;
            for (p, q) in PAIRS {
                let rr = 1.0 / (1.0 / p + 1.0 / q);
                worst = worst.max(pnorm(&xy, rr)? / (pnorm(&x, p)? * pnorm(&y, q)?) - 1.0);
            }
            Ok(worst)
        });
    }
    for (name, model) in ["det-multiplicativity/matrix", "det-multiplicativity/torus"].into_iter().zip(&models) {
        r.run(name, &mut |_, rng, _| {
            let x = sample(model, ElementClass::M, rng);
            let y = sample(model, ElementClass::M, rng);
            let expected = fk_det(&x).value * fk_det(&y).value;
            Ok(relative(fk_det(&x.mul(&y)?).value, expected))
        });
    }
    let matrix = models[0].clone();
    let torus = r.cfg.torus_model()?;
    r.run("pnorm-monotone", &mut |t, rng, _| {
        let model = if t % 2 == 0 { &matrix } else { &torus };
        let x = sample(model, ElementClass::M, rng);
        let grid = [0.125, 0.25, 0.5, 1.0, 2.0, 4.0, f64::INFINITY];
        let norms: Vec<f64> = grid.iter().map(|&p| pnorm(&x, p)).collect::<Result<_>>()?;
        Ok(norms.windows(2).map(|w| (w[0] - w[1]) / w[1]).fold(f64::NEG_INFINITY, f64::max))
    });
    Ok(())
}

fn phi_suite(r: &mut Runner) -> Result<()> {
    let models = [r.cfg.matrix_model()?, r.cfg.torus_model()?];
    r.run("phi/trace", &mut |t, rng, _| {
        let x = sample(&models[t % 2], ElementClass::M, rng);
        Ok((trace(&phi(&x)) - trace(&x)).norm())
    });
    r.run("phi/module", &mut |t, rng, _| {
        let model = &models[t % 2];
        let x = sample(model, ElementClass::M, rng);
        let d1 = sample(model, ElementClass::D, rng);
        let d2 = sample(model, ElementClass::D, rng);
        let lhs = phi(&d1.mul(&x)?.mul(&d2)?);
        let rhs = d1.mul(&phi(&x))?.mul(&d2)?;
        lhs.max_abs_diff(&rhs)
    });
    r.run("phi/multiplicative", &mut |t, rng, _| {
        let model = &models[t % 2];
        let a = sample(model, ElementClass::A, rng);
        let b = sample(model, ElementClass::A, rng);
        phi(&a.mul(&b)?).max_abs_diff(&phi(&a).mul(&phi(&b))?)
    });
    Ok(())
}

fn membership(r: &mut Runner) -> Result<()> {
    let models = [r.cfg.matrix_model()?, r.cfg.torus_model()?];
    let classes = [ElementClass::M, ElementClass::A, ElementClass::A0, ElementClass::D];
    r.run("membership/modes", &mut |t, rng, _| {
        let model = &models[t % 2];
        let class = classes[(t / 2) % 4];
        let x = sample(model, class, rng);
        let expect = [
            !matches!(class, ElementClass::M),
            matches!(class, ElementClass::A0),
            matches!(class, ElementClass::D),
        ];
        let tests: [fn(&Element, MembershipMode) -> crate::functional::Membership; 3] = [in_a, in_a0, in_d];
        let mut wrong = 0.0;
        for (test, want) in tests.iter().zip(expect) {
            let s = test(&x, MembershipMode::Structural).member;
            let d = test(&x, MembershipMode::Dual).member;
            if s != d || s != want {
                wrong += 1.0;
            }
        }
        Ok(wrong)
    });
    Ok(())
}

fn newton(r: &mut Runner) -> Result<()> {
    let model = r.cfg.matrix_model()?;
    r.run("newton", &mut |_, rng, _| {
        let b = sample(&model, ElementClass::PositiveInvertible, rng);
        let e = rng.random_range(1..=5u32);
        let k = rng.random_range(1..=(1u64 << e));
        let p = k as f64 / (1u64 << e) as f64;
        let eps = if rng.random::<bool>() { 0.0 } else { 1e-3 };
        let root = newton_power_root(&b, p, eps, 1e-14)?;
        if !root.converged {
            return Ok(f64::INFINITY);
        }
        let bm = b.as_matrix().expect("matrix model");
        let oracle = linalg::psd_pow(&(bm + linalg::eye(model.n()) * cx(eps, 0.0)), p / 2.0);
        let scale = linalg::max_abs(&oracle);
        let err = linalg::max_abs_diff(root.root.as_matrix().expect("matrix model"), &oracle) / scale;
        Ok(err.max(root.monotonicity_defect / scale))
    });
    Ok(())
}

fn polar_suite(r: &mut Runner) -> Result<()> {
    for (name, model) in [("polar/matrix", r.cfg.matrix_model()?), ("polar/torus", r.cfg.torus_model()?)] {
        r.run(name, &mut |_, rng, _| {
            // Invertible with bounded condition, so the unitary part is smooth on the circle.
            let p1 = sample(&model, ElementClass::PositiveInvertible, rng);
            let p2 = sample(&model, ElementClass::PositiveInvertible, rng);
            let v = if model.is_torus() {
                Element::constant(&model, random_unitary(rng, model.n()))?
            } else {
                Element::from_matrix(&model, random_unitary(rng, model.n()))?
            };
            let x = p1.mul(&v)?.mul(&p2)?;
            let pd = polar(&x)?;
            let psd_defect = pd
                .modulus
                .samples()
                .iter()
                .map(|m| linalg::hermitian_defect(m).max(-linalg::min_eigenvalue(m)))
                .fold(0.0, f64::max);
            Ok(pd.residual.max(psd_defect))
        });
    }
    Ok(())
}

fn arveson(r: &mut Runner) -> Result<()> {
    let model = r.cfg.matrix_model()?;
    r.run("arveson", &mut |_, rng, _| {
        let x = sample(&model, ElementClass::M, rng);
        let f = arveson_factor(&x)?;
        let inv = f.analytic_inverse.as_ref().ok_or_else(|| Error::InvalidArgument("missing inverse".into()))?;
        let identity = f.analytic.mul(inv)?.max_abs_diff(&Element::identity(&model))?;
        let scale = x.sup_abs().max(1.0);
        Ok((f.worst() / scale).max(identity))
    });
    Ok(())
}

fn projection_model(t: usize) -> AlgebraModel {
    let blocks: &[usize] = if t.is_multiple_of(2) { &[1, 1, 1] } else { &[1, 2] };
    AlgebraModel::matrix_block(blocks).expect("valid flag")
}

fn szego_projection(r: &mut Runner) -> Result<()> {
    r.run("szego-projection/certificate", &mut |t, rng, _| {
        let w = sample(&projection_model(t), ElementClass::M, rng);
        Ok(szego_factor_projection(&w)?.certificate.worst())
    });
    r.run("szego-projection/rank", &mut |t, rng, _| {
        let w = sample(&projection_model(t), ElementClass::M, rng);
        let c = szego_factor_projection(&w)?.certificate;
        Ok(c.dim_a as f64 - c.rank_h_a as f64)
    });
    r.run("szego-projection/agreement", &mut |t, rng, _| {
        let w = sample(&projection_model(t), ElementClass::PositiveInvertible, rng);
        let a = szego_factor_projection(&w)?.result;
        let b = szego_factor(&w, 2.0, 2.0)?;
        let inv = b.analytic_inverse.ok_or_else(|| Error::InvalidArgument("missing inverse".into()))?;
        let ratio = a.analytic.mul(&inv)?;
        Ok(in_d(&ratio, MembershipMode::Structural).defect)
    });
    Ok(())
}

fn szego(r: &mut Runner) -> Result<()> {
    const EXPONENTS: [(f64, f64); 3] = [(2.0, 2.0), (0.5, 0.5), (1.0, 3.0)];
    let matrix = r.cfg.matrix_model()?;
    r.run("szego/matrix", &mut |_, rng, _| {
        let w = sample(&matrix, ElementClass::M, rng);
        let scale = w.sup_abs().max(1.0);
        let mut worst: f64 = 0.0;
        for (p, q) in EXPONENTS {
            worst = worst.max(szego_factor(&w, p, q)?.worst() / scale);
        }
        Ok(worst)
    });
    let torus = r.cfg.torus_model()?;
    r.run("szego/torus", &mut |t, rng, _| {
        let pos = sample(&torus, ElementClass::PositiveInvertible, rng);
        let u = Element::constant(&torus, random_unitary(rng, torus.n()))?;
        let w = pos.mul(&u)?;
        let (p, q) = EXPONENTS[t % EXPONENTS.len()];
        Ok(szego_factor(&w, p, q)?.worst() / w.sup_abs().max(1.0))
    });
    Ok(())
}

fn riesz(r: &mut Runner) -> Result<()> {
    let model = r.cfg.matrix_model()?;
    r.run("riesz/reconstruction", &mut |_, rng, _| {
        let x = sample(&model, ElementClass::A, rng);
        let mut worst: f64 = 0.0;
        for (p, q, rr) in RIESZ_TRIPLES {
            for eps in RIESZ_EPS {
                let f = riesz_factor(&x, p, q, rr, eps)?;
                worst = worst.max(f.reconstruction).max(f.y_membership).max(f.z_membership);
            }
        }
        Ok(worst)
    });
    r.run("riesz/bound", &mut |_, rng, _| {
        let x = sample(&model, ElementClass::A, rng);
        let mut worst = f64::NEG_INFINITY;
        for (p, q, rr) in RIESZ_TRIPLES {
            for eps in RIESZ_EPS {
                let f = riesz_factor(&x, p, q, rr, eps)?;
                worst = worst.max(f.product - f.norm_x - eps);
            }
        }
        Ok(worst)
    });
    r.run("riesz/attained", &mut |_, rng, _| {
        let x = sample(&model, ElementClass::A, rng);
        let mut worst: f64 = 0.0;
        for (p, q, rr) in RIESZ_TRIPLES {
            let f = riesz_factor_attained(&x, p, q, rr)?;
            worst = worst.max(relative(f.product, f.norm_x)).max(f.reconstruction);
        }
        Ok(worst)
    });
    let torus = r.cfg.torus_model()?;
    r.run("riesz/torus", &mut |t, rng, _| {
        let x = conditioned_analytic(&torus, rng);
        let (p, q, rr) = RIESZ_TRIPLES[t % RIESZ_TRIPLES.len()];
        let eps = RIESZ_EPS[t % RIESZ_EPS.len()];
        let f = riesz_factor(&x, p, q, rr, eps)?;
        Ok((f.product - f.norm_x - eps).max(f.reconstruction))
    });
    Ok(())
}

/// Random element of `A` whose singular values on the circle stay within a
/// factor `10^2` of each other (rejection sampling).
fn conditioned_analytic(model: &AlgebraModel, rng: &mut ChaCha8Rng) -> Element {
    let check = crate::torus::grid_size(16 * (model.degree() + 1));
    loop {
        let x = sample(model, ElementClass::A, rng);
        let samples = if model.is_torus() { x.samples_at(check) } else { x.samples() };
        let sv: Vec<Vec<f64>> = samples.iter().map(linalg::singular_values).collect();
        let hi = sv.iter().flatten().copied().fold(0.0, f64::max);
        let lo = sv.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if lo >= 1e-2 * hi {
            return x;
        }
    }
}

/// Random element of `A` for the outerness runs, cycling through invertible,
/// rank-deficient, sparse and non-analytic inputs.
fn outer_candidate(model: &AlgebraModel, t: usize, rng: &mut ChaCha8Rng) -> Result<Element> {
    let n = model.n();
    match t % 4 {
        0 => Ok(sample(model, ElementClass::A, rng)),
        1 => {
            let a = sample(model, ElementClass::A, rng);
            let k = rng.random_range(0..n);
            let p = CMat::from_fn(n, n, |i, j| cx(if i == j && i != k { 1.0 } else { 0.0 }, 0.0));
            let p = Element::from_matrix(model, p)?;
            if rng.random::<bool>() {
                a.mul(&p)
            } else {
                p.mul(&a)
            }
        }
        2 => {
            let mut m = linalg::zeros(n);
            for (i, j) in model.a_pattern() {
                if rng.random::<bool>() {
                    m[(i, j)] = complex_gaussian(rng);
                }
            }
            Element::from_matrix(model, m)
        }
        _ => Ok(sample(model, ElementClass::M, rng)),
    }
}

fn outer(r: &mut Runner) -> Result<()> {
    let model = r.cfg.matrix_model()?;
    r.run("outer/agreement", &mut |t, rng, _| {
        let h = outer_candidate(&model, t, rng)?;
        let rep = is_outer(&h);
        Ok(if rep.det_criterion == (rep.left && rep.right) { 0.0 } else { 1.0 })
    });
    r.run("outer/full-support", &mut |t, rng, _| {
        let h = outer_candidate(&model, t, rng)?;
        let rep = is_outer(&h);
        if !rep.left {
            return Ok(0.0);
        }
        let s = linalg::singular_values(h.as_matrix().expect("matrix model"));
        let full = *s.last().expect("nonempty") > SIGMA_FLOOR * s[0];
        Ok(if full { 0.0 } else { 1.0 })
    });
    let torus = AlgebraModel::torus_minimal(2, 3)?;
    r.run("outer/counterexample", &mut |_, rng, _| {
        let p1 = outer_scalar(rng);
        let p2 = outer_scalar(rng);
        let mut coeffs = BTreeMap::new();
        for k in 0..4 {
            let mut m = linalg::zeros(2);
            if k < 3 {
                m[(0, 0)] = p1[k];
            }
            if k >= 1 {
                m[(1, 1)] = p2[k - 1];
            }
            coeffs.insert(k as i64, m);
        }
        let h = Element::from_coefficients(&torus, coeffs)?;
        let rep = is_outer(&h);
        let pattern = rep.bilateral && rep.det_h > 0.0 && rep.det_phi_h == 0.0;
        Ok(if pattern { 0.0 } else { 1.0 })
    });
    r.run("inner-outer/matrix", &mut |_, rng, _| {
        let u0 = diagonal_unitary(&model, rng)?;
        let h = sample(&model, ElementClass::A, rng);
        let x = u0.mul(&h)?;
        let io = inner_outer(&x)?;
        let rep = is_outer(&io.outer);
        if !(rep.left && rep.right) {
            return Ok(f64::INFINITY);
        }
        let res = io.residuals;
        let inner_in_d = in_d(&io.inner, MembershipMode::Structural).defect;
        Ok(res.reconstruction.max(res.unitarity).max(io.inner_membership).max(inner_in_d) / x.sup_abs().max(1.0))
    });
    Ok(())
}

/// Random `w = q^* q` for an analytic matrix polynomial `q` with `n <= 3`, degree `<= 4`.
fn wilson_symbol(t: usize, rng: &mut ChaCha8Rng) -> Result<Element> {
    let n = 1 + t % 3;
    let degree = 1 + (t / 3) % 4;
    let model = AlgebraModel::torus_minimal(n, degree)?;
    let q = sample(&model, ElementClass::A, rng);
    q.adjoint().mul(&q)
}

fn wilson(r: &mut Runner) -> Result<()> {
    let scalar = AlgebraModel::torus_minimal(1, 1)?;
    r.run("wilson/scalar-example", &mut |_, _, values| {
        // |1 - z/2|^2 = 5/4 - (z + z^{-1}) / 2.
        let w = scalar_poly(&scalar, &[(-1, cx(-0.5, 0.0)), (0, cx(1.25, 0.0)), (1, cx(-0.5, 0.0))])?;
        let h = outer_factor_scalar(&w)?;
        let want = [1.0, -1.0, 0.25];
        let mut err: f64 = 0.0;
        for (k, c) in want.iter().enumerate() {
            err = err.max((h.factor.coefficient(k as i64)[(0, 0)] - cx(*c, 0.0)).norm());
        }
        err = err.max(h.factor.coefficient(3)[(0, 0)].norm());
        let det_w = fk_det_resolved(&w).value;
        values.insert("coefficient_error".into(), err);
        values.insert("det_w".into(), det_w);
        let det_err = (det_w - 1.0).abs();
        Ok(err.max(det_err))
    });
    r.run("wilson/boundary-zero", &mut |_, _, values| {
        let w = scalar_poly(&scalar, &[(-1, cx(1.0, 0.0)), (0, cx(2.0, 0.0)), (1, cx(1.0, 0.0))])?;
        let h = outer_factor_scalar(&w)?;
        let want = [1.0, 2.0, 1.0];
        let mut err: f64 = 0.0;
        for (k, c) in want.iter().enumerate() {
            err = err.max((h.factor.coefficient(k as i64)[(0, 0)] - cx(*c, 0.0)).norm());
        }
        values.insert("coefficient_error".into(), err);
        Ok(err)
    });
    let diag_model = AlgebraModel::torus_minimal(2, 2)?;
    let scalar2 = AlgebraModel::torus_minimal(1, 2)?;
    r.run("wilson/diagonal", &mut |_, rng, _| {
        let w1 = sample(&scalar2, ElementClass::PositiveInvertible, rng);
        let w2 = sample(&scalar2, ElementClass::PositiveInvertible, rng);
        let mut coeffs = BTreeMap::new();
        for k in -2..=2i64 {
            let mut m = linalg::zeros(2);
            m[(0, 0)] = w1.coefficient(k)[(0, 0)];
            m[(1, 1)] = w2.coefficient(k)[(0, 0)];
            coeffs.insert(k, m);
        }
        let w = Element::from_coefficients(&diag_model, coeffs)?;
        let h = wilson_factor(&w)?.factor;
        // |h_ii|^2 = w_i and |H_i| = w_i with both normalized positive at z = 0, so H_i = h_ii^2.
        let mut worst: f64 = 0.0;
        for (i, wi) in [w1, w2].iter().enumerate() {
            let big = outer_factor_scalar(wi)?.factor;
            let hii: BTreeMap<i64, CMat> = h
                .coefficients()
                .expect("torus")
                .iter()
                .map(|(&k, m)| (k, CMat::from_element(1, 1, m[(i, i)])))
                .collect();
            let hii = Element::from_coefficients(&AlgebraModel::torus(1, h.model().degree(), h.model().quad_nodes())?, hii)?;
            let sq = hii.mul(&hii)?;
            let top = (0..=sq.model().degree() as i64).map(|k| sq.coefficient(k)[(0, 0)].norm()).fold(0.0, f64::max);
            let deg = sq.model().degree().max(big.model().degree()) as i64;
            for k in 0..=deg {
                worst = worst.max((sq.coefficient(k)[(0, 0)] - big.coefficient(k)[(0, 0)]).norm() / top);
            }
        }
        Ok(worst)
    });
    // Both checks read the same factorizations, drawn from the reconstruction stream.
    let mut gaps: Vec<Option<f64>> = Vec::new();
    r.run("wilson/reconstruction", &mut |t, rng, _| {
        let w = wilson_symbol(t, rng)?;
        gaps.resize(t + 1, None);
        let f = wilson_factor(&w)?;
        gaps[t] = Some(f.outer_gap);
        Ok(f.residual)
    });
    r.run_n("wilson/outer-gap", Some(gaps.len()), &mut |t, _, _| {
        gaps[t].ok_or_else(|| Error::InvalidArgument("factorization failed (see wilson/reconstruction)".into()))
    });
    Ok(())
}

/// Weight for trial `t` of the Szegő-formula run and its fully triangular model.
fn szego_weight(cfg: &SuiteConfig, t: usize, rng: &mut ChaCha8Rng) -> Result<Element> {
    if let Some(w) = &cfg.szego_w {
        return Ok(w.clone());
    }
    let n = cfg.szego_n[t % cfg.szego_n.len()];
    Ok(sample(&AlgebraModel::triangular(n)?, ElementClass::PositiveInvertible, rng))
}

/// Iteration budget and number of starts of the optimizer in the suite.
const SZEGO_BUDGET: usize = 1000;
const SZEGO_STARTS: usize = 4;

fn szego_formula(r: &mut Runner) -> Result<()> {
    let cfg = r.cfg;
    let fixed = cfg.szego_w.is_some().then_some(1);
    let count = |name: &str| fixed.or_else(|| {
        let divisor = CHECKS.iter().find(|c| c.0 == name).expect("listed").3;
        Some(cfg.trials.div_ceil(divisor).max(cfg.szego_n.len()))
    });
    r.run_n("szego-formula/closed-form", count("szego-formula/closed-form"), &mut |t, rng, values| {
        let w = szego_weight(cfg, t, rng)?;
        let c = closed_form_p2(&w)?;
        let det = fk_det(&w).value;
        if fixed.is_some() {
            values.insert("closed_form".into(), c.value);
        }
        Ok(relative(c.value, det).max(relative(c.objective, c.value)).max((c.constraint - 1.0).abs()))
    });
    r.run_n("szego-formula/p2", count("szego-formula/p2"), &mut |t, rng, values| {
        let w = szego_weight(cfg, t, rng)?;
        let rep = szego_infimum_with(&w, 2.0, SZEGO_BUDGET, rng.random(), SZEGO_STARTS)?;
        let oracle = closed_form_p2(&w)?.value;
        if fixed.is_some() {
            values.insert("det_w".into(), rep.det_w);
            values.insert("inf_estimate".into(), rep.inf_estimate);
            values.insert("relative_gap".into(), rep.relative_gap);
        }
        Ok(relative(rep.inf_estimate, oracle).max((rep.constraint - 1.0).abs()))
    });
    r.run_n("szego-formula/p1-p4", count("szego-formula/p1-p4"), &mut |t, rng, _| {
        let w = szego_weight(cfg, t, rng)?;
        let mut worst: f64 = 0.0;
        for p in [1.0, 4.0] {
            let rep = szego_infimum_with(&w, p, SZEGO_BUDGET, rng.random(), SZEGO_STARTS)?;
            worst = worst.max(rep.relative_gap.abs());
        }
        Ok(worst)
    });
    r.run_n("szego-formula/one-sided", count("szego-formula/one-sided"), &mut |t, rng, _| {
        let w = szego_weight(cfg, t, rng)?;
        let det = fk_det(&w).value;
        let mut lowest = f64::INFINITY;
        for p in [1.0, 2.0, 4.0] {
            let rep = szego_infimum_with(&w, p, SZEGO_BUDGET / 4, rng.random(), 1)?;
            lowest = lowest.min(rep.min_evaluated);
            lowest = lowest.min(brute_force_infimum(&w, p, 2000, rng.random())?);
        }
        Ok(det - lowest)
    });
    Ok(())
}

fn det_limit(r: &mut Runner) -> Result<()> {
    let models = [r.cfg.matrix_model()?, r.cfg.torus_model()?];
    r.run("det-limit/monotone", &mut |t, rng, _| {
        let x = sample(&models[t % 2], ElementClass::M, rng);
        let seq = det_as_limit(&x, &DET_LIMIT_GRID)?;
        Ok(seq.windows(2).map(|w| (w[1] - w[0]) / w[0]).fold(f64::NEG_INFINITY, f64::max))
    });
    r.run("det-limit/limit", &mut |t, rng, _| {
        let x = sample(&models[t % 2], ElementClass::M, rng);
        let seq = det_as_limit(&x, &DET_LIMIT_GRID)?;
        let d = fk_det(&x);
        if !d.is_positive() {
            return Ok(f64::INFINITY);
        }
        Ok(relative(*seq.last().expect("nonempty grid"), d.value))
    });
    Ok(())
}
