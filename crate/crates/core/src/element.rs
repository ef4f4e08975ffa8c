//! Elements of `M` in either model, and their JSON encoding.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fft;
use crate::linalg::{self, cx, CMat};
use crate::model::AlgebraModel;

/// Default tolerances for element equality and membership tests.
pub const MATRIX_TOL: f64 = 1e-12;
pub const TORUS_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum ElementData {
    Matrix(CMat),
    /// Fourier coefficients by frequency; absent frequencies are zero.
    Torus(BTreeMap<i64, CMat>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    model: AlgebraModel,
    data: ElementData,
}

impl Element {
    pub fn from_matrix(model: &AlgebraModel, m: CMat) -> Result<Self> {
        if model.is_torus() {
            return Err(Error::ModelMismatch("matrix data given for a torus model".into()));
        }
        if m.nrows() != model.n() || m.ncols() != model.n() {
            return Err(Error::InvalidElement(format!(
                "expected {0}x{0} matrix, got {1}x{2}",
                model.n(),
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self { model: model.clone(), data: ElementData::Matrix(m) })
    }

    /// Builds a torus element; exactly-zero coefficients are dropped.
    pub fn from_coefficients(model: &AlgebraModel, coeffs: BTreeMap<i64, CMat>) -> Result<Self> {
        if !model.is_torus() {
            return Err(Error::ModelMismatch("Fourier data given for a matrix model".into()));
        }
        let n = model.n();
        let bound = model.degree() as i64;
        let mut kept = BTreeMap::new();
        for (k, c) in coeffs {
            if c.nrows() != n || c.ncols() != n {
                return Err(Error::InvalidElement(format!(
                    "coefficient {k} is {}x{}, expected {n}x{n}",
                    c.nrows(),
                    c.ncols()
                )));
            }
            if c.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
                continue;
            }
            if k.abs() > bound {
                return Err(Error::InvalidElement(format!(
                    "frequency {k} outside [-{bound}, {bound}]"
                )));
            }
            kept.insert(k, c);
        }
        Ok(Self { model: model.clone(), data: ElementData::Torus(kept) })
    }

    /// Constant element `m` (a member of `D` when `m` is block diagonal).
    pub fn constant(model: &AlgebraModel, m: CMat) -> Result<Self> {
        if model.is_torus() {
            Self::from_coefficients(model, BTreeMap::from([(0, m)]))
        } else {
            Self::from_matrix(model, m)
        }
    }

    pub fn identity(model: &AlgebraModel) -> Self {
        Self::constant(model, linalg::eye(model.n())).expect("identity has the model's shape")
    }

    pub fn zero(model: &AlgebraModel) -> Self {
        Self::constant(model, linalg::zeros(model.n())).expect("zero has the model's shape")
    }

    /// The coordinate function `z * 1` on the torus.
    pub fn coordinate(model: &AlgebraModel) -> Result<Self> {
        if !model.is_torus() {
            return Err(Error::Unsupported {
                model: model.kind().to_string(),
                what: "coordinate function".into(),
            });
        }
        let model = if model.degree() < 1 { model.with_degree(1) } else { model.clone() };
        Self::from_coefficients(&model, BTreeMap::from([(1, linalg::eye(model.n()))]))
    }

    pub fn model(&self) -> &AlgebraModel {
        &self.model
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn data(&self) -> &ElementData {
        &self.data
    }

    pub fn as_matrix(&self) -> Option<&CMat> {
        match &self.data {
            ElementData::Matrix(m) => Some(m),
            ElementData::Torus(_) => None,
        }
    }

    pub fn coefficients(&self) -> Option<&BTreeMap<i64, CMat>> {
        match &self.data {
            ElementData::Torus(c) => Some(c),
            ElementData::Matrix(_) => None,
        }
    }

    /// Fourier coefficient `k` (zero when absent). For matrix elements only `k = 0` is nonzero.
    pub fn coefficient(&self, k: i64) -> CMat {
        match &self.data {
            ElementData::Torus(c) => c.get(&k).cloned().unwrap_or_else(|| linalg::zeros(self.n())),
            ElementData::Matrix(m) if k == 0 => m.clone(),
            ElementData::Matrix(_) => linalg::zeros(self.n()),
        }
    }

    /// Lowest and highest frequency carrying a nonzero coefficient.
    pub fn support(&self) -> Option<(i64, i64)> {
        match &self.data {
            ElementData::Torus(c) => Some((*c.keys().next()?, *c.keys().next_back()?)),
            ElementData::Matrix(_) => Some((0, 0)),
        }
    }

    /// Value at the angle `theta` (the matrix itself for the matrix model).
    pub fn eval(&self, theta: f64) -> CMat {
        match &self.data {
            ElementData::Matrix(m) => m.clone(),
            ElementData::Torus(c) => {
                let mut acc = linalg::zeros(self.n());
                for (&k, m) in c {
                    acc += m * Complex64::from_polar(1.0, k as f64 * theta);
                }
                acc
            }
        }
    }

    /// Values at the model's quadrature nodes (a single matrix for the matrix model).
    pub fn samples(&self) -> Vec<CMat> {
        self.samples_at(self.model.quad_nodes())
    }

    /// Values at `k` uniform nodes `2 pi j / k`.
    pub fn samples_at(&self, k: usize) -> Vec<CMat> {
        match &self.data {
            ElementData::Matrix(m) => vec![m.clone()],
            ElementData::Torus(c) => fft::synthesize(self.n(), c.iter().map(|(f, m)| (*f, m)), k),
        }
    }

    pub fn adjoint(&self) -> Self {
        let data = match &self.data {
            ElementData::Matrix(m) => ElementData::Matrix(m.adjoint()),
            ElementData::Torus(c) => {
                ElementData::Torus(c.iter().map(|(&k, m)| (-k, m.adjoint())).collect())
            }
        };
        Self { model: self.model.clone(), data }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let data = match &self.data {
            ElementData::Matrix(m) => ElementData::Matrix(m * s),
            ElementData::Torus(c) => ElementData::Torus(
                c.iter()
                    .map(|(&k, m)| (k, m * s))
                    .filter(|(_, m)| m.iter().any(|z| *z != Complex64::new(0.0, 0.0)))
                    .collect(),
            ),
        };
        Self { model: self.model.clone(), data }
    }

    fn merged_model(&self, other: &Element, degree: usize) -> Result<AlgebraModel> {
        self.model.check_compatible(&other.model)?;
        if !self.model.is_torus() {
            return Ok(self.model.clone());
        }
        let k = self.model.quad_nodes().max(other.model.quad_nodes());
        let base = if self.model.quad_nodes() >= other.model.quad_nodes() {
            &self.model
        } else {
            &other.model
        };
        debug_assert_eq!(base.quad_nodes(), k);
        Ok(base.with_degree(degree))
    }

    fn combine(&self, other: &Element, sign: f64) -> Result<Self> {
        let degree = self.model.degree().max(other.model.degree());
        let model = self.merged_model(other, degree)?;
        match (&self.data, &other.data) {
            (ElementData::Matrix(a), ElementData::Matrix(b)) => {
                Self::from_matrix(&model, a + b * cx(sign, 0.0))
            }
            (ElementData::Torus(a), ElementData::Torus(b)) => {
                let mut out = a.clone();
                for (&k, m) in b {
                    let e = out.entry(k).or_insert_with(|| linalg::zeros(model.n()));
                    *e += m * cx(sign, 0.0);
                }
                Self::from_coefficients(&model, out)
            }
            _ => unreachable!("compatible models share a data layout"),
        }
    }

    pub fn add(&self, other: &Element) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Element) -> Result<Self> {
        self.combine(other, -1.0)
    }

    /// Product; torus products convolve coefficients and the degree bound adds up.
    pub fn mul(&self, other: &Element) -> Result<Self> {
        let degree = self.model.degree() + other.model.degree();
        let model = self.merged_model(other, degree)?;
        match (&self.data, &other.data) {
            (ElementData::Matrix(a), ElementData::Matrix(b)) => Self::from_matrix(&model, a * b),
            (ElementData::Torus(a), ElementData::Torus(b)) => {
                let mut out: BTreeMap<i64, CMat> = BTreeMap::new();
                for (&ka, ma) in a {
                    for (&kb, mb) in b {
                        let e = out.entry(ka + kb).or_insert_with(|| linalg::zeros(model.n()));
                        *e += ma * mb;
                    }
                }
                Self::from_coefficients(&model, out)
            }
            _ => unreachable!("compatible models share a data layout"),
        }
    }

    /// Largest entrywise (coefficientwise on the torus) difference.
    pub fn max_abs_diff(&self, other: &Element) -> Result<f64> {
        self.model.check_compatible(&other.model)?;
        Ok(match (&self.data, &other.data) {
            (ElementData::Matrix(a), ElementData::Matrix(b)) => linalg::max_abs_diff(a, b),
            (ElementData::Torus(a), ElementData::Torus(b)) => {
                let keys: std::collections::BTreeSet<i64> = a.keys().chain(b.keys()).copied().collect();
                keys.into_iter()
                    .map(|k| linalg::max_abs_diff(&self.coefficient(k), &other.coefficient(k)))
                    .fold(0.0, f64::max)
            }
            _ => unreachable!("compatible models share a data layout"),
        })
    }

    /// Equality within `tol`, entrywise or coefficientwise.
    pub fn approx_eq(&self, other: &Element, tol: f64) -> bool {
        self.max_abs_diff(other).map(|d| d <= tol).unwrap_or(false)
    }

    /// Default equality tolerance for this element's model.
    pub fn default_tol(&self) -> f64 {
        if self.model.is_torus() {
            TORUS_TOL
        } else {
            MATRIX_TOL
        }
    }

    /// Largest entry modulus over nodes (the matrix itself in the matrix model).
    pub fn sup_abs(&self) -> f64 {
        self.samples().iter().map(linalg::max_abs).fold(0.0, f64::max)
    }
}

/// Largest entrywise difference between two elements evaluated on a common node set.
pub fn nodewise_diff(a: &Element, b: &Element) -> Result<f64> {
    a.model().check_compatible(b.model())?;
    let k = a.model().quad_nodes().max(b.model().quad_nodes());
    Ok(a.samples_at(k)
        .iter()
        .zip(b.samples_at(k).iter())
        .map(|(x, y)| linalg::max_abs_diff(x, y))
        .fold(0.0, f64::max))
}

// ---------------------------------------------------------------------------
// JSON

type JsonMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
struct ElementJson {
    kind: String,
    n: usize,
    blocks: Option<Vec<usize>>,
    degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    quad_nodes: Option<usize>,
    data: serde_json::Value,
}

fn matrix_to_json(m: &CMat) -> JsonMatrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

fn matrix_from_json(rows: &JsonMatrix, n: usize) -> std::result::Result<CMat, String> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(format!("matrix data must be {n}x{n}"));
    }
    Ok(CMat::from_fn(n, n, |i, j| cx(rows[i][j][0], rows[i][j][1])))
}

impl Serialize for Element {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::Error as _;
        let data = match &self.data {
            ElementData::Matrix(m) => serde_json::to_value(matrix_to_json(m)),
            ElementData::Torus(c) => serde_json::to_value(
                c.iter()
                    .map(|(k, m)| (k.to_string(), matrix_to_json(m)))
                    .collect::<BTreeMap<String, JsonMatrix>>(),
            ),
        }
        .map_err(S::Error::custom)?;
        let torus = self.model.is_torus();
        ElementJson {
            kind: if torus { "torus" } else { "matrix" }.to_string(),
            n: self.model.n(),
            blocks: (!torus).then(|| self.model.blocks().to_vec()),
            degree: torus.then(|| self.model.degree()),
            quad_nodes: torus.then(|| self.model.quad_nodes()),
            data,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Element {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = ElementJson::deserialize(deserializer)?;
        let build = || -> std::result::Result<Element, String> {
            match raw.kind.as_str() {
                "matrix" => {
                    let blocks = raw.blocks.clone().unwrap_or_else(|| vec![raw.n]);
                    let model = AlgebraModel::matrix_block(&blocks).map_err(|e| e.to_string())?;
                    if model.n() != raw.n {
                        return Err(format!("blocks {blocks:?} do not sum to n = {}", raw.n));
                    }
                    let rows: JsonMatrix =
                        serde_json::from_value(raw.data.clone()).map_err(|e| format!("data: {e}"))?;
                    Element::from_matrix(&model, matrix_from_json(&rows, raw.n)?)
                        .map_err(|e| e.to_string())
                }
                "torus" => {
                    let degree = raw.degree.ok_or("torus element requires \"degree\"")?;
                    let k = raw.quad_nodes.unwrap_or(4 * degree + 1);
                    let model = AlgebraModel::torus(raw.n, degree, k).map_err(|e| e.to_string())?;
                    let map: BTreeMap<String, JsonMatrix> =
                        serde_json::from_value(raw.data.clone()).map_err(|e| format!("data: {e}"))?;
                    let mut coeffs = BTreeMap::new();
                    for (key, rows) in &map {
                        let k: i64 = key
                            .parse()
                            .map_err(|_| format!("frequency key {key:?} is not an integer"))?;
                        coeffs.insert(k, matrix_from_json(rows, raw.n)?);
                    }
                    Element::from_coefficients(&model, coeffs).map_err(|e| e.to_string())
                }
                other => Err(format!("unknown kind {other:?} (expected \"matrix\" or \"torus\")")),
            }
        };
        build().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus_sample() -> Element {
        let model = AlgebraModel::torus(2, 2, 9).unwrap();
        let c0 = CMat::from_fn(2, 2, |i, j| cx(1.0 + i as f64, j as f64 * 0.5));
        let c1 = CMat::from_fn(2, 2, |i, j| cx(-0.25 * j as f64, 0.1 + i as f64));
        let cm2 = CMat::from_fn(2, 2, |i, j| cx(0.3, -0.2 * (i + j) as f64));
        Element::from_coefficients(&model, BTreeMap::from([(0, c0), (1, c1), (-2, cm2)])).unwrap()
    }

    #[test]
    fn samples_match_direct_evaluation() {
        let x = torus_sample();
        let nodes = x.model().nodes();
        for (s, th) in x.samples().iter().zip(nodes) {
            assert!(linalg::max_abs_diff(s, &x.eval(th)) < 1e-13);
        }
    }

    #[test]
    fn torus_product_is_pointwise() {
        let x = torus_sample();
        let y = x.adjoint();
        let p = x.mul(&y).unwrap();
        assert_eq!(p.model().degree(), 4);
        assert!(p.model().quad_nodes() >= 17);
        let th = 0.731;
        assert!(linalg::max_abs_diff(&p.eval(th), &(x.eval(th) * y.eval(th))) < 1e-12);
    }

    #[test]
    fn adjoint_is_pointwise_adjoint() {
        let x = torus_sample();
        let th = 1.3;
        assert!(linalg::max_abs_diff(&x.adjoint().eval(th), &x.eval(th).adjoint()) < 1e-14);
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        let model = AlgebraModel::torus(1, 1, 5).unwrap();
        let r = Element::from_coefficients(&model, BTreeMap::from([(2, linalg::eye(1))]));
        assert!(r.is_err());
    }

    #[test]
    fn json_round_trip_is_exact() {
        let x = torus_sample();
        let s = serde_json::to_string(&x).unwrap();
        let back: Element = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);

        let model = AlgebraModel::matrix_block(&[1, 2]).unwrap();
        let m = CMat::from_fn(3, 3, |i, j| cx(0.1 * i as f64 + 1.0 / 3.0, -(j as f64) / 7.0));
        let x = Element::from_matrix(&model, m).unwrap();
        let s = serde_json::to_string(&x).unwrap();
        assert!(s.contains("\"kind\":\"matrix\""));
        let back: Element = serde_json::from_str(&s).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn json_errors_are_reported() {
        let bad = r#"{"kind":"matrix","n":2,"blocks":[1,1],"degree":null,"data":[[[1,0]]]}"#;
        let e = serde_json::from_str::<Element>(bad).unwrap_err();
        assert!(e.to_string().contains("2x2"));
        let bad = r#"{"kind":"torus","n":1,"blocks":null,"degree":1,"data":{"x":[[[1,0]]]}}"#;
        assert!(serde_json::from_str::<Element>(bad).is_err());
    }
}
