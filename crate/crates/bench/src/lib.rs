//! Fixed inputs shared by the benchmarks.

use nchardy::{random_element, AlgebraModel, Element, ElementClass};

pub const SEED: u64 = 0x5eed;

/// Default matrix model of the verification suites.
pub fn matrix_model() -> AlgebraModel {
    AlgebraModel::matrix_block(&[1, 1, 2]).expect("valid flag")
}

/// Default torus model of the verification suites.
pub fn torus_model() -> AlgebraModel {
    AlgebraModel::torus(2, 4, 17).expect("valid torus model")
}

/// Random element of `A` in both models.
pub fn analytic_pair() -> (Element, Element) {
    (
        random_element(&matrix_model(), ElementClass::A, SEED),
        random_element(&torus_model(), ElementClass::A, SEED),
    )
}

/// Positive matrix symbol `q^* q` of size `n` and degree `degree`.
pub fn symbol(n: usize, degree: usize) -> Element {
    let model = AlgebraModel::torus_minimal(n, degree).expect("valid torus model");
    let q = random_element(&model, ElementClass::A, SEED);
    q.adjoint().mul(&q).expect("same model")
}

/// Positive definite weight on the fully triangular `n x n` model.
pub fn weight(n: usize) -> Element {
    let model = AlgebraModel::triangular(n).expect("valid size");
    random_element(&model, ElementClass::PositiveInvertible, SEED)
}
