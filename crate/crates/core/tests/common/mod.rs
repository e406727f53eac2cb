//! Independent closed forms and naive iterations used as test oracles.
#![allow(dead_code)]

use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::{build_ladder, DomainLadder};
use snhc::return_map::{build_return_model, ReturnMapModel};

pub fn canon_h() -> CentralMap {
    CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap()
}

pub fn canon_sn() -> CentralMap {
    CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap()
}

pub fn canon_tp(s: f64) -> CentralMap {
    CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, s)).unwrap()
}

pub fn model(map: &CentralMap, t: f64, s: f64) -> (DomainLadder, ReturnMapModel) {
    let ladder = build_ladder(map, t, s).unwrap();
    let model = build_return_model(map, &ladder).unwrap();
    (ladder, model)
}

/// `4 e^K (1 − λ) / λ⁶`, multiplied out factor by factor.
pub fn sn_lhs(lambda: f64, k: f64) -> f64 {
    let mut v = 4.0 * k.exp() * (1.0 - lambda);
    for _ in 0..6 {
        v /= lambda;
    }
    v
}

/// `(1 − λ)λ / (2(β − 1))`, the (T3) constant after cancelling β.
pub fn ell_t3(lambda: f64, beta: f64) -> f64 {
    (1.0 - lambda) * lambda / (2.0 * (beta - 1.0))
}

/// Inverse of `x ↦ x + x² − s` on the branch through 0.
pub fn quad_inverse(y: f64, s: f64) -> f64 {
    2.0 * (y + s) / (1.0 + (1.0 + 4.0 * (y + s)).sqrt())
}

/// `F^n(x)` by plain repeated evaluation.
pub fn naive_iterate(map: &CentralMap, x: f64, n: u64) -> f64 {
    (0..n).fold(x, |y, _| map.eval(y).unwrap())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(a.abs())
}
