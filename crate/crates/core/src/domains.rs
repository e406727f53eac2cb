//! Scaled fundamental domains `D_t^±`, the backward chain `Δ_t^+(i)` and the
//! iteration counters `k_t`, `κ_t`, `α_t`.
//!
//! Orbits that approach the sink at 1 are tracked by their distance `u = 1 − x`
//! so that domains of size `t²` or smaller keep full relative precision.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapError, Regime};
use crate::numeric::{Interval, REL_MARGIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error(transparent)]
    Map(#[from] CentralMapError),
    #[error("iteration budget {cap} exceeded while resolving {what}")]
    IterationBudgetExceeded { cap: u64, what: &'static str },
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

type Result<T> = std::result::Result<T, DomainError>;

pub const DEFAULT_LADDER_CAP: u64 = 1_000_000;

/// A point stored either directly or by its distance to the sink at 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coord {
    X(f64),
    U(f64),
}

impl Coord {
    pub fn x(self) -> f64 {
        match self {
            Coord::X(x) => x,
            Coord::U(u) => 1.0 - u,
        }
    }

    pub fn u(self) -> f64 {
        match self {
            Coord::X(x) => 1.0 - x,
            Coord::U(u) => u,
        }
    }

    fn normalize(x: f64) -> Coord {
        if x > 0.5 {
            Coord::U(1.0 - x)
        } else {
            Coord::X(x)
        }
    }

    pub fn forward(self, map: &CentralMap) -> std::result::Result<Coord, CentralMapError> {
        match self {
            Coord::X(x) => Ok(Coord::normalize(map.eval(x)?)),
            Coord::U(u) => Ok(Coord::U(map.step_u(u)?)),
        }
    }

    pub fn backward(self, map: &CentralMap) -> std::result::Result<Coord, CentralMapError> {
        match self {
            Coord::X(x) => Ok(Coord::X(map.inverse(x)?)),
            Coord::U(u) => {
                let v = map.step_u_inv(u)?;
                Ok(if v > 0.5 { Coord::X(1.0 - v) } else { Coord::U(v) })
            }
        }
    }
}

/// `1 − F^n(x)`, accurate relative to its own size near the sink.
pub fn forward_u(map: &CentralMap, x: f64, n: u64) -> std::result::Result<f64, CentralMapError> {
    let mut c = Coord::normalize(x);
    for k in 0..n {
        if let Coord::U(u) = c {
            if u.abs() <= map.delta() {
                return Ok(u * lambda_pow(map.lambda(), n - k));
            }
        }
        c = c.forward(map)?;
    }
    Ok(c.u())
}

/// `λ^n` by repeated squaring.
pub fn lambda_pow(lambda: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        lambda.powi(n as i32)
    } else {
        lambda.powf(n as f64)
    }
}

/// `F^{−n}(1 − u)`.
pub fn backward_from_u(map: &CentralMap, u: f64, n: u64) -> std::result::Result<f64, CentralMapError> {
    let mut c = if u < 0.5 { Coord::U(u) } else { Coord::X(1.0 - u) };
    for _ in 0..n {
        c = c.backward(map)?;
    }
    Ok(c.x())
}

/// `ln (F^n)′(x)` along the orbit together with `1 − F^n(x)`.
pub fn forward_u_log_deriv(map: &CentralMap, x: f64, n: u64) -> std::result::Result<(f64, f64), CentralMapError> {
    let mut c = Coord::normalize(x);
    let mut acc = 0.0;
    for k in 0..n {
        if let Coord::U(u) = c {
            if u.abs() <= map.delta() {
                let rest = n - k;
                return Ok((u * lambda_pow(map.lambda(), rest), acc + rest as f64 * map.lambda().ln()));
            }
        }
        let xx = c.x();
        let d = match c {
            _ => map.deriv(xx)?,
        };
        acc += d.ln();
        c = c.forward(map)?;
    }
    Ok((c.u(), acc))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LadderKind {
    Hyperbolic,
    SaddleNode,
    TwoParam,
    #[serde(rename = "POST_SN")]
    PostSaddleNode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainLadder {
    pub t: f64,
    pub s: f64,
    pub regime: LadderKind,
    pub lambda: f64,
    pub d_minus: Interval,
    /// Distances of the `D^−` endpoints to 1, as `[u(right), u(left)]`.
    pub d_minus_u: Interval,
    pub d_plus: Interval,
    pub k_t: u64,
    pub delta_chain: Vec<Interval>,
    pub kappa_t: Option<u64>,
    pub alpha_t: Option<u64>,
    pub eta_t: Option<f64>,
}

impl DomainLadder {
    pub fn delta_lengths(&self) -> Vec<f64> {
        self.delta_chain.iter().map(|d| d.len()).collect()
    }

    /// `∪_{i=0..4} Δ_t^+(i)` as a single interval.
    pub fn delta_union(&self) -> Option<Interval> {
        let first = self.delta_chain.first()?;
        let last = self.delta_chain.last()?;
        Some(Interval::new(last.lo, first.hi))
    }
}

pub fn build_ladder(map: &CentralMap, t: f64, s: f64) -> Result<DomainLadder> {
    build_ladder_capped(map, t, s, DEFAULT_LADDER_CAP)
}

pub fn build_ladder_capped(map: &CentralMap, t: f64, s: f64, cap: u64) -> Result<DomainLadder> {
    if !(t > 0.0 && t < map.delta()) {
        return Err(DomainError::InvalidInput(format!("t = {t} must lie in (0, delta)")));
    }
    if s != map.s() {
        return Err(DomainError::InvalidInput(format!("s = {s} differs from the map's s = {}", map.s())));
    }
    let lambda = map.lambda();
    match map.regime() {
        Regime::Hyperbolic => {
            let (d_plus, k) = backward_into(map, Interval::new(lambda * t, t), Interval::new(0.0, t), t, cap)?;
            let beta = map.beta();
            if !(d_plus.lo > t / (beta * beta) && d_plus.hi <= t * (1.0 + REL_MARGIN)) {
                return Err(DomainError::InvariantViolated(format!(
                    "D_t^+ = {:?} not inside (t/beta^2, t]",
                    d_plus
                )));
            }
            Ok(DomainLadder {
                t,
                s,
                regime: LadderKind::Hyperbolic,
                lambda,
                d_minus: Interval::new(1.0 - t, 1.0 - lambda * t),
                d_minus_u: Interval::new(lambda * t, t),
                d_plus,
                k_t: k,
                delta_chain: vec![],
                kappa_t: None,
                alpha_t: None,
                eta_t: None,
            })
        }
        Regime::SaddleNode if s == 0.0 => {
            let (d_plus, k) = backward_into(map, Interval::new(lambda * t, t), Interval::new(0.0, t), t, cap)?;
            if d_plus.len() > t * t * (1.0 + REL_MARGIN) {
                return Err(DomainError::InvariantViolated(format!(
                    "|D_t^+| = {:e} exceeds t^2 = {:e}",
                    d_plus.len(),
                    t * t
                )));
            }
            let mut chain = Vec::with_capacity(5);
            let mut cur = Interval::new(map.inverse(t)?, t);
            chain.push(cur);
            for _ in 1..5 {
                cur = Interval::new(map.inverse(cur.lo)?, cur.lo);
                chain.push(cur);
            }
            let eta = chain[0].len() + chain[1].len();
            let (kappa, alpha) = kappa_alpha(map, chain[0], t, eta, cap)?;
            Ok(DomainLadder {
                t,
                s,
                regime: LadderKind::SaddleNode,
                lambda,
                d_minus: Interval::new(1.0 - t, 1.0 - lambda * t),
                d_minus_u: Interval::new(lambda * t, t),
                d_plus,
                k_t: k,
                delta_chain: chain,
                kappa_t: Some(kappa),
                alpha_t: Some(alpha),
                eta_t: Some(eta),
            })
        }
        Regime::SaddleNode if s > 0.0 => {
            let r = s.sqrt();
            if t <= r {
                return Err(DomainError::InvalidInput(format!("t = {t} must exceed sqrt(s) = {r}")));
            }
            let tau = t - r;
            let (d_plus, k) = backward_into(map, Interval::new(lambda * tau, tau), Interval::new(r, t), t, cap)?;
            Ok(DomainLadder {
                t,
                s,
                regime: LadderKind::PostSaddleNode,
                lambda,
                d_minus: Interval::new(1.0 - tau, 1.0 - lambda * tau),
                d_minus_u: Interval::new(lambda * tau, tau),
                d_plus,
                k_t: k,
                delta_chain: vec![],
                kappa_t: None,
                alpha_t: None,
                eta_t: None,
            })
        }
        Regime::SaddleNode => Err(DomainError::InvalidInput(
            "the saddle-node ladder needs s >= 0".into(),
        )),
        Regime::TwoParam => {
            if !(s < 0.0) {
                return Err(DomainError::InvalidInput("the two-parameter ladder needs s < 0".into()));
            }
            let dmu = Interval::new(3.0 * lambda * t, 3.0 * t);
            let start = map.eval(-t)?;
            let mut c = Coord::normalize(start);
            let mut k = 0u64;
            loop {
                if let Coord::U(u) = c {
                    if dmu.contains_slack(u, 1e-12 * t) {
                        break;
                    }
                }
                if k >= cap {
                    return Err(DomainError::IterationBudgetExceeded { cap, what: "k_{t,s}" });
                }
                c = c.forward(map)?;
                k += 1;
            }
            let lo = backward_from_u(map, dmu.hi, k)?;
            let hi = backward_from_u(map, dmu.lo, k)?;
            let d_plus = Interval::new(lo, hi);
            let len = d_plus.len();
            if !(len <= (t * t + s.abs()) * (1.0 + REL_MARGIN) && len > 0.5 * t * t) {
                return Err(DomainError::InvariantViolated(format!(
                    "|D_(t,s)^+| = {len:e} outside (t^2/2, t^2+|s|]"
                )));
            }
            Ok(DomainLadder {
                t,
                s,
                regime: LadderKind::TwoParam,
                lambda,
                d_minus: Interval::new(1.0 - 3.0 * t, 1.0 - 3.0 * lambda * t),
                d_minus_u: dmu,
                d_plus,
                k_t: k,
                delta_chain: vec![],
                kappa_t: None,
                alpha_t: None,
                eta_t: None,
            })
        }
    }
}

/// First backward iterate of the sink-side interval (given in `u`) that fits in `target`.
fn backward_into(map: &CentralMap, dmu: Interval, target: Interval, t: f64, cap: u64) -> Result<(Interval, u64)> {
    let slack = 1e-12 * t;
    let mut left = Coord::U(dmu.hi);
    let mut right = Coord::U(dmu.lo);
    for k in 0..=cap {
        if let (Coord::X(a), Coord::X(b)) = (left, right) {
            if a >= target.lo - slack && b <= target.hi + slack {
                return Ok((Interval::new(a, b), k));
            }
        }
        left = left.backward(map)?;
        right = right.backward(map)?;
    }
    Err(DomainError::IterationBudgetExceeded { cap, what: "k_t" })
}

fn kappa_alpha(map: &CentralMap, d0: Interval, t: f64, eta: f64, cap: u64) -> Result<(u64, u64)> {
    let mut left = Coord::X(d0.lo);
    let mut right = Coord::X(d0.hi);
    let inside = |l: Coord, r: Coord, w: f64| match (l, r) {
        (Coord::U(ul), Coord::U(ur)) => ul <= w && ur >= 0.0,
        _ => false,
    };
    let mut k = 0;
    while !inside(left, right, t) {
        if k >= cap {
            return Err(DomainError::IterationBudgetExceeded { cap, what: "kappa_t" });
        }
        left = left.forward(map)?;
        right = right.forward(map)?;
        k += 1;
    }
    let mut a = 0;
    while !inside(left, right, eta) {
        if a >= cap {
            return Err(DomainError::IterationBudgetExceeded { cap, what: "alpha_t" });
        }
        left = left.forward(map)?;
        right = right.forward(map)?;
        a += 1;
    }
    Ok((k, a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthRatioReport {
    /// `δ_t^i / δ_t^0` for `i = 1..4`.
    pub ratios: Vec<f64>,
    /// `Σ_{i=0..4} δ_t^i / δ_t^0`.
    pub sum_ratio: f64,
    /// Per ratio, distance to the nearer end of `[0.9, 1]` (negative when outside).
    pub margins: Vec<f64>,
    pub sum_margin: f64,
    pub failing: Vec<usize>,
    pub pass: bool,
}

pub fn check_length_ratios(ladder: &DomainLadder) -> LengthRatioReport {
    let lens = ladder.delta_lengths();
    if lens.is_empty() {
        return LengthRatioReport {
            ratios: vec![],
            sum_ratio: f64::NAN,
            margins: vec![],
            sum_margin: f64::NAN,
            failing: vec![],
            pass: false,
        };
    }
    let d0 = lens[0];
    let ratios: Vec<f64> = lens[1..].iter().map(|d| d / d0).collect();
    let margins: Vec<f64> = ratios.iter().map(|r| (1.0 - r).min(r - 0.9)).collect();
    let failing: Vec<usize> = margins
        .iter()
        .enumerate()
        .filter(|(_, m)| !(**m >= 0.0))
        .map(|(i, _)| i + 1)
        .collect();
    let sum_ratio: f64 = lens.iter().sum::<f64>() / d0;
    let sum_margin = (sum_ratio - 4.0).min(5.0 - sum_ratio);
    LengthRatioReport {
        pass: failing.is_empty() && sum_margin >= 0.0,
        ratios,
        sum_ratio,
        margins,
        sum_margin,
        failing,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaAlphaReport {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

pub fn lambda_alpha_bound(ladder: &DomainLadder) -> LambdaAlphaReport {
    lambda_alpha_check(ladder.lambda, ladder.alpha_t.unwrap_or(0), ladder.t)
}

/// `λ^α ≤ 2t/λ` with the relative certification margin.
pub fn lambda_alpha_check(lambda: f64, alpha: u64, t: f64) -> LambdaAlphaReport {
    let lhs = lambda.powf(alpha as f64);
    let rhs = 2.0 * t / lambda;
    LambdaAlphaReport { lhs, rhs, pass: lhs * (1.0 + REL_MARGIN) <= rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::CentralMapSpec;

    fn sn() -> CentralMap {
        CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap()
    }

    #[test]
    fn hyperbolic_minus_domain() {
        let m = CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap();
        let l = build_ladder(&m, 0.01, 0.0).unwrap();
        assert!((l.d_minus.lo - 0.99).abs() < 1e-15);
        assert!((l.d_minus.hi - 0.9905).abs() < 1e-15);
        assert!(l.d_plus.lo > 0.01 / (1.01 * 1.01) && l.d_plus.hi <= 0.01);
        let ua = forward_u(&m, l.d_plus.lo, l.k_t).unwrap();
        let ub = forward_u(&m, l.d_plus.hi, l.k_t).unwrap();
        assert!((ua - 0.01).abs() <= 1e-9 * 0.01);
        assert!((ub - 0.95 * 0.01).abs() <= 1e-9 * 0.01);
    }

    #[test]
    fn saddle_node_ladder_shapes() {
        let m = sn();
        for &t in &[1e-2, 1e-3, 1e-4] {
            let l = build_ladder(&m, t, 0.0).unwrap();
            assert!(l.d_plus.lo >= 0.0 && l.d_plus.hi <= t);
            assert!(l.d_plus.len() <= t * t);
            assert!(l.alpha_t.unwrap() >= 1);
            let eta = l.eta_t.unwrap();
            assert!(t * t < eta && eta < 2.0 * t * t, "t = {t}: eta = {eta}");
        }
    }

    #[test]
    fn counters_are_minimal() {
        let m = sn();
        let t = 1e-3;
        let l = build_ladder(&m, t, 0.0).unwrap();
        let (k, a) = (l.kappa_t.unwrap(), l.alpha_t.unwrap());
        let eta = l.eta_t.unwrap();
        let d0 = l.delta_chain[0];
        let u_at = |n: u64| forward_u(&m, d0.lo, n).unwrap();
        assert!(u_at(k) <= t && u_at(k - 1) > t);
        assert!(u_at(k + a) <= eta && u_at(k + a - 1) > eta);
    }

    #[test]
    fn length_ratios_and_lambda_alpha() {
        let m = sn();
        for &t in &[1e-3, 1e-4] {
            let l = build_ladder(&m, t, 0.0).unwrap();
            let r = check_length_ratios(&l);
            assert!(r.pass, "{r:?}");
            assert!(lambda_alpha_bound(&l).pass);
        }
        assert!(!lambda_alpha_check(0.999, 0, 1e-3).pass);
    }

    #[test]
    fn large_t_reports_failing_ratio() {
        let spec = CentralMapSpec::saddle_node(0.999, 0.0).with_delta(0.32);
        let m = CentralMap::build(&spec).unwrap();
        let l = build_ladder(&m, 0.3, 0.0).unwrap();
        let r = check_length_ratios(&l);
        assert!(!r.pass);
        assert!(r.failing.contains(&4));
    }

    #[test]
    fn two_param_plus_domain_size() {
        let m = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, -1e-7)).unwrap();
        let t = 1e-3;
        let l = build_ladder(&m, t, -1e-7).unwrap();
        assert!(l.d_plus.len() <= t * t + 1e-7);
        assert!(l.d_plus.len() > 0.5 * t * t);
        let p = m.eval(-t).unwrap();
        assert!(l.d_plus.contains(p));
    }

    #[test]
    fn post_saddle_node_window() {
        let s = 1e-8;
        let m = CentralMap::build(&CentralMapSpec::saddle_node(0.999, s)).unwrap();
        let t = s.sqrt() + 1e-5;
        let l = build_ladder(&m, t, s).unwrap();
        assert_eq!(l.regime, LadderKind::PostSaddleNode);
        assert!(l.d_plus.lo >= s.sqrt() && l.d_plus.hi <= t);
        assert!(build_ladder(&m, s.sqrt(), s).is_err());
    }

    #[test]
    fn ladder_json_keeps_counters() {
        let l = build_ladder(&sn(), 1e-3, 0.0).unwrap();
        let js = serde_json::to_string(&l).unwrap();
        let back: DomainLadder = serde_json::from_str(&js).unwrap();
        assert_eq!(back, l);
    }
}
