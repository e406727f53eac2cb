//! Standing quantitative conditions, each checked as `lhs < rhs`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapError, Regime};
use crate::domains::{forward_u_log_deriv, DomainLadder, LadderKind};
use crate::numeric::{linspace, CertMode, Interval, Outward, REL_MARGIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HypothesisError {
    #[error(transparent)]
    Map(#[from] CentralMapError),
    #[error("{name} = {value} outside {allowed}")]
    SideConstraintViolated { name: &'static str, value: f64, allowed: &'static str },
    #[error("t = {t} is not above sqrt(s) = {sqrt_s}")]
    OutOfWindow { t: f64, sqrt_s: f64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
}

type Result<T> = std::result::Result<T, HypothesisError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    T1,
    T2,
    T3,
    SN,
    DS,
    #[serde(rename = "EXP_BUDGET")]
    ExpBudget,
    #[serde(rename = "L_HALF")]
    LHalf,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::T1 => "T1",
            Condition::T2 => "T2",
            Condition::T3 => "T3",
            Condition::SN => "SN",
            Condition::DS => "DS",
            Condition::ExpBudget => "EXP_BUDGET",
            Condition::LHalf => "L_HALF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub condition: Condition,
    pub inputs: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// `rhs − lhs`.
    pub margin: f64,
    pub mode: CertMode,
    /// Extra diagnostics that do not enter the verdict.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, f64>,
}

impl HypothesisReport {
    fn new(condition: Condition, inputs: &[(&str, f64)], lhs: f64, rhs: f64) -> Self {
        HypothesisReport {
            condition,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            lhs,
            rhs,
            pass: rhs - lhs > 0.0,
            margin: rhs - lhs,
            mode: CertMode::Fast,
            notes: BTreeMap::new(),
        }
    }

    fn directed(mut self, lhs: Outward, rhs: Outward) -> Self {
        self.mode = CertMode::Directed;
        self.pass = lhs.certainly_lt(rhs);
        self.notes.insert("lhs_hi".into(), lhs.hi);
        self.notes.insert("rhs_lo".into(), rhs.lo);
        self
    }

    fn note(mut self, key: &str, v: f64) -> Self {
        self.notes.insert(key.into(), v);
        self
    }

    fn input(&self, k: &str) -> f64 {
        self.inputs[k]
    }

    /// Recompute `lhs` and `rhs` from `inputs` alone (closed-form conditions).
    pub fn recompute(&self) -> Option<(f64, f64)> {
        match self.condition {
            Condition::T2 => Some((1.0 - self.input("lambda"), 1.0 / self.input("beta"))),
            Condition::T3 => Some((1.0, ell_t3(self.input("lambda"), self.input("beta")))),
            Condition::SN => Some((sn_term(self.input("lambda"), self.input("K")), 0.5)),
            Condition::DS => {
                let k = self.input("K");
                let l = sn_term(self.input("lambda"), k);
                let b = ds_beta_term(self.input("beta"), k);
                Some((l.max(b), 0.5))
            }
            Condition::ExpBudget => {
                let (l, k, s, tau) = (self.input("lambda"), self.input("K"), self.input("s"), self.input("tau"));
                Some((2.0, (1.0 - l) / (2.0 * s.sqrt() + tau) * (-k).exp()))
            }
            _ => None,
        }
    }

    /// Whether the stored verdict agrees with the stored `lhs`/`rhs` (and, for
    /// closed-form conditions, with a recomputation from `inputs`).
    pub fn self_consistent(&self) -> bool {
        let order = self.margin == self.rhs - self.lhs;
        let verdict = match self.mode {
            CertMode::Fast => self.pass == (self.margin > 0.0),
            CertMode::Directed => !self.pass || self.margin > 0.0,
        };
        let recomputed = match self.recompute() {
            Some((l, r)) => l == self.lhs && r == self.rhs,
            None => true,
        };
        order && verdict && recomputed
    }
}

/// `(1−λ)λ / (2(1−β^{−1})β)`.
pub fn ell_t3(lambda: f64, beta: f64) -> f64 {
    (1.0 - lambda) * lambda / (2.0 * (1.0 - 1.0 / beta) * beta)
}

/// `4e^K(1−λ)/λ⁶`.
pub fn sn_term(lambda: f64, k: f64) -> f64 {
    4.0 * k.exp() * (1.0 - lambda) / lambda.powi(6)
}

/// `4e^K(1−β^{−1})/β^{−6}`.
pub fn ds_beta_term(beta: f64, k: f64) -> f64 {
    4.0 * k.exp() * (1.0 - 1.0 / beta) / beta.powi(-6)
}

fn o(x: f64) -> Outward {
    Outward::point(x)
}

fn sn_term_outward(lambda: f64, k: f64) -> Outward {
    o(4.0).mul(o(k).exp()).mul(o(1.0).sub(o(lambda))).div(o(lambda).powi(6))
}

fn ds_beta_term_outward(beta: f64, k: f64) -> Outward {
    let inv = o(1.0).div(o(beta));
    o(4.0).mul(o(k).exp()).mul(o(1.0).sub(inv)).mul(o(beta).powi(6))
}

/// (T1) on a grid of `D^+`, (T2) and (T3) in closed form.
pub fn check_t123(map: &CentralMap, ladder: &DomainLadder, mode: CertMode) -> Result<Vec<HypothesisReport>> {
    if map.regime() != Regime::Hyperbolic {
        return Err(HypothesisError::PreconditionFailed("T1-T3 apply to the hyperbolic regime".into()));
    }
    let (l, b) = (map.lambda(), map.beta());
    let dp = ladder.d_plus;
    let mut min_d = f64::INFINITY;
    let mut witness = dp.lo;
    for x in linspace(dp.lo, dp.hi, 1000) {
        let d = map.deriv(x)?;
        if d < min_d {
            min_d = d;
            witness = x;
        }
    }
    let need = 0.5 * (1.0 - l) / (1.0 - 1.0 / b);
    let min_d = min_d * (1.0 - REL_MARGIN);
    let t1 = HypothesisReport::new(Condition::T1, &[("lambda", l), ("beta", b), ("t", ladder.t)], need, min_d)
        .note("witness", witness);
    let mut t2 = HypothesisReport::new(Condition::T2, &[("lambda", l), ("beta", b)], 1.0 - l, 1.0 / b);
    let ell = ell_t3(l, b);
    let mut t3 = HypothesisReport::new(Condition::T3, &[("lambda", l), ("beta", b)], 1.0, ell).note("ell", ell);
    let mut t1 = t1;
    if mode == CertMode::Directed {
        let need_o = o(0.5).mul(o(1.0).sub(o(l))).div(o(1.0).sub(o(1.0).div(o(b))));
        t1 = t1.directed(need_o, o(min_d));
        t2 = t2.directed(o(1.0).sub(o(l)), o(1.0).div(o(b)));
        let ell_o = o(1.0).sub(o(l)).mul(o(l)).div(o(2.0).mul(o(1.0).sub(o(1.0).div(o(b)))).mul(o(b)));
        t3 = t3.directed(o(1.0), ell_o);
    }
    Ok(vec![t1, t2, t3])
}

fn side(name: &'static str, v: f64, lo: f64, hi: f64, allowed: &'static str) -> Result<()> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(HypothesisError::SideConstraintViolated { name, value: v, allowed })
    }
}

pub fn check_sn(lambda: f64, k: f64, mode: CertMode) -> Result<HypothesisReport> {
    side("lambda", lambda, 2.0 / 3.0, 1.0, "(2/3, 1)")?;
    let r = HypothesisReport::new(Condition::SN, &[("lambda", lambda), ("K", k)], sn_term(lambda, k), 0.5);
    Ok(match mode {
        CertMode::Fast => r,
        CertMode::Directed => r.directed(sn_term_outward(lambda, k), o(0.5)),
    })
}

pub fn check_ds(lambda: f64, beta: f64, k: f64, mode: CertMode) -> Result<HypothesisReport> {
    side("lambda", lambda, 2.0 / 3.0, 1.0, "(2/3, 1)")?;
    side("beta", beta, 1.0, 1.5, "(1, 3/2)")?;
    let lt = sn_term(lambda, k);
    let bt = ds_beta_term(beta, k);
    let r = HypothesisReport::new(Condition::DS, &[("lambda", lambda), ("beta", beta), ("K", k)], lt.max(bt), 0.5)
        .note("lambda_term", lt)
        .note("beta_term", bt);
    Ok(match mode {
        CertMode::Fast => r,
        CertMode::Directed => r.directed(sn_term_outward(lambda, k).max(ds_beta_term_outward(beta, k)), o(0.5)),
    })
}

/// Distortion constant used by the expansion budget: the map's `K` over the whole domain.
pub fn budget_k(map: &CentralMap) -> f64 {
    map.distortion_on(map.domain())
}

/// `ℓ(t,s)e^{−K} > 2` with `ℓ(t,s) ≥ (1−λ)/(2√s+τ)` and `τ = t − √s`.
pub fn check_expansion_budget(map: &CentralMap, t: f64, s: f64, mode: CertMode) -> Result<HypothesisReport> {
    if map.regime() != Regime::SaddleNode || s <= 0.0 {
        return Err(HypothesisError::PreconditionFailed("expansion budget needs a saddle-node map with s > 0".into()));
    }
    let rs = s.sqrt();
    if t <= rs {
        return Err(HypothesisError::OutOfWindow { t, sqrt_s: rs });
    }
    budget_report(map.lambda(), budget_k(map), s, t - rs, mode)
}

pub fn budget_report(lambda: f64, k: f64, s: f64, tau: f64, mode: CertMode) -> Result<HypothesisReport> {
    let rhs = (1.0 - lambda) / (2.0 * s.sqrt() + tau) * (-k).exp();
    let r = HypothesisReport::new(
        Condition::ExpBudget,
        &[("lambda", lambda), ("K", k), ("s", s), ("tau", tau)],
        2.0,
        rhs,
    );
    Ok(match mode {
        CertMode::Fast => r,
        CertMode::Directed => {
            let sq = Outward { lo: s.sqrt().next_down(), hi: s.sqrt().next_up() };
            let den = o(2.0).mul(sq).add(o(tau));
            let rhs_o = o(1.0).sub(o(lambda)).div(den).mul(o(-k).exp());
            r.directed(o(2.0), rhs_o)
        }
    })
}

/// Largest `τ` with a passing budget at this `s`, if any: `(1−λ)e^{−K}/2 − 2√s`.
pub fn budget_tau_window(lambda: f64, k: f64, s: f64) -> Option<f64> {
    let tau = (1.0 - lambda) * (-k).exp() / 2.0 - 2.0 * s.sqrt();
    (tau > 0.0).then_some(tau)
}

/// Maximum of `(Φ^{κ_t+α_t})′` over a grid of `∪_{i≤4} Δ_t^+(i)` against `1/2`.
pub fn contraction_l(map: &CentralMap, ladder: &DomainLadder) -> Result<HypothesisReport> {
    contraction_l_j(map, ladder, 0, 1000)
}

pub fn contraction_l_j(map: &CentralMap, ladder: &DomainLadder, j: u64, grid: usize) -> Result<HypothesisReport> {
    if ladder.regime != LadderKind::SaddleNode {
        return Err(HypothesisError::PreconditionFailed("contraction L needs a saddle-node ladder at s = 0".into()));
    }
    let k = map.distortion_k;
    let sn = check_sn(map.lambda(), k, CertMode::Fast)?;
    if !sn.pass {
        return Err(HypothesisError::PreconditionFailed(format!("(SN) fails: lhs {} >= 1/2", sn.lhs)));
    }
    let (kappa, alpha) = (ladder.kappa_t.unwrap(), ladder.alpha_t.unwrap());
    let union: Interval = ladder.delta_union().unwrap();
    let n = kappa + alpha + j;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = union.lo;
    for x in linspace(union.lo, union.hi, grid) {
        let (_, ld) = forward_u_log_deriv(map, x, n)?;
        if ld > worst {
            worst = ld;
            witness = x;
        }
    }
    let lhs = worst.exp() * (1.0 + REL_MARGIN);
    let (t, l) = (ladder.t, map.lambda());
    let analytic = (2.0 * t + 1.0).powi(4) * k.exp() * (1.0 - l) / (l * t) * l.powi(alpha as i32) / l.powi(4);
    Ok(HypothesisReport::new(
        Condition::LHalf,
        &[("lambda", l), ("K", k), ("t", t), ("kappa_t", kappa as f64), ("alpha_t", alpha as f64), ("j", j as f64)],
        lhs,
        0.5,
    )
    .note("analytic_bound", analytic)
    .note("sn_bound", sn.lhs)
    .note("witness", witness))
}

/// One row per report; `point` labels the parameter point.
pub fn reports_csv(rows: &[(String, HypothesisReport)]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["point", "condition", "lhs", "rhs", "margin", "pass", "mode", "inputs"]).unwrap();
    for (point, r) in rows {
        let inputs: Vec<String> = r.inputs.iter().map(|(k, v)| format!("{k}={v:e}")).collect();
        w.write_record([
            point.clone(),
            r.condition.name().to_string(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.margin),
            r.pass.to_string(),
            match r.mode {
                CertMode::Fast => "fast".to_string(),
                CertMode::Directed => "directed".to_string(),
            },
            inputs.join(";"),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}
