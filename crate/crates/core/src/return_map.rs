//! Transition and return systems built on a [`DomainLadder`].
//!
//! With `D^+ = [a, b]` and `D^− ↔ u ∈ [u_b, u_a]` (distance to the sink),
//! the transition is `T = F^{k_t}`, the glued map is `G(x) = T(x) + t − 1 = t − u(x)`
//! and the return map is `R(x) = F^{i(x)}(G(x))` with `i(x)` the first time the
//! orbit of `G(x)` reaches `D^+`. The discontinuities `d_n` solve
//! `G(d_n) = F^{−n}(a)`; just right of `d_n` the branch index is `n` and `R → a`,
//! just left it is `n + 1` and `R → b`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapError};
use crate::domains::{backward_from_u, forward_u, forward_u_log_deriv, DomainLadder, LadderKind};
use crate::numeric::{linspace, Interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReturnMapError {
    #[error(transparent)]
    Map(#[from] CentralMapError),
    #[error("iteration budget {cap} exceeded")]
    IterationBudgetExceeded { cap: u64 },
    #[error("discontinuities {index} and {next} are not separated (at {x})")]
    BranchResolutionFailure { index: u64, next: u64, x: f64 },
    #[error("x = {x} is outside the plus-domain")]
    OutOfDomain { x: f64 },
    #[error("x = {x} is the discontinuity d_{index}; choose a side")]
    AtDiscontinuity { index: u64, x: f64 },
    #[error("return derivative {value} below floor {floor} near x = {witness}")]
    ExpansionFloorViolated { value: f64, floor: f64, witness: f64 },
    #[error("interval [{lo}, {hi}] is not a subinterval of the plus-domain")]
    BadInterval { lo: f64, hi: f64 },
}

type Result<T> = std::result::Result<T, ReturnMapError>;

/// Which extended value to take at a discontinuity: `Left` gives `a` (the limit
/// from the right of `d_n`), `Right` gives `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnConfig {
    /// Upper bound on enumerated discontinuities (countable regimes).
    pub max_branches: usize,
    /// Discontinuities closer than `resolution · |D^+|` to a neighbour or to `a` are not enumerated.
    pub resolution: f64,
    /// Grid points on `D^+` for transition derivatives.
    pub transition_grid: usize,
    /// Grid points on `D^+` whose backward orbits sample each fundamental domain.
    pub branch_grid: usize,
    /// Branches whose images are recomputed forward for the onto check.
    pub onto_samples: usize,
    /// Branches whose estimated image error exceeds this fraction of `|D^+|` are not enumerated.
    pub image_tolerance: f64,
    pub cap: u64,
}

impl Default for ReturnConfig {
    fn default() -> Self {
        ReturnConfig {
            max_branches: 4096,
            resolution: 1e-9,
            transition_grid: 1000,
            branch_grid: 16,
            onto_samples: 32,
            image_tolerance: 1e-2,
            cap: 100_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub index: u64,
    pub x: f64,
    /// `G(d_n) = F^{−n}(a)`.
    pub level: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    /// Value of `i(x)` on the branch interior.
    pub index: u64,
    pub interval: Interval,
    /// Image endpoints recomputed by forward iteration, when sampled.
    pub image: Option<Interval>,
    pub onto: bool,
    pub min_deriv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IBounds {
    pub lo: u64,
    /// `None` when the branch indices are unbounded.
    pub hi: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReturnMapModel {
    pub regime: LadderKind,
    pub ladder: DomainLadder,
    #[serde(skip)]
    pub map: CentralMap,
    pub g_offset: f64,
    /// Ordered by increasing index, i.e. decreasing position.
    pub discontinuities: Vec<Discontinuity>,
    pub branches: Vec<Branch>,
    pub i_bounds: IBounds,
    /// Index of the first discontinuity not enumerated (countable regimes).
    pub truncated_at: Option<u64>,
    pub ell_cert: f64,
    pub ell_witness: f64,
    pub transition_min_deriv: f64,
    pub transition_max_deriv: f64,
    pub transition_min_witness: f64,
    /// Largest sampled branch-image endpoint error, as a fraction of `|D^+|`.
    pub max_image_error: f64,
    pub config: ReturnConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnStep {
    pub y: f64,
    pub i: u64,
    /// Position in `branches`; `None` inside the unenumerated tail.
    pub branch: Option<usize>,
}

pub fn build_return_model(map: &CentralMap, ladder: &DomainLadder) -> Result<ReturnMapModel> {
    ReturnMapModel::build(map, ladder, ReturnConfig::default())
}

impl ReturnMapModel {
    pub fn build(map: &CentralMap, ladder: &DomainLadder, config: ReturnConfig) -> Result<Self> {
        let t = ladder.t;
        let dp = ladder.d_plus;
        let (a, b) = (dp.lo, dp.hi);
        let g_a = t - ladder.d_minus_u.hi;
        let g_b = t - ladder.d_minus_u.lo;
        let finite = ladder.regime == LadderKind::TwoParam;
        let min_gap = config.resolution * dp.len();

        let mut g = a;
        let mut n = 0u64;
        while g > g_b {
            if n >= config.cap {
                return Err(ReturnMapError::IterationBudgetExceeded { cap: config.cap });
            }
            g = map.inverse(g)?;
            n += 1;
        }
        let i_lo = n;

        let mut discontinuities: Vec<Discontinuity> = Vec::new();
        let mut truncated_at = None;
        let mut i_hi = None;
        loop {
            if g <= g_a {
                i_hi = Some(n);
                break;
            }
            if !finite && discontinuities.len() >= config.max_branches {
                truncated_at = Some(n);
                break;
            }
            if g < g_b {
                let x = backward_from_u(map, t - g, ladder.k_t)?;
                let prev = discontinuities.last().map(|d| d.x).unwrap_or(b);
                let floor_gap = image_error_scale(ladder) / config.image_tolerance;
                if !finite && (prev - x < min_gap.max(floor_gap) || x - a < min_gap) {
                    truncated_at = Some(n);
                    break;
                }
                if !(x < prev) {
                    return Err(ReturnMapError::BranchResolutionFailure { index: n.saturating_sub(1), next: n, x });
                }
                discontinuities.push(Discontinuity { index: n, x, level: g });
            }
            if n >= config.cap {
                return Err(ReturnMapError::IterationBudgetExceeded { cap: config.cap });
            }
            g = map.inverse(g)?;
            n += 1;
        }

        let mut branches = Vec::with_capacity(discontinuities.len() + 1);
        let mut right = b;
        let mut idx = i_lo;
        for d in &discontinuities {
            branches.push(Branch {
                index: d.index,
                interval: Interval::new(d.x, right),
                image: None,
                onto: true,
                min_deriv: f64::NAN,
            });
            right = d.x;
            idx = d.index + 1;
        }
        if finite {
            branches.push(Branch { index: idx, interval: Interval::new(a, right), image: None, onto: true, min_deriv: f64::NAN });
        }
        if let Some(first) = branches.first_mut() {
            first.onto = first.interval.hi == b && first.index + 1 == branches_next_index(&discontinuities, first.index);
        }

        let mut model = ReturnMapModel {
            regime: ladder.regime,
            ladder: ladder.clone(),
            map: map.clone(),
            g_offset: t - 1.0,
            discontinuities,
            branches,
            i_bounds: IBounds { lo: i_lo, hi: i_hi },
            truncated_at,
            ell_cert: f64::NAN,
            ell_witness: f64::NAN,
            transition_min_deriv: f64::NAN,
            transition_max_deriv: f64::NAN,
            transition_min_witness: f64::NAN,
            max_image_error: 0.0,
            config,
        };
        model.certify_transition()?;
        model.certify_branches()?;
        model.check_onto()?;
        Ok(model)
    }

    pub fn t(&self) -> f64 {
        self.ladder.t
    }

    pub fn d_plus(&self) -> Interval {
        self.ladder.d_plus
    }

    /// Whether the plus-domain includes its left endpoint.
    fn closed_left(&self) -> bool {
        self.regime == LadderKind::TwoParam
    }

    fn in_domain(&self, x: f64) -> bool {
        let dp = self.d_plus();
        if self.closed_left() {
            dp.contains(x)
        } else {
            x > dp.lo && x <= dp.hi
        }
    }

    /// `1 − T(x)`.
    pub fn transition_u(&self, x: f64) -> Result<f64> {
        if !self.d_plus().contains(x) {
            return Err(ReturnMapError::OutOfDomain { x });
        }
        Ok(forward_u(&self.map, x, self.ladder.k_t)?)
    }

    pub fn transition(&self, x: f64) -> Result<f64> {
        Ok(1.0 - self.transition_u(x)?)
    }

    /// `T′(x)`.
    pub fn transition_deriv(&self, x: f64) -> Result<f64> {
        if !self.d_plus().contains(x) {
            return Err(ReturnMapError::OutOfDomain { x });
        }
        Ok(forward_u_log_deriv(&self.map, x, self.ladder.k_t)?.1.exp())
    }

    pub fn g_map(&self, x: f64) -> Result<f64> {
        Ok(self.t() - self.transition_u(x)?)
    }

    /// `G^{−1}(y)`.
    pub fn g_inverse(&self, y: f64) -> Result<f64> {
        Ok(backward_from_u(&self.map, self.t() - y, self.ladder.k_t)?)
    }

    /// Number of enumerated discontinuities strictly to the right of `x`, or the
    /// index of a discontinuity equal to `x`.
    fn locate(&self, x: f64) -> std::result::Result<usize, usize> {
        let ds = &self.discontinuities;
        let p = ds.partition_point(|d| d.x > x);
        if p < ds.len() && ds[p].x == x {
            Err(p)
        } else {
            Ok(p)
        }
    }

    fn branch_index_at_position(&self, p: usize) -> Option<u64> {
        if p < self.discontinuities.len() {
            Some(self.discontinuities[p].index)
        } else if self.closed_left() {
            self.branches.last().map(|b| b.index)
        } else {
            None
        }
    }

    /// `F^n(G(x))`, clamped to `D^+` to absorb forward/backward rounding.
    pub fn branch_eval(&self, n: u64, x: f64) -> Result<f64> {
        let g = self.g_map(x)?;
        let y = self.map.iterate(g, n as i64)?;
        let dp = self.d_plus();
        Ok(y.clamp(dp.lo, dp.hi))
    }

    /// Inverse of the branch with index `n`.
    pub fn branch_inverse(&self, n: u64, y: f64) -> Result<f64> {
        let g = self.map.iterate(y, -(n as i64))?;
        self.g_inverse(g)
    }

    fn tail_index(&self, x: f64) -> Result<u64> {
        let last = self.discontinuities.last().map(|d| (d.index, d.level));
        let g = self.g_map(x)?;
        let (n0, level) = match last {
            Some(v) => v,
            None => (self.i_bounds.lo, self.map.iterate(self.d_plus().lo, -(self.i_bounds.lo as i64))?),
        };
        let mut y = g;
        let mut m = 0u64;
        while y < level {
            if m >= self.config.cap {
                return Err(ReturnMapError::IterationBudgetExceeded { cap: self.config.cap });
            }
            y = self.map.eval(y)?;
            m += 1;
        }
        Ok(n0 + m)
    }

    pub fn return_step(&self, x: f64) -> Result<ReturnStep> {
        if !self.in_domain(x) {
            return Err(ReturnMapError::OutOfDomain { x });
        }
        match self.locate(x) {
            Err(p) => Err(ReturnMapError::AtDiscontinuity { index: self.discontinuities[p].index, x }),
            Ok(p) => {
                let (i, branch) = if p == 0 && self.branches.is_empty() {
                    (self.tail_index(x)?, None)
                } else if p == 0 {
                    (self.branches[0].index, Some(0))
                } else {
                    match self.branch_index_at_position(p) {
                        Some(_) if p < self.branches.len() => (self.branches[p].index, Some(p)),
                        _ => (self.tail_index(x)?, None),
                    }
                };
                Ok(ReturnStep { y: self.branch_eval(i, x)?, i, branch })
            }
        }
    }

    /// Return step that extends each branch continuously to its endpoints.
    pub fn return_step_side(&self, x: f64, side: Side) -> Result<ReturnStep> {
        match self.locate(x) {
            Err(p) => {
                let d = self.discontinuities[p];
                let dp = self.d_plus();
                Ok(match side {
                    Side::Left => ReturnStep { y: dp.lo, i: d.index, branch: Some(p) },
                    Side::Right => ReturnStep {
                        y: dp.hi,
                        i: d.index + 1,
                        branch: if p + 1 < self.branches.len() { Some(p + 1) } else { None },
                    },
                })
            }
            Ok(_) => self.return_step(x),
        }
    }

    /// The branch index `i(x)` without evaluating `R`.
    pub fn i_of_x(&self, x: f64) -> Result<u64> {
        if !self.in_domain(x) {
            return Err(ReturnMapError::OutOfDomain { x });
        }
        match self.locate(x) {
            Err(p) => Err(ReturnMapError::AtDiscontinuity { index: self.discontinuities[p].index, x }),
            Ok(p) if p < self.branches.len() => Ok(self.branches[p].index),
            Ok(_) => self.tail_index(x),
        }
    }

    /// Right-most discontinuity inside the open interval `(lo, hi)`, extending the
    /// enumeration into the tail on demand.
    pub fn discontinuity_in(&self, lo: f64, hi: f64) -> Result<Option<Discontinuity>> {
        let ds = &self.discontinuities;
        let p = ds.partition_point(|d| d.x >= hi);
        if p < ds.len() && ds[p].x > lo {
            return Ok(Some(ds[p]));
        }
        if p < ds.len() || self.truncated_at.is_none() {
            return Ok(None);
        }
        let (mut n, mut g) = match ds.last() {
            Some(d) => (d.index, d.level),
            None => return Ok(None),
        };
        let t = self.t();
        let g_lo = self.g_map(lo.max(self.d_plus().lo))?;
        for _ in 0..self.config.cap.min(100_000_000) {
            g = self.map.inverse(g)?;
            n += 1;
            if g <= g_lo {
                return Ok(None);
            }
            let x = backward_from_u(&self.map, t - g, self.ladder.k_t)?;
            if x > lo && x < hi {
                return Ok(Some(Discontinuity { index: n, x, level: g }));
            }
        }
        Err(ReturnMapError::IterationBudgetExceeded { cap: self.config.cap })
    }

    fn certify_transition(&mut self) -> Result<()> {
        let dp = self.d_plus();
        let xs: Vec<f64> = linspace(dp.lo, dp.hi, self.config.transition_grid).collect();
        let ds: Vec<f64> = xs.par_iter().map(|&x| self.transition_deriv(x)).collect::<Result<_>>()?;
        let mut mn = f64::INFINITY;
        let mut mx: f64 = 0.0;
        let mut witness = dp.lo;
        for (&x, &d) in xs.iter().zip(&ds) {
            if d < mn {
                mn = d;
                witness = x;
            }
            mx = mx.max(d);
        }
        let worst_jump = ds.windows(2).map(|w| (w[0] / w[1]).max(w[1] / w[0])).fold(1.0, f64::max);
        self.transition_min_deriv = mn / worst_jump;
        self.transition_max_deriv = mx * worst_jump;
        self.transition_min_witness = witness;
        Ok(())
    }

    /// Minimum of `(F^n)′` on each fundamental domain `[g_n, g_{n−1}]` from backward
    /// orbits of a grid in `D^+`, times the transition minimum.
    fn certify_branches(&mut self) -> Result<()> {
        if self.branches.is_empty() {
            self.ell_cert = f64::NAN;
            return Ok(());
        }
        let dp = self.d_plus();
        let grid: Vec<f64> = linspace(dp.lo, dp.hi, self.config.branch_grid).collect();
        let mut pts = grid.clone();
        let mut logd = vec![0.0f64; pts.len()];
        let first = self.branches[0].index;
        let last = self.branches.last().unwrap().index;
        let mut per_branch = vec![(f64::INFINITY, dp.lo); self.branches.len()];
        for n in 1..=last {
            for (z, l) in pts.iter_mut().zip(logd.iter_mut()) {
                *z = self.map.inverse(*z)?;
                *l += self.map.deriv(*z)?.ln();
            }
            if n >= first {
                let k = (n - first) as usize;
                let mut worst: f64 = 0.0;
                for w in logd.windows(2) {
                    worst = worst.max((w[0] - w[1]).abs());
                }
                let (j, lmin) = logd
                    .iter()
                    .cloned()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                    .unwrap();
                per_branch[k] = ((lmin - worst).exp(), pts[j]);
            }
        }
        let tmin = self.transition_min_deriv;
        let mut ell = f64::INFINITY;
        let mut wit = dp.lo;
        for (br, (fmin, z)) in self.branches.iter_mut().zip(per_branch) {
            br.min_deriv = fmin * tmin;
            if br.min_deriv < ell {
                ell = br.min_deriv;
                wit = self.ladder.d_plus.lo.max(z);
                wit = br.interval.mid().min(wit.max(br.interval.lo));
            }
        }
        self.ell_cert = ell;
        self.ell_witness = wit;
        Ok(())
    }

    fn check_onto(&mut self) -> Result<()> {
        let nb = self.branches.len();
        if nb == 0 {
            return Ok(());
        }
        let samples = self.config.onto_samples.max(2).min(nb);
        let mut picks: Vec<usize> = (0..samples).map(|k| k * (nb - 1) / (samples - 1).max(1)).collect();
        picks.dedup();
        let dp = self.d_plus();
        let images: Vec<(usize, f64, f64)> = picks
            .par_iter()
            .map(|&p| {
                let br = self.branches[p];
                let lo = self.map.iterate(self.g_map(br.interval.lo)?, br.index as i64)?;
                let hi = self.map.iterate(self.g_map(br.interval.hi)?, br.index as i64)?;
                Ok((p, lo, hi))
            })
            .collect::<Result<_>>()?;
        for (p, lo, hi) in images {
            let tol = onto_tolerance(self, self.branches[p].interval.len()) * dp.len();
            let err = (lo - dp.lo).abs().max((hi - dp.hi).abs());
            let b = &mut self.branches[p];
            b.image = Some(Interval::new(lo, hi));
            b.onto = err <= tol;
            if b.interval.lo != dp.lo && b.interval.hi != dp.hi {
                self.max_image_error = self.max_image_error.max(err / dp.len());
            }
        }
        Ok(())
    }

    pub fn branch_table_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["index", "left", "right", "image_left", "image_right", "min_deriv"]).unwrap();
        let dp = self.d_plus();
        for b in &self.branches {
            let im = b.image.unwrap_or(Interval::new(dp.lo, dp.hi));
            w.write_record([
                b.index.to_string(),
                format!("{:e}", b.interval.lo),
                format!("{:e}", b.interval.hi),
                format!("{:e}", im.lo),
                format!("{:e}", im.hi),
                format!("{:e}", b.min_deriv),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap()
    }

    /// Default expansion floor of the regime.
    pub fn default_floor(&self) -> f64 {
        match self.regime {
            LadderKind::Hyperbolic => {
                let (l, b) = (self.map.lambda(), self.map.beta());
                (1.0 - l) * l / (2.0 * (1.0 - 1.0 / b) * b)
            }
            LadderKind::SaddleNode | LadderKind::PostSaddleNode => 1.0,
            LadderKind::TwoParam => 3.0,
        }
    }
}

/// Absolute error scale of a transition evaluation on `D^+`.
fn image_error_scale(ladder: &DomainLadder) -> f64 {
    let b = ladder.d_plus.lo.abs().max(ladder.d_plus.hi.abs());
    (ladder.k_t as f64).sqrt().max(1.0) * f64::EPSILON * b
}

/// Onto tolerance for a branch of the given width, as a fraction of `|D^+|`.
pub fn onto_tolerance(model: &ReturnMapModel, width: f64) -> f64 {
    1e-9 + 4.0 * image_error_scale(&model.ladder) / width
}

fn branches_next_index(ds: &[Discontinuity], index: u64) -> u64 {
    ds.iter().find(|d| d.index > index).map(|d| d.index).unwrap_or(index + 1)
}

pub fn transition(model: &ReturnMapModel, x: f64) -> Result<f64> {
    model.transition(x)
}

pub fn g_map(model: &ReturnMapModel, x: f64) -> Result<f64> {
    model.g_map(x)
}

pub fn return_step(model: &ReturnMapModel, x: f64) -> Result<ReturnStep> {
    model.return_step(x)
}

pub fn min_expansion(model: &ReturnMapModel) -> Result<f64> {
    min_expansion_with_floor(model, model.default_floor())
}

/// The certified return derivative, or the floor violation with its witness.
pub fn min_expansion_with_floor(model: &ReturnMapModel, floor: f64) -> Result<f64> {
    let ell = model.ell_cert;
    let ok = match model.regime {
        LadderKind::TwoParam => ell >= floor,
        _ => ell > floor,
    };
    if ok {
        Ok(ell)
    } else {
        Err(ReturnMapError::ExpansionFloorViolated { value: ell, floor, witness: model.ell_witness })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub min_deriv: f64,
    pub max_deriv: f64,
    pub witness: f64,
    /// `sup T′ / inf T′` over the grid on `D^+`.
    pub distortion_ratio: f64,
    pub distortion_k: f64,
    pub within_distortion: bool,
    /// `e^{−2K}·3λ(1−t)/(t²+|s|)` (two-parameter regime only).
    pub analytic_bound: Option<f64>,
    /// `e^{−2K}·|D^−|/(t²+|s|)` with `|D^−| = 3t(1−λ)`.
    pub length_bound: Option<f64>,
    pub meets_61: Option<bool>,
}

pub fn transition_report(model: &ReturnMapModel) -> TransitionReport {
    let k = model.map.distortion_k;
    let ratio = model.transition_max_deriv / model.transition_min_deriv;
    let (analytic, length, meets) = if model.regime == LadderKind::TwoParam {
        let (t, s, l) = (model.t(), model.ladder.s, model.map.lambda());
        let e = (-2.0 * k).exp();
        let den = t * t + s.abs();
        (
            Some(e * 3.0 * l * (1.0 - t) / den),
            Some(e * 3.0 * t * (1.0 - l) / den),
            Some(model.transition_min_deriv >= 61.0),
        )
    } else {
        (None, None, None)
    };
    TransitionReport {
        min_deriv: model.transition_min_deriv,
        max_deriv: model.transition_max_deriv,
        witness: model.transition_min_witness,
        distortion_ratio: ratio,
        distortion_k: k,
        within_distortion: ratio <= k.exp() && 1.0 / ratio >= (-k).exp(),
        analytic_bound: analytic,
        length_bound: length,
        meets_61: meets,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscontinuityHit {
    pub k: u64,
    /// Point of `J` with `R^k(x) = d`.
    pub x: f64,
    pub discontinuity: Discontinuity,
}

/// Least `k` such that `R^k(J)` contains a discontinuity, with the preimage in `J`.
pub fn hit_discontinuity(model: &ReturnMapModel, j: Interval, cap: u64) -> Result<DiscontinuityHit> {
    let dp = model.d_plus();
    if !(j.lo < j.hi && j.lo >= dp.lo && j.hi <= dp.hi) {
        return Err(ReturnMapError::BadInterval { lo: j.lo, hi: j.hi });
    }
    let mut cur = j;
    let mut path: Vec<u64> = Vec::new();
    for k in 0..=cap {
        if let Some(d) = model.discontinuity_in(cur.lo, cur.hi)? {
            let mut x = d.x;
            for &n in path.iter().rev() {
                x = model.branch_inverse(n, x)?;
            }
            return Ok(DiscontinuityHit { k, x: x.clamp(j.lo, j.hi), discontinuity: d });
        }
        if k == cap {
            break;
        }
        let n = model.i_of_x(cur.mid())?;
        let lo = model.branch_eval(n, cur.lo)?;
        let hi = model.branch_eval(n, cur.hi)?;
        path.push(n);
        cur = Interval::new(lo, hi);
    }
    Err(ReturnMapError::IterationBudgetExceeded { cap })
}

/// `ceil(log(|D^+|/|J|)/log(ell)) + 1`.
pub fn hit_bound(model: &ReturnMapModel, j: Interval) -> u64 {
    ((model.d_plus().len() / j.len()).ln() / model.ell_cert.ln()).ceil().max(0.0) as u64 + 1
}

/// Image of a union of intervals under `R`, split at discontinuities and merged.
pub fn image_of_union(model: &ReturnMapModel, parts: &[Interval]) -> Result<Vec<Interval>> {
    let dp = model.d_plus();
    let mut out: Vec<Interval> = Vec::new();
    for iv in parts {
        let mut cuts = vec![iv.lo];
        for d in &model.discontinuities {
            if d.x > iv.lo && d.x < iv.hi {
                cuts.push(d.x);
            }
        }
        cuts.push(iv.hi);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in cuts.windows(2) {
            if w[1] <= w[0] {
                continue;
            }
            let mid = 0.5 * (w[0] + w[1]);
            let n = model.i_of_x(mid)?;
            let lo = if w[0] == dp.lo && !model.closed_left() {
                dp.lo
            } else {
                model.branch_eval(n, w[0])?
            };
            let hi = model.branch_eval(n, w[1])?;
            out.push(Interval::new(lo, hi));
        }
    }
    out.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
    let tol = 1e-12 * dp.len();
    let mut merged: Vec<Interval> = Vec::new();
    for iv in out {
        if let Some(last) = merged.last_mut() {
            if iv.lo <= last.hi + tol {
                last.hi = last.hi.max(iv.hi);
                continue;
            }
        }
        merged.push(iv);
    }
    Ok(merged)
}

/// Least `m` with `R^m(J) ⊇ D^+` (up to `1e−9·|D^+|` at the ends).
pub fn full_cover_time(model: &ReturnMapModel, j: Interval, cap: u64) -> Result<u64> {
    let dp = model.d_plus();
    let tol = 1e-9 * dp.len();
    let mut parts = vec![j];
    for m in 0..=cap {
        if parts.len() == 1 && parts[0].lo <= dp.lo + tol && parts[0].hi >= dp.hi - tol {
            return Ok(m);
        }
        if m == cap {
            break;
        }
        parts = image_of_union(model, &parts)?;
    }
    Err(ReturnMapError::IterationBudgetExceeded { cap })
}

/// `ceil(log(|D^+|/|J|)/log(3/2)) + 2`.
pub fn cover_bound(model: &ReturnMapModel, j: Interval) -> u64 {
    ((model.d_plus().len() / j.len()).ln() / 1.5f64.ln()).ceil().max(0.0) as u64 + 2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::central::CentralMapSpec;
    use crate::domains::build_ladder;

    fn canon_h(t: f64) -> ReturnMapModel {
        let m = CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap();
        let l = build_ladder(&m, t, 0.0).unwrap();
        build_return_model(&m, &l).unwrap()
    }

    #[test]
    fn hyperbolic_first_branch_index_positive() {
        let model = canon_h(0.01);
        assert!(model.i_bounds.lo >= 1);
        assert!(model.truncated_at.is_some());
        let dp = model.d_plus();
        assert!((model.transition(dp.lo).unwrap() - 0.99).abs() < 1e-12);
        assert!((model.transition(dp.hi).unwrap() - 0.9905).abs() < 1e-12);
        assert!(model.g_map(dp.lo).unwrap().abs() < 1e-15);
        assert!((model.g_map(dp.hi).unwrap() - 5e-4).abs() < 1e-15);
    }

    #[test]
    fn discontinuities_decrease_towards_a() {
        let model = canon_h(0.01);
        for w in model.discontinuities.windows(2) {
            assert!(w[1].x < w[0].x);
            assert_eq!(w[1].index, w[0].index + 1);
        }
        assert!(model.discontinuities.iter().all(|d| d.x > model.d_plus().lo));
    }

    #[test]
    fn one_sided_limits_at_discontinuity() {
        let model = canon_h(0.01);
        let dp = model.d_plus();
        let d = model.discontinuities[3];
        let eps = 1e-9 * dp.len();
        let right = model.return_step(d.x + eps).unwrap();
        let left = model.return_step(d.x - eps).unwrap();
        assert!(right.y - dp.lo < 1e-6 * dp.len());
        assert!(dp.hi - left.y < 1e-6 * dp.len());
        assert_eq!(left.i, right.i + 1);
        assert!(matches!(model.return_step(d.x), Err(ReturnMapError::AtDiscontinuity { .. })));
        let y = model.return_step_side(d.x, Side::Left).unwrap().y;
        assert!(model.g_map(y).unwrap().abs() <= 1e-8 * model.t());
    }

    #[test]
    fn return_step_is_minimal() {
        let model = canon_h(0.01);
        let dp = model.d_plus();
        for x in linspace(dp.lo, dp.hi, 37).skip(1) {
            let st = model.return_step(x).unwrap();
            assert!(dp.contains(st.y));
            let g = model.g_map(x).unwrap();
            let before = model.map.iterate(g, st.i as i64 - 1).unwrap();
            assert!(before < dp.lo);
        }
    }

    #[test]
    fn hyperbolic_expansion_meets_floor() {
        let model = canon_h(0.01);
        assert!((model.default_floor() - 2.375).abs() < 1e-9);
        let ell = min_expansion(&model).unwrap();
        assert!(ell > 2.375);
        assert!(model.transition_min_deriv > 2.375);
    }

    #[test]
    fn interior_branches_are_onto() {
        let model = canon_h(0.01);
        for b in model.branches.iter().skip(1) {
            assert!(b.onto, "{b:?}");
        }
    }

    #[test]
    fn hit_from_containing_interval_is_immediate() {
        let model = canon_h(0.01);
        let d = model.discontinuities[2].x;
        let j = Interval::new(d - 1e-9, d + 1e-9);
        let h = hit_discontinuity(&model, j, 10).unwrap();
        assert_eq!(h.k, 0);
        assert_eq!(h.x, d);
    }

    #[test]
    fn hit_from_middle_third_of_a_branch() {
        let model = canon_h(0.01);
        let b = model.branches[5].interval;
        let j = Interval::new(b.at(1.0 / 3.0), b.at(2.0 / 3.0));
        let h = hit_discontinuity(&model, j, 100).unwrap();
        assert!(h.k >= 1 && h.k <= hit_bound(&model, j));
        assert!(j.contains(h.x));
    }

    #[test]
    fn branch_table_has_header() {
        let model = canon_h(0.01);
        let csv = model.branch_table_csv();
        assert!(csv.starts_with("index,left,right,image_left,image_right,min_deriv\n"));
        assert_eq!(csv.lines().count(), model.branches.len() + 1);
    }
}
