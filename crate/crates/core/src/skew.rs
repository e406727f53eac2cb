//! The three-dimensional model `f_{t,s}(x, y, z) = (λ_s x, F(y), λ_u z)` on the
//! cube, glued by the translation `(x − 1/2, y − 1 + t, z + 1/2)` on a ball
//! around `(0, 1, −1/2)`; strip successors, transverse-intersection witnesses
//! and box coverings of the maximal invariant set.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapError, Regime};
use crate::domains::{lambda_pow, LadderKind};
use crate::numeric::Interval;
use crate::return_map::{full_cover_time, hit_bound, hit_discontinuity, ReturnMapError, ReturnMapModel, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkewError {
    #[error(transparent)]
    Map(#[from] CentralMapError),
    #[error(transparent)]
    Return(#[from] ReturnMapError),
    #[error("point {0:?} outside the cube")]
    OutOfCube([f64; 3]),
    #[error("point {0:?} outside the glue window")]
    OutsideGlueWindow([f64; 3]),
    #[error("strip crosses the discontinuity d_{index} at {x}")]
    CrossesDiscontinuity { index: u64, x: f64 },
    #[error("strip is not perfect: {0}")]
    NotPerfect(String),
    #[error("segment lands on the endpoint {y} of D+; accumulation is needed")]
    AccumulationNeeded { x: f64, y: f64 },
    #[error("iteration budget {cap} exceeded")]
    IterationBudgetExceeded { cap: u64 },
    #[error("resource budget exceeded: {0}")]
    ResourceBudgetExceeded(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
}

type Result<T> = std::result::Result<T, SkewError>;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cube {
    pub x: Interval,
    pub y: Interval,
    pub z: Interval,
}

impl Cube {
    pub fn contains(&self, p: Point) -> bool {
        self.x.contains(p[0]) && self.y.contains(p[1]) && self.z.contains(p[2])
    }

    /// Name of the first face crossed by `p`, if any.
    pub fn exit_face(&self, p: Point) -> Option<&'static str> {
        let axes = [(self.x, "x"), (self.y, "y"), (self.z, "z")];
        for (i, (iv, name)) in axes.iter().enumerate() {
            if p[i] < iv.lo {
                return Some(match *name { "x" => "x-", "y" => "y-", _ => "z-" });
            }
            if p[i] > iv.hi {
                return Some(match *name { "x" => "x+", "y" => "y+", _ => "z+" });
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewConfig {
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub k0: u32,
    pub glue_radius: f64,
    pub tube_width: f64,
}

impl Default for SkewConfig {
    fn default() -> Self {
        SkewConfig { lambda_s: 0.5, lambda_u: 2.0, k0: 4, glue_radius: 0.05, tube_width: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct SkewFamily {
    pub central: CentralMap,
    pub lambda_s: f64,
    pub lambda_u: f64,
    pub t: f64,
    pub s: f64,
    pub k0: u32,
    pub glue_center: Point,
    pub glue_radius: f64,
    pub tube_width: f64,
    pub cube: Cube,
    pub saddles: BTreeMap<String, Point>,
}

impl SkewFamily {
    pub fn new(central: &CentralMap, t: f64, config: SkewConfig) -> Result<Self> {
        let (dm, d_max) = central.certified_deriv_bounds;
        let (ls, lu) = (config.lambda_s, config.lambda_u);
        if !(ls > 0.0 && ls < dm && d_max < lu) {
            return Err(SkewError::InvalidFamily(format!(
                "need 0 < lambda_s < {dm} and lambda_u > {d_max}, got {ls}, {lu}"
            )));
        }
        if !(t >= 0.0 && t < central.delta()) {
            return Err(SkewError::InvalidFamily(format!("t = {t} outside [0, delta)")));
        }
        let s = central.s();
        let mut saddles = BTreeMap::new();
        saddles.insert("P".to_string(), [0.0, 1.0, 0.0]);
        match central.regime() {
            Regime::Hyperbolic => {
                saddles.insert("Q".to_string(), [0.0, 0.0, 0.0]);
            }
            Regime::SaddleNode | Regime::TwoParam => {
                if central.regime() == Regime::TwoParam {
                    saddles.insert("Q".to_string(), [0.0, -1.0, 0.0]);
                }
                if s == 0.0 {
                    saddles.insert("S".to_string(), [0.0, 0.0, 0.0]);
                } else if s > 0.0 {
                    saddles.insert("S+".to_string(), [0.0, s.sqrt(), 0.0]);
                    saddles.insert("S-".to_string(), [0.0, -s.sqrt(), 0.0]);
                }
            }
        }
        Ok(SkewFamily {
            central: central.clone(),
            lambda_s: ls,
            lambda_u: lu,
            t,
            s,
            k0: config.k0,
            glue_center: [0.0, 1.0, -0.5],
            glue_radius: config.glue_radius,
            tube_width: config.tube_width,
            cube: Cube { x: Interval::new(-1.0, 1.0), y: central.domain(), z: Interval::new(-1.0, 1.0) },
            saddles,
        })
    }

    /// Separatrix of the central coordinate: `√s` for `s > 0`, else 0.
    pub fn separatrix(&self) -> f64 {
        if self.s > 0.0 {
            self.s.sqrt()
        } else {
            0.0
        }
    }

    pub fn in_glue_window(&self, p: Point) -> bool {
        dist(p, self.glue_center) <= self.glue_radius
    }

    fn in_glue_image(&self, p: Point) -> bool {
        dist(p, [-0.5, self.t, 0.0]) <= self.glue_radius
    }

    pub fn step(&self, p: Point) -> Result<Point> {
        if !self.cube.contains(p) {
            return Err(SkewError::OutOfCube(p));
        }
        Ok([self.lambda_s * p[0], self.central.eval(p[1])?, self.lambda_u * p[2]])
    }

    pub fn step_inv(&self, p: Point) -> Result<Point> {
        let y = self.central.inverse(p[1]).map_err(|_| SkewError::OutOfCube(p))?;
        let q = [p[0] / self.lambda_s, y, p[2] / self.lambda_u];
        if !self.cube.contains(q) {
            return Err(SkewError::OutOfCube(p));
        }
        Ok(q)
    }

    /// `f^{k0}` on the glue window.
    pub fn glue(&self, p: Point) -> Result<Point> {
        if !self.in_glue_window(p) {
            return Err(SkewError::OutsideGlueWindow(p));
        }
        Ok([p[0] - 0.5, (p[1] - 1.0) + self.t, p[2] + 0.5])
    }

    pub fn unglue(&self, p: Point) -> Result<Point> {
        if !self.in_glue_image(p) {
            return Err(SkewError::OutsideGlueWindow(p));
        }
        Ok([p[0] + 0.5, (p[1] - self.t) + 1.0, p[2] - 0.5])
    }

    /// One step of the dynamics in `W`: glue inside the window, product map in
    /// the cube, `None` once the orbit has left.
    fn advance(&self, p: Point) -> Option<(Point, Event)> {
        if self.in_glue_window(p) {
            return self.glue(p).ok().map(|q| (q, Event::Glue));
        }
        if !self.cube.contains(p) {
            return None;
        }
        let q = self.step(p).ok()?;
        if self.cube.contains(q) || self.in_glue_window(q) {
            Some((q, Event::Step))
        } else {
            Some((q, Event::Exit))
        }
    }

    fn retreat(&self, p: Point) -> Option<(Point, Event)> {
        if self.in_glue_image(p) {
            return self.unglue(p).ok().map(|q| (q, Event::Glue));
        }
        match self.central.inverse(p[1]) {
            Ok(y) => {
                let q = [p[0] / self.lambda_s, y, p[2] / self.lambda_u];
                Some((q, if self.cube.contains(q) { Event::Step } else { Event::Exit }))
            }
            Err(_) => {
                let y = if p[1] > self.cube.y.mid() { f64::INFINITY } else { f64::NEG_INFINITY };
                Some(([p[0] / self.lambda_s, y, p[2] / self.lambda_u], Event::Exit))
            }
        }
    }
}

fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    Start,
    Step,
    Glue,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub n: i64,
    pub p: Point,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitExit {
    pub step: i64,
    pub face: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitRecord {
    pub points: Vec<OrbitPoint>,
    pub last: OrbitPoint,
    pub exit: Option<OrbitExit>,
}

impl OrbitRecord {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["n", "x", "y", "z", "event"]).unwrap();
        for op in &self.points {
            let ev = match op.event {
                Event::Start => "start",
                Event::Step => "step",
                Event::Glue => "glue",
                Event::Exit => "exit",
            };
            w.write_record([
                op.n.to_string(),
                format!("{:.17e}", op.p[0]),
                format!("{:.17e}", op.p[1]),
                format!("{:.17e}", op.p[2]),
                ev.to_string(),
            ])
            .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn run_orbit(fam: &SkewFamily, p: Point, n_max: u64, record: bool, forward: bool) -> OrbitRecord {
    let start = OrbitPoint { n: 0, p, event: Event::Start };
    let mut points = if record { vec![start] } else { vec![] };
    let mut last = start;
    let sign = if forward { 1 } else { -1 };
    let mut exit = None;
    if !fam.cube.contains(p) && !fam.in_glue_window(p) {
        exit = Some(OrbitExit { step: 0, face: fam.cube.exit_face(p).unwrap_or("tube").to_string() });
        return OrbitRecord { points, last, exit };
    }
    let mut n: i64 = 0;
    let mut cur = p;
    for _ in 0..n_max {
        let next = if forward { fam.advance(cur) } else { fam.retreat(cur) };
        let Some((q, ev)) = next else { break };
        n += sign * if ev == Event::Glue { fam.k0 as i64 } else { 1 };
        let op = OrbitPoint { n, p: q, event: ev };
        if record {
            points.push(op);
        }
        last = op;
        if ev == Event::Exit {
            let face = fam.cube.exit_face(q).unwrap_or("y").to_string();
            exit = Some(OrbitExit { step: n, face });
            break;
        }
        cur = q;
    }
    OrbitRecord { points, last, exit }
}

/// Forward orbit in `W`; the exit step and face are data.
pub fn orbit(fam: &SkewFamily, p: Point, n_max: u64, record_region: bool) -> OrbitRecord {
    run_orbit(fam, p, n_max, record_region, true)
}

/// Backward orbit in `W` (step indices are negative).
pub fn orbit_backward(fam: &SkewFamily, p: Point, n_max: u64, record_region: bool) -> OrbitRecord {
    run_orbit(fam, p, n_max, record_region, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StripKind {
    GKind,
    RKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSpec {
    pub x1: f64,
    pub y_interval: Interval,
    pub z_interval: Interval,
    pub complete: bool,
    pub well_located: bool,
    pub perfect: bool,
}

impl StripSpec {
    /// Complete strip over `α`; flags computed against `D^+`.
    pub fn complete(x1: f64, alpha: Interval, d_plus: Interval) -> Self {
        let well = alpha.lo > d_plus.lo && alpha.hi < d_plus.hi;
        StripSpec {
            x1,
            y_interval: alpha,
            z_interval: Interval::new(-1.0, 1.0),
            complete: true,
            well_located: well,
            perfect: well,
        }
    }
}

/// Successor of a perfect strip under the transition (`G_KIND`) or the full
/// return (`R_KIND`).
pub fn strip_successor(fam: &SkewFamily, model: &ReturnMapModel, strip: &StripSpec, kind: StripKind) -> Result<StripSpec> {
    let dp = model.d_plus();
    if !strip.perfect {
        return Err(SkewError::NotPerfect(format!("{:?}", strip.y_interval)));
    }
    let alpha = strip.y_interval;
    let kt = model.ladder.k_t;
    let xg = lambda_pow(fam.lambda_s, kt) * strip.x1 - 0.5;
    match kind {
        StripKind::GKind => {
            let g = Interval::new(model.g_map(alpha.lo)?, model.g_map(alpha.hi)?);
            Ok(StripSpec::complete(xg, g, dp))
        }
        StripKind::RKind => {
            if let Some(d) = model.discontinuity_in(alpha.lo, alpha.hi)? {
                return Err(SkewError::CrossesDiscontinuity { index: d.index, x: d.x });
            }
            let i = model.i_of_x(alpha.mid())?;
            let y = Interval::new(model.branch_eval(i, alpha.lo)?, model.branch_eval(i, alpha.hi)?);
            Ok(StripSpec::complete(lambda_pow(fam.lambda_s, i) * xg, y, dp))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableWitness {
    /// Point of the basis whose orbit meets the stable set of `Q`.
    pub x: f64,
    pub k: u64,
    /// `(x, y, z)` on the stable set reached after `k` returns.
    pub point: Point,
    /// `G_t` evaluated at the landing point (0 for an exact hit).
    pub g_value: f64,
    /// Two-parameter regime: `j` with `Ψ_s^{−j}(0) ∈ D^+`.
    pub j: Option<u64>,
    pub bound: u64,
}

/// Finite witness that the forward orbit of a strip meets `W^s(Q)`.
pub fn stable_q_witness(fam: &SkewFamily, model: &ReturnMapModel, strip: &StripSpec, cap: u64) -> Result<StableWitness> {
    let dp = model.d_plus();
    let alpha = strip.y_interval;
    if !strip.complete || !(alpha.lo >= dp.lo && alpha.hi <= dp.hi && alpha.lo < alpha.hi) {
        return Err(SkewError::NotPerfect(format!("{:?} is not a complete strip over D+", alpha)));
    }
    let kt = model.ladder.k_t;
    if model.regime == LadderKind::TwoParam {
        let m = full_cover_time(model, alpha, cap)?;
        let mut y = 0.0;
        let mut j = 0u64;
        while !dp.contains(y) {
            if j >= cap.max(10_000_000) {
                return Err(SkewError::IterationBudgetExceeded { cap: j });
            }
            y = model.map.inverse(y)?;
            j += 1;
        }
        let x = preimage_in(model, alpha, m, y)?.ok_or_else(|| {
            SkewError::PreconditionFailed(format!("no preimage of {y} after {m} returns"))
        })?;
        let z = -0.5 * lambda_pow(1.0 / fam.lambda_u, j);
        return Ok(StableWitness {
            x,
            k: m,
            point: [strip.x1, y, z],
            g_value: 0.0,
            j: Some(j),
            bound: crate::return_map::cover_bound(model, alpha),
        });
    }
    let hit = hit_discontinuity(model, alpha, cap)?;
    let landing = model.return_step_side(hit.discontinuity.x, Side::Left)?;
    let g = model.g_map(landing.y)?;
    let mut x1 = strip.x1;
    let mut y = hit.x;
    for _ in 0..hit.k {
        let step = model.return_step(y)?;
        x1 = lambda_pow(fam.lambda_s, step.i) * (lambda_pow(fam.lambda_s, kt) * x1 - 0.5);
        y = step.y;
    }
    let x_end = lambda_pow(fam.lambda_s, landing.i) * (lambda_pow(fam.lambda_s, kt) * x1 - 0.5);
    let xg = lambda_pow(fam.lambda_s, kt) * x_end - 0.5;
    Ok(StableWitness { x: hit.x, k: hit.k, point: [xg, g, 0.0], g_value: g, j: None, bound: hit_bound(model, alpha) })
}

/// A point of `J` whose `m`-th return equals `y`, found by splitting at discontinuities.
fn preimage_in(model: &ReturnMapModel, j: Interval, m: u64, y: f64) -> Result<Option<f64>> {
    if m == 0 {
        return Ok(if j.contains(y) { Some(y) } else { None });
    }
    let mut cuts = vec![j.lo];
    cuts.extend(model.discontinuities.iter().map(|d| d.x).filter(|&x| x > j.lo && x < j.hi));
    cuts.push(j.hi);
    cuts.sort_by(f64::total_cmp);
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let n = model.i_of_x(0.5 * (w[0] + w[1]))?;
        let lo = model.branch_eval(n, w[0])?;
        let hi = model.branch_eval(n, w[1])?;
        if let Some(z) = preimage_in(model, Interval::new(lo, hi), m - 1, y)? {
            let x = model.branch_inverse(n, z)?;
            return Ok(Some(x.clamp(w[0], w[1])));
        }
    }
    Ok(None)
}

/// Chases the homoclinic point `(−1/2, t, 0)` to a vertical segment of `W^u(P)`
/// over the interior of `D^+`.
pub fn perfect_segment_witness(fam: &SkewFamily, model: &ReturnMapModel) -> Result<StripSpec> {
    let dp = model.d_plus();
    let tol = 1e-9 * dp.len();
    let t = model.t();
    let (x, y) = match model.regime {
        LadderKind::Hyperbolic => {
            let y0 = t / model.map.beta();
            let x0 = -0.5 / fam.lambda_s;
            let step = match model.return_step(y0) {
                Ok(s) => s,
                Err(ReturnMapError::AtDiscontinuity { .. }) => {
                    return Err(SkewError::AccumulationNeeded { x: x0, y: dp.hi })
                }
                Err(e) => return Err(e.into()),
            };
            let kt = model.ladder.k_t;
            (lambda_pow(fam.lambda_s, step.i) * (lambda_pow(fam.lambda_s, kt) * x0 - 0.5), step.y)
        }
        LadderKind::TwoParam => {
            let dm = model.ladder.d_minus;
            let mut y = t;
            let mut r = 0u64;
            while !dm.contains(y) {
                if r >= model.config.cap {
                    return Err(SkewError::IterationBudgetExceeded { cap: r });
                }
                y = model.map.eval(y)?;
                r += 1;
            }
            let x1 = -0.5 + lambda_pow(fam.lambda_s, r) * -0.5;
            let mut g = y + t - 1.0;
            let mut i = 0u64;
            while g < dp.lo {
                if i >= model.config.cap {
                    return Err(SkewError::IterationBudgetExceeded { cap: i });
                }
                g = model.map.eval(g)?;
                i += 1;
            }
            (lambda_pow(fam.lambda_s, i) * x1, g)
        }
        _ => {
            return Err(SkewError::PreconditionFailed("perfect segments are chased in the hyperbolic and two-parameter regimes".into()))
        }
    };
    if (y - dp.hi).abs() <= tol || (y - dp.lo).abs() <= tol || !dp.contains(y) {
        return Err(SkewError::AccumulationNeeded { x, y });
    }
    Ok(StripSpec {
        x1: x,
        y_interval: Interval::new(y, y),
        z_interval: Interval::new(-1.0, 1.0),
        complete: true,
        well_located: true,
        perfect: true,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleCheck {
    pub j: u64,
    /// First coordinate `λ_s^{N+j} x − 1/2` of the glued rectangle.
    pub a: f64,
    /// Upper end of the glued central interval `[0, F^{N+j}(1/n) − 1 + t]`.
    pub y_top: f64,
    pub contains: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectangleReturn {
    pub i: u64,
    pub checks: Vec<RectangleCheck>,
}

/// `N_t` for `R_n(x) = {x}×[0,1/n]×[−1/n,1/n]` and the rectangle containment
/// for `j ∈ {0, 1, 2}`.
pub fn rectangle_return(fam: &SkewFamily, x: f64, n: u64, cap: u64) -> Result<RectangleReturn> {
    let h = 1.0 / n as f64;
    let t = fam.t;
    if !(h < t) {
        return Err(SkewError::PreconditionFailed(format!("1/n = {h} must be below t = {t}")));
    }
    let target = Interval::new(1.0 - t + h, 1.0);
    let mut y = h;
    let mut i = 0u64;
    while !(y > target.lo && y < target.hi) {
        if i >= cap {
            return Err(SkewError::IterationBudgetExceeded { cap });
        }
        y = fam.central.eval(y)?;
        i += 1;
    }
    let mut checks = vec![];
    for j in 0..3u64 {
        let top = fam.central.iterate(h, (i + j) as i64)?;
        let xs = lambda_pow(fam.lambda_s, i + j) * x;
        let zs = lambda_pow(fam.lambda_u, i + j) * h;
        let corners = [
            [xs, 1.0 - t, -0.5 - h],
            [xs, 1.0 - t, -0.5 + h],
            [xs, 1.0 - t + h, -0.5 - h],
            [xs, 1.0 - t + h, -0.5 + h],
        ];
        let in_window = corners.iter().all(|&c| fam.in_glue_window(c));
        let y_top = (top - 1.0) + t;
        let contains = in_window && y_top >= h && top <= 1.0 && zs >= 0.5 + h;
        checks.push(RectangleCheck { j, a: xs - 0.5, y_top, contains });
    }
    Ok(RectangleReturn { i, checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiltrationReport {
    pub samples: usize,
    pub forward_exits: usize,
    pub backward_exits: usize,
    /// Exited orbits that came back to `W` when continued by the product formula.
    pub reentries: usize,
    pub holds: bool,
}

/// Numerical filtration check: an orbit that leaves `W` through a face never
/// comes back under further iteration (forward through the unstable faces,
/// backward through the stable ones).
pub fn filtration_check(fam: &SkewFamily, per_axis: usize, horizon: u64) -> FiltrationReport {
    let c = fam.cube;
    let pts: Vec<Point> = grid(c, per_axis).collect();
    let res: Vec<(bool, bool, bool)> = pts
        .par_iter()
        .map(|&p| {
            let f = orbit(fam, p, horizon, false);
            let b = orbit_backward(fam, p, horizon, false);
            let mut back = false;
            if let Some(_) = f.exit {
                let mut q = f.last.p;
                for _ in 0..horizon.min(64) {
                    q = [fam.lambda_s * q[0], q[1], fam.lambda_u * q[2]];
                    if fam.cube.contains(q) {
                        back = true;
                    }
                }
            }
            if let Some(_) = b.exit {
                let mut q = b.last.p;
                for _ in 0..horizon.min(64) {
                    let y = if q[1].is_finite() { fam.central.inverse(q[1]).unwrap_or(f64::NAN) } else { q[1] };
                    q = [q[0] / fam.lambda_s, y, q[2] / fam.lambda_u];
                    if fam.cube.contains(q) {
                        back = true;
                    }
                }
            }
            (f.exit.is_some(), b.exit.is_some(), back)
        })
        .collect();
    let reentries = res.iter().filter(|r| r.2).count();
    FiltrationReport {
        samples: pts.len(),
        forward_exits: res.iter().filter(|r| r.0).count(),
        backward_exits: res.iter().filter(|r| r.1).count(),
        reentries,
        holds: reentries == 0,
    }
}

fn grid(c: Cube, n: usize) -> impl Iterator<Item = Point> {
    let ax = |iv: Interval| -> Vec<f64> { (0..n).map(move |i| iv.lo + (i as f64 + 0.5) * iv.len() / n as f64).collect() };
    let (xs, ys, zs) = (ax(c.x), ax(c.y), ax(c.z));
    xs.into_iter().flat_map(move |x| {
        let zs = zs.clone();
        ys.clone().into_iter().flat_map(move |y| zs.clone().into_iter().map(move |z| [x, y, z]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoxLabel {
    LambdaPlus,
    LambdaMinus,
    Wandering,
    Unresolved,
}

impl BoxLabel {
    pub fn name(self) -> &'static str {
        match self {
            BoxLabel::LambdaPlus => "LAMBDA_PLUS",
            BoxLabel::LambdaMinus => "LAMBDA_MINUS",
            BoxLabel::Wandering => "WANDERING",
            BoxLabel::Unresolved => "UNRESOLVED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Disjoint,
    TouchAtS,
    Merged,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Disjoint => "DISJOINT",
            Verdict::TouchAtS => "TOUCH_AT_S",
            Verdict::Merged => "MERGED",
        }
    }

    pub fn code(self) -> i32 {
        match self {
            Verdict::Disjoint => -1,
            Verdict::TouchAtS => 0,
            Verdict::Merged => 1,
        }
    }
}

pub type BoxIndex = (u32, u32, u32);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    pub resolution: [u32; 3],
    pub cube: Cube,
    pub boxes: BTreeSet<BoxIndex>,
    pub labels: BTreeMap<BoxIndex, BoxLabel>,
    /// Boxes holding a sample that crosses the separatrix upwards; they belong
    /// to both classes.
    pub shared: BTreeSet<BoxIndex>,
    pub horizon: u64,
}

/// Behavior of one sample orbit over `|n| ≤ horizon`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SampleClass {
    Exits,
    Plus,
    Minus,
    /// Constant on the separatrix (the saddle-node itself).
    Fixed,
    /// Passes from below the separatrix to above it.
    UpCross,
    Wandering,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SampleInfo {
    class: SampleClass,
    visits_q_p_q: bool,
}

impl BoxSet {
    fn widths(&self) -> [f64; 3] {
        [
            self.cube.x.len() / self.resolution[0] as f64,
            self.cube.y.len() / self.resolution[1] as f64,
            self.cube.z.len() / self.resolution[2] as f64,
        ]
    }

    pub fn bounds(&self, b: BoxIndex) -> [Interval; 3] {
        let w = self.widths();
        let lo = [
            self.cube.x.lo + b.0 as f64 * w[0],
            self.cube.y.lo + b.1 as f64 * w[1],
            self.cube.z.lo + b.2 as f64 * w[2],
        ];
        [
            Interval::new(lo[0], lo[0] + w[0]),
            Interval::new(lo[1], lo[1] + w[1]),
            Interval::new(lo[2], lo[2] + w[2]),
        ]
    }

    pub fn contains_point(&self, b: BoxIndex, p: Point) -> bool {
        let iv = self.bounds(b);
        (0..3).all(|i| iv[i].contains(p[i]))
    }

    pub fn counts(&self) -> BTreeMap<&'static str, usize> {
        let mut m = BTreeMap::new();
        for l in [BoxLabel::LambdaPlus, BoxLabel::LambdaMinus, BoxLabel::Wandering, BoxLabel::Unresolved] {
            m.insert(l.name(), 0);
        }
        for l in self.labels.values() {
            *m.get_mut(l.name()).unwrap() += 1;
        }
        m
    }

    /// Pairs of vertex-adjacent boxes labeled `LAMBDA_PLUS` and `LAMBDA_MINUS`.
    pub fn plus_minus_adjacency(&self) -> Vec<(BoxIndex, BoxIndex)> {
        let mut out = vec![];
        for (&b, &l) in &self.labels {
            if l != BoxLabel::LambdaPlus {
                continue;
            }
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dz in -1i64..=1 {
                        let n = (b.0 as i64 + dx, b.1 as i64 + dy, b.2 as i64 + dz);
                        if n.0 < 0 || n.1 < 0 || n.2 < 0 {
                            continue;
                        }
                        let n = (n.0 as u32, n.1 as u32, n.2 as u32);
                        if self.labels.get(&n) == Some(&BoxLabel::LambdaMinus) {
                            out.push((b, n));
                        }
                    }
                }
            }
        }
        out
    }

    /// `TOUCH_AT_S` when every `LAMBDA_PLUS`/`LAMBDA_MINUS` contact happens in the
    /// one-ring of boxes around `s_point`.
    pub fn verdict(&self, s_point: Point) -> Verdict {
        let adj = self.plus_minus_adjacency();
        if !self.shared.is_empty() {
            return Verdict::Merged;
        }
        if adj.is_empty() {
            return Verdict::Disjoint;
        }
        let near_s = |b: BoxIndex| {
            let iv = self.bounds(b);
            let w = self.widths();
            (0..3).all(|i| s_point[i] >= iv[i].lo - w[i] && s_point[i] <= iv[i].hi + w[i])
        };
        if adj.iter().all(|&(a, b)| near_s(a) && near_s(b)) {
            Verdict::TouchAtS
        } else {
            Verdict::Merged
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["ix", "iy", "iz", "label"]).unwrap();
        for b in &self.boxes {
            let l = self.labels.get(b).map(|l| l.name()).unwrap_or("UNLABELED");
            w.write_record([b.0.to_string(), b.1.to_string(), b.2.to_string(), l.to_string()]).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn summary_json(&self, s_point: Point) -> Value {
        let adj = self.plus_minus_adjacency();
        json!({
            "resolution": self.resolution,
            "retained": self.boxes.len(),
            "counts": self.counts(),
            "shared": self.shared.len(),
            "plus_minus_adjacent_pairs": adj.len(),
            "verdict": self.verdict(s_point).name(),
        })
    }
}

/// Classifies a sample point by its central itinerary over `|n| ≤ horizon`.
fn classify_sample(fam: &SkewFamily, p: Point, horizon: u64) -> SampleInfo {
    let f = orbit(fam, p, horizon, true);
    let b = orbit_backward(fam, p, horizon, true);
    if f.exit.is_some() || b.exit.is_some() {
        return SampleInfo { class: SampleClass::Exits, visits_q_p_q: false };
    }
    let mut ys: Vec<f64> = b.points.iter().rev().filter(|o| fam.cube.contains(o.p)).map(|o| o.p[1]).collect();
    ys.extend(f.points.iter().skip(1).filter(|o| fam.cube.contains(o.p)).map(|o| o.p[1]));
    let sep = fam.separatrix();
    let qpq = visits_q_p_q(&ys);
    let info = |class| SampleInfo { class, visits_q_p_q: qpq };
    if fam.s > 0.0 && ys.iter().any(|&y| y > -sep && y < sep) {
        return info(SampleClass::Wandering);
    }
    let above = ys.iter().all(|&y| y >= sep);
    let below = ys.iter().all(|&y| y <= sep);
    match (above, below) {
        (true, true) => info(SampleClass::Fixed),
        (true, false) => info(SampleClass::Plus),
        (false, true) => info(SampleClass::Minus),
        (false, false) => {
            let first_below = ys.iter().position(|&y| y < sep).unwrap();
            let first_above = ys.iter().position(|&y| y > sep).unwrap();
            if first_below < first_above && ys[first_above..].iter().all(|&y| y >= sep) && fam.s < 0.0 {
                info(SampleClass::UpCross)
            } else {
                info(SampleClass::Wandering)
            }
        }
    }
}

/// Whether the itinerary visits a neighborhood of `Q`, then of `P`, then of `Q`.
fn visits_q_p_q(ys: &[f64]) -> bool {
    let near_q = |y: f64| (y + 1.0).abs() < 0.1;
    let near_p = |y: f64| (y - 1.0).abs() < 0.1;
    let mut stage = 0;
    for &y in ys {
        stage = match stage {
            0 if near_q(y) => 1,
            1 if near_p(y) => 2,
            2 if near_q(y) => return true,
            s => s,
        };
    }
    false
}

struct Sampler<'a> {
    fam: &'a SkewFamily,
    cube: Cube,
    finest: [u32; 3],
    horizon: u64,
    cache: HashMap<(u64, u64, u64), SampleInfo>,
}

impl<'a> Sampler<'a> {
    /// Keys are coordinates in half-cells of the finest grid.
    fn point(&self, key: (u64, u64, u64)) -> Point {
        let k = [key.0, key.1, key.2];
        let iv = [self.cube.x, self.cube.y, self.cube.z];
        let mut p = [0.0; 3];
        for i in 0..3 {
            p[i] = iv[i].lo + k[i] as f64 * iv[i].len() / (2 * self.finest[i]) as f64;
        }
        p
    }

    fn sample_keys(&self, res: u32, b: BoxIndex) -> Vec<(u64, u64, u64)> {
        let scale = [(2 * self.finest[0] / res) as u64, (2 * self.finest[1] / res) as u64, (2 * self.finest[2] / res) as u64];
        let base = (b.0 as u64 * scale[0], b.1 as u64 * scale[1], b.2 as u64 * scale[2]);
        let mut keys = Vec::with_capacity(9);
        for c in 0..8u64 {
            keys.push((base.0 + (c & 1) * scale[0], base.1 + ((c >> 1) & 1) * scale[1], base.2 + ((c >> 2) & 1) * scale[2]));
        }
        keys.push((base.0 + scale[0] / 2, base.1 + scale[1] / 2, base.2 + scale[2] / 2));
        keys
    }

    fn fill(&mut self, keys: &[(u64, u64, u64)]) {
        let missing: Vec<(u64, u64, u64)> = {
            let mut v: Vec<_> = keys.iter().copied().filter(|k| !self.cache.contains_key(k)).collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        let fam = self.fam;
        let horizon = self.horizon;
        let pts: Vec<Point> = missing.iter().map(|&k| self.point(k)).collect();
        let infos: Vec<SampleInfo> = pts.par_iter().map(|&p| classify_sample(fam, p, horizon)).collect();
        for (k, info) in missing.into_iter().zip(infos) {
            self.cache.insert(k, info);
        }
    }
}

const BOX_BUDGET: usize = 4_000_000;

fn sampler<'a>(fam: &'a SkewFamily, resolution: u32, horizon: u64) -> Sampler<'a> {
    Sampler { fam, cube: fam.cube, finest: [resolution; 3], horizon, cache: HashMap::new() }
}

/// Subdivision from 8 boxes per axis up to `resolution`: a box is retained when
/// one of its nine samples (corners and center) stays in `W` for `|n| ≤ horizon`.
pub fn max_invariant_boxes(fam: &SkewFamily, resolution: u32, horizon: u64) -> Result<BoxSet> {
    if resolution < 8 || horizon < 1 || !(resolution / 8).is_power_of_two() || resolution % 8 != 0 {
        return Err(SkewError::PreconditionFailed(format!(
            "resolution {resolution} must be 8·2^k and horizon {horizon} at least 1"
        )));
    }
    let mut smp = sampler(fam, resolution, horizon);
    let mut res = 8u32;
    let mut candidates: Vec<BoxIndex> = (0..8).flat_map(|i| (0..8).flat_map(move |j| (0..8).map(move |k| (i, j, k)))).collect();
    loop {
        let keys: Vec<_> = candidates.iter().flat_map(|&b| smp.sample_keys(res, b)).collect();
        smp.fill(&keys);
        let kept: Vec<BoxIndex> = candidates
            .iter()
            .copied()
            .filter(|&b| smp.sample_keys(res, b).iter().any(|k| smp.cache[k].class != SampleClass::Exits))
            .collect();
        if res == resolution {
            return Ok(BoxSet {
                resolution: [res; 3],
                cube: fam.cube,
                boxes: kept.into_iter().collect(),
                labels: BTreeMap::new(),
                shared: BTreeSet::new(),
                horizon,
            });
        }
        res *= 2;
        if kept.len() * 8 > BOX_BUDGET {
            return Err(SkewError::ResourceBudgetExceeded(format!("{} boxes at resolution {res}", kept.len() * 8)));
        }
        candidates = kept
            .iter()
            .flat_map(|&(i, j, k)| (0..8u32).map(move |c| (2 * i + (c & 1), 2 * j + ((c >> 1) & 1), 2 * k + ((c >> 2) & 1))))
            .collect();
    }
}

/// Labels each retained box by the itinerary rule of its surviving samples.
pub fn classify_boxes(fam: &SkewFamily, boxset: &BoxSet, horizon: u64) -> BoxSet {
    let res = boxset.resolution[0];
    let mut smp = sampler(fam, res, horizon);
    let keys: Vec<_> = boxset.boxes.iter().flat_map(|&b| smp.sample_keys(res, b)).collect();
    smp.fill(&keys);
    let mut out = boxset.clone();
    out.labels.clear();
    out.shared.clear();
    out.horizon = horizon;
    let sep = fam.separatrix();
    for &b in &boxset.boxes {
        let classes: Vec<SampleClass> = smp
            .sample_keys(res, b)
            .iter()
            .map(|k| smp.cache[k].class)
            .filter(|c| *c != SampleClass::Exits)
            .collect();
        let has = |c: SampleClass| classes.contains(&c);
        let only = |allowed: &[SampleClass]| classes.iter().all(|c| allowed.contains(c));
        use SampleClass::*;
        let centre_y = boxset.bounds(b)[1].mid();
        let by_position = if centre_y >= sep { BoxLabel::LambdaPlus } else { BoxLabel::LambdaMinus };
        let label = if classes.is_empty() {
            BoxLabel::Unresolved
        } else if has(UpCross) {
            out.shared.insert(b);
            if only(&[Minus, Fixed, UpCross]) {
                BoxLabel::LambdaMinus
            } else {
                BoxLabel::Unresolved
            }
        } else if only(&[Wandering]) {
            BoxLabel::Wandering
        } else if only(&[Plus, Fixed]) && has(Plus) {
            BoxLabel::LambdaPlus
        } else if only(&[Minus, Fixed]) && has(Minus) {
            BoxLabel::LambdaMinus
        } else if only(&[Fixed]) {
            by_position
        } else {
            BoxLabel::Unresolved
        };
        out.labels.insert(b, label);
    }
    out
}

/// Number of sampled orbits (all nine samples of every retained box) whose
/// itinerary goes `Q`-region, `P`-region, `Q`-region.
pub fn q_p_q_paths(fam: &SkewFamily, boxset: &BoxSet, horizon: u64) -> usize {
    let res = boxset.resolution[0];
    let mut smp = sampler(fam, res, horizon);
    let keys: Vec<_> = boxset.boxes.iter().flat_map(|&b| smp.sample_keys(res, b)).collect();
    smp.fill(&keys);
    smp.cache.values().filter(|i| i.visits_q_p_q).count()
}
