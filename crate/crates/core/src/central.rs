//! Central one-dimensional maps.
//!
//! Three families share one piecewise representation: `F` (hyperbolic cycle),
//! `Φ_s(x) = x + x² − s` near the saddle-node, and the two-parameter `Ψ_s`
//! with an extra repellor at `−1`. Mandated local pieces are evaluated with
//! their closed forms; the gaps between them are filled by C¹ cubic Hermite
//! blends through `blend_knots`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{linspace, Interval};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CentralMapError {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("blend on [{lo}, {hi}] is not strictly increasing (min slope {min_slope})")]
    NonMonotoneBlend { lo: f64, hi: f64, min_slope: f64 },
    #[error("expected {expected} fixed points, found {found} at {locations:?}")]
    FixedPointCountMismatch { expected: usize, found: usize, locations: Vec<f64> },
    #[error("x = {x} outside domain")]
    OutOfDomain { x: f64 },
    #[error("y = {y} outside range")]
    OutOfRange { y: f64 },
    #[error("inverse did not converge at y = {y}")]
    NoConvergence { y: f64 },
    #[error("orbit left the domain at step {step} (value {value})")]
    OrbitLeftDomain { step: u64, value: f64 },
    #[error("iteration budget {cap} exceeded")]
    IterationBudgetExceeded { cap: u64 },
}

type Result<T> = std::result::Result<T, CentralMapError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Hyperbolic,
    SaddleNode,
    TwoParam,
}

/// Interpolation anchor `(abscissa, ordinate, slope)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot(pub f64, pub f64, pub f64);

impl Knot {
    pub fn x(&self) -> f64 {
        self.0
    }
    pub fn y(&self) -> f64 {
        self.1
    }
    pub fn slope(&self) -> f64 {
        self.2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralMapSpec {
    pub regime: Regime,
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
    pub s: f64,
    pub domain: Interval,
    pub blend_knots: Vec<Knot>,
}

pub const DEFAULT_DELTA: f64 = 0.1;

impl CentralMapSpec {
    pub fn hyperbolic(lambda: f64, beta: f64) -> Self {
        Self::with_defaults(Regime::Hyperbolic, lambda, beta, DEFAULT_DELTA, 0.0)
    }

    /// `beta` is unused by the saddle-node family; it is kept at a nominal 1.01.
    pub fn saddle_node(lambda: f64, s: f64) -> Self {
        Self::with_defaults(Regime::SaddleNode, lambda, 1.01, DEFAULT_DELTA, s)
    }

    pub fn two_param(lambda: f64, beta: f64, s: f64) -> Self {
        Self::with_defaults(Regime::TwoParam, lambda, beta, DEFAULT_DELTA, s)
    }

    pub fn with_defaults(regime: Regime, lambda: f64, beta: f64, delta: f64, s: f64) -> Self {
        let domain = default_domain(regime);
        let mut spec = CentralMapSpec {
            regime,
            lambda,
            beta,
            delta,
            s,
            domain,
            blend_knots: Vec::new(),
        };
        spec.blend_knots = default_blend_knots(&spec);
        spec
    }

    /// Same spec with a new `delta`; the default end knots are recomputed.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self::with_defaults(self.regime, self.lambda, self.beta, delta, self.s)
    }

    /// Same spec with a new `s`; the default end knots are recomputed.
    pub fn with_s(&self, s: f64) -> Self {
        Self::with_defaults(self.regime, self.lambda, self.beta, self.delta, s)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CentralMapError::InvalidSpec(m));
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return bad(format!("lambda = {} not in (0,1)", self.lambda));
        }
        if !(self.beta > 1.0) {
            return bad(format!("beta = {} not > 1", self.beta));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return bad(format!("delta = {} not in (0, 1/2)", self.delta));
        }
        if !self.s.is_finite() {
            return bad("s not finite".into());
        }
        if self.domain != default_domain(self.regime) {
            return bad(format!("domain {:?} does not match regime", self.domain));
        }
        match self.regime {
            Regime::Hyperbolic => {
                if self.s != 0.0 {
                    return bad("s must be 0 in the hyperbolic regime".into());
                }
            }
            Regime::SaddleNode => {
                if !(self.lambda > 2.0 / 3.0) {
                    return bad(format!("lambda = {} not in (2/3, 1)", self.lambda));
                }
            }
            Regime::TwoParam => {
                if !(self.lambda > 2.0 / 3.0 && self.beta < 1.5) {
                    return bad(format!(
                        "need 2/3 < lambda < 1 < beta < 3/2, got lambda = {}, beta = {}",
                        self.lambda, self.beta
                    ));
                }
            }
        }
        if self.regime != Regime::Hyperbolic && self.s.abs() >= self.delta * self.delta {
            return bad(format!("|s| = {} must be below delta^2", self.s.abs()));
        }
        for w in self.blend_knots.windows(2) {
            if !(w[1].x() > w[0].x() && w[1].y() > w[0].y()) {
                return bad("blend_knots must increase in abscissa and ordinate".into());
            }
        }
        for k in &self.blend_knots {
            if !(k.slope() > 0.0) || !k.x().is_finite() || !k.y().is_finite() {
                return bad(format!("knot {:?} needs a positive finite slope", k));
            }
            if !self.domain.contains(k.x()) {
                return bad(format!("knot {:?} outside domain", k));
            }
        }
        Ok(())
    }
}

fn default_domain(regime: Regime) -> Interval {
    match regime {
        Regime::TwoParam => Interval::new(-2.0, 2.0),
        _ => Interval::new(-1.0, 2.0),
    }
}

/// Domain-end knots continuing the outermost mandated pieces affinely.
pub fn default_blend_knots(spec: &CentralMapSpec) -> Vec<Knot> {
    let (l, b, d, s) = (spec.lambda, spec.beta, spec.delta, spec.s);
    let right = Knot(2.0, 1.0 + l, l);
    match spec.regime {
        Regime::Hyperbolic => vec![Knot(-1.0, -b, b), right],
        Regime::SaddleNode => {
            let m = 1.0 - 2.0 * d;
            let y = (-d + d * d - s) + m * (-1.0 + d);
            vec![Knot(-1.0, y, m), right]
        }
        Regime::TwoParam => vec![Knot(-2.0, -1.0 - b, b), right],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PieceKind {
    Affine,
    QuadraticSn,
    MonotoneBlend,
}

/// One tile of the map.
///
/// Coefficients: `Affine` stores `[anchor, value, slope]` for
/// `value + slope·(x − anchor)`; `QuadraticSn` stores `[s]`;
/// `MonotoneBlend` stores `[x0, y0, c1, c2, c3]` for
/// `y0 + c1·w + c2·w² + c3·w³` with `w = x − x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub interval: Interval,
    pub kind: PieceKind,
    pub coefficients: Vec<f64>,
}

impl Piece {
    fn affine(lo: f64, hi: f64, anchor: f64, value: f64, slope: f64) -> Self {
        Piece {
            interval: Interval::new(lo, hi),
            kind: PieceKind::Affine,
            coefficients: vec![anchor, value, slope],
        }
    }

    fn quadratic(lo: f64, hi: f64, s: f64) -> Self {
        Piece {
            interval: Interval::new(lo, hi),
            kind: PieceKind::QuadraticSn,
            coefficients: vec![s],
        }
    }

    fn hermite(a: Knot, b: Knot) -> Self {
        let h = b.x() - a.x();
        let secant = (b.y() - a.y()) / h;
        let c1 = a.slope();
        let c2 = (3.0 * secant - 2.0 * a.slope() - b.slope()) / h;
        let c3 = (a.slope() + b.slope() - 2.0 * secant) / (h * h);
        Piece {
            interval: Interval::new(a.x(), b.x()),
            kind: PieceKind::MonotoneBlend,
            coefficients: vec![a.x(), a.y(), c1, c2, c3],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.kind {
            PieceKind::Affine => c[1] + c[2] * (x - c[0]),
            PieceKind::QuadraticSn => x + x * x - c[0],
            PieceKind::MonotoneBlend => {
                let w = x - c[0];
                c[1] + w * (c[2] + w * (c[3] + w * c[4]))
            }
        }
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.kind {
            PieceKind::Affine => c[2],
            PieceKind::QuadraticSn => 1.0 + 2.0 * x,
            PieceKind::MonotoneBlend => {
                let w = x - c[0];
                c[2] + w * (2.0 * c[3] + 3.0 * c[4] * w)
            }
        }
    }

    pub fn second_deriv(&self, x: f64) -> f64 {
        let c = &self.coefficients;
        match self.kind {
            PieceKind::Affine => 0.0,
            PieceKind::QuadraticSn => 2.0,
            PieceKind::MonotoneBlend => 2.0 * c[3] + 6.0 * c[4] * (x - c[0]),
        }
    }

    /// `f(p + e) − f(p)` without cancellation.
    pub fn diff(&self, p: f64, e: f64) -> f64 {
        let c = &self.coefficients;
        match self.kind {
            PieceKind::Affine => c[2] * e,
            PieceKind::QuadraticSn => e * (1.0 + 2.0 * p + e),
            PieceKind::MonotoneBlend => {
                let w = p - c[0];
                e * (c[2] + c[3] * (2.0 * w + e) + c[4] * (3.0 * w * w + 3.0 * w * e + e * e))
            }
        }
    }

    /// Smallest derivative on the piece (exact for the polynomial kinds).
    fn min_max_deriv(&self, lo: f64, hi: f64) -> (f64, f64) {
        let mut vals = vec![self.deriv(lo), self.deriv(hi)];
        if self.kind == PieceKind::MonotoneBlend {
            let c = &self.coefficients;
            if c[4] != 0.0 {
                let w = -c[3] / (3.0 * c[4]);
                let x = c[0] + w;
                if x > lo && x < hi {
                    vals.push(self.deriv(x));
                }
            }
        }
        let mn = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (mn, mx)
    }

    fn inverse(&self, y: f64) -> Result<f64> {
        let c = &self.coefficients;
        match self.kind {
            PieceKind::Affine => Ok(c[0] + (y - c[1]) / c[2]),
            PieceKind::QuadraticSn => {
                let q = y + c[0];
                Ok(2.0 * q / (1.0 + (1.0 + 4.0 * q).sqrt()))
            }
            PieceKind::MonotoneBlend => {
                let (mut lo, mut hi) = (self.interval.lo, self.interval.hi);
                let mut x = lo + (hi - lo) * ((y - self.eval(lo)) / (self.eval(hi) - self.eval(lo)));
                for _ in 0..200 {
                    if !(x > lo && x < hi) {
                        x = 0.5 * (lo + hi);
                    }
                    let fx = self.eval(x) - y;
                    if fx == 0.0 {
                        return Ok(x);
                    }
                    if fx > 0.0 {
                        hi = x;
                    } else {
                        lo = x;
                    }
                    let next = x - fx / self.deriv(x);
                    if (next - x).abs() <= 1e-17 * x.abs().max(1e-300) || hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()) {
                        return Ok(if next > lo && next < hi { next } else { x });
                    }
                    x = next;
                }
                Err(CentralMapError::NoConvergence { y })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stability {
    Attractor,
    Repellor,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub x: f64,
    pub slope: f64,
    pub stability: Stability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Direction {
    Forward,
    Backward,
}

pub const DEFAULT_ENTRY_CAP: u64 = 1_000_000;

const CERT_GRID: usize = 10_000;
const DISTORTION_SAFETY: f64 = 1.05;
const BOUND_MARGIN: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct CentralMap {
    pub spec: CentralMapSpec,
    pub pieces: Vec<Piece>,
    pub certified_deriv_bounds: (f64, f64),
    #[serde(rename = "distortion_K")]
    pub distortion_k: f64,
    pub core: Interval,
    pub fixed_points: Vec<FixedPoint>,
    #[serde(skip)]
    images: Vec<Interval>,
}

pub fn build_central_map(spec: &CentralMapSpec) -> Result<CentralMap> {
    CentralMap::build(spec)
}

impl CentralMap {
    pub fn build(spec: &CentralMapSpec) -> Result<CentralMap> {
        spec.validate()?;
        let (l, b, d, s) = (spec.lambda, spec.beta, spec.delta, spec.s);
        let mut mandated = vec![];
        match spec.regime {
            Regime::Hyperbolic => {
                mandated.push(Piece::affine(-d, d, 0.0, 0.0, b));
            }
            Regime::SaddleNode => {
                mandated.push(Piece::quadratic(-d, d, s));
            }
            Regime::TwoParam => {
                mandated.push(Piece::affine(-1.0 - d, -1.0 + d, -1.0, -1.0, b));
                mandated.push(Piece::quadratic(-d, d, s));
            }
        }
        mandated.push(Piece::affine(1.0 - d, 1.0 + d, 1.0, 1.0, l));

        let mut knots: Vec<Knot> = Vec::new();
        for p in &mandated {
            for x in [p.interval.lo, p.interval.hi] {
                knots.push(Knot(x, p.eval(x), p.deriv(x)));
            }
        }
        for k in &spec.blend_knots {
            if let Some(p) = mandated.iter().find(|p| p.interval.contains(k.x())) {
                let at_edge = k.x() == p.interval.lo || k.x() == p.interval.hi;
                let consistent = (p.eval(k.x()) - k.y()).abs() <= 1e-12 && (p.deriv(k.x()) - k.slope()).abs() <= 1e-12;
                if !at_edge || !consistent {
                    return Err(CentralMapError::InvalidSpec(format!(
                        "knot {:?} conflicts with a mandated piece on {:?}",
                        k, p.interval
                    )));
                }
                continue;
            }
            knots.push(*k);
        }
        knots.sort_by(|a, b| a.x().partial_cmp(&b.x()).unwrap());
        knots.dedup_by(|a, b| a.x() == b.x());
        if knots.first().map(|k| k.x()) != Some(spec.domain.lo) || knots.last().map(|k| k.x()) != Some(spec.domain.hi) {
            return Err(CentralMapError::InvalidSpec("domain ends must be knots".into()));
        }
        for w in knots.windows(2) {
            if !(w[1].y() > w[0].y()) {
                return Err(CentralMapError::InvalidSpec(format!(
                    "knots {:?} and {:?} are not increasing",
                    w[0], w[1]
                )));
            }
        }

        let mut pieces = Vec::new();
        for w in knots.windows(2) {
            if let Some(p) = mandated.iter().find(|p| p.interval.lo == w[0].x() && p.interval.hi == w[1].x()) {
                pieces.push(p.clone());
            } else {
                let h = Piece::hermite(w[0], w[1]);
                let (mn, _) = h.min_max_deriv(w[0].x(), w[1].x());
                if !(mn > 0.0) {
                    return Err(CentralMapError::NonMonotoneBlend { lo: w[0].x(), hi: w[1].x(), min_slope: mn });
                }
                pieces.push(h);
            }
        }
        let images = pieces.iter().map(|p| Interval::new(p.eval(p.interval.lo), p.eval(p.interval.hi))).collect();

        let core = match spec.regime {
            Regime::TwoParam => Interval::new(-1.0, 1.0),
            _ => Interval::new(0.0, 1.0),
        };
        let mut map = CentralMap {
            spec: spec.clone(),
            pieces,
            certified_deriv_bounds: (0.0, 0.0),
            distortion_k: 0.0,
            core,
            fixed_points: Vec::new(),
            images,
        };

        let grid: Vec<f64> = linspace(spec.domain.lo, spec.domain.hi, CERT_GRID).collect();
        for w in grid.windows(2) {
            if !(map.eval_unchecked(w[1]) > map.eval_unchecked(w[0])) {
                return Err(CentralMapError::NonMonotoneBlend { lo: w[0], hi: w[1], min_slope: 0.0 });
            }
        }

        let (mut dm, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in &map.pieces {
            let lo = p.interval.lo.max(core.lo);
            let hi = p.interval.hi.min(core.hi);
            if lo < hi {
                let (a, b) = p.min_max_deriv(lo, hi);
                dm = dm.min(a);
                dmax = dmax.max(b);
            }
        }
        for x in linspace(core.lo, core.hi, CERT_GRID) {
            let v = map.deriv_unchecked(x);
            dm = dm.min(v);
            dmax = dmax.max(v);
        }
        map.certified_deriv_bounds = (dm * (1.0 - BOUND_MARGIN), dmax * (1.0 + BOUND_MARGIN));
        map.distortion_k = map.distortion_on(core);
        map.fixed_points = map.isolate_fixed_points();
        let expected = map.expected_fixed_point_count();
        if map.fixed_points.len() != expected {
            return Err(CentralMapError::FixedPointCountMismatch {
                expected,
                found: map.fixed_points.len(),
                locations: map.fixed_points.iter().map(|f| f.x).collect(),
            });
        }
        Ok(map)
    }

    pub fn regime(&self) -> Regime {
        self.spec.regime
    }

    pub fn lambda(&self) -> f64 {
        self.spec.lambda
    }

    pub fn beta(&self) -> f64 {
        self.spec.beta
    }

    pub fn s(&self) -> f64 {
        self.spec.s
    }

    pub fn delta(&self) -> f64 {
        self.spec.delta
    }

    pub fn domain(&self) -> Interval {
        self.spec.domain
    }

    pub fn range(&self) -> Interval {
        Interval::new(self.images[0].lo, self.images[self.images.len() - 1].hi)
    }

    fn piece_index(&self, x: f64) -> usize {
        let i = self.pieces.partition_point(|p| p.interval.lo <= x);
        i.saturating_sub(1).min(self.pieces.len() - 1)
    }

    fn piece_index_image(&self, y: f64) -> usize {
        let i = self.images.partition_point(|im| im.lo <= y);
        i.saturating_sub(1).min(self.images.len() - 1)
    }

    pub fn piece_at(&self, x: f64) -> &Piece {
        &self.pieces[self.piece_index(x)]
    }

    fn eval_unchecked(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    fn deriv_unchecked(&self, x: f64) -> f64 {
        self.pieces[self.piece_index(x)].deriv(x)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.domain().contains(x) {
            return Err(CentralMapError::OutOfDomain { x });
        }
        Ok(self.eval_unchecked(x))
    }

    pub fn deriv(&self, x: f64) -> Result<f64> {
        if !self.domain().contains(x) {
            return Err(CentralMapError::OutOfDomain { x });
        }
        Ok(self.deriv_unchecked(x))
    }

    pub fn second_deriv(&self, x: f64) -> Result<f64> {
        if !self.domain().contains(x) {
            return Err(CentralMapError::OutOfDomain { x });
        }
        Ok(self.pieces[self.piece_index(x)].second_deriv(x))
    }

    /// Left and right one-sided second derivatives (they differ at junctions).
    pub fn second_deriv_sides(&self, x: f64) -> Result<(f64, f64)> {
        if !self.domain().contains(x) {
            return Err(CentralMapError::OutOfDomain { x });
        }
        let i = self.piece_index(x);
        let right = self.pieces[i].second_deriv(x);
        let left = if i > 0 && self.pieces[i].interval.lo == x {
            self.pieces[i - 1].second_deriv(x)
        } else {
            right
        };
        Ok((left, right))
    }

    /// One-sided first derivatives at `x`.
    pub fn deriv_sides(&self, x: f64) -> Result<(f64, f64)> {
        if !self.domain().contains(x) {
            return Err(CentralMapError::OutOfDomain { x });
        }
        let i = self.piece_index(x);
        let right = self.pieces[i].deriv(x);
        let left = if i > 0 && self.pieces[i].interval.lo == x {
            self.pieces[i - 1].deriv(x)
        } else {
            right
        };
        Ok((left, right))
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        if !self.range().contains(y) {
            return Err(CentralMapError::OutOfRange { y });
        }
        let p = &self.pieces[self.piece_index_image(y)];
        let x = p.inverse(y)?;
        Ok(x.clamp(p.interval.lo, p.interval.hi))
    }

    /// `F(p + e) − F(p)` computed without cancellation.
    pub fn eval_diff(&self, p: f64, e: f64) -> Result<f64> {
        let q = p + e;
        if !self.domain().contains(p) || !self.domain().contains(q) {
            return Err(CentralMapError::OutOfDomain { x: if self.domain().contains(p) { q } else { p } });
        }
        let i = self.piece_index(p);
        if self.piece_index(q) == i {
            Ok(self.pieces[i].diff(p, e))
        } else {
            Ok(self.eval_unchecked(q) - self.eval_unchecked(p))
        }
    }

    pub fn iterate(&self, x: f64, n: i64) -> Result<f64> {
        let mut y = x;
        if n >= 0 {
            for k in 0..n as u64 {
                y = self.eval(y).map_err(|_| CentralMapError::OrbitLeftDomain { step: k, value: y })?;
            }
        } else {
            for k in 0..n.unsigned_abs() {
                y = match self.inverse(y) {
                    Ok(v) => v,
                    Err(CentralMapError::OutOfRange { .. }) => {
                        return Err(CentralMapError::OrbitLeftDomain { step: k, value: y })
                    }
                    Err(e) => return Err(e),
                };
            }
        }
        Ok(y)
    }

    pub fn first_entry_time(&self, x: f64, target: Interval, direction: Direction, cap: u64) -> Result<u64> {
        let mut y = x;
        for n in 0..=cap {
            if target.contains(y) {
                return Ok(n);
            }
            if n == cap {
                break;
            }
            y = match direction {
                Direction::Forward => self.eval(y),
                Direction::Backward => self.inverse(y),
            }
            .map_err(|_| CentralMapError::OrbitLeftDomain { step: n, value: y })?;
        }
        Err(CentralMapError::IterationBudgetExceeded { cap })
    }

    /// `(F^n(x), ln (F^n)′(x))`.
    pub fn iterate_log_deriv(&self, x: f64, n: u64) -> Result<(f64, f64)> {
        let mut y = x;
        let mut acc = 0.0;
        for k in 0..n {
            if !self.domain().contains(y) {
                return Err(CentralMapError::OrbitLeftDomain { step: k, value: y });
            }
            let p = &self.pieces[self.piece_index(y)];
            acc += p.deriv(y).ln();
            y = p.eval(y);
        }
        Ok((y, acc))
    }

    /// One forward step written in the distance-to-sink coordinate `u = 1 − x`.
    ///
    /// On the affine piece at 1 this is `λu`, exact to relative rounding.
    pub fn step_u(&self, u: f64) -> Result<f64> {
        if u.abs() <= self.spec.delta {
            Ok(self.spec.lambda * u)
        } else {
            Ok(1.0 - self.eval(1.0 - u)?)
        }
    }

    /// Inverse of [`step_u`](Self::step_u).
    pub fn step_u_inv(&self, u: f64) -> Result<f64> {
        if u.abs() <= self.spec.lambda * self.spec.delta {
            Ok(u / self.spec.lambda)
        } else {
            Ok(1.0 - self.inverse(1.0 - u)?)
        }
    }

    /// Maximum of `|F″/F′|` over `iv` (both one-sided values at junctions),
    /// multiplied by the 1.05 safety factor.
    pub fn distortion_on(&self, iv: Interval) -> f64 {
        let mut mx: f64 = 0.0;
        let mut probe = |x: f64| {
            let i = self.piece_index(x);
            let mut cand = vec![i];
            if i > 0 && self.pieces[i].interval.lo == x {
                cand.push(i - 1);
            }
            for j in cand {
                let p = &self.pieces[j];
                mx = mx.max((p.second_deriv(x) / p.deriv(x)).abs());
            }
        };
        for x in linspace(iv.lo, iv.hi, CERT_GRID) {
            probe(x);
        }
        for p in &self.pieces {
            for x in [p.interval.lo, p.interval.hi] {
                if iv.contains(x) {
                    probe(x);
                }
            }
        }
        mx * DISTORTION_SAFETY
    }

    fn expected_fixed_point_count(&self) -> usize {
        let s = self.spec.s;
        let sign = if s > 0.0 { 2 } else if s == 0.0 { 1 } else { 0 };
        match self.spec.regime {
            Regime::Hyperbolic => 2,
            Regime::SaddleNode => 1 + sign,
            Regime::TwoParam => 2 + sign,
        }
    }

    fn mandated_candidates(&self) -> Vec<f64> {
        let s = self.spec.s;
        let mut c = vec![1.0];
        match self.spec.regime {
            Regime::Hyperbolic => c.push(0.0),
            Regime::SaddleNode | Regime::TwoParam => {
                if s > 0.0 {
                    c.push(s.sqrt());
                    c.push(-s.sqrt());
                } else {
                    c.push(0.0);
                }
                if self.spec.regime == Regime::TwoParam {
                    c.push(-1.0);
                }
            }
        }
        c
    }

    fn isolate_fixed_points(&self) -> Vec<FixedPoint> {
        let dom = self.domain();
        let mut xs: Vec<f64> = linspace(dom.lo, dom.hi, CERT_GRID).collect();
        let mut cand = self.mandated_candidates();
        cand.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mids: Vec<f64> = cand.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        xs.extend(cand);
        xs.extend(mids);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        xs.dedup();
        let g = |x: f64| self.eval_unchecked(x) - x;
        let tol = 1e-15;
        let sign = |v: f64| if v.abs() <= tol { 0 } else if v > 0.0 { 1 } else { -1 };
        let mut roots = Vec::new();
        let mut i = 0;
        while i < xs.len() {
            let si = sign(g(xs[i]));
            if si == 0 {
                let start = i;
                while i + 1 < xs.len() && sign(g(xs[i + 1])) == 0 && xs[i + 1] - xs[i] < 1e-12 {
                    i += 1;
                }
                let best = (start..=i)
                    .min_by(|&a, &b| g(xs[a]).abs().partial_cmp(&g(xs[b]).abs()).unwrap())
                    .unwrap();
                roots.push(xs[best]);
            } else if i + 1 < xs.len() {
                let sj = sign(g(xs[i + 1]));
                if sj != 0 && sj != si {
                    let (mut a, mut b) = (xs[i], xs[i + 1]);
                    for _ in 0..200 {
                        let m = 0.5 * (a + b);
                        if m <= a || m >= b {
                            break;
                        }
                        if sign(g(m)) == si {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    roots.push(0.5 * (a + b));
                }
            }
            i += 1;
        }
        roots
            .into_iter()
            .map(|x| {
                let slope = self.deriv_unchecked(x);
                let stability = if slope > 1.0 + 1e-9 {
                    Stability::Repellor
                } else if slope < 1.0 - 1e-9 {
                    Stability::Attractor
                } else {
                    Stability::Parabolic
                };
                FixedPoint { x, slope, stability }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn canon_h() -> CentralMap {
        CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap()
    }

    #[test]
    fn hyperbolic_local_forms_are_exact() {
        let m = canon_h();
        assert_eq!(m.eval(0.01).unwrap(), 1.01 * 0.01);
        assert_eq!(m.eval(0.99).unwrap(), 1.0 + 0.95 * (0.99 - 1.0));
        assert_eq!(m.deriv(0.0).unwrap(), 1.01);
        assert_eq!(m.deriv(1.0).unwrap(), 0.95);
        let fp = &m.fixed_points;
        assert_eq!(fp.len(), 2);
        assert_eq!(fp[0].x, 0.0);
        assert_eq!(fp[0].stability, Stability::Repellor);
        assert_eq!(fp[1].x, 1.0);
        assert_eq!(fp[1].stability, Stability::Attractor);
    }

    #[test]
    fn saddle_node_fixed_points_follow_s() {
        let m = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0004)).unwrap();
        let xs: Vec<f64> = m.fixed_points.iter().map(|f| f.x).collect();
        assert_eq!(xs.len(), 3);
        assert!((xs[0] + 0.02).abs() < 1e-15 && (xs[1] - 0.02).abs() < 1e-15);
        assert!((m.eval(0.02).unwrap() - 0.02).abs() < 1e-17);

        let m0 = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap();
        assert_eq!(m0.fixed_points[0].x, 0.0);
        assert_eq!(m0.fixed_points[0].stability, Stability::Parabolic);
        assert!(m0.distortion_k >= 2.0);

        let mneg = CentralMap::build(&CentralMapSpec::saddle_node(0.999, -1e-6)).unwrap();
        assert_eq!(mneg.fixed_points.len(), 1);
    }

    #[test]
    fn two_param_fixed_point_counts() {
        for (s, n) in [(-1e-7, 2), (0.0, 3), (1e-6, 4)] {
            let m = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, s)).unwrap();
            assert_eq!(m.fixed_points.len(), n, "s = {s}");
            assert_eq!(m.fixed_points[0].x, -1.0);
            assert_eq!(m.fixed_points[0].slope, 1.001);
        }
    }

    #[test]
    fn quadratic_inverse_is_closed_form() {
        let m = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap();
        assert_eq!(m.inverse(0.0).unwrap(), 0.0);
        assert!((m.inverse(0.0101).unwrap() - 0.01).abs() < 1e-17);
        let h = canon_h();
        assert!((h.inverse(1.0 - 0.95 * 0.01).unwrap() - 0.99).abs() < 1e-15);
    }

    #[test]
    fn iterate_two_steps_inside_quadratic_zone() {
        let spec = CentralMapSpec::saddle_node(0.999, 0.0).with_delta(0.15);
        let m = CentralMap::build(&spec).unwrap();
        assert!((m.iterate(0.1, 2).unwrap() - 0.1221).abs() < 1e-15);
        assert_eq!(m.iterate(0.37, 0).unwrap(), 0.37);
    }

    #[test]
    fn entry_time_budget() {
        let m = canon_h();
        let n = m.first_entry_time(0.5, Interval::new(0.99, 0.9905), Direction::Forward, DEFAULT_ENTRY_CAP).unwrap();
        assert!(n > 0);
        let y = m.iterate(0.5, n as i64).unwrap();
        assert!(Interval::new(0.99, 0.9905).contains(y));
        assert!(matches!(
            m.first_entry_time(0.5, Interval::new(2.0, 3.0), Direction::Forward, 10_000),
            Err(CentralMapError::IterationBudgetExceeded { cap: 10_000 })
        ));
        assert_eq!(m.first_entry_time(0.5, Interval::new(0.4, 0.6), Direction::Forward, 1).unwrap(), 0);
    }

    #[test]
    fn conflicting_knot_rejected() {
        let mut spec = CentralMapSpec::hyperbolic(0.95, 1.01);
        spec.blend_knots.push(Knot(0.05, 0.3, 1.0));
        assert!(matches!(CentralMap::build(&spec), Err(CentralMapError::InvalidSpec(_))));
    }

    #[test]
    fn steep_knot_breaks_monotonicity() {
        let mut spec = CentralMapSpec::hyperbolic(0.95, 1.01);
        spec.blend_knots.insert(1, Knot(0.5, 0.11, 40.0));
        let r = CentralMap::build(&spec);
        assert!(matches!(r, Err(CentralMapError::NonMonotoneBlend { .. })), "{r:?}");
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = CentralMapSpec::two_param(0.999, 1.001, -1e-7);
        let js = serde_json::to_string(&spec).unwrap();
        assert!(js.contains("\"regime\":\"TWO_PARAM\""));
        let back: CentralMapSpec = serde_json::from_str(&js).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn eval_diff_matches_direct_difference() {
        let m = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap();
        for &p in &[0.001, 0.05, 0.3, 0.95] {
            let e = 1e-7;
            let direct = m.eval(p + e).unwrap() - m.eval(p).unwrap();
            assert!((m.eval_diff(p, e).unwrap() - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn u_coordinates_agree_with_x() {
        let m = canon_h();
        for &x in &[0.3, 0.85, 0.97] {
            let u = m.step_u(1.0 - x).unwrap();
            assert!((u - (1.0 - m.eval(x).unwrap())).abs() < 1e-15);
            assert!((m.step_u_inv(u).unwrap() - (1.0 - x)).abs() < 1e-14);
        }
    }
}
