//! Multi-index sequences of homoclinic points accumulating on `Δ_t^+(0)`.
//!
//! A node `(i₁,…,i_m,k)` is element `k` of the generation-`m` sequence with
//! prefix `(i₁,…,i_m)`. Writing `h_j(x) = (t − 1) + Φ^{κ+α+j}(x)`, the
//! recurrence is `x_{j,P,k} = h_j(x_{P,k})` with the root sequence
//! `x_k = h_k(t)`. Each sequence stores its limit `x_P` and the offsets
//! `x_{P,k} − x_P`, which are propagated by exact differences so that deep
//! generations keep relative precision long after their spread drops below
//! the spacing of binary64 near `t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapError, Regime};
use crate::domains::{forward_u, lambda_pow, DomainLadder, LadderKind};
use crate::hypotheses::check_sn;
use crate::numeric::{CertMode, Interval, REL_MARGIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error(transparent)]
    Map(#[from] CentralMapError),
    #[error("no stored sequence with prefix {0}")]
    NodeMissing(String),
    #[error("iteration budget {cap} exceeded")]
    IterationBudgetExceeded { cap: u64 },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("sequence {prefix} has diameter {diameter:e} below the floor {floor:e}")]
    PrecisionFloor { prefix: String, diameter: f64, floor: f64 },
    #[error("Phi^{m}(y) = 1 - {u:e} is outside (1 - t, 1)")]
    WindowViolated { m: u64, u: f64 },
}

type Result<T> = std::result::Result<T, TreeError>;

pub fn dotted(index: &[u32]) -> String {
    index.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(".")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub depth: usize,
    pub width: usize,
    /// Extension halts when a diameter falls below `precision_floor · |Δ_t^+(0)|`.
    pub precision_floor: f64,
    pub cap: u64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig { depth: 8, width: 64, precision_floor: 1e-15, cap: 100_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeSequence {
    pub prefix: Vec<u32>,
    pub limit: f64,
    pub offsets: Vec<f64>,
}

impl TreeSequence {
    pub fn generation(&self) -> usize {
        self.prefix.len()
    }

    pub fn x(&self, k: usize) -> f64 {
        self.limit + self.offsets[k]
    }

    pub fn diameter(&self) -> f64 {
        self.offsets.iter().fold(0.0f64, |m, &o| m.max(-o))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionFloorReport {
    pub generation: usize,
    pub prefix: String,
    pub diameter: f64,
    pub floor: f64,
}

#[derive(Debug, Clone)]
pub struct HomoclinicTree {
    pub t: f64,
    pub map: CentralMap,
    pub kappa_alpha: (u64, u64),
    pub delta_chain: Vec<Interval>,
    /// `x = y + offset`; `t − 1` for the genuine construction.
    pub offset: f64,
    pub sequences: BTreeMap<Vec<u32>, TreeSequence>,
    pub gen_diameters: Vec<f64>,
    pub depth: usize,
    pub per_gen_width: usize,
    pub config: TreeConfig,
    pub precision_floor: Option<PrecisionFloorReport>,
}

/// `F^n(p + e) − F^n(p)`.
fn propagate(map: &CentralMap, p: f64, e: f64, n: u64) -> Result<f64> {
    let lo = 1.0 - map.delta();
    let hi = 1.0 + map.delta();
    let (mut p, mut e) = (p, e);
    for k in 0..n {
        let q = p + e;
        if p >= lo && p <= hi && q >= lo && q <= hi {
            return Ok(e * lambda_pow(map.lambda(), n - k));
        }
        e = map.eval_diff(p, e)?;
        p = map.eval(p)?;
    }
    Ok(e)
}

/// `(x_i)_{i<n_max}`: `x_i = (t − 1) + Φ^{κ+α+i}(t)`.
pub fn first_generation(map: &CentralMap, ladder: &DomainLadder, n_max: usize) -> Result<Vec<f64>> {
    let (kappa, alpha) = tree_preconditions(map, ladder)?;
    let n = kappa + alpha;
    (0..n_max as u64).map(|i| Ok(ladder.t - forward_u(map, ladder.t, n + i)?)).collect()
}

fn tree_preconditions(map: &CentralMap, ladder: &DomainLadder) -> Result<(u64, u64)> {
    if map.regime() != Regime::SaddleNode || ladder.regime != LadderKind::SaddleNode {
        return Err(TreeError::PreconditionFailed("the tree needs a saddle-node map at s = 0".into()));
    }
    let sn = check_sn(map.lambda(), map.distortion_k, CertMode::Fast)
        .map_err(|e| TreeError::PreconditionFailed(e.to_string()))?;
    if !sn.pass {
        return Err(TreeError::PreconditionFailed(format!("(SN) fails: lhs {} >= 1/2", sn.lhs)));
    }
    match (ladder.kappa_t, ladder.alpha_t) {
        (Some(k), Some(a)) if ladder.delta_chain.len() == 5 => Ok((k, a)),
        _ => Err(TreeError::PreconditionFailed("ladder lacks kappa_t, alpha_t or the Delta chain".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketWalk {
    pub probe: f64,
    /// `(i₁,…,i_k)` for the deepest realized level.
    pub index: Vec<u32>,
    /// `x_{…,(i_k−1)} < probe < x_{…,i_k}` per level.
    pub brackets: Vec<Bracket>,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub pass: bool,
    pub checked: usize,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HReport {
    pub checks: Vec<PropertyCheck>,
}

impl HReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, pass: bool, checked: usize, detail: String) -> PropertyCheck {
    PropertyCheck { name: name.to_string(), pass, checked, detail }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lift {
    pub x_bar: f64,
    pub y_prime: f64,
}

/// One step of the lifting algorithm: `y′ = Φ^m(y) + t − 1`, valid when
/// `Φ^m(y) ∈ (1 − t, 1)`. With `lambda_s` the first coordinate is
/// `λ_s^m x − 1/2`; without it the placeholder `−1/2` is returned.
pub fn algo2_lift(map: &CentralMap, x: f64, y: f64, m: u64, t: f64, lambda_s: Option<f64>) -> Result<Lift> {
    if !(0.0..=t).contains(&y) {
        return Err(TreeError::PreconditionFailed(format!("y = {y} outside [0, t]")));
    }
    let u = forward_u(map, y, m)?;
    if !(u > 0.0 && u < t) {
        return Err(TreeError::WindowViolated { m, u });
    }
    let x_bar = match lambda_s {
        Some(ls) => lambda_pow(ls, m) * x - 0.5,
        None => -0.5,
    };
    Ok(Lift { x_bar, y_prime: t - u })
}

impl HomoclinicTree {
    /// Root generation only.
    pub fn new(map: &CentralMap, ladder: &DomainLadder, config: TreeConfig) -> Result<Self> {
        Self::with_offset(map, ladder, config, ladder.t - 1.0)
    }

    /// Root generation with `x = y + offset`; anything but `t − 1` breaks (H1).
    pub fn with_offset(map: &CentralMap, ladder: &DomainLadder, config: TreeConfig, offset: f64) -> Result<Self> {
        let kappa_alpha = tree_preconditions(map, ladder)?;
        if config.width == 0 || config.depth == 0 {
            return Err(TreeError::PreconditionFailed("depth and width must be positive".into()));
        }
        let mut tree = HomoclinicTree {
            t: ladder.t,
            map: map.clone(),
            kappa_alpha,
            delta_chain: ladder.delta_chain.clone(),
            offset,
            sequences: BTreeMap::new(),
            gen_diameters: vec![],
            depth: 1,
            per_gen_width: config.width,
            config,
            precision_floor: None,
        };
        let n = tree.base_iterates();
        let anchor = tree.anchor();
        let offsets = (0..config.width as u64)
            .map(|k| Ok(-forward_u(map, tree.t, n + k)?))
            .collect::<Result<Vec<f64>>>()?;
        let root = TreeSequence { prefix: vec![], limit: anchor, offsets };
        tree.gen_diameters.push(root.diameter());
        tree.sequences.insert(vec![], root);
        Ok(tree)
    }

    /// Root generation followed by greedy extension up to `config.depth` generations.
    pub fn build(map: &CentralMap, ladder: &DomainLadder, config: TreeConfig) -> Result<Self> {
        let mut tree = Self::new(map, ladder, config)?;
        for g in 1..config.depth {
            if !tree.grow_generation(g)? {
                break;
            }
        }
        Ok(tree)
    }

    fn base_iterates(&self) -> u64 {
        self.kappa_alpha.0 + self.kappa_alpha.1
    }

    fn anchor(&self) -> f64 {
        self.t + (self.offset - (self.t - 1.0))
    }

    pub fn delta0(&self) -> Interval {
        self.delta_chain[0]
    }

    pub fn delta_union(&self) -> Interval {
        Interval::new(self.delta_chain[4].lo, self.delta_chain[0].hi)
    }

    fn floor(&self) -> f64 {
        self.config.precision_floor * self.delta0().len()
    }

    /// `h_j(x) = (t − 1) + Φ^{κ+α+j}(x)`.
    pub fn h(&self, j: u64, x: f64) -> Result<f64> {
        Ok(self.anchor() - forward_u(&self.map, x, self.base_iterates() + j)?)
    }

    pub fn node_count(&self) -> usize {
        self.sequences.values().map(|s| s.offsets.len()).sum()
    }

    pub fn generation(&self, m: usize) -> impl Iterator<Item = &TreeSequence> {
        self.sequences.values().filter(move |s| s.prefix.len() == m)
    }

    /// Appends the generation-`m+1` sequence `(j, prefix, k)_{k<n_max}`.
    pub fn extend(&mut self, prefix: &[u32], j: u32, n_max: usize) -> Result<&TreeSequence> {
        let parent = self.sequences.get(prefix).ok_or_else(|| TreeError::NodeMissing(dotted(prefix)))?;
        let n = self.base_iterates() + j as u64;
        let limit = self.h(j as u64, parent.limit)?;
        let count = n_max.min(parent.offsets.len());
        let offsets = parent.offsets[..count]
            .iter()
            .map(|&e| propagate(&self.map, parent.limit, e, n))
            .collect::<Result<Vec<f64>>>()?;
        let mut key = vec![j];
        key.extend_from_slice(prefix);
        let seq = TreeSequence { prefix: key.clone(), limit, offsets };
        let floor = self.floor();
        if seq.diameter() < floor {
            return Err(TreeError::PrecisionFloor { prefix: dotted(&key), diameter: seq.diameter(), floor });
        }
        let m = key.len();
        if key.iter().all(|&i| i == 0) {
            if self.gen_diameters.len() == m {
                self.gen_diameters.push(seq.diameter());
            } else if m < self.gen_diameters.len() {
                self.gen_diameters[m] = seq.diameter();
            }
        }
        self.depth = self.depth.max(m + 1);
        self.sequences.insert(key.clone(), seq);
        Ok(&self.sequences[&key])
    }

    /// Adds generation `g`: the all-zeros sequence first, then up to
    /// `width − 1` sequences whose limits land in the widest gaps of `Δ_t^+(0)`.
    /// Returns false when the precision floor stops growth.
    fn grow_generation(&mut self, g: usize) -> Result<bool> {
        let width = self.config.width;
        let zeros = vec![0u32; g - 1];
        match self.extend(&zeros, 0, width) {
            Ok(_) => {}
            Err(TreeError::PrecisionFloor { prefix, diameter, floor }) => {
                self.precision_floor = Some(PrecisionFloorReport { generation: g, prefix, diameter, floor });
                return Ok(false);
            }
            Err(e) => return Err(e),
        }
        let d0 = self.delta0();
        let mut xs = self.points_in(d0);
        let base = self.sequences[&zeros].limit;
        let mut added = 1;
        while added < width {
            let Some((a, b)) = widest_gap(&xs, d0) else { break };
            let z = 0.5 * (a + b);
            let j = self.index_towards(base, z)?;
            let mut placed = false;
            for cand in [j, j.saturating_sub(1), j + 1] {
                let mut key = vec![cand];
                key.extend_from_slice(&zeros);
                if self.sequences.contains_key(&key) {
                    continue;
                }
                let lim = self.h(cand as u64, base)?;
                if !(lim > a && lim <= b) {
                    continue;
                }
                match self.extend(&zeros, cand, width) {
                    Ok(seq) => {
                        let new: Vec<f64> = (0..seq.offsets.len()).map(|k| seq.x(k)).collect();
                        xs.extend(new.into_iter().filter(|x| d0.contains(*x)));
                        xs.sort_by(f64::total_cmp);
                        placed = true;
                    }
                    Err(TreeError::PrecisionFloor { .. }) => {}
                    Err(e) => return Err(e),
                }
                break;
            }
            if !placed {
                break;
            }
            added += 1;
        }
        Ok(true)
    }

    /// Smallest `j` with `h_j(base) ≥ z`, or its predecessor when that is closer.
    fn index_towards(&self, base: f64, z: f64) -> Result<u32> {
        let cap = self.config.cap.min(u32::MAX as u64);
        let mut hi: u64 = 1;
        while self.h(hi, base)? < z {
            hi *= 2;
            if hi > cap {
                return Err(TreeError::IterationBudgetExceeded { cap });
            }
        }
        let mut lo = 0;
        if self.h(0, base)? >= z {
            return Ok(0);
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.h(mid, base)? >= z {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (zl, zh) = (self.h(lo, base)?, self.h(hi, base)?);
        Ok(if z - zl < zh - z { lo as u32 } else { hi as u32 })
    }

    fn points_in(&self, iv: Interval) -> Vec<f64> {
        let mut xs: Vec<f64> = self
            .sequences
            .values()
            .flat_map(|s| (0..s.offsets.len()).map(move |k| s.x(k)))
            .filter(|x| iv.contains(*x))
            .collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Widest gap between stored points in `Δ_t^+(0)` (endpoints included), over `|Δ_t^+(0)|`.
    pub fn density_gap(&self) -> f64 {
        let d0 = self.delta0();
        let xs = self.points_in(d0);
        match widest_gap(&xs, d0) {
            Some((a, b)) => (b - a) / d0.len(),
            None => 0.0,
        }
    }

    /// `(limit of the sequence holding the node, node − limit)` for any
    /// multi-index, computed from the recurrence whether stored or not.
    pub fn node_value(&self, index: &[u32]) -> Result<(f64, f64)> {
        let n = self.base_iterates();
        match index {
            [] => Err(TreeError::PreconditionFailed("empty multi-index".into())),
            [k] => Ok((self.anchor(), -forward_u(&self.map, self.t, n + *k as u64)?)),
            [j, rest @ ..] => {
                let (lim, off) = self.node_value(rest)?;
                let m = n + *j as u64;
                Ok((self.h(*j as u64, lim)?, propagate(&self.map, lim, off, m)?))
            }
        }
    }

    pub fn verify_h(&self) -> Result<HReport> {
        let mut checks = vec![];
        let union = self.delta_union();
        let slack = 1e-12 * self.t;

        let mut outside = 0;
        let mut worst_out = 0.0f64;
        for s in self.sequences.values() {
            for k in 0..s.offsets.len() {
                let x = s.x(k);
                if !union.contains_slack(x, slack) {
                    outside += 1;
                    worst_out = worst_out.max((union.lo - x).max(x - union.hi));
                }
            }
        }
        checks.push(check(
            "H1",
            outside == 0,
            self.node_count(),
            format!("{outside} nodes outside [{:e}, {:e}], worst excess {worst_out:e}", union.lo, union.hi),
        ));

        let mut bad_conv = vec![];
        for s in self.sequences.values() {
            let o = &s.offsets;
            let increasing = o.windows(2).all(|w| w[0] < w[1]);
            let below = o.iter().all(|&e| e < 0.0);
            let shrinking = o.len() < 2 || o[o.len() - 1].abs() < o[0].abs();
            if !(increasing && below && shrinking) {
                bad_conv.push(dotted(&s.prefix));
            }
        }
        let n_seq = self.sequences.len();
        for name in ["H2", "H2b"] {
            checks.push(check(
                name,
                bad_conv.is_empty(),
                n_seq,
                format!("sequences not increasing to their limit: {:?}", bad_conv),
            ));
        }

        let mut h3_checked = 0;
        let mut h3_bad = vec![];
        for s in self.sequences.values() {
            let Some((&last, _)) = s.prefix.split_last() else { continue };
            if last == 0 {
                continue;
            }
            let mut sib = s.prefix.clone();
            *sib.last_mut().unwrap() -= 1;
            let (_, off_p) = self.node_value(&s.prefix)?;
            let (_, off_sib) = self.node_value(&sib)?;
            h3_checked += 1;
            if !(s.offsets[0] + (off_p - off_sib) < 0.0) {
                h3_bad.push(dotted(&s.prefix));
            }
        }
        for name in ["H3", "H3b"] {
            checks.push(check(name, h3_bad.is_empty(), h3_checked, format!("violations: {:?}", h3_bad)));
        }

        let gens = self.depth;
        let max_diam: Vec<f64> = (0..gens)
            .map(|m| self.generation(m).map(|s| s.diameter()).fold(0.0, f64::max))
            .collect();
        let h4 = max_diam.windows(2).all(|w| w[1] <= 0.5 * w[0]);
        checks.push(check("H4", h4, gens, format!("max diameter per generation {:?}", max_diam)));

        let d = &self.gen_diameters;
        let h4b = d.windows(2).all(|w| w[1] <= 0.5 * w[0]);
        checks.push(check("H4b", h4b, d.len(), format!("d_m {:?}", d)));

        let root = &self.sequences[&vec![]];
        let inc = root.offsets.windows(2).all(|w| w[0] < w[1]) && root.offsets.iter().all(|&e| e < 0.0);
        let limit_ok = (root.limit - self.t).abs() <= slack;
        checks.push(check(
            "H5",
            inc && limit_ok,
            root.offsets.len(),
            format!("increasing below t: {inc}; limit {} vs t {}", root.limit, self.t),
        ));

        let x0 = root.x(0);
        let h6 = self.delta_chain[1].contains(x0) && !self.delta_chain[0].contains(x0);
        checks.push(check("H6", h6, 1, format!("x0 = {x0:e}, Delta(0) = {:?}, Delta(1) = {:?}", self.delta_chain[0], self.delta_chain[1])));

        let d0 = d.first().copied().unwrap_or(0.0);
        let chain = d.iter().enumerate().all(|(m, &dm)| dm <= d0 * 0.5f64.powi(m as i32));
        checks.push(check("DIAM_CHAIN", chain, d.len(), format!("d_m <= 2^-m d_0 over {} generations", d.len())));

        let sum: f64 = d.iter().sum();
        let four = 4.0 * self.delta0().len();
        checks.push(check("SUM_D", sum < four, d.len(), format!("sum d_m = {sum:e} vs 4 delta0 = {four:e}")));

        let mut worst_rel = 0.0f64;
        let mut closures = 0;
        for s in self.sequences.values() {
            for k in 0..s.offsets.len() {
                let stored = s.x(k);
                let recomputed = match s.prefix.split_first() {
                    None => self.h(k as u64, self.t)?,
                    Some((&j, rest)) => {
                        let parent = &self.sequences.get(rest).ok_or_else(|| TreeError::NodeMissing(dotted(rest)))?;
                        self.h(j as u64, parent.x(k))?
                    }
                };
                closures += 1;
                worst_rel = worst_rel.max(((stored - recomputed) / stored).abs());
            }
        }
        checks.push(check(
            "RECURRENCE",
            worst_rel <= 1e-12,
            closures,
            format!("worst relative mismatch {worst_rel:e}"),
        ));
        Ok(HReport { checks })
    }

    /// Index-selection walk: at each level finds `i_k` with
    /// `x_{…,(i_k−1)} < x < x_{…,i_k}` until the bracket drops below binary64
    /// resolution or `max_depth` levels are realized.
    pub fn bracket_walk(&self, x: f64, max_depth: usize) -> Result<BracketWalk> {
        let d0 = self.delta0();
        if !d0.contains(x) {
            return Err(TreeError::PreconditionFailed(format!("probe {x} outside Delta(0)")));
        }
        let mut walk = BracketWalk { probe: x, index: vec![], brackets: vec![], hit: false };
        let mut prefix: Vec<u32> = vec![];
        let resolution = 4.0 * f64::EPSILON * x.abs();
        while walk.brackets.len() < max_depth {
            let node = |k: u32| -> Result<(f64, f64)> {
                let mut idx = prefix.clone();
                idx.push(k);
                self.node_value(&idx)
            };
            let (lim, first) = node(0)?;
            let rel = x - lim;
            if rel >= 0.0 || rel <= first {
                break;
            }
            let mut hi = 1u32;
            while node(hi)?.1 <= rel {
                hi = hi.checked_mul(2).ok_or(TreeError::IterationBudgetExceeded { cap: u32::MAX as u64 })?;
                if hi as u64 > self.config.cap {
                    return Err(TreeError::IterationBudgetExceeded { cap: self.config.cap });
                }
            }
            let mut lo = hi / 2;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if node(mid)?.1 <= rel {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (off_lo, off_hi) = (node(hi - 1)?.1, node(hi)?.1);
            if off_lo == rel || off_hi == rel {
                walk.hit = true;
                prefix.push(if off_lo == rel { hi - 1 } else { hi });
                walk.brackets.push(Bracket { lo: lim + off_lo, hi: lim + off_hi });
                break;
            }
            prefix.push(hi);
            walk.brackets.push(Bracket { lo: lim + off_lo, hi: lim + off_hi });
            if off_hi - off_lo < resolution {
                break;
            }
        }
        walk.index = prefix;
        Ok(walk)
    }

    pub fn to_json(&self) -> Value {
        let mut nodes = serde_json::Map::new();
        for s in self.sequences.values() {
            for k in 0..s.offsets.len() {
                let mut idx = s.prefix.clone();
                idx.push(k as u32);
                let x = s.x(k);
                nodes.insert(
                    dotted(&idx),
                    json!({ "x": x, "y": x - self.offset, "b": -0.5, "generation": s.prefix.len() }),
                );
            }
        }
        json!({
            "t": self.t,
            "kappa_t": self.kappa_alpha.0,
            "alpha_t": self.kappa_alpha.1,
            "depth": self.depth,
            "per_gen_width": self.per_gen_width,
            "gen_diameters": self.gen_diameters,
            "density_gap": self.density_gap(),
            "precision_floor": self.precision_floor,
            "nodes": nodes,
        })
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["multi_index", "generation", "x", "y"]).unwrap();
        for s in self.sequences.values() {
            for k in 0..s.offsets.len() {
                let mut idx = s.prefix.clone();
                idx.push(k as u32);
                let x = s.x(k);
                w.write_record([
                    dotted(&idx),
                    s.prefix.len().to_string(),
                    format!("{x:.17e}"),
                    format!("{:.17e}", x - self.offset),
                ])
                .unwrap();
            }
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }
}

fn widest_gap(sorted: &[f64], iv: Interval) -> Option<(f64, f64)> {
    let mut prev = iv.lo;
    let mut best: Option<(f64, f64)> = None;
    for &x in sorted.iter().chain(std::iter::once(&iv.hi)) {
        if best.map_or(true, |(a, b)| x - prev > (b - a) * (1.0 + REL_MARGIN)) {
            best = Some((prev, x));
        }
        prev = x;
    }
    best.filter(|(a, b)| b > a)
}
