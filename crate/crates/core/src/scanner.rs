//! Scenario configuration and the `certify`, `scan` and `tree` commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::central::{CentralMap, CentralMapSpec, Regime, DEFAULT_DELTA};
use crate::domains::build_ladder;
use crate::hypotheses::{check_ds, check_expansion_budget, check_sn, check_t123, contraction_l, reports_csv, HypothesisReport};
use crate::numeric::CertMode;
use crate::return_map::{build_return_model, min_expansion, transition_report};
use crate::skew::{classify_boxes, max_invariant_boxes, q_p_q_paths, BoxSet, SkewConfig, SkewFamily};
use crate::tree::{HomoclinicTree, TreeConfig};

pub const SCHEMA: &str = "v1";

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ScanError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ScanError::PreconditionFailed(_) => 1,
            ScanError::Config(_) | ScanError::Io(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, ScanError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
    /// Explicit values; when present they replace `min`/`max`/`count`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn single(v: f64) -> Self {
        GridSpec { min: v, max: v, count: 1, scale: Scale::Linear, values: None }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        if let Some(v) = &self.values {
            if v.is_empty() {
                return Err(ScanError::Config("empty grid".into()));
            }
            return Ok(v.clone());
        }
        if self.count == 0 {
            return Err(ScanError::Config("empty grid".into()));
        }
        if !(self.min <= self.max) {
            return Err(ScanError::Config(format!("grid min {} above max {}", self.min, self.max)));
        }
        if self.count == 1 {
            return Ok(vec![self.min]);
        }
        let n = (self.count - 1) as f64;
        match self.scale {
            Scale::Linear => Ok((0..self.count).map(|i| self.min + i as f64 * (self.max - self.min) / n).collect()),
            Scale::Log => {
                if !(self.min > 0.0) {
                    return Err(ScanError::Config("log grid needs min > 0".into()));
                }
                let (a, b) = (self.min.ln(), self.max.ln());
                Ok((0..self.count).map(|i| (a + i as f64 * (b - a) / n).exp()).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapParams {
    pub lambda: f64,
    pub beta: f64,
    pub delta: f64,
    pub lambda_s: f64,
    pub lambda_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    pub cap: u64,
    pub box_resolution: u32,
    pub horizon: u64,
    pub tree_depth: usize,
    pub tree_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub regime: Regime,
    pub map: MapParams,
    pub t_grid: GridSpec,
    pub s_grid: GridSpec,
    pub budgets: Budgets,
    pub output_dir: PathBuf,
    pub mode: CertMode,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            regime: Regime::SaddleNode,
            map: MapParams { lambda: 0.999, beta: 1.001, delta: DEFAULT_DELTA, lambda_s: 0.5, lambda_u: 2.0 },
            t_grid: GridSpec::single(1e-3),
            s_grid: GridSpec::single(0.0),
            budgets: Budgets { cap: 100_000_000, box_resolution: 64, horizon: 1000, tree_depth: 6, tree_width: 64 },
            output_dir: PathBuf::from("snhc-out"),
            mode: CertMode::Fast,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        self.t_grid.points()?;
        self.s_grid.points()?;
        let b = &self.budgets;
        if b.cap == 0 || b.box_resolution == 0 || b.horizon == 0 || b.tree_depth == 0 || b.tree_width == 0 {
            return Err(ScanError::Config("budgets must be positive".into()));
        }
        Ok(())
    }

    pub fn central_spec(&self, s: f64) -> CentralMapSpec {
        let s = if self.regime == Regime::Hyperbolic { 0.0 } else { s };
        CentralMapSpec::with_defaults(self.regime, self.map.lambda, self.map.beta, self.map.delta, s)
    }

    pub fn skew_config(&self) -> SkewConfig {
        SkewConfig { lambda_s: self.map.lambda_s, lambda_u: self.map.lambda_u, ..Default::default() }
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Sets `path` (dot-separated) to `raw`, read as JSON when it parses and as a
/// string otherwise.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ScanError::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ScanError::Config(format!("{path}: {key} is not inside an object")))?;
        if i + 1 == keys.len() {
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Defaults, then the JSON document at `path`, then each `key=value` override.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> Result<ScenarioConfig> {
    let mut doc = serde_json::to_value(ScenarioConfig::default()).expect("default config serializes");
    if let Some(p) = path {
        let text = fs::read_to_string(p).map_err(|e| ScanError::Config(format!("{}: {e}", p.display())))?;
        let file: Value = serde_json::from_str(&text).map_err(|e| ScanError::Config(format!("{}: {e}", p.display())))?;
        merge(&mut doc, file);
    }
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let cfg: ScenarioConfig = serde_json::from_value(doc).map_err(|e| ScanError::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub name: String,
    pub pass: bool,
    pub value: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub verdict: String,
    pub verdict_code: i32,
    pub counts: BTreeMap<String, usize>,
    pub retained: usize,
    pub q_p_q_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub t: f64,
    pub s: f64,
    pub certified: bool,
    pub certificates: Vec<Certificate>,
    #[serde(skip)]
    pub hypotheses: Vec<HypothesisReport>,
    pub ell_cert: Option<f64>,
    pub i_lo: Option<u64>,
    pub i_hi: Option<u64>,
    pub contraction_l: Option<f64>,
    pub transition_min: Option<f64>,
    pub density_gap: Option<f64>,
    pub classes: Option<ClassSummary>,
    pub errors: Vec<String>,
}

impl PointReport {
    pub fn status(&self) -> &'static str {
        if self.certified {
            "CERTIFIED"
        } else {
            "UNCERTIFIED"
        }
    }
}

fn cert(r: &HypothesisReport) -> Certificate {
    Certificate { name: r.condition.name().into(), pass: r.pass, value: Some(r.lhs), detail: format!("{:e} < {:e}", r.lhs, r.rhs) }
}

/// Mandated certificates at one parameter point: the regime's standing
/// hypotheses plus return-map expansion (two-parameter return systems exist
/// for `s < 0` only).
pub fn certify_point(cfg: &ScenarioConfig, t: f64, s: f64, with_tree: bool) -> PointReport {
    let mut rep = PointReport {
        t,
        s,
        certified: false,
        certificates: vec![],
        hypotheses: vec![],
        ell_cert: None,
        i_lo: None,
        i_hi: None,
        contraction_l: None,
        transition_min: None,
        density_gap: None,
        classes: None,
        errors: vec![],
    };
    let map = match CentralMap::build(&cfg.central_spec(s)) {
        Ok(m) => m,
        Err(e) => {
            rep.errors.push(format!("central map: {e}"));
            return rep;
        }
    };
    let mut hyp = vec![];
    let mut push = |r: std::result::Result<HypothesisReport, crate::hypotheses::HypothesisError>, label: &str, errors: &mut Vec<String>| match r {
        Ok(r) => hyp.push(r),
        Err(e) => errors.push(format!("{label}: {e}")),
    };
    let ladder = build_ladder(&map, t, s);
    match cfg.regime {
        Regime::Hyperbolic => match &ladder {
            Ok(l) => match check_t123(&map, l, cfg.mode) {
                Ok(v) => hyp.extend(v),
                Err(e) => rep.errors.push(format!("T1-T3: {e}")),
            },
            Err(e) => rep.errors.push(format!("ladder: {e}")),
        },
        Regime::SaddleNode if s == 0.0 => {
            push(check_sn(map.lambda(), map.distortion_k, cfg.mode), "SN", &mut rep.errors);
            if let Ok(l) = &ladder {
                match contraction_l(&map, l) {
                    Ok(r) => {
                        rep.contraction_l = Some(r.lhs);
                        hyp.push(r);
                    }
                    Err(e) => rep.errors.push(format!("L: {e}")),
                }
            }
        }
        Regime::SaddleNode => push(check_expansion_budget(&map, t, s, cfg.mode), "EXP_BUDGET", &mut rep.errors),
        Regime::TwoParam => push(check_ds(map.lambda(), map.beta(), map.distortion_k, cfg.mode), "DS", &mut rep.errors),
    }
    rep.certificates.extend(hyp.iter().map(cert));
    rep.hypotheses = hyp;
    let return_system = !(cfg.regime == Regime::TwoParam && s >= 0.0);
    match &ladder {
        Err(_) if !return_system => {}
        Err(e) => rep.errors.push(format!("ladder: {e}")),
        Ok(l) => match build_return_model(&map, l) {
            Err(e) => rep.errors.push(format!("return map: {e}")),
            Ok(model) => {
                rep.ell_cert = Some(model.ell_cert);
                rep.i_lo = Some(model.i_bounds.lo);
                rep.i_hi = model.i_bounds.hi;
                rep.transition_min = Some(transition_report(&model).min_deriv);
                let r = min_expansion(&model);
                rep.certificates.push(Certificate {
                    name: "EXPANSION".into(),
                    pass: r.is_ok(),
                    value: Some(model.ell_cert),
                    detail: match r {
                        Ok(v) => format!("ell_cert {v:e} above floor {:e}", model.default_floor()),
                        Err(e) => e.to_string(),
                    },
                });
            }
        },
    }
    if with_tree && cfg.regime == Regime::SaddleNode && s == 0.0 && rep.certificates.iter().any(|c| c.name == "SN" && c.pass) {
        if let Ok(l) = &ladder {
            let tc = TreeConfig { depth: cfg.budgets.tree_depth, width: cfg.budgets.tree_width, cap: cfg.budgets.cap, ..Default::default() };
            match HomoclinicTree::build(&map, l, tc) {
                Ok(tree) => rep.density_gap = Some(tree.density_gap()),
                Err(e) => rep.errors.push(format!("tree: {e}")),
            }
        }
    }
    rep.certified = rep.errors.is_empty() && !rep.certificates.is_empty() && rep.certificates.iter().all(|c| c.pass);
    rep
}

/// Box covering and class verdict at one parameter point.
pub fn classify_point(cfg: &ScenarioConfig, t: f64, s: f64) -> std::result::Result<(ClassSummary, BoxSet), String> {
    if cfg.regime == Regime::Hyperbolic {
        return Err("class verdicts need a saddle-node regime".into());
    }
    let map = CentralMap::build(&cfg.central_spec(s)).map_err(|e| e.to_string())?;
    let fam = SkewFamily::new(&map, t, cfg.skew_config()).map_err(|e| e.to_string())?;
    let h = cfg.budgets.horizon;
    let boxes = max_invariant_boxes(&fam, cfg.budgets.box_resolution, h).map_err(|e| e.to_string())?;
    let labeled = classify_boxes(&fam, &boxes, h);
    let s_point = [0.0, 0.0, 0.0];
    let verdict = labeled.verdict(s_point);
    let summary = ClassSummary {
        verdict: verdict.name().into(),
        verdict_code: verdict.code(),
        counts: labeled.counts().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        retained: labeled.boxes.len(),
        q_p_q_paths: q_p_q_paths(&fam, &labeled, h),
    };
    Ok((summary, labeled))
}

fn grid_points(cfg: &ScenarioConfig) -> Result<Vec<(f64, f64)>> {
    let ts = cfg.t_grid.points()?;
    let ss = cfg.s_grid.points()?;
    Ok(ts.iter().flat_map(|&t| ss.iter().map(move |&s| (t, s))).collect())
}

/// Worker pool capped by `SNHC_THREADS` when set.
fn pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SNHC_THREADS") {
        let n: usize = v.parse().map_err(|_| ScanError::Config(format!("SNHC_THREADS={v:?} is not a count")))?;
        if n == 0 {
            return Err(ScanError::Config("SNHC_THREADS must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| ScanError::Config(e.to_string()))
}

fn opt<T: std::fmt::LowerExp>(v: Option<T>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

pub fn rows_csv(rows: &[PointReport]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record([
        "t", "s", "status", "certificates", "ell_cert", "i_lo", "i_hi", "L", "transition_min", "density_gap", "verdict",
        "verdict_code", "errors",
    ])
    .unwrap();
    for r in rows {
        let certs: Vec<String> = r.certificates.iter().map(|c| format!("{}:{}", c.name, if c.pass { "pass" } else { "fail" })).collect();
        w.write_record([
            format!("{:e}", r.t),
            format!("{:e}", r.s),
            r.status().to_string(),
            certs.join("|"),
            opt(r.ell_cert),
            r.i_lo.map(|v| v.to_string()).unwrap_or_default(),
            r.i_hi.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.contraction_l),
            opt(r.transition_min),
            opt(r.density_gap),
            r.classes.as_ref().map(|c| c.verdict.clone()).unwrap_or_default(),
            r.classes.as_ref().map(|c| c.verdict_code.to_string()).unwrap_or_default(),
            r.errors.join("|"),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn phase_csv(rows: &[PointReport]) -> String {
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["t", "s", "verdict_code", "LAMBDA_PLUS", "LAMBDA_MINUS", "WANDERING", "UNRESOLVED"]).unwrap();
    for r in rows {
        if let Some(c) = &r.classes {
            let n = |k: &str| c.counts.get(k).copied().unwrap_or(0).to_string();
            w.write_record([
                format!("{:e}", r.t),
                format!("{:e}", r.s),
                c.verdict_code.to_string(),
                n("LAMBDA_PLUS"),
                n("LAMBDA_MINUS"),
                n("WANDERING"),
                n("UNRESOLVED"),
            ])
            .unwrap();
        }
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

fn report_json(command: &str, cfg: &ScenarioConfig, rows: &[PointReport]) -> Value {
    json!({
        "schema": SCHEMA,
        "command": command,
        "config": cfg,
        "all_certified": rows.iter().all(|r| r.certified),
        "rows": rows,
    })
}

fn write(dir: &Path, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let p = dir.join(name);
    fs::write(&p, text)?;
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub files: Vec<PathBuf>,
    pub rows: Vec<PointReport>,
}

/// Hypothesis and return-map certificates over the grid; writes `report.json`,
/// `report.csv` and `hypotheses.csv`.
pub fn cmd_certify(cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.validate()?;
    let points = grid_points(cfg)?;
    let rows: Vec<PointReport> = pool()?.install(|| points.par_iter().map(|&(t, s)| certify_point(cfg, t, s, false)).collect());
    let dir = &cfg.output_dir;
    let hyp: Vec<(String, HypothesisReport)> =
        rows.iter().flat_map(|r| r.hypotheses.iter().map(move |h| (format!("t={:e};s={:e}", r.t, r.s), h.clone()))).collect();
    let files = vec![
        write(dir, "report.json", &serde_json::to_string_pretty(&report_json("certify", cfg, &rows)).unwrap())?,
        write(dir, "report.csv", &rows_csv(&rows))?,
        write(dir, "hypotheses.csv", &reports_csv(&hyp))?,
    ];
    let exit_code = if rows.iter().all(|r| r.certified) { 0 } else { 1 };
    Ok(Outcome { exit_code, files, rows })
}

/// Certificates plus class verdicts over the grid; writes `report.json`,
/// `report.csv`, `phase.csv` and `boxes.csv`.
pub fn cmd_scan(cfg: &ScenarioConfig) -> Result<Outcome> {
    cfg.validate()?;
    let points = grid_points(cfg)?;
    let results: Vec<(PointReport, Option<BoxSet>)> = pool()?.install(|| {
        points
            .par_iter()
            .map(|&(t, s)| {
                let mut row = certify_point(cfg, t, s, false);
                let boxes = match classify_point(cfg, t, s) {
                    Ok((summary, boxes)) => {
                        row.classes = Some(summary);
                        Some(boxes)
                    }
                    Err(e) => {
                        row.errors.push(format!("classes: {e}"));
                        row.certified = false;
                        None
                    }
                };
                (row, boxes)
            })
            .collect()
    });
    let mut bw = csv::Writer::from_writer(vec![]);
    bw.write_record(["t", "s", "ix", "iy", "iz", "label"]).unwrap();
    for (row, boxes) in &results {
        if let Some(b) = boxes {
            for (idx, label) in &b.labels {
                bw.write_record([
                    format!("{:e}", row.t),
                    format!("{:e}", row.s),
                    idx.0.to_string(),
                    idx.1.to_string(),
                    idx.2.to_string(),
                    label.name().to_string(),
                ])
                .unwrap();
            }
        }
    }
    let rows: Vec<PointReport> = results.into_iter().map(|(r, _)| r).collect();
    let dir = &cfg.output_dir;
    let files = vec![
        write(dir, "report.json", &serde_json::to_string_pretty(&report_json("scan", cfg, &rows)).unwrap())?,
        write(dir, "report.csv", &rows_csv(&rows))?,
        write(dir, "phase.csv", &phase_csv(&rows))?,
        write(dir, "boxes.csv", &String::from_utf8(bw.into_inner().unwrap()).unwrap())?,
    ];
    let exit_code = if rows.iter().all(|r| r.certified) { 0 } else { 1 };
    Ok(Outcome { exit_code, files, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub depth: usize,
    pub density_gap: f64,
}

/// Builds the homoclinic tree at the first grid point (saddle-node, `s = 0`,
/// (SN) passing); writes `tree.json`, `tree.csv` and `density.csv`.
pub fn cmd_tree(cfg: &ScenarioConfig) -> Result<(Outcome, HomoclinicTree)> {
    cfg.validate()?;
    let t = cfg.t_grid.points()?[0];
    let s = cfg.s_grid.points()?[0];
    if cfg.regime != Regime::SaddleNode || s != 0.0 {
        return Err(ScanError::PreconditionFailed("the tree needs a saddle-node point with s = 0".into()));
    }
    let map = CentralMap::build(&cfg.central_spec(0.0)).map_err(|e| ScanError::PreconditionFailed(e.to_string()))?;
    let sn = check_sn(map.lambda(), map.distortion_k, cfg.mode).map_err(|e| ScanError::PreconditionFailed(e.to_string()))?;
    if !sn.pass {
        return Err(ScanError::PreconditionFailed(format!("(SN) fails: {:e} >= 1/2", sn.lhs)));
    }
    let ladder = build_ladder(&map, t, 0.0).map_err(|e| ScanError::PreconditionFailed(e.to_string()))?;
    let mut summary = vec![];
    let mut last = None;
    for depth in 1..=cfg.budgets.tree_depth {
        let tc = TreeConfig { depth, width: cfg.budgets.tree_width, cap: cfg.budgets.cap, ..Default::default() };
        let tree = HomoclinicTree::build(&map, &ladder, tc).map_err(|e| ScanError::PreconditionFailed(e.to_string()))?;
        summary.push(DensitySummary { depth, density_gap: tree.density_gap() });
        last = Some(tree);
    }
    let tree = last.expect("depth is positive");
    let checks = tree.verify_h().map_err(|e| ScanError::PreconditionFailed(e.to_string()))?;
    let mut dw = csv::Writer::from_writer(vec![]);
    dw.write_record(["depth", "density_gap"]).unwrap();
    for d in &summary {
        dw.write_record([d.depth.to_string(), format!("{:e}", d.density_gap)]).unwrap();
    }
    let mut doc = tree.to_json();
    doc["schema"] = json!(SCHEMA);
    doc["checks"] = serde_json::to_value(&checks.checks).unwrap();
    doc["density_summary"] = serde_json::to_value(&summary).unwrap();
    let dir = &cfg.output_dir;
    let files = vec![
        write(dir, "tree.json", &serde_json::to_string_pretty(&doc).unwrap())?,
        write(dir, "tree.csv", &tree.to_csv())?,
        write(dir, "density.csv", &String::from_utf8(dw.into_inner().unwrap()).unwrap())?,
    ];
    let exit_code = if checks.all_pass() { 0 } else { 1 };
    Ok((Outcome { exit_code, files, rows: vec![] }, tree))
}
