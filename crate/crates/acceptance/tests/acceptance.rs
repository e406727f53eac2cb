//! One test per acceptance criterion; each prints a PASS/FAIL line.
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::{build_ladder, check_length_ratios, lambda_alpha_bound, DomainLadder};
use snhc::hypotheses::{check_sn, check_t123, contraction_l, Condition};
use snhc::numeric::{CertMode, Interval};
use snhc::return_map::{
    build_return_model, cover_bound, full_cover_time, hit_bound, hit_discontinuity, transition_report, ReturnMapModel,
    Side,
};
use snhc::scanner::{cmd_scan, GridSpec, ScenarioConfig};
use snhc::skew::{classify_boxes, max_invariant_boxes, orbit, q_p_q_paths, stable_q_witness, SkewConfig, SkewFamily, StripSpec, Verdict};
use snhc::tree::{HomoclinicTree, TreeConfig};

fn report(n: u32, pass: bool, detail: String) {
    let line = format!("ACCEPTANCE {n} {}: {detail}", if pass { "PASS" } else { "FAIL" });
    writeln!(std::io::stdout(), "{line}").unwrap();
    assert!(pass, "{line}");
}

fn canon_h() -> CentralMap {
    CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap()
}

fn canon_sn() -> CentralMap {
    CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap()
}

fn model(map: &CentralMap, t: f64, s: f64) -> (DomainLadder, ReturnMapModel) {
    let ladder = build_ladder(map, t, s).unwrap();
    let model = build_return_model(map, &ladder).unwrap();
    (ladder, model)
}

/// `4 e^K (1 − λ) / λ⁶` factor by factor.
fn sn_oracle(lambda: f64, k: f64) -> f64 {
    (0..6).fold(4.0 * k.exp() * (1.0 - lambda), |v, _| v / lambda)
}

#[test]
fn criterion_01_hypothesis_arithmetic() {
    let pass_sn = check_sn(0.999, 2.0, CertMode::Fast).unwrap();
    let fail_sn = check_sn(0.95, 2.0, CertMode::Fast).unwrap();
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let map = canon_h();
    let ladder = build_ladder(&map, 0.01, 0.0).unwrap();
    let t123 = check_t123(&map, &ladder, CertMode::Fast).unwrap();
    let t2 = t123.iter().find(|r| r.condition == Condition::T2).unwrap();
    let t3 = t123.iter().find(|r| r.condition == Condition::T3).unwrap();
    let ok = pass_sn.pass
        && rel(pass_sn.lhs, sn_oracle(0.999, 2.0)) < 1e-6
        && (pass_sn.lhs - 0.0297).abs() < 1e-4
        && !fail_sn.pass
        && rel(fail_sn.lhs, sn_oracle(0.95, 2.0)) < 1e-6
        && (fail_sn.lhs - 2.01).abs() < 1e-2
        && (t3.rhs - 2.375).abs() < 1e-9
        && t2.pass;
    report(
        1,
        ok,
        format!("SN lhs {:.6} / {:.6}, ell {:.12}, T2 {}", pass_sn.lhs, fail_sn.lhs, t3.rhs, t2.pass),
    );
}

#[test]
fn criterion_02_transition_expansion() {
    let ell = (1.0 - 0.95) * 0.95 / (2.0 * (1.01 - 1.0));
    let mut mins = vec![];
    for t in [1e-2, 1e-3, 1e-4] {
        let (_, m) = model(&canon_h(), t, 0.0);
        mins.push(transition_report(&m).min_deriv);
    }
    let ok = mins.iter().all(|&d| d - ell > 0.0);
    report(2, ok, format!("min T' {mins:?} vs ell {ell}"));
}

#[test]
fn criterion_03_bounded_distortion() {
    let mut rows = vec![];
    for t in [1e-2, 1e-3, 1e-4] {
        let (_, m) = model(&canon_h(), t, 0.0);
        let r = transition_report(&m);
        let k = m.map.distortion_k;
        let ok = r.distortion_ratio <= k.exp() && 1.0 / r.distortion_ratio >= (-k).exp();
        rows.push((t, r.distortion_ratio, k, ok));
    }
    report(3, rows.iter().all(|r| r.3), format!("(t, sup/inf, K, ok) {rows:?}"));
}

#[test]
fn criterion_04_saddle_node_geometry() {
    let map = canon_sn();
    let mut ok = true;
    let mut detail = vec![];
    for t in [1e-3, 1e-4] {
        let (ladder, m) = model(&map, t, 0.0);
        let i0 = m.i_bounds.lo;
        let worst_g = m
            .discontinuities
            .iter()
            .map(|d| m.g_map(m.return_step_side(d.x, Side::Left).unwrap().y).unwrap().abs())
            .fold(0.0f64, f64::max);
        let alpha = ladder.alpha_t.unwrap_or(0);
        let la = lambda_alpha_bound(&ladder);
        let ratios = check_length_ratios(&ladder);
        let l = contraction_l(&map, &ladder).unwrap();
        let here = i0 >= 1 && worst_g <= 1e-8 * t && alpha >= 1 && la.pass && ratios.pass && l.lhs < 0.5;
        ok &= here;
        detail.push(format!(
            "t={t:e}: i0 {i0}, {} discontinuities, max|G| {worst_g:.2e}, alpha {alpha}, ratios {}, L {:.4}",
            m.discontinuities.len(),
            ratios.pass,
            l.lhs
        ));
    }
    report(4, ok, detail.join("; "));
}

#[test]
fn criterion_05_homoclinic_tree() {
    let map = canon_sn();
    let ladder = build_ladder(&map, 1e-3, 0.0).unwrap();
    let six = HomoclinicTree::build(&map, &ladder, TreeConfig { depth: 6, width: 64, ..Default::default() }).unwrap();
    let checks = six.verify_h().unwrap();
    let d = &six.gen_diameters;
    let halving = d.iter().enumerate().all(|(m, &dm)| dm <= d[0] * 0.5f64.powi(m as i32));
    let gap6 = six.density_gap();
    let eight = HomoclinicTree::build(&map, &ladder, TreeConfig { depth: 8, width: 64, ..Default::default() }).unwrap();
    let gap8 = eight.density_gap();
    let failing: Vec<&str> = checks.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    let ok = checks.all_pass() && six.depth == 6 && halving && gap6 <= 1e-2 && gap8 < gap6;
    report(
        5,
        ok,
        format!(
            "failing checks {failing:?}, halving {halving}, gap depth 6 {gap6:.3e}, gap depth 8 {gap8:.3e} (realized depth {}, floor {:?})",
            eight.depth,
            eight.precision_floor.as_ref().map(|f| f.generation)
        ),
    );
}

#[test]
fn criterion_06_two_parameter_return_system() {
    let (t, s) = (1e-3, -1e-7);
    let map = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, s)).unwrap();
    let (_, m) = model(&map, t, s);
    let tr = transition_report(&m);
    let br = m.branches[m.branches.len() / 2].interval;
    let tenth = Interval::new(br.lo, br.at(0.1));
    let bound = cover_bound(&m, tenth);
    let cover = full_cover_time(&m, tenth, 1000);
    let cover_ok = matches!(cover, Ok(k) if k <= bound);
    let ok = tr.meets_61 == Some(true) && m.ell_cert >= 3.0 && cover_ok;
    report(
        6,
        ok,
        format!(
            "min T' {:.3} (>= 61: {:?}, analytic bound {:.3e}), ell_cert {:.3}, tenth-branch cover {:?} vs bound {bound}",
            tr.min_deriv, tr.meets_61, tr.analytic_bound.unwrap_or(f64::NAN), m.ell_cert, cover
        ),
    );
}

#[test]
fn criterion_07_covering_bound() {
    let (_, m) = model(&canon_h(), 0.01, 0.0);
    let br = m.branches[m.branches.len() / 2].interval;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut good = 0;
    let mut worst = (0u64, 0u64);
    for _ in 0..100 {
        let frac = 10f64.powf(rng.gen_range(-6.0..0.0));
        let start = rng.gen_range(0.0..1.0 - frac);
        let j = Interval::new(br.at(start), br.at(start + frac));
        let bound = hit_bound(&m, j);
        if let Ok(h) = hit_discontinuity(&m, j, 10_000) {
            if h.k <= bound && j.contains(h.x) {
                good += 1;
            }
            if h.k > worst.0 {
                worst = (h.k, bound);
            }
        }
    }
    report(7, good == 100, format!("{good}/100 within bound, deepest k {} (bound {})", worst.0, worst.1));
}

#[test]
fn criterion_08_skew_witnesses() {
    let t = 0.01;
    let map = canon_h();
    let fam = SkewFamily::new(&map, t, SkewConfig::default()).unwrap();
    let glued = fam.glue([0.0, 1.0, -0.5]).unwrap();
    let exact = glued == [-0.5, t, 0.0];
    let rec = orbit(&fam, [-0.5, t, 0.0], 10_000, true);
    let reach = rec
        .points
        .iter()
        .find(|o| (o.p[0].powi(2) + (o.p[1] - 1.0).powi(2) + o.p[2].powi(2)).sqrt() < 1e-6)
        .map(|o| o.n);
    let (_, m) = model(&map, t, 0.0);
    let dp = m.d_plus();
    let b = m.branches[m.branches.len() / 2].interval;
    let strip = StripSpec::complete(0.2, Interval::new(b.at(1.0 / 3.0), b.at(2.0 / 3.0)), dp);
    let w = stable_q_witness(&fam, &m, &strip, 1000).unwrap();
    let bound = hit_bound(&m, strip.y_interval);
    let ok = exact && reach.is_some() && w.k <= bound;
    report(8, ok, format!("glue {glued:?}, within 1e-6 of P at step {reach:?}, witness k {} (bound {bound})", w.k));
}

#[test]
fn criterion_09_three_phases() {
    let map = |s| CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, s)).unwrap();
    let mut verdicts = vec![];
    let mut paths = 0;
    let mut adjacency_at_s = true;
    for s in [1e-6, 0.0, -1e-6] {
        let fam = SkewFamily::new(&map(s), 1e-3, SkewConfig::default()).unwrap();
        let boxes = max_invariant_boxes(&fam, 64, 1000).unwrap();
        let labeled = classify_boxes(&fam, &boxes, 1000);
        let v = labeled.verdict([0.0, 0.0, 0.0]);
        if s == 0.0 {
            paths = q_p_q_paths(&fam, &boxes, 1000);
            let near_s = |b: (u32, u32, u32)| labeled.bounds(b).iter().all(|iv| iv.lo - iv.len() <= 0.0 && iv.hi + iv.len() >= 0.0);
            adjacency_at_s = labeled.plus_minus_adjacency().iter().all(|&(a, b)| near_s(a) && near_s(b));
        }
        verdicts.push(v);
    }
    let ok = verdicts == [Verdict::Disjoint, Verdict::TouchAtS, Verdict::Merged] && paths == 0 && adjacency_at_s;
    report(
        9,
        ok,
        format!("{:?}, Q-P-Q paths at s = 0: {paths}", verdicts.iter().map(|v| v.name()).collect::<Vec<_>>()),
    );
}

#[test]
fn criterion_10_determinism() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut cfg = ScenarioConfig { regime: snhc::central::Regime::TwoParam, ..Default::default() };
    cfg.s_grid = GridSpec { values: Some(vec![1e-6, 0.0, -1e-6]), ..cfg.s_grid.clone() };
    for d in &dirs {
        cfg.output_dir = d.path().to_path_buf();
        cmd_scan(&cfg).unwrap();
    }
    let mut same = vec![];
    for f in ["report.csv", "phase.csv", "boxes.csv"] {
        let a = std::fs::read(dirs[0].path().join(f)).unwrap();
        let b = std::fs::read(dirs[1].path().join(f)).unwrap();
        same.push((f, !a.is_empty() && a == b));
    }
    report(10, same.iter().all(|x| x.1), format!("byte-identical {same:?}"));
}
