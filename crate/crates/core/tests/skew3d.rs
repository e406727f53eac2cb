mod common;

use common::{canon_h, canon_tp, model, naive_iterate};
use snhc::numeric::Interval;
use snhc::skew::{
    classify_boxes, filtration_check, max_invariant_boxes, orbit, orbit_backward, perfect_segment_witness,
    q_p_q_paths, rectangle_return, stable_q_witness, strip_successor, BoxLabel, Event, SkewConfig, SkewError,
    SkewFamily, StripKind, StripSpec, Verdict,
};

fn hyp(t: f64) -> SkewFamily {
    SkewFamily::new(&canon_h(), t, SkewConfig::default()).unwrap()
}

fn tp(s: f64, t: f64) -> SkewFamily {
    SkewFamily::new(&canon_tp(s), t, SkewConfig::default()).unwrap()
}

#[test]
fn glue_is_an_exact_translation() {
    let fam = hyp(0.01);
    assert_eq!(fam.glue([0.0, 1.0, -0.5]).unwrap(), [-0.5, 0.01, 0.0]);
    assert_eq!(fam.glue([0.01, 0.99, -0.49]).unwrap(), [0.01 - 0.5, (0.99 - 1.0) + 0.01, -0.49 + 0.5]);
    let zero = hyp(0.0);
    assert_eq!(zero.glue([0.0, 1.0, -0.5]).unwrap(), [-0.5, 0.0, 0.0]);
    assert!(matches!(fam.glue([0.0, 1.0, 0.0]), Err(SkewError::OutsideGlueWindow(_))));
    let p = [0.02, 1.01, -0.47];
    let back = fam.unglue(fam.glue(p).unwrap()).unwrap();
    for i in 0..3 {
        assert!((back[i] - p[i]).abs() < 1e-15);
    }
}

#[test]
fn homoclinic_point_reaches_p() {
    let fam = hyp(0.01);
    let x_t = [-0.5, 0.01, 0.0];
    let rec = orbit(&fam, x_t, 10_000, true);
    assert!(rec.exit.is_none());
    let near = rec.points.iter().position(|o| {
        let p = o.p;
        (p[0].powi(2) + (p[1] - 1.0).powi(2) + p[2].powi(2)).sqrt() < 1e-6
    });
    assert!(near.is_some());
    let n = rec.points[near.unwrap()].n as u64;
    let y = naive_iterate(&fam.central, 0.01, n);
    assert!((rec.points[near.unwrap()].p[1] - y).abs() < 1e-15);
}

#[test]
fn homoclinic_point_backward_is_the_glued_unstable_axis() {
    let fam = hyp(0.01);
    let rec = orbit_backward(&fam, [-0.5, 0.01, 0.0], 60, true);
    assert_eq!(rec.points[1].event, Event::Glue);
    assert_eq!(rec.points[1].n, -(fam.k0 as i64));
    assert_eq!(rec.points[1].p, [0.0, 1.0, -0.5]);
    let mut z = -0.5;
    for o in &rec.points[2..] {
        z /= fam.lambda_u;
        assert_eq!(o.p[1], 1.0);
        assert_eq!(o.p[2], z);
    }
    assert!(rec.exit.is_none());
}

#[test]
fn strip_successors() {
    let map = canon_h();
    let fam = hyp(0.01);
    let (ladder, m) = model(&map, 0.01, 0.0);
    let dp = m.d_plus();
    let b = m.branches[m.branches.len() / 2].interval;
    let third = Interval::new(b.at(1.0 / 3.0), b.at(2.0 / 3.0));
    let strip = StripSpec::complete(0.2, third, dp);
    let g = strip_successor(&fam, &m, &strip, StripKind::GKind).unwrap();
    assert_eq!(g.x1, 0.5f64.powi(ladder.k_t as i32) * 0.2 - 0.5);
    assert!(g.complete && g.y_interval.lo < g.y_interval.hi);
    let r = strip_successor(&fam, &m, &strip, StripKind::RKind).unwrap();
    assert!(r.perfect && dp.contains(r.y_interval.lo) && dp.contains(r.y_interval.hi));
    assert!(r.y_interval.len() > strip.y_interval.len());

    let d = m.discontinuities[3].x;
    let across = StripSpec::complete(0.2, Interval::new(d - 1e-3 * dp.len(), d + 1e-3 * dp.len()), dp);
    assert!(matches!(strip_successor(&fam, &m, &across, StripKind::RKind), Err(SkewError::CrossesDiscontinuity { .. })));
    let mut imperfect = strip.clone();
    imperfect.perfect = false;
    assert!(matches!(strip_successor(&fam, &m, &imperfect, StripKind::GKind), Err(SkewError::NotPerfect(_))));
}

#[test]
fn stable_witness_within_bound() {
    let map = canon_h();
    let fam = hyp(0.01);
    let (_, m) = model(&map, 0.01, 0.0);
    let dp = m.d_plus();
    let full = StripSpec::complete(0.2, dp, dp);
    let w = stable_q_witness(&fam, &m, &full, 1000).unwrap();
    assert!(w.k <= 1);
    assert!(w.g_value.abs() <= 1e-12 * 0.01);
    let b = m.branches[m.branches.len() / 2].interval;
    let third = StripSpec::complete(0.2, Interval::new(b.at(1.0 / 3.0), b.at(2.0 / 3.0)), dp);
    let w = stable_q_witness(&fam, &m, &third, 1000).unwrap();
    assert!(w.k <= w.bound, "{} > {}", w.k, w.bound);
}

#[test]
fn perfect_segment_interior_and_accumulation() {
    let map = canon_h();
    let t = 0.01;
    let fam = hyp(t);
    let (_, m) = model(&map, t, 0.0);
    let seg = perfect_segment_witness(&fam, &m).unwrap();
    let dp = m.d_plus();
    assert!(seg.perfect && dp.lo < seg.y_interval.lo && seg.y_interval.lo < dp.hi);

    let index_at = |t: f64| {
        let (_, m) = model(&map, t, 0.0);
        m.i_of_x(t / map.beta()).ok()
    };
    let (mut lo, mut hi) = (0.0099, 0.0101);
    let i_lo = index_at(lo).unwrap();
    assert_ne!(Some(i_lo), index_at(hi));
    let mut tuned = vec![];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        match index_at(mid) {
            None => {
                tuned.push(mid);
                break;
            }
            Some(i) if i == i_lo => lo = mid,
            Some(_) => hi = mid,
        }
    }
    tuned.extend([lo, hi]);
    let outcomes: Vec<_> = tuned
        .iter()
        .map(|&t| {
            let fam = hyp(t);
            let (_, m) = model(&map, t, 0.0);
            perfect_segment_witness(&fam, &m)
        })
        .collect();
    assert!(outcomes.iter().any(|o| matches!(o, Err(SkewError::AccumulationNeeded { .. }))), "{outcomes:?}");
}

#[test]
fn rectangle_return_time_matches_naive_search() {
    let fam = hyp(0.01);
    let n = 200u64;
    let r = rectangle_return(&fam, 0.3, n, 1_000_000).unwrap();
    let h = 1.0 / n as f64;
    let mut y = h;
    let mut i = 0;
    while !(y > 1.0 - 0.01 + h && y < 1.0) {
        y = fam.central.eval(y).unwrap();
        i += 1;
    }
    assert_eq!(r.i, i);
    assert_eq!(r.checks.len(), 3);
    for c in &r.checks {
        assert_eq!(c.a, 0.5f64.powi((r.i + c.j) as i32) * 0.3 - 0.5);
    }
    assert!(matches!(rectangle_return(&fam, 0.3, 50, 1_000_000), Err(SkewError::PreconditionFailed(_))));
}

#[test]
fn filtration_holds() {
    let fam = tp(-1e-7, 1e-3);
    let f = filtration_check(&fam, 8, 300);
    assert!(f.holds && f.samples == 512);
    let wander = orbit_backward(&fam, [0.0, 1.5, 0.0], 10_000, false);
    assert_eq!(wander.exit.unwrap().face, "y+");
    let forward = orbit(&fam, [0.0, 1.5, 0.0], 10_000, false);
    assert!(forward.exit.is_none());
}

#[test]
fn box_covering_nests_and_keeps_saddles() {
    let fam = tp(-1e-6, 1e-3);
    let coarse = max_invariant_boxes(&fam, 16, 300).unwrap();
    let fine = max_invariant_boxes(&fam, 32, 300).unwrap();
    for b in &fine.boxes {
        assert!(coarse.boxes.contains(&(b.0 / 2, b.1 / 2, b.2 / 2)), "{b:?}");
    }
    for name in ["P", "Q"] {
        let p = fam.saddles[name];
        assert!(fine.boxes.iter().any(|&b| fine.contains_point(b, p)), "{name}");
    }
    assert!(matches!(max_invariant_boxes(&fam, 24, 300), Err(SkewError::PreconditionFailed(_))));
}

#[test]
fn three_phases() {
    let mut seen = vec![];
    for s in [1e-6, 0.0, -1e-6] {
        let fam = tp(s, 1e-3);
        let boxes = max_invariant_boxes(&fam, 64, 1000).unwrap();
        let labeled = classify_boxes(&fam, &boxes, 1000);
        assert_eq!(q_p_q_paths(&fam, &boxes, 1000), 0);
        seen.push(labeled.verdict([0.0, 0.0, 0.0]));
    }
    assert_eq!(seen, vec![Verdict::Disjoint, Verdict::TouchAtS, Verdict::Merged]);
}

#[test]
fn wide_gap_is_wandering() {
    let fam = tp(0.01, 1e-3);
    let boxes = max_invariant_boxes(&fam, 32, 500).unwrap();
    let labeled = classify_boxes(&fam, &boxes, 500);
    assert!(labeled.labels.values().any(|&l| l == BoxLabel::Wandering));
    for (&b, &l) in &labeled.labels {
        if l == BoxLabel::LambdaPlus {
            assert!(labeled.bounds(b)[1].hi > 0.1);
        }
    }
    assert_eq!(labeled.verdict([0.0, 0.0, 0.0]), Verdict::Disjoint);
}
