mod common;

use common::{canon_sn, naive_iterate};
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::build_ladder;
use snhc::tree::{algo2_lift, HomoclinicTree, TreeConfig, TreeError};

fn tree(depth: usize, width: usize) -> HomoclinicTree {
    let map = canon_sn();
    let ladder = build_ladder(&map, 1e-3, 0.0).unwrap();
    HomoclinicTree::build(&map, &ladder, TreeConfig { depth, width, ..Default::default() }).unwrap()
}

#[test]
fn properties_hold_through_depth_five() {
    let t = tree(5, 64);
    assert_eq!(t.depth, 5);
    let r = t.verify_h().unwrap();
    for c in &r.checks {
        assert!(c.pass, "{} failed: {}", c.name, c.detail);
    }
    for name in ["H1", "H2", "H3", "H4", "H5", "H6", "RECURRENCE"] {
        assert!(r.get(name).is_some(), "{name} missing");
    }
}

#[test]
fn root_generation_matches_naive_iteration() {
    let map = canon_sn();
    let ladder = build_ladder(&map, 1e-3, 0.0).unwrap();
    let t = HomoclinicTree::new(&map, &ladder, TreeConfig { depth: 1, width: 16, ..Default::default() }).unwrap();
    let (k, a) = t.kappa_alpha;
    let root = t.generation(0).next().unwrap();
    for i in 0..16 {
        let naive = (1e-3 - 1.0) + naive_iterate(&map, 1e-3, k + a + i as u64);
        assert!((root.x(i) - naive).abs() < 1e-12, "{i}: {} vs {naive}", root.x(i));
    }
    assert!(root.offsets.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(root.limit, 1e-3);
}

#[test]
fn wrong_offset_breaks_the_domain_property() {
    let map = canon_sn();
    let ladder = build_ladder(&map, 1e-3, 0.0).unwrap();
    let cfg = TreeConfig { depth: 1, width: 16, ..Default::default() };
    let bad = HomoclinicTree::with_offset(&map, &ladder, cfg, 1e-3).unwrap();
    assert!(!bad.verify_h().unwrap().get("H1").unwrap().pass);
    let good = HomoclinicTree::with_offset(&map, &ladder, cfg, 1e-3 - 1.0).unwrap();
    assert!(good.verify_h().unwrap().get("H1").unwrap().pass);
}

#[test]
fn density_gap_shrinks_with_depth() {
    let gaps: Vec<f64> = (1..=4).map(|d| tree(d, 64).density_gap()).collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[0] <= 1.0 && gaps[3] < 1e-2);
}

#[test]
fn diameters_halve_per_generation() {
    let t = tree(5, 64);
    let d = &t.gen_diameters;
    for (m, w) in d.iter().enumerate() {
        assert!(*w <= d[0] * 0.5f64.powi(m as i32) * (1.0 + 1e-12));
    }
}

#[test]
fn bracket_walk_nests() {
    let t = tree(3, 16);
    let probe = t.delta0().at(0.37);
    let walk = t.bracket_walk(probe, 8).unwrap();
    assert!(!walk.brackets.is_empty());
    assert_eq!(walk.index.len(), walk.brackets.len());
    for b in &walk.brackets {
        assert!(b.lo <= probe && probe <= b.hi, "{walk:?}");
    }
    for w in walk.brackets.windows(2) {
        assert!(w[1].hi - w[1].lo < w[0].hi - w[0].lo);
    }
    let outside = t.delta0().hi + 1e-3;
    assert!(matches!(t.bracket_walk(outside, 4), Err(TreeError::PreconditionFailed(_))));
}

#[test]
fn node_values_agree_with_storage() {
    let t = tree(3, 16);
    for s in t.sequences.values() {
        for k in [0usize, 5, 15] {
            let mut idx = s.prefix.clone();
            idx.push(k as u32);
            let (lim, off) = t.node_value(&idx).unwrap();
            let stored = s.x(k);
            assert!(((lim + off) - stored).abs() <= 1e-12 * stored.abs(), "{idx:?}");
        }
    }
}

#[test]
fn tree_requires_sn() {
    let map = CentralMap::build(&CentralMapSpec::saddle_node(0.95, 0.0)).unwrap();
    let ladder = build_ladder(&map, 1e-3, 0.0).unwrap();
    assert!(matches!(HomoclinicTree::new(&map, &ladder, TreeConfig::default()), Err(TreeError::PreconditionFailed(_))));
    let h = common::canon_h();
    let ladder = build_ladder(&h, 0.01, 0.0).unwrap();
    assert!(matches!(HomoclinicTree::new(&h, &ladder, TreeConfig::default()), Err(TreeError::PreconditionFailed(_))));
}

#[test]
fn lift_lands_back_in_the_window() {
    let map = canon_sn();
    let t = 1e-3;
    let lift = algo2_lift(&map, 0.2, 5e-4, 2000, t, Some(0.5));
    match lift {
        Ok(l) => {
            assert!(l.y_prime > 0.0 && l.y_prime < t);
            assert!((l.x_bar - (0.5f64.powi(2000) * 0.2 - 0.5)).abs() < 1e-15);
        }
        Err(e) => assert!(matches!(e, TreeError::WindowViolated { .. })),
    }
    assert!(matches!(algo2_lift(&map, 0.0, 2e-3, 10, t, None), Err(TreeError::PreconditionFailed(_))));
    assert!(matches!(algo2_lift(&map, 0.0, 5e-4, 1, t, None), Err(TreeError::WindowViolated { .. })));
}
