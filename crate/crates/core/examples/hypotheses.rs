//! Certify the standing conditions at the canonical parameter points.
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::build_ladder;
use snhc::hypotheses::{
    budget_k, budget_tau_window, check_ds, check_expansion_budget, check_sn, check_t123, contraction_l, reports_csv,
};
use snhc::numeric::CertMode;

fn main() {
    let mut rows = Vec::new();

    let h = CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01)).unwrap();
    let lh = build_ladder(&h, 0.01, 0.0).unwrap();
    for r in check_t123(&h, &lh, CertMode::Directed).unwrap() {
        rows.push(("hyperbolic".to_string(), r));
    }

    let sn = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0)).unwrap();
    rows.push(("sn K=2".into(), check_sn(0.999, 2.0, CertMode::Directed).unwrap()));
    rows.push(("sn lambda=0.95".into(), check_sn(0.95, 2.0, CertMode::Fast).unwrap()));
    rows.push(("sn map".into(), check_sn(0.999, sn.distortion_k, CertMode::Fast).unwrap()));
    let ls = build_ladder(&sn, 1e-3, 0.0).unwrap();
    rows.push(("sn t=1e-3".into(), contraction_l(&sn, &ls).unwrap()));

    let tp = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, -1e-7)).unwrap();
    let ktp = tp.distortion_on(snhc::numeric::Interval::new(-1.0, 1.0));
    rows.push(("two-parameter".into(), check_ds(0.999, 1.001, ktp, CertMode::Directed).unwrap()));

    let post = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 1e-10)).unwrap();
    let k = budget_k(&post);
    let tau = budget_tau_window(0.999, k, 1e-10).unwrap();
    println!("budget K over the domain {k:.4}; passing tau window at s=1e-10: (0, {tau:.3e})");
    rows.push(("post s=1e-10 tau=1e-5".into(), check_expansion_budget(&post, 1e-5 + 1e-5, 1e-10, CertMode::Directed).unwrap()));
    let post8 = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 1e-8)).unwrap();
    rows.push(("post s=1e-8 tau=1e-5".into(), check_expansion_budget(&post8, 1e-4 + 1e-5, 1e-8, CertMode::Fast).unwrap()));

    for (p, r) in &rows {
        println!("{p:>24} {:>10} lhs {:.6e} rhs {:.6e} pass {}", r.condition.name(), r.lhs, r.rhs, r.pass);
        for (k, v) in &r.notes {
            println!("{:>36} {k} = {v:.6e}", "");
        }
    }
    print!("{}", reports_csv(&rows));
}
