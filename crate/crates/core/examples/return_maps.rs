//! Build return systems in every regime and print their certificates.
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::build_ladder;
use snhc::numeric::Interval;
use snhc::return_map::{build_return_model, full_cover_time, cover_bound, min_expansion, transition_report};

fn main() {
    let cases = [
        ("hyperbolic t=1e-2", CentralMapSpec::hyperbolic(0.95, 1.01), 1e-2, 0.0),
        ("saddle-node t=1e-3", CentralMapSpec::saddle_node(0.999, 0.0), 1e-3, 0.0),
        ("saddle-node t=1e-4", CentralMapSpec::saddle_node(0.999, 0.0), 1e-4, 0.0),
        ("post saddle-node s=1e-10 t=1e-5+1e-5", CentralMapSpec::saddle_node(0.999, 1e-10), 2e-5, 1e-10),
        ("two-parameter t=1e-3 s=-1e-7", CentralMapSpec::two_param(0.999, 1.001, -1e-7), 1e-3, -1e-7),
        ("two-parameter t=1e-5 s=-1e-11", CentralMapSpec::two_param(0.999, 1.001, -1e-11), 1e-5, -1e-11),
    ];
    for (name, spec, t, s) in cases {
        let map = CentralMap::build(&spec).expect("map");
        let ladder = build_ladder(&map, t, s).expect("ladder");
        let model = build_return_model(&map, &ladder).expect("model");
        println!("{name}");
        println!("  D+ = [{:e}, {:e}], k_t = {}", model.d_plus().lo, model.d_plus().hi, ladder.k_t);
        println!("  i bounds {:?}, truncated at {:?}, branches {}", model.i_bounds, model.truncated_at, model.branches.len());
        let tr = transition_report(&model);
        println!("  T' in [{:.4}, {:.4}], sup/inf {:.4} vs e^K {:.4}", tr.min_deriv, tr.max_deriv, tr.distortion_ratio, tr.distortion_k.exp());
        if let (Some(b), Some(lb), Some(m)) = (tr.analytic_bound, tr.length_bound, tr.meets_61) {
            println!("  transition bounds: stated {b:.4}, from |D-| {lb:.4}; T' >= 61: {m}");
        }
        match min_expansion(&model) {
            Ok(l) => println!("  ell_cert {l:.4} (floor {:.4})", model.default_floor()),
            Err(e) => println!("  {e}"),
        }
        let onto = model.branches.iter().filter(|b| b.image.is_some()).filter(|b| b.onto).count();
        for (p, b) in model.branches.iter().enumerate().filter(|(_, b)| b.image.is_some() && !b.onto) {
            println!("    not onto: position {p} index {} image {:?}", b.index, b.image.unwrap());
        }
        let checked = model.branches.iter().filter(|b| b.image.is_some()).count();
        println!("  onto among sampled branches: {onto}/{checked}, max image error {:.2e}", model.max_image_error);
        if model.i_bounds.hi.is_some() {
            let b = model.branches[model.branches.len() / 2].interval;
            let j = Interval::new(b.lo, b.at(0.1));
            match full_cover_time(&model, j, 200) {
                Ok(m) => println!("  full cover of a tenth-branch in {m} steps (bound {})", cover_bound(&model, j)),
                Err(e) => println!("  full cover: {e}"),
            }
        }
    }
}
