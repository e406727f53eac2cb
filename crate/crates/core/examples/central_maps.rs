//! Build the three central map families and print their certified data.
use snhc::central::{CentralMap, CentralMapSpec};

fn main() {
    let specs = [
        ("hyperbolic", CentralMapSpec::hyperbolic(0.95, 1.01)),
        ("saddle-node s=0", CentralMapSpec::saddle_node(0.999, 0.0)),
        ("saddle-node s=4e-4", CentralMapSpec::saddle_node(0.999, 4e-4)),
        ("two-parameter s=-1e-7", CentralMapSpec::two_param(0.999, 1.001, -1e-7)),
    ];
    for (name, spec) in specs {
        let map = CentralMap::build(&spec).expect("map builds");
        println!("{name}");
        println!("  pieces: {}", map.pieces.len());
        for p in &map.pieces {
            println!("    {:?} on [{}, {}]", p.kind, p.interval.lo, p.interval.hi);
        }
        let (dm, dmax) = map.certified_deriv_bounds;
        println!("  derivative bounds on core {:?}: [{dm:.6}, {dmax:.6}]", map.core);
        println!("  distortion K: {:.6}", map.distortion_k);
        for fp in &map.fixed_points {
            println!("  fixed point {:+.6e} slope {:.6} {:?}", fp.x, fp.slope, fp.stability);
        }
    }
}
