//! Builds the homoclinic tree at λ = 0.999, t = 1e−3 and reports (H1)–(H6),
//! diameters, density and a bracket walk.
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::build_ladder;
use snhc::tree::{HomoclinicTree, TreeConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let map = CentralMap::build(&CentralMapSpec::saddle_node(0.999, 0.0))?;
    let ladder = build_ladder(&map, 1e-3, 0.0)?;
    for (depth, width) in [(6, 64), (8, 64)] {
        let start = std::time::Instant::now();
        let tree = HomoclinicTree::build(&map, &ladder, TreeConfig { depth, width, ..Default::default() })?;
        let report = tree.verify_h()?;
        println!("depth {depth} width {width}: {} nodes, {} generations, {:.2?}", tree.node_count(), tree.depth, start.elapsed());
        for c in &report.checks {
            println!("  {:<10} {} ({})", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
        }
        println!("  density gap {:.4e}", tree.density_gap());
        if let Some(f) = &tree.precision_floor {
            println!("  precision floor at generation {}: {:e} < {:e}", f.generation, f.diameter, f.floor);
        }
    }
    let tree = HomoclinicTree::build(&map, &ladder, TreeConfig { depth: 3, width: 16, ..Default::default() })?;
    let probe = ladder.delta_chain[0].at(0.37);
    let walk = tree.bracket_walk(probe, 8)?;
    println!("bracket walk for {probe:e}: index {:?}", walk.index);
    for b in &walk.brackets {
        println!("  ({:.17e}, {:.17e}) width {:e}", b.lo, b.hi, b.hi - b.lo);
    }
    Ok(())
}
