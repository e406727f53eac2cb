//! The glued skew product: homoclinic point, orbits, strip successors,
//! stable-set and segment witnesses, rectangle returns and the filtration.
use snhc::central::{CentralMap, CentralMapSpec};
use snhc::domains::build_ladder;
use snhc::numeric::Interval;
use snhc::return_map::build_return_model;
use snhc::skew::{
    filtration_check, orbit, orbit_backward, perfect_segment_witness, rectangle_return, stable_q_witness,
    strip_successor, SkewConfig, SkewFamily, StripKind, StripSpec,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let t = 1e-2;
    let map = CentralMap::build(&CentralMapSpec::hyperbolic(0.95, 1.01))?;
    let fam = SkewFamily::new(&map, t, SkewConfig::default())?;
    println!("glue(0, 1, -1/2) = {:?}", fam.glue([0.0, 1.0, -0.5])?);

    let x_t = [-0.5, t, 0.0];
    let fwd = orbit(&fam, x_t, 10_000, true);
    let near = fwd.points.iter().find(|o| {
        let p = o.p;
        (p[0] * p[0] + (p[1] - 1.0).powi(2) + p[2] * p[2]).sqrt() < 1e-6
    });
    println!("x_t forward: within 1e-6 of P at step {:?}", near.map(|o| o.n));
    let back = orbit_backward(&fam, x_t, 20, true);
    for o in back.points.iter().take(5) {
        println!("  backward {:>3} {:?} {:?}", o.n, o.p, o.event);
    }

    let ladder = build_ladder(&map, t, 0.0)?;
    let model = build_return_model(&map, &ladder)?;
    let dp = model.d_plus();
    let b = model.branches[model.branches.len() / 2].interval;
    let third = Interval::new(b.at(1.0 / 3.0), b.at(2.0 / 3.0));
    let strip = StripSpec::complete(0.2, third, dp);
    let g = strip_successor(&fam, &model, &strip, StripKind::GKind)?;
    let r = strip_successor(&fam, &model, &strip, StripKind::RKind)?;
    println!("G successor: x = {:e}, y = {:?}", g.x1, g.y_interval);
    println!("R successor: x = {:e}, y = {:?}, perfect {}", r.x1, r.y_interval, r.perfect);
    let w = stable_q_witness(&fam, &model, &strip, 1000)?;
    println!("stable witness: k = {} (bound {}), G = {:e}", w.k, w.bound, w.g_value);
    match perfect_segment_witness(&fam, &model) {
        Ok(seg) => println!("perfect segment at x = {:e}, y = {:e}", seg.x1, seg.y_interval.lo),
        Err(e) => println!("perfect segment: {e}"),
    }
    let rect = rectangle_return(&fam, 0.3, 200, 1_000_000)?;
    println!("rectangle return N = {}", rect.i);
    for c in &rect.checks {
        println!("  j = {}: a = {:e}, top {:e}, contains {}", c.j, c.a, c.y_top, c.contains);
    }

    let tp = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, -1e-7))?;
    let fam = SkewFamily::new(&tp, 1e-3, SkewConfig::default())?;
    let ladder = build_ladder(&tp, 1e-3, -1e-7)?;
    let model = build_return_model(&tp, &ladder)?;
    let dp = model.d_plus();
    let strip = StripSpec::complete(0.2, Interval::new(dp.at(0.45), dp.at(0.55)), dp);
    match stable_q_witness(&fam, &model, &strip, 200) {
        Ok(w) => println!("two-parameter witness: m = {}, j = {:?}, point {:?}", w.k, w.j, w.point),
        Err(e) => println!("two-parameter witness: {e}"),
    }
    match perfect_segment_witness(&fam, &model) {
        Ok(seg) => println!("two-parameter segment at x = {:e}, y = {:e}", seg.x1, seg.y_interval.lo),
        Err(e) => println!("two-parameter segment: {e}"),
    }
    let wander = orbit_backward(&fam, [0.0, 1.5, 0.0], 10_000, false);
    println!("central coordinate 1.5, backward: exit {:?}", wander.exit);
    let filt = filtration_check(&fam, 12, 500);
    println!("filtration: {:?}", filt);
    Ok(())
}
