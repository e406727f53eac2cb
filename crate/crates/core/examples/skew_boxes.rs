use std::time::Instant;

use snhc::central::{CentralMap, CentralMapSpec};
use snhc::skew::{classify_boxes, max_invariant_boxes, q_p_q_paths, SkewConfig, SkewFamily};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let res: u32 = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(32);
    let horizon: u64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1000);
    for s in [1e-6, 0.0, -1e-6] {
        let clock = Instant::now();
        let map = CentralMap::build(&CentralMapSpec::two_param(0.999, 1.001, s)).unwrap();
        let fam = SkewFamily::new(&map, 1e-3, SkewConfig::default()).unwrap();
        let boxes = max_invariant_boxes(&fam, res, horizon).unwrap();
        let labeled = classify_boxes(&fam, &boxes, horizon);
        let verdict = labeled.verdict([0.0, 0.0, 0.0]);
        println!("s = {s:+e}: {} ({:.1}s)", labeled.summary_json([0.0, 0.0, 0.0]), clock.elapsed().as_secs_f64());
        println!("  verdict {} code {}", verdict.name(), verdict.code());
        println!("  Q-P-Q sample paths: {}", q_p_q_paths(&fam, &labeled, horizon));
    }
}
