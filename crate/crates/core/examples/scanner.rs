//! Certify a saddle-node point, then scan the two-parameter family across s = 0.
use snhc::central::Regime;
use snhc::scanner::{cmd_certify, cmd_scan, GridSpec, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::temp_dir().join("snhc-example");
    let cfg = ScenarioConfig { output_dir: out.join("certify"), ..Default::default() };
    let certified = cmd_certify(&cfg)?;
    for row in &certified.rows {
        println!("certify t={:e}: {}", row.t, row.status());
        for c in &row.certificates {
            println!("  {:<10} {} {}", c.name, if c.pass { "pass" } else { "FAIL" }, c.detail);
        }
    }

    let mut scan = ScenarioConfig { regime: Regime::TwoParam, output_dir: out.join("scan"), ..Default::default() };
    scan.s_grid = GridSpec { min: -1e-6, max: 1e-6, count: 3, ..GridSpec::single(0.0) };
    let outcome = cmd_scan(&scan)?;
    for row in &outcome.rows {
        let c = row.classes.as_ref().expect("two-parameter rows carry a verdict");
        println!("s={:+e}: {} (code {}), counts {:?}, {}", row.s, c.verdict, c.verdict_code, c.counts, row.status());
    }
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
