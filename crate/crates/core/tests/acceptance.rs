//! Scenario gate: runs every end-to-end verification scenario and prints
//! one PASS/FAIL line per scenario. Run with `--nocapture` to see the
//! lines on success too.

use varslide::acceptance;

#[test]
fn scenario_gate() {
    let results = acceptance::run_all();
    let mut failed = Vec::new();
    for r in &results {
        println!(
            "{} {} ({:.2}s): {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        if !r.pass {
            failed.push(r.name);
        }
    }
    assert!(failed.is_empty(), "failing scenarios: {failed:?}");
}
