//! The eleven acceptance criteria, run in order on one thread so that the
//! wall-time budgets are measured without interference. Prints one line per
//! criterion and fails at the end if any criterion failed.

use std::io::Write;

use gperm::experiments::{run, Outcome, EXPERIMENTS};

/// Tolerances pinned here independently of the defaults table: a record may
/// be stricter than its pin, never looser.
fn pinned_tolerance(id: usize, statistic: &str) -> f64 {
    match (id, statistic) {
        (1, _) => 1e-12,
        (2, s) if s.starts_with("|sum") => 1e-12,
        (2, _) => 0.01,
        (3, _) => 1e-13,
        (4, _) => 1e-6,
        (5, _) => 1e-4,
        (6, s) if s.starts_with("|2 int") => 1e-6,
        (6, _) => 0.01,
        (7, "median lln distance") => f64::INFINITY,
        (8, "sup |h - logistic|") => f64::INFINITY,
        (9, s) if s.starts_with("KS(U") => 0.02,
        (9, _) => 0.03,
        (10, _) => 5.0,
        (11, s) if s.starts_with("max |width") => 0.25 + f64::EPSILON,
        _ => 1.0,
    }
}

fn line(o: &Outcome) -> String {
    let head = o
        .headline()
        .map(|r| format!("{} {} = {:.3e} (tol {:.1e})", r.model, r.statistic, r.value, r.tolerance))
        .unwrap_or_default();
    format!(
        "criterion {:>2} {} {:<52} | {} | {:.2}s of {:.0}s",
        o.id,
        if o.pass() && o.within_budget() { "PASS" } else { "FAIL" },
        o.title,
        head,
        o.elapsed_seconds,
        o.budget_seconds
    )
}

#[test]
fn acceptance_criteria() {
    rayon::ThreadPoolBuilder::new().num_threads(1).build_global().ok();
    let mut failed = Vec::new();
    for &(id, _, _) in EXPERIMENTS.iter() {
        let outcome = run(id, 0).expect("experiment runs");
        for r in &outcome.records {
            let pin = pinned_tolerance(id, &r.statistic);
            assert!(r.tolerance <= pin, "criterion {id}: {} tolerance {} looser than {pin}", r.statistic, r.tolerance);
        }
        // written past the test harness's capture so the lines show in a
        // plain `cargo test` run
        let mut out = std::io::stdout().lock();
        writeln!(out, "{}", line(&outcome)).unwrap();
        for r in outcome.records.iter().filter(|r| !r.pass) {
            writeln!(out, "    failed: {} {} = {:e} (tol {:e})", r.model, r.statistic, r.value, r.tolerance).unwrap();
        }
        out.flush().unwrap();
        if !(outcome.pass() && outcome.within_budget()) {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
