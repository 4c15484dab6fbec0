//! Runs every verification check once and reports one line per criterion.
//!
//! The tree product column is not monotone on any window we can evaluate
//! exactly (see the README), so `tree_product_monotone` is allowed to fail;
//! every other check must pass.

use std::collections::BTreeMap;

use hyperperc_cli::suites::{checks, run_check, CheckResult, SUITES};

const CRITERIA: [&str; 15] = [
    "tree closed forms match their summation twins",
    "q-threshold attainment on the tree",
    "walk two-point spectral bound and MC agreement",
    "branching sum at most one below p_c",
    "cluster-size tail exponent",
    "susceptibility identity and derivative",
    "Cheeger sandwich",
    "growth rate vs dense norm, diagram bound",
    "duality and interpolation of q-norms",
    "p_c estimation on trees",
    "MC vs oracle matrix",
    "hyperbolic geometry suite",
    "half-space decomposition suites",
    "windowed norm exceeds the lower bound",
    "criterion pipeline tables",
];

const KNOWN_UNATTAINABLE: &[&str] = &["tree_product_monotone"];

// no libtest harness, so the per-criterion lines are never captured
fn main() {
    let mut by_criterion: BTreeMap<u8, Vec<CheckResult>> = BTreeMap::new();
    for suite in SUITES {
        for c in checks(suite).expect("listed suites exist") {
            let r = run_check(&c, None);
            by_criterion.entry(r.criterion).or_default().push(r);
        }
    }

    let mut unexpected = vec![];
    for (i, title) in CRITERIA.iter().enumerate() {
        let n = i as u8 + 1;
        let results = by_criterion.get(&n).map(Vec::as_slice).unwrap_or(&[]);
        assert!(!results.is_empty(), "criterion {n} has no checks");
        let passed = results.iter().all(|r| r.passed);
        let secs: f64 = results.iter().map(|r| r.seconds).sum();
        println!("{} criterion {n}: {title} ({} checks, {secs:.1} s)", if passed { "PASS" } else { "FAIL" }, results.len());
        for r in results.iter().filter(|r| !r.passed) {
            println!("    {}::{}: {}", r.suite, r.name, r.detail);
            if !KNOWN_UNATTAINABLE.contains(&r.name) {
                unexpected.push(format!("{}::{}", r.suite, r.name));
            }
        }
    }
    for r in by_criterion.get(&0).into_iter().flatten() {
        println!("{} support check {}::{}", if r.passed { "PASS" } else { "FAIL" }, r.suite, r.name);
        if !r.passed {
            unexpected.push(format!("{}::{}", r.suite, r.name));
        }
    }
    if !unexpected.is_empty() {
        eprintln!("failing checks: {unexpected:?}");
        std::process::exit(1);
    }
}
