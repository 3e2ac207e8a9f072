//! Fits the free parameters of a configuration to target figures of merit
//! using the noise-free expected metrics.
//!
//! ```text
//! cargo run --release -p lgmem --example calibrate -- configs/fig2_tem10.json
//! ```
//!
//! The configuration must contain the three cases `lg_plus`, `lg_minus` and
//! `tem10` (extra cases are ignored). Fitted, one at a time and repeated
//! until stable:
//!
//! - `ensemble.gamma_s_over_2pi_khz` → mean efficiency of the LG cases;
//! - `discriminators.minus.crosstalk` → reference distinction ratio of `lg_plus`;
//! - `discriminators.plus.crosstalk` → reference distinction ratio of `lg_minus`;
//! - `discriminators.minus.radial_acceptance[0]` → reference imbalance of `tem10`.

use lgmem::analysis::ExpectedMetrics;
use lgmem::config::ExperimentConfig;
use lgmem::experiment::expected;

const EFFICIENCY: f64 = 0.16;
const DR_PLUS_DB: f64 = 17.0;
const DR_MINUS_DB: f64 = 23.0;
const IMBALANCE: f64 = 0.09;

fn metrics(cfg: &ExperimentConfig) -> Vec<(String, ExpectedMetrics)> {
    let names = cfg.cases.iter().map(|c| c.name.clone());
    names.zip(expected(cfg).expect("config runs")).collect()
}

fn pick<'a>(m: &'a [(String, ExpectedMetrics)], name: &str) -> &'a ExpectedMetrics {
    &m.iter()
        .find(|(n, _)| n == name)
        .unwrap_or_else(|| panic!("case `{name}` missing"))
        .1
}

/// Bisection for an increasing or decreasing `f` with a sign change on `[lo, hi]`.
fn solve(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < 1e-6 * hi.abs().max(1e-9) {
            break;
        }
    }
    0.5 * (lo + hi)
}

fn main() {
    let path = std::env::args().nth(1).expect("usage: calibrate <config.json>");
    let mut cfg = ExperimentConfig::load(path.as_ref()).expect("valid config");

    for round in 0..3 {
        cfg.ensemble.gamma_s_over_2pi_khz = solve(0.0, 500.0, |g| {
            let mut c = cfg.clone();
            c.ensemble.gamma_s_over_2pi_khz = g;
            let m = metrics(&c);
            0.5 * (pick(&m, "lg_plus").efficiency + pick(&m, "lg_minus").efficiency) - EFFICIENCY
        });
        cfg.discriminators.minus.crosstalk = solve(1e-5, 0.2, |e| {
            let mut c = cfg.clone();
            c.discriminators.minus.crosstalk = e;
            let m = metrics(&c);
            pick(&m, "lg_plus").distinction_ratio.unwrap().reference_db - DR_PLUS_DB
        });
        cfg.discriminators.plus.crosstalk = solve(1e-5, 0.2, |e| {
            let mut c = cfg.clone();
            c.discriminators.plus.crosstalk = e;
            let m = metrics(&c);
            pick(&m, "lg_minus").distinction_ratio.unwrap().reference_db - DR_MINUS_DB
        });
        cfg.discriminators.minus.radial_acceptance = vec![solve(0.5, 1.0, |a| {
            let mut c = cfg.clone();
            c.discriminators.minus.radial_acceptance = vec![a];
            let m = metrics(&c);
            pick(&m, "tem10").imbalance.reference.unwrap() - IMBALANCE
        })];

        let m = metrics(&cfg);
        println!(
            "round {round}: gamma_s/2pi = {:.4} kHz, eps+ = {:.6}, eps- = {:.6}, a0- = {:.6}",
            cfg.ensemble.gamma_s_over_2pi_khz,
            cfg.discriminators.plus.crosstalk,
            cfg.discriminators.minus.crosstalk,
            cfg.discriminators.minus.radial_acceptance[0]
        );
        for (name, e) in &m {
            println!("  {name}: {}", serde_json::to_string(e).unwrap());
        }
    }
}
