//! CSV and text output. `latency.csv` has columns N, T, mean, median and p95
//! (seconds); `throughput.csv` has N, T and jobs_per_s; `fit.csv` has T, the
//! slope (seconds per submission), intercept (seconds) and R² of mean
//! latency against N.

use std::fmt::Write as _;
use std::path::Path;

use crate::{BenchError, BenchResult};

fn f(x: f64) -> String {
    format!("{x:.4}")
}

pub fn latency_csv(result: &BenchResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "T", "mean", "median", "p95"]).expect("in-memory write");
    for c in result.cells() {
        w.write_record([c.n.to_string(), c.testbeds.to_string(), f(c.mean_s), f(c.median_s), f(c.p95_s)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn throughput_csv(result: &BenchResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["N", "T", "jobs_per_s"]).expect("in-memory write");
    for c in result.cells() {
        w.write_record([c.n.to_string(), c.testbeds.to_string(), f(c.jobs_per_s)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn fit_csv(result: &BenchResult) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["T", "slope", "intercept", "r2"]).expect("in-memory write");
    for (t, fit) in result.fits() {
        w.write_record([t.to_string(), f(fit.slope), f(fit.intercept), f(fit.r2)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn summary_table(result: &BenchResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>5} {:>3} {:>9} {:>9} {:>9} {:>10}", "N", "T", "mean_s", "median_s", "p95_s", "jobs/s");
    for c in result.cells() {
        let _ = writeln!(
            out,
            "{:>5} {:>3} {:>9.3} {:>9.3} {:>9.3} {:>10.3}",
            c.n, c.testbeds, c.mean_s, c.median_s, c.p95_s, c.jobs_per_s
        );
    }
    for (t, fit) in result.fits() {
        let _ = writeln!(
            out,
            "T={t}: latency = {:.4} s/submission * N + {:.3} s, R^2 = {:.4}",
            fit.slope, fit.intercept, fit.r2
        );
    }
    out
}

pub fn write_reports(result: &BenchResult, dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("latency.csv"), latency_csv(result))?;
    std::fs::write(dir.join("throughput.csv"), throughput_csv(result))?;
    std::fs::write(dir.join("fit.csv"), fit_csv(result))?;
    Ok(())
}
