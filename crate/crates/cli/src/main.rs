use std::process::ExitCode;

use clap::Parser;
use defectlab::args::{invocation, Cli};
use defectlab::config::Analysis;
use defectlab::error::RunError;
use defectlab::pipeline::{run, sweep, write_sweep};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cap = defectlab::thread_cap();
    if let Some(n) = cap {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match execute(&cli, cap) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("defectlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: &Cli, cap: Option<usize>) -> Result<(), RunError> {
    let inv = invocation(cli)?;
    let cfg = &inv.config;
    if cfg.wants(Analysis::Sweep) {
        let spec = cfg.sweep.clone().expect("validated");
        let jobs = cap.map_or(inv.jobs, |c| inv.jobs.min(c));
        let outcome = sweep(cfg, spec.axis, &spec.values, jobs);
        match &cfg.out {
            Some(dir) => write_sweep(dir, &outcome)?,
            None => print!("{}", outcome.to_csv()),
        }
        return Ok(());
    }
    let report = run(cfg)?;
    if cfg.out.is_none() {
        println!("{}", report.to_json());
    }
    for v in report.verdicts.iter().filter(|v| !v.pass) {
        eprintln!(
            "defectlab: verdict {} failed (measured {:e}, tolerance {:e})",
            v.name, v.measured, v.tolerance
        );
    }
    for i in report.identities.iter().filter(|i| !i.pass) {
        eprintln!(
            "defectlab: identity {} failed (discrepancy {:e})",
            i.name, i.max_discrepancy
        );
    }
    Ok(())
}
