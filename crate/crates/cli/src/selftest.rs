use energon_oracle::suites::{selftest, table, Faults, Scale};

use crate::error::{CliError, CliResult};

pub fn run(quick: bool, seed: u64, faults: Faults) -> CliResult<()> {
    let scale = if quick { Scale::Quick } else { Scale::Full };
    let reports = selftest(scale, faults, seed);
    print!("{}", table(&reports));
    let failed = reports.iter().filter(|r| !r.passed()).count();
    println!(
        "{} of {} suites passed",
        reports.len() - failed,
        reports.len()
    );
    if failed > 0 {
        return Err(CliError::Selftest {
            failed,
            total: reports.len(),
        });
    }
    Ok(())
}
