use std::path::Path;

use energon::constraint::KnapsackInstance;
use energon::knapsack::{gap_certificate, solve, Solver};
use energon::rational::{self, format, Rational};
use serde::{Deserialize, Serialize};

use crate::error::CliResult;
use crate::input::read_json;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    #[serde(with = "rational::serde_q_vec")]
    values: Vec<Rational>,
    #[serde(with = "rational::serde_q_vec")]
    weights: Vec<Rational>,
    #[serde(with = "rational::serde_q")]
    capacity: Rational,
}

#[derive(Serialize)]
pub struct KnapsackReport {
    pub solver: &'static str,
    /// Indices of the selected items, ascending.
    pub selected: Vec<usize>,
    pub objective: String,
    pub load: String,
    pub capacity: String,
    pub remaining: String,
    /// Upper bound on the optimality gap; greedy only.
    pub gap_bound: Option<String>,
}

pub fn report(path: &Path, solver: &Solver) -> CliResult<KnapsackReport> {
    let f: InstanceFile = read_json(path)?;
    let inst = KnapsackInstance::new(f.values, f.weights, f.capacity)?;
    let sel = solve(&inst, solver)?;
    let gap_bound = match solver {
        Solver::Greedy => Some(format(&gap_certificate(&inst, &sel)?)),
        _ => None,
    };
    Ok(KnapsackReport {
        solver: solver.name(),
        selected: (0..inst.len()).filter(|&j| sel.xi[j]).collect(),
        objective: format(&sel.objective),
        load: format(&sel.load),
        capacity: format(&inst.capacity),
        remaining: format(&sel.remaining),
        gap_bound,
    })
}

pub fn run(path: &Path, solver: &Solver) -> CliResult<()> {
    let r = report(path, solver)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&r).expect("report serializes")
    );
    Ok(())
}
