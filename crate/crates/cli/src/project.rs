use std::path::Path;

use energon::checkpoint::Checkpoint;
use energon::energy::DramMode;
use energon::knapsack::{gap_certificate, project_weights, Solver};
use energon::rational::{self, format, Rational};
use energon::trainer::{bound_energy, coefficients, dense_energy, Audit, Budget};
use num_traits::Zero;
use serde::Serialize;

use crate::error::{config, CliResult};
use crate::input::write;

#[derive(Serialize)]
pub struct ProjectReport {
    pub solver: &'static str,
    pub budget: String,
    pub dense_energy: String,
    /// Dense-input energy bound before and after projection.
    pub energy_before: String,
    pub energy_after: String,
    /// Energy with the actual weight and mask supports.
    pub measured_before: String,
    pub measured_after: String,
    /// Kept squared magnitude, the knapsack objective.
    pub objective: String,
    /// Squared distance between the input and projected weights.
    pub distance_sq: String,
    pub weights_before: usize,
    pub weights_after: usize,
    /// Upper bound on the optimality gap; greedy only.
    pub gap_bound: Option<String>,
}

pub fn project(
    ckpt: &mut Checkpoint,
    budget: &Budget,
    solver: &Solver,
    mode: DramMode,
) -> CliResult<ProjectReport> {
    let hw = ckpt.hardware.clone();
    hw.validate()?;
    let net = &mut ckpt.net;
    let dense = dense_energy(&net.specs(), &hw, mode)?;
    let budget = budget.resolve(&dense);
    let before = Audit::of(net, &budget, &hw, mode)?;

    let coeffs = coefficients(net, &hw, mode)?;
    let z: Vec<Vec<Rational>> = net
        .layers
        .iter()
        .map(|l| l.w.iter().map(|&w| rational::from_f64(w)).collect())
        .collect();
    let p = project_weights(&z, &coeffs, &budget, solver)?;
    for (l, keep) in net.layers.iter_mut().zip(&p.weights) {
        for (w, k) in l.w.iter_mut().zip(keep) {
            if k.is_zero() {
                *w = 0.0;
            }
        }
    }
    let after = Audit::of(net, &budget, &hw, mode)?;
    debug_assert_eq!(after.bound, bound_energy(net, &hw, mode)?);

    let norm: Rational = p.instance.values.iter().sum();
    let gap_bound = match solver {
        Solver::Greedy => Some(format(&gap_certificate(&p.instance, &p.selection)?)),
        _ => None,
    };
    Ok(ProjectReport {
        solver: solver.name(),
        budget: format(&budget),
        dense_energy: format(&dense),
        energy_before: format(&before.bound),
        energy_after: format(&after.bound),
        measured_before: format(&before.measured),
        measured_after: format(&after.measured),
        distance_sq: format(&(norm - &p.selection.objective)),
        objective: format(&p.selection.objective),
        weights_before: before.w_nnz,
        weights_after: after.w_nnz,
        gap_bound,
    })
}

pub fn run(
    input: &Path,
    budget: &Budget,
    solver: &Solver,
    mode: DramMode,
    out: &Path,
) -> CliResult<()> {
    let mut ckpt =
        Checkpoint::load(input).map_err(|e| config(format!("{}: {e}", input.display())))?;
    let r = project(&mut ckpt, budget, solver, mode)?;
    write(out, ckpt.to_bytes()?)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&r).expect("report serializes")
    );
    Ok(())
}
