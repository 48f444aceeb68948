//! The alternating energy-constrained training loop.
//!
//! Dense pretraining produces both the starting point and the distillation
//! teacher. Each outer iteration then runs a weight phase (SGD steps, each
//! followed by an exact energy projection), checks validation accuracy, runs
//! a mask phase (Adam steps with clamping and an L0 projection), rounds the
//! masks and decays their sparsity budget.

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraint::{network_coefficients, LayerCoeffs};
use crate::data::Dataset;
use crate::energy::{total_energy, DramMode, HardwareConfig, LayerSpec, SupportPattern};
use crate::error::{Error, Result};
use crate::knapsack::{project_weights, Solver};
use crate::masking::{clamp01, decay_q, default_dq, l0_project, nnz, round_binary};
use crate::nn::{batches, kd_loss, TinyNet};
use crate::rational::{self, Rational};

/// Target energy: absolute, or a fraction of the dense model's energy.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Budget {
    Absolute(Rational),
    FractionOfDense(Rational),
}

impl Budget {
    pub fn resolve(&self, dense: &Rational) -> Rational {
        match self {
            Budget::Absolute(b) => b.clone(),
            Budget::FractionOfDense(f) => dense * f,
        }
    }
}

impl FromStr for Budget {
    type Err = String;

    /// `"50%"` is half the dense energy; anything else is an absolute
    /// rational such as `"1234"`, `"1234/5"` or `"12.5"`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let budget = match s.strip_suffix('%') {
            Some(pct) => Budget::FractionOfDense(rational::parse(pct)? / rational::int(100)),
            None => Budget::Absolute(rational::parse(s)?),
        };
        let v = match &budget {
            Budget::Absolute(v) | Budget::FractionOfDense(v) => v,
        };
        if *v < Rational::zero() {
            return Err(format!("budget {s} is negative"));
        }
        Ok(budget)
    }
}

impl TryFrom<String> for Budget {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Budget> for String {
    fn from(b: Budget) -> String {
        b.to_string()
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Budget::Absolute(v) => write!(f, "{}", rational::format(v)),
            Budget::FractionOfDense(v) => {
                write!(f, "{}%", rational::format(&(v * rational::int(100))))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Greedy,
    Exact,
    Approx,
}

fn default_lambda() -> f64 {
    0.5
}
fn default_eta1() -> f64 {
    0.05
}
fn default_eta2() -> f64 {
    0.01
}
fn default_dense_epochs() -> usize {
    30
}
fn default_w_epochs() -> usize {
    3
}
fn default_m_epochs() -> usize {
    1
}
fn default_batch() -> usize {
    32
}
fn default_decay() -> Rational {
    rational::ratio(1, 2)
}
fn default_decay_iters() -> usize {
    3
}
fn default_max_outer() -> usize {
    10
}
fn default_wd() -> f64 {
    1e-4
}
fn default_one() -> usize {
    1
}
fn default_mask_layers() -> Vec<usize> {
    vec![0]
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub budget: Budget,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_eta1")]
    pub eta1: f64,
    #[serde(default = "default_eta2")]
    pub eta2: f64,
    /// Mask sparsity decay per outer iteration; `None` means a tenth of the
    /// mask size, `Some(0)` disables decay.
    #[serde(default)]
    pub dq: Option<usize>,
    #[serde(default = "default_dense_epochs")]
    pub dense_epochs: usize,
    #[serde(default = "default_w_epochs")]
    pub w_epochs: usize,
    #[serde(default = "default_m_epochs")]
    pub m_epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Per-iteration factor on the gap between the current and the target
    /// budget.
    #[serde(default = "default_decay", with = "rational::serde_q")]
    pub budget_decay: Rational,
    /// Outer iteration (1-based count) by which the budget reaches the target.
    #[serde(default = "default_decay_iters")]
    pub decay_iters: usize,
    #[serde(default = "default_max_outer")]
    pub max_outer_iters: usize,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    /// Project after every this many SGD steps (and always at phase end).
    #[serde(default = "default_one")]
    pub project_every: usize,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default, with = "rational::serde_q_opt")]
    pub epsilon: Option<Rational>,
    #[serde(default)]
    pub dram_mode: DramMode,
    #[serde(default = "default_mask_layers")]
    pub mask_layers: Vec<usize>,
    /// `false` drops the distillation term from the loss altogether.
    #[serde(default = "default_true")]
    pub distill: bool,
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(budget: Budget) -> Self {
        serde_json::from_value(serde_json::json!({ "budget": budget.to_string() }))
            .expect("defaults deserialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.eta1 > 0.0 && self.eta2 > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.batch_size == 0 || self.project_every == 0 {
            return bad("batch_size and project_every must be positive".into());
        }
        if self.budget_decay < Rational::zero() || self.budget_decay >= Rational::one() {
            return bad("budget_decay must lie in [0, 1)".into());
        }
        if self.decay_iters == 0 || self.max_outer_iters < self.decay_iters {
            return bad(format!(
                "decay_iters {} must be positive and at most max_outer_iters {}",
                self.decay_iters, self.max_outer_iters
            ));
        }
        self.solver()?;
        Ok(())
    }

    pub fn solver(&self) -> Result<Solver> {
        Ok(match self.solver {
            SolverKind::Greedy => Solver::Greedy,
            SolverKind::Exact => Solver::Exact,
            SolverKind::Approx => Solver::Approx(
                self.epsilon
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("approx solver needs epsilon".into()))?,
            ),
        })
    }
}

/// Budget in force at outer iteration `t` (0-based): the gap to the target
/// shrinks by `decay` each iteration and is closed at `decay_iters - 1`.
pub fn budget_at(
    t: usize,
    dense: &Rational,
    target: &Rational,
    decay: &Rational,
    decay_iters: usize,
) -> Rational {
    if t + 1 >= decay_iters || dense <= target {
        return target.clone();
    }
    let mut factor = decay.clone();
    for _ in 0..t {
        factor *= decay;
    }
    target + (dense - target) * factor
}

/// Weight and input supports of a network, masks standing in for inputs.
/// Layers without a mask are charged a dense input.
pub fn supports(net: &TinyNet) -> Result<(Vec<SupportPattern>, Vec<SupportPattern>)> {
    let mut ws = Vec::with_capacity(net.layers.len());
    let mut xs = Vec::with_capacity(net.layers.len());
    for (i, l) in net.layers.iter().enumerate() {
        ws.push(SupportPattern::weights_of(i, &l.spec, &l.w)?);
        xs.push(match &l.mask {
            Some(m) => SupportPattern::input_of(i, &l.spec, m)?,
            None => SupportPattern::dense(i, l.spec.input_shape()),
        });
    }
    Ok((ws, xs))
}

pub fn coefficients(
    net: &TinyNet,
    hw: &HardwareConfig,
    mode: DramMode,
) -> Result<Vec<LayerCoeffs>> {
    let (_, xs) = supports(net)?;
    network_coefficients(&net.specs(), &xs, hw, mode)
}

/// The constraint's energy: computation charged at its dense-input bound.
pub fn bound_energy(net: &TinyNet, hw: &HardwareConfig, mode: DramMode) -> Result<Rational> {
    let coeffs = coefficients(net, hw, mode)?;
    Ok(net
        .layers
        .iter()
        .zip(&coeffs)
        .map(|(l, c)| c.energy(nnz(&l.w) as u64))
        .sum())
}

/// Energy of a network against its budget, all exact.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Audit {
    #[serde(with = "rational::serde_q")]
    pub budget: Rational,
    /// Dense-input bound used by the constraint.
    #[serde(with = "rational::serde_q")]
    pub bound: Rational,
    /// Closed-form energy with the actual weight and mask supports.
    #[serde(with = "rational::serde_q")]
    pub measured: Rational,
    pub w_nnz: usize,
    pub m_nnz: usize,
}

impl Audit {
    pub fn of(
        net: &TinyNet,
        budget: &Rational,
        hw: &HardwareConfig,
        mode: DramMode,
    ) -> Result<Self> {
        let (ws, xs) = supports(net)?;
        let measured = total_energy(&net.specs(), &ws, &xs, hw, mode)?.total();
        Ok(Self {
            budget: budget.clone(),
            bound: bound_energy(net, hw, mode)?,
            measured,
            w_nnz: ws.iter().map(SupportPattern::nnz).sum(),
            m_nnz: net
                .layers
                .iter()
                .filter_map(|l| l.mask.as_deref())
                .map(nnz)
                .sum(),
        })
    }

    pub fn feasible(&self) -> bool {
        self.bound <= self.budget && self.measured <= self.bound
    }
}

fn check_finite(stage: &str, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            stage: stage.into(),
            detail: format!("loss became {loss}"),
        })
    }
}

fn batch_refs<'a>(data: &'a Dataset, idx: &[usize]) -> (Vec<&'a [f64]>, Vec<usize>) {
    (
        idx.iter().map(|&i| data.features[i].as_slice()).collect(),
        idx.iter().map(|&i| data.labels[i]).collect(),
    )
}

/// Plain cross-entropy mini-batch SGD. Returns the mean loss of each epoch.
pub fn train_dense(
    net: &mut TinyNet,
    data: &Dataset,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut losses = Vec::with_capacity(cfg.dense_epochs);
    for epoch in 0..cfg.dense_epochs {
        let mut total = 0.0;
        let bs = batches(data.len(), cfg.batch_size, rng);
        for b in &bs {
            let (xs, ys) = batch_refs(data, b);
            let (loss, g) = kd_loss(net, &xs, &ys, None, 0.0);
            check_finite(&format!("dense epoch {epoch}"), loss)?;
            total += loss;
            for (l, (gw, gb)) in net.layers.iter_mut().zip(g.w.iter().zip(&g.b)) {
                for (w, d) in l.w.iter_mut().zip(gw) {
                    *w -= cfg.eta1 * (d + cfg.weight_decay * *w);
                }
                for (b, d) in l.b.iter_mut().zip(gb) {
                    *b -= cfg.eta1 * d;
                }
            }
        }
        losses.push(total / bs.len().max(1) as f64);
    }
    Ok(losses)
}

/// Replaces the weights by their projection onto the energy budget, with
/// input statistics frozen at the current masks.
pub fn project(
    net: &mut TinyNet,
    budget: &Rational,
    hw: &HardwareConfig,
    cfg: &TrainConfig,
) -> Result<()> {
    let coeffs = coefficients(net, hw, cfg.dram_mode)?;
    let z: Vec<Vec<Rational>> = net
        .layers
        .iter()
        .map(|l| l.w.iter().map(|&w| rational::from_f64(w)).collect())
        .collect();
    let p = project_weights(&z, &coeffs, budget, &cfg.solver()?)?;
    for (l, keep) in net.layers.iter_mut().zip(&p.weights) {
        for (w, k) in l.w.iter_mut().zip(keep) {
            if k.is_zero() {
                *w = 0.0;
            }
        }
    }
    Ok(())
}

/// Weight phase: SGD on the distillation loss, projecting onto the budget.
/// Returns the mean loss of the last epoch.
pub fn w_phase(
    net: &mut TinyNet,
    data: &Dataset,
    teacher: Option<&[Vec<f64>]>,
    budget: &Rational,
    hw: &HardwareConfig,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    project(net, budget, hw, cfg)?;
    let mut last = 0.0;
    let mut step = 0usize;
    for _ in 0..cfg.w_epochs {
        let mut total = 0.0;
        let bs = batches(data.len(), cfg.batch_size, rng);
        for b in &bs {
            let (xs, ys) = batch_refs(data, b);
            let t: Option<Vec<Vec<f64>>> =
                teacher.map(|t| b.iter().map(|&i| t[i].clone()).collect());
            let (loss, g) = kd_loss(net, &xs, &ys, t.as_deref(), cfg.lambda);
            check_finite("weight phase", loss)?;
            total += loss;
            for (l, (gw, gb)) in net.layers.iter_mut().zip(g.w.iter().zip(&g.b)) {
                for (w, d) in l.w.iter_mut().zip(gw) {
                    *w -= cfg.eta1 * (d + cfg.weight_decay * *w);
                }
                for (b, d) in l.b.iter_mut().zip(gb) {
                    *b -= cfg.eta1 * d;
                }
            }
            step += 1;
            if step.is_multiple_of(cfg.project_every) {
                project(net, budget, hw, cfg)?;
            }
        }
        last = total / bs.len().max(1) as f64;
    }
    if !step.is_multiple_of(cfg.project_every) {
        project(net, budget, hw, cfg)?;
    }
    Ok(last)
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Mask phase: Adam on the masks with the weights fixed, clamping to `[0,1]`
/// and projecting each mask to its sparsity budget after every step, then
/// rounding to binary.
pub fn m_phase(
    net: &mut TinyNet,
    data: &Dataset,
    teacher: Option<&[Vec<f64>]>,
    q: &[Option<usize>],
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let mut m1: Vec<Option<Vec<f64>>> = net
        .layers
        .iter()
        .map(|l| l.mask.as_ref().map(|m| vec![0.0; m.len()]))
        .collect();
    let mut m2 = m1.clone();
    let mut t = 0i32;
    let settle = |net: &mut TinyNet| {
        for (l, q) in net.layers.iter_mut().zip(q) {
            if let (Some(m), Some(q)) = (l.mask.as_mut(), q) {
                clamp01(m);
                *m = l0_project(m, *q);
            }
        }
    };
    settle(net);
    for _ in 0..cfg.m_epochs {
        for b in &batches(data.len(), cfg.batch_size, rng) {
            let (xs, ys) = batch_refs(data, b);
            let tb: Option<Vec<Vec<f64>>> =
                teacher.map(|tt| b.iter().map(|&i| tt[i].clone()).collect());
            let (loss, g) = kd_loss(net, &xs, &ys, tb.as_deref(), cfg.lambda);
            check_finite("mask phase", loss)?;
            t += 1;
            let (c1, c2) = (1.0 - ADAM_B1.powi(t), 1.0 - ADAM_B2.powi(t));
            for (i, l) in net.layers.iter_mut().enumerate() {
                let (Some(m), Some(gm)) = (l.mask.as_mut(), g.m[i].as_ref()) else {
                    continue;
                };
                let (a, v) = (m1[i].as_mut().expect("slot"), m2[i].as_mut().expect("slot"));
                for k in 0..m.len() {
                    a[k] = ADAM_B1 * a[k] + (1.0 - ADAM_B1) * gm[k];
                    v[k] = ADAM_B2 * v[k] + (1.0 - ADAM_B2) * gm[k] * gm[k];
                    m[k] -= cfg.eta2 * (a[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
                }
            }
            settle(net);
        }
    }
    for l in &mut net.layers {
        if let Some(m) = l.mask.as_mut() {
            round_binary(m);
        }
    }
    Ok(())
}

/// One row of the training log, written after each weight phase.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub budget: Rational,
    pub loss: f64,
    pub accuracy: f64,
    pub energy: Rational,
    pub measured: Rational,
    pub w_nnz: usize,
    pub m_nnz: usize,
}

pub const LOG_HEADER: &str = "iter,budget,loss,accuracy,energy,measured_energy,w_nnz,m_nnz";

pub fn log_csv(rows: &[LogRow]) -> String {
    let mut out = format!("{LOG_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.9},{:.6},{},{},{},{}\n",
            r.iter,
            rational::format(&r.budget),
            r.loss,
            r.accuracy,
            rational::format(&r.energy),
            rational::format(&r.measured),
            r.w_nnz,
            r.m_nnz
        ));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    /// Accuracy fell at the target budget; the previous snapshot is returned.
    AccuracyDrop,
    /// At the target budget with nothing left to decay.
    Converged,
    MaxIterations,
}

/// Where the budget schedule stood when the returned model was taken.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleState {
    pub iteration: usize,
    #[serde(with = "rational::serde_q")]
    pub dense_energy: Rational,
    #[serde(with = "rational::serde_q")]
    pub target: Rational,
    #[serde(with = "rational::serde_q")]
    pub current: Rational,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub net: TinyNet,
    pub dense: TinyNet,
    pub dense_losses: Vec<f64>,
    pub dense_accuracy: f64,
    pub accuracy: f64,
    /// Mask sparsity budgets of the returned model.
    pub q: Vec<Option<usize>>,
    pub schedule: ScheduleState,
    pub audit: Audit,
    pub log: Vec<LogRow>,
    pub exit: ExitReason,
}

struct Snapshot {
    net: TinyNet,
    q: Vec<Option<usize>>,
    iteration: usize,
    budget: Rational,
    accuracy: f64,
    at_target: bool,
}

/// Runs the full loop with validation accuracy as the exit signal.
pub fn run(
    net: TinyNet,
    train: &Dataset,
    val: &Dataset,
    hw: &HardwareConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    run_with(net, train, val, hw, cfg, &mut |_, n: &TinyNet| {
        n.accuracy(&val.features, &val.labels)
    })
}

/// Like [`run`], with `evaluate(iteration, net)` supplying the accuracy that
/// drives the exit rule.
pub fn run_with(
    mut net: TinyNet,
    train: &Dataset,
    val: &Dataset,
    hw: &HardwareConfig,
    cfg: &TrainConfig,
    evaluate: &mut dyn FnMut(usize, &TinyNet) -> f64,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    hw.validate()?;
    if train.feature_len() != net.input_len() {
        return Err(Error::InvalidArgument(format!(
            "data has {} features, network expects {}",
            train.feature_len(),
            net.input_len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // the budget must clear the input-side floor of the unmasked network
    let coeffs = coefficients(&net, hw, cfg.dram_mode)?;
    let floor: Rational = coeffs.iter().map(|c| c.alpha4.clone()).sum();
    let dense_energy: Rational = net
        .layers
        .iter()
        .zip(&coeffs)
        .map(|(l, c)| c.energy(l.spec.weight_len() as u64))
        .sum();
    let target = cfg.budget.resolve(&dense_energy);
    if target < floor {
        return Err(Error::InfeasibleBudget {
            budget: Box::new(target),
            floor: Box::new(floor),
        });
    }

    let dense_losses = train_dense(&mut net, train, cfg, &mut rng)?;
    let dense = net.clone();
    let dense_accuracy = dense.accuracy(&val.features, &val.labels);
    let teacher: Option<Vec<Vec<f64>>> = cfg
        .distill
        .then(|| train.features.iter().map(|x| dense.forward(x)).collect());

    net.add_masks(&cfg.mask_layers)?;
    let dq: Vec<usize> = net
        .layers
        .iter()
        .map(|l| {
            l.mask
                .as_ref()
                .map_or(0, |m| cfg.dq.unwrap_or_else(|| default_dq(m.len())))
        })
        .collect();
    let mut q: Vec<Option<usize>> = net
        .layers
        .iter()
        .zip(&dq)
        .map(|(l, d)| l.mask.as_ref().map(|m| decay_q(m.len(), *d)))
        .collect();

    let mut log = Vec::new();
    let mut prev: Option<Snapshot> = None;
    let mut exit = ExitReason::MaxIterations;
    for t in 0..cfg.max_outer_iters {
        let budget = budget_at(
            t,
            &dense_energy,
            &target,
            &cfg.budget_decay,
            cfg.decay_iters,
        );
        let at_target = budget == target;
        let loss = w_phase(
            &mut net,
            train,
            teacher.as_deref(),
            &budget,
            hw,
            cfg,
            &mut rng,
        )?;
        let accuracy = evaluate(t, &net);
        let audit = Audit::of(&net, &budget, hw, cfg.dram_mode)?;
        debug_assert!(audit.feasible());
        log.push(LogRow {
            iter: t,
            budget: budget.clone(),
            loss,
            accuracy,
            energy: audit.bound,
            measured: audit.measured,
            w_nnz: audit.w_nnz,
            m_nnz: audit.m_nnz,
        });
        if let Some(p) = &prev {
            if p.at_target && at_target && p.accuracy > accuracy {
                exit = ExitReason::AccuracyDrop;
                break;
            }
        }
        prev = Some(Snapshot {
            net: net.clone(),
            q: q.clone(),
            iteration: t,
            budget,
            accuracy,
            at_target,
        });

        let next_q: Vec<Option<usize>> = q
            .iter()
            .zip(&dq)
            .map(|(q, d)| q.map(|q| decay_q(q, *d)))
            .collect();
        let masks_settled = net.layers.iter().zip(&q).all(|(l, q)| match (&l.mask, q) {
            (Some(m), Some(q)) => nnz(m) <= *q,
            _ => true,
        });
        if at_target && next_q == q && masks_settled {
            exit = ExitReason::Converged;
            break;
        }
        m_phase(&mut net, train, teacher.as_deref(), &q, cfg, &mut rng)?;
        q = next_q;
    }

    let snap = prev.expect("max_outer_iters >= decay_iters >= 1");
    let audit = Audit::of(&snap.net, &snap.budget, hw, cfg.dram_mode)?;
    Ok(TrainOutcome {
        schedule: ScheduleState {
            iteration: snap.iteration,
            dense_energy,
            target,
            current: snap.budget,
        },
        net: snap.net,
        dense,
        dense_losses,
        dense_accuracy,
        accuracy: snap.accuracy,
        q: snap.q,
        audit,
        log,
        exit,
    })
}

/// Dense energy of a network's architecture: every weight and input present.
pub fn dense_energy(specs: &[LayerSpec], hw: &HardwareConfig, mode: DramMode) -> Result<Rational> {
    let xs: Vec<SupportPattern> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| SupportPattern::dense(i, s.input_shape()))
        .collect();
    let coeffs = network_coefficients(specs, &xs, hw, mode)?;
    Ok(specs
        .iter()
        .zip(&coeffs)
        .map(|(s, c)| c.energy(s.weight_len() as u64))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn budget_strings() {
        assert_eq!(
            "50%".parse::<Budget>().unwrap(),
            Budget::FractionOfDense(ratio(1, 2))
        );
        assert_eq!(
            "12/5".parse::<Budget>().unwrap(),
            Budget::Absolute(ratio(12, 5))
        );
        assert!("-3".parse::<Budget>().is_err());
        assert_eq!(Budget::FractionOfDense(ratio(1, 2)).to_string(), "50%");
    }

    #[test]
    fn schedule_reaches_target_exactly() {
        let (d, t, g) = (int(100), int(50), ratio(1, 2));
        assert_eq!(budget_at(0, &d, &t, &g, 3), int(75));
        assert_eq!(budget_at(1, &d, &t, &g, 3), ratio(125, 2));
        assert_eq!(budget_at(2, &d, &t, &g, 3), int(50));
        assert_eq!(budget_at(7, &d, &t, &g, 3), int(50));
        assert_eq!(budget_at(0, &d, &t, &g, 1), int(50));
    }

    #[test]
    fn config_defaults_and_validation() {
        let cfg = TrainConfig::new(Budget::FractionOfDense(ratio(1, 2)));
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.mask_layers, vec![0]);
        cfg.validate().unwrap();
        let mut bad = cfg.clone();
        bad.lambda = 1.5;
        assert!(bad.validate().is_err());
        let mut bad = cfg;
        bad.solver = SolverKind::Approx;
        assert!(bad.validate().is_err());
    }
}
