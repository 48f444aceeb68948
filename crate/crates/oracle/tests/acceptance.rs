//! Acceptance criteria, one verdict line each. Runs without the libtest
//! harness so every line is printed; exits nonzero if any criterion fails.

use std::time::{Duration, Instant};

use energon::checkpoint::Checkpoint;
use energon::energy::{DramMode, EnergyBreakdown, HardwareConfig, LayerEnergy};
use energon::trainer::supports;
use energon_oracle::sim::simulate;
use energon_oracle::suites::{self, Faults, Report};
use energon_oracle::toy::{self, Toy, ToyResult, ACCURACY_RATIO};

struct Verdict {
    name: &'static str,
    passed: bool,
    summary: String,
}

fn from_report(name: &'static str, reports: &[Report], limit: Duration) -> Verdict {
    let elapsed: Duration = reports.iter().map(|r| r.elapsed).sum();
    let mut passed = elapsed <= limit;
    let mut parts = Vec::new();
    for r in reports {
        passed &= r.passed();
        parts.push(format!(
            "{}: {}/{} ok",
            r.name,
            r.cases - r.failures,
            r.cases
        ));
        if !r.passed() {
            parts.push(r.detail.trim_end().replace('\n', "; "));
        }
    }
    parts.push(format!(
        "{:.1}s of {}s",
        elapsed.as_secs_f64(),
        limit.as_secs()
    ));
    Verdict {
        name,
        passed,
        summary: parts.join(" | "),
    }
}

/// Energy of a checkpoint recomputed from event-simulator counts.
fn simulated_energy(ck: &Checkpoint, mode: DramMode) -> EnergyBreakdown {
    let (ws, xs) = supports(&ck.net).expect("consistent checkpoint");
    let layers = ck
        .net
        .layers
        .iter()
        .zip(ws.iter().zip(&xs))
        .map(|(l, (w, x))| {
            LayerEnergy::from_counts(simulate(&l.spec, w, x, &ck.hardware, mode), &ck.hardware)
        })
        .collect();
    EnergyBreakdown::from_layers(layers)
}

fn end_to_end(runs: &[(Toy, ToyResult)], elapsed: Duration) -> Verdict {
    let mut passed = elapsed <= Duration::from_secs(300);
    let mut parts = Vec::new();
    for (toy, res) in runs {
        let out = &res.outcome;
        let ck = Checkpoint::from_bytes(&res.checkpoint).expect("readable checkpoint");
        let budget = &out.schedule.target;
        let audited = simulated_energy(&ck, DramMode::DenseUpperBound).total();
        let hard = out.schedule.current == *budget
            && out.audit.bound <= *budget
            && audited <= *budget
            && *budget == &out.schedule.dense_energy / energon::rational::int(2);
        let soft = out.accuracy >= ACCURACY_RATIO * out.dense_accuracy;
        passed &= hard && soft;
        parts.push(format!(
            "{}: energy {} (bound {}) vs budget {} = 50% of {} [{}]; accuracy {:.3} vs dense {:.3} [{}]",
            toy.name,
            audited,
            out.audit.bound,
            budget,
            out.schedule.dense_energy,
            if hard { "ok" } else { "OVER" },
            out.accuracy,
            out.dense_accuracy,
            if soft { "ok" } else { "LOW" },
        ));
    }
    parts.push(format!("{:.1}s of 300s", elapsed.as_secs_f64()));
    Verdict {
        name: "end-to-end training at half the dense energy",
        passed,
        summary: parts.join(" | "),
    }
}

fn determinism(first: &[(Toy, ToyResult)], hw: &HardwareConfig) -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for (toy, a) in first {
        let b = toy.run(hw).expect("toy run");
        let same = a.checkpoint == b.checkpoint && a.log == b.log;
        passed &= same;
        parts.push(format!(
            "{}: checkpoint {} bytes, log {} bytes, {}",
            toy.name,
            a.checkpoint.len(),
            a.log.len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Verdict {
        name: "determinism of checkpoints and logs",
        passed,
        summary: parts.join(" | "),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut verdicts = vec![
        from_report(
            "energy counts match the event simulator",
            &[suites::energy_oracle(101, 1000)],
            secs(60),
        ),
        from_report(
            "coefficient form equals dense-input energy",
            &[suites::coefficient_fidelity(102, 200, Faults::default())],
            secs(30),
        ),
        from_report(
            "greedy gap within certificate",
            &[suites::greedy_certificate(103, 10_000)],
            secs(120),
        ),
        from_report(
            "approximation sandwich and exactness",
            &[
                suites::approx_sandwich(104, 1000),
                suites::approx_exactness(105, 1000),
            ],
            secs(300),
        ),
        from_report(
            "truncated convolution identity",
            &[suites::min_b_identity(106, 1000)],
            secs(30),
        ),
        from_report(
            "analytic gradients match finite differences",
            &[suites::gradient_check(107)],
            secs(30),
        ),
    ];

    let hw = HardwareConfig::default();
    let start = Instant::now();
    let runs: Vec<(Toy, ToyResult)> = [toy::fc(), toy::conv()]
        .into_iter()
        .map(|t| {
            let r = t.run(&hw).expect("toy run");
            (t, r)
        })
        .collect();
    verdicts.push(end_to_end(&runs, start.elapsed()));
    verdicts.push(determinism(&runs, &hw));

    let mut failed = 0;
    for v in &verdicts {
        println!(
            "{} {}: {}",
            if v.passed { "PASS" } else { "FAIL" },
            v.name,
            v.summary
        );
        failed += usize::from(!v.passed);
    }
    println!(
        "acceptance: {} passed, {} failed",
        verdicts.len() - failed,
        failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
