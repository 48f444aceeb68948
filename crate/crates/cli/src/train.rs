use std::fs;
use std::path::Path;

use energon::checkpoint::Checkpoint;
use energon::data::DataConfig;
use energon::energy::{HardwareConfig, LayerSpec};
use energon::masking::write_pgm;
use energon::nn::TinyNet;
use energon::rational::format;
use energon::trainer::{log_csv, run, ExitReason, TrainConfig, TrainOutcome};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{config, training, CliResult};
use crate::input::{from_value, parse_json, read_text, write};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    hardware: HardwareConfig,
    layers: Vec<LayerSpec>,
    data: DataConfig,
    /// Seed of the weight initialization.
    #[serde(default)]
    init_seed: u64,
    #[serde(default)]
    train: Map<String, Value>,
}

/// Command-line values that replace the matching `train` entries.
#[derive(Default)]
pub struct Overrides {
    pub budget: Option<String>,
    pub solver: Option<&'static str>,
    pub epsilon: Option<String>,
    pub seed: Option<u64>,
}

pub struct Job {
    pub hardware: HardwareConfig,
    pub layers: Vec<LayerSpec>,
    pub data: DataConfig,
    pub init_seed: u64,
    pub train: TrainConfig,
}

pub fn load(path: &Path, ov: &Overrides) -> CliResult<Job> {
    let origin = path.display().to_string();
    let f: TrainFile = parse_json(&origin, &read_text(path)?)?;
    let mut t = f.train;
    if let Some(b) = &ov.budget {
        t.insert("budget".into(), Value::String(b.clone()));
    }
    if let Some(s) = ov.solver {
        t.insert("solver".into(), Value::String(s.into()));
    }
    if let Some(e) = &ov.epsilon {
        t.insert("epsilon".into(), Value::String(e.clone()));
    }
    if let Some(s) = ov.seed {
        t.insert("seed".into(), Value::from(s));
    }
    let train: TrainConfig = from_value(&origin, "train", Value::Object(t))?;
    train.validate()?;
    for w in f.hardware.validate()? {
        eprintln!("warning: {w}");
    }
    Ok(Job {
        hardware: f.hardware,
        layers: f.layers,
        data: f.data,
        init_seed: f.init_seed,
        train,
    })
}

impl Job {
    pub fn execute(&self) -> CliResult<TrainOutcome> {
        let net = TinyNet::new(&self.layers, &mut ChaCha8Rng::seed_from_u64(self.init_seed))?;
        if self.data.feature_len() != net.input_len() {
            return Err(config(format!(
                "data has {} features but the first layer takes {}",
                self.data.feature_len(),
                net.input_len()
            )));
        }
        let all = self.data.generate();
        if net.output_len() != all.classes {
            return Err(config(format!(
                "data has {} classes but the last layer outputs {}",
                all.classes,
                net.output_len()
            )));
        }
        let (tr, va) = all.split(self.data.val_fraction, self.data.seed);
        if tr.is_empty() || va.is_empty() {
            return Err(config(format!(
                "{} samples with val_fraction {} leave an empty split",
                self.data.samples, self.data.val_fraction
            )));
        }
        run(net, &tr, &va, &self.hardware, &self.train).map_err(training)
    }

    pub fn checkpoint(&self, o: &TrainOutcome) -> Checkpoint {
        Checkpoint {
            net: o.net.clone(),
            hardware: self.hardware.clone(),
            q: o.q.clone(),
            schedule: Some(o.schedule.clone()),
        }
    }
}

#[derive(Serialize)]
struct AuditFile {
    exit: ExitReason,
    iteration: usize,
    budget: String,
    dense_energy: String,
    target: String,
    /// Dense-input bound of the returned model.
    energy: String,
    /// Energy with the actual weight and mask supports.
    measured_energy: String,
    feasible: bool,
    w_nnz: usize,
    m_nnz: usize,
    q: Vec<Option<usize>>,
    dense_accuracy: f64,
    accuracy: f64,
}

fn pgm_shape(spec: &LayerSpec) -> (usize, usize) {
    match spec {
        LayerSpec::Fc(f) => (f.c, 1),
        LayerSpec::Conv(c) => (c.w, c.c * c.h),
    }
}

pub fn execute(path: &Path, ov: &Overrides, out: &Path) -> CliResult<()> {
    let job = load(path, ov)?;
    fs::create_dir_all(out).map_err(|e| config(format!("cannot create {}: {e}", out.display())))?;
    let o = job.execute()?;

    write(&out.join("model.ckpt"), job.checkpoint(&o).to_bytes()?)?;
    write(&out.join("train_log.csv"), log_csv(&o.log))?;
    let a = &o.audit;
    let audit = AuditFile {
        exit: o.exit,
        iteration: o.schedule.iteration,
        budget: format(&a.budget),
        dense_energy: format(&o.schedule.dense_energy),
        target: format(&o.schedule.target),
        energy: format(&a.bound),
        measured_energy: format(&a.measured),
        feasible: a.feasible(),
        w_nnz: a.w_nnz,
        m_nnz: a.m_nnz,
        q: o.q.clone(),
        dense_accuracy: o.dense_accuracy,
        accuracy: o.accuracy,
    };
    let json = serde_json::to_string_pretty(&audit).expect("audit serializes");
    write(&out.join("audit.json"), format!("{json}\n"))?;
    for (i, l) in o.net.layers.iter().enumerate() {
        if let Some(m) = &l.mask {
            let (w, h) = pgm_shape(&l.spec);
            let mut img = Vec::new();
            write_pgm(&mut img, m, w, h)?;
            write(&out.join(format!("mask_layer{i}.pgm")), img)?;
        }
    }

    println!(
        "{:?} after iteration {}: energy {} of budget {} (dense {}), accuracy {:.4} (dense {:.4})",
        o.exit,
        o.schedule.iteration,
        audit.energy,
        audit.budget,
        audit.dense_energy,
        o.accuracy,
        o.dense_accuracy
    );
    Ok(())
}
