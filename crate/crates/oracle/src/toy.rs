//! Fixed-seed toy training runs used as end-to-end baselines.

use energon::checkpoint::Checkpoint;
use energon::data::{DataConfig, DatasetKind};
use energon::energy::{HardwareConfig, LayerSpec};
use energon::nn::TinyNet;
use energon::rational::ratio;
use energon::trainer::{log_csv, run, Budget, TrainConfig, TrainOutcome};
use energon::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Accuracy kept relative to the dense baseline; a repository baseline, not
/// a property of the method.
pub const ACCURACY_RATIO: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct Toy {
    pub name: &'static str,
    pub layers: Vec<LayerSpec>,
    pub data: DataConfig,
    pub train: TrainConfig,
    pub init_seed: u64,
}

fn half_budget(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::new(Budget::FractionOfDense(ratio(1, 2)));
    cfg.seed = seed;
    cfg
}

/// Two FC layers on the planar mixture with six noise features.
pub fn fc() -> Toy {
    Toy {
        name: "fc",
        layers: vec![LayerSpec::fc(8, 32), LayerSpec::fc(32, 2)],
        data: DataConfig {
            kind: DatasetKind::Mixture,
            samples: 400,
            noise_features: 6,
            val_fraction: 0.25,
            seed: 1,
        },
        train: half_budget(5),
        init_seed: 11,
    }
}

/// A strided CONV layer feeding two FC layers on 8x8 glyphs.
pub fn conv() -> Toy {
    Toy {
        name: "conv",
        layers: vec![
            LayerSpec::conv(1, 8, 3, 8, 8, 0, 2, 1),
            LayerSpec::fc(72, 16),
            LayerSpec::fc(16, 2),
        ],
        data: DataConfig {
            kind: DatasetKind::Digits,
            samples: 400,
            noise_features: 0,
            val_fraction: 0.25,
            seed: 2,
        },
        train: half_budget(5),
        init_seed: 11,
    }
}

pub struct ToyResult {
    pub outcome: TrainOutcome,
    pub checkpoint: Vec<u8>,
    pub log: String,
}

impl Toy {
    pub fn run(&self, hw: &HardwareConfig) -> Result<ToyResult> {
        let (train, val) = self
            .data
            .generate()
            .split(self.data.val_fraction, self.data.seed);
        let net = TinyNet::new(&self.layers, &mut ChaCha8Rng::seed_from_u64(self.init_seed))?;
        let outcome = run(net, &train, &val, hw, &self.train)?;
        let checkpoint = Checkpoint {
            net: outcome.net.clone(),
            hardware: hw.clone(),
            q: outcome.q.clone(),
            schedule: Some(outcome.schedule.clone()),
        }
        .to_bytes()?;
        let log = log_csv(&outcome.log);
        Ok(ToyResult {
            outcome,
            checkpoint,
            log,
        })
    }
}
