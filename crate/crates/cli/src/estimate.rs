use std::fmt::Write as _;
use std::path::Path;

use energon::energy::{total_energy, DramMode, HardwareConfig, LayerSpec, SupportPattern};
use energon::rational::format;
use serde::Deserialize;
use serde_json::Value;

use crate::error::CliResult;
use crate::input::{read_json, support_bits, write};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateFile {
    hardware: HardwareConfig,
    layers: Vec<LayerEntry>,
    #[serde(default)]
    dram_mode: DramMode,
}

#[derive(Deserialize)]
struct LayerEntry {
    #[serde(flatten)]
    spec: LayerSpec,
    /// Occupancy of the weights; dense when absent.
    #[serde(default)]
    weight_support: Option<Value>,
    /// Occupancy of the layer input; dense when absent.
    #[serde(default)]
    input_support: Option<Value>,
}

pub const HEADER: &str =
    "layer,kind,n_mac,n_dram_w,n_cache_w,n_rf_w,n_dram_x,n_cache_x,n_rf_x,e_comp,e_data,energy";

fn pattern(
    layer: usize,
    shape: Vec<usize>,
    given: &Option<Value>,
    what: &str,
) -> CliResult<SupportPattern> {
    match given {
        None => Ok(SupportPattern::dense(layer, shape)),
        Some(v) => {
            let bits = support_bits(v, &format!("layers[{layer}].{what}"))?;
            Ok(SupportPattern::new(layer, shape, bits)?)
        }
    }
}

/// Per-layer access counts and energies as CSV, closed by a `total` row
/// when there is at least one layer.
pub fn report(path: &Path) -> CliResult<(String, String)> {
    let file: EstimateFile = read_json(path)?;
    for w in file.hardware.validate()? {
        eprintln!("warning: {w}");
    }
    let mut specs = Vec::new();
    let mut ws = Vec::new();
    let mut xs = Vec::new();
    for (i, l) in file.layers.iter().enumerate() {
        l.spec.validate()?;
        specs.push(l.spec);
        ws.push(pattern(
            i,
            l.spec.weight_shape(),
            &l.weight_support,
            "weight_support",
        )?);
        xs.push(pattern(
            i,
            l.spec.input_shape(),
            &l.input_support,
            "input_support",
        )?);
    }
    let e = total_energy(&specs, &ws, &xs, &file.hardware, file.dram_mode)?;

    let mut csv = String::from(HEADER);
    csv.push('\n');
    let mut sums = [0u64; 7];
    for (i, (spec, le)) in specs.iter().zip(&e.layers).enumerate() {
        let c = le.counts;
        let counts = [
            c.n_mac,
            c.n_dram_w,
            c.n_cache_w,
            c.n_rf_w,
            c.n_dram_x,
            c.n_cache_x,
            c.n_rf_x,
        ];
        for (s, v) in sums.iter_mut().zip(counts) {
            *s += v;
        }
        let kind = match spec {
            LayerSpec::Fc(_) => "fc",
            LayerSpec::Conv(_) => "conv",
        };
        row(
            &mut csv,
            &i.to_string(),
            kind,
            &counts,
            &le.e_comp,
            &le.e_data,
        );
    }
    if !specs.is_empty() {
        row(&mut csv, "total", "", &sums, &e.e_comp, &e.e_data);
    }
    let summary = format!(
        "total energy {} (compute {}, data {})",
        format(&(&e.e_comp + &e.e_data)),
        format(&e.e_comp),
        format(&e.e_data)
    );
    Ok((csv, summary))
}

fn row(
    out: &mut String,
    label: &str,
    kind: &str,
    counts: &[u64; 7],
    comp: &energon::Rational,
    data: &energon::Rational,
) {
    let counts: Vec<String> = counts.iter().map(u64::to_string).collect();
    let _ = writeln!(
        out,
        "{label},{kind},{},{},{},{}",
        counts.join(","),
        format(comp),
        format(data),
        format(&(comp + data))
    );
}

pub fn run(config: &Path, out: Option<&Path>) -> CliResult<()> {
    let (csv, summary) = report(config)?;
    match out {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    eprintln!("{summary}");
    Ok(())
}
