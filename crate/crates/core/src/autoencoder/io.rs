//! Model files.
//!
//! A model file is a TOML document:
//!
//! ```toml
//! format_version = 1
//! scheme = "spl"
//! M = 256
//! n = 2
//! E = 256
//! H = 256
//! seed = 7
//! init = "glorot-uniform"
//!
//! [scenario]      # the full scenario the model was trained for
//! [tx.embedding]  # rows, cols, data (row-major)
//! [tx.dense]      # b, then [tx.dense.w] with rows, cols, data
//! [rx.l1]         # same layout as tx.dense
//! [rx.l2]
//! ```
//!
//! Every weight is written with 17 significant digits, so reading a file
//! back reproduces the parameters bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Deserialize;

use super::{ModelParams, Scenario, Scheme};
use crate::error::{Error, Result};
use crate::math::{LayerParams, RealMat};
use crate::rng::seed_serde;

pub const FORMAT_VERSION: u32 = 1;
const INIT_SCHEME: &str = "glorot-uniform";

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct ModelFile {
    format_version: u32,
    scheme: Scheme,
    M: usize,
    n: usize,
    E: usize,
    H: usize,
    #[serde(with = "crate::rng::seed_serde")]
    seed: u64,
    init: String,
    scenario: Scenario,
    tx: TxSection,
    rx: RxSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TxSection {
    embedding: MatrixSection,
    dense: LayerSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RxSection {
    l1: LayerSection,
    l2: LayerSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerSection {
    b: Vec<f64>,
    w: MatrixSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixSection {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn write_values(out: &mut String, values: &[f64], per_line: usize) {
    out.push_str("[\n");
    for chunk in values.chunks(per_line.max(1)) {
        out.push_str("  ");
        for v in chunk {
            write!(out, "{v:.16e}, ").expect("write to string");
        }
        out.push('\n');
    }
    out.push_str("]\n");
}

fn write_matrix(out: &mut String, header: &str, m: &RealMat) {
    writeln!(out, "\n[{header}]\nrows = {}\ncols = {}", m.rows(), m.cols()).expect("write to string");
    out.push_str("data = ");
    write_values(out, m.as_slice(), m.cols());
}

fn write_layer(out: &mut String, header: &str, layer: &LayerParams) {
    writeln!(out, "\n[{header}]").expect("write to string");
    out.push_str("b = ");
    write_values(out, &layer.bias, 8);
    write_matrix(out, &format!("{header}.w"), &layer.weights);
}

/// Serializes `params` with the scenario they were trained for.
pub fn model_to_string(params: &ModelParams, scenario: &Scenario) -> Result<String> {
    params.validate()?;
    check_compatible(params, scenario)?;
    let d = params.dims();
    let mut out = String::new();
    writeln!(
        out,
        "format_version = {FORMAT_VERSION}\nscheme = \"{}\"\nM = {}\nn = {}\nE = {}\nH = {}\nseed = {}\ninit = \"{INIT_SCHEME}\"",
        scenario.scheme, d.messages, d.channel_uses, d.embed_dim, d.hidden_dim, seed_serde::literal(scenario.seed)
    )
    .expect("write to string");

    // Nested `[scenario.*]` tables are emitted by the serializer with their
    // full dotted names.
    let scenario_toml = toml::to_string(&ScenarioSection { scenario })
        .map_err(|e| Error::Config(format!("cannot serialize scenario: {e}")))?;
    out.push('\n');
    out.push_str(&scenario_toml);

    write_matrix(&mut out, "tx.embedding", &params.tx_embedding);
    write_layer(&mut out, "tx.dense", &params.tx_dense);
    write_layer(&mut out, "rx.l1", &params.rx_hidden);
    write_layer(&mut out, "rx.l2", &params.rx_out);
    Ok(out)
}

#[derive(serde::Serialize)]
struct ScenarioSection<'a> {
    scenario: &'a Scenario,
}

fn matrix(section: MatrixSection, name: &str) -> Result<RealMat> {
    RealMat::from_vec(section.rows, section.cols, section.data)
        .map_err(|e| Error::CorruptModel(format!("{name}: {e}")))
}

fn layer(section: LayerSection, name: &str) -> Result<LayerParams> {
    let w = matrix(section.w, &format!("{name}.w"))?;
    LayerParams::new(w, section.b).map_err(|e| Error::CorruptModel(format!("{name}: {e}")))
}

/// Parses a model file body. Returns the parameters and their scenario.
pub fn model_from_str(text: &str) -> Result<(ModelParams, Scenario)> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| Error::CorruptModel(format!("not a valid model document: {e}")))?;
    match table.get("format_version").and_then(|v| v.as_integer()) {
        Some(v) if v == i64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(Error::ModelVersion {
                found: u32::try_from(v).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(Error::CorruptModel("missing format_version".into())),
    }
    let file: ModelFile = table
        .try_into()
        .map_err(|e| Error::CorruptModel(e.to_string()))?;
    debug_assert_eq!(file.format_version, FORMAT_VERSION);
    if file.init != INIT_SCHEME {
        return Err(Error::CorruptModel(format!("unknown init scheme `{}`", file.init)));
    }

    let params = ModelParams {
        tx_embedding: matrix(file.tx.embedding, "tx.embedding")?,
        tx_dense: layer(file.tx.dense, "tx.dense")?,
        rx_hidden: layer(file.rx.l1, "rx.l1")?,
        rx_out: layer(file.rx.l2, "rx.l2")?,
    };
    params
        .validate()
        .map_err(|e| Error::CorruptModel(e.to_string()))?;
    let d = params.dims();
    for (what, header, actual) in [
        ("M", file.M, d.messages),
        ("n", file.n, d.channel_uses),
        ("E", file.E, d.embed_dim),
        ("H", file.H, d.hidden_dim),
    ] {
        if header != actual {
            return Err(Error::CorruptModel(format!(
                "header says {what} = {header} but the weights have {what} = {actual}"
            )));
        }
    }
    let scenario = file.scenario;
    if scenario.scheme != file.scheme || scenario.seed != file.seed {
        return Err(Error::CorruptModel("header disagrees with [scenario]".into()));
    }
    check_compatible(&params, &scenario).map_err(|e| Error::CorruptModel(e.to_string()))?;
    Ok((params, scenario))
}

/// Errors with [`Error::ModelDimension`] when the model's sizes differ from
/// the scenario's.
pub fn check_compatible(params: &ModelParams, scenario: &Scenario) -> Result<()> {
    let d = params.dims();
    for (what, model, requested) in [
        ("M", d.messages, scenario.messages),
        ("n", d.channel_uses, scenario.channel_uses),
        ("E", d.embed_dim, scenario.embed_dim),
        ("H", d.hidden_dim, scenario.hidden_dim),
    ] {
        if model != requested {
            return Err(Error::ModelDimension {
                what,
                model,
                requested,
            });
        }
    }
    Ok(())
}

pub fn save_model(path: &Path, params: &ModelParams, scenario: &Scenario) -> Result<()> {
    fs::write(path, model_to_string(params, scenario)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(ModelParams, Scenario)> {
    model_from_str(&fs::read_to_string(path)?)
}
