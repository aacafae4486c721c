//! JSON model files.
//!
//! Only the Wishart parameters and the seed are stored; the ensemble is
//! regenerated when the model is used.

use std::fs;
use std::path::Path;

use fwda_core::{FwdaModel, ModelParts, SymmetricMatrix, Variant};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u64 = 1;

/// The model as a JSON value. `serde_json` prints floats in their shortest
/// round-trip form, so reloading is exact.
pub fn model_to_json(model: &FwdaModel) -> Value {
    let w = model.wishart();
    json!({
        "format_version": FORMAT_VERSION,
        "variant": model.variant().as_str(),
        "dim": model.dim(),
        "lambda": model.lambda(),
        "ensemble_size": model.ensemble_size(),
        "seed": model.seed(),
        "dof": w.dof(),
        "dof_requested": w.dof_requested(),
        "global_mean": model.global_mean(),
        "pos_mean": model.pos_mean(),
        "neg_mean": model.neg_mean(),
        "scale": w.scale().to_row_major(),
    })
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| Error::model_format(name, "missing"))
}

fn as_u64(obj: &Map<String, Value>, name: &str) -> Result<u64> {
    field(obj, name)?
        .as_u64()
        .ok_or_else(|| Error::model_format(name, "expected a non-negative integer"))
}

fn as_f64(obj: &Map<String, Value>, name: &str) -> Result<f64> {
    field(obj, name)?
        .as_f64()
        .ok_or_else(|| Error::model_format(name, "expected a number"))
}

fn as_vec(obj: &Map<String, Value>, name: &str, len: usize) -> Result<Vec<f64>> {
    let arr = field(obj, name)?
        .as_array()
        .ok_or_else(|| Error::model_format(name, "expected an array"))?;
    if arr.len() != len {
        return Err(Error::model_format(
            name,
            format!("expected {len} entries, found {}", arr.len()),
        ));
    }
    arr.iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::model_format(name, "expected an array of numbers"))
        })
        .collect()
}

/// Rebuilds a model from its JSON form, naming the first bad field on error.
pub fn model_from_json(value: &Value) -> Result<FwdaModel> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::model_format("<root>", "expected a JSON object"))?;
    let version = as_u64(obj, "format_version")?;
    if version != FORMAT_VERSION {
        return Err(Error::model_format(
            "format_version",
            format!("unsupported version {version}"),
        ));
    }
    let variant: Variant = field(obj, "variant")?
        .as_str()
        .ok_or_else(|| Error::model_format("variant", "expected a string"))?
        .parse()
        .map_err(|e| Error::model_format("variant", format!("{e}")))?;
    let dim = as_u64(obj, "dim")? as usize;
    if dim == 0 {
        return Err(Error::model_format("dim", "must be positive"));
    }
    let lambda = as_f64(obj, "lambda")?;
    let ensemble_size = as_u64(obj, "ensemble_size")? as usize;
    if ensemble_size == 0 {
        return Err(Error::model_format("ensemble_size", "must be positive"));
    }
    let seed = as_u64(obj, "seed")?;
    let dof = as_f64(obj, "dof")?;
    let dof_requested = as_f64(obj, "dof_requested")?;
    let global_mean = as_vec(obj, "global_mean", dim)?;
    let pos_mean = as_vec(obj, "pos_mean", dim)?;
    let neg_mean = as_vec(obj, "neg_mean", dim)?;
    let scale_entries = as_vec(obj, "scale", dim * dim)?;
    let scale = SymmetricMatrix::from_row_slice(dim, &scale_entries)
        .map_err(|e| Error::model_format("scale", format!("{e}")))?;
    let model = FwdaModel::from_parts(ModelParts {
        variant,
        lambda,
        ensemble_size,
        seed,
        dof_requested,
        global_mean,
        pos_mean,
        neg_mean,
        scale,
    })
    .map_err(|e| match e {
        fwda_core::FwdaError::NotPositiveDefinite(_) => {
            Error::model_format("scale", "not positive definite")
        }
        other => Error::model_format("dof_requested", format!("{other}")),
    })?;
    if model.wishart().dof() != dof {
        return Err(Error::model_format(
            "dof",
            format!(
                "expected {} from dof_requested and dim, found {dof}",
                model.wishart().dof()
            ),
        ));
    }
    Ok(model)
}

pub fn save_model(model: &FwdaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model_to_json(model).to_string();
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<FwdaModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Error::model_format("<root>", format!("invalid JSON: {e}")))?;
    model_from_json(&value)
}
