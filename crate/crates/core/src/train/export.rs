//! Per-sample feature export.

use std::fmt::Write;
use std::fs;
use std::path::Path;

use super::trainer::predict_split;
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::model::{Hqnn, ModelParams};

/// Writes `id,label,g0..g{D-1},e0..e{n-1}` rows in manifest order, where
/// `id` is the manifest record index. Returns the number of rows.
pub fn export_features(
    model: &Hqnn,
    params: &ModelParams,
    data: &Dataset,
    split: Split,
    path: &Path,
) -> Result<usize> {
    let p = predict_split(model, params, data, split, 16)?;
    let (gw, ew) = (p.gated[0].len(), p.expectations[0].len());
    let mut s = String::from("id,label");
    for k in 0..gw {
        let _ = write!(s, ",g{k}");
    }
    for k in 0..ew {
        let _ = write!(s, ",e{k}");
    }
    s.push('\n');
    for i in 0..p.indices.len() {
        let _ = write!(s, "{},{}", p.indices[i], p.labels[i]);
        for v in p.gated[i].iter().chain(&p.expectations[i]) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| Error::file(path, e))?;
    Ok(p.indices.len())
}
