//! Parameter file.
//!
//! ```text
//! "RMRA" | version u32 LE | echo length u32 LE | echo JSON {config, classes}
//! per tensor, in build order: rank u32 LE | extents u32 LE… | values f64 LE…
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig, ModelError, ModelParams};
use crate::tensor::{Real, Tensor};

pub const PARAMS_MAGIC: [u8; 4] = *b"RMRA";
pub const PARAMS_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Echo {
    config: ModelConfig,
    #[serde(default)]
    classes: Vec<String>,
}

/// Writes `model` with an optional list of class names.
pub fn save_params(model: &Model, classes: &[String], path: &Path) -> Result<(), ModelError> {
    let echo = serde_json::to_vec(&Echo {
        config: model.config.clone(),
        classes: classes.to_vec(),
    })
    .map_err(|e| ModelError::Integrity(e.to_string()))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&PARAMS_MAGIC)?;
    w.write_all(&PARAMS_VERSION.to_le_bytes())?;
    w.write_all(&(echo.len() as u32).to_le_bytes())?;
    w.write_all(&echo)?;
    for t in model.params.leaves() {
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &e in t.shape() {
            w.write_all(&(e as u32).to_le_bytes())?;
        }
        for &v in t.data() {
            w.write_all(&(v as f64).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(ModelError::Integrity(format!(
                "file ends at byte {}, needed {end}",
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Reads a parameter file, returning the model and its class names.
pub fn load_model(path: &Path) -> Result<(Model, Vec<String>), ModelError> {
    let bytes = fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if magic != PARAMS_MAGIC {
        return Err(ModelError::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != PARAMS_VERSION {
        return Err(ModelError::Version(version));
    }
    let echo_len = r.u32()? as usize;
    let echo: Echo =
        serde_json::from_slice(r.take(echo_len)?).map_err(|e| ModelError::Integrity(e.to_string()))?;
    // shapes to expect come from the echoed config
    let mut model = Model::new(echo.config)?;
    for (n, slot) in model.params.leaves_mut().into_iter().enumerate() {
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|e| e as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if shape != slot.shape() {
            return Err(ModelError::ShapeMismatch(format!(
                "tensor {n} stored as {shape:?}, config implies {:?}",
                slot.shape()
            )));
        }
        let raw = r.take(8 * slot.len())?;
        let values: Vec<Real> = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()) as Real)
            .collect();
        *slot = Tensor::new(&shape, values)?;
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Integrity(format!(
            "{} unexpected trailing bytes",
            bytes.len() - r.pos
        )));
    }
    if !model.params.is_finite() {
        return Err(ModelError::Integrity("non-finite parameter value".into()));
    }
    Ok((model, echo.classes))
}

/// Reads a parameter file and checks it against an expected config.
pub fn load_params(path: &Path, expected: &ModelConfig) -> Result<ModelParams, ModelError> {
    let (model, _) = load_model(path)?;
    let want = ModelParams::init(expected)?;
    for (n, (got, want)) in model.params.leaves().iter().zip(want.leaves()).enumerate() {
        if got.shape() != want.shape() {
            return Err(ModelError::ShapeMismatch(format!(
                "tensor {n} is {:?}, expected config needs {:?}",
                got.shape(),
                want.shape()
            )));
        }
    }
    let (got, want) = (model.params.leaves().len(), want.leaves().len());
    if got != want {
        return Err(ModelError::ShapeMismatch(format!("{got} tensors stored, config needs {want}")));
    }
    Ok(model.params)
}
