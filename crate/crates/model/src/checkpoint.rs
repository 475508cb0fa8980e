//! Checkpoints: a little-endian tensor blob (`.bin`) plus a JSON index
//! (`.json`) naming each tensor's shape and offset and carrying the
//! detector spec.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vfd_tensor::{Float, Tensor};

use crate::signal::{RangeNorm, TemporalNoiseConfig};
use crate::{Detector, DetectorSpec, ModelError, Result};

const FORMAT: &str = "vfd-checkpoint-1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset in elements.
    pub offset: usize,
    pub len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointIndex {
    pub format: String,
    pub dtype: String,
    pub spec: DetectorSpec,
    pub temporal: TemporalNoiseConfig,
    pub params: Vec<TensorEntry>,
    pub buffers: Vec<TensorEntry>,
    /// Free-form metadata (epoch, accuracy, ...).
    #[serde(default)]
    pub meta: serde_json::Value,
}

/// The `.bin` and `.json` paths for a checkpoint stem.
pub fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ModelError + '_ {
    move |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn dtype<T: Float>() -> &'static str {
    if std::mem::size_of::<T>() == 4 {
        "f32"
    } else {
        "f64"
    }
}

impl<T: Float> Detector<T> {
    fn buffers(&self) -> Vec<(String, Vec<f64>)> {
        let mut names: Vec<&String> = self.bn.keys().collect();
        names.sort();
        let mut out = Vec::new();
        for n in names {
            let s = &self.bn[n];
            out.push((format!("{n}.running_mean"), s.running_mean.iter().map(|v| v.to_f64_lossy()).collect()));
            out.push((format!("{n}.running_var"), s.running_var.iter().map(|v| v.to_f64_lossy()).collect()));
        }
        if let Some(r) = self.temporal_norm.running {
            out.push(("temporal.norm".into(), vec![r.mean, r.scale]));
        }
        out
    }

    /// Writes `<stem>.bin` and `<stem>.json`.
    pub fn save(&self, stem: &Path, meta: serde_json::Value) -> Result<()> {
        let (bin, json) = paths(stem);
        if let Some(dir) = bin.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io(dir))?;
        }
        let mut bytes = Vec::new();
        let mut offset = 0;
        let mut push = |values: &mut dyn Iterator<Item = f64>, bytes: &mut Vec<u8>| {
            let mut n = 0;
            for v in values {
                if dtype::<T>() == "f32" {
                    bytes.extend_from_slice(&(v as f32).to_le_bytes());
                } else {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
                n += 1;
            }
            let start = offset;
            offset += n;
            (start, n)
        };
        let mut params = Vec::new();
        for (name, value) in self.params.names().iter().zip(self.params.values()) {
            let (off, len) = push(&mut value.data().iter().map(|v| v.to_f64_lossy()), &mut bytes);
            params.push(TensorEntry {
                name: name.clone(),
                shape: value.shape().to_vec(),
                offset: off,
                len,
            });
        }
        let mut buffers = Vec::new();
        for (name, values) in self.buffers() {
            let (off, len) = push(&mut values.iter().copied(), &mut bytes);
            buffers.push(TensorEntry {
                name,
                shape: vec![len],
                offset: off,
                len,
            });
        }
        let index = CheckpointIndex {
            format: FORMAT.into(),
            dtype: dtype::<T>().into(),
            spec: self.spec.clone(),
            temporal: self.temporal_cfg.clone(),
            params,
            buffers,
            meta,
        };
        fs::write(&bin, bytes).map_err(io(&bin))?;
        let text = serde_json::to_string_pretty(&index).expect("index serializes");
        fs::write(&json, text).map_err(io(&json))?;
        Ok(())
    }

    /// Restores a detector saved by [`Detector::save`].
    pub fn load(stem: &Path) -> Result<(Self, serde_json::Value)> {
        let (bin, json) = paths(stem);
        let text = fs::read_to_string(&json).map_err(io(&json))?;
        let index: CheckpointIndex = serde_json::from_str(&text).map_err(|e| ModelError::Format {
            what: "checkpoint index",
            detail: e.to_string(),
        })?;
        if index.format != FORMAT {
            return Err(bad(format!("unknown format {:?}", index.format)));
        }
        let width = match index.dtype.as_str() {
            "f32" => 4,
            "f64" => 8,
            d => return Err(bad(format!("unknown dtype {d}"))),
        };
        let bytes = fs::read(&bin).map_err(io(&bin))?;
        let read = |e: &TensorEntry| -> Result<Vec<f64>> {
            let end = (e.offset + e.len) * width;
            if end > bytes.len() {
                return Err(bad(format!("tensor {} runs past the end of the blob", e.name)));
            }
            Ok(bytes[e.offset * width..end]
                .chunks_exact(width)
                .map(|c| {
                    if width == 4 {
                        f32::from_le_bytes(c.try_into().unwrap()) as f64
                    } else {
                        f64::from_le_bytes(c.try_into().unwrap())
                    }
                })
                .collect())
        };
        let mut det = Detector::with_temporal_config(&index.spec, index.temporal.clone(), 0)?;
        if index.params.len() != det.params.len() {
            return Err(bad(format!("{} parameters stored, architecture has {}", index.params.len(), det.params.len())));
        }
        for e in &index.params {
            let id = det.params.id(&e.name).ok_or_else(|| bad(format!("unexpected parameter {}", e.name)))?;
            if det.params.value(id).shape() != e.shape.as_slice() {
                return Err(bad(format!("parameter {} has shape {:?}", e.name, e.shape)));
            }
            let values = read(e)?;
            *det.params.value_mut(id) = Tensor::from_vec(e.shape.clone(), values.into_iter().map(T::lit).collect())?;
        }
        for e in &index.buffers {
            let values = read(e)?;
            if e.name == "temporal.norm" {
                if values.len() != 2 {
                    return Err(bad("temporal.norm must hold two values".into()));
                }
                det.temporal_norm.running = Some(RangeNorm {
                    mean: values[0],
                    scale: values[1],
                });
                continue;
            }
            let (layer, field) = e.name.rsplit_once('.').ok_or_else(|| bad(format!("bad buffer name {}", e.name)))?;
            let state = det.bn.get_mut(layer).ok_or_else(|| bad(format!("unexpected buffer {}", e.name)))?;
            let target = match field {
                "running_mean" => &mut state.running_mean,
                "running_var" => &mut state.running_var,
                _ => return Err(bad(format!("unexpected buffer {}", e.name))),
            };
            if target.len() != values.len() {
                return Err(bad(format!("buffer {} has {} values", e.name, values.len())));
            }
            *target = values.into_iter().map(T::lit).collect();
        }
        Ok((det, index.meta))
    }
}

fn bad(detail: String) -> ModelError {
    ModelError::Format {
        what: "checkpoint",
        detail,
    }
}
