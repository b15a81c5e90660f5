use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Arch, EpochLog, ModelSpec, Network, TrainedModel};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};
use crate::layers::{Conv2d, Dense, Layer, MaxPool2d};
use crate::tensor::Tensor;

const MODEL_MAGIC: &[u8; 8] = b"XAIBMODL";
const FORMAT_VERSION: u32 = 1;

const DENSE: u8 = 1;
const CONV: u8 = 2;
const POOL: u8 = 3;
const RELU: u8 = 4;
const SOFTMAX: u8 = 5;
const FLATTEN: u8 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSidecar {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub train_log: Vec<EpochLog>,
    pub config_hash: String,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn write_dims(w: &mut ByteWriter, dims: &[usize]) {
    w.u32(dims.len() as u32);
    dims.iter().for_each(|&d| w.u32(d as u32));
}

fn read_dims(r: &mut ByteReader) -> Result<Vec<usize>> {
    let n = r.u32()? as usize;
    (0..n).map(|_| r.u32().map(|d| d as usize)).collect()
}

fn write_params(w: &mut ByteWriter, weight: &Tensor, bias: Option<&Tensor>, l2: f64) {
    write_dims(w, weight.shape());
    w.f64(l2);
    w.f64s(weight.data());
    w.u8(u8::from(bias.is_some()));
    if let Some(b) = bias {
        w.f64s(b.data());
    }
}

fn read_params(r: &mut ByteReader, path: &Path) -> Result<(Tensor, Option<Tensor>, f64)> {
    let shape = read_dims(r)?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::artifact(path, format!("bad weight shape {shape:?}")));
    }
    let l2 = r.f64()?;
    let weight = Tensor::new(shape.clone(), r.f64s(shape.iter().product())?)?;
    let bias = match r.u8()? {
        0 => None,
        1 => Some(Tensor::from_vec(r.f64s(shape[0])?)),
        b => return Err(Error::artifact(path, format!("bad bias flag {b}"))),
    };
    Ok((weight, bias, l2))
}

impl Network {
    /// Binary layout: header, u32 arch id, map and input dims, u32 layer count,
    /// then one record per layer (u8 kind followed by its parameters).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_header(MODEL_MAGIC, FORMAT_VERSION);
        w.u32(self.arch.id());
        write_dims(&mut w, &self.map_shape);
        write_dims(&mut w, &self.input_shape);
        w.u32(self.layers.len() as u32);
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    w.u8(DENSE);
                    write_params(&mut w, &d.weight, d.bias.as_ref(), d.l2);
                }
                Layer::Conv2d(c) => {
                    w.u8(CONV);
                    w.u32(c.stride as u32);
                    write_params(&mut w, &c.weight, c.bias.as_ref(), c.l2);
                }
                Layer::MaxPool2d(p) => {
                    w.u8(POOL);
                    w.u32(p.window as u32);
                    w.u32(p.stride as u32);
                }
                Layer::Relu => w.u8(RELU),
                Layer::Softmax => w.u8(SOFTMAX),
                Layer::Flatten => w.u8(FLATTEN),
            }
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::with_header(bytes, MODEL_MAGIC, FORMAT_VERSION, path)?;
        let id = r.u32()?;
        let arch = Arch::from_id(id).ok_or_else(|| Error::artifact(path, format!("unknown arch id {id}")))?;
        let map_shape = read_dims(&mut r)?;
        let input_shape = read_dims(&mut r)?;
        let n = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n.min(64));
        for _ in 0..n {
            let layer = match r.u8()? {
                DENSE => {
                    let (weight, bias, l2) = read_params(&mut r, path)?;
                    let mut d = Dense::new(weight, bias)?;
                    d.l2 = l2;
                    Layer::Dense(d)
                }
                CONV => {
                    let stride = r.u32()? as usize;
                    let (weight, bias, l2) = read_params(&mut r, path)?;
                    let mut c = Conv2d::new(weight, bias, stride)?;
                    c.l2 = l2;
                    Layer::Conv2d(c)
                }
                POOL => Layer::MaxPool2d(MaxPool2d {
                    window: r.u32()? as usize,
                    stride: r.u32()? as usize,
                }),
                RELU => Layer::Relu,
                SOFTMAX => Layer::Softmax,
                FLATTEN => Layer::Flatten,
                k => return Err(Error::artifact(path, format!("unknown layer kind {k}"))),
            };
            layers.push(layer);
        }
        r.finish()?;
        Network::new(arch, map_shape, input_shape, layers).map_err(|e| Error::artifact(path, e.to_string()))
    }
}

impl TrainedModel {
    /// Writes the weight file and its JSON sidecar.
    pub fn write(&self, path: &Path, config_hash: &str) -> Result<()> {
        crate::io::write_atomic(path, &self.network.to_bytes())?;
        let sidecar = ModelSidecar {
            format_version: FORMAT_VERSION,
            spec: self.spec.clone(),
            train_log: self.train_log.clone(),
            config_hash: config_hash.to_string(),
        };
        crate::io::write_json(&sidecar_path(path), &sidecar)
    }

    pub fn read(path: &Path) -> Result<(Self, ModelSidecar)> {
        let sidecar: ModelSidecar = crate::io::read_json(&sidecar_path(path))?;
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let network = Network::from_bytes(&bytes, path)?;
        if network.arch != sidecar.spec.arch {
            return Err(Error::artifact(path, "architecture disagrees with the sidecar"));
        }
        let model = TrainedModel {
            spec: sidecar.spec.clone(),
            network,
            train_log: sidecar.train_log.clone(),
        };
        Ok((model, sidecar))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for arch in [Arch::Mlp, Arch::Cnn] {
            let spec = ModelSpec {
                arch,
                hidden: vec![7],
                conv_channels: 2,
                dense_width: 5,
                classes: 3,
                input_shape: (14, 12),
                ..ModelSpec::default()
            };
            let model = TrainedModel {
                network: spec.build(9).unwrap(),
                spec,
                train_log: Vec::new(),
            };
            let path = dir.path().join(format!("{}.bin", arch.name()));
            model.write(&path, "abc").unwrap();
            let (back, sidecar) = TrainedModel::read(&path).unwrap();
            assert_eq!(back, model);
            assert_eq!(sidecar.config_hash, "abc");
            let x = Tensor::full(&[14, 12], 0.3);
            assert_eq!(back.network.logits(&x).unwrap(), model.network.logits(&x).unwrap());
        }
    }

    #[test]
    fn truncated_file_is_an_artifact_error() {
        let net = ModelSpec {
            hidden: vec![3],
            classes: 2,
            input_shape: (4, 4),
            ..ModelSpec::default()
        }
        .build(0)
        .unwrap();
        let bytes = net.to_bytes();
        let err = Network::from_bytes(&bytes[..bytes.len() - 3], Path::new("m.bin")).unwrap_err();
        assert_eq!(err.kind(), "artifact");
        let mut bad = bytes.clone();
        bad[0] = b'Y';
        assert!(Network::from_bytes(&bad, Path::new("m.bin")).is_err());
    }
}
