//! Binary model checkpoints: the plan and training configuration as
//! embedded JSON, every weight tensor as little-endian f64 blocks.

use super::{ConvParams, DenseParams, LayerPlan, NetworkParameters, TrainConfig};
use crate::error::{PipelineError, Result};
use ndarray::{Array1, Array2, Array4};
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 7] = b"SPNET1\0";
const VERSION: u32 = 1;

pub fn save_checkpoint(
    params: &NetworkParameters,
    train_cfg: &TrainConfig,
    path: &Path,
) -> Result<()> {
    let plan_json = serde_json::to_vec(&params.plan)
        .map_err(|e| PipelineError::InvalidParameter(format!("plan serialization: {e}")))?;
    let cfg_json = serde_json::to_vec(train_cfg)
        .map_err(|e| PipelineError::InvalidParameter(format!("config serialization: {e}")))?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&params.seed.to_le_bytes());
    out.extend_from_slice(&(plan_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&plan_json);
    out.extend_from_slice(&(cfg_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg_json);

    out.extend_from_slice(&(params.conv.len() as u32).to_le_bytes());
    for p in &params.conv {
        let (o, kr, kc, i) = p.weights.dim();
        for d in [o, kr, kc, i] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &w in p.weights.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(p.bias.len() as u32).to_le_bytes());
        for &b in p.bias.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out.extend_from_slice(&(params.dense.len() as u32).to_le_bytes());
    for p in &params.dense {
        let (o, i) = p.weights.dim();
        for d in [o, i] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &w in p.weights.iter() {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(p.bias.len() as u32).to_le_bytes());
        for &b in p.bias.iter() {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }

    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

struct Reader {
    bytes: Vec<u8>,
    at: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let slice = self.bytes.get(self.at..self.at + n).ok_or_else(|| {
            PipelineError::Truncated(format!("checkpoint ends inside field at {}", self.at))
        })?;
        self.at += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_checkpoint(path: &Path) -> Result<(NetworkParameters, TrainConfig)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader { bytes, at: 0 };

    if r.take(7)? != MAGIC {
        return Err(PipelineError::MalformedHeader("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(PipelineError::MalformedHeader(format!(
            "checkpoint version {version}, expected {VERSION}"
        )));
    }
    let seed = r.u64()?;
    let plan_len = r.u32()? as usize;
    let plan: LayerPlan = serde_json::from_slice(r.take(plan_len)?)
        .map_err(|e| PipelineError::MalformedHeader(format!("plan block: {e}")))?;
    plan.validate()?;
    let cfg_len = r.u32()? as usize;
    let train_cfg: TrainConfig = serde_json::from_slice(r.take(cfg_len)?)
        .map_err(|e| PipelineError::MalformedHeader(format!("config block: {e}")))?;

    let n_conv = r.u32()? as usize;
    let mut conv = Vec::with_capacity(n_conv);
    for _ in 0..n_conv {
        let dims = (
            r.u32()? as usize,
            r.u32()? as usize,
            r.u32()? as usize,
            r.u32()? as usize,
        );
        let weights = Array4::from_shape_vec(dims, r.f64s(dims.0 * dims.1 * dims.2 * dims.3)?)
            .map_err(|e| PipelineError::ShapeMismatch(e.to_string()))?;
        let bias_len = r.u32()? as usize;
        let bias = Array1::from_vec(r.f64s(bias_len)?);
        conv.push(ConvParams { weights, bias });
    }
    let n_dense = r.u32()? as usize;
    let mut dense = Vec::with_capacity(n_dense);
    for _ in 0..n_dense {
        let dims = (r.u32()? as usize, r.u32()? as usize);
        let weights = Array2::from_shape_vec(dims, r.f64s(dims.0 * dims.1)?)
            .map_err(|e| PipelineError::ShapeMismatch(e.to_string()))?;
        let bias_len = r.u32()? as usize;
        let bias = Array1::from_vec(r.f64s(bias_len)?);
        dense.push(DenseParams { weights, bias });
    }

    let params = NetworkParameters { plan, conv, dense, seed };
    let expected_conv = params
        .plan
        .layers
        .iter()
        .filter(|l| matches!(l, super::LayerSpec::Conv { .. }))
        .count();
    let expected_dense = params
        .plan
        .layers
        .iter()
        .filter(|l| matches!(l, super::LayerSpec::Dense { .. } | super::LayerSpec::Output { .. }))
        .count();
    if params.conv.len() != expected_conv || params.dense.len() != expected_dense {
        return Err(PipelineError::ShapeMismatch(format!(
            "checkpoint holds {} conv and {} dense tensors, plan expects {expected_conv} and {expected_dense}",
            params.conv.len(),
            params.dense.len()
        )));
    }
    Ok((params, train_cfg))
}
