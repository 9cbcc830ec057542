//! Checkpoint container: a textual header followed by raw little-endian
//! `f32` payloads in declaration order.
//!
//! ```text
//! gsm-checkpoint v1
//! model = input=1x28x28;classes=10;layers=...
//! iteration = 1234
//! master_seed = 7
//! rng_state = a1b2...,.... (four hex words)
//! normalization = div255
//! has_optimizer = true
//! tensor = kernel.0 784x300
//! ...
//! end-header
//! <binary payload>
//! ```
//!
//! Round-trips are bitwise: floats are serialized as raw IEEE-754 bits.
//! Resuming training from a checkpoint written at a metrics-interval
//! boundary reproduces an uninterrupted run exactly (batch order derives
//! from `master_seed` and the iteration counter alone).

use crate::error::{Error, Result};
use crate::nn::model::ModelSpec;
use crate::nn::params::ParamSet;
use crate::optim::OptimizerState;
use crate::tensor::Tensor;
use std::path::Path;

const MAGIC_LINE: &str = "gsm-checkpoint v1";
const END_HEADER: &str = "end-header";

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: ModelSpec,
    pub params: ParamSet,
    pub opt: Option<OptimizerState>,
    pub iteration: u64,
    pub master_seed: u64,
    pub rng_state: [u64; 4],
}

struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn tensor_entries(ckpt: &Checkpoint) -> Vec<(TensorEntry, &Tensor)> {
    fn entry<'a>(prefix: &str, idx: usize, t: &'a Tensor) -> (TensorEntry, &'a Tensor) {
        (
            TensorEntry { name: format!("{prefix}.{idx}"), shape: t.shape().to_vec() },
            t,
        )
    }
    let mut list: Vec<(TensorEntry, &Tensor)> = Vec::new();
    for (i, k) in ckpt.params.kernels.iter().enumerate() {
        list.push(entry("kernel", i, k));
    }
    for (i, b) in ckpt.params.biases.iter().enumerate() {
        list.push(entry("bias", i, b));
    }
    if let Some(opt) = &ckpt.opt {
        for (i, k) in opt.momentum.kernels.iter().enumerate() {
            list.push(entry("momentum_kernel", i, k));
        }
        for (i, b) in opt.momentum.biases.iter().enumerate() {
            list.push(entry("momentum_bias", i, b));
        }
        for (i, m) in opt.masks.iter().enumerate() {
            list.push(entry("mask", i, m));
        }
    }
    list
}

fn shape_text(shape: &[usize]) -> String {
    shape
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &Checkpoint) -> Result<()> {
    let path = path.as_ref();
    let mut header = String::new();
    header.push_str(MAGIC_LINE);
    header.push('\n');
    header.push_str(&format!("model = {}\n", ckpt.model.spec_string()));
    header.push_str(&format!("iteration = {}\n", ckpt.iteration));
    header.push_str(&format!("master_seed = {}\n", ckpt.master_seed));
    header.push_str(&format!(
        "rng_state = {:016x},{:016x},{:016x},{:016x}\n",
        ckpt.rng_state[0], ckpt.rng_state[1], ckpt.rng_state[2], ckpt.rng_state[3]
    ));
    header.push_str("normalization = div255\n");
    header.push_str(&format!("has_optimizer = {}\n", ckpt.opt.is_some()));
    let entries = tensor_entries(ckpt);
    for (entry, _) in &entries {
        header.push_str(&format!("tensor = {} {}\n", entry.name, shape_text(&entry.shape)));
    }
    header.push_str(END_HEADER);
    header.push('\n');

    let mut bytes = header.into_bytes();
    for (_, tensor) in &entries {
        bytes.reserve(tensor.len() * 4);
        for v in tensor.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;

    // Walk header lines up to the end marker.
    let mut offset = 0usize;
    let mut lines: Vec<String> = Vec::new();
    loop {
        let rest = &bytes[offset..];
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Format("checkpoint header never terminates".into()))?;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| Error::Format("checkpoint header is not UTF-8".into()))?
            .to_string();
        offset += nl + 1;
        if line == END_HEADER {
            break;
        }
        lines.push(line);
        if lines.len() > 10_000 {
            return Err(Error::Format("checkpoint header implausibly long".into()));
        }
    }
    let payload = &bytes[offset..];

    let first = lines
        .first()
        .ok_or_else(|| Error::Format("empty checkpoint header".into()))?;
    if first != MAGIC_LINE {
        if let Some(version) = first.strip_prefix("gsm-checkpoint ") {
            return Err(Error::Version(version.to_string()));
        }
        return Err(Error::Format(format!("not a checkpoint: first line {first:?}")));
    }

    let mut model = None;
    let mut iteration = None;
    let mut master_seed = None;
    let mut rng_state = None;
    let mut has_optimizer = None;
    let mut declared: Vec<TensorEntry> = Vec::new();
    for line in &lines[1..] {
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| Error::Format(format!("bad header line: {line}")))?;
        match key {
            "model" => model = Some(ModelSpec::parse(value)?),
            "iteration" => {
                iteration = Some(value.parse::<u64>().map_err(|_| {
                    Error::Format(format!("bad iteration count: {value}"))
                })?)
            }
            "master_seed" => {
                master_seed = Some(value.parse::<u64>().map_err(|_| {
                    Error::Format(format!("bad master seed: {value}"))
                })?)
            }
            "rng_state" => {
                let words = value
                    .split(',')
                    .map(|w| u64::from_str_radix(w.trim(), 16))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Format(format!("bad rng state: {value}")))?;
                if words.len() != 4 {
                    return Err(Error::Format("rng state needs 4 words".into()));
                }
                rng_state = Some([words[0], words[1], words[2], words[3]]);
            }
            "normalization" => {
                if value != "div255" {
                    return Err(Error::Format(format!("unknown normalization: {value}")));
                }
            }
            "has_optimizer" => {
                has_optimizer = Some(value.parse::<bool>().map_err(|_| {
                    Error::Format(format!("bad has_optimizer flag: {value}"))
                })?)
            }
            "tensor" => {
                let (name, shape) = value
                    .split_once(' ')
                    .ok_or_else(|| Error::Format(format!("bad tensor line: {value}")))?;
                let shape = shape
                    .split('x')
                    .map(|d| {
                        d.parse::<usize>()
                            .map_err(|_| Error::Format(format!("bad tensor shape: {value}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                declared.push(TensorEntry { name: name.to_string(), shape });
            }
            other => return Err(Error::Format(format!("unknown header key: {other}"))),
        }
    }

    let model = model.ok_or_else(|| Error::Format("checkpoint missing model".into()))?;
    let iteration = iteration.ok_or_else(|| Error::Format("checkpoint missing iteration".into()))?;
    let master_seed =
        master_seed.ok_or_else(|| Error::Format("checkpoint missing master_seed".into()))?;
    let rng_state = rng_state.ok_or_else(|| Error::Format("checkpoint missing rng_state".into()))?;
    let has_optimizer =
        has_optimizer.ok_or_else(|| Error::Format("checkpoint missing has_optimizer".into()))?;

    // The model is the source of truth for shapes; the declared list must
    // agree with it, and the payload must agree with the declared list.
    let kernel_shapes: Vec<Vec<usize>> = model
        .layers
        .iter()
        .filter_map(|l| l.kernel_shape())
        .map(|[r, c]| vec![r, c])
        .collect();
    let bias_shapes: Vec<Vec<usize>> =
        kernel_shapes.iter().map(|s| vec![s[1]]).collect();
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in kernel_shapes.iter().enumerate() {
        expected.push((format!("kernel.{i}"), s.clone()));
    }
    for (i, s) in bias_shapes.iter().enumerate() {
        expected.push((format!("bias.{i}"), s.clone()));
    }
    if has_optimizer {
        for (i, s) in kernel_shapes.iter().enumerate() {
            expected.push((format!("momentum_kernel.{i}"), s.clone()));
        }
        for (i, s) in bias_shapes.iter().enumerate() {
            expected.push((format!("momentum_bias.{i}"), s.clone()));
        }
        for (i, s) in kernel_shapes.iter().enumerate() {
            expected.push((format!("mask.{i}"), s.clone()));
        }
    }
    if declared.len() != expected.len() {
        return Err(Error::Corruption(format!(
            "header declares {} tensors, model layout wants {}",
            declared.len(),
            expected.len()
        )));
    }
    for (entry, (name, shape)) in declared.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Corruption(format!(
                "tensor {} declared as {:?}, expected {name} {shape:?}",
                entry.name, entry.shape
            )));
        }
    }

    let total: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
    if payload.len() != total * 4 {
        return Err(Error::Corruption(format!(
            "payload holds {} bytes, header wants {}",
            payload.len(),
            total * 4
        )));
    }

    let mut cursor = 0usize;
    let mut read_tensor = |shape: &[usize]| -> Tensor {
        let count: usize = shape.iter().product();
        let data: Vec<f32> = payload[cursor..cursor + count * 4]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        cursor += count * 4;
        Tensor::new(shape.to_vec(), data).expect("shape/count checked above")
    };

    let kernels: Vec<Tensor> = kernel_shapes.iter().map(|s| read_tensor(s)).collect();
    let biases: Vec<Tensor> = bias_shapes.iter().map(|s| read_tensor(s)).collect();
    let params = ParamSet { kernels, biases };
    let opt = if has_optimizer {
        let mk: Vec<Tensor> = kernel_shapes.iter().map(|s| read_tensor(s)).collect();
        let mb: Vec<Tensor> = bias_shapes.iter().map(|s| read_tensor(s)).collect();
        let masks: Vec<Tensor> = kernel_shapes.iter().map(|s| read_tensor(s)).collect();
        Some(OptimizerState {
            momentum: ParamSet { kernels: mk, biases: mb },
            masks,
            iteration,
        })
    } else {
        None
    };

    Ok(Checkpoint { model, params, opt, iteration, master_seed, rng_state })
}
