//! JSON checkpoint container: format tag, version, model config and every
//! tensor with its shape.

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, ModelParams};
use super::NeuralError;

pub const CHECKPOINT_FORMAT: &str = "pdaseq-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Tensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Container {
    format: String,
    version: u32,
    config: ModelConfig,
    tensors: Vec<Tensor>,
}

pub fn save_checkpoint(params: &ModelParams) -> String {
    let container = Container {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        config: params.config,
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, shape, data)| Tensor { name, shape, data: data.to_vec() })
            .collect(),
    };
    serde_json::to_string(&container).expect("checkpoint serializes")
}

pub fn load_checkpoint(text: &str) -> Result<ModelParams, NeuralError> {
    let c: Container = serde_json::from_str(text)?;
    if c.format != CHECKPOINT_FORMAT {
        return Err(NeuralError::Checkpoint(format!("unknown format `{}`", c.format)));
    }
    if c.version != CHECKPOINT_VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {}", c.version)));
    }
    let mut params = ModelParams::new(c.config);
    let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|(n, s, _)| (n, s)).collect();
    if expected.len() != c.tensors.len() {
        return Err(NeuralError::Checkpoint(format!(
            "expected {} tensors, found {}",
            expected.len(),
            c.tensors.len()
        )));
    }
    for ((dst, (name, shape)), t) in params.tensors_mut().into_iter().zip(&expected).zip(&c.tensors) {
        if &t.name != name || &t.shape != shape || t.data.len() != dst.len() {
            return Err(NeuralError::Checkpoint(format!(
                "tensor `{}` {:?} does not match `{name}` {shape:?}",
                t.name, t.shape
            )));
        }
        if t.data.iter().any(|v| !v.is_finite()) {
            return Err(NeuralError::Checkpoint(format!("tensor `{name}` holds non-finite values")));
        }
        dst.copy_from_slice(&t.data);
    }
    Ok(params)
}
