//! Versioned JSON checkpoint for the prediction/target network pair.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::NetParams;
use crate::qfunc::{QNet, QTargetPair, STATE_DIM};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointDoc {
    version: u32,
    heads: Heads,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Heads {
    #[serde(rename = "A")]
    a: NetParams,
    #[serde(rename = "B")]
    b: NetParams,
    #[serde(rename = "C")]
    c: NetParams,
    target_a: NetParams,
    target_b: NetParams,
    target_c: NetParams,
}

fn check_shape(name: &str, net: &NetParams) -> Result<()> {
    if net.layers.is_empty() {
        return Err(Error::Checkpoint(format!("head {name} has no layers")));
    }
    if net.layers[0].input_dim != STATE_DIM {
        return Err(Error::Checkpoint(format!(
            "head {name} expects input dim {STATE_DIM}, found {}",
            net.layers[0].input_dim
        )));
    }
    let mut prev_out = STATE_DIM;
    for (i, layer) in net.layers.iter().enumerate() {
        if layer.input_dim != prev_out {
            return Err(Error::Checkpoint(format!(
                "head {name} layer {i}: input dim {} does not chain from {prev_out}",
                layer.input_dim
            )));
        }
        if layer.weights.len() != layer.input_dim * layer.output_dim
            || layer.bias.len() != layer.output_dim
        {
            return Err(Error::Checkpoint(format!(
                "head {name} layer {i}: weight/bias sizes do not match declared dims"
            )));
        }
        if layer.weights.iter().chain(layer.bias.iter()).any(|w| !w.is_finite()) {
            return Err(Error::Checkpoint(format!("head {name} layer {i}: non-finite value")));
        }
        prev_out = layer.output_dim;
    }
    if prev_out != 1 {
        return Err(Error::Checkpoint(format!("head {name} must end in a scalar output")));
    }
    Ok(())
}

pub fn save(pair: &QTargetPair, path: &Path) -> Result<()> {
    let doc = CheckpointDoc {
        version: CHECKPOINT_VERSION,
        heads: Heads {
            a: pair.prediction.head_a.clone(),
            b: pair.prediction.head_b.clone(),
            c: pair.prediction.head_c.clone(),
            target_a: pair.target.head_a.clone(),
            target_b: pair.target.head_b.clone(),
            target_c: pair.target.head_c.clone(),
        },
    };
    let json = serde_json::to_string_pretty(&doc)?;
    fs::write(path, json + "\n")?;
    Ok(())
}

pub fn load(path: &Path) -> Result<QTargetPair> {
    let text = fs::read_to_string(path)?;
    let doc: CheckpointDoc = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
    if doc.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            doc.version
        )));
    }
    for (name, net) in [
        ("A", &doc.heads.a),
        ("B", &doc.heads.b),
        ("C", &doc.heads.c),
        ("target_A", &doc.heads.target_a),
        ("target_B", &doc.heads.target_b),
        ("target_C", &doc.heads.target_c),
    ] {
        check_shape(name, net)?;
    }
    Ok(QTargetPair {
        prediction: QNet { head_a: doc.heads.a, head_b: doc.heads.b, head_c: doc.heads.c },
        target: QNet {
            head_a: doc.heads.target_a,
            head_b: doc.heads.target_b,
            head_c: doc.heads.target_c,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_exact() {
        let pair = QTargetPair::init(16, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save(&pair, &path).unwrap();
        let loaded = load(&path).unwrap();
        assert_eq!(pair, loaded);
    }

    #[test]
    fn wrong_version_is_rejected() {
        let pair = QTargetPair::init(8, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save(&pair, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"version\": 1", "\"version\": 2");
        std::fs::write(&path, text).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn truncated_weights_are_rejected() {
        let mut pair = QTargetPair::init(8, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        pair.prediction.head_b.layers[0].weights.pop();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save(&pair, &path).unwrap();
        let err = load(&path).unwrap_err();
        assert!(err.to_string().contains("head B"), "{err}");
    }

    #[test]
    fn garbage_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        std::fs::write(&path, "{not json").unwrap();
        assert!(matches!(load(&path), Err(Error::Checkpoint(_))));
    }
}
