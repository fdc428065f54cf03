use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{SmileModel, SurrealModel};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Checkpoint {
    Smile(SmileModel),
    Surreal(SurrealModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    schema_version: u32,
    model: Checkpoint,
}

pub fn save_checkpoint(model: &Checkpoint, path: &Path) -> Result<()> {
    let env = Envelope {
        schema_version: CHECKPOINT_VERSION,
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&env)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    if found != CHECKPOINT_VERSION {
        return Err(Error::SchemaVersion {
            expected: CHECKPOINT_VERSION,
            found,
        });
    }
    let env: Envelope =
        serde_json::from_value(value).map_err(|e| Error::malformed(path, e.to_string()))?;
    match &env.model {
        Checkpoint::Smile(m) => m.validate()?,
        Checkpoint::Surreal(m) => m.validate()?,
    }
    Ok(env.model)
}
