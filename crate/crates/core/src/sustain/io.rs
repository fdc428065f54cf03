use std::path::Path;

use super::{McmcResult, SubtypeModel};
use crate::{Error, Result};

pub fn save_model(model: &SubtypeModel, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SubtypeModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: SubtypeModel =
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))?;
    model.validate()?;
    Ok(model)
}

/// One row per (subtype, event) with visit frequencies for each position.
pub fn write_position_csv(result: &McmcResult, model: &SubtypeModel, path: &Path) -> Result<()> {
    let e_n = model.events.n_events();
    let mut out = String::from("subtype,var,level");
    for p in 1..=e_n {
        out.push_str(&format!(",pos_{p}"));
    }
    out.push('\n');
    let events = model.events.events();
    for (c, freq) in result.position_freq.iter().enumerate() {
        for (id, e) in events.iter().enumerate() {
            out.push_str(&format!("{},{},{}", c + 1, e.var, e.level + 1));
            for p in 0..e_n {
                out.push_str(&format!(",{}", freq.get(id, p)));
            }
            out.push('\n');
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
