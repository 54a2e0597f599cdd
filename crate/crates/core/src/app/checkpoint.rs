//! Versioned JSON checkpoints of a colony state.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::abc::ColonyState;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "apiary-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint<P> {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub state: ColonyState<P>,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
    config_hash: String,
}

/// Writes through a temporary file and a rename, so a crash never leaves a
/// half-written checkpoint behind.
pub fn save_checkpoint<P: Serialize>(
    path: &Path,
    config_hash: &str,
    state: &ColonyState<P>,
) -> Result<()> {
    #[derive(Serialize)]
    struct Out<'a, P> {
        format: &'a str,
        version: u32,
        config_hash: &'a str,
        state: &'a ColonyState<P>,
    }
    let json = serde_json::to_string_pretty(&Out {
        format: CHECKPOINT_FORMAT,
        version: CHECKPOINT_VERSION,
        config_hash,
        state,
    })
    .map_err(|e| Error::Persistence {
        message: format!("cannot serialize checkpoint: {e}"),
        best_candidate: None,
        best_objective: None,
    })?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, json).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Loads a checkpoint, refusing foreign files, other format versions and
/// checkpoints taken under a different configuration.
pub fn load_checkpoint<P: DeserializeOwned>(
    path: &Path,
    expected_hash: &str,
) -> Result<ColonyState<P>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| {
        Error::ResumeRefused(format!(
            "{} is not a readable checkpoint: {e}",
            path.display()
        ))
    })?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::ResumeRefused(format!(
            "{} has format `{}`, expected `{CHECKPOINT_FORMAT}`",
            path.display(),
            header.format
        )));
    }
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::ResumeRefused(format!(
            "checkpoint version {} is not supported (this build reads version {CHECKPOINT_VERSION})",
            header.version
        )));
    }
    if header.config_hash != expected_hash {
        return Err(Error::ResumeRefused(format!(
            "checkpoint was written under config hash {}, current config hashes to {expected_hash}",
            header.config_hash
        )));
    }
    let checkpoint: Checkpoint<P> = serde_json::from_str(&text)
        .map_err(|e| Error::ResumeRefused(format!("corrupt checkpoint {}: {e}", path.display())))?;
    Ok(checkpoint.state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abc::{ColonyConfig, Engine, NullSink};
    use crate::evaluation::SurrogateEvaluator;
    use crate::nas::{ArchitectureEncoding, ArchitectureSpace};

    fn state() -> ColonyState<ArchitectureEncoding> {
        let space = ArchitectureSpace::with_default_vocabulary(3).unwrap();
        let eval = SurrogateEvaluator::new(space.clone(), 1);
        let engine = Engine::new(&space, &eval);
        let mut sink = NullSink;
        let mut s = engine
            .initialize(ColonyConfig::new(4, 3), &mut sink)
            .unwrap();
        engine.employee_phase(&mut s, &mut sink).unwrap();
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let s = state();
        save_checkpoint(&path, "abc", &s).unwrap();
        let back: ColonyState<ArchitectureEncoding> = load_checkpoint(&path, "abc").unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn refusals() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        save_checkpoint(&path, "abc", &state()).unwrap();
        let wrong_hash = load_checkpoint::<ArchitectureEncoding>(&path, "xyz");
        assert!(matches!(wrong_hash, Err(Error::ResumeRefused(_))));

        let text = fs::read_to_string(&path).unwrap();
        fs::write(&path, text.replace("\"version\": 1", "\"version\": 7")).unwrap();
        let err = load_checkpoint::<ArchitectureEncoding>(&path, "abc").unwrap_err();
        assert!(err.to_string().contains("version 7"), "{err}");

        fs::write(&path, "{ not json").unwrap();
        assert!(matches!(
            load_checkpoint::<ArchitectureEncoding>(&path, "abc"),
            Err(Error::ResumeRefused(_))
        ));
    }
}
