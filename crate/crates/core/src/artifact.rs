//! Versioned binary files: a magic tag, the payload kind, a format version
//! and a bincode payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TMIX";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ArtifactKind {
    /// A `CountVectorSequence`.
    Sequence = 1,
    /// A `GibbsState` checkpoint.
    Checkpoint = 2,
    /// A `ModelBundle`.
    Model = 3,
}

impl ArtifactKind {
    fn from_byte(b: u8) -> Option<Self> {
        match b {
            1 => Some(Self::Sequence),
            2 => Some(Self::Checkpoint),
            3 => Some(Self::Model),
            _ => None,
        }
    }
}

pub fn write_artifact<T: Serialize, W: Write>(mut out: W, kind: ArtifactKind, value: &T) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&[kind as u8])?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    bincode::serialize_into(&mut out, value).map_err(|e| Error::Artifact(e.to_string()))?;
    out.flush()?;
    Ok(())
}

pub fn read_artifact<T: DeserializeOwned, R: Read>(mut input: R, kind: ArtifactKind) -> Result<T> {
    let mut header = [0u8; 7];
    input
        .read_exact(&mut header)
        .map_err(|_| Error::Artifact("file too short for an artifact header".into()))?;
    if &header[..4] != MAGIC {
        return Err(Error::Artifact("not a tracemix artifact (bad magic)".into()));
    }
    let found = ArtifactKind::from_byte(header[4]);
    if found != Some(kind) {
        return Err(Error::Artifact(format!(
            "expected a {kind:?} artifact, found {}",
            found.map_or_else(|| format!("unknown kind {}", header[4]), |k| format!("{k:?}"))
        )));
    }
    let version = u16::from_le_bytes([header[5], header[6]]);
    if version != FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "unsupported format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    bincode::deserialize_from(input).map_err(|e| Error::Artifact(e.to_string()))
}

pub fn save<T: Serialize>(path: &Path, kind: ArtifactKind, value: &T) -> Result<()> {
    write_artifact(BufWriter::new(File::create(path)?), kind, value)
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: ArtifactKind) -> Result<T> {
    read_artifact(BufReader::new(File::open(path)?), kind)
}
