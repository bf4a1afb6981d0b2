use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gsea_core::{Error, Result, Transition};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub(crate) fn io_err(e: std::io::Error) -> Error {
    Error::State(format!("i/o: {e}"))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Parse(format!("json: {e}"))
}

/// On-disk layout of one run:
///
/// ```text
/// fingerprint
/// segments/actor-<i>.jsonl
/// checkpoints/<name>.txt
/// <name>.json
/// ```
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: impl AsRef<Path>, fingerprint: &str) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("segments")).map_err(io_err)?;
        fs::create_dir_all(root.join("checkpoints")).map_err(io_err)?;
        fs::write(root.join("fingerprint"), format!("{fingerprint}\n")).map_err(io_err)?;
        Ok(Self { root })
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.join("fingerprint").is_file() {
            return Err(Error::State(format!("{} is not a run directory", root.display())));
        }
        Ok(Self { root })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn fingerprint(&self) -> Result<String> {
        Ok(fs::read_to_string(self.root.join("fingerprint")).map_err(io_err)?.trim().to_string())
    }

    pub fn segment_log(&self, actor: usize) -> Result<SegmentLog> {
        let file = File::create(self.root.join("segments").join(format!("actor-{actor}.jsonl"))).map_err(io_err)?;
        Ok(SegmentLog { out: BufWriter::new(file), actor })
    }

    pub fn write_checkpoint(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.root.join("checkpoints").join(format!("{name}.txt")), text).map_err(io_err)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value).map_err(json_err)?;
        fs::write(self.root.join(format!("{name}.json")), text + "\n").map_err(io_err)
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> Result<T> {
        let text = fs::read_to_string(self.root.join(format!("{name}.json"))).map_err(io_err)?;
        serde_json::from_str(&text).map_err(json_err)
    }
}

#[derive(Serialize)]
struct LoggedTransition<'a> {
    actor: usize,
    version: u64,
    #[serde(flatten)]
    transition: &'a Transition,
}

/// One actor's transition log, one JSON object per line.
#[derive(Debug)]
pub struct SegmentLog {
    out: BufWriter<File>,
    actor: usize,
}

impl SegmentLog {
    pub fn append(&mut self, version: u64, transitions: &[Transition]) -> Result<()> {
        for transition in transitions {
            let line = LoggedTransition { actor: self.actor, version, transition };
            serde_json::to_writer(&mut self.out, &line).map_err(json_err)?;
            self.out.write_all(b"\n").map_err(io_err)?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush().map_err(io_err)
    }
}
