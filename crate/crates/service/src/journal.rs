//! On-disk persistence: one parameter file and one append-only command log per
//! auction. Restarting the service replays every log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use mt_core::protocol::{AcceptAll, Command, ProtocolParams, ProtocolState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JournalError {
    #[error("journal i/o: {0}")]
    Io(#[from] io::Error),
    #[error("{path}:{line}: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: logged command {index} no longer applies: {reason}")]
    Replay { path: PathBuf, index: usize, reason: String },
}

#[derive(Clone, Debug)]
pub struct Journal {
    dir: PathBuf,
}

impl Journal {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, JournalError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Journal { dir })
    }

    fn params_path(&self, id: u64) -> PathBuf {
        self.dir.join(format!("{id}.params.json"))
    }

    fn log_path(&self, id: u64) -> PathBuf {
        self.dir.join(format!("{id}.commands.ndjson"))
    }

    pub fn create(&self, id: u64, params: &ProtocolParams) -> Result<(), JournalError> {
        let mut file = File::create(self.params_path(id))?;
        serde_json::to_writer_pretty(&mut file, params).map_err(io::Error::from)?;
        File::create(self.log_path(id))?;
        Ok(())
    }

    pub fn append(&self, id: u64, commands: &[Command]) -> Result<(), JournalError> {
        if commands.is_empty() {
            return Ok(());
        }
        let mut buf = Vec::new();
        for cmd in commands {
            serde_json::to_writer(&mut buf, cmd).map_err(io::Error::from)?;
            buf.push(b'\n');
        }
        let mut file = OpenOptions::new().append(true).open(self.log_path(id))?;
        file.write_all(&buf)?;
        file.sync_data()?;
        Ok(())
    }

    /// Rebuilds every journaled auction, sorted by id.
    pub fn restore(&self) -> Result<Vec<(u64, ProtocolState)>, JournalError> {
        let mut restored = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".params.json"))
                .and_then(|n| n.parse::<u64>().ok())
            else {
                continue;
            };
            let params: ProtocolParams = serde_json::from_reader(BufReader::new(File::open(&path)?))
                .map_err(|source| JournalError::Parse {
                    path: path.clone(),
                    line: 0,
                    source,
                })?;
            let log = self.log_path(id);
            let commands = read_commands(&log)?;
            let state = ProtocolState::replay(params, Arc::new(AcceptAll), commands).map_err(|(index, e)| {
                JournalError::Replay {
                    path: log.clone(),
                    index,
                    reason: e.to_string(),
                }
            })?;
            restored.push((id, state));
        }
        restored.sort_by_key(|(id, _)| *id);
        Ok(restored)
    }
}

fn read_commands(path: &Path) -> Result<Vec<Command>, JournalError> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut commands = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        commands.push(serde_json::from_str(&line).map_err(|source| JournalError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            source,
        })?);
    }
    Ok(commands)
}
