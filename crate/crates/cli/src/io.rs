//! Failure classification, warnings, frame discovery and atomic output.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::Context;

/// Process exit status of a failed command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Usage,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn data(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Data,
            error: anyhow::anyhow!("{msg}"),
        }
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        Self {
            kind: ExitKind::Internal,
            error: anyhow::anyhow!("{msg}"),
        }
    }
}

pub type CmdResult<T> = Result<T, Failure>;

/// Attaches a location and marks the error as bad input data.
pub trait DataContext<T> {
    fn data_ctx<C: fmt::Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T>;
}

impl<T, E> DataContext<T> for Result<T, E>
where
    E: std::error::Error + Send + Sync + 'static,
{
    fn data_ctx<C: fmt::Display + Send + Sync + 'static>(self, ctx: C) -> CmdResult<T> {
        self.map_err(|e| Failure {
            kind: ExitKind::Data,
            error: anyhow::Error::new(e).context(ctx),
        })
    }
}

/// Prints warnings to stderr; under `--strict` the first one aborts the command.
#[derive(Debug, Default)]
pub struct Reporter {
    strict: bool,
    count: AtomicUsize,
}

impl Reporter {
    pub fn new(strict: bool) -> Self {
        Self {
            strict,
            count: AtomicUsize::new(0),
        }
    }

    pub fn warn(&self, msg: impl fmt::Display) -> CmdResult<()> {
        self.count.fetch_add(1, Ordering::Relaxed);
        if self.strict {
            return Err(Failure::data(format!("{msg} (--strict)")));
        }
        eprintln!("warning: {msg}");
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

/// One `<frame>.txt` file of an input directory.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FrameFile {
    pub frame: String,
    pub path: PathBuf,
}

/// `*.txt` files of `dir`, sorted by frame name.
pub fn list_frames(dir: &Path) -> CmdResult<Vec<FrameFile>> {
    let entries = fs::read_dir(dir).data_ctx(format!("cannot read directory {}", dir.display()))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.data_ctx(format!("cannot list {}", dir.display()))?.path();
        if path.extension().is_some_and(|e| e == "txt") && path.is_file() {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                frames.push(FrameFile {
                    frame: stem.to_string(),
                    path: path.clone(),
                });
            }
        }
    }
    frames.sort();
    Ok(frames)
}

pub fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).data_ctx(format!("cannot read {}", path.display()))
}

/// Reads `path` when it exists, `None` otherwise.
pub fn read_optional(path: &Path) -> CmdResult<Option<String>> {
    if path.exists() {
        read_text(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Wraps a core error with the file it came from.
pub fn in_file<T>(r: monoguide_core::Result<T>, path: &Path) -> CmdResult<T> {
    r.data_ctx(format!("{}", path.display()))
}

pub fn create_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir).map_err(|e| Failure {
        kind: ExitKind::Data,
        error: anyhow::Error::new(e).context(format!("cannot create {}", dir.display())),
    })
}

/// Writes through a temporary file in the same directory, then renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> CmdResult<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let result = (|| -> anyhow::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(contents.as_bytes())?;
        tmp.flush()?;
        tmp.persist(path)?;
        Ok(())
    })();
    result
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(|error| Failure {
            kind: ExitKind::Data,
            error,
        })
}

pub fn load_config(path: Option<&Path>) -> CmdResult<monoguide_core::ToolkitConfig> {
    match path {
        None => Ok(monoguide_core::ToolkitConfig::default()),
        Some(p) => in_file(monoguide_core::ToolkitConfig::from_toml(&read_text(p)?), p),
    }
}

/// Rejects non-finite numbers before they reach an output file.
pub fn ensure_finite(values: &[f64], what: &str) -> CmdResult<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Failure::internal(format!("non-finite value produced for {what}")))
    }
}
