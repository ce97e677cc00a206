//! Command implementations; each is a thin binding over the library
//! operation of the same name.

pub mod evalcmd;
pub mod features;
pub mod fid;
pub mod noise;
pub mod palette;
pub mod texture;
pub mod toy;

use std::path::{Path, PathBuf};

use scantex_core::Error;

/// Global flags shared by every command.
pub struct Context {
    pub root: PathBuf,
    pub seed: u64,
}

/// A failed command, optionally pinning its exit code (commands whose
/// contract says "exit 2" regardless of the error class).
pub struct CommandError {
    pub error: Error,
    pub exit_code: Option<i32>,
}

impl From<Error> for CommandError {
    fn from(error: Error) -> Self {
        Self {
            error,
            exit_code: None,
        }
    }
}

impl CommandError {
    pub fn usage(error: Error) -> Self {
        Self {
            error,
            exit_code: Some(2),
        }
    }
}

pub type CmdResult = Result<(), CommandError>;

/// Recursively collects image files (png/ppm/pgm/jpg) under a directory,
/// sorted by relative path for deterministic processing order.
pub fn collect_images(dir: &Path) -> Result<Vec<PathBuf>, Error> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .map(|e| {
                    matches!(
                        e.to_ascii_lowercase().as_str(),
                        "png" | "ppm" | "pgm" | "jpg" | "jpeg"
                    )
                })
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::NotFound(format!(
            "no images under {}",
            dir.display()
        )));
    }
    Ok(files)
}
