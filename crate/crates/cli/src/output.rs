use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Stamped<'a, T> {
    config_digest: &'a str,
    #[serde(flatten)]
    row: &'a T,
}

/// One compact JSON object per line, each carrying the config digest.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T], digest: &str) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        serde_json::to_writer(
            &mut w,
            &Stamped {
                config_digest: digest,
                row,
            },
        )?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `fill` against a buffered file writer.
pub fn write_with<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<()>,
{
    let mut w = create(path)?;
    fill(&mut w)?;
    w.flush()?;
    Ok(())
}

/// File name used to identify an input in artifacts; directories are left
/// out so artifacts do not depend on where the data lives.
pub fn display_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Makes an identifier safe to use as a file name component.
pub fn file_stem(id: &str) -> PathBuf {
    PathBuf::from(
        id.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
            .collect::<String>(),
    )
}
