//! Plain CSV output with `#`-prefixed comment lines ahead of the header.

use std::fmt::Display;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    /// Creates `path` (and its parent directories), writing one `# ...` line per
    /// comment and then the column header.
    pub fn create(path: &Path, comments: &[String], header: &str) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        let file = File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut w = CsvWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        for c in comments {
            w.line(format_args!("# {c}"))?;
        }
        w.line(header)?;
        Ok(w)
    }

    pub fn line(&mut self, line: impl Display) -> Result<()> {
        writeln!(self.out, "{line}").map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_comments_then_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.csv");
        let mut w = CsvWriter::create(&path, &["lambda=2".into()], "a,b").unwrap();
        w.line("1,2").unwrap();
        w.finish().unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "# lambda=2\na,b\n1,2\n");
    }

    #[test]
    fn reports_path_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = CsvWriter::create(&blocker.join("x.csv"), &[], "a").err().unwrap();
        assert!(err.to_string().contains("file"));
    }
}
