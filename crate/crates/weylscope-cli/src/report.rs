//! Deterministic report output: fixed float formatting and atomic writes.

use std::io::Write;
use std::path::{Path, PathBuf};

/// 17 significant digits, enough to round-trip any f64, in a fixed layout so
/// identical scenarios produce byte-identical files.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Collects lines and writes them either to stdout or to a file via a
/// temporary sibling plus rename, so failures never leave partial files.
pub struct OutputSink {
    path: Option<PathBuf>,
    buffer: String,
}

impl OutputSink {
    pub fn new(path: Option<&Path>) -> Self {
        Self {
            path: path.map(Path::to_path_buf),
            buffer: String::new(),
        }
    }

    pub fn push_line(&mut self, line: &str) {
        self.buffer.push_str(line);
        self.buffer.push('\n');
    }

    pub fn finish(self) -> std::io::Result<()> {
        match self.path {
            None => {
                std::io::stdout().write_all(self.buffer.as_bytes())?;
                Ok(())
            }
            Some(path) => {
                let mut tmp = path.clone().into_os_string();
                tmp.push(".tmp");
                let tmp = PathBuf::from(tmp);
                std::fs::write(&tmp, self.buffer.as_bytes())?;
                std::fs::rename(&tmp, &path)
            }
        }
    }
}
