//! CSV rendering and all-or-nothing output.
//!
//! Commands render every artifact into an [`Outputs`] set in memory first.
//! [`Outputs::commit`] then writes each file to a temporary sibling in the
//! target directory and only renames them into place once all temporaries
//! have been written, so a failing run leaves no partial files.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = NamedTempFile::new_in(dir).map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.as_file().sync_all().map_err(io)?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path).map_err(|e| CliError::Io(format!("{}: {}", path.display(), e.error)))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Render a CSV table with a mandatory header row.
///
/// Numbers are formatted with Rust's shortest round-trip representation, so
/// identical inputs always give byte-identical files.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Read a spectrum file with header `frequency_ghz,fluorescence`.
/// Returns frequencies in Hz.
pub fn read_spectrum(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    #[derive(serde::Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Row {
        frequency_ghz: f64,
        fluorescence: f64,
    }
    let cfg = |e: csv::Error| CliError::Config(format!("{}: {e}", path.display()));
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(cfg)?;
    let mut f = Vec::new();
    let mut y = Vec::new();
    for row in r.deserialize::<Row>() {
        let row = row.map_err(cfg)?;
        f.push(row.frequency_ghz * 1e9);
        y.push(row.fluorescence);
    }
    if f.is_empty() {
        return Err(CliError::Config(format!("{}: no spectrum rows", path.display())));
    }
    Ok((f, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_uses_lf_and_header() {
        let bytes = csv_table(&["a", "b"], vec![vec![num(1.0), num(0.5)]]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "a,b\n1,0.5\n");
    }

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new();
        out.add("one.csv", b"x\n1\n".to_vec());
        out.add("two.csv", b"y\n2\n".to_vec());
        let written = out.commit(&dir.path().join("sub")).unwrap();
        assert_eq!(written.len(), 2);
        assert_eq!(std::fs::read(&written[1]).unwrap(), b"y\n2\n");
        let entries: Vec<_> = std::fs::read_dir(dir.path().join("sub")).unwrap().collect();
        assert_eq!(entries.len(), 2, "temporaries left behind");
    }

    #[test]
    fn spectrum_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "# measured\nfrequency_ghz,fluorescence\n2.86,1.0\n2.87, 0.9\n").unwrap();
        let (f, y) = read_spectrum(&path).unwrap();
        assert_eq!(f, vec![2.86e9, 2.87e9]);
        assert_eq!(y, vec![1.0, 0.9]);
        std::fs::write(&path, "freq,fluorescence\n2.86,1.0\n").unwrap();
        assert!(matches!(read_spectrum(&path), Err(CliError::Config(_))));
    }
}
