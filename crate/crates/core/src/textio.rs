//! Self-describing text files: a block of `# key = value` header lines
//! followed by comma-separated records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantum::{Family, SpinModel};

pub const SCHEMA_VERSION: u32 = 1;

/// Ordered `key = value` header entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new() -> Self {
        let mut h = Self::default();
        h.set("schema_version", SCHEMA_VERSION);
        h
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn with_model(mut self, model: &SpinModel) -> Self {
        for (k, v) in model.header_entries() {
            self.set(k, v);
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "# {k} = {v}")?;
        }
        Ok(())
    }
}

/// Header accessors with file-located errors.
pub(crate) struct HeaderReader<'a> {
    pub header: &'a Header,
    pub path: &'a Path,
}

impl HeaderReader<'_> {
    pub fn require(&self, key: &str) -> Result<&str> {
        self.header.get(key).ok_or_else(|| Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            message: format!("missing header key `{key}`"),
        })
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| Error::Parse {
            path: self.path.to_path_buf(),
            line: 0,
            message: format!("header key `{key}` has invalid value `{raw}`"),
        })
    }

    pub fn model(&self) -> Result<SpinModel> {
        let family: Family = self.require("model")?.parse()?;
        let n = self.parse("N")?;
        let omega = self.parse("omega")?;
        let v = self.parse("V")?;
        let model = match family {
            Family::ModelI => SpinModel::model_i(n, omega, v, self.parse("alpha")?),
            Family::ModelII => SpinModel::model_ii(
                n,
                omega,
                v,
                self.parse("omega_prime")?,
                self.parse("v_prime")?,
                self.parse("beta")?,
            ),
        };
        Ok(model)
    }
}

/// Parsed text file: header plus raw data lines with their line numbers.
/// Lines of the form `# section = name` after the first record start a new
/// section.
#[derive(Debug)]
pub(crate) struct TextFile {
    pub path: PathBuf,
    pub header: Header,
    pub sections: Vec<(String, Vec<(usize, String)>)>,
}

impl TextFile {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut header = Header::default();
        let mut sections: Vec<(String, Vec<(usize, String)>)> = vec![(String::new(), Vec::new())];
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                let Some((k, v)) = rest.split_once('=') else {
                    continue;
                };
                let (k, v) = (k.trim(), v.trim());
                if k == "section" {
                    sections.push((v.to_string(), Vec::new()));
                } else {
                    header.set(k, v);
                }
                continue;
            }
            sections.last_mut().expect("non-empty").1.push((lineno, trimmed.to_string()));
        }
        let found = header.get("schema_version").unwrap_or("<missing>").to_string();
        if found != SCHEMA_VERSION.to_string() {
            return Err(Error::SchemaVersion {
                path: path.to_path_buf(),
                found,
                expected: SCHEMA_VERSION,
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            sections,
        })
    }

    pub fn header_reader(&self) -> HeaderReader<'_> {
        HeaderReader {
            header: &self.header,
            path: &self.path,
        }
    }

    pub fn section(&self, name: &str) -> Option<&[(usize, String)]> {
        self.sections
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, lines)| lines.as_slice())
    }

    pub fn parse_error(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            message: message.into(),
        }
    }

    /// Splits a record into exactly `width` numeric fields.
    pub fn numbers(&self, line: usize, text: &str, width: usize) -> Result<Vec<f64>> {
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != width {
            return Err(self.parse_error(line, format!("expected {width} fields, found {}", fields.len())));
        }
        fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| self.parse_error(line, format!("invalid number `{f}`")))
            })
            .collect()
    }
}

/// Buffered writer for a header-plus-records file.
pub struct RecordWriter {
    path: PathBuf,
    inner: BufWriter<File>,
}

impl RecordWriter {
    pub fn create(path: &Path, header: &Header, columns: &str) -> Result<Self> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            inner: BufWriter::new(file),
        };
        header.write_to(&mut w.inner).map_err(|e| Error::io(path, e))?;
        w.line(&format!("# columns = {columns}"))?;
        Ok(w)
    }

    pub fn section(&mut self, name: &str) -> Result<()> {
        self.line(&format!("# section = {name}"))
    }

    pub fn line(&mut self, text: &str) -> Result<()> {
        writeln!(self.inner, "{text}").map_err(|e| Error::io(&self.path, e))
    }

    /// Writes values separated by `", "`, each in shortest round-trip form.
    pub fn record(&mut self, values: &[f64]) -> Result<()> {
        let text = values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(", ");
        self.line(&text)
    }

    pub fn finish(mut self) -> Result<()> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))
    }
}
