use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "path,label,concept,split";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            "unassigned" => Ok(Split::Unassigned),
            other => Err(Error::Schema(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    /// Path of the `kpseq/1` file, relative to the manifest's directory.
    pub path: String,
    pub label: String,
    pub concept: Option<String>,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
struct Row {
    path: String,
    label: String,
    concept: String,
    split: String,
}

/// A dataset listing: one row per sample file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub rows: Vec<SampleRecord>,
}

impl Manifest {
    pub fn new(rows: Vec<SampleRecord>) -> Result<Self> {
        let manifest = Manifest { rows };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for row in &self.rows {
            if row.path.is_empty() || row.label.is_empty() {
                return Err(Error::Schema("manifest row with empty path or label".into()));
            }
            if !seen.insert(row.path.as_str()) {
                return Err(Error::Schema(format!("duplicate manifest path {:?}", row.path)));
            }
        }
        Ok(())
    }

    pub fn rows_in(&self, split: Split) -> impl Iterator<Item = &SampleRecord> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn parse(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header.join(",") != MANIFEST_HEADER {
            return Err(Error::Schema(format!(
                "manifest header {:?}, expected {MANIFEST_HEADER:?}",
                header.join(",")
            )));
        }
        let mut rows = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            rows.push(SampleRecord {
                path: row.path,
                label: row.label,
                concept: (!row.concept.is_empty()).then_some(row.concept),
                split: row.split.parse()?,
            });
        }
        Manifest::new(rows)
    }

    pub fn write(&self, writer: impl std::io::Write) -> Result<()> {
        self.validate()?;
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        for r in &self.rows {
            wtr.serialize(Row {
                path: r.path.clone(),
                label: r.label.clone(),
                concept: r.concept.clone().unwrap_or_default(),
                split: r.split.to_string(),
            })?;
        }
        if self.rows.is_empty() {
            wtr.write_record(MANIFEST_HEADER.split(','))?;
        }
        wtr.flush().map_err(|e| Error::io("<manifest writer>", e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write(&mut buf)?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}
