//! Labeled sample records and the CSV dataset manifest.
//!
//! The manifest is a UTF-8, LF-terminated CSV with the fixed header
//! `path,subject_id,label,morph_tool,source`; paths are interpreted
//! relative to a dataset root chosen by the caller.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 5] = ["path", "subject_id", "label", "morph_tool", "source"];

/// Bona fide capture or morphing attack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Bonafide,
    Morph,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Bonafide => "bonafide",
            Label::Morph => "morph",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bonafide" => Some(Label::Bonafide),
            "morph" => Some(Label::Morph),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Generating tool of a morph record; unknown tools ride along as `Other`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MorphTool {
    None,
    FaceFusion,
    FaceMorpher,
    Opencv,
    Ubo,
    Other(String),
}

impl MorphTool {
    pub fn as_str(&self) -> &str {
        match self {
            MorphTool::None => "none",
            MorphTool::FaceFusion => "facefusion",
            MorphTool::FaceMorpher => "facemorpher",
            MorphTool::Opencv => "opencv",
            MorphTool::Ubo => "ubo",
            MorphTool::Other(tag) => tag,
        }
    }

    /// Every non-empty string parses; unknown tags become `Other(tag)`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "" => None,
            "none" => Some(MorphTool::None),
            "facefusion" => Some(MorphTool::FaceFusion),
            "facemorpher" => Some(MorphTool::FaceMorpher),
            "opencv" => Some(MorphTool::Opencv),
            "ubo" => Some(MorphTool::Ubo),
            tag => Some(MorphTool::Other(tag.to_string())),
        }
    }
}

impl fmt::Display for MorphTool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Acquisition domain of an image.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Digital,
    PsHandcrafted,
    PsSynthetic,
    PsTexture,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::Digital,
        Source::PsHandcrafted,
        Source::PsSynthetic,
        Source::PsTexture,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Digital => "digital",
            Source::PsHandcrafted => "ps_handcrafted",
            Source::PsSynthetic => "ps_synthetic",
            Source::PsTexture => "ps_texture",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "digital" => Some(Source::Digital),
            "ps_handcrafted" => Some(Source::PsHandcrafted),
            "ps_synthetic" => Some(Source::PsSynthetic),
            "ps_texture" => Some(Source::PsTexture),
            _ => None,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One labeled image. Morph records carry both parent identities in
/// `subject_id` joined by `+` so split logic can keep every parent on one
/// side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRecord {
    pub path: String,
    pub subject_id: String,
    pub label: Label,
    pub morph_tool: MorphTool,
    pub source: Source,
}

impl SampleRecord {
    /// Checks the per-record invariants.
    pub fn validate(&self) -> Result<()> {
        if self.subject_id.is_empty() {
            return Err(Error::Consistency(format!(
                "record '{}' has an empty subject_id",
                self.path
            )));
        }
        match (self.label, &self.morph_tool) {
            (Label::Bonafide, MorphTool::None) => Ok(()),
            (Label::Morph, MorphTool::None) => Err(Error::Consistency(format!(
                "record '{}' is a morph with morph_tool=none",
                self.path
            ))),
            (Label::Bonafide, tool) => Err(Error::Consistency(format!(
                "record '{}' is bona fide but names morph_tool={tool}",
                self.path
            ))),
            (Label::Morph, _) => Ok(()),
        }
    }

    /// Atomic subject identities backing this record (one for bona fide,
    /// both parents for a morph).
    pub fn subjects(&self) -> Vec<&str> {
        self.subject_id.split('+').collect()
    }
}

/// A collection of sample records with a provenance note.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetManifest {
    pub records: Vec<SampleRecord>,
    pub origin: String,
}

impl DatasetManifest {
    pub fn new(records: Vec<SampleRecord>, origin: impl Into<String>) -> Result<Self> {
        let manifest = Self {
            records,
            origin: origin.into(),
        };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for record in &self.records {
            record.validate()?;
            if !seen.insert(record.path.as_str()) {
                return Err(Error::Consistency(format!(
                    "duplicate manifest path '{}'",
                    record.path
                )));
            }
        }
        Ok(())
    }

    /// Distinct morph tools present, in canonical order, excluding `none`.
    pub fn morph_tools(&self) -> Vec<MorphTool> {
        let mut tools: Vec<MorphTool> = self
            .records
            .iter()
            .filter(|r| r.label == Label::Morph)
            .map(|r| r.morph_tool.clone())
            .collect();
        tools.sort();
        tools.dedup();
        tools
    }

    /// Distinct atomic subjects, sorted.
    pub fn subjects(&self) -> Vec<String> {
        let mut subjects: Vec<String> = self
            .records
            .iter()
            .flat_map(|r| r.subjects().into_iter().map(str::to_string))
            .collect();
        subjects.sort();
        subjects.dedup();
        subjects
    }
}

/// Reads and validates a manifest CSV.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());

    let headers = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let expected: Vec<&str> = MANIFEST_HEADER.to_vec();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {expected:?}, got {got:?}"),
        });
    }

    let mut records = Vec::new();
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2; // header is line 1
        let row = row.map_err(|e| Error::Parse {
            line,
            msg: e.to_string(),
        })?;
        if row.len() != 5 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 5 fields, got {}", row.len()),
            });
        }
        let field = |i: usize| row.get(i).unwrap_or("").to_string();
        let label = Label::parse(&field(2)).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown label '{}'", field(2)),
        })?;
        let morph_tool = MorphTool::parse(&field(3)).ok_or_else(|| Error::Parse {
            line,
            msg: "empty morph_tool".into(),
        })?;
        let source = Source::parse(&field(4)).ok_or_else(|| Error::Parse {
            line,
            msg: format!("unknown source '{}'", field(4)),
        })?;
        records.push(SampleRecord {
            path: field(0),
            subject_id: field(1),
            label,
            morph_tool,
            source,
        });
    }

    DatasetManifest::new(records, format!("read from {}", path.display()))
}

/// Writes the manifest as CSV; the exact inverse of [`read_manifest`].
pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    manifest.validate()?;
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| Error::Format(e.to_string()))?;
    for record in &manifest.records {
        writer
            .write_record([
                record.path.as_str(),
                record.subject_id.as_str(),
                record.label.as_str(),
                record.morph_tool.as_str(),
                record.source.as_str(),
            ])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
