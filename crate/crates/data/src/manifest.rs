//! Dataset manifests: class → subset → subject → sequence, one tree per
//! split, stored as JSON. Sequence frame directories are relative to the
//! manifest file.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{io_err, DataError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    Real,
    Fake,
}

impl Class {
    /// Class index used as the training label.
    pub fn label(self) -> usize {
        match self {
            Class::Real => 0,
            Class::Fake => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Frames at the start and end of a sequence that lack temporal context
/// and are never sampled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Margin {
    pub lead: usize,
    pub trail: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceEntry {
    pub id: String,
    /// Directory of `000000.png, ...`, relative to the manifest.
    pub frames_dir: PathBuf,
    pub num_frames: usize,
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_video: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_track: Option<PathBuf>,
    #[serde(default)]
    pub margin: Margin,
}

impl SequenceEntry {
    /// Frame indices that may be sampled.
    pub fn eligible(&self) -> std::ops::Range<usize> {
        let end = self.num_frames.saturating_sub(self.margin.trail);
        self.margin.lead.min(end)..end
    }

    pub fn eligible_len(&self) -> usize {
        self.eligible().len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub sequences: Vec<SequenceEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsetEntry {
    pub name: String,
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassEntry {
    pub class: Class,
    pub subsets: Vec<SubsetEntry>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub classes: Vec<ClassEntry>,
}

/// Position of one frame in a split tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameRef {
    pub class: usize,
    pub subset: usize,
    pub subject: usize,
    pub sequence: usize,
    pub frame: usize,
}

impl SplitManifest {
    pub fn sequence(&self, r: &FrameRef) -> &SequenceEntry {
        &self.classes[r.class].subsets[r.subset].subjects[r.subject].sequences[r.sequence]
    }

    pub fn class_of(&self, r: &FrameRef) -> Class {
        self.classes[r.class].class
    }

    pub fn label(&self, r: &FrameRef) -> usize {
        self.class_of(r).label()
    }

    /// Every non-empty level has at least one eligible frame below it.
    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(DataError::Contract("split has no classes".into()));
        }
        for c in &self.classes {
            let empty = |what: &str| Err(DataError::Contract(format!("{:?} class: {what}", c.class)));
            if c.subsets.is_empty() {
                return empty("no subsets");
            }
            for s in &c.subsets {
                if s.subjects.is_empty() {
                    return empty(&format!("subset {} has no subjects", s.name));
                }
                for subj in &s.subjects {
                    if subj.sequences.is_empty() {
                        return empty(&format!("subject {} has no sequences", subj.id));
                    }
                    if let Some(q) = subj.sequences.iter().find(|q| q.eligible_len() == 0) {
                        return empty(&format!("sequence {} has no eligible frames", q.id));
                    }
                }
            }
        }
        Ok(())
    }

    /// Every eligible frame, in tree order.
    pub fn frames(&self) -> impl Iterator<Item = FrameRef> + '_ {
        self.classes.iter().enumerate().flat_map(move |(ci, c)| {
            c.subsets.iter().enumerate().flat_map(move |(si, s)| {
                s.subjects.iter().enumerate().flat_map(move |(ji, subj)| {
                    subj.sequences.iter().enumerate().flat_map(move |(qi, q)| {
                        q.eligible().map(move |frame| FrameRef {
                            class: ci,
                            subset: si,
                            subject: ji,
                            sequence: qi,
                            frame,
                        })
                    })
                })
            })
        })
    }

    pub fn total_frames(&self) -> usize {
        self.classes
            .iter()
            .flat_map(|c| &c.subsets)
            .flat_map(|s| &s.subjects)
            .flat_map(|j| &j.sequences)
            .map(SequenceEntry::eligible_len)
            .sum()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub splits: BTreeMap<Split, SplitManifest>,
    /// Directory the relative paths resolve against; set on load.
    #[serde(skip)]
    pub root: PathBuf,
}

impl DatasetManifest {
    pub fn split(&self, split: Split) -> Result<&SplitManifest> {
        self.splits
            .get(&split)
            .ok_or_else(|| DataError::Contract(format!("manifest has no {split} split")))
    }

    /// Absolute path of a frame image.
    pub fn frame_path(&self, split: Split, r: &FrameRef) -> Result<PathBuf> {
        let q = self.split(split)?.sequence(r);
        Ok(self.root.join(&q.frames_dir).join(vfd_media::frame_name(r.frame)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut m: DatasetManifest = serde_json::from_str(&text).map_err(|e| DataError::Format {
            what: "manifest",
            detail: e.to_string(),
        })?;
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(io_err(path))
    }
}
