//! Landmark tracks and their line-delimited JSON form.
//!
//! A track file holds an optional header line `{"frame_size":[w,h]}`
//! followed by one record per frame, `{"frame":i,"points":[[x,y,c],...]}`,
//! with `"points": null` for frames without a detection. Frame indices
//! must increase; skipped indices are treated as missing detections.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{MiningError, Result};

pub const NUM_LANDMARKS: usize = 66;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Landmark {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

/// The landmarks of one frame, exactly [`NUM_LANDMARKS`] of them.
#[derive(Clone, Debug, PartialEq)]
pub struct LandmarkFrame {
    points: Vec<Landmark>,
}

impl LandmarkFrame {
    pub fn new(points: Vec<Landmark>) -> Result<Self> {
        if points.len() != NUM_LANDMARKS {
            return Err(MiningError::Contract(format!("expected {NUM_LANDMARKS} landmarks, got {}", points.len())));
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(&p.confidence)) {
            return Err(MiningError::Contract(format!("landmark confidence {} outside [0,1]", p.confidence)));
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(MiningError::Contract("non-finite landmark position".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Landmark] {
        &self.points
    }

    pub fn mean_confidence(&self) -> f64 {
        self.points.iter().map(|p| p.confidence).sum::<f64>() / self.points.len() as f64
    }

    /// `(min_x, min_y, max_x, max_y)` of the landmark positions.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.points.iter().fold(
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    /// Average side length of the landmark bounding box.
    pub fn face_size(&self) -> f64 {
        let (x0, y0, x1, y1) = self.bounds();
        ((x1 - x0) + (y1 - y0)) / 2.0
    }

    /// Moves every landmark by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| Landmark { x: p.x + dx, y: p.y + dy, ..*p }).collect(),
        }
    }

    pub fn with_confidence(&self, c: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| Landmark { confidence: c, ..*p }).collect(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LandmarkTrack {
    pub frames: Vec<Option<LandmarkFrame>>,
    /// `(width, height)` of the source video, when known.
    pub frame_size: Option<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    frame: usize,
    points: Option<Vec<[f64; 3]>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    frame_size: (usize, usize),
}

impl LandmarkTrack {
    pub fn new(frames: Vec<Option<LandmarkFrame>>) -> Self {
        Self { frames, frame_size: None }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn read_jsonl(reader: impl BufRead) -> Result<Self> {
        let mut track = LandmarkTrack::default();
        for (n, line) in reader.lines().enumerate() {
            let line_no = n + 1;
            let line = line.map_err(|e| MiningError::Parse { line: line_no, detail: e.to_string() })?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.contains("\"frame_size\"") {
                if !track.frames.is_empty() || track.frame_size.is_some() {
                    return Err(MiningError::Parse { line: line_no, detail: "header must come first".into() });
                }
                let h: Header = serde_json::from_str(line).map_err(|e| MiningError::Parse { line: line_no, detail: e.to_string() })?;
                track.frame_size = Some(h.frame_size);
                continue;
            }
            let r: Record = serde_json::from_str(line).map_err(|e| MiningError::Parse { line: line_no, detail: e.to_string() })?;
            if r.frame < track.frames.len() {
                return Err(MiningError::Parse {
                    line: line_no,
                    detail: format!("frame {} out of order", r.frame),
                });
            }
            track.frames.resize(r.frame, None);
            let frame = match r.points {
                None => None,
                Some(pts) => {
                    let points = pts.into_iter().map(|[x, y, confidence]| Landmark { x, y, confidence }).collect();
                    Some(LandmarkFrame::new(points).map_err(|e| MiningError::Parse { line: line_no, detail: e.to_string() })?)
                }
            };
            track.frames.push(frame);
        }
        Ok(track)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        if let Some(frame_size) = self.frame_size {
            writeln!(w, "{}", serde_json::to_string(&Header { frame_size }).expect("header serializes"))?;
        }
        for (frame, f) in self.frames.iter().enumerate() {
            let points = f.as_ref().map(|f| f.points.iter().map(|p| [p.x, p.y, p.confidence]).collect());
            writeln!(w, "{}", serde_json::to_string(&Record { frame, points }).expect("record serializes"))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|source| MiningError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::read_jsonl(BufReader::new(f))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let io = |source| MiningError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        self.write_jsonl(&mut w).map_err(io)?;
        w.flush().map_err(io)
    }
}
