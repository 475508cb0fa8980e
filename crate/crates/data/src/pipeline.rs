//! Preparation for the compression experiments: resolution normalization,
//! then compression, then face-crop extraction.

use serde::{Deserialize, Serialize};
use vfd_media::{BBox, FrameSequence};

use crate::compress::{EncoderClient, Quality};
use crate::extract::{extract_detector_frames, ExtractConfig, ExtractedSequence};
use crate::resolution::normalize_resolution;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressionPipeline {
    pub target_side: f64,
    pub quality: Quality,
    pub extract: ExtractConfig,
}

/// One executed stage with the frame size it consumed and produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub input_size: (usize, usize),
    pub output_size: (usize, usize),
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub extracted: ExtractedSequence,
    pub trace: Vec<Stage>,
}

fn dims(v: &FrameSequence) -> (usize, usize) {
    v.frames.first().map(|f| (f.width(), f.height())).unwrap_or((0, 0))
}

impl CompressionPipeline {
    pub fn run(&self, video: &FrameSequence, boxes: &[Option<BBox>], encoder: &dyn EncoderClient) -> Result<PipelineOutput> {
        let mut trace = Vec::new();
        let (resized, boxes, factor) = normalize_resolution(video, boxes, self.target_side)?;
        trace.push(Stage {
            name: "normalize_resolution".into(),
            input_size: dims(video),
            output_size: dims(&resized),
            detail: format!("factor {factor:.4}"),
        });
        let compressed = encoder.encode(&resized, self.quality)?;
        trace.push(Stage {
            name: "compress".into(),
            input_size: dims(&resized),
            output_size: dims(&compressed),
            detail: format!("{} {:?}", encoder.name(), self.quality),
        });
        let extracted = extract_detector_frames(&compressed, &boxes, &self.extract)?;
        trace.push(Stage {
            name: "extract_detector_frames".into(),
            input_size: dims(&compressed),
            output_size: dims(&extracted.frames),
            detail: format!("{} crops, {} omitted", extracted.frames.len(), extracted.omitted.len()),
        });
        Ok(PipelineOutput { extracted, trace })
    }
}
