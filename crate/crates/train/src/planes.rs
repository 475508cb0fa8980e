//! Per-frame detector input planes, computed once per sequence and then
//! gathered into batches.

use std::collections::{BTreeSet, HashMap};

use vfd_data::{DatasetManifest, FrameRef, SequenceEntry, Split, SplitManifest};
use vfd_media::{FrameSequence, Image};
use vfd_model::signal::{highpass_clip, normalize_color, spatial_highpass, TemporalNoiseConfig, STACK_LEN, WINDOW_LEAD, WINDOW_TRAIL};
use vfd_model::{DetectorInputs, InputKind, TemporalInput};
use vfd_tensor::Tensor;

use crate::{Result, TrainError};

type SeqKey = (usize, usize, usize, usize);

fn key(r: &FrameRef) -> SeqKey {
    (r.class, r.subset, r.subject, r.sequence)
}

#[derive(Clone, Debug, Default)]
struct SequencePlanes {
    color: Vec<Tensor<f32>>,
    spatial: Vec<Tensor<f32>>,
    /// `highpassed[j - 1]` is `A_j`.
    highpassed: Vec<Tensor<f32>>,
}

/// Input planes for every sequence of one split.
#[derive(Clone, Debug)]
pub struct PlaneStore {
    split: SplitManifest,
    kinds: BTreeSet<InputKind>,
    size: usize,
    sequences: HashMap<SeqKey, SequencePlanes>,
}

impl PlaneStore {
    /// Builds planes for the input kinds a detector reads, resizing frames
    /// to `size`. `load` returns the frames of one sequence.
    pub fn build(
        split: &SplitManifest,
        kinds: &BTreeSet<InputKind>,
        size: usize,
        temporal: &TemporalNoiseConfig,
        mut load: impl FnMut(&FrameRef, &SequenceEntry) -> Result<Vec<Image>>,
    ) -> Result<Self> {
        split.validate()?;
        let temporal_needed = kinds.contains(&InputKind::TemporalNoise);
        let mut sequences = HashMap::new();
        let mut seen = BTreeSet::new();
        for r in split.frames() {
            if !seen.insert(key(&r)) {
                continue;
            }
            let entry = split.sequence(&r);
            if temporal_needed && (entry.margin.lead < WINDOW_LEAD || entry.margin.trail < WINDOW_TRAIL) {
                return Err(TrainError::Contract(format!(
                    "sequence {} needs margins of at least {WINDOW_LEAD}/{WINDOW_TRAIL} frames for temporal input",
                    entry.id
                )));
            }
            let frames = load(&r, entry)?;
            if frames.len() != entry.num_frames {
                return Err(TrainError::Contract(format!(
                    "sequence {} lists {} frames, {} loaded",
                    entry.id,
                    entry.num_frames,
                    frames.len()
                )));
            }
            let tensors: Vec<Tensor<f32>> = frames
                .iter()
                .map(|f| normalize_color(&f.resize(size, size)))
                .collect();
            let mut planes = SequencePlanes::default();
            if temporal_needed {
                planes.highpassed = highpass_clip(&tensors, temporal)?;
            }
            if kinds.contains(&InputKind::SpatialNoise) {
                planes.spatial = tensors.iter().map(spatial_highpass).collect();
            }
            if kinds.contains(&InputKind::Color) {
                planes.color = tensors;
            }
            sequences.insert(key(&r), planes);
        }
        Ok(Self {
            split: split.clone(),
            kinds: kinds.clone(),
            size,
            sequences,
        })
    }

    /// Reads frame PNGs from the directories listed in `manifest`.
    pub fn from_manifest(
        manifest: &DatasetManifest,
        split: Split,
        kinds: &BTreeSet<InputKind>,
        size: usize,
        temporal: &TemporalNoiseConfig,
    ) -> Result<Self> {
        let tree = manifest.split(split)?;
        Self::build(tree, kinds, size, temporal, |_, entry| {
            let dir = manifest.root.join(&entry.frames_dir);
            Ok(FrameSequence::load_dir(&dir, entry.fps)?.frames)
        })
    }

    pub fn split(&self) -> &SplitManifest {
        &self.split
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Batch tensors for `refs`, in order.
    pub fn inputs(&self, refs: &[FrameRef]) -> Result<DetectorInputs<f32>> {
        if refs.is_empty() {
            return Err(TrainError::Contract("empty batch".into()));
        }
        let seqs = refs
            .iter()
            .map(|r| {
                let planes = self
                    .sequences
                    .get(&key(r))
                    .ok_or_else(|| TrainError::Contract(format!("frame {r:?} is not in this split")))?;
                if !self.split.sequence(r).eligible().contains(&r.frame) {
                    return Err(TrainError::Contract(format!("frame {r:?} is outside the sequence margins")));
                }
                Ok(planes)
            })
            .collect::<Result<Vec<_>>>()?;
        let gather = |pick: &dyn Fn(&SequencePlanes, usize) -> &Tensor<f32>| -> Result<Tensor<f32>> {
            let items: Vec<&Tensor<f32>> = seqs.iter().zip(refs).map(|(p, r)| pick(p, r.frame)).collect();
            Ok(Tensor::stack(&items)?)
        };
        let mut inputs = DetectorInputs::default();
        if self.kinds.contains(&InputKind::Color) {
            inputs.color = Some(gather(&|p, i| &p.color[i])?);
        }
        if self.kinds.contains(&InputKind::SpatialNoise) {
            inputs.spatial = Some(gather(&|p, i| &p.spatial[i])?);
        }
        if self.kinds.contains(&InputKind::TemporalNoise) {
            // Frame i reads A_{i-3} ..= A_{i+2}, stored at offsets i-4 ..= i+1.
            let stack = (0..STACK_LEN)
                .map(|k| gather(&|p, i| &p.highpassed[i + k - WINDOW_LEAD]))
                .collect::<Result<Vec<_>>>()?;
            inputs.temporal = Some(TemporalInput::Highpassed(stack));
        }
        Ok(inputs)
    }
}
