//! Shared inputs for the criterion benches.

use std::collections::BTreeSet;

use scenesum::classifier::{train, LabelSpace, PartialExample, SoftmaxModel, TrainConfig};
use scenesum::corpus::{bin_by_minute, MinuteBin};
use scenesum::embedding::{EmbeddingStore, FaceRecord};
use scenesum::scenes::Scene;
use scenesum::synthetic::{alias_table, event_fixture, scene_stream, SceneStreamSpec};

pub use scenesum;

/// Binned commentary for an event of `minutes` minutes with five planted
/// scenes spread across it.
pub fn stream_bins(minutes: usize, seed: u64) -> Vec<MinuteBin> {
    let step = minutes / 5;
    let spec = SceneStreamSpec {
        minutes,
        spike_minutes: (0..5).map(|i| i * step + step / 2).collect(),
        ..Default::default()
    };
    let stream = scene_stream(&spec, seed);
    bin_by_minute(&stream.messages, &alias_table(&stream.names()))
}

/// Everything `select_frames` needs for one scene of the synthetic event.
pub struct FrameCase {
    pub scene: Scene,
    pub characters: BTreeSet<String>,
    pub frames: EmbeddingStore,
    pub faces: Vec<FaceRecord>,
    pub model: SoftmaxModel,
}

pub fn frame_case(seed: u64) -> FrameCase {
    let fx = event_fixture(seed);
    let names = fx.stream.names();
    let space = LabelSpace::new(names.iter().copied()).expect("distinct names");
    let examples: Vec<PartialExample> = fx
        .test_faces
        .iter()
        .map(|t| PartialExample::from_names(&space, t.vec.clone(), &[&t.label], 0).expect("known label"))
        .collect();
    let model = train(&space, &examples, &TrainConfig::default()).expect("trains").model;
    let frames = EmbeddingStore::from_records(fx.frame_vectors).expect("frames load");
    let faces = EmbeddingStore::from_records(fx.face_vectors)
        .and_then(|s| s.face_records())
        .expect("faces load");
    let gold = &fx.stream.gold[0];
    FrameCase {
        scene: Scene {
            start_t: gold.start_t,
            end_t: gold.end_t,
            trigger_characters: BTreeSet::new(),
            message_ids: Vec::new(),
        },
        characters: names[..2].iter().map(|s| s.to_string()).collect(),
        frames,
        faces,
        model,
    }
}
