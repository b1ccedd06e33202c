//! Scene segmentation and multimedia summarization of televised events
//! from contemporaneous social-media commentary.
//!
//! The pipeline bins messages by minute, opens a new scene whenever a
//! character's mention share spikes, describes each scene with the message
//! nearest the scene centroid, and illustrates it with video frames picked
//! by a face classifier trained from subtitle/transcript weak labels.

pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod frames;
pub mod pipeline;
pub mod scenes;
pub mod synthetic;
pub mod text;
pub mod tweets;
pub mod weak_label;

pub use error::{Error, Result};
