//! Sequence proxies for scene-graph to semantic-layout translation.
//!
//! A scene graph is flattened into semantic fragments (SF, three tokens per
//! relationship) and its layout into brick-action code segments (BACS, ten
//! tokens per relationship), so that any sequence-to-sequence model can learn
//! the mapping. This crate holds everything around that model:
//!
//! * [`graph`]: corpus ingestion, preprocessing and dataset filtering
//! * [`sf`] and [`bacs`]: the two codecs, alignment checking and layout
//!   restoration
//! * [`sleu`]: the SLEU layout metric, generic over the coordinate scalar
//! * [`augment`]: subset/reorder augmentation of training pairs
//! * [`baseline`]: a statistical SF → BACS translator
//! * [`pipeline`]: helpers chaining the above

pub mod augment;
pub mod bacs;
pub mod baseline;
pub mod graph;
pub mod num;
pub mod pipeline;
pub mod sf;
pub mod sleu;

pub use num_rational::Rational64;

pub use bacs::{BacsSequence, BacsToken, CodecConfig, GridBox, PositionMode, QuantizedLayout};
pub use graph::{GroundedSample, NodeId, SceneGraph};
pub use num::Scalar;
pub use sf::{NodeSequence, SfSequence};
pub use sleu::{Rect, SleuConfig, SleuResult, VisualRelationship, VisualRelationshipSet};

/// Boxes in real-valued coordinates.
pub type RealBox = Rect<f64>;
/// Single-precision boxes.
pub type RealBoxF32 = Rect<f32>;
/// Boxes in exact rational coordinates.
pub type ExactBox = Rect<Rational64>;

pub type RealRelationshipSet = VisualRelationshipSet<f64>;
pub type ExactRelationshipSet = VisualRelationshipSet<Rational64>;

pub type RealSleuConfig = SleuConfig<f64>;
pub type ExactSleuConfig = SleuConfig<Rational64>;
