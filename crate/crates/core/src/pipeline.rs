//! Glue between the codecs and the metric: encode a grounded sample into its
//! aligned sequences, decode a predicted line, score a restored layout.

use thiserror::Error;

use crate::bacs::{
    encode_bacs, execute_bacs, quantize_layout, BacsError, BacsSequence, CodecConfig,
    QuantizedLayout,
};
use crate::graph::{preprocess_graph, GraphError, GroundedSample, SceneGraph};
use crate::sf::{encode_sf, NodeSequence, SfError, SfSequence};
use crate::sleu::{quantized_to_visual_relationships, sleu_score, SleuConfig, SleuError, SleuResult};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sf(#[from] SfError),
    #[error(transparent)]
    Bacs(#[from] BacsError),
    #[error(transparent)]
    Sleu(#[from] SleuError),
}

/// A preprocessed sample with its SF, node and BACS sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub sample_id: String,
    pub graph: SceneGraph,
    pub layout: QuantizedLayout,
    pub sf: SfSequence,
    pub nodes: NodeSequence,
    pub bacs: BacsSequence,
}

pub fn encode_sample(
    sample: &GroundedSample,
    codec: &CodecConfig,
) -> Result<EncodedSample, PipelineError> {
    let sample = preprocess_graph(sample)?;
    let (sf, nodes) = encode_sf(&sample.graph)?;
    let layout = quantize_layout(&sample.graph, &sample.layout, codec.grid_max, &codec.ar)?;
    let bacs = encode_bacs(&layout, &nodes, codec.mode, codec.include_imgar)?;
    Ok(EncodedSample {
        sample_id: sample.sample_id,
        graph: sample.graph,
        layout,
        sf,
        nodes,
        bacs,
    })
}

/// Parses, aligns and executes one predicted `.bacs` line.
pub fn decode_prediction(
    line: &str,
    nodes: &NodeSequence,
    codec: &CodecConfig,
) -> Result<QuantizedLayout, BacsError> {
    let seq = BacsSequence::parse(line, nodes.len(), codec.mode, codec.include_imgar)?;
    execute_bacs(&seq, nodes, codec.grid_max, &codec.ar)
}

/// SLEU of a restored layout against reference layouts of the same graph, in
/// grid units.
pub fn score_layout(
    graph: &SceneGraph,
    predicted: &QuantizedLayout,
    references: &[QuantizedLayout],
    config: &SleuConfig<f64>,
) -> Result<SleuResult, SleuError> {
    let pred = quantized_to_visual_relationships(graph, predicted)?;
    let refs = references
        .iter()
        .map(|r| quantized_to_visual_relationships(graph, r))
        .collect::<Result<Vec<_>, _>>()?;
    sleu_score(&pred, &refs, config)
}
