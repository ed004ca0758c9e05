//! Semantic-fragment (SF) sequences and their node-id sidecar.
//!
//! Each relationship becomes the three tokens `subject predicate object`; the
//! sidecar keeps the `(subject_id, object_id)` pair for the same position so
//! boxes can be merged back onto graph nodes after translation.

use std::fmt;

use thiserror::Error;

use crate::graph::{NodeId, SceneGraph};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SfError {
    #[error("scene graph has no relationships")]
    EmptyGraph,
    #[error("SF line has {0} tokens, which is not a multiple of 3")]
    Length(usize),
    #[error("empty SF line")]
    EmptyLine,
    #[error("relationship {index} references node {node} missing from the graph")]
    DanglingNode { index: usize, node: NodeId },
    #[error("malformed node pair {index}: {text:?}")]
    MalformedPair { index: usize, text: String },
    #[error("empty node line")]
    EmptyNodeLine,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triplet {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

impl Triplet {
    pub fn new(subject: impl Into<String>, predicate: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SfSequence {
    pub triplets: Vec<Triplet>,
}

impl SfSequence {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }
}

impl fmt::Display for SfSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.triplets.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{} {} {}", t.subject, t.predicate, t.object)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NodeSequence {
    pub pairs: Vec<(NodeId, NodeId)>,
}

impl NodeSequence {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

impl fmt::Display for NodeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (s, o)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{s} {o}")?;
        }
        Ok(())
    }
}

/// Derives the SF and node sequences, one entry per relationship, in graph order.
pub fn encode_sf(graph: &SceneGraph) -> Result<(SfSequence, NodeSequence), SfError> {
    if graph.relationships.is_empty() {
        return Err(SfError::EmptyGraph);
    }
    let mut triplets = Vec::with_capacity(graph.relationships.len());
    let mut pairs = Vec::with_capacity(graph.relationships.len());
    for (index, r) in graph.relationships.iter().enumerate() {
        let class = |node| {
            graph
                .class_of(node)
                .ok_or(SfError::DanglingNode { index, node })
        };
        triplets.push(Triplet::new(class(r.subject)?, r.predicate.clone(), class(r.object)?));
        pairs.push((r.subject, r.object));
    }
    Ok((SfSequence { triplets }, NodeSequence { pairs }))
}

pub fn parse_sf(line: &str) -> Result<SfSequence, SfError> {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(SfError::EmptyLine);
    }
    if tokens.len() % 3 != 0 {
        return Err(SfError::Length(tokens.len()));
    }
    Ok(SfSequence {
        triplets: tokens
            .chunks_exact(3)
            .map(|c| Triplet::new(c[0], c[1], c[2]))
            .collect(),
    })
}

pub fn serialize_sf(seq: &SfSequence) -> String {
    seq.to_string()
}

/// Parses a sidecar line such as `3 7;1 2`.
pub fn parse_nodes(line: &str) -> Result<NodeSequence, SfError> {
    if line.trim().is_empty() {
        return Err(SfError::EmptyNodeLine);
    }
    let pairs = line
        .split(';')
        .enumerate()
        .map(|(index, chunk)| {
            let malformed = || SfError::MalformedPair {
                index,
                text: chunk.to_owned(),
            };
            let mut it = chunk.split_whitespace();
            let s = it.next().and_then(|t| t.parse().ok()).ok_or_else(malformed)?;
            let o = it.next().and_then(|t| t.parse().ok()).ok_or_else(malformed)?;
            if it.next().is_some() {
                return Err(malformed());
            }
            Ok((s, o))
        })
        .collect::<Result<_, _>>()?;
    Ok(NodeSequence { pairs })
}

pub fn serialize_nodes(seq: &NodeSequence) -> String {
    seq.to_string()
}
