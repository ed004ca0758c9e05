//! Scene graphs, semantic layouts, corpus ingestion and dataset filtering.
//!
//! A corpus is a single JSON document:
//!
//! ```json
//! { "samples": [ { "id": "1", "width": 800, "height": 600,
//!     "objects": [ {"id": 1, "class": "person", "attributes": [], "box": [0, 0, 10, 20]} ],
//!     "relationships": [ {"subject": 1, "predicate": "ride", "object": 2} ] } ] }
//! ```
//!
//! Labels are normalized at ingestion (lowercase, internal whitespace folded to
//! `_`) so that multiword labels become single vocabulary tokens.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde_json::{json, Map, Value};
use thiserror::Error;

pub type NodeId = u64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed corpus document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("sample `{sample_id}`: field `{field}`: {reason}")]
    Schema {
        sample_id: String,
        field: String,
        reason: String,
    },
    #[error("sample `{0}` has no relationships")]
    EmptyGraph(String),
    #[error("split manifest names unknown sample `{0}`")]
    UnknownSample(String),
}

fn schema(sample_id: &str, field: impl Into<String>, reason: impl Into<String>) -> GraphError {
    GraphError::Schema {
        sample_id: sample_id.to_owned(),
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectNode {
    pub id: NodeId,
    pub class_label: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relationship {
    pub subject: NodeId,
    pub predicate: String,
    pub object: NodeId,
}

/// Objects plus an ordered relationship list. Relationship order is part of
/// the graph's identity and is preserved by every codec.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SceneGraph {
    pub nodes: Vec<ObjectNode>,
    pub relationships: Vec<Relationship>,
}

impl SceneGraph {
    pub fn node(&self, id: NodeId) -> Option<&ObjectNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn class_of(&self, id: NodeId) -> Option<&str> {
        self.node(id).map(|n| n.class_label.as_str())
    }

    /// Copy of the graph keeping only the relationships at `indices`, in that
    /// order, and the nodes they touch.
    pub fn select_relationships(&self, indices: &[usize]) -> SceneGraph {
        let relationships: Vec<Relationship> =
            indices.iter().map(|&i| self.relationships[i].clone()).collect();
        let used: HashSet<NodeId> = relationships
            .iter()
            .flat_map(|r| [r.subject, r.object])
            .collect();
        SceneGraph {
            nodes: self
                .nodes
                .iter()
                .filter(|n| used.contains(&n.id))
                .cloned()
                .collect(),
            relationships,
        }
    }
}

/// Pixel-space box; `x`/`y` are the left/top edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl PixelBox {
    pub fn min_side(&self) -> f64 {
        self.w.min(self.h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLayout {
    pub image_w: u32,
    pub image_h: u32,
    pub boxes: BTreeMap<NodeId, PixelBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundedSample {
    pub sample_id: String,
    pub graph: SceneGraph,
    pub layout: SemanticLayout,
}

/// Lowercases a label and folds runs of whitespace into single underscores.
pub fn normalize_label(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

pub fn is_valid_token(token: &str) -> bool {
    !token.is_empty()
        && token
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn label(sample_id: &str, field: String, value: Option<&Value>) -> Result<String, GraphError> {
    let raw = value
        .and_then(Value::as_str)
        .ok_or_else(|| schema(sample_id, field.clone(), "expected a string"))?;
    let token = normalize_label(raw);
    if !is_valid_token(&token) {
        return Err(schema(
            sample_id,
            field,
            format!("label {raw:?} does not normalize to a [a-z0-9_]+ token"),
        ));
    }
    Ok(token)
}

fn positive_int(sample_id: &str, field: &str, value: Option<&Value>) -> Result<u32, GraphError> {
    match value.and_then(Value::as_u64) {
        Some(v) if v > 0 && v <= u64::from(u32::MAX) => Ok(v as u32),
        Some(_) => Err(schema(sample_id, field, "must be a positive integer")),
        None => Err(schema(sample_id, field, "missing or not an integer")),
    }
}

fn node_ref(sample_id: &str, field: String, value: Option<&Value>) -> Result<NodeId, GraphError> {
    value
        .and_then(Value::as_u64)
        .ok_or_else(|| schema(sample_id, field, "missing or not a non-negative integer"))
}

fn parse_sample(index: usize, raw: &Value) -> Result<GroundedSample, GraphError> {
    let obj = raw
        .as_object()
        .ok_or_else(|| schema(&format!("#{index}"), "samples", "entry is not an object"))?;
    let sample_id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(schema(&format!("#{index}"), "id", "missing sample id")),
    };
    let sid = sample_id.as_str();
    let image_w = positive_int(sid, "width", obj.get("width"))?;
    let image_h = positive_int(sid, "height", obj.get("height"))?;

    let objects = obj
        .get("objects")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(sid, "objects", "missing or not an array"))?;
    let mut nodes = Vec::with_capacity(objects.len());
    let mut boxes = BTreeMap::new();
    for (i, o) in objects.iter().enumerate() {
        let id = node_ref(sid, format!("objects[{i}].id"), o.get("id"))?;
        let class_label = label(sid, format!("objects[{i}].class"), o.get("class"))?;
        let attributes = match o.get("attributes") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(j, a)| label(sid, format!("objects[{i}].attributes[{j}]"), Some(a)))
                .collect::<Result<_, _>>()?,
            Some(_) => {
                return Err(schema(sid, format!("objects[{i}].attributes"), "not an array"))
            }
        };
        let coords: Vec<f64> = o
            .get("box")
            .and_then(Value::as_array)
            .map(|b| b.iter().filter_map(Value::as_f64).collect())
            .unwrap_or_default();
        if coords.len() != 4 {
            return Err(schema(sid, format!("objects[{i}].box"), "expected [x, y, w, h]"));
        }
        if !(coords[2] > 0.0 && coords[3] > 0.0) {
            return Err(schema(
                sid,
                format!("objects[{i}].box"),
                "width and height must be positive",
            ));
        }
        if boxes.contains_key(&id) {
            return Err(schema(sid, format!("objects[{i}].id"), format!("duplicate node id {id}")));
        }
        boxes.insert(
            id,
            PixelBox {
                x: coords[0],
                y: coords[1],
                w: coords[2],
                h: coords[3],
            },
        );
        nodes.push(ObjectNode {
            id,
            class_label,
            attributes,
        });
    }

    let rels = obj
        .get("relationships")
        .and_then(Value::as_array)
        .ok_or_else(|| schema(sid, "relationships", "missing or not an array"))?;
    let mut relationships = Vec::with_capacity(rels.len());
    for (i, r) in rels.iter().enumerate() {
        let subject = node_ref(sid, format!("relationships[{i}].subject"), r.get("subject"))?;
        let object = node_ref(sid, format!("relationships[{i}].object"), r.get("object"))?;
        let predicate = label(sid, format!("relationships[{i}].predicate"), r.get("predicate"))?;
        for (end, id) in [("subject", subject), ("object", object)] {
            if !boxes.contains_key(&id) {
                return Err(schema(
                    sid,
                    format!("relationships[{i}].{end}"),
                    format!("unknown node id {id}"),
                ));
            }
        }
        if subject == object {
            return Err(schema(
                sid,
                format!("relationships[{i}]"),
                "subject and object are the same node",
            ));
        }
        relationships.push(Relationship {
            subject,
            predicate,
            object,
        });
    }

    Ok(GroundedSample {
        sample_id,
        graph: SceneGraph {
            nodes,
            relationships,
        },
        layout: SemanticLayout {
            image_w,
            image_h,
            boxes,
        },
    })
}

/// Parses a corpus document. Relationship order follows the document.
pub fn parse_corpus(document: &str) -> Result<Vec<GroundedSample>, GraphError> {
    let root: Value = serde_json::from_str(document)?;
    let samples = root
        .get("samples")
        .and_then(Value::as_array)
        .ok_or_else(|| schema("<corpus>", "samples", "missing or not an array"))?;
    samples
        .iter()
        .enumerate()
        .map(|(i, s)| parse_sample(i, s))
        .collect()
}

fn sample_to_json(sample: &GroundedSample) -> Value {
    let objects: Vec<Value> = sample
        .graph
        .nodes
        .iter()
        .map(|n| {
            let b = sample.layout.boxes[&n.id];
            json!({
                "id": n.id,
                "class": n.class_label,
                "attributes": n.attributes,
                "box": [b.x, b.y, b.w, b.h],
            })
        })
        .collect();
    let relationships: Vec<Value> = sample
        .graph
        .relationships
        .iter()
        .map(|r| json!({"subject": r.subject, "predicate": r.predicate, "object": r.object}))
        .collect();
    let mut m = Map::new();
    m.insert("id".into(), Value::String(sample.sample_id.clone()));
    m.insert("width".into(), sample.layout.image_w.into());
    m.insert("height".into(), sample.layout.image_h.into());
    m.insert("objects".into(), Value::Array(objects));
    m.insert("relationships".into(), Value::Array(relationships));
    Value::Object(m)
}

/// Serializes samples back into the corpus schema accepted by [`parse_corpus`].
pub fn write_corpus(samples: &[GroundedSample]) -> String {
    let doc = json!({ "samples": samples.iter().map(sample_to_json).collect::<Vec<_>>() });
    serde_json::to_string_pretty(&doc).expect("corpus values are always serializable")
}

/// Drops attributes and every object that takes part in no relationship.
pub fn preprocess_graph(sample: &GroundedSample) -> Result<GroundedSample, GraphError> {
    if sample.graph.relationships.is_empty() {
        return Err(GraphError::EmptyGraph(sample.sample_id.clone()));
    }
    let used: BTreeSet<NodeId> = sample
        .graph
        .relationships
        .iter()
        .flat_map(|r| [r.subject, r.object])
        .collect();
    let nodes = sample
        .graph
        .nodes
        .iter()
        .filter(|n| used.contains(&n.id))
        .map(|n| ObjectNode {
            id: n.id,
            class_label: n.class_label.clone(),
            attributes: Vec::new(),
        })
        .collect();
    let boxes = sample
        .layout
        .boxes
        .iter()
        .filter(|(id, _)| used.contains(id))
        .map(|(id, b)| (*id, *b))
        .collect();
    Ok(GroundedSample {
        sample_id: sample.sample_id.clone(),
        graph: SceneGraph {
            nodes,
            relationships: sample.graph.relationships.clone(),
        },
        layout: SemanticLayout {
            image_w: sample.layout.image_w,
            image_h: sample.layout.image_h,
            boxes,
        },
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_object_class_count: u64,
    pub min_relationship_class_count: u64,
    pub min_box_side: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    pub max_relationships: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_object_class_count: 2000,
            min_relationship_class_count: 500,
            min_box_side: 32.0,
            min_objects: 3,
            max_objects: 30,
            max_relationships: 9,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_objects > self.max_objects {
            return Err(format!(
                "min_objects ({}) exceeds max_objects ({})",
                self.min_objects, self.max_objects
            ));
        }
        if !(self.min_box_side >= 0.0) {
            return Err("min_box_side must be non-negative".into());
        }
        Ok(())
    }
}

/// Occurrence counts of object classes (per object instance) and predicates
/// (per relationship instance).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassFrequencies {
    pub objects: HashMap<String, u64>,
    pub predicates: HashMap<String, u64>,
}

impl ClassFrequencies {
    pub fn count(samples: &[GroundedSample]) -> Self {
        let mut freq = Self::default();
        for s in samples {
            for n in &s.graph.nodes {
                *freq.objects.entry(n.class_label.clone()).or_default() += 1;
            }
            for r in &s.graph.relationships {
                *freq.predicates.entry(r.predicate.clone()).or_default() += 1;
            }
        }
        freq
    }

    pub fn object_count(&self, class: &str) -> u64 {
        self.objects.get(class).copied().unwrap_or(0)
    }

    pub fn predicate_count(&self, predicate: &str) -> u64 {
        self.predicates.get(predicate).copied().unwrap_or(0)
    }
}

fn retain_nodes(sample: &mut GroundedSample, keep: impl Fn(&ObjectNode, &PixelBox) -> bool) {
    let layout = &mut sample.layout;
    let graph = &mut sample.graph;
    graph.nodes.retain(|n| keep(n, &layout.boxes[&n.id]));
    let alive: HashSet<NodeId> = graph.nodes.iter().map(|n| n.id).collect();
    layout.boxes.retain(|id, _| alive.contains(id));
    graph
        .relationships
        .retain(|r| alive.contains(&r.subject) && alive.contains(&r.object));
}

/// Applies the filtering rules to one sample against a fixed frequency table.
///
/// Order: small-box cull, rare-class cull, object/relationship count cull,
/// then relationship cap (first `max_relationships` in document order).
pub fn filter_sample(
    sample: &GroundedSample,
    config: &FilterConfig,
    freq: &ClassFrequencies,
) -> Option<GroundedSample> {
    let mut s = sample.clone();
    retain_nodes(&mut s, |_, b| b.min_side() >= config.min_box_side);
    retain_nodes(&mut s, |n, _| {
        freq.object_count(&n.class_label) >= config.min_object_class_count
    });
    s.graph
        .relationships
        .retain(|r| freq.predicate_count(&r.predicate) >= config.min_relationship_class_count);

    let objects = s.graph.nodes.len();
    if objects < config.min_objects
        || objects > config.max_objects
        || s.graph.relationships.is_empty()
    {
        return None;
    }
    s.graph.relationships.truncate(config.max_relationships);
    Some(s)
}

pub fn filter_corpus_with(
    samples: &[GroundedSample],
    config: &FilterConfig,
    freq: &ClassFrequencies,
) -> Vec<GroundedSample> {
    samples
        .iter()
        .filter_map(|s| filter_sample(s, config, freq))
        .collect()
}

/// Filters `samples` using class frequencies counted over `samples` itself.
pub fn filter_corpus(samples: &[GroundedSample], config: &FilterConfig) -> Vec<GroundedSample> {
    let freq = ClassFrequencies::count(samples);
    filter_corpus_with(samples, config, &freq)
}

/// Reads a split manifest: one sample id per line, blank lines ignored.
pub fn parse_split_manifest(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Picks the samples named by a manifest, in manifest order.
pub fn select_split(
    samples: &[GroundedSample],
    ids: &[String],
) -> Result<Vec<GroundedSample>, GraphError> {
    let by_id: HashMap<&str, &GroundedSample> =
        samples.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    ids.iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .map(|s| (*s).clone())
                .ok_or_else(|| GraphError::UnknownSample(id.clone()))
        })
        .collect()
}
