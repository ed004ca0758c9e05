//! SLEU: a BLEU-style similarity between a predicted layout and references.
//!
//! A layout is viewed as K visual relationships, each a (subject, object) pair
//! of class-labelled boxes, index-aligned with the reference because both come
//! from the same scene graph.
//!
//! * `p_1` (unigram accuracy) counts relationships whose classes match and whose
//!   subject and object boxes both reach the IoU threshold once the prediction
//!   is shifted so its subject min-corner lands on the reference subject's.
//! * `p_n` (n-gram accuracy) looks at every n-subset of relationships, shifts
//!   the predicted subjects by the mean min-corner offset of the subset, and
//!   counts the subset as matched when every subject keeps its class and
//!   passes the threshold. Objects are not used here.
//! * The score is `max_j exp(Σ w_n ln p_n^j)` over references `j`.
//!
//! Geometry is generic over [`Scalar`], so the same code runs over `f64` or an
//! exact rational type. Accuracies are ratios of counts; only the final
//! combination goes through `ln`/`exp`.

use std::collections::BTreeMap;

use itertools::Itertools;
use thiserror::Error;

use crate::bacs::{GridBox, QuantizedLayout};
use crate::graph::{NodeId, SceneGraph};
use crate::num::{max, min, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SleuError {
    #[error("layout has no relationships")]
    EmptyLayout,
    #[error("prediction has {predicted} relationships but the reference has {reference}")]
    Alignment { predicted: usize, reference: usize },
    #[error("order {n} is undefined for a layout with {k} relationships")]
    UndefinedOrder { n: usize, k: usize },
    #[error("no references given")]
    NoReferences,
    #[error("empty evaluation corpus")]
    EmptyCorpus,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("relationship {index} endpoint {node} has no box")]
    MissingBox { index: usize, node: NodeId },
}

/// Axis-aligned box; `x`/`y` are the min corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x: T,
    pub y: T,
    pub w: T,
    pub h: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x: T, y: T, w: T, h: T) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> T {
        self.w * self.h
    }

    pub fn translated(&self, shift: ShiftVector<T>) -> Self {
        Self {
            x: self.x + shift.dx,
            y: self.y + shift.dy,
            ..*self
        }
    }

    pub fn is_valid(&self) -> bool {
        self.w > T::zero() && self.h > T::zero()
    }

    pub fn from_grid(b: &GridBox) -> Self {
        let c = |v: u32| T::from_u32(v).expect("grid coordinate fits the scalar type");
        Self::new(c(b.x), c(b.y), c(b.w), c(b.h))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftVector<T> {
    pub dx: T,
    pub dy: T,
}

impl<T: Scalar> ShiftVector<T> {
    /// Offset moving `from`'s min corner onto `to`'s.
    pub fn between(from: &Rect<T>, to: &Rect<T>) -> Self {
        Self {
            dx: to.x - from.x,
            dy: to.y - from.y,
        }
    }
}

/// Intersection over union of two boxes with positive area.
pub fn iou<T: Scalar>(a: &Rect<T>, b: &Rect<T>) -> T {
    let zero = T::zero();
    if a == b {
        return T::one();
    }
    let iw = max(zero, min(a.x + a.w, b.x + b.w) - max(a.x, b.x));
    let ih = max(zero, min(a.y + a.h, b.y + b.h) - max(a.y, b.y));
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > zero {
        min(inter / union, T::one())
    } else {
        zero
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualRelationship<T> {
    pub subject_class: String,
    pub subject_box: Rect<T>,
    pub object_class: String,
    pub object_box: Rect<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisualRelationshipSet<T> {
    pub relationships: Vec<VisualRelationship<T>>,
}

impl<T: Scalar> VisualRelationshipSet<T> {
    pub fn new(relationships: Vec<VisualRelationship<T>>) -> Result<Self, SleuError> {
        if relationships.is_empty() {
            return Err(SleuError::EmptyLayout);
        }
        Ok(Self { relationships })
    }

    pub fn len(&self) -> usize {
        self.relationships.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relationships.is_empty()
    }

    /// Every box moved by the same vector.
    pub fn translated(&self, shift: ShiftVector<T>) -> Self {
        Self {
            relationships: self
                .relationships
                .iter()
                .map(|r| VisualRelationship {
                    subject_box: r.subject_box.translated(shift),
                    object_box: r.object_box.translated(shift),
                    ..r.clone()
                })
                .collect(),
        }
    }
}

/// Builds the relationship view of a layout, one entry per graph relationship.
pub fn layout_to_visual_relationships<T: Scalar>(
    graph: &SceneGraph,
    boxes: &BTreeMap<NodeId, (String, Rect<T>)>,
) -> Result<VisualRelationshipSet<T>, SleuError> {
    let relationships = graph
        .relationships
        .iter()
        .enumerate()
        .map(|(index, r)| {
            let get = |node| boxes.get(&node).ok_or(SleuError::MissingBox { index, node });
            let (sc, sb) = get(r.subject)?;
            let (oc, ob) = get(r.object)?;
            Ok(VisualRelationship {
                subject_class: sc.clone(),
                subject_box: *sb,
                object_class: oc.clone(),
                object_box: *ob,
            })
        })
        .collect::<Result<Vec<_>, SleuError>>()?;
    VisualRelationshipSet::new(relationships)
}

/// Relationship view of a quantized layout, in grid units.
pub fn quantized_to_visual_relationships<T: Scalar>(
    graph: &SceneGraph,
    layout: &QuantizedLayout,
) -> Result<VisualRelationshipSet<T>, SleuError> {
    let boxes = layout
        .boxes
        .iter()
        .map(|(id, b)| (*id, (b.class_label.clone(), Rect::from_grid(&b.grid_box))))
        .collect();
    layout_to_visual_relationships(graph, &boxes)
}

/// `matched / total` kept as counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderAccuracy {
    pub matched: u64,
    pub total: u64,
}

impl OrderAccuracy {
    pub fn value(&self) -> f64 {
        self.matched as f64 / self.total as f64
    }
}

fn check_aligned<T>(
    pred: &VisualRelationshipSet<T>,
    reference: &VisualRelationshipSet<T>,
) -> Result<usize, SleuError> {
    if pred.relationships.len() != reference.relationships.len() {
        return Err(SleuError::Alignment {
            predicted: pred.relationships.len(),
            reference: reference.relationships.len(),
        });
    }
    match reference.relationships.len() {
        0 => Err(SleuError::EmptyLayout),
        k => Ok(k),
    }
}

pub fn unigram_accuracy<T: Scalar>(
    pred: &VisualRelationshipSet<T>,
    reference: &VisualRelationshipSet<T>,
    t_iou: T,
) -> Result<OrderAccuracy, SleuError> {
    let k = check_aligned(pred, reference)?;
    let matched = reference
        .relationships
        .iter()
        .zip(&pred.relationships)
        .filter(|(r, p)| {
            if p.subject_class != r.subject_class || p.object_class != r.object_class {
                return false;
            }
            let shift = ShiftVector::between(&p.subject_box, &r.subject_box);
            let js = iou(&p.subject_box.translated(shift), &r.subject_box);
            let jo = iou(&p.object_box.translated(shift), &r.object_box);
            jo >= t_iou && js >= t_iou
        })
        .count();
    Ok(OrderAccuracy {
        matched: matched as u64,
        total: k as u64,
    })
}

pub fn ngram_accuracy<T: Scalar>(
    pred: &VisualRelationshipSet<T>,
    reference: &VisualRelationshipSet<T>,
    n: usize,
    t_iou: T,
) -> Result<OrderAccuracy, SleuError> {
    let k = check_aligned(pred, reference)?;
    if n == 0 || n > k {
        return Err(SleuError::UndefinedOrder { n, k });
    }
    let count = T::from_usize(n).expect("order fits the scalar type");
    let mut matched = 0u64;
    let mut total = 0u64;
    for subset in (0..k).combinations(n) {
        total += 1;
        let (mut sx, mut sy) = (T::zero(), T::zero());
        for &i in &subset {
            let d = ShiftVector::between(
                &pred.relationships[i].subject_box,
                &reference.relationships[i].subject_box,
            );
            sx = sx + d.dx;
            sy = sy + d.dy;
        }
        let shift = ShiftVector {
            dx: sx / count,
            dy: sy / count,
        };
        let all = subset.iter().all(|&i| {
            let (p, r) = (&pred.relationships[i], &reference.relationships[i]);
            p.subject_class == r.subject_class
                && iou(&p.subject_box.translated(shift), &r.subject_box) >= t_iou
        });
        if all {
            matched += 1;
        }
    }
    Ok(OrderAccuracy { matched, total })
}

/// Accuracy of order `n` (1 = unigram).
pub fn order_accuracy<T: Scalar>(
    pred: &VisualRelationshipSet<T>,
    reference: &VisualRelationshipSet<T>,
    n: usize,
    t_iou: T,
) -> Result<OrderAccuracy, SleuError> {
    if n == 1 {
        unigram_accuracy(pred, reference, t_iou)
    } else {
        ngram_accuracy(pred, reference, n, t_iou)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SleuConfig<T> {
    pub t_iou: T,
    pub max_order: usize,
    /// One weight per order `1..=max_order`.
    pub weights: Vec<f64>,
}

impl<T: Scalar> SleuConfig<T> {
    /// `max_order` orders with uniform weights.
    pub fn uniform(t_iou: T, max_order: usize) -> Self {
        Self {
            t_iou,
            max_order,
            weights: vec![1.0 / max_order as f64; max_order],
        }
    }

    pub fn validate(&self) -> Result<(), SleuError> {
        if !(self.t_iou >= T::zero() && self.t_iou <= T::one()) {
            return Err(SleuError::Config(format!("t_iou {:?} outside [0, 1]", self.t_iou)));
        }
        if self.max_order == 0 || self.weights.len() != self.max_order {
            return Err(SleuError::Config(format!(
                "{} weights for max order {}",
                self.weights.len(),
                self.max_order
            )));
        }
        if self.weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(SleuError::Config("weights must be positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(SleuError::Config(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

impl Default for SleuConfig<f64> {
    fn default() -> Self {
        Self::uniform(0.5, 3)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SleuResult {
    pub score: f64,
    /// `p_1 ..= p_min(N, K)` against the chosen reference.
    pub per_order: Vec<f64>,
    /// Zero-based index of the reference attaining the maximum.
    pub chosen_reference: usize,
}

/// `exp(Σ w_n ln p_n)` over the available orders, weights renormalized to the
/// orders present. Any zero accuracy gives zero.
pub fn combine_accuracies(per_order: &[f64], weights: &[f64]) -> f64 {
    let weights = &weights[..per_order.len().min(weights.len())];
    let total: f64 = weights.iter().sum();
    if per_order.iter().any(|&p| p <= 0.0) {
        return 0.0;
    }
    let log_sum: f64 = per_order
        .iter()
        .zip(weights)
        .map(|(p, w)| (w / total) * p.ln())
        .sum();
    log_sum.exp().clamp(0.0, 1.0)
}

pub fn sleu_score<T: Scalar>(
    pred: &VisualRelationshipSet<T>,
    references: &[VisualRelationshipSet<T>],
    config: &SleuConfig<T>,
) -> Result<SleuResult, SleuError> {
    config.validate()?;
    if references.is_empty() {
        return Err(SleuError::NoReferences);
    }
    let mut best: Option<SleuResult> = None;
    for (j, reference) in references.iter().enumerate() {
        let k = check_aligned(pred, reference)?;
        let per_order = (1..=config.max_order.min(k))
            .map(|n| order_accuracy(pred, reference, n, config.t_iou).map(|a| a.value()))
            .collect::<Result<Vec<_>, _>>()?;
        let score = combine_accuracies(&per_order, &config.weights);
        if best.as_ref().map_or(true, |b| score > b.score) {
            best = Some(SleuResult {
                score,
                per_order,
                chosen_reference: j,
            });
        }
    }
    Ok(best.expect("at least one reference"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusScore {
    pub mean: f64,
    pub per_sample: Vec<SleuResult>,
}

/// Arithmetic mean of per-sample SLEU over a corpus.
pub fn mean_sleu<T: Scalar>(
    pairs: &[(VisualRelationshipSet<T>, Vec<VisualRelationshipSet<T>>)],
    config: &SleuConfig<T>,
) -> Result<CorpusScore, SleuError> {
    if pairs.is_empty() {
        return Err(SleuError::EmptyCorpus);
    }
    let per_sample = pairs
        .iter()
        .map(|(pred, refs)| sleu_score(pred, refs, config))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CorpusScore {
        mean: mean_of(per_sample.iter().map(|r| r.score)),
        per_sample,
    })
}

/// Mean of already-computed scores (e.g. with failed samples counted as 0).
pub fn mean_of(scores: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = scores
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
