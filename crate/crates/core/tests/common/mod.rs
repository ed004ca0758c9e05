//! Shared generators and the brute-force n-gram oracle for integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use seqlayout::graph::{GroundedSample, ObjectNode, PixelBox, Relationship, SceneGraph, SemanticLayout};
use seqlayout::sleu::{Rect, VisualRelationship, VisualRelationshipSet};
use seqlayout::{Rational64, Scalar};

pub const CLASSES: [&str; 6] = ["person", "horse", "tree", "sky", "car", "traffic_light"];
pub const PREDICATES: [&str; 4] = ["ride", "near", "on", "has"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn random_pixel_box(rng: &mut ChaCha8Rng, w: u32, h: u32) -> PixelBox {
    let (w, h) = (f64::from(w), f64::from(h));
    let bw = rng.gen_range(1.0..w);
    let bh = rng.gen_range(1.0..h);
    PixelBox {
        x: rng.gen_range(0.0..(w - bw).max(1.0)),
        y: rng.gen_range(0.0..(h - bh).max(1.0)),
        w: bw,
        h: bh,
    }
}

/// Random grounded sample with `k` relationships. With `distinct_nodes` every
/// relationship gets its own subject and object; otherwise endpoints are
/// drawn from a shared pool, so nodes repeat across relationships.
pub fn random_sample(rng: &mut ChaCha8Rng, id: usize, k: usize, distinct_nodes: bool) -> GroundedSample {
    let image_w = rng.gen_range(32..2000);
    let image_h = rng.gen_range(32..2000);
    let pool = if distinct_nodes { 2 * k } else { rng.gen_range(2..=k + 2) };
    let nodes: Vec<ObjectNode> = (0..pool)
        .map(|i| ObjectNode {
            id: 100 + i as u64 * 7,
            class_label: CLASSES[rng.gen_range(0..CLASSES.len())].to_string(),
            attributes: vec![],
        })
        .collect();
    let relationships = (0..k)
        .map(|i| {
            let (s, o) = if distinct_nodes {
                (2 * i, 2 * i + 1)
            } else {
                let s = rng.gen_range(0..pool);
                let mut o = rng.gen_range(0..pool - 1);
                if o >= s {
                    o += 1;
                }
                (s, o)
            };
            Relationship {
                subject: nodes[s].id,
                predicate: PREDICATES[rng.gen_range(0..PREDICATES.len())].to_string(),
                object: nodes[o].id,
            }
        })
        .collect();
    let boxes = nodes
        .iter()
        .map(|n| (n.id, random_pixel_box(rng, image_w, image_h)))
        .collect();
    GroundedSample {
        sample_id: format!("sample-{id}"),
        graph: SceneGraph { nodes, relationships },
        layout: SemanticLayout {
            image_w,
            image_h,
            boxes,
        },
    }
}

pub fn real_box(rng: &mut ChaCha8Rng) -> Rect<f64> {
    Rect::new(
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(0.5..30.0),
        rng.gen_range(0.5..30.0),
    )
}

pub fn int_box(rng: &mut ChaCha8Rng) -> [i64; 4] {
    [
        rng.gen_range(0..40),
        rng.gen_range(0..40),
        rng.gen_range(1..=12),
        rng.gen_range(1..=12),
    ]
}

pub fn random_real_layout(rng: &mut ChaCha8Rng, k: usize) -> VisualRelationshipSet<f64> {
    let rels = (0..k)
        .map(|_| VisualRelationship {
            subject_class: CLASSES[rng.gen_range(0..3)].into(),
            subject_box: real_box(rng),
            object_class: CLASSES[rng.gen_range(0..3)].into(),
            object_box: real_box(rng),
        })
        .collect();
    VisualRelationshipSet::new(rels).unwrap()
}

/// A prediction derived from `reference`: boxes jittered by up to `jitter`
/// and, with probability `class_flip`, a class replaced.
pub fn perturbed(
    rng: &mut ChaCha8Rng,
    reference: &VisualRelationshipSet<f64>,
    jitter: f64,
    class_flip: f64,
) -> VisualRelationshipSet<f64> {
    let mut j = |b: &Rect<f64>| {
        Rect::new(
            b.x + rng.gen_range(-jitter..=jitter),
            b.y + rng.gen_range(-jitter..=jitter),
            (b.w + rng.gen_range(-jitter..=jitter)).max(0.25),
            (b.h + rng.gen_range(-jitter..=jitter)).max(0.25),
        )
    };
    let mut out = reference.clone();
    for r in &mut out.relationships {
        r.subject_box = j(&r.subject_box);
        r.object_box = j(&r.object_box);
    }
    for r in &mut out.relationships {
        if rng.gen_bool(class_flip) {
            r.subject_class = "zebra".into();
        }
        if rng.gen_bool(class_flip) {
            r.object_class = "zebra".into();
        }
    }
    out
}

/// Integer-coordinate layout pair, converted to any scalar.
pub fn int_pair(rng: &mut ChaCha8Rng, k: usize) -> (Vec<([i64; 4], [i64; 4], usize, usize)>, Vec<([i64; 4], [i64; 4], usize, usize)>) {
    let reference: Vec<_> = (0..k)
        .map(|_| (int_box(rng), int_box(rng), rng.gen_range(0..3), rng.gen_range(0..3)))
        .collect();
    let pred = reference
        .iter()
        .map(|(s, o, sc, oc)| {
            let mut s = *s;
            let mut o = *o;
            for v in s.iter_mut().chain(o.iter_mut()) {
                *v += rng.gen_range(-2..=2);
            }
            for b in [&mut s, &mut o] {
                b[2] = b[2].max(1);
                b[3] = b[3].max(1);
            }
            let sc = if rng.gen_bool(0.1) { (sc + 1) % 3 } else { *sc };
            (s, o, sc, *oc)
        })
        .collect();
    (pred, reference)
}

pub fn to_set<T: Scalar>(raw: &[([i64; 4], [i64; 4], usize, usize)]) -> VisualRelationshipSet<T> {
    let conv = |b: [i64; 4]| {
        let c = |v: i64| T::from_i64(v).unwrap();
        Rect::new(c(b[0]), c(b[1]), c(b[2]), c(b[3]))
    };
    VisualRelationshipSet::new(
        raw.iter()
            .map(|(s, o, sc, oc)| VisualRelationship {
                subject_class: CLASSES[*sc].into(),
                subject_box: conv(*s),
                object_class: CLASSES[*oc].into(),
                object_box: conv(*o),
            })
            .collect(),
    )
    .unwrap()
}

pub fn exact(v: i64, d: i64) -> Rational64 {
    Rational64::new(v, d)
}

/// Length of the overlap of `[a0, a0 + la)` and `[b0, b0 + lb)` via the
/// span identity `overlap = la + lb - span`, floored at zero.
fn overlap<T: Scalar>(a0: T, la: T, b0: T, lb: T) -> T {
    let lo = if a0 < b0 { a0 } else { b0 };
    let (a1, b1) = (a0 + la, b0 + lb);
    let hi = if a1 > b1 { a1 } else { b1 };
    let v = la + lb - (hi - lo);
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

fn naive_iou<T: Scalar>(a: &Rect<T>, b: &Rect<T>) -> T {
    let inter = overlap(a.x, a.w, b.x, b.w) * overlap(a.y, a.h, b.y, b.h);
    inter / (a.w * a.h + b.w * b.h - inter)
}

/// Brute-force n-gram accuracy: walks every bitmask of `k` bits, keeps those
/// with `n` bits set, and tests the subset directly.
pub fn oracle_ngram<T: Scalar>(
    pred: &VisualRelationshipSet<T>,
    reference: &VisualRelationshipSet<T>,
    n: usize,
    t_iou: T,
) -> (u64, u64) {
    let k = reference.relationships.len();
    let (mut matched, mut total) = (0, 0);
    for mask in 0u32..(1 << k) {
        if mask.count_ones() as usize != n {
            continue;
        }
        total += 1;
        let members: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let nn = T::from_usize(n).unwrap();
        let mut cx = T::zero();
        let mut cy = T::zero();
        for &i in &members {
            cx = cx + (reference.relationships[i].subject_box.x - pred.relationships[i].subject_box.x) / nn;
            cy = cy + (reference.relationships[i].subject_box.y - pred.relationships[i].subject_box.y) / nn;
        }
        let mut ok = true;
        for &i in &members {
            let p = &pred.relationships[i];
            let r = &reference.relationships[i];
            let moved = Rect::new(p.subject_box.x + cx, p.subject_box.y + cy, p.subject_box.w, p.subject_box.h);
            if p.subject_class != r.subject_class || naive_iou(&moved, &r.subject_box) < t_iou {
                ok = false;
            }
        }
        if ok {
            matched += 1;
        }
    }
    (matched, total)
}

pub fn boxes_of(layout: &seqlayout::QuantizedLayout) -> BTreeMap<u64, (String, seqlayout::GridBox)> {
    layout
        .boxes
        .iter()
        .map(|(id, b)| (*id, (b.class_label.clone(), b.grid_box)))
        .collect()
}
