//! Deterministic SF → BACS translator built from per-triplet geometry
//! statistics, with backoff triplet → predicate → global.
//!
//! It stands in for a learned sequence model and produces files in the same
//! format an external model must produce: one `.bacs` line per `.sf` line.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bacs::{BacsSegment, BacsSequence, ClassedBox, GridBox, ObjectPosition};
use crate::num::mean_half_up;
use crate::sf::{SfSequence, Triplet};

pub const TABLE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("pair {index}: SF has {sf_len} triplets but BACS has {bacs_len} segments")]
    Alignment {
        index: usize,
        sf_len: usize,
        bacs_len: usize,
    },
    #[error("baseline table is untrained")]
    Untrained,
    #[error("no aspect-ratio statistics in the table; train on sequences with imgar")]
    NoAspectRatio,
    #[error("malformed baseline table: {0}")]
    Format(String),
    #[error("baseline table version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Integer sums of one group of observations; means are derived on demand so
/// tables merge exactly and serialize bit-exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GeometryStats {
    pub count: u64,
    /// Σ subject (x, y, w, h).
    pub subject_sum: [i64; 4],
    /// Σ signed object offset (dx, dy) from the subject corner.
    pub object_delta_sum: [i64; 2],
    /// Σ object (w, h).
    pub object_size_sum: [i64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Observation {
    subject: [i64; 4],
    delta: [i64; 2],
    size: [i64; 2],
}

impl Observation {
    fn from_segment(seg: &BacsSegment) -> Self {
        let s = seg.subject.grid_box;
        let subject = [s.x, s.y, s.w, s.h].map(i64::from);
        let delta = match seg.object_position {
            ObjectPosition::Relative { dx, dy } => [dx, dy],
            ObjectPosition::Absolute { x, y } => {
                [i64::from(x) - subject[0], i64::from(y) - subject[1]]
            }
        };
        Observation {
            subject,
            delta,
            size: [i64::from(seg.object_w), i64::from(seg.object_h)],
        }
    }
}

fn add<const N: usize>(acc: &mut [i64; N], v: &[i64; N]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

impl GeometryStats {
    fn observe(&mut self, o: &Observation) {
        self.count += 1;
        add(&mut self.subject_sum, &o.subject);
        add(&mut self.object_delta_sum, &o.delta);
        add(&mut self.object_size_sum, &o.size);
    }

    pub fn merge(&mut self, other: &GeometryStats) {
        self.count += other.count;
        add(&mut self.subject_sum, &other.subject_sum);
        add(&mut self.object_delta_sum, &other.object_delta_sum);
        add(&mut self.object_size_sum, &other.object_size_sum);
    }

    pub fn mean_subject(&self) -> [f64; 4] {
        self.subject_sum.map(|s| s as f64 / self.count as f64)
    }

    pub fn mean_object_delta(&self) -> [f64; 2] {
        self.object_delta_sum.map(|s| s as f64 / self.count as f64)
    }

    pub fn mean_object_size(&self) -> [f64; 2] {
        self.object_size_sum.map(|s| s as f64 / self.count as f64)
    }

    fn rounded<const N: usize>(&self, sums: [i64; N]) -> [i64; N] {
        sums.map(|s| mean_half_up(s, self.count as i64))
    }

    /// Relative-mode segment from the rounded means, clamped to the
    /// vocabulary of a `grid_max` grid.
    fn segment(&self, triplet: &Triplet, grid_max: u32) -> BacsSegment {
        let m = i64::from(grid_max);
        let [x, y, w, h] = self.rounded(self.subject_sum);
        let [dx, dy] = self.rounded(self.object_delta_sum);
        let [ow, oh] = self.rounded(self.object_size_sum);
        let pos = |v: i64| v.clamp(0, m - 1) as u32;
        let size = |v: i64| v.clamp(1, m) as u32;
        BacsSegment {
            subject: ClassedBox {
                class_label: triplet.subject.clone(),
                grid_box: GridBox {
                    x: pos(x),
                    y: pos(y),
                    w: size(w),
                    h: size(h),
                },
            },
            object_class: triplet.object.clone(),
            object_position: ObjectPosition::Relative {
                dx: dx.clamp(-(m - 1), m - 1),
                dy: dy.clamp(-(m - 1), m - 1),
            },
            object_w: size(ow),
            object_h: size(oh),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BaselineTable {
    pub by_triplet: BTreeMap<Triplet, GeometryStats>,
    pub by_predicate: BTreeMap<String, GeometryStats>,
    pub global: Option<GeometryStats>,
    pub ar_histogram: BTreeMap<u32, u64>,
}

impl BaselineTable {
    /// Most frequent aspect-ratio bin; ties go to the smallest index.
    pub fn modal_ar_index(&self) -> Option<u32> {
        self.ar_histogram
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(i, _)| *i)
    }

    pub fn merge(&mut self, other: &BaselineTable) {
        for (k, v) in &other.by_triplet {
            self.by_triplet.entry(k.clone()).or_default().merge(v);
        }
        for (k, v) in &other.by_predicate {
            self.by_predicate.entry(k.clone()).or_default().merge(v);
        }
        if let Some(g) = &other.global {
            self.global.get_or_insert_with(Default::default).merge(g);
        }
        for (k, v) in &other.ar_histogram {
            *self.ar_histogram.entry(*k).or_default() += v;
        }
    }

    /// Statistics used for `triplet`: its own entry, else its predicate's,
    /// else the global one.
    pub fn lookup(&self, triplet: &Triplet) -> Option<&GeometryStats> {
        self.by_triplet
            .get(triplet)
            .or_else(|| self.by_predicate.get(&triplet.predicate))
            .or(self.global.as_ref())
    }

    pub fn to_json(&self) -> String {
        let file = TableFile {
            format_version: TABLE_FORMAT_VERSION,
            triplets: self
                .by_triplet
                .iter()
                .map(|(t, stats)| TripletEntry {
                    subject: t.subject.clone(),
                    predicate: t.predicate.clone(),
                    object: t.object.clone(),
                    stats: *stats,
                })
                .collect(),
            predicates: self.by_predicate.clone(),
            global: self.global,
            ar_histogram: self.ar_histogram.clone(),
        };
        serde_json::to_string_pretty(&file).expect("table is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, BaselineError> {
        if text.trim().is_empty() {
            return Err(BaselineError::Format("empty file".into()));
        }
        let raw: serde_json::Value =
            serde_json::from_str(text).map_err(|e| BaselineError::Format(e.to_string()))?;
        let found = raw
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| BaselineError::Format("missing format_version".into()))?;
        if found != u64::from(TABLE_FORMAT_VERSION) {
            return Err(BaselineError::Version {
                found: found.min(u64::from(u32::MAX)) as u32,
                expected: TABLE_FORMAT_VERSION,
            });
        }
        let file: TableFile =
            serde_json::from_value(raw).map_err(|e| BaselineError::Format(e.to_string()))?;
        let mut by_triplet = BTreeMap::new();
        for e in file.triplets {
            let key = Triplet::new(e.subject, e.predicate, e.object);
            if by_triplet.insert(key.clone(), e.stats).is_some() {
                return Err(BaselineError::Format(format!("duplicate triplet {key:?}")));
            }
        }
        let table = BaselineTable {
            by_triplet,
            by_predicate: file.predicates,
            global: file.global,
            ar_histogram: file.ar_histogram,
        };
        let zero_count = table
            .by_triplet
            .values()
            .chain(table.by_predicate.values())
            .chain(table.global.iter())
            .any(|s| s.count == 0);
        if zero_count {
            return Err(BaselineError::Format("statistics entry with count 0".into()));
        }
        Ok(table)
    }
}

#[derive(Serialize, Deserialize)]
struct TripletEntry {
    subject: String,
    predicate: String,
    object: String,
    stats: GeometryStats,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableFile {
    format_version: u32,
    triplets: Vec<TripletEntry>,
    predicates: BTreeMap<String, GeometryStats>,
    global: Option<GeometryStats>,
    ar_histogram: BTreeMap<u32, u64>,
}

pub fn train_baseline(pairs: &[(SfSequence, BacsSequence)]) -> Result<BaselineTable, BaselineError> {
    let mut table = BaselineTable::default();
    for (index, (sf, bacs)) in pairs.iter().enumerate() {
        if sf.len() != bacs.segments.len() {
            return Err(BaselineError::Alignment {
                index,
                sf_len: sf.len(),
                bacs_len: bacs.segments.len(),
            });
        }
        for (triplet, seg) in sf.triplets.iter().zip(&bacs.segments) {
            let obs = Observation::from_segment(seg);
            table.by_triplet.entry(triplet.clone()).or_default().observe(&obs);
            table
                .by_predicate
                .entry(triplet.predicate.clone())
                .or_default()
                .observe(&obs);
            table.global.get_or_insert_with(Default::default).observe(&obs);
        }
        if let Some(ar) = bacs.imgar {
            *table.ar_histogram.entry(ar).or_default() += 1;
        }
    }
    Ok(table)
}

/// Predicts a relative-mode BACS sequence for `sf`.
pub fn predict_baseline(
    sf: &SfSequence,
    table: &BaselineTable,
    include_imgar: bool,
    grid_max: u32,
) -> Result<BacsSequence, BaselineError> {
    if table.global.is_none() {
        return Err(BaselineError::Untrained);
    }
    let imgar = if include_imgar {
        Some(table.modal_ar_index().ok_or(BaselineError::NoAspectRatio)?)
    } else {
        None
    };
    let segments = sf
        .triplets
        .iter()
        .map(|t| {
            table
                .lookup(t)
                .map(|stats| stats.segment(t, grid_max))
                .ok_or(BaselineError::Untrained)
        })
        .collect::<Result<_, _>>()?;
    Ok(BacsSequence { imgar, segments })
}

pub fn save_table(table: &BaselineTable, path: &Path) -> Result<(), BaselineError> {
    fs::write(path, table.to_json())?;
    Ok(())
}

pub fn load_table(path: &Path) -> Result<BaselineTable, BaselineError> {
    BaselineTable::from_json(&fs::read_to_string(path)?)
}
