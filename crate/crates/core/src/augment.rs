//! Training-pair augmentation by relationship subsetting and reordering.
//!
//! Any non-empty subset of a graph's relationships, in any order, is still a
//! valid (SF, BACS) correspondence. Variant 0 is always the full graph in its
//! original order; further variants are drawn as: subset size uniform in
//! `[1, K]`, a uniform subset of that size, then a uniform permutation.
//! Duplicates are rejected. When the number of distinct ordered subsets does
//! not exceed the cap, all of them are emitted in enumeration order instead.

use std::collections::HashSet;

use itertools::Itertools;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bacs::{encode_bacs, quantize_layout, BacsSequence, CodecConfig};
use crate::graph::{preprocess_graph, GraphError, GroundedSample};
use crate::pipeline::PipelineError;
use crate::sf::{encode_sf, NodeSequence, SfSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub max_variants: usize,
    pub max_relationships: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            max_variants: 50,
            max_relationships: 9,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_variants == 0 {
            return Err("max_variants must be at least 1".into());
        }
        if self.max_relationships == 0 {
            return Err("max_relationships must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    /// Indices into the sample's relationship list, in emitted order.
    pub order: Vec<usize>,
    pub sf: SfSequence,
    pub nodes: NodeSequence,
    pub bacs: BacsSequence,
}

/// FNV-1a; stable across platforms and toolchains.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Per-sample random stream: the run seed mixed with the sample id.
pub fn sample_rng(seed: u64, sample_id: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a(sample_id.as_bytes()))
}

/// Number of distinct non-empty ordered subsets of `k` items, saturating.
pub fn ordered_subset_count(k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut falling: u128 = 1;
    for s in 0..k {
        falling = falling.saturating_mul((k - s) as u128);
        total = total.saturating_add(falling);
    }
    total
}

fn all_orders(k: usize) -> Vec<Vec<usize>> {
    let identity: Vec<usize> = (0..k).collect();
    let mut out = vec![identity.clone()];
    for size in 1..=k {
        out.extend((0..k).permutations(size).filter(|p| *p != identity));
    }
    out
}

fn sampled_orders(k: usize, target: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let identity: Vec<usize> = (0..k).collect();
    let mut seen: HashSet<Vec<usize>> = HashSet::from([identity.clone()]);
    let mut out = vec![identity];
    while out.len() < target {
        let size = rng.gen_range(1..=k);
        let mut order = index::sample(rng, k, size).into_vec();
        order.sort_unstable();
        order.shuffle(rng);
        if seen.insert(order.clone()) {
            out.push(order);
        }
    }
    out
}

/// Relationship orders to emit for a graph with `k` relationships.
pub fn variant_orders(k: usize, config: &AugmentConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    if k == 0 {
        return Vec::new();
    }
    let total = ordered_subset_count(k);
    if total <= config.max_variants as u128 {
        all_orders(k)
    } else {
        sampled_orders(k, config.max_variants, rng)
    }
}

/// Expands one grounded sample into up to `max_variants` aligned
/// (SF, nodes, BACS) triples.
pub fn augment_sample(
    sample: &GroundedSample,
    config: &AugmentConfig,
    codec: &CodecConfig,
) -> Result<Vec<Variant>, PipelineError> {
    let mut sample = preprocess_graph(sample)?;
    sample.graph.relationships.truncate(config.max_relationships);
    let sample = preprocess_graph(&sample)?;
    let k = sample.graph.relationships.len();
    if k == 0 {
        return Err(GraphError::EmptyGraph(sample.sample_id).into());
    }
    let layout = quantize_layout(&sample.graph, &sample.layout, codec.grid_max, &codec.ar)?;
    let mut rng = sample_rng(config.seed, &sample.sample_id);
    variant_orders(k, config, &mut rng)
        .into_iter()
        .map(|order| {
            let graph = sample.graph.select_relationships(&order);
            let (sf, nodes) = encode_sf(&graph)?;
            let bacs = encode_bacs(&layout, &nodes, codec.mode, codec.include_imgar)?;
            Ok(Variant {
                order,
                sf,
                nodes,
                bacs,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_counts() {
        assert_eq!(ordered_subset_count(1), 1);
        assert_eq!(ordered_subset_count(2), 4);
        assert_eq!(ordered_subset_count(3), 15);
        assert_eq!(ordered_subset_count(9), 986_409);
    }

    #[test]
    fn small_graphs_enumerate_everything() {
        let mut rng = sample_rng(0, "x");
        let config = AugmentConfig::default();
        assert_eq!(variant_orders(1, &config, &mut rng), vec![vec![0]]);
        assert_eq!(
            variant_orders(2, &config, &mut rng),
            vec![vec![0, 1], vec![0], vec![1], vec![1, 0]]
        );
        assert_eq!(variant_orders(3, &config, &mut rng).len(), 15);
    }

    #[test]
    fn large_graphs_hit_the_cap() {
        let config = AugmentConfig::default();
        let orders = variant_orders(9, &config, &mut sample_rng(7, "img"));
        assert_eq!(orders.len(), 50);
        assert_eq!(orders[0], (0..9).collect::<Vec<_>>());
        let distinct: HashSet<_> = orders.iter().collect();
        assert_eq!(distinct.len(), 50);
        for o in &orders {
            let unique: HashSet<_> = o.iter().collect();
            assert_eq!(unique.len(), o.len());
            assert!(o.iter().all(|&i| i < 9));
        }
        let again = variant_orders(9, &config, &mut sample_rng(7, "img"));
        assert_eq!(orders, again);
    }

    #[test]
    fn seed_changes_stream() {
        let config = AugmentConfig::default();
        let a = variant_orders(6, &config, &mut sample_rng(1, "img"));
        let b = variant_orders(6, &config, &mut sample_rng(2, "img"));
        assert_eq!(a[0], b[0]);
        assert_ne!(a, b);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
