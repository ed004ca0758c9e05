use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use seqlayout::augment::augment_sample;
use seqlayout::bacs::{quantize_layout, BacsSequence, ObjectPosition, PositionMode};
use seqlayout::baseline::{load_table, predict_baseline, save_table, train_baseline};
use seqlayout::graph::{filter_corpus, parse_corpus, parse_split_manifest, write_corpus, GroundedSample};
use seqlayout::pipeline::{decode_prediction, encode_sample, score_layout, EncodedSample};
use seqlayout::sf::{parse_nodes, parse_sf, serialize_nodes, serialize_sf};
use seqlayout::sleu::mean_of;
use seqlayout::QuantizedLayout;

use crate::config::PipelineConfig;

fn read_corpus(path: &Path) -> Result<Vec<GroundedSample>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_corpus(&text).with_context(|| format!("corpus {}", path.display()))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(text.lines().map(str::to_owned).collect())
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => Ok(io::stdout().lock().write_all(text.as_bytes())?),
    }
}

fn same_length(a: (&Path, usize), b: (&Path, usize)) -> Result<()> {
    ensure!(
        a.1 == b.1,
        "{} has {} lines but {} has {}",
        a.0.display(),
        a.1,
        b.0.display(),
        b.1
    );
    Ok(())
}

pub fn ingest(cfg: &PipelineConfig, corpus: &Path, splits: &[String], out_dir: &Path) -> Result<bool> {
    let samples = read_corpus(corpus)?;
    let known: HashSet<&str> = samples.iter().map(|s| s.sample_id.as_str()).collect();
    let filtered = filter_corpus(&samples, &cfg.filter());
    let by_id: HashMap<&str, &GroundedSample> =
        filtered.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    println!("corpus: {} samples, {} kept after filtering", samples.len(), filtered.len());

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for spec in splits {
        let Some((name, manifest)) = spec.split_once('=') else {
            bail!("--split expects NAME=MANIFEST, got `{spec}`");
        };
        let manifest = Path::new(manifest);
        let ids = parse_split_manifest(
            &fs::read_to_string(manifest).with_context(|| format!("reading manifest {}", manifest.display()))?,
        );
        if let Some(bad) = ids.iter().find(|id| !known.contains(id.as_str())) {
            bail!("split {name}: manifest names unknown sample `{bad}`");
        }
        let kept: Vec<GroundedSample> = ids
            .iter()
            .filter_map(|id| by_id.get(id.as_str()).map(|s| (*s).clone()))
            .collect();
        let objects: usize = kept.iter().map(|s| s.graph.nodes.len()).sum();
        let relationships: usize = kept.iter().map(|s| s.graph.relationships.len()).sum();
        fs::write(out_dir.join(format!("{name}.json")), write_corpus(&kept))?;
        println!(
            "{name}: {} of {} samples, {objects} objects, {relationships} relationships",
            kept.len(),
            ids.len()
        );
    }
    Ok(true)
}

fn encode_all(cfg: &PipelineConfig, samples: &[GroundedSample]) -> Result<Vec<EncodedSample>> {
    let codec = cfg.codec();
    samples
        .par_iter()
        .map(|s| encode_sample(s, &codec).with_context(|| format!("sample `{}`", s.sample_id)))
        .collect()
}

struct Streams {
    sf: Vec<String>,
    nodes: Vec<String>,
    bacs: Vec<String>,
    ids: Vec<String>,
}

impl Streams {
    fn write(&self, prefix: &Path) -> Result<()> {
        if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        write_lines(&with_ext(prefix, "sf"), &self.sf)?;
        write_lines(&with_ext(prefix, "nodes"), &self.nodes)?;
        write_lines(&with_ext(prefix, "bacs"), &self.bacs)?;
        write_lines(&with_ext(prefix, "ids"), &self.ids)
    }
}

pub fn encode(cfg: &PipelineConfig, corpus: &Path, out: &Path) -> Result<bool> {
    let encoded = encode_all(cfg, &read_corpus(corpus)?)?;
    let streams = Streams {
        sf: encoded.iter().map(|e| serialize_sf(&e.sf)).collect(),
        nodes: encoded.iter().map(|e| serialize_nodes(&e.nodes)).collect(),
        bacs: encoded.iter().map(|e| e.bacs.to_string()).collect(),
        ids: encoded.iter().map(|e| e.sample_id.clone()).collect(),
    };
    streams.write(out)?;
    eprintln!("encoded {} samples", encoded.len());
    Ok(true)
}

pub fn augment(cfg: &PipelineConfig, corpus: &Path, out: &Path) -> Result<bool> {
    let samples = read_corpus(corpus)?;
    let (codec, aug) = (cfg.codec(), cfg.augment());
    let per_sample: Vec<_> = samples
        .par_iter()
        .map(|s| augment_sample(s, &aug, &codec).with_context(|| format!("sample `{}`", s.sample_id)))
        .collect::<Result<_>>()?;
    let mut streams = Streams { sf: vec![], nodes: vec![], bacs: vec![], ids: vec![] };
    for (s, variants) in samples.iter().zip(&per_sample) {
        for v in variants {
            streams.sf.push(serialize_sf(&v.sf));
            streams.nodes.push(serialize_nodes(&v.nodes));
            streams.bacs.push(v.bacs.to_string());
            streams.ids.push(s.sample_id.clone());
        }
    }
    streams.write(out)?;
    eprintln!("{} samples expanded to {} lines", samples.len(), streams.sf.len());
    Ok(true)
}

pub fn decode(
    cfg: &PipelineConfig,
    bacs: &Path,
    nodes: &Path,
    sf: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    let codec = cfg.codec();
    let bacs_lines = read_lines(bacs)?;
    let node_lines = read_lines(nodes)?;
    same_length((bacs, bacs_lines.len()), (nodes, node_lines.len()))?;
    let node_seqs = node_lines
        .iter()
        .enumerate()
        .map(|(i, l)| parse_nodes(l).with_context(|| format!("{} line {}", nodes.display(), i + 1)))
        .collect::<Result<Vec<_>>>()?;
    if let Some(sf) = sf {
        let sf_lines = read_lines(sf)?;
        same_length((sf, sf_lines.len()), (nodes, node_lines.len()))?;
        for (i, (l, n)) in sf_lines.iter().zip(&node_seqs).enumerate() {
            let seq = parse_sf(l).with_context(|| format!("{} line {}", sf.display(), i + 1))?;
            ensure!(
                seq.len() == n.len(),
                "line {}: {} triplets in the SF line but {} node pairs",
                i + 1,
                seq.len(),
                n.len()
            );
        }
    }

    let results: Vec<_> = bacs_lines
        .par_iter()
        .zip(&node_seqs)
        .map(|(line, n)| decode_prediction(line, n, &codec))
        .collect();
    let mut text = String::new();
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(layout) => text.push_str(&serde_json::to_string(layout)?),
            Err(e) => {
                eprintln!("line {}: cannot find perfect alignment: {e}", i + 1);
                failed += 1;
                text.push_str("null");
            }
        }
        text.push('\n');
    }
    write_output(out, &text)?;
    eprintln!(
        "decoded {} of {} lines, {failed} misaligned",
        results.len() - failed,
        results.len()
    );
    Ok(failed == 0)
}

#[derive(Serialize)]
struct SampleReport {
    id: String,
    sleu: f64,
    p: Vec<f64>,
    chosen_reference: Option<usize>,
    aligned: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct Report {
    t_iou: f64,
    max_order: usize,
    mean_sleu: f64,
    misaligned: usize,
    samples: Vec<SampleReport>,
}

fn load_predictions(
    cfg: &PipelineConfig,
    pred: &Path,
    encoded: &[EncodedSample],
) -> Result<Vec<Result<QuantizedLayout, String>>> {
    let lines = read_lines(pred)?;
    same_length((pred, lines.len()), (Path::new("the reference corpus"), encoded.len()))?;
    let codec = cfg.codec();
    if pred.extension().is_some_and(|e| e == "bacs") {
        return Ok(lines
            .par_iter()
            .zip(encoded)
            .map(|(l, e)| decode_prediction(l, &e.nodes, &codec).map_err(|err| err.to_string()))
            .collect());
    }
    lines
        .iter()
        .enumerate()
        .map(|(i, l)| match l.trim() {
            "null" => Ok(Err("undecodable prediction".to_owned())),
            text => serde_json::from_str(text)
                .map(Ok)
                .with_context(|| format!("{} line {}", pred.display(), i + 1)),
        })
        .collect()
}

fn extra_references(
    cfg: &PipelineConfig,
    path: &Path,
    encoded: &[EncodedSample],
) -> Result<Vec<QuantizedLayout>> {
    let corpus = read_corpus(path)?;
    let by_id: HashMap<&str, &GroundedSample> = corpus.iter().map(|s| (s.sample_id.as_str(), s)).collect();
    encoded
        .iter()
        .map(|e| {
            let s = by_id
                .get(e.sample_id.as_str())
                .with_context(|| format!("{}: no sample `{}`", path.display(), e.sample_id))?;
            quantize_layout(&e.graph, &s.layout, cfg.grid_max, &cfg.codec().ar)
                .with_context(|| format!("{}: sample `{}`", path.display(), e.sample_id))
        })
        .collect()
}

pub fn evaluate(
    cfg: &PipelineConfig,
    pred: &Path,
    references: &[PathBuf],
    ids: Option<&Path>,
    out: Option<&Path>,
) -> Result<bool> {
    let encoded = encode_all(cfg, &read_corpus(&references[0])?)?;
    let mut refs: Vec<Vec<QuantizedLayout>> = encoded.iter().map(|e| vec![e.layout.clone()]).collect();
    for path in &references[1..] {
        for (r, extra) in refs.iter_mut().zip(extra_references(cfg, path, &encoded)?) {
            r.push(extra);
        }
    }
    if let Some(ids) = ids {
        let listed = read_lines(ids)?;
        same_length((ids, listed.len()), (Path::new("the reference corpus"), encoded.len()))?;
        for (i, (got, e)) in listed.iter().zip(&encoded).enumerate() {
            ensure!(
                got.trim() == e.sample_id,
                "{} line {}: id `{}` does not match reference sample `{}`",
                ids.display(),
                i + 1,
                got.trim(),
                e.sample_id
            );
        }
    }
    let predictions = load_predictions(cfg, pred, &encoded)?;

    let mut reports = Vec::new();
    for sleu_cfg in cfg.sleu() {
        let samples: Vec<SampleReport> = encoded
            .par_iter()
            .zip(&predictions)
            .zip(&refs)
            .map(|((e, p), r)| {
                let scored = p
                    .as_ref()
                    .map_err(Clone::clone)
                    .and_then(|layout| score_layout(&e.graph, layout, r, &sleu_cfg).map_err(|err| err.to_string()));
                match scored {
                    Ok(res) => SampleReport {
                        id: e.sample_id.clone(),
                        sleu: res.score,
                        p: res.per_order,
                        chosen_reference: Some(res.chosen_reference),
                        aligned: true,
                        error: None,
                    },
                    Err(err) => SampleReport {
                        id: e.sample_id.clone(),
                        sleu: 0.0,
                        p: vec![],
                        chosen_reference: None,
                        aligned: false,
                        error: Some(err),
                    },
                }
            })
            .collect();
        let misaligned = samples.iter().filter(|s| !s.aligned).count();
        let mean_sleu = mean_of(samples.iter().map(|s| s.sleu));
        eprintln!(
            "t_iou {}: mean-SLEU {mean_sleu:.4} over {} samples, {misaligned} misaligned",
            sleu_cfg.t_iou,
            samples.len()
        );
        reports.push(Report {
            t_iou: sleu_cfg.t_iou,
            max_order: sleu_cfg.max_order,
            mean_sleu,
            misaligned,
            samples,
        });
    }
    let mut text = serde_json::to_string_pretty(&reports)?;
    text.push('\n');
    write_output(out, &text)?;
    Ok(true)
}

pub fn baseline_train(cfg: &PipelineConfig, sf: &Path, bacs: &Path, out: &Path) -> Result<bool> {
    let sf_lines = read_lines(sf)?;
    let bacs_lines = read_lines(bacs)?;
    same_length((sf, sf_lines.len()), (bacs, bacs_lines.len()))?;
    let pairs = sf_lines
        .par_iter()
        .zip(&bacs_lines)
        .enumerate()
        .map(|(i, (s, b))| {
            let s = parse_sf(s).with_context(|| format!("{} line {}", sf.display(), i + 1))?;
            let b = BacsSequence::parse(b, s.len(), cfg.mode, cfg.include_imgar)
                .with_context(|| format!("{} line {}", bacs.display(), i + 1))?;
            Ok((s, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = train_baseline(&pairs)?;
    save_table(&table, out).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "trained on {} pairs: {} triplet types, {} predicates",
        pairs.len(),
        table.by_triplet.len(),
        table.by_predicate.len()
    );
    Ok(true)
}

fn to_absolute(seq: &mut BacsSequence, grid_max: u32) {
    let top = i64::from(grid_max) - 1;
    for seg in &mut seq.segments {
        if let ObjectPosition::Relative { dx, dy } = seg.object_position {
            let b = seg.subject.grid_box;
            seg.object_position = ObjectPosition::Absolute {
                x: (i64::from(b.x) + dx).clamp(0, top) as u32,
                y: (i64::from(b.y) + dy).clamp(0, top) as u32,
            };
        }
    }
}

pub fn baseline_predict(cfg: &PipelineConfig, table: &Path, sf: &Path, out: &Path) -> Result<bool> {
    let table = load_table(table).with_context(|| format!("loading baseline table {}", table.display()))?;
    let lines = read_lines(sf)?;
    let predicted = lines
        .par_iter()
        .enumerate()
        .map(|(i, l)| {
            let s = parse_sf(l).with_context(|| format!("{} line {}", sf.display(), i + 1))?;
            let mut seq = predict_baseline(&s, &table, cfg.include_imgar, cfg.grid_max)
                .with_context(|| format!("{} line {}", sf.display(), i + 1))?;
            if cfg.mode == PositionMode::Absolute {
                to_absolute(&mut seq, cfg.grid_max);
            }
            Ok(seq.to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    write_lines(out, &predicted)?;
    eprintln!("predicted {} lines", predicted.len());
    Ok(true)
}
