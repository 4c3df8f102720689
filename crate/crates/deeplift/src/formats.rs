//! Tab-separated and FASTA-like text formats.
//!
//! Every writer emits one header row of column names; lines starting with `#`
//! carry run metadata and are skipped by the readers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use deeplift_core::baselines::EquivalenceReport;
use deeplift_core::deeplift::ContributionReport;
use deeplift_core::genomics::{Comparison, ExampleScores, Motif, MotifSpan, SequenceExample};
use deeplift_core::train::EpochStats;
use deeplift_core::{Graph, Inputs, Tensor};

use crate::error::{read_to_string, Error, Result};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// A named input sample.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSample {
    pub id: String,
    pub inputs: Inputs,
}

/// Header `sample_id<TAB>node:index...`; one row per sample. Columns may name
/// several input nodes; each node must be covered completely.
pub fn parse_vectors(text: &str, graph: &Graph, origin: &Path) -> Result<Vec<VectorSample>> {
    let mut lines = data_lines(text);
    let (hline, header) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "no header row"))?;
    let mut cols = header.split('\t');
    if cols.next() != Some("sample_id") {
        return Err(Error::parse(origin, hline, "first column must be sample_id"));
    }
    let mut layout: Vec<(String, usize)> = Vec::new();
    for c in cols {
        let (node, index) = c
            .rsplit_once(':')
            .and_then(|(n, i)| Some((n.to_string(), i.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::parse(origin, hline, format!("column {c:?} is not node:index")))?;
        layout.push((node, index));
    }
    let mut shapes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (node, _) in &layout {
        let spec = graph
            .node(node)
            .filter(|n| n.inputs.is_empty())
            .ok_or_else(|| Error::parse(origin, hline, format!("{node} is not an input node of the model")))?;
        shapes.insert(node.clone(), spec.output_shape.clone());
    }
    for (node, shape) in &shapes {
        let len: usize = shape.iter().product();
        let mut seen = vec![false; len];
        for (n, i) in &layout {
            if n == node && (*i >= len || std::mem::replace(&mut seen[*i], true)) {
                return Err(Error::parse(origin, hline, format!("bad or repeated column {node}:{i}")));
            }
        }
        if seen.contains(&false) {
            return Err(Error::parse(origin, hline, format!("columns do not cover all of {node}")));
        }
    }
    lines
        .map(|(ln, line)| {
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_string();
            let values: Vec<&str> = fields.collect();
            if values.len() != layout.len() {
                return Err(Error::parse(
                    origin,
                    ln,
                    format!("expected {} values, found {}", layout.len(), values.len()),
                ));
            }
            let mut buffers: BTreeMap<&str, Vec<f64>> = shapes
                .iter()
                .map(|(n, s)| (n.as_str(), vec![0.0; s.iter().product()]))
                .collect();
            for ((node, index), raw) in layout.iter().zip(values) {
                let v: f64 = raw
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(origin, ln, format!("{raw:?} is not a number")))?;
                buffers.get_mut(node.as_str()).expect("known node")[*index] = v;
            }
            let inputs = buffers
                .into_iter()
                .map(|(n, v)| {
                    let t = Tensor::new(shapes[n].clone(), v).map_err(|e| Error::parse(origin, ln, e.to_string()))?;
                    Ok((n.to_string(), t))
                })
                .collect::<Result<Inputs>>()?;
            Ok(VectorSample { id, inputs })
        })
        .collect()
}

pub fn read_vectors(path: &Path, graph: &Graph) -> Result<Vec<VectorSample>> {
    parse_vectors(&read_to_string(path)?, graph, path)
}

pub fn format_vectors(samples: &[VectorSample]) -> String {
    let mut out = String::from("sample_id");
    if let Some(first) = samples.first() {
        for (node, t) in &first.inputs {
            for i in 0..t.len() {
                write!(out, "\t{node}:{i}").unwrap();
            }
        }
    }
    out.push('\n');
    for s in samples {
        out.push_str(&s.id);
        for t in s.inputs.values() {
            for v in t.values() {
                write!(out, "\t{v}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

fn format_spans(spans: &[MotifSpan]) -> String {
    spans
        .iter()
        .map(|s| format!("{}-{}:{}", s.start, s.end, s.motif))
        .collect::<Vec<_>>()
        .join(",")
}

/// `>id label=1 spans=12-16:GATA,90-96:CAGATG` followed by the sequence on one line.
pub fn format_dataset(examples: &[SequenceExample]) -> String {
    let mut out = String::new();
    for e in examples {
        writeln!(
            out,
            ">{} label={} spans={}\n{}",
            e.id,
            e.label(),
            format_spans(&e.spans),
            e.sequence
        )
        .unwrap();
    }
    out
}

fn parse_header(header: &str, origin: &Path, ln: usize) -> Result<SequenceExample> {
    let bad = |m: String| Error::parse(origin, ln, m);
    let mut parts = header.split_whitespace();
    let id = parts.next().ok_or_else(|| bad("header without id".into()))?.to_string();
    let mut positive = None;
    let mut spans = Vec::new();
    for field in parts {
        match field.split_once('=') {
            Some(("label", "1")) => positive = Some(true),
            Some(("label", "0")) => positive = Some(false),
            Some(("spans", list)) => {
                for item in list.split(',').filter(|s| !s.is_empty()) {
                    let parsed = item.split_once(':').and_then(|(range, name)| {
                        let (a, b) = range.split_once('-')?;
                        Some(MotifSpan {
                            start: a.parse().ok()?,
                            end: b.parse().ok()?,
                            motif: Motif::parse(name)?,
                        })
                    });
                    spans.push(parsed.ok_or_else(|| bad(format!("bad span {item:?}")))?);
                }
            }
            _ => return Err(bad(format!("unrecognized header field {field:?}"))),
        }
    }
    spans.sort();
    Ok(SequenceExample {
        id,
        sequence: String::new(),
        positive: positive.ok_or_else(|| bad("header lacks label=0 or label=1".into()))?,
        spans,
    })
}

/// Reads [`format_dataset`] output; sequence lines may be wrapped.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<Vec<SequenceExample>> {
    let mut out: Vec<(usize, SequenceExample)> = Vec::new();
    for (ln, line) in data_lines(text) {
        if let Some(header) = line.strip_prefix('>') {
            out.push((ln, parse_header(header, origin, ln)?));
        } else {
            let (_, current) = out
                .last_mut()
                .ok_or_else(|| Error::parse(origin, ln, "sequence before the first header"))?;
            current.sequence.push_str(line.trim());
        }
    }
    out.into_iter()
        .map(|(ln, e)| {
            e.validate().map_err(|err| Error::parse(origin, ln, err.to_string()))?;
            Ok(e)
        })
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<SequenceExample>> {
    parse_dataset(&read_to_string(path)?, path)
}

/// Per-feature rows of several attribution reports.
///
/// `labels` names a feature from its node id and flat index.
pub fn format_attributions(method: &str, rows: &[(String, ContributionReport)], labels: &dyn Fn(&str, usize) -> String) -> String {
    let mut out = String::new();
    if let Some((_, first)) = rows.first() {
        writeln!(out, "# method={method} target={}", first.target).unwrap();
    }
    let worst = rows.iter().map(|(_, r)| r.residual).fold(0.0, f64::max);
    writeln!(out, "# samples={} max_residual={worst}", rows.len()).unwrap();
    out.push_str("sample_id\tfeature_index\tfeature_label\tdelta\tmultiplier\tcontribution\ttarget_delta\tresidual\n");
    for (id, r) in rows {
        for (k, f) in r.features.iter().enumerate() {
            writeln!(
                out,
                "{id}\t{k}\t{}\t{}\t{}\t{}\t{}\t{}",
                labels(&f.node, f.index),
                f.delta,
                f.multiplier,
                f.contribution,
                r.target_delta,
                r.residual
            )
            .unwrap();
        }
    }
    out
}

/// Plot-ready per-position tracks of the present base.
pub fn format_score_tracks(tracks: &[ExampleScores]) -> String {
    let mut out = String::from("sample_id\tposition\tbase\tdeeplift\tgrad_input\n");
    for t in tracks {
        for (p, base) in t.sequence.chars().enumerate() {
            writeln!(out, "{}\t{p}\t{base}\t{}\t{}", t.id, t.deeplift[p], t.grad_input[p]).unwrap();
        }
    }
    out
}

pub fn format_loss_curve(curve: &[EpochStats], kept_epoch: usize) -> String {
    let mut out = format!("# kept_epoch={kept_epoch}\nepoch\ttrain_loss\tval_loss\tval_auroc\n");
    for e in curve {
        writeln!(out, "{}\t{}\t{}\t{}", e.epoch, e.train_loss, opt(e.val_loss), opt(e.val_auroc)).unwrap();
    }
    out
}

/// One row per net; one column of maximum relative deviation per ε.
pub fn format_equivalence(report: &EquivalenceReport) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# nets={} resampled={} monotone_fraction={}",
        report.nets(),
        report.resampled,
        report.monotone_fraction()
    )
    .unwrap();
    out.push_str("net_id");
    for e in &report.epsilons {
        write!(out, "\teps={e:e}").unwrap();
    }
    out.push('\n');
    for chunk in report.rows.chunks(report.epsilons.len().max(1)) {
        write!(out, "{}", chunk[0].net_id).unwrap();
        for row in chunk {
            write!(out, "\t{}", row.max_rel_dev).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "# evaluated={} selected={} mean_deeplift={} mean_grad_input={} win_rate={} gata_gap={} cagatg_gap={} residuals_ok={} max_prediction_shift={}",
        c.evaluated, c.selected, c.mean_deeplift, c.mean_grad_input, c.win_rate, c.gata_gap, c.cagatg_gap, c.residuals_ok, c.max_prediction_shift
    )
    .unwrap();
    out.push_str("sample_id\tlabel\tprobability\tselected\tdeeplift\tgrad_input\tdeeplift_gata\tgrad_input_gata\tdeeplift_cagatg\tgrad_input_cagatg\tspan_coverage\ttarget_delta\tresidual\n");
    for r in &c.rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            u8::from(r.positive),
            r.probability,
            u8::from(r.selected),
            r.deeplift,
            r.grad_input,
            r.deeplift_by_motif[0],
            r.grad_input_by_motif[0],
            r.deeplift_by_motif[1],
            r.grad_input_by_motif[1],
            r.coverage,
            r.target_delta,
            r.residual
        )
        .unwrap();
    }
    out
}
