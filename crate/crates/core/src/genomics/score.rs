use alloc::string::String;
use alloc::vec::Vec;

use super::data::{one_hot_encode, Motif, MotifSpan, SequenceExample, ALPHABET};
use super::model::INPUT_NODE;
use crate::baselines::gradient_times_input;
use crate::deeplift::{
    attribute, normalize_constrained_weights, select_attribution_target, zeros_reference, AttributionRequest,
    ContributionReport, DeepLiftConfig, Method, TargetSelection,
};
use crate::error::{Error, Result};
use crate::forward::{forward_single, Inputs};
use crate::graph::Graph;

/// Contribution of the base actually present at each position.
pub fn position_scores(contributions: &[f64], sequence: &str) -> Result<Vec<f64>> {
    if contributions.len() != sequence.len() * 4 {
        return Err(Error::Dataset(alloc::format!(
            "{} contributions for a length-{} sequence",
            contributions.len(),
            sequence.len()
        )));
    }
    sequence
        .bytes()
        .enumerate()
        .map(|(p, b)| {
            let col = ALPHABET.iter().position(|&a| a == b).ok_or(Error::InvalidBase {
                position: p,
                found: b as char,
            })?;
            Ok(contributions[4 * p + col])
        })
        .collect()
}

/// Share of positive score mass inside the selected spans; 0 without positive mass.
fn recovery(scores: &[f64], spans: &[MotifSpan], only: Option<Motif>) -> f64 {
    let mut inside = 0.0;
    let mut total = 0.0;
    for (p, &s) in scores.iter().enumerate() {
        if s > 0.0 {
            total += s;
            if spans.iter().any(|sp| only.is_none_or(|m| sp.motif == m) && sp.contains(p)) {
                inside += s;
            }
        }
    }
    if total > 0.0 {
        inside / total
    } else {
        0.0
    }
}

/// Fraction of positive per-position score that falls inside the example's motif spans.
pub fn motif_recovery_score(report: &ContributionReport, example: &SequenceExample) -> Result<f64> {
    let scores = position_scores(&report.contributions_of(INPUT_NODE), &example.sequence)?;
    Ok(recovery(&scores, &example.spans, None))
}

/// Fraction of positions covered by spans, the expected recovery of an uninformative score.
pub fn span_coverage(example: &SequenceExample) -> f64 {
    let covered: usize = example.spans.iter().map(|s| s.end - s.start).sum();
    covered as f64 / example.sequence.len().max(1) as f64
}

/// Per-position tracks for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleScores {
    pub id: String,
    pub sequence: String,
    pub deeplift: Vec<f64>,
    pub grad_input: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub id: String,
    pub positive: bool,
    pub probability: f64,
    /// Correctly classified positive.
    pub selected: bool,
    pub deeplift: f64,
    pub grad_input: f64,
    /// Recovery restricted to GATA spans, then to CAGATG spans.
    pub deeplift_by_motif: [f64; 2],
    pub grad_input_by_motif: [f64; 2],
    pub target_delta: f64,
    pub residual: f64,
    /// `|p_normalized − p_original|`.
    pub prediction_shift: f64,
    pub coverage: f64,
}

impl ComparisonRow {
    pub fn residual_ok(&self) -> bool {
        self.residual <= 1e-9_f64.max(1e-6 * libm::fabs(self.target_delta))
    }
}

/// Scores one example: DeepLIFT on `normalized` against the all-zeros
/// reference, gradient×input on `original`, both at the sigmoid's
/// pre-activation.
pub fn evaluate_example(
    original: &Graph,
    normalized: &Graph,
    example: &SequenceExample,
) -> Result<(ComparisonRow, ExampleScores)> {
    let x = one_hot_encode(&example.sequence)?;
    let p = forward_single(original, &x)?.output().values()[0];
    let p_norm = forward_single(normalized, &x)?.output().values()[0];
    let mut input = Inputs::new();
    input.insert(INPUT_NODE.into(), x);
    let dl = attribute(
        normalized,
        &AttributionRequest {
            input: input.clone(),
            reference: zeros_reference(normalized),
            target: TargetSelection::default(),
            method: Method::DeepLift,
        },
        &DeepLiftConfig::default(),
    )?;
    let target = select_attribution_target(original, &TargetSelection::default())?.target;
    let gi = gradient_times_input(original, &input, None, &target)?;
    let dl_scores = position_scores(&dl.contributions_of(INPUT_NODE), &example.sequence)?;
    let gi_scores = position_scores(&gi.contributions_of(INPUT_NODE), &example.sequence)?;
    let by_motif = |s: &[f64]| Motif::ALL.map(|m| recovery(s, &example.spans, Some(m)));
    let row = ComparisonRow {
        id: example.id.clone(),
        positive: example.positive,
        probability: p,
        selected: example.positive && p > 0.5,
        deeplift: recovery(&dl_scores, &example.spans, None),
        grad_input: recovery(&gi_scores, &example.spans, None),
        deeplift_by_motif: by_motif(&dl_scores),
        grad_input_by_motif: by_motif(&gi_scores),
        target_delta: dl.target_delta,
        residual: dl.residual,
        prediction_shift: libm::fabs(p_norm - p),
        coverage: span_coverage(example),
    };
    let scores = ExampleScores {
        id: example.id.clone(),
        sequence: example.sequence.clone(),
        deeplift: dl_scores,
        grad_input: gi_scores,
    };
    Ok((row, scores))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub evaluated: usize,
    pub selected: usize,
    /// Means over selected rows.
    pub mean_deeplift: f64,
    pub mean_grad_input: f64,
    /// Share of selected rows with DeepLIFT recovery ≥ gradient×input recovery.
    pub win_rate: f64,
    /// Mean DeepLIFT minus mean gradient×input recovery, per motif type.
    pub gata_gap: f64,
    pub cagatg_gap: f64,
    pub residuals_ok: bool,
    pub max_residual: f64,
    pub max_prediction_shift: f64,
    pub rows: Vec<ComparisonRow>,
}

pub fn summarize(rows: Vec<ComparisonRow>) -> Comparison {
    let sel: Vec<&ComparisonRow> = rows.iter().filter(|r| r.selected).collect();
    let n = sel.len().max(1) as f64;
    let mean = |f: &dyn Fn(&ComparisonRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / n;
    let gap = |k: usize| mean(&|r| r.deeplift_by_motif[k]) - mean(&|r| r.grad_input_by_motif[k]);
    Comparison {
        evaluated: rows.len(),
        selected: sel.len(),
        mean_deeplift: mean(&|r| r.deeplift),
        mean_grad_input: mean(&|r| r.grad_input),
        win_rate: sel.iter().filter(|r| r.deeplift >= r.grad_input).count() as f64 / n,
        gata_gap: gap(0),
        cagatg_gap: gap(1),
        residuals_ok: rows.iter().all(ComparisonRow::residual_ok),
        max_residual: rows.iter().map(|r| r.residual).fold(0.0, f64::max),
        max_prediction_shift: rows.iter().map(|r| r.prediction_shift).fold(0.0, f64::max),
        rows,
    }
}

/// Sequential comparison over `examples`; see [`evaluate_example`].
pub fn compare_methods(trained: &Graph, examples: &[SequenceExample]) -> Result<Comparison> {
    let normalized = normalize_constrained_weights(trained)?;
    let rows = examples
        .iter()
        .map(|e| evaluate_example(trained, &normalized, e).map(|(r, _)| r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(rows))
}
