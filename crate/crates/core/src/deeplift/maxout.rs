//! Maxout rule: split the straight path from the reference input to the sample
//! into stretches where a single affine piece dominates, then average the
//! pieces' weights by the length of their stretch.

use alloc::vec;
use alloc::vec::Vec;

use crate::ops;
use crate::tensor::Tensor;

/// Crossings closer than this (in path parameter `t`) are merged.
pub const CROSSING_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub piece: usize,
    pub start: f64,
    pub end: f64,
}

impl Segment {
    /// Fraction `l(s)` of the path covered by this segment.
    pub fn fraction(&self) -> f64 {
        self.end - self.start
    }
}

/// Ordered segments tiling `t ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDecomposition {
    pub segments: Vec<Segment>,
}

impl SegmentDecomposition {
    pub fn fractions(&self) -> Vec<f64> {
        self.segments.iter().map(Segment::fraction).collect()
    }

    /// Dominating piece at path position `t`.
    pub fn piece_at(&self, t: f64) -> usize {
        self.segments
            .iter()
            .find(|s| t <= s.end)
            .unwrap_or_else(|| self.segments.last().expect("non-empty"))
            .piece
    }
}

/// Upper envelope of the lines `intercepts[i] + t·slopes[i]` over `t ∈ [0, 1]`.
///
/// Ties at a start or crossing point go to the larger slope (the piece that
/// dominates immediately afterwards), then to the lower index.
pub fn upper_envelope(intercepts: &[f64], slopes: &[f64]) -> SegmentDecomposition {
    assert!(!intercepts.is_empty() && intercepts.len() == slopes.len());
    let value = |i: usize, t: f64| intercepts[i] + t * slopes[i];
    let scale = |t: f64| {
        intercepts
            .iter()
            .zip(slopes)
            .map(|(a, s)| libm::fabs(a + t * s))
            .fold(1.0, f64::max)
    };
    let top_at = |t: f64| {
        let best = (0..intercepts.len())
            .map(|i| value(i, t))
            .fold(f64::NEG_INFINITY, f64::max);
        let tol = 1e-12 * scale(t);
        let mut pick = None::<usize>;
        for i in 0..intercepts.len() {
            if value(i, t) >= best - tol && pick.is_none_or(|p| slopes[i] > slopes[p]) {
                pick = Some(i);
            }
        }
        pick.expect("non-empty")
    };

    let mut segments = Vec::new();
    let mut current = top_at(0.0);
    let mut start = 0.0;
    loop {
        let mut next: Option<(f64, usize)> = None;
        for i in 0..intercepts.len() {
            if slopes[i] <= slopes[current] {
                continue;
            }
            let t = ((intercepts[current] - intercepts[i]) / (slopes[i] - slopes[current])).max(start);
            next = match next {
                Some((tn, pn)) if t > tn + CROSSING_TOLERANCE => Some((tn, pn)),
                Some((tn, pn)) if t >= tn - CROSSING_TOLERANCE => {
                    if slopes[i] > slopes[pn] {
                        Some((tn.min(t), i))
                    } else {
                        Some((tn.min(t), pn))
                    }
                }
                _ => Some((t, i)),
            };
        }
        match next {
            Some((t, piece)) if t < 1.0 - CROSSING_TOLERANCE => {
                if t - start > CROSSING_TOLERANCE {
                    segments.push(Segment {
                        piece: current,
                        start,
                        end: t,
                    });
                    start = t;
                }
                current = piece;
            }
            _ => {
                segments.push(Segment {
                    piece: current,
                    start,
                    end: 1.0,
                });
                break;
            }
        }
    }
    SegmentDecomposition { segments }
}

/// Segments of maxout output unit `unit` along `x_ref + t·(x − x_ref)`.
pub fn maxout_segments(weights: &Tensor, bias: &Tensor, unit: usize, x_ref: &[f64], x: &[f64]) -> SegmentDecomposition {
    let pieces = weights.shape()[0];
    let rows = weights.shape()[1];
    let mut intercepts = vec![0.0; pieces];
    let mut slopes = vec![0.0; pieces];
    for p in 0..pieces {
        let row = ops::maxout_row(weights, p, unit);
        intercepts[p] = row.iter().zip(x_ref).map(|(w, v)| w * v).sum::<f64>() + bias.values()[p * rows + unit];
        slopes[p] = row
            .iter()
            .zip(x.iter().zip(x_ref))
            .map(|(w, (a, r))| w * (a - r))
            .sum();
    }
    upper_envelope(&intercepts, &slopes)
}

/// `m_x = Σ_s l(s)·w(s)_x` for maxout unit `unit`.
pub fn maxout_multipliers(weights: &Tensor, unit: usize, decomposition: &SegmentDecomposition) -> Vec<f64> {
    let cols = weights.shape()[2];
    let mut m = vec![0.0; cols];
    for s in &decomposition.segments {
        let l = s.fraction();
        for (acc, w) in m.iter_mut().zip(ops::maxout_row(weights, s.piece, unit)) {
            *acc += l * w;
        }
    }
    m
}
