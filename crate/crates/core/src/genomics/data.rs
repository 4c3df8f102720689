use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::ConstraintGroup;
use crate::tensor::Tensor;

/// One-hot column order.
pub const ALPHABET: [u8; 4] = *b"ACGT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Motif {
    Gata,
    Cagatg,
}

impl Motif {
    pub const ALL: [Motif; 2] = [Motif::Gata, Motif::Cagatg];

    pub fn consensus(self) -> &'static str {
        match self {
            Motif::Gata => "GATA",
            Motif::Cagatg => "CAGATG",
        }
    }

    pub fn parse(name: &str) -> Option<Motif> {
        Motif::ALL.into_iter().find(|m| m.consensus() == name)
    }
}

impl fmt::Display for Motif {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.consensus())
    }
}

/// Half-open interval `[start, end)` holding a planted motif instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotifSpan {
    pub start: usize,
    pub end: usize,
    pub motif: Motif,
}

impl MotifSpan {
    pub fn contains(&self, position: usize) -> bool {
        (self.start..self.end).contains(&position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SequenceExample {
    pub id: String,
    pub sequence: String,
    pub positive: bool,
    /// Sorted by start.
    pub spans: Vec<MotifSpan>,
}

impl SequenceExample {
    pub fn label(&self) -> usize {
        usize::from(self.positive)
    }

    /// Checks alphabet, span bounds, overlap and the per-class motif counts.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Dataset(format!("{}: {m}", self.id)));
        if let Some((position, found)) = self
            .sequence
            .chars()
            .enumerate()
            .find(|(_, c)| !c.is_ascii() || !ALPHABET.contains(&(*c as u8)))
        {
            return Err(Error::InvalidBase { position, found });
        }
        let len = self.sequence.len();
        for (k, s) in self.spans.iter().enumerate() {
            if s.start >= s.end || s.end > len {
                return bad(format!("span {}-{} outside [0, {len})", s.start, s.end));
            }
            if s.end - s.start != s.motif.consensus().len() {
                return bad(format!("span {}-{} does not fit {}", s.start, s.end, s.motif));
            }
            if k > 0 && self.spans[k - 1].end > s.start {
                return bad(format!("span {}-{} overlaps its predecessor", s.start, s.end));
            }
        }
        let count = |m: Motif| self.spans.iter().filter(|s| s.motif == m).count();
        let (g, c) = (count(Motif::Gata), count(Motif::Cagatg));
        let ok = if self.positive {
            g >= 1 && c >= 1
        } else {
            (g == 0) != (c == 0) && (1..=2).contains(&(g + c))
        };
        if !ok {
            return bad(format!("motif counts GATA={g} CAGATG={c} do not fit the label"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn stream(self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
            Split::Test => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct DatasetSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub length: usize,
    pub seed: u64,
    /// Probability that a planted motif base is replaced by one of the other three.
    pub substitution_rate: f64,
    /// Mutate background bases until the consensus strings occur only inside
    /// planted spans.
    pub purge_background: bool,
    /// Inclusive range of instances per planted motif type.
    pub min_instances: usize,
    pub max_instances: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            n_train: 4000,
            n_val: 500,
            n_test: 500,
            length: 200,
            seed: 7,
            substitution_rate: 0.0,
            purge_background: true,
            min_instances: 1,
            max_instances: 2,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        for (name, n) in [("n_train", self.n_train), ("n_val", self.n_val), ("n_test", self.n_test)] {
            if n % 2 == 1 {
                return bad(format!("{name} = {n} cannot be split 50/50"));
            }
        }
        if !(0.0..=1.0).contains(&self.substitution_rate) {
            return bad(format!("substitution rate {} outside [0, 1]", self.substitution_rate));
        }
        if self.min_instances == 0 || self.min_instances > self.max_instances {
            return bad(format!(
                "instance range {}..={} is empty or starts at 0",
                self.min_instances, self.max_instances
            ));
        }
        let need: usize = Motif::ALL.iter().map(|m| m.consensus().len()).sum::<usize>() * self.max_instances;
        if self.length < need {
            return bad(format!(
                "length {} is too small to place {need} motif bases",
                self.length
            ));
        }
        Ok(())
    }

    pub fn count(&self, split: Split) -> usize {
        match split {
            Split::Train => self.n_train,
            Split::Val => self.n_val,
            Split::Test => self.n_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub train: Vec<SequenceExample>,
    pub val: Vec<SequenceExample>,
    pub test: Vec<SequenceExample>,
}

impl Dataset {
    pub fn split(&self, split: Split) -> &[SequenceExample] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    Ok(Dataset {
        train: generate_split(spec, Split::Train)?,
        val: generate_split(spec, Split::Val)?,
        test: generate_split(spec, Split::Test)?,
    })
}

/// Even indices are positives, odd indices negatives. Each split draws from
/// its own ChaCha stream of `spec.seed`.
pub fn generate_split(spec: &DatasetSpec, split: Split) -> Result<Vec<SequenceExample>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(split.stream());
    (0..spec.count(split))
        .map(|i| {
            let id = format!("{}_{i:04}", split.name());
            generate_example(spec, &mut rng, id, i % 2 == 0)
        })
        .collect()
}

fn random_base(rng: &mut ChaCha8Rng) -> u8 {
    ALPHABET[rng.gen_range(0..4)]
}

fn generate_example(spec: &DatasetSpec, rng: &mut ChaCha8Rng, id: String, positive: bool) -> Result<SequenceExample> {
    let len = spec.length;
    let mut seq: Vec<u8> = (0..len).map(|_| random_base(rng)).collect();
    let instances = |rng: &mut ChaCha8Rng| rng.gen_range(spec.min_instances..=spec.max_instances);
    let mut motifs = Vec::new();
    if positive {
        for m in Motif::ALL {
            let k = instances(rng);
            motifs.extend(core::iter::repeat_n(m, k));
        }
    } else {
        let m = Motif::ALL[rng.gen_range(0..2)];
        let k = instances(rng);
        motifs.extend(core::iter::repeat_n(m, k));
    }
    let mut spans = place(rng, len, &motifs).ok_or_else(|| {
        Error::Dataset(format!("{id}: could not place {} motifs in length {len}", motifs.len()))
    })?;
    spans.sort();
    for s in &spans {
        for (k, &c) in s.motif.consensus().as_bytes().iter().enumerate() {
            seq[s.start + k] = if rng.gen_bool(spec.substitution_rate) {
                let others: Vec<u8> = ALPHABET.iter().copied().filter(|&b| b != c).collect();
                others[rng.gen_range(0..3)]
            } else {
                c
            };
        }
    }
    if spec.purge_background {
        purge(rng, &mut seq, &spans);
    }
    Ok(SequenceExample {
        id,
        sequence: String::from_utf8(seq).expect("ASCII bases"),
        positive,
        spans,
    })
}

/// Each motif in turn goes to a uniformly chosen start among those that keep
/// all spans disjoint; restarts if a layout dead-ends.
fn place(rng: &mut ChaCha8Rng, len: usize, motifs: &[Motif]) -> Option<Vec<MotifSpan>> {
    'attempt: for _ in 0..1000 {
        let mut spans: Vec<MotifSpan> = Vec::with_capacity(motifs.len());
        for &m in motifs {
            let w = m.consensus().len();
            let free: Vec<usize> = (0..=len - w)
                .filter(|&s| spans.iter().all(|o| s + w <= o.start || o.end <= s))
                .collect();
            if free.is_empty() {
                continue 'attempt;
            }
            let start = free[rng.gen_range(0..free.len())];
            spans.push(MotifSpan {
                start,
                end: start + w,
                motif: m,
            });
        }
        return Some(spans);
    }
    None
}

/// Resamples background bases of any consensus occurrence not contained in a
/// single planted span. Occurrences made only of planted bases are left alone.
fn purge(rng: &mut ChaCha8Rng, seq: &mut [u8], spans: &[MotifSpan]) {
    let planted = |p: usize| spans.iter().any(|s| s.contains(p));
    loop {
        let mut changed = false;
        for m in Motif::ALL {
            let pat = m.consensus().as_bytes();
            for start in 0..=seq.len().saturating_sub(pat.len()) {
                let end = start + pat.len();
                if &seq[start..end] != pat || spans.iter().any(|s| s.start <= start && end <= s.end) {
                    continue;
                }
                let free: Vec<usize> = (start..end).filter(|&p| !planted(p)).collect();
                if free.is_empty() {
                    continue;
                }
                let p = free[rng.gen_range(0..free.len())];
                seq[p] = random_base(rng);
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// `[L, 4]` indicator matrix with columns in `ALPHABET` order.
pub fn one_hot_encode(sequence: &str) -> Result<Tensor> {
    let mut values = alloc::vec![0.0; sequence.len() * 4];
    for (position, found) in sequence.chars().enumerate() {
        let col = ALPHABET
            .iter()
            .position(|&b| found.is_ascii() && b == found as u8)
            .ok_or(Error::InvalidBase { position, found })?;
        values[position * 4 + col] = 1.0;
    }
    Tensor::new(alloc::vec![sequence.len(), 4], values)
}

/// Inverse of [`one_hot_encode`]; rows must be exact indicator vectors.
pub fn decode_one_hot(encoded: &Tensor) -> Result<String> {
    if encoded.rank() != 2 || encoded.shape()[1] != 4 {
        return Err(Error::Dataset(format!("expected [L, 4], found {:?}", encoded.shape())));
    }
    encoded
        .values()
        .chunks_exact(4)
        .enumerate()
        .map(|(row, v)| {
            let hot: Vec<usize> = (0..4).filter(|&k| v[k] == 1.0).collect();
            if hot.len() != 1 || v.iter().filter(|&&x| x != 0.0).count() != 1 {
                return Err(Error::Dataset(format!("row {row} is not one-hot")));
            }
            Ok(ALPHABET[hot[0]] as char)
        })
        .collect()
}

/// One `Σ = 1` group per sequence position of `node`.
pub fn one_hot_constraint_groups(node: &str, length: usize) -> Vec<ConstraintGroup> {
    (0..length)
        .map(|p| ConstraintGroup {
            node: node.into(),
            indices: (4 * p..4 * p + 4).collect(),
            total: 1.0,
        })
        .collect()
}
