//! Difference-from-reference attribution.
//!
//! Every node `n` has an activation `A_n` on the sample and `A⁰_n` on the
//! reference input; `δ_n = A_n − A⁰_n`. Multipliers `m_{xt}` satisfy
//! `C_{xt} = m_{xt}·δ_x` and compose backwards like a chain rule:
//! `m_{xt} = Σ_{y ∈ consumers(x)} m_{xy}·m_{yt}`. The per-layer rules in
//! [`rules`] and [`maxout`] are chosen so that each node's contributions sum to
//! its own `δ`, which makes the input-feature contributions sum to `δ_t`.

pub mod maxout;
pub mod normalize;
mod propagate;
mod request;
pub mod rules;
mod state;
mod target;

pub use maxout::{maxout_multipliers, maxout_segments, upper_envelope, Segment, SegmentDecomposition};
pub use normalize::{mean_normalize_softmax_weights, normalize_constrained_weights};
pub use propagate::{contributions, propagate_multipliers, ContributionReport, FeatureScore, MultiplierMap};
pub use request::{attribute, zeros_reference, AttributionRequest, Method};
pub use state::{compute_reference, DeltaState, ReferenceState};
pub use target::{select_attribution_target, Head, ResolvedTarget, TargetSelection};

/// Below this `|δ_x|` the rescale rule switches to the derivative at the reference,
/// and the max rule will not divide by `δ_x`.
pub const EPSILON_STABLE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeepLiftConfig {
    pub epsilon_stable: f64,
}

impl Default for DeepLiftConfig {
    fn default() -> Self {
        DeepLiftConfig {
            epsilon_stable: EPSILON_STABLE,
        }
    }
}
