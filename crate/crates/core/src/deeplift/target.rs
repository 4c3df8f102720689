use alloc::format;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeKind};
use crate::Target;

#[derive(Debug, Clone, PartialEq)]
pub enum TargetSelection {
    /// The pre-activation feeding the graph's final sigmoid or softmax, at `class`.
    Auto { class: usize },
    Explicit(Target),
}

impl Default for TargetSelection {
    fn default() -> Self {
        TargetSelection::Auto { class: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Sigmoid,
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedTarget {
    pub target: Target,
    /// The output nonlinearity skipped by automatic selection.
    pub head: Option<Head>,
}

/// Picks the node to attribute to.
///
/// Saturating output nonlinearities cap `δ` (a sigmoid cannot move more than 1),
/// which divides contributions between redundant inputs. Automatic selection
/// therefore targets the linear pre-activation feeding the head.
pub fn select_attribution_target(graph: &Graph, requested: &TargetSelection) -> Result<ResolvedTarget> {
    match requested {
        TargetSelection::Explicit(target) => {
            crate::autodiff::resolve_scalar(graph, target)?;
            Ok(ResolvedTarget {
                target: target.clone(),
                head: None,
            })
        }
        TargetSelection::Auto { class } => {
            let out_id = graph
                .outputs()
                .first()
                .ok_or_else(|| Error::NoRecognizableHead("graph has no outputs".into()))?;
            let out = graph.node(out_id).expect("validated output");
            let head = match out.kind {
                NodeKind::Sigmoid => Head::Sigmoid,
                NodeKind::Softmax => Head::Softmax,
                ref other => {
                    return Err(Error::NoRecognizableHead(format!(
                        "output `{}` is a {} node, not a sigmoid or softmax",
                        out.id,
                        other.name()
                    )))
                }
            };
            let target = crate::Target::new(out.inputs[0].clone(), *class);
            crate::autodiff::resolve_scalar(graph, &target)?;
            Ok(ResolvedTarget {
                target,
                head: Some(head),
            })
        }
    }
}
