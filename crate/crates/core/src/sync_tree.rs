//! Finite pomset synchronisation trees with an optional divergence summand.

use std::fmt;

use thiserror::Error;

use crate::pomset::Pomset;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("summand prefixed by the empty pomset")]
    EmptyPrefix,
}

/// `Σ Uᵢ:tᵢ [+ Ω]`. `0` is the tree without summands, `Ω` the one whose only
/// summand is the divergence marker.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SyncTree {
    summands: Vec<(Pomset, SyncTree)>,
    divergent: bool,
}

impl SyncTree {
    /// The inactive tree `0`.
    pub fn zero() -> Self {
        SyncTree::default()
    }

    /// The completely unspecified tree `Ω`.
    pub fn omega() -> Self {
        SyncTree {
            summands: Vec::new(),
            divergent: true,
        }
    }

    pub fn new(mut summands: Vec<(Pomset, SyncTree)>, divergent: bool) -> Result<Self, TreeError> {
        if summands.iter().any(|(u, _)| u.is_empty()) {
            return Err(TreeError::EmptyPrefix);
        }
        summands.sort();
        Ok(SyncTree { summands, divergent })
    }

    /// `U : child`.
    pub fn prefix(u: Pomset, child: SyncTree) -> Result<Self, TreeError> {
        SyncTree::new(vec![(u, child)], false)
    }

    /// Sum of two trees; the result diverges if either side does.
    pub fn plus(&self, other: &SyncTree) -> SyncTree {
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        summands.sort();
        SyncTree {
            summands,
            divergent: self.divergent || other.divergent,
        }
    }

    /// The same tree with an `Ω` summand added.
    pub fn with_omega(&self) -> SyncTree {
        SyncTree {
            summands: self.summands.clone(),
            divergent: true,
        }
    }

    pub fn summands(&self) -> &[(Pomset, SyncTree)] {
        &self.summands
    }

    pub fn is_divergent(&self) -> bool {
        self.divergent
    }

    pub fn is_zero(&self) -> bool {
        self.summands.is_empty() && !self.divergent
    }

    /// One transition per summand.
    pub fn transitions(&self) -> impl Iterator<Item = (&Pomset, &SyncTree)> {
        self.summands.iter().map(|(u, t)| (u, t))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.summands.iter().map(|(_, t)| t.size()).sum::<usize>()
    }

    /// Length of the longest prefix path.
    pub fn depth(&self) -> usize {
        self.summands
            .iter()
            .map(|(_, t)| 1 + t.depth())
            .max()
            .unwrap_or(0)
    }

    /// Total number of events over all prefixes.
    pub fn event_count(&self) -> usize {
        self.summands
            .iter()
            .map(|(u, t)| u.len() + t.event_count())
            .sum()
    }

    /// Every prefix pomset occurring in the tree.
    pub fn prefixes(&self) -> Vec<Pomset> {
        let mut out = Vec::new();
        self.collect_prefixes(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_prefixes(&self, out: &mut Vec<Pomset>) {
        for (u, t) in &self.summands {
            out.push(u.clone());
            t.collect_prefixes(out);
        }
    }
}

/// Free-function forms matching the tree operations.
pub fn tree_transitions(t: &SyncTree) -> Vec<(Pomset, SyncTree)> {
    t.summands.clone()
}

pub fn tree_divergent(t: &SyncTree) -> bool {
    t.divergent
}

impl fmt::Display for SyncTree {
    /// Process-file syntax: `0`, `W`, or `U:child + ... [+ W]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.summands.is_empty() {
            return f.write_str(if self.divergent { "W" } else { "0" });
        }
        for (i, (u, t)) in self.summands.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            write!(f, "{u}:")?;
            if t.summands.is_empty() {
                write!(f, "{t}")?;
            } else {
                write!(f, "({t})")?;
            }
        }
        if self.divergent {
            f.write_str(" + W")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SyncTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomset::{Label, LabelledPoset};

    fn act(s: &str) -> Pomset {
        Pomset::singleton(Label::new(s))
    }

    #[test]
    fn zero_and_omega() {
        assert_eq!(tree_transitions(&SyncTree::zero()), vec![]);
        assert!(tree_divergent(&SyncTree::omega()));
        assert!(!tree_divergent(&SyncTree::zero()));
        assert_eq!(SyncTree::omega().transitions().count(), 0);
    }

    #[test]
    fn transitions_one_per_summand() {
        let t = SyncTree::prefix(act("a"), SyncTree::zero()).unwrap().with_omega();
        assert_eq!(tree_transitions(&t), vec![(act("a"), SyncTree::zero())]);
        assert!(t.is_divergent());

        let ab = Pomset::step(vec![Label::new("a"), Label::new("b")]).unwrap();
        let c0 = SyncTree::prefix(act("c"), SyncTree::zero()).unwrap();
        let t = SyncTree::prefix(ab.clone(), c0.clone()).unwrap();
        assert_eq!(tree_transitions(&t), vec![(ab, c0)]);
    }

    #[test]
    fn divergence_does_not_propagate_to_root() {
        let t = SyncTree::prefix(act("a"), SyncTree::omega()).unwrap();
        assert!(!tree_divergent(&t));
    }

    #[test]
    fn size_and_depth() {
        assert_eq!((SyncTree::zero().size(), SyncTree::zero().depth()), (1, 0));
        let a0 = SyncTree::prefix(act("a"), SyncTree::zero()).unwrap();
        let b0 = SyncTree::prefix(act("b"), SyncTree::zero()).unwrap();
        let sum = a0.plus(&b0);
        assert_eq!((sum.size(), sum.depth()), (3, 1));
        let ab = SyncTree::prefix(act("a"), b0).unwrap();
        assert_eq!(ab.depth(), 2);
    }

    #[test]
    fn empty_prefix_rejected() {
        let eps = LabelledPoset::empty().canonicalize();
        assert_eq!(
            SyncTree::prefix(eps, SyncTree::zero()),
            Err(TreeError::EmptyPrefix)
        );
    }

    #[test]
    fn summands_are_normalised() {
        let a0 = SyncTree::prefix(act("a"), SyncTree::zero()).unwrap();
        let b0 = SyncTree::prefix(act("b"), SyncTree::zero()).unwrap();
        assert_eq!(a0.plus(&b0), b0.plus(&a0));
        // duplicates kept
        assert_eq!(a0.plus(&a0).summands().len(), 2);
    }

    #[test]
    fn display() {
        let b0 = SyncTree::prefix(act("b"), SyncTree::zero()).unwrap();
        let t = SyncTree::prefix(act("a"), b0.with_omega()).unwrap().with_omega();
        assert_eq!(t.to_string(), "a:(b:0 + W) + W");
        assert_eq!(SyncTree::omega().to_string(), "W");
    }
}
