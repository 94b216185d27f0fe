//! Pomset, step, hp- and hhp-bisimilarity.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::bits::EventSet;
use crate::estructure::PrimeEventStructure;
use crate::game::Mode;
use crate::pomset::Pomset;
use crate::process::{build_game, Process, RelationKind};
use crate::sync_tree::SyncTree;

/// Evidence that a pair is not related.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// A transfer clause fails for a move labelled by this pomset.
    Pomset(Pomset),
    /// The pair drops out of the approximation chain at this level.
    Level(usize),
    /// A test tree below the left process but not below the right one.
    Tree(SyncTree),
}

impl Witness {
    pub fn kind(&self) -> &'static str {
        match self {
            Witness::Pomset(_) => "pomset",
            Witness::Level(_) => "level",
            Witness::Tree(_) => "tree",
        }
    }
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Pomset(u) => write!(f, "{u}"),
            Witness::Level(n) => write!(f, "{n}"),
            Witness::Tree(t) => write!(f, "{t}"),
        }
    }
}

/// Result of an equivalence or preorder query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub related: bool,
    pub witness: Option<Witness>,
}

impl Verdict {
    pub fn holds() -> Self {
        Verdict {
            related: true,
            witness: None,
        }
    }

    pub fn fails(witness: Option<Witness>) -> Self {
        Verdict {
            related: false,
            witness,
        }
    }
}

/// Decides `p ~ q` for the given relation kind. Unrelated pairs carry the
/// label of a move from the root that cannot be matched.
pub fn bisim(p: &Process, q: &Process, kind: RelationKind) -> Verdict {
    let game = build_game(p, q, kind);
    let rel = game.gfp(Mode::Bisim);
    if rel[0] {
        return Verdict::holds();
    }
    let witness = game
        .violation(0, &rel, Mode::Bisim)
        .map(|l| Witness::Pomset(game.interner.label(l).clone()))
        .or_else(|| {
            // Only hereditary pruning can remove a root without a failing
            // move; report the level instead.
            let mut fell = 0;
            game.kleene(Mode::Bisim, |n, r| {
                fell = n;
                r[0]
            });
            Some(Witness::Level(fell))
        });
    Verdict::fails(witness)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsoError {
    #[error("labels differ: {0} vs {1}")]
    LabelMismatch(String, String),
    #[error("event {0} already mapped")]
    DuplicateLeft(usize),
    #[error("event {0} already in the image")]
    DuplicateRight(usize),
}

/// A bijection between two configurations' events.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Bijection(BTreeMap<usize, usize>);

impl Bijection {
    pub fn new() -> Self {
        Bijection::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Bijection(pairs.into_iter().collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, e: usize) -> Option<usize> {
        self.0.get(&e).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&a, &b)| (a, b))
    }

    pub fn domain(&self) -> EventSet {
        self.0.keys().copied().collect()
    }

    pub fn range(&self) -> EventSet {
        self.0.values().copied().collect()
    }

    /// Whether this is a label- and order-preserving bijection between the
    /// histories of its domain in `left` and its range in `right`.
    pub fn is_history_iso(&self, left: &PrimeEventStructure, right: &PrimeEventStructure) -> bool {
        let dom = self.domain();
        self.pairs().all(|(a, b)| {
            left.label(a) == right.label(b)
                && self.pairs().all(|(x, y)| {
                    left.below(a).contains(x) == right.below(b).contains(y)
                })
        }) && dom.len() == self.range().len()
    }
}

/// `f[e ↦ e']`. The caller decides whether the result is still an
/// isomorphism of the extended histories.
pub fn extend_iso(
    f: &Bijection,
    left: &PrimeEventStructure,
    e: usize,
    right: &PrimeEventStructure,
    e2: usize,
) -> Result<Bijection, IsoError> {
    if left.label(e) != right.label(e2) {
        return Err(IsoError::LabelMismatch(
            left.label(e).to_string(),
            right.label(e2).to_string(),
        ));
    }
    if f.0.contains_key(&e) {
        return Err(IsoError::DuplicateLeft(e));
    }
    if f.0.values().any(|&v| v == e2) {
        return Err(IsoError::DuplicateRight(e2));
    }
    let mut g = f.clone();
    g.0.insert(e, e2);
    Ok(g)
}

/// `(C, f, D)` with `f` an isomorphism of the two history posets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PosetalTriple {
    pub left: EventSet,
    pub iso: Bijection,
    pub right: EventSet,
}

impl PosetalTriple {
    pub fn empty() -> Self {
        PosetalTriple {
            left: EventSet::EMPTY,
            iso: Bijection::new(),
            right: EventSet::EMPTY,
        }
    }

    pub fn from_bijection(iso: Bijection) -> Self {
        PosetalTriple {
            left: iso.domain(),
            right: iso.range(),
            iso,
        }
    }
}
