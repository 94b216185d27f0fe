//! Processes under a chosen transition semantics, and the relation kinds
//! they can be compared by.

use std::fmt;
use std::sync::Arc;

use crate::estructure::{compile_tree, PrimeEventStructure, ProcessState, StructureError, TransitionKind};
use crate::bits::MAX_EVENTS;
use crate::game::{Game, Interner, Side};
use crate::pomset::PosetError;
use crate::sync_tree::SyncTree;

/// The four truly concurrent relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationKind {
    Pomset,
    Step,
    Hp,
    Hhp,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] = [
        RelationKind::Pomset,
        RelationKind::Step,
        RelationKind::Hp,
        RelationKind::Hhp,
    ];

    /// Whether the relation is evaluated over posetal triples.
    pub fn is_history_preserving(self) -> bool {
        matches!(self, RelationKind::Hp | RelationKind::Hhp)
    }

    /// Transitions observed by the relation.
    pub fn transitions(self) -> TransitionKind {
        match self {
            RelationKind::Pomset => TransitionKind::Pomset,
            RelationKind::Step => TransitionKind::Step,
            RelationKind::Hp | RelationKind::Hhp => TransitionKind::Action,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RelationKind::Pomset => "pomset",
            RelationKind::Step => "step",
            RelationKind::Hp => "hp",
            RelationKind::Hhp => "hhp",
        }
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for RelationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pomset" | "P" | "p" => Ok(RelationKind::Pomset),
            "step" | "S" | "s" => Ok(RelationKind::Step),
            "hp" | "HP" => Ok(RelationKind::Hp),
            "hhp" | "HHP" => Ok(RelationKind::Hhp),
            other => Err(format!("unknown relation kind `{other}`")),
        }
    }
}

/// How a tree's transitions are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Semantics {
    /// All configuration extensions of the compiled event structure.
    #[default]
    EventStructure,
    /// One transition per summand.
    TreeNative,
}

impl Semantics {
    pub fn name(self) -> &'static str {
        match self {
            Semantics::EventStructure => "es",
            Semantics::TreeNative => "tree-native",
        }
    }
}

/// A process to be compared: a state of an event structure, or a tree read
/// with tree-native transitions.
///
/// History-preserving relations always work on event structures; a
/// tree-native process is compiled for them.
#[derive(Clone, Debug)]
pub enum Process {
    State(ProcessState),
    TreeNative(Arc<SyncTree>),
}

impl Process {
    /// The root state of the compiled tree.
    pub fn compile(t: &SyncTree) -> Result<Self, StructureError> {
        Ok(Process::State(ProcessState::from_tree(t)?))
    }

    /// Trees too large to compile are rejected here as well, since
    /// history-preserving checks compile them.
    pub fn tree_native(t: SyncTree) -> Result<Self, StructureError> {
        let n = t.event_count();
        if n > MAX_EVENTS {
            return Err(PosetError::TooManyEvents(n).into());
        }
        Ok(Process::TreeNative(Arc::new(t)))
    }

    pub fn from_tree(t: &SyncTree, semantics: Semantics) -> Result<Self, StructureError> {
        match semantics {
            Semantics::EventStructure => Process::compile(t),
            Semantics::TreeNative => Process::tree_native(t.clone()),
        }
    }

    pub fn semantics(&self) -> Semantics {
        match self {
            Process::State(_) => Semantics::EventStructure,
            Process::TreeNative(_) => Semantics::TreeNative,
        }
    }

    /// A tree with the same behaviour, when one is available.
    pub fn as_tree(&self) -> Option<SyncTree> {
        match self {
            Process::State(s) => s.residual_tree(),
            Process::TreeNative(t) => Some((**t).clone()),
        }
    }

    /// Explicit transition system rooted at state 0.
    pub(crate) fn side(&self, kind: TransitionKind, interner: &mut Interner) -> Side {
        match self {
            Process::State(s) => Side::from_structure(s.structure(), s.config(), kind, interner).0,
            Process::TreeNative(t) => Side::from_tree(t, kind, interner),
        }
    }

    /// Structure whose empty configuration stands for this process.
    pub(crate) fn rooted_structure(&self) -> Result<Arc<PrimeEventStructure>, StructureError> {
        match self {
            Process::State(s) if s.config().is_empty() => Ok(s.structure().clone()),
            Process::State(s) => Ok(Arc::new(s.structure().residual(s.config()))),
            Process::TreeNative(t) => Ok(compile_tree(t)?.0),
        }
    }
}

impl From<ProcessState> for Process {
    fn from(s: ProcessState) -> Self {
        Process::State(s)
    }
}

/// Builds the transfer game for comparing `p` with `q`.
pub(crate) fn build_game(p: &Process, q: &Process, kind: RelationKind) -> Game {
    if kind.is_history_preserving() {
        let a = p.rooted_structure().expect("processes are already compiled");
        let b = q.rooted_structure().expect("processes are already compiled");
        Game::triples(&a, &b, kind == RelationKind::Hhp)
    } else {
        let mut interner = Interner::default();
        let left = p.side(kind.transitions(), &mut interner);
        let right = q.side(kind.transitions(), &mut interner);
        Game::pairs(&left, 0, &right, 0, interner)
    }
}
