//! Divergence-sensitive prebisimulation preorders and their finite
//! approximations.
//!
//! Four views of the same preorder are computed by independent routes:
//!
//! - [`prebisim`]: greatest fixpoint of the transfer functional, by
//!   dead-pair propagation;
//! - [`level_approx`]: the Kleene chain `⊑₀ = all`, `⊑ₙ₊₁ = F(⊑ₙ)`;
//! - [`strat`] / [`strat_omega`] / [`fin_preorder`]: the chain restricted
//!   to a finite set of observable pomsets, whose guard only demands
//!   convergence matching when every initial move is observable;
//! - [`finitary_via_trees`]: comparison by finite test trees.
//!
//! All preorder queries test `left ⊑ right`.

use std::collections::{BTreeSet, HashMap};

use crate::equiv::{PosetalTriple, Verdict, Witness, Bijection};
use crate::game::{Game, Mode, NodeKey, Restriction};
use crate::pomset::Pomset;
use crate::process::{build_game, Process, RelationKind};
use crate::testgen::{self, TestgenError, TreeBound};
use crate::sync_tree::SyncTree;

/// A level of the approximation chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Finite(usize),
    /// Iterate until two successive levels agree.
    Omega,
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Level::Finite(n) => write!(f, "{n}"),
            Level::Omega => f.write_str("omega"),
        }
    }
}

/// Observable pomsets and depth for the restricted chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratParams {
    pub restriction: BTreeSet<Pomset>,
    pub level: Level,
}

/// Which preorder to evaluate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreorderVariant {
    /// The greatest prebisimulation.
    Plain,
    /// A level of the unrestricted chain.
    Level(Level),
    /// A level of the restricted chain.
    Strat(StratParams),
    /// Restricted limit quantified over all finite restrictions.
    Fin,
    /// Comparison by enumerated test trees.
    TreeFin(TreeBound),
}

/// A set of game nodes (state pairs, or posetal triples for hp/hhp).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Relation(Vec<bool>);

impl Relation {
    pub fn contains(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.0[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.0[i] = false;
    }

    pub fn is_subset(&self, other: &Relation) -> bool {
        self.0.iter().zip(&other.0).all(|(&a, &b)| !a || b)
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// The finite space of pairs (or triples) reachable from a root pair, on
/// which the transfer functionals act.
#[derive(Clone, Debug)]
pub struct RelationSpace {
    game: Game,
    kind: RelationKind,
}

impl RelationSpace {
    pub fn new(p: &Process, q: &Process, kind: RelationKind) -> Self {
        RelationSpace {
            game: build_game(p, q, kind),
            kind,
        }
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    /// Number of elements; element 0 is the root pair or `(∅, ∅, ∅)`.
    pub fn len(&self) -> usize {
        self.game.len()
    }

    pub fn is_empty(&self) -> bool {
        self.game.len() == 0
    }

    pub fn full(&self) -> Relation {
        Relation(self.game.full())
    }

    pub fn empty(&self) -> Relation {
        Relation(vec![false; self.len()])
    }

    pub fn from_members(&self, members: Vec<bool>) -> Relation {
        assert_eq!(members.len(), self.len());
        Relation(members)
    }

    /// The functional `F` for pomset or step prebisimulation (or the
    /// hp-variant for triple spaces, hereditary for hhp).
    pub fn apply_f(&self, r: &Relation) -> Relation {
        Relation(self.game.apply(&r.0, Mode::Prebisim))
    }

    /// The hp functional on a triple space, optionally followed by
    /// downward closure.
    pub fn apply_f_hp(&self, r: &Relation, hereditary: bool) -> Relation {
        assert!(self.kind.is_history_preserving(), "not a triple space");
        Relation(self.game.apply_with(&r.0, Mode::Prebisim, hereditary))
    }

    /// The bisimulation functional (both clauses unguarded).
    pub fn apply_bisim(&self, r: &Relation) -> Relation {
        Relation(self.game.apply(&r.0, Mode::Bisim))
    }

    pub fn greatest_prebisimulation(&self) -> Relation {
        Relation(self.game.gfp(Mode::Prebisim))
    }

    pub fn greatest_bisimulation(&self) -> Relation {
        Relation(self.game.gfp(Mode::Bisim))
    }

    /// Number of moves of each side at element `i`.
    pub fn moves(&self, i: usize) -> (usize, usize) {
        let n = &self.game.nodes[i];
        (n.forward.len(), n.backward.len())
    }

    /// Divergence of each side at element `i`.
    pub fn divergence(&self, i: usize) -> (bool, bool) {
        let n = &self.game.nodes[i];
        (n.left_div, n.right_div)
    }

    /// The posetal triple of element `i` in a triple space.
    pub fn triple(&self, i: usize) -> Option<PosetalTriple> {
        match &self.game.keys[i] {
            NodeKey::Triple(f) => {
                let iso = Bijection::from_pairs(f.iter().map(|&(x, y)| (x as usize, y as usize)));
                Some(PosetalTriple::from_bijection(iso))
            }
            NodeKey::Pair(..) => None,
        }
    }

    /// Every pomset labelling a move anywhere in the space.
    pub fn labels(&self) -> BTreeSet<Pomset> {
        self.game
            .all_labels()
            .into_iter()
            .map(|l| self.game.interner.label(l).clone())
            .collect()
    }
}

/// Level at which the root first drops out of the unrestricted chain.
fn drop_level(game: &Game) -> Option<usize> {
    let mut fell = None;
    game.kleene(Mode::Prebisim, |n, r| {
        if !r[0] {
            fell = Some(n);
        }
        r[0]
    });
    fell
}

/// `p ≲ q`: membership of the root in the greatest prebisimulation.
/// Failing pairs report the level at which they leave the chain.
pub fn prebisim(p: &Process, q: &Process, kind: RelationKind) -> Verdict {
    let game = build_game(p, q, kind);
    let rel = game.gfp(Mode::Prebisim);
    if rel[0] {
        Verdict::holds()
    } else {
        Verdict::fails(drop_level(&game).map(Witness::Level))
    }
}

/// `p ⊑ₙ q` on the unrestricted chain; `Level::Omega` iterates to the limit.
pub fn level_approx(p: &Process, q: &Process, kind: RelationKind, level: Level) -> bool {
    let game = build_game(p, q, kind);
    let mut last = true;
    game.kleene(Mode::Prebisim, |n, r| {
        last = r[0];
        match level {
            Level::Finite(max) => n < max && r[0],
            Level::Omega => r[0],
        }
    });
    last
}

/// How a pair behaves along the unrestricted chain up to a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ApproxOutcome {
    /// Related at every level below `n`, not at `n`.
    FallsOut(usize),
    /// The chain became stable at this level with the pair still related.
    Stable(usize),
    /// Still related at the bound, chain not yet stable.
    Undecided(usize),
}

pub fn approx_profile(p: &Process, q: &Process, kind: RelationKind, max_level: usize) -> ApproxOutcome {
    let game = build_game(p, q, kind);
    let mut fell = None;
    let (last, stable) = game.kleene(Mode::Prebisim, |n, r| {
        if !r[0] {
            fell = Some(n);
        }
        r[0] && n < max_level
    });
    match (fell, stable) {
        (Some(n), _) => ApproxOutcome::FallsOut(n),
        (None, true) => ApproxOutcome::Stable(last),
        (None, false) => ApproxOutcome::Undecided(last),
    }
}

/// Restricted chain membership at a finite level (memoised recursion), or
/// its limit for `Level::Omega`.
pub fn strat(p: &Process, q: &Process, kind: RelationKind, params: &StratParams) -> bool {
    let game = build_game(p, q, kind);
    let restriction = Restriction::new(&game, params.restriction.iter().cloned());
    match params.level {
        Level::Finite(n) => {
            let mut memo = HashMap::new();
            game.strat_level(0, n, &restriction, &mut memo)
        }
        Level::Omega => game.strat_limit(&restriction).0[0],
    }
}

/// Limit of the restricted chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StratLimit {
    pub related: bool,
    /// First level equal to its successor.
    pub stable_at: usize,
    /// Number of elements of the underlying space.
    pub space: usize,
}

pub fn strat_omega(p: &Process, q: &Process, kind: RelationKind, restriction: &BTreeSet<Pomset>) -> StratLimit {
    let game = build_game(p, q, kind);
    let r = Restriction::new(&game, restriction.iter().cloned());
    let (rel, stable_at) = game.strat_limit(&r);
    StratLimit {
        related: rel[0],
        stable_at,
        space: game.len(),
    }
}

/// Every pomset labelling a reachable move of either process under the
/// relation's transitions. Restrictions beyond this set change nothing.
pub fn p_max(p: &Process, q: &Process, kind: RelationKind) -> BTreeSet<Pomset> {
    let game = build_game(p, q, kind);
    game.all_labels()
        .into_iter()
        .map(|l| game.interner.label(l).clone())
        .collect()
}

/// `p ⊑ᶠⁱⁿ q`: the restricted limit for every finite restriction. Evaluated
/// at the restriction containing every reachable label, which is contained
/// in every other restriction's relation. Failing pairs report the level
/// at which they leave the restricted chain.
pub fn fin_preorder(p: &Process, q: &Process, kind: RelationKind) -> Verdict {
    let game = build_game(p, q, kind);
    let everything = Restriction::everything(&game);
    let mut rel = game.full();
    let mut n = 0;
    loop {
        if !rel[0] {
            return Verdict::fails(Some(Witness::Level(n)));
        }
        let next = game.strat_step(&rel, &everything);
        if next == rel {
            return Verdict::holds();
        }
        rel = next;
        n += 1;
    }
}

/// Outcome of a tree-test comparison.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FinitaryOutcome {
    /// No distinguishing tree exists. `complete` is false when the
    /// enumeration ran out of budget and the answer rests on a dominant test
    /// (a tree equivalent to the left process, below which every other
    /// candidate lies).
    Related { trees_tested: usize, complete: bool },
    /// A verified distinguishing tree.
    NotRelated { witness: SyncTree, found_by_search: bool },
    /// The bound's tree budget ran out before a verdict was reached.
    BoundExhausted { trees_tested: usize },
}

impl FinitaryOutcome {
    pub fn related(&self) -> Option<bool> {
        match self {
            FinitaryOutcome::Related { .. } => Some(true),
            FinitaryOutcome::NotRelated { .. } => Some(false),
            FinitaryOutcome::BoundExhausted { .. } => None,
        }
    }
}

/// `p ≲ᶠ q`: every test tree below `p` is below `q`.
///
/// Trees are enumerated up to `bound`, skipping any tree with a prefix path
/// `p` cannot follow (such trees are never below `p`). Then the tree of `p`
/// itself is tried when it fits the depth bound: every tree below `p` is
/// below it, so passing it settles the search. When nothing separates the
/// pair but the restricted limit fails, a distinguishing tree is extracted
/// and verified, so negative answers never depend on the bound.
pub fn finitary_via_trees(
    p: &Process,
    q: &Process,
    kind: RelationKind,
    bound: &TreeBound,
) -> Result<FinitaryOutcome, TestgenError> {
    let fin = fin_preorder(p, q, kind).related;
    let inconsistent = |t: &SyncTree| {
        TestgenError::Inconsistent(format!("test {t} disagrees with the restricted limit"))
    };
    let (tested, complete) = match testgen::search_distinguishing(p, q, kind, bound)? {
        testgen::Search::Found { tree } => {
            if fin {
                return Err(inconsistent(&tree));
            }
            return Ok(FinitaryOutcome::NotRelated {
                witness: tree,
                found_by_search: true,
            });
        }
        testgen::Search::NotFound { tested, complete } => (tested, complete),
    };
    if let Some(top) = p.as_tree().filter(|t| t.depth() <= bound.depth) {
        let passes = testgen::tree_below(&top, q, kind, p.semantics())?;
        if passes != fin {
            return Err(inconsistent(&top));
        }
        if passes {
            return Ok(FinitaryOutcome::Related {
                trees_tested: tested + 1,
                complete,
            });
        }
        return Ok(FinitaryOutcome::NotRelated {
            witness: top,
            found_by_search: true,
        });
    }
    if !fin {
        let tree = testgen::distinguishing_tree(p, q, kind)?
            .ok_or_else(|| TestgenError::Inconsistent("no distinguishing tree extracted".into()))?;
        return Ok(FinitaryOutcome::NotRelated {
            witness: tree,
            found_by_search: false,
        });
    }
    if complete {
        Ok(FinitaryOutcome::Related {
            trees_tested: tested,
            complete,
        })
    } else {
        Ok(FinitaryOutcome::BoundExhausted { trees_tested: tested })
    }
}

/// Both `p ≲ q` and `q ≲ p`.
pub fn kernel(p: &Process, q: &Process, kind: RelationKind) -> bool {
    prebisim(p, q, kind).related && prebisim(q, p, kind).related
}

/// Dispatches on a preorder variant.
pub fn check_preorder(
    p: &Process,
    q: &Process,
    kind: RelationKind,
    variant: &PreorderVariant,
) -> Result<Verdict, TestgenError> {
    Ok(match variant {
        PreorderVariant::Plain => prebisim(p, q, kind),
        PreorderVariant::Level(level) => {
            if level_approx(p, q, kind, *level) {
                Verdict::holds()
            } else {
                let game = build_game(p, q, kind);
                Verdict::fails(drop_level(&game).map(Witness::Level))
            }
        }
        PreorderVariant::Strat(params) => {
            if strat(p, q, kind, params) {
                Verdict::holds()
            } else {
                Verdict::fails(None)
            }
        }
        PreorderVariant::Fin => fin_preorder(p, q, kind),
        PreorderVariant::TreeFin(bound) => match finitary_via_trees(p, q, kind, bound)? {
            FinitaryOutcome::Related { .. } => Verdict::holds(),
            FinitaryOutcome::NotRelated { witness, .. } => Verdict::fails(Some(Witness::Tree(witness))),
            FinitaryOutcome::BoundExhausted { .. } => Verdict::fails(None),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pomset::Label;

    fn act(s: &str) -> Pomset {
        Pomset::singleton(Label::new(s))
    }

    fn pre(u: Pomset, t: SyncTree) -> SyncTree {
        SyncTree::prefix(u, t).unwrap()
    }

    fn proc(t: &SyncTree) -> Process {
        Process::compile(t).unwrap()
    }

    fn a0() -> SyncTree {
        pre(act("a"), SyncTree::zero())
    }

    #[test]
    fn omega_below_everything() {
        let omega = proc(&SyncTree::omega());
        for t in [SyncTree::zero(), a0(), a0().with_omega()] {
            for k in RelationKind::ALL {
                assert!(prebisim(&omega, &proc(&t), k).related);
            }
        }
    }

    #[test]
    fn divergent_summand_direction() {
        let a = proc(&a0());
        let a_omega = proc(&a0().with_omega());
        assert!(prebisim(&a_omega, &a, RelationKind::Pomset).related);
        let v = prebisim(&a, &a_omega, RelationKind::Pomset);
        assert!(!v.related);
        assert_eq!(v.witness, Some(Witness::Level(1)));
        assert!(!kernel(&a, &a_omega, RelationKind::Pomset));
    }

    #[test]
    fn zero_below_q_iff_q_is_zero_like() {
        let z = proc(&SyncTree::zero());
        assert!(prebisim(&z, &z, RelationKind::Pomset).related);
        assert!(!prebisim(&z, &proc(&SyncTree::omega()), RelationKind::Pomset).related);
        assert!(!prebisim(&z, &proc(&a0()), RelationKind::Pomset).related);
    }

    #[test]
    fn f_on_empty_and_full() {
        let cases = [SyncTree::zero(), SyncTree::omega(), a0(), a0().with_omega()];
        for t1 in &cases {
            for t2 in &cases {
                let space = RelationSpace::new(&proc(t1), &proc(t2), RelationKind::Pomset);
                let f_empty = space.apply_f(&space.empty());
                for i in 0..space.len() {
                    let (lm, rm) = space.moves(i);
                    let (ld, rd) = space.divergence(i);
                    let expected = lm == 0 && (ld || (!rd && rm == 0));
                    assert_eq!(f_empty.contains(i), expected, "{t1} vs {t2} at {i}");
                }
                if t1.is_divergent() && t1.summands().is_empty() {
                    assert!(space.apply_f(&space.full()).contains(0));
                }
            }
        }
    }

    #[test]
    fn level_zero_relates_everything() {
        let a = proc(&a0());
        let z = proc(&SyncTree::zero());
        assert!(level_approx(&a, &z, RelationKind::Pomset, Level::Finite(0)));
        assert!(!level_approx(&a, &z, RelationKind::Pomset, Level::Finite(1)));
        let params = StratParams {
            restriction: BTreeSet::new(),
            level: Level::Finite(0),
        };
        assert!(strat(&a, &z, RelationKind::Pomset, &params));
    }

    #[test]
    fn empty_restriction_level_one() {
        // clause (i) is vacuous; clause (ii) only fires when p has no moves
        let samples = [SyncTree::zero(), SyncTree::omega(), a0(), a0().with_omega()];
        for t1 in &samples {
            for t2 in &samples {
                let (p, q) = (proc(t1), proc(t2));
                let params = StratParams {
                    restriction: BTreeSet::new(),
                    level: Level::Finite(1),
                };
                let p_moves = !t1.summands().is_empty();
                let expected = p_moves || t1.is_divergent() || (!t2.is_divergent() && t2.summands().is_empty());
                assert_eq!(strat(&p, &q, RelationKind::Pomset, &params), expected, "{t1} vs {t2}");
                for n in 2..5 {
                    let params = StratParams {
                        restriction: BTreeSet::new(),
                        level: Level::Finite(n),
                    };
                    assert_eq!(strat(&p, &q, RelationKind::Pomset, &params), expected);
                }
            }
        }
    }

    #[test]
    fn approx_profile_reports_drop() {
        let a = proc(&a0());
        let ab = proc(&pre(act("a"), pre(act("b"), SyncTree::zero())));
        assert_eq!(approx_profile(&a, &ab, RelationKind::Pomset, 10), ApproxOutcome::FallsOut(1));
        assert!(matches!(approx_profile(&a, &a, RelationKind::Pomset, 10), ApproxOutcome::Stable(_)));
        let deep = proc(&pre(act("a"), pre(act("a"), pre(act("b"), SyncTree::zero()))));
        let deep2 = proc(&pre(act("a"), pre(act("a"), pre(act("c"), SyncTree::zero()))));
        assert_eq!(approx_profile(&deep, &deep2, RelationKind::Step, 1), ApproxOutcome::Undecided(1));
    }
}
