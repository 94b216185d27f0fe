//! Prime event structures, configurations and the transition relations they
//! induce.
//!
//! A process state is a configuration of a structure. Its pomset
//! transitions are all proper configuration extensions `C ⊂ C'`, labelled by
//! the pomset of `C' \ C` under causality. Step transitions keep only the
//! unordered extensions, action transitions only single events.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::bits::{EventSet, MAX_EVENTS};
use crate::pomset::{Label, LabelledPoset, Pomset, PomsetSequence, PosetError};
use crate::sync_tree::SyncTree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StructureError {
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error("event {0} is in conflict with itself")]
    SelfConflict(usize),
    #[error("events {0} and {1} are both causally related and in conflict")]
    CausalConflict(usize, usize),
    #[error("{0:?} is not a configuration")]
    NotAConfiguration(EventSet),
}

/// Which transitions of a state are observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Pomset,
    Step,
    Action,
}

impl TransitionKind {
    fn admits(self, u: &Pomset) -> bool {
        match self {
            TransitionKind::Pomset => true,
            TransitionKind::Step => u.is_step(),
            TransitionKind::Action => u.len() == 1,
        }
    }
}

/// A finite prime event structure with a set of divergent configurations.
#[derive(Clone)]
pub struct PrimeEventStructure {
    poset: LabelledPoset,
    conflict: Vec<EventSet>,
    divergent: BTreeSet<EventSet>,
    layout: Option<TreeLayout>,
    configs: OnceLock<Vec<EventSet>>,
}

/// Records which tree node or prefix instance each event came from, so a
/// state of a compiled tree can be turned back into a tree.
#[derive(Clone, Debug)]
struct TreeLayout {
    nodes: Vec<LayoutNode>,
}

#[derive(Clone, Debug)]
struct LayoutNode {
    config: EventSet,
    divergent: bool,
    summands: Vec<LayoutSummand>,
}

#[derive(Clone, Debug)]
struct LayoutSummand {
    prefix: Pomset,
    /// Event `k` of the canonical prefix is structure event `base + k`.
    base: usize,
    child: usize,
}

impl LayoutSummand {
    fn events(&self) -> EventSet {
        EventSet::from_bits(EventSet::full(self.prefix.len()).bits() << self.base)
    }
}

impl PrimeEventStructure {
    /// Builds a structure from generating causality pairs `(lo, hi)`, basic
    /// conflict pairs and divergent configurations. Causality is closed
    /// transitively and conflict is closed symmetrically and hereditarily.
    pub fn new(
        labels: Vec<Label>,
        causality: &[(usize, usize)],
        conflicts: &[(usize, usize)],
        divergent: impl IntoIterator<Item = EventSet>,
    ) -> Result<Self, StructureError> {
        let poset = LabelledPoset::from_covering(labels, causality)?;
        let n = poset.len();
        let mut conflict = vec![EventSet::EMPTY; n];
        for &(a, b) in conflicts {
            if a >= n || b >= n {
                return Err(PosetError::UnknownEvent(a.max(b)).into());
            }
            if a == b {
                return Err(StructureError::SelfConflict(a));
            }
            if poset.less(a, b) || poset.less(b, a) {
                return Err(StructureError::CausalConflict(a.min(b), a.max(b)));
            }
            conflict[a].insert(b);
            conflict[b].insert(a);
        }
        // e # e' and e' ≤ e'' ⇒ e # e''
        let above: Vec<EventSet> = (0..n).map(|e| poset.above(e)).collect();
        loop {
            let mut changed = false;
            for e in 0..n {
                let mut grown = conflict[e];
                for x in conflict[e] {
                    grown = grown.union(above[x]);
                }
                for x in grown.difference(conflict[e]) {
                    conflict[x].insert(e);
                }
                if grown != conflict[e] {
                    conflict[e] = grown;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (e, clash) in conflict.iter().enumerate() {
            if clash.contains(e) {
                return Err(StructureError::SelfConflict(e));
            }
            if let Some(x) = clash.intersection(poset.below(e)).iter().next() {
                return Err(StructureError::CausalConflict(x, e));
            }
        }
        let es = PrimeEventStructure {
            poset,
            conflict,
            divergent: BTreeSet::new(),
            layout: None,
            configs: OnceLock::new(),
        };
        let mut divergent_set = BTreeSet::new();
        for c in divergent {
            if !es.is_configuration(c) {
                return Err(StructureError::NotAConfiguration(c));
            }
            divergent_set.insert(c);
        }
        Ok(PrimeEventStructure {
            divergent: divergent_set,
            ..es
        })
    }

    pub fn len(&self) -> usize {
        self.poset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poset.is_empty()
    }

    pub fn events(&self) -> EventSet {
        self.poset.events()
    }

    pub fn label(&self, e: usize) -> &Label {
        self.poset.label(e)
    }

    /// Strict causal predecessors.
    pub fn below(&self, e: usize) -> EventSet {
        self.poset.below(e)
    }

    pub fn conflicts(&self, e: usize) -> EventSet {
        self.conflict[e]
    }

    pub fn in_conflict(&self, a: usize, b: usize) -> bool {
        self.conflict[a].contains(b)
    }

    /// The causal order with labels, as a labelled poset on all events.
    pub fn causality(&self) -> &LabelledPoset {
        &self.poset
    }

    pub fn divergent_configs(&self) -> &BTreeSet<EventSet> {
        &self.divergent
    }

    pub fn is_configuration(&self, c: EventSet) -> bool {
        if !c.is_subset(self.events()) {
            return false;
        }
        c.iter()
            .all(|e| self.below(e).is_subset(c) && self.conflict[e].is_disjoint(c))
    }

    pub fn is_divergent(&self, c: EventSet) -> bool {
        self.divergent.contains(&c)
    }

    /// Events that can be added to `c` one at a time.
    pub fn enabled(&self, c: EventSet) -> EventSet {
        self.events()
            .difference(c)
            .iter()
            .filter(|&e| self.below(e).is_subset(c) && self.conflict[e].is_disjoint(c))
            .collect()
    }

    /// History poset of the events in `c`.
    pub fn history(&self, c: EventSet) -> LabelledPoset {
        self.poset.restrict_unchecked(c)
    }

    /// Pomset executed when moving from `c` to `c ∪ x`.
    pub fn residual_pomset(&self, x: EventSet) -> Pomset {
        self.poset.restrict_unchecked(x).canonicalize()
    }

    /// All finite configurations, sorted by size then bits.
    pub fn configurations(&self) -> &[EventSet] {
        self.configs.get_or_init(|| {
            let mut all = self.extensions_from(EventSet::EMPTY);
            all.push(EventSet::EMPTY);
            all.sort_by_key(|c| (c.len(), c.bits()));
            all
        })
    }

    /// Every configuration strictly containing `c`.
    pub fn extensions_from(&self, c: EventSet) -> Vec<EventSet> {
        let mut seen = HashSet::new();
        let mut stack = vec![c];
        let mut out = Vec::new();
        while let Some(cur) = stack.pop() {
            for e in self.enabled(cur) {
                let next = cur.with(e);
                if seen.insert(next) {
                    out.push(next);
                    stack.push(next);
                }
            }
        }
        out.sort_by_key(|c| (c.len(), c.bits()));
        out
    }

    /// The structure of what remains possible after `c`: events outside `c`
    /// not in conflict with it, renumbered, with divergence shifted along.
    /// Its empty configuration behaves as `c` does here.
    pub fn residual(&self, c: EventSet) -> PrimeEventStructure {
        let blocked = c
            .iter()
            .fold(EventSet::EMPTY, |acc, e| acc.union(self.conflict[e]));
        let kept = self.events().difference(c).difference(blocked);
        let mut index = [usize::MAX; MAX_EVENTS];
        for (new, old) in kept.iter().enumerate() {
            index[old] = new;
        }
        let remap = |s: EventSet| -> EventSet { s.intersection(kept).iter().map(|x| index[x]).collect() };
        let poset = self.poset.restrict_unchecked(kept);
        let conflict = kept.iter().map(|e| remap(self.conflict[e])).collect();
        let divergent = self
            .divergent
            .iter()
            .filter(|d| c.is_subset(**d) && d.difference(c).is_subset(kept))
            .map(|d| remap(d.difference(c)))
            .collect();
        PrimeEventStructure {
            poset,
            conflict,
            divergent,
            layout: None,
            configs: OnceLock::new(),
        }
    }

    /// Turns the state at configuration `c` of a compiled tree back into the
    /// tree describing its remaining behaviour. `None` for structures that
    /// were not produced by [`compile_tree`] or for invalid `c`.
    pub fn residual_tree(&self, c: EventSet) -> Option<SyncTree> {
        let layout = self.layout.as_ref()?;
        if !self.is_configuration(c) {
            return None;
        }
        let mut node = 0usize;
        loop {
            let n = &layout.nodes[node];
            if c == n.config {
                return Some(layout.subtree(node));
            }
            let extra = c.difference(n.config);
            let s = n.summands.iter().find(|s| !s.events().is_disjoint(extra))?;
            let done = extra.intersection(s.events());
            if done == s.events() {
                node = s.child;
                continue;
            }
            let remaining = s.events().difference(done);
            let rest = EventSet::from_bits(remaining.bits() >> s.base);
            let prefix = s.prefix.canon().restrict_unchecked(rest).canonicalize();
            return SyncTree::prefix(prefix, layout.subtree(s.child)).ok();
        }
    }
}

impl TreeLayout {
    fn subtree(&self, node: usize) -> SyncTree {
        let n = &self.nodes[node];
        let summands = n
            .summands
            .iter()
            .map(|s| (s.prefix.clone(), self.subtree(s.child)))
            .collect();
        SyncTree::new(summands, n.divergent).expect("layout prefixes are nonempty")
    }
}

impl fmt::Debug for PrimeEventStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrimeEventStructure")
            .field("causality", &self.poset)
            .field("conflict", &self.conflict)
            .field("divergent", &self.divergent)
            .finish()
    }
}

/// Compiles a tree into an event structure. Every prefix occurrence gets
/// fresh events, which causally follow the whole path leading to it;
/// distinct summands of a node are in conflict. A node's path configuration
/// is divergent iff the node has an `Ω` summand.
pub fn compile_tree(t: &SyncTree) -> Result<(Arc<PrimeEventStructure>, ProcessState), StructureError> {
    let total = t.event_count();
    if total > MAX_EVENTS {
        return Err(PosetError::TooManyEvents(total).into());
    }
    let mut b = Builder::default();
    b.node(t, EventSet::EMPTY);
    let mut labels = Vec::with_capacity(b.labels.len());
    labels.append(&mut b.labels);
    let poset = LabelledPoset::from_covering(labels, &b.causality)?;
    let n = poset.len();
    let mut conflict = vec![EventSet::EMPTY; n];
    for (x, y) in &b.conflict_blocks {
        for e in x.iter() {
            conflict[e] = conflict[e].union(*y);
        }
        for e in y.iter() {
            conflict[e] = conflict[e].union(*x);
        }
    }
    let es = PrimeEventStructure {
        poset,
        conflict,
        divergent: b.divergent,
        layout: Some(TreeLayout { nodes: b.nodes }),
        configs: OnceLock::new(),
    };
    let es = Arc::new(es);
    let root = ProcessState {
        es: es.clone(),
        config: EventSet::EMPTY,
    };
    Ok((es, root))
}

#[derive(Default)]
struct Builder {
    labels: Vec<Label>,
    causality: Vec<(usize, usize)>,
    conflict_blocks: Vec<(EventSet, EventSet)>,
    divergent: BTreeSet<EventSet>,
    nodes: Vec<LayoutNode>,
}

impl Builder {
    /// Emits the node for `t` reached after `path`; returns (node index,
    /// all events of the subtree).
    fn node(&mut self, t: &SyncTree, path: EventSet) -> (usize, EventSet) {
        let id = self.nodes.len();
        self.nodes.push(LayoutNode {
            config: path,
            divergent: t.is_divergent(),
            summands: Vec::new(),
        });
        if t.is_divergent() {
            self.divergent.insert(path);
        }
        let mut subtree_events = Vec::new();
        let mut summands = Vec::new();
        for (u, child) in t.summands() {
            let base = self.labels.len();
            let canon = u.canon();
            for k in 0..canon.len() {
                let e = base + k;
                self.labels.push(canon.label(k).clone());
                for lo in canon.below(k) {
                    self.causality.push((base + lo, e));
                }
                for p in path {
                    self.causality.push((p, e));
                }
            }
            let instance = EventSet::from_bits(EventSet::full(canon.len()).bits() << base);
            let (child_id, child_events) = self.node(child, path.union(instance));
            summands.push(LayoutSummand {
                prefix: u.clone(),
                base,
                child: child_id,
            });
            subtree_events.push(instance.union(child_events));
        }
        for i in 0..subtree_events.len() {
            for j in i + 1..subtree_events.len() {
                self.conflict_blocks.push((subtree_events[i], subtree_events[j]));
            }
        }
        self.nodes[id].summands = summands;
        let all = subtree_events
            .into_iter()
            .fold(EventSet::EMPTY, EventSet::union);
        (id, all)
    }
}

/// A process: a configuration of a shared event structure.
#[derive(Clone)]
pub struct ProcessState {
    es: Arc<PrimeEventStructure>,
    config: EventSet,
}

impl ProcessState {
    pub fn new(es: Arc<PrimeEventStructure>, config: EventSet) -> Result<Self, StructureError> {
        if !es.is_configuration(config) {
            return Err(StructureError::NotAConfiguration(config));
        }
        Ok(ProcessState { es, config })
    }

    /// Compiles a tree and returns its root state.
    pub fn from_tree(t: &SyncTree) -> Result<Self, StructureError> {
        Ok(compile_tree(t)?.1)
    }

    pub fn structure(&self) -> &Arc<PrimeEventStructure> {
        &self.es
    }

    pub fn config(&self) -> EventSet {
        self.config
    }

    fn at(&self, config: EventSet) -> ProcessState {
        ProcessState {
            es: self.es.clone(),
            config,
        }
    }

    pub fn divergent(&self) -> bool {
        self.es.is_divergent(self.config)
    }

    pub fn transitions(&self, kind: TransitionKind) -> Vec<(Pomset, ProcessState)> {
        let mut out = Vec::new();
        if kind == TransitionKind::Action {
            for e in self.es.enabled(self.config) {
                let u = Pomset::singleton(self.es.label(e).clone());
                out.push((u, self.at(self.config.with(e))));
            }
            return out;
        }
        for next in self.es.extensions_from(self.config) {
            let u = self.es.residual_pomset(next.difference(self.config));
            if kind.admits(&u) {
                out.push((u, self.at(next)));
            }
        }
        out
    }

    pub fn pomset_transitions(&self) -> Vec<(Pomset, ProcessState)> {
        self.transitions(TransitionKind::Pomset)
    }

    pub fn step_transitions(&self) -> Vec<(Pomset, ProcessState)> {
        self.transitions(TransitionKind::Step)
    }

    pub fn action_transitions(&self) -> Vec<(Label, ProcessState)> {
        self.es
            .enabled(self.config)
            .iter()
            .map(|e| (self.es.label(e).clone(), self.at(self.config.with(e))))
            .collect()
    }

    pub fn initials(&self, kind: TransitionKind) -> BTreeSet<Pomset> {
        self.transitions(kind).into_iter().map(|(u, _)| u).collect()
    }

    pub fn derivatives(&self, kind: TransitionKind, u: &Pomset) -> Vec<ProcessState> {
        self.transitions(kind)
            .into_iter()
            .filter(|(v, _)| v == u)
            .map(|(_, s)| s)
            .collect()
    }

    /// Labels of every transition reachable from this state.
    pub fn sort(&self, kind: TransitionKind) -> BTreeSet<Pomset> {
        let mut out = BTreeSet::new();
        let mut cache: HashMap<EventSet, Pomset> = HashMap::new();
        let mut reach = self.es.extensions_from(self.config);
        reach.push(self.config);
        for &c in &reach {
            for next in self.es.extensions_from(c) {
                let x = next.difference(c);
                if kind == TransitionKind::Action && x.len() != 1 {
                    continue;
                }
                let u = cache
                    .entry(x)
                    .or_insert_with(|| self.es.residual_pomset(x))
                    .clone();
                if kind.admits(&u) {
                    out.insert(u);
                }
            }
        }
        out
    }

    /// A witness sequence reaching a transition labelled `u`, if any.
    pub fn sequence_to(&self, kind: TransitionKind, u: &Pomset) -> Option<PomsetSequence> {
        let mut seen = HashSet::new();
        let mut queue = std::collections::VecDeque::from([(self.clone(), Vec::new())]);
        seen.insert(self.config);
        while let Some((s, path)) = queue.pop_front() {
            for (v, next) in s.transitions(kind) {
                if &v == u {
                    return Some(PomsetSequence(path));
                }
                if seen.insert(next.config) {
                    let mut p = path.clone();
                    p.push(v);
                    queue.push_back((next, p));
                }
            }
        }
        None
    }

    /// Always true: every compiled structure is finite.
    pub fn is_sort_finite(&self) -> bool {
        true
    }

    /// The compiled tree this state behaves as, when the structure came from
    /// [`compile_tree`].
    pub fn residual_tree(&self) -> Option<SyncTree> {
        self.es.residual_tree(self.config)
    }
}

impl fmt::Debug for ProcessState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "state{:?}", self.config)
    }
}

impl PartialEq for ProcessState {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.es, &other.es) && self.config == other.config
    }
}

impl Eq for ProcessState {}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(s: &str) -> Pomset {
        Pomset::singleton(Label::new(s))
    }

    fn pre(u: Pomset, t: SyncTree) -> SyncTree {
        SyncTree::prefix(u, t).unwrap()
    }

    fn step_ab() -> Pomset {
        Pomset::step(vec![Label::new("a"), Label::new("b")]).unwrap()
    }

    fn chain_ab() -> Pomset {
        LabelledPoset::from_covering(vec![Label::new("a"), Label::new("b")], &[(0, 1)])
            .unwrap()
            .canonicalize()
    }

    fn labels_of(ts: &[(Pomset, ProcessState)]) -> BTreeSet<Pomset> {
        ts.iter().map(|(u, _)| u.clone()).collect()
    }

    // Oracle: every subset filtered by the configuration conditions.
    fn brute_configs(es: &PrimeEventStructure) -> Vec<EventSet> {
        let n = es.len();
        let mut out: Vec<EventSet> = (0..1u64 << n)
            .map(EventSet::from_bits)
            .filter(|&c| {
                c.iter().all(|e| {
                    es.below(e).is_subset(c) && c.iter().all(|f| !es.in_conflict(e, f))
                })
            })
            .collect();
        out.sort_by_key(|c| (c.len(), c.bits()));
        out
    }

    #[test]
    fn compile_zero() {
        let (es, root) = compile_tree(&SyncTree::zero()).unwrap();
        assert_eq!(es.len(), 0);
        assert!(!root.divergent());
        assert_eq!(es.configurations(), &[EventSet::EMPTY]);
        assert!(root.pomset_transitions().is_empty());
        assert!(root.initials(TransitionKind::Pomset).is_empty());
    }

    #[test]
    fn duplicate_summands_conflict() {
        let a0 = pre(act("a"), SyncTree::zero());
        let (es, _) = compile_tree(&a0.plus(&a0)).unwrap();
        assert_eq!(es.len(), 2);
        assert!(es.in_conflict(0, 1) && es.in_conflict(1, 0));
    }

    #[test]
    fn step_prefix_configurations_and_transitions() {
        let (es, root) = compile_tree(&pre(step_ab(), SyncTree::zero())).unwrap();
        assert_eq!(es.configurations().len(), 4);
        assert_eq!(es.configurations(), brute_configs(&es).as_slice());
        let expected: BTreeSet<_> = [act("a"), act("b"), step_ab()].into_iter().collect();
        assert_eq!(labels_of(&root.pomset_transitions()), expected);
        assert_eq!(labels_of(&root.step_transitions()), expected);
        assert_eq!(root.sort(TransitionKind::Pomset).len(), 3);
        assert!(root.is_sort_finite());
    }

    #[test]
    fn causal_chain() {
        let t = pre(act("a"), pre(act("b"), SyncTree::zero()));
        let (es, root) = compile_tree(&t).unwrap();
        assert_eq!(
            es.configurations(),
            &[EventSet::EMPTY, EventSet::singleton(0), EventSet::full(2)]
        );
        let expected: BTreeSet<_> = [act("a"), chain_ab()].into_iter().collect();
        assert_eq!(labels_of(&root.pomset_transitions()), expected);
        assert_eq!(
            labels_of(&root.step_transitions()),
            [act("a")].into_iter().collect()
        );
        let sort: BTreeSet<_> = [act("a"), act("b"), chain_ab()].into_iter().collect();
        assert_eq!(root.sort(TransitionKind::Pomset), sort);
        assert!(root.derivatives(TransitionKind::Pomset, &act("b")).is_empty());
        assert_eq!(root.derivatives(TransitionKind::Pomset, &act("a")).len(), 1);
        assert_eq!(
            root.sequence_to(TransitionKind::Pomset, &act("b")),
            Some(PomsetSequence(vec![act("a")]))
        );
    }

    #[test]
    fn divergence_on_path_ends() {
        let (_, root) = compile_tree(&SyncTree::omega()).unwrap();
        assert!(root.divergent());
        let t = pre(act("a"), SyncTree::omega());
        let (es, root) = compile_tree(&t).unwrap();
        assert!(!root.divergent());
        let after = ProcessState::new(es, EventSet::singleton(0)).unwrap();
        assert!(after.divergent());
    }

    #[test]
    fn mid_prefix_configurations_are_convergent() {
        let t = pre(step_ab(), SyncTree::zero()).with_omega();
        let (es, root) = compile_tree(&pre(step_ab(), SyncTree::omega())).unwrap();
        assert!(!root.divergent());
        for c in es.configurations() {
            assert_eq!(es.is_divergent(*c), *c == EventSet::full(2));
        }
        let (_, root) = compile_tree(&t).unwrap();
        assert!(root.divergent());
    }

    #[test]
    fn residual_trees() {
        let t = pre(chain_ab(), pre(act("c"), SyncTree::omega())).plus(&pre(act("d"), SyncTree::zero()));
        let (es, root) = compile_tree(&t).unwrap();
        assert_eq!(root.residual_tree(), Some(t.clone()));
        for (u, s) in root.pomset_transitions() {
            let r = s.residual_tree().unwrap();
            if u == act("a") {
                assert_eq!(r, pre(act("b"), pre(act("c"), SyncTree::omega())));
            }
            if u == act("d") {
                assert_eq!(r, SyncTree::zero());
            }
        }
        assert!(es.residual_tree(EventSet::singleton(1)).is_none());
    }

    #[test]
    fn new_validates_and_closes_conflict() {
        let l = |s: &str| Label::new(s);
        let es = PrimeEventStructure::new(vec![l("a"), l("b"), l("c")], &[(1, 2)], &[(0, 1)], [])
            .unwrap();
        assert!(es.in_conflict(0, 2));
        assert_eq!(
            PrimeEventStructure::new(vec![l("a"), l("b")], &[(0, 1)], &[(0, 1)], []).unwrap_err(),
            StructureError::CausalConflict(0, 1)
        );
        assert_eq!(
            PrimeEventStructure::new(vec![l("a"), l("b")], &[(0, 1)], &[], [EventSet::singleton(1)])
                .unwrap_err(),
            StructureError::NotAConfiguration(EventSet::singleton(1))
        );
    }
}
