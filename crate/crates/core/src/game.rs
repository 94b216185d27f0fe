//! Explicit transfer games over state pairs or posetal triples, and the
//! fixpoint engines that evaluate relations on them.
//!
//! A game node stands for a pair `(p, q)` (or a triple `(C, f, D)`). Each
//! left move of `p` becomes a forward obligation listing the nodes a
//! matching right move may lead to; right moves become backward
//! obligations. Every relation in this crate is a subset of the nodes.

use std::collections::{HashMap, VecDeque};

use crate::bits::EventSet;
use crate::estructure::{PrimeEventStructure, TransitionKind};
use crate::pomset::Pomset;
use crate::sync_tree::SyncTree;

pub(crate) type LabelId = u32;

#[derive(Default, Clone, Debug)]
pub(crate) struct Interner {
    ids: HashMap<Pomset, LabelId>,
    labels: Vec<Pomset>,
}

impl Interner {
    pub fn intern(&mut self, u: &Pomset) -> LabelId {
        if let Some(&id) = self.ids.get(u) {
            return id;
        }
        let id = self.labels.len() as LabelId;
        self.ids.insert(u.clone(), id);
        self.labels.push(u.clone());
        id
    }

    pub fn get(&self, u: &Pomset) -> Option<LabelId> {
        self.ids.get(u).copied()
    }

    pub fn label(&self, id: LabelId) -> &Pomset {
        &self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }
}

/// One explicit finite transition system with interned labels.
#[derive(Clone, Debug, Default)]
pub(crate) struct Side {
    pub trans: Vec<Vec<(LabelId, u32)>>,
    pub divergent: Vec<bool>,
}

impl Side {
    fn push_state(&mut self, divergent: bool) -> u32 {
        self.trans.push(Vec::new());
        self.divergent.push(divergent);
        (self.trans.len() - 1) as u32
    }

    fn initials(&self, s: u32) -> Vec<LabelId> {
        let mut v: Vec<LabelId> = self.trans[s as usize].iter().map(|&(l, _)| l).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Configurations reachable from `root` of `es`, as states. State 0 is
    /// the root.
    pub fn from_structure(
        es: &PrimeEventStructure,
        root: EventSet,
        kind: TransitionKind,
        interner: &mut Interner,
    ) -> (Side, Vec<EventSet>) {
        let mut configs = vec![root];
        configs.extend(es.extensions_from(root));
        let index: HashMap<EventSet, u32> = configs
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, i as u32))
            .collect();
        let mut side = Side::default();
        for &c in &configs {
            side.push_state(es.is_divergent(c));
        }
        let mut labels: HashMap<EventSet, Option<LabelId>> = HashMap::new();
        for (i, &c) in configs.iter().enumerate() {
            let targets: Vec<EventSet> = match kind {
                TransitionKind::Action => es.enabled(c).iter().map(|e| c.with(e)).collect(),
                _ => es.extensions_from(c),
            };
            for next in targets {
                let x = next.difference(c);
                let id = *labels.entry(x).or_insert_with(|| {
                    let u = es.residual_pomset(x);
                    let ok = match kind {
                        TransitionKind::Pomset => true,
                        TransitionKind::Step => u.is_step(),
                        TransitionKind::Action => u.len() == 1,
                    };
                    ok.then(|| interner.intern(&u))
                });
                if let Some(l) = id {
                    side.trans[i].push((l, index[&next]));
                }
            }
            side.trans[i].sort_unstable();
        }
        (side, configs)
    }

    /// Tree-native system: nodes of the tree are states, summands are
    /// transitions. State 0 is the root.
    pub fn from_tree(t: &SyncTree, kind: TransitionKind, interner: &mut Interner) -> Side {
        fn walk(t: &SyncTree, kind: TransitionKind, side: &mut Side, interner: &mut Interner) -> u32 {
            let id = side.push_state(t.is_divergent());
            for (u, child) in t.transitions() {
                let c = walk(child, kind, side, interner);
                let ok = match kind {
                    TransitionKind::Pomset => true,
                    TransitionKind::Step => u.is_step(),
                    TransitionKind::Action => u.len() == 1,
                };
                if ok {
                    let l = interner.intern(u);
                    side.trans[id as usize].push((l, c));
                }
            }
            side.trans[id as usize].sort_unstable();
            id
        }
        let mut side = Side::default();
        walk(t, kind, &mut side, interner);
        side
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Obligation {
    pub label: LabelId,
    pub targets: Vec<u32>,
}

#[derive(Clone, Debug, Default)]
pub(crate) struct GameNode {
    pub left_div: bool,
    pub right_div: bool,
    pub left_initials: Vec<LabelId>,
    pub right_initials: Vec<LabelId>,
    pub forward: Vec<Obligation>,
    pub backward: Vec<Obligation>,
    /// Immediate sub-triples, for downward closure. Always earlier nodes.
    pub subs: Vec<u32>,
}

/// Pair or triple identity of a node, for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum NodeKey {
    Pair(u32, u32),
    Triple(Vec<(u8, u8)>),
}

#[derive(Clone, Debug)]
pub(crate) struct Game {
    pub nodes: Vec<GameNode>,
    pub keys: Vec<NodeKey>,
    pub interner: Interner,
    pub hereditary: bool,
}

/// Whether the backward clause is guarded by left convergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Mode {
    Bisim,
    Prebisim,
}

impl Game {
    /// Pair game over the reachable part of `left × right`, rooted at node 0.
    pub fn pairs(left: &Side, lroot: u32, right: &Side, rroot: u32, interner: Interner) -> Game {
        let mut index: HashMap<(u32, u32), u32> = HashMap::new();
        let mut keys = vec![NodeKey::Pair(lroot, rroot)];
        let mut nodes: Vec<GameNode> = Vec::new();
        index.insert((lroot, rroot), 0);
        let mut queue = VecDeque::from([(lroot, rroot)]);
        while let Some((p, q)) = queue.pop_front() {
            let mut node_of = |a: u32, b: u32, queue: &mut VecDeque<(u32, u32)>| {
                let next = index.len() as u32;
                *index.entry((a, b)).or_insert_with(|| {
                    keys.push(NodeKey::Pair(a, b));
                    queue.push_back((a, b));
                    next
                })
            };
            let mut node = GameNode {
                left_div: left.divergent[p as usize],
                right_div: right.divergent[q as usize],
                left_initials: left.initials(p),
                right_initials: right.initials(q),
                ..GameNode::default()
            };
            for &(l, p2) in &left.trans[p as usize] {
                let targets = right.trans[q as usize]
                    .iter()
                    .filter(|&&(m, _)| m == l)
                    .map(|&(_, q2)| node_of(p2, q2, &mut queue))
                    .collect();
                node.forward.push(Obligation { label: l, targets });
            }
            for &(l, q2) in &right.trans[q as usize] {
                let targets = left.trans[p as usize]
                    .iter()
                    .filter(|&&(m, _)| m == l)
                    .map(|&(_, p2)| node_of(p2, q2, &mut queue))
                    .collect();
                node.backward.push(Obligation { label: l, targets });
            }
            nodes.push(node);
        }
        Game {
            nodes,
            keys,
            interner,
            hereditary: false,
        }
    }

    /// Posetal-triple game between the empty configurations of two
    /// structures. Nodes are discovered breadth first, so node order is by
    /// triple size. Sub-triple links are always recorded; `hereditary`
    /// decides whether the engines use them.
    pub fn triples(a: &PrimeEventStructure, b: &PrimeEventStructure, hereditary: bool) -> Game {
        let mut interner = Interner::default();
        let mut index: HashMap<Vec<(u8, u8)>, u32> = HashMap::new();
        let mut keys: Vec<NodeKey> = Vec::new();
        let mut nodes: Vec<GameNode> = Vec::new();
        let root: Vec<(u8, u8)> = Vec::new();
        index.insert(root.clone(), 0);
        keys.push(NodeKey::Triple(root.clone()));
        let mut queue = VecDeque::from([root]);

        let image = |f: &[(u8, u8)], s: EventSet| -> EventSet {
            f.iter()
                .filter(|(x, _)| s.contains(*x as usize))
                .map(|&(_, y)| y as usize)
                .collect()
        };
        let extend = |f: &[(u8, u8)], e: usize, e2: usize| -> Vec<(u8, u8)> {
            let mut g = f.to_vec();
            g.push((e as u8, e2 as u8));
            g.sort_unstable();
            g
        };

        while let Some(f) = queue.pop_front() {
            let c: EventSet = f.iter().map(|&(x, _)| x as usize).collect();
            let d: EventSet = f.iter().map(|&(_, y)| y as usize).collect();
            let en_a = a.enabled(c);
            let en_b = b.enabled(d);
            let mut node_of = |g: Vec<(u8, u8)>, queue: &mut VecDeque<Vec<(u8, u8)>>| {
                let next = index.len() as u32;
                *index.entry(g.clone()).or_insert_with(|| {
                    keys.push(NodeKey::Triple(g.clone()));
                    queue.push_back(g);
                    next
                })
            };
            let matches = |e: usize, e2: usize| {
                a.label(e) == b.label(e2) && image(&f, a.below(e)) == b.below(e2)
            };
            let mut node = GameNode {
                left_div: a.is_divergent(c),
                right_div: b.is_divergent(d),
                ..GameNode::default()
            };
            for e in en_a {
                let l = interner.intern(&Pomset::singleton(a.label(e).clone()));
                node.left_initials.push(l);
                let targets = en_b
                    .iter()
                    .filter(|&e2| matches(e, e2))
                    .map(|e2| node_of(extend(&f, e, e2), &mut queue))
                    .collect();
                node.forward.push(Obligation { label: l, targets });
            }
            for e2 in en_b {
                let l = interner.intern(&Pomset::singleton(b.label(e2).clone()));
                node.right_initials.push(l);
                let targets = en_a
                    .iter()
                    .filter(|&e| matches(e, e2))
                    .map(|e| node_of(extend(&f, e, e2), &mut queue))
                    .collect();
                node.backward.push(Obligation { label: l, targets });
            }
            node.left_initials.sort_unstable();
            node.left_initials.dedup();
            node.right_initials.sort_unstable();
            node.right_initials.dedup();
            nodes.push(node);
        }

        for (i, key) in keys.iter().enumerate() {
            let NodeKey::Triple(f) = key else { unreachable!() };
            let c: EventSet = f.iter().map(|&(x, _)| x as usize).collect();
            let mut subs = Vec::new();
            for (k, &(x, _)) in f.iter().enumerate() {
                let maximal = c.iter().all(|y| !a.below(y).contains(x as usize));
                if maximal {
                    let mut g = f.clone();
                    g.remove(k);
                    subs.push(index[&g]);
                }
            }
            nodes[i].subs = subs;
        }
        Game {
            nodes,
            keys,
            interner,
            hereditary,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn full(&self) -> Vec<bool> {
        vec![true; self.nodes.len()]
    }

    /// Every label that occurs on any move of the game.
    pub fn all_labels(&self) -> Vec<LabelId> {
        (0..self.interner.len() as LabelId).collect()
    }

    fn obligations_met(obls: &[Obligation], rel: &[bool]) -> bool {
        obls.iter()
            .all(|o| o.targets.iter().any(|&t| rel[t as usize]))
    }

    /// One application of the transfer functional at a single node.
    pub fn transfer_at(&self, i: usize, rel: &[bool], mode: Mode) -> bool {
        let n = &self.nodes[i];
        if !Self::obligations_met(&n.forward, rel) {
            return false;
        }
        match mode {
            Mode::Bisim => Self::obligations_met(&n.backward, rel),
            Mode::Prebisim => {
                n.left_div || (!n.right_div && Self::obligations_met(&n.backward, rel))
            }
        }
    }

    /// `F(R)`, followed by downward closure for hereditary games.
    pub fn apply(&self, rel: &[bool], mode: Mode) -> Vec<bool> {
        self.apply_with(rel, mode, self.hereditary)
    }

    pub fn apply_with(&self, rel: &[bool], mode: Mode, hereditary: bool) -> Vec<bool> {
        let out: Vec<bool> = (0..self.len()).map(|i| self.transfer_at(i, rel, mode)).collect();
        if hereditary {
            self.downward_interior(&out)
        } else {
            out
        }
    }

    /// Largest downward closed subset of `rel`.
    pub fn downward_interior(&self, rel: &[bool]) -> Vec<bool> {
        let mut out = rel.to_vec();
        for i in 0..self.len() {
            if out[i] && self.nodes[i].subs.iter().any(|&s| !out[s as usize]) {
                out[i] = false;
            }
        }
        out
    }

    /// Greatest fixpoint by dead-node propagation: a node dies as soon as
    /// one of its active obligations has no live target left.
    pub fn gfp(&self, mode: Mode) -> Vec<bool> {
        let mut rel = self.full();
        loop {
            rel = self.propagate(rel, mode);
            if !self.hereditary {
                return rel;
            }
            let closed = self.downward_interior(&rel);
            if closed == rel {
                return rel;
            }
            rel = closed;
        }
    }

    fn propagate(&self, mut rel: Vec<bool>, mode: Mode) -> Vec<bool> {
        if mode == Mode::Prebisim {
            for (i, n) in self.nodes.iter().enumerate() {
                if !n.left_div && n.right_div {
                    rel[i] = false;
                }
            }
        }
        // Obligations are numbered globally; `live[o]` counts live targets
        // with respect to the snapshot taken here.
        let mut owner: Vec<u32> = Vec::new();
        let mut live: Vec<usize> = Vec::new();
        let mut referrers: Vec<Vec<u32>> = vec![Vec::new(); self.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            let backward_active = mode == Mode::Bisim || !n.left_div;
            let active = n
                .forward
                .iter()
                .chain(n.backward.iter().filter(|_| backward_active));
            for o in active {
                let id = owner.len() as u32;
                owner.push(i as u32);
                live.push(o.targets.iter().filter(|&&t| rel[t as usize]).count());
                for &t in &o.targets {
                    referrers[t as usize].push(id);
                }
            }
        }
        let mut dead: Vec<u32> = Vec::new();
        for (o, &count) in live.iter().enumerate() {
            let own = owner[o] as usize;
            if count == 0 && rel[own] {
                rel[own] = false;
                dead.push(own as u32);
            }
        }
        while let Some(d) = dead.pop() {
            for &o in &referrers[d as usize] {
                live[o as usize] -= 1;
                let own = owner[o as usize] as usize;
                if live[o as usize] == 0 && rel[own] {
                    rel[own] = false;
                    dead.push(own as u32);
                }
            }
        }
        rel
    }

    /// Kleene chain `R₀ = all`, `Rₙ₊₁ = F(Rₙ)`; calls `visit(n, Rₙ)` for
    /// each level until `visit` returns false or the chain stabilises.
    /// Returns the index of the last level produced and whether it was stable.
    pub fn kleene(&self, mode: Mode, mut visit: impl FnMut(usize, &[bool]) -> bool) -> (usize, bool) {
        let mut rel = self.full();
        let mut n = 0;
        loop {
            if !visit(n, &rel) {
                return (n, false);
            }
            let next = self.apply(&rel, mode);
            if next == rel {
                return (n, true);
            }
            rel = next;
            n += 1;
        }
    }

    /// The label of an obligation at `i` that `rel` leaves unmatched.
    pub fn violation(&self, i: usize, rel: &[bool], mode: Mode) -> Option<LabelId> {
        let n = &self.nodes[i];
        let unmet = |obls: &[Obligation]| {
            obls.iter()
                .find(|o| !o.targets.iter().any(|&t| rel[t as usize]))
                .map(|o| o.label)
        };
        if let Some(l) = unmet(&n.forward) {
            return Some(l);
        }
        match mode {
            Mode::Bisim => unmet(&n.backward),
            Mode::Prebisim if n.left_div => None,
            Mode::Prebisim => unmet(&n.backward),
        }
    }
}

/// Restricted label set for the stratified relations.
#[derive(Clone, Debug)]
pub(crate) struct Restriction {
    member: Vec<bool>,
}

impl Restriction {
    pub fn new(game: &Game, pomsets: impl IntoIterator<Item = Pomset>) -> Self {
        let mut member = vec![false; game.interner.len()];
        for u in pomsets {
            if let Some(id) = game.interner.get(&u) {
                member[id as usize] = true;
            }
        }
        Restriction { member }
    }

    pub fn everything(game: &Game) -> Self {
        Restriction {
            member: vec![true; game.interner.len()],
        }
    }

    pub fn contains(&self, l: LabelId) -> bool {
        self.member[l as usize]
    }

    fn covers(&self, ls: &[LabelId]) -> bool {
        ls.iter().all(|&l| self.contains(l))
    }
}

impl Game {
    /// One step of the restricted recursion at node `i`, reading level-n
    /// membership through `prev`.
    pub fn strat_at(&self, i: usize, p: &Restriction, mut prev: impl FnMut(u32) -> bool) -> bool {
        let n = &self.nodes[i];
        for o in &n.forward {
            if p.contains(o.label) && !o.targets.iter().any(|&t| prev(t)) {
                return false;
            }
        }
        let guard = p.covers(&n.left_initials) && !n.left_div;
        if !guard {
            return true;
        }
        if !p.covers(&n.right_initials) || n.right_div {
            return false;
        }
        n.backward
            .iter()
            .filter(|o| p.contains(o.label))
            .all(|o| o.targets.iter().any(|&t| prev(t)))
    }

    /// Whole-space level step of the restricted recursion.
    pub fn strat_step(&self, rel: &[bool], p: &Restriction) -> Vec<bool> {
        let out: Vec<bool> = (0..self.len())
            .map(|i| self.strat_at(i, p, |t| rel[t as usize]))
            .collect();
        if self.hereditary {
            self.downward_interior(&out)
        } else {
            out
        }
    }

    /// Membership of node `i` at level `n`, memoised on `(node, level)`.
    pub fn strat_level(&self, i: usize, n: usize, p: &Restriction, memo: &mut HashMap<(u32, usize), bool>) -> bool {
        if n == 0 {
            return true;
        }
        if let Some(&v) = memo.get(&(i as u32, n)) {
            return v;
        }
        let node = &self.nodes[i];
        let mut ok = true;
        for o in &node.forward {
            if p.contains(o.label)
                && !o.targets.iter().any(|&t| self.strat_level(t as usize, n - 1, p, memo))
            {
                ok = false;
                break;
            }
        }
        if ok && p.covers(&node.left_initials) && !node.left_div {
            ok = p.covers(&node.right_initials)
                && !node.right_div
                && node.backward.iter().filter(|o| p.contains(o.label)).all(|o| {
                    o.targets
                        .iter()
                        .any(|&t| self.strat_level(t as usize, n - 1, p, memo))
                });
        }
        if ok && self.hereditary {
            ok = node
                .subs
                .iter()
                .all(|&s| self.strat_level(s as usize, n, p, memo));
        }
        memo.insert((i as u32, n), ok);
        ok
    }

    /// Restricted chain until it stabilises; returns the limit.
    pub fn strat_limit(&self, p: &Restriction) -> (Vec<bool>, usize) {
        let mut rel = self.full();
        let mut n = 0;
        loop {
            let next = self.strat_step(&rel, p);
            if next == rel {
                return (rel, n);
            }
            rel = next;
            n += 1;
        }
    }
}
