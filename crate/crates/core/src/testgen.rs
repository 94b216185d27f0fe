//! Test trees: bounded enumeration, characteristic and distinguishing trees,
//! and seeded random models.

use std::collections::{BTreeSet, HashMap};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::equiv::Witness;
use crate::estructure::StructureError;
use crate::game::{Interner, Side};
use crate::pomset::{canonicalize, Label, LabelledPoset, Pomset};
use crate::prebisim::{fin_preorder, p_max, prebisim};
use crate::process::{Process, RelationKind, Semantics};
use crate::sync_tree::SyncTree;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestgenError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
}

/// Limits for tree enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeBound {
    pub depth: usize,
    /// Maximum number of pomset summands per node.
    pub width: usize,
    /// Trees tested before giving up.
    pub max_trees: usize,
}

impl Default for TreeBound {
    fn default() -> Self {
        TreeBound {
            depth: 3,
            width: 2,
            max_trees: 20_000,
        }
    }
}

/// Nondecreasing index sequences of length `0..=width` over `0..n`, i.e.
/// multisets of at most `width` elements.
#[derive(Clone, Debug)]
struct Multisets {
    n: usize,
    width: usize,
    next: Option<Vec<usize>>,
}

impl Multisets {
    fn new(n: usize, width: usize) -> Self {
        Multisets {
            n,
            width,
            next: Some(Vec::new()),
        }
    }
}

impl Iterator for Multisets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        match succ.iter().rposition(|&i| i + 1 < self.n) {
            Some(pos) => {
                let v = succ[pos] + 1;
                for x in &mut succ[pos..] {
                    *x = v;
                }
                self.next = Some(succ);
            }
            None if cur.len() < self.width && self.n > 0 => {
                self.next = Some(vec![0; cur.len() + 1]);
            }
            None => {}
        }
        Some(cur)
    }
}

/// Stream of trees whose root summands are drawn from a fixed candidate
/// list; each multiset is yielded without and then with `Ω`.
#[derive(Clone, Debug)]
pub struct TreeStream {
    candidates: Vec<(Pomset, SyncTree)>,
    multisets: Multisets,
    pending: Option<SyncTree>,
}

impl TreeStream {
    fn new(candidates: Vec<(Pomset, SyncTree)>, width: usize) -> Self {
        TreeStream {
            multisets: Multisets::new(candidates.len(), width),
            candidates,
            pending: None,
        }
    }
}

impl Iterator for TreeStream {
    type Item = SyncTree;

    fn next(&mut self) -> Option<SyncTree> {
        if let Some(t) = self.pending.take() {
            return Some(t);
        }
        let idx = self.multisets.next()?;
        let summands = idx.iter().map(|&i| self.candidates[i].clone()).collect();
        let t = SyncTree::new(summands, false).expect("alphabet pomsets are nonempty");
        self.pending = Some(t.with_omega());
        Some(t)
    }
}

/// Every tree over `alphabet` with depth at most `depth` and at most `width`
/// summands per node, each exactly once up to summand order.
pub fn enumerate_trees(alphabet: &BTreeSet<Pomset>, depth: usize, width: usize) -> TreeStream {
    let alphabet: Vec<&Pomset> = alphabet.iter().filter(|u| !u.is_empty()).collect();
    let mut below = vec![SyncTree::zero(), SyncTree::omega()];
    for _ in 1..depth {
        below = TreeStream::new(candidates(&alphabet, &below), width).collect();
    }
    let cands = if depth == 0 {
        Vec::new()
    } else {
        candidates(&alphabet, &below)
    };
    TreeStream::new(cands, width)
}

fn candidates(alphabet: &[&Pomset], children: &[SyncTree]) -> Vec<(Pomset, SyncTree)> {
    alphabet
        .iter()
        .flat_map(|u| children.iter().map(move |t| ((*u).clone(), t.clone())))
        .collect()
}

/// Closed form of the number of trees [`enumerate_trees`] yields.
pub fn tree_count(alphabet_size: usize, depth: usize, width: usize) -> u128 {
    let multisets = |m: u128| -> u128 {
        // Σ_{j ≤ width} C(m + j − 1, j)
        let mut total = 0u128;
        let mut term = 1u128;
        total += term;
        for j in 1..=width as u128 {
            term = term * (m + j - 1) / j;
            total += term;
        }
        total
    };
    let mut count = 2u128;
    for _ in 0..depth {
        count = 2 * multisets(alphabet_size as u128 * count);
    }
    count
}

/// Whether the tree is below `q`, reading the tree with `semantics`.
pub fn tree_below(t: &SyncTree, q: &Process, kind: RelationKind, semantics: Semantics) -> Result<bool, TestgenError> {
    let tp = Process::from_tree(t, semantics)?;
    Ok(prebisim(&tp, q, kind).related)
}

/// Result of a bounded search for a tree below `p` but not below `q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Search {
    Found { tree: SyncTree },
    /// `complete` tells whether every candidate within the bound was tried.
    NotFound { tested: usize, complete: bool },
}

/// Trees within `bound` whose every prefix path can be followed by `p`, by
/// increasing depth; each is tested against both processes.
pub fn search_distinguishing(
    p: &Process,
    q: &Process,
    kind: RelationKind,
    bound: &TreeBound,
) -> Result<Search, TestgenError> {
    let mut interner = Interner::default();
    let side = p.side(kind.transitions(), &mut interner);
    let mut guide = Guide {
        side: &side,
        interner: &interner,
        width: bound.width,
        budget: bound.max_trees,
        complete: true,
        memo: HashMap::new(),
    };
    let semantics = p.semantics();
    let mut tested = 0;
    for d in 0..=bound.depth {
        let trees = guide.trees(&BTreeSet::from([0]), d);
        for t in trees.iter().filter(|t| d == 0 || t.depth() == d) {
            if tested >= bound.max_trees {
                return Ok(Search::NotFound { tested, complete: false });
            }
            tested += 1;
            if tree_below(t, p, kind, semantics)? && !tree_below(t, q, kind, semantics)? {
                return Ok(Search::Found { tree: t.clone() });
            }
        }
    }
    Ok(Search::NotFound {
        tested,
        complete: guide.complete,
    })
}

struct Guide<'a> {
    side: &'a Side,
    interner: &'a Interner,
    width: usize,
    budget: usize,
    complete: bool,
    memo: HashMap<(BTreeSet<u32>, usize), Vec<SyncTree>>,
}

impl Guide<'_> {
    /// Trees of depth at most `d` all of whose paths some state in `states`
    /// can follow.
    fn trees(&mut self, states: &BTreeSet<u32>, d: usize) -> Vec<SyncTree> {
        if d == 0 {
            return vec![SyncTree::zero(), SyncTree::omega()];
        }
        let key = (states.clone(), d);
        if let Some(v) = self.memo.get(&key) {
            return v.clone();
        }
        let mut next: BTreeSet<(u32, BTreeSet<u32>)> = BTreeSet::new();
        let mut by_label: HashMap<u32, BTreeSet<u32>> = HashMap::new();
        for &s in states {
            for &(l, t) in &self.side.trans[s as usize] {
                by_label.entry(l).or_default().insert(t);
            }
        }
        for (l, ts) in by_label {
            next.insert((l, ts));
        }
        let mut cands = Vec::new();
        for (l, ts) in &next {
            let u = self.interner.label(*l).clone();
            for child in self.trees(ts, d - 1) {
                cands.push((u.clone(), child));
            }
        }
        let mut out = Vec::new();
        for t in TreeStream::new(cands, self.width) {
            if out.len() >= self.budget {
                self.complete = false;
                break;
            }
            out.push(t);
        }
        self.memo.insert(key, out.clone());
        out
    }
}

/// The tree that is below exactly the processes `p` is related to at level
/// `n` of the restricted chain: every `restriction` move of `p` as a summand
/// with its level `n − 1` tree, plus `Ω` when `p` diverges or has a move
/// outside `restriction`.
pub fn characteristic_tree(p: &Process, restriction: &BTreeSet<Pomset>, n: usize, kind: RelationKind) -> SyncTree {
    let mut interner = Interner::default();
    let side = p.side(kind.transitions(), &mut interner);
    let allowed: Vec<bool> = (0..interner.len() as u32)
        .map(|l| restriction.contains(interner.label(l)))
        .collect();
    let mut memo = HashMap::new();
    characteristic(&side, &interner, &allowed, 0, n, &mut memo)
}

fn characteristic(
    side: &Side,
    interner: &Interner,
    allowed: &[bool],
    s: u32,
    n: usize,
    memo: &mut HashMap<(u32, usize), SyncTree>,
) -> SyncTree {
    if n == 0 {
        return SyncTree::omega();
    }
    if let Some(t) = memo.get(&(s, n)) {
        return t.clone();
    }
    let moves = &side.trans[s as usize];
    let mut summands: Vec<(Pomset, SyncTree)> = moves
        .iter()
        .filter(|&&(l, _)| allowed[l as usize])
        .map(|&(l, t)| {
            let child = characteristic(side, interner, allowed, t, n - 1, memo);
            (interner.label(l).clone(), child)
        })
        .collect();
    summands.sort();
    summands.dedup();
    let open = side.divergent[s as usize] || moves.iter().any(|&(l, _)| !allowed[l as usize]);
    let t = SyncTree::new(summands, open).expect("transition labels are nonempty");
    memo.insert((s, n), t.clone());
    t
}

/// A tree below `p` but not below `q`, verified before it is returned;
/// `None` when the finitary preorder holds. The characteristic tree at the
/// failing level is tried first, then the tree of `p` itself.
pub fn distinguishing_tree(p: &Process, q: &Process, kind: RelationKind) -> Result<Option<SyncTree>, TestgenError> {
    let n = match fin_preorder(p, q, kind).witness {
        None => return Ok(None),
        Some(Witness::Level(n)) => n,
        Some(other) => {
            return Err(TestgenError::Inconsistent(format!(
                "unexpected {} witness from the restricted chain",
                other.kind()
            )))
        }
    };
    let semantics = p.semantics();
    let verifies = |t: &SyncTree| -> Result<bool, TestgenError> {
        Ok(tree_below(t, p, kind, semantics)? && !tree_below(t, q, kind, semantics)?)
    };
    let chi = characteristic_tree(p, &p_max(p, q, kind), n, kind);
    if verifies(&chi)? {
        return Ok(Some(chi));
    }
    if let Some(top) = p.as_tree() {
        if verifies(&top)? {
            return Ok(Some(top));
        }
    }
    Err(TestgenError::Inconsistent(format!(
        "no verified distinguishing tree at level {n}"
    )))
}

/// Longest transition path of either process, plus one: enumeration at
/// this depth covers every tree shape the processes can tell apart.
pub fn certified_depth(p: &Process, q: &Process, kind: RelationKind) -> usize {
    let mut interner = Interner::default();
    let longest = |side: &Side| -> usize {
        let mut memo = vec![None; side.trans.len()];
        fn go(side: &Side, s: usize, memo: &mut Vec<Option<usize>>) -> usize {
            if let Some(v) = memo[s] {
                return v;
            }
            let v = side.trans[s]
                .iter()
                .map(|&(_, t)| 1 + go(side, t as usize, memo))
                .max()
                .unwrap_or(0);
            memo[s] = Some(v);
            v
        }
        go(side, 0, &mut memo)
    };
    let a = longest(&p.side(kind.transitions(), &mut interner));
    let b = longest(&q.side(kind.transitions(), &mut interner));
    a.max(b) + 1
}

/// Parameters for random trees.
#[derive(Clone, Debug)]
pub struct RandomTreeParams {
    /// Maximum number of nodes.
    pub budget: usize,
    pub alphabet: Vec<Label>,
    /// Probability that a node carries `Ω`.
    pub divergence: f64,
}

/// A random tree from `seed`, with at most `budget` nodes. The same seed and
/// parameters always give the same tree.
pub fn random_tree(seed: u64, params: &RandomTreeParams) -> SyncTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_node(&mut rng, params.budget.max(1), params)
}

fn random_node(rng: &mut ChaCha8Rng, budget: usize, params: &RandomTreeParams) -> SyncTree {
    let divergent = rng.gen_bool(params.divergence.clamp(0.0, 1.0));
    let mut remaining = budget - 1;
    let mut summands = Vec::new();
    if !params.alphabet.is_empty() {
        let wanted = rng.gen_range(0..=remaining.min(3));
        for i in 0..wanted {
            if remaining == 0 {
                break;
            }
            let share = if i + 1 == wanted {
                remaining
            } else {
                rng.gen_range(1..=remaining)
            };
            remaining -= share;
            let u = random_prefix(rng, &params.alphabet);
            summands.push((u, random_node(rng, share, params)));
        }
    }
    SyncTree::new(summands, divergent).expect("random prefixes are nonempty")
}

fn random_prefix(rng: &mut ChaCha8Rng, alphabet: &[Label]) -> Pomset {
    let pick = |rng: &mut ChaCha8Rng| alphabet[rng.gen_range(0..alphabet.len())].clone();
    if rng.gen_bool(0.7) {
        return Pomset::singleton(pick(rng));
    }
    let labels = vec![pick(rng), pick(rng)];
    let pairs: &[(usize, usize)] = if rng.gen_bool(0.5) { &[(0, 1)] } else { &[] };
    canonicalize(&LabelledPoset::from_order(labels, pairs).expect("two-event orders are valid"))
}

/// `count` random trees with at most `max_events` events each, drawn from
/// consecutive seeds starting at `seed`.
pub fn random_corpus(seed: u64, count: usize, max_events: usize, params: &RandomTreeParams) -> Vec<SyncTree> {
    let mut out = Vec::with_capacity(count);
    let mut s = seed;
    while out.len() < count {
        let t = random_tree(s, params);
        s = s.wrapping_add(1);
        if t.event_count() <= max_events {
            out.push(t);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prebisim::{strat, Level, StratParams};

    fn act(s: &str) -> Pomset {
        Pomset::singleton(Label::new(s))
    }

    fn pre(u: Pomset, t: SyncTree) -> SyncTree {
        SyncTree::prefix(u, t).unwrap()
    }

    fn params() -> RandomTreeParams {
        RandomTreeParams {
            budget: 5,
            alphabet: vec![Label::new("a"), Label::new("b")],
            divergence: 0.25,
        }
    }

    #[test]
    fn enumerate_small_cases() {
        let none: BTreeSet<Pomset> = BTreeSet::new();
        let got: Vec<String> = enumerate_trees(&none, 3, 2).map(|t| t.to_string()).collect();
        assert_eq!(got, ["0", "W"]);

        let a = BTreeSet::from([act("a")]);
        let got: BTreeSet<String> = enumerate_trees(&a, 1, 1).map(|t| t.to_string()).collect();
        let want: BTreeSet<String> = ["0", "W", "a:0", "a:W", "a:0 + W", "a:W + W"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn enumerate_count_matches_closed_form() {
        for k in 0..3usize {
            let alphabet: BTreeSet<Pomset> = ["a", "b", "c"][..k].iter().map(|s| act(s)).collect();
            for d in 0..3 {
                for w in 0..3 {
                    if tree_count(k, d, w) > 50_000 {
                        continue;
                    }
                    let trees: Vec<SyncTree> = enumerate_trees(&alphabet, d, w).collect();
                    assert_eq!(trees.len() as u128, tree_count(k, d, w), "k={k} d={d} w={w}");
                    let distinct: BTreeSet<&SyncTree> = trees.iter().collect();
                    assert_eq!(distinct.len(), trees.len());
                    assert!(trees.iter().all(|t| t.depth() <= d && t.summands().len() <= w));
                }
            }
        }
        // count(d) = 2·(1 + count(d − 1)) for one letter and width one
        for d in 1..6 {
            assert_eq!(tree_count(1, d, 1), 2 * (1 + tree_count(1, d - 1, 1)));
        }
    }

    #[test]
    fn characteristic_small_cases() {
        let z = Process::compile(&SyncTree::zero()).unwrap();
        let empty = BTreeSet::new();
        assert_eq!(characteristic_tree(&z, &empty, 0, RelationKind::Pomset), SyncTree::omega());
        for n in 1..4 {
            assert_eq!(characteristic_tree(&z, &empty, n, RelationKind::Pomset), SyncTree::zero());
        }
    }

    #[test]
    fn characteristic_contract_tree_native() {
        let corpus = random_corpus(7, 25, 5, &params());
        for kind in [RelationKind::Pomset, RelationKind::Step] {
            for t in &corpus {
                let p = Process::tree_native(t.clone()).unwrap();
                for u in &corpus {
                    let q = Process::tree_native(u.clone()).unwrap();
                    let restriction = p_max(&p, &q, kind);
                    for n in 0..4 {
                        let chi = characteristic_tree(&p, &restriction, n, kind);
                        let chi_p = Process::tree_native(chi.clone()).unwrap();
                        assert!(prebisim(&chi_p, &p, kind).related, "{chi} vs {t}");
                        let params = StratParams {
                            restriction: restriction.clone(),
                            level: Level::Finite(n),
                        };
                        assert_eq!(
                            prebisim(&chi_p, &q, kind).related,
                            strat(&p, &q, kind, &params),
                            "{kind} n={n} p={t} q={u} chi={chi}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn distinguishing_examples() {
        let a0 = pre(act("a"), SyncTree::zero());
        let p = Process::compile(&a0).unwrap();
        assert_eq!(distinguishing_tree(&p, &p, RelationKind::Pomset).unwrap(), None);
        let q = Process::compile(&a0.with_omega()).unwrap();
        let t = distinguishing_tree(&p, &q, RelationKind::Pomset).unwrap().unwrap();
        assert!(tree_below(&t, &p, RelationKind::Pomset, Semantics::EventStructure).unwrap());
        assert!(!tree_below(&t, &q, RelationKind::Pomset, Semantics::EventStructure).unwrap());

        let step = Pomset::step(vec![Label::new("a"), Label::new("b")]).unwrap();
        let conc = Process::compile(&pre(step.clone(), SyncTree::zero())).unwrap();
        let inter = Process::compile(
            &pre(act("a"), pre(act("b"), SyncTree::zero())).plus(&pre(act("b"), pre(act("a"), SyncTree::zero()))),
        )
        .unwrap();
        let t = distinguishing_tree(&conc, &inter, RelationKind::Step).unwrap().unwrap();
        assert!(t.prefixes().contains(&step), "{t}");
    }

    #[test]
    fn random_tree_is_deterministic_and_bounded() {
        let ps = params();
        for seed in 0..50 {
            let t = random_tree(seed, &ps);
            assert_eq!(t.to_string(), random_tree(seed, &ps).to_string());
            assert!(t.size() <= ps.budget);
        }
        let one = RandomTreeParams { budget: 1, ..params() };
        for seed in 0..50 {
            let t = random_tree(seed, &one);
            assert!(t.summands().is_empty());
        }
    }

    #[test]
    fn search_finds_small_witness() {
        let a0 = pre(act("a"), SyncTree::zero());
        let p = Process::compile(&a0).unwrap();
        let q = Process::compile(&a0.with_omega()).unwrap();
        match search_distinguishing(&p, &q, RelationKind::Pomset, &TreeBound::default()).unwrap() {
            Search::Found { tree } => assert_eq!(tree.to_string(), "a:0"),
            other => panic!("{other:?}"),
        }
    }
}
