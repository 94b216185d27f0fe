//! Labelled partial orders and pomsets.
//!
//! A [`LabelledPoset`] is a finite strict partial order over event indices
//! `0..n` with a label on every event. Its order is always stored
//! transitively closed. A [`Pomset`] is the isomorphism class of a labelled
//! poset, represented by a canonical member: two pomsets are equal exactly
//! when their underlying posets are isomorphic.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::bits::{EventSet, MAX_EVENTS};

/// An action label.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label(Arc<str>);

impl Label {
    pub fn new(name: &str) -> Self {
        Label(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::new(s)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PosetError {
    #[error("event {0} is ordered before itself")]
    Reflexive(usize),
    #[error("order relation contains a cycle through event {0}")]
    Cycle(usize),
    #[error("order is not transitively closed: {0} < {1} < {2} but not {0} < {2}")]
    NotTransitive(usize, usize, usize),
    #[error("unknown event {0}")]
    UnknownEvent(usize),
    #[error("{0} events exceed the supported maximum of {MAX_EVENTS}")]
    TooManyEvents(usize),
}

/// A finite labelled strict partial order on events `0..len()`.
///
/// `below[i]` holds the strict predecessors of event `i`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct LabelledPoset {
    labels: Vec<Label>,
    below: Vec<EventSet>,
}

impl LabelledPoset {
    /// The empty poset.
    pub fn empty() -> Self {
        LabelledPoset::default()
    }

    pub fn singleton(label: Label) -> Self {
        LabelledPoset {
            labels: vec![label],
            below: vec![EventSet::EMPTY],
        }
    }

    /// Unordered events, one per label.
    pub fn antichain(labels: Vec<Label>) -> Result<Self, PosetError> {
        check_len(labels.len())?;
        let below = vec![EventSet::EMPTY; labels.len()];
        Ok(LabelledPoset { labels, below })
    }

    /// Builds a poset from covering (or any generating) edges `(lo, hi)`,
    /// taking their transitive closure.
    pub fn from_covering(labels: Vec<Label>, edges: &[(usize, usize)]) -> Result<Self, PosetError> {
        let n = labels.len();
        check_len(n)?;
        let mut below = vec![EventSet::EMPTY; n];
        for &(lo, hi) in edges {
            if lo >= n {
                return Err(PosetError::UnknownEvent(lo));
            }
            if hi >= n {
                return Err(PosetError::UnknownEvent(hi));
            }
            if lo == hi {
                return Err(PosetError::Reflexive(lo));
            }
            below[hi].insert(lo);
        }
        // Warshall closure on predecessor sets.
        for k in 0..n {
            for i in 0..n {
                if below[i].contains(k) {
                    below[i] = below[i].union(below[k]);
                }
            }
        }
        for (i, b) in below.iter().enumerate() {
            if b.contains(i) {
                return Err(PosetError::Cycle(i));
            }
        }
        Ok(LabelledPoset { labels, below })
    }

    /// Builds a poset from an already transitively closed order relation.
    /// Inputs that are reflexive, cyclic or not closed are rejected.
    pub fn from_order(labels: Vec<Label>, pairs: &[(usize, usize)]) -> Result<Self, PosetError> {
        let n = labels.len();
        check_len(n)?;
        let mut below = vec![EventSet::EMPTY; n];
        for &(lo, hi) in pairs {
            if lo >= n {
                return Err(PosetError::UnknownEvent(lo));
            }
            if hi >= n {
                return Err(PosetError::UnknownEvent(hi));
            }
            if lo == hi {
                return Err(PosetError::Reflexive(lo));
            }
            below[hi].insert(lo);
        }
        for hi in 0..n {
            for mid in below[hi] {
                if below[mid].contains(hi) {
                    return Err(PosetError::Cycle(hi));
                }
                for lo in below[mid] {
                    if !below[hi].contains(lo) {
                        return Err(PosetError::NotTransitive(lo, mid, hi));
                    }
                }
            }
        }
        Ok(LabelledPoset { labels, below })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn events(&self) -> EventSet {
        EventSet::full(self.len())
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, e: usize) -> &Label {
        &self.labels[e]
    }

    /// Strict predecessors of `e`.
    pub fn below(&self, e: usize) -> EventSet {
        self.below[e]
    }

    /// Strict successors of `e`.
    pub fn above(&self, e: usize) -> EventSet {
        (0..self.len()).filter(|&j| self.below[j].contains(e)).collect()
    }

    pub fn less(&self, a: usize, b: usize) -> bool {
        self.below[b].contains(a)
    }

    /// All pairs `(lo, hi)` with `lo < hi`.
    pub fn order_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.below
            .iter()
            .enumerate()
            .flat_map(|(hi, b)| b.iter().map(move |lo| (lo, hi)))
    }

    pub fn order_size(&self) -> usize {
        self.below.iter().map(|b| b.len()).sum()
    }

    /// Covering pairs of the order (its Hasse diagram).
    pub fn covering_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for hi in 0..self.len() {
            for lo in self.below[hi] {
                let mid = self.below[hi].intersection(self.above(lo));
                if mid.is_empty() {
                    out.push((lo, hi));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Sub-poset induced by `subset`, renumbered in increasing index order.
    pub fn restrict(&self, subset: EventSet) -> Result<LabelledPoset, PosetError> {
        if let Some(max) = subset.max() {
            if max >= self.len() {
                return Err(PosetError::UnknownEvent(max));
            }
        }
        Ok(self.restrict_unchecked(subset))
    }

    pub(crate) fn restrict_unchecked(&self, subset: EventSet) -> LabelledPoset {
        let kept: Vec<usize> = subset.iter().collect();
        let mut index = [usize::MAX; MAX_EVENTS];
        for (new, &old) in kept.iter().enumerate() {
            index[old] = new;
        }
        let labels = kept.iter().map(|&e| self.labels[e].clone()).collect();
        let below = kept
            .iter()
            .map(|&e| {
                self.below[e]
                    .intersection(subset)
                    .iter()
                    .map(|x| index[x])
                    .collect()
            })
            .collect();
        LabelledPoset { labels, below }
    }

    /// Sequential composition: every event of `self` precedes every event of
    /// `next`. Events of `next` are renumbered after those of `self`.
    pub fn series_compose(&self, next: &LabelledPoset) -> Result<LabelledPoset, PosetError> {
        let n = self.len();
        check_len(n + next.len())?;
        let all_first = EventSet::full(n);
        let mut labels = self.labels.clone();
        labels.extend(next.labels.iter().cloned());
        let mut below = self.below.clone();
        for b in &next.below {
            let shifted = EventSet::from_bits(b.bits() << n);
            below.push(shifted.union(all_first));
        }
        Ok(LabelledPoset { labels, below })
    }

    /// Whether a label- and order-preserving bijection `self -> other` exists.
    pub fn is_isomorphic(&self, other: &LabelledPoset) -> bool {
        if self.len() != other.len() || self.order_size() != other.order_size() {
            return false;
        }
        let mut a = self.labels.clone();
        let mut b = other.labels.clone();
        a.sort();
        b.sort();
        if a != b {
            return false;
        }
        let deg = |p: &LabelledPoset, e: usize| (p.below[e].len(), p.above(e).len());
        let left_deg: Vec<_> = (0..self.len()).map(|e| deg(self, e)).collect();
        let right_deg: Vec<_> = (0..other.len()).map(|e| deg(other, e)).collect();
        let mut map = vec![usize::MAX; self.len()];
        let mut used = EventSet::EMPTY;
        self.extend_iso(other, &left_deg, &right_deg, 0, &mut map, &mut used)
    }

    fn extend_iso(
        &self,
        other: &LabelledPoset,
        left_deg: &[(usize, usize)],
        right_deg: &[(usize, usize)],
        next: usize,
        map: &mut [usize],
        used: &mut EventSet,
    ) -> bool {
        if next == self.len() {
            return true;
        }
        for cand in 0..other.len() {
            if used.contains(cand)
                || self.labels[next] != other.labels[cand]
                || left_deg[next] != right_deg[cand]
            {
                continue;
            }
            let consistent = (0..next).all(|prev| {
                self.less(prev, next) == other.less(map[prev], cand)
                    && self.less(next, prev) == other.less(cand, map[prev])
            });
            if !consistent {
                continue;
            }
            map[next] = cand;
            used.insert(cand);
            if self.extend_iso(other, left_deg, right_deg, next + 1, map, used) {
                return true;
            }
            used.remove(cand);
        }
        false
    }

    /// Applies a permutation: event `order[k]` of `self` becomes event `k`.
    fn permuted(&self, order: &[usize]) -> LabelledPoset {
        let mut pos = [0usize; MAX_EVENTS];
        for (k, &e) in order.iter().enumerate() {
            pos[e] = k;
        }
        let labels = order.iter().map(|&e| self.labels[e].clone()).collect();
        let below = order
            .iter()
            .map(|&e| self.below[e].iter().map(|x| pos[x]).collect())
            .collect();
        LabelledPoset { labels, below }
    }

    pub fn canonicalize(&self) -> Pomset {
        Pomset(canonical_form(self))
    }
}

fn check_len(n: usize) -> Result<(), PosetError> {
    if n > MAX_EVENTS {
        Err(PosetError::TooManyEvents(n))
    } else {
        Ok(())
    }
}

impl fmt::Debug for LabelledPoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "poset{{")?;
        for (i, l) in self.labels.iter().enumerate() {
            write!(f, "{i}:{l};")?;
        }
        for (lo, hi) in self.covering_pairs() {
            write!(f, " {lo}<{hi};")?;
        }
        write!(f, "}}")
    }
}

// Canonical labelling by colour refinement plus individualisation. Cells of
// an ordered partition are split by (cell, predecessor cells, successor
// cells) signatures until stable; ties are broken by trying each member of
// the first non-trivial cell. The smallest resulting permuted poset wins.

type Partition = Vec<Vec<usize>>;

fn canonical_form(p: &LabelledPoset) -> LabelledPoset {
    let n = p.len();
    if n == 0 {
        return LabelledPoset::empty();
    }
    let above: Vec<EventSet> = (0..n).map(|e| p.above(e)).collect();

    let mut by_label: Vec<usize> = (0..n).collect();
    by_label.sort_by(|&a, &b| p.labels[a].cmp(&p.labels[b]));
    let mut initial: Partition = Vec::new();
    for e in by_label {
        match initial.last_mut() {
            Some(cell) if p.labels[cell[0]] == p.labels[e] => cell.push(e),
            _ => initial.push(vec![e]),
        }
    }
    let initial = refine(p, &above, initial);

    let mut best: Option<LabelledPoset> = None;
    search(p, &above, initial, &mut best);
    best.expect("search visits at least one leaf")
}

fn refine(p: &LabelledPoset, above: &[EventSet], mut part: Partition) -> Partition {
    let n = p.len();
    loop {
        let mut cell_of = vec![0usize; n];
        for (ci, cell) in part.iter().enumerate() {
            for &e in cell {
                cell_of[e] = ci;
            }
        }
        let signature = |e: usize| {
            let mut lo: Vec<usize> = p.below[e].iter().map(|x| cell_of[x]).collect();
            let mut hi: Vec<usize> = above[e].iter().map(|x| cell_of[x]).collect();
            lo.sort_unstable();
            hi.sort_unstable();
            (lo, hi)
        };
        let mut next: Partition = Vec::with_capacity(part.len());
        for cell in &part {
            if cell.len() == 1 {
                next.push(cell.clone());
                continue;
            }
            let mut keyed: Vec<_> = cell.iter().map(|&e| (signature(e), e)).collect();
            keyed.sort();
            let mut start = 0;
            for i in 1..=keyed.len() {
                if i == keyed.len() || keyed[i].0 != keyed[start].0 {
                    next.push(keyed[start..i].iter().map(|(_, e)| *e).collect());
                    start = i;
                }
            }
        }
        if next.len() == part.len() {
            return next;
        }
        part = next;
    }
}

fn search(p: &LabelledPoset, above: &[EventSet], part: Partition, best: &mut Option<LabelledPoset>) {
    let Some(target) = part.iter().position(|c| c.len() > 1) else {
        let order: Vec<usize> = part.iter().map(|c| c[0]).collect();
        let candidate = p.permuted(&order);
        if best.as_ref().is_none_or(|b| candidate < *b) {
            *best = Some(candidate);
        }
        return;
    };
    let cell = &part[target];
    let mut tried: Vec<usize> = Vec::new();
    for &v in cell {
        // Swapping twins is an automorphism fixing the partition, so their
        // branches produce the same leaves.
        if tried
            .iter()
            .any(|&u| p.below[u] == p.below[v] && above[u] == above[v])
        {
            continue;
        }
        tried.push(v);
        let mut next = part.clone();
        let rest: Vec<usize> = cell.iter().copied().filter(|&e| e != v).collect();
        next.splice(target..=target, [vec![v], rest]);
        let next = refine(p, above, next);
        search(p, above, next, best);
    }
}

/// An isomorphism class of labelled posets, held as its canonical member.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Pomset(LabelledPoset);

impl Pomset {
    /// The empty pomset ε.
    pub fn empty() -> Self {
        Pomset(LabelledPoset::empty())
    }

    pub fn singleton(label: Label) -> Self {
        Pomset(LabelledPoset::singleton(label))
    }

    /// An unordered pomset (a step) with the given labels.
    pub fn step(labels: Vec<Label>) -> Result<Self, PosetError> {
        Ok(LabelledPoset::antichain(labels)?.canonicalize())
    }

    /// Canonical representative.
    pub fn canon(&self) -> &LabelledPoset {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// A step is a pomset with empty order.
    pub fn is_step(&self) -> bool {
        self.0.order_size() == 0
    }

    /// The label of a single-event pomset.
    pub fn as_action(&self) -> Option<&Label> {
        (self.len() == 1).then(|| self.0.label(0))
    }
}

impl From<Label> for Pomset {
    fn from(l: Label) -> Self {
        Pomset::singleton(l)
    }
}

/// Free-function form of [`LabelledPoset::canonicalize`].
pub fn canonicalize(lp: &LabelledPoset) -> Pomset {
    lp.canonicalize()
}

/// Free-function form of [`LabelledPoset::is_isomorphic`].
pub fn is_isomorphic(u: &LabelledPoset, v: &LabelledPoset) -> bool {
    u.is_isomorphic(v)
}

impl fmt::Display for Pomset {
    /// Writes the pomset in the process-file literal syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.0;
        if p.len() == 1 {
            return write!(f, "{}", p.label(0));
        }
        if self.is_step() {
            write!(f, "{{")?;
            for (i, l) in p.labels().iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{l}")?;
            }
            return write!(f, "}}");
        }
        write!(f, "pomset{{")?;
        for (i, l) in p.labels().iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "e{i}:{l};")?;
        }
        for (lo, hi) in p.covering_pairs() {
            write!(f, " e{lo}<e{hi};")?;
        }
        write!(f, "}}")
    }
}

impl fmt::Debug for Pomset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A finite sequence of pomsets.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PomsetSequence(pub Vec<Pomset>);

impl PomsetSequence {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Label {
        Label::new(s)
    }

    fn chain(labels: &[&str]) -> LabelledPoset {
        let edges: Vec<_> = (1..labels.len()).map(|i| (i - 1, i)).collect();
        LabelledPoset::from_covering(labels.iter().map(|s| l(s)).collect(), &edges).unwrap()
    }

    #[test]
    fn empty_canonicalizes_to_epsilon() {
        assert_eq!(LabelledPoset::empty().canonicalize(), Pomset::empty());
        assert!(Pomset::empty().is_step());
    }

    #[test]
    fn relabelling_events_gives_same_pomset() {
        let u = LabelledPoset::from_covering(vec![l("a"), l("b")], &[(0, 1)]).unwrap();
        let v = LabelledPoset::from_covering(vec![l("b"), l("a")], &[(1, 0)]).unwrap();
        assert_eq!(u.canonicalize(), v.canonicalize());
    }

    #[test]
    fn chain_is_not_antichain() {
        let c = chain(&["a", "b"]);
        let s = LabelledPoset::antichain(vec![l("a"), l("b")]).unwrap();
        assert!(!c.is_isomorphic(&s));
        assert_ne!(c.canonicalize(), s.canonicalize());
        assert!(LabelledPoset::empty().is_isomorphic(&LabelledPoset::empty()));
    }

    #[test]
    fn step_predicate() {
        assert!(Pomset::step(vec![l("a"), l("b")]).unwrap().is_step());
        assert!(!chain(&["a", "b"]).canonicalize().is_step());
    }

    #[test]
    fn invalid_orders_rejected() {
        assert_eq!(
            LabelledPoset::from_covering(vec![l("a")], &[(0, 0)]),
            Err(PosetError::Reflexive(0))
        );
        assert!(matches!(
            LabelledPoset::from_covering(vec![l("a"), l("b")], &[(0, 1), (1, 0)]),
            Err(PosetError::Cycle(_))
        ));
        assert_eq!(
            LabelledPoset::from_order(vec![l("a"), l("b"), l("c")], &[(0, 1), (1, 2)]),
            Err(PosetError::NotTransitive(0, 1, 2))
        );
        assert_eq!(
            LabelledPoset::from_covering(vec![l("a")], &[(0, 3)]),
            Err(PosetError::UnknownEvent(3))
        );
    }

    #[test]
    fn restrict_cases() {
        let c = chain(&["a", "b", "c"]);
        assert!(c.restrict(EventSet::EMPTY).unwrap().is_empty());
        assert_eq!(c.restrict(c.events()).unwrap(), c);
        let ends = c.restrict([0, 2].into_iter().collect()).unwrap();
        assert_eq!(ends, chain(&["a", "c"]));
        assert_eq!(c.restrict(EventSet::singleton(7)), Err(PosetError::UnknownEvent(7)));
    }

    #[test]
    fn series_compose_cases() {
        let a = LabelledPoset::singleton(l("a"));
        let b = LabelledPoset::singleton(l("b"));
        assert_eq!(LabelledPoset::empty().series_compose(&b).unwrap(), b);
        assert_eq!(a.series_compose(&b).unwrap(), chain(&["a", "b"]));
    }

    #[test]
    fn symmetric_posets_canonicalize_quickly() {
        // 12 identical concurrent events; twin pruning keeps this linear.
        let s = LabelledPoset::antichain(vec![l("a"); 12]).unwrap();
        assert!(s.canonicalize().is_step());
        // Two identical 3-chains in parallel.
        let mut two = chain(&["a", "b", "c"]);
        two = LabelledPoset::from_covering(
            [two.labels(), two.labels()].concat(),
            &[(0, 1), (1, 2), (3, 4), (4, 5)],
        )
        .unwrap();
        let swapped = two.permuted(&[3, 4, 5, 0, 1, 2]);
        assert_eq!(two.canonicalize(), swapped.canonicalize());
    }

    #[test]
    fn display_forms() {
        assert_eq!(Pomset::singleton(l("a")).to_string(), "a");
        assert_eq!(Pomset::step(vec![l("b"), l("a")]).unwrap().to_string(), "{a,b}");
        assert_eq!(
            chain(&["a", "b"]).canonicalize().to_string(),
            "pomset{e0:a; e1:b; e0<e1;}"
        );
    }
}
