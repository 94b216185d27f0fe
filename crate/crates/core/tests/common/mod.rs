#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tcbisim::testgen::{random_corpus, RandomTreeParams};
use tcbisim::{Label, LabelledPoset, Pomset, Process, SyncTree};

pub fn params(budget: usize) -> RandomTreeParams {
    RandomTreeParams {
        budget,
        alphabet: vec![Label::new("a"), Label::new("b")],
        divergence: 0.2,
    }
}

/// Random trees with at most `max_events` events. Every tenth one is `0`
/// or `W`; the rest have at least one event.
pub fn corpus(seed: u64, count: usize, max_events: usize) -> Vec<SyncTree> {
    let mut nonempty = random_corpus(seed, count * 3, max_events, &params(max_events + 1))
        .into_iter()
        .filter(|t| t.event_count() > 0);
    (0..count)
        .map(|i| match i % 20 {
            9 => SyncTree::zero(),
            19 => SyncTree::omega(),
            _ => nonempty.next().expect("enough nonempty trees"),
        })
        .collect()
}

pub fn proc(t: &SyncTree) -> Process {
    Process::compile(t).unwrap()
}

pub fn act(s: &str) -> Pomset {
    Pomset::singleton(Label::new(s))
}

pub fn pre(u: Pomset, t: SyncTree) -> SyncTree {
    SyncTree::prefix(u, t).unwrap()
}

/// Replaces random subtrees by `Ω`, giving a tree that tends to sit below
/// the original.
pub fn prune(t: &SyncTree, rng: &mut ChaCha8Rng) -> SyncTree {
    if rng.gen_bool(0.2) {
        return SyncTree::omega();
    }
    let mut summands = Vec::new();
    for (u, c) in t.summands() {
        if !rng.gen_bool(0.1) {
            summands.push((u.clone(), prune(c, rng)));
        }
    }
    let dropped = !t.summands().is_empty() && rng.gen_bool(0.1);
    SyncTree::new(summands, t.is_divergent() || dropped).unwrap()
}

/// Every strict partial order on `n` points, as predecessor bitmasks.
pub fn all_orders(n: usize) -> Vec<Vec<u8>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut out = Vec::new();
    'masks: for mask in 0u64..(1u64 << pairs.len()) {
        let mut below = vec![0u8; n];
        for (k, &(lo, hi)) in pairs.iter().enumerate() {
            if mask >> k & 1 == 1 {
                below[hi] |= 1 << lo;
            }
        }
        for hi in 0..n {
            for mid in 0..n {
                if below[hi] >> mid & 1 == 1 && (below[mid] >> hi & 1 == 1 || below[mid] & !below[hi] != 0) {
                    continue 'masks;
                }
            }
        }
        out.push(below);
    }
    out
}

pub fn poset(labels: &[&str], below: &[u8]) -> LabelledPoset {
    let mut pairs = Vec::new();
    for (hi, &b) in below.iter().enumerate() {
        for lo in 0..labels.len() {
            if b >> lo & 1 == 1 {
                pairs.push((lo, hi));
            }
        }
    }
    LabelledPoset::from_order(labels.iter().map(|s| Label::new(s)).collect(), &pairs).unwrap()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..n {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// Isomorphism by trying every bijection.
pub fn brute_iso(a: &LabelledPoset, b: &LabelledPoset) -> bool {
    let n = a.len();
    if n != b.len() {
        return false;
    }
    permutations(n).iter().any(|f| {
        (0..n).all(|x| a.label(x) == b.label(f[x]))
            && (0..n).all(|x| (0..n).all(|y| a.less(x, y) == b.less(f[x], f[y])))
    })
}

/// A random strict order on `n` points over the given labels.
pub fn random_poset(rng: &mut ChaCha8Rng, n: usize, alphabet: &[&str], edge: f64) -> LabelledPoset {
    let labels: Vec<Label> = (0..n).map(|_| Label::new(alphabet[rng.gen_range(0..alphabet.len())])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(edge) {
                edges.push((order[i], order[j]));
            }
        }
    }
    LabelledPoset::from_covering(labels, &edges).unwrap()
}

/// The same poset with events renamed by a random permutation.
pub fn shuffled(rng: &mut ChaCha8Rng, a: &LabelledPoset) -> LabelledPoset {
    let n = a.len();
    let mut f: Vec<usize> = (0..n).collect();
    f.shuffle(rng);
    let mut labels = vec![Label::new("x"); n];
    for x in 0..n {
        labels[f[x]] = a.label(x).clone();
    }
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .filter(|&(x, y)| a.less(x, y))
        .map(|(x, y)| (f[x], f[y]))
        .collect();
    LabelledPoset::from_order(labels, &pairs).unwrap()
}

/// All subsets of a small set.
pub fn subsets<T: Clone + Ord>(set: &BTreeSet<T>) -> Vec<BTreeSet<T>> {
    let items: Vec<&T> = set.iter().collect();
    (0u32..1 << items.len())
        .map(|m| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| m >> i & 1 == 1)
                .map(|(_, x)| (*x).clone())
                .collect()
        })
        .collect()
}

/// Pomsets over `{a, b, c}` with at most two events.
pub fn pomset_pool() -> Vec<Pomset> {
    let names = ["a", "b", "c"];
    let mut out: BTreeSet<Pomset> = names.iter().map(|s| act(s)).collect();
    for x in names {
        for y in names {
            let l = vec![Label::new(x), Label::new(y)];
            out.insert(LabelledPoset::from_order(l.clone(), &[]).unwrap().canonicalize());
            out.insert(LabelledPoset::from_order(l, &[(0, 1)]).unwrap().canonicalize());
        }
    }
    out.into_iter().collect()
}
