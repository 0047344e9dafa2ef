//! Tuples of handed blocks, their equivalence classes and the interval
//! combinatorics of ambidextrous sub-strings.
//!
//! A tuple in `T^(n,k)` cuts a length-`k` string into handed blocks of length
//! at most `n`, such that no two neighbours that would still fit into one
//! block compose to a handed string. Two tuples are equivalent when they
//! concatenate to the same string; `canonical_tuple` picks one representative
//! per class by greedy merging.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signature::{classify, compose, enumerate_strings, is_handed, Handedness, SignatureString};

/// Upper bound on the total length for tuple enumeration.
pub const MAX_TUPLE_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Tuple {
    blocks: Vec<SignatureString>,
    max_block: usize,
}

impl Tuple {
    /// Validates block handedness, block lengths and the adjacency rule.
    pub fn new(blocks: Vec<SignatureString>, max_block: usize) -> Result<Self> {
        if max_block == 0 {
            return Err(Error::domain("maximal block length must be >= 1"));
        }
        if blocks.is_empty() {
            return Err(Error::domain("a tuple needs at least one block"));
        }
        for b in &blocks {
            if b.len() > max_block {
                return Err(Error::domain(format!(
                    "block `{b}` longer than the maximal block length {max_block}"
                )));
            }
            if !is_handed(b) {
                return Err(Error::domain(format!("block `{b}` is not handed")));
            }
        }
        for w in blocks.windows(2) {
            if w[0].len() + w[1].len() <= max_block && is_handed(&compose(&w[0], &w[1])) {
                return Err(Error::domain(format!(
                    "adjacent blocks `{}` and `{}` compose to a handed block of admissible length",
                    w[0], w[1]
                )));
            }
        }
        Ok(Self { blocks, max_block })
    }

    pub fn blocks(&self) -> &[SignatureString] {
        &self.blocks
    }

    pub fn max_block(&self) -> usize {
        self.max_block
    }

    pub fn total_length(&self) -> usize {
        self.blocks.iter().map(SignatureString::len).sum()
    }

    pub fn block_lengths(&self) -> Vec<usize> {
        self.blocks.iter().map(SignatureString::len).collect()
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

impl Tuple {
    /// Parses the `;`-separated block form with an explicit maximal block length.
    pub fn parse(text: &str, max_block: usize) -> Result<Self> {
        let blocks = text
            .split(';')
            .map(SignatureString::from_str)
            .collect::<Result<Vec<_>>>()?;
        Tuple::new(blocks, max_block)
    }
}

/// Start, end and ambidextrous markers of a tuple.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleMarkers {
    /// Start indices of right-handed blocks.
    pub b: BTreeSet<usize>,
    /// End indices of left-handed blocks.
    pub e: BTreeSet<usize>,
    /// `(start, end)` of ambidextrous blocks.
    pub a: BTreeSet<(usize, usize)>,
    /// `b(i) = j_1 + ... + j_{i-1} + 1` per block.
    pub starts: Vec<usize>,
    /// `e(i) = j_1 + ... + j_i` per block.
    pub ends: Vec<usize>,
    /// The mirrored start formula `k - (j_1 + ... + j_i) + 1`, kept for comparison only.
    pub mirrored_starts: Vec<usize>,
}

/// Machine-readable view of a tuple for reports.
#[derive(Debug, Clone, Serialize)]
pub struct TupleReport {
    pub text: String,
    pub blocks: Vec<String>,
    pub handedness: Vec<Handedness>,
    pub markers: TupleMarkers,
}

impl TupleReport {
    pub fn new(t: &Tuple) -> Self {
        Self {
            text: t.to_string(),
            blocks: t.blocks.iter().map(ToString::to_string).collect(),
            handedness: t.blocks.iter().map(classify).collect(),
            markers: markers(t),
        }
    }
}

fn handed_by_length(n: usize) -> Result<Vec<Vec<SignatureString>>> {
    let mut out = vec![Vec::new()];
    for len in 1..=n {
        out.push(
            enumerate_strings(len, None)?
                .into_iter()
                .filter(is_handed)
                .collect(),
        );
    }
    Ok(out)
}

/// Every element of `T^(n,k)` exactly once, ordered by depth-first block choice
/// (shorter first blocks first, then lexicographically).
pub fn enumerate_tuples(n: usize, k: usize) -> Result<Vec<Tuple>> {
    if n == 0 || k == 0 {
        return Err(Error::domain("tuple enumeration needs n >= 1 and k >= 1"));
    }
    if k > MAX_TUPLE_LENGTH {
        return Err(Error::BudgetExceeded {
            what: "tuple enumeration length",
            limit: MAX_TUPLE_LENGTH,
            requested: k,
        });
    }
    let n_eff = n.min(k);
    let handed = handed_by_length(n_eff)?;
    let mut out = Vec::new();
    let mut current: Vec<SignatureString> = Vec::new();
    fill_tuples(&handed, n, n_eff, k, &mut current, &mut out);
    Ok(out)
}

fn fill_tuples(
    handed: &[Vec<SignatureString>],
    n: usize,
    n_eff: usize,
    remaining: usize,
    current: &mut Vec<SignatureString>,
    out: &mut Vec<Tuple>,
) {
    if remaining == 0 {
        out.push(Tuple {
            blocks: current.clone(),
            max_block: n,
        });
        return;
    }
    for len in 1..=n_eff.min(remaining) {
        for block in &handed[len] {
            if let Some(prev) = current.last() {
                if prev.len() + len <= n && is_handed(&compose(prev, block)) {
                    continue;
                }
            }
            current.push(block.clone());
            fill_tuples(handed, n, n_eff, remaining - len, current, out);
            current.pop();
        }
    }
}

/// Concatenation of the blocks.
pub fn tuple_to_string(t: &Tuple) -> SignatureString {
    t.blocks
        .iter()
        .skip(1)
        .fold(t.blocks[0].clone(), |acc, b| compose(&acc, b))
}

pub fn equivalent(t1: &Tuple, t2: &Tuple) -> bool {
    tuple_to_string(t1) == tuple_to_string(t2)
}

/// Representative of the class of `s` in `T^(n,k)`: start from singletons and
/// merge the leftmost mergeable neighbours, restarting the scan after each merge.
pub fn canonical_tuple(s: &SignatureString, n: usize) -> Result<Tuple> {
    if n == 0 {
        return Err(Error::domain("maximal block length must be >= 1"));
    }
    let mut blocks: Vec<SignatureString> = s
        .entries()
        .iter()
        .map(|&x| SignatureString::single(x))
        .collect();
    'scan: loop {
        for i in 0..blocks.len().saturating_sub(1) {
            if blocks[i].len() + blocks[i + 1].len() > n {
                continue;
            }
            let merged = compose(&blocks[i], &blocks[i + 1]);
            if is_handed(&merged) {
                blocks[i] = merged;
                blocks.remove(i + 1);
                continue 'scan;
            }
        }
        break;
    }
    Ok(Tuple { blocks, max_block: n })
}

/// Every terminal tuple reachable by merging neighbours in any order. Used to
/// confirm that the merge order does not change the class.
pub fn all_merge_results(s: &SignatureString, n: usize) -> Vec<Tuple> {
    fn go(blocks: Vec<SignatureString>, n: usize, seen: &mut BTreeSet<String>, out: &mut Vec<Tuple>) {
        let key = blocks
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(";");
        if !seen.insert(key) {
            return;
        }
        let mut terminal = true;
        for i in 0..blocks.len().saturating_sub(1) {
            if blocks[i].len() + blocks[i + 1].len() > n {
                continue;
            }
            let merged = compose(&blocks[i], &blocks[i + 1]);
            if is_handed(&merged) {
                terminal = false;
                let mut next = blocks.clone();
                next[i] = merged;
                next.remove(i + 1);
                go(next, n, seen, out);
            }
        }
        if terminal {
            out.push(Tuple { blocks, max_block: n });
        }
    }
    let start = s
        .entries()
        .iter()
        .map(|&x| SignatureString::single(x))
        .collect();
    let mut out = Vec::new();
    go(start, n, &mut BTreeSet::new(), &mut out);
    out
}

pub fn markers(t: &Tuple) -> TupleMarkers {
    let k = t.total_length();
    let mut m = TupleMarkers {
        b: BTreeSet::new(),
        e: BTreeSet::new(),
        a: BTreeSet::new(),
        starts: Vec::new(),
        ends: Vec::new(),
        mirrored_starts: Vec::new(),
    };
    let mut acc = 0;
    for block in &t.blocks {
        let start = acc + 1;
        acc += block.len();
        let end = acc;
        m.starts.push(start);
        m.ends.push(end);
        m.mirrored_starts.push(k - acc + 1);
        match classify(block) {
            Handedness::RightHanded => {
                m.b.insert(start);
            }
            Handedness::LeftHanded => {
                m.e.insert(end);
            }
            Handedness::Ambidextrous => {
                m.a.insert((start, end));
            }
            Handedness::NotHanded => unreachable!("tuple blocks are handed"),
        }
    }
    m
}

/// All `(j, jp)` with `j < jp` whose sub-string is ambidextrous, sorted.
pub fn ambidextrous_substrings(s: &SignatureString) -> Vec<(usize, usize)> {
    let k = s.len();
    let mut out = Vec::new();
    for j in 1..=k {
        for jp in j + 1..=k {
            let sub = s.slice(j, jp).expect("indices within range");
            if classify(&sub) == Handedness::Ambidextrous {
                out.push((j, jp));
            }
        }
    }
    out
}

/// A collection of pairwise disjoint ambidextrous sub-strings of `base` whose
/// lengths lie in `(n, big_n]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct PSet {
    pub base: SignatureString,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    /// Sorted by left endpoint.
    pub intervals: Vec<(usize, usize)>,
}

/// One complementary interval `(l, lp)`; `lp = l - 1` encodes an empty piece.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub l: usize,
    pub lp: usize,
}

impl Piece {
    pub fn len(&self) -> usize {
        (self.lp + 1).saturating_sub(self.l)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl PSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// The `u + 1` gaps left by the intervals, empty gaps included.
    pub fn complement(&self) -> Vec<Piece> {
        let k = self.base.len();
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut next = 1;
        for &(j, jp) in &self.intervals {
            out.push(Piece { l: next, lp: j - 1 });
            next = jp + 1;
        }
        out.push(Piece { l: next, lp: k });
        out
    }

    /// `self ⪯ u0`: `u0 ⊂ self` and every extra interval has length `self.n + 1`.
    pub fn is_subordinate_to(&self, u0: &PSet) -> bool {
        let own: BTreeSet<_> = self.intervals.iter().copied().collect();
        u0.intervals.iter().all(|iv| own.contains(iv))
            && self
                .intervals
                .iter()
                .filter(|iv| !u0.intervals.contains(iv))
                .all(|&(j, jp)| jp - j + 1 == self.n + 1)
    }
}

fn disjoint(a: (usize, usize), b: (usize, usize)) -> bool {
    a.1 < b.0 || b.1 < a.0
}

/// Every member of `P^(n,N,k)_s`, in include-before-exclude depth-first order
/// over the sorted candidate intervals.
pub fn enumerate_psets(s: &SignatureString, n: usize, big_n: usize) -> Result<Vec<PSet>> {
    if n > big_n {
        return Err(Error::domain(format!("P-sets need n <= N, got n={n}, N={big_n}")));
    }
    let candidates: Vec<(usize, usize)> = ambidextrous_substrings(s)
        .into_iter()
        .filter(|&(j, jp)| {
            let len = jp - j + 1;
            n < len && len <= big_n
        })
        .collect();
    let mut out = Vec::new();
    let mut chosen = Vec::new();
    fn go(
        cands: &[(usize, usize)],
        idx: usize,
        chosen: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if idx == cands.len() {
            out.push(chosen.clone());
            return;
        }
        let c = cands[idx];
        if chosen.iter().all(|&x| disjoint(x, c)) {
            chosen.push(c);
            go(cands, idx + 1, chosen, out);
            chosen.pop();
        }
        go(cands, idx + 1, chosen, out);
    }
    go(&candidates, 0, &mut chosen, &mut out);
    Ok(out
        .into_iter()
        .map(|mut intervals| {
            intervals.sort_unstable();
            PSet {
                base: s.clone(),
                n,
                big_n,
                intervals,
            }
        })
        .collect())
}

/// All `U ∈ P^(n,N,k)_s` with `U ⪯ u0`, where `u0 ∈ P^(n+1,N,k)_s`.
pub fn subordinates(u0: &PSet, n: usize) -> Result<Vec<PSet>> {
    if u0.n != n + 1 {
        return Err(Error::domain(format!(
            "subordination compares level {} with level {n}",
            u0.n
        )));
    }
    Ok(enumerate_psets(&u0.base, n, u0.big_n)?
        .into_iter()
        .filter(|u| u.is_subordinate_to(u0))
        .collect())
}
