//! Wick contraction bookkeeping and vacuum diagrams.
//!
//! A pattern records, for a product `O_1 ⋯ O_n` of interaction factors, which
//! operators stay uncontracted and which annihilator at `i` was paired with a
//! creator at `f(i) > i`. Fully contracted patterns evaluated as lattice sums
//! give an operator-free route to the counter-terms that does not touch the
//! Fock-space matrices.
//!
//! Indices are 1-based throughout, like the signature strings they describe.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::KernelSet;
use crate::signature::{classify, split_points, Handedness, Signature, SignatureString};

/// Pattern enumeration grows factorially; beyond this length it is refused.
pub const MAX_PATTERN_LENGTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractionPattern {
    pub n: usize,
    pub j_a: BTreeSet<usize>,
    pub j_astar: BTreeSet<usize>,
    pub j_b: BTreeSet<usize>,
    pub j_bstar: BTreeSet<usize>,
    /// Contracted boson annihilator `i` ↦ creator `f_a(i)`; the keys are `I_a`.
    pub f_a: BTreeMap<usize, usize>,
    /// Contracted fermion annihilator `i` ↦ creator `f_b(i)`; the keys are `I_b`.
    pub f_b: BTreeMap<usize, usize>,
    /// Resolvent slots, a subset of `[1, n-1]`.
    pub slots: BTreeSet<usize>,
    /// Fermion sign relative to the product order `1..n`, see `fermion_word`.
    pub sign: i8,
}

impl ContractionPattern {
    pub fn i_a(&self) -> BTreeSet<usize> {
        self.f_a.keys().copied().collect()
    }

    pub fn i_b(&self) -> BTreeSet<usize> {
        self.f_b.keys().copied().collect()
    }

    pub fn is_fully_contracted(&self) -> bool {
        self.j_a.is_empty() && self.j_astar.is_empty() && self.j_b.is_empty() && self.j_bstar.is_empty()
    }

    /// Reads the signature back off the sets: index `i` carries a boson
    /// annihilator iff `i ∈ J_a ∪ I_a`, a fermion annihilator iff `i ∈ J_b ∪ I_b`.
    pub fn signature(&self) -> Result<SignatureString> {
        self.check()?;
        let entries = (1..=self.n)
            .map(|i| {
                Signature::from_flags(
                    self.j_a.contains(&i) || self.f_a.contains_key(&i),
                    self.j_b.contains(&i) || self.f_b.contains_key(&i),
                )
            })
            .collect();
        SignatureString::new(entries)
    }

    /// Checks disjointness, `f(i) > i`, injectivity and that every index is
    /// covered exactly once per species.
    pub fn check(&self) -> Result<()> {
        for (species, j, js, f) in [
            ("boson", &self.j_a, &self.j_astar, &self.f_a),
            ("fermion", &self.j_b, &self.j_bstar, &self.f_b),
        ] {
            let mut seen = vec![0u8; self.n + 1];
            let mut mark = |i: usize| -> Result<()> {
                if i == 0 || i > self.n {
                    return Err(Error::domain(format!("{species} index {i} outside [1, {}]", self.n)));
                }
                seen[i] += 1;
                Ok(())
            };
            for &i in j.iter().chain(js) {
                mark(i)?;
            }
            for (&i, &fi) in f {
                if fi <= i {
                    return Err(Error::domain(format!("{species} pairing {i} -> {fi} is not forward")));
                }
                mark(i)?;
                mark(fi)?;
            }
            if seen[1..].iter().any(|&c| c != 1) {
                return Err(Error::domain(format!("{species} sets do not partition [1, {}]", self.n)));
            }
        }
        if self.slots.iter().any(|&i| i == 0 || i >= self.n) {
            return Err(Error::domain("resolvent slot outside [1, n-1]"));
        }
        Ok(())
    }

    /// Positions of the fermion operators in the order of the normal-ordered
    /// term: contracted pairs `(i, f_b(i))` by ascending `i`, then uncontracted
    /// creators, then uncontracted annihilators.
    pub fn fermion_word(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.n);
        for (&i, &fi) in &self.f_b {
            w.push(i);
            w.push(fi);
        }
        w.extend(self.j_bstar.iter().copied());
        w.extend(self.j_b.iter().copied());
        w
    }

    /// `C_i`: uncontracted annihilators at `j ≤ i` and creators at `j > i`.
    pub fn c_terms(&self, i: usize) -> Vec<LineRef> {
        let mut out = Vec::new();
        out.extend(self.j_a.iter().filter(|&&j| j <= i).map(|&j| LineRef::boson(j)));
        out.extend(self.j_b.iter().filter(|&&j| j <= i).map(|&j| LineRef::fermion(j)));
        out.extend(self.j_astar.iter().filter(|&&j| j > i).map(|&j| LineRef::boson(j)));
        out.extend(self.j_bstar.iter().filter(|&&j| j > i).map(|&j| LineRef::fermion(j)));
        out
    }

    /// `R_i`: contracted lines `j ≤ i < f(j)` crossing slot `i`.
    pub fn r_terms(&self, i: usize) -> Vec<LineRef> {
        let mut out = Vec::new();
        out.extend(
            self.f_a
                .iter()
                .filter(|(&j, &fj)| j <= i && i < fj)
                .map(|(&j, _)| LineRef::boson(j)),
        );
        out.extend(
            self.f_b
                .iter()
                .filter(|(&j, &fj)| j <= i && i < fj)
                .map(|(&j, _)| LineRef::fermion(j)),
        );
        out
    }
}

/// Parity of a sequence of distinct integers, as `±1`.
fn parity(seq: &[usize]) -> i8 {
    let mut inversions = 0usize;
    for a in 0..seq.len() {
        for b in a + 1..seq.len() {
            if seq[a] > seq[b] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Parity of the permutation taking sequence `from` to sequence `to`.
fn relative_parity(from: &[usize], to: &[usize]) -> i8 {
    let rank: HashMap<usize, usize> = from.iter().enumerate().map(|(r, &x)| (x, r)).collect();
    let mapped: Vec<usize> = to.iter().map(|x| rank[x]).collect();
    parity(&mapped)
}

/// All partial injective maps from `annihilators` to later `creators`.
fn forward_matchings(annihilators: &[usize], creators: &[usize]) -> Vec<BTreeMap<usize, usize>> {
    fn go(
        idx: usize,
        ann: &[usize],
        cre: &[usize],
        used: &mut Vec<bool>,
        cur: &mut BTreeMap<usize, usize>,
        out: &mut Vec<BTreeMap<usize, usize>>,
    ) {
        if idx == ann.len() {
            out.push(cur.clone());
            return;
        }
        go(idx + 1, ann, cre, used, cur, out);
        let i = ann[idx];
        for (c, &j) in cre.iter().enumerate() {
            if j > i && !used[c] {
                used[c] = true;
                cur.insert(i, j);
                go(idx + 1, ann, cre, used, cur, out);
                cur.remove(&i);
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(0, annihilators, creators, &mut vec![false; creators.len()], &mut BTreeMap::new(), &mut out);
    out
}

fn finish_pattern(
    n: usize,
    boson_ann: &[usize],
    boson_cre: &[usize],
    fermion_ann: &[usize],
    fermion_cre: &[usize],
    f_a: BTreeMap<usize, usize>,
    f_b: BTreeMap<usize, usize>,
    slots: BTreeSet<usize>,
) -> ContractionPattern {
    let used_a: BTreeSet<usize> = f_a.iter().flat_map(|(&i, &j)| [i, j]).collect();
    let used_b: BTreeSet<usize> = f_b.iter().flat_map(|(&i, &j)| [i, j]).collect();
    let mut p = ContractionPattern {
        n,
        j_a: boson_ann.iter().copied().filter(|i| !used_a.contains(i)).collect(),
        j_astar: boson_cre.iter().copied().filter(|i| !used_a.contains(i)).collect(),
        j_b: fermion_ann.iter().copied().filter(|i| !used_b.contains(i)).collect(),
        j_bstar: fermion_cre.iter().copied().filter(|i| !used_b.contains(i)).collect(),
        f_a,
        f_b,
        slots,
        sign: 1,
    };
    p.sign = parity(&p.fermion_word());
    p
}

fn species_positions(s: &SignatureString) -> [Vec<usize>; 4] {
    let mut out: [Vec<usize>; 4] = Default::default();
    for (idx, sig) in s.entries().iter().enumerate() {
        let i = idx + 1;
        if sig.boson_annihilates() {
            out[0].push(i);
        } else {
            out[1].push(i);
        }
        if sig.fermion_annihilates() {
            out[2].push(i);
        } else {
            out[3].push(i);
        }
    }
    out
}

/// Every contraction pattern of `O_1 ⋯ O_n` with signature `s`, resolvent
/// slots `[1, n-1]`. Boson and fermion pairings are chosen independently.
pub fn patterns_for(s: &SignatureString) -> Result<Vec<ContractionPattern>> {
    let n = s.len();
    if n > MAX_PATTERN_LENGTH {
        return Err(Error::BudgetExceeded {
            what: "contraction pattern length",
            limit: MAX_PATTERN_LENGTH,
            requested: n,
        });
    }
    let [ba, bc, fa, fc] = species_positions(s);
    let slots: BTreeSet<usize> = (1..n).collect();
    let boson = forward_matchings(&ba, &bc);
    let fermion = forward_matchings(&fa, &fc);
    let mut out = Vec::with_capacity(boson.len() * fermion.len());
    for f_a in &boson {
        for f_b in &fermion {
            out.push(finish_pattern(n, &ba, &bc, &fa, &fc, f_a.clone(), f_b.clone(), slots.clone()));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    Boson,
    Fermion,
}

/// `ω_a(q_index)` for a boson reference, `ω_b(k_index)` for a fermion one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRef {
    pub species: Species,
    pub index: usize,
}

impl LineRef {
    fn boson(index: usize) -> Self {
        Self {
            species: Species::Boson,
            index,
        }
    }

    fn fermion(index: usize) -> Self {
        Self {
            species: Species::Fermion,
            index,
        }
    }
}

/// One resolvent slot: `R_0(z - C - R)^power` between factors `index` and
/// `index + 1`. Index `0` and `n` stand for resolvents outside the product,
/// which arise when a block expansion starts or ends with a counter-term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub index: usize,
    pub power: u32,
    pub c_terms: Vec<LineRef>,
    pub r_terms: Vec<LineRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagram {
    pub pattern: ContractionPattern,
    pub slots: Vec<Slot>,
}

impl Diagram {
    /// Slots from the pattern's slot set, each with power 1.
    pub fn from_pattern(pattern: ContractionPattern) -> Self {
        let powers: Vec<(usize, u32)> = pattern.slots.iter().map(|&i| (i, 1)).collect();
        Self::with_powers(pattern, &powers)
    }

    /// Slots at arbitrary indices in `[0, n]` with the given powers.
    pub fn with_powers(pattern: ContractionPattern, powers: &[(usize, u32)]) -> Self {
        let slots = powers
            .iter()
            .filter(|(_, p)| *p > 0)
            .map(|&(index, power)| Slot {
                index,
                power,
                c_terms: pattern.c_terms(index),
                r_terms: pattern.r_terms(index),
            })
            .collect();
        Self { pattern, slots }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("diagram serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Every fully contracted pattern of `s` as a diagram with slots `[1, n-1]`.
pub fn fully_contracted(s: &SignatureString) -> Result<Vec<Diagram>> {
    Ok(patterns_for(s)?
        .into_iter()
        .filter(ContractionPattern::is_fully_contracted)
        .map(Diagram::from_pattern)
        .collect())
}

/// What to do when a slot has no line crossing it and `z = 0`: the free
/// resolvent is then evaluated on the vacuum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VacuumGap {
    /// Report `ZeroDenominator`.
    #[default]
    Error,
    /// Use the pseudo-inverse, i.e. the term contributes zero. This is the
    /// convention of the matrix route, where `R_0(0)` vanishes on the vacuum.
    Project,
}

/// Dispersion values on the grid.
#[derive(Debug, Clone, Copy)]
pub struct Dispersions<'a> {
    pub omega_a: &'a [f64],
    pub omega_b: &'a [f64],
}

/// Vacuum expectation of the fully contracted product described by `dg`:
/// a lattice sum over one momentum per contracted line of the product of the
/// kernel entries, times the fermion sign, times `∏ (R_i - z)^{-power}`.
pub fn evaluate_diagram(
    dg: &Diagram,
    kernels: &KernelSet,
    disp: Dispersions<'_>,
    z: Complex64,
    gap: VacuumGap,
) -> Result<Complex64> {
    let p = &dg.pattern;
    if !p.is_fully_contracted() {
        return Err(Error::domain("evaluate_diagram needs a fully contracted pattern"));
    }
    let m = kernels.modes();
    let sigs: Vec<Signature> = if p.n == 0 {
        Vec::new()
    } else {
        p.signature()?.entries().to_vec()
    };
    let mats: Vec<_> = sigs.iter().map(|&s| kernels.for_signature(s)).collect();
    // One summation variable per line, keyed by the annihilator index.
    let boson_lines: Vec<(usize, usize)> = p.f_a.iter().map(|(&i, &j)| (i, j)).collect();
    let fermion_lines: Vec<(usize, usize)> = p.f_b.iter().map(|(&i, &j)| (i, j)).collect();
    let nlines = boson_lines.len() + fermion_lines.len();
    let mut q_of = vec![usize::MAX; p.n + 1];
    let mut k_of = vec![usize::MAX; p.n + 1];
    let total = m.checked_pow(nlines as u32).ok_or(Error::BudgetExceeded {
        what: "diagram momentum sum",
        limit: usize::MAX,
        requested: nlines,
    })?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut digits = vec![0usize; nlines];
    for _ in 0..total {
        for (l, &(i, j)) in boson_lines.iter().enumerate() {
            q_of[i] = digits[l];
            q_of[j] = digits[l];
        }
        for (l, &(i, j)) in fermion_lines.iter().enumerate() {
            k_of[i] = digits[boson_lines.len() + l];
            k_of[j] = digits[boson_lines.len() + l];
        }
        let mut term = Complex64::new(1.0, 0.0);
        for i in 1..=p.n {
            term *= mats[i - 1][(k_of[i], q_of[i])];
        }
        if term != Complex64::new(0.0, 0.0) {
            for slot in &dg.slots {
                let energy: f64 = slot
                    .r_terms
                    .iter()
                    .map(|r| match r.species {
                        Species::Boson => disp.omega_a[q_of[r.index]],
                        Species::Fermion => disp.omega_b[k_of[r.index]],
                    })
                    .sum();
                let denom = Complex64::new(energy, 0.0) - z;
                if denom == Complex64::new(0.0, 0.0) {
                    match gap {
                        VacuumGap::Error => return Err(Error::ZeroDenominator { slot: slot.index }),
                        VacuumGap::Project => {
                            term = Complex64::new(0.0, 0.0);
                            break;
                        }
                    }
                }
                term /= denom.powu(slot.power);
            }
            acc += term;
        }
        for d in digits.iter_mut() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
    Ok(acc * f64::from(p.sign))
}

/// Normal orders `T_1 R_0 T_2`: every way of pairing uncontracted
/// annihilators of `p1` with uncontracted creators of `p2` of the same
/// species. Labels of `p2` are shifted by `p1.n`; the new slot `p1.n` holds
/// the resolvent between the factors. Signs are tracked by counting the
/// transpositions needed to reach the merged normal order from the
/// concatenation of the two normal-ordered factors.
pub fn normal_order_product(p1: &ContractionPattern, p2: &ContractionPattern) -> Result<Vec<ContractionPattern>> {
    let n = p1.n + p2.n;
    if n > MAX_PATTERN_LENGTH {
        return Err(Error::BudgetExceeded {
            what: "contraction pattern length",
            limit: MAX_PATTERN_LENGTH,
            requested: n,
        });
    }
    let off = p1.n;
    let shift_set = |s: &BTreeSet<usize>| -> BTreeSet<usize> { s.iter().map(|i| i + off).collect() };
    let shift_map =
        |f: &BTreeMap<usize, usize>| -> BTreeMap<usize, usize> { f.iter().map(|(i, j)| (i + off, j + off)).collect() };
    let a2_star = shift_set(&p2.j_astar);
    let b2_star = shift_set(&p2.j_bstar);
    let a1: Vec<usize> = p1.j_a.iter().copied().collect();
    let b1: Vec<usize> = p1.j_b.iter().copied().collect();
    let mut slots = p1.slots.clone();
    if p1.n > 0 && p2.n > 0 {
        slots.insert(off);
    }
    slots.extend(shift_set(&p2.slots));

    let mut concat = p1.fermion_word();
    concat.extend(p2.fermion_word().iter().map(|i| i + off));

    let mut out = Vec::new();
    for new_a in forward_matchings(&a1, &a2_star.iter().copied().collect::<Vec<_>>()) {
        for new_b in forward_matchings(&b1, &b2_star.iter().copied().collect::<Vec<_>>()) {
            let used_a: BTreeSet<usize> = new_a.iter().flat_map(|(&i, &j)| [i, j]).collect();
            let used_b: BTreeSet<usize> = new_b.iter().flat_map(|(&i, &j)| [i, j]).collect();
            let mut f_a = p1.f_a.clone();
            f_a.extend(shift_map(&p2.f_a));
            f_a.extend(new_a.iter());
            let mut f_b = p1.f_b.clone();
            f_b.extend(shift_map(&p2.f_b));
            f_b.extend(new_b.iter());
            let mut p = ContractionPattern {
                n,
                j_a: p1.j_a.iter().copied().filter(|i| !used_a.contains(i)).chain(shift_set(&p2.j_a)).collect(),
                j_astar: p1.j_astar.iter().copied().chain(a2_star.iter().copied().filter(|i| !used_a.contains(i))).collect(),
                j_b: p1.j_b.iter().copied().filter(|i| !used_b.contains(i)).chain(shift_set(&p2.j_b)).collect(),
                j_bstar: p1.j_bstar.iter().copied().chain(b2_star.iter().copied().filter(|i| !used_b.contains(i))).collect(),
                f_a,
                f_b,
                slots: slots.clone(),
                sign: 1,
            };
            p.sign = p1.sign * p2.sign * relative_parity(&concat, &p.fermion_word());
            out.push(p);
        }
    }
    Ok(out)
}

/// Which denominator to use in the order-2 quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum E2Denominator {
    /// `ω_b(k) + ω_a(q)`, the energy of the intermediate boson–fermion pair.
    #[default]
    BosonFermion,
    /// `ω_b(k) + ω_b(q)`, kept for comparison; it does not match the matrix route.
    FermionPair,
}

/// `Σ_{k,q} |G2(k,q)|^2 / D(k,q)`; the order-2 counter-term of `(ab, a*b*)`
/// is minus this value.
pub fn e2_quadrature(kernels: &KernelSet, disp: Dispersions<'_>, reading: E2Denominator) -> f64 {
    let g2 = &kernels.g2.values;
    let mut acc = 0.0;
    for ik in 0..g2.nrows() {
        for iq in 0..g2.ncols() {
            let d = match reading {
                E2Denominator::BosonFermion => disp.omega_b[ik] + disp.omega_a[iq],
                E2Denominator::FermionPair => disp.omega_b[ik] + disp.omega_b[iq],
            };
            acc += g2[(ik, iq)].norm_sqr() / d;
        }
    }
    acc
}

/// Word letters of a block expansion: an interaction factor at a position of
/// the original string, or a free resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Letter {
    H(Signature),
    R,
}

#[derive(Debug, Clone)]
struct Word {
    coeff: Complex64,
    letters: Vec<Letter>,
}

/// Diagram family of a word: one diagram per full contraction of its
/// interaction factors, with resolvent powers read off the word.
fn word_diagrams(letters: &[Letter]) -> Result<Vec<Diagram>> {
    let sigs: Vec<Signature> = letters
        .iter()
        .filter_map(|l| match l {
            Letter::H(s) => Some(*s),
            Letter::R => None,
        })
        .collect();
    let mut powers: BTreeMap<usize, u32> = BTreeMap::new();
    let mut seen = 0usize;
    for l in letters {
        match l {
            Letter::H(_) => seen += 1,
            Letter::R => *powers.entry(seen).or_default() += 1,
        }
    }
    let powers: Vec<(usize, u32)> = powers.into_iter().collect();
    if sigs.is_empty() {
        let empty = ContractionPattern {
            n: 0,
            j_a: BTreeSet::new(),
            j_astar: BTreeSet::new(),
            j_b: BTreeSet::new(),
            j_bstar: BTreeSet::new(),
            f_a: BTreeMap::new(),
            f_b: BTreeMap::new(),
            slots: BTreeSet::new(),
            sign: 1,
        };
        return Ok(vec![Diagram::with_powers(empty, &powers)]);
    }
    let s = SignatureString::new(sigs)?;
    Ok(patterns_for(&s)?
        .into_iter()
        .filter(ContractionPattern::is_fully_contracted)
        .map(|p| Diagram::with_powers(p, &powers))
        .collect())
}

/// Counter-terms computed from diagrams alone, by expanding the block
/// recursion into words of interaction factors and resolvents.
///
/// Splits use the last admissible position, the opposite choice from the
/// operator engine, so that agreement also exercises split independence.
pub struct DiagramOracle<'a> {
    kernels: &'a KernelSet,
    disp: Dispersions<'a>,
    counterterms: HashMap<Vec<Signature>, Complex64>,
}

impl<'a> DiagramOracle<'a> {
    pub fn new(kernels: &'a KernelSet, disp: Dispersions<'a>) -> Self {
        Self {
            kernels,
            disp,
            counterterms: HashMap::new(),
        }
    }

    fn words(&mut self, s: &[Signature]) -> Result<Vec<Word>> {
        if s.len() == 1 {
            return Ok(vec![Word {
                coeff: Complex64::new(-1.0, 0.0),
                letters: vec![Letter::H(s[0])],
            }]);
        }
        let ss = SignatureString::new(s.to_vec())?;
        let j = *split_points(&ss)?.last().expect("handed strings have a split");
        let left = self.words(&s[..j])?;
        let right = self.words(&s[j..])?;
        let mut out = Vec::with_capacity(left.len() * right.len() + 1);
        for l in &left {
            for r in &right {
                let mut letters = l.letters.clone();
                letters.push(Letter::R);
                letters.extend_from_slice(&r.letters);
                out.push(Word {
                    coeff: l.coeff * r.coeff,
                    letters,
                });
            }
        }
        if classify(&ss) == Handedness::Ambidextrous {
            let e = self.counterterm_of_words(s, &out)?;
            out.push(Word {
                coeff: e,
                letters: Vec::new(),
            });
        }
        Ok(out)
    }

    fn counterterm_of_words(&mut self, s: &[Signature], bare: &[Word]) -> Result<Complex64> {
        if let Some(e) = self.counterterms.get(s) {
            return Ok(*e);
        }
        let mut vev = Complex64::new(0.0, 0.0);
        for w in bare {
            for dg in word_diagrams(&w.letters)? {
                vev += w.coeff
                    * evaluate_diagram(&dg, self.kernels, self.disp, Complex64::new(0.0, 0.0), VacuumGap::Project)?;
            }
        }
        let e = -vev;
        self.counterterms.insert(s.to_vec(), e);
        Ok(e)
    }

    /// `E_s = -⟨Ω|T_s,bare(0)|Ω⟩` for an ambidextrous `s`.
    pub fn counterterm(&mut self, s: &SignatureString) -> Result<Complex64> {
        if classify(s) != Handedness::Ambidextrous {
            return Err(Error::domain(format!("{s} is not ambidextrous")));
        }
        if s.len() > MAX_PATTERN_LENGTH {
            return Err(Error::BudgetExceeded {
                what: "contraction pattern length",
                limit: MAX_PATTERN_LENGTH,
                requested: s.len(),
            });
        }
        self.words(s.entries())?;
        Ok(self.counterterms[s.entries()])
    }

    /// Number of diagrams in the expansion of the bare block of `s`.
    pub fn family_size(&mut self, s: &SignatureString) -> Result<usize> {
        let words = self.words(s.entries())?;
        let mut count = 0;
        for w in words.iter().filter(|w| !w.letters.is_empty() || w.coeff != Complex64::new(0.0, 0.0)) {
            count += word_diagrams(&w.letters)?.len();
        }
        Ok(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_kernels, ModelConfig, MomentumGrid};

    fn st(text: &str) -> SignatureString {
        text.parse().unwrap()
    }

    fn setup(cfg: &ModelConfig) -> (KernelSet, Vec<f64>, Vec<f64>) {
        let grid = MomentumGrid::from_config(cfg).unwrap();
        let (g1, g2) = build_kernels(cfg, &grid).unwrap();
        let oa = grid.points.iter().map(|q| crate::fock::dispersion_a(q, cfg.m_b)).collect();
        let ob = grid.points.iter().map(|k| crate::fock::dispersion_b(k, cfg.m_f)).collect();
        (KernelSet::new(g1, g2), oa, ob)
    }

    #[test]
    fn pattern_counts() {
        assert_eq!(patterns_for(&st("ab")).unwrap().len(), 1);
        let ps = patterns_for(&st("ab,a*b*")).unwrap();
        assert_eq!(ps.len(), 4);
        assert_eq!(ps.iter().filter(|p| p.is_fully_contracted()).count(), 1);
        assert!(fully_contracted(&st("ab")).unwrap().is_empty());
        assert!(fully_contracted(&st("ab*,a*b")).unwrap().is_empty());
        assert!(patterns_for(&SignatureString::new(vec![Signature::AB; 9]).unwrap()).is_err());
    }

    #[test]
    fn order_two_denominator() {
        let dg = &fully_contracted(&st("ab,a*b*")).unwrap()[0];
        assert_eq!(dg.slots.len(), 1);
        assert_eq!(dg.slots[0].r_terms, vec![LineRef::boson(1), LineRef::fermion(1)]);
        assert!(dg.slots[0].c_terms.is_empty());
    }

    #[test]
    fn crossing_sign() {
        // b1 b2 b1* b2*: the fermion lines cross once.
        let s = st("ab,ab,a*b*,a*b*");
        let dgs = fully_contracted(&s).unwrap();
        assert_eq!(dgs.len(), 4);
        for dg in &dgs {
            let (a1, a2) = (dg.pattern.f_b[&1], dg.pattern.f_b[&2]);
            let crossing = a1 < a2;
            assert_eq!(dg.pattern.sign, if crossing { -1 } else { 1 });
        }
    }

    #[test]
    fn reconstruction_and_legality() {
        for s in crate::signature::enumerate_strings(4, None).unwrap() {
            for p in patterns_for(&s).unwrap() {
                assert_eq!(p.signature().unwrap(), s);
                assert!(p.f_a.iter().all(|(i, j)| j > i));
                assert!(p.f_b.iter().all(|(i, j)| j > i));
            }
        }
    }

    #[test]
    fn product_counts_and_signatures() {
        let one = |t: &str| patterns_for(&st(t)).unwrap().remove(0);
        let prod = normal_order_product(&one("ab"), &one("a*b*")).unwrap();
        assert_eq!(prod.len(), 4);
        let prod = normal_order_product(&one("ab*"), &one("a*b*")).unwrap();
        assert_eq!(prod.len(), 2);
        for p in &prod {
            assert_eq!(p.signature().unwrap(), st("ab*,a*b*"));
            assert_eq!(p.slots, BTreeSet::from([1]));
        }
    }

    #[test]
    fn products_rebuild_all_patterns_with_signs() {
        for s1 in crate::signature::enumerate_strings(2, None).unwrap() {
            for s2 in crate::signature::enumerate_strings(2, None).unwrap() {
                let whole = crate::signature::compose(&s1, &s2);
                let mut direct: Vec<_> = patterns_for(&whole).unwrap();
                let mut merged = Vec::new();
                for p1 in patterns_for(&s1).unwrap() {
                    for p2 in patterns_for(&s2).unwrap() {
                        merged.extend(normal_order_product(&p1, &p2).unwrap());
                    }
                }
                let key = |p: &ContractionPattern| format!("{:?}{:?}", p.f_a, p.f_b);
                direct.sort_by_key(key);
                merged.sort_by_key(key);
                assert_eq!(direct.len(), merged.len());
                for (d, m) in direct.iter().zip(&merged) {
                    assert_eq!((&d.f_a, &d.f_b, &d.j_a, &d.j_bstar), (&m.f_a, &m.f_b, &m.j_a, &m.j_bstar));
                    assert_eq!(d.sign, m.sign, "{whole}");
                }
            }
        }
    }

    #[test]
    fn single_mode_order_two_value() {
        let cfg = ModelConfig {
            grid_spacing: 0.7,
            grid_halfwidth: 0.3,
            grid_staggered: false,
            ..ModelConfig::default()
        };
        let (ks, oa, ob) = setup(&cfg);
        let disp = Dispersions {
            omega_a: &oa,
            omega_b: &ob,
        };
        let dg = &fully_contracted(&st("ab,a*b*")).unwrap()[0];
        let v = evaluate_diagram(dg, &ks, disp, Complex64::new(0.0, 0.0), VacuumGap::Error).unwrap();
        let g = ks.g2.values[(0, 0)];
        let expect = g.norm_sqr() / (ob[0] + oa[0]);
        assert!((v.re - expect).abs() < 1e-15 && v.im == 0.0);
        let mut oracle = DiagramOracle::new(&ks, disp);
        let e = oracle.counterterm(&st("ab,a*b*")).unwrap();
        assert!((e.re + expect).abs() < 1e-15);
        assert!((e.re + e2_quadrature(&ks, disp, E2Denominator::BosonFermion)).abs() < 1e-15);
        assert_eq!(oracle.counterterm(&st("ab*,a*b")).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zero_kernel_gives_zero() {
        let cfg = ModelConfig {
            h2: 0.0,
            ..ModelConfig::default()
        };
        let (ks, oa, ob) = setup(&cfg);
        let disp = Dispersions {
            omega_a: &oa,
            omega_b: &ob,
        };
        let dg = &fully_contracted(&st("ab,a*b*")).unwrap()[0];
        let v = evaluate_diagram(dg, &ks, disp, Complex64::new(0.0, 0.0), VacuumGap::Error).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn diagram_json_round_trip() {
        let dg = fully_contracted(&st("ab,ab,a*b*,a*b*")).unwrap().remove(0);
        let back = Diagram::from_json(&dg.to_json()).unwrap();
        assert_eq!(back, dg);
    }
}
