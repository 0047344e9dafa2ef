//! Signatures, signature strings and their handedness classification.
//!
//! A signature names which boson (`a`) and fermion (`b`) operator appear in a
//! single interaction factor; a star marks a creation operator. Strings of
//! signatures index products of interaction terms, and their prefix/suffix
//! counts decide whether the product can be renormalized as one block.
//!
//! All indices exposed by this module are 1-based and inclusive, matching the
//! way positions inside a product of operators are usually written.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on `k` for exhaustive enumeration of `4^k` strings.
pub const MAX_ENUMERATION_LENGTH: usize = 10;

/// One of the four interaction signatures. The declaration order is the
/// lexicographic order used for enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Signature {
    /// `b(k) a(q)`
    AB,
    /// `b*(k) a(q)`
    ABstar,
    /// `b(k) a*(q)`
    AstarB,
    /// `b*(k) a*(q)`
    AstarBstar,
}

impl Signature {
    pub const ALL: [Signature; 4] = [
        Signature::AB,
        Signature::ABstar,
        Signature::AstarB,
        Signature::AstarBstar,
    ];

    /// +1 when the boson operator is an annihilator.
    pub fn n_a(self) -> i32 {
        match self {
            Signature::AB | Signature::ABstar => 1,
            Signature::AstarB | Signature::AstarBstar => -1,
        }
    }

    /// +1 when the fermion operator is an annihilator.
    pub fn n_b(self) -> i32 {
        match self {
            Signature::AB | Signature::AstarB => 1,
            Signature::ABstar | Signature::AstarBstar => -1,
        }
    }

    pub fn boson_annihilates(self) -> bool {
        self.n_a() > 0
    }

    pub fn fermion_annihilates(self) -> bool {
        self.n_b() > 0
    }

    pub fn from_flags(boson_annihilates: bool, fermion_annihilates: bool) -> Self {
        match (boson_annihilates, fermion_annihilates) {
            (true, true) => Signature::AB,
            (true, false) => Signature::ABstar,
            (false, true) => Signature::AstarB,
            (false, false) => Signature::AstarBstar,
        }
    }

    pub fn adjoint(self) -> Self {
        match self {
            Signature::AB => Signature::AstarBstar,
            Signature::ABstar => Signature::AstarB,
            Signature::AstarB => Signature::ABstar,
            Signature::AstarBstar => Signature::AB,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Signature::AB => "ab",
            Signature::ABstar => "ab*",
            Signature::AstarB => "a*b",
            Signature::AstarBstar => "a*b*",
        }
    }

    /// Position in the lexicographic order, 0..4.
    pub fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Signature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ab" => Ok(Signature::AB),
            "ab*" => Ok(Signature::ABstar),
            "a*b" => Ok(Signature::AstarB),
            "a*b*" => Ok(Signature::AstarBstar),
            other => Err(Error::Parse(format!("unknown signature token `{other}`"))),
        }
    }
}

/// Handedness class of a signature string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Handedness {
    RightHanded,
    LeftHanded,
    Ambidextrous,
    NotHanded,
}

impl Handedness {
    pub fn label(self) -> &'static str {
        match self {
            Handedness::RightHanded => "right",
            Handedness::LeftHanded => "left",
            Handedness::Ambidextrous => "ambidextrous",
            Handedness::NotHanded => "not-handed",
        }
    }

    pub fn is_handed(self) -> bool {
        self != Handedness::NotHanded
    }
}

impl fmt::Display for Handedness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Handedness {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "right" | "right-handed" => Ok(Handedness::RightHanded),
            "left" | "left-handed" => Ok(Handedness::LeftHanded),
            "ambi" | "ambidextrous" => Ok(Handedness::Ambidextrous),
            "not-handed" | "none" => Ok(Handedness::NotHanded),
            other => Err(Error::Parse(format!("unknown handedness `{other}`"))),
        }
    }
}

/// A non-empty sequence of signatures.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignatureString {
    entries: Vec<Signature>,
}

impl SignatureString {
    pub fn new(entries: Vec<Signature>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("signature strings have length at least 1"));
        }
        Ok(Self { entries })
    }

    pub fn single(s: Signature) -> Self {
        Self { entries: vec![s] }
    }

    pub fn entries(&self) -> &[Signature] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// 1-based access.
    pub fn at(&self, i: usize) -> Signature {
        self.entries[i - 1]
    }

    /// Sub-string `(s_j, ..., s_jp)`, 1-based inclusive.
    pub fn slice(&self, j: usize, jp: usize) -> Result<SignatureString> {
        self.check_range(j, jp)?;
        Ok(Self {
            entries: self.entries[j - 1..jp].to_vec(),
        })
    }

    fn check_range(&self, j: usize, jp: usize) -> Result<()> {
        if j == 0 || j > jp || jp > self.len() {
            return Err(Error::IndexOutOfRange {
                j,
                jp,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Lexicographic rank among all strings of the same length.
    pub fn rank(&self) -> u64 {
        self.entries
            .iter()
            .fold(0u64, |acc, s| acc * 4 + s.ordinal() as u64)
    }

    pub fn from_rank(k: usize, mut rank: u64) -> Self {
        let mut entries = vec![Signature::AB; k];
        for slot in entries.iter_mut().rev() {
            *slot = Signature::ALL[(rank % 4) as usize];
            rank /= 4;
        }
        Self { entries }
    }
}

impl fmt::Display for SignatureString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(s.token())?;
        }
        Ok(())
    }
}

impl FromStr for SignatureString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('(').trim_end_matches(')');
        let entries = trimmed
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Signature>>>()?;
        SignatureString::new(entries)
    }
}

impl Serialize for SignatureString {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for SignatureString {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(de)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// `n_a(j, jp; s)`, the boson counting function over `[j, jp]`.
pub fn count_a(s: &SignatureString, j: usize, jp: usize) -> Result<i32> {
    s.check_range(j, jp)?;
    Ok(s.entries[j - 1..jp].iter().map(|x| x.n_a()).sum())
}

/// `n_b(j, jp; s)`, the fermion counting function over `[j, jp]`.
pub fn count_b(s: &SignatureString, j: usize, jp: usize) -> Result<i32> {
    s.check_range(j, jp)?;
    Ok(s.entries[j - 1..jp].iter().map(|x| x.n_b()).sum())
}

/// Total counts `(n_a(1,k), n_b(1,k))`.
pub fn totals(s: &SignatureString) -> (i32, i32) {
    s.entries
        .iter()
        .fold((0, 0), |(a, b), x| (a + x.n_a(), b + x.n_b()))
}

/// Entrywise involution followed by reversal.
pub fn adjoint(s: &SignatureString) -> SignatureString {
    SignatureString {
        entries: s.entries.iter().rev().map(|x| x.adjoint()).collect(),
    }
}

/// Concatenation `s1 ∘ s2`.
pub fn compose(s1: &SignatureString, s2: &SignatureString) -> SignatureString {
    let mut entries = s1.entries.clone();
    entries.extend_from_slice(&s2.entries);
    SignatureString { entries }
}

/// Direct scan of the prefix and suffix conditions; O(k^2) by design.
pub fn is_handed(s: &SignatureString) -> bool {
    let k = s.len();
    if k == 1 {
        return true;
    }
    let na = |j, jp| count_a(s, j, jp).expect("range checked by loop bounds");
    let nb = |j, jp| count_b(s, j, jp).expect("range checked by loop bounds");
    for i in 1..k {
        let a = na(1, i);
        if a < 0 || (a == 0 && nb(1, i) < 0) {
            return false;
        }
    }
    for i in 2..=k {
        let a = na(i, k);
        if a > 0 || (a == 0 && nb(i, k) > 0) {
            return false;
        }
    }
    if k >= 3 && na(1, k) == 0 && nb(1, k) == 0 {
        for i in 2..k {
            if na(1, i) == 0 && nb(1, i) <= 0 {
                return false;
            }
        }
    }
    true
}

pub fn classify(s: &SignatureString) -> Handedness {
    if !is_handed(s) {
        return Handedness::NotHanded;
    }
    match totals(s) {
        (0, 0) => Handedness::Ambidextrous,
        (1, _) => Handedness::RightHanded,
        (-1, _) => Handedness::LeftHanded,
        (0, b) if b > 0 => Handedness::RightHanded,
        (0, _) => Handedness::LeftHanded,
        (a, _) => unreachable!("handed strings have |n_a| <= 1, got {a}"),
    }
}

/// All `j` in `[1, k-1]` where the prefix is right-handed or ambidextrous and
/// the suffix is ambidextrous or left-handed.
pub fn split_points(s: &SignatureString) -> Result<Vec<usize>> {
    let k = s.len();
    if k < 2 {
        return Err(Error::domain("split points need a string of length >= 2"));
    }
    if !is_handed(s) {
        return Err(Error::domain(format!("`{s}` is not handed")));
    }
    let mut out = Vec::new();
    for j in 1..k {
        let prefix = classify(&s.slice(1, j)?);
        let suffix = classify(&s.slice(j + 1, k)?);
        let left_ok = matches!(prefix, Handedness::RightHanded | Handedness::Ambidextrous);
        let right_ok = matches!(suffix, Handedness::Ambidextrous | Handedness::LeftHanded);
        if left_ok && right_ok {
            out.push(j);
        }
    }
    Ok(out)
}

/// All `4^k` strings in lexicographic order, optionally filtered.
pub fn enumerate_strings(k: usize, filter: Option<Handedness>) -> Result<Vec<SignatureString>> {
    if k == 0 {
        return Err(Error::domain("string length must be at least 1"));
    }
    if k > MAX_ENUMERATION_LENGTH {
        return Err(Error::BudgetExceeded {
            what: "string enumeration length",
            limit: MAX_ENUMERATION_LENGTH,
            requested: k,
        });
    }
    let total = 4u64.pow(k as u32);
    Ok((0..total)
        .map(|r| SignatureString::from_rank(k, r))
        .filter(|s| filter.is_none_or(|h| classify(s) == h))
        .collect())
}
