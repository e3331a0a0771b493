//! Product Hilbert space of two five-level atoms and one cavity mode.
//!
//! States are kets `|s1 s2>|n>`; the basis is enumerated lexicographically in
//! `(atom1, atom2, n)` with level order `0 < a < 1 < e < u`, so indices (and
//! every file written from them) are reproducible across runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default Fock cutoff: one photon more than the largest photon component of
/// the dark states.
pub const DEFAULT_N_MAX: usize = 3;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AtomLevel {
    /// Computational `|0>`.
    #[serde(rename = "0")]
    Zero,
    /// Ancillary ground state `|a>`.
    #[serde(rename = "a")]
    Anc,
    /// Computational `|1>`, the only ground state coupled to the cavity.
    #[serde(rename = "1")]
    One,
    /// Excited state `|e>`.
    #[serde(rename = "e")]
    Excited,
    /// Upper state `|u>`, used only for the CNOT shelving transfer.
    #[serde(rename = "u")]
    Upper,
}

impl AtomLevel {
    pub const ALL: [AtomLevel; 5] =
        [AtomLevel::Zero, AtomLevel::Anc, AtomLevel::One, AtomLevel::Excited, AtomLevel::Upper];

    pub fn levels(include_u: bool) -> &'static [AtomLevel] {
        if include_u { &Self::ALL } else { &Self::ALL[..4] }
    }

    pub fn symbol(self) -> char {
        match self {
            AtomLevel::Zero => '0',
            AtomLevel::Anc => 'a',
            AtomLevel::One => '1',
            AtomLevel::Excited => 'e',
            AtomLevel::Upper => 'u',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.symbol() == c)
    }

    fn ordinal(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AtomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// One product ket `|atom1 atom2>|n>`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BasisState {
    pub atom1: AtomLevel,
    pub atom2: AtomLevel,
    pub n: usize,
}

impl BasisState {
    pub const fn new(atom1: AtomLevel, atom2: AtomLevel, n: usize) -> Self {
        Self { atom1, atom2, n }
    }

    /// Level of atom `k` (1 or 2).
    pub fn atom(&self, k: u8) -> AtomLevel {
        if k == 1 { self.atom1 } else { self.atom2 }
    }

    /// Copy with atom `k` moved to `level`.
    pub fn with_atom(&self, k: u8, level: AtomLevel) -> Self {
        let mut out = *self;
        if k == 1 {
            out.atom1 = level;
        } else {
            out.atom2 = level;
        }
        out
    }

    pub fn count(&self, level: AtomLevel) -> usize {
        (self.atom1 == level) as usize + (self.atom2 == level) as usize
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{};{}", self.atom1, self.atom2, self.n)
    }
}

impl FromStr for BasisState {
    type Err = Error;

    /// Parses labels such as `"a1;0"`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Label(s.to_string());
        let (atoms, n) = s.trim().split_once(';').ok_or_else(bad)?;
        let mut chars = atoms.chars();
        let (Some(c1), Some(c2), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(bad());
        };
        let atom1 = AtomLevel::from_symbol(c1).ok_or_else(bad)?;
        let atom2 = AtomLevel::from_symbol(c2).ok_or_else(bad)?;
        let n = n.trim().parse().map_err(|_| bad())?;
        Ok(Self { atom1, atom2, n })
    }
}

impl Serialize for BasisState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for BasisState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Conserved quantity `C = n - #(atoms in |1>)`.
///
/// Laser couplings among `0, a, e` keep both terms fixed and the cavity
/// exchange `|1>|n+1> <-> |e>|n>` lowers both by one. The shelving lasers on
/// `1-u` do change it, so it labels blocks only for schedules without them.
pub fn charge_of(s: &BasisState) -> i32 {
    s.n as i32 - s.count(AtomLevel::One) as i32
}

/// Truncated product basis. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Basis {
    n_max: usize,
    include_u: bool,
    states: Vec<BasisState>,
}

impl Basis {
    pub fn new(n_max: usize, include_u: bool) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::PhotonCutoff(n_max));
        }
        let levels = AtomLevel::levels(include_u);
        let mut states = Vec::with_capacity(levels.len() * levels.len() * (n_max + 1));
        for &atom1 in levels {
            for &atom2 in levels {
                for n in 0..=n_max {
                    states.push(BasisState { atom1, atom2, n });
                }
            }
        }
        Ok(Self { n_max, include_u, states })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn include_u(&self) -> bool {
        self.include_u
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> BasisState {
        self.states[i]
    }

    fn n_levels(&self) -> usize {
        if self.include_u { 5 } else { 4 }
    }

    pub fn contains_level(&self, level: AtomLevel) -> bool {
        level != AtomLevel::Upper || self.include_u
    }

    /// Position of `s`, or `None` when it lies outside the truncation.
    pub fn index_of(&self, s: &BasisState) -> Option<usize> {
        let nl = self.n_levels();
        let (i1, i2) = (s.atom1.ordinal(), s.atom2.ordinal());
        if i1 >= nl || i2 >= nl || s.n > self.n_max {
            return None;
        }
        Some((i1 * nl + i2) * (self.n_max + 1) + s.n)
    }

    pub fn index_of_label(&self, label: &str) -> Result<usize> {
        let s: BasisState = label.parse()?;
        self.index_of(&s).ok_or(Error::Label(label.to_string()))
    }

    /// Indices of the computational states `|00>, |01>, |10>, |11>` with an
    /// empty cavity, in that order.
    pub fn computational_indices(&self) -> [usize; 4] {
        use AtomLevel::{One, Zero};
        [(Zero, Zero), (Zero, One), (One, Zero), (One, One)].map(|(a, b)| {
            self.index_of(&BasisState::new(a, b, 0)).expect("computational state in basis")
        })
    }

    pub fn charge_blocks(&self) -> ChargeBlocks {
        block_partition(self)
    }
}

/// Basis indices grouped by [`charge_of`], each group in basis order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChargeBlocks {
    pub blocks: BTreeMap<i32, Vec<usize>>,
}

impl ChargeBlocks {
    pub fn get(&self, charge: i32) -> Option<&[usize]> {
        self.blocks.get(&charge).map(Vec::as_slice)
    }

    /// Same partition keeping only states with at most `max_photons` photons.
    pub fn restricted(&self, basis: &Basis, max_photons: usize) -> ChargeBlocks {
        let blocks = self
            .blocks
            .iter()
            .filter_map(|(&c, idx)| {
                let kept: Vec<usize> =
                    idx.iter().copied().filter(|&i| basis.state(i).n <= max_photons).collect();
                (!kept.is_empty()).then_some((c, kept))
            })
            .collect();
        ChargeBlocks { blocks }
    }

    pub fn sizes(&self) -> BTreeMap<i32, usize> {
        self.blocks.iter().map(|(&c, v)| (c, v.len())).collect()
    }
}

pub fn block_partition(basis: &Basis) -> ChargeBlocks {
    let mut blocks: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, s) in basis.states().iter().enumerate() {
        blocks.entry(charge_of(s)).or_default().push(i);
    }
    ChargeBlocks { blocks }
}

/// Complex amplitudes over a shared basis.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    basis: Arc<Basis>,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn zeros(basis: Arc<Basis>) -> Self {
        let amps = vec![C64::new(0.0, 0.0); basis.dim()];
        Self { basis, amps }
    }

    pub fn from_amplitudes(basis: Arc<Basis>, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::Dimension { expected: basis.dim(), got: amps.len() });
        }
        Ok(Self { basis, amps })
    }

    pub fn basis_state(basis: Arc<Basis>, s: &BasisState) -> Result<Self> {
        let i = basis.index_of(s).ok_or_else(|| Error::Label(s.label()))?;
        let mut v = Self::zeros(basis);
        v.amps[i] = C64::new(1.0, 0.0);
        Ok(v)
    }

    pub fn from_label(basis: Arc<Basis>, label: &str) -> Result<Self> {
        let s: BasisState = label.parse()?;
        Self::basis_state(basis, &s)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn population(&self, s: &BasisState) -> f64 {
        self.basis.index_of(s).map_or(0.0, |i| self.amps[i].norm_sqr())
    }

    pub fn amplitude(&self, s: &BasisState) -> C64 {
        self.basis.index_of(s).map_or(C64::new(0.0, 0.0), |i| self.amps[i])
    }
}
