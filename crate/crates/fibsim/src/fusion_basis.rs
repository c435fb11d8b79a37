//! Fusion-path bases for chains of Fibonacci anyons.
//!
//! A chain of `n` anyons of charge τ is described by the sequence of
//! intermediate charges `x₁ … xₙ`, where `xₖ` is the total charge of anyons
//! `1..k` (with the implicit `x₀ = 0`). The fusion rules `0 × 1 = 1` and
//! `1 × 1 = 0 + 1` make these sequences walks on a two-state graph: from
//! charge 0 the only continuation is 1, from charge 1 both 0 and 1 are
//! allowed. The admissible walks with a fixed endpoint form an orthonormal
//! basis of the chain's state space, and their number is a Fibonacci number.
//!
//! [`AnyonState`] holds a sparse complex amplitude vector over those paths.
//! All operators in this crate act on states by local label surgery, so the
//! paths are stored as packed bit sequences rather than dense indices.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

/// Tolerance used when checking that a state is normalized.
pub const NORM_TOL: f64 = 1e-12;

/// Amplitudes below this magnitude may be pruned after an operation.
pub const PRUNE_TOL: f64 = 1e-14;

/// Paths are packed into a `u32`, one bit per anyon.
pub const MAX_ANYONS: usize = 31;

/// Topological charge of a group of Fibonacci anyons.
///
/// Only two charges exist: the vacuum (trivial) charge and the Fibonacci
/// anyon τ itself. The fusion table is `0×0=0`, `0×1=1×0=1`, `1×1={0,1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Charge {
    /// The trivial charge, written `0`.
    Vacuum,
    /// The Fibonacci anyon τ, written `1`.
    Tau,
}

impl Charge {
    /// Charges that can result from fusing `self` with one more τ anyon,
    /// in canonical (0 before 1) order.
    pub fn fuse_with_tau(self) -> &'static [Charge] {
        match self {
            Charge::Vacuum => &[Charge::Tau],
            Charge::Tau => &[Charge::Vacuum, Charge::Tau],
        }
    }

    /// Whether a walk at `self` can reach `target` in exactly `steps` more
    /// fusions with τ.
    pub fn can_reach(self, target: Charge, steps: usize) -> bool {
        match steps {
            0 => self == target,
            1 => self == Charge::Tau || target == Charge::Tau,
            _ => true,
        }
    }

    pub fn as_bit(self) -> u32 {
        match self {
            Charge::Vacuum => 0,
            Charge::Tau => 1,
        }
    }

    pub fn from_bit(bit: u32) -> Charge {
        if bit == 0 {
            Charge::Vacuum
        } else {
            Charge::Tau
        }
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_bit())
    }
}

/// Errors arising from basis bookkeeping.
#[derive(Debug, Error)]
pub enum BasisError {
    #[error("states live in different spaces: ({n_left} anyons, charge {total_left}) vs ({n_right} anyons, charge {total_right})")]
    DimensionMismatch {
        n_left: usize,
        total_left: Charge,
        n_right: usize,
        total_right: Charge,
    },
    #[error("path {path} is not admissible for {n} anyons with total charge {total}")]
    InadmissiblePath {
        path: String,
        n: usize,
        total: Charge,
    },
    #[error("anyon count {n} exceeds the supported maximum of {MAX_ANYONS}")]
    TooManyAnyons { n: usize },
    #[error("cannot normalize a zero state")]
    ZeroState,
    #[error("malformed path text {text:?}")]
    MalformedPath { text: String },
    #[error("splice point {position} carries charge 1 on some path; only charge-0 boundaries can host an insertion")]
    SpliceBoundary { position: usize },
}

/// One basis vector of an `n`-anyon space: the sequence of intermediate
/// charges `x₁ … xₙ`, packed one bit per label.
///
/// The canonical text form is comma-separated charges, e.g. `"1,0,1,0"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FusionPath {
    bits: u32,
    len: u8,
}

impl FusionPath {
    /// The empty path describing the bare vacuum (`n = 0`).
    pub fn empty() -> FusionPath {
        FusionPath { bits: 0, len: 0 }
    }

    /// Builds a path directly from packed bits (crate-internal fast path).
    pub(crate) fn from_bits(bits: u32, len: usize) -> FusionPath {
        let path = FusionPath { bits, len: len as u8 };
        debug_assert!(path.is_admissible());
        path
    }

    /// Builds a path from explicit charges, checking admissibility.
    pub fn from_charges(charges: &[Charge]) -> Result<FusionPath, BasisError> {
        if charges.len() > MAX_ANYONS {
            return Err(BasisError::TooManyAnyons { n: charges.len() });
        }
        let mut bits = 0u32;
        for (k, &c) in charges.iter().enumerate() {
            bits |= c.as_bit() << k;
        }
        let path = FusionPath {
            bits,
            len: charges.len() as u8,
        };
        if !path.is_admissible() {
            return Err(BasisError::InadmissiblePath {
                path: path.to_string(),
                n: charges.len(),
                total: path.total(),
            });
        }
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Charge label `xₖ` for 1-based `k`; `k = 0` returns the implicit
    /// vacuum prefix `x₀ = 0`.
    pub fn charge(&self, k: usize) -> Charge {
        if k == 0 {
            Charge::Vacuum
        } else {
            debug_assert!(k <= self.len());
            Charge::from_bit((self.bits >> (k - 1)) & 1)
        }
    }

    /// Total charge of the whole chain (`xₙ`, or vacuum for the empty path).
    pub fn total(&self) -> Charge {
        self.charge(self.len())
    }

    /// Every step of the walk obeys the fusion rules and `x₁ = 1`.
    pub fn is_admissible(&self) -> bool {
        if self.len == 0 {
            return true;
        }
        if self.charge(1) != Charge::Tau {
            return false;
        }
        for k in 1..self.len() {
            if self.charge(k) == Charge::Vacuum && self.charge(k + 1) == Charge::Vacuum {
                return false;
            }
        }
        true
    }

    pub fn charges(&self) -> Vec<Charge> {
        (1..=self.len()).map(|k| self.charge(k)).collect()
    }

    /// Path with the label at 1-based position `k` replaced.
    pub(crate) fn with_charge(&self, k: usize, c: Charge) -> FusionPath {
        debug_assert!(k >= 1 && k <= self.len());
        let mask = 1u32 << (k - 1);
        let bits = (self.bits & !mask) | (c.as_bit() << (k - 1));
        FusionPath { bits, len: self.len }
    }

    /// Inserts two labels after position `pos` (0-based gap index), so the
    /// new labels become `x_{pos+1}` and `x_{pos+2}`.
    pub(crate) fn insert_two(&self, pos: usize, first: Charge, second: Charge) -> FusionPath {
        debug_assert!(pos <= self.len());
        let low = self.bits & ((1u32 << pos) - 1);
        let high = self.bits >> pos;
        let inserted = first.as_bit() << pos | second.as_bit() << (pos + 1);
        FusionPath {
            bits: low | inserted | (high << (pos + 2)),
            len: self.len + 2,
        }
    }

    /// Removes the two labels at 1-based positions `k` and `k+1`.
    pub(crate) fn remove_two(&self, k: usize) -> FusionPath {
        debug_assert!(k >= 1 && k + 1 <= self.len());
        let pos = k - 1;
        let low = self.bits & ((1u32 << pos) - 1);
        let high = self.bits >> (pos + 2);
        FusionPath {
            bits: low | (high << pos),
            len: self.len - 2,
        }
    }

    /// Removes the single label at 1-based position `k`.
    pub(crate) fn remove_one(&self, k: usize) -> FusionPath {
        debug_assert!(k >= 1 && k <= self.len());
        let pos = k - 1;
        let low = self.bits & ((1u32 << pos) - 1);
        let high = self.bits >> (pos + 1);
        FusionPath {
            bits: low | (high << pos),
            len: self.len - 1,
        }
    }

    /// Inserts all labels of `other` after position `pos`.
    pub(crate) fn splice(&self, pos: usize, other: &FusionPath) -> FusionPath {
        debug_assert!(pos <= self.len());
        debug_assert!(self.len() + other.len() <= MAX_ANYONS);
        let low = self.bits & ((1u32 << pos) - 1);
        let high = self.bits >> pos;
        FusionPath {
            bits: low | (other.bits << pos) | (high << (pos + other.len())),
            len: self.len + other.len,
        }
    }

    /// Removes labels at 1-based positions `i..=j` (inclusive).
    pub(crate) fn excise(&self, i: usize, j: usize) -> FusionPath {
        debug_assert!(i >= 1 && i <= j && j <= self.len());
        let pos = i - 1;
        let low = self.bits & ((1u32 << pos) - 1);
        let high = self.bits >> j;
        FusionPath {
            bits: low | (high << pos),
            len: self.len - (j - i + 1) as u8,
        }
    }

    /// The labels at 1-based positions `i..=j` as a standalone bit sequence.
    pub(crate) fn segment(&self, i: usize, j: usize) -> u32 {
        debug_assert!(i >= 1 && i <= j && j <= self.len());
        (self.bits >> (i - 1)) & ((1u32 << (j - i + 1)) - 1)
    }

}

impl Ord for FusionPath {
    /// Lexicographic on `(x₁, x₂, …)` with `0 < 1`: the order is decided by
    /// the lowest-position label where the paths differ.
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        if self.len != other.len {
            return self.len.cmp(&other.len);
        }
        let diff = self.bits ^ other.bits;
        if diff == 0 {
            return std::cmp::Ordering::Equal;
        }
        let lowest = diff.trailing_zeros();
        if (self.bits >> lowest) & 1 == 0 {
            std::cmp::Ordering::Less
        } else {
            std::cmp::Ordering::Greater
        }
    }
}

impl PartialOrd for FusionPath {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for FusionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (1..=self.len()).map(|k| self.charge(k).to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl FromStr for FusionPath {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if trimmed.is_empty() {
            return Ok(FusionPath::empty());
        }
        let mut charges = Vec::new();
        for tok in trimmed.split(',') {
            match tok.trim() {
                "0" => charges.push(Charge::Vacuum),
                "1" => charges.push(Charge::Tau),
                _ => {
                    return Err(BasisError::MalformedPath {
                        text: s.to_string(),
                    })
                }
            }
        }
        FusionPath::from_charges(&charges)
    }
}

/// All admissible paths for `n` anyons with the given total charge, in
/// lexicographic order. The order is part of the crate's contract: the same
/// inputs always produce the same sequence.
pub fn enumerate_basis(n: usize, total: Charge) -> Vec<FusionPath> {
    assert!(n <= MAX_ANYONS, "anyon count {n} exceeds {MAX_ANYONS}");
    let mut out = Vec::with_capacity(dim(n, total));
    if n == 0 {
        if total == Charge::Vacuum {
            out.push(FusionPath::empty());
        }
        return out;
    }
    let mut stack: Vec<(u32, usize, Charge)> = vec![(1, 1, Charge::Tau)];
    // Depth-first with 0-branches explored before 1-branches keeps the
    // output lexicographic without a final sort.
    while let Some((bits, depth, current)) = stack.pop() {
        if depth == n {
            if current == total {
                out.push(FusionPath {
                    bits,
                    len: n as u8,
                });
            }
            continue;
        }
        let remaining = n - depth;
        // Push in reverse so the smaller charge is expanded first.
        for &next in current.fuse_with_tau().iter().rev() {
            if next.can_reach(total, remaining - 1) {
                stack.push((bits | (next.as_bit() << depth), depth + 1, next));
            }
        }
    }
    out
}

/// Number of admissible paths for `n` anyons with the given total charge.
///
/// Satisfies `dim(n, 0) = Fib(n-1)` and `dim(n, 1) = Fib(n)` for `n ≥ 2`
/// with `Fib(1) = Fib(2) = 1`.
pub fn dim(n: usize, total: Charge) -> usize {
    if n == 0 {
        return if total == Charge::Vacuum { 1 } else { 0 };
    }
    // Walk counts on the two-state fusion graph starting from x₁ = 1.
    let (mut at_vacuum, mut at_tau) = (0u64, 1u64);
    for _ in 1..n {
        let next_vacuum = at_tau;
        let next_tau = at_vacuum + at_tau;
        at_vacuum = next_vacuum;
        at_tau = next_tau;
    }
    (match total {
        Charge::Vacuum => at_vacuum,
        Charge::Tau => at_tau,
    }) as usize
}

/// Sorts raw `(path, amplitude)` pairs, merging duplicate paths and
/// dropping exact zeros. All state-producing operations funnel through
/// this, which keeps iteration order canonical.
pub(crate) fn accumulate_entries(
    mut entries: Vec<(FusionPath, Complex64)>,
) -> Vec<(FusionPath, Complex64)> {
    entries.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(entries.len());
    for (path, amp) in entries {
        match out.last_mut() {
            Some((last, acc)) if *last == path => *acc += amp,
            _ => out.push((path, amp)),
        }
    }
    out.retain(|(_, amp)| amp.norm_sqr() > 0.0);
    out
}

/// A sparse state vector over the fusion-path basis of `n` anyons with a
/// definite total charge, stored as amplitudes sorted by path. The basis is
/// orthonormal by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct AnyonState {
    n: usize,
    total: Charge,
    amps: Vec<(FusionPath, Complex64)>,
}

impl AnyonState {
    /// The basis state concentrated on a single path.
    pub fn basis_state(path: FusionPath) -> AnyonState {
        debug_assert!(path.is_admissible());
        AnyonState {
            n: path.len(),
            total: path.total(),
            amps: vec![(path, Complex64::new(1.0, 0.0))],
        }
    }

    /// The bare vacuum: zero anyons, trivial total charge, amplitude 1.
    pub fn vacuum() -> AnyonState {
        AnyonState::basis_state(FusionPath::empty())
    }

    /// Builds a state from explicit path amplitudes, checking that every
    /// path is admissible for `(n, total)`. The result is not normalized.
    pub fn from_amplitudes(
        n: usize,
        total: Charge,
        amplitudes: impl IntoIterator<Item = (FusionPath, Complex64)>,
    ) -> Result<AnyonState, BasisError> {
        if n > MAX_ANYONS {
            return Err(BasisError::TooManyAnyons { n });
        }
        let mut raw = Vec::new();
        for (path, amp) in amplitudes {
            if path.len() != n || path.total() != total || !path.is_admissible() {
                return Err(BasisError::InadmissiblePath {
                    path: path.to_string(),
                    n,
                    total,
                });
            }
            raw.push((path, amp));
        }
        Ok(AnyonState {
            n,
            total,
            amps: accumulate_entries(raw),
        })
    }

    /// Builds a state from raw entries produced by an operator, merging
    /// duplicate target paths.
    pub(crate) fn from_entries(
        n: usize,
        total: Charge,
        entries: Vec<(FusionPath, Complex64)>,
    ) -> AnyonState {
        AnyonState {
            n,
            total,
            amps: accumulate_entries(entries),
        }
    }

    pub fn anyon_count(&self) -> usize {
        self.n
    }

    pub fn total(&self) -> Charge {
        self.total
    }

    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    /// The full dimension of the space this state lives in.
    pub fn space_dim(&self) -> usize {
        dim(self.n, self.total)
    }

    pub fn amplitude(&self, path: &FusionPath) -> Complex64 {
        match self.amps.binary_search_by(|(p, _)| p.cmp(path)) {
            Ok(idx) => self.amps[idx].1,
            Err(_) => Complex64::zero(),
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&FusionPath, &Complex64)> {
        self.amps.iter().map(|(p, a)| (p, a))
    }

    pub(crate) fn raw_entries(&self) -> &[(FusionPath, Complex64)] {
        &self.amps
    }

    pub fn norm_sq(&self) -> f64 {
        self.amps.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Scales the state to unit norm; zero states cannot be normalized.
    pub fn normalize(&mut self) -> Result<(), BasisError> {
        let norm = self.norm();
        if norm < 1e-150 {
            return Err(BasisError::ZeroState);
        }
        let inv = 1.0 / norm;
        for (_, amp) in self.amps.iter_mut() {
            *amp *= inv;
        }
        self.prune();
        Ok(())
    }

    pub fn normalized(mut self) -> Result<AnyonState, BasisError> {
        self.normalize()?;
        Ok(self)
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sq() - 1.0).abs() <= tol
    }

    /// Drops amplitudes below [`PRUNE_TOL`] in magnitude.
    pub fn prune(&mut self) {
        self.amps.retain(|(_, amp)| amp.norm_sqr() >= PRUNE_TOL * PRUNE_TOL);
    }

    pub fn scale(&mut self, factor: Complex64) {
        for (_, amp) in self.amps.iter_mut() {
            *amp *= factor;
        }
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &AnyonState) -> Result<Complex64, BasisError> {
        if self.n != other.n || self.total != other.total {
            return Err(BasisError::DimensionMismatch {
                n_left: self.n,
                total_left: self.total,
                n_right: other.n,
                total_right: other.total,
            });
        }
        // Both supports are sorted; walk them together.
        let mut acc = Complex64::zero();
        let (mut left, mut right) = (self.amps.iter().peekable(), other.amps.iter().peekable());
        while let (Some((lp, la)), Some((rp, ra))) = (left.peek(), right.peek()) {
            match lp.cmp(rp) {
                std::cmp::Ordering::Less => {
                    left.next();
                }
                std::cmp::Ordering::Greater => {
                    right.next();
                }
                std::cmp::Ordering::Equal => {
                    acc += la.conj() * ra;
                    left.next();
                    right.next();
                }
            }
        }
        Ok(acc)
    }

    /// Places `other` to the right of `self`. Requires `self` to carry
    /// trivial total charge so the concatenated labels stay admissible.
    pub fn tensor(&self, other: &AnyonState) -> Result<AnyonState, BasisError> {
        self.splice_at(self.n, other)
    }

    /// Inserts `other` (which must carry trivial total charge) after anyon
    /// position `pos` of `self`. Every path of `self` must carry charge 0
    /// at the splice point.
    pub fn splice_at(&self, pos: usize, other: &AnyonState) -> Result<AnyonState, BasisError> {
        if other.total != Charge::Vacuum {
            return Err(BasisError::DimensionMismatch {
                n_left: self.n,
                total_left: self.total,
                n_right: other.n,
                total_right: other.total,
            });
        }
        if self.n + other.n > MAX_ANYONS {
            return Err(BasisError::TooManyAnyons { n: self.n + other.n });
        }
        let mut raw = Vec::with_capacity(self.amps.len() * other.amps.len());
        for (path, amp) in self.amps.iter() {
            if path.charge(pos) != Charge::Vacuum {
                return Err(BasisError::SpliceBoundary { position: pos });
            }
            for (ins, ins_amp) in other.amps.iter() {
                let glued = path.splice(pos, ins);
                debug_assert!(glued.is_admissible());
                raw.push((glued, amp * ins_amp));
            }
        }
        Ok(AnyonState {
            n: self.n + other.n,
            total: self.total,
            amps: accumulate_entries(raw),
        })
    }

    /// Canonical text rendering: one `path: amplitude` pair per line in
    /// basis order. Stable across runs.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (path, amp) in self.amps.iter() {
            out.push_str(&format!("{}: {:+.17e}{:+.17e}i\n", path, amp.re, amp.im));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent path counter: plain recursion over the fusion graph,
    /// no packing, no pruning.
    fn count_paths_brute(n: usize, total: Charge) -> usize {
        fn go(depth: usize, n: usize, current: Charge, total: Charge) -> usize {
            if depth == n {
                return usize::from(current == total);
            }
            current
                .fuse_with_tau()
                .iter()
                .map(|&next| go(depth + 1, n, next, total))
                .sum()
        }
        if n == 0 {
            return usize::from(total == Charge::Vacuum);
        }
        go(1, n, Charge::Tau, total)
    }

    fn fib(k: usize) -> usize {
        // Fib(1) = Fib(2) = 1.
        let (mut a, mut b) = (1usize, 1usize);
        for _ in 2..k {
            let c = a + b;
            a = b;
            b = c;
        }
        if k <= 2 {
            1
        } else {
            b
        }
    }

    #[test]
    fn two_anyons_vacuum_is_forced() {
        let basis = enumerate_basis(2, Charge::Vacuum);
        assert_eq!(basis.len(), 1);
        assert_eq!(basis[0].to_string(), "1,0");
    }

    #[test]
    fn four_anyons_vacuum_has_the_two_qubit_paths() {
        let basis = enumerate_basis(4, Charge::Vacuum);
        let rendered: Vec<String> = basis.iter().map(|p| p.to_string()).collect();
        assert_eq!(rendered, vec!["1,0,1,0", "1,1,1,0"]);
    }

    #[test]
    fn twenty_anyons_vacuum_dimension() {
        assert_eq!(enumerate_basis(20, Charge::Vacuum).len(), 4181);
        assert_eq!(dim(20, Charge::Vacuum), 4181);
    }

    #[test]
    fn small_dims_match_hand_enumeration() {
        assert_eq!(dim(4, Charge::Vacuum), 2);
        assert_eq!(dim(4, Charge::Tau), 3);
        assert_eq!(dim(0, Charge::Vacuum), 1);
        assert_eq!(dim(0, Charge::Tau), 0);
        assert_eq!(dim(1, Charge::Tau), 1);
        assert_eq!(dim(1, Charge::Vacuum), 0);
    }

    #[test]
    fn dims_match_brute_force_and_fibonacci() {
        for n in 0..=24 {
            for total in [Charge::Vacuum, Charge::Tau] {
                assert_eq!(dim(n, total), count_paths_brute(n, total), "n={n} total={total}");
            }
            if n >= 2 {
                assert_eq!(dim(n, Charge::Vacuum), fib(n - 1));
                assert_eq!(dim(n, Charge::Tau), fib(n));
            }
        }
    }

    #[test]
    fn fibonacci_recursion_via_transfer_graph() {
        for n in 2..=24 {
            assert_eq!(
                dim(n, Charge::Vacuum) + dim(n, Charge::Tau),
                dim(n + 1, Charge::Tau)
            );
            assert_eq!(dim(n, Charge::Tau), dim(n + 1, Charge::Vacuum));
        }
    }

    #[test]
    fn enumeration_has_no_duplicates_and_only_admissible_paths() {
        for n in 0..=12 {
            for total in [Charge::Vacuum, Charge::Tau] {
                let basis = enumerate_basis(n, total);
                let mut seen = std::collections::BTreeSet::new();
                for path in &basis {
                    assert!(path.is_admissible());
                    assert_eq!(path.len(), n);
                    assert_eq!(path.total(), total);
                    assert!(seen.insert(*path), "duplicate path {path}");
                }
            }
        }
    }

    #[test]
    fn enumeration_order_is_stable_and_sorted() {
        let first = enumerate_basis(9, Charge::Tau);
        let second = enumerate_basis(9, Charge::Tau);
        let render = |basis: &[FusionPath]| {
            basis.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(";")
        };
        assert_eq!(render(&first), render(&second));
        let mut sorted = first.clone();
        sorted.sort();
        assert_eq!(first, sorted, "enumeration order must agree with path ordering");
    }

    #[test]
    fn enumeration_snapshot_five_anyons() {
        let rendered: Vec<String> = enumerate_basis(5, Charge::Tau)
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(
            rendered,
            vec!["1,0,1,0,1", "1,0,1,1,1", "1,1,0,1,1", "1,1,1,0,1", "1,1,1,1,1"]
        );
    }

    #[test]
    fn basis_states_are_orthonormal() {
        let basis = enumerate_basis(6, Charge::Vacuum);
        for p in &basis {
            for q in &basis {
                let ip = AnyonState::basis_state(*p)
                    .inner_product(&AnyonState::basis_state(*q))
                    .unwrap();
                let expected = if p == q { 1.0 } else { 0.0 };
                assert!((ip.re - expected).abs() < 1e-15 && ip.im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn pythagorean_norm() {
        let basis = enumerate_basis(4, Charge::Vacuum);
        let state = AnyonState::from_amplitudes(
            4,
            Charge::Vacuum,
            vec![
                (basis[0], Complex64::new(3.0 / 5.0, 0.0)),
                (basis[1], Complex64::new(0.0, 4.0 / 5.0)),
            ],
        )
        .unwrap();
        let ip = state.inner_product(&state).unwrap();
        assert!((ip.re - 1.0).abs() < 1e-15 && ip.im.abs() < 1e-15);
    }

    #[test]
    fn inner_product_rejects_mismatched_spaces() {
        let a = AnyonState::basis_state(FusionPath::from_charges(&[Charge::Tau, Charge::Vacuum]).unwrap());
        let b = AnyonState::vacuum();
        assert!(matches!(
            a.inner_product(&b),
            Err(BasisError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_anyons_with_charge_one_is_empty() {
        assert!(enumerate_basis(0, Charge::Tau).is_empty());
    }

    #[test]
    fn path_text_round_trip() {
        let path: FusionPath = "1,0,1,0".parse().unwrap();
        assert_eq!(path.to_string(), "1,0,1,0");
        assert!("1,0,0,1".parse::<FusionPath>().is_err());
        assert!("2,0".parse::<FusionPath>().is_err());
        assert!("0,1".parse::<FusionPath>().is_err());
    }

    #[test]
    fn surgery_round_trips() {
        let path: FusionPath = "1,1,0,1,1,0".parse().unwrap();
        let inserted = path.insert_two(2, Charge::Vacuum, Charge::Tau);
        assert_eq!(inserted.to_string(), "1,1,0,1,0,1,1,0");
        assert_eq!(inserted.remove_two(3), path);
        assert_eq!(path.segment(2, 4), 0b101);
        let excised = path.excise(3, 4);
        assert_eq!(excised.to_string(), "1,1,1,0");
    }

    proptest! {
        #[test]
        fn prop_inner_product_conjugate_symmetry(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let basis = enumerate_basis(6, Charge::Vacuum);
            let rand_state = |rng: &mut rand_chacha::ChaCha8Rng| {
                AnyonState::from_amplitudes(
                    6,
                    Charge::Vacuum,
                    basis.iter().map(|p| {
                        (*p, Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    }),
                )
                .unwrap()
            };
            let a = rand_state(&mut rng);
            let b = rand_state(&mut rng);
            let ab = a.inner_product(&b).unwrap();
            let ba = b.inner_product(&a).unwrap();
            prop_assert!((ab - ba.conj()).norm() < 1e-12);
            let aa = a.inner_product(&a).unwrap();
            prop_assert!(aa.re >= 0.0 && aa.im.abs() < 1e-12);
        }

        #[test]
        fn prop_splice_preserves_norm(seed in 0u64..200) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let left_basis = enumerate_basis(4, Charge::Vacuum);
            let right_basis = enumerate_basis(4, Charge::Vacuum);
            let mk = |basis: &[FusionPath], rng: &mut rand_chacha::ChaCha8Rng| {
                AnyonState::from_amplitudes(
                    4,
                    Charge::Vacuum,
                    basis.iter().map(|p| {
                        (*p, Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                    }),
                )
                .unwrap()
                .normalized()
                .unwrap()
            };
            let a = mk(&left_basis, &mut rng);
            let b = mk(&right_basis, &mut rng);
            let glued = a.tensor(&b).unwrap();
            prop_assert!((glued.norm_sq() - 1.0).abs() < 1e-12);
        }
    }
}
