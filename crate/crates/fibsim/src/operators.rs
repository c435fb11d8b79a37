//! Physical operations on fusion-path states: braid generators, collective
//! charge projectors and measurements, pair creation, and fusion of adjacent
//! anyons.
//!
//! Braiding strand `k` mixes only the label `xₖ`, conditioned on its
//! neighbours `x_{k-1}` and `x_{k+1}`: when the neighbours agree on charge τ
//! the 2×2 block `F·R·F` applies, otherwise the pair channel is forced and a
//! pure `R` phase is picked up. Collective charge of a contiguous range is
//! exposed by a cascade of elementary F-moves that re-associates the fusion
//! tree, after which the projector is diagonal.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use num_complex::Complex64;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fusion_basis::{dim, enumerate_basis, AnyonState, BasisError, Charge, FusionPath};

/// The golden ratio φ = (1+√5)/2, the quantum dimension of the τ anyon.
pub fn phi() -> f64 {
    0.5 * (1.0 + 5.0_f64.sqrt())
}

pub fn sqrt_phi() -> f64 {
    phi().sqrt()
}

/// Quantum dimension of a charge: 1 for the vacuum, φ for τ.
pub fn charge_dim(c: Charge) -> f64 {
    match c {
        Charge::Vacuum => 1.0,
        Charge::Tau => phi(),
    }
}

/// Exchange phase for a pair of τ anyons in fusion channel `c`:
/// `e^{-i4π/5}` for the vacuum channel and `e^{i3π/5}` for the τ channel.
pub fn r_phase(c: Charge) -> Complex64 {
    match c {
        Charge::Vacuum => Complex64::from_polar(1.0, -4.0 * std::f64::consts::PI / 5.0),
        Charge::Tau => Complex64::from_polar(1.0, 3.0 * std::f64::consts::PI / 5.0),
    }
}

/// The diagonal exchange matrix `Diag(e^{-i4π/5}, e^{i3π/5})`.
#[derive(Debug, Clone, Copy)]
pub struct RMatrix;

impl RMatrix {
    /// Diagonal entries indexed by fusion channel (vacuum first).
    pub fn entries() -> [Complex64; 2] {
        [r_phase(Charge::Vacuum), r_phase(Charge::Tau)]
    }
}

/// The recoupling matrix `[[φ⁻¹, φ^{-1/2}], [φ^{-1/2}, -φ⁻¹]]`, the only
/// non-trivial F-move of the Fibonacci theory. Real, symmetric and
/// self-inverse.
#[derive(Debug, Clone, Copy)]
pub struct FMatrix;

impl FMatrix {
    pub fn entries() -> [[f64; 2]; 2] {
        let p = phi();
        let s = sqrt_phi();
        [[1.0 / p, 1.0 / s], [1.0 / s, -1.0 / p]]
    }

    fn entry(e: Charge, f: Charge) -> f64 {
        Self::entries()[e.as_bit() as usize][f.as_bit() as usize]
    }
}

/// Direction of a half twist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    pub fn reversed(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

/// Forced-measurement acceptance policy.
///
/// `Literal` accepts as soon as the pair measures charge 0. `Strict`
/// additionally requires the most recent group measurement (if any) to have
/// been 0 before accepting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForcedMode {
    #[default]
    Literal,
    Strict,
}

#[derive(Debug, Error)]
pub enum OpError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error("strand index {k} out of range for {n} anyons")]
    StrandOutOfRange { k: usize, n: usize },
    #[error("anyon range {i}..{j} is invalid for {n} anyons")]
    BadRange { i: usize, j: usize, n: usize },
    #[error("both measurement outcomes have probability below 1e-14; the state is numerically degenerate")]
    DegenerateMeasurement,
    #[error("forced measurement did not converge within {max_iter} iterations")]
    ForcedMeasurementDivergence { max_iter: u64 },
    #[error("replay source ran out of recorded outcomes")]
    ReplayExhausted,
    #[error("recorded outcome has probability {probability:.3e}; replay would need an impossible branch")]
    ReplayImpossible { probability: f64 },
    #[error("requested branch has probability {probability:.3e}; cannot post-select on it")]
    BranchImpossible { probability: f64 },
    #[error("operator shapes do not compose: {left} then {right}")]
    ShapeMismatch { left: String, right: String },
    #[error("malformed braid word {word:?}: {reason}")]
    MalformedBraidWord { word: String, reason: String },
}

/// Deterministic source of binary decisions for stochastic operations.
///
/// Every measurement-like operation consumes exactly one decision. A seeded
/// source draws one uniform variate per decision from a counter-based
/// generator; independent streams of the same seed never overlap, which is
/// how Monte Carlo runs are split across workers. A replay source feeds back
/// the outcomes recorded in a trace.
#[derive(Debug, Clone)]
pub enum RandomSource {
    Seeded(ChaCha8Rng),
    Replay(VecDeque<bool>),
}

impl RandomSource {
    pub fn from_seed(seed: u64) -> RandomSource {
        RandomSource::Seeded(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Stream `stream` of the generator seeded with `seed`. Distinct streams
    /// are statistically independent.
    pub fn stream(seed: u64, stream: u64) -> RandomSource {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource::Seeded(rng)
    }

    /// Replays a recorded sequence of branch decisions (`true` = the
    /// first/charge-0 branch).
    pub fn replay(decisions: impl IntoIterator<Item = bool>) -> RandomSource {
        RandomSource::Replay(decisions.into_iter().collect())
    }

    /// Decides between two branches where the first has probability
    /// `p_first`. Returns `true` for the first branch.
    pub fn decide(&mut self, p_first: f64) -> Result<bool, OpError> {
        match self {
            RandomSource::Seeded(rng) => Ok(rng.gen::<f64>() < p_first),
            RandomSource::Replay(queue) => {
                let took_first = queue.pop_front().ok_or(OpError::ReplayExhausted)?;
                let p = if took_first { p_first } else { 1.0 - p_first };
                if p < 1e-14 {
                    return Err(OpError::ReplayImpossible { probability: p });
                }
                Ok(took_first)
            }
        }
    }
}

/// Result of measuring the collective charge of a group of anyons.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub observed: Charge,
    /// Born probability of the observed outcome on the (normalized) input.
    pub probability: f64,
    /// Normalized post-measurement state.
    pub post_state: AnyonState,
}

/// Result of fusing two adjacent anyons.
#[derive(Debug, Clone)]
pub struct FusionOutcome {
    pub observed: Charge,
    pub probability: f64,
    /// Normalized state after the fusion: two anyons fewer for a vacuum
    /// outcome, one fewer when the pair fuses to a single anyon.
    pub post_state: AnyonState,
}

fn check_strand(state: &AnyonState, k: usize) -> Result<(), OpError> {
    let n = state.anyon_count();
    if n < 2 || k < 1 || k > n - 1 {
        return Err(OpError::StrandOutOfRange { k, n });
    }
    Ok(())
}

fn check_range(state: &AnyonState, i: usize, j: usize) -> Result<(), OpError> {
    let n = state.anyon_count();
    if i < 1 || i > j || j > n {
        return Err(OpError::BadRange { i, j, n });
    }
    Ok(())
}

/// The 2×2 amplitude mixing block `F·R^{±1}·F` that braiding applies when a
/// strand's neighbours both carry charge τ.
fn braid_mix(orientation: Orientation) -> [[Complex64; 2]; 2] {
    let f = FMatrix::entries();
    let r = RMatrix::entries();
    let r = match orientation {
        Orientation::Positive => r,
        Orientation::Negative => [r[0].conj(), r[1].conj()],
    };
    let mut out = [[Complex64::zero(); 2]; 2];
    for e in 0..2 {
        for g in 0..2 {
            let mut acc = Complex64::zero();
            for c in 0..2 {
                acc += Complex64::new(f[e][c], 0.0) * r[c] * Complex64::new(f[c][g], 0.0);
            }
            out[e][g] = acc;
        }
    }
    out
}

/// Applies the elementary braid `σₖ` (or its inverse) exchanging anyons `k`
/// and `k+1`. Unitary; couples only paths that differ at label `xₖ`.
pub fn apply_braid(state: &AnyonState, k: usize, orientation: Orientation) -> Result<AnyonState, OpError> {
    check_strand(state, k)?;
    let mix = braid_mix(orientation);
    let phase = |c: Charge| match orientation {
        Orientation::Positive => r_phase(c),
        Orientation::Negative => r_phase(c).conj(),
    };
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(2 * state.support_size());
    for (path, &amp) in state.entries() {
        let a = path.charge(k - 1);
        let b = path.charge(k + 1);
        if a == Charge::Tau && b == Charge::Tau {
            let x = path.charge(k).as_bit() as usize;
            for new_bit in 0..2 {
                let coeff = mix[new_bit][x];
                if coeff.norm_sqr() == 0.0 {
                    continue;
                }
                let target = path.with_charge(k, Charge::from_bit(new_bit as u32));
                out.push((target, coeff * amp));
            }
        } else {
            // The pair channel is forced: vacuum when both neighbours are
            // trivial, τ otherwise.
            let channel = if a == Charge::Vacuum && b == Charge::Vacuum {
                Charge::Vacuum
            } else {
                Charge::Tau
            };
            out.push((*path, phase(channel) * amp));
        }
    }
    let mut result = AnyonState::from_entries(state.anyon_count(), state.total(), out);
    result.prune();
    Ok(result)
}

/// Applies `σₖ` raised to an integer power.
pub fn apply_braid_power(state: &AnyonState, k: usize, power: i32) -> Result<AnyonState, OpError> {
    let orientation = if power >= 0 { Orientation::Positive } else { Orientation::Negative };
    let mut st = state.clone();
    for _ in 0..power.unsigned_abs() {
        st = apply_braid(&st, k, orientation)?;
    }
    Ok(st)
}

/// A braid word: a temporal sequence of signed generator powers, applied
/// left to right. The text form uses tokens `sK` and `sK^P`, e.g.
/// `"s1 s2 s1^-4"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BraidWord {
    pub factors: Vec<(usize, i32)>,
}

impl BraidWord {
    pub fn parse(text: &str) -> Result<BraidWord, OpError> {
        let mut factors = Vec::new();
        for token in text.split_whitespace() {
            let body = token.strip_prefix('s').ok_or_else(|| OpError::MalformedBraidWord {
                word: text.to_string(),
                reason: format!("token {token:?} does not start with 's'"),
            })?;
            let (index_part, power_part) = match body.split_once('^') {
                Some((i, p)) => (i, Some(p)),
                None => (body, None),
            };
            let k: usize = index_part.parse().map_err(|_| OpError::MalformedBraidWord {
                word: text.to_string(),
                reason: format!("bad strand index in {token:?}"),
            })?;
            if k == 0 {
                return Err(OpError::MalformedBraidWord {
                    word: text.to_string(),
                    reason: "strand indices are 1-based".to_string(),
                });
            }
            let power: i32 = match power_part {
                Some(p) => p.parse().map_err(|_| OpError::MalformedBraidWord {
                    word: text.to_string(),
                    reason: format!("bad power in {token:?}"),
                })?,
                None => 1,
            };
            factors.push((k, power));
        }
        Ok(BraidWord { factors })
    }

    pub fn apply(&self, state: &AnyonState) -> Result<AnyonState, OpError> {
        let mut st = state.clone();
        for &(k, power) in &self.factors {
            st = apply_braid_power(&st, k, power)?;
        }
        Ok(st)
    }
}

impl fmt::Display for BraidWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .factors
            .iter()
            .map(|&(k, p)| if p == 1 { format!("s{k}") } else { format!("s{k}^{p}") })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

// ---------------------------------------------------------------------------
// Collective charge of a contiguous range via an F-move cascade.
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum CascadeDirection {
    Forward,
    Backward,
}

/// One F-move of the cascade that exposes the collective charge of anyons
/// `i..=j`. After `r` forward moves the label at slot `i + r - 1` holds the
/// charge of the first `r + 1` anyons of the range instead of the chain
/// prefix charge. The move is conditioned on `a` (the chain charge before
/// the range), `b` (the charge of the range's first `r` anyons) and `d`
/// (the label after the moved slot); only `a = b = τ` with `d = τ` mixes
/// amplitudes, through the self-inverse F-matrix.
fn cascade_step(
    amps: Vec<(FusionPath, Complex64)>,
    i: usize,
    r: usize,
    direction: CascadeDirection,
) -> Vec<(FusionPath, Complex64)> {
    let slot = i + r - 1;
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(2 * amps.len());
    for (path, amp) in amps {
        let a = path.charge(i - 1);
        let b = if r == 1 { Charge::Tau } else { path.charge(i + r - 2) };
        let d = path.charge(i + r);
        if a == Charge::Vacuum {
            // Trivial recoupling: the moved label switches between the
            // forced values e = b and f = d.
            let target = path.with_charge(slot, match direction {
                CascadeDirection::Forward => d,
                CascadeDirection::Backward => b,
            });
            out.push((target, amp));
        } else if b == Charge::Vacuum {
            // e = a and f = τ are both forced.
            let target = path.with_charge(slot, match direction {
                CascadeDirection::Forward => Charge::Tau,
                CascadeDirection::Backward => a,
            });
            out.push((target, amp));
        } else if d == Charge::Vacuum {
            // Both internal labels are forced to τ; nothing moves.
            debug_assert_eq!(path.charge(slot), Charge::Tau);
            out.push((path, amp));
        } else {
            // a = b = d = τ: genuine 2×2 recoupling. F is self-inverse, so
            // forward and backward moves use the same coefficients.
            let e = path.charge(slot);
            for new_bit in 0..2u32 {
                let f_new = Charge::from_bit(new_bit);
                let coeff = FMatrix::entry(e, f_new);
                if coeff == 0.0 {
                    continue;
                }
                let target = path.with_charge(slot, f_new);
                out.push((target, Complex64::new(coeff, 0.0) * amp));
            }
        }
    }
    // Each move couples at most two labels; merging here keeps the entry
    // count bounded by the sector dimension through the cascade.
    crate::fusion_basis::accumulate_entries(out)
}

/// Projects onto "anyons `i..=j` have collective charge `c`".
///
/// Returns the unnormalized projected state and, for a normalized input,
/// the Born probability `‖Pψ‖²`.
pub fn project_charge(
    state: &AnyonState,
    i: usize,
    j: usize,
    c: Charge,
) -> Result<(AnyonState, f64), OpError> {
    check_range(state, i, j)?;
    let m = j - i + 1;
    if m == 1 {
        // A single anyon always carries charge τ.
        let post = match c {
            Charge::Tau => state.clone(),
            Charge::Vacuum => AnyonState::from_entries(state.anyon_count(), state.total(), Vec::new()),
        };
        let p = post.norm_sq();
        return Ok((post, p));
    }
    let mut amps = state.raw_entries().to_vec();
    for r in 1..m {
        amps = cascade_step(amps, i, r, CascadeDirection::Forward);
    }
    // In the fully re-associated tree the label at slot j-1 is the range's
    // collective charge.
    amps.retain(|(path, _)| path.charge(j - 1) == c);
    for r in (1..m).rev() {
        amps = cascade_step(amps, i, r, CascadeDirection::Backward);
    }
    let mut post = AnyonState::from_entries(state.anyon_count(), state.total(), amps);
    post.prune();
    let p = post.norm_sq();
    Ok((post, p))
}

/// Measures the collective charge of anyons `i..=j`, sampling the outcome
/// from the Born rule. Consumes exactly one decision from `src`.
pub fn measure_charge(
    state: &AnyonState,
    i: usize,
    j: usize,
    src: &mut RandomSource,
) -> Result<MeasurementOutcome, OpError> {
    let (post_zero, p_zero) = project_charge(state, i, j, Charge::Vacuum)?;
    let (post_one, p_one) = project_charge(state, i, j, Charge::Tau)?;
    if p_zero < 1e-14 && p_one < 1e-14 {
        return Err(OpError::DegenerateMeasurement);
    }
    let took_zero = src.decide(p_zero)?;
    let (observed, probability, post) = if took_zero {
        (Charge::Vacuum, p_zero, post_zero)
    } else {
        (Charge::Tau, p_one, post_one)
    };
    Ok(MeasurementOutcome {
        observed,
        probability,
        post_state: post.normalized()?,
    })
}

/// Projects the collective charge of anyons `i..=j` onto a chosen outcome
/// and renormalizes. Consumes no randomness; fails if the branch has
/// (numerically) zero probability.
pub fn project_outcome(
    state: &AnyonState,
    i: usize,
    j: usize,
    c: Charge,
) -> Result<MeasurementOutcome, OpError> {
    let (post, p) = project_charge(state, i, j, c)?;
    if p < 1e-14 {
        return Err(OpError::BranchImpossible { probability: p });
    }
    Ok(MeasurementOutcome {
        observed: c,
        probability: p,
        post_state: post.normalized()?,
    })
}

// ---------------------------------------------------------------------------
// Pair creation and fusion.
// ---------------------------------------------------------------------------

/// Inserts two anyons in the vacuum channel after position `position`
/// (`0 ≤ position ≤ n`). The insertion is an isometry, so a normalized
/// input stays normalized. Total charge is unchanged.
pub fn create_pair(state: &AnyonState, position: usize) -> Result<AnyonState, OpError> {
    let n = state.anyon_count();
    if position > n {
        return Err(OpError::BadRange { i: position, j: position, n });
    }
    let p = phi();
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(2 * state.support_size());
    for (path, &amp) in state.entries() {
        let boundary = path.charge(position);
        for &y in boundary.fuse_with_tau() {
            let coeff = (charge_dim(y) / (p * charge_dim(boundary))).sqrt();
            let target = path.insert_two(position, y, boundary);
            out.push((target, Complex64::new(coeff, 0.0) * amp));
        }
    }
    Ok(AnyonState::from_entries(n + 2, state.total(), out))
}

/// The unnormalized component of `state` in which anyons `k, k+1` fuse to
/// the vacuum, expressed on the chain with both anyons removed. Its squared
/// norm is the Born probability of the vacuum outcome.
pub(crate) fn vacuum_fusion_component(state: &AnyonState, k: usize) -> AnyonState {
    let p = phi();
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(state.support_size());
    for (path, &amp) in state.entries() {
        let a = path.charge(k - 1);
        if path.charge(k + 1) != a {
            continue;
        }
        let y = path.charge(k);
        let coeff = (charge_dim(y) / (p * charge_dim(a))).sqrt();
        let target = path.remove_two(k);
        out.push((target, Complex64::new(coeff, 0.0) * amp));
    }
    let mut st = AnyonState::from_entries(state.anyon_count() - 2, state.total(), out);
    st.prune();
    st
}

/// The unnormalized component in which anyons `k, k+1` fuse to a single τ,
/// expressed on the chain with the pair replaced by one anyon.
pub(crate) fn single_fusion_component(state: &AnyonState, k: usize) -> AnyonState {
    let mut out: Vec<(FusionPath, Complex64)> = Vec::with_capacity(state.support_size());
    for (path, &amp) in state.entries() {
        let a = path.charge(k - 1);
        let x = path.charge(k);
        let b = path.charge(k + 1);
        // Coefficient of the τ-channel split vertex for boundary (a, b).
        let coeff = match (a, b) {
            (Charge::Vacuum, Charge::Vacuum) => continue,
            (Charge::Vacuum, Charge::Tau) | (Charge::Tau, Charge::Vacuum) => {
                debug_assert_eq!(x, Charge::Tau);
                1.0
            }
            (Charge::Tau, Charge::Tau) => match x {
                Charge::Vacuum => 1.0 / sqrt_phi(),
                Charge::Tau => -1.0 / phi(),
            },
        };
        let target = path.remove_one(k);
        out.push((target, Complex64::new(coeff, 0.0) * amp));
    }
    let mut st = AnyonState::from_entries(state.anyon_count() - 1, state.total(), out);
    st.prune();
    st
}

/// Fuses the adjacent anyons `k, k+1`, sampling the channel from the Born
/// rule. A vacuum outcome removes both anyons; a τ outcome replaces them by
/// a single anyon. Consumes exactly one decision from `src`.
pub fn fuse_adjacent(
    state: &AnyonState,
    k: usize,
    src: &mut RandomSource,
) -> Result<FusionOutcome, OpError> {
    check_strand(state, k)?;
    let vacuum_part = vacuum_fusion_component(state, k);
    let single_part = single_fusion_component(state, k);
    let p_zero = vacuum_part.norm_sq();
    let p_one = single_part.norm_sq();
    if p_zero < 1e-14 && p_one < 1e-14 {
        return Err(OpError::DegenerateMeasurement);
    }
    let took_zero = src.decide(p_zero)?;
    let (observed, probability, post) = if took_zero {
        (Charge::Vacuum, p_zero, vacuum_part)
    } else {
        (Charge::Tau, p_one, single_part)
    };
    Ok(FusionOutcome {
        observed,
        probability,
        post_state: post.normalized()?,
    })
}

/// Fuses anyons `k, k+1` on a chosen channel (post-selection). Consumes no
/// randomness; fails if the branch has (numerically) zero probability.
pub fn fuse_outcome(state: &AnyonState, k: usize, c: Charge) -> Result<FusionOutcome, OpError> {
    check_strand(state, k)?;
    let part = match c {
        Charge::Vacuum => vacuum_fusion_component(state, k),
        Charge::Tau => single_fusion_component(state, k),
    };
    let p = part.norm_sq();
    if p < 1e-14 {
        return Err(OpError::BranchImpossible { probability: p });
    }
    Ok(FusionOutcome {
        observed: c,
        probability: p,
        post_state: part.normalized()?,
    })
}

/// One step of a forced fusion, reported to the caller's observer.
#[derive(Debug, Clone, Copy)]
pub struct ForcedStep {
    /// True for measurements of the pair being fused, false for the group.
    pub on_pair: bool,
    pub observed: Charge,
    pub probability: f64,
}

/// Iteration counts of a completed forced fusion.
#[derive(Debug, Clone, Copy, Default)]
pub struct ForcedStats {
    pub pair_measurements: u64,
    pub group_measurements: u64,
}

/// Forces anyons `pair_start, pair_start+1` to fuse to the vacuum by
/// alternating charge measurements of the pair and of the `group` range,
/// then annihilating the pair once it reads charge 0. Succeeds with
/// probability one; `max_iter` bounds the alternation as a failure guard.
///
/// Every intermediate measurement is reported to `observer` in order, so
/// callers can log outcomes for replay.
pub fn force_fuse_vacuum(
    state: &AnyonState,
    pair_start: usize,
    group: (usize, usize),
    src: &mut RandomSource,
    mode: ForcedMode,
    max_iter: u64,
    mut observer: impl FnMut(ForcedStep),
) -> Result<(AnyonState, ForcedStats), OpError> {
    check_strand(state, pair_start)?;
    check_range(state, group.0, group.1)?;
    let mut current = state.clone();
    let mut stats = ForcedStats::default();
    let mut last_group: Option<Charge> = None;
    for _ in 0..max_iter {
        let pair = measure_charge(&current, pair_start, pair_start + 1, src)?;
        stats.pair_measurements += 1;
        observer(ForcedStep {
            on_pair: true,
            observed: pair.observed,
            probability: pair.probability,
        });
        current = pair.post_state;
        let accept = pair.observed == Charge::Vacuum
            && (mode == ForcedMode::Literal || last_group != Some(Charge::Tau));
        if accept {
            // The pair now has definite vacuum charge; annihilating it is
            // deterministic.
            let fused = vacuum_fusion_component(&current, pair_start).normalized()?;
            return Ok((fused, stats));
        }
        let group_meas = measure_charge(&current, group.0, group.1, src)?;
        stats.group_measurements += 1;
        observer(ForcedStep {
            on_pair: false,
            observed: group_meas.observed,
            probability: group_meas.probability,
        });
        last_group = Some(group_meas.observed);
        current = group_meas.post_state;
    }
    Err(OpError::ForcedMeasurementDivergence { max_iter })
}

// ---------------------------------------------------------------------------
// Sparse linear maps between fusion bases.
// ---------------------------------------------------------------------------

/// Identifies a fusion basis: a fixed anyon count with either one definite
/// total charge or both charge sectors stacked (vacuum sector first).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisSpec {
    pub n: usize,
    pub total: Option<Charge>,
}

impl BasisSpec {
    pub fn sector(n: usize, total: Charge) -> BasisSpec {
        BasisSpec { n, total: Some(total) }
    }

    pub fn full(n: usize) -> BasisSpec {
        BasisSpec { n, total: None }
    }

    pub fn dim(&self) -> usize {
        match self.total {
            Some(t) => dim(self.n, t),
            None => dim(self.n, Charge::Vacuum) + dim(self.n, Charge::Tau),
        }
    }

    pub fn paths(&self) -> Vec<FusionPath> {
        match self.total {
            Some(t) => enumerate_basis(self.n, t),
            None => {
                let mut all = enumerate_basis(self.n, Charge::Vacuum);
                all.extend(enumerate_basis(self.n, Charge::Tau));
                all
            }
        }
    }

    pub fn index_of(&self, path: &FusionPath) -> Option<usize> {
        self.paths().iter().position(|p| p == path)
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.total {
            Some(t) => write!(f, "({} anyons, charge {t})", self.n),
            None => write!(f, "({} anyons, both sectors)", self.n),
        }
    }
}

/// A sparse complex matrix between two fusion bases.
#[derive(Debug, Clone)]
pub struct LinearOp {
    pub domain: BasisSpec,
    pub codomain: BasisSpec,
    entries: BTreeMap<(u32, u32), Complex64>,
}

impl LinearOp {
    pub fn zeros(domain: BasisSpec, codomain: BasisSpec) -> LinearOp {
        LinearOp {
            domain,
            codomain,
            entries: BTreeMap::new(),
        }
    }

    pub fn identity(basis: BasisSpec) -> LinearOp {
        let mut op = LinearOp::zeros(basis, basis);
        for idx in 0..basis.dim() {
            op.add_entry(idx, idx, Complex64::new(1.0, 0.0));
        }
        op
    }

    pub fn add_entry(&mut self, row: usize, col: usize, value: Complex64) {
        debug_assert!(row < self.codomain.dim() && col < self.domain.dim());
        if value.norm_sqr() == 0.0 {
            return;
        }
        let slot = self.entries.entry((row as u32, col as u32)).or_insert_with(Complex64::zero);
        *slot += value;
        if slot.norm() < 1e-300 {
            self.entries.remove(&(row as u32, col as u32));
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries
            .get(&(row as u32, col as u32))
            .copied()
            .unwrap_or_else(Complex64::zero)
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Builds an operator column by column from images of basis paths.
    pub fn from_basis_images(
        domain: BasisSpec,
        codomain: BasisSpec,
        mut image: impl FnMut(&FusionPath) -> AnyonState,
    ) -> LinearOp {
        let mut op = LinearOp::zeros(domain, codomain);
        let codomain_paths = codomain.paths();
        let index: BTreeMap<FusionPath, usize> = codomain_paths
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i))
            .collect();
        for (col, path) in domain.paths().iter().enumerate() {
            let img = image(path);
            for (target, &amp) in img.entries() {
                if let Some(&row) = index.get(target) {
                    op.add_entry(row, col, amp);
                }
            }
        }
        op
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &LinearOp) -> Result<LinearOp, OpError> {
        if self.domain != first.codomain {
            return Err(OpError::ShapeMismatch {
                left: first.codomain.to_string(),
                right: self.domain.to_string(),
            });
        }
        // Group the left factor by column for the sparse product.
        let mut by_col: BTreeMap<u32, Vec<(u32, Complex64)>> = BTreeMap::new();
        for (&(row, col), &val) in self.entries.iter() {
            by_col.entry(col).or_default().push((row, val));
        }
        let mut out = LinearOp::zeros(first.domain, self.codomain);
        for (&(mid, col), &first_val) in first.entries.iter() {
            if let Some(rows) = by_col.get(&mid) {
                for &(row, self_val) in rows {
                    out.add_entry(row as usize, col as usize, self_val * first_val);
                }
            }
        }
        Ok(out)
    }

    pub fn adjoint(&self) -> LinearOp {
        let mut out = LinearOp::zeros(self.codomain, self.domain);
        for (&(row, col), &val) in self.entries.iter() {
            out.add_entry(col as usize, row as usize, val.conj());
        }
        out
    }

    pub fn scaled(&self, factor: Complex64) -> LinearOp {
        let mut out = LinearOp::zeros(self.domain, self.codomain);
        for (&(row, col), &val) in self.entries.iter() {
            out.add_entry(row as usize, col as usize, factor * val);
        }
        out
    }

    pub fn add(&self, other: &LinearOp) -> Result<LinearOp, OpError> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(OpError::ShapeMismatch {
                left: self.domain.to_string(),
                right: other.domain.to_string(),
            });
        }
        let mut out = self.clone();
        for (&(row, col), &val) in other.entries.iter() {
            out.add_entry(row as usize, col as usize, val);
        }
        Ok(out)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &LinearOp) -> Result<f64, OpError> {
        Ok(self.add(&other.scaled(Complex64::new(-1.0, 0.0)))?.max_abs())
    }

    /// Largest deviation from a scalar multiple of the identity; the scalar
    /// is read off the first diagonal entry of largest magnitude.
    pub fn deviation_from_scalar_identity(&self) -> f64 {
        let d = self.domain.dim().min(self.codomain.dim());
        let mut scalar = Complex64::zero();
        for i in 0..d {
            let v = self.entry(i, i);
            if v.norm() > scalar.norm() {
                scalar = v;
            }
        }
        if scalar.norm() == 0.0 {
            return self.max_abs();
        }
        let mut worst = 0.0f64;
        for (&(row, col), &val) in self.entries.iter() {
            let expected = if row == col { scalar } else { Complex64::zero() };
            worst = worst.max((val - expected).norm());
        }
        // Missing diagonal entries also count.
        for i in 0..d {
            if self.entry(i, i).norm_sqr() == 0.0 {
                worst = worst.max(scalar.norm());
            }
        }
        worst
    }

    /// Applies a sector-domain operator to a state in that sector.
    pub fn apply_state(&self, state: &AnyonState) -> Result<AnyonState, OpError> {
        let sector = BasisSpec::sector(state.anyon_count(), state.total());
        if self.domain != sector {
            return Err(OpError::ShapeMismatch {
                left: sector.to_string(),
                right: self.domain.to_string(),
            });
        }
        let domain_paths = self.domain.paths();
        let domain_index: BTreeMap<FusionPath, usize> = domain_paths
            .iter()
            .enumerate()
            .map(|(i, p)| (*p, i))
            .collect();
        let codomain_paths = self.codomain.paths();
        let mut amps: Vec<(FusionPath, Complex64)> = Vec::new();
        for (path, &amp) in state.entries() {
            let col = domain_index[path] as u32;
            for (&(row, c), &val) in self.entries.iter() {
                if c == col {
                    amps.push((codomain_paths[row as usize], val * amp));
                }
            }
        }
        let (n_out, total_out) = match self.codomain.total {
            Some(t) => (self.codomain.n, t),
            None => {
                // A sector state maps into a definite sector of the stacked
                // codomain; read it off the support.
                let t = amps.first().map(|(p, _)| p.total()).unwrap_or(Charge::Vacuum);
                (self.codomain.n, t)
            }
        };
        let mut st = AnyonState::from_entries(n_out, total_out, amps);
        st.prune();
        Ok(st)
    }

    pub fn dense(&self) -> Vec<Vec<Complex64>> {
        let rows = self.codomain.dim();
        let cols = self.domain.dim();
        let mut out = vec![vec![Complex64::zero(); cols]; rows];
        for (&(row, col), &val) in self.entries.iter() {
            out[row as usize][col as usize] = val;
        }
        out
    }
}

/// The braid generator `σₖ^{±1}` as a sparse matrix on one charge sector.
pub fn braid_generator(
    n: usize,
    total: Charge,
    k: usize,
    orientation: Orientation,
) -> Result<LinearOp, OpError> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(OpError::StrandOutOfRange { k, n });
    }
    let basis = BasisSpec::sector(n, total);
    Ok(LinearOp::from_basis_images(basis, basis, |path| {
        apply_braid(&AnyonState::basis_state(*path), k, orientation).expect("index checked")
    }))
}

/// The orthogonal projector onto collective charge `c` of anyons `i..=j`
/// as a sparse matrix on one charge sector.
pub fn project_op(
    n: usize,
    total: Charge,
    i: usize,
    j: usize,
    c: Charge,
) -> Result<LinearOp, OpError> {
    if i < 1 || i > j || j > n {
        return Err(OpError::BadRange { i, j, n });
    }
    let basis = BasisSpec::sector(n, total);
    Ok(LinearOp::from_basis_images(basis, basis, |path| {
        project_charge(&AnyonState::basis_state(*path), i, j, c)
            .expect("range checked")
            .0
    }))
}
