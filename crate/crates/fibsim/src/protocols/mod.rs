//! The measurement-assisted protocol stack: ancilla preparation, fusion of
//! input qubits into the three-qubit ancilla with recovery on failure, the
//! random entangling-gate lottery, the ten-state random walk that forces a
//! specific entangling gate, and the end-to-end controlled rotation
//! `CR(2π/5)` on two encoded qubits.
//!
//! Every stochastic step draws from an explicit [`RandomSource`] and is
//! recorded in a [`ProtocolTrace`], so whole runs replay deterministically.

mod entangle;
mod prepare;
mod trace;

pub use entangle::{
    controlled_rotation, dispose_segment, fuse_gamma, random_entangle, walk_to_g1, BranchPlan,
    FuseGammaOutcome, WalkRecord,
};
pub use prepare::{
    apply_d, conjugate_gamma, gate_cz, gate_x, make_alpha, make_beta, middle_qubit,
    prepare_bell, prepare_gamma, AncillaGamma,
};
pub use trace::{ProtocolTrace, TraceEvent};

use num_complex::Complex64;
use thiserror::Error;

use crate::fusion_basis::{AnyonState, BasisError, Charge};
use crate::operators::{
    self, phi, sqrt_phi, ForcedMode, FusionOutcome, MeasurementOutcome, OpError, Orientation,
    RandomSource,
};
use crate::qubit_codec::CodecError;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Op(#[from] OpError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("{what}: retry budget of {budget} attempts exhausted")]
    PreparationBudget { what: &'static str, budget: u64 },
    #[error("random walk did not reach G1 within {max_steps} steps")]
    WalkDivergence { max_steps: u64 },
    #[error("protocol contract violated: {0}")]
    ContractViolation(String),
    #[error("disposal would discard entangled anyons: residual Schmidt weight {residual:.3e}")]
    DisposalEntangled { residual: f64 },
}

/// The four diagonal two-qubit operators used inside ancilla preparation.
/// Their matrices are fixed constants; each is applied as a two-outcome
/// measurement that succeeds with probability `‖Dψ‖²/‖D‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DOperator {
    D1,
    D2,
    D3,
    D4,
}

impl DOperator {
    pub fn diag(self) -> [Complex64; 4] {
        let p = phi();
        let re = |x: f64| Complex64::new(x, 0.0);
        match self {
            DOperator::D1 => [re(0.0), re(1.0), re(1.0), re(1.0 / sqrt_phi())],
            DOperator::D2 => [re(-p), re(1.0), re(1.0), re(0.0)],
            DOperator::D3 => [re(1.0), re(1.0), re(1.0), re(-1.0 / p)],
            DOperator::D4 => [re(1.0), re(1.0), re(1.0), re(-1.0 / (p * p))],
        }
    }

    /// Operator norm: the largest diagonal magnitude.
    pub fn op_norm(self) -> f64 {
        self.diag().iter().map(|d| d.norm()).fold(0.0, f64::max)
    }

    pub fn index(self) -> usize {
        match self {
            DOperator::D1 => 0,
            DOperator::D2 => 1,
            DOperator::D3 => 2,
            DOperator::D4 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DOperator::D1 => "D1",
            DOperator::D2 => "D2",
            DOperator::D3 => "D3",
            DOperator::D4 => "D4",
        }
    }
}

/// `z₁ = cos(2π/5) - i·sin(2π/5) = e^{-2πi/5}`.
pub fn z1() -> Complex64 {
    let theta = 2.0 * std::f64::consts::PI / 5.0;
    Complex64::new(theta.cos(), -theta.sin())
}

/// `z₂ = φ·cos(2π/5) + i·sin(2π/5)`; note `|z₂| ≠ 1`.
pub fn z2() -> Complex64 {
    let theta = 2.0 * std::f64::consts::PI / 5.0;
    Complex64::new(phi() * theta.cos(), theta.sin())
}

/// Which entangling gate (or inverse) one lottery round applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateLabel {
    G1,
    G2,
    G1Inv,
    G2Inv,
}

impl GateLabel {
    /// The projective diagonal the label stands for, in the two-qubit word
    /// basis. The inverses are the complex conjugates (up to scalar).
    pub fn diag(self) -> [Complex64; 4] {
        let (z, conjugate) = match self {
            GateLabel::G1 => (z1(), false),
            GateLabel::G2 => (z2(), false),
            GateLabel::G1Inv => (z1(), true),
            GateLabel::G2Inv => (z2(), true),
        };
        let z = if conjugate { z.conj() } else { z };
        [z, z.conj(), z.conj(), z]
    }

    pub fn name(self) -> &'static str {
        match self {
            GateLabel::G1 => "G1",
            GateLabel::G2 => "G2",
            GateLabel::G1Inv => "G1inv",
            GateLabel::G2Inv => "G2inv",
        }
    }
}

/// Bookkeeping for the random walk: the accumulated gate is `G₁ᵏ·G₂ˡ` with
/// `k` mod 5 and `l ∈ {0, 1}`, ten states in all. The target is `(1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WalkState {
    pub k: u8,
    pub l: u8,
}

impl WalkState {
    pub fn start() -> WalkState {
        WalkState { k: 0, l: 0 }
    }

    pub fn step(self, label: GateLabel) -> WalkState {
        match label {
            GateLabel::G1 => WalkState { k: (self.k + 1) % 5, l: self.l },
            GateLabel::G1Inv => WalkState { k: (self.k + 4) % 5, l: self.l },
            GateLabel::G2 => {
                debug_assert_eq!(self.l, 0, "policy keeps l in {{0, 1}}");
                WalkState { k: self.k, l: 1 }
            }
            GateLabel::G2Inv => {
                debug_assert_eq!(self.l, 1, "policy keeps l in {{0, 1}}");
                WalkState { k: self.k, l: 0 }
            }
        }
    }

    pub fn is_done(self) -> bool {
        self.k == 1 && self.l == 0
    }
}

/// Budgets and tolerances governing one protocol run.
#[derive(Debug, Clone, Copy)]
pub struct ProtocolConfig {
    pub forced_mode: ForcedMode,
    /// Chirality of the five half twists used in recovery; both work.
    pub recovery_twist: Orientation,
    pub prep_retry_budget: u64,
    pub walk_max_steps: u64,
    pub forced_max_iter: u64,
    /// Leakage allowed on states that are contractually inside the code space.
    pub leak_tol: f64,
    /// Largest admissible residual Schmidt weight when discarding anyons.
    pub disposal_tol: f64,
}

impl Default for ProtocolConfig {
    fn default() -> ProtocolConfig {
        ProtocolConfig {
            forced_mode: ForcedMode::Literal,
            recovery_twist: Orientation::Positive,
            prep_retry_budget: 10_000,
            walk_max_steps: 100_000,
            forced_max_iter: 1_000_000,
            leak_tol: 1e-10,
            disposal_tol: 1e-10,
        }
    }
}

/// Aggregate counters for one or many runs; mergeable across workers.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub bell_attempts: u64,
    pub bell_successes: u64,
    pub d_attempts: [u64; 4],
    pub d_successes: [u64; 4],
    pub x_attempts: u64,
    pub x_successes: u64,
    pub forced_fusions: u64,
    pub forced_pair_measurements: u64,
    pub forced_group_measurements: u64,
    /// Pair-measurement count of each completed forced fusion.
    pub forced_iterations: Vec<u64>,
    pub gamma_preparations: u64,
    pub fuse_attempts: u64,
    pub fused: u64,
    pub recovered_left: u64,
    pub recovered_right: u64,
    pub walk_lengths: Vec<u64>,
}

impl RunStats {
    pub fn recovered(&self) -> u64 {
        self.recovered_left + self.recovered_right
    }

    pub fn merge(&mut self, other: &RunStats) {
        self.bell_attempts += other.bell_attempts;
        self.bell_successes += other.bell_successes;
        for i in 0..4 {
            self.d_attempts[i] += other.d_attempts[i];
            self.d_successes[i] += other.d_successes[i];
        }
        self.x_attempts += other.x_attempts;
        self.x_successes += other.x_successes;
        self.forced_fusions += other.forced_fusions;
        self.forced_pair_measurements += other.forced_pair_measurements;
        self.forced_group_measurements += other.forced_group_measurements;
        self.forced_iterations.extend_from_slice(&other.forced_iterations);
        self.gamma_preparations += other.gamma_preparations;
        self.fuse_attempts += other.fuse_attempts;
        self.fused += other.fused;
        self.recovered_left += other.recovered_left;
        self.recovered_right += other.recovered_right;
        self.walk_lengths.extend_from_slice(&other.walk_lengths);
    }
}

/// Owned context of a single protocol run: the randomness source, the event
/// trace, accumulated statistics, and the configuration.
#[derive(Debug)]
pub struct RunContext {
    pub src: RandomSource,
    pub trace: ProtocolTrace,
    pub stats: RunStats,
    pub cfg: ProtocolConfig,
}

impl RunContext {
    pub fn new(src: RandomSource, cfg: ProtocolConfig) -> RunContext {
        RunContext {
            src,
            trace: ProtocolTrace::disabled(),
            stats: RunStats::default(),
            cfg,
        }
    }

    pub fn seeded(seed: u64) -> RunContext {
        RunContext::new(RandomSource::from_seed(seed), ProtocolConfig::default())
    }

    pub fn with_tracing(mut self) -> RunContext {
        self.trace = ProtocolTrace::enabled();
        self
    }

    /// Measures a collective charge, recording the event.
    pub fn measure(
        &mut self,
        state: &AnyonState,
        i: usize,
        j: usize,
    ) -> Result<MeasurementOutcome, ProtocolError> {
        let outcome = operators::measure_charge(state, i, j, &mut self.src)?;
        if self.trace.is_enabled() {
            self.trace.record(
                "measure_charge",
                format!("range={i}..{j}"),
                Some(outcome.observed.to_string()),
                Some(outcome.probability),
                outcome.post_state.space_dim(),
            );
        }
        Ok(outcome)
    }

    /// Fuses an adjacent pair by Born sampling, recording the event.
    pub fn fuse(&mut self, state: &AnyonState, k: usize) -> Result<FusionOutcome, ProtocolError> {
        let outcome = operators::fuse_adjacent(state, k, &mut self.src)?;
        if self.trace.is_enabled() {
            self.trace.record(
                "fuse_adjacent",
                format!("k={k}"),
                Some(outcome.observed.to_string()),
                Some(outcome.probability),
                outcome.post_state.space_dim(),
            );
        }
        Ok(outcome)
    }

    /// Fuses an adjacent pair, either sampling or post-selecting the
    /// requested channel. Post-selection consumes no randomness.
    pub fn fuse_planned(
        &mut self,
        state: &AnyonState,
        k: usize,
        planned: Option<Charge>,
    ) -> Result<FusionOutcome, ProtocolError> {
        match planned {
            None => self.fuse(state, k),
            Some(c) => {
                let outcome = operators::fuse_outcome(state, k, c)?;
                if self.trace.is_enabled() {
                    self.trace.record(
                        "fuse_postselect",
                        format!("k={k}"),
                        Some(outcome.observed.to_string()),
                        Some(outcome.probability),
                        outcome.post_state.space_dim(),
                    );
                }
                Ok(outcome)
            }
        }
    }

    /// Forces a pair to fuse to the vacuum, pumping entropy out through the
    /// group measurement. With `shortcut` the vacuum branch of the very
    /// first pair measurement is post-selected instead (used when a fixed
    /// outcome branch is being extracted).
    pub fn forced_fusion(
        &mut self,
        state: &AnyonState,
        pair_start: usize,
        group: (usize, usize),
        shortcut: bool,
    ) -> Result<AnyonState, ProtocolError> {
        if shortcut {
            let projected = operators::project_outcome(state, pair_start, pair_start + 1, Charge::Vacuum)?;
            if self.trace.is_enabled() {
                self.trace.record(
                    "project_charge",
                    format!("range={}..{} postselect", pair_start, pair_start + 1),
                    Some(projected.observed.to_string()),
                    Some(projected.probability),
                    projected.post_state.space_dim(),
                );
            }
            let fused = operators::fuse_outcome(&projected.post_state, pair_start, Charge::Vacuum)?;
            if self.trace.is_enabled() {
                self.trace.record(
                    "fuse_postselect",
                    format!("k={pair_start}"),
                    Some(fused.observed.to_string()),
                    Some(fused.probability),
                    fused.post_state.space_dim(),
                );
            }
            return Ok(fused.post_state);
        }
        let trace = &mut self.trace;
        let tracing = trace.is_enabled();
        let pair_range = format!("range={}..{}", pair_start, pair_start + 1);
        let group_range = format!("range={}..{} group", group.0, group.1);
        let (post, forced_stats) = operators::force_fuse_vacuum(
            state,
            pair_start,
            group,
            &mut self.src,
            self.cfg.forced_mode,
            self.cfg.forced_max_iter,
            |step| {
                if tracing {
                    trace.record(
                        "measure_charge",
                        if step.on_pair { pair_range.clone() } else { group_range.clone() },
                        Some(step.observed.to_string()),
                        Some(step.probability),
                        0,
                    );
                }
            },
        )?;
        if self.trace.is_enabled() {
            self.trace.record(
                "forced_fusion_done",
                format!(
                    "pair={} iterations={}",
                    pair_start, forced_stats.pair_measurements
                ),
                None,
                None,
                post.space_dim(),
            );
        }
        self.stats.forced_fusions += 1;
        self.stats.forced_pair_measurements += forced_stats.pair_measurements;
        self.stats.forced_group_measurements += forced_stats.group_measurements;
        self.stats.forced_iterations.push(forced_stats.pair_measurements);
        Ok(post)
    }

    /// Applies a braid generator power, recording the event.
    pub fn braid(
        &mut self,
        state: &AnyonState,
        k: usize,
        power: i32,
    ) -> Result<AnyonState, ProtocolError> {
        let out = operators::apply_braid_power(state, k, power)?;
        if self.trace.is_enabled() {
            self.trace.record(
                "braid",
                format!("k={k} power={power}"),
                None,
                None,
                out.space_dim(),
            );
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z_values_match_their_closed_forms() {
        // z₁ is a primitive fifth root of unity (conjugated).
        assert!((z1() - Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / 5.0)).norm() < 1e-15);
        assert!((z1().norm() - 1.0).abs() < 1e-15);
        // φ·cos(2π/5) = 1/2 exactly, so |z₂|² = 1/4 + sin²(2π/5).
        assert!((z2().re - 0.5).abs() < 1e-14);
        let theta = 2.0 * std::f64::consts::PI / 5.0;
        assert!((z2().norm_sqr() - (0.25 + theta.sin().powi(2))).abs() < 1e-14);
        assert!((z2().norm_sqr() - 1.1545084971874737).abs() < 1e-12);
        assert!((z2().norm_sqr() - 1.0).abs() > 0.1, "G2 must not be unitary");
    }

    #[test]
    fn g1_has_order_five_projectively() {
        let g1 = GateLabel::G1.diag();
        let mut acc = [Complex64::new(1.0, 0.0); 4];
        for _ in 0..5 {
            for (a, g) in acc.iter_mut().zip(&g1) {
                *a *= g;
            }
        }
        let anchor = acc[0];
        for a in &acc {
            assert!((a - anchor).norm() < 1e-10);
        }
    }

    #[test]
    fn g_gates_commute_and_inverses_cancel() {
        let g1 = GateLabel::G1.diag();
        let g1_inv = GateLabel::G1Inv.diag();
        let prod: Vec<Complex64> = g1.iter().zip(&g1_inv).map(|(a, b)| a * b).collect();
        for p in &prod {
            assert!((p - prod[0]).norm() < 1e-15, "G1·G1inv must be scalar");
        }
        let g2 = GateLabel::G2.diag();
        let g2_inv = GateLabel::G2Inv.diag();
        let prod: Vec<Complex64> = g2.iter().zip(&g2_inv).map(|(a, b)| a * b).collect();
        for p in &prod {
            assert!((p - prod[0]).norm() < 1e-15, "G2·G2inv must be scalar");
        }
        assert!((prod[0].re - z2().norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn d_operator_constants() {
        let p = phi();
        assert_eq!(DOperator::D1.diag()[0], Complex64::new(0.0, 0.0));
        assert!((DOperator::D1.diag()[3].re - 1.0 / p.sqrt()).abs() < 1e-15);
        assert!((DOperator::D2.diag()[0].re + p).abs() < 1e-15);
        assert!((DOperator::D3.diag()[3].re + 1.0 / p).abs() < 1e-15);
        assert!((DOperator::D4.diag()[3].re + 1.0 / (p * p)).abs() < 1e-15);
        for d in [DOperator::D1, DOperator::D2, DOperator::D3, DOperator::D4] {
            assert!(d.op_norm() <= p + 1e-15);
        }
    }

    #[test]
    fn walk_state_reaches_the_target_along_the_stated_path() {
        let mut ws = WalkState::start();
        ws = ws.step(GateLabel::G2);
        assert_eq!(ws, WalkState { k: 0, l: 1 });
        ws = ws.step(GateLabel::G1Inv);
        assert_eq!(ws, WalkState { k: 4, l: 1 });
        ws = ws.step(GateLabel::G2Inv);
        assert_eq!(ws, WalkState { k: 4, l: 0 });
        ws = ws.step(GateLabel::G1);
        assert_eq!(ws, WalkState { k: 0, l: 0 });
        assert!(!ws.is_done());
        ws = ws.step(GateLabel::G1);
        assert_eq!(ws, WalkState { k: 1, l: 0 });
        assert!(ws.is_done());
    }

    #[test]
    fn walk_reaches_exactly_ten_states() {
        // Breadth-first closure under the policy moves.
        let mut seen = std::collections::BTreeSet::new();
        let mut frontier = vec![WalkState::start()];
        seen.insert((0u8, 0u8));
        while let Some(ws) = frontier.pop() {
            let moves: Vec<GateLabel> = if ws.l == 0 {
                vec![GateLabel::G1, GateLabel::G2]
            } else {
                vec![GateLabel::G1Inv, GateLabel::G2Inv]
            };
            for label in moves {
                let next = ws.step(label);
                if seen.insert((next.k, next.l)) {
                    frontier.push(next);
                }
            }
        }
        assert_eq!(seen.len(), 10);
    }
}
