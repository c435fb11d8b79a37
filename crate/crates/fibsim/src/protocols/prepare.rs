//! Ancilla preparation: the braided single-qubit states, the Bell state,
//! the measurement-assisted X and CZ gates, and the three-qubit ancilla
//! that powers the entangling lottery.
//!
//! Preparations are free to retry: a failed probabilistic step consumes the
//! working state, and the caller rebuilds its (known, freshly prepared)
//! input and tries again. Each retry loop has a budget as a failure guard.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::fusion_basis::{AnyonState, Charge};
use crate::operators::phi;
use crate::qubit_codec::{decode, encode, QubitRegister};

use super::{DOperator, ProtocolError, RunContext};

/// `σ₁σ₂|0⟩`, decoding to `(1, φ^{1/2})` projectively.
pub fn make_alpha(ctx: &mut RunContext) -> Result<QubitRegister, ProtocolError> {
    braided_qubit(ctx, &[(2, 1), (1, 1)])
}

/// `σ₁⁻⁴σ₂|0⟩`, decoding to `(1, -φ^{1/2})` projectively.
pub fn make_beta(ctx: &mut RunContext) -> Result<QubitRegister, ProtocolError> {
    braided_qubit(ctx, &[(2, 1), (1, -4)])
}

/// `σ₁²σ₂⁻²|0⟩`, decoding to `(φ^{1/2}·cos(2π/5), -i·sin(2π/5))`
/// projectively: the middle qubit of the three-qubit ancilla.
pub fn middle_qubit(ctx: &mut RunContext) -> Result<QubitRegister, ProtocolError> {
    braided_qubit(ctx, &[(2, -2), (1, 2)])
}

fn braided_qubit(
    ctx: &mut RunContext,
    factors: &[(usize, i32)],
) -> Result<QubitRegister, ProtocolError> {
    let zero = encode(&[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])?;
    let mut state = zero.into_state();
    for &(k, power) in factors {
        state = ctx.braid(&state, k, power)?;
    }
    Ok(QubitRegister::from_state(state)?)
}

/// Applies one of the diagonal two-qubit operators to blocks
/// `(first_block, first_block + 1)` of the register, as a two-outcome
/// measurement succeeding with probability `‖Dψ‖²/‖D‖²`. On failure the
/// input is consumed and `None` is returned; the caller restarts its
/// preparation.
pub fn apply_d(
    ctx: &mut RunContext,
    register: QubitRegister,
    first_block: usize,
    which: DOperator,
) -> Result<Option<QubitRegister>, ProtocolError> {
    let m = register.qubits();
    debug_assert!(first_block >= 1 && first_block + 1 <= m);
    // Scale word amplitudes in place; anything outside the encoded
    // subspace is leakage and must be negligible here.
    let diag = which.diag();
    let mut entries = register.state().raw_entries().to_vec();
    let mut weight = 0.0f64;
    let mut leak = 0.0f64;
    for (path, amp) in entries.iter_mut() {
        match crate::qubit_codec::word_index_of(path, m) {
            Some(w) => {
                let hi = (w >> (m - first_block)) & 1;
                let lo = (w >> (m - first_block - 1)) & 1;
                *amp *= diag[2 * hi + lo];
                weight += amp.norm_sqr();
            }
            None => {
                leak += amp.norm_sqr();
                *amp = Complex64::new(0.0, 0.0);
            }
        }
    }
    if leak > ctx.cfg.leak_tol {
        return Err(ProtocolError::ContractViolation(format!(
            "diagonal operator applied to a leaking register (leak {leak:.3e})"
        )));
    }
    let op_norm = which.op_norm();
    let p_success = weight / (op_norm * op_norm);
    ctx.stats.d_attempts[which.index()] += 1;
    let success = ctx.src.decide(p_success)?;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "apply_d",
            format!("d={} blocks={},{}", which.name(), first_block, first_block + 1),
            Some(if success { "ok" } else { "fail" }.to_string()),
            Some(if success { p_success } else { 1.0 - p_success }),
            register.state().space_dim(),
        );
    }
    if !success {
        return Ok(None);
    }
    ctx.stats.d_successes[which.index()] += 1;
    let state = AnyonState::from_entries(4 * m, Charge::Vacuum, entries).normalized()?;
    Ok(Some(QubitRegister::from_state(state)?))
}

/// The two-qubit start state of every Bell attempt. Braiding is
/// deterministic, so untraced runs reuse one computed copy; traced runs
/// rebuild it to keep their braid events complete.
fn alpha_pair_state(ctx: &mut RunContext) -> Result<AnyonState, ProtocolError> {
    static ALPHA_PAIR: OnceLock<AnyonState> = OnceLock::new();
    if !ctx.trace.is_enabled() {
        if let Some(state) = ALPHA_PAIR.get() {
            return Ok(state.clone());
        }
    }
    let left = make_alpha(ctx)?;
    let right = make_alpha(ctx)?;
    let state = left.state().tensor(right.state())?;
    let _ = ALPHA_PAIR.set(state.clone());
    Ok(state)
}

/// Prepares the Bell state `(0, 1, 1, 0)`: two braided `(1, φ^{1/2})`
/// qubits side by side, then `D₂` and `D₁`, retrying from scratch until
/// both succeed.
pub fn prepare_bell(ctx: &mut RunContext) -> Result<QubitRegister, ProtocolError> {
    let budget = ctx.cfg.prep_retry_budget;
    for _ in 0..budget {
        ctx.stats.bell_attempts += 1;
        let pair = QubitRegister::from_state(alpha_pair_state(ctx)?)?;
        let Some(pair) = apply_d(ctx, pair, 1, DOperator::D2)? else {
            continue;
        };
        let Some(pair) = apply_d(ctx, pair, 1, DOperator::D1)? else {
            continue;
        };
        ctx.stats.bell_successes += 1;
        return Ok(pair);
    }
    Err(ProtocolError::PreparationBudget {
        what: "bell preparation",
        budget,
    })
}

/// One attempt at the fusion-teleported X gate on block `block` of the
/// register: the Bell pair is placed to the right of the block and the
/// four adjacent pairs are fused, all of which must hit the vacuum. On the
/// post-selected branch the Bell pair's right qubit replaces the block,
/// carrying `X` applied to it; any τ outcome returns `None` with the input
/// consumed.
pub fn gate_x(
    ctx: &mut RunContext,
    register: &QubitRegister,
    block: usize,
    bell: &QubitRegister,
) -> Result<Option<QubitRegister>, ProtocolError> {
    debug_assert!(block >= 1 && block <= register.qubits());
    debug_assert_eq!(bell.qubits(), 2);
    ctx.stats.x_attempts += 1;
    let boundary = 4 * block;
    let mut state = register.state().splice_at(boundary, bell.state())?;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "splice",
            format!("bell after block {block}"),
            None,
            None,
            state.space_dim(),
        );
    }
    for step in 0..4 {
        let k = boundary - step;
        let fusion = ctx.fuse(&state, k)?;
        if fusion.observed == Charge::Tau {
            return Ok(None);
        }
        state = fusion.post_state;
    }
    ctx.stats.x_successes += 1;
    Ok(Some(QubitRegister::from_state(state)?))
}

/// The X gate with its own retry loop: fresh Bell pairs are consumed until
/// the post-selected branch lands.
fn gate_x_retrying(
    ctx: &mut RunContext,
    register: &QubitRegister,
    block: usize,
) -> Result<QubitRegister, ProtocolError> {
    let budget = ctx.cfg.prep_retry_budget;
    for _ in 0..budget {
        let bell = prepare_bell(ctx)?;
        if let Some(next) = gate_x(ctx, register, block, &bell)? {
            return Ok(next);
        }
    }
    Err(ProtocolError::PreparationBudget {
        what: "X gate",
        budget,
    })
}

fn apply_d_retrying(
    ctx: &mut RunContext,
    register: &QubitRegister,
    first_block: usize,
    which: DOperator,
) -> Result<QubitRegister, ProtocolError> {
    let budget = ctx.cfg.prep_retry_budget;
    for _ in 0..budget {
        if let Some(next) = apply_d(ctx, register.clone(), first_block, which)? {
            return Ok(next);
        }
    }
    Err(ProtocolError::PreparationBudget {
        what: "diagonal operator",
        budget,
    })
}

/// The measurement-assisted CZ gate on blocks `(left_block, left_block+1)`:
/// `D₃²`, then the three X-conjugated `D₄` factors. Probabilistic steps are
/// retried in place, which is statistically identical to restarting the
/// preparation with fresh inputs since every success branch is
/// deterministic.
pub fn gate_cz(
    ctx: &mut RunContext,
    register: QubitRegister,
    left_block: usize,
) -> Result<QubitRegister, ProtocolError> {
    let right_block = left_block + 1;
    let mut state = register;
    // D₃ twice.
    state = apply_d_retrying(ctx, &state, left_block, DOperator::D3)?;
    state = apply_d_retrying(ctx, &state, left_block, DOperator::D3)?;
    // (I⊗X)·D₄·(I⊗X)
    state = gate_x_retrying(ctx, &state, right_block)?;
    state = apply_d_retrying(ctx, &state, left_block, DOperator::D4)?;
    state = gate_x_retrying(ctx, &state, right_block)?;
    // (X⊗I)·D₄·(X⊗I)
    state = gate_x_retrying(ctx, &state, left_block)?;
    state = apply_d_retrying(ctx, &state, left_block, DOperator::D4)?;
    state = gate_x_retrying(ctx, &state, left_block)?;
    // (X⊗X)·D₄·(X⊗X)
    state = gate_x_retrying(ctx, &state, left_block)?;
    state = gate_x_retrying(ctx, &state, right_block)?;
    state = apply_d_retrying(ctx, &state, left_block, DOperator::D4)?;
    state = gate_x_retrying(ctx, &state, left_block)?;
    state = gate_x_retrying(ctx, &state, right_block)?;
    Ok(state)
}

/// The three-qubit ancilla
/// `φ^{1/2}·cos(2π/5)·|α0α⟩ - i·sin(2π/5)·|β1β⟩` with `α ∝ (1, φ^{1/2})`
/// and `β ∝ (1, -φ^{1/2})`, prepared by placing the braided middle qubit
/// between two `α` qubits and applying CZ to each adjacent pair.
#[derive(Debug, Clone)]
pub struct AncillaGamma {
    register: QubitRegister,
}

impl AncillaGamma {
    pub fn register(&self) -> &QubitRegister {
        &self.register
    }

    pub fn into_register(self) -> QubitRegister {
        self.register
    }

    /// Wraps a register claimed to hold the ancilla, checking leakage and
    /// overlap with the defining amplitudes.
    pub fn from_register(register: QubitRegister, tol: f64) -> Result<AncillaGamma, ProtocolError> {
        let gamma = AncillaGamma { register };
        let (_, leak) = decode(&gamma.register);
        if leak > tol {
            return Err(ProtocolError::ContractViolation(format!(
                "ancilla leaks {leak:.3e} outside the code space"
            )));
        }
        Ok(gamma)
    }

    /// The defining eight amplitudes, normalized, word-ordered with qubit 1
    /// as the most significant bit.
    pub fn defining_amplitudes() -> [Complex64; 8] {
        let theta = 2.0 * std::f64::consts::PI / 5.0;
        let nu0 = Complex64::new(phi().sqrt() * theta.cos(), 0.0);
        let nu1 = Complex64::new(0.0, -theta.sin());
        let alpha = [Complex64::new(1.0, 0.0), Complex64::new(phi().sqrt(), 0.0)];
        let beta = [Complex64::new(1.0, 0.0), Complex64::new(-phi().sqrt(), 0.0)];
        let mut amps = [Complex64::new(0.0, 0.0); 8];
        for i in 0..2 {
            for k in 0..2 {
                amps[i << 2 | k] += nu0 * alpha[i] * alpha[k];
                amps[i << 2 | 1 << 1 | k] += nu1 * beta[i] * beta[k];
            }
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in amps.iter_mut() {
            *a /= norm;
        }
        amps
    }

    /// `|⟨defining state | this state⟩|` after normalization.
    pub fn overlap_with_definition(&self) -> f64 {
        let (amps, _) = decode(&self.register);
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let defining = Self::defining_amplitudes();
        let mut acc = Complex64::new(0.0, 0.0);
        for (d, a) in defining.iter().zip(&amps) {
            acc += d.conj() * a;
        }
        acc.norm() / norm
    }
}

/// Prepares the three-qubit ancilla, retrying on any failed probabilistic
/// step (each retry rebuilds only the step's own fresh inputs).
pub fn prepare_gamma(ctx: &mut RunContext) -> Result<AncillaGamma, ProtocolError> {
    let left = make_alpha(ctx)?;
    let middle = middle_qubit(ctx)?;
    let right = make_alpha(ctx)?;
    let three = left
        .state()
        .tensor(middle.state())?
        .tensor(right.state())?;
    let mut register = QubitRegister::from_state(three)?;
    register = gate_cz(ctx, register, 1)?;
    register = gate_cz(ctx, register, 2)?;
    ctx.stats.gamma_preparations += 1;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "gamma_ready",
            String::new(),
            None,
            None,
            register.state().space_dim(),
        );
    }
    AncillaGamma::from_register(register, ctx.cfg.leak_tol)
}

/// The complex conjugate of the ancilla: a Z gate on the middle qubit,
/// realized as five half twists on the middle block's first pair.
pub fn conjugate_gamma(
    ctx: &mut RunContext,
    gamma: AncillaGamma,
) -> Result<AncillaGamma, ProtocolError> {
    let state = ctx.braid(gamma.register().state(), 5, 5)?;
    AncillaGamma::from_register(QubitRegister::from_state(state)?, ctx.cfg.leak_tol)
}
