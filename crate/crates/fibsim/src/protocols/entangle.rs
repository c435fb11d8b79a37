//! The execution half of the protocol stack: fusing the input qubits into
//! the three-qubit ancilla (with the recovery procedures for failed
//! fusions), the random `G₁`/`G₂` lottery, the ten-state walk that pins the
//! gate down to `G₁`, and the final braid correction that turns `G₁` into
//! the controlled rotation `CR(2π/5)`.
//!
//! Anyon positions are tracked explicitly stage by stage. With the two
//! input qubits at positions 1-4 and 17-20 and the ancilla in between, a
//! successful run fuses pairs (4,5), (3,6), (16,17) and (15,18) to the
//! vacuum, leaving twelve anyons: the information-carrying outer blocks and
//! the middle ancilla qubit whose final fusion selects the applied gate.

use num_complex::Complex64;
use num_traits::Zero;

use crate::fusion_basis::{AnyonState, Charge, FusionPath};
use crate::operators::Orientation;
use crate::qubit_codec::QubitRegister;

use super::{
    conjugate_gamma, prepare_gamma, AncillaGamma, GateLabel, ProtocolError, RunContext, WalkState,
};

/// Optional post-selection plan for one pass through the fusion protocol.
/// `None` samples the Born rule; `Some` projects onto the stated channel.
/// Gate extraction uses plans to hold a stochastic protocol on one branch;
/// Monte Carlo runs use the default (all sampled).
#[derive(Debug, Clone, Copy, Default)]
pub struct BranchPlan {
    /// Channel of the second fusion (left input against the ancilla).
    pub left_fusion: Option<Charge>,
    /// Channel of the fourth fusion (right input against the ancilla).
    pub right_fusion: Option<Charge>,
    /// Channel of the middle-pair fusion that picks `G₁` versus `G₂`.
    pub middle_fusion: Option<Charge>,
    /// Post-select the forced fusions' vacuum branch immediately instead of
    /// running the measurement alternation.
    pub forced_shortcut: bool,
}

impl BranchPlan {
    /// Everything pinned to the vacuum: the shortest successful history.
    pub fn fused_branch(middle: Charge) -> BranchPlan {
        BranchPlan {
            left_fusion: Some(Charge::Vacuum),
            right_fusion: Some(Charge::Vacuum),
            middle_fusion: Some(middle),
            forced_shortcut: true,
        }
    }
}

/// Result of one pass of the fusion protocol.
#[derive(Debug, Clone)]
pub enum FuseGammaOutcome {
    /// All four fusions hit the vacuum; twelve anyons remain, holding the
    /// two information qubits in the outer blocks and the ancilla qubit in
    /// the middle.
    Fused(AnyonState),
    /// A fusion produced an unwanted anyon and the recovery procedure
    /// restored the input register; the ancilla remnants were verified
    /// disentangled and discarded.
    Recovered(QubitRegister),
}

/// Fuses the left and right input qubits with the left and right qubits of
/// the ancilla. The first and third fusions are forced to the vacuum by
/// alternating measurements; the second and fourth are Born-sampled, with
/// the recovery procedure run when they produce a single anyon.
pub fn fuse_gamma(
    ctx: &mut RunContext,
    inputs: &QubitRegister,
    gamma: AncillaGamma,
    plan: &BranchPlan,
) -> Result<FuseGammaOutcome, ProtocolError> {
    debug_assert_eq!(inputs.qubits(), 2);
    let combined = inputs.state().splice_at(4, gamma.register().state())?;
    debug_assert_eq!(combined.anyon_count(), 20);
    ctx.stats.fuse_attempts += 1;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "splice",
            "ancilla between the input qubits".to_string(),
            None,
            None,
            combined.space_dim(),
        );
    }

    // First fusion: pair (4,5), pumped by the left input qubit (1..4).
    let state = ctx.forced_fusion(&combined, 4, (1, 4), plan.forced_shortcut)?;
    debug_assert_eq!(state.anyon_count(), 18);

    // Second fusion: what was (3,6), now adjacent at positions (3,4).
    let fusion = ctx.fuse_planned(&state, 3, plan.left_fusion)?;
    if fusion.observed == Charge::Tau {
        let restored = recover_left(ctx, fusion.post_state)?;
        ctx.stats.recovered_left += 1;
        return Ok(FuseGammaOutcome::Recovered(restored));
    }
    let state = fusion.post_state;
    debug_assert_eq!(state.anyon_count(), 16);

    // Third fusion: pair (16,17) now at (12,13), pumped by the right input
    // qubit now at (13..16).
    let state = ctx.forced_fusion(&state, 12, (13, 16), plan.forced_shortcut)?;
    debug_assert_eq!(state.anyon_count(), 14);

    // Fourth fusion: what was (15,18), now adjacent at positions (11,12).
    let fusion = ctx.fuse_planned(&state, 11, plan.right_fusion)?;
    if fusion.observed == Charge::Tau {
        let restored = recover_right(ctx, fusion.post_state)?;
        ctx.stats.recovered_right += 1;
        return Ok(FuseGammaOutcome::Recovered(restored));
    }
    let state = fusion.post_state;
    debug_assert_eq!(state.anyon_count(), 12);
    ctx.stats.fused += 1;
    Ok(FuseGammaOutcome::Fused(state))
}

fn twist_power(ctx: &RunContext) -> i32 {
    match ctx.cfg.recovery_twist {
        Orientation::Positive => 5,
        Orientation::Negative => -5,
    }
}

/// A fusion whose outcome the protocol guarantees to be a single anyon.
/// Sampling is still honest Born sampling; a vacuum outcome means the
/// guarantee failed and is reported as a contract violation.
fn fuse_necessarily_tau(
    ctx: &mut RunContext,
    state: &AnyonState,
    k: usize,
) -> Result<AnyonState, ProtocolError> {
    let fusion = ctx.fuse(state, k)?;
    if fusion.observed == Charge::Vacuum {
        return Err(ProtocolError::ContractViolation(format!(
            "recovery fusion at {k} produced the vacuum (probability {:.3e})",
            fusion.probability
        )));
    }
    if fusion.probability < 1.0 - 1e-9 {
        return Err(ProtocolError::ContractViolation(format!(
            "recovery fusion at {k} was supposed to be certain but had probability {}",
            fusion.probability
        )));
    }
    Ok(fusion.post_state)
}

/// Recovery after the second fusion produced a single anyon. Seventeen
/// anyons: `1 2 A* 7 8 | 9..12 | 13..16 | 17..20` with `A*` the unwanted
/// anyon. Projects the middle ancilla qubit by fusing its left pair,
/// applies five half twists to (7,8) if it projected to `|1⟩`, completes
/// with a fusion that is necessarily a single anyon, and discards the
/// disentangled ancilla remnants.
fn recover_left(
    ctx: &mut RunContext,
    state: AnyonState,
) -> Result<QubitRegister, ProtocolError> {
    debug_assert_eq!(state.anyon_count(), 17);
    // Middle qubit's left pair: originally (9,10), now at (6,7).
    let projection = ctx.fuse(&state, 6)?;
    let middle_is_one = projection.observed == Charge::Tau;
    let mut state = projection.post_state;
    if middle_is_one {
        // Five half twists on the fourth and fifth anyons from the left.
        state = ctx.braid(&state, 4, twist_power(ctx))?;
    }
    // Third and fourth anyons from the left fuse, necessarily to one anyon.
    state = fuse_necessarily_tau(ctx, &state, 3)?;
    let segment_end = if middle_is_one { 11 } else { 10 };
    let (outer, residual) = dispose_segment(ctx, &state, 5, segment_end)?;
    debug_assert!(residual <= ctx.cfg.disposal_tol);
    debug_assert_eq!(outer.anyon_count(), 8);
    Ok(QubitRegister::from_state(outer)?)
}

/// Recovery after the fourth fusion produced a single anyon. Thirteen
/// anyons: `1 2 7 8 | 9..12 | 13 14 D* | 19 20`. Mirror of the left
/// recovery, with the twists applied both to the pair left of the unwanted
/// anyon and to the right half of the already-fused left qubit.
fn recover_right(
    ctx: &mut RunContext,
    state: AnyonState,
) -> Result<QubitRegister, ProtocolError> {
    debug_assert_eq!(state.anyon_count(), 13);
    // The untouched middle qubit's left pair: originally (9,10), now (5,6).
    let projection = ctx.fuse(&state, 5)?;
    let middle_is_one = projection.observed == Charge::Tau;
    let mut state = projection.post_state;
    if middle_is_one {
        // Fourth and fifth anyons from the right...
        state = ctx.braid(&state, 8, twist_power(ctx))?;
        // ...and also the third and fourth anyons from the left.
        state = ctx.braid(&state, 3, twist_power(ctx))?;
    }
    // Third and fourth anyons from the right fuse, necessarily to one.
    let fuse_at = if middle_is_one { 9 } else { 8 };
    state = fuse_necessarily_tau(ctx, &state, fuse_at)?;
    let segment_end = if middle_is_one { 7 } else { 6 };
    let (outer, residual) = dispose_segment(ctx, &state, 5, segment_end)?;
    debug_assert!(residual <= ctx.cfg.disposal_tol);
    debug_assert_eq!(outer.anyon_count(), 8);
    Ok(QubitRegister::from_state(outer)?)
}

/// Verifies that anyons `i..=j` carry definite trivial charge, are flanked
/// by trivial chain labels, and factor out of the state (largest residual
/// Schmidt weight below the configured tolerance), then deletes them.
/// Returns the outer state and the measured residual.
pub fn dispose_segment(
    ctx: &mut RunContext,
    state: &AnyonState,
    i: usize,
    j: usize,
) -> Result<(AnyonState, f64), ProtocolError> {
    let tol = ctx.cfg.disposal_tol;
    // Both boundary labels must read vacuum on (numerically) every path.
    let mut boundary_violation = 0.0f64;
    for (path, amp) in state.entries() {
        if path.charge(i - 1) != Charge::Vacuum || path.charge(j) != Charge::Vacuum {
            boundary_violation += amp.norm_sqr();
        }
    }
    if boundary_violation > tol {
        return Err(ProtocolError::DisposalEntangled {
            residual: boundary_violation,
        });
    }

    // Amplitude matrix over (outer path, segment labels).
    let mut outer_keys: Vec<FusionPath> = Vec::new();
    let mut inner_keys: Vec<u32> = Vec::new();
    let mut entries: Vec<(usize, usize, Complex64)> = Vec::new();
    for (path, &amp) in state.entries() {
        if path.charge(i - 1) != Charge::Vacuum || path.charge(j) != Charge::Vacuum {
            continue;
        }
        let outer = path.excise(i, j);
        let inner = path.segment(i, j);
        let row = match outer_keys.iter().position(|p| *p == outer) {
            Some(idx) => idx,
            None => {
                outer_keys.push(outer);
                outer_keys.len() - 1
            }
        };
        let col = match inner_keys.iter().position(|b| *b == inner) {
            Some(idx) => idx,
            None => {
                inner_keys.push(inner);
                inner_keys.len() - 1
            }
        };
        entries.push((row, col, amp));
    }
    let rows = outer_keys.len();
    let cols = inner_keys.len();
    let mut matrix = vec![vec![Complex64::zero(); cols]; rows];
    for (row, col, amp) in entries {
        matrix[row][col] += amp;
    }

    // Top singular pair by power iteration on M†M (tiny, hermitian, and
    // essentially rank one when the contract holds).
    let mut gram = vec![vec![Complex64::zero(); cols]; cols];
    for (a, row_a) in gram.iter_mut().enumerate() {
        for (b, slot) in row_a.iter_mut().enumerate() {
            let mut acc = Complex64::zero();
            for row in &matrix {
                acc += row[a].conj() * row[b];
            }
            *slot = acc;
        }
    }
    let mut v = vec![Complex64::new(1.0 / (cols as f64).sqrt(), 0.0); cols];
    let mut lambda = 0.0f64;
    for _ in 0..256 {
        let mut w = vec![Complex64::zero(); cols];
        for (a, wa) in w.iter_mut().enumerate() {
            for (b, vb) in v.iter().enumerate() {
                *wa += gram[a][b] * vb;
            }
        }
        let norm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-300 {
            break;
        }
        let next: Vec<Complex64> = w.iter().map(|x| x / norm).collect();
        let moved: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        v = next;
        lambda = norm;
        if moved < 1e-15 {
            break;
        }
    }
    let sigma = lambda.max(0.0).sqrt();
    if sigma < 1e-150 {
        return Err(ProtocolError::DisposalEntangled { residual: 1.0 });
    }
    // Outer factor σ·u = M·v; residual = ‖M - σ·u·v†‖_F.
    let mut outer_amps = vec![Complex64::zero(); rows];
    for (row, m_row) in matrix.iter().enumerate() {
        for (col, vb) in v.iter().enumerate() {
            outer_amps[row] += m_row[col] * vb;
        }
    }
    let mut residual_sq = 0.0f64;
    for (row, m_row) in matrix.iter().enumerate() {
        for (col, vb) in v.iter().enumerate() {
            let fitted = outer_amps[row] * vb.conj();
            residual_sq += (m_row[col] - fitted).norm_sqr();
        }
    }
    let residual = residual_sq.sqrt();
    if residual > tol {
        return Err(ProtocolError::DisposalEntangled { residual });
    }

    let outer = AnyonState::from_amplitudes(
        state.anyon_count() - (j - i + 1),
        state.total(),
        outer_keys.into_iter().zip(outer_amps),
    )?
    .normalized()?;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "dispose",
            format!("range={i}..{j} residual={residual:.3e}"),
            None,
            None,
            outer.space_dim(),
        );
    }
    Ok((outer, residual))
}

/// One round of the entangling lottery: prepare an ancilla (conjugated when
/// `invert`), fuse it with the inputs (retrying through recoveries), fuse
/// the middle pair of the leftover ancilla qubit, and dispose of the
/// disentangled remnant. The vacuum branch applies `G₁` (or `G₁⁻¹`), the
/// single-anyon branch `G₂` (or `G₂⁻¹`).
pub fn random_entangle(
    ctx: &mut RunContext,
    inputs: &QubitRegister,
    invert: bool,
    plan: &BranchPlan,
) -> Result<(GateLabel, QubitRegister), ProtocolError> {
    let budget = ctx.cfg.prep_retry_budget;
    let mut current = inputs.clone();
    for _ in 0..budget {
        let mut gamma = prepare_gamma(ctx)?;
        if invert {
            gamma = conjugate_gamma(ctx, gamma)?;
        }
        match fuse_gamma(ctx, &current, gamma, plan)? {
            FuseGammaOutcome::Recovered(restored) => {
                current = restored;
                continue;
            }
            FuseGammaOutcome::Fused(state) => {
                // Middle two anyons of the leftover ancilla qubit: the
                // twelve-anyon chain is [outer][9 10 11 12][outer], so the
                // pair is at positions (6,7).
                let fusion = ctx.fuse_planned(&state, 6, plan.middle_fusion)?;
                let (label, segment_end) = match fusion.observed {
                    Charge::Vacuum => (if invert { GateLabel::G1Inv } else { GateLabel::G1 }, 6),
                    Charge::Tau => (if invert { GateLabel::G2Inv } else { GateLabel::G2 }, 7),
                };
                let (outer, _) = dispose_segment(ctx, &fusion.post_state, 5, segment_end)?;
                let register = QubitRegister::from_state(outer)?;
                if ctx.trace.is_enabled() {
                    ctx.trace.record(
                        "entangle_round",
                        format!("label={}", label.name()),
                        Some(label.name().to_string()),
                        None,
                        register.state().space_dim(),
                    );
                }
                return Ok((label, register));
            }
        }
    }
    Err(ProtocolError::PreparationBudget {
        what: "entangling round",
        budget,
    })
}

/// Full record of one random walk.
#[derive(Debug, Clone)]
pub struct WalkRecord {
    pub labels: Vec<GateLabel>,
    pub states: Vec<WalkState>,
}

impl WalkRecord {
    pub fn steps(&self) -> usize {
        self.labels.len()
    }

    /// The product of the per-step diagonals, for checking that the
    /// accumulated gate matches the symbolic bookkeeping.
    pub fn accumulated_diag(&self) -> [Complex64; 4] {
        let mut acc = [Complex64::new(1.0, 0.0); 4];
        for label in &self.labels {
            let d = label.diag();
            let norm = d.iter().map(|x| x.norm()).fold(0.0, f64::max);
            for (a, g) in acc.iter_mut().zip(&d) {
                *a *= g / norm; // keep magnitudes bounded over long walks
            }
        }
        acc
    }
}

/// Applies entangling rounds under the fixed policy (plain rounds while the
/// accumulated gate has no `G₂` factor, inverse rounds otherwise) until the
/// bookkeeping reaches exactly `G₁`. Terminates with probability one;
/// `walk_max_steps` is a failure guard.
pub fn walk_to_g1(
    ctx: &mut RunContext,
    inputs: &QubitRegister,
) -> Result<(QubitRegister, WalkRecord), ProtocolError> {
    let mut register = inputs.clone();
    let mut walk = WalkState::start();
    let mut record = WalkRecord {
        labels: Vec::new(),
        states: vec![walk],
    };
    let max_steps = ctx.cfg.walk_max_steps;
    for _ in 0..max_steps {
        let invert = walk.l == 1;
        let (label, next) = random_entangle(ctx, &register, invert, &BranchPlan::default())?;
        register = next;
        walk = walk.step(label);
        record.labels.push(label);
        record.states.push(walk);
        if ctx.trace.is_enabled() {
            ctx.trace.record(
                "walk_step",
                format!("k={} l={}", walk.k, walk.l),
                Some(label.name().to_string()),
                None,
                register.state().space_dim(),
            );
        }
        if walk.is_done() {
            ctx.stats.walk_lengths.push(record.labels.len() as u64);
            return Ok((register, record));
        }
    }
    Err(ProtocolError::WalkDivergence { max_steps })
}

/// The headline protocol: force the entangling gate `G₁` by random walk,
/// then undo the single-qubit phases with the braid `R⁻² ⊗ R⁻²` (two
/// negative half twists on the first pair of each block). The composite
/// equals `CR(2π/5) = Diag(1, 1, 1, e^{2πi/5})` projectively on every
/// measurement history.
pub fn controlled_rotation(
    ctx: &mut RunContext,
    inputs: &QubitRegister,
) -> Result<(QubitRegister, WalkRecord), ProtocolError> {
    let (register, record) = walk_to_g1(ctx, inputs)?;
    let mut state = ctx.braid(register.state(), 1, -2)?;
    state = ctx.braid(&state, 5, -2)?;
    let register = QubitRegister::from_state(state)?;
    if ctx.trace.is_enabled() {
        ctx.trace.record(
            "controlled_rotation_done",
            format!("walk_steps={}", record.steps()),
            None,
            None,
            register.state().space_dim(),
        );
    }
    Ok((register, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::z1;
    use crate::qubit_codec::{decode, encode, projective_vec_deviation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_product_input(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        let draw = |rng: &mut ChaCha8Rng| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        let (a0, a1, b0, b1) = (draw(rng), draw(rng), draw(rng), draw(rng));
        vec![a0 * b0, a0 * b1, a1 * b0, a1 * b1]
    }

    fn apply_diag(diag: &[Complex64; 4], v: &[Complex64]) -> Vec<Complex64> {
        diag.iter().zip(v).map(|(d, a)| d * a).collect()
    }

    #[test]
    fn fused_branch_keeps_twelve_anyons() {
        let mut ctx = RunContext::seeded(1);
        let inputs = encode(&[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let gamma = prepare_gamma(&mut ctx).unwrap();
        let plan = BranchPlan {
            left_fusion: Some(Charge::Vacuum),
            right_fusion: Some(Charge::Vacuum),
            middle_fusion: None,
            forced_shortcut: true,
        };
        match fuse_gamma(&mut ctx, &inputs, gamma, &plan).unwrap() {
            FuseGammaOutcome::Fused(state) => {
                assert_eq!(state.anyon_count(), 12);
                assert!((state.norm_sq() - 1.0).abs() < 1e-10);
            }
            FuseGammaOutcome::Recovered(_) => panic!("plan pinned the fused branch"),
        }
    }

    #[test]
    fn lottery_applies_g1_on_the_vacuum_branch() {
        let mut ctx = RunContext::seeded(7);
        let probe = encode(&[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let (reference, _) = decode(&probe);
        let plan = BranchPlan::fused_branch(Charge::Vacuum);
        let (label, out) = random_entangle(&mut ctx, &probe, false, &plan).unwrap();
        assert_eq!(label, GateLabel::G1);
        let (amps, leak) = decode(&out);
        assert!(leak < 1e-10);
        let expected = apply_diag(&GateLabel::G1.diag(), &reference);
        assert!(projective_vec_deviation(&amps, &expected) < 1e-9);
        // G1 on the probe is genuinely (z₁, z̄₁, z̄₁, z₁)/2 projectively.
        let z = z1();
        let direct = [z, z.conj(), z.conj(), z];
        assert!(projective_vec_deviation(&amps, &apply_diag(&direct, &reference)) < 1e-9);
    }

    #[test]
    fn lottery_applies_g2_on_the_single_anyon_branch() {
        let mut ctx = RunContext::seeded(8);
        let probe = encode(&[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let (reference, _) = decode(&probe);
        let plan = BranchPlan::fused_branch(Charge::Tau);
        let (label, out) = random_entangle(&mut ctx, &probe, false, &plan).unwrap();
        assert_eq!(label, GateLabel::G2);
        let (amps, leak) = decode(&out);
        assert!(leak < 1e-10);
        let expected = apply_diag(&GateLabel::G2.diag(), &reference);
        assert!(projective_vec_deviation(&amps, &expected) < 1e-9);
    }

    #[test]
    fn inverse_round_cancels_a_plain_round() {
        let mut ctx = RunContext::seeded(9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let input = encode(&random_product_input(&mut rng)).unwrap();
        let (reference, _) = decode(&input);
        let plan = BranchPlan::fused_branch(Charge::Vacuum);
        let (label, mid) = random_entangle(&mut ctx, &input, false, &plan).unwrap();
        assert_eq!(label, GateLabel::G1);
        let (label, out) = random_entangle(&mut ctx, &mid, true, &plan).unwrap();
        assert_eq!(label, GateLabel::G1Inv);
        let (amps, leak) = decode(&out);
        assert!(leak < 1e-10);
        assert!(projective_vec_deviation(&amps, &reference) < 1e-9);
    }

    #[test]
    fn recoveries_restore_the_inputs() {
        // Free-running Monte Carlo; every recovered branch must hand back
        // the original register.
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let mut recovered_seen = 0u32;
        for seed in 0..120u64 {
            let mut ctx = RunContext::seeded(seed);
            let input_amps = random_product_input(&mut rng);
            let inputs = encode(&input_amps).unwrap();
            let (reference, _) = decode(&inputs);
            let gamma = prepare_gamma(&mut ctx).unwrap();
            match fuse_gamma(&mut ctx, &inputs, gamma, &BranchPlan::default()).unwrap() {
                FuseGammaOutcome::Recovered(reg) => {
                    recovered_seen += 1;
                    let (amps, leak) = decode(&reg);
                    assert!(leak < 1e-10, "seed {seed} leak {leak:.3e}");
                    let dev = projective_vec_deviation(&amps, &reference);
                    assert!(dev < 1e-9, "seed {seed} deviation {dev:.3e}");
                }
                FuseGammaOutcome::Fused(state) => {
                    assert_eq!(state.anyon_count(), 12);
                }
            }
        }
        assert!(recovered_seen > 10, "recovery path barely exercised");
    }

    #[test]
    fn both_twist_chiralities_recover_identically() {
        for seed in 0..160u64 {
            let run = |twist: Orientation| {
                let mut ctx = RunContext::seeded(seed);
                ctx.cfg.recovery_twist = twist;
                let inputs =
                    encode(&[c(0.1, 0.2), c(-0.4, 0.3), c(0.5, -0.1), c(0.2, 0.6)]).unwrap();
                let gamma = prepare_gamma(&mut ctx).unwrap();
                fuse_gamma(&mut ctx, &inputs, gamma, &BranchPlan::default()).unwrap()
            };
            let (left, right) = (run(Orientation::Positive), run(Orientation::Negative));
            if let (FuseGammaOutcome::Recovered(a), FuseGammaOutcome::Recovered(b)) =
                (&left, &right)
            {
                let (va, _) = decode(a);
                let (vb, _) = decode(b);
                assert!(projective_vec_deviation(&va, &vb) < 1e-9, "seed {seed}");
                return; // one recovered pair is enough
            }
        }
        panic!("no recovery branch hit in 160 seeds");
    }

    #[test]
    fn walks_terminate_and_accumulate_g1() {
        let mut rng = ChaCha8Rng::seed_from_u64(500);
        for seed in 0..30u64 {
            let mut ctx = RunContext::seeded(seed + 40);
            let input_amps = random_product_input(&mut rng);
            let inputs = encode(&input_amps).unwrap();
            let (reference, _) = decode(&inputs);
            let (out, record) = walk_to_g1(&mut ctx, &inputs).unwrap();
            assert!(record.states.last().unwrap().is_done());
            let acc = record.accumulated_diag();
            let g1 = GateLabel::G1.diag();
            let scale = acc[0] / g1[0];
            for (a, g) in acc.iter().zip(&g1) {
                assert!((a / scale - g).norm() < 1e-9, "seed {seed}");
            }
            let (amps, leak) = decode(&out);
            assert!(leak < 1e-10);
            let expected = apply_diag(&g1, &reference);
            assert!(
                projective_vec_deviation(&amps, &expected) < 1e-8,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn controlled_rotation_matches_the_target_gate() {
        let theta = 2.0 * std::f64::consts::PI / 5.0;
        let cr = [
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
            Complex64::from_polar(1.0, theta),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        for seed in 0..15u64 {
            let mut ctx = RunContext::seeded(seed + 900);
            let input_amps = random_product_input(&mut rng);
            let inputs = encode(&input_amps).unwrap();
            let (reference, _) = decode(&inputs);
            let (out, _) = controlled_rotation(&mut ctx, &inputs).unwrap();
            let (amps, leak) = decode(&out);
            assert!(leak < 1e-10, "seed {seed}");
            let expected = apply_diag(&cr, &reference);
            let dev = projective_vec_deviation(&amps, &expected);
            assert!(dev < 1e-8, "seed {seed}: deviation {dev:.3e}");
        }
    }

    #[test]
    fn braid_composition_identity_behind_the_final_correction() {
        // R⁻² ⊗ R⁻² composed with G₁ is the controlled rotation, as plain
        // diagonal arithmetic.
        let r_inv2 = |channel: Charge| crate::operators::r_phase(channel).conj().powu(2);
        let per_qubit = [r_inv2(Charge::Vacuum), r_inv2(Charge::Tau)];
        let g1 = GateLabel::G1.diag();
        let mut composite = [c(0.0, 0.0); 4];
        for w in 0..4 {
            let hi = (w >> 1) & 1;
            let lo = w & 1;
            composite[w] = per_qubit[hi] * per_qubit[lo] * g1[w];
        }
        let theta = 2.0 * std::f64::consts::PI / 5.0;
        let expected = [
            c(1.0, 0.0),
            c(1.0, 0.0),
            c(1.0, 0.0),
            Complex64::from_polar(1.0, theta),
        ];
        let scale = composite[0];
        for (a, e) in composite.iter().zip(&expected) {
            assert!((a / scale - e).norm() < 1e-12);
        }
        // The stated intermediate value (e^{4πi/5} thrice, e^{-4πi/5} once).
        let lead = Complex64::from_polar(1.0, 4.0 * std::f64::consts::PI / 5.0);
        assert!((composite[0] - lead).norm() < 1e-12);
        assert!((composite[3] - lead.conj()).norm() < 1e-12);
    }

    #[test]
    fn disposal_rejects_entangled_segments() {
        let mut ctx = RunContext::seeded(0);
        // Entangled two-qubit register: the second block cannot be excised.
        let entangled = encode(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        let result = dispose_segment(&mut ctx, entangled.state(), 5, 8);
        assert!(matches!(result, Err(ProtocolError::DisposalEntangled { .. })));
        // A product register factors cleanly.
        let product = encode(&[c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]).unwrap();
        let (outer, residual) = dispose_segment(&mut ctx, product.state(), 5, 8).unwrap();
        assert!(residual < 1e-12);
        assert_eq!(outer.anyon_count(), 4);
        let (amps, _) = decode(&QubitRegister::from_state(outer).unwrap());
        assert!(projective_vec_deviation(&amps, &[c(1.0, 0.0), c(1.0, 0.0)]) < 1e-10);
    }
}
