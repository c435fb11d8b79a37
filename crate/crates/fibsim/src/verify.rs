//! The runnable acceptance checks: thirteen numbered criteria covering the
//! basis layer, the braid representation, every preparation and gate
//! protocol, recovery soundness, the random walk, and the end-to-end
//! controlled rotation. `fibsim verify` prints one line per criterion; the
//! `acceptance` integration test asserts each one.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fusion_basis::{dim, enumerate_basis, AnyonState, Charge};
use crate::operators::{
    braid_generator, phi, r_phase, ForcedMode, LinearOp, Orientation, RandomSource,
};
use crate::protocols::{
    controlled_rotation, fuse_gamma, gate_cz, gate_x, make_alpha, make_beta, prepare_bell,
    prepare_gamma, walk_to_g1, BranchPlan, DOperator, FuseGammaOutcome, GateLabel,
    ProtocolConfig, ProtocolError, RunContext,
};
use crate::qubit_codec::{
    decode, encode, extract_gate, projective_vec_deviation, CodecError, ProjectiveGate,
    QubitRegister,
};
use crate::skein_dsl;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Knobs shared by every criterion run.
#[derive(Debug, Clone, Copy)]
pub struct VerifyConfig {
    pub seed: u64,
    pub mode: ForcedMode,
    /// When set, replaces each criterion's default comparison tolerance.
    pub tol_override: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> VerifyConfig {
        VerifyConfig {
            seed: 7,
            mode: ForcedMode::Literal,
            tol_override: None,
        }
    }
}

impl VerifyConfig {
    fn tol(&self, default: f64) -> f64 {
        self.tol_override.unwrap_or(default)
    }

    fn context(&self, stream: u64) -> RunContext {
        let cfg = ProtocolConfig {
            forced_mode: self.mode,
            ..ProtocolConfig::default()
        };
        RunContext::new(RandomSource::stream(self.seed, stream), cfg)
    }
}

pub const CRITERIA: [(usize, &str); 13] = [
    (1, "dimension law"),
    (2, "braid representation sanity"),
    (3, "exchange and Z gates from one generator"),
    (4, "braided ancilla qubits"),
    (5, "Bell state preparation"),
    (6, "fusion-teleported X gate"),
    (7, "measurement-assisted CZ gate"),
    (8, "three-qubit ancilla preparation"),
    (9, "G1/G2 realization on the fused configuration"),
    (10, "recovery soundness"),
    (11, "random walk termination"),
    (12, "end-to-end controlled rotation"),
    (13, "skein-relation cross-oracle"),
];

pub fn run_all(cfg: &VerifyConfig) -> Vec<CheckReport> {
    CRITERIA.iter().map(|&(id, _)| run_criterion(id, cfg)).collect()
}

pub fn run_criterion(id: usize, cfg: &VerifyConfig) -> CheckReport {
    match id {
        1 => criterion_dimension_law(cfg),
        2 => criterion_representation_sanity(cfg),
        3 => criterion_generator_gates(cfg),
        4 => criterion_braided_qubits(cfg),
        5 => criterion_bell(cfg),
        6 => criterion_x_gate(cfg),
        7 => criterion_cz_gate(cfg),
        8 => criterion_gamma(cfg),
        9 => criterion_g1_g2(cfg),
        10 => criterion_recovery(cfg),
        11 => criterion_walk(cfg),
        12 => criterion_controlled_rotation(cfg),
        13 => criterion_cross_oracle(cfg),
        _ => panic!("criterion ids run from 1 to 13"),
    }
}

fn report(id: usize, passed: bool, detail: String) -> CheckReport {
    let name = CRITERIA[id - 1].1;
    CheckReport {
        id,
        name,
        passed,
        detail,
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn fib(k: usize) -> usize {
    let (mut a, mut b) = (1usize, 1usize);
    for _ in 2..k {
        let next = a + b;
        a = b;
        b = next;
    }
    if k <= 2 {
        1
    } else {
        b
    }
}

fn count_paths_recursive(depth: usize, n: usize, current: Charge, total: Charge) -> usize {
    if depth == n {
        return usize::from(current == total);
    }
    current
        .fuse_with_tau()
        .iter()
        .map(|&next| count_paths_recursive(depth + 1, n, next, total))
        .sum()
}

fn random_state(n: usize, total: Charge, seed: u64) -> AnyonState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AnyonState::from_amplitudes(
        n,
        total,
        enumerate_basis(n, total)
            .into_iter()
            .map(|p| (p, c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))),
    )
    .expect("basis paths are admissible")
    .normalized()
    .expect("random states are nonzero")
}

fn random_vector(len: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..len)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        if v.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3 {
            return v;
        }
    }
}

fn random_product_vector(rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let left = random_vector(2, rng);
    let right = random_vector(2, rng);
    vec![
        left[0] * right[0],
        left[0] * right[1],
        left[1] * right[0],
        left[1] * right[1],
    ]
}

fn cr_target() -> [Complex64; 4] {
    let theta = 2.0 * std::f64::consts::PI / 5.0;
    [
        c(1.0, 0.0),
        c(1.0, 0.0),
        c(1.0, 0.0),
        Complex64::from_polar(1.0, theta),
    ]
}

fn apply_diag(diag: &[Complex64; 4], v: &[Complex64]) -> Vec<Complex64> {
    diag.iter().zip(v).map(|(d, a)| d * a).collect()
}

fn protocol_adapter<T>(result: Result<T, ProtocolError>) -> Result<T, CodecError> {
    result.map_err(|e| CodecError::protocol(e.to_string()))
}

// --- criterion 1 ---------------------------------------------------------

fn criterion_dimension_law(_cfg: &VerifyConfig) -> CheckReport {
    let started = std::time::Instant::now();
    for n in 2..=24usize {
        let zero = dim(n, Charge::Vacuum);
        let one = dim(n, Charge::Tau);
        let brute_zero = count_paths_recursive(1, n, Charge::Tau, Charge::Vacuum);
        let brute_one = count_paths_recursive(1, n, Charge::Tau, Charge::Tau);
        if zero != fib(n - 1) || one != fib(n) || zero != brute_zero || one != brute_one {
            return report(
                1,
                false,
                format!("n={n}: dim=({zero},{one}) expected Fib({},{})=({},{}) brute=({brute_zero},{brute_one})",
                    n - 1, n, fib(n - 1), fib(n)),
            );
        }
    }
    report(
        1,
        true,
        format!(
            "dim(n,0)=Fib(n-1), dim(n,1)=Fib(n) for n=2..24 against the recursive counter ({} ms)",
            started.elapsed().as_millis()
        ),
    )
}

// --- criterion 2 ---------------------------------------------------------

fn criterion_representation_sanity(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-10);
    let started = std::time::Instant::now();
    let mut worst: f64 = 0.0;
    for n in 2..=8usize {
        for total in [Charge::Vacuum, Charge::Tau] {
            if dim(n, total) == 0 {
                continue;
            }
            let sigma: Vec<LinearOp> = (1..n)
                .map(|k| braid_generator(n, total, k, Orientation::Positive).expect("in range"))
                .collect();
            // Unitarity on random states.
            for k in 1..n {
                let st = random_state(n, total, cfg.seed ^ ((n * 37 + k) as u64));
                let image = crate::operators::apply_braid(&st, k, Orientation::Positive)
                    .expect("in range");
                worst = worst.max((image.norm_sq() - 1.0).abs());
            }
            // Braid relations and far commutation.
            for a in 0..sigma.len() {
                if a + 1 < sigma.len() {
                    let lhs = sigma[a]
                        .compose(&sigma[a + 1].compose(&sigma[a]).unwrap())
                        .unwrap();
                    let rhs = sigma[a + 1]
                        .compose(&sigma[a].compose(&sigma[a + 1]).unwrap())
                        .unwrap();
                    worst = worst.max(lhs.max_abs_diff(&rhs).unwrap());
                }
                for b in a + 2..sigma.len() {
                    let lhs = sigma[a].compose(&sigma[b]).unwrap();
                    let rhs = sigma[b].compose(&sigma[a]).unwrap();
                    worst = worst.max(lhs.max_abs_diff(&rhs).unwrap());
                }
            }
            // Tenth powers are scalar.
            for op in &sigma {
                let mut acc = LinearOp::identity(op.domain);
                for _ in 0..10 {
                    acc = op.compose(&acc).unwrap();
                }
                worst = worst.max(acc.deviation_from_scalar_identity());
            }
        }
    }
    report(
        2,
        worst <= tol,
        format!(
            "max deviation {worst:.3e} over n<=8 (tol {tol:.1e}, {} ms)",
            started.elapsed().as_millis()
        ),
    )
}

// --- criterion 3 ---------------------------------------------------------

fn criterion_generator_gates(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-10);
    let braid_protocol = |power: i32| {
        move |reg: &QubitRegister| -> Result<QubitRegister, CodecError> {
            let st = crate::operators::apply_braid_power(reg.state(), 1, power)?;
            QubitRegister::from_state(st)
        }
    };
    let exchange = match extract_gate(braid_protocol(1), 1, 1e-10) {
        Ok(g) => g,
        Err(e) => return report(3, false, format!("extraction failed: {e}")),
    };
    let expected_r = ProjectiveGate::diagonal(&[r_phase(Charge::Vacuum), r_phase(Charge::Tau)]);
    let dev_r = exchange.projective_deviation(&expected_r);
    let z = match extract_gate(braid_protocol(5), 1, 1e-10) {
        Ok(g) => g,
        Err(e) => return report(3, false, format!("extraction failed: {e}")),
    };
    let expected_z = ProjectiveGate::diagonal(&[c(1.0, 0.0), c(-1.0, 0.0)]);
    let dev_z = z.projective_deviation(&expected_z);
    let worst = dev_r.max(dev_z);
    report(
        3,
        worst <= tol,
        format!("sigma_1 dev {dev_r:.3e}, sigma_1^5 dev {dev_z:.3e} (tol {tol:.1e})"),
    )
}

// --- criterion 4 ---------------------------------------------------------

fn criterion_braided_qubits(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-10);
    let mut ctx = cfg.context(4);
    let run = |ctx: &mut RunContext, beta: bool| -> Result<f64, ProtocolError> {
        let reg = if beta { make_beta(ctx)? } else { make_alpha(ctx)? };
        let (amps, _) = decode(&reg);
        let sign = if beta { -1.0 } else { 1.0 };
        let expected = [c(1.0, 0.0), c(sign * phi().sqrt(), 0.0)];
        Ok(projective_vec_deviation(&amps, &expected))
    };
    match (run(&mut ctx, false), run(&mut ctx, true)) {
        (Ok(dev_alpha), Ok(dev_beta)) => {
            let worst = dev_alpha.max(dev_beta);
            report(
                4,
                worst <= tol,
                format!("alpha dev {dev_alpha:.3e}, beta dev {dev_beta:.3e} (tol {tol:.1e})"),
            )
        }
        (Err(e), _) | (_, Err(e)) => report(4, false, format!("braiding failed: {e}")),
    }
}

// --- criterion 5 ---------------------------------------------------------

fn criterion_bell(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-9);
    // Matrix arithmetic: D₁·D₂ on (1,√φ)⊗(1,√φ) is proportional to (0,1,1,0).
    let s = phi().sqrt();
    let alpha_alpha = [c(1.0, 0.0), c(s, 0.0), c(s, 0.0), c(phi(), 0.0)];
    let d1 = DOperator::D1.diag();
    let d2 = DOperator::D2.diag();
    let image: Vec<Complex64> = alpha_alpha
        .iter()
        .enumerate()
        .map(|(w, &a)| d1[w] * d2[w] * a)
        .collect();
    let bell_ref = [c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)];
    let arithmetic_dev = projective_vec_deviation(&image, &bell_ref);
    if arithmetic_dev > cfg.tol(1e-12) {
        return report(5, false, format!("diagonal arithmetic dev {arithmetic_dev:.3e}"));
    }
    // Simulation over 100 seeds, all inside the retry budget.
    let mut worst: f64 = 0.0;
    let mut attempts_total = 0u64;
    for stream in 0..100u64 {
        let mut ctx = cfg.context(50_000 + stream);
        match prepare_bell(&mut ctx) {
            Ok(reg) => {
                let (amps, _) = decode(&reg);
                worst = worst.max(projective_vec_deviation(&amps, &bell_ref));
                attempts_total += ctx.stats.bell_attempts;
            }
            Err(e) => return report(5, false, format!("seed stream {stream}: {e}")),
        }
    }
    report(
        5,
        worst <= tol,
        format!(
            "arithmetic dev {arithmetic_dev:.3e}; 100 preparations, max dev {worst:.3e}, mean attempts {:.2}",
            attempts_total as f64 / 100.0
        ),
    )
}

// --- criterion 6 ---------------------------------------------------------

fn criterion_x_gate(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-9);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e3779b97f4a7c15);
    let mut worst: f64 = 0.0;
    for trial in 0..20u64 {
        let mut ctx = cfg.context(60_000 + trial);
        let v = random_vector(2, &mut rng);
        let input = match encode(&v) {
            Ok(r) => r,
            Err(e) => return report(6, false, format!("encode failed: {e}")),
        };
        // Post-selected branch: retry with fresh Bell pairs until it lands.
        let mut swapped = None;
        for _ in 0..ctx.cfg.prep_retry_budget {
            let bell = match prepare_bell(&mut ctx) {
                Ok(b) => b,
                Err(e) => return report(6, false, format!("bell failed: {e}")),
            };
            match gate_x(&mut ctx, &input, 1, &bell) {
                Ok(Some(out)) => {
                    swapped = Some(out);
                    break;
                }
                Ok(None) => continue,
                Err(e) => return report(6, false, format!("x gate failed: {e}")),
            }
        }
        let Some(out) = swapped else {
            return report(6, false, "x gate retry budget exhausted".to_string());
        };
        let (amps, _) = decode(&out);
        let expected = [v[1], v[0]];
        worst = worst.max(projective_vec_deviation(&amps, &expected));
    }
    report(
        6,
        worst <= tol,
        format!("20 random inputs swapped, max dev {worst:.3e} (tol {tol:.1e})"),
    )
}

// --- criterion 7 ---------------------------------------------------------

fn criterion_cz_gate(cfg: &VerifyConfig) -> CheckReport {
    let exact_tol = cfg.tol(1e-12);
    let sim_tol = cfg.tol(1e-9);
    // Exact composite: (X⊗X)D₄(X⊗X)·(X⊗I)D₄(X⊗I)·(I⊗X)D₄(I⊗X)·D₃².
    let d3 = DOperator::D3.diag();
    let d4 = DOperator::D4.diag();
    let conj = |mask: usize| -> [Complex64; 4] {
        let mut out = [c(0.0, 0.0); 4];
        for w in 0..4 {
            out[w] = d4[w ^ mask];
        }
        out
    };
    let (both, left, right) = (conj(0b11), conj(0b10), conj(0b01));
    let scale = -1.0 / (phi() * phi());
    let mut exact_dev: f64 = 0.0;
    for w in 0..4 {
        let composite = both[w] * left[w] * right[w] * d3[w] * d3[w];
        let expected = c(if w == 3 { -scale } else { scale }, 0.0);
        exact_dev = exact_dev.max((composite - expected).norm());
    }
    if exact_dev > exact_tol {
        return report(7, false, format!("composite arithmetic dev {exact_dev:.3e}"));
    }
    // Simulated protocol, extracted as a projective gate.
    let mut ctx = cfg.context(70_000);
    let gate = match extract_gate(
        |reg| protocol_adapter(gate_cz(&mut ctx, reg.clone(), 1)),
        2,
        1e-9,
    ) {
        Ok(g) => g,
        Err(e) => return report(7, false, format!("extraction failed: {e}")),
    };
    let cz = ProjectiveGate::diagonal(&[c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
    let sim_dev = gate.projective_deviation(&cz);
    report(
        7,
        sim_dev <= sim_tol,
        format!("composite arithmetic dev {exact_dev:.3e}; simulated CZ dev {sim_dev:.3e} (tol {sim_tol:.1e})"),
    )
}

// --- criterion 8 ---------------------------------------------------------

fn criterion_gamma(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-10);
    let overlaps: Result<Vec<f64>, ProtocolError> = (0..100u64)
        .into_par_iter()
        .map(|stream| {
            let mut ctx = cfg.context(80_000 + stream);
            let gamma = prepare_gamma(&mut ctx)?;
            Ok(gamma.overlap_with_definition())
        })
        .collect();
    match overlaps {
        Ok(values) => {
            let worst = values.iter().cloned().fold(1.0f64, f64::min);
            report(
                8,
                worst >= 1.0 - tol,
                format!("100 preparations, min overlap 1-{:.3e}", 1.0 - worst),
            )
        }
        Err(e) => report(8, false, format!("preparation failed: {e}")),
    }
}

// --- criterion 9 ---------------------------------------------------------

fn criterion_g1_g2(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-9);
    let started = std::time::Instant::now();
    let mut devs = Vec::new();
    for (branch, label) in [(Charge::Vacuum, GateLabel::G1), (Charge::Tau, GateLabel::G2)] {
        let mut ctx = cfg.context(90_000 + branch.as_bit() as u64);
        let plan = BranchPlan::fused_branch(branch);
        let gate = match extract_gate(
            |reg| {
                protocol_adapter(
                    crate::protocols::random_entangle(&mut ctx, reg, false, &plan)
                        .map(|(_, out)| out),
                )
            },
            2,
            1e-9,
        ) {
            Ok(g) => g,
            Err(e) => return report(9, false, format!("{} extraction failed: {e}", label.name())),
        };
        let expected = ProjectiveGate::diagonal(&label.diag());
        devs.push((label.name(), gate.projective_deviation(&expected)));
    }
    let worst = devs.iter().map(|&(_, d)| d).fold(0.0f64, f64::max);
    report(
        9,
        worst <= tol,
        format!(
            "{} dev {:.3e}, {} dev {:.3e} (tol {tol:.1e}, {} s)",
            devs[0].0,
            devs[0].1,
            devs[1].0,
            devs[1].1,
            started.elapsed().as_secs()
        ),
    )
}

// --- criterion 10 --------------------------------------------------------

fn criterion_recovery(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-9);
    let runs = 10_000u64;
    let started = std::time::Instant::now();
    let outcomes: Result<Vec<(bool, f64, u64)>, String> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut ctx = cfg.context(100_000 + run);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ run.rotate_left(17));
            let input_amps = random_product_vector(&mut rng);
            let inputs = encode(&input_amps).map_err(|e| e.to_string())?;
            let (reference, _) = decode(&inputs);
            let gamma = prepare_gamma(&mut ctx).map_err(|e| e.to_string())?;
            let outcome = fuse_gamma(&mut ctx, &inputs, gamma, &BranchPlan::default())
                .map_err(|e| format!("run {run}: {e}"))?;
            let iterations = ctx.stats.forced_iterations.iter().sum::<u64>();
            match outcome {
                FuseGammaOutcome::Recovered(reg) => {
                    let (amps, leak) = decode(&reg);
                    if leak > 1e-10 {
                        return Err(format!("run {run}: recovered register leaks {leak:.3e}"));
                    }
                    // Fidelity of the restored register against the input.
                    let norm_a: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                    let norm_b: f64 = reference.iter().map(|a| a.norm_sqr()).sum();
                    let overlap: Complex64 = amps
                        .iter()
                        .zip(&reference)
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let fidelity = overlap.norm_sqr() / (norm_a * norm_b);
                    Ok((true, fidelity, iterations))
                }
                FuseGammaOutcome::Fused(_) => Ok((false, 1.0, iterations)),
            }
        })
        .collect();
    match outcomes {
        Ok(list) => {
            let recovered: Vec<&(bool, f64, u64)> = list.iter().filter(|x| x.0).collect();
            let fused = list.len() - recovered.len();
            let min_fidelity = recovered.iter().map(|x| x.1).fold(1.0f64, f64::min);
            let mean_forced: f64 =
                list.iter().map(|x| x.2 as f64).sum::<f64>() / list.len() as f64;
            // `iterations` counts pair measurements across the run's forced
            // fusions (one or two per pass, depending on the branch).
            let passed = min_fidelity >= 1.0 - tol;
            report(
                10,
                passed,
                format!(
                    "{runs} runs: {fused} fused, {} recovered, min recovery fidelity 1-{:.3e}, mean forced-pair measurements {mean_forced:.2} ({} s)",
                    recovered.len(),
                    1.0 - min_fidelity,
                    started.elapsed().as_secs()
                ),
            )
        }
        Err(e) => report(10, false, e),
    }
}

// --- criterion 11 --------------------------------------------------------

fn criterion_walk(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-9);
    let runs = 10_000u64;
    let started = std::time::Instant::now();
    let outcomes: Result<Vec<u64>, String> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut ctx = cfg.context(200_000 + run);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ run.rotate_left(29));
            let inputs = encode(&random_product_vector(&mut rng)).map_err(|e| e.to_string())?;
            let (_, record) =
                walk_to_g1(&mut ctx, &inputs).map_err(|e| format!("run {run}: {e}"))?;
            if !record.states.last().copied().unwrap_or_else(crate::protocols::WalkState::start).is_done() {
                return Err(format!("run {run}: walk stopped off target"));
            }
            let acc = record.accumulated_diag();
            let g1 = GateLabel::G1.diag();
            let scale = acc[0] / g1[0];
            for (a, g) in acc.iter().zip(&g1) {
                if (a / scale - g).norm() > tol {
                    return Err(format!("run {run}: accumulated labels are not G1"));
                }
            }
            Ok(record.steps() as u64)
        })
        .collect();
    match outcomes {
        Ok(lengths) => {
            let max = lengths.iter().copied().max().unwrap_or(0);
            let mean = lengths.iter().sum::<u64>() as f64 / lengths.len() as f64;
            let singles = lengths.iter().filter(|&&l| l == 1).count();
            report(
                11,
                true,
                format!(
                    "{runs} walks terminated at (1,0); mean length {mean:.3}, max {max}, {singles} one-step walks ({} s)",
                    started.elapsed().as_secs()
                ),
            )
        }
        Err(e) => report(11, false, e),
    }
}

// --- criterion 12 --------------------------------------------------------

fn criterion_controlled_rotation(cfg: &VerifyConfig) -> CheckReport {
    let tol = cfg.tol(1e-8);
    let leak_tol = cfg.tol(1e-10);
    let inputs_count = 100u64;
    let seeds_per_input = 100u64;
    let started = std::time::Instant::now();
    let mut input_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x2545f4914f6cdd1d));
    let input_list: Vec<Vec<Complex64>> = (0..inputs_count)
        .map(|_| random_vector(4, &mut input_rng))
        .collect();
    let target = cr_target();
    let outcomes: Result<Vec<(f64, f64, u64, u64)>, String> = (0..inputs_count * seeds_per_input)
        .into_par_iter()
        .map(|run| {
            let input = &input_list[(run / seeds_per_input) as usize];
            let mut ctx = cfg.context(300_000 + run);
            let reg = encode(input).map_err(|e| e.to_string())?;
            let (reference, _) = decode(&reg);
            let (out, record) =
                controlled_rotation(&mut ctx, &reg).map_err(|e| format!("run {run}: {e}"))?;
            let (amps, leak) = decode(&out);
            let expected = apply_diag(&target, &reference);
            let deviation = projective_vec_deviation(&amps, &expected);
            Ok((
                deviation,
                leak,
                record.steps() as u64,
                ctx.stats.recovered(),
            ))
        })
        .collect();
    match outcomes {
        Ok(list) => {
            let max_dev = list.iter().map(|x| x.0).fold(0.0f64, f64::max);
            let max_leak = list.iter().map(|x| x.1).fold(0.0f64, f64::max);
            let max_steps = list.iter().map(|x| x.2).max().unwrap_or(0);
            let recoveries: u64 = list.iter().map(|x| x.3).sum();
            let passed = max_dev <= tol && max_leak <= leak_tol;
            report(
                12,
                passed,
                format!(
                    "{} runs ({inputs_count} inputs x {seeds_per_input} seeds): max deviation {max_dev:.3e} (tol {tol:.1e}), max leak {max_leak:.3e}, longest walk {max_steps}, {recoveries} recoveries exercised ({} s)",
                    list.len(),
                    started.elapsed().as_secs()
                ),
            )
        }
        Err(e) => report(12, false, e),
    }
}

// --- criterion 13 --------------------------------------------------------

fn criterion_cross_oracle(cfg: &VerifyConfig) -> CheckReport {
    let cross_tol = cfg.tol(1e-10);
    let bubble_tol = cfg.tol(1e-12);
    let bubble = skein_dsl::eval_source("cup(1); cap(1)")
        .expect("bubble parses")
        .as_scalar()
        .expect("closed diagram");
    let bubble_dev = (bubble - c(phi(), 0.0)).norm();
    if bubble_dev > bubble_tol {
        return report(13, false, format!("bubble dev {bubble_dev:.3e}"));
    }
    let mut worst: f64 = 0.0;
    for n in 2..=6usize {
        for i in 1..n {
            for (sign, orientation) in [("+", Orientation::Positive), ("-", Orientation::Negative)]
            {
                let value = skein_dsl::eval_source(&format!("id({n}); cross({i},{sign})"))
                    .expect("crossing parses");
                for total in [Charge::Vacuum, Charge::Tau] {
                    let d = dim(n, total);
                    if d == 0 {
                        continue;
                    }
                    let offset = match total {
                        Charge::Vacuum => 0,
                        Charge::Tau => dim(n, Charge::Vacuum),
                    };
                    let braid = braid_generator(n, total, i, orientation).expect("in range");
                    for row in 0..d {
                        for col in 0..d {
                            let diff = (value.matrix.entry(row + offset, col + offset)
                                - braid.entry(row, col))
                            .norm();
                            worst = worst.max(diff);
                        }
                    }
                }
            }
        }
    }
    report(
        13,
        worst <= cross_tol,
        format!("bubble dev {bubble_dev:.3e}; crossings vs braid generators max dev {worst:.3e} (strands <= 6)"),
    )
}

// --- extra structural checks shared with the CLI --------------------------

/// One-shot verification that the two forced-measurement acceptance modes
/// agree end to end (used by `verify --mode strict` reporting).
pub fn mode_note(mode: ForcedMode) -> &'static str {
    match mode {
        ForcedMode::Literal => "forced measurement accepts on pair reading 0 (literal)",
        ForcedMode::Strict => "forced measurement requires a preceding group reading of 0 (strict)",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_criteria_pass_with_defaults() {
        let cfg = VerifyConfig::default();
        for id in [1usize, 3, 4, 13] {
            let rep = run_criterion(id, &cfg);
            assert!(rep.passed, "criterion {id}: {}", rep.detail);
        }
    }

    #[test]
    fn absurd_tolerance_fails_floating_point_checks() {
        let cfg = VerifyConfig {
            tol_override: Some(1e-30),
            ..VerifyConfig::default()
        };
        let rep = run_criterion(2, &cfg);
        assert!(!rep.passed);
    }
}
