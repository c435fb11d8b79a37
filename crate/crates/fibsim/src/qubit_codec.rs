//! Encoding logical qubits into 4-anyon blocks of trivial collective
//! charge, decoding amplitudes, quantifying leakage, and extracting the
//! projective matrix a protocol performs on encoded qubits.
//!
//! Qubit `j` of an `m`-qubit register occupies anyons `4j-3 .. 4j`. The
//! basis words are single fusion paths: `|0⟩ = (1,0,1,0)` and
//! `|1⟩ = (1,1,1,0)` within each block, concatenated across blocks.
//! Leakage is the weight a state carries outside the span of those words.

use num_complex::Complex64;
use num_traits::Zero;
use thiserror::Error;

use crate::fusion_basis::{AnyonState, BasisError, Charge, FusionPath};
use crate::operators::OpError;

#[derive(Debug, Error)]
pub enum CodecError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error("cannot encode the zero vector")]
    ZeroVector,
    #[error("amplitude vector of length {got} is not a power of two")]
    BadAmplitudeCount { got: usize },
    #[error("state with {n} anyons does not fit a whole number of 4-anyon blocks")]
    BadLayout { n: usize },
    #[error("register must carry trivial total charge")]
    BadTotalCharge,
    #[error("protocol image leaks {leak:.3e} outside the encoded subspace (tolerance {tol:.1e})")]
    Leakage { leak: f64, tol: f64 },
    #[error("protocol is not deterministic on its branch: probe images differ by {deviation:.3e}")]
    NondeterministicProtocol { deviation: f64 },
    #[error("basis images are numerically singular; cannot solve for the gate")]
    SingularImages,
    #[error("protocol failed during gate extraction: {0}")]
    Protocol(String),
}

impl CodecError {
    pub fn protocol(message: impl Into<String>) -> CodecError {
        CodecError::Protocol(message.into())
    }
}

/// An `m`-qubit register stored in `4m` anyons of trivial total charge.
#[derive(Debug, Clone)]
pub struct QubitRegister {
    qubits: usize,
    state: AnyonState,
}

impl QubitRegister {
    /// Wraps an anyon state, checking the layout.
    pub fn from_state(state: AnyonState) -> Result<QubitRegister, CodecError> {
        let n = state.anyon_count();
        if n == 0 || n % 4 != 0 {
            return Err(CodecError::BadLayout { n });
        }
        if state.total() != Charge::Vacuum {
            return Err(CodecError::BadTotalCharge);
        }
        Ok(QubitRegister {
            qubits: n / 4,
            state,
        })
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn state(&self) -> &AnyonState {
        &self.state
    }

    pub fn into_state(self) -> AnyonState {
        self.state
    }

    /// Anyon positions `(first, last)` of 1-based block `j`.
    pub fn block_range(&self, j: usize) -> (usize, usize) {
        debug_assert!(j >= 1 && j <= self.qubits);
        (4 * j - 3, 4 * j)
    }
}

/// The fusion path carrying basis word `w` of an `m`-qubit register.
/// Qubit 1 is the most significant bit of `w`.
pub fn word_path(m: usize, w: usize) -> FusionPath {
    debug_assert!(w < (1 << m));
    // Each block carries (1, bit, 1, 0), packed low bit first.
    let mut bits = 0u32;
    for j in 1..=m {
        let bit = ((w >> (m - j)) & 1) as u32;
        bits |= (0b0101 | (bit << 1)) << (4 * (j - 1));
    }
    FusionPath::from_bits(bits, 4 * m)
}

/// The word index carried by a register path, or `None` if the path lies
/// outside the encoded subspace.
pub(crate) fn word_index_of(path: &FusionPath, m: usize) -> Option<usize> {
    if path.len() != 4 * m {
        return None;
    }
    let mut w = 0usize;
    for j in 1..=m {
        w = (w << 1) | path.charge(4 * j - 2).as_bit() as usize;
    }
    if *path == word_path(m, w) {
        Some(w)
    } else {
        None
    }
}

/// Encodes `2^m` basis-word amplitudes into a normalized register state.
pub fn encode(amplitudes: &[Complex64]) -> Result<QubitRegister, CodecError> {
    let len = amplitudes.len();
    if len < 2 || !len.is_power_of_two() {
        return Err(CodecError::BadAmplitudeCount { got: len });
    }
    let m = len.trailing_zeros() as usize;
    if amplitudes.iter().all(|a| a.norm_sqr() == 0.0) {
        return Err(CodecError::ZeroVector);
    }
    let state = AnyonState::from_amplitudes(
        4 * m,
        Charge::Vacuum,
        amplitudes
            .iter()
            .enumerate()
            .map(|(w, &a)| (word_path(m, w), a)),
    )?
    .normalized()?;
    QubitRegister::from_state(state)
}

/// Projects a register onto the encoded subspace.
///
/// Returns the `2^m` word amplitudes and the leaked weight
/// `1 - Σ|amplitude|²` (for a normalized input), clamped to `[0, 1]`.
pub fn decode(register: &QubitRegister) -> (Vec<Complex64>, f64) {
    let m = register.qubits();
    let words = 1usize << m;
    let mut amplitudes = Vec::with_capacity(words);
    let mut weight = 0.0;
    for w in 0..words {
        let a = register.state().amplitude(&word_path(m, w));
        weight += a.norm_sqr();
        amplitudes.push(a);
    }
    let leak = (1.0 - weight).clamp(0.0, 1.0);
    (amplitudes, leak)
}

/// A `d×d` complex matrix defined up to a nonzero scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveGate {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ProjectiveGate {
    pub fn new(dim: usize, entries: Vec<Complex64>) -> ProjectiveGate {
        assert_eq!(entries.len(), dim * dim, "row-major d×d entries expected");
        ProjectiveGate { dim, entries }
    }

    pub fn diagonal(diag: &[Complex64]) -> ProjectiveGate {
        let dim = diag.len();
        let mut entries = vec![Complex64::zero(); dim * dim];
        for (i, &v) in diag.iter().enumerate() {
            entries[i * dim + i] = v;
        }
        ProjectiveGate { dim, entries }
    }

    pub fn identity(dim: usize) -> ProjectiveGate {
        ProjectiveGate::diagonal(&vec![Complex64::new(1.0, 0.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    /// `max |self/s - reference|` where `s` is the entry ratio taken at the
    /// reference's largest-magnitude entry. Infinite when `self` vanishes
    /// there.
    pub fn projective_deviation(&self, reference: &ProjectiveGate) -> f64 {
        assert_eq!(self.dim, reference.dim);
        let mut anchor = 0usize;
        for (idx, v) in reference.entries.iter().enumerate() {
            if v.norm() > reference.entries[anchor].norm() {
                anchor = idx;
            }
        }
        let ref_anchor = reference.entries[anchor];
        if ref_anchor.norm() == 0.0 {
            return self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let scale = self.entries[anchor] / ref_anchor;
        if scale.norm() < 1e-300 {
            return f64::INFINITY;
        }
        self.entries
            .iter()
            .zip(&reference.entries)
            .map(|(a, b)| (a / scale - b).norm())
            .fold(0.0, f64::max)
    }

    /// Projective equality at the given absolute tolerance.
    pub fn approx_eq(&self, reference: &ProjectiveGate, tol: f64) -> bool {
        self.projective_deviation(reference) <= tol
    }

    /// How far `A†A` is from a scalar multiple of the identity; zero for
    /// unitary-up-to-scalar matrices.
    pub fn gram_deviation(&self) -> f64 {
        let d = self.dim;
        let mut gram = vec![Complex64::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::zero();
                for k in 0..d {
                    acc += self.entry(k, i).conj() * self.entry(k, j);
                }
                gram[i * d + j] = acc;
            }
        }
        let mut scalar = 0.0f64;
        for i in 0..d {
            scalar = scalar.max(gram[i * d + i].norm());
        }
        if scalar == 0.0 {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let expected = if i == j {
                    Complex64::new(scalar, 0.0)
                } else {
                    Complex64::zero()
                };
                worst = worst.max((gram[i * d + j] - expected).norm() / scalar);
            }
        }
        worst
    }
}

impl std::fmt::Display for ProjectiveGate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for row in 0..self.dim {
            let cells: Vec<String> = (0..self.dim)
                .map(|col| format_complex(self.entry(row, col)))
                .collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Renders a complex number as `re`, `re+imi` or `re-imi` at full double
/// precision, dropping an exactly-zero imaginary part.
pub fn format_complex(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

/// Projective deviation between two nonzero amplitude vectors, scaling at
/// the reference's largest-magnitude entry.
pub fn projective_vec_deviation(candidate: &[Complex64], reference: &[Complex64]) -> f64 {
    assert_eq!(candidate.len(), reference.len());
    let mut anchor = 0usize;
    for (idx, v) in reference.iter().enumerate() {
        if v.norm() > reference[anchor].norm() {
            anchor = idx;
        }
    }
    if reference[anchor].norm() == 0.0 {
        return candidate.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    let scale = candidate[anchor] / reference[anchor];
    if scale.norm() < 1e-300 {
        return f64::INFINITY;
    }
    candidate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a / scale - b).norm())
        .fold(0.0, f64::max)
}

/// Solves the dense complex system `V·t = w` by Gaussian elimination with
/// partial pivoting; `V` is given column-wise.
fn solve_columns(columns: &[Vec<Complex64>], rhs: &[Complex64]) -> Result<Vec<Complex64>, CodecError> {
    let d = rhs.len();
    debug_assert!(columns.len() == d && columns.iter().all(|c| c.len() == d));
    let mut a = vec![Complex64::zero(); d * d];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            a[i * d + j] = v;
        }
    }
    let mut b = rhs.to_vec();
    for pivot in 0..d {
        let mut best = pivot;
        for row in pivot + 1..d {
            if a[row * d + pivot].norm() > a[best * d + pivot].norm() {
                best = row;
            }
        }
        if a[best * d + pivot].norm() < 1e-12 {
            return Err(CodecError::SingularImages);
        }
        if best != pivot {
            for col in 0..d {
                a.swap(pivot * d + col, best * d + col);
            }
            b.swap(pivot, best);
        }
        let inv = Complex64::new(1.0, 0.0) / a[pivot * d + pivot];
        for row in pivot + 1..d {
            let factor = a[row * d + pivot] * inv;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for col in pivot..d {
                let sub = factor * a[pivot * d + col];
                a[row * d + col] -= sub;
            }
            let pivot_rhs = b[pivot];
            b[row] -= factor * pivot_rhs;
        }
    }
    let mut t = vec![Complex64::zero(); d];
    for row in (0..d).rev() {
        let mut acc = b[row];
        for col in row + 1..d {
            acc -= a[row * d + col] * t[col];
        }
        t[row] = acc / a[row * d + row];
    }
    Ok(t)
}

/// Extracts the projective matrix a protocol applies to `m` encoded qubits.
///
/// The protocol runs once on each encoded basis word and twice on the
/// all-ones superposition probe; the probe fixes the relative scales that
/// per-run global phases hide, and the repeated probe run detects protocols
/// that are not (projectively) deterministic on their branch. Any image
/// with leakage above `tol` is an error.
pub fn extract_gate<F>(mut protocol: F, m: usize, tol: f64) -> Result<ProjectiveGate, CodecError>
where
    F: FnMut(&QubitRegister) -> Result<QubitRegister, CodecError>,
{
    let dim = 1usize << m;
    let mut run = |input: &[Complex64]| -> Result<Vec<Complex64>, CodecError> {
        let reg = encode(input)?;
        let image = protocol(&reg)?;
        let (amps, leak) = decode(&image);
        if leak > tol {
            return Err(CodecError::Leakage { leak, tol });
        }
        Ok(amps)
    };

    let mut columns = Vec::with_capacity(dim);
    for w in 0..dim {
        let mut basis_word = vec![Complex64::zero(); dim];
        basis_word[w] = Complex64::new(1.0, 0.0);
        columns.push(run(&basis_word)?);
    }
    let probe_input = vec![Complex64::new(1.0, 0.0); dim];
    let probe = run(&probe_input)?;
    let probe_again = run(&probe_input)?;
    let wobble = projective_vec_deviation(&probe_again, &probe);
    if wobble > tol.max(1e-9) {
        return Err(CodecError::NondeterministicProtocol { deviation: wobble });
    }

    // Column w of the gate is t_w · image_w, with t solving V·t = probe
    // (the probe is the normalized sum of the basis words, so the common
    // scalar is projectively irrelevant).
    let t = solve_columns(&columns, &probe)?;
    let mut entries = vec![Complex64::zero(); dim * dim];
    for (col, (scale, image)) in t.iter().zip(&columns).enumerate() {
        for row in 0..dim {
            entries[row * dim + col] = scale * image[row];
        }
    }
    Ok(ProjectiveGate::new(dim, entries))
}
