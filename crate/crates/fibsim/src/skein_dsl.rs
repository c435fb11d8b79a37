//! A small textual language for planar anyon diagrams, evaluated through
//! the skein relations.
//!
//! A diagram is a `;`-separated sequence of horizontal slices read bottom to
//! top, one generator per slice: `id(N)`, `cup(I)`, `cap(I)`, `cross(I,S)`
//! with `S ∈ {+, -}`, and `fusesplit(I)` (two strands fused through a τ
//! line and split again). Strand indices are 1-based from the left;
//! whitespace is insignificant and `#` starts a comment.
//!
//! Evaluation resolves every crossing by the skein relation
//! `cross = e^{3πi/5}·id + e^{-3πi/5}·cupcap` and contracts cups and caps
//! against the running operator, so closed loops contribute a factor φ
//! each. Values use the isotopy-invariant diagram normalization in which a
//! free bubble equals φ and a zigzag cancels exactly; [`SkeinValue::orthonormal`]
//! rescales by `φ^{-1/2}` per cup and cap, which maps the two-cups-side-by-side
//! diagram to the encoded `|0⟩` with amplitude one.
//!
//! This module deliberately knows nothing about the F·R·F construction in
//! [`crate::operators`]; agreement between the two is a checked property,
//! not a shared code path.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::operators::{charge_dim, BasisSpec, LinearOp};

/// Sign of a crossing: `+` passes the left strand over the right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sign::Plus => write!(f, "+"),
            Sign::Minus => write!(f, "-"),
        }
    }
}

/// One horizontal slice of a diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slice {
    Id(usize),
    Cup(usize),
    Cap(usize),
    Cross(usize, Sign),
    FuseSplit(usize),
}

impl fmt::Display for Slice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slice::Id(n) => write!(f, "id({n})"),
            Slice::Cup(i) => write!(f, "cup({i})"),
            Slice::Cap(i) => write!(f, "cap({i})"),
            Slice::Cross(i, s) => write!(f, "cross({i},{s})"),
            Slice::FuseSplit(i) => write!(f, "fusesplit({i})"),
        }
    }
}

/// A validated diagram: slices plus consistent strand counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramTerm {
    pub slices: Vec<Slice>,
    pub strands_bottom: usize,
    pub strands_top: usize,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: unknown generator {name:?}")]
    UnknownGenerator { line: usize, column: usize, name: String },
    #[error("line {line}, column {column}: expected {expected}")]
    Syntax { line: usize, column: usize, expected: String },
    #[error("slice {slice_index} ({slice}): {detail}")]
    StrandMismatch { slice_index: usize, slice: String, detail: String },
    #[error("line {line}, column {column}: strand index must be at least 1")]
    ZeroIndex { line: usize, column: usize },
    #[error("empty diagram")]
    Empty,
}

struct Scanner<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Scanner<'a> {
        Scanner {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.chars.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while let Some(&c) = self.chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn here(&self) -> (usize, usize) {
        (self.line, self.column)
    }

    fn expect(&mut self, wanted: char) -> Result<(), ParseError> {
        self.skip_trivia();
        let (line, column) = self.here();
        match self.bump() {
            Some(c) if c == wanted => Ok(()),
            _ => Err(ParseError::Syntax {
                line,
                column,
                expected: format!("'{wanted}'"),
            }),
        }
    }

    fn ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, column) = self.here();
        let mut name = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphabetic() {
                name.push(c);
                self.bump();
            } else {
                break;
            }
        }
        if name.is_empty() {
            return Err(ParseError::Syntax {
                line,
                column,
                expected: "a generator name".to_string(),
            });
        }
        Ok((name, line, column))
    }

    fn integer(&mut self) -> Result<(usize, usize, usize), ParseError> {
        self.skip_trivia();
        let (line, column) = self.here();
        let mut digits = String::new();
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                digits.push(c);
                self.bump();
            } else {
                break;
            }
        }
        digits
            .parse::<usize>()
            .map(|v| (v, line, column))
            .map_err(|_| ParseError::Syntax {
                line,
                column,
                expected: "an integer".to_string(),
            })
    }

    fn sign(&mut self) -> Result<Sign, ParseError> {
        self.skip_trivia();
        let (line, column) = self.here();
        match self.bump() {
            Some('+') => Ok(Sign::Plus),
            Some('-') => Ok(Sign::Minus),
            _ => Err(ParseError::Syntax {
                line,
                column,
                expected: "'+' or '-'".to_string(),
            }),
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_trivia();
        self.chars.peek().is_none()
    }
}

fn strands_needed(slice: Slice) -> usize {
    match slice {
        Slice::Id(n) => n,
        Slice::Cup(i) => i - 1,
        Slice::Cap(i) | Slice::Cross(i, _) | Slice::FuseSplit(i) => i + 1,
    }
}

fn strands_after(slice: Slice, before: usize) -> usize {
    match slice {
        Slice::Id(_) | Slice::Cross(..) | Slice::FuseSplit(_) => before,
        Slice::Cup(_) => before + 2,
        Slice::Cap(_) => before - 2,
    }
}

/// Parses diagram source into a validated term.
///
/// The bottom strand count is inferred from the first slice: `id(N)`
/// declares `N` strands, while the other generators take the smallest chain
/// that admits them (so a leading `cup(1)` starts from zero strands).
pub fn parse(text: &str) -> Result<DiagramTerm, ParseError> {
    let mut scanner = Scanner::new(text);
    let mut slices = Vec::new();
    loop {
        if scanner.at_end() {
            break;
        }
        let (name, line, column) = scanner.ident()?;
        scanner.expect('(')?;
        let slice = match name.as_str() {
            "id" => {
                let (n, _, _) = scanner.integer()?;
                Slice::Id(n)
            }
            "cup" | "cap" | "fusesplit" => {
                let (i, iline, icol) = scanner.integer()?;
                if i == 0 {
                    return Err(ParseError::ZeroIndex { line: iline, column: icol });
                }
                match name.as_str() {
                    "cup" => Slice::Cup(i),
                    "cap" => Slice::Cap(i),
                    _ => Slice::FuseSplit(i),
                }
            }
            "cross" => {
                let (i, iline, icol) = scanner.integer()?;
                if i == 0 {
                    return Err(ParseError::ZeroIndex { line: iline, column: icol });
                }
                scanner.expect(',')?;
                let sign = scanner.sign()?;
                Slice::Cross(i, sign)
            }
            _ => return Err(ParseError::UnknownGenerator { line, column, name }),
        };
        scanner.expect(')')?;
        slices.push(slice);
        if scanner.at_end() {
            break;
        }
        scanner.expect(';')?;
    }
    if slices.is_empty() {
        return Err(ParseError::Empty);
    }

    let strands_bottom = strands_needed(slices[0]);
    let mut current = strands_bottom;
    for (index, &slice) in slices.iter().enumerate() {
        let fits = match slice {
            Slice::Id(n) => n == current,
            Slice::Cup(i) => i <= current + 1,
            Slice::Cap(i) | Slice::Cross(i, _) | Slice::FuseSplit(i) => i + 1 <= current,
        };
        if !fits {
            return Err(ParseError::StrandMismatch {
                slice_index: index,
                slice: slice.to_string(),
                detail: format!("needs {} strands but {} are present", strands_needed(slice), current),
            });
        }
        current = strands_after(slice, current);
    }
    Ok(DiagramTerm {
        slices,
        strands_bottom,
        strands_top: current,
    })
}

/// The value of a diagram: a linear map from the bottom fusion space to the
/// top one, in diagram normalization, together with the cup/cap count used
/// for conversion to the orthonormal basis.
#[derive(Debug, Clone)]
pub struct SkeinValue {
    pub matrix: LinearOp,
    pub cups: usize,
    pub caps: usize,
}

impl SkeinValue {
    /// For a closed diagram (no strands in or out), the single scalar it
    /// evaluates to.
    pub fn as_scalar(&self) -> Option<Complex64> {
        if self.matrix.domain.dim() == 1
            && self.matrix.codomain.dim() == 1
            && self.matrix.domain.n == 0
            && self.matrix.codomain.n == 0
        {
            Some(self.matrix.entry(0, 0))
        } else {
            None
        }
    }

    /// The same map rescaled by `φ^{-1/2}` per cup and cap, which expresses
    /// kets in the orthonormal fusion-path basis.
    pub fn orthonormal(&self) -> LinearOp {
        let factor = crate::operators::phi().powf(-((self.cups + self.caps) as f64) / 2.0);
        self.matrix.scaled(Complex64::new(factor, 0.0))
    }
}

/// Diagram-normalized cup: inserts a pair at strands `i, i+1` with weight
/// `√(d_y/d_a)`, so that a closed bubble evaluates to φ.
fn cup_op(n: usize, i: usize) -> LinearOp {
    let domain = BasisSpec::full(n);
    let codomain = BasisSpec::full(n + 2);
    let codomain_paths = codomain.paths();
    let index: std::collections::BTreeMap<_, _> = codomain_paths
        .iter()
        .enumerate()
        .map(|(idx, p)| (*p, idx))
        .collect();
    let mut op = LinearOp::zeros(domain, codomain);
    for (col, path) in domain.paths().iter().enumerate() {
        let boundary = path.charge(i - 1);
        for &y in boundary.fuse_with_tau() {
            let coeff = (charge_dim(y) / charge_dim(boundary)).sqrt();
            let target = path.insert_two(i - 1, y, boundary);
            op.add_entry(index[&target], col, Complex64::new(coeff, 0.0));
        }
    }
    op
}

/// Diagram-normalized cap: annihilates strands `i, i+1` with weight
/// `√(d_y/d_a)` on matching boundary labels.
fn cap_op(n: usize, i: usize) -> LinearOp {
    let domain = BasisSpec::full(n);
    let codomain = BasisSpec::full(n - 2);
    let codomain_paths = codomain.paths();
    let index: std::collections::BTreeMap<_, _> = codomain_paths
        .iter()
        .enumerate()
        .map(|(idx, p)| (*p, idx))
        .collect();
    let mut op = LinearOp::zeros(domain, codomain);
    for (col, path) in domain.paths().iter().enumerate() {
        let a = path.charge(i - 1);
        if path.charge(i + 1) != a {
            continue;
        }
        let coeff = (charge_dim(path.charge(i)) / charge_dim(a)).sqrt();
        let target = path.remove_two(i);
        op.add_entry(index[&target], col, Complex64::new(coeff, 0.0));
    }
    op
}

fn slice_op(slice: Slice, strands: usize) -> LinearOp {
    match slice {
        Slice::Id(n) => LinearOp::identity(BasisSpec::full(n)),
        Slice::Cup(i) => cup_op(strands, i),
        Slice::Cap(i) => cap_op(strands, i),
        Slice::Cross(i, sign) => {
            let theta = 3.0 * std::f64::consts::PI / 5.0;
            let (direct, turnback) = match sign {
                Sign::Plus => (
                    Complex64::from_polar(1.0, theta),
                    Complex64::from_polar(1.0, -theta),
                ),
                Sign::Minus => (
                    Complex64::from_polar(1.0, -theta),
                    Complex64::from_polar(1.0, theta),
                ),
            };
            let identity = LinearOp::identity(BasisSpec::full(strands));
            let cupcap = cup_op(strands - 2, i)
                .compose(&cap_op(strands, i))
                .expect("cup after cap shares the reduced space");
            identity
                .scaled(direct)
                .add(&cupcap.scaled(turnback))
                .expect("same shape")
        }
        Slice::FuseSplit(i) => {
            let root_phi = crate::operators::sqrt_phi();
            let identity = LinearOp::identity(BasisSpec::full(strands));
            let cupcap = cup_op(strands - 2, i)
                .compose(&cap_op(strands, i))
                .expect("cup after cap shares the reduced space");
            identity
                .scaled(Complex64::new(root_phi, 0.0))
                .add(&cupcap.scaled(Complex64::new(-1.0 / root_phi, 0.0)))
                .expect("same shape")
        }
    }
}

/// Evaluates a validated term to its skein value. Total for well-formed
/// terms; crossings are resolved through the two-term skein relation and
/// closed loops contribute φ each.
pub fn evaluate(term: &DiagramTerm) -> SkeinValue {
    let mut matrix = LinearOp::identity(BasisSpec::full(term.strands_bottom));
    let mut strands = term.strands_bottom;
    let mut cups = 0;
    let mut caps = 0;
    for &slice in &term.slices {
        let op = slice_op(slice, strands);
        matrix = op.compose(&matrix).expect("strand counts were validated at parse time");
        strands = strands_after(slice, strands);
        match slice {
            Slice::Cup(_) => cups += 1,
            Slice::Cap(_) => caps += 1,
            Slice::Cross(..) => {
                // The turn-back term of the skein sum carries a cup and a
                // cap, but their normalization factors cancel exactly, so
                // they do not count towards the conversion exponent.
            }
            _ => {}
        }
    }
    SkeinValue { matrix, cups, caps }
}

/// Convenience: parse then evaluate.
pub fn eval_source(text: &str) -> Result<SkeinValue, ParseError> {
    Ok(evaluate(&parse(text)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion_basis::{dim, AnyonState, Charge};
    use crate::operators::{braid_generator, phi, Orientation};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn parse_examples() {
        let bubble = parse("cup(1); cap(1)").unwrap();
        assert_eq!(bubble.strands_bottom, 0);
        assert_eq!(bubble.strands_top, 0);

        let two = parse("id(2); cross(1,+)").unwrap();
        assert_eq!(two.strands_bottom, 2);
        assert_eq!(two.strands_top, 2);

        let nested = parse("cup(1); cup(2)").unwrap();
        assert_eq!(nested.strands_bottom, 0);
        assert_eq!(nested.strands_top, 4);
    }

    #[test]
    fn parse_handles_comments_and_whitespace() {
        let term = parse("# a bubble\n  cup(1) ;\n  cap(1)  # done\n").unwrap();
        assert_eq!(term.slices, vec![Slice::Cup(1), Slice::Cap(1)]);
    }

    #[test]
    fn parse_rejects_unknown_generators_with_position() {
        match parse("cup(1);\n twist(1)") {
            Err(ParseError::UnknownGenerator { line, column, name }) => {
                assert_eq!(line, 2);
                assert_eq!(column, 2);
                assert_eq!(name, "twist");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_inconsistent_strand_counts_with_slice_index() {
        match parse("id(2); cap(2)") {
            Err(ParseError::StrandMismatch { slice_index, .. }) => assert_eq!(slice_index, 1),
            other => panic!("unexpected {other:?}"),
        }
        match parse("cup(1); cup(5)") {
            Err(ParseError::StrandMismatch { slice_index, .. }) => assert_eq!(slice_index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bubble_evaluates_to_phi() {
        let value = eval_source("cup(1); cap(1)").unwrap();
        let scalar = value.as_scalar().unwrap();
        assert!((scalar - c(phi(), 0.0)).norm() < 1e-12);
        assert!((scalar.re - 1.6180339887).abs() < 1e-9);
    }

    #[test]
    fn zigzag_is_the_identity() {
        // One strand: create a pair to its right, then annihilate the
        // original strand with the new pair's left leg.
        let value = eval_source("cup(2); cap(1)").unwrap();
        assert_eq!(value.matrix.domain.n, 1);
        assert_eq!(value.matrix.codomain.n, 1);
        let dev = value
            .matrix
            .max_abs_diff(&LinearOp::identity(BasisSpec::full(1)))
            .unwrap();
        assert!(dev < 1e-12);
        // And the mirrored zigzag: cup to the left, cap on the right pair.
        let value = eval_source("id(1); cup(1); cap(2)").unwrap();
        let dev = value
            .matrix
            .max_abs_diff(&LinearOp::identity(BasisSpec::full(1)))
            .unwrap();
        assert!(dev < 1e-12);
    }

    #[test]
    fn crossing_then_inverse_crossing_cancels() {
        for n in 2..=5 {
            for i in 1..n {
                let value = eval_source(&format!("id({n}); cross({i},+); cross({i},-)")).unwrap();
                let dev = value
                    .matrix
                    .max_abs_diff(&LinearOp::identity(BasisSpec::full(n)))
                    .unwrap();
                assert!(dev < 1e-12, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn fusesplit_squares_to_sqrt_phi_times_itself() {
        for n in 2..=4 {
            for i in 1..n {
                let once = eval_source(&format!("id({n}); fusesplit({i})")).unwrap().matrix;
                let twice = once.compose(&once).unwrap();
                let scaled = once.scaled(c(phi().sqrt(), 0.0));
                assert!(twice.max_abs_diff(&scaled).unwrap() < 1e-12, "n={n} i={i}");
            }
        }
    }

    /// Extracts the block of a Full(n)→Full(n) operator acting on one
    /// charge sector (strand-preserving diagrams are block diagonal).
    fn sector_block(op: &LinearOp, n: usize, total: Charge) -> LinearOp {
        let offset = match total {
            Charge::Vacuum => 0,
            Charge::Tau => dim(n, Charge::Vacuum),
        };
        let sector = BasisSpec::sector(n, total);
        let d = sector.dim();
        let mut out = LinearOp::zeros(sector, sector);
        for row in 0..d {
            for col in 0..d {
                out.add_entry(row, col, op.entry(row + offset, col + offset));
            }
        }
        out
    }

    #[test]
    fn crossings_match_braid_generators_up_to_six_strands() {
        for n in 2..=6usize {
            for i in 1..n {
                for (sign, orientation) in [(Sign::Plus, Orientation::Positive), (Sign::Minus, Orientation::Negative)] {
                    let source = format!("id({n}); cross({i},{sign})");
                    let value = eval_source(&source).unwrap();
                    for total in [Charge::Vacuum, Charge::Tau] {
                        if dim(n, total) == 0 {
                            continue;
                        }
                        let block = sector_block(&value.matrix, n, total);
                        let braid = braid_generator(n, total, i, orientation).unwrap();
                        let dev = block.max_abs_diff(&braid).unwrap();
                        assert!(dev < 1e-10, "{source} total={total}: dev {dev:.2e}");
                    }
                }
            }
        }
    }

    #[test]
    fn composite_crossings_reproduce_braid_words_on_the_qubit() {
        // σ₂ then σ₁ on four strands, compared entry by entry.
        let value = eval_source("id(4); cross(2,+); cross(1,+)").unwrap();
        let block = sector_block(&value.matrix, 4, Charge::Vacuum);
        let sigma1 = braid_generator(4, Charge::Vacuum, 1, Orientation::Positive).unwrap();
        let sigma2 = braid_generator(4, Charge::Vacuum, 2, Orientation::Positive).unwrap();
        let product = sigma1.compose(&sigma2).unwrap();
        assert!(block.max_abs_diff(&product).unwrap() < 1e-10);
    }

    #[test]
    fn far_apart_slices_commute() {
        let ab = eval_source("id(5); cross(1,+); cross(3,+)").unwrap();
        let ba = eval_source("id(5); cross(3,+); cross(1,+)").unwrap();
        assert!(ab.matrix.max_abs_diff(&ba.matrix).unwrap() < 1e-12);
        let ab = eval_source("id(4); fusesplit(3); cross(1,-)").unwrap();
        let ba = eval_source("id(4); cross(1,-); fusesplit(3)").unwrap();
        assert!(ab.matrix.max_abs_diff(&ba.matrix).unwrap() < 1e-12);
    }

    #[test]
    fn side_by_side_cups_give_the_encoded_zero() {
        let value = eval_source("cup(1); cup(3)").unwrap();
        let ket = value.orthonormal();
        // Domain: the vacuum; codomain: four strands. |0⟩ = (1,0,1,0).
        let four = BasisSpec::full(4);
        let paths = four.paths();
        let zero_index = paths.iter().position(|p| p.to_string() == "1,0,1,0").unwrap();
        assert!((ket.entry(zero_index, 0) - c(1.0, 0.0)).norm() < 1e-12);
        for (idx, path) in paths.iter().enumerate() {
            if idx != zero_index {
                assert!(ket.entry(idx, 0).norm() < 1e-12, "unexpected weight on {path}");
            }
        }
    }

    #[test]
    fn nested_cups_give_the_braided_ancilla_shape() {
        // Nested cups produce (1, φ^{1/2}) projectively in the orthonormal
        // encoded basis.
        let value = eval_source("cup(1); cup(2)").unwrap();
        let ket = value.orthonormal();
        let four = BasisSpec::full(4);
        let paths = four.paths();
        let zero_index = paths.iter().position(|p| p.to_string() == "1,0,1,0").unwrap();
        let one_index = paths.iter().position(|p| p.to_string() == "1,1,1,0").unwrap();
        let ratio = ket.entry(one_index, 0) / ket.entry(zero_index, 0);
        assert!((ratio - c(phi().sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cupcap_matches_the_fusion_component_bookkeeping() {
        // The diagram-normalized cap applied to a created pair carries the
        // bubble factor φ relative to the isometric convention used by the
        // operator module.
        let st = AnyonState::vacuum();
        let with_pair = crate::operators::create_pair(&st, 0).unwrap();
        let cap = cap_op(2, 1);
        let as_full = {
            let mut op = LinearOp::zeros(BasisSpec::full(0), BasisSpec::full(2));
            // Embed the created pair as a column vector.
            let two = BasisSpec::full(2);
            for (idx, path) in two.paths().iter().enumerate() {
                let amp = with_pair.amplitude(path);
                op.add_entry(idx, 0, amp);
            }
            op
        };
        let closed = cap.compose(&as_full).unwrap();
        // ⟨cap|pair⟩ in mixed normalization: √φ per vertex pair = √φ · 1.
        assert!((closed.entry(0, 0) - c(phi().sqrt(), 0.0)).norm() < 1e-12);
    }
}
