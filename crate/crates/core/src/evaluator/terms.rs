//! Term tables for the four-ion fidelity expressions.
//!
//! Each cosine term reads `2(Γ_a + Γ_b) cos[2(±x_p ± x_q ...)]`, where the x
//! are the six pair-angle deviations. Γ patterns are written over the ion
//! slots (i, j, m, n) with `+`, `-`, `0`; the argument lists signed pair
//! labels from `ij im in jm jn mn`.

/// Pair slots in canonical order.
pub const PAIR_LABELS: [&str; 6] = ["ij", "im", "in", "jm", "jn", "mn"];
/// Ion-slot indices (i=0, j=1, m=2, n=3) of each pair slot.
pub const PAIR_SLOTS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// The eight fully-signed Γ patterns of the constant part (leading `+`).
pub const FULL_PATTERNS: [&str; 8] = ["+---", "+--+", "+-+-", "+-++", "++--", "++-+", "+++-", "++++"];

#[derive(Debug, Clone, Copy)]
pub struct RawTerm {
    pub gamma_a: &'static str,
    pub gamma_b: &'static str,
    pub weight_b: f64,
    pub argument: &'static str,
}

const fn term(gamma_a: &'static str, gamma_b: &'static str, argument: &'static str) -> RawTerm {
    RawTerm { gamma_a, gamma_b, weight_b: 1.0, argument }
}

/// Parallel-gate fidelity. Crosstalk slots enter as raw χ, which equals the
/// deviation because their ideal value is zero.
pub const PARALLEL: [RawTerm; 28] = [
    term("0+--", "+000", "+ij -im -in"),
    term("0++-", "+000", "+ij +im -in"),
    term("0+-+", "+000", "+ij -im +in"),
    term("0+++", "+000", "+ij +im +in"),
    term("0+00", "+0--", "+ij -jm -jn"),
    term("0+00", "+0+-", "+ij +jm -jn"),
    term("0+00", "+0-+", "+ij -jm +jn"),
    term("0+00", "+0++", "+ij +jm +jn"),
    term("00+0", "+-0+", "+im -jm +mn"),
    term("00+0", "++0+", "+im +jm +mn"),
    term("00+0", "+-0-", "+im -jm -mn"),
    term("00+0", "++0-", "+im +jm -mn"),
    term("000+", "+-+0", "+in -jn +mn"),
    term("000+", "+++0", "+in +jn +mn"),
    term("000+", "+--0", "+in -jn -mn"),
    term("000+", "++-0", "+in +jn -mn"),
    term("00++", "+-00", "+im +in -jm -jn"),
    term("00+-", "++00", "+im -in +jm -jn"),
    term("00+-", "+-00", "+im -in -jm +jn"),
    term("00++", "++00", "+im +in +jm +jn"),
    term("0+0-", "+0-0", "+ij -in -jm +mn"),
    term("0+0+", "+0+0", "+ij +in +jm +mn"),
    term("0+0+", "+0-0", "+ij +in -jm -mn"),
    term("0+0-", "+0+0", "+ij -in +jm -mn"),
    term("0+-0", "+00-", "+ij -im -jn +mn"),
    term("0++0", "+00+", "+ij +im +jn +mn"),
    term("0++0", "+00-", "+ij +im -jn -mn"),
    term("0+-0", "+00+", "+ij -im +jn -mn"),
];

/// Single-operation GHZ fidelity, all six slots as deviations.
///
/// The published form carries a coefficient 2 on Γ_{+--0} in the
/// `(in − jn − mn)` term while every sibling has 1; the parallel-gate
/// expression has 1 in the same place and the spin-pair enumeration in the
/// tests confirms 1, so 1 is used here.
pub const GHZ: [RawTerm; 28] = [
    term("0+++", "+000", "+ij +im +in"),
    term("0+-+", "+000", "+ij -im +in"),
    term("0++-", "+000", "+ij +im -in"),
    term("0+--", "+000", "+ij -im -in"),
    term("0+00", "+0++", "+ij +jm +jn"),
    term("0+00", "+0-+", "+ij -jm +jn"),
    term("0+00", "+0+-", "+ij +jm -jn"),
    term("0+00", "+0--", "+ij -jm -jn"),
    term("00+0", "++0+", "+im +jm +mn"),
    term("00+0", "+-0+", "+im -jm +mn"),
    term("00+0", "++0-", "+im +jm -mn"),
    term("00+0", "+-0-", "+im -jm -mn"),
    term("000+", "+++0", "+in +jn +mn"),
    term("000+", "+-+0", "+in -jn +mn"),
    term("000+", "++-0", "+in +jn -mn"),
    term("000+", "+--0", "+in -jn -mn"),
    term("00++", "++00", "+im +in +jm +jn"),
    term("00+-", "+-00", "+im -in -jm +jn"),
    term("00+-", "++00", "+im -in +jm -jn"),
    term("00++", "+-00", "+im +in -jm -jn"),
    term("0+0+", "+0+0", "+ij +in +jm +mn"),
    term("0+0-", "+0-0", "+ij -in -jm +mn"),
    term("0+0-", "+0+0", "+ij -in +jm -mn"),
    term("0+0+", "+0-0", "+ij +in -jm -mn"),
    term("0++0", "+00+", "+ij +im +jn +mn"),
    term("0+-0", "+00-", "+ij -im -jn +mn"),
    term("0+-0", "+00+", "+ij -im +jn -mn"),
    term("0++0", "+00-", "+ij +im -jn -mn"),
];

/// A parsed term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub gamma_a: [i8; 4],
    pub gamma_b: [i8; 4],
    pub weight_b: f64,
    /// Coefficient of each pair slot in the cosine argument.
    pub argument: [i8; 6],
}

pub fn parse_pattern(p: &str) -> [i8; 4] {
    let mut out = [0i8; 4];
    for (slot, ch) in p.chars().enumerate() {
        out[slot] = match ch {
            '+' => 1,
            '-' => -1,
            '0' => 0,
            other => panic!("bad pattern character {:?} in {:?}", other, p),
        };
    }
    out
}

pub fn parse_argument(arg: &str) -> [i8; 6] {
    let mut out = [0i8; 6];
    for token in arg.split_whitespace() {
        let (sign, label) = token.split_at(1);
        let sign = match sign {
            "+" => 1,
            "-" => -1,
            _ => panic!("bad sign in {:?}", token),
        };
        let slot =
            PAIR_LABELS.iter().position(|&l| l == label).unwrap_or_else(|| panic!("bad pair label in {:?}", token));
        out[slot] = sign;
    }
    out
}

pub fn parse(table: &[RawTerm]) -> Vec<Term> {
    table
        .iter()
        .map(|t| Term {
            gamma_a: parse_pattern(t.gamma_a),
            gamma_b: parse_pattern(t.gamma_b),
            weight_b: t.weight_b,
            argument: parse_argument(t.argument),
        })
        .collect()
}
