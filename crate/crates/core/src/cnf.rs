//! CNF formulas: DIMACS reading and writing, random k-SAT generation and
//! the static instance statistics used as "init" features.

use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SeededRng;

/// A literal over a 1-based variable index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    var: u32,
    positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        assert!(var >= 1, "variables are 1-based");
        Literal { var, positive }
    }

    /// Parses a non-zero DIMACS integer.
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Literal::new(value.unsigned_abs() as u32, value > 0))
    }

    pub fn var(self) -> u32 {
        self.var
    }

    pub fn is_positive(self) -> bool {
        self.positive
    }

    pub fn negated(self) -> Self {
        Literal { var: self.var, positive: !self.positive }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.positive {
            self.var as i64
        } else {
            -(self.var as i64)
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// An ordered disjunction of literals. Duplicates and tautologies are kept as read.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    pub fn new(literals: Vec<Literal>) -> Self {
        Clause { literals }
    }

    pub fn from_dimacs(values: &[i64]) -> Self {
        Clause::new(values.iter().map(|&v| Literal::from_dimacs(v).expect("non-zero literal")).collect())
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub num_vars: u32,
    pub clauses: Vec<Clause>,
    /// Where the formula came from: a path or a generator description.
    pub origin: String,
}

impl Formula {
    pub fn new(num_vars: u32, clauses: Vec<Clause>) -> Self {
        Formula { num_vars, clauses, origin: String::new() }
    }

    pub fn with_origin(mut self, origin: impl Into<String>) -> Self {
        self.origin = origin.into();
        self
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// True if the input contained an empty clause (trivially unsatisfiable).
    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Clause::is_empty)
    }

    /// Evaluates the formula under a total assignment indexed by `var - 1`.
    pub fn is_satisfied_by(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.literals()
                .iter()
                .any(|l| model.get(l.var() as usize - 1).copied() == Some(l.is_positive()))
        })
    }
}

#[derive(Debug, Error)]
pub enum CnfError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: missing `p cnf` header before clauses")]
    MissingHeader { line: usize },
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange { line: usize, literal: i64, num_vars: u32 },
    #[error("clause width k={k} exceeds variable count {num_vars}")]
    WidthExceedsVars { k: usize, num_vars: u32 },
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Result of reading a DIMACS file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedDimacs {
    pub formula: Formula,
    /// Clause count from the header when it disagrees with the clauses read.
    pub header_clause_mismatch: Option<usize>,
    /// Set when an empty clause (a bare `0`) appeared in the body.
    pub trivially_unsat: bool,
}

pub fn parse_dimacs<R: BufRead>(reader: R) -> Result<ParsedDimacs, CnfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut trivially_unsat = false;
    let mut last_line = 0;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            // SATLIB files end with a `%` trailer.
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(CnfError::MalformedHeader { line: line_no, reason: "duplicate header".into() });
            }
            header = Some(parse_header(trimmed, line_no)?);
            continue;
        }
        let Some((num_vars, _)) = header else {
            return Err(CnfError::MissingHeader { line: line_no });
        };
        for token in trimmed.split_whitespace() {
            let value: i64 = token
                .parse()
                .map_err(|_| CnfError::InvalidToken { line: line_no, token: token.to_string() })?;
            if value == 0 {
                if current.is_empty() {
                    trivially_unsat = true;
                }
                clauses.push(Clause::new(std::mem::take(&mut current)));
                continue;
            }
            if value.unsigned_abs() > num_vars as u64 {
                return Err(CnfError::LiteralOutOfRange { line: line_no, literal: value, num_vars });
            }
            current.push(Literal::from_dimacs(value).expect("non-zero"));
        }
    }

    let Some((num_vars, declared)) = header else {
        return Err(CnfError::MissingHeader { line: last_line.max(1) });
    };
    // A final clause without its terminating 0 is accepted.
    if !current.is_empty() {
        clauses.push(Clause::new(current));
    }
    let header_clause_mismatch = (declared != clauses.len()).then_some(declared);
    Ok(ParsedDimacs { formula: Formula::new(num_vars, clauses), header_clause_mismatch, trivially_unsat })
}

pub fn parse_dimacs_str(text: &str) -> Result<ParsedDimacs, CnfError> {
    parse_dimacs(text.as_bytes())
}

fn parse_header(line: &str, line_no: usize) -> Result<(u32, usize), CnfError> {
    let parts: Vec<&str> = line.split_whitespace().collect();
    let bad = |reason: &str| CnfError::MalformedHeader { line: line_no, reason: reason.to_string() };
    if parts.len() != 4 || parts[0] != "p" {
        return Err(bad("expected `p cnf <vars> <clauses>`"));
    }
    if parts[1] != "cnf" {
        return Err(bad("format is not `cnf`"));
    }
    let vars = parts[2].parse::<u32>().map_err(|_| bad("variable count is not a non-negative integer"))?;
    let clauses = parts[3].parse::<usize>().map_err(|_| bad("clause count is not a non-negative integer"))?;
    Ok((vars, clauses))
}

/// Writes DIMACS with LF endings, one clause per line. `origin` becomes a comment line.
pub fn write_dimacs<W: Write>(formula: &Formula, mut out: W) -> io::Result<()> {
    if !formula.origin.is_empty() {
        for line in formula.origin.lines() {
            writeln!(out, "c {line}")?;
        }
    }
    writeln!(out, "p cnf {} {}", formula.num_vars, formula.clauses.len())?;
    let mut buf = String::new();
    for clause in &formula.clauses {
        buf.clear();
        for lit in clause.literals() {
            buf.push_str(&lit.to_dimacs().to_string());
            buf.push(' ');
        }
        buf.push('0');
        writeln!(out, "{buf}")?;
    }
    Ok(())
}

pub fn to_dimacs_string(formula: &Formula) -> String {
    let mut out = Vec::new();
    write_dimacs(formula, &mut out).expect("writing to a Vec cannot fail");
    String::from_utf8(out).expect("DIMACS output is ASCII")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub num_vars: u32,
    /// Clause-to-variable ratio; the clause count is `round(ratio * num_vars)`.
    pub ratio: f64,
    pub k: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn num_clauses(&self) -> usize {
        (self.ratio * self.num_vars as f64).round() as usize
    }

    pub fn describe(&self) -> String {
        format!("random {}-SAT n={} ratio={} seed={}", self.k, self.num_vars, self.ratio, self.seed)
    }
}

/// Uniform random k-SAT: each clause draws `k` distinct variables and fair-coin signs.
pub fn generate_random_ksat(cfg: &GeneratorConfig) -> Result<Formula, CnfError> {
    if cfg.k < 2 {
        return Err(CnfError::InvalidConfig(format!("k must be at least 2, got {}", cfg.k)));
    }
    if !(cfg.ratio > 0.0 && cfg.ratio.is_finite()) {
        return Err(CnfError::InvalidConfig(format!("ratio must be positive, got {}", cfg.ratio)));
    }
    if cfg.k > cfg.num_vars as usize {
        return Err(CnfError::WidthExceedsVars { k: cfg.k, num_vars: cfg.num_vars });
    }
    let mut rng = SeededRng::seed_from_u64(cfg.seed);
    let clauses = (0..cfg.num_clauses())
        .map(|_| {
            let vars = index::sample(&mut rng, cfg.num_vars as usize, cfg.k);
            Clause::new(vars.iter().map(|v| Literal::new(v as u32 + 1, rng.random_bool(0.5))).collect())
        })
        .collect();
    Ok(Formula::new(cfg.num_vars, clauses).with_origin(cfg.describe()))
}

/// Instance statistics measured on the original formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InitFeatures {
    pub vars: f64,
    pub clauses: f64,
    pub clauses_per_var: f64,
    pub vars_per_clause: f64,
    pub frac_binary: f64,
    pub frac_ternary: f64,
    pub avg_clause_size: f64,
}

pub fn static_stats(formula: &Formula) -> InitFeatures {
    let mut db = ClauseDbCounts::default();
    for clause in &formula.clauses {
        db.add(clause.len());
    }
    let vars = formula.num_vars as f64;
    let clauses = db.clauses as f64;
    InitFeatures {
        vars,
        clauses,
        clauses_per_var: ratio_or_zero(clauses, vars),
        vars_per_clause: ratio_or_zero(vars, clauses),
        frac_binary: db.frac_binary(),
        frac_ternary: db.frac_ternary(),
        avg_clause_size: db.avg_size(),
    }
}

/// Running clause-database composition: totals that update in O(1) per clause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseDbCounts {
    pub clauses: u64,
    pub binary: u64,
    pub ternary: u64,
    pub literals: u64,
}

impl ClauseDbCounts {
    pub fn add(&mut self, size: usize) {
        self.clauses += 1;
        self.literals += size as u64;
        match size {
            2 => self.binary += 1,
            3 => self.ternary += 1,
            _ => {}
        }
    }

    pub fn remove(&mut self, size: usize) {
        self.clauses -= 1;
        self.literals -= size as u64;
        match size {
            2 => self.binary -= 1,
            3 => self.ternary -= 1,
            _ => {}
        }
    }

    pub fn frac_binary(&self) -> f64 {
        ratio_or_zero(self.binary as f64, self.clauses as f64)
    }

    pub fn frac_ternary(&self) -> f64 {
        ratio_or_zero(self.ternary as f64, self.clauses as f64)
    }

    pub fn avg_size(&self) -> f64 {
        ratio_or_zero(self.literals as f64, self.clauses as f64)
    }
}

/// `num / den`, or 0 when the denominator is 0.
pub fn ratio_or_zero(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lits(f: &Formula) -> Vec<Vec<i64>> {
        f.clauses.iter().map(|c| c.literals().iter().map(|l| l.to_dimacs()).collect()).collect()
    }

    #[test]
    fn parses_simple_file() {
        let parsed = parse_dimacs_str("p cnf 2 1\n1 -2 0").unwrap();
        assert_eq!(parsed.formula.num_vars, 2);
        assert_eq!(lits(&parsed.formula), vec![vec![1, -2]]);
        assert_eq!(parsed.header_clause_mismatch, None);
    }

    #[test]
    fn skips_comments() {
        let parsed = parse_dimacs_str("c hi\np cnf 1 1\n1 0").unwrap();
        assert_eq!(parsed.formula.num_vars, 1);
        assert_eq!(lits(&parsed.formula), vec![vec![1]]);
    }

    #[test]
    fn rejects_out_of_range_literal() {
        let err = parse_dimacs_str("p cnf 1 1\n2 0").unwrap_err();
        assert!(matches!(err, CnfError::LiteralOutOfRange { literal: 2, num_vars: 1, .. }));
    }

    #[test]
    fn rejects_malformed_header() {
        assert!(matches!(parse_dimacs_str("p cnf x 1\n1 0"), Err(CnfError::MalformedHeader { .. })));
        assert!(matches!(parse_dimacs_str("p dnf 1 1\n1 0"), Err(CnfError::MalformedHeader { .. })));
        assert!(matches!(parse_dimacs_str("1 0"), Err(CnfError::MissingHeader { .. })));
    }

    #[test]
    fn clause_count_mismatch_is_a_warning() {
        let parsed = parse_dimacs_str("p cnf 2 3\n1 0\n2 0\n").unwrap();
        assert_eq!(parsed.header_clause_mismatch, Some(3));
        assert_eq!(parsed.formula.num_clauses(), 2);
    }

    #[test]
    fn empty_clause_marks_trivially_unsat() {
        let parsed = parse_dimacs_str("p cnf 2 2\n1 2 0\n0\n").unwrap();
        assert!(parsed.trivially_unsat);
        assert!(parsed.formula.has_empty_clause());
    }

    #[test]
    fn duplicates_and_tautologies_preserved() {
        let parsed = parse_dimacs_str("p cnf 2 1\n1 1 -1 2 0\n").unwrap();
        assert_eq!(lits(&parsed.formula), vec![vec![1, 1, -1, 2]]);
    }

    #[test]
    fn clauses_may_span_lines() {
        let parsed = parse_dimacs_str("p cnf 3 2\n1 2\n3 0 -1\n0\n").unwrap();
        assert_eq!(lits(&parsed.formula), vec![vec![1, 2, 3], vec![-1]]);
    }

    #[test]
    fn writer_is_bit_exact() {
        let f = Formula::new(3, vec![Clause::from_dimacs(&[1, -2]), Clause::from_dimacs(&[3])]).with_origin("demo");
        assert_eq!(to_dimacs_string(&f), "c demo\np cnf 3 2\n1 -2 0\n3 0\n");
    }

    #[test]
    fn generator_shape() {
        let cfg = GeneratorConfig { num_vars: 100, ratio: 4.26, k: 3, seed: 7 };
        let f = generate_random_ksat(&cfg).unwrap();
        assert_eq!(f.num_clauses(), 426);
        assert!(f.clauses.iter().all(|c| c.len() == 3));
        assert_eq!(to_dimacs_string(&f), to_dimacs_string(&generate_random_ksat(&cfg).unwrap()));
    }

    #[test]
    fn generator_rejects_wide_clauses() {
        let cfg = GeneratorConfig { num_vars: 3, ratio: 4.0, k: 4, seed: 1 };
        assert!(matches!(generate_random_ksat(&cfg), Err(CnfError::WidthExceedsVars { .. })));
        let cfg = GeneratorConfig { num_vars: 3, ratio: 4.0, k: 1, seed: 1 };
        assert!(matches!(generate_random_ksat(&cfg), Err(CnfError::InvalidConfig(_))));
    }

    #[test]
    fn generator_ratio_sweep() {
        for (i, ratio) in [4.1, 4.4, 4.7, 5.0].into_iter().enumerate() {
            let cfg = GeneratorConfig { num_vars: 200, ratio, k: 3, seed: i as u64 };
            let f = generate_random_ksat(&cfg).unwrap();
            assert_eq!(f.num_clauses(), (ratio * 200.0_f64).round() as usize);
        }
    }

    #[test]
    fn stats_single_binary_clause() {
        let f = Formula::new(2, vec![Clause::from_dimacs(&[1, -2])]);
        let s = static_stats(&f);
        assert_eq!((s.vars, s.clauses, s.clauses_per_var), (2.0, 1.0, 0.5));
        assert_eq!((s.frac_binary, s.frac_ternary, s.avg_clause_size), (1.0, 0.0, 2.0));
    }

    #[test]
    fn stats_uniform_three_sat() {
        let f = generate_random_ksat(&GeneratorConfig { num_vars: 50, ratio: 4.2, k: 3, seed: 3 }).unwrap();
        let s = static_stats(&f);
        assert_eq!((s.frac_binary, s.frac_ternary, s.avg_clause_size), (0.0, 1.0, 3.0));
    }

    #[test]
    fn stats_mixed_and_empty() {
        let f = Formula::new(
            3,
            vec![Clause::from_dimacs(&[1]), Clause::from_dimacs(&[1, 2]), Clause::from_dimacs(&[1, 2, 3])],
        );
        let s = static_stats(&f);
        assert!((s.frac_binary - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.frac_ternary - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.avg_clause_size, 2.0);
        assert_eq!(static_stats(&Formula::new(0, vec![])), InitFeatures::default());
    }

    proptest! {
        #[test]
        fn roundtrip_generated(n in 3u32..60, ratio in 0.5f64..6.0, k in 2usize..4, seed: u64) {
            let cfg = GeneratorConfig { num_vars: n, ratio, k, seed };
            let f = generate_random_ksat(&cfg).unwrap();
            for c in &f.clauses {
                let mut vars: Vec<u32> = c.literals().iter().map(|l| l.var()).collect();
                vars.sort_unstable();
                vars.dedup();
                prop_assert_eq!(vars.len(), k);
            }
            let parsed = parse_dimacs_str(&to_dimacs_string(&f)).unwrap();
            prop_assert_eq!(parsed.formula.clauses, f.clauses);
            prop_assert_eq!(parsed.formula.num_vars, f.num_vars);
        }
    }
}
