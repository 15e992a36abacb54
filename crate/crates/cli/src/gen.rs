//! Built-in benchmark generators: the writers family and the lock-encoded
//! 3-SAT fixtures.

use por_core::ast::{self, AstProgram, Decl, ProgramBuilder, Stmt};
use por_core::program::Span;
use por_core::Program;
use thiserror::Error;

/// The writers family: n writer threads each storing to its own slot, a
/// counter thread incrementing n-1 times, and a master that reads the
/// counter and clears the slot it names. Every shared access sits in a
/// per-variable critical section, which keeps the program race-free while
/// preserving the coupling between the counter race and the slot race.
/// The executions fall into exactly 2n trace classes.
pub fn writers_ast(n: usize) -> AstProgram {
    assert!(n >= 1, "writers needs at least one writer");
    let mut b = ProgramBuilder::new().var("c", 0).var("i", 0).array("x", n, vec![]);
    b = b.mutex("mc");
    for j in 0..n {
        b = b.mutex(&format!("mx{j}"));
    }
    for j in 0..n {
        b = b.thread(&format!("w{j}"), vec![
            ast::lock(&format!("mx{j}")),
            ast::assign_idx("x", ast::int(j as i64), ast::int(7 + j as i64)),
            ast::unlock(&format!("mx{j}")),
        ]);
    }
    let mut count = Vec::new();
    for k in 1..n {
        count.push(ast::lock("mc"));
        count.push(ast::assign("c", ast::int(k as i64)));
        count.push(ast::unlock("mc"));
    }
    b = b.thread("count", count);

    let mut master = vec![ast::lock("mc"), ast::assign("i", ast::var("c")), ast::unlock("mc")];
    master.extend(write_slot_chain(0, n));
    b = b.thread("master", master);
    b.ast()
}

/// `if (i == j) { lock; x[j] = 0; unlock } else { ... }`, with the last
/// slot written unguarded (the counter never exceeds n-1).
fn write_slot_chain(j: usize, n: usize) -> Vec<Stmt> {
    let block = |j: usize| {
        vec![
            ast::lock(&format!("mx{j}")),
            ast::assign_idx("x", ast::int(j as i64), ast::int(0)),
            ast::unlock(&format!("mx{j}")),
        ]
    };
    if j == n - 1 {
        return block(j);
    }
    vec![Stmt::If {
        cond: ast::eq(ast::var("i"), ast::int(j as i64)),
        then_body: block(j),
        else_body: write_slot_chain(j + 1, n),
        span: Span::default(),
    }]
}

pub fn writers(n: usize) -> Program {
    por_core::ast::lower(&writers_ast(n)).expect("writers generator emits a well-formed program")
}

/// A propositional formula in at-most-3-literal clauses. Within one clause
/// every variable occurs at most once (so never with both polarities).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula3Sat {
    pub vars: usize,
    /// Each literal is (variable index, true = positive).
    pub clauses: Vec<Vec<(usize, bool)>>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("clause {0} is empty")]
    EmptyClause(usize),
    #[error("clause {clause} has {len} literals (1..=3 allowed)")]
    ClauseTooLong { clause: usize, len: usize },
    #[error("clause {clause} refers to variable {var} out of range")]
    VarOutOfRange { clause: usize, var: usize },
    #[error("clause {clause} mentions variable {var} twice")]
    DuplicateVar { clause: usize, var: usize },
}

impl Formula3Sat {
    pub fn validate(&self) -> Result<(), FormulaError> {
        for (j, clause) in self.clauses.iter().enumerate() {
            if clause.is_empty() {
                return Err(FormulaError::EmptyClause(j));
            }
            if clause.len() > 3 {
                return Err(FormulaError::ClauseTooLong { clause: j, len: clause.len() });
            }
            for (k, &(v, _)) in clause.iter().enumerate() {
                if v >= self.vars {
                    return Err(FormulaError::VarOutOfRange { clause: j, var: v });
                }
                if clause[..k].iter().any(|&(w, _)| w == v) {
                    return Err(FormulaError::DuplicateVar { clause: j, var: v });
                }
            }
        }
        Ok(())
    }

    /// Parses the line-per-clause literal format: `1 -2 3` means
    /// `(v1 ∨ ¬v2 ∨ v3)`; variables are 1-based, `#` comments allowed.
    pub fn parse(text: &str) -> Result<Formula3Sat, String> {
        let mut clauses = Vec::new();
        let mut vars = 0usize;
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let mut clause = Vec::new();
            for tok in line.split_whitespace() {
                let lit: i64 = tok
                    .parse()
                    .map_err(|_| format!("line {}: `{tok}` is not a literal", ln + 1))?;
                if lit == 0 {
                    return Err(format!("line {}: 0 is not a literal", ln + 1));
                }
                let var = lit.unsigned_abs() as usize - 1;
                vars = vars.max(var + 1);
                clause.push((var, lit > 0));
            }
            clauses.push(clause);
        }
        let f = Formula3Sat { vars, clauses };
        f.validate().map_err(|e| e.to_string())?;
        Ok(f)
    }
}

/// Program encoding of a formula. Per variable v there are two threads
/// racing on mutex `lv`: whichever locks first chooses the value. Per
/// clause c there is a single-statement thread locking `lc`. Per literal
/// occurrence (v in c) there is a runner thread locking `lc`, gated behind
/// an initially-acquired start mutex that only the owning chooser releases.
/// A combination of runners covering every clause without mixing the two
/// choosers of any variable exists exactly when the formula is satisfiable.
pub fn sat3_ast(f: &Formula3Sat) -> Result<AstProgram, FormulaError> {
    f.validate()?;
    let mut decls = Vec::new();
    let mut threads = Vec::new();
    let span = Span::default();
    for i in 0..f.vars {
        decls.push(Decl::Mutex { name: format!("lv{i}"), locked: false, span });
    }
    for j in 0..f.clauses.len() {
        decls.push(Decl::Mutex { name: format!("lc{j}"), locked: false, span });
    }
    for (j, clause) in f.clauses.iter().enumerate() {
        for &(v, _) in clause {
            decls.push(Decl::Mutex { name: format!("s_v{v}_c{j}"), locked: true, span });
        }
    }
    // Choosers: lock the variable, then start the runners of the matching
    // polarity by releasing their gates.
    for i in 0..f.vars {
        for positive in [true, false] {
            let mut body = vec![ast::lock(&format!("lv{i}"))];
            for (j, clause) in f.clauses.iter().enumerate() {
                if clause.iter().any(|&(v, pol)| v == i && pol == positive) {
                    body.push(ast::unlock(&format!("s_v{i}_c{j}")));
                }
            }
            let name = if positive { format!("t{i}") } else { format!("f{i}") };
            threads.push((name, body));
        }
    }
    for j in 0..f.clauses.len() {
        threads.push((format!("d{j}"), vec![ast::lock(&format!("lc{j}"))]));
    }
    for (j, clause) in f.clauses.iter().enumerate() {
        for &(v, _) in clause {
            threads.push((format!("r_v{v}_c{j}"), vec![
                ast::lock(&format!("s_v{v}_c{j}")),
                ast::lock(&format!("lc{j}")),
            ]));
        }
    }
    Ok(AstProgram { decls, threads })
}

pub fn sat3(f: &Formula3Sat) -> Result<Program, FormulaError> {
    let ast = sat3_ast(f)?;
    Ok(por_core::ast::lower(&ast).expect("3sat generator emits a well-formed program"))
}

/// Deterministic pseudo-random formula: `clauses` clauses of 3 distinct
/// variables each, polarity drawn from the seed. Plain xorshift so the
/// fixture family is reproducible everywhere.
pub fn random_formula(vars: usize, clauses: usize, seed: u64) -> Formula3Sat {
    assert!(vars >= 3, "need at least 3 variables");
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).max(1);
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut out = Vec::with_capacity(clauses);
    for _ in 0..clauses {
        let mut picked: Vec<usize> = Vec::with_capacity(3);
        while picked.len() < 3 {
            let v = (next() % vars as u64) as usize;
            if !picked.contains(&v) {
                picked.push(v);
            }
        }
        out.push(picked.into_iter().map(|v| (v, next() % 2 == 0)).collect());
    }
    Formula3Sat { vars, clauses: out }
}

/// The one-literal-per-clause inconsistency chain: x1 ≠ x2, x2 ≠ x3, ...,
/// xn ≠ x1 with an odd cycle, which is unsatisfiable. With growing n this
/// family drives the exhaustive combination search hard while each clause
/// stays tiny.
pub fn odd_cycle_formula(n: usize) -> Formula3Sat {
    assert!(n >= 3 && n % 2 == 1, "odd cycle needs odd n >= 3");
    let mut clauses = Vec::new();
    for i in 0..n {
        let jn = (i + 1) % n;
        // (xi ∨ x{i+1}) ∧ (¬xi ∨ ¬x{i+1}) encodes xi ≠ x{i+1}.
        clauses.push(vec![(i, true), (jn, true)]);
        clauses.push(vec![(i, false), (jn, false)]);
    }
    Formula3Sat { vars: n, clauses }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writers_shape() {
        let p = writers(3);
        assert_eq!(p.threads.len(), 5); // 3 writers + count + master
        assert_eq!(p.mutexes.len(), 4); // mc + one per slot
        let p1 = writers(1);
        assert_eq!(p1.threads.len(), 3);
        assert!(p1.threads.iter().any(|t| t.code.is_empty())); // empty count
    }

    #[test]
    fn sat3_example_counts() {
        // Three variables; clause sizes 3, 2, 2 (seven literal occurrences).
        let f = Formula3Sat {
            vars: 3,
            clauses: vec![
                vec![(0, true), (1, false), (2, true)],
                vec![(0, false), (1, false)],
                vec![(0, true), (2, false)],
            ],
        };
        let p = sat3(&f).unwrap();
        // 2 choosers per variable + 1 per clause + 1 per occurrence.
        assert_eq!(p.threads.len(), 2 * 3 + 3 + 7);
        // 3 variable + 3 clause + 7 start mutexes.
        assert_eq!(p.mutexes.len(), 13);
        assert_eq!(p.init_locked.iter().filter(|&&l| l).count(), 7);
    }

    #[test]
    fn formula_validation() {
        let bad = Formula3Sat { vars: 2, clauses: vec![vec![(0, true), (0, false)]] };
        assert!(matches!(bad.validate(), Err(FormulaError::DuplicateVar { .. })));
        let empty = Formula3Sat { vars: 1, clauses: vec![vec![]] };
        assert!(matches!(empty.validate(), Err(FormulaError::EmptyClause(0))));
        let ok = Formula3Sat { vars: 1, clauses: vec![vec![(0, true)], vec![(0, false)]] };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn formula_text_roundtrip() {
        let f = Formula3Sat::parse("1 -2 3\n-1 -2\n1 -3 # comment\n").unwrap();
        assert_eq!(f.vars, 3);
        assert_eq!(f.clauses.len(), 3);
        assert_eq!(f.clauses[0], vec![(0, true), (1, false), (2, true)]);
    }
}
