//! Structured (name-based) program form and its lowering to executable
//! [`Program`]s.
//!
//! Both the text frontend and the built-in benchmark generators construct
//! this form; lowering resolves identifiers, lays out variable slots, and
//! flattens structured control flow into branch instructions with all
//! unconditional jumps chased away (so a control point is always a visible
//! action).

use crate::program::{
    BinOp, Expr as RExpr, Instr, LValue, MutexId, Op, Program, Span, Thread, UnOp, VarDecl,
};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Index(String, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Assign {
        name: String,
        index: Option<Expr>,
        value: Expr,
        span: Span,
    },
    Lock {
        mutex: String,
        span: Span,
    },
    Unlock {
        mutex: String,
        span: Span,
    },
    Assert {
        cond: Expr,
        span: Span,
    },
    If {
        cond: Expr,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
        span: Span,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
        span: Span,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decl {
    Var {
        name: String,
        init: Option<i64>,
        span: Span,
    },
    Array {
        name: String,
        len: usize,
        init: Option<Vec<i64>>,
        span: Span,
    },
    Mutex {
        name: String,
        locked: bool,
        span: Span,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AstProgram {
    pub decls: Vec<Decl>,
    pub threads: Vec<(String, Vec<Stmt>)>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum LowerError {
    #[error("{span}: `{name}` is not declared")]
    Undeclared { name: String, span: Span },
    #[error("{span}: duplicate declaration of `{name}`")]
    Duplicate { name: String, span: Span },
    #[error("{span}: `{name}` is a mutex, expected a variable")]
    MutexAsVar { name: String, span: Span },
    #[error("{span}: `{name}` is a variable, expected a mutex")]
    VarAsMutex { name: String, span: Span },
    #[error("{span}: `{name}` is an array and needs an index")]
    ArrayNeedsIndex { name: String, span: Span },
    #[error("{span}: `{name}` is a scalar and takes no index")]
    ScalarIndexed { name: String, span: Span },
    #[error("{span}: array `{name}` initializer has {given} values for length {len}")]
    BadArrayInit {
        name: String,
        len: usize,
        given: usize,
        span: Span,
    },
    #[error("{span}: array `{name}` must have positive length")]
    EmptyArray { name: String, span: Span },
}

struct Scope {
    vars: HashMap<String, usize>,
    mutexes: HashMap<String, MutexId>,
}

fn lower_expr(scope: &Scope, program: &[VarDecl], span: Span, e: &Expr) -> Result<RExpr, LowerError> {
    Ok(match e {
        Expr::Int(v) => RExpr::Const(*v),
        Expr::Var(name) => {
            let id = resolve_var(scope, span, name)?;
            if program[id].is_array {
                return Err(LowerError::ArrayNeedsIndex { name: name.clone(), span });
            }
            RExpr::Load(id)
        }
        Expr::Index(name, idx) => {
            let id = resolve_var(scope, span, name)?;
            if !program[id].is_array {
                return Err(LowerError::ScalarIndexed { name: name.clone(), span });
            }
            RExpr::LoadIdx(id, Box::new(lower_expr(scope, program, span, idx)?))
        }
        Expr::Unary(op, x) => RExpr::Unary(*op, Box::new(lower_expr(scope, program, span, x)?)),
        Expr::Binary(op, l, r) => RExpr::Binary(
            *op,
            Box::new(lower_expr(scope, program, span, l)?),
            Box::new(lower_expr(scope, program, span, r)?),
        ),
    })
}

fn resolve_var(scope: &Scope, span: Span, name: &str) -> Result<usize, LowerError> {
    if let Some(&id) = scope.vars.get(name) {
        return Ok(id);
    }
    if scope.mutexes.contains_key(name) {
        return Err(LowerError::MutexAsVar { name: name.into(), span });
    }
    Err(LowerError::Undeclared { name: name.into(), span })
}

fn resolve_mutex(scope: &Scope, span: Span, name: &str) -> Result<MutexId, LowerError> {
    if let Some(&id) = scope.mutexes.get(name) {
        return Ok(id);
    }
    if scope.vars.contains_key(name) {
        return Err(LowerError::VarAsMutex { name: name.into(), span });
    }
    Err(LowerError::Undeclared { name: name.into(), span })
}

/// Flattening buffer: real instructions plus pseudo-gotos resolved away at
/// the end.
enum Raw {
    Real(Op, Span),
    Goto(u32),
}

fn flatten(
    scope: &Scope,
    vars: &[VarDecl],
    body: &[Stmt],
    out: &mut Vec<Raw>,
) -> Result<(), LowerError> {
    for stmt in body {
        match stmt {
            Stmt::Assign { name, index, value, span } => {
                let id = resolve_var(scope, *span, name)?;
                let lv = match index {
                    None => {
                        if vars[id].is_array {
                            return Err(LowerError::ArrayNeedsIndex { name: name.clone(), span: *span });
                        }
                        LValue::Var(id)
                    }
                    Some(ix) => {
                        if !vars[id].is_array {
                            return Err(LowerError::ScalarIndexed { name: name.clone(), span: *span });
                        }
                        LValue::Elem(id, lower_expr(scope, vars, *span, ix)?)
                    }
                };
                let rhs = lower_expr(scope, vars, *span, value)?;
                out.push(Raw::Real(Op::Assign(lv, rhs), *span));
            }
            Stmt::Lock { mutex, span } => {
                let m = resolve_mutex(scope, *span, mutex)?;
                out.push(Raw::Real(Op::Lock(m), *span));
            }
            Stmt::Unlock { mutex, span } => {
                let m = resolve_mutex(scope, *span, mutex)?;
                out.push(Raw::Real(Op::Unlock(m), *span));
            }
            Stmt::Assert { cond, span } => {
                let c = lower_expr(scope, vars, *span, cond)?;
                out.push(Raw::Real(Op::Assert(c), *span));
            }
            Stmt::If { cond, then_body, else_body, span } => {
                let c = lower_expr(scope, vars, *span, cond)?;
                let branch = out.len();
                out.push(Raw::Real(Op::Branch { cond: c, on_true: 0, on_false: 0 }, *span));
                flatten(scope, vars, then_body, out)?;
                let skip = out.len();
                out.push(Raw::Goto(0));
                let else_start = out.len() as u32;
                flatten(scope, vars, else_body, out)?;
                let end = out.len() as u32;
                if let Raw::Real(Op::Branch { on_true, on_false, .. }, _) = &mut out[branch] {
                    *on_true = branch as u32 + 1;
                    *on_false = else_start;
                }
                if let Raw::Goto(t) = &mut out[skip] {
                    *t = end;
                }
            }
            Stmt::While { cond, body, span } => {
                let c = lower_expr(scope, vars, *span, cond)?;
                let head = out.len();
                out.push(Raw::Real(Op::Branch { cond: c, on_true: 0, on_false: 0 }, *span));
                flatten(scope, vars, body, out)?;
                out.push(Raw::Goto(head as u32));
                let end = out.len() as u32;
                if let Raw::Real(Op::Branch { on_true, on_false, .. }, _) = &mut out[head] {
                    *on_true = head as u32 + 1;
                    *on_false = end;
                }
            }
        }
    }
    Ok(())
}

/// Chases goto chains so every control edge lands on a real instruction.
fn resolve_code(raw: Vec<Raw>) -> Vec<Instr> {
    let n = raw.len();
    // Map raw index -> raw index of the first real instruction reachable by
    // following gotos (n = termination).
    let mut land = vec![u32::MAX; n + 1];
    fn chase(raw: &[Raw], land: &mut [u32], i: usize) -> u32 {
        if land[i] != u32::MAX {
            return land[i];
        }
        let r = match raw.get(i) {
            None => i as u32,
            Some(Raw::Real(..)) => i as u32,
            Some(Raw::Goto(t)) => {
                land[i] = i as u32; // break accidental cycles defensively
                chase(raw, land, *t as usize)
            }
        };
        land[i] = r;
        r
    }
    for i in 0..=n {
        chase(&raw, &mut land, i);
    }
    // Compact: new index for each real instruction.
    let mut new_idx = vec![u32::MAX; n + 1];
    let mut count = 0u32;
    for (i, r) in raw.iter().enumerate() {
        if matches!(r, Raw::Real(..)) {
            new_idx[i] = count;
            count += 1;
        }
    }
    new_idx[n] = count;
    let remap = |i: u32, land: &[u32], new_idx: &[u32]| -> u32 {
        let landed = land[i as usize] as usize;
        if landed >= n {
            count
        } else {
            new_idx[landed]
        }
    };
    let mut code = Vec::with_capacity(count as usize);
    for (i, r) in raw.into_iter().enumerate() {
        if let Raw::Real(mut op, span) = r {
            let next = remap(i as u32 + 1, &land, &new_idx);
            if let Op::Branch { on_true, on_false, .. } = &mut op {
                *on_true = remap(*on_true, &land, &new_idx);
                *on_false = remap(*on_false, &land, &new_idx);
            }
            code.push(Instr { op, next, span });
        }
    }
    code
}

/// Resolves names and flattens control flow into an executable program.
pub fn lower(ast: &AstProgram) -> Result<Program, LowerError> {
    let mut scope = Scope { vars: HashMap::new(), mutexes: HashMap::new() };
    let mut vars = Vec::new();
    let mut mutexes = Vec::new();
    let mut init_memory = Vec::new();
    let mut init_locked = Vec::new();

    for decl in &ast.decls {
        match decl {
            Decl::Var { name, init, span } => {
                if scope.vars.contains_key(name) || scope.mutexes.contains_key(name) {
                    return Err(LowerError::Duplicate { name: name.clone(), span: *span });
                }
                scope.vars.insert(name.clone(), vars.len());
                vars.push(VarDecl { name: name.clone(), base: init_memory.len(), len: 1, is_array: false });
                init_memory.push(init.unwrap_or(0));
            }
            Decl::Array { name, len, init, span } => {
                if scope.vars.contains_key(name) || scope.mutexes.contains_key(name) {
                    return Err(LowerError::Duplicate { name: name.clone(), span: *span });
                }
                if *len == 0 {
                    return Err(LowerError::EmptyArray { name: name.clone(), span: *span });
                }
                if let Some(values) = init {
                    if values.len() != *len {
                        return Err(LowerError::BadArrayInit {
                            name: name.clone(),
                            len: *len,
                            given: values.len(),
                            span: *span,
                        });
                    }
                }
                scope.vars.insert(name.clone(), vars.len());
                vars.push(VarDecl { name: name.clone(), base: init_memory.len(), len: *len, is_array: true });
                match init {
                    Some(values) => init_memory.extend_from_slice(values),
                    None => init_memory.extend(std::iter::repeat(0).take(*len)),
                }
            }
            Decl::Mutex { name, locked, span } => {
                if scope.vars.contains_key(name) || scope.mutexes.contains_key(name) {
                    return Err(LowerError::Duplicate { name: name.clone(), span: *span });
                }
                scope.mutexes.insert(name.clone(), mutexes.len());
                mutexes.push(name.clone());
                init_locked.push(*locked);
            }
        }
    }

    let mut threads = Vec::new();
    for (name, body) in &ast.threads {
        let mut raw = Vec::new();
        flatten(&scope, &vars, body, &mut raw)?;
        threads.push(Thread { name: name.clone(), code: resolve_code(raw) });
    }

    Ok(Program { vars, mutexes, threads, init_memory, init_locked })
}

// --- construction helpers, used by generators and tests ---

pub fn int(v: i64) -> Expr {
    Expr::Int(v)
}

pub fn var(name: &str) -> Expr {
    Expr::Var(name.into())
}

pub fn index(name: &str, idx: Expr) -> Expr {
    Expr::Index(name.into(), Box::new(idx))
}

pub fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::Binary(op, Box::new(l), Box::new(r))
}

pub fn eq(l: Expr, r: Expr) -> Expr {
    bin(BinOp::Eq, l, r)
}

pub fn assign(name: &str, value: Expr) -> Stmt {
    Stmt::Assign { name: name.into(), index: None, value, span: Span::default() }
}

pub fn assign_idx(name: &str, idx: Expr, value: Expr) -> Stmt {
    Stmt::Assign { name: name.into(), index: Some(idx), value, span: Span::default() }
}

pub fn lock(m: &str) -> Stmt {
    Stmt::Lock { mutex: m.into(), span: Span::default() }
}

pub fn unlock(m: &str) -> Stmt {
    Stmt::Unlock { mutex: m.into(), span: Span::default() }
}

pub fn assert_stmt(cond: Expr) -> Stmt {
    Stmt::Assert { cond, span: Span::default() }
}

pub fn if_else(cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt>) -> Stmt {
    Stmt::If { cond, then_body, else_body, span: Span::default() }
}

pub fn while_loop(cond: Expr, body: Vec<Stmt>) -> Stmt {
    Stmt::While { cond, body, span: Span::default() }
}

/// Convenience builder over [`AstProgram`].
#[derive(Default)]
pub struct ProgramBuilder {
    ast: AstProgram,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(mut self, name: &str, init: i64) -> Self {
        self.ast.decls.push(Decl::Var {
            name: name.into(),
            init: if init == 0 { None } else { Some(init) },
            span: Span::default(),
        });
        self
    }

    pub fn array(mut self, name: &str, len: usize, init: Vec<i64>) -> Self {
        self.ast.decls.push(Decl::Array {
            name: name.into(),
            len,
            init: if init.is_empty() { None } else { Some(init) },
            span: Span::default(),
        });
        self
    }

    pub fn mutex(mut self, name: &str) -> Self {
        self.ast.decls.push(Decl::Mutex { name: name.into(), locked: false, span: Span::default() });
        self
    }

    /// Mutex that starts out acquired; released by whichever thread unlocks
    /// it first. Used by generated fixtures to gate a thread's start.
    pub fn mutex_locked(mut self, name: &str) -> Self {
        self.ast.decls.push(Decl::Mutex { name: name.into(), locked: true, span: Span::default() });
        self
    }

    pub fn thread(mut self, name: &str, body: Vec<Stmt>) -> Self {
        self.ast.threads.push((name.into(), body));
        self
    }

    pub fn ast(self) -> AstProgram {
        self.ast
    }

    pub fn build(self) -> Result<Program, LowerError> {
        lower(&self.ast)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{enabled, step, Action, Effect};

    #[test]
    fn if_else_guard_is_one_action() {
        let p = ProgramBuilder::new()
            .var("x", 0)
            .var("y", 0)
            .thread("t", vec![if_else(
                eq(var("x"), int(0)),
                vec![assign("y", int(1))],
                vec![assign("y", int(2))],
            )])
            .build()
            .unwrap();
        // guard + one assignment on each path
        let s0 = p.initial_state();
        let a = Action { thread: 0, effect: Effect::Local };
        let (s1, _) = step(&p, &s0, a).unwrap();
        let (s2, _) = step(&p, &s1, a).unwrap();
        assert_eq!(s2.mem[1], 1);
        assert!(enabled(&p, &s2).is_empty());
        assert_eq!(s2.steps, 2);
    }

    #[test]
    fn while_loop_terminates_and_counts_guards() {
        let p = ProgramBuilder::new()
            .var("i", 0)
            .thread("t", vec![while_loop(
                bin(BinOp::Lt, var("i"), int(3)),
                vec![assign("i", bin(BinOp::Add, var("i"), int(1)))],
            )])
            .build()
            .unwrap();
        let mut s = p.initial_state();
        let a = Action { thread: 0, effect: Effect::Local };
        while !enabled(&p, &s).is_empty() {
            s = step(&p, &s, a).unwrap().0;
        }
        assert_eq!(s.mem[0], 3);
        // 4 guard evaluations + 3 increments
        assert_eq!(s.steps, 7);
    }

    #[test]
    fn empty_loop_body_resolves() {
        let p = ProgramBuilder::new()
            .var("x", 0)
            .thread("t", vec![while_loop(eq(var("x"), int(1)), vec![]), assign("x", int(5))])
            .build()
            .unwrap();
        let mut s = p.initial_state();
        let a = Action { thread: 0, effect: Effect::Local };
        while !enabled(&p, &s).is_empty() {
            s = step(&p, &s, a).unwrap().0;
        }
        assert_eq!(s.mem[0], 5);
    }

    #[test]
    fn undeclared_and_duplicate_are_rejected() {
        let err = ProgramBuilder::new()
            .thread("t", vec![lock("q")])
            .build()
            .unwrap_err();
        assert!(matches!(err, LowerError::Undeclared { .. }));

        let err = ProgramBuilder::new().var("x", 0).mutex("x").build().unwrap_err();
        assert!(matches!(err, LowerError::Duplicate { .. }));
    }
}
