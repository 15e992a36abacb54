//! Programs, their interleaving semantics, and the structural independence
//! relation between actions.
//!
//! A program is a fixed set of threads over shared integer variables (scalars
//! and arrays) and mutexes. Thread bodies are lowered to a flat instruction
//! list; unconditional jumps are resolved away so that every instruction a
//! thread can sit at corresponds to exactly one visible action: a `Local`
//! step (assignment, assert, or a branch-guard evaluation), a `Lock`, or an
//! `Unlock`.

use std::fmt;
use thiserror::Error;

pub type ThreadId = usize;
pub type MutexId = usize;
pub type VarId = usize;

/// Source position attached to statements for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// Synchronization effect of a single action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Effect {
    Local,
    Lock(MutexId),
    Unlock(MutexId),
}

impl Effect {
    pub fn mutex(self) -> Option<MutexId> {
        match self {
            Effect::Local => None,
            Effect::Lock(m) | Effect::Unlock(m) => Some(m),
        }
    }
}

/// A transition label: which thread moves and what it does to the locks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub thread: ThreadId,
    pub effect: Effect,
}

/// Structural independence between actions.
///
/// Two actions commute in every reachable state exactly when they belong to
/// different threads and do not touch the same mutex. Same-thread pairs and
/// same-mutex pairs are dependent.
pub fn independent(a: Action, b: Action) -> bool {
    if a.thread == b.thread {
        return false;
    }
    match (a.effect.mutex(), b.effect.mutex()) {
        (None, _) | (_, None) => true,
        (Some(x), Some(y)) => x != y,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Mul,
    Div,
    Rem,
    Add,
    Sub,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

/// Expression over shared variables, resolved to variable slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Const(i64),
    /// Scalar read.
    Load(VarId),
    /// Array read with a computed index.
    LoadIdx(VarId, Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(VarId),
    Elem(VarId, Expr),
}

/// Executable payload of one instruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Assign(LValue, Expr),
    Lock(MutexId),
    Unlock(MutexId),
    Assert(Expr),
    /// Guard evaluation of an `if` or `while`; one `Local` action.
    Branch {
        cond: Expr,
        on_true: u32,
        on_false: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instr {
    pub op: Op,
    /// Successor for non-branch instructions (`code.len()` terminates).
    pub next: u32,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub base: usize,
    pub len: usize,
    /// True when declared with `array`.
    pub is_array: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Thread {
    pub name: String,
    pub code: Vec<Instr>,
}

/// A lowered, executable program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub vars: Vec<VarDecl>,
    pub mutexes: Vec<String>,
    pub threads: Vec<Thread>,
    pub init_memory: Vec<i64>,
    pub init_locked: Vec<bool>,
}

impl Program {
    pub fn n_threads(&self) -> usize {
        self.threads.len()
    }

    pub fn n_mutexes(&self) -> usize {
        self.mutexes.len()
    }

    pub fn initial_state(&self) -> State {
        State {
            mem: self.init_memory.clone(),
            locks: self.init_locked.clone(),
            ips: vec![0; self.threads.len()],
            steps: 0,
        }
    }

    /// Instruction a thread currently sits at, if it has not terminated.
    pub fn instr_at(&self, state: &State, thread: ThreadId) -> Option<&Instr> {
        let code = &self.threads[thread].code;
        code.get(state.ips[thread] as usize)
    }

    /// The next action of a thread (defined whether or not it is enabled).
    pub fn next_action(&self, state: &State, thread: ThreadId) -> Option<Action> {
        self.instr_at(state, thread).map(|i| Action {
            thread,
            effect: match i.op {
                Op::Lock(m) => Effect::Lock(m),
                Op::Unlock(m) => Effect::Unlock(m),
                _ => Effect::Local,
            },
        })
    }

    pub fn mutex_id(&self, name: &str) -> Option<MutexId> {
        self.mutexes.iter().position(|m| m == name)
    }

    /// Statement count per thread (control statements count once each).
    pub fn statement_counts(&self) -> Vec<usize> {
        self.threads.iter().map(|t| t.code.len()).collect()
    }
}

/// An interleaving state: shared memory, lock bits, per-thread control
/// points (`code.len()` marks a terminated thread) and the step counter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub mem: Vec<i64>,
    pub locks: Vec<bool>,
    pub ips: Vec<u32>,
    pub steps: u32,
}

impl State {
    pub fn terminated(&self, program: &Program, thread: ThreadId) -> bool {
        self.ips[thread] as usize >= program.threads[thread].code.len()
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExecError {
    #[error("thread {thread} at {span}: array index {index} out of bounds for `{var}` (length {len})")]
    IndexOutOfBounds {
        thread: ThreadId,
        span: Span,
        var: String,
        index: i64,
        len: usize,
    },
    #[error("thread {thread} at {span}: division by zero")]
    DivisionByZero { thread: ThreadId, span: Span },
    #[error("action {action:?} is not enabled")]
    NotEnabled { action: Action },
    #[error("thread {thread} has terminated")]
    Terminated { thread: ThreadId },
}

/// Outcome details of a single step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    /// True when the step evaluated an `assert` whose condition was false.
    pub assert_failed: bool,
}

fn eval(program: &Program, state: &State, thread: ThreadId, span: Span, e: &Expr) -> Result<i64, ExecError> {
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Load(v) => state.mem[program.vars[*v].base],
        Expr::LoadIdx(v, idx) => {
            let decl = &program.vars[*v];
            let i = eval(program, state, thread, span, idx)?;
            if i < 0 || i as usize >= decl.len {
                return Err(ExecError::IndexOutOfBounds {
                    thread,
                    span,
                    var: decl.name.clone(),
                    index: i,
                    len: decl.len,
                });
            }
            state.mem[decl.base + i as usize]
        }
        Expr::Unary(op, x) => {
            let v = eval(program, state, thread, span, x)?;
            match op {
                UnOp::Not => (v == 0) as i64,
                UnOp::Neg => v.wrapping_neg(),
            }
        }
        Expr::Binary(op, l, r) => {
            // Short-circuit the boolean connectives so a guarded division
            // cannot trip an execution error.
            match op {
                BinOp::And => {
                    let lv = eval(program, state, thread, span, l)?;
                    if lv == 0 {
                        return Ok(0);
                    }
                    return Ok((eval(program, state, thread, span, r)? != 0) as i64);
                }
                BinOp::Or => {
                    let lv = eval(program, state, thread, span, l)?;
                    if lv != 0 {
                        return Ok(1);
                    }
                    return Ok((eval(program, state, thread, span, r)? != 0) as i64);
                }
                _ => {}
            }
            let lv = eval(program, state, thread, span, l)?;
            let rv = eval(program, state, thread, span, r)?;
            match op {
                BinOp::Mul => lv.wrapping_mul(rv),
                BinOp::Div => {
                    if rv == 0 {
                        return Err(ExecError::DivisionByZero { thread, span });
                    }
                    lv.wrapping_div(rv)
                }
                BinOp::Rem => {
                    if rv == 0 {
                        return Err(ExecError::DivisionByZero { thread, span });
                    }
                    lv.wrapping_rem(rv)
                }
                BinOp::Add => lv.wrapping_add(rv),
                BinOp::Sub => lv.wrapping_sub(rv),
                BinOp::Lt => (lv < rv) as i64,
                BinOp::Le => (lv <= rv) as i64,
                BinOp::Gt => (lv > rv) as i64,
                BinOp::Ge => (lv >= rv) as i64,
                BinOp::Eq => (lv == rv) as i64,
                BinOp::Ne => (lv != rv) as i64,
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
    })
}

/// Actions enabled at `state`, in thread order. A terminated thread
/// contributes nothing; at most one action per thread.
pub fn enabled(program: &Program, state: &State) -> Vec<Action> {
    let mut out = Vec::new();
    for t in 0..program.threads.len() {
        if let Some(a) = program.next_action(state, t) {
            match a.effect {
                Effect::Lock(m) if state.locks[m] => {}
                _ => out.push(a),
            }
        }
    }
    out
}

/// Fires `action` at `state`. Deterministic; errors if the action is not
/// enabled or the statement faults.
pub fn step(program: &Program, state: &State, action: Action) -> Result<(State, StepInfo), ExecError> {
    let thread = action.thread;
    let instr = program
        .instr_at(state, thread)
        .ok_or(ExecError::Terminated { thread })?;
    let expect = program.next_action(state, thread).unwrap();
    if expect != action {
        return Err(ExecError::NotEnabled { action });
    }
    if let Effect::Lock(m) = action.effect {
        if state.locks[m] {
            return Err(ExecError::NotEnabled { action });
        }
    }

    let mut next = state.clone();
    let mut info = StepInfo { assert_failed: false };
    let span = instr.span;
    let mut ip = instr.next;
    match &instr.op {
        Op::Assign(lv, rhs) => {
            let value = eval(program, state, thread, span, rhs)?;
            match lv {
                LValue::Var(v) => next.mem[program.vars[*v].base] = value,
                LValue::Elem(v, idx) => {
                    let decl = &program.vars[*v];
                    let i = eval(program, state, thread, span, idx)?;
                    if i < 0 || i as usize >= decl.len {
                        return Err(ExecError::IndexOutOfBounds {
                            thread,
                            span,
                            var: decl.name.clone(),
                            index: i,
                            len: decl.len,
                        });
                    }
                    next.mem[decl.base + i as usize] = value;
                }
            }
        }
        Op::Lock(m) => next.locks[*m] = true,
        Op::Unlock(m) => next.locks[*m] = false,
        Op::Assert(cond) => {
            if eval(program, state, thread, span, cond)? == 0 {
                info.assert_failed = true;
            }
        }
        Op::Branch { cond, on_true, on_false } => {
            ip = if eval(program, state, thread, span, cond)? != 0 {
                *on_true
            } else {
                *on_false
            };
        }
    }
    next.ips[thread] = ip;
    next.steps += 1;
    Ok((next, info))
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum RunError {
    #[error("sequence is not a run: action {index} ({action:?}) not enabled")]
    NotARun { index: usize, action: Action },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// Folds `step` over a sequence from the initial state.
pub fn run(program: &Program, sequence: &[Action]) -> Result<State, RunError> {
    let mut state = program.initial_state();
    for (index, &action) in sequence.iter().enumerate() {
        if !enabled(program, &state).contains(&action) {
            return Err(RunError::NotARun { index, action });
        }
        let (next, _) = step(program, &state, action)?;
        state = next;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{self, Stmt};

    fn two_lock_program() -> Program {
        ast::ProgramBuilder::new()
            .var("x", 0)
            .mutex("m")
            .thread("t0", vec![ast::assign("x", ast::int(7))])
            .thread("t1", vec![ast::lock("m"), ast::unlock("m")])
            .build()
            .unwrap()
    }

    #[test]
    fn lock_enabled_only_when_free() {
        let p = two_lock_program();
        let s0 = p.initial_state();
        let lock = Action { thread: 1, effect: Effect::Lock(0) };
        assert!(enabled(&p, &s0).contains(&lock));
        let (s1, _) = step(&p, &s0, lock).unwrap();
        assert!(s1.locks[0]);
        // A second lock on a held mutex is not enabled.
        assert!(!enabled(&p, &s1).iter().any(|a| a.effect == Effect::Lock(0)));
    }

    #[test]
    fn local_step_keeps_locks() {
        let p = two_lock_program();
        let s0 = p.initial_state();
        let a = Action { thread: 0, effect: Effect::Local };
        let (s1, info) = step(&p, &s0, a).unwrap();
        assert_eq!(s1.mem[0], 7);
        assert_eq!(s1.locks, s0.locks);
        assert!(!info.assert_failed);
    }

    #[test]
    fn run_empty_is_initial() {
        let p = two_lock_program();
        assert_eq!(run(&p, &[]).unwrap(), p.initial_state());
    }

    #[test]
    fn double_lock_is_not_a_run() {
        let p = two_lock_program();
        let lock = Action { thread: 1, effect: Effect::Lock(0) };
        let err = run(&p, &[lock, lock]).unwrap_err();
        assert_eq!(err, RunError::NotARun { index: 1, action: lock });
    }

    #[test]
    fn array_oob_is_reported() {
        let p = ast::ProgramBuilder::new()
            .array("a", 3, vec![])
            .thread("t0", vec![Stmt::Assign {
                name: "a".into(),
                index: Some(ast::int(3)),
                value: ast::int(0),
                span: Span::default(),
            }])
            .build()
            .unwrap();
        let a = Action { thread: 0, effect: Effect::Local };
        let err = step(&p, &p.initial_state(), a).unwrap_err();
        assert!(matches!(err, ExecError::IndexOutOfBounds { index: 3, .. }));
    }

    #[test]
    fn independence_is_symmetric_irreflexive() {
        let acts = [
            Action { thread: 0, effect: Effect::Local },
            Action { thread: 1, effect: Effect::Local },
            Action { thread: 0, effect: Effect::Lock(0) },
            Action { thread: 1, effect: Effect::Unlock(0) },
            Action { thread: 1, effect: Effect::Lock(1) },
        ];
        for &a in &acts {
            assert!(!independent(a, a));
            for &b in &acts {
                assert_eq!(independent(a, b), independent(b, a));
            }
        }
        assert!(independent(acts[0], acts[1]));
        assert!(!independent(acts[2], acts[3])); // lock m vs unlock m
        assert!(!independent(acts[0], acts[2])); // same thread
        assert!(independent(acts[2], acts[4])); // lock m vs lock m'
    }

    #[test]
    fn division_by_zero_is_an_error_unless_guarded() {
        let p = ast::ProgramBuilder::new()
            .var("x", 0)
            .var("y", 4)
            .thread("t0", vec![ast::assign(
                "y",
                ast::bin(BinOp::Div, ast::var("y"), ast::var("x")),
            )])
            .thread("t1", vec![ast::assign(
                "y",
                ast::bin(
                    BinOp::And,
                    ast::bin(BinOp::Ne, ast::var("x"), ast::int(0)),
                    ast::bin(BinOp::Gt, ast::bin(BinOp::Div, ast::var("y"), ast::var("x")), ast::int(0)),
                ),
            )])
            .build()
            .unwrap();
        let s0 = p.initial_state();
        let err = step(&p, &s0, Action { thread: 0, effect: Effect::Local }).unwrap_err();
        assert!(matches!(err, ExecError::DivisionByZero { .. }));
        // Short-circuit: `x != 0 && y/x > 0` evaluates to 0 without faulting.
        let (s1, _) = step(&p, &s0, Action { thread: 1, effect: Effect::Local }).unwrap();
        assert_eq!(s1.mem[1], 0);
    }
}
