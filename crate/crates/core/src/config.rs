//! Configurations of the unfolding and their extension operations.
//!
//! A [`Config`] is the explorer's mutable view of one conflict-free,
//! causally closed event set: its members in push order (a linearization),
//! the per-thread and per-mutex maxima (the cut), and the cached state of
//! the cut. Pushing an event advances the cached state by one step;
//! popping restores the snapshot taken at push time.

use crate::event::{EventId, StructureError, Unfolding, BOT};
use crate::program::{enabled, step, Action, Effect, ExecError, MutexId, Program, State};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExtendError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("thread {thread} unlocks mutex `{mutex}` which is not held")]
    UnlockNotHeld { thread: usize, mutex: String },
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("run exceeded the step guard of {limit} actions")]
    StepGuard { limit: u32 },
    #[error("interleaving enumeration exceeded {limit} sequences")]
    TooLarge { limit: usize },
}

#[derive(Debug, Clone)]
struct Undo {
    prev_cut_thread: EventId,
    prev_cut_mutex: Option<(MutexId, EventId)>,
    prev_state: State,
}

/// The explorer's current configuration C.
#[derive(Debug, Clone)]
pub struct Config {
    members: Vec<EventId>,
    undo: Vec<Undo>,
    cut_thread: Vec<EventId>,
    cut_mutex: Vec<EventId>,
    state: State,
}

impl Config {
    pub fn new(program: &Program) -> Self {
        Config {
            members: Vec::new(),
            undo: Vec::new(),
            cut_thread: vec![BOT; program.n_threads()],
            cut_mutex: vec![BOT; program.n_mutexes()],
            state: program.initial_state(),
        }
    }

    pub fn members(&self) -> &[EventId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn cut_thread(&self) -> &[EventId] {
        &self.cut_thread
    }

    pub fn cut_mutex(&self) -> &[EventId] {
        &self.cut_mutex
    }

    /// Actions of the members in push order; a witness interleaving.
    pub fn trace(&self, unf: &Unfolding) -> Vec<Action> {
        self.members.iter().map(|&e| unf.get(e).action).collect()
    }

    /// Executes `e` and appends it. The caller guarantees `e` was produced
    /// by [`en`] for the current cut.
    pub fn push(
        &mut self,
        unf: &mut Unfolding,
        program: &Program,
        e: EventId,
        step_guard: u32,
    ) -> Result<(), ExtendError> {
        let action = unf.get(e).action;
        if self.state.steps >= step_guard {
            return Err(ExtendError::StepGuard { limit: step_guard });
        }
        let site = program
            .instr_at(&self.state, action.thread)
            .map(|i| i.span)
            .unwrap_or_default();
        let (next, info) = step(program, &self.state, action)?;
        let prev_state = std::mem::replace(&mut self.state, next);
        let prev_cut_thread = self.cut_thread[action.thread];
        self.cut_thread[action.thread] = e;
        let prev_cut_mutex = action.effect.mutex().map(|m| {
            let old = self.cut_mutex[m];
            self.cut_mutex[m] = e;
            (m, old)
        });
        self.members.push(e);
        self.undo.push(Undo { prev_cut_thread, prev_cut_mutex, prev_state });
        let ev = unf.get_mut(e);
        ev.in_c = true;
        if !ev.executed {
            ev.executed = true;
            ev.assert_failed = info.assert_failed;
            ev.site = site;
        }
        Ok(())
    }

    pub fn pop(&mut self, unf: &mut Unfolding) {
        let e = self.members.pop().expect("pop on empty configuration");
        let undo = self.undo.pop().unwrap();
        let action = unf.get(e).action;
        self.cut_thread[action.thread] = undo.prev_cut_thread;
        if let Some((m, old)) = undo.prev_cut_mutex {
            self.cut_mutex[m] = old;
        }
        self.state = undo.prev_state;
        unf.get_mut(e).in_c = false;
    }
}

/// The enabled events of C: one per enabled action, named by the cut.
pub fn en(unf: &mut Unfolding, program: &Program, config: &Config) -> Result<Vec<EventId>, ExtendError> {
    let mut out = Vec::new();
    for action in enabled(program, config.state()) {
        let pt = config.cut_thread[action.thread];
        let pm = match action.effect {
            Effect::Local => BOT,
            Effect::Lock(m) => config.cut_mutex[m],
            Effect::Unlock(m) => {
                if !config.state().locks[m] {
                    return Err(ExtendError::UnlockNotHeld {
                        thread: action.thread,
                        mutex: program.mutexes[m].clone(),
                    });
                }
                config.cut_mutex[m]
            }
        };
        out.push(unf.intern(action, pt, pm)?);
    }
    out.sort_unstable();
    Ok(out)
}

/// The conflicting extensions of C. All results carry lock labels: a
/// conflicting extension re-places some lock acquisition right after an
/// earlier release of the same mutex (or at the front of its chain).
///
/// Two sources cover the whole set:
/// - for each lock event in C, the walk down its mutex chain that tries to
///   acquire before each earlier release, stopping once the chain drops
///   below the event's thread predecessor;
/// - for each thread whose pending statement is a lock, the same
///   re-placements for the not-yet-taken acquisition (everything the chain
///   offers at or above the thread's own view of that mutex), minus the
///   enabled event itself.
pub fn cexp(
    unf: &mut Unfolding,
    program: &Program,
    config: &Config,
    en_events: &[EventId],
) -> Result<Vec<EventId>, ExtendError> {
    let mut out: Vec<EventId> = Vec::new();

    // Walks from lock events inside C.
    for i in 0..config.members().len() {
        let e = config.members()[i];
        let ev = unf.get(e);
        if !matches!(ev.action.effect, Effect::Lock(_)) {
            continue;
        }
        let label = ev.action;
        let e_t = ev.pt;
        let mut e_m = ev.pm;
        while !unf.leq(e_m, e_t) {
            // e_m is an unlock; its pm is the matching lock.
            e_m = unf.get(e_m).pm;
            if unf.less(e_m, e_t) {
                break;
            }
            // Step to the release before that lock (BOT at the chain root).
            e_m = unf.get(e_m).pm;
            let id = unf.intern(label, e_t, e_m)?;
            out.push(id);
        }
    }

    // Pending lock statements at the cut.
    for thread in 0..program.n_threads() {
        let Some(action) = program.next_action(config.state(), thread) else {
            continue;
        };
        let Effect::Lock(m) = action.effect else {
            continue;
        };
        let p = config.cut_thread()[thread];
        let bound = if p == BOT { BOT } else { unf.get(p).lmax_of(m) };
        // Start from the topmost release on the chain.
        let mut cur = config.cut_mutex()[m];
        if cur != BOT && matches!(unf.get(cur).action.effect, Effect::Lock(_)) {
            cur = unf.get(cur).pm;
        }
        loop {
            if !unf.leq(bound, cur) {
                break;
            }
            let id = unf.intern(action, p, cur)?;
            if en_events.binary_search(&id).is_err() {
                out.push(id);
            }
            if cur == BOT {
                break;
            }
            let lk = unf.get(cur).pm; // matching lock
            if lk == BOT {
                break;
            }
            cur = unf.get(lk).pm; // previous release or BOT
        }
    }

    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// `ex(C) = en(C) ⊎ cexp(C)`; disjointness is checked in debug builds.
pub fn extensions(
    unf: &mut Unfolding,
    program: &Program,
    config: &Config,
) -> Result<(Vec<EventId>, Vec<EventId>), ExtendError> {
    let en_events = en(unf, program, config)?;
    let cex_events = cexp(unf, program, config, &en_events)?;
    debug_assert!(cex_events.iter().all(|e| en_events.binary_search(e).is_err()));
    Ok((en_events, cex_events))
}

/// All interleavings (label sequences of topological sortings) of a member
/// set. Errors once more than `limit` sequences exist.
pub fn interleavings(
    unf: &Unfolding,
    members: &[EventId],
    limit: usize,
) -> Result<Vec<Vec<Action>>, ExtendError> {
    let n = members.len();
    let pos = |e: EventId| members.iter().position(|&x| x == e);
    let mut indeg = vec![0usize; n];
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, &e) in members.iter().enumerate() {
        let ev = unf.get(e);
        let mut preds = [ev.pt, ev.pm];
        if preds[0] == preds[1] {
            preds[1] = BOT;
        }
        for p in preds {
            if p == BOT {
                continue;
            }
            if let Some(j) = pos(p) {
                succs[j].push(i);
                indeg[i] += 1;
            }
        }
    }

    struct Walk<'a> {
        unf: &'a Unfolding,
        members: &'a [EventId],
        succs: &'a [Vec<usize>],
        indeg: Vec<usize>,
        used: Vec<bool>,
        prefix: Vec<Action>,
        out: Vec<Vec<Action>>,
        limit: usize,
    }
    impl Walk<'_> {
        fn go(&mut self) -> Result<(), ExtendError> {
            if self.prefix.len() == self.members.len() {
                if self.out.len() >= self.limit {
                    return Err(ExtendError::TooLarge { limit: self.limit });
                }
                self.out.push(self.prefix.clone());
                return Ok(());
            }
            for i in 0..self.members.len() {
                if self.used[i] || self.indeg[i] != 0 {
                    continue;
                }
                self.used[i] = true;
                for &j in &self.succs[i] {
                    self.indeg[j] -= 1;
                }
                self.prefix.push(self.unf.get(self.members[i]).action);
                self.go()?;
                self.prefix.pop();
                for &j in &self.succs[i] {
                    self.indeg[j] += 1;
                }
                self.used[i] = false;
            }
            Ok(())
        }
    }

    let mut walk = Walk {
        unf,
        members,
        succs: &succs,
        indeg,
        used: vec![false; n],
        prefix: Vec::with_capacity(n),
        out: Vec::new(),
        limit,
    };
    walk.go()?;
    Ok(walk.out)
}

/// The state reached by any interleaving of the members; recomputed from
/// scratch (test/oracle use — the explorer keeps a cached state).
pub fn state_of(unf: &Unfolding, program: &Program, members: &[EventId]) -> Result<State, ExtendError> {
    let mut rest: Vec<EventId> = members.to_vec();
    let mut state = program.initial_state();
    let mut placed: Vec<EventId> = Vec::new();
    while !rest.is_empty() {
        let mut picked = None;
        for (i, &e) in rest.iter().enumerate() {
            let ev = unf.get(e);
            let ok = [ev.pt, ev.pm]
                .iter()
                .all(|&p| p == BOT || placed.contains(&p) || !members.contains(&p));
            if ok {
                picked = Some(i);
                break;
            }
        }
        let i = picked.expect("member set is causally closed");
        let e = rest.remove(i);
        let (next, _) = step(program, &state, unf.get(e).action)?;
        state = next;
        placed.push(e);
    }
    Ok(state)
}
