//! Interned event store for the program unfolding.
//!
//! Events are canonically named by their label together with their two
//! immediate causal predecessors: `pt`, the previous event of the same
//! thread, and `pm`, the previous event on the same mutex (lock and unlock
//! labels only). Under the structural independence relation these two
//! generate the whole history, so interning on `(label, pt, pm)` assigns
//! each (action, history) pair exactly one id. Id 0 is reserved for the
//! virtual bottom event, a causal predecessor of everything.

use crate::causality::{CausalityIndex, ROOT};
use crate::program::{independent, Action, Effect, MutexId, Span, ThreadId};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

pub type EventId = u32;

/// The virtual bottom event: causally below every event, conflicts with none.
pub const BOT: EventId = 0;

#[derive(Debug, Clone)]
pub struct Event {
    pub action: Action,
    pub pt: EventId,
    pub pm: EventId,
    /// Node in the thread tree of `action.thread`.
    pub tnode: u32,
    /// Node in the lock tree of the touched mutex (lock/unlock only).
    pub lnode: u32,
    /// Causally maximal event of each thread within the local configuration.
    pub tmax: Box<[EventId]>,
    /// Causally maximal lock/unlock event per mutex occurring in the local
    /// configuration; small sorted association list.
    pub lmax: Box<[(MutexId, EventId)]>,
    pub live: bool,
    pub in_c: bool,
    pub in_d: bool,
    pub executed: bool,
    pub assert_failed: bool,
    /// Statement position recorded when first executed (violation reports).
    pub site: Span,
}

impl Event {
    pub fn thread(&self) -> ThreadId {
        self.action.thread
    }

    pub fn mutex(&self) -> Option<MutexId> {
        self.action.effect.mutex()
    }

    pub fn lmax_of(&self, m: MutexId) -> EventId {
        match self.lmax.binary_search_by_key(&m, |&(k, _)| k) {
            Ok(i) => self.lmax[i].1,
            Err(_) => BOT,
        }
    }
}

pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum StructureError {
    #[error("inconsistent predecessors: pt of {action:?} must belong to thread {}", action.thread)]
    BadThreadPred { action: Action },
    #[error("inconsistent predecessors: pm of {action:?} has the wrong label")]
    BadMutexPred { action: Action },
}

/// The global event set `U`: an interning arena plus the live-set flags and
/// the causality index. Single-owner; queries take `&self`.
#[derive(Debug, Clone)]
pub struct Unfolding {
    events: Vec<Event>,
    intern_map: HashMap<(Action, EventId, EventId), EventId>,
    pub index: CausalityIndex,
    n_threads: usize,
    live_count: usize,
}

impl Unfolding {
    pub fn new(n_threads: usize, n_mutexes: usize, skip_step: u32) -> Self {
        let bot = Event {
            action: Action { thread: usize::MAX, effect: Effect::Local },
            pt: BOT,
            pm: BOT,
            tnode: ROOT,
            lnode: NO_NODE,
            tmax: vec![BOT; n_threads].into_boxed_slice(),
            lmax: Box::new([]),
            live: true,
            in_c: false,
            in_d: false,
            executed: false,
            assert_failed: false,
            site: Span::default(),
        };
        Unfolding {
            events: vec![bot],
            intern_map: HashMap::new(),
            index: CausalityIndex::new(n_threads, n_mutexes, skip_step),
            n_threads,
            live_count: 0,
        }
    }

    pub fn n_threads(&self) -> usize {
        self.n_threads
    }

    /// Total events ever interned (bottom excluded).
    pub fn len(&self) -> usize {
        self.events.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn live_count(&self) -> usize {
        self.live_count
    }

    pub fn get(&self, e: EventId) -> &Event {
        &self.events[e as usize]
    }

    pub fn get_mut(&mut self, e: EventId) -> &mut Event {
        &mut self.events[e as usize]
    }

    pub fn ids(&self) -> impl Iterator<Item = EventId> + '_ {
        1..self.events.len() as EventId
    }

    pub fn live_ids(&self) -> impl Iterator<Item = EventId> + '_ {
        self.ids().filter(move |&e| self.events[e as usize].live)
    }

    pub fn revive(&mut self, e: EventId) {
        if e != BOT && !self.events[e as usize].live {
            self.events[e as usize].live = true;
            self.live_count += 1;
        }
    }

    pub fn drop_from_live(&mut self, e: EventId) {
        if e != BOT && self.events[e as usize].live {
            self.events[e as usize].live = false;
            self.live_count -= 1;
        }
    }

    /// Interns the event named by `(action, pt, pm)`. Returns the existing
    /// id on a key match (reviving it into the live set), otherwise
    /// allocates and wires up tree nodes, depth, tmax and lmax.
    pub fn intern(&mut self, action: Action, pt: EventId, pm: EventId) -> Result<EventId, StructureError> {
        if let Some(&id) = self.intern_map.get(&(action, pt, pm)) {
            self.revive(id);
            return Ok(id);
        }

        // Predecessor invariants.
        if pt != BOT && self.events[pt as usize].action.thread != action.thread {
            return Err(StructureError::BadThreadPred { action });
        }
        match action.effect {
            Effect::Local => {
                if pm != BOT {
                    return Err(StructureError::BadMutexPred { action });
                }
            }
            Effect::Lock(x) => {
                if pm != BOT && self.events[pm as usize].action.effect != Effect::Unlock(x) {
                    return Err(StructureError::BadMutexPred { action });
                }
            }
            Effect::Unlock(x) => {
                // pm is the matching lock; BOT covers initially-acquired
                // mutexes whose first chain event is the release.
                if pm != BOT && self.events[pm as usize].action.effect != Effect::Lock(x) {
                    return Err(StructureError::BadMutexPred { action });
                }
            }
        }

        let id = self.events.len() as EventId;

        // tmax: per-thread merge of both predecessors, own slot overridden.
        let mut tmax = self.events[pt as usize].tmax.clone();
        if pm != BOT {
            let pm_tmax = &self.events[pm as usize].tmax;
            for t in 0..self.n_threads {
                tmax[t] = self.later_in_thread_tree(tmax[t], pm_tmax[t]);
            }
        }
        tmax[action.thread] = id;

        // lmax: per-mutex merge, own mutex overridden for lock/unlock.
        let mut lmax: Vec<(MutexId, EventId)> = self.events[pt as usize].lmax.to_vec();
        if pm != BOT {
            for &(m, e) in self.events[pm as usize].lmax.iter() {
                match lmax.binary_search_by_key(&m, |&(k, _)| k) {
                    Ok(i) => lmax[i].1 = self.later_in_lock_tree(lmax[i].1, e),
                    Err(i) => lmax.insert(i, (m, e)),
                }
            }
        }
        if let Some(m) = action.effect.mutex() {
            match lmax.binary_search_by_key(&m, |&(k, _)| k) {
                Ok(i) => lmax[i].1 = id,
                Err(i) => lmax.insert(i, (m, id)),
            }
        }

        let tparent = if pt == BOT { ROOT } else { self.events[pt as usize].tnode };
        let tnode = self.index.thread_trees[action.thread].add(id, tparent);
        let lnode = match action.effect.mutex() {
            None => NO_NODE,
            Some(m) => {
                let lparent = if pm == BOT { ROOT } else { self.events[pm as usize].lnode };
                self.index.lock_trees[m].add(id, lparent)
            }
        };

        self.events.push(Event {
            action,
            pt,
            pm,
            tnode,
            lnode,
            tmax,
            lmax: lmax.into_boxed_slice(),
            live: true,
            in_c: false,
            in_d: false,
            executed: false,
            assert_failed: false,
            site: Span::default(),
        });
        self.live_count += 1;
        self.intern_map.insert((action, pt, pm), id);
        Ok(id)
    }

    /// Of two same-thread events (comparable by construction), the causally
    /// later one. `BOT` loses to anything.
    fn later_in_thread_tree(&self, a: EventId, b: EventId) -> EventId {
        if a == BOT {
            return b;
        }
        if b == BOT || a == b {
            return a;
        }
        let tree = &self.index.thread_trees[self.events[a as usize].action.thread];
        if tree.depth(self.events[a as usize].tnode) >= tree.depth(self.events[b as usize].tnode) {
            a
        } else {
            b
        }
    }

    fn later_in_lock_tree(&self, a: EventId, b: EventId) -> EventId {
        if a == BOT {
            return b;
        }
        if b == BOT || a == b {
            return a;
        }
        let m = self.events[a as usize].mutex().expect("lmax entry is a lock event");
        let tree = &self.index.lock_trees[m];
        if tree.depth(self.events[a as usize].lnode) >= tree.depth(self.events[b as usize].lnode) {
            a
        } else {
            b
        }
    }

    pub fn thread_depth(&self, e: EventId) -> u32 {
        if e == BOT {
            return 0;
        }
        let ev = &self.events[e as usize];
        self.index.thread_trees[ev.action.thread].depth(ev.tnode)
    }

    pub fn lock_depth(&self, e: EventId) -> u32 {
        if e == BOT {
            return 0;
        }
        let ev = &self.events[e as usize];
        match ev.mutex() {
            None => 0,
            Some(m) => self.index.lock_trees[m].depth(ev.lnode),
        }
    }

    /// Strict causal order. `BOT` is below every real event.
    pub fn less(&self, a: EventId, b: EventId) -> bool {
        if a == b || b == BOT {
            return false;
        }
        if a == BOT {
            return true;
        }
        let ea = &self.events[a as usize];
        let eb = &self.events[b as usize];
        if ea.action.thread == eb.action.thread {
            let tree = &self.index.thread_trees[ea.action.thread];
            return ea.tnode != eb.tnode && tree.is_ancestor(ea.tnode, eb.tnode);
        }
        // Cross-thread: a < b iff a is at or below b's view of a's thread.
        let t = eb.tmax[ea.action.thread];
        if t == BOT {
            return false;
        }
        if t == a {
            return true;
        }
        let tree = &self.index.thread_trees[ea.action.thread];
        tree.is_ancestor(ea.tnode, self.events[t as usize].tnode)
    }

    pub fn leq(&self, a: EventId, b: EventId) -> bool {
        a == b || self.less(a, b)
    }

    /// Inherited conflict. Same-tree pairs are conflicting exactly when
    /// neither is an ancestor of the other; general pairs conflict when the
    /// per-mutex maxima of some commonly touched mutex do.
    pub fn in_conflict(&self, a: EventId, b: EventId) -> bool {
        if a == b || a == BOT || b == BOT {
            return false;
        }
        let ea = &self.events[a as usize];
        let eb = &self.events[b as usize];
        if ea.action.thread == eb.action.thread {
            let tree = &self.index.thread_trees[ea.action.thread];
            return !tree.is_ancestor(ea.tnode, eb.tnode) && !tree.is_ancestor(eb.tnode, ea.tnode);
        }
        // Only mutexes present in both lmax maps can carry a conflict.
        let (mut i, mut j) = (0, 0);
        while i < ea.lmax.len() && j < eb.lmax.len() {
            let (ma, xa) = ea.lmax[i];
            let (mb, xb) = eb.lmax[j];
            if ma < mb {
                i += 1;
            } else if mb < ma {
                j += 1;
            } else {
                if xa != xb {
                    let tree = &self.index.lock_trees[ma];
                    let na = self.events[xa as usize].lnode;
                    let nb = self.events[xb as usize].lnode;
                    if !tree.is_ancestor(na, nb) && !tree.is_ancestor(nb, na) {
                        return true;
                    }
                }
                i += 1;
                j += 1;
            }
        }
        false
    }

    /// The strict causes of `e` (transitive closure of the two predecessor
    /// links), excluding bottom.
    pub fn history(&self, e: EventId) -> Vec<EventId> {
        let mut seen = HashSet::new();
        let mut stack = Vec::new();
        let ev = &self.events[e as usize];
        for p in [ev.pt, ev.pm] {
            if p != BOT && seen.insert(p) {
                stack.push(p);
            }
        }
        let mut out = Vec::new();
        while let Some(x) = stack.pop() {
            out.push(x);
            let ex = &self.events[x as usize];
            for p in [ex.pt, ex.pm] {
                if p != BOT && seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The local configuration `[e]`: the history plus `e` itself.
    /// `[BOT]` is empty per the bottom convention.
    pub fn local_config(&self, e: EventId) -> Vec<EventId> {
        if e == BOT {
            return Vec::new();
        }
        let mut out = self.history(e);
        out.push(e);
        out.sort_unstable();
        out
    }

    /// Whether the local configuration of `e` intersects the current D set
    /// (events flagged `in_d`).
    pub fn local_config_meets_d(&self, e: EventId) -> bool {
        if e == BOT {
            return false;
        }
        if self.events[e as usize].in_d {
            return true;
        }
        let mut seen = HashSet::new();
        let mut stack = vec![e];
        seen.insert(e);
        while let Some(x) = stack.pop() {
            let ex = &self.events[x as usize];
            if ex.in_d {
                return true;
            }
            for p in [ex.pt, ex.pm] {
                if p != BOT && seen.insert(p) {
                    stack.push(p);
                }
            }
        }
        false
    }

    /// Checks that two events could coexist in one configuration by the
    /// definitional route (label dependence against the whole history);
    /// test-only oracle hook for the fast `in_conflict`.
    pub fn in_conflict_slow(&self, a: EventId, b: EventId) -> bool {
        if a == b || a == BOT || b == BOT {
            return false;
        }
        let ca = self.local_config(a);
        let cb = self.local_config(b);
        if ca.binary_search(&b).is_ok() || cb.binary_search(&a).is_ok() {
            return false;
        }
        // Direct conflicts between members: dependent labels, neither in the
        // other's history.
        for &x in &ca {
            for &y in &cb {
                if x == y {
                    continue;
                }
                let lx = self.events[x as usize].action;
                let ly = self.events[y as usize].action;
                if independent(lx, ly) {
                    continue;
                }
                let hx = self.local_config(x);
                let hy = self.local_config(y);
                if hx.binary_search(&y).is_err() && hy.binary_search(&x).is_err() {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn act(thread: ThreadId, effect: Effect) -> Action {
        Action { thread, effect }
    }

    #[test]
    fn interning_is_injective() {
        let mut u = Unfolding::new(2, 1, 4);
        let e1 = u.intern(act(0, Effect::Local), BOT, BOT).unwrap();
        let e1b = u.intern(act(0, Effect::Local), BOT, BOT).unwrap();
        assert_eq!(e1, e1b);
        let e2 = u.intern(act(0, Effect::Lock(0)), e1, BOT).unwrap();
        assert_ne!(e1, e2);
        assert_eq!(u.len(), 2);
    }

    #[test]
    fn bad_predecessors_are_rejected() {
        let mut u = Unfolding::new(2, 1, 4);
        let e1 = u.intern(act(0, Effect::Local), BOT, BOT).unwrap();
        assert!(u.intern(act(1, Effect::Local), e1, BOT).is_err());
        assert!(u.intern(act(1, Effect::Lock(0)), BOT, e1).is_err());
    }

    #[test]
    fn history_follows_both_links() {
        let mut u = Unfolding::new(2, 1, 4);
        let a = u.intern(act(0, Effect::Lock(0)), BOT, BOT).unwrap();
        let b = u.intern(act(0, Effect::Unlock(0)), a, a).unwrap();
        let c = u.intern(act(1, Effect::Lock(0)), BOT, b).unwrap();
        assert_eq!(u.history(c), vec![a, b]);
        assert_eq!(u.local_config(c), vec![a, b, c]);
        assert!(u.less(a, c));
        assert!(u.less(BOT, c));
        assert!(!u.less(c, c));
    }

    #[test]
    fn cross_thread_tmax_merges_through_pm() {
        let mut u = Unfolding::new(2, 1, 4);
        let l0 = u.intern(act(1, Effect::Lock(0)), BOT, BOT).unwrap();
        let u0 = u.intern(act(1, Effect::Unlock(0)), l0, l0).unwrap();
        let l1 = u.intern(act(0, Effect::Lock(0)), BOT, u0).unwrap();
        // Thread 1's maximal event within [l1] flows in through pm.
        assert_eq!(u.get(l1).tmax[1], u0);
        assert!(u.less(l0, l1));
        assert!(u.leq(u0, l1));
    }

    #[test]
    fn sibling_locks_conflict() {
        let mut u = Unfolding::new(2, 1, 4);
        let a = u.intern(act(0, Effect::Lock(0)), BOT, BOT).unwrap();
        let b = u.intern(act(1, Effect::Lock(0)), BOT, BOT).unwrap();
        assert!(u.in_conflict(a, b));
        assert!(u.in_conflict(b, a));
        assert!(!u.in_conflict(a, a));
        assert_eq!(u.in_conflict(a, b), u.in_conflict_slow(a, b));
    }
}
