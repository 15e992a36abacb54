//! Thread trees and lock trees with skip-link ancestor queries.
//!
//! Every event owns one node in its thread's tree; lock/unlock events own a
//! second node in their mutex's tree. The ancestor relation of a tree encodes
//! causality among the events it contains, and branching encodes conflict.
//! Nodes keep shortcut pointers to ancestors at distances s, s^2, s^3, ...
//! so depth-g ancestors are found in logarithmically many hops, like a skip
//! list laid over tree branches.

use crate::event::EventId;

pub const ROOT: u32 = 0;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub owner: EventId,
    pub parent: u32,
    pub depth: u32,
    /// Shortcuts to the ancestors at depth - s^1, depth - s^2, ...
    /// The number of links equals the number of trailing zeros of `depth`
    /// written in base s.
    pub skips: Box<[u32]>,
}

/// Append-only tree with skip links; node 0 is a virtual root at depth 0.
#[derive(Debug, Clone)]
pub struct SkipTree {
    step: u32,
    nodes: Vec<TreeNode>,
}

impl SkipTree {
    pub fn new(step: u32) -> Self {
        assert!(step >= 2, "skip step must be at least 2");
        SkipTree {
            step,
            nodes: vec![TreeNode { owner: 0, parent: ROOT, depth: 0, skips: Box::new([]) }],
        }
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() <= 1
    }

    pub fn node(&self, id: u32) -> &TreeNode {
        &self.nodes[id as usize]
    }

    pub fn depth(&self, id: u32) -> u32 {
        self.nodes[id as usize].depth
    }

    /// Number of trailing zeros of `depth` in base `step`.
    fn link_count(step: u32, depth: u32) -> u32 {
        let mut k = 0;
        let mut d = depth;
        while d != 0 && d % step == 0 {
            k += 1;
            d /= step;
        }
        k
    }

    /// Adds a node under `parent` and wires its skip links.
    pub fn add(&mut self, owner: EventId, parent: u32) -> u32 {
        let depth = self.nodes[parent as usize].depth + 1;
        let id = self.nodes.len() as u32;
        let links = Self::link_count(self.step, depth);
        let mut skips = Vec::with_capacity(links as usize);
        let mut dist = 1u64;
        for _ in 0..links {
            dist *= self.step as u64;
            // Targets lie on the parent's branch, which is fully wired.
            let target_depth = depth as u64 - dist;
            skips.push(self.ancestor_at_depth(parent, target_depth as u32).0);
        }
        self.nodes.push(TreeNode { owner, parent, depth, skips: skips.into_boxed_slice() });
        id
    }

    /// The unique depth-`g` ancestor of `n`, with the number of hops taken.
    /// Each hop takes the greediest link that does not overshoot.
    pub fn ancestor_at_depth(&self, n: u32, g: u32) -> (u32, u32) {
        let mut cur = n;
        let mut hops = 0;
        debug_assert!(g <= self.depth(n), "depth out of range");
        loop {
            let node = &self.nodes[cur as usize];
            if node.depth == g {
                return (cur, hops);
            }
            let dist = (node.depth - g) as u64;
            let mut jump = node.parent;
            let mut reach = 1u64;
            let mut link_reach = self.step as u64;
            for &s in node.skips.iter() {
                if link_reach > dist {
                    break;
                }
                jump = s;
                reach = link_reach;
                link_reach *= self.step as u64;
            }
            let _ = reach;
            cur = jump;
            hops += 1;
        }
    }

    /// Whether `a` is an ancestor of `b` (reflexively).
    pub fn is_ancestor(&self, a: u32, b: u32) -> bool {
        if a == b {
            return true;
        }
        let da = self.depth(a);
        if da >= self.depth(b) {
            return false;
        }
        self.ancestor_at_depth(b, da).0 == a
    }

    /// Children of one node, for conflict-edge rendering.
    pub fn children_of(&self, parent: u32) -> Vec<u32> {
        (1..self.nodes.len() as u32)
            .filter(|&i| self.nodes[i as usize].parent == parent)
            .collect()
    }
}

/// One thread tree per thread and one lock tree per mutex.
#[derive(Debug, Clone)]
pub struct CausalityIndex {
    pub step: u32,
    pub thread_trees: Vec<SkipTree>,
    pub lock_trees: Vec<SkipTree>,
}

impl CausalityIndex {
    pub fn new(n_threads: usize, n_mutexes: usize, step: u32) -> Self {
        CausalityIndex {
            step,
            thread_trees: (0..n_threads).map(|_| SkipTree::new(step)).collect(),
            lock_trees: (0..n_mutexes).map(|_| SkipTree::new(step)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(step: u32, len: u32) -> SkipTree {
        let mut t = SkipTree::new(step);
        let mut parent = ROOT;
        for i in 0..len {
            parent = t.add(i + 1, parent);
        }
        t
    }

    #[test]
    fn skip_links_match_trailing_zeros_base_two() {
        let t = chain(2, 16);
        // Depth 12 stores links to depths 10 and 8 (12 = 0b1100).
        let n12 = (1..t.len() as u32).find(|&i| t.depth(i) == 12).unwrap();
        let targets: Vec<u32> = t.node(n12).skips.iter().map(|&s| t.depth(s)).collect();
        assert_eq!(targets, vec![10, 8]);
        // Depth 4 stores 2 links, to depths 2 and 0.
        let n4 = (1..t.len() as u32).find(|&i| t.depth(i) == 4).unwrap();
        let targets: Vec<u32> = t.node(n4).skips.iter().map(|&s| t.depth(s)).collect();
        assert_eq!(targets, vec![2, 0]);
    }

    #[test]
    fn ancestor_at_depth_walks_to_the_right_node() {
        let t = chain(4, 100);
        for g in [0u32, 1, 17, 63, 99, 100] {
            let start = 100u32; // deepest node id in a pure chain
            if g <= t.depth(start) {
                let (n, _) = t.ancestor_at_depth(start, g);
                assert_eq!(t.depth(n), g);
            }
        }
        // Zero-distance query returns the node itself.
        assert_eq!(t.ancestor_at_depth(37, t.depth(37)).0, 37);
    }

    #[test]
    fn is_ancestor_on_branches() {
        let mut t = SkipTree::new(2);
        let a = t.add(1, ROOT);
        let b = t.add(2, a);
        let c = t.add(3, a); // sibling of b
        assert!(t.is_ancestor(a, b));
        assert!(t.is_ancestor(a, c));
        assert!(!t.is_ancestor(b, c));
        assert!(!t.is_ancestor(c, b));
        assert!(t.is_ancestor(b, b));
        assert!(t.is_ancestor(ROOT, c));
    }
}
