//! Perfect-tree index arithmetic.
//!
//! Nodes of a perfect binary tree of depth `D` are heap-indexed `1..2^(D+1)`:
//! the children of node `n` are `2n` and `2n+1`, branch nodes are the ids
//! below `2^D` and leaves the ids from `2^D` up. A depth-0 tree is a single
//! leaf (node 1) with no branch nodes.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeTopology {
    depth: u32,
}

impl TreeTopology {
    pub fn new(depth: u32) -> Self {
        assert!(depth <= 20, "tree depth {depth} is unreasonably large");
        TreeTopology { depth }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn root(&self) -> usize {
        1
    }

    /// Total node count, `2^(D+1) - 1`.
    pub fn node_count(&self) -> usize {
        (1 << (self.depth + 1)) - 1
    }

    /// Branch node ids, `1..2^D` (empty for depth 0).
    pub fn branch_nodes(&self) -> std::ops::Range<usize> {
        1..(1 << self.depth)
    }

    /// Leaf node ids, `2^D..2^(D+1)`.
    pub fn leaves(&self) -> std::ops::Range<usize> {
        (1 << self.depth)..(1 << (self.depth + 1))
    }

    pub fn is_leaf(&self, n: usize) -> bool {
        n >= (1 << self.depth)
    }

    pub fn branch_count(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn leaf_count(&self) -> usize {
        1 << self.depth
    }

    /// Parent of `n`; the root has no parent.
    pub fn parent(&self, n: usize) -> Option<usize> {
        if n <= 1 {
            None
        } else {
            Some(n / 2)
        }
    }

    /// Path from the root to `n`, inclusive of both ends.
    pub fn path(&self, n: usize) -> Vec<usize> {
        let mut p = Vec::new();
        let mut cur = n;
        while cur >= 1 {
            p.push(cur);
            if cur == 1 {
                break;
            }
            cur /= 2;
        }
        p.reverse();
        p
    }

    /// Ancestors of leaf `n` whose left child lies on the path to `n`.
    pub fn left_ancestors(&self, n: usize) -> Vec<usize> {
        self.turn_ancestors(n, false)
    }

    /// Ancestors of leaf `n` whose right child lies on the path to `n`.
    pub fn right_ancestors(&self, n: usize) -> Vec<usize> {
        self.turn_ancestors(n, true)
    }

    fn turn_ancestors(&self, n: usize, right: bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = n;
        while cur > 1 {
            let parent = cur / 2;
            let is_right_child = cur % 2 == 1;
            if is_right_child == right {
                out.push(parent);
            }
            cur = parent;
        }
        out.reverse();
        out
    }

    /// Leaves of the subtree rooted at the left child of `n`.
    pub fn left_subtree_leaves(&self, n: usize) -> Vec<usize> {
        self.subtree_leaves(2 * n)
    }

    /// Leaves of the subtree rooted at the right child of `n`.
    pub fn right_subtree_leaves(&self, n: usize) -> Vec<usize> {
        self.subtree_leaves(2 * n + 1)
    }

    /// Leaves of the subtree rooted at `n` (which is `n` itself when a leaf).
    pub fn subtree_leaves(&self, n: usize) -> Vec<usize> {
        let first_leaf = 1usize << self.depth;
        let mut lo = n;
        let mut hi = n;
        while lo < first_leaf {
            lo *= 2;
            hi = hi * 2 + 1;
        }
        (lo..=hi).collect()
    }

    /// Leaves reachable when routing respects which branch nodes split:
    /// a splitting node passes points to both children, a non-splitting one
    /// passes everything to its right child.
    pub fn reachable_leaves(&self, splits: impl Fn(usize) -> bool) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root()];
        while let Some(n) = stack.pop() {
            if self.is_leaf(n) {
                out.push(n);
            } else if splits(n) {
                stack.push(2 * n);
                stack.push(2 * n + 1);
            } else {
                stack.push(2 * n + 1);
            }
        }
        out.sort_unstable();
        out
    }
}
