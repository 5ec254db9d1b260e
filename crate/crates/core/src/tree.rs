//! Concrete rooted trees.
//!
//! A [`PolyaTree`] stores nodes in preorder as a parent array. The tree is a
//! representative of its isomorphism class; [`PolyaTree::canonical_code`]
//! identifies the class.

use std::fmt;

use crate::error::{usage, Result};

/// Parent of the root.
pub const ROOT_PARENT: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PolyaTree {
    parent: Vec<u32>,
    children: Vec<u32>,
}

impl PolyaTree {
    pub fn single() -> Self {
        Self { parent: vec![ROOT_PARENT], children: vec![0] }
    }

    /// Builds a tree from a preorder parent array (`parent[0]` is [`ROOT_PARENT`]).
    pub fn from_parents(parent: Vec<u32>) -> Result<Self> {
        if parent.is_empty() || parent[0] != ROOT_PARENT {
            return usage("parent array must start with the root");
        }
        let mut children = vec![0u32; parent.len()];
        for (v, &p) in parent.iter().enumerate().skip(1) {
            if p as usize >= v {
                return usage(format!("node {v} has parent {p}, not an earlier node"));
            }
            children[p as usize] += 1;
        }
        Ok(Self { parent, children })
    }

    /// Parses the nested-parenthesis code produced by [`PolyaTree::canonical_code`].
    pub fn from_code(code: &str) -> Result<Self> {
        let mut parent = Vec::new();
        let mut stack: Vec<u32> = Vec::new();
        for ch in code.chars() {
            match ch {
                '(' => {
                    let p = stack.last().copied().unwrap_or(ROOT_PARENT);
                    if p == ROOT_PARENT && !parent.is_empty() {
                        return usage("code describes more than one tree");
                    }
                    stack.push(parent.len() as u32);
                    parent.push(p);
                }
                ')' => {
                    if stack.pop().is_none() {
                        return usage("unbalanced tree code");
                    }
                }
                _ => return usage(format!("unexpected character {ch:?} in tree code")),
            }
        }
        if !stack.is_empty() {
            return usage("unbalanced tree code");
        }
        Self::from_parents(parent)
    }

    pub(crate) fn from_parts_unchecked(parent: Vec<u32>, children: Vec<u32>) -> Self {
        debug_assert_eq!(parent.len(), children.len());
        Self { parent, children }
    }

    pub fn size(&self) -> usize {
        self.parent.len()
    }

    pub fn parents(&self) -> &[u32] {
        &self.parent
    }

    pub fn child_count(&self, v: usize) -> usize {
        self.children[v] as usize
    }

    /// Planted degree: one more than the number of children.
    pub fn degree(&self, v: usize) -> usize {
        self.children[v] as usize + 1
    }

    /// Distance from the root, per node.
    pub fn depths(&self) -> Vec<u32> {
        let mut depth = vec![0u32; self.size()];
        for v in 1..self.size() {
            depth[v] = depth[self.parent[v] as usize] + 1;
        }
        depth
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0) as usize
    }

    /// Children of every node, in preorder.
    fn child_lists(&self) -> Vec<Vec<u32>> {
        let mut lists: Vec<Vec<u32>> = self.children.iter().map(|&c| Vec::with_capacity(c as usize)).collect();
        for v in 1..self.size() {
            lists[self.parent[v] as usize].push(v as u32);
        }
        lists
    }

    /// Isomorphism invariant: `(` + sorted child codes + `)`.
    pub fn canonical_code(&self) -> String {
        let lists = self.child_lists();
        let mut codes: Vec<String> = vec![String::new(); self.size()];
        for v in (0..self.size()).rev() {
            let mut parts: Vec<String> = lists[v].iter().map(|&c| std::mem::take(&mut codes[c as usize])).collect();
            parts.sort_unstable_by(|a, b| b.cmp(a));
            let mut code = String::with_capacity(2 + parts.iter().map(String::len).sum::<usize>());
            code.push('(');
            for p in parts {
                code.push_str(&p);
            }
            code.push(')');
            codes[v] = code;
        }
        std::mem::take(&mut codes[0])
    }

    /// The same tree re-laid out in canonical preorder.
    pub fn canonical(&self) -> Self {
        Self::from_code(&self.canonical_code()).expect("canonical codes parse")
    }
}

impl fmt::Display for PolyaTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical_code())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_of_three() {
        let t = PolyaTree::from_parents(vec![ROOT_PARENT, 0, 1]).unwrap();
        assert_eq!(t.depths(), vec![0, 1, 2]);
        assert_eq!((t.degree(0), t.degree(1), t.degree(2)), (2, 2, 1));
        assert_eq!(t.canonical_code(), "((()))");
        assert_eq!(t.height(), 2);
    }

    #[test]
    fn code_ignores_child_order() {
        // root with a leaf and a cherry, in both orders
        let a = PolyaTree::from_parents(vec![ROOT_PARENT, 0, 0, 2, 2]).unwrap();
        let b = PolyaTree::from_parents(vec![ROOT_PARENT, 0, 1, 1, 0]).unwrap();
        assert_eq!(a.canonical_code(), b.canonical_code());
        assert_eq!(PolyaTree::from_code(&a.canonical_code()).unwrap().canonical_code(), a.canonical_code());
    }

    #[test]
    fn malformed_input() {
        assert!(PolyaTree::from_parents(vec![]).is_err());
        assert!(PolyaTree::from_parents(vec![ROOT_PARENT, 2, 0]).is_err());
        assert!(PolyaTree::from_code("(()").is_err());
        assert!(PolyaTree::from_code("()()").is_err());
        assert!(PolyaTree::from_code("(x)").is_err());
    }
}
