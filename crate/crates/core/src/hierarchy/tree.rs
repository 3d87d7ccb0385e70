use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::HierarchyError;
use crate::matrix::{CandidateMatrix, Matrix};

const VALUE_EQ: f64 = 1e-12;

/// A node of a hierarchical tree. `indices` are the variables directly under
/// this node (0-based); `children` are nested nodes. `value` is `ρ_v`.
#[derive(Clone, Debug, PartialEq)]
pub struct HierNode {
    pub value: f64,
    pub indices: Vec<usize>,
    pub children: Vec<HierNode>,
}

impl HierNode {
    pub fn new(value: f64, indices: Vec<usize>, children: Vec<HierNode>) -> Self {
        Self { value, indices, children }
    }

    /// All variables below this node.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = self.indices.clone();
        for c in &self.children {
            out.extend(c.leaves());
        }
        out
    }

    fn min_leaf(&self) -> usize {
        self.leaves().into_iter().min().unwrap_or(usize::MAX)
    }

    fn canonicalize(&mut self) {
        self.indices.sort_unstable();
        for c in &mut self.children {
            c.canonicalize();
        }
        self.children.sort_by_key(HierNode::min_leaf);
    }

    fn preorder<'a>(&'a self, out: &mut Vec<&'a HierNode>) {
        out.push(self);
        for c in &self.children {
            c.preorder(out);
        }
    }
}

/// A rooted tree whose leaves partition the variables `0..d`. The matrix of
/// the tree has, for `i ≠ j`, the value of the lowest node above both.
#[derive(Clone, Debug, PartialEq)]
pub struct HierTree {
    root: HierNode,
    d: usize,
}

impl HierTree {
    /// Validates that the leaves partition `0..d`, that values lie in
    /// `[−1, 1]` and that every node has at least two items; the tree is
    /// stored in canonical order.
    pub fn new(root: HierNode) -> Result<Self, HierarchyError> {
        fn check(n: &HierNode) -> Result<(), HierarchyError> {
            if !(-1.0..=1.0).contains(&n.value) {
                return Err(HierarchyError::InvalidTree(format!("node value {} outside [-1, 1]", n.value)));
            }
            if n.indices.len() + n.children.len() < 2 {
                return Err(HierarchyError::InvalidTree("every node needs at least two members".into()));
            }
            n.children.iter().try_for_each(check)
        }
        check(&root)?;
        let mut leaves = root.leaves();
        let d = leaves.len();
        leaves.sort_unstable();
        if leaves.iter().enumerate().any(|(i, &l)| i != l) {
            return Err(HierarchyError::InvalidTree(format!("leaves must be exactly 1..{d}, each appearing once")));
        }
        let mut root = root;
        root.canonicalize();
        Ok(Self { root, d })
    }

    pub fn root(&self) -> &HierNode {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Nodes in preorder; positions in this list are node ids.
    pub fn nodes(&self) -> Vec<&HierNode> {
        let mut out = Vec::new();
        self.root.preorder(&mut out);
        out
    }

    /// Parent id of each node in preorder (`None` for the root).
    pub fn parents(&self) -> Vec<Option<usize>> {
        fn walk(n: &HierNode, parent: Option<usize>, out: &mut Vec<Option<usize>>) {
            let id = out.len();
            out.push(parent);
            for c in &n.children {
                walk(c, Some(id), out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, None, &mut out);
        out
    }

    /// Every node value is nonnegative and no larger than any child's value.
    pub fn is_proper(&self) -> bool {
        fn ok(n: &HierNode) -> bool {
            n.value >= 0.0 && n.children.iter().all(|c| c.value >= n.value && ok(c))
        }
        ok(&self.root)
    }

    /// The hierarchical matrix of the tree.
    pub fn to_matrix(&self) -> CandidateMatrix {
        fn fill(n: &HierNode, m: &mut Matrix) {
            let mut groups: Vec<Vec<usize>> = n.indices.iter().map(|&i| vec![i]).collect();
            groups.extend(n.children.iter().map(HierNode::leaves));
            for (a, ga) in groups.iter().enumerate() {
                for gb in &groups[a + 1..] {
                    for &i in ga {
                        for &j in gb {
                            m[(i, j)] = n.value;
                            m[(j, i)] = n.value;
                        }
                    }
                }
            }
            for c in &n.children {
                fill(c, m);
            }
        }
        let mut m = Matrix::identity(self.d);
        fill(&self.root, &mut m);
        CandidateMatrix::validate(&m, 0.0).expect("tree values lie in [-1, 1]")
    }

    /// Nested text form with 1-based indices, e.g. `((1,2);0.5,3);0.1`.
    pub fn to_text(&self) -> String {
        fn write(n: &HierNode, s: &mut String) {
            s.push('(');
            let mut first = true;
            // items in order of their smallest variable
            let mut items: Vec<(usize, Option<&HierNode>)> = n.indices.iter().map(|&i| (i, None)).collect();
            items.extend(n.children.iter().map(|c| (c.min_leaf(), Some(c))));
            items.sort_by_key(|&(k, _)| k);
            for (i, c) in items {
                if !first {
                    s.push(',');
                }
                first = false;
                match c {
                    None => {
                        let _ = write!(s, "{}", i + 1);
                    }
                    Some(c) => write(c, s),
                }
            }
            let _ = write!(s, ");{}", n.value);
        }
        let mut s = String::new();
        write(&self.root, &mut s);
        s
    }

    /// Indented form: one node per line as `value[: i j k]`, children
    /// indented two spaces deeper than their parent.
    pub fn to_indented(&self) -> String {
        fn write(n: &HierNode, depth: usize, s: &mut String) {
            let _ = write!(s, "{:width$}{}", "", n.value, width = 2 * depth);
            if !n.indices.is_empty() {
                s.push(':');
                for i in &n.indices {
                    let _ = write!(s, " {}", i + 1);
                }
            }
            s.push('\n');
            for c in &n.children {
                write(c, depth + 1, s);
            }
        }
        let mut s = String::new();
        write(&self.root, 0, &mut s);
        s
    }
}

impl fmt::Display for HierTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for HierTree {
    type Err = HierarchyError;

    /// Accepts the nested form or, when the first non-blank character is not
    /// `(`, the indented form.
    fn from_str(text: &str) -> Result<Self, HierarchyError> {
        let trimmed = text.trim_start();
        let root = if trimmed.starts_with('(') { parse_nested(text)? } else { parse_indented(text)? };
        Self::new(root)
    }
}

enum Item {
    Index(usize),
    Node(Option<f64>, Vec<Item>),
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> HierarchyError {
        HierarchyError::Parse(format!("{msg} at offset {}", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn token(&mut self, pred: impl Fn(u8) -> bool) -> &str {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && pred(self.s[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.s[start..self.pos]).unwrap_or("")
    }

    fn item(&mut self) -> Result<Item, HierarchyError> {
        if self.peek() == Some(b'(') {
            self.node()
        } else {
            let tok = self.token(|c| c.is_ascii_digit());
            let i: usize = tok.parse().map_err(|_| self.err("expected an index or `(`"))?;
            if i == 0 {
                return Err(self.err("indices are 1-based"));
            }
            Ok(Item::Index(i - 1))
        }
    }

    fn node(&mut self) -> Result<Item, HierarchyError> {
        self.pos += 1; // '('
        let mut items = vec![self.item()?];
        loop {
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                    items.push(self.item()?);
                }
                Some(b')') => {
                    self.pos += 1;
                    break;
                }
                _ => return Err(self.err("expected `,` or `)`")),
            }
        }
        let value = if self.peek() == Some(b';') {
            self.pos += 1;
            let tok = self.token(|c| c.is_ascii_digit() || matches!(c, b'.' | b'-' | b'+' | b'e' | b'E'));
            Some(tok.parse::<f64>().map_err(|_| self.err("expected a number after `;`"))?)
        } else {
            None
        };
        Ok(Item::Node(value, items))
    }
}

/// Turns parsed items into a node: a single index node collapses into its
/// parent, and a valueless node that is the only item of its parent is
/// merged into it.
fn build(value: Option<f64>, items: Vec<Item>) -> Result<HierNode, HierarchyError> {
    let items = match (items.len(), items.first()) {
        (1, Some(Item::Node(None, _))) => match items.into_iter().next() {
            Some(Item::Node(None, inner)) => inner,
            _ => unreachable!(),
        },
        _ => items,
    };
    let mut node = HierNode::new(f64::NAN, Vec::new(), Vec::new());
    for it in items {
        match it {
            Item::Index(i) => node.indices.push(i),
            Item::Node(v, inner) => {
                let child = build(v, inner)?;
                if child.children.is_empty() && child.indices.len() == 1 {
                    node.indices.push(child.indices[0]);
                } else {
                    node.children.push(child);
                }
            }
        }
    }
    let single = node.children.is_empty() && node.indices.len() == 1;
    node.value = match value {
        Some(v) => v,
        None if single => 0.0,
        None => return Err(HierarchyError::Parse("every node with two or more members needs `;value`".into())),
    };
    Ok(node)
}

fn parse_nested(text: &str) -> Result<HierNode, HierarchyError> {
    let mut p = Parser { s: text.as_bytes(), pos: 0 };
    if p.peek() != Some(b'(') {
        return Err(p.err("expected `(`"));
    }
    let Item::Node(v, items) = p.node()? else { unreachable!() };
    if p.peek().is_some() {
        return Err(p.err("trailing input"));
    }
    build(v, items)
}

fn parse_indented(text: &str) -> Result<HierNode, HierarchyError> {
    // (indent, node) stack; children attach to the nearest shallower line
    let mut stack: Vec<(usize, HierNode)> = Vec::new();
    let mut root: Option<HierNode> = None;
    let pop_into_parent = |stack: &mut Vec<(usize, HierNode)>, root: &mut Option<HierNode>| {
        let (_, node) = stack.pop().expect("nonempty stack");
        match stack.last_mut() {
            Some((_, parent)) => parent.children.push(node),
            None => *root = Some(node),
        }
    };
    for (n, line) in text.lines().enumerate() {
        let body = line.trim_end();
        if body.trim().is_empty() || body.trim_start().starts_with('#') {
            continue;
        }
        let err = |m: String| HierarchyError::Parse(format!("line {}: {m}", n + 1));
        let indent = body.len() - body.trim_start().len();
        let (value, idx) = match body.trim().split_once(':') {
            Some((v, rest)) => (v.trim(), rest),
            None => (body.trim(), ""),
        };
        let value: f64 = value.parse().map_err(|_| err(format!("expected a value, found {value:?}")))?;
        let indices = idx
            .split([' ', ',', '\t'])
            .filter(|t| !t.is_empty())
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(err(format!("bad index {t:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        while stack.last().is_some_and(|(d, _)| *d >= indent) {
            pop_into_parent(&mut stack, &mut root);
        }
        if stack.is_empty() && root.is_some() {
            return Err(err("more than one root".into()));
        }
        stack.push((indent, HierNode::new(value, indices, Vec::new())));
    }
    while !stack.is_empty() {
        pop_into_parent(&mut stack, &mut root);
    }
    root.ok_or_else(|| HierarchyError::Parse("empty tree".into()))
}

/// Recovers the tree of a hierarchical matrix: at each index set, the value
/// shared by all pairs across the components of the "differs from r" graph.
pub fn matrix_to_tree(m: &CandidateMatrix) -> Result<HierTree, HierarchyError> {
    let d = m.dim();
    if d < 2 {
        return Err(HierarchyError::NotHierarchical("need at least two variables".into()));
    }
    let all: Vec<usize> = (0..d).collect();
    HierTree::new(split(m, &all)?)
}

fn components(set: &[usize], linked: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut label = vec![usize::MAX; set.len()];
    let mut out = Vec::new();
    for start in 0..set.len() {
        if label[start] != usize::MAX {
            continue;
        }
        let c = out.len();
        label[start] = c;
        let mut stack = vec![start];
        let mut comp = Vec::new();
        while let Some(a) = stack.pop() {
            comp.push(set[a]);
            for b in 0..set.len() {
                if label[b] == usize::MAX && linked(set[a], set[b]) {
                    label[b] = c;
                    stack.push(b);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn split(m: &CandidateMatrix, set: &[usize]) -> Result<HierNode, HierarchyError> {
    let mut values: Vec<f64> = Vec::new();
    for (a, &i) in set.iter().enumerate() {
        for &j in &set[a + 1..] {
            let v = m.get(i, j);
            if !values.iter().any(|&u| (u - v).abs() <= VALUE_EQ) {
                values.push(v);
            }
        }
    }
    for r in values {
        let comps = components(set, |i, j| (m.get(i, j) - r).abs() > VALUE_EQ);
        if comps.len() < 2 {
            continue;
        }
        let mut node = HierNode::new(r, Vec::new(), Vec::new());
        for c in comps {
            if c.len() == 1 {
                node.indices.push(c[0]);
            } else {
                node.children.push(split(m, &c)?);
            }
        }
        return Ok(node);
    }
    let shown: Vec<usize> = set.iter().map(|i| i + 1).collect();
    Err(HierarchyError::NotHierarchical(format!("variables {shown:?} admit no common splitting value")))
}
