//! Threshold access trees, their text form, and per-level partitioning.
//!
//! Grammar (keywords are case-insensitive):
//!
//! ```text
//! expr   := attr | "(" inner ")"
//! inner  := expr                                  grouping
//!         | expr ("AND" expr)+                    n of n
//!         | expr ("OR" expr)+                     1 of n
//!         | NUM "of" "(" expr ("," expr)* ")"     k of n
//! attr   := [A-Za-z0-9_:-]+
//! ```

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand_core::{CryptoRng, RngCore};

use crate::algebra::Scalar;

/// Stable identifier of a node: its preorder position in the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyError {
    Syntax { position: usize, message: &'static str },
    ThresholdOutOfRange { position: usize, threshold: usize, children: usize },
    /// Lagrange index is not part of the evaluation set.
    IndexNotInSet { index: u32 },
    /// Evaluation set contains zero or a repeated index.
    DegenerateIndexSet,
}

impl fmt::Display for PolicyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyError::Syntax { position, message } => {
                write!(f, "policy syntax error at byte {position}: {message}")
            }
            PolicyError::ThresholdOutOfRange {
                position,
                threshold,
                children,
            } => write!(
                f,
                "threshold {threshold} out of range for {children} children at byte {position}"
            ),
            PolicyError::IndexNotInSet { index } => {
                write!(f, "index {index} is not in the interpolation set")
            }
            PolicyError::DegenerateIndexSet => write!(f, "interpolation set has zero or repeated indices"),
        }
    }
}

impl core::error::Error for PolicyError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NodeKind {
    Leaf { attribute: String },
    Gate { threshold: usize, children: Vec<AccessNode> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessNode {
    pub id: NodeId,
    /// 1-based position among siblings; 1 for the root.
    pub index: u32,
    /// Level in the tree, root = 1.
    pub depth: u32,
    pub kind: NodeKind,
}

impl AccessNode {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    pub fn attribute(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Leaf { attribute } => Some(attribute),
            NodeKind::Gate { .. } => None,
        }
    }

    pub fn children(&self) -> &[AccessNode] {
        match &self.kind {
            NodeKind::Leaf { .. } => &[],
            NodeKind::Gate { children, .. } => children,
        }
    }
}

/// An access tree whose root is always a gate.
///
/// A policy that is a bare attribute becomes a (1 of 1) root gate whose only
/// leaf sits inline on level 1, so the tree has a single level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTree {
    root: AccessNode,
    depth: u32,
}

/// Unnumbered tree used while parsing and by builders.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyExpr {
    Attr(String),
    Threshold(usize, Vec<PolicyExpr>),
}

impl PolicyExpr {
    pub fn attr(name: impl Into<String>) -> Self {
        PolicyExpr::Attr(name.into())
    }

    pub fn and(children: Vec<PolicyExpr>) -> Self {
        PolicyExpr::Threshold(children.len(), children)
    }

    pub fn or(children: Vec<PolicyExpr>) -> Self {
        PolicyExpr::Threshold(1, children)
    }
}

impl AccessTree {
    /// Numbers nodes in preorder and assigns levels.
    pub fn from_expr(expr: &PolicyExpr) -> Result<Self, PolicyError> {
        let mut next = 0u32;
        let root = match expr {
            PolicyExpr::Attr(a) => {
                check_attribute(a)?;
                let root_id = NodeId(0);
                let leaf = AccessNode {
                    id: NodeId(1),
                    index: 1,
                    depth: 1,
                    kind: NodeKind::Leaf { attribute: a.clone() },
                };
                AccessNode {
                    id: root_id,
                    index: 1,
                    depth: 1,
                    kind: NodeKind::Gate {
                        threshold: 1,
                        children: alloc::vec![leaf],
                    },
                }
            }
            PolicyExpr::Threshold(..) => number(expr, 1, 1, &mut next)?,
        };
        let depth = max_depth(&root);
        Ok(AccessTree { root, depth })
    }

    pub fn root(&self) -> &AccessNode {
        &self.root
    }

    /// Number of levels, which is also the number of ciphertext blocks.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// True for the single-attribute form with its leaf inline on level 1.
    pub fn is_inline_leaf(&self) -> bool {
        matches!(self.root.children(), [c] if c.depth == 1)
    }

    /// All nodes in preorder.
    pub fn nodes(&self) -> Vec<&AccessNode> {
        let mut out = Vec::new();
        let mut stack = alloc::vec![&self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            for c in n.children().iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    pub fn node(&self, id: NodeId) -> Option<&AccessNode> {
        self.nodes().into_iter().find(|n| n.id == id)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes().iter().filter(|n| n.is_leaf()).count()
    }

    pub fn to_expr(&self) -> PolicyExpr {
        if self.is_inline_leaf() {
            return to_expr(&self.root.children()[0]);
        }
        to_expr(&self.root)
    }
}

fn check_attribute(a: &str) -> Result<(), PolicyError> {
    if a.is_empty() || !a.bytes().all(is_attr_byte) {
        return Err(PolicyError::Syntax {
            position: 0,
            message: "attribute must match [A-Za-z0-9_:-]+",
        });
    }
    if is_keyword(a) {
        return Err(PolicyError::Syntax {
            position: 0,
            message: "keyword used as attribute",
        });
    }
    Ok(())
}

fn number(expr: &PolicyExpr, depth: u32, index: u32, next: &mut u32) -> Result<AccessNode, PolicyError> {
    let id = NodeId(*next);
    *next += 1;
    let kind = match expr {
        PolicyExpr::Attr(a) => {
            check_attribute(a)?;
            NodeKind::Leaf { attribute: a.clone() }
        }
        PolicyExpr::Threshold(k, children) => {
            if *k < 1 || *k > children.len() {
                return Err(PolicyError::ThresholdOutOfRange {
                    position: 0,
                    threshold: *k,
                    children: children.len(),
                });
            }
            let children = children
                .iter()
                .enumerate()
                .map(|(i, c)| number(c, depth + 1, i as u32 + 1, next))
                .collect::<Result<Vec<_>, _>>()?;
            NodeKind::Gate {
                threshold: *k,
                children,
            }
        }
    };
    Ok(AccessNode { id, index, depth, kind })
}

fn max_depth(node: &AccessNode) -> u32 {
    node.children()
        .iter()
        .map(max_depth)
        .max()
        .unwrap_or(0)
        .max(node.depth)
}

fn to_expr(node: &AccessNode) -> PolicyExpr {
    match &node.kind {
        NodeKind::Leaf { attribute } => PolicyExpr::Attr(attribute.clone()),
        NodeKind::Gate { threshold, children } => {
            PolicyExpr::Threshold(*threshold, children.iter().map(to_expr).collect())
        }
    }
}

impl fmt::Display for PolicyExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyExpr::Attr(a) => f.write_str(a),
            PolicyExpr::Threshold(k, children) => {
                let n = children.len();
                let joiner = if n >= 2 && *k == n {
                    Some(" AND ")
                } else if n >= 2 && *k == 1 {
                    Some(" OR ")
                } else {
                    None
                };
                match joiner {
                    Some(j) => {
                        f.write_str("(")?;
                        for (i, c) in children.iter().enumerate() {
                            if i > 0 {
                                f.write_str(j)?;
                            }
                            write!(f, "{c}")?;
                        }
                        f.write_str(")")
                    }
                    None => {
                        write!(f, "({k} of (")?;
                        for (i, c) in children.iter().enumerate() {
                            if i > 0 {
                                f.write_str(", ")?;
                            }
                            write!(f, "{c}")?;
                        }
                        f.write_str("))")
                    }
                }
            }
        }
    }
}

impl fmt::Display for AccessTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expr())
    }
}

fn is_attr_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'_' | b':' | b'-')
}

fn is_keyword(w: &str) -> bool {
    ["and", "or", "of"].iter().any(|k| w.eq_ignore_ascii_case(k))
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'a> {
    Open,
    Close,
    Comma,
    Word(&'a str),
}

struct Parser<'a> {
    tokens: Vec<(usize, Token<'a>)>,
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, PolicyError> {
        let bytes = text.as_bytes();
        let mut tokens = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            let b = bytes[i];
            match b {
                b'(' => tokens.push((i, Token::Open)),
                b')' => tokens.push((i, Token::Close)),
                b',' => tokens.push((i, Token::Comma)),
                b if b.is_ascii_whitespace() => {}
                b if is_attr_byte(b) => {
                    let start = i;
                    while i + 1 < bytes.len() && is_attr_byte(bytes[i + 1]) {
                        i += 1;
                    }
                    tokens.push((start, Token::Word(&text[start..=i])));
                }
                _ => {
                    return Err(PolicyError::Syntax {
                        position: i,
                        message: "unexpected character",
                    })
                }
            }
            i += 1;
        }
        Ok(Parser {
            tokens,
            pos: 0,
            end: text.len(),
        })
    }

    fn peek(&self) -> Option<&Token<'a>> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn peek_at(&self, ahead: usize) -> Option<&Token<'a>> {
        self.tokens.get(self.pos + ahead).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn err(&self, message: &'static str) -> PolicyError {
        PolicyError::Syntax {
            position: self.offset(),
            message,
        }
    }

    fn expect(&mut self, want: Token<'static>, message: &'static str) -> Result<(), PolicyError> {
        if self.peek() == Some(&want) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(message))
        }
    }

    fn expr(&mut self) -> Result<PolicyExpr, PolicyError> {
        match self.peek() {
            Some(Token::Word(w)) => {
                if is_keyword(w) {
                    return Err(self.err("keyword where attribute expected"));
                }
                let w = w.to_string();
                self.pos += 1;
                Ok(PolicyExpr::Attr(w))
            }
            Some(Token::Open) => {
                self.pos += 1;
                let inner = self.inner()?;
                self.expect(Token::Close, "expected ')'")?;
                Ok(inner)
            }
            Some(_) => Err(self.err("expected attribute or '('")),
            None => Err(self.err("unexpected end of policy")),
        }
    }

    fn inner(&mut self) -> Result<PolicyExpr, PolicyError> {
        if let (Some(Token::Word(num)), Some(Token::Word(of))) = (self.peek(), self.peek_at(1)) {
            if of.eq_ignore_ascii_case("of") {
                let at = self.offset();
                let k: usize = num
                    .parse()
                    .map_err(|_| self.err("threshold must be a decimal integer"))?;
                self.pos += 2;
                self.expect(Token::Open, "expected '(' after 'of'")?;
                let mut children = alloc::vec![self.expr()?];
                while self.peek() == Some(&Token::Comma) {
                    self.pos += 1;
                    children.push(self.expr()?);
                }
                self.expect(Token::Close, "expected ',' or ')'")?;
                if k < 1 || k > children.len() {
                    return Err(PolicyError::ThresholdOutOfRange {
                        position: at,
                        threshold: k,
                        children: children.len(),
                    });
                }
                return Ok(PolicyExpr::Threshold(k, children));
            }
        }
        let first = self.expr()?;
        let op = match self.peek() {
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("and") => "and",
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("or") => "or",
            _ => return Ok(first),
        };
        let mut children = alloc::vec![first];
        while let Some(Token::Word(w)) = self.peek() {
            if !w.eq_ignore_ascii_case(op) {
                if is_keyword(w) {
                    return Err(self.err("mixed AND/OR needs parentheses"));
                }
                return Err(self.err("expected operator"));
            }
            self.pos += 1;
            children.push(self.expr()?);
        }
        Ok(if op == "and" {
            PolicyExpr::and(children)
        } else {
            PolicyExpr::or(children)
        })
    }
}

pub fn parse_expr(text: &str) -> Result<PolicyExpr, PolicyError> {
    let mut p = Parser::new(text)?;
    let expr = p.expr()?;
    if p.pos != p.tokens.len() {
        return Err(p.err("trailing input"));
    }
    Ok(expr)
}

pub fn parse_policy(text: &str) -> Result<AccessTree, PolicyError> {
    AccessTree::from_expr(&parse_expr(text)?)
}

/// A set of attribute strings held by a key.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AttributeSet(BTreeSet<String>);

impl AttributeSet {
    pub fn new<I, S>(attrs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AttributeSet(attrs.into_iter().map(Into::into).collect())
    }

    /// Parses a comma-separated list, ignoring blanks.
    pub fn parse_list(text: &str) -> Self {
        Self::new(text.split(',').map(str::trim).filter(|s| !s.is_empty()))
    }

    pub fn contains(&self, attr: &str) -> bool {
        self.0.contains(attr)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl<S: Into<String>> FromIterator<S> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self::new(iter)
    }
}

pub fn satisfies(tree: &AccessTree, attrs: &AttributeSet) -> bool {
    fn eval(node: &AccessNode, attrs: &AttributeSet) -> bool {
        match &node.kind {
            NodeKind::Leaf { attribute } => attrs.contains(attribute),
            NodeKind::Gate { threshold, children } => {
                children.iter().filter(|c| eval(c, attrs)).count() >= *threshold
            }
        }
    }
    eval(&tree.root, attrs)
}

/// Public description of one node inside a level slice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DescriptorEntry {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub index: u32,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EntryKind {
    Leaf { attribute: String },
    /// Children in sibling-index order; child `c` has index `position + 1`.
    Gate { threshold: u32, children: Vec<NodeId> },
}

/// All nodes of one level. Doubles as the level descriptor shipped in the
/// ciphertext block for that level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSlice {
    pub level: u32,
    pub entries: Vec<DescriptorEntry>,
}

impl LevelSlice {
    pub fn gates(&self) -> impl Iterator<Item = &DescriptorEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Gate { .. }))
    }

    pub fn leaves(&self) -> impl Iterator<Item = &DescriptorEntry> {
        self.entries
            .iter()
            .filter(|e| matches!(e.kind, EntryKind::Leaf { .. }))
    }

    pub fn entry(&self, id: NodeId) -> Option<&DescriptorEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelPartition {
    pub levels: Vec<LevelSlice>,
}

impl LevelPartition {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Reassembles the tree from the slices. Fails if the slices are not a
    /// well-formed partition of a tree.
    pub fn reassemble(&self) -> Option<AccessTree> {
        let mut by_id: BTreeMap<NodeId, &DescriptorEntry> = BTreeMap::new();
        let mut depth_of: BTreeMap<NodeId, u32> = BTreeMap::new();
        for slice in &self.levels {
            for e in &slice.entries {
                if by_id.insert(e.id, e).is_some() {
                    return None;
                }
                depth_of.insert(e.id, slice.level);
            }
        }
        let root = self.levels.first()?.entries.iter().find(|e| e.parent.is_none())?;
        fn build(
            e: &DescriptorEntry,
            by_id: &BTreeMap<NodeId, &DescriptorEntry>,
            depth_of: &BTreeMap<NodeId, u32>,
            used: &mut usize,
        ) -> Option<AccessNode> {
            *used += 1;
            let kind = match &e.kind {
                EntryKind::Leaf { attribute } => NodeKind::Leaf {
                    attribute: attribute.clone(),
                },
                EntryKind::Gate { threshold, children } => {
                    let mut built = Vec::with_capacity(children.len());
                    for (pos, cid) in children.iter().enumerate() {
                        let c = by_id.get(cid)?;
                        if c.parent != Some(e.id) || c.index != pos as u32 + 1 {
                            return None;
                        }
                        built.push(build(c, by_id, depth_of, used)?);
                    }
                    NodeKind::Gate {
                        threshold: *threshold as usize,
                        children: built,
                    }
                }
            };
            Some(AccessNode {
                id: e.id,
                index: e.index,
                depth: *depth_of.get(&e.id)?,
                kind,
            })
        }
        let mut used = 0;
        let root = build(root, &by_id, &depth_of, &mut used)?;
        if used != by_id.len() {
            return None;
        }
        let depth = max_depth(&root);
        Some(AccessTree { root, depth })
    }
}

/// Groups nodes by level, root level first.
pub fn partition_levels(tree: &AccessTree) -> LevelPartition {
    let mut levels: Vec<LevelSlice> = (1..=tree.depth)
        .map(|level| LevelSlice {
            level,
            entries: Vec::new(),
        })
        .collect();
    fn walk(node: &AccessNode, parent: Option<NodeId>, levels: &mut [LevelSlice]) {
        let kind = match &node.kind {
            NodeKind::Leaf { attribute } => EntryKind::Leaf {
                attribute: attribute.clone(),
            },
            NodeKind::Gate { threshold, children } => EntryKind::Gate {
                threshold: *threshold as u32,
                children: children.iter().map(|c| c.id).collect(),
            },
        };
        levels[node.depth as usize - 1].entries.push(DescriptorEntry {
            id: node.id,
            parent,
            index: node.index,
            kind,
        });
        for c in node.children() {
            walk(c, Some(node.id), levels);
        }
    }
    walk(&tree.root, None, &mut levels);
    LevelPartition { levels }
}

/// `Δ_{i,S}(x) = Π_{j ∈ S, j ≠ i} (x − j) / (i − j)` over `Z_p`.
pub fn lagrange_coeff(i: u32, set: &[u32], x: &Scalar) -> Result<Scalar, PolicyError> {
    if !set.contains(&i) {
        return Err(PolicyError::IndexNotInSet { index: i });
    }
    if set.iter().collect::<BTreeSet<_>>().len() != set.len() {
        return Err(PolicyError::DegenerateIndexSet);
    }
    let mut num = Scalar::ONE;
    let mut den = Scalar::ONE;
    let si = Scalar::from(i as u64);
    for &j in set {
        if j == 0 {
            return Err(PolicyError::DegenerateIndexSet);
        }
        if j == i {
            continue;
        }
        let sj = Scalar::from(j as u64);
        num = num * (*x - sj);
        den = den * (si - sj);
    }
    let inv = den.invert().ok_or(PolicyError::DegenerateIndexSet)?;
    Ok(num * inv)
}

/// Polynomial over `Z_p`, lowest-degree coefficient first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coeffs: Vec<Scalar>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<Scalar>) -> Self {
        Polynomial { coeffs }
    }

    /// Random polynomial of the given degree with a fixed constant term.
    pub fn random<R: RngCore + CryptoRng + ?Sized>(constant: Scalar, degree: usize, rng: &mut R) -> Self {
        let mut coeffs = Vec::with_capacity(degree + 1);
        coeffs.push(constant);
        coeffs.extend((0..degree).map(|_| Scalar::random(rng)));
        Polynomial { coeffs }
    }

    pub fn eval(&self, x: &Scalar) -> Scalar {
        self.coeffs
            .iter()
            .rev()
            .fold(Scalar::ZERO, |acc, c| acc * *x + *c)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }
}
