//! Formula multiway trees.
//!
//! Every operator is an internal node and every algebraic or numeric symbol is
//! a leaf. Trees are immutable values: all edits return a new tree.

pub mod build;
mod parse;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use parse::{parse, parse_with_wildcards};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: expected {expected}, found {found}")]
    Syntax {
        pos: usize,
        expected: String,
        found: String,
    },
    #[error("{kind} takes {expected} children, got {got}")]
    Arity {
        kind: NodeTag,
        expected: Arity,
        got: usize,
    },
    #[error("unknown node kind `{name}` at byte {pos}")]
    UnknownKind { name: String, pos: usize },
    #[error("invalid symbol or function name `{0}`")]
    InvalidName(String),
    #[error("invalid numeral `{0}`")]
    InvalidNumeral(String),
    #[error("path {0} does not exist in the formula")]
    InvalidPath(Path),
}

/// Payload-free discriminant of [`NodeKind`]; the unit symbol tables key on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeTag {
    Equal,
    Plus,
    Minus,
    Times,
    Divide,
    Power,
    Sqrt,
    Integral,
    Differential,
    DerivRatio,
    Sum,
    Ln,
    Exp,
    Sin,
    Cos,
    FuncApply,
    Sym,
    Num,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Exactly(usize),
    AtLeast(usize),
}

impl Arity {
    pub fn admits(self, n: usize) -> bool {
        match self {
            Arity::Exactly(k) => n == k,
            Arity::AtLeast(k) => n >= k,
        }
    }
}

impl fmt::Display for Arity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arity::Exactly(k) => write!(f, "exactly {k}"),
            Arity::AtLeast(k) => write!(f, "at least {k}"),
        }
    }
}

impl NodeTag {
    pub const ALL: [NodeTag; 18] = [
        NodeTag::Sym,
        NodeTag::Num,
        NodeTag::Plus,
        NodeTag::Minus,
        NodeTag::Times,
        NodeTag::Equal,
        NodeTag::Integral,
        NodeTag::Sum,
        NodeTag::Divide,
        NodeTag::Sqrt,
        NodeTag::Differential,
        NodeTag::Ln,
        NodeTag::Exp,
        NodeTag::DerivRatio,
        NodeTag::Sin,
        NodeTag::Cos,
        NodeTag::Power,
        NodeTag::FuncApply,
    ];

    /// Constructor name used by the textual syntax.
    pub fn name(self) -> &'static str {
        match self {
            NodeTag::Equal => "Equal",
            NodeTag::Plus => "Plus",
            NodeTag::Minus => "Minus",
            NodeTag::Times => "Times",
            NodeTag::Divide => "Divide",
            NodeTag::Power => "Power",
            NodeTag::Sqrt => "Sqrt",
            NodeTag::Integral => "Integral",
            NodeTag::Differential => "Der",
            NodeTag::DerivRatio => "DerivRatio",
            NodeTag::Sum => "Sum",
            NodeTag::Ln => "Ln",
            NodeTag::Exp => "Exp",
            NodeTag::Sin => "Sin",
            NodeTag::Cos => "Cos",
            NodeTag::FuncApply => "FuncApply",
            NodeTag::Sym => "Sym",
            NodeTag::Num => "Num",
        }
    }

    pub fn from_name(name: &str) -> Option<NodeTag> {
        if name == "Differential" {
            return Some(NodeTag::Differential);
        }
        NodeTag::ALL.iter().copied().find(|t| t.name() == name)
    }

    pub fn arity(self) -> Arity {
        use NodeTag::*;
        match self {
            Sym | Num => Arity::Exactly(0),
            Equal | Minus | Divide | Power | Integral | DerivRatio => Arity::Exactly(2),
            Plus | Times => Arity::AtLeast(2),
            Sqrt | Differential | Sum | Ln | Exp | Sin | Cos => Arity::Exactly(1),
            FuncApply => Arity::AtLeast(0),
        }
    }

    pub fn is_leaf(self) -> bool {
        matches!(self, NodeTag::Sym | NodeTag::Num)
    }
}

impl fmt::Display for NodeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeKind {
    Equal,
    Plus,
    Minus,
    Times,
    Divide,
    Power,
    Sqrt,
    /// `Integral(integrand, variable)`.
    Integral,
    /// The differential `d(x)`, written `Der`.
    Differential,
    /// `DerivRatio(y, x)` is dy/dx.
    DerivRatio,
    Sum,
    Ln,
    Exp,
    Sin,
    Cos,
    FuncApply(String),
    Sym(String),
    /// Exact decimal literal, never evaluated.
    Num(String),
}

impl NodeKind {
    pub fn tag(&self) -> NodeTag {
        match self {
            NodeKind::Equal => NodeTag::Equal,
            NodeKind::Plus => NodeTag::Plus,
            NodeKind::Minus => NodeTag::Minus,
            NodeKind::Times => NodeTag::Times,
            NodeKind::Divide => NodeTag::Divide,
            NodeKind::Power => NodeTag::Power,
            NodeKind::Sqrt => NodeTag::Sqrt,
            NodeKind::Integral => NodeTag::Integral,
            NodeKind::Differential => NodeTag::Differential,
            NodeKind::DerivRatio => NodeTag::DerivRatio,
            NodeKind::Sum => NodeTag::Sum,
            NodeKind::Ln => NodeTag::Ln,
            NodeKind::Exp => NodeTag::Exp,
            NodeKind::Sin => NodeTag::Sin,
            NodeKind::Cos => NodeTag::Cos,
            NodeKind::FuncApply(_) => NodeTag::FuncApply,
            NodeKind::Sym(_) => NodeTag::Sym,
            NodeKind::Num(_) => NodeTag::Num,
        }
    }

    /// Operator kind for a payload-free tag. `None` for the three named kinds.
    pub fn operator(tag: NodeTag) -> Option<NodeKind> {
        Some(match tag {
            NodeTag::Equal => NodeKind::Equal,
            NodeTag::Plus => NodeKind::Plus,
            NodeTag::Minus => NodeKind::Minus,
            NodeTag::Times => NodeKind::Times,
            NodeTag::Divide => NodeKind::Divide,
            NodeTag::Power => NodeKind::Power,
            NodeTag::Sqrt => NodeKind::Sqrt,
            NodeTag::Integral => NodeKind::Integral,
            NodeTag::Differential => NodeKind::Differential,
            NodeTag::DerivRatio => NodeKind::DerivRatio,
            NodeTag::Sum => NodeKind::Sum,
            NodeTag::Ln => NodeKind::Ln,
            NodeTag::Exp => NodeKind::Exp,
            NodeTag::Sin => NodeKind::Sin,
            NodeTag::Cos => NodeKind::Cos,
            NodeTag::FuncApply | NodeTag::Sym | NodeTag::Num => return None,
        })
    }
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn is_valid_numeral(lit: &str) -> bool {
    let digits = lit.strip_prefix('-').unwrap_or(lit);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    let all_digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    all_digits(int) && frac.is_none_or(all_digits)
}

/// An immutable formula tree. Construction enforces the arity table and name
/// rules, so every value of this type is well formed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Formula {
    kind: NodeKind,
    children: Vec<Formula>,
}

impl Formula {
    pub fn new(kind: NodeKind, children: Vec<Formula>) -> Result<Formula, ExprError> {
        match &kind {
            NodeKind::Sym(name) | NodeKind::FuncApply(name) if !is_valid_name(name) => {
                return Err(ExprError::InvalidName(name.clone()));
            }
            NodeKind::Num(lit) if !is_valid_numeral(lit) => {
                return Err(ExprError::InvalidNumeral(lit.clone()));
            }
            _ => {}
        }
        let tag = kind.tag();
        if !tag.arity().admits(children.len()) {
            return Err(ExprError::Arity {
                kind: tag,
                expected: tag.arity(),
                got: children.len(),
            });
        }
        Ok(Formula { kind, children })
    }

    pub fn try_sym(name: &str) -> Result<Formula, ExprError> {
        Formula::new(NodeKind::Sym(name.to_string()), Vec::new())
    }

    pub fn try_num(lit: &str) -> Result<Formula, ExprError> {
        Formula::new(NodeKind::Num(lit.to_string()), Vec::new())
    }

    pub fn kind(&self) -> &NodeKind {
        &self.kind
    }

    pub fn tag(&self) -> NodeTag {
        self.kind.tag()
    }

    pub fn children(&self) -> &[Formula] {
        &self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty() && self.tag().is_leaf()
    }

    /// Name of a `Sym` leaf.
    pub fn sym_name(&self) -> Option<&str> {
        match &self.kind {
            NodeKind::Sym(name) => Some(name),
            _ => None,
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Formula::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(Formula::depth).max().unwrap_or(0)
    }

    pub fn contains_sym(&self, name: &str) -> bool {
        self.sym_name() == Some(name) || self.children.iter().any(|c| c.contains_sym(name))
    }

    pub fn contains_tag(&self, tag: NodeTag) -> bool {
        self.tag() == tag || self.children.iter().any(|c| c.contains_tag(tag))
    }

    /// Visits every node in pre-order together with its path.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&Path, &'a Formula)) {
        fn go<'a>(f: &'a Formula, path: &mut Path, visit: &mut impl FnMut(&Path, &'a Formula)) {
            visit(path, f);
            for (i, child) in f.children.iter().enumerate() {
                path.0.push(i);
                go(child, path, visit);
                path.0.pop();
            }
        }
        go(self, &mut Path::root(), visit);
    }

    /// All paths in pre-order.
    pub fn paths(&self) -> Vec<Path> {
        let mut out = Vec::with_capacity(self.size());
        self.walk(&mut |p, _| out.push(p.clone()));
        out
    }

    pub fn subtree_at(&self, path: &Path) -> Result<&Formula, ExprError> {
        let mut node = self;
        for &i in &path.0 {
            node = node
                .children
                .get(i)
                .ok_or_else(|| ExprError::InvalidPath(path.clone()))?;
        }
        Ok(node)
    }

    /// Returns a copy with the node at `path` replaced by `graft`.
    pub fn replace_at(&self, path: &Path, graft: Formula) -> Result<Formula, ExprError> {
        fn go(f: &Formula, steps: &[usize], graft: Formula) -> Option<Formula> {
            let Some((&first, rest)) = steps.split_first() else {
                return Some(graft);
            };
            let child = f.children.get(first)?;
            let replaced = go(child, rest, graft)?;
            let mut children = f.children.clone();
            children[first] = replaced;
            Some(Formula {
                kind: f.kind.clone(),
                children,
            })
        }
        go(self, &path.0, graft).ok_or_else(|| ExprError::InvalidPath(path.clone()))
    }

    pub fn equals(&self, other: &Formula) -> bool {
        self == other
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Sym(name) => write!(f, "Sym(\"{name}\")"),
            NodeKind::Num(lit) => write!(f, "Num({lit})"),
            NodeKind::FuncApply(name) => {
                write!(f, "FuncApply(\"{name}\"")?;
                for child in &self.children {
                    write!(f, ",{child}")?;
                }
                f.write_str(")")
            }
            other => {
                write!(f, "{}(", other.tag())?;
                for (i, child) in self.children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{child}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl FromStr for Formula {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

/// Canonical constructor text of a formula.
pub fn print(f: &Formula) -> String {
    f.to_string()
}

/// Child-index route from the root; empty means the root itself.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Path {
        Path(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, index: usize) -> Path {
        let mut steps = self.0.clone();
        steps.push(index);
        Path(steps)
    }

    pub fn is_prefix_of(&self, other: &Path) -> bool {
        other.0.starts_with(&self.0)
    }
}

impl From<Vec<usize>> for Path {
    fn from(steps: Vec<usize>) -> Self {
        Path(steps)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{step}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed path `{0}`, expected e.g. [0,1]")]
pub struct PathParseError(pub String);

impl FromStr for Path {
    type Err = PathParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| PathParseError(s.to_string()))?;
        if inner.trim().is_empty() {
            return Ok(Path::root());
        }
        inner
            .split(',')
            .map(|part| part.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map(Path)
            .map_err(|_| PathParseError(s.to_string()))
    }
}
