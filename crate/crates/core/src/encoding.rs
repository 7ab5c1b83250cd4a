//! Fixed-length integer encoding of formula trees and the positional
//! difference count between encodings.
//!
//! Each internal node contributes its own code followed by the codes of its
//! children; non-leaf children are then encoded recursively, depth first and
//! left to right. Symbols and numerals all share code 0, so the encoding sees
//! structure only. The result is zero-padded to `l_max`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::{Formula, NodeTag};

pub const DEFAULT_L_MAX: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodingError {
    #[error("encoding needs {len} slots but the table allows {l_max}")]
    Overflow { len: usize, l_max: usize },
    #[error("feature vectors have different lengths ({0} vs {1})")]
    TableMismatch(usize, usize),
    #[error("symbol table: {0}")]
    Table(String),
    #[error("feature vector: {0}")]
    Vector(String),
}

/// Operator codes plus the global encoding length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    codes: BTreeMap<NodeTag, u32>,
    l_max: usize,
}

impl Default for SymbolTable {
    fn default() -> Self {
        SymbolTable::canonical(DEFAULT_L_MAX)
    }
}

impl SymbolTable {
    /// The standard assignment: leaves 0, then `+ − × = ∫ ∑` as 1–6, code 7
    /// unused (φ is a symbol here), `/ √ d ln exp d/d` as 8–13, and
    /// `sin cos pow f(..)` as 14–17.
    pub fn canonical(l_max: usize) -> SymbolTable {
        use NodeTag::*;
        let codes = [
            (Sym, 0),
            (Num, 0),
            (Plus, 1),
            (Minus, 2),
            (Times, 3),
            (Equal, 4),
            (Integral, 5),
            (Sum, 6),
            (Divide, 8),
            (Sqrt, 9),
            (Differential, 10),
            (Ln, 11),
            (Exp, 12),
            (DerivRatio, 13),
            (Sin, 14),
            (Cos, 15),
            (Power, 16),
            (FuncApply, 17),
        ];
        SymbolTable {
            codes: codes.into_iter().collect(),
            l_max,
        }
    }

    /// Validates a custom assignment: every tag present, leaves at 0, all
    /// operator codes positive and distinct.
    pub fn new(codes: BTreeMap<NodeTag, u32>, l_max: usize) -> Result<SymbolTable, EncodingError> {
        if l_max == 0 {
            return Err(EncodingError::Table("L_max must be positive".into()));
        }
        for tag in NodeTag::ALL {
            let Some(&code) = codes.get(&tag) else {
                return Err(EncodingError::Table(format!("missing code for {tag}")));
            };
            if tag.is_leaf() != (code == 0) {
                return Err(EncodingError::Table(format!(
                    "{tag}={code}: code 0 is reserved for Sym and Num"
                )));
            }
        }
        let mut seen = BTreeMap::new();
        for (tag, code) in codes.iter().filter(|(t, _)| !t.is_leaf()) {
            if let Some(other) = seen.insert(*code, *tag) {
                return Err(EncodingError::Table(format!("{other} and {tag} share code {code}")));
            }
        }
        Ok(SymbolTable { codes, l_max })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn with_l_max(mut self, l_max: usize) -> SymbolTable {
        self.l_max = l_max;
        self
    }

    pub fn code(&self, tag: NodeTag) -> u32 {
        self.codes[&tag]
    }

    pub fn max_code(&self) -> u32 {
        self.codes.values().copied().max().unwrap_or(0)
    }

    /// Encodes `f`, failing when the unpadded encoding exceeds `l_max`.
    pub fn encode(&self, f: &Formula) -> Result<FeatureVector, EncodingError> {
        let mut values = Vec::with_capacity(self.l_max);
        self.push_node(f, &mut values);
        if values.len() > self.l_max {
            return Err(EncodingError::Overflow {
                len: values.len(),
                l_max: self.l_max,
            });
        }
        values.resize(self.l_max, 0);
        Ok(FeatureVector(values))
    }

    fn push_node(&self, node: &Formula, out: &mut Vec<u32>) {
        if node.is_leaf() {
            return;
        }
        out.push(self.code(node.tag()));
        out.extend(node.children().iter().map(|c| self.code(c.tag())));
        for child in node.children() {
            self.push_node(child, out);
        }
    }

    /// Persisted form: `Tag=code` per line, then `L_max=<n>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for tag in NodeTag::ALL {
            out.push_str(&format!("{tag}={}\n", self.codes[&tag]));
        }
        out.push_str(&format!("L_max={}\n", self.l_max));
        out
    }

    pub fn from_text(text: &str) -> Result<SymbolTable, EncodingError> {
        let mut codes = BTreeMap::new();
        let mut l_max = None;
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| EncodingError::Table(format!("expected `tag=code`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let parsed: u64 = value
                .parse()
                .map_err(|_| EncodingError::Table(format!("bad number `{value}`")))?;
            if key == "L_max" {
                l_max = Some(parsed as usize);
                continue;
            }
            let tag = NodeTag::from_name(key)
                .ok_or_else(|| EncodingError::Table(format!("unknown tag `{key}`")))?;
            let code = u32::try_from(parsed).map_err(|_| EncodingError::Table(format!("code too large: {parsed}")))?;
            if codes.insert(tag, code).is_some() {
                return Err(EncodingError::Table(format!("{tag} listed twice")));
            }
        }
        let l_max = l_max.ok_or_else(|| EncodingError::Table("missing L_max".into()))?;
        SymbolTable::new(codes, l_max)
    }
}

/// Length-of-encoding without building it: one slot per internal node plus
/// one per child edge.
pub fn encoded_len(f: &Formula) -> usize {
    if f.is_leaf() {
        return 0;
    }
    1 + f.children().len() + f.children().iter().map(encoded_len).sum::<usize>()
}

/// A padded encoding. Used directly as the tabular learner's state key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureVector(Vec<u32>);

impl FeatureVector {
    pub fn from_values(values: Vec<u32>) -> FeatureVector {
        FeatureVector(values)
    }

    pub fn values(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl FromStr for FeatureVector {
    type Err = EncodingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| EncodingError::Vector(format!("bad entry `{t}`"))))
            .collect::<Result<Vec<_>, _>>()
            .map(FeatureVector)
    }
}

/// Number of positions where the two encodings differ.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> Result<usize, EncodingError> {
    if a.len() != b.len() {
        return Err(EncodingError::TableMismatch(a.len(), b.len()));
    }
    Ok(a.0.iter().zip(&b.0).filter(|(x, y)| x != y).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::build::*;

    #[test]
    fn leaf_encodes_to_padding() {
        let fv = SymbolTable::default().encode(&sym("x")).unwrap();
        assert_eq!(fv.len(), DEFAULT_L_MAX);
        assert!(fv.values().iter().all(|&v| v == 0));
    }

    #[test]
    fn single_sum() {
        let fv = SymbolTable::default().encode(&plus(sym("a"), sym("b"))).unwrap();
        assert_eq!(&fv.values()[..3], &[1, 0, 0]);
        assert!(fv.values()[3..].iter().all(|&v| v == 0));
    }

    #[test]
    fn depth_first_order() {
        // a*sin(x) + e^y = c
        let f = equal(plus(times(sym("a"), sin(sym("x"))), exp(sym("y"))), sym("c"));
        let fv = SymbolTable::default().encode(&f).unwrap();
        assert_eq!(&fv.values()[..13], &[4, 1, 0, 1, 3, 12, 3, 0, 14, 14, 0, 12, 0]);
        assert_eq!(encoded_len(&f), 13);
    }

    #[test]
    fn leaf_blind() {
        let st = SymbolTable::default();
        assert_eq!(
            st.encode(&plus(sym("x"), sym("y"))).unwrap(),
            st.encode(&plus(sym("a"), num("3"))).unwrap()
        );
        assert_eq!(
            st.encode(&func("f", vec![sym("x")])).unwrap(),
            st.encode(&func("g", vec![num("1")])).unwrap()
        );
    }

    #[test]
    fn overflow_boundary() {
        let f = plus(sym("a"), sym("b"));
        assert!(SymbolTable::canonical(3).encode(&f).is_ok());
        assert_eq!(
            SymbolTable::canonical(2).encode(&f),
            Err(EncodingError::Overflow { len: 3, l_max: 2 })
        );
    }

    #[test]
    fn distance_basics() {
        let a: FeatureVector = "1 2 0 0".parse().unwrap();
        let b: FeatureVector = "1 3 0 0".parse().unwrap();
        assert_eq!(distance(&a, &b).unwrap(), 1);
        assert_eq!(distance(&a, &a).unwrap(), 0);
        let short: FeatureVector = "1 2".parse().unwrap();
        assert!(matches!(distance(&a, &short), Err(EncodingError::TableMismatch(4, 2))));
    }

    #[test]
    fn table_text_round_trip() {
        let st = SymbolTable::canonical(32);
        assert_eq!(SymbolTable::from_text(&st.to_text()).unwrap(), st);
    }

    #[test]
    fn table_validation() {
        let mut codes: BTreeMap<NodeTag, u32> = NodeTag::ALL.iter().map(|&t| (t, 0)).collect();
        assert!(SymbolTable::new(codes.clone(), 8).is_err());
        for (i, tag) in NodeTag::ALL.iter().enumerate().skip(2) {
            codes.insert(*tag, i as u32);
        }
        assert!(SymbolTable::new(codes.clone(), 8).is_ok());
        codes.insert(NodeTag::Sin, 2);
        assert!(SymbolTable::new(codes, 8).is_err());
        assert!(SymbolTable::from_text("Sym=0\nL_max=4\n").is_err());
    }
}
