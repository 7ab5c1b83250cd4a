//! Shorthand constructors for writing formulas in Rust code.
//!
//! The fixed-arity helpers cannot violate the arity table. `sym`, `num` and
//! `func` panic on malformed names, so use [`Formula::new`] for untrusted input.

use super::{Formula, NodeKind};

fn node(kind: NodeKind, children: Vec<Formula>) -> Formula {
    Formula::new(kind, children).expect("builder arity")
}

pub fn sym(name: &str) -> Formula {
    Formula::try_sym(name).unwrap_or_else(|e| panic!("{e}"))
}

pub fn num(lit: &str) -> Formula {
    Formula::try_num(lit).unwrap_or_else(|e| panic!("{e}"))
}

pub fn func(name: &str, args: Vec<Formula>) -> Formula {
    Formula::new(NodeKind::FuncApply(name.to_string()), args).unwrap_or_else(|e| panic!("{e}"))
}

pub fn equal(lhs: Formula, rhs: Formula) -> Formula {
    node(NodeKind::Equal, vec![lhs, rhs])
}

pub fn plus(a: Formula, b: Formula) -> Formula {
    node(NodeKind::Plus, vec![a, b])
}

pub fn minus(a: Formula, b: Formula) -> Formula {
    node(NodeKind::Minus, vec![a, b])
}

pub fn times(a: Formula, b: Formula) -> Formula {
    node(NodeKind::Times, vec![a, b])
}

pub fn divide(a: Formula, b: Formula) -> Formula {
    node(NodeKind::Divide, vec![a, b])
}

pub fn power(base: Formula, exponent: Formula) -> Formula {
    node(NodeKind::Power, vec![base, exponent])
}

pub fn sqrt(a: Formula) -> Formula {
    node(NodeKind::Sqrt, vec![a])
}

/// `∫ integrand d(var)`.
pub fn integral(integrand: Formula, var: Formula) -> Formula {
    node(NodeKind::Integral, vec![integrand, var])
}

pub fn der(a: Formula) -> Formula {
    node(NodeKind::Differential, vec![a])
}

/// `dy/dx`.
pub fn deriv_ratio(y: Formula, x: Formula) -> Formula {
    node(NodeKind::DerivRatio, vec![y, x])
}

pub fn sum(a: Formula) -> Formula {
    node(NodeKind::Sum, vec![a])
}

pub fn ln(a: Formula) -> Formula {
    node(NodeKind::Ln, vec![a])
}

pub fn exp(a: Formula) -> Formula {
    node(NodeKind::Exp, vec![a])
}

pub fn sin(a: Formula) -> Formula {
    node(NodeKind::Sin, vec![a])
}

pub fn cos(a: Formula) -> Formula {
    node(NodeKind::Cos, vec![a])
}

/// Variadic product; panics with fewer than two factors.
pub fn product(factors: Vec<Formula>) -> Formula {
    node(NodeKind::Times, factors)
}
