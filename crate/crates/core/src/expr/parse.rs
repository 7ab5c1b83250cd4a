//! Recursive-descent reader for constructor text such as
//! `Equal(Plus(Sym("a"),Sym("b")),Sym("c"))`.

use super::{ExprError, Formula, NodeKind, NodeTag};

/// Parses constructor text. Whitespace between tokens is ignored.
pub fn parse(text: &str) -> Result<Formula, ExprError> {
    let mut parser = Parser::new(text, None);
    let f = parser.node()?;
    parser.finish()?;
    Ok(f)
}

/// Parses constructor text where a bare `?` stands for an anonymous pattern
/// variable. Each `?` becomes a distinct fresh symbol `_wN`; the fresh names
/// are returned in order of appearance.
pub fn parse_with_wildcards(text: &str) -> Result<(Formula, Vec<String>), ExprError> {
    let mut parser = Parser::new(text, Some(Vec::new()));
    let f = parser.node()?;
    parser.finish()?;
    Ok((f, parser.wildcards.unwrap_or_default()))
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    wildcards: Option<Vec<String>>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, wildcards: Option<Vec<String>>) -> Self {
        Parser {
            src,
            pos: 0,
            wildcards,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn found(&mut self) -> String {
        match self.peek() {
            Some(c) => format!("`{c}`"),
            None => "end of input".to_string(),
        }
    }

    fn syntax(&mut self, expected: &str) -> ExprError {
        let found = self.found();
        ExprError::Syntax {
            pos: self.pos,
            expected: expected.to_string(),
            found,
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ExprError> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.syntax(&format!("`{c}`")))
        }
    }

    fn finish(&mut self) -> Result<(), ExprError> {
        if self.peek().is_some() {
            return Err(self.syntax("end of input"));
        }
        Ok(())
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let len = rest.find(|c| !pred(c)).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn ident(&mut self) -> &'a str {
        self.take_while(|c| c.is_ascii_alphanumeric() || c == '_')
    }

    fn quoted(&mut self) -> Result<&'a str, ExprError> {
        self.expect('"')?;
        let start = self.pos;
        let len = self
            .rest()
            .find('"')
            .ok_or_else(|| self.syntax("closing `\"`"))?;
        self.pos += len + 1;
        Ok(&self.src[start..start + len])
    }

    fn node(&mut self) -> Result<Formula, ExprError> {
        if self.wildcards.is_some() && self.peek() == Some('?') {
            self.pos += 1;
            let names = self.wildcards.as_mut().expect("checked above");
            let name = format!("_w{}", names.len());
            names.push(name.clone());
            return Formula::try_sym(&name);
        }
        let start = {
            self.skip_ws();
            self.pos
        };
        let name = self.ident();
        if name.is_empty() {
            return Err(self.syntax("a node constructor"));
        }
        let tag = NodeTag::from_name(name).ok_or_else(|| ExprError::UnknownKind {
            name: name.to_string(),
            pos: start,
        })?;
        self.expect('(')?;
        let f = match tag {
            NodeTag::Sym => {
                let name = self.quoted()?;
                self.expect(')')?;
                Formula::new(NodeKind::Sym(name.to_string()), Vec::new())?
            }
            NodeTag::Num => {
                let lit = self.take_while(|c| c.is_ascii_digit() || c == '.' || c == '-');
                if lit.is_empty() {
                    return Err(self.syntax("a numeral"));
                }
                self.expect(')')?;
                Formula::new(NodeKind::Num(lit.to_string()), Vec::new())?
            }
            NodeTag::FuncApply => {
                let name = self.quoted()?.to_string();
                let mut args = Vec::new();
                while self.peek() == Some(',') {
                    self.pos += 1;
                    args.push(self.node()?);
                }
                self.expect(')')?;
                Formula::new(NodeKind::FuncApply(name), args)?
            }
            op => {
                let mut args = vec![self.node()?];
                while self.peek() == Some(',') {
                    self.pos += 1;
                    args.push(self.node()?);
                }
                self.expect(')')?;
                Formula::new(NodeKind::operator(op).expect("operator tag"), args)?
            }
        };
        Ok(f)
    }
}
