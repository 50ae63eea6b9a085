//! Parser for the NetKAT concrete syntax.
//!
//! ```text
//! expr := expr "+" expr | expr ";" expr | expr "*" | "(" expr ")"
//!       | "drop" | "skip" | "dup" | id "=" nat | id "!=" nat | id ":=" nat
//! ```
//!
//! Precedence: postfix `*` binds tightest, then `;`, then `+`. Field
//! names are resolved against the packet space; tests and assignments
//! with out-of-domain values are rejected here, so downstream code never
//! sees them.

use crate::expr::Expr;
use crate::space::{PacketSpace, Val};
use alloc::format;
use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    /// Byte offset into the input.
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at byte {}: {}", self.pos, self.msg)
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ParseError {}

pub fn parse_expr(text: &str, space: &PacketSpace) -> Result<Expr, ParseError> {
    let mut p = Parser {
        text,
        pos: 0,
        space,
    };
    let e = p.union_expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    space: &'a PacketSpace,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> ParseError {
        ParseError {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn union_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.seq_expr()?;
        while self.eat("+") {
            e = Expr::union(e, self.seq_expr()?);
        }
        Ok(e)
    }

    fn seq_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.starred()?;
        while self.eat(";") {
            e = Expr::seq(e, self.starred()?);
        }
        Ok(e)
    }

    fn starred(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.atom()?;
        while self.eat("*") {
            e = Expr::star(e);
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.eat("(") {
            let e = self.union_expr()?;
            if !self.eat(")") {
                return Err(self.err("expected `)`"));
            }
            return Ok(e);
        }
        let id_pos = self.pos;
        let id = self.ident()?;
        match id.as_str() {
            "drop" => return Ok(Expr::Zero),
            "skip" => return Ok(Expr::One),
            "dup" => return Ok(Expr::Dup),
            _ => {}
        }
        let field = match self.space.field_by_name(&id) {
            Some(f) => f,
            None => {
                return Err(ParseError {
                    pos: id_pos,
                    msg: format!("unknown field `{}`", id),
                })
            }
        };
        self.skip_ws();
        let op = if self.eat(":=") {
            Op::Assign
        } else if self.eat("!=") {
            Op::Ne
        } else if self.eat("=") {
            Op::Eq
        } else {
            return Err(self.err("expected `=`, `!=`, or `:=` after field name"));
        };
        self.skip_ws();
        let v_pos = self.pos;
        let v = self.nat()?;
        if self.space.domain(field).binary_search(&v).is_err() {
            return Err(ParseError {
                pos: v_pos,
                msg: format!(
                    "value {} not in domain of field `{}`",
                    v,
                    self.space.field_name(field)
                ),
            });
        }
        Ok(match op {
            Op::Eq => Expr::TestEq(field, v),
            Op::Ne => Expr::TestNe(field, v),
            Op::Assign => Expr::Assign(field, v),
        })
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .take_while(|&(i, c)| {
                c == '_' || c.is_ascii_alphabetic() || (i > 0 && c.is_ascii_digit())
            })
            .map(|(i, c)| i + c.len_utf8())
            .last();
        match end {
            Some(end) => {
                let id = String::from(&rest[..end]);
                self.pos += end;
                Ok(id)
            }
            None => Err(self.err("expected an expression")),
        }
    }

    fn nat(&mut self) -> Result<Val, ParseError> {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .take_while(|&(_, c)| c.is_ascii_digit())
            .map(|(i, c)| i + c.len_utf8())
            .last();
        match end {
            Some(end) => {
                let v: Val = rest[..end]
                    .parse()
                    .map_err(|_| self.err("number out of range"))?;
                self.pos += end;
                Ok(v)
            }
            None => Err(self.err("expected a number")),
        }
    }
}

enum Op {
    Eq,
    Ne,
    Assign,
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn space() -> PacketSpace {
        PacketSpace::zero_based(vec![("f", 3), ("pt", 4)]).unwrap()
    }

    #[test]
    fn precedence_and_constants() {
        let sp = space();
        assert_eq!(
            parse_expr("f=1 + f:=2", &sp).unwrap(),
            Expr::union(Expr::TestEq(0, 1), Expr::Assign(0, 2))
        );
        assert_eq!(parse_expr("drop", &sp).unwrap(), Expr::Zero);
        assert_eq!(
            parse_expr("(pt=1;pt:=2)*", &sp).unwrap(),
            Expr::star(Expr::seq(Expr::TestEq(1, 1), Expr::Assign(1, 2)))
        );
        // `;` binds tighter than `+`, `*` tighter than `;`.
        assert_eq!(
            parse_expr("f=0;f=1 + dup*", &sp).unwrap(),
            Expr::union(
                Expr::seq(Expr::TestEq(0, 0), Expr::TestEq(0, 1)),
                Expr::star(Expr::Dup)
            )
        );
    }

    #[test]
    fn roundtrips_through_display() {
        use alloc::string::ToString;
        let sp = space();
        for src in ["f=1 + f:=2;dup", "(f=0 + skip)*;pt!=3", "drop + skip*"] {
            let e = parse_expr(src, &sp).unwrap();
            let printed = e.display(&sp).to_string();
            assert_eq!(parse_expr(&printed, &sp).unwrap(), e);
        }
    }

    #[test]
    fn error_positions_and_domains() {
        let sp = space();
        let e = parse_expr("f=1 + q=2", &sp).unwrap_err();
        assert_eq!(e.pos, 6);
        let e = parse_expr("f=7", &sp).unwrap_err();
        assert!(e.msg.contains("domain"));
        assert!(parse_expr("f=1)", &sp).is_err());
        assert!(parse_expr("", &sp).is_err());
        assert!(parse_expr("f=", &sp).is_err());
    }
}
