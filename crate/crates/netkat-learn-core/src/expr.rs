//! NetKAT abstract syntax.

use crate::space::{PacketSpace, Val};
use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Expr {
    /// `drop`: the empty trace set.
    Zero,
    /// `skip`: the identity traces `{αα}`.
    One,
    /// `f = v`
    TestEq(usize, Val),
    /// `f != v`
    TestNe(usize, Val),
    /// `f := v`
    Assign(usize, Val),
    /// `dup`: log the current packet.
    Dup,
    Union(Box<Expr>, Box<Expr>),
    Seq(Box<Expr>, Box<Expr>),
    Star(Box<Expr>),
}

impl Expr {
    pub fn union(a: Expr, b: Expr) -> Expr {
        Expr::Union(Box::new(a), Box::new(b))
    }

    pub fn seq(a: Expr, b: Expr) -> Expr {
        Expr::Seq(Box::new(a), Box::new(b))
    }

    pub fn star(a: Expr) -> Expr {
        Expr::Star(Box::new(a))
    }

    /// Union of a sequence of alternatives; `drop` when empty.
    pub fn union_all<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut it = items.into_iter();
        match it.next() {
            None => Expr::Zero,
            Some(first) => it.fold(first, Expr::union),
        }
    }

    /// Sequence of a list of factors; `skip` when empty.
    pub fn seq_all<I: IntoIterator<Item = Expr>>(items: I) -> Expr {
        let mut it = items.into_iter();
        match it.next() {
            None => Expr::One,
            Some(first) => it.fold(first, Expr::seq),
        }
    }

    pub fn is_dup_free(&self) -> bool {
        match self {
            Expr::Dup => false,
            Expr::Zero | Expr::One | Expr::TestEq(..) | Expr::TestNe(..) | Expr::Assign(..) => {
                true
            }
            Expr::Union(a, b) | Expr::Seq(a, b) => a.is_dup_free() && b.is_dup_free(),
            Expr::Star(a) => a.is_dup_free(),
        }
    }

    /// Checks every referenced field index and value against the space.
    pub fn validate(&self, space: &PacketSpace) -> Result<(), String> {
        match self {
            Expr::Zero | Expr::One | Expr::Dup => Ok(()),
            Expr::TestEq(f, v) | Expr::TestNe(f, v) | Expr::Assign(f, v) => {
                if *f >= space.num_fields() {
                    return Err(alloc::format!("field index {} out of range", f));
                }
                if space.domain(*f).binary_search(v).is_err() {
                    return Err(alloc::format!(
                        "value {} not in domain of field `{}`",
                        v,
                        space.field_name(*f)
                    ));
                }
                Ok(())
            }
            Expr::Union(a, b) | Expr::Seq(a, b) => {
                a.validate(space)?;
                b.validate(space)
            }
            Expr::Star(a) => a.validate(space),
        }
    }

    /// Renders with the concrete syntax, parenthesizing by precedence
    /// (`*` tightest, then `;`, then `+`).
    pub fn display<'a>(&'a self, space: &'a PacketSpace) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, space }
    }

    fn prec(&self) -> u8 {
        match self {
            Expr::Union(..) => 0,
            Expr::Seq(..) => 1,
            _ => 2,
        }
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    space: &'a PacketSpace,
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(e: &Expr, sp: &PacketSpace, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            match e {
                Expr::Zero => write!(f, "drop"),
                Expr::One => write!(f, "skip"),
                Expr::Dup => write!(f, "dup"),
                Expr::TestEq(fi, v) => write!(f, "{}={}", sp.field_name(*fi), v),
                Expr::TestNe(fi, v) => write!(f, "{}!={}", sp.field_name(*fi), v),
                Expr::Assign(fi, v) => write!(f, "{}:={}", sp.field_name(*fi), v),
                Expr::Union(a, b) => {
                    sub(a, sp, f, 0)?;
                    write!(f, " + ")?;
                    sub(b, sp, f, 0)
                }
                Expr::Seq(a, b) => {
                    sub(a, sp, f, 1)?;
                    write!(f, ";")?;
                    sub(b, sp, f, 1)
                }
                Expr::Star(a) => {
                    sub(a, sp, f, 2)?;
                    write!(f, "*")
                }
            }
        }
        fn sub(e: &Expr, sp: &PacketSpace, f: &mut fmt::Formatter<'_>, need: u8) -> fmt::Result {
            if e.prec() < need {
                write!(f, "(")?;
                go(e, sp, f)?;
                write!(f, ")")
            } else {
                go(e, sp, f)
            }
        }
        go(self.expr, self.space, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    #[test]
    fn display_uses_minimal_parens() {
        let sp = PacketSpace::zero_based(vec![("f", 3), ("g", 3)]).unwrap();
        let e = Expr::seq(
            Expr::union(Expr::TestEq(0, 1), Expr::Assign(1, 2)),
            Expr::star(Expr::Dup),
        );
        assert_eq!(e.display(&sp).to_string(), "(f=1 + g:=2);dup*");
    }

    #[test]
    fn validate_catches_out_of_domain() {
        let sp = PacketSpace::new(vec![("f", vec![1, 2])]).unwrap();
        assert!(Expr::TestEq(0, 2).validate(&sp).is_ok());
        assert!(Expr::TestEq(0, 3).validate(&sp).is_err());
        assert!(Expr::Assign(1, 0).validate(&sp).is_err());
    }
}
