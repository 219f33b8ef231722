use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;

fn write_str_lit(f: &mut Formatter<'_>, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_char('\\')?;
        }
        f.write_char(c)?;
    }
    f.write_char('"')
}

fn write_args(f: &mut Formatter<'_>, args: &[Expr]) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

impl Display for Call {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        write_args(f, &self.args)?;
        f.write_char(')')
    }
}

impl Display for Expr {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(x) => write!(f, "{x}"),
            Expr::Str(s) => write_str_lit(f, s),
            Expr::Var(n, _) => f.write_str(n),
            Expr::Observe(a, _) => write!(f, "s.eval({a})"),
            Expr::Call(c) => write!(f, "{c}"),
            Expr::Next(c, _) => write!(f, "next({c})"),
            Expr::If { lhs, op, rhs, then, els, .. } => {
                write!(f, "if ({lhs} {} {rhs}) then {then} else {els} fi", op.symbol())
            }
            Expr::Bin(op, a, b) => {
                let prec = |e: &Expr| match e {
                    Expr::Bin(o, ..) => Some(o.precedence()),
                    _ => None,
                };
                if prec(a).is_some_and(|p| p < op.precedence()) {
                    write!(f, "({a})")?;
                } else {
                    write!(f, "{a}")?;
                }
                write!(f, " {} ", op.symbol())?;
                if prec(b).is_some_and(|p| p <= op.precedence()) {
                    write!(f, "({b})")
                } else {
                    write!(f, "{b}")
                }
            }
            Expr::Neg(a) => match **a {
                Expr::Bin(..) => write!(f, "-({a})"),
                _ => write!(f, "-{a}"),
            },
        }
    }
}

impl Display for TailArg {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            TailArg::Ident(n, _) => f.write_str(n),
            TailArg::Num(x, _) => write!(f, "{x}"),
        }
    }
}

impl Display for OpDef {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}) = {} ;", self.name, self.params.join(", "), self.body)
    }
}

impl Display for EvalCommand {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "eval {}(", self.kind.keyword())?;
        for (i, t) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "E[ {t} ]")?;
        }
        for a in &self.tail {
            write!(f, ", {a}")?;
        }
        f.write_str(") ;")
    }
}

impl Display for Query {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        for op in &self.operators {
            writeln!(f, "{op}")?;
        }
        for c in &self.commands {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}
