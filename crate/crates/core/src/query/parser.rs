use super::ast::*;
use super::lexer::{tokenize, Tok};
use super::QueryError;

const RESERVED: &[&str] = &["if", "then", "else", "fi", "next", "eval", "s"];

/// Parses query text into an AST without semantic checks.
pub fn parse_syntax(src: &str) -> Result<Query, QueryError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, i: 0 };
    p.query()
}

struct Parser {
    toks: Vec<(Tok, Pos)>,
    i: usize,
}

type PResult<T> = Result<T, QueryError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.i].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.i].clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> PResult<T> {
        Err(QueryError::Syntax {
            pos: self.pos(),
            message: format!("expected {expected}, found {}", self.peek().describe()),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Pos> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            self.fail(what)
        }
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn expect_word(&mut self, w: &str) -> PResult<Pos> {
        if self.is_word(w) {
            Ok(self.bump().1)
        } else {
            self.fail(&format!("`{w}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Pos)> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let pos = self.bump().1;
                Ok((s, pos))
            }
            _ => self.fail(what),
        }
    }

    fn query(&mut self) -> PResult<Query> {
        let mut operators = Vec::new();
        let mut commands = Vec::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Ident(w) if w == "eval" => commands.push(self.eval_command()?),
                _ if !commands.is_empty() => return self.fail("`eval` or end of input"),
                _ => operators.push(self.opdef()?),
            }
        }
        if operators.is_empty() && commands.is_empty() {
            return self.fail("an operator definition");
        }
        if commands.is_empty() {
            return self.fail("an `eval` command");
        }
        Ok(Query { operators, commands })
    }

    fn opdef(&mut self) -> PResult<OpDef> {
        let (name, pos) = self.ident("an operator name")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                params.push(self.ident("a parameter name")?.0);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        self.expect(Tok::Assign, "`=`")?;
        let body = self.expr()?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(OpDef { name, params, body, pos })
    }

    fn eval_command(&mut self) -> PResult<EvalCommand> {
        let pos = self.expect_word("eval")?;
        let kind = match self.peek().clone() {
            Tok::Ident(w) => match CommandKind::from_keyword(&w) {
                Some(k) => {
                    self.bump();
                    k
                }
                None => return self.fail("one of autoIR, warmup, autoBM, autoRD, manualRD, manualBM"),
            },
            _ => return self.fail("a command name"),
        };
        self.expect(Tok::LParen, "`(`")?;
        let mut targets = Vec::new();
        let mut tail = Vec::new();
        loop {
            if self.is_word("E") && *self.peek_at(1) == Tok::LBracket {
                if !tail.is_empty() {
                    return self.fail("a number or identifier after the range arguments");
                }
                self.bump();
                self.bump();
                targets.push(self.expr()?);
                self.expect(Tok::RBracket, "`]`")?;
            } else if targets.is_empty() {
                return self.fail("`E[`");
            } else {
                tail.push(self.tail_arg()?);
            }
            if *self.peek() == Tok::Comma {
                self.bump();
            } else {
                break;
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        self.expect(Tok::Semi, "`;`")?;
        Ok(EvalCommand { kind, targets, tail, pos })
    }

    fn tail_arg(&mut self) -> PResult<TailArg> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(TailArg::Num(x, pos))
            }
            Tok::Minus => {
                self.bump();
                match self.peek().clone() {
                    Tok::Num(x) => {
                        self.bump();
                        Ok(TailArg::Num(-x, pos))
                    }
                    _ => self.fail("a number"),
                }
            }
            Tok::Ident(_) => Ok(TailArg::Ident(self.ident("an identifier")?.0, pos)),
            _ => self.fail("`E[`, a number or an identifier"),
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr::Num(x))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Str(s))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(w) if w == "if" => self.if_expr(),
            Tok::Ident(w) if w == "next" => {
                self.bump();
                self.expect(Tok::LParen, "`(` after `next`")?;
                let call = self.call()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Next(call, pos))
            }
            Tok::Ident(w) if w == "s" => {
                self.bump();
                self.expect(Tok::Dot, "`.eval`")?;
                self.expect_word("eval")?;
                self.expect(Tok::LParen, "`(`")?;
                let apos = self.pos();
                let arg = match self.peek().clone() {
                    Tok::Str(s) => Expr::Str(s),
                    Tok::Num(x) => Expr::Num(x),
                    Tok::Ident(_) => Expr::Var(self.ident("an identifier")?.0, apos),
                    _ => return self.fail("a string, number or parameter in `s.eval(...)`"),
                };
                if !matches!(arg, Expr::Var(..)) {
                    self.bump();
                }
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Observe(Box::new(arg), pos))
            }
            Tok::Ident(_) => {
                if *self.peek_at(1) == Tok::LParen {
                    Ok(Expr::Call(self.call()?))
                } else {
                    let (name, pos) = self.ident("an expression")?;
                    Ok(Expr::Var(name, pos))
                }
            }
            _ => self.fail("an expression"),
        }
    }

    fn if_expr(&mut self) -> PResult<Expr> {
        let pos = self.expect_word("if")?;
        self.expect(Tok::LParen, "`(` after `if`")?;
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::EqEq => CmpOp::Eq,
            Tok::Lt => CmpOp::Lt,
            Tok::Gt => CmpOp::Gt,
            Tok::Le => CmpOp::Le,
            Tok::Ge => CmpOp::Ge,
            _ => return self.fail("a comparison operator"),
        };
        self.bump();
        let rhs = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        self.expect_word("then")?;
        let then = self.expr()?;
        self.expect_word("else")?;
        let els = self.expr()?;
        self.expect_word("fi")?;
        Ok(Expr::If {
            lhs: Box::new(lhs),
            op,
            rhs: Box::new(rhs),
            then: Box::new(then),
            els: Box::new(els),
            pos,
        })
    }

    fn call(&mut self) -> PResult<Call> {
        let (name, pos) = self.ident("an operator call")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Call { name, args, pos })
    }
}
