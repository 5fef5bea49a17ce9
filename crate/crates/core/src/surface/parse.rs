use std::collections::HashSet;

use thiserror::Error;

use super::{Expr, InputDecl, LValue, Stmt, SurfaceProgram, UnaryOp};
use crate::ir::Op;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SyntaxError {
    #[error("{line}:{col}: {message}")]
    Unexpected {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("{line}:{col}: loop has no `bound N` annotation")]
    MissingBound { line: usize, col: usize },
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Tok {
    Ident(String),
    Int(u64),
    Assign,
    Op(Op),
    Plus,
    Minus,
    Bang,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let (line, col) = (li + 1, i + 1);
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line, col });
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let digits: String = chars[start..i].iter().collect();
                let n = digits
                    .parse::<u64>()
                    .ok()
                    .filter(|n| *n <= i64::MAX as u64)
                    .ok_or_else(|| SyntaxError::Unexpected {
                        line,
                        col,
                        message: format!("integer literal `{digits}` out of range"),
                    })?;
                push(&mut out, Tok::Int(n));
                continue;
            }
            let next = chars.get(i + 1).copied();
            let (tok, width) = match (c, next) {
                (':', Some('=')) => (Tok::Assign, 2),
                ('=', Some('=')) => (Tok::Op(Op::Eq), 2),
                ('!', Some('=')) => (Tok::Op(Op::Neq), 2),
                ('<', Some('=')) => (Tok::Op(Op::Le), 2),
                ('>', Some('=')) => (Tok::Op(Op::Ge), 2),
                ('=', _) => (Tok::Assign, 1),
                ('<', _) => (Tok::Op(Op::Lt), 1),
                ('>', _) => (Tok::Op(Op::Gt), 1),
                ('*', _) => (Tok::Op(Op::Mul), 1),
                ('/', _) => (Tok::Op(Op::Div), 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('!', _) => (Tok::Bang, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (';', _) => (Tok::Semi, 1),
                (',', _) => (Tok::Comma, 1),
                _ => {
                    return Err(SyntaxError::Unexpected {
                        line,
                        col,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            };
            push(&mut out, tok);
            i += width;
        }
    }
    let (line, col) = out.last().map_or((1, 1), |t| (t.line, t.col + 1));
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: [&str; 7] = ["if", "then", "else", "for", "bound", "input", "return"];

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        let t = &self.toks[self.pos];
        Err(SyntaxError::Unexpected {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Eof => "end of input".into(),
            t => format!("{t:?}"),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", self.describe()))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn skip_semis(&mut self) {
        while *self.peek() == Tok::Semi {
            self.bump();
        }
    }

    fn program(&mut self) -> PResult<SurfaceProgram> {
        let mut prog = SurfaceProgram::default();
        loop {
            self.skip_semis();
            if *self.peek() == Tok::Eof {
                break;
            }
            if self.is_keyword("input") {
                self.bump();
                loop {
                    let name = self.ident()?;
                    let len = if *self.peek() == Tok::LBracket {
                        self.bump();
                        let n = match self.bump().tok {
                            Tok::Int(n) if n > 0 => n as usize,
                            _ => {
                                self.pos -= 1;
                                return self.error("expected positive array length");
                            }
                        };
                        self.expect(Tok::RBracket, "`]`")?;
                        Some(n)
                    } else {
                        None
                    };
                    prog.inputs.push(InputDecl { name, len });
                    if *self.peek() != Tok::Comma {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            prog.body.push(self.stmt(true)?);
        }
        if prog.inputs.is_empty() {
            prog.inputs = infer_inputs(&prog.body)
                .into_iter()
                .map(|name| InputDecl { name, len: None })
                .collect();
        }
        Ok(prog)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        if *self.peek() == Tok::LBrace {
            self.bump();
            let mut stmts = Vec::new();
            loop {
                self.skip_semis();
                if *self.peek() == Tok::RBrace {
                    self.bump();
                    return Ok(stmts);
                }
                if *self.peek() == Tok::Eof {
                    return self.error("unclosed `{`");
                }
                stmts.push(self.stmt(false)?);
            }
        }
        Ok(vec![self.stmt(false)?])
    }

    fn stmt(&mut self, top_level: bool) -> PResult<Stmt> {
        if self.is_keyword("if") {
            self.bump();
            let cond = self.expr()?;
            if self.is_keyword("then") {
                self.bump();
            }
            let then_branch = self.block()?;
            let else_branch = if self.is_keyword("else") {
                self.bump();
                self.block()?
            } else {
                Vec::new()
            };
            return Ok(Stmt::If {
                cond,
                then_branch,
                else_branch,
            });
        }
        if self.is_keyword("for") {
            let for_tok = self.bump();
            self.expect(Tok::LParen, "`(`")?;
            let var = self.ident()?;
            self.expect(Tok::Assign, "`:=`")?;
            let init = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            let cond = self.expr()?;
            self.expect(Tok::Semi, "`;`")?;
            let step_var = self.ident()?;
            self.expect(Tok::Assign, "`:=`")?;
            let step = self.expr()?;
            self.expect(Tok::RParen, "`)`")?;
            if !self.is_keyword("bound") {
                return Err(SyntaxError::MissingBound {
                    line: for_tok.line,
                    col: for_tok.col,
                });
            }
            self.bump();
            let bound = match self.peek() {
                Tok::Int(n) if *n <= u32::MAX as u64 => *n as u32,
                _ => return self.error("expected loop bound"),
            };
            self.bump();
            let body = self.block()?;
            return Ok(Stmt::For {
                var,
                init,
                cond,
                step_var,
                step,
                bound,
                body,
            });
        }
        if self.is_keyword("return") {
            if !top_level {
                return self.error("`return` is only allowed at top level");
            }
            self.bump();
            return Ok(Stmt::Return(self.ident()?));
        }
        let name = self.ident()?;
        let target = if *self.peek() == Tok::LBracket {
            self.bump();
            let idx = self.expr()?;
            self.expect(Tok::RBracket, "`]`")?;
            LValue::Element(name, idx)
        } else {
            LValue::Scalar(name)
        };
        self.expect(Tok::Assign, "`:=`")?;
        let value = self.expr()?;
        Ok(Stmt::Assign { target, value })
    }

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        if let Tok::Op(op) = *self.peek() {
            if op.is_comparison() {
                self.bump();
                let rhs = self.additive()?;
                return Ok(Expr::bin(op, lhs, rhs));
            }
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => Op::Add,
                Tok::Minus => Op::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op(op @ (Op::Mul | Op::Div)) => *op,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = Expr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Minus => {
                self.bump();
                if let Tok::Int(n) = *self.peek() {
                    self.bump();
                    return Ok(Expr::Int(-(n as i64)));
                }
                Ok(Expr::Unary(UnaryOp::Neg, Box::new(self.unary()?)))
            }
            Tok::Bang => {
                self.bump();
                Ok(Expr::Unary(UnaryOp::Not, Box::new(self.unary()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n as i64))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if *self.peek() == Tok::LBracket {
                    self.bump();
                    let idx = self.expr()?;
                    self.expect(Tok::RBracket, "`]`")?;
                    Ok(Expr::Index(name, Box::new(idx)))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }
}

/// Free scalar variables in read-before-write order.
fn infer_inputs(body: &[Stmt]) -> Vec<String> {
    fn expr(e: &Expr, assigned: &HashSet<String>, out: &mut Vec<String>) {
        match e {
            Expr::Int(_) => {}
            Expr::Var(v) => {
                if !assigned.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Expr::Index(_, i) | Expr::Unary(_, i) => expr(i, assigned, out),
            Expr::Binary(_, l, r) => {
                expr(l, assigned, out);
                expr(r, assigned, out);
            }
        }
    }
    fn block(stmts: &[Stmt], assigned: &mut HashSet<String>, out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::Assign { target, value } => {
                    if let LValue::Element(_, idx) = target {
                        expr(idx, assigned, out);
                    }
                    expr(value, assigned, out);
                    if let LValue::Scalar(n) = target {
                        assigned.insert(n.clone());
                    }
                }
                Stmt::If {
                    cond,
                    then_branch,
                    else_branch,
                } => {
                    expr(cond, assigned, out);
                    block(then_branch, assigned, out);
                    block(else_branch, assigned, out);
                }
                Stmt::For {
                    var,
                    init,
                    cond,
                    step_var,
                    step,
                    body,
                    ..
                } => {
                    expr(init, assigned, out);
                    assigned.insert(var.clone());
                    expr(cond, assigned, out);
                    block(body, assigned, out);
                    expr(step, assigned, out);
                    assigned.insert(step_var.clone());
                }
                Stmt::Return(v) => {
                    if !assigned.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    block(body, &mut HashSet::new(), &mut out);
    out
}

/// Parses surface-language text.
///
/// Without `input` declarations, the scalar inputs are the variables read
/// before they are first assigned.
pub fn parse_surface(text: &str) -> Result<SurfaceProgram, SyntaxError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.program()
}
