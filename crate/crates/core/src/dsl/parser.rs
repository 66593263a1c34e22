//! Pratt parser. Binding powers: `+ -` (1,2), `* /` (3,4), prefix `-` 6,
//! `^` (8,7) so that `-x^2 = -(x^2)` and `2^3^2 = 2^(3^2)`.

use super::expr::{BinOp, Constant, Expr, Func, Var};
use super::lexer::{tokenize, Tok, Token};
use super::SyntaxError;

const PREFIX_NEG_BP: u8 = 6;
const OPERAND: &[&str] = &["number", "identifier", "'('", "'-'"];

pub fn parse_expr(src: &str) -> Result<Expr, SyntaxError> {
    let mut p = Parser::new(src)?;
    let e = p.expr(0)?;
    p.expect_end()?;
    Ok(e)
}

/// Parses `(a, b, c)` into three expressions.
pub fn parse_tuple3(src: &str) -> Result<[Expr; 3], SyntaxError> {
    let mut p = Parser::new(src)?;
    p.expect(Tok::LParen, "'('")?;
    let a = p.expr(0)?;
    p.expect(Tok::Comma, "','")?;
    let b = p.expr(0)?;
    p.expect(Tok::Comma, "','")?;
    let c = p.expr(0)?;
    p.expect(Tok::RParen, "')'")?;
    p.expect_end()?;
    Ok([a, b, c])
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, SyntaxError> {
        Ok(Self {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    /// Offset used in diagnostics: at end of input, the last real token.
    fn offset(&self) -> usize {
        let t = &self.toks[self.pos];
        if t.tok == Tok::Eof && self.pos > 0 {
            self.toks[self.pos - 1].offset
        } else {
            t.offset
        }
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn err(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError::new(self.offset(), expected)
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.err(&[name]))
        }
    }

    fn expect_end(&self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.err(&["operator", "end of input"]))
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, SyntaxError> {
        let mut lhs = self.prefix()?;
        loop {
            let (op, lbp, rbp) = match self.peek() {
                Tok::Plus => (BinOp::Add, 1, 2),
                Tok::Minus => (BinOp::Sub, 1, 2),
                Tok::Star => (BinOp::Mul, 3, 4),
                Tok::Slash => (BinOp::Div, 3, 4),
                Tok::Caret => (BinOp::Pow, 8, 7),
                _ => break,
            };
            if lbp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.expr(rbp)?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Expr, SyntaxError> {
        let offset = self.offset();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Minus => {
                self.bump();
                Ok(Expr::Neg(Box::new(self.expr(PREFIX_NEG_BP)?)))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr(0)?;
                self.expect(Tok::RParen, "')'")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.bump();
                match name.as_str() {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    "z" => Ok(Expr::Var(Var::Z)),
                    "pi" => Ok(Expr::Const(Constant::Pi)),
                    "e" => Ok(Expr::Const(Constant::E)),
                    _ => match Func::from_name(&name) {
                        Some(f) => {
                            self.expect(Tok::LParen, "'('")?;
                            let arg = self.expr(0)?;
                            self.expect(Tok::RParen, "')'")?;
                            Ok(Expr::Call(f, Box::new(arg)))
                        }
                        None => {
                            let mut expected: Vec<&str> = vec!["x", "y", "z", "pi", "e"];
                            expected.extend(Func::ALL.iter().map(|f| f.name()));
                            Err(SyntaxError::new(offset, &expected))
                        }
                    },
                }
            }
            _ => Err(self.err(OPERAND)),
        }
    }
}
