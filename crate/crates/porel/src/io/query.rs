//! Recursive-descent parser for the textual query language.
//!
//! ```text
//! query := name
//!        | "select" pred "(" query ")"
//!        | "project" idxlist "(" query ")"
//!        | query ("union" | "dirprod" | "lexprod" | "concat") query
//!        | "dupelim" "(" query ")"
//!        | "singleton" "(" literal,* ")"
//!        | "chain" "(" int ")"
//!        | "accum" accname "(" query ")"
//!        | "accumgby" accname idxlist "(" query ")"
//!        | "(" query ")"
//! pred  := atom | pred "and" pred | pred "or" pred | "not" pred
//!        | "true" | "false" | "(" pred ")"
//! atom  := ".i" ("=" | "!=") (".j" | literal)
//! ```
//!
//! Binary query operators associate to the left at equal precedence;
//! `or` binds weaker than `and`, which binds weaker than `not`.

use std::sync::Arc;

use crate::algebra::{CmpOp, Operand, Predicate, Query};
use crate::model::{DomainValue, TupleValue};

use super::registry;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Int(u64),
    Str(String),
    Attr(usize),
    LParen,
    RParen,
    Comma,
    Eq,
    Ne,
    Eof,
}

impl std::fmt::Display for Token {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier {s}"),
            Token::Int(n) => write!(f, "integer {n}"),
            Token::Str(s) => write!(f, "string {s:?}"),
            Token::Attr(i) => write!(f, "attribute .{i}"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::Comma => write!(f, "','"),
            Token::Eq => write!(f, "'='"),
            Token::Ne => write!(f, "'!='"),
            Token::Eof => write!(f, "end of input"),
        }
    }
}

/// Parse error with 1-based line and column.
#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("{line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

type Spanned = (Token, usize, usize);

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { chars: text.chars().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError { line: self.line, col: self.col, message: message.into() }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>, ParseError> {
        let mut out = Vec::new();
        loop {
            while matches!(self.chars.peek(), Some(c) if c.is_whitespace()) {
                self.bump();
            }
            let (line, col) = (self.line, self.col);
            let Some(&c) = self.chars.peek() else {
                out.push((Token::Eof, line, col));
                return Ok(out);
            };
            let token = match c {
                '(' => {
                    self.bump();
                    Token::LParen
                }
                ')' => {
                    self.bump();
                    Token::RParen
                }
                ',' => {
                    self.bump();
                    Token::Comma
                }
                '=' => {
                    self.bump();
                    Token::Eq
                }
                '!' => {
                    self.bump();
                    if self.chars.peek() == Some(&'=') {
                        self.bump();
                        Token::Ne
                    } else {
                        return Err(self.error("expected '=' after '!'"));
                    }
                }
                '.' => {
                    self.bump();
                    let mut digits = String::new();
                    while matches!(self.chars.peek(), Some(c) if c.is_ascii_digit()) {
                        digits.push(self.bump().unwrap());
                    }
                    if digits.is_empty() {
                        return Err(self.error("expected an attribute index after '.'"));
                    }
                    Token::Attr(digits.parse().map_err(|_| self.error("attribute index too large"))?)
                }
                '"' => {
                    self.bump();
                    let mut s = String::new();
                    loop {
                        match self.bump() {
                            None => return Err(self.error("unterminated string literal")),
                            Some('"') => break,
                            Some('\\') => match self.bump() {
                                Some('"') => s.push('"'),
                                Some('\\') => s.push('\\'),
                                _ => return Err(self.error("unsupported escape sequence")),
                            },
                            Some(c) => s.push(c),
                        }
                    }
                    Token::Str(s)
                }
                c if c.is_ascii_digit() => {
                    let mut digits = String::new();
                    while matches!(self.chars.peek(), Some(c) if c.is_ascii_digit()) {
                        digits.push(self.bump().unwrap());
                    }
                    Token::Int(digits.parse().map_err(|_| self.error("integer too large"))?)
                }
                c if c.is_alphabetic() || c == '_' => {
                    let mut ident = String::new();
                    while matches!(self.chars.peek(), Some(c) if c.is_alphanumeric() || *c == '_')
                    {
                        ident.push(self.bump().unwrap());
                    }
                    Token::Ident(ident)
                }
                c => return Err(self.error(format!("unexpected character {c:?}"))),
            };
            out.push((token, line, col));
        }
    }
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
}

const BINOPS: [&str; 4] = ["union", "dirprod", "lexprod", "concat"];
const KEYWORDS: [&str; 11] = [
    "select", "project", "union", "dirprod", "lexprod", "concat", "dupelim", "singleton",
    "chain", "accum", "accumgby",
];

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].0
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let (_, line, col) = self.tokens[self.pos];
        let _ = &self.tokens[self.pos].0;
        ParseError { line, col, message: message.into() }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].0.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: &Token) -> Result<(), ParseError> {
        if self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {want}, found {}", self.peek())))
        }
    }

    fn query(&mut self) -> Result<Query, ParseError> {
        let mut left = self.term()?;
        loop {
            let op = match self.peek() {
                Token::Ident(name) if BINOPS.contains(&name.as_str()) => name.clone(),
                _ => return Ok(left),
            };
            self.bump();
            let right = self.term()?;
            left = match op.as_str() {
                "union" => Query::Union(Box::new(left), Box::new(right)),
                "dirprod" => Query::ProdDir(Box::new(left), Box::new(right)),
                "lexprod" => Query::ProdLex(Box::new(left), Box::new(right)),
                "concat" => Query::Concat(Box::new(left), Box::new(right)),
                _ => unreachable!(),
            };
        }
    }

    fn term(&mut self) -> Result<Query, ParseError> {
        match self.peek().clone() {
            Token::LParen => {
                self.bump();
                let q = self.query()?;
                self.expect(&Token::RParen)?;
                Ok(q)
            }
            Token::Ident(name) => match name.as_str() {
                "select" => {
                    self.bump();
                    let pred = self.predicate()?;
                    self.expect(&Token::LParen)?;
                    let q = self.query()?;
                    self.expect(&Token::RParen)?;
                    Ok(Query::Select(pred, Box::new(q)))
                }
                "project" => {
                    self.bump();
                    let attrs = self.index_list()?;
                    self.expect(&Token::LParen)?;
                    let q = self.query()?;
                    self.expect(&Token::RParen)?;
                    Ok(Query::Project(attrs, Box::new(q)))
                }
                "dupelim" => {
                    self.bump();
                    self.expect(&Token::LParen)?;
                    let q = self.query()?;
                    self.expect(&Token::RParen)?;
                    Ok(Query::DupElim(Box::new(q)))
                }
                "singleton" => {
                    self.bump();
                    self.expect(&Token::LParen)?;
                    let mut values = Vec::new();
                    if self.peek() != &Token::RParen {
                        values.push(self.literal()?);
                        while self.peek() == &Token::Comma {
                            self.bump();
                            values.push(self.literal()?);
                        }
                    }
                    self.expect(&Token::RParen)?;
                    Ok(Query::Singleton(TupleValue::new(values)))
                }
                "chain" => {
                    self.bump();
                    self.expect(&Token::LParen)?;
                    let n = match self.bump() {
                        Token::Int(n) => n,
                        other => {
                            return Err(self.error_here(format!(
                                "expected a chain length, found {other}"
                            )));
                        }
                    };
                    self.expect(&Token::RParen)?;
                    Ok(Query::ChainConst(n))
                }
                "accum" => {
                    self.bump();
                    let acc = self.accumulator()?;
                    self.expect(&Token::LParen)?;
                    let q = self.query()?;
                    self.expect(&Token::RParen)?;
                    Ok(Query::Accum(acc, Box::new(q)))
                }
                "accumgby" => {
                    self.bump();
                    let acc = self.accumulator()?;
                    let attrs = self.index_list()?;
                    self.expect(&Token::LParen)?;
                    let q = self.query()?;
                    self.expect(&Token::RParen)?;
                    Ok(Query::AccumGroupBy(acc, attrs, Box::new(q)))
                }
                _ if KEYWORDS.contains(&name.as_str()) => {
                    Err(self.error_here(format!("keyword {name} cannot start a query here")))
                }
                _ => {
                    self.bump();
                    Ok(Query::Relation(name))
                }
            },
            other => Err(self.error_here(format!("expected a query, found {other}"))),
        }
    }

    fn accumulator(&mut self) -> Result<Arc<crate::accum::Accumulator>, ParseError> {
        match self.bump() {
            Token::Ident(name) => registry::lookup(&name)
                .ok_or_else(|| self.error_here(format!("unknown accumulator {name}"))),
            other => Err(self.error_here(format!("expected an accumulator name, found {other}"))),
        }
    }

    fn index_list(&mut self) -> Result<Vec<usize>, ParseError> {
        let mut attrs = vec![self.index()?];
        while self.peek() == &Token::Comma {
            self.bump();
            attrs.push(self.index()?);
        }
        Ok(attrs)
    }

    fn index(&mut self) -> Result<usize, ParseError> {
        match self.bump() {
            Token::Int(n) if n >= 1 => Ok(n as usize),
            other => Err(self.error_here(format!("expected a 1-based attribute, found {other}"))),
        }
    }

    fn literal(&mut self) -> Result<DomainValue, ParseError> {
        match self.bump() {
            Token::Int(n) => Ok(DomainValue::Nat(n)),
            Token::Str(s) => Ok(DomainValue::Str(s)),
            other => Err(self.error_here(format!("expected a literal, found {other}"))),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, ParseError> {
        let mut left = self.pred_and()?;
        while matches!(self.peek(), Token::Ident(name) if name == "or") {
            self.bump();
            let right = self.pred_and()?;
            left = Predicate::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn pred_and(&mut self) -> Result<Predicate, ParseError> {
        let mut left = self.pred_unary()?;
        while matches!(self.peek(), Token::Ident(name) if name == "and") {
            self.bump();
            let right = self.pred_unary()?;
            left = Predicate::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn pred_unary(&mut self) -> Result<Predicate, ParseError> {
        match self.peek().clone() {
            Token::Ident(name) if name == "not" => {
                self.bump();
                Ok(Predicate::Not(Box::new(self.pred_unary()?)))
            }
            Token::Ident(name) if name == "true" => {
                self.bump();
                Ok(Predicate::True)
            }
            Token::Ident(name) if name == "false" => {
                self.bump();
                Ok(Predicate::False)
            }
            Token::LParen => {
                self.bump();
                let p = self.predicate()?;
                self.expect(&Token::RParen)?;
                Ok(p)
            }
            Token::Attr(lhs) => {
                self.bump();
                let op = match self.bump() {
                    Token::Eq => CmpOp::Eq,
                    Token::Ne => CmpOp::Ne,
                    other => {
                        return Err(
                            self.error_here(format!("expected '=' or '!=', found {other}"))
                        );
                    }
                };
                let rhs = match self.bump() {
                    Token::Attr(j) => Operand::Attr(j),
                    Token::Int(n) => Operand::Const(DomainValue::Nat(n)),
                    Token::Str(s) => Operand::Const(DomainValue::Str(s)),
                    other => {
                        return Err(self.error_here(format!(
                            "expected an attribute or literal, found {other}"
                        )));
                    }
                };
                Ok(Predicate::Atom { lhs, op, rhs })
            }
            other => Err(self.error_here(format!("expected a predicate, found {other}"))),
        }
    }
}

/// Parses a query; accumulator names resolve against the built-in
/// registry.
pub fn parse_query(text: &str) -> Result<Query, ParseError> {
    let tokens = Lexer::new(text).tokenize()?;
    let mut parser = Parser { tokens, pos: 0 };
    let q = parser.query()?;
    match parser.peek() {
        Token::Eof => Ok(q),
        other => Err(parser.error_here(format!("trailing input: {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example1_query() {
        let q = parse_query(r#"Rest dirprod (select .2 != "12" (Hotel))"#).unwrap();
        let expected = Query::ProdDir(
            Box::new(Query::Relation("Rest".into())),
            Box::new(Query::Select(
                Predicate::ne_const(2, "12"),
                Box::new(Query::Relation("Hotel".into())),
            )),
        );
        assert_eq!(q, expected);
    }

    #[test]
    fn parses_constants() {
        assert_eq!(parse_query("chain(3)").unwrap(), Query::ChainConst(3));
        assert_eq!(
            parse_query(r#"singleton("a", 1)"#).unwrap(),
            Query::Singleton(TupleValue::new(vec![
                DomainValue::Str("a".into()),
                DomainValue::Nat(1)
            ]))
        );
    }

    #[test]
    fn parses_accum_root() {
        let q = parse_query("accum concat (project 1 (R))").unwrap();
        match q {
            Query::Accum(acc, inner) => {
                assert_eq!(acc.key(), "concat");
                assert_eq!(
                    *inner,
                    Query::Project(vec![1], Box::new(Query::Relation("R".into())))
                );
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_accumulator_is_positioned() {
        let err = parse_query("accum nope (R)").unwrap_err();
        assert!(err.message.contains("unknown accumulator"));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn binary_operators_associate_left() {
        let q = parse_query("A union B union C").unwrap();
        assert_eq!(
            q,
            Query::Union(
                Box::new(Query::Union(
                    Box::new(Query::Relation("A".into())),
                    Box::new(Query::Relation("B".into()))
                )),
                Box::new(Query::Relation("C".into()))
            )
        );
    }

    #[test]
    fn predicate_precedence() {
        let q = parse_query(r#"select .1 = "a" or .1 = "b" and not .2 = .3 (R)"#).unwrap();
        let Query::Select(p, _) = q else { panic!() };
        assert_eq!(
            p,
            Predicate::Or(
                Box::new(Predicate::eq_const(1, "a")),
                Box::new(Predicate::And(
                    Box::new(Predicate::eq_const(1, "b")),
                    Box::new(Predicate::Not(Box::new(Predicate::eq_attr(2, 3))))
                ))
            )
        );
    }

    #[test]
    fn parenthesized_predicate_before_query_parens() {
        let q = parse_query("select (true) (R)").unwrap();
        assert_eq!(
            q,
            Query::Select(Predicate::True, Box::new(Query::Relation("R".into())))
        );
    }

    #[test]
    fn errors_carry_positions() {
        let err = parse_query("select .1 =\n= (R)").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(parse_query("").unwrap_err().line, 1);
    }

    #[test]
    fn pretty_printed_queries_reparse_identically() {
        let sources = [
            r#"Rest dirprod (select .2 != "12" (Hotel))"#,
            "project 1,3,2 (select .2 = .4 ((Rest dirprod Hotel)))",
            "dupelim((project 1 (Rest)) union Rest2)",
            "accum sum (chain(4))",
            "accumgby concat 1,2 (R union S)",
            r#"select not (.1 = "x" or false) and true (R concat S)"#,
            r#"singleton("q\"uote", 7) lexprod chain(2)"#,
        ];
        for source in sources {
            let q = parse_query(source).unwrap();
            let printed = q.to_string();
            let q2 = parse_query(&printed)
                .unwrap_or_else(|e| panic!("reparse of {printed:?} failed: {e}"));
            assert_eq!(q, q2, "printed form {printed:?}");
        }
    }
}
