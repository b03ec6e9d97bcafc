//! Recursive-descent parser. Precedence, loosest first: OR, AND, comparison
//! (including `IN`), additive.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use crate::error::{Error, Result};
use crate::value::parse_date;

const RESERVED: &[&str] = &[
    "select", "distinct", "from", "where", "group", "by", "order", "limit", "join", "inner", "on", "as",
    "and", "or", "in", "with", "over", "partition", "asc", "desc", "days", "day", "date", "left", "right",
    "full", "outer", "cross", "union", "intersect", "except", "having", "not", "recursive",
];

pub fn parse(sql: &str) -> Result<Query> {
    let tokens = tokenize(sql)?;
    let mut p = Parser { tokens, pos: 0 };
    let q = p.query()?;
    while p.eat(&Tok::Semi) {}
    match p.peek() {
        Tok::Eof => Ok(q),
        Tok::Word(w) if matches!(w.as_str(), "union" | "intersect" | "except") => {
            Err(p.unsupported(&format!("{} (set operations unsupported)", w.to_ascii_uppercase())))
        }
        _ => Err(p.expected("end of statement")),
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn error(&self, message: String) -> Error {
        let t = &self.tokens[self.pos];
        Error::Syntax { line: t.line, column: t.column, message }
    }

    fn expected(&self, what: &str) -> Error {
        let found = match self.peek() {
            Tok::Eof => "end of input".to_string(),
            Tok::Word(w) => format!("`{w}`"),
            other => format!("{other:?}"),
        };
        self.error(format!("expected {what}, found {found}"))
    }

    fn unsupported(&self, what: &str) -> Error {
        let t = &self.tokens[self.pos];
        Error::Unsupported(format!("{what} at line {}, column {}", t.line, t.column))
    }

    fn expect(&mut self, t: Tok, what: &str) -> Result<()> {
        if self.eat(&t) {
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.expected(&format!("`{}`", kw.to_ascii_uppercase())))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Word(w) if !RESERVED.contains(&w.as_str()) => {
                self.bump();
                Ok(w)
            }
            _ => Err(self.expected("identifier")),
        }
    }

    fn query(&mut self) -> Result<Query> {
        let mut ctes = Vec::new();
        if self.eat_kw("with") {
            if self.is_kw("recursive") {
                return Err(self.unsupported("WITH RECURSIVE"));
            }
            loop {
                let name = self.ident()?;
                self.expect_kw("as")?;
                self.expect(Tok::LParen, "`(`")?;
                if self.is_kw("with") {
                    return Err(self.unsupported("nested WITH"));
                }
                let select = self.select()?;
                self.expect(Tok::RParen, "`)`")?;
                ctes.push(Cte { name, select });
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let body = self.select()?;
        Ok(Query { ctes, body })
    }

    fn select(&mut self) -> Result<Select> {
        self.expect_kw("select")?;
        let distinct = self.eat_kw("distinct");
        let mut items = Vec::new();
        loop {
            items.push(self.select_item()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect_kw("from")?;
        let from = self.table_ref()?;
        let mut joins = Vec::new();
        loop {
            if self.eat(&Tok::Comma) {
                joins.push(JoinClause { table: self.table_ref()?, on: None });
            } else if self.eat_kw("cross") {
                self.expect_kw("join")?;
                joins.push(JoinClause { table: self.table_ref()?, on: None });
            } else if self.is_kw("join") || self.is_kw("inner") {
                if self.eat_kw("inner") && !self.is_kw("join") {
                    return Err(self.expected("`JOIN`"));
                }
                self.bump();
                let table = self.table_ref()?;
                self.expect_kw("on")?;
                let on = self.expr()?;
                joins.push(JoinClause { table, on: Some(on) });
            } else if self.is_kw("left") || self.is_kw("right") || self.is_kw("full") || self.is_kw("outer") {
                return Err(self.unsupported("OUTER JOIN unsupported"));
            } else {
                break;
            }
        }
        let selection = if self.eat_kw("where") { Some(self.expr()?) } else { None };
        let mut group_by = Vec::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            loop {
                group_by.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        if self.is_kw("having") {
            return Err(self.unsupported("HAVING"));
        }
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            order_by = self.order_list()?;
        }
        let limit = if self.eat_kw("limit") {
            match self.bump() {
                Tok::Int(n) if n >= 0 => Some(n as u64),
                _ => {
                    self.pos -= 1;
                    return Err(self.expected("non-negative LIMIT count"));
                }
            }
        } else {
            None
        };
        if self.is_kw("union") || self.is_kw("intersect") || self.is_kw("except") {
            return Err(self.unsupported("set operations unsupported"));
        }
        Ok(Select { distinct, items, from, joins, selection, group_by, order_by, limit })
    }

    fn order_list(&mut self) -> Result<Vec<OrderItem>> {
        let mut out = Vec::new();
        loop {
            let expr = self.expr()?;
            let desc = if self.eat_kw("desc") {
                true
            } else {
                self.eat_kw("asc");
                false
            };
            out.push(OrderItem { expr, desc });
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        Ok(out)
    }

    fn select_item(&mut self) -> Result<SelectItem> {
        if self.eat(&Tok::Star) {
            return Ok(SelectItem::Wildcard);
        }
        let expr = self.expr()?;
        let alias = self.alias()?;
        Ok(SelectItem::Expr { expr, alias })
    }

    /// `AS name`, or a bare name that is not a keyword.
    fn alias(&mut self) -> Result<Option<String>> {
        if self.eat_kw("as") || matches!(self.peek(), Tok::Word(w) if !RESERVED.contains(&w.as_str())) {
            return Ok(Some(self.ident()?));
        }
        Ok(None)
    }

    fn table_ref(&mut self) -> Result<TableRef> {
        if *self.peek() == Tok::LParen {
            return Err(self.unsupported("subquery in FROM"));
        }
        let name = self.ident()?;
        let alias = self.alias()?;
        Ok(TableRef { name, alias })
    }

    fn expr(&mut self) -> Result<AstExpr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> Result<AstExpr> {
        let mut lhs = self.and_expr()?;
        while self.eat_kw("or") {
            let rhs = self.and_expr()?;
            lhs = AstExpr::binary(BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<AstExpr> {
        let mut lhs = self.cmp_expr()?;
        while self.eat_kw("and") {
            let rhs = self.cmp_expr()?;
            lhs = AstExpr::binary(BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self) -> Result<AstExpr> {
        if self.is_kw("not") {
            return Err(self.unsupported("NOT"));
        }
        let lhs = self.add_expr()?;
        let op = match self.peek() {
            Tok::Eq => Some(BinOp::Eq),
            Tok::Neq => Some(BinOp::Neq),
            Tok::Lt => Some(BinOp::Lt),
            Tok::Le => Some(BinOp::Le),
            Tok::Gt => Some(BinOp::Gt),
            Tok::Ge => Some(BinOp::Ge),
            Tok::Word(w) if w == "in" => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    return Err(self.unsupported("IN with a subquery or value list"));
                }
                let table = self.ident()?;
                return Ok(AstExpr::InTable { expr: Box::new(lhs), table });
            }
            Tok::Word(w) if w == "not" => return Err(self.unsupported("NOT")),
            _ => None,
        };
        match op {
            Some(op) => {
                self.bump();
                let rhs = self.add_expr()?;
                Ok(AstExpr::binary(op, lhs, rhs))
            }
            None => Ok(lhs),
        }
    }

    fn add_expr(&mut self) -> Result<AstExpr> {
        let mut lhs = self.primary()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.primary()?;
            lhs = AstExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn int_literal(&mut self, v: i64) -> AstExpr {
        // `N DAYS` is an interval normalised to a day count
        if self.is_kw("days") || self.is_kw("day") {
            self.bump();
        }
        AstExpr::Int(v)
    }

    fn primary(&mut self) -> Result<AstExpr> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(self.int_literal(v))
            }
            Tok::Minus => {
                self.bump();
                match self.bump() {
                    Tok::Int(v) => Ok(self.int_literal(-v)),
                    _ => {
                        self.pos -= 1;
                        Err(self.expected("integer literal after `-`"))
                    }
                }
            }
            Tok::Str(s) => {
                self.bump();
                Ok(AstExpr::Str(s))
            }
            Tok::LParen => {
                self.bump();
                if self.is_kw("select") {
                    return Err(self.unsupported("scalar subquery"));
                }
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Word(w) if w == "date" => {
                self.bump();
                match self.bump() {
                    Tok::Str(s) => parse_date(&s).map(AstExpr::Date).ok_or_else(|| {
                        self.pos -= 1;
                        self.error(format!("invalid date literal `{s}`"))
                    }),
                    _ => {
                        self.pos -= 1;
                        Err(self.expected("date string"))
                    }
                }
            }
            Tok::Word(w) if RESERVED.contains(&w.as_str()) => Err(self.expected("expression")),
            Tok::Word(w) => {
                if *self.peek_at(1) == Tok::LParen {
                    return self.call(&w);
                }
                self.bump();
                if self.eat(&Tok::Dot) {
                    let name = self.ident()?;
                    Ok(AstExpr::Column { qualifier: Some(w), name })
                } else {
                    Ok(AstExpr::Column { qualifier: None, name: w })
                }
            }
            _ => Err(self.expected("expression")),
        }
    }

    fn call(&mut self, name: &str) -> Result<AstExpr> {
        let func = match name {
            "count" => AggFunc::Count,
            "sum" => AggFunc::Sum,
            "min" => AggFunc::Min,
            "max" => AggFunc::Max,
            "row_no" | "row_number" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                self.expect(Tok::RParen, "`)`")?;
                return self.window();
            }
            other => return Err(self.unsupported(&format!("function `{other}`"))),
        };
        self.bump();
        self.expect(Tok::LParen, "`(`")?;
        if func == AggFunc::Count && self.eat(&Tok::Star) {
            self.expect(Tok::RParen, "`)`")?;
            return Ok(AstExpr::Aggregate { func, arg: None });
        }
        let func = if self.eat_kw("distinct") {
            if func != AggFunc::Count {
                return Err(self.unsupported(&format!("{}(DISTINCT ...)", name.to_ascii_uppercase())));
            }
            AggFunc::CountDistinct
        } else {
            func
        };
        let arg = self.expr()?;
        self.expect(Tok::RParen, "`)`")?;
        Ok(AstExpr::Aggregate { func, arg: Some(Box::new(arg)) })
    }

    fn window(&mut self) -> Result<AstExpr> {
        self.expect_kw("over")?;
        self.expect(Tok::LParen, "`(`")?;
        let mut partition_by = Vec::new();
        if self.eat_kw("partition") {
            self.expect_kw("by")?;
            loop {
                partition_by.push(self.expr()?);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        let mut order_by = Vec::new();
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            order_by = self.order_list()?;
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(AstExpr::RowNo { partition_by, order_by })
    }
}
