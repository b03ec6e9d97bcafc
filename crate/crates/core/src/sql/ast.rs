//! Syntax tree for the supported SQL subset, with a canonical SQL renderer.

use std::fmt;

use crate::value::format_date;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Eq => "=",
            BinOp::Neq => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }

    pub fn is_arith(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub)
    }

    /// Binding strength; higher binds tighter.
    fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Neq | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum AggFunc {
    Count,
    CountDistinct,
    Sum,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(self) -> &'static str {
        match self {
            AggFunc::Count | AggFunc::CountDistinct => "count",
            AggFunc::Sum => "sum",
            AggFunc::Min => "min",
            AggFunc::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AstExpr {
    Column { qualifier: Option<String>, name: String },
    Int(i64),
    Str(String),
    Date(i32),
    Binary { op: BinOp, lhs: Box<AstExpr>, rhs: Box<AstExpr> },
    /// `expr IN table`: membership in a single-column table.
    InTable { expr: Box<AstExpr>, table: String },
    /// `arg` is `None` for `COUNT(*)`.
    Aggregate { func: AggFunc, arg: Option<Box<AstExpr>> },
    RowNo { partition_by: Vec<AstExpr>, order_by: Vec<OrderItem> },
}

impl AstExpr {
    pub fn column(qualifier: Option<&str>, name: &str) -> AstExpr {
        AstExpr::Column { qualifier: qualifier.map(str::to_string), name: name.to_string() }
    }

    pub fn binary(op: BinOp, lhs: AstExpr, rhs: AstExpr) -> AstExpr {
        AstExpr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            AstExpr::Aggregate { .. } => true,
            AstExpr::Binary { lhs, rhs, .. } => lhs.contains_aggregate() || rhs.contains_aggregate(),
            AstExpr::InTable { expr, .. } => expr.contains_aggregate(),
            _ => false,
        }
    }

    pub fn contains_window(&self) -> bool {
        match self {
            AstExpr::RowNo { .. } => true,
            AstExpr::Binary { lhs, rhs, .. } => lhs.contains_window() || rhs.contains_window(),
            AstExpr::InTable { expr, .. } => expr.contains_window(),
            _ => false,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            AstExpr::Binary { op, .. } => op.precedence(),
            AstExpr::InTable { .. } => 3,
            _ => u8::MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderItem {
    pub expr: AstExpr,
    pub desc: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SelectItem {
    Wildcard,
    Expr { expr: AstExpr, alias: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRef {
    pub name: String,
    pub alias: Option<String>,
}

impl TableRef {
    /// Name the table's columns are qualified by.
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

/// Inner join; `on` is `None` for a cross product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinClause {
    pub table: TableRef,
    pub on: Option<AstExpr>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Select {
    pub distinct: bool,
    pub items: Vec<SelectItem>,
    pub from: TableRef,
    pub joins: Vec<JoinClause>,
    pub selection: Option<AstExpr>,
    pub group_by: Vec<AstExpr>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cte {
    pub name: String,
    pub select: Select,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub ctes: Vec<Cte>,
    pub body: Select,
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

impl fmt::Display for AstExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AstExpr::Column { qualifier: Some(q), name } => write!(f, "{q}.{name}"),
            AstExpr::Column { qualifier: None, name } => f.write_str(name),
            AstExpr::Int(v) => write!(f, "{v}"),
            AstExpr::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            AstExpr::Date(d) => write!(f, "DATE '{}'", format_date(*d)),
            AstExpr::Binary { op, lhs, rhs } => {
                let p = op.precedence();
                if lhs.precedence() < p {
                    write!(f, "({lhs})")?;
                } else {
                    write!(f, "{lhs}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left-associative: equal precedence on the right needs parens
                if rhs.precedence() <= p {
                    write!(f, "({rhs})")
                } else {
                    write!(f, "{rhs}")
                }
            }
            AstExpr::InTable { expr, table } => {
                if expr.precedence() <= 3 {
                    write!(f, "({expr}) IN {table}")
                } else {
                    write!(f, "{expr} IN {table}")
                }
            }
            AstExpr::Aggregate { func, arg } => match (func, arg) {
                (AggFunc::CountDistinct, Some(a)) => write!(f, "COUNT(DISTINCT {a})"),
                (_, Some(a)) => write!(f, "{}({a})", func.name().to_ascii_uppercase()),
                (_, None) => write!(f, "{}(*)", func.name().to_ascii_uppercase()),
            },
            AstExpr::RowNo { partition_by, order_by } => {
                f.write_str("row_no() OVER (")?;
                if !partition_by.is_empty() {
                    f.write_str("PARTITION BY ")?;
                    write_list(f, partition_by)?;
                    if !order_by.is_empty() {
                        f.write_str(" ")?;
                    }
                }
                if !order_by.is_empty() {
                    f.write_str("ORDER BY ")?;
                    write_list(f, order_by)?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for OrderItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)?;
        if self.desc {
            f.write_str(" DESC")?;
        }
        Ok(())
    }
}

impl fmt::Display for SelectItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectItem::Wildcard => f.write_str("*"),
            SelectItem::Expr { expr, alias: Some(a) } => write!(f, "{expr} AS {a}"),
            SelectItem::Expr { expr, alias: None } => write!(f, "{expr}"),
        }
    }
}

impl fmt::Display for TableRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.alias {
            Some(a) => write!(f, "{} {a}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

impl fmt::Display for Select {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SELECT ")?;
        if self.distinct {
            f.write_str("DISTINCT ")?;
        }
        write_list(f, &self.items)?;
        write!(f, "\nFROM {}", self.from)?;
        for j in &self.joins {
            match &j.on {
                Some(on) => write!(f, " JOIN {} ON {on}", j.table)?,
                None => write!(f, " CROSS JOIN {}", j.table)?,
            }
        }
        if let Some(w) = &self.selection {
            write!(f, "\nWHERE {w}")?;
        }
        if !self.group_by.is_empty() {
            f.write_str("\nGROUP BY ")?;
            write_list(f, &self.group_by)?;
        }
        if !self.order_by.is_empty() {
            f.write_str("\nORDER BY ")?;
            write_list(f, &self.order_by)?;
        }
        if let Some(l) = self.limit {
            write!(f, "\nLIMIT {l}")?;
        }
        Ok(())
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.ctes.is_empty() {
            f.write_str("WITH ")?;
            for (i, c) in self.ctes.iter().enumerate() {
                if i > 0 {
                    f.write_str(",\n")?;
                }
                write!(f, "{} AS (\n{}\n)", c.name, c.select)?;
            }
            f.write_str("\n")?;
        }
        write!(f, "{}", self.body)
    }
}
