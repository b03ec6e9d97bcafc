//! Name resolution and plan construction from the syntax tree.

use std::collections::BTreeMap;

use super::expr::{arith_type, Expr, ExprType};
use super::logical::{display_names, AggCall, Column, LogicalPlan, Node, NodeId, Op, SortKey};
use crate::catalog::{Catalog, Distribution, SecurityLevel};
use crate::error::{Error, Result};
use crate::sql::ast::{AggFunc, AstExpr, BinOp, OrderItem, Query, Select, SelectItem, TableRef};
use crate::value::{Value, ValueType};

/// Parses and resolves `sql` against `catalog`.
pub fn compile(sql: &str, catalog: &Catalog) -> Result<LogicalPlan> {
    resolve(&crate::sql::parse(sql)?, catalog)
}

pub fn resolve(query: &Query, catalog: &Catalog) -> Result<LogicalPlan> {
    let mut b = Builder { catalog, nodes: Vec::new(), ctes: BTreeMap::new() };
    for cte in &query.ctes {
        if b.ctes.contains_key(&cte.name) || catalog.tables.contains_key(&cte.name) {
            return Err(Error::Resolve(format!("WITH name `{}` is already defined", cte.name)));
        }
        let id = b.select(&cte.select)?;
        b.ctes.insert(cte.name.clone(), id);
    }
    let root = b.select(&query.body)?;
    Ok(LogicalPlan { nodes: b.nodes, root, ctes: b.ctes })
}

fn resolve_err(msg: impl Into<String>) -> Error {
    Error::Resolve(msg.into())
}

/// Most sensitive level an expression reads, including `IN` tables.
pub fn level_of(e: &Expr, schema: &[Column], catalog: &Catalog) -> SecurityLevel {
    match e {
        Expr::Column(i) => schema[*i].level,
        Expr::Literal(_) => SecurityLevel::Public,
        Expr::Binary { lhs, rhs, .. } => level_of(lhs, schema, catalog).max(level_of(rhs, schema, catalog)),
        Expr::InTable { expr, table } => {
            let set_level = catalog
                .tables
                .get(table)
                .map(|t| t.columns.iter().map(|c| c.level).max().unwrap_or(SecurityLevel::Public))
                .unwrap_or(SecurityLevel::Public);
            level_of(expr, schema, catalog).max(set_level)
        }
    }
}

fn type_of(e: &Expr, schema: &[Column], catalog: &Catalog) -> Result<ExprType> {
    match e {
        Expr::Column(i) => Ok(ExprType::Scalar(schema[*i].value_type)),
        Expr::Literal(v) => Ok(ExprType::Scalar(v.value_type().unwrap_or(ValueType::Int64))),
        Expr::Binary { op, lhs, rhs } => {
            let (l, r) = (type_of(lhs, schema, catalog)?, type_of(rhs, schema, catalog)?);
            match (op, l, r) {
                (BinOp::And | BinOp::Or, ExprType::Bool, ExprType::Bool) => Ok(ExprType::Bool),
                (BinOp::And | BinOp::Or, _, _) => {
                    Err(resolve_err(format!("type mismatch: operands of {} must be predicates", op.symbol())))
                }
                (_, ExprType::Scalar(a), ExprType::Scalar(b)) if op.is_arith() => arith_type(*op, a, b)
                    .map(ExprType::Scalar)
                    .ok_or_else(|| resolve_err(format!("type mismatch: cannot apply `{}` to {a} and {b}", op.symbol()))),
                (_, ExprType::Scalar(a), ExprType::Scalar(b)) => {
                    if a == b {
                        Ok(ExprType::Bool)
                    } else {
                        Err(resolve_err(format!("type mismatch: cannot compare {a} with {b}")))
                    }
                }
                _ => Err(resolve_err(format!("type mismatch: `{}` applied to a predicate", op.symbol()))),
            }
        }
        Expr::InTable { expr, table } => {
            let def = catalog.table(table)?;
            match type_of(expr, schema, catalog)? {
                ExprType::Scalar(t) if t == def.columns[0].value_type => Ok(ExprType::Bool),
                ExprType::Scalar(t) => Err(resolve_err(format!(
                    "type mismatch: {t} value tested against `{table}` of {}",
                    def.columns[0].value_type
                ))),
                ExprType::Bool => Err(resolve_err("type mismatch: predicate used as an IN operand")),
            }
        }
    }
}

/// A column visible in a FROM scope.
#[derive(Debug, Clone)]
struct ScopeCol {
    binding: Option<String>,
    col: Column,
}

#[derive(Debug, Clone, Default)]
struct Scope {
    cols: Vec<ScopeCol>,
    /// Union-find over positions equated by join conditions.
    class: Vec<usize>,
}

impl Scope {
    fn push(&mut self, binding: Option<&str>, col: Column) {
        self.class.push(self.cols.len());
        self.cols.push(ScopeCol { binding: binding.map(str::to_string), col });
    }

    fn find(&self, mut i: usize) -> usize {
        while self.class[i] != i {
            i = self.class[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.class[ra.max(rb)] = ra.min(rb);
        }
    }

    fn columns(&self) -> Vec<Column> {
        self.cols.iter().map(|c| c.col.clone()).collect()
    }

    fn lookup(&self, qualifier: Option<&str>, name: &str, limit: usize) -> Result<usize> {
        let visible = &self.cols[..limit];
        match qualifier {
            Some(q) => {
                if !visible.iter().any(|c| c.binding.as_deref() == Some(q)) {
                    return Err(resolve_err(format!("unknown table or alias `{q}`")));
                }
                visible
                    .iter()
                    .position(|c| c.binding.as_deref() == Some(q) && c.col.name == name)
                    .ok_or_else(|| resolve_err(format!("unknown column `{q}.{name}`")))
            }
            None => {
                let hits: Vec<usize> = (0..limit).filter(|i| visible[*i].col.name == name).collect();
                match hits.as_slice() {
                    [] => Err(resolve_err(format!("unknown column `{name}`"))),
                    [one] => Ok(*one),
                    [first, rest @ ..] => {
                        // columns equated by a join condition are interchangeable
                        if rest.iter().all(|i| self.find(*i) == self.find(*first)) {
                            Ok(*first)
                        } else {
                            Err(resolve_err(format!("ambiguous column `{name}`")))
                        }
                    }
                }
            }
        }
    }
}

struct Builder<'c> {
    catalog: &'c Catalog,
    nodes: Vec<Node>,
    ctes: BTreeMap<String, NodeId>,
}

/// Where an aggregate-query expression is evaluated.
struct AggContext<'a> {
    group: &'a [Expr],
    calls: &'a mut Vec<AggCall>,
}

impl<'c> Builder<'c> {
    fn add(&mut self, op: Op, children: Vec<NodeId>, schema: Vec<Column>) -> NodeId {
        self.nodes.push(Node { op, children, schema });
        self.nodes.len() - 1
    }

    fn schema(&self, id: NodeId) -> Vec<Column> {
        self.nodes[id].schema.clone()
    }

    fn level(&self, e: &Expr, schema: &[Column]) -> SecurityLevel {
        level_of(e, schema, self.catalog)
    }

    fn scalar(&self, e: &Expr, schema: &[Column]) -> Result<ValueType> {
        match type_of(e, schema, self.catalog)? {
            ExprType::Scalar(t) => Ok(t),
            ExprType::Bool => Err(resolve_err("a predicate is not allowed here")),
        }
    }

    fn predicate(&self, e: &Expr, schema: &[Column]) -> Result<()> {
        match type_of(e, schema, self.catalog)? {
            ExprType::Bool => Ok(()),
            ExprType::Scalar(t) => Err(resolve_err(format!("condition must be a predicate, found {t} expression"))),
        }
    }

    /// Binds a scalar or predicate expression over a FROM scope. Aggregates
    /// and window functions are rejected.
    fn bind(&self, e: &AstExpr, scope: &Scope, limit: usize, what: &str) -> Result<Expr> {
        Ok(match e {
            AstExpr::Column { qualifier, name } => Expr::Column(scope.lookup(qualifier.as_deref(), name, limit)?),
            AstExpr::Int(v) => Expr::Literal(Value::Int(*v)),
            AstExpr::Str(s) => Expr::Literal(Value::Text(s.clone())),
            AstExpr::Date(d) => Expr::Literal(Value::Date(*d)),
            AstExpr::Binary { op, lhs, rhs } => {
                Expr::binary(*op, self.bind(lhs, scope, limit, what)?, self.bind(rhs, scope, limit, what)?)
            }
            AstExpr::InTable { expr, table } => {
                self.check_membership_table(table)?;
                Expr::InTable { expr: Box::new(self.bind(expr, scope, limit, what)?), table: table.clone() }
            }
            AstExpr::Aggregate { .. } => return Err(resolve_err(format!("aggregate not allowed in {what}"))),
            AstExpr::RowNo { .. } => return Err(resolve_err(format!("row_no() not allowed in {what}"))),
        })
    }

    fn check_membership_table(&self, table: &str) -> Result<()> {
        if self.ctes.contains_key(table) {
            return Err(Error::Unsupported(format!("IN over WITH result `{table}`")));
        }
        let def = self.catalog.table(table)?;
        if def.columns.len() != 1 {
            return Err(resolve_err(format!("`IN {table}` requires a single-column table")));
        }
        if def.distribution != Distribution::Replicated || def.columns[0].level != SecurityLevel::Public {
            return Err(resolve_err(format!("`IN {table}` requires a replicated table with a public column")));
        }
        Ok(())
    }

    fn source(&mut self, t: &TableRef) -> Result<(NodeId, Vec<Column>)> {
        let binding = t.binding().to_string();
        if let Some(&id) = self.ctes.get(&t.name) {
            let cols = self.schema(id).into_iter().map(|c| Column { qualifier: Some(binding.clone()), ..c }).collect();
            return Ok((id, cols));
        }
        let def = self.catalog.table(&t.name)?;
        let cols: Vec<Column> = def
            .columns
            .iter()
            .map(|c| Column { name: c.name.clone(), qualifier: Some(binding.clone()), value_type: c.value_type, level: c.level })
            .collect();
        let op = Op::Scan { table: def.name.clone(), columns: (0..def.columns.len()).collect() };
        let id = self.add(op, vec![], cols.clone());
        Ok((id, cols))
    }

    fn select(&mut self, sel: &Select) -> Result<NodeId> {
        // FROM items and their positions in the joined scope
        let mut scope = Scope::default();
        let mut items: Vec<(NodeId, usize, usize)> = Vec::new();
        let mut bindings: Vec<String> = Vec::new();
        let refs: Vec<&TableRef> = std::iter::once(&sel.from).chain(sel.joins.iter().map(|j| &j.table)).collect();
        for t in &refs {
            if bindings.contains(&t.binding().to_string()) {
                return Err(resolve_err(format!("duplicate table alias `{}`", t.binding())));
            }
            bindings.push(t.binding().to_string());
            let (id, cols) = self.source(t)?;
            let start = scope.cols.len();
            for c in cols {
                let b = c.qualifier.clone();
                scope.push(b.as_deref(), c);
            }
            items.push((id, start, scope.cols.len() - start));
        }
        let item_of = |pos: usize| items.iter().position(|(_, s, l)| pos >= *s && pos < s + l).expect("in scope");

        // ON conditions see only the items joined so far
        let mut join_conds: Vec<Vec<Expr>> = vec![Vec::new(); items.len()];
        let mut pushed: Vec<Vec<Expr>> = vec![Vec::new(); items.len()];
        for (j, clause) in sel.joins.iter().enumerate() {
            let Some(on) = &clause.on else { continue };
            let limit = items[j + 1].1 + items[j + 1].2;
            let bound = self.bind(on, &scope, limit, "ON")?;
            self.predicate(&bound, &scope.columns()[..limit])?;
            for c in bound.conjuncts() {
                if let Expr::Binary { op: BinOp::Eq, lhs, rhs } = &c {
                    if let (Expr::Column(a), Expr::Column(b)) = (lhs.as_ref(), rhs.as_ref()) {
                        scope.union(*a, *b);
                    }
                }
                let touched: Vec<usize> = c.columns().into_iter().map(item_of).collect();
                match touched.first() {
                    Some(first) if touched.iter().all(|i| i == first) => pushed[*first].push(c),
                    _ => join_conds[j + 1].push(c),
                }
            }
        }
        let full = scope.cols.len();
        let mut top_conds = Vec::new();
        if let Some(w) = &sel.selection {
            let bound = self.bind(w, &scope, full, "WHERE")?;
            self.predicate(&bound, &scope.columns())?;
            for c in bound.conjuncts() {
                let touched: Vec<usize> = c.columns().into_iter().map(item_of).collect();
                match touched.first() {
                    Some(first) if touched.iter().all(|i| i == first) => pushed[*first].push(c),
                    _ => top_conds.push(c),
                }
            }
        }

        // single-item conditions move below the joins
        let mut cur = None;
        for (i, (id, start, _)) in items.iter().enumerate() {
            let start = *start;
            let local: Vec<Expr> = pushed[i].iter().map(|e| e.remap(&|p| p - start)).collect();
            let mut node = *id;
            if !local.is_empty() {
                // a shared WITH node is filtered through a fresh operator
                let schema = self.source_schema(&scope, &items[i]);
                node = self.add(Op::Filter { predicate: Expr::and_all(local).expect("non-empty") }, vec![node], schema);
            }
            cur = Some(match cur {
                None => node,
                Some(left) => {
                    let mut schema = self.joined_schema(&scope, &items[..i]);
                    schema.extend(self.source_schema(&scope, &items[i]));
                    let predicate = Expr::and_all(std::mem::take(&mut join_conds[i]));
                    self.add(Op::Join { predicate }, vec![left, node], schema)
                }
            });
        }
        let mut cur = cur.expect("FROM has at least one item");
        let from_schema = scope.columns();
        cur = self.filter_with_schema(cur, top_conds, from_schema);

        let is_agg = !sel.group_by.is_empty()
            || sel.items.iter().any(|i| matches!(i, SelectItem::Expr { expr, .. } if expr.contains_aggregate()))
            || sel.order_by.iter().any(|o| o.expr.contains_aggregate());

        let (mut cur, out_exprs, out_names, pre_scope) = if is_agg {
            let (node, exprs, names) = self.aggregate_select(sel, cur, &scope)?;
            (node, exprs, names, None)
        } else {
            let (node, exprs, names, pre) = self.plain_select(sel, cur, scope)?;
            (node, exprs, names, Some(pre))
        };

        // ORDER BY against the output, or below the projection when it
        // needs columns the projection drops
        let input_schema = self.schema(cur);
        let mut out_schema = Vec::new();
        for (e, name) in out_exprs.iter().zip(&out_names) {
            let value_type = self.scalar(e, &input_schema)?;
            out_schema.push(Column { name: name.clone(), qualifier: None, value_type, level: self.level(e, &input_schema) });
        }
        let identity = out_exprs.len() == input_schema.len()
            && out_exprs.iter().enumerate().all(|(i, e)| e.as_column() == Some(i))
            && out_names.iter().zip(&input_schema).all(|(n, c)| *n == c.name);

        let sort_on_output = self.order_keys_on_output(sel, &out_names, &out_exprs, pre_scope.as_ref(), is_agg)?;
        if sort_on_output.is_none() {
            if sel.distinct || is_agg {
                return Err(resolve_err("ORDER BY expression must appear in the select list"));
            }
            let pre = pre_scope.as_ref().expect("non-aggregate scope");
            let mut keys = Vec::new();
            for o in &sel.order_by {
                let e = match self.alias_target(&o.expr, &out_names, &out_exprs) {
                    Some(e) => e,
                    None => self.bind(&o.expr, pre, pre.cols.len(), "ORDER BY")?,
                };
                self.scalar(&e, &input_schema)?;
                keys.push(SortKey { expr: e, desc: o.desc });
            }
            cur = self.add(Op::Sort { keys }, vec![cur], input_schema.clone());
        }
        if !identity {
            cur = self.add(Op::Project { exprs: out_exprs }, vec![cur], out_schema.clone());
        }
        if sel.distinct {
            cur = self.add(Op::Distinct, vec![cur], out_schema.clone());
        }
        if let Some(keys) = sort_on_output {
            if !keys.is_empty() {
                cur = self.add(Op::Sort { keys }, vec![cur], out_schema.clone());
            }
        }
        if let Some(k) = sel.limit {
            let schema = self.schema(cur);
            cur = self.add(Op::Limit { k }, vec![cur], schema);
        }
        Ok(cur)
    }

    fn source_schema(&self, scope: &Scope, item: &(NodeId, usize, usize)) -> Vec<Column> {
        scope.cols[item.1..item.1 + item.2].iter().map(|c| c.col.clone()).collect()
    }

    fn joined_schema(&self, scope: &Scope, items: &[(NodeId, usize, usize)]) -> Vec<Column> {
        items.iter().flat_map(|it| self.source_schema(scope, it)).collect()
    }

    fn filter_with_schema(&mut self, input: NodeId, conds: Vec<Expr>, schema: Vec<Column>) -> NodeId {
        match Expr::and_all(conds) {
            Some(predicate) => self.add(Op::Filter { predicate }, vec![input], schema),
            None => input,
        }
    }

    /// SELECT list of a non-aggregate query. Window functions become
    /// operators below the projection.
    fn plain_select(
        &mut self,
        sel: &Select,
        mut cur: NodeId,
        mut scope: Scope,
    ) -> Result<(NodeId, Vec<Expr>, Vec<String>, Scope)> {
        let mut exprs = Vec::new();
        let mut names = Vec::new();
        for (i, item) in sel.items.iter().enumerate() {
            match item {
                SelectItem::Wildcard => {
                    let n = scope.cols.iter().filter(|c| c.binding.is_some()).count();
                    for p in 0..n {
                        exprs.push(Expr::Column(p));
                        names.push(scope.cols[p].col.name.clone());
                    }
                }
                SelectItem::Expr { expr: AstExpr::RowNo { partition_by, order_by }, alias } => {
                    let n = scope.cols.len();
                    let partition_by: Vec<Expr> =
                        partition_by.iter().map(|e| self.bind(e, &scope, n, "PARTITION BY")).collect::<Result<_>>()?;
                    let order_by = self.sort_keys(order_by, &scope)?;
                    let schema = scope.columns();
                    for e in partition_by.iter().chain(order_by.iter().map(|k| &k.expr)) {
                        self.scalar(e, &schema)?;
                    }
                    let level = partition_by
                        .iter()
                        .chain(order_by.iter().map(|k| &k.expr))
                        .map(|e| self.level(e, &schema))
                        .max()
                        .unwrap_or(SecurityLevel::Public);
                    let name = alias.clone().unwrap_or_else(|| "row_no".to_string());
                    let col = Column::new(&name, ValueType::Int64, level);
                    scope.push(None, col.clone());
                    let mut out = schema;
                    out.push(col);
                    cur = self.add(Op::WindowNumber { partition_by, order_by }, vec![cur], out);
                    exprs.push(Expr::Column(n));
                    names.push(name);
                }
                SelectItem::Expr { expr, alias } => {
                    if expr.contains_window() {
                        return Err(Error::Unsupported("row_no() inside an expression".into()));
                    }
                    let e = self.bind(expr, &scope, scope.cols.len(), "SELECT")?;
                    names.push(alias.clone().unwrap_or_else(|| default_name(expr, i)));
                    exprs.push(e);
                }
            }
        }
        Ok((cur, exprs, names, scope))
    }

    fn sort_keys(&self, items: &[OrderItem], scope: &Scope) -> Result<Vec<SortKey>> {
        items
            .iter()
            .map(|o| Ok(SortKey { expr: self.bind(&o.expr, scope, scope.cols.len(), "ORDER BY")?, desc: o.desc }))
            .collect()
    }

    /// SELECT list of an aggregate query: builds the aggregate and returns
    /// the projection over its output.
    fn aggregate_select(&mut self, sel: &Select, input: NodeId, scope: &Scope) -> Result<(NodeId, Vec<Expr>, Vec<String>)> {
        let schema = scope.columns();
        let n = scope.cols.len();
        let group: Vec<Expr> = sel.group_by.iter().map(|e| self.bind(e, scope, n, "GROUP BY")).collect::<Result<_>>()?;
        for g in &group {
            self.scalar(g, &schema)?;
        }
        let mut calls: Vec<AggCall> = Vec::new();
        let mut exprs = Vec::new();
        let mut names = Vec::new();
        let mut call_alias: BTreeMap<usize, String> = BTreeMap::new();
        for (i, item) in sel.items.iter().enumerate() {
            let SelectItem::Expr { expr, alias } = item else {
                return Err(resolve_err("`*` is not allowed in an aggregate query"));
            };
            if expr.contains_window() {
                return Err(Error::Unsupported("row_no() in an aggregate query".into()));
            }
            let mut ctx = AggContext { group: &group, calls: &mut calls };
            let e = self.bind_agg(expr, scope, &mut ctx)?;
            if let (AstExpr::Aggregate { .. }, Some(a), Some(p)) = (expr, alias, e.as_column()) {
                if p >= group.len() {
                    call_alias.entry(p - group.len()).or_insert_with(|| a.clone());
                }
            }
            names.push(alias.clone().unwrap_or_else(|| default_name(expr, i)));
            exprs.push(e);
        }
        for o in &sel.order_by {
            if o.expr.contains_aggregate() {
                let mut ctx = AggContext { group: &group, calls: &mut calls };
                self.bind_agg(&o.expr, scope, &mut ctx)?;
            }
        }

        let mut agg_schema: Vec<Column> = Vec::new();
        for (i, g) in group.iter().enumerate() {
            let name = match g {
                Expr::Column(p) => schema[*p].name.clone(),
                _ => format!("group{}", i + 1),
            };
            let level = self.level(g, &schema);
            agg_schema.push(Column { name, qualifier: None, value_type: self.scalar(g, &schema)?, level });
        }
        let group_level = group.iter().map(|g| self.level(g, &schema)).max().unwrap_or(SecurityLevel::Public);
        let mut used: Vec<String> = agg_schema.iter().map(|c| c.name.clone()).collect();
        for (i, call) in calls.iter().enumerate() {
            let (value_type, arg_level) = match &call.arg {
                None => (ValueType::Int64, SecurityLevel::Public),
                Some(a) => {
                    let t = self.scalar(a, &schema)?;
                    if call.func == AggFunc::Sum && t != ValueType::Int64 {
                        return Err(resolve_err(format!("type mismatch: SUM over {t}")));
                    }
                    let out = match call.func {
                        AggFunc::Min | AggFunc::Max => t,
                        _ => ValueType::Int64,
                    };
                    (out, self.level(a, &schema))
                }
            };
            let base = call_alias.get(&i).cloned().unwrap_or_else(|| call.func.name().to_string());
            let mut name = base.clone();
            let mut k = 2;
            while used.contains(&name) {
                name = format!("{base}_{k}");
                k += 1;
            }
            used.push(name.clone());
            agg_schema.push(Column { name, qualifier: None, value_type, level: group_level.max(arg_level) });
        }
        // keep select-list names for aggregates that carry no alias
        for (e, name) in exprs.iter().zip(names.iter_mut()) {
            if let Some(p) = e.as_column() {
                if p >= group.len() && !call_alias.contains_key(&(p - group.len())) {
                    *name = agg_schema[p].name.clone();
                }
            }
        }

        let node = if calls.iter().any(|c| c.func == AggFunc::CountDistinct) {
            if calls.len() != 1 {
                return Err(Error::Unsupported("COUNT(DISTINCT ...) combined with other aggregates".into()));
            }
            let arg = calls[0].arg.clone().expect("COUNT(DISTINCT x) has an argument");
            // project the groups and the counted value, deduplicate, count
            let mut proj_exprs = group.clone();
            proj_exprs.push(arg.clone());
            let mut proj_schema = agg_schema[..group.len()].to_vec();
            let arg_name = match &arg {
                Expr::Column(p) => schema[*p].name.clone(),
                _ => "value".to_string(),
            };
            proj_schema.push(Column {
                name: arg_name,
                qualifier: None,
                value_type: self.scalar(&arg, &schema)?,
                level: self.level(&arg, &schema),
            });
            let p = self.add(Op::Project { exprs: proj_exprs }, vec![input], proj_schema.clone());
            let d = self.add(Op::Distinct, vec![p], proj_schema);
            let g = group.len();
            let op = Op::Aggregate {
                group_by: (0..g).map(Expr::Column).collect(),
                aggs: vec![AggCall { func: AggFunc::Count, arg: Some(Expr::Column(g)) }],
            };
            self.add(op, vec![d], agg_schema)
        } else {
            self.add(Op::Aggregate { group_by: group.clone(), aggs: calls.clone() }, vec![input], agg_schema)
        };
        Ok((node, exprs, names))
    }

    /// Binds a select-list expression of an aggregate query to the
    /// aggregate's output columns.
    fn bind_agg(&self, e: &AstExpr, scope: &Scope, ctx: &mut AggContext<'_>) -> Result<Expr> {
        let n = scope.cols.len();
        if let AstExpr::Aggregate { func, arg } = e {
            let arg = match arg {
                Some(a) => {
                    if a.contains_aggregate() {
                        return Err(resolve_err("nested aggregate"));
                    }
                    Some(self.bind(a, scope, n, "aggregate argument")?)
                }
                None => None,
            };
            let call = AggCall { func: *func, arg };
            let idx = match ctx.calls.iter().position(|c| *c == call) {
                Some(i) => i,
                None => {
                    ctx.calls.push(call);
                    ctx.calls.len() - 1
                }
            };
            return Ok(Expr::Column(ctx.group.len() + idx));
        }
        if !e.contains_aggregate() {
            let bound = self.bind(e, scope, n, "SELECT")?;
            if let Some(i) = ctx.group.iter().position(|g| *g == bound) {
                return Ok(Expr::Column(i));
            }
        }
        match e {
            AstExpr::Int(v) => Ok(Expr::Literal(Value::Int(*v))),
            AstExpr::Str(s) => Ok(Expr::Literal(Value::Text(s.clone()))),
            AstExpr::Date(d) => Ok(Expr::Literal(Value::Date(*d))),
            AstExpr::Binary { op, lhs, rhs } => {
                Ok(Expr::binary(*op, self.bind_agg(lhs, scope, ctx)?, self.bind_agg(rhs, scope, ctx)?))
            }
            AstExpr::InTable { expr, table } => {
                self.check_membership_table(table)?;
                Ok(Expr::InTable { expr: Box::new(self.bind_agg(expr, scope, ctx)?), table: table.clone() })
            }
            AstExpr::Column { .. } => {
                Err(resolve_err(format!("column `{e}` must appear in GROUP BY or inside an aggregate")))
            }
            AstExpr::Aggregate { .. } | AstExpr::RowNo { .. } => unreachable!("handled above"),
        }
    }

    /// The projection expression an ORDER BY item names through an alias.
    fn alias_target(&self, e: &AstExpr, names: &[String], exprs: &[Expr]) -> Option<Expr> {
        if let AstExpr::Column { qualifier: None, name } = e {
            let hits: Vec<usize> = (0..names.len()).filter(|i| names[*i] == *name).collect();
            if let [one] = hits.as_slice() {
                return Some(exprs[*one].clone());
            }
        }
        None
    }

    /// Sort keys over the output columns, or `None` if some key is not in
    /// the output.
    fn order_keys_on_output(
        &self,
        sel: &Select,
        names: &[String],
        exprs: &[Expr],
        pre: Option<&Scope>,
        is_agg: bool,
    ) -> Result<Option<Vec<SortKey>>> {
        let mut keys = Vec::new();
        for o in &sel.order_by {
            let mut pos = None;
            if let AstExpr::Column { qualifier: None, name } = &o.expr {
                let hits: Vec<usize> = (0..names.len()).filter(|i| names[*i] == *name).collect();
                match hits.as_slice() {
                    [one] => pos = Some(*one),
                    [_, _, ..] => return Err(resolve_err(format!("ambiguous ORDER BY column `{name}`"))),
                    [] => {}
                }
            }
            if pos.is_none() {
                pos = sel.items.iter().position(|i| matches!(i, SelectItem::Expr { expr, .. } if *expr == o.expr));
                // the position in `exprs` differs when `*` precedes the item
                if pos.is_some() && sel.items.iter().any(|i| matches!(i, SelectItem::Wildcard)) {
                    pos = None;
                }
            }
            if pos.is_none() && !is_agg {
                if let Some(scope) = pre {
                    if !o.expr.contains_aggregate() && !o.expr.contains_window() {
                        if let Ok(b) = self.bind(&o.expr, scope, scope.cols.len(), "ORDER BY") {
                            pos = exprs.iter().position(|e| *e == b);
                        }
                    }
                }
            }
            match pos {
                Some(p) => keys.push(SortKey { expr: Expr::Column(p), desc: o.desc }),
                None => return Ok(None),
            }
        }
        Ok(Some(keys))
    }
}

fn default_name(e: &AstExpr, i: usize) -> String {
    match e {
        AstExpr::Column { name, .. } => name.clone(),
        AstExpr::Aggregate { func, .. } => func.name().to_string(),
        AstExpr::RowNo { .. } => "row_no".to_string(),
        _ => format!("col{}", i + 1),
    }
}

/// Display names of `plan`'s output, used by explain and tests.
pub fn output_names(plan: &LogicalPlan) -> Vec<String> {
    display_names(plan.output_schema())
}
