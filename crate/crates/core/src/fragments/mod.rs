//! Parsing a SELECT statement into its query fragments: the outermost
//! projections, atomic selection predicates, function calls, base tables and
//! referenced attributes.
//!
//! Parsing is delegated to `sqlparser` (T-SQL dialect first, generic dialect
//! as a fallback). Fragment strings are rendered from the AST and passed
//! through [`normalize_fragment`] so set membership is purely syntactic.

mod normalize;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::ops::ControlFlow;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sqlparser::ast::{
    Expr, Ident, JoinConstraint, JoinOperator, ObjectName, ObjectNamePart, Query, Select,
    SelectItem, SelectItemQualifiedWildcardKind, SetExpr, Statement, TableFactor, TableWithJoins,
    UnaryOperator, BinaryOperator, Visit, Visitor, VisitMut, visit_expressions_mut,
};
use sqlparser::dialect::{Dialect, GenericDialect, MsSqlDialect};
use sqlparser::parser::{Parser, ParserError};

use crate::error::{Error, Result};

pub use normalize::normalize_fragment;

/// Depth limit when following derived tables and CTEs during `*` expansion.
const MAX_EXPANSION_DEPTH: usize = 32;

/// The five fragment sets of one query plus its raw length.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFragments {
    pub projections: BTreeSet<String>,
    pub selections: BTreeSet<String>,
    pub aggregations: BTreeSet<String>,
    pub tables: BTreeSet<String>,
    pub attributes: BTreeSet<String>,
    pub char_length: usize,
    /// A `*` in the outermost select list could not be expanded.
    pub star_unresolved: bool,
}

impl QueryFragments {
    /// The empty predecessor used for the first query of a session.
    pub fn empty() -> Self {
        Self::default()
    }
}

/// Table name to ordered attribute list, used to expand `*`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SchemaCatalog {
    tables: BTreeMap<String, Vec<String>>,
}

impl SchemaCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, table: &str, attributes: impl IntoIterator<Item = impl AsRef<str>>) {
        let attrs = attributes
            .into_iter()
            .map(|a| normalize_fragment(a.as_ref()))
            .collect();
        self.tables.insert(normalize_fragment(table), attrs);
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        let mut catalog = Self::new();
        for (table, attrs) in raw {
            catalog.insert(&table, attrs);
        }
        Ok(catalog)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Looks up a table by its full (schema-qualified) name, then by its last part.
    pub fn attributes(&self, table: &str) -> Option<&[String]> {
        let key = normalize_fragment(table);
        if let Some(a) = self.tables.get(&key) {
            return Some(a);
        }
        let last = key.rsplit('.').next()?;
        self.tables.get(last).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

/// True when the first token after leading whitespace and comments is
/// `SELECT` or `WITH`.
pub fn is_select(statement: &str) -> bool {
    let rest = strip_leading_comments(statement);
    let word: String = rest
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    word.eq_ignore_ascii_case("select") || word.eq_ignore_ascii_case("with")
}

fn strip_leading_comments(mut s: &str) -> &str {
    loop {
        s = s.trim_start_matches(|c: char| c.is_whitespace() || c == '(' || c == ';');
        if let Some(rest) = s.strip_prefix("--") {
            s = rest.split_once('\n').map_or("", |(_, r)| r);
        } else if let Some(rest) = s.strip_prefix("/*") {
            s = rest.split_once("*/").map_or("", |(_, r)| r);
        } else {
            return s;
        }
    }
}

/// Fragments for every query that has text. A statement that fails to parse
/// keeps empty fragments (with its character length) and is logged. Returns
/// the number of failures.
pub fn fragment_workload(workload: &mut crate::workload::Workload, catalog: &SchemaCatalog) -> usize {
    let mut failures = 0;
    for q in workload.queries_mut() {
        if q.text.trim().is_empty() {
            continue;
        }
        q.fragments = Some(match extract_fragments(&q.text, catalog) {
            Ok(f) => f,
            Err(e) => {
                log::warn!("query {}: {e}; using empty fragments", q.query_id);
                failures += 1;
                QueryFragments {
                    char_length: q.text.chars().count(),
                    ..QueryFragments::empty()
                }
            }
        });
    }
    failures
}

/// Parse `statement` and extract its fragments, expanding a single outermost
/// `*` through `catalog`.
pub fn extract_fragments(statement: &str, catalog: &SchemaCatalog) -> Result<QueryFragments> {
    let query = parse_query(statement)?;
    let ctx = Context::build(&query);

    let mut collector = Collector {
        ctx: &ctx,
        selections: BTreeSet::new(),
        aggregations: BTreeSet::new(),
        tables: BTreeSet::new(),
        attributes: BTreeSet::new(),
    };
    let _ = query.visit(&mut collector);

    let (projections, star_unresolved) = match outer_projections(&query, &ctx, catalog, 0) {
        Ok(p) => (p, false),
        Err(Unresolved) => (BTreeSet::new(), true),
    };

    Ok(QueryFragments {
        projections,
        selections: collector.selections,
        aggregations: collector.aggregations,
        tables: collector.tables,
        attributes: collector.attributes,
        char_length: statement.chars().count(),
        star_unresolved,
    })
}

fn parse_query(statement: &str) -> Result<Query> {
    let dialects: [&dyn Dialect; 2] = [&MsSqlDialect {}, &GenericDialect {}];
    let mut first_err = None;
    for dialect in dialects {
        match Parser::parse_sql(dialect, statement) {
            Ok(stmts) => {
                let mut queries = stmts.into_iter().filter_map(|s| match s {
                    Statement::Query(q) => Some(*q),
                    _ => None,
                });
                return queries.next().ok_or(Error::NotSelect);
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let err = first_err.expect("at least one dialect tried");
    Err(parse_error(statement, err))
}

fn parse_error(statement: &str, err: ParserError) -> Error {
    let message = match &err {
        ParserError::TokenizerError(m) | ParserError::ParserError(m) => m.clone(),
        ParserError::RecursionLimitExceeded => "recursion limit exceeded".to_string(),
    };
    let offset = match error_location(&message) {
        Some((line, col)) => byte_offset(statement, line, col),
        // the parser reports no location when it runs off the end
        None if message.contains("EOF") => statement.len(),
        None => 0,
    };
    Error::Parse { offset, message }
}

fn error_location(message: &str) -> Option<(usize, usize)> {
    let idx = message.rfind("Line: ")?;
    let tail = &message[idx + "Line: ".len()..];
    let (line, rest) = tail.split_once(", Column: ")?;
    let col: String = rest.chars().take_while(|c| c.is_ascii_digit()).collect();
    Some((line.trim().parse().ok()?, col.parse().ok()?))
}

fn byte_offset(text: &str, line: usize, col: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return offset
                + l.char_indices()
                    .nth(col.saturating_sub(1))
                    .map_or(l.len(), |(b, _)| b);
        }
        offset += l.len();
    }
    text.len()
}

/// Names needed to resolve references: CTE names (not base tables) and every
/// relation name or alias that may qualify a column.
struct Context<'q> {
    ctes: BTreeMap<String, &'q Query>,
    qualifiers: HashSet<String>,
}

impl<'q> Context<'q> {
    fn build(query: &'q Query) -> Self {
        let mut ctes = BTreeMap::new();
        let mut qualifiers = HashSet::new();
        collect_names(query, &mut ctes, &mut qualifiers);
        Context { ctes, qualifiers }
    }

    fn is_cte(&self, name: &ObjectName) -> bool {
        name.0.len() == 1 && self.ctes.contains_key(&object_name(name))
    }

    /// Render an expression with relation qualifiers dropped and quotes removed.
    fn render(&self, expr: &Expr) -> String {
        let mut e = expr.clone();
        let _ = visit_expressions_mut(&mut e, |x| {
            if let Expr::CompoundIdentifier(parts) = x {
                if parts.len() >= 2 {
                    let qualifier = parts[..parts.len() - 1]
                        .iter()
                        .map(|p| p.value.to_lowercase())
                        .collect::<Vec<_>>()
                        .join(".");
                    if self.qualifiers.contains(&qualifier) {
                        let last = parts.last().cloned().expect("non-empty");
                        *x = Expr::Identifier(last);
                    }
                }
            }
            ControlFlow::<()>::Continue(())
        });
        let _ = VisitMut::visit(&mut e, &mut Unquote);
        normalize_fragment(&e.to_string())
    }
}

struct Unquote;

impl sqlparser::ast::VisitorMut for Unquote {
    type Break = ();

    fn pre_visit_ident(&mut self, ident: &mut Ident) -> ControlFlow<()> {
        ident.quote_style = None;
        ControlFlow::Continue(())
    }
}

fn collect_names<'q>(
    query: &'q Query,
    ctes: &mut BTreeMap<String, &'q Query>,
    qualifiers: &mut HashSet<String>,
) {
    struct Names<'a> {
        qualifiers: &'a mut HashSet<String>,
    }
    impl Visitor for Names<'_> {
        type Break = ();
        fn pre_visit_table_factor(&mut self, tf: &TableFactor) -> ControlFlow<()> {
            match tf {
                TableFactor::Table { name, alias, .. } => {
                    let full = object_name(name);
                    if let Some(last) = full.rsplit('.').next() {
                        self.qualifiers.insert(last.to_string());
                    }
                    self.qualifiers.insert(full);
                    if let Some(a) = alias {
                        self.qualifiers.insert(a.name.value.to_lowercase());
                    }
                }
                TableFactor::Derived { alias: Some(a), .. } => {
                    self.qualifiers.insert(a.name.value.to_lowercase());
                }
                _ => {}
            }
            ControlFlow::Continue(())
        }
    }

    // CTE bodies are borrowed for the lifetime of the query, so walk them by hand.
    fn ctes_of<'q>(query: &'q Query, ctes: &mut BTreeMap<String, &'q Query>) {
        if let Some(with) = &query.with {
            for cte in &with.cte_tables {
                ctes.insert(cte.alias.name.value.to_lowercase(), &cte.query);
                ctes_of(&cte.query, ctes);
            }
        }
        walk_subqueries(&query.body, &mut |q| ctes_of(q, ctes));
    }

    ctes_of(query, ctes);
    for name in ctes.keys() {
        qualifiers.insert(name.clone());
    }
    let _ = query.visit(&mut Names { qualifiers });
}

/// Calls `f` on queries nested directly in FROM clauses of `body`.
fn walk_subqueries<'q>(body: &'q SetExpr, f: &mut dyn FnMut(&'q Query)) {
    match body {
        SetExpr::Select(s) => {
            for twj in &s.from {
                walk_factor(&twj.relation, f);
                for j in &twj.joins {
                    walk_factor(&j.relation, f);
                }
            }
        }
        SetExpr::Query(q) => f(q),
        SetExpr::SetOperation { left, right, .. } => {
            walk_subqueries(left, f);
            walk_subqueries(right, f);
        }
        _ => {}
    }
}

fn walk_factor<'q>(tf: &'q TableFactor, f: &mut dyn FnMut(&'q Query)) {
    match tf {
        TableFactor::Derived { subquery, .. } => f(subquery),
        TableFactor::NestedJoin {
            table_with_joins, ..
        } => {
            walk_factor(&table_with_joins.relation, f);
            for j in &table_with_joins.joins {
                walk_factor(&j.relation, f);
            }
        }
        _ => {}
    }
}

fn object_name(name: &ObjectName) -> String {
    name.0
        .iter()
        .map(|part| match part {
            ObjectNamePart::Identifier(i) => i.value.to_lowercase(),
            ObjectNamePart::Function(f) => f.name.value.to_lowercase(),
        })
        .collect::<Vec<_>>()
        .join(".")
}

/// Harvests S, A, T and At across the whole statement, subqueries included.
struct Collector<'c, 'q> {
    ctx: &'c Context<'q>,
    selections: BTreeSet<String>,
    aggregations: BTreeSet<String>,
    tables: BTreeSet<String>,
    attributes: BTreeSet<String>,
}

impl Collector<'_, '_> {
    fn add_atoms(&mut self, expr: &Expr) {
        match expr {
            Expr::BinaryOp {
                left,
                op: BinaryOperator::And | BinaryOperator::Or,
                right,
            } => {
                self.add_atoms(left);
                self.add_atoms(right);
            }
            Expr::UnaryOp {
                op: UnaryOperator::Not,
                expr,
            } => self.add_atoms(expr),
            Expr::Nested(inner) => self.add_atoms(inner),
            atom => {
                let text = self.ctx.render(atom);
                self.selections.insert(text);
            }
        }
    }

    fn add_join_predicates(&mut self, twj: &TableWithJoins) {
        for join in &twj.joins {
            if let Some(JoinConstraint::On(e)) = join_constraint(&join.join_operator) {
                self.add_atoms(e);
            }
        }
    }
}

fn join_constraint(op: &JoinOperator) -> Option<&JoinConstraint> {
    use JoinOperator::*;
    match op {
        Join(c) | Inner(c) | Left(c) | LeftOuter(c) | Right(c) | RightOuter(c) | FullOuter(c)
        | CrossJoin(c) | Semi(c) | LeftSemi(c) | RightSemi(c) | Anti(c) | LeftAnti(c)
        | RightAnti(c) | StraightJoin(c) => Some(c),
        AsOf { constraint, .. } => Some(constraint),
        _ => None,
    }
}

impl Visitor for Collector<'_, '_> {
    type Break = ();

    fn pre_visit_select(&mut self, select: &Select) -> ControlFlow<()> {
        if let Some(w) = &select.selection {
            self.add_atoms(w);
        }
        if let Some(h) = &select.having {
            self.add_atoms(h);
        }
        for twj in &select.from {
            self.add_join_predicates(twj);
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_table_factor(&mut self, tf: &TableFactor) -> ControlFlow<()> {
        match tf {
            TableFactor::Table { name, args: None, .. } if !self.ctx.is_cte(name) => {
                self.tables.insert(normalize_fragment(&object_name(name)));
            }
            TableFactor::NestedJoin {
                table_with_joins, ..
            } => self.add_join_predicates(table_with_joins),
            _ => {}
        }
        ControlFlow::Continue(())
    }

    fn pre_visit_expr(&mut self, expr: &Expr) -> ControlFlow<()> {
        match expr {
            Expr::Identifier(ident) => {
                self.attributes.insert(normalize_fragment(&ident.value));
            }
            Expr::CompoundIdentifier(parts) => {
                if let Some(last) = parts.last() {
                    self.attributes.insert(normalize_fragment(&last.value));
                }
            }
            Expr::Function(_)
            | Expr::Substring { .. }
            | Expr::Trim { .. }
            | Expr::Ceil { .. }
            | Expr::Floor { .. }
            | Expr::Position { .. }
            | Expr::Extract { .. }
            | Expr::Overlay { .. } => {
                let text = self.ctx.render(expr);
                self.aggregations.insert(text);
            }
            _ => {}
        }
        ControlFlow::Continue(())
    }
}

/// Marker for a `*` that could not be expanded.
#[derive(Debug)]
struct Unresolved;

/// The projection set of `query`'s outermost select list.
fn outer_projections(
    query: &Query,
    ctx: &Context<'_>,
    catalog: &SchemaCatalog,
    depth: usize,
) -> Result<BTreeSet<String>, Unresolved> {
    if depth > MAX_EXPANSION_DEPTH {
        return Err(Unresolved);
    }
    let select = leftmost_select(&query.body).ok_or(Unresolved)?;
    let stars: Vec<Option<String>> = select
        .projection
        .iter()
        .filter_map(|item| match item {
            SelectItem::Wildcard(_) => Some(None),
            SelectItem::QualifiedWildcard(kind, _) => Some(Some(match kind {
                SelectItemQualifiedWildcardKind::ObjectName(n) => object_name(n),
                SelectItemQualifiedWildcardKind::Expr(e) => e.to_string().to_lowercase(),
            })),
            _ => None,
        })
        .collect();
    if stars.len() > 1 {
        return Err(Unresolved);
    }

    let mut out = BTreeSet::new();
    for item in &select.projection {
        match item {
            SelectItem::UnnamedExpr(e)
            | SelectItem::ExprWithAlias { expr: e, .. }
            | SelectItem::ExprWithAliases { expr: e, .. } => {
                out.insert(ctx.render(e));
            }
            _ => {}
        }
    }
    if let Some(qualifier) = stars.into_iter().next() {
        out.extend(expand_star(select, qualifier.as_deref(), ctx, catalog, depth)?);
    }
    Ok(out)
}

fn leftmost_select(body: &SetExpr) -> Option<&Select> {
    match body {
        SetExpr::Select(s) => Some(s),
        SetExpr::Query(q) => leftmost_select(&q.body),
        SetExpr::SetOperation { left, .. } => leftmost_select(left),
        _ => None,
    }
}

fn expand_star(
    select: &Select,
    qualifier: Option<&str>,
    ctx: &Context<'_>,
    catalog: &SchemaCatalog,
    depth: usize,
) -> Result<BTreeSet<String>, Unresolved> {
    let mut factors = Vec::new();
    for twj in &select.from {
        flatten_factors(twj, &mut factors);
    }
    let mut out = BTreeSet::new();
    let mut matched = false;
    for tf in factors {
        if let Some(q) = qualifier {
            if !factor_matches(tf, q) {
                continue;
            }
        }
        matched = true;
        out.extend(factor_columns(tf, ctx, catalog, depth)?);
    }
    if !matched {
        return Err(Unresolved);
    }
    Ok(out)
}

fn flatten_factors<'a>(twj: &'a TableWithJoins, out: &mut Vec<&'a TableFactor>) {
    let push = |tf: &'a TableFactor, out: &mut Vec<&'a TableFactor>| match tf {
        TableFactor::NestedJoin {
            table_with_joins, ..
        } => flatten_factors(table_with_joins, out),
        other => out.push(other),
    };
    push(&twj.relation, out);
    for j in &twj.joins {
        push(&j.relation, out);
    }
}

fn factor_matches(tf: &TableFactor, qualifier: &str) -> bool {
    match tf {
        TableFactor::Table { name, alias, .. } => {
            let full = object_name(name);
            alias
                .as_ref()
                .is_some_and(|a| a.name.value.to_lowercase() == qualifier)
                || full == qualifier
                || full.rsplit('.').next() == Some(qualifier)
        }
        TableFactor::Derived { alias: Some(a), .. } => a.name.value.to_lowercase() == qualifier,
        _ => false,
    }
}

fn factor_columns(
    tf: &TableFactor,
    ctx: &Context<'_>,
    catalog: &SchemaCatalog,
    depth: usize,
) -> Result<BTreeSet<String>, Unresolved> {
    match tf {
        TableFactor::Table { name, args: None, .. } => {
            if ctx.is_cte(name) {
                let cte = ctx.ctes[&object_name(name)];
                return outer_projections(cte, ctx, catalog, depth + 1);
            }
            let attrs = catalog.attributes(&object_name(name)).ok_or(Unresolved)?;
            Ok(attrs.iter().cloned().collect())
        }
        TableFactor::Derived { subquery, .. } => {
            outer_projections(subquery, ctx, catalog, depth + 1)
        }
        _ => Err(Unresolved),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn catalog() -> SchemaCatalog {
        let mut c = SchemaCatalog::new();
        c.insert("T", ["x", "y", "z"]);
        c
    }

    #[test]
    fn direct_quintuple() {
        let f = extract_fragments("SELECT a, b FROM t WHERE a > 1", &catalog()).unwrap();
        assert_eq!(f.projections, set(&["a", "b"]));
        assert_eq!(f.selections, set(&["a > 1"]));
        assert!(f.aggregations.is_empty());
        assert_eq!(f.tables, set(&["t"]));
        assert_eq!(f.attributes, set(&["a", "b"]));
        assert!(!f.star_unresolved);
    }

    #[test]
    fn star_expansion() {
        let f = extract_fragments("SELECT * FROM T", &catalog()).unwrap();
        assert_eq!(f.projections, set(&["x", "y", "z"]));
        assert!(f.attributes.is_empty());
    }

    #[test]
    fn self_join_counts_one_table() {
        let f = extract_fragments("SELECT t1.a, t2.a FROM T t1, T t2", &catalog()).unwrap();
        assert_eq!(f.tables, set(&["t"]));
    }

    #[test]
    fn constant_query() {
        let f = extract_fragments("SELECT 1+2", &catalog()).unwrap();
        assert!(f.tables.is_empty());
        assert!(f.attributes.is_empty());
        assert_eq!(f.projections, set(&["1 + 2"]));
    }

    #[test]
    fn missing_catalog_entry_flags_star() {
        let f = extract_fragments("SELECT * FROM unknown", &catalog()).unwrap();
        assert!(f.star_unresolved);
        assert!(f.projections.is_empty());
        assert_eq!(f.tables, set(&["unknown"]));
    }

    #[test]
    fn multi_star_is_unresolved() {
        let f = extract_fragments("SELECT t1.*, t2.*, a FROM T t1, T t2", &catalog()).unwrap();
        assert!(f.star_unresolved);
        assert!(f.projections.is_empty());
    }

    #[test]
    fn parse_error_reports_offset() {
        match extract_fragments("SELECT a FROM t WHERE", &catalog()) {
            Err(Error::Parse { offset, .. }) => assert!(offset > 0 && offset <= 21),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn char_length_counts_characters() {
        let f = extract_fragments("SELECT 1", &catalog()).unwrap();
        assert_eq!(f.char_length, 8);
        let f = extract_fragments("SELECT 'é'", &catalog()).unwrap();
        assert_eq!(f.char_length, 10);
    }

    #[test]
    fn select_detection() {
        assert!(is_select("SELECT a FROM t"));
        assert!(is_select("  -- note\n/* x */ with c as (select 1) select * from c"));
        assert!(is_select("(SELECT 1)"));
        assert!(!is_select("INSERT INTO t VALUES(1)"));
        assert!(!is_select("selector"));
    }
}
