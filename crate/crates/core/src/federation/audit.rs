//! Information-flow audit over a recorded message log.
//!
//! Providers may reveal sensitive values to the broker only as engine
//! inputs, as plaintext-track results, or as the query result itself.
//! Everything else they send must be public.

use std::collections::BTreeSet;

use super::exec::host_columns;
use super::message::Message;
use super::transport::{Endpoint, Envelope};
use crate::catalog::{Catalog, DataSet, Party, Relation, SecurityLevel};
use crate::plan::Column;
use crate::planner::PhysicalPlan;
use crate::value::{Value, ValueType};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditReport {
    pub messages: usize,
    /// Sensitive payloads carried on sanctioned paths.
    pub sanctioned: usize,
    pub violations: Vec<String>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Text values of every protected or private column, at either provider.
pub fn sensitive_texts(catalog: &Catalog, data: &DataSet) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for def in catalog.tables.values() {
        for (i, col) in def.columns.iter().enumerate() {
            if col.level == SecurityLevel::Public || col.value_type != ValueType::Text {
                continue;
            }
            for party in Party::BOTH {
                if let Some(rel) = data.get(party, &def.name) {
                    out.extend(rel.rows.iter().filter_map(|r| match &r[i] {
                        Value::Text(s) => Some(s.clone()),
                        _ => None,
                    }));
                }
            }
        }
    }
    out
}

fn leaked<'a>(rel: &'a Relation, texts: &'a BTreeSet<String>) -> Option<&'a str> {
    rel.rows.iter().flatten().find_map(|v| match v {
        Value::Text(s) if texts.contains(s) => Some(s.as_str()),
        _ => None,
    })
}

fn non_public(cols: &[Column]) -> Option<&str> {
    cols.iter().find(|c| c.level != SecurityLevel::Public).map(|c| c.name.as_str())
}

/// Checks every provider-to-broker frame in `log` against the plan that
/// produced it.
pub fn audit(log: &[Envelope], plan: &PhysicalPlan, catalog: &Catalog, data: &DataSet) -> AuditReport {
    let texts = sensitive_texts(catalog, data);
    let root = plan.root_host();
    let mut report = AuditReport::default();
    let mut last_request: [Option<Message>; 2] = [None, None];
    for env in log {
        report.messages += 1;
        let msg = match env.message() {
            Ok(m) => m,
            Err(e) => {
                report.violations.push(format!("undecodable frame: {e}"));
                continue;
            }
        };
        let party = match (env.from, env.to) {
            (Endpoint::Broker, Endpoint::Provider(p)) => {
                last_request[p.index()] = Some(msg);
                continue;
            }
            (Endpoint::Provider(p), Endpoint::Broker) => p,
            (Endpoint::Provider(_), _) => {
                report.violations.push(format!("{} sent outside the broker channel", msg.name()));
                continue;
            }
            _ => continue,
        };
        let check = |what: String, rel: &Relation, cols: &[Column]| {
            let mut found = Vec::new();
            if let Some(c) = non_public(cols) {
                found.push(format!("{what} carries non-public column `{c}`"));
            }
            if let Some(v) = leaked(rel, &texts) {
                found.push(format!("{what} carries sensitive value `{v}`"));
            }
            found
        };
        match msg {
            Message::SecureStepInput { .. } => report.sanctioned += 1,
            Message::LocalResult { partition: Some(_), .. } => report.sanctioned += 1,
            Message::LocalResult { node, .. } if node == root => report.sanctioned += 1,
            Message::LocalResult { node, rel, .. } => {
                let cols = host_columns(plan, node).to_vec();
                report.violations.extend(check(format!("intermediate result of operator {node}"), &rel, &cols));
            }
            Message::CensusReply { values, .. } => {
                let cols: Vec<Column> = match &last_request[party.index()] {
                    Some(Message::CensusRequest { leaf, positions, .. }) => {
                        let all = host_columns(plan, *leaf);
                        positions.iter().map(|p| all[*p].clone()).collect()
                    }
                    _ => {
                        report.violations.push("census reply without a census request".into());
                        Vec::new()
                    }
                };
                report.violations.extend(check("census reply".into(), &values, &cols));
            }
            Message::TableReply { table, rel } => {
                let public = catalog
                    .tables
                    .get(&table)
                    .is_some_and(|t| t.columns.iter().all(|c| c.level == SecurityLevel::Public));
                if !public {
                    report.violations.push(format!("membership table `{table}` is not public"));
                }
                report.violations.extend(check(format!("membership table `{table}`"), &rel, &[]));
            }
            Message::Ack { .. } | Message::Failure(_) => {}
            other => report.violations.push(format!("provider sent unexpected {}", other.name())),
        }
    }
    report
}
