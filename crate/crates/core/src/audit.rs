//! Cross-references where apps actually send personal data with what their
//! privacy policies admit to.
//!
//! The input is a flow log produced by an interception platform: one line
//! per observed flow, naming the app, the destination, and the data types
//! carried. Destinations are attributed to organizations with the resolver,
//! organizations are rolled up to their head companies through a relations
//! file, and each app's received-by set is compared against the entities
//! its policy discloses. The verdict per app is Full, Partial, or None.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use serde::Serialize;
use thiserror::Error;

use crate::domain::Fqdn;
use crate::orgname::normalize_org;
use crate::policy::controller::{entity_mentions, EntityRules};
use crate::policy::PolicyText;
use crate::resolver::Attribution;

const BUNDLED_KNOWN_ORGS: &str = include_str!("../data/known_orgs.txt");

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{origin} line {line}: {reason}")]
    Format {
        origin: String,
        line: usize,
        reason: String,
    },
    #[error("no resolution for destination {domain:?}")]
    MissingResolution { domain: String },
    #[error("relation cycle detected while rolling up {org:?}")]
    CycleDetected { org: String },
    #[error("{child:?} has more than one parent in the relations file")]
    AmbiguousParent { child: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How the flow was carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Transport {
    Https,
    Http,
}

/// One observed personal-data flow.
#[derive(Debug, Clone)]
pub struct FlowRecord {
    pub app_id: String,
    pub destination: Fqdn,
    pub transport: Transport,
    pub data_types: Vec<String>,
}

/// A line the lenient parser refused, with why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

/// The parsed flow log plus whatever was skipped.
#[derive(Debug)]
pub struct FlowIngest {
    pub records: Vec<FlowRecord>,
    pub skipped: Vec<SkippedLine>,
}

/// Parses `app_id<TAB>destination<TAB>transport<TAB>data,types` lines.
/// Malformed lines are collected with line numbers and skipped; in strict
/// mode the first one aborts instead.
pub fn ingest_flows(text: &str, origin: &str, strict: bool) -> Result<FlowIngest, AuditError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        match parse_flow_line(line) {
            Ok(record) => records.push(record),
            Err(reason) => {
                if strict {
                    return Err(AuditError::Format {
                        origin: origin.to_string(),
                        line: i + 1,
                        reason,
                    });
                }
                skipped.push(SkippedLine { line: i + 1, reason });
            }
        }
    }
    Ok(FlowIngest { records, skipped })
}

pub fn ingest_flows_file(path: &Path, strict: bool) -> Result<FlowIngest, AuditError> {
    let text = std::fs::read_to_string(path)?;
    ingest_flows(&text, &path.display().to_string(), strict)
}

fn parse_flow_line(line: &str) -> Result<FlowRecord, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(format!("expected 4 tab-separated fields, found {}", fields.len()));
    }
    let app_id = fields[0].trim();
    if app_id.is_empty() {
        return Err("empty app id".into());
    }
    let destination =
        Fqdn::parse(fields[1].trim()).map_err(|e| format!("bad destination: {e}"))?;
    let transport = match fields[2].trim().to_ascii_lowercase().as_str() {
        "https" => Transport::Https,
        "http" => Transport::Http,
        other => return Err(format!("unknown transport {other:?}")),
    };
    let data_types: Vec<String> = fields[3]
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect();
    if data_types.is_empty() {
        return Err("empty data_types".into());
    }
    Ok(FlowRecord {
        app_id: app_id.to_string(),
        destination,
        transport,
        data_types,
    })
}

/// Canonical comparison key for an organization name. Names that survive
/// normalization use the canonical form; degenerate ones fall back to a
/// trimmed casefold so the key is always nonempty for nonempty input.
fn org_key(name: &str) -> String {
    match normalize_org(name) {
        Ok(n) => n.text().to_string(),
        Err(_) => name.trim().to_lowercase(),
    }
}

/// Child-to-parent company edges, loaded from a relations file.
#[derive(Debug, Clone, Default)]
pub struct RelationSet {
    /// Normalized child name to every distinct parent seen for it.
    parents: HashMap<String, Vec<String>>,
}

impl RelationSet {
    pub fn empty() -> RelationSet {
        RelationSet::default()
    }

    /// Parses `child<TAB>parent` lines; blank lines and `#` comments are
    /// ignored. A relation from a name to itself is meaningless and
    /// rejected. Duplicate identical edges collapse to one.
    pub fn parse(text: &str, origin: &str) -> Result<RelationSet, AuditError> {
        let mut parents: HashMap<String, Vec<String>> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |reason: String| AuditError::Format {
                origin: origin.to_string(),
                line: i + 1,
                reason,
            };
            let Some((child, parent)) = line.split_once('\t') else {
                return Err(fail("expected child<TAB>parent".into()));
            };
            let (child, parent) = (child.trim(), parent.trim());
            if child.is_empty() || parent.is_empty() {
                return Err(fail("empty name".into()));
            }
            let child_key = org_key(child);
            if child_key == org_key(parent) {
                return Err(fail(format!("{child:?} cannot be its own parent")));
            }
            let entry = parents.entry(child_key).or_default();
            if !entry.iter().any(|p| org_key(p) == org_key(parent)) {
                entry.push(parent.to_string());
            }
        }
        Ok(RelationSet { parents })
    }

    pub fn from_file(path: &Path) -> Result<RelationSet, AuditError> {
        let text = std::fs::read_to_string(path)?;
        RelationSet::parse(&text, &path.display().to_string())
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }
}

/// Follows child-to-parent edges until an organization with no parent is
/// reached, and returns that head company's name as spelled in the
/// relations file. An organization with no relation entry is its own head.
pub fn rollup_head(org: &str, relations: &RelationSet) -> Result<String, AuditError> {
    let mut current = org.to_string();
    let mut key = org_key(&current);
    let mut visited: HashSet<String> = HashSet::from([key.clone()]);
    loop {
        let Some(candidates) = relations.parents.get(&key) else {
            return Ok(current);
        };
        if candidates.len() > 1 {
            return Err(AuditError::AmbiguousParent { child: current });
        }
        let parent = candidates[0].clone();
        key = org_key(&parent);
        if !visited.insert(key.clone()) {
            return Err(AuditError::CycleDetected { org: org.to_string() });
        }
        current = parent;
    }
}

/// Like [`rollup_head`], but total: a broken relation chain leaves the
/// organization standing for itself instead of failing the whole report.
fn rollup_or_self(org: &str, relations: &RelationSet) -> String {
    rollup_head(org, relations).unwrap_or_else(|_| org.to_string())
}

/// Names that identify an organization even without a legal designator.
#[derive(Debug, Clone)]
pub struct KnownOrgs {
    keys: HashSet<String>,
}

static BUNDLED_GAZETTEER: LazyLock<KnownOrgs> =
    LazyLock::new(|| KnownOrgs::parse(BUNDLED_KNOWN_ORGS));

impl KnownOrgs {
    pub fn bundled() -> &'static KnownOrgs {
        &BUNDLED_GAZETTEER
    }

    pub fn parse(text: &str) -> KnownOrgs {
        KnownOrgs {
            keys: text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(org_key)
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> std::io::Result<KnownOrgs> {
        Ok(KnownOrgs::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.keys.contains(&org_key(name))
    }
}

/// Per-app recipient organizations plus flow-level coverage counts.
#[derive(Debug, Clone, Serialize)]
pub struct Recipients {
    /// App id to the set of normalized organization names it sent data to.
    pub per_app: BTreeMap<String, BTreeSet<String>>,
    pub flows_total: u64,
    /// Flows whose destination was attributed to an organization.
    pub flows_attributed: u64,
}

/// Maps each app to the organizations receiving its data. Every flow
/// destination must have a resolution; destinations the resolver could not
/// attribute stay out of the org sets but count against coverage.
pub fn recipients_per_app(
    flows: &[FlowRecord],
    resolutions: &HashMap<String, Attribution>,
) -> Result<Recipients, AuditError> {
    let mut per_app: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut flows_attributed = 0u64;
    for flow in flows {
        let destination = flow.destination.text();
        let resolution =
            resolutions
                .get(destination)
                .ok_or_else(|| AuditError::MissingResolution {
                    domain: destination.to_string(),
                })?;
        let orgs = per_app.entry(flow.app_id.clone()).or_default();
        if let Some(org) = &resolution.organization {
            orgs.insert(org_key(org));
            flows_attributed += 1;
        }
    }
    Ok(Recipients {
        per_app,
        flows_total: flows.len() as u64,
        flows_attributed,
    })
}

/// Every organization a policy names, across all paragraphs, with no
/// winner selection. A mention counts when it ends with a legal designator
/// or matches the known-organization list; a compound mention that fails
/// both ("Google and Amazon") lends its pieces a second chance. Results
/// are normalized and deduplicated.
pub fn disclosed_entities(
    policy: &PolicyText,
    rules: &EntityRules,
    known: &KnownOrgs,
) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for paragraph in &policy.paragraphs {
        for mention in entity_mentions(paragraph, rules) {
            if !keep_if_organization(&mention, known, &mut out) {
                for segment in &mention.segments {
                    keep_if_organization(segment, known, &mut out);
                }
            }
        }
    }
    out
}

/// Admits a mention that reads as an organization name. A name that is all
/// designator (a bare "Inc.") normalizes to nothing and is dropped even
/// though it technically ends with a designator.
fn keep_if_organization(
    mention: &crate::policy::controller::EntityMention,
    known: &KnownOrgs,
    out: &mut BTreeSet<String>,
) -> bool {
    if !mention.ends_with_designator && !known.contains(&mention.text) {
        return false;
    }
    match normalize_org(&mention.text) {
        Ok(normalized) => {
            out.insert(normalized.text().to_string());
            true
        }
        Err(_) => false,
    }
}

/// How completely an app's policy discloses its data recipients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DisclosureStatus {
    Full,
    Partial,
    None,
}

impl DisclosureStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            DisclosureStatus::Full => "full",
            DisclosureStatus::Partial => "partial",
            DisclosureStatus::None => "none",
        }
    }
}

/// Compares received against disclosed at head-company level.
///
/// An app that received nothing has nothing to hide, so it is vacuously
/// Full. Otherwise: every recipient disclosed is Full, none of them is
/// None, anything in between is Partial.
pub fn classify_disclosure(
    received: &BTreeSet<String>,
    disclosed: &BTreeSet<String>,
    relations: &RelationSet,
) -> DisclosureStatus {
    let received_heads: BTreeSet<String> = received
        .iter()
        .map(|org| org_key(&rollup_or_self(org, relations)))
        .collect();
    let disclosed_heads: BTreeSet<String> = disclosed
        .iter()
        .map(|org| org_key(&rollup_or_self(org, relations)))
        .collect();
    if received_heads.is_empty() {
        return DisclosureStatus::Full;
    }
    let named = received_heads.intersection(&disclosed_heads).count();
    if named == received_heads.len() {
        DisclosureStatus::Full
    } else if named == 0 {
        DisclosureStatus::None
    } else {
        DisclosureStatus::Partial
    }
}

/// One app's row in the report.
#[derive(Debug, Clone, Serialize)]
pub struct AppReport {
    pub app_id: String,
    /// Head companies that received this app's data.
    pub received: BTreeSet<String>,
    /// Head companies the app's policy names.
    pub disclosed: BTreeSet<String>,
    /// Absent when the app's policy could not be obtained.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<DisclosureStatus>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StatusCounts {
    pub full: u64,
    pub partial: u64,
    pub none: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OrgDisclosure {
    /// Apps that sent data to this organization and name it in their policy.
    pub disclosed: u64,
    /// Apps that sent data to it without naming it.
    pub undisclosed: u64,
}

/// The complete audit outcome.
#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub apps: Vec<AppReport>,
    /// Apps with observed flows whose policy was unavailable.
    pub no_policy: Vec<String>,
    /// Statuses over apps that have both flows and a policy.
    pub status_counts: StatusCounts,
    pub apps_per_data_type: BTreeMap<String, u64>,
    /// Distinct apps per destination registrable domain.
    pub apps_per_destination: BTreeMap<String, u64>,
    /// Distinct apps per head company receiving their data.
    pub apps_per_head_org: BTreeMap<String, u64>,
    /// Per head company: how many of the apps sending to it disclose it.
    pub org_disclosure: BTreeMap<String, OrgDisclosure>,
    pub flows_total: u64,
    pub flows_attributed: u64,
}

/// Builds the full report: recipients, disclosures, statuses, and the
/// aggregate tables. Apps without a policy keep their received sets but
/// carry no status and sit in the no-policy bucket; their recipients still
/// count as undisclosed in the per-organization table, because an absent
/// policy discloses nothing.
pub fn build_report(
    flows: &[FlowRecord],
    resolutions: &HashMap<String, Attribution>,
    policies: &BTreeMap<String, PolicyText>,
    relations: &RelationSet,
    rules: &EntityRules,
    known: &KnownOrgs,
) -> Result<AuditReport, AuditError> {
    let recipients = recipients_per_app(flows, resolutions)?;

    let mut apps = Vec::new();
    let mut no_policy = Vec::new();
    let mut status_counts = StatusCounts::default();
    let mut org_disclosure: BTreeMap<String, OrgDisclosure> = BTreeMap::new();

    for (app_id, orgs) in &recipients.per_app {
        let received: BTreeSet<String> = orgs
            .iter()
            .map(|org| org_key(&rollup_or_self(org, relations)))
            .collect();
        let (disclosed, status) = match policies.get(app_id) {
            Some(policy) => {
                let raw = disclosed_entities(policy, rules, known);
                let heads: BTreeSet<String> = raw
                    .iter()
                    .map(|org| org_key(&rollup_or_self(org, relations)))
                    .collect();
                let status = classify_disclosure(orgs, &raw, relations);
                match status {
                    DisclosureStatus::Full => status_counts.full += 1,
                    DisclosureStatus::Partial => status_counts.partial += 1,
                    DisclosureStatus::None => status_counts.none += 1,
                }
                (heads, Some(status))
            }
            None => {
                no_policy.push(app_id.clone());
                (BTreeSet::new(), None)
            }
        };
        for org in &received {
            let entry = org_disclosure.entry(org.clone()).or_default();
            if disclosed.contains(org) {
                entry.disclosed += 1;
            } else {
                entry.undisclosed += 1;
            }
        }
        apps.push(AppReport {
            app_id: app_id.clone(),
            received,
            disclosed,
            status,
        });
    }

    let mut apps_per_data_type: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    let mut apps_per_destination: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for flow in flows {
        for tag in &flow.data_types {
            apps_per_data_type
                .entry(tag.clone())
                .or_default()
                .insert(&flow.app_id);
        }
        let destination = flow.destination.text();
        let rd = resolutions
            .get(destination)
            .map(|r| r.registrable_domain.clone())
            .expect("checked by recipients_per_app");
        apps_per_destination
            .entry(rd)
            .or_default()
            .insert(&flow.app_id);
    }

    let mut apps_per_head_org: BTreeMap<String, u64> = BTreeMap::new();
    for report in &apps {
        for org in &report.received {
            *apps_per_head_org.entry(org.clone()).or_default() += 1;
        }
    }

    Ok(AuditReport {
        apps,
        no_policy,
        status_counts,
        apps_per_data_type: count_values(apps_per_data_type),
        apps_per_destination: count_values(apps_per_destination),
        apps_per_head_org,
        org_disclosure,
        flows_total: recipients.flows_total,
        flows_attributed: recipients.flows_attributed,
    })
}

fn count_values(map: BTreeMap<String, BTreeSet<&str>>) -> BTreeMap<String, u64> {
    map.into_iter()
        .map(|(k, v)| (k, v.len() as u64))
        .collect()
}
