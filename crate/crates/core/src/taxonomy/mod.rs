//! Aspect-oriented taxonomy of AI hazards.
//!
//! The hierarchy runs from four aspect categories (TL0) through aspect groups
//! (TL1) and aspects (TL2) down to hazard clusters (TL3) and hazards (TL4).
//! TL0 through TL2 are fixed by the bundled dataset; TL3 and TL4 are left to
//! the assessor and may be appended in a custom document.

mod rubric;

pub use rubric::{load_rubrics, QualifierMode, RubricEntry, RubricError, RubricKind, Rubrics};

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_TAXONOMY: &str = include_str!("../../data/taxonomy.json");

#[derive(Debug, Error, PartialEq)]
pub enum TaxonomyError {
    #[error("taxonomy document does not parse: {0}")]
    Parse(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("node `{id}` at {level} has no parent")]
    MissingParent { id: String, level: TaxonomyLevel },
    #[error("root node `{0}` must not declare a parent")]
    RootWithParent(String),
    #[error("node `{id}` references unknown parent `{parent}`")]
    UnknownParent { id: String, parent: String },
    #[error("node `{id}` is {level} but its parent `{parent}` is {parent_level}; a child must sit exactly one level below its parent")]
    LevelMismatch {
        id: String,
        level: TaxonomyLevel,
        parent: String,
        parent_level: TaxonomyLevel,
    },
    #[error("expected aspect categories Capability, Domain Knowledge, Affordance, Impact Domain; found [{}]", .0.join(", "))]
    CategorySet(Vec<String>),
    #[error("node `{0}` diverges from the bundled TL0-TL2 taxonomy")]
    CoreMismatch(String),
    #[error("bundled TL0-TL2 node `{0}` is missing")]
    CoreMissing(String),
    #[error("unknown node id `{0}`")]
    UnknownId(String),
    #[error("label path must not be empty")]
    EmptyPath,
    #[error("no node matches path `{0}`")]
    NoMatch(String),
    #[error("path `{path}` is ambiguous; candidates: {}", .candidates.join(", "))]
    Ambiguous {
        path: String,
        candidates: Vec<String>,
    },
}

/// Depth in the taxonomy, serialized as its integer value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum TaxonomyLevel {
    TL0,
    TL1,
    TL2,
    TL3,
    TL4,
}

impl TaxonomyLevel {
    pub const ALL: [TaxonomyLevel; 5] = [Self::TL0, Self::TL1, Self::TL2, Self::TL3, Self::TL4];

    pub fn depth(self) -> u8 {
        self as u8
    }

    pub fn from_depth(depth: u8) -> Option<Self> {
        Self::ALL.get(depth as usize).copied()
    }

    pub fn parent_level(self) -> Option<Self> {
        self.depth().checked_sub(1).and_then(Self::from_depth)
    }
}

impl TryFrom<u8> for TaxonomyLevel {
    type Error = String;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::from_depth(value).ok_or_else(|| format!("taxonomy level {value} outside 0..=4"))
    }
}

impl From<TaxonomyLevel> for u8 {
    fn from(level: TaxonomyLevel) -> u8 {
        level.depth()
    }
}

impl fmt::Display for TaxonomyLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TL{}", self.depth())
    }
}

/// The four TL0 aspect categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AspectCategory {
    Capability,
    DomainKnowledge,
    Affordance,
    ImpactDomain,
}

impl AspectCategory {
    pub const ALL: [AspectCategory; 4] = [
        Self::Capability,
        Self::DomainKnowledge,
        Self::Affordance,
        Self::ImpactDomain,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Capability => "Capability",
            Self::DomainKnowledge => "Domain Knowledge",
            Self::Affordance => "Affordance",
            Self::ImpactDomain => "Impact Domain",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        let wanted = normalize_label(label);
        Self::ALL
            .into_iter()
            .find(|c| normalize_label(c.label()) == wanted)
    }

    /// Source aspects of a risk pathway come from these categories.
    pub fn is_source(self) -> bool {
        !matches!(self, Self::ImpactDomain)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub id: String,
    pub level: TaxonomyLevel,
    pub label: String,
    #[serde(default)]
    pub parent: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TaxonomyDocument {
    version: String,
    nodes: Vec<TaxonomyNode>,
}

/// A validated taxonomy. Immutable once built.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    version: String,
    nodes: Vec<TaxonomyNode>,
    index: HashMap<String, usize>,
    children: HashMap<String, Vec<usize>>,
}

impl PartialEq for Taxonomy {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version && self.nodes == other.nodes
    }
}

impl Serialize for Taxonomy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Doc<'a> {
            version: &'a str,
            nodes: &'a [TaxonomyNode],
        }
        Doc {
            version: &self.version,
            nodes: &self.nodes,
        }
        .serialize(serializer)
    }
}

/// Trim, collapse internal whitespace runs and lowercase.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Slug used for node ids: lowercase alphanumerics joined by single dashes.
pub fn slugify(label: &str) -> String {
    let mut out = String::with_capacity(label.len());
    let mut pending_dash = false;
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_dash && !out.is_empty() {
                out.push('-');
            }
            pending_dash = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_dash = true;
        }
    }
    out
}

/// Parses and validates a taxonomy document.
///
/// Beyond the structural checks, the TL0-TL2 portion must match the bundled
/// dataset node for node; only TL3/TL4 content may differ.
pub fn load_taxonomy(source: &str) -> Result<Taxonomy, TaxonomyError> {
    let taxonomy = Taxonomy::from_document(source)?;
    taxonomy.check_core(bundled_core())?;
    Ok(taxonomy)
}

fn bundled_core() -> &'static Taxonomy {
    static CORE: OnceLock<Taxonomy> = OnceLock::new();
    CORE.get_or_init(|| {
        Taxonomy::from_document(BUNDLED_TAXONOMY).expect("bundled taxonomy is well formed")
    })
}

impl Taxonomy {
    /// The embedded TL0-TL2 dataset.
    pub fn bundled() -> &'static Taxonomy {
        bundled_core()
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED_TAXONOMY
    }

    fn from_document(source: &str) -> Result<Self, TaxonomyError> {
        let doc: TaxonomyDocument =
            serde_json::from_str(source).map_err(|e| TaxonomyError::Parse(e.to_string()))?;
        Self::from_nodes(doc.version, doc.nodes)
    }

    fn from_nodes(version: String, nodes: Vec<TaxonomyNode>) -> Result<Self, TaxonomyError> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateId(node.id.clone()));
            }
        }

        let mut children: HashMap<String, Vec<usize>> = HashMap::new();
        let mut roots = Vec::new();
        for (i, node) in nodes.iter().enumerate() {
            match (&node.parent, node.level.parent_level()) {
                (None, None) => roots.push(node.label.clone()),
                (Some(_), None) => return Err(TaxonomyError::RootWithParent(node.id.clone())),
                (None, Some(_)) => {
                    return Err(TaxonomyError::MissingParent {
                        id: node.id.clone(),
                        level: node.level,
                    })
                }
                (Some(parent), Some(expected)) => {
                    let parent_node = index.get(parent).map(|&p| &nodes[p]).ok_or_else(|| {
                        TaxonomyError::UnknownParent {
                            id: node.id.clone(),
                            parent: parent.clone(),
                        }
                    })?;
                    if parent_node.level != expected {
                        return Err(TaxonomyError::LevelMismatch {
                            id: node.id.clone(),
                            level: node.level,
                            parent: parent.clone(),
                            parent_level: parent_node.level,
                        });
                    }
                    children.entry(parent.clone()).or_default().push(i);
                }
            }
        }

        let mut categories: Vec<_> = roots
            .iter()
            .filter_map(|label| AspectCategory::from_label(label))
            .collect();
        categories.sort_by_key(|c| *c as u8);
        categories.dedup();
        if roots.len() != 4 || categories.len() != 4 {
            return Err(TaxonomyError::CategorySet(roots));
        }

        Ok(Self {
            version,
            nodes,
            index,
            children,
        })
    }

    fn check_core(&self, core: &Taxonomy) -> Result<(), TaxonomyError> {
        for node in self.nodes.iter().filter(|n| n.level <= TaxonomyLevel::TL2) {
            match core.node(&node.id) {
                Some(expected)
                    if expected.level == node.level
                        && expected.parent == node.parent
                        && normalize_label(&expected.label) == normalize_label(&node.label) => {}
                _ => return Err(TaxonomyError::CoreMismatch(node.id.clone())),
            }
        }
        for node in &core.nodes {
            if !self.index.contains_key(&node.id) {
                return Err(TaxonomyError::CoreMissing(node.id.clone()));
            }
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn nodes(&self) -> &[TaxonomyNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: &str) -> Option<&TaxonomyNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn get(&self, id: &str) -> Result<&TaxonomyNode, TaxonomyError> {
        self.node(id)
            .ok_or_else(|| TaxonomyError::UnknownId(id.to_string()))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Nodes at `level` in document order.
    pub fn at_level(&self, level: TaxonomyLevel) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    /// Direct children of `node_id` in document order.
    pub fn children(&self, node_id: &str) -> Result<Vec<&TaxonomyNode>, TaxonomyError> {
        self.get(node_id)?;
        Ok(self
            .children
            .get(node_id)
            .map(|idx| idx.iter().map(|&i| &self.nodes[i]).collect())
            .unwrap_or_default())
    }

    /// The node itself followed by its ancestors up to the TL0 root.
    pub fn ancestry(&self, id: &str) -> Result<Vec<&TaxonomyNode>, TaxonomyError> {
        let mut chain = vec![self.get(id)?];
        while let Some(parent) = chain.last().and_then(|n| n.parent.as_deref()) {
            chain.push(self.get(parent)?);
        }
        Ok(chain)
    }

    /// The ancestor (or the node itself) sitting at `level`, if the node is
    /// at or below that level.
    pub fn ancestor_at(
        &self,
        id: &str,
        level: TaxonomyLevel,
    ) -> Result<Option<&TaxonomyNode>, TaxonomyError> {
        Ok(self.ancestry(id)?.into_iter().find(|n| n.level == level))
    }

    pub fn category(&self, id: &str) -> Result<AspectCategory, TaxonomyError> {
        let root = *self
            .ancestry(id)?
            .last()
            .expect("ancestry always contains the node");
        AspectCategory::from_label(&root.label)
            .ok_or_else(|| TaxonomyError::CategorySet(vec![root.label.clone()]))
    }

    /// Labels from the TL0 root down to `id`.
    pub fn label_path(&self, id: &str) -> Result<Vec<String>, TaxonomyError> {
        let mut labels: Vec<String> = self
            .ancestry(id)?
            .into_iter()
            .map(|n| n.label.clone())
            .collect();
        labels.reverse();
        Ok(labels)
    }

    /// Finds the node reached by matching `path` labels from a TL0 root.
    pub fn resolve_path<S: AsRef<str>>(&self, path: &[S]) -> Result<&TaxonomyNode, TaxonomyError> {
        if path.is_empty() {
            return Err(TaxonomyError::EmptyPath);
        }
        let display = path
            .iter()
            .map(|s| s.as_ref().trim())
            .collect::<Vec<_>>()
            .join(" / ");

        let mut frontier: Vec<&TaxonomyNode> = self.at_level(TaxonomyLevel::TL0).collect();
        let mut current: Option<&TaxonomyNode> = None;
        for label in path {
            let wanted = normalize_label(label.as_ref());
            let matches: Vec<&TaxonomyNode> = frontier
                .into_iter()
                .filter(|n| normalize_label(&n.label) == wanted)
                .collect();
            match matches.as_slice() {
                [] => return Err(TaxonomyError::NoMatch(display)),
                [only] => current = Some(*only),
                many => {
                    return Err(TaxonomyError::Ambiguous {
                        path: display,
                        candidates: many.iter().map(|n| n.id.clone()).collect(),
                    })
                }
            }
            frontier = self.children(&current.expect("set above").id)?;
        }
        Ok(current.expect("path is non-empty"))
    }

    /// Accepts either a node id or a `/`-separated label path.
    pub fn lookup(&self, id_or_path: &str) -> Result<&TaxonomyNode, TaxonomyError> {
        if let Some(node) = self.node(id_or_path) {
            return Ok(node);
        }
        let parts: Vec<&str> = id_or_path.split('/').collect();
        self.resolve_path(&parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(nodes: &str) -> String {
        format!(r#"{{"version":"t","nodes":[{nodes}]}}"#)
    }

    const ROOTS: &str = r#"
        {"id":"capability","level":0,"label":"Capability"},
        {"id":"domain-knowledge","level":0,"label":"Domain Knowledge"},
        {"id":"affordance","level":0,"label":"Affordance"},
        {"id":"impact-domain","level":0,"label":"Impact Domain"}"#;

    #[test]
    fn bundled_counts() {
        let t = Taxonomy::bundled();
        assert_eq!(t.at_level(TaxonomyLevel::TL0).count(), 4);
        assert_eq!(t.at_level(TaxonomyLevel::TL1).count(), 10);
        assert_eq!(t.at_level(TaxonomyLevel::TL2).count(), 61);
        let labels: Vec<_> = t
            .at_level(TaxonomyLevel::TL0)
            .map(|n| n.label.as_str())
            .collect();
        assert_eq!(
            labels,
            [
                "Capability",
                "Domain Knowledge",
                "Affordance",
                "Impact Domain"
            ]
        );
    }

    #[test]
    fn tl2_under_tl0_is_rejected_by_name() {
        let src = doc(&format!(
            r#"{ROOTS}, {{"id":"capability/bad","level":2,"label":"Bad","parent":"capability"}}"#
        ));
        let err = Taxonomy::from_document(&src).unwrap_err();
        assert!(matches!(&err, TaxonomyError::LevelMismatch { id, .. } if id == "capability/bad"));
        assert!(err.to_string().contains("capability/bad"));
    }

    #[test]
    fn duplicate_ids_and_wrong_roots() {
        let dup = doc(&format!(
            r#"{ROOTS}, {{"id":"capability","level":0,"label":"Capability"}}"#
        ));
        assert_eq!(
            Taxonomy::from_document(&dup).unwrap_err(),
            TaxonomyError::DuplicateId("capability".into())
        );
        let three = doc(r#"{"id":"a","level":0,"label":"Capability"},
               {"id":"b","level":0,"label":"Affordance"},
               {"id":"c","level":0,"label":"Impact Domain"}"#);
        assert!(matches!(
            Taxonomy::from_document(&three),
            Err(TaxonomyError::CategorySet(_))
        ));
    }

    #[test]
    fn parse_failure_is_reported() {
        assert!(matches!(
            load_taxonomy("{\"version\":"),
            Err(TaxonomyError::Parse(_))
        ));
    }

    #[test]
    fn custom_document_may_extend_with_tl3_tl4() {
        let mut value: serde_json::Value = serde_json::from_str(BUNDLED_TAXONOMY).unwrap();
        let nodes = value["nodes"].as_array_mut().unwrap();
        nodes.push(serde_json::json!({
            "id": "capability/reasoning/moral-reasoning/value-lock-in",
            "level": 3, "label": "Value lock-in",
            "parent": "capability/reasoning/moral-reasoning"
        }));
        nodes.push(serde_json::json!({
            "id": "capability/reasoning/moral-reasoning/value-lock-in/entrenched-norms",
            "level": 4, "label": "Entrenched norms",
            "parent": "capability/reasoning/moral-reasoning/value-lock-in"
        }));
        let t = load_taxonomy(&value.to_string()).unwrap();
        let leaf = t
            .resolve_path(&[
                "capability",
                "REASONING",
                "moral  reasoning",
                "Value lock-in",
                "Entrenched norms",
            ])
            .unwrap();
        assert_eq!(leaf.level, TaxonomyLevel::TL4);
        assert!(t.children(&leaf.id).unwrap().is_empty());

        // Renaming a TL2 aspect breaks the normative core.
        let mut bad: serde_json::Value = serde_json::from_str(BUNDLED_TAXONOMY).unwrap();
        bad["nodes"][2]["label"] = "Something Else".into();
        assert!(matches!(
            load_taxonomy(&bad.to_string()),
            Err(TaxonomyError::CoreMismatch(_))
        ));
    }

    #[test]
    fn children_examples() {
        let t = Taxonomy::bundled();
        let caps: Vec<_> = t
            .children("capability")
            .unwrap()
            .into_iter()
            .map(|n| n.label.as_str())
            .collect();
        assert_eq!(
            caps,
            [
                "Reasoning",
                "Agency",
                "General Knowledge Structure",
                "Environment Interaction",
                "Richness of Engagement"
            ]
        );
        let dk = t
            .children("domain-knowledge/high-risk-knowledge-domain")
            .unwrap();
        assert_eq!(dk.len(), 5);
        assert_eq!(dk.last().unwrap().label, "Social Sciences");
        assert_eq!(
            t.children("nope").unwrap_err(),
            TaxonomyError::UnknownId("nope".into())
        );
    }

    #[test]
    fn resolve_path_examples() {
        let t = Taxonomy::bundled();
        let moral = t
            .resolve_path(&["Capability", "Reasoning", "Moral Reasoning"])
            .unwrap();
        assert_eq!(moral.id, "capability/reasoning/moral-reasoning");
        assert_eq!(moral.level, TaxonomyLevel::TL2);
        let gbd = t
            .resolve_path(&["Impact Domain", "Biosphere", "Global Biosphere Dynamics"])
            .unwrap();
        assert_eq!(gbd.level, TaxonomyLevel::TL2);
        assert!(matches!(
            t.resolve_path(&["Capability", "Nonexistent"]),
            Err(TaxonomyError::NoMatch(_))
        ));
        assert_eq!(
            t.resolve_path::<&str>(&[]).unwrap_err(),
            TaxonomyError::EmptyPath
        );
    }

    #[test]
    fn forest_shape_and_round_trip() {
        let t = Taxonomy::bundled();
        let edges = t.nodes().iter().filter(|n| n.parent.is_some()).count();
        assert_eq!(t.len(), edges + 4);
        for node in t.nodes() {
            if let Some(parent) = &node.parent {
                assert_eq!(t.get(parent).unwrap().level.depth() + 1, node.level.depth());
            }
            let path = t.label_path(&node.id).unwrap();
            assert_eq!(t.resolve_path(&path).unwrap().id, node.id);
        }
    }

    #[test]
    fn label_helpers() {
        assert_eq!(normalize_label("  Speed   &  Scale "), "speed & scale");
        assert_eq!(slugify("Speed & Scale"), "speed-scale");
        assert_eq!(slugify("Meta-agency"), "meta-agency");
        let t = Taxonomy::bundled();
        assert_eq!(
            t.lookup("Affordance/Operational Affordance/Speed & Scale")
                .unwrap()
                .id,
            "affordance/operational-affordance/speed-scale"
        );
        assert_eq!(
            t.category("impact-domain/individual/privacy-security")
                .unwrap(),
            AspectCategory::ImpactDomain
        );
    }
}
