//! Same-surname, same-university link detection between junior entrants
//! ("children") and senior full professors ("parents").
//!
//! A child is anyone with an Assistant or Associate rank event inside the
//! entry window. A parent candidate held Full rank in some year from the
//! year before the entry window through its end; against a particular child
//! the parent must already have been Full in the year before the child's
//! entry. Common surnames, nationally or in the university's region, are
//! never linked.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ObservationConfig, Researcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cardinality {
    OneToOne,
    OneChildManyParents,
    ManyChildrenOneParent,
    ManyChildrenManyParents,
}

impl Cardinality {
    pub fn classify(n_children: usize, n_parents: usize) -> Cardinality {
        match (n_children > 1, n_parents > 1) {
            (false, false) => Cardinality::OneToOne,
            (false, true) => Cardinality::OneChildManyParents,
            (true, false) => Cardinality::ManyChildrenOneParent,
            (true, true) => Cardinality::ManyChildrenManyParents,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cardinality::OneToOne => "OneToOne",
            Cardinality::OneChildManyParents => "OneChildManyParents",
            Cardinality::ManyChildrenOneParent => "ManyChildrenOneParent",
            Cardinality::ManyChildrenManyParents => "ManyChildrenManyParents",
        }
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Cardinality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "OneToOne" => Ok(Cardinality::OneToOne),
            "OneChildManyParents" => Ok(Cardinality::OneChildManyParents),
            "ManyChildrenOneParent" => Ok(Cardinality::ManyChildrenOneParent),
            "ManyChildrenManyParents" => Ok(Cardinality::ManyChildrenManyParents),
            other => Err(format!("unknown cardinality class `{other}`")),
        }
    }
}

/// All children and parent candidates sharing a surname at one university.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KinshipLink {
    pub university_id: String,
    pub surname: String,
    pub children: BTreeSet<String>,
    pub parents: BTreeSet<String>,
    pub cardinality: Cardinality,
    /// Child id -> the parents that satisfy the timing rule for that child.
    pub eligible_parents: BTreeMap<String, BTreeSet<String>>,
}

impl KinshipLink {
    /// A link in which every parent is eligible for every child.
    pub fn new(
        university_id: impl Into<String>,
        surname: impl Into<String>,
        children: BTreeSet<String>,
        parents: BTreeSet<String>,
    ) -> Self {
        let eligible_parents = children
            .iter()
            .map(|c| (c.clone(), parents.clone()))
            .collect();
        KinshipLink {
            university_id: university_id.into(),
            surname: surname.into(),
            cardinality: Cardinality::classify(children.len(), parents.len()),
            children,
            parents,
            eligible_parents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KinshipPair {
    pub child_id: String,
    pub parent_ids: BTreeSet<String>,
    pub university_id: String,
    pub surname: String,
    pub cardinality: Cardinality,
}

/// Year the researcher entered the child cohort, if they did.
pub fn entry_year(researcher: &Researcher, config: &ObservationConfig) -> Option<i32> {
    researcher
        .entry_event_in(config.entry_window())
        .map(|e| e.year)
}

pub fn candidate_children(researchers: &[Researcher], config: &ObservationConfig) -> BTreeSet<String> {
    researchers
        .iter()
        .filter(|r| entry_year(r, config).is_some())
        .map(|r| r.id.clone())
        .collect()
}

pub fn is_candidate_parent(researcher: &Researcher, config: &ObservationConfig) -> bool {
    let w = config.entry_window();
    (w.start - 1..=w.end).any(|y| researcher.is_full_in(y))
}

pub fn candidate_parents(researchers: &[Researcher], config: &ObservationConfig) -> BTreeSet<String> {
    researchers
        .iter()
        .filter(|r| is_candidate_parent(r, config))
        .map(|r| r.id.clone())
        .collect()
}

/// The parent was already Full in the year before the child's entry.
pub fn parent_eligible_for(parent: &Researcher, child_entry_year: i32) -> bool {
    parent.is_full_in(child_entry_year - 1)
}

/// Groups children and parent candidates by (university, surname) and keeps
/// the groups with at least one of each whose surname is not excluded.
///
/// A researcher in both candidate sets is treated as a child.
pub fn detect_links(
    researchers: &[Researcher],
    children: &BTreeSet<String>,
    parents: &BTreeSet<String>,
    config: &ObservationConfig,
) -> Vec<KinshipLink> {
    #[derive(Default)]
    struct Group<'a> {
        children: Vec<&'a Researcher>,
        parents: Vec<&'a Researcher>,
    }

    let mut groups: BTreeMap<(&str, &str), Group<'_>> = BTreeMap::new();
    for r in researchers {
        let is_child = children.contains(&r.id);
        let is_parent = !is_child && parents.contains(&r.id);
        if !is_child && !is_parent {
            continue;
        }
        let g = groups
            .entry((r.university_id.as_str(), r.surname.as_str()))
            .or_default();
        if is_child {
            g.children.push(r);
        } else {
            g.parents.push(r);
        }
    }

    let mut links = Vec::new();
    for ((university, surname), group) in groups {
        if group.children.is_empty() || group.parents.is_empty() {
            continue;
        }
        let region = &group.children[0].region;
        if config.is_surname_excluded(surname, region) {
            continue;
        }
        let child_ids: BTreeSet<String> = group.children.iter().map(|r| r.id.clone()).collect();
        let parent_ids: BTreeSet<String> = group.parents.iter().map(|r| r.id.clone()).collect();
        let eligible_parents = group
            .children
            .iter()
            .map(|child| {
                let entered = entry_year(child, config).expect("children have an entry year");
                let eligible = group
                    .parents
                    .iter()
                    .filter(|p| parent_eligible_for(p, entered))
                    .map(|p| p.id.clone())
                    .collect();
                (child.id.clone(), eligible)
            })
            .collect();
        links.push(KinshipLink {
            university_id: university.to_string(),
            surname: surname.to_string(),
            cardinality: Cardinality::classify(child_ids.len(), parent_ids.len()),
            children: child_ids,
            parents: parent_ids,
            eligible_parents,
        });
    }
    links
}

/// One pair per child. A child with several parents yields a single pair
/// carrying all of them; a child with no eligible parent yields none.
pub fn resolve_pairs(links: &[KinshipLink]) -> Vec<KinshipPair> {
    let mut pairs = Vec::new();
    for link in links {
        for child in &link.children {
            let parent_ids = link
                .eligible_parents
                .get(child)
                .cloned()
                .unwrap_or_default();
            if parent_ids.is_empty() {
                continue;
            }
            pairs.push(KinshipPair {
                child_id: child.clone(),
                parent_ids,
                university_id: link.university_id.clone(),
                surname: link.surname.clone(),
                cardinality: link.cardinality,
            });
        }
    }
    pairs
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Detection {
    pub links: Vec<KinshipLink>,
    pub pairs: Vec<KinshipPair>,
    /// Researchers who qualify both as child and as parent candidate.
    pub role_overlap: usize,
}

impl Detection {
    pub fn child_ids(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.child_id.as_str()).collect()
    }

    pub fn parent_ids(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| p.parent_ids.iter().map(String::as_str))
            .collect()
    }
}

/// Candidates, links and pairs in one pass.
pub fn detect(researchers: &[Researcher], config: &ObservationConfig) -> Detection {
    let children = candidate_children(researchers, config);
    let parents = candidate_parents(researchers, config);
    let role_overlap = children.intersection(&parents).count();
    let links = detect_links(researchers, &children, &parents, config);
    let pairs = resolve_pairs(&links);
    Detection {
        links,
        pairs,
        role_overlap,
    }
}
