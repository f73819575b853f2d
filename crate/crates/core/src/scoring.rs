//! Author credit and the yearly productivity index.
//!
//! A researcher's index is the sum, over their publications in the
//! observation window, of normalized impact times their author weight,
//! divided by the number of years they were on faculty in the window.
//!
//! Author weights are fractional (1/s) everywhere except in life-science
//! fields with more than two authors, where byline position matters:
//!
//! - intramural (first and last author share a university): first and last
//!   get 0.40 each, the s-2 authors in between split 0.20.
//! - extramural: first and last get 0.30, second and penultimate 0.15, the
//!   s-4 remaining authors split 0.10.
//!
//! For short
//! bylines (s = 3, 4) roles coincide or the residual pool is empty, so the
//! role weights are rescaled to sum to one.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{normalized_impact, CitationBaseline};
use crate::model::{FieldTaxonomy, ObservationConfig, Publication, Researcher};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("publication `{pub_id}` has no author at position {position}")]
    InvalidPosition { pub_id: String, position: u32 },
    #[error("researcher `{0}` has no faculty years in the observation window")]
    NoFacultyYears(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    Fractional,
    Intramural,
    Extramural,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthorWeights {
    /// Indexed by position - 1.
    pub weights: Vec<f64>,
    pub scheme: WeightScheme,
    /// Role weights were rescaled because the byline was too short for them.
    pub renormalized: bool,
}

const INTRA_END: f64 = 0.40;
const INTRA_MIDDLE_POOL: f64 = 0.20;
const EXTRA_END: f64 = 0.30;
const EXTRA_NEXT_TO_END: f64 = 0.15;
const EXTRA_MIDDLE_POOL: f64 = 0.10;

fn positional_weights(s: usize, intramural: bool) -> (Vec<f64>, bool) {
    debug_assert!(s >= 3);
    let mut w = vec![0.0; s];
    if intramural {
        w[0] = INTRA_END;
        w[s - 1] = INTRA_END;
        let middle = INTRA_MIDDLE_POOL / (s - 2) as f64;
        for x in &mut w[1..s - 1] {
            *x = middle;
        }
        return (w, false);
    }
    w[0] = EXTRA_END;
    w[s - 1] = EXTRA_END;
    // For s = 3 the second and penultimate author are the same person, who
    // holds that role once.
    w[1] = EXTRA_NEXT_TO_END;
    w[s - 2] = EXTRA_NEXT_TO_END;
    if s >= 5 {
        let rest = EXTRA_MIDDLE_POOL / (s - 4) as f64;
        for x in &mut w[2..s - 2] {
            *x = rest;
        }
        return (w, false);
    }
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    (w, true)
}

/// Weights for every byline position of `publication`.
pub fn author_weights(publication: &Publication, life_science: bool) -> AuthorWeights {
    let s = publication.n_authors();
    if !life_science || s <= 2 {
        return AuthorWeights {
            weights: vec![1.0 / s as f64; s],
            scheme: WeightScheme::Fractional,
            renormalized: false,
        };
    }
    let first = &publication.authorships[0].university_id;
    let last = &publication.authorships[s - 1].university_id;
    let intramural = first == last;
    let (weights, renormalized) = positional_weights(s, intramural);
    AuthorWeights {
        weights,
        scheme: if intramural {
            WeightScheme::Intramural
        } else {
            WeightScheme::Extramural
        },
        renormalized,
    }
}

/// Credit share of the author at 1-based `position`.
pub fn author_weight(
    publication: &Publication,
    position: u32,
    life_science: bool,
) -> Result<f64, ScoringError> {
    let s = publication.n_authors();
    if position == 0 || position as usize > s {
        return Err(ScoringError::InvalidPosition {
            pub_id: publication.id.clone(),
            position,
        });
    }
    Ok(author_weights(publication, life_science).weights[position as usize - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub researcher_id: String,
    /// Yearly productivity index.
    pub p: f64,
    pub t_years: u32,
    pub n_publications: usize,
    pub n_cited_publications: usize,
    pub has_publications: bool,
    pub has_citations: bool,
}

/// A scorecard plus the publications that needed special handling.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreDetail {
    pub card: ScoreCard,
    /// Impact undefined (every category cell empty); excluded from the sum.
    pub skipped: Vec<String>,
    /// Positional weights were rescaled for a short byline.
    pub renormalized: Vec<String>,
}

/// Weighted impact credited to the author at `position`, or `None` when the
/// publication's impact is undefined.
pub fn contribution(
    publication: &Publication,
    position: u32,
    baseline: &CitationBaseline,
    life_science: bool,
) -> Result<Option<f64>, ScoringError> {
    let weight = author_weight(publication, position, life_science)?;
    Ok(normalized_impact(publication, baseline).map(|impact| impact * weight))
}

/// Scores one researcher. `publications` may contain anything; only those in
/// the window that list the researcher are counted.
pub fn score_researcher<'a, I>(
    researcher: &Researcher,
    publications: I,
    baseline: &CitationBaseline,
    taxonomy: &FieldTaxonomy,
    config: &ObservationConfig,
) -> Result<ScoreDetail, ScoringError>
where
    I: IntoIterator<Item = &'a Publication>,
{
    let window = config.window();
    let t_years = researcher.years_on_faculty(window.start, window.end);
    if t_years == 0 {
        return Err(ScoringError::NoFacultyYears(researcher.id.clone()));
    }
    let life_science = taxonomy.is_life_science(&researcher.sds_code);

    let mut sum = 0.0;
    let mut n_publications = 0;
    let mut n_cited = 0;
    let mut skipped = Vec::new();
    let mut renormalized = Vec::new();
    for p in publications {
        if !window.contains(p.year) {
            continue;
        }
        let Some(position) = p.position_of(&researcher.id) else {
            continue;
        };
        n_publications += 1;
        if p.citations >= 1 {
            n_cited += 1;
        }
        let weights = author_weights(p, life_science);
        if weights.renormalized {
            renormalized.push(p.id.clone());
        }
        match contribution(p, position, baseline, life_science)? {
            Some(c) => sum += c,
            None => {
                log::warn!(
                    "publication `{}` has no cited baseline in any category; skipped for `{}`",
                    p.id,
                    researcher.id
                );
                skipped.push(p.id.clone());
            }
        }
    }

    Ok(ScoreDetail {
        card: ScoreCard {
            researcher_id: researcher.id.clone(),
            p: sum / t_years as f64,
            t_years,
            n_publications,
            n_cited_publications: n_cited,
            has_publications: n_publications > 0,
            has_citations: n_cited > 0,
        },
        skipped,
        renormalized,
    })
}

/// The yearly productivity index of one researcher.
pub fn productivity<'a, I>(
    researcher: &Researcher,
    publications: I,
    baseline: &CitationBaseline,
    taxonomy: &FieldTaxonomy,
    config: &ObservationConfig,
) -> Result<ScoreCard, ScoringError>
where
    I: IntoIterator<Item = &'a Publication>,
{
    score_researcher(researcher, publications, baseline, taxonomy, config).map(|d| d.card)
}

/// Researcher id -> indices into the publication list where they appear.
pub fn index_by_author(publications: &[Publication]) -> BTreeMap<&str, Vec<usize>> {
    let mut index: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in publications.iter().enumerate() {
        for a in &p.authorships {
            if let Some(id) = a.author.researcher_id() {
                index.entry(id).or_default().push(i);
            }
        }
    }
    index
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoringOutcome {
    /// One card per researcher on faculty at least one year in the window.
    pub cards: BTreeMap<String, ScoreCard>,
    pub skipped_publications: BTreeSet<String>,
    pub renormalized_publications: BTreeSet<String>,
}

/// Scores every researcher with at least one faculty year in the window.
pub fn score_all(
    researchers: &[Researcher],
    publications: &[Publication],
    baseline: &CitationBaseline,
    taxonomy: &FieldTaxonomy,
    config: &ObservationConfig,
) -> ScoringOutcome {
    let window = config.window();
    let index = index_by_author(publications);
    let details: Vec<ScoreDetail> = researchers
        .par_iter()
        .filter(|r| r.years_on_faculty(window.start, window.end) > 0)
        .map(|r| {
            let own = index
                .get(r.id.as_str())
                .into_iter()
                .flatten()
                .map(|&i| &publications[i]);
            score_researcher(r, own, baseline, taxonomy, config)
                .expect("positions come from the publication and t_years > 0 was checked")
        })
        .collect();

    let mut outcome = ScoringOutcome::default();
    for d in details {
        outcome.skipped_publications.extend(d.skipped);
        outcome.renormalized_publications.extend(d.renormalized);
        outcome.cards.insert(d.card.researcher_id.clone(), d.card);
    }
    outcome
}
