//! Reproducible synthetic academia: rosters with skewed surname frequencies,
//! lognormal or gamma-Poisson citations, and planted same-surname
//! child/parent pairs with known ground truth.
//!
//! Each entity class (surnames, roster, talent, planting, publications)
//! draws from its own stream derived from the master seed. Publications are
//! further split per researcher, so the corpus can be generated in parallel
//! and stays identical whatever the thread count.

use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinship::detect;
use crate::model::{
    normalize_surname, Area, AuthorRef, Authorship, DatasetBundle, FieldInfo, FieldTaxonomy,
    ObservationConfig, ObservationScalars, Publication, Rank, RankEvent, Researcher,
};

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("cannot plant {requested} pairs: only {available} eligible {role}")]
    Infeasible {
        requested: usize,
        available: usize,
        role: &'static str,
    },
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SurnamePool {
    /// Truncated Zipf: the k-th most common surname has weight 1 / k^exponent.
    Zipf { size: usize, exponent: f64 },
    /// Explicit (surname, relative frequency) list.
    Explicit { entries: Vec<(String, f64)> },
    /// Every researcher gets a surname nobody else has.
    Unique,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CitationModel {
    /// floor(exp(N(mu, sigma))), shifted by log talent and publication age.
    LogNormal { mu: f64, sigma: f64 },
    /// Gamma-Poisson mixture with the given mean and shape.
    NegativeBinomial { mean: f64, dispersion: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedPerformance {
    /// Planted children are ordinary entrants.
    Matched,
    /// Planted children publish less and are cited less.
    Depressed,
    /// Planted children publish more and are cited more.
    Boosted,
}

impl PlantedPerformance {
    fn talent_factor(self) -> f64 {
        match self {
            PlantedPerformance::Matched => 1.0,
            PlantedPerformance::Depressed => 0.35,
            PlantedPerformance::Boosted => 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_universities: usize,
    pub n_sds: usize,
    pub researchers_per_sds: usize,
    pub surname_pool: SurnamePool,
    pub citation_distribution: CitationModel,
    pub planted_pairs: usize,
    pub planted_child_performance: PlantedPerformance,
    /// Give each planted pair a fresh surname found nowhere else.
    pub rare_planted_surnames: bool,
    /// Put the k most frequent pool surnames on the national exclusion list.
    pub exclude_top_surnames: usize,
    pub national_exclusions: Vec<String>,
    /// (region, surname)
    pub regional_exclusions: Vec<(String, String)>,
    /// Mean publications per researcher-year at unit talent.
    pub publications_per_year: f64,
    /// Sigma of the lognormal talent multiplier.
    pub talent_sigma: f64,
    /// Mean number of co-authors beyond the first.
    pub mean_extra_authors: f64,
    pub max_authors: usize,
    /// Chance that a co-author slot goes to a roster colleague.
    pub internal_coauthor_share: f64,
    /// Windows, tier fractions and the other analysis knobs.
    pub observation: ObservationScalars,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 42,
            n_universities: 12,
            n_sds: 12,
            researchers_per_sds: 50,
            surname_pool: SurnamePool::Zipf { size: 400, exponent: 1.0 },
            citation_distribution: CitationModel::LogNormal { mu: 1.0, sigma: 1.1 },
            planted_pairs: 5,
            planted_child_performance: PlantedPerformance::Matched,
            rare_planted_surnames: true,
            exclude_top_surnames: 0,
            national_exclusions: Vec::new(),
            regional_exclusions: Vec::new(),
            publications_per_year: 1.2,
            talent_sigma: 0.7,
            mean_extra_authors: 2.5,
            max_authors: 12,
            internal_coauthor_share: 0.4,
            observation: ObservationScalars::default(),
        }
    }
}

impl SynthConfig {
    pub fn n_researchers(&self) -> usize {
        self.n_sds * self.researchers_per_sds
    }

    /// Sets `planted_pairs` to `share` of the roster, rounded.
    pub fn with_planting_share(mut self, share: f64) -> Self {
        self.planted_pairs = (share * self.n_researchers() as f64).round() as usize;
        self
    }

    fn check(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_universities == 0 || self.n_sds == 0 || self.researchers_per_sds == 0 {
            return bad("n_universities, n_sds and researchers_per_sds must be positive");
        }
        if self.planted_pairs > self.n_researchers() {
            return Err(SynthError::Infeasible {
                requested: self.planted_pairs,
                available: self.n_researchers(),
                role: "researchers",
            });
        }
        if !(self.publications_per_year >= 0.0 && self.talent_sigma >= 0.0 && self.mean_extra_authors >= 0.0) {
            return bad("rates and sigmas must be non-negative");
        }
        if self.max_authors == 0 {
            return bad("max_authors must be positive");
        }
        if !(0.0..=1.0).contains(&self.internal_coauthor_share) {
            return bad("internal_coauthor_share must be in [0, 1]");
        }
        match &self.surname_pool {
            SurnamePool::Zipf { size, exponent } if *size == 0 || !exponent.is_finite() => {
                return bad("Zipf pool needs a positive size and a finite exponent")
            }
            SurnamePool::Explicit { entries }
                if entries.is_empty() || entries.iter().any(|(_, w)| !(*w > 0.0 && w.is_finite())) =>
            {
                return bad("explicit pool needs at least one surname, all weights positive")
            }
            _ => {}
        }
        match self.citation_distribution {
            CitationModel::LogNormal { sigma, .. } if !(sigma >= 0.0) => bad("lognormal sigma must be non-negative"),
            CitationModel::NegativeBinomial { mean, dispersion } if !(mean >= 0.0 && dispersion > 0.0) => {
                bad("negative binomial needs mean >= 0 and dispersion > 0")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PlantedPair {
    pub child_id: String,
    pub parent_id: String,
    pub surname: String,
    pub university_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pairs: Vec<PlantedPair>,
}

impl GroundTruth {
    /// (child_id, parent_id) in planting order.
    pub fn id_pairs(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|p| (p.child_id.clone(), p.parent_id.clone()))
            .collect()
    }

    pub fn surnames(&self) -> BTreeSet<String> {
        self.pairs.iter().map(|p| p.surname.clone()).collect()
    }
}

// ---------------------------------------------------------------------------
// Seeds and names

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of sub-stream `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ splitmix64(index.wrapping_add(0x5EED)))
}

const STREAM_SURNAMES: u64 = 1;
const STREAM_ROSTER: u64 = 2;
const STREAM_TALENT: u64 = 3;
const STREAM_PLANTING: u64 = 4;
const STREAM_PUBLICATIONS: u64 = 5;

fn stream(seed: u64, class: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, class))
}

const SYLLABLES: [&str; 24] = [
    "BA", "BE", "BIA", "CA", "CO", "DE", "FE", "FO", "GA", "GRE", "LA", "LO", "MA", "MO", "NE",
    "PA", "PE", "RI", "RO", "SA", "TO", "VE", "VI", "ZA",
];
const POOL_ENDINGS: [&str; 4] = ["LLI", "NI", "RI", "SSI"];
const RARE_ENDING: &str = "TTONE";
const FIRST_NAMES: [&str; 16] = [
    "Alessandra", "Andrea", "Anna", "Carlo", "Chiara", "Elena", "Francesca", "Giovanni", "Giulia",
    "Luca", "Marco", "Maria", "Paolo", "Roberta", "Sara", "Stefano",
];

fn syllable_name(mut k: usize, ending: &str) -> String {
    let mut name = String::new();
    loop {
        name.push_str(SYLLABLES[k % SYLLABLES.len()]);
        k /= SYLLABLES.len();
        if k == 0 {
            break;
        }
        k -= 1;
    }
    name.push_str(ending);
    name
}

/// Distinct pool-style surnames. Pool names never end like rare ones.
fn pool_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|k| syllable_name(k / POOL_ENDINGS.len(), POOL_ENDINGS[k % POOL_ENDINGS.len()]))
        .collect()
}

/// Pool surnames with their relative frequencies, most frequent first.
fn pool_entries(pool: &SurnamePool) -> Vec<(String, f64)> {
    match pool {
        SurnamePool::Zipf { size, exponent } => pool_names(*size)
            .into_iter()
            .enumerate()
            .map(|(k, name)| (name, 1.0 / ((k + 1) as f64).powf(*exponent)))
            .collect(),
        SurnamePool::Explicit { entries } => {
            let mut merged: BTreeMap<String, f64> = BTreeMap::new();
            for (name, w) in entries {
                *merged.entry(normalize_surname(name)).or_default() += w;
            }
            let mut sorted: Vec<(String, f64)> = merged.into_iter().collect();
            sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            sorted
        }
        SurnamePool::Unique => Vec::new(),
    }
}

const REGIONS: [(&str, Area); 9] = [
    ("PIEMONTE", Area::North),
    ("LOMBARDIA", Area::North),
    ("VENETO", Area::North),
    ("TOSCANA", Area::Centre),
    ("LAZIO", Area::Centre),
    ("MARCHE", Area::Centre),
    ("CAMPANIA", Area::South),
    ("PUGLIA", Area::South),
    ("SICILIA", Area::South),
];

fn university_id(u: usize) -> String {
    format!("U{:02}", u + 1)
}

fn university_region(u: usize) -> &'static str {
    REGIONS[u % REGIONS.len()].0
}

fn sds_code(j: usize) -> String {
    format!("S{:03}", j + 1)
}

fn taxonomy(n_sds: usize) -> FieldTaxonomy {
    let entries = (0..n_sds)
        .map(|j| {
            let uda = j % 9;
            (
                sds_code(j),
                FieldInfo {
                    uda_code: format!("{:02}", uda + 1),
                    life_science: matches!(uda, 4 | 5),
                },
            )
        })
        .collect();
    FieldTaxonomy { entries }
}

fn categories_of(sds: &str) -> [String; 2] {
    [format!("{sds}-A"), format!("{sds}-B")]
}

// ---------------------------------------------------------------------------
// Roster

#[derive(Debug, Clone, Copy)]
enum Career {
    EntrantAssistant,
    EntrantAssociate,
    SeniorAssistant,
    SeniorAssociate,
    Full,
}

const CAREERS: [(Career, f64); 5] = [
    (Career::EntrantAssistant, 0.16),
    (Career::EntrantAssociate, 0.06),
    (Career::SeniorAssistant, 0.22),
    (Career::SeniorAssociate, 0.24),
    (Career::Full, 0.32),
];

/// Rank history, hire year and leave year for one career path. Promotions
/// of non-entrants happen after the entry window so they never look like
/// cohort entry.
fn career_events(career: Career, s: &ObservationScalars, rng: &mut ChaCha8Rng) -> (Vec<RankEvent>, Option<i32>) {
    let ev = |year, rank| RankEvent { year, rank };
    let late_start = s.window_start.max(s.entry_end + 1);
    let late = |rng: &mut ChaCha8Rng, from: i32| {
        let from = from.max(late_start);
        (from <= s.window_end).then(|| rng.random_range(from..=s.window_end))
    };
    let mut events = Vec::new();
    let mut leave = None;
    match career {
        Career::EntrantAssistant | Career::EntrantAssociate => {
            let (first, next) = match career {
                Career::EntrantAssistant => (Rank::Assistant, Rank::Associate),
                _ => (Rank::Associate, Rank::Full),
            };
            let y = rng.random_range(s.entry_start..=s.entry_end);
            events.push(ev(y, first));
            let p_promote = if first == Rank::Assistant { 0.35 } else { 0.2 };
            if rng.random_bool(p_promote) {
                if let Some(p) = late(rng, y + 2) {
                    events.push(ev(p, next));
                }
            }
        }
        Career::SeniorAssistant => {
            let h = rng.random_range(s.entry_start - 12..=s.entry_start - 2);
            events.push(ev(h, Rank::Assistant));
            if rng.random_bool(0.3) {
                if let Some(p) = late(rng, late_start) {
                    events.push(ev(p, Rank::Associate));
                }
            }
        }
        Career::SeniorAssociate => {
            let a = rng.random_range(s.entry_start - 20..=s.entry_start - 2);
            if rng.random_bool(0.5) {
                events.push(ev(a - rng.random_range(3..=8), Rank::Assistant));
            }
            events.push(ev(a, Rank::Associate));
            if rng.random_bool(0.25) {
                if let Some(p) = late(rng, late_start) {
                    events.push(ev(p, Rank::Full));
                }
            }
        }
        Career::Full => {
            let f = rng.random_range(s.entry_start - 25..=s.entry_start - 2);
            if rng.random_bool(0.7) {
                events.push(ev(f - rng.random_range(3..=10), Rank::Associate));
            }
            events.push(ev(f, Rank::Full));
            if rng.random_bool(0.08) && s.window_start < s.window_end {
                leave = Some(rng.random_range(s.window_start..s.window_end));
            }
        }
    }
    (events, leave)
}

struct Roster {
    researchers: Vec<Researcher>,
    talent: Vec<f64>,
    truth: GroundTruth,
    config: ObservationConfig,
}

fn observation_config(cfg: &SynthConfig, pool: &[(String, f64)]) -> ObservationConfig {
    let mut config = ObservationConfig {
        scalars: cfg.observation.clone(),
        ..ObservationConfig::default()
    };
    for (region, area) in REGIONS {
        config.region_area_map.insert(region.to_string(), area);
    }
    config
        .national_surname_exclusions
        .extend(pool.iter().take(cfg.exclude_top_surnames).map(|(s, _)| s.clone()));
    config
        .national_surname_exclusions
        .extend(cfg.national_exclusions.iter().map(|s| normalize_surname(s)));
    for (region, surname) in &cfg.regional_exclusions {
        config
            .regional_surname_exclusions
            .entry(region.clone())
            .or_default()
            .insert(normalize_surname(surname));
    }
    config
}

fn build_roster(cfg: &SynthConfig) -> Result<Roster, SynthError> {
    cfg.check()?;
    let s = &cfg.observation;
    let pool = pool_entries(&cfg.surname_pool);
    let config = observation_config(cfg, &pool);

    let mut surname_rng = stream(cfg.seed, STREAM_SURNAMES);
    let mut roster_rng = stream(cfg.seed, STREAM_ROSTER);
    let mut talent_rng = stream(cfg.seed, STREAM_TALENT);
    let pool_index = match cfg.surname_pool {
        SurnamePool::Unique => None,
        _ => Some(WeightedIndex::new(pool.iter().map(|(_, w)| *w)).expect("weights checked")),
    };
    let unique_names = match cfg.surname_pool {
        SurnamePool::Unique => pool_names(cfg.n_researchers()),
        _ => Vec::new(),
    };
    let talent_dist = LogNormal::new(0.0, cfg.talent_sigma).expect("sigma checked");
    let career_index = WeightedIndex::new(CAREERS.iter().map(|c| c.1)).expect("constant weights");

    let mut researchers = Vec::with_capacity(cfg.n_researchers());
    let mut talent = Vec::with_capacity(cfg.n_researchers());
    for j in 0..cfg.n_sds {
        for _ in 0..cfg.researchers_per_sds {
            let i = researchers.len();
            let surname = match &pool_index {
                Some(index) => pool[index.sample(&mut surname_rng)].0.clone(),
                None => unique_names[i].clone(),
            };
            let first = FIRST_NAMES[surname_rng.random_range(0..FIRST_NAMES.len())];
            let u = roster_rng.random_range(0..cfg.n_universities);
            let career = CAREERS[career_index.sample(&mut roster_rng)].0;
            let (rank_events, leave_year) = career_events(career, s, &mut roster_rng);
            researchers.push(Researcher {
                id: format!("R{:05}", i + 1),
                full_name: format!("{first} {surname}"),
                surname,
                university_id: university_id(u),
                region: university_region(u).to_string(),
                sds_code: sds_code(j),
                hire_year: rank_events[0].year,
                rank_events,
                leave_year,
            });
            talent.push(talent_dist.sample(&mut talent_rng));
        }
    }

    let truth = plant(cfg, &config, &pool, &mut researchers, &mut talent)?;
    Ok(Roster { researchers, talent, truth, config })
}

/// Turns `planted_pairs` random entrants and as many senior full professors
/// into same-surname, same-university pairs.
fn plant(
    cfg: &SynthConfig,
    config: &ObservationConfig,
    pool: &[(String, f64)],
    researchers: &mut [Researcher],
    talent: &mut [f64],
) -> Result<GroundTruth, SynthError> {
    let n = cfg.planted_pairs;
    if n == 0 {
        return Ok(GroundTruth::default());
    }
    let entry = config.entry_window();
    let children: Vec<usize> = (0..researchers.len())
        .filter(|&i| researchers[i].entry_event_in(entry).is_some())
        .collect();
    let parents: Vec<usize> = (0..researchers.len())
        .filter(|&i| researchers[i].is_full_in(entry.start - 1))
        .collect();
    for (available, role) in [(children.len(), "entrants"), (parents.len(), "full professors")] {
        if available < n {
            return Err(SynthError::Infeasible { requested: n, available, role });
        }
    }

    let mut rng = stream(cfg.seed, STREAM_PLANTING);
    let chosen_children: Vec<usize> = sample(&mut rng, children.len(), n).into_iter().map(|k| children[k]).collect();
    let chosen_parents: Vec<usize> = sample(&mut rng, parents.len(), n).into_iter().map(|k| parents[k]).collect();

    let taken: BTreeSet<String> = pool
        .iter()
        .map(|(s, _)| s.clone())
        .chain(researchers.iter().map(|r| r.surname.clone()))
        .collect();
    let mut rare = (0..).map(|k| syllable_name(k, RARE_ENDING)).filter(|s| !taken.contains(s));

    let mut truth = GroundTruth::default();
    for (&c, &p) in chosen_children.iter().zip(&chosen_parents) {
        let surname = if cfg.rare_planted_surnames {
            rare.next().expect("infinite name supply")
        } else {
            researchers[c].surname.clone()
        };
        let (university, region) = (researchers[c].university_id.clone(), researchers[c].region.clone());
        for &i in &[c, p] {
            let r = &mut researchers[i];
            let first = r.full_name.split_whitespace().next().unwrap_or("Anna").to_string();
            r.full_name = format!("{first} {surname}");
            r.surname = surname.clone();
            r.university_id = university.clone();
            r.region = region.clone();
        }
        talent[c] *= cfg.planted_child_performance.talent_factor();
        truth.pairs.push(PlantedPair {
            child_id: researchers[c].id.clone(),
            parent_id: researchers[p].id.clone(),
            surname,
            university_id: university,
        });
    }
    Ok(truth)
}

// ---------------------------------------------------------------------------
// Publications

struct Draft {
    year: i32,
    citations: u64,
    categories: Vec<String>,
    authorships: Vec<Authorship>,
}

fn census_year(s: &ObservationScalars) -> i32 {
    s.census_date
        .get(..4)
        .and_then(|y| y.parse().ok())
        .unwrap_or(s.window_end + 1)
}

fn draw_citations(model: &CitationModel, talent: f64, age: f64, rng: &mut ChaCha8Rng) -> u64 {
    // Older papers have had longer to collect citations.
    let exposure = (age / 3.0).max(0.1);
    match *model {
        CitationModel::LogNormal { mu, sigma } => {
            let d = LogNormal::new(mu + (talent * exposure).ln(), sigma).expect("sigma checked");
            d.sample(rng).floor().min(1e9) as u64
        }
        CitationModel::NegativeBinomial { mean, dispersion } => {
            let lambda_mean = mean * talent * exposure;
            if lambda_mean <= 0.0 {
                return 0;
            }
            let lambda = Gamma::new(dispersion, lambda_mean / dispersion)
                .expect("dispersion checked")
                .sample(rng);
            if lambda <= 0.0 {
                return 0;
            }
            Poisson::new(lambda).map_or(0, |p| p.sample(rng) as u64)
        }
    }
}

fn draw_publications(
    cfg: &SynthConfig,
    owner: usize,
    researchers: &[Researcher],
    talent: f64,
    colleagues: &[usize],
) -> Vec<Draft> {
    let s = &cfg.observation;
    let r = &researchers[owner];
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(cfg.seed, STREAM_PUBLICATIONS), owner as u64));
    let years: Vec<i32> = (s.window_start..=s.window_end).filter(|&y| r.on_faculty(y)).collect();
    let expected = cfg.publications_per_year * talent * years.len() as f64;
    if years.is_empty() || expected <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(expected).map_or(0, |d| d.sample(&mut rng) as usize);
    let extra = (cfg.mean_extra_authors > 0.0).then(|| Poisson::new(cfg.mean_extra_authors).expect("positive mean"));
    let census = census_year(s);
    let own_categories = categories_of(&r.sds_code);

    (0..count)
        .map(|k| {
            let year = years[rng.random_range(0..years.len())];
            let n_extra = extra.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
            let s_authors = (1 + n_extra).min(cfg.max_authors);
            let owner_pos = rng.random_range(0..s_authors);
            let mut on_byline = BTreeSet::from([owner]);
            let authorships = (0..s_authors)
                .map(|pos| {
                    let (author, university_id) = if pos == owner_pos {
                        (AuthorRef::Researcher(r.id.clone()), r.university_id.clone())
                    } else {
                        let pick = (!colleagues.is_empty() && rng.random_bool(cfg.internal_coauthor_share))
                            .then(|| colleagues[rng.random_range(0..colleagues.len())])
                            .filter(|c| on_byline.insert(*c));
                        match pick {
                            Some(c) => (
                                AuthorRef::Researcher(researchers[c].id.clone()),
                                researchers[c].university_id.clone(),
                            ),
                            None => {
                                let uni = if rng.random_bool(0.5) {
                                    r.university_id.clone()
                                } else {
                                    format!("X{:03}", rng.random_range(0..200))
                                };
                                (AuthorRef::External(format!("{}-{k}-{pos}", r.id)), uni)
                            }
                        }
                    };
                    Authorship { position: pos as u32 + 1, author, university_id }
                })
                .collect();
            let categories = if rng.random_bool(0.3) {
                own_categories.to_vec()
            } else {
                vec![own_categories[rng.random_range(0..2)].clone()]
            };
            let age = f64::from(census - year) + 0.5;
            Draft {
                year,
                citations: draw_citations(&cfg.citation_distribution, talent, age, &mut rng),
                categories,
                authorships,
            }
        })
        .collect()
}

fn build_publications(cfg: &SynthConfig, roster: &Roster) -> Vec<Publication> {
    let researchers = &roster.researchers;
    let mut by_unit: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, r) in researchers.iter().enumerate() {
        by_unit
            .entry((r.university_id.as_str(), r.sds_code.as_str()))
            .or_default()
            .push(i);
    }
    let drafts: Vec<Vec<Draft>> = (0..researchers.len())
        .into_par_iter()
        .map(|i| {
            let r = &researchers[i];
            let colleagues: Vec<usize> = by_unit[&(r.university_id.as_str(), r.sds_code.as_str())]
                .iter()
                .copied()
                .filter(|&c| c != i)
                .collect();
            draw_publications(cfg, i, researchers, roster.talent[i], &colleagues)
        })
        .collect();
    drafts
        .into_iter()
        .flatten()
        .enumerate()
        .map(|(k, d)| Publication {
            id: format!("P{:07}", k + 1),
            year: d.year,
            citations: d.citations,
            categories: d.categories,
            authorships: d.authorships,
        })
        .collect()
}

/// A full synthetic dataset and the pairs planted in it.
pub fn generate(cfg: &SynthConfig) -> Result<(DatasetBundle, GroundTruth), SynthError> {
    let roster = build_roster(cfg)?;
    let publications = build_publications(cfg, &roster);
    let bundle = DatasetBundle {
        publications,
        taxonomy: taxonomy(cfg.n_sds),
        config: roster.config,
        researchers: roster.researchers,
    };
    Ok((bundle, roster.truth))
}

// ---------------------------------------------------------------------------
// Detection power

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub seed: u64,
    pub planted: usize,
    pub recovered: usize,
    pub detected: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSummary {
    pub replications: usize,
    pub planted_pairs: usize,
    pub recovered_pairs: usize,
    pub detected_pairs: usize,
    pub false_positive_pairs: usize,
    /// Recovered over planted, pooled across replications; absent when
    /// nothing was planted.
    pub recall: Option<f64>,
    /// Detected pairs matching no planted pair over all detected pairs; 0
    /// when nothing was detected.
    pub false_positive_rate: f64,
    pub per_replication: Vec<ReplicationOutcome>,
}

/// Compares detected pairs with the planted ones. A planted pair counts as
/// recovered when its child is detected with the planted parent among its
/// parents; any other detected pair is a false positive.
pub fn score_detection(researchers: &[Researcher], config: &ObservationConfig, truth: &GroundTruth) -> (usize, usize, usize) {
    let planted: BTreeMap<&str, &str> = truth
        .pairs
        .iter()
        .map(|p| (p.child_id.as_str(), p.parent_id.as_str()))
        .collect();
    let detection = detect(researchers, config);
    let mut recovered = 0;
    for pair in &detection.pairs {
        if planted
            .get(pair.child_id.as_str())
            .is_some_and(|parent| pair.parent_ids.contains(*parent))
        {
            recovered += 1;
        }
    }
    (recovered, detection.pairs.len(), detection.pairs.len() - recovered)
}

/// Recall and false-positive rate of the surname heuristic over
/// `replications` rosters. Only rosters are generated; detection never looks
/// at publications.
pub fn detection_power(cfg: &SynthConfig, replications: usize) -> Result<PowerSummary, SynthError> {
    if replications == 0 {
        return Err(SynthError::InvalidConfig("replications must be at least 1".into()));
    }
    let outcomes: Vec<ReplicationOutcome> = (0..replications as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(cfg.seed, r);
            let replica = SynthConfig { seed, ..cfg.clone() };
            let roster = build_roster(&replica)?;
            let (recovered, detected, false_positives) =
                score_detection(&roster.researchers, &roster.config, &roster.truth);
            Ok(ReplicationOutcome {
                seed,
                planted: roster.truth.pairs.len(),
                recovered,
                detected,
                false_positives,
            })
        })
        .collect::<Result<_, SynthError>>()?;

    let planted: usize = outcomes.iter().map(|o| o.planted).sum();
    let recovered: usize = outcomes.iter().map(|o| o.recovered).sum();
    let detected: usize = outcomes.iter().map(|o| o.detected).sum();
    let false_positives: usize = outcomes.iter().map(|o| o.false_positives).sum();
    Ok(PowerSummary {
        replications,
        planted_pairs: planted,
        recovered_pairs: recovered,
        detected_pairs: detected,
        false_positive_pairs: false_positives,
        recall: (planted > 0).then(|| recovered as f64 / planted as f64),
        false_positive_rate: if detected > 0 { false_positives as f64 / detected as f64 } else { 0.0 },
        per_replication: outcomes,
    })
}
