//! Domain types shared by every stage of the pipeline, plus structural
//! validation of a loaded dataset.
//!
//! Nothing here computes indicators. The types are plain data, immutable once
//! built, and `Send + Sync` so stages can fan out over them freely.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Academic rank. The derive order is the promotion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Rank {
    Assistant,
    Associate,
    Full,
}

impl Rank {
    pub fn as_str(self) -> &'static str {
        match self {
            Rank::Assistant => "ASSISTANT",
            Rank::Associate => "ASSOCIATE",
            Rank::Full => "FULL",
        }
    }
}

impl fmt::Display for Rank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rank {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ASSISTANT" => Ok(Rank::Assistant),
            "ASSOCIATE" => Ok(Rank::Associate),
            "FULL" => Ok(Rank::Full),
            other => Err(format!("unknown rank token `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RankEvent {
    pub year: i32,
    pub rank: Rank,
}

/// Geographic macro-area used for the per-area breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Area {
    North,
    Centre,
    South,
}

impl Area {
    pub fn as_str(self) -> &'static str {
        match self {
            Area::North => "NORTH",
            Area::Centre => "CENTRE",
            Area::South => "SOUTH",
        }
    }
}

impl fmt::Display for Area {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Area {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "NORTH" => Ok(Area::North),
            "CENTRE" => Ok(Area::Centre),
            "SOUTH" => Ok(Area::South),
            other => Err(format!("unknown area token `{other}`")),
        }
    }
}

/// Uppercase, fold diacritics to ASCII and collapse runs of whitespace.
///
/// Applied once when records enter the system; every later surname
/// comparison is plain string equality.
pub fn normalize_surname(raw: &str) -> String {
    let folded = deunicode::deunicode(raw).to_uppercase();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Researcher {
    pub id: String,
    pub full_name: String,
    /// Normalized, see [`normalize_surname`].
    pub surname: String,
    pub university_id: String,
    pub region: String,
    pub sds_code: String,
    /// Sorted ascending by year.
    pub rank_events: Vec<RankEvent>,
    pub hire_year: i32,
    pub leave_year: Option<i32>,
}

impl Researcher {
    /// Whether the researcher was on faculty at any point of `year`.
    pub fn on_faculty(&self, year: i32) -> bool {
        self.hire_year <= year && self.leave_year.is_none_or(|leave| leave >= year)
    }

    /// Rank held in `year`: the latest event at or before that year.
    pub fn rank_at(&self, year: i32) -> Option<Rank> {
        self.rank_events
            .iter()
            .take_while(|e| e.year <= year)
            .last()
            .map(|e| e.rank)
    }

    /// Number of years in `[start, end]` during which the researcher was on faculty.
    pub fn years_on_faculty(&self, start: i32, end: i32) -> u32 {
        (start..=end).filter(|&y| self.on_faculty(y)).count() as u32
    }

    /// Year of the first event into `Full`, if any.
    pub fn full_since(&self) -> Option<i32> {
        self.rank_events
            .iter()
            .find(|e| e.rank == Rank::Full)
            .map(|e| e.year)
    }

    /// Holds `Full` and is on faculty in `year`.
    pub fn is_full_in(&self, year: i32) -> bool {
        self.on_faculty(year) && self.rank_at(year) == Some(Rank::Full)
    }

    /// Earliest event into Assistant or Associate whose year falls in `window`.
    pub fn entry_event_in(&self, window: YearWindow) -> Option<RankEvent> {
        self.rank_events
            .iter()
            .find(|e| window.contains(e.year) && matches!(e.rank, Rank::Assistant | Rank::Associate))
            .copied()
    }
}

/// Inclusive year range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearWindow {
    pub start: i32,
    pub end: i32,
}

impl YearWindow {
    pub fn new(start: i32, end: i32) -> Self {
        YearWindow { start, end }
    }

    pub fn contains(self, year: i32) -> bool {
        self.start <= year && year <= self.end
    }

    pub fn years(self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldInfo {
    pub uda_code: String,
    pub life_science: bool,
}

/// Maps every field code (SDS) to its discipline (UDA) and life-science flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldTaxonomy {
    pub entries: BTreeMap<String, FieldInfo>,
}

impl FieldTaxonomy {
    pub fn get(&self, sds_code: &str) -> Option<&FieldInfo> {
        self.entries.get(sds_code)
    }

    pub fn contains(&self, sds_code: &str) -> bool {
        self.entries.contains_key(sds_code)
    }

    pub fn is_life_science(&self, sds_code: &str) -> bool {
        self.get(sds_code).is_some_and(|f| f.life_science)
    }

    pub fn uda_of(&self, sds_code: &str) -> Option<&str> {
        self.get(sds_code).map(|f| f.uda_code.as_str())
    }
}

const EXTERNAL_PREFIX: &str = "EXT:";

/// Who sits at a byline position: a roster member or an outside author.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AuthorRef {
    Researcher(String),
    External(String),
}

impl AuthorRef {
    pub fn parse(token: &str) -> AuthorRef {
        match token.strip_prefix(EXTERNAL_PREFIX) {
            Some(rest) => AuthorRef::External(rest.to_string()),
            None => AuthorRef::Researcher(token.to_string()),
        }
    }

    pub fn researcher_id(&self) -> Option<&str> {
        match self {
            AuthorRef::Researcher(id) => Some(id),
            AuthorRef::External(_) => None,
        }
    }
}

impl fmt::Display for AuthorRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AuthorRef::Researcher(id) => f.write_str(id),
            AuthorRef::External(token) => write!(f, "{EXTERNAL_PREFIX}{token}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Authorship {
    /// 1-based byline position.
    pub position: u32,
    pub author: AuthorRef,
    pub university_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    pub year: i32,
    /// Snapshot at the census date.
    pub citations: u64,
    pub categories: Vec<String>,
    /// Sorted by position.
    pub authorships: Vec<Authorship>,
}

impl Publication {
    pub fn n_authors(&self) -> usize {
        self.authorships.len()
    }

    pub fn position_of(&self, researcher_id: &str) -> Option<u32> {
        self.authorships
            .iter()
            .find(|a| a.author.researcher_id() == Some(researcher_id))
            .map(|a| a.position)
    }
}

fn default_census_date() -> String {
    "2009-06-30".to_string()
}

/// Scalar knobs of an analysis run. List- and map-valued inputs
/// (exclusion lists, region areas) live in [`ObservationConfig`] too but are
/// loaded from their own files, so they are skipped by the scalar codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObservationScalars {
    pub window_start: i32,
    pub window_end: i32,
    pub entry_start: i32,
    pub entry_end: i32,
    #[serde(default = "default_census_date")]
    pub census_date: String,
    pub min_faculty_years: u32,
    pub sds_publishing_share_threshold: f64,
    pub bottom_fraction: f64,
    pub bottom_decile_fraction: f64,
    pub top_fraction: f64,
    pub top_decile_fraction: f64,
    pub absolute_top_fraction: f64,
    /// Last year a promotion counts as career advancement; `window_end` when absent.
    pub advancement_horizon: Option<i32>,
    /// Disciplines with fewer children than this are merged into "Other".
    pub min_group_children: usize,
    /// Use Welch's unequal-variance test instead of pooled Student's t.
    pub welch: bool,
}

impl Default for ObservationScalars {
    fn default() -> Self {
        ObservationScalars {
            window_start: 2004,
            window_end: 2008,
            entry_start: 2001,
            entry_end: 2003,
            census_date: default_census_date(),
            min_faculty_years: 3,
            sds_publishing_share_threshold: 0.5,
            bottom_fraction: 0.20,
            bottom_decile_fraction: 0.10,
            top_fraction: 0.20,
            top_decile_fraction: 0.10,
            absolute_top_fraction: 0.01,
            advancement_horizon: None,
            min_group_children: 10,
            welch: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObservationConfig {
    pub scalars: ObservationScalars,
    pub national_surname_exclusions: BTreeSet<String>,
    pub regional_surname_exclusions: BTreeMap<String, BTreeSet<String>>,
    pub region_area_map: BTreeMap<String, Area>,
}

impl ObservationConfig {
    pub fn window(&self) -> YearWindow {
        YearWindow::new(self.scalars.window_start, self.scalars.window_end)
    }

    pub fn entry_window(&self) -> YearWindow {
        YearWindow::new(self.scalars.entry_start, self.scalars.entry_end)
    }

    pub fn advancement_horizon(&self) -> i32 {
        self.scalars
            .advancement_horizon
            .unwrap_or(self.scalars.window_end)
    }

    pub fn is_surname_excluded(&self, surname: &str, region: &str) -> bool {
        self.national_surname_exclusions.contains(surname)
            || self
                .regional_surname_exclusions
                .get(region)
                .is_some_and(|set| set.contains(surname))
    }
}

/// A structural problem found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Violation {
    DuplicateResearcher { id: String },
    DuplicatePublication { id: String },
    UnknownSds { researcher_id: String, sds_code: String },
    UnknownRegion { researcher_id: String, region: String },
    EmptyRankHistory { researcher_id: String },
    RankHistoryOrder { researcher_id: String, year: i32 },
    HireAfterFirstEvent { researcher_id: String },
    LeaveBeforeHire { researcher_id: String },
    DanglingReference { pub_id: String, researcher_id: String },
    DuplicateAuthor { pub_id: String, researcher_id: String },
    PositionGap { pub_id: String },
    NoAuthors { pub_id: String },
    NoCategories { pub_id: String },
    InvalidWindow { what: String },
    FractionOutOfRange { name: String, value: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            DuplicateResearcher { id } => write!(f, "duplicate researcher id `{id}`"),
            DuplicatePublication { id } => write!(f, "duplicate publication id `{id}`"),
            UnknownSds { researcher_id, sds_code } => {
                write!(f, "researcher `{researcher_id}`: unknown field code `{sds_code}`")
            }
            UnknownRegion { researcher_id, region } => {
                write!(f, "researcher `{researcher_id}`: region `{region}` missing from area map")
            }
            EmptyRankHistory { researcher_id } => {
                write!(f, "researcher `{researcher_id}`: empty rank history")
            }
            RankHistoryOrder { researcher_id, year } => write!(
                f,
                "researcher `{researcher_id}`: rank history not strictly increasing at {year}"
            ),
            HireAfterFirstEvent { researcher_id } => {
                write!(f, "researcher `{researcher_id}`: hire year after first rank event")
            }
            LeaveBeforeHire { researcher_id } => {
                write!(f, "researcher `{researcher_id}`: leave year before hire year")
            }
            DanglingReference { pub_id, researcher_id } => write!(
                f,
                "publication `{pub_id}`: dangling reference to researcher `{researcher_id}`"
            ),
            DuplicateAuthor { pub_id, researcher_id } => write!(
                f,
                "publication `{pub_id}`: researcher `{researcher_id}` appears more than once"
            ),
            PositionGap { pub_id } => {
                write!(f, "publication `{pub_id}`: positions are not exactly 1..s (position gap)")
            }
            NoAuthors { pub_id } => write!(f, "publication `{pub_id}`: no authorships"),
            NoCategories { pub_id } => write!(f, "publication `{pub_id}`: no subject categories"),
            InvalidWindow { what } => write!(f, "config: {what}"),
            FractionOutOfRange { name, value } => {
                write!(f, "config: `{name}` = {value} is not in (0, 1)")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Sorted, so the report does not depend on input order.
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} violations", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

fn validate_researcher(
    r: &Researcher,
    taxonomy: &FieldTaxonomy,
    config: &ObservationConfig,
    out: &mut Vec<Violation>,
) {
    if !taxonomy.contains(&r.sds_code) {
        out.push(Violation::UnknownSds {
            researcher_id: r.id.clone(),
            sds_code: r.sds_code.clone(),
        });
    }
    if !config.region_area_map.contains_key(&r.region) {
        out.push(Violation::UnknownRegion {
            researcher_id: r.id.clone(),
            region: r.region.clone(),
        });
    }
    match r.rank_events.first() {
        None => out.push(Violation::EmptyRankHistory {
            researcher_id: r.id.clone(),
        }),
        Some(first) => {
            if r.hire_year > first.year {
                out.push(Violation::HireAfterFirstEvent {
                    researcher_id: r.id.clone(),
                });
            }
        }
    }
    for pair in r.rank_events.windows(2) {
        if pair[1].year <= pair[0].year || pair[1].rank < pair[0].rank {
            out.push(Violation::RankHistoryOrder {
                researcher_id: r.id.clone(),
                year: pair[1].year,
            });
        }
    }
    if let Some(leave) = r.leave_year {
        if leave < r.hire_year {
            out.push(Violation::LeaveBeforeHire {
                researcher_id: r.id.clone(),
            });
        }
    }
}

fn validate_publication(p: &Publication, roster: &BTreeSet<&str>, out: &mut Vec<Violation>) {
    if p.categories.is_empty() {
        out.push(Violation::NoCategories { pub_id: p.id.clone() });
    }
    if p.authorships.is_empty() {
        out.push(Violation::NoAuthors { pub_id: p.id.clone() });
        return;
    }
    let mut positions: Vec<u32> = p.authorships.iter().map(|a| a.position).collect();
    positions.sort_unstable();
    if positions
        .iter()
        .enumerate()
        .any(|(i, &pos)| pos as usize != i + 1)
    {
        out.push(Violation::PositionGap { pub_id: p.id.clone() });
    }
    let mut seen = BTreeSet::new();
    for a in &p.authorships {
        if let Some(id) = a.author.researcher_id() {
            if !roster.contains(id) {
                out.push(Violation::DanglingReference {
                    pub_id: p.id.clone(),
                    researcher_id: id.to_string(),
                });
            }
            if !seen.insert(id) {
                out.push(Violation::DuplicateAuthor {
                    pub_id: p.id.clone(),
                    researcher_id: id.to_string(),
                });
            }
        }
    }
}

fn validate_config(config: &ObservationConfig, out: &mut Vec<Violation>) {
    let s = &config.scalars;
    if s.window_start > s.window_end {
        out.push(Violation::InvalidWindow {
            what: format!("window_start {} > window_end {}", s.window_start, s.window_end),
        });
    }
    if s.entry_start > s.entry_end {
        out.push(Violation::InvalidWindow {
            what: format!("entry_start {} > entry_end {}", s.entry_start, s.entry_end),
        });
    }
    let fractions = [
        ("sds_publishing_share_threshold", s.sds_publishing_share_threshold),
        ("bottom_fraction", s.bottom_fraction),
        ("bottom_decile_fraction", s.bottom_decile_fraction),
        ("top_fraction", s.top_fraction),
        ("top_decile_fraction", s.top_decile_fraction),
        ("absolute_top_fraction", s.absolute_top_fraction),
    ];
    for (name, value) in fractions {
        if !(value > 0.0 && value < 1.0) {
            out.push(Violation::FractionOutOfRange {
                name: name.to_string(),
                value: value.to_string(),
            });
        }
    }
}

/// Collects every structural problem in the dataset. Never fails; an empty
/// report means the dataset is safe for all downstream stages.
pub fn validate_dataset(
    researchers: &[Researcher],
    publications: &[Publication],
    taxonomy: &FieldTaxonomy,
    config: &ObservationConfig,
) -> ValidationReport {
    let mut violations = Vec::new();

    let mut roster = BTreeSet::new();
    for r in researchers {
        if !roster.insert(r.id.as_str()) {
            violations.push(Violation::DuplicateResearcher { id: r.id.clone() });
        }
        validate_researcher(r, taxonomy, config, &mut violations);
    }

    let mut pub_ids = BTreeSet::new();
    for p in publications {
        if !pub_ids.insert(p.id.as_str()) {
            violations.push(Violation::DuplicatePublication { id: p.id.clone() });
        }
        validate_publication(p, &roster, &mut violations);
    }

    validate_config(config, &mut violations);

    violations.sort();
    ValidationReport { violations }
}

/// Everything one analysis run reads.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub researchers: Vec<Researcher>,
    pub publications: Vec<Publication>,
    pub taxonomy: FieldTaxonomy,
    pub config: ObservationConfig,
}

impl DatasetBundle {
    pub fn validate(&self) -> ValidationReport {
        validate_dataset(&self.researchers, &self.publications, &self.taxonomy, &self.config)
    }

    pub fn researcher(&self, id: &str) -> Option<&Researcher> {
        self.researchers.iter().find(|r| r.id == id)
    }

    pub fn researchers_by_id(&self) -> BTreeMap<&str, &Researcher> {
        self.researchers.iter().map(|r| (r.id.as_str(), r)).collect()
    }
}
