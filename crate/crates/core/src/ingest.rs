//! On-disk formats: the input bundle directory, the scalar configuration and
//! every file the pipeline emits.
//!
//! All tables are comma-separated CSV with a header row. Emitted files quote
//! non-numeric fields and end lines with LF.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{QuoteStyle, ReaderBuilder, StringRecord, Terminator, WriterBuilder};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::model::DatasetBundle;

use crate::baseline::CitationBaseline;
use crate::cohort::{CohortReport, Dimension, GroupStats, ReportRow, TTestResult, TestRow};
use crate::kinship::KinshipPair;
use crate::model::{
    normalize_surname, Area, AuthorRef, Authorship, FieldInfo, FieldTaxonomy, ObservationConfig,
    ObservationScalars, Publication, Rank, RankEvent, Researcher, ValidationReport,
};
use crate::ranking::Ranking;
use crate::scoring::ScoreCard;

pub const ROSTER: &str = "roster.csv";
pub const RANK_EVENTS: &str = "rank_events.csv";
pub const PUBLICATIONS: &str = "publications.csv";
pub const AUTHORSHIPS: &str = "authorships.csv";
pub const TAXONOMY: &str = "taxonomy.csv";
pub const REGION_AREA: &str = "region_area.csv";
pub const CONFIG: &str = "config.toml";
pub const SURNAMES_NATIONAL: &str = "surnames_national.txt";
pub const SURNAMES_REGIONAL: &str = "surnames_regional.csv";
pub const GROUND_TRUTH: &str = "ground_truth.csv";

const ROSTER_HEADER: &[&str] = &[
    "researcher_id",
    "full_name",
    "surname",
    "university_id",
    "region",
    "sds_code",
    "hire_year",
    "leave_year",
];
const RANK_EVENTS_HEADER: &[&str] = &["researcher_id", "year", "rank"];
const PUBLICATIONS_HEADER: &[&str] = &["pub_id", "year", "citations", "categories"];
const AUTHORSHIPS_HEADER: &[&str] = &["pub_id", "position", "author_ref", "university_id"];
const TAXONOMY_HEADER: &[&str] = &["sds_code", "uda_code", "life_science"];
const REGION_AREA_HEADER: &[&str] = &["region", "area"];
const SURNAMES_REGIONAL_HEADER: &[&str] = &["region", "surname"];
const GROUND_TRUTH_HEADER: &[&str] = &["child_id", "parent_id"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}, line {line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("dataset failed validation: {0}")]
    Validation(ValidationReport),
    #[error("missing input file {}", .0.display())]
    MissingFile(PathBuf),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

fn parse_err(file: &Path, line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        file: file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| file.display().to_string()),
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

// ---------------------------------------------------------------------------
// Reading

/// A CSV table with its header checked against the schema.
struct Table {
    path: PathBuf,
    reader: csv::Reader<File>,
}

impl Table {
    fn open(path: &Path, header: &[&str]) -> Result<Table, IngestError> {
        if !path.exists() {
            return Err(IngestError::MissingFile(path.to_path_buf()));
        }
        let file = File::open(path).map_err(io_err(path))?;
        let mut reader = ReaderBuilder::new().has_headers(true).from_reader(file);
        let found = reader
            .headers()
            .map_err(|e| parse_err(path, 1, e.to_string()))?
            .clone();
        if found.iter().map(str::trim).ne(header.iter().copied()) {
            return Err(parse_err(
                path,
                1,
                format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        Ok(Table { path: path.to_path_buf(), reader })
    }

    /// Every data row with its 1-based line number.
    fn rows(mut self) -> Result<(PathBuf, Vec<(u64, StringRecord)>), IngestError> {
        let mut rows = Vec::new();
        for record in self.reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(&self.path, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok((self.path, rows))
    }
}

fn field<T: FromStr>(path: &Path, line: u64, record: &StringRecord, idx: usize, name: &str) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse()
        .map_err(|e| parse_err(path, line, format!("column `{name}`: invalid value `{raw}` ({e})")))
}

fn text(record: &StringRecord, idx: usize) -> String {
    record.get(idx).unwrap_or("").trim().to_string()
}

fn read_roster(path: &Path) -> Result<Vec<Researcher>, IngestError> {
    let (path, rows) = Table::open(path, ROSTER_HEADER)?.rows()?;
    rows.iter()
        .map(|(line, r)| {
            let leave = text(r, 7);
            Ok(Researcher {
                id: text(r, 0),
                full_name: text(r, 1),
                surname: normalize_surname(&text(r, 2)),
                university_id: text(r, 3),
                region: text(r, 4),
                sds_code: text(r, 5),
                rank_events: Vec::new(),
                hire_year: field(&path, *line, r, 6, "hire_year")?,
                leave_year: if leave.is_empty() {
                    None
                } else {
                    Some(field(&path, *line, r, 7, "leave_year")?)
                },
            })
        })
        .collect()
}

fn attach_rank_events(path: &Path, researchers: &mut [Researcher]) -> Result<(), IngestError> {
    let index: BTreeMap<String, usize> = researchers
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id.clone(), i))
        .collect();
    let (path, rows) = Table::open(path, RANK_EVENTS_HEADER)?.rows()?;
    for (line, r) in &rows {
        let id = text(r, 0);
        let Some(&i) = index.get(&id) else {
            return Err(parse_err(&path, *line, format!("unknown researcher `{id}`")));
        };
        let event = RankEvent {
            year: field(&path, *line, r, 1, "year")?,
            rank: field::<Rank>(&path, *line, r, 2, "rank")?,
        };
        researchers[i].rank_events.push(event);
    }
    for r in researchers.iter_mut() {
        r.rank_events.sort();
    }
    Ok(())
}

fn read_publications(path: &Path) -> Result<Vec<Publication>, IngestError> {
    let (path, rows) = Table::open(path, PUBLICATIONS_HEADER)?.rows()?;
    rows.iter()
        .map(|(line, r)| {
            Ok(Publication {
                id: text(r, 0),
                year: field(&path, *line, r, 1, "year")?,
                citations: field(&path, *line, r, 2, "citations")?,
                categories: text(r, 3)
                    .split(';')
                    .map(str::trim)
                    .filter(|c| !c.is_empty())
                    .map(str::to_string)
                    .collect(),
                authorships: Vec::new(),
            })
        })
        .collect()
}

fn attach_authorships(path: &Path, publications: &mut [Publication]) -> Result<(), IngestError> {
    let index: BTreeMap<String, usize> = publications
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.clone(), i))
        .collect();
    let (path, rows) = Table::open(path, AUTHORSHIPS_HEADER)?.rows()?;
    for (line, r) in &rows {
        let id = text(r, 0);
        let Some(&i) = index.get(&id) else {
            return Err(parse_err(&path, *line, format!("unknown publication `{id}`")));
        };
        let author = text(r, 2);
        if author.is_empty() {
            return Err(parse_err(&path, *line, "empty author_ref"));
        }
        publications[i].authorships.push(Authorship {
            position: field(&path, *line, r, 1, "position")?,
            author: AuthorRef::parse(&author),
            university_id: text(r, 3),
        });
    }
    for p in publications.iter_mut() {
        p.authorships.sort_by_key(|a| a.position);
    }
    Ok(())
}

fn read_taxonomy(path: &Path) -> Result<FieldTaxonomy, IngestError> {
    let (path, rows) = Table::open(path, TAXONOMY_HEADER)?.rows()?;
    let mut entries = BTreeMap::new();
    for (line, r) in &rows {
        let life_science = match text(r, 2).as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(parse_err(&path, *line, format!("column `life_science`: expected 0 or 1, found `{other}`")))
            }
        };
        let code = text(r, 0);
        if entries.contains_key(&code) {
            return Err(parse_err(&path, *line, format!("duplicate field code `{code}`")));
        }
        entries.insert(code, FieldInfo { uda_code: text(r, 1), life_science });
    }
    Ok(FieldTaxonomy { entries })
}

fn read_region_areas(path: &Path) -> Result<BTreeMap<String, Area>, IngestError> {
    let (path, rows) = Table::open(path, REGION_AREA_HEADER)?.rows()?;
    let mut map = BTreeMap::new();
    for (line, r) in &rows {
        map.insert(text(r, 0), field::<Area>(&path, *line, r, 1, "area")?);
    }
    Ok(map)
}

fn read_national_exclusions(path: &Path) -> Result<BTreeSet<String>, IngestError> {
    if !path.exists() {
        return Ok(BTreeSet::new());
    }
    let file = File::open(path).map_err(io_err(path))?;
    let mut set = BTreeSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        set.insert(normalize_surname(line));
    }
    Ok(set)
}

fn read_regional_exclusions(path: &Path) -> Result<BTreeMap<String, BTreeSet<String>>, IngestError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let (_, rows) = Table::open(path, SURNAMES_REGIONAL_HEADER)?.rows()?;
    let mut map: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for (_, r) in &rows {
        map.entry(text(r, 0))
            .or_default()
            .insert(normalize_surname(&text(r, 1)));
    }
    Ok(map)
}

/// Parses a flat `key = value` scalar file. Missing keys keep their defaults.
pub fn load_scalars(path: &Path) -> Result<ObservationScalars, IngestError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&raw).map_err(|e| {
        let line = e
            .span()
            .map_or(0, |s| raw[..s.start].matches('\n').count() as u64 + 1);
        parse_err(path, line, e.message().to_string())
    })
}

/// Reads a bundle directory without validating it.
///
/// `config_override` replaces the directory's own `config.toml`.
pub fn read_bundle(dir: &Path, config_override: Option<&Path>) -> Result<DatasetBundle, IngestError> {
    let mut researchers = read_roster(&dir.join(ROSTER))?;
    attach_rank_events(&dir.join(RANK_EVENTS), &mut researchers)?;
    let mut publications = read_publications(&dir.join(PUBLICATIONS))?;
    attach_authorships(&dir.join(AUTHORSHIPS), &mut publications)?;
    let taxonomy = read_taxonomy(&dir.join(TAXONOMY))?;

    let config_path = config_override.map_or_else(|| dir.join(CONFIG), Path::to_path_buf);
    let scalars = if config_path.exists() {
        load_scalars(&config_path)?
    } else if config_override.is_some() {
        return Err(IngestError::MissingFile(config_path));
    } else {
        ObservationScalars::default()
    };
    let config = ObservationConfig {
        scalars,
        national_surname_exclusions: read_national_exclusions(&dir.join(SURNAMES_NATIONAL))?,
        regional_surname_exclusions: read_regional_exclusions(&dir.join(SURNAMES_REGIONAL))?,
        region_area_map: read_region_areas(&dir.join(REGION_AREA))?,
    };
    Ok(DatasetBundle { researchers, publications, taxonomy, config })
}

/// Reads and validates a bundle directory.
pub fn load_bundle(dir: &Path) -> Result<DatasetBundle, IngestError> {
    load_bundle_with(dir, None)
}

pub fn load_bundle_with(dir: &Path, config_override: Option<&Path>) -> Result<DatasetBundle, IngestError> {
    let bundle = read_bundle(dir, config_override)?;
    let report = bundle.validate();
    if report.is_valid() {
        Ok(bundle)
    } else {
        Err(IngestError::Validation(report))
    }
}

// ---------------------------------------------------------------------------
// Writing

fn csv_writer(path: &Path) -> Result<csv::Writer<File>, IngestError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    let file = File::create(path).map_err(io_err(path))?;
    Ok(WriterBuilder::new()
        .quote_style(QuoteStyle::NonNumeric)
        .terminator(Terminator::Any(b'\n'))
        .from_writer(file))
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> IngestError + '_ {
    move |e| IngestError::Io {
        path: path.to_path_buf(),
        source: io::Error::other(e.to_string()),
    }
}

/// Writes `header` and `rows` as one CSV file.
fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_io(path))?;
    for row in rows {
        w.write_record(row).map_err(csv_io(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_text(path: &Path, contents: &str) -> Result<(), IngestError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IngestError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_text(path, &text)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_scalars(path: &Path, scalars: &ObservationScalars) -> Result<(), IngestError> {
    write_text(path, &toml::to_string(scalars).expect("scalars serialize"))
}

/// Writes every input file of a bundle into `dir`. Optional exclusion files
/// are always written, possibly empty.
pub fn write_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<(), IngestError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_table(
        &dir.join(ROSTER),
        ROSTER_HEADER,
        bundle.researchers.iter().map(|r| {
            [
                r.id.clone(),
                r.full_name.clone(),
                r.surname.clone(),
                r.university_id.clone(),
                r.region.clone(),
                r.sds_code.clone(),
                r.hire_year.to_string(),
                opt(r.leave_year),
            ]
        }),
    )?;
    write_table(
        &dir.join(RANK_EVENTS),
        RANK_EVENTS_HEADER,
        bundle.researchers.iter().flat_map(|r| {
            r.rank_events
                .iter()
                .map(|e| [r.id.clone(), e.year.to_string(), e.rank.to_string()])
        }),
    )?;
    write_table(
        &dir.join(PUBLICATIONS),
        PUBLICATIONS_HEADER,
        bundle.publications.iter().map(|p| {
            [p.id.clone(), p.year.to_string(), p.citations.to_string(), p.categories.join(";")]
        }),
    )?;
    write_table(
        &dir.join(AUTHORSHIPS),
        AUTHORSHIPS_HEADER,
        bundle.publications.iter().flat_map(|p| {
            p.authorships.iter().map(|a| {
                [p.id.clone(), a.position.to_string(), a.author.to_string(), a.university_id.clone()]
            })
        }),
    )?;
    write_table(
        &dir.join(TAXONOMY),
        TAXONOMY_HEADER,
        bundle.taxonomy.entries.iter().map(|(code, info)| {
            [code.clone(), info.uda_code.clone(), if info.life_science { "1" } else { "0" }.to_string()]
        }),
    )?;
    let config = &bundle.config;
    write_table(
        &dir.join(REGION_AREA),
        REGION_AREA_HEADER,
        config
            .region_area_map
            .iter()
            .map(|(region, area)| [region.clone(), area.to_string()]),
    )?;
    let national: String = config
        .national_surname_exclusions
        .iter()
        .map(|s| format!("{s}\n"))
        .collect();
    write_text(&dir.join(SURNAMES_NATIONAL), &national)?;
    write_table(
        &dir.join(SURNAMES_REGIONAL),
        SURNAMES_REGIONAL_HEADER,
        config
            .regional_surname_exclusions
            .iter()
            .flat_map(|(region, set)| set.iter().map(move |s| [region.clone(), s.clone()])),
    )?;
    write_scalars(&dir.join(CONFIG), &config.scalars)
}

// ---------------------------------------------------------------------------
// Pipeline outputs

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub year: i32,
    pub category: String,
    /// Empty when no publication in the cell was cited.
    pub median: Option<f64>,
    pub n_cited: usize,
}

pub fn baseline_records(baseline: &CitationBaseline) -> Vec<BaselineRecord> {
    let mut records: Vec<BaselineRecord> = baseline
        .cells
        .iter()
        .map(|((year, category), cell)| BaselineRecord {
            year: *year,
            category: category.clone(),
            median: Some(cell.median),
            n_cited: cell.n_cited,
        })
        .chain(baseline.empty_cells.iter().map(|(year, category)| BaselineRecord {
            year: *year,
            category: category.clone(),
            median: None,
            n_cited: 0,
        }))
        .collect();
    records.sort_by(|a, b| (a.year, &a.category).cmp(&(b.year, &b.category)));
    records
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub researcher_id: String,
    pub sds_code: String,
    pub rank: Rank,
    pub p: f64,
    pub percentile: f64,
    pub above_median: bool,
    pub top20: bool,
    pub top10: bool,
    pub absolute_top: bool,
    pub bottom20: bool,
    pub bottom10: bool,
}

pub fn ranking_records(ranking: &Ranking) -> Vec<RankingRecord> {
    ranking
        .scores
        .values()
        .map(|s| RankingRecord {
            researcher_id: s.researcher_id.clone(),
            sds_code: s.cohort.sds_code.clone(),
            rank: s.cohort.rank,
            p: s.p,
            percentile: s.percentile,
            above_median: s.tiers.above_median,
            top20: s.tiers.top20,
            top10: s.tiers.top10,
            absolute_top: s.tiers.absolute_top,
            bottom20: s.tiers.bottom20,
            bottom10: s.tiers.bottom10,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub child_id: String,
    /// Semicolon-separated.
    pub parent_ids: String,
    pub university_id: String,
    pub surname: String,
    pub cardinality: String,
}

pub fn pair_records(pairs: &[KinshipPair]) -> Vec<PairRecord> {
    pairs
        .iter()
        .map(|p| PairRecord {
            child_id: p.child_id.clone(),
            parent_ids: p.parent_ids.iter().cloned().collect::<Vec<_>>().join(";"),
            university_id: p.university_id.clone(),
            surname: p.surname.clone(),
            cardinality: p.cardinality.to_string(),
        })
        .collect()
}

/// Writes flat records as CSV (header from the field names) or a JSON array.
pub fn write_records<T: Serialize>(path: &Path, records: &[T], format: Format) -> Result<(), IngestError> {
    match format {
        Format::Json => write_json(path, records),
        Format::Csv => {
            let mut w = csv_writer(path)?;
            for r in records {
                w.serialize(r).map_err(csv_io(path))?;
            }
            w.flush().map_err(io_err(path))
        }
    }
}

pub fn read_records<T: for<'de> Deserialize<'de>>(path: &Path, format: Format) -> Result<Vec<T>, IngestError> {
    match format {
        Format::Json => {
            let raw = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str(&raw).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))
        }
        Format::Csv => {
            if !path.exists() {
                return Err(IngestError::MissingFile(path.to_path_buf()));
            }
            let mut reader = ReaderBuilder::new()
                .from_path(path)
                .map_err(|e| parse_err(path, 0, e.to_string()))?;
            reader
                .deserialize()
                .map(|r| {
                    r.map_err(|e: csv::Error| {
                        parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string())
                    })
                })
                .collect()
        }
    }
}

pub fn write_scores(path: &Path, cards: &BTreeMap<String, ScoreCard>, format: Format) -> Result<(), IngestError> {
    let records: Vec<&ScoreCard> = cards.values().collect();
    write_records(path, &records, format)
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundTruthRecord {
    pub child_id: String,
    pub parent_id: String,
}

pub fn write_ground_truth(path: &Path, pairs: &[(String, String)]) -> Result<(), IngestError> {
    write_table(
        path,
        GROUND_TRUTH_HEADER,
        pairs.iter().map(|(c, p)| [c.as_str(), p.as_str()]),
    )
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<(String, String)>, IngestError> {
    let (_, rows) = Table::open(path, GROUND_TRUTH_HEADER)?.rows()?;
    Ok(rows.iter().map(|(_, r)| (text(r, 0), text(r, 1))).collect())
}

// ---------------------------------------------------------------------------
// Reports

const TABLE_COLUMNS: &[&str] = &[
    "segment",
    "group",
    "n_observations",
    "avg_percentile",
    "pct_no_publications",
    "pct_no_citations",
    "pct_above_median",
    "pct_top20",
    "pct_top10",
    "pct_absolute_top",
];
const BOTTOM_COLUMNS: &[&str] = &["pct_bottom10", "pct_bottom20"];
const TEST_COLUMNS: &[&str] = &[
    "segment",
    "group_a",
    "group_b",
    "t_statistic",
    "degrees_of_freedom",
    "p_two_tailed",
    "degenerate",
];

/// `table1.csv` -> `table1_tests.csv`.
pub fn tests_sidecar(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_tests.csv"))
}

/// JSON form: groups keyed by `segment/label`, in row order.
#[derive(Serialize, Deserialize)]
struct JsonReport {
    dimension: Dimension,
    with_bottom_tiers: bool,
    groups: IndexMap<String, GroupStats>,
    tests: Vec<TestRow>,
    indicators: BTreeMap<String, f64>,
    notes: Vec<String>,
}

/// Writes a report. CSV puts the group rows in `path` and the t-tests in a
/// `_tests.csv` sidecar; notes and indicators are only carried by JSON.
pub fn write_report(report: &CohortReport, path: &Path, format: Format) -> Result<(), IngestError> {
    match format {
        Format::Json => {
            let json = JsonReport {
                dimension: report.dimension,
                with_bottom_tiers: report.with_bottom_tiers,
                groups: report
                    .rows
                    .iter()
                    .map(|r| (format!("{}/{}", r.segment, r.stats.label), r.stats.clone()))
                    .collect(),
                tests: report.tests.clone(),
                indicators: report.indicators.clone(),
                notes: report.notes.clone(),
            };
            write_json(path, &json)
        }
        Format::Csv => {
            let mut header: Vec<&str> = TABLE_COLUMNS.to_vec();
            if report.with_bottom_tiers {
                header.extend(BOTTOM_COLUMNS);
            }
            write_table(
                path,
                &header,
                report.rows.iter().map(|r| {
                    let s = &r.stats;
                    let mut row = vec![
                        r.segment.clone(),
                        s.label.clone(),
                        s.n_observations.to_string(),
                        opt(s.avg_percentile),
                        opt(s.pct_no_publications),
                        opt(s.pct_no_citations),
                        opt(s.pct_above_median),
                        opt(s.pct_top20),
                        opt(s.pct_top10),
                        opt(s.pct_absolute_top),
                    ];
                    if report.with_bottom_tiers {
                        row.push(opt(s.pct_bottom10));
                        row.push(opt(s.pct_bottom20));
                    }
                    row
                }),
            )?;
            let sidecar = tests_sidecar(path);
            write_table(
                &sidecar,
                TEST_COLUMNS,
                report.tests.iter().map(|t| {
                    [
                        t.segment.clone(),
                        t.group_a.clone(),
                        t.group_b.clone(),
                        t.result.t_statistic.to_string(),
                        t.result.degrees_of_freedom.to_string(),
                        t.result.p_two_tailed.to_string(),
                        t.result.degenerate.to_string(),
                    ]
                }),
            )
        }
    }
}

fn opt_field(path: &Path, line: u64, r: &StringRecord, idx: usize, name: &str) -> Result<Option<f64>, IngestError> {
    if text(r, idx).is_empty() {
        Ok(None)
    } else {
        field(path, line, r, idx, name).map(Some)
    }
}

/// Reads a report back. For CSV the dimension comes from the file stem
/// (`table1` .. `table6`) and notes and indicators are empty.
pub fn read_report(path: &Path, format: Format) -> Result<CohortReport, IngestError> {
    if format == Format::Json {
        let raw = fs::read_to_string(path).map_err(io_err(path))?;
        let json: JsonReport =
            serde_json::from_str(&raw).map_err(|e| parse_err(path, e.line() as u64, e.to_string()))?;
        let rows = json
            .groups
            .into_iter()
            .map(|(key, stats)| {
                let segment = key
                    .strip_suffix(&format!("/{}", stats.label))
                    .unwrap_or(&key)
                    .to_string();
                ReportRow { segment, stats }
            })
            .collect();
        return Ok(CohortReport {
            dimension: json.dimension,
            with_bottom_tiers: json.with_bottom_tiers,
            rows,
            tests: json.tests,
            indicators: json.indicators,
            notes: json.notes,
        });
    }

    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let dimension = Dimension::ALL
        .into_iter()
        .find(|d| d.table_name() == stem)
        .ok_or_else(|| parse_err(path, 0, format!("cannot tell the report dimension from `{stem}`")))?;
    let with_bottom_tiers = {
        let mut reader = ReaderBuilder::new()
            .from_path(path)
            .map_err(|_| IngestError::MissingFile(path.to_path_buf()))?;
        let header = reader.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
        header.len() == TABLE_COLUMNS.len() + BOTTOM_COLUMNS.len()
    };
    let mut header: Vec<&str> = TABLE_COLUMNS.to_vec();
    if with_bottom_tiers {
        header.extend(BOTTOM_COLUMNS);
    }
    let (path_buf, rows) = Table::open(path, &header)?.rows()?;
    let p = path_buf.as_path();
    let rows = rows
        .iter()
        .map(|(line, r)| {
            let line = *line;
            let bottom = |idx| if with_bottom_tiers { opt_field(p, line, r, idx, "pct_bottom") } else { Ok(None) };
            Ok(ReportRow {
                segment: text(r, 0),
                stats: GroupStats {
                    label: text(r, 1),
                    n_observations: field(p, line, r, 2, "n_observations")?,
                    avg_percentile: opt_field(p, line, r, 3, "avg_percentile")?,
                    pct_no_publications: opt_field(p, line, r, 4, "pct_no_publications")?,
                    pct_no_citations: opt_field(p, line, r, 5, "pct_no_citations")?,
                    pct_above_median: opt_field(p, line, r, 6, "pct_above_median")?,
                    pct_top20: opt_field(p, line, r, 7, "pct_top20")?,
                    pct_top10: opt_field(p, line, r, 8, "pct_top10")?,
                    pct_absolute_top: opt_field(p, line, r, 9, "pct_absolute_top")?,
                    pct_bottom10: bottom(10)?,
                    pct_bottom20: bottom(11)?,
                },
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    let (sidecar, test_rows) = Table::open(&tests_sidecar(path), TEST_COLUMNS)?.rows()?;
    let tests = test_rows
        .iter()
        .map(|(line, r)| {
            Ok(TestRow {
                segment: text(r, 0),
                group_a: text(r, 1),
                group_b: text(r, 2),
                result: TTestResult {
                    t_statistic: field(&sidecar, *line, r, 3, "t_statistic")?,
                    degrees_of_freedom: field(&sidecar, *line, r, 4, "degrees_of_freedom")?,
                    p_two_tailed: field(&sidecar, *line, r, 5, "p_two_tailed")?,
                    degenerate: field(&sidecar, *line, r, 6, "degenerate")?,
                },
            })
        })
        .collect::<Result<Vec<_>, IngestError>>()?;

    Ok(CohortReport {
        dimension,
        with_bottom_tiers,
        rows,
        tests,
        indicators: BTreeMap::new(),
        notes: Vec::new(),
    })
}
