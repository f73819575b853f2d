use std::fs;
use std::path::{Path, PathBuf};

use kinmetric_core::cohort::Dimension;
use kinmetric_core::ingest::{
    load_bundle, read_bundle, read_ground_truth, read_records, read_report, tests_sidecar,
    write_bundle, write_ground_truth, write_records, write_report, Format, IngestError,
    RankingRecord,
};
use kinmetric_core::model::Violation;
use kinmetric_core::pipeline::analyze;
use kinmetric_core::synthgen::{generate, SynthConfig};
use kinmetric_core::ingest::ranking_records;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/ok")
}

/// Data rows of a CSV file, counted as non-blank lines after the header.
fn data_lines(path: &Path) -> usize {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .count()
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}

#[test]
fn fixture_counts_match_line_count() {
    let bundle = load_bundle(&fixture()).unwrap();
    assert_eq!(bundle.researchers.len(), data_lines(&fixture().join("roster.csv")));
    assert_eq!(bundle.publications.len(), data_lines(&fixture().join("publications.csv")));
    assert_eq!((bundle.researchers.len(), bundle.publications.len()), (12, 30));
    let authorships: usize = bundle.publications.iter().map(|p| p.authorships.len()).sum();
    assert_eq!(authorships, data_lines(&fixture().join("authorships.csv")));
}

#[test]
fn fixture_config_and_exclusions() {
    let bundle = load_bundle(&fixture()).unwrap();
    let c = &bundle.config;
    assert_eq!(c.scalars.min_group_children, 1);
    assert_eq!(c.scalars.top_fraction, 0.2, "unset keys keep defaults");
    assert!(c.national_surname_exclusions.contains("BIANCHI"));
    assert!(c.regional_surname_exclusions["LOMBARDIA"].contains("COLOMBO"));
    assert_eq!(bundle.researcher("R01").unwrap().surname, "ROSSI");
}

#[test]
fn header_only_publications() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    fs::write(dir.path().join("publications.csv"), "pub_id,year,citations,categories\n").unwrap();
    fs::write(dir.path().join("authorships.csv"), "pub_id,position,author_ref,university_id\n").unwrap();
    let bundle = load_bundle(dir.path()).unwrap();
    assert_eq!(bundle.publications.len(), 0);
    assert_eq!(bundle.researchers.len(), 12);
}

#[test]
fn unknown_rank_token_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("rank_events.csv");
    let text = fs::read_to_string(&path).unwrap().replace("R02,2002,ASSISTANT", "R02,2002,LECTURER");
    fs::write(&path, text).unwrap();
    match load_bundle(dir.path()) {
        Err(IngestError::Parse { file, line, message }) => {
            assert_eq!(file, "rank_events.csv");
            assert_eq!(line, 4);
            assert!(message.contains("LECTURER"), "{message}");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn wrong_column_count_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("publications.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("P31,2005,3\n");
    fs::write(&path, text).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(IngestError::Parse { line: 32, .. })));
}

#[test]
fn missing_file() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    fs::remove_file(dir.path().join("taxonomy.csv")).unwrap();
    assert!(matches!(load_bundle(dir.path()), Err(IngestError::MissingFile(p)) if p.ends_with("taxonomy.csv")));
}

#[test]
fn optional_files_may_be_absent() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    for f in ["config.toml", "surnames_national.txt", "surnames_regional.csv"] {
        fs::remove_file(dir.path().join(f)).unwrap();
    }
    let bundle = load_bundle(dir.path()).unwrap();
    assert!(bundle.config.national_surname_exclusions.is_empty());
    assert_eq!(bundle.config.scalars.min_group_children, 10);
}

#[test]
fn validation_failure_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("authorships.csv");
    let mut text = fs::read_to_string(&path).unwrap();
    text.push_str("P30,3,R99,U1\n");
    fs::write(&path, text).unwrap();
    match load_bundle(dir.path()) {
        Err(IngestError::Validation(report)) => {
            assert_eq!(report.violations.len(), 1);
            assert!(matches!(&report.violations[0], Violation::DanglingReference { researcher_id, .. } if researcher_id == "R99"));
            // The unchecked reader still returns the data.
            assert!(read_bundle(dir.path(), None).is_ok());
        }
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn row_order_does_not_matter_except_rank_events_are_sorted() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&fixture(), dir.path());
    let path = dir.path().join("rank_events.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1..].reverse();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert_eq!(load_bundle(dir.path()).unwrap(), load_bundle(&fixture()).unwrap());
}

#[test]
fn bundle_round_trip() {
    let original = load_bundle(&fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&original, dir.path()).unwrap();
    assert_eq!(load_bundle(dir.path()).unwrap(), original);

    let (synth, truth) = generate(&SynthConfig { researchers_per_sds: 15, n_sds: 3, ..SynthConfig::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&synth, dir.path()).unwrap();
    assert_eq!(load_bundle(dir.path()).unwrap(), synth);

    let gt = dir.path().join("ground_truth.csv");
    write_ground_truth(&gt, &truth.id_pairs()).unwrap();
    assert_eq!(read_ground_truth(&gt).unwrap(), truth.id_pairs());
}

#[test]
fn emitted_files_use_lf_and_quote_text() {
    let bundle = load_bundle(&fixture()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&bundle, dir.path()).unwrap();
    let roster = fs::read_to_string(dir.path().join("roster.csv")).unwrap();
    assert!(!roster.contains('\r'));
    assert!(roster.lines().nth(1).unwrap().starts_with("\"R01\",\"Mario Rossi\",\"ROSSI\""));
}

#[test]
fn report_round_trip_both_formats() {
    let bundle = load_bundle(&fixture()).unwrap();
    let analysis = analyze(&bundle);
    let dir = tempfile::tempdir().unwrap();
    for report in analysis.reports(&bundle) {
        let json = dir.path().join(format!("{}.json", report.dimension.table_name()));
        write_report(&report, &json, Format::Json).unwrap();
        assert_eq!(read_report(&json, Format::Json).unwrap(), report);

        let csv = dir.path().join(format!("{}.csv", report.dimension.table_name()));
        write_report(&report, &csv, Format::Csv).unwrap();
        let back = read_report(&csv, Format::Csv).unwrap();
        assert_eq!(back.dimension, report.dimension);
        assert_eq!(back.rows, report.rows);
        assert_eq!(back.tests, report.tests);
        assert!(tests_sidecar(&csv).exists());
    }
}

#[test]
fn table_one_csv_shape() {
    let bundle = load_bundle(&fixture()).unwrap();
    let report = analyze(&bundle).report(&bundle, Dimension::Overall);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table1.csv");
    write_report(&report, &path, Format::Csv).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "\"segment\",\"group\",\"n_observations\",\"avg_percentile\",\"pct_no_publications\",\"pct_no_citations\",\"pct_above_median\",\"pct_top20\",\"pct_top10\",\"pct_absolute_top\""
    );
    assert_eq!(lines.count(), report.rows.len());

    let json_path = dir.path().join("table1.json");
    write_report(&report, &json_path, Format::Json).unwrap();
    let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json_path).unwrap()).unwrap();
    let groups = value["groups"].as_object().unwrap();
    assert!(groups.contains_key("all/children"));
    assert!(groups.contains_key("all/non_children_same_seniority"));
}

#[test]
fn unwritable_path_is_io_error() {
    let bundle = load_bundle(&fixture()).unwrap();
    let report = analyze(&bundle).report(&bundle, Dimension::Overall);
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let target = blocker.join("table1.csv");
    assert!(matches!(write_report(&report, &target, Format::Csv), Err(IngestError::Io { .. })));
    assert!(matches!(write_report(&report, &target, Format::Json), Err(IngestError::Io { .. })));
}

#[test]
fn records_round_trip() {
    let bundle = load_bundle(&fixture()).unwrap();
    let records = ranking_records(&analyze(&bundle).ranking);
    assert!(!records.is_empty());
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Csv, Format::Json] {
        let path = dir.path().join(format!("rankings.{}", format.extension()));
        write_records(&path, &records, format).unwrap();
        let back: Vec<RankingRecord> = read_records(&path, format).unwrap();
        assert_eq!(back, records);
    }
}
