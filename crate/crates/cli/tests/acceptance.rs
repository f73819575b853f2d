//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines come out in order and uncaptured.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

use kinmetric_core::baseline::compute_baselines;
use kinmetric_core::cohort::{students_t_test, Dimension, ALL_SEGMENT, CHILDREN, CONTROLS};
use kinmetric_core::kinship::detect;
use kinmetric_core::model::{
    AuthorRef, Authorship, ObservationConfig, Publication, Rank, RankEvent, Researcher,
};
use kinmetric_core::pipeline::analyze;
use kinmetric_core::ranking::{midrank_counts, percentile_ranks};
use kinmetric_core::scoring::{author_weights, score_all};
use kinmetric_core::synthgen::{generate, score_detection, PlantedPerformance, SynthConfig};

// Tolerances and budgets.
const WEIGHT_SUM_TOL: f64 = 1e-9;
const WEIGHT_BUDGET: Duration = Duration::from_secs(1);
const SCALE_TOL: f64 = 1e-9;
const PERCENTILE_TOL: f64 = 1e-9;
const T_TOL: f64 = 1e-6;
const P_TOL: f64 = 1e-5;
const HAND_P: f64 = 0.3466;
const HAND_P_TOL: f64 = 1e-4;
const ALPHA: f64 = 0.05;
const MAX_NULL_REJECTIONS: usize = 10;
const PIPELINE_BUDGET: Duration = Duration::from_secs(60);

type Check = fn() -> Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------

fn random_publication(rng: &mut ChaCha8Rng, s: usize) -> Publication {
    let intramural = rng.random_bool(0.5);
    let authorships = (0..s)
        .map(|i| {
            let uni = if i == 0 {
                "U1".to_string()
            } else if i == s - 1 && intramural {
                "U1".to_string()
            } else {
                format!("U{}", rng.random_range(2..9))
            };
            Authorship {
                position: i as u32 + 1,
                author: AuthorRef::External(format!("a{i}")),
                university_id: uni,
            }
        })
        .collect();
    Publication {
        id: "P".into(),
        year: 2005,
        citations: rng.random_range(0..50),
        categories: vec!["C".into()],
        authorships,
    }
}

fn weight_completeness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pubs: Vec<Publication> = (0..1000).map(|i| random_publication(&mut rng, 1 + i % 15)).collect();
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for p in &pubs {
        for life in [false, true] {
            let w = author_weights(p, life);
            ensure(w.weights.len() == p.authorships.len(), || format!("{} weights for {} authors", w.weights.len(), p.authorships.len()))?;
            worst = worst.max((w.weights.iter().sum::<f64>() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst <= WEIGHT_SUM_TOL, || format!("max |sum - 1| = {worst:e}"))?;
    ensure(elapsed < WEIGHT_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("1000 publications x 2 schemes, max |sum - 1| = {worst:.1e}, {elapsed:.2?}"))
}

fn scale_invariance() -> Result<String, String> {
    let cfg = SynthConfig { n_sds: 4, researchers_per_sds: 30, ..SynthConfig::default() };
    let (mut bundle, _) = generate(&cfg).map_err(|e| e.to_string())?;
    ensure(bundle.publications.len() >= 500, || format!("only {} publications", bundle.publications.len()))?;
    bundle.publications.truncate(500);
    let score = |pubs: &[Publication]| {
        let baseline = compute_baselines(pubs);
        score_all(&bundle.researchers, pubs, &baseline, &bundle.taxonomy, &bundle.config).cards
    };
    let base = score(&bundle.publications);
    let nonzero = base.values().filter(|c| c.p > 0.0).count();
    ensure(nonzero > 50, || format!("only {nonzero} researchers with P > 0"))?;
    let mut worst: f64 = 0.0;
    for k in [2u64, 7] {
        let scaled: Vec<Publication> = bundle
            .publications
            .iter()
            .map(|p| Publication { citations: p.citations * k, ..p.clone() })
            .collect();
        let cards = score(&scaled);
        ensure(cards.len() == base.len(), || "researcher set changed".into())?;
        for (id, c) in &cards {
            worst = worst.max((c.p - base[id].p).abs());
        }
    }
    ensure(worst <= SCALE_TOL, || format!("max |dP| = {worst:e}"))?;
    Ok(format!("500 publications, {} researchers, k in {{2, 7}}, max |dP| = {worst:.1e}", base.len()))
}

fn percentile_calibration() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut with_ties = 0;
    for c in 0..200 {
        let n = rng.random_range(2..=50);
        let values: Vec<f64> = (0..n)
            .map(|_| if c % 2 == 0 { rng.random_range(0..6) as f64 } else { rng.random_range(0.0..10.0) })
            .collect();
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() < n {
            with_ties += 1;
        }
        // Exact integer form: counts sum to n(n - 1).
        let counts = midrank_counts(&values);
        ensure(counts.iter().sum::<u64>() == (n * (n - 1)) as u64, || format!("cohort {c}: counts do not sum to n(n-1)"))?;

        let scored: Vec<(String, f64)> = values.iter().enumerate().map(|(i, &v)| (format!("r{i:02}"), v)).collect();
        let pct = percentile_ranks(&scored).map_err(|e| e.to_string())?;
        let mean = pct.values().sum::<f64>() / n as f64;
        ensure((mean - 50.0).abs() <= PERCENTILE_TOL, || format!("cohort {c}: mean {mean}"))?;

        let cubed: Vec<(String, f64)> = scored.iter().map(|(id, v)| (id.clone(), v.powi(3))).collect();
        ensure(percentile_ranks(&cubed).map_err(|e| e.to_string())? == pct, || format!("cohort {c}: not invariant under x^3"))?;

        for (i, (id, v)) in scored.iter().enumerate() {
            let (mut less, mut ties) = (0usize, 0usize);
            for (j, (_, w)) in scored.iter().enumerate() {
                if j != i {
                    if w < v {
                        less += 1;
                    } else if w == v {
                        ties += 1;
                    }
                }
            }
            let oracle = 100.0 * (less as f64 + 0.5 * ties as f64) / (n - 1) as f64;
            ensure((pct[id] - oracle).abs() <= PERCENTILE_TOL, || format!("cohort {c}, {id}: {} vs oracle {oracle}", pct[id]))?;
        }
    }
    Ok(format!("200 cohorts ({with_ties} with ties): mean 50, x^3 invariant, pairwise oracle matched"))
}

fn reference_t(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let ma = a.iter().sum::<f64>() / na;
    let mb = b.iter().sum::<f64>() / nb;
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
    let df = na + nb - 2.0;
    let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    let p = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().cdf(-t.abs());
    (t, df, p)
}

fn t_test_oracle() -> Result<String, String> {
    let hand = students_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    ensure((hand.t_statistic + 1.0).abs() <= T_TOL, || format!("hand t = {}", hand.t_statistic))?;
    ensure(hand.degrees_of_freedom == 8.0, || format!("hand df = {}", hand.degrees_of_freedom))?;
    ensure((hand.p_two_tailed - HAND_P).abs() <= HAND_P_TOL, || format!("hand p = {}", hand.p_two_tailed))?;

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_t, mut worst_p): (f64, f64) = (0.0, 0.0);
    for i in 0..100 {
        let na = rng.random_range(3..=40);
        let nb = rng.random_range(3..=40);
        let shift = rng.random_range(-15.0..15.0);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..100.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(0.0..100.0) + shift).collect();
        let ours = students_t_test(&a, &b).map_err(|e| e.to_string())?;
        let (t, df, p) = reference_t(&a, &b);
        ensure(ours.degrees_of_freedom == df, || format!("pair {i}: df {} vs {df}", ours.degrees_of_freedom))?;
        worst_t = worst_t.max((ours.t_statistic - t).abs());
        worst_p = worst_p.max((ours.p_two_tailed - p).abs());
    }
    ensure(worst_t <= T_TOL && worst_p <= P_TOL, || format!("max |dt| = {worst_t:e}, max |dp| = {worst_p:e}"))?;
    Ok(format!(
        "hand case t = {:.6}, df = 8, p = {:.6}; 100 pairs max |dt| = {worst_t:.1e}, max |dp| = {worst_p:.1e}",
        hand.t_statistic, hand.p_two_tailed
    ))
}

fn detection_correctness() -> Result<String, String> {
    let mut recalls_by_excluded: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for seed in 0..50 {
        let cfg = SynthConfig { seed, n_sds: 8, researchers_per_sds: 40, planted_pairs: 5, ..SynthConfig::default() };
        ensure(cfg.national_exclusions.is_empty() && cfg.exclude_top_surnames == 0, || "exclusions not empty".into())?;
        let (bundle, truth) = generate(&cfg).map_err(|e| e.to_string())?;
        let surnames: Vec<String> = truth.pairs.iter().map(|p| p.surname.clone()).collect();
        let mut config: ObservationConfig = bundle.config.clone();
        let mut previous = usize::MAX;
        for k in 0..=surnames.len() {
            if k > 0 {
                config.national_surname_exclusions.insert(surnames[k - 1].clone());
            }
            let (recovered, _, _) = score_detection(&bundle.researchers, &config, &truth);
            ensure(recovered <= previous, || format!("seed {seed}: recall rose when excluding {k} surnames"))?;
            previous = recovered;
            let e = recalls_by_excluded.entry(k).or_default();
            e.0 += recovered;
            e.1 += truth.pairs.len();
        }
    }
    let (full, planted) = recalls_by_excluded[&0];
    ensure(full == planted && planted == 250, || format!("recovered {full} of {planted} with empty exclusions"))?;
    let (none, _) = recalls_by_excluded[&5];
    ensure(none == 0, || format!("recovered {none} with all planted surnames excluded"))?;
    let path: Vec<String> = recalls_by_excluded
        .values()
        .map(|(r, p)| format!("{:.0}%", 100.0 * *r as f64 / *p as f64))
        .collect();
    Ok(format!("50 seeds x 5 planted: recall by excluded surnames 0..5 = {}", path.join(" > ")))
}

fn researcher(id: &str, surname: &str, events: &[(i32, Rank)]) -> Researcher {
    Researcher {
        id: id.into(),
        full_name: id.into(),
        surname: surname.into(),
        university_id: "U1".into(),
        region: "LAZIO".into(),
        sds_code: "MAT/05".into(),
        rank_events: events.iter().map(|&(year, rank)| RankEvent { year, rank }).collect(),
        hire_year: events[0].0,
        leave_year: None,
    }
}

fn pair_resolution() -> Result<String, String> {
    let child = [(2002, Rank::Assistant)];
    let parent = [(1990, Rank::Full)];
    let case = |surname: &str, n_children: usize, n_parents: usize| {
        let mut rs = Vec::new();
        for i in 0..n_children {
            rs.push(researcher(&format!("{surname}-C{i}"), surname, &child));
        }
        for i in 0..n_parents {
            rs.push(researcher(&format!("{surname}-P{i}"), surname, &parent));
        }
        rs
    };
    let config = ObservationConfig::default();
    let mut lines = Vec::new();
    for (surname, c, p, expected) in [("ALFA", 1, 3, 1), ("BETA", 2, 1, 2), ("GAMMA", 3, 2, 3)] {
        let d = detect(&case(surname, c, p), &config);
        ensure(d.pairs.len() == expected, || format!("{c} children / {p} parents gave {} pairs", d.pairs.len()))?;
        lines.push(format!("{c}c-{p}p -> {}", d.pairs.len()));
    }
    Ok(lines.join(", "))
}

fn null_calibration() -> Result<String, String> {
    let mut rejections = 0;
    let mut tested = 0;
    let mut children_total = 0;
    for seed in 0..100 {
        let cfg = SynthConfig { seed, planted_child_performance: PlantedPerformance::Matched, ..SynthConfig::default() };
        let (bundle, _) = generate(&cfg).map_err(|e| e.to_string())?;
        let analysis = analyze(&bundle);
        let report = analysis.report(&bundle, Dimension::Overall);
        children_total += report.row(ALL_SEGMENT, CHILDREN).map_or(0, |r| r.n_observations);
        if let Some(t) = report.test(ALL_SEGMENT, CHILDREN, CONTROLS) {
            tested += 1;
            if t.p_two_tailed < ALPHA {
                rejections += 1;
            }
        }
    }
    ensure(tested == 100, || format!("only {tested} of 100 runs had testable groups"))?;
    ensure(rejections < MAX_NULL_REJECTIONS, || format!("{rejections} of 100 runs rejected at {ALPHA}"))?;
    Ok(format!(
        "{rejections} of 100 runs reject at alpha = {ALPHA} (mean {:.1} children per run)",
        children_total as f64 / 100.0
    ))
}

fn kinmetric(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kinmetric"))
        .args(args)
        .arg("--quiet")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("`kinmetric {}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn end_to_end_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| tmp.path().join(name).to_string_lossy().into_owned();

    kinmetric(&["synth", "--seed", "42", "--out", &p("synth")])?;
    kinmetric(&["synth", "--seed", "42", "--out", &p("synth_again")])?;
    ensure(snapshot(&tmp.path().join("synth")) == snapshot(&tmp.path().join("synth_again")), || "synth output differs".into())?;
    let input_before = snapshot(&tmp.path().join("synth"));
    kinmetric(&["report", "--in", &p("synth"), "--out", &p("r1")])?;
    kinmetric(&["report", "--in", &p("synth"), "--out", &p("r2")])?;
    ensure(snapshot(&tmp.path().join("synth")) == input_before, || "report modified its input".into())?;
    let (r1, r2) = (snapshot(&tmp.path().join("r1")), snapshot(&tmp.path().join("r2")));
    let tables = r1.keys().filter(|k| k.starts_with("table")).count();
    ensure(tables == 12, || format!("{tables} table files"))?;
    ensure(r1 == r2, || "report outputs differ".into())?;

    let big = tmp.path().join("big.toml");
    fs::write(&big, "seed = 7\nn_sds = 20\nresearchers_per_sds = 100\n").map_err(|e| e.to_string())?;
    let start = Instant::now();
    kinmetric(&["synth", "--config", &big.to_string_lossy(), "--out", &p("big")])?;
    kinmetric(&["report", "--in", &p("big"), "--out", &p("big_out")])?;
    let elapsed = start.elapsed();
    let roster_rows = fs::read_to_string(tmp.path().join("big/roster.csv")).map_err(|e| e.to_string())?.lines().count() - 1;
    ensure(roster_rows == 2000, || format!("{roster_rows} researchers generated"))?;
    ensure(elapsed < PIPELINE_BUDGET, || format!("2000-researcher pipeline took {elapsed:?}"))?;
    Ok(format!("{} files byte-identical across two runs; 2000 researchers synth+report in {elapsed:.2?}", r1.len()))
}

fn header_of(path: &Path) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .next()
        .unwrap_or("")
        .split(',')
        .map(|s| s.trim_matches('"').to_string())
        .collect())
}

fn groups_of(path: &Path) -> Result<BTreeSet<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1))
        .map(|s| s.trim_matches('"').to_string())
        .collect())
}

fn table_shape() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let synth = tmp.path().join("synth").to_string_lossy().into_owned();
    let out = tmp.path().join("out");
    kinmetric(&["synth", "--seed", "5", "--out", &synth])?;
    kinmetric(&["report", "--in", &synth, "--out", &out.to_string_lossy()])?;

    let common = [
        "n_observations",
        "avg_percentile",
        "pct_no_publications",
        "pct_no_citations",
        "pct_above_median",
        "pct_top20",
        "pct_top10",
        "pct_absolute_top",
    ];
    let t1 = header_of(&out.join("table1.csv"))?;
    let t4 = header_of(&out.join("table4.csv"))?;
    for stat in common {
        ensure(t1.iter().any(|h| h == stat), || format!("table1 lacks {stat}"))?;
        ensure(t4.iter().any(|h| h == stat), || format!("table4 lacks {stat}"))?;
    }
    for stat in ["pct_bottom10", "pct_bottom20"] {
        ensure(t4.iter().any(|h| h == stat), || format!("table4 lacks {stat}"))?;
    }
    let g1 = groups_of(&out.join("table1.csv"))?;
    for g in ["children", "non_children_same_seniority", "non_children_all"] {
        ensure(g1.contains(g), || format!("table1 lacks group {g}"))?;
    }
    let g4 = groups_of(&out.join("table4.csv"))?;
    for g in ["children_no_advancement", "children_advancement", "non_children_no_advancement", "non_children_advancement"] {
        ensure(g4.contains(g), || format!("table4 lacks group {g}"))?;
    }
    Ok(format!("table1: {} statistics x {} groups; table4: {} statistics x {} groups", common.len(), g1.len(), common.len() + 2, g4.len()))
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("weight completeness", weight_completeness),
        ("scale invariance", scale_invariance),
        ("percentile calibration", percentile_calibration),
        ("t-test oracle equivalence", t_test_oracle),
        ("detection correctness", detection_correctness),
        ("pair-resolution conformance", pair_resolution),
        ("null-hypothesis calibration", null_calibration),
        ("end-to-end determinism", end_to_end_determinism),
        ("table shape fidelity", table_shape),
    ];
    // Keep panics from interleaving backtraces with the summary lines.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
