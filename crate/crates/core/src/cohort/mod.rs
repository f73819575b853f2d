//! Comparison groups and the summary tables built from them.
//!
//! Every percentile used here comes from the global (field, rank) ranking;
//! groups are never re-ranked among themselves. t-tests compare percentile
//! ranks.

mod ttest;

pub use ttest::{
    ln_gamma, regularized_incomplete_beta, student_t_two_tailed, students_t_test, welch_t_test,
    StatsError, TTestResult,
};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinship::{entry_year, KinshipPair};
use crate::model::{DatasetBundle, Researcher};
use crate::ranking::{CohortKey, Ranking};
use crate::scoring::ScoreCard;

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("unknown report dimension `{0}`")]
    UnknownDimension(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    /// Children vs. seniority-matched controls vs. all non-children.
    Overall,
    /// Children vs. controls per discipline.
    Uda,
    /// Children vs. controls per geographic area.
    Area,
    /// Advanced vs. not advanced, children and controls.
    Advancement,
    /// Parents vs. non-parents of the same cohorts.
    Parents,
    /// Children vs. their own parents.
    ChildParent,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::Overall,
        Dimension::Uda,
        Dimension::Area,
        Dimension::Advancement,
        Dimension::Parents,
        Dimension::ChildParent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Overall => "overall",
            Dimension::Uda => "uda",
            Dimension::Area => "area",
            Dimension::Advancement => "advancement",
            Dimension::Parents => "parents",
            Dimension::ChildParent => "child-parent",
        }
    }

    /// Output file stem: `table1` .. `table6`.
    pub fn table_name(self) -> &'static str {
        match self {
            Dimension::Overall => "table1",
            Dimension::Uda => "table2",
            Dimension::Area => "table3",
            Dimension::Advancement => "table4",
            Dimension::Parents => "table5",
            Dimension::ChildParent => "table6",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| ReportError::UnknownDimension(s.to_string()))
    }
}

/// Summary statistics of one group. Every field but the label and count is
/// `None` for an empty group; the bottom-tier shares are only filled in for
/// the advancement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    pub n_observations: usize,
    pub avg_percentile: Option<f64>,
    pub pct_no_publications: Option<f64>,
    pub pct_no_citations: Option<f64>,
    pub pct_above_median: Option<f64>,
    pub pct_top20: Option<f64>,
    pub pct_top10: Option<f64>,
    pub pct_absolute_top: Option<f64>,
    pub pct_bottom10: Option<f64>,
    pub pct_bottom20: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Breakdown cell the group belongs to: "all", a discipline code, an area.
    pub segment: String,
    pub stats: GroupStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRow {
    pub segment: String,
    pub group_a: String,
    pub group_b: String,
    pub result: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub dimension: Dimension,
    pub with_bottom_tiers: bool,
    pub rows: Vec<ReportRow>,
    pub tests: Vec<TestRow>,
    /// Named scalar results, e.g. potential-nepotism rates.
    pub indicators: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl CohortReport {
    fn new(dimension: Dimension, with_bottom_tiers: bool) -> Self {
        CohortReport {
            dimension,
            with_bottom_tiers,
            rows: Vec::new(),
            tests: Vec::new(),
            indicators: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn row(&self, segment: &str, label: &str) -> Option<&GroupStats> {
        self.rows
            .iter()
            .find(|r| r.segment == segment && r.stats.label == label)
            .map(|r| &r.stats)
    }

    pub fn test(&self, segment: &str, group_a: &str, group_b: &str) -> Option<&TTestResult> {
        self.tests
            .iter()
            .find(|t| t.segment == segment && t.group_a == group_a && t.group_b == group_b)
            .map(|t| &t.result)
    }
}

pub const CHILDREN: &str = "children";
pub const CONTROLS: &str = "non_children_same_seniority";
pub const NON_CHILDREN: &str = "non_children_all";
pub const PARENTS: &str = "parents";
pub const NON_PARENTS: &str = "non_parents";
pub const ALL_SEGMENT: &str = "all";
pub const OTHER_SEGMENT: &str = "Other";
pub const TOTAL_SEGMENT: &str = "Total";

/// Read-only view over everything the cohort stage needs.
pub struct CohortContext<'a> {
    pub bundle: &'a DatasetBundle,
    pub cards: &'a BTreeMap<String, ScoreCard>,
    pub ranking: &'a Ranking,
    pub pairs: &'a [KinshipPair],
    researchers: BTreeMap<&'a str, &'a Researcher>,
}

impl<'a> CohortContext<'a> {
    pub fn new(
        bundle: &'a DatasetBundle,
        cards: &'a BTreeMap<String, ScoreCard>,
        ranking: &'a Ranking,
        pairs: &'a [KinshipPair],
    ) -> Self {
        CohortContext {
            bundle,
            cards,
            ranking,
            pairs,
            researchers: bundle.researchers_by_id(),
        }
    }

    fn researcher(&self, id: &str) -> &'a Researcher {
        self.researchers[id]
    }

    /// Children of resolved pairs.
    pub fn children(&self) -> BTreeSet<&'a str> {
        self.pairs.iter().map(|p| p.child_id.as_str()).collect()
    }

    /// Ranked members of `ids`, preserving order and duplicates.
    fn ranked<'b, I>(&self, ids: I) -> Vec<&'b str>
    where
        I: IntoIterator<Item = &'b str>,
    {
        ids.into_iter()
            .filter(|id| self.ranking.is_ranked(id))
            .collect()
    }

    fn percentiles(&self, ids: &[&str]) -> Vec<f64> {
        ids.iter()
            .map(|id| self.ranking.scores[*id].percentile)
            .collect()
    }
}

fn pct(count: usize, n: usize) -> f64 {
    100.0 * count as f64 / n as f64
}

/// Statistics over `ids`, all of which must be ranked and scored.
pub fn group_stats(
    label: &str,
    ids: &[&str],
    ranking: &Ranking,
    cards: &BTreeMap<String, ScoreCard>,
    with_bottom_tiers: bool,
) -> GroupStats {
    let n = ids.len();
    if n == 0 {
        return GroupStats {
            label: label.to_string(),
            n_observations: 0,
            avg_percentile: None,
            pct_no_publications: None,
            pct_no_citations: None,
            pct_above_median: None,
            pct_top20: None,
            pct_top10: None,
            pct_absolute_top: None,
            pct_bottom10: None,
            pct_bottom20: None,
        };
    }
    let scores: Vec<_> = ids.iter().map(|id| &ranking.scores[*id]).collect();
    let count = |f: &dyn Fn(usize) -> bool| (0..n).filter(|&i| f(i)).count();
    let share = |f: &dyn Fn(usize) -> bool| Some(pct(count(f), n));
    GroupStats {
        label: label.to_string(),
        n_observations: n,
        avg_percentile: Some(scores.iter().map(|s| s.percentile).sum::<f64>() / n as f64),
        pct_no_publications: share(&|i| !cards[ids[i]].has_publications),
        pct_no_citations: share(&|i| !cards[ids[i]].has_citations),
        pct_above_median: share(&|i| scores[i].tiers.above_median),
        pct_top20: share(&|i| scores[i].tiers.top20),
        pct_top10: share(&|i| scores[i].tiers.top10),
        pct_absolute_top: share(&|i| scores[i].tiers.absolute_top),
        pct_bottom10: with_bottom_tiers.then(|| pct(count(&|i| scores[i].tiers.bottom10), n)),
        pct_bottom20: with_bottom_tiers.then(|| pct(count(&|i| scores[i].tiers.bottom20), n)),
    }
}

/// Non-children who entered the child cohort window the same way children
/// did (an Assistant or Associate event inside the entry window).
pub fn seniority_matched_controls<'a>(
    children: &BTreeSet<&str>,
    bundle: &'a DatasetBundle,
) -> BTreeSet<&'a str> {
    bundle
        .researchers
        .iter()
        .filter(|r| !children.contains(r.id.as_str()))
        .filter(|r| entry_year(r, &bundle.config).is_some())
        .map(|r| r.id.as_str())
        .collect()
}

/// Promoted to a strictly higher rank after cohort entry, no later than the
/// advancement horizon.
pub fn advanced(researcher: &Researcher, bundle: &DatasetBundle) -> bool {
    let config = &bundle.config;
    let Some(entry) = researcher.entry_event_in(config.entry_window()) else {
        return false;
    };
    let horizon = config.advancement_horizon();
    researcher
        .rank_events
        .iter()
        .any(|e| e.year > entry.year && e.year <= horizon && e.rank > entry.rank)
}

fn run_test(
    report: &mut CohortReport,
    ctx: &CohortContext<'_>,
    segment: &str,
    (label_a, a): (&str, &[&str]),
    (label_b, b): (&str, &[&str]),
) {
    let (xa, xb) = (ctx.percentiles(a), ctx.percentiles(b));
    let result = if ctx.bundle.config.scalars.welch {
        welch_t_test(&xa, &xb)
    } else {
        students_t_test(&xa, &xb)
    };
    match result {
        Ok(result) => report.tests.push(TestRow {
            segment: segment.to_string(),
            group_a: label_a.to_string(),
            group_b: label_b.to_string(),
            result,
        }),
        Err(e) => report
            .notes
            .push(format!("{segment}: {label_a} vs {label_b} not tested ({e})")),
    }
}

fn push_row(report: &mut CohortReport, ctx: &CohortContext<'_>, segment: &str, label: &str, ids: &[&str]) {
    report.rows.push(ReportRow {
        segment: segment.to_string(),
        stats: group_stats(label, ids, ctx.ranking, ctx.cards, report.with_bottom_tiers),
    });
}

/// Ranked children and ranked seniority-matched controls.
fn children_and_controls<'a>(ctx: &CohortContext<'a>) -> (Vec<&'a str>, Vec<&'a str>) {
    let children = ctx.children();
    let controls = seniority_matched_controls(&children, ctx.bundle);
    (ctx.ranked(children), ctx.ranked(controls))
}

fn overall(ctx: &CohortContext<'_>) -> CohortReport {
    let mut report = CohortReport::new(Dimension::Overall, false);
    let (children, controls) = children_and_controls(ctx);
    let child_set: BTreeSet<&str> = children.iter().copied().collect();
    let non_children: Vec<&str> = ctx
        .ranking
        .scores
        .keys()
        .map(String::as_str)
        .filter(|id| !child_set.contains(id))
        .collect();

    push_row(&mut report, ctx, ALL_SEGMENT, CHILDREN, &children);
    push_row(&mut report, ctx, ALL_SEGMENT, CONTROLS, &controls);
    push_row(&mut report, ctx, ALL_SEGMENT, NON_CHILDREN, &non_children);
    run_test(&mut report, ctx, ALL_SEGMENT, (CHILDREN, &children), (CONTROLS, &controls));
    run_test(&mut report, ctx, ALL_SEGMENT, (CHILDREN, &children), (NON_CHILDREN, &non_children));
    report
}

/// One children/controls block per segment. `segment_of` returns an order
/// key and the segment name; blocks are emitted by (key, name).
fn by_segment<F>(dimension: Dimension, ctx: &CohortContext<'_>, segment_of: F) -> CohortReport
where
    F: Fn(&Researcher) -> (u8, String),
{
    let mut report = CohortReport::new(dimension, false);
    let (children, controls) = children_and_controls(ctx);
    let mut segments: BTreeMap<(u8, String), (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for &id in &children {
        segments.entry(segment_of(ctx.researcher(id))).or_default().0.push(id);
    }
    for &id in &controls {
        segments.entry(segment_of(ctx.researcher(id))).or_default().1.push(id);
    }
    for ((_, segment), (c, nc)) in &segments {
        push_row(&mut report, ctx, segment, CHILDREN, c);
        push_row(&mut report, ctx, segment, CONTROLS, nc);
        run_test(&mut report, ctx, segment, (CHILDREN, c), (CONTROLS, nc));
    }
    report
}

fn per_uda(ctx: &CohortContext<'_>) -> CohortReport {
    let taxonomy = &ctx.bundle.taxonomy;
    let uda = |r: &Researcher| taxonomy.uda_of(&r.sds_code).unwrap_or_default().to_string();

    let (children, _) = children_and_controls(ctx);
    let mut child_counts: BTreeMap<String, usize> = BTreeMap::new();
    for &id in &children {
        *child_counts.entry(uda(ctx.researcher(id))).or_default() += 1;
    }
    let min = ctx.bundle.config.scalars.min_group_children;
    let large: BTreeSet<String> = child_counts
        .into_iter()
        .filter(|&(_, n)| n >= min)
        .map(|(code, _)| code)
        .collect();

    // Discipline codes first, then "Other", then "Total".
    let mut report = by_segment(Dimension::Uda, ctx, |r| {
        let code = uda(r);
        if large.contains(&code) {
            (0, code)
        } else {
            (1, OTHER_SEGMENT.to_string())
        }
    });
    let total = by_segment(Dimension::Uda, ctx, |_| (2, TOTAL_SEGMENT.to_string()));
    report.rows.extend(total.rows);
    report.tests.extend(total.tests);
    report.notes.extend(total.notes);
    report.notes.push(format!(
        "disciplines with fewer than {min} ranked children are merged into `{OTHER_SEGMENT}`"
    ));
    report
}

fn per_area(ctx: &CohortContext<'_>) -> CohortReport {
    let areas = &ctx.bundle.config.region_area_map;
    by_segment(Dimension::Area, ctx, |r| {
        let area = areas[&r.region];
        (area as u8, area.to_string())
    })
}

pub const CHILDREN_NOT_ADVANCED: &str = "children_no_advancement";
pub const CHILDREN_ADVANCED: &str = "children_advancement";
pub const CONTROLS_NOT_ADVANCED: &str = "non_children_no_advancement";
pub const CONTROLS_ADVANCED: &str = "non_children_advancement";

/// Share (in %) of `ids` whose percentile falls in the bottom tier.
pub fn potential_nepotism_rate(ids: &[&str], ranking: &Ranking) -> Option<f64> {
    if ids.is_empty() {
        return None;
    }
    let bottom = ids
        .iter()
        .filter(|id| ranking.scores[**id].tiers.bottom20)
        .count();
    Some(pct(bottom, ids.len()))
}

/// (not advanced, advanced)
fn split_by_advancement<'a>(ctx: &CohortContext<'_>, ids: &[&'a str]) -> (Vec<&'a str>, Vec<&'a str>) {
    let (adv, not) = ids
        .iter()
        .partition(|id| advanced(ctx.researcher(id), ctx.bundle));
    (not, adv)
}

/// Advancement split of children and seniority-matched controls.
pub fn career_advancement_analysis(ctx: &CohortContext<'_>) -> CohortReport {
    let mut report = CohortReport::new(Dimension::Advancement, true);
    let (children, controls) = children_and_controls(ctx);
    let (c_not, c_adv) = split_by_advancement(ctx, &children);
    let (nc_not, nc_adv) = split_by_advancement(ctx, &controls);

    push_row(&mut report, ctx, ALL_SEGMENT, CHILDREN_NOT_ADVANCED, &c_not);
    push_row(&mut report, ctx, ALL_SEGMENT, CHILDREN_ADVANCED, &c_adv);
    push_row(&mut report, ctx, ALL_SEGMENT, CONTROLS_NOT_ADVANCED, &nc_not);
    push_row(&mut report, ctx, ALL_SEGMENT, CONTROLS_ADVANCED, &nc_adv);
    run_test(
        &mut report,
        ctx,
        ALL_SEGMENT,
        (CHILDREN_ADVANCED, &c_adv),
        (CONTROLS_NOT_ADVANCED, &nc_not),
    );
    run_test(
        &mut report,
        ctx,
        ALL_SEGMENT,
        (CHILDREN_NOT_ADVANCED, &c_not),
        (CONTROLS_ADVANCED, &nc_adv),
    );
    if let Some(rate) = potential_nepotism_rate(&c_adv, ctx.ranking) {
        report
            .indicators
            .insert("potential_nepotism_rate_children".to_string(), rate);
    }
    if let Some(rate) = potential_nepotism_rate(&nc_adv, ctx.ranking) {
        report
            .indicators
            .insert("potential_nepotism_rate_non_children".to_string(), rate);
    }
    report.notes.push(format!(
        "advancement = promotion after cohort entry up to {}",
        ctx.bundle.config.advancement_horizon()
    ));
    report
}

/// Ranked parents of resolved pairs.
fn ranked_parents<'a>(ctx: &CohortContext<'a>) -> Vec<&'a str> {
    let parents: BTreeSet<&str> = ctx
        .pairs
        .iter()
        .flat_map(|p| p.parent_ids.iter().map(String::as_str))
        .collect();
    ctx.ranked(parents)
}

fn parents_vs_non_parents(ctx: &CohortContext<'_>) -> CohortReport {
    let mut report = CohortReport::new(Dimension::Parents, false);
    let parents = ranked_parents(ctx);
    let parent_set: BTreeSet<&str> = parents.iter().copied().collect();
    let cohorts: BTreeSet<&CohortKey> = parents
        .iter()
        .map(|id| &ctx.ranking.scores[*id].cohort)
        .collect();
    let non_parents: Vec<&str> = ctx
        .ranking
        .scores
        .values()
        .filter(|s| cohorts.contains(&s.cohort) && !parent_set.contains(s.researcher_id.as_str()))
        .map(|s| s.researcher_id.as_str())
        .collect();

    push_row(&mut report, ctx, ALL_SEGMENT, PARENTS, &parents);
    push_row(&mut report, ctx, ALL_SEGMENT, NON_PARENTS, &non_parents);
    run_test(&mut report, ctx, ALL_SEGMENT, (PARENTS, &parents), (NON_PARENTS, &non_parents));
    report
}

/// For each pair with a ranked child and at least one ranked parent, the
/// child and the most senior ranked parent (earliest Full rank, then id).
pub fn matched_child_parent<'a>(ctx: &CohortContext<'a>) -> Vec<(&'a str, &'a str)> {
    ctx.pairs
        .iter()
        .filter(|p| ctx.ranking.is_ranked(&p.child_id))
        .filter_map(|p| {
            p.parent_ids
                .iter()
                .filter(|id| ctx.ranking.is_ranked(id))
                .min_by_key(|id| (ctx.researcher(id).full_since().unwrap_or(i32::MAX), id.as_str()))
                .map(|parent| (p.child_id.as_str(), parent.as_str()))
        })
        .collect()
}

fn children_vs_parents(ctx: &CohortContext<'_>) -> CohortReport {
    let mut report = CohortReport::new(Dimension::ChildParent, false);
    let matched = matched_child_parent(ctx);
    let children: Vec<&str> = matched.iter().map(|(c, _)| *c).collect();
    let parents: Vec<&str> = matched.iter().map(|(_, p)| *p).collect();
    push_row(&mut report, ctx, ALL_SEGMENT, CHILDREN, &children);
    push_row(&mut report, ctx, ALL_SEGMENT, PARENTS, &parents);
    run_test(&mut report, ctx, ALL_SEGMENT, (CHILDREN, &children), (PARENTS, &parents));
    let dropped = ctx.pairs.len() - matched.len();
    if dropped > 0 {
        report
            .notes
            .push(format!("{dropped} pairs dropped: child or every parent not ranked"));
    }
    report
}

pub fn build_report(ctx: &CohortContext<'_>, dimension: Dimension) -> CohortReport {
    let mut report = match dimension {
        Dimension::Overall => overall(ctx),
        Dimension::Uda => per_uda(ctx),
        Dimension::Area => per_area(ctx),
        Dimension::Advancement => career_advancement_analysis(ctx),
        Dimension::Parents => parents_vs_non_parents(ctx),
        Dimension::ChildParent => children_vs_parents(ctx),
    };
    report.notes.push(format!(
        "t-tests on percentile ranks ({})",
        if ctx.bundle.config.scalars.welch { "Welch" } else { "pooled-variance Student" }
    ));
    report.notes.push(format!(
        "absolute top = top {}% of the field-and-rank cohort",
        100.0 * ctx.bundle.config.scalars.absolute_top_fraction
    ));
    report
}
