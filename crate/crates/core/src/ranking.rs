//! Eligibility filters and percentile ranks within (field, rank) cohorts.
//!
//! Percentiles use midranks: member j of a cohort of size n >= 2 scores
//! `100 * (#{P_k < P_j} + 0.5 * #{k != j, P_k = P_j}) / (n - 1)`, so 0 is the
//! worst and 100 the best. A cohort of one sits at 50.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ObservationConfig, ObservationScalars, Rank, Researcher};
use crate::scoring::ScoreCard;

#[derive(Debug, Error, PartialEq)]
pub enum RankingError {
    #[error("cannot rank an empty cohort")]
    EmptyCohort,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierFlags {
    pub above_median: bool,
    pub top20: bool,
    pub top10: bool,
    pub absolute_top: bool,
    pub bottom20: bool,
    pub bottom10: bool,
}

/// Percentile thresholds derived from the configured tier fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierThresholds {
    pub top: f64,
    pub top_decile: f64,
    pub absolute_top: f64,
    pub bottom: f64,
    pub bottom_decile: f64,
}

impl TierThresholds {
    pub fn from_scalars(s: &ObservationScalars) -> Self {
        TierThresholds {
            top: 100.0 - 100.0 * s.top_fraction,
            top_decile: 100.0 - 100.0 * s.top_decile_fraction,
            absolute_top: 100.0 - 100.0 * s.absolute_top_fraction,
            bottom: 100.0 * s.bottom_fraction,
            bottom_decile: 100.0 * s.bottom_decile_fraction,
        }
    }
}

pub fn classify_tiers(percentile: f64, scalars: &ObservationScalars) -> TierFlags {
    let t = TierThresholds::from_scalars(scalars);
    TierFlags {
        above_median: percentile > 50.0,
        top20: percentile >= t.top,
        top10: percentile >= t.top_decile,
        absolute_top: percentile >= t.absolute_top,
        bottom20: percentile < t.bottom,
        bottom10: percentile < t.bottom_decile,
    }
}

/// For each value, `2 * #{strictly smaller} + #{other equal}`. The integer
/// form keeps the midrank exact: a cohort's counts sum to `n * (n - 1)`.
pub fn midrank_counts(values: &[f64]) -> Vec<u64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let mut counts = vec![0u64; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let ties = (end - start - 1) as u64;
        for &i in &order[start..end] {
            counts[i] = 2 * start as u64 + ties;
        }
        start = end;
    }
    counts
}

/// Percentile of each member within one cohort.
pub fn percentile_ranks(scores: &[(String, f64)]) -> Result<BTreeMap<String, f64>, RankingError> {
    let n = scores.len();
    if n == 0 {
        return Err(RankingError::EmptyCohort);
    }
    if n == 1 {
        return Ok(BTreeMap::from([(scores[0].0.clone(), 50.0)]));
    }
    let values: Vec<f64> = scores.iter().map(|(_, p)| *p).collect();
    let denom = 2.0 * (n - 1) as f64;
    Ok(scores
        .iter()
        .zip(midrank_counts(&values))
        .map(|((id, _), c)| (id.clone(), 100.0 * c as f64 / denom))
        .collect())
}

/// Field codes where the share of scored researchers with at least one
/// publication reaches the configured threshold.
pub fn eligible_sds(
    researchers: &[Researcher],
    cards: &BTreeMap<String, ScoreCard>,
    config: &ObservationConfig,
) -> BTreeSet<String> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in researchers {
        if let Some(card) = cards.get(&r.id) {
            let entry = tally.entry(r.sds_code.as_str()).or_default();
            entry.1 += 1;
            if card.has_publications {
                entry.0 += 1;
            }
        }
    }
    let threshold = config.scalars.sds_publishing_share_threshold;
    tally
        .into_iter()
        .filter(|&(_, (publishing, total))| publishing as f64 >= threshold * total as f64)
        .map(|(sds, _)| sds.to_string())
        .collect()
}

/// Researchers with enough faculty years in the window and an eligible field.
pub fn eligible_researchers(
    researchers: &[Researcher],
    cards: &BTreeMap<String, ScoreCard>,
    config: &ObservationConfig,
) -> BTreeSet<String> {
    let fields = eligible_sds(researchers, cards, config);
    let window = config.window();
    researchers
        .iter()
        .filter(|r| {
            r.years_on_faculty(window.start, window.end) >= config.scalars.min_faculty_years
                && fields.contains(&r.sds_code)
        })
        .map(|r| r.id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CohortKey {
    pub sds_code: String,
    /// Rank held at the end of the observation window.
    pub rank: Rank,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedScore {
    pub researcher_id: String,
    pub cohort: CohortKey,
    pub p: f64,
    pub percentile: f64,
    pub tiers: TierFlags,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ranking {
    pub eligible_sds: BTreeSet<String>,
    pub scores: BTreeMap<String, RankedScore>,
    /// Eligible but without a rank at window end, so no cohort to join.
    pub unranked: Vec<String>,
}

impl Ranking {
    pub fn get(&self, researcher_id: &str) -> Option<&RankedScore> {
        self.scores.get(researcher_id)
    }

    pub fn is_ranked(&self, researcher_id: &str) -> bool {
        self.scores.contains_key(researcher_id)
    }
}

/// Filters, groups by (field, rank at window end) and ranks every cohort.
pub fn rank_all(
    researchers: &[Researcher],
    cards: &BTreeMap<String, ScoreCard>,
    config: &ObservationConfig,
) -> Ranking {
    let eligible_fields = eligible_sds(researchers, cards, config);
    let eligible = eligible_researchers(researchers, cards, config);
    let window_end = config.scalars.window_end;

    let mut cohorts: BTreeMap<CohortKey, Vec<(String, f64)>> = BTreeMap::new();
    let mut unranked = Vec::new();
    for r in researchers.iter().filter(|r| eligible.contains(&r.id)) {
        let Some(card) = cards.get(&r.id) else {
            continue;
        };
        match r.rank_at(window_end) {
            Some(rank) => cohorts
                .entry(CohortKey {
                    sds_code: r.sds_code.clone(),
                    rank,
                })
                .or_default()
                .push((r.id.clone(), card.p)),
            None => unranked.push(r.id.clone()),
        }
    }
    unranked.sort();

    let ranked: Vec<Vec<RankedScore>> = cohorts
        .into_par_iter()
        .map(|(key, members)| {
            let percentiles = percentile_ranks(&members).expect("cohorts are non-empty");
            members
                .iter()
                .map(|(id, p)| {
                    let percentile = percentiles[id];
                    RankedScore {
                        researcher_id: id.clone(),
                        cohort: key.clone(),
                        p: *p,
                        percentile,
                        tiers: classify_tiers(percentile, &config.scalars),
                    }
                })
                .collect()
        })
        .collect();

    Ranking {
        eligible_sds: eligible_fields,
        scores: ranked
            .into_iter()
            .flatten()
            .map(|s| (s.researcher_id.clone(), s))
            .collect(),
        unranked,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{config, researcher};
    use proptest::prelude::*;

    fn cohort(values: &[f64]) -> Vec<(String, f64)> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (format!("r{i:03}"), v))
            .collect()
    }

    fn ranks(values: &[f64]) -> Vec<f64> {
        let c = cohort(values);
        let m = percentile_ranks(&c).unwrap();
        c.iter().map(|(id, _)| m[id]).collect()
    }

    // Oracle: count over all ordered pairs.
    fn brute_force(values: &[f64]) -> Vec<f64> {
        let n = values.len();
        if n == 1 {
            return vec![50.0];
        }
        (0..n)
            .map(|j| {
                let mut score = 0.0;
                for k in 0..n {
                    if k == j {
                        continue;
                    }
                    if values[k] < values[j] {
                        score += 1.0;
                    } else if values[k] == values[j] {
                        score += 0.5;
                    }
                }
                100.0 * score / (n - 1) as f64
            })
            .collect()
    }

    #[test]
    fn distinct_values() {
        assert_eq!(ranks(&[1.0, 2.0, 3.0]), vec![0.0, 50.0, 100.0]);
    }

    #[test]
    fn all_equal() {
        assert_eq!(ranks(&[5.0; 4]), vec![50.0; 4]);
    }

    #[test]
    fn ties_use_midranks() {
        assert_eq!(brute_force(&[1.0, 1.0, 2.0]), vec![25.0, 25.0, 100.0]);
        assert_eq!(ranks(&[1.0, 1.0, 2.0]), vec![25.0, 25.0, 100.0]);
    }

    #[test]
    fn singleton_and_empty() {
        assert_eq!(ranks(&[3.0]), vec![50.0]);
        assert_eq!(percentile_ranks(&[]), Err(RankingError::EmptyCohort));
    }

    #[test]
    fn tiers() {
        let s = ObservationScalars::default();
        let t95 = classify_tiers(95.0, &s);
        assert!(t95.top20 && t95.top10 && !t95.absolute_top && t95.above_median);
        assert!(!classify_tiers(50.0, &s).above_median);
        let t7 = classify_tiers(7.0, &s);
        assert!(t7.bottom20 && t7.bottom10);
        assert!(classify_tiers(80.0, &s).top20);
        assert!(!classify_tiers(20.0, &s).bottom20);
        assert!(classify_tiers(99.0, &s).absolute_top);
        assert!(classify_tiers(90.0, &s).top10);
        assert!(!classify_tiers(10.0, &s).bottom10);
    }

    fn sds_population(publishing: usize, total: usize) -> (Vec<Researcher>, BTreeMap<String, ScoreCard>) {
        let mut rs = Vec::new();
        let mut cards = BTreeMap::new();
        for i in 0..total {
            let r = researcher(&format!("R{i}"), "MAT/05", &[(1990, Rank::Full)], 1990);
            cards.insert(
                r.id.clone(),
                ScoreCard {
                    researcher_id: r.id.clone(),
                    p: i as f64,
                    t_years: 5,
                    n_publications: usize::from(i < publishing),
                    n_cited_publications: 0,
                    has_publications: i < publishing,
                    has_citations: false,
                },
            );
            rs.push(r);
        }
        (rs, cards)
    }

    #[test]
    fn sds_share_boundaries() {
        for (publishing, included) in [(4, false), (5, true), (10, true)] {
            let (rs, cards) = sds_population(publishing, 10);
            assert_eq!(eligible_sds(&rs, &cards, &config()).contains("MAT/05"), included, "{publishing}/10");
        }
    }

    #[test]
    fn faculty_year_filter() {
        let (mut rs, cards) = sds_population(10, 3);
        rs[0].hire_year = 2007;
        rs[0].rank_events[0].year = 2007;
        rs[1].hire_year = 1990;
        rs[2].hire_year = 2006;
        rs[2].rank_events[0].year = 2006;
        rs[2].leave_year = Some(2008);
        let eligible = eligible_researchers(&rs, &cards, &config());
        assert_eq!(eligible, BTreeSet::from(["R1".to_string(), "R2".to_string()]));
    }

    #[test]
    fn rank_all_splits_by_rank_at_window_end() {
        let (mut rs, cards) = sds_population(10, 4);
        rs[0].rank_events = vec![
            crate::model::RankEvent { year: 1990, rank: Rank::Associate },
            crate::model::RankEvent { year: 2009, rank: Rank::Full },
        ];
        let ranking = rank_all(&rs, &cards, &config());
        assert_eq!(ranking.scores.len(), 4);
        assert_eq!(ranking.get("R0").unwrap().cohort.rank, Rank::Associate);
        assert_eq!(ranking.get("R0").unwrap().percentile, 50.0);
        assert_eq!(ranking.get("R1").unwrap().percentile, 0.0);
        assert_eq!(ranking.get("R3").unwrap().percentile, 100.0);
    }

    fn tied_cohort() -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec((0u32..8).prop_map(|v| v as f64 * 0.25), 2..50)
    }

    proptest! {
        #[test]
        fn matches_brute_force(values in tied_cohort()) {
            prop_assert_eq!(ranks(&values), brute_force(&values));
        }

        #[test]
        fn mean_is_exactly_fifty(values in tied_cohort()) {
            let n = values.len() as u64;
            prop_assert_eq!(midrank_counts(&values).iter().sum::<u64>(), n * (n - 1));
        }

        #[test]
        fn increasing_transform_invariant(values in tied_cohort()) {
            let cubed: Vec<f64> = values.iter().map(|v| v.powi(3)).collect();
            let exped: Vec<f64> = values.iter().map(|v| v.exp()).collect();
            prop_assert_eq!(ranks(&values), ranks(&cubed));
            prop_assert_eq!(ranks(&values), ranks(&exped));
        }

        #[test]
        fn permutation_invariant(values in tied_cohort(), seed in any::<u64>()) {
            let c = cohort(&values);
            let mut shuffled = c.clone();
            let len = shuffled.len();
            for i in 0..len {
                let j = ((seed.wrapping_mul(6364136223846793005).wrapping_add(i as u64)) % len as u64) as usize;
                shuffled.swap(i, j);
            }
            prop_assert_eq!(percentile_ranks(&c).unwrap(), percentile_ranks(&shuffled).unwrap());
        }

        #[test]
        fn tiers_monotone(a in 0.0f64..=100.0, b in 0.0f64..=100.0) {
            let s = ObservationScalars::default();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (tl, th) = (classify_tiers(lo, &s), classify_tiers(hi, &s));
            prop_assert!(!tl.top20 || th.top20);
            prop_assert!(!tl.top10 || th.top10);
            prop_assert!(!tl.absolute_top || th.absolute_top);
            prop_assert!(!tl.above_median || th.above_median);
            prop_assert!(!th.bottom20 || tl.bottom20);
            prop_assert!(!th.bottom10 || tl.bottom10);
            // Nesting.
            prop_assert!(!tl.top10 || tl.top20);
            prop_assert!(!tl.absolute_top || tl.top10);
            prop_assert!(!tl.bottom10 || tl.bottom20);
        }
    }
}
