//! Citation baselines: per (year, subject category) median of the citation
//! counts of cited publications, and the normalized impact of a publication
//! against those medians.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::Publication;

/// A (publication year, subject category) cell.
pub type CellKey = (i32, String);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMedian {
    /// Always >= 1, since only cited publications vote.
    pub median: f64,
    pub n_cited: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CitationBaseline {
    pub cells: BTreeMap<CellKey, CellMedian>,
    /// Cells that hold publications but none with a citation.
    pub empty_cells: BTreeSet<CellKey>,
}

/// Median of a non-empty list; even lengths take the midpoint of the two
/// central values.
pub(crate) fn median_of_sorted(sorted: &[u64]) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
    }
}

/// Builds the baseline from the whole corpus. A publication votes once in
/// each of its categories.
pub fn compute_baselines(publications: &[Publication]) -> CitationBaseline {
    let mut by_cell: BTreeMap<CellKey, Vec<u64>> = BTreeMap::new();
    for p in publications {
        for cat in &p.categories {
            let cited = by_cell.entry((p.year, cat.clone())).or_default();
            if p.citations >= 1 {
                cited.push(p.citations);
            }
        }
    }

    let computed: Vec<(CellKey, Option<CellMedian>)> = by_cell
        .into_par_iter()
        .map(|(key, mut cited)| {
            if cited.is_empty() {
                return (key, None);
            }
            cited.sort_unstable();
            let cell = CellMedian {
                median: median_of_sorted(&cited),
                n_cited: cited.len(),
            };
            (key, Some(cell))
        })
        .collect();

    let mut baseline = CitationBaseline::default();
    for (key, cell) in computed {
        match cell {
            Some(cell) => {
                baseline.cells.insert(key, cell);
            }
            None => {
                baseline.empty_cells.insert(key);
            }
        }
    }
    baseline
}

impl CitationBaseline {
    pub fn median(&self, year: i32, category: &str) -> Option<f64> {
        // BTreeMap<(i32, String), _> cannot be probed with a borrowed tuple.
        self.cells
            .get(&(year, category.to_string()))
            .map(|c| c.median)
    }
}

/// Citations divided by the cell median, averaged over the publication's
/// categories with equal weights. `None` when no category has a median.
pub fn normalized_impact(publication: &Publication, baseline: &CitationBaseline) -> Option<f64> {
    normalized_impact_weighted(publication, baseline, |_| 1.0)
}

/// Weighted variant: `weight(category)` gives the relative weight of each
/// category's standardized value. Categories without a median drop out and
/// the remaining weights are renormalized.
pub fn normalized_impact_weighted<W>(
    publication: &Publication,
    baseline: &CitationBaseline,
    weight: W,
) -> Option<f64>
where
    W: Fn(&str) -> f64,
{
    let citations = publication.citations as f64;
    let mut weighted = 0.0;
    let mut total_weight = 0.0;
    for cat in &publication.categories {
        if let Some(median) = baseline.median(publication.year, cat) {
            let w = weight(cat);
            weighted += w * (citations / median);
            total_weight += w;
        }
    }
    (total_weight > 0.0).then(|| weighted / total_weight)
}
