//! The full analysis chain: baselines, scores, rankings, kinship and reports.

use crate::baseline::{compute_baselines, CitationBaseline};
use crate::cohort::{build_report, CohortContext, CohortReport, Dimension};
use crate::kinship::{detect, Detection};
use crate::model::DatasetBundle;
use crate::ranking::{rank_all, Ranking};
use crate::scoring::{score_all, ScoringOutcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub baseline: CitationBaseline,
    pub scoring: ScoringOutcome,
    pub ranking: Ranking,
    pub detection: Detection,
}

impl Analysis {
    pub fn context<'a>(&'a self, bundle: &'a DatasetBundle) -> CohortContext<'a> {
        CohortContext::new(bundle, &self.scoring.cards, &self.ranking, &self.detection.pairs)
    }

    pub fn report(&self, bundle: &DatasetBundle, dimension: Dimension) -> CohortReport {
        build_report(&self.context(bundle), dimension)
    }

    /// All six tables, in dimension order.
    pub fn reports(&self, bundle: &DatasetBundle) -> Vec<CohortReport> {
        let ctx = self.context(bundle);
        Dimension::ALL.iter().map(|&d| build_report(&ctx, d)).collect()
    }
}

/// Runs everything up to, but not including, the cohort tables.
pub fn analyze(bundle: &DatasetBundle) -> Analysis {
    let baseline = compute_baselines(&bundle.publications);
    let scoring = score_all(
        &bundle.researchers,
        &bundle.publications,
        &baseline,
        &bundle.taxonomy,
        &bundle.config,
    );
    let ranking = rank_all(&bundle.researchers, &scoring.cards, &bundle.config);
    let detection = detect(&bundle.researchers, &bundle.config);
    Analysis { baseline, scoring, ranking, detection }
}
