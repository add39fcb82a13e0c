//! Balanced selection of the subset of comments that goes to human labeling.
//!
//! The corpus is partitioned into the 2 x 3 x 3 cells of the protagonist
//! taxonomy (gender x number of protagonists x context). Per-cell quotas are
//! fitted to the target marginals by iterative proportional fitting, capped by
//! what each cell actually holds; whatever the caps leave unfilled is then
//! taken greedily from the cells that hurt the marginals least. Comments are
//! drawn inside each cell by a seeded shuffle of the id-ordered cell, so the
//! chosen set depends only on the corpus contents and the seed.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stats::{stats_for, CorpusStats, Facet};
use super::{Comment, Corpus, CorpusError, Gender, ProtagonistCount, SourceContext};

const IPF_ITERATIONS: usize = 200;
const SPLIT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingTargets {
    pub sample_fraction: f64,
    pub gender_split: BTreeMap<Gender, f64>,
    pub count_split: BTreeMap<ProtagonistCount, f64>,
    pub context_split: BTreeMap<SourceContext, f64>,
    /// Allowed deviation from each target, in percentage points.
    pub tolerance_pp: f64,
}

fn uniform<K: Ord + Copy>(all: &[K]) -> BTreeMap<K, f64> {
    all.iter().map(|&k| (k, 1.0 / all.len() as f64)).collect()
}

impl Default for SamplingTargets {
    fn default() -> Self {
        SamplingTargets {
            sample_fraction: 0.05,
            gender_split: uniform(Gender::ALL),
            count_split: uniform(ProtagonistCount::ALL),
            context_split: uniform(SourceContext::ALL),
            tolerance_pp: 5.0,
        }
    }
}

fn check_split<K: Ord + Copy>(name: &str, all: &[K], split: &BTreeMap<K, f64>) -> Result<(), CorpusError> {
    if split.values().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(CorpusError::InvalidTargets(format!("{name} has a target outside [0, 1]")));
    }
    let sum: f64 = all.iter().map(|k| split.get(k).copied().unwrap_or(0.0)).sum();
    if (sum - 1.0).abs() > SPLIT_SUM_TOLERANCE {
        return Err(CorpusError::InvalidTargets(format!("{name} targets sum to {sum}, expected 1")));
    }
    Ok(())
}

impl SamplingTargets {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(CorpusError::InvalidTargets(format!(
                "sample_fraction {} outside (0, 1]",
                self.sample_fraction
            )));
        }
        if !(self.tolerance_pp >= 0.0) {
            return Err(CorpusError::InvalidTargets("negative tolerance".into()));
        }
        check_split("gender_split", Gender::ALL, &self.gender_split)?;
        check_split("count_split", ProtagonistCount::ALL, &self.count_split)?;
        check_split("context_split", SourceContext::ALL, &self.context_split)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FacetDeviation {
    pub facet: &'static str,
    pub category: String,
    pub target: f64,
    pub achieved: f64,
}

impl FacetDeviation {
    pub fn deviation_pp(&self) -> f64 {
        (self.achieved - self.target).abs() * 100.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalancedSample {
    /// Chosen comments in id order.
    pub comments: Vec<Comment>,
    pub stats: CorpusStats,
    /// Facet categories whose achieved share misses the target by more than
    /// the tolerance. Empty when the sample is balanced.
    pub deviations: Vec<FacetDeviation>,
}

impl BalancedSample {
    pub fn is_balanced(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.comments.iter().map(|c| c.id.as_str()).collect()
    }
}

type Cell = (Gender, ProtagonistCount, SourceContext);

fn all_cells() -> Vec<Cell> {
    let mut cells = Vec::with_capacity(18);
    for &g in Gender::ALL {
        for &n in ProtagonistCount::ALL {
            for &c in SourceContext::ALL {
                cells.push((g, n, c));
            }
        }
    }
    cells
}

/// Marginal targets expressed as comment counts, one entry per facet
/// category, with a selector telling which cells belong to it.
struct Marginal {
    member: Box<dyn Fn(&Cell) -> bool>,
    target: f64,
}

fn marginals(targets: &SamplingTargets, n: f64) -> Vec<Vec<Marginal>> {
    let gender = Gender::ALL
        .iter()
        .map(|&g| Marginal { member: Box::new(move |c: &Cell| c.0 == g), target: n * targets.gender_split[&g] })
        .collect();
    let count = ProtagonistCount::ALL
        .iter()
        .map(|&p| Marginal { member: Box::new(move |c: &Cell| c.1 == p), target: n * targets.count_split[&p] })
        .collect();
    let context = SourceContext::ALL
        .iter()
        .map(|&x| Marginal { member: Box::new(move |c: &Cell| c.2 == x), target: n * targets.context_split[&x] })
        .collect();
    vec![gender, count, context]
}

/// Fits real-valued quotas to the marginals, never exceeding availability.
fn fit_quotas(cells: &[Cell], avail: &[usize], facets: &[Vec<Marginal>]) -> Vec<f64> {
    let mut q: Vec<f64> = avail.iter().map(|&a| if a > 0 { 1.0 } else { 0.0 }).collect();
    for _ in 0..IPF_ITERATIONS {
        for facet in facets {
            for m in facet {
                let sum: f64 = cells.iter().zip(&q).filter(|(c, _)| (m.member)(c)).map(|(_, v)| v).sum();
                if sum <= 0.0 {
                    continue;
                }
                let factor = m.target / sum;
                for (i, cell) in cells.iter().enumerate() {
                    if (m.member)(cell) {
                        q[i] = (q[i] * factor).min(avail[i] as f64);
                    }
                }
            }
        }
    }
    q
}

fn squared_error(cells: &[Cell], quotas: &[usize], facets: &[Vec<Marginal>]) -> f64 {
    facets
        .iter()
        .flatten()
        .map(|m| {
            let got: usize = cells.iter().zip(quotas).filter(|(c, _)| (m.member)(c)).map(|(_, q)| q).sum();
            (got as f64 - m.target).powi(2)
        })
        .sum()
}

fn integer_quotas(cells: &[Cell], avail: &[usize], facets: &[Vec<Marginal>], n: usize) -> Vec<usize> {
    let real = fit_quotas(cells, avail, facets);
    let mut quotas: Vec<usize> = real.iter().map(|v| v.floor() as usize).collect();

    // Largest remainders first, up to the fitted total.
    let fitted_total = (real.iter().sum::<f64>().round() as usize).min(n);
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = real[a] - real[a].floor();
        let fb = real[b] - real[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in &order {
        if quotas.iter().sum::<usize>() >= fitted_total {
            break;
        }
        if quotas[i] < avail[i] && real[i] > real[i].floor() {
            quotas[i] += 1;
        }
    }

    // Shortfall: add one comment at a time where it disturbs the marginals least.
    while quotas.iter().sum::<usize>() < n {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..cells.len() {
            if quotas[i] >= avail[i] {
                continue;
            }
            quotas[i] += 1;
            let err = squared_error(cells, &quotas, facets);
            quotas[i] -= 1;
            if best.is_none_or(|(e, _)| err < e) {
                best = Some((err, i));
            }
        }
        match best {
            Some((_, i)) => quotas[i] += 1,
            None => break,
        }
    }
    quotas
}

fn deviations_of<K: Ord + Copy + ToString>(
    facet: &'static str,
    achieved: &Facet<K>,
    targets: &BTreeMap<K, f64>,
    tolerance_pp: f64,
    out: &mut Vec<FacetDeviation>,
) {
    for (k, entry) in achieved {
        let target = targets.get(k).copied().unwrap_or(0.0);
        let d = FacetDeviation { facet, category: k.to_string(), target, achieved: entry.proportion };
        if d.deviation_pp() > tolerance_pp + 1e-9 {
            out.push(d);
        }
    }
}

/// Draws round(sample_fraction x |corpus|) comments, balancing the protagonist
/// taxonomy toward `targets`.
///
/// When the corpus cannot satisfy the targets the best-effort sample is still
/// returned, with the offending facet categories listed in `deviations`.
pub fn select_balanced_sample(
    corpus: &Corpus,
    targets: &SamplingTargets,
    seed: u64,
) -> Result<BalancedSample, CorpusError> {
    targets.validate()?;
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = (targets.sample_fraction * corpus.len() as f64).round() as usize;
    if n == 0 {
        return Err(CorpusError::EmptySample);
    }

    let cells = all_cells();
    let mut members: Vec<Vec<&Comment>> = vec![Vec::new(); cells.len()];
    for comment in corpus.comments() {
        let Some(source) = corpus.source(&comment.source_id) else { continue };
        let key = (source.protagonist_gender, source.protagonist_count, source.context);
        let idx = cells.iter().position(|c| *c == key).expect("every taxonomy cell is enumerated");
        members[idx].push(comment);
    }
    let avail: Vec<usize> = members.iter().map(Vec::len).collect();
    let facets = marginals(targets, n as f64);
    let quotas = integer_quotas(&cells, &avail, &facets, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<Comment> = Vec::with_capacity(n);
    for (cell_members, &quota) in members.iter_mut().zip(&quotas) {
        cell_members.shuffle(&mut rng);
        chosen.extend(cell_members.iter().take(quota).map(|&c| c.clone()));
    }
    chosen.sort_by(|a, b| a.id.cmp(&b.id));

    let stats = stats_for(corpus, chosen.iter());
    let mut deviations = Vec::new();
    deviations_of("protagonist_gender", &stats.protagonist_gender, &targets.gender_split, targets.tolerance_pp, &mut deviations);
    deviations_of("protagonist_count", &stats.protagonist_count, &targets.count_split, targets.tolerance_pp, &mut deviations);
    deviations_of("context", &stats.context, &targets.context_split, targets.tolerance_pp, &mut deviations);

    Ok(BalancedSample { comments: chosen, stats, deviations })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use chrono::DateTime;
    use proptest::prelude::*;

    use super::*;
    use crate::corpus::{CommentRecord, ContentSource, MediaKind};

    /// One source per taxonomy cell, `per_cell[i]` comments each.
    fn corpus_with(per_cell: &[usize]) -> Corpus {
        let mut corpus = Corpus::new();
        for (i, (cell, &n)) in all_cells().iter().zip(per_cell).enumerate() {
            let id = format!("T{i}");
            corpus
                .add_source(ContentSource {
                    id: id.clone(),
                    url: String::new(),
                    media_kind: MediaKind::Microblog,
                    protagonist_gender: cell.0,
                    protagonist_count: cell.1,
                    context: cell.2,
                })
                .unwrap();
            let records = (0..n).map(|j| CommentRecord {
                id: format!("{id}-{j:05}"),
                text: "texto".into(),
                fetched_at: DateTime::UNIX_EPOCH,
            });
            corpus.ingest_comments(&id, records).unwrap();
        }
        corpus
    }

    fn facet_share<K: Ord>(facet: &Facet<K>, k: &K) -> f64 {
        facet[k].proportion
    }

    #[test]
    fn balanced_corpus_gives_balanced_sample() {
        // 2000 comments spread as evenly as possible over the 18 cells.
        let per_cell: Vec<usize> = (0..18).map(|i| if i < 2000 % 18 { 2000 / 18 + 1 } else { 2000 / 18 }).collect();
        let corpus = corpus_with(&per_cell);
        assert_eq!(corpus.len(), 2000);
        let sample = select_balanced_sample(&corpus, &SamplingTargets::default(), 7).unwrap();
        assert_eq!(sample.comments.len(), 100);
        // Independent check of the facet shares from the returned comments.
        let mut female = 0;
        let mut by_count = BTreeMap::new();
        let mut by_context = BTreeMap::new();
        for c in &sample.comments {
            let s = corpus.source(&c.source_id).unwrap();
            if s.protagonist_gender == Gender::Female {
                female += 1;
            }
            *by_count.entry(s.protagonist_count).or_insert(0) += 1;
            *by_context.entry(s.context).or_insert(0) += 1;
        }
        assert!((female as f64 / 100.0 - 0.5).abs() <= 0.05);
        for v in by_count.values().chain(by_context.values()) {
            assert!((*v as f64 / 100.0 - 1.0 / 3.0).abs() <= 0.05, "{v}");
        }
        assert!(sample.is_balanced(), "{:?}", sample.deviations);
    }

    #[test]
    fn skewed_corpus_is_rebalanced() {
        // Plenty of everything, but female/individual/personal dominates.
        let mut per_cell = vec![40; 18];
        per_cell[9 * 1 + 0] = 3000;
        let corpus = corpus_with(&per_cell);
        let sample = select_balanced_sample(&corpus, &SamplingTargets::default(), 1).unwrap();
        assert!(sample.is_balanced(), "{:?}", sample.deviations);
        assert!((facet_share(&sample.stats.protagonist_gender, &Gender::Female) - 0.5).abs() <= 0.05);
    }

    #[test]
    fn male_only_corpus_reports_gender_deviation() {
        let per_cell: Vec<usize> = (0..18).map(|i| if i < 9 { 100 } else { 0 }).collect();
        let corpus = corpus_with(&per_cell);
        assert!(all_cells()[..9].iter().all(|c| c.0 == Gender::Male));
        let sample = select_balanced_sample(&corpus, &SamplingTargets::default(), 3).unwrap();
        assert_eq!(sample.comments.len(), 45);
        assert!(!sample.is_balanced());
        let gender: Vec<_> = sample.deviations.iter().filter(|d| d.facet == "protagonist_gender").collect();
        assert_eq!(gender.len(), 2);
        let male = gender.iter().find(|d| d.category == "male").unwrap();
        assert_eq!(male.achieved, 1.0);
        let female = gender.iter().find(|d| d.category == "female").unwrap();
        assert_eq!(female.achieved, 0.0);
    }

    #[test]
    fn same_seed_same_sample() {
        let corpus = corpus_with(&[37; 18]);
        let a = select_balanced_sample(&corpus, &SamplingTargets::default(), 11).unwrap();
        let b = select_balanced_sample(&corpus, &SamplingTargets::default(), 11).unwrap();
        assert_eq!(a.ids(), b.ids());
        let c = select_balanced_sample(&corpus, &SamplingTargets::default(), 12).unwrap();
        assert_ne!(a.ids(), c.ids());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            select_balanced_sample(&Corpus::new(), &SamplingTargets::default(), 0),
            Err(CorpusError::EmptyCorpus)
        ));
        let corpus = corpus_with(&[1; 18]);
        // 0.01 x 18 rounds to 0.
        let targets = SamplingTargets { sample_fraction: 0.01, ..Default::default() };
        assert!(matches!(select_balanced_sample(&corpus, &targets, 0), Err(CorpusError::EmptySample)));
        let targets = SamplingTargets { sample_fraction: 0.0, ..Default::default() };
        assert!(matches!(select_balanced_sample(&corpus, &targets, 0), Err(CorpusError::InvalidTargets(_))));
        let mut targets = SamplingTargets::default();
        targets.gender_split.insert(Gender::Male, 0.7);
        assert!(matches!(select_balanced_sample(&corpus, &targets, 0), Err(CorpusError::InvalidTargets(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sample_is_a_deterministic_subset(
            per_cell in proptest::collection::vec(0usize..40, 18),
            fraction in 0.05f64..1.0,
            seed in any::<u64>(),
        ) {
            let corpus = corpus_with(&per_cell);
            prop_assume!(!corpus.is_empty());
            let targets = SamplingTargets { sample_fraction: fraction, ..Default::default() };
            let expected = (fraction * corpus.len() as f64).round() as usize;
            prop_assume!(expected > 0);
            let sample = select_balanced_sample(&corpus, &targets, seed).unwrap();
            prop_assert_eq!(sample.comments.len(), expected);
            let ids: HashSet<&str> = sample.ids().into_iter().collect();
            prop_assert_eq!(ids.len(), expected);
            prop_assert!(ids.iter().all(|id| corpus.comment(id).is_some()));
            let again = select_balanced_sample(&corpus, &targets, seed).unwrap();
            prop_assert_eq!(sample.ids(), again.ids());
        }
    }
}
