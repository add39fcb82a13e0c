//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status when any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use antisexism_core::alerting::{color_agreement, colorize, AlertThresholds, Color, SourceAlert};
use antisexism_core::annotation::{
    export_training_set, labeling_report, resolve_votes, AnnotationBook, AnnotationVote, LabelCategory,
    TrainingExample,
};
use antisexism_core::classifier::{
    fine_tune_baseline, predict, stratified_split, ClassWeightMode, ClassifierConfig, DataSplit, TextClassifier,
};
use antisexism_core::corpus::{CommentRecord, Corpus, Gender};
use antisexism_core::evaluation::{compute_metrics, evaluate, ConfusionCounts};
use antisexism_core::{jsonl, Label};
use antisexism_service::app::{App, BulkComment, BulkRequest};
use antisexism_service::cli::{run, Cli};
use antisexism_service::models;
use axum::http::StatusCode;
use clap::Parser;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const GOLDEN_TIME_LIMIT: Duration = Duration::from_secs(1);
const AGREEMENT_TARGET: f64 = 0.846;
const AGREEMENT_TOLERANCE: f64 = 0.001;
const METRIC_INSTANCES: usize = 1000;
const METRIC_MAX_N: usize = 50;
const MACRO_TOLERANCE: f64 = 1e-12;
const OVERFIT_MIN_ACCURACY: f64 = 0.95;
const OVERFIT_TIME_LIMIT: Duration = Duration::from_secs(5);
const PERCENT_TOLERANCE: f64 = 0.005;

/// One row of the published per-source alert table: the percentages and
/// colors as printed, plus comment counts that reproduce both percentages.
struct Row {
    id: &'static str,
    n: usize,
    manual_count: usize,
    predicted_count: usize,
    manual_pct: f64,
    manual_color: Color,
    predicted_pct: f64,
    predicted_color: Color,
}

#[allow(clippy::too_many_arguments)]
const fn row(
    id: &'static str,
    n: usize,
    manual_count: usize,
    predicted_count: usize,
    manual_pct: f64,
    manual_color: Color,
    predicted_pct: f64,
    predicted_color: Color,
) -> Row {
    Row { id, n, manual_count, predicted_count, manual_pct, manual_color, predicted_pct, predicted_color }
}

use Color::{Green as G, Red as R, Yellow as Y};

const TABLE: [Row; 13] = [
    row("E17", 130, 0, 1, 0.00, G, 0.77, G),
    row("E2", 101, 3, 2, 2.97, Y, 1.98, G),
    row("E3", 188, 2, 5, 1.06, G, 2.66, G),
    row("E5", 136, 59, 56, 43.38, R, 41.18, R),
    row("E7", 147, 0, 2, 0.00, G, 1.36, G),
    row("M1", 128, 11, 9, 8.59, R, 7.03, R),
    row("T10", 104, 7, 5, 6.73, R, 4.81, Y),
    row("T13", 100, 0, 0, 0.00, G, 0.00, G),
    row("T17", 103, 2, 1, 1.94, G, 0.97, G),
    row("T19", 100, 0, 0, 0.00, G, 0.00, G),
    row("Y5", 303, 64, 58, 21.12, R, 19.14, R),
    row("Y7", 113, 0, 2, 0.00, G, 1.77, G),
    row("Y9", 100, 0, 0, 0.00, G, 0.00, G),
];

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ids(v: impl IntoIterator<Item = impl Into<String>>) -> BTreeSet<String> {
    v.into_iter().map(Into::into).collect()
}

fn within_time(started: Instant, limit: Duration) -> Result<(), String> {
    let took = started.elapsed();
    ensure(took < limit, || format!("took {took:?}, limit {limit:?}"))
}

fn manual_colors() -> Outcome {
    let started = Instant::now();
    let t = AlertThresholds::default();
    let mut wrong = Vec::new();
    for r in &TABLE {
        let c = colorize(r.manual_pct / 100.0, &t).map_err(|e| e.to_string())?;
        if c != r.manual_color {
            wrong.push(format!("{} {} vs {}", r.id, c, r.manual_color));
        }
    }
    within_time(started, GOLDEN_TIME_LIMIT)?;
    ensure(wrong.is_empty(), || format!("mismatches: {}", wrong.join(", ")))?;
    Ok(format!("13/13 in {:?}", started.elapsed()))
}

fn predicted_colors() -> Outcome {
    let started = Instant::now();
    let t = AlertThresholds::default();
    let mut wrong = BTreeSet::new();
    for r in &TABLE {
        if colorize(r.predicted_pct / 100.0, &t).map_err(|e| e.to_string())? != r.predicted_color {
            wrong.insert(r.id.to_string());
        }
    }
    within_time(started, GOLDEN_TIME_LIMIT)?;
    ensure(wrong == ids(["E3"]), || format!("mismatch set {wrong:?}, expected {{E3}}"))?;
    Ok(format!("{}/13, sole exception E3 (2.66% is yellow under the rule, printed green)", 13 - wrong.len()))
}

fn agreement_score() -> Outcome {
    let started = Instant::now();
    let manual: BTreeMap<String, Color> = TABLE.iter().map(|r| (r.id.to_string(), r.manual_color)).collect();
    let predicted: BTreeMap<String, Color> = TABLE.iter().map(|r| (r.id.to_string(), r.predicted_color)).collect();
    let a = color_agreement(&manual, &predicted).map_err(|e| e.to_string())?;
    within_time(started, GOLDEN_TIME_LIMIT)?;
    ensure((a.fraction - AGREEMENT_TARGET).abs() <= AGREEMENT_TOLERANCE, || format!("fraction {}", a.fraction))?;
    ensure(a.matches == 11 && a.total == 13, || format!("{}/{}", a.matches, a.total))?;
    let mismatched = ids(a.mismatches.iter().map(|m| m.source_id.clone()));
    ensure(mismatched == ids(["E2", "T10"]), || format!("mismatch set {mismatched:?}"))?;
    ensure(a.severe_mismatches.is_empty(), || format!("severe: {:?}", a.severe_mismatches))?;
    Ok(format!("{}/{} = {:.4}, mismatches {{E2, T10}}, no green/red confusion", a.matches, a.total, a.fraction))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Value of `num / den` for a reduced fraction, 0 for an empty denominator.
fn rational(num: u64, den: u64) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let g = gcd(num, den).max(1);
    (num / g) as f64 / (den / g) as f64
}

/// Precision, recall and F1 of one class from its own tally. F1 is the
/// harmonic mean of the two rationals `tp/(tp+fp)` and `tp/(tp+fn)`.
fn oracle_class(tp: u64, fp: u64, fn_: u64) -> (f64, f64, f64) {
    let p = rational(tp, tp + fp);
    let r = rational(tp, tp + fn_);
    let f1 = if tp == 0 {
        0.0
    } else {
        let (pn, pd, rn, rd) = (tp, tp + fp, tp, tp + fn_);
        rational(2 * pn * rn, pn * rd + rn * pd)
    };
    (p, r, f1)
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for instance in 0..METRIC_INSTANCES {
        let n = rng.gen_range(1..=METRIC_MAX_N);
        let pick = |rng: &mut ChaCha8Rng| if rng.gen_bool(0.5) { Label::Sexist } else { Label::NotSexist };
        let preds: Vec<Label> = (0..n).map(|_| pick(&mut rng)).collect();
        let golds: Vec<Label> = (0..n).map(|_| pick(&mut rng)).collect();
        let mut tally = [[0u64; 2]; 2];
        for (p, g) in preds.iter().zip(&golds) {
            tally[(*g == Label::NotSexist) as usize][(*p == Label::NotSexist) as usize] += 1;
        }
        let (tp, fn_, fp, tn) = (tally[0][0], tally[0][1], tally[1][0], tally[1][1]);
        let m = evaluate(&preds, &golds).map_err(|e| e.to_string())?;
        let c = m.counts;
        let fail = |what: &str| format!("instance {instance} (n={n}): {what}");
        ensure((c.tp, c.fp, c.tn, c.fn_) == (tp as usize, fp as usize, tn as usize, fn_ as usize), || fail("counts"))?;
        ensure(m.accuracy == rational(tp + tn, n as u64), || fail("accuracy"))?;
        let s = oracle_class(tp, fp, fn_);
        let ns = oracle_class(tn, fn_, fp);
        for (name, got, want) in [
            ("sexist precision", m.sexist.precision, s.0),
            ("sexist recall", m.sexist.recall, s.1),
            ("sexist f1", m.sexist.f1, s.2),
            ("not_sexist precision", m.not_sexist.precision, ns.0),
            ("not_sexist recall", m.not_sexist.recall, ns.1),
            ("not_sexist f1", m.not_sexist.f1, ns.2),
        ] {
            ensure(got.to_bits() == want.to_bits(), || fail(&format!("{name} {got} vs {want}")))?;
        }
        for (name, got, want) in [
            ("macro precision", m.macro_avg.precision, (s.0 + ns.0) / 2.0),
            ("macro recall", m.macro_avg.recall, (s.1 + ns.1) / 2.0),
            ("macro f1", m.macro_avg.f1, (s.2 + ns.2) / 2.0),
        ] {
            ensure((got - want).abs() <= MACRO_TOLERANCE, || fail(&format!("{name} {got} vs {want}")))?;
        }
    }

    let fixture = compute_metrics(&ConfusionCounts { tp: 3, fp: 1, tn: 3, fn_: 1 });
    let row_values = [
        fixture.not_sexist.precision,
        fixture.not_sexist.recall,
        fixture.not_sexist.f1,
        fixture.sexist.precision,
        fixture.sexist.recall,
        fixture.sexist.f1,
        fixture.macro_avg.precision,
        fixture.macro_avg.recall,
        fixture.macro_avg.f1,
    ];
    let printed: Vec<String> = row_values.iter().map(|v| format!("{v:.2}")).collect();
    ensure(printed.iter().all(|p| p == "0.75"), || format!("balanced fixture printed {printed:?}"))?;
    Ok(format!("{METRIC_INSTANCES} random instances exact; P=R=0.75 fixture prints 0.75 in all nine cells"))
}

const ANNOTATORS: [&str; 4] = ["a1", "a2", "a3", "a4"];

fn vote(comment: &str, annotator: &str, category: LabelCategory) -> AnnotationVote {
    AnnotationVote {
        comment_id: comment.into(),
        annotator_id: annotator.into(),
        category,
        cast_at: chrono::DateTime::UNIX_EPOCH,
        reason: None,
    }
}

fn count_pipeline() -> Outcome {
    use LabelCategory::{DependsOnContext as D, Discard as X, No as N, Yes as Yv};
    const TOTAL: usize = 4389;
    const YES: usize = 700;
    const NO: usize = 3094;
    const CONTEXT: usize = 372;
    const DISCARD: usize = 223;
    let mut corpus = Corpus::new();
    let sources = ["E1", "M1", "T1", "Y1"];
    for (i, id) in sources.iter().enumerate() {
        let gender = if i % 2 == 0 { Gender::Female } else { Gender::Male };
        corpus.add_source(common::source(id, gender)).map_err(|e| e.to_string())?;
    }
    let mut panels: Vec<[LabelCategory; 4]> = Vec::with_capacity(TOTAL);
    panels.extend(std::iter::repeat_n([Yv; 4], YES));
    panels.extend(std::iter::repeat_n([N; 4], NO));
    panels.extend((0..CONTEXT).map(|i| if i % 2 == 0 { [Yv, N, Yv, N] } else { [N, X, X, N] }));
    panels.extend((0..DISCARD).map(|i| if i % 2 == 0 { [X; 4] } else { [X, X, X, N] }));
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    panels.shuffle(&mut rng);

    let mut book = AnnotationBook::new(4).map_err(|e| e.to_string())?;
    for a in ANNOTATORS {
        book.register_annotator(a);
    }
    for (i, panel) in panels.iter().enumerate() {
        let id = format!("c{i:05}");
        let source = sources[i % sources.len()];
        let text = format!("comentario {i}");
        corpus
            .ingest_comments(source, [CommentRecord { id: id.clone(), text, fetched_at: chrono::DateTime::UNIX_EPOCH }])
            .map_err(|e| e.to_string())?;
        book.register_comment(id.clone());
        for (a, c) in ANNOTATORS.iter().zip(panel) {
            book.record_vote(vote(&id, a, *c)).map_err(|e| e.to_string())?;
        }
        book.resolve_label(&id).map_err(|e| e.to_string())?;
    }
    ensure(corpus.len() == TOTAL, || format!("corpus holds {}", corpus.len()))?;

    let report = labeling_report(book.final_labels(), &corpus);
    let pct = |c: LabelCategory| report.overall.get(&c).map_or(0.0, |e| e.proportion * 100.0);
    let yes_no = pct(Yv) + pct(N);
    for (name, got, want) in [("yes/no", yes_no, 86.44), ("context", pct(D), 8.48), ("discard", pct(X), 5.08)] {
        ensure((got - want).abs() < PERCENT_TOLERANCE, || format!("{name} share {got:.4}% vs {want}%"))?;
    }

    let export = export_training_set(book.final_labels(), &corpus).map_err(|e| e.to_string())?;
    ensure(export.len() == 3794, || format!("exported {}", export.len()))?;
    let split = stratified_split(&export, 0.8, 42).map_err(|e| e.to_string())?;
    ensure(split.train.len() == 3035 && split.test.len() == 759, || {
        format!("split {}/{}", split.train.len(), split.test.len())
    })?;
    let all = DataSplit::class_counts(&export);
    let train = DataSplit::class_counts(&split.train);
    for label in Label::ALL {
        let exact = 0.8 * all[&label] as f64;
        let got = train[&label] as f64;
        ensure((got - exact).abs() <= 1.0, || format!("{label}: {got} train vs {exact}"))?;
    }
    Ok(format!(
        "{TOTAL} comments -> {yes_no:.2}/{:.2}/{:.2}%, export {}, split {}/{}",
        pct(D),
        pct(X),
        export.len(),
        split.train.len(),
        split.test.len()
    ))
}

/// Direct counting: a category with at least three of four votes wins,
/// anything else depends on the context.
fn oracle_resolution(votes: &[LabelCategory; 4]) -> LabelCategory {
    for c in LabelCategory::ALL {
        if votes.iter().filter(|v| *v == c).count() >= 3 {
            return *c;
        }
    }
    LabelCategory::DependsOnContext
}

fn permutations(v: [LabelCategory; 4]) -> Vec<[LabelCategory; 4]> {
    let mut out = Vec::with_capacity(24);
    for a in 0..4 {
        for b in 0..4 {
            for c in 0..4 {
                for d in 0..4 {
                    if ids([a, b, c, d].map(|i| i.to_string())).len() == 4 {
                        out.push([v[a], v[b], v[c], v[d]]);
                    }
                }
            }
        }
    }
    out
}

fn vote_resolution() -> Outcome {
    let cats = LabelCategory::ALL;
    let mut book = AnnotationBook::new(4).map_err(|e| e.to_string())?;
    for a in ANNOTATORS {
        book.register_annotator(a);
    }
    let (mut combos, mut ties) = (0, 0);
    for code in 0..256usize {
        let votes: [LabelCategory; 4] = std::array::from_fn(|k| cats[(code >> (2 * k)) & 3]);
        let want = oracle_resolution(&votes);
        if votes.iter().all(|v| votes.iter().filter(|w| *w == v).count() < 3) {
            ties += 1;
        }
        let perms = permutations(votes);
        ensure(perms.len() == 24, || format!("{} orderings", perms.len()))?;
        for p in perms {
            let got = resolve_votes(p).category;
            ensure(got == want, || format!("{p:?} resolved to {got}, expected {want}"))?;
        }
        let id = format!("v{code:03}");
        book.register_comment(id.clone());
        for (a, c) in ANNOTATORS.iter().zip(votes) {
            book.record_vote(vote(&id, a, c)).map_err(|e| e.to_string())?;
        }
        let got = book.resolve_label(&id).map_err(|e| e.to_string())?.category;
        ensure(got == want, || format!("book resolved {votes:?} to {got}, expected {want}"))?;
        combos += 1;
    }
    Ok(format!("{combos} combinations x 24 orderings; {ties} without a strict majority resolve to depends_on_context"))
}

/// 10% positive corpus where the cue words are noisy: most positives carry
/// one, and so do a few negatives.
fn skewed_corpus(n: usize, seed: u64) -> Vec<TrainingExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let neutral: Vec<String> = (0..300).map(|i| format!("w{i}")).collect();
    let cues = ["cocina", "histerica", "florero"];
    (0..n)
        .map(|i| {
            let positive = i % 10 == 0;
            let mut words: Vec<String> = (0..8).map(|_| neutral.choose(&mut rng).unwrap().clone()).collect();
            if rng.gen_bool(if positive { 0.6 } else { 0.08 }) {
                words.push(cues.choose(&mut rng).unwrap().to_string());
            }
            words.shuffle(&mut rng);
            TrainingExample::new(words.join(" "), if positive { Label::Sexist } else { Label::NotSexist })
        })
        .collect()
}

fn minority_recall(split: &DataSplit, mode: ClassWeightMode) -> Result<f64, String> {
    let config = ClassifierConfig { class_weight_mode: mode, epochs: 3, seed: 11, ..Default::default() };
    let model = fine_tune_baseline(split, &config).map_err(|e| e.to_string())?;
    let mut preds = Vec::with_capacity(split.test.len());
    for e in &split.test {
        preds.push(predict(&model, &e.text).map_err(|e| e.to_string())?.label);
    }
    let golds: Vec<Label> = split.test.iter().map(|e| e.label).collect();
    Ok(evaluate(&preds, &golds).map_err(|e| e.to_string())?.sexist.recall)
}

fn class_weight_effect() -> Outcome {
    let split = stratified_split(&skewed_corpus(2000, 0), 0.8, 0).map_err(|e| e.to_string())?;
    let none = minority_recall(&split, ClassWeightMode::None)?;
    let weighted = minority_recall(&split, ClassWeightMode::InverseFrequency)?;
    ensure(weighted > none, || format!("inverse_frequency recall {weighted:.4} vs none {none:.4}"))?;
    Ok(format!("baseline minority recall {weighted:.4} (inverse_frequency) > {none:.4} (none)"))
}

fn overfit() -> Outcome {
    let examples: Vec<TrainingExample> = (0..50)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Sexist } else { Label::NotSexist };
            TrainingExample::new(format!("comentario numero {i} sobre el tema id{i}x"), label)
        })
        .collect();
    let split = DataSplit { train: examples.clone(), test: Vec::new(), ratio: 1.0, seed: 5 };
    let config = ClassifierConfig { epochs: 10, seed: 5, ..Default::default() };
    let started = Instant::now();
    let model = fine_tune_baseline(&split, &config).map_err(|e| e.to_string())?;
    let took = started.elapsed();
    let mut correct = 0;
    for e in &examples {
        if predict(&model, &e.text).map_err(|e| e.to_string())?.label == e.label {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / examples.len() as f64;
    ensure(accuracy >= OVERFIT_MIN_ACCURACY, || format!("train accuracy {accuracy}"))?;
    ensure(took <= OVERFIT_TIME_LIMIT, || format!("training took {took:?}"))?;
    let epochs = model.summary().epochs.len();
    ensure(epochs <= 10, || format!("{epochs} epochs"))?;
    Ok(format!("train accuracy {accuracy:.2} after {epochs} epochs in {took:?}"))
}

fn workspace_root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR")).parent().and_then(Path::parent).expect("workspace root")
}

fn find_files(dir: &Path, name: &str, out: &mut Vec<String>) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    for entry in entries.flatten() {
        let path = entry.path();
        let file = entry.file_name().to_string_lossy().to_string();
        if path.is_dir() {
            if file != "target" && !file.starts_with('.') && file != "node_modules" {
                find_files(&path, name, out);
            }
        } else if file == name {
            out.push(path.display().to_string());
        }
    }
}

fn oracle_color(count: usize, n: usize) -> Result<Color, String> {
    colorize(count as f64 / n as f64, &AlertThresholds::default()).map_err(|e| e.to_string())
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut full = vec!["antisexism"];
    full.extend_from_slice(args);
    run(Cli::try_parse_from(full).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn cli_table(dir: &Path) -> Result<(), String> {
    let registry = dir.join("registry.jsonl");
    let preds = dir.join("predictions.jsonl");
    let gold = dir.join("gold.jsonl");
    let sources: Vec<_> = TABLE.iter().map(|r| common::source(r.id, Gender::Female)).collect();
    jsonl::write_file(&registry, &sources).map_err(|e| e.to_string())?;
    let mut pred_rows = Vec::new();
    let mut gold_rows = Vec::new();
    for r in &TABLE {
        for (count, printed) in [(r.manual_count, r.manual_pct), (r.predicted_count, r.predicted_pct)] {
            let pct = 100.0 * count as f64 / r.n as f64;
            ensure((pct - printed).abs() < PERCENT_TOLERANCE, || format!("{}: {count}/{} is {pct:.4}%, printed {printed}", r.id, r.n))?;
        }
        for i in 0..r.n {
            let id = format!("{}-{i:03}", r.id);
            let label = |k: usize| if i < k { "sexist" } else { "not_sexist" };
            pred_rows.push(serde_json::json!({
                "id": id, "source_id": r.id, "label": label(r.predicted_count), "score": 0.5
            }));
            gold_rows.push(serde_json::json!({ "id": id, "label": label(r.manual_count) }));
        }
    }
    jsonl::write_file(&preds, &pred_rows).map_err(|e| e.to_string())?;
    jsonl::write_file(&gold, &gold_rows).map_err(|e| e.to_string())?;
    let (r, p, g) = (registry.to_str().unwrap(), preds.to_str().unwrap(), gold.to_str().unwrap());
    let out = cli(&["alert", "--sources", r, "--predictions", p, "--gold", g, "--json"])?;
    let report: Value = serde_json::from_str(&out).map_err(|e| e.to_string())?;
    let rows = report["rows"].as_array().ok_or("no rows")?;
    ensure(rows.len() == TABLE.len(), || format!("{} rows", rows.len()))?;
    let mut manual_oracle = BTreeMap::new();
    let mut predicted_oracle = BTreeMap::new();
    for (got, r) in rows.iter().zip(&TABLE) {
        let m = oracle_color(r.manual_count, r.n)?;
        let p = oracle_color(r.predicted_count, r.n)?;
        manual_oracle.insert(r.id.to_string(), m);
        predicted_oracle.insert(r.id.to_string(), p);
        ensure(got["source_id"] == r.id, || format!("row order: {} vs {}", got["source_id"], r.id))?;
        ensure(got["manual"]["color"] == m.as_str(), || format!("{} manual {} vs {m}", r.id, got["manual"]["color"]))?;
        ensure(got["predicted"]["color"] == p.as_str(), || format!("{} predicted {} vs {p}", r.id, got["predicted"]["color"]))?;
        ensure(m == r.manual_color, || format!("{} manual oracle {m} vs printed {}", r.id, r.manual_color))?;
    }
    let oracle = color_agreement(&manual_oracle, &predicted_oracle).map_err(|e| e.to_string())?;
    let text = cli(&["alert", "--sources", r, "--predictions", p, "--gold", g])?;
    let line = format!("agreement: {}/{} ", oracle.matches, oracle.total);
    ensure(text.contains(&line), || format!("text report lacks `{line}`:\n{text}"))?;
    Ok(())
}

fn http_table(dir: &Path) -> Result<(), String> {
    let mut config = common::base_config(dir);
    config.classifier.baseline.lexicon = vec!["zqx".into()];
    let app = App::open(config.clone()).map_err(|e| e.to_string())?;
    let sources: Vec<_> = TABLE.iter().map(|r| common::source(r.id, Gender::Male)).collect();
    app.add_sources(sources).map_err(|e| e.to_string())?;
    for r in &TABLE {
        let comments = (0..r.n)
            .map(|i| BulkComment {
                id: format!("{}-{i:03}", r.id),
                text: if i < r.predicted_count { format!("comentario {i} zqx") } else { format!("comentario {i} normal") },
                fetched_at: Some(chrono::DateTime::UNIX_EPOCH),
            })
            .collect();
        app.bulk_ingest(BulkRequest { source_id: r.id.into(), comments }).map_err(|e| e.to_string())?;
    }
    let examples: Vec<TrainingExample> = (0..60)
        .map(|i| {
            if i % 2 == 0 {
                TrainingExample::new(format!("comentario {} zqx", 1000 + i), Label::Sexist)
            } else {
                TrainingExample::new(format!("comentario {} normal", 1000 + i), Label::NotSexist)
            }
        })
        .collect();
    let trained: Box<dyn TextClassifier> =
        models::train(&examples, 0.8, &config.classifier, true).map_err(|e| e.to_string())?;
    let loaded = models::store_model(&dir.join("models"), trained.as_ref()).map_err(|e| e.to_string())?;
    app.set_model(Some(loaded));
    let app = Arc::new(app);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let (status, body) = runtime.block_on(common::call(&app, "GET", "/alerts", None, None));
    ensure(status == StatusCode::OK, || format!("/alerts answered {status}: {body}"))?;
    let alerts: Vec<SourceAlert> = serde_json::from_value(body).map_err(|e| e.to_string())?;
    let by_id: BTreeMap<&str, &SourceAlert> = alerts.iter().map(|a| (a.source_id.as_str(), a)).collect();
    ensure(by_id.len() == TABLE.len(), || format!("{} alerts", by_id.len()))?;
    for r in &TABLE {
        let a = by_id.get(r.id).ok_or_else(|| format!("no alert for {}", r.id))?;
        ensure(a.n_comments == r.n && a.sexist_count == r.predicted_count, || {
            format!("{}: classifier flagged {}/{}, fixture has {}/{}", r.id, a.sexist_count, a.n_comments, r.predicted_count, r.n)
        })?;
        let want = oracle_color(r.predicted_count, r.n)?;
        ensure(a.color.color() == Some(want), || format!("{}: {} vs {want}", r.id, a.color))?;
    }
    Ok(())
}

fn no_secondary_component() -> Outcome {
    let root = workspace_root();
    let mut found = Vec::new();
    find_files(root, "package.json", &mut found);
    ensure(found.is_empty(), || format!("front-end manifests present: {found:?}"))?;
    let crates: Vec<String> = std::fs::read_dir(root.join("crates"))
        .map_err(|e| e.to_string())?
        .flatten()
        .map(|e| e.file_name().to_string_lossy().to_string())
        .collect();
    let ui: Vec<&String> = crates.iter().filter(|c| c.contains("web") || c.contains("ui") || c.contains("dashboard")).collect();
    ensure(ui.is_empty(), || format!("front-end crates present: {ui:?}"))?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cli_dir = tmp.path().join("cli");
    std::fs::create_dir_all(&cli_dir).map_err(|e| e.to_string())?;
    cli_table(&cli_dir).map_err(|e| format!("cli: {e}"))?;
    http_table(&tmp.path().join("http")).map_err(|e| format!("http: {e}"))?;
    Ok(format!("crates {crates:?}; 13-source table reproduced through the CLI and GET /alerts"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("traffic light, manual column", manual_colors),
        ("traffic light, predicted column", predicted_colors),
        ("agreement score", agreement_score),
        ("metrics oracle", metrics_oracle),
        ("label pipeline counts", count_pipeline),
        ("vote resolution", vote_resolution),
        ("class weight effect", class_weight_effect),
        ("overfit sanity", overfit),
        ("cli and http only", no_secondary_component),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
