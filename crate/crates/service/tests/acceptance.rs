//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Exits nonzero when a criterion fails that is not listed in
//! `KNOWN_FAILURES`, or when a listed one starts passing.

use std::collections::HashMap;
use std::process::Command;
use std::time::{Duration, Instant};

use casebrief_core::classifier::{train, Backend, BaselineModel, Classifier, ClassifierError, ModelArtifact, TrainConfig};
use casebrief_core::corpus::{CaseBrief, Corpus, Ingestor, RawBrief, Sentence, Span, SplitName, SplitRatios};
use casebrief_core::evalharness::{baseline_report, classification_report, model_report, warning_report};
use casebrief_core::session::{
    AnnotationStatus, FeedbackKind, GatingTable, Operation, ProficiencyLevel, Resolution, Session, SessionContext,
    SessionError, WorkedExample, WorkedItem,
};
use casebrief_core::synth::{generate, SynthConfig};
use casebrief_core::warnings::{rates, sweep_pairs, WarningTable, WarningThreshold};
use casebrief_core::{LabelDistribution, SectionLabel, NUM_LABELS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

/// Criteria that cannot pass as stated, with the reason.
const KNOWN_FAILURES: &[(&str, &str)] = &[(
    "metric-oracle",
    "the stated 4-sentence example sums to (2*(2/3) + 2/3 + 1)/4 = 0.75, not 0.8333",
)];

fn main() {
    let checks: [(&str, Check); 7] = [
        ("table1-arithmetic", table1_arithmetic),
        ("warning-sweep-structure", warning_sweep_structure),
        ("synthetic-end-to-end", synthetic_end_to_end),
        ("baseline-property", baseline_property),
        ("metric-oracle", metric_oracle),
        ("determinism", determinism),
        ("session-gating", session_gating),
    ];
    let mut unexpected = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        let known = KNOWN_FAILURES.iter().find(|k| k.0 == name);
        match (&result, known) {
            (Ok(detail), None) => println!("PASS  {name}  {detail}  [{secs:.2}s]"),
            (Err(detail), Some((_, why))) => println!("FAIL  {name}  {detail}  [{secs:.2}s]  (known: {why})"),
            (Err(detail), None) => {
                println!("FAIL  {name}  {detail}  [{secs:.2}s]");
                unexpected.push(name);
            }
            (Ok(detail), Some(_)) => {
                println!("PASS  {name}  {detail}  [{secs:.2}s]  (listed as a known failure; update the list)");
                unexpected.push(name);
            }
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected results: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within_budget(start: Instant, budget: Duration) -> Result<(), String> {
    let elapsed = start.elapsed();
    ensure(elapsed < budget, || format!("took {:.2}s, budget {:.0}s", elapsed.as_secs_f64(), budget.as_secs_f64()))
}

fn sentence(i: usize, label: SectionLabel, text: String) -> Sentence {
    Sentence { sent_id: format!("a-{i:04}"), doc_id: "a".into(), label, text, section: 0, char_span: Span::new(0, 1) }
}

fn label(i: usize) -> SectionLabel {
    SectionLabel::ALL[i]
}

fn table1_arithmetic() -> Result<String, String> {
    let start = Instant::now();
    let rows = [((5952, 122, 1248, 1318), 2.0, 48.6), ((6282, 169, 918, 1271), 2.6, 41.9), ((6549, 256, 651, 1184), 3.8, 35.5)];
    let mut got = Vec::new();
    for ((ww, wa, aw, aa), fp_want, fn_want) in rows {
        let r = rates(&WarningTable::new(ww, wa, aw, aa));
        let fp = 100.0 * r.fp_rate.ok_or("fp rate undefined")?;
        let fnr = 100.0 * r.fn_rate.ok_or("fn rate undefined")?;
        ensure((fp - fp_want).abs() <= 0.1 && (fnr - fn_want).abs() <= 0.1, || {
            format!("({ww},{wa},{aw},{aa}): fp {fp:.2}% want {fp_want}%, fn {fnr:.2}% want {fn_want}%")
        })?;
        got.push(format!("{fp:.1}/{fnr:.1}"));
    }
    within_budget(start, Duration::from_secs(1))?;
    Ok(format!("fp/fn % = {}", got.join(", ")))
}

/// Returns preset distributions by sentence text.
struct Lookup(HashMap<String, LabelDistribution>);

impl Classifier for Lookup {
    fn predict_proba(&self, text: &str) -> Result<LabelDistribution, ClassifierError> {
        Ok(self.0[text])
    }
}

const WORDS: [&str; 12] = ["court", "held", "facts", "issue", "rule", "appeal", "whether", "because", "plaintiff", "statute", "reversed", "damages"];

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..8);
    (0..n).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn random_distribution(rng: &mut ChaCha8Rng) -> LabelDistribution {
    // Some draws sit exactly on a threshold to exercise the strict comparison.
    if rng.gen_bool(0.2) {
        let t = [0.05, 0.1, 0.2][rng.gen_range(0..3)];
        let mut p = [(1.0 - t) / 5.0; NUM_LABELS];
        p[rng.gen_range(0..NUM_LABELS)] = t;
        return LabelDistribution::new(p).unwrap();
    }
    let mut w = [0.0; NUM_LABELS];
    for x in &mut w {
        *x = rng.gen::<f64>().powi(3);
    }
    LabelDistribution::from_weights(w).unwrap_or_else(LabelDistribution::uniform)
}

fn brute_force(model: &dyn Classifier, test: &[Sentence], tau: f64) -> WarningTable {
    let mut t = WarningTable::new(0, 0, 0, 0);
    for s in test {
        let dist = model.predict_proba(&s.text).unwrap();
        for (i, p) in dist.probs().iter().enumerate() {
            let should_warn = label(i) != s.label;
            match (*p < tau, should_warn) {
                (true, true) => t.warn_when_should_warn += 1,
                (true, false) => t.warn_when_should_abstain += 1,
                (false, true) => t.abstain_when_should_warn += 1,
                (false, false) => t.abstain_when_should_abstain += 1,
            }
        }
    }
    t
}

fn warning_sweep_structure() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let taus = [0.05, 0.1, 0.2];
    let instances = 240;
    for case in 0..instances {
        let n = rng.gen_range(1..=20);
        let test: Vec<Sentence> =
            (0..n).map(|i| sentence(i, label(rng.gen_range(0..NUM_LABELS)), format!("{} {i}", random_text(&mut rng)))).collect();
        let model: Box<dyn Classifier> = match case % 3 {
            0 => Box::new(Lookup(test.iter().map(|s| (s.text.clone(), random_distribution(&mut rng))).collect())),
            1 => {
                let m = rng.gen_range(1..=20);
                let train_set: Vec<Sentence> =
                    (0..m).map(|i| sentence(i, label(rng.gen_range(0..NUM_LABELS)), random_text(&mut rng))).collect();
                let config = TrainConfig { epochs: 2, seed: case as u64, ..TrainConfig::new(Backend::Linear) };
                Box::new(train(&train_set, &[], &config).map_err(|e| e.to_string())?)
            }
            _ => {
                let m = rng.gen_range(1..=20);
                let train_set: Vec<Sentence> =
                    (0..m).map(|i| sentence(i, label(rng.gen_range(0..NUM_LABELS)), random_text(&mut rng))).collect();
                Box::new(ModelArtifact::from_baseline(BaselineModel::fit(&train_set)))
            }
        };
        let mut prev_warn = 0;
        for tau in taus {
            let got = sweep_pairs(&model.as_ref(), &test, WarningThreshold::new(tau).unwrap()).map_err(|e| e.to_string())?;
            let want = brute_force(model.as_ref(), &test, tau);
            ensure(got == want, || format!("instance {case}, tau {tau}: {got:?} != {want:?}"))?;
            ensure(got.should_warn_total() == 5 * n as u64 && got.should_abstain_total() == n as u64, || {
                format!("instance {case}: column sums {} / {}", got.should_warn_total(), got.should_abstain_total())
            })?;
            ensure(got.warnings_issued() >= prev_warn, || format!("instance {case}: warn count fell at tau {tau}"))?;
            prev_warn = got.warnings_issued();
        }
    }
    within_budget(start, Duration::from_secs(30))?;
    Ok(format!("{instances} instances (lookup, linear, baseline) match brute force"))
}

type Parts = (Vec<Sentence>, Vec<Sentence>, Vec<Sentence>);

fn synthetic_split(noise: f64) -> Result<Parts, String> {
    let config = SynthConfig { docs: 600, noise, ..SynthConfig::default() };
    let ingestor = Ingestor::default();
    let briefs: Vec<CaseBrief> =
        generate(&config).iter().map(|b| ingestor.ingest(&b.raw)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    let corpus = Corpus::new(briefs).map_err(|e| e.to_string())?;
    let split = corpus.split(0, SplitRatios::default()).map_err(|e| e.to_string())?;
    Ok((
        corpus.sentences_in(&split, SplitName::Train),
        corpus.sentences_in(&split, SplitName::Validation),
        corpus.sentences_in(&split, SplitName::Test),
    ))
}

fn synthetic_end_to_end() -> Result<String, String> {
    let start = Instant::now();
    let linear = TrainConfig { epochs: 4, ..TrainConfig::new(Backend::Linear) };

    let (tr, va, te) = synthetic_split(0.0)?;
    let total = tr.len() + va.len() + te.len();
    ensure((4000..=6500).contains(&total), || format!("clean corpus has {total} sentences"))?;
    let model = train(&tr, &va, &linear).map_err(|e| e.to_string())?;
    let f1_clean = model_report(&model, &te).map_err(|e| e.to_string())?.weighted.f1;
    let sweep = warning_report(&model, &te, &[0.05]).map_err(|e| e.to_string())?;
    let fp = sweep.thresholds[0].rates.fp_rate.unwrap_or(0.0);
    ensure(f1_clean >= 0.95, || format!("noise 0: weighted F1 {f1_clean:.4} < 0.95"))?;
    ensure(fp <= 0.05, || format!("noise 0: fp rate {:.2}% > 5%", 100.0 * fp))?;

    let (tr, va, te) = synthetic_split(0.3)?;
    let model = train(&tr, &va, &linear).map_err(|e| e.to_string())?;
    let f1_noisy = model_report(&model, &te).map_err(|e| e.to_string())?.weighted.f1;
    let baseline = train(&tr, &va, &TrainConfig::new(Backend::Baseline)).map_err(|e| e.to_string())?;
    let f1_base = baseline_report(&baseline, &te, 0).map_err(|e| e.to_string())?.weighted.f1;
    ensure(f1_noisy - f1_base >= 0.25, || format!("noise 0.3: linear {f1_noisy:.4} vs baseline {f1_base:.4}"))?;

    within_budget(start, Duration::from_secs(180))?;
    Ok(format!(
        "{total} sentences; noise 0: F1 {f1_clean:.4}, fp@0.05 {:.2}%; noise 0.3: F1 {f1_noisy:.4} vs baseline {f1_base:.4}",
        100.0 * fp
    ))
}

fn baseline_property() -> Result<String, String> {
    let counts = [4000usize, 1000, 1200, 900, 2200, 700];
    let n: usize = counts.iter().sum();
    let sentences: Vec<Sentence> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| (0..k).map(move |j| (c, j)))
        .enumerate()
        .map(|(i, (c, j))| sentence(i, label(c), format!("s{c}-{j}")))
        .collect();
    let model = ModelArtifact::from_baseline(BaselineModel::fit(&sentences));
    let report = baseline_report(&model, &sentences, 2024).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (c, &k) in counts.iter().enumerate() {
        let freq = k as f64 / n as f64;
        let m = report.class(label(c));
        for (what, v) in [("precision", m.precision), ("recall", m.recall)] {
            worst = worst.max((v - freq).abs());
            ensure((v - freq).abs() <= 0.03, || format!("{} {what} {v:.4} vs frequency {freq:.2}", label(c)))?;
        }
    }
    Ok(format!("{n} draws; max |P or R - frequency| = {worst:.4}"))
}

fn metric_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let instances = 500;
    for case in 0..instances {
        let n = rng.gen_range(1..=20);
        let golds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NUM_LABELS)).collect();
        let preds: Vec<usize> = (0..n).map(|_| rng.gen_range(0..NUM_LABELS)).collect();
        check_against_counter(&golds, &preds).map_err(|e| format!("instance {case}: {e}"))?;
    }

    use SectionLabel::*;
    let golds = [Facts, Facts, Issue, Rule].map(SectionLabel::index);
    let preds = [Facts, Issue, Issue, Rule].map(SectionLabel::index);
    let weighted = check_against_counter(&golds, &preds)?;
    let stated = 0.8333;
    ensure((weighted - stated).abs() <= 1e-9, || {
        format!("{instances} random instances exact; 4-sentence example weighted F1 = {weighted:.6}, stated {stated}")
    })?;
    Ok(format!("{instances} random instances exact; 4-sentence example {weighted:.4}"))
}

/// Compares the report with an independent counter; returns weighted F1.
fn check_against_counter(golds: &[usize], preds: &[usize]) -> Result<f64, String> {
    let test: Vec<Sentence> = golds.iter().enumerate().map(|(i, &g)| sentence(i, label(g), format!("t{i}"))).collect();
    let model = Lookup(
        preds.iter().enumerate().map(|(i, &p)| (format!("t{i}"), LabelDistribution::certain(label(p)))).collect(),
    );
    let report = classification_report(&model, &test).map_err(|e| e.to_string())?;
    let n = golds.len() as f64;
    let mut weighted = 0.0;
    for c in 0..NUM_LABELS {
        let tp = golds.iter().zip(preds).filter(|(g, p)| **g == c && **p == c).count();
        let predicted = preds.iter().filter(|p| **p == c).count();
        let support = golds.iter().filter(|g| **g == c).count();
        for g in 0..NUM_LABELS {
            let cell = golds.iter().zip(preds).filter(|(gg, pp)| **gg == g && **pp == c).count() as u64;
            ensure(report.confusion.get(label(c), label(g)) == cell, || format!("confusion[{c}][{g}]"))?;
        }
        let p = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        let r = if support > 0 { tp as f64 / support as f64 } else { 0.0 };
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let m = report.class(label(c));
        ensure(m.support == support as u64, || format!("{} support", label(c)))?;
        for (what, got, want) in [("precision", m.precision, p), ("recall", m.recall, r), ("f1", m.f1, f)] {
            ensure((got - want).abs() <= 1e-12, || format!("{} {what}: {got} != {want}", label(c)))?;
        }
        weighted += support as f64 * f / n;
    }
    ensure((report.weighted.f1 - weighted).abs() <= 1e-12, || format!("weighted F1 {} != {weighted}", report.weighted.f1))?;
    Ok(report.weighted.f1)
}

fn determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_casebrief");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).current_dir(d).output().map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    };
    let raw = generate(&SynthConfig { docs: 80, noise: 0.2, seed: 11, ..SynthConfig::default() });
    let lines: Vec<String> = raw.iter().map(|b| serde_json::to_string::<RawBrief>(&b.raw).unwrap()).collect();
    std::fs::write(d.join("raw.jsonl"), lines.join("\n") + "\n").map_err(|e| e.to_string())?;
    for r in ["r1", "r2"] {
        let p = |f: &str| format!("{r}/{f}");
        std::fs::create_dir(d.join(r)).map_err(|e| e.to_string())?;
        run(&["ingest", "--in", "raw.jsonl", "--out", &p("corpus.jsonl"), "--seed", "5"])?;
        run(&["train", "--corpus", &p("corpus.jsonl"), "--split-seed", "5", "--backend", "linear", "--out", &p("model")])?;
        run(&["evaluate", "--model", &p("model"), "--corpus", &p("corpus.jsonl"), "--split", "test", "--out", &p("eval")])?;
    }
    let files = [
        "corpus.jsonl",
        "model/manifest.json",
        "model/vocab.txt",
        "model/weights.bin",
        "eval/classification_report.json",
        "eval/classification_report.txt",
        "eval/warning_report.json",
        "eval/warning_report.txt",
        "eval/label_distribution.json",
    ];
    for f in files {
        let a = std::fs::read(d.join("r1").join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(d.join("r2").join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
    }
    Ok(format!("{} artifacts byte-identical across two runs", files.len()))
}

/// Operations each level may perform, written out independently of the
/// library's default table.
fn expected_ops(level: u8) -> &'static [Operation] {
    use Operation::*;
    match level {
        1 => &[GetWorkedExample],
        2 => &[SubmitCategorization],
        3 => &[SubmitAnnotation, ExportBrief],
        4 => &[SubmitAnnotation, SuggestCategory, ResolveSuggestion, ExportBrief],
        _ => &[SubmitAnnotation, SuggestCategory, ResolveSuggestion, HighlightDocument, ExportBrief],
    }
}

/// Puts 0.02 on every label except Reasoning.
struct Skewed;

impl Classifier for Skewed {
    fn predict_proba(&self, _text: &str) -> Result<LabelDistribution, ClassifierError> {
        Ok(LabelDistribution::new([0.02, 0.02, 0.02, 0.02, 0.9, 0.02]).unwrap())
    }
}

fn gating_document() -> (CaseBrief, WorkedExample) {
    let raw = RawBrief {
        doc_id: "g".into(),
        title: "Gate v. Keeper".into(),
        body: "Facts:\nThe keeper locked the gate. The walker climbed it.\n\nIssue:\nWas the walker a trespasser?\n\n\
               Holding:\nYes.\n\nProcedural History:\nThe trial court fined the walker.\n\n\
               Reasoning:\nThe gate was posted.\n\nRule:\nEntry past a posted gate is trespass.\n"
            .into(),
    };
    let doc = Ingestor::default().ingest(&raw).unwrap();
    let items = doc
        .sentences
        .iter()
        .map(|s| WorkedItem { span: doc.sentence_span(s), label: s.label, explanation: format!("This is {}.", s.label.heading()) })
        .collect();
    (doc.clone(), WorkedExample { doc_id: doc.doc_id.clone(), items })
}

fn session_gating() -> Result<String, String> {
    let (doc, we) = gating_document();
    let gates = GatingTable::default();
    let ctx = SessionContext { document: &doc, model: &Skewed, worked_example: Some(&we), gates: &gates };
    let span = doc.sentence_span(&doc.sentences[0]);
    let mut attempts = 0;
    for level in ProficiencyLevel::ALL {
        let allowed = expected_ops(level.number());
        let mut s = Session::new("s", "u", level, &doc);
        for op in Operation::ALL {
            attempts += 1;
            let result: Result<(), SessionError> = match op {
                Operation::GetWorkedExample => s.get_worked_example(&ctx).map(drop),
                Operation::SubmitCategorization => s
                    .submit_categorization(&ctx, 0, doc.sentences[0].label)
                    .and_then(|_| s.submit_categorization(&ctx, 1, SectionLabel::Rule))
                    .map(drop),
                Operation::SubmitAnnotation => s.submit_annotation(&ctx, span, SectionLabel::Facts).map(drop),
                Operation::SuggestCategory => s.suggest_category(&ctx, span).map(drop),
                Operation::ResolveSuggestion => {
                    let id = s.suggest_category(&ctx, span).map(|x| x.annotation_id).unwrap_or(u64::MAX);
                    s.resolve_suggestion(&ctx, id, Resolution::Confirm).map(drop)
                }
                Operation::HighlightDocument => s.highlight_document(&ctx).map(drop),
                Operation::ExportBrief => s.export_brief(&ctx).map(drop),
            };
            let permitted = allowed.contains(&op);
            match (permitted, &result) {
                (true, Ok(())) => {}
                (false, Err(SessionError::LevelGateViolation { operation, level: l })) if *operation == op && *l == level => {}
                _ => return Err(format!("{op} at level {level}: {result:?}")),
            }
        }
        let n = level.number();
        let reveals = s.feedback.iter().filter(|e| e.kind() == FeedbackKind::ExpertReveal).count();
        let warns = s.feedback.iter().filter(|e| e.kind() == FeedbackKind::Warning).count();
        let suggested = s.annotations.iter().filter(|a| a.predicted.is_some()).count();
        let pending = s.annotations.iter().filter(|a| a.status == AnnotationStatus::Suggested).count();
        ensure(reveals == usize::from(n == 2), || format!("level {n}: {reveals} expert reveals"))?;
        ensure((warns > 0) == (n == 3), || format!("level {n}: {warns} warning events"))?;
        ensure((suggested > 0) == (n >= 4) && (n >= 4 || pending == 0), || format!("level {n}: {suggested} suggestions"))?;
    }
    Ok(format!("{attempts} level/operation pairs; feedback channels confined to their levels"))
}
