//! End-to-end acceptance checks, one per criterion. Each prints a PASS/FAIL
//! line; the test fails if any criterion fails.

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rust_decimal::Decimal;

use judge_bench::generator::restore_dimension;
use judge_bench::harness::{read_records, report_run, run_benchmark, validate_dataset, ProviderConfig, RunConfig, RECORDS};
use judge_bench::judge::{
    aggregate_mode, confidence_weighted_vote, CalibrationTable, FewShotSet, Judge, JudgeInput, StrategyKind, StrategySpec,
};
use judge_bench::metrics::{krippendorff_alpha, prf1, AlphaMetric, AnnotationMatrix, Category, ConfusionCounts};
use judge_bench::model::{
    read_dataset, CostCategory, ErrorCategory, GeoPoint, Interval, Label, OpeningHours, RatingExpression, RatingKind,
    SystemBlock, UserBlock,
};
use judge_bench::oracle::judge_pair;
use judge_bench::provider::{ChatProvider, CostTable, RetryPolicy, ScriptStep, ScriptedMock};
use judge_bench::travel::{destination_point, TravelTimeEstimator};

// pinned tolerances and budgets
const GENERATION_BUDGET: Duration = Duration::from_secs(10);
const SWEEP_BUDGET: Duration = Duration::from_secs(60);
const F1_TOLERANCE: f64 = 0.0005;
const ALPHA_TOLERANCE: f64 = 1e-9;
const ALPHA_RANDOM_MATRICES: usize = 100;
const ALPHA_SEED: u64 = 2024;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg()) }
}

fn bench(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_judge-bench"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn criterion_1(dir: &Path) -> Check {
    let started = Instant::now();
    let out = bench(dir, &["generate", "--out", "dataset.jsonl"]);
    let elapsed = started.elapsed();
    ensure(out.status.success(), || format!("generate failed: {out:?}"))?;
    let pairs = read_dataset(&dir.join("dataset.jsonl")).map_err(|e| e.to_string())?;
    let users: BTreeSet<&str> = pairs.iter().map(|p| p.user.id.as_str()).collect();
    ensure(users.len() == 100, || format!("{} user blocks", users.len()))?;
    ensure(pairs.len() == 600, || format!("{} pairs", pairs.len()))?;
    let mut histogram = std::collections::BTreeMap::new();
    for p in &pairs {
        *histogram.entry(p.label.slug()).or_insert(0usize) += 1;
    }
    ensure(histogram.len() == 6 && histogram.values().all(|&n| n == 100), || format!("histogram {histogram:?}"))?;
    ensure(elapsed < GENERATION_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("100 users, 600 pairs, 100 per label, {:.2} s", elapsed.as_secs_f64()))
}

fn criterion_2(dir: &Path) -> Check {
    let out = bench(dir, &["validate", "--dataset", "dataset.jsonl"]);
    let text = String::from_utf8_lossy(&out.stdout);
    ensure(out.status.code() == Some(0) && text.contains("0 label disagreements"), || format!("validate: {text}"))?;

    let pairs = read_dataset(&dir.join("dataset.jsonl")).map_err(|e| e.to_string())?;
    let travel = TravelTimeEstimator::default();
    let report = validate_dataset(&pairs, &travel).map_err(|e| e.to_string())?;
    ensure(report.is_clean(), || report.to_string())?;
    let mut restored_ok = 0;
    for pair in &pairs {
        let Label::Incorrect { error } = pair.label else { continue };
        let base = pairs
            .iter()
            .find(|p| p.user.id == pair.user.id && p.label.is_correct())
            .ok_or_else(|| format!("{} has no aligned pair", pair.pair_id))?;
        let restored = restore_dimension(&pair.system, &base.system, error);
        if judge_pair(&pair.user, &restored, &travel).map_err(|e| e.to_string())?.correct {
            restored_ok += 1;
        }
    }
    ensure(restored_ok == 500, || format!("{restored_ok}/500 error pairs restore to correct"))?;
    Ok("0 disagreements; 500/500 error pairs restore to correct".into())
}

fn monday_user() -> UserBlock {
    UserBlock {
        id: "u-accept".into(),
        utterance: "Find me a high-end French restaurant with a rating of at least 4.5.".into(),
        location: GeoPoint::new(52.5389, 13.4244, "Prenzlauer Berg, Berlin"),
        date: NaiveDate::from_ymd_opt(2024, 3, 4).unwrap(),
        time: 20 * 60 + 35,
        cuisine: "french".into(),
        cuisine_lexical: "French".into(),
        cost: CostCategory::High,
        cost_paraphrase: "high-end".into(),
        rating: RatingExpression::new(RatingKind::AtLeast, 4.5),
    }
}

fn aligned_venue() -> SystemBlock {
    SystemBlock {
        venue_name: "Maison Lumière".into(),
        location: GeoPoint::new(52.5402, 13.4190, "Prenzlauer Berg, Berlin"),
        cuisine: "french".into(),
        cost: CostCategory::High,
        rating: 4.6,
        opening_hours: OpeningHours::uniform(vec![Interval::new(720, 1440)]),
    }
}

fn criterion_3() -> Check {
    let travel = TravelTimeEstimator::default();
    let label = |user: &UserBlock, venue: &SystemBlock| judge_pair(user, venue, &travel).unwrap().as_label();
    let user = monday_user();
    ensure(label(&user, &aligned_venue()) == Some(Label::Correct), || "baseline is not aligned".into())?;

    let mut closed = aligned_venue();
    closed.opening_hours.mon = vec![Interval::new(720, 1200)];
    let got = label(&user, &closed);
    ensure(got == Some(Label::Incorrect { error: ErrorCategory::Time }), || format!("closing 20:00 → {got:?}"))?;

    // 8 km at 30 km/h
    let (lat, lon) = destination_point(&user.location, 90.0, 8.0);
    let mut far = aligned_venue();
    far.location = GeoPoint::new(lat, lon, "Lichtenberg, Berlin");
    let minutes = travel.estimate(&user.location, &far.location).unwrap();
    ensure((minutes - 16.0).abs() < 1e-9, || format!("estimate {minutes}"))?;
    let got = label(&user, &far);
    ensure(got == Some(Label::Incorrect { error: ErrorCategory::Location }), || format!("16 min → {got:?}"))?;

    let mut around = monday_user();
    around.rating = RatingExpression::new(RatingKind::Around, 4.0);
    let mut venue = aligned_venue();
    venue.rating = 4.3;
    let got = label(&around, &venue);
    ensure(got == Some(Label::Incorrect { error: ErrorCategory::Rating }), || format!("around 4.0 vs 4.3 → {got:?}"))?;
    Ok("closed at 20:35 → time; 16.0 min → location; around 4.0 vs 4.3 → rating".into())
}

/// Spec-level calibration function, written independently of the library.
fn calibrated(p: f64) -> f64 {
    if p >= 1.0 {
        1.0
    } else if p >= 0.9 {
        0.8
    } else if p >= 0.8 {
        0.5
    } else if p >= 0.6 {
        0.3
    } else {
        0.1
    }
}

fn criterion_4() -> Check {
    let mut vectors = 0;
    for len in 1..=7usize {
        for bits in 0u32..(1 << len) {
            let v: Vec<bool> = (0..len).map(|i| bits >> i & 1 == 1).collect();
            let yes = v.iter().filter(|&&b| b).count();
            let no = len - yes;
            let expected = yes > no; // exact ties resolve to false
            ensure(aggregate_mode(&v) == expected, || format!("mode of {v:?}"))?;
            vectors += 1;
        }
    }

    let table = CalibrationTable::default();
    // one representative per bucket plus "no confidence"
    let confidences = [Some(1.0), Some(0.95), Some(0.85), Some(0.7), Some(0.3), None];
    let options: Vec<(bool, Option<f64>)> =
        [true, false].into_iter().flat_map(|d| confidences.iter().map(move |&c| (d, c))).collect();
    let mut panels = 0;
    for size in 1..=3usize {
        let mut idx = vec![0usize; size];
        loop {
            let panel: Vec<(bool, Option<f64>)> = idx.iter().map(|&i| options[i]).collect();
            let yes: f64 = panel.iter().filter(|v| v.0).map(|v| calibrated(v.1.unwrap_or(0.0))).sum();
            let no: f64 = panel.iter().filter(|v| !v.0).map(|v| calibrated(v.1.unwrap_or(0.0))).sum();
            let decision = yes > no;
            let share = if decision { yes } else { no } / (yes + no);
            let (got, got_share) = confidence_weighted_vote(&panel, &table);
            ensure(got == decision && (got_share - share).abs() < 1e-12, || format!("vote on {panel:?}"))?;
            panels += 1;
            // odometer over option indices
            let mut k = 0;
            while k < size && idx[k] == options.len() - 1 {
                idx[k] = 0;
                k += 1;
            }
            if k == size {
                break;
            }
            idx[k] += 1;
        }
    }

    let mappings = [(1.0, 1.0), (0.9, 0.8), (0.99, 0.8), (0.8, 0.5), (0.89, 0.5), (0.6, 0.3), (0.79, 0.3), (0.59, 0.1), (0.0, 0.1)];
    for (p, w) in mappings {
        ensure(table.weight(p) == w, || format!("f({p}) = {} (want {w})", table.weight(p)))?;
    }
    Ok(format!("{vectors} mode vectors, {panels} weighted panels, 5 calibration buckets exact"))
}

fn scripted_panel(decisions: &[bool]) -> ScriptedMock {
    decisions.iter().fold(ScriptedMock::new("scripted"), |m, &d| m.then(ScriptStep::verdict(d)))
}

fn free(ids: &[&str]) -> CostTable {
    let mut t = CostTable::reference();
    for id in ids {
        t.insert(*id, Decimal::ZERO, Decimal::ZERO);
    }
    t
}

fn criterion_5() -> Check {
    let user = monday_user();
    let system = aligned_venue();
    let input = || JudgeInput { pair_id: "accept", user: &user, system: &system };
    let judge = |kind, panel: Vec<Arc<dyn ChatProvider>>, ids: &[&str]| {
        let shots = (kind == StrategyKind::ArCot5).then(|| FewShotSet::default_set(5));
        Judge::new(StrategySpec::new(kind), panel, shots, free(ids)).unwrap().with_retry(RetryPolicy::immediate(3))
    };

    // personas answer in order; round 1 split, round 2 unanimous
    let mad = judge(StrategyKind::Mad, vec![Arc::new(scripted_panel(&[true, false, true, true, true, true]))], &["scripted"]);
    let out = mad.judge(input(), None).map_err(|e| e.to_string())?;
    ensure(out.rounds_used == 2 && out.verdict.decision, || format!("consensus run: rounds {}", out.rounds_used))?;
    ensure(out.transcript.len() == 6 && out.transcript.iter().all(|t| t.round <= 2), || "consensus transcript".into())?;

    // never unanimous: majority of round 3 (false, false, true → false)
    let mad = judge(
        StrategyKind::Mad,
        vec![Arc::new(scripted_panel(&[true, false, true, false, true, false, false, false, true]))],
        &["scripted"],
    );
    let out = mad.judge(input(), None).map_err(|e| e.to_string())?;
    ensure(out.rounds_used == 3 && !out.verdict.decision, || format!("majority run: rounds {}", out.rounds_used))?;

    // roundtable split for all rounds: weighted vote (1.0 vs 0.8 + 0.5)
    let steps = |id: &str, d: bool, p: f64| {
        (0..3).fold(ScriptedMock::new(id), |m, _| m.then(ScriptStep::verdict_with_confidence(d, p)))
    };
    let (a, b, c) = (steps("m-a", true, 1.0), steps("m-b", false, 0.9), steps("m-c", false, 0.8));
    let ar = judge(StrategyKind::ArCot5, vec![Arc::new(a), Arc::new(b), Arc::new(c)], &["m-a", "m-b", "m-c"]);
    let out = ar.judge(input(), None).map_err(|e| e.to_string())?;
    let confidence = out.verdict.confidence.unwrap_or(f64::NAN);
    ensure(out.rounds_used <= 3 && !out.verdict.decision, || format!("roundtable: {:?}", out.verdict))?;
    ensure((confidence - 1.3 / 2.3).abs() < 1e-12, || format!("roundtable share {confidence}"))?;
    Ok("MAD stops at round 2 on consensus; round-3 majority; AR weighted vote 1.3/2.3".into())
}

fn criterion_6(dir: &Path) -> Check {
    let oracle = |id: &str| ProviderConfig::OracleMock { model_id: id.into() };
    let started = Instant::now();
    let mut lines = Vec::new();
    for kind in StrategyKind::ALL {
        let providers = if kind == StrategyKind::ArCot5 {
            vec![oracle("oracle-a"), oracle("oracle-b"), oracle("oracle-c")]
        } else {
            vec![oracle("oracle-mock")]
        };
        let config = RunConfig {
            dataset: dir.join("dataset.jsonl"),
            strategy: kind,
            providers,
            out_dir: dir.join("sweep"),
            run_id: Some(kind.to_string()),
            skip_validate: true,
            ..RunConfig::default()
        };
        let summary = run_benchmark(&config).map_err(|e| format!("{kind}: {e}"))?;
        let group = &summary.report.groups[0];
        let m = &group.metrics;
        ensure(summary.records == 600, || format!("{kind}: {} records", summary.records))?;
        ensure(m.precision == Some(1.0) && m.recall == Some(1.0) && m.f1 == Some(1.0), || format!("{kind}: {m:?}"))?;
        ensure(
            Category::ALL.iter().all(|c| group.per_category.get(c) == Some(&1.0)),
            || format!("{kind}: per-category {:?}", group.per_category),
        )?;
        lines.push(kind.to_string());
    }
    let elapsed = started.elapsed();
    ensure(elapsed < SWEEP_BUDGET, || format!("sweep took {elapsed:?}"))?;
    Ok(format!("{} strategies at F1 = 1.0, {:.1} s", lines.len(), elapsed.as_secs_f64()))
}

fn criterion_7() -> Check {
    // precision 9506/9800 = 0.970, recall 9506/9700 = 0.980
    let counts = ConfusionCounts::new(9506, 294, 0, 194);
    let m = prf1(&counts);
    let (p, r, f1) = (m.precision.unwrap(), m.recall.unwrap(), m.f1.unwrap());
    ensure((p - 0.970).abs() < 1e-12 && (r - 0.980).abs() < 1e-12, || format!("P {p}, R {r}"))?;
    ensure((f1 - 0.975).abs() <= F1_TOLERANCE, || format!("F1 {f1}"))?;
    let cost = CostTable::reference().cost_of("gpt-4-turbo", 1000, 500).map_err(|e| e.to_string())?;
    ensure(cost == Decimal::new(25, 3), || format!("cost {cost}"))?;
    Ok(format!("F1 {f1:.6}; gpt-4-turbo 1000/500 tokens = ${cost}"))
}

fn criterion_8() -> Check {
    let perfect = AnnotationMatrix::new(vec![vec![Some(0), Some(0)], vec![Some(1), Some(1)], vec![Some(2), Some(2)]]);
    let a = krippendorff_alpha(&perfect, AlphaMetric::Nominal).map_err(|e| e.to_string())?;
    ensure(a == 1.0, || format!("perfect agreement α = {a}"))?;

    let hand = AnnotationMatrix::from_labels(&[
        vec![Some("a"), Some("a")],
        vec![Some("a"), Some("a")],
        vec![Some("b"), Some("b")],
        vec![Some("a"), Some("b")],
    ]);
    let a = krippendorff_alpha(&hand, AlphaMetric::Nominal).map_err(|e| e.to_string())?;
    ensure((a - 8.0 / 15.0).abs() < ALPHA_TOLERANCE, || format!("hand case α = {a}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(ALPHA_SEED);
    let mut compared = 0;
    while compared < ALPHA_RANDOM_MATRICES {
        let raters = rng.random_range(2..=5);
        let units = rng.random_range(2..=20);
        let m = AnnotationMatrix::new(
            (0..units)
                .map(|_| (0..raters).map(|_| rng.random_bool(0.85).then(|| rng.random_range(0..2))).collect())
                .collect(),
        );
        match (krippendorff_alpha(&m, AlphaMetric::Nominal), krippendorff_alpha(&m, AlphaMetric::Ordinal)) {
            (Ok(n), Ok(o)) => {
                ensure((n - o).abs() < ALPHA_TOLERANCE, || format!("binary matrix: nominal {n}, ordinal {o}"))?;
                compared += 1;
            }
            (Err(_), Err(_)) => {} // undefined for both; draw another
            (n, o) => return Err(format!("definedness differs: {n:?} vs {o:?}")),
        }
    }
    Ok(format!("perfect = 1.0; hand case = 8/15; ordinal = nominal on {compared} binary matrices"))
}

fn criterion_9(dir: &Path) -> Check {
    let mut config = RunConfig {
        dataset: dir.join("dataset.jsonl"),
        strategy: StrategyKind::Io,
        providers: vec![ProviderConfig::NoisyOracleMock { model_id: "noisy".into(), flip_probability: 0.1, seed: 5 }],
        out_dir: dir.join("resume"),
        run_id: Some("noisy".into()),
        max_pairs: Some(300),
        ..RunConfig::default()
    };
    let first = run_benchmark(&config).map_err(|e| e.to_string())?;
    // the interruption also tears the line being written
    let records_path = first.run_dir.join(RECORDS);
    let mut text = std::fs::read_to_string(&records_path).map_err(|e| e.to_string())?;
    text.push_str("{\"run_id\":\"noisy\",\"sess");
    std::fs::write(&records_path, text).map_err(|e| e.to_string())?;

    config.max_pairs = None;
    config.resume = true;
    let live = run_benchmark(&config).map_err(|e| e.to_string())?;
    let records = read_records(&records_path).map_err(|e| e.to_string())?;
    let ids: BTreeSet<&str> = records.iter().map(|r| r.pair_id.as_str()).collect();
    ensure(records.len() == 600 && ids.len() == 600, || format!("{} records, {} ids", records.len(), ids.len()))?;
    ensure(first.judged_now == 300 && live.judged_now == 300, || format!("{} + {}", first.judged_now, live.judged_now))?;
    let (_, offline) = report_run(&live.run_dir).map_err(|e| e.to_string())?;
    ensure(offline == live.report, || "offline report differs from live summary".into())?;
    let f1 = live.report.groups[0].metrics.f1.unwrap_or(f64::NAN);
    Ok(format!("300 + 300 judgments, 600 unique records, offline report = live (F1 {f1:.3})"))
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let checks: Vec<(u8, Box<dyn Fn() -> Check + '_>)> = vec![
        (1, Box::new(|| criterion_1(d))),
        (2, Box::new(|| criterion_2(d))),
        (3, Box::new(criterion_3)),
        (4, Box::new(criterion_4)),
        (5, Box::new(criterion_5)),
        (6, Box::new(|| criterion_6(d))),
        (7, Box::new(criterion_7)),
        (8, Box::new(criterion_8)),
        (9, Box::new(|| criterion_9(d))),
    ];
    let mut failed = Vec::new();
    for (n, check) in checks {
        let result = catch_unwind(AssertUnwindSafe(|| check())).unwrap_or_else(|_| Err("panicked".into()));
        match result {
            Ok(detail) => println!("criterion {n}: PASS — {detail}"),
            Err(detail) => {
                println!("criterion {n}: FAIL — {detail}");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
