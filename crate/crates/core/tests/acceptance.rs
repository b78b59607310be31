//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the summary lines are printed even
//! when everything passes; the process exits non-zero on any failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use popeval::analysis::pearson;
use popeval::baseline::{average_precision, levenshtein, one_minus_ned, DEFAULT_IOU_THRESHOLD};
use popeval::evaluate::{aggregate, evaluate_image_traced};
use popeval::synth::{figure_one, generate, ScenarioKind, ScenarioSpec};
use popeval::{evaluate_image, EvalConfig, ImageEvalResult, NormalizeOptions, Polygon, TextInstance};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, what: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what.into())
    }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let detail = f()?;
    let elapsed = start.elapsed();
    check(elapsed < limit, format!("took {elapsed:?}, limit {limit:?}"))?;
    Ok(format!("{detail}; {:.3}s", elapsed.as_secs_f64()))
}

fn golden() -> Outcome {
    timed(Duration::from_secs(1), || {
        let cfg = EvalConfig::default();
        let run = |case| {
            let s = figure_one(case).unwrap();
            evaluate_image(&s.gt_instances(), &s.det_instances(), &cfg)
        };
        let b = run('B');
        check(b.precision == 1.0, format!("B precision {}", b.precision))?;
        check((b.recall - 0.857143).abs() <= 1e-6, format!("B recall {}", b.recall))?;
        let c = run('C');
        check(
            c.removed_weight == 7.0 && c.recall == 1.0 && c.precision == 0.875,
            format!("C {c:?}"),
        )?;
        let d = run('D');
        check(
            d.removed_weight == 3.0 && d.recall == 3.0 / 7.0 && d.precision == 3.0 / 5.0,
            format!("D {d:?}"),
        )?;
        Ok(format!(
            "B recall {:.6}, C precision {}, D precision {}",
            b.recall, c.precision, d.precision
        ))
    })
}

fn oracle_equivalence() -> Outcome {
    timed(Duration::from_secs(30), || {
        let cfg = EvalConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2019);
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let spec = ScenarioSpec {
                kind: ScenarioKind::ALL[i % ScenarioKind::ALL.len()],
                seed: rng.gen(),
                word_count: rng.gen_range(1..=8),
            };
            let s = generate(&spec);
            let got = evaluate_image(&s.gt_instances(), &s.det_instances(), &cfg);
            let diff = (got.removed_weight - s.expected.removed_weight).abs();
            worst = worst.max(diff);
            check(
                diff <= 1e-9
                    && got.gt_char_total == s.expected.gt_char_total
                    && got.det_char_total == s.expected.det_char_total,
                format!("{spec:?}: got {got:?}, oracle {:?}", s.expected),
            )?;
        }
        Ok(format!("1000 cases, max |diff| {worst:e}"))
    })
}

// Scenario kinds whose detections cover whole words.
const WORD_ALIGNED: [ScenarioKind; 8] = [
    ScenarioKind::Exact,
    ScenarioKind::Deletion,
    ScenarioKind::Insertion,
    ScenarioKind::Substitution,
    ScenarioKind::Merge,
    ScenarioKind::Permutation,
    ScenarioKind::DontCareOverlap,
    ScenarioKind::NoOverlap,
];

fn granularity() -> Outcome {
    let cfg = EvalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let (mut word, mut chars, mut word_j, mut chars_j) = (vec![], vec![], vec![], vec![]);
    for i in 0..200 {
        let s = generate(&ScenarioSpec {
            kind: WORD_ALIGNED[i % WORD_ALIGNED.len()],
            seed: rng.gen(),
            word_count: rng.gen_range(1..=8),
        });
        let w = evaluate_image(&s.gt_instances(), &s.det_instances(), &cfg);
        let c = evaluate_image(&s.char_gt_instances(), &s.det_instances(), &cfg);
        check(
            w.fscore == c.fscore,
            format!("image {i}: word F {} vs char F {}", w.fscore, c.fscore),
        )?;
        word.push(w);
        chars.push(c);

        let j = s.with_jitter(0.05, rng.gen());
        word_j.push(evaluate_image(&j.gt_instances(), &j.det_instances(), &cfg));
        chars_j.push(evaluate_image(&j.char_gt_instances(), &j.det_instances(), &cfg));
    }
    let f = |r: &[ImageEvalResult]| aggregate(r).scores.unwrap().fscore;
    let aligned = (f(&word) - f(&chars)).abs();
    let jittered = (f(&word_j) - f(&chars_j)).abs();
    check(aligned == 0.0, format!("aligned corpus differs by {aligned}"))?;
    check(jittered <= 0.004, format!("jittered corpus differs by {jittered}"))?;
    Ok(format!("200 images, |dF| aligned {aligned}, jittered {jittered:.6}"))
}

fn rect(l: f64, t: f64, r: f64, b: f64) -> Polygon {
    Polygon::rect(l, t, r, b).unwrap()
}

fn failure_modes() -> Outcome {
    let cfg = EvalConfig::default();
    let opts = NormalizeOptions::case_fold(true);
    let words = ["POPEVAL", "SCENE", "TEXT", "READING", "EXIT", "STOP", "CAFE", "HOTEL"];

    // Every detection reads its word correctly but sits 60% of a box height
    // lower: IoU 0.4 / 1.6 = 0.25.
    let (mut results, mut ap, mut ned, mut images) = (vec![], 0.0, 0.0, 0);
    for img in 0..20 {
        let mut gts = vec![];
        let mut dets = vec![];
        for k in 0..5 {
            let word = words[(img + k) % words.len()];
            let (l, t) = (20.0 + 190.0 * k as f64, 40.0 + 100.0 * (img % 8) as f64);
            let (w, h) = (20.0 * word.len() as f64, 30.0);
            gts.push(TextInstance::new(rect(l, t, l + w, t + h), word));
            dets.push(
                TextInstance::new(rect(l, t + 0.6 * h, l + w, t + 1.6 * h), word.to_lowercase())
                    .with_confidence(0.5 + 0.01 * k as f64),
            );
        }
        results.push(evaluate_image(&gts, &dets, &cfg));
        ap += average_precision(&gts, &dets, DEFAULT_IOU_THRESHOLD, &opts).map_err(|e| e.to_string())?;
        ned += one_minus_ned(&gts, &dets, DEFAULT_IOU_THRESHOLD, &opts);
        images += 1;
    }
    let (ap, ned) = (ap / images as f64, ned / images as f64);
    let f = aggregate(&results).scores.unwrap().fscore;
    check(ap == 0.0, format!("low-IoU AP {ap}"))?;
    check(ned == 0.0, format!("low-IoU 1-NED {ned}"))?;
    check(f > 0.9, format!("low-IoU PopEval F {f}"))?;

    let gts = vec![
        TextInstance::new(rect(0.0, 0.0, 30.0, 10.0), "POP"),
        TextInstance::new(rect(35.0, 0.0, 75.0, 10.0), "EVAL"),
    ];
    let det = vec![TextInstance::new(rect(0.0, 0.0, 75.0, 10.0), "POPEVAL").with_confidence(0.9)];
    let merge_ap = average_precision(&gts, &det, DEFAULT_IOU_THRESHOLD, &opts).map_err(|e| e.to_string())?;
    let merge_f = evaluate_image(&gts, &det, &cfg).fscore;
    check(
        merge_ap == 0.0 && merge_f == 1.0,
        format!("merge AP {merge_ap}, F {merge_f}"),
    )?;
    Ok(format!(
        "low IoU: AP {ap}, 1-NED {ned}, F {f:.6}; merge: AP {merge_ap}, F {merge_f}"
    ))
}

#[derive(Debug, Clone)]
struct Instance {
    rect: [f64; 4],
    text: String,
}

fn instance() -> impl Strategy<Value = Instance> {
    (
        0.0..200.0f64,
        0.0..200.0f64,
        1.0..80.0f64,
        1.0..40.0f64,
        "[a-dA-D]{0,6}",
    )
        .prop_map(|(l, t, w, h, text)| Instance {
            rect: [l, t, l + w, t + h],
            text,
        })
}

fn scene() -> impl Strategy<Value = (Vec<Instance>, Vec<Instance>)> {
    (
        prop::collection::vec(instance(), 0..7),
        prop::collection::vec(instance(), 0..7),
    )
}

fn build(xs: &[Instance]) -> Vec<TextInstance> {
    xs.iter()
        .map(|i| TextInstance::new(rect(i.rect[0], i.rect[1], i.rect[2], i.rect[3]), i.text.clone()))
        .collect()
}

fn run_property<S: Strategy>(
    name: &str,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<String, String> {
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))?;
    Ok(format!("{name} x500"))
}

fn properties() -> Outcome {
    let cfg = EvalConfig::default();
    let mut passed = vec![];

    passed.push(run_property("bounds", scene(), |(g, d)| {
        let r = evaluate_image(&build(&g), &build(&d), &cfg);
        for v in [r.precision, r.recall, r.fscore] {
            prop_assert!((0.0..=1.0).contains(&v), "{r:?}");
        }
        prop_assert!(r.removed_weight <= r.gt_char_total.min(r.det_char_total) as f64 + 1e-9);
        Ok(())
    })?);

    passed.push(run_property("termination", scene(), |(g, d)| {
        let t = evaluate_image_traced(&build(&g), &build(&d), &cfg);
        prop_assert!(
            t.rounds <= d.len() + 1,
            "{} rounds for {} detections",
            t.rounds,
            d.len()
        );
        Ok(())
    })?);

    passed.push(run_property(
        "order invariance",
        (scene(), any::<u64>()),
        |((g, d), seed)| {
            use rand::seq::SliceRandom;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut g2, mut d2) = (g.clone(), d.clone());
            g2.shuffle(&mut rng);
            d2.shuffle(&mut rng);
            let a = evaluate_image(&build(&g), &build(&d), &cfg);
            let b = evaluate_image(&build(&g2), &build(&d2), &cfg);
            prop_assert!((a.removed_weight - b.removed_weight).abs() <= 1e-9, "{a:?} vs {b:?}");
            Ok(())
        },
    )?);

    passed.push(run_property(
        "case folding",
        (scene(), any::<u64>()),
        |((g, d), seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let flip = |xs: &[Instance], rng: &mut ChaCha8Rng| -> Vec<Instance> {
                xs.iter()
                    .map(|i| Instance {
                        rect: i.rect,
                        text: i
                            .text
                            .chars()
                            .map(|c| {
                                if rng.gen_bool(0.5) {
                                    c.to_ascii_uppercase()
                                } else {
                                    c.to_ascii_lowercase()
                                }
                            })
                            .collect(),
                    })
                    .collect()
            };
            let lower = |xs: &[Instance]| -> Vec<Instance> {
                xs.iter()
                    .map(|i| Instance {
                        rect: i.rect,
                        text: i.text.to_lowercase(),
                    })
                    .collect()
            };
            let folded = evaluate_image(&build(&g), &build(&d), &cfg);
            let flipped = evaluate_image(&build(&flip(&g, &mut rng)), &build(&flip(&d, &mut rng)), &cfg);
            let strict = EvalConfig {
                case_fold: false,
                ..cfg.clone()
            };
            let pre_lowered = evaluate_image(&build(&lower(&g)), &build(&lower(&d)), &strict);
            prop_assert!((folded.removed_weight - flipped.removed_weight).abs() <= 1e-9);
            prop_assert!((folded.removed_weight - pre_lowered.removed_weight).abs() <= 1e-9);
            Ok(())
        },
    )?);

    let word = "[a-c]{0,8}";
    passed.push(run_property("levenshtein axioms", (word, word, word), |(a, b, c)| {
        let (ab, bc, ac) = (levenshtein(&a, &b), levenshtein(&b, &c), levenshtein(&a, &c));
        prop_assert_eq!(levenshtein(&a, &a), 0);
        prop_assert_eq!(ab == 0, a == b);
        prop_assert_eq!(ab, levenshtein(&b, &a));
        prop_assert!(ac <= ab + bc);
        prop_assert!(ab <= a.chars().count().max(b.chars().count()));
        Ok(())
    })?);

    passed.push(run_property(
        "pearson affine",
        (
            prop::collection::vec(-100.0..100.0f64, 2..30),
            0.01..100.0f64,
            -100.0..100.0f64,
        ),
        |(xs, a, b)| {
            prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-3));
            let up: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            let down: Vec<f64> = xs.iter().map(|x| b - a * x).collect();
            prop_assert!((pearson(&xs, &up).unwrap() - 1.0).abs() <= 1e-12);
            prop_assert!((pearson(&xs, &down).unwrap() + 1.0).abs() <= 1e-12);
            let r = pearson(&xs, &up[..].iter().rev().copied().collect::<Vec<_>>()).unwrap();
            prop_assert!((-1.0..=1.0).contains(&r));
            Ok(())
        },
    )?);

    Ok(passed.join(", "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 5] = [
        ("1 golden worked cases", golden),
        ("2 oracle equivalence", oracle_equivalence),
        ("3 granularity compatibility", granularity),
        ("4 failure-mode separation", failure_modes),
        ("5 property suites", properties),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("NOTE criterion 6 table reproduction is out of scope: needs trained recognizers and human raters");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
