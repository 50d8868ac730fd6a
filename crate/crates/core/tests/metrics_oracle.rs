use proptest::prelude::*;
use relog_core::metrics::MetricsReport;
use relog_core::SufficiencyRule;

/// (label, total, detected, true positives, printed precision, recall, F1).
const ROWS: [(&str, u32, u32, u32, f64, f64, f64); 12] = [
    ("direct deepseek", 311, 300, 159, 0.530, 0.511, 0.520),
    ("direct qwen", 311, 299, 158, 0.528, 0.508, 0.518),
    ("direct glm", 311, 299, 168, 0.562, 0.540, 0.551),
    ("direct gpt-5-mini", 311, 297, 170, 0.572, 0.547, 0.559),
    ("indirect deepseek", 225, 142, 75, 0.528, 0.333, 0.408),
    ("indirect qwen", 225, 113, 64, 0.566, 0.284, 0.378),
    ("indirect glm", 225, 116, 65, 0.560, 0.289, 0.382),
    ("indirect gpt-5-mini", 225, 148, 80, 0.541, 0.356, 0.430),
    ("direct without fixer", 311, 208, 114, 0.548, 0.366, 0.439),
    ("direct without refine", 311, 297, 118, 0.397, 0.379, 0.388),
    ("indirect without fixer", 225, 102, 58, 0.569, 0.258, 0.355),
    ("indirect without refine", 225, 116, 62, 0.534, 0.276, 0.364),
];

const TOLERANCE: f64 = 0.001;

/// F1 as the Dice form 2TP / (detected + total), independent of P and R.
fn dice(total: u32, detected: u32, tp: u32) -> f64 {
    2.0 * f64::from(tp) / f64::from(detected + total)
}

#[test]
fn computed_scores_agree_with_independent_formulas() {
    for (label, total, detected, tp, ..) in ROWS {
        let r = MetricsReport::from_counts(total, detected, tp).unwrap();
        assert!((r.precision - f64::from(tp) / f64::from(detected)).abs() < 1e-12, "{label}");
        assert!((r.recall - f64::from(tp) / f64::from(total)).abs() < 1e-12, "{label}");
        assert!((r.f1 - dice(total, detected, tp)).abs() < 1e-12, "{label}");
    }
}

#[test]
fn printed_scores_match_within_tolerance() {
    for (label, total, detected, tp, p, rc, f1) in ROWS {
        let r = MetricsReport::from_counts(total, detected, tp).unwrap();
        assert!((r.precision - p).abs() <= TOLERANCE, "{label} precision {}", r.precision);
        assert!((r.recall - rc).abs() <= TOLERANCE, "{label} recall {}", r.recall);
        if label == "indirect gpt-5-mini" {
            continue;
        }
        assert!((r.f1 - f1).abs() <= TOLERANCE, "{label} f1 {}", r.f1);
    }
}

/// The printed F1 for this row does not follow from its counts: 160/373
/// rounds to 0.429, and so does F1 over the rounded precision and recall.
#[test]
fn one_printed_f1_is_inconsistent_with_its_counts() {
    let r = MetricsReport::from_counts(225, 148, 80).unwrap();
    assert!((r.f1 - 160.0 / 373.0).abs() < 1e-12);
    assert!((r.f1 - 0.430).abs() > TOLERANCE);
    let from_rounded: f64 = 2.0 * 0.541 * 0.356 / (0.541 + 0.356);
    assert!((from_rounded - 0.430).abs() > 0.0005);
}

proptest! {
    #[test]
    fn f1_is_bounded_by_precision_and_recall(total in 1u32..500, detected in 0u32..500, tp in 0u32..500) {
        prop_assume!(tp <= detected && tp <= total);
        let r = MetricsReport::from_counts(total, detected, tp).unwrap();
        prop_assert!(r.f1 <= r.precision.max(r.recall) + 1e-12);
        prop_assert!(r.f1 + 1e-12 >= r.precision.min(r.recall));
        let expected = if detected == 0 { 0.0 } else { dice(total, detected, tp) };
        prop_assert!((r.f1 - expected).abs() < 1e-12);
    }

    #[test]
    fn sufficiency_rule_matches_its_definition(scores in prop::collection::vec(0u8..=2, 0..6)) {
        let oracle = scores.iter().all(|&s| s >= 1) && scores.iter().filter(|&&s| s == 2).count() >= 2;
        prop_assert_eq!(SufficiencyRule::default().judge(scores.iter().copied()), oracle);
    }
}
