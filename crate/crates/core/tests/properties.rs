use ocean_core::corpus::{split, truncate, truncated_len, Session, Utterance};
use ocean_core::extraction::{parse_choice, parse_direct, ExtractionRules, ParsedChoice};
use ocean_core::inventory::{Inventory, LikertChoice, ResponseSheet, ScoringPolicy};
use ocean_core::metrics::{iqr_outliers, pearson, weighted_kappa, KappaWeighting};
use ocean_core::simulator::{render_answer, DigitWidth, Phrasing};
use ocean_core::traits::Domain;
use proptest::prelude::*;

fn session(i: usize, client: usize, len: usize) -> Session {
    Session {
        session_id: format!("s{i:03}"),
        client_id: format!("c{client}"),
        counselor_id: "k".into(),
        utterances: (0..len).map(|k| if k % 2 == 0 { Utterance::counselor("hi") } else { Utterance::client("ok") }).collect(),
        ground_truth: None,
        item_ground_truth: None,
    }
}

proptest! {
    #[test]
    fn score_matches_keyed_mean(values in proptest::collection::vec(1u8..=5, 60)) {
        let inv = Inventory::bfi2().unwrap();
        let sheet = ResponseSheet::from_values(values.iter().enumerate().map(|(i, v)| (i as u8 + 1, *v))).unwrap();
        let scores = inv.score_responses(&sheet, ScoringPolicy::Strict).unwrap();
        for d in Domain::ALL {
            let keyed: Vec<u8> = inv
                .domain_items(d)
                .map(|it| {
                    let v = values[usize::from(it.index) - 1];
                    if it.reverse_keyed { 6 - v } else { v }
                })
                .collect();
            let mean = keyed.iter().map(|v| f64::from(*v)).sum::<f64>() / 12.0;
            prop_assert!((scores.get(d) - mean).abs() <= 1e-12);
        }
    }

    #[test]
    fn pearson_symmetric_and_affine_invariant(
        pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
        if let (Ok(xy), Ok(yx)) = (pearson(&x, &y), pearson(&y, &x)) {
            prop_assert!((xy.r - yx.r).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&xy.r));
            prop_assert!((0.0..=1.0).contains(&xy.p_value));
            let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let t = pearson(&ax, &y).unwrap();
            prop_assert!((t.r - xy.r).abs() < 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((pearson(&neg, &y).unwrap().r + xy.r).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa_is_permutation_invariant_and_bounded(
        pairs in proptest::collection::vec((1u8..=5, 1u8..=5), 1..60),
        rot in 0usize..60,
    ) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let k = weighted_kappa(&a, &b, KappaWeighting::Linear).unwrap();
        let mut ra = a.clone();
        let mut rb = b.clone();
        let r = rot % a.len();
        ra.rotate_left(r);
        rb.rotate_left(r);
        prop_assert!((weighted_kappa(&ra, &rb, KappaWeighting::Linear).unwrap() - k).abs() < 1e-12);
        prop_assert!((weighted_kappa(&b, &a, KappaWeighting::Linear).unwrap() - k).abs() < 1e-12);
        prop_assert!(k <= 1.0 + 1e-12);
        prop_assert_eq!(weighted_kappa(&a, &a, KappaWeighting::Linear).unwrap(), 1.0);
    }

    #[test]
    fn iqr_is_order_invariant(values in proptest::collection::vec(-1e3f64..1e3, 4..50), rot in 0usize..50) {
        let base = iqr_outliers(&values).unwrap();
        let mut shuffled = values.clone();
        shuffled.rotate_left(rot % values.len());
        shuffled.reverse();
        let other = iqr_outliers(&shuffled).unwrap();
        prop_assert_eq!(base.q1, other.q1);
        prop_assert_eq!(base.q3, other.q3);
        let mut a: Vec<f64> = base.outlier_indices.iter().map(|i| values[*i]).collect();
        let mut b: Vec<f64> = other.outlier_indices.iter().map(|i| shuffled[*i]).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn truncation_is_monotone_prefix(n in 1usize..300, f1 in 0.01f64..1.0, f2 in 0.01f64..1.0) {
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let s = session(0, 0, n);
        let a = truncate(&s, lo).unwrap();
        let b = truncate(&s, hi).unwrap();
        prop_assert!(a.utterances.len() <= b.utterances.len());
        prop_assert_eq!(&a.utterances[..], &b.utterances[..a.utterances.len()]);
        prop_assert!(!a.utterances.is_empty());
        prop_assert_eq!(truncated_len(n, 1.0), n);
    }

    #[test]
    fn split_partitions(n in 2usize..120, frac in 0.05f64..0.95, seed in any::<u64>(), grouped in any::<bool>()) {
        let sessions: Vec<Session> = (0..n).map(|i| session(i, i % 7, 3)).collect();
        let (train, val) = split(&sessions, frac, seed, grouped).unwrap();
        prop_assert_eq!(train.len() + val.len(), n);
        let mut ids: Vec<&str> = train.iter().chain(&val).map(|s| s.session_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), n);
        if grouped {
            for t in &train {
                prop_assert!(val.iter().all(|v| v.client_id != t.client_id));
            }
        } else {
            prop_assert_eq!(val.len(), (frac * n as f64).round() as usize);
        }
        prop_assert_eq!(split(&sessions, frac, seed, grouped).unwrap(), (train, val));
    }

    #[test]
    fn parsing_is_total(text in "\\PC{0,200}") {
        let rules = ExtractionRules::default();
        let parsed = parse_choice(&text, &rules);
        if let ParsedChoice::Choice(c) = parsed {
            prop_assert!((1..=5).contains(&c.value()));
        }
        let _ = parse_direct(&text, &rules);
    }

    #[test]
    fn simulator_renderings_round_trip(v in 1u8..=5, p in 0usize..3, w in 0usize..2) {
        let c = LikertChoice::new(v).unwrap();
        let text = render_answer(c, Phrasing::ALL[p], DigitWidth::ALL[w]);
        prop_assert_eq!(parse_choice(&text, &ExtractionRules::default()), ParsedChoice::Choice(c));
    }
}
