use lfext_core::diagnostics::{extended_accuracy_bound, lift_lower_bound};
use lfext_core::label_model::{triplet_estimate, PairMoments};
use lfext_core::*;
use proptest::prelude::*;

fn nonzero_vec(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, d).prop_filter("zero vector", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn vote() -> impl Strategy<Value = i8> {
    prop_oneof![Just(-1i8), Just(0i8), Just(1i8)]
}

/// Random embeddings with a vote matrix of matching height.
fn instance() -> impl Strategy<Value = (EmbeddingSet, VoteMatrix)> {
    (2usize..40, 1usize..5, 1usize..4, any::<bool>()).prop_flat_map(|(n, d, m, cos)| {
        (prop::collection::vec(nonzero_vec(d), n), prop::collection::vec(vote(), n * m)).prop_map(move |(rows, v)| {
            let metric = if cos { DistanceMetric::Cosine } else { DistanceMetric::Euclidean };
            (EmbeddingSet::from_rows(&rows).unwrap().with_metric(metric), VoteMatrix::new(n, m, v).unwrap())
        })
    })
}

fn brute(emb: &EmbeddingSet, votes: &VoteMatrix, r: &[f64], w: Weighting) -> VoteMatrix {
    let (n, m) = (votes.n(), votes.m());
    let mut out = votes.clone();
    for j in 0..m {
        let mut col = votes.column(j);
        for i in 0..n {
            if votes.get(i, j) != 0 || r[j] == 0.0 {
                continue;
            }
            let sup = (0..n).filter(|&s| votes.get(s, j) != 0);
            col[i] = match w {
                Weighting::OneNearestNeighbor => {
                    let best = sup.map(|s| (emb.distance(i, s), s)).min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    match best {
                        Some((d, s)) if d <= r[j] => votes.get(s, j),
                        _ => 0,
                    }
                }
                Weighting::ThresholdedWeightedSum => {
                    let sum: i32 = sup.filter(|&s| emb.distance(i, s) <= r[j]).map(|s| votes.get(s, j) as i32).sum();
                    sum.signum() as i8
                }
            };
        }
        out.set_column(j, &col);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cosine_is_symmetric(u in nonzero_vec(6), v in nonzero_vec(6)) {
        prop_assert_eq!(cosine_distance(&u, &v), cosine_distance(&v, &u));
    }

    #[test]
    fn cosine_ignores_positive_scale(u in nonzero_vec(5), c in 0.01..100.0f64) {
        let cu: Vec<f64> = u.iter().map(|x| x * c).collect();
        prop_assert!(cosine_distance(&u, &cu) < 1e-12);
    }

    #[test]
    fn cosine_stays_in_range(u in nonzero_vec(4), v in nonzero_vec(4)) {
        let d = cosine_distance(&u, &v);
        prop_assert!((0.0..=2.0).contains(&d));
    }

    #[test]
    fn extension_matches_brute_force((emb, votes) in instance(), scale in 0.0..1.5f64, wsum in any::<bool>()) {
        let w = if wsum { Weighting::ThresholdedWeightedSum } else { Weighting::OneNearestNeighbor };
        let r: Vec<f64> = (0..votes.m()).map(|j| scale * (j + 1) as f64 / votes.m() as f64).collect();
        let ext = extend_votes(&emb, &votes, &RadiusConfig::new(r.clone(), w)).unwrap();
        prop_assert_eq!(ext, brute(&emb, &votes, &r, w));
    }

    #[test]
    fn extension_keeps_votes_and_grows_coverage((emb, votes) in instance(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let m = votes.m();
        let (lo, hi) = (a.min(b), a.max(b));
        let small = extend_votes(&emb, &votes, &RadiusConfig::uniform(m, lo, Weighting::OneNearestNeighbor)).unwrap();
        let large = extend_votes(&emb, &votes, &RadiusConfig::uniform(m, hi, Weighting::OneNearestNeighbor)).unwrap();
        for j in 0..m {
            prop_assert!(small.coverage(j) <= large.coverage(j));
            for i in 0..votes.n() {
                if votes.get(i, j) != 0 {
                    prop_assert_eq!(small.get(i, j), votes.get(i, j));
                    prop_assert_eq!(large.get(i, j), votes.get(i, j));
                }
            }
        }
        if m >= 2 {
            if let (Ok(before), Ok(after)) = (min_overlap(&votes), min_overlap(&large)) {
                prop_assert!(after >= before);
            }
        }
    }

    #[test]
    fn zero_radii_change_nothing((emb, votes) in instance(), wsum in any::<bool>()) {
        let w = if wsum { Weighting::ThresholdedWeightedSum } else { Weighting::OneNearestNeighbor };
        let ext = extend_votes(&emb, &votes, &RadiusConfig::uniform(votes.m(), 0.0, w)).unwrap();
        prop_assert_eq!(ext, votes);
    }

    #[test]
    fn table_columns_agree_with_single_extension((emb, votes) in instance(), radii in prop::collection::vec(0.0..1.0f64, 1..6)) {
        let cand = vec![radii.clone(); votes.m()];
        let table = ExtensionTable::build(&emb, &votes, &cand, Weighting::OneNearestNeighbor).unwrap();
        for &r in &radii {
            let direct = extend_votes(&emb, &votes, &RadiusConfig::uniform(votes.m(), r, Weighting::OneNearestNeighbor)).unwrap();
            prop_assert_eq!(table.apply(&vec![r; votes.m()]).unwrap(), direct);
        }
    }

    #[test]
    fn similarity_thresholds_convert_exactly(s in prop::collection::vec(-1.0..1.0f64, 1..5)) {
        let c = RadiusConfig::from_similarities(&s, Weighting::OneNearestNeighbor);
        for (r, s) in c.radii.iter().zip(&s) {
            prop_assert_eq!(*r, 1.0 - s);
        }
    }
}

fn params_and_row() -> impl Strategy<Value = (LabelModelParams, Vec<i8>)> {
    (1usize..=4).prop_flat_map(|m| {
        (
            prop::collection::vec(0.01..0.99f64, m),
            prop::collection::vec(0.0..1.0f64, m),
            0.01..0.99f64,
            prop::collection::vec(vote(), m),
        )
            .prop_map(|(accuracies, abstain_rates, prior, row)| (LabelModelParams { accuracies, abstain_rates, prior }, row))
    })
}

fn one_row(row: &[i8]) -> VoteMatrix {
    VoteMatrix::new(1, row.len(), row.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn posterior_matches_enumeration((p, row) in params_and_row()) {
        let mut joint = [p.prior, 1.0 - p.prior];
        for (k, y) in [1i8, -1].into_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let covered = 1.0 - p.abstain_rates[j];
                joint[k] *= if v == 0 { p.abstain_rates[j] } else if v == y { covered * p.accuracies[j] } else { covered * (1.0 - p.accuracies[j]) };
            }
        }
        let q = posterior(&p, &one_row(&row)).unwrap()[0];
        if joint[0] + joint[1] > 0.0 {
            prop_assert!((q - joint[0] / (joint[0] + joint[1])).abs() <= 1e-12);
        }
        prop_assert!((0.0..=1.0).contains(&q));
    }

    #[test]
    fn all_abstain_row_returns_prior((p, row) in params_and_row()) {
        let zeros = vec![0i8; row.len()];
        prop_assert_eq!(posterior(&p, &one_row(&zeros)).unwrap()[0], p.prior);
    }

    #[test]
    fn flipping_votes_and_prior_mirrors_posterior((p, row) in params_and_row()) {
        let q = posterior(&p, &one_row(&row)).unwrap()[0];
        let flipped: Vec<i8> = row.iter().map(|v| -v).collect();
        let mirror = LabelModelParams { prior: 1.0 - p.prior, ..p.clone() };
        let q2 = posterior(&mirror, &one_row(&flipped)).unwrap()[0];
        prop_assert!((q + q2 - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn posterior_grows_with_accuracy_of_positive_voter((p, mut row) in params_and_row(), j in 0usize..4, bump in 0.0..0.5f64) {
        let j = j % row.len();
        row[j] = 1;
        let mut better = p.clone();
        better.accuracies[j] = (p.accuracies[j] + bump).min(0.99);
        let q = posterior(&p, &one_row(&row)).unwrap()[0];
        let q2 = posterior(&better, &one_row(&row)).unwrap()[0];
        prop_assert!(q2 >= q - 1e-15);
    }

    #[test]
    fn predict_thresholds_at_half(q in prop::collection::vec(0.0..1.0f64, 1..20), prior in 0.01..0.99f64) {
        let labels = predict(&q, prior);
        for (y, &x) in labels.iter().zip(&q) {
            prop_assert_eq!(*y, if x > 0.5 { 1 } else if x < 0.5 { -1 } else if prior >= 0.5 { 1 } else { -1 });
        }
    }
}

fn full_votes() -> impl Strategy<Value = VoteMatrix> {
    (3usize..6, 30usize..120).prop_flat_map(|(m, n)| {
        prop::collection::vec(vote(), n * m).prop_map(move |v| VoteMatrix::new(n, m, v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triplets_maximize_min_overlap(votes in full_votes()) {
        let m = votes.m();
        let Ok(t) = select_triplets(&votes) else { return Ok(()) };
        let pm = PairMoments::new(&votes);
        let ov = |a: usize, b: usize| pm.count(a, b);
        for tr in &t.triplets {
            let (i, (j, k)) = (tr.source, tr.partners);
            prop_assert!(i != j && i != k && j < k);
            let score = ov(i, j).min(ov(i, k)).min(ov(j, k));
            for a in 0..m {
                for b in a + 1..m {
                    if a != i && b != i {
                        prop_assert!(ov(i, a).min(ov(i, b)).min(ov(a, b)) <= score);
                    }
                }
            }
        }
    }

    #[test]
    fn permuting_sources_permutes_accuracies(votes in full_votes(), shift in 1usize..5) {
        let m = votes.m();
        let perm: Vec<usize> = (0..m).map(|j| (j + shift) % m).collect();
        let mut moved = votes.clone();
        for (new, &old) in perm.iter().enumerate() {
            moved.set_column(new, &votes.column(old));
        }
        let a = estimate_accuracies(&votes, 0.5, &FitOptions::default());
        let b = estimate_accuracies(&moved, 0.5, &FitOptions::default());
        if let (Ok(a), Ok(b)) = (a, b) {
            // tie-breaking on equal overlaps can pick different triplets, so
            // only compare when every source had a unique best triplet
            let t = select_triplets(&votes).unwrap();
            let pm = PairMoments::new(&votes);
            let unique = t.triplets.iter().all(|tr| {
                let i = tr.source;
                let score = |x: usize, y: usize| pm.count(i, x).min(pm.count(i, y)).min(pm.count(x, y));
                let best = score(tr.partners.0, tr.partners.1);
                (0..m).flat_map(|x| (x + 1..m).map(move |y| (x, y)))
                    .filter(|&(x, y)| x != i && y != i && (x, y) != tr.partners)
                    .all(|(x, y)| score(x, y) < best)
            });
            if unique {
                for (new, &old) in perm.iter().enumerate() {
                    prop_assert!((b.accuracies[new] - a.accuracies[old]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn triplet_estimate_is_clamped(a in -1.0..1.0f64, b in -1.0..1.0f64, c in -1.0..1.0f64) {
        if let Ok(e) = triplet_estimate(a, b, c) {
            prop_assert!((0.001..=0.999).contains(&e));
        }
    }

    #[test]
    fn accuracy_bound_is_exact_without_label_noise(a in 0.0..=1.0f64, p in 0.01..=1.0f64, l in 0.0..=1.0f64, pd in 0.0..=1.0f64) {
        prop_assert_eq!(extended_accuracy_bound(a, 0.0, p, l, pd).unwrap(), a);
    }

    #[test]
    fn lift_bound_grows_with_extended_accuracy(
        l in 0.0..=1.0f64, pd in 0.0..=1.0f64, p in 0.0..=1.0f64,
        new in 0.5..=1.0f64, ext in 0.0..0.99f64, c in 0.0..=1.0f64, h in 1e-6..0.01f64,
    ) {
        let lo = lift_lower_bound(l, pd, p, new, ext, c).value;
        let hi = lift_lower_bound(l, pd, p, new, ext + h, c).value;
        prop_assert!(hi >= lo);
    }

    #[test]
    fn bounds_are_pure(a in 0.0..=1.0f64, m in 0.0..=1.0f64, p in 0.01..=1.0f64, l in 0.0..=1.0f64, pd in 0.0..=1.0f64) {
        let x = extended_accuracy_bound(a, m, p, l, pd).unwrap();
        let y = extended_accuracy_bound(a, m, p, l, pd).unwrap();
        prop_assert_eq!(x.to_bits(), y.to_bits());
    }
}
