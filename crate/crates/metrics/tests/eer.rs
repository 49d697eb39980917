//! EER and DET points against an exhaustive threshold sweep.

use hmc_metrics::{det_points, eer, Label, ScoreRecord};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn recs(pairs: &[(f32, Label)]) -> Vec<ScoreRecord> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, &(s, l))| ScoreRecord::labeled(format!("u{i}"), s, l).unwrap())
        .collect()
}

/// FAR and FRR by counting every record at every candidate threshold.
fn brute_force_points(r: &[ScoreRecord]) -> Vec<(f64, f64, f64)> {
    let mut ts: Vec<f64> = r.iter().map(|x| x.score as f64).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let top = *ts.last().unwrap();
    ts.push(top + top.abs().max(1.0));
    let nb = r.iter().filter(|x| x.label == Some(Label::Bonafide)).count() as f64;
    let ns = r.len() as f64 - nb;
    ts.into_iter()
        .map(|t| {
            let fa = r
                .iter()
                .filter(|x| x.label == Some(Label::Spoof) && x.score as f64 >= t)
                .count() as f64;
            let fr = r
                .iter()
                .filter(|x| x.label == Some(Label::Bonafide) && (x.score as f64) < t)
                .count() as f64;
            (fa / ns, fr / nb, t)
        })
        .collect()
}

/// Scans adjacent operating points for the first sign change of FRR − FAR.
fn brute_force_eer(r: &[ScoreRecord]) -> f64 {
    let pts = brute_force_points(r);
    for (i, &(far, frr, _)) in pts.iter().enumerate() {
        if frr == far {
            return far;
        }
        if frr > far {
            let (pfar, pfrr, _) = pts[i - 1];
            let t = (pfar - pfrr) / ((frr - far) - (pfrr - pfar));
            return pfar + t * (far - pfar);
        }
    }
    unreachable!("the last point rejects everything")
}

fn random_records(rng: &mut StdRng, n: usize, grid: bool) -> Vec<ScoreRecord> {
    let mut pairs: Vec<(f32, Label)> = (0..n)
        .map(|_| {
            let l = if rng.random::<bool>() { Label::Bonafide } else { Label::Spoof };
            let s = if grid {
                rng.random_range(-40..=40) as f32 / 8.0
            } else {
                rng.random_range(-3.0f32..3.0)
            };
            (s, l)
        })
        .collect();
    pairs[0].1 = Label::Bonafide;
    pairs[1].1 = Label::Spoof;
    recs(&pairs)
}

#[test]
fn three_by_three_example() {
    use Label::*;
    let r = recs(&[(0.9, Bonafide), (0.8, Bonafide), (0.3, Bonafide), (0.7, Spoof), (0.2, Spoof), (0.1, Spoof)]);
    let e = eer(&r).unwrap();
    assert!((e.eer - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(e.eer, brute_force_eer(&r));
}

#[test]
fn one_above_one_reaches_zero_zero() {
    let r = recs(&[(0.8, Label::Bonafide), (0.2, Label::Spoof)]);
    let pts = det_points(&r).unwrap();
    assert!(pts.iter().any(|p| p.far == 0.0 && p.frr == 0.0));
    assert_eq!(eer(&r).unwrap().eer, 0.0);
}

#[test]
fn random_labels_on_identical_scores() {
    let mut rng = StdRng::seed_from_u64(1);
    for _ in 0..20 {
        let n = rng.random_range(2..50);
        let pairs: Vec<(f32, Label)> = (0..n)
            .map(|i| (0.3, if i == 0 || (i > 1 && rng.random::<bool>()) { Label::Bonafide } else { Label::Spoof }))
            .collect();
        assert_eq!(eer(&recs(&pairs)).unwrap().eer, 0.5);
    }
}

#[test]
fn det_points_match_brute_force_on_1000_scores() {
    let mut rng = StdRng::seed_from_u64(2);
    let r = random_records(&mut rng, 1000, false);
    let got: Vec<(f64, f64, f64)> = det_points(&r)
        .unwrap()
        .into_iter()
        .map(|p| (p.far, p.frr, p.threshold))
        .collect();
    assert_eq!(got, brute_force_points(&r));
}

#[test]
fn eer_matches_brute_force_on_200_instances() {
    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..200 {
        let n = rng.random_range(2..120);
        let r = random_records(&mut rng, n, i % 2 == 0);
        assert_eq!(eer(&r).unwrap().eer, brute_force_eer(&r), "instance {i}");
    }
}

#[test]
fn far_plus_frr_at_threshold_is_twice_eer() {
    let mut rng = StdRng::seed_from_u64(4);
    for _ in 0..50 {
        let r = random_records(&mut rng, 400, false);
        let e = eer(&r).unwrap();
        let pts = det_points(&r).unwrap();
        // Bracketing points around the reported threshold.
        let hi = pts.iter().position(|p| p.threshold >= e.threshold).unwrap();
        let lo = hi.saturating_sub(1);
        let sum = |i: usize| pts[i].far + pts[i].frr;
        let (a, b) = (sum(lo).min(sum(hi)), sum(lo).max(sum(hi)));
        assert!(2.0 * e.eer >= a - 1e-12 && 2.0 * e.eer <= b + 1e-12, "{a} {} {b}", 2.0 * e.eer);
    }
}

fn flip(r: &[ScoreRecord], negate: bool) -> Vec<ScoreRecord> {
    r.iter()
        .map(|x| ScoreRecord {
            utt_id: x.utt_id.clone(),
            score: if negate { -x.score } else { x.score },
            label: x.label.map(Label::flipped),
        })
        .collect()
}

proptest! {
    #[test]
    fn invariant_under_increasing_transform(seed in 0u64..10_000, n in 2usize..80) {
        let mut rng = StdRng::seed_from_u64(seed);
        let r = random_records(&mut rng, n, true);
        let base = eer(&r).unwrap().eer;
        // Grid scores keep both transforms exact in f32.
        for f in [|s: f32| 3.0 * s + 2.0, |s: f32| s * s * s] {
            let t: Vec<ScoreRecord> = r.iter().map(|x| ScoreRecord { score: f(x.score), ..x.clone() }).collect();
            prop_assert!((eer(&t).unwrap().eer - base).abs() < 1e-12);
        }
    }

    #[test]
    fn swapping_labels_and_negating_scores(seed in 0u64..10_000, n in 2usize..80, grid in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let r = random_records(&mut rng, n, grid);
        let a = eer(&r).unwrap().eer;
        let b = eer(&flip(&r, true)).unwrap().eer;
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn bounded_and_complementary(seed in 0u64..10_000, n in 2usize..80, grid in any::<bool>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let r = random_records(&mut rng, n, grid);
        let a = eer(&r).unwrap().eer;
        let b = eer(&flip(&r, false)).unwrap().eer;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() < 1e-12);
        prop_assert!(a.min(b) <= 0.5 + 1e-12);
    }

    #[test]
    fn det_is_monotone(seed in 0u64..10_000, n in 2usize..80) {
        let mut rng = StdRng::seed_from_u64(seed);
        let pts = det_points(&random_records(&mut rng, n, true)).unwrap();
        for w in pts.windows(2) {
            prop_assert!(w[1].far <= w[0].far && w[1].frr >= w[0].frr && w[1].threshold > w[0].threshold);
        }
    }
}
