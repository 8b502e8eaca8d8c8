use proptest::collection::vec;
use proptest::prelude::*;

use freqmia::diffusion::{ddim_denoise_chain, ddim_reverse_chain, ConstantDenoiser, NoiseSchedule};
use freqmia::evaluation::{
    auc, compute_asr, compute_roc, membership_advantage, proposition_constraint, tpr_at_fpr, PropositionInputs,
    ScoreSet,
};
use freqmia::spectral::{apply_filter, build_mask, forward_dft, high_frequency_content, inverse_dft};
use freqmia::{FilterSpec, ImageTensor};

fn image(max_side: usize) -> impl Strategy<Value = ImageTensor> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(h, w)| {
        vec(-3.0..3.0f64, h * w).prop_map(move |d| ImageTensor::new(1, h, w, d).unwrap())
    })
}

fn image_pair(max_side: usize) -> impl Strategy<Value = (ImageTensor, ImageTensor)> {
    (1..=max_side, 1..=max_side).prop_flat_map(|(h, w)| {
        (vec(-3.0..3.0f64, h * w), vec(-3.0..3.0f64, h * w)).prop_map(move |(a, b)| {
            (ImageTensor::new(1, h, w, a).unwrap(), ImageTensor::new(1, h, w, b).unwrap())
        })
    })
}

fn filter() -> impl Strategy<Value = FilterSpec> {
    (0.0..=1.0f64, 0.0..12.0f64).prop_map(|(s, r)| FilterSpec::new(s, r).unwrap())
}

/// Scores on a coarse grid so ties are common.
fn scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (vec(-20i32..20, 1..40), vec(-20i32..20, 1..40)).prop_map(|(m, h)| {
        (
            m.into_iter().map(|v| v as f64 / 4.0).collect(),
            h.into_iter().map(|v| v as f64 / 4.0).collect(),
        )
    })
}

fn balanced_scores() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| {
        (vec(-20i32..20, n), vec(-20i32..20, n)).prop_map(|(m, h)| {
            (
                m.into_iter().map(|v| v as f64 / 4.0).collect(),
                h.into_iter().map(|v| v as f64 / 4.0).collect(),
            )
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dft_is_linear((x, y) in image_pair(10), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let lhs = forward_dft(&x.lin_comb(a, &y, b));
        let fx = forward_dft(&x);
        let fy = forward_dft(&y);
        for ((l, p), q) in lhs.coeffs().iter().zip(fx.coeffs()).zip(fy.coeffs()) {
            prop_assert!((l - (p * a + q * b)).norm() < 1e-9);
        }
    }

    #[test]
    fn dft_round_trip_and_parseval(x in image(12)) {
        let spec = forward_dft(&x);
        prop_assert!(inverse_dft(&spec).max_abs_diff(&x) < 1e-9);
        let spatial: f64 = x.data().iter().map(|v| v * v).sum();
        let n = (x.height() * x.width()) as f64;
        prop_assert!((spatial - spec.energy() / n).abs() <= 1e-9 * spatial.max(1.0));
    }

    #[test]
    fn filter_never_adds_energy(x in image(12), f in filter()) {
        prop_assert!(apply_filter(&x, &f).l2_norm() <= x.l2_norm() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn unit_attenuation_is_identity(x in image(12), r in 0.0..12.0f64) {
        let f = FilterSpec::new(1.0, r).unwrap();
        prop_assert!(apply_filter(&x, &f).max_abs_diff(&x) < 1e-12);
    }

    #[test]
    fn filter_is_linear((x, y) in image_pair(10), f in filter(), a in -2.0..2.0f64) {
        let lhs = apply_filter(&x.lin_comb(a, &y, 1.0), &f);
        let rhs = apply_filter(&x, &f).lin_comb(a, &apply_filter(&y, &f), 1.0);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-9);
    }

    #[test]
    fn mask_takes_two_values(f in filter(), h in 1usize..20, w in 1usize..20) {
        let m = build_mask(&f, h, w);
        for u in 0..h {
            for v in 0..w {
                let val = m.get(u, v);
                prop_assert!(val == 1.0 || val == f.s);
            }
        }
    }

    #[test]
    fn hf_content_is_a_fraction(x in image(12), b in 0.0..10.0f64) {
        let hf = high_frequency_content(&x, b);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&hf));
    }

    #[test]
    fn auc_equals_pairwise_statistic((m, h) in scores()) {
        let set = ScoreSet::new(m.clone(), h.clone()).unwrap();
        let mut u = 0.0;
        for a in &m {
            for b in &h {
                u += if a < b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        u /= (m.len() * h.len()) as f64;
        prop_assert!((auc(&compute_roc(&set).unwrap()) - u).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone_with_fixed_endpoints((m, h) in scores()) {
        let roc = compute_roc(&ScoreSet::new(m, h).unwrap()).unwrap();
        let p = &roc.points;
        prop_assert_eq!((p[0].fpr, p[0].tpr), (0.0, 0.0));
        let last = p.last().unwrap();
        prop_assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        for w in p.windows(2) {
            prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
        }
    }

    #[test]
    fn asr_dominates_every_fixed_threshold((m, h) in scores(), tau in -6.0..6.0f64) {
        let set = ScoreSet::new(m.clone(), h.clone()).unwrap();
        let (asr, _) = compute_asr(&set).unwrap();
        let tpr = m.iter().filter(|&&s| s <= tau).count() as f64 / m.len() as f64;
        let fpr = h.iter().filter(|&&s| s <= tau).count() as f64 / h.len() as f64;
        prop_assert!(asr + 1e-12 >= (tpr + 1.0 - fpr) / 2.0);
        prop_assert!(asr >= 0.5);
    }

    #[test]
    fn advantage_at_best_threshold_is_twice_asr_minus_one((m, h) in balanced_scores()) {
        let set = ScoreSet::new(m, h).unwrap();
        let (asr, tau) = compute_asr(&set).unwrap();
        prop_assert!((membership_advantage(&set, tau).unwrap() - (2.0 * asr - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn tpr_budget_is_monotone((m, h) in scores(), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let roc = compute_roc(&ScoreSet::new(m, h).unwrap()).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(tpr_at_fpr(&roc, lo) <= tpr_at_fpr(&roc, hi));
        prop_assert_eq!(tpr_at_fpr(&roc, 1.0), 1.0);
    }

    #[test]
    fn monotone_transforms_preserve_metrics((m, h) in scores(), scale in 0.1..5.0f64, shift in -3.0..3.0f64) {
        let g = |v: &f64| (scale * v + shift).exp();
        let a = ScoreSet::new(m.clone(), h.clone()).unwrap();
        let b = ScoreSet::new(m.iter().map(g).collect(), h.iter().map(g).collect()).unwrap();
        let (ra, rb) = (compute_roc(&a).unwrap(), compute_roc(&b).unwrap());
        prop_assert_eq!(compute_asr(&a).unwrap().0, compute_asr(&b).unwrap().0);
        prop_assert_eq!(auc(&ra), auc(&rb));
        prop_assert_eq!(tpr_at_fpr(&ra, 0.01), tpr_at_fpr(&rb, 0.01));
        let va: Vec<_> = ra.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        let vb: Vec<_> = rb.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        prop_assert_eq!(va, vb);
    }

    #[test]
    fn positive_delta_keeps_f_below_one(l_m in 0.01..5.0f64, delta in 1e-3..3.0f64, h_h in 0.05..5.0f64, k in 0.0..3.0f64) {
        let c = proposition_constraint(&PropositionInputs::from_delta_k(l_m, delta, k, h_h).unwrap()).unwrap();
        prop_assert!(c.f < 1.0);
        let flat = proposition_constraint(&PropositionInputs::from_delta_k(l_m, 0.0, k, h_h).unwrap()).unwrap();
        prop_assert_eq!(flat.f, 1.0);
    }

    #[test]
    fn ddim_chains_invert_under_a_constant_stub(x in image(6), steps in 1usize..10, stride in 1usize..20) {
        let sched = NoiseSchedule::linear(1000, 1e-4, 0.02).unwrap();
        let eps = x.map(|v| (3.0 * v).sin());
        let den = ConstantDenoiser(eps);
        let end = steps * stride;
        let up = ddim_reverse_chain(&x, 0, end, &den, &sched, stride).unwrap();
        let back = ddim_denoise_chain(&up, end, 0, &den, &sched, stride).unwrap();
        prop_assert!(back.max_abs_diff(&x) < 1e-6);
    }

    #[test]
    fn linear_schedule_is_strictly_decreasing(t in 2usize..2000, lo in 1e-5..0.01f64, span in 0.0..0.05f64) {
        let s = NoiseSchedule::linear(t, lo, lo + span).unwrap();
        let ab = s.alpha_bar();
        prop_assert!(ab.iter().all(|&a| a > 0.0 && a < 1.0));
        prop_assert!(ab.windows(2).all(|w| w[1] < w[0]));
    }
}
