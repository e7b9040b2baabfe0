use jva_core::jva::{classify_frame, JvaConfig, ScaleMode};
use jva_core::model::{FrameRecord, GazeObservation, Point2D};
use jva_core::stats::{anova_oneway, f_tail_p, pearson, regularized_beta, summarize};
use jva_core::synth::moment_matched;
use proptest::prelude::*;

fn groups() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2..12), 2..5)
}

fn paired(n: std::ops::Range<usize>) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    n.prop_flat_map(|len| {
        (
            prop::collection::vec(-1e3f64..1e3, len),
            prop::collection::vec(-1e3f64..1e3, len),
        )
    })
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn anova_is_invariant_under_shift_and_scale(data in groups(), shift in -1e3f64..1e3, scale in 0.01f64..100.0) {
        let Ok(base) = anova_oneway(&data) else { return Ok(()) };
        prop_assume!(base.ss_within > 1e-6 && base.ss_between > 1e-6);
        let moved: Vec<Vec<f64>> = data.iter().map(|g| g.iter().map(|x| shift + scale * x).collect()).collect();
        let moved = anova_oneway(&moved).unwrap();
        prop_assert!(close(base.f, moved.f, 1e-6), "{} vs {}", base.f, moved.f);
        prop_assert!(close(base.eta_squared, moved.eta_squared, 1e-6));
    }

    #[test]
    fn omega_squared_never_exceeds_eta_squared(data in groups()) {
        if let Ok(a) = anova_oneway(&data) {
            prop_assert!(a.omega_squared <= a.eta_squared + 1e-12);
            prop_assert!((0.0..=1.0).contains(&a.eta_squared));
            prop_assert!((0.0..=1.0).contains(&a.p));
        }
    }

    #[test]
    fn pearson_is_affine_invariant((x, y) in paired(3..30), a in 0.1f64..10.0, b in -100f64..100.0) {
        let Ok(base) = pearson(&x, &y) else { return Ok(()) };
        prop_assume!(base.r.abs() < 0.999_999);
        let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let same = pearson(&scaled, &y).unwrap();
        prop_assert!((base.r - same.r).abs() < 1e-9);
        let flipped: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        let flipped = pearson(&flipped, &y).unwrap();
        prop_assert!((base.r + flipped.r).abs() < 1e-9);
        prop_assert!((base.p - flipped.p).abs() < 1e-9);
    }

    #[test]
    fn tail_probability_decreases_in_f(f in 0.0f64..50.0, step in 1e-3f64..10.0, df1 in 1u32..10, df2 in 1u32..200) {
        let lo = f_tail_p(f, df1, df2).unwrap();
        let hi = f_tail_p(f + step, df1, df2).unwrap();
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi <= lo + 1e-12, "p({f}) = {lo} < p({}) = {hi}", f + step);
    }

    #[test]
    fn incomplete_beta_reflection(a in 0.1f64..50.0, b in 0.1f64..50.0, x in 0.0f64..=1.0) {
        let lhs = regularized_beta(a, b, x).unwrap();
        let rhs = 1.0 - regularized_beta(b, a, 1.0 - x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn moment_matching_hits_requested_moments(n in 2usize..200, mean in -1e4f64..1e4, sd in 0.0f64..1e3) {
        let s = summarize(&moment_matched(n, mean, sd).unwrap()).unwrap();
        prop_assert!((s.mean - mean).abs() <= 1e-9 * mean.abs().max(1.0));
        prop_assert!((s.sd - sd).abs() <= 1e-9 * sd.max(1.0));
    }

    #[test]
    fn diagonal_scaling_matches_absolute_at_reference(d in 0.0f64..200.0) {
        // With the reference set to the frame diagonal the scale factor is 1.
        let (w, h) = (2560u32, 1440u32);
        let frame = FrameRecord::new("f", 0.0, w, h)
            .with_observation(GazeObservation::new("a", Point2D::new(1000.0, 700.0)))
            .with_observation(GazeObservation::new("b", Point2D::new(1000.0 + d, 700.0)));
        let abs = JvaConfig::default();
        let scaled = JvaConfig { scale_mode: ScaleMode::DiagonalNormalized, reference_diagonal: frame.diagonal(), ..abs };
        prop_assert_eq!(classify_frame(&frame, &abs).is_jva, classify_frame(&frame, &scaled).is_jva);
    }
}
