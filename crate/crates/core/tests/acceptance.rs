//! Acceptance suite. Each test prints one PASS/FAIL line; run with
//! `cargo test -p jva-core --test acceptance -- --nocapture` to see them.

use std::fs;

use jva_core::gaze::{self, cell_center, cell_of, decode_heatmap, field_value, multiscale_fields, Direction, Heatmap};
use jva_core::io;
use jva_core::jva::{classify_frame, score_sessions, JvaConfig};
use jva_core::model::{FrameRecord, GazeObservation, Point2D};
use jva_core::stats::{
    anova_from_summary, anova_oneway, cohens_d, correlation_f, f_tail_p, pooled_summary, GroupSummary,
};
use jva_core::synth::{self, moment_matched_groups, JvaProbability, LabelMode, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

struct Criterion {
    id: u8,
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(id: u8, name: &'static str) -> Self {
        Self {
            id,
            name,
            failures: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(detail());
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check((got - want).abs() <= tol, || {
            format!("{what}: got {got}, want {want} ± {tol}")
        });
    }

    fn finish(self) {
        let verdict = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {:>2}: {}", self.id, self.name);
        for f in &self.failures {
            println!("         {f}");
        }
        assert!(
            self.failures.is_empty(),
            "criterion {} failed: {:?}",
            self.id,
            self.failures
        );
    }
}

fn g(n: usize, mean: f64, sd: f64) -> GroupSummary {
    GroupSummary::new("", n, mean, sd).unwrap()
}

#[test]
fn c01_control_vs_experiment_jva() {
    let mut c = Criterion::new(1, "control vs experiment JVA ANOVA and Cohen's d");
    let (control, experiment) = (g(10, 31.30, 9.73), g(20, 45.55, 15.97));
    let a = anova_from_summary(&[control.clone(), experiment.clone()]).unwrap();
    c.near("F", a.f, 6.65, 0.05);
    c.check(a.df_between == 1 && a.df_within == 28, || {
        format!("df ({}, {})", a.df_between, a.df_within)
    });
    c.check(a.p < 0.05, || format!("p = {}", a.p));
    c.near("d", cohens_d(&control, &experiment).unwrap().abs(), 1.00, 0.02);
    c.finish();
}

#[test]
fn c02_three_condition_jva() {
    let mut c = Criterion::new(2, "three-condition JVA ANOVA");
    let a = anova_from_summary(&[g(10, 31.30, 9.73), g(10, 46.50, 15.43), g(10, 44.60, 17.28)]).unwrap();
    c.near("F", a.f, 3.26, 0.05);
    c.check(a.df_between == 2 && a.df_within == 27, || {
        format!("df ({}, {})", a.df_between, a.df_within)
    });
    c.near("p", a.p, 0.054, 0.004);
    c.finish();
}

#[test]
fn c03_post_test_group_comparison() {
    let mut c = Criterion::new(3, "post-test control vs experiment");
    let (control, experiment) = (g(10, 1.15, 0.95), g(20, 2.35, 1.20));
    let a = anova_from_summary(&[control.clone(), experiment.clone()]).unwrap();
    c.near("F", a.f, 7.56, 0.05);
    c.near("d", cohens_d(&control, &experiment).unwrap().abs(), 1.06, 0.02);
    c.finish();
}

#[test]
fn c04_gender_anovas() {
    let mut c = Criterion::new(4, "gender composition ANOVAs");
    let jva = anova_from_summary(&[g(15, 37.00, 15.05), g(7, 41.86, 16.72), g(8, 47.00, 15.46)]).unwrap();
    let post = anova_from_summary(&[g(15, 1.63, 1.29), g(7, 2.00, 1.04), g(8, 2.50, 1.28)]).unwrap();
    c.near("JVA F", jva.f, 1.10, 0.05);
    c.near("post-test F", post.f, 1.29, 0.05);
    for (name, a) in [("JVA", &jva), ("post-test", &post)] {
        c.check(a.df_between == 2 && a.df_within == 27, || {
            format!("{name} df ({}, {})", a.df_between, a.df_within)
        });
        c.check(a.p > 0.05, || format!("{name} p = {}", a.p));
    }
    c.finish();
}

#[test]
fn c05_correlation_identity() {
    let mut c = Criterion::new(5, "correlation F identity");
    let r = 0.50;
    let (f, p) = correlation_f(r, 30).unwrap();
    c.near("F", f, 9.33, 0.01);
    c.check(r * r == 0.25, || format!("r² = {}", r * r));
    c.near("p against F(1,28) tail", p, f_tail_p(f, 1, 28).unwrap(), 1e-15);
    c.finish();
}

#[test]
fn c06_grand_mean_totals() {
    let mut c = Criterion::new(6, "grand-mean totals from group summaries");
    let jva_condition = [g(10, 31.30, 9.73), g(10, 46.50, 15.43), g(10, 44.60, 17.28)];
    let jva_gender = [g(15, 37.00, 15.05), g(7, 41.86, 16.72), g(8, 47.00, 15.46)];
    let post_condition = [g(10, 1.15, 0.95), g(10, 2.35, 1.03), g(10, 2.35, 1.42)];
    let post_gender = [g(15, 1.63, 1.29), g(7, 2.00, 1.04), g(8, 2.50, 1.28)];
    for (name, groups, want) in [
        ("JVA by condition", &jva_condition, 40.80),
        ("JVA by gender", &jva_gender, 40.80),
        ("post-test by condition", &post_condition, 1.95),
        ("post-test by gender", &post_gender, 1.95),
    ] {
        let total = pooled_summary(groups).unwrap();
        c.check(total.n == 30, || format!("{name}: n = {}", total.n));
        c.near(name, total.mean, want, 0.005);
    }
    c.finish();
}

fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn c07_moment_matched_oracle_equivalence() {
    let mut c = Criterion::new(7, "raw-data ANOVA equals summary ANOVA on moment-matched samples");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let configs = 250;
    for case in 0..configs {
        let k = rng.random_range(2..=6);
        let spec: Vec<(usize, f64, f64)> = (0..k)
            .map(|_| {
                (
                    rng.random_range(2..=40),
                    rng.random_range(-100.0..100.0),
                    rng.random_range(0.5..50.0),
                )
            })
            .collect();
        let raw = moment_matched_groups(&spec).unwrap();
        let summaries: Vec<_> = spec.iter().map(|&(n, m, s)| g(n, m, s)).collect();
        let from_raw = anova_oneway(&raw).unwrap();
        let from_summary = anova_from_summary(&summaries).unwrap();
        for (what, a, b) in [
            ("F", from_raw.f, from_summary.f),
            ("p", from_raw.p, from_summary.p),
            ("SSB", from_raw.ss_between, from_summary.ss_between),
            ("SSW", from_raw.ss_within, from_summary.ss_within),
            ("eta²", from_raw.eta_squared, from_summary.eta_squared),
            ("omega²", from_raw.omega_squared, from_summary.omega_squared),
        ] {
            c.check(rel_close(a, b, 1e-9), || {
                format!("case {case} {what}: raw {a} vs summary {b}")
            });
        }
    }
    c.finish();
}

fn synth_round_trip(c: &mut Criterion, noise: f64, frames: usize, tolerance_pct: f64) {
    let probs: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let spec = SynthSpec {
        teams: probs.len(),
        frames_per_team: frames,
        jva_probability: JvaProbability::PerTeam(probs),
        label_mode: LabelMode::Bernoulli,
        gaze_noise_sigma: noise,
        seed: 2024,
        ..SynthSpec::default()
    };
    let out = synth::generate(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (frames_path, teams_path) = (dir.path().join("frames.csv"), dir.path().join("teams.csv"));
    io::write_frames(fs::File::create(&frames_path).unwrap(), &out.frames).unwrap();
    io::write_teams(fs::File::create(&teams_path).unwrap(), &out.teams).unwrap();

    let metas = io::load_teams(&teams_path).unwrap();
    let load = io::load_frames(&frames_path).unwrap();
    c.check(load.violations.is_empty(), || {
        format!("{} loader violations", load.violations.len())
    });
    let sessions = io::assemble_sessions(&metas, load.frames).unwrap();
    let cfg = JvaConfig::default();
    let scored = score_sessions(&sessions, &cfg);
    c.check(scored.len() == out.truth.teams.len(), || {
        format!("{} teams scored", scored.len())
    });

    for ((team, result), truth) in scored.iter().zip(&out.truth.teams) {
        let result = result.as_ref().unwrap();
        c.check(*team == truth.team_id, || {
            format!("team order {team} vs {}", truth.team_id)
        });
        let diff_pct = (result.jva_ratio - truth.ratio).abs() * 100.0;
        c.check(diff_pct <= tolerance_pct, || {
            format!(
                "noise {noise}: {team} ratio {} vs truth {} (p = {})",
                result.jva_ratio, truth.ratio, truth.probability
            )
        });
        if noise == 0.0 {
            let session = sessions.iter().find(|s| s.team_id() == team).unwrap();
            let labels: Vec<bool> = session.frames.iter().map(|f| classify_frame(f, &cfg).is_jva).collect();
            c.check(labels == truth.labels, || format!("{team}: per-frame labels differ"));
        }
    }
}

#[test]
fn c08_synthetic_round_trip() {
    let mut c = Criterion::new(8, "synth to files to analyze round trip");
    synth_round_trip(&mut c, 0.0, 1000, 0.0);
    synth_round_trip(&mut c, 20.0, 1000, 2.0);
    c.finish();
}

fn pair_frame(a: Point2D, b: Point2D) -> FrameRecord {
    FrameRecord::new("f", 0.0, 2560, 1440)
        .with_observation(GazeObservation::new("p1", a))
        .with_observation(GazeObservation::new("p2", b))
}

fn is_jva(a: Point2D, b: Point2D, threshold: f64) -> bool {
    classify_frame(&pair_frame(a, b), &JvaConfig::default().with_threshold(threshold)).is_jva
}

#[test]
fn c09_jva_properties() {
    let mut c = Criterion::new(9, "JVA monotonicity, symmetry, translation, strict boundary");
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cases = 2000;
    let point = |rng: &mut ChaCha8Rng| Point2D::new(rng.random_range(0.0..2560.0), rng.random_range(0.0..1440.0));
    let near = |rng: &mut ChaCha8Rng, p: Point2D| {
        let q = Point2D::new(
            p.x + rng.random_range(-250.0..250.0),
            p.y + rng.random_range(-250.0..250.0),
        );
        Point2D::new(q.x.clamp(0.0, 2560.0), q.y.clamp(0.0, 1440.0))
    };

    for case in 0..cases {
        let a = point(&mut rng);
        let b = near(&mut rng, a);
        let t1 = rng.random_range(1.0..300.0);
        let t2 = t1 + rng.random_range(0.0..300.0);
        c.check(!is_jva(a, b, t1) || is_jva(a, b, t2), || {
            format!("case {case}: monotonicity {a:?} {b:?} {t1} {t2}")
        });
        c.check(is_jva(a, b, t1) == is_jva(b, a, t1), || {
            format!("case {case}: swap {a:?} {b:?}")
        });

        // Integer coordinates keep the translated distance bit-identical.
        let (ia, ib) = (
            Point2D::new(a.x.round(), a.y.round()),
            Point2D::new(b.x.round(), b.y.round()),
        );
        let (dx, dy) = (rng.random_range(-500..=500) as f64, rng.random_range(-300..=300) as f64);
        let shift = |p: Point2D| Point2D::new((p.x + dx).clamp(0.0, 2560.0), (p.y + dy).clamp(0.0, 1440.0));
        let (sa, sb) = (shift(ia), shift(ib));
        if sa.x - ia.x == dx && sb.x - ib.x == dx && sa.y - ia.y == dy && sb.y - ib.y == dy {
            c.check(is_jva(ia, ib, t1) == is_jva(sa, sb, t1), || {
                format!("case {case}: translation by ({dx}, {dy})")
            });
        }

        // Pythagorean offsets land exactly on 100.0.
        let (ox, oy) = [(60.0, 80.0), (80.0, 60.0), (100.0, 0.0), (0.0, 100.0)][case % 4];
        let base = Point2D::new(rng.random_range(0..2400) as f64, rng.random_range(0..1300) as f64);
        let edge = Point2D::new(base.x + ox, base.y + oy);
        c.check(base.distance(&edge) == 100.0, || {
            format!("case {case}: distance {}", base.distance(&edge))
        });
        c.check(!is_jva(base, edge, 100.0), || {
            format!("case {case}: exactly 100 px counted as JVA")
        });
        let inside = Point2D::new(base.x + ox * 0.9999, base.y + oy * 0.9999);
        c.check(is_jva(base, inside, 100.0), || {
            format!("case {case}: 99.99 px not counted as JVA")
        });
    }
    c.finish();
}

/// Density of the F distribution, with the normalizing constant from statrs.
fn f_density(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let ln_beta = statrs::function::gamma::ln_gamma(d1 / 2.0) + statrs::function::gamma::ln_gamma(d2 / 2.0)
        - statrs::function::gamma::ln_gamma((d1 + d2) / 2.0);
    ((d1 / 2.0) * (d1 / d2).ln() + (d1 / 2.0 - 1.0) * x.ln() - ((d1 + d2) / 2.0) * (1.0 + d1 * x / d2).ln() - ln_beta)
        .exp()
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn step<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 60)
}

/// Upper tail by quadrature over `x = f + s / (1 - s)`, `s ∈ [0, 1)`.
fn tail_by_quadrature(f: f64, d1: f64, d2: f64) -> f64 {
    let integrand = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - s;
        f_density(f + s / u, d1, d2) / (u * u)
    };
    // Splitting near the mode keeps Simpson's error estimate honest.
    let knots = [0.0, 0.02, 0.1, 0.3, 0.6, 0.9, 1.0];
    knots
        .windows(2)
        .map(|w| adaptive_simpson(&integrand, w[0], w[1], 1e-13))
        .sum()
}

#[test]
fn c10_tail_probability_numerics() {
    let mut c = Criterion::new(10, "F tail against quadrature oracle and t identity");
    let fs = [0.1, 0.25, 0.5, 1.0, 1.5, 2.0, 3.26, 5.0, 6.65, 9.33, 12.0, 20.0];
    for &f in &fs {
        for d1 in [1u32, 2, 5] {
            for d2 in [5u32, 27, 28, 100] {
                let got = f_tail_p(f, d1, d2).unwrap();
                let want = tail_by_quadrature(f, d1.into(), d2.into());
                c.check((got - want).abs() <= 1e-8, || {
                    format!("F({d1},{d2}) at {f}: {got} vs quadrature {want}")
                });
            }
        }
    }
    for d2 in [5u32, 27, 28, 100] {
        let t = StudentsT::new(0.0, 1.0, d2.into()).unwrap();
        for &f in &fs {
            let got = f_tail_p(f, 1, d2).unwrap();
            let want = 2.0 * t.sf(f.sqrt());
            c.check((got - want).abs() <= 1e-9, || {
                format!("F(1,{d2}) at {f}: {got} vs two-sided t {want}")
            });
        }
    }
    c.finish();
}

#[test]
fn c11_inference_geometry() {
    let mut c = Criterion::new(11, "direction fields and heatmap decoding geometry");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = gaze::HEATMAP_SIZE;

    for case in 0..200 {
        let head = Point2D::new(rng.random_range(0.0..n as f64), rng.random_range(0.0..n as f64));
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let fields = multiscale_fields(head, (angle.cos(), angle.sin()), n, n, &[1.0, 2.0, 5.0]).unwrap();
        for pair in fields.windows(2) {
            let ok = pair[0].values().iter().zip(pair[1].values()).all(|(lo, hi)| hi <= lo);
            c.check(ok, || {
                format!(
                    "case {case}: field not monotone in exponent {} -> {}",
                    pair[0].exponent, pair[1].exponent
                )
            });
        }
    }

    for case in 0..2000 {
        let head = Point2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let point = Point2D::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let dir = Direction::from_angle(rng.random_range(0.0..std::f64::consts::TAU));
        let rot = rng.random_range(0.0..std::f64::consts::TAU);
        let shift = Point2D::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let (cr, sr) = (rot.cos(), rot.sin());
        let turn = |p: Point2D| Point2D::new(cr * p.x - sr * p.y + shift.x, sr * p.x + cr * p.y + shift.y);
        let turned_dir = Direction::new(cr * dir.x() - sr * dir.y(), sr * dir.x() + cr * dir.y()).unwrap();
        let gamma = [1.0, 2.0, 5.0][case % 3];
        let before = field_value(head, dir, gamma, point);
        let after = field_value(turn(head), turned_dir, gamma, turn(point));
        c.check((before - after).abs() <= 1e-9, || {
            format!("case {case}: rotation changed value {before} -> {after}")
        });
    }

    // Quarter turns of a square grid about an integer head cell permute cells exactly.
    for case in 0..50 {
        let (hc, hr) = (rng.random_range(0..n), rng.random_range(0..n));
        let head = Point2D::new(hc as f64, hr as f64);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let dir = (angle.cos(), angle.sin());
        let base = gaze::encode_direction_field(head, dir, 2.0, n, n).unwrap();
        let turned = gaze::encode_direction_field(head, (-dir.1, dir.0), 2.0, n, n).unwrap();
        let mut ok = true;
        for row in 0..n {
            for col in 0..n {
                let (dx, dy) = (col as i64 - hc as i64, row as i64 - hr as i64);
                let (tc, tr) = (hc as i64 - dy, hr as i64 + dx);
                if (0..n as i64).contains(&tc) && (0..n as i64).contains(&tr) {
                    ok &= (base.get(col, row) - turned.get(tc as usize, tr as usize)).abs() <= 1e-9;
                }
            }
        }
        c.check(ok, || {
            format!("case {case}: quarter-turn equivariance failed at head ({hc}, {hr})")
        });
    }

    for case in 0..2000 {
        let (w, h) = (rng.random_range(100.0..4000.0), rng.random_range(100.0..4000.0));
        let (col, row) = (rng.random_range(0..n), rng.random_range(0..n));
        let spike = Heatmap::spike(n, n, col, row, rng.random_range(0.1..10.0)).unwrap();
        let decoded = decode_heatmap(&spike, w, h).unwrap();
        c.check(cell_of(decoded, n, n, w, h) == (col, row), || {
            format!("case {case}: spike ({col}, {row}) did not round-trip")
        });
        c.check(decoded == cell_center(col, row, n, n, w, h), || {
            format!("case {case}: decode not at cell centre")
        });

        let target = Point2D::new(rng.random_range(0.0..w), rng.random_range(0.0..h));
        let (tc, tr) = cell_of(target, n, n, w, h);
        let back = decode_heatmap(&Heatmap::spike(n, n, tc, tr, 1.0).unwrap(), w, h).unwrap();
        c.check(
            (back.x - target.x).abs() <= w / n as f64 / 2.0 + 1e-9
                && (back.y - target.y).abs() <= h / n as f64 / 2.0 + 1e-9,
            || format!("case {case}: encode/decode moved {target:?} to {back:?}"),
        );
    }

    for case in 0..300 {
        let values: Vec<f64> = (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect();
        let map = Heatmap::new(n, n, values).unwrap();
        let k = rng.random_range(1e-3..1e3);
        c.check(map.argmax() == map.scaled(k).unwrap().argmax(), || {
            format!("case {case}: argmax moved under scale {k}")
        });
    }
    c.finish();
}
