mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use hyperpol::analytic::{self, kraus_approx, lambda, stable_polarization};
use hyperpol::catalog::{catalog, method_one, Method, Sign, TwoPulseResonance};
use hyperpol::exact::{apply_channel, cycle_unitary, kraus, simulate, DensityMatrix2};
use hyperpol::linalg::unitarity_defect;
use hyperpol::sequence::{render_unit, PulseModel, SequenceParams, SystemParams};
use proptest::prelude::*;

fn sequence_strategy() -> impl Strategy<Value = (SystemParams, SequenceParams)> {
    (
        0.3f64..3.0,
        0.0f64..0.3,
        -0.3f64..0.3,
        1u32..=8,
        0.1f64..3.0,
        (0.0f64..2.0, 0.0f64..2.0, 0.0f64..2.0),
        1u32..=8,
    )
        .prop_map(|(omega, a_perp, a_z, n_p, tau, (s, w, c), n_r)| {
            let u = PI / omega;
            (
                SystemParams::new(omega, a_perp, a_z),
                SequenceParams::new(n_p, tau * u, s * u, w * u, c * u, n_r),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn propagator_is_unitary((sys, seq) in sequence_strategy()) {
        let u = cycle_unitary(&sys, &seq).unwrap();
        prop_assert!(unitarity_defect(&u) <= 1e-11);
        let k = kraus(&u).unwrap();
        prop_assert!(k.cptp_defect() <= 1e-12);
    }

    #[test]
    fn channel_preserves_trace_and_positivity((sys, seq) in sequence_strategy(), z in -1.0f64..1.0) {
        let k = kraus(&cycle_unitary(&sys, &seq).unwrap()).unwrap();
        let mut rho = DensityMatrix2::from_bloch([0.0, 0.0, z]).unwrap();
        for _ in 0..50 {
            let next = apply_channel(&k, &rho);
            let drift = next.matrix().trace().re - rho.matrix().trace().re;
            prop_assert!(drift.abs() <= 1e-12, "trace drift {drift:e}");
            let r = next.bloch();
            prop_assert!((r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt() <= 1.0 + 1e-10);
            rho = next;
        }
    }

    #[test]
    fn total_duration_matches_period((_sys, seq) in sequence_strategy(), tp in 0.01f64..0.1) {
        let tl = render_unit(&seq).unwrap();
        prop_assert!((tl.total_duration() - seq.nominal_cycle()).abs() < 1e-9);
        let fin = seq.with_pulse_model(PulseModel::Finite { tau_pi: tp * seq.tau });
        let tl = render_unit(&fin).unwrap();
        prop_assert!((tl.total_duration() - fin.actual_cycle()).abs() < 1e-9);
    }

    #[test]
    fn approximate_kraus_is_trace_preserving(a in -10.0f64..10.0, th in 0.0f64..7.0, ph in 0.0f64..20.0, n_r in 1u32..10) {
        prop_assert!(kraus_approx(a, th, ph, n_r).cptp_defect() <= 1e-14);
    }

    #[test]
    fn swapping_sin_and_cos_flips_polarization(a in -6.0f64..6.0, th in 0.0f64..7.0) {
        let p = stable_polarization(a, th);
        prop_assert!((p + stable_polarization(a, FRAC_PI_2 - th)).abs() <= 1e-12);
        prop_assert!((p + stable_polarization(a, th + FRAC_PI_2)).abs() <= 1e-12);
        prop_assert!(p.abs() <= 1.0);
    }

    #[test]
    fn analytic_series_is_monotone(a in 0.0f64..3.0, th in 0.0f64..7.0) {
        let l = lambda(a, th);
        prop_assert!((0.0..=1.0).contains(&l));
        let s = analytic::polarization_series(stable_polarization(a, th), l, 100);
        for w in s.values.windows(2) {
            prop_assert!(w[1].abs() + 1e-15 >= w[0].abs());
        }
    }
}

#[test]
fn catalog_rows_hit_the_axis_phase() {
    let sys = SystemParams::new(1.3, 0.05, 0.0);
    for row in catalog(12).unwrap() {
        let seq = row.sequence(sys.omega, 2, PulseModel::Ideal);
        let p = analytic::phases(&sys, &seq);
        let target = if row.sign == Sign::Plus { FRAC_PI_2 } else { 1.5 * PI };
        assert!((p.phi - target).abs() < 1e-12, "{row:?}: phi = {}", p.phi);
        if row.method == Method::II {
            assert_eq!((row.t_s, row.t_w, row.t_c), (0.into(), 0.into(), 0.into()));
        }
    }
}

#[test]
fn long_two_pulse_variant_polarizes() {
    let sys = SystemParams::new(1.0, 0.03, 0.0);
    for sign in [Sign::Plus, Sign::Minus] {
        let row = method_one(sign, 2, TwoPulseResonance::Long).unwrap();
        let seq = row.sequence(1.0, 1, PulseModel::Ideal);
        let a = analytic::evaluate(&sys, &seq);
        assert!((a.p_s - sign.value() as f64).abs() < 1e-9);
    }
}

/// Shifting one wait by a non-multiple of 2 pi/omega never increases |alpha|.
#[test]
fn method_one_waits_maximize_alpha() {
    let sys = SystemParams::new(1.0, 0.05, 0.0);
    for n_p in 1..=8 {
        for sign in [Sign::Plus, Sign::Minus] {
            let row = method_one(sign, n_p, TwoPulseResonance::Short).unwrap();
            let base = row.sequence(1.0, 3, PulseModel::Ideal);
            let a0 = analytic::alpha(&sys, &base).abs();
            for which in 0..3 {
                for step in 1..200 {
                    let d = step as f64 * 0.01 * PI;
                    let mut s = base;
                    match which {
                        0 => s.t_s += d,
                        1 => s.t_w += d,
                        _ => s.t_c += d,
                    }
                    let a = analytic::alpha(&sys, &s).abs();
                    assert!(a <= a0 + 1e-12, "n_p={n_p} {sign} wait {which} +{step}: {a} > {a0}");
                    if step == 200 {
                        assert!((a - a0).abs() < 1e-12);
                    }
                }
                let mut s = base;
                match which {
                    0 => s.t_s += 2.0 * PI,
                    1 => s.t_w += 2.0 * PI,
                    _ => s.t_c += 2.0 * PI,
                }
                assert!((analytic::alpha(&sys, &s).abs() - a0).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn exact_series_approaches_monotonically_at_magic_points() {
    let sys = SystemParams::new(1.0, 0.05, 0.0);
    for row in catalog(4).unwrap() {
        let seq = row.sequence(1.0, 2, PulseModel::Ideal);
        let k = kraus(&cycle_unitary(&sys, &seq).unwrap()).unwrap();
        let s = simulate(&k, &DensityMatrix2::maximally_mixed(), 300);
        let sign = row.sign.value() as f64;
        for w in s.values.windows(2) {
            assert!(sign * (w[1] - w[0]) >= -1e-12, "{row:?}");
        }
    }
}
