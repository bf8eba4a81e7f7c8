use cfzero::bloch::{integrate, BlochOptions, Mode};
use cfzero::circuit::S11Evaluator;
use cfzero::metrics::{crosstalk_ratio, crosstalk_row, selectivity};
use cfzero::model::{q_from_tau_r, tau_r_from_q};
use cfzero::poly::{roots, Poly};
use cfzero::pulse::{cf_waveform, gaussian_default, match_energy, Waveform};
use cfzero::response::{bloch_features, Reflector};
use cfzero::{BlochParams, CircuitParams, ComplexFreq, QConvention};
use num_complex::Complex64;
use proptest::prelude::*;

fn eta() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(0.01f64..100.0)
}

/// Midpoint-rule `∫|s|²` over the window; the window edges are never sampled.
fn numeric_energy(w: &Waveform) -> f64 {
    let (a, b) = w.window();
    let n = 20_000;
    let h = (b - a) / n as f64;
    h * (0..n).map(|k| w.eval(a + h * (k as f64 + 0.5)).norm_sqr()).sum::<f64>()
}

fn lossless_bloch(detune: [f64; 2], g_scale: f64, q: f64) -> BlochParams {
    let base = BlochParams::reference();
    let wc = base.omega_c();
    let wa = [wc, wc * (1.0 + detune[0]), wc * (1.0 + detune[0] + detune[1])];
    let tau_r = tau_r_from_q(wc, q, QConvention::EnergyDecay).unwrap();
    BlochParams::new(wc, wa, [wc * g_scale; 3], tau_r, None, [0.0; 3]).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn selectivity_sums_to_one(e in eta()) {
        let s = selectivity(&e).unwrap();
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_scale_invariant(e in eta(), k in 1e-3f64..1e3, t in 0usize..3) {
        let scaled = e.map(|x| x * k);
        let (s0, s1) = (selectivity(&e).unwrap(), selectivity(&scaled).unwrap());
        let (c0, c1) = (crosstalk_row(&e, t).unwrap(), crosstalk_row(&scaled, t).unwrap());
        for i in 0..3 {
            prop_assert!((s0[i] - s1[i]).abs() <= 1e-12 * s0[i].max(1.0));
            prop_assert!((c0[i] - c1[i]).abs() <= 1e-12 * c0[i].max(1.0));
        }
    }

    #[test]
    fn metrics_follow_qubit_permutation(e in eta(), t in 0usize..3, perm in Just([2usize, 0, 1])) {
        // qubit i moves to slot perm[i]
        let mut moved = [0.0; 3];
        for i in 0..3 {
            moved[perm[i]] = e[i];
        }
        let (s, sp) = (selectivity(&e).unwrap(), selectivity(&moved).unwrap());
        let (c, cp) = (crosstalk_row(&e, t).unwrap(), crosstalk_row(&moved, perm[t]).unwrap());
        for i in 0..3 {
            prop_assert!((s[i] - sp[perm[i]]).abs() < 1e-15);
            prop_assert!((c[i] - cp[perm[i]]).abs() < 1e-12 * c[i].max(1.0));
        }
        let (x, y) = (crosstalk_ratio(&e, t).unwrap(), crosstalk_ratio(&moved, perm[t]).unwrap());
        prop_assert_eq!(x.infinite, y.infinite);
        prop_assert!((x.value - y.value).abs() <= 1e-12 * x.value.max(1.0));
    }

    #[test]
    fn quality_factor_round_trips(q in 1.0f64..1e5, wc in 1.0f64..100.0, amp in any::<bool>()) {
        let conv = if amp { QConvention::AmplitudeDecay } else { QConvention::EnergyDecay };
        let back = q_from_tau_r(wc, tau_r_from_q(wc, q, conv).unwrap(), conv);
        prop_assert!((back / q - 1.0).abs() < 1e-13);
    }

    #[test]
    fn energy_matching_hits_target(
        re in 30.0f64..40.0, im in -0.3f64..-0.01, target in 1e-3f64..10.0, gauss in any::<bool>()
    ) {
        let w = if gauss {
            gaussian_default(re, Complex64::new(0.7, 0.2), 1.0 / (2.0 * std::f64::consts::PI.sqrt() * im.abs()), 0.0).unwrap()
        } else {
            cf_waveform(ComplexFreq::new(re, im), Complex64::new(0.3, -0.4), 0.0, 4.0 / im.abs(), 0.0).unwrap()
        };
        let m = match_energy(&w, target).unwrap();
        prop_assert!((m.energy / target - 1.0).abs() < 1e-12);
        prop_assert!((numeric_energy(&m) / target - 1.0).abs() < 1e-4);
        let again = match_energy(&m, target).unwrap();
        prop_assert_eq!(again, m);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lossless_zeros_are_conjugate_poles(d1 in 0.003f64..0.02, d2 in 0.003f64..0.02, g in 0.003f64..0.02, q in 10.0f64..100.0) {
        let p = lossless_bloch([d1, d2], g, q);
        let (poles, zeros) = bloch_features(&p).unwrap();
        prop_assert_eq!(poles.len(), 4);
        prop_assert_eq!(zeros.len(), 4);
        for z in &zeros {
            prop_assert!(z.location.is_growing());
            let d = poles.iter().map(|p| z.location.distance(p.location.conj())).fold(f64::INFINITY, f64::min);
            prop_assert!(d < 1e-9 * p.omega_c(), "distance {}", d);
        }
    }

    #[test]
    fn lossless_reflection_is_unitary(d1 in 0.003f64..0.02, d2 in 0.003f64..0.02, g in 0.003f64..0.02, x in -0.1f64..0.1) {
        let p = lossless_bloch([d1, d2], g, 31.0);
        let r = Reflector::new(&p).unwrap().eval(ComplexFreq::real(p.omega_c() * (1.0 + x))).unwrap();
        prop_assert!((r.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lossless_circuit_is_unitary(scale in 0.7f64..1.3, x in 0.5f64..1.5) {
        let base = CircuitParams::reference();
        let p = base.clone().with_coupling_caps(base.c_c().map(|c| c * scale)).unwrap();
        let w = p.bare_frequencies()[0] * x;
        let r = S11Evaluator::new(&p).unwrap().eval(ComplexFreq::real(w)).unwrap();
        prop_assert!((r.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn roots_rebuild_their_polynomial(
        rs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 1..7), lead in 0.5f64..3.0
    ) {
        let rs: Vec<Complex64> = rs.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
        let p = Poly::from_roots(Complex64::new(lead, 0.0), &rs);
        let found = roots(&p).unwrap();
        prop_assert_eq!(found.len(), rs.len());
        let rebuilt = Poly::from_roots(p.leading(), &found);
        for (a, b) in p.coeffs().iter().zip(rebuilt.coeffs()) {
            prop_assert!((a - b).norm() < 1e-6 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn ledger_closes_for_random_drives(re in 35.0f64..37.0, im in -0.2f64..-0.02, energy in 0.01f64..1.0, nonlinear in any::<bool>()) {
        let p = BlochParams::reference();
        let w = cf_waveform(ComplexFreq::new(re, im), Complex64::new(1.0, 0.0), 0.0, 4.0 / im.abs(), 0.0).unwrap();
        let w = match_energy(&w, energy).unwrap();
        let mode = if nonlinear { Mode::Nonlinear } else { Mode::Linearized };
        let tr = integrate(&p, &w, (0.0, 6.0 / im.abs()), &BlochOptions { mode, ..Default::default() }).unwrap();
        prop_assert!(tr.ledger.residual.abs() < 1e-3 * tr.ledger.e_in);
    }
}
