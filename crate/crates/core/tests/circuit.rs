use cfzero::circuit::{find_circuit_features, transient, S11Evaluator, TransientOptions};
use cfzero::metrics::{EvalTime, Strategy};
use cfzero::protocol::{plan_circuit, run_circuit, DriveSpec};
use cfzero::pulse::gaussian_waveform;
use cfzero::response::{DominantMode, FeatureKind};
use cfzero::{CircuitParams, ComplexFreq};
use num_complex::Complex64;

const FLUX_QUANTUM: f64 = 2.067_833_848e-15;

#[test]
fn undriven_lossless_circuit_conserves_energy() {
    let p = CircuitParams::reference();
    let silent = gaussian_waveform(
        p.bare_frequencies()[0],
        Complex64::new(0.0, 0.0),
        1e-9,
        0.0,
        (0.0, 1e-9),
    )
    .unwrap();
    let opts = TransientOptions {
        phi0: [0.05 * FLUX_QUANTUM, 0.0, -0.02 * FLUX_QUANTUM],
        ..Default::default()
    };
    let drift = |dt: f64| {
        let tr = transient(&p, &silent, (0.0, 20e-9), &TransientOptions { dt, ..opts }).unwrap();
        let start: f64 = tr.e_qubit[0].iter().sum();
        assert!(start > 0.0);
        let k = tr.t.len() - 1;
        assert_eq!(tr.e_in[k], 0.0);
        assert_eq!(tr.e_diss[k], 0.0);
        // the displaced qubits radiate through the port; stored plus radiated stays fixed
        assert!(tr.e_refl[k] > 0.0);
        let d = ((tr.ledger.stored_final + tr.e_refl[k]) / start - 1.0).abs();
        assert!((d - tr.ledger.residual.abs() / start).abs() < 1e-9);
        d
    };
    let (coarse, fine) = (drift(1e-12), drift(0.5e-12));
    assert!(coarse < 1e-5, "drift {coarse:e}");
    // fourth-order integrator: halving the step cuts the drift by about 16
    assert!(fine < coarse / 8.0, "drift {coarse:e} -> {fine:e}");
}

#[test]
fn weak_tone_steady_state_matches_small_signal_reflection() {
    let p = CircuitParams::reference_lossy();
    let ev = S11Evaluator::new(&p).unwrap();
    let zero = find_circuit_features(&p, FeatureKind::Zero)
        .unwrap()
        .into_iter()
        .find(|f| f.dominant == Some(DominantMode::Qubit(1)))
        .unwrap();
    for w in [zero.location.re, p.bare_frequencies()[0], 1.003 * zero.location.re] {
        // a Gaussian much longer than every mode lifetime is a quasi-steady tone at its peak
        let sigma = 1.5e-6;
        let span = (-3.0 * sigma, 0.0);
        let tone = gaussian_waveform(w, Complex64::new(1e-10, 0.0), sigma, 0.0, span).unwrap();
        let tr = transient(&p, &tone, span, &TransientOptions::default()).unwrap();
        assert!(!tr.violates_guard());
        let k = tr.t.len() - 1;
        let (mut num, mut den) = (0.0, 0.0);
        for i in k - 200..=k {
            num += tr.v_minus[i] * tr.v_minus[i];
            den += tr.v_plus[i] * tr.v_plus[i];
        }
        let measured = (num / den).sqrt();
        let expected = ev.eval(ComplexFreq::real(w)).unwrap().norm();
        assert!(
            (measured / expected - 1.0).abs() < 0.01,
            "at {w:e}: transient {measured}, small-signal {expected}"
        );
    }
}

#[test]
fn uncoupled_qubits_leave_no_qubit_features() {
    let p = CircuitParams::reference().with_coupling_caps([0.0; 3]).unwrap();
    let zeros = find_circuit_features(&p, FeatureKind::Zero).unwrap();
    assert!(
        zeros
            .iter()
            .all(|f| !matches!(f.dominant, Some(DominantMode::Qubit(_)))),
        "{zeros:?}"
    );
}

#[test]
fn circuit_cf_beats_gaussian_on_every_target() {
    let p = CircuitParams::reference();
    for q in 1..=3 {
        let s = |st| {
            let d = plan_circuit(&p, &DriveSpec::new(st, q).with_ramp_cycles(0.0)).unwrap();
            run_circuit(&p, &d, &TransientOptions::default(), EvalTime::EndOfDrive)
                .unwrap()
                .metrics
                .selectivity[q - 1]
        };
        assert!(s(Strategy::Zero) > s(Strategy::ZeroRealPart), "target {q}");
    }
}
