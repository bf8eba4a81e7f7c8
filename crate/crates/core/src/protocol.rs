//! Drive planning and execution: pick the target's spectral feature by its
//! dominant-qubit label, build the pulse for a strategy, run the model, and
//! score the result.

use num_complex::Complex64;
use serde::Serialize;

use crate::bloch::{integrate, BlochOptions, Trajectory};
use crate::circuit::{
    drive_amplitude, find_circuit_features, transient, CircuitTrace, TransientOptions, DRIVE_FRACTION,
};
use crate::error::{Error, Result};
use crate::metrics::{
    efficiency_curves_bloch, efficiency_curves_circuit, report, EfficiencyCurves, EvalTime, MetricsReport, Strategy,
};
use crate::model::{BlochParams, CircuitParams, ComplexFreq};
use crate::pulse::{
    cf_waveform, gaussian_default, match_energy, matched_sigma, Waveform, DEFAULT_LIFETIMES, DEFAULT_RAMP_CYCLES,
};
use crate::response::{bloch_features, DominantMode, FeatureKind, SpectralFeature};

/// Injected excitation number for Bloch drives unless overridden.
pub const BLOCH_DEFAULT_ENERGY: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriveSpec {
    pub strategy: Strategy,
    /// 1-based target qubit.
    pub target: usize,
    /// CF window length in envelope lifetimes `1/|ω_i|`.
    pub lifetimes: f64,
    /// CF edge ramp in carrier cycles.
    pub ramp_cycles: f64,
    /// Pulse energy `∫|s|²`; the model default when absent.
    pub energy: Option<f64>,
}

impl DriveSpec {
    pub fn new(strategy: Strategy, target: usize) -> Self {
        Self {
            strategy,
            target,
            lifetimes: DEFAULT_LIFETIMES,
            ramp_cycles: DEFAULT_RAMP_CYCLES,
            energy: None,
        }
    }

    pub fn with_ramp_cycles(mut self, cycles: f64) -> Self {
        self.ramp_cycles = cycles;
        self
    }

    pub fn with_energy(mut self, energy: Option<f64>) -> Self {
        self.energy = energy;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.target) {
            return Err(Error::Config(format!("target qubit {} must be 1, 2 or 3", self.target)));
        }
        if !(self.lifetimes > 0.0) || !(self.ramp_cycles >= 0.0) {
            return Err(Error::Config(
                "pulse lifetimes must be positive and ramp cycles non-negative".into(),
            ));
        }
        if let Some(e) = self.energy {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::Config(format!("pulse energy must be positive, got {e}")));
            }
        }
        Ok(())
    }
}

/// A fully specified drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannedDrive {
    pub strategy: Strategy,
    pub target: usize,
    /// The target's reflection zero.
    pub zero: ComplexFreq,
    /// Frequency the pulse is built from.
    pub drive_freq: ComplexFreq,
    pub waveform: Waveform,
}

impl PlannedDrive {
    pub fn t_end(&self) -> f64 {
        self.waveform.window().1
    }
}

/// The feature dominated by qubit `target`; ties go to the higher share.
pub fn select_by_label(features: &[SpectralFeature], target: usize) -> Result<&SpectralFeature> {
    features
        .iter()
        .filter(|f| f.dominant == Some(DominantMode::Qubit(target as u8)))
        .max_by(|a, b| a.participation[target].total_cmp(&b.participation[target]))
        .ok_or_else(|| Error::Undefined(format!("no spectral feature is dominated by qubit {target}")))
}

fn cf_for(omega: ComplexFreq, spec: &DriveSpec, b0: Complex64) -> Result<Waveform> {
    if omega.im == 0.0 {
        return Err(Error::Domain("CF drive needs a complex frequency".into()));
    }
    let len = spec.lifetimes / omega.im.abs();
    let ramp = spec.ramp_cycles * 2.0 * std::f64::consts::PI / omega.re.abs();
    cf_waveform(omega, b0, 0.0, len, ramp)
}

/// Largest envelope factor a CF pulse reaches relative to `|b0|`.
fn cf_envelope_peak(w: &Waveform) -> f64 {
    match w.shape {
        crate::pulse::Shape::Cf { omega, t_on, t_off, .. } => (-omega.im * (t_off - t_on)).exp().max(1.0),
        crate::pulse::Shape::Gaussian { .. } => 1.0,
    }
}

fn plan(
    spec: &DriveSpec,
    zeros: &[SpectralFeature],
    poles: &[SpectralFeature],
    bare: [f64; 3],
    default_energy: impl Fn(&Waveform) -> Result<f64>,
) -> Result<PlannedDrive> {
    spec.validate()?;
    let zero = select_by_label(zeros, spec.target)?.location;
    let unit = Complex64::new(1.0, 0.0);
    let reference = cf_for(zero, spec, unit)?;
    let energy = match spec.energy {
        Some(e) => e,
        None => default_energy(&reference)?,
    };
    let sigma = matched_sigma(zero)?;
    let (drive_freq, shape) = match spec.strategy {
        Strategy::Zero => (zero, reference),
        Strategy::ConjugatePole => {
            let w = select_by_label(poles, spec.target)?.location.conj();
            (w, cf_for(w, spec, unit)?)
        }
        Strategy::Bare => {
            let w = bare[spec.target - 1];
            (ComplexFreq::real(w), gaussian_default(w, unit, sigma, 0.0)?)
        }
        Strategy::ZeroRealPart => (ComplexFreq::real(zero.re), gaussian_default(zero.re, unit, sigma, 0.0)?),
    };
    Ok(PlannedDrive {
        strategy: spec.strategy,
        target: spec.target,
        zero,
        drive_freq,
        waveform: match_energy(&shape, energy)?,
    })
}

/// Bloch drive; energy defaults to [`BLOCH_DEFAULT_ENERGY`].
pub fn plan_bloch(p: &BlochParams, spec: &DriveSpec) -> Result<PlannedDrive> {
    let (poles, zeros) = bloch_features(p)?;
    plan(spec, &zeros, &poles, p.omega_a(), |_| Ok(BLOCH_DEFAULT_ENERGY))
}

/// Circuit drive; energy defaults to the zero-targeted CF pulse whose
/// steady-state junction current peaks at 2% of `I_c`.
pub fn plan_circuit(p: &CircuitParams, spec: &DriveSpec) -> Result<PlannedDrive> {
    let zeros = find_circuit_features(p, FeatureKind::Zero)?;
    let poles = find_circuit_features(p, FeatureKind::Pole)?;
    plan(spec, &zeros, &poles, p.bare_frequencies(), |w| {
        let zero = match w.shape {
            crate::pulse::Shape::Cf { omega, .. } => omega,
            crate::pulse::Shape::Gaussian { .. } => unreachable!("reference pulse is CF"),
        };
        let amp = drive_amplitude(p, zero, cf_envelope_peak(w), DRIVE_FRACTION)?;
        Ok(w.energy * amp * amp)
    })
}

fn eval_time(plan: &PlannedDrive, rule: EvalTime) -> Result<f64> {
    match rule {
        EvalTime::EndOfDrive => Ok(plan.t_end()),
        EvalTime::At(t) if t > plan.waveform.window().0 && t.is_finite() => Ok(t),
        EvalTime::At(t) => Err(Error::Config(format!("evaluation time {t} precedes the drive"))),
    }
}

#[derive(Debug, Clone)]
pub struct BlochRun {
    pub plan: PlannedDrive,
    pub trajectory: Trajectory,
    pub curves: EfficiencyCurves,
    pub metrics: MetricsReport,
}

pub fn run_bloch(p: &BlochParams, plan: &PlannedDrive, opts: &BlochOptions, rule: EvalTime) -> Result<BlochRun> {
    let t_eval = eval_time(plan, rule)?;
    let (t0, _) = plan.waveform.window();
    let trajectory = integrate(p, &plan.waveform, (t0, plan.t_end().max(t_eval)), opts)?;
    let curves = efficiency_curves_bloch(&trajectory);
    let metrics = report(&curves, plan.target, t_eval, rule)?;
    Ok(BlochRun {
        plan: *plan,
        trajectory,
        curves,
        metrics,
    })
}

#[derive(Debug, Clone)]
pub struct CircuitRun {
    pub plan: PlannedDrive,
    pub trace: CircuitTrace,
    pub curves: EfficiencyCurves,
    pub metrics: MetricsReport,
}

pub fn run_circuit(
    p: &CircuitParams,
    plan: &PlannedDrive,
    opts: &TransientOptions,
    rule: EvalTime,
) -> Result<CircuitRun> {
    let t_eval = eval_time(plan, rule)?;
    let (t0, _) = plan.waveform.window();
    let trace = transient(p, &plan.waveform, (t0, plan.t_end().max(t_eval)), opts)?;
    let curves = efficiency_curves_circuit(&trace);
    let metrics = report(&curves, plan.target, t_eval, rule)?;
    Ok(CircuitRun {
        plan: *plan,
        trace,
        curves,
        metrics,
    })
}
