//! JSON run configuration.
//!
//! Every section is optional and falls back to the reference parameter set.
//! Frequencies are given in Hz (`f`, converted to `2πf`) or, with a
//! `_rad_ns` key suffix, directly as angular frequency in rad/ns. Unknown
//! keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bloch::{BlochOptions, Mode};
use crate::circuit::{PortBoundary, TransientOptions, DEFAULT_DT};
use crate::error::{Error, Result};
use crate::metrics::{EvalTime, Strategy};
use crate::model::{hz_to_rad_ns, tau_r_from_q, BlochParams, CircuitParams, QConvention};
use crate::protocol::DriveSpec;
use crate::pulse::{DEFAULT_LIFETIMES, DEFAULT_RAMP_CYCLES};
use crate::response::{FreqWindow, SpectralFeature};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Bloch,
    Circuit,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSection {
    pub resonator_freq: Option<f64>,
    pub resonator_freq_rad_ns: Option<f64>,
    pub qubit_freqs: Option<[f64; 3]>,
    pub qubit_freqs_rad_ns: Option<[f64; 3]>,
    pub coupling: Option<[f64; 3]>,
    pub coupling_rad_ns: Option<[f64; 3]>,
    pub quality_factor: Option<f64>,
    pub q_convention: Option<QConvention>,
    pub tau_i_ns: Option<f64>,
    pub qubit_decay: Option<[f64; 3]>,
    pub qubit_decay_rad_ns: Option<[f64; 3]>,
    pub mode: Option<Mode>,
    pub tol: Option<f64>,
    pub sample_dt_ns: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub critical_current: Option<[f64; 3]>,
    pub shunt_capacitance: Option<[f64; 3]>,
    pub coupling_capacitance: Option<[f64; 3]>,
    pub port_capacitance: Option<f64>,
    /// Per-qubit shunt resistance in ohms; absent or null means lossless.
    pub shunt_resistance: Option<f64>,
    pub port_impedance: Option<f64>,
    pub dt: Option<f64>,
    pub store_every: Option<usize>,
    pub boundary: Option<PortBoundary>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSection {
    pub mode: Option<Strategy>,
    pub target: Option<usize>,
    pub lifetimes: Option<f64>,
    pub ramp_cycles: Option<f64>,
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapSection {
    pub re_min: Option<f64>,
    pub re_max: Option<f64>,
    pub im_min: Option<f64>,
    pub im_max: Option<f64>,
    pub re_min_rad_ns: Option<f64>,
    pub re_max_rad_ns: Option<f64>,
    pub im_min_rad_ns: Option<f64>,
    pub im_max_rad_ns: Option<f64>,
    pub n_re: Option<usize>,
    pub n_im: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Fractional excursion of qubit 1's bare frequency.
    pub span: Option<f64>,
    pub n_points: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: Option<ModelKind>,
    pub bloch: Option<BlochSection>,
    pub circuit: Option<CircuitSection>,
    pub pulse: Option<PulseSection>,
    pub heatmap: Option<HeatmapSection>,
    pub sweep: Option<SweepSection>,
    /// Evaluation time in ns; end of drive when absent.
    pub t_eval_ns: Option<f64>,
}

/// Heatmap window in rad/ns, or `None` to derive it from the features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeatmapSpec {
    pub window_rad_ns: Option<FreqWindow>,
    pub n_re: usize,
    pub n_im: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepSpec {
    pub span: f64,
    pub n_points: usize,
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub bloch: BlochParams,
    pub bloch_options: BlochOptions,
    pub circuit: CircuitParams,
    pub transient: TransientOptions,
    pub boundary: PortBoundary,
    pub drive: DriveSpec,
    pub heatmap: HeatmapSpec,
    pub sweep: SweepSpec,
    pub eval: EvalTime,
    /// Hex SHA-256 of the canonical config JSON.
    pub hash: String,
}

fn either<T: Copy>(hz: Option<T>, rad: Option<T>, key: &str, conv: impl Fn(T) -> T) -> Result<Option<T>> {
    match (hz, rad) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give either `{key}` or `{key}_rad_ns`, not both"
        ))),
        (Some(v), None) => Ok(Some(conv(v))),
        (None, r) => Ok(r),
    }
}

fn arr_hz(a: [f64; 3]) -> [f64; 3] {
    a.map(hz_to_rad_ns)
}

/// SHA-256 over the key-sorted compact JSON of `value`.
pub fn config_hash(value: &serde_json::Value) -> String {
    // serde_json maps are ordered by key, so this serialization is canonical
    let canonical = serde_json::to_string(value).expect("JSON value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

impl RunConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let file: ConfigFile = serde_json::from_value(value.clone())?;
        Self::resolve(file, config_hash(&value))
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Reference parameters with no overrides.
    pub fn defaults() -> Self {
        Self::from_json_str("{}").expect("empty config resolves")
    }

    fn resolve(f: ConfigFile, hash: String) -> Result<Self> {
        let b = f.bloch.unwrap_or_default();
        let base = BlochParams::reference();
        let omega_c = either(
            b.resonator_freq,
            b.resonator_freq_rad_ns,
            "resonator_freq",
            hz_to_rad_ns,
        )?
        .unwrap_or(base.omega_c());
        let omega_a = either(b.qubit_freqs, b.qubit_freqs_rad_ns, "qubit_freqs", arr_hz)?.unwrap_or(
            if b.resonator_freq.is_some() || b.resonator_freq_rad_ns.is_some() {
                [omega_c, 1.01 * omega_c, 1.02 * omega_c]
            } else {
                base.omega_a()
            },
        );
        let g = either(b.coupling, b.coupling_rad_ns, "coupling", arr_hz)?.unwrap_or([omega_c / 100.0; 3]);
        let convention = b.q_convention.unwrap_or_default();
        let q = b.quality_factor.unwrap_or(31.0);
        if !(q > 0.0) {
            return Err(Error::Config(format!("quality_factor must be positive, got {q}")));
        }
        let tau_r = tau_r_from_q(omega_c, q, convention)?;
        let gamma = either(b.qubit_decay, b.qubit_decay_rad_ns, "qubit_decay", arr_hz)?.unwrap_or([0.0; 3]);
        let bloch = BlochParams::new(omega_c, omega_a, g, tau_r, b.tau_i_ns, gamma)?;
        let mut bloch_options = BlochOptions {
            mode: b.mode.unwrap_or_default(),
            ..Default::default()
        };
        if let Some(t) = b.tol {
            bloch_options.tol = t;
        }
        if let Some(s) = b.sample_dt_ns {
            bloch_options.sample_dt = s;
        }
        if !(bloch_options.tol > 0.0) || !(bloch_options.sample_dt > 0.0) {
            return Err(Error::Config("bloch tol and sample_dt_ns must be positive".into()));
        }

        let c = f.circuit.unwrap_or_default();
        let cb = CircuitParams::reference();
        let circuit = CircuitParams::new(
            c.critical_current.unwrap_or(cb.i_c()),
            c.shunt_capacitance.unwrap_or(cb.c_j()),
            c.coupling_capacitance.unwrap_or(cb.c_c()),
            c.port_capacitance.unwrap_or(cb.c_k()),
            c.shunt_resistance,
            c.port_impedance.unwrap_or(cb.z0()),
        )?;
        let transient = TransientOptions {
            dt: c.dt.unwrap_or(DEFAULT_DT),
            store_every: c.store_every.unwrap_or(TransientOptions::default().store_every).max(1),
            ..Default::default()
        };

        let p = f.pulse.unwrap_or_default();
        let drive = DriveSpec {
            strategy: p.mode.unwrap_or(Strategy::Zero),
            target: p.target.unwrap_or(1),
            lifetimes: p.lifetimes.unwrap_or(DEFAULT_LIFETIMES),
            ramp_cycles: p.ramp_cycles.unwrap_or(DEFAULT_RAMP_CYCLES),
            energy: p.energy,
        };
        if !(1..=3).contains(&drive.target) {
            return Err(Error::Config(format!(
                "pulse.target must be 1, 2 or 3, got {}",
                drive.target
            )));
        }

        let h = f.heatmap.unwrap_or_default();
        let parts = [
            either(h.re_min, h.re_min_rad_ns, "re_min", hz_to_rad_ns)?,
            either(h.re_max, h.re_max_rad_ns, "re_max", hz_to_rad_ns)?,
            either(h.im_min, h.im_min_rad_ns, "im_min", hz_to_rad_ns)?,
            either(h.im_max, h.im_max_rad_ns, "im_max", hz_to_rad_ns)?,
        ];
        let window_rad_ns = match parts {
            [Some(re_min), Some(re_max), Some(im_min), Some(im_max)] => {
                if !(re_max > re_min && im_max > im_min) {
                    return Err(Error::Config("heatmap window bounds must be increasing".into()));
                }
                Some(FreqWindow {
                    re_min,
                    re_max,
                    im_min,
                    im_max,
                })
            }
            [None, None, None, None] => None,
            _ => return Err(Error::Config("heatmap window needs all four bounds or none".into())),
        };
        let heatmap = HeatmapSpec {
            window_rad_ns,
            n_re: h.n_re.unwrap_or(201),
            n_im: h.n_im.unwrap_or(101),
        };
        if heatmap.n_re < 2 || heatmap.n_im < 2 {
            return Err(Error::Config("heatmap needs at least 2 samples per axis".into()));
        }

        let s = f.sweep.unwrap_or_default();
        let sweep = SweepSpec {
            span: s.span.unwrap_or(0.03),
            n_points: s.n_points.unwrap_or(601),
        };
        if !(sweep.span > 0.0 && sweep.span < 0.5) || sweep.n_points < 3 {
            return Err(Error::Config("sweep.span must lie in (0, 0.5) and n_points ≥ 3".into()));
        }

        let eval = match f.t_eval_ns {
            Some(t) if t > 0.0 && t.is_finite() => EvalTime::At(t),
            Some(t) => return Err(Error::Config(format!("t_eval_ns must be positive, got {t}"))),
            None => EvalTime::EndOfDrive,
        };

        Ok(Self {
            model: f.model.unwrap_or_default(),
            bloch,
            bloch_options,
            circuit,
            transient,
            boundary: c.boundary.unwrap_or_default(),
            drive,
            heatmap,
            sweep,
            eval,
            hash,
        })
    }
}

/// Window around the given features in their own unit, padded by a quarter
/// of the real spread and half of the largest imaginary part.
pub fn window_around(features: &[SpectralFeature]) -> Option<FreqWindow> {
    let first = features.first()?;
    let (mut lo, mut hi, mut im) = (first.location.re, first.location.re, 0.0f64);
    for f in features {
        lo = lo.min(f.location.re);
        hi = hi.max(f.location.re);
        im = im.max(f.location.im.abs());
    }
    let im = if im > 0.0 { im } else { 1e-3 * hi.abs().max(1e-12) };
    let pad = (0.25 * (hi - lo)).max(2.0 * im);
    Some(FreqWindow {
        re_min: lo - pad,
        re_max: hi + pad,
        im_min: -1.5 * im,
        im_max: 1.5 * im,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_reference() {
        let c = RunConfig::defaults();
        assert_eq!(c.bloch, BlochParams::reference());
        assert_eq!(c.circuit, CircuitParams::reference());
        assert_eq!(c.model, ModelKind::Bloch);
    }

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::from_json_str(r#"{"bloch": {"resonator_frq": 5e9}}"#).unwrap_err();
        assert!(e.is_config());
        assert!(e.to_string().contains("resonator_frq"), "{e}");
        let e = RunConfig::from_json_str(r#"{"colour": 1}"#).unwrap_err();
        assert!(e.to_string().contains("colour"));
    }

    #[test]
    fn hz_and_rad_ns_agree() {
        let a = RunConfig::from_json_str(r#"{"bloch": {"resonator_freq": 5.77e9}}"#).unwrap();
        let w = hz_to_rad_ns(5.77e9);
        let b = RunConfig::from_json_str(&format!(r#"{{"bloch": {{"resonator_freq_rad_ns": {w}}}}}"#)).unwrap();
        assert_eq!(a.bloch, b.bloch);
        assert!(
            RunConfig::from_json_str(r#"{"bloch": {"resonator_freq": 5e9, "resonator_freq_rad_ns": 30}}"#)
                .unwrap_err()
                .is_config()
        );
    }

    #[test]
    fn hash_ignores_formatting_but_not_content() {
        let a = RunConfig::from_json_str(r#"{"model":"circuit","pulse":{"target":2}}"#).unwrap();
        let b = RunConfig::from_json_str("{\n  \"pulse\": { \"target\": 2 },\n  \"model\": \"circuit\"\n}").unwrap();
        let c = RunConfig::from_json_str(r#"{"model":"circuit","pulse":{"target":3}}"#).unwrap();
        assert_eq!(a.hash, b.hash);
        assert_ne!(a.hash, c.hash);
        assert_eq!(a.hash.len(), 64);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in [
            r#"{"pulse": {"target": 4}}"#,
            r#"{"pulse": {"mode": "sideways"}}"#,
            r#"{"circuit": {"port_impedance": -5}}"#,
            r#"{"heatmap": {"re_min": 1}}"#,
            r#"not json"#,
        ] {
            assert!(RunConfig::from_json_str(bad).unwrap_err().is_config(), "{bad}");
        }
    }
}
