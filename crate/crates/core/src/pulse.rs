//! Closed-form drive waveforms: complex-frequency (CF) pulses and Gaussian
//! baselines, with analytic energies.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ComplexFreq;

/// Largest allowed envelope dynamic range, as an exponent of e.
pub const MAX_ENVELOPE_EXPONENT: f64 = 50.0;
/// Default CF window in envelope lifetimes.
pub const DEFAULT_LIFETIMES: f64 = 8.0;
/// Default ramp length in carrier cycles.
pub const DEFAULT_RAMP_CYCLES: f64 = 5.0;
/// Gaussian windows extend this many widths either side of the centre.
pub const GAUSSIAN_HALF_SPAN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `w(t)·e^{−iω(t − t_on)}` on `[t_on, t_off]` with raised-cosine edges.
    Cf {
        omega: ComplexFreq,
        t_on: f64,
        t_off: f64,
        tau_ramp: f64,
    },
    /// `e^{−(t−t_c)²/2σ²}·e^{−iω_d t}` on `[t_start, t_end]`.
    Gaussian {
        omega_d: f64,
        sigma: f64,
        t_c: f64,
        t_start: f64,
        t_end: f64,
    },
}

/// A drive `s(t)`, zero outside its window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    pub shape: Shape,
    pub b0: Complex64,
    /// `∫|s|² dt`, kept in step with `b0`.
    pub energy: f64,
}

pub fn cf_waveform(omega: ComplexFreq, b0: Complex64, t_on: f64, t_off: f64, tau_ramp: f64) -> Result<Waveform> {
    if !(t_off > t_on) || !t_on.is_finite() || !t_off.is_finite() {
        return Err(Error::Domain(format!("CF window [{t_on}, {t_off}] is empty")));
    }
    let len = t_off - t_on;
    if !(tau_ramp >= 0.0) || tau_ramp > 0.1 * len {
        return Err(Error::Domain(format!(
            "ramp {tau_ramp} must lie in [0, 10% of the window length {len}]"
        )));
    }
    let exponent = omega.im.abs() * len;
    if exponent > MAX_ENVELOPE_EXPONENT {
        return Err(Error::EnvelopeOverflow { exponent });
    }
    let shape = Shape::Cf {
        omega,
        t_on,
        t_off,
        tau_ramp,
    };
    Ok(Waveform {
        shape,
        b0,
        energy: b0.norm_sqr() * unit_energy(&shape),
    })
}

/// CF pulse with the default window (8 lifetimes, capped by the overflow
/// guard) and a five-cycle ramp.
pub fn cf_default(omega: ComplexFreq, b0: Complex64, t_on: f64) -> Result<Waveform> {
    let len = default_cf_length(omega)?;
    cf_waveform(omega, b0, t_on, t_on + len, default_ramp(omega.re))
}

pub fn default_cf_length(omega: ComplexFreq) -> Result<f64> {
    if omega.im == 0.0 {
        return Err(Error::Domain(
            "a real frequency has no envelope lifetime; give the window explicitly".into(),
        ));
    }
    let rate = omega.im.abs();
    Ok((DEFAULT_LIFETIMES / rate).min(MAX_ENVELOPE_EXPONENT / rate))
}

pub fn default_ramp(carrier: f64) -> f64 {
    DEFAULT_RAMP_CYCLES * 2.0 * PI / carrier.abs()
}

pub fn gaussian_waveform(omega_d: f64, b0: Complex64, sigma: f64, t_c: f64, window: (f64, f64)) -> Result<Waveform> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("Gaussian width must be positive, got {sigma}")));
    }
    let (t_start, t_end) = window;
    if !(t_end > t_start) {
        return Err(Error::Domain(format!("Gaussian window [{t_start}, {t_end}] is empty")));
    }
    let shape = Shape::Gaussian {
        omega_d,
        sigma,
        t_c,
        t_start,
        t_end,
    };
    Ok(Waveform {
        shape,
        b0,
        energy: b0.norm_sqr() * unit_energy(&shape),
    })
}

/// Gaussian on `t_c ± 5σ` starting at `t_start`.
pub fn gaussian_default(omega_d: f64, b0: Complex64, sigma: f64, t_start: f64) -> Result<Waveform> {
    let half = GAUSSIAN_HALF_SPAN * sigma;
    gaussian_waveform(omega_d, b0, sigma, t_start + half, (t_start, t_start + 2.0 * half))
}

/// Width whose untruncated Gaussian has the same energy and peak amplitude
/// as an untruncated CF pulse decaying at rate `|ω_i|`.
pub fn matched_sigma(omega: ComplexFreq) -> Result<f64> {
    if omega.im == 0.0 {
        return Err(Error::Domain("matched width needs a nonzero decay rate".into()));
    }
    Ok(1.0 / (2.0 * PI.sqrt() * omega.im.abs()))
}

/// Full width between the 1/√2-amplitude points, `2σ√(ln 2)`.
pub fn effective_width(sigma: f64) -> f64 {
    2.0 * sigma * std::f64::consts::LN_2.sqrt()
}

/// Rescale `b0` so the energy equals `target`.
pub fn match_energy(w: &Waveform, target: f64) -> Result<Waveform> {
    if !(target > 0.0) || !target.is_finite() {
        return Err(Error::Domain(format!("target energy must be positive, got {target}")));
    }
    let unit = unit_energy(&w.shape);
    if !(w.energy > 0.0) || !(unit > 0.0) {
        return Err(Error::ZeroInput);
    }
    let ratio = target / w.energy;
    // already matched up to rounding: leave untouched so matching is idempotent
    if (ratio - 1.0).abs() <= 1e-14 {
        return Ok(*w);
    }
    let b0 = w.b0 * ratio.sqrt();
    Ok(Waveform {
        shape: w.shape,
        b0,
        energy: b0.norm_sqr() * unit,
    })
}

impl Waveform {
    pub fn window(&self) -> (f64, f64) {
        match self.shape {
            Shape::Cf { t_on, t_off, .. } => (t_on, t_off),
            Shape::Gaussian { t_start, t_end, .. } => (t_start, t_end),
        }
    }

    /// Real carrier frequency.
    pub fn carrier(&self) -> f64 {
        match self.shape {
            Shape::Cf { omega, .. } => omega.re,
            Shape::Gaussian { omega_d, .. } => omega_d,
        }
    }

    pub fn is_cf(&self) -> bool {
        matches!(self.shape, Shape::Cf { .. })
    }

    /// True when a Gaussian window cuts the pulse inside `t_c ± 5σ`.
    pub fn is_truncated(&self) -> bool {
        match self.shape {
            Shape::Gaussian {
                sigma,
                t_c,
                t_start,
                t_end,
                ..
            } => {
                let h = GAUSSIAN_HALF_SPAN * sigma * (1.0 - 1e-12);
                t_start > t_c - h || t_end < t_c + h
            }
            Shape::Cf { .. } => false,
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self.shape {
            Shape::Cf {
                omega,
                t_on,
                t_off,
                tau_ramp,
            } => {
                if t < t_on || t > t_off {
                    return Complex64::default();
                }
                let w = ramp_weight(t - t_on, t_off - t, tau_ramp);
                let tau = t - t_on;
                // e^{−iω τ} with ω = re − i·im
                self.b0 * w * Complex64::from_polar((-omega.im * tau).exp(), -omega.re * tau)
            }
            Shape::Gaussian {
                omega_d,
                sigma,
                t_c,
                t_start,
                t_end,
            } => {
                if t < t_start || t > t_end {
                    return Complex64::default();
                }
                let x = (t - t_c) / sigma;
                self.b0 * Complex64::from_polar((-0.5 * x * x).exp(), -omega_d * t)
            }
        }
    }

    /// Times where the waveform is not smooth (window edges, ramp joints).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self.shape {
            Shape::Cf {
                t_on, t_off, tau_ramp, ..
            } => {
                if tau_ramp > 0.0 {
                    vec![t_on, t_on + tau_ramp, t_off - tau_ramp, t_off]
                } else {
                    vec![t_on, t_off]
                }
            }
            Shape::Gaussian { t_start, t_end, .. } => vec![t_start, t_end],
        }
    }

    /// CSV of `t, Re s, Im s, |s|²` with the descriptor as a JSON comment.
    pub fn sample_csv(&self, n: usize, extra: Option<(&str, &str)>) -> String {
        let (a, b) = self.window();
        let mut head = serde_json::to_value(self).expect("waveform serializes");
        if let (Some((k, v)), Some(obj)) = (extra, head.as_object_mut()) {
            obj.insert(k.to_string(), serde_json::Value::String(v.to_string()));
        }
        let mut s = format!("# {head}\nt,re_s,im_s,abs_s_sq\n");
        let n = n.max(2);
        for k in 0..n {
            let t = a + (b - a) * k as f64 / (n - 1) as f64;
            let v = self.eval(t);
            s.push_str(&format!("{t:.12e},{:.12e},{:.12e},{:.12e}\n", v.re, v.im, v.norm_sqr()));
        }
        s
    }
}

/// Raised-cosine weight given the distances from the two window edges.
fn ramp_weight(from_start: f64, to_end: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 1.0;
    }
    let edge = from_start.min(to_end);
    if edge >= tau {
        1.0
    } else {
        0.5 * (1.0 - (PI * edge.max(0.0) / tau).cos())
    }
}

/// `(e^{z·L} − 1)/z`, exact as `z → 0`.
fn exp_integral(z: Complex64, len: f64) -> Complex64 {
    let w = z * len;
    if w.norm() < 1e-4 {
        // series of (e^w − 1)/w times L
        let mut term = Complex64::new(len, 0.0);
        let mut sum = term;
        for k in 2..8 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        (w.exp() - 1.0) / z
    }
}

/// `∫₀^L e^{a u} w(u)² du` over a rising raised-cosine ramp `w(u) = ½(1 − cos(πu/L))`.
fn ramp_energy(a: f64, len: f64) -> f64 {
    // w² = 3/8 − ½cos(πu/L) + ⅛cos(2πu/L)
    let k = PI / len;
    let part = |freq: f64| exp_integral(Complex64::new(a, freq), len).re;
    0.375 * part(0.0) - 0.5 * part(k) + 0.125 * part(2.0 * k)
}

/// Energy at `b0 = 1`.
fn unit_energy(shape: &Shape) -> f64 {
    match *shape {
        Shape::Cf {
            omega,
            t_on,
            t_off,
            tau_ramp,
        } => {
            let len = t_off - t_on;
            let a = -2.0 * omega.im;
            if tau_ramp <= 0.0 {
                return exp_integral(Complex64::new(a, 0.0), len).re;
            }
            let rise = ramp_energy(a, tau_ramp);
            // u measured back from t_off: e^{a(len − u)}
            let fall = (a * len).exp() * ramp_energy(-a, tau_ramp);
            let flat = (a * tau_ramp).exp() * exp_integral(Complex64::new(a, 0.0), len - 2.0 * tau_ramp).re;
            rise + flat + fall
        }
        Shape::Gaussian {
            sigma,
            t_c,
            t_start,
            t_end,
            ..
        } => 0.5 * sigma * PI.sqrt() * (libm::erf((t_end - t_c) / sigma) - libm::erf((t_start - t_c) / sigma)),
    }
}
