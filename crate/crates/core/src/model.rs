//! Physical parameters, unit conventions and derived constants.
//!
//! The Bloch model works in ħ = 1 units with time in ns and angular
//! frequency in rad/ns. The circuit model is SI throughout.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Planck constant (J·s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Elementary charge (C), exact SI value.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Magnetic flux quantum h/(2e) in Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Convert a frequency in Hz to angular frequency in rad/ns.
pub fn hz_to_rad_ns(f_hz: f64) -> f64 {
    2.0 * PI * f_hz * 1e-9
}

/// Convert an angular frequency in rad/ns to Hz.
pub fn rad_ns_to_hz(w: f64) -> f64 {
    w * 1e9 / (2.0 * PI)
}

/// A point `ω = re − i·im` of the complex frequency plane.
///
/// Signals carry the time factor `e^{−iωt} = e^{−i·re·t} e^{−im·t}`, so a
/// positive `im` decays and a negative `im` grows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexFreq {
    pub re: f64,
    pub im: f64,
}

impl ComplexFreq {
    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub const fn real(re: f64) -> Self {
        Self { re, im: 0.0 }
    }

    /// The value as an ordinary complex number `re − i·im`.
    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, -self.im)
    }

    pub fn from_complex(z: Complex64) -> Self {
        Self { re: z.re, im: -z.im }
    }

    /// Mirror across the real axis (decaying ↔ growing).
    pub fn conj(self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn is_decaying(self) -> bool {
        self.im > 0.0
    }

    pub fn is_growing(self) -> bool {
        self.im < 0.0
    }

    pub fn distance(self, other: ComplexFreq) -> f64 {
        (self.to_complex() - other.to_complex()).norm()
    }

    pub fn scale(self, k: f64) -> Self {
        Self {
            re: self.re * k,
            im: self.im * k,
        }
    }
}

impl fmt::Display for ComplexFreq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im >= 0.0 {
            write!(f, "{:.9e} - {:.6e}i", self.re, self.im)
        } else {
            write!(f, "{:.9e} + {:.6e}i", self.re, -self.im)
        }
    }
}

/// How the loaded quality factor relates to the radiative decay time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QConvention {
    /// `Q = ω_c τ_r / 2`: the stored energy decays at `ω_c / Q`.
    #[default]
    EnergyDecay,
    /// `Q = ω_c τ_r`.
    AmplitudeDecay,
}

/// Radiative (amplitude) decay time from the resonator frequency and its Q.
///
/// `q = ∞` yields `τ_r = ∞` (no radiative coupling).
pub fn tau_r_from_q(omega_c: f64, q: f64, convention: QConvention) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("quality factor must be positive, got {q}")));
    }
    if !(omega_c > 0.0 && omega_c.is_finite()) {
        return Err(Error::Domain(format!("omega_c must be positive, got {omega_c}")));
    }
    Ok(match convention {
        QConvention::EnergyDecay => 2.0 * q / omega_c,
        QConvention::AmplitudeDecay => q / omega_c,
    })
}

/// Inverse of [`tau_r_from_q`].
pub fn q_from_tau_r(omega_c: f64, tau_r: f64, convention: QConvention) -> f64 {
    match convention {
        QConvention::EnergyDecay => omega_c * tau_r / 2.0,
        QConvention::AmplitudeDecay => omega_c * tau_r,
    }
}

/// Parameters of the resonator + three two-level emitters + waveguide model.
///
/// All frequencies and rates in rad/ns, times in ns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlochParams {
    omega_c: f64,
    omega_a: [f64; 3],
    g: [f64; 3],
    tau_r: f64,
    tau_i: Option<f64>,
    gamma_s: [f64; 3],
}

impl BlochParams {
    pub fn new(
        omega_c: f64,
        omega_a: [f64; 3],
        g: [f64; 3],
        tau_r: f64,
        tau_i: Option<f64>,
        gamma_s: [f64; 3],
    ) -> Result<Self> {
        let p = Self {
            omega_c,
            omega_a,
            g,
            tau_r,
            tau_i,
            gamma_s,
        };
        p.validate()?;
        Ok(p)
    }

    /// Lossless three-qubit configuration: Q1 aligned with the resonator at
    /// 2π×5.77 GHz, Q2 and Q3 detuned by +1 % and +2 %, `g = ω_c/100`, Q = 31.
    pub fn reference() -> Self {
        Self::reference_with(QConvention::default())
    }

    pub fn reference_with(convention: QConvention) -> Self {
        let omega_c = hz_to_rad_ns(5.77e9);
        let tau_r = tau_r_from_q(omega_c, 31.0, convention).expect("static parameters");
        Self::new(
            omega_c,
            [omega_c, 1.01 * omega_c, 1.02 * omega_c],
            [omega_c / 100.0; 3],
            tau_r,
            None,
            [0.0; 3],
        )
        .expect("static parameters")
    }

    fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be non-negative and finite, got {v}"
                )))
            }
        };
        pos("omega_c", self.omega_c)?;
        for j in 0..3 {
            pos(&format!("omega_a[{j}]"), self.omega_a[j])?;
            nonneg(&format!("g[{j}]"), self.g[j])?;
            nonneg(&format!("gamma_s[{j}]"), self.gamma_s[j])?;
        }
        if !(self.tau_r > 0.0) {
            return Err(Error::Domain(format!("tau_r must be positive, got {}", self.tau_r)));
        }
        if let Some(ti) = self.tau_i {
            if !(ti > 0.0) {
                return Err(Error::Domain(format!("tau_i must be positive, got {ti}")));
            }
        }
        Ok(())
    }

    pub fn with_couplings(mut self, g: [f64; 3]) -> Result<Self> {
        self.g = g;
        self.validate()?;
        Ok(self)
    }

    pub fn with_qubit_frequencies(mut self, omega_a: [f64; 3]) -> Result<Self> {
        self.omega_a = omega_a;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gamma_s(mut self, gamma_s: [f64; 3]) -> Result<Self> {
        self.gamma_s = gamma_s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tau_i(mut self, tau_i: Option<f64>) -> Result<Self> {
        self.tau_i = tau_i;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tau_r(mut self, tau_r: f64) -> Result<Self> {
        self.tau_r = tau_r;
        self.validate()?;
        Ok(self)
    }

    pub fn omega_c(&self) -> f64 {
        self.omega_c
    }
    pub fn omega_a(&self) -> [f64; 3] {
        self.omega_a
    }
    pub fn g(&self) -> [f64; 3] {
        self.g
    }
    pub fn tau_r(&self) -> f64 {
        self.tau_r
    }
    pub fn tau_i(&self) -> Option<f64> {
        self.tau_i
    }
    pub fn gamma_s(&self) -> [f64; 3] {
        self.gamma_s
    }

    /// Radiative amplitude decay rate `1/τ_r`.
    pub fn radiative_rate(&self) -> f64 {
        1.0 / self.tau_r
    }

    /// Internal amplitude decay rate `1/τ_i` (zero when absent).
    pub fn internal_rate(&self) -> f64 {
        self.tau_i.map_or(0.0, |t| 1.0 / t)
    }

    /// Input coupling `k_r = √(2/τ_r)`.
    pub fn k_r(&self) -> f64 {
        (2.0 / self.tau_r).sqrt()
    }

    /// True when the only loss channel is radiation into the waveguide.
    pub fn is_radiative_only(&self) -> bool {
        self.tau_i.is_none() && self.gamma_s.iter().all(|&g| g == 0.0)
    }

    pub fn quality_factor(&self, convention: QConvention) -> f64 {
        q_from_tau_r(self.omega_c, self.tau_r, convention)
    }
}

/// Element values of the three-transmon circuit (SI units).
///
/// The zero-bias junction inductance is always derived from the critical
/// current, `L_j0 = Φ0 / (2π I_c)`, so the two can never disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CircuitParams {
    i_c: [f64; 3],
    c_j: [f64; 3],
    c_c: [f64; 3],
    c_k: f64,
    r_shunt: Option<f64>,
    z0: f64,
}

impl CircuitParams {
    pub fn new(i_c: [f64; 3], c_j: [f64; 3], c_c: [f64; 3], c_k: f64, r_shunt: Option<f64>, z0: f64) -> Result<Self> {
        let p = Self {
            i_c,
            c_j,
            c_c,
            c_k,
            r_shunt,
            z0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from junction inductances; the critical currents follow.
    pub fn from_inductances(
        l_j0: [f64; 3],
        c_j: [f64; 3],
        c_c: [f64; 3],
        c_k: f64,
        r_shunt: Option<f64>,
        z0: f64,
    ) -> Result<Self> {
        for (j, &l) in l_j0.iter().enumerate() {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Domain(format!("l_j0[{j}] must be positive, got {l}")));
            }
        }
        Self::new(l_j0.map(critical_current_for), c_j, c_c, c_k, r_shunt, z0)
    }

    /// I_c = 0.1647 µA for every junction, C_j = 0.2 pF, C_c = 10·1.1^k fF,
    /// C_k = 10 pF, Z_0 = 50 Ω, no shunt resistor.
    pub fn reference() -> Self {
        let c_c1 = 10e-15;
        Self::new(
            [0.1647e-6; 3],
            [0.2e-12; 3],
            [c_c1, c_c1 * 1.1, c_c1 * 1.1 * 1.1],
            10e-12,
            None,
            50.0,
        )
        .expect("static parameters")
    }

    /// Reference parameters with the 0.2 MΩ per-qubit shunt resistor.
    pub fn reference_lossy() -> Self {
        Self::reference().with_r_shunt(Some(0.2e6)).expect("static parameters")
    }

    fn validate(&self) -> Result<()> {
        let pos = |name: String, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        for j in 0..3 {
            pos(format!("i_c[{j}]"), self.i_c[j])?;
            pos(format!("c_j[{j}]"), self.c_j[j])?;
            if !(self.c_c[j] >= 0.0 && self.c_c[j].is_finite()) {
                return Err(Error::Domain(format!(
                    "c_c[{j}] must be non-negative, got {}",
                    self.c_c[j]
                )));
            }
        }
        pos("c_k".into(), self.c_k)?;
        pos("z0".into(), self.z0)?;
        if let Some(r) = self.r_shunt {
            pos("r_shunt".into(), r)?;
        }
        let ratio = ej_ec_ratio_raw(self.i_c[0], self.c_j[0] + self.c_c[0])?;
        if !(ratio > 1.0) {
            return Err(Error::Domain(format!(
                "E_J/E_C = {ratio:.3} is outside the transmon regime"
            )));
        }
        Ok(())
    }

    pub fn with_r_shunt(mut self, r: Option<f64>) -> Result<Self> {
        self.r_shunt = r;
        self.validate()?;
        Ok(self)
    }

    pub fn with_coupling_caps(mut self, c_c: [f64; 3]) -> Result<Self> {
        self.c_c = c_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_shunt_caps(mut self, c_j: [f64; 3]) -> Result<Self> {
        self.c_j = c_j;
        self.validate()?;
        Ok(self)
    }

    pub fn with_port_cap(mut self, c_k: f64) -> Result<Self> {
        self.c_k = c_k;
        self.validate()?;
        Ok(self)
    }

    pub fn with_z0(mut self, z0: f64) -> Result<Self> {
        self.z0 = z0;
        self.validate()?;
        Ok(self)
    }

    /// Replace junction `j`'s inductance (its critical current follows).
    pub fn with_inductance(mut self, j: usize, l: f64) -> Result<Self> {
        if !(l > 0.0 && l.is_finite()) {
            return Err(Error::Domain(format!("inductance must be positive, got {l}")));
        }
        self.i_c[j] = critical_current_for(l);
        self.validate()?;
        Ok(self)
    }

    pub fn i_c(&self) -> [f64; 3] {
        self.i_c
    }
    pub fn c_j(&self) -> [f64; 3] {
        self.c_j
    }
    pub fn c_c(&self) -> [f64; 3] {
        self.c_c
    }
    pub fn c_k(&self) -> f64 {
        self.c_k
    }
    pub fn r_shunt(&self) -> Option<f64> {
        self.r_shunt
    }
    pub fn z0(&self) -> f64 {
        self.z0
    }

    pub fn l_j0(&self) -> [f64; 3] {
        self.i_c.map(|ic| FLUX_QUANTUM / (2.0 * PI * ic))
    }

    /// Josephson energies `E_J = I_c Φ0 / 2π` (J).
    pub fn josephson_energy(&self) -> [f64; 3] {
        self.i_c.map(|ic| ic * FLUX_QUANTUM / (2.0 * PI))
    }

    /// Bare qubit frequencies `1/√(L_j0 (C_j + C_c))` in rad/s.
    pub fn bare_frequencies(&self) -> [f64; 3] {
        let l = self.l_j0();
        [0, 1, 2].map(|j| 1.0 / (l[j] * (self.c_j[j] + self.c_c[j])).sqrt())
    }

    pub fn is_lossless(&self) -> bool {
        self.r_shunt.is_none()
    }
}

fn critical_current_for(l: f64) -> f64 {
    FLUX_QUANTUM / (2.0 * PI * l)
}

/// `E_J / E_C` with `E_J = I_c Φ0/2π` and `E_C = e²/(2 C_Σ)`.
pub fn ej_ec_ratio_raw(i_c: f64, c_sigma: f64) -> Result<f64> {
    if !(i_c > 0.0) || !(c_sigma > 0.0) {
        return Err(Error::Domain(format!(
            "E_J/E_C needs positive I_c and C_sigma, got {i_c} and {c_sigma}"
        )));
    }
    let e_j = i_c * FLUX_QUANTUM / (2.0 * PI);
    let e_c = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_sigma);
    Ok(e_j / e_c)
}

/// Per-qubit `E_J/E_C` with `C_Σ = C_j + C_c`.
pub fn ej_ec_ratios(p: &CircuitParams) -> Result<[f64; 3]> {
    let mut out = [0.0; 3];
    for j in 0..3 {
        out[j] = ej_ec_ratio_raw(p.i_c[j], p.c_j[j] + p.c_c[j])?;
    }
    Ok(out)
}

/// `E_J/E_C` of the reference qubit (Q1).
pub fn ej_ec_ratio(p: &CircuitParams) -> Result<f64> {
    Ok(ej_ec_ratios(p)?[0])
}
