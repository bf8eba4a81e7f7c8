//! Semiclassical resonator + three-emitter dynamics driven through a
//! waveguide port, with reflected field and excitation-number ledger.
//!
//! Conventions: undriven amplitudes rotate as `e^{−iωt}` and decay.
//!
//! ```text
//! da/dt   = (−iω_c − 1/τ_r − 1/τ_i) a − i Σ g_j σ_j + k_r b_in
//! dσ_j/dt = (−iω_aj − Γ_j/2) σ_j + i g_j a z_j
//! dz_j/dt = −Γ_j (z_j + 1) + 2i g_j (a* σ_j − a σ_j*)
//! b_out   = −b_in + k_r a
//! ```
//!
//! The ledger counts excitations: the resonator holds `|a|²`, emitter `j`
//! holds `(z_j + 1)/2` (or `|σ_j|²` when linearized), and
//! `dN/dt = |b_in|² − |b_out|² − (2/τ_i)|a|² − Σ Γ_j n_j` holds exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::BlochParams;
use crate::ode::{integrate_adaptive, AdaptiveOptions, IntegrationStats};
use crate::pulse::Waveform;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Nonlinear,
    /// Inversions pinned at −1.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochState {
    pub a: Complex64,
    pub sm: [Complex64; 3],
    pub sz: [f64; 3],
}

impl BlochState {
    pub fn ground() -> Self {
        Self {
            a: Complex64::default(),
            sm: [Complex64::default(); 3],
            sz: [-1.0; 3],
        }
    }

    /// Excitation number held by emitter `j`.
    pub fn excitation(&self, j: usize, mode: Mode) -> f64 {
        match mode {
            Mode::Nonlinear => 0.5 * (self.sz[j] + 1.0),
            Mode::Linearized => self.sm[j].norm_sqr(),
        }
    }

    pub fn stored(&self, mode: Mode) -> f64 {
        self.a.norm_sqr() + (0..3).map(|j| self.excitation(j, mode)).sum::<f64>()
    }

    fn pack(&self, y: &mut [f64]) {
        y[0] = self.a.re;
        y[1] = self.a.im;
        for j in 0..3 {
            y[2 + 2 * j] = self.sm[j].re;
            y[3 + 2 * j] = self.sm[j].im;
            y[8 + j] = self.sz[j];
        }
    }

    fn unpack(y: &[f64]) -> Self {
        let c = |k: usize| Complex64::new(y[k], y[k + 1]);
        Self {
            a: c(0),
            sm: [c(2), c(4), c(6)],
            sz: [y[8], y[9], y[10]],
        }
    }
}

// ledger integrals appended after the 11 physical components
const IDX_IN: usize = 11;
const IDX_REFL: usize = 12;
const IDX_DISS: usize = 13;
const DIM: usize = 14;

/// Time derivative of the physical state.
pub fn derivative(state: &BlochState, b_in: Complex64, p: &BlochParams, mode: Mode) -> BlochState {
    let g = p.g();
    let wa = p.omega_a();
    let gs = p.gamma_s();
    let kappa = p.radiative_rate() + p.internal_rate();
    let mut da = (-I * p.omega_c() - kappa) * state.a + p.k_r() * b_in;
    let mut dsm = [Complex64::default(); 3];
    let mut dsz = [0.0; 3];
    for j in 0..3 {
        da -= I * g[j] * state.sm[j];
        let z = match mode {
            Mode::Nonlinear => state.sz[j],
            Mode::Linearized => -1.0,
        };
        dsm[j] = (-I * wa[j] - gs[j] / 2.0) * state.sm[j] + I * g[j] * state.a * z;
        if mode == Mode::Nonlinear {
            let x = state.a.conj() * state.sm[j];
            // 2i g (x − x*) = −4 g Im x
            dsz[j] = -gs[j] * (state.sz[j] + 1.0) - 4.0 * g[j] * x.im;
        }
    }
    BlochState {
        a: da,
        sm: dsm,
        sz: dsz,
    }
}

/// Rate of the same derivative, with the time taken from the drive.
pub fn derivative_at(state: &BlochState, t: f64, drive: &Waveform, p: &BlochParams, mode: Mode) -> BlochState {
    derivative(state, drive.eval(t), p, mode)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub e_in: f64,
    pub e_refl: f64,
    /// Loss through `τ_i` and the emitters' `Γ`.
    pub e_diss: f64,
    pub stored_final: f64,
    pub resonator_final: f64,
    pub qubits_final: [f64; 3],
    /// `e_in − e_refl − stored_final − e_diss`
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BlochOptions {
    pub tol: f64,
    pub sample_dt: f64,
    pub mode: Mode,
}

impl Default for BlochOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            sample_dt: 0.05,
            mode: Mode::Nonlinear,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: Mode,
    pub t: Vec<f64>,
    pub states: Vec<BlochState>,
    pub b_in: Vec<Complex64>,
    pub b_out: Vec<Complex64>,
    /// Cumulative `∫|b_in|²`, `∫|b_out|²` and dissipated number at each sample.
    pub e_in: Vec<f64>,
    pub e_refl: Vec<f64>,
    pub e_diss: Vec<f64>,
    pub ledger: EnergyLedger,
    pub stats: IntegrationStats,
}

/// Integrate from the ground state over `t_span`, sampling every
/// `opts.sample_dt` (plus the span end).
pub fn integrate(p: &BlochParams, drive: &Waveform, t_span: (f64, f64), opts: &BlochOptions) -> Result<Trajectory> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::Domain(format!("time span [{t0}, {t1}] is empty")));
    }
    if !(opts.sample_dt > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::Domain("sample interval and tolerance must be positive".into()));
    }
    let n = ((t1 - t0) / opts.sample_dt).floor() as usize;
    let mut samples: Vec<f64> = (0..=n).map(|k| t0 + k as f64 * opts.sample_dt).collect();
    if t1 - samples[samples.len() - 1] > 1e-12 * opts.sample_dt {
        samples.push(t1);
    }
    let mode = opts.mode;
    let k_r = p.k_r();
    let internal = 2.0 * p.internal_rate();
    let gs = p.gamma_s();
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let s = BlochState::unpack(y);
        let b_in = drive.eval(t);
        let d = derivative(&s, b_in, p, mode);
        d.pack(dy);
        let b_out = -b_in + k_r * s.a;
        dy[IDX_IN] = b_in.norm_sqr();
        dy[IDX_REFL] = b_out.norm_sqr();
        dy[IDX_DISS] = internal * s.a.norm_sqr() + (0..3).map(|j| gs[j] * s.excitation(j, mode)).sum::<f64>();
    };
    let mut y0 = vec![0.0; DIM];
    BlochState::ground().pack(&mut y0);
    let mut opts_ode = AdaptiveOptions::with_tol(opts.tol);
    // keep the step from skipping an entire short pulse
    let (w0, w1) = drive.window();
    opts_ode.h_max = ((w1 - w0) / 20.0).max(1e-6);
    let (ys, stats) = integrate_adaptive(rhs, t0, &y0, t1, &samples, &drive.breakpoints(), &opts_ode)?;

    let mut tr = Trajectory {
        mode,
        t: samples.clone(),
        states: Vec::with_capacity(ys.len()),
        b_in: Vec::with_capacity(ys.len()),
        b_out: Vec::with_capacity(ys.len()),
        e_in: Vec::with_capacity(ys.len()),
        e_refl: Vec::with_capacity(ys.len()),
        e_diss: Vec::with_capacity(ys.len()),
        ledger: EnergyLedger {
            e_in: 0.0,
            e_refl: 0.0,
            e_diss: 0.0,
            stored_final: 0.0,
            resonator_final: 0.0,
            qubits_final: [0.0; 3],
            residual: 0.0,
        },
        stats,
    };
    for (t, y) in samples.iter().zip(&ys) {
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability {
                t: *t,
                dt: opts.sample_dt,
            });
        }
        let s = BlochState::unpack(y);
        let b_in = drive.eval(*t);
        tr.b_out.push(-b_in + k_r * s.a);
        tr.b_in.push(b_in);
        tr.states.push(s);
        tr.e_in.push(y[IDX_IN]);
        tr.e_refl.push(y[IDX_REFL]);
        tr.e_diss.push(y[IDX_DISS]);
    }
    let last = *tr.states.last().expect("at least one sample");
    let l = &mut tr.ledger;
    l.e_in = *tr.e_in.last().unwrap();
    l.e_refl = *tr.e_refl.last().unwrap();
    l.e_diss = *tr.e_diss.last().unwrap();
    l.resonator_final = last.a.norm_sqr();
    l.qubits_final = [0, 1, 2].map(|j| last.excitation(j, mode));
    l.stored_final = last.stored(mode);
    l.residual = l.e_in - l.e_refl - l.stored_final - l.e_diss;
    Ok(tr)
}

impl Trajectory {
    /// Sample index closest to `t`.
    pub fn index_at(&self, t: f64) -> usize {
        match self.t.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i >= self.t.len() => self.t.len() - 1,
            Err(i) => {
                if (self.t[i] - t).abs() < (t - self.t[i - 1]).abs() {
                    i
                } else {
                    i - 1
                }
            }
        }
    }

    /// Excitation of emitter `j` at each sample.
    pub fn excitation(&self, j: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.excitation(j, self.mode)).collect()
    }

    pub fn peak_excitation(&self, j: usize) -> f64 {
        self.excitation(j).into_iter().fold(0.0, f64::max)
    }

    /// Reflected over injected number up to sample `idx`.
    pub fn reflected_fraction_until(&self, idx: usize) -> Result<f64> {
        let e_in = self.e_in[idx];
        if !(e_in > 0.0) {
            return Err(Error::ZeroInput);
        }
        Ok(self.e_refl[idx] / e_in)
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::with_capacity(self.t.len() * 300);
        if let Some(c) = comment {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str(
            "t_ns,re_a,im_a,re_sm1,re_sm2,re_sm3,im_sm1,im_sm2,im_sm3,sz1,sz2,sz3,re_b_in,im_b_in,re_b_out,im_b_out\n",
        );
        for k in 0..self.t.len() {
            let st = &self.states[k];
            let mut row = vec![self.t[k], st.a.re, st.a.im];
            row.extend(st.sm.iter().map(|z| z.re));
            row.extend(st.sm.iter().map(|z| z.im));
            row.extend(st.sz);
            row.extend([self.b_in[k].re, self.b_in[k].im, self.b_out[k].re, self.b_out[k].im]);
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// `E_refl / E_in` over the whole run.
pub fn reflected_fraction(traj: &Trajectory) -> Result<f64> {
    traj.reflected_fraction_until(traj.t.len() - 1)
}
