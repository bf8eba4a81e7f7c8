//! Classical three-transmon circuit: nonlinear transient, small-signal
//! reflection, and lossless eigenfrequencies.
//!
//! Nodes are `P` (port, behind `Z_0` from a Thevenin source), `B` (bus,
//! `P–B` through `C_k`) and `Q1..Q3` (`B–Qj` through `C_c[j]`, `Qj` to ground
//! through `C_j ∥ JJ_j ∥ R`).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{null_vector, symmetric_eigen, CMatrix};
use crate::model::{CircuitParams, ComplexFreq, FLUX_QUANTUM};
use crate::ode::rk4_step;
use crate::poly::{poly_det, roots, Poly};
use crate::pulse::Waveform;
use crate::response::{
    dominant_from_participation, find_features, nearest_pole, DominantMode, FeatureKind, FreqUnit, RationalReflection,
    SpectralFeature, VarMap, DEGENERACY_REL,
};

const NODES: usize = 5;
const P: usize = 0;
const B: usize = 1;
const Q0: usize = 2;

/// Junction current above which the linear-regime guard fires (fraction of `I_c`).
pub const GUARD_FRACTION: f64 = 0.05;
/// Target peak junction current for protocol drives (fraction of `I_c`).
pub const DRIVE_FRACTION: f64 = 0.02;
/// Default RK4 step (s).
pub const DEFAULT_DT: f64 = 1e-12;
/// Largest step `transient` accepts (s).
pub const MAX_DT: f64 = 2e-12;
/// Ledger residual allowed per unit of injected energy.
pub const LEDGER_REL: f64 = 1e-3;
/// Relative change above which a step-halving check is flagged.
pub const CONVERGENCE_LIMIT: f64 = 5e-3;

/// Nodal capacitance matrix over `P, B, Q1..3`.
pub fn capacitance_matrix(p: &CircuitParams) -> [[f64; NODES]; NODES] {
    let mut c = [[0.0; NODES]; NODES];
    let (ck, cc, cj) = (p.c_k(), p.c_c(), p.c_j());
    c[P][P] = ck;
    c[P][B] = -ck;
    c[B][P] = -ck;
    c[B][B] = ck + cc.iter().sum::<f64>();
    for j in 0..3 {
        c[B][Q0 + j] = -cc[j];
        c[Q0 + j][B] = -cc[j];
        c[Q0 + j][Q0 + j] = cj[j] + cc[j];
    }
    c
}

fn invert_spd(c: &[[f64; NODES]; NODES]) -> Result<[[f64; NODES]; NODES]> {
    let rows: Vec<Vec<Complex64>> = c
        .iter()
        .map(|r| r.iter().map(|&v| Complex64::new(v, 0.0)).collect())
        .collect();
    let m = CMatrix::from_rows(&rows);
    let mut inv = [[0.0; NODES]; NODES];
    for k in 0..NODES {
        let mut e = vec![Complex64::default(); NODES];
        e[k] = Complex64::new(1.0, 0.0);
        let col = m.solve(&e).map_err(|_| {
            Error::Domain("capacitance matrix is singular: every node needs a capacitive path to ground".into())
        })?;
        for i in 0..NODES {
            inv[i][k] = col[i].re;
        }
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardWarning {
    pub qubit: usize,
    pub t: f64,
    /// Peak `|I_j| / I_c`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitLedger {
    pub e_in: f64,
    pub e_refl: f64,
    pub e_diss: f64,
    pub stored_final: f64,
    pub residual: f64,
}

/// Sampled run of [`transient`].
#[derive(Debug, Clone)]
pub struct CircuitTrace {
    pub t: Vec<f64>,
    /// Node voltages `P, B, Q1, Q2, Q3`.
    pub v: Vec<[f64; NODES]>,
    pub phi: Vec<[f64; 3]>,
    pub current: Vec<[f64; 3]>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    /// Branch energies `½C_j V² + E_J(1 − cos)` per qubit.
    pub e_qubit: Vec<[f64; 3]>,
    pub p_diss: Vec<f64>,
    pub e_in: Vec<f64>,
    pub e_refl: Vec<f64>,
    pub e_diss: Vec<f64>,
    pub ledger: CircuitLedger,
    /// Peak `|I_j|/I_c` over every step.
    pub peak_current_ratio: [f64; 3],
    pub warnings: Vec<GuardWarning>,
    pub dt: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TransientOptions {
    pub dt: f64,
    /// Keep every n-th step in the trace (the ledger uses every step).
    pub store_every: usize,
    /// Initial junction fluxes (Wb); everything else starts at rest.
    pub phi0: [f64; 3],
}

impl Default for TransientOptions {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            store_every: 10,
            phi0: [0.0; 3],
        }
    }
}

struct Model {
    c_inv: [[f64; NODES]; NODES],
    c: [[f64; NODES]; NODES],
    g_port: f64,
    g_shunt: f64,
    i_c: [f64; 3],
    e_j: [f64; 3],
    c_j: [f64; 3],
}

impl Model {
    fn new(p: &CircuitParams) -> Result<Self> {
        let c = capacitance_matrix(p);
        Ok(Self {
            c_inv: invert_spd(&c)?,
            c,
            g_port: 1.0 / p.z0(),
            g_shunt: p.r_shunt().map_or(0.0, |r| 1.0 / r),
            i_c: p.i_c(),
            e_j: p.josephson_energy(),
            c_j: p.c_j(),
        })
    }

    fn junction_current(&self, j: usize, phi: f64) -> f64 {
        self.i_c[j] * (2.0 * PI * phi / FLUX_QUANTUM).sin()
    }

    fn junction_energy(&self, j: usize, phi: f64) -> f64 {
        let h = (PI * phi / FLUX_QUANTUM).sin();
        2.0 * self.e_j[j] * h * h
    }

    /// y = [V(5), φ(3), E_in, E_refl, E_diss]
    fn rhs(&self, vs: f64, y: &[f64], dy: &mut [f64]) {
        let mut inj = [0.0; NODES];
        inj[P] = (vs - y[P]) * self.g_port;
        for j in 0..3 {
            inj[Q0 + j] = -self.g_shunt * y[Q0 + j] - self.junction_current(j, y[NODES + j]);
        }
        for i in 0..NODES {
            dy[i] = (0..NODES).map(|k| self.c_inv[i][k] * inj[k]).sum();
        }
        for j in 0..3 {
            dy[NODES + j] = y[Q0 + j];
        }
        let vp = 0.5 * vs;
        let vm = y[P] - vp;
        dy[8] = vp * vp * self.g_port;
        dy[9] = vm * vm * self.g_port;
        dy[10] = self.g_shunt * (0..3).map(|j| y[Q0 + j] * y[Q0 + j]).sum::<f64>();
    }

    fn stored(&self, y: &[f64]) -> f64 {
        let mut e = 0.0;
        for i in 0..NODES {
            for k in 0..NODES {
                e += 0.5 * y[i] * self.c[i][k] * y[k];
            }
        }
        e + (0..3).map(|j| self.junction_energy(j, y[NODES + j])).sum::<f64>()
    }

    fn qubit_energy(&self, j: usize, y: &[f64]) -> f64 {
        0.5 * self.c_j[j] * y[Q0 + j] * y[Q0 + j] + self.junction_energy(j, y[NODES + j])
    }
}

/// Fixed-step RK4 run from rest over `t_span` (seconds), with the source
/// voltage `V_s(t) = Re s(t)`.
pub fn transient(
    p: &CircuitParams,
    source: &Waveform,
    t_span: (f64, f64),
    opts: &TransientOptions,
) -> Result<CircuitTrace> {
    if !(opts.dt > 0.0) || opts.dt > MAX_DT {
        return Err(Error::Domain(format!(
            "time step {:.3e} s must lie in (0, {MAX_DT:.0e}] s",
            opts.dt
        )));
    }
    run_transient(p, source, t_span, opts)
}

fn run_transient(
    p: &CircuitParams,
    source: &Waveform,
    t_span: (f64, f64),
    opts: &TransientOptions,
) -> Result<CircuitTrace> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::Domain(format!("time span [{t0}, {t1}] is empty")));
    }
    let m = Model::new(p)?;
    let dt = opts.dt;
    let steps = ((t1 - t0) / dt).ceil() as usize;
    let store_every = opts.store_every.max(1);
    let mut y = vec![0.0; 11];
    y[NODES..NODES + 3].copy_from_slice(&opts.phi0);
    let stored0 = m.stored(&y);
    let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; 11]);
    let mut tmp = vec![0.0; 11];
    let cap = steps / store_every + 2;
    let mut tr = CircuitTrace {
        t: Vec::with_capacity(cap),
        v: Vec::with_capacity(cap),
        phi: Vec::with_capacity(cap),
        current: Vec::with_capacity(cap),
        v_plus: Vec::with_capacity(cap),
        v_minus: Vec::with_capacity(cap),
        e_qubit: Vec::with_capacity(cap),
        p_diss: Vec::with_capacity(cap),
        e_in: Vec::with_capacity(cap),
        e_refl: Vec::with_capacity(cap),
        e_diss: Vec::with_capacity(cap),
        ledger: CircuitLedger {
            e_in: 0.0,
            e_refl: 0.0,
            e_diss: 0.0,
            stored_final: 0.0,
            residual: 0.0,
        },
        peak_current_ratio: [0.0; 3],
        warnings: Vec::new(),
        dt,
    };
    let mut peak_t = [t0; 3];
    let vs_at = |t: f64| source.eval(t).re;
    let record = |tr: &mut CircuitTrace, t: f64, y: &[f64]| {
        let vs = vs_at(t);
        tr.t.push(t);
        tr.v.push([y[0], y[1], y[2], y[3], y[4]]);
        tr.phi.push([y[5], y[6], y[7]]);
        tr.current.push([0, 1, 2].map(|j| m.junction_current(j, y[NODES + j])));
        tr.v_plus.push(0.5 * vs);
        tr.v_minus.push(y[P] - 0.5 * vs);
        tr.e_qubit.push([0, 1, 2].map(|j| m.qubit_energy(j, y)));
        tr.p_diss
            .push(m.g_shunt * (0..3).map(|j| y[Q0 + j] * y[Q0 + j]).sum::<f64>());
        tr.e_in.push(y[8]);
        tr.e_refl.push(y[9]);
        tr.e_diss.push(y[10]);
    };
    record(&mut tr, t0, &y);
    let f = |t: f64, y: &[f64], dy: &mut [f64]| m.rhs(vs_at(t), y, dy);
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        let h = dt.min(t1 - t);
        rk4_step(&f, t, &mut y, h, &mut k, &mut tmp);
        let t_new = t0 + (n + 1) as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) || y[..NODES].iter().any(|v| v.abs() > 1e6) {
            return Err(Error::Instability { t: t_new.min(t1), dt });
        }
        for j in 0..3 {
            let r = m.junction_current(j, y[NODES + j]).abs() / m.i_c[j];
            if r > tr.peak_current_ratio[j] {
                tr.peak_current_ratio[j] = r;
                peak_t[j] = t_new;
            }
        }
        if (n + 1) % store_every == 0 || n + 1 == steps {
            record(&mut tr, t_new.min(t1), &y);
        }
    }
    for j in 0..3 {
        if tr.peak_current_ratio[j] > GUARD_FRACTION {
            tr.warnings.push(GuardWarning {
                qubit: j + 1,
                t: peak_t[j],
                ratio: tr.peak_current_ratio[j],
            });
        }
    }
    let l = &mut tr.ledger;
    l.e_in = y[8];
    l.e_refl = y[9];
    l.e_diss = y[10];
    l.stored_final = m.stored(&y);
    l.residual = l.e_in + stored0 - l.e_refl - l.stored_final - l.e_diss;
    Ok(tr)
}

impl CircuitTrace {
    pub fn index_at(&self, t: f64) -> usize {
        let k = self.t.partition_point(|&x| x < t);
        if k == 0 {
            0
        } else if k >= self.t.len() {
            self.t.len() - 1
        } else if (self.t[k] - t).abs() < (t - self.t[k - 1]).abs() {
            k
        } else {
            k - 1
        }
    }

    pub fn violates_guard(&self) -> bool {
        !self.warnings.is_empty()
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::with_capacity(self.t.len() * 400);
        if let Some(c) = comment {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str("t_s,V_P,V_B,V_Q1,V_Q2,V_Q3,phi_1,phi_2,phi_3,I_1,I_2,I_3,Vplus,Vminus,E_1,E_2,E_3,P_diss\n");
        for k in 0..self.t.len() {
            let mut row = vec![self.t[k]];
            row.extend(self.v[k]);
            row.extend(self.phi[k]);
            row.extend(self.current[k]);
            row.extend([self.v_plus[k], self.v_minus[k]]);
            row.extend(self.e_qubit[k]);
            row.push(self.p_diss[k]);
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            s.push_str(&line.join(","));
            s.push('\n');
        }
        s
    }
}

/// Reference angular frequency used to scale `s` (rad/s).
fn omega_ref(p: &CircuitParams) -> f64 {
    let b = p.bare_frequencies();
    b.iter().sum::<f64>() / 3.0
}

/// `S11 = num/den` in `x = s/ω_ref`, `s = −iω`.
pub fn s11_rational(p: &CircuitParams) -> Result<RationalReflection> {
    let w0 = omega_ref(p);
    let l = p.l_j0();
    let (cj, cc, ck) = (p.c_j(), p.c_c(), p.c_k());
    let g = p.r_shunt().map_or(0.0, |r| 1.0 / r);
    let q: Vec<Poly> = (0..3)
        .map(|j| Poly::from_real(&[1.0, w0 * l[j] * g, w0 * w0 * l[j] * cj[j]]))
        .collect();
    let pp: Vec<Poly> = (0..3)
        .map(|j| Poly::from_real(&[1.0, w0 * l[j] * g, w0 * w0 * l[j] * (cj[j] + cc[j])]))
        .collect();
    // everything divided by C_k
    let mut ny = Poly::zero();
    for j in 0..3 {
        let mut term = q[j].scale(Complex64::new(cc[j] / ck, 0.0));
        for (k, pk) in pp.iter().enumerate() {
            if k != j {
                term = &term * pk;
            }
        }
        ny = &ny + &term;
    }
    let prod = &(&pp[0] * &pp[1]) * &pp[2];
    let base = &ny + &prod;
    let sny = &Poly::from_real(&[0.0, p.z0() * w0 * ck]) * &ny;
    let num = &base - &sny;
    let den = &base + &sny;
    RationalReflection::new(
        num,
        den,
        VarMap {
            scale: Complex64::new(0.0, -1.0 / w0),
            shift: Complex64::default(),
        },
        w0,
        FreqUnit::RadPerS,
        true,
    )
}

/// Direct `Z_in`-based evaluation of `S11(ω)`.
pub fn s11_direct(p: &CircuitParams, omega: ComplexFreq) -> Complex64 {
    let s = Complex64::new(0.0, -1.0) * omega.to_complex();
    let l = p.l_j0();
    let g = p.r_shunt().map_or(0.0, |r| 1.0 / r);
    let mut y_sum = Complex64::default();
    for j in 0..3 {
        let yq = s * p.c_j()[j] + 1.0 / (s * l[j]) + g;
        let yc = s * p.c_c()[j];
        y_sum += yc * yq / (yc + yq);
    }
    let z_in = 1.0 / (s * p.c_k()) + 1.0 / y_sum;
    (z_in - p.z0()) / (z_in + p.z0())
}

/// `S11(ω)` with the pole-proximity guard.
pub fn small_signal_s11(p: &CircuitParams, omega: ComplexFreq) -> Result<Complex64> {
    let rr = s11_rational(p)?;
    rr.reflection(omega)?;
    Ok(s11_direct(p, omega))
}

/// Cached evaluator for heatmaps.
#[derive(Debug, Clone)]
pub struct S11Evaluator {
    p: CircuitParams,
    rational: RationalReflection,
}

impl S11Evaluator {
    pub fn new(p: &CircuitParams) -> Result<Self> {
        Ok(Self {
            p: p.clone(),
            rational: s11_rational(p)?,
        })
    }

    pub fn rational(&self) -> &RationalReflection {
        &self.rational
    }

    pub fn eval(&self, omega: ComplexFreq) -> Result<Complex64> {
        self.rational.reflection(omega)?;
        Ok(s11_direct(&self.p, omega))
    }
}

/// Nodal admittance `sC + G + Γ/s` with the source shorted.
fn admittance(p: &CircuitParams, s: Complex64) -> CMatrix {
    let c = capacitance_matrix(p);
    let l = p.l_j0();
    let g = p.r_shunt().map_or(0.0, |r| 1.0 / r);
    let mut m = CMatrix::zeros(NODES);
    for i in 0..NODES {
        for k in 0..NODES {
            m.set(i, k, s * c[i][k]);
        }
    }
    m.set(P, P, m.get(P, P) + 1.0 / p.z0());
    for j in 0..3 {
        let q = Q0 + j;
        m.set(q, q, m.get(q, q) + g + 1.0 / (s * l[j]));
    }
    m
}

/// Capacitive energy shares `[bus, Q1, Q2, Q3]` of a nodal voltage pattern.
/// Coupling and port capacitors count towards the bus.
fn participation(p: &CircuitParams, v: &[Complex64]) -> [f64; 4] {
    let (ck, cc, cj) = (p.c_k(), p.c_c(), p.c_j());
    let mut w = [0.0; 4];
    w[0] = ck * (v[P] - v[B]).norm_sqr();
    for j in 0..3 {
        w[0] += cc[j] * (v[B] - v[Q0 + j]).norm_sqr();
        w[j + 1] = cj[j] * v[Q0 + j].norm_sqr();
    }
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Poles or zeros of `S11`, labeled by the mode pattern at the nearest pole.
pub fn find_circuit_features(p: &CircuitParams, kind: FeatureKind) -> Result<Vec<SpectralFeature>> {
    let rr = s11_rational(p)?;
    let feats = find_features(&rr, kind)?;
    let poles: Vec<ComplexFreq> = find_features(&rr, FeatureKind::Pole)?
        .iter()
        .map(|f| f.location)
        .collect();
    feats
        .into_iter()
        .map(|mut f| {
            let k = nearest_pole(&poles, f.location).ok_or_else(|| Error::Undefined("circuit has no poles".into()))?;
            let s = Complex64::new(0.0, -1.0) * poles[k].to_complex();
            let nv = null_vector(&admittance(p, s));
            let part = participation(p, &nv.vector);
            f.participation = part;
            f.dominant = Some(dominant_from_participation(
                &part,
                nv.is_degenerate(DEGENERACY_REL),
                DominantMode::Bus,
            ));
            Ok(f)
        })
        .collect()
}

/// Node-voltage phasors per unit source phasor at complex frequency `ω`.
pub fn transfer(p: &CircuitParams, omega: ComplexFreq) -> Result<Vec<Complex64>> {
    let s = Complex64::new(0.0, -1.0) * omega.to_complex();
    let mut rhs = vec![Complex64::default(); NODES];
    rhs[P] = Complex64::new(1.0 / p.z0(), 0.0);
    admittance(p, s).solve(&rhs)
}

/// Source amplitude (V) whose steady-state response at `ω` peaks at
/// `fraction·I_c` in the most strongly driven junction, given the largest
/// envelope factor `envelope_peak` the pulse reaches.
pub fn drive_amplitude(p: &CircuitParams, omega: ComplexFreq, envelope_peak: f64, fraction: f64) -> Result<f64> {
    let v = transfer(p, omega)?;
    let s = Complex64::new(0.0, -1.0) * omega.to_complex();
    let l = p.l_j0();
    let ic = p.i_c();
    let worst = (0..3)
        .map(|j| (v[Q0 + j] / (s * l[j])).norm() / ic[j])
        .fold(0.0, f64::max);
    if !(worst > 0.0) {
        return Err(Error::Undefined("the source does not reach any junction".into()));
    }
    Ok(fraction / (worst * envelope_peak))
}

/// Port condition for the lossless eigenmode problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PortBoundary {
    /// `C_k` removed.
    #[default]
    Open,
    /// `C_k` from the bus to ground.
    Grounded,
}

/// Reactive matrices `(C, Γ)` over `B, Q1..3` for the eigenmode problem.
fn reactive_matrices(p: &CircuitParams, boundary: PortBoundary) -> ([[f64; 4]; 4], [f64; 4]) {
    let (cc, cj) = (p.c_c(), p.c_j());
    let mut c = [[0.0; 4]; 4];
    c[0][0] = cc.iter().sum::<f64>()
        + if boundary == PortBoundary::Grounded {
            p.c_k()
        } else {
            0.0
        };
    for j in 0..3 {
        c[0][j + 1] = -cc[j];
        c[j + 1][0] = -cc[j];
        c[j + 1][j + 1] = cj[j] + cc[j];
    }
    let l = p.l_j0();
    (c, [0.0, 1.0 / l[0], 1.0 / l[1], 1.0 / l[2]])
}

/// Lossless eigenfrequencies (rad/s, ascending) as the positive roots of
/// the characteristic polynomial `det(Γ − ω²C)`. Loses accuracy near
/// degenerate roots; [`eigenfrequencies`] is the robust path.
pub fn eigenfrequencies_poly(p: &CircuitParams, boundary: PortBoundary) -> Result<Vec<f64>> {
    let (c, gamma) = reactive_matrices(p, boundary);
    let c_ref = p.c_j().iter().sum::<f64>() / 3.0;
    let l_ref = p.l_j0().iter().sum::<f64>() / 3.0;
    // μ = ω²/ω0²; entries scaled by L_ref so they are O(1)
    let floating = c[0][0] == 0.0;
    let idx: Vec<usize> = if floating { vec![1, 2, 3] } else { vec![0, 1, 2, 3] };
    let m: Vec<Vec<Poly>> = idx
        .iter()
        .map(|&i| {
            idx.iter()
                .map(|&k| {
                    let g = if i == k { gamma[i] * l_ref } else { 0.0 };
                    Poly::from_real(&[g, -c[i][k] / c_ref])
                })
                .collect()
        })
        .collect();
    let det = poly_det(&m);
    let mut out: Vec<f64> = roots(&det)?
        .into_iter()
        .filter(|mu| mu.re > 1e-9 && mu.im.abs() <= 1e-6 * mu.re.max(1.0))
        .map(|mu| (mu.re / (l_ref * c_ref)).sqrt())
        .collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

/// Lossless eigenfrequencies (rad/s, ascending) from the generalized
/// symmetric problem `Γv = ω²Cv`, via Cholesky and Jacobi.
pub fn eigenfrequencies(p: &CircuitParams, boundary: PortBoundary) -> Result<Vec<f64>> {
    let (c, gamma) = reactive_matrices(p, boundary);
    let idx: Vec<usize> = if c[0][0] == 0.0 {
        vec![1, 2, 3]
    } else {
        vec![0, 1, 2, 3]
    };
    let n = idx.len();
    // C = LLᵀ, then eig of L⁻¹ Γ L⁻ᵀ
    let mut lo = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..=i {
            let s: f64 = (0..k).map(|m| lo[i][m] * lo[k][m]).sum();
            let cik = c[idx[i]][idx[k]];
            if i == k {
                lo[i][i] = (cik - s).sqrt();
            } else {
                lo[i][k] = (cik - s) / lo[k][k];
            }
        }
    }
    let mut linv = vec![vec![0.0; n]; n];
    for col in 0..n {
        for i in 0..n {
            let rhs = if i == col { 1.0 } else { 0.0 };
            let s: f64 = (0..i).map(|m| lo[i][m] * linv[m][col]).sum();
            linv[i][col] = (rhs - s) / lo[i][i];
        }
    }
    let a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|k| (0..n).map(|m| linv[i][m] * gamma[idx[m]] * linv[k][m]).sum())
                .collect()
        })
        .collect();
    let (vals, _) = symmetric_eigen(&a);
    let top = vals.iter().copied().fold(0.0, f64::max);
    if !vals.iter().all(|v| v.is_finite()) {
        return Err(Error::Undefined("eigenproblem produced non-finite values".into()));
    }
    Ok(vals.into_iter().filter(|&v| v > 1e-9 * top).map(f64::sqrt).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub inductance: Vec<f64>,
    /// Bare frequency of qubit 1 at each point (rad/s).
    pub bare_omega1: Vec<f64>,
    pub curves: Vec<[f64; 3]>,
}

impl SweepResult {
    /// Local minima of the gap between adjacent curves: `(index, lower curve, gap)`.
    pub fn gap_minima(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for c in 0..2 {
            let gap: Vec<f64> = self.curves.iter().map(|w| w[c + 1] - w[c]).collect();
            for i in 1..gap.len().saturating_sub(1) {
                if gap[i] <= gap[i - 1] && gap[i] <= gap[i + 1] {
                    out.push((i, c, gap[i]));
                }
            }
        }
        out
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str("L_j1,bare_omega1,omega_1,omega_2,omega_3\n");
        for k in 0..self.curves.len() {
            let w = self.curves[k];
            s.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.inductance[k], self.bare_omega1[k], w[0], w[1], w[2]
            ));
        }
        s
    }
}

/// Sweep qubit 1's junction inductance over `l_range` and track the three
/// eigenfrequencies.
pub fn eigenfrequency_sweep(
    p: &CircuitParams,
    l_range: (f64, f64),
    n_points: usize,
    boundary: PortBoundary,
) -> Result<SweepResult> {
    if n_points < 2 || !(l_range.0 > 0.0 && l_range.1 > l_range.0) {
        return Err(Error::Domain(
            "sweep needs a positive increasing range and at least two points".into(),
        ));
    }
    let mut res = SweepResult {
        inductance: vec![],
        bare_omega1: vec![],
        curves: vec![],
    };
    for k in 0..n_points {
        let l = l_range.0 + (l_range.1 - l_range.0) * k as f64 / (n_points - 1) as f64;
        let q = p.clone().with_inductance(0, l)?;
        let w = eigenfrequencies(&q, boundary)?;
        if w.len() != 3 {
            return Err(Error::LostBranch {
                index: k,
                found: w.len(),
            });
        }
        res.inductance.push(l);
        res.bare_omega1.push(q.bare_frequencies()[0]);
        res.curves.push([w[0], w[1], w[2]]);
    }
    Ok(res)
}

/// Inductance range putting qubit 1's bare frequency at `(1 ± span)` times nominal.
pub fn inductance_range_for_span(p: &CircuitParams, span: f64) -> (f64, f64) {
    let l = p.l_j0()[0];
    // ω ∝ L^{-1/2}
    (l / (1.0 + span).powi(2), l / (1.0 - span).powi(2))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub dt: f64,
    pub max_relative_change: f64,
    pub qubit_energy_change: [f64; 3],
    pub reflected_energy_change: f64,
    pub flagged: bool,
    /// Set when either run blew up.
    pub unstable: bool,
}

/// Rerun at `dt` and `dt/2` and compare final qubit energies and reflected energy.
pub fn convergence_check(
    p: &CircuitParams,
    source: &Waveform,
    t_span: (f64, f64),
    dt: f64,
) -> Result<ConvergenceReport> {
    if !(dt >= 0.25e-12) {
        return Err(Error::Domain(format!(
            "convergence check needs dt ≥ 0.25 ps, got {dt:.3e}"
        )));
    }
    let run = |h: f64| {
        run_transient(
            p,
            source,
            t_span,
            &TransientOptions {
                dt: h,
                store_every: usize::MAX,
                ..Default::default()
            },
        )
    };
    let unstable = ConvergenceReport {
        dt,
        max_relative_change: f64::INFINITY,
        qubit_energy_change: [f64::INFINITY; 3],
        reflected_energy_change: f64::INFINITY,
        flagged: true,
        unstable: true,
    };
    let (fine, coarse) = match (run(dt / 2.0), run(dt)) {
        (Ok(f), Ok(c)) => (f, c),
        (Err(Error::Instability { .. }), _) | (_, Err(Error::Instability { .. })) => return Ok(unstable),
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    // changes are measured against the observable or, when that is tiny, the ledger scale
    let floor = LEDGER_REL * fine.ledger.e_in.max(coarse.ledger.e_in);
    let rel = |a: f64, b: f64| {
        let d = a.abs().max(b.abs()).max(floor);
        if d == 0.0 {
            0.0
        } else {
            (a - b).abs() / d
        }
    };
    let ef = fine.e_qubit.last().copied().unwrap_or_default();
    let ec = coarse.e_qubit.last().copied().unwrap_or_default();
    let qubit_energy_change = [0, 1, 2].map(|j| rel(ef[j], ec[j]));
    let reflected_energy_change = rel(fine.ledger.e_refl, coarse.ledger.e_refl);
    let max = qubit_energy_change
        .iter()
        .copied()
        .fold(reflected_energy_change, f64::max);
    Ok(ConvergenceReport {
        dt,
        max_relative_change: max,
        qubit_energy_change,
        reflected_energy_change,
        flagged: max > CONVERGENCE_LIMIT,
        unstable: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulse::cf_waveform;

    fn pd() -> CircuitParams {
        CircuitParams::reference()
    }

    #[test]
    fn capacitance_matrix_is_spd() {
        let c = capacitance_matrix(&pd());
        for i in 0..NODES {
            for k in 0..NODES {
                assert_eq!(c[i][k], c[k][i]);
            }
        }
        let (vals, _) = symmetric_eigen(&c.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
        assert!(vals[0] > 0.0);
    }

    #[test]
    fn rational_matches_direct() {
        let p = CircuitParams::reference_lossy();
        let rr = s11_rational(&p).unwrap();
        for w in [
            ComplexFreq::new(4.7e10, 1e8),
            ComplexFreq::new(5.0e10, -3e8),
            ComplexFreq::new(3e10, 0.0),
        ] {
            let a = rr.eval(w.to_complex());
            let b = s11_direct(&p, w);
            assert!((a - b).norm() < 1e-9 * b.norm().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn lossless_unitary() {
        let p = pd();
        for k in 0..50 {
            let w = ComplexFreq::real(4.5e10 + k as f64 * 1e8);
            assert!((small_signal_s11(&p, w).unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_drive_zero_trace() {
        let src = cf_waveform(ComplexFreq::real(4.8e10), Complex64::default(), 0.0, 1e-9, 0.0).unwrap();
        let tr = transient(&pd(), &src, (0.0, 2e-9), &TransientOptions::default()).unwrap();
        assert!(tr.v.iter().flatten().all(|&v| v == 0.0));
        assert!(tr.v_plus.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_limit_enforced() {
        let src = cf_waveform(ComplexFreq::real(4.8e10), Complex64::default(), 0.0, 1e-9, 0.0).unwrap();
        let o = TransientOptions {
            dt: 5e-12,
            ..Default::default()
        };
        assert!(transient(&pd(), &src, (0.0, 2e-9), &o).is_err());
    }

    #[test]
    fn decoupled_eigenfrequencies_are_bare() {
        let p = pd().with_coupling_caps([0.0; 3]).unwrap();
        let w = eigenfrequencies(&p, PortBoundary::Open).unwrap();
        let bare = p.bare_frequencies();
        assert_eq!(w.len(), 3);
        for (a, b) in w.iter().zip(bare) {
            assert!((a / b - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn polynomial_and_dense_eigen_agree() {
        for boundary in [PortBoundary::Open, PortBoundary::Grounded] {
            let p = pd();
            let a = eigenfrequencies_poly(&p, boundary).unwrap();
            let b = eigenfrequencies(&p, boundary).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert!((x / y - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn reference_features_one_per_qubit() {
        let zeros = find_circuit_features(&pd(), FeatureKind::Zero).unwrap();
        let mut qubits: Vec<usize> = zeros
            .iter()
            .filter_map(|z| z.dominant.and_then(|d| d.qubit()))
            .collect();
        qubits.sort();
        assert_eq!(qubits, vec![1, 2, 3]);
        assert!(zeros.iter().any(|z| z.dominant == Some(DominantMode::Bus)));
    }

    #[test]
    fn identical_qubits_have_degenerate_dark_pair() {
        let p = pd().with_coupling_caps([10e-15; 3]).unwrap();
        let w = eigenfrequencies(&p, PortBoundary::Open).unwrap();
        assert_eq!(w.len(), 3);
        assert!((w[1] / w[0] - 1.0).abs() < 1e-10);
        assert!(w[2] > w[1] * (1.0 + 1e-4));
        let dark = 1.0 / (p.l_j0()[0] * (p.c_j()[0] + 10e-15)).sqrt();
        assert!((w[0] / dark - 1.0).abs() < 1e-10);
    }

    #[test]
    fn convergence_identity_report_fields() {
        let src = cf_waveform(
            ComplexFreq::new(4.878e10, -2.7e7),
            Complex64::new(1e-5, 0.0),
            0.0,
            2e-9,
            0.0,
        )
        .unwrap();
        let r = convergence_check(&pd(), &src, (0.0, 2e-9), 1e-12).unwrap();
        assert!(!r.unstable);
        assert!(r.max_relative_change.is_finite());
        assert!(convergence_check(&pd(), &src, (0.0, 2e-9), 0.1e-12).is_err());
    }
}
