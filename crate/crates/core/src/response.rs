//! Linearized frequency-domain response of the Bloch model: the 4×4 system
//! matrix, the reflection coefficient, and its poles and zeros.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{null_vector, CMatrix};
use crate::model::{BlochParams, ComplexFreq};
use crate::poly::{poly_det, relative_residual, roots, Poly};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Roots of numerator and denominator closer than this (relative to the
/// model's reference frequency) cancel pairwise.
pub const CANCEL_REL: f64 = 1e-7;
/// Evaluations closer than this (relative) to a pole are refused.
pub const POLE_GUARD_REL: f64 = 1e-12;
/// Zeros must satisfy `|r| <` this after refinement.
pub const ZERO_CHECK: f64 = 1e-8;
/// Relative singular-value gap below which a null space counts as degenerate.
pub const DEGENERACY_REL: f64 = 1e-6;

/// Unit of the angular frequencies stored in a feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreqUnit {
    RadPerNs,
    RadPerS,
}

impl FreqUnit {
    /// Factor converting this unit to rad/ns.
    pub fn to_rad_ns(self) -> f64 {
        match self {
            FreqUnit::RadPerNs => 1.0,
            FreqUnit::RadPerS => 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Pole,
    Zero,
}

/// Which mode carries most of a feature's excitation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DominantMode {
    /// The resonator (Bloch model).
    Resonator,
    /// The bus node (circuit model).
    Bus,
    /// Qubit number 1..=3.
    Qubit(u8),
    Mixed,
}

impl DominantMode {
    pub fn qubit(self) -> Option<usize> {
        match self {
            DominantMode::Qubit(q) => Some(q as usize),
            _ => None,
        }
    }
}

/// A pole or zero of the reflection coefficient.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFeature {
    pub kind: FeatureKind,
    pub location: ComplexFreq,
    pub unit: FreqUnit,
    pub dominant: Option<DominantMode>,
    /// Normalized excitation fractions: [resonator or bus, Q1, Q2, Q3].
    pub participation: [f64; 4],
}

impl SpectralFeature {
    pub fn record(&self) -> FeatureRecord {
        let k = self.unit.to_rad_ns();
        let to_hz = |w: f64| w * k * 1e9 / (2.0 * std::f64::consts::PI);
        FeatureRecord {
            kind: self.kind,
            re_hz: to_hz(self.location.re),
            im_hz: to_hz(self.location.im),
            re_rad_ns: self.location.re * k,
            im_rad_ns: self.location.im * k,
            dominant_qubit: self.dominant.map(|d| match d {
                DominantMode::Qubit(q) => DominantLabel::Qubit(q),
                DominantMode::Resonator => DominantLabel::Name("resonator".into()),
                DominantMode::Bus => DominantLabel::Name("bus".into()),
                DominantMode::Mixed => DominantLabel::Name("mixed".into()),
            }),
            participation: self.participation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DominantLabel {
    Qubit(u8),
    Name(String),
}

/// Export form of a [`SpectralFeature`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub kind: FeatureKind,
    #[serde(rename = "re_Hz")]
    pub re_hz: f64,
    #[serde(rename = "im_Hz")]
    pub im_hz: f64,
    pub re_rad_ns: f64,
    pub im_rad_ns: f64,
    pub dominant_qubit: Option<DominantLabel>,
    pub participation: [f64; 4],
}

/// Row names for qubit-dominated zeros ordered by real part.
pub fn position_name(index: usize, count: usize) -> String {
    match (index, count) {
        (0, _) => "Leftmost".into(),
        (i, n) if i + 1 == n => "Rightmost".into(),
        (_, 3) => "Middle".into(),
        (i, _) => format!("Middle {i}"),
    }
}

/// `M(ω)·v = s` for `v = (A, Σ1, Σ2, Σ3)`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    p: BlochParams,
}

pub fn build_linear_system(p: &BlochParams) -> LinearSystem {
    LinearSystem { p: p.clone() }
}

impl LinearSystem {
    pub fn params(&self) -> &BlochParams {
        &self.p
    }

    pub fn alpha(&self, w: Complex64) -> Complex64 {
        I * (self.p.omega_c() - w) + self.p.radiative_rate() + self.p.internal_rate()
    }

    pub fn d(&self, j: usize, w: Complex64) -> Complex64 {
        I * (self.p.omega_a()[j] - w) + self.p.gamma_s()[j] / 2.0
    }

    pub fn matrix(&self, w: Complex64) -> CMatrix {
        let g = self.p.g();
        let mut m = CMatrix::zeros(4);
        m.set(0, 0, self.alpha(w));
        for j in 0..3 {
            m.set(0, j + 1, I * g[j]);
            m.set(j + 1, 0, I * g[j]);
            m.set(j + 1, j + 1, self.d(j, w));
        }
        m
    }

    /// `det D · (α + Σ g_j²/D_jj)`
    pub fn det_schur(&self, w: Complex64) -> Complex64 {
        let g = self.p.g();
        let d: Vec<Complex64> = (0..3).map(|j| self.d(j, w)).collect();
        let prod: Complex64 = d.iter().product();
        let mut acc = self.alpha(w) * prod;
        for j in 0..3 {
            let others: Complex64 = (0..3).filter(|&k| k != j).map(|k| d[k]).product();
            acc += g[j] * g[j] * others;
        }
        acc
    }

    pub fn source(&self, b0: Complex64) -> [Complex64; 4] {
        [
            self.p.k_r() * b0,
            Complex64::default(),
            Complex64::default(),
            Complex64::default(),
        ]
    }

    /// Steady-state amplitudes under `b_in = b0 e^{−iωt}`.
    pub fn amplitudes(&self, omega: ComplexFreq, b0: Complex64) -> Result<[Complex64; 4]> {
        let v = self.matrix(omega.to_complex()).solve(&self.source(b0))?;
        Ok([v[0], v[1], v[2], v[3]])
    }

    /// Entries of `M` as polynomials in `x = ω − centre`.
    fn poly_matrix(&self, centre: f64) -> Vec<Vec<Poly>> {
        let g = self.p.g();
        let mut m = vec![vec![Poly::zero(); 4]; 4];
        let gamma = self.p.radiative_rate() + self.p.internal_rate();
        m[0][0] = Poly::linear(I * (self.p.omega_c() - centre) + gamma, -I);
        for j in 0..3 {
            m[0][j + 1] = Poly::constant(I * g[j]);
            m[j + 1][0] = Poly::constant(I * g[j]);
            m[j + 1][j + 1] = Poly::linear(I * (self.p.omega_a()[j] - centre) + self.p.gamma_s()[j] / 2.0, -I);
        }
        m
    }
}

/// Affine map `x = scale·ω + shift` from angular frequency to the
/// polynomial variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarMap {
    pub scale: Complex64,
    pub shift: Complex64,
}

impl VarMap {
    pub fn to_var(&self, w: Complex64) -> Complex64 {
        self.scale * w + self.shift
    }
    pub fn to_freq(&self, x: Complex64) -> Complex64 {
        (x - self.shift) / self.scale
    }
}

/// Reflection coefficient as a ratio of polynomials.
#[derive(Debug, Clone)]
pub struct RationalReflection {
    pub num: Poly,
    pub den: Poly,
    pub map: VarMap,
    /// Absolute cancellation distance in frequency units.
    pub cancel_tol: f64,
    /// Reference frequency for relative tolerances.
    pub freq_scale: f64,
    pub unit: FreqUnit,
    /// Number of pole/zero pairs removed by cancellation.
    pub cancelled: usize,
    /// Drop features with negative real frequency (mirror images).
    pub positive_only: bool,
}

impl RationalReflection {
    /// Cancel common roots and assemble.
    pub fn new(
        num: Poly,
        den: Poly,
        map: VarMap,
        freq_scale: f64,
        unit: FreqUnit,
        positive_only: bool,
    ) -> Result<Self> {
        let cancel_tol = CANCEL_REL * freq_scale;
        let zr = roots(&num)?;
        let pr = roots(&den)?;
        let mut pole_used = vec![false; pr.len()];
        let mut zero_keep = vec![true; zr.len()];
        let mut cancelled = 0;
        for (i, z) in zr.iter().enumerate() {
            let wz = map.to_freq(*z);
            let nearest = (0..pr.len())
                .filter(|&k| !pole_used[k])
                .map(|k| (k, (map.to_freq(pr[k]) - wz).norm()))
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
            if let Some((k, d)) = nearest {
                if d <= cancel_tol {
                    pole_used[k] = true;
                    zero_keep[i] = false;
                    cancelled += 1;
                }
            }
        }
        let (num, den) = if cancelled == 0 {
            (num, den)
        } else {
            let kz: Vec<Complex64> = zr.iter().zip(&zero_keep).filter(|(_, &k)| k).map(|(z, _)| *z).collect();
            let kp: Vec<Complex64> = pr
                .iter()
                .zip(&pole_used)
                .filter(|(_, &u)| !u)
                .map(|(z, _)| *z)
                .collect();
            (
                Poly::from_roots(num.leading(), &kz),
                Poly::from_roots(den.leading(), &kp),
            )
        };
        Ok(Self {
            num,
            den,
            map,
            cancel_tol,
            freq_scale,
            unit,
            cancelled,
            positive_only,
        })
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let x = self.map.to_var(w);
        self.num.eval(x) / self.den.eval(x)
    }

    /// Upper bound on the distance from `w` to the nearest pole, via `n·|den/den'|`.
    pub fn pole_distance_estimate(&self, w: Complex64) -> f64 {
        let x = self.map.to_var(w);
        let (v, dv) = self.den.eval_with_derivative(x);
        if self.den.degree() == 0 {
            return f64::INFINITY;
        }
        let dx = self.den.degree() as f64 * (v / dv).norm();
        dx / self.map.scale.norm()
    }

    fn check_pole(&self, omega: ComplexFreq) -> Result<()> {
        let d = self.pole_distance_estimate(omega.to_complex());
        if d <= POLE_GUARD_REL * self.freq_scale || !d.is_finite() {
            return Err(Error::PoleProximity { at: omega, distance: d });
        }
        Ok(())
    }

    /// Guarded evaluation.
    pub fn reflection(&self, omega: ComplexFreq) -> Result<Complex64> {
        self.check_pole(omega)?;
        Ok(self.eval(omega.to_complex()))
    }
}

/// Common-denominator form: `r = ((2/τ_r)ΠD − det M)/det M` in `x = ω − ω_c`.
pub fn build_rational(p: &BlochParams) -> Result<RationalReflection> {
    let (num, den) = raw_polynomials(p);
    RationalReflection::new(
        num,
        den,
        VarMap {
            scale: ONE,
            shift: Complex64::new(-p.omega_c(), 0.0),
        },
        p.omega_c(),
        FreqUnit::RadPerNs,
        false,
    )
}

fn raw_polynomials(p: &BlochParams) -> (Poly, Poly) {
    let sys = build_linear_system(p);
    let m = sys.poly_matrix(p.omega_c());
    let den = poly_det(&m);
    let prod_d = (1..4).fold(Poly::one(), |acc, j| &acc * &m[j][j]);
    let num = &prod_d.scale(Complex64::new(2.0 * p.radiative_rate(), 0.0)) - &den;
    (num, den)
}

/// Cached evaluator for repeated reflection queries on one parameter set.
#[derive(Debug, Clone)]
pub struct Reflector {
    sys: LinearSystem,
    rational: RationalReflection,
}

impl Reflector {
    pub fn new(p: &BlochParams) -> Result<Self> {
        Ok(Self {
            sys: build_linear_system(p),
            rational: build_rational(p)?,
        })
    }

    pub fn rational(&self) -> &RationalReflection {
        &self.rational
    }

    /// `r(ω) = −1 + (2/τ_r)/(α + Σ g²/D)`, refusing points next to a pole.
    pub fn eval(&self, omega: ComplexFreq) -> Result<Complex64> {
        self.rational.check_pole(omega)?;
        let p = self.sys.params();
        let w = omega.to_complex();
        let g = p.g();
        let mut s = self.sys.alpha(w);
        for j in 0..3 {
            if g[j] == 0.0 {
                continue;
            }
            let d = self.sys.d(j, w);
            if d == Complex64::default() {
                return Ok(-ONE);
            }
            s += g[j] * g[j] / d;
        }
        Ok(-ONE + 2.0 * p.radiative_rate() / s)
    }
}

/// `r(ω)` at one point.
pub fn reflection(p: &BlochParams, omega: ComplexFreq) -> Result<Complex64> {
    Reflector::new(p)?.eval(omega)
}

/// Poles or zeros of `rr`, Newton-polished and sorted by real part.
pub fn find_features(rr: &RationalReflection, kind: FeatureKind) -> Result<Vec<SpectralFeature>> {
    let poly = match kind {
        FeatureKind::Pole => &rr.den,
        FeatureKind::Zero => &rr.num,
    };
    let xs = roots(poly)?;
    let mut out = Vec::with_capacity(xs.len());
    for x in xs {
        let w = rr.map.to_freq(x);
        if rr.positive_only && w.re < -1e-6 * rr.freq_scale {
            continue;
        }
        let location = ComplexFreq::from_complex(w);
        match kind {
            FeatureKind::Zero => {
                let r = rr.eval(w).norm();
                if !(r < ZERO_CHECK) {
                    return Err(Error::RootVerification {
                        at: location,
                        residual: r,
                    });
                }
            }
            FeatureKind::Pole => {
                let res = relative_residual(&rr.den, x);
                if !(res < 1e-10) {
                    return Err(Error::RootVerification {
                        at: location,
                        residual: res,
                    });
                }
            }
        }
        out.push(SpectralFeature {
            kind,
            location,
            unit: rr.unit,
            dominant: None,
            participation: [0.0; 4],
        });
    }
    out.sort_by(|a, b| a.location.re.partial_cmp(&b.location.re).unwrap());
    Ok(out)
}

/// Index of the pole closest to `w` or to its mirror image; a radiative-only
/// zero sits exactly on a mirrored pole.
pub fn nearest_pole(poles: &[ComplexFreq], w: ComplexFreq) -> Option<usize> {
    (0..poles.len()).min_by(|&a, &b| {
        let da = poles[a].distance(w).min(poles[a].conj().distance(w));
        let db = poles[b].distance(w).min(poles[b].conj().distance(w));
        da.partial_cmp(&db).unwrap()
    })
}

/// Classify a participation vector whose slot 0 is the non-qubit mode.
///
/// Qubits with equal shares (symmetric or antisymmetric combinations) are
/// pooled; a pooled group that outweighs every other entry is `Mixed`.
pub fn dominant_from_participation(part: &[f64; 4], degenerate: bool, slot0: DominantMode) -> DominantMode {
    if degenerate {
        return DominantMode::Mixed;
    }
    let peak = part.iter().copied().fold(0.0, f64::max);
    let tied = |a: f64, b: f64| (a - b).abs() <= DEGENERACY_REL * peak;
    // (total share, member count, first member)
    let mut groups: Vec<(f64, usize, usize)> = vec![(part[0], 1, 0)];
    for q in 1..4 {
        match groups.iter_mut().skip(1).find(|g| tied(part[g.2], part[q])) {
            Some(g) => {
                g.0 += part[q];
                g.1 += 1;
            }
            None => groups.push((part[q], 1, q)),
        }
    }
    groups.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    if groups[0].1 > 1 || (groups.len() > 1 && tied(groups[0].0, groups[1].0)) {
        return DominantMode::Mixed;
    }
    match groups[0].2 {
        0 => slot0,
        q => DominantMode::Qubit(q as u8),
    }
}

/// Fill in participation and dominant mode from the null vector of `M` at
/// the pole nearest each feature.
pub fn label_features(features: &[SpectralFeature], p: &BlochParams) -> Result<Vec<SpectralFeature>> {
    let (_, den) = raw_polynomials(p);
    let centre = p.omega_c();
    let poles: Vec<ComplexFreq> = roots(&den)?
        .into_iter()
        .map(|x| ComplexFreq::from_complex(x + centre))
        .collect();
    let sys = build_linear_system(p);
    features
        .iter()
        .map(|f| {
            let k = nearest_pole(&poles, f.location).ok_or_else(|| Error::Undefined("system has no poles".into()))?;
            let nv = null_vector(&sys.matrix(poles[k].to_complex()));
            let total: f64 = nv.vector.iter().map(|z| z.norm_sqr()).sum();
            let mut part = [0.0; 4];
            for i in 0..4 {
                part[i] = nv.vector[i].norm_sqr() / total;
            }
            let degenerate = nv.is_degenerate(DEGENERACY_REL);
            let mut out = f.clone();
            out.participation = part;
            out.dominant = Some(dominant_from_participation(&part, degenerate, DominantMode::Resonator));
            Ok(out)
        })
        .collect()
}

/// Poles and zeros of the Bloch model, labeled.
pub fn bloch_features(p: &BlochParams) -> Result<(Vec<SpectralFeature>, Vec<SpectralFeature>)> {
    let rr = build_rational(p)?;
    let poles = label_features(&find_features(&rr, FeatureKind::Pole)?, p)?;
    let zeros = label_features(&find_features(&rr, FeatureKind::Zero)?, p)?;
    Ok((poles, zeros))
}

/// Rectangular region of the complex frequency plane (`im` uses the
/// [`ComplexFreq`] sign convention).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreqWindow {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl FreqWindow {
    pub fn contains(&self, w: ComplexFreq) -> bool {
        (self.re_min..=self.re_max).contains(&w.re) && (self.im_min..=self.im_max).contains(&w.im)
    }
}

/// Value stored in heatmap cells that sit on a pole.
pub const POLE_SENTINEL: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatmapGrid {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// `values[i][j]` is `|r|` at `(re[j], im[i])`.
    pub values: Vec<Vec<f64>>,
    /// Cells `(i, j)` holding [`POLE_SENTINEL`].
    pub flagged: Vec<(usize, usize)>,
    pub unit: FreqUnit,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
}

/// Sample `|f|` on a grid; rows are evaluated in parallel.
pub fn heatmap_with<F>(window: FreqWindow, n_re: usize, n_im: usize, unit: FreqUnit, f: F) -> Result<HeatmapGrid>
where
    F: Fn(ComplexFreq) -> Result<Complex64> + Sync,
{
    if n_re < 2 || n_im < 2 {
        return Err(Error::Domain(format!(
            "heatmap needs at least 2×2 samples, got {n_re}×{n_im}"
        )));
    }
    if !(window.re_max > window.re_min && window.im_max > window.im_min) {
        return Err(Error::Domain("heatmap window is empty".into()));
    }
    let re = linspace(window.re_min, window.re_max, n_re);
    let im = linspace(window.im_min, window.im_max, n_im);
    let rows: Vec<Result<(Vec<f64>, Vec<usize>)>> = im
        .par_iter()
        .map(|&y| {
            let mut row = Vec::with_capacity(n_re);
            let mut bad = Vec::new();
            for (j, &x) in re.iter().enumerate() {
                match f(ComplexFreq::new(x, y)) {
                    Ok(v) => row.push(v.norm()),
                    Err(Error::PoleProximity { .. }) => {
                        row.push(POLE_SENTINEL);
                        bad.push(j);
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok((row, bad))
        })
        .collect();
    let mut values = Vec::with_capacity(n_im);
    let mut flagged = Vec::new();
    for (i, r) in rows.into_iter().enumerate() {
        let (row, bad) = r?;
        flagged.extend(bad.into_iter().map(|j| (i, j)));
        values.push(row);
    }
    Ok(HeatmapGrid {
        re,
        im,
        values,
        flagged,
        unit,
    })
}

pub fn heatmap(p: &BlochParams, window: FreqWindow, n_re: usize, n_im: usize) -> Result<HeatmapGrid> {
    let r = Reflector::new(p)?;
    heatmap_with(window, n_re, n_im, FreqUnit::RadPerNs, |w| r.eval(w))
}

impl HeatmapGrid {
    /// Grid index `(i, j)` of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let mut best = (0, 0);
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < self.values[best.0][best.1] {
                    best = (i, j);
                }
            }
        }
        best
    }

    /// CSV: first row holds the real samples, first column the imaginary ones.
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            s.push_str(&format!("# {c}\n"));
        }
        s.push_str("im\\re");
        for x in &self.re {
            s.push_str(&format!(",{x:.12e}"));
        }
        s.push('\n');
        for (y, row) in self.im.iter().zip(&self.values) {
            s.push_str(&format!("{y:.12e}"));
            for v in row {
                s.push_str(&format!(",{v:.12e}"));
            }
            s.push('\n');
        }
        s
    }
}

/// JSON array of feature records.
pub fn features_json(features: &[SpectralFeature]) -> serde_json::Value {
    serde_json::to_value(features.iter().map(|f| f.record()).collect::<Vec<_>>()).expect("feature records serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pd() -> BlochParams {
        BlochParams::reference()
    }

    #[test]
    fn det_cofactor_matches_schur() {
        let sys = build_linear_system(&pd());
        for w in [
            Complex64::new(36.25, 0.0),
            Complex64::new(35.0, 1.3),
            Complex64::new(38.0, -0.4),
        ] {
            let a = sys.matrix(w).det_cofactor();
            let b = sys.det_schur(w);
            assert!((a - b).norm() <= 1e-12 * a.norm());
        }
    }

    #[test]
    fn decoupled_determinant() {
        let p = pd().with_couplings([0.0; 3]).unwrap();
        let sys = build_linear_system(&p);
        let w = Complex64::new(36.0, 0.2);
        let expected = sys.alpha(w) * sys.d(0, w) * sys.d(1, w) * sys.d(2, w);
        assert!((sys.matrix(w).det_cofactor() - expected).norm() < 1e-12 * expected.norm());
    }

    #[test]
    fn single_mode_closed_forms() {
        let p = pd().with_couplings([0.0; 3]).unwrap();
        let wc = p.omega_c();
        let r = reflection(&p, ComplexFreq::real(wc)).unwrap();
        assert!((r - ONE).norm() < 1e-12);
        // zero at ω_c + i/τ_r, i.e. a growing drive
        let z = ComplexFreq::from_complex(Complex64::new(wc, p.radiative_rate()));
        assert!(reflection(&p, z).unwrap().norm() < 1e-12);
    }

    #[test]
    fn cramer_matches_rational() {
        let p = pd();
        let rf = Reflector::new(&p).unwrap();
        let sys = build_linear_system(&p);
        let w = ComplexFreq::new(36.1, -0.2);
        let a = sys.amplitudes(w, ONE).unwrap();
        let cramer = -ONE + p.k_r() * a[0];
        let rat = rf.rational().eval(w.to_complex());
        let schur = rf.eval(w).unwrap();
        assert!((cramer - rat).norm() < 1e-10 * rat.norm().max(1.0));
        assert!((schur - rat).norm() < 1e-10 * rat.norm().max(1.0));
    }

    #[test]
    fn reference_features() {
        let (poles, zeros) = bloch_features(&pd()).unwrap();
        assert_eq!(poles.len(), 4);
        assert_eq!(zeros.len(), 4);
        for z in &zeros {
            assert!(z.location.is_growing());
        }
        let labels: Vec<_> = zeros.iter().map(|z| z.dominant.unwrap()).collect();
        assert_eq!(
            labels,
            vec![
                DominantMode::Resonator,
                DominantMode::Qubit(1),
                DominantMode::Qubit(2),
                DominantMode::Qubit(3)
            ]
        );
        for z in &zeros {
            let s: f64 = z.participation.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_rational_cancels() {
        let p = pd().with_couplings([0.0; 3]).unwrap();
        let rr = build_rational(&p).unwrap();
        assert_eq!(rr.num.degree(), 1);
        assert_eq!(rr.den.degree(), 1);
        assert_eq!(rr.cancelled, 3);
    }

    #[test]
    fn pole_guard() {
        let p = pd();
        let rr = build_rational(&p).unwrap();
        let pole = find_features(&rr, FeatureKind::Pole).unwrap()[1].location;
        assert!(matches!(reflection(&p, pole), Err(Error::PoleProximity { .. })));
    }

    #[test]
    fn symmetric_qubits_are_mixed() {
        let p = pd();
        let wc = p.omega_c();
        let p = p.with_qubit_frequencies([wc, 1.01 * wc, 1.01 * wc]).unwrap();
        // the antisymmetric pair decouples and cancels out of r
        let rr = build_rational(&p).unwrap();
        assert_eq!(rr.cancelled, 1);
        let dark = SpectralFeature {
            kind: FeatureKind::Pole,
            location: ComplexFreq::real(1.01 * wc),
            unit: FreqUnit::RadPerNs,
            dominant: None,
            participation: [0.0; 4],
        };
        let mut feats = find_features(&rr, FeatureKind::Pole).unwrap();
        feats.push(dark);
        let labeled = label_features(&feats, &p).unwrap();
        assert_eq!(labeled[3].dominant, Some(DominantMode::Mixed));
        assert!((labeled[3].participation[2] - 0.5).abs() < 1e-9);
        // the bright symmetric combination is mixed too
        assert!(
            labeled[..3]
                .iter()
                .filter(|f| f.dominant == Some(DominantMode::Mixed))
                .count()
                >= 1
        );
    }

    #[test]
    fn participation_rules() {
        let r = DominantMode::Resonator;
        assert_eq!(dominant_from_participation(&[0.6, 0.2, 0.1, 0.1], false, r), r);
        assert_eq!(
            dominant_from_participation(&[0.1, 0.2, 0.6, 0.1], false, r),
            DominantMode::Qubit(2)
        );
        assert_eq!(
            dominant_from_participation(&[0.3, 0.1, 0.3, 0.3], false, r),
            DominantMode::Mixed
        );
        assert_eq!(
            dominant_from_participation(&[0.1, 0.7, 0.1, 0.1], true, r),
            DominantMode::Mixed
        );
    }

    #[test]
    fn heatmap_counts_and_sentinel() {
        let p = pd();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let w = FreqWindow {
            re_min: 35.0,
            re_max: 36.0,
            im_min: -0.5,
            im_max: 0.5,
        };
        let g = heatmap_with(w, 2, 2, FreqUnit::RadPerNs, |_| {
            calls.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
            Ok(ONE)
        })
        .unwrap();
        assert_eq!(calls.into_inner(), 4);
        assert_eq!(g.values.len(), 2);
        assert!(heatmap(&p, w, 1, 5).is_err());
    }

    #[test]
    fn feature_record_units() {
        let f = SpectralFeature {
            kind: FeatureKind::Zero,
            location: ComplexFreq::new(2.0 * std::f64::consts::PI * 1e10, 1e7),
            unit: FreqUnit::RadPerS,
            dominant: Some(DominantMode::Qubit(2)),
            participation: [0.1, 0.2, 0.6, 0.1],
        };
        let r = f.record();
        assert!((r.re_hz - 1e10).abs() < 1e-3);
        assert!((r.re_rad_ns - 2.0 * std::f64::consts::PI * 10.0).abs() < 1e-12);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["dominant_qubit"], 2);
        assert!(v.get("re_Hz").is_some());
    }

    #[test]
    fn position_names() {
        let n: Vec<_> = (0..3).map(|i| position_name(i, 3)).collect();
        assert_eq!(n, ["Leftmost", "Middle", "Rightmost"]);
    }
}
