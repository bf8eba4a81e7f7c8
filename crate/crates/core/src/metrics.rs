//! Excitation efficiencies, target selectivity, crosstalk suppression, and
//! strategy comparison tables.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bloch::Trajectory;
use crate::circuit::CircuitTrace;
use crate::error::{Error, Result};

/// Efficiency time series in percent. Samples with no input energy yet are
/// reported as zero and marked undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyCurves {
    pub t: Vec<f64>,
    pub eta: Vec<[f64; 3]>,
    /// Resonator share; only the Bloch model has a single resonator mode.
    pub eta_res: Option<Vec<f64>>,
    pub defined: Vec<bool>,
    pub e_in: Vec<f64>,
    pub e_refl: Vec<f64>,
    pub e_diss: Vec<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

/// Bloch efficiencies in excitation-number units: `100·n_j(t)/N_in(t)`.
pub fn efficiency_curves_bloch(run: &Trajectory) -> EfficiencyCurves {
    let eta = run
        .states
        .iter()
        .zip(&run.e_in)
        .map(|(s, &e)| [0, 1, 2].map(|j| ratio(s.excitation(j, run.mode), e)))
        .collect();
    let eta_res = run
        .states
        .iter()
        .zip(&run.e_in)
        .map(|(s, &e)| ratio(s.a.norm_sqr(), e))
        .collect();
    EfficiencyCurves {
        t: run.t.clone(),
        eta,
        eta_res: Some(eta_res),
        defined: run.e_in.iter().map(|&e| e > 0.0).collect(),
        e_in: run.e_in.clone(),
        e_refl: run.e_refl.clone(),
        e_diss: run.e_diss.clone(),
    }
}

/// Circuit efficiencies from branch energies: `100·E_j(t)/E_in(t)`.
pub fn efficiency_curves_circuit(run: &CircuitTrace) -> EfficiencyCurves {
    let eta = run
        .e_qubit
        .iter()
        .zip(&run.e_in)
        .map(|(q, &e)| q.map(|x| ratio(x, e)))
        .collect();
    EfficiencyCurves {
        t: run.t.clone(),
        eta,
        eta_res: None,
        defined: run.e_in.iter().map(|&e| e > 0.0).collect(),
        e_in: run.e_in.clone(),
        e_refl: run.e_refl.clone(),
        e_diss: run.e_diss.clone(),
    }
}

impl EfficiencyCurves {
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

    /// Efficiencies at the sample nearest `t`.
    pub fn at(&self, t: f64) -> Result<[f64; 3]> {
        let k = self.index_at(t);
        if !self.defined[k] {
            return Err(Error::ZeroInput);
        }
        Ok(self.eta[k])
    }

    /// Peak of each efficiency over the defined region.
    pub fn peak(&self) -> [f64; 3] {
        let mut out = [0.0f64; 3];
        for (e, _) in self.eta.iter().zip(&self.defined).filter(|(_, &d)| d) {
            for j in 0..3 {
                out[j] = out[j].max(e[j]);
            }
        }
        out
    }

    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("t,eta_1,eta_2,eta_3,eta_res,e_in,e_refl,e_diss\n");
        for k in 0..self.t.len() {
            let res = self.eta_res.as_ref().map_or(f64::NAN, |r| r[k]);
            let e = self.eta[k];
            let _ = writeln!(
                s,
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                self.t[k], e[0], e[1], e[2], res, self.e_in[k], self.e_refl[k], self.e_diss[k]
            );
        }
        s
    }
}

/// `S_i = η_i / Σ η_k` for every qubit.
pub fn selectivity(eta: &[f64; 3]) -> Result<[f64; 3]> {
    if eta.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::Domain("efficiencies must be finite and non-negative".into()));
    }
    let total: f64 = eta.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Undefined(
            "selectivity needs at least one non-zero efficiency".into(),
        ));
    }
    Ok(eta.map(|e| e / total))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crosstalk {
    /// `η_target / max_{k≠target} η_k`, or `f64::INFINITY` when every
    /// non-target is zero.
    pub value: f64,
    pub infinite: bool,
}

/// Crosstalk suppression for `target` (0-based).
pub fn crosstalk_ratio(eta: &[f64; 3], target: usize) -> Result<Crosstalk> {
    if target > 2 {
        return Err(Error::Domain(format!("target index {target} out of range")));
    }
    if eta.iter().any(|&e| !(e >= 0.0)) {
        return Err(Error::Domain("efficiencies must be finite and non-negative".into()));
    }
    let worst = (0..3).filter(|&k| k != target).map(|k| eta[k]).fold(0.0, f64::max);
    if worst == 0.0 {
        return Ok(Crosstalk {
            value: f64::INFINITY,
            infinite: true,
        });
    }
    Ok(Crosstalk {
        value: eta[target] / worst,
        infinite: false,
    })
}

/// Row of a crosstalk table: `C_target` in the target column and
/// `η_k / η_target` elsewhere.
pub fn crosstalk_row(eta: &[f64; 3], target: usize) -> Result<[f64; 3]> {
    let c = crosstalk_ratio(eta, target)?;
    if !(eta[target] > 0.0) {
        return Err(Error::Undefined("target efficiency is zero".into()));
    }
    Ok([0, 1, 2].map(|k| if k == target { c.value } else { eta[k] / eta[target] }))
}

/// When efficiencies are read off a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "t")]
pub enum EvalTime {
    EndOfDrive,
    At(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    /// 1-based target qubit.
    pub target: usize,
    pub eta: [f64; 3],
    pub selectivity: [f64; 3],
    pub crosstalk: Crosstalk,
    pub reflected_fraction: f64,
    pub dissipated_fraction: f64,
    pub t_eval: f64,
    pub eval_rule: EvalTime,
}

/// Metrics at `t_eval` from efficiency curves.
pub fn report(curves: &EfficiencyCurves, target: usize, t_eval: f64, rule: EvalTime) -> Result<MetricsReport> {
    if !(1..=3).contains(&target) {
        return Err(Error::Domain(format!("target qubit {target} must be 1, 2 or 3")));
    }
    let k = curves.index_at(t_eval);
    if !curves.defined[k] {
        return Err(Error::ZeroInput);
    }
    let eta = curves.eta[k];
    let e_in = curves.e_in[k];
    Ok(MetricsReport {
        target,
        eta,
        selectivity: selectivity(&eta)?,
        crosstalk: crosstalk_ratio(&eta, target - 1)?,
        reflected_fraction: curves.e_refl[k] / e_in,
        dissipated_fraction: curves.e_diss[k] / e_in,
        t_eval: curves.t[k],
        eval_rule: rule,
    })
}

/// Drive strategies compared in the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// CF pulse at the target's reflection zero.
    Zero,
    /// CF pulse at the conjugate of the target's pole.
    ConjugatePole,
    /// Gaussian at the target's bare frequency.
    Bare,
    /// Gaussian at the real part of the target's zero.
    ZeroRealPart,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Bare,
        Strategy::ZeroRealPart,
        Strategy::Zero,
        Strategy::ConjugatePole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Zero => "zero",
            Strategy::ConjugatePole => "conjugate-pole",
            Strategy::Bare => "bare",
            Strategy::ZeroRealPart => "zero-real-part",
        }
    }

    pub fn is_cf(self) -> bool {
        matches!(self, Strategy::Zero | Strategy::ConjugatePole)
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "zero" => Strategy::Zero,
            "conjugate-pole" => Strategy::ConjugatePole,
            "bare" => Strategy::Bare,
            "zero-real-part" => Strategy::ZeroRealPart,
            _ => return Err(Error::Config(format!("unknown frequency mode `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub strategy: Strategy,
    /// 1-based target qubit.
    pub target: usize,
    /// Zero position label (`leftmost`, `middle`, `rightmost`).
    pub label: String,
    pub eta: [f64; 3],
    pub selectivity: [f64; 3],
    pub crosstalk: [f64; 3],
    pub eval_rule: EvalTime,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<TableRow>,
}

/// Build a table from `(strategy, target, label, η, rule)` entries. All
/// entries must share one evaluation rule.
pub fn comparison_table(runs: &[(Strategy, usize, String, [f64; 3], EvalTime)]) -> Result<ComparisonTable> {
    if let Some(first) = runs.first() {
        if let Some(bad) = runs.iter().find(|r| r.4 != first.4) {
            return Err(Error::ProtocolMismatch(format!(
                "rows evaluated with {:?} and {:?}",
                first.4, bad.4
            )));
        }
    }
    let rows = runs
        .iter()
        .map(|(strategy, target, label, eta, rule)| {
            if !(1..=3).contains(target) {
                return Err(Error::Domain(format!("target qubit {target} must be 1, 2 or 3")));
            }
            Ok(TableRow {
                strategy: *strategy,
                target: *target,
                label: label.clone(),
                eta: *eta,
                selectivity: selectivity(eta)?,
                crosstalk: crosstalk_row(eta, target - 1)?,
                eval_rule: *rule,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    pub fn to_csv(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        s.push_str("strategy,target,label,eta_1,eta_2,eta_3,S_1,S_2,S_3,C_1,C_2,C_3\n");
        for r in &self.rows {
            let _ = write!(s, "{},{},{}", r.strategy.name(), r.target, r.label);
            for v in r.eta.iter().chain(&r.selectivity).chain(&r.crosstalk) {
                let _ = write!(s, ",{v:.6}");
            }
            s.push('\n');
        }
        s
    }

    /// Three aligned blocks per strategy: efficiencies, selectivity, crosstalk.
    pub fn to_text(&self, comment: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(c) = comment {
            let _ = writeln!(s, "# {c}");
        }
        let mut strategies: Vec<Strategy> = self.rows.iter().map(|r| r.strategy).collect();
        strategies.dedup();
        let blocks: [(&str, fn(&TableRow) -> [f64; 3], &str); 3] = [
            ("Efficiency (%)", |r| r.eta, "eta"),
            ("Target selectivity", |r| r.selectivity, "S"),
            ("Crosstalk suppression", |r| r.crosstalk, "C"),
        ];
        for st in strategies {
            for (title, pick, sym) in blocks {
                let _ = writeln!(s, "{title} [{}]", st.name());
                let _ = writeln!(
                    s,
                    "{:<12}{:>10}{:>10}{:>10}",
                    "",
                    format!("{sym}_1"),
                    format!("{sym}_2"),
                    format!("{sym}_3")
                );
                for r in self.rows.iter().filter(|r| r.strategy == st) {
                    let v = pick(r);
                    let prec = if sym == "eta" { 1 } else { 2 };
                    let _ = writeln!(
                        s,
                        "{:<12}{:>10.p$}{:>10.p$}{:>10.p$}",
                        r.label,
                        v[0],
                        v[1],
                        v[2],
                        p = prec
                    );
                }
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selectivity_examples() {
        let s = selectivity(&[85.0, 6.5, 1.7]).unwrap();
        assert!((s[0] - 0.91).abs() < 0.005);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(selectivity(&[3.0, 0.0, 0.0]).unwrap()[0], 1.0);
        assert!(selectivity(&[0.0; 3]).is_err());
    }

    #[test]
    fn crosstalk_examples() {
        assert!((crosstalk_ratio(&[85.0, 6.5, 1.7], 0).unwrap().value - 13.077).abs() < 1e-3);
        assert!((crosstalk_ratio(&[56.6, 6.7, 2.1], 0).unwrap().value - 8.448).abs() < 1e-3);
        let inf = crosstalk_ratio(&[5.0, 0.0, 0.0], 0).unwrap();
        assert!(inf.infinite && inf.value.is_infinite());
    }

    #[test]
    fn table_rejects_mixed_rules() {
        let rows = vec![
            (
                Strategy::Zero,
                1,
                "rightmost".to_string(),
                [1.0, 0.1, 0.1],
                EvalTime::EndOfDrive,
            ),
            (
                Strategy::Bare,
                1,
                "rightmost".to_string(),
                [1.0, 0.1, 0.1],
                EvalTime::At(10.0),
            ),
        ];
        assert!(matches!(comparison_table(&rows), Err(Error::ProtocolMismatch(_))));
    }

    #[test]
    fn identical_runs_identical_rows() {
        let r = (
            Strategy::Zero,
            2,
            "middle".to_string(),
            [9.2, 77.0, 8.4],
            EvalTime::EndOfDrive,
        );
        let t = comparison_table(&[r.clone(), r]).unwrap();
        assert_eq!(t.rows[0], t.rows[1]);
        let text = t.to_text(None);
        assert!(text.contains("middle"));
    }
}
