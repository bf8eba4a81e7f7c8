//! Explicit Runge–Kutta integrators: adaptive Dormand–Prince 5(4) with
//! continuous output, and classical fixed-step RK4.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    /// Steps below this (relative to the span) signal stiffness.
    pub h_min_rel: f64,
    pub max_steps: usize,
}

impl AdaptiveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Self::default()
        }
    }
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            h_init: None,
            h_max: f64::INFINITY,
            h_min_rel: 1e-14,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Integrate `y' = f(t, y)` from `t0` to `t_end`, returning the state at each
/// of the ascending `samples` (which must lie in `[t0, t_end]`).
///
/// `breakpoints` are times where `f` may be discontinuous; steps end exactly
/// on them.
pub fn integrate_adaptive<F>(
    f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    samples: &[f64],
    breakpoints: &[f64],
    opts: &AdaptiveOptions,
) -> Result<(Vec<Vec<f64>>, IntegrationStats)>
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let span = t_end - t0;
    if !(span >= 0.0) {
        return Err(Error::Domain(format!("integration span [{t0}, {t_end}] is reversed")));
    }
    let mut stats = IntegrationStats::default();
    let mut out = Vec::with_capacity(samples.len());
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] <= t0 {
        out.push(y0.to_vec());
        next_sample += 1;
    }
    if span == 0.0 {
        return Ok((out, stats));
    }
    let mut stops: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t0 && b < t_end).collect();
    stops.push(t_end);
    stops.sort_by(|a, b| a.partial_cmp(b).unwrap());
    stops.dedup();

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = opts
        .h_init
        .unwrap_or_else(|| initial_step(&f, t, &y, &k[0], opts, span));
    let h_min = opts.h_min_rel * span.max(t_end.abs());
    let mut stop_idx = 0;

    while t < t_end {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(Error::Stiffness { t });
        }
        let stop = stops[stop_idx];
        let mut hit_stop = false;
        h = h.min(opts.h_max);
        if t + h >= stop || (stop - t - h) < 1e-3 * h {
            h = stop - t;
            hit_stop = true;
        }
        if h < h_min && !hit_stop {
            return Err(Error::Stiffness { t });
        }

        stage(&mut tmp, &y, h, &[(A21, &k[0])]);
        f(t + C2 * h, &tmp, &mut k[1]);
        stage(&mut tmp, &y, h, &[(A31, &k[0]), (A32, &k[1])]);
        f(t + C3 * h, &tmp, &mut k[2]);
        stage(&mut tmp, &y, h, &[(A41, &k[0]), (A42, &k[1]), (A43, &k[2])]);
        f(t + C4 * h, &tmp, &mut k[3]);
        stage(
            &mut tmp,
            &y,
            h,
            &[(A51, &k[0]), (A52, &k[1]), (A53, &k[2]), (A54, &k[3])],
        );
        f(t + C5 * h, &tmp, &mut k[4]);
        stage(
            &mut tmp,
            &y,
            h,
            &[(A61, &k[0]), (A62, &k[1]), (A63, &k[2]), (A64, &k[3]), (A65, &k[4])],
        );
        let t_next = if hit_stop { stop } else { t + h };
        // a step ending on a breakpoint sees the left limit of f there
        let t_eval = if hit_stop {
            stop - stop.abs().max(f64::MIN_POSITIVE) * f64::EPSILON
        } else {
            t_next
        };
        f(t_eval, &tmp, &mut k[5]);
        stage(
            &mut y_new,
            &y,
            h,
            &[(A71, &k[0]), (A73, &k[2]), (A74, &k[3]), (A75, &k[4]), (A76, &k[5])],
        );
        f(t_eval, &y_new, &mut k[6]);
        stats.evaluations += 6;

        let mut acc = 0.0;
        for i in 0..n {
            err[i] = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            acc += (err[i] / sc).powi(2);
        }
        let e = (acc / n as f64).sqrt();
        if !e.is_finite() {
            if h <= h_min {
                return Err(Error::Stiffness { t });
            }
            h *= 0.1;
            stats.rejected += 1;
            continue;
        }
        if e <= 1.0 {
            stats.accepted += 1;
            // continuous output for samples inside (t, t_next]
            while next_sample < samples.len() && samples[next_sample] <= t_next {
                let theta = ((samples[next_sample] - t) / h).clamp(0.0, 1.0);
                out.push(dense(&y, &y_new, &k, h, theta));
                next_sample += 1;
            }
            t = t_next;
            std::mem::swap(&mut y, &mut y_new);
            if hit_stop {
                stop_idx += 1;
                // derivative may jump at a breakpoint
                f(t, &y, &mut k[0]);
                stats.evaluations += 1;
            } else {
                let (first, rest) = k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
            }
            let fac = if e == 0.0 {
                5.0
            } else {
                (0.9 * e.powf(-0.2)).clamp(0.2, 5.0)
            };
            h *= fac;
        } else {
            stats.rejected += 1;
            h *= (0.9 * e.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
    while next_sample < samples.len() {
        out.push(y.clone());
        next_sample += 1;
    }
    Ok((out, stats))
}

fn stage(out: &mut [f64], y: &[f64], h: f64, terms: &[(f64, &Vec<f64>)]) {
    for i in 0..y.len() {
        let mut s = 0.0;
        for (a, k) in terms {
            s += a * k[i];
        }
        out[i] = y[i] + h * s;
    }
}

fn dense(y0: &[f64], y1: &[f64], k: &[Vec<f64>; 7], h: f64, theta: f64) -> Vec<f64> {
    let t1 = 1.0 - theta;
    (0..y0.len())
        .map(|i| {
            let ydiff = y1[i] - y0[i];
            let bspl = h * k[0][i] - ydiff;
            let r4 = ydiff - h * k[6][i] - bspl;
            let r5 = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
            y0[i] + theta * (ydiff + t1 * (bspl + theta * (r4 + t1 * r5)))
        })
        .collect()
}

fn initial_step<F>(f: &F, t: f64, y: &[f64], f0: &[f64], opts: &AdaptiveOptions, span: f64) -> f64
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len() as f64;
    let sc = |i: usize| opts.atol + opts.rtol * y[i].abs();
    let d0 = (y.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, v)| (v / sc(i)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(f0).map(|(a, b)| a + h0 * b).collect();
    let mut f1 = vec![0.0; y.len()];
    f(t + h0, &y1, &mut f1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / sc(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (1e-6 * span).max(h0 * 1e-3)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// One classical RK4 step in place; `k` is scratch of four vectors and `tmp` one more.
pub fn rk4_step<F>(f: &F, t: f64, y: &mut [f64], h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64])
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    let n = y.len();
    f(t, y, &mut k[0]);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k[0][i];
    }
    f(t + 0.5 * h, tmp, &mut k[1]);
    for i in 0..n {
        tmp[i] = y[i] + 0.5 * h * k[1][i];
    }
    f(t + 0.5 * h, tmp, &mut k[2]);
    for i in 0..n {
        tmp[i] = y[i] + h * k[2][i];
    }
    f(t + h, tmp, &mut k[3]);
    for i in 0..n {
        y[i] += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -25.0 * y[0];
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let samples: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let (ys, stats) = integrate_adaptive(
            oscillator,
            0.0,
            &[1.0, 0.0],
            10.0,
            &samples,
            &[],
            &AdaptiveOptions::with_tol(1e-10),
        )
        .unwrap();
        assert_eq!(ys.len(), samples.len());
        for (t, y) in samples.iter().zip(&ys) {
            assert!((y[0] - (5.0 * t).cos()).abs() < 1e-7, "t = {t}");
        }
        assert!(stats.accepted > 10);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let f = |t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0] + t.sin();
        let exact = |t: f64| {
            // y(0) = 1
            let c = 1.0 + 0.5;
            c * (-t).exp() + 0.5 * (t.sin() - t.cos())
        };
        let err = |tol: f64| {
            let (ys, _) =
                integrate_adaptive(f, 0.0, &[1.0], 8.0, &[8.0], &[], &AdaptiveOptions::with_tol(tol)).unwrap();
            (ys[0][0] - exact(8.0)).abs()
        };
        assert!(err(1e-11) < err(1e-6));
        assert!(err(1e-11) < 1e-9);
    }

    #[test]
    fn breakpoints_are_hit() {
        // drive switches on at t = 1
        let f = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = if t >= 1.0 { 1.0 } else { 0.0 };
        let (ys, _) =
            integrate_adaptive(f, 0.0, &[0.0], 3.0, &[1.0, 3.0], &[1.0], &AdaptiveOptions::default()).unwrap();
        assert!(ys[0][0].abs() < 1e-12);
        assert!((ys[1][0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rk4_fourth_order() {
        let run = |h: f64| {
            let mut y = vec![1.0, 0.0];
            let mut k: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; 2]);
            let mut tmp = vec![0.0; 2];
            let steps = (2.0 / h).round() as usize;
            for s in 0..steps {
                rk4_step(&oscillator, s as f64 * h, &mut y, h, &mut k, &mut tmp);
            }
            (y[0] - 10f64.cos()).abs()
        };
        let ratio = run(0.02) / run(0.01);
        assert!(ratio > 12.0 && ratio < 20.0, "ratio {ratio}");
    }
}
