//! Circular least-squares regression of phase estimates against τ.
//!
//! The objective compares points on the unit circle,
//! χ² = Σ |e^{i2πφ̂_i} − e^{i2πf(τ_i)}|² / σ_i², which is blind to integer
//! shifts of either the data or the model. Minimization runs a hand-written
//! Levenberg–Marquardt on the 2N cosine and sine residuals from a grid of
//! starting slopes.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circstats::analytic_mu;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub tau: f64,
    pub phi: f64,
    pub sigma: f64,
}

/// f(τ) = mτ + b, or the mean phase direction μ(mτ + b) of an R-bit readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FitModel {
    Linear,
    MuWrapped { r: usize },
}

impl FitModel {
    fn validate(&self) -> Result<()> {
        if let FitModel::MuWrapped { r } = *self {
            if r < 2 {
                return Err(invalid("mu_wrapped fits need R >= 2"));
            }
        }
        Ok(())
    }

    pub fn eval(&self, m: f64, b: f64, tau: f64) -> f64 {
        let x = m * tau + b;
        match *self {
            FitModel::Linear => x,
            FitModel::MuWrapped { r } => analytic_mu(x, r),
        }
    }

    /// df/dx at x = mτ + b.
    fn slope(&self, x: f64) -> f64 {
        match *self {
            FitModel::Linear => 1.0,
            FitModel::MuWrapped { r } => {
                let n = f64::powi(2.0, r as i32);
                let y = 2.0 * PI * (n * x.rem_euclid(1.0)).rem_euclid(1.0);
                let (w_re, w_im) = (n - 1.0 + y.cos(), -y.sin());
                1.0 - n * (y.cos() * w_re - y.sin() * w_im) / (w_re * w_re + w_im * w_im)
            }
        }
    }
}

/// Readout quantization floor for a point-mass sample, 2^{−R}/√12.
pub fn sigma_floor(r: usize) -> f64 {
    f64::powi(2.0, -(r as i32)) / 12f64.sqrt()
}

fn check_data(data: &[DataPoint], min_points: usize) -> Result<()> {
    if data.len() < min_points {
        return Err(invalid(format!("need at least {min_points} points, got {}", data.len())));
    }
    for p in data {
        if !(p.sigma > 0.0) || !p.sigma.is_finite() {
            return Err(invalid(format!("sigma must be positive and finite at tau = {}", p.tau)));
        }
        if !p.tau.is_finite() || !p.phi.is_finite() {
            return Err(invalid("data must be finite"));
        }
    }
    Ok(())
}

/// (χ²_cos, χ²_sin).
pub fn chi2_split(data: &[DataPoint], model: FitModel, m: f64, b: f64) -> Result<(f64, f64)> {
    check_data(data, 1)?;
    model.validate()?;
    let mut cos2 = 0.0;
    let mut sin2 = 0.0;
    for p in data {
        let f = model.eval(m, b, p.tau);
        let (sp, cp) = (2.0 * PI * p.phi).sin_cos();
        let (sf, cf) = (2.0 * PI * f).sin_cos();
        cos2 += ((cp - cf) / p.sigma).powi(2);
        sin2 += ((sp - sf) / p.sigma).powi(2);
    }
    Ok((cos2, sin2))
}

pub fn chi2_circ(data: &[DataPoint], model: FitModel, m: f64, b: f64) -> Result<f64> {
    check_data(data, 1)?;
    model.validate()?;
    Ok(data
        .iter()
        .map(|p| {
            let z = num_complex::Complex64::from_polar(1.0, 2.0 * PI * p.phi)
                - num_complex::Complex64::from_polar(1.0, 2.0 * PI * model.eval(m, b, p.tau));
            z.norm_sqr() / (p.sigma * p.sigma)
        })
        .sum())
}

/// ε̂ = −2πm, δε̂ = 2π·dm.
pub fn eigenvalue_from_slope(m: f64, dm: f64) -> (f64, f64) {
    (-2.0 * PI * m, 2.0 * PI * dm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub m: f64,
    /// In (−1/2, 1/2].
    pub b: f64,
    pub dm: f64,
    pub db: f64,
    pub chi2: f64,
    pub ndf: usize,
    pub chi2_per_ndf: f64,
    pub eps_hat: f64,
    pub d_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    /// Largest |m| searched. Defaults to the aliasing limit 1/(2Δτ_min).
    pub slope_window: Option<f64>,
}

/// Aliasing limit of a τ grid: slopes differing by 1/Δτ are indistinguishable
/// on a uniform grid of spacing Δτ.
pub fn nyquist_window(data: &[DataPoint]) -> Result<f64> {
    let mut taus: Vec<f64> = data.iter().map(|p| p.tau).collect();
    taus.sort_by(f64::total_cmp);
    let dmin = taus
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    if !dmin.is_finite() {
        return Err(invalid("degenerate tau grid"));
    }
    Ok(0.5 / dmin)
}

struct Local {
    m: f64,
    b: f64,
    chi2: f64,
    jtj: [[f64; 2]; 2],
}

fn residuals(data: &[DataPoint], model: FitModel, m: f64, b: f64, jac: bool) -> (Vec<f64>, Vec<[f64; 2]>) {
    let n = data.len();
    let mut r = Vec::with_capacity(2 * n);
    let mut j = Vec::with_capacity(if jac { 2 * n } else { 0 });
    for p in data {
        let x = m * p.tau + b;
        let f = model.eval(m, b, p.tau);
        let (sf, cf) = (2.0 * PI * f).sin_cos();
        let (sp, cp) = (2.0 * PI * p.phi).sin_cos();
        r.push((cp - cf) / p.sigma);
        r.push((sp - sf) / p.sigma);
        if jac {
            let d = model.slope(x);
            let (dfm, dfb) = (d * p.tau, d);
            let kc = 2.0 * PI * sf / p.sigma;
            let ks = -2.0 * PI * cf / p.sigma;
            j.push([kc * dfm, kc * dfb]);
            j.push([ks * dfm, ks * dfb]);
        }
    }
    (r, j)
}

fn sumsq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn normal_eqs(r: &[f64], j: &[[f64; 2]]) -> ([[f64; 2]; 2], [f64; 2]) {
    let mut a = [[0.0; 2]; 2];
    let mut g = [0.0; 2];
    for (ri, ji) in r.iter().zip(j) {
        for p in 0..2 {
            g[p] += ji[p] * ri;
            for q in 0..2 {
                a[p][q] += ji[p] * ji[q];
            }
        }
    }
    (a, g)
}

fn solve2(a: [[f64; 2]; 2], g: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([(a[1][1] * g[0] - a[0][1] * g[1]) / det, (a[0][0] * g[1] - a[1][0] * g[0]) / det])
}

fn levenberg_marquardt(data: &[DataPoint], model: FitModel, m0: f64, b0: f64) -> Local {
    let (mut m, mut b) = (m0, b0);
    let (mut r, mut j) = residuals(data, model, m, b, true);
    let mut chi2 = sumsq(&r);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let (a, g) = normal_eqs(&r, &j);
        let mut improved = false;
        for _ in 0..60 {
            let damped = [
                [a[0][0] * (1.0 + lambda), a[0][1]],
                [a[1][0], a[1][1] * (1.0 + lambda)],
            ];
            let Some(step) = solve2(damped, [-g[0], -g[1]]) else {
                lambda *= 10.0;
                continue;
            };
            let (tm, tb) = (m + step[0], b + step[1]);
            let (tr, _) = residuals(data, model, tm, tb, false);
            let tchi = sumsq(&tr);
            if tchi <= chi2 {
                let rel = (chi2 - tchi) / chi2.max(1e-300);
                let small = step[0].abs() <= 1e-15 * (1.0 + m.abs()) && step[1].abs() <= 1e-15 * (1.0 + b.abs());
                m = tm;
                b = tb;
                let (nr, nj) = residuals(data, model, m, b, true);
                r = nr;
                j = nj;
                chi2 = tchi;
                lambda = (lambda / 10.0).max(1e-15);
                improved = !(rel < 1e-15 || small);
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    let (a, _) = normal_eqs(&r, &j);
    Local { m, b, chi2, jtj: a }
}

fn circular_mean(values: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for (v, w) in values {
        let (s, c) = (2.0 * PI * v).sin_cos();
        re += w * c;
        im += w * s;
    }
    im.atan2(re) / (2.0 * PI)
}

fn wrap_half(b: f64) -> f64 {
    let w = b.rem_euclid(1.0);
    if w > 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Multi-start circular regression of φ̂(τ).
pub fn fit(data: &[DataPoint], model: FitModel, opts: FitOptions) -> Result<FitResult> {
    check_data(data, 4)?;
    model.validate()?;
    let window = match opts.slope_window {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => return Err(invalid(format!("slope window must be positive, got {w}"))),
        None => nyquist_window(data)?,
    };
    let (tmin, tmax) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.tau), hi.max(p.tau)));
    let span = tmax - tmin;
    if !(span > 0.0) {
        return Err(invalid("degenerate tau grid"));
    }
    let step = 1.0 / (4.0 * span);
    let half_count = (window / step).ceil() as i64;
    let starts: Vec<f64> = (-half_count..=half_count)
        .map(|i| (i as f64 * step).clamp(-window, window))
        .collect();

    let candidates: Vec<Local> = starts
        .par_iter()
        .map(|&m0| {
            let b0 = circular_mean(data.iter().map(|p| (p.phi - m0 * p.tau, 1.0 / (p.sigma * p.sigma))));
            levenberg_marquardt(data, model, m0, b0)
        })
        .collect();

    let tol = 1e-9;
    let best = candidates
        .into_iter()
        .filter(|c| c.m.abs() <= window * (1.0 + 1e-9) && c.chi2.is_finite())
        .fold(None::<Local>, |best, c| match best {
            None => Some(c),
            Some(b) => {
                let scale = b.chi2.max(c.chi2).max(1e-300);
                let better = c.chi2 < b.chi2 - tol * scale
                    || ((c.chi2 - b.chi2).abs() <= tol * scale && c.m.abs() < b.m.abs());
                Some(if better { c } else { b })
            }
        })
        .ok_or_else(|| Error::NoConvergence("no minimum inside the slope window".into()))?;

    let ndf = data.len() - 2;
    let scale = best.chi2 / ndf as f64;
    let a = best.jtj;
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let (dm, db) = if det.abs() > 1e-300 && det.is_finite() {
        ((a[1][1] / det * scale).max(0.0).sqrt(), (a[0][0] / det * scale).max(0.0).sqrt())
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let (eps_hat, d_eps) = eigenvalue_from_slope(best.m, dm);
    Ok(FitResult {
        m: best.m,
        b: wrap_half(best.b),
        dm,
        db,
        chi2: best.chi2,
        ndf,
        chi2_per_ndf: scale,
        eps_hat,
        d_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circstats::{analytic_rho, circular_std};
    use crate::qpe::phase_of;
    use proptest::prelude::*;

    fn line(m: f64, b: f64, n: usize, t0: f64, t1: f64) -> Vec<DataPoint> {
        (0..n)
            .map(|i| {
                let tau = t0 + (t1 - t0) * i as f64 / (n - 1) as f64;
                DataPoint {
                    tau,
                    phi: (m * tau + b).rem_euclid(1.0),
                    sigma: 0.01,
                }
            })
            .collect()
    }

    #[test]
    fn chi2_examples() {
        let d = line(0.3, 0.1, 10, 0.0, 1.0);
        assert!(chi2_circ(&d, FitModel::Linear, 0.3, 0.1).unwrap() < 1e-20);
        let one = [DataPoint { tau: 0.0, phi: 0.5, sigma: 1.0 }];
        assert!((chi2_circ(&one, FitModel::Linear, 0.0, 0.0).unwrap() - 4.0).abs() < 1e-12);
        let bad = [DataPoint { tau: 0.0, phi: 0.5, sigma: 0.0 }];
        assert!(chi2_circ(&bad, FitModel::Linear, 0.0, 0.0).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn slope_conversion() {
        assert_eq!(eigenvalue_from_slope(0.0, 0.0).0, 0.0);
        assert!((eigenvalue_from_slope(-0.6041, 0.0).0 - 3.7956).abs() < 1e-4);
        let (e, _) = eigenvalue_from_slope(0.112_54, 0.0);
        assert!((e + 0.70711).abs() < 1e-4 && (e + 0.1 + 0.60711).abs() < 1e-4);
    }

    #[test]
    fn exact_line_recovered() {
        let d = line(-0.60479, 0.2, 200, 0.0, 2.0);
        let f = fit(&d, FitModel::Linear, FitOptions::default()).unwrap();
        assert!((f.m + 0.60479).abs() < 1e-8 && (f.b - 0.2).abs() < 1e-8, "{f:?}");
        assert!(f.chi2_per_ndf < 1e-12);
        assert_eq!(f.eps_hat, -2.0 * PI * f.m);
        assert_eq!(f.ndf, 198);
    }

    #[test]
    fn zeeman_mu_wrapped_noiseless() {
        let r = 3;
        let d: Vec<DataPoint> = (0..200)
            .map(|i| {
                let tau = 2.0 * i as f64 / 199.0;
                let phi = phase_of(3.8, tau);
                DataPoint {
                    tau,
                    phi: analytic_mu(phi, r),
                    sigma: circular_std(analytic_rho(phi, r)).unwrap().max(sigma_floor(r)),
                }
            })
            .collect();
        let model = FitModel::MuWrapped { r };
        let f = fit(&d, model, FitOptions { slope_window: Some(1.25 * 3.8 / (2.0 * PI)) }).unwrap();
        assert!((f.m + 3.8 / (2.0 * PI)).abs() < 1e-8, "{f:?}");
        assert!((f.eps_hat - 3.8).abs() < 1e-7);
        for p in &d {
            let x = (f.m * p.tau + f.b).rem_euclid(1.0);
            assert!((model.eval(f.m, f.b, p.tau) - analytic_mu(x, r)).abs() < 1e-15);
        }
    }

    #[test]
    fn bad_inputs() {
        let d = line(0.3, 0.1, 3, 0.0, 1.0);
        assert!(fit(&d, FitModel::Linear, FitOptions::default()).is_err());
        let flat: Vec<DataPoint> = (0..5).map(|_| DataPoint { tau: 1.0, phi: 0.1, sigma: 0.1 }).collect();
        assert!(fit(&flat, FitModel::Linear, FitOptions::default()).is_err());
        let d = line(0.3, 0.1, 10, 0.0, 1.0);
        assert!(fit(&d, FitModel::MuWrapped { r: 1 }, FitOptions::default()).is_err());
    }

    proptest! {
        #[test]
        fn split_identity(m in -2.0f64..2.0, b in -1.0f64..1.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let d: Vec<DataPoint> = (0..20)
                .map(|i| DataPoint { tau: i as f64 * 0.1, phi: rng.random(), sigma: rng.random_range(0.01..1.0) })
                .collect();
            let (c, s) = chi2_split(&d, FitModel::Linear, m, b).unwrap();
            let full = chi2_circ(&d, FitModel::Linear, m, b).unwrap();
            prop_assert!((c + s - full).abs() < 1e-12 * full.max(1.0));
        }

        #[test]
        fn wrap_invariance(m in -1.5f64..1.5, b in -0.5f64..0.5, shift in -3i32..3) {
            let base = line(m, b, 40, -1.0, 1.0);
            let noisy: Vec<DataPoint> = base.iter().enumerate()
                .map(|(i, p)| DataPoint { phi: p.phi + 0.003 * ((i * 7 % 5) as f64 - 2.0), ..*p })
                .collect();
            let shifted: Vec<DataPoint> = noisy.iter().map(|p| DataPoint { phi: p.phi + shift as f64, ..*p }).collect();
            let unwrapped: Vec<DataPoint> = noisy.iter().map(|p| DataPoint { phi: m * p.tau + b + (p.phi - (m * p.tau + b).rem_euclid(1.0)), ..*p }).collect();
            let opts = FitOptions { slope_window: Some(2.0) };
            let f0 = fit(&noisy, FitModel::Linear, opts).unwrap();
            let f1 = fit(&shifted, FitModel::Linear, opts).unwrap();
            let f2 = fit(&unwrapped, FitModel::Linear, opts).unwrap();
            prop_assert!((f0.m - f1.m).abs() < 1e-9 && (f0.m - f2.m).abs() < 1e-9);
            prop_assert!((f0.b - f1.b).abs() < 1e-9 && (f0.b - f2.b).abs() < 1e-9);
            prop_assert!((f0.m - m).abs() < 0.01);
        }
    }
}
