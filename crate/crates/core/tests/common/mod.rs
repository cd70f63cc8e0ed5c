//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::sync::OnceLock;

use atomion::numerov::solve_unperturbed;
use atomion::{BasisOptions, Scaled, TrapConfig, UnperturbedBasis};

pub fn ba_rb_scaled() -> Scaled {
    TrapConfig::ba_rb().scaled().unwrap()
}

/// Default Ba⁺/Rb basis, solved once per test binary.
pub fn ba_rb_basis() -> &'static UnperturbedBasis {
    static B: OnceLock<UnperturbedBasis> = OnceLock::new();
    B.get_or_init(|| solve_unperturbed(&ba_rb_scaled(), &BasisOptions::default()).unwrap())
}

/// Eigenvalues below `e` of the symmetric tridiagonal matrix (diag, off).
fn sturm_count(diag: &[f64], off: f64, e: f64) -> usize {
    let mut c = 0;
    let mut q = 1.0f64;
    for (i, &d) in diag.iter().enumerate() {
        q = d - e - if i > 0 { off * off / q } else { 0.0 };
        if q == 0.0 {
            q = -1e-300;
        }
        if q < 0.0 {
            c += 1;
        }
    }
    c
}

/// Three-point finite-difference eigenvalues of −½ψ'' + Vψ on a uniform grid
/// over [x0, x1] with Dirichlet ends, for quantum numbers `idx`.
pub fn fd_eigenvalues(v: impl Fn(f64) -> f64, x0: f64, x1: f64, n: usize, idx: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let h = (x1 - x0) / (n + 1) as f64;
    let diag: Vec<f64> = (1..=n).map(|i| 1.0 / (h * h) + v(x0 + i as f64 * h)).collect();
    let off = -0.5 / (h * h);
    idx.iter()
        .map(|&k| {
            let (mut a, mut b) = (lo, hi);
            for _ in 0..100 {
                let m = 0.5 * (a + b);
                if sturm_count(&diag, off, m) > k {
                    b = m;
                } else {
                    a = m;
                }
            }
            0.5 * (a + b)
        })
        .collect()
}

/// Richardson-extrapolated (h → 0) finite-difference eigenvalues.
pub fn fd_richardson(v: impl Fn(f64) -> f64 + Copy, x0: f64, x1: f64, n: usize, idx: &[usize], lo: f64, hi: f64) -> Vec<f64> {
    let coarse = fd_eigenvalues(v, x0, x1, n, idx, lo, hi);
    let fine = fd_eigenvalues(v, x0, x1, 2 * n + 1, idx, lo, hi);
    coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect()
}

fn rk4<const N: usize>(f: impl Fn(f64, &[f64; N]) -> [f64; N], y: &mut [f64; N], t0: f64, t1: f64, steps: usize) {
    let h = (t1 - t0) / steps as f64;
    for s in 0..steps {
        let t = t0 + s as f64 * h;
        let k1 = f(t, y);
        let y2: [f64; N] = std::array::from_fn(|i| y[i] + 0.5 * h * k1[i]);
        let k2 = f(t + 0.5 * h, &y2);
        let y3: [f64; N] = std::array::from_fn(|i| y[i] + 0.5 * h * k2[i]);
        let k3 = f(t + 0.5 * h, &y3);
        let y4: [f64; N] = std::array::from_fn(|i| y[i] + h * k3[i]);
        let k4 = f(t + h, &y4);
        for i in 0..N {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Monodromy trace of ẍ + (a + 2q cos ωt)(ω²/4)x = 0 over `periods` periods.
pub fn mathieu_trace(a: f64, q: f64, omega: f64, periods: usize, steps_per_period: usize) -> f64 {
    let k = |t: f64| (a + 2.0 * q * (omega * t).cos()) * 0.25 * omega * omega;
    let f = |t: f64, y: &[f64; 2]| [y[1], -k(t) * y[0]];
    let period = 2.0 * std::f64::consts::PI / omega;
    let end = periods as f64 * period;
    let mut c1 = [1.0, 0.0];
    let mut c2 = [0.0, 1.0];
    rk4(f, &mut c1, 0.0, end, periods * steps_per_period);
    rk4(f, &mut c2, 0.0, end, periods * steps_per_period);
    c1[0] + c2[1]
}

/// Lab-frame sweep of H = (ω₀(t)/2)σ_z + η(t)σ_x cos ωt with ω₀ moving linearly
/// from w0 to w1 at `rate`. The coupling is switched on and off smoothly over
/// the first and last fifth of the sweep so that the bare states coincide with
/// the dressed ones at both ends. Starts in the upper state and returns its
/// final population, i.e. the probability of passing the crossing diabatically.
pub fn two_level_sweep(eta: f64, omega: f64, w0: f64, w1: f64, rate: f64, dt: f64) -> f64 {
    let duration = (w1 - w0) / rate;
    let ramp = 0.2 * duration;
    let envelope = |t: f64| {
        let s = if t < ramp { t / ramp } else if t > duration - ramp { (duration - t) / ramp } else { 1.0 };
        (0.5 * std::f64::consts::PI * s.clamp(0.0, 1.0)).sin().powi(2)
    };
    let steps = (duration / dt).ceil() as usize;
    // ψ = (a, b), split into real parts: [Re a, Im a, Re b, Im b]
    let f = |t: f64, y: &[f64; 4]| {
        let hz = 0.5 * (w0 + rate * t);
        let hx = eta * envelope(t) * (omega * t).cos();
        // i ψ̇ = Hψ → ψ̇ = −i Hψ
        let (ar, ai, br, bi) = (y[0], y[1], y[2], y[3]);
        let ha = (hz * ar + hx * br, hz * ai + hx * bi);
        let hb = (hx * ar - hz * br, hx * ai - hz * bi);
        [ha.1, -ha.0, hb.1, -hb.0]
    };
    let mut y = [1.0, 0.0, 0.0, 0.0];
    rk4(f, &mut y, 0.0, duration, steps);
    y[0] * y[0] + y[1] * y[1]
}

/// Time-averaged ⟨|ḟ|²⟩/ν for the Floquet solution of the Mathieu equation,
/// built from the monodromy eigenvector and integrated over one period.
pub fn mathieu_fdot_ratio(a: f64, q: f64, omega: f64, steps: usize) -> f64 {
    let k = |t: f64| (a + 2.0 * q * (omega * t).cos()) * 0.25 * omega * omega;
    let f = |t: f64, y: &[f64; 2]| [y[1], -k(t) * y[0]];
    let period = 2.0 * std::f64::consts::PI / omega;
    let mut c1 = [1.0, 0.0];
    let mut c2 = [0.0, 1.0];
    rk4(f, &mut c1, 0.0, period, steps);
    rk4(f, &mut c2, 0.0, period, steps);
    // M = [[c1₀, c2₀], [c1₁, c2₁]]; eigenvalue e^{iθ} with θ in (0, π)
    let half = 0.5 * (c1[0] + c2[1]);
    let theta = half.acos();
    let (s, c) = theta.sin_cos();
    // (M − λ)v = 0 with v = (m01, λ − m00)
    let (vr, vi) = ([c2[0], c - c1[0]], [0.0, s]);
    let h = period / steps as f64;
    let (mut yr, mut yi) = (vr, vi);
    let mut acc = 0.0;
    for step in 0..steps {
        let t = step as f64 * h;
        acc += yr[1] * yr[1] + yi[1] * yi[1];
        rk4(f, &mut yr, t, t + h, 1);
        rk4(f, &mut yi, t, t + h, 1);
    }
    // ν from the Wronskian of (real, imaginary) parts: Im(f* ḟ)
    let nu = vr[0] * vi[1] - vi[0] * vr[1];
    (acc / steps as f64) / nu.abs()
}
