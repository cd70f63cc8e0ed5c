//! Exact Floquet solution of a single ion in the rf trap:
//! ẍ + (a + 2q cos ωt)(ω²/4)x = F₀ + F₁ sin ωt.
//!
//! The homogeneous solution is f(t) = e^{iμt}φ(t) with φ(t) = Σ C_n e^{inωt},
//! normalised to f(0) = 1, ḟ(0) = iν. Quantum states follow from the classical
//! solutions: quasienergies (n + ½)μ, widths from |f(t)|², centre x_p(t).

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::eigh;

pub const DEFAULT_NM: usize = 30;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MathieuSolution {
    pub a: f64,
    pub q: f64,
    pub omega: f64,
    /// characteristic exponent, in (0, ω/2)
    pub mu: f64,
    pub nu: f64,
    /// C_n for n ∈ [−N_m, N_m], index n + N_m
    pub c: Vec<f64>,
}

/// Lowest eigenpair of the Fourier recursion matrix at β = 2μ/ω.
fn recursion_min(beta: f64, q: f64, nm: usize) -> Result<(f64, Vec<f64>)> {
    let dim = 2 * nm + 1;
    let t = Mat::from_fn(dim, dim, |i, j| {
        if i == j {
            let k = i as f64 - nm as f64;
            (beta + 2.0 * k).powi(2)
        } else if i.abs_diff(j) == 1 {
            -q
        } else {
            0.0
        }
    });
    let (w, v) = eigh(t.as_ref())?;
    Ok((w[0], (0..dim).map(|i| v[(i, 0)]).collect()))
}

fn rhs(a: f64, q: f64, omega: f64, t: f64, y: [f64; 2]) -> [f64; 2] {
    [y[1], -(a + 2.0 * q * (omega * t).cos()) * 0.25 * omega * omega * y[0]]
}

/// One-period monodromy matrix of the homogeneous equation by classical RK4.
pub fn monodromy(a: f64, q: f64, omega: f64, steps: usize) -> [[f64; 2]; 2] {
    let period = 2.0 * std::f64::consts::PI / omega;
    let h = period / steps as f64;
    let mut cols = [[1.0, 0.0], [0.0, 1.0]];
    for y in cols.iter_mut() {
        for s in 0..steps {
            let t = s as f64 * h;
            let k1 = rhs(a, q, omega, t, *y);
            let k2 = rhs(a, q, omega, t + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = rhs(a, q, omega, t + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = rhs(a, q, omega, t + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
    }
    [[cols[0][0], cols[1][0]], [cols[0][1], cols[1][1]]]
}

/// μ from the monodromy trace, or the growth rate when |tr| > 2.
pub fn monodromy_exponent(a: f64, q: f64, omega: f64, steps: usize) -> std::result::Result<f64, f64> {
    let m = monodromy(a, q, omega, steps);
    let half = 0.5 * (m[0][0] + m[1][1]);
    let period = 2.0 * std::f64::consts::PI / omega;
    if half.abs() <= 1.0 {
        Ok(half.acos() / period)
    } else {
        Err(half.abs().acosh() / period)
    }
}

/// Characteristic exponent and Fourier coefficients of the first stability zone.
pub fn mathieu_floquet(a: f64, q: f64, omega: f64, nm: usize) -> Result<MathieuSolution> {
    if nm < 10 {
        return Err(Error::Usage(format!("N_m = {nm} is below the minimum of 10")));
    }
    if !(omega > 0.0 && a.is_finite() && q.is_finite()) {
        return Err(Error::Domain("Mathieu parameters must be finite with ω > 0".into()));
    }
    let g = |beta: f64| recursion_min(beta, q, nm).map(|(l, v)| (l - a, v));
    let (f_lo, _) = g(0.0)?;
    let (f_hi, _) = g(1.0)?;
    if f_lo > 0.0 || f_hi < 0.0 || f_lo == 0.0 || f_hi == 0.0 {
        let rate = monodromy_exponent(a, q, omega, 4000).err().unwrap_or(0.0);
        return Err(Error::MathieuUnstable(rate));
    }
    // safeguarded Newton on λ_min(β) = a; dλ/dβ = Σ C_n²·2(β + 2n)
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut beta = 0.5;
    let mut vec = Vec::new();
    for _ in 0..200 {
        let (f, v) = g(beta)?;
        vec = v;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = beta;
        } else {
            hi = beta;
        }
        let slope: f64 = vec
            .iter()
            .enumerate()
            .map(|(i, c)| c * c * 2.0 * (beta + 2.0 * (i as f64 - nm as f64)))
            .sum();
        let mut next = beta - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - beta).abs() < 1e-16 || hi - lo < 1e-16 {
            beta = next;
            vec = g(beta)?.1;
            break;
        }
        beta = next;
    }
    let sum: f64 = vec.iter().sum();
    if sum.abs() < 1e-300 {
        return Err(Error::Numerical("Mathieu eigenvector has zero sum".into()));
    }
    let c: Vec<f64> = vec.iter().map(|x| x / sum).collect();
    let mu = 0.5 * beta * omega;
    let nu = mu + omega * c.iter().enumerate().map(|(i, x)| (i as f64 - nm as f64) * x).sum::<f64>();
    Ok(MathieuSolution { a, q, omega, mu, nu, c })
}

impl MathieuSolution {
    pub fn nm(&self) -> usize {
        (self.c.len() - 1) / 2
    }

    fn coeff(&self, n: i64) -> f64 {
        let nm = self.nm() as i64;
        if n.abs() > nm { 0.0 } else { self.c[(n + nm) as usize] }
    }

    /// (φ(t), φ̇(t))
    pub fn phi(&self, t: f64) -> (C64, C64) {
        let nm = self.nm() as i64;
        let mut p = C64::new(0.0, 0.0);
        let mut dp = C64::new(0.0, 0.0);
        for n in -nm..=nm {
            let w = n as f64 * self.omega;
            let e = C64::from_polar(1.0, w * t);
            p += e * self.coeff(n);
            dp += e * C64::new(0.0, w * self.coeff(n));
        }
        (p, dp)
    }

    /// (f(t), ḟ(t))
    pub fn f(&self, t: f64) -> (C64, C64) {
        let (p, dp) = self.phi(t);
        let e = C64::from_polar(1.0, self.mu * t);
        (e * p, e * (dp + C64::new(0.0, self.mu) * p))
    }

    /// f ḟ* − f* ḟ, which should equal −2iν
    pub fn wronskian(&self, t: f64) -> C64 {
        let (f, df) = self.f(t);
        f * df.conj() - f.conj() * df
    }

    /// |f̈ + k(t) f| at time t.
    pub fn ode_residual(&self, t: f64) -> f64 {
        let nm = self.nm() as i64;
        let mut ddf = C64::new(0.0, 0.0);
        for n in -nm..=nm {
            let w = self.mu + n as f64 * self.omega;
            ddf -= C64::from_polar(w * w * self.coeff(n), w * t);
        }
        let (f, _) = self.f(t);
        let k = (self.a + 2.0 * self.q * (self.omega * t).cos()) * 0.25 * self.omega * self.omega;
        (ddf + f * k).norm()
    }

    /// (n + ½)μ
    pub fn quasienergy(&self, n: usize) -> f64 {
        (n as f64 + 0.5) * self.mu
    }

    /// time average of |ḟ|²
    pub fn mean_fdot_sq(&self) -> f64 {
        let nm = self.nm() as i64;
        (-nm..=nm).map(|n| (self.coeff(n) * (self.mu + n as f64 * self.omega)).powi(2)).sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicDrive {
    pub f0: f64,
    pub f1: f64,
    pub omega: f64,
    /// D_n, index n + N_m
    pub d: Vec<(f64, f64)>,
    /// Fourier coefficients X_k of x_p, k ∈ [−2N_m, 2N_m]
    pub xk: Vec<(f64, f64)>,
}

/// Periodic particular solution for the force F₀ + F₁ sin ωt.
pub fn periodic_solution(sol: &MathieuSolution, f0: f64, f1: f64) -> Result<PeriodicDrive> {
    let nm = sol.nm() as i64;
    let mut d = Vec::with_capacity(sol.c.len());
    for n in -nm..=nm {
        let den = sol.mu + n as f64 * sol.omega;
        if den.abs() < 1e-12 * sol.omega {
            return Err(Error::Domain(format!("μ + {n}ω vanishes: exponent is an integer multiple of ω")));
        }
        let num = C64::new(2.0 * sol.coeff(n) * f0, 0.0) + C64::new(0.0, f1 * (sol.coeff(n + 1) - sol.coeff(n - 1)));
        let dn = num / (2.0 * sol.nu * den);
        d.push(dn);
    }
    let dk = |n: i64| if n.abs() > nm { C64::new(0.0, 0.0) } else { d[(n + nm) as usize] };
    // Φφ* = Σ_k P_k e^{ikωt}, P_k = Σ_n D_n C_{n−k}; x_p is its real part
    let p = |k: i64| -> C64 { (-nm..=nm).map(|n| dk(n) * sol.coeff(n - k)).sum() };
    let xk: Vec<(f64, f64)> = (-2 * nm..=2 * nm)
        .map(|k| {
            let x = (p(k) + p(-k).conj()) * 0.5;
            (x.re, x.im)
        })
        .collect();
    Ok(PeriodicDrive { f0, f1, omega: sol.omega, d: d.iter().map(|z| (z.re, z.im)).collect(), xk })
}

impl PeriodicDrive {
    fn kmax(&self) -> i64 {
        ((self.xk.len() - 1) / 2) as i64
    }

    fn x_k(&self, k: i64) -> C64 {
        let (re, im) = self.xk[(k + self.kmax()) as usize];
        C64::new(re, im)
    }

    /// d^order x_p / dt^order
    pub fn derivative(&self, t: f64, order: u32) -> f64 {
        let km = self.kmax();
        (-km..=km)
            .map(|k| {
                let w = k as f64 * self.omega;
                (self.x_k(k) * C64::new(0.0, w).powu(order) * C64::from_polar(1.0, w * t)).re
            })
            .sum()
    }

    pub fn x_p(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    pub fn v_p(&self, t: f64) -> f64 {
        self.derivative(t, 1)
    }

    /// time average of ẋ_p²
    pub fn mean_v_sq(&self) -> f64 {
        let km = self.kmax();
        (-km..=km).map(|k| (self.x_k(k) * (k as f64 * self.omega)).norm_sqr()).sum()
    }

    /// |ẍ_p + k(t)x_p − F₀ − F₁ sin ωt|
    pub fn ode_residual(&self, sol: &MathieuSolution, t: f64) -> f64 {
        let k = (sol.a + 2.0 * sol.q * (sol.omega * t).cos()) * 0.25 * sol.omega * sol.omega;
        (self.derivative(t, 2) + k * self.x_p(t) - self.f0 - self.f1 * (sol.omega * t).sin()).abs()
    }
}

/// h_n(z) = H_n(z)e^{−z²/2}/√(2ⁿn!√π) by the stable three-term recurrence.
pub fn hermite_function(n: usize, z: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * z * z).exp();
    for k in 0..n {
        let next = (2.0 / (k as f64 + 1.0)).sqrt() * z * cur - (k as f64 / (k as f64 + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// ⟨x, t|n⟩ = e^{−i(n+½)μt}u_n(x, t), with mass and ħ equal to one.
pub fn floquet_wavefunction(sol: &MathieuSolution, drive: Option<&PeriodicDrive>, n: usize, x: f64, t: f64) -> C64 {
    let (xp, vp) = drive.map_or((0.0, 0.0), |d| (d.x_p(t), d.v_p(t)));
    let (phi, dphi) = sol.phi(t);
    let y = x - xp;
    let r = phi.norm();
    let z = sol.nu.sqrt() * y / r;
    let amp = sol.nu.powf(0.25) / r.sqrt() * hermite_function(n, z);
    let chirp = (dphi / phi).re * 0.5 * y * y;
    let nh = n as f64 + 0.5;
    let phase = chirp + vp * y - nh * phi.arg();
    C64::from_polar(amp, phase - nh * sol.mu * t)
}

/// Time-averaged kinetic energy of state n: ½(n + ½)⟨|ḟ|²⟩/ν + ½⟨ẋ_p²⟩.
pub fn mean_kinetic_energy(sol: &MathieuSolution, drive: Option<&PeriodicDrive>, n: usize) -> f64 {
    0.5 * (n as f64 + 0.5) * sol.mean_fdot_sq() / sol.nu + 0.5 * drive.map_or(0.0, |d| d.mean_v_sq())
}
