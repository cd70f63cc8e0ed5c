//! Adiabatic passage through Floquet spectra: avoided-crossing extraction,
//! Landau-Zener probabilities, first-order nonadiabatic amplitudes along a
//! ramp, and the phase-gate fidelity bound from excited-branch occupancy.

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::FloquetSpectrum;
use crate::linalg::eigh;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AvoidedCrossing {
    /// parameter value at closest approach
    pub d_star: f64,
    pub gap: f64,
    /// difference of the asymptotic slopes, energy per unit parameter
    pub slope_diff: f64,
    /// angle between the asymptotes in plot units, tan(α/2) = slope_diff/2
    pub alpha: f64,
    pub lower_band: usize,
    pub upper_band: usize,
    /// rms misfit of the hyperbola relative to the gap
    pub fit_residual: f64,
    pub reliable: bool,
}

/// Exponent of the Landau-Zener formula: π·gap²/(2|slope_diff·rate|).
pub fn lz_exponent(gap: f64, slope_diff: f64, rate: f64) -> Result<f64> {
    if slope_diff == 0.0 || !slope_diff.is_finite() {
        return Err(Error::Domain("degenerate crossing: zero slope difference".into()));
    }
    if gap == 0.0 {
        return Ok(0.0);
    }
    Ok(std::f64::consts::PI * gap * gap / (2.0 * (slope_diff * rate).abs()))
}

/// Diabatic passage probability for sweeping the crossing's parameter at `rate`.
pub fn landau_zener(c: &AvoidedCrossing, rate: f64) -> Result<f64> {
    Ok((-lz_exponent(c.gap, c.slope_diff, rate)?).exp())
}

/// Two-level form exp[−(π/4)δε²/(ω̇₀ tan(α/2))].
pub fn landau_zener_angle(gap: f64, omega0_dot: f64, alpha: f64) -> Result<f64> {
    let t = (0.5 * alpha).tan();
    if t == 0.0 || !t.is_finite() {
        return Err(Error::Domain("degenerate crossing: zero slope difference".into()));
    }
    if gap == 0.0 {
        return Ok(1.0);
    }
    Ok((-(std::f64::consts::FRAC_PI_4) * gap * gap / (omega0_dot * t).abs()).exp())
}

/// Fit g² = A(λ − λ*)² + δ² to gap samples; returns (λ*, δ, slope difference, rms misfit / δ).
pub fn fit_hyperbola(lambda: &[f64], gap: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if lambda.len() < 3 || lambda.len() != gap.len() {
        return Err(Error::Usage("hyperbola fit needs at least three samples".into()));
    }
    // centre and scale the abscissa for conditioning
    let c = lambda.iter().sum::<f64>() / lambda.len() as f64;
    let s = lambda.iter().map(|l| (l - c).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut ata = Mat::<f64>::zeros(3, 3);
    let mut atb = [0.0; 3];
    for (&l, &g) in lambda.iter().zip(gap) {
        let x = (l - c) / s;
        let row = [x * x, x, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[(i, j)] += row[i] * row[j];
            }
            atb[i] += row[i] * g * g;
        }
    }
    let (w, v) = eigh(ata.as_ref())?;
    if w[0] <= 1e-14 * w[2] {
        return Err(Error::Numerical("degenerate hyperbola fit".into()));
    }
    let mut coef = [0.0; 3];
    for k in 0..3 {
        let proj: f64 = (0..3).map(|i| v[(i, k)] * atb[i]).sum::<f64>() / w[k];
        for i in 0..3 {
            coef[i] += v[(i, k)] * proj;
        }
    }
    let (a, b, cc) = (coef[0] / (s * s), coef[1] / s, coef[2]);
    if a <= 0.0 {
        return Err(Error::Numerical("gap is not locally hyperbolic".into()));
    }
    let x0 = -b / (2.0 * a);
    let d2 = cc - b * b / (4.0 * a);
    let delta = d2.max(0.0).sqrt();
    let rms = (lambda
        .iter()
        .zip(gap)
        .map(|(&l, &g)| {
            let x = l - c;
            let fit = (a * x * x + b * x + cc).max(0.0).sqrt();
            (fit - g).powi(2)
        })
        .sum::<f64>()
        / lambda.len() as f64)
        .sqrt();
    let rel = if delta > 0.0 { rms / delta } else { f64::INFINITY };
    Ok((x0 + c, delta, a.sqrt(), rel))
}

/// Local minima of adjacent-band separations below `threshold`, each refined
/// by a hyperbola fit. `bands[i]` is the ascending zone-reduced spectrum at
/// `lambda[i]`; the top band is paired with the bottom one shifted by ω.
pub fn extract_avoided_crossings(lambda: &[f64], bands: &[Vec<f64>], omega: f64, threshold: f64) -> Result<Vec<AvoidedCrossing>> {
    if lambda.len() != bands.len() {
        return Err(Error::Usage("one spectrum per parameter value required".into()));
    }
    if lambda.len() < 3 {
        return Ok(Vec::new());
    }
    let nb = bands.iter().map(Vec::len).min().unwrap_or(0);
    if bands.iter().any(|b| b.len() != nb) {
        return Err(Error::Usage("band count changes along the scan".into()));
    }
    let gap = |i: usize, j: usize| -> f64 {
        let b = &bands[i];
        if j + 1 < nb { b[j + 1] - b[j] } else { b[0] + omega - b[j] }
    };
    let mut out = Vec::new();
    for j in 0..nb {
        // a single band has no partner except its own image
        if nb < 2 {
            break;
        }
        for i in 1..lambda.len() - 1 {
            let g = gap(i, j);
            if g >= threshold || g > gap(i - 1, j) || g >= gap(i + 1, j) {
                continue;
            }
            let w = 3usize;
            let lo = i.saturating_sub(w);
            let hi = (i + w).min(lambda.len() - 1);
            let xs: Vec<f64> = lambda[lo..=hi].to_vec();
            let gs: Vec<f64> = (lo..=hi).map(|k| gap(k, j)).collect();
            let (d_star, mut delta, slope, mut resid) = match fit_hyperbola(&xs, &gs) {
                Ok(f) => f,
                Err(_) => (lambda[i], g, f64::NAN, f64::INFINITY),
            };
            if !(delta > 0.0) {
                delta = g;
                resid = f64::INFINITY;
            }
            out.push(AvoidedCrossing {
                d_star,
                gap: delta,
                slope_diff: slope,
                alpha: 2.0 * (0.5 * slope).atan(),
                lower_band: j,
                upper_band: (j + 1) % nb,
                fit_residual: resid,
                reliable: resid <= 0.2 && slope.is_finite(),
            });
        }
    }
    out.sort_by(|a, b| a.d_star.total_cmp(&b.d_star).then(a.lower_band.cmp(&b.lower_band)));
    Ok(out)
}

/// ⟨⟨a|S^m b⟩⟩ = Σ_k a*_k b_{k+m}, blocks of length n_e.
pub fn shifted_inner(a: &[C64], b: &[C64], n_e: usize, m: i64) -> C64 {
    let modes = (a.len() / n_e) as i64;
    let mut s = C64::new(0.0, 0.0);
    for k in 0..modes {
        let l = k + m;
        if l < 0 || l >= modes {
            continue;
        }
        let (ka, lb) = (k as usize * n_e, l as usize * n_e);
        for n in 0..n_e {
            s += a[ka + n].conj() * b[lb + n];
        }
    }
    s
}

fn shift_vector(b: &[C64], n_e: usize, m: i64) -> Vec<C64> {
    // out_k = b_{k+m}
    let modes = (b.len() / n_e) as i64;
    let mut out = vec![C64::new(0.0, 0.0); b.len()];
    for k in 0..modes {
        let l = k + m;
        if l < 0 || l >= modes {
            continue;
        }
        out[k as usize * n_e..(k as usize + 1) * n_e].copy_from_slice(&b[l as usize * n_e..(l as usize + 1) * n_e]);
    }
    out
}

/// Floquet states followed continuously along a parameter scan.
#[derive(Debug, Clone)]
pub struct FloquetTrack {
    pub lambda: Vec<f64>,
    pub n_e: usize,
    pub omega: f64,
    /// unreduced quasienergy, continuous along λ: [state][point]
    pub energies: Vec<Vec<f64>>,
    /// gauge-fixed extended-space vectors: [state][point]
    pub vectors: Vec<Vec<Vec<C64>>>,
    /// number of sign/phase corrections applied
    pub gauge_fixes: usize,
    /// steps where the best overlap fell below ½
    pub weak_matches: Vec<(usize, usize, f64)>,
}

/// Follow the classes `start` (indices into `spectra[0].classes`) by maximal
/// block-shifted overlap, fixing the gauge so consecutive overlaps are real
/// and positive.
pub fn track_classes(lambda: &[f64], spectra: &[FloquetSpectrum], start: &[usize]) -> Result<FloquetTrack> {
    if lambda.len() != spectra.len() || lambda.is_empty() {
        return Err(Error::Usage("one Floquet spectrum per parameter value required".into()));
    }
    let n_e = spectra[0].n_e;
    let omega = spectra[0].omega;
    let mut energies = Vec::new();
    let mut vectors = Vec::new();
    let mut fixes = 0;
    let mut weak = Vec::new();
    for &s in start {
        let c0 = spectra[0]
            .classes
            .get(s)
            .ok_or_else(|| Error::Usage(format!("class {s} does not exist")))?;
        let mut es = vec![c0.raw];
        let mut vs = vec![c0.vector.clone()];
        for (i, sp) in spectra.iter().enumerate().skip(1) {
            let prev = vs.last().unwrap();
            let mut best = (0usize, 0i64, C64::new(0.0, 0.0));
            for (j, c) in sp.classes.iter().enumerate() {
                for m in -2..=2i64 {
                    let ov = shifted_inner(prev, &c.vector, n_e, m);
                    if ov.norm() > best.2.norm() {
                        best = (j, m, ov);
                    }
                }
            }
            let (j, m, ov) = best;
            if ov.norm() < 0.5 {
                weak.push((s, i, ov.norm()));
            }
            let c = &sp.classes[j];
            let mut v = shift_vector(&c.vector, n_e, m);
            let phase = ov.conj() / ov.norm().max(f64::MIN_POSITIVE);
            if (phase - C64::new(1.0, 0.0)).norm() > 1e-12 {
                fixes += 1;
                for z in v.iter_mut() {
                    *z *= phase;
                }
            }
            es.push(c.raw - m as f64 * omega);
            vs.push(v);
        }
        energies.push(es);
        vectors.push(vs);
    }
    Ok(FloquetTrack { lambda: lambda.to_vec(), n_e, omega, energies, vectors, gauge_fixes: fixes, weak_matches: weak })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionAmplitudes {
    /// c_n = Σ_k c_{n,k} for each tracked state (entry 0 is the initial one)
    pub c: Vec<(f64, f64)>,
    /// |c_n|²
    pub prob: Vec<f64>,
    /// largest change of a coupling between the h and 2h difference stencils
    pub richardson: f64,
}

/// First-order amplitudes
/// c_{n,k} = −∫dλ ⟨⟨u_{n,k}|∂_λu_0⟩⟩ exp(i∫(ε_n + kω − ε_0)dλ/λ̇)
/// for state 0 of the track, with λ̇(λ) from `rate`, summed over |k| ≤ k_max.
pub fn transition_amplitudes(track: &FloquetTrack, rate: impl Fn(f64) -> f64, k_max: i64) -> Result<TransitionAmplitudes> {
    let np = track.lambda.len();
    let ns = track.vectors.len();
    if ns == 0 || np < 3 {
        return Err(Error::Usage("need a tracked initial state and at least three points".into()));
    }
    let u0 = &track.vectors[0];
    let h = |i: usize, j: usize| track.lambda[j] - track.lambda[i];
    let deriv = |i: usize, w: usize| -> Option<Vec<C64>> {
        if i < w || i + w >= np {
            return None;
        }
        let dl = h(i - w, i + w);
        Some(u0[i + w].iter().zip(&u0[i - w]).map(|(a, b)| (a - b) / dl).collect())
    };
    let mut c = vec![C64::new(0.0, 0.0); ns];
    let mut richardson = 0.0f64;
    let mut zero_rate = true;
    for n in 1..ns {
        for k in -k_max..=k_max {
            let mut theta = 0.0;
            let mut prev: Option<(f64, C64)> = None;
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..np {
                let l = track.lambda[i];
                let r = rate(l);
                if i > 0 {
                    let lp = track.lambda[i - 1];
                    let rp = rate(lp);
                    let gi = track.energies[n][i] + k as f64 * track.omega - track.energies[0][i];
                    let gp = track.energies[n][i - 1] + k as f64 * track.omega - track.energies[0][i - 1];
                    if r != 0.0 && rp != 0.0 {
                        theta += 0.5 * (gi / r + gp / rp) * (l - lp);
                    }
                }
                if r != 0.0 {
                    zero_rate = false;
                }
                // ⟨⟨u_{n,k}|v⟩⟩ = Σ_j u*_{n,j−k} v_j
                let f = match deriv(i, 1) {
                    Some(d) => {
                        let val = shifted_inner(&track.vectors[n][i], &d, track.n_e, k);
                        if let Some(d2) = deriv(i, 2) {
                            let v2 = shifted_inner(&track.vectors[n][i], &d2, track.n_e, k);
                            richardson = richardson.max((val - v2).norm());
                        }
                        val * C64::from_polar(1.0, theta)
                    }
                    None => C64::new(0.0, 0.0),
                };
                if let Some((lp, fp)) = prev {
                    acc += (f + fp) * (0.5 * (l - lp));
                }
                prev = Some((l, f));
            }
            c[n] -= acc;
        }
    }
    if zero_rate {
        // a frozen parameter drives no transitions
        c.iter_mut().skip(1).for_each(|z| *z = C64::new(0.0, 0.0));
    }
    Ok(TransitionAmplitudes {
        prob: c.iter().map(|z| z.norm_sqr()).collect(),
        c: c.iter().map(|z| (z.re, z.im)).collect(),
        richardson,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GatePhaseSet {
    /// phases θ_k of the ground branch, k ∈ {00, 01, 10, 11}
    pub theta: [f64; 4],
    /// phases θ′_k of the excited branch
    pub theta_excited: [f64; 4],
    /// excited-branch occupancy
    pub p_e: f64,
}

impl GatePhaseSet {
    pub fn from_alpha(alpha: [f64; 4], p_e: f64) -> Self {
        GatePhaseSet { theta: [0.0; 4], theta_excited: alpha, p_e }
    }

    pub fn alpha(&self) -> [f64; 4] {
        std::array::from_fn(|k| self.theta_excited[k] - self.theta[k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaximizerMethod {
    ClosedForm,
    Simplex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateFidelity {
    pub fidelity: f64,
    /// √(1 − (3/2)p_e)
    pub bound: f64,
    pub max_vmv: f64,
    pub maximizer: [f64; 4],
    pub method: MaximizerMethod,
    pub warnings: Vec<String>,
}

fn vmv(m: &[[f64; 4]; 4], v: &[f64; 4]) -> f64 {
    (0..4).map(|i| (0..4).map(|j| v[i] * m[i][j] * v[j]).sum::<f64>()).sum()
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(y: [f64; 4]) -> [f64; 4] {
    let mut u = y;
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            tau = t;
        }
    }
    y.map(|x| (x - tau).max(0.0))
}

fn closed_form(m: &[[f64; 4]; 4]) -> Option<([f64; 4], f64)> {
    let mm = Mat::from_fn(4, 4, |i, j| m[i][j]);
    let (w, v) = eigh(mm.as_ref()).ok()?;
    let scale = w.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if scale == 0.0 || w.iter().any(|x| x.abs() < 1e-10 * scale) {
        return None;
    }
    // M⁻¹·1
    let mut x = [0.0; 4];
    for k in 0..4 {
        let proj: f64 = (0..4).map(|i| v[(i, k)]).sum::<f64>() / w[k];
        for i in 0..4 {
            x[i] += v[(i, k)] * proj;
        }
    }
    let s: f64 = x.iter().sum();
    if s <= 0.0 {
        return None;
    }
    let vstar = x.map(|xi| xi / s);
    if vstar.iter().any(|&p| p < -1e-12) {
        return None;
    }
    Some((vstar, 1.0 / s))
}

/// max VᵀMV over the simplex by projected-gradient ascent from `restarts`
/// random starting points plus the vertices and centre.
pub fn simplex_maximum(m: &[[f64; 4]; 4], restarts: usize, seed: u64) -> ([f64; 4], f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts: Vec<[f64; 4]> = (0..4).map(|k| std::array::from_fn(|i| if i == k { 1.0 } else { 0.0 })).collect();
    starts.push([0.25; 4]);
    for _ in 0..restarts {
        let raw: [f64; 4] = std::array::from_fn(|_| -rng.gen::<f64>().ln());
        let s: f64 = raw.iter().sum();
        starts.push(raw.map(|x| x / s));
    }
    let lip = 2.0 * m.iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = if lip > 0.0 { 1.0 / lip } else { 1.0 };
    let mut best = ([0.25; 4], vmv(m, &[0.25; 4]));
    for mut v in starts {
        for _ in 0..2000 {
            let g: [f64; 4] = std::array::from_fn(|i| 2.0 * (0..4).map(|j| m[i][j] * v[j]).sum::<f64>());
            let next = project_simplex(std::array::from_fn(|i| v[i] + step * g[i]));
            let moved = (0..4).map(|i| (next[i] - v[i]).abs()).fold(0.0, f64::max);
            v = next;
            if moved < 1e-15 {
                break;
            }
        }
        let f = vmv(m, &v);
        if f > best.1 {
            best = (v, f);
        }
    }
    best
}

/// F = √(1 − p_e·max VᵀMV) with M_kj = 1 − cos(α_k − α_j).
pub fn gate_fidelity(phases: &GatePhaseSet, seed: u64) -> Result<GateFidelity> {
    let p = phases.p_e;
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Domain(format!("excited occupancy {p} outside [0, 1)")));
    }
    let mut warnings = Vec::new();
    if p > 0.2 {
        warnings.push(format!("excited occupancy {p} is not small"));
    }
    let a = phases.alpha();
    let m: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| 1.0 - (a[i] - a[j]).cos()));
    let (simplex_v, simplex_f) = simplex_maximum(&m, 100, seed);
    let (maximizer, max_vmv, method) = match closed_form(&m) {
        Some((v, f)) if f >= simplex_f => (v, f, MaximizerMethod::ClosedForm),
        _ => (simplex_v, simplex_f, MaximizerMethod::Simplex),
    };
    let max_vmv = max_vmv.max(0.0);
    Ok(GateFidelity {
        fidelity: (1.0 - p * max_vmv).sqrt(),
        bound: (1.0 - 1.5 * p).sqrt(),
        max_vmv,
        maximizer,
        method,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lz_limits() {
        let c = AvoidedCrossing {
            d_star: 0.0,
            gap: 0.0,
            slope_diff: 1.0,
            alpha: 0.0,
            lower_band: 0,
            upper_band: 1,
            fit_residual: 0.0,
            reliable: true,
        };
        assert_eq!(landau_zener(&c, 0.3).unwrap(), 1.0);
        let flat = AvoidedCrossing { slope_diff: 0.0, gap: 0.1, ..c.clone() };
        assert!(landau_zener(&flat, 0.3).is_err());
        // (δε)²/(ω̇₀ tan(α/2)) = (4/π) ln 2 gives one half
        let alpha = 2.0 * 0.5f64.atan();
        let gap = ((4.0 / std::f64::consts::PI) * 2f64.ln() * 0.5).sqrt();
        assert!((landau_zener_angle(gap, 1.0, alpha).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn angle_and_slope_forms_agree() {
        let (gap, s, rate) = (0.03, 0.7, 2e-3);
        let c = AvoidedCrossing {
            d_star: 0.0,
            gap,
            slope_diff: s,
            alpha: 2.0 * (0.5 * s).atan(),
            lower_band: 0,
            upper_band: 1,
            fit_residual: 0.0,
            reliable: true,
        };
        let a = landau_zener(&c, rate).unwrap();
        let b = landau_zener_angle(gap, rate, c.alpha).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex([0.5, 0.5, 0.5, 0.5]);
        assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        let p = project_simplex([2.0, 0.0, 0.0, 0.0]);
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn equal_phases_are_perfect() {
        let g = gate_fidelity(&GatePhaseSet::from_alpha([0.4; 4], 0.1), 7).unwrap();
        assert!(g.max_vmv.abs() < 1e-14);
        assert_eq!(g.fidelity, 1.0);
        let g = gate_fidelity(&GatePhaseSet::from_alpha([0.0, 1.0, 2.0, 3.0], 0.0), 7).unwrap();
        assert_eq!(g.fidelity, 1.0);
    }

    #[test]
    fn opposite_phases_reach_one() {
        let g = gate_fidelity(&GatePhaseSet::from_alpha([0.0, std::f64::consts::PI, 0.0, 0.0], 0.01), 3).unwrap();
        assert!((g.max_vmv - 1.0).abs() < 1e-9, "{}", g.max_vmv);
        assert_eq!(g.method, MaximizerMethod::Simplex);
    }

    #[test]
    fn occupancy_out_of_range() {
        assert!(gate_fidelity(&GatePhaseSet::from_alpha([0.0; 4], 1.0), 1).is_err());
        assert!(gate_fidelity(&GatePhaseSet::from_alpha([0.0; 4], -0.1), 1).is_err());
    }

    #[test]
    fn inner_product_block_shift() {
        let n_e = 2;
        let a: Vec<C64> = (0..6).map(|i| C64::new(i as f64, 0.0)).collect();
        let b = shift_vector(&a, n_e, 1);
        assert_eq!(b[0], a[2]);
        assert_eq!(b[4], C64::new(0.0, 0.0));
        // ⟨⟨e_k|S^m b⟩⟩ picks block k + m of b
        let e: Vec<C64> = (0..6).map(|i| C64::new(if i == 0 { 1.0 } else { 0.0 }, 0.0)).collect();
        assert_eq!(shifted_inner(&e, &a, n_e, 2), a[4]);
    }
}
