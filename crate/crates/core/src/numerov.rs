//! Unperturbed eigenproblem H₀(d=0) = p²/2 + x²/2 − (R²/2)/x⁴ on the half
//! line x > r_min with Ψ(r_min) = 0, solved by a renormalised Numerov scheme.
//!
//! The grid is uniform in s = −A/x + Bx, which packs points near r_min where
//! the local wavelength scales like x²/R. A Liouville substitution ψ = √(dx/ds)·φ
//! turns the mapped equation back into φ'' = W(s)φ, so the usual Numerov
//! recurrence applies. Eigenvalues come from Sturm counting (number of negative
//! pivots of the Numerov tridiagonal matrix) and bisection; eigenvectors from a
//! twisted factorisation at the converged energy.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::Scaled;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Spacing {
    Uniform,
    /// s = −a/x + b·x
    Graded { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    pub x: Vec<f64>,
    /// dx/ds at each node
    jac: Vec<f64>,
    /// Liouville term added to W(s)
    extra: Vec<f64>,
    /// quadrature weights in x (Simpson in s times dx/ds)
    pub weights: Vec<f64>,
    pub h: f64,
    pub spacing: Spacing,
}

fn simpson(n_pts: usize, h: f64) -> Vec<f64> {
    debug_assert!(n_pts % 2 == 1);
    let mut w = vec![0.0; n_pts];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n_pts - 1 {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        } * h
            / 3.0;
    }
    w
}

impl RadialGrid {
    pub fn graded(r_min: f64, x_max: f64, a: f64, b: f64) -> Result<Self> {
        if !(r_min > 0.0 && x_max > r_min && a > 0.0 && b > 0.0) {
            return Err(Error::Config(format!(
                "graded grid needs 0 < r_min < x_max and a, b > 0 (got {r_min}, {x_max}, {a}, {b})"
            )));
        }
        let s0 = -a / r_min + b * r_min;
        let s1 = -a / x_max + b * x_max;
        let mut n = (s1 - s0).ceil() as usize;
        n += n % 2;
        let h = (s1 - s0) / n as f64;
        let mut x = Vec::with_capacity(n + 1);
        let mut jac = Vec::with_capacity(n + 1);
        let mut extra = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = s0 + h * i as f64;
            let xi = match i {
                0 => r_min,
                _ if i == n => x_max,
                _ => (s + (s * s + 4.0 * a * b).sqrt()) / (2.0 * b),
            };
            let den = a + b * xi * xi;
            x.push(xi);
            jac.push(xi * xi / den);
            extra.push(3.0 * a * b * xi.powi(4) / den.powi(4));
        }
        let mut weights = simpson(n + 1, h);
        for (w, j) in weights.iter_mut().zip(&jac) {
            *w *= j;
        }
        Ok(RadialGrid { x, jac, extra, weights, h, spacing: Spacing::Graded { a, b } })
    }

    /// `n` intervals (rounded up to even) on [x0, x1].
    pub fn uniform(x0: f64, x1: f64, n: usize) -> Result<Self> {
        if !(x1 > x0) || n < 2 {
            return Err(Error::Config("uniform grid needs x1 > x0 and n >= 2".into()));
        }
        let n = n + n % 2;
        let h = (x1 - x0) / n as f64;
        let x = (0..=n).map(|i| x0 + h * i as f64).collect();
        Ok(RadialGrid {
            x,
            jac: vec![1.0; n + 1],
            extra: vec![0.0; n + 1],
            weights: simpson(n + 1, h),
            h,
            spacing: Spacing::Uniform,
        })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Largest step in x.
    pub fn max_dx(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Minimum number of points per local de Broglie wavelength at energy `e`.
    pub fn points_per_wavelength(&self, potential: &[f64], e: f64) -> f64 {
        let mut worst = f64::INFINITY;
        for i in 1..self.x.len() {
            let k2 = 2.0 * (e - potential[i].min(potential[i - 1]));
            if k2 > 0.0 {
                let dx = self.x[i] - self.x[i - 1];
                worst = worst.min(2.0 * std::f64::consts::PI / (k2.sqrt() * dx));
            }
        }
        worst
    }

    fn check(&self) -> Result<()> {
        if self.x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid is not strictly increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RMin {
    pub x: f64,
    /// node order: R/x + φ = kπ
    pub k: i64,
}

/// Node of sin(R/x + φ) closest to `target`, restricted to (floor, R/2).
pub fn find_r_min(phase: f64, r_i: f64, target: f64, floor: f64) -> Result<RMin> {
    use std::f64::consts::PI;
    if !(r_i > 0.0) || !(phase > -PI && phase <= PI) {
        return Err(Error::Domain(format!("find_r_min: R = {r_i}, phase = {phase}")));
    }
    // x_k = R/(kπ − φ) decreases with k; first admissible k keeps x below R/2
    let k_min = ((2.0 + phase) / PI).floor() as i64 + 1;
    let node = |k: i64| r_i / (k as f64 * PI - phase);
    let k_t = ((r_i / target + phase) / PI).round() as i64;
    let mut best: Option<RMin> = None;
    for k in (k_t - 1).max(k_min)..=(k_t + 1).max(k_min) {
        let x = node(k);
        if x <= floor || x >= 0.5 * r_i {
            continue;
        }
        if best.map_or(true, |b| (x - target).abs() < (b.x - target).abs()) {
            best = Some(RMin { x, k });
        }
    }
    best.ok_or_else(|| {
        Error::Config(format!("no short-range node in ({floor}, {}) near {target}", 0.5 * r_i))
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisOptions {
    /// Outer wall; `None` picks max(15, √(2E_hi) + 6) so the top states decay fully.
    pub x_max: Option<f64>,
    pub grid_a: f64,
    pub grid_b: f64,
    /// Spacing used for the interaction-free full-line problem.
    pub harmonic_step: f64,
    pub e_lo: f64,
    pub e_hi: f64,
    pub n_states: usize,
    /// Preferred r_min in units of a₀ (converted with the config's l_i).
    pub r_min_target_bohr: f64,
}

impl Default for BasisOptions {
    fn default() -> Self {
        BasisOptions {
            x_max: None,
            grid_a: 300.0,
            grid_b: 200.0,
            harmonic_step: 0.01,
            e_lo: -5000.0,
            e_hi: 300.0,
            n_states: 150,
            r_min_target_bohr: 70.0,
        }
    }
}

impl BasisOptions {
    pub fn resolved_x_max(&self) -> f64 {
        self.x_max.unwrap_or_else(|| 15f64.max((2.0 * self.e_hi.max(0.0)).sqrt() + 6.0))
    }
}

#[derive(Debug, Clone)]
pub struct UnperturbedBasis {
    /// E_n(0), ascending [ħω₀]
    pub energies: Vec<f64>,
    /// Quantum number (node count) of `energies[0]`.
    pub first_index: usize,
    pub nodes: Vec<usize>,
    /// Normalised ψ_n on `grid`; empty when loaded from a cache.
    pub states: Vec<Vec<f64>>,
    pub grid: Option<RadialGrid>,
    pub x: Mat<f64>,
    pub x2: Mat<f64>,
    pub r_min: Option<RMin>,
    /// Number of window states dropped by the `n_states` cap.
    pub truncated: usize,
    pub warnings: Vec<String>,
}

impl UnperturbedBasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Exact harmonic-oscillator ladder, used where grid noise would only
    /// obscure a check.
    pub fn harmonic_analytic(n: usize) -> Self {
        let mut x = Mat::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            let v = ((i + 1) as f64 / 2.0).sqrt();
            x[(i, i + 1)] = v;
            x[(i + 1, i)] = v;
        }
        let x2 = &x * &x;
        // the product is exact except in the last row/column, where the
        // truncated ladder loses the n → n+1 → n path
        let mut x2 = x2;
        if n > 0 {
            x2[(n - 1, n - 1)] = (n as f64 - 0.5).max(0.0);
        }
        UnperturbedBasis {
            energies: (0..n).map(|k| k as f64 + 0.5).collect(),
            first_index: 0,
            nodes: (0..n).collect(),
            states: Vec::new(),
            grid: None,
            x,
            x2,
            r_min: None,
            truncated: 0,
            warnings: Vec::new(),
        }
    }

    /// Keep only the lowest `n` states.
    pub fn truncate(&self, n: usize) -> Self {
        let n = n.min(self.dim());
        UnperturbedBasis {
            energies: self.energies[..n].to_vec(),
            first_index: self.first_index,
            nodes: self.nodes[..n.min(self.nodes.len())].to_vec(),
            states: self.states.iter().take(n).cloned().collect(),
            grid: self.grid.clone(),
            x: self.x.submatrix(0, 0, n, n).to_owned(),
            x2: self.x2.submatrix(0, 0, n, n).to_owned(),
            r_min: self.r_min,
            truncated: self.truncated + self.dim() - n,
            warnings: self.warnings.clone(),
        }
    }
}

/// Numerov problem on a fixed grid and potential.
pub struct Numerov<'a> {
    grid: &'a RadialGrid,
    v: Vec<f64>,
}

impl<'a> Numerov<'a> {
    pub fn new(grid: &'a RadialGrid, potential: impl Fn(f64) -> f64) -> Self {
        let v = grid.x.iter().map(|&x| potential(x)).collect();
        Numerov { grid, v }
    }

    pub fn potential(&self) -> &[f64] {
        &self.v
    }

    #[inline]
    fn t(&self, i: usize, e: f64) -> f64 {
        let g = self.grid;
        let w = g.jac[i] * g.jac[i] * 2.0 * (self.v[i] - e) + g.extra[i];
        g.h * g.h * w / 12.0
    }

    #[inline]
    fn u(&self, i: usize, e: f64) -> f64 {
        let t = self.t(i, e);
        (2.0 + 10.0 * t) / (1.0 - t)
    }

    /// Largest h²W/12 over the grid at energy `e`; the scheme needs it below 1.
    pub fn max_t(&self, e: f64) -> f64 {
        (0..self.v.len()).map(|i| self.t(i, e)).fold(f64::MIN, f64::max)
    }

    /// Number of eigenvalues below `e`.
    pub fn count(&self, e: f64) -> usize {
        let n = self.v.len() - 1;
        let mut d = self.u(1, e);
        let mut c = (d < 0.0) as usize;
        for i in 2..n {
            if d == 0.0 {
                d = f64::MIN_POSITIVE;
            }
            d = self.u(i, e) - 1.0 / d;
            c += (d < 0.0) as usize;
        }
        c
    }

    /// Eigenvalue with quantum number `idx` inside [lo, hi].
    pub fn eigenvalue(&self, idx: usize, mut lo: f64, mut hi: f64) -> Result<f64> {
        if !(self.count(lo) <= idx && self.count(hi) > idx) {
            return Err(Error::Numerical(format!(
                "state {idx} not bracketed by [{lo}, {hi}] (counts {} and {})",
                self.count(lo),
                self.count(hi)
            )));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if hi - lo <= 4.0 * f64::EPSILON * mid.abs().max(1.0) {
                return Ok(mid);
            }
            if self.count(mid) > idx {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Err(Error::Numerical(format!(
            "bisection for state {idx} stalled in [{lo}, {hi}]"
        )))
    }

    /// Eigenvector at a converged eigenvalue via twisted factorisation.
    /// Returns ψ (not normalised) and its node count.
    pub fn eigenvector(&self, e: f64) -> (Vec<f64>, usize) {
        let n = self.v.len() - 1;
        let u: Vec<f64> = (0..=n).map(|i| self.u(i, e)).collect();
        let guard = |d: f64| if d == 0.0 { f64::MIN_POSITIVE } else { d };
        let mut fwd = vec![0.0; n + 1];
        let mut bwd = vec![0.0; n + 1];
        fwd[1] = guard(u[1]);
        for i in 2..n {
            fwd[i] = guard(u[i] - 1.0 / fwd[i - 1]);
        }
        bwd[n - 1] = guard(u[n - 1]);
        for i in (1..n - 1).rev() {
            bwd[i] = guard(u[i] - 1.0 / bwd[i + 1]);
        }
        let mut m = 1;
        let mut best = f64::INFINITY;
        for i in 1..n {
            let left = if i > 1 { 1.0 / fwd[i - 1] } else { 0.0 };
            let right = if i + 1 < n { 1.0 / bwd[i + 1] } else { 0.0 };
            let g = (u[i] - left - right).abs();
            if g < best {
                best = g;
                m = i;
            }
        }
        let mut f = vec![0.0; n + 1];
        f[m] = 1.0;
        for i in (1..m).rev() {
            f[i] = f[i + 1] / fwd[i];
        }
        for i in m + 1..n {
            f[i] = f[i - 1] / bwd[i];
        }
        let mut nodes = 0;
        let mut last = 0.0;
        for &fi in &f[1..n] {
            if fi != 0.0 {
                if last != 0.0 && (fi > 0.0) != (last > 0.0) {
                    nodes += 1;
                }
                last = fi;
            }
        }
        let psi = (0..=n)
            .map(|i| {
                if i == 0 || i == n {
                    0.0
                } else {
                    self.grid.jac[i].sqrt() * f[i] / (1.0 - self.t(i, e))
                }
            })
            .collect();
        (psi, nodes)
    }
}

/// ⟨n|x^p|m⟩ by quadrature on the common grid, symmetrised.
pub fn matrix_elements(grid: &RadialGrid, states: &[Vec<f64>], power: i32) -> Result<Mat<f64>> {
    let n = states.len();
    let npts = grid.len();
    if states.iter().any(|s| s.len() != npts) {
        return Err(Error::Usage("state length does not match the grid".into()));
    }
    let psi = Mat::from_fn(npts, n, |i, j| states[j][i]);
    let wpsi = Mat::from_fn(npts, n, |i, j| grid.weights[i] * grid.x[i].powi(power) * states[j][i]);
    let m = psi.transpose() * &wpsi;
    Ok(Mat::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])))
}

pub fn solve_unperturbed(scaled: &Scaled, opts: &BasisOptions) -> Result<UnperturbedBasis> {
    let x_max = opts.resolved_x_max();
    if x_max < 15.0 {
        return Err(Error::Config(format!("x_max = {x_max} is below 15 l_i")));
    }
    if !(opts.e_hi > opts.e_lo) {
        return Err(Error::Config("energy window is empty".into()));
    }
    let r = scaled.r;
    let (grid, r_min) = if r > 0.0 {
        let target = opts.r_min_target_bohr * scaled.bohr;
        let rm = find_r_min(scaled.phase, r, target, 10.0 * scaled.bohr)?;
        (RadialGrid::graded(rm.x, x_max, opts.grid_a, opts.grid_b)?, Some(rm))
    } else {
        // no short-range wall without the interaction: whole line
        let n = (2.0 * x_max / opts.harmonic_step).ceil() as usize;
        (RadialGrid::uniform(-x_max, x_max, n)?, None)
    };
    grid.check()?;
    let r2 = r * r;
    let num = Numerov::new(&grid, |x| 0.5 * x * x - if r2 > 0.0 { 0.5 * r2 / x.powi(4) } else { 0.0 });
    solve_on_grid(&num, opts, r_min)
}

fn solve_on_grid(num: &Numerov<'_>, opts: &BasisOptions, r_min: Option<RMin>) -> Result<UnperturbedBasis> {
    let grid = num.grid;
    let mut warnings = Vec::new();
    if num.max_t(opts.e_lo) >= 1.0 {
        return Err(Error::Config("grid too coarse: h^2 W/12 reaches 1 in the window".into()));
    }
    let ppw = grid.points_per_wavelength(num.potential(), opts.e_hi);
    if ppw < 10.0 {
        warnings.push(format!("only {ppw:.1} points per local wavelength at E_hi"));
    }
    let n_lo = num.count(opts.e_lo);
    let n_hi = num.count(opts.e_hi);
    let in_window = n_hi - n_lo;
    let keep = in_window.min(opts.n_states);
    if in_window > opts.n_states {
        warnings.push(format!(
            "energy window holds {in_window} states; keeping the lowest {}",
            opts.n_states
        ));
    }
    let energies: Vec<f64> = (n_lo..n_lo + keep)
        .into_par_iter()
        .map(|idx| num.eigenvalue(idx, opts.e_lo, opts.e_hi))
        .collect::<Result<_>>()?;
    if energies.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Numerical("eigenvalues are not strictly ascending".into()));
    }
    let vecs: Vec<(Vec<f64>, usize)> = energies
        .par_iter()
        .map(|&e| {
            let (mut psi, nodes) = num.eigenvector(e);
            let norm: f64 = psi.iter().zip(&grid.weights).map(|(p, w)| w * p * p).sum::<f64>().sqrt();
            let peak = psi.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            let s = peak.signum() / norm;
            psi.iter_mut().for_each(|p| *p *= s);
            (psi, nodes)
        })
        .collect();
    let x_max = *grid.x.last().unwrap();
    for (k, (psi, _)) in vecs.iter().enumerate() {
        let peak = psi.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let tail = grid
            .x
            .iter()
            .zip(psi)
            .filter(|(x, _)| **x > x_max - 1.0)
            .fold(0.0f64, |a, (_, &p)| a.max(p.abs()));
        if tail > 1e-8 * peak {
            warnings.push(format!("state {} is clipped by the outer wall", n_lo + k));
        }
    }
    let (states, nodes): (Vec<_>, Vec<_>) = vecs.into_iter().unzip();
    let x = matrix_elements(grid, &states, 1)?;
    let x2 = matrix_elements(grid, &states, 2)?;
    Ok(UnperturbedBasis {
        energies,
        first_index: n_lo,
        nodes,
        states,
        grid: Some(grid.clone()),
        x,
        x2,
        r_min,
        truncated: in_window - keep,
        warnings,
    })
}

/// Solve an arbitrary potential on a given grid (Dirichlet at both ends).
pub fn solve_potential(
    grid: &RadialGrid,
    potential: impl Fn(f64) -> f64,
    opts: &BasisOptions,
) -> Result<UnperturbedBasis> {
    grid.check()?;
    let num = Numerov::new(grid, potential);
    solve_on_grid(&num, opts, None)
}
