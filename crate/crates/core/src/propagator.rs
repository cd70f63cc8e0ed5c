//! One-period time-evolution operator by second-order Magnus stepping, and the
//! quasienergies read off its eigenphases.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::{reduce, zone_distance, PeriodicHamiltonian};
use crate::linalg::{eig_c, expm, unitarity_residual};

pub const DEFAULT_STEPS: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Eigenphase {
    pub quasienergy: f64,
    pub lambda: (f64, f64),
    /// unperturbed state with the largest overlap, and that squared overlap
    pub dominant_n: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone)]
pub struct PropagatorResult {
    pub u: Mat<C64>,
    pub omega: f64,
    pub steps: usize,
    /// sorted by quasienergy
    pub phases: Vec<Eigenphase>,
    pub unitarity_residual: f64,
}

impl PropagatorResult {
    pub fn quasienergies(&self) -> Vec<f64> {
        self.phases.iter().map(|p| p.quasienergy).collect()
    }
}

/// U(T, 0) with `steps` equal steps; each step applies exp(−i∫H dt).
pub fn propagate_one_period(ham: &PeriodicHamiltonian, steps: usize) -> Result<PropagatorResult> {
    if steps == 0 {
        return Err(Error::Usage("propagator needs at least one step".into()));
    }
    let n = ham.dim();
    let period = ham.period();
    let dt = period / steps as f64;
    let mut u = Mat::<C64>::identity(n, n);
    for s in 0..steps {
        let t0 = s as f64 * dt;
        // the last step ends exactly on T
        let t1 = if s + 1 == steps { period } else { t0 + dt };
        let g = ham.integral(t0, t1) * faer::Scale(C64::new(0.0, -1.0));
        let step = expm(g.as_ref())?;
        u = &step * &u;
    }
    let res = unitarity_residual(u.as_ref());
    if res > 1e-6 {
        return Err(Error::Numerical(format!(
            "propagator lost unitarity (residual {res:.2e}); retry with at least {} steps",
            2 * steps
        )));
    }
    let phases = eigenphases(u.as_ref(), ham.omega)?;
    Ok(PropagatorResult { u, omega: ham.omega, steps, phases, unitarity_residual: res })
}

fn eigenphases(u: MatRef<'_, C64>, omega: f64) -> Result<Vec<Eigenphase>> {
    let period = 2.0 * std::f64::consts::PI / omega;
    let (vals, vecs) = eig_c(u)?;
    let n = u.nrows();
    let mut out: Vec<Eigenphase> = (0..vals.len())
        .map(|c| {
            let norm: f64 = (0..n).map(|i| vecs[(i, c)].norm_sqr()).sum();
            let (dom, w) = (0..n)
                .map(|i| (i, vecs[(i, c)].norm_sqr() / norm))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            Eigenphase {
                quasienergy: reduce(-vals[c].arg() / period, omega, 0.0),
                lambda: (vals[c].re, vals[c].im),
                dominant_n: dom,
                overlap: w,
            }
        })
        .collect();
    out.sort_by(|a, b| a.quasienergy.total_cmp(&b.quasienergy).then(a.dominant_n.cmp(&b.dominant_n)));
    Ok(out)
}

/// ε = −arg(λ)/T reduced to [−ω/2, ω/2), ascending, with multiplicity.
pub fn quasienergies_from_eigenphases(u: MatRef<'_, C64>, omega: f64) -> Result<Vec<f64>> {
    Ok(eigenphases(u, omega)?.into_iter().map(|p| p.quasienergy).collect())
}

/// Largest circular distance from each of the `count` smallest-|ε| entries of
/// `a` to its nearest partner in `b`.
pub fn max_deviation(a: &[f64], b: &[f64], omega: f64, count: usize) -> f64 {
    let mut sel: Vec<f64> = a.to_vec();
    sel.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    sel.truncate(count);
    sel.iter()
        .map(|&e| b.iter().map(|&f| zone_distance(e, f, omega)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_unitary_phases() {
        let omega = 2.0;
        let period = std::f64::consts::PI;
        let thetas = [-3.0, -0.5, 0.0, 1.0, 3.1];
        let u = Mat::from_fn(5, 5, |i, j| if i == j { C64::from_polar(1.0, -thetas[i]) } else { C64::new(0.0, 0.0) });
        let e = quasienergies_from_eigenphases(u.as_ref(), omega).unwrap();
        let mut want: Vec<f64> = thetas.iter().map(|t| t / period).collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in e.iter().zip(&want) {
            assert!((a - b).abs() < 1e-13, "{a} {b}");
        }
    }

    #[test]
    fn identity_gives_zero() {
        let u = Mat::<C64>::identity(4, 4);
        assert!(quasienergies_from_eigenphases(u.as_ref(), 3.0).unwrap().iter().all(|e| e.abs() < 1e-15));
    }

    #[test]
    fn static_hamiltonian_reduces_energies() {
        let e = [0.3, 1.1, 2.9];
        let v = Mat::<C64>::zeros(3, 3);
        let ham = PeriodicHamiltonian::cosine(&e, v.as_ref(), 2.0);
        let r = propagate_one_period(&ham, 50).unwrap();
        let got = r.quasienergies();
        assert!(max_deviation(&got, &e.map(|x| reduce(x, 2.0, 0.0)), 2.0, 3) < 1e-12);
        assert!(r.unitarity_residual < 1e-12);
    }
}
