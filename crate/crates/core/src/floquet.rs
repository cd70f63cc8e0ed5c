//! Truncated Floquet Hamiltonian for H(t) = H₀ + Σ_j V_j·{cos,sin}(h_j ωt),
//! its diagonalisation and zone reduction, plus the perturbative tools used to
//! read resonances off it.
//!
//! Basis layout: index = (k + N_f)·N_e + n, i.e. n runs through all states
//! before the Floquet mode k changes. With H(t) = H₀ + Σ_h [A_h e^{ihωt} + h.c.]
//! the block (k, k−h) is A_h and (k, k+h) is A_h†; the diagonal blocks are
//! H₀ + kω.

use faer::{Mat, MatRef};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, eigh_c, hermiticity_residual, to_complex};
use crate::numerov::UnperturbedBasis;
use crate::spectra::{build_h0_dc, ip_matrix, iv2_matrix, v1_matrix, DriveParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Envelope {
    Cos,
    Sin,
}

#[derive(Debug, Clone)]
pub struct DriveTerm {
    /// Hermitian operator
    pub op: Mat<C64>,
    pub envelope: Envelope,
    /// multiple of the drive frequency
    pub harmonic: usize,
}

#[derive(Debug, Clone)]
pub struct PeriodicHamiltonian {
    pub h0: Mat<C64>,
    pub terms: Vec<DriveTerm>,
    pub omega: f64,
}

/// V from i·V (both given as real matrices): V = −i·(iV).
fn from_i_times(iv: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(iv.nrows(), iv.ncols(), |i, j| C64::new(0.0, -iv[(i, j)]))
}

impl PeriodicHamiltonian {
    pub fn dim(&self) -> usize {
        self.h0.nrows()
    }

    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.omega
    }

    /// H(t)
    pub fn at(&self, t: f64) -> Mat<C64> {
        let mut h = self.h0.clone();
        for term in &self.terms {
            let ph = term.harmonic as f64 * self.omega * t;
            let c = match term.envelope {
                Envelope::Cos => ph.cos(),
                Envelope::Sin => ph.sin(),
            };
            h += &term.op * faer::Scale(C64::new(c, 0.0));
        }
        h
    }

    /// ∫_{t0}^{t1} H(t) dt with exact antiderivatives of the envelopes.
    pub fn integral(&self, t0: f64, t1: f64) -> Mat<C64> {
        let mut g = &self.h0 * faer::Scale(C64::new(t1 - t0, 0.0));
        for term in &self.terms {
            let w = term.harmonic as f64 * self.omega;
            let c = if w == 0.0 {
                match term.envelope {
                    Envelope::Cos => t1 - t0,
                    Envelope::Sin => 0.0,
                }
            } else {
                match term.envelope {
                    Envelope::Cos => ((w * t1).sin() - (w * t0).sin()) / w,
                    Envelope::Sin => ((w * t0).cos() - (w * t1).cos()) / w,
                }
            };
            g += &term.op * faer::Scale(C64::new(c, 0.0));
        }
        g
    }

    /// Fourier component A_h of the drive.
    fn component(&self, h: usize) -> Option<Mat<C64>> {
        let mut acc: Option<Mat<C64>> = None;
        for term in self.terms.iter().filter(|t| t.harmonic == h) {
            let f = match term.envelope {
                Envelope::Cos => C64::new(0.5, 0.0),
                Envelope::Sin => C64::new(0.0, -0.5),
            };
            let a = &term.op * faer::Scale(f);
            acc = Some(match acc {
                None => a,
                Some(b) => b + a,
            });
        }
        acc
    }

    pub fn max_harmonic(&self) -> usize {
        self.terms.iter().map(|t| t.harmonic).max().unwrap_or(0)
    }

    /// Atom-ion drive in the frame co-moving with the micromotion at trap distance `d`:
    /// H₀(d) + V₁cos 2ωτ + V₂ sin ωτ, plus the excess-micromotion operators when
    /// `p.delta_d` or `p.l_ac` is non-zero (with d′ = d + δd).
    pub fn atom_ion(basis: &UnperturbedBasis, d: f64, omega: f64, p: DriveParams, include_v2: bool) -> Self {
        let dp = d + p.delta_d;
        let h0 = to_complex(build_h0_dc(basis, d, p.delta_d).as_ref());
        let mut terms = vec![DriveTerm {
            op: to_complex(v1_matrix(basis, dp, p.gamma).as_ref()),
            envelope: Envelope::Cos,
            harmonic: 2,
        }];
        if include_v2 {
            terms.push(DriveTerm {
                op: from_i_times(iv2_matrix(basis, dp, p.gamma).as_ref()),
                envelope: Envelope::Sin,
                harmonic: 1,
            });
        }
        let n = basis.dim();
        let xm = |shift: f64| Mat::from_fn(n, n, |i, j| basis.x[(i, j)] - if i == j { shift } else { 0.0 });
        let ip = ip_matrix(basis);
        if p.l_ac != 0.0 {
            // l_ac[γ(X − d′) sin 2ωτ − P cos ωτ]
            let g = p.gamma * p.l_ac;
            terms.push(DriveTerm {
                op: to_complex(xm(dp).as_ref()) * faer::Scale(C64::new(g, 0.0)),
                envelope: Envelope::Sin,
                harmonic: 2,
            });
            terms.push(DriveTerm {
                op: from_i_times(ip.as_ref()) * faer::Scale(C64::new(-p.l_ac, 0.0)),
                envelope: Envelope::Cos,
                harmonic: 1,
            });
        }
        if p.delta_d != 0.0 && include_v2 {
            // −2γδd[γ(X − d′) cos 2ωτ + P sin ωτ]
            let c = -2.0 * p.gamma * p.delta_d;
            terms.push(DriveTerm {
                op: to_complex(xm(dp).as_ref()) * faer::Scale(C64::new(c * p.gamma, 0.0)),
                envelope: Envelope::Cos,
                harmonic: 2,
            });
            terms.push(DriveTerm {
                op: from_i_times(ip.as_ref()) * faer::Scale(C64::new(c, 0.0)),
                envelope: Envelope::Sin,
                harmonic: 1,
            });
        }
        PeriodicHamiltonian { h0, terms, omega }
    }

    /// H₀ = (ω₀/2)σ_z, V = η σ_x cos ωt.
    pub fn two_level(omega0: f64, eta: f64, omega: f64) -> Self {
        let h0 = Mat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => C64::new(0.5 * omega0, 0.0),
            (1, 1) => C64::new(-0.5 * omega0, 0.0),
            _ => C64::new(0.0, 0.0),
        });
        let v = Mat::from_fn(2, 2, |i, j| C64::new(if i != j { eta } else { 0.0 }, 0.0));
        PeriodicHamiltonian { h0, terms: vec![DriveTerm { op: v, envelope: Envelope::Cos, harmonic: 1 }], omega }
    }

    /// Single operator V cos(ωt) on top of diagonal energies.
    pub fn cosine(energies: &[f64], v: MatRef<'_, C64>, omega: f64) -> Self {
        let n = energies.len();
        let h0 = Mat::from_fn(n, n, |i, j| C64::new(if i == j { energies[i] } else { 0.0 }, 0.0));
        PeriodicHamiltonian { h0, terms: vec![DriveTerm { op: v.to_owned(), envelope: Envelope::Cos, harmonic: 1 }], omega }
    }

    fn input_residual(&self) -> f64 {
        let mut r = hermiticity_residual(self.h0.as_ref());
        for t in &self.terms {
            r = r.max(hermiticity_residual(t.op.as_ref()));
        }
        r
    }
}

#[derive(Debug, Clone)]
pub enum FloquetData {
    /// every block happened to be real: symmetric fast path
    Real(Mat<f64>),
    Complex(Mat<C64>),
}

#[derive(Debug, Clone)]
pub struct FloquetMatrix {
    pub n_e: usize,
    /// modes run over k ∈ [−n_f, n_f]
    pub n_f: usize,
    pub omega: f64,
    pub data: FloquetData,
    pub hermiticity_residual: f64,
}

impl FloquetMatrix {
    pub fn dim(&self) -> usize {
        self.n_e * (2 * self.n_f + 1)
    }

    pub fn to_complex(&self) -> Mat<C64> {
        match &self.data {
            FloquetData::Real(m) => to_complex(m.as_ref()),
            FloquetData::Complex(m) => m.clone(),
        }
    }
}

pub fn build_floquet_matrix(ham: &PeriodicHamiltonian, n_f: usize) -> Result<FloquetMatrix> {
    let n = ham.dim();
    let input = ham.input_residual();
    if input > 1e-12 {
        return Err(Error::Consistency(format!("drive operators are not Hermitian (residual {input:.2e})")));
    }
    let modes = 2 * n_f + 1;
    let dim = n * modes;
    let mut m = Mat::<C64>::zeros(dim, dim);
    let comps: Vec<(usize, Mat<C64>)> =
        (1..=ham.max_harmonic()).filter_map(|h| ham.component(h).map(|a| (h, a))).collect();
    for kb in 0..modes {
        let k = kb as f64 - n_f as f64;
        for j in 0..n {
            for i in 0..n {
                m[(kb * n + i, kb * n + j)] = ham.h0[(i, j)];
            }
            m[(kb * n + j, kb * n + j)] += C64::new(k * ham.omega, 0.0);
        }
        for (h, a) in &comps {
            if kb >= *h {
                let lb = kb - h;
                for j in 0..n {
                    for i in 0..n {
                        m[(kb * n + i, lb * n + j)] = a[(i, j)];
                        m[(lb * n + j, kb * n + i)] = a[(i, j)].conj();
                    }
                }
            }
        }
    }
    let res = hermiticity_residual(m.as_ref());
    if res > 1e-12 {
        return Err(Error::Consistency(format!("Floquet matrix not Hermitian (residual {res:.2e})")));
    }
    let real = (0..dim).all(|j| (0..dim).all(|i| m[(i, j)].im == 0.0));
    let data = if real {
        FloquetData::Real(Mat::from_fn(dim, dim, |i, j| m[(i, j)].re))
    } else {
        FloquetData::Complex(m)
    };
    Ok(FloquetMatrix { n_e: n, n_f, omega: ham.omega, data, hermiticity_residual: res })
}

/// Map `e` into [center − ω/2, center + ω/2).
pub fn reduce(e: f64, omega: f64, center: f64) -> f64 {
    let lo = center - 0.5 * omega;
    let r = e - omega * ((e - lo) / omega).floor();
    if r >= lo + omega { r - omega } else { r }
}

/// Distance between two quasienergies on the circle of circumference ω.
pub fn zone_distance(a: f64, b: f64, omega: f64) -> f64 {
    reduce(a - b, omega, 0.0).abs()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetClass {
    /// reduced into the zone
    pub quasienergy: f64,
    /// eigenvalue of the truncated matrix for the chosen member
    pub raw: f64,
    pub k0_weight: f64,
    /// weight in the outermost modes |k| = N_f
    pub edge_weight: f64,
    pub dominant_n: usize,
    pub dominant_k: i64,
    #[serde(skip)]
    pub vector: Vec<C64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FloquetSpectrum {
    pub omega: f64,
    pub zone_center: f64,
    pub n_e: usize,
    pub n_f: usize,
    /// one member per physical class, sorted by quasienergy
    pub classes: Vec<FloquetClass>,
    /// every eigenvalue, reduced, ascending
    pub all_reduced: Vec<f64>,
    /// eigenvectors identified as block-shifted copies of a class
    pub duplicates: usize,
    /// eigenvectors matching no accepted class (truncation edge)
    pub unmatched: usize,
}

impl FloquetSpectrum {
    pub fn quasienergies(&self) -> Vec<f64> {
        self.classes.iter().map(|c| c.quasienergy).collect()
    }
}

/// |⟨a|S^m b⟩| where S shifts coefficients by one Floquet block.
pub fn shifted_overlap(a: &[C64], b: &[C64], n_e: usize, m: i64) -> f64 {
    let modes = a.len() / n_e;
    let mut s = C64::new(0.0, 0.0);
    for kb in 0..modes as i64 {
        let lb = kb + m;
        if lb < 0 || lb >= modes as i64 {
            continue;
        }
        for n in 0..n_e {
            s += a[kb as usize * n_e + n].conj() * b[lb as usize * n_e + n];
        }
    }
    s.norm()
}

/// Quasienergy window, as a fraction of ω, inside which eigenvectors are
/// compared for block-shift equivalence.
pub const DEDUP_WINDOW: f64 = 0.1;

pub fn diagonalize_floquet(fm: &FloquetMatrix, zone_center: f64) -> Result<FloquetSpectrum> {
    let (vals, vecs): (Vec<f64>, Mat<C64>) = match &fm.data {
        FloquetData::Real(m) => {
            let (w, v) = eigh(m.as_ref())?;
            (w, to_complex(v.as_ref()))
        }
        FloquetData::Complex(m) => eigh_c(m.as_ref())?,
    };
    let n = fm.n_e;
    let modes = 2 * fm.n_f + 1;
    let dim = fm.dim();
    let omega = fm.omega;
    struct Cand {
        idx: usize,
        raw: f64,
        red: f64,
        k0: f64,
        edge: f64,
        dom: (usize, i64),
    }
    let mut cands: Vec<Cand> = (0..dim)
        .map(|c| {
            let mut k0 = 0.0;
            let mut edge = 0.0;
            let mut best = (0.0, 0usize, 0i64);
            for kb in 0..modes {
                let k = kb as i64 - fm.n_f as i64;
                for i in 0..n {
                    let w = vecs[(kb * n + i, c)].norm_sqr();
                    if k == 0 {
                        k0 += w;
                    }
                    if k.unsigned_abs() as usize == fm.n_f {
                        edge += w;
                    }
                    if w > best.0 {
                        best = (w, i, k);
                    }
                }
            }
            Cand { idx: c, raw: vals[c], red: reduce(vals[c], omega, zone_center), k0, edge, dom: (best.1, best.2) }
        })
        .collect();
    cands.sort_by(|a, b| b.k0.total_cmp(&a.k0).then(a.idx.cmp(&b.idx)));

    let col = |c: usize| -> Vec<C64> { (0..dim).map(|i| vecs[(i, c)]).collect() };
    let mut classes: Vec<FloquetClass> = Vec::new();
    let mut duplicates = 0;
    let mut unmatched = 0;
    // members of one class differ by a block shift; truncation moves their
    // quasienergies apart slightly, so the energy window is only a prefilter
    let window = DEDUP_WINDOW * omega;
    for c in &cands {
        let v = col(c.idx);
        let dup = classes.iter().any(|cl| {
            if zone_distance(cl.quasienergy, c.red, omega) > window {
                return false;
            }
            let m = ((c.raw - cl.raw) / omega).round() as i64;
            // member at ε + mω carries the class coefficients shifted by m blocks
            shifted_overlap(&cl.vector, &v, n, m) > 0.5
        });
        if dup {
            duplicates += 1;
        } else if classes.len() < n {
            classes.push(FloquetClass {
                quasienergy: c.red,
                raw: c.raw,
                k0_weight: c.k0,
                edge_weight: c.edge,
                dominant_n: c.dom.0,
                dominant_k: c.dom.1,
                vector: v,
            });
        } else {
            unmatched += 1;
        }
    }
    classes.sort_by(|a, b| a.quasienergy.total_cmp(&b.quasienergy));
    let mut all_reduced: Vec<f64> = vals.iter().map(|&e| reduce(e, omega, zone_center)).collect();
    all_reduced.sort_by(f64::total_cmp);
    Ok(FloquetSpectrum {
        omega,
        zone_center,
        n_e: n,
        n_f: fm.n_f,
        classes,
        all_reduced,
        duplicates,
        unmatched,
    })
}

#[derive(Debug, Clone)]
pub struct RsCorrection {
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    /// column n: amplitude of |m⟩e^{+iωt} in u⁽¹⁾_n
    pub up: Mat<C64>,
    /// column n: amplitude of |m⟩e^{−iωt} in u⁽¹⁾_n
    pub down: Mat<C64>,
    /// (n, m, |V_mn|²/|ΔE² − ω²|) pairs above 0.1
    pub near_resonant: Vec<(usize, usize, f64)>,
}

/// Rayleigh-Schrödinger corrections for H₀ = diag(E) driven by V cos ωt.
pub fn rs_perturbation(energies: &[f64], v: MatRef<'_, C64>, omega: f64) -> RsCorrection {
    let n = energies.len();
    let mut eps2 = vec![0.0; n];
    let mut up = Mat::<C64>::zeros(n, n);
    let mut down = Mat::<C64>::zeros(n, n);
    let mut near = Vec::new();
    for nn in 0..n {
        for m in 0..n {
            let vmn = v[(m, nn)];
            if m == nn || vmn.norm() == 0.0 {
                continue;
            }
            let de = energies[nn] - energies[m];
            let den = de * de - omega * omega;
            let ratio = vmn.norm_sqr() / den.abs();
            if ratio > 0.1 {
                near.push((nn, m, ratio));
            }
            eps2[nn] += 0.5 * vmn.norm_sqr() * de / den;
            // (ΔE cos ωt + iω sin ωt)/(ΔE² − ω²) split into e^{±iωt}
            up[(m, nn)] = vmn * (0.5 / (de - omega));
            down[(m, nn)] = vmn * (0.5 / (de + omega));
        }
    }
    RsCorrection { eps1: vec![0.0; n], eps2, up, down, near_resonant: near }
}

#[derive(Debug, Clone, Copy)]
pub struct TwoLevel {
    pub lower: f64,
    pub upper: f64,
    /// columns: (amplitude on 1, amplitude on 2) for lower and upper
    pub vectors: [[C64; 2]; 2],
}

/// Exact solution of [[ε1, c], [c*, ε2]].
pub fn two_level_submatrix(e1: f64, e2: f64, coupling: C64) -> TwoLevel {
    let mean = 0.5 * (e1 + e2);
    let half = 0.5 * (e1 - e2);
    let r = (half * half + coupling.norm_sqr()).sqrt();
    let vec_for = |lam: f64| -> [C64; 2] {
        if coupling.norm() == 0.0 {
            let first = (lam - e1).abs() <= (lam - e2).abs();
            return if first { [C64::new(1.0, 0.0), C64::new(0.0, 0.0)] } else { [C64::new(0.0, 0.0), C64::new(1.0, 0.0)] };
        }
        // (ε1 − λ)a + c b = 0 → (a, b) ∝ (c, λ − ε1)
        let a = coupling;
        let b = C64::new(lam - e1, 0.0);
        let nrm = (a.norm_sqr() + b.norm_sqr()).sqrt();
        [a / nrm, b / nrm]
    };
    let (lo, hi) = if coupling.norm() == 0.0 { (e1.min(e2), e1.max(e2)) } else { (mean - r, mean + r) };
    TwoLevel { lower: lo, upper: hi, vectors: [vec_for(lo), vec_for(hi)] }
}
