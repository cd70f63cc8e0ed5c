//! Distance-resolved spectra of H₀(d), level continuation, ω/2ω resonances and
//! the micromotion coupling strengths between the ground level and the rest.

use faer::{Mat, MatRef};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::eigh;
use crate::numerov::UnperturbedBasis;
use crate::units::{E_CHARGE, HBAR};

/// H₀(d) in the d = 0 basis: E_n(0) + d²/2 on the diagonal, −d⟨n|X|m⟩ off it.
pub fn build_h0(basis: &UnperturbedBasis, d: f64) -> Mat<f64> {
    let n = basis.dim();
    Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { basis.energies[i] + 0.5 * d * d } else { 0.0 };
        diag - d * basis.x[(i, j)]
    })
}

/// H₀ at trap distance `d` with a static field shifting the ion by `delta_d`:
/// (x − d)²/2 − δd(x − d) assembled term by term.
pub fn build_h0_dc(basis: &UnperturbedBasis, d: f64, delta_d: f64) -> Mat<f64> {
    let n = basis.dim();
    Mat::from_fn(n, n, |i, j| {
        let diag = if i == j { basis.energies[i] + 0.5 * d * d + delta_d * d } else { 0.0 };
        diag - (d + delta_d) * basis.x[(i, j)]
    })
}

/// V₁(d) = −γ²(X − d)² in the d = 0 basis.
pub fn v1_matrix(basis: &UnperturbedBasis, d: f64, gamma: f64) -> Mat<f64> {
    let n = basis.dim();
    let g2 = gamma * gamma;
    Mat::from_fn(n, n, |i, j| {
        let dd = if i == j { d * d } else { 0.0 };
        -g2 * (basis.x2[(i, j)] - 2.0 * d * basis.x[(i, j)] + dd)
    })
}

/// i·V₂(d) with V₂ = −γ{X − d, P}, real antisymmetric in the d = 0 basis:
/// (iV₂)_{nm} = (E_m − E_n)(V₁)_{nm}/γ.
pub fn iv2_matrix(basis: &UnperturbedBasis, d: f64, gamma: f64) -> Mat<f64> {
    let n = basis.dim();
    let e = &basis.energies;
    Mat::from_fn(n, n, |i, j| gamma * (e[i] - e[j]) * (basis.x2[(i, j)] - 2.0 * d * basis.x[(i, j)]))
}

/// i·P, real antisymmetric: P_{nm} = i(E_n − E_m)X_{nm}.
pub fn ip_matrix(basis: &UnperturbedBasis) -> Mat<f64> {
    let n = basis.dim();
    let e = &basis.energies;
    Mat::from_fn(n, n, |i, j| -(e[i] - e[j]) * basis.x[(i, j)])
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelCrossing {
    /// the two distances between which continuation was ambiguous
    pub from_d: f64,
    pub to_d: f64,
    pub labels: Vec<i64>,
    /// best squared overlap found for the affected levels
    pub best_overlap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticSpectrum {
    /// ascending
    pub distances: Vec<f64>,
    /// per distance, ascending
    pub energies: Vec<Vec<f64>>,
    /// per distance, label of each sorted level: energy rank relative to the
    /// ground curve (ground 0, levels below it negative)
    pub labels: Vec<Vec<i64>>,
    /// per distance, identity of each sorted level continued by overlap from
    /// the largest distance, where it equals the label
    pub tracks: Vec<Vec<i64>>,
    pub crossings: Vec<LabelCrossing>,
    /// E_dc shift the scan was done with
    pub delta_d: f64,
}

impl StaticSpectrum {
    pub fn position(&self, di: usize, label: i64) -> Option<usize> {
        self.labels[di].iter().position(|&l| l == label)
    }

    pub fn energy(&self, di: usize, label: i64) -> Option<f64> {
        self.position(di, label).map(|k| self.energies[di][k])
    }

    pub fn ground_energy(&self) -> Vec<f64> {
        (0..self.distances.len()).map(|i| self.energy(i, 0).unwrap_or(f64::NAN)).collect()
    }

    pub fn index_of(&self, d: f64) -> Option<usize> {
        self.distances.iter().position(|&x| (x - d).abs() < 1e-9)
    }
}

/// Eigenpairs at one distance, handed to scan visitors.
pub struct LevelSet<'a> {
    pub d: f64,
    pub energies: &'a [f64],
    pub vectors: MatRef<'a, f64>,
    pub labels: &'a [i64],
    pub tracks: &'a [i64],
}

fn spread_about(basis: &UnperturbedBasis, v: MatRef<'_, f64>, d: f64) -> Vec<f64> {
    // ⟨(x − d)²⟩ of every eigenvector
    let op = Mat::from_fn(basis.dim(), basis.dim(), |i, j| basis.x2[(i, j)] - 2.0 * d * basis.x[(i, j)]);
    let ov = &op * v;
    (0..v.ncols())
        .map(|k| (0..v.nrows()).map(|i| v[(i, k)] * ov[(i, k)]).sum::<f64>() + d * d)
        .collect()
}

/// Diagonalise H₀ over `d_grid` and label levels by overlap continuation,
/// starting from the largest distance where the trap ground level is the lowest
/// state localised near the trap centre. `visit` sees every distance in
/// descending order together with its labels.
pub fn scan_spectrum_with(
    basis: &UnperturbedBasis,
    d_grid: &[f64],
    delta_d: f64,
    mut visit: impl FnMut(&LevelSet<'_>),
) -> Result<StaticSpectrum> {
    if d_grid.is_empty() {
        return Err(Error::Usage("empty distance grid".into()));
    }
    if d_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage("distance grid must be strictly ascending".into()));
    }
    let n = basis.dim();
    let nd = d_grid.len();
    let mut energies = vec![Vec::new(); nd];
    let mut labels = vec![Vec::new(); nd];
    let mut tracks = vec![Vec::new(); nd];
    let mut crossings = Vec::new();
    let mut prev: Option<(Mat<f64>, Vec<i64>, f64)> = None;

    const CHUNK: usize = 32;
    let order: Vec<usize> = (0..nd).rev().collect();
    for chunk in order.chunks(CHUNK) {
        let solved: Vec<(Vec<f64>, Mat<f64>)> = chunk
            .par_iter()
            .map(|&di| eigh(build_h0_dc(basis, d_grid[di], delta_d).as_ref()))
            .collect::<Result<_>>()?;
        for (&di, (w, v)) in chunk.iter().zip(solved) {
            let d = d_grid[di];
            let lab = match &prev {
                None => {
                    let spread = spread_about(basis, v.as_ref(), d + delta_d);
                    let g = (0..n)
                        .filter(|&k| spread[k] < 1.5)
                        .min_by(|&a, &b| w[a].total_cmp(&w[b]))
                        .unwrap_or_else(|| {
                            (0..n).min_by(|&a, &b| (w[a] - 0.5).abs().total_cmp(&(w[b] - 0.5).abs())).unwrap()
                        });
                    (0..n).map(|k| k as i64 - g as i64).collect()
                }
                Some((pv, pl, pd)) => {
                    let (lab, amb) = continue_labels(pv.as_ref(), pl, v.as_ref());
                    if let Some((ls, best)) = amb {
                        crossings.push(LabelCrossing { from_d: *pd, to_d: d, labels: ls, best_overlap: best });
                    }
                    lab
                }
            };
            let g = lab.iter().position(|&l| l == 0).expect("ground track present") as i64;
            let rank: Vec<i64> = (0..n as i64).map(|k| k - g).collect();
            visit(&LevelSet { d, energies: &w, vectors: v.as_ref(), labels: &rank, tracks: &lab });
            energies[di] = w;
            labels[di] = rank;
            tracks[di] = lab.clone();
            prev = Some((v, lab, d));
        }
    }
    Ok(StaticSpectrum { distances: d_grid.to_vec(), energies, labels, tracks, crossings, delta_d })
}

pub fn scan_spectrum(basis: &UnperturbedBasis, d_grid: &[f64]) -> Result<StaticSpectrum> {
    scan_spectrum_with(basis, d_grid, 0.0, |_| {})
}

/// Assign labels to `cur` from `prev` by squared overlap ≥ 1/2; leftovers are
/// matched in energy order and reported.
fn continue_labels(
    prev: MatRef<'_, f64>,
    prev_labels: &[i64],
    cur: MatRef<'_, f64>,
) -> (Vec<i64>, Option<(Vec<i64>, f64)>) {
    let n = cur.ncols();
    let o = prev.transpose() * cur;
    let mut lab = vec![i64::MIN; n];
    let mut used = vec![false; n];
    let mut best_left = 1.0f64;
    for j in 0..n {
        let (i, ov) = (0..n)
            .map(|i| (i, o[(i, j)] * o[(i, j)]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if ov >= 0.5 && !used[i] {
            lab[j] = prev_labels[i];
            used[i] = true;
        } else {
            best_left = best_left.min(ov);
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !used[i]).collect();
    if free.is_empty() {
        return (lab, None);
    }
    let mut affected = Vec::new();
    let mut fi = free.into_iter();
    for l in lab.iter_mut().filter(|l| **l == i64::MIN) {
        let i = fi.next().unwrap();
        *l = prev_labels[i];
        affected.push(*l);
    }
    (lab, Some((affected, best_left)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Resonance {
    pub distance: f64,
    pub level: i64,
    /// 1 for ω, 2 for 2ω
    pub order: u32,
    pub coupling: Option<f64>,
    /// crossing sits in the first or last grid interval
    pub low_confidence: bool,
}

/// Roots of E_n(d) − E_0(d) − κω for κ = 1, 2 inside `d_range`, for every
/// positive label, located by sign change and linear interpolation.
pub fn find_resonances(
    spec: &StaticSpectrum,
    omega: f64,
    d_range: (f64, f64),
    couplings: Option<&CouplingTable>,
) -> Vec<Resonance> {
    let idx: Vec<usize> = (0..spec.distances.len())
        .filter(|&i| spec.distances[i] >= d_range.0 - 1e-12 && spec.distances[i] <= d_range.1 + 1e-12)
        .collect();
    let mut out = Vec::new();
    let max_label = spec.labels.iter().flat_map(|l| l.iter().copied()).max().unwrap_or(0);
    for order in [1u32, 2] {
        for level in 1..=max_label {
            let g = |i: usize| -> Option<f64> {
                Some(spec.energy(i, level)? - spec.energy(i, 0)? - order as f64 * omega)
            };
            for w in idx.windows(2) {
                let (i, j) = (w[0], w[1]);
                let (Some(a), Some(b)) = (g(i), g(j)) else { continue };
                if a == 0.0 || (a > 0.0) == (b > 0.0) {
                    continue;
                }
                let (d0, d1) = (spec.distances[i], spec.distances[j]);
                let d = d0 + (d1 - d0) * a / (a - b);
                let coupling = couplings.and_then(|t| {
                    let k = t.nearest(d)?;
                    let col = t.levels.iter().position(|&l| l == level)?;
                    let v = if order == 1 { t.v2[k][col] } else { t.v1[k][col] };
                    v.is_finite().then_some(v)
                });
                out.push(Resonance {
                    distance: d,
                    level,
                    order,
                    coupling,
                    low_confidence: i == idx[0] || j == *idx.last().unwrap(),
                });
            }
        }
    }
    out.sort_by(|a, b| a.order.cmp(&b.order).then(a.distance.total_cmp(&b.distance)));
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingTable {
    /// ascending, in the original (unshifted) trap distance
    pub distances: Vec<f64>,
    pub levels: Vec<i64>,
    /// |⟨0|V₁|n⟩| per distance and level; NaN where the level is absent
    pub v1: Vec<Vec<f64>>,
    /// |⟨0|V₂|n⟩| from |E_n − E_0|·|⟨0|V₁|n⟩|/γ in the instantaneous basis
    pub v2: Vec<Vec<f64>>,
    /// |⟨0|V₂|n⟩| from the d = 0 {X − d, P} matrix rotated into the instantaneous basis
    pub v2_direct: Vec<Vec<f64>>,
    pub v3: Option<Vec<Vec<f64>>>,
    pub v4: Option<Vec<Vec<f64>>>,
    /// continued identity of the state holding each label
    pub tracks: Vec<Vec<i64>>,
    /// max relative disagreement of the two V₂ routes per distance
    pub route_residual: Vec<f64>,
}

impl CouplingTable {
    pub fn nearest(&self, d: f64) -> Option<usize> {
        (0..self.distances.len()).min_by(|&a, &b| {
            (self.distances[a] - d).abs().total_cmp(&(self.distances[b] - d).abs())
        })
    }

    pub fn column(&self, level: i64) -> Option<usize> {
        self.levels.iter().position(|&l| l == level)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DriveParams {
    pub gamma: f64,
    pub delta_d: f64,
    pub l_ac: f64,
}

/// Scan and tabulate ground-level couplings for labels in `n_range`.
pub fn coupling_strengths(
    basis: &UnperturbedBasis,
    d_grid: &[f64],
    p: DriveParams,
    n_range: (i64, i64),
) -> Result<(StaticSpectrum, CouplingTable)> {
    let n = basis.dim();
    let levels: Vec<i64> = (n_range.0..=n_range.1).collect();
    let nd = d_grid.len();
    let mut v1 = vec![Vec::new(); nd];
    let mut v2 = vec![Vec::new(); nd];
    let mut v2d = vec![Vec::new(); nd];
    let mut v3 = vec![Vec::new(); nd];
    let mut v4 = vec![Vec::new(); nd];
    let mut tr = vec![Vec::new(); nd];
    let mut resid = vec![0.0; nd];
    let ip = ip_matrix(basis);
    let mut k = nd;
    let spec = scan_spectrum_with(basis, d_grid, p.delta_d, |ls| {
        k -= 1;
        let dp = ls.d + p.delta_d;
        let v = ls.vectors;
        let g = ls.labels.iter().position(|&l| l == 0).expect("ground label present");
        let vg = v.col(g);
        // rows ⟨0|·|m⟩ in the instantaneous basis
        let row = |op: &Mat<f64>| -> Vec<f64> {
            let t = vg.transpose() * op;
            (0..n).map(|m| (0..n).map(|i| t[i] * v[(i, m)]).sum()).collect()
        };
        let x2d = Mat::from_fn(n, n, |i, j| basis.x2[(i, j)] - 2.0 * dp * basis.x[(i, j)]);
        let r_x2d = row(&x2d);
        let r_iv2 = row(&iv2_matrix(basis, dp, p.gamma));
        let g2 = p.gamma * p.gamma;
        let a1: Vec<f64> = (0..n).map(|m| (-g2 * (r_x2d[m] + if m == g { dp * dp } else { 0.0 })).abs()).collect();
        let a2: Vec<f64> = (0..n).map(|m| (ls.energies[m] - ls.energies[g]).abs() / p.gamma * a1[m]).collect();
        let b2: Vec<f64> = r_iv2.iter().map(|z| z.abs()).collect();
        let scale = b2.iter().fold(0.0f64, |a, &b| a.max(b)).max(1e-300);
        resid[k] = (0..n).map(|m| (a2[m] - b2[m]).abs() / scale).fold(0.0, f64::max);
        let (r3, r4) = if p.l_ac != 0.0 {
            let x = basis.x.clone();
            let rx = row(&x);
            let rp = row(&ip);
            (
                (0..n).map(|m| (p.gamma * p.l_ac * (rx[m] - if m == g { dp } else { 0.0 })).abs()).collect::<Vec<_>>(),
                rp.iter().map(|z| (p.l_ac * z).abs()).collect::<Vec<_>>(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let pick = |src: &[f64]| -> Vec<f64> {
            levels
                .iter()
                .map(|&l| ls.labels.iter().position(|&x| x == l).map_or(f64::NAN, |m| src[m]))
                .collect()
        };
        tr[k] = levels
            .iter()
            .map(|&l| ls.labels.iter().position(|&x| x == l).map_or(i64::MIN, |m| ls.tracks[m]))
            .collect();
        v1[k] = pick(&a1);
        v2[k] = pick(&a2);
        v2d[k] = pick(&b2);
        if p.l_ac != 0.0 {
            v3[k] = pick(&r3);
            v4[k] = pick(&r4);
        }
    })?;
    let table = CouplingTable {
        distances: d_grid.to_vec(),
        levels,
        v1,
        v2,
        v2_direct: v2d,
        v3: (p.l_ac != 0.0).then_some(v3),
        v4: (p.l_ac != 0.0).then_some(v4),
        tracks: tr,
        route_residual: resid,
    };
    Ok((spec, table))
}

/// Window over which a coupling rise must persist to count [l_i].
pub const DMM_PERSIST: f64 = 0.1;

/// Largest distance at which max_{n ≥ n_min} |⟨0|V₂|n⟩| rises through
/// `threshold` when d decreases; linearly interpolated between grid points.
/// The trap excitations 1..n_min keep their exclusion when a narrow crossing
/// pushes them up the energy ranking.
pub fn detect_dmm(table: &CouplingTable, threshold: f64, n_min: i64) -> Option<f64> {
    let cols: Vec<usize> = (0..table.levels.len()).filter(|&c| table.levels[c] >= n_min).collect();
    let peak: Vec<f64> = (0..table.distances.len())
        .map(|i| {
            cols.iter()
                .filter(|&&c| !(1..n_min).contains(&table.tracks[i][c]))
                .map(|&c| table.v2[i][c])
                .filter(|v| v.is_finite())
                .fold(0.0, f64::max)
        })
        .collect();
    let d = &table.distances;
    // a rise only counts if it persists over the next DMM_PERSIST in d; isolated
    // spikes come from narrow avoided crossings between grid points
    let sustained = |k: usize| (0..=k).rev().take_while(|&j| d[k] - d[j] <= DMM_PERSIST).all(|j| peak[j] >= threshold);
    for i in (1..peak.len()).rev() {
        // i is the larger distance, i - 1 the smaller
        if peak[i] < threshold && sustained(i - 1) {
            let (d0, d1) = (table.distances[i - 1], table.distances[i]);
            let t = (threshold - peak[i]) / (peak[i - 1] - peak[i]);
            return Some(d1 + (d0 - d1) * t);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FieldCoupling {
    /// [E_0 − E_{−3}] in ħω₀
    pub omega_f: f64,
    /// |⟨0|X|−3⟩| in l_i
    pub dipole: f64,
    /// e E₀ |⟨0|X|−3⟩| / ħ in rad/s
    pub rabi: f64,
}

/// Transition from the ground level to molecular level −3 at distance `d`.
/// `e0` is the field amplitude in V/m and `l_i` the oscillator length in metres.
pub fn field_coupling(
    basis: &UnperturbedBasis,
    spec: &StaticSpectrum,
    d: f64,
    e0: f64,
    l_i: f64,
) -> Result<FieldCoupling> {
    let di = spec
        .index_of(d)
        .ok_or_else(|| Error::Usage(format!("distance {d} is not on the scanned grid")))?;
    let g = spec.position(di, 0).ok_or_else(|| Error::Scope("ground level not tracked".into()))?;
    let m = spec
        .position(di, -3)
        .ok_or_else(|| Error::Scope("molecular level -3 is outside the basis".into()))?;
    let (w, v) = eigh(build_h0_dc(basis, d, spec.delta_d).as_ref())?;
    let xv = &basis.x * v.col(m);
    let dipole = (0..basis.dim()).map(|i| v[(i, g)] * xv[i]).sum::<f64>().abs();
    Ok(FieldCoupling { omega_f: w[g] - w[m], dipole, rabi: E_CHARGE * e0 * dipole * l_i / HBAR })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmCouplings {
    /// (γ²)|⟨0,0|X_cm²|n_cm,n⟩| in ħω₀
    pub x2: f64,
    /// γ|⟨0,0|{X_cm,P_cm}|n_cm,n⟩| in ħω₀
    pub anticommutator: f64,
}

/// Analytic centre-of-mass couplings for equal trap frequencies.
pub fn cm_rel_couplings(gamma: f64, n_cm: usize, n: usize) -> CmCouplings {
    let sel = if n != 0 {
        0.0
    } else {
        match n_cm {
            0 => 1.0,
            2 => 2f64.sqrt(),
            _ => 0.0,
        }
    };
    CmCouplings { x2: 0.5 * gamma * gamma * sel, anticommutator: 0.5 * gamma * n_cm as f64 * sel }
}

/// Detuning from the sideband resonance E_n − E_0 = ħ(ω − ω₀), all in ħω₀.
pub fn sideband_detuning(gap: f64, omega: f64) -> f64 {
    gap - (omega - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h0_at_zero_is_diagonal() {
        let b = UnperturbedBasis::harmonic_analytic(8);
        let h = build_h0(&b, 0.0);
        for i in 0..8 {
            for j in 0..8 {
                let want = if i == j { b.energies[i] } else { 0.0 };
                assert_eq!(h[(i, j)], want);
            }
        }
    }

    #[test]
    fn cm_values() {
        let g = 0.5f64.sqrt();
        let c = cm_rel_couplings(g, 2, 0);
        assert!((c.x2 - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(cm_rel_couplings(g, 2, 1), CmCouplings { x2: 0.0, anticommutator: 0.0 });
        assert_eq!(cm_rel_couplings(g, 5, 0).x2, 0.0);
        assert!(sideband_detuning(11.7, 12.7).abs() < 1e-12);
    }

    #[test]
    fn iv2_is_antisymmetric() {
        let b = UnperturbedBasis::harmonic_analytic(10);
        let m = iv2_matrix(&b, 1.3, 0.7);
        for i in 0..10 {
            for j in 0..10 {
                assert_eq!(m[(i, j)], -m[(j, i)]);
            }
        }
    }

    #[test]
    fn label_continuation_swaps_on_crossing() {
        let prev = Mat::<f64>::identity(2, 2);
        let cur = Mat::from_fn(2, 2, |i, j| if i != j { 1.0 } else { 0.0 });
        let (lab, amb) = continue_labels(prev.as_ref(), &[0, 1], cur.as_ref());
        assert_eq!(lab, vec![1, 0]);
        assert!(amb.is_none());
    }
}
