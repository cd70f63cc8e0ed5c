//! Thin wrappers over faer's dense solvers plus a complex matrix exponential.

use faer::linalg::solvers::Solve;
use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Eigenvalues ascending with eigenvectors in columns.
pub fn eigh(a: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("symmetric eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

pub fn eigh_c(a: MatRef<'_, C64>) -> Result<(Vec<f64>, Mat<C64>)> {
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("hermitian eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a general complex matrix, with right eigenvectors.
pub fn eig_c(a: MatRef<'_, C64>) -> Result<(Vec<C64>, Mat<C64>)> {
    let evd = a.eigen().map_err(|e| Error::Numerical(format!("eigensolver: {e:?}")))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    Ok((vals, evd.U().to_owned()))
}

/// max |A − Aᵀ| relative to max |A| (absolute when A vanishes).
pub fn symmetry_residual(a: MatRef<'_, f64>) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
            scale = scale.max(a[(i, j)].abs());
        }
    }
    if scale > 0.0 { worst / scale.max(1.0) } else { worst }
}

pub fn hermiticity_residual(a: MatRef<'_, C64>) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
            scale = scale.max(a[(i, j)].norm());
        }
    }
    if scale > 0.0 { worst / scale.max(1.0) } else { worst }
}

/// max |U†U − I|
pub fn unitarity_residual(u: MatRef<'_, C64>) -> f64 {
    let g = u.adjoint() * u;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let id = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - C64::new(id, 0.0)).norm());
        }
    }
    worst
}

pub fn to_complex(a: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0))
}

fn norm1(a: MatRef<'_, C64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

// Padé coefficients and thresholds from Higham (2005), "The scaling and
// squaring method for the matrix exponential revisited".
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

fn scaled(a: MatRef<'_, C64>, s: f64) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

fn add_identity(m: &mut Mat<C64>, c: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(c, 0.0);
    }
}

/// Linear combination Σ c_k M_k.
fn combo(n: usize, terms: &[(f64, &Mat<C64>)]) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| terms.iter().map(|(c, m)| m[(i, j)] * *c).sum())
}

/// exp(A) by scaling and squaring with a Padé approximant of adaptive degree.
pub fn expm(a: MatRef<'_, C64>) -> Result<Mat<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Usage("expm of a non-square matrix".into()));
    }
    let nrm = norm1(a);
    let a2 = a * a;
    let (u, v, s) = if let Some(&(m, _)) = THETA.iter().find(|(_, t)| nrm <= *t) {
        let b: &[f64] = match m {
            3 => &B3,
            5 => &B5,
            7 => &B7,
            _ => &B9,
        };
        // powers A², A⁴, ... up to A^{m-1}
        let mut pows = vec![a2.clone()];
        while 2 * (pows.len() + 1) <= m {
            let next = pows.last().unwrap() * &a2;
            pows.push(next);
        }
        let mut odd = Mat::<C64>::zeros(n, n);
        let mut even = Mat::<C64>::zeros(n, n);
        add_identity(&mut odd, b[1]);
        add_identity(&mut even, b[0]);
        for (k, p) in pows.iter().enumerate() {
            let e = 2 * (k + 1);
            odd = combo(n, &[(1.0, &odd), (b[e + 1], p)]);
            even = combo(n, &[(1.0, &even), (b[e], p)]);
        }
        (a * &odd, even, 0)
    } else {
        let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
        let sc = 0.5f64.powi(s);
        let a1 = scaled(a, sc);
        let a2 = scaled(a2.as_ref(), sc * sc);
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = &B13;
        let inner_u = combo(n, &[(b[13], &a6), (b[11], &a4), (b[9], &a2)]);
        let mut tail_u = combo(n, &[(b[7], &a6), (b[5], &a4), (b[3], &a2)]);
        add_identity(&mut tail_u, b[1]);
        let u = &a1 * (&a6 * &inner_u + &tail_u);
        let inner_v = combo(n, &[(b[12], &a6), (b[10], &a4), (b[8], &a2)]);
        let mut tail_v = combo(n, &[(b[6], &a6), (b[4], &a4), (b[2], &a2)]);
        add_identity(&mut tail_v, b[0]);
        let v = &a6 * &inner_v + &tail_v;
        (u, v, s)
    };
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.partial_piv_lu().solve(&p);
    for _ in 0..s {
        r = &r * &r;
    }
    if r.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::Numerical("matrix exponential overflowed".into()));
    }
    Ok(r)
}
