//! Small dense linear algebra for the covariance pipeline.
//!
//! The symmetric eigensolver is Householder tridiagonalisation followed by
//! implicit QL (the EISPACK `tred2`/`tql2` pair). [`top_eigenvectors`] is the
//! per-pixel fast path: it only back-transforms the eigenvectors that are
//! actually needed, via inverse iteration on the tridiagonal form.

use crate::error::{Error, Result};

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::Config(format!("expected {} entries for a {n}x{n} matrix", n * n)));
        }
        Ok(Self { n, data })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.n, |i, j| self.get(j, i))
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.n();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l[j * n + k] * l[j * n + k];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::Numerical(format!("matrix is not positive definite (pivot {j} = {diag:e})")));
        }
        let ljj = diag.sqrt();
        l[j * n + j] = ljj;
        for i in j + 1..n {
            let s = a.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            l[i * n + j] = s / ljj;
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - dot(&l[i * n..i * n + i], &y[..i])) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

const QL_MAX_SWEEPS: usize = 60;

/// Householder reduction of a symmetric matrix to tridiagonal form.
///
/// `v` holds the input on entry; on exit the reflector for step `i + 1` sits
/// in `v[0..=i][i + 1]` with scale `h[i + 1]`. Returns `(diag, offdiag)`
/// where `offdiag[i]` couples rows `i - 1` and `i` (`offdiag[0] = 0`).
fn householder_tridiagonal(v: &mut [f64], n: usize, h_out: &mut [f64]) -> (Vec<f64>, Vec<f64>) {
    let mut d: Vec<f64> = v[(n - 1) * n..].to_vec();
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in &d[..i] {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in &mut d[..i] {
                *dk /= scale;
                h += *dk * *dk;
            }
            let f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            e[..i].iter_mut().for_each(|x| *x = 0.0);
            for j in 0..i {
                let f = d[j];
                v[j * n + i] = f;
                let mut g = e[j] + v[j * n + j] * f;
                for k in j + 1..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }
    h_out.copy_from_slice(&d);
    let mut diag = vec![0.0; n];
    for i in 0..n {
        diag[i] = v[i * n + i];
    }
    (diag, e)
}

/// Forms the orthogonal factor from the stored reflectors, in place.
fn accumulate_reflectors(v: &mut [f64], n: usize, h: &[f64]) {
    let mut d = vec![0.0; n];
    for i in 0..n - 1 {
        v[i * n + i] = 1.0;
        let hi = h[i + 1];
        if hi != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / hi;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n - 1 {
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + n - 1] = 1.0;
}

/// Applies the stored orthogonal factor to `z` (maps tridiagonal-basis
/// vectors back to the original basis).
fn apply_reflectors(v: &[f64], n: usize, h: &[f64], z: &mut [f64]) {
    for i in 0..n - 1 {
        let hi = h[i + 1];
        if hi == 0.0 {
            continue;
        }
        let mut g = 0.0;
        for k in 0..=i {
            g += v[k * n + i + 1] * z[k];
        }
        let g = g / hi;
        for k in 0..=i {
            z[k] -= g * v[k * n + i + 1];
        }
    }
}

/// Implicit QL on a symmetric tridiagonal matrix. `rows`, when given, holds
/// eigenvectors as rows (row-major `n x n`) and is rotated along.
fn tridiagonal_ql(d: &mut [f64], e_in: &[f64], mut rows: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&e_in[1..]);
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_SWEEPS {
                    return Err(Error::Numerical(format!("QL iteration did not converge for eigenvalue {l}")));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                for di in &mut d[l + 2..] {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(w) = rows.as_deref_mut() {
                        let (lo, hi) = w.split_at_mut((i + 1) * n);
                        let wi = &mut lo[i * n..];
                        let wi1 = &mut hi[..n];
                        for k in 0..n {
                            let h = wi1[k];
                            wi1[k] = s * wi[k] + c * h;
                            wi[k] = c * wi[k] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(e[l].abs() > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    Ok(())
}

fn check_input(a: &Matrix) -> Result<()> {
    if a.n() == 0 {
        return Err(Error::Numerical("empty matrix".into()));
    }
    if a.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    Ok(())
}

/// Makes the largest-magnitude entry of `v` positive (first one on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full symmetric eigendecomposition. Eigenvalues are returned in descending
/// order; eigenvectors are the matching columns of the returned matrix, each
/// sign-normalised by [`fix_sign`].
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    check_input(a)?;
    let n = a.n();
    if n == 1 {
        return Ok((vec![a.get(0, 0)], Matrix::identity(1)));
    }
    let mut v = a.as_slice().to_vec();
    let mut h = vec![0.0; n];
    let (mut d, e) = householder_tridiagonal(&mut v, n, &mut h);
    accumulate_reflectors(&mut v, n, &h);
    // eigenvectors as rows for contiguous rotations
    let mut rows = Matrix::from_row_major(n, v).expect("square").transpose().data;
    tridiagonal_ql(&mut d, &e, Some(&mut rows))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values: Vec<f64> = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n);
    for (col, &src) in order.iter().enumerate() {
        let u = &mut rows[src * n..(src + 1) * n];
        fix_sign(u);
        for k in 0..n {
            vectors.set(k, col, u[k]);
        }
    }
    Ok((values, vectors))
}

/// Eigenvalues only, descending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    check_input(a)?;
    let n = a.n();
    if n == 1 {
        return Ok(vec![a.get(0, 0)]);
    }
    let mut v = a.as_slice().to_vec();
    let mut h = vec![0.0; n];
    let (mut d, e) = householder_tridiagonal(&mut v, n, &mut h);
    tridiagonal_ql(&mut d, &e, None)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

/// Leading eigenpairs selected by `select`, which receives all eigenvalues
/// (descending) and returns how many to keep (clamped to `1..=n`).
///
/// Returns `(all eigenvalues, kept eigenvectors)`; the vectors follow the
/// same sign convention as [`symmetric_eigen`]. Falls back to the full
/// decomposition when more than a quarter of the spectrum is requested.
pub fn top_eigenvectors(a: &Matrix, select: impl FnOnce(&[f64]) -> usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    check_input(a)?;
    let n = a.n();
    if n == 1 {
        return Ok((vec![a.get(0, 0)], vec![vec![1.0]]));
    }
    let mut v = a.as_slice().to_vec();
    let mut h = vec![0.0; n];
    let (diag, off) = householder_tridiagonal(&mut v, n, &mut h);
    let mut values = diag.clone();
    tridiagonal_ql(&mut values, &off, None)?;
    values.sort_by(|a, b| b.total_cmp(a));
    let keep = select(&values).clamp(1, n);

    if keep * 4 > n {
        let (values, vecs) = symmetric_eigen(a)?;
        let kept = (0..keep).map(|j| vecs.column(j)).collect();
        return Ok((values, kept));
    }

    let tnorm = (0..n)
        .map(|i| diag[i].abs() + off[i].abs() + if i + 1 < n { off[i + 1].abs() } else { 0.0 })
        .fold(0.0, f64::max);
    let cluster_tol = 1e-3 * tnorm;
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(keep);
    let mut cluster_start = 0;
    for j in 0..keep {
        if j > 0 && (values[j - 1] - values[j]).abs() > cluster_tol {
            cluster_start = j;
        }
        let z = tridiagonal_inverse_iteration(&diag, &off, values[j], tnorm, &kept[cluster_start..j]);
        kept.push(z);
    }
    for z in &mut kept {
        apply_reflectors(&v, n, &h, z);
        fix_sign(z);
    }
    Ok((values, kept))
}

/// Eigenvector of the tridiagonal `(diag, off)` for eigenvalue `lambda`,
/// orthogonalised against `against` (earlier members of a close cluster).
fn tridiagonal_inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, tnorm: f64, against: &[Vec<f64>]) -> Vec<f64> {
    let n = diag.len();
    let tiny = f64::EPSILON * tnorm.max(f64::MIN_POSITIVE);
    // LU of (T - lambda I) with partial pivoting; u has up to two
    // superdiagonals after row swaps.
    let mut u0 = vec![0.0; n];
    let mut u1 = vec![0.0; n];
    let mut u2 = vec![0.0; n];
    let mut mult = vec![0.0; n];
    let mut swapped = vec![false; n];
    {
        let mut a = diag[0] - lambda;
        let mut b = if n > 1 { off[1] } else { 0.0 };
        for i in 0..n - 1 {
            let c = off[i + 1];
            let dn = diag[i + 1] - lambda;
            let bn = if i + 2 < n { off[i + 2] } else { 0.0 };
            if a.abs() >= c.abs() {
                let pivot = if a == 0.0 { tiny } else { a };
                let m = c / pivot;
                u0[i] = pivot;
                u1[i] = b;
                u2[i] = 0.0;
                mult[i] = m;
                a = dn - m * b;
                b = bn;
            } else {
                let m = a / c;
                u0[i] = c;
                u1[i] = dn;
                u2[i] = bn;
                mult[i] = m;
                swapped[i] = true;
                a = b - m * dn;
                b = -m * bn;
            }
        }
        u0[n - 1] = if a == 0.0 { tiny } else { a };
    }
    let solve = |rhs: &mut [f64]| {
        for i in 0..n - 1 {
            if swapped[i] {
                rhs.swap(i, i + 1);
            }
            rhs[i + 1] -= mult[i] * rhs[i];
        }
        for i in (0..n).rev() {
            let mut s = rhs[i];
            if i + 1 < n {
                s -= u1[i] * rhs[i + 1];
            }
            if i + 2 < n {
                s -= u2[i] * rhs[i + 2];
            }
            let p = if u0[i].abs() < tiny { tiny.copysign(u0[i]) } else { u0[i] };
            rhs[i] = s / p;
        }
    };
    let normalise = |z: &mut [f64]| {
        let nrm = dot(z, z).sqrt();
        if nrm > 0.0 && nrm.is_finite() {
            z.iter_mut().for_each(|x| *x /= nrm);
        }
    };
    let orthogonalise = |z: &mut [f64]| {
        for q in against {
            let p = dot(z, q);
            z.iter_mut().zip(q).for_each(|(x, y)| *x -= p * y);
        }
    };
    // deterministic, non-degenerate start vector
    let mut z: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
    orthogonalise(&mut z);
    normalise(&mut z);
    for _ in 0..4 {
        solve(&mut z);
        orthogonalise(&mut z);
        normalise(&mut z);
    }
    z
}
