//! Dense linear algebra helpers sized for regression work: a few dozen
//! columns at most, so plain Gaussian elimination is the right tool.

/// Row-major rectangular matrix.
pub type Matrix = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Matrix {
    vec![vec![0.0; c]; r]
}

pub fn identity(n: usize) -> Matrix {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn transpose(m: &[Vec<f64>]) -> Matrix {
    if m.is_empty() {
        return Vec::new();
    }
    let (r, c) = (m.len(), m[0].len());
    let mut t = zeros(c, r);
    for i in 0..r {
        for j in 0..c {
            t[j][i] = m[i][j];
        }
    }
    t
}

pub fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Matrix {
    let (r, k) = (a.len(), a[0].len());
    let c = b[0].len();
    debug_assert_eq!(k, b.len());
    let mut out = zeros(r, c);
    for i in 0..r {
        for t in 0..k {
            let av = a[i][t];
            if av == 0.0 {
                continue;
            }
            for j in 0..c {
                out[i][j] += av * b[t][j];
            }
        }
    }
    out
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// X'X for a row-major design matrix.
pub fn gram(x: &[Vec<f64>]) -> Matrix {
    let p = x[0].len();
    let mut g = zeros(p, p);
    for row in x {
        for i in 0..p {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..p {
                g[i][j] += ri * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            g[i][j] = g[j][i];
        }
    }
    g
}

/// X'y for a row-major design matrix.
pub fn gram_vec(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut g = vec![0.0; p];
    for (row, yi) in x.iter().zip(y) {
        for (j, v) in row.iter().enumerate() {
            g[j] += v * yi;
        }
    }
    g
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
/// Returns `Err(column)` with the first column whose pivot collapses,
/// which callers translate into a collinearity diagnostic.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, usize> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(*rhs);
            r
        })
        .collect();
    let scale: f64 = m
        .iter()
        .flat_map(|r| r[..n].iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut perm: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot_row][col].abs() < 1e-12 * scale {
            return Err(perm[col]);
        }
        m.swap(col, pivot_row);
        perm.swap(col, pivot_row);
        for row in (col + 1)..n {
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = m[col][n];
        for k in (col + 1)..n {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Ok(x)
}

/// Inverse via column-by-column solves. Same singularity contract as [`solve`].
pub fn invert(a: &[Vec<f64>]) -> Result<Matrix, usize> {
    let n = a.len();
    let mut inv = zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = solve(a, &e)?;
        for i in 0..n {
            inv[i][j] = col[i];
        }
    }
    Ok(inv)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(a: &[Vec<f64>]) -> Option<Matrix> {
    let n = a.len();
    let mut l = zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i][j] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

pub fn frobenius(m: &[Vec<f64>]) -> f64 {
    m.iter()
        .flat_map(|r| r.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Spectral radius estimate by Gelfand's formula: repeatedly square the
/// matrix with norm rescaling, so rho ~ exp(log-scale / 2^steps). Accurate
/// to well under a percent, which is all the stability checks need.
pub fn spectral_radius(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    if n == 0 {
        return 0.0;
    }
    let mut m = a.to_vec();
    let mut log_scale = 0.0f64;
    let mut exponent = 1.0f64;
    for _ in 0..12 {
        let norm = frobenius(&m);
        if norm == 0.0 {
            return 0.0;
        }
        for row in &mut m {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
        log_scale += norm.ln() / exponent;
        m = matmul(&m, &m);
        exponent *= 2.0;
    }
    let norm = frobenius(&m).max(f64::MIN_POSITIVE);
    (log_scale + norm.ln() / exponent).exp()
}
