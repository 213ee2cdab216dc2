// Brute-force covariance and a closed-form symmetric 3x3 eigensolver, an
// independent check on the SVD route. Pulled in with `include!`; the
// including module must have `RawImage` in scope.

/// Sample covariance by direct double summation over pixels.
pub fn covariance(img: &RawImage) -> [[f64; 3]; 3] {
    let n = img.pixels().len() as f64;
    let mut mean = [0.0; 3];
    for p in img.pixels() {
        for c in 0..3 {
            mean[c] += p[c] as f64 / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in img.pixels() {
        for a in 0..3 {
            for b in 0..3 {
                cov[a][b] += (p[a] as f64 - mean[a]) * (p[b] as f64 - mean[b]);
            }
        }
    }
    cov.map(|row| row.map(|x| x / (n - 1.0)))
}

/// Eigenvalues (descending) from the characteristic cubic, solved with
/// the trigonometric formula and polished by Newton steps.
pub fn eigenvalues(a: &[[f64; 3]; 3]) -> [f64; 3] {
    let p1 = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
    let q = (a[0][0] + a[1][1] + a[2][2]) / 3.0;
    if p1 == 0.0 {
        let mut d = [a[0][0], a[1][1], a[2][2]];
        d.sort_by(|x, y| y.total_cmp(x));
        return d;
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let b: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| (a[i][j] - if i == j { q } else { 0.0 }) / p));
    let r = (det(&b) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let l1 = q + 2.0 * p * phi.cos();
    let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let l2 = 3.0 * q - l1 - l3;
    [l1, l2, l3].map(|l| newton_polish(a, l))
}

fn newton_polish(a: &[[f64; 3]; 3], mut l: f64) -> f64 {
    for _ in 0..3 {
        let f = char_poly(a, l);
        let h = 1e-7 * l.abs().max(1.0);
        let df = (char_poly(a, l + h) - char_poly(a, l - h)) / (2.0 * h);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let step = f / df;
        if step.abs() > 1e-6 * l.abs().max(1.0) {
            break;
        }
        l -= step;
    }
    l
}

fn char_poly(a: &[[f64; 3]; 3], l: f64) -> f64 {
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - if i == j { l } else { 0.0 }));
    det(&m)
}

fn det(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Unit eigenvector for `lambda`: the largest cross product of two rows
/// of `A - lambda I`, refined by a few inverse-iteration steps.
pub fn eigenvector(a: &[[f64; 3]; 3], lambda: f64) -> [f64; 3] {
    let m: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] - if i == j { lambda } else { 0.0 }));
    let cross = |u: [f64; 3], v: [f64; 3]| [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let norm = |v: [f64; 3]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let candidates = [cross(m[0], m[1]), cross(m[0], m[2]), cross(m[1], m[2])];
    let best = candidates.into_iter().max_by(|x, y| norm(*x).total_cmp(&norm(*y))).unwrap();
    let n = norm(best);
    best.map(|x| x / n)
}
