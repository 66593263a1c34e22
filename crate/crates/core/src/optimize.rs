//! Small dense solvers used by the flow inversion and the condition checks.

/// Solves the 3×3 system `a · x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot is exactly zero or the result is not finite.
pub fn solve3(a: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = m[row][3];
        for k in row + 1..3 {
            s -= m[row][k] * x[k];
        }
        x[row] = s / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Infinity-norm condition number estimate `‖A‖∞ ‖A⁻¹‖∞` of a 3×3 matrix.
pub fn condition3(a: [[f64; 3]; 3]) -> f64 {
    let norm = |m: &[[f64; 3]; 3]| {
        m.iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut inv = [[0.0; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0; 3];
        e[col] = 1.0;
        match solve3(a, e) {
            Some(x) => {
                for row in 0..3 {
                    inv[row][col] = x[row];
                }
            }
            None => return f64::INFINITY,
        }
    }
    norm(&a) * norm(&inv)
}

/// Nelder–Mead minimization of a function of three variables.
///
/// `scale` sets the initial simplex edge. Stops when the spread of simplex
/// values falls below `ftol` (absolute) or after `max_iter` iterations.
pub fn nelder_mead3(
    mut f: impl FnMut([f64; 3]) -> f64,
    start: [f64; 3],
    scale: f64,
    ftol: f64,
    max_iter: usize,
) -> ([f64; 3], f64) {
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(start)));
    for i in 0..3 {
        let mut p = start;
        p[i] += scale;
        simplex.push((p, f(p)));
    }
    let combine = |a: [f64; 3], b: [f64; 3], t: f64| {
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
        ]
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[3].1 - simplex[0].1).abs() <= ftol {
            break;
        }
        let mut centroid = [0.0; 3];
        for (p, _) in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += p[k] / 3.0;
            }
        }
        let worst = simplex[3];
        let reflected = combine(centroid, worst.0, -1.0);
        let fr = f(reflected);
        if fr < simplex[0].1 {
            let expanded = combine(centroid, worst.0, -2.0);
            let fe = f(expanded);
            simplex[3] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[2].1 {
            simplex[3] = (reflected, fr);
        } else {
            let contracted = if fr < worst.1 {
                combine(centroid, reflected, 0.5)
            } else {
                combine(centroid, worst.0, 0.5)
            };
            let fc = f(contracted);
            if fc < worst.1.min(fr) {
                simplex[3] = (contracted, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let p = combine(best, entry.0, 0.5);
                    *entry = (p, f(p));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Bisection for a sign change of `f` on `[a, b]`.
///
/// Returns `None` if `f(a)` and `f(b)` have the same strict sign.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if (b - a).abs() <= xtol || m == a || m == b {
            return Some(m);
        }
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Newton's method safeguarded by bisection for an increasing or decreasing
/// `f` with a sign change on `[a, b]`; `fd` returns `(f(x), f'(x))`.
pub fn newton_bracketed(mut fd: impl FnMut(f64) -> (f64, f64), mut a: f64, mut b: f64, xtol: f64) -> Option<f64> {
    let (fa, _) = fd(a);
    let (fb, _) = fd(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if !(fa.is_finite() && fb.is_finite()) || fa.signum() == fb.signum() {
        return None;
    }
    // keep f(a) < 0 < f(b)
    if fa > 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let (fx, dfx) = fd(x);
        if fx == 0.0 {
            return Some(x);
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let inside = newton.is_finite() && (newton - a) * (newton - b) < 0.0;
        let next = if inside { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= xtol * x.abs().max(1.0) || (a - b).abs() <= xtol * x.abs().max(1.0) {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

const GL10: [(f64, f64); 5] = [
    (0.148_874_338_981_631_21, 0.295_524_224_714_752_87),
    (0.433_395_394_129_247_19, 0.269_266_719_309_996_36),
    (0.679_409_568_299_024_41, 0.219_086_362_515_982_04),
    (0.865_063_366_688_984_51, 0.149_451_349_150_580_59),
    (0.973_906_528_517_171_72, 0.066_671_344_308_688_14),
];

/// Composite 10-point Gauss–Legendre rule with `panels` equal panels.
pub fn gauss_legendre(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut s = 0.0;
        for (x, w) in GL10 {
            s += w * (f(mid - half * x) + f(mid + half * x));
        }
        total += s * half;
    }
    total
}
