//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! (Higham 2005). The degree is picked from the 1-norm, then the scaled
//! approximant is squared back up.

use ndarray::{Array2, Axis};
use num_complex::Complex64 as C64;

use super::OperatorMatrix;
use crate::error::{Error, Result};

// θ_m: largest 1-norm for which the degree-m approximant is accurate to
// double precision.
const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const B9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// `exp(M)` on the same space as `M`.
pub fn matrix_exp(m: &OperatorMatrix) -> Result<OperatorMatrix> {
    let data = expm_array(m.as_array())?;
    Ok(OperatorMatrix::from_parts(m.space().to_vec(), data))
}

fn expm_array(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::ExpmFailure(format!(
            "matrix must be square, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::ExpmFailure("non-finite entries".into()));
    }
    if a.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok(Array2::eye(n));
    }

    let norm = one_norm(a);
    for &(degree, theta) in &THETA[..4] {
        if norm <= theta {
            let result = match degree {
                3 => pade_low(a, &B3),
                5 => pade_low(a, &B5),
                7 => pade_low(a, &B7),
                _ => pade_low(a, &B9),
            }?;
            return check_finite(result);
        }
    }

    let theta13 = THETA[4].1;
    let squarings = if norm > theta13 {
        (norm / theta13).log2().ceil() as i32
    } else {
        0
    };
    if squarings > 1000 {
        return Err(Error::ExpmFailure(format!("norm {norm:e} too large")));
    }
    let scaled = a * C64::new(2f64.powi(-squarings), 0.0);
    let mut result = pade13(&scaled)?;
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    check_finite(result)
}

fn check_finite(m: Array2<C64>) -> Result<Array2<C64>> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        Err(Error::ExpmFailure("result overflowed".into()))
    } else {
        Ok(m)
    }
}

fn one_norm(a: &Array2<C64>) -> f64 {
    a.axis_iter(Axis(1))
        .map(|col| col.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn scaled_sum(terms: &[(&Array2<C64>, f64)], n: usize) -> Array2<C64> {
    let mut out = Array2::<C64>::zeros((n, n));
    for (m, c) in terms {
        out.scaled_add(C64::new(*c, 0.0), m);
    }
    out
}

/// Degree 3..9 approximants: U = A Σ b_{2j+1} A^{2j}, V = Σ b_{2j} A^{2j}.
fn pade_low(a: &Array2<C64>, b: &[f64]) -> Result<Array2<C64>> {
    let n = a.nrows();
    let eye = Array2::<C64>::eye(n);
    let mut powers = vec![eye];
    let a2 = a.dot(a);
    for _ in 1..b.len() / 2 {
        let next = powers.last().unwrap().dot(&a2);
        powers.push(next);
    }
    let odd: Vec<(&Array2<C64>, f64)> = powers
        .iter()
        .enumerate()
        .map(|(j, p)| (p, b[2 * j + 1]))
        .collect();
    let even: Vec<(&Array2<C64>, f64)> = powers
        .iter()
        .enumerate()
        .map(|(j, p)| (p, b[2 * j]))
        .collect();
    let u = a.dot(&scaled_sum(&odd, n));
    let v = scaled_sum(&even, n);
    solve(&v - &u, &v + &u)
}

fn pade13(a: &Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    let b = &B13;
    let eye = Array2::<C64>::eye(n);
    let a2 = a.dot(a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let inner_u = scaled_sum(&[(&a6, b[13]), (&a4, b[11]), (&a2, b[9])], n);
    let u = a.dot(
        &(inner_u.dot(&a6)
            + scaled_sum(
                &[(&a6, b[7]), (&a4, b[5]), (&a2, b[3]), (&eye, b[1])],
                n,
            )),
    );
    let inner_v = scaled_sum(&[(&a6, b[12]), (&a4, b[10]), (&a2, b[8])], n);
    let v = inner_v.dot(&a6)
        + scaled_sum(&[(&a6, b[6]), (&a4, b[4]), (&a2, b[2]), (&eye, b[0])], n);
    solve(&v - &u, &v + &u)
}

/// Solves `lhs · X = rhs` by LU with partial pivoting.
fn solve(lhs: Array2<C64>, rhs: Array2<C64>) -> Result<Array2<C64>> {
    let n = lhs.nrows();
    let m = rhs.ncols();
    // row-major buffers so every update below is a contiguous row operation
    let mut a = lhs.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let mut b = rhs.as_standard_layout().into_owned().into_raw_vec_and_offset().0;
    let zero = C64::new(0.0, 0.0);
    for col in 0..n {
        let (pivot_row, pivot_mag) = (col..n)
            .map(|r| (r, a[r * n + col].norm()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot_mag.is_finite() && pivot_mag > 0.0) {
            return Err(Error::ExpmFailure(format!(
                "singular Padé denominator at column {col}"
            )));
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            for j in 0..m {
                b.swap(col * m + j, pivot_row * m + j);
            }
        }
        let pivot = a[col * n + col];
        let (upper_a, lower_a) = a.split_at_mut((col + 1) * n);
        let pivot_row_a = &upper_a[col * n..];
        let (upper_b, lower_b) = b.split_at_mut((col + 1) * m);
        let pivot_row_b = &upper_b[col * m..];
        for (row_a, row_b) in lower_a.chunks_exact_mut(n).zip(lower_b.chunks_exact_mut(m)) {
            let factor = row_a[col] / pivot;
            if factor == zero {
                continue;
            }
            row_a[col] = zero;
            for (x, &p) in row_a[col + 1..].iter_mut().zip(&pivot_row_a[col + 1..]) {
                *x -= factor * p;
            }
            for (x, &p) in row_b.iter_mut().zip(pivot_row_b) {
                *x -= factor * p;
            }
        }
    }
    for col in (0..n).rev() {
        let (head, tail) = b.split_at_mut((col + 1) * m);
        let row = &mut head[col * m..];
        for (k, solved) in tail.chunks_exact(m).enumerate() {
            let coef = a[col * n + col + 1 + k];
            if coef == zero {
                continue;
            }
            for (x, &s) in row.iter_mut().zip(solved) {
                *x -= coef * s;
            }
        }
        let inv = C64::new(1.0, 0.0) / a[col * n + col];
        for x in row.iter_mut() {
            *x *= inv;
        }
    }
    Ok(Array2::from_shape_vec((n, m), b).expect("shape preserved"))
}
