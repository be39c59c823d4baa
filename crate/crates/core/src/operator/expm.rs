use crate::error::Result;
use crate::linalg::{ensure_finite, ensure_square, norm1, Matrix};

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
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

/// Matrix exponential by scaling and squaring with diagonal Padé approximants
/// of degree 3, 5, 7, 9 or 13, chosen from the one-norm of `a`.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let nrm = norm1(a);

    let low: [(&[f64], f64); 4] = [(&B3, THETA[0]), (&B5, THETA[1]), (&B7, THETA[2]), (&B9, THETA[3])];
    for (b, theta) in low {
        if nrm <= theta {
            return Ok(pade_low(a, b, &ident));
        }
    }

    let s = if nrm > THETA[4] {
        (nrm / THETA[4]).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut r = pade13(&scaled, &ident);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Matrix, b: &[f64], ident: &Matrix) -> Matrix {
    let a2 = a * a;
    let m = b.len() - 1;
    // U = A Σ b_{2k+1} A^{2k}, V = Σ b_{2k} A^{2k}
    let mut u = ident * b[1];
    let mut v = ident * b[0];
    let mut pow = ident.clone();
    let mut k = 1;
    while 2 * k <= m {
        pow = &pow * &a2;
        v += &pow * b[2 * k];
        if 2 * k < m {
            u += &pow * b[2 * k + 1];
        }
        k += 1;
    }
    let u = a * u;
    solve_pade(&u, &v)
}

fn pade13(a: &Matrix, ident: &Matrix) -> Matrix {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + ident * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + ident * b[0];
    solve_pade(&u, &v)
}

fn solve_pade(u: &Matrix, v: &Matrix) -> Matrix {
    let p = v + u;
    let q = v - u;
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular for the scaled argument")
}
