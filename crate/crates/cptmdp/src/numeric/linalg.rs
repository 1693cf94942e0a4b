use super::NumericError;

/// Square system `matrix · x = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

/// Pivots below this magnitude mark the matrix as singular.
pub const SINGULAR_PIVOT: f64 = 1e-12;

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(sys: &LinearSystem) -> Result<Vec<f64>, NumericError> {
    let n = sys.rhs.len();
    if sys.matrix.len() != n || sys.matrix.iter().any(|r| r.len() != n) {
        return Err(NumericError::Dimension(format!(
            "expected {n}x{n} matrix for {n} right-hand sides"
        )));
    }
    let w = n + 1;
    let mut a = vec![0.0; n * w];
    for (i, row) in sys.matrix.iter().enumerate() {
        a[i * w..i * w + n].copy_from_slice(row);
        a[i * w + n] = sys.rhs[i];
    }
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * w + col].abs();
        for r in col + 1..n {
            let v = a[r * w + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if best < SINGULAR_PIVOT {
            return Err(NumericError::SingularMatrix);
        }
        if piv != col {
            for c in 0..w {
                a.swap(piv * w + c, col * w + c);
            }
        }
        let p = a[col * w + col];
        for r in col + 1..n {
            let f = a[r * w + col] / p;
            if f != 0.0 {
                for c in col..w {
                    a[r * w + c] -= f * a[col * w + c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = a[i * w + n];
        for j in i + 1..n {
            s -= a[i * w + j] * x[j];
        }
        x[i] = s / a[i * w + i];
    }
    Ok(x)
}
