//! Strided `f64` matrix product backed by `matrixmultiply`.

/// Row/column strides of a matrix view.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Layout {
    pub rs: isize,
    pub cs: isize,
}

impl Layout {
    /// Row-major `rows x cols`.
    pub fn rows(cols: usize) -> Self {
        Layout { rs: cols as isize, cs: 1 }
    }

    /// Transpose view of a row-major matrix with `cols` columns.
    pub fn trans(cols: usize) -> Self {
        Layout { rs: 1, cs: cols as isize }
    }
}

fn extent(rows: usize, cols: usize, l: Layout) -> usize {
    if rows == 0 || cols == 0 {
        return 0;
    }
    (rows - 1) * l.rs as usize + (cols - 1) * l.cs as usize + 1
}

/// `C = A B + beta C` with `A: m x k`, `B: k x n`, `C: m x n` row-major.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], la: Layout, b: &[f64], lb: Layout, beta: f64, c: &mut [f64]) {
    assert!(a.len() >= extent(m, k, la), "lhs too short");
    assert!(b.len() >= extent(k, n, lb), "rhs too short");
    assert!(c.len() >= m * n, "output too short");
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the asserts above keep every strided access in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            la.rs,
            la.cs,
            b.as_ptr(),
            lb.rs,
            lb.cs,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_products() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut c = [0.0; 4];
        gemm(2, 3, 2, &a, Layout::rows(3), &b, Layout::rows(2), 0.0, &mut c);
        assert_eq!(c, [4.0, 5.0, 10.0, 11.0]);
        // A^T A with A 2x3 -> 3x3
        let mut d = [0.0; 9];
        gemm(3, 2, 3, &a, Layout::trans(3), &a, Layout::rows(3), 0.0, &mut d);
        assert_eq!(d, [17.0, 22.0, 27.0, 22.0, 29.0, 36.0, 27.0, 36.0, 45.0]);
        gemm(3, 2, 3, &a, Layout::trans(3), &a, Layout::rows(3), 1.0, &mut d);
        assert_eq!(d[0], 34.0);
    }
}
