//! Safe wrapper around `matrixmultiply::dgemm` with arbitrary (non-negative)
//! strides.

pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

pub(crate) struct MatMut<'a> {
    pub data: &'a mut [f64],
    pub offset: usize,
    pub rs: usize,
    pub cs: usize,
}

fn span(rows: usize, cols: usize, offset: usize, rs: usize, cs: usize) -> usize {
    offset + (rows - 1) * rs + (cols - 1) * cs
}

/// `c = alpha * a(m x k) * b(k x n) + beta * c`.
pub(crate) fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: Mat, b: Mat, beta: f64, c: MatMut) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(span(m, n, c.offset, c.rs, c.cs) < c.data.len());
    if k == 0 {
        // dgemm handles k == 0 as c = beta * c
        for i in 0..m {
            for j in 0..n {
                let v = &mut c.data[c.offset + i * c.rs + j * c.cs];
                *v = if beta == 0.0 { 0.0 } else { beta * *v };
            }
        }
        return;
    }
    assert!(span(m, k, a.offset, a.rs, a.cs) < a.data.len());
    assert!(span(k, n, b.offset, b.rs, b.cs) < b.data.len());
    // SAFETY: the asserts above bound every element dgemm can touch within
    // the borrowed slices; strides are non-negative and fit isize on any
    // realistic allocation.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr().add(a.offset),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr().add(b.offset),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.data.as_mut_ptr().add(c.offset),
            c.rs as isize,
            c.cs as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product_with_strides() {
        let a: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3 row-major
        let b: [f64; 6] = [1.0, 0.5, -1.0, 2.0, 0.0, 3.0]; // stored as 2x3, used transposed
        let mut c = [10.0; 4];
        gemm(
            2,
            3,
            2,
            1.0,
            Mat { data: &a, offset: 0, rs: 3, cs: 1 },
            Mat { data: &b, offset: 0, rs: 1, cs: 3 },
            1.0,
            MatMut { data: &mut c, offset: 0, rs: 2, cs: 1 },
        );
        // a * b^T
        assert_eq!(c, [10.0 + 1.0 + 1.0 - 3.0, 10.0 + 2.0 + 0.0 + 9.0, 10.0 + 4.0 + 2.5 - 6.0, 10.0 + 8.0 + 0.0 + 18.0]);
    }
}
