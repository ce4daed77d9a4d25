//! Row-major matrix product on top of `matrixmultiply`.

/// `c = op(a) · op(b) + beta · c` with `op(a)` of shape `m × k` and `op(b)` of
/// shape `k × n`. A transposed operand is stored in its untransposed layout
/// (`k × m` for `a`, `n × k` for `b`).
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    trans_a: bool,
    b: &[f64],
    trans_b: bool,
    c: &mut [f64],
    beta: f64,
) {
    assert!(a.len() >= m * k, "gemm: lhs has {} values, need {}", a.len(), m * k);
    assert!(b.len() >= k * n, "gemm: rhs has {} values, need {}", b.len(), k * n);
    assert!(c.len() >= m * n, "gemm: output has {} values, need {}", c.len(), m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the asserts above bound every index the strides can reach.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
