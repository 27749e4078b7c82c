//! Integer-order Bessel functions of the first kind.

/// `J_0(x) ..= J_{n_max}(x)` for `x >= 0` by Miller's backward recurrence,
/// normalized with `J_0 + 2 sum_k J_{2k} = 1`.
pub fn bessel_j_orders(n_max: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j_orders needs finite x >= 0");
    let mut out = vec![0.0; n_max + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let top = n_max.max(x.ceil() as usize);
    // Start well above both the requested order and the turning point.
    let mut start = top + 16 + (40.0 * top as f64).sqrt() as usize;
    start += start % 2;

    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        // cur now holds J_{k-1}
        let order = k - 1;
        if order <= n_max {
            out[order] = cur;
        }
        if order % 2 == 0 && order > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            for v in out.iter_mut() {
                *v *= s;
            }
        }
    }
    norm += cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

/// `J_n(x)` for any integer order, `x >= 0`.
pub fn bessel_j(n: i64, x: f64) -> f64 {
    let order = n.unsigned_abs() as usize;
    let j = bessel_j_orders(order, x)[order];
    if n < 0 && order % 2 == 1 {
        -j
    } else {
        j
    }
}
