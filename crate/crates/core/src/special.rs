//! Bessel functions of integer order: `J_m` by Miller's backward recurrence,
//! `I_m` by power series, and zeros of `J_m` by bracketing + bisection.

/// Modified Bessel function `I_m(x)` from its power series.
pub fn bessel_i(m: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=m {
        term *= half / k as f64;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 1.0f64;
    loop {
        term *= q / (k * (k + m as f64));
        sum += term;
        if term.abs() <= 1e-16 * sum.abs() {
            break;
        }
        k += 1.0;
        if k > 10_000.0 {
            break;
        }
    }
    sum
}

fn miller_start(max_order: usize, x: f64) -> usize {
    let n = max_order.max(x.ceil() as usize) + 20 + (40.0 * x.max(1.0)).sqrt() as usize;
    n + (n % 2)
}

/// `J_0(x), ..., J_{max_order}(x)` for `x >= 0`.
pub fn bessel_j_all(max_order: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; max_order + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let x = x.abs();
    let start = miller_start(max_order, x);
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    let inv = 2.0 / x;
    for k in (1..=start).rev() {
        let prev = k as f64 * inv * cur - next; // J_{k-1}
        next = cur;
        cur = prev;
        if k - 1 <= max_order {
            out[k - 1] = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
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
    norm += cur; // J_0
    for v in out.iter_mut() {
        *v /= norm;
    }
    out
}

pub fn bessel_j(m: usize, x: f64) -> f64 {
    if x < 0.0 {
        let v = bessel_j(m, -x);
        return if m.is_multiple_of(2) { v } else { -v };
    }
    bessel_j_all(m, x)[m]
}

fn bisect_zero(m: usize, mut lo: f64, mut hi: f64) -> f64 {
    let mut f_lo = bessel_j(m, lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo < 1e-15 * hi {
            break;
        }
        let f_mid = bessel_j(m, mid);
        if (f_mid < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// First `count` positive zeros `j_{m,1} < j_{m,2} < ...` for every order
/// `m = 0..=max_order`. Row `m` of the result holds the zeros of `J_m`.
pub fn bessel_j_zero_table(max_order: usize, count: usize) -> Vec<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = vec![Vec::with_capacity(count); max_order + 1];
    if count == 0 {
        return table;
    }
    let step = 0.05;
    let mut x = step;
    let mut prev = bessel_j_all(max_order, x);
    while table.iter().any(|row| row.len() < count) {
        let x_next = x + step;
        let cur = bessel_j_all(max_order, x_next);
        for m in 0..=max_order {
            if table[m].len() < count && prev[m] * cur[m] < 0.0 {
                table[m].push(bisect_zero(m, x, x_next));
            }
        }
        prev = cur;
        x = x_next;
    }
    table
}

pub fn bessel_j_zeros(m: usize, count: usize) -> Vec<f64> {
    bessel_j_zero_table(m, count).swap_remove(m)
}
