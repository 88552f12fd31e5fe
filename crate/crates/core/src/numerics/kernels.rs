//! Inner loops shared by the tape operations. Accumulating semantics
//! throughout (`out +=`), so backward passes can reuse them directly.
//!
//! Row-parallel variants split work over disjoint output rows; every output
//! element is still reduced sequentially by one thread, so the results are
//! bit-identical to the serial path.

use rayon::prelude::*;

use super::{parallelism, Scalar};

const PAR_MIN_ROWS: usize = 16;

/// out[m,n] += a[m,k] · b[k,n]
pub fn mm_nn<E: Scalar>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let row = |a_row: &[E], out_row: &mut [E]| {
        for (l, &a_il) in a_row.iter().enumerate() {
            let b_row = &b[l * n..(l + 1) * n];
            for (o, &bv) in out_row.iter_mut().zip(b_row) {
                *o += a_il * bv;
            }
        }
    };
    if parallelism() && m >= PAR_MIN_ROWS {
        out.par_chunks_mut(n)
            .zip(a.par_chunks(k))
            .for_each(|(out_row, a_row)| row(a_row, out_row));
    } else {
        for (out_row, a_row) in out.chunks_mut(n).zip(a.chunks(k)) {
            row(a_row, out_row);
        }
    }
}

/// out[k,n] += aᵀ · b  for a[m,k], b[m,n]
pub fn mm_tn<E: Scalar>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    if parallelism() && k >= PAR_MIN_ROWS {
        out.par_chunks_mut(n).enumerate().for_each(|(c, out_row)| {
            for r in 0..m {
                let a_rc = a[r * k + c];
                let b_row = &b[r * n..(r + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += a_rc * bv;
                }
            }
        });
    } else {
        for r in 0..m {
            let a_row = &a[r * k..(r + 1) * k];
            let b_row = &b[r * n..(r + 1) * n];
            for (c, &a_rc) in a_row.iter().enumerate() {
                let out_row = &mut out[c * n..(c + 1) * n];
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += a_rc * bv;
                }
            }
        }
    }
}

/// out[m,k] += a · bᵀ  for a[m,n], b[k,n]
pub fn mm_nt<E: Scalar>(a: &[E], b: &[E], out: &mut [E], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * n);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * k);
    let row = |a_row: &[E], out_row: &mut [E]| {
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * n..(j + 1) * n];
            let mut acc = E::zero();
            for (&av, &bv) in a_row.iter().zip(b_row) {
                acc += av * bv;
            }
            *o += acc;
        }
    };
    if parallelism() && m >= PAR_MIN_ROWS {
        out.par_chunks_mut(k)
            .zip(a.par_chunks(n))
            .for_each(|(out_row, a_row)| row(a_row, out_row));
    } else {
        for (out_row, a_row) in out.chunks_mut(k).zip(a.chunks(n)) {
            row(a_row, out_row);
        }
    }
}

/// Temporal convolution forward, zero-padded to keep T frames.
/// x[b,t,v,cin], kernel[kt,cin,cout] (tap-major, output-channel contiguous),
/// out[b,t,v,cout].
pub fn temporal_conv<E: Scalar>(
    x: &[E],
    kernel: &[E],
    out: &mut [E],
    b: usize,
    t: usize,
    v: usize,
    cin: usize,
    cout: usize,
    kt: usize,
) {
    let pad = kt / 2;
    let frame_in = v * cin;
    let frame_out = v * cout;
    let body = |bi: usize, out_b: &mut [E]| {
        let x_b = &x[bi * t * frame_in..(bi + 1) * t * frame_in];
        for ti in 0..t {
            let out_frame = &mut out_b[ti * frame_out..(ti + 1) * frame_out];
            for dt in 0..kt {
                let src = ti + dt;
                if src < pad || src - pad >= t {
                    continue;
                }
                let x_frame = &x_b[(src - pad) * frame_in..(src - pad + 1) * frame_in];
                let k_tap = &kernel[dt * cin * cout..(dt + 1) * cin * cout];
                for vi in 0..v {
                    let x_row = &x_frame[vi * cin..(vi + 1) * cin];
                    let out_row = &mut out_frame[vi * cout..(vi + 1) * cout];
                    for (c, &xv) in x_row.iter().enumerate() {
                        let k_row = &k_tap[c * cout..(c + 1) * cout];
                        for (o, &kv) in out_row.iter_mut().zip(k_row) {
                            *o += xv * kv;
                        }
                    }
                }
            }
        }
    };
    if parallelism() && b > 1 {
        out.par_chunks_mut(t * frame_out)
            .enumerate()
            .for_each(|(bi, out_b)| body(bi, out_b));
    } else {
        for (bi, out_b) in out.chunks_mut(t * frame_out).enumerate() {
            body(bi, out_b);
        }
    }
}

/// Gradient of `temporal_conv` w.r.t. its input.
pub fn temporal_conv_grad_input<E: Scalar>(
    grad_out: &[E],
    kernel: &[E],
    grad_x: &mut [E],
    b: usize,
    t: usize,
    v: usize,
    cin: usize,
    cout: usize,
    kt: usize,
) {
    let pad = kt / 2;
    let frame_in = v * cin;
    let frame_out = v * cout;
    let body = |bi: usize, gx_b: &mut [E]| {
        let go_b = &grad_out[bi * t * frame_out..(bi + 1) * t * frame_out];
        for si in 0..t {
            let gx_frame = &mut gx_b[si * frame_in..(si + 1) * frame_in];
            for dt in 0..kt {
                // source frame si feeds output frame ti where si = ti + dt - pad
                let ti = si + pad;
                if ti < dt || ti - dt >= t {
                    continue;
                }
                let ti = ti - dt;
                let go_frame = &go_b[ti * frame_out..(ti + 1) * frame_out];
                let k_tap = &kernel[dt * cin * cout..(dt + 1) * cin * cout];
                for vi in 0..v {
                    let go_row = &go_frame[vi * cout..(vi + 1) * cout];
                    let gx_row = &mut gx_frame[vi * cin..(vi + 1) * cin];
                    for (c, g) in gx_row.iter_mut().enumerate() {
                        let k_row = &k_tap[c * cout..(c + 1) * cout];
                        let mut acc = E::zero();
                        for (&gov, &kv) in go_row.iter().zip(k_row) {
                            acc += gov * kv;
                        }
                        *g += acc;
                    }
                }
            }
        }
    };
    if parallelism() && b > 1 {
        grad_x
            .par_chunks_mut(t * frame_in)
            .enumerate()
            .for_each(|(bi, gx_b)| body(bi, gx_b));
    } else {
        for (bi, gx_b) in grad_x.chunks_mut(t * frame_in).enumerate() {
            body(bi, gx_b);
        }
    }
}

/// Gradient of `temporal_conv` w.r.t. the kernel. Serial: accumulates over
/// the whole batch in a fixed order.
pub fn temporal_conv_grad_kernel<E: Scalar>(
    x: &[E],
    grad_out: &[E],
    grad_kernel: &mut [E],
    b: usize,
    t: usize,
    v: usize,
    cin: usize,
    cout: usize,
    kt: usize,
) {
    let pad = kt / 2;
    let frame_in = v * cin;
    let frame_out = v * cout;
    for bi in 0..b {
        let x_b = &x[bi * t * frame_in..(bi + 1) * t * frame_in];
        let go_b = &grad_out[bi * t * frame_out..(bi + 1) * t * frame_out];
        for ti in 0..t {
            let go_frame = &go_b[ti * frame_out..(ti + 1) * frame_out];
            for dt in 0..kt {
                let src = ti + dt;
                if src < pad || src - pad >= t {
                    continue;
                }
                let x_frame = &x_b[(src - pad) * frame_in..(src - pad + 1) * frame_in];
                let gk_tap = &mut grad_kernel[dt * cin * cout..(dt + 1) * cin * cout];
                for vi in 0..v {
                    let x_row = &x_frame[vi * cin..(vi + 1) * cin];
                    let go_row = &go_frame[vi * cout..(vi + 1) * cout];
                    for (c, &xv) in x_row.iter().enumerate() {
                        let gk_row = &mut gk_tap[c * cout..(c + 1) * cout];
                        for (g, &gov) in gk_row.iter_mut().zip(go_row) {
                            *g += xv * gov;
                        }
                    }
                }
            }
        }
    }
}
