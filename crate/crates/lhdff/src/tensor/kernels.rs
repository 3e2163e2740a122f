//! Raw numeric kernels behind the tape ops.
//!
//! All kernels are deterministic: rayon parallelism only splits work across
//! disjoint output regions, and every output element is accumulated in a
//! fixed sequential order regardless of thread count.

use rayon::prelude::*;

/// Below this many output elements the rayon dispatch overhead dominates.
const PAR_THRESHOLD: usize = 4096;

/// C[m,n] += A[m,k] * B[k,n], row-major.
pub fn matmul_2d_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let row = |i: usize, out_row: &mut [f64]| {
        let a_row = &a[i * k..(i + 1) * k];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_ip * b_pj;
            }
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
}

/// C[m,n] += A[k,m]ᵀ * B[k,n]; A is given in its stored [k,m] layout.
pub fn matmul_at_b_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let row = |i: usize, out_row: &mut [f64]| {
        for p in 0..k {
            let a_pi = a[p * m + i];
            if a_pi == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row.iter()) {
                *o += a_pi * b_pj;
            }
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
}

/// C[m,n] += A[m,k] * B[n,k]ᵀ; B is given in its stored [n,k] layout.
pub fn matmul_a_bt_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    let row = |i: usize, out_row: &mut [f64]| {
        let a_row = &a[i * k..(i + 1) * k];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut s = 0.0;
            for (x, y) in a_row.iter().zip(b_row.iter()) {
                s += x * y;
            }
            *o += s;
        }
    };
    if m * n >= PAR_THRESHOLD && m > 1 {
        out.par_chunks_mut(n).enumerate().for_each(|(i, r)| row(i, r));
    } else {
        for (i, r) in out.chunks_mut(n).enumerate() {
            row(i, r);
        }
    }
}

/// 3×3 cross-correlation, stride 1, zero padding 1: y[b,co,i,j] =
/// bias[co] + Σ x[b,ci,i+kh-1,j+kw-1]·w[co,ci,kh,kw].
pub fn conv2d_forward(
    x: &[f64],
    w: &[f64],
    bias: &[f64],
    bs: usize,
    cin: usize,
    cout: usize,
    h: usize,
    wd: usize,
) -> Vec<f64> {
    let plane = h * wd;
    let mut y = vec![0.0; bs * cout * plane];
    let work = |idx: usize, out_plane: &mut [f64]| {
        let b = idx / cout;
        let co = idx % cout;
        out_plane.fill(bias[co]);
        for ci in 0..cin {
            let x_plane = &x[(b * cin + ci) * plane..(b * cin + ci + 1) * plane];
            for kh in 0..3usize {
                for kw in 0..3usize {
                    let wgt = w[((co * cin + ci) * 3 + kh) * 3 + kw];
                    if wgt == 0.0 {
                        continue;
                    }
                    // shifted plane add: y[i,j] += wgt * x[i+kh-1, j+kw-1]
                    let (i0, i1) = shift_range(h, kh);
                    let (j0, j1) = shift_range(wd, kw);
                    for i in i0..i1 {
                        let xi = (i + kh) - 1;
                        let xrow = &x_plane[xi * wd..(xi + 1) * wd];
                        let orow = &mut out_plane[i * wd..(i + 1) * wd];
                        for j in j0..j1 {
                            orow[j] += wgt * xrow[(j + kw) - 1];
                        }
                    }
                }
            }
        }
    };
    if bs * cout * plane >= PAR_THRESHOLD && bs * cout > 1 {
        y.par_chunks_mut(plane).enumerate().for_each(|(idx, p)| work(idx, p));
    } else {
        for (idx, p) in y.chunks_mut(plane).enumerate() {
            work(idx, p);
        }
    }
    y
}

/// Valid output rows/cols for a kernel offset of `k - 1` (k in 0..3).
fn shift_range(extent: usize, k: usize) -> (usize, usize) {
    match k {
        0 => (1, extent),          // source index i-1 needs i >= 1
        1 => (0, extent),          // aligned
        _ => (0, extent - 1),      // source index i+1 needs i < extent-1
    }
}

/// Gradients of `conv2d_forward` w.r.t. input, kernel, and bias.
pub fn conv2d_backward(
    x: &[f64],
    w: &[f64],
    g: &[f64],
    bs: usize,
    cin: usize,
    cout: usize,
    h: usize,
    wd: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let plane = h * wd;

    // dx[b,ci,p,q] = Σ_{co,kh,kw} g[b,co,p-kh+1,q-kw+1] * w[co,ci,kh,kw]
    let mut dx = vec![0.0; bs * cin * plane];
    let dx_work = |idx: usize, dplane: &mut [f64]| {
        let b = idx / cin;
        let ci = idx % cin;
        for co in 0..cout {
            let g_plane = &g[(b * cout + co) * plane..(b * cout + co + 1) * plane];
            for kh in 0..3usize {
                for kw in 0..3usize {
                    let wgt = w[((co * cin + ci) * 3 + kh) * 3 + kw];
                    if wgt == 0.0 {
                        continue;
                    }
                    // inverse shift of the forward: dplane[p,q] += wgt * g[p+1-kh, q+1-kw]
                    let (p0, p1) = shift_range(h, 2 - kh);
                    let (q0, q1) = shift_range(wd, 2 - kw);
                    for p in p0..p1 {
                        let gi = (p + 1) - kh;
                        let grow = &g_plane[gi * wd..(gi + 1) * wd];
                        let drow = &mut dplane[p * wd..(p + 1) * wd];
                        for q in q0..q1 {
                            drow[q] += wgt * grow[(q + 1) - kw];
                        }
                    }
                }
            }
        }
    };
    if bs * cin * plane >= PAR_THRESHOLD && bs * cin > 1 {
        dx.par_chunks_mut(plane).enumerate().for_each(|(idx, p)| dx_work(idx, p));
    } else {
        for (idx, p) in dx.chunks_mut(plane).enumerate() {
            dx_work(idx, p);
        }
    }

    // dw[co,ci,kh,kw] = Σ_{b,i,j} x[b,ci,i+kh-1,j+kw-1] * g[b,co,i,j]
    let mut dw = vec![0.0; cout * cin * 9];
    let dw_work = |co: usize, dslab: &mut [f64]| {
        for ci in 0..cin {
            for kh in 0..3usize {
                for kw in 0..3usize {
                    let (i0, i1) = shift_range(h, kh);
                    let (j0, j1) = shift_range(wd, kw);
                    let mut s = 0.0;
                    for b in 0..bs {
                        let x_plane = &x[(b * cin + ci) * plane..(b * cin + ci + 1) * plane];
                        let g_plane = &g[(b * cout + co) * plane..(b * cout + co + 1) * plane];
                        for i in i0..i1 {
                            let xi = (i + kh) - 1;
                            let xrow = &x_plane[xi * wd..(xi + 1) * wd];
                            let grow = &g_plane[i * wd..(i + 1) * wd];
                            for j in j0..j1 {
                                s += xrow[(j + kw) - 1] * grow[j];
                            }
                        }
                    }
                    dslab[(ci * 3 + kh) * 3 + kw] = s;
                }
            }
        }
    };
    if bs * cout * plane >= PAR_THRESHOLD && cout > 1 {
        dw.par_chunks_mut(cin * 9).enumerate().for_each(|(co, s)| dw_work(co, s));
    } else {
        for (co, s) in dw.chunks_mut(cin * 9).enumerate() {
            dw_work(co, s);
        }
    }

    // dbias[co] = Σ_{b,i,j} g[b,co,i,j]
    let mut db = vec![0.0; cout];
    for b in 0..bs {
        for (co, dbv) in db.iter_mut().enumerate() {
            let g_plane = &g[(b * cout + co) * plane..(b * cout + co + 1) * plane];
            *dbv += g_plane.iter().sum::<f64>();
        }
    }

    (dx, dw, db)
}

/// 2×2 stride-2 mean pooling with edge replication on odd extents.
/// Returns the pooled buffer; output extents are ⌈h/2⌉ × ⌈w/2⌉.
pub fn avg_pool2x2_forward(x: &[f64], planes: usize, h: usize, w: usize) -> Vec<f64> {
    let ho = h.div_ceil(2);
    let wo = w.div_ceil(2);
    let mut y = vec![0.0; planes * ho * wo];
    for pl in 0..planes {
        let xp = &x[pl * h * w..(pl + 1) * h * w];
        let yp = &mut y[pl * ho * wo..(pl + 1) * ho * wo];
        for i in 0..ho {
            let r0 = 2 * i;
            let r1 = (2 * i + 1).min(h - 1);
            for j in 0..wo {
                let c0 = 2 * j;
                let c1 = (2 * j + 1).min(w - 1);
                yp[i * wo + j] =
                    (xp[r0 * w + c0] + xp[r0 * w + c1] + xp[r1 * w + c0] + xp[r1 * w + c1]) / 4.0;
            }
        }
    }
    y
}

/// Backward of [`avg_pool2x2_forward`]: each contributing cell gets g/4,
/// replicated cells accumulate their duplicates.
pub fn avg_pool2x2_backward(g: &[f64], planes: usize, h: usize, w: usize) -> Vec<f64> {
    let ho = h.div_ceil(2);
    let wo = w.div_ceil(2);
    let mut dx = vec![0.0; planes * h * w];
    for pl in 0..planes {
        let gp = &g[pl * ho * wo..(pl + 1) * ho * wo];
        let dp = &mut dx[pl * h * w..(pl + 1) * h * w];
        for i in 0..ho {
            let r0 = 2 * i;
            let r1 = (2 * i + 1).min(h - 1);
            for j in 0..wo {
                let c0 = 2 * j;
                let c1 = (2 * j + 1).min(w - 1);
                let q = gp[i * wo + j] / 4.0;
                dp[r0 * w + c0] += q;
                dp[r0 * w + c1] += q;
                dp[r1 * w + c0] += q;
                dp[r1 * w + c1] += q;
            }
        }
    }
    dx
}
