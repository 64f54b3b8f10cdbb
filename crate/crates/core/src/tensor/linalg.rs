//! Matrix products. The inner kernel is `matrixmultiply::dgemm`.

use super::graph::{BackwardCtx, BackwardOp, Graph, Var};
use super::{shape_str, Tensor};
use crate::error::{Error, Result};

/// `c = a·b + beta·c` for row-major operands.
///
/// `a` is `m×k` (or `k×m` stored row-major when `a_t`), `b` is `k×n` (or
/// `n×k` when `b_t`), `c` is `m×n`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_t: bool,
    b: &[f64],
    b_t: bool,
    beta: f64,
    c: &mut [f64],
) {
    assert_eq!(a.len(), m * k, "gemm lhs length");
    assert_eq!(b.len(), k * n, "gemm rhs length");
    assert_eq!(c.len(), m * n, "gemm output length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: lengths are checked above and the strides address exactly the
    // row-major layouts described in the doc comment.
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

struct MatMul;

impl BackwardOp for MatMul {
    fn name(&self) -> &'static str {
        "matmul"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let (a, b) = (ctx.input(0), ctx.input(1));
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let da = ctx.needs_grad(0).then(|| {
            let mut d = Tensor::zeros(&[m, k]);
            gemm(m, n, k, g.data(), false, b.data(), true, 0.0, d.data_mut());
            d
        });
        let db = ctx.needs_grad(1).then(|| {
            let mut d = Tensor::zeros(&[k, n]);
            gemm(k, m, n, a.data(), true, g.data(), false, 0.0, d.data_mut());
            d
        });
        vec![da, db]
    }
}

struct BatchMatMul {
    transpose_b: bool,
}

impl BackwardOp for BatchMatMul {
    fn name(&self) -> &'static str {
        "bmm"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let (a, b) = (ctx.input(0), ctx.input(1));
        let (batch, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
        let n = g.shape()[2];
        let (sa, sb, sg) = (m * k, k * n, m * n);
        let da = ctx.needs_grad(0).then(|| {
            let mut d = Tensor::zeros(a.shape());
            for i in 0..batch {
                // dA = G·Bᵀ, with B stored n×k when transposed
                gemm(
                    m,
                    n,
                    k,
                    &g.data()[i * sg..(i + 1) * sg],
                    false,
                    &b.data()[i * sb..(i + 1) * sb],
                    !self.transpose_b,
                    0.0,
                    &mut d.data_mut()[i * sa..(i + 1) * sa],
                );
            }
            d
        });
        let db = ctx.needs_grad(1).then(|| {
            let mut d = Tensor::zeros(b.shape());
            for i in 0..batch {
                let ga = &g.data()[i * sg..(i + 1) * sg];
                let aa = &a.data()[i * sa..(i + 1) * sa];
                let out = &mut d.data_mut()[i * sb..(i + 1) * sb];
                if self.transpose_b {
                    // B is n×k: dB = Gᵀ·A
                    gemm(n, m, k, ga, true, aa, false, 0.0, out);
                } else {
                    gemm(k, m, n, aa, true, ga, false, 0.0, out);
                }
            }
            d
        });
        vec![da, db]
    }
}

struct Linear;

impl BackwardOp for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }

    fn backward(&self, ctx: &BackwardCtx<'_>, g: &Tensor) -> Vec<Option<Tensor>> {
        let (x, w) = (ctx.input(0), ctx.input(1));
        let (rows, fin) = (x.shape()[0], x.shape()[1]);
        let fout = w.shape()[0];
        let dx = ctx.needs_grad(0).then(|| {
            let mut d = Tensor::zeros(&[rows, fin]);
            gemm(rows, fout, fin, g.data(), false, w.data(), false, 0.0, d.data_mut());
            d
        });
        let dw = ctx.needs_grad(1).then(|| {
            let mut d = Tensor::zeros(&[fout, fin]);
            gemm(fout, rows, fin, g.data(), true, x.data(), false, 0.0, d.data_mut());
            d
        });
        let db = (ctx.num_inputs() > 2 && ctx.needs_grad(2)).then(|| {
            let mut d = vec![0.0; fout];
            for row in g.data().chunks(fout) {
                for (acc, v) in d.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            Tensor::new(vec![fout], d).unwrap()
        });
        let mut out = vec![dx, dw];
        if ctx.num_inputs() > 2 {
            out.push(db);
        }
        out
    }
}

impl Graph {
    /// `[m,k] × [k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::dim(format!(
                "matmul {} × {}",
                shape_str(sa),
                shape_str(sb)
            )));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = Tensor::zeros(&[m, n]);
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            0.0,
            out.data_mut(),
        );
        Ok(self.record(&[a, b], out, MatMul))
    }

    /// Batched product `[N,m,k] × [N,k,n]`, or `[N,m,k] × [N,n,k]ᵀ` when
    /// `transpose_b`.
    pub fn bmm(&mut self, a: Var, b: Var, transpose_b: bool) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let bad = || {
            Error::dim(format!(
                "bmm {} × {}{}",
                shape_str(sa),
                shape_str(sb),
                if transpose_b { "ᵀ" } else { "" }
            ))
        };
        if sa.len() != 3 || sb.len() != 3 || sa[0] != sb[0] {
            return Err(bad());
        }
        let (batch, m, k) = (sa[0], sa[1], sa[2]);
        let (kb, n) = if transpose_b { (sb[2], sb[1]) } else { (sb[1], sb[2]) };
        if kb != k {
            return Err(bad());
        }
        let mut out = Tensor::zeros(&[batch, m, n]);
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for i in 0..batch {
            gemm(
                m,
                k,
                n,
                &av[i * m * k..(i + 1) * m * k],
                false,
                &bv[i * k * n..(i + 1) * k * n],
                transpose_b,
                0.0,
                &mut out.data_mut()[i * m * n..(i + 1) * m * n],
            );
        }
        Ok(self.record(&[a, b], out, BatchMatMul { transpose_b }))
    }

    /// Affine map `x·wᵀ + b` with `x: [rows,in]`, `w: [out,in]`, `b: [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 2 || sw.len() != 2 || sx[1] != sw[1] {
            return Err(Error::dim(format!(
                "linear input {} with weight {}",
                shape_str(sx),
                shape_str(sw)
            )));
        }
        let (rows, fin, fout) = (sx[0], sx[1], sw[0]);
        if let Some(b) = b {
            if self.shape(b) != [fout] {
                return Err(Error::dim(format!(
                    "linear bias {} for {fout} outputs",
                    shape_str(self.shape(b))
                )));
            }
        }
        let mut out = Tensor::zeros(&[rows, fout]);
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in out.data_mut().chunks_mut(fout) {
                row.copy_from_slice(bias);
            }
        }
        gemm(
            rows,
            fin,
            fout,
            self.value(x).data(),
            false,
            self.value(w).data(),
            true,
            1.0,
            out.data_mut(),
        );
        let inputs: Vec<Var> = match b {
            Some(b) => vec![x, w, b],
            None => vec![x, w],
        };
        Ok(self.record(&inputs, out, Linear))
    }
}
