//! Restarted GMRES with right preconditioning.

use crate::C64;

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solve A x = b starting from the given x. `precond` applies P⁻¹ in place.
pub(crate) fn gmres<A, P>(apply: A, precond: P, b: &[C64], x: &mut [C64], restart: usize, max_iter: usize, tol: f64) -> GmresOutcome
where
    A: Fn(&[C64], &mut [C64]),
    P: Fn(&mut [C64]),
{
    let n = b.len();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let zero = C64::new(0.0, 0.0);
    let mut r = vec![zero; n];
    let mut w = vec![zero; n];
    let mut z = vec![zero; n];
    let mut iterations = 0;
    loop {
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel < tol || iterations >= max_iter {
            return GmresOutcome {
                iterations,
                relative_residual: rel,
            };
        }
        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut h: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<C64> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        for j in 0..restart {
            iterations += 1;
            z.copy_from_slice(&v[j]);
            precond(&mut z);
            apply(&z, &mut w);
            let mut col = Vec::with_capacity(j + 2);
            for vi in &v {
                let hij = dot(vi, &w);
                for (wk, vk) in w.iter_mut().zip(vi) {
                    *wk -= hij * vk;
                }
                col.push(hij);
            }
            let hn = norm(&w);
            col.push(C64::new(hn, 0.0));
            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = a * cs[i] + sn[i] * bb;
                col[i + 1] = -sn[i].conj() * a + bb * cs[i];
            }
            let (a, bb) = (col[j], col[j + 1]);
            let rr = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if a.norm() == 0.0 {
                (0.0, C64::new(1.0, 0.0))
            } else {
                (a.norm() / rr, (a / a.norm()) * bb.conj() / rr)
            };
            col[j] = a * c + s * bb;
            col[j + 1] = zero;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            h.push(col);
            let done = g[j + 1].norm() / bnorm < tol || hn == 0.0 || iterations >= max_iter;
            if !done {
                v.push(w.iter().map(|z| z / hn).collect());
            }
            if done || j + 1 == restart {
                break;
            }
        }
        // Back substitution on the triangular Hessenberg factor.
        let m = h.len();
        let mut y = vec![zero; m];
        for i in (0..m).rev() {
            let mut acc = g[i];
            for k in i + 1..m {
                acc -= h[k][i] * y[k];
            }
            y[i] = acc / h[i][i];
        }
        z.iter_mut().for_each(|e| *e = zero);
        for (yi, vi) in y.iter().zip(&v) {
            for (zk, vk) in z.iter_mut().zip(vi) {
                *zk += yi * vk;
            }
        }
        precond(&mut z);
        for (xk, zk) in x.iter_mut().zip(&z) {
            *xk += zk;
        }
    }
}
