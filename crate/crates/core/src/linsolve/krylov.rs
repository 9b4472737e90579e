//! BiCGStab and restarted GMRES, both right-preconditioned.

use super::{axpy, dot, norm, project_mean_zero, Preconditioner};
use crate::grid::SparseMatrix;

pub(crate) struct Outcome {
    pub iterations: usize,
    pub converged: bool,
    pub breakdown: bool,
}

pub(crate) fn bicgstab(
    m: &SparseMatrix,
    pc: &Preconditioner,
    b: &[f64],
    x: &mut [f64],
    target: f64,
    max_iter: usize,
    project: bool,
) -> Outcome {
    let n = b.len();
    let mut r = vec![0.0; n];
    m.mul_into(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    if norm(&r) <= target {
        return Outcome { iterations: 0, converged: true, breakdown: false };
    }
    let r_hat = r.clone();
    let (mut rho_old, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let r_hat_norm = norm(&r_hat);
    let mut best = norm(&r);
    let mut x_best = x.to_vec();

    for it in 1..=max_iter {
        let rho = dot(&r_hat, &r);
        if rho.abs() <= 1e-30 * r_hat_norm * norm(&r) || !rho.is_finite() {
            x.copy_from_slice(&x_best);
            return Outcome { iterations: it - 1, converged: false, breakdown: true };
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho / rho_old) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        pc.apply(&p, &mut p_hat);
        if project {
            // the preconditioner of a singular system amplifies the kernel
            project_mean_zero(&mut p_hat);
        }
        m.mul_into(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            x.copy_from_slice(&x_best);
            return Outcome { iterations: it - 1, converged: false, breakdown: true };
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= target {
            axpy(alpha, &p_hat, x);
            if project {
                project_mean_zero(x);
            }
            return Outcome { iterations: it, converged: true, breakdown: false };
        }
        pc.apply(&s, &mut s_hat);
        if project {
            project_mean_zero(&mut s_hat);
        }
        m.mul_into(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            x.copy_from_slice(&x_best);
            return Outcome { iterations: it, converged: false, breakdown: true };
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        if project {
            project_mean_zero(x);
        }
        let rn = norm(&r);
        if rn <= target {
            return Outcome { iterations: it, converged: true, breakdown: false };
        }
        if rn < best {
            best = rn;
            x_best.copy_from_slice(x);
        } else if !(rn <= 1e6 * best) {
            // diverging; fall back to the best iterate seen
            x.copy_from_slice(&x_best);
            return Outcome { iterations: it, converged: false, breakdown: true };
        }
        if omega == 0.0 {
            x.copy_from_slice(&x_best);
            return Outcome { iterations: it, converged: false, breakdown: true };
        }
        rho_old = rho;
    }
    x.copy_from_slice(&x_best);
    Outcome { iterations: max_iter, converged: false, breakdown: false }
}

pub(crate) fn gmres(
    m: &SparseMatrix,
    pc: &Preconditioner,
    b: &[f64],
    x: &mut [f64],
    target: f64,
    max_iter: usize,
    restart: usize,
    project: bool,
) -> Outcome {
    let n = b.len();
    let mut total = 0;
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    while total < max_iter {
        m.mul_into(x, &mut w);
        let r: Vec<f64> = b.iter().zip(&w).map(|(bi, wi)| bi - wi).collect();
        let beta = norm(&r);
        if beta <= target {
            return Outcome { iterations: total, converged: true, breakdown: false };
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k = 0;
        let mut happy = false;
        for j in 0..restart {
            pc.apply(&basis[j], &mut z);
            if project {
                project_mean_zero(&mut z);
            }
            m.mul_into(&z, &mut w);
            for (i, vi) in basis.iter().enumerate() {
                hess[i][j] = dot(&w, vi);
                axpy(-hess[i][j], vi, &mut w);
            }
            let hn = norm(&w);
            hess[j + 1][j] = hn;
            for i in 0..j {
                let tmp = cs[i] * hess[i][j] + sn[i] * hess[i + 1][j];
                hess[i + 1][j] = -sn[i] * hess[i][j] + cs[i] * hess[i + 1][j];
                hess[i][j] = tmp;
            }
            let d = hess[j][j].hypot(hess[j + 1][j]);
            cs[j] = if d == 0.0 { 1.0 } else { hess[j][j] / d };
            sn[j] = if d == 0.0 { 0.0 } else { hess[j + 1][j] / d };
            hess[j][j] = d;
            hess[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k = j + 1;
            if g[j + 1].abs() <= target || total >= max_iter || hn == 0.0 {
                happy = hn == 0.0;
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for l in i + 1..k {
                acc -= hess[i][l] * y[l];
            }
            y[i] = if hess[i][i] != 0.0 { acc / hess[i][i] } else { 0.0 };
        }
        let mut comb = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&basis) {
            axpy(*yi, vi, &mut comb);
        }
        pc.apply(&comb, &mut z);
        if project {
            project_mean_zero(&mut z);
        }
        axpy(1.0, &z, x);
        if project {
            project_mean_zero(x);
        }
        if happy {
            break;
        }
    }
    m.mul_into(x, &mut w);
    let res = b.iter().zip(&w).map(|(bi, wi)| (bi - wi).powi(2)).sum::<f64>().sqrt();
    Outcome { iterations: total, converged: res <= target, breakdown: false }
}
