//! Dense primal-dual interior-point method for standard-form SDPs:
//!
//! ```text
//! minimize ⟨C, X⟩  s.t.  ⟨A_j, X⟩ = b_j,  X ⪰ 0
//! maximize bᵀy     s.t.  Σ y_j A_j + Z = C,  Z ⪰ 0
//! ```
//!
//! HKM search direction with Mehrotra predictor-corrector. Block-diagonal
//! structure is carried implicitly: if `C` and every `A_j` share a block
//! pattern, the iterates keep it exactly.

use nalgebra::{Cholesky, Dyn};

use super::SdpStatus;
use crate::linalg::{inner, sym, Mat, Vector};

#[derive(Debug, Clone)]
pub struct StandardSdp {
    pub c: Mat,
    pub a: Vec<Mat>,
    pub b: Vector,
}

#[derive(Debug, Clone, Copy)]
pub struct IpmOptions {
    pub tol: f64,
    pub max_iters: usize,
}

#[derive(Debug, Clone)]
pub struct IpmResult {
    pub x: Mat,
    pub y: Vector,
    pub z: Mat,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub gap: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub detail: String,
}

/// Threshold on the objective blow-up used for infeasibility certificates.
const INFEAS_BLOWUP: f64 = 1e10;

impl StandardSdp {
    fn a_op(&self, x: &Mat) -> Vector {
        Vector::from_iterator(self.a.len(), self.a.iter().map(|aj| inner(aj, x)))
    }

    fn a_adj(&self, y: &Vector) -> Mat {
        let mut out = Mat::zeros(self.c.nrows(), self.c.ncols());
        for (aj, yj) in self.a.iter().zip(y.iter()) {
            out += aj * *yj;
        }
        out
    }
}

/// Largest `alpha` with `X + alpha D ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(chol: &Cholesky<f64, Dyn>, d: &Mat) -> f64 {
    let l = chol.l();
    let Some(tmp) = l.solve_lower_triangular(d) else {
        return 0.0;
    };
    let Some(scaled) = l.solve_lower_triangular(&tmp.transpose()) else {
        return 0.0;
    };
    let lam = sym(&scaled).symmetric_eigenvalues().min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

struct Measures {
    pinf: f64,
    dinf: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

fn measures(p: &StandardSdp, x: &Mat, y: &Vector, z: &Mat, rp: &Vector, rd: &Mat) -> Measures {
    let pobj = inner(&p.c, x);
    let dobj = p.b.dot(y);
    let denom = 1.0 + pobj.abs() + dobj.abs();
    Measures {
        pinf: rp.norm() / (1.0 + p.b.norm()),
        dinf: rd.norm() / (1.0 + p.c.norm()),
        gap: (pobj - dobj).abs().max(inner(x, z).abs()) / denom,
        pobj,
        dobj,
    }
}

fn solve_schur(m: &Mat, rhs: &Vector) -> Option<Vector> {
    if let Some(ch) = Cholesky::new(m.clone()) {
        return Some(ch.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

pub fn solve(p: &StandardSdp, opts: IpmOptions) -> IpmResult {
    let nn = p.c.nrows();
    let m = p.a.len();
    let sqrt_n = (nn as f64).sqrt();

    // Infeasible-start scaling in the style of SDPT3.
    let mut xi: f64 = 10.0_f64.max(sqrt_n);
    let mut eta: f64 = 10.0_f64.max(sqrt_n).max(p.c.norm());
    for (aj, bj) in p.a.iter().zip(p.b.iter()) {
        let an = aj.norm();
        xi = xi.max(sqrt_n * (1.0 + bj.abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    let mut x = Mat::identity(nn, nn) * xi;
    let mut z = Mat::identity(nn, nn) * eta;
    let mut y = Vector::zeros(m);

    let result =
        |x: Mat, y: Vector, z: Mat, status, iterations, me: &Measures, detail: String| IpmResult {
            x,
            y,
            z,
            status,
            iterations,
            primal_infeas: me.pinf,
            dual_infeas: me.dinf,
            gap: me.gap,
            primal_obj: me.pobj,
            dual_obj: me.dobj,
            detail,
        };

    let mut last = None;
    for iter in 0..=opts.max_iters {
        let rp = &p.b - p.a_op(&x);
        let rd = &p.c - p.a_adj(&y) - &z;
        let me = measures(p, &x, &y, &z, &rp, &rd);

        if me.pinf <= opts.tol && me.dinf <= opts.tol && me.gap <= opts.tol {
            return result(x, y, z, SdpStatus::Optimal, iter, &me, String::new());
        }
        let c_scale = 1.0 + p.c.norm();
        if me.dobj > INFEAS_BLOWUP * c_scale && rd.norm() / me.dobj <= opts.tol {
            let detail = format!(
                "dual objective diverged to {:e}: primal infeasible",
                me.dobj
            );
            return result(x, y, z, SdpStatus::Infeasible, iter, &me, detail);
        }
        let b_scale = 1.0 + p.b.norm();
        if -me.pobj > INFEAS_BLOWUP * b_scale && rp.norm() / (-me.pobj) <= opts.tol {
            let detail = format!(
                "primal objective diverged to {:e}: dual infeasible",
                me.pobj
            );
            return result(x, y, z, SdpStatus::Infeasible, iter, &me, detail);
        }
        if iter == opts.max_iters {
            last = Some(me);
            break;
        }

        let (Some(chol_x), Some(chol_z)) = (Cholesky::new(x.clone()), Cholesky::new(z.clone()))
        else {
            let detail = "iterate lost positive definiteness".to_string();
            return result(x, y, z, SdpStatus::MaxIter, iter, &me, detail);
        };
        let z_inv = sym(&chol_z.inverse());

        // Schur complement M_ij = ⟨A_i, X A_j Z⁻¹⟩.
        let g: Vec<Mat> = p.a.iter().map(|aj| &x * aj * &z_inv).collect();
        let mut schur = Mat::zeros(m, m);
        for j in 0..m {
            for i in 0..=j {
                let v = inner(&p.a[i], &g[j]);
                schur[(i, j)] = v;
                schur[(j, i)] = v;
            }
        }
        let x_rd = &x * &rd * &z_inv;
        let a_x_rd = p.a_op(&x_rd);

        let direction = |h: &Mat| -> Option<(Mat, Vector, Mat)> {
            let rhs = &rp - p.a_op(h) + &a_x_rd;
            let dy = solve_schur(&schur, &rhs)?;
            let dz = &rd - p.a_adj(&dy);
            let dx = sym(&(h - &x * &dz * &z_inv));
            Some((dx, dy, dz))
        };

        let mu = inner(&x, &z) / nn as f64;
        let Some((dx_aff, _, dz_aff)) = direction(&(-&x)) else {
            let detail = "singular Schur complement".to_string();
            return result(x, y, z, SdpStatus::MaxIter, iter, &me, detail);
        };
        let ap = max_step(&chol_x, &dx_aff).min(1.0);
        let ad = max_step(&chol_z, &dz_aff).min(1.0);
        let mu_aff = inner(&(&x + &dx_aff * ap), &(&z + &dz_aff * ad)) / nn as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let h = &z_inv * (sigma * mu) - &x - &dx_aff * &dz_aff * &z_inv;
        let Some((dx, dy, dz)) = direction(&h) else {
            let detail = "singular Schur complement".to_string();
            return result(x, y, z, SdpStatus::MaxIter, iter, &me, detail);
        };
        let ap = max_step(&chol_x, &dx);
        let ad = max_step(&chol_z, &dz);
        let tau = 0.9 + 0.09 * ap.min(ad).min(1.0);
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);

        x = sym(&(&x + &dx * ap));
        y += &dy * ad;
        z = sym(&(&z + &dz * ad));
    }
    let me = last.expect("loop exits through max_iters");
    let detail = format!(
        "iteration budget exhausted (primal {:e}, dual {:e}, gap {:e})",
        me.pinf, me.dinf, me.gap
    );
    result(x, y, z, SdpStatus::MaxIter, opts.max_iters, &me, detail)
}
