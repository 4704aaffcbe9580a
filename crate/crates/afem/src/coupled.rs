//! Fixed-point iteration for the coupled Darcy-Forchheimer / heat system on
//! a fixed mesh.
//!
//! Each iteration solves the linearized Darcy step with the drag coefficient
//! frozen from the previous velocity and the force evaluated at the previous
//! temperature, then the heat equation with the fresh velocity and the Dirac
//! load. The loop stops when the Euclidean norm of the concatenated raw
//! coefficient increment drops below the tolerance.

use thiserror::Error;

use crate::fem::{
    assemble_darcy_step, assemble_heat, dirac_load, hat_gradients, DarcySystem, FeFunction,
    ProblemData, SpaceTag,
};
use crate::mesh::{Mesh, MeshError};
use crate::quadrature::{triangle_rule, QuadratureError};
use crate::sparse::{LinAlgError, SparseLu, SparseMatrix};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("fixed-point iteration did not reach tol {tol} within {max_iter} iterations (last increment {last})", last = .increments.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        tol: f64,
        max_iter: usize,
        increments: Vec<f64>,
    },
    #[error(transparent)]
    LinAlg(#[from] LinAlgError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Clone, Copy, Debug)]
pub struct PicardOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Scale the stopping test by the current coefficient norm instead of
    /// using the absolute increment. Off by default.
    pub relative: bool,
    pub quad_degree: usize,
}

impl Default for PicardOptions {
    fn default() -> Self {
        PicardOptions {
            tol: 1e-8,
            max_iter: 200,
            relative: false,
            quad_degree: 19,
        }
    }
}

/// Converged solution of the coupled discrete system on one mesh.
#[derive(Clone, Debug)]
pub struct CoupledState {
    pub velocity: FeFunction,
    pub pressure: FeFunction,
    pub temperature: FeFunction,
    pub picard_iters: usize,
    pub final_increment: f64,
    pub tol: f64,
    pub increments: Vec<f64>,
}

impl CoupledState {
    pub fn is_converged(&self) -> bool {
        self.final_increment <= self.tol
    }
}

/// Pressure Schur complement of the saddle-point step, with one Lagrange
/// multiplier row/column enforcing the zero-mean pressure constraint.
///
/// The velocity block is `alpha_K I_2` per element, so velocity is
/// eliminated exactly: `S = B diag(1/alpha) B^T` over pressure dofs.
fn solve_darcy(
    mesh: &Mesh,
    sys: &DarcySystem,
) -> Result<(Vec<f64>, Vec<f64>), LinAlgError> {
    let nv = mesh.n_vertices();
    let nt = mesh.n_triangles();
    let n = nv + 1;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(10 * nv);
    for t in 0..nt {
        let tri = mesh.triangle(t);
        let grads = hat_gradients(mesh, t);
        let area = mesh.area(t);
        let w = area * area / sys.velocity_diag[t];
        for i in 0..3 {
            for j in 0..3 {
                let dot = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                triplets.push((tri[i], tri[j], w * dot));
            }
        }
        // Zero-mean multiplier column: int_Omega phi_q dx.
        for k in 0..3 {
            triplets.push((tri[k], nv, area / 3.0));
            triplets.push((nv, tri[k], area / 3.0));
        }
    }
    let schur = SparseMatrix::from_triplets(n, n, &triplets);

    // rhs_q = sum_K (|K| / alpha_K) grad(phi_q) . F_K - flux_q.
    let mut rhs = vec![0.0; n];
    for t in 0..nt {
        let tri = mesh.triangle(t);
        let grads = hat_gradients(mesh, t);
        let area = mesh.area(t);
        let f = [sys.rhs_velocity[2 * t], sys.rhs_velocity[2 * t + 1]];
        for k in 0..3 {
            rhs[tri[k]] += area / sys.velocity_diag[t] * (grads[k][0] * f[0] + grads[k][1] * f[1]);
        }
    }
    for q in 0..nv {
        rhs[q] -= sys.rhs_pressure[q];
    }

    let lu = SparseLu::factor(&schur)?;
    let sol = lu.solve(&rhs)?;
    let pressure = sol[..nv].to_vec();

    // Back-substitute the velocity: u_K = (F_K - |K| grad(p)|_K) / alpha_K.
    let mut velocity = vec![0.0; 2 * nt];
    for t in 0..nt {
        let tri = mesh.triangle(t);
        let grads = hat_gradients(mesh, t);
        let area = mesh.area(t);
        let mut gp = [0.0, 0.0];
        for k in 0..3 {
            gp[0] += pressure[tri[k]] * grads[k][0];
            gp[1] += pressure[tri[k]] * grads[k][1];
        }
        velocity[2 * t] = (sys.rhs_velocity[2 * t] - area * gp[0]) / sys.velocity_diag[t];
        velocity[2 * t + 1] = (sys.rhs_velocity[2 * t + 1] - area * gp[1]) / sys.velocity_diag[t];
    }
    Ok((velocity, pressure))
}

/// Runs the fixed-point iteration from the zero initial guess.
pub fn picard_solve(
    mesh: &Mesh,
    data: &ProblemData,
    opts: &PicardOptions,
) -> Result<CoupledState, SolveError> {
    let rule = triangle_rule(opts.quad_degree)?;
    let load = dirac_load(mesh, &data.dirac_points)?;

    let mut u = FeFunction::zeros(SpaceTag::VelocityP0Vec, mesh);
    let mut p = FeFunction::zeros(SpaceTag::PressureP1, mesh);
    let mut temp = FeFunction::zeros(SpaceTag::TemperatureP1, mesh);
    let mut increments = Vec::new();

    for iter in 0..opts.max_iter {
        let sys = assemble_darcy_step(mesh, data, &u, &temp, &rule);
        let (u_new, p_new) = solve_darcy(mesh, &sys)?;

        let mut u_next = FeFunction {
            space: SpaceTag::VelocityP0Vec,
            coeffs: u_new,
        };
        let heat = assemble_heat(mesh, data, &u_next);
        let t_new = crate::sparse::factor_solve(&heat, &load)?;

        let mut inc2 = 0.0;
        for (a, b) in u_next.coeffs.iter().zip(&u.coeffs) {
            inc2 += (a - b) * (a - b);
        }
        for (a, b) in p_new.iter().zip(&p.coeffs) {
            inc2 += (a - b) * (a - b);
        }
        for (a, b) in t_new.iter().zip(&temp.coeffs) {
            inc2 += (a - b) * (a - b);
        }
        let mut increment = inc2.sqrt();
        if opts.relative {
            let norm2: f64 = u_next.coeffs.iter().map(|v| v * v).sum::<f64>()
                + p_new.iter().map(|v| v * v).sum::<f64>()
                + t_new.iter().map(|v| v * v).sum::<f64>();
            increment /= norm2.sqrt().max(1.0);
        }
        increments.push(increment);

        std::mem::swap(&mut u, &mut u_next);
        p.coeffs = p_new;
        temp.coeffs = t_new;

        if increment <= opts.tol {
            return Ok(CoupledState {
                velocity: u,
                pressure: p,
                temperature: temp,
                picard_iters: iter + 1,
                final_increment: increment,
                tol: opts.tol,
                increments,
            });
        }
    }
    Err(SolveError::NonConvergence {
        tol: opts.tol,
        max_iter: opts.max_iter,
        increments,
    })
}
