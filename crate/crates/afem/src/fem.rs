//! Finite element spaces and assembly for the coupled system.
//!
//! Velocity is piecewise-constant vector valued (2 dofs per element),
//! pressure is continuous piecewise-linear with zero mean, temperature is
//! continuous piecewise-linear with zero boundary trace. Coefficient vectors
//! for the P1 spaces are full vertex-length; Dirichlet elimination zeroes the
//! boundary entries of the temperature space.

use std::sync::Arc;

use crate::mesh::{Mesh, MeshError};
use crate::parallel::map_elements;
use crate::quadrature::{integrate_triangle, QuadRule};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceTag {
    TemperatureP1,
    PressureP1,
    VelocityP0Vec,
}

#[derive(Clone, Debug)]
pub struct FeFunction {
    pub space: SpaceTag,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(space: SpaceTag, mesh: &Mesh) -> Self {
        let len = match space {
            SpaceTag::TemperatureP1 | SpaceTag::PressureP1 => mesh.n_vertices(),
            SpaceTag::VelocityP0Vec => 2 * mesh.n_triangles(),
        };
        FeFunction {
            space,
            coeffs: vec![0.0; len],
        }
    }

    /// Per-element velocity vector (only for `VelocityP0Vec`).
    pub fn velocity(&self, t: usize) -> [f64; 2] {
        debug_assert_eq!(self.space, SpaceTag::VelocityP0Vec);
        [self.coeffs[2 * t], self.coeffs[2 * t + 1]]
    }
}

/// Gradients of the three hat functions on triangle `t` (constant per
/// element).
pub fn hat_gradients(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let [a, b, c] = mesh.triangle(t);
    let va = mesh.vertex(a);
    let vb = mesh.vertex(b);
    let vc = mesh.vertex(c);
    let inv2a = 1.0 / (2.0 * mesh.area(t));
    [
        [(vb[1] - vc[1]) * inv2a, (vc[0] - vb[0]) * inv2a],
        [(vc[1] - va[1]) * inv2a, (va[0] - vc[0]) * inv2a],
        [(va[1] - vb[1]) * inv2a, (vb[0] - va[0]) * inv2a],
    ]
}

/// Evaluates a P1 function on element `t` at barycentric coordinates.
pub fn eval_p1(mesh: &Mesh, coeffs: &[f64], t: usize, bary: [f64; 3]) -> f64 {
    let tri = mesh.triangle(t);
    bary[0] * coeffs[tri[0]] + bary[1] * coeffs[tri[1]] + bary[2] * coeffs[tri[2]]
}

/// Gradient of a P1 function on element `t` (constant).
pub fn grad_p1(mesh: &Mesh, coeffs: &[f64], t: usize) -> [f64; 2] {
    let tri = mesh.triangle(t);
    let grads = hat_gradients(mesh, t);
    let mut g = [0.0, 0.0];
    for k in 0..3 {
        g[0] += coeffs[tri[k]] * grads[k][0];
        g[1] += coeffs[tri[k]] * grads[k][1];
    }
    g
}

/// The pointwise Darcy-Forchheimer operator `v -> nu v + |v| v`.
pub fn forchheimer_operator(nu: f64, v: [f64; 2]) -> [f64; 2] {
    let norm = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [(nu + norm) * v[0], (nu + norm) * v[1]]
}

/// Per-edge normal flux values for the five-spot style boundary condition:
/// `magnitude` on boundary edges whose closure contains `inflow`, negated on
/// edges containing `outflow`.
#[derive(Clone, Debug)]
pub struct CornerFlux {
    pub inflow: [f64; 2],
    pub outflow: [f64; 2],
    pub magnitude: f64,
}

/// Problem coefficients and sources.
#[derive(Clone)]
pub struct ProblemData {
    pub viscosity: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    /// Declared bounds `0 < nu_min <= nu(x) <= nu_max`, asserted at
    /// quadrature points during assembly.
    pub viscosity_bounds: (f64, f64),
    pub kappa: f64,
    /// The temperature-independent force `f0(x)`.
    pub body_force: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    /// The temperature coupling `f1(s)`, with `f1(0) = 0`.
    pub thermal_force: Arc<dyn Fn(f64) -> [f64; 2] + Send + Sync>,
    pub dirac_points: Vec<[f64; 2]>,
    /// Lebesgue exponent `p` of the heat estimator.
    pub exponent: f64,
    pub flux_bc: Option<CornerFlux>,
}

impl std::fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemData")
            .field("viscosity_bounds", &self.viscosity_bounds)
            .field("kappa", &self.kappa)
            .field("dirac_points", &self.dirac_points)
            .field("exponent", &self.exponent)
            .field("flux_bc", &self.flux_bc)
            .finish_non_exhaustive()
    }
}

fn point_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2], tol: f64) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
    if cross.abs() > tol * len2.sqrt().max(1.0) {
        return false;
    }
    let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
    dot >= -tol && dot <= len2 + tol
}

/// Normal flux values `(edge id, g)` on the current mesh, compatibility
/// corrected so that the integrated total flux vanishes.
pub fn boundary_flux_values(mesh: &Mesh, flux: &CornerFlux) -> Vec<(usize, f64)> {
    let mut values = Vec::new();
    for (e, edge) in mesh.edges().iter().enumerate() {
        if !edge.is_boundary() {
            continue;
        }
        let a = mesh.vertex(edge.vertices[0]);
        let b = mesh.vertex(edge.vertices[1]);
        if point_on_segment(flux.inflow, a, b, 1e-12) {
            values.push((e, flux.magnitude));
        } else if point_on_segment(flux.outflow, a, b, 1e-12) {
            values.push((e, -flux.magnitude));
        }
    }
    // The continuous problem requires a zero net flux; remove any discrete
    // imbalance by subtracting the length-weighted mean over the flux edges.
    let total: f64 = values.iter().map(|&(e, g)| g * mesh.edge_length(e)).sum();
    let len_total: f64 = values.iter().map(|&(e, _)| mesh.edge_length(e)).sum();
    if len_total > 0.0 {
        let mean = total / len_total;
        for (_, g) in values.iter_mut() {
            *g -= mean;
        }
    }
    values
}

/// Load vector entries `sum_z phi_i(z)` over all vertices, before Dirichlet
/// elimination.
pub fn dirac_load_full(mesh: &Mesh, points: &[[f64; 2]]) -> Result<Vec<f64>, MeshError> {
    let mut load = vec![0.0; mesh.n_vertices()];
    for &z in points {
        let loc = mesh.locate_point(z, 1e-12)?;
        // Hat functions are continuous, so any containing element gives the
        // same value; take the first.
        let t = loc.containing_elements[0];
        let lambda = mesh.barycentric(t, z);
        let tri = mesh.triangle(t);
        for k in 0..3 {
            load[tri[k]] += lambda[k];
        }
    }
    Ok(load)
}

/// Dirac load over temperature dofs: boundary-vertex entries are dropped.
pub fn dirac_load(mesh: &Mesh, points: &[[f64; 2]]) -> Result<Vec<f64>, MeshError> {
    let mut load = dirac_load_full(mesh, points)?;
    for (v, entry) in load.iter_mut().enumerate() {
        if mesh.is_boundary_vertex(v) {
            *entry = 0.0;
        }
    }
    Ok(load)
}

/// The linearized Darcy step in block form. The velocity block is diagonal
/// (`alpha_K I_2` per element), the coupling block maps velocities to
/// pressure test functions.
#[derive(Clone, Debug)]
pub struct DarcySystem {
    /// `alpha_K = int_K nu dx + |u_prev|_K |K|`, one entry per element.
    pub velocity_diag: Vec<f64>,
    /// `n_vertices x 2 n_triangles`; entry `(q, 2K+d) = |K| d(phi_q)/dx_d`.
    pub grad_coupling: SparseMatrix,
    /// `int_K (f0 + f1(T_prev))`, interleaved components.
    pub rhs_velocity: Vec<f64>,
    /// Boundary flux term per pressure dof (zero without a flux condition).
    pub rhs_pressure: Vec<f64>,
}

/// Assembles the linearized Darcy step with `|u_prev|` frozen per element
/// and `f1` evaluated at quadrature points from the P1 value of `T_prev`.
pub fn assemble_darcy_step(
    mesh: &Mesh,
    data: &ProblemData,
    u_prev: &FeFunction,
    t_prev: &FeFunction,
    rule: &QuadRule,
) -> DarcySystem {
    debug_assert_eq!(u_prev.space, SpaceTag::VelocityP0Vec);
    debug_assert_eq!(t_prev.space, SpaceTag::TemperatureP1);
    let nt = mesh.n_triangles();
    let nv = mesh.n_vertices();
    let (nu_min, nu_max) = data.viscosity_bounds;

    struct Local {
        alpha: f64,
        force: [f64; 2],
        tri: [usize; 3],
        coupling: [[f64; 2]; 3],
    }
    let locals = map_elements(nt, |t| {
        let tri = mesh.triangle(t);
        let verts = [
            mesh.vertex(tri[0]),
            mesh.vertex(tri[1]),
            mesh.vertex(tri[2]),
        ];
        let area = mesh.area(t);
        let nu_int = integrate_triangle(rule, verts, |_, x| {
            let nu = (data.viscosity)(x);
            assert!(
                nu >= nu_min - 1e-12 && nu <= nu_max + 1e-12,
                "viscosity {nu} outside declared bounds at ({}, {})",
                x[0],
                x[1]
            );
            nu
        });
        let u = u_prev.velocity(t);
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let alpha = nu_int + speed * area;

        let fx = integrate_triangle(rule, verts, |lambda, x| {
            let s = eval_p1(mesh, &t_prev.coeffs, t, lambda);
            (data.body_force)(x)[0] + (data.thermal_force)(s)[0]
        });
        let fy = integrate_triangle(rule, verts, |lambda, x| {
            let s = eval_p1(mesh, &t_prev.coeffs, t, lambda);
            (data.body_force)(x)[1] + (data.thermal_force)(s)[1]
        });

        let grads = hat_gradients(mesh, t);
        let mut coupling = [[0.0; 2]; 3];
        for k in 0..3 {
            coupling[k][0] = area * grads[k][0];
            coupling[k][1] = area * grads[k][1];
        }
        Local {
            alpha,
            force: [fx, fy],
            tri,
            coupling,
        }
    });

    let mut velocity_diag = Vec::with_capacity(nt);
    let mut rhs_velocity = Vec::with_capacity(2 * nt);
    let mut triplets = Vec::with_capacity(6 * nt);
    for (t, local) in locals.iter().enumerate() {
        velocity_diag.push(local.alpha);
        rhs_velocity.push(local.force[0]);
        rhs_velocity.push(local.force[1]);
        for k in 0..3 {
            triplets.push((local.tri[k], 2 * t, local.coupling[k][0]));
            triplets.push((local.tri[k], 2 * t + 1, local.coupling[k][1]));
        }
    }
    let grad_coupling = SparseMatrix::from_triplets(nv, 2 * nt, &triplets);

    let mut rhs_pressure = vec![0.0; nv];
    if let Some(flux) = &data.flux_bc {
        for (e, g) in boundary_flux_values(mesh, flux) {
            let [a, b] = mesh.edge(e).vertices;
            let half = 0.5 * g * mesh.edge_length(e);
            rhs_pressure[a] += half;
            rhs_pressure[b] += half;
        }
    }

    DarcySystem {
        velocity_diag,
        grad_coupling,
        rhs_velocity,
        rhs_pressure,
    }
}

/// Raw heat matrix triplets over all vertices, before Dirichlet elimination:
/// `kappa` stiffness minus convection `int_K phi_j (u . grad phi_i)`.
pub fn heat_triplets(mesh: &Mesh, data: &ProblemData, u: &FeFunction) -> Vec<(usize, usize, f64)> {
    debug_assert_eq!(u.space, SpaceTag::VelocityP0Vec);
    let nt = mesh.n_triangles();
    let locals = map_elements(nt, |t| {
        let tri = mesh.triangle(t);
        let area = mesh.area(t);
        let grads = hat_gradients(mesh, t);
        let uv = u.velocity(t);
        let mut local = [[0.0f64; 3]; 3];
        for i in 0..3 {
            let conv = uv[0] * grads[i][0] + uv[1] * grads[i][1];
            for j in 0..3 {
                let stiff = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                // phi_j has mean 1/3 on the element.
                local[i][j] = data.kappa * area * stiff - area / 3.0 * conv;
            }
        }
        (tri, local)
    });
    let mut triplets = Vec::with_capacity(9 * nt);
    for (tri, local) in locals {
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], local[i][j]));
            }
        }
    }
    triplets
}

/// Heat system over temperature dofs with boundary rows and columns
/// eliminated for the homogeneous Dirichlet condition.
pub fn assemble_heat(mesh: &Mesh, data: &ProblemData, u: &FeFunction) -> SparseMatrix {
    let nv = mesh.n_vertices();
    let mut triplets: Vec<(usize, usize, f64)> = heat_triplets(mesh, data, u)
        .into_iter()
        .filter(|&(i, j, _)| !mesh.is_boundary_vertex(i) && !mesh.is_boundary_vertex(j))
        .collect();
    for v in 0..nv {
        if mesh.is_boundary_vertex(v) {
            triplets.push((v, v, 1.0));
        }
    }
    SparseMatrix::from_triplets(nv, nv, &triplets)
}
