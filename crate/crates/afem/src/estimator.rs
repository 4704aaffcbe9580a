//! Residual a posteriori error indicators for the heat and Darcy
//! sub-problems, and the total estimator.
//!
//! Heat, per element (p-th power):
//!   [point-source term] + h_K^p ||R_K||_{L^p(K)}^p + h_K ||J||_{L^p(dK \ dOmega)}^p
//! with R_K = -grad(T_h) . u_h and J the jump of (kappa grad(T_h) - T_h u_h) . n.
//! The point-source term contributes h_K^{2-p} once per source in K that is
//! not a vertex of K (2D exponent; in 3D it would be h_K^{3-2p}). A source
//! on a shared closed edge counts fully in both incident elements.
//!
//! Darcy, per element:
//!   [ ||R_K||_{L^2(K)}^2 + h_K^{2/3} ||[[u.n]]||_{L^3(dK \ dOmega)}^2 ]^{1/2}
//! with R_K = f0 + f1(T_h) - nu u_h - |u_h| u_h - grad(p_h).

use thiserror::Error;

use crate::coupled::CoupledState;
use crate::fem::{eval_p1, grad_p1, ProblemData};
use crate::mesh::{LocationKind, Mesh, MeshError};
use crate::parallel::map_elements;
use crate::quadrature::{edge_rule, integrate_edge, integrate_triangle, QuadRule, QuadratureError};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("estimator evaluated on an unconverged state (increment {0} > tol {1})")]
    UnconvergedState(f64, f64),
    #[error("indicator field length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// Per-element indicators and their global totals.
#[derive(Clone, Debug)]
pub struct IndicatorField {
    pub heat_local: Vec<f64>,
    pub darcy_local: Vec<f64>,
    pub total_local: Vec<f64>,
    pub heat_global: f64,
    pub darcy_global: f64,
    pub total_global: f64,
    pub exponent: f64,
}

/// How a Dirac source contributes to the indicator of a containing element.
/// Pure function of the point location; the `h_K^{2-p}` term is active only
/// when the source is not a vertex of the element.
pub fn source_term_active(kind: LocationKind) -> bool {
    !matches!(kind, LocationKind::AtVertex(_))
}

fn check_converged(state: &CoupledState) -> Result<(), EstimatorError> {
    if !state.is_converged() {
        return Err(EstimatorError::UnconvergedState(
            state.final_increment,
            state.tol,
        ));
    }
    Ok(())
}

/// Per-element count of point sources that activate the `h_K^{2-p}` term.
fn active_source_counts(mesh: &Mesh, data: &ProblemData) -> Result<Vec<usize>, EstimatorError> {
    let mut counts = vec![0usize; mesh.n_triangles()];
    for &z in &data.dirac_points {
        let loc = mesh.locate_point(z, 1e-12)?;
        if source_term_active(loc.kind) {
            for &t in &loc.containing_elements {
                counts[t] += 1;
            }
        }
    }
    Ok(counts)
}

/// Heat indicators with a caller-provided quadrature rule for the edge
/// jump norms.
pub fn heat_indicators_with_rule(
    mesh: &Mesh,
    state: &CoupledState,
    data: &ProblemData,
    rule: &QuadRule,
) -> Result<Vec<f64>, EstimatorError> {
    check_converged(state)?;
    let p = data.exponent;
    let counts = active_source_counts(mesh, data)?;

    let values = map_elements(mesh.n_triangles(), |t| {
        let h = mesh.diameter(t);
        let area = mesh.area(t);
        let mut acc = counts[t] as f64 * h.powf(2.0 - p);

        // Element residual: constant per element.
        let u = state.velocity.velocity(t);
        let grad_t = grad_p1(mesh, &state.temperature.coeffs, t);
        let residual = -(grad_t[0] * u[0] + grad_t[1] * u[1]);
        acc += h.powf(p) * residual.abs().powf(p) * area;

        // Interelement flux jumps over the interior sides of K.
        let mut jump_p = 0.0;
        for &e in &mesh.triangle_edges(t) {
            let edge = mesh.edge(e);
            let Some(other) = edge.second else {
                continue; // boundary edges contribute no jump
            };
            let (plus, minus) = (edge.first, other);
            let [a, b] = edge.vertices;
            let va = mesh.vertex(a);
            let vb = mesh.vertex(b);
            let len = mesh.edge_length(e);
            let normal = [(vb[1] - va[1]) / len, -(vb[0] - va[0]) / len];

            let kappa = data.kappa;
            let gt_plus = grad_p1(mesh, &state.temperature.coeffs, plus);
            let gt_minus = grad_p1(mesh, &state.temperature.coeffs, minus);
            let u_plus = state.velocity.velocity(plus);
            let u_minus = state.velocity.velocity(minus);
            let ta = state.temperature.coeffs[a];
            let tb = state.temperature.coeffs[b];

            jump_p += integrate_edge(rule, va, vb, |s, _| {
                // Temperature is continuous along the edge.
                let temp = ta + s * (tb - ta);
                let w_plus = [
                    kappa * gt_plus[0] - temp * u_plus[0],
                    kappa * gt_plus[1] - temp * u_plus[1],
                ];
                let w_minus = [
                    kappa * gt_minus[0] - temp * u_minus[0],
                    kappa * gt_minus[1] - temp * u_minus[1],
                ];
                let j = (w_plus[0] - w_minus[0]) * normal[0] + (w_plus[1] - w_minus[1]) * normal[1];
                j.abs().powf(p)
            });
        }
        acc += h * jump_p;
        acc.powf(1.0 / p)
    });
    Ok(values)
}

pub fn heat_indicators(
    mesh: &Mesh,
    state: &CoupledState,
    data: &ProblemData,
    quad_degree: usize,
) -> Result<Vec<f64>, EstimatorError> {
    let rule = edge_rule(quad_degree)?;
    heat_indicators_with_rule(mesh, state, data, &rule)
}

/// Darcy indicators with a caller-provided triangle rule for the element
/// residual norm.
pub fn darcy_indicators_with_rule(
    mesh: &Mesh,
    state: &CoupledState,
    data: &ProblemData,
    rule: &QuadRule,
) -> Result<Vec<f64>, EstimatorError> {
    check_converged(state)?;

    let values = map_elements(mesh.n_triangles(), |t| {
        let tri = mesh.triangle(t);
        let verts = [
            mesh.vertex(tri[0]),
            mesh.vertex(tri[1]),
            mesh.vertex(tri[2]),
        ];
        let u = state.velocity.velocity(t);
        let speed = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let grad_p = grad_p1(mesh, &state.pressure.coeffs, t);

        let residual2 = integrate_triangle(rule, verts, |lambda, x| {
            let temp = eval_p1(mesh, &state.temperature.coeffs, t, lambda);
            let f0 = (data.body_force)(x);
            let f1 = (data.thermal_force)(temp);
            let nu = (data.viscosity)(x);
            let rx = f0[0] + f1[0] - nu * u[0] - speed * u[0] - grad_p[0];
            let ry = f0[1] + f1[1] - nu * u[1] - speed * u[1] - grad_p[1];
            rx * rx + ry * ry
        });

        // L^3 norm of the constant normal jump over the interior sides:
        // per side |[[u.n]]| |gamma|^{1/3}, aggregated in the cube.
        let mut jump3 = 0.0;
        for &e in &mesh.triangle_edges(t) {
            let edge = mesh.edge(e);
            let Some(other) = edge.second else {
                continue;
            };
            let [a, b] = edge.vertices;
            let va = mesh.vertex(a);
            let vb = mesh.vertex(b);
            let len = mesh.edge_length(e);
            let normal = [(vb[1] - va[1]) / len, -(vb[0] - va[0]) / len];
            let u_plus = state.velocity.velocity(edge.first);
            let u_minus = state.velocity.velocity(other);
            let j = (u_plus[0] - u_minus[0]) * normal[0] + (u_plus[1] - u_minus[1]) * normal[1];
            jump3 += j.abs().powi(3) * len;
        }
        let h = mesh.diameter(t);
        (residual2 + h.powf(2.0 / 3.0) * jump3.powf(2.0 / 3.0)).sqrt()
    });
    Ok(values)
}

pub fn darcy_indicators(
    mesh: &Mesh,
    state: &CoupledState,
    data: &ProblemData,
    quad_degree: usize,
) -> Result<Vec<f64>, EstimatorError> {
    let rule = crate::quadrature::triangle_rule(quad_degree)?;
    darcy_indicators_with_rule(mesh, state, data, &rule)
}

/// Combines per-element indicators into the total field:
/// heat total is a p-sum, Darcy total a 2-sum, and the totals add.
pub fn total_indicators(
    heat_local: Vec<f64>,
    darcy_local: Vec<f64>,
    exponent: f64,
) -> Result<IndicatorField, EstimatorError> {
    if heat_local.len() != darcy_local.len() {
        return Err(EstimatorError::LengthMismatch(
            heat_local.len(),
            darcy_local.len(),
        ));
    }
    let p = exponent;
    let heat_global = heat_local
        .iter()
        .map(|v| v.powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    let darcy_global = darcy_local.iter().map(|v| v * v).sum::<f64>().sqrt();
    let total_local: Vec<f64> = heat_local
        .iter()
        .zip(&darcy_local)
        .map(|(a, b)| a + b)
        .collect();
    Ok(IndicatorField {
        heat_local,
        darcy_local,
        total_local,
        heat_global,
        darcy_global,
        total_global: heat_global + darcy_global,
        exponent,
    })
}

/// Full indicator field for a converged state.
pub fn compute_indicators(
    mesh: &Mesh,
    state: &CoupledState,
    data: &ProblemData,
    quad_degree: usize,
) -> Result<IndicatorField, EstimatorError> {
    let heat = heat_indicators(mesh, state, data, quad_degree)?;
    let darcy = darcy_indicators(mesh, state, data, quad_degree)?;
    total_indicators(heat, darcy, data.exponent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{FeFunction, SpaceTag};
    use crate::mesh::{two_triangle_square, unit_square_crisscross};
    use std::sync::Arc;

    fn zero_state(mesh: &Mesh) -> CoupledState {
        CoupledState {
            velocity: FeFunction::zeros(SpaceTag::VelocityP0Vec, mesh),
            pressure: FeFunction::zeros(SpaceTag::PressureP1, mesh),
            temperature: FeFunction::zeros(SpaceTag::TemperatureP1, mesh),
            picard_iters: 1,
            final_increment: 0.0,
            tol: 1e-8,
            increments: vec![0.0],
        }
    }

    fn plain_data(dirac: Vec<[f64; 2]>, p: f64) -> ProblemData {
        ProblemData {
            viscosity: Arc::new(|_| 1.0),
            viscosity_bounds: (1.0, 1.0),
            kappa: 1.0,
            body_force: Arc::new(|_| [0.0, 0.0]),
            thermal_force: Arc::new(|_| [0.0, 0.0]),
            dirac_points: dirac,
            exponent: p,
            flux_bc: None,
        }
    }

    #[test]
    fn all_zero_fields_give_zero_indicators() {
        let mesh = unit_square_crisscross();
        let state = zero_state(&mesh);
        let data = plain_data(vec![], 1.5);
        let field = compute_indicators(&mesh, &state, &data, 10).unwrap();
        assert!(field.total_global.abs() < 1e-15);
        assert!(field.heat_local.iter().all(|&v| v == 0.0));
        assert!(field.darcy_local.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn interior_source_with_zero_fields_leaves_only_source_term() {
        let mesh = two_triangle_square();
        let state = zero_state(&mesh);
        let p = 1.5;
        let bc = mesh.barycenter(0);
        let data = plain_data(vec![bc], p);
        let heat = heat_indicators(&mesh, &state, &data, 10).unwrap();
        let h = mesh.diameter(0);
        assert!((heat[0] - h.powf((2.0 - p) / p)).abs() < 1e-13);
        assert_eq!(heat[1], 0.0);
    }

    #[test]
    fn source_dispatch_follows_point_location() {
        // Moving the source from the interior onto an edge and a vertex
        // switches the indicator formula.
        let mesh = two_triangle_square();
        let state = zero_state(&mesh);
        let p = 1.5;

        // On the shared diagonal: counted fully in both closed elements.
        let data = plain_data(vec![[0.5, 0.5]], p);
        let heat = heat_indicators(&mesh, &state, &data, 10).unwrap();
        assert!(heat[0] > 0.0 && heat[1] > 0.0);

        // At a vertex: no source term anywhere.
        let data = plain_data(vec![[0.0, 0.0]], p);
        let heat = heat_indicators(&mesh, &state, &data, 10).unwrap();
        assert!(heat.iter().all(|&v| v == 0.0));

        // Unit dispatch cases.
        assert!(source_term_active(LocationKind::InteriorOf(0)));
        assert!(source_term_active(LocationKind::OnEdge(0)));
        assert!(!source_term_active(LocationKind::AtVertex(0)));
    }

    #[test]
    fn hat_function_jump_matches_two_triangle_oracle() {
        // T_h = hat function of vertex 0 on the 2-triangle square, u = 0,
        // kappa = 1: the jump across the diagonal is the difference of the
        // two constant gradients dotted with the unit normal.
        let mesh = two_triangle_square();
        let mut state = zero_state(&mesh);
        state.temperature.coeffs[0] = 1.0;
        let p = 1.5;
        let data = plain_data(vec![], p);
        let heat = heat_indicators(&mesh, &state, &data, 10).unwrap();

        // Oracle: grad on K0 (0,1,2) of hat_0 = (-1, 0); on K1 (0,2,3) it is
        // (0, -1). Diagonal normal = (1,-1)/sqrt(2), jump = (-1,1).(1,-1)/sqrt2
        // = -sqrt(2); |gamma| = sqrt(2).
        let jump = 2.0f64.sqrt();
        let glen = 2.0f64.sqrt();
        let h = mesh.diameter(0);
        let expected = (h * jump.powf(p) * glen).powf(1.0 / p);
        assert!((heat[0] - expected).abs() < 1e-12, "{} vs {expected}", heat[0]);
        assert!((heat[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn darcy_constant_residual_norm() {
        // Constant data on one element: ||R_K|| = |R_K| |K|^{1/2}.
        let mesh = crate::mesh::Mesh::build_topology(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let state = zero_state(&mesh);
        let mut data = plain_data(vec![], 1.5);
        data.body_force = Arc::new(|_| [3.0, 4.0]);
        let darcy = darcy_indicators(&mesh, &state, &data, 10).unwrap();
        let expected = 5.0 * mesh.area(0).sqrt();
        assert!((darcy[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn unit_velocity_jump_across_unit_edge() {
        // u = (1,0) on the left element, (0,0) on the right, across a
        // vertical edge of unit length: ||[[u.n]]||_{L^3} = 1.
        let mesh = crate::mesh::Mesh::build_topology(
            vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [2.0, 0.5]],
            vec![[0, 1, 2], [0, 2, 3], [1, 4, 2]],
        )
        .unwrap();
        // Edge (1, 2) is vertical with unit length, shared by t0 and t2.
        let mut state = zero_state(&mesh);
        state.velocity.coeffs[0] = 1.0; // u_x on t0
        let mut data = plain_data(vec![], 1.5);
        // Cancel the drag residual on t0 so only jumps remain everywhere.
        data.body_force = Arc::new(|x| if x[0] < 1.0 { [2.0, 0.0] } else { [0.0, 0.0] });
        let darcy = darcy_indicators(&mesh, &state, &data, 10).unwrap();

        let e = (0..mesh.n_edges())
            .find(|&e| mesh.edge(e).vertices == [1, 2])
            .unwrap();
        assert!(!mesh.edge(e).is_boundary());
        assert!((mesh.edge_length(e) - 1.0).abs() < 1e-14);
        // For t2: zero residual, single interior side with |[[u.n]]| = 1 and
        // unit length, so the indicator is h^{1/3}.
        let expected_t2 = mesh.diameter(2).powf(1.0 / 3.0);
        assert!((darcy[2] - expected_t2).abs() < 1e-12, "{} vs {expected_t2}", darcy[2]);
        // For t0: two interior sides, cube-sum 1/2 + 1 = 3/2.
        let expected_t0 = (mesh.diameter(0).powf(2.0 / 3.0) * 1.5f64.powf(2.0 / 3.0)).sqrt();
        assert!((darcy[0] - expected_t0).abs() < 1e-12);
    }

    #[test]
    fn estimator_vanishes_on_exactly_captured_solution() {
        // u = 0, p = x + y - 1, f0 = (1,1), f1 = 0: residual and jumps are 0.
        let mesh = unit_square_crisscross();
        let mut state = zero_state(&mesh);
        for v in 0..mesh.n_vertices() {
            let [x, y] = mesh.vertex(v);
            state.pressure.coeffs[v] = x + y - 1.0;
        }
        let mut data = plain_data(vec![[0.5, 0.5]], 1.5);
        data.body_force = Arc::new(|_| [1.0, 1.0]);
        let darcy = darcy_indicators(&mesh, &state, &data, 19).unwrap();
        let total: f64 = darcy.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(total < 1e-10);
    }

    #[test]
    fn total_combines_p_sum_and_two_sum() {
        let heat = vec![1.0, 2.0];
        let darcy = vec![3.0, 4.0];
        let field = total_indicators(heat, darcy, 1.0).unwrap();
        assert!((field.heat_global - 3.0).abs() < 1e-15); // p = 1: plain sum
        assert!((field.darcy_global - 5.0).abs() < 1e-15);
        assert!((field.total_global - 8.0).abs() < 1e-15);
        assert_eq!(field.total_local, vec![4.0, 6.0]);

        assert!(total_indicators(vec![1.0], vec![1.0, 2.0], 1.5).is_err());

        // darcy = 0 -> total equals the heat estimator.
        let field = total_indicators(vec![1.0, 2.0], vec![0.0, 0.0], 2.0).unwrap();
        assert!((field.total_global - field.heat_global).abs() < 1e-15);
    }

    #[test]
    fn unconverged_state_is_rejected() {
        let mesh = unit_square_crisscross();
        let mut state = zero_state(&mesh);
        state.final_increment = 1.0;
        let data = plain_data(vec![], 1.5);
        assert!(matches!(
            heat_indicators(&mesh, &state, &data, 10),
            Err(EstimatorError::UnconvergedState(_, _))
        ));
        assert!(matches!(
            darcy_indicators(&mesh, &state, &data, 10),
            Err(EstimatorError::UnconvergedState(_, _))
        ));
    }

    #[test]
    fn residual_norm_is_homogeneous() {
        // Scaling f0 (with everything else zero) scales the Darcy indicator
        // linearly.
        let mesh = unit_square_crisscross();
        let state = zero_state(&mesh);
        let mut data = plain_data(vec![], 1.5);
        data.body_force = Arc::new(|x| [x[0], -x[1]]);
        let base = darcy_indicators(&mesh, &state, &data, 10).unwrap();
        data.body_force = Arc::new(|x| [3.0 * x[0], -3.0 * x[1]]);
        let scaled = darcy_indicators(&mesh, &state, &data, 10).unwrap();
        for (b, s) in base.iter().zip(&scaled) {
            assert!((s - 3.0 * b).abs() < 1e-12 * s.abs().max(1.0));
        }
    }
}
