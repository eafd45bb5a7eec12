use archrod::analytic::{Scalar, ScalarFn, TrigTerm};
use archrod::energy::{gauge_transformed, DiscreteModel, GaugeParams, LoadCase, RodState};
use archrod::geometry::{Curve, CurveSpec, FrameSpec};
use archrod::material::{IsotropicMaterial, MaterialField};
use archrod::section::PolygonSection;
use archrod::solver::*;

fn main() {
    let curve = Curve::new(&CurveSpec {
        length: 1.0,
        theta2: Scalar::poly(&[0.0, 0.0, 0.3]),
        theta3: Scalar::Zero,
        frame: FrameSpec::Curvature,
    })
    .unwrap();
    let sq = PolygonSection::rectangle(1.0, 1.0).unwrap();
    let props = sq.moments();
    let mat = MaterialField::Homogeneous(IsotropicMaterial::new(0.0, 0.5).unwrap());
    let model = DiscreteModel::with_closed_form(curve, &props, &mat, 0.1406, 24, 5).unwrap();
    let loads = LoadCase {
        f2: ScalarFn::Trig(vec![TrigTerm { sin: 0.0, cos: 0.01, omega: 2.0 * std::f64::consts::PI }]),
        f3: ScalarFn::Zero,
    };
    let opts = SolveOptions::default();
    let (s1, r1) = minimize(&model, &loads, BoundaryCondition::Free, &opts).unwrap();
    let g = GaugeParams { cu: 0.3, c2: -0.2, c3: 0.15, cw: 0.4, b2: 0.1, b3: -0.05 };
    let start = gauge_transformed(&RodState::zeros(model.n_nodes()), &model, &g);
    let (s2, r2) = minimize_from(&model, &loads, BoundaryCondition::Free, &opts, &start).unwrap();
    println!("r1 conv={} it={} gnorm={:.2e} tol={:.2e}", r1.converged, r1.iterations, r1.final_gradient_norm, r1.gradient_tolerance_used);
    println!("r2 conv={} it={} gnorm={:.2e} tol={:.2e}", r2.converged, r2.iterations, r2.final_gradient_norm, r2.gradient_tolerance_used);
    for i in [0, 1, 2, 10, 25, 50] {
        let x = (i as f64 / 50.0).min(1.0 - 1e-12);
        let e1 = model.strain_measures(&s1, x).as_vector();
        let e2 = model.strain_measures(&s2, x).as_vector();
        println!("x={x:.3} diff={:.3e} |e1|={:.3e}  e1={:?}", (e1 - e2).norm(), e1.norm(), e1.as_slice());
    }
    println!("E1={:.6e} E2={:.6e}", model.total_energy(&s1, &loads), model.total_energy(&s2, &loads));
}
