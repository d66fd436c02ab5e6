//! The core is generic over the scalar; exercise the `f32` path end to end.

use fpctrl::domain::ProblemSpec;
use fpctrl::field::Field;
use fpctrl::objective::{Discretization, Problem};
use fpctrl::optimizer::{solve_pgd, OptimizerConfig, StopReason};

#[test]
fn single_precision_pipeline() {
    let mut spec = ProblemSpec::<f32>::diffusion(0.1, &[1.0], 1.0);
    spec.control_field = vec![Field::parse("x*(1-x)").unwrap()];
    spec.rho_q = Field::parse("1 + 0.2*cos(pi*x)").unwrap();
    spec.alpha_q = 1.0;
    spec.beta = vec![0.1];
    let p = Problem::new(&spec, &Discretization::new(&[8], 10)).unwrap();
    let u = p.constant_control(0.25);
    let rho = p.state(&u).unwrap();
    for k in 0..=p.nt() {
        let m = fpctrl::mass(&p.ops.mass, &rho, k).unwrap();
        assert!((m - 1.0).abs() <= 1e-5);
    }
    let lin = p.linearize(&u).unwrap();
    let v = p.constant_control(1.0);
    let eps = 1e-2f32;
    let fd = (p.reduced_cost(&u.add_scaled(eps, &v)).unwrap()
        - p.reduced_cost(&u.add_scaled(-eps, &v)).unwrap())
        / (2.0 * eps);
    let exact = lin.gradient.dot(&v);
    assert!((fd - exact).abs() <= 1e-3 * exact.abs().max(1.0));
    let cfg = OptimizerConfig::<f32> {
        tol_pg: 1e-4,
        ..Default::default()
    };
    let r = solve_pgd(&p, &p.zero_control(), &cfg).unwrap();
    assert_eq!(r.stop, StopReason::Converged);
}
