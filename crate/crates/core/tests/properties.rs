use proptest::prelude::*;

use qflow::energy;
use qflow::grid::ops;
use qflow::grid::{Boundary, GridSpec, MatrixField, QField, VelocityField};
use qflow::solver::{self, SolverConfig};
use qflow::tensor::{self, Dim, MaterialParams, Matrix, QTensor, ViscositySpec};

fn dim_strategy() -> impl Strategy<Value = Dim> {
    prop_oneof![Just(Dim::Two), Just(Dim::Three)]
}

fn unit() -> impl Strategy<Value = f64> {
    -1.0..=1.0f64
}

fn matrix(dim: Dim, e: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(dim);
    for i in 0..dim.n() {
        for j in 0..dim.n() {
            m.set(i, j, e[i * 3 + j]);
        }
    }
    m
}

fn qtensor(dim: Dim, c: &[f64]) -> QTensor {
    QTensor::from_coeffs(dim, &c[..dim.ncomp()]).unwrap()
}

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (4usize..10, 4usize..10, 0.5..2.0f64, 0.5..2.0f64, prop_oneof![Just(Boundary::Dirichlet0), Just(Boundary::Periodic)])
        .prop_map(|(nx, ny, lx, ly, bc)| GridSpec::new(nx, ny, lx, ly, bc).unwrap())
}

/// Deterministic pseudo-random values in [-1, 1).
fn fill(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .collect()
}

fn random_velocity(g: GridSpec, seed: u64) -> VelocityField {
    let mut u = VelocityField::zeros(g);
    u.data = fill(2 * g.ncell(), seed);
    u.enforce_walls();
    u
}

fn random_q(g: GridSpec, dim: Dim, seed: u64) -> QField {
    let mut q = QField::zeros(g, dim);
    for (m, c) in q.comps.iter_mut().enumerate() {
        *c = fill(g.ncell(), seed + 31 * m as u64);
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corotation_pairs_with_commutator(dim in dim_strategy(), g in prop::array::uniform9(unit()),
                                        q in prop::array::uniform5(unit()), s in prop::array::uniform9(unit())) {
        let grad = matrix(dim, &g);
        let q = qtensor(dim, &q);
        let mut gs = matrix(dim, &s);
        gs = (gs + gs.transpose()).scale(0.5);
        let qm = q.to_matrix();
        let lhs = tensor::corotation(&grad, &q).to_matrix().frob(&gs);
        let rhs = grad.frob(&(gs * qm - qm * gs));
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn corotation_is_symmetric_traceless(dim in dim_strategy(), g in prop::array::uniform9(unit()),
                                         q in prop::array::uniform5(unit())) {
        let grad = matrix(dim, &g);
        let q = qtensor(dim, &q);
        let w = tensor::vorticity(&grad);
        let raw = w * q.to_matrix() - q.to_matrix() * w;
        prop_assert!(raw.trace().abs() <= 1e-12);
        prop_assert!((raw - raw.transpose()).max_abs() <= 1e-12);
        prop_assert!((tensor::corotation(&grad, &q).to_matrix() - raw).max_abs() <= 1e-12);
        prop_assert_eq!(tensor::corotation(&grad, &q).reconstructed_trace(), 0.0);
    }

    #[test]
    fn stretch_plus_vorticity_is_gradient(dim in dim_strategy(), g in prop::array::uniform9(unit())) {
        let grad = matrix(dim, &g);
        let d = tensor::stretch(&grad);
        let w = tensor::vorticity(&grad);
        prop_assert!((d + w - grad).max_abs() <= 1e-15);
        prop_assert_eq!(d.transpose(), d);
        prop_assert_eq!(w.transpose(), -w);
    }

    #[test]
    fn sigma_is_skew(dim in dim_strategy(), a in prop::array::uniform5(unit()), b in prop::array::uniform5(unit())) {
        let s = tensor::sigma_stress(&qtensor(dim, &a), &qtensor(dim, &b));
        prop_assert!((s + s.transpose()).max_abs() <= 1e-12);
    }

    #[test]
    fn bulk_gradient_matches_differences(dim in dim_strategy(), q in prop::array::uniform5(unit()),
                                         a in unit(), b in unit(), c in 0.1..1.0f64) {
        let p = MaterialParams { a, b, c, lambda: 1.0, gamma: 1.0 };
        let q = qtensor(dim, &q);
        let grad = tensor::grad_bulk_energy(&q, &p);
        // directional derivatives along the minimal basis stay traceless
        let h = 1e-6;
        for m in 0..dim.ncomp() {
            let mut e = [0.0; 5];
            e[m] = 1.0;
            let e = qtensor(dim, &e);
            let df = (tensor::bulk_energy(&(q + e.scale(h)), &p) - tensor::bulk_energy(&(q - e.scale(h)), &p)) / (2.0 * h);
            let exact = grad.frob(&e.to_matrix());
            prop_assert!((df - exact).abs() <= 1e-6 * grad.max_abs().max(1.0), "{} vs {}", df, exact);
        }
        let l = tensor::lower_order(&q, &p).to_matrix();
        let iso = Matrix::identity(dim).scale(b / dim.n() as f64 * q.norm_sq());
        prop_assert!((l + iso + grad).max_abs() <= 1e-12);
    }

    #[test]
    fn lower_order_is_traceless(dim in dim_strategy(), q in prop::array::uniform5(unit())) {
        let l = tensor::lower_order(&qtensor(dim, &q), &MaterialParams::unit());
        prop_assert!(l.to_matrix().trace().abs() <= 1e-12);
    }

    #[test]
    fn viscosity_stays_in_bounds(dim in dim_strategy(), q in prop::array::uniform5(-3.0..3.0f64),
                                 nu0 in 0.1..2.0f64, nu1 in 0.0..2.0f64) {
        let spec = ViscositySpec::Saturating { nu0, nu1 };
        let v = spec.eval(&qtensor(dim, &q));
        prop_assert!(v >= nu0 && v <= nu0 + nu1);
    }

    #[test]
    fn bulk_energy_is_bounded_below(dim in dim_strategy(), q in prop::array::uniform5(-3.0..3.0f64),
                                    a in -1.0..1.0f64, b in -2.0..2.0f64, c in 0.1..1.0f64) {
        let p = MaterialParams { a, b, c, lambda: 1.0, gamma: 1.0 };
        prop_assert!(tensor::bulk_energy(&qtensor(dim, &q), &p) >= -tensor::bulk_energy_lower_bound(&p) - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derivative_stencils_vanish_on_constants(g in grid_strategy(), c in unit(), seed in any::<u64>()) {
        let f = vec![c; g.ncell()];
        let mut out = vec![1.0; g.ncell()];
        if g.periodic() {
            ops::laplacian(&g, &f, &mut out);
            prop_assert!(out.iter().all(|x| x.abs() <= 1e-12));
        }
        ops::pressure_laplacian(&g, &f, &mut out);
        prop_assert!(out.iter().all(|x| x.abs() <= 1e-9));
        let q = QField::from_fn(g, Dim::Three, |_, _| QTensor::from_coeffs(Dim::Three, &[c, -c, 0.5 * c, c, 0.2]).unwrap());
        let u = random_velocity(g, seed);
        prop_assert_eq!(ops::convect_q(&u, &q).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn summation_by_parts(g in grid_strategy(), seed in any::<u64>()) {
        let f = fill(g.ncell(), seed);
        let p = fill(g.ncell(), seed ^ 1);
        let mut lap = vec![0.0; g.ncell()];
        ops::laplacian(&g, &f, &mut lap);
        let lhs: f64 = lap.iter().zip(&p).map(|(a, b)| a * b).sum::<f64>() * g.area();
        let rhs = -ops::dirichlet_form(&g, &f, &p);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1.0));

        // <div F, u> = -<F, grad u>
        let u = random_velocity(g, seed ^ 2);
        let mut f = MatrixField::zeros(g, Dim::Two);
        let vals = fill(4 * g.ncell(), seed ^ 3);
        for (k, m) in f.data.iter_mut().enumerate() {
            *m = Matrix::from_planar(Dim::Two, [[vals[4 * k], vals[4 * k + 1]], [vals[4 * k + 2], vals[4 * k + 3]]]);
        }
        let a = ops::div_matrix(&f).dot(&u);
        let b = -f.dot(&ops::velocity_gradient(&u, Dim::Two));
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
    }

    #[test]
    fn advection_pairs_with_elastic_force(g in grid_strategy(), seed in any::<u64>(), dim in dim_strategy()) {
        let u = random_velocity(g, seed);
        let q = random_q(g, dim, seed ^ 5);
        let h = random_q(g, dim, seed ^ 7);
        let a = ops::convect_q(&u, &q).unwrap().dot(&h);
        let b = -ops::elastic_force(&q, &h).unwrap().dot(&u);
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()).max(1.0));
        let c = ops::convect_u(&u).dot(&u);
        prop_assert!(c.abs() <= 1e-10 * u.dot(&u).max(1.0) / g.area());
    }

    #[test]
    fn viscous_operator_is_symmetric_and_dissipative(g in grid_strategy(), seed in any::<u64>()) {
        let nu: Vec<f64> = fill(g.ncell(), seed).iter().map(|x| 1.0 + 0.5 * x).collect();
        let a = random_velocity(g, seed ^ 11);
        let b = random_velocity(g, seed ^ 13);
        let ab = ops::viscous_apply(&a, &nu).dot(&b);
        let ba = ops::viscous_apply(&b, &nu).dot(&a);
        prop_assert!((ab - ba).abs() <= 1e-10 * ab.abs().max(1.0));
        prop_assert!(ops::viscous_apply(&a, &nu).dot(&a) <= 1e-12);
    }

    #[test]
    fn projection_is_an_orthogonal_projector(g in grid_strategy(), seed in any::<u64>()) {
        let cfg = SolverConfig::default();
        let v = random_velocity(g, seed);
        let p1 = solver::helmholtz_project(&v, &cfg).unwrap();
        prop_assert!(p1.residual <= cfg.tol);
        let p2 = solver::helmholtz_project(&p1.field, &cfg).unwrap();
        prop_assert!(p2.field.sub(&p1.field).max_abs() <= 10.0 * cfg.tol * v.max_abs().max(1.0));
        let gq = ops::grad_faces(&p1.potential);
        prop_assert!(p1.field.dot(&gq).abs() <= 10.0 * cfg.tol * v.norm() * gq.norm() + 1e-14);
        prop_assert!(p1.stats.residual <= p1.stats.initial_residual.max(cfg.tol));
    }

    #[test]
    fn energies_are_nonnegative(g in grid_strategy(), seed in any::<u64>(), dim in dim_strategy()) {
        let u = random_velocity(g, seed);
        let q = random_q(g, dim, seed ^ 17);
        let p = MaterialParams::unit();
        prop_assert!(energy::kinetic_energy(&u) >= 0.0);
        let spec = ViscositySpec::Saturating { nu0: 0.5, nu1: 1.0 };
        prop_assert!(energy::dissipation_b(&u, &q, &p, &spec).unwrap() >= 0.0);
        let p2 = MaterialParams { a: -1.0, b: 1.5, ..p };
        prop_assert!(energy::free_energy(&q, &p2) >= energy::free_energy_lower_bound(&q, &p2) - 1e-12);
    }
}
