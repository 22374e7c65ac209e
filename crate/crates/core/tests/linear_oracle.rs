//! With `p = 2`, `m = 1` and no kernels the stepper is linear, so one
//! period equals a power of a dense one-step matrix.

use nalgebra::{DMatrix, DVector};
use perisys::evolution::StepperConfig;
use perisys::grid::{Domain, Field, Grid, Trajectory};
use perisys::model::{Coefficient, ProblemConfig, ProblemSpec};
use perisys::periodic::period_map;

fn linear_spec(cells: usize, steps: usize, a: f64, eps: f64) -> ProblemSpec {
    let zero = Coefficient::Constant(0.0);
    let c = ProblemConfig {
        p: 2.0,
        q: 2.0,
        m: 1.0,
        n: 1.0,
        alpha: 2.0,
        tau: [0.25; 4],
        period: 1.0,
        domain: Domain::Interval { length: 1.0 },
        a: Coefficient::Constant(a),
        b: Coefficient::Constant(a),
        k1: zero,
        k2: zero,
        k3: zero,
        k4: zero,
        epsilon: eps,
        envelope: None,
    };
    ProblemSpec::build(&c, Grid::interval(1.0, cells).unwrap(), steps).unwrap()
}

#[test]
fn period_map_equals_matrix_power() {
    let (cells, steps, a, eps) = (20, 40, 0.5, 0.1);
    let spec = linear_spec(cells, steps, a, eps);
    let h = 1.0 / cells as f64;
    let dt = spec.dt();
    let n = cells - 1;
    let w = eps + 1.0;
    let mut lhs = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        lhs[(i, i)] = h / dt + 2.0 * w / h;
        if i + 1 < n {
            lhs[(i, i + 1)] = -w / h;
            lhs[(i + 1, i)] = -w / h;
        }
    }
    let rhs = DMatrix::<f64>::identity(n, n) * (h * (1.0 / dt + a));
    let step = lhs.try_inverse().unwrap() * rhs;
    let u0 = Field::sine_bump(&spec.grid, 1.0);
    let x0 = DVector::from_iterator(n, u0.values()[1..cells].iter().copied());
    let want = step.pow(steps as u32) * x0;

    let mut hist = Trajectory::constant(spec.grid, dt, steps, &u0, &u0).unwrap();
    hist.mark_periodic();
    let (u, v) = period_map(&u0, &u0, &hist, &spec, &StepperConfig::for_spec(&spec)).unwrap();
    let scale = want.amax();
    for i in 0..n {
        assert!((u.values()[i + 1] - want[i]).abs() <= 1e-10 * scale);
        assert!((v.values()[i + 1] - want[i]).abs() <= 1e-10 * scale);
    }
    assert_eq!(u.values()[0], 0.0);
    assert_eq!(u.values()[cells], 0.0);
}
