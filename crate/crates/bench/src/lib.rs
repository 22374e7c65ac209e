//! Shared fixtures for the benchmarks.

use perisys::model::{Coefficient, ProblemConfig};
use perisys::{Domain, Grid, ProblemSpec};

/// Cooperative problem with constant coefficients on the unit interval.
pub fn cooperative(cells: usize, steps: usize) -> ProblemSpec {
    let c = ProblemConfig {
        p: 1.5,
        q: 1.5,
        m: 2.0,
        n: 2.0,
        alpha: 2.0,
        tau: [0.25, 0.5, 0.25, 0.5],
        period: 1.0,
        domain: Domain::Interval { length: 1.0 },
        a: Coefficient::Constant(5.0),
        b: Coefficient::Constant(5.0),
        k1: Coefficient::Constant(1.0),
        k2: Coefficient::Constant(0.1),
        k3: Coefficient::Constant(0.1),
        k4: Coefficient::Constant(1.0),
        epsilon: 0.1,
        envelope: None,
    };
    let grid = Grid::interval(1.0, cells).expect("grid");
    ProblemSpec::build(&c, grid, steps).expect("spec")
}
