//! Fixtures shared by the benchmarks.

use dcb_arena::{Bss, Deployment, InterferenceMatrix};

/// Four 50 Mbps BSSs with the toy interference matrix.
pub fn toy4() -> Deployment {
    let bss = ["A", "B", "C", "D"]
        .iter()
        .map(|id| Bss::new(*id, 50.0, 12000))
        .collect();
    let m = InterferenceMatrix::new(vec![
        vec![0, 40, 20, 80],
        vec![40, 0, 40, 20],
        vec![20, 40, 0, 80],
        vec![80, 20, 80, 0],
    ])
    .expect("valid matrix");
    Deployment::with_matrix(4, bss, m).expect("valid deployment")
}
