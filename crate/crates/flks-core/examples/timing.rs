use std::time::Instant;

use flks_core::{
    drift_c02_direct, solve_equilibrium, Mesh, SolverConfig, TumblingModel,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let l0: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let i: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(200);
    let dt_mult: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let mesh = Mesh::build(1.0, i, i).unwrap();
    let model = TumblingModel::new(l0, 0.0).unwrap();
    let base_dt = mesh.dy() / (2.0 * mesh.g());
    let cfg = SolverConfig {
        dt: Some(base_dt * dt_mult),
        ..Default::default()
    };
    let t0 = Instant::now();
    let (q0, rep) = solve_equilibrium(&mesh, &model, &cfg).unwrap();
    let dt_s = t0.elapsed().as_secs_f64();
    let c02 = drift_c02_direct(&mesh, &model, &q0).unwrap();
    println!(
        "l0={l0} I={i} dtx{dt_mult}: steps={} converged={} wall={dt_s:.2}s per_step={:.3}ms c02={c02:.12e} residual={:.3e}",
        rep.steps_taken,
        rep.converged,
        1e3 * dt_s / rep.steps_taken as f64,
        rep.final_residual,
    );
}
