use std::time::Instant;

use flks_core::{
    check_flux_identity, check_symmetry, diffusion_d02, drift_c02_corrector, drift_c02_direct,
    fit_blowup_exponent, fit_decay_exponent, mean_velocity, solve_corrector, solve_equilibrium,
    source_diffusion, source_drift, total_mass, FitWindow, Mesh, SolverConfig, TumblingModel,
};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let l0: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2.0);
    let chi: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.0);
    let g: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let i: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(200);
    let dt_mult: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let mesh = Mesh::build(g, i, i).unwrap();
    let model = TumblingModel::new(l0, chi).unwrap();
    let base_dt = mesh.dy() / (2.0 * mesh.g());
    let cfg = SolverConfig {
        dt: Some(base_dt * dt_mult),
        ..Default::default()
    };

    let t0 = Instant::now();
    let (q0, rep) = solve_equilibrium(&mesh, &model, &cfg).unwrap();
    println!(
        "eq: steps={} wall={:.1}s mass_dev={:.2e} min={:.2e}",
        rep.steps_taken,
        t0.elapsed().as_secs_f64(),
        rep.mass_history_max_deviation,
        q0.min_interior()
    );
    println!("  M={:.15} sym={:.3e} flux={:.3e}", total_mass(&mesh, &q0), check_symmetry(&mesh, &q0), check_flux_identity(&mesh, &q0));

    let v0 = mean_velocity(&mesh, &q0);
    let c02_direct = if chi == 0.0 {
        Some(drift_c02_direct(&mesh, &model, &q0).unwrap())
    } else {
        None
    };

    let fits_only = std::env::var("FITS_ONLY").is_ok();
    if fits_only {
        run_fits(&mesh, &q0, g);
        return;
    }
    let t1 = Instant::now();
    let drift = source_drift(&mesh, &model, &q0);
    let (h, hrep) = solve_corrector(&mesh, &model, &q0, &drift, &cfg).unwrap();
    let c02_corr = drift_c02_corrector(&mesh, &h, v0);
    println!(
        "drift corrector: steps={} wall={:.1}s converged={} meandev={:.2e}",
        hrep.steps_taken,
        t1.elapsed().as_secs_f64(),
        hrep.converged,
        hrep.mass_history_max_deviation
    );

    let t2 = Instant::now();
    let diff = source_diffusion(&mesh, &q0, v0);
    let (hd, drep) = solve_corrector(&mesh, &model, &q0, &diff, &cfg).unwrap();
    let d02 = diffusion_d02(&mesh, &hd, v0);
    println!(
        "diff corrector: steps={} wall={:.1}s converged={}",
        drep.steps_taken,
        t2.elapsed().as_secs_f64(),
        drep.converged
    );

    println!("v0={v0:.6e}");
    match c02_direct {
        Some(d) => println!(
            "c02 direct={d:.10e} corr={c02_corr:.10e} rel_diff={:.3e}",
            (d - c02_corr).abs() / c02_corr.abs()
        ),
        None => println!("c02 corr={c02_corr:.10e}"),
    }
    println!("D02={d02:.6e}");

    run_fits(&mesh, &q0, g);
}

fn run_fits(mesh: &Mesh, q0: &flks_core::GridField, g: f64) {
    let windows = [
        FitWindow::default_for(&mesh),
        FitWindow {
            min_distance: 3.0 * mesh.dy(),
            max_distance: g / 50.0,
        },
        FitWindow {
            min_distance: 3.0 * mesh.dy(),
            max_distance: g / 20.0,
        },
        FitWindow {
            min_distance: g / 100.0,
            max_distance: g / 10.0,
        },
        FitWindow {
            min_distance: g / 10.0,
            max_distance: g / 4.0,
        },
        FitWindow {
            min_distance: 3.0 * mesh.dy(),
            max_distance: g / 100.0,
        },
        FitWindow {
            min_distance: mesh.dy(),
            max_distance: g / 100.0,
        },
        FitWindow {
            min_distance: mesh.dy(),
            max_distance: g / 50.0,
        },
    ];
    for v_fixed in [0.25, 0.5, 0.75] {
        for w in windows {
            match fit_blowup_exponent(mesh, q0, v_fixed, w) {
                Ok(f) => print!(
                    "blowup v={v_fixed} [{:.1e},{:.1e}]: p={:+.4} r2={:.5} n={:4}   ",
                    w.min_distance, w.max_distance, f.exponent, f.r_squared, f.n_points
                ),
                Err(e) => print!("blowup v={v_fixed}: {e}   "),
            }
            match fit_decay_exponent(mesh, q0, v_fixed, w) {
                Ok(f) => println!(
                    "decay: a={:.4} r2={:.5} n={:4}",
                    f.exponent, f.r_squared, f.n_points
                ),
                Err(e) => println!("decay: {e}"),
            }
        }
    }
}
