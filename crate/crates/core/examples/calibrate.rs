//! Full-scale dry runs of the statistically delicate acceptance settings.
//! Not part of the test suite; used to pin tolerances and parameter choices.

use rde_core::limits;
use rde_core::maps::{PiecewiseMap, RandomSystem};
use rde_core::montecarlo::{self, QuenchMode, SimulationPlan};
use rde_core::observable::Observable;
use rde_core::transfer::{annealed_operator, stationary_density};
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let beta23 = Arc::new(
        RandomSystem::new(
            vec![PiecewiseMap::beta(2).unwrap(), PiecewiseMap::beta(3).unwrap()],
            vec![0.5, 0.5],
        )
        .unwrap(),
    );
    let doubling = Arc::new(RandomSystem::single(PiecewiseMap::beta(2).unwrap()));
    let cos1 = Arc::new(Observable::cosine(1, 1.0));
    let uniform = Arc::new(rde_core::transfer::StationaryDensity::uniform(1024));

    if which == "all" || which == "clt" {
        let t0 = Instant::now();
        // concentrated BV initial measure: uniform on [0, 1/4)
        let mut cells = vec![0.0; 4];
        cells[0] = 4.0;
        let nu = Arc::new(rde_core::transfer::StationaryDensity::from_cell_values(cells).unwrap());
        let plan = SimulationPlan::new(beta23.clone(), cos1.clone(), 10_000, 100_000, 0xC11)
            .with_initial_law(rde_core::montecarlo::InitialLaw::Stationary(nu));
        let rep = montecarlo::clt_experiment(&plan, 0.5).unwrap();
        println!("[clt {:6.1}s] ks={:?}", t0.elapsed().as_secs_f64(), rep.details["ks"]);
        println!("         ks_sqrt_n={:?}", rep.details["ks_sqrt_n"]);
        println!("         var={:?} passed={}", rep.details["sample_variance"], rep.passed);
    }

    if which == "all" || which == "ldp" {
        let t0 = Instant::now();
        let rate = limits::rate_function(&doubling, &cos1, 1024, 0.5, 201).unwrap();
        for eps in [0.05f64, 0.1] {
            let e = rate.eval(eps).unwrap();
            println!(
                "[ldp] c({eps}) = {:.6}  theta* = {:.4} curvature = {:.4} quad = {:.6}",
                e.c,
                e.theta_star,
                e.curvature,
                eps * eps / (2.0 * rate.sigma2())
            );
        }
        let plan = SimulationPlan::new(doubling.clone(), cos1.clone(), 400, 1_000_000, 0x1D9);
        let rep = montecarlo::ldp_experiment(&plan, &[0.05, 0.1], &rate, &[]).unwrap();
        println!("[ldp {:6.1}s] annealed = {}", t0.elapsed().as_secs_f64(), rep.details["annealed"]);
        for b in &rep.band {
            println!("  band {} target {:.6} value {:.6} passed {}", b.name, b.target, b.value, b.passed);
        }
    }

    if which == "all" || which == "ldpq" {
        let t0 = Instant::now();
        let rate = limits::rate_function(&beta23, &cos1, 1152, 0.5, 201).unwrap();
        let plan = SimulationPlan::new(beta23.clone(), cos1.clone(), 400, 500_000, 0x1DA);
        let seeds: Vec<u64> = (101..111).collect();
        let rep = montecarlo::ldp_experiment(&plan, &[0.1], &rate, &seeds).unwrap();
        println!("[ldpq {:6.1}s] quenched = {}", t0.elapsed().as_secs_f64(), rep.details["quenched"]);
        for b in rep.band.iter().filter(|b| b.name.starts_with("quenched")) {
            println!("  {} target {:.6} value {:.6} passed {}", b.name, b.target, b.value, b.passed);
        }
    }

    if which == "all" || which == "shrink" {
        for scale in [0.3f64] {
            let t0 = Instant::now();
            let rep = montecarlo::shrinking_target_clt(
                &beta23, 0.3, 0.5, scale, 100_000, 30_000, 100_000, 0x57c, &uniform,
            );
            match rep {
                Ok(rep) => println!(
                    "[shrink {:5.1}s] scale={scale} a_n2={} e_n={} ratio={:.4} ks={:.4} passed={}",
                    t0.elapsed().as_secs_f64(),
                    rep.details["a_n2"],
                    rep.details["e_n"],
                    rep.empirical_estimate[1],
                    rep.details["ks"],
                    rep.passed
                ),
                Err(e) => println!("[shrink] scale={scale} error: {e}"),
            }
        }
    }

    if which == "all" || which == "er" {
        let t0 = Instant::now();
        let rate = limits::rate_function(&doubling, &cos1, 1024, 0.5, 201).unwrap();
        let rep = montecarlo::erdos_renyi_experiment(
            &doubling,
            &cos1,
            0.2,
            &[10_000, 100_000, 1_000_000],
            100,
            &rate,
            0xE12,
            &uniform,
        )
        .unwrap();
        println!(
            "[er {:6.1}s] means={:?} windows={:?} passed={}",
            t0.elapsed().as_secs_f64(),
            rep.details["windowed_max_means"],
            rep.params["windows"],
            rep.passed
        );
    }

    if which == "all" || which == "conc" {
        let t0 = Instant::now();
        let rep = montecarlo::concentration_experiment(
            &beta23,
            &[1_000, 10_000, 100_000],
            10_000,
            &[0.45, 0.55, 0.65, 0.75, 0.9, 1.05, 1.2],
            0xC0C,
            &uniform,
        );
        match rep {
            Ok(rep) => {
                println!(
                    "[conc {:6.1}s] mean_scaled={:?}",
                    t0.elapsed().as_secs_f64(),
                    rep.details["mean_kappa_sqrt_n"]
                );
                println!("  tails={}", rep.details["tails"]);
                println!("  C={} r2={} passed={}", rep.details["fitted_c"], rep.details["fit_r2"], rep.passed);
            }
            Err(e) => println!("[conc] error: {e}"),
        }
    }

    if which == "all" || which == "q7" {
        let t0 = Instant::now();
        let sigma2_hat = limits::doubled_variance(&beta23, &cos1, 128, 200).unwrap();
        println!("[q7] doubled variance at N=128: {sigma2_hat:.6}");
        let seeds: Vec<u64> = (201..211).collect();
        let rep = montecarlo::quenched_clt_experiment(
            &beta23, &cos1, 0.5, sigma2_hat, 10_000, 20_000, &seeds, 0x9c7, &uniform, false,
        )
        .unwrap();
        println!(
            "[q7 {:6.1}s] per_seed_ks={} passed={}",
            t0.elapsed().as_secs_f64(),
            rep.details["per_seed_ks"],
            rep.passed
        );
        println!("  cf_constant={} ratio={}", rep.details["cf_constant"], rep.details["variance_ratio_doubled_over_annealed"]);
    }

    if which == "all" || which == "llt" {
        let t0 = Instant::now();
        let scan = limits::aperiodicity_scan(&doubling, &cos1, &[0.5, 1.0, 2.0, 3.0], 256).unwrap();
        let plan = SimulationPlan::new(doubling.clone(), cos1.clone(), 10_000, 1_000_000, 0x117);
        let rep = montecarlo::local_limit_experiment(&plan, (-0.1, 0.1), 0.5, &scan).unwrap();
        println!(
            "[llt {:6.1}s] values={:?} target={:.6} passed={}",
            t0.elapsed().as_secs_f64(),
            rep.details["scaled_probability"],
            rep.spectral_prediction[0],
            rep.passed
        );
    }

    if which == "all" || which == "sbc" {
        let t0 = Instant::now();
        let op = annealed_operator(&beta23, 1024).unwrap();
        let h = Arc::new(stationary_density(&op, 1e-12, 100_000).unwrap());
        let targets = montecarlo::TargetFamily::NestedBalls { center: 0.3, gamma: 0.5, scale: 0.2 };
        let rep = montecarlo::borel_cantelli_experiment(
            &beta23, &targets, 100_000, 1_000, 0x5bc, QuenchMode::Annealed, &h,
        )
        .unwrap();
        println!(
            "[sbc {:6.1}s] mean={:.5} sd={:.5} passed={}",
            t0.elapsed().as_secs_f64(),
            rep.empirical_estimate[0],
            rep.details["ratio_sd"],
            rep.passed
        );
    }
}
