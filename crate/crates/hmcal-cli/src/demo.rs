//! The packaged demo: calibrates the builtin test simulator against the
//! synthetic target at (0.5, 0.5) with the default algorithmic parameters
//! and writes plot-ready data for the target/sample curves, the
//! per-iteration screening maps, and the best-vs-target overlay.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;

use hmcal::bundle::fmt_f64;
use hmcal::histmatch::{self, HmConfig};
use hmcal::rng::{rng_for, Stream};
use hmcal::sim::{DesignPoint, SimulatorSpec};

use crate::AppError;

pub fn cmd_demo(seed: Option<u64>, out: &Path) -> Result<(), AppError> {
    let seed = seed.unwrap_or(0);
    let sim = SimulatorSpec::builtin();
    let x0 = DesignPoint::new(vec![0.5, 0.5]).expect("unit point");
    let target = sim.evaluate(&x0).map_err(|e| AppError::Simulator(e.to_string()))?;

    std::fs::create_dir_all(out).map_err(|e| AppError::Io(format!("creating {}: {e}", out.display())))?;
    let create = |name: &str| -> Result<BufWriter<File>, AppError> {
        File::create(out.join(name))
            .map(BufWriter::new)
            .map_err(|e| AppError::Io(format!("creating {name}: {e}")))
    };
    let wio = |e: std::io::Error| AppError::Io(format!("writing demo data: {e}"));

    // target + a few random model outputs
    let mut rng = rng_for(seed, Stream::General, 0);
    let samples: Vec<(DesignPoint, Vec<f64>)> = (0..5)
        .map(|_| {
            let p = DesignPoint::new(vec![rng.random::<f64>(), rng.random::<f64>()]).expect("unit");
            let s = sim.evaluate(&p).expect("builtin evaluation");
            let values = s.values().to_vec();
            (p, values)
        })
        .collect();
    let mut f = create("fig1_curves.csv")?;
    write!(f, "t,target").map_err(wio)?;
    for k in 1..=samples.len() {
        write!(f, ",sample{k}").map_err(wio)?;
    }
    writeln!(f).map_err(wio)?;
    for (i, &t) in sim.grid.values().iter().enumerate() {
        write!(f, "{},{}", fmt_f64(t), fmt_f64(target.values()[i])).map_err(wio)?;
        for (_, values) in &samples {
            write!(f, ",{}", fmt_f64(values[i])).map_err(wio)?;
        }
        writeln!(f).map_err(wio)?;
    }
    f.flush().map_err(wio)?;

    // the calibration itself, with screening snapshots captured per iteration
    let cfg = HmConfig {
        seed,
        ..HmConfig::default()
    };
    let mut screen_error: Option<AppError> = None;
    let result = histmatch::run_observed(&sim, &target, &cfg, &mut |snap| {
        if screen_error.is_some() {
            return;
        }
        let write_snapshot = || -> Result<(), AppError> {
            let mut f = create(&format!("fig2_iter{}_screen.csv", snap.iteration))?;
            let d = snap.test_points.first().map_or(0, |p| p.dim());
            let tk = snap.implausibility.first().map_or(0, |row| row.len());
            for k in 1..=d {
                write!(f, "{}x{k}", if k == 1 { "" } else { "," }).map_err(wio)?;
            }
            for j in 1..=tk {
                write!(f, ",I{j}").map_err(wio)?;
            }
            writeln!(f, ",Imax,plausible").map_err(wio)?;
            for ((p, irow), &keep) in snap
                .test_points
                .iter()
                .zip(snap.implausibility)
                .zip(snap.plausible)
            {
                for (k, c) in p.coords().iter().enumerate() {
                    write!(f, "{}{}", if k == 0 { "" } else { "," }, fmt_f64(*c)).map_err(wio)?;
                }
                for v in irow {
                    write!(f, ",{}", fmt_f64(*v)).map_err(wio)?;
                }
                writeln!(f, ",{},{}", fmt_f64(histmatch::i_max(irow)), keep).map_err(wio)?;
            }
            f.flush().map_err(wio)?;
            Ok(())
        };
        if let Err(e) = write_snapshot() {
            screen_error = Some(e);
        }
    })
    .map_err(|e| AppError::Simulator(e.to_string()))?;
    if let Some(e) = screen_error {
        return Err(e);
    }

    let mut f = create("fig4_best_overlay.csv")?;
    writeln!(f, "t,target,best").map_err(wio)?;
    for (i, &t) in sim.grid.values().iter().enumerate() {
        writeln!(
            f,
            "{},{},{}",
            fmt_f64(t),
            fmt_f64(target.values()[i]),
            fmt_f64(result.best_series.values()[i])
        )
        .map_err(wio)?;
    }
    f.flush().map_err(wio)?;

    let coords: Vec<String> = result.x_opt.coords().iter().map(|c| fmt_f64(*c)).collect();
    println!("x_opt = ({})", coords.join(", "));
    println!("log_delta = {}", fmt_f64(result.log_delta_opt()));
    println!("n_evaluations = {}", result.n_evaluations);
    println!("iterations = {}", result.traces.len());
    println!("figure data written to {}", out.display());
    Ok(())
}
