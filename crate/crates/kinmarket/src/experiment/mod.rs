//! Configuration-driven experiment runner: the three standard presets and
//! the CSV-emitting `run` entry point used by the `kinmarket` binary.
//!
//! Every run writes a `params.echo` file in the configuration format;
//! feeding that file back through `--config` reproduces the run byte for
//! byte. All statistical outputs are seed-averaged *and* kept per seed.

mod config;

pub use config::{fmt_f64, parse_list, ExperimentConfig, Mode};

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{gini, histogram, ks_distance, lorenz_curve, sample_moments};
use crate::fokker_planck::{
    integrate_fp_moments, lognormal_from_moments, lognormal_pdf, self_similar_rescale,
    FpMomentPoint, FpParams, LognormalParams,
};
use crate::kinetic::{run_simulation, SimulationRecord};
use crate::market::DemandCurve;
use crate::price::integrate_price_ode;
use crate::{Error, Result};

/// Built-in experiment presets.
///
/// All three share N = 1000 agents, 10 shares per agent at an initial price
/// of 50 plus 500 in bonds (initial wealth 1000 per agent):
///
/// * `test1` — r = 0.01, D = 0.015, constant mu = 0.5, noise std 0.2 (xi)
///   and 0.3 (eta relative to the initial price), 400 iterations;
/// * `test2` — as test1 with the exponential-decay curve
///   mu(S) = 0.2 + 0.8 e^{-c2 S}, c2 = ln(0.8/0.3)/50, so mu(50) = 0.5;
/// * `test3` — r = 0.001, D = 0.0015, constant mu = 0.5, both noise std
///   0.05, 500 iterations, snapshots at t = 50, 200 and 500.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let base = ExperimentConfig {
        r: 0.01,
        dividend: 0.015,
        zeta: 0.2,
        sigma_rel: 0.3,
        n_pc: 10.0,
        n_agents: 1000,
        steps: 400,
        curve: DemandCurve::constant(0.5).expect("preset curve"),
        s0: 50.0,
        bonds0: 500.0,
        seeds: (1..=20).collect(),
        snapshot_times: vec![400],
        mode: Mode::Compare,
        dt: 0.1,
        out: None,
    };
    match name {
        "test1" => Ok(base),
        "test2" => {
            let c1 = 0.2f64;
            let c2 = ((1.0 - c1) / (0.5 - c1)).ln() / base.s0;
            Ok(ExperimentConfig {
                curve: DemandCurve::exponential_decay(c1, c2).expect("preset curve"),
                ..base
            })
        }
        "test3" => Ok(ExperimentConfig {
            r: 0.001,
            dividend: 0.0015,
            zeta: 0.05,
            sigma_rel: 0.05,
            steps: 500,
            snapshot_times: vec![50, 200, 500],
            ..base
        }),
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

/// Tracks files written by a run so a failing run can clean up after itself.
struct OutputSet {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputSet {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(OutputSet { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    fn discard_all(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

/// Execute an experiment, writing CSV outputs into `config.out`.
///
/// On any error the partial outputs are removed and the error is returned;
/// the CLI maps configuration errors to exit code 1 and numerical failures
/// to exit code 2.
pub fn run(config: &ExperimentConfig) -> Result<()> {
    config.validate()?;
    let out = config
        .out
        .as_ref()
        .ok_or_else(|| Error::Config("no output directory configured".into()))?;
    let mut outputs = OutputSet::new(Path::new(out))?;
    match run_inner(config, &mut outputs) {
        Ok(()) => Ok(()),
        Err(e) => {
            outputs.discard_all();
            Err(e)
        }
    }
}

fn run_inner(config: &ExperimentConfig, outputs: &mut OutputSet) -> Result<()> {
    outputs.write("params.echo", &config.to_config_string())?;

    let records = if matches!(config.mode, Mode::Simulate | Mode::Compare) {
        Some(simulate_part(config, outputs)?)
    } else {
        None
    };
    if matches!(config.mode, Mode::PriceOde | Mode::Compare) {
        price_ode_part(config, outputs)?;
    }
    let fp_path = if matches!(config.mode, Mode::FokkerPlanck | Mode::Compare) {
        Some(fokker_planck_part(config, outputs)?)
    } else {
        None
    };
    if let Mode::Compare = config.mode {
        compare_part(config, outputs, records.as_deref().unwrap(), fp_path.as_deref().unwrap())?;
    }
    Ok(())
}

fn simulate_part(config: &ExperimentConfig, outputs: &mut OutputSet) -> Result<Vec<SimulationRecord>> {
    let records: Vec<SimulationRecord> = config
        .seeds
        .par_iter()
        .map(|&seed| {
            run_simulation(
                &config.model_params(seed),
                &config.curve,
                config.s0,
                config.bonds0,
                &config.snapshot_times,
            )
        })
        .collect::<Result<_>>()?;

    let header = "t,S,mean_w,second_w,mean_gamma";
    for (record, &seed) in records.iter().zip(&config.seeds) {
        let mut csv = String::from(header);
        csv.push('\n');
        for st in &record.states {
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                st.t,
                fmt_f64(st.s),
                fmt_f64(st.mean_w),
                fmt_f64(st.second_w),
                fmt_f64(st.mean_gamma)
            ));
        }
        outputs.write(&format!("timeseries_seed{seed}.csv"), &csv)?;
    }

    // Seed-averaged series: per-step mean across seeds, in seed order.
    let n_seeds = records.len() as f64;
    let mut csv = String::from(header);
    csv.push('\n');
    for t in 0..=config.steps {
        let mut acc = [0.0f64; 4];
        for record in &records {
            let st = &record.states[t];
            acc[0] += st.s;
            acc[1] += st.mean_w;
            acc[2] += st.second_w;
            acc[3] += st.mean_gamma;
        }
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            t,
            fmt_f64(acc[0] / n_seeds),
            fmt_f64(acc[1] / n_seeds),
            fmt_f64(acc[2] / n_seeds),
            fmt_f64(acc[3] / n_seeds)
        ));
    }
    outputs.write("timeseries_avg.csv", &csv)?;

    // Wealth snapshots pooled over seeds, labelled by seed and agent.
    let mut snaps = config.snapshot_times.clone();
    snaps.sort_unstable();
    snaps.dedup();
    for &t in &snaps {
        let mut csv = String::from("seed,agent,wealth\n");
        for (record, &seed) in records.iter().zip(&config.seeds) {
            let sample = record
                .wealth_snapshots
                .iter()
                .find(|(time, _)| *time == t)
                .map(|(_, w)| w)
                .expect("snapshot captured for every requested time");
            for (agent, &w) in sample.iter().enumerate() {
                csv.push_str(&format!("{seed},{agent},{}\n", fmt_f64(w)));
            }
        }
        outputs.write(&format!("wealth_snapshot_{t}.csv"), &csv)?;
    }
    Ok(records)
}

fn price_ode_part(config: &ExperimentConfig, outputs: &mut OutputSet) -> Result<()> {
    let path = integrate_price_ode(
        &config.curve,
        config.s0,
        config.r,
        config.dividend,
        config.steps as f64,
        config.dt,
    )?;
    let mut csv = String::from("t,S\n");
    for (t, s) in path {
        csv.push_str(&format!("{},{}\n", fmt_f64(t), fmt_f64(s)));
    }
    outputs.write("ode_timeseries.csv", &csv)
}

fn fp_params(config: &ExperimentConfig) -> Result<FpParams> {
    if config.r <= 0.0 {
        return Err(Error::Config(
            "the scaled-limit modes need r > 0 (lambda = D/r, nu = sigma^2/r)".into(),
        ));
    }
    let sigma = config.sigma_rel * config.s0;
    Ok(FpParams {
        lambda: config.dividend / config.r,
        nu: sigma * sigma / config.r,
        zeta: config.zeta,
        curve: config.curve,
        n_pc: config.n_pc,
    })
}

fn fokker_planck_part(
    config: &ExperimentConfig,
    outputs: &mut OutputSet,
) -> Result<Vec<FpMomentPoint>> {
    let fp = fp_params(config)?;
    let w0 = config.n_pc * config.s0 + config.bonds0;
    let tau_end = config.r * config.steps as f64;
    let dtau = config.r * config.dt;
    let path = integrate_fp_moments(&fp, w0, w0 * w0, tau_end, dtau)?;

    let mut csv = String::from("tau,S,mean_w,second_w,A,B,a,b\n");
    for p in &path {
        let a = p.mean_w.ln();
        let b = (p.second_w / (p.mean_w * p.mean_w)).ln();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(p.tau),
            fmt_f64(p.s),
            fmt_f64(p.mean_w),
            fmt_f64(p.second_w),
            fmt_f64(p.drift),
            fmt_f64(p.diffusion),
            fmt_f64(a),
            fmt_f64(b)
        ));
    }
    outputs.write("fp_timeseries.csv", &csv)?;

    for &t in config.snapshot_times.iter().filter(|&&t| t > 0) {
        let p = fp_point_at(&path, config, t);
        let Ok(params) = lognormal_from_moments(p.mean_w, p.second_w) else {
            continue; // zero-diffusion run: no profile to plot
        };
        let mut csv = String::from("w,density\n");
        let m = params.a - 0.5 * params.b;
        let half_width = 3.8 * params.b.sqrt();
        let n = 400;
        for k in 0..=n {
            let chi = m - half_width + 2.0 * half_width * k as f64 / n as f64;
            let w = chi.exp();
            csv.push_str(&format!("{},{}\n", fmt_f64(w), fmt_f64(lognormal_pdf(&params, w))));
        }
        outputs.write(&format!("lognormal_curve_{t}.csv"), &csv)?;
    }
    Ok(path)
}

/// The moment-trajectory point for market time `t` (tau = r t); snapshot
/// times are integers and dtau = r dt, so the index is t / dt up to
/// rounding.
fn fp_point_at<'p>(path: &'p [FpMomentPoint], config: &ExperimentConfig, t: usize) -> &'p FpMomentPoint {
    let idx = (t as f64 / config.dt).round() as usize;
    &path[idx.min(path.len() - 1)]
}

fn compare_part(
    config: &ExperimentConfig,
    outputs: &mut OutputSet,
    records: &[SimulationRecord],
    fp_path: &[FpMomentPoint],
) -> Result<()> {
    let w0 = config.n_pc * config.s0 + config.bonds0;
    let mut snaps = config.snapshot_times.clone();
    snaps.sort_unstable();
    snaps.dedup();

    let mut metrics = String::from("t,gini,ks,a_fit,b_fit\n");
    for &t in &snaps {
        let samples: Vec<&Vec<f64>> = records
            .iter()
            .map(|r| {
                r.wealth_snapshots
                    .iter()
                    .find(|(time, _)| *time == t)
                    .map(|(_, w)| w)
                    .expect("snapshot captured for every requested time")
            })
            .collect();

        let pooled: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
        let log_axis = pooled.iter().all(|&w| w > 0.0);
        let mut csv = String::from("w,density\n");
        for (center, density) in histogram(&pooled, 50, log_axis)? {
            csv.push_str(&format!("{},{}\n", fmt_f64(center), fmt_f64(density)));
        }
        outputs.write(&format!("histogram_{t}.csv"), &csv)?;

        let mut csv = String::from("F,L\n");
        for (f, l) in lorenz_curve(&pooled, 100)?.points {
            csv.push_str(&format!("{},{}\n", fmt_f64(f), fmt_f64(l)));
        }
        outputs.write(&format!("lorenz_{t}.csv"), &csv)?;

        if t == 0 {
            continue; // point mass at the start: no lognormal metrics
        }
        let fp = fp_point_at(fp_path, config, t);
        let fp_model = LognormalParams {
            a: w0.ln(),
            b: (fp.second_w / (fp.mean_w * fp.mean_w)).ln(),
        };
        let mut gini_acc = 0.0;
        let mut ks_acc = 0.0;
        let mut a_acc = 0.0;
        let mut b_acc = 0.0;
        for sample in &samples {
            gini_acc += gini(sample)?;
            let (mean, second) = sample_moments(sample)?;
            let rescaled = self_similar_rescale(sample, w0, mean);
            ks_acc += ks_distance(&rescaled, &fp_model)?;
            let fit = lognormal_from_moments(mean, second)?;
            a_acc += fit.a;
            b_acc += fit.b;
        }
        let n = samples.len() as f64;
        metrics.push_str(&format!(
            "{},{},{},{},{}\n",
            t,
            fmt_f64(gini_acc / n),
            fmt_f64(ks_acc / n),
            fmt_f64(a_acc / n),
            fmt_f64(b_acc / n)
        ));
    }
    outputs.write("metrics.csv", &metrics)
}
