use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use see_core::algorithms::{power_min, Algorithm, SearchSpec};
use see_core::channel::{draw_channels, trial_seed};
use see_core::complexity::{calibrate, table, ComplexityInputs, Composition};
use see_core::experiments::{emit_csv, load_config, run, run_methods, ConfigFile, ExperimentId, ExperimentSpec, Method};
use see_core::lmi::theta;
use see_core::model::{w_to_dbm, SystemConfig};
use see_core::Result;

#[derive(Parser)]
#[command(name = "see", version, about = "Robust secrecy-energy-efficiency beamforming for MISOME-SWIPT downlinks")]
struct Cli {
    /// Scenario file (TOML); omitted keys take the default scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Channel seed for `solve` (the trials CSV `seed` column); master seed for `sweep`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one channel draw and print its metrics.
    Solve {
        /// sdp, zfbf, mrt-zfbf, srm-<family>, srm-* or all.
        #[arg(long, default_value = "sdp")]
        algo: String,
    },
    /// Run a Monte Carlo sweep and write CSV files.
    Sweep {
        /// convergence, see_vs_t, fairness, outage, aux_rate or harvest.
        experiment: String,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        algo: Option<String>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Print the operation-count table.
    Complexity {
        #[arg(long, default_value_t = 1e-7)]
        epsilon: f64,
        #[arg(long, default_value_t = 40)]
        t_search: usize,
    },
    /// Run quick consistency checks.
    Selftest,
}

fn load(cli: &Cli) -> Result<ConfigFile> {
    match &cli.config {
        Some(p) => load_config(p),
        None => Ok(ConfigFile { system: SystemConfig::default(), sweep: None }),
    }
}

fn solve(cli: &Cli, algo: &str) -> Result<()> {
    let cfg = load(cli)?.system;
    let seed = cli.seed.unwrap_or_else(|| trial_seed(0, 0));
    let ch = draw_channels(&cfg, seed)?;
    let methods = Method::parse_list(algo)?;
    println!("seed {seed}");
    for (m, r) in run_methods(&methods, &ch, &cfg, &SearchSpec::default()) {
        let s = r?;
        if s.outage {
            println!("{m}: outage (zero-rate power exceeds P^max)");
            continue;
        }
        println!(
            "{m}: SEE {:.6e} nats/J  t* {:.6e} nats/s  t^max {:.6e}  evaluations {}",
            s.see_star, s.t_star, s.t_max, s.evaluations
        );
        if let Some(rep) = &s.report {
            println!("  total power {:.6} W ({:.2} dBm)", rep.total_power_w, w_to_dbm(rep.total_power_w));
            for (n, (r, sec)) in rep.rate_lue.iter().zip(&rep.secrecy_rate).enumerate() {
                println!("  LUE {n}: rate {r:.6e}  secrecy {sec:.6e}");
            }
            for (m, row) in rep.leakage.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(|v| format!("{v:.4e}")).collect();
                println!("  EVE {m} leakage: {}", cells.join(" "));
            }
            for (i, p) in rep.harvested_w.iter().enumerate() {
                println!("  EHN {i}: harvested {p:.6e} W");
            }
        }
        for (t, e) in &s.failures {
            println!("  grid point t = {t:.6e} failed: {e}");
        }
    }
    Ok(())
}

fn sweep(cli: &Cli, experiment: &str, trials: Option<usize>, out: &PathBuf, algo: Option<&str>, workers: Option<usize>) -> Result<()> {
    let file = load(cli)?;
    let id: ExperimentId = experiment.parse()?;
    let mut spec = ExperimentSpec::from_file(&file, Some(id))?;
    if let Some(s) = cli.seed {
        spec.master_seed = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(a) = algo {
        spec.methods = Method::parse_list(a)?;
    }
    if let Some(w) = workers {
        spec.workers = w;
    }
    let result = run(&spec)?;
    let (a, b) = emit_csv(&result, out)?;
    println!("wrote {} and {}", a.display(), b.display());
    Ok(())
}

fn complexity(cli: &Cli, epsilon: f64, t_search: usize) -> Result<()> {
    let cfg = load(cli)?.system;
    let inputs = ComplexityInputs::from_config(&cfg, epsilon, t_search);
    for (label, comp) in [("standard", Composition::Standard), ("as reported", Composition::AsReported)] {
        println!("composition: {label}");
        for row in table(&inputs, comp)? {
            println!("  {row}");
        }
    }
    println!("implied T*log(1/eps) of the published counts:");
    for c in calibrate(&inputs)? {
        println!(
            "  {:<10} {:.4e}  standard {:.4}  as reported {:.4}",
            c.algorithm.name(),
            c.reported,
            c.standard_scale,
            c.as_reported_scale
        );
    }
    Ok(())
}

fn selftest() -> Result<bool> {
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    };
    let cfg = SystemConfig {
        n_tx: 4,
        n_lue: 1,
        n_eve: 0,
        n_ehn: 0,
        psr_ratios: vec![1.0],
        lue_distances_m: vec![16.0],
        eve_distances_m: vec![],
        ehn_distances_m: vec![],
        ..SystemConfig::default()
    };
    let ch = draw_channels(&cfg, 1)?;
    let t = 1e5;
    let th = theta(t, 1.0, cfg.bandwidth_hz, cfg.r_aux_nats_s)?;
    let exact = th * cfg.noise_lue_w / ch.h[0].norm_squared();
    for alg in Algorithm::ALL {
        let r = power_min(alg, t, &ch, &cfg)?;
        let err = (r.f_t - exact).abs() / exact;
        check(&format!("{alg} single-user power"), r.is_optimal() && err < 1e-6, format!("relative error {err:.2e}"));
    }
    let inputs = ComplexityInputs::default();
    let rows = table(&inputs, Composition::AsReported)?;
    check("complexity table", rows.len() == 3, format!("{} rows", rows.len()));
    let full = SystemConfig::default();
    let ch = draw_channels(&full, trial_seed(0, 0))?;
    let out = run_methods(&[Method::TsBaj(Algorithm::MrtZfbf)], &ch, &full, &SearchSpec::default());
    let pass = out.iter().all(|(_, r)| r.as_ref().is_ok_and(|s| s.outage || s.see_star > 0.0));
    check("default scenario search", pass, "mrt-zfbf".into());
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Solve { algo } => solve(&cli, algo).map(|_| true),
        Command::Sweep { experiment, trials, out, algo, workers } => {
            sweep(&cli, experiment, *trials, out, algo.as_deref(), *workers).map(|_| true)
        }
        Command::Complexity { epsilon, t_search } => complexity(&cli, *epsilon, *t_search).map(|_| true),
        Command::Selftest => selftest(),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
