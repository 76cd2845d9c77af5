//! Seeded Monte Carlo sweeps, their CSV output and the config file format.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    find_tmax_with, origin_power, power_min, srm_from_tmax, tsbaj, tsbaj_from_tmax, Algorithm, SearchSpec,
    SeeSolution, TMAX_TOL,
};
use crate::channel::{draw_channels, trial_seed, ChannelSet};
use crate::model::{dbm_to_w, jain_index, SystemConfig};
use crate::{Error, Result};

/// Version tag written in the first line of every CSV file.
pub const CSV_SCHEMA: &str = "# schema=see-sweep/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExperimentId {
    Convergence,
    SeeVsT,
    Fairness,
    Outage,
    AuxRate,
    Harvest,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 6] = [
        ExperimentId::Convergence,
        ExperimentId::SeeVsT,
        ExperimentId::Fairness,
        ExperimentId::Outage,
        ExperimentId::AuxRate,
        ExperimentId::Harvest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Convergence => "convergence",
            ExperimentId::SeeVsT => "see_vs_t",
            ExperimentId::Fairness => "fairness",
            ExperimentId::Outage => "outage",
            ExperimentId::AuxRate => "aux_rate",
            ExperimentId::Harvest => "harvest",
        }
    }

    /// Name and unit of the swept variable.
    pub fn variable(self) -> &'static str {
        match self {
            ExperimentId::Convergence | ExperimentId::SeeVsT => "t_fraction",
            ExperimentId::Fairness => "phi_1",
            ExperimentId::Outage => "p_max_dbm",
            ExperimentId::AuxRate => "r_aux_nats_s",
            ExperimentId::Harvest => "p_req_dbm",
        }
    }

    pub fn default_grid(self) -> Vec<f64> {
        let range = |lo: f64, step: f64, n: usize| (0..n).map(|k| lo + step * k as f64).collect::<Vec<_>>();
        match self {
            ExperimentId::Convergence | ExperimentId::SeeVsT => (1..=20).map(|k| k as f64 / 20.0).collect(),
            ExperimentId::Fairness => (1..=9).map(|k| k as f64 / 10.0).collect(),
            ExperimentId::Outage => range(30.0, 1.0, 17),
            ExperimentId::AuxRate => range(20e3, 30e3, 7),
            ExperimentId::Harvest => range(-20.0, 5.0, 5),
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            ExperimentId::Convergence | ExperimentId::SeeVsT => 1,
            ExperimentId::Outage => 500,
            _ => 200,
        }
    }

    pub fn default_methods(self) -> Vec<Method> {
        match self {
            ExperimentId::AuxRate | ExperimentId::Harvest => Method::ALL.to_vec(),
            ExperimentId::Fairness => vec![Method::TsBaj(Algorithm::Sdp)],
            _ => Algorithm::ALL.iter().map(|&a| Method::TsBaj(a)).collect(),
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown experiment '{s}'")))
    }
}

/// A searched method or the rate-maximizing baseline of a family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    TsBaj(Algorithm),
    Srm(Algorithm),
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::TsBaj(Algorithm::Sdp),
        Method::TsBaj(Algorithm::Zfbf),
        Method::TsBaj(Algorithm::MrtZfbf),
        Method::Srm(Algorithm::Sdp),
        Method::Srm(Algorithm::Zfbf),
        Method::Srm(Algorithm::MrtZfbf),
    ];

    pub fn algorithm(self) -> Algorithm {
        match self {
            Method::TsBaj(a) | Method::Srm(a) => a,
        }
    }

    /// Expands `all` and `srm-*` into method lists.
    pub fn parse_list(s: &str) -> Result<Vec<Method>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Method::ALL),
                "srm-*" | "srm" => out.extend(Method::ALL[3..].iter().copied()),
                other => out.push(other.parse()?),
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidConfig("empty method list".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::TsBaj(a) => write!(f, "{a}"),
            Method::Srm(a) => write!(f, "srm-{a}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("srm-").or_else(|| s.strip_prefix("srm_")) {
            Some(rest) => Ok(Method::Srm(rest.parse()?)),
            None => Ok(Method::TsBaj(s.parse()?)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentId,
    pub base: SystemConfig,
    pub grid: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub search: SearchSpec,
    /// Worker threads; results do not depend on this.
    pub workers: usize,
}

/// Two users at 16 m and 19 m.
pub fn two_lue_config(base: &SystemConfig) -> SystemConfig {
    SystemConfig { n_lue: 2, psr_ratios: vec![0.5, 0.5], lue_distances_m: vec![16.0, 19.0], ..base.clone() }
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentId, base: SystemConfig) -> Self {
        let base = if experiment == ExperimentId::Fairness && base.n_lue != 2 { two_lue_config(&base) } else { base };
        ExperimentSpec {
            experiment,
            base,
            grid: experiment.default_grid(),
            trials: experiment.default_trials(),
            master_seed: 0,
            methods: experiment.default_methods(),
            search: SearchSpec::default(),
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.base.validate()?;
        if self.grid.is_empty() {
            return bad("sweep grid is empty".into());
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return bad("sweep grid has non-finite values".into());
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return bad("sweep grid must be strictly monotone".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        match self.experiment {
            ExperimentId::Fairness => {
                if self.base.n_lue != 2 {
                    return bad("the fairness sweep needs two LUEs".into());
                }
                if self.grid.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                    return bad("phi_1 grid must lie in [0, 1]".into());
                }
            }
            ExperimentId::Convergence | ExperimentId::SeeVsT => {
                if self.grid.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                    return bad("t fractions must lie in (0, 1]".into());
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Scenario at one grid value.
    pub fn config_at(&self, x: f64) -> SystemConfig {
        let mut cfg = self.base.clone();
        match self.experiment {
            ExperimentId::Fairness => cfg.psr_ratios = vec![x, 1.0 - x],
            ExperimentId::Outage => cfg.p_max_w = dbm_to_w(x),
            ExperimentId::AuxRate => cfg.r_aux_nats_s = x,
            ExperimentId::Harvest => cfg.p_req_w = dbm_to_w(x),
            ExperimentId::Convergence | ExperimentId::SeeVsT => {}
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrialStatus {
    Solved,
    Outage,
    Failed,
}

impl TrialStatus {
    pub fn name(self) -> &'static str {
        match self {
            TrialStatus::Solved => "solved",
            TrialStatus::Outage => "outage",
            TrialStatus::Failed => "failed",
        }
    }
}

/// One method on one channel draw at one grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRow {
    pub grid_index: usize,
    pub x: f64,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub status: TrialStatus,
    pub see: f64,
    pub t_star: f64,
    pub total_power_w: f64,
    pub evaluations: usize,
}

/// One statistic of one method at one grid value.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub grid_index: usize,
    pub x: f64,
    /// Method name, or `all` for method-independent statistics.
    pub method: String,
    pub statistic: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    pub experiment: ExperimentId,
    pub master_seed: u64,
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialRow>,
}

impl SweepResult {
    /// `(x, value)` pairs of one statistic, in grid order.
    pub fn series(&self, method: &str, statistic: &str) -> Vec<(f64, f64)> {
        self.summary.iter().filter(|r| r.method == method && r.statistic == statistic).map(|r| (r.x, r.value)).collect()
    }
}

/// Mean and standard error.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Applies `f` to `0..n` on `workers` threads; output is in index order.
pub fn par_map<T: Send>(n: usize, workers: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().expect("worker panicked") = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("worker panicked").expect("every slot filled")).collect()
}

fn row_from(grid_index: usize, x: f64, trial: usize, seed: u64, method: Method, r: Result<SeeSolution>) -> TrialRow {
    let mut row = TrialRow {
        grid_index,
        x,
        trial,
        seed,
        method,
        status: TrialStatus::Failed,
        see: f64::NAN,
        t_star: f64::NAN,
        total_power_w: f64::NAN,
        evaluations: 0,
    };
    if let Ok(s) = r {
        row.evaluations = s.evaluations;
        if s.outage {
            row.status = TrialStatus::Outage;
        } else {
            row.status = TrialStatus::Solved;
            row.see = s.see_star;
            row.t_star = s.t_star;
            row.total_power_w = s.report.as_ref().map_or(f64::NAN, |r| r.total_power_w);
        }
    }
    row
}

/// Every requested method on one channel draw; one `t^max` per family
/// serves both the search and the baseline.
pub fn run_methods(methods: &[Method], channels: &ChannelSet, config: &SystemConfig, search: &SearchSpec) -> Vec<(Method, Result<SeeSolution>)> {
    let mut out = Vec::with_capacity(methods.len());
    for alg in Algorithm::ALL {
        let wanted: Vec<Method> = methods.iter().copied().filter(|m| m.algorithm() == alg).collect();
        if wanted.is_empty() {
            continue;
        }
        let tm = find_tmax_with(alg, channels, config, TMAX_TOL);
        for m in wanted {
            let r = match (&tm, m) {
                (Err(e), _) => Err(Error::Solver(e.to_string())),
                (Ok(tm), Method::TsBaj(_)) => tsbaj_from_tmax(alg, channels, config, search, tm),
                (Ok(tm), Method::Srm(_)) => srm_from_tmax(alg, channels, config, tm),
            };
            out.push((m, r));
        }
    }
    out.sort_by_key(|(m, _)| *m);
    out
}

fn summarize(spec: &ExperimentSpec, trials: &[TrialRow]) -> Vec<SummaryRow> {
    let mut by_point: BTreeMap<(usize, Method), Vec<&TrialRow>> = BTreeMap::new();
    for r in trials {
        by_point.entry((r.grid_index, r.method)).or_default().push(r);
    }
    // Trials solved at every grid value, per method; means over this set are
    // free of the selection effect of outages.
    let mut always: BTreeMap<Method, Vec<bool>> = BTreeMap::new();
    for &m in &spec.methods {
        always.insert(m, vec![true; spec.trials]);
    }
    for r in trials {
        if r.status != TrialStatus::Solved {
            if let Some(v) = always.get_mut(&r.method) {
                v[r.trial] = false;
            }
        }
    }
    let mut out = Vec::new();
    for (gi, &x) in spec.grid.iter().enumerate() {
        let push = |out: &mut Vec<SummaryRow>, method: String, stat: &str, value: f64| {
            out.push(SummaryRow { grid_index: gi, x, method, statistic: stat.to_string(), value });
        };
        if spec.experiment == ExperimentId::Fairness {
            push(&mut out, "all".into(), "jain", jain_index(&spec.config_at(x).psr_ratios));
        }
        let reference = by_point.get(&(gi, Method::TsBaj(Algorithm::Sdp)));
        for &m in &spec.methods {
            let Some(rows) = by_point.get(&(gi, m)) else { continue };
            let solved: Vec<f64> = rows.iter().filter(|r| r.status == TrialStatus::Solved).map(|r| r.see).collect();
            let outages = rows.iter().filter(|r| r.status == TrialStatus::Outage).count();
            let failed = rows.iter().filter(|r| r.status == TrialStatus::Failed).count();
            let (mean, se) = mean_se(&solved);
            let name = m.to_string();
            push(&mut out, name.clone(), "mean_see", mean);
            push(&mut out, name.clone(), "se_see", se);
            let common: Vec<f64> = rows.iter().filter(|r| always[&m][r.trial]).map(|r| r.see).collect();
            push(&mut out, name.clone(), "mean_see_common", mean_se(&common).0);
            push(&mut out, name.clone(), "n_common", common.len() as f64);
            push(&mut out, name.clone(), "solved", solved.len() as f64);
            push(&mut out, name.clone(), "failed", failed as f64);
            let decided = solved.len() + outages;
            let freq = if decided == 0 { f64::NAN } else { outages as f64 / decided as f64 };
            push(&mut out, name.clone(), "outage_freq", freq);
            if let (Some(refs), true) = (reference, m != Method::TsBaj(Algorithm::Sdp)) {
                let (a, b): (Vec<f64>, Vec<f64>) = refs
                    .iter()
                    .zip(rows.iter())
                    .filter(|(r, s)| r.status == TrialStatus::Solved && s.status == TrialStatus::Solved)
                    .map(|(r, s)| (r.see, s.see))
                    .unzip();
                let (ma, _) = mean_se(&a);
                let (mb, _) = mean_se(&b);
                push(&mut out, name.clone(), "rel_gap", (ma - mb) / ma);
                push(&mut out, name, "common", a.len() as f64);
            }
        }
    }
    out
}

fn run_grid_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.validate()?;
    let per_trial = par_map(spec.trials, spec.workers, |trial| {
        let seed = trial_seed(spec.master_seed, trial as u64);
        let mut rows = Vec::new();
        for (gi, &x) in spec.grid.iter().enumerate() {
            let cfg = spec.config_at(x);
            match draw_channels(&cfg, seed) {
                Ok(ch) => {
                    for (m, r) in run_methods(&spec.methods, &ch, &cfg, &spec.search) {
                        rows.push(row_from(gi, x, trial, seed, m, r));
                    }
                }
                Err(e) => {
                    for &m in &spec.methods {
                        rows.push(row_from(gi, x, trial, seed, m, Err(Error::Solver(e.to_string()))));
                    }
                }
            }
        }
        rows
    });
    let mut trials: Vec<TrialRow> = per_trial.into_iter().flatten().collect();
    trials.sort_by_key(|r| (r.grid_index, r.method, r.trial));
    Ok(SweepResult { experiment: spec.experiment, master_seed: spec.master_seed, summary: summarize(spec, &trials), trials })
}

/// Two-LUE sweep of `φ_1` with Jain's index of the rate split.
pub fn run_fairness(spec: &ExperimentSpec) -> Result<SweepResult> {
    expect(spec, &[ExperimentId::Fairness])?;
    run_grid_sweep(spec)
}

/// Sweep of the auxiliary rate `R^REQ` with gaps against the SDP search.
pub fn run_aux_rate(spec: &ExperimentSpec) -> Result<SweepResult> {
    expect(spec, &[ExperimentId::AuxRate])?;
    run_grid_sweep(spec)
}

/// Sweep of the harvest demand `P^REQ`; infeasible trials count as outage
/// and are left out of the SEE means.
pub fn run_harvest(spec: &ExperimentSpec) -> Result<SweepResult> {
    expect(spec, &[ExperimentId::Harvest])?;
    run_grid_sweep(spec)
}

/// Outage frequency against `P^max`. A trial is in outage when the
/// zero-rate problem needs more than `P^max`; that power does not depend
/// on `P^max`, so one solve per trial covers the grid. Both zero-forcing
/// families use the zero-forcing test.
pub fn run_outage(spec: &ExperimentSpec) -> Result<SweepResult> {
    expect(spec, &[ExperimentId::Outage])?;
    spec.validate()?;
    let families: Vec<Algorithm> = {
        let mut v: Vec<Algorithm> = spec.methods.iter().map(|m| m.algorithm()).collect();
        v.sort();
        v.dedup();
        v
    };
    let per_trial = par_map(spec.trials, spec.workers, |trial| {
        let seed = trial_seed(spec.master_seed, trial as u64);
        let cfg = &spec.base;
        let origin = |alg: Algorithm| -> Option<f64> {
            let ch = draw_channels(cfg, seed).ok()?;
            let test = if alg == Algorithm::Sdp { Algorithm::Sdp } else { Algorithm::Zfbf };
            origin_power(test, &ch, cfg).ok()
        };
        let mut cache: BTreeMap<bool, Option<f64>> = BTreeMap::new();
        let mut rows = Vec::new();
        for &alg in &families {
            let f0 = *cache.entry(alg == Algorithm::Sdp).or_insert_with(|| origin(alg));
            for (gi, &x) in spec.grid.iter().enumerate() {
                let budget = dbm_to_w(x);
                let status = match f0 {
                    None => TrialStatus::Failed,
                    Some(f) if f <= budget => TrialStatus::Solved,
                    Some(_) => TrialStatus::Outage,
                };
                rows.push(TrialRow {
                    grid_index: gi,
                    x,
                    trial,
                    seed,
                    method: Method::TsBaj(alg),
                    status,
                    see: f64::NAN,
                    t_star: f64::NAN,
                    total_power_w: f0.unwrap_or(f64::NAN),
                    evaluations: 1,
                });
            }
        }
        rows
    });
    let mut trials: Vec<TrialRow> = per_trial.into_iter().flatten().collect();
    trials.sort_by_key(|r| (r.grid_index, r.method, r.trial));
    let mut summary = Vec::new();
    for (gi, &x) in spec.grid.iter().enumerate() {
        for &alg in &families {
            let rows: Vec<&TrialRow> =
                trials.iter().filter(|r| r.grid_index == gi && r.method == Method::TsBaj(alg)).collect();
            let outages = rows.iter().filter(|r| r.status == TrialStatus::Outage).count();
            let failed = rows.iter().filter(|r| r.status == TrialStatus::Failed).count();
            let decided = rows.len() - failed;
            let freq = if decided == 0 { f64::NAN } else { outages as f64 / decided as f64 };
            for (stat, value) in [("outage_freq", freq), ("failed", failed as f64)] {
                summary.push(SummaryRow {
                    grid_index: gi,
                    x,
                    method: alg.to_string(),
                    statistic: stat.into(),
                    value,
                });
            }
        }
    }
    Ok(SweepResult { experiment: spec.experiment, master_seed: spec.master_seed, summary, trials })
}

/// Search traces of every method on one channel draw, and the SEE at the
/// grid fractions of `t^max`.
pub fn run_convergence(spec: &ExperimentSpec) -> Result<SweepResult> {
    expect(spec, &[ExperimentId::Convergence, ExperimentId::SeeVsT])?;
    spec.validate()?;
    let seed = trial_seed(spec.master_seed, 0);
    let cfg = &spec.base;
    let ch = draw_channels(cfg, seed)?;
    let algs: Vec<Algorithm> = spec
        .methods
        .iter()
        .filter_map(|m| match m {
            Method::TsBaj(a) => Some(*a),
            Method::Srm(_) => None,
        })
        .collect();
    let runs = par_map(algs.len(), spec.workers, |i| tsbaj(algs[i], &ch, cfg, &spec.search));
    let mut summary = Vec::new();
    let mut trials = Vec::new();
    for (&alg, run) in algs.iter().zip(runs) {
        let method = Method::TsBaj(alg);
        let name = method.to_string();
        if let Ok(s) = &run {
            for (k, p) in s.trace.iter().enumerate() {
                for (stat, value) in [("trace_t", p.t), ("trace_see", p.see), ("trace_asee", p.asee)] {
                    summary.push(SummaryRow { grid_index: k, x: k as f64, method: name.clone(), statistic: stat.into(), value });
                }
            }
            let curve = par_map(spec.grid.len(), spec.workers, |gi| {
                let t = spec.grid[gi] * s.t_max;
                match power_min(alg, t, &ch, cfg) {
                    Ok(r) if r.is_optimal() => {
                        let total = r.f_t / cfg.amp_eff + cfg.circuit_power();
                        t / total
                    }
                    _ => f64::NAN,
                }
            });
            for (gi, (&x, see)) in spec.grid.iter().zip(curve).enumerate() {
                summary.push(SummaryRow { grid_index: gi, x, method: name.clone(), statistic: "see_vs_t".into(), value: see });
            }
        }
        trials.push(row_from(0, 0.0, 0, seed, method, run));
    }
    Ok(SweepResult { experiment: spec.experiment, master_seed: spec.master_seed, summary, trials })
}

fn expect(spec: &ExperimentSpec, ids: &[ExperimentId]) -> Result<()> {
    if ids.contains(&spec.experiment) {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("runner does not handle experiment '{}'", spec.experiment)))
    }
}

/// Dispatches on the experiment id.
pub fn run(spec: &ExperimentSpec) -> Result<SweepResult> {
    match spec.experiment {
        ExperimentId::Convergence | ExperimentId::SeeVsT => run_convergence(spec),
        ExperimentId::Fairness => run_fairness(spec),
        ExperimentId::Outage => run_outage(spec),
        ExperimentId::AuxRate => run_aux_rate(spec),
        ExperimentId::Harvest => run_harvest(spec),
    }
}

/// Summary CSV: `experiment,variable,grid_index,x,method,statistic,value`.
pub fn summary_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_SCHEMA} master_seed={}", result.master_seed);
    s.push_str("experiment,variable,grid_index,x,method,statistic,value\n");
    let var = result.experiment.variable();
    for r in &result.summary {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{},{:e}",
            result.experiment, var, r.grid_index, r.x, r.method, r.statistic, r.value
        );
    }
    s
}

/// Per-trial CSV; the seed column replays any single trial.
pub fn trials_csv(result: &SweepResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CSV_SCHEMA} master_seed={}", result.master_seed);
    s.push_str("experiment,grid_index,x,trial,seed,method,status,see,t_star,total_power_w,evaluations\n");
    for r in &result.trials {
        let _ = writeln!(
            s,
            "{},{},{:e},{},{},{},{},{:e},{:e},{:e},{}",
            result.experiment,
            r.grid_index,
            r.x,
            r.trial,
            r.seed,
            r.method,
            r.status.name(),
            r.see,
            r.t_star,
            r.total_power_w,
            r.evaluations
        );
    }
    s
}

/// Writes `<experiment>_summary.csv` and `<experiment>_trials.csv` into
/// `dir` and returns their paths.
pub fn emit_csv(result: &SweepResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let a = dir.join(format!("{}_summary.csv", result.experiment));
    let b = dir.join(format!("{}_trials.csv", result.experiment));
    std::fs::write(&a, summary_csv(result))?;
    std::fs::write(&b, trials_csv(result))?;
    Ok((a, b))
}

/// Optional `[sweep]` table of a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigFile {
    pub system: SystemConfig,
    pub sweep: Option<SweepSettings>,
}

/// File layout: every `SystemConfig` field optional, `_dbm` aliases for the
/// power fields.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    n_tx: Option<usize>,
    n_lue: Option<usize>,
    n_eve: Option<usize>,
    n_ehn: Option<usize>,
    bandwidth_hz: Option<f64>,
    carrier_hz: Option<f64>,
    noise_lue_w: Option<f64>,
    noise_eve_w: Option<f64>,
    noise_ehn_w: Option<f64>,
    p_max_w: Option<f64>,
    p_sp_w: Option<f64>,
    amp_eff: Option<f64>,
    eh_eff: Option<f64>,
    p_req_w: Option<f64>,
    r_aux_nats_s: Option<f64>,
    psr_ratios: Option<Vec<f64>>,
    lue_distances_m: Option<Vec<f64>>,
    eve_distances_m: Option<Vec<f64>>,
    ehn_distances_m: Option<Vec<f64>>,
    uncertainty_fraction: Option<f64>,
    noise_lue_dbm: Option<f64>,
    noise_eve_dbm: Option<f64>,
    noise_ehn_dbm: Option<f64>,
    p_max_dbm: Option<f64>,
    p_sp_dbm: Option<f64>,
    p_req_dbm: Option<f64>,
    sweep: Option<SweepSettings>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn key_line(text: &str, key: &str) -> usize {
    text.lines()
        .position(|l| l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')))
        .map_or(1, |i| i + 1)
}

/// Parses config text; omitted fields take their defaults.
pub fn parse_config(text: &str) -> Result<ConfigFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut cfg = SystemConfig::default();
    let power = |w: Option<f64>, dbm: Option<f64>, name: &str, slot: &mut f64| -> Result<()> {
        match (w, dbm) {
            (Some(_), Some(_)) => Err(Error::Parse {
                line: key_line(text, &format!("{name}_dbm")),
                message: format!("both {name}_w and {name}_dbm given"),
            }),
            (Some(v), None) => {
                *slot = v;
                Ok(())
            }
            (None, Some(d)) => {
                *slot = dbm_to_w(d);
                Ok(())
            }
            (None, None) => Ok(()),
        }
    };
    power(raw.noise_lue_w, raw.noise_lue_dbm, "noise_lue", &mut cfg.noise_lue_w)?;
    power(raw.noise_eve_w, raw.noise_eve_dbm, "noise_eve", &mut cfg.noise_eve_w)?;
    power(raw.noise_ehn_w, raw.noise_ehn_dbm, "noise_ehn", &mut cfg.noise_ehn_w)?;
    power(raw.p_max_w, raw.p_max_dbm, "p_max", &mut cfg.p_max_w)?;
    power(raw.p_sp_w, raw.p_sp_dbm, "p_sp", &mut cfg.p_sp_w)?;
    power(raw.p_req_w, raw.p_req_dbm, "p_req", &mut cfg.p_req_w)?;
    macro_rules! take {
        ($($f:ident),*) => { $( if let Some(v) = raw.$f { cfg.$f = v; } )* };
    }
    take!(
        n_tx,
        n_lue,
        n_eve,
        n_ehn,
        bandwidth_hz,
        carrier_hz,
        amp_eff,
        eh_eff,
        r_aux_nats_s,
        psr_ratios,
        lue_distances_m,
        eve_distances_m,
        ehn_distances_m,
        uncertainty_fraction
    );
    Ok(ConfigFile { system: cfg, sweep: raw.sweep })
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    parse_config(&std::fs::read_to_string(path)?)
}

/// Canonical text: every field in watts, then the `[sweep]` table.
pub fn config_to_string(file: &ConfigFile) -> Result<String> {
    let ser = |e: toml::ser::Error| Error::InvalidConfig(e.to_string());
    let mut s = toml::to_string(&file.system).map_err(ser)?;
    if let Some(sw) = &file.sweep {
        s.push_str("\n[sweep]\n");
        s.push_str(&toml::to_string(sw).map_err(ser)?);
    }
    Ok(s)
}

pub fn save_config(file: &ConfigFile, path: &Path) -> Result<()> {
    std::fs::write(path, config_to_string(file)?)?;
    Ok(())
}

impl ExperimentSpec {
    /// Spec from a config file; `experiment` overrides the file's choice.
    pub fn from_file(file: &ConfigFile, experiment: Option<ExperimentId>) -> Result<Self> {
        let sweep = file.sweep.clone().unwrap_or_default();
        let id = match (experiment, &sweep.experiment) {
            (Some(id), _) => id,
            (None, Some(name)) => name.parse()?,
            (None, None) => return Err(Error::InvalidConfig("no experiment selected".into())),
        };
        let mut spec = ExperimentSpec::new(id, file.system.clone());
        if let Some(g) = sweep.grid {
            spec.grid = g;
        }
        if let Some(t) = sweep.trials {
            spec.trials = t;
        }
        if let Some(s) = sweep.master_seed {
            spec.master_seed = u64::try_from(s).map_err(|_| Error::InvalidConfig("master_seed must be nonnegative".into()))?;
        }
        if let Some(m) = sweep.methods {
            spec.methods = Method::parse_list(&m.join(","))?;
        }
        if let Some(w) = sweep.workers {
            spec.workers = w;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tiny(id: ExperimentId) -> ExperimentSpec {
        let base = SystemConfig {
            n_tx: 3,
            n_lue: 1,
            n_eve: 1,
            n_ehn: 1,
            psr_ratios: vec![1.0],
            lue_distances_m: vec![16.0],
            eve_distances_m: vec![8.0],
            ehn_distances_m: vec![6.0],
            ..SystemConfig::default()
        };
        let mut spec = ExperimentSpec::new(id, base);
        spec.trials = 3;
        spec.master_seed = 11;
        spec.workers = 1;
        spec
    }

    #[test]
    fn names_round_trip() {
        for id in ExperimentId::ALL {
            assert_eq!(id.name().parse::<ExperimentId>().unwrap(), id);
        }
        for m in Method::ALL {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!(Method::parse_list("srm-*").unwrap().len(), 3);
        assert_eq!(Method::parse_list("sdp,all").unwrap().len(), 6);
        assert!("nope".parse::<ExperimentId>().is_err());
        assert!(Method::parse_list("srm-foo").is_err());
    }

    #[test]
    fn mean_se_small_cases() {
        assert!(mean_se(&[]).0.is_nan());
        assert_eq!(mean_se(&[2.0]), (2.0, 0.0));
        let (m, se) = mean_se(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spec_validation() {
        let mut s = tiny(ExperimentId::AuxRate);
        assert!(s.validate().is_ok());
        s.grid = vec![1.0, 3.0, 2.0];
        assert!(s.validate().is_err());
        s.grid.clear();
        assert!(s.validate().is_err());
        let mut s = tiny(ExperimentId::AuxRate);
        s.trials = 0;
        assert!(s.validate().is_err());
        let f = ExperimentSpec::new(ExperimentId::Fairness, SystemConfig::default());
        assert_eq!(f.base.n_lue, 2);
        assert!(f.validate().is_ok());
    }

    #[test]
    fn fairness_jain_peaks_at_half() {
        let mut spec = ExperimentSpec::new(ExperimentId::Fairness, SystemConfig::default());
        spec.trials = 1;
        let jain: Vec<(f64, f64)> =
            spec.grid.iter().map(|&x| (x, jain_index(&spec.config_at(x).psr_ratios))).collect();
        let best = jain.iter().cloned().fold((0.0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        assert_eq!(best.0, 0.5);
        assert_eq!(best.1, 1.0);
        for (x, j) in &jain {
            let mirror = jain_index(&[1.0 - x, *x]);
            assert!((j - mirror).abs() < 1e-15);
        }
    }

    #[test]
    fn par_map_is_order_independent() {
        let f = |i: usize| trial_seed(5, i as u64);
        let a = par_map(37, 1, f);
        let b = par_map(37, 4, f);
        assert_eq!(a, b);
    }

    #[test]
    fn outage_curve_is_monotone_and_shared() {
        let mut spec = tiny(ExperimentId::Outage);
        spec.grid = vec![-10.0, 10.0, 30.0, 60.0];
        spec.trials = 4;
        let r = run_outage(&spec).unwrap();
        for m in ["sdp", "zfbf", "mrt-zfbf"] {
            let c = r.series(m, "outage_freq");
            assert_eq!(c.len(), 4);
            assert!(c.windows(2).all(|w| w[1].1 <= w[0].1));
            assert_eq!(c[3].1, 0.0);
            assert!(c.iter().all(|&(_, v)| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(r.series("zfbf", "outage_freq"), r.series("mrt-zfbf", "outage_freq"));
        let zf: Vec<_> = r.trials.iter().filter(|t| t.method == Method::TsBaj(Algorithm::Zfbf)).map(|t| t.status).collect();
        let mrt: Vec<_> =
            r.trials.iter().filter(|t| t.method == Method::TsBaj(Algorithm::MrtZfbf)).map(|t| t.status).collect();
        assert_eq!(zf, mrt);
    }

    #[test]
    fn sweep_is_deterministic_across_workers() {
        let mut spec = tiny(ExperimentId::AuxRate);
        spec.grid = vec![50e3, 150e3];
        spec.trials = 2;
        spec.methods = vec![Method::TsBaj(Algorithm::MrtZfbf), Method::Srm(Algorithm::MrtZfbf)];
        let a = run(&spec).unwrap();
        spec.workers = 3;
        let b = run(&spec).unwrap();
        assert_eq!(summary_csv(&a), summary_csv(&b));
        assert_eq!(trials_csv(&a), trials_csv(&b));
        for r in &a.trials {
            assert_eq!(r.seed, trial_seed(spec.master_seed, r.trial as u64));
        }
        for (_, g) in a.series("srm-mrt-zfbf", "rel_gap") {
            assert!(g >= -1e-9);
        }
    }

    #[test]
    fn convergence_traces_are_nondecreasing() {
        let mut spec = tiny(ExperimentId::Convergence);
        spec.grid = vec![0.25, 0.5, 0.75, 1.0];
        spec.methods = vec![Method::TsBaj(Algorithm::Zfbf)];
        let r = run_convergence(&spec).unwrap();
        let asee = r.series("zfbf", "trace_asee");
        assert!(!asee.is_empty());
        assert!(asee.windows(2).all(|w| w[1].1 >= w[0].1));
        assert_eq!(r.series("zfbf", "see_vs_t").len(), 4);
    }

    #[test]
    fn csv_has_schema_and_full_precision() {
        let result = SweepResult {
            experiment: ExperimentId::Harvest,
            master_seed: 3,
            summary: vec![SummaryRow {
                grid_index: 0,
                x: -5.0,
                method: "sdp".into(),
                statistic: "mean_see".into(),
                value: 0.1 + 0.2,
            }],
            trials: vec![],
        };
        let csv = summary_csv(&result);
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with(CSV_SCHEMA));
        assert_eq!(lines.next().unwrap(), "experiment,variable,grid_index,x,method,statistic,value");
        let row = lines.next().unwrap();
        let v: f64 = row.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(v, 0.1 + 0.2);
    }

    #[test]
    fn empty_file_gives_defaults() {
        let f = parse_config("").unwrap();
        assert_eq!(f.system, SystemConfig::default());
        assert!(f.sweep.is_none());
    }

    #[test]
    fn dbm_keys_are_converted() {
        let f = parse_config("p_max_dbm = 30.0\nnoise_lue_dbm = -30\n").unwrap();
        assert!((f.system.p_max_w - 1.0).abs() < 1e-12);
        assert!((f.system.noise_lue_w - 1e-6).abs() < 1e-18);
        let err = parse_config("p_max_w = 2.0\n\np_max_dbm = 30.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn malformed_files_report_lines() {
        let err = parse_config("n_tx = 7\nn_lue = \"three\"\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_config("n_tx = 7\n\nbogus_field = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_config("n_tx = = 7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn sweep_table_builds_a_spec() {
        let text = "n_lue = 2\npsr_ratios = [0.5, 0.5]\nlue_distances_m = [16.0, 19.0]\n\n[sweep]\nexperiment = \"harvest\"\ngrid = [-10.0, 0.0]\ntrials = 4\nmaster_seed = 9\nmethods = [\"sdp\", \"srm-*\"]\n";
        let f = parse_config(text).unwrap();
        let spec = ExperimentSpec::from_file(&f, None).unwrap();
        assert_eq!(spec.experiment, ExperimentId::Harvest);
        assert_eq!(spec.grid, vec![-10.0, 0.0]);
        assert_eq!(spec.trials, 4);
        assert_eq!(spec.master_seed, 9);
        assert_eq!(spec.methods.len(), 4);
        assert!(spec.validate().is_ok());
    }

    fn configs() -> impl Strategy<Value = ConfigFile> {
        (
            2usize..9,
            1e-9f64..1e-3,
            1.0f64..100.0,
            0.0f64..1.0,
            proptest::option::of((1usize..500, 0i64..1_000_000, proptest::collection::vec(-50.0f64..50.0, 1..5))),
        )
            .prop_map(|(n_tx, noise, pmax, frac, sweep)| ConfigFile {
                system: SystemConfig {
                    n_tx: n_tx.max(4),
                    noise_eve_w: noise,
                    p_max_w: pmax,
                    uncertainty_fraction: frac,
                    ..SystemConfig::default()
                },
                sweep: sweep.map(|(t, seed, grid)| SweepSettings {
                    experiment: Some("aux_rate".into()),
                    grid: Some(grid),
                    trials: Some(t),
                    master_seed: Some(seed),
                    methods: Some(vec!["sdp".into(), "srm-zfbf".into()]),
                    workers: None,
                }),
            })
    }

    proptest! {
        #[test]
        fn config_save_load_round_trip(file in configs()) {
            let text = config_to_string(&file).unwrap();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &file);
            prop_assert_eq!(config_to_string(&back).unwrap(), text);
        }

        #[test]
        fn par_map_matches_serial(n in 0usize..50, workers in 1usize..6) {
            let f = |i: usize| i * i + 1;
            prop_assert_eq!(par_map(n, workers, f), (0..n).map(f).collect::<Vec<_>>());
        }
    }
}
