//! Power minimization at a fixed sum secrecy rate, the two-stage search over
//! that rate, solution recoveries, the zero-forcing variants and the
//! rate-maximizing baselines.

use std::fmt;
use std::str::FromStr;

use see_sdp::{null_space_basis, ConicProblem, LinearExpr, Sense, SolveStatus, SolverSettings, VarId};

use crate::channel::{worst_case_quadratic, ChannelSet, Sense as Extremum};
use crate::error::{Error, Result};
use crate::lmi::{build_psr, harvest_lmi_expr, leakage_coefficient, leakage_lmi_expr, AffineCov, PsrConstraint};
use crate::model::{evaluate, BeamformingSolution, CMat, CVec, HermitianMatrix, MetricsReport, SystemConfig};

/// Inner solver family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Sdp,
    Zfbf,
    MrtZfbf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Sdp, Algorithm::Zfbf, Algorithm::MrtZfbf];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sdp => "sdp",
            Algorithm::Zfbf => "zfbf",
            Algorithm::MrtZfbf => "mrt-zfbf",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sdp" => Ok(Algorithm::Sdp),
            "zfbf" => Ok(Algorithm::Zfbf),
            "mrt-zfbf" | "mrt_zfbf" => Ok(Algorithm::MrtZfbf),
            other => Err(Error::InvalidConfig(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct PowerMinResult {
    pub status: SolveStatus,
    /// `Σ Tr(W_n) + Tr(Q)`.
    pub f_t: f64,
    pub solution: BeamformingSolution,
    /// Leakage multipliers indexed `[m][n]`.
    pub zeta: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
    pub iterations: usize,
}

impl PowerMinResult {
    /// Optimal, possibly to the solver's relaxed tolerances.
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::NearOptimal)
    }

    fn failed(status: SolveStatus, config: &SystemConfig, iterations: usize) -> Self {
        PowerMinResult {
            status,
            f_t: f64::INFINITY,
            solution: BeamformingSolution::zeros(config.n_tx, config.n_lue),
            zeta: Vec::new(),
            eta: Vec::new(),
            iterations,
        }
    }
}

fn check_instance(channels: &ChannelSet, config: &SystemConfig) -> Result<()> {
    config.validate()?;
    let nt = config.n_tx;
    let ok = channels.h.len() == config.n_lue
        && channels.g_e_bar.len() == config.n_eve
        && channels.g_h_bar.len() == config.n_ehn
        && channels.theta_e.len() == config.n_eve
        && channels.theta_h.len() == config.n_ehn
        && channels.h.iter().chain(&channels.g_e_bar).chain(&channels.g_h_bar).all(|v| v.len() == nt);
    if !ok {
        return Err(Error::Dimension("channel set does not match the configuration".into()));
    }
    Ok(())
}

fn psrs(t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<Vec<PsrConstraint>> {
    channels.h.iter().enumerate().map(|(n, h)| build_psr(n, t, h, config)).collect()
}

/// Harvest LMIs are scaled by `c = max(P/ξ, σ_h²)` so their entries are of
/// order one; leakage LMIs by the EVE noise power.
fn harvest_scale(config: &SystemConfig) -> f64 {
    (config.p_req_w / config.eh_eff).max(config.noise_ehn_w)
}

/// Adds the robust leakage and harvest LMIs. `x_of(n)` is `X_n` and `y` is
/// `Y = Σ W_k + Q`, both affine in the decision blocks.
fn add_robust_lmis(
    p: &mut ConicProblem,
    channels: &ChannelSet,
    config: &SystemConfig,
    x_of: impl Fn(usize) -> AffineCov,
    y: &AffineCov,
) -> (Vec<Vec<VarId>>, Vec<VarId>) {
    let se = config.noise_eve_w.sqrt();
    let mut zeta = Vec::with_capacity(config.n_eve);
    for m in 0..config.n_eve {
        let g = channels.g_e_bar[m].unscale(se);
        let theta = channels.theta_e[m] / se;
        let row: Vec<VarId> = (0..config.n_lue)
            .map(|n| {
                let z = p.add_nonneg();
                p.add_lmi(leakage_lmi_expr(&g, theta, 1.0, &x_of(n), z));
                z
            })
            .collect();
        zeta.push(row);
    }
    let c = harvest_scale(config);
    let sc = c.sqrt();
    let eta = (0..config.n_ehn)
        .map(|i| {
            let e = p.add_nonneg();
            let g = channels.g_h_bar[i].unscale(sc);
            let demand = config.p_req_w / (config.eh_eff * c);
            p.add_lmi(harvest_lmi_expr(&g, channels.theta_h[i] / sc, demand, y, e));
            e
        })
        .collect();
    (zeta, eta)
}

fn own_weight(config: &SystemConfig) -> Result<f64> {
    if config.n_eve == 0 {
        return Ok(1.0);
    }
    leakage_coefficient(config.r_aux_tilde())
}

fn settings() -> SolverSettings {
    SolverSettings::default()
}

/// Minimum transmit power meeting the rate split at sum secrecy rate `t`
/// with robust leakage and harvesting constraints, over full covariances.
pub fn solve_power_min(t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<PowerMinResult> {
    check_instance(channels, config)?;
    let constraints = psrs(t, channels, config)?;
    let nt = config.n_tx;
    let c = own_weight(config)?;
    let mut p = ConicProblem::new();
    let w: Vec<VarId> = (0..config.n_lue).map(|_| p.add_psd(nt)).collect();
    let q = p.add_psd(nt);
    let mut objective = LinearExpr::new().trace_of(q, nt, 1.0);
    for &wn in &w {
        objective = objective.trace_of(wn, nt, 1.0);
    }
    p.minimize(objective);

    let sigma = config.noise_lue_w.sqrt();
    for psr in &constraints {
        if psr.is_vacuous() {
            continue;
        }
        let hs = HermitianMatrix::outer(&psr.h.unscale(sigma));
        let mut expr = LinearExpr::new().trace(w[psr.n], hs.clone()).trace(q, hs.scale(-psr.theta));
        for (k, &wk) in w.iter().enumerate() {
            if k != psr.n {
                expr = expr.trace(wk, hs.scale(-psr.theta));
            }
        }
        p.add_linear(expr, Sense::GreaterEq, psr.theta);
    }

    let x_of = |n: usize| {
        let members = w.iter().enumerate().map(|(k, &wk)| (wk, if k == n { c - 1.0 } else { -1.0 }));
        AffineCov::default().term(None, members.chain([(q, -1.0)]).collect())
    };
    let y = AffineCov::default().term(None, w.iter().map(|&wk| (wk, 1.0)).chain([(q, 1.0)]).collect());
    let (zeta, eta) = add_robust_lmis(&mut p, channels, config, x_of, &y);

    let sol = p.solve(&settings())?;
    if !sol.is_optimal() {
        return Ok(PowerMinResult::failed(sol.status, config, sol.iterations));
    }
    let solution = BeamformingSolution { w_mats: w.iter().map(|&v| sol.matrix(v)).collect(), an_cov: sol.matrix(q) };
    Ok(PowerMinResult {
        status: sol.status,
        f_t: solution.transmit_power(),
        solution,
        zeta: zeta.iter().map(|r| r.iter().map(|&z| sol.scalar(z)).collect()).collect(),
        eta: eta.iter().map(|&e| sol.scalar(e)).collect(),
        iterations: sol.iterations,
    })
}

/// Scales every stream down to make its rate constraint active and moves
/// the removed power into the artificial noise.
pub fn feasibility_recovery(
    sol: &BeamformingSolution,
    t: f64,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<BeamformingSolution> {
    check_instance(channels, config)?;
    if sol.w_mats.len() != config.n_lue || sol.n_tx() != config.n_tx {
        return Err(Error::Dimension("solution does not match the configuration".into()));
    }
    let mut out = sol.clone();
    for psr in psrs(t, channels, config)? {
        if psr.is_vacuous() {
            continue;
        }
        let signal = sol.w_mats[psr.n].quad_form(&psr.h);
        let total = signal + psr.interference_plus_noise(sol);
        if !(signal > 0.0) {
            return Err(Error::Contract(format!("stream {} carries no signal toward its receiver", psr.n)));
        }
        let y = psr.theta / (1.0 + psr.theta) * total / signal;
        if !(y > 0.0 && y <= 1.0 + 1e-6) {
            return Err(Error::Contract(format!("scaling {y} for stream {} is outside (0, 1]", psr.n)));
        }
        let w = &sol.w_mats[psr.n];
        out.w_mats[psr.n] = w.scale(y);
        out.an_cov = out.an_cov.axpy(1.0 - y, w);
    }
    Ok(out)
}

/// `W ↦ (W h)(W h)ᴴ / (hᴴ W h)` and the remainder `W − W̃`, which is PSD and
/// annihilates `h`.
pub fn rank_one_split(w: &HermitianMatrix, h: &CVec) -> (HermitianMatrix, HermitianMatrix) {
    let a = w.quad_form(h);
    let scale = w.max_eigenvalue().max(0.0) * h.norm_squared();
    if !(a > 1e-14 * scale) || scale == 0.0 {
        return (HermitianMatrix::zeros(w.dim()), w.clone());
    }
    let v = w.as_matrix() * h;
    let rank_one = HermitianMatrix::outer(&v).scale(1.0 / a);
    let rest = w.sub(&rank_one);
    (rank_one, rest)
}

const RANK_SKIP: f64 = 1e-12;

/// Projects every stream onto the rank-one matrix that keeps its signal
/// toward the intended receiver and moves the rest into the noise.
pub fn rank_one_recovery(
    sol: &BeamformingSolution,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<BeamformingSolution> {
    check_instance(channels, config)?;
    let mut out = sol.clone();
    for (n, h) in channels.h.iter().enumerate() {
        let w = &sol.w_mats[n];
        if w.rank_ratio() <= RANK_SKIP {
            continue;
        }
        let (rank_one, rest) = rank_one_split(w, h);
        out.w_mats[n] = rank_one;
        out.an_cov = out.an_cov.add(&rest);
    }
    check_recovery(sol, &out, channels, config)?;
    Ok(out)
}

fn check_recovery(
    before: &BeamformingSolution,
    after: &BeamformingSolution,
    channels: &ChannelSet,
    config: &SystemConfig,
) -> Result<()> {
    let p0 = before.transmit_power();
    let p1 = after.transmit_power();
    if (p1 - p0).abs() > 1e-9 * p0.max(1e-300) {
        return Err(Error::Contract(format!("recovery changed transmit power from {p0} to {p1}")));
    }
    for (n, h) in channels.h.iter().enumerate() {
        let sig = (before.w_mats[n].quad_form(h), after.w_mats[n].quad_form(h));
        let cov = (before.total_covariance().quad_form(h), after.total_covariance().quad_form(h));
        let level = cov.0.abs() + config.noise_lue_w;
        if (sig.0 - sig.1).abs() > 1e-7 * level || (cov.0 - cov.1).abs() > 1e-7 * level {
            return Err(Error::Contract(format!("recovery changed the rate constraint of stream {n}")));
        }
    }
    Ok(())
}

/// Worst-case constraint margins of a solution under the exact ball oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustMargins {
    /// `max_g gᴴ X_n g / σ_e² − 1` per `[m][n]`; feasible when `≤ 0`.
    pub leakage: Vec<Vec<f64>>,
    /// `min_g ξ gᴴ Y g / P^REQ − 1` per EHN; feasible when `≥ 0`.
    pub harvest: Vec<f64>,
}

impl RobustMargins {
    pub fn is_feasible(&self, rel_tol: f64) -> bool {
        self.leakage.iter().flatten().all(|&v| v <= rel_tol) && self.harvest.iter().all(|&v| v >= -rel_tol)
    }
}

pub fn robust_margins(sol: &BeamformingSolution, channels: &ChannelSet, config: &SystemConfig) -> Result<RobustMargins> {
    check_instance(channels, config)?;
    let total = sol.total_covariance();
    let mut leakage = Vec::with_capacity(config.n_eve);
    for m in 0..config.n_eve {
        let ball = channels.eve_ball(m);
        let c = own_weight(config)?;
        let row = (0..config.n_lue)
            .map(|n| {
                let x = sol.w_mats[n].scale(c).sub(&total);
                let (v, _) = worst_case_quadratic(&ball, &x, Extremum::Max)?;
                Ok(v / config.noise_eve_w - 1.0)
            })
            .collect::<Result<Vec<_>>>()?;
        leakage.push(row);
    }
    let harvest = (0..config.n_ehn)
        .map(|i| {
            let (v, _) = worst_case_quadratic(&channels.ehn_ball(i), &total, Extremum::Min)?;
            Ok(if config.p_req_w > 0.0 { config.eh_eff * v / config.p_req_w - 1.0 } else { f64::INFINITY })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RobustMargins { leakage, harvest })
}

/// Orthonormal bases of the zero-forcing subspaces: `phi` spans the
/// complement of all LUE channels, `xi[n]` that of all channels but `h_n`.
#[derive(Clone, Debug)]
pub struct ZfBases {
    pub phi: CMat,
    pub xi: Vec<CMat>,
}

pub fn zfbf_bases(channels: &ChannelSet) -> Result<ZfBases> {
    let n = channels.h.len();
    let nt = channels.n_tx();
    if nt <= n {
        return Err(Error::InvalidConfig(format!("{nt} antennas leave no null space for {n} receivers")));
    }
    let stack = |skip: Option<usize>| {
        let cols: Vec<&CVec> = channels.h.iter().enumerate().filter(|(k, _)| Some(*k) != skip).map(|(_, h)| h).collect();
        let mut m = CMat::zeros(nt, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_column(j, c);
        }
        m
    };
    let phi = null_space_basis(&stack(None));
    if phi.ncols() != nt - n {
        return Err(Error::InvalidConfig("LUE channels are linearly dependent".into()));
    }
    let xi: Vec<CMat> = (0..n).map(|k| null_space_basis(&stack(Some(k)))).collect();
    if xi.iter().any(|x| x.ncols() != nt - n + 1) {
        return Err(Error::InvalidConfig("LUE channels are linearly dependent".into()));
    }
    Ok(ZfBases { phi, xi })
}

/// `B V Bᴴ` for a basis `B` with orthonormal columns.
fn lift(basis: &CMat, v: &HermitianMatrix) -> HermitianMatrix {
    v.congruence(&basis.adjoint())
}

/// Power minimization with every stream confined to its zero-forcing
/// subspace and the noise to the common null space of the LUE channels.
pub fn solve_zfbf_power_min(t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<PowerMinResult> {
    check_instance(channels, config)?;
    let bases = zfbf_bases(channels)?;
    let constraints = psrs(t, channels, config)?;
    let c = own_weight(config)?;
    let d_w = bases.xi[0].ncols();
    let d_q = bases.phi.ncols();
    let sigma = config.noise_lue_w.sqrt();
    let mut p = ConicProblem::new();
    let w: Vec<VarId> = (0..config.n_lue).map(|_| p.add_psd(d_w)).collect();
    let q = p.add_psd(d_q);
    let mut objective = LinearExpr::new().trace_of(q, d_q, 1.0);
    for &wn in &w {
        objective = objective.trace_of(wn, d_w, 1.0);
    }
    p.minimize(objective);

    let h_bar: Vec<CVec> = constraints.iter().map(|psr| bases.xi[psr.n].adjoint() * &psr.h).collect();
    for psr in &constraints {
        let hs = HermitianMatrix::outer(&h_bar[psr.n].unscale(sigma));
        p.add_linear(LinearExpr::new().trace(w[psr.n], hs), Sense::Equal, psr.theta);
    }

    let x_of = |n: usize| {
        let mut x = AffineCov::default();
        for (k, &wk) in w.iter().enumerate() {
            x = x.term(Some(bases.xi[k].clone()), vec![(wk, if k == n { c - 1.0 } else { -1.0 })]);
        }
        x.term(Some(bases.phi.clone()), vec![(q, -1.0)])
    };
    let mut y = AffineCov::default();
    for (k, &wk) in w.iter().enumerate() {
        y = y.term(Some(bases.xi[k].clone()), vec![(wk, 1.0)]);
    }
    let y = y.term(Some(bases.phi.clone()), vec![(q, 1.0)]);
    let (zeta, eta) = add_robust_lmis(&mut p, channels, config, x_of, &y);

    let sol = p.solve(&settings())?;
    if !sol.is_optimal() {
        return Ok(PowerMinResult::failed(sol.status, config, sol.iterations));
    }
    let mut q_bar = sol.matrix(q);
    let mut w_mats = Vec::with_capacity(config.n_lue);
    for (n, &wn) in w.iter().enumerate() {
        let w_bar = sol.matrix(wn);
        let xi = &bases.xi[n];
        if w_bar.rank_ratio() <= RANK_SKIP {
            w_mats.push(lift(xi, &w_bar));
            continue;
        }
        let (rank_one, rest) = rank_one_split(&w_bar, &h_bar[n]);
        // The remainder is orthogonal to every LUE channel, so it lies in
        // the span of `phi`.
        let map = xi.adjoint() * &bases.phi;
        q_bar = q_bar.add(&rest.congruence(&map));
        w_mats.push(lift(xi, &rank_one));
    }
    let solution = BeamformingSolution { w_mats, an_cov: lift(&bases.phi, &q_bar) };
    Ok(PowerMinResult {
        status: sol.status,
        f_t: solution.transmit_power(),
        solution,
        zeta: zeta.iter().map(|r| r.iter().map(|&z| sol.scalar(z)).collect()).collect(),
        eta: eta.iter().map(|&e| sol.scalar(e)).collect(),
        iterations: sol.iterations,
    })
}

/// One fixed zero-forcing beam: `w = √power · direction`.
#[derive(Clone, Debug, PartialEq)]
pub struct MrtBeam {
    pub power: f64,
    pub direction: CVec,
}

impl MrtBeam {
    pub fn beam(&self) -> CVec {
        self.direction.scale(self.power.sqrt())
    }

    pub fn covariance(&self) -> HermitianMatrix {
        HermitianMatrix::outer(&self.direction).scale(self.power)
    }
}

/// Closed-form beams matched to the projected channels `Ξ_nᴴ h_n`, each
/// with the least power meeting its rate constraint.
pub fn mrt_zfbf_powers(t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<Vec<MrtBeam>> {
    check_instance(channels, config)?;
    let bases = zfbf_bases(channels)?;
    psrs(t, channels, config)?
        .into_iter()
        .map(|psr| {
            let xi = &bases.xi[psr.n];
            let projected = xi.adjoint() * &psr.h;
            let gain = projected.norm_squared();
            if !(gain > 0.0) {
                return Err(Error::InvalidConfig(format!("LUE {} has no zero-forcing gain", psr.n)));
            }
            let direction = (xi * &projected).unscale(gain.sqrt());
            Ok(MrtBeam { power: psr.theta * psr.noise_w / gain, direction })
        })
        .collect()
}

/// Fixed zero-forcing beams with the artificial noise as the only
/// optimization variable.
pub fn solve_mrt_zfbf_an(t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<PowerMinResult> {
    check_instance(channels, config)?;
    let bases = zfbf_bases(channels)?;
    let beams = mrt_zfbf_powers(t, channels, config)?;
    let c = own_weight(config)?;
    let w_fixed: Vec<HermitianMatrix> = beams.iter().map(MrtBeam::covariance).collect();
    let w_sum = w_fixed.iter().fold(HermitianMatrix::zeros(config.n_tx), |acc, w| acc.add(w));
    let d_q = bases.phi.ncols();
    let mut p = ConicProblem::new();
    let q = p.add_psd(d_q);
    p.minimize(LinearExpr::new().trace_of(q, d_q, 1.0));
    let x_of = |n: usize| {
        AffineCov::default()
            .with_constant(w_fixed[n].scale(c).sub(&w_sum))
            .term(Some(bases.phi.clone()), vec![(q, -1.0)])
    };
    let y = AffineCov::default().with_constant(w_sum.clone()).term(Some(bases.phi.clone()), vec![(q, 1.0)]);
    let (zeta, eta) = add_robust_lmis(&mut p, channels, config, x_of, &y);

    let sol = p.solve(&settings())?;
    if !sol.is_optimal() {
        return Ok(PowerMinResult::failed(sol.status, config, sol.iterations));
    }
    let solution = BeamformingSolution { w_mats: w_fixed, an_cov: lift(&bases.phi, &sol.matrix(q)) };
    Ok(PowerMinResult {
        status: sol.status,
        f_t: solution.transmit_power(),
        solution,
        zeta: zeta.iter().map(|r| r.iter().map(|&z| sol.scalar(z)).collect()).collect(),
        eta: eta.iter().map(|&e| sol.scalar(e)).collect(),
        iterations: sol.iterations,
    })
}

/// `f(t)` for the chosen inner solver.
pub fn power_min(alg: Algorithm, t: f64, channels: &ChannelSet, config: &SystemConfig) -> Result<PowerMinResult> {
    match alg {
        Algorithm::Sdp => solve_power_min(t, channels, config),
        Algorithm::Zfbf => solve_zfbf_power_min(t, channels, config),
        Algorithm::MrtZfbf => solve_mrt_zfbf_an(t, channels, config),
    }
}

/// Largest sum secrecy rate a single user could reach with the whole
/// budget and no interference, which bounds `t^max` from above.
fn tmax_upper_bound(channels: &ChannelSet, config: &SystemConfig) -> f64 {
    channels
        .h
        .iter()
        .zip(&config.psr_ratios)
        .filter(|(_, &phi)| phi > 0.0)
        .map(|(h, &phi)| {
            let snr = config.p_max_w * h.norm_squared() / config.noise_lue_w;
            config.bandwidth_hz / phi * (snr.ln_1p() - config.r_aux_tilde())
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug)]
pub struct TmaxResult {
    pub t_max: f64,
    /// `false` when `f(0) > P^max` or `t = 0` is infeasible.
    pub feasible_at_origin: bool,
    /// `f(0)`, infinite when infeasible.
    pub f_origin: f64,
    /// Optimal inner solution at `t_max`.
    pub at_t_max: Option<PowerMinResult>,
    pub evaluations: usize,
}

/// Relative tolerance on `f(t^max) = P^max`.
pub const TMAX_TOL: f64 = 1e-6;

pub fn find_tmax(channels: &ChannelSet, config: &SystemConfig) -> Result<TmaxResult> {
    find_tmax_with(Algorithm::Sdp, channels, config, TMAX_TOL)
}

/// Root of `f(t) = P^max` by safeguarded regula falsi on `ln f`, which is
/// close to linear in `t`.
pub fn find_tmax_with(alg: Algorithm, channels: &ChannelSet, config: &SystemConfig, rel_tol: f64) -> Result<TmaxResult> {
    let target = config.p_max_w;
    let origin = power_min(alg, 0.0, channels, config)?;
    let mut evaluations = 1;
    let f0 = if origin.is_optimal() { origin.f_t } else { f64::INFINITY };
    if !(f0 <= target) {
        return Ok(TmaxResult { t_max: 0.0, feasible_at_origin: false, f_origin: f0, at_t_max: None, evaluations });
    }
    let t_ub = tmax_upper_bound(channels, config);
    if !(t_ub > 0.0) || !t_ub.is_finite() {
        return Ok(TmaxResult {
            t_max: 0.0,
            feasible_at_origin: true,
            f_origin: f0,
            at_t_max: Some(origin),
            evaluations,
        });
    }
    let (mut lo, mut f_lo, mut best) = (0.0, f0, origin);
    let (mut hi, mut f_hi) = (t_ub, f64::NAN);
    let top = power_min(alg, t_ub, channels, config)?;
    evaluations += 1;
    if top.is_optimal() {
        f_hi = top.f_t;
        if f_hi <= target * (1.0 + rel_tol) {
            return Ok(TmaxResult { t_max: t_ub, feasible_at_origin: true, f_origin: f0, at_t_max: Some(top), evaluations });
        }
    }
    // Consecutive moves of the same bracket end; two in a row force a
    // bisection step.
    let mut same_side = 0;
    let mut last_low = None;
    for _ in 0..200 {
        if (f_lo - target).abs() <= rel_tol * target || hi - lo <= 1e-13 * hi {
            break;
        }
        let width = hi - lo;
        let mut mid = 0.5 * (lo + hi);
        if f_lo > 0.0 && f_hi.is_finite() && same_side < 2 {
            let (a, b) = (f_lo.ln(), f_hi.ln());
            let guess = lo + (target.ln() - a) / (b - a) * width;
            if guess.is_finite() {
                mid = guess.clamp(lo + 1e-3 * width, hi - 1e-3 * width);
            }
        }
        let r = power_min(alg, mid, channels, config)?;
        evaluations += 1;
        let low = r.is_optimal() && r.f_t <= target;
        same_side = if last_low == Some(low) { same_side + 1 } else { 1 };
        last_low = Some(low);
        if low {
            lo = mid;
            f_lo = r.f_t;
            best = r;
        } else if r.is_optimal() && (r.f_t - target).abs() <= rel_tol * target {
            // Slightly above the budget but within tolerance.
            lo = mid;
            best = r;
            break;
        } else {
            hi = mid;
            f_hi = if r.is_optimal() { r.f_t } else { f64::NAN };
        }
        if same_side > 2 {
            same_side = 0;
        }
    }
    Ok(TmaxResult { t_max: lo, feasible_at_origin: true, f_origin: f0, at_t_max: Some(best), evaluations })
}

/// Grid of the one-dimensional search.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpec {
    /// Grid step; `None` means `t^max / 10`. The two default refinement
    /// passes bring the resolution down to `t^max / 40`.
    pub dt: Option<f64>,
    /// Number of local passes halving the step around the incumbent.
    pub refinements: usize,
    /// Relative improvement below which a grid point counts as stalled.
    pub rel_improvement: f64,
    /// Stalled points in a row that stop the search.
    pub patience: usize,
    pub max_points: usize,
}

impl Default for SearchSpec {
    fn default() -> Self {
        SearchSpec { dt: None, refinements: 2, rel_improvement: 1e-4, patience: 3, max_points: 400 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub f_t: f64,
    pub total_power_w: f64,
    pub see: f64,
    /// Running maximum of `see`.
    pub asee: f64,
}

#[derive(Clone, Debug)]
pub struct SeeSolution {
    pub algorithm: Algorithm,
    pub solution: BeamformingSolution,
    pub t_star: f64,
    pub see_star: f64,
    pub trace: Vec<TracePoint>,
    /// Metrics of `solution` on the estimated channels.
    pub report: Option<MetricsReport>,
    pub t_max: f64,
    /// No rate, including zero, fits the power budget.
    pub outage: bool,
    /// Inner solves of the search, the bracketing of `t^max` included.
    pub evaluations: usize,
    /// Grid points whose inner solve failed, with the reason.
    pub failures: Vec<(f64, String)>,
}

fn see_of(t: f64, f_t: f64, config: &SystemConfig) -> (f64, f64) {
    let total = f_t / config.amp_eff + config.circuit_power();
    (total, t / total)
}

fn outage_solution(alg: Algorithm, config: &SystemConfig, tm: &TmaxResult) -> SeeSolution {
    SeeSolution {
        algorithm: alg,
        solution: BeamformingSolution::zeros(config.n_tx, config.n_lue),
        t_star: 0.0,
        see_star: 0.0,
        trace: Vec::new(),
        report: None,
        t_max: 0.0,
        outage: true,
        evaluations: tm.evaluations,
        failures: Vec::new(),
    }
}

/// Tightens the rate constraints and, for full covariances, projects the
/// streams to rank one.
fn finalize(alg: Algorithm, t: f64, sol: &BeamformingSolution, channels: &ChannelSet, config: &SystemConfig) -> Result<BeamformingSolution> {
    let mut out = feasibility_recovery(sol, t, channels, config)?;
    if alg == Algorithm::Sdp && out.max_rank_ratio() > RANK_SKIP {
        out = rank_one_recovery(&out, channels, config)?;
    }
    Ok(out)
}

fn report(channels: &ChannelSet, config: &SystemConfig, sol: &BeamformingSolution) -> Result<MetricsReport> {
    evaluate(config, &channels.h, &channels.g_e_bar, &channels.g_h_bar, sol)
}

/// The two-stage search: a grid over the sum secrecy rate `t`, each point
/// solved by the inner power minimization, keeping the best `t / P^TOT(t)`.
pub fn tsbaj(alg: Algorithm, channels: &ChannelSet, config: &SystemConfig, search: &SearchSpec) -> Result<SeeSolution> {
    check_instance(channels, config)?;
    let tm = find_tmax_with(alg, channels, config, TMAX_TOL)?;
    tsbaj_from_tmax(alg, channels, config, search, &tm)
}

/// Search from an already computed `t^max`.
pub fn tsbaj_from_tmax(
    alg: Algorithm,
    channels: &ChannelSet,
    config: &SystemConfig,
    search: &SearchSpec,
    tm: &TmaxResult,
) -> Result<SeeSolution> {
    check_instance(channels, config)?;
    if !tm.feasible_at_origin {
        return Ok(outage_solution(alg, config, tm));
    }
    let t_max = tm.t_max;
    let at_max = tm.at_t_max.clone().expect("feasible origin has a solution");
    let mut evaluations = tm.evaluations;
    let mut failures = Vec::new();
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut best: Option<(f64, f64, PowerMinResult)> = None;

    let consider = |t: f64, r: PowerMinResult, trace: &mut Vec<TracePoint>, best: &mut Option<(f64, f64, PowerMinResult)>| {
        let (total, see) = see_of(t, r.f_t, config);
        let prev = trace.last().map_or(0.0, |p| p.asee);
        trace.push(TracePoint { t, f_t: r.f_t, total_power_w: total, see, asee: prev.max(see) });
        if best.as_ref().is_none_or(|b| see > b.1) {
            *best = Some((t, see, r));
        }
    };

    let dt = search.dt.unwrap_or(t_max / 10.0);
    if t_max > 0.0 && dt > 0.0 {
        let mut stalled = 0;
        let mut k = 0usize;
        loop {
            let t = k as f64 * dt;
            if t >= t_max || k >= search.max_points {
                consider(t_max, at_max.clone(), &mut trace, &mut best);
                break;
            }
            evaluations += 1;
            match power_min(alg, t, channels, config) {
                Ok(r) if r.is_optimal() && r.f_t <= config.p_max_w => {
                    let before = trace.last().map_or(0.0, |p| p.asee);
                    consider(t, r, &mut trace, &mut best);
                    let after = trace.last().map_or(0.0, |p| p.asee);
                    if after > before * (1.0 + search.rel_improvement) {
                        stalled = 0;
                    } else {
                        stalled += 1;
                    }
                    if stalled >= search.patience {
                        break;
                    }
                }
                Ok(r) if r.is_optimal() => break,
                Ok(r) => failures.push((t, format!("inner solve ended with status {:?}", r.status))),
                Err(e) => failures.push((t, e.to_string())),
            }
            k += 1;
        }
        let mut step = dt;
        for _ in 0..search.refinements {
            step *= 0.5;
            let center = best.as_ref().map_or(0.0, |b| b.0);
            for t in [center - step, center + step] {
                if t <= 0.0 || t >= t_max {
                    continue;
                }
                evaluations += 1;
                match power_min(alg, t, channels, config) {
                    Ok(r) if r.is_optimal() && r.f_t <= config.p_max_w => {
                        let (_, see) = see_of(t, r.f_t, config);
                        if best.as_ref().is_none_or(|b| see > b.1) {
                            best = Some((t, see, r));
                        }
                    }
                    Ok(_) => {}
                    Err(e) => failures.push((t, e.to_string())),
                }
            }
        }
    } else {
        consider(0.0, at_max, &mut trace, &mut best);
    }
    let (t_star, _, r) = best.ok_or_else(|| Error::Solver("no grid point could be solved".into()))?;
    let solution = finalize(alg, t_star, &r.solution, channels, config)?;
    let (_, see_star) = see_of(t_star, solution.transmit_power(), config);
    Ok(SeeSolution {
        algorithm: alg,
        report: Some(report(channels, config, &solution)?),
        solution,
        t_star,
        see_star,
        trace,
        t_max,
        outage: false,
        evaluations,
        failures,
    })
}

pub fn sdp_tsbaj(channels: &ChannelSet, config: &SystemConfig, search: &SearchSpec) -> Result<SeeSolution> {
    tsbaj(Algorithm::Sdp, channels, config, search)
}

pub fn zfbf_tsbaj(channels: &ChannelSet, config: &SystemConfig, search: &SearchSpec) -> Result<SeeSolution> {
    tsbaj(Algorithm::Zfbf, channels, config, search)
}

pub fn mrt_zfbf_tsbaj(channels: &ChannelSet, config: &SystemConfig, search: &SearchSpec) -> Result<SeeSolution> {
    tsbaj(Algorithm::MrtZfbf, channels, config, search)
}

/// Sum-rate maximization baseline: the solution at `t = t^max`.
pub fn srm_solve(channels: &ChannelSet, config: &SystemConfig, variant: Algorithm) -> Result<SeeSolution> {
    check_instance(channels, config)?;
    let tm = find_tmax_with(variant, channels, config, TMAX_TOL)?;
    srm_from_tmax(variant, channels, config, &tm)
}

/// Baseline from an already computed `t^max`.
pub fn srm_from_tmax(variant: Algorithm, channels: &ChannelSet, config: &SystemConfig, tm: &TmaxResult) -> Result<SeeSolution> {
    if !tm.feasible_at_origin {
        return Ok(outage_solution(variant, config, tm));
    }
    let r = tm.at_t_max.as_ref().expect("feasible origin has a solution");
    let solution = finalize(variant, tm.t_max, &r.solution, channels, config)?;
    let (total, see) = see_of(tm.t_max, solution.transmit_power(), config);
    Ok(SeeSolution {
        algorithm: variant,
        report: Some(report(channels, config, &solution)?),
        solution,
        t_star: tm.t_max,
        see_star: see,
        trace: vec![TracePoint { t: tm.t_max, f_t: r.f_t, total_power_w: total, see, asee: see }],
        t_max: tm.t_max,
        outage: false,
        evaluations: tm.evaluations,
        failures: Vec::new(),
    })
}

/// `f(0)` or infinity when the zero-rate problem is infeasible; a trial is
/// in outage for every budget below this value.
pub fn origin_power(alg: Algorithm, channels: &ChannelSet, config: &SystemConfig) -> Result<f64> {
    let r = power_min(alg, 0.0, channels, config)?;
    Ok(if r.is_optimal() { r.f_t } else { f64::INFINITY })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::draw_channels;
    use crate::lmi::theta;
    use crate::model::C64;

    fn scalar_config(n_tx: usize) -> SystemConfig {
        SystemConfig {
            n_tx,
            n_lue: 1,
            n_eve: 0,
            n_ehn: 0,
            psr_ratios: vec![1.0],
            lue_distances_m: vec![16.0],
            eve_distances_m: vec![],
            ehn_distances_m: vec![],
            ..SystemConfig::default()
        }
    }

    fn small_config() -> SystemConfig {
        SystemConfig {
            n_tx: 4,
            n_lue: 2,
            n_eve: 1,
            n_ehn: 1,
            psr_ratios: vec![0.5, 0.5],
            lue_distances_m: vec![16.0, 19.0],
            eve_distances_m: vec![8.0],
            ehn_distances_m: vec![6.0],
            ..SystemConfig::default()
        }
    }

    fn closed_form(t: f64, ch: &ChannelSet, cfg: &SystemConfig) -> f64 {
        theta(t, 1.0, cfg.bandwidth_hz, cfg.r_aux_nats_s).unwrap() * cfg.noise_lue_w / ch.h[0].norm_squared()
    }

    #[test]
    fn scalar_power_matches_closed_form() {
        let cfg = scalar_config(3);
        let ch = draw_channels(&cfg, 5).unwrap();
        for t in [0.0, 2e5, 8e5] {
            let want = closed_form(t, &ch, &cfg);
            for alg in Algorithm::ALL {
                let r = power_min(alg, t, &ch, &cfg).unwrap();
                assert!(r.is_optimal());
                assert!((r.f_t - want).abs() <= 1e-6 * want, "{alg} t={t}: {} vs {want}", r.f_t);
            }
        }
    }

    #[test]
    fn zero_demand_gives_zero_power() {
        let mut cfg = small_config();
        cfg.r_aux_nats_s = 0.0;
        cfg.n_eve = 0;
        cfg.eve_distances_m.clear();
        cfg.p_req_w = 0.0;
        let ch = draw_channels(&cfg, 1).unwrap();
        let r = solve_power_min(0.0, &ch, &cfg).unwrap();
        assert!(r.is_optimal());
        assert!(r.f_t < 1e-6, "{}", r.f_t);
    }

    #[test]
    fn scalar_tmax_inverts_closed_form() {
        let cfg = scalar_config(2);
        let ch = draw_channels(&cfg, 9).unwrap();
        let snr = cfg.p_max_w * ch.h[0].norm_squared() / cfg.noise_lue_w;
        let want = cfg.bandwidth_hz * (snr.ln_1p() - cfg.r_aux_tilde());
        let got = find_tmax(&ch, &cfg).unwrap();
        assert!(got.feasible_at_origin);
        assert!((got.t_max - want).abs() <= 1e-6 * want, "{} vs {want}", got.t_max);
    }

    #[test]
    fn budget_below_origin_power_is_flagged() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 2).unwrap();
        let f0 = origin_power(Algorithm::Sdp, &ch, &cfg).unwrap();
        let mut low = cfg.clone();
        low.p_max_w = 0.5 * f0;
        let r = find_tmax(&ch, &low).unwrap();
        assert!(!r.feasible_at_origin);
        assert_eq!(r.t_max, 0.0);
    }

    #[test]
    fn doubling_budget_never_lowers_tmax() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 3).unwrap();
        let a = find_tmax(&ch, &cfg).unwrap().t_max;
        let mut big = cfg.clone();
        big.p_max_w *= 2.0;
        let b = find_tmax(&ch, &big).unwrap().t_max;
        assert!(b >= a);
    }

    #[test]
    fn feasibility_recovery_hand_example() {
        let cfg = SystemConfig {
            n_tx: 2,
            noise_lue_w: 1.0,
            bandwidth_hz: 1.0,
            r_aux_nats_s: 0.0,
            psr_ratios: vec![1.0],
            ..scalar_config(2)
        };
        let h = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let ch = ChannelSet { h: vec![h], g_e_bar: vec![], g_h_bar: vec![], theta_e: vec![], theta_h: vec![] };
        // θ(t) = e^t − 1 = 1 at t = ln 2
        let t = 2f64.ln();
        let w = HermitianMatrix::from_diagonal(&[2.0, 0.5]);
        let q = HermitianMatrix::from_diagonal(&[0.0, 1.0]);
        let sol = BeamformingSolution { w_mats: vec![w.clone()], an_cov: q.clone() };
        let out = feasibility_recovery(&sol, t, &ch, &cfg).unwrap();
        let hm = HermitianMatrix::outer(&ch.h[0]);
        let sig = out.w_mats[0].inner(&hm);
        assert!((sig - 1.5).abs() < 1e-12);
        assert!((out.an_cov.inner(&hm) - 0.5).abs() < 1e-12);
        assert!((2.0 * sig - (sig + out.an_cov.inner(&hm) + 1.0)).abs() < 1e-12);
        assert_eq!(out.transmit_power(), sol.transmit_power());
        // an active input is a fixed point
        let again = feasibility_recovery(&out, t, &ch, &cfg).unwrap();
        assert!(again.w_mats[0].sub(&out.w_mats[0]).frobenius_norm() < 1e-12);
    }

    #[test]
    fn feasibility_recovery_rejects_infeasible_input() {
        let cfg = SystemConfig { noise_lue_w: 1.0, bandwidth_hz: 1.0, r_aux_nats_s: 0.0, ..scalar_config(2) };
        let h = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let ch = ChannelSet { h: vec![h], g_e_bar: vec![], g_h_bar: vec![], theta_e: vec![], theta_h: vec![] };
        let sol = BeamformingSolution { w_mats: vec![HermitianMatrix::from_diagonal(&[0.1, 0.0])], an_cov: HermitianMatrix::zeros(2) };
        assert!(matches!(feasibility_recovery(&sol, 2f64.ln(), &ch, &cfg), Err(Error::Contract(_))));
    }

    #[test]
    fn rank_one_split_removes_orthogonal_part() {
        let h = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0), C64::new(0.0, 0.0)]);
        let v = CVec::from_vec(vec![C64::new(1.0, 0.5), C64::new(0.3, 0.0), C64::new(0.2, -0.1)]);
        // π ⟂ h
        let pi = CVec::from_vec(vec![C64::new(0.0, 1.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        assert!(h.dotc(&pi).norm() < 1e-15);
        let w = HermitianMatrix::outer(&v).add(&HermitianMatrix::outer(&pi));
        let (r1, rest) = rank_one_split(&w, &h);
        // W h = v (vᴴ h), so W̃ = v vᴴ exactly.
        assert!(r1.sub(&HermitianMatrix::outer(&v)).frobenius_norm() < 1e-12);
        assert!(rest.sub(&HermitianMatrix::outer(&pi)).frobenius_norm() < 1e-12);
        let (same, zero) = rank_one_split(&HermitianMatrix::outer(&v), &h);
        assert!(same.sub(&HermitianMatrix::outer(&v)).frobenius_norm() < 1e-12);
        assert!(zero.frobenius_norm() < 1e-12);
    }

    #[test]
    fn rank_one_input_is_unchanged() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 4).unwrap();
        let sol = BeamformingSolution {
            w_mats: ch.h.iter().map(|h| HermitianMatrix::outer(&h.unscale(h.norm()))).collect(),
            an_cov: HermitianMatrix::identity(4),
        };
        let out = rank_one_recovery(&sol, &ch, &cfg).unwrap();
        assert_eq!(out, sol);
    }

    #[test]
    fn zf_bases_null_the_other_channels() {
        let cfg = SystemConfig::default();
        let ch = draw_channels(&cfg, 11).unwrap();
        let b = zfbf_bases(&ch).unwrap();
        let eye = |d: usize| CMat::identity(d, d);
        assert!((b.phi.adjoint() * &b.phi - eye(4)).norm() < 1e-12);
        for (n, xi) in b.xi.iter().enumerate() {
            assert_eq!(xi.ncols(), 5);
            assert!((xi.adjoint() * xi - eye(5)).norm() < 1e-12);
            for (k, h) in ch.h.iter().enumerate() {
                let leak = (h.adjoint() * xi).norm() / h.norm();
                if k != n {
                    assert!(leak < 1e-10);
                }
            }
            assert!((ch.h[n].adjoint() * &b.phi).norm() / ch.h[n].norm() < 1e-10);
        }
        let single = scalar_config(3);
        let ch1 = draw_channels(&single, 1).unwrap();
        let b1 = zfbf_bases(&ch1).unwrap();
        assert_eq!(b1.xi[0].ncols(), 3);
        assert!((b1.xi[0].adjoint() * &b1.xi[0] - eye(3)).norm() < 1e-12);
        let mut bad = single.clone();
        bad.n_tx = 1;
        bad.lue_distances_m = vec![16.0];
        let chb = ChannelSet { h: vec![CVec::from_vec(vec![C64::new(1.0, 0.0)])], ..ch1 };
        assert!(zfbf_bases(&chb).is_err());
    }

    #[test]
    fn zf_solution_has_no_interference() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 6).unwrap();
        let t = 1e5;
        let r = solve_zfbf_power_min(t, &ch, &cfg).unwrap();
        assert!(r.is_optimal());
        for (n, h) in ch.h.iter().enumerate() {
            let scale = r.f_t * h.norm_squared();
            for (k, w) in r.solution.w_mats.iter().enumerate() {
                if k != n {
                    assert!(w.quad_form(h).abs() < 1e-10 * scale);
                }
            }
            assert!(r.solution.an_cov.quad_form(h).abs() < 1e-10 * scale);
            let psr = build_psr(n, t, h, &cfg).unwrap();
            assert!(psr.relative_slack(&r.solution).abs() < 1e-6);
        }
        assert!(r.solution.max_rank_ratio() < 1e-6);
    }

    #[test]
    fn mrt_beams_meet_rate_with_equality() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 7).unwrap();
        let t = 2e5;
        let beams = mrt_zfbf_powers(t, &ch, &cfg).unwrap();
        let sol = BeamformingSolution {
            w_mats: beams.iter().map(MrtBeam::covariance).collect(),
            an_cov: HermitianMatrix::zeros(cfg.n_tx),
        };
        for (n, h) in ch.h.iter().enumerate() {
            let sinr = crate::model::sinr_lue(h, &sol, n, cfg.noise_lue_w).unwrap();
            let want = theta(t, cfg.psr_ratios[n], cfg.bandwidth_hz, cfg.r_aux_nats_s).unwrap();
            assert!((sinr - want).abs() < 1e-10 * want);
        }
        // doubling θ doubles the power
        let t2 = |t: f64| {
            let th = theta(t, 0.5, cfg.bandwidth_hz, cfg.r_aux_nats_s).unwrap();
            ((2.0 * th).ln_1p() * cfg.bandwidth_hz - cfg.r_aux_nats_s) / 0.5
        };
        let doubled = mrt_zfbf_powers(t2(t), &ch, &cfg).unwrap();
        assert!((doubled[0].power - 2.0 * beams[0].power).abs() < 1e-9 * beams[0].power);
    }

    #[test]
    fn mrt_without_eves_or_ehns_uses_no_noise() {
        let cfg = SystemConfig {
            n_eve: 0,
            n_ehn: 0,
            eve_distances_m: vec![],
            ehn_distances_m: vec![],
            ..small_config()
        };
        let ch = draw_channels(&cfg, 8).unwrap();
        let r = solve_mrt_zfbf_an(1e5, &ch, &cfg).unwrap();
        assert!(r.is_optimal());
        assert!(r.solution.an_cov.trace() < 1e-6 * r.f_t);
    }

    #[test]
    fn power_is_ordered_across_families() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 10).unwrap();
        let t = 1.5e5;
        let f: Vec<f64> = Algorithm::ALL.iter().map(|&a| power_min(a, t, &ch, &cfg).unwrap().f_t).collect();
        assert!(f[0] <= f[1] * (1.0 + 1e-6), "{f:?}");
        assert!(f[1] <= f[2] * (1.0 + 1e-6), "{f:?}");
    }

    #[test]
    fn optimal_solutions_are_robust() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 12).unwrap();
        for alg in Algorithm::ALL {
            let r = power_min(alg, 1e5, &ch, &cfg).unwrap();
            let m = robust_margins(&r.solution, &ch, &cfg).unwrap();
            assert!(m.is_feasible(1e-6), "{alg}: {m:?}");
        }
    }

    #[test]
    fn scalar_search_finds_closed_form_optimum() {
        let cfg = scalar_config(2);
        let ch = draw_channels(&cfg, 13).unwrap();
        let pcir = cfg.circuit_power();
        let see = |t: f64| t / (closed_form(t, &ch, &cfg) / cfg.amp_eff + pcir);
        // golden-section on the closed form
        let tmax = find_tmax(&ch, &cfg).unwrap().t_max;
        let (mut a, mut b) = (0.0, tmax);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let (c, d) = (b - g * (b - a), a + g * (b - a));
            if see(c) > see(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let t_opt = 0.5 * (a + b);
        let res = sdp_tsbaj(&ch, &cfg, &SearchSpec::default()).unwrap();
        assert!((res.t_star - t_opt).abs() <= tmax / 10.0, "{} vs {t_opt}", res.t_star);
        assert!(res.trace.windows(2).all(|w| w[1].asee >= w[0].asee));
        let zf = zfbf_tsbaj(&ch, &cfg, &SearchSpec::default()).unwrap();
        let mrt = mrt_zfbf_tsbaj(&ch, &cfg, &SearchSpec::default()).unwrap();
        assert!((zf.see_star - res.see_star).abs() < 1e-5 * res.see_star);
        assert!((mrt.see_star - res.see_star).abs() < 1e-5 * res.see_star);
    }

    #[test]
    fn huge_circuit_power_pushes_optimum_to_tmax() {
        let mut cfg = scalar_config(2);
        cfg.p_sp_w = 1e9;
        let ch = draw_channels(&cfg, 14).unwrap();
        let res = sdp_tsbaj(&ch, &cfg, &SearchSpec::default()).unwrap();
        assert!((res.t_star - res.t_max).abs() < 1e-9 * res.t_max);
    }

    #[test]
    fn srm_sits_at_tmax_and_loses_to_search() {
        let cfg = small_config();
        let ch = draw_channels(&cfg, 15).unwrap();
        let srm = srm_solve(&ch, &cfg, Algorithm::Sdp).unwrap();
        let ts = sdp_tsbaj(&ch, &cfg, &SearchSpec::default()).unwrap();
        assert!(srm.t_star >= ts.t_star);
        assert!(ts.see_star >= srm.see_star * (1.0 - 1e-9));
        assert!(srm.solution.max_rank_ratio() <= 1e-6);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("qp".parse::<Algorithm>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn cvec(n: usize) -> impl Strategy<Value = CVec> {
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
                .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn rank_one_split_keeps_signal(vs in prop::collection::vec(cvec(4), 1..4), h in cvec(4)) {
                let w = vs.iter().fold(HermitianMatrix::zeros(4), |acc, v| acc.add(&HermitianMatrix::outer(v)));
                prop_assume!(w.quad_form(&h) > 1e-6);
                let (r1, rest) = rank_one_split(&w, &h);
                let scale = w.frobenius_norm();
                prop_assert!(r1.add(&rest).sub(&w).frobenius_norm() <= 1e-12 * scale);
                prop_assert!((r1.quad_form(&h) - w.quad_form(&h)).abs() <= 1e-10 * scale * h.norm_squared());
                prop_assert!(rest.quad_form(&h).abs() <= 1e-10 * scale * h.norm_squared());
                prop_assert!(r1.is_psd_with(1e-10 * scale) && rest.is_psd_with(1e-10 * scale));
                prop_assert!(r1.rank_ratio() <= 1e-10);
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(6))]

            #[test]
            fn power_grows_with_rate(seed in 0u64..1000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
                let cfg = small_config();
                let ch = draw_channels(&cfg, seed).unwrap();
                let (lo, hi) = (1.5e5 * a.min(b), 1.5e5 * a.max(b));
                // the heuristics pin each PSR with equality, so only the
                // relaxation is monotone once harvesting binds
                let f_lo = solve_power_min(lo, &ch, &cfg).unwrap();
                let f_hi = solve_power_min(hi, &ch, &cfg).unwrap();
                if f_lo.is_optimal() && f_hi.is_optimal() {
                    prop_assert!(f_lo.f_t <= f_hi.f_t * (1.0 + 1e-6) + 1e-9, "{} > {}", f_lo.f_t, f_hi.f_t);
                }
            }

            #[test]
            fn families_are_ordered(seed in 0u64..1000, a in 0.0f64..1.0) {
                let cfg = small_config();
                let ch = draw_channels(&cfg, seed).unwrap();
                let t = 1.5e5 * a;
                let r: Vec<PowerMinResult> = Algorithm::ALL.iter().map(|&g| power_min(g, t, &ch, &cfg).unwrap()).collect();
                for k in 0..2 {
                    if r[k].is_optimal() && r[k + 1].is_optimal() {
                        prop_assert!(r[k].f_t <= r[k + 1].f_t * (1.0 + 1e-6) + 1e-9);
                    }
                }
            }

            #[test]
            fn recovered_rates_are_tight(seed in 0u64..1000, a in 0.05f64..1.0) {
                let cfg = small_config();
                let ch = draw_channels(&cfg, seed).unwrap();
                let t = 1.5e5 * a;
                let r = solve_power_min(t, &ch, &cfg).unwrap();
                prop_assume!(r.is_optimal());
                let sol = feasibility_recovery(&r.solution, t, &ch, &cfg).unwrap();
                for (n, h) in ch.h.iter().enumerate() {
                    let th = theta(t, cfg.psr_ratios[n], cfg.bandwidth_hz, cfg.r_aux_nats_s).unwrap();
                    let sinr = crate::model::sinr_lue(h, &sol, n, cfg.noise_lue_w).unwrap();
                    prop_assert!((sinr / th - 1.0).abs() <= 1e-8, "{}", sinr / th);
                }
                prop_assert!(sol.transmit_power() <= r.solution.transmit_power() * (1.0 + 1e-12));
            }
        }
    }
}
