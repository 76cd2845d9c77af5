//! System parameters, beamforming solutions and the closed-form link
//! metrics (rates in nats/s, powers in W).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use see_sdp::{HermitianMatrix, C64, CMat, CVec};

/// All scalar parameters of one MISOME-SWIPT scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_lue: usize,
    pub n_eve: usize,
    pub n_ehn: usize,
    pub bandwidth_hz: f64,
    pub carrier_hz: f64,
    pub noise_lue_w: f64,
    pub noise_eve_w: f64,
    pub noise_ehn_w: f64,
    pub p_max_w: f64,
    /// Baseband processing power scaling the circuit model.
    pub p_sp_w: f64,
    pub amp_eff: f64,
    pub eh_eff: f64,
    pub p_req_w: f64,
    pub r_aux_nats_s: f64,
    pub psr_ratios: Vec<f64>,
    pub lue_distances_m: Vec<f64>,
    pub eve_distances_m: Vec<f64>,
    pub ehn_distances_m: Vec<f64>,
    /// Squared uncertainty radius as a fraction of the per-antenna channel
    /// variance.
    pub uncertainty_fraction: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_tx: 7,
            n_lue: 3,
            n_eve: 2,
            n_ehn: 2,
            bandwidth_hz: 200e3,
            carrier_hz: 900e6,
            noise_lue_w: dbm_to_w(-30.0),
            noise_eve_w: dbm_to_w(-30.0),
            noise_ehn_w: dbm_to_w(-30.0),
            p_max_w: dbm_to_w(43.0),
            p_sp_w: 1.0,
            amp_eff: 0.8,
            eh_eff: 0.8,
            p_req_w: dbm_to_w(-5.0),
            r_aux_nats_s: 100e3,
            psr_ratios: vec![0.4, 0.3, 0.3],
            lue_distances_m: vec![16.0, 19.0, 22.0],
            eve_distances_m: vec![8.0, 8.0],
            ehn_distances_m: vec![6.0, 6.0],
            uncertainty_fraction: 0.05,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_tx == 0 || self.n_lue == 0 {
            return bad("need at least one antenna and one LUE".into());
        }
        if self.n_tx < self.n_lue + 1 {
            return bad(format!("n_tx = {} must be at least n_lue + 1 = {}", self.n_tx, self.n_lue + 1));
        }
        let lens = [
            ("psr_ratios", self.psr_ratios.len(), self.n_lue),
            ("lue_distances_m", self.lue_distances_m.len(), self.n_lue),
            ("eve_distances_m", self.eve_distances_m.len(), self.n_eve),
            ("ehn_distances_m", self.ehn_distances_m.len(), self.n_ehn),
        ];
        for (name, got, want) in lens {
            if got != want {
                return bad(format!("{name} has {got} entries, expected {want}"));
            }
        }
        if self.psr_ratios.iter().any(|&p| !(p >= 0.0)) {
            return bad("psr_ratios must be nonnegative".into());
        }
        let sum: f64 = self.psr_ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return bad(format!("psr_ratios sum to {sum}, expected 1"));
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("carrier_hz", self.carrier_hz),
            ("noise_lue_w", self.noise_lue_w),
            ("noise_eve_w", self.noise_eve_w),
            ("noise_ehn_w", self.noise_ehn_w),
            ("p_max_w", self.p_max_w),
            ("p_sp_w", self.p_sp_w),
            ("amp_eff", self.amp_eff),
            ("eh_eff", self.eh_eff),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.amp_eff > 1.0 || self.eh_eff > 1.0 {
            return bad("efficiencies must not exceed 1".into());
        }
        if !(self.p_req_w >= 0.0) || !(self.r_aux_nats_s >= 0.0) || !(self.uncertainty_fraction >= 0.0) {
            return bad("p_req_w, r_aux_nats_s and uncertainty_fraction must be nonnegative".into());
        }
        let dists = self.lue_distances_m.iter().chain(&self.eve_distances_m).chain(&self.ehn_distances_m);
        if dists.clone().any(|&d| !(d > 0.0)) {
            return bad("distances must be positive".into());
        }
        Ok(())
    }

    /// `R̃ = R^REQ / BW`.
    pub fn r_aux_tilde(&self) -> f64 {
        self.r_aux_nats_s / self.bandwidth_hz
    }

    pub fn circuit_power(&self) -> f64 {
        circuit_power(self.p_sp_w, self.n_tx)
    }
}

pub fn dbm_to_w(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn w_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Transmit covariances: one per LUE plus the artificial-noise covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamformingSolution {
    pub w_mats: Vec<HermitianMatrix>,
    pub an_cov: HermitianMatrix,
}

impl BeamformingSolution {
    pub fn zeros(n_tx: usize, n_lue: usize) -> Self {
        BeamformingSolution { w_mats: vec![HermitianMatrix::zeros(n_tx); n_lue], an_cov: HermitianMatrix::zeros(n_tx) }
    }

    pub fn n_tx(&self) -> usize {
        self.an_cov.dim()
    }

    /// `Σ Tr(W_n) + Tr(Q)`.
    pub fn transmit_power(&self) -> f64 {
        self.w_mats.iter().map(|w| w.trace()).sum::<f64>() + self.an_cov.trace()
    }

    /// `Y = Σ W_n + Q`.
    pub fn total_covariance(&self) -> HermitianMatrix {
        self.w_mats.iter().fold(self.an_cov.clone(), |acc, w| acc.add(w))
    }

    pub fn is_psd(&self) -> bool {
        self.w_mats.iter().all(|w| w.is_psd()) && self.an_cov.is_psd()
    }

    pub fn max_rank_ratio(&self) -> f64 {
        self.w_mats.iter().map(|w| w.rank_ratio()).fold(0.0, f64::max)
    }

    fn check(&self, v: &CVec, n: Option<usize>) -> Result<()> {
        if v.len() != self.n_tx() || self.w_mats.iter().any(|w| w.dim() != self.n_tx()) {
            return Err(Error::Dimension(format!("channel of length {} for {} antennas", v.len(), self.n_tx())));
        }
        if let Some(n) = n {
            if n >= self.w_mats.len() {
                return Err(Error::Dimension(format!("LUE index {n} out of {}", self.w_mats.len())));
            }
        }
        Ok(())
    }

    /// Signal and interference-plus-noise seen through channel `v` when
    /// stream `n` is the wanted one.
    fn split(&self, v: &CVec, n: usize) -> (f64, f64) {
        let signal = self.w_mats[n].quad_form(v);
        let others: f64 = self.w_mats.iter().enumerate().filter(|(k, _)| *k != n).map(|(_, w)| w.quad_form(v)).sum();
        (signal.max(0.0), (others + self.an_cov.quad_form(v)).max(0.0))
    }
}

/// Per-link figures of one solution on one channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub rate_lue: Vec<f64>,
    /// `leakage[m][n]`: rate leaked to EVE `m` about LUE `n`.
    pub leakage: Vec<Vec<f64>>,
    pub secrecy_rate: Vec<f64>,
    pub harvested_w: Vec<f64>,
    pub total_power_w: f64,
    pub see: f64,
}

fn check_noise(noise_w: f64) -> Result<()> {
    if !(noise_w > 0.0) {
        return Err(Error::InvalidConfig(format!("noise power must be positive, got {noise_w}")));
    }
    Ok(())
}

pub fn sinr_lue(h_n: &CVec, sol: &BeamformingSolution, n: usize, noise_w: f64) -> Result<f64> {
    check_noise(noise_w)?;
    sol.check(h_n, Some(n))?;
    let (s, i) = sol.split(h_n, n);
    Ok(s / (i + noise_w))
}

pub fn rate_lue(sinr: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(sinr >= 0.0) {
        return Err(Error::Domain(format!("SINR must be nonnegative, got {sinr}")));
    }
    Ok(bandwidth_hz * sinr.ln_1p())
}

/// SINR at an eavesdropper with channel `g_e` when decoding stream `n`.
pub fn leakage_sinr(g_e: &CVec, sol: &BeamformingSolution, n: usize, noise_w: f64) -> Result<f64> {
    sinr_lue(g_e, sol, n, noise_w)
}

pub fn leakage_rate(g_e: &CVec, sol: &BeamformingSolution, n: usize, noise_w: f64, bandwidth_hz: f64) -> Result<f64> {
    rate_lue(leakage_sinr(g_e, sol, n, noise_w)?, bandwidth_hz)
}

pub fn harvested_power(g_h: &CVec, sol: &BeamformingSolution, eh_eff: f64) -> Result<f64> {
    if !(eh_eff > 0.0 && eh_eff <= 1.0) {
        return Err(Error::InvalidConfig(format!("harvesting efficiency {eh_eff} outside (0, 1]")));
    }
    sol.check(g_h, None)?;
    Ok(eh_eff * sol.total_covariance().quad_form(g_h).max(0.0))
}

pub fn secrecy_rate(rate_lue: f64, r_aux: f64) -> f64 {
    (rate_lue - r_aux).max(0.0)
}

pub fn circuit_power(p_sp_w: f64, n_tx: usize) -> f64 {
    let nt = n_tx as f64;
    p_sp_w * (0.87 + 0.1 * nt + 0.03 * nt * nt)
}

pub fn total_power(sol: &BeamformingSolution, amp_eff: f64, circuit_w: f64) -> f64 {
    sol.transmit_power() / amp_eff + circuit_w
}

pub fn see(sum_secrecy_nats_s: f64, total_power_w: f64) -> Result<f64> {
    if !(total_power_w > 0.0) {
        return Err(Error::Domain(format!("total power must be positive, got {total_power_w}")));
    }
    Ok(sum_secrecy_nats_s / total_power_w)
}

/// Jain's index `(Σφ)² / (n Σφ²)`; for ratios summing to one and two
/// users this is `1 / (2 Σφ²)`.
pub fn jain_index(ratios: &[f64]) -> f64 {
    let s: f64 = ratios.iter().sum();
    let s2: f64 = ratios.iter().map(|r| r * r).sum();
    if s2 == 0.0 {
        return 1.0;
    }
    s * s / (ratios.len() as f64 * s2)
}

/// Input power a logistic harvester (`a`, `b`, saturation `m_sat`) needs to
/// deliver `p_req`, expressed as the equivalent linear-model demand.
pub fn nonlinear_eh_required_input(p_req: f64, xi: f64, a: f64, b: f64, m_sat: f64) -> Result<f64> {
    if p_req >= m_sat {
        return Err(Error::InfeasibleDemand { demand: p_req, saturation: m_sat });
    }
    if !(a > 0.0) || !(p_req >= 0.0) {
        return Err(Error::Domain("logistic slope must be positive and demand nonnegative".into()));
    }
    Ok(xi / a * ((m_sat + p_req * (a * b).exp()) / (m_sat - p_req)).ln())
}

/// Every metric of `sol` on explicit channel realizations.
pub fn evaluate(
    config: &SystemConfig,
    h: &[CVec],
    g_e: &[CVec],
    g_h: &[CVec],
    sol: &BeamformingSolution,
) -> Result<MetricsReport> {
    let bw = config.bandwidth_hz;
    let rate_lue = h
        .iter()
        .enumerate()
        .map(|(n, hn)| rate_lue(sinr_lue(hn, sol, n, config.noise_lue_w)?, bw))
        .collect::<Result<Vec<_>>>()?;
    let leakage = g_e
        .iter()
        .map(|g| (0..h.len()).map(|n| leakage_rate(g, sol, n, config.noise_eve_w, bw)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let secrecy: Vec<f64> = rate_lue.iter().map(|&r| secrecy_rate(r, config.r_aux_nats_s)).collect();
    let harvested = g_h.iter().map(|g| harvested_power(g, sol, config.eh_eff)).collect::<Result<Vec<_>>>()?;
    let total = total_power(sol, config.amp_eff, config.circuit_power());
    Ok(MetricsReport {
        see: see(secrecy.iter().sum(), total)?,
        rate_lue,
        leakage,
        secrecy_rate: secrecy,
        harvested_w: harvested,
        total_power_w: total,
    })
}
