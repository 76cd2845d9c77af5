//! Channel draws under the indoor pathloss model with Rayleigh fading,
//! bounded CSI errors, and an exact worst-case oracle over an error ball.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{HermitianMatrix, SystemConfig, C64, CVec};

/// Pathloss in dB for carrier `carrier_hz` and distance `distance_m`
/// (the model takes the carrier in GHz).
pub fn pathloss_db(carrier_hz: f64, distance_m: f64) -> Result<f64> {
    if !(carrier_hz > 0.0) || !(distance_m > 0.0) {
        return Err(Error::Domain(format!("carrier {carrier_hz} Hz and distance {distance_m} m must be positive")));
    }
    Ok(17.3 + 24.9 * (carrier_hz / 1e9).log10() + 38.3 * distance_m.log10())
}

/// Per-antenna channel variance `Ω⁻¹` (linear).
pub fn channel_variance(carrier_hz: f64, distance_m: f64) -> Result<f64> {
    Ok(10f64.powf(-pathloss_db(carrier_hz, distance_m)? / 10.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyBall {
    pub center: CVec,
    pub radius: f64,
}

/// One channel realization.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSet {
    pub h: Vec<CVec>,
    pub g_e_bar: Vec<CVec>,
    pub g_h_bar: Vec<CVec>,
    pub theta_e: Vec<f64>,
    pub theta_h: Vec<f64>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.h.first().map_or(0, |h| h.len())
    }

    pub fn eve_ball(&self, m: usize) -> UncertaintyBall {
        UncertaintyBall { center: self.g_e_bar[m].clone(), radius: self.theta_e[m] }
    }

    pub fn ehn_ball(&self, i: usize) -> UncertaintyBall {
        UncertaintyBall { center: self.g_h_bar[i].clone(), radius: self.theta_h[i] }
    }
}

fn cscg(rng: &mut impl Rng, n: usize, variance: f64) -> CVec {
    let s = (variance / 2.0).sqrt();
    CVec::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

/// Draws exact LUE channels and estimated EVE/EHN channels with their
/// uncertainty radii. The same seed gives the same realization.
pub fn draw_channels(config: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nt = config.n_tx;
    let mut draw = |dists: &[f64]| -> Result<(Vec<CVec>, Vec<f64>)> {
        let mut chans = Vec::with_capacity(dists.len());
        let mut radii = Vec::with_capacity(dists.len());
        for &d in dists {
            let var = channel_variance(config.carrier_hz, d)?;
            chans.push(cscg(&mut rng, nt, var));
            radii.push((config.uncertainty_fraction * var).sqrt());
        }
        Ok((chans, radii))
    };
    let (h, _) = draw(&config.lue_distances_m)?;
    let (g_e_bar, theta_e) = draw(&config.eve_distances_m)?;
    let (g_h_bar, theta_h) = draw(&config.ehn_distances_m)?;
    Ok(ChannelSet { h, g_e_bar, g_h_bar, theta_e, theta_h })
}

/// Seed of trial `trial` under master seed `master` (SplitMix64 finalizer).
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// Extremum of `(ḡ+Δ)ᴴ X (ḡ+Δ)` over `‖Δ‖ ≤ Θ` and the extremal `Δ`.
///
/// Solved as a trust-region subproblem in the eigenbasis of `X`: the
/// multiplier is the root of the secular equation `‖Δ(μ)‖ = Θ`, with the
/// degenerate ("hard") case handled by adding a null direction.
pub fn worst_case_quadratic(ball: &UncertaintyBall, x: &HermitianMatrix, sense: Sense) -> Result<(f64, CVec)> {
    let n = ball.center.len();
    if x.dim() != n {
        return Err(Error::Dimension(format!("matrix of size {} for ball in dimension {n}", x.dim())));
    }
    if !(ball.radius >= 0.0) {
        return Err(Error::Domain("negative radius".into()));
    }
    // minimize Δᴴ A Δ + 2 Re(bᴴ Δ) with A = ±X, b = A ḡ
    let a_mat = match sense {
        Sense::Min => x.clone(),
        Sense::Max => x.scale(-1.0),
    };
    let eig = a_mat.eigen();
    let u = &eig.vectors;
    let lam: Vec<f64> = eig.values.clone();
    let b = a_mat.as_matrix() * &ball.center;
    let beta = u.adjoint() * &b;
    let r = ball.radius;
    let scale = lam.iter().fold(0.0f64, |m, l| m.max(l.abs())).max(1e-300);

    let delta_of = |mu: f64| -> CVec {
        let coef = CVec::from_fn(n, |i, _| {
            let d = lam[i] + mu;
            if d.abs() <= 1e-14 * scale {
                C64::new(0.0, 0.0)
            } else {
                -beta[i] / d
            }
        });
        u * coef
    };

    let delta = if r == 0.0 || n == 0 {
        CVec::zeros(n)
    } else {
        let lam_min = lam[n - 1];
        let interior = lam_min > 1e-14 * scale && delta_of(0.0).norm() <= r;
        if interior {
            delta_of(0.0)
        } else {
            let lo0 = (-lam_min).max(0.0);
            // components of b on the bottom eigenspace decide the hard case
            let bottom: f64 = (0..n)
                .filter(|&i| lam[i] - lam_min <= 1e-12 * scale)
                .map(|i| beta[i].norm_sqr())
                .sum::<f64>()
                .sqrt();
            let hard = bottom <= 1e-13 * b.norm().max(scale * r) && delta_of(lo0).norm() <= r;
            if hard {
                let base = delta_of(lo0);
                let extra = (r * r - base.norm_squared()).max(0.0).sqrt();
                let v = u.column(n - 1).into_owned();
                base + v * C64::new(extra, 0.0)
            } else {
                let mut lo = lo0;
                let mut hi = lo0 + b.norm() / r + scale;
                while delta_of(hi).norm() > r {
                    hi = 2.0 * hi + scale;
                }
                // safeguarded Newton on φ(μ) = 1/r − 1/‖Δ(μ)‖
                let mut mu = hi;
                for _ in 0..200 {
                    let d = delta_of(mu);
                    let nd = d.norm();
                    let phi = 1.0 / r - 1.0 / nd;
                    if phi.abs() <= 1e-15 / r {
                        break;
                    }
                    if nd > r {
                        lo = mu;
                    } else {
                        hi = mu;
                    }
                    // dφ/dμ = −(Σ |β|²/(λ+μ)³) / ‖Δ‖³
                    let s3: f64 = (0..n).map(|i| beta[i].norm_sqr() / (lam[i] + mu).powi(3)).sum();
                    let dphi = -s3 / nd.powi(3);
                    let mut next = mu - phi / dphi;
                    if !(next > lo && next < hi) {
                        next = 0.5 * (lo + hi);
                    }
                    if (next - mu).abs() <= 1e-16 * mu.abs().max(1.0) {
                        mu = next;
                        break;
                    }
                    mu = next;
                }
                let d = delta_of(mu);
                let nd = d.norm();
                if nd > 0.0 {
                    d * C64::new(r / nd, 0.0)
                } else {
                    d
                }
            }
        }
    };
    let point = &ball.center + &delta;
    Ok((x.quad_form(&point), delta))
}

/// `count` points `ḡ + Δ` uniform over the ball.
pub fn sample_ball(ball: &UncertaintyBall, count: usize, seed: u64) -> Vec<CVec> {
    let n = ball.center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir = cscg(&mut rng, n, 1.0);
            let norm = dir.norm();
            let u: f64 = rng.random();
            let rad = ball.radius * u.powf(1.0 / (2.0 * n as f64));
            if norm == 0.0 {
                ball.center.clone()
            } else {
                &ball.center + dir * C64::new(rad / norm, 0.0)
            }
        })
        .collect()
}
