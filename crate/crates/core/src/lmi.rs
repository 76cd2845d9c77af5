//! Constraint objects of the relaxed power-minimization problems: the
//! proportional-secrecy-rate inequalities and the S-procedure LMIs that
//! make the leakage and harvesting constraints robust over an error ball.

use see_sdp::{LmiExpr, VarId};

use crate::error::{Error, Result};
use crate::model::{BeamformingSolution, CMat, HermitianMatrix, SystemConfig, C64, CVec};

/// `θ_n(t) = exp(φ_n t / BW + R̃) − 1`.
pub fn theta(t: f64, phi_n: f64, bandwidth_hz: f64, r_aux_nats_s: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("sum secrecy rate must be nonnegative, got {t}")));
    }
    Ok((phi_n * t / bandwidth_hz + r_aux_nats_s / bandwidth_hz).exp_m1())
}

/// `((1+θ)/θ) Tr(H_n W_n) − Σ_k Tr(H_n W_k) − Tr(H_n Q) ≥ σ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct PsrConstraint {
    pub n: usize,
    pub theta: f64,
    pub h: CVec,
    pub noise_w: f64,
}

impl PsrConstraint {
    /// With `θ = 0` no rate is demanded and the constraint always holds.
    pub fn is_vacuous(&self) -> bool {
        self.theta == 0.0
    }

    /// Left side minus right side, multiplied through by `θ` so that the
    /// vacuous case is finite: `Tr(H W_n) − θ(Σ_{k≠n} Tr(H W_k) + Tr(H Q) + σ²)`.
    pub fn slack(&self, sol: &BeamformingSolution) -> f64 {
        let signal = sol.w_mats[self.n].quad_form(&self.h);
        signal - self.theta * self.interference_plus_noise(sol)
    }

    pub fn interference_plus_noise(&self, sol: &BeamformingSolution) -> f64 {
        let others: f64 =
            sol.w_mats.iter().enumerate().filter(|(k, _)| *k != self.n).map(|(_, w)| w.quad_form(&self.h)).sum();
        others + sol.an_cov.quad_form(&self.h) + self.noise_w
    }

    /// Slack relative to the demanded signal level `θ (I + σ²)`.
    pub fn relative_slack(&self, sol: &BeamformingSolution) -> f64 {
        if self.is_vacuous() {
            return 0.0;
        }
        self.slack(sol) / (self.theta * self.interference_plus_noise(sol))
    }

    pub fn is_satisfied(&self, sol: &BeamformingSolution, rel_tol: f64) -> bool {
        self.is_vacuous() || self.relative_slack(sol) >= -rel_tol
    }
}

pub fn build_psr(n: usize, t: f64, h_n: &CVec, config: &SystemConfig) -> Result<PsrConstraint> {
    if h_n.len() != config.n_tx {
        return Err(Error::Dimension(format!("channel of length {} for {} antennas", h_n.len(), config.n_tx)));
    }
    let phi = *config.psr_ratios.get(n).ok_or_else(|| Error::Dimension(format!("no ratio for LUE {n}")))?;
    Ok(PsrConstraint {
        n,
        theta: theta(t, phi, config.bandwidth_hz, config.r_aux_nats_s)?,
        h: h_n.clone(),
        noise_w: config.noise_lue_w,
    })
}

/// `1 / (1 − e^{−R̃})`, the weight of the own stream in `X_n`.
pub fn leakage_coefficient(r_aux_tilde: f64) -> Result<f64> {
    if !(r_aux_tilde > 0.0) {
        return Err(Error::Domain("a zero auxiliary rate forbids any leakage".into()));
    }
    Ok(1.0 / -(-r_aux_tilde).exp_m1())
}

/// `X_n = W_n / (1 − e^{−R̃}) − Σ_k W_k − Q`.
pub fn build_xn(n: usize, sol: &BeamformingSolution, r_aux_tilde: f64) -> Result<HermitianMatrix> {
    let c = leakage_coefficient(r_aux_tilde)?;
    let w = sol.w_mats.get(n).ok_or_else(|| Error::Dimension(format!("no stream {n}")))?;
    Ok(w.scale(c).sub(&sol.total_covariance()))
}

/// `G̃ = [I, ḡ]`, of size `N_t × (N_t + 1)`.
pub fn g_tilde(g_bar: &CVec) -> CMat {
    let n = g_bar.len();
    let mut g = CMat::zeros(n, n + 1);
    for i in 0..n {
        g[(i, i)] = C64::new(1.0, 0.0);
        g[(i, n)] = g_bar[i];
    }
    g
}

fn corner_block(n: usize, top: f64, corner: f64) -> HermitianMatrix {
    let mut d = vec![top; n + 1];
    d[n] = corner;
    HermitianMatrix::from_diagonal(&d)
}

fn check_dims(g_bar: &CVec, m: &HermitianMatrix) -> Result<()> {
    if g_bar.len() != m.dim() {
        return Err(Error::Dimension(format!("channel of length {} for matrix of size {}", g_bar.len(), m.dim())));
    }
    Ok(())
}

/// `Φ = [[ζI, 0], [0, σ² − ζΘ²]] − G̃ᴴ X G̃`.
pub fn build_leakage_lmi(g_bar: &CVec, theta: f64, noise_w: f64, x_n: &HermitianMatrix, zeta: f64) -> Result<HermitianMatrix> {
    check_dims(g_bar, x_n)?;
    let n = g_bar.len();
    Ok(corner_block(n, zeta, noise_w - zeta * theta * theta).sub(&x_n.congruence(&g_tilde(g_bar))))
}

/// `Ψ = [[ηI, 0], [0, −P/ξ − ηΘ²]] + G̃ᴴ Y G̃`.
pub fn build_harvest_lmi(
    g_bar: &CVec,
    theta: f64,
    p_req_w: f64,
    eh_eff: f64,
    y: &HermitianMatrix,
    eta: f64,
) -> Result<HermitianMatrix> {
    check_dims(g_bar, y)?;
    let n = g_bar.len();
    Ok(corner_block(n, eta, -p_req_w / eh_eff - eta * theta * theta).add(&y.congruence(&g_tilde(g_bar))))
}

/// An affine covariance `C + Σ_g Σ_v α_v B_g V B_gᴴ` over decision blocks,
/// where `B_g` is an optional basis (`None` for the identity).
#[derive(Clone, Debug, Default)]
pub struct AffineCov {
    pub constant: Option<HermitianMatrix>,
    pub groups: Vec<(Option<CMat>, Vec<(VarId, f64)>)>,
}

impl AffineCov {
    pub fn term(mut self, basis: Option<CMat>, members: Vec<(VarId, f64)>) -> Self {
        self.groups.push((basis, members));
        self
    }

    pub fn with_constant(mut self, c: HermitianMatrix) -> Self {
        self.constant = Some(c);
        self
    }

    fn add_to(&self, mut lmi: LmiExpr, g: &CMat, sign: f64) -> LmiExpr {
        for (basis, members) in &self.groups {
            let map = match basis {
                Some(b) => b.adjoint() * g,
                None => g.clone(),
            };
            lmi = lmi.congruence(Some(map), members.iter().map(|&(v, a)| (v, sign * a)).collect());
        }
        lmi
    }

    fn constant_term(&self, g: &CMat) -> Option<HermitianMatrix> {
        self.constant.as_ref().map(|c| c.congruence(g))
    }
}

/// Leakage LMI with `X` affine in the decision blocks and `ζ` a variable.
pub fn leakage_lmi_expr(g_bar: &CVec, theta: f64, noise_w: f64, x: &AffineCov, zeta: VarId) -> LmiExpr {
    let n = g_bar.len();
    let g = g_tilde(g_bar);
    let mut constant = corner_block(n, 0.0, noise_w);
    if let Some(c) = x.constant_term(&g) {
        constant = constant.sub(&c);
    }
    let lmi = LmiExpr::new(constant).scalar(zeta, corner_block(n, 1.0, -theta * theta));
    x.add_to(lmi, &g, -1.0)
}

/// Harvest LMI with `Y` affine in the decision blocks, `demand_w = P/ξ`.
pub fn harvest_lmi_expr(g_bar: &CVec, theta: f64, demand_w: f64, y: &AffineCov, eta: VarId) -> LmiExpr {
    let n = g_bar.len();
    let g = g_tilde(g_bar);
    let mut constant = corner_block(n, 0.0, -demand_w);
    if let Some(c) = y.constant_term(&g) {
        constant = constant.add(&c);
    }
    let lmi = LmiExpr::new(constant).scalar(eta, corner_block(n, 1.0, -theta * theta));
    y.add_to(lmi, &g, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_ball, worst_case_quadratic, Sense, UncertaintyBall};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(rng: &mut impl Rng, n: usize, s: f64) -> CVec {
        CVec::from_fn(n, |_, _| C64::new(s * (rng.random::<f64>() - 0.5), s * (rng.random::<f64>() - 0.5)))
    }

    fn rand_psd(rng: &mut impl Rng, n: usize, rank: usize, s: f64) -> HermitianMatrix {
        (0..rank).fold(HermitianMatrix::zeros(n), |acc, _| acc.add(&HermitianMatrix::outer(&rand_vec(rng, n, s))))
    }

    #[test]
    fn theta_examples() {
        assert_eq!(theta(0.0, 0.5, 1.0, 0.0).unwrap(), 0.0);
        assert!((theta(0.0, 0.4, 200e3, 100e3).unwrap() - 0.648721).abs() < 1e-6);
        let t = 2f64.ln() * 200e3 / 0.5;
        assert!((theta(t, 0.5, 200e3, 0.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(theta(-1.0, 0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn psr_collapses_for_single_user() {
        let h = CVec::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
        let w = HermitianMatrix::outer(&h).scale(0.5);
        let sol = BeamformingSolution { w_mats: vec![w.clone()], an_cov: HermitianMatrix::zeros(2) };
        let c = PsrConstraint { n: 0, theta: 2.0, h: h.clone(), noise_w: 1.0 };
        // Tr(HW) = 2 = θσ²: active
        assert!(c.slack(&sol).abs() < 1e-14);
        let vac = PsrConstraint { theta: 0.0, ..c.clone() };
        assert!(vac.is_vacuous() && vac.is_satisfied(&BeamformingSolution::zeros(2, 1), 0.0));
        // θ → ∞: demand approaches Tr(HW) ≥ interference + noise + own signal
        let big = PsrConstraint { theta: 1e12, ..c };
        assert!(big.slack(&sol) < 0.0);
    }

    #[test]
    fn xn_examples() {
        let zero = BeamformingSolution::zeros(2, 2);
        assert_eq!(build_xn(0, &zero, 1.0).unwrap(), HermitianMatrix::zeros(2));
        assert!((leakage_coefficient(2f64.ln()).unwrap() - 2.0).abs() < 1e-14);
        assert!((leakage_coefficient(50.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(leakage_coefficient(0.0).is_err());
    }

    #[test]
    fn leakage_lmi_examples() {
        let g = CVec::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.4)]);
        let x0 = HermitianMatrix::zeros(2);
        let phi = build_leakage_lmi(&g, 0.1, 1.0, &x0, 0.0).unwrap();
        assert_eq!(phi, HermitianMatrix::from_diagonal(&[0.0, 0.0, 1.0]));
        assert!(phi.is_psd());
        let phi = build_leakage_lmi(&g, 0.1, 1.0, &x0, 101.0).unwrap();
        assert!(!phi.is_psd());
    }

    #[test]
    fn harvest_lmi_examples() {
        let g = CVec::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.4)]);
        let psi = build_harvest_lmi(&g, 0.1, 1e-3, 0.8, &HermitianMatrix::zeros(2), 0.5).unwrap();
        assert!(!psi.is_psd());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = rand_psd(&mut rng, 2, 2, 1.0);
        let psi = build_harvest_lmi(&g, 0.1, 0.0, 0.8, &y, 0.0).unwrap();
        assert!(psi.is_psd());
    }

    /// Largest `ζ`-feasible point: scale `X` down until `Φ(X, ζ) ⪰ 0` for a
    /// grid of `ζ`, returning the scaled `X` and `ζ`.
    fn feasible_leakage(g: &CVec, theta: f64, x: &HermitianMatrix) -> Option<(HermitianMatrix, f64)> {
        let mut scale = 1.0;
        for _ in 0..60 {
            let xs = x.scale(scale);
            for k in 0..200 {
                let zeta = 10f64.powf(-4.0 + k as f64 * 0.05);
                if build_leakage_lmi(g, theta, 1.0, &xs, zeta).unwrap().min_eigenvalue() >= 0.0 {
                    return Some((xs, zeta));
                }
            }
            scale *= 0.7;
        }
        None
    }

    #[test]
    fn leakage_lmi_agrees_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let g = rand_vec(&mut rng, 3, 2.0);
            let theta = 0.3;
            let x = rand_psd(&mut rng, 3, 1, 1.0).sub(&rand_psd(&mut rng, 3, 2, 0.5));
            let Some((xs, _)) = feasible_leakage(&g, theta, &x) else { continue };
            let ball = UncertaintyBall { center: g.clone(), radius: theta };
            let (worst, _) = worst_case_quadratic(&ball, &xs, Sense::Max).unwrap();
            assert!(worst <= 1.0 + 1e-7, "{worst}");
            for p in sample_ball(&ball, 500, 1) {
                assert!(xs.quad_form(&p) <= 1.0 + 1e-7);
            }
        }
    }

    #[test]
    fn harvest_lmi_agrees_with_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..20 {
            let g = rand_vec(&mut rng, 3, 2.0);
            let theta = 0.2;
            let y = rand_psd(&mut rng, 3, 2, 1.0);
            let ball = UncertaintyBall { center: g.clone(), radius: theta };
            let (worst, _) = worst_case_quadratic(&ball, &y, Sense::Min).unwrap();
            // any demand the LMI certifies must lie below the oracle minimum
            for k in 0..400 {
                let eta = 10f64.powf(-4.0 + k as f64 * 0.02);
                let demand = 0.999 * worst;
                if build_harvest_lmi(&g, theta, demand, 1.0, &y, eta).unwrap().min_eigenvalue() >= 0.0 {
                    assert!(worst >= demand - 1e-7);
                }
                let over = build_harvest_lmi(&g, theta, 1.001 * worst, 1.0, &y, eta).unwrap();
                assert!(over.min_eigenvalue() < 1e-12);
            }
        }
    }

    #[test]
    fn symbolic_lmi_matches_numeric() {
        use see_sdp::ConicProblem;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut p = ConicProblem::new();
        let w = p.add_psd(3);
        let q = p.add_psd(3);
        let z = p.add_nonneg();
        let g = rand_vec(&mut rng, 3, 1.0);
        let (wv, qv, zv) = (rand_psd(&mut rng, 3, 1, 1.0), rand_psd(&mut rng, 3, 2, 1.0), 0.7);
        let c = 1.8;
        let x = AffineCov::default().term(None, vec![(w, c), (q, -1.0)]);
        let expr = leakage_lmi_expr(&g, 0.2, 1.5, &x, z);
        let got = expr.evaluate(|v| if v == w { wv.clone() } else { qv.clone() }, |_| zv);
        let want = build_leakage_lmi(&g, 0.2, 1.5, &wv.scale(c).sub(&qv), zv).unwrap();
        assert!(got.sub(&want).frobenius_norm() < 1e-12);

        let y = AffineCov::default().term(None, vec![(w, 1.0), (q, 1.0)]);
        let expr = harvest_lmi_expr(&g, 0.2, 0.3, &y, z);
        let got = expr.evaluate(|v| if v == w { wv.clone() } else { qv.clone() }, |_| zv);
        let want = build_harvest_lmi(&g, 0.2, 0.3, 1.0, &wv.add(&qv), zv).unwrap();
        assert!(got.sub(&want).frobenius_norm() < 1e-12);
    }

    mod props {
        use super::*;
        use crate::channel::{sample_ball, worst_case_quadratic, Sense, UncertaintyBall};
        use proptest::prelude::*;

        fn cvec(n: usize, s: f64) -> impl Strategy<Value = CVec> {
            prop::collection::vec((-s..s, -s..s), n)
                .prop_map(|v| CVec::from_iterator(v.len(), v.into_iter().map(|(a, b)| C64::new(a, b))))
        }

        fn psd(n: usize) -> impl Strategy<Value = HermitianMatrix> {
            (cvec(n, 1.0), cvec(n, 1.0)).prop_map(|(a, b)| HermitianMatrix::outer(&a).add(&HermitianMatrix::outer(&b).scale(0.3)))
        }

        fn indefinite(n: usize) -> impl Strategy<Value = HermitianMatrix> {
            (psd(n), cvec(n, 1.0)).prop_map(|(p, c)| p.sub(&HermitianMatrix::outer(&c)))
        }

        /// Max of a concave `f` on `[0, hi]` by golden-section search.
        fn golden_max(f: impl Fn(f64) -> f64, hi: f64) -> (f64, f64) {
            let r = 0.5 * (5f64.sqrt() - 1.0);
            let (mut a, mut b) = (0.0, hi);
            for _ in 0..200 {
                let (c, d) = (b - r * (b - a), a + r * (b - a));
                if f(c) >= f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            let x = 0.5 * (a + b);
            (x, f(x))
        }

        fn best_leakage(g: &CVec, theta: f64, noise: f64, x: &HermitianMatrix) -> (f64, f64) {
            // the corner entry σ² − ζΘ² − ḡᴴXḡ caps ζ
            let hi = (noise - x.quad_form(g)).max(0.0) / (theta * theta);
            golden_max(|z| build_leakage_lmi(g, theta, noise, x, z).unwrap().min_eigenvalue(), hi)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn leakage_certificate_is_sound(
                x in indefinite(3), g in cvec(3, 1.0), theta in 0.05f64..0.5, noise in 0.1f64..3.0, seed in 0u64..1000,
            ) {
                let (zeta, lam) = best_leakage(&g, theta, noise, &x);
                let ball = UncertaintyBall { center: g.clone(), radius: theta };
                let (worst, _) = worst_case_quadratic(&ball, &x, Sense::Max).unwrap();
                if lam >= 0.0 {
                    prop_assert!(zeta >= 0.0);
                    prop_assert!(worst <= noise * (1.0 + 1e-9), "{} > {}", worst, noise);
                    for p in sample_ball(&ball, 200, seed) {
                        prop_assert!(x.quad_form(&p) <= noise * (1.0 + 1e-9));
                    }
                } else {
                    prop_assert!(worst >= noise * (1.0 - 1e-6), "{} < {} but no certificate", worst, noise);
                }
            }

            #[test]
            fn leakage_certificate_is_tight(x in indefinite(3), g in cvec(3, 1.0), theta in 0.05f64..0.5) {
                let ball = UncertaintyBall { center: g.clone(), radius: theta };
                let (worst, _) = worst_case_quadratic(&ball, &x, Sense::Max).unwrap();
                prop_assume!(worst > 1e-3);
                let (_, lam) = best_leakage(&g, theta, worst * (1.0 + 1e-6), &x);
                prop_assert!(lam >= -1e-7 * (1.0 + x.frobenius_norm()), "{}", lam);
            }

            #[test]
            fn harvest_certificate_is_sound(y in psd(3), g in cvec(3, 1.0), theta in 0.05f64..0.5, demand in 0.01f64..2.0) {
                let hi = 10.0 * (1.0 + y.max_eigenvalue()) * (1.0 + g.norm_squared());
                let (_, lam) = golden_max(|e| build_harvest_lmi(&g, theta, demand, 1.0, &y, e).unwrap().min_eigenvalue(), hi);
                let ball = UncertaintyBall { center: g.clone(), radius: theta };
                let (worst, _) = worst_case_quadratic(&ball, &y, Sense::Min).unwrap();
                if lam >= 0.0 {
                    prop_assert!(worst >= demand * (1.0 - 1e-9));
                }
            }

            #[test]
            fn builders_are_affine(
                x1 in indefinite(3), x2 in indefinite(3), g in cvec(3, 1.0),
                z1 in 0.0f64..5.0, z2 in 0.0f64..5.0, a in 0.0f64..1.0, theta in 0.0f64..0.5,
            ) {
                let mix = x1.scale(a).add(&x2.scale(1.0 - a));
                let zm = a * z1 + (1.0 - a) * z2;
                let lhs = build_leakage_lmi(&g, theta, 0.7, &mix, zm).unwrap();
                let rhs = build_leakage_lmi(&g, theta, 0.7, &x1, z1).unwrap().scale(a)
                    .add(&build_leakage_lmi(&g, theta, 0.7, &x2, z2).unwrap().scale(1.0 - a));
                prop_assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-12 * (1.0 + lhs.frobenius_norm()));
                let lhs = build_harvest_lmi(&g, theta, 0.4, 0.5, &mix, zm).unwrap();
                let rhs = build_harvest_lmi(&g, theta, 0.4, 0.5, &x1, z1).unwrap().scale(a)
                    .add(&build_harvest_lmi(&g, theta, 0.4, 0.5, &x2, z2).unwrap().scale(1.0 - a));
                prop_assert!(lhs.sub(&rhs).frobenius_norm() <= 1e-12 * (1.0 + lhs.frobenius_norm()));
            }
        }
    }
}
