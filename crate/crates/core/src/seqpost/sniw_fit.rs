//! Maximum-likelihood and EM (MLE / MAP) fitting of structured Normal
//! inverse-Wishart mixtures to posterior parameter draws.

use crate::dist::sniw::sniw_logpdf;
use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::model::SNiWParams;
use crate::real::{cv, cvu, Real};
use crate::seqpost::niw::{solve_lambda_dof, LambdaPolicy};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// One pooled (xi, psi, Sigma) draw from a chain.
#[derive(Clone, Debug)]
pub struct SniwDraw<T: Real> {
    pub xi: DVector<T>,
    pub psi: DVector<T>,
    pub sigma: SpdMatrix<T>,
}

/// Estimation flavor of the EM M-step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmMode {
    Mle,
    Map,
}

/// Priors for MAP-mode EM.
#[derive(Clone, Debug)]
pub struct MapPriorConfig<T: Real> {
    /// Symmetric Dirichlet parameter on the mixture weights.
    pub dirichlet_alpha: T,
    /// Strength of the empirical-Bayes location prior.
    pub kappa0: T,
    /// Scale of the penalty keeping the 2x2 covariance factor away from 0.
    pub c_scale: SpdMatrix<T>,
    /// Rate of the exponential prior on lambda − (d + 1).
    pub lambda_shift_rate: T,
}

impl<T: Real> Default for MapPriorConfig<T> {
    fn default() -> Self {
        Self {
            dirichlet_alpha: T::one(),
            kappa0: cv::<T>(0.01),
            c_scale: SpdMatrix::new(DMatrix::identity(2, 2) * cv::<T>(100.0)).unwrap(),
            lambda_shift_rate: T::one(),
        }
    }
}

impl<T: Real> MapPriorConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.dirichlet_alpha <= T::zero()
            || self.kappa0 <= T::zero()
            || self.lambda_shift_rate <= T::zero()
        {
            return Err(Error::InvalidArgument("MAP prior parameters must be positive".into()));
        }
        if self.c_scale.dim() != 2 {
            return Err(Error::InvalidArgument("c_scale must be 2x2".into()));
        }
        Ok(())
    }
}

/// A fitted sNiW mixture.
#[derive(Clone, Debug)]
pub struct SNiWMixtureFit<T: Real> {
    pub weights: Vec<T>,
    pub components: Vec<SNiWParams<T>>,
    /// Objective per EM iteration: incomplete log-likelihood (MLE) or
    /// log-posterior up to a constant (MAP). Non-decreasing.
    pub objective_trace: Vec<T>,
    pub converged: bool,
}

// Per-draw quantities reused by every E and M step.
struct Prepared<T: Real> {
    d: usize,
    n: usize,
    sigma_inv: Vec<DMatrix<T>>,
    ln_det: Vec<T>,
    // precision-weighted locations Sigma_i^-1 xi_i, Sigma_i^-1 psi_i
    pw_xi: Vec<DVector<T>>,
    pw_psi: Vec<DVector<T>>,
    // empirical-Bayes quantities for MAP mode
    mean_prec: DMatrix<T>, // (1/n) sum Sigma_i^-1
    m_xi: DVector<T>,
    m_psi: DVector<T>,
    l_inv: DMatrix<T>,
}

fn prepare<T: Real>(draws: &[SniwDraw<T>]) -> Result<Prepared<T>> {
    let n = draws.len();
    let d = draws[0].xi.len();
    if draws.iter().any(|x| x.xi.len() != d || x.psi.len() != d || x.sigma.dim() != d) {
        return Err(Error::DimensionMismatch("draws disagree on dimension".into()));
    }
    let nf = cvu::<T>(n);
    let mut mean_prec = DMatrix::<T>::zeros(d, d);
    let mut sigma_inv = Vec::with_capacity(n);
    let mut ln_det = Vec::with_capacity(n);
    let mut pw_xi = Vec::with_capacity(n);
    let mut pw_psi = Vec::with_capacity(n);
    let mut m_xi = DVector::<T>::zeros(d);
    let mut m_psi = DVector::<T>::zeros(d);
    for x in draws {
        let sinv = x.sigma.inverse();
        pw_xi.push(&sinv * &x.xi);
        pw_psi.push(&sinv * &x.psi);
        mean_prec += &sinv;
        sigma_inv.push(sinv);
        ln_det.push(x.sigma.ln_det());
        m_xi += &x.xi;
        m_psi += &x.psi;
    }
    mean_prec /= nf;
    m_xi /= nf;
    m_psi /= nf;
    // L = (diag(var xi) + diag(var psi)) / 2
    let mut var_xi = DVector::<T>::zeros(d);
    let mut var_psi = DVector::<T>::zeros(d);
    for x in draws {
        for i in 0..d {
            var_xi[i] += (x.xi[i] - m_xi[i]) * (x.xi[i] - m_xi[i]);
            var_psi[i] += (x.psi[i] - m_psi[i]) * (x.psi[i] - m_psi[i]);
        }
    }
    let denom = cvu::<T>(n.saturating_sub(1).max(1));
    let l_diag: Vec<T> =
        (0..d).map(|i| ((var_xi[i] + var_psi[i]) / denom * cv::<T>(0.5)).max(cv::<T>(1e-12))).collect();
    let l_inv = DMatrix::from_diagonal(&DVector::from_iterator(d, l_diag.iter().map(|&x| T::one() / x)));
    Ok(Prepared { d, n, sigma_inv, ln_det, pw_xi, pw_psi, mean_prec, m_xi, m_psi, l_inv })
}

// Weighted M-step for one component. `resp` holds one responsibility per
// draw; passing all-ones gives the plain (s)NiW MLE.
fn weighted_mstep<T: Real>(
    draws: &[SniwDraw<T>],
    prep: &Prepared<T>,
    resp: &[T],
    mode: EmMode,
    cfg: &MapPriorConfig<T>,
) -> Result<SNiWParams<T>> {
    let d = prep.d;
    let n_k: T = resp.iter().fold(T::zero(), |a, &b| a + b);
    if mode == EmMode::Mle && n_k < cv::<T>(1e-8) {
        return Err(Error::ComponentCollapse(format!(
            "component weight collapsed to {n_k}"
        )));
    }

    // location: precision-weighted means, shrunk toward the prior mean in MAP
    let mut a_k = DMatrix::<T>::zeros(d, d);
    let mut b_xi = DVector::<T>::zeros(d);
    let mut b_psi = DVector::<T>::zeros(d);
    let mut s_l = T::zero();
    for i in 0..prep.n {
        let r = resp[i];
        if r == T::zero() {
            continue;
        }
        a_k += &prep.sigma_inv[i] * r;
        b_xi += &prep.pw_xi[i] * r;
        b_psi += &prep.pw_psi[i] * r;
        s_l += prep.ln_det[i] * r;
    }
    let (xi_hat, psi_hat) = match mode {
        EmMode::Mle => {
            let a_spd = SpdMatrix::new((&a_k + a_k.transpose()) * cv::<T>(0.5))?;
            (a_spd.solve(&b_xi), a_spd.solve(&b_psi))
        }
        EmMode::Map => {
            let prior_prec = &prep.mean_prec * cfg.kappa0;
            let m = SpdMatrix::new({
                let s = &a_k + &prior_prec;
                (&s + s.transpose()) * cv::<T>(0.5)
            })?;
            (
                m.solve(&(&b_xi + &prior_prec * &prep.m_xi)),
                m.solve(&(&b_psi + &prior_prec * &prep.m_psi)),
            )
        }
    };

    // 2x2 covariance factor from the residual quadratic
    let mut s_delta = DMatrix::<T>::zeros(2, 2);
    for i in 0..prep.n {
        let r = resp[i];
        if r == T::zero() {
            continue;
        }
        let u = &draws[i].xi - &xi_hat;
        let v = &draws[i].psi - &psi_hat;
        let su = &prep.sigma_inv[i] * &u;
        let sv = &prep.sigma_inv[i] * &v;
        s_delta[(0, 0)] += u.dot(&su) * r;
        s_delta[(0, 1)] += u.dot(&sv) * r;
        s_delta[(1, 1)] += v.dot(&sv) * r;
    }
    s_delta[(1, 0)] = s_delta[(0, 1)];

    let b_cov_mat = match mode {
        EmMode::Mle => {
            if s_delta[(0, 0)] + s_delta[(1, 1)] <= T::zero() {
                return Err(Error::DegenerateSample("identical location draws".into()));
            }
            &s_delta / (n_k * cvu::<T>(d))
        }
        EmMode::Map => {
            let mut dm = DMatrix::<T>::zeros(d, 2);
            for i in 0..d {
                dm[(i, 0)] = xi_hat[i] - prep.m_xi[i];
                dm[(i, 1)] = psi_hat[i] - prep.m_psi[i];
            }
            let prior_quad = dm.transpose() * &prep.mean_prec * &dm * cfg.kappa0;
            (cfg.c_scale.inverse() + &s_delta + prior_quad)
                / (n_k * cvu::<T>(d) + cvu::<T>(d) + T::one())
        }
    };
    let b_cov = SpdMatrix::new((&b_cov_mat + b_cov_mat.transpose()) * cv::<T>(0.5))
        .map_err(|e| Error::NumericalDomain(format!("fitted B is not SPD: {e}")))?;

    // degrees of freedom and scale
    let (lambda_dof, lambda_scale) = match mode {
        EmMode::Mle => {
            let a_spd = SpdMatrix::new((&a_k + a_k.transpose()) * cv::<T>(0.5))?;
            let rhs = -s_l / n_k - a_spd.ln_det();
            let lam = solve_lambda_dof(d, n_k, T::zero(), rhs, LambdaPolicy::Strict)?;
            let scale = SpdMatrix::new(a_spd.inverse() * (n_k * lam))?;
            (lam, scale)
        }
        EmMode::Map => {
            let a_prime = {
                let s = &a_k + &prep.l_inv;
                SpdMatrix::new((&s + s.transpose()) * cv::<T>(0.5))?
            };
            let rhs = -s_l / n_k.max(cv::<T>(1e-12)) - a_prime.ln_det()
                - cv::<T>(2.0) * cfg.lambda_shift_rate / n_k.max(cv::<T>(1e-12));
            let lam = solve_lambda_dof(d, n_k, T::one(), rhs, LambdaPolicy::Clamp)?;
            let scale = SpdMatrix::new(a_prime.inverse() * (n_k * lam + T::one()))?;
            (lam, scale)
        }
    };

    SNiWParams::new(xi_hat, psi_hat, b_cov, lambda_scale, lambda_dof)
}

/// Maximum-likelihood sNiW fit: precision-weighted location, residual-based
/// B, degrees of freedom from the digamma equation, Lambda = n·lambda·P⁻¹.
/// The location/B alternation converges immediately (the location solution
/// does not involve B), the loop just verifies the fixed point.
pub fn mle_sniw<T: Real>(
    xi_draws: &[DVector<T>],
    psi_draws: &[DVector<T>],
    sigma_draws: &[SpdMatrix<T>],
) -> Result<SNiWParams<T>> {
    let n = xi_draws.len();
    if n < 2 || psi_draws.len() != n || sigma_draws.len() != n {
        return Err(Error::InvalidArgument(format!("need >= 2 paired draws, got {n}")));
    }
    let draws: Vec<SniwDraw<T>> = (0..n)
        .map(|i| SniwDraw {
            xi: xi_draws[i].clone(),
            psi: psi_draws[i].clone(),
            sigma: sigma_draws[i].clone(),
        })
        .collect();
    let prep = prepare(&draws)?;
    let ones = vec![T::one(); n];
    let cfg = MapPriorConfig::default();
    let mut fit = weighted_mstep(&draws, &prep, &ones, EmMode::Mle, &cfg)?;
    // fixed-point verification pass
    for _ in 0..50 {
        let next = weighted_mstep(&draws, &prep, &ones, EmMode::Mle, &cfg)?;
        let delta = (&next.b_xi - &fit.b_xi).norm() + (&next.b_psi - &fit.b_psi).norm();
        let scale = T::one() + fit.b_xi.norm() + fit.b_psi.norm();
        fit = next;
        if delta <= cv::<T>(1e-10) * scale {
            break;
        }
    }
    Ok(fit)
}

/// EM fit of a K-component sNiW mixture to the pooled draws.
///
/// k-means initialization on the stacked (xi, psi) locations, 5 restarts,
/// best final objective kept. MLE mode errors on component collapse; MAP
/// mode regularizes degenerate components away.
pub fn em_sniw<T: Real, R: Rng + ?Sized>(
    draws: &[SniwDraw<T>],
    n_components: usize,
    mode: EmMode,
    cfg: &MapPriorConfig<T>,
    rng: &mut R,
) -> Result<SNiWMixtureFit<T>> {
    cfg.validate()?;
    let n = draws.len();
    if n_components == 0 || n < n_components {
        return Err(Error::InvalidArgument(format!(
            "need n >= K >= 1, got n = {n}, K = {n_components}"
        )));
    }
    let prep = prepare(draws)?;
    let mut best: Option<SNiWMixtureFit<T>> = None;
    let mut first_err: Option<Error> = None;
    for _ in 0..5 {
        match em_single(draws, &prep, n_components, mode, cfg, rng) {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        fit.objective_trace.last().unwrap() > b.objective_trace.last().unwrap()
                    }
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::NumericalDomain("EM failed".into())))
}

fn em_single<T: Real, R: Rng + ?Sized>(
    draws: &[SniwDraw<T>],
    prep: &Prepared<T>,
    k: usize,
    mode: EmMode,
    cfg: &MapPriorConfig<T>,
    rng: &mut R,
) -> Result<SNiWMixtureFit<T>> {
    let n = prep.n;
    let nf = cvu::<T>(n);
    let kf = cvu::<T>(k);

    // hard k-means assignment on stacked (xi, psi) as the starting
    // responsibilities
    let labels = kmeans_locations(draws, k, rng);
    let mut resp: Vec<Vec<T>> = vec![vec![T::zero(); n]; k];
    for (i, &l) in labels.iter().enumerate() {
        resp[l][i] = T::one();
    }

    let mut weights: Vec<T> = vec![T::one() / kf; k];
    let mut components: Vec<SNiWParams<T>> = Vec::with_capacity(k);
    let m_step = |resp: &Vec<Vec<T>>,
                  weights: &mut Vec<T>,
                  components: &mut Vec<SNiWParams<T>>|
     -> Result<()> {
        components.clear();
        for (j, r) in resp.iter().enumerate() {
            let n_j: T = r.iter().fold(T::zero(), |a, &b| a + b);
            weights[j] = match mode {
                EmMode::Mle => n_j / nf,
                EmMode::Map => {
                    (n_j + cfg.dirichlet_alpha - T::one())
                        / (nf + kf * (cfg.dirichlet_alpha - T::one()))
                }
            };
            components.push(weighted_mstep(draws, prep, r, mode, cfg)?);
        }
        Ok(())
    };
    m_step(&resp, &mut weights, &mut components)?;

    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    for _ in 0..500 {
        // E step
        let mut obj_ll = T::zero();
        for i in 0..n {
            let lps: Vec<T> = (0..k)
                .map(|j| {
                    let lw = if weights[j] > T::zero() {
                        weights[j].ln()
                    } else {
                        cv::<T>(f64::NEG_INFINITY)
                    };
                    Ok(lw + sniw_logpdf(&draws[i].xi, &draws[i].psi, &draws[i].sigma, &components[j])?)
                })
                .collect::<Result<Vec<_>>>()?;
            let max = lps.iter().fold(cv::<T>(f64::NEG_INFINITY), |a, &b| a.max(b));
            let mut total = T::zero();
            for &lp in &lps {
                total += (lp - max).exp();
            }
            obj_ll += max + total.ln();
            for j in 0..k {
                resp[j][i] = (lps[j] - max).exp() / total;
            }
        }
        let obj = obj_ll + prior_objective(mode, cfg, prep, &weights, &components);
        if let Some(&prev) = trace.last() {
            debug_assert!(
                obj >= prev - cv::<T>(1e-9) * (T::one() + prev.abs()),
                "EM objective decreased"
            );
            if (obj - prev).abs() < cv::<T>(1e-8) {
                trace.push(obj);
                converged = true;
                break;
            }
        }
        trace.push(obj);

        // M step
        m_step(&resp, &mut weights, &mut components)?;
    }
    Ok(SNiWMixtureFit { weights, components, objective_trace: trace, converged })
}

// Theta-dependent log-prior terms added to the MAP objective.
fn prior_objective<T: Real>(
    mode: EmMode,
    cfg: &MapPriorConfig<T>,
    prep: &Prepared<T>,
    weights: &[T],
    components: &[SNiWParams<T>],
) -> T {
    if mode == EmMode::Mle {
        return T::zero();
    }
    let d = cvu::<T>(prep.d);
    let half = cv::<T>(0.5);
    let mut acc = T::zero();
    if cfg.dirichlet_alpha != T::one() {
        for &w in weights {
            acc += (cfg.dirichlet_alpha - T::one()) * w.ln();
        }
    }
    let c_inv = cfg.c_scale.inverse();
    for comp in components {
        // location prior: N(m, (1/kappa0)(B ⊗ mean-Sigma))
        let mut dm = DMatrix::<T>::zeros(prep.d, 2);
        for i in 0..prep.d {
            dm[(i, 0)] = comp.b_xi[i] - prep.m_xi[i];
            dm[(i, 1)] = comp.b_psi[i] - prep.m_psi[i];
        }
        let quad = comp.b_cov.solve_mat(&(dm.transpose() * &prep.mean_prec * &dm)).trace();
        acc += -half * d * comp.b_cov.ln_det() - half * cfg.kappa0 * quad;
        // B penalty ∝ |B|^{-1/2} exp(-tr(C^-1 B^-1)/2)
        acc += -half * comp.b_cov.ln_det() - half * comp.b_cov.solve_mat(&c_inv).trace();
        // Lambda ~ Wishart(L, d + 2)
        acc += half * comp.lambda_scale.ln_det()
            - half * (&prep.l_inv * comp.lambda_scale.matrix()).trace();
        // lambda − (d+1) ~ Exp(rate)
        acc -= cfg.lambda_shift_rate * (comp.lambda_dof - d - T::one());
    }
    acc
}

// k-means on stacked (xi, psi) vectors; always returns k non-degenerate
// labels when possible (empty clusters grab the farthest points).
fn kmeans_locations<T: Real, R: Rng + ?Sized>(
    draws: &[SniwDraw<T>],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let n = draws.len();
    let d2 = draws[0].xi.len() * 2;
    let stack = |x: &SniwDraw<T>| {
        DVector::<T>::from_iterator(d2, x.xi.iter().chain(x.psi.iter()).copied())
    };
    let points: Vec<DVector<T>> = draws.iter().map(stack).collect();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + (rng.gen::<u64>() as usize) % (n - i);
        idx.swap(i, j);
    }
    let mut centers: Vec<DVector<T>> = idx[..k].iter().map(|&i| points[i].clone()).collect();
    let mut labels = vec![0usize; n];
    for _ in 0..20 {
        for (i, p) in points.iter().enumerate() {
            let mut best = 0;
            let mut best_d = cv::<T>(f64::INFINITY);
            for (j, c) in centers.iter().enumerate() {
                let dist = (p - c).norm_squared();
                if dist < best_d {
                    best_d = dist;
                    best = j;
                }
            }
            labels[i] = best;
        }
        let mut sums = vec![DVector::<T>::zeros(d2); k];
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += &points[i];
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = &sums[j] / cvu::<T>(counts[j]);
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::sniw::rsniw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn gen_draws(
        center: f64,
        n: usize,
        rng: &mut ChaCha12Rng,
    ) -> (Vec<SniwDraw<f64>>, SNiWParams<f64>) {
        let truth = SNiWParams::new(
            DVector::from_row_slice(&[center, -center]),
            DVector::from_row_slice(&[1.0, 0.5]),
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[0.3, 0.05, 0.05, 0.2])).unwrap(),
            SpdMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8])).unwrap(),
            9.0,
        )
        .unwrap();
        let draws = (0..n)
            .map(|_| {
                let (xi, psi, sigma) = rsniw(&truth, rng).unwrap();
                SniwDraw { xi, psi, sigma }
            })
            .collect();
        (draws, truth)
    }

    fn assert_close_params(fit: &SNiWParams<f64>, truth: &SNiWParams<f64>, rel: f64) {
        for i in 0..2 {
            assert!(
                (fit.b_xi[i] - truth.b_xi[i]).abs() <= rel * truth.b_xi[i].abs().max(0.5),
                "b_xi[{i}]: {} vs {}",
                fit.b_xi[i],
                truth.b_xi[i]
            );
            assert!(
                (fit.b_psi[i] - truth.b_psi[i]).abs() <= rel * truth.b_psi[i].abs().max(0.5),
                "b_psi[{i}]"
            );
        }
        for i in 0..2 {
            for j in 0..2 {
                let got = fit.b_cov.matrix()[(i, j)];
                let want = truth.b_cov.matrix()[(i, j)];
                assert!(
                    (got - want).abs() <= rel * want.abs().max(0.1),
                    "b_cov[{i}][{j}]: {got} vs {want}"
                );
                let got = fit.lambda_scale.matrix()[(i, j)];
                let want = truth.lambda_scale.matrix()[(i, j)];
                assert!(
                    (got - want).abs() <= rel * want.abs().max(0.2),
                    "lambda_scale[{i}][{j}]: {got} vs {want}"
                );
            }
        }
        assert!(
            (fit.lambda_dof - truth.lambda_dof).abs() <= rel * truth.lambda_dof,
            "lambda_dof {} vs {}",
            fit.lambda_dof,
            truth.lambda_dof
        );
    }

    #[test]
    fn mle_recovers_generating_sniw() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let (draws, truth) = gen_draws(2.0, 10_000, &mut rng);
        let xis: Vec<_> = draws.iter().map(|x| x.xi.clone()).collect();
        let psis: Vec<_> = draws.iter().map(|x| x.psi.clone()).collect();
        let sigmas: Vec<_> = draws.iter().map(|x| x.sigma.clone()).collect();
        let fit = mle_sniw(&xis, &psis, &sigmas).unwrap();
        assert_close_params(&fit, &truth, 0.10);
        // the 2x2 factor must be SPD by construction
        assert_eq!(fit.b_cov.dim(), 2);
    }

    #[test]
    fn mle_identical_draws_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let (draws, _) = gen_draws(0.0, 3, &mut rng);
        let one = &draws[0];
        let xis = vec![one.xi.clone(); 10];
        let psis = vec![one.psi.clone(); 10];
        let sigmas = vec![one.sigma.clone(); 10];
        assert!(matches!(
            mle_sniw(&xis, &psis, &sigmas),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn em_k1_equals_mle() {
        let mut rng = ChaCha12Rng::seed_from_u64(43);
        let (draws, _) = gen_draws(1.0, 500, &mut rng);
        let xis: Vec<_> = draws.iter().map(|x| x.xi.clone()).collect();
        let psis: Vec<_> = draws.iter().map(|x| x.psi.clone()).collect();
        let sigmas: Vec<_> = draws.iter().map(|x| x.sigma.clone()).collect();
        let direct = mle_sniw(&xis, &psis, &sigmas).unwrap();
        let fit = em_sniw(&draws, 1, EmMode::Mle, &MapPriorConfig::default(), &mut rng).unwrap();
        assert_eq!(fit.weights.len(), 1);
        assert!((fit.weights[0] - 1.0).abs() < 1e-14);
        // identical code path: exact match
        assert_eq!(fit.components[0].b_xi, direct.b_xi);
        assert_eq!(fit.components[0].lambda_dof, direct.lambda_dof);
    }

    #[test]
    fn em_separates_two_populations() {
        let mut rng = ChaCha12Rng::seed_from_u64(44);
        let (mut draws, t1) = gen_draws(50.0, 1500, &mut rng);
        let (more, t2) = gen_draws(-50.0, 1000, &mut rng);
        draws.extend(more);
        let fit = em_sniw(&draws, 2, EmMode::Mle, &MapPriorConfig::default(), &mut rng).unwrap();
        assert!(fit.converged);
        // match components to truths by location sign
        let (i1, i2) = if fit.components[0].b_xi[0] > 0.0 { (0, 1) } else { (1, 0) };
        assert_close_params(&fit.components[i1], &t1, 0.10);
        assert_close_params(&fit.components[i2], &t2, 0.10);
        assert!((fit.weights[i1] - 0.6).abs() < 0.05);
        // objective trace is non-decreasing
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * (1.0 + w[0].abs()));
        }
    }

    #[test]
    fn map_mode_survives_surplus_components() {
        let mut rng = ChaCha12Rng::seed_from_u64(45);
        let (mut draws, _) = gen_draws(30.0, 120, &mut rng);
        let (more, _) = gen_draws(-30.0, 80, &mut rng);
        draws.extend(more);
        let fit = em_sniw(&draws, 5, EmMode::Map, &MapPriorConfig::default(), &mut rng).unwrap();
        // runs to convergence; surplus components end up light
        let mut w = fit.weights.clone();
        w.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!(w[0] > 0.3 && w[1] > 0.2, "weights {w:?}");
        for t in fit.objective_trace.windows(2) {
            assert!(t[1] >= t[0] - 1e-9 * (1.0 + t[0].abs()));
        }
    }
}
