//! Random variate generation from the normal mean-variance mixture
//! representations `X = μ + Wβ + √W U`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::gh::{GhdParams, StParams};
use super::gig::GigParams;
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

fn mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

// Ratio-of-uniforms without mode shift (Hörmann & Leydold).
fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.random::<f64>();
        let v: f64 = rng.random();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

// Ratio-of-uniforms with mode shift; bounds from the cubic's real roots.
fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let fi = (-q / (2.0 * (-p * p * p / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.random::<f64>() * (uplus - uminus);
        let v: f64 = rng.random();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

// Rejection from a three-piece hat, for small λ and ω.
fn small_concentration<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.random::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let a = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * a).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.random::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// One GIG draw. `psi == 0` draws from the inverse-gamma boundary.
pub fn sample_gig<R: Rng + ?Sized>(params: &GigParams, rng: &mut R) -> f64 {
    let GigParams { lambda, chi, psi } = *params;
    if psi == 0.0 {
        let g = Gamma::new(-lambda, 2.0 / chi).expect("valid inverse-gamma boundary");
        return 1.0 / g.sample(rng);
    }
    let l = lambda.abs();
    let alpha = (chi / psi).sqrt();
    let omega = (chi * psi).sqrt();
    let x = if l > 2.0 || omega > 3.0 {
        rou_shift(l, omega, rng)
    } else if l >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(l, omega, rng)
    } else {
        small_concentration(l, omega, rng)
    };
    if lambda < 0.0 {
        alpha / x
    } else {
        alpha * x
    }
}

fn mixture_draws<F: FnMut(&mut ChaCha8Rng) -> f64>(
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    beta: &DVector<f64>,
    n: usize,
    seed: u64,
    mut draw_w: F,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::Argument("sample size must be at least 1".into()));
    }
    let p = mu.len();
    let l = SpdFactor::new(sigma)?.lower();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(n, p);
    for i in 0..n {
        let w = draw_w(&mut rng);
        let z = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let x = mu + beta * w + (&l * z) * w.sqrt();
        out.set_row(i, &x.transpose());
    }
    Ok(out)
}

/// `n` draws from a GHD, rows are observations.
pub fn sample_ghd(params: &GhdParams, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let gig = params.mixing();
    mixture_draws(&params.mu, &params.sigma, &params.beta, n, seed, |rng| sample_gig(&gig, rng))
}

/// `n` draws from a skew-t, mixing over `W ~ IG(v/2, v/2)`.
pub fn sample_st(params: &StParams, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let g = Gamma::new(0.5 * params.dof, 2.0 / params.dof).map_err(|e| Error::Argument(e.to_string()))?;
    mixture_draws(&params.mu, &params.sigma, &params.beta, n, seed, |rng| 1.0 / g.sample(rng))
}

/// `n` Gaussian draws.
pub fn sample_gaussian(mu: &DVector<f64>, sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    mixture_draws(mu, sigma, &DVector::zeros(mu.len()), n, seed, |_| 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::gig::gig_moment;

    fn mc_mean(params: &GigParams, n: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws: Vec<f64> = (0..n).map(|_| sample_gig(params, &mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / (n - 1) as f64;
        (m, (v / n as f64).sqrt())
    }

    #[test]
    fn every_branch_matches_its_mean() {
        // shift branch, no-shift branch, small-concentration branch, negative index
        for &(l, c, s) in &[(3.0, 2.0, 1.0), (0.5, 1.0, 1.0), (0.1, 0.01, 0.01), (-1.5, 2.0, 0.5), (0.0, 0.02, 0.02)] {
            let p = GigParams::new(l, c, s).unwrap();
            let (m, se) = mc_mean(&p, 200_000);
            let exact = gig_moment(1.0, &p).unwrap();
            assert!((m - exact).abs() < 5.0 * se, "({l},{c},{s}): {m} vs {exact} (se {se})");
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        let p = StParams::new(5.0, DVector::zeros(2), DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        assert_eq!(sample_st(&p, 50, 3).unwrap(), sample_st(&p, 50, 3).unwrap());
    }
}
