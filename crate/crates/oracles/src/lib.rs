//! Reference computations for test oracles.
//!
//! Everything here is written from first principles (quadrature, brute-force
//! enumeration, dense Gauss-Jordan algebra) and never calls into the library
//! under test, so the values it produces can be used to check that library.

pub mod quad {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_639_206_854_697_526_329,
        0.949_107_912_342_758_524_526_189_684_047_851,
        0.864_864_423_359_769_072_789_712_788_640_926,
        0.741_531_185_599_394_439_863_864_773_280_788,
        0.586_087_235_467_691_130_294_144_845_693_013,
        0.405_845_151_377_397_166_906_606_412_076_961,
        0.207_784_955_007_898_467_600_689_403_773_245,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_224_963_732_008_058_970,
        0.063_092_092_629_978_553_290_700_663_189_204,
        0.104_790_010_322_250_183_839_876_322_541_518,
        0.140_653_259_715_525_918_745_189_590_510_238,
        0.169_004_726_639_267_902_826_583_426_598_550,
        0.190_350_578_064_785_409_913_256_402_421_014,
        0.204_432_940_075_298_892_414_161_999_234_649,
        0.209_482_141_084_727_828_012_999_174_891_714,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_693_270_611_432_679_082,
        0.279_705_391_489_276_667_901_467_771_423_780,
        0.381_830_050_505_118_944_950_369_775_488_975,
        0.417_959_183_673_469_387_755_102_040_816_327,
    ];

    fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        let fc = f(c);
        let mut kron = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        for j in 0..7 {
            let dx = h * XGK[j];
            let s = f(c - dx) + f(c + dx);
            kron += WGK[j] * s;
            if j % 2 == 1 {
                gauss += WG[j / 2] * s;
            }
        }
        (kron * h, ((kron - gauss) * h).abs())
    }

    /// Error floor below which splitting only chases rounding noise.
    fn roundoff(val: f64) -> f64 {
        50.0 * f64::EPSILON * val.abs()
    }

    fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (val, err) = gk15(f, a, b);
        if err <= tol.max(roundoff(val)) || depth == 0 || (b - a).abs() < 1e-300 {
            return val;
        }
        let m = 0.5 * (a + b);
        adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
    }

    /// Adaptive Gauss-Kronrod (7/15) integral of `f` over `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        adapt(&f, a, b, tol, 48)
    }

    /// Integral over `[a, ∞)` through the map `x = a + t / (1 - t)`.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, tol: f64) -> f64 {
        let g = |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let u = 1.0 - t;
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        };
        adapt(&g, 0.0, 1.0, tol, 48)
    }

    /// Integral over `(0, ∞)` split at `pivot` so both tails are resolved.
    pub fn integrate_positive<F: Fn(f64) -> f64>(f: F, pivot: f64, tol: f64) -> f64 {
        // (0, pivot] through x = pivot * s, the tail through the infinite map.
        let head = adapt(&|s: f64| pivot * f(pivot * s), 0.0, 1.0, tol, 48);
        head + integrate_to_infinity(&f, pivot, tol)
    }

    /// Integral over the whole real line, split at `center`.
    pub fn integrate_real_line<F: Fn(f64) -> f64>(f: F, center: f64, tol: f64) -> f64 {
        integrate_to_infinity(|x| f(x), center, tol) + integrate_to_infinity(|x| f(2.0 * center - x), center, tol)
    }
}

pub mod plane {
    use super::quad::integrate_real_line;

    /// Iterated integral of `f(x, y)` over the plane.
    pub fn integrate<F: Fn(f64, f64) -> f64>(f: F, center: (f64, f64), tol: f64) -> f64 {
        integrate_real_line(|x| integrate_real_line(|y| f(x, y), center.1, tol), center.0, tol)
    }

    /// As [`integrate`], in a frame whose first axis runs along `direction`
    /// through `origin`. Keeps a long narrow ridge on that axis, where a
    /// fixed split point in the inner integral would otherwise skip it.
    pub fn integrate_along<F: Fn(f64, f64) -> f64>(f: F, origin: (f64, f64), direction: (f64, f64), tol: f64) -> f64 {
        let norm = direction.0.hypot(direction.1);
        let (c, s) = if norm > 0.0 { (direction.0 / norm, direction.1 / norm) } else { (1.0, 0.0) };
        integrate(|u, w| f(origin.0 + c * u - s * w, origin.1 + s * u + c * w), (0.0, 0.0), tol)
    }
}

pub mod bessel {
    use super::quad::{integrate, integrate_to_infinity};

    /// `log K_ν(x)` from `K_ν(x) = ∫_0^∞ exp(-x cosh t) cosh(νt) dt`. The
    /// exponent is shifted by its maximum and the range split at the peak.
    pub fn log_k(nu: f64, x: f64) -> f64 {
        let nu = nu.abs();
        let expo = |t: f64| -x * (t.cosh() - 1.0) + nu * t;
        let t_peak = (nu / x).asinh();
        let peak = expo(t_peak);
        let f = |t: f64| (expo(t) - peak).exp() * 0.5 * (1.0 + (-2.0 * nu * t).exp());
        let v = integrate(f, 0.0, t_peak, 1e-13) + integrate_to_infinity(f, t_peak, 1e-13);
        v.ln() + peak - x
    }

    /// `∂/∂ν log K_ν(x)` from `∫ exp(-x cosh t) t sinh(νt) dt / K_ν(x)`.
    pub fn dlog_k_dorder(nu: f64, x: f64) -> f64 {
        let sign = nu.signum();
        let nu = nu.abs();
        let expo = |t: f64| -x * (t.cosh() - 1.0) + nu * t;
        let t_peak = (nu / x).asinh().max(1.0 / x.sqrt().max(1.0));
        let peak = expo(t_peak);
        let f = |t: f64| (expo(t) - peak).exp() * t * 0.5 * (1.0 - (-2.0 * nu * t).exp());
        let v = integrate(f, 0.0, t_peak, 1e-13) + integrate_to_infinity(f, t_peak, 1e-13);
        sign * (v.ln() + peak - x - log_k(nu, x)).exp()
    }
}

pub mod gig {
    //! GIG expectations as ratios of one-dimensional integrals of the
    //! unnormalized kernel `w^{λ-1} exp(-(χ/w + ψw)/2)`.
    use super::quad::{integrate, integrate_to_infinity};

    fn kernel_integral<G: Fn(f64) -> f64>(lambda: f64, chi: f64, psi: f64, extra_power: f64, g: G) -> f64 {
        let a = lambda - 1.0 + extra_power;
        let log_kernel = |w: f64| a * w.ln() - 0.5 * (chi / w + psi * w);
        // mode of the kernel
        let mode = (a + (a * a + chi * psi).sqrt()) / psi;
        let top = log_kernel(mode);
        let f = |w: f64| if w <= 0.0 { 0.0 } else { (log_kernel(w) - top).exp() * g(w) };
        integrate(&f, 0.0, mode, 1e-15) + integrate_to_infinity(&f, mode, 1e-15)
    }

    fn log_kernel_mass(lambda: f64, chi: f64, psi: f64, extra_power: f64) -> f64 {
        let a = lambda - 1.0 + extra_power;
        let mode = (a + (a * a + chi * psi).sqrt()) / psi;
        let top = a * mode.ln() - 0.5 * (chi / mode + psi * mode);
        kernel_integral(lambda, chi, psi, extra_power, |_| 1.0).ln() + top
    }

    /// `E[W^α]`, `ψ > 0`.
    pub fn moment(lambda: f64, chi: f64, psi: f64, alpha: f64) -> f64 {
        (log_kernel_mass(lambda, chi, psi, alpha) - log_kernel_mass(lambda, chi, psi, 0.0)).exp()
    }

    /// `E[log W]`, `ψ > 0`.
    pub fn expect_log(lambda: f64, chi: f64, psi: f64) -> f64 {
        kernel_integral(lambda, chi, psi, 0.0, |w| w.ln()) / kernel_integral(lambda, chi, psi, 0.0, |_| 1.0)
    }
}

pub mod diff {
    /// Richardson-extrapolated central difference (four halvings).
    pub fn richardson<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
        let n = 4;
        let mut table = vec![vec![0.0; n]; n];
        let mut step = h;
        for i in 0..n {
            table[i][0] = (f(x + step) - f(x - step)) / (2.0 * step);
            let mut factor = 4.0;
            for j in 1..=i {
                table[i][j] = table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1.0);
                factor *= 4.0;
            }
            step *= 0.5;
        }
        table[n - 1][n - 1]
    }
}

pub mod partition {
    /// Adjusted Rand index by explicit enumeration of all unordered pairs.
    pub fn pair_enumeration_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut neither) = (0u64, 0u64, 0u64, 0u64);
        for i in 0..n {
            for j in (i + 1)..n {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => both += 1,
                    (true, false) => only_a += 1,
                    (false, true) => only_b += 1,
                    (false, false) => neither += 1,
                }
            }
        }
        let total = (both + only_a + only_b + neither) as f64;
        let same_a = (both + only_a) as f64;
        let same_b = (both + only_b) as f64;
        let expected = same_a * same_b / total;
        let max_index = 0.5 * (same_a + same_b);
        if (max_index - expected).abs() < 1e-300 {
            return if a == b { 1.0 } else { 0.0 };
        }
        (both as f64 - expected) / (max_index - expected)
    }
}

pub mod dense {
    pub type Mat = Vec<Vec<f64>>;

    pub fn identity(n: usize) -> Mat {
        (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
    }

    /// Gauss-Jordan inverse with partial pivoting.
    pub fn invert(m: &Mat) -> Mat {
        let n = m.len();
        let mut a: Mat = m.clone();
        let mut inv = identity(n);
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            inv.swap(col, piv);
            let d = a[col][col];
            for k in 0..n {
                a[col][k] /= d;
                inv[col][k] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    if f != 0.0 {
                        for k in 0..n {
                            a[r][k] -= f * a[col][k];
                            inv[r][k] -= f * inv[col][k];
                        }
                    }
                }
            }
        }
        inv
    }

    /// Determinant by elimination with partial pivoting.
    pub fn det(m: &Mat) -> f64 {
        let n = m.len();
        let mut a = m.clone();
        let mut d = 1.0;
        for col in 0..n {
            let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            if piv != col {
                a.swap(col, piv);
                d = -d;
            }
            let p = a[col][col];
            d *= p;
            if p == 0.0 {
                return 0.0;
            }
            for r in (col + 1)..n {
                let f = a[r][col] / p;
                for k in col..n {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
        d
    }

    pub fn mat_vec(m: &Mat, v: &[f64]) -> Vec<f64> {
        m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    pub fn quad_form(m: &Mat, v: &[f64]) -> f64 {
        v.iter().zip(mat_vec(m, v)).map(|(a, b)| a * b).sum()
    }

    pub fn sub(idx_r: &[usize], idx_c: &[usize], m: &Mat) -> Mat {
        idx_r.iter().map(|&i| idx_c.iter().map(|&j| m[i][j]).collect()).collect()
    }

    pub fn log_mvn(x: &[f64], mean: &[f64], cov: &Mat) -> f64 {
        let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
        let inv = invert(cov);
        let p = x.len() as f64;
        -0.5 * (p * (2.0 * std::f64::consts::PI).ln() + det(cov).ln() + quad_form(&inv, &d))
    }
}

pub mod gaussian_em {
    //! One EM step for a Gaussian mixture with missing values, written in
    //! the textbook conditional-Gaussian form.
    use super::dense::{invert, log_mvn, mat_vec, sub, Mat};

    pub struct Step {
        pub weights: Vec<f64>,
        pub means: Vec<Vec<f64>>,
        pub covs: Vec<Mat>,
    }

    pub fn step(data: &[Vec<Option<f64>>], weights: &[f64], means: &[Vec<f64>], covs: &[Mat]) -> Step {
        let n = data.len();
        let g = weights.len();
        let p = means[0].len();
        let mut resp = vec![vec![0.0; g]; n];
        // conditional first and second moments of each full row under each component
        let mut ex = vec![vec![vec![0.0; p]; g]; n];
        let mut exx = vec![vec![vec![vec![0.0; p]; p]; g]; n];
        for (i, row) in data.iter().enumerate() {
            let obs: Vec<usize> = (0..p).filter(|&j| row[j].is_some()).collect();
            let mis: Vec<usize> = (0..p).filter(|&j| row[j].is_none()).collect();
            let xo: Vec<f64> = obs.iter().map(|&j| row[j].unwrap()).collect();
            let mut logs = vec![0.0; g];
            for k in 0..g {
                let mo: Vec<f64> = obs.iter().map(|&j| means[k][j]).collect();
                let soo = sub(&obs, &obs, &covs[k]);
                logs[k] = weights[k].ln() + log_mvn(&xo, &mo, &soo);
                let soo_inv = invert(&soo);
                let smo = sub(&mis, &obs, &covs[k]);
                let smm = sub(&mis, &mis, &covs[k]);
                let d: Vec<f64> = xo.iter().zip(&mo).map(|(a, b)| a - b).collect();
                let w = mat_vec(&soo_inv, &d);
                let cm: Vec<f64> = mis.iter().enumerate().map(|(r, &j)| means[k][j] + smo[r].iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()).collect();
                // Σmm - Σmo Σoo^-1 Σom
                let mut cc = smm.clone();
                for r in 0..mis.len() {
                    let t = mat_vec(&soo_inv, &smo[r]);
                    for c in 0..mis.len() {
                        cc[r][c] -= smo[c].iter().zip(&t).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                let mut full = vec![0.0; p];
                for (r, &j) in obs.iter().enumerate() {
                    full[j] = xo[r];
                }
                for (r, &j) in mis.iter().enumerate() {
                    full[j] = cm[r];
                }
                ex[i][k] = full.clone();
                for a in 0..p {
                    for b in 0..p {
                        exx[i][k][a][b] = full[a] * full[b];
                    }
                }
                for (r, &ja) in mis.iter().enumerate() {
                    for (c, &jb) in mis.iter().enumerate() {
                        exx[i][k][ja][jb] += cc[r][c];
                    }
                }
            }
            let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s: f64 = logs.iter().map(|l| (l - m).exp()).sum();
            for k in 0..g {
                resp[i][k] = (logs[k] - m).exp() / s;
            }
        }
        let mut out = Step { weights: vec![0.0; g], means: vec![vec![0.0; p]; g], covs: vec![vec![vec![0.0; p]; p]; g] };
        for k in 0..g {
            let nk: f64 = (0..n).map(|i| resp[i][k]).sum();
            out.weights[k] = nk / n as f64;
            for i in 0..n {
                for a in 0..p {
                    out.means[k][a] += resp[i][k] * ex[i][k][a] / nk;
                }
            }
            for i in 0..n {
                for a in 0..p {
                    for b in 0..p {
                        let m = &out.means[k];
                        let v = exx[i][k][a][b] - ex[i][k][a] * m[b] - m[a] * ex[i][k][b] + m[a] * m[b];
                        out.covs[k][a][b] += resp[i][k] * v / nk;
                    }
                }
            }
        }
        out
    }
}
