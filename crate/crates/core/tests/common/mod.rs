//! Independent oracles for the acceptance suite.
//!
//! Everything here recomputes expected values by a route that shares no code
//! with the implementation under test: explicit double sums for the mixture
//! recursion, sequential urn products and quadrature for the
//! Dirichlet–multinomial marginal, and order-statistics for uniformity.

/// One-sample Kolmogorov–Smirnov statistic against Uniform(0,1).
pub fn ks_statistic_uniform(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len() as f64;
    let mut d = 0.0_f64;
    for (i, &v) in values.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - v).max(v - i as f64 / n);
    }
    d
}

/// Asymptotic Kolmogorov critical value for level 1e-3: `P(√n·Dₙ > c) = α`.
pub const KS_CRITICAL_1E3: f64 = 1.9494746035;

/// Explicit mixture value `Σ_{τ≤t} w_τ Π_{s=τ}^{t} e_s` by brute force.
pub fn explicit_mixture(evals: &[f64]) -> f64 {
    let t = evals.len();
    let mut total = 0.0;
    for tau in 1..=t {
        let weight = 1.0 / (tau as f64 * (tau as f64 + 1.0));
        let product: f64 = evals[tau - 1..t].iter().product();
        total += weight * product;
    }
    total
}

/// Log marginal likelihood of Dirichlet–multinomial counts via the
/// sequential urn product `Π_k (κ + seen_in_bin) / (Bκ + seen_total)`,
/// with no gamma functions anywhere.
pub fn urn_log_marginal(counts: &[u64], kappa: f64) -> f64 {
    let bins = counts.len() as f64;
    let mut log_p = 0.0;
    let mut seen_total = 0.0;
    for &c in counts {
        for j in 0..c {
            log_p += ((kappa + j as f64) / (bins * kappa + seen_total)).ln();
            seen_total += 1.0;
        }
    }
    log_p
}

/// Log Bayes factor oracle built on the urn product: the uniform-null
/// likelihood of n observations is `B^{-n}`.
pub fn urn_log_bayes_factor(counts: &[u64], kappa: f64) -> f64 {
    let n: u64 = counts.iter().sum();
    urn_log_marginal(counts, kappa) + n as f64 * (counts.len() as f64).ln()
}

/// Quadrature oracle for the B = 2, κ = 1/2 marginal:
/// `p(c | H1) = (2/π) ∫₀^{π/2} sin^{2c₁}φ · cos^{2c₂}φ dφ`
/// (the substitution θ = sin²φ removes the Dir(½,½) endpoint singularities).
pub fn quadrature_log_bayes_factor_b2(c1: u64, c2: u64) -> f64 {
    let f = |phi: f64| {
        phi.sin().powi(2 * c1 as i32) * phi.cos().powi(2 * c2 as i32)
    };
    // Composite Simpson on a smooth integrand.
    let panels = 20_000usize;
    let h = std::f64::consts::FRAC_PI_2 / panels as f64;
    let mut sum = f(0.0) + f(std::f64::consts::FRAC_PI_2);
    for k in 1..panels {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * f(k as f64 * h);
    }
    let integral = sum * h / 3.0;
    let log_h1 = (2.0 / std::f64::consts::PI * integral).ln();
    let n = (c1 + c2) as f64;
    log_h1 + n * 2.0_f64.ln()
}

/// Kahan-compensated sum, smallest terms first.
pub fn kahan_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for term in terms {
        let y = term - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
