//! Collision rates, offspring laws and limit constants.
//!
//! Everything here is a pure function of its arguments. Gamma and Beta
//! ratios are evaluated in log space so that rates for thousands of blocks
//! stay finite.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{check_alpha, domain, Error, Result};
use crate::quadrature;

/// Relative tolerance for density quadrature.
pub const QUAD_REL_TOL: f64 = 1e-12;
/// Relative tolerance for the consistency identity of the rate table.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Beyond this size χ quantiles are taken from the asymptotic tail directly.
const FINE_LIMIT: f64 = 1e12;

pub type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// The finite measure Λ on `[0, 1]` that drives the collision rates.
#[derive(Clone)]
pub enum LambdaMeasure {
    /// Unit mass at zero: Kingman's coalescent.
    KingmanAtom,
    /// The Beta(2 − α, α) probability distribution, `1 < α < 2`.
    Beta { alpha: f64 },
    /// Lebesgue measure on `(0, 1)`: the Bolthausen–Sznitman coalescent.
    UniformBS,
    /// A density on `(0, 1)`, integrated numerically. `quadrature_points`
    /// caps the number of adaptive subintervals per dyadic piece.
    GeneralDensity {
        density: Density,
        quadrature_points: usize,
    },
}

impl fmt::Debug for LambdaMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::KingmanAtom => write!(f, "KingmanAtom"),
            Self::Beta { alpha } => write!(f, "Beta {{ alpha: {alpha} }}"),
            Self::UniformBS => write!(f, "UniformBS"),
            Self::GeneralDensity {
                quadrature_points, ..
            } => write!(f, "GeneralDensity {{ quadrature_points: {quadrature_points} }}"),
        }
    }
}

impl LambdaMeasure {
    pub fn beta(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self::Beta { alpha })
    }

    /// Wraps a density after checking that its total mass is finite and positive.
    pub fn general<F>(density: F, quadrature_points: usize) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if quadrature_points == 0 {
            return domain("quadrature_points must be positive");
        }
        let m = Self::GeneralDensity {
            density: Arc::new(density),
            quadrature_points,
        };
        let mass = m.total_mass()?;
        if !(mass.is_finite() && mass > 0.0) {
            return domain(format!("density has non-positive or infinite mass {mass}"));
        }
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Beta { alpha } => check_alpha(*alpha),
            _ => Ok(()),
        }
    }

    /// Λ([0, 1]).
    pub fn total_mass(&self) -> Result<f64> {
        match self {
            Self::KingmanAtom | Self::Beta { .. } | Self::UniformBS => Ok(1.0),
            Self::GeneralDensity { density, .. } => {
                let q = quadrature::integrate_unit_singular(|x, _| density(x), 1e-10)?;
                Ok(q.value)
            }
        }
    }

    /// Shape parameter of the Beta family, if any.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Self::Beta { alpha } => Some(*alpha),
            _ => None,
        }
    }
}

fn check_bk(b: usize, k: usize) -> Result<()> {
    if k < 2 || k > b {
        return domain(format!("need 2 <= k <= b, got b={b}, k={k}"));
    }
    Ok(())
}

/// ln Γ(x + a) − ln Γ(x), without the cancellation of two large log-gammas.
pub(crate) fn ln_gamma_ratio(x: f64, a: f64) -> f64 {
    if x < 12.0 || x + a < 12.0 {
        return ln_gamma(x + a) - ln_gamma(x);
    }
    // Stirling series difference
    let y = x + a;
    let series = |z: f64| {
        let z2 = z * z;
        1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2) - 1.0 / (1680.0 * z * z2 * z2 * z2)
    };
    (x - 0.5) * (a / x).ln_1p() + a * y.ln() - a + series(y) - series(x)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// λ_{b,k} = ∫ x^{k−2}(1−x)^{b−k} Λ(dx): the rate at which one particular
/// k-tuple among b blocks merges.
pub fn collision_rate(b: usize, k: usize, measure: &LambdaMeasure) -> Result<f64> {
    check_bk(b, k)?;
    measure.validate()?;
    let (bf, kf) = (b as f64, k as f64);
    match measure {
        LambdaMeasure::KingmanAtom => Ok(if k == 2 { 1.0 } else { 0.0 }),
        LambdaMeasure::Beta { alpha } => {
            Ok((ln_beta(kf - alpha, bf - kf + alpha) - ln_beta(2.0 - alpha, *alpha)).exp())
        }
        LambdaMeasure::UniformBS => Ok(ln_beta(kf - 1.0, bf - kf + 1.0).exp()),
        LambdaMeasure::GeneralDensity {
            density,
            quadrature_points,
        } => {
            let integrand = |x: f64, y: f64| x.powi(k as i32 - 2) * y.powi((b - k) as i32) * density(x);
            let q = quadrature::integrate_unit_singular_limited(integrand, QUAD_REL_TOL, *quadrature_points)?;
            Ok(q.value)
        }
    }
}

/// Memoized λ_{b,k} for `2 <= k <= b <= n_max`, with the total rates
/// G_b = Σ_k C(b,k) λ_{b,k}.
#[derive(Debug, Clone, Serialize)]
pub struct RateTable {
    n_max: usize,
    // rows[b - 2][k - 2]
    rows: Vec<Vec<f64>>,
    total_rates: Vec<f64>,
}

/// C(n, k) as a float; exact products while they stay small.
pub(crate) fn choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    if n <= 1000 {
        let mut c = 1.0;
        for i in 0..k {
            c = c * (n - i) as f64 / (i + 1) as f64;
        }
        c.round()
    } else {
        ln_choose(n, k).exp()
    }
}

pub(crate) fn ln_choose(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

impl RateTable {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn rate(&self, b: usize, k: usize) -> f64 {
        assert!(2 <= k && k <= b && b <= self.n_max, "rate({b},{k}) outside table");
        self.rows[b - 2][k - 2]
    }

    /// G_b, the total merger rate with b blocks.
    pub fn total_rate(&self, b: usize) -> f64 {
        assert!(2 <= b && b <= self.n_max);
        self.total_rates[b - 2]
    }

    /// Probability that the next merger among b blocks involves exactly k.
    pub fn merger_size_prob(&self, b: usize, k: usize) -> f64 {
        (ln_choose(b, k) + self.rate(b, k).ln() - self.total_rate(b).ln()).exp()
    }

    /// Largest relative violation of λ_{b,k} = λ_{b+1,k} + λ_{b+1,k+1}.
    pub fn max_consistency_error(&self) -> (usize, usize, f64) {
        let mut worst = (2, 2, 0.0);
        for b in 2..self.n_max {
            for k in 2..=b {
                let lhs = self.rate(b, k);
                let rhs = self.rate(b + 1, k) + self.rate(b + 1, k + 1);
                let rel = if lhs == 0.0 {
                    rhs.abs()
                } else {
                    ((lhs - rhs) / lhs).abs()
                };
                if rel > worst.2 {
                    worst = (b, k, rel);
                }
            }
        }
        worst
    }
}

/// Tabulates [`collision_rate`] and checks consistency of restrictions.
pub fn build_rate_table(n_max: usize, measure: &LambdaMeasure) -> Result<RateTable> {
    if n_max < 2 {
        return domain(format!("n_max must be >= 2, got {n_max}"));
    }
    let mut rows = Vec::with_capacity(n_max - 1);
    let mut total_rates = Vec::with_capacity(n_max - 1);
    for b in 2..=n_max {
        let row = (2..=b)
            .map(|k| collision_rate(b, k, measure))
            .collect::<Result<Vec<f64>>>()?;
        let g: f64 = row
            .iter()
            .enumerate()
            .map(|(i, &l)| choose(b, i + 2) * l)
            .sum();
        if !(g > 0.0) {
            return domain(format!("total rate G_{b} is not positive"));
        }
        rows.push(row);
        total_rates.push(g);
    }
    let table = RateTable {
        n_max,
        rows,
        total_rates,
    };
    let (b, k, rel_err) = table.max_consistency_error();
    if rel_err > CONSISTENCY_TOL {
        return Err(Error::Inconsistent { b, k, rel_err });
    }
    Ok(table)
}

/// Closed-form total rate for the Beta(2−α, α) coalescent:
/// G_b = Γ(b+α−1) / (α Γ(α) Γ(b−1)).
pub fn beta_total_rate(b: usize, alpha: f64) -> f64 {
    let bf = b as f64;
    (ln_gamma_ratio(bf - 1.0, alpha) - alpha.ln() - ln_gamma(alpha)).exp()
}

/// Samples merger sizes without materializing a rate table when the
/// measure admits closed forms.
#[derive(Debug, Clone)]
pub enum MergerLaw {
    Kingman,
    Beta { alpha: f64 },
    Uniform,
    Table(Arc<RateTable>),
}

impl MergerLaw {
    /// Picks the closed-form law when one exists, otherwise tabulates up to `n`.
    pub fn for_measure(measure: &LambdaMeasure, n: usize) -> Result<Self> {
        measure.validate()?;
        Ok(match measure {
            LambdaMeasure::KingmanAtom => Self::Kingman,
            LambdaMeasure::Beta { alpha } => Self::Beta { alpha: *alpha },
            LambdaMeasure::UniformBS => Self::Uniform,
            LambdaMeasure::GeneralDensity { .. } => Self::Table(Arc::new(build_rate_table(n.max(2), measure)?)),
        })
    }

    pub fn total_rate(&self, b: usize) -> f64 {
        match self {
            Self::Kingman => (b * (b - 1) / 2) as f64,
            Self::Beta { alpha } => beta_total_rate(b, *alpha),
            Self::Uniform => (b - 1) as f64,
            Self::Table(t) => t.total_rate(b),
        }
    }

    /// P(next merger has size 2), and the ratio p_{k+1}/p_k where a closed
    /// form exists.
    fn first_prob(&self, b: usize) -> f64 {
        let bf = b as f64;
        match self {
            Self::Kingman => 1.0,
            Self::Beta { alpha } => bf * alpha / (2.0 * (bf + alpha - 2.0)),
            Self::Uniform => bf / (2.0 * (bf - 1.0)),
            Self::Table(t) => t.merger_size_prob(b, 2),
        }
    }

    /// P(merger size = k | b blocks), for testing and reporting.
    pub fn size_prob(&self, b: usize, k: usize) -> f64 {
        assert!(2 <= k && k <= b);
        match self {
            Self::Table(t) => t.merger_size_prob(b, k),
            _ => {
                let mut p = self.first_prob(b);
                for j in 2..k {
                    p *= self.ratio(b, j);
                }
                p
            }
        }
    }

    fn ratio(&self, b: usize, k: usize) -> f64 {
        let (bf, kf) = (b as f64, k as f64);
        match self {
            Self::Kingman => 0.0,
            Self::Beta { alpha } => (bf - kf) * (kf - alpha) / ((kf + 1.0) * (bf - kf - 1.0 + alpha)),
            Self::Uniform => (kf - 1.0) / (kf + 1.0),
            Self::Table(t) => t.merger_size_prob(b, k + 1) / t.merger_size_prob(b, k),
        }
    }

    /// Draws the number of blocks taking part in the next merger.
    /// Inverse CDF walked upward from k = 2; expected cost is the mean
    /// merger size.
    pub fn sample_size<R: Rng + ?Sized>(&self, b: usize, rng: &mut R) -> usize {
        debug_assert!(b >= 2);
        if let Self::Kingman = self {
            return 2;
        }
        let u: f64 = rng.random();
        let mut p = self.first_prob(b);
        let mut cum = p;
        let mut k = 2;
        while cum <= u && k < b {
            p *= self.ratio(b, k);
            k += 1;
            cum += p;
        }
        k
    }
}

/// Constants of the Galton–Watson picture of the Beta(2−α, α)-coalescent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelConstants {
    pub alpha: f64,
    pub theta: f64,
    /// Mean offspring number 1 + 1/(α−1).
    pub m: f64,
    /// Killing rate (2−α)/(α−1).
    pub c: f64,
    /// (α−1)^{−1/(α−1)}.
    pub k_const: f64,
}

impl ModelConstants {
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !(theta >= 0.0 && theta.is_finite()) {
            return domain(format!("theta must be finite and nonnegative, got {theta}"));
        }
        Ok(Self {
            alpha,
            theta,
            m: 1.0 + 1.0 / (alpha - 1.0),
            c: (2.0 - alpha) / (alpha - 1.0),
            k_const: (alpha - 1.0).powf(-1.0 / (alpha - 1.0)),
        })
    }
}

/// P(χ = k) = αΓ(k−α) / (k! Γ(2−α)) for k ≥ 2, zero for k < 2.
pub fn chi_pmf(k: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k < 2 {
        return Ok(0.0);
    }
    let kf = k as f64;
    Ok((alpha.ln() + ln_gamma_ratio(kf + 1.0, -1.0 - alpha) - ln_gamma(2.0 - alpha)).exp())
}

/// P(χ > k) = Γ(k+1−α) / (Γ(2−α) k!) for k ≥ 1 (and 1 for k = 0).
pub fn chi_tail(k: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return Ok(1.0);
    }
    let kf = k as f64;
    Ok((ln_gamma_ratio(kf + 1.0, -alpha) - ln_gamma(2.0 - alpha)).exp())
}

/// Generating function E[r^χ] = ((1−r)^α − 1 + αr)/(α−1).
pub fn chi_pgf(r: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(0.0..=1.0).contains(&r) {
        return domain(format!("pgf argument must lie in [0, 1], got {r}"));
    }
    Ok(((1.0 - r).powf(alpha) - 1.0 + alpha * r) / (alpha - 1.0))
}

/// P(ξ_τ = k) = (2−α)Γ(k+α−2) / (Γ(α−1) k!): the population of the
/// offspring-χ branching process at an independent Exp(c) time.
pub fn xi_tau_pmf(k: u64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if k == 0 {
        return domain("xi_tau is supported on k >= 1");
    }
    let kf = k as f64;
    Ok(((2.0 - alpha).ln() + ln_gamma_ratio(kf + 1.0, alpha - 3.0) - ln_gamma(alpha - 1.0)).exp())
}

/// First-step recursion for P(ξ_τ = k), k = 1..=k_max, seeded with
/// P(ξ_τ = 1) = 2 − α. Entry `i` holds k = i + 1.
pub fn xi_tau_pmf_recursive(k_max: usize, alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if k_max == 0 {
        return domain("k_max must be >= 1");
    }
    let c = (2.0 - alpha) / (alpha - 1.0);
    let chi: Vec<f64> = (0..=k_max as u64 + 1)
        .map(|k| chi_pmf(k, alpha))
        .collect::<Result<_>>()?;
    let mut p = Vec::with_capacity(k_max);
    p.push(2.0 - alpha);
    for k in 2..=k_max {
        let s: f64 = (1..k).map(|j| j as f64 * p[j - 1] * chi[k - j + 1]).sum();
        p.push(s / (k as f64 + c));
    }
    Ok(p)
}

/// u_t(λ) = (λ^{1−α} + (α−1)t)^{−1/(α−1)}, solving ∂u/∂t = −u^α, u_0 = λ.
/// E[exp(−λ Z_t)] = exp(−z0 u_t(λ)) for the α-stable CSBP.
pub fn csbp_laplace_u(t: f64, lam: f64, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(t >= 0.0) || !(lam > 0.0) {
        return domain(format!("need t >= 0 and lambda > 0, got t={t}, lambda={lam}"));
    }
    Ok((lam.powf(1.0 - alpha) + (alpha - 1.0) * t).powf(-1.0 / (alpha - 1.0)))
}

/// Limit constants of the small-time and large-sample theorems.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitConstants {
    pub alpha: f64,
    pub theta: f64,
    /// lim t^{1/(α−1)} N(t).
    pub theorem4_const: f64,
    /// lim n^{α−2} M(n).
    pub m_total_const: f64,
    /// Scale turning t^{−1/α} W(t) into a Fréchet(α) variable.
    pub frechet_scale: f64,
    /// T_m ~ block_time_const · m^{1−α}.
    pub block_time_const: f64,
}

impl LimitConstants {
    /// lim n^{α−2} M_k(n) = lim n^{α−2} N_k(n) = θα(α−1)²Γ(k+α−2)/k!.
    pub fn theorem9_const(&self, k: u64) -> f64 {
        let (a, kf) = (self.alpha, k as f64);
        self.theta * a * (a - 1.0).powi(2) * ln_gamma_ratio(kf + 1.0, a - 3.0).exp()
    }
}

pub fn limit_constants(alpha: f64, theta: f64) -> Result<LimitConstants> {
    check_alpha(alpha)?;
    let ag = alpha * gamma(alpha);
    Ok(LimitConstants {
        alpha,
        theta,
        theorem4_const: ag.powf(1.0 / (alpha - 1.0)),
        m_total_const: theta * alpha * (alpha - 1.0) * gamma(alpha) / (2.0 - alpha),
        frechet_scale: (ag * gamma(2.0 - alpha)).powf(1.0 / alpha),
        block_time_const: ag,
    })
}

/// Inverse-CDF sampler for χ: tabulated tail for small k, exact inversion
/// of the Γ-ratio tail beyond the table.
#[derive(Debug, Clone)]
pub struct ChiSampler {
    alpha: f64,
    // tails[k - 1] = P(χ > k), k = 1..=len
    tails: Vec<f64>,
    ln_gamma_2ma: f64,
}

impl ChiSampler {
    pub const DEFAULT_TABLE: usize = 4096;

    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_table(alpha, Self::DEFAULT_TABLE)
    }

    pub fn with_table(alpha: f64, k_tab: usize) -> Result<Self> {
        check_alpha(alpha)?;
        let k_tab = k_tab.max(2);
        let mut tails = Vec::with_capacity(k_tab);
        let mut t = 1.0;
        for k in 1..=k_tab {
            if k > 1 {
                // P(χ > k) = P(χ > k−1) (k−α)/k
                t *= (k as f64 - alpha) / k as f64;
            }
            tails.push(t);
        }
        Ok(Self {
            alpha,
            tails,
            ln_gamma_2ma: ln_gamma(2.0 - alpha),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn tail_exact(&self, k: f64) -> f64 {
        (ln_gamma_ratio(k + 1.0, -self.alpha) - self.ln_gamma_2ma).exp()
    }

    /// Smallest k with P(χ > k) <= u.
    pub fn quantile(&self, u: f64) -> u64 {
        let last = *self.tails.last().expect("nonempty");
        if u >= last {
            // tails is decreasing; first index with tail <= u
            let idx = self.tails.partition_point(|&t| t > u);
            return idx as u64 + 1;
        }
        if u <= 0.0 {
            return u64::MAX;
        }
        let a = self.alpha;
        let guess = (u * self.ln_gamma_2ma.exp()).powf(-1.0 / a) - 0.5 * (1.0 - a);
        if guess >= FINE_LIMIT {
            // unit steps no longer change k, and the asymptotic guess is exact to f64 precision
            return guess as u64;
        }
        let mut k = guess.floor().max(self.tails.len() as f64 + 1.0);
        let mut t = self.tail_exact(k);
        if t > u {
            while t > u {
                t *= (k + 1.0 - a) / (k + 1.0);
                k += 1.0;
            }
        } else {
            loop {
                if k <= self.tails.len() as f64 + 1.0 {
                    break;
                }
                let prev = t * k / (k - a);
                if prev > u {
                    break;
                }
                t = prev;
                k -= 1.0;
            }
        }
        k as u64
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        // u = 0 would ask for an infinite family
        self.quantile(u.max(f64::MIN_POSITIVE))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        ((a - b) / b).abs() <= rel
    }

    // Independent route: quadrature of the normalized Beta(2−α, α) density.
    fn beta_rate_by_quadrature(b: usize, k: usize, alpha: f64) -> f64 {
        let norm = (ln_gamma(2.0 - alpha) + ln_gamma(alpha)).exp();
        let f = |x: f64, y: f64| {
            x.powi(k as i32 - 2) * y.powi((b - k) as i32) * x.powf(1.0 - alpha) * y.powf(alpha - 1.0) / norm
        };
        quadrature::integrate_unit_singular(f, 1e-12).unwrap().value
    }

    #[test]
    fn collision_rate_examples() {
        for m in [
            LambdaMeasure::KingmanAtom,
            LambdaMeasure::beta(1.5).unwrap(),
            LambdaMeasure::UniformBS,
        ] {
            assert!(close(collision_rate(2, 2, &m).unwrap(), 1.0, 1e-12), "{m:?}");
        }
        let beta = LambdaMeasure::beta(1.5).unwrap();
        let q32 = beta_rate_by_quadrature(3, 2, 1.5);
        let q33 = beta_rate_by_quadrature(3, 3, 1.5);
        assert!(close(q32, 0.75, 1e-9) && close(q33, 0.25, 1e-9));
        assert!(close(collision_rate(3, 2, &beta).unwrap(), q32, 1e-10));
        assert!(close(collision_rate(3, 3, &beta).unwrap(), q33, 1e-10));
    }

    #[test]
    fn collision_rate_domain_errors() {
        let m = LambdaMeasure::KingmanAtom;
        assert!(matches!(collision_rate(3, 1, &m), Err(Error::Domain(_))));
        assert!(matches!(collision_rate(3, 4, &m), Err(Error::Domain(_))));
        assert!(LambdaMeasure::beta(2.0).is_err());
        assert!(LambdaMeasure::beta(1.0).is_err());
    }

    #[test]
    fn beta_closed_form_matches_quadrature_grid() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let m = LambdaMeasure::beta(alpha).unwrap();
            for &(b, k) in &[(2, 2), (5, 2), (5, 5), (17, 3), (40, 20), (120, 7)] {
                let closed = collision_rate(b, k, &m).unwrap();
                let quad = beta_rate_by_quadrature(b, k, alpha);
                assert!(close(closed, quad, 1e-8), "alpha={alpha} b={b} k={k}: {closed} vs {quad}");
            }
        }
    }

    #[test]
    fn general_density_agrees_with_beta() {
        let alpha = 1.5;
        let norm = (ln_gamma(2.0 - alpha) + ln_gamma(alpha)).exp();
        let g = LambdaMeasure::general(
            move |x| x.powf(1.0 - alpha) * (1.0 - x).powf(alpha - 1.0) / norm,
            200,
        )
        .unwrap();
        assert!(close(g.total_mass().unwrap(), 1.0, 1e-8));
        let table = build_rate_table(12, &g).unwrap();
        let beta = LambdaMeasure::beta(alpha).unwrap();
        for b in 2..=12 {
            for k in 2..=b {
                assert!(close(table.rate(b, k), collision_rate(b, k, &beta).unwrap(), 1e-8));
            }
        }
    }

    #[test]
    fn build_rate_table_examples() {
        let t = build_rate_table(2, &LambdaMeasure::KingmanAtom).unwrap();
        assert_eq!(t.rate(2, 2), 1.0);
        assert_eq!(t.total_rate(2), 1.0);
        let t = build_rate_table(3, &LambdaMeasure::beta(1.5).unwrap()).unwrap();
        assert!(close(t.total_rate(3), 3.0 * 0.75 + 0.25, 1e-12));
        let t = build_rate_table(3, &LambdaMeasure::KingmanAtom).unwrap();
        assert!(close(t.total_rate(3), 3.0, 1e-12));
        assert!(build_rate_table(1, &LambdaMeasure::KingmanAtom).is_err());
    }

    #[test]
    fn consistency_up_to_200() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let t = build_rate_table(201, &LambdaMeasure::beta(alpha).unwrap()).unwrap();
            let (_, _, rel) = t.max_consistency_error();
            assert!(rel < 1e-10, "alpha={alpha}: {rel}");
        }
        let t = build_rate_table(150, &LambdaMeasure::UniformBS).unwrap();
        assert!(t.max_consistency_error().2 < 1e-10);
    }

    #[test]
    fn merger_law_matches_table() {
        for m in [LambdaMeasure::beta(1.3).unwrap(), LambdaMeasure::UniformBS, LambdaMeasure::KingmanAtom] {
            let table = build_rate_table(60, &m).unwrap();
            let law = MergerLaw::for_measure(&m, 60).unwrap();
            for b in [2, 3, 10, 60] {
                assert!(close(law.total_rate(b), table.total_rate(b), 1e-10), "{m:?} b={b}");
                for k in 2..=b {
                    let (p, q) = (law.size_prob(b, k), table.merger_size_prob(b, k));
                    assert!((p - q).abs() <= 1e-10 * q.max(1e-300) || (p == 0.0 && q == 0.0), "{m:?} b={b} k={k}");
                }
            }
        }
    }

    #[test]
    fn chi_pmf_examples() {
        assert!(close(chi_pmf(2, 1.5).unwrap(), 0.75, 1e-12));
        assert!(close(chi_pmf(3, 1.5).unwrap(), 0.125, 1e-12));
        assert_eq!(chi_pmf(1, 1.3).unwrap(), 0.0);
        assert_eq!(chi_pmf(0, 1.3).unwrap(), 0.0);
        assert!(chi_pmf(2, 2.5).is_err());
    }

    #[test]
    fn chi_pgf_examples() {
        assert!(close(chi_pgf(1.0, 1.5).unwrap(), 1.0, 1e-15));
        assert_eq!(chi_pgf(0.0, 1.5).unwrap(), 0.0);
        assert!(chi_pgf(1.5, 1.5).is_err());
    }

    // Series Σ r^k P(χ=k), truncated where r^K drops below 1e-14.
    fn pgf_series(r: f64, alpha: f64) -> f64 {
        let mut s = 0.0;
        let mut p = chi_pmf(2, alpha).unwrap();
        let mut rk = r * r;
        let mut k = 2u64;
        while rk > 1e-18 {
            s += rk * p;
            p *= (k as f64 - alpha) / (k as f64 + 1.0);
            rk *= r;
            k += 1;
        }
        s
    }

    #[test]
    fn chi_pgf_matches_series() {
        for &alpha in &[1.2, 1.5, 1.8] {
            for i in 1..=9 {
                let r = i as f64 / 10.0;
                let d = (pgf_series(r, alpha) - chi_pgf(r, alpha).unwrap()).abs();
                assert!(d < 1e-10, "alpha={alpha} r={r}: {d}");
            }
        }
        assert!((pgf_series(0.5, 1.5) - chi_pgf(0.5, 1.5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn chi_sums_to_one_and_has_expected_mean() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let kmax = 2000u64;
            let (mut mass, mut mean) = (0.0, 0.0);
            for k in 2..=kmax {
                let p = chi_pmf(k, alpha).unwrap();
                mass += p;
                mean += k as f64 * p;
            }
            let kf = kmax as f64;
            // telescoping tails: Σ_{k>K} P(χ=k) = Γ(K+1−α)/(Γ(2−α)K!),
            // Σ_{k>K} k P(χ=k) = αΓ(K+1−α)/((α−1)Γ(K)Γ(2−α))
            let tail_mass = (ln_gamma(kf + 1.0 - alpha) - ln_gamma(2.0 - alpha) - ln_gamma(kf + 1.0)).exp();
            let tail_mean =
                alpha / (alpha - 1.0) * (ln_gamma(kf + 1.0 - alpha) - ln_gamma(kf) - ln_gamma(2.0 - alpha)).exp();
            assert!(mass < 1.0 && mass > 1.0 - 2.0 * kf.powf(-alpha));
            assert!((mass + tail_mass - 1.0).abs() < 1e-10);
            assert!((mean + tail_mean - (1.0 + 1.0 / (alpha - 1.0))).abs() < 1e-8);
            assert!(close(chi_tail(kmax, alpha).unwrap(), tail_mass, 1e-10));
        }
    }

    #[test]
    fn xi_tau_examples() {
        assert!(close(xi_tau_pmf(1, 1.5).unwrap(), 0.5, 1e-12));
        assert!(close(xi_tau_pmf(2, 1.5).unwrap(), 0.125, 1e-12));
        assert!(close(xi_tau_pmf(3, 1.5).unwrap(), 0.0625, 1e-12));
        let r = xi_tau_pmf_recursive(2, 1.5).unwrap();
        assert!(close(r[0], 0.5, 1e-14) && close(r[1], 0.125, 1e-14));
        let r = xi_tau_pmf_recursive(3, 1.5).unwrap();
        assert!(close(r[2], 0.25 * (0.5 * 0.125 + 2.0 * 0.125 * 0.75), 1e-14));
        assert!(close(r[2], 0.0625, 1e-14));
    }

    #[test]
    fn xi_tau_recursion_matches_closed_form() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let r = xi_tau_pmf_recursive(200, alpha).unwrap();
            for (i, &p) in r.iter().enumerate() {
                let q = xi_tau_pmf(i as u64 + 1, alpha).unwrap();
                assert!((p - q).abs() < 1e-10, "alpha={alpha} k={}", i + 1);
            }
            // Σ P(ξ_τ=k) = 1; tail Σ_{k>K} ~ K^{α−2}
            let s: f64 = (1..=100_000u64).map(|k| xi_tau_pmf(k, alpha).unwrap()).sum();
            assert!(s < 1.0 && 1.0 - s < 2.0 * 100_000f64.powf(alpha - 2.0));
        }
    }

    #[test]
    fn laplace_u_examples_and_ode() {
        assert!(close(csbp_laplace_u(0.0, 2.5, 1.7).unwrap(), 2.5, 1e-14));
        let u = csbp_laplace_u(1.0, 1.0, 1.5).unwrap();
        assert!(close(u, 1.0 / 2.25, 1e-14));
        // classical RK4 on du/dt = -u^α
        let (mut v, h) = (1.0f64, 1e-4);
        for _ in 0..10_000 {
            let f = |x: f64| -x.powf(1.5);
            let k1 = f(v);
            let k2 = f(v + 0.5 * h * k1);
            let k3 = f(v + 0.5 * h * k2);
            let k4 = f(v + h * k3);
            v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        assert!(close(u, v, 1e-10));
        // large-t asymptote ((α−1)t)^{−1/(α−1)}
        let t = 1e6;
        assert!(close(csbp_laplace_u(t, 1.0, 1.5).unwrap(), (0.5 * t).powi(-2), 1e-5));
    }

    #[test]
    fn limit_constant_examples() {
        let c = limit_constants(1.5, 1.0).unwrap();
        let g15 = std::f64::consts::PI.sqrt() / 2.0;
        assert!(close(c.theorem4_const, (1.5 * g15).powi(2), 1e-12));
        assert!((c.theorem4_const - 1.767146).abs() < 1e-6);
        assert!((c.theorem9_const(1) - 0.664670).abs() < 1e-6);
        assert!((c.m_total_const - 1.329340).abs() < 1e-6);
        for &alpha in &[1.2, 1.5, 1.8] {
            let c = limit_constants(alpha, 0.7).unwrap();
            for k in 1..30 {
                let want = c.m_total_const * xi_tau_pmf(k, alpha).unwrap();
                assert!(close(c.theorem9_const(k), want, 1e-10));
            }
        }
        let mc = ModelConstants::new(1.5, 1.0).unwrap();
        assert_eq!(mc.m - 2.0, mc.c);
        assert!(close(mc.k_const, 4.0, 1e-14));
    }

    #[test]
    fn chi_sampler_quantiles_are_exact() {
        for &alpha in &[1.2, 1.5, 1.8] {
            let s = ChiSampler::with_table(alpha, 64).unwrap();
            for &u in &[0.999, 0.5, 0.1, 1e-3, 1e-5, 1e-9, 1e-14] {
                let k = s.quantile(u);
                assert!(chi_tail(k, alpha).unwrap() <= u * (1.0 + 1e-12), "alpha={alpha} u={u}");
                assert!(chi_tail(k - 1, alpha).unwrap() > u * (1.0 - 1e-12), "alpha={alpha} u={u} k={k}");
            }
        }
    }

    #[test]
    fn chi_sampler_frequencies() {
        let s = ChiSampler::new(1.5).unwrap();
        let mut rng = RngStream::new(11, 0).rng();
        let n = 200_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let k = s.sample(&mut rng);
            assert!(k >= 2);
            if k <= 4 {
                counts[k as usize] += 1;
            }
        }
        for k in 2..=4u64 {
            let p = chi_pmf(k, 1.5).unwrap();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let phat = counts[k as usize] as f64 / n as f64;
            assert!((phat - p).abs() < 4.0 * se, "k={k}: {phat} vs {p}");
        }
    }
}
