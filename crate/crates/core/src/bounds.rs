//! Upper-bound constants, the minimax lower bound via a Gilbert–Varshamov
//! packing, and Monte Carlo checks of the concentration results behind them.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ParamVector, RateModel, RateSummary};
use crate::rng;
use crate::scalar::Scalar;
use crate::simulate::sample_counts;

/// Inputs of the error-bound formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundInputs<T: Scalar> {
    pub lambda_min: T,
    pub lambda_max: T,
    pub lambda_harmonic: T,
    pub a_max: T,
    pub gamma_k: T,
    pub k: usize,
    pub n: usize,
    pub zeta: T,
}

impl<T: Scalar> BoundInputs<T> {
    pub fn from_summary(summary: &RateSummary<T>, gamma_k: T, k: usize, n: usize, zeta: T) -> Self {
        Self {
            lambda_min: summary.lambda_min,
            lambda_max: summary.lambda_max,
            lambda_harmonic: summary.lambda_harmonic,
            a_max: summary.a_max,
            gamma_k,
            k,
            n,
            zeta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{name} must be positive and finite, got {v}")))
            }
        };
        pos("lambda_min", self.lambda_min)?;
        pos("lambda_max", self.lambda_max)?;
        pos("lambda_harmonic", self.lambda_harmonic)?;
        pos("a_max", self.a_max)?;
        pos("gamma_k", self.gamma_k)?;
        pos("zeta", self.zeta)?;
        if self.zeta >= T::one() {
            return Err(Error::Domain(format!("zeta must be below 1, got {}", self.zeta)));
        }
        if self.k == 0 || self.n == 0 {
            return Err(Error::Domain("k and n must be at least 1".into()));
        }
        if self.lambda_max < self.lambda_min {
            return Err(Error::Domain(format!(
                "lambda_max {} is below lambda_min {}",
                self.lambda_max, self.lambda_min
            )));
        }
        Ok(())
    }

    /// Smallest confidence parameter for which the concentration step holds.
    pub fn zeta_floor(&self) -> T {
        zeta_floor(self.n, self.lambda_min, self.lambda_harmonic)
    }

    /// Message when `zeta` sits below [`zeta_floor`](Self::zeta_floor).
    pub fn zeta_warning(&self) -> Option<String> {
        let floor = self.zeta_floor();
        (self.zeta < floor).then(|| {
            format!(
                "zeta {} is below its floor {} for n = {}; the bound is outside its guaranteed regime",
                self.zeta, floor, self.n
            )
        })
    }

    fn root_term(&self) -> T {
        let n = T::from_usize(self.n).expect("n");
        ((T::lit(2.0) / self.zeta).ln() / (n * self.lambda_harmonic)).sqrt()
    }
}

/// `2 exp(−n λ_min min(1, λ_min) / (4 λ̄_h))`
pub fn zeta_floor<T: Scalar>(n: usize, lambda_min: T, lambda_harmonic: T) -> T {
    let n = T::from_usize(n).expect("n");
    T::lit(2.0) * (-(n * lambda_min * lambda_min.min(T::one())) / (T::lit(4.0) * lambda_harmonic)).exp()
}

/// Restricted strong-convexity constants and the resulting error radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ScConstants<T: Scalar> {
    pub kappa: T,
    pub tau: T,
    pub nu_n: T,
    pub delta: T,
}

pub fn sc_constants<T: Scalar>(inp: &BoundInputs<T>) -> Result<ScConstants<T>> {
    inp.validate()?;
    let root = inp.root_term();
    let log_ratio = (inp.lambda_max / inp.lambda_min).ln();
    let kappa = inp.gamma_k / (T::lit(9.0) * inp.lambda_max);
    let tau = inp.a_max * inp.a_max * (T::lit(4.0) + T::lit(2.0) * log_ratio) * root;
    let nu_n = T::lit(2.0) * inp.a_max * root;
    let sqrt_k = T::from_usize(inp.k).expect("k").sqrt();
    let delta = T::lit(3.0) * (tau + nu_n) * sqrt_k / kappa;
    Ok(ScConstants { kappa, tau, nu_n, delta })
}

/// `54 λ_max a²_max (3 + log(λ_max/λ_min)) / γ_k · √(k log(2/ζ) / (λ̄_h n))`
pub fn theorem1_bound<T: Scalar>(inp: &BoundInputs<T>) -> Result<T> {
    inp.validate()?;
    let sqrt_k = T::from_usize(inp.k).expect("k").sqrt();
    let log_ratio = (inp.lambda_max / inp.lambda_min).ln();
    Ok(T::lit(54.0) * inp.lambda_max * inp.a_max * inp.a_max * (T::lit(3.0) + log_ratio) / inp.gamma_k
        * sqrt_k
        * inp.root_term())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kappa: f64,
    pub tau: f64,
    pub nu_n: f64,
    pub delta: f64,
    pub theorem1_value: f64,
    pub fano_value: Option<f64>,
    pub zeta_floor: f64,
    pub warnings: Vec<String>,
}

pub fn bound_report(inp: &BoundInputs<f64>, fano_value: Option<f64>) -> Result<BoundReport> {
    let sc = sc_constants(inp)?;
    Ok(BoundReport {
        kappa: sc.kappa,
        tau: sc.tau,
        nu_n: sc.nu_n,
        delta: sc.delta,
        theorem1_value: theorem1_bound(inp)?,
        fano_value,
        zeta_floor: inp.zeta_floor(),
        warnings: inp.zeta_warning().into_iter().collect(),
    })
}

/// Binary code with a guaranteed minimum Hamming distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub dim: usize,
    pub d_min: usize,
    /// Each word holds `dim` entries in `{0, 1}`.
    pub words: Vec<Vec<u8>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Smallest pairwise Hamming distance, `None` for fewer than two words.
    pub fn min_distance(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for i in 0..self.words.len() {
            for j in i + 1..self.words.len() {
                let d = hamming(&self.words[i], &self.words[j]);
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }
}

pub fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Word count promised by the Gilbert–Varshamov argument, `⌈exp(dim/8)⌉`.
pub fn gv_target(dim: usize) -> f64 {
    (dim as f64 / 8.0).exp().ceil()
}

const GV_MAX_WORDS: f64 = 1e6;
const GV_EXHAUSTIVE_MAX_DIM: usize = 16;

fn packed_distance(a: &[u64], b: &[u64]) -> usize {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones() as usize).sum()
}

fn pack(bits: impl Iterator<Item = bool>, blocks: usize) -> Vec<u64> {
    let mut out = vec![0u64; blocks];
    for (i, b) in bits.enumerate() {
        if b {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

fn unpack(word: &[u64], dim: usize) -> Vec<u8> {
    (0..dim).map(|i| ((word[i / 64] >> (i % 64)) & 1) as u8).collect()
}

/// Greedy codebook of `⌈exp(dim/8)⌉` words at pairwise distance `≥ d_min`.
///
/// Random candidates are kept when far enough from every kept word. For
/// `dim ≤ 16` an exhaustive lexicographic greedy pass takes over if the
/// random phase runs out of budget.
pub fn gv_codebook(dim: usize, d_min: usize, seed: u64) -> Result<Codebook> {
    if dim == 0 || d_min == 0 || d_min > dim {
        return Err(Error::Config(format!("need 1 <= d_min <= dim, got d_min = {d_min}, dim = {dim}")));
    }
    let target = gv_target(dim);
    if target > GV_MAX_WORDS {
        return Err(Error::Construction(format!(
            "dimension {dim} asks for {target} codewords, more than {GV_MAX_WORDS}"
        )));
    }
    let target = target as usize;
    let blocks = dim.div_ceil(64);
    let mut kept: Vec<Vec<u64>> = Vec::with_capacity(target);
    let budget = 200 * target + 10_000;
    let mut r = rng::stream(seed, 0);
    for _ in 0..budget {
        if kept.len() >= target {
            break;
        }
        let cand = pack((0..dim).map(|_| r.random::<bool>()), blocks);
        if kept.iter().all(|w| packed_distance(w, &cand) >= d_min) {
            kept.push(cand);
        }
    }
    if kept.len() < target && dim <= GV_EXHAUSTIVE_MAX_DIM {
        kept.clear();
        for v in 0u64..(1u64 << dim) {
            let cand = vec![v];
            if kept.iter().all(|w| packed_distance(w, &cand) >= d_min) {
                kept.push(cand);
                if kept.len() >= target {
                    break;
                }
            }
        }
    }
    if kept.len() < target {
        return Err(Error::Construction(format!(
            "found {} of {target} codewords at distance {d_min}; retry with another seed",
            kept.len()
        )));
    }
    for i in 0..kept.len() {
        for j in i + 1..kept.len() {
            if packed_distance(&kept[i], &kept[j]) < d_min {
                return Err(Error::Construction(format!("codewords {i} and {j} are too close")));
            }
        }
    }
    Ok(Codebook {
        dim,
        d_min,
        words: kept.iter().map(|w| unpack(w, dim)).collect(),
    })
}

/// Common coordinate step `(1/c)·√(a_min s / (n η))` of the packing.
pub fn packing_step(s: f64, a_min: f64, eta: f64, n: usize, c: f64) -> f64 {
    (a_min * s / (n as f64 * eta)).sqrt() / c
}

/// Smallest `n` for which the packing keeps its heavy coordinate above `s/2`.
pub fn packing_min_n(s: f64, k: usize, a_min: f64, eta: f64, c: f64) -> f64 {
    let km1 = (k - 1) as f64;
    4.0 * a_min * km1 * km1 / (c * c * s * eta)
}

/// One length-`k` vector per codeword: the last coordinate carries
/// `s − step·(k−1)`, coordinate `t < k−1` carries `step·τ(t)`.
pub fn packing_set(
    cb: &Codebook,
    s: f64,
    k: usize,
    a_min: f64,
    eta: f64,
    n: usize,
    c: f64,
) -> Result<Vec<ParamVector<f64>>> {
    if k < 2 || cb.dim != k - 1 {
        return Err(Error::Config(format!("codebook dimension {} must equal k - 1 = {}", cb.dim, k.max(1) - 1)));
    }
    if !(s > 0.0 && a_min > 0.0 && eta > 0.0 && c > 0.0 && n > 0) {
        return Err(Error::Domain("packing needs s, a_min, eta, c, n positive".into()));
    }
    let step = packing_step(s, a_min, eta, n, c);
    let heavy = s - step * (k - 1) as f64;
    if s < 2.0 * step * (k - 1) as f64 {
        return Err(Error::Infeasible(format!(
            "s = {s} < (2/c)·√(a_min s/(n η))·(k−1) = {}; need n >= {:.1}",
            2.0 * step * (k - 1) as f64,
            packing_min_n(s, k, a_min, eta, c)
        )));
    }
    cb.words
        .iter()
        .map(|word| {
            let mut w: Vec<f64> = word.iter().map(|&b| step * b as f64).collect();
            w.push(heavy);
            ParamVector::new(w)
        })
        .collect()
}

/// `KL(Pois(λ1) ‖ Pois(λ2)) = λ1 log(λ1/λ2) − λ1 + λ2`
pub fn poisson_kl(lambda1: f64, lambda2: f64) -> Result<f64> {
    if !(lambda1 > 0.0 && lambda2 > 0.0) || !lambda1.is_finite() || !lambda2.is_finite() {
        return Err(Error::Domain(format!("rates must be positive, got ({lambda1}, {lambda2})")));
    }
    let r = (lambda2 - lambda1) / lambda1;
    // λ1·(r − log(1 + r)) avoids cancellation when the rates are close
    Ok((lambda1 * (r - r.ln_1p())).max(0.0))
}

/// Tunable constants of the minimax lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FanoConfig {
    /// Packing scale `c`, at least 34.
    pub c: f64,
    /// Sample-size constant in `n ≥ C a_min (k−1)² / (s η)`.
    pub sample_constant: f64,
    /// Leading constant of the closed form; `0.3/(4c)` when absent.
    pub bound_constant: Option<f64>,
}

impl Default for FanoConfig {
    fn default() -> Self {
        Self { c: 34.0, sample_constant: 1.0, bound_constant: None }
    }
}

impl FanoConfig {
    pub fn bound_constant(&self) -> f64 {
        self.bound_constant.unwrap_or(0.3 / (4.0 * self.c))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoDiagnostics {
    pub eta: f64,
    pub a_min: f64,
    pub codewords: usize,
    pub d_min: usize,
    /// Exact `(1/M²) Σ_t Σ_{i,j} KL` over rows and ordered codeword pairs.
    pub mutual_info: f64,
    pub mutual_info_cap: f64,
    pub mutual_info_ok: bool,
    pub fano_ratio: f64,
    pub fano_ratio_ok: bool,
    pub min_separation: f64,
    /// `½ · min separation · (1 − fano_ratio)` with the exact quantities.
    pub empirical_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FanoReport {
    pub bound: f64,
    pub diagnostics: FanoDiagnostics,
}

/// Closed-form minimax lower bound `C′ √((k−1) a_min s / (n η))`.
pub fn fano_closed_form(a_min: f64, s: f64, k: usize, n: usize, eta: f64, bound_constant: f64) -> f64 {
    bound_constant * ((k - 1) as f64 * a_min * s / (n as f64 * eta)).sqrt()
}

/// Minimax lower bound for the given design. `η` is the top eigenvalue of
/// `AᵀA/n` and `a_min` the smallest entry of `A`; the packing occupies the
/// first `k` columns.
pub fn fano_lower_bound(model: &RateModel<f64>, s: f64, k: usize, cfg: &FanoConfig, seed: u64) -> Result<FanoReport> {
    let (n, p) = (model.n(), model.p());
    if k < 9 {
        return Err(Error::Infeasible(format!("k = {k} violates k >= 9")));
    }
    if k > p {
        return Err(Error::Infeasible(format!("k = {k} exceeds p = {p}")));
    }
    if cfg.c < 34.0 {
        return Err(Error::Infeasible(format!("c = {} violates c >= 34", cfg.c)));
    }
    if !(s > 0.0) {
        return Err(Error::Domain(format!("amplitude {s} must be positive")));
    }
    let a = model.matrix();
    let a_min = a.min_entry().unwrap_or(0.0);
    if !(a_min > 0.0) {
        return Err(Error::Infeasible(format!("a_min = {a_min} must be positive")));
    }
    let eta = a.top_gram_eigenvalue();
    let km1 = (k - 1) as f64;
    let n_req = cfg.sample_constant * a_min * km1 * km1 / (s * eta);
    if (n as f64) < n_req {
        return Err(Error::Infeasible(format!("n = {n} violates n >= C a_min (k-1)^2/(s eta) = {n_req:.3}")));
    }

    let d_min = (k - 1).div_ceil(4);
    let cb = gv_codebook(k - 1, d_min, seed)?;
    let pack = packing_set(&cb, s, k, a_min, eta, n, cfg.c)?;
    let m = pack.len();

    let rates: Vec<Vec<f64>> = pack
        .iter()
        .map(|w| {
            let mut full = vec![0.0; p];
            full[..k].copy_from_slice(w.as_slice());
            model.rates(&full)
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    for ri in &rates {
        for rj in &rates {
            for (&li, &lj) in ri.iter().zip(rj) {
                total += poisson_kl(li, lj)?;
            }
        }
    }
    let mutual_info = total / (m * m) as f64;
    let cap = km1 / (cfg.c * cfg.c);
    let fano_ratio = (mutual_info + std::f64::consts::LN_2) / (m as f64).ln();

    let mut min_sep = f64::INFINITY;
    for i in 0..m {
        for j in i + 1..m {
            let d: f64 = pack[i]
                .as_slice()
                .iter()
                .zip(pack[j].as_slice())
                .map(|(x, y)| (x - y) * (x - y))
                .sum();
            min_sep = min_sep.min(d.sqrt());
        }
    }

    Ok(FanoReport {
        bound: fano_closed_form(a_min, s, k, n, eta, cfg.bound_constant()),
        diagnostics: FanoDiagnostics {
            eta,
            a_min,
            codewords: m,
            d_min,
            mutual_info,
            mutual_info_cap: cap,
            mutual_info_ok: mutual_info <= cap,
            fano_ratio,
            fano_ratio_ok: fano_ratio <= 0.7,
            min_separation: min_sep,
            empirical_bound: 0.5 * min_sep * (1.0 - fano_ratio),
        },
    })
}

/// `2 √(log(2/ζ) / (n λ̄_h))`
pub fn bernstein_radius(zeta: f64, n: usize, lambda_harmonic: f64) -> f64 {
    2.0 * ((2.0 / zeta).ln() / (n as f64 * lambda_harmonic)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction of trials with `|(1/n) Σ (y_i/λ_i − 1)| ≤ radius`.
    pub frequency: f64,
    /// Fraction of trials with `(1/n) Σ |y_i/λ_i − 1| ≤ radius`. This
    /// per-term form does not shrink with `n`, so it is reported but not
    /// covered by the radius.
    pub frequency_per_term: f64,
    pub radius: f64,
    pub lambda_harmonic: f64,
    pub trials: usize,
    pub warnings: Vec<String>,
}

/// Fraction of simulated data sets whose mean relative deviation
/// `|(1/n) Σ (y_i/λ_i − 1)|` falls within [`bernstein_radius`]. The radius is
/// Bernstein's bound for this centered sum, whose variance is `1/(n λ̄_h)`.
pub fn bernstein_coverage(
    model: &RateModel<f64>,
    w_star: &ParamVector<f64>,
    zeta: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::Domain(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    let summary = model.rate_summary(w_star)?;
    let rates = model.rates(w_star.as_slice())?;
    let n = rates.len();
    let radius = bernstein_radius(zeta, n, summary.lambda_harmonic);
    let floor = zeta_floor(n, summary.lambda_min, summary.lambda_harmonic);
    let mut warnings = Vec::new();
    if zeta < floor {
        warnings.push(format!("zeta {zeta} is below its floor {floor}"));
    }
    let hits = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<(usize, usize)> {
            let y = sample_counts(&rates, rng::derive_seed(seed, &[t as u64]))?;
            let (mut centered, mut per_term) = (0.0, 0.0);
            for (&yi, &l) in y.iter().zip(&rates) {
                let d = yi as f64 / l - 1.0;
                centered += d;
                per_term += d.abs();
            }
            let nf = n as f64;
            Ok((usize::from((centered / nf).abs() <= radius), usize::from(per_term / nf <= radius)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold((0, 0), |acc, h| (acc.0 + h.0, acc.1 + h.1));
    Ok(CoverageReport {
        frequency: hits.0 as f64 / trials as f64,
        frequency_per_term: hits.1 as f64 / trials as f64,
        radius,
        lambda_harmonic: summary.lambda_harmonic,
        trials,
        warnings,
    })
}

/// `(1/n) Σ [−λ_i(w⋆) log(1 + a_iᵀΔ/λ_i(w⋆)) + a_iᵀΔ]`; `None` if some
/// perturbed rate is not positive.
pub fn curvature_gap(model: &RateModel<f64>, star_rates: &[f64], delta: &[f64]) -> Option<f64> {
    let ad = model.matrix().mul_vec(delta).ok()?;
    let mut acc = 0.0;
    for (&l, &x) in star_rates.iter().zip(&ad) {
        let r = x / l;
        if !(r > -1.0) {
            return None;
        }
        acc += x - l * r.ln_1p();
    }
    Some(acc / star_rates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongConvexityReport {
    /// `min over samples of δQ₁ − γ_k ‖Δ‖² / (9 λ_max)`; negative falsifies `γ_k`.
    pub min_margin: f64,
    /// Smallest `δQ₁` seen.
    pub min_gap: f64,
    pub samples_used: usize,
    pub skipped: usize,
}

/// Random feasible `w` with `‖w‖₁ ≤ ‖w⋆‖₁`, pulled toward `w⋆` by a random
/// factor so that both small and large perturbations are probed.
fn random_feasible<R: Rng>(w_star: &[f64], s: f64, r: &mut R) -> Vec<f64> {
    let p = w_star.len();
    let m = r.random_range(1..=p);
    let mut far = vec![0.0; p];
    for j in rand::seq::index::sample(r, p, m) {
        far[j] = -(1.0 - r.random::<f64>()).ln();
    }
    let total: f64 = far.iter().sum();
    let radius = s * r.random::<f64>();
    let t = r.random::<f64>().powi(3);
    w_star
        .iter()
        .zip(&far)
        .map(|(&ws, &f)| (1.0 - t) * ws + t * f * radius / total)
        .collect()
}

pub fn strong_convexity_diagnostic(
    model: &RateModel<f64>,
    w_star: &ParamVector<f64>,
    gamma_k: f64,
    samples: usize,
    seed: u64,
) -> Result<StrongConvexityReport> {
    if samples == 0 {
        return Err(Error::Config("samples must be at least 1".into()));
    }
    let summary = model.rate_summary(w_star)?;
    let star_rates = model.rates(w_star.as_slice())?;
    let s = w_star.l1();
    let scale = gamma_k / (9.0 * summary.lambda_max);
    let outcomes: Vec<Option<(f64, f64)>> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let w = random_feasible(w_star.as_slice(), s, &mut r);
            let delta: Vec<f64> = w.iter().zip(w_star.as_slice()).map(|(a, b)| a - b).collect();
            let gap = curvature_gap(model, &star_rates, &delta)?;
            let sq: f64 = delta.iter().map(|d| d * d).sum();
            Some((gap - scale * sq, gap))
        })
        .collect();
    let mut report = StrongConvexityReport {
        min_margin: f64::INFINITY,
        min_gap: f64::INFINITY,
        samples_used: 0,
        skipped: 0,
    };
    for o in outcomes {
        match o {
            Some((margin, gap)) => {
                report.min_margin = report.min_margin.min(margin);
                report.min_gap = report.min_gap.min(gap);
                report.samples_used += 1;
            }
            None => report.skipped += 1,
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> BoundInputs<f64> {
        BoundInputs {
            lambda_min: 1.0,
            lambda_max: 10.0,
            lambda_harmonic: 5.0,
            a_max: 1.0,
            gamma_k: 0.5,
            k: 4,
            n: 100,
            zeta: 0.1,
        }
    }

    #[test]
    fn constants_example() {
        let c = sc_constants(&example()).unwrap();
        assert!((c.kappa - 0.5 / 90.0).abs() < 1e-15);
        // 30-digit reference values
        assert!((c.nu_n - 0.154809102408197974).abs() < 1e-14);
        assert!((c.tau - 0.666079336281301224).abs() < 1e-14);
        assert!((c.delta - 886.559513784659135).abs() < 1e-9);
        let t1 = theorem1_bound(&example()).unwrap();
        assert!((t1 - c.delta).abs() <= 1e-9 * t1);
    }

    #[test]
    fn constants_scale_with_n() {
        let a = sc_constants(&example()).unwrap();
        let b = sc_constants(&BoundInputs { n: 200, ..example() }).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(a.kappa, b.kappa);
        assert!((b.tau / a.tau - r).abs() < 1e-14);
        assert!((b.nu_n / a.nu_n - r).abs() < 1e-14);
        assert!((b.delta / a.delta - r).abs() < 1e-14);
    }

    #[test]
    fn equal_extremes_drop_log_term() {
        let inp = BoundInputs { lambda_max: 3.0, lambda_min: 3.0, ..example() };
        let c = sc_constants(&inp).unwrap();
        let expect = 4.0 * ((20.0f64).ln() / 500.0).sqrt();
        assert!((c.tau - expect).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs() {
        assert!(sc_constants(&BoundInputs { zeta: 1.0, ..example() }).is_err());
        assert!(theorem1_bound(&BoundInputs { gamma_k: 0.0, ..example() }).is_err());
        assert!(example().zeta_warning().is_none());
        let tight = BoundInputs { n: 2, lambda_min: 0.01, ..example() };
        assert!(tight.zeta_warning().is_some());
    }

    #[test]
    fn tiny_codebooks() {
        let cb = gv_codebook(1, 1, 0).unwrap();
        let mut words = cb.words.clone();
        words.sort();
        assert_eq!(words, vec![vec![0], vec![1]]);
        let cb = gv_codebook(8, 2, 5).unwrap();
        assert!(cb.len() >= 3);
        assert!(cb.min_distance().unwrap() >= 2);
        assert!(gv_codebook(4, 5, 0).is_err());
    }

    #[test]
    fn packing_zero_word() {
        let cb = Codebook { dim: 8, d_min: 2, words: vec![vec![0; 8], vec![1, 1, 0, 0, 0, 0, 0, 0]] };
        let pack = packing_set(&cb, 100.0, 9, 0.5, 1.0, 1000, 34.0).unwrap();
        let step = packing_step(100.0, 0.5, 1.0, 1000, 34.0);
        assert_eq!(pack[0].sparsity(), 1);
        assert!((pack[0].as_slice()[8] - (100.0 - 8.0 * step)).abs() < 1e-12);
        assert!(pack.iter().all(|w| w.l1() <= 100.0));
        let d: f64 = pack[0].as_slice().iter().zip(pack[1].as_slice()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((d.sqrt() - step * 2f64.sqrt()).abs() < 1e-12);
        assert!(matches!(packing_set(&cb, 1e-6, 9, 0.5, 1.0, 1, 34.0), Err(Error::Infeasible(_))));
    }

    #[test]
    fn closed_form_example() {
        let b = fano_closed_form(0.5, 100.0, 9, 1000, 1.0, 0.3 / 136.0);
        assert!((b - 0.001395).abs() < 5e-7);
    }

    #[test]
    fn kl_values() {
        assert_eq!(poisson_kl(2.0, 2.0).unwrap(), 0.0);
        assert!((poisson_kl(2.0, 1.0).unwrap() - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-14);
        assert!(poisson_kl(0.0, 1.0).is_err());
    }

    #[test]
    fn radius_doubles_when_harmonic_quartered() {
        let a = bernstein_radius(0.1, 50, 8.0);
        let b = bernstein_radius(0.1, 50, 2.0);
        assert!((b / a - 2.0).abs() < 1e-14);
    }
}
