//! Random sensing designs and restricted-eigenvalue (RE) diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

fn default_sigma() -> f64 {
    0.5
}

/// Entry law of a random design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixKind {
    /// `U[0, 1]`
    Uniform01,
    Beta { alpha: f64, beta: f64 },
    /// `Z ~ N(mu, sigma²)` clamped to `[0, 2]` after the shift `Z + 1`:
    /// `0` if `Z < −1`, `Z + 1` on `[−1, 1]`, `2` if `Z > 1`.
    AltDist {
        #[serde(default)]
        mu: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// `A_g + a_wedge · 1` with `A_g` i.i.d. uniform on `[−a_wedge, a_vee]`.
    ShiftedSubgaussian { a_wedge: f64, a_vee: f64 },
}

impl MatrixKind {
    pub fn alt_dist() -> Self {
        MatrixKind::AltDist { mu: 0.0, sigma: 0.5 }
    }

    pub fn beta_1_3() -> Self {
        MatrixKind::Beta { alpha: 1.0, beta: 3.0 }
    }

    pub fn label(&self) -> String {
        match *self {
            MatrixKind::Uniform01 => "uniform01".into(),
            MatrixKind::Beta { alpha, beta } => format!("beta({alpha},{beta})"),
            MatrixKind::AltDist { mu, sigma } => format!("altdist({mu},{sigma})"),
            MatrixKind::ShiftedSubgaussian { a_wedge, a_vee } => {
                format!("shifted({a_wedge},{a_vee})")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MatrixKind::Uniform01 => true,
            MatrixKind::Beta { alpha, beta } => alpha > 0.0 && beta > 0.0,
            MatrixKind::AltDist { mu, sigma } => mu.is_finite() && sigma > 0.0,
            MatrixKind::ShiftedSubgaussian { a_wedge, a_vee } => a_wedge > 0.0 && a_vee > 0.0,
        };
        if ok && self.params_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid matrix parameters: {self:?}")))
        }
    }

    fn params_finite(&self) -> bool {
        match *self {
            MatrixKind::Uniform01 => true,
            MatrixKind::Beta { alpha: a, beta: b }
            | MatrixKind::AltDist { mu: a, sigma: b }
            | MatrixKind::ShiftedSubgaussian { a_wedge: a, a_vee: b } => {
                a.is_finite() && b.is_finite()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixSpec {
    pub kind: MatrixKind,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

enum Sampler {
    Uniform(Uniform<f64>),
    Beta(Beta<f64>),
    Alt(Normal<f64>),
}

impl Sampler {
    fn new(kind: &MatrixKind) -> Result<Self> {
        let cfg = |e: &dyn std::fmt::Display| Error::Config(e.to_string());
        Ok(match *kind {
            MatrixKind::Uniform01 => Sampler::Uniform(Uniform::new_inclusive(0.0, 1.0).map_err(|e| cfg(&e))?),
            MatrixKind::Beta { alpha, beta } => Sampler::Beta(Beta::new(alpha, beta).map_err(|e| cfg(&e))?),
            MatrixKind::AltDist { mu, sigma } => Sampler::Alt(Normal::new(mu, sigma).map_err(|e| cfg(&e))?),
            MatrixKind::ShiftedSubgaussian { a_wedge, a_vee } => {
                Sampler::Uniform(Uniform::new_inclusive(-a_wedge, a_vee).map_err(|e| cfg(&e))?)
            }
        })
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Beta(b) => b.sample(rng),
            Sampler::Alt(nrm) => {
                let z = nrm.sample(rng);
                if z < -1.0 {
                    0.0
                } else if z > 1.0 {
                    2.0
                } else {
                    z + 1.0
                }
            }
        }
    }
}

/// Draws an `n × p` design. Row `i` uses its own stream derived from
/// `(seed, i)`, so a design with fewer rows is a prefix of a larger one.
pub fn generate_matrix(spec: &MatrixSpec) -> Result<Matrix<f64>> {
    spec.kind.validate()?;
    if spec.n == 0 || spec.p == 0 {
        return Err(Error::Config("matrix dimensions must be at least 1".into()));
    }
    let sampler = Sampler::new(&spec.kind)?;
    let mut data = Vec::with_capacity(spec.n * spec.p);
    for i in 0..spec.n {
        let mut r = rng::stream(spec.seed, i as u64);
        data.extend((0..spec.p).map(|_| sampler.draw(&mut r)));
    }
    let m = Matrix::new(spec.n, spec.p, data)?;
    match spec.kind {
        MatrixKind::ShiftedSubgaussian { a_wedge, .. } => shifted_construction(&m, a_wedge),
        _ => Ok(m),
    }
}

/// `A_g + a_wedge · 1`; every result entry must be nonnegative.
pub fn shifted_construction(a_g: &Matrix<f64>, a_wedge: f64) -> Result<Matrix<f64>> {
    let out = a_g.map(|x| x + a_wedge);
    match out.argmin_entry() {
        Some((i, j)) if out.get(i, j) < 0.0 => Err(Error::Contract(format!(
            "shift {a_wedge} leaves entry ({i}, {j}) negative ({})",
            out.get(i, j)
        ))),
        _ => Ok(out),
    }
}

/// Result of [`estimate_re`]. `gamma_hat` is an upper estimate of the true
/// restricted-eigenvalue constant: it is attained by `minimizer`, which lies
/// in the cone of `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REEstimate {
    pub gamma_hat: f64,
    pub k: usize,
    pub trials: usize,
    pub minimizer: Vec<f64>,
    pub support: Vec<usize>,
    /// Whether all supports were enumerated (small `p`).
    pub enumerated: bool,
}

/// Supports are enumerated exhaustively up to this dimension.
pub const RE_ENUMERATION_MAX_P: usize = 12;
const REFINE_SWEEPS: usize = 50;

/// `‖u_S‖₁ ≥ ‖u_{S^c}‖₁`
pub fn in_cone(u: &[f64], support: &[usize]) -> bool {
    let mut in_s = vec![false; u.len()];
    support.iter().for_each(|&j| in_s[j] = true);
    let (mut ls, mut lc) = (0.0, 0.0);
    for (x, s) in u.iter().zip(&in_s) {
        if *s {
            ls += x.abs();
        } else {
            lc += x.abs();
        }
    }
    u.iter().any(|x| *x != 0.0) && ls >= lc * (1.0 - 1e-12)
}

/// `‖A u‖² / (n ‖u‖²)`
pub fn re_ratio(a: &Matrix<f64>, u: &[f64]) -> f64 {
    let au = a.mul_vec(u).expect("dimension checked by caller");
    let num: f64 = au.iter().map(|x| x * x).sum();
    let den: f64 = u.iter().map(|x| x * x).sum();
    num / (a.rows() as f64 * den)
}

struct Gram<'a> {
    g: &'a [f64],
    p: usize,
}

impl Gram<'_> {
    fn quad(&self, u: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                acc += uj * crate::scalar::dot(&self.g[j * self.p..(j + 1) * self.p], u);
            }
        }
        acc
    }

    /// Coordinate descent on the Rayleigh quotient `uᵀGu / uᵀu` restricted to
    /// the cone of `in_s`. Each coordinate update is an exact 1-D minimization
    /// over the feasible range.
    fn refine(&self, in_s: &[bool], u: &mut [f64]) -> f64 {
        let p = self.p;
        let mut gu: Vec<f64> = (0..p)
            .map(|j| crate::scalar::dot(&self.g[j * p..(j + 1) * p], u))
            .collect();
        let mut num = crate::scalar::dot(u, &gu);
        let mut den = crate::scalar::dot(u, u);
        if den == 0.0 {
            return f64::INFINITY;
        }
        for _ in 0..REFINE_SWEEPS {
            let mut improved = false;
            let (mut ls, mut lc) = (0.0, 0.0);
            for j in 0..p {
                if in_s[j] {
                    ls += u[j].abs();
                } else {
                    lc += u[j].abs();
                }
            }
            for j in 0..p {
                let uj = u[j];
                let c = self.g[j * p + j];
                let b = gu[j] - c * uj;
                let n0 = num - 2.0 * uj * b - c * uj * uj;
                let d0 = den - uj * uj;
                let q = |x: f64| (n0 + 2.0 * b * x + c * x * x) / (d0 + x * x);
                let current = num / den;
                let big = 1e6 * (den.sqrt() + 1.0);

                let mut cands: Vec<f64> = Vec::with_capacity(8);
                // stationary points: b x² + (n0 − c d0) x − b d0 = 0
                let qa = b;
                let qb = n0 - c * d0;
                let qc = -b * d0;
                if qa.abs() > 1e-300 {
                    let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
                    let r1 = (-qb - qb.signum() * disc) / (2.0 * qa);
                    cands.push(r1);
                    if r1 != 0.0 {
                        cands.push(qc / (qa * r1));
                    }
                } else {
                    cands.push(0.0);
                    cands.push(big);
                }
                let feasible: Vec<f64> = if in_s[j] {
                    let m = (lc - (ls - uj.abs())).max(0.0);
                    let mut v: Vec<f64> = cands
                        .iter()
                        .map(|&x| if x.abs() < m { m.copysign(if x == 0.0 { 1.0 } else { x }) } else { x })
                        .collect();
                    v.extend([m, -m, big, -big]);
                    v
                } else {
                    let r = (ls - (lc - uj.abs())).max(0.0);
                    let mut v: Vec<f64> = cands.iter().map(|&x| x.clamp(-r, r)).collect();
                    v.extend([r, -r]);
                    v
                };
                let mut best = (uj, current);
                for x in feasible {
                    if !x.is_finite() || d0 + x * x <= 0.0 {
                        continue;
                    }
                    let qx = q(x);
                    if qx < best.1 - 1e-14 * best.1.abs().max(1e-300) {
                        best = (x, qx);
                    }
                }
                if best.0 != uj {
                    let dx = best.0 - uj;
                    for (l, gl) in gu.iter_mut().enumerate() {
                        *gl += self.g[l * p + j] * dx;
                    }
                    if in_s[j] {
                        ls += best.0.abs() - uj.abs();
                    } else {
                        lc += best.0.abs() - uj.abs();
                    }
                    u[j] = best.0;
                    num = n0 + 2.0 * b * best.0 + c * best.0 * best.0;
                    den = d0 + best.0 * best.0;
                    improved = true;
                }
            }
            let norm = den.sqrt();
            u.iter_mut().for_each(|x| *x /= norm);
            gu.iter_mut().for_each(|x| *x /= norm);
            num = crate::scalar::dot(u, &gu);
            den = crate::scalar::dot(u, u);
            if !improved {
                break;
            }
        }
        num / den
    }
}

fn combinations(p: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    if k > p {
        return;
    }
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] != i + p - k {
                idx[i] += 1;
                for l in i + 1..k {
                    idx[l] = idx[l - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
        if k == 0 {
            return;
        }
    }
}

fn random_cone_vector<R: Rng>(p: usize, k: usize, r: &mut R) -> (Vec<usize>, Vec<f64>) {
    let mut support = index::sample(r, p, k).into_vec();
    support.sort_unstable();
    let mut in_s = vec![false; p];
    support.iter().for_each(|&j| in_s[j] = true);
    let mut u: Vec<f64> = (0..p).map(|_| StandardNormal.sample(r)).collect();
    let ls: f64 = support.iter().map(|&j| u[j].abs()).sum();
    let lc: f64 = (0..p).filter(|&j| !in_s[j]).map(|j| u[j].abs()).sum();
    let frac: f64 = r.random();
    let scale = if lc > 0.0 { frac * ls / lc } else { 0.0 };
    for j in 0..p {
        if !in_s[j] {
            u[j] *= scale;
        }
    }
    (support, u)
}

/// Randomized upper estimate of the RE constant `γ_k` of `a`.
///
/// For every sparsity `k' ≤ k`, `trials` random cone vectors are scored and
/// the best one is polished by cone-constrained coordinate descent. When
/// `p ≤ 12` every support is also enumerated, starting from the smallest
/// eigenvector of the restricted Gram block. The running minimum over `k'`
/// keeps the estimate non-increasing in `k`. RE certification is NP-hard in
/// general; this only ever over-estimates `γ_k`.
pub fn estimate_re(a: &Matrix<f64>, k: usize, trials: usize, seed: u64) -> Result<REEstimate> {
    let p = a.cols();
    if k == 0 || k > p {
        return Err(Error::Config(format!("sparsity {k} must lie in 1..={p}")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let g = a.scaled_gram();
    let gram = Gram { g: &g, p };
    let mut best = (f64::INFINITY, vec![0.0; p], Vec::new());

    for kk in 1..=k {
        let mut level_best: (f64, Vec<f64>, Vec<usize>) = (f64::INFINITY, Vec::new(), Vec::new());
        for t in 0..trials {
            let mut r = rng::stream_at(seed, &[kk as u64, t as u64]);
            let (support, u) = random_cone_vector(p, kk, &mut r);
            let q = gram.quad(&u) / crate::scalar::dot(&u, &u);
            if q < level_best.0 {
                level_best = (q, u, support);
            }
        }
        let (_, mut u, support) = level_best;
        let mut in_s = vec![false; p];
        support.iter().for_each(|&j| in_s[j] = true);
        let q = gram.refine(&in_s, &mut u);
        if q < best.0 {
            best = (q, u, support);
        }

        if p <= RE_ENUMERATION_MAX_P {
            combinations(p, kk, |s| {
                let block = DMatrix::from_fn(kk, kk, |i, j| g[s[i] * p + s[j]]);
                let eig = SymmetricEigen::new(block);
                let (imin, _) = eig
                    .eigenvalues
                    .iter()
                    .enumerate()
                    .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
                let mut u = vec![0.0; p];
                for (i, &j) in s.iter().enumerate() {
                    u[j] = eig.eigenvectors[(i, imin)];
                }
                let mut in_s = vec![false; p];
                s.iter().for_each(|&j| in_s[j] = true);
                let q = gram.refine(&in_s, &mut u);
                if q < best.0 {
                    best = (q, u, s.to_vec());
                }
            });
        }
    }

    let (q, mut u, support) = best;
    let norm = crate::scalar::norm2(&u);
    if norm > 0.0 {
        u.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(REEstimate {
        gamma_hat: q.max(0.0),
        k,
        trials,
        minimizer: u,
        support,
        enumerated: p <= RE_ENUMERATION_MAX_P,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_entries_in_unit_interval() {
        let spec = MatrixSpec { kind: MatrixKind::Uniform01, n: 50, p: 40, seed: 3 };
        let a = generate_matrix(&spec).unwrap();
        assert!(a.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        assert_eq!(a, generate_matrix(&spec).unwrap());
        // prefix property
        let small = generate_matrix(&MatrixSpec { n: 10, ..spec }).unwrap();
        assert_eq!(small, a.top_rows(10).unwrap());
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad = MatrixSpec { kind: MatrixKind::Beta { alpha: 0.0, beta: 1.0 }, n: 2, p: 2, seed: 0 };
        assert!(matches!(generate_matrix(&bad), Err(Error::Config(_))));
        let bad = MatrixSpec { kind: MatrixKind::Uniform01, n: 0, p: 2, seed: 0 };
        assert!(generate_matrix(&bad).is_err());
    }

    #[test]
    fn shifted_examples() {
        let a = Matrix::from_rows(vec![vec![-1.0, 1.0]]).unwrap();
        assert_eq!(shifted_construction(&a, 1.0).unwrap().to_rows(), vec![vec![0.0, 2.0]]);
        let z = Matrix::<f64>::zeros(2, 3);
        assert!(shifted_construction(&z, 0.5).unwrap().as_slice().iter().all(|&x| x == 0.5));
        assert!(matches!(shifted_construction(&a, 0.5), Err(Error::Contract(_))));
        let spec = MatrixSpec {
            kind: MatrixKind::ShiftedSubgaussian { a_wedge: 0.5, a_vee: 1.5 },
            n: 30,
            p: 30,
            seed: 1,
        };
        let m = generate_matrix(&spec).unwrap();
        assert!(m.as_slice().iter().all(|&x| (0.0..=2.0).contains(&x)));
    }

    #[test]
    fn re_isometry() {
        let a = Matrix::<f64>::identity(4).map(|x| 2.0 * x);
        let est = estimate_re(&a, 1, 20, 0).unwrap();
        assert!((est.gamma_hat - 1.0).abs() < 1e-9);
        assert!(est.enumerated);
    }

    #[test]
    fn re_duplicate_columns_vanish() {
        let a = Matrix::from_rows(vec![vec![1.0, 1.0, 0.0], vec![2.0, 2.0, 1.0], vec![0.5, 0.5, 3.0]]).unwrap();
        let est = estimate_re(&a, 2, 10, 0).unwrap();
        assert!(est.gamma_hat.abs() < 1e-12, "{est:?}");
        assert!(in_cone(&est.minimizer, &est.support));
    }

    #[test]
    fn re_diagonal_example() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let est = estimate_re(&a, 1, 50, 4).unwrap();
        assert!((est.gamma_hat - 0.5).abs() < 1e-9, "{est:?}");
        assert!((re_ratio(&a, &est.minimizer) - est.gamma_hat).abs() < 1e-12);
    }

    #[test]
    fn re_k_too_large() {
        let a = Matrix::<f64>::identity(3);
        assert!(matches!(estimate_re(&a, 4, 1, 0), Err(Error::Config(_))));
    }

    #[test]
    fn combinations_count() {
        let mut c = 0;
        combinations(6, 3, |_| c += 1);
        assert_eq!(c, 20);
        let mut seen = Vec::new();
        combinations(3, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1, 2]]);
    }
}
