//! Affine-rate Poisson observation model and its three losses.
//!
//! Rates are `λ_i(w) = λ0_i + a_iᵀ w`. All losses are averaged over the `n`
//! observations and come with exact gradients.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Rates at or below this value are treated as outside the likelihood domain.
pub const RATE_FLOOR: f64 = 1e-12;

/// Base rates `λ0` plus sensing matrix `A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel<T>", into = "RawModel<T>")]
#[serde(bound = "T: Scalar")]
pub struct RateModel<T: Scalar> {
    base_rates: Vec<T>,
    matrix: Matrix<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(deny_unknown_fields)]
struct RawModel<T: Scalar> {
    base_rates: Vec<T>,
    matrix: Matrix<T>,
}

impl<T: Scalar> TryFrom<RawModel<T>> for RateModel<T> {
    type Error = Error;
    fn try_from(raw: RawModel<T>) -> Result<Self> {
        RateModel::new(raw.base_rates, raw.matrix)
    }
}

impl<T: Scalar> From<RateModel<T>> for RawModel<T> {
    fn from(m: RateModel<T>) -> Self {
        RawModel {
            base_rates: m.base_rates,
            matrix: m.matrix,
        }
    }
}

impl<T: Scalar> RateModel<T> {
    pub fn new(base_rates: Vec<T>, matrix: Matrix<T>) -> Result<Self> {
        check_len("base rates vs matrix rows", matrix.rows(), base_rates.len())?;
        if let Some(i) = base_rates.iter().position(|r| !(r.is_finite() && *r >= T::zero())) {
            return Err(Error::Domain(format!(
                "base rate {} at index {i} must be finite and nonnegative",
                base_rates[i]
            )));
        }
        Ok(Self { base_rates, matrix })
    }

    /// Same base rate for every row.
    pub fn with_constant_base(lambda0: T, matrix: Matrix<T>) -> Result<Self> {
        Self::new(vec![lambda0; matrix.rows()], matrix)
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn p(&self) -> usize {
        self.matrix.cols()
    }

    pub fn base_rates(&self) -> &[T] {
        &self.base_rates
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.matrix
    }

    /// Model restricted to the first `n` observations.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        Ok(Self {
            base_rates: self.base_rates[..n.min(self.n())].to_vec(),
            matrix: self.matrix.top_rows(n)?,
        })
    }

    /// Model restricted to the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            base_rates: idx.iter().map(|&i| self.base_rates[i]).collect(),
            matrix: self.matrix.select_rows(idx),
        }
    }

    /// `λ0 + A w`.
    pub fn rates(&self, w: &[T]) -> Result<Vec<T>> {
        let mut r = self.matrix.mul_vec(w)?;
        for (ri, &b) in r.iter_mut().zip(&self.base_rates) {
            *ri = *ri + b;
        }
        Ok(r)
    }

    pub fn rate_summary(&self, w_star: &ParamVector<T>) -> Result<RateSummary<T>> {
        let rates = self.rates(w_star.as_slice())?;
        let floor = T::lit(RATE_FLOOR);
        check_positive(&rates, floor)?;
        let n = T::from_usize(rates.len()).expect("n");
        let inv_mean = rates.iter().map(|&r| T::one() / r).sum::<T>() / n;
        let a_max = self.matrix.max_entry().unwrap_or_else(T::zero);
        let a_min = self.matrix.min_entry().unwrap_or_else(T::zero);
        let base_max = self
            .base_rates
            .iter()
            .copied()
            .reduce(T::max)
            .unwrap_or_else(T::zero);
        Ok(RateSummary {
            lambda_min: rates.iter().copied().reduce(T::min).unwrap_or_else(T::zero),
            lambda_max: base_max + a_max * w_star.l1(),
            lambda_harmonic: T::one() / inv_mean,
            a_max,
            a_min,
        })
    }
}

pub(crate) fn check_positive<T: Scalar>(rates: &[T], floor: T) -> Result<()> {
    match rates.iter().position(|&r| !(r > floor)) {
        None => Ok(()),
        Some(index) => Err(Error::NonPositiveRate {
            index,
            rate: rates[index].as_f64(),
        }),
    }
}

/// Nonnegative parameter vector `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound = "T: Scalar")]
pub struct ParamVector<T: Scalar>(Vec<T>);

impl<T: Scalar> TryFrom<Vec<T>> for ParamVector<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Self::new(v)
    }
}

impl<T: Scalar> From<ParamVector<T>> for Vec<T> {
    fn from(p: ParamVector<T>) -> Self {
        p.0
    }
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|x| !(x.is_finite() && *x >= T::zero())) {
            return Err(Error::Domain(format!(
                "parameter entry {} at index {i} must be finite and nonnegative",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(p: usize) -> Self {
        Self(vec![T::zero(); p])
    }

    /// Clamps tiny negative round-off from projections to zero.
    pub(crate) fn from_projected(mut values: Vec<T>) -> Self {
        values.iter_mut().for_each(|x| {
            if *x < T::zero() {
                *x = T::zero()
            }
        });
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn l1(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// Indices of nonzero entries.
    pub fn support(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sparsity(&self) -> usize {
        self.0.iter().filter(|&&x| x != T::zero()).count()
    }

    /// Multiplies every entry by a nonnegative factor.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.0.iter().map(|&x| x * factor).collect())
    }
}

/// Observed counts `y`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationSet(Vec<u64>);

impl ObservationSet {
    pub fn new(counts: Vec<u64>) -> Self {
        Self(counts)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn truncate(&self, n: usize) -> Self {
        Self(self.0[..n.min(self.0.len())].to_vec())
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self(idx.iter().map(|&i| self.0[i]).collect())
    }

    /// Parses counts separated by commas and/or newlines.
    pub fn parse(text: &str) -> Result<Self> {
        text.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<u64>()
                    .map_err(|e| Error::Domain(format!("bad count {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RateSummary<T: Scalar> {
    pub lambda_min: T,
    /// `max_i λ0_i + a_max · s`, the form the error-bound constants use.
    pub lambda_max: T,
    /// Harmonic mean of the rates at `w*`.
    pub lambda_harmonic: T,
    pub a_max: T,
    pub a_min: T,
}

/// The three data-fit objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `(1/n) Σ −y_i log λ_i + λ_i`
    PoissonNll,
    /// `(1/n) Σ (y_i − λ_i)² / λ_i`
    RescaledLasso,
    /// `(1/n) Σ (y_i − λ_i)²`
    LeastSquares,
}

impl Loss {
    pub fn name(self) -> &'static str {
        match self {
            Loss::PoissonNll => "poisson",
            Loss::RescaledLasso => "rlasso",
            Loss::LeastSquares => "ls",
        }
    }

    /// Whether the loss needs strictly positive rates.
    pub fn needs_positive_rates(self) -> bool {
        !matches!(self, Loss::LeastSquares)
    }

    /// Loss value from precomputed rates.
    pub fn value_from_rates<T: Scalar>(self, rates: &[T], y: &[u64], floor: T) -> Result<T> {
        if self.needs_positive_rates() {
            check_positive(rates, floor)?;
        }
        let n = T::from_usize(rates.len().max(1)).expect("n");
        let total: T = rates
            .iter()
            .zip(y)
            .map(|(&r, &yi)| {
                let yi = T::from_u64(yi).expect("count");
                match self {
                    Loss::PoissonNll => {
                        if yi == T::zero() {
                            r
                        } else {
                            r - yi * r.ln()
                        }
                    }
                    Loss::RescaledLasso => (yi - r) * (yi - r) / r,
                    Loss::LeastSquares => (yi - r) * (yi - r),
                }
            })
            .sum();
        Ok(total / n)
    }

    /// Per-row derivative `∂loss/∂λ_i` (already divided by `n`); the
    /// gradient is `Aᵀ` times this vector.
    pub fn rate_derivative<T: Scalar>(self, rates: &[T], y: &[u64], out: &mut [T]) {
        let n = T::from_usize(rates.len().max(1)).expect("n");
        for ((o, &r), &yi) in out.iter_mut().zip(rates).zip(y) {
            let yi = T::from_u64(yi).expect("count");
            *o = match self {
                Loss::PoissonNll => T::one() - yi / r,
                Loss::RescaledLasso => T::one() - (yi / r) * (yi / r),
                Loss::LeastSquares => T::lit(2.0) * (r - yi),
            } / n;
        }
    }

    /// Value and gradient at `w`.
    pub fn evaluate<T: Scalar>(
        self,
        model: &RateModel<T>,
        y: &ObservationSet,
        w: &ParamVector<T>,
    ) -> Result<(T, Vec<T>)> {
        self.evaluate_slice(model, y, w.as_slice())
    }

    pub(crate) fn evaluate_slice<T: Scalar>(
        self,
        model: &RateModel<T>,
        y: &ObservationSet,
        w: &[T],
    ) -> Result<(T, Vec<T>)> {
        check_len("observations vs model rows", model.n(), y.len())?;
        let rates = model.rates(w)?;
        let value = self.value_from_rates(&rates, y.counts(), T::lit(RATE_FLOOR))?;
        let mut d = vec![T::zero(); rates.len()];
        self.rate_derivative(&rates, y.counts(), &mut d);
        let mut grad = vec![T::zero(); model.p()];
        model.matrix().tmul_vec_into(&d, &mut grad);
        Ok((value, grad))
    }
}

/// Poisson negative log-likelihood (without the `log y!` constant) and gradient.
pub fn poisson_nll<T: Scalar>(
    model: &RateModel<T>,
    y: &ObservationSet,
    w: &ParamVector<T>,
) -> Result<(T, Vec<T>)> {
    Loss::PoissonNll.evaluate(model, y, w)
}

pub fn rescaled_lasso_loss<T: Scalar>(
    model: &RateModel<T>,
    y: &ObservationSet,
    w: &ParamVector<T>,
) -> Result<(T, Vec<T>)> {
    Loss::RescaledLasso.evaluate(model, y, w)
}

pub fn least_squares_loss<T: Scalar>(
    model: &RateModel<T>,
    y: &ObservationSet,
    w: &ParamVector<T>,
) -> Result<(T, Vec<T>)> {
    Loss::LeastSquares.evaluate(model, y, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(base: Vec<f64>, rows: Vec<Vec<f64>>) -> RateModel<f64> {
        RateModel::new(base, Matrix::from_rows(rows).unwrap()).unwrap()
    }

    fn pv(v: &[f64]) -> ParamVector<f64> {
        ParamVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rates_examples() {
        assert_eq!(model(vec![1.0], vec![vec![0.0]]).rates(&[5.0]).unwrap(), vec![1.0]);
        let m = model(vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(m.rates(&[3.0, 4.0]).unwrap(), vec![4.0, 6.0]);
        let q = model(vec![10.0], vec![vec![-1.0, -2.0]]);
        assert_eq!(q.rates(&[1.0, 0.0]).unwrap(), vec![9.0]);
        assert!(matches!(
            m.rates(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn poisson_examples() {
        let m = model(vec![1.0], vec![vec![1.0]]);
        let (v, g) = poisson_nll(&m, &ObservationSet::new(vec![0]), &pv(&[0.0])).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![1.0]);
        let (v, g) = poisson_nll(&m, &ObservationSet::new(vec![3]), &pv(&[2.0])).unwrap();
        assert!((v - (-3.0 * 3f64.ln() + 3.0)).abs() < 1e-14);
        assert!((v - (-0.29584)).abs() < 1e-5);
        assert!(g[0].abs() < 1e-15);
    }

    #[test]
    fn poisson_stationary_at_exact_fit() {
        let m = model(vec![1.0, 2.0], vec![vec![1.0, 2.0], vec![3.0, 1.0]]);
        let w = pv(&[1.0, 2.0]);
        // rates 6 and 7
        let y = ObservationSet::new(vec![6, 7]);
        let (_, g) = poisson_nll(&m, &y, &w).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn poisson_rejects_nonpositive_rate() {
        let m = model(vec![1.0, 0.0], vec![vec![1.0], vec![0.0]]);
        let err = poisson_nll(&m, &ObservationSet::new(vec![1, 1]), &pv(&[1.0])).unwrap_err();
        assert!(matches!(err, Error::NonPositiveRate { index: 1, .. }));
    }

    #[test]
    fn rescaled_lasso_examples() {
        let m = model(vec![1.0], vec![vec![1.0]]);
        let y = ObservationSet::new(vec![3]);
        let (v, g) = rescaled_lasso_loss(&m, &y, &pv(&[2.0])).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0]);
        let (v, _) = rescaled_lasso_loss(&m, &y, &pv(&[0.0])).unwrap();
        assert_eq!(v, 4.0);
    }

    #[test]
    fn least_squares_examples() {
        let m = model(vec![0.0], vec![vec![1.0]]);
        let (v, g) = least_squares_loss(&m, &ObservationSet::new(vec![2]), &pv(&[0.0])).unwrap();
        assert_eq!((v, g), (4.0, vec![-4.0]));
        let m = model(vec![1.0, 1.0], vec![vec![1.0], vec![1.0]]);
        let (v, _) = least_squares_loss(&m, &ObservationSet::new(vec![2, 0]), &pv(&[0.0])).unwrap();
        assert_eq!(v, 1.0);
        // exact fit
        let m = model(vec![0.0, 1.0], vec![vec![2.0], vec![1.0]]);
        let (v, g) = least_squares_loss(&m, &ObservationSet::new(vec![4, 3]), &pv(&[2.0])).unwrap();
        assert_eq!((v, g), (0.0, vec![0.0]));
        // rates may be negative
        let m = model(vec![0.0], vec![vec![-1.0]]);
        assert!(least_squares_loss(&m, &ObservationSet::new(vec![0]), &pv(&[1.0])).is_ok());
    }

    #[test]
    fn harmonic_summary() {
        let m = model(vec![1.0, 3.0], vec![vec![0.0], vec![0.0]]);
        let s = m.rate_summary(&pv(&[1.0])).unwrap();
        assert!((s.lambda_harmonic - 1.5).abs() < 1e-15);
        let m = model(vec![1.0, 2.0, 4.0], vec![vec![0.5], vec![0.0], vec![0.0]]);
        let s = m.rate_summary(&pv(&[0.0])).unwrap();
        assert!((s.lambda_harmonic - 12.0 / 7.0).abs() < 1e-14);
        assert_eq!(s.lambda_min, 1.0);
        assert_eq!(s.a_max, 0.5);
        assert_eq!(s.a_min, 0.0);
        // paper-form λ_max: max λ0 + a_max s
        let s = m.rate_summary(&pv(&[2.0])).unwrap();
        assert_eq!(s.lambda_max, 4.0 + 0.5 * 2.0);
        let c = model(vec![2.5; 3], vec![vec![0.0]; 3]);
        assert!((c.rate_summary(&pv(&[1.0])).unwrap().lambda_harmonic - 2.5).abs() < 1e-14);
    }

    #[test]
    fn json_schema() {
        let m = model(vec![1.0, 2.0], vec![vec![1.0, 0.0], vec![0.5, 1.0]]);
        let text = serde_json::to_string(&m).unwrap();
        assert_eq!(text, r#"{"base_rates":[1.0,2.0],"matrix":[[1.0,0.0],[0.5,1.0]]}"#);
        let back: RateModel<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<RateModel<f64>>(r#"{"base_rates":[1.0],"matrix":[[1.0],[2.0]]}"#).is_err());
        assert!(serde_json::from_str::<RateModel<f64>>(r#"{"base_rates":[-1.0],"matrix":[[1.0]]}"#).is_err());
    }

    #[test]
    fn param_vector_invariants() {
        assert!(ParamVector::new(vec![1.0, -1e-3]).is_err());
        let w = pv(&[0.0, 2.0, 0.5]);
        assert_eq!(w.support(), vec![1, 2]);
        assert_eq!(w.l1(), 2.5);
        assert_eq!(w.sparsity(), 2);
    }

    #[test]
    fn parse_observations() {
        let y = ObservationSet::parse("1, 2\n3\n\n4").unwrap();
        assert_eq!(y.counts(), &[1, 2, 3, 4]);
        assert!(ObservationSet::parse("1,-2").is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let m = RateModel::<f32>::new(vec![1.0], Matrix::from_rows(vec![vec![1.0f32]]).unwrap()).unwrap();
        let (v, g) = poisson_nll(&m, &ObservationSet::new(vec![3]), &ParamVector::new(vec![2.0f32]).unwrap()).unwrap();
        assert!((v - (-0.295_836_9f32)).abs() < 1e-5);
        assert!(g[0].abs() < 1e-6);
    }
}
