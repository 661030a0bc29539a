//! Ordinary least squares through a Householder QR factorization.
//!
//! The normal matrix is never formed: coefficients come from
//! `R b = Q'y`, and `(X'X)^-1 = R^-1 R^-T`.

use nalgebra::{DMatrix, DVector, QR};

use super::CoefficientEstimate;
use crate::error::{Error, Result};

/// A column is treated as dependent on the preceding ones when its
/// diagonal entry of `R` falls below this fraction of its norm.
const RANK_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub se: DVector<f64>,
    /// `sigma^2 (X'X)^-1`.
    pub covariance: DMatrix<f64>,
    /// `RSS / (n - p)`.
    pub residual_variance: f64,
    pub rss: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn estimate(&self, column: usize) -> CoefficientEstimate {
        CoefficientEstimate::new(self.coefficients[column], self.se[column])
    }
}

/// A factored design, reusable for any number of response vectors.
#[derive(Debug, Clone)]
pub struct OlsFactor {
    qr: QR<f64, nalgebra::Dyn, nalgebra::Dyn>,
    r: DMatrix<f64>,
    /// `(X'X)^-1`.
    unscaled_covariance: DMatrix<f64>,
    n: usize,
    p: usize,
}

impl OlsFactor {
    /// Factors `x`, naming dependent columns by `labels` on failure.
    pub fn new(x: &DMatrix<f64>, labels: &[String]) -> Result<Self> {
        let (n, p) = x.shape();
        if p == 0 || n <= p {
            return Err(Error::Argument(format!("need more rows than columns, got {n}x{p}")));
        }
        let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
        let qr = QR::new(x.clone());
        let r = qr.r();
        let dependent: Vec<String> = (0..p)
            .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norms[j])
            .map(|j| labels.get(j).cloned().unwrap_or_else(|| format!("column {j}")))
            .collect();
        if !dependent.is_empty() {
            return Err(Error::SingularDesign { columns: dependent });
        }
        let r_inv = r
            .solve_upper_triangular(&DMatrix::identity(p, p))
            .ok_or_else(|| Error::SingularDesign { columns: labels.to_vec() })?;
        let unscaled_covariance = &r_inv * r_inv.transpose();
        Ok(Self {
            qr,
            r,
            unscaled_covariance,
            n,
            p,
        })
    }

    pub fn fit(&self, y: &DVector<f64>) -> OlsFit {
        assert_eq!(y.len(), self.n, "response length must match design rows");
        let mut qty = y.clone();
        self.qr.q_tr_mul(&mut qty);
        let head = qty.rows(0, self.p).into_owned();
        let coefficients = self.r.solve_upper_triangular(&head).expect("factor checked for rank");
        let rss = qty.rows(self.p, self.n - self.p).norm_squared();
        let residual_variance = rss / (self.n - self.p) as f64;
        let covariance = &self.unscaled_covariance * residual_variance;
        let se = DVector::from_iterator(self.p, (0..self.p).map(|j| covariance[(j, j)].max(0.0).sqrt()));
        OlsFit {
            coefficients,
            se,
            covariance,
            residual_variance,
            rss,
            n: self.n,
        }
    }
}

pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    let labels: Vec<String> = (0..x.ncols()).map(|j| format!("column {j}")).collect();
    fit_ols_labeled(x, y, &labels)
}

pub fn fit_ols_labeled(x: &DMatrix<f64>, y: &DVector<f64>, labels: &[String]) -> Result<OlsFit> {
    if y.len() != x.nrows() {
        return Err(Error::Argument(format!(
            "response has {} rows, design has {}",
            y.len(),
            x.nrows()
        )));
    }
    Ok(OlsFactor::new(x, labels)?.fit(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_line_through_origin() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = DVector::from_column_slice(&[2.0, 4.0, 6.0, 8.0]);
        let fit = fit_ols(&x, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!(fit.se[0] < 1e-12);
    }

    // Pseudoinverse via SVD, a different route to the same answer.
    fn oracle(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (n, p) = x.shape();
        let pinv = x.clone().pseudo_inverse(1e-14).unwrap();
        let b = &pinv * y;
        let resid = y - x * &b;
        let s2 = resid.norm_squared() / (n - p) as f64;
        let se = DVector::from_iterator(p, (0..p).map(|j| (s2 * (&pinv * pinv.transpose())[(j, j)]).sqrt()));
        (b, se)
    }

    #[test]
    fn matches_pseudoinverse_on_random_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = DMatrix::from_fn(50, 5, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(50, |_, _| rng.random_range(-3.0..3.0));
        let fit = fit_ols(&x, &y).unwrap();
        let (b, se) = oracle(&x, &y);
        for j in 0..5 {
            assert!((fit.coefficients[j] - b[j]).abs() <= 1e-10 * b[j].abs().max(1.0));
            assert!((fit.se[j] - se[j]).abs() <= 1e-8 * se[j]);
        }
    }

    #[test]
    fn dependent_columns_are_named() {
        let x = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => 1.0,
            1 => i as f64,
            _ => 2.0 * i as f64 + 1.0,
        });
        let labels = vec!["intercept".to_string(), "a".into(), "b".into()];
        match OlsFactor::new(&x, &labels) {
            Err(Error::SingularDesign { columns }) => assert_eq!(columns, ["b"]),
            other => panic!("expected singular design, got {other:?}"),
        }
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(matches!(fit_ols(&x, &DVector::zeros(2)), Err(Error::Argument(_))));
    }
}
