use serde::{Deserialize, Serialize};

use super::params::{ParameterLayout, ParameterVector};
use super::spec::HierarchicalModelSpec;
use super::ModelError;
use crate::dataset::CodedDataset;
use crate::stats::{inv_logit, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub eta: Vec<f64>,
    pub pi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    pub total: f64,
    pub pointwise: Vec<f64>,
}

/// Bernoulli log-mass on the log-odds scale: `y * eta - ln(1 + e^eta)`.
#[inline]
pub(crate) fn bernoulli_logit(y: f64, eta: f64) -> f64 {
    y * eta - softplus(eta)
}

pub fn linear_predictor(
    spec: &HierarchicalModelSpec,
    params: &ParameterVector,
    data: &CodedDataset,
) -> Result<Prediction, ModelError> {
    let layout = ParameterLayout::new(spec, data)?;
    let theta = layout.pack(params)?;
    let eta: Vec<f64> = (0..data.n_rows()).map(|i| layout.eta(&theta, data, i)).collect();
    let pi = eta.iter().map(|&e| inv_logit(e)).collect();
    Ok(Prediction { eta, pi })
}

pub fn log_likelihood(prediction: &Prediction, response: &[f64]) -> Result<LogLikelihood, ModelError> {
    if prediction.eta.len() != response.len() {
        return Err(ModelError::DimensionMismatch(format!(
            "{} predictions for {} responses",
            prediction.eta.len(),
            response.len()
        )));
    }
    let mut pointwise = Vec::with_capacity(response.len());
    for (row, (&y, &eta)) in response.iter().zip(&prediction.eta).enumerate() {
        if y != 0.0 && y != 1.0 {
            return Err(ModelError::NonBinaryResponse { row, value: y });
        }
        pointwise.push(bernoulli_logit(y, eta));
    }
    Ok(LogLikelihood {
        total: pointwise.iter().sum(),
        pointwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nesting;
    use crate::synthlab::tiny_dataset;

    fn pred(eta: &[f64]) -> Prediction {
        Prediction {
            eta: eta.to_vec(),
            pi: eta.iter().map(|&e| inv_logit(e)).collect(),
        }
    }

    #[test]
    fn single_rows_at_zero() {
        let ln_half = 0.5f64.ln();
        for y in [0.0, 1.0] {
            let ll = log_likelihood(&pred(&[0.0]), &[y]).unwrap();
            assert!((ll.total - ln_half).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_product_of_bernoullis() {
        let eta: [f64; 4] = [-1.3, 0.2, 2.5, -0.4];
        let y = [0.0, 1.0, 1.0, 0.0];
        let mut prod = 1.0;
        for (e, yy) in eta.iter().zip(&y) {
            let p = 1.0 / (1.0 + (-*e).exp());
            prod *= if *yy == 1.0 { p } else { 1.0 - p };
        }
        let ll = log_likelihood(&pred(&eta), &y).unwrap();
        assert!((ll.total - prod.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_binary() {
        assert_eq!(
            log_likelihood(&pred(&[0.0, 0.0]), &[1.0, 0.5]),
            Err(ModelError::NonBinaryResponse { row: 1, value: 0.5 })
        );
    }

    #[test]
    fn zero_parameters_give_half() {
        let data = tiny_dataset(true);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"])
            .with_slopes(&["a"])
            .with_nesting(Nesting::ThreeLevel);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let p = linear_predictor(&spec, &ParameterVector::initial(&layout), &data).unwrap();
        assert!(p.pi.iter().all(|&x| x == 0.5));
    }

    #[test]
    fn intercept_only_probability() {
        let data = tiny_dataset(false);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"]);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let mut params = ParameterVector::initial(&layout);
        params.gamma00 = 0.39;
        let p = linear_predictor(&spec, &params, &data).unwrap();
        let want = 0.39f64.exp() / (1.0 + 0.39f64.exp());
        assert!(p.pi.iter().all(|&x| (x - want).abs() < 1e-15));
    }

    #[test]
    fn fixed_only_ignores_groups() {
        let mut data = tiny_dataset(false);
        let spec = HierarchicalModelSpec::fixed_only("y", &["a", "b"]);
        let layout = ParameterLayout::new(&spec, &data).unwrap();
        let mut params = ParameterVector::initial(&layout);
        params.gamma00 = -0.2;
        params.gamma_p0 = vec![0.7, -1.1];
        let before = linear_predictor(&spec, &params, &data).unwrap();
        let j = data.n_groups_l2();
        data.group_index_l2.iter_mut().for_each(|g| *g = (*g + 1) % j);
        let after = linear_predictor(&spec, &params, &data).unwrap();
        assert_eq!(before, after);
    }
}
