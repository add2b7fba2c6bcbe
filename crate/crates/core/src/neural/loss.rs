use crate::dispatch::DispatchCase;
use crate::error::{check_len, Error, Result};
use crate::linalg::{sq_dist, sum};

/// Batch loss value and its gradient with respect to every prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    pub cotangents: Vec<Vec<f64>>,
}

/// `(1/N) sum ||u_pred - u_label||^2`.
pub fn loss_mse(predictions: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<LossOutput> {
    if predictions.is_empty() {
        return Err(Error::Invalid("loss over an empty batch".into()));
    }
    check_len("label count", predictions.len(), labels.len())?;
    let scale = 1.0 / predictions.len() as f64;
    let mut value = 0.0;
    let mut cotangents = Vec::with_capacity(predictions.len());
    for (p, l) in predictions.iter().zip(labels) {
        check_len("label length", p.len(), l.len())?;
        value += sq_dist(p, l);
        cotangents.push(
            p.iter()
                .zip(l)
                .map(|(a, b)| 2.0 * scale * (a - b))
                .collect(),
        );
    }
    Ok(LossOutput {
        value: value * scale,
        cotangents,
    })
}

/// MSE plus `rho/N` times the squared norm of the positive bound violations and
/// the balance residual of each prediction.
pub fn loss_penalty(
    predictions: &[Vec<f64>],
    labels: &[Vec<f64>],
    case: &DispatchCase,
    loads: &[Vec<f64>],
    rho: f64,
) -> Result<LossOutput> {
    if !(rho >= 0.0) {
        return Err(Error::Invalid(format!(
            "penalty weight must be >= 0, got {rho}"
        )));
    }
    let mut out = loss_mse(predictions, labels)?;
    check_len("load count", predictions.len(), loads.len())?;
    if rho == 0.0 {
        return Ok(out);
    }
    let scale = rho / predictions.len() as f64;
    for ((u, x), cot) in predictions.iter().zip(loads).zip(out.cotangents.iter_mut()) {
        check_len("generation vector", case.generators(), u.len())?;
        let balance = sum(u) - case.net_demand(x)?;
        out.value += scale * balance * balance;
        for i in 0..u.len() {
            let over = (u[i] - case.u_max()[i]).max(0.0);
            let under = (case.u_min()[i] - u[i]).max(0.0);
            out.value += scale * (over * over + under * under);
            cot[i] += 2.0 * scale * (over - under + balance);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn case() -> DispatchCase {
        DispatchCase::new(
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![1.0; 2],
            vec![0.0; 2],
            vec![1.0],
        )
        .unwrap()
    }

    #[test]
    fn mse_examples() {
        let a = vec![vec![0.2, 0.4]];
        let out = loss_mse(&a, &a).unwrap();
        assert_eq!(out.value, 0.0);
        assert_eq!(out.cotangents, vec![vec![0.0, 0.0]]);

        let out = loss_mse(&[vec![0.3]], &[vec![0.0]]).unwrap();
        assert_abs_diff_eq!(out.value, 0.09, epsilon = 1e-15);
        assert_abs_diff_eq!(out.cotangents[0][0], 0.6, epsilon = 1e-15);
        assert!(loss_mse(&[], &[]).is_err());
    }

    #[test]
    fn mse_gradient_matches_finite_differences() {
        let labels = vec![vec![0.1, -0.3, 0.7], vec![1.0, 0.0, -0.5]];
        let preds = vec![vec![0.4, 0.2, 0.1], vec![0.9, -0.2, 0.3]];
        let out = loss_mse(&preds, &labels).unwrap();
        let h = 1e-6;
        for n in 0..2 {
            for k in 0..3 {
                let mut up = preds.clone();
                up[n][k] += h;
                let mut down = preds.clone();
                down[n][k] -= h;
                let fd = (loss_mse(&up, &labels).unwrap().value
                    - loss_mse(&down, &labels).unwrap().value)
                    / (2.0 * h);
                assert_abs_diff_eq!(fd, out.cotangents[n][k], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn penalty_reduces_to_mse_when_feasible_or_unweighted() {
        let c = case();
        let preds = vec![vec![0.4, 0.6]];
        let labels = vec![vec![0.5, 0.5]];
        let loads = vec![vec![1.0]];
        let mse = loss_mse(&preds, &labels).unwrap();
        assert_eq!(
            loss_penalty(&preds, &labels, &c, &loads, 10.0).unwrap(),
            mse
        );

        let infeasible = vec![vec![1.5, 0.9]];
        assert_eq!(
            loss_penalty(&infeasible, &labels, &c, &loads, 0.0).unwrap(),
            loss_mse(&infeasible, &labels).unwrap()
        );
    }

    #[test]
    fn penalty_single_violation() {
        // u1 exceeds its limit by 0.1; u2 is within bounds and the balance holds.
        let c = DispatchCase::new(
            vec![0.0, -1.0],
            vec![1.0, 1.0],
            vec![1.0; 2],
            vec![0.0; 2],
            vec![1.0],
        )
        .unwrap();
        let preds = vec![vec![1.1, -0.1]];
        let out = loss_penalty(&preds, &preds, &c, &[vec![1.0]], 10.0).unwrap();
        assert_abs_diff_eq!(out.value, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let c = case();
        let loads = vec![vec![1.0], vec![1.2]];
        let labels = vec![vec![0.5, 0.5], vec![0.6, 0.6]];
        let preds = vec![vec![1.3, -0.2], vec![0.7, 0.8]];
        let rho = 3.0;
        let out = loss_penalty(&preds, &labels, &c, &loads, rho).unwrap();
        let h = 1e-6;
        for n in 0..2 {
            for k in 0..2 {
                let mut up = preds.clone();
                up[n][k] += h;
                let mut down = preds.clone();
                down[n][k] -= h;
                let fd = (loss_penalty(&up, &labels, &c, &loads, rho).unwrap().value
                    - loss_penalty(&down, &labels, &c, &loads, rho).unwrap().value)
                    / (2.0 * h);
                assert_abs_diff_eq!(fd, out.cotangents[n][k], epsilon = 1e-6);
            }
        }
    }
}
