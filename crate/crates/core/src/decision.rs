//! Posterior expected loss and Bayes actions over an explicit model set.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::loss::LossTable;

/// Two risks (or probabilities) closer than this fraction of the largest
/// magnitude in play are treated as tied.
pub const TIE_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    probs: Vec<f64>,
}

impl Posterior {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Dimension("posterior over no models".into()));
        }
        if probs.iter().any(|&p| !(p.is_finite() && p >= 0.0)) {
            return Err(Error::validation(
                "posterior has a negative or non-finite entry",
            ));
        }
        let s: f64 = probs.iter().sum();
        let tol = 1e-12 + probs.len() as f64 * f64::EPSILON;
        if (s - 1.0).abs() > tol {
            return Err(Error::validation(format!("posterior sums to {s}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::validation("weights must have a positive finite sum"));
        }
        Self::new(weights.iter().map(|w| w / s).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub risks: Vec<f64>,
    pub bayes_action: usize,
    pub bayes_risk: f64,
    pub ties: Vec<usize>,
}

fn check_dims(loss: &LossTable, post: &Posterior) -> Result<()> {
    if loss.dim() != post.len() {
        return Err(Error::Dimension(format!(
            "loss table has {} states, posterior has {}",
            loss.dim(),
            post.len()
        )));
    }
    Ok(())
}

/// `R(a, D) = Σ_i l_{i,a} p(M_i | D)`.
pub fn risk(loss: &LossTable, post: &Posterior, action: usize) -> Result<f64> {
    check_dims(loss, post)?;
    if action >= loss.dim() {
        return Err(Error::Dimension(format!(
            "action {action} out of range for {} actions",
            loss.dim()
        )));
    }
    Ok(column_risk(loss, post.probs(), action))
}

fn column_risk(loss: &LossTable, probs: &[f64], action: usize) -> f64 {
    probs
        .iter()
        .enumerate()
        .map(|(s, p)| loss.get(s, action) * p)
        .sum()
}

/// Indices within tolerance of the minimum, ascending.
pub(crate) fn argmin_ties(values: &[f64]) -> Vec<usize> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = TIE_REL_TOL * scale;
    (0..values.len())
        .filter(|&i| values[i] - min <= tol)
        .collect()
}

/// Minimizes risk over all actions. Ties go to the lowest index, which on a
/// lattice-ordered table is also the model with the fewest arcs.
pub fn bayes_action(loss: &LossTable, post: &Posterior) -> Result<RiskReport> {
    check_dims(loss, post)?;
    let risks: Vec<f64> = (0..loss.dim())
        .map(|a| column_risk(loss, post.probs(), a))
        .collect();
    let ties = argmin_ties(&risks);
    let bayes_action = ties[0];
    Ok(RiskReport {
        bayes_risk: risks[bayes_action],
        bayes_action,
        ties,
        risks,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MapChoice {
    pub index: usize,
    pub ties: Vec<usize>,
}

/// The posterior mode, with the same tie handling as [`bayes_action`].
pub fn map_action(post: &Posterior) -> MapChoice {
    let max = post.probs().iter().copied().fold(0.0f64, f64::max);
    let tol = TIE_REL_TOL * max;
    let ties: Vec<usize> = (0..post.len())
        .filter(|&i| max - post.probs()[i] <= tol)
        .collect();
    MapChoice {
        index: ties[0],
        ties,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{state_count_loss, zero_one};

    fn post(p: &[f64]) -> Posterior {
        Posterior::new(p.to_vec()).unwrap()
    }

    fn two_parent(p: f64) -> Posterior {
        post(&[1.0 - 4.0 * p, p, p, 2.0 * p])
    }

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn zero_one_risk_is_complement() {
        let p = post(&[0.5, 0.3, 0.2]);
        let l = zero_one(3).unwrap();
        for i in 0..3 {
            assert!((risk(&l, &p, i).unwrap() - (1.0 - p.probs()[i])).abs() < 1e-15);
        }
        let r = bayes_action(&l, &p).unwrap();
        assert_eq!(r.bayes_action, 0);
        assert_eq!(r.ties, vec![0]);
    }

    #[test]
    fn state_count_risks() {
        let l = state_count_loss(&[2, 3], 1.0, 1.0).unwrap();
        let r = bayes_action(&l, &two_parent(0.1)).unwrap();
        assert!(close(&r.risks, &[0.6, 1.9, 2.5, 3.5]), "{:?}", r.risks);
        assert_eq!(r.bayes_action, 0);

        let l = state_count_loss(&[2, 3], 10.0, 1.0).unwrap();
        let r = bayes_action(&l, &two_parent(0.07)).unwrap();
        assert!(close(&r.risks, &[4.2, 3.19, 3.91, 3.95]), "{:?}", r.risks);
        assert_eq!(r.bayes_action, 1);
    }

    #[test]
    fn map_ties() {
        let m = map_action(&post(&[0.25; 4]));
        assert_eq!(m.index, 0);
        assert_eq!(m.ties, vec![0, 1, 2, 3]);
        assert_eq!(map_action(&post(&[0.2, 0.5, 0.3])).index, 1);
    }

    #[test]
    fn uniform_zero_one_ties_everything() {
        let r = bayes_action(&zero_one(4).unwrap(), &post(&[0.25; 4])).unwrap();
        assert_eq!(r.ties, vec![0, 1, 2, 3]);
        assert_eq!(r.bayes_action, 0);
    }

    #[test]
    fn scaling_keeps_decision() {
        let l = state_count_loss(&[2, 3], 10.0, 1.0).unwrap();
        let p = two_parent(0.07);
        let a = bayes_action(&l, &p).unwrap();
        let b = bayes_action(&l.scaled(37.5), &p).unwrap();
        assert_eq!(a.bayes_action, b.bayes_action);
        assert_eq!(a.ties, b.ties);
    }

    #[test]
    fn risk_is_linear_in_the_posterior() {
        let l = state_count_loss(&[2, 3], 2.0, 0.5).unwrap();
        let p = [0.1, 0.2, 0.3, 0.4];
        let q = [0.7, 0.1, 0.1, 0.1];
        let mu = 0.35;
        let mix: Vec<f64> = p
            .iter()
            .zip(&q)
            .map(|(a, b)| mu * a + (1.0 - mu) * b)
            .collect();
        for a in 0..4 {
            let lhs = risk(&l, &post(&mix), a).unwrap();
            let rhs =
                mu * risk(&l, &post(&p), a).unwrap() + (1.0 - mu) * risk(&l, &post(&q), a).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_errors() {
        let l = zero_one(3).unwrap();
        assert!(matches!(
            risk(&l, &post(&[0.5, 0.5]), 0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            risk(&l, &post(&[0.5, 0.25, 0.25]), 3),
            Err(Error::Dimension(_))
        ));
        assert!(bayes_action(&l, &post(&[1.0])).is_err());
        assert!(Posterior::new(vec![0.5, 0.4]).is_err());
        assert!(Posterior::new(vec![]).is_err());
    }
}
