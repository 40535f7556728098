//! Forwarding probabilities over an ETX-ordered candidate set.
//!
//! For a broadcast with candidate loss rates rho_1..rho_l (candidate 1 has
//! the lowest ETX), beta_m is the probability that candidate m is the
//! highest-priority receiver; alpha is beta normalized to a distribution.
//! An exhaustive enumeration over reception outcomes serves as an
//! independent oracle.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForwardingError {
    #[error("candidate set is empty")]
    EmptyCandidateSet,
    #[error("candidate index {0} out of range 1..={1}")]
    IndexError(usize, usize),
    #[error("loss rate {0} outside the open interval (0, 1)")]
    DomainError(f64),
    #[error("candidate set of size {0} exceeds the enumeration cap of {1}")]
    TooManyCandidates(usize, usize),
}

fn validate(loss_rates: &[f64]) -> Result<(), ForwardingError> {
    for &r in loss_rates {
        if !(r > 0.0 && r < 1.0) {
            return Err(ForwardingError::DomainError(r));
        }
    }
    Ok(())
}

/// Probability that only candidate `m` (1-based, ETX order) receives:
/// rho_1 ... rho_{m-1} * (1 - rho_m) * rho_{m+1} ... rho_l.
pub fn beta_only(loss_rates: &[f64], m: usize) -> Result<f64, ForwardingError> {
    validate(loss_rates)?;
    let l = loss_rates.len();
    if m == 0 || m > l {
        return Err(ForwardingError::IndexError(m, l));
    }
    let mut p = 1.0 - loss_rates[m - 1];
    for (idx, &r) in loss_rates.iter().enumerate() {
        if idx != m - 1 {
            p *= r;
        }
    }
    Ok(p)
}

/// Probability that candidate `m` and at least one lower-priority candidate
/// receive: rho_1 ... rho_{m-1} * (1 - rho_m) * (1 - rho_{m+1} ... rho_l).
/// Zero for m = l (the trailing empty product is 1).
pub fn beta_with_lower(loss_rates: &[f64], m: usize) -> Result<f64, ForwardingError> {
    validate(loss_rates)?;
    let l = loss_rates.len();
    if m == 0 || m > l {
        return Err(ForwardingError::IndexError(m, l));
    }
    let mut p = 1.0 - loss_rates[m - 1];
    for &r in &loss_rates[..m - 1] {
        p *= r;
    }
    let lower_all_lose: f64 = loss_rates[m..].iter().product();
    Ok(p * (1.0 - lower_all_lose))
}

/// The full distribution for one broadcast.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardingDistribution {
    /// Normalized forwarding probabilities, ETX order; sums to 1.
    pub alphas: Vec<f64>,
    /// Unnormalized: beta_m = P(m is the highest-priority receiver).
    pub betas: Vec<f64>,
    pub loss_rates: Vec<f64>,
}

/// Computes beta_m = beta_only + beta_with_lower for every candidate and
/// normalizes into alpha. `loss_rates` must already be in ETX order.
pub fn forwarding_distribution(
    loss_rates: &[f64],
) -> Result<ForwardingDistribution, ForwardingError> {
    if loss_rates.is_empty() {
        return Err(ForwardingError::EmptyCandidateSet);
    }
    validate(loss_rates)?;
    let l = loss_rates.len();
    let betas: Vec<f64> = (1..=l)
        .map(|m| beta_only(loss_rates, m).unwrap() + beta_with_lower(loss_rates, m).unwrap())
        .collect();
    let total: f64 = betas.iter().sum();
    let alphas = betas.iter().map(|b| b / total).collect();
    Ok(ForwardingDistribution {
        alphas,
        betas,
        loss_rates: loss_rates.to_vec(),
    })
}

const ORACLE_CAP: usize = 20;

/// Brute-force beta: enumerate all 2^l receive/lose outcomes and credit each
/// outcome's probability to its highest-priority receiver. Independent of
/// the closed-form path above.
pub fn reception_oracle(loss_rates: &[f64]) -> Result<Vec<f64>, ForwardingError> {
    validate(loss_rates)?;
    let l = loss_rates.len();
    if l > ORACLE_CAP {
        return Err(ForwardingError::TooManyCandidates(l, ORACLE_CAP));
    }
    let mut betas = vec![0.0; l];
    for mask in 0u32..(1 << l) {
        let mut p = 1.0;
        let mut first_receiver = None;
        for m in 0..l {
            let received = mask & (1 << m) != 0;
            p *= if received {
                1.0 - loss_rates[m]
            } else {
                loss_rates[m]
            };
            if received && first_receiver.is_none() {
                first_receiver = Some(m);
            }
        }
        if let Some(m) = first_receiver {
            betas[m] += p;
        }
    }
    Ok(betas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn beta_only_single_candidate() {
        assert!((beta_only(&[0.3], 1).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn beta_only_examples() {
        let rho = [0.1, 0.2, 0.3, 0.1];
        assert!((beta_only(&rho, 4).unwrap() - 0.0054).abs() < 1e-15);
        let rho = [0.2, 0.2, 0.2, 0.2];
        assert!((beta_only(&rho, 1).unwrap() - 0.0064).abs() < 1e-15);
    }

    #[test]
    fn beta_with_lower_examples() {
        let rho = [0.2, 0.2, 0.2, 0.2];
        // Last candidate has no lower-priority node.
        assert_eq!(beta_with_lower(&rho, 4).unwrap(), 0.0);
        assert!((beta_with_lower(&rho, 1).unwrap() - 0.7936).abs() < 1e-15);
        assert!((beta_with_lower(&[0.5, 0.5], 1).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn index_and_domain_errors() {
        assert!(matches!(
            beta_only(&[0.2], 2),
            Err(ForwardingError::IndexError(2, 1))
        ));
        assert!(matches!(
            beta_only(&[0.0], 1),
            Err(ForwardingError::DomainError(_))
        ));
        assert!(matches!(
            beta_with_lower(&[1.0], 1),
            Err(ForwardingError::DomainError(_))
        ));
        assert_eq!(
            forwarding_distribution(&[]),
            Err(ForwardingError::EmptyCandidateSet)
        );
    }

    #[test]
    fn single_candidate_gets_all_mass() {
        let d = forwarding_distribution(&[0.42]).unwrap();
        assert_eq!(d.alphas, vec![1.0]);
    }

    #[test]
    fn uniform_rho_distribution() {
        let d = forwarding_distribution(&[0.2, 0.2, 0.2, 0.2]).unwrap();
        let expect = [0.8, 0.16, 0.032, 0.0064];
        for (b, e) in d.betas.iter().zip(expect) {
            assert!((b - e).abs() < 1e-12);
        }
        let total = 1.0 - 0.2f64.powi(4);
        assert!((d.betas.iter().sum::<f64>() - total).abs() < 1e-12);
        for (a, e) in d.alphas.iter().zip(expect) {
            assert!((a - e / total).abs() < 1e-12);
        }
    }

    #[test]
    fn first_beta_collapses_to_delivery_probability() {
        // beta_1 = (1-rho_1)*rho_2*rho_3*rho_4 + (1-rho_1)*(1-rho_2*rho_3*rho_4)
        // collapses to 1-rho_1.
        let d = forwarding_distribution(&[0.1, 0.2, 0.3, 0.1]).unwrap();
        assert!((d.betas[0] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn oracle_single_candidate() {
        assert_eq!(reception_oracle(&[0.3]).unwrap(), vec![0.7]);
    }

    #[test]
    fn oracle_uniform_rho() {
        let b = reception_oracle(&[0.2, 0.2, 0.2, 0.2]).unwrap();
        let expect = [0.8, 0.16, 0.032, 0.0064];
        for (x, e) in b.iter().zip(expect) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn oracle_cap_enforced() {
        let rho = vec![0.5; 21];
        assert!(matches!(
            reception_oracle(&rho),
            Err(ForwardingError::TooManyCandidates(21, 20))
        ));
    }

    #[test]
    fn closed_form_identity() {
        // beta_m = (1 - rho_m) * prod_{j<m} rho_j.
        let rho = [0.13, 0.41, 0.27, 0.33, 0.19];
        let d = forwarding_distribution(&rho).unwrap();
        for m in 0..rho.len() {
            let closed: f64 = (1.0 - rho[m]) * rho[..m].iter().product::<f64>();
            assert!((d.betas[m] - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn alpha_invariant_under_beta_scaling() {
        let d = forwarding_distribution(&[0.1, 0.2, 0.3]).unwrap();
        let scaled: Vec<f64> = d.betas.iter().map(|b| b * 7.0).collect();
        let total: f64 = scaled.iter().sum();
        for (a, s) in d.alphas.iter().zip(&scaled) {
            assert!((a - s / total).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn distribution_matches_oracle(
            rho in proptest::collection::vec(0.01f64..0.99, 1..=10)
        ) {
            let d = forwarding_distribution(&rho).unwrap();
            let oracle = reception_oracle(&rho).unwrap();
            for (b, o) in d.betas.iter().zip(&oracle) {
                prop_assert!((b - o).abs() < 1e-12);
            }
            let alpha_sum: f64 = d.alphas.iter().sum();
            prop_assert!((alpha_sum - 1.0).abs() < 1e-12);
            let any_receives = 1.0 - rho.iter().product::<f64>();
            prop_assert!((d.betas.iter().sum::<f64>() - any_receives).abs() < 1e-12);
        }

        #[test]
        fn equal_rho_priority_dominance(
            rho in 0.05f64..0.95,
            l in 2usize..=8
        ) {
            let rhos = vec![rho; l];
            let d = forwarding_distribution(&rhos).unwrap();
            for w in d.betas.windows(2) {
                prop_assert!(w[0] > w[1]);
            }
        }
    }
}
