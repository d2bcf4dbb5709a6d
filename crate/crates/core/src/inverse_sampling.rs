//! Second-phase (inverse) sampling from the big-data sample.
//!
//! Each unit of `B` gets conditional inclusion probability `pi_i = n w_i`,
//! where `w_i` are the normalized importance weights, and a subsample is drawn
//! by unequal probability sampling. The Horvitz-Thompson estimator
//! `sum_{B2} w_i y_i / pi_i` is then design-unbiased for the weighted
//! first-phase estimator `sum_B w_i y_i`, treating `B` as the population.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tilting::TiltingSolution;

/// Slack when comparing `pi` against 1 and `1/max w` against an integer.
const PI_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Independent Bernoulli(`pi_i`) draws; random size, exact joint probabilities.
    Poisson,
    /// Systematic PPS over a uniformly random ordering; fixed size `n`.
    /// Joint probabilities use the Hajek approximation.
    SystematicPps,
}

/// Conditional first-order inclusion probabilities for the second phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondPhaseDesign {
    pi: Vec<f64>,
    n: usize,
    method: SamplingMethod,
    importance_weights: Vec<f64>,
    /// `sum_k pi_k (1 - pi_k)`, the Hajek normalizer.
    hajek_d: f64,
}

impl SecondPhaseDesign {
    /// Design from arbitrary inclusion probabilities in `(0, 1]` and the
    /// weights `w_i` entering the estimator `sum w_i y_i / pi_i`.
    pub fn from_parts(pi: Vec<f64>, importance_weights: Vec<f64>, method: SamplingMethod) -> Result<Self> {
        if pi.is_empty() || pi.len() != importance_weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inclusion probabilities for {} weights",
                pi.len(),
                importance_weights.len()
            )));
        }
        if let Some(i) = pi.iter().position(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidInput(format!("pi = {} at position {i} is outside (0, 1]", pi[i])));
        }
        let n = pi.iter().sum::<f64>().round() as usize;
        let hajek_d = pi.iter().map(|p| p * (1.0 - p)).sum();
        Ok(Self {
            pi,
            n,
            method,
            importance_weights,
            hajek_d,
        })
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn importance_weights(&self) -> &[f64] {
        &self.importance_weights
    }

    /// True when joint inclusion probabilities are exact rather than approximated.
    pub fn joint_is_exact(&self) -> bool {
        self.method == SamplingMethod::Poisson || self.hajek_d == 0.0
    }

    /// `pi_{ij}`; `pi_{ii} = pi_i`.
    pub fn joint_pi(&self, i: usize, j: usize) -> f64 {
        let (pi, pj) = (self.pi[i], self.pi[j]);
        if i == j {
            return pi;
        }
        match self.method {
            SamplingMethod::Poisson => pi * pj,
            SamplingMethod::SystematicPps => {
                if self.hajek_d == 0.0 {
                    pi * pj
                } else {
                    pi * pj * (1.0 - (1.0 - pi) * (1.0 - pj) / self.hajek_d)
                }
            }
        }
    }

    /// Draws the second-phase sample.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SecondPhaseSample<'_> {
        let indices = match self.method {
            SamplingMethod::Poisson => self
                .pi
                .iter()
                .enumerate()
                .filter_map(|(i, &p)| (p >= 1.0 || rng.random::<f64>() < p).then_some(i))
                .collect(),
            SamplingMethod::SystematicPps => self.draw_systematic(rng),
        };
        SecondPhaseSample { design: self, indices }
    }

    fn draw_systematic<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut selected: Vec<usize> = Vec::with_capacity(self.n);
        let mut rest: Vec<usize> = Vec::with_capacity(self.pi.len());
        for (i, &p) in self.pi.iter().enumerate() {
            if p >= 1.0 {
                selected.push(i);
            } else {
                rest.push(i);
            }
        }
        rest.shuffle(rng);
        let total: f64 = rest.iter().map(|&i| self.pi[i]).sum();
        let start: f64 = rng.random();
        let target = total.round();
        let mut next = start;
        let mut cum = 0.0;
        let first_random = selected.len();
        for &k in &rest {
            cum += self.pi[k];
            if next < cum {
                selected.push(k);
                next += 1.0;
            }
        }
        // Rounding in the cumulated sum can push the last selection point past
        // the end when `start` is within ulps of 1; that point belongs to the
        // last unit in the ordering.
        if (total - target).abs() < PI_SLACK && ((selected.len() - first_random) as f64) < target {
            if let Some(&last) = rest.last() {
                if selected.last() != Some(&last) {
                    selected.push(last);
                }
            }
        }
        selected.sort_unstable();
        selected
    }
}

/// The drawn subsample `B2`, as positions into `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondPhaseSample<'d> {
    design: &'d SecondPhaseDesign,
    indices: Vec<usize>,
}

impl<'d> SecondPhaseSample<'d> {
    /// Sample made of explicitly chosen positions (used for enumeration).
    pub fn from_indices(design: &'d SecondPhaseDesign, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if indices.last().is_some_and(|&i| i >= design.pi.len()) {
            return Err(Error::InvalidInput("sample position outside the design".into()));
        }
        Ok(Self { design, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn realized_size(&self) -> usize {
        self.indices.len()
    }

    pub fn design(&self) -> &'d SecondPhaseDesign {
        self.design
    }

    pub fn joint_pi(&self, i: usize, j: usize) -> f64 {
        self.design.joint_pi(i, j)
    }

    fn expanded(&self, y_big: &[f64]) -> Result<Vec<f64>> {
        if y_big.len() != self.design.pi.len() {
            return Err(Error::DimensionMismatch(format!(
                "design covers {} units but {} y values were given",
                self.design.pi.len(),
                y_big.len()
            )));
        }
        let w = &self.design.importance_weights;
        let pi = &self.design.pi;
        Ok(self.indices.iter().map(|&i| w[i] * y_big[i] / pi[i]).collect())
    }

    /// `sum_{i in B2} w_i y_i / pi_i`
    pub fn ht_mean(&self, y_big: &[f64]) -> Result<f64> {
        Ok(self.expanded(y_big)?.iter().sum())
    }

    /// Horvitz-Thompson variance estimator of [`ht_mean`](Self::ht_mean).
    pub fn ht_variance(&self, y_big: &[f64]) -> Result<f64> {
        let z = self.expanded(y_big)?;
        let pi = &self.design.pi;
        let idx = &self.indices;
        let mut v = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            v += (1.0 - pi[i]) * z[a] * z[a];
        }
        if self.design.method == SamplingMethod::SystematicPps && self.design.hajek_d > 0.0 {
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate().skip(a + 1) {
                    let pij = self.design.joint_pi(i, j);
                    if pij.is_nan() || pij <= 0.0 {
                        return Err(Error::DesignSupport { i, j });
                    }
                    v += 2.0 * (pij - pi[i] * pi[j]) / pij * z[a] * z[b];
                }
            }
        }
        Ok(v.max(0.0))
    }
}

/// `floor(1 / max_i w_i)`: the largest `n` keeping every `pi_i <= 1`.
pub fn max_feasible_n(sol: &TiltingSolution) -> usize {
    let wmax = sol.weights().iter().cloned().fold(0.0_f64, f64::max);
    (1.0 / wmax + PI_SLACK).floor() as usize
}

/// Builds `pi_i = n w_i`, rejecting `n` that would push any `pi_i` above one.
pub fn second_phase_design(sol: &TiltingSolution, n: usize, method: SamplingMethod) -> Result<SecondPhaseDesign> {
    if n == 0 {
        return Err(Error::InvalidInput("second-phase size n must be at least 1".into()));
    }
    let max_n = max_feasible_n(sol);
    if n > max_n {
        return Err(Error::InfeasibleSampleSize {
            n,
            max_feasible_n: max_n,
        });
    }
    let nf = n as f64;
    let pi: Vec<f64> = sol.weights().iter().map(|w| (nf * w).min(1.0)).collect();
    let hajek_d = pi.iter().map(|p| p * (1.0 - p)).sum();
    Ok(SecondPhaseDesign {
        pi,
        n,
        method,
        importance_weights: sol.weights().to_vec(),
        hajek_d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sol(w: &[f64]) -> TiltingSolution {
        TiltingSolution::from_weights(w.to_vec()).unwrap()
    }

    #[test]
    fn feasible_sizes() {
        assert_eq!(max_feasible_n(&sol(&[1.0; 1000])), 1000);
        assert_eq!(max_feasible_n(&sol(&[0.5, 0.3, 0.2])), 2);
        let mut w = vec![0.004];
        w.extend(std::iter::repeat_n(0.996 / 500.0, 500));
        assert_eq!(max_feasible_n(&sol(&w)), 250);
        assert_eq!(max_feasible_n(&sol(&[1.0, 1.0, 1.0])), 3);
    }

    #[test]
    fn design_probabilities() {
        let d = second_phase_design(&sol(&[1.0; 100]), 5, SamplingMethod::Poisson).unwrap();
        assert!(d.pi().iter().all(|&p| (p - 0.05).abs() < 1e-15));
        let d = second_phase_design(&sol(&[0.5, 0.3, 0.2]), 2, SamplingMethod::SystematicPps).unwrap();
        for (a, b) in d.pi().iter().zip([1.0, 0.6, 0.4]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((d.pi().iter().sum::<f64>() - 2.0).abs() < 1e-9);
        match second_phase_design(&sol(&[0.5, 0.3, 0.2]), 3, SamplingMethod::Poisson) {
            Err(Error::InfeasibleSampleSize { n: 3, max_feasible_n: 2 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn census_design() {
        let d = second_phase_design(&sol(&[1.0; 4]), 4, SamplingMethod::SystematicPps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = [1.0, 5.0, 2.0, 8.0];
        for method_design in [d.clone(), SecondPhaseDesign { method: SamplingMethod::Poisson, ..d }] {
            let s = method_design.draw(&mut rng);
            assert_eq!(s.indices(), &[0, 1, 2, 3]);
            assert!((s.ht_mean(&y).unwrap() - 4.0).abs() < 1e-15);
            assert_eq!(s.ht_variance(&y).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_unit_poisson_variance() {
        let d = SecondPhaseDesign::from_parts(vec![0.5], vec![1.0], SamplingMethod::Poisson).unwrap();
        let s = SecondPhaseSample::from_indices(&d, vec![0]).unwrap();
        assert!((s.ht_variance(&[2.0]).unwrap() - 8.0).abs() < 1e-15);
        assert!(SecondPhaseDesign::from_parts(vec![1.5], vec![1.0], SamplingMethod::Poisson).is_err());
    }

    #[test]
    fn systematic_fixed_size_and_determinism() {
        let w: Vec<f64> = (1..=50).map(|i| i as f64).collect();
        let d = second_phase_design(&sol(&w), 10, SamplingMethod::SystematicPps).unwrap();
        for seed in 0..200 {
            let a = d.draw(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = d.draw(&mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(a.realized_size(), 10);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn constant_y_fixed_size() {
        let w: Vec<f64> = (1..=30).map(|i| (i as f64).sqrt()).collect();
        let d = second_phase_design(&sol(&w), 6, SamplingMethod::SystematicPps).unwrap();
        let s = d.draw(&mut ChaCha8Rng::seed_from_u64(11));
        let m = s.ht_mean(&[3.5; 30]).unwrap();
        assert!((m - 3.5).abs() < 1e-12);
    }
}
