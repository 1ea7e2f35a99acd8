//! Monotone aggregate distance functions.
//!
//! In most-similar mode the components are per-neuron absolute differences to
//! the target; in highest mode they are the raw activations clamped at zero
//! and a larger aggregate ranks higher. Every function here is monotone in
//! each component, which is what makes threshold-based termination sound.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{EverestError, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub enum DistanceFn {
    L1,
    #[default]
    L2,
    Linf,
    /// `sqrt(sum w_i * x_i^2)` with non-negative weights, one per group member.
    WeightedL2(Vec<f32>),
}

impl DistanceFn {
    /// Aggregates `components`, rejecting negative or non-finite entries.
    pub fn aggregate(&self, components: &[f64]) -> Result<f64> {
        if let Some(c) = components.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            return Err(EverestError::ContractViolation(format!(
                "distance components must be finite and non-negative, got {c}"
            )));
        }
        if let DistanceFn::WeightedL2(w) = self {
            if w.len() != components.len() {
                return Err(EverestError::ContractViolation(format!(
                    "{} weights for {} components",
                    w.len(),
                    components.len()
                )));
            }
        }
        Ok(self.aggregate_unchecked(components))
    }

    /// Same as [`aggregate`](Self::aggregate) without validation. Components
    /// may be `+inf`, which propagates.
    #[inline]
    pub fn aggregate_unchecked(&self, components: &[f64]) -> f64 {
        match self {
            DistanceFn::L1 => components.iter().sum(),
            DistanceFn::L2 => components.iter().map(|c| c * c).sum::<f64>().sqrt(),
            DistanceFn::Linf => components.iter().copied().fold(0.0, f64::max),
            DistanceFn::WeightedL2(w) => components
                .iter()
                .zip(w)
                // a zero weight must silence an infinite component
                .map(|(c, w)| if *w == 0.0 { 0.0 } else { *w as f64 * c * c })
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn validate_for_group(&self, group_len: usize) -> Result<()> {
        if let DistanceFn::WeightedL2(w) = self {
            if w.len() != group_len {
                return Err(EverestError::InvalidQuery(format!(
                    "weighted l2 has {} weights for a group of {group_len}",
                    w.len()
                )));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(EverestError::InvalidQuery("weights must be finite and >= 0".into()));
            }
        }
        Ok(())
    }
}

impl fmt::Display for DistanceFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistanceFn::L1 => f.write_str("l1"),
            DistanceFn::L2 => f.write_str("l2"),
            DistanceFn::Linf => f.write_str("linf"),
            DistanceFn::WeightedL2(w) => {
                f.write_str("wl2:")?;
                for (i, x) in w.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for DistanceFn {
    type Err = EverestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "l1" => Ok(DistanceFn::L1),
            "l2" => Ok(DistanceFn::L2),
            "linf" => Ok(DistanceFn::Linf),
            other => {
                let Some(rest) = other.strip_prefix("wl2:") else {
                    return Err(EverestError::InvalidQuery(format!("unknown distance {other:?}")));
                };
                let weights = rest
                    .split(',')
                    .map(|w| {
                        w.trim()
                            .parse::<f32>()
                            .map_err(|e| EverestError::InvalidQuery(format!("bad weight {w:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(EverestError::InvalidQuery("weights must be finite and >= 0".into()));
                }
                Ok(DistanceFn::WeightedL2(weights))
            }
        }
    }
}

impl Serialize for DistanceFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DistanceFn {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum QueryMode {
    /// Rank by distance to the target input's activations, ascending.
    #[default]
    #[serde(rename = "similar", alias = "most_similar")]
    MostSimilar,
    /// Rank by the aggregate of the activations themselves, descending.
    #[serde(rename = "highest")]
    Highest,
}

impl FromStr for QueryMode {
    type Err = EverestError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similar" | "most_similar" => Ok(QueryMode::MostSimilar),
            "highest" => Ok(QueryMode::Highest),
            other => Err(EverestError::InvalidQuery(format!("unknown mode {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn l2_of_three_four_is_five() {
        assert_eq!(DistanceFn::L2.aggregate(&[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn zero_vector_is_zero_for_every_kind() {
        for f in [
            DistanceFn::L1,
            DistanceFn::L2,
            DistanceFn::Linf,
            DistanceFn::WeightedL2(vec![2.0, 0.5, 1.0]),
        ] {
            assert_eq!(f.aggregate(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn worked_example_l1() {
        // |1.2-1.1| + |1.1-1.1| + |1.4-1.2| in f32 inputs
        let c: Vec<f64> = [(1.2f32, 1.1f32), (1.1, 1.1), (1.4, 1.2)]
            .iter()
            .map(|(a, b)| (*a as f64 - *b as f64).abs())
            .collect();
        assert!((DistanceFn::L1.aggregate(&c).unwrap() - 0.3).abs() < 1e-6);
    }

    #[test]
    fn negative_component_is_a_contract_violation() {
        assert!(matches!(
            DistanceFn::L1.aggregate(&[1.0, -0.5]),
            Err(EverestError::ContractViolation(_))
        ));
    }

    #[test]
    fn names_round_trip() {
        for name in ["l1", "l2", "linf", "wl2:1,0.5,2"] {
            let f: DistanceFn = name.parse().unwrap();
            assert_eq!(f.to_string(), name);
        }
        assert!("cosine".parse::<DistanceFn>().is_err());
        assert!("wl2:1,-1".parse::<DistanceFn>().is_err());
    }

    fn any_fn(len: usize) -> impl Strategy<Value = DistanceFn> {
        prop_oneof![
            Just(DistanceFn::L1),
            Just(DistanceFn::L2),
            Just(DistanceFn::Linf),
            prop::collection::vec(0.0f32..4.0, len).prop_map(DistanceFn::WeightedL2),
        ]
    }

    proptest! {
        #[test]
        fn monotone_in_every_component(
            (f, base, bump) in (1usize..12).prop_flat_map(|n| (
                any_fn(n),
                prop::collection::vec(0.0f64..100.0, n),
                prop::collection::vec(0.0f64..10.0, n),
            ))
        ) {
            let raised: Vec<f64> = base.iter().zip(&bump).map(|(a, b)| a + b).collect();
            let lo = f.aggregate(&base).unwrap();
            let hi = f.aggregate(&raised).unwrap();
            prop_assert!(lo >= 0.0);
            prop_assert!(lo <= hi, "{f}: {lo} > {hi}");
        }
    }
}
