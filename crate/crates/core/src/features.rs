//! Static feature extraction and the normalized Euclidean metric used for
//! neighbour retrieval.

use std::collections::HashMap;

use thiserror::Error;

use crate::problem::{Constraint, Objective, ProblemDescriptor, Relation};

/// Schema id of the built-in extractor.
pub const BUILTIN_SCHEMA: &str = "mpd16-v1";
/// Dimension of the built-in extractor.
pub const BUILTIN_DIMENSION: usize = 16;
/// Zero-based position of the objective flag (0 sat, 1 min, 2 max) in the
/// built-in schema.
pub const OBJECTIVE_FLAG_INDEX: usize = 13;

const LOG_DOMAIN_CAP: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot fit normalization bounds on an empty set of vectors")]
    EmptyInput,
    #[error("feature {index} is not finite")]
    NonFinite { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    schema: String,
}

impl FeatureVector {
    pub fn new(schema: impl Into<String>, values: Vec<f64>) -> Result<Self, FeatureError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite { index });
        }
        Ok(FeatureVector {
            values,
            schema: schema.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn schema(&self) -> &str {
        &self.schema
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// Per-feature `(min, max)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationBounds {
    bounds: Vec<(f64, f64)>,
}

impl NormalizationBounds {
    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }
}

/// Computes the built-in 16-entry static feature vector.
///
/// Entries, in order: variable count, constraint count, constraints per
/// variable, min/max/mean domain size, log2 of the domain-size product,
/// LINEAR count, ALLDIFF count, fraction of `=` among LINEAR, mean
/// constraint arity, max/mean variable degree, objective flag, objective
/// arity and objective coefficient magnitude sum. Arities and degrees count
/// distinct variables.
pub fn extract_features(problem: &ProblemDescriptor) -> FeatureVector {
    let vars = problem.variables();
    let cons = problem.constraints();
    let n_vars = vars.len() as f64;
    let n_cons = cons.len() as f64;

    let sizes: Vec<f64> = vars.iter().map(|v| v.domain_size() as f64).collect();
    let (min_dom, max_dom, mean_dom) = if sizes.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (
            sizes.iter().copied().fold(f64::INFINITY, f64::min),
            sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sizes.iter().sum::<f64>() / n_vars,
        )
    };
    let log_product = sizes.iter().map(|s| s.log2()).sum::<f64>().min(LOG_DOMAIN_CAP);

    let mut linear = 0usize;
    let mut equalities = 0usize;
    let mut alldiff = 0usize;
    let mut arity_sum = 0usize;
    let mut degree: HashMap<&str, usize> = HashMap::new();
    for con in cons {
        match con {
            Constraint::Linear { relation, .. } => {
                linear += 1;
                if *relation == Relation::Eq {
                    equalities += 1;
                }
            }
            Constraint::AllDifferent(_) => alldiff += 1,
        }
        let scope = con.variables();
        arity_sum += scope.len();
        for v in scope {
            *degree.entry(v).or_default() += 1;
        }
    }
    let max_degree = degree.values().copied().max().unwrap_or(0) as f64;
    let mean_degree = if vars.is_empty() {
        0.0
    } else {
        degree.values().sum::<usize>() as f64 / n_vars
    };

    let (flag, obj_arity, obj_magnitude) = match problem.objective() {
        Objective::Satisfy => (0.0, 0.0, 0.0),
        Objective::Minimize(e) | Objective::Maximize(e) => {
            let flag = if matches!(problem.objective(), Objective::Minimize(_)) {
                1.0
            } else {
                2.0
            };
            let magnitude: f64 = e.terms.iter().map(|(c, _)| (*c as f64).abs()).sum();
            (flag, e.variables().len() as f64, magnitude)
        }
    };

    let values = vec![
        n_vars,
        n_cons,
        if vars.is_empty() { 0.0 } else { n_cons / n_vars },
        min_dom,
        max_dom,
        mean_dom,
        log_product,
        linear as f64,
        alldiff as f64,
        if linear == 0 {
            0.0
        } else {
            equalities as f64 / linear as f64
        },
        if cons.is_empty() {
            0.0
        } else {
            arity_sum as f64 / n_cons
        },
        max_degree,
        mean_degree,
        flag,
        obj_arity,
        obj_magnitude,
    ];
    debug_assert_eq!(values.len(), BUILTIN_DIMENSION);
    FeatureVector {
        values,
        schema: BUILTIN_SCHEMA.to_string(),
    }
}

/// Per-feature min/max over `vectors`.
pub fn fit_normalization(vectors: &[FeatureVector]) -> Result<NormalizationBounds, FeatureError> {
    let first = vectors.first().ok_or(FeatureError::EmptyInput)?;
    let dim = first.dimension();
    let mut bounds: Vec<(f64, f64)> = first.values.iter().map(|&v| (v, v)).collect();
    for vector in &vectors[1..] {
        if vector.dimension() != dim {
            return Err(FeatureError::DimensionMismatch {
                expected: dim,
                found: vector.dimension(),
            });
        }
        for (b, &v) in bounds.iter_mut().zip(&vector.values) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    Ok(NormalizationBounds { bounds })
}

/// Maps each entry to `[-1, 1]`. Constant features map to 0 and values
/// outside the fitted range are clamped.
pub fn normalize(
    vector: &FeatureVector,
    bounds: &NormalizationBounds,
) -> Result<FeatureVector, FeatureError> {
    if vector.dimension() != bounds.dimension() {
        return Err(FeatureError::DimensionMismatch {
            expected: bounds.dimension(),
            found: vector.dimension(),
        });
    }
    let values = vector
        .values
        .iter()
        .zip(&bounds.bounds)
        .map(|(&x, &(lo, hi))| {
            if hi <= lo {
                0.0
            } else {
                (2.0 * (x - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect();
    Ok(FeatureVector {
        values,
        schema: vector.schema.clone(),
    })
}

/// Euclidean distance.
pub fn distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64, FeatureError> {
    if a.dimension() != b.dimension() {
        return Err(FeatureError::DimensionMismatch {
            expected: a.dimension(),
            found: b.dimension(),
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;

    fn fv(values: &[f64]) -> FeatureVector {
        FeatureVector::new("test", values.to_vec()).unwrap()
    }

    #[test]
    fn single_variable_sat() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ SAT").unwrap();
        let f = extract_features(&p);
        let expected = [
            1.0, 0.0, 0.0, 6.0, 6.0, 6.0, 6f64.log2(), 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
            0.0,
        ];
        assert_eq!(f.values(), &expected);
        assert_eq!(f.schema(), BUILTIN_SCHEMA);
    }

    #[test]
    fn objective_features() {
        let p = parse_problem("PROBLEM t\nVAR x INT 0 5\nOBJ MIN x").unwrap();
        assert_eq!(&extract_features(&p).values()[13..], &[1.0, 1.0, 1.0]);
        let q = parse_problem("PROBLEM t\nVAR x INT 0 5\nVAR y INT 0 5\nOBJ MAX 2*x - 3*y + x")
            .unwrap();
        assert_eq!(&extract_features(&q).values()[13..], &[2.0, 2.0, 6.0]);
    }

    #[test]
    fn log_product_is_capped() {
        let mut text = String::from("PROBLEM big\n");
        for i in 0..20_000 {
            text.push_str(&format!("VAR v{i} INT 0 {}\n", i64::MAX - 1));
        }
        text.push_str("OBJ SAT\n");
        let p = parse_problem(&text).unwrap();
        assert_eq!(extract_features(&p).values()[6], 1e6);
    }

    #[test]
    fn fit_examples() {
        let v = fv(&[1.0, 2.0]);
        let b = fit_normalization(std::slice::from_ref(&v)).unwrap();
        assert_eq!(b.bounds(), &[(1.0, 1.0), (2.0, 2.0)]);
        let b = fit_normalization(&[fv(&[0.0, 5.0]), fv(&[10.0, 5.0])]).unwrap();
        assert_eq!(b.bounds()[0], (0.0, 10.0));
        assert_eq!(fit_normalization(&[]), Err(FeatureError::EmptyInput));
        assert!(matches!(
            fit_normalization(&[fv(&[0.0]), fv(&[0.0, 1.0])]),
            Err(FeatureError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn normalize_examples() {
        let b = fit_normalization(&[fv(&[0.0, 3.0]), fv(&[10.0, 3.0])]).unwrap();
        let n = |x: f64, y: f64| normalize(&fv(&[x, y]), &b).unwrap().values().to_vec();
        assert_eq!(n(0.0, 3.0), vec![-1.0, 0.0]);
        assert_eq!(n(10.0, 7.0), vec![1.0, 0.0]);
        assert_eq!(n(5.0, -100.0), vec![0.0, 0.0]);
        assert_eq!(n(25.0, 3.0)[0], 1.0);
        assert_eq!(n(-4.0, 3.0)[0], -1.0);
        assert!(normalize(&fv(&[1.0]), &b).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = fv(&[0.0, 0.0]);
        let b = fv(&[3.0, 4.0]);
        assert_eq!(distance(&a, &b).unwrap(), 5.0);
        assert_eq!(distance(&b, &b).unwrap(), 0.0);
        assert!(distance(&a, &fv(&[1.0])).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(
            FeatureVector::new("s", vec![0.0, f64::NAN]),
            Err(FeatureError::NonFinite { index: 1 })
        );
    }
}
