//! Intervention-cost measures: Gower distance, sparsity, validity, and the
//! composite loss that drives counterfactual search.

use serde::{Deserialize, Serialize};

use crate::blackbox::Predictor;
use crate::error::{Error, Result};
use crate::schema::{induced_partition, Domain, Instance, Schema};

/// Weights of the composite loss: `gower * γ + sparsity * ‖z−x‖₀/d +
/// validity * [f(z) ≠ t]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gower: f64,
    pub sparsity: f64,
    pub validity: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { gower: 0.5, sparsity: 0.5, validity: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Gower distance γ(z, x) in [0, 1].
    pub gower: f64,
    /// Fraction of changed features, ‖z−x‖₀ / d.
    pub sparsity: f64,
    /// 0 when the predictor maps z to the target class, else 1.
    pub validity: f64,
    /// Weighted sum of the three terms.
    pub total: f64,
}

impl LossBreakdown {
    pub fn compose(gower: f64, sparsity: f64, validity: f64, weights: &LossWeights) -> Self {
        LossBreakdown {
            gower,
            sparsity,
            validity,
            total: weights.gower * gower + weights.sparsity * sparsity + weights.validity * validity,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.validity == 0.0
    }
}

/// Gower distance: the mean over features of `|z_i − x_i| / (max_i − min_i)`
/// for numericals and a 0/1 mismatch for categoricals. Lies in [0, 1] for
/// in-domain instances.
pub fn gower(schema: &Schema, x: &Instance, z: &Instance) -> f64 {
    debug_assert_eq!(x.len(), schema.d());
    debug_assert_eq!(z.len(), schema.d());
    let mut sum = 0.0;
    for (i, feature) in schema.features.iter().enumerate() {
        match feature.domain {
            Domain::Numerical { .. } => sum += (z.num(i) - x.num(i)).abs() / feature.range(),
            Domain::Categorical { .. } => sum += f64::from(z.cat(i) != x.cat(i)),
        }
    }
    sum / schema.d() as f64
}

/// Fraction of features changed under the given tolerance.
pub fn sparsity(schema: &Schema, x: &Instance, z: &Instance, tol_abs: f64) -> f64 {
    induced_partition(schema, x, z, tol_abs).c.len() as f64 / schema.d() as f64
}

/// The composite loss. One predictor call.
pub fn loss(
    schema: &Schema,
    x: &Instance,
    z: &Instance,
    predictor: &dyn Predictor,
    target: usize,
    weights: &LossWeights,
    tol_abs: f64,
) -> LossBreakdown {
    let validity = f64::from(predictor.predict(z) != target);
    LossBreakdown::compose(gower(schema, x, z), sparsity(schema, x, z, tol_abs), validity, weights)
}

/// Cost of carrying out an intervention, ignoring validity: with default
/// weights, `½ γ(z, x) + ½ ‖z−x‖₀/d`.
pub fn intervention_cost(schema: &Schema, x: &Instance, z: &Instance, tol_abs: f64) -> f64 {
    let w = LossWeights::default();
    w.gower * gower(schema, x, z) + w.sparsity * sparsity(schema, x, z, tol_abs)
}

/// The generic distance `‖z−x‖₁ + λ‖z−x‖₀` in raw feature units; categorical
/// features contribute their mismatch to both norms. Kept for API
/// completeness next to the Gower-based cost actually used by the search.
pub fn generic_delta(schema: &Schema, x: &Instance, z: &Instance, lambda: f64, tol_abs: f64) -> f64 {
    let mut l1 = 0.0;
    for (i, feature) in schema.features.iter().enumerate() {
        match feature.domain {
            Domain::Numerical { .. } => l1 += (z.num(i) - x.num(i)).abs(),
            Domain::Categorical { .. } => l1 += f64::from(z.cat(i) != x.cat(i)),
        }
    }
    l1 + lambda * induced_partition(schema, x, z, tol_abs).c.len() as f64
}

/// Which terms the post-perturbation correction move is charged for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionCost {
    /// Correction pays Gower and sparsity, like the original intervention.
    #[default]
    GowerAndSparsity,
    /// Correction pays the Gower term only.
    GowerOnly,
}

/// Cost of reaching the intended point once a perturbation has landed the
/// user on `z_perturbed`, relative to the cost of the intended intervention.
///
/// If the perturbed point still classifies as the target no correction is
/// needed and the ratio is exactly 1; otherwise the numerator adds the
/// correction move from `z_perturbed` back to `z_intended`.
pub fn relative_cost(
    schema: &Schema,
    x: &Instance,
    z_intended: &Instance,
    z_perturbed: &Instance,
    predictor: &dyn Predictor,
    target: usize,
    tol_abs: f64,
) -> Result<f64> {
    relative_cost_with(
        schema,
        x,
        z_intended,
        z_perturbed,
        predictor,
        target,
        tol_abs,
        CorrectionCost::default(),
    )
}

pub fn relative_cost_with(
    schema: &Schema,
    x: &Instance,
    z_intended: &Instance,
    z_perturbed: &Instance,
    predictor: &dyn Predictor,
    target: usize,
    tol_abs: f64,
    correction: CorrectionCost,
) -> Result<f64> {
    let ideal = intervention_cost(schema, x, z_intended, tol_abs);
    if ideal <= 0.0 {
        return Err(Error::ZeroIdealCost);
    }
    if predictor.predict(z_perturbed) == target {
        return Ok(1.0);
    }
    let w = LossWeights::default();
    let correction_cost = match correction {
        CorrectionCost::GowerAndSparsity => intervention_cost(schema, z_perturbed, z_intended, tol_abs),
        CorrectionCost::GowerOnly => w.gower * gower(schema, z_perturbed, z_intended),
    };
    Ok((ideal + correction_cost) / ideal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::FnPredictor;
    use crate::schema::{Constraint, Feature, Perturbation, Value, DEFAULT_TOL_ABS};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn num_feature(name: &str, min: f64, max: f64) -> Feature {
        Feature {
            name: name.into(),
            domain: Domain::Numerical { min, max },
            constraint: Constraint::None,
            perturbation: Perturbation::Numerical {
                max_decrease: 0.0,
                max_increase: 0.0,
                relative: false,
            },
        }
    }

    fn cat_feature(name: &str, k: usize) -> Feature {
        Feature {
            name: name.into(),
            domain: Domain::Categorical {
                categories: (0..k).map(|i| format!("c{}", i)).collect(),
            },
            constraint: Constraint::None,
            perturbation: Perturbation::Categorical { reachable: vec![] },
        }
    }

    fn schema(features: Vec<Feature>) -> Schema {
        Schema { features, class_names: vec!["n".into(), "p".into()], target_class: 1 }
    }

    #[test]
    fn gower_mixed_example() {
        // one numerical feature at half range plus one categorical mismatch
        let s = schema(vec![num_feature("a", 0.0, 10.0), cat_feature("b", 3)]);
        let x = Instance::new(vec![Value::Num(2.0), Value::Cat(0)]);
        let z = Instance::new(vec![Value::Num(7.0), Value::Cat(2)]);
        assert_abs_diff_eq!(gower(&s, &x, &z), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(gower(&s, &x, &x), 0.0);
    }

    #[test]
    fn loss_single_change_example() {
        // d = 4, one numerical feature moved by half its range, prediction on
        // target: total = 0.5 * (0.5/4) + 0.5 * (1/4) + 0 = 0.1875
        let s = schema(vec![
            num_feature("a", 0.0, 1.0),
            num_feature("b", 0.0, 1.0),
            num_feature("c", 0.0, 1.0),
            num_feature("d", 0.0, 1.0),
        ]);
        let x = Instance::new(vec![Value::Num(0.0); 4]);
        let mut z = x.clone();
        z.values[1] = Value::Num(0.5);
        let predictor = FnPredictor(|_: &Instance| 1usize);
        let b = loss(&s, &x, &z, &predictor, 1, &LossWeights::default(), DEFAULT_TOL_ABS);
        assert_abs_diff_eq!(b.gower, 0.125, epsilon = 1e-15);
        assert_abs_diff_eq!(b.sparsity, 0.25, epsilon = 1e-15);
        assert_eq!(b.validity, 0.0);
        assert_abs_diff_eq!(b.total, 0.1875, epsilon = 1e-15);
        assert!(b.is_valid());
    }

    #[test]
    fn invalid_prediction_adds_unit_validity() {
        let s = schema(vec![num_feature("a", 0.0, 1.0)]);
        let x = Instance::new(vec![Value::Num(0.0)]);
        let z = Instance::new(vec![Value::Num(0.2)]);
        let predictor = FnPredictor(|_: &Instance| 0usize);
        let b = loss(&s, &x, &z, &predictor, 1, &LossWeights::default(), DEFAULT_TOL_ABS);
        assert_eq!(b.validity, 1.0);
        assert!(b.total >= 1.0);
        assert!(!b.is_valid());
    }

    #[test]
    fn intervention_cost_single_categorical_change() {
        // d = 2: cost = 0.5 * (1/2) + 0.5 * (1/2) = 0.5
        let s = schema(vec![cat_feature("a", 2), num_feature("b", 0.0, 1.0)]);
        let x = Instance::new(vec![Value::Cat(0), Value::Num(0.3)]);
        let z = Instance::new(vec![Value::Cat(1), Value::Num(0.3)]);
        assert_abs_diff_eq!(intervention_cost(&s, &x, &z, DEFAULT_TOL_ABS), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn generic_delta_counts_units_and_changes() {
        let s = schema(vec![num_feature("a", 0.0, 10.0), cat_feature("b", 3)]);
        let x = Instance::new(vec![Value::Num(2.0), Value::Cat(0)]);
        let z = Instance::new(vec![Value::Num(5.0), Value::Cat(1)]);
        // L1 = 3 + 1, L0 = 2
        assert_abs_diff_eq!(generic_delta(&s, &x, &z, 0.5, DEFAULT_TOL_ABS), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn relative_cost_examples() {
        let s = schema(vec![num_feature("a", 0.0, 10.0)]);
        let x = Instance::new(vec![Value::Num(0.0)]);
        let z = Instance::new(vec![Value::Num(4.0)]);
        let perturbed = Instance::new(vec![Value::Num(2.0)]);
        // Perturbed point still on target: exactly 1.
        let always = FnPredictor(|_: &Instance| 1usize);
        assert_eq!(relative_cost(&s, &x, &z, &perturbed, &always, 1, DEFAULT_TOL_ABS).unwrap(), 1.0);
        // Invalidated: (ideal + correction) / ideal.
        let never = FnPredictor(|_: &Instance| 0usize);
        let ideal = intervention_cost(&s, &x, &z, DEFAULT_TOL_ABS);
        let corr = intervention_cost(&s, &perturbed, &z, DEFAULT_TOL_ABS);
        let got = relative_cost(&s, &x, &z, &perturbed, &never, 1, DEFAULT_TOL_ABS).unwrap();
        assert_abs_diff_eq!(got, (ideal + corr) / ideal, epsilon = 1e-15);
        assert!(got > 1.0);
        // Gower-only correction is cheaper.
        let gower_only = relative_cost_with(
            &s, &x, &z, &perturbed, &never, 1, DEFAULT_TOL_ABS, CorrectionCost::GowerOnly,
        )
        .unwrap();
        assert!(gower_only < got);
        assert!(gower_only > 1.0);
    }

    #[test]
    fn relative_cost_ratio_value() {
        // ideal cost 0.2, correction 0.3 → ratio 2.5
        let s = schema(vec![
            num_feature("a", 0.0, 1.0),
            num_feature("b", 0.0, 1.0),
            num_feature("c", 0.0, 1.0),
            num_feature("d", 0.0, 1.0),
            num_feature("e", 0.0, 1.0),
        ]);
        let x = Instance::new(vec![Value::Num(0.0); 5]);
        let mut z = x.clone();
        z.values[0] = Value::Num(0.5); // gower 0.1, sparsity 0.2 → cost 0.15
        let mut perturbed = z.clone();
        perturbed.values[0] = Value::Num(0.0);
        perturbed.values[1] = Value::Num(0.5);
        let never = FnPredictor(|_: &Instance| 0usize);
        // correction: two features move by 0.5 → gower 0.2, sparsity 0.4 → 0.3
        let got = relative_cost(&s, &x, &z, &perturbed, &never, 1, DEFAULT_TOL_ABS).unwrap();
        assert_abs_diff_eq!(got, (0.15 + 0.3) / 0.15, epsilon = 1e-12);
    }

    #[test]
    fn zero_ideal_cost_is_an_error() {
        let s = schema(vec![num_feature("a", 0.0, 1.0)]);
        let x = Instance::new(vec![Value::Num(0.4)]);
        let never = FnPredictor(|_: &Instance| 0usize);
        let err = relative_cost(&s, &x, &x.clone(), &x.clone(), &never, 1, DEFAULT_TOL_ABS).unwrap_err();
        assert!(matches!(err, Error::ZeroIdealCost));
    }

    proptest! {
        #[test]
        fn gower_is_symmetric_and_bounded(
            a in 0f64..=10f64, b in 0f64..=10f64,
            ca in 0usize..3, cb in 0usize..3,
        ) {
            let s = schema(vec![num_feature("a", 0.0, 10.0), cat_feature("b", 3)]);
            let x = Instance::new(vec![Value::Num(a), Value::Cat(ca)]);
            let z = Instance::new(vec![Value::Num(b), Value::Cat(cb)]);
            let g = gower(&s, &x, &z);
            prop_assert!((0.0..=1.0).contains(&g));
            prop_assert_eq!(g, gower(&s, &z, &x));
        }

        #[test]
        fn valid_points_stay_below_validity_weight(
            a in 0f64..10f64, b in 0f64..10f64,
        ) {
            // A total below the validity weight certifies validity.
            let s = schema(vec![num_feature("a", 0.0, 10.0), num_feature("b", 0.0, 10.0)]);
            let x = Instance::new(vec![Value::Num(a), Value::Num(b)]);
            let z = Instance::new(vec![Value::Num(b), Value::Num(a)]);
            let w = LossWeights::default();
            let valid = FnPredictor(|_: &Instance| 1usize);
            let invalid = FnPredictor(|_: &Instance| 0usize);
            let lv = loss(&s, &x, &z, &valid, 1, &w, DEFAULT_TOL_ABS);
            let li = loss(&s, &x, &z, &invalid, 1, &w, DEFAULT_TOL_ABS);
            prop_assert!(lv.total <= w.validity);
            prop_assert!(li.total >= w.validity);
        }
    }
}
