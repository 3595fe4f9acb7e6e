//! Size model and rate planners.
//!
//! The explicit compact cloud costs `P_bit = 3*(BD_p + BD_s) + k_c*BD_c +
//! BD_o + k_r*BD_r` bits per primitive before entropy coding; dividing by
//! the assumed downstream lossless ratio `L` predicts the coded size. Two
//! planners work the constraint side: method 1 picks the largest primitive
//! count that fits the budget (met by progressive pruning), method 2 the
//! smallest uniform attribute bit-depth reduction with positions untouched.

use crate::error::{Error, Result};
use crate::geometry::{plan_schedule, PruneSchedule};

/// Bit depths, latent widths, and the assumed downstream lossless ratio.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateModel {
    pub bd_p: u8,
    pub bd_c: u8,
    pub bd_o: u8,
    pub bd_s: u8,
    pub bd_r: u8,
    pub k_c: u8,
    pub k_r: u8,
    /// Assumed lossless compression ratio of the entropy stage.
    pub lossless_ratio: f64,
}

impl RateModel {
    pub fn new(bd: u8, k_c: u8, k_r: u8, lossless_ratio: f64) -> Self {
        RateModel {
            bd_p: bd,
            bd_c: bd,
            bd_o: bd,
            bd_s: bd,
            bd_r: bd,
            k_c,
            k_r,
            lossless_ratio,
        }
    }

    /// Bits per primitive before entropy coding.
    pub fn bits_per_primitive(&self) -> u64 {
        3 * (self.bd_p as u64 + self.bd_s as u64)
            + self.k_c as u64 * self.bd_c as u64
            + self.bd_o as u64
            + self.k_r as u64 * self.bd_r as u64
    }

    /// Predicted coded size in bytes: `n * P_bit / (8 * L)`.
    pub fn estimate_size(&self, n: u64) -> f64 {
        n as f64 * self.bits_per_primitive() as f64 / (8.0 * self.lossless_ratio)
    }

    /// Bits saved per primitive and unit of uniform attribute BD reduction,
    /// `k_c + 1 + 3 + k_r`.
    pub fn reduction_gain(&self) -> u64 {
        self.k_c as u64 + 1 + 3 + self.k_r as u64
    }

    /// All attribute bit depths reduced by `delta`; positions untouched.
    fn reduce(&self, delta: u8) -> RateModel {
        RateModel {
            bd_c: self.bd_c - delta,
            bd_o: self.bd_o - delta,
            bd_s: self.bd_s - delta,
            bd_r: self.bd_r - delta,
            ..*self
        }
    }
}

/// Per-primitive pre-codec component sizes in bytes, the Table-style rate
/// allocation accounting.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ComponentSizes {
    pub position: f64,
    pub color: f64,
    pub opacity: f64,
    pub scale: f64,
    pub rotation: f64,
}

impl ComponentSizes {
    pub fn total(&self) -> f64 {
        self.position + self.color + self.opacity + self.scale + self.rotation
    }
}

/// Exact `n * channels * BD / 8` bytes per component before entropy coding.
pub fn pre_codec_sizes(model: &RateModel, n: u64) -> ComponentSizes {
    let n = n as f64;
    ComponentSizes {
        position: n * 3.0 * model.bd_p as f64 / 8.0,
        color: n * model.k_c as f64 * model.bd_c as f64 / 8.0,
        opacity: n * model.bd_o as f64 / 8.0,
        scale: n * 3.0 * model.bd_s as f64 / 8.0,
        rotation: n * model.k_r as f64 * model.bd_r as f64 / 8.0,
    }
}

/// Bytes per MiB, the unit used in size reports.
pub const MIB: f64 = 1024.0 * 1024.0;

/// Epoch marks handed through to the schedule planner.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ScheduleInputs {
    pub total_epochs: u64,
    pub densify_end: u64,
    pub prune_start: u64,
    pub unique_end: u64,
    pub interval: u64,
}

impl Default for ScheduleInputs {
    fn default() -> Self {
        ScheduleInputs {
            total_epochs: 70_000,
            densify_end: 15_000,
            prune_start: 36_000,
            unique_end: 66_000,
            interval: 2_500,
        }
    }
}

/// Method 1: largest primitive count whose predicted size fits `budget`
/// bytes, plus the progressive pruning schedule that reaches it.
pub fn plan_method1(
    budget: u64,
    model: &RateModel,
    n_top: u64,
    schedule: &ScheduleInputs,
) -> Result<(u64, PruneSchedule)> {
    if budget == 0 {
        return Err(Error::InfeasibleRate("budget is zero".into()));
    }
    let p_bit = model.bits_per_primitive() as f64;
    let n_target = (budget as f64 * model.lossless_ratio * 8.0 / p_bit).floor() as u64;
    if n_target < 1 {
        return Err(Error::InfeasibleRate(format!(
            "budget {budget} B cannot fit a single {p_bit}-bit primitive at L = {}",
            model.lossless_ratio
        )));
    }
    let n_target = n_target.min(n_top);
    let sched = plan_schedule(
        schedule.total_epochs,
        schedule.densify_end,
        schedule.prune_start,
        schedule.unique_end,
        schedule.interval,
        n_top,
        n_target,
    )?;
    Ok((n_target, sched))
}

/// Method 2 result: the minimal uniform reduction, the reduced model, and
/// the progressive unit steps that walk down to it.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DeltaPlan {
    pub delta: u8,
    pub reduced: RateModel,
    /// Models after each unit step, ending at `reduced`.
    pub steps: Vec<RateModel>,
}

/// Method 2: smallest integer `delta >= 0` such that reducing every
/// attribute bit depth by `delta` fits the budget. Position bit depth is
/// untouched and no attribute drops below 1 bit.
pub fn plan_method2(budget: u64, model: &RateModel, n: u64) -> Result<DeltaPlan> {
    if budget == 0 {
        return Err(Error::InfeasibleRate("budget is zero".into()));
    }
    let l8 = 8.0 * model.lossless_ratio;
    let position_floor = n as f64 * 3.0 * model.bd_p as f64 / l8;
    if position_floor > budget as f64 {
        return Err(Error::InfeasibleRate(format!(
            "position channel alone needs {position_floor:.0} B against a budget of {budget} B"
        )));
    }

    let max_delta = model.bd_c.min(model.bd_o).min(model.bd_s).min(model.bd_r) - 1;
    let fits = |delta: u8| model.reduce(delta).estimate_size(n) <= budget as f64;
    let delta = (0..=max_delta).find(|&d| fits(d)).ok_or_else(|| {
        Error::InfeasibleRate(format!(
            "budget unmet even at 1-bit attributes: {:.0} B > {budget} B",
            model.reduce(max_delta).estimate_size(n)
        ))
    })?;

    Ok(DeltaPlan {
        delta,
        reduced: model.reduce(delta),
        steps: (1..=delta).map(|d| model.reduce(d)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bits_per_primitive_reference_values() {
        assert_eq!(RateModel::new(16, 3, 2, 1.3).bits_per_primitive(), 192);
        assert_eq!(RateModel::new(16, 6, 2, 1.3).bits_per_primitive(), 240);
        let degenerate = RateModel {
            k_c: 0,
            k_r: 0,
            bd_o: 0,
            ..RateModel::new(16, 0, 0, 1.0)
        };
        assert_eq!(degenerate.bits_per_primitive(), 3 * (16 + 16));
    }

    #[test]
    fn estimate_size_examples() {
        let m = RateModel::new(16, 3, 2, 1.0);
        assert_eq!(m.estimate_size(0), 0.0);
        assert_eq!(m.estimate_size(1_286_284), 30_870_816.0);
        assert!((m.estimate_size(1_286_284) / MIB - 29.44).abs() < 0.01);
        let m13 = RateModel::new(16, 3, 2, 1.3);
        let ratio = m.estimate_size(77_777) / m13.estimate_size(77_777);
        assert!((ratio - 1.3).abs() < 1e-12);
    }

    #[test]
    fn pre_codec_component_accounting() {
        let m = RateModel::new(16, 3, 2, 1.3);
        let dance = pre_codec_sizes(&m, 56_490);
        assert_eq!(dance.position, 338_940.0);
        assert_eq!(dance.color, 338_940.0);
        assert_eq!(dance.scale, 338_940.0);
        assert_eq!(dance.opacity, 112_980.0);
        assert_eq!(dance.rotation, 225_960.0);
        // components sum to n * P_bit / 8
        assert_eq!(dance.total(), 56_490.0 * 192.0 / 8.0);
    }

    #[test]
    fn method1_reference_target() {
        let m = RateModel::new(16, 3, 2, 1.3);
        let (n_target, sched) =
            plan_method1(1 << 20, &m, 1_000_000, &ScheduleInputs::default()).unwrap();
        assert_eq!(n_target, 56_797);
        assert_eq!(sched.events.len(), 13);
        // tightness: the chosen count fits, one more does not
        assert!(m.estimate_size(n_target) <= (1u64 << 20) as f64);
        assert!(m.estimate_size(n_target + 1) > (1u64 << 20) as f64);
    }

    #[test]
    fn method1_under_budget_needs_no_pruning() {
        let m = RateModel::new(16, 3, 2, 1.3);
        let (n_target, sched) =
            plan_method1(100 << 20, &m, 10_000, &ScheduleInputs::default()).unwrap();
        assert_eq!(n_target, 10_000);
        assert!(sched.events.is_empty());
    }

    #[test]
    fn method1_zero_capacity_is_infeasible() {
        let m = RateModel::new(16, 3, 2, 1.3);
        assert!(matches!(
            plan_method1(10, &m, 1000, &ScheduleInputs::default()),
            Err(Error::InfeasibleRate(_))
        ));
    }

    #[test]
    fn method1_tightness_across_budgets() {
        let m = RateModel::new(16, 3, 2, 1.3);
        for budget in [50_000u64, 123_456, 1 << 20, 10 << 20] {
            let (n, _) = plan_method1(budget, &m, u64::MAX, &ScheduleInputs::default()).unwrap();
            assert!(m.estimate_size(n) <= budget as f64);
            assert!(m.estimate_size(n + 1) > budget as f64);
        }
    }

    #[test]
    fn method2_gain_is_nine_bits_for_default_widths() {
        let m = RateModel::new(16, 3, 2, 1.3);
        assert_eq!(m.reduction_gain(), 9);
        let plan = plan_method2(800_000, &m, 56_490).unwrap();
        // every step reduces P_bit by exactly 9
        let mut prev = m.bits_per_primitive();
        for step in &plan.steps {
            assert_eq!(prev - step.bits_per_primitive(), 9);
            prev = step.bits_per_primitive();
        }
    }

    #[test]
    fn method2_zero_delta_when_under_budget() {
        let m = RateModel::new(16, 3, 2, 1.3);
        let plan = plan_method2(10 << 20, &m, 56_490).unwrap();
        assert_eq!(plan.delta, 0);
        assert!(plan.steps.is_empty());
        assert_eq!(plan.reduced, m);
    }

    #[test]
    fn method2_delta_is_minimal() {
        let m = RateModel::new(16, 3, 2, 1.3);
        for budget in [300_000u64, 500_000, 750_000, 1_000_000] {
            match plan_method2(budget, &m, 56_490) {
                Ok(plan) => {
                    assert!(plan.reduced.estimate_size(56_490) <= budget as f64);
                    if plan.delta > 0 {
                        let looser = m.reduce(plan.delta - 1);
                        assert!(looser.estimate_size(56_490) > budget as f64);
                    }
                    assert_eq!(plan.reduced.bd_p, 16);
                }
                Err(Error::InfeasibleRate(_)) => {}
                Err(e) => panic!("unexpected error {e:?}"),
            }
        }
    }

    #[test]
    fn method2_position_floor_infeasibility() {
        // unpruned dance-sized cloud against a 0.5 MiB budget: the position
        // channel alone exceeds the target
        let m = RateModel::new(16, 3, 2, 1.3);
        let n = 225_960;
        let budget = (0.5 * MIB) as u64;
        assert!(m.estimate_size(n) * 3.0 * 16.0 / 192.0 > budget as f64);
        assert!(matches!(
            plan_method2(budget, &m, n),
            Err(Error::InfeasibleRate(_))
        ));
    }

    #[test]
    fn method2_floor_at_one_bit_infeasibility() {
        // position fits but attributes cannot shed enough even at 1 bit
        let m = RateModel::new(16, 3, 2, 1.3);
        let n = 106_585;
        let budget = (0.5 * MIB) as u64;
        let floor = n as f64 * 3.0 * 16.0 / (8.0 * 1.3);
        assert!(floor < budget as f64);
        assert!(matches!(
            plan_method2(budget, &m, n),
            Err(Error::InfeasibleRate(_))
        ));
    }
}
