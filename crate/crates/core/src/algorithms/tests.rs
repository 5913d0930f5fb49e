use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grid::{SafetyMode, SafetySpec, SensitivityModel};
use crate::linalg::Matrix;
use crate::response::{ResponseFamily, ResponseModel, ResponseParams};

/// One bus with `h(i) = (1 − i)² − 1/4`: optimum `i★ = 1/2`, `λ★ = 1`.
fn toy(family: ResponseFamily<f64>, delta: f64) -> Plant<f64> {
    let sens = SensitivityModel::from_parts(
        Matrix::from_rows(&[vec![1.0]]),
        Matrix::from_rows(&[vec![0.0]]),
        vec![0.5],
        vec![0.0],
        vec![0.0],
    )
    .unwrap();
    let spec = SafetySpec::uniform(1, 0.5, 2.0, SafetyMode::LowerOnly).unwrap();
    let params = ResponseParams::new(vec![0.0], vec![delta], vec![1.0]).unwrap();
    Plant::new(sens, spec, ResponseModel::new(params, family).unwrap(), vec![0.0]).unwrap()
}

fn dual_value(lambda: f64) -> f64 {
    if lambda >= 0.5 {
        1.0 - 0.25 / lambda - lambda / 4.0
    } else {
        0.75 * lambda
    }
}

#[test]
fn cost_is_l1() {
    assert_eq!(cost(&[0.0, 0.0]), 0.0);
    assert_eq!(cost(&[0.25, 0.5, 1.0]), 1.75);
}

#[test]
fn lagrangian_reduces_to_cost_without_duals() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    assert_eq!(lagrangian(&[0.3], &[0.0], &plant, None).unwrap(), 0.3);
    // Feasible incentive: the dual term can only lower the value.
    assert!(lagrangian(&[0.8], &[3.0], &plant, None).unwrap() <= 0.8);
    let reg = lagrangian(&[0.4], &[2.0], &plant, Some((1.0, 0.5))).unwrap();
    let plain = lagrangian(&[0.4], &[2.0], &plant, None).unwrap();
    assert!((reg - plain - (0.5 * 0.16 - 0.25 * 4.0)).abs() < 1e-15);
}

#[test]
fn daio_primal_limits() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    assert_eq!(daio_primal(&plant, &[0.0]).unwrap(), vec![0.0]);
    assert!((daio_primal(&plant, &[1e9]).unwrap()[0] - 1.0).abs() < 1e-8);
    assert!((daio_primal(&plant, &[1.0]).unwrap()[0] - 0.5).abs() < 1e-15);
    let linear = toy(ResponseFamily::Linear, 1.0);
    assert!(matches!(daio_primal(&linear, &[1.0]), Err(AlgorithmError::Precondition(_))));
}

#[test]
fn daio_dual_function_matches_hand_computation() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    for lambda in [0.2, 0.5, 0.8, 1.0, 3.0] {
        assert!((daio_dual_value(&plant, &[lambda]).unwrap() - dual_value(lambda)).abs() < 1e-12);
    }
}

#[test]
fn daio_step_condition_scalar_toy() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    let h0 = plant.h(&[0.0]).unwrap();
    let m = |l: &[f64]| daio_dual_value(&plant, l).unwrap();
    let bound = daio_step_condition(&[0.8], &h0, m);
    assert!((bound - 2.0 * 0.4875 / 0.5625).abs() < 1e-12);
    let doubled: Vec<f64> = h0.iter().map(|x| 2.0 * x).collect();
    assert!((daio_step_condition(&[0.8], &doubled, m) - bound / 4.0).abs() < 1e-12);
}

#[test]
fn daio_converges_on_toy() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    let mut opt = Optimizer::new(Algorithm::Daio { dual: StepSchedule::constant(1.0), lambda0: 0.8 }, 1, 0).unwrap();
    for _ in 0..200 {
        opt.step(&plant).unwrap();
    }
    assert!((opt.state.dual[0] - 1.0).abs() < 1e-8);
    assert!((opt.state.incentive[0] - 0.5).abs() < 1e-8);
}

#[test]
fn iii_fixed_point_and_growth() {
    let plant = toy(ResponseFamily::Linear, 1.0);
    let mut state = AlgorithmState::new(1, 0.0, 0.0);
    iii_step(&mut state, &plant, 0.1).unwrap();
    assert!((state.incentive[0] - 0.1).abs() < 1e-15);
    state.incentive = vec![1.0];
    iii_step(&mut state, &plant, 0.1).unwrap();
    assert_eq!(state.incentive, vec![1.0]);
}

#[test]
fn foio_without_duals_descends_cost() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    let grad = foio_primal_gradient(&plant, &GradientSource::Exact, &[0.3], &[0.0]).unwrap();
    assert_eq!(grad, vec![1.0]);
    let mut state = AlgorithmState::new(1, 0.0, 0.0);
    state.incentive = vec![0.3];
    foio_step(&mut state, &plant, &GradientSource::Exact, &StepSchedule::constant(0.01), &StepSchedule::constant(0.0)).ok();
    assert!((state.incentive[0] - 0.29).abs() < 1e-12);
}

#[test]
fn theoretical_schedule_scales_inversely_with_k() {
    let mut state = AlgorithmState::<f64>::new(2, 0.0, 0.0);
    state.last_gradient = vec![3.0, 4.0];
    let e1 = foio_theoretical_schedule(&mut state, 1.0, PsiNorm::PrimalOnly);
    state.iteration = 9;
    let e10 = foio_theoretical_schedule(&mut state, 1.0, PsiNorm::PrimalOnly);
    assert!((e1 - 0.2).abs() < 1e-15 && (e10 - 0.02).abs() < 1e-15);
    state.last_h = Some(vec![12.0, 0.0]);
    state.iteration = 0;
    assert!((foio_theoretical_schedule(&mut state, 1.0, PsiNorm::Stacked) - 1.0 / 13.0).abs() < 1e-15);
    state.last_gradient = vec![0.0, 0.0];
    state.last_h = None;
    assert_eq!(foio_theoretical_schedule(&mut state, 1.0, PsiNorm::Stacked), 0.0);
    assert!(state.stationary);
}

#[test]
fn zoio_without_excess_decays_to_zero() {
    let plant = toy(ResponseFamily::QuadraticConvex, 0.0);
    let mut opt = Optimizer::new(
        Algorithm::Zoio { config: ZoConfig::with_sigma(0.005), primal_step: 0.01, dual: StepSchedule::constant(1.0), lambda0: 0.0 },
        1,
        4,
    )
    .unwrap();
    opt.state.incentive = vec![0.5];
    let mut prev = 0.5;
    for _ in 0..200 {
        opt.step(&plant).unwrap();
        assert!(opt.state.incentive[0] <= prev + 1e-15);
        prev = opt.state.incentive[0];
    }
    assert!(prev < 0.5 && prev >= 0.0);
}

#[test]
fn sinusoidal_zeta_is_exactly_orthogonal_over_a_period() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = 8;
    let dev = zeta_estimator_bias_check(ZetaSampler::Sinusoidal { period: 2 * n + 1 }, n, 2 * n + 1, &mut rng);
    assert!(dev < 1e-10, "{dev}");
    let single = zeta_estimator_bias_check(ZetaSampler::Uniform, n, 1, &mut rng);
    assert!(single > 0.1);
}

#[test]
fn sinusoidal_period_must_cover_all_frequencies() {
    let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
    let mut cfg = ZoConfig::with_sigma(0.01);
    cfg.zeta = ZetaSampler::Sinusoidal { period: 3 };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let dual = StepSchedule::constant(1.0);
    let mut one = AlgorithmState::new(1, 0.0, 1.0);
    assert!(zoio_step(&mut one, &plant, &cfg, 0.01, &dual, &mut rng).is_ok());
    let mut two = AlgorithmState::new(2, 0.0, 1.0);
    assert!(matches!(zoio_step(&mut two, &plant, &cfg, 0.01, &dual, &mut rng), Err(AlgorithmError::InvalidConfig(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    assert!(Optimizer::new(Algorithm::<f64>::Iii { step: 0.0 }, 1, 0).is_err());
    assert!(Optimizer::new(Algorithm::<f64>::Daio { dual: StepSchedule::constant(1.0), lambda0: 0.0 }, 1, 0).is_err());
    let mut z = Algorithm::<f64>::zoio(0.1);
    if let Algorithm::Zoio { config, .. } = &mut z {
        config.decay = 1.5;
    }
    assert!(Optimizer::new(z, 1, 0).is_err());
}

fn any_algorithm() -> impl Strategy<Value = Algorithm<f64>> {
    prop_oneof![
        Just(Algorithm::iii()),
        Just(Algorithm::Daio { dual: StepSchedule::ramp(RampTrigger::OnViolation), lambda0: 0.3 }),
        Just(Algorithm::foio(GradientSource::Exact)),
        Just(Algorithm::foio(GradientSource::Coarse { t_est: vec![0.01] })),
        Just(Algorithm::zoio(0.05)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn duals_and_incentives_stay_non_negative(alg in any_algorithm(), delta in 0.0f64..2.0, seed in 0u64..1000) {
        let plant = toy(ResponseFamily::QuadraticConvex, delta);
        let mut opt = Optimizer::new(alg, 1, seed).unwrap();
        for _ in 0..300 {
            let m = opt.step(&plant).unwrap();
            prop_assert!(m.h.iter().all(|x| x.is_finite()));
            prop_assert!(opt.state.dual.iter().all(|&l| l >= 0.0));
            prop_assert!(opt.state.incentive.iter().all(|&i| i >= 0.0));
        }
        prop_assert_eq!(opt.state.iteration, 300);
    }

    #[test]
    fn identical_seeds_give_identical_iterates(seed in 0u64..1000) {
        let plant = toy(ResponseFamily::QuadraticConvex, 1.0);
        let run = || {
            let mut opt = Optimizer::new(Algorithm::zoio(0.05), 1, seed).unwrap();
            (0..100).map(|_| opt.step(&plant).unwrap().h[0].to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }
}
