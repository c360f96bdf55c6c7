use krf_core::geometry::{cigar, cusp_constant_fit, flat_perturbed, round_sphere, Bump};
use krf_core::{
    carlson_griffiths_initial, gauss_curvature, poincare_cusp, volume, ConformalMetric,
    EndCondition, Grid, SurfaceModel, Topology,
};
use proptest::prelude::*;
use std::f64::consts::PI;

fn window(x_min: f64, x_max: f64, n: usize, left: EndCondition) -> SurfaceModel {
    SurfaceModel::new(
        Topology::OnePuncture,
        Grid::new(x_min, x_max, n).unwrap(),
        left,
        EndCondition::Truncated,
    )
    .unwrap()
}

/// Largest curvature error over interior nodes inside `[lo, hi]`.
fn interior_error(g: &ConformalMetric, exact: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let k = gauss_curvature(g).unwrap().k;
    let grid = g.grid();
    (1..grid.n())
        .map(|i| (i, grid.x(i)))
        .filter(|(_, x)| *x >= lo && *x <= hi)
        .map(|(i, x)| (k[i] - exact(x)).abs())
        .fold(0.0, f64::max)
}

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn assert_second_order(name: &str, errors: &[f64]) {
    for order in observed_orders(errors) {
        assert!((1.8..=2.2).contains(&order), "{name}: orders {:?} from {errors:?}", observed_orders(errors));
    }
}

#[test]
fn sphere_curvature_converges_at_second_order() {
    let area = 4.0 * PI * 1.5;
    let errors: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|n| {
            let g = round_sphere(&window(-6.0, 6.0, *n, EndCondition::Truncated), area).unwrap();
            interior_error(&g, |_| 1.0 / 1.5, -4.0, 4.0)
        })
        .collect();
    assert_second_order("sphere", &errors);
}

#[test]
fn cusp_curvature_converges_at_second_order() {
    let errors: Vec<f64> = [128, 256, 512, 1024]
        .iter()
        .map(|n| {
            let model = window(1.0, 40.0, *n, EndCondition::Truncated);
            interior_error(&poincare_cusp(2.0, &model).unwrap(), |_| -0.5, 3.0, 40.0)
        })
        .collect();
    assert_second_order("cusp", &errors);
}

#[test]
fn cigar_curvature_converges_at_second_order() {
    let lambda = 3.0;
    let center = 0.5;
    let exact = |x: f64| {
        let s = 1.0 / (1.0 + (-2.0 * (x - center)).exp());
        2.0 * (1.0 - s) / lambda
    };
    let errors: Vec<f64> = [64, 128, 256, 512]
        .iter()
        .map(|n| {
            let model = window(-5.0, 8.0, *n, EndCondition::Truncated);
            interior_error(&cigar(&model, lambda, center).unwrap(), exact, -4.0, 7.0)
        })
        .collect();
    assert_second_order("cigar", &errors);
}

#[test]
fn cap_node_curvature_is_second_order_deep_in_the_cap() {
    let errors: Vec<f64> = [256, 512, 1024]
        .iter()
        .map(|n| {
            let g = round_sphere(&window(-8.0, 6.0, *n, EndCondition::SmoothCap), 4.0 * PI).unwrap();
            (gauss_curvature(&g).unwrap().k[0] - 1.0).abs()
        })
        .collect();
    assert_second_order("cap node", &errors);
}

#[test]
fn exact_volumes() {
    let model = window(1.0, 40.0, 4096, EndCondition::Truncated);
    let v = volume(&poincare_cusp(1.0, &model).unwrap()).unwrap();
    let exact = 2.0 * PI * (1.0 - 1.0 / 40.0);
    assert!((v - exact).abs() < 1e-4 * exact, "{v} vs {exact}");

    let g = carlson_griffiths_initial(
        &SurfaceModel::one_puncture(-3.0, 20.0, 2048, 1.0).unwrap(),
        1.0,
        Bump::with_area(10.0),
    )
    .unwrap();
    assert!((volume(&g).unwrap() - 10.0).abs() < 1e-3);

    let cyl = SurfaceModel::flat_cylinder(-5.0, 5.0, 256).unwrap();
    let g = flat_perturbed(&cyl, 2.0, &[]).unwrap();
    assert!((volume(&g).unwrap() - 2.0 * PI * 2.0 * 10.0).abs() < 1e-10);
}

#[test]
fn cusp_fit_recovers_shifted_constant() {
    let model = window(1.0, 40.0, 512, EndCondition::Truncated);
    let f: Vec<f64> = model.grid().xs().map(|x| 1.7 / ((x + 2.5) * (x + 2.5))).collect();
    let c = cusp_constant_fit(model.grid(), &f, true, 0.25).unwrap();
    assert!((c - 1.7).abs() < 1e-10);
}

proptest! {
    #[test]
    fn curvature_scales_inversely_with_the_metric(
        lambda in 0.05f64..20.0,
        a1 in -0.5f64..0.5,
        a2 in -0.5f64..0.5,
    ) {
        let model = SurfaceModel::flat_cylinder(-4.0, 4.0, 128).unwrap();
        let g = flat_perturbed(&model, 1.0, &[(1, a1), (3, a2)]).unwrap();
        let k = gauss_curvature(&g).unwrap().k;
        let ks = gauss_curvature(&g.scaled(lambda).unwrap()).unwrap().k;
        for (a, b) in k.iter().zip(&ks) {
            prop_assert!((a / lambda - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let v = volume(&g).unwrap();
        let vs = volume(&g.scaled(lambda).unwrap()).unwrap();
        prop_assert!((vs - lambda * v).abs() <= 1e-12 * vs);
    }

    #[test]
    fn flat_perturbation_curvature_integrates_to_zero(
        a1 in -0.5f64..0.5,
        a2 in -0.5f64..0.5,
        level in 0.1f64..10.0,
    ) {
        // Reflecting ends carry no boundary term, so ∫K dA vanishes.
        let model = SurfaceModel::flat_cylinder(-3.0, 3.0, 256).unwrap();
        let g = flat_perturbed(&model, level, &[(2, a1), (5, a2)]).unwrap();
        let ric = gauss_curvature(&g).unwrap().ric;
        let h = model.grid().h();
        let n = ric.len() - 1;
        let total = h * (ric.iter().sum::<f64>() - 0.5 * (ric[0] + ric[n]));
        prop_assert!(total.abs() < 1e-10);
    }
}
