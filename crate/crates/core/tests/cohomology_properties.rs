use krf_core::cohomology::builtin;
use krf_core::{
    classify, normalized_time_of, singularity_time, unnormalized_class_at, Classification,
    CohomologyClass, Divisor, KahlerCone, ManifoldDescription, PiRational, Rational,
    SingularityTime,
};
use proptest::prelude::*;

fn q(num: i64, den: i64) -> Rational {
    PiRational::from_ratio(num, den).coeff().clone()
}

fn class(items: &[(i64, i64)]) -> CohomologyClass {
    let v: Vec<PiRational> = items.iter().map(|(n, d)| PiRational::from_ratio(*n, *d)).collect();
    CohomologyClass::from_scalars(&v).unwrap()
}

/// A random instance: nonnegative cone rows, a strictly positive class and a
/// signed log-canonical class split into canonical part and one divisor.
#[derive(Debug, Clone)]
struct Instance {
    rows: Vec<Vec<(i64, i64)>>,
    omega: Vec<(i64, i64)>,
    canonical: Vec<(i64, i64)>,
    divisor: Vec<(i64, i64)>,
}

impl Instance {
    fn manifold(&self) -> ManifoldDescription {
        let dim = self.omega.len();
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|(n, d)| q(*n, *d)).collect())
            .collect();
        ManifoldDescription::new(
            (0..dim).map(|i| format!("e{i}")).collect(),
            class(&self.canonical),
            vec![Divisor {
                name: String::from("D"),
                class: class(&self.divisor),
            }],
            KahlerCone::new(rows).unwrap(),
            1,
        )
        .unwrap()
    }

    fn omega0(&self) -> CohomologyClass {
        class(&self.omega)
    }
}

fn ratio() -> impl Strategy<Value = (i64, i64)> {
    (-40i64..=40, 1i64..=12)
}

fn positive_ratio() -> impl Strategy<Value = (i64, i64)> {
    (1i64..=60, 1i64..=12)
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3, 1usize..=4).prop_flat_map(|(dim, rows)| {
        let row = prop::collection::vec((0i64..=5, 1i64..=4), dim)
            .prop_filter("row must be nonzero", |r| r.iter().any(|(n, _)| *n > 0));
        (
            prop::collection::vec(row, rows),
            prop::collection::vec(positive_ratio(), dim),
            prop::collection::vec(ratio(), dim),
            prop::collection::vec(ratio(), dim),
        )
            .prop_map(|(rows, omega, canonical, divisor)| Instance {
                rows,
                omega,
                canonical,
                divisor,
            })
    })
}

fn to_f64(pairs: &[(i64, i64)]) -> Vec<f64> {
    pairs.iter().map(|(n, d)| *n as f64 / *d as f64).collect()
}

/// Largest `s` keeping every row positive on `ω + 2πs·κ`, by bisection.
fn bisect_time(inst: &Instance) -> f64 {
    let omega = to_f64(&inst.omega);
    let kappa: Vec<f64> = to_f64(&inst.canonical)
        .iter()
        .zip(to_f64(&inst.divisor))
        .map(|(a, b)| a + b)
        .collect();
    let rows: Vec<Vec<f64>> = inst.rows.iter().map(|r| to_f64(r)).collect();
    let two_pi = 2.0 * std::f64::consts::PI;
    let inside = |s: f64| {
        rows.iter().all(|r| {
            let a: f64 = r.iter().zip(&omega).map(|(x, y)| x * y).sum();
            let b: f64 = r.iter().zip(&kappa).map(|(x, y)| x * y).sum();
            a + two_pi * s * b > 0.0
        })
    };
    let mut hi = 1.0;
    while inside(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if inside(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

proptest! {
    #[test]
    fn closed_form_time_matches_bisection(inst in instance()) {
        let m = inst.manifold();
        let t = singularity_time(&m, &inst.omega0()).unwrap();
        let oracle = bisect_time(&inst);
        match t {
            SingularityTime::Infinite => prop_assert!(oracle.is_infinite()),
            SingularityTime::Finite(v) => {
                let v = v.to_f64();
                prop_assert!((v - oracle).abs() <= 1e-12 * v.max(1.0), "{v} vs {oracle}");
            }
        }
    }

    #[test]
    fn time_is_homogeneous_of_degree_one(inst in instance(), num in 1i64..=30, den in 1i64..=30) {
        let m = inst.manifold();
        let omega = inst.omega0();
        let lambda = PiRational::from_ratio(num, den);
        let base = singularity_time(&m, &omega).unwrap();
        let scaled = singularity_time(&m, &omega.scale(&lambda)).unwrap();
        match (base, scaled) {
            (SingularityTime::Infinite, SingularityTime::Infinite) => {}
            (SingularityTime::Finite(a), SingularityTime::Finite(b)) => {
                prop_assert_eq!(a.mul(&lambda), b);
            }
            (a, b) => prop_assert!(false, "finiteness changed: {a} vs {b}"),
        }
        let va = classify(&m, &omega).unwrap();
        let vb = classify(&m, &omega.scale(&lambda)).unwrap();
        prop_assert_eq!(va.binding_functionals, vb.binding_functionals);
        prop_assert_eq!(va.classification, vb.classification);
    }

    #[test]
    fn class_at_singular_time_sits_on_the_boundary(inst in instance()) {
        let m = inst.manifold();
        let omega = inst.omega0();
        let verdict = classify(&m, &omega).unwrap();
        let SingularityTime::Finite(t) = verdict.t_sing_unnormalized.clone() else {
            prop_assert_eq!(verdict.classification, Classification::NoSingularity);
            return Ok(());
        };
        prop_assert!(t.is_positive());
        let at_t = unnormalized_class_at(&m, &omega, &t).unwrap();
        for j in 0..m.cone().len() {
            let v = m.cone().pair(j, &at_t).unwrap();
            if verdict.binding_functionals.contains(&j) {
                prop_assert!(v.is_zero());
            } else {
                prop_assert!(!v.is_negative());
            }
        }
        let half = t.scale(&q(1, 2));
        prop_assert!(m.cone().contains(&unnormalized_class_at(&m, &omega, &half).unwrap()).unwrap());
        let expected = (1.0 + t.to_f64()).ln();
        prop_assert!((verdict.t_sing_normalized - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn larger_class_never_shortens_the_flow(inst in instance(), bump in positive_ratio()) {
        let m = inst.manifold();
        let omega = inst.omega0();
        let extra = class(&vec![bump; omega.len()]);
        let bigger = omega.checked_add(&extra).unwrap();
        let a = singularity_time(&m, &omega).unwrap().to_f64();
        let b = singularity_time(&m, &bigger).unwrap().to_f64();
        prop_assert!(b >= a);
    }

    #[test]
    fn sphere_time_is_area_over_two_pi(num in 1i64..=10_000, den in 1i64..=100) {
        let m = builtin::s2_one_point();
        let t = singularity_time(&m, &class(&[(num, den)])).unwrap();
        prop_assert_eq!(t, SingularityTime::Finite(PiRational::new(q(num, 2 * den), -1)));
    }

    #[test]
    fn projective_space_threshold(n in 1u32..=5, k in 0u32..=8, area in 1i64..=50) {
        let m = builtin::cpn_with_hyperplanes(n, k);
        let v = classify(&m, &class(&[(area, 1)])).unwrap();
        if k < n + 1 {
            let expected = PiRational::new(q(area, 2 * i64::from(n + 1 - k)), -1);
            prop_assert_eq!(v.t_sing_unnormalized, SingularityTime::Finite(expected));
            let flagged = k >= 1;
            prop_assert_eq!(v.classification == Classification::TypeIIGuaranteed, flagged);
        } else {
            prop_assert_eq!(v.t_sing_unnormalized, SingularityTime::Infinite);
            prop_assert_eq!(v.classification, Classification::NoSingularity);
        }
    }
}

#[test]
fn normalized_time_of_infinity_is_infinite() {
    assert_eq!(normalized_time_of(&SingularityTime::Infinite).unwrap(), f64::INFINITY);
}

#[test]
fn product_of_spheres_table() {
    let m = builtin::s2_times_s2();
    let pi = |k: i64| PiRational::new(q(k, 1), 1);
    let cases = [
        ((4, 4), PiRational::from_integer(1), vec![0], Classification::Inconclusive),
        ((8, 4), PiRational::from_integer(2), vec![0, 1], Classification::TypeIIGuaranteed),
        ((8, 2), PiRational::from_integer(1), vec![1], Classification::Inconclusive),
    ];
    for ((a, b), t, binding, kind) in cases {
        let omega = CohomologyClass::from_scalars(&[pi(a), pi(b)]).unwrap();
        let v = classify(&m, &omega).unwrap();
        assert_eq!(v.t_sing_unnormalized, SingularityTime::Finite(t));
        assert_eq!(v.binding_functionals, binding);
        assert_eq!(v.classification, kind);
    }
}
