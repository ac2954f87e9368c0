use conv_approx::netbuild::{
    build_composite_network, build_radial_network, FunctionDescriptor, NetworkSpec, TargetFunction,
};
use conv_approx::neteval::{forward, q_hat};
use conv_approx::ridge::{dot, random_ball_point, FeaturePolynomial};
use conv_approx::sequences::relu;
use conv_approx::spline::knot;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn target(desc: FunctionDescriptor) -> TargetFunction {
    TargetFunction::from_descriptor(desc, -1.0, 1.0).unwrap()
}

fn cross_poly(d: usize) -> FeaturePolynomial {
    let mut a = vec![0; d];
    a[0] = 1;
    a[1] = 1;
    let mut b = vec![0; d];
    b[d - 1] = 2;
    FeaturePolynomial::new(d, [(a, 1.0), (b, 1.0)]).unwrap()
}

/// Max deviation of group-1 and group-2 outputs from their closed forms.
fn identity_deviation(spec: &NetworkSpec, x: &[f64]) -> (f64, f64) {
    let acts = forward(spec, x, true).unwrap().activations.unwrap();
    let xi = &spec.meta.group2_xi;
    let feats: Vec<f64> = xi.iter().map(|v| dot(v, x)).collect();
    let g1 = if spec.j1 > 0 {
        acts[spec.j1 - 1]
            .iter()
            .zip(&feats)
            .map(|(h, f)| (h - (f + spec.meta.b)).abs())
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    let width = xi.len();
    let last = &acts[spec.j2 - 1];
    let mut g2 = 0.0f64;
    for (i, h) in last.iter().enumerate() {
        let (j, k) = (i / width + 1, i % width + 1);
        let expect = if k <= spec.meta.n_active && j <= 2 * spec.n + 3 {
            relu(feats[k - 1] - knot(spec.n, j))
        } else {
            0.0
        };
        g2 = g2.max((h - expect).abs());
    }
    (g1, g2)
}

#[test]
fn composite_layer_identities() {
    for d in [2, 3] {
        for n in [2, 4] {
            let spec = build_composite_network(
                &target(FunctionDescriptor::Identity),
                &cross_poly(d),
                2,
                n,
                17,
            )
            .unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(d as u64 * 100 + n as u64);
            for _ in 0..100 {
                let x = random_ball_point(&mut rng, d);
                let (g1, g2) = identity_deviation(&spec, &x);
                assert!(g1 <= 1e-8 && g2 <= 1e-8, "d={d} N={n}: {g1} {g2}");
            }
        }
    }
}

#[test]
fn radial_group2_at_fixed_point() {
    let spec = build_radial_network(&target(FunctionDescriptor::Identity), 2, 2, 1).unwrap();
    let x = [0.5, -0.25];
    let last = forward(&spec, &x, true).unwrap().activations.unwrap().pop().unwrap();
    for j in 1..=5 {
        for k in 1..=2 {
            let expect = relu(x[k - 1] - knot(1, j));
            assert!((last[(j - 1) * 2 + k - 1] - expect).abs() <= 1e-12);
        }
    }
    assert!(last[10..].iter().all(|&v| v == 0.0));
}

#[test]
fn pre_activations_nonnegative() {
    let spec = build_composite_network(&target(FunctionDescriptor::Identity), &cross_poly(3), 2, 4, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let x = random_ball_point(&mut rng, 3);
        let mut h = x.clone();
        for (j, layer) in spec.layers.iter().enumerate() {
            let pre = layer.pre_activation(&h).unwrap();
            if j + 1 < spec.j2 {
                let min = pre.iter().copied().fold(f64::INFINITY, f64::min);
                assert!(min >= -1e-12, "layer {} min {min}", j + 1);
            }
            h = conv_approx::sequences::apply_layer(layer, &h, spec.d).unwrap();
        }
    }
}

#[test]
fn feature_polynomial_error() {
    for (d, n) in [(2, 4), (3, 8)] {
        let poly = cross_poly(d);
        let spec = build_composite_network(&target(FunctionDescriptor::Identity), &poly, 2, n, 3).unwrap();
        let q = spec.meta.q as f64;
        let l1 = spec.meta.beta.as_ref().unwrap().l1_norm;
        let bound = 2.0 * q * l1 / n as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = random_ball_point(&mut rng, d);
            let err = (q_hat(&spec, &x).unwrap() - poly.eval(&x)).abs();
            assert!(err <= bound, "{err} > {bound}");
        }
        let row_l1: f64 = spec.fc.row(0).iter().map(|v| v.abs()).sum();
        assert!(row_l1 <= 4.0 * n as f64 * (2 * n + 3) as f64 * l1);
    }
    // Radial: |Q̂ - |x|²| <= 4d/N.
    let spec = build_radial_network(&target(FunctionDescriptor::Identity), 4, 2, 16).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let x = random_ball_point(&mut rng, 4);
        let err = (q_hat(&spec, &x).unwrap() - dot(&x, &x)).abs();
        assert!(err <= 16.0 / 16.0);
    }
}

#[test]
fn zero_feature_network() {
    let zero = FeaturePolynomial::constant(2, 0.0);
    let spec = build_composite_network(&target(FunctionDescriptor::Identity), &zero, 2, 3, 0).unwrap();
    let feats = forward(&spec, &[0.3, 0.1], false).unwrap().features;
    for (j, v) in feats.iter().enumerate() {
        let expect = spec.meta.b_hat * relu(-knot(3, j + 1));
        assert!((v - expect).abs() < 1e-12);
    }
}

#[test]
fn constant_target_through_network() {
    let one = target(FunctionDescriptor::Constant { value: 1.0 });
    let spec = build_composite_network(&one, &cross_poly(2), 2, 3, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let x = random_ball_point(&mut rng, 2);
        let y = forward(&spec, &x, false).unwrap().output;
        assert!((y - 1.0).abs() < 1e-9, "{y}");
    }
}
