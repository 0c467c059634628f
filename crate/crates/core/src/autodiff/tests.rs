use ndarray::{array, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::*;

fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

/// Central-difference check of every input's gradient.
fn check<F>(inputs: Vec<Array2<f64>>, build: F)
where
    F: Fn(&mut Graph, &[Var]) -> Var,
{
    let eval = |vals: &[Array2<f64>]| {
        let mut g = Graph::new();
        let vars: Vec<Var> = vals.iter().map(|v| g.constant(v.clone())).collect();
        let out = build(&mut g, &vars);
        g.scalar(out)
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|v| g.variable(v.clone())).collect();
    let out = build(&mut g, &vars);
    let grads = g.backward(out);
    let h = 1e-6;
    for (k, input) in inputs.iter().enumerate() {
        let analytic = grads.get_or_zeros(vars[k], input.dim());
        for idx in 0..input.len() {
            let mut plus = inputs.clone();
            let mut minus = inputs.clone();
            plus[k].as_slice_mut().unwrap()[idx] += h;
            minus[k].as_slice_mut().unwrap()[idx] -= h;
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
            let a = analytic.as_slice().unwrap()[idx];
            let tol = 1e-5 * (1.0 + numeric.abs().max(a.abs()));
            assert!(
                (a - numeric).abs() <= tol,
                "input {k} entry {idx}: analytic {a} vs numeric {numeric}"
            );
        }
    }
}

#[test]
fn matmul_and_bias() {
    check(vec![random(4, 3, 1), random(3, 5, 2), random(1, 5, 3)], |g, v| {
        let h = g.matmul(v[0], v[1]);
        let h = g.add_row(h, v[2]);
        g.sum_squares(h)
    });
}

#[test]
fn transposed_matmul() {
    check(vec![random(6, 2, 4), random(6, 3, 5)], |g, v| {
        let h = g.matmul_tn(v[0], v[1]);
        g.sum_squares(h)
    });
}

#[test]
fn row_scaling_relu_and_scale() {
    check(vec![random(5, 4, 6), random(1, 4, 7)], |g, v| {
        let h = g.mul_row(v[0], v[1]);
        let h = g.relu(h);
        let h = g.scale(h, 1.7);
        g.sum_squares(h)
    });
}

#[test]
fn pooling_broadcast_concat() {
    check(vec![random(5, 3, 8)], |g, v| {
        let pooled = g.max_pool_rows(v[0]);
        let spread = g.broadcast_rows(pooled, 5);
        let cat = g.concat_cols(v[0], spread);
        let sliced = g.slice_cols(cat, 1..5);
        g.sum_squares(sliced)
    });
}

#[test]
fn reshape_and_repeat() {
    check(vec![random(1, 8, 9)], |g, v| {
        let r = g.reshape(v[0], 4, 2);
        let rep = g.repeat_rows(r, 3);
        let w = g.constant(random(12, 2, 10));
        let d = g.sub(rep, w);
        g.sum_squares(d)
    });
}

#[test]
fn column_softmax_gradient() {
    let weights = random(6, 3, 11);
    check(vec![random(6, 3, 12)], move |g, v| {
        let s = g.col_softmax(v[0], 0.4);
        let w = g.constant(weights.clone());
        let prod = g.matmul_tn(s, w);
        g.sum_squares(prod)
    });
}

#[test]
fn row_normalization() {
    check(vec![random(2, 4, 13)], |g, v| {
        let n = g.normalize_rows(v[0]);
        let t = g.constant(random(2, 4, 14));
        let d = g.sub(n, t);
        g.sum_squares(d)
    });
}

#[test]
fn cross_entropy_gradient() {
    check(vec![random(1, 5, 15)], |g, v| g.cross_entropy(v[0], 2));
}

#[test]
fn point_set_losses() {
    check(vec![random(5, 3, 16), random(7, 3, 17)], |g, v| g.chamfer(v[0], v[1]));
    check(vec![random(6, 3, 18), random(6, 3, 19)], |g, v| g.earth_mover(v[0], v[1]));
    check(vec![random(4, 3, 20), random(9, 3, 21)], |g, v| g.nearest_sq(v[0], v[1]));
}

#[test]
fn sum_and_add() {
    check(vec![random(3, 3, 22), random(3, 3, 23)], |g, v| {
        let a = g.add(v[0], v[1]);
        let s = g.sub(a, v[1]);
        let t = g.sum(s);
        let sq = g.sum_squares(v[1]);
        g.add(t, sq)
    });
}

#[test]
fn shared_input_accumulates() {
    let mut g = Graph::new();
    let x = g.variable(array![[2.0]]);
    let y = g.add(x, x);
    let z = g.sum_squares(y);
    let grads = g.backward(z);
    assert_eq!(grads.get(x).unwrap()[[0, 0]], 16.0);
}

#[test]
fn constants_get_no_gradient() {
    let mut g = Graph::new();
    let x = g.variable(array![[1.0, 2.0]]);
    let c = g.constant(array![[3.0, 4.0]]);
    let y = g.mul_row(x, c);
    let z = g.sum(y);
    let grads = g.backward(z);
    assert!(grads.get(c).is_none());
    assert_eq!(grads.get(x).unwrap(), &array![[3.0, 4.0]]);
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "mlp", 3, &[8, 5], false, &mut rng);
    let x = random(6, 3, 24);
    mlp.calibrate(&mut store, std::slice::from_ref(&x));

    let loss_of = |store: &ParamStore| {
        let mut g = Graph::new();
        let p = store.bind(&mut g, false);
        let xv = g.constant(x.clone());
        let y = mlp.forward(&mut g, &p, xv);
        let s = g.sum_squares(y);
        g.scalar(s)
    };
    let mut g = Graph::new();
    let p = store.bind(&mut g, true);
    let xv = g.constant(x.clone());
    let y = mlp.forward(&mut g, &p, xv);
    let s = g.sum_squares(y);
    let grads = g.backward(s);
    let mut acc = ParamGrads::zeros_like(&store);
    acc.add_from(&p, &grads);

    let h = 1e-6;
    for id in store.ids().filter(|&id| store.is_trainable(id)).collect::<Vec<_>>() {
        for idx in 0..store.get(id).len() {
            let mut plus = store.clone();
            plus.get_mut(id).as_slice_mut().unwrap()[idx] += h;
            let mut minus = store.clone();
            minus.get_mut(id).as_slice_mut().unwrap()[idx] -= h;
            let numeric = (loss_of(&plus) - loss_of(&minus)) / (2.0 * h);
            let analytic = acc.get(id).as_slice().unwrap()[idx];
            assert!(
                (numeric - analytic).abs() <= 1e-4 * (1.0 + numeric.abs()),
                "{} [{idx}]: {analytic} vs {numeric}",
                store.name(id)
            );
        }
    }
}

#[test]
fn calibration_standardizes_hidden_channels() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", 3, &[16, 4], false, &mut rng);
    let x = random(200, 3, 25) * 5.0 + 2.0;
    mlp.calibrate(&mut store, std::slice::from_ref(&x));
    let shift = store.get(store.find("m.0.norm_shift").unwrap()).clone();
    let scale = store.get(store.find("m.0.norm_scale").unwrap()).clone();
    let w = store.get(store.find("m.0.weight").unwrap()).clone();
    let pre = (x.dot(&w) + &shift) * &scale;
    for col in pre.columns() {
        let mean = col.mean().unwrap();
        let var = col.mapv(|v| (v - mean).powi(2)).mean().unwrap();
        assert!(mean.abs() < 1e-9);
        assert!((var - 1.0).abs() < 1e-3);
    }
}

#[test]
fn adam_reduces_a_quadratic() {
    let mut store = ParamStore::new();
    let id = store.add("x", array![[3.0, -2.0]], true);
    let mut adam = Adam::new(&store);
    for _ in 0..500 {
        let mut g = Graph::new();
        let p = store.bind(&mut g, true);
        let loss = g.sum_squares(p[id]);
        let grads = g.backward(loss);
        let mut acc = ParamGrads::zeros_like(&store);
        acc.add_from(&p, &grads);
        drop(g);
        adam.step(&mut store, &acc, 0.05);
    }
    assert!(store.get(id).iter().all(|v| v.abs() < 1e-2));
}

#[test]
fn checksum_tracks_values() {
    let mut store = ParamStore::new();
    let id = store.add("x", array![[1.0]], true);
    let before = store.checksum();
    assert_eq!(before, store.clone().checksum());
    store.get_mut(id)[[0, 0]] = 1.0 + 1e-15;
    assert_ne!(before, store.checksum());
}

#[test]
fn tapeless_inference_matches_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut store = ParamStore::new();
    let mlp = Mlp::new(&mut store, "m", 3, &[8, 6, 4], false, &mut rng);
    let x = random(10, 3, 33);
    mlp.calibrate(&mut store, std::slice::from_ref(&x));
    let mut g = Graph::new();
    let p = store.bind(&mut g, false);
    let xv = g.constant(x.clone());
    let y = mlp.forward(&mut g, &p, xv);
    let direct = mlp.infer(&store, &x);
    assert!(g.value(y).iter().zip(direct.iter()).all(|(a, b)| (a - b).abs() <= 1e-12));
}
