use deepxi::neural::{finite_difference_check, Mode, NetworkParams, NetworkShape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tiny(mode: Mode) -> (NetworkParams, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let shape = NetworkShape { mode, n_blocks: 2, cell_size: 8, input_dim: 9, output_dim: 9 };
    let mut p = NetworkParams::init(&shape, 42).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for t in p.tensors_mut() {
        t.iter_mut().for_each(|x| *x += rng.random_range(-0.1..0.1));
    }
    let x = (0..5).map(|_| (0..9).map(|_| rng.random_range(0.0..2.0)).collect()).collect();
    let t = (0..5).map(|_| (0..9).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    (p, x, t)
}

#[test]
fn bptt_matches_central_differences() {
    for mode in [Mode::Uni, Mode::Bi] {
        let (p, x, t) = tiny(mode);
        let report = finite_difference_check(&p, &x, &t, 1e-4, 1e-4, 1e-7).unwrap();
        assert_eq!(report.len(), p.tensor_specs().len());
        for r in &report {
            assert!(r.passed, "{mode} {}: rel {:e} abs {:e}", r.name, r.max_rel_err, r.max_abs_err);
        }
    }
}
