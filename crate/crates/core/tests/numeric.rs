use evbs::fd::{fd_gradient, fd_jacobian};
use evbs::linalg::{solve_spd, sym_eigen, Matrix, SymMatrix};
use evbs::optim::maximize;
use evbs::{OptimOptions, RngState};
use proptest::prelude::*;

fn random_orthogonal(n: usize, rng: &mut RngState) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix
    let mut cols: Vec<Vec<f64>> = Vec::new();
    while cols.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
        for c in &cols {
            let d: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            for (vi, ci) in v.iter_mut().zip(c) {
                *vi -= d * ci;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    Matrix::from_fn(n, n, |i, j| cols[j][i])
}

/// `Q diag(d) Qᵀ`.
fn with_spectrum(d: &[f64], rng: &mut RngState) -> SymMatrix {
    let n = d.len();
    let q = random_orthogonal(n, rng);
    let m = q.matmul(&Matrix::from_diag(d)).matmul(&q.transpose());
    SymMatrix::new(m).unwrap()
}

/// Gauss-Jordan inverse with partial pivoting.
fn gauss_jordan_inverse(m: &Matrix) -> Matrix {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut r = m.row(i).to_vec();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs())).unwrap();
        a.swap(c, piv);
        let p = a[c][c];
        for v in a[c].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                let row_c = a[c].clone();
                for (v, w) in a[r].iter_mut().zip(row_c) {
                    *v -= f * w;
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| a[i][n + j])
}

#[test]
fn fd_examples() {
    let g = fd_gradient(|x| Some(x[0] * x[0]), &[3.0], 1e-5);
    assert!((g.value[0] - 6.0).abs() < 1e-6 && g.one_sided.is_empty());
    let g = fd_gradient(|x| Some(x[0] * x[0] + x[1] * x[1]), &[1.0, 2.0], 1e-5);
    assert!((g.value[0] - 2.0).abs() < 1e-6 && (g.value[1] - 4.0).abs() < 1e-6);
    // ln x at the domain edge falls back to a one-sided stencil
    let g = fd_gradient(|x| (x[0] > 0.0).then(|| x[0].ln()), &[5e-6], 1e-5);
    assert_eq!(g.one_sided, vec![0]);
    let j = fd_jacobian(|x| Some(vec![x[0] * x[1], x[1]]), &[2.0, 3.0], 1e-5);
    assert!((j.value[0][0] - 3.0).abs() < 1e-8 && (j.value[0][1] - 2.0).abs() < 1e-8);
}

#[test]
fn solve_spd_matches_explicit_inverse() {
    let mut rng = RngState::new(9);
    let m = with_spectrum(&[40.0, 9.0, 2.5, 0.3], &mut rng);
    let rhs = Matrix::from_fn(4, 6, |_, _| rng.standard_normal());
    let x = solve_spd(&m, &rhs).unwrap();
    let oracle = gauss_jordan_inverse(m.as_matrix()).matmul(&rhs);
    assert!(x.max_abs_diff(&oracle) <= 1e-8 * oracle.max_abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_decomposition(seed in any::<u64>(), n in 1usize..9) {
        let mut rng = RngState::new(seed);
        let m = SymMatrix::from_upper(n, |_, _| rng.uniform(-3.0, 3.0)).unwrap();
        let e = sym_eigen(&m);
        let norm = m.as_matrix().max_abs().max(1e-300);
        let trace = m.as_matrix().trace();
        prop_assert!((e.values.iter().sum::<f64>() - trace).abs() <= 1e-8 * norm * n as f64);
        let vtv = e.vectors.transpose().matmul(&e.vectors);
        prop_assert!(vtv.max_abs_diff(&Matrix::identity(n)) < 1e-10);
        for i in 0..n {
            let v = e.vector(i);
            let mv = m.as_matrix().mul_vec(&v);
            for k in 0..n {
                prop_assert!((mv[k] - e.values[i] * v[k]).abs() <= 1e-8 * norm);
            }
        }
        let rec = e.vectors.matmul(&Matrix::from_diag(&e.values)).matmul(&e.vectors.transpose());
        prop_assert!(rec.max_abs_diff(m.as_matrix()) <= 1e-8 * norm);
        for w in e.values.windows(2) {
            prop_assert!(w[0].abs() >= w[1].abs());
        }
    }

    #[test]
    fn spd_solve_backward_error(seed in any::<u64>(), n in 2usize..7, log_cond in 0.0f64..10.0) {
        let mut rng = RngState::new(seed);
        let d: Vec<f64> = (0..n).map(|i| 10f64.powf(-log_cond * i as f64 / (n - 1) as f64)).collect();
        let m = with_spectrum(&d, &mut rng);
        let rhs = Matrix::from_fn(n, 2, |_, _| rng.standard_normal());
        let x = solve_spd(&m, &rhs).unwrap();
        let r = m.as_matrix().matmul(&x);
        let scale = m.as_matrix().max_abs() * x.max_abs() + rhs.max_abs();
        prop_assert!(r.max_abs_diff(&rhs) <= 1e-8 * scale);
    }

    #[test]
    fn bfgs_on_concave_quadratics(seed in any::<u64>(), n in 1usize..6) {
        let mut rng = RngState::new(seed);
        let d: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 5.0)).collect();
        let a = with_spectrum(&d, &mut rng);
        let opt: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let start: Vec<f64> = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let am = a.as_matrix().clone();
        let f = |x: &[f64]| {
            let dx: Vec<f64> = x.iter().zip(&opt).map(|(a, b)| a - b).collect();
            -0.5 * a.quad_form(&dx)
        };
        let g = |x: &[f64]| {
            let dx: Vec<f64> = x.iter().zip(&opt).map(|(a, b)| a - b).collect();
            am.mul_vec(&dx).into_iter().map(|v| -v).collect()
        };
        let opts = OptimOptions { gradient_tolerance: 1e-10, ..OptimOptions::default() };
        let m = maximize(f, g, &start, |_| true, &opts).unwrap();
        prop_assert!(m.converged);
        prop_assert!(m.iterations <= 50, "{} iterations", m.iterations);
        prop_assert!(m.value >= f(&start));
        for (x, o) in m.x.iter().zip(&opt) {
            prop_assert!((x - o).abs() < 1e-8);
        }
    }

    #[test]
    fn rng_streams_reproduce(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = RngState::derive(seed, stream);
        let mut b = RngState::derive(seed, stream);
        for _ in 0..16 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
