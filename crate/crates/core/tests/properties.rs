use maxnorm::norms::{factor_norms, matrix_norms, pi_weighted_sq_norm, DEFAULT_RANK_TOLERANCE};
use maxnorm::sampling::DistributionSpec;
use maxnorm::solver::{linf_rescale, project_factor_rows};
use maxnorm::{DenseMatrix, Factorization, SamplingDistribution};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| DenseMatrix::new(rows, cols, v).unwrap())
}

fn factorization() -> impl Strategy<Value = Factorization> {
    (1usize..10, 1usize..10, 1usize..5).prop_flat_map(|(d1, d2, k)| {
        (matrix(d1, k), matrix(d2, k)).prop_map(|(u, v)| Factorization::new(u, v).unwrap())
    })
}

proptest! {
    #[test]
    fn norm_sandwich(f in factorization()) {
        let m = f.product();
        let (d1, d2) = m.shape();
        let n = matrix_norms(&m, DEFAULT_RANK_TOLERANCE).unwrap();
        let fac = factor_norms(&f).unwrap();
        let slack = 1e-9 * (1.0 + n.trace);
        prop_assert!(n.frobenius <= n.trace + slack);
        prop_assert!(n.trace <= (n.rank_numeric as f64).sqrt() * n.frobenius + slack);
        prop_assert!(n.linf <= fac.max_norm_upper + slack);
        prop_assert!(n.trace / ((d1 * d2) as f64).sqrt() <= fac.max_norm_upper + slack);
    }

    #[test]
    fn row_projection_is_idempotent_and_feasible(a in (1usize..12, 1usize..6).prop_flat_map(|(r, c)| matrix(r, c)), radius in 0.01f64..5.0) {
        let p = project_factor_rows(&a, radius);
        let again = project_factor_rows(&p, radius);
        for (x, y) in again.as_slice().iter().zip(p.as_slice()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!(p.max_row_norm().powi(2) <= radius * (1.0 + 1e-12));
        for i in 0..a.rows() {
            let sq: f64 = a.row(i).iter().map(|x| x * x).sum();
            if sq <= radius {
                prop_assert_eq!(p.row(i), a.row(i));
            }
        }
    }

    #[test]
    fn rescale_post_state(f in factorization(), frac in 0.01f64..2.0) {
        let linf = f.product().linf();
        prop_assume!(linf > 1e-6);
        let alpha = linf * frac;
        let out = linf_rescale(&f, alpha).product().linf();
        if frac < 1.0 {
            prop_assert!((out - alpha).abs() <= 1e-12 * alpha.max(1.0));
        } else {
            prop_assert_eq!(out, linf);
        }
    }

    #[test]
    fn uniform_weighting_is_normalized_frobenius(m in (1usize..10, 1usize..10).prop_flat_map(|(r, c)| matrix(r, c))) {
        let (d1, d2) = m.shape();
        let pi = SamplingDistribution::uniform(d1, d2).unwrap();
        let w = pi_weighted_sq_norm(&m, &pi).unwrap();
        prop_assert!((w - m.frobenius_sq() / (d1 * d2) as f64).abs() <= 1e-12 * (1.0 + w));
    }

    #[test]
    fn empirical_frequencies_approach_probabilities(
        rows in prop::collection::vec(0.1f64..3.0, 1..5),
        cols in prop::collection::vec(0.1f64..3.0, 1..5),
        seed in any::<u64>(),
    ) {
        let (d1, d2) = (rows.len(), cols.len());
        let pi = DistributionSpec::Product { rows, cols }.build(d1, d2, true).unwrap();
        let n = 40_000;
        let mut counts = vec![0usize; d1 * d2];
        for (i, j) in pi.sample_indices(n, seed) {
            counts[i * d2 + j] += 1;
        }
        let tv: f64 = counts.iter().zip(pi.probs()).map(|(&c, p)| (c as f64 / n as f64 - p).abs()).sum::<f64>() / 2.0;
        // E[TV] <= sqrt(cells / n) / 2 <= 0.01 here.
        prop_assert!(tv < 0.03, "tv {}", tv);
    }
}
