use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use polyrank_core::eval::{ln_gamma, paired_t_test, regularized_incomplete_beta, student_t_two_sided};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + b.abs())
}

proptest! {
    #[test]
    fn t_tail_matches_statrs(t in -12.0f64..12.0, df in 1u32..200) {
        let oracle = 2.0 * StudentsT::new(0.0, 1.0, df as f64).unwrap().cdf(-t.abs());
        let ours = student_t_two_sided(t, df as f64);
        prop_assert!(close(ours, oracle, 1e-9), "t={} df={} ours={} statrs={}", t, df, ours, oracle);
    }

    #[test]
    fn incomplete_beta_matches_statrs(a in 0.2f64..60.0, b in 0.2f64..60.0, x in 0.0f64..=1.0) {
        let oracle = statrs::function::beta::beta_reg(a, b, x);
        let ours = regularized_incomplete_beta(a, b, x);
        prop_assert!(close(ours, oracle, 1e-9), "a={} b={} x={} ours={} statrs={}", a, b, x, ours, oracle);
    }

    #[test]
    fn ln_gamma_matches_statrs(x in 0.01f64..150.0) {
        let oracle = statrs::function::gamma::ln_gamma(x);
        prop_assert!(close(ln_gamma(x), oracle, 1e-10), "x={}", x);
    }

    #[test]
    fn paired_test_agrees_with_a_direct_computation(
        diffs in prop::collection::vec(-1.0f64..1.0, 2..40),
        base in prop::collection::vec(0.0f64..1.0, 40),
    ) {
        let b: Vec<f64> = base[..diffs.len()].to_vec();
        let a: Vec<f64> = b.iter().zip(&diffs).map(|(x, d)| x + d).collect();
        let n = diffs.len() as f64;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        match paired_t_test(&a, &b) {
            Ok(r) => {
                let t = mean / (sd / n.sqrt());
                let p = 2.0 * StudentsT::new(0.0, 1.0, n - 1.0).unwrap().cdf(-t.abs());
                prop_assert!(close(r.mean_diff, mean, 1e-12));
                prop_assert!(close(r.t, t, 1e-9));
                prop_assert!(close(r.p, p, 1e-8), "p {} vs {}", r.p, p);
                prop_assert_eq!(r.n, diffs.len());
            }
            Err(_) => prop_assert!(sd < 1e-12),
        }
    }
}

#[test]
fn known_quantiles() {
    // two-sided 5% critical values
    for (df, t) in [(1.0, 12.706204736174705), (10.0, 2.2281388519649385), (30.0, 2.0422724563012373)] {
        assert!(close(student_t_two_sided(t, df), 0.05, 1e-9), "df {df}");
    }
    assert_eq!(student_t_two_sided(0.0, 5.0), 1.0);
    assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-12));
}
