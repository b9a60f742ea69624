//! Numeric kernels cross-checked against statrs.

use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::{gamma_ur, ln_gamma as sr_ln_gamma};

use roadroute::stats::{f_survival, inc_beta, inc_gamma_upper, ln_gamma, normal_cdf, t_cdf, t_two_tailed};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-3)
}

#[test]
fn ln_gamma_matches() {
    for &x in &[0.1, 0.5, 1.0, 1.5, 2.5, 7.0, 10.3, 55.5, 170.0] {
        assert!(close(ln_gamma(x), sr_ln_gamma(x), 1e-10), "x={x}");
    }
}

#[test]
fn incomplete_beta_matches() {
    for &(a, b) in &[(0.5, 0.5), (1.0, 3.0), (2.5, 7.0), (10.0, 0.5), (40.0, 60.0)] {
        for &x in &[0.01, 0.2, 0.5, 0.77, 0.99] {
            assert!(close(inc_beta(a, b, x), beta_reg(a, b, x), 1e-9), "a={a} b={b} x={x}");
        }
    }
}

#[test]
fn incomplete_gamma_matches() {
    for &a in &[0.5, 1.0, 3.0, 12.5] {
        for &x in &[0.1, 1.0, 4.0, 20.0] {
            assert!(close(inc_gamma_upper(a, x), gamma_ur(a, x), 1e-9), "a={a} x={x}");
        }
    }
}

#[test]
fn distributions_match() {
    let n = Normal::new(0.0, 1.0).unwrap();
    for &z in &[-6.0, -2.5, -0.3, 0.0, 1.0, 3.7] {
        assert!(close(normal_cdf(z), n.cdf(z), 1e-9), "z={z}");
    }
    for &df in &[1.0, 4.0, 19.0, 198.0] {
        let t = StudentsT::new(0.0, 1.0, df).unwrap();
        for &x in &[-4.0, -1.2, 0.0, 0.7, 2.9] {
            assert!(close(t_cdf(x, df), t.cdf(x), 1e-9), "df={df} x={x}");
            let two = 2.0 * t.sf(x.abs());
            assert!(close(t_two_tailed(x, df), two, 1e-9), "df={df} x={x}");
        }
    }
    for &(d1, d2) in &[(1.0, 10.0), (8.0, 1791.0), (3.0, 5.0)] {
        let f = FisherSnedecor::new(d1, d2).unwrap();
        for &x in &[0.1, 1.0, 2.5, 9.0] {
            assert!(close(f_survival(x, d1, d2), f.sf(x), 1e-8), "d1={d1} d2={d2} x={x}");
        }
    }
}
