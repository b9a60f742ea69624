//! Significance tests over paired per-trial costs.
//!
//! The t and F tail probabilities go through the regularized incomplete beta
//! function, evaluated by a modified-Lentz continued fraction. The normal tail
//! used by the large-sample Wilcoxon approximation goes through the
//! regularized incomplete gamma function.

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Set when a degenerate-data convention produced the result.
    pub degenerate: bool,
}

impl TestResult {
    fn new(statistic: f64, p_value: f64) -> Self {
        TestResult {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            degenerate: false,
        }
    }

    fn degenerate(statistic: f64, p_value: f64) -> Self {
        TestResult {
            statistic,
            p_value,
            degenerate: true,
        }
    }
}

/// ln Γ(x) for x > 0 (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_bt = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let bt = ln_bt.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * beta_cf(a, b, x) / a
    } else {
        1.0 - bt * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn inc_gamma_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let gln = ln_gamma(a);
    if x < a + 1.0 {
        // series for P
        let mut ap = a;
        let mut del = 1.0 / a;
        let mut sum = del;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - gln).exp()
    } else {
        // continued fraction for Q
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (-x + a * x.ln() - gln).exp() * h
    }
}

/// P(Z ≤ z) for a standard normal.
pub fn normal_cdf(z: f64) -> f64 {
    // Φ(z) = erfc(-z/√2)/2 and erfc(y) = Q(1/2, y²) for y ≥ 0
    let y = z / std::f64::consts::SQRT_2;
    let tail = 0.5 * inc_gamma_upper(0.5, y * y);
    if z >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Two-tailed P(|T| ≥ |t|) for Student's t with `df` degrees of freedom.
pub fn t_two_tailed(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

/// CDF of Student's t.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * t_two_tailed(t, df);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// P(F ≥ f) for the F distribution.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    inc_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Classical one-way ANOVA F test.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::Domain("ANOVA needs at least two groups".into()));
    }
    if groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Domain("ANOVA groups need at least two values".into()));
    }
    let k = groups.len() as f64;
    let total: usize = groups.iter().map(Vec::len).sum();
    let n = total as f64;
    let grand = groups.iter().flatten().sum::<f64>() / n;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand) * (m - grand);
        ss_within += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    if ss_within == 0.0 {
        let means_equal = groups.windows(2).all(|w| mean(&w[0]) == mean(&w[1]));
        return Ok(if means_equal {
            TestResult::degenerate(0.0, 1.0)
        } else {
            TestResult::degenerate(f64::INFINITY, 0.0)
        });
    }
    let (d1, d2) = (k - 1.0, n - k);
    let f = (ss_between / d1) / (ss_within / d2);
    Ok(TestResult::new(f, f_survival(f, d1, d2)))
}

/// Two-sample Student t test with pooled variance.
pub fn student_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Domain("t test needs at least two values per sample".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let ssa: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let ssb: f64 = b.iter().map(|x| (x - mb) * (x - mb)).sum();
    let df = na + nb - 2.0;
    let pooled = (ssa + ssb) / df;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return Ok(if ma == mb {
            TestResult::degenerate(0.0, 1.0)
        } else {
            TestResult::degenerate((ma - mb).signum() * f64::INFINITY, 0.0)
        });
    }
    let t = (ma - mb) / se;
    Ok(TestResult::new(t, t_two_tailed(t, df)))
}

/// Paired two-tailed t test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Domain("paired samples differ in length".into()));
    }
    if a.len() < 2 {
        return Err(Error::Domain("paired t test needs at least two pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let var = d.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return Ok(if m == 0.0 {
            TestResult::degenerate(0.0, 1.0)
        } else {
            TestResult::degenerate(m.signum() * f64::INFINITY, 0.0)
        });
    }
    let t = m / (var.sqrt() / n.sqrt());
    Ok(TestResult::new(t, t_two_tailed(t, n - 1.0)))
}

/// Largest sample size for which the exact null distribution is used.
pub const WILCOXON_EXACT_MAX: usize = 25;

/// Wilcoxon signed-rank test on `a - b`; statistic is min(W+, W-).
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() != b.len() {
        return Err(Error::Domain("paired samples differ in length".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|x| *x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(TestResult::degenerate(0.0, 1.0));
    }

    // midranks of |d|, doubled so they stay integral
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].abs().total_cmp(&d[j].abs()));
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && d[order[j]].abs() == d[order[i]].abs() {
            j += 1;
        }
        // positions i+1..=j share rank (i+1+j)/2
        let r2 = (i + 1 + j) as u64;
        for &o in &order[i..j] {
            rank2[o] = r2;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let w_plus2: u64 = (0..n).filter(|&i| d[i] > 0.0).map(|i| rank2[i]).sum();
    let total2: u64 = rank2.iter().sum();
    let w2 = w_plus2.min(total2 - w_plus2);
    let w = w2 as f64 / 2.0;

    let p = if n <= WILCOXON_EXACT_MAX {
        // subset-sum counts of doubled ranks under random signs
        let mut counts = vec![0.0f64; total2 as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &rank2 {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] != 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let all = 2f64.powi(n as i32);
        let lower: f64 = counts[..=w2 as usize].iter().sum();
        (2.0 * lower / all).min(1.0)
    } else {
        let nf = n as f64;
        let mu = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let diff = w - mu;
        let z = (diff - 0.5 * diff.signum()) / var.sqrt();
        (2.0 * normal_cdf(-z.abs())).min(1.0)
    };
    Ok(TestResult::new(w, p))
}
