use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};
use statrs::statistics::{Data, OrderStatistics, Statistics};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for one value.
    pub std: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Summary {
    let count = values.len();
    let mean = values.iter().mean();
    let std = if count > 1 { values.iter().std_dev() } else { 0.0 };
    let median = Data::new(values.to_vec()).median();
    Summary {
        count,
        mean,
        std,
        median,
    }
}

/// Paired sign test over per-prompt differences; ties are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// One-sided P(X ≥ wins) for X ~ Binomial(wins + losses, 1/2).
    pub p_value: f64,
}

pub fn sign_test(differences: &[f64]) -> SignTest {
    let wins = differences.iter().filter(|&&d| d > 0.0).count();
    let losses = differences.iter().filter(|&&d| d < 0.0).count();
    let ties = differences.len() - wins - losses;
    let n = (wins + losses) as u64;
    let p_value = if wins == 0 {
        1.0
    } else {
        Binomial::new(0.5, n).expect("valid binomial").sf(wins as u64 - 1)
    };
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(summarize(&[7.0]).std, 0.0);
    }

    #[test]
    fn sign_test_counts_and_tail() {
        let t = sign_test(&[1.0, 2.0, -1.0, 0.0]);
        assert_eq!((t.wins, t.losses, t.ties), (2, 1, 1));
        // P(X >= 2), X ~ Bin(3, 1/2) = 4/8
        assert!((t.p_value - 0.5).abs() < 1e-12);
        let all = sign_test(&[1.0; 25]);
        assert!((all.p_value - 0.5f64.powi(25)).abs() < 1e-15);
        assert_eq!(sign_test(&[-1.0, 0.0]).p_value, 1.0);
    }
}
