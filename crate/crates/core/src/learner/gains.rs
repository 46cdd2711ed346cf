use crate::error::{Error, Result};

/// Polynomially decaying gains `a(k) = a_scale (k+1)^-a_exponent` and
/// `b(k) = b_scale (k+1)^-b_exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    a_exponent: f64,
    b_exponent: f64,
    a_scale: f64,
    b_scale: f64,
}

impl GainSchedule {
    pub fn new(a_exponent: f64, b_exponent: f64) -> Result<Self> {
        Self::with_scales(a_exponent, b_exponent, 1.0, 1.0)
    }

    pub fn with_scales(a_exponent: f64, b_exponent: f64, a_scale: f64, b_scale: f64) -> Result<Self> {
        for (name, v) in [("a_exponent", a_exponent), ("b_exponent", b_exponent)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGains(format!("{name} = {v} must be positive")));
            }
        }
        for (name, v) in [("a_scale", a_scale), ("b_scale", b_scale)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidGains(format!("{name} = {v} must be positive")));
            }
        }
        Ok(GainSchedule { a_exponent, b_exponent, a_scale, b_scale })
    }

    /// `a(k) = (k+1)^-0.6`, `b(k) = (k+1)^-1`.
    pub fn benchmark() -> Self {
        Self::new(0.6, 1.0).expect("valid")
    }

    pub fn a_exponent(&self) -> f64 {
        self.a_exponent
    }

    pub fn b_exponent(&self) -> f64 {
        self.b_exponent
    }

    #[inline]
    pub fn a(&self, k: u64) -> f64 {
        self.a_scale * (k as f64 + 1.0).powf(-self.a_exponent)
    }

    #[inline]
    pub fn b(&self, k: u64) -> f64 {
        self.b_scale * (k as f64 + 1.0).powf(-self.b_exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    /// Positive and monotonically decreasing.
    pub cond1: bool,
    /// Square summable.
    pub cond2: bool,
    /// `Σ a(k) = ∞`.
    pub cond3_sum: bool,
    /// `max{a(k) - a(k+1), b(k) - a(k)} = O(a²(k) + b²(k))` over the horizon.
    pub cond3_rate: bool,
    pub rate_sup: f64,
}

impl GainReport {
    pub fn all_pass(&self) -> bool {
        self.cond1 && self.cond2 && self.cond3_sum && self.cond3_rate
    }
}

/// Relative slack allowed when comparing the last decade's rate supremum to
/// the earlier one.
const RATE_GROWTH_SLACK: f64 = 1e-3;

/// Checks the gain conditions. The rate condition is asymptotic, so over a
/// finite horizon it is judged by whether the ratio
/// `max{a(k)-a(k+1), b(k)-a(k)} / (a²(k)+b²(k))` stays finite and its
/// supremum on the last decade `[horizon/10, horizon]` does not exceed its
/// supremum on `[0, horizon/10)`.
pub fn validate_gains(s: &GainSchedule, horizon: u64) -> Result<GainReport> {
    if horizon < 10 {
        return Err(Error::InvalidGains(format!("horizon {horizon} must be at least 10")));
    }
    let mut cond1 = true;
    let mut early_sup = f64::NEG_INFINITY;
    let mut late_sup = f64::NEG_INFINITY;
    let decade = horizon / 10;
    let (mut a_k, mut b_k) = (s.a(0), s.b(0));
    for k in 0..=horizon {
        let (a_next, b_next) = (s.a(k + 1), s.b(k + 1));
        if !(a_k > 0.0 && b_k > 0.0 && a_next < a_k && b_next < b_k) {
            cond1 = false;
        }
        let ratio = (a_k - a_next).max(b_k - a_k) / (a_k * a_k + b_k * b_k);
        if k < decade {
            early_sup = early_sup.max(ratio);
        } else {
            late_sup = late_sup.max(ratio);
        }
        a_k = a_next;
        b_k = b_next;
    }
    let rate_sup = early_sup.max(late_sup);
    let cond3_rate =
        rate_sup.is_finite() && late_sup <= early_sup + RATE_GROWTH_SLACK * early_sup.abs();
    Ok(GainReport {
        cond1,
        cond2: s.a_exponent > 0.5 && s.b_exponent > 0.5,
        cond3_sum: s.a_exponent <= 1.0,
        cond3_rate,
        rate_sup,
    })
}
