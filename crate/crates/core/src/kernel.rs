//! Mercer kernels on a closed real interval.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
}

impl Domain {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidKernel(format!("empty or unbounded domain [{lo}, {hi}]")));
        }
        Ok(Domain { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        self.lo <= lo && hi <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelFamily {
    /// `exp(-γ (x - y)²)`
    Gaussian { gamma: f64 },
    /// `exp(-|x - y| / s)`
    Laplace { scale: f64 },
    /// `(x y + c)^d`
    Polynomial { degree: u32, offset: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    family: KernelFamily,
    domain: Domain,
    lenient: bool,
}

impl Kernel {
    pub fn new(family: KernelFamily, domain: Domain) -> Result<Self> {
        match family {
            KernelFamily::Gaussian { gamma } if !(gamma > 0.0 && gamma.is_finite()) => {
                return Err(Error::InvalidKernel(format!("gaussian bandwidth {gamma} must be > 0")));
            }
            KernelFamily::Laplace { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(Error::InvalidKernel(format!("laplace scale {scale} must be > 0")));
            }
            KernelFamily::Polynomial { degree, offset } if degree == 0 || !(offset >= 0.0) => {
                return Err(Error::InvalidKernel(format!(
                    "polynomial needs degree >= 1 and offset >= 0, got d={degree}, c={offset}"
                )));
            }
            _ => {}
        }
        Ok(Kernel { family, domain, lenient: false })
    }

    pub fn gaussian(gamma: f64, lo: f64, hi: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { gamma }, Domain::new(lo, hi)?)
    }

    /// Clamp out-of-domain points instead of rejecting them.
    pub fn lenient(mut self, lenient: bool) -> Self {
        self.lenient = lenient;
        self
    }

    pub fn is_lenient(&self) -> bool {
        self.lenient
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub(crate) fn check(&self, x: f64) -> Result<f64> {
        if self.domain.contains(x) {
            Ok(x)
        } else if self.lenient && x.is_finite() {
            Ok(x.clamp(self.domain.lo, self.domain.hi))
        } else {
            Err(Error::OutOfDomain { x, lo: self.domain.lo, hi: self.domain.hi })
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        let x = self.check(x)?;
        let y = self.check(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian { gamma } => {
                let d = x - y;
                (-gamma * d * d).exp()
            }
            KernelFamily::Laplace { scale } => (-(x - y).abs() / scale).exp(),
            KernelFamily::Polynomial { degree, offset } => (x * y + offset).powi(degree as i32),
        }
    }

    /// Writes `K(x, points[l])` into `out`. Points are assumed validated.
    pub(crate) fn column_into(&self, x: f64, points: &[f64], out: &mut [f64]) {
        debug_assert_eq!(points.len(), out.len());
        match self.family {
            KernelFamily::Gaussian { gamma } => {
                for (o, &z) in out.iter_mut().zip(points) {
                    let d = x - z;
                    *o = (-gamma * d * d).exp();
                }
            }
            _ => {
                for (o, &z) in out.iter_mut().zip(points) {
                    *o = self.eval_unchecked(x, z);
                }
            }
        }
    }

    pub fn gram(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let pts = points.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>>>()?;
        let n = pts.len();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = self.eval_unchecked(pts[i], pts[j]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }

    /// Upper bound on `K(x, x)` over the domain.
    pub fn sup_diag_bound(&self) -> f64 {
        match self.family {
            KernelFamily::Gaussian { .. } | KernelFamily::Laplace { .. } => 1.0,
            KernelFamily::Polynomial { degree, offset } => {
                let r2 = self.domain.lo.powi(2).max(self.domain.hi.powi(2));
                (r2 + offset).powi(degree as i32)
            }
        }
    }
}
