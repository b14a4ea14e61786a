//! Two-class Gaussian region statistics backed by integer histograms.
//!
//! Each class keeps a histogram over integer greylevels together with the
//! running count, sum and sum of squares, so adding or removing a voxel is
//! O(1) and so is re-estimating `(mu, sigma)`.

use crate::error::{Error, Result};

/// Lower bound on every estimated standard deviation, in greylevels.
pub const SIGMA_FLOOR: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassHistogram {
    bins: Vec<u64>,
    n: u64,
    sum: u128,
    sumsq: u128,
}

impl ClassHistogram {
    /// Empty histogram with one bin per greylevel `0..levels`.
    pub fn new(levels: usize) -> Self {
        ClassHistogram {
            bins: vec![0; levels],
            n: 0,
            sum: 0,
            sumsq: 0,
        }
    }

    pub fn from_samples(levels: usize, samples: impl IntoIterator<Item = u16>) -> Self {
        let mut h = Self::new(levels);
        for g in samples {
            h.add(g);
        }
        h
    }

    #[inline]
    pub fn add(&mut self, g: u16) {
        let g = g as usize;
        self.bins[g] += 1;
        self.n += 1;
        self.sum += g as u128;
        self.sumsq += (g * g) as u128;
    }

    /// Removes one sample of greylevel `g`.
    ///
    /// Panics if the bin is empty: that means the caller's labels and the
    /// histogram have drifted apart.
    #[inline]
    pub fn remove(&mut self, g: u16) {
        let gi = g as usize;
        assert!(
            self.bins[gi] > 0,
            "removing greylevel {g} from an empty histogram bin"
        );
        self.bins[gi] -= 1;
        self.n -= 1;
        self.sum -= gi as u128;
        self.sumsq -= (gi * gi) as u128;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn sum(&self) -> u128 {
        self.sum
    }

    pub fn sumsq(&self) -> u128 {
        self.sumsq
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    /// Gaussian parameters of the current samples.
    pub fn estimate(&self) -> Result<GaussianParams> {
        if self.n < 2 {
            return Err(Error::InsufficientSamples {
                class: "histogram",
                n: self.n,
            });
        }
        let n = self.n as u128;
        let mu = self.sum as f64 / self.n as f64;
        // n * sumsq - sum^2 is exact in u128 for any realistic volume.
        let spread = n * self.sumsq - self.sum * self.sum;
        let var = spread as f64 / (self.n as f64 * self.n as f64);
        Ok(GaussianParams::floored(mu, var.sqrt()))
    }

    /// `sum over samples of (g - mu)^2`, from the moments.
    pub fn squared_deviation(&self, mu: f64) -> f64 {
        let n = self.n as f64;
        let sum = self.sum as f64;
        let sumsq = self.sumsq as f64;
        (sumsq - 2.0 * mu * sum + n * mu * mu).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianParams {
    pub mu: f64,
    pub sigma: f64,
}

impl GaussianParams {
    /// Parameters with `sigma` raised to [`SIGMA_FLOOR`] if needed.
    pub fn floored(mu: f64, sigma: f64) -> Self {
        GaussianParams {
            mu,
            sigma: sigma.max(SIGMA_FLOOR),
        }
    }

    /// `-log N(g; mu, sigma^2)`.
    pub fn neg_log_pdf(&self, g: f64) -> f64 {
        let d = g - self.mu;
        d * d / (2.0 * self.sigma * self.sigma)
            + (self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }
}

/// Region data term of the front velocity for greylevel `g`:
///
/// `(g - mu2)^2 / (2 sigma2^2) - (g - mu1)^2 / (2 sigma1^2) + ln(sigma2 / sigma1)`
///
/// It equals `-ln p2(g) + ln p1(g)`, so it is positive where the background
/// class explains `g` better. With the foreground on the negative side of
/// the level set, a positive value pushes the front towards the background
/// label.
pub fn speed_term(g: f64, background: &GaussianParams, foreground: &GaussianParams) -> f64 {
    let d2 = g - foreground.mu;
    let d1 = g - background.mu;
    d2 * d2 / (2.0 * foreground.sigma * foreground.sigma)
        - d1 * d1 / (2.0 * background.sigma * background.sigma)
        + (foreground.sigma / background.sigma).ln()
}
