use crate::error::{Error, Result};

/// Parameters of the exploration process on `G(N, λ/N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Population size `N`.
    pub population: usize,
    /// Mean-degree parameter `λ`; edges are present with probability `λ/N`.
    pub lambda: f64,
    /// Coupon cap `c`: at most this many coupons per interviewee.
    pub coupons: usize,
    /// Coupon holders at step 0.
    pub initial_holders: usize,
    /// Named-but-couponless individuals at step 0.
    pub initial_named: usize,
}

impl ModelParams {
    pub fn new(population: usize, lambda: f64, coupons: usize, initial_holders: usize) -> Result<Self> {
        let params = ModelParams {
            population,
            lambda,
            coupons,
            initial_holders,
            initial_named: 0,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_initial_named(mut self, named: usize) -> Result<Self> {
        self.initial_named = named;
        self.validate()?;
        Ok(self)
    }

    /// Initial holders taken as `round(a0 * N)`, at least one.
    pub fn from_fraction(population: usize, lambda: f64, coupons: usize, a0: f64) -> Result<Self> {
        if !(a0 > 0.0 && a0 <= 1.0) {
            return Err(Error::invalid(format!("initial fraction a0={a0} must lie in (0, 1]")));
        }
        let holders = ((a0 * population as f64).round() as usize).max(1);
        Self::new(population, lambda, coupons, holders)
    }

    pub fn validate(&self) -> Result<()> {
        if self.population == 0 {
            return Err(Error::invalid("population N must be at least 1"));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda={} must be finite and non-negative", self.lambda)));
        }
        if self.lambda > self.population as f64 {
            return Err(Error::invalid(format!(
                "lambda={} exceeds N={}: edge probability above 1",
                self.lambda, self.population
            )));
        }
        if self.coupons == 0 {
            return Err(Error::invalid("coupon cap c must be at least 1"));
        }
        if self.initial_holders == 0 {
            return Err(Error::invalid("at least one initial coupon holder is required"));
        }
        if self.initial_holders + self.initial_named > self.population {
            return Err(Error::invalid(format!(
                "A0 + B0 = {} exceeds N={}",
                self.initial_holders + self.initial_named,
                self.population
            )));
        }
        Ok(())
    }

    /// Edge probability `λ/N`.
    pub fn edge_prob(&self) -> f64 {
        self.lambda / self.population as f64
    }

    /// `λ > 1`: metadata only, nothing depends on it.
    pub fn is_supercritical(&self) -> bool {
        self.lambda > 1.0
    }

    pub fn initial_fraction(&self) -> f64 {
        self.initial_holders as f64 / self.population as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(0, 1.0, 1, 1).is_err());
        assert!(ModelParams::new(10, -1.0, 1, 1).is_err());
        assert!(ModelParams::new(10, f64::NAN, 1, 1).is_err());
        assert!(ModelParams::new(10, 11.0, 1, 1).is_err());
        assert!(ModelParams::new(10, 2.0, 0, 1).is_err());
        assert!(ModelParams::new(10, 2.0, 2, 0).is_err());
        assert!(ModelParams::new(10, 2.0, 2, 11).is_err());
        assert!(ModelParams::new(10, 2.0, 2, 6).unwrap().with_initial_named(5).is_err());
    }

    #[test]
    fn fraction_rounds_to_count() {
        let p = ModelParams::from_fraction(1000, 2.0, 3, 0.005).unwrap();
        assert_eq!(p.initial_holders, 5);
        let p = ModelParams::from_fraction(4000, 2.0, 3, 0.005).unwrap();
        assert_eq!(p.initial_holders, 20);
        let p = ModelParams::from_fraction(10, 2.0, 3, 0.001).unwrap();
        assert_eq!(p.initial_holders, 1);
        assert!(!ModelParams::new(10, 1.0, 1, 1).unwrap().is_supercritical());
    }
}
