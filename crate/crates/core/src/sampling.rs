//! Deterministic sampling in the trust-region ball.
//!
//! All estimators draw their points through this module so that a `(seed,
//! samples)` pair fully determines the result. The generator is ChaCha8, a
//! counter-mode stream cipher seeded from a single `u64`; its output is
//! platform-independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::space::{BallSpec, Vector};

pub struct BallSampler {
    ball: BallSpec,
    rng: ChaCha8Rng,
}

impl BallSampler {
    pub fn new(ball: &BallSpec, seed: u64) -> Self {
        BallSampler {
            ball: ball.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn ball(&self) -> &BallSpec {
        &self.ball
    }

    fn standard_normal(&mut self) -> f64 {
        // Box-Muller; one value per call keeps the stream layout simple.
        let u1: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = self.rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniformly distributed unit direction.
    pub fn unit_direction(&mut self) -> Vector {
        let dim = self.ball.dim();
        loop {
            let mut entries: Vec<f64> = Vec::with_capacity(dim);
            for _ in 0..dim {
                entries.push(self.standard_normal());
            }
            let n = entries.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 1e-300 {
                return Vector::new(entries.iter().map(|x| x / n).collect())
                    .expect("normal draws are finite");
            }
            // retry on the (absurdly unlikely) zero draw
        }
    }

    /// Uniform point in the closed ball: direction uniform on the sphere,
    /// radius rho * U^(1/d).
    pub fn uniform_point(&mut self) -> Vector {
        let d = self.unit_direction();
        let u: f64 = self.rng.gen();
        let r = self.ball.radius() * u.powf(1.0 / self.ball.dim() as f64);
        self.ball.center().add_scaled(r, &d)
    }

    /// Point whose distance from the center is uniform in
    /// `[lo_frac, hi_frac] * radius`.
    pub fn shell_point(&mut self, lo_frac: f64, hi_frac: f64) -> Vector {
        let d = self.unit_direction();
        let r = self.ball.radius() * self.rng.gen_range(lo_frac..=hi_frac);
        self.ball.center().add_scaled(r, &d)
    }

    /// Offset z with inner_radius <= ||z|| <= radius, for the balancing
    /// annulus of the ball.
    pub fn annulus_offset(&mut self) -> Vector {
        let d = self.unit_direction();
        let lo = self.ball.inner_radius().max(f64::MIN_POSITIVE);
        let r = self.rng.gen_range(lo..=self.ball.radius());
        d.scale(r)
    }

    pub fn uniform_scalar(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..=hi)
    }
}

/// Deterministic unit vector from a seed, used as a noise direction.
pub fn unit_direction_from_seed(dim: usize, seed: u64) -> Vector {
    let center = Vector::zeros(dim);
    let ball = BallSpec::new(center, 1.0).expect("unit ball");
    BallSampler::new(&ball, seed).unit_direction()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{dist, norm};

    fn ball() -> BallSpec {
        BallSpec::with_inner_radius(Vector::zeros(4), 2.0, 0.2).unwrap()
    }

    #[test]
    fn points_stay_in_ball_and_are_deterministic() {
        let b = ball();
        let mut s1 = BallSampler::new(&b, 7);
        let mut s2 = BallSampler::new(&b, 7);
        for _ in 0..200 {
            let p = s1.uniform_point();
            assert!(b.contains(&p));
            assert_eq!(p, s2.uniform_point());
        }
    }

    #[test]
    fn shell_and_annulus_respect_radii() {
        let b = ball();
        let mut s = BallSampler::new(&b, 3);
        for _ in 0..100 {
            let p = s.shell_point(0.9, 1.0);
            let r = dist(&p, b.center());
            assert!((1.8..=2.0 + 1e-12).contains(&r));
            let z = s.annulus_offset();
            assert!((0.2..=2.0 + 1e-12).contains(&norm(&z)));
        }
    }

    #[test]
    fn unit_directions_are_unit() {
        let mut s = BallSampler::new(&ball(), 11);
        for _ in 0..50 {
            assert!((norm(&s.unit_direction()) - 1.0).abs() < 1e-12);
        }
    }
}
