//! Derived constants and the closed-form bounds built from them.

use serde::{Deserialize, Serialize};

use crate::convexity::{ConvexityCertificate, ThetaTable};
use crate::error::{CcxError, Result};

impl Default for ThetaTable {
    fn default() -> Self {
        ThetaTable::identity()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantTable {
    pub lambda: f64,
    pub k: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub theta: ThetaTable,
    pub theta_tilde: ThetaTable,
    pub k1: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    #[serde(rename = "D2")]
    pub d2: f64,
    #[serde(rename = "D2p")]
    pub d2p: f64,
    #[serde(rename = "D3")]
    pub d3: f64,
    /// The two published forms of D4; `d4` is their maximum.
    #[serde(rename = "D4_table")]
    pub d4_table: f64,
    #[serde(rename = "D4_product")]
    pub d4_product: f64,
    #[serde(rename = "D4")]
    pub d4: f64,
    #[serde(rename = "D5")]
    pub d5: f64,
    #[serde(rename = "D6")]
    pub d6: f64,
    pub epsilon: f64,
    pub epsilon_max: f64,
    /// `(D2 D3)^ε`.
    #[serde(rename = "K")]
    pub big_k: f64,
    /// Radius of the ball around the base point where the product is set to 0.
    pub ball_radius: f64,
    pub affine_theta: Option<(f64, f64)>,
}

/// Default ε: the smaller of 0.05 and the admissible maximum.
pub const EPSILON_DEFAULT: f64 = 0.05;

pub fn derive_constants(cert: &ConvexityCertificate) -> ConstantTable {
    let (lambda, k, e, c) = (cert.lambda, cert.k, cert.e, cert.c);
    let theta = cert.theta.clone();
    let tt = theta.tilde();
    let k1 = lambda + k;
    let d = 2.0 * (1.0 + e) * k1 + c;
    let d1 = 2.0 * d + 2.0;
    let d2 = e * (d1 + 2.0 * k1);
    let d2p = (e * (lambda * theta.eval(0.0) + k)).max(1.0);
    let d3 = 2.0 * d2p * d2 * d2;
    let th1 = tt.eval(1.0);
    let d4_table = 2.0 * e * (e * (1.0 + lambda * th1 + 2.0 * k1) + d1);
    let d4_product = 2.0 * e * (e * (1.0 + lambda * th1 + k1) + d1 + d + 2.0 * k1);
    let d5 = 2.0 * d1 + 2.0 * k1;
    let epsilon_max = std::f64::consts::LN_2 / (d2 * d3).ln();
    let epsilon = EPSILON_DEFAULT.min(epsilon_max);
    ConstantTable {
        lambda,
        k,
        e,
        c,
        ball_radius: lambda * 2.0 * theta.eval(0.0) + k,
        theta,
        theta_tilde: tt,
        k1,
        d,
        d1,
        d2,
        d2p,
        d3,
        d4_table,
        d4_product,
        d4: d4_table.max(d4_product),
        d5,
        d6: e * d5 + d,
        epsilon,
        epsilon_max,
        big_k: (d2 * d3).powf(epsilon),
        affine_theta: cert.affine_theta,
    }
}

impl ConstantTable {
    /// Same table at another ε; ε must lie in `(0, ε_max]`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<ConstantTable> {
        if epsilon.is_nan() || epsilon <= 0.0 || epsilon > self.epsilon_max + 1e-12 {
            return Err(CcxError::Parameter(format!(
                "epsilon {epsilon} outside (0, {}]",
                self.epsilon_max
            )));
        }
        let mut t = self.clone();
        t.epsilon = epsilon;
        t.big_k = (t.d2 * t.d3).powf(epsilon);
        Ok(t)
    }

    /// Rays from the base point at equal parameter `t ≤ min(a, b)`:
    /// `d(γ(t), η(t)) ≤ E(d + λθ̃(d) + k₁) + D` with `d = d(γ(a), η(b))`.
    pub fn ray_same_param_bound(&self, dist: f64) -> f64 {
        self.e * (dist + self.lambda * self.theta_tilde.eval(dist) + self.k1) + self.d
    }

    /// `τ(t) = E(t + λθ̃(t) + k₁) + D`.
    pub fn tau(&self, t: f64) -> f64 {
        self.ray_same_param_bound(t)
    }

    /// Constant relating two base points at distance `dist`.
    pub fn c_base_change(&self, dist: f64) -> f64 {
        self.e * (self.lambda * self.theta_tilde.eval(dist) + dist + self.d1 + 3.0 * self.k1) + 2.0 * self.d
    }

    /// Additive slack of the product after moving the base point by `dist`.
    pub fn d_base_change(&self, dist: f64) -> f64 {
        self.e * (self.e * (self.d1 + 2.0 * self.k1) + self.d + 2.0 * self.c_base_change(dist))
    }

    /// Cone radius below which the exponential map is pseudocontinuous.
    pub fn pseudo_radius(&self) -> f64 {
        1.0 / (2.0 * self.big_k * self.d3.powf(self.epsilon))
    }

    /// Image distance bound inside the pseudocontinuity radius.
    pub fn pseudo_bound(&self) -> f64 {
        self.e * (self.d1 + 2.0 * self.k1) + self.d + self.lambda + self.k1
    }

    /// Modulus of the logarithm at distance `dist` between points with
    /// ray parameters `tv`, `tw`.
    pub fn log_modulus(&self, dist: f64, tv: f64, tw: f64) -> f64 {
        let tt = self.theta_tilde.eval(dist);
        if tv.min(tw) >= 1.0 {
            self.epsilon * tt + (self.e * self.tau(dist)).powf(self.epsilon)
        } else {
            1.0 + (1.0 + tt).powf(self.epsilon)
        }
    }

    /// Bound on the cone distance between `log(exp(t x))` and `t x`, where
    /// the logarithm picked ray parameter `tv`.
    pub fn log_exp_bound(&self, t: f64, tv: f64) -> f64 {
        let th0 = self.theta_tilde.eval(0.0);
        let big_t = t.powf(1.0 / self.epsilon);
        let a = big_t.min(tv);
        if a >= th0 + 1.0 {
            let c = 1.0 / (self.e * self.e * (self.lambda * th0 + self.k1) + self.d * self.e);
            self.epsilon * th0 + t * (big_t - th0).powf(-self.epsilon) * c.powf(-self.epsilon)
        } else {
            2.0 * (2.0 * th0 + 1.0).powf(self.epsilon)
        }
    }

    /// Scale of the boundary entourage for a uniform family at `dist`.
    pub fn entourage_scale(&self) -> f64 {
        self.d2 * self.d3 * self.d4 * (self.theta.eval(1.0) + 1.0)
    }

    /// Modulus of the contracting homotopy at base distance `dist` and
    /// time difference `dt`; `dist` already includes the net slack.
    pub fn homotopy_modulus(&self, dist: f64, dt: f64) -> f64 {
        let (e, l) = (self.e, self.lambda);
        let inner = e * (dist + l * self.theta_tilde.eval(dist) + self.k1) + self.d;
        e * inner + self.c + l * (self.theta.eval(dist) + 2.0 * dt + 1.0) + self.k
    }

    /// Modulus of the end map of the contraction at distance `dist`.
    pub fn end_map_modulus(&self, dist: f64) -> f64 {
        let l = self.lambda;
        self.e * (dist + l * self.theta_tilde.eval(dist) + self.k1) + self.d + l * (self.theta.eval(dist) + 1.0) + self.k
    }

    /// Product lower bound used when controlling extensions to the boundary:
    /// points within `radius` of a ray at distance `n` steps out.
    pub fn compactification_radius(&self, n: f64, radius: f64) -> f64 {
        let l = self.lambda;
        l * n * self.e * (radius + l * self.theta.eval(radius) + self.k) + self.k
    }

    /// Multiplicative and additive constants of the induced bicombing.
    pub fn bicombing_constants(&self) -> Option<(f64, f64)> {
        let (a, b) = self.affine_theta?;
        Some((
            self.e * (self.lambda * a + 1.0),
            self.e * (self.lambda * b + self.k) + self.c,
        ))
    }
}
