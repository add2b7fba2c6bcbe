//! Feasibility layers that map a network output onto a shifted polytope.
//!
//! - [`GaugeLayer::Traditional`]: bijection from the l-infinity unit ball onto the
//!   set, `u = (psi_B(v) / psi_S(v)) v + c`.
//! - Variants substitute `psi_B` with `psi_B^p`, `(e^psi_B - 1)/(e - 1)` or
//!   `ln(psi_B + 1)/ln 2`; each maps `[0, 1]` onto itself, so feasibility is kept.
//! - [`GaugeLayer::Generalized`]: `u = v / max(1, psi_S(v)) + c`. Points already in
//!   the set are only translated; exterior points are pulled radially onto the
//!   boundary. Accepts any `v`.
//!
//! Every forward pass returns a [`LayerTape`] holding what the backward pass needs.
//! Ties in either gauge resolve to the lowest row index.

use std::f64::consts::{E, LN_2};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::dot;
use crate::polytope::{unit_ball_argmax, ShiftedSet, DENOMINATOR_FLOOR};

/// Below this l-infinity norm the traditional map returns the center.
pub const BALL_GAUGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaugeLayer {
    Traditional,
    VariantPower { p: f64 },
    VariantExp,
    VariantLog,
    Generalized,
}

impl GaugeLayer {
    pub fn power(p: f64) -> Result<Self> {
        let layer = GaugeLayer::VariantPower { p };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GaugeLayer::VariantPower { p } if !(p > 0.0 && p.is_finite()) => Err(Error::Invalid(
                format!("power variant needs a positive exponent, got {p}"),
            )),
            _ => Ok(()),
        }
    }

    /// Whether the layer expects its input inside the l-infinity unit ball.
    pub fn requires_unit_ball(&self) -> bool {
        !matches!(self, GaugeLayer::Generalized)
    }

    /// The substituted ball gauge `g(psi)` and its derivative.
    fn substitute(&self, psi: f64) -> (f64, f64) {
        match *self {
            GaugeLayer::Traditional => (psi, 1.0),
            GaugeLayer::VariantPower { p } => (psi.powf(p), p * psi.powf(p - 1.0)),
            GaugeLayer::VariantExp => ((psi.exp() - 1.0) / (E - 1.0), psi.exp() / (E - 1.0)),
            GaugeLayer::VariantLog => ((psi + 1.0).ln() / LN_2, 1.0 / ((psi + 1.0) * LN_2)),
            GaugeLayer::Generalized => unreachable!("generalized map has no substitution"),
        }
    }

    fn substitute_inverse(&self, value: f64) -> f64 {
        match *self {
            GaugeLayer::Traditional => value,
            GaugeLayer::VariantPower { p } => value.powf(1.0 / p),
            GaugeLayer::VariantExp => (value * (E - 1.0) + 1.0).ln(),
            GaugeLayer::VariantLog => (value * LN_2).exp() - 1.0,
            GaugeLayer::Generalized => value,
        }
    }

    pub fn forward(&self, set: &ShiftedSet<'_>, v_hat: &[f64]) -> Result<(Vec<f64>, LayerTape)> {
        check_len("layer input", set.dim(), v_hat.len())?;
        let center = set.center().point();
        let branch = match self {
            GaugeLayer::Generalized => {
                let psi = set.gauge_argmax(v_hat)?;
                if psi.value <= 1.0 {
                    Branch::Identity
                } else {
                    Branch::Radial {
                        psi_s: psi.value,
                        row: psi.row,
                        normal: set.scaled_normal(psi.row),
                    }
                }
            }
            _ => {
                let ball = unit_ball_argmax(v_hat)?;
                if ball.value < BALL_GAUGE_FLOOR {
                    Branch::Center
                } else {
                    let psi = set.gauge_argmax(v_hat)?;
                    if psi.value <= DENOMINATOR_FLOOR {
                        return Err(Error::Geometry(format!(
                            "set gauge {:e} is not positive for a nonzero input; \
                             the set is unbounded along this direction",
                            psi.value
                        )));
                    }
                    let (g, g_prime) = self.substitute(ball.value);
                    Branch::Rescale {
                        ball_index: ball.row,
                        ball_sign: v_hat[ball.row].signum(),
                        g,
                        g_prime,
                        psi_s: psi.value,
                        row: psi.row,
                        normal: set.scaled_normal(psi.row),
                    }
                }
            }
        };

        let out = match &branch {
            Branch::Center => center.to_vec(),
            Branch::Identity => center.iter().zip(v_hat).map(|(c, v)| v + c).collect(),
            Branch::Radial { psi_s, .. } => center
                .iter()
                .zip(v_hat)
                .map(|(c, v)| v / psi_s + c)
                .collect(),
            Branch::Rescale { g, psi_s, .. } => {
                let scale = g / psi_s;
                center
                    .iter()
                    .zip(v_hat)
                    .map(|(c, v)| scale * v + c)
                    .collect()
            }
        };

        let tape = LayerTape {
            v_hat: v_hat.to_vec(),
            branch,
            consumed: false,
        };
        Ok((out, tape))
    }

    /// Preimage of a set point under a bijective layer (all kinds but generalized,
    /// whose preimage of an interior point is just `u - c`).
    pub fn inverse(&self, set: &ShiftedSet<'_>, u: &[f64]) -> Result<Vec<f64>> {
        check_len("set point", set.dim(), u.len())?;
        let w: Vec<f64> = u
            .iter()
            .zip(set.center().point())
            .map(|(u, c)| u - c)
            .collect();
        if let GaugeLayer::Generalized = self {
            return Ok(w);
        }
        let psi_b = unit_ball_argmax(&w)?.value;
        if psi_b < BALL_GAUGE_FLOOR {
            return Ok(vec![0.0; w.len()]);
        }
        let psi_s = set.gauge(&w)?;
        if psi_s > 1.0 + 1e-12 {
            return Err(Error::Invalid(format!(
                "point is outside the set (gauge {psi_s})"
            )));
        }
        let alpha = self.substitute_inverse(psi_s.min(1.0)) / psi_b;
        Ok(w.iter().map(|x| alpha * x).collect())
    }
}

impl fmt::Display for GaugeLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaugeLayer::Traditional => write!(f, "traditional"),
            GaugeLayer::VariantPower { p } => write!(f, "variant:power:{p}"),
            GaugeLayer::VariantExp => write!(f, "variant:exp"),
            GaugeLayer::VariantLog => write!(f, "variant:log"),
            GaugeLayer::Generalized => write!(f, "generalized"),
        }
    }
}

impl FromStr for GaugeLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = s.strip_suffix("-gauge").unwrap_or(&s);
        match s {
            "traditional" => Ok(GaugeLayer::Traditional),
            "generalized" => Ok(GaugeLayer::Generalized),
            "variant:exp" | "exp" => Ok(GaugeLayer::VariantExp),
            "variant:log" | "log" => Ok(GaugeLayer::VariantLog),
            other => {
                let p = other
                    .strip_prefix("variant:power:")
                    .or_else(|| other.strip_prefix("power:"))
                    .ok_or_else(|| Error::Invalid(format!("unknown gauge layer '{other}'")))?;
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Invalid(format!("bad power exponent '{p}'")))?;
                GaugeLayer::power(p)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Branch {
    /// Traditional family at the origin.
    Center,
    /// Generalized map with `psi_S <= 1`.
    Identity,
    /// Generalized map with `psi_S > 1`.
    Radial {
        psi_s: f64,
        row: usize,
        normal: Vec<f64>,
    },
    /// Traditional family, `u = g(psi_B)/psi_S * v + c`.
    Rescale {
        ball_index: usize,
        ball_sign: f64,
        g: f64,
        g_prime: f64,
        psi_s: f64,
        row: usize,
        normal: Vec<f64>,
    },
}

/// Identifies which piece of a piecewise-smooth layer a forward pass landed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKey {
    Center,
    Identity,
    Radial {
        row: usize,
    },
    Rescale {
        ball_index: usize,
        positive: bool,
        row: usize,
    },
}

/// Forward intermediates for one layer evaluation. Single use.
#[derive(Debug, Clone)]
pub struct LayerTape {
    v_hat: Vec<f64>,
    branch: Branch,
    consumed: bool,
}

impl LayerTape {
    pub fn branch_key(&self) -> BranchKey {
        match &self.branch {
            Branch::Center => BranchKey::Center,
            Branch::Identity => BranchKey::Identity,
            Branch::Radial { row, .. } => BranchKey::Radial { row: *row },
            Branch::Rescale {
                ball_index,
                ball_sign,
                row,
                ..
            } => BranchKey::Rescale {
                ball_index: *ball_index,
                positive: *ball_sign > 0.0,
                row: *row,
            },
        }
    }

    /// The set gauge of the input, when the branch computed it.
    pub fn set_gauge(&self) -> Option<f64> {
        match &self.branch {
            Branch::Radial { psi_s, .. } | Branch::Rescale { psi_s, .. } => Some(*psi_s),
            _ => None,
        }
    }

    /// Vector-Jacobian product of the forward map at the taped input.
    pub fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        if self.consumed {
            return Err(Error::TapeConsumed);
        }
        check_len("layer cotangent", self.v_hat.len(), upstream.len())?;
        self.consumed = true;
        let v = &self.v_hat;
        let out = match &self.branch {
            // Direction-dependent scaling has no derivative at the origin.
            Branch::Center => vec![0.0; v.len()],
            Branch::Identity => upstream.to_vec(),
            Branch::Radial { psi_s, normal, .. } => {
                // J = (I - v w' / psi) / psi
                let vy = dot(v, upstream);
                upstream
                    .iter()
                    .zip(normal)
                    .map(|(y, w)| (y - w * vy / psi_s) / psi_s)
                    .collect()
            }
            Branch::Rescale {
                ball_index,
                ball_sign,
                g,
                g_prime,
                psi_s,
                normal,
                ..
            } => {
                // u = s v + c with s = g(psi_B)/psi_S, so J'y = s y + (v.y) grad(s)
                let s = g / psi_s;
                let vy = dot(v, upstream);
                let mut out: Vec<f64> = upstream
                    .iter()
                    .zip(normal)
                    .map(|(y, w)| s * y - vy * g * w / (psi_s * psi_s))
                    .collect();
                out[*ball_index] += vy * g_prime * ball_sign / psi_s;
                out
            }
        };
        Ok(out)
    }
}

/// One grid point and its image under a layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedPoint {
    pub v_hat: Vec<f64>,
    pub u: Vec<f64>,
}

/// Push every grid point through `layer`.
pub fn sample_map_distribution(
    layer: &GaugeLayer,
    set: &ShiftedSet<'_>,
    grid: &[Vec<f64>],
) -> Result<Vec<MappedPoint>> {
    grid.iter()
        .map(|v| {
            let (u, _) = layer.forward(set, v)?;
            Ok(MappedPoint {
                v_hat: v.clone(),
                u,
            })
        })
        .collect()
}
