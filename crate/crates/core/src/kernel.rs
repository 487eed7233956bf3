//! Radially symmetric energy point spread functions (PSFs) and their
//! discretization onto simulation grids.
//!
//! A PSF is a finite Gaussian mixture
//!
//! ```text
//! K(r) = sum_i  w_i / (pi sigma_i^2) * exp(-r^2 / sigma_i^2),    sum_i w_i = 1
//! ```
//!
//! normalized so the total deposited energy equals the applied dose. The
//! usual proximity model is the two-term split of [`make_double_gaussian`]:
//! a narrow forward-scattering term and a wide backscattering term whose
//! relative strength is the backscatter ratio `eta`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// One Gaussian mixture component. `sigma` is the 1/e radius in µm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianTerm {
    pub weight: f64,
    pub sigma: f64,
}

/// Normalized multi-Gaussian point spread function.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSpreadFunction {
    terms: Vec<GaussianTerm>,
}

impl PointSpreadFunction {
    /// Builds a PSF from `(weight, sigma_um)` pairs.
    ///
    /// Weights may be given on any scale; they are renormalized so their sum
    /// is exactly 1. Zero-weight terms are dropped. At least one term with
    /// positive weight and positive finite sigma is required.
    pub fn new(terms: &[(f64, f64)]) -> Result<PointSpreadFunction> {
        for &(w, s) in terms {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "PSF term weight must be finite and non-negative, got {w}"
                )));
            }
            if !s.is_finite() || s <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "PSF term sigma must be positive and finite, got {s} um"
                )));
            }
        }
        let total: f64 = terms.iter().map(|&(w, _)| w).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter(
                "PSF needs at least one term with positive weight".into(),
            ));
        }
        let mut out: Vec<GaussianTerm> = terms
            .iter()
            .filter(|&&(w, _)| w > 0.0)
            .map(|&(w, s)| GaussianTerm {
                weight: w / total,
                sigma: s,
            })
            .collect();
        // Push rounding slack into the largest weight so the sum is exactly 1.
        let sum: f64 = out.iter().map(|t| t.weight).sum();
        let largest = out
            .iter_mut()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .expect("at least one term");
        largest.weight += 1.0 - sum;
        Ok(PointSpreadFunction { terms: out })
    }

    pub fn terms(&self) -> &[GaussianTerm] {
        &self.terms
    }

    /// Smallest sigma in the mixture, µm.
    pub fn min_sigma(&self) -> f64 {
        self.terms.iter().map(|t| t.sigma).fold(f64::INFINITY, f64::min)
    }

    /// Largest sigma in the mixture, µm.
    pub fn max_sigma(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.sigma)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Energy density K(r) at radius `r` µm, in 1/µm².
    pub fn evaluate(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.terms
            .iter()
            .map(|t| {
                let s2 = t.sigma * t.sigma;
                t.weight / (std::f64::consts::PI * s2) * (-r2 / s2).exp()
            })
            .sum()
    }

    /// Fraction of total energy deposited within radius `r` µm:
    ///
    /// ```text
    /// cdf(r) = sum_i w_i (1 - exp(-r^2 / sigma_i^2))
    /// ```
    pub fn radial_energy_cdf(&self, r: f64) -> Result<f64> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "radius must be non-negative and finite, got {r} um"
            )));
        }
        let r2 = r * r;
        Ok(self
            .terms
            .iter()
            .map(|t| t.weight * (1.0 - (-r2 / (t.sigma * t.sigma)).exp()))
            .sum())
    }

    /// Smallest radius enclosing at least `fraction` of the energy.
    pub fn radius_for_cdf(&self, fraction: f64) -> Result<f64> {
        if !fraction.is_finite() || !(0.0..1.0).contains(&fraction) {
            return Err(Error::InvalidParameter(format!(
                "enclosed-energy fraction must be in [0, 1), got {fraction}"
            )));
        }
        if fraction == 0.0 {
            return Ok(0.0);
        }
        // Tail mass beyond R is at most exp(-R^2 / sigma_max^2).
        let mut hi = self.max_sigma() * (1.0 / (1.0 - fraction)).ln().sqrt();
        if self.radial_energy_cdf(hi)? < fraction {
            hi *= 2.0; // fp slack; the analytic bound is already sufficient
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.radial_energy_cdf(mid)? >= fraction {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Standard forward/backscatter decomposition: a forward Gaussian of width
/// `alpha` µm with weight `1/(1+eta)` and a backscatter Gaussian of width
/// `beta` µm with weight `eta/(1+eta)`.
pub fn make_double_gaussian(alpha: f64, beta: f64, eta: f64) -> Result<PointSpreadFunction> {
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "backscatter ratio eta must be non-negative, got {eta}"
        )));
    }
    let w_forward = 1.0 / (1.0 + eta);
    let w_back = 1.0 - w_forward;
    PointSpreadFunction::new(&[(w_forward, alpha), (w_back, beta)])
}

/// Default exposure parameters for thick positive resist on a silicon
/// substrate at moderate beam energy: alpha = 0.03 µm, beta = 30 µm, eta = 1.
pub fn default_psf() -> PointSpreadFunction {
    make_double_gaussian(0.03, 30.0, 1.0).expect("default parameters are valid")
}

/// Default truncation: keep the disc enclosing all but 1e-4 of the energy.
pub const DEFAULT_TRUNCATION_FRACTION: f64 = 1e-4;

/// A PSF integrated over grid cells, truncated to a finite disc and
/// renormalized to unit sum.
///
/// The kernel covers cells `(di, dj)` with `|di|, |dj| <= half_width` whose
/// centers lie within `truncation_radius` of the origin. Weights are exact
/// cell integrals of the mixture (products of erf differences), so the
/// forward/backscatter energy split survives discretization even when a
/// sigma is far below the pitch.
#[derive(Clone, Debug)]
pub struct DiscreteKernel {
    half_width: usize,
    pitch: f64,
    truncation_radius: f64,
    under_resolved: bool,
    weights: Vec<f64>,
}

impl DiscreteKernel {
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// Kernel side length in cells, `2 * half_width + 1`.
    pub fn size(&self) -> usize {
        2 * self.half_width + 1
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// True when the pitch exceeds the smallest mixture sigma. The forward
    /// term then collapses into single cells; callers may accept this (the
    /// kernel is still normalized) or refine the grid.
    pub fn under_resolved(&self) -> bool {
        self.under_resolved
    }

    /// Row-major weights, side = `size()`, center at
    /// `(half_width, half_width)`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at cell offset `(di, dj)`; zero outside the kernel extent.
    pub fn weight(&self, di: isize, dj: isize) -> f64 {
        let m = self.half_width as isize;
        if di.abs() > m || dj.abs() > m {
            return 0.0;
        }
        let side = self.size();
        self.weights[((dj + m) as usize) * side + (di + m) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Discrete analogue of the radial energy CDF: total weight of cells
    /// whose centers lie within radius `r` µm.
    pub fn radial_cdf(&self, r: f64) -> f64 {
        let m = self.half_width as isize;
        let side = self.size();
        let r2 = r * r;
        let mut total = 0.0;
        for dj in -m..=m {
            for di in -m..=m {
                let x = di as f64 * self.pitch;
                let y = dj as f64 * self.pitch;
                if x * x + y * y <= r2 {
                    total += self.weights[((dj + m) as usize) * side + (di + m) as usize];
                }
            }
        }
        total
    }
}

/// Integrates `psf` over cells of size `pitch` µm, keeping cells whose
/// centers lie within the disc that encloses `1 - truncation_fraction` of
/// the energy, then renormalizes to unit sum.
pub fn discretize(
    psf: &PointSpreadFunction,
    pitch: f64,
    truncation_fraction: f64,
) -> Result<DiscreteKernel> {
    if !pitch.is_finite() || pitch <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kernel pitch must be positive, got {pitch} um"
        )));
    }
    if !truncation_fraction.is_finite() || !(0.0..1.0).contains(&truncation_fraction) || truncation_fraction == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "truncation fraction must be in (0, 1), got {truncation_fraction}"
        )));
    }

    let radius = psf.radius_for_cdf(1.0 - truncation_fraction)?;
    let m = (radius / pitch).ceil().max(1.0) as usize;
    let side = 2 * m + 1;
    let mut weights = vec![0.0; side * side];

    // 1D cell masses per mixture term: integral of exp(-x^2/s^2) over
    // [(k-0.5)p, (k+0.5)p], up to the common factor sqrt(pi)*s/2.
    let mut axis = vec![vec![0.0; side]; psf.terms.len()];
    for (t, term) in psf.terms().iter().enumerate() {
        for k in 0..side {
            let d = k as isize - m as isize;
            let a = (d as f64 - 0.5) * pitch / term.sigma;
            let b = (d as f64 + 0.5) * pitch / term.sigma;
            axis[t][k] = libm::erf(b) - libm::erf(a);
        }
    }

    let r2 = radius * radius;
    let mut total = 0.0;
    for dj in 0..side {
        let y = (dj as isize - m as isize) as f64 * pitch;
        for di in 0..side {
            let x = (di as isize - m as isize) as f64 * pitch;
            if x * x + y * y > r2 {
                continue;
            }
            let mut v = 0.0;
            for (t, term) in psf.terms().iter().enumerate() {
                // w/4 * (erf_b - erf_a)_x * (erf_b - erf_a)_y is the exact
                // 2D cell integral of the normalized term.
                v += 0.25 * term.weight * axis[t][di] * axis[t][dj];
            }
            weights[dj * side + di] = v;
            total += v;
        }
    }

    debug_assert!(total > 0.0);
    for w in &mut weights {
        *w /= total;
    }

    Ok(DiscreteKernel {
        half_width: m,
        pitch,
        truncation_radius: radius,
        under_resolved: pitch > psf.min_sigma(),
        weights,
    })
}

/// Result of loading a PSF file: the normalized PSF and the factor the raw
/// weights were divided by.
#[derive(Clone, Debug)]
pub struct PsfFile {
    pub psf: PointSpreadFunction,
    pub normalization: f64,
}

/// Parses a plain-text PSF: one `weight sigma_um` pair per line, `#` starts
/// a comment, blank lines ignored. Weights are normalized on load.
pub fn read_psf<R: BufRead>(r: R) -> Result<PsfFile> {
    let mut raw = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        let tok: Vec<&str> = body.split_whitespace().collect();
        if tok.len() != 2 {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("expected 'weight sigma_um', got '{body}'"),
            });
        }
        let w: f64 = tok[0].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad weight '{}'", tok[0]),
        })?;
        let s: f64 = tok[1].parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad sigma '{}'", tok[1]),
        })?;
        raw.push((w, s));
    }
    if raw.is_empty() {
        return Err(Error::Parse {
            line: 0,
            msg: "PSF file has no terms".into(),
        });
    }
    let normalization: f64 = raw.iter().map(|&(w, _)| w).sum();
    let psf = PointSpreadFunction::new(&raw)?;
    Ok(PsfFile { psf, normalization })
}

pub fn load_psf(path: impl AsRef<Path>) -> Result<PsfFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_psf(BufReader::new(file))
}
