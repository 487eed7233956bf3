//! Dose-to-remnant-height calibration ("contrast") curves.
//!
//! Grayscale exposure of a positive resist removes more material at higher
//! dose. A [`ContrastCurve`] is the monotone map from clearing dose D
//! (µC/cm²) to remnant height h (µm): full height `T0` at and below the
//! onset dose `D0`, zero at and above the clearing dose `Dc`, and strictly
//! decreasing in between. Curves are built from measured `(dose, height)`
//! samples by [`fit_contrast`]; the interpolation runs on `(ln D, h)` knots
//! with a shape-preserving cubic, so the fitted curve is monotone by
//! construction and inversion is a simple bisection.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::fmt_g9;

/// One calibration measurement: applied dose µC/cm², measured height µm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContrastSample {
    pub dose: f64,
    pub height: f64,
}

/// Samples within this fraction of `T0` (resp. 0) count as full-height
/// (resp. cleared) anchors and are snapped onto the exact boundary value.
const ANCHOR_FRACTION: f64 = 0.05;

/// Isotonic repair beyond this fraction of `T0` means the data is not a
/// plausible monotone curve plus noise.
const MAX_REPAIR_FRACTION: f64 = 0.10;

/// Relative dose tolerance of the bisection inversion.
const INVERT_REL_TOL: f64 = 1e-6;

/// Monotone dose-to-height calibration curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastCurve {
    t0: f64,
    d0: f64,
    dc: f64,
    /// Interpolation knots: ln(dose), strictly increasing.
    lx: Vec<f64>,
    /// Knot heights, strictly decreasing from `t0` to 0.
    hy: Vec<f64>,
    /// Knot tangents dh/d(ln D) from the shape-preserving fit.
    tan: Vec<f64>,
    /// RMS residual of the fit against the input samples, µm.
    fit_rms: f64,
}

impl ContrastCurve {
    /// Full resist height T0, µm.
    pub fn full_height(&self) -> f64 {
        self.t0
    }

    /// Largest dose that leaves the full height, µC/cm².
    pub fn onset_dose(&self) -> f64 {
        self.d0
    }

    /// Smallest dose that clears the resist, µC/cm².
    pub fn clearing_dose(&self) -> f64 {
        self.dc
    }

    /// RMS residual of the curve against its calibration samples, µm.
    pub fn fit_rms(&self) -> f64 {
        self.fit_rms
    }

    /// Interpolation knots as `(dose, height)` pairs.
    pub fn knots(&self) -> Vec<(f64, f64)> {
        self.lx
            .iter()
            .zip(&self.hy)
            .map(|(&lx, &h)| (lx.exp(), h))
            .collect()
    }

    /// Remnant height after exposure at `dose`.
    ///
    /// Exactly `T0` for `dose <= D0` and exactly 0 for `dose >= Dc`.
    pub fn height_for_dose(&self, dose: f64) -> Result<f64> {
        if !dose.is_finite() || dose < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dose must be non-negative and finite, got {dose} uC/cm2"
            )));
        }
        if dose <= self.d0 {
            return Ok(self.t0);
        }
        if dose >= self.dc {
            return Ok(0.0);
        }
        Ok(self.eval_interior(dose.ln()).clamp(0.0, self.t0))
    }

    /// Dose that leaves height `height`: `D0` at `T0`, `Dc` at 0, bisection
    /// to 1e-6 relative dose tolerance in between.
    pub fn dose_for_height(&self, height: f64) -> Result<f64> {
        if !height.is_finite() || height < 0.0 || height > self.t0 {
            return Err(Error::InvalidParameter(format!(
                "height must lie in [0, {}] um, got {height} um",
                self.t0
            )));
        }
        if height == self.t0 {
            return Ok(self.d0);
        }
        if height == 0.0 {
            return Ok(self.dc);
        }
        let mut lo = self.d0;
        let mut hi = self.dc;
        // The curve decreases: height(lo) = T0 > height > 0 = height(hi).
        while hi - lo > INVERT_REL_TOL * lo {
            let mid = 0.5 * (lo + hi);
            if self.eval_interior(mid.ln()) > height {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Hermite evaluation on the interior knots; `lx` must lie in
    /// `[ln D0, ln Dc]`.
    fn eval_interior(&self, lx: f64) -> f64 {
        let xs = &self.lx;
        let mut i = match xs.binary_search_by(|x| x.total_cmp(&lx)) {
            Ok(i) => return self.hy[i],
            Err(i) => i,
        };
        i = i.clamp(1, xs.len() - 1);
        let (x0, x1) = (xs[i - 1], xs[i]);
        let (y0, y1) = (self.hy[i - 1], self.hy[i]);
        let (m0, m1) = (self.tan[i - 1], self.tan[i]);
        let h = x1 - x0;
        let t = (lx - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1
    }

    /// Rebuilds a curve from stored knots (first knot `(D0, T0)`, last knot
    /// `(Dc, 0)`, doses strictly increasing, heights strictly decreasing).
    pub fn from_knots(full_height: f64, knots: &[(f64, f64)]) -> Result<ContrastCurve> {
        if !(full_height > 0.0) || !full_height.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "full height must be positive, got {full_height} um"
            )));
        }
        if knots.len() < 2 {
            return Err(Error::IncompleteCalibration(
                "need at least the onset and clearing knots".into(),
            ));
        }
        for w in knots.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::BadCalibration(
                    "knot doses must increase strictly".into(),
                ));
            }
            if !(w[1].1 < w[0].1) {
                return Err(Error::BadCalibration(
                    "knot heights must decrease strictly".into(),
                ));
            }
        }
        if knots[0].0 <= 0.0 {
            return Err(Error::BadCalibration(
                "onset dose must be positive".into(),
            ));
        }
        if knots[0].1 != full_height {
            return Err(Error::IncompleteCalibration(format!(
                "first knot height {} um is not the full height {} um",
                knots[0].1, full_height
            )));
        }
        if knots[knots.len() - 1].1 != 0.0 {
            return Err(Error::IncompleteCalibration(
                "last knot height must be zero".into(),
            ));
        }
        let lx: Vec<f64> = knots.iter().map(|&(d, _)| d.ln()).collect();
        let hy: Vec<f64> = knots.iter().map(|&(_, h)| h).collect();
        let tan = pchip_tangents(&lx, &hy);
        Ok(ContrastCurve {
            t0: full_height,
            d0: knots[0].0,
            dc: knots[knots.len() - 1].0,
            lx,
            hy,
            tan,
            fit_rms: 0.0,
        })
    }

    /// Writes the curve as a `gslcontrast 1` model file.
    pub fn write_model<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "gslcontrast 1")?;
        writeln!(w, "full_height_um {}", fmt_g9(self.t0))?;
        writeln!(w, "knots {}", self.lx.len())?;
        for (d, h) in self.knots() {
            writeln!(w, "{} {}", fmt_g9(d), fmt_g9(h))?;
        }
        Ok(())
    }

    /// Reads a `gslcontrast 1` model file.
    pub fn read_model<R: BufRead>(r: R) -> Result<ContrastCurve> {
        let mut lines = r.lines().enumerate();
        let mut next_line = |expect: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, line)) => Ok((i + 1, line?)),
                None => Err(Error::Parse {
                    line: 0,
                    msg: format!("unexpected end of file, expected {expect}"),
                }),
            }
        };

        let (n, header) = next_line("'gslcontrast 1'")?;
        if header.trim() != "gslcontrast 1" {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected 'gslcontrast 1', got '{header}'"),
            });
        }
        let (n, th) = next_line("full_height_um")?;
        let t0 = parse_kv(&th, "full_height_um", n)?;
        let (n, kn) = next_line("knot count")?;
        let count = parse_kv(&kn, "knots", n)? as usize;
        let mut knots = Vec::with_capacity(count);
        for _ in 0..count {
            let (n, line) = next_line("knot line")?;
            let tok: Vec<&str> = line.split_whitespace().collect();
            if tok.len() != 2 {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected 'dose height', got '{line}'"),
                });
            }
            let d: f64 = tok[0].parse().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad dose '{}'", tok[0]),
            })?;
            let h: f64 = tok[1].parse().map_err(|_| Error::Parse {
                line: n,
                msg: format!("bad height '{}'", tok[1]),
            })?;
            knots.push((d, h));
        }
        ContrastCurve::from_knots(t0, &knots)
    }

    pub fn save_model(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_model(BufWriter::new(f))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load_model(path: impl AsRef<Path>) -> Result<ContrastCurve> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        ContrastCurve::read_model(BufReader::new(f))
    }
}

fn parse_kv(line: &str, key: &str, lineno: usize) -> Result<f64> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    if tok.len() != 2 || tok[0] != key {
        return Err(Error::Parse {
            line: lineno,
            msg: format!("expected '{key} <value>', got '{line}'"),
        });
    }
    tok[1].parse().map_err(|_| Error::Parse {
        line: lineno,
        msg: format!("bad value '{}'", tok[1]),
    })
}

/// Fits a [`ContrastCurve`] to measured samples.
///
/// Requirements:
/// * at least 4 samples with distinct doses;
/// * at least one sample within 5% of `full_height` (the full-height anchor)
///   and one within 5% of zero (the cleared anchor);
/// * heights monotone in dose up to an isotonic repair of at most 10% of
///   `full_height`.
///
/// Heights are clamped to `[0, full_height]`, repaired to a non-increasing
/// sequence (pool-adjacent-violators), anchors snapped to exactly
/// `full_height` / 0, and equal-height pools merged into single knots at
/// their mean log dose.
pub fn fit_contrast(samples: &[ContrastSample], full_height: f64) -> Result<ContrastCurve> {
    if !(full_height > 0.0) || !full_height.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "full height must be positive, got {full_height} um"
        )));
    }
    if samples.len() < 4 {
        return Err(Error::IncompleteCalibration(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    for s in samples {
        if !s.dose.is_finite() || s.dose < 0.0 || !s.height.is_finite() || s.height < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "sample ({}, {}) must have non-negative finite dose and height",
                s.dose, s.height
            )));
        }
    }

    let mut sorted: Vec<ContrastSample> = samples.to_vec();
    sorted.sort_by(|a, b| a.dose.total_cmp(&b.dose));
    for w in sorted.windows(2) {
        if w[1].dose == w[0].dose {
            return Err(Error::InvalidParameter(format!(
                "duplicate dose {} uC/cm2 in calibration samples",
                w[0].dose
            )));
        }
    }

    // Clamp and repair; track the worst displacement either step applies.
    let clamped: Vec<f64> = sorted
        .iter()
        .map(|s| s.height.clamp(0.0, full_height))
        .collect();
    let repaired = isotonic_non_increasing(&clamped);
    let mut displacement: f64 = 0.0;
    for (i, s) in sorted.iter().enumerate() {
        displacement = displacement.max((repaired[i] - s.height).abs());
    }
    if displacement > MAX_REPAIR_FRACTION * full_height {
        return Err(Error::BadCalibration(format!(
            "samples deviate from a monotone curve by {displacement:.4} um, more than {:.0}% of the full height",
            MAX_REPAIR_FRACTION * 100.0
        )));
    }

    let top = full_height * (1.0 - ANCHOR_FRACTION);
    let bottom = full_height * ANCHOR_FRACTION;
    let i_top = match repaired.iter().rposition(|&v| v >= top) {
        Some(i) => i,
        None => {
            return Err(Error::IncompleteCalibration(format!(
                "no full-height anchor: no sample within {:.0}% of {full_height} um",
                ANCHOR_FRACTION * 100.0
            )))
        }
    };
    let i_bot = match repaired.iter().position(|&v| v <= bottom) {
        Some(i) => i,
        None => {
            return Err(Error::IncompleteCalibration(format!(
                "no cleared anchor: no sample within {:.0}% of zero height",
                ANCHOR_FRACTION * 100.0
            )))
        }
    };
    debug_assert!(i_top < i_bot);

    // Onset knot. A zero-dose anchor cannot live on the log axis; nudge it
    // to a thousandth of the next sample dose (heights there are T0 anyway).
    let mut d0 = sorted[i_top].dose;
    if d0 <= 0.0 {
        d0 = sorted[i_top + 1].dose / 1000.0;
    }
    let dc = sorted[i_bot].dose;

    let mut knots: Vec<(f64, f64)> = vec![(d0, full_height)];
    // Interior samples strictly between the anchors; merge equal-height
    // isotonic pools into single knots at their mean log dose.
    let mut k = i_top + 1;
    while k < i_bot {
        let v = repaired[k];
        let start = k;
        while k < i_bot && repaired[k] == v {
            k += 1;
        }
        let mean_ln: f64 =
            sorted[start..k].iter().map(|s| s.dose.ln()).sum::<f64>() / (k - start) as f64;
        knots.push((mean_ln.exp(), v));
    }
    knots.push((dc, 0.0));

    let mut curve = ContrastCurve::from_knots(full_height, &knots)?;
    let mut sq = 0.0;
    for s in &sorted {
        let r = curve.height_for_dose(s.dose)? - s.height;
        sq += r * r;
    }
    curve.fit_rms = (sq / sorted.len() as f64).sqrt();
    Ok(curve)
}

/// Pool-adjacent-violators for a non-increasing target sequence.
fn isotonic_non_increasing(y: &[f64]) -> Vec<f64> {
    // Blocks of (value, weight); merge while the sequence increases.
    let mut vals: Vec<f64> = Vec::with_capacity(y.len());
    let mut wts: Vec<f64> = Vec::with_capacity(y.len());
    for &v in y {
        vals.push(v);
        wts.push(1.0);
        while vals.len() > 1 && vals[vals.len() - 2] < vals[vals.len() - 1] {
            let (v1, w1) = (vals.pop().unwrap(), wts.pop().unwrap());
            let n = vals.len() - 1;
            let merged = (vals[n] * wts[n] + v1 * w1) / (wts[n] + w1);
            vals[n] = merged;
            wts[n] += w1;
        }
    }
    let mut out = Vec::with_capacity(y.len());
    for (v, w) in vals.iter().zip(&wts) {
        for _ in 0..*w as usize {
            out.push(*v);
        }
    }
    out
}

/// Shape-preserving cubic tangents (Fritsch-Carlson with the weighted
/// harmonic mean and three-point ends). Monotone data yields a monotone
/// interpolant.
fn pchip_tangents(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    debug_assert!(n >= 2);
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    if n == 2 {
        return vec![d[0], d[0]];
    }
    let mut m = vec![0.0; n];
    for i in 1..n - 1 {
        if d[i - 1] * d[i] <= 0.0 {
            m[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            m[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    m[0] = edge_tangent(h[0], h[1], d[0], d[1]);
    m[n - 1] = edge_tangent(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    m
}

fn edge_tangent(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if m * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && m.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        m
    }
}

/// Closed-form contrast model
///
/// ```text
/// h(D) = T0 * clamp(1 - (ln(D/D0) / ln(Dc/D0))^gamma, 0, 1)
/// ```
///
/// useful for generating synthetic calibrations and for extrapolating
/// beyond measured knots.
#[derive(Clone, Copy, Debug)]
pub struct ParametricContrast {
    pub t0: f64,
    pub d0: f64,
    pub dc: f64,
    pub gamma: f64,
}

impl ParametricContrast {
    pub fn new(t0: f64, d0: f64, dc: f64, gamma: f64) -> Result<ParametricContrast> {
        if !(t0 > 0.0) || !(d0 > 0.0) || !(dc > d0) || !(gamma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "parametric contrast needs t0 > 0, 0 < d0 < dc, gamma > 0; got t0={t0}, d0={d0}, dc={dc}, gamma={gamma}"
            )));
        }
        Ok(ParametricContrast { t0, d0, dc, gamma })
    }

    pub fn height_for_dose(&self, dose: f64) -> f64 {
        if dose <= self.d0 {
            return self.t0;
        }
        if dose >= self.dc {
            return 0.0;
        }
        let u = (dose / self.d0).ln() / (self.dc / self.d0).ln();
        self.t0 * (1.0 - u.powf(self.gamma)).clamp(0.0, 1.0)
    }

    pub fn dose_for_height(&self, height: f64) -> f64 {
        let u = (1.0 - height / self.t0).powf(1.0 / self.gamma);
        self.d0 * (self.dc / self.d0).powf(u)
    }

    /// `n` noise-free samples log-spaced over `[d0 / 1.2, dc * 1.2]`,
    /// bracketing both anchors.
    pub fn sample(&self, n: usize) -> Vec<ContrastSample> {
        let n = n.max(2);
        let lo = (self.d0 / 1.2).ln();
        let hi = (self.dc * 1.2).ln();
        (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                let dose = (lo + t * (hi - lo)).exp();
                ContrastSample {
                    dose,
                    height: self.height_for_dose(dose),
                }
            })
            .collect()
    }

    /// Fits a [`ContrastCurve`] through `n` noise-free samples of the model.
    pub fn to_curve(&self, n: usize) -> Result<ContrastCurve> {
        fit_contrast(&self.sample(n), self.t0)
    }
}

/// Reads `dose_uC_cm2,height_um` CSV calibration samples.
pub fn read_calibration_csv<R: BufRead>(r: R) -> Result<Vec<ContrastSample>> {
    let mut out = Vec::new();
    let mut saw_header = false;
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        if !saw_header {
            if body != "dose_uC_cm2,height_um" {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected header 'dose_uC_cm2,height_um', got '{body}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let mut parts = body.split(',');
        let (d, h) = match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(h), None) => (d.trim(), h.trim()),
            _ => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 'dose,height', got '{body}'"),
                })
            }
        };
        let dose: f64 = d.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad dose '{d}'"),
        })?;
        let height: f64 = h.parse().map_err(|_| Error::Parse {
            line: i + 1,
            msg: format!("bad height '{h}'"),
        })?;
        out.push(ContrastSample { dose, height });
    }
    if !saw_header {
        return Err(Error::Parse {
            line: 0,
            msg: "empty calibration file".into(),
        });
    }
    Ok(out)
}

pub fn load_calibration_csv(path: impl AsRef<Path>) -> Result<Vec<ContrastSample>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_calibration_csv(BufReader::new(f))
}

/// Writes calibration samples as `dose_uC_cm2,height_um` CSV.
pub fn write_calibration_csv<W: Write>(mut w: W, samples: &[ContrastSample]) -> std::io::Result<()> {
    writeln!(w, "dose_uC_cm2,height_um")?;
    for s in samples {
        writeln!(w, "{},{}", fmt_g9(s.dose), fmt_g9(s.height))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear_samples(t0: f64, d0: f64, dc: f64, n: usize) -> Vec<ContrastSample> {
        (0..n)
            .map(|i| {
                let dose = d0 + (dc - d0) * i as f64 / (n - 1) as f64;
                ContrastSample {
                    dose,
                    height: t0 * (1.0 - (dose - d0) / (dc - d0)),
                }
            })
            .collect()
    }

    #[test]
    fn exact_line_is_reproduced_at_the_samples() {
        let samples = linear_samples(3.0, 100.0, 400.0, 21);
        let curve = fit_contrast(&samples, 3.0).unwrap();
        assert_eq!(curve.onset_dose(), 100.0);
        assert_eq!(curve.clearing_dose(), 400.0);
        for s in &samples {
            let h = curve.height_for_dose(s.dose).unwrap();
            assert!(
                (h - s.height).abs() < 1e-9,
                "at dose {}: {h} vs {}",
                s.dose,
                s.height
            );
        }
    }

    #[test]
    fn midpoint_of_dense_linear_samples_is_half_height() {
        // The interpolation runs on ln(dose), so between knots of a
        // dose-linear curve there is a small interpolation error; dense
        // samples keep it far below 1e-3 * T0.
        let samples = linear_samples(3.0, 100.0, 400.0, 41);
        let curve = fit_contrast(&samples, 3.0).unwrap();
        let mid = curve.height_for_dose(250.0).unwrap();
        assert!(
            (mid - 1.5).abs() < 1e-3 * 3.0,
            "midpoint height {mid} too far from 1.5"
        );
    }

    #[test]
    fn boundary_conventions_are_exact() {
        let curve = ParametricContrast::new(3.0, 100.0, 500.0, 2.0)
            .unwrap()
            .to_curve(25)
            .unwrap();
        assert_eq!(curve.height_for_dose(0.0).unwrap(), 3.0);
        assert_eq!(curve.height_for_dose(curve.onset_dose()).unwrap(), 3.0);
        assert_eq!(curve.height_for_dose(curve.clearing_dose()).unwrap(), 0.0);
        assert_eq!(curve.height_for_dose(1e6).unwrap(), 0.0);
        assert_eq!(curve.dose_for_height(3.0).unwrap(), curve.onset_dose());
        assert_eq!(curve.dose_for_height(0.0).unwrap(), curve.clearing_dose());
    }

    #[test]
    fn round_trip_height_dose_height() {
        let curve = ParametricContrast::new(3.0, 100.0, 500.0, 2.0)
            .unwrap()
            .to_curve(25)
            .unwrap();
        for i in 1..100 {
            let h = 3.0 * i as f64 / 100.0;
            let d = curve.dose_for_height(h).unwrap();
            let h2 = curve.height_for_dose(d).unwrap();
            assert!(
                (h2 - h).abs() <= 1e-4 * 3.0,
                "round trip at h={h}: got {h2}"
            );
        }
    }

    #[test]
    fn too_few_samples_is_incomplete() {
        let samples = linear_samples(3.0, 100.0, 400.0, 2);
        assert!(matches!(
            fit_contrast(&samples, 3.0),
            Err(Error::IncompleteCalibration(_))
        ));
    }

    #[test]
    fn missing_anchor_is_incomplete() {
        // All heights in the middle band: no full-height, no cleared anchor.
        let samples: Vec<ContrastSample> = (0..8)
            .map(|i| ContrastSample {
                dose: 100.0 + 10.0 * i as f64,
                height: 2.0 - 0.1 * i as f64,
            })
            .collect();
        assert!(matches!(
            fit_contrast(&samples, 3.0),
            Err(Error::IncompleteCalibration(_))
        ));
    }

    #[test]
    fn gross_non_monotonicity_is_bad_calibration() {
        let mut samples = linear_samples(3.0, 100.0, 400.0, 11);
        samples[5].height = 2.9; // jumps back up near full height mid-curve
        assert!(matches!(
            fit_contrast(&samples, 3.0),
            Err(Error::BadCalibration(_))
        ));
    }

    #[test]
    fn duplicate_doses_are_rejected() {
        let mut samples = linear_samples(3.0, 100.0, 400.0, 8);
        samples[3].dose = samples[2].dose;
        assert!(matches!(
            fit_contrast(&samples, 3.0),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn noisy_generator_fit_stays_within_a_tenth_of_t0() {
        use rand::Rng;
        use rand::SeedableRng;
        let model = ParametricContrast::new(3.0, 50.0, 450.0, 2.0).unwrap();
        for seed in 0..5u64 {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<ContrastSample> = model
                .sample(24)
                .into_iter()
                .map(|s| ContrastSample {
                    dose: s.dose,
                    // +/- 5% of T0, uniform.
                    height: (s.height + 0.05 * 3.0 * (2.0 * rng.random::<f64>() - 1.0))
                        .clamp(0.0, 3.0),
                })
                .collect();
            let curve = fit_contrast(&samples, 3.0).unwrap();
            let mut worst: f64 = 0.0;
            for i in 0..=200 {
                let d = 50.0 * (450.0f64 / 50.0).powf(i as f64 / 200.0);
                let err = (curve.height_for_dose(d).unwrap() - model.height_for_dose(d)).abs();
                worst = worst.max(err);
            }
            assert!(
                worst <= 0.1 * 3.0,
                "seed {seed}: fit deviates from generator by {worst} um"
            );
        }
    }

    #[test]
    fn eval_rejects_out_of_range_arguments() {
        let curve = ParametricContrast::new(3.0, 100.0, 500.0, 2.0)
            .unwrap()
            .to_curve(25)
            .unwrap();
        assert!(curve.height_for_dose(-1.0).is_err());
        assert!(curve.dose_for_height(-0.1).is_err());
        assert!(curve.dose_for_height(3.1).is_err());
    }

    #[test]
    fn model_file_round_trips() {
        let curve = ParametricContrast::new(3.0, 100.0, 500.0, 2.0)
            .unwrap()
            .to_curve(19)
            .unwrap();
        let mut buf = Vec::new();
        curve.write_model(&mut buf).unwrap();
        let back = ContrastCurve::read_model(buf.as_slice()).unwrap();
        let mut buf2 = Vec::new();
        back.write_model(&mut buf2).unwrap();
        assert_eq!(buf, buf2, "model file round trip not byte-stable");
        assert!((back.onset_dose() - curve.onset_dose()).abs() < 1e-6);
        assert!((back.clearing_dose() - curve.clearing_dose()).abs() < 1e-6);
        for i in 0..=50 {
            let d = 90.0 + 10.0 * i as f64;
            let a = curve.height_for_dose(d).unwrap();
            let b = back.height_for_dose(d).unwrap();
            assert!((a - b).abs() < 1e-7, "model mismatch at dose {d}: {a} vs {b}");
        }
    }

    #[test]
    fn calibration_csv_round_trips_and_reports_bad_lines() {
        let samples = linear_samples(3.0, 100.0, 400.0, 6);
        let mut buf = Vec::new();
        write_calibration_csv(&mut buf, &samples).unwrap();
        let back = read_calibration_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), samples.len());
        for (a, b) in samples.iter().zip(&back) {
            assert!((a.dose - b.dose).abs() < 1e-6);
            assert!((a.height - b.height).abs() < 1e-9);
        }

        let bad = "dose_uC_cm2,height_um\n100,3\noops\n";
        match read_calibration_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        let bad_header = "dose,height\n100,3\n";
        assert!(matches!(
            read_calibration_csv(bad_header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn zero_dose_anchor_is_handled() {
        let mut samples = linear_samples(3.0, 100.0, 400.0, 10);
        samples.insert(
            0,
            ContrastSample {
                dose: 0.0,
                height: 3.0,
            },
        );
        let curve = fit_contrast(&samples, 3.0).unwrap();
        // The zero-dose sample is full height but dose 100 is the last
        // full-height sample, so it defines the onset.
        assert_eq!(curve.onset_dose(), 100.0);
        assert_eq!(curve.height_for_dose(0.0).unwrap(), 3.0);
    }
}
