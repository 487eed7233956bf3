//! 2D FFT convolution backend for the exposure model.
//!
//! Linear (zero-padded) convolution pads the field by the kernel half-width
//! on every side and rounds up to a 5-smooth FFT length; periodic
//! convolution transforms the field at its own size and folds the kernel
//! modulo the grid, which keeps constants and totals exact to rounding.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::kernel::DiscreteKernel;

/// Smallest length >= n with no prime factor above 5.
fn next_fast_len(mut n: usize) -> usize {
    fn smooth(mut v: usize) -> bool {
        for p in [2usize, 3, 5] {
            while v % p == 0 {
                v /= p;
            }
        }
        v == 1
    }
    while !smooth(n) {
        n += 1;
    }
    n
}

struct Fft2 {
    nx: usize,
    ny: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    transpose: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Fft2 {
    fn new(nx: usize, ny: usize) -> Fft2 {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(nx);
        let row_inv = planner.plan_fft_inverse(nx);
        let col_fwd = planner.plan_fft_forward(ny);
        let col_inv = planner.plan_fft_inverse(ny);
        let scratch_len = row_fwd
            .get_inplace_scratch_len()
            .max(row_inv.get_inplace_scratch_len())
            .max(col_fwd.get_inplace_scratch_len())
            .max(col_inv.get_inplace_scratch_len());
        Fft2 {
            nx,
            ny,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            transpose: vec![Complex64::default(); nx * ny],
            scratch: vec![Complex64::default(); scratch_len],
        }
    }

    fn run(&mut self, buf: &mut [Complex64], forward: bool) {
        let (row, col) = if forward {
            (&self.row_fwd, &self.col_fwd)
        } else {
            (&self.row_inv, &self.col_inv)
        };
        for r in 0..self.ny {
            row.process_with_scratch(&mut buf[r * self.nx..(r + 1) * self.nx], &mut self.scratch);
        }
        for r in 0..self.ny {
            for c in 0..self.nx {
                self.transpose[c * self.ny + r] = buf[r * self.nx + c];
            }
        }
        for c in 0..self.nx {
            col.process_with_scratch(
                &mut self.transpose[c * self.ny..(c + 1) * self.ny],
                &mut self.scratch,
            );
        }
        for c in 0..self.nx {
            for r in 0..self.ny {
                buf[r * self.nx + c] = self.transpose[c * self.ny + r];
            }
        }
    }
}

/// Convolves field-sized real buffers with a fixed kernel spectrum.
pub(crate) struct Convolver {
    nx: usize,
    ny: usize,
    px: usize,
    py: usize,
    spectrum: Vec<Complex64>,
    fft: Fft2,
    buf: Vec<Complex64>,
}

impl Convolver {
    pub(crate) fn new(kernel: &DiscreteKernel, nx: usize, ny: usize, periodic: bool) -> Convolver {
        let m = kernel.half_width();
        let (px, py) = if periodic {
            (nx, ny)
        } else {
            (next_fast_len(nx + 2 * m), next_fast_len(ny + 2 * m))
        };
        let mut fft = Fft2::new(px, py);
        let mut spectrum = vec![Complex64::default(); px * py];
        let m = m as isize;
        for dj in -m..=m {
            let y = (dj.rem_euclid(py as isize)) as usize;
            for di in -m..=m {
                let w = kernel.weight(di, dj);
                if w != 0.0 {
                    let x = (di.rem_euclid(px as isize)) as usize;
                    spectrum[y * px + x] += Complex64::new(w, 0.0);
                }
            }
        }
        fft.run(&mut spectrum, true);
        Convolver {
            nx,
            ny,
            px,
            py,
            spectrum,
            fft,
            buf: vec![Complex64::default(); px * py],
        }
    }

    /// `dst = src (x) kernel`, both of field size `nx * ny`.
    pub(crate) fn convolve(&mut self, src: &[f64], dst: &mut [f64]) {
        debug_assert_eq!(src.len(), self.nx * self.ny);
        debug_assert_eq!(dst.len(), self.nx * self.ny);
        self.buf.fill(Complex64::default());
        for r in 0..self.ny {
            for c in 0..self.nx {
                self.buf[r * self.px + c] = Complex64::new(src[r * self.nx + c], 0.0);
            }
        }
        self.fft.run(&mut self.buf, true);
        for (b, s) in self.buf.iter_mut().zip(&self.spectrum) {
            *b *= *s;
        }
        self.fft.run(&mut self.buf, false);
        let scale = 1.0 / (self.px as f64 * self.py as f64);
        for r in 0..self.ny {
            for c in 0..self.nx {
                dst[r * self.nx + c] = self.buf[r * self.px + c].re * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{discretize, PointSpreadFunction};

    #[test]
    fn next_fast_len_is_5_smooth_and_minimal() {
        assert_eq!(next_fast_len(1), 1);
        assert_eq!(next_fast_len(17), 18);
        assert_eq!(next_fast_len(608), 625);
        assert_eq!(next_fast_len(640), 640);
    }

    /// Zero-padded convolution must match a direct spatial-domain sum.
    #[test]
    fn matches_direct_convolution() {
        let psf = PointSpreadFunction::new(&[(1.0, 1.2)]).unwrap();
        let k = discretize(&psf, 0.5, 1e-4).unwrap();
        let (nx, ny) = (13, 9);
        let mut src = vec![0.0; nx * ny];
        for (i, v) in src.iter_mut().enumerate() {
            *v = ((i * 37 + 11) % 101) as f64 / 17.0;
        }

        let mut conv = Convolver::new(&k, nx, ny, false);
        let mut fast = vec![0.0; nx * ny];
        conv.convolve(&src, &mut fast);

        let m = k.half_width() as isize;
        for r in 0..ny as isize {
            for c in 0..nx as isize {
                let mut acc = 0.0;
                for dj in -m..=m {
                    for di in -m..=m {
                        let (sc, sr) = (c - di, r - dj);
                        if sc >= 0 && sr >= 0 && sc < nx as isize && sr < ny as isize {
                            acc += src[sr as usize * nx + sc as usize] * k.weight(di, dj);
                        }
                    }
                }
                let got = fast[r as usize * nx + c as usize];
                assert!(
                    (got - acc).abs() < 1e-12,
                    "cell ({c}, {r}): fft {got} vs direct {acc}"
                );
            }
        }
    }

    /// Periodic convolution with a unit-sum kernel preserves constants and
    /// totals.
    #[test]
    fn periodic_preserves_constants_and_totals() {
        let psf = PointSpreadFunction::new(&[(0.4, 0.8), (0.6, 3.0)]).unwrap();
        let k = discretize(&psf, 0.5, 1e-4).unwrap();
        let (nx, ny) = (24, 16);
        let mut conv = Convolver::new(&k, nx, ny, true);

        let src = vec![2.5; nx * ny];
        let mut dst = vec![0.0; nx * ny];
        conv.convolve(&src, &mut dst);
        for &v in &dst {
            assert!((v - 2.5).abs() < 2.5 * 1e-9);
        }

        let mut src = vec![0.0; nx * ny];
        for (i, v) in src.iter_mut().enumerate() {
            *v = (i % 7) as f64;
        }
        let sum_in: f64 = src.iter().sum();
        conv.convolve(&src, &mut dst);
        let sum_out: f64 = dst.iter().sum();
        assert!((sum_out - sum_in).abs() < sum_in * 1e-9);
    }
}
