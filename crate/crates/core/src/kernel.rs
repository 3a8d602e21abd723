//! Transition kernels K(k_ix, k_sx) weighting the coherent sums of
//! higher-multipole channels.
//!
//! Tabulated file format (plain text):
//!
//! ```text
//! kernel v1 <n_i> <n_s>
//! K(0,0) K(0,1) ... K(0,n_s-1)
//! ...
//! K(n_i-1,0) ...
//! ```
//!
//! Row `a` belongs to k_ix = -k₀ + 2k₀·a/(n_i - 1) and column `b` to
//! k_sx = -k₀ + 2k₀·b/(n_s - 1). Values are whitespace separated and may be
//! wrapped freely; lines starting with `#` are ignored. Between nodes the
//! kernel is interpolated bilinearly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedKernel {
    n_i: usize,
    n_s: usize,
    values: Vec<f64>,
}

impl TabulatedKernel {
    pub fn new(n_i: usize, n_s: usize, values: Vec<f64>) -> Result<Self> {
        if n_i < 2 || n_s < 2 {
            return Err(parse_err(format!(
                "grid must be at least 2x2, got {n_i}x{n_s}"
            )));
        }
        if values.len() != n_i * n_s {
            return Err(parse_err(format!(
                "expected {} values for a {n_i}x{n_s} grid, found {}",
                n_i * n_s,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(parse_err("kernel values must be finite".into()));
        }
        Ok(Self { n_i, n_s, values })
    }

    /// Samples `f(k_ix, k_sx)` on the node grid for carrier `k0`.
    pub fn from_fn(n_i: usize, n_s: usize, k0: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(n_i * n_s);
        for a in 0..n_i {
            for b in 0..n_s {
                values.push(f(node(a, n_i, k0), node(b, n_s, k0)));
            }
        }
        Self::new(n_i, n_s, values)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text
            .lines()
            .filter(|l| !l.trim_start().starts_with('#'))
            .flat_map(str::split_whitespace);
        let (magic, version) = (tokens.next(), tokens.next());
        if magic != Some("kernel") || version != Some("v1") {
            return Err(parse_err("header must start with `kernel v1`".into()));
        }
        let mut dim = |name: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| parse_err(format!("missing {name} in header")))?
                .parse()
                .map_err(|e| parse_err(format!("bad {name}: {e}")))
        };
        let n_i = dim("n_i")?;
        let n_s = dim("n_s")?;
        let values = tokens
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| parse_err(format!("bad value `{t}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_i, n_s, values)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("kernel v1 {} {}\n", self.n_i, self.n_s);
        for row in self.values.chunks(self.n_s) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n_i, self.n_s)
    }

    /// Bilinear interpolation; arguments are clamped to [-k₀, k₀].
    pub fn eval(&self, kix: f64, ksx: f64, k0: f64) -> f64 {
        let (a, ta) = locate(kix, self.n_i, k0);
        let (b, tb) = locate(ksx, self.n_s, k0);
        let at = |i: usize, j: usize| self.values[i * self.n_s + j];
        let v00 = at(a, b);
        let v01 = at(a, b + 1);
        let v10 = at(a + 1, b);
        let v11 = at(a + 1, b + 1);
        (1.0 - ta) * ((1.0 - tb) * v00 + tb * v01) + ta * ((1.0 - tb) * v10 + tb * v11)
    }
}

fn node(index: usize, n: usize, k0: f64) -> f64 {
    -k0 + 2.0 * k0 * index as f64 / (n - 1) as f64
}

// Cell index and fractional offset of `x` on an n-node grid over [-k0, k0].
fn locate(x: f64, n: usize, k0: f64) -> (usize, f64) {
    let s = ((x + k0) / (2.0 * k0)).clamp(0.0, 1.0) * (n - 1) as f64;
    let cell = (s.floor() as usize).min(n - 2);
    (cell, s - cell as f64)
}

fn parse_err(reason: String) -> Error {
    Error::Parse {
        what: "kernel table".into(),
        reason,
    }
}

/// Kernel attached to a channel.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Tabulated(TabulatedKernel),
    /// cos θ_i · cos θ_s with θ = asin(k_x/k₀); even under k_x → −k_x.
    SyntheticEven,
    /// sin(θ_i − θ_s); odd under k_x → −k_x and under photon exchange.
    SyntheticOdd,
}

impl Kernel {
    pub fn weight(&self, kix: f64, ksx: f64, k0: f64) -> f64 {
        match self {
            Kernel::Tabulated(t) => t.eval(kix, ksx, k0),
            Kernel::SyntheticEven => {
                let ci = (1.0 - (kix / k0).powi(2)).max(0.0).sqrt();
                let cs = (1.0 - (ksx / k0).powi(2)).max(0.0).sqrt();
                ci * cs
            }
            Kernel::SyntheticOdd => {
                let (si, ss) = (kix / k0, ksx / k0);
                let ci = (1.0 - si * si).max(0.0).sqrt();
                let cs = (1.0 - ss * ss).max(0.0).sqrt();
                si * cs - ci * ss
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            Kernel::Tabulated(t) => format!("model_kernel:tabulated_{}x{}", t.n_i, t.n_s),
            Kernel::SyntheticEven => "model_kernel:synthetic_even".into(),
            Kernel::SyntheticOdd => "model_kernel:synthetic_odd".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_interpolate() {
        let t = TabulatedKernel::parse("kernel v1 2 3\n0 1 2\n# comment\n3 4 5\n").unwrap();
        let k0 = 2.0;
        assert_eq!(t.dims(), (2, 3));
        assert_eq!(t.eval(-2.0, -2.0, k0), 0.0);
        assert_eq!(t.eval(2.0, 2.0, k0), 5.0);
        assert_eq!(t.eval(-2.0, 0.0, k0), 1.0);
        // centre of the first cell
        assert!((t.eval(0.0, -1.0, k0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let k0 = 19.0;
        let f = |a: f64, b: f64| 1.0 + 0.5 * a - 0.25 * b + 0.01 * a * b;
        let t = TabulatedKernel::from_fn(7, 5, k0, f).unwrap();
        for &(a, b) in &[(0.3, -4.0), (-18.9, 18.9), (5.5, 0.0)] {
            assert!((t.eval(a, b, k0) - f(a, b)).abs() < 1e-12);
        }
        let back = TabulatedKernel::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(TabulatedKernel::parse("kernel v2 2 2\n1 2 3 4").is_err());
        assert!(TabulatedKernel::parse("kernel v1 2 2\n1 2 3").is_err());
        assert!(TabulatedKernel::parse("kernel v1 1 2\n1 2").is_err());
        assert!(TabulatedKernel::parse("kernel v1 2 2\n1 2 x 4").is_err());
        assert!(TabulatedKernel::parse("").is_err());
    }

    #[test]
    fn synthetic_kernel_symmetries() {
        let k0 = 19.0;
        for &(a, b) in &[(3.0, -7.0), (18.0, 1.0), (-0.5, 12.0)] {
            let odd = Kernel::SyntheticOdd;
            let even = Kernel::SyntheticEven;
            assert!((odd.weight(a, b, k0) + odd.weight(b, a, k0)).abs() < 1e-15);
            assert!((odd.weight(a, b, k0) + odd.weight(-a, -b, k0)).abs() < 1e-15);
            assert_eq!(even.weight(a, b, k0), even.weight(-a, -b, k0));
            assert_eq!(even.weight(a, b, k0), even.weight(b, a, k0));
            let (ti, ts) = ((a / k0).asin(), (b / k0).asin());
            assert!((odd.weight(a, b, k0) - (ti - ts).sin()).abs() < 1e-14);
            assert!((even.weight(a, b, k0) - ti.cos() * ts.cos()).abs() < 1e-14);
        }
    }
}
