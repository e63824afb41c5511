//! Rectangular lattice geometry and mode numbering.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Boundary {
    Periodic,
    Open,
}

impl FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic" | "pbc" => Ok(Boundary::Periodic),
            "open" | "obc" => Ok(Boundary::Open),
            _ => Err(Error::UnknownBoundary(s.to_string())),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Periodic => "periodic",
            Boundary::Open => "open",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up = 0,
    Down = 1,
}

/// `n_h x n_v` square lattice. Sites are numbered `h + n_h * v`; complex mode
/// numbering puts the spin-up block first: `mode = site + spin * sites`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub n_h: usize,
    pub n_v: usize,
    pub boundary: Boundary,
}

impl Lattice {
    pub fn new(n_h: usize, n_v: usize, boundary: Boundary) -> Result<Self> {
        if n_h < 2 || n_v < 2 {
            return Err(Error::LatticeTooSmall { n_h, n_v });
        }
        Ok(Self { n_h, n_v, boundary })
    }

    pub fn sites(&self) -> usize {
        self.n_h * self.n_v
    }

    pub fn modes(&self) -> usize {
        2 * self.sites()
    }

    pub fn site(&self, h: usize, v: usize) -> usize {
        h + self.n_h * v
    }

    pub fn coords(&self, site: usize) -> (usize, usize) {
        (site % self.n_h, site / self.n_h)
    }

    pub fn mode(&self, site: usize, spin: Spin) -> usize {
        site + spin as usize * self.sites()
    }

    /// Site displaced by `(dh, dv)`; `None` when it leaves an open lattice.
    pub fn shift(&self, site: usize, dh: isize, dv: isize) -> Option<usize> {
        let (h, v) = self.coords(site);
        let (nh, nv) = (self.n_h as isize, self.n_v as isize);
        let (mut h2, mut v2) = (h as isize + dh, v as isize + dv);
        match self.boundary {
            Boundary::Periodic => {
                h2 = h2.rem_euclid(nh);
                v2 = v2.rem_euclid(nv);
            }
            Boundary::Open => {
                if h2 < 0 || h2 >= nh || v2 < 0 || v2 >= nv {
                    return None;
                }
            }
        }
        Some(self.site(h2 as usize, v2 as usize))
    }

    /// Nearest-neighbour bonds, each listed once in forward orientation.
    /// On a periodic extent of 2 the wrap bond coincides with the direct one
    /// and is kept, so the dispersion is `2t(cos kx + cos ky)` for every size.
    pub fn bonds(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for s in 0..self.sites() {
            let (h, v) = self.coords(s);
            let periodic = self.boundary == Boundary::Periodic;
            if h + 1 < self.n_h || periodic {
                out.push((s, self.site((h + 1) % self.n_h, v)));
            }
            if v + 1 < self.n_v || periodic {
                out.push((s, self.site(h, (v + 1) % self.n_v)));
            }
        }
        out
    }

    /// Allowed momenta `(2 pi m / n_h, 2 pi n / n_v)`, ordered like sites.
    pub fn momenta(&self) -> Vec<(f64, f64)> {
        (0..self.sites())
            .map(|s| {
                let (m, n) = self.coords(s);
                (2.0 * PI * m as f64 / self.n_h as f64, 2.0 * PI * n as f64 / self.n_v as f64)
            })
            .collect()
    }

    /// Index of `-k` in the momentum ordering.
    pub fn opposite_momentum(&self, k: usize) -> usize {
        let (m, n) = self.coords(k);
        self.site((self.n_h - m) % self.n_h, (self.n_v - n) % self.n_v)
    }

    /// Trap offset `[(N_h+1)/2 - h]^2 + [(N_v+1)/2 - v]^2` with one-based coordinates.
    pub fn trap_offset(&self, site: usize) -> f64 {
        let (h, v) = self.coords(site);
        let dh = (self.n_h as f64 + 1.0) / 2.0 - (h as f64 + 1.0);
        let dv = (self.n_v as f64 + 1.0) / 2.0 - (v as f64 + 1.0);
        dh * dh + dv * dv
    }
}
