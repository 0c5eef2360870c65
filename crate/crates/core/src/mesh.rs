//! Uniform periodic Cartesian mesh of square elements.
//!
//! Elements are numbered row-major: `e = ix + kx * iy`, so a row of the
//! numbering is a fixed `iy`. Nodes inside an element are numbered with the
//! `xi` index fastest: `node = i + (N + 1) * j`.

use crate::error::{Error, Result};
use crate::sbp::SbpOperators;

/// Face of an element, named by its outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Face {
    West = 0,
    East = 1,
    South = 2,
    North = 3,
}

impl Face {
    pub const ALL: [Face; 4] = [Face::West, Face::East, Face::South, Face::North];

    pub fn opposite(self) -> Face {
        match self {
            Face::West => Face::East,
            Face::East => Face::West,
            Face::South => Face::North,
            Face::North => Face::South,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Bounds {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 1.0, 0.0, 1.0)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone)]
pub struct CartesianMesh {
    pub kx: usize,
    pub ky: usize,
    pub bounds: Bounds,
    pub order: usize,
    /// Element edge length.
    pub dx: f64,
    /// Constant mapping Jacobian `dx^2 / 4`.
    pub jacobian: f64,
    /// Physical node coordinates, `node_coords[e][node] = (x, y)`.
    pub node_coords: Vec<Vec<(f64, f64)>>,
    /// Periodic neighbours indexed by [`Face`].
    pub neighbors: Vec<[usize; 4]>,
}

impl CartesianMesh {
    pub fn num_elements(&self) -> usize {
        self.kx * self.ky
    }

    pub fn nodes_per_element(&self) -> usize {
        (self.order + 1) * (self.order + 1)
    }

    pub fn element_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.kx * iy
    }

    pub fn element_position(&self, e: usize) -> (usize, usize) {
        (e % self.kx, e / self.kx)
    }

    pub fn neighbor(&self, e: usize, face: Face) -> usize {
        self.neighbors[e][face as usize]
    }

    /// Reference-to-physical derivative scale, `2 / dx`.
    pub fn metric(&self) -> f64 {
        2.0 / self.dx
    }
}

/// Builds the mesh and the physical LGL node coordinates.
pub fn build_mesh(bounds: Bounds, kx: usize, ky: usize, ops: &SbpOperators) -> Result<CartesianMesh> {
    if kx == 0 || ky == 0 {
        return Err(Error::Config("element counts must be at least 1".into()));
    }
    let dx = (bounds.x1 - bounds.x0) / kx as f64;
    let dy = (bounds.y1 - bounds.y0) / ky as f64;
    if !(dx > 0.0 && dy > 0.0) {
        return Err(Error::Config("domain bounds must be increasing".into()));
    }
    if (dx - dy).abs() > 1e-12 * dx.max(dy) {
        return Err(Error::Config(format!(
            "elements must be square: dx = {dx}, dy = {dy}"
        )));
    }
    let order = ops.order;
    let np = order + 1;
    let mut node_coords = Vec::with_capacity(kx * ky);
    let mut neighbors = Vec::with_capacity(kx * ky);
    for iy in 0..ky {
        for ix in 0..kx {
            let cx = bounds.x0 + ix as f64 * dx;
            let cy = bounds.y0 + iy as f64 * dx;
            let mut coords = Vec::with_capacity(np * np);
            for j in 0..np {
                for i in 0..np {
                    coords.push((
                        cx + 0.5 * dx * (ops.nodes[i] + 1.0),
                        cy + 0.5 * dx * (ops.nodes[j] + 1.0),
                    ));
                }
            }
            node_coords.push(coords);
            let west = (ix + kx - 1) % kx + kx * iy;
            let east = (ix + 1) % kx + kx * iy;
            let south = ix + kx * ((iy + ky - 1) % ky);
            let north = ix + kx * ((iy + 1) % ky);
            neighbors.push([west, east, south, north]);
        }
    }
    Ok(CartesianMesh {
        kx,
        ky,
        bounds,
        order,
        dx,
        jacobian: dx * dx / 4.0,
        node_coords,
        neighbors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ops(n: usize) -> SbpOperators {
        SbpOperators::new(n).unwrap()
    }

    #[test]
    fn single_element_is_its_own_neighbor() {
        let m = build_mesh(Bounds::unit(), 1, 1, &ops(3)).unwrap();
        assert_eq!(m.neighbors[0], [0, 0, 0, 0]);
    }

    #[test]
    fn ten_by_ten_jacobian() {
        let m = build_mesh(Bounds::unit(), 10, 10, &ops(2)).unwrap();
        assert_abs_diff_eq!(m.dx, 0.1, epsilon = 1e-15);
        assert_eq!(m.jacobian, m.dx * m.dx / 4.0);
        assert_abs_diff_eq!(m.jacobian, 0.0025, epsilon = 1e-15);
    }

    #[test]
    fn periodic_wraparound_indices() {
        let tau = 2.0 * std::f64::consts::PI;
        let m = build_mesh(Bounds::new(0.0, tau, 0.0, tau), 20, 20, &ops(1)).unwrap();
        assert_abs_diff_eq!(m.dx, tau / 20.0, epsilon = 1e-15);
        let e00 = m.element_index(0, 0);
        assert_eq!(m.neighbor(e00, Face::West), m.element_index(19, 0));
        assert_eq!(m.neighbor(e00, Face::South), m.element_index(0, 19));
        assert_eq!(m.neighbor(e00, Face::East), m.element_index(1, 0));
    }

    #[test]
    fn neighbor_relation_is_an_involution() {
        let m = build_mesh(Bounds::unit(), 4, 4, &ops(2)).unwrap();
        for e in 0..m.num_elements() {
            for f in Face::ALL {
                assert_eq!(m.neighbor(m.neighbor(e, f), f.opposite()), e);
            }
        }
    }

    #[test]
    fn rejects_non_square_elements() {
        assert!(build_mesh(Bounds::new(0.0, 2.0, 0.0, 1.0), 4, 4, &ops(2)).is_err());
        assert!(build_mesh(Bounds::unit(), 0, 4, &ops(2)).is_err());
    }

    #[test]
    fn quadrature_area() {
        let o = ops(4);
        let m = build_mesh(Bounds::new(-1.0, 1.0, -1.0, 1.0), 5, 5, &o).unwrap();
        let mut area = 0.0;
        for _ in 0..m.num_elements() {
            for j in 0..=o.order {
                for i in 0..=o.order {
                    area += m.jacobian * o.weights[i] * o.weights[j];
                }
            }
        }
        assert_abs_diff_eq!(area, m.bounds.area(), epsilon = 1e-12);
    }

    #[test]
    fn metric_scaling_from_node_coordinates() {
        let o = ops(5);
        let m = build_mesh(Bounds::unit(), 3, 3, &o).unwrap();
        let np = o.num_nodes();
        let xs: Vec<f64> = (0..np).map(|i| m.node_coords[4][i].0).collect();
        // dx/dxi sampled through D equals dx/2, so (2/dx) * D x = 1.
        for d in o.differentiate(&xs) {
            assert_abs_diff_eq!(m.metric() * d, 1.0, epsilon = 1e-12);
        }
    }
}
