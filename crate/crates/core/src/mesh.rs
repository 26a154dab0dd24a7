//! Structured meshes: uniform intervals in 1D and diagonally split rectangles
//! in 2D, with tagged boundary facets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boundary condition attached to a boundary facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Impedance,
    /// Natural condition, contributes no boundary term.
    Neumann,
}

/// A boundary facet: a single node in 1D, an edge in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub nodes: Vec<usize>,
    /// The unique element owning this facet.
    pub element: usize,
    pub tag: BoundaryTag,
}

impl Facet {
    pub fn measure(&self, mesh: &Mesh) -> f64 {
        match self.nodes.as_slice() {
            [_] => 1.0,
            [a, b] => distance(mesh.node(*a), mesh.node(*b)),
            _ => unreachable!("facets have one or two nodes"),
        }
    }
}

/// Tags for the four sides of a rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideTags {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl SideTags {
    pub fn all(tag: BoundaryTag) -> Self {
        Self {
            left: tag,
            right: tag,
            bottom: tag,
            top: tag,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    nodes: Vec<[f64; 2]>,
    /// Flat connectivity, `dim + 1` node indices per element.
    cells: Vec<usize>,
    facets: Vec<Facet>,
    h: f64,
}

/// Uniform mesh of `[a, b]` with `n` elements.
pub fn build_interval_mesh(
    a: f64,
    b: f64,
    n: usize,
    left_tag: BoundaryTag,
    right_tag: BoundaryTag,
) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("element count must be at least 1".into()));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "interval endpoints must satisfy a < b (got a = {a}, b = {b})"
        )));
    }
    let step = (b - a) / n as f64;
    let nodes: Vec<[f64; 2]> = (0..=n)
        .map(|i| {
            let x = if i == n { b } else { a + step * i as f64 };
            [x, 0.0]
        })
        .collect();
    let cells: Vec<usize> = (0..n).flat_map(|e| [e, e + 1]).collect();
    let facets = vec![
        Facet {
            nodes: vec![0],
            element: 0,
            tag: left_tag,
        },
        Facet {
            nodes: vec![n],
            element: n - 1,
            tag: right_tag,
        },
    ];
    let mut mesh = Mesh {
        dim: 1,
        nodes,
        cells,
        facets,
        h: 0.0,
    };
    mesh.h = mesh.max_diameter();
    Ok(mesh)
}

/// Rectangle `[0, width] x [0, height]` split into `nx * ny` cells, each cut
/// along its rising diagonal into two right triangles.
///
/// Nodes are numbered row by row with x varying fastest.
pub fn build_rect_mesh(width: f64, height: f64, nx: usize, ny: usize, tags: SideTags) -> Result<Mesh> {
    if !(width > 0.0) || !(height > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rectangle dimensions must be positive (got {width} x {height})"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "cell counts must be at least 1 (got {nx} x {ny})"
        )));
    }
    let node_id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { height } else { height * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { width } else { width * i as f64 / nx as f64 };
            nodes.push([x, y]);
        }
    }

    let mut cells = Vec::with_capacity(nx * ny * 6);
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for j in 0..ny {
        for i in 0..nx {
            let n00 = node_id(i, j);
            let n10 = node_id(i + 1, j);
            let n11 = node_id(i + 1, j + 1);
            let n01 = node_id(i, j + 1);
            // lower-right triangle owns the bottom and right edges of the cell
            let lower = cells.len() / 3;
            cells.extend_from_slice(&[n00, n10, n11]);
            // upper-left triangle owns the left and top edges
            let upper = lower + 1;
            cells.extend_from_slice(&[n00, n11, n01]);

            if j == 0 {
                facets.push(Facet {
                    nodes: vec![n00, n10],
                    element: lower,
                    tag: tags.bottom,
                });
            }
            if i == nx - 1 {
                facets.push(Facet {
                    nodes: vec![n10, n11],
                    element: lower,
                    tag: tags.right,
                });
            }
            if j == ny - 1 {
                facets.push(Facet {
                    nodes: vec![n11, n01],
                    element: upper,
                    tag: tags.top,
                });
            }
            if i == 0 {
                facets.push(Facet {
                    nodes: vec![n01, n00],
                    element: upper,
                    tag: tags.left,
                });
            }
        }
    }
    let mut mesh = Mesh {
        dim: 2,
        nodes,
        cells,
        facets,
        h: 0.0,
    };
    mesh.h = mesh.max_diameter();
    Ok(mesh)
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let w = self.dim + 1;
        &self.cells[e * w..(e + 1) * w]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    /// Left and right endpoints of a 1D mesh.
    pub fn interval(&self) -> Option<(f64, f64)> {
        (self.dim == 1).then(|| (self.nodes[0][0], self.nodes[self.nodes.len() - 1][0]))
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let el = self.element(e);
        let inv = 1.0 / el.len() as f64;
        let mut c = [0.0, 0.0];
        for &v in el {
            c[0] += self.nodes[v][0] * inv;
            c[1] += self.nodes[v][1] * inv;
        }
        c
    }

    /// Length in 1D, signed area in 2D (positive for counterclockwise elements).
    pub fn measure(&self, e: usize) -> f64 {
        let el = self.element(e);
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => {
                let [x0, y0] = self.nodes[el[0]];
                let [x1, y1] = self.nodes[el[1]];
                let [x2, y2] = self.nodes[el[2]];
                0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
            }
        }
    }

    pub fn diameter(&self, e: usize) -> f64 {
        let el = self.element(e);
        let mut d: f64 = 0.0;
        for (a, &i) in el.iter().enumerate() {
            for &j in &el[a + 1..] {
                d = d.max(distance(self.nodes[i], self.nodes[j]));
            }
        }
        d
    }

    fn max_diameter(&self) -> f64 {
        (0..self.n_elements()).map(|e| self.diameter(e)).fold(0.0, f64::max)
    }

    /// Nodes lying on a facet with the given tag.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<bool> {
        let mut flags = vec![false; self.nodes.len()];
        for f in self.facets.iter().filter(|f| f.tag == tag) {
            for &v in &f.nodes {
                flags[v] = true;
            }
        }
        flags
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.facets.iter().any(|f| f.tag == tag)
    }
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use BoundaryTag::*;

    #[test]
    fn single_interval_element() {
        let m = build_interval_mesh(0.0, 1.0, 1, Impedance, Impedance).unwrap();
        assert_eq!(m.n_nodes(), 2);
        assert_eq!(m.n_elements(), 1);
        assert_eq!(m.node(0)[0], 0.0);
        assert_eq!(m.node(1)[0], 1.0);
        assert_eq!(m.h(), 1.0);
    }

    #[test]
    fn interval_tags_and_h() {
        let m = build_interval_mesh(0.0, 1.0, 4, Dirichlet, Impedance).unwrap();
        assert_eq!(m.n_nodes(), 5);
        assert_eq!(m.h(), 0.25);
        assert_eq!(m.facets()[0].tag, Dirichlet);
        assert_eq!(m.facets()[0].nodes, vec![0]);
        assert_eq!(m.facets()[1].tag, Impedance);

        let m = build_interval_mesh(0.0, 2.0, 8, Neumann, Neumann).unwrap();
        assert_eq!(m.h(), 0.25);
    }

    #[test]
    fn interval_rejects_bad_input() {
        assert!(matches!(
            build_interval_mesh(0.0, 1.0, 0, Impedance, Impedance),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_interval_mesh(1.0, 1.0, 3, Impedance, Impedance).is_err());
        assert!(build_interval_mesh(2.0, 1.0, 3, Impedance, Impedance).is_err());
    }

    #[test]
    fn unit_square_split() {
        let m = build_rect_mesh(1.0, 1.0, 1, 1, SideTags::all(Impedance)).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_elements(), 2);
        assert!((m.h() - 2f64.sqrt()).abs() < 1e-15);

        let m = build_rect_mesh(1.0, 1.0, 2, 2, SideTags::all(Impedance)).unwrap();
        assert_eq!(m.n_nodes(), 9);
        assert_eq!(m.n_elements(), 8);
    }

    #[test]
    fn rect_h_recomputed_from_coordinates() {
        let m = build_rect_mesh(2.0, 1.0, 4, 2, SideTags::all(Neumann)).unwrap();
        // cells are 0.5 x 0.5, diagonal is the longest edge
        let brute = m
            .elements()
            .flat_map(|el| {
                let el = el.to_vec();
                let nodes = m.nodes().to_vec();
                (0..3).flat_map(move |a| {
                    let el = el.clone();
                    let nodes = nodes.clone();
                    (0..3).map(move |b| distance(nodes[el[a]], nodes[el[b]]))
                })
            })
            .fold(0.0, f64::max);
        assert_eq!(m.h(), brute);
        assert!((m.h() - 2f64.sqrt() * 0.5).abs() < 1e-15);
    }

    #[test]
    fn rect_rejects_degenerate() {
        let t = SideTags::all(Impedance);
        assert!(build_rect_mesh(0.0, 1.0, 2, 2, t).is_err());
        assert!(build_rect_mesh(1.0, -1.0, 2, 2, t).is_err());
        assert!(build_rect_mesh(1.0, 1.0, 0, 2, t).is_err());
    }

    #[test]
    fn measures_sum_to_domain_and_facets_are_owned() {
        let m = build_rect_mesh(3.0, 2.0, 5, 7, SideTags::all(Impedance)).unwrap();
        let area: f64 = (0..m.n_elements()).map(|e| m.measure(e)).sum();
        assert!((area - 6.0).abs() <= 1e-12 * 6.0);
        assert!((0..m.n_elements()).all(|e| m.measure(e) > 0.0));
        assert_eq!(m.facets().len(), 2 * (5 + 7));
        for f in m.facets() {
            let el = m.element(f.element);
            assert!(f.nodes.iter().all(|v| el.contains(v)));
        }
        // every boundary edge appears once
        let mut edges: Vec<(usize, usize)> = m
            .facets()
            .iter()
            .map(|f| (f.nodes[0].min(f.nodes[1]), f.nodes[0].max(f.nodes[1])))
            .collect();
        edges.sort();
        edges.dedup();
        assert_eq!(edges.len(), m.facets().len());
        let perimeter: f64 = m.facets().iter().map(|f| f.measure(&m)).sum();
        assert!((perimeter - 10.0).abs() < 1e-12);
    }

    #[test]
    fn side_tags_are_applied() {
        let tags = SideTags {
            left: Dirichlet,
            right: Impedance,
            bottom: Neumann,
            top: Neumann,
        };
        let m = build_rect_mesh(1.0, 1.0, 3, 3, tags).unwrap();
        for f in m.facets() {
            let [x0, y0] = m.node(f.nodes[0]);
            let [x1, y1] = m.node(f.nodes[1]);
            let expected = if x0 == 0.0 && x1 == 0.0 {
                Dirichlet
            } else if x0 == 1.0 && x1 == 1.0 {
                Impedance
            } else {
                assert!(y0 == y1);
                Neumann
            };
            assert_eq!(f.tag, expected);
        }
    }
}
