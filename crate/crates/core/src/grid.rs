//! Nested coarse/fine rectangular meshes on the unit square.
//!
//! The fine mesh refines every coarse element into `refine × refine` square
//! cells. Nodes are numbered lexicographically with x running fastest; only
//! nodes in the interior of the domain carry a degree of freedom, since the
//! solution vanishes on the boundary.

use crate::error::{Error, Result};

/// Default number of oversampling layers used for localized basis solves.
pub const DEFAULT_LAYERS: usize = 2;

#[derive(Debug, Clone)]
pub struct GridHierarchy {
    coarse_n: usize,
    refine: usize,
    /// node index -> interior DOF index
    dof_map: Vec<Option<usize>>,
    /// interior DOF index -> node index
    dof_nodes: Vec<usize>,
    elem_cells: Vec<Vec<usize>>,
    elem_nodes: Vec<Vec<usize>>,
}

impl GridHierarchy {
    pub fn new(coarse_n: usize, refine: usize) -> Result<Self> {
        if coarse_n < 2 || refine < 2 {
            return Err(Error::InvalidArgument(format!(
                "grid needs coarse_n >= 2 and refine >= 2, got ({coarse_n}, {refine})"
            )));
        }
        let nf = coarse_n * refine;
        let side = nf + 1;
        let mut dof_map = vec![None; side * side];
        let mut dof_nodes = Vec::with_capacity((nf - 1) * (nf - 1));
        for iy in 1..nf {
            for ix in 1..nf {
                let node = ix + iy * side;
                dof_map[node] = Some(dof_nodes.len());
                dof_nodes.push(node);
            }
        }

        let mut elem_cells = Vec::with_capacity(coarse_n * coarse_n);
        let mut elem_nodes = Vec::with_capacity(coarse_n * coarse_n);
        for ey in 0..coarse_n {
            for ex in 0..coarse_n {
                let mut cells = Vec::with_capacity(refine * refine);
                for cy in ey * refine..(ey + 1) * refine {
                    for cx in ex * refine..(ex + 1) * refine {
                        cells.push(cx + cy * nf);
                    }
                }
                let mut nodes = Vec::with_capacity((refine + 1) * (refine + 1));
                for iy in ey * refine..=(ey + 1) * refine {
                    for ix in ex * refine..=(ex + 1) * refine {
                        nodes.push(ix + iy * side);
                    }
                }
                elem_cells.push(cells);
                elem_nodes.push(nodes);
            }
        }

        Ok(Self {
            coarse_n,
            refine,
            dof_map,
            dof_nodes,
            elem_cells,
            elem_nodes,
        })
    }

    pub fn coarse_n(&self) -> usize {
        self.coarse_n
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    /// Fine cells per side of the domain.
    pub fn fine_n(&self) -> usize {
        self.coarse_n * self.refine
    }

    /// Coarse mesh size `H = 1 / coarse_n`.
    pub fn coarse_h(&self) -> f64 {
        1.0 / self.coarse_n as f64
    }

    /// Fine mesh size `h = 1 / (coarse_n * refine)`.
    pub fn h(&self) -> f64 {
        1.0 / self.fine_n() as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.fine_n() + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_side() * self.nodes_per_side()
    }

    pub fn n_cells(&self) -> usize {
        self.fine_n() * self.fine_n()
    }

    /// Number of interior fine degrees of freedom, `(coarse_n*refine - 1)^2`.
    pub fn n_dofs(&self) -> usize {
        self.dof_nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.coarse_n * self.coarse_n
    }

    /// Coarse vertices including those on the boundary.
    pub fn n_coarse_vertices(&self) -> usize {
        (self.coarse_n + 1) * (self.coarse_n + 1)
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        ix + iy * self.nodes_per_side()
    }

    pub fn node_coords(&self, node: usize) -> (usize, usize) {
        let side = self.nodes_per_side();
        (node % side, node / side)
    }

    pub fn node_position(&self, node: usize) -> (f64, f64) {
        let (ix, iy) = self.node_coords(node);
        (ix as f64 * self.h(), iy as f64 * self.h())
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_map[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_nodes[dof]
    }

    pub fn cell_index(&self, cx: usize, cy: usize) -> usize {
        cx + cy * self.fine_n()
    }

    pub fn cell_coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.fine_n(), cell / self.fine_n())
    }

    /// Corner nodes of a fine cell, counter-clockwise from the lower left.
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let (cx, cy) = self.cell_coords(cell);
        [
            self.node_index(cx, cy),
            self.node_index(cx + 1, cy),
            self.node_index(cx + 1, cy + 1),
            self.node_index(cx, cy + 1),
        ]
    }

    /// Coarse element containing a fine cell.
    pub fn element_of_cell(&self, cell: usize) -> usize {
        let (cx, cy) = self.cell_coords(cell);
        cx / self.refine + (cy / self.refine) * self.coarse_n
    }

    pub fn element_coords(&self, elem: usize) -> (usize, usize) {
        (elem % self.coarse_n, elem / self.coarse_n)
    }

    pub fn element_index(&self, ex: usize, ey: usize) -> usize {
        ex + ey * self.coarse_n
    }

    pub fn element_cells(&self, elem: usize) -> &[usize] {
        &self.elem_cells[elem]
    }

    /// All fine nodes of a coarse element (boundary included), lexicographic.
    pub fn element_nodes(&self, elem: usize) -> &[usize] {
        &self.elem_nodes[elem]
    }

    /// Coarse vertices of an element, counter-clockwise from the lower left.
    pub fn element_vertices(&self, elem: usize) -> [usize; 4] {
        let (ex, ey) = self.element_coords(elem);
        let s = self.coarse_n + 1;
        [
            ex + ey * s,
            ex + 1 + ey * s,
            ex + 1 + (ey + 1) * s,
            ex + (ey + 1) * s,
        ]
    }

    /// Fine DOFs strictly inside a coarse element, i.e. the space `V(K_i)`.
    pub fn element_interior_dofs(&self, elem: usize) -> Vec<usize> {
        let (ex, ey) = self.element_coords(elem);
        self.rect_interior_dofs(ex, ey, ex + 1, ey + 1)
    }

    /// Interior DOFs of the rectangle of coarse elements `[x0, x1) × [y0, y1)`.
    fn rect_interior_dofs(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> Vec<usize> {
        let r = self.refine;
        let mut dofs = Vec::new();
        for iy in (y0 * r + 1)..(y1 * r) {
            for ix in (x0 * r + 1)..(x1 * r) {
                if let Some(d) = self.dof_map[self.node_index(ix, iy)] {
                    dofs.push(d);
                }
            }
        }
        dofs
    }

    /// Oversampled patch `K_{i,layers}` around a coarse element.
    pub fn oversample(&self, elem: usize, layers: usize) -> Result<OversamplePatch> {
        if elem >= self.n_elements() {
            return Err(Error::InvalidArgument(format!(
                "element index {elem} out of range ({} elements)",
                self.n_elements()
            )));
        }
        let (ex, ey) = self.element_coords(elem);
        // On a rectangular mesh, the elements touching a rectangle of elements
        // (corners included) form the rectangle grown by one in every direction.
        let x0 = ex.saturating_sub(layers);
        let y0 = ey.saturating_sub(layers);
        let x1 = (ex + layers + 1).min(self.coarse_n);
        let y1 = (ey + layers + 1).min(self.coarse_n);
        let mut elements = Vec::with_capacity((x1 - x0) * (y1 - y0));
        for py in y0..y1 {
            for px in x0..x1 {
                elements.push(self.element_index(px, py));
            }
        }
        Ok(OversamplePatch {
            center: elem,
            layers,
            elements,
            x_range: (x0, x1),
            y_range: (y0, y1),
            local_dofs: self.rect_interior_dofs(x0, y0, x1, y1),
        })
    }
}

/// Build the nested hierarchy with `coarse_n` elements per side and
/// `refine` fine cells per coarse cell per side.
pub fn build_grids(coarse_n: usize, refine: usize) -> Result<GridHierarchy> {
    GridHierarchy::new(coarse_n, refine)
}

/// A coarse element enlarged by a number of element layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OversamplePatch {
    pub center: usize,
    pub layers: usize,
    /// Coarse elements of the patch, lexicographic.
    pub elements: Vec<usize>,
    /// Coarse element column range `[start, end)`.
    pub x_range: (usize, usize),
    pub y_range: (usize, usize),
    /// Global fine DOFs strictly interior to the patch (zero trace on its boundary).
    pub local_dofs: Vec<usize>,
}

impl OversamplePatch {
    pub fn contains_element(&self, elem_coords: (usize, usize)) -> bool {
        let (ex, ey) = elem_coords;
        ex >= self.x_range.0 && ex < self.x_range.1 && ey >= self.y_range.0 && ey < self.y_range.1
    }

    /// Fine nodes per side of the patch interior; the DOF ordering is a
    /// lexicographic raster of this width.
    pub fn interior_width(&self, refine: usize) -> usize {
        (self.x_range.1 - self.x_range.0) * refine - 1
    }
}
