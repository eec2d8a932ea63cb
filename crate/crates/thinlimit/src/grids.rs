//! Uniform tensor grids on the flattened rectangle [a,b] × [0,1], flat node
//! storage, second-order interior finite differences, and reconstruction of
//! physical derivative jets through the flattening chain rule.

use crate::geometry::{chain_rule_bundle, ChainRuleBundle, DomainSpec, GeometryError, ThinDomainSpec};
use crate::operators::SymMat2;
use thiserror::Error;

/// Errors raised by grid constructors.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 3 nodes per direction, got nx = {nx}, ns = {ns}")]
    BadResolution { nx: usize, ns: usize },
    #[error("grid domain [{ga}, {gb}] does not match the scenario domain [{ta}, {tb}]")]
    DomainMismatch { ga: f64, gb: f64, ta: f64, tb: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// A uniform grid on [a,b] × [0,1] with nodes (x_i, s_j) = (a + i·hx, j·hs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceGrid {
    domain: DomainSpec,
    nx: usize,
    ns: usize,
    hx: f64,
    hs: f64,
}

impl ReferenceGrid {
    /// Validates nx ≥ 3 and ns ≥ 3.
    pub fn new(domain: DomainSpec, nx: usize, ns: usize) -> Result<Self, GridError> {
        if nx < 3 || ns < 3 {
            return Err(GridError::BadResolution { nx, ns });
        }
        Ok(Self {
            domain,
            nx,
            ns,
            hx: domain.length() / (nx - 1) as f64,
            hs: 1.0 / (ns - 1) as f64,
        })
    }

    /// Aspect-matched vertical resolution:
    /// ns = max(9, round(nx·ε·g_max/(b−a)) + 9), so the physical cell aspect
    /// stays bounded while thin strips never starve below 9 rows.
    pub fn ns_for(nx: usize, thin: &ThinDomainSpec) -> usize {
        let dom = thin.domain();
        let aspect = nx as f64 * thin.epsilon() * thin.profile().g_max() / dom.length();
        9usize.max(aspect.round() as usize + 9)
    }

    /// The base interval.
    pub fn domain(&self) -> DomainSpec {
        self.domain
    }

    /// Node count in x.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Node count in s.
    pub fn ns(&self) -> usize {
        self.ns
    }

    /// Grid spacing in x.
    pub fn hx(&self) -> f64 {
        self.hx
    }

    /// Grid spacing in s.
    pub fn hs(&self) -> f64 {
        self.hs
    }

    /// Total node count nx·ns.
    pub fn len(&self) -> usize {
        self.nx * self.ns
    }

    /// Whether the grid is empty (never true for a validated grid).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// x-coordinate of column i.
    pub fn x(&self, i: usize) -> f64 {
        self.domain.a() + i as f64 * self.hx
    }

    /// s-coordinate of row j.
    pub fn s(&self, j: usize) -> f64 {
        j as f64 * self.hs
    }

    /// Flat index of node (i, j): row-major by j, so idx = j·nx + i.
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Whether node (i, j) touches any edge of the rectangle.
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ns - 1
    }
}

/// Node values stored flat, value of node (i, j) at index j·nx + i.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    ns: usize,
    data: Vec<f64>,
}

impl Field {
    /// All-zero field on the grid.
    pub fn zeros(grid: &ReferenceGrid) -> Self {
        Self { nx: grid.nx, ns: grid.ns, data: vec![0.0; grid.len()] }
    }

    /// Field filled from a node function (i, j) ↦ value.
    pub fn from_fn(grid: &ReferenceGrid, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.len());
        for j in 0..grid.ns {
            for i in 0..grid.nx {
                data.push(f(i, j));
            }
        }
        Self { nx: grid.nx, ns: grid.ns, data }
    }

    /// Wraps an existing flat vector; len must equal nx·ns.
    pub(crate) fn from_vec(nx: usize, ns: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nx * ns, "flat data does not match grid shape");
        Self { nx, ns, data }
    }

    /// Node count in x.
    pub fn nx(&self) -> usize {
        self.nx
    }

    /// Node count in s.
    pub fn ns(&self) -> usize {
        self.ns
    }

    /// Value at node (i, j).
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nx + i]
    }

    /// Sets the value at node (i, j).
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.nx + i] = v;
    }

    /// Flat view, row-major by j.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Mutable flat view, row-major by j.
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// sup-norm over all nodes.
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// First and second central differences of the flattened unknown at an
/// interior node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatDerivs {
    pub v_x: f64,
    pub v_s: f64,
    pub v_xx: f64,
    pub v_ss: f64,
    pub v_xs: f64,
}

/// Physical gradient and Hessian of u at a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalJet {
    /// (u_x, u_y).
    pub grad: [f64; 2],
    /// Symmetric Hessian D²u.
    pub hess: SymMat2,
}

/// Central differences on the flat storage; shared by the public API and the
/// solver hot loop so both produce bit-identical values.
pub(crate) fn flat_derivs_slice(
    v: &[f64],
    nx: usize,
    i: usize,
    j: usize,
    hx: f64,
    hs: f64,
) -> FlatDerivs {
    let c = j * nx + i;
    let vc = v[c];
    let w = v[c - 1];
    let e = v[c + 1];
    let lo = v[c - nx];
    let hi = v[c + nx];
    let lo_w = v[c - nx - 1];
    let lo_e = v[c - nx + 1];
    let hi_w = v[c + nx - 1];
    let hi_e = v[c + nx + 1];
    FlatDerivs {
        v_x: (e - w) / (2.0 * hx),
        v_s: (hi - lo) / (2.0 * hs),
        v_xx: (e - 2.0 * vc + w) / (hx * hx),
        v_ss: (hi - 2.0 * vc + lo) / (hs * hs),
        v_xs: (hi_e - hi_w - lo_e + lo_w) / (4.0 * hx * hs),
    }
}

/// Second-order central differences at the interior node (i, j).
///
/// Panics if (i, j) touches the grid boundary or if the field shape does not
/// match the grid; one-sided boundary stencils are the solvers' business.
pub fn fd_derivs(grid: &ReferenceGrid, field: &Field, i: usize, j: usize) -> FlatDerivs {
    assert_eq!(
        (field.nx, field.ns),
        (grid.nx, grid.ns),
        "field shape does not match grid"
    );
    assert!(
        !grid.is_boundary(i, j),
        "fd_derivs is defined on interior nodes only, got (i, j) = ({i}, {j})"
    );
    flat_derivs_slice(&field.data, grid.nx, i, j, grid.hx, grid.hs)
}

/// Maps flattened derivatives to the physical jet through the chain rule:
///
/// u_x  = v_x + v_s·s_x
/// u_y  = v_s·inv_eg
/// u_xx = v_xx + 2v_xs·s_x + v_ss·s_x² + v_s·s_xx
/// u_xy = inv_eg·(v_xs + v_ss·s_x) + v_s·ds_x_dy
/// u_yy = v_ss·inv_eg²
pub(crate) fn jet_from_flat(d: &FlatDerivs, cb: &ChainRuleBundle) -> PhysicalJet {
    let u_x = d.v_x + d.v_s * cb.s_x;
    let u_y = d.v_s * cb.inv_eg;
    let u_xx = d.v_xx + 2.0 * d.v_xs * cb.s_x + d.v_ss * (cb.s_x * cb.s_x) + d.v_s * cb.s_xx;
    let u_xy = cb.inv_eg * (d.v_xs + d.v_ss * cb.s_x) + d.v_s * cb.ds_x_dy;
    let u_yy = d.v_ss * (cb.inv_eg * cb.inv_eg);
    PhysicalJet {
        grad: [u_x, u_y],
        hess: SymMat2 { xx: u_xx, xy: u_xy, yy: u_yy },
    }
}

/// Reconstructs the physical gradient and Hessian of u at the interior node
/// (i, j) from the flattened field. Panics on boundary nodes, like
/// [`fd_derivs`].
pub fn reconstruct_jet(
    thin: &ThinDomainSpec,
    grid: &ReferenceGrid,
    field: &Field,
    i: usize,
    j: usize,
) -> Result<PhysicalJet, GridError> {
    let d = fd_derivs(grid, field, i, j);
    let cb = chain_rule_bundle(thin, grid.x(i), grid.s(j))?;
    Ok(jet_from_flat(&d, &cb))
}
