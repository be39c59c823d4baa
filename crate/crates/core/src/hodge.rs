//! Matrix-valued cochains on a rectangular 2-complex and least-squares gauge
//! reduction of curvature 2-cochains.
//!
//! Orientation: horizontal edges point in `+t`, vertical edges in `+s`, and
//! face boundaries run counterclockwise, so for the face with lower-left
//! vertex `(i, j)`
//! `(δξ)(□) = ξ(h_{i,j}) + ξ(v_{i+1,j}) − ξ(h_{i,j+1}) − ξ(v_{i,j})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lstsq, Matrix, Vector};
use crate::operator::{holonomy, OperatorPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Boundary {
    /// Planar rectangle with a free boundary; every 2-cochain is exact.
    #[default]
    Free,
    /// Both directions identified (a torus); the harmonic 2-cochains are the
    /// constants.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complex2D {
    pub n_t: usize,
    pub n_s: usize,
    pub boundary: Boundary,
}

impl Complex2D {
    pub fn new(n_t: usize, n_s: usize, boundary: Boundary) -> Result<Self> {
        if n_t == 0 || n_s == 0 {
            return Err(Error::InvalidInput("grid needs at least one face in each direction".into()));
        }
        Ok(Self { n_t, n_s, boundary })
    }

    pub fn planar(n_t: usize, n_s: usize) -> Result<Self> {
        Self::new(n_t, n_s, Boundary::Free)
    }

    fn periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    fn h_rows(&self) -> usize {
        if self.periodic() { self.n_s } else { self.n_s + 1 }
    }

    fn v_cols(&self) -> usize {
        if self.periodic() { self.n_t } else { self.n_t + 1 }
    }

    pub fn n_horizontal(&self) -> usize {
        self.n_t * self.h_rows()
    }

    pub fn n_edges(&self) -> usize {
        self.n_horizontal() + self.v_cols() * self.n_s
    }

    pub fn n_faces(&self) -> usize {
        self.n_t * self.n_s
    }

    pub fn n_vertices(&self) -> usize {
        if self.periodic() {
            self.n_t * self.n_s
        } else {
            (self.n_t + 1) * (self.n_s + 1)
        }
    }

    /// Horizontal edge from `(i, j)` to `(i+1, j)`.
    pub fn h_edge(&self, i: usize, j: usize) -> usize {
        let j = if self.periodic() { j % self.n_s } else { j };
        j * self.n_t + i
    }

    /// Vertical edge from `(i, j)` to `(i, j+1)`.
    pub fn v_edge(&self, i: usize, j: usize) -> usize {
        let i = if self.periodic() { i % self.n_t } else { i };
        self.n_horizontal() + j * self.v_cols() + i
    }

    pub fn face(&self, i: usize, j: usize) -> usize {
        j * self.n_t + i
    }

    /// Signed boundary edges of face `(i, j)`, counterclockwise.
    pub fn face_boundary(&self, i: usize, j: usize) -> [(usize, f64); 4] {
        [
            (self.h_edge(i, j), 1.0),
            (self.v_edge(i + 1, j), 1.0),
            (self.h_edge(i, j + 1), -1.0),
            (self.v_edge(i, j), -1.0),
        ]
    }

    fn vertex(&self, i: usize, j: usize) -> usize {
        if self.periodic() {
            (j % self.n_s) * self.n_t + i % self.n_t
        } else {
            j * (self.n_t + 1) + i
        }
    }

    /// `(tail, head)` vertex indices of every edge.
    pub fn edge_endpoints(&self) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); self.n_edges()];
        for j in 0..self.h_rows() {
            for i in 0..self.n_t {
                out[self.h_edge(i, j)] = (self.vertex(i, j), self.vertex(i + 1, j));
            }
        }
        for j in 0..self.n_s {
            for i in 0..self.v_cols() {
                out[self.v_edge(i, j)] = (self.vertex(i, j), self.vertex(i, j + 1));
            }
        }
        out
    }

    /// Number of faces each edge bounds (1 or 2).
    pub fn edge_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n_edges()];
        for j in 0..self.n_s {
            for i in 0..self.n_t {
                for (e, _) in self.face_boundary(i, j) {
                    deg[e] += 1.0;
                }
            }
        }
        deg
    }

    /// Scalar coboundary matrix (faces × edges).
    pub fn coboundary_matrix(&self) -> Matrix {
        let mut d = Matrix::zeros(self.n_faces(), self.n_edges());
        for j in 0..self.n_s {
            for i in 0..self.n_t {
                for (e, s) in self.face_boundary(i, j) {
                    d[(self.face(i, j), e)] += s;
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cochain {
    pub degree: u8,
    pub values: Vec<Matrix>,
}

impl Cochain {
    pub fn new(degree: u8, values: Vec<Matrix>) -> Result<Self> {
        if degree != 1 && degree != 2 {
            return Err(Error::InvalidInput(format!("degree must be 1 or 2, got {degree}")));
        }
        if let Some(first) = values.first() {
            let shape = first.shape();
            if shape.0 != shape.1 || values.iter().any(|v| v.shape() != shape) {
                return Err(Error::InvalidInput("cochain values must share one square shape".into()));
            }
        }
        Ok(Self { degree, values })
    }

    pub fn zeros(degree: u8, cells: usize, d: usize) -> Self {
        Self {
            degree,
            values: vec![Matrix::zeros(d, d); cells],
        }
    }

    pub fn value_dim(&self) -> usize {
        self.values.first().map_or(0, |v| v.nrows())
    }

    /// `Σ ‖value‖_F²`.
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|v| v.norm_squared()).sum()
    }

    pub fn dot(&self, other: &Cochain) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.dot(b)).sum()
    }

    fn axpy(&mut self, alpha: f64, x: &Cochain) {
        for (a, b) in self.values.iter_mut().zip(&x.values) {
            *a += b * alpha;
        }
    }

    fn sub(&self, other: &Cochain) -> Cochain {
        Cochain {
            degree: self.degree,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    /// Entry `(p, q)` of every value as a vector over cells.
    pub fn component(&self, p: usize, q: usize) -> Vector {
        Vector::from_iterator(self.values.len(), self.values.iter().map(|v| v[(p, q)]))
    }
}

fn check(complex: &Complex2D, c: &Cochain, degree: u8) -> Result<()> {
    let cells = if degree == 1 { complex.n_edges() } else { complex.n_faces() };
    if c.degree != degree || c.values.len() != cells {
        return Err(Error::InvalidInput(format!(
            "expected a degree-{degree} cochain on {cells} cells, got degree {} with {} values",
            c.degree,
            c.values.len()
        )));
    }
    Ok(())
}

/// `δ: C¹ → C²`.
pub fn coboundary(complex: &Complex2D, xi: &Cochain) -> Result<Cochain> {
    check(complex, xi, 1)?;
    let d = xi.value_dim();
    let mut out = Cochain::zeros(2, complex.n_faces(), d);
    for j in 0..complex.n_s {
        for i in 0..complex.n_t {
            let f = complex.face(i, j);
            for (e, s) in complex.face_boundary(i, j) {
                out.values[f] += &xi.values[e] * s;
            }
        }
    }
    Ok(out)
}

/// Adjoint `δ*: C² → C¹` for the summed Frobenius pairing.
pub fn coboundary_adjoint(complex: &Complex2D, c: &Cochain) -> Result<Cochain> {
    check(complex, c, 2)?;
    let d = c.value_dim();
    let mut out = Cochain::zeros(1, complex.n_edges(), d);
    for j in 0..complex.n_s {
        for i in 0..complex.n_t {
            let f = complex.face(i, j);
            for (e, s) in complex.face_boundary(i, j) {
                out.values[e] += &c.values[f] * s;
            }
        }
    }
    Ok(out)
}

/// Vertex differences `ξ(e) = φ(head) − φ(tail)`.
pub fn vertex_coboundary(complex: &Complex2D, phi: &[Matrix]) -> Result<Cochain> {
    if phi.len() != complex.n_vertices() {
        return Err(Error::InvalidInput(format!("need {} vertex values", complex.n_vertices())));
    }
    let values = complex.edge_endpoints().iter().map(|&(a, b)| &phi[b] - &phi[a]).collect();
    Cochain::new(1, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeReduction {
    pub xi_star: Cochain,
    pub harmonic: Cochain,
    /// `‖c − δξ*‖²`.
    pub energy: f64,
    pub iterations: usize,
    /// Final `‖δ*(c − δξ)‖ / ‖δ*c‖`.
    pub relative_residual: f64,
    /// `‖δ* harmonic‖`.
    pub adjoint_norm: f64,
}

/// Minimizes `‖c − δξ‖²` by preconditioned CG on `δ*δ ξ = δ*c` from `ξ = 0`
/// (diagonal preconditioner: edge degrees). `ξ*` is determined up to the gauge
/// kernel `ker δ`; `δξ*` and the harmonic part are unique.
pub fn gauge_reduce(complex: &Complex2D, c: &Cochain, tol: f64, max_iter: usize) -> Result<GaugeReduction> {
    check(complex, c, 2)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tol must be positive, got {tol}")));
    }
    let d = c.value_dim();
    let deg = complex.edge_degrees();
    let precond = |r: &Cochain| Cochain {
        degree: 1,
        values: r.values.iter().zip(&deg).map(|(v, g)| v / *g).collect(),
    };
    let normal = |x: &Cochain| -> Result<Cochain> { coboundary_adjoint(complex, &coboundary(complex, x)?) };

    let b = coboundary_adjoint(complex, c)?;
    let b_norm = b.norm_squared().sqrt();
    let mut x = Cochain::zeros(1, complex.n_edges(), d);
    let mut iterations = 0;
    let mut rel = 0.0;
    if b_norm > 0.0 {
        let mut r = b.clone();
        let mut z = precond(&r);
        let mut p = z.clone();
        let mut rz = r.dot(&z);
        rel = 1.0;
        while rel > tol {
            if iterations == max_iter {
                return Err(Error::NotConverged {
                    iterations,
                    residual: rel,
                });
            }
            let ap = normal(&p)?;
            let alpha = rz / p.dot(&ap);
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            iterations += 1;
            rel = r.norm_squared().sqrt() / b_norm;
            z = precond(&r);
            let rz_next = r.dot(&z);
            let beta = rz_next / rz;
            rz = rz_next;
            let mut p_next = z.clone();
            p_next.axpy(beta, &p);
            p = p_next;
        }
    }
    let harmonic = c.sub(&coboundary(complex, &x)?);
    let adjoint_norm = coboundary_adjoint(complex, &harmonic)?.norm_squared().sqrt();
    Ok(GaugeReduction {
        energy: harmonic.norm_squared(),
        xi_star: x,
        harmonic,
        iterations,
        relative_residual: rel,
        adjoint_norm,
    })
}

/// Dense oracle: minimum-norm least squares per matrix entry through the SVD of
/// the scalar coboundary matrix. Returns `(ξ*, harmonic)`.
pub fn dense_reduce(complex: &Complex2D, c: &Cochain) -> Result<(Cochain, Cochain)> {
    check(complex, c, 2)?;
    let d = c.value_dim();
    let dm = complex.coboundary_matrix();
    let mut xi = Cochain::zeros(1, complex.n_edges(), d);
    for p in 0..d {
        for q in 0..d {
            let sol = lstsq(&dm, &c.component(p, q))?;
            for (e, v) in sol.iter().enumerate() {
                xi.values[e][(p, q)] = *v;
            }
        }
    }
    let harmonic = c.sub(&coboundary(complex, &xi)?);
    Ok((xi, harmonic))
}

/// Curvature cochain `c(□) = log Hol(□)` with one operator pair per face.
pub fn curvature_cochain(complex: &Complex2D, pairs: &[OperatorPair], h: f64) -> Result<Cochain> {
    if pairs.len() != complex.n_faces() {
        return Err(Error::InvalidInput(format!("need {} pairs, got {}", complex.n_faces(), pairs.len())));
    }
    let values = pairs
        .iter()
        .map(|p| holonomy(p, h).map(|r| r.log_hol))
        .collect::<Result<Vec<_>>>()?;
    Cochain::new(2, values)
}
