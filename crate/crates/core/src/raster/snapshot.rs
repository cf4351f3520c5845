use crate::scene::{coeff_count, packed_covariance, Gaussian3D};
use crate::{Error, Real, Result};

/// Flat, activated view of a Gaussian set frozen at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSnapshot<T> {
    pub positions: Vec<[T; 3]>,
    /// Packed symmetric `[xx, xy, xz, yy, yz, zz]`.
    pub covariances: Vec<[T; 6]>,
    /// Post-sigmoid opacities.
    pub opacities: Vec<T>,
    /// `len × (degree+1)²` RGB triples.
    pub sh: Vec<[T; 3]>,
    pub sh_degree: usize,
    pub payload: Option<Vec<T>>,
}

impl<T: Real> GaussianSnapshot<T> {
    pub fn empty(sh_degree: usize) -> Self {
        GaussianSnapshot {
            positions: Vec::new(),
            covariances: Vec::new(),
            opacities: Vec::new(),
            sh: Vec::new(),
            sh_degree,
            payload: None,
        }
    }

    pub fn from_gaussians(gaussians: &[Gaussian3D<T>], sh_degree: usize) -> Result<Self> {
        let mut s = Self::empty(sh_degree);
        s.reserve(gaussians.len());
        for g in gaussians {
            s.push(g)?;
        }
        Ok(s)
    }

    pub fn reserve(&mut self, n: usize) {
        self.positions.reserve(n);
        self.covariances.reserve(n);
        self.opacities.reserve(n);
        self.sh.reserve(n * coeff_count(self.sh_degree));
    }

    pub fn push(&mut self, g: &Gaussian3D<T>) -> Result<()> {
        if g.sh.len() != coeff_count(self.sh_degree) {
            return Err(Error::invalid(format!(
                "Gaussian has {} SH coefficients, snapshot degree {} needs {}",
                g.sh.len(),
                self.sh_degree,
                coeff_count(self.sh_degree)
            )));
        }
        self.positions.push(g.position);
        self.covariances.push(packed_covariance(g.rotation, g.log_scale));
        self.opacities.push(g.opacity());
        self.sh.extend_from_slice(&g.sh);
        Ok(())
    }

    /// Attaches one payload value per Gaussian.
    pub fn with_payload(mut self, payload: Vec<T>) -> Result<Self> {
        if payload.len() != self.len() {
            return Err(Error::invalid("payload length differs from Gaussian count"));
        }
        self.payload = Some(payload);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn sh_of(&self, i: usize) -> &[[T; 3]] {
        let n = coeff_count(self.sh_degree);
        &self.sh[i * n..(i + 1) * n]
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.covariances.len() != n
            || self.opacities.len() != n
            || self.sh.len() != n * coeff_count(self.sh_degree)
            || self.payload.as_ref().is_some_and(|p| p.len() != n)
        {
            return Err(Error::invalid("snapshot arrays have inconsistent lengths"));
        }
        if self.sh_degree > 3 {
            return Err(Error::invalid("snapshot SH degree above 3"));
        }
        Ok(())
    }
}
