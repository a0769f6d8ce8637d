//! Discrete and continuous sheaf diffusion on a normalised Laplacian, and
//! the kernel projection the diffusion converges to.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sheaf::{kernel_threshold, SheafLaplacian};

pub const DEFAULT_DENSE_CAP: usize = 5000;

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `x <- (I - alpha Delta) x`, repeated `n_layers` times.
    Discrete { n_layers: usize },
    /// `x_t = exp(-t alpha Delta) x_0`.
    Continuous { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub alpha: f64,
    pub scheme: Scheme,
    /// Largest dimension for which dense spectral work is allowed.
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
}

impl DiffusionConfig {
    pub fn discrete(alpha: f64, n_layers: usize) -> Result<Self> {
        let cfg = Self {
            alpha,
            scheme: Scheme::Discrete { n_layers },
            dense_cap: DEFAULT_DENSE_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn continuous(alpha: f64, t: f64) -> Result<Self> {
        let cfg = Self {
            alpha,
            scheme: Scheme::Continuous { t },
            dense_cap: DEFAULT_DENSE_CAP,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Parameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        match self.scheme {
            Scheme::Discrete { n_layers: 0 } => {
                Err(Error::Parameter("n_layers must be at least 1".into()))
            }
            Scheme::Continuous { t } if !(t > 0.0 && t.is_finite()) => {
                Err(Error::Parameter(format!("t must be positive, got {t}")))
            }
            _ => Ok(()),
        }
    }
}

fn require_normalized(l: &SheafLaplacian) -> Result<()> {
    if l.is_normalized() {
        Ok(())
    } else {
        Err(Error::Parameter("diffusion expects a normalized Laplacian".into()))
    }
}

fn check_dim(l: &SheafLaplacian, x: &DVector<f64>) -> Result<()> {
    if x.len() == l.dim() {
        Ok(())
    } else {
        Err(Error::Shape(format!(
            "signal has {} entries, Laplacian acts on {}",
            x.len(),
            l.dim()
        )))
    }
}

/// Dense eigendecomposition of a Laplacian.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn of(l: &SheafLaplacian, cap: usize) -> Result<Self> {
        if l.dim() > cap {
            return Err(Error::Size { dim: l.dim(), cap });
        }
        let eig = SymmetricEigen::new(l.to_dense());
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    /// `V f(Lambda) V^T x`.
    fn apply_fn(&self, x: &DVector<f64>, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let mut coeffs = self.eigenvectors.tr_mul(x);
        for (c, &l) in coeffs.iter_mut().zip(self.eigenvalues.iter()) {
            *c *= f(l);
        }
        &self.eigenvectors * coeffs
    }

    fn matrix_fn(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.eigenvectors.nrows(), self.eigenvectors.ncols(), |i, j| {
            self.eigenvectors[(i, j)] * f(self.eigenvalues[j])
        });
        scaled * self.eigenvectors.transpose()
    }

    fn kernel_indicator(&self) -> impl Fn(f64) -> f64 {
        let tol = kernel_threshold(&self.eigenvalues);
        move |l: f64| if l.abs() <= tol { 1.0 } else { 0.0 }
    }
}

/// Reusable diffusion operator for one Laplacian and configuration.
///
/// The continuous scheme decomposes the Laplacian once; the discrete scheme
/// works matrix-free.
pub struct Diffuser<'a> {
    laplacian: &'a SheafLaplacian,
    cfg: DiffusionConfig,
    spectrum: Option<Spectrum>,
}

impl<'a> Diffuser<'a> {
    pub fn new(laplacian: &'a SheafLaplacian, cfg: DiffusionConfig) -> Result<Self> {
        cfg.validate()?;
        require_normalized(laplacian)?;
        let spectrum = match cfg.scheme {
            Scheme::Continuous { .. } => Some(Spectrum::of(laplacian, cfg.dense_cap)?),
            Scheme::Discrete { .. } => None,
        };
        Ok(Self {
            laplacian,
            cfg,
            spectrum,
        })
    }

    pub fn dim(&self) -> usize {
        self.laplacian.dim()
    }

    pub fn apply(&self, x0: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.laplacian, x0)?;
        let alpha = self.cfg.alpha;
        match (self.cfg.scheme, &self.spectrum) {
            (Scheme::Discrete { n_layers }, _) => {
                let mut x = x0.clone();
                for layer in 1..=n_layers {
                    let lx = self.laplacian.apply(&x)?;
                    x.axpy(-alpha, &lx, 1.0);
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(Error::Divergence { layer });
                    }
                }
                Ok(x)
            }
            (Scheme::Continuous { t }, Some(spec)) => {
                let x = spec.apply_fn(x0, |l| (-t * alpha * l).exp());
                if x.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { layer: 0 });
                }
                Ok(x)
            }
            (Scheme::Continuous { .. }, None) => unreachable!("spectrum computed in new"),
        }
    }
}

/// Diffuses `x0` on the normalised Laplacian `l`.
pub fn diffuse(l: &SheafLaplacian, x0: &DVector<f64>, cfg: &DiffusionConfig) -> Result<DVector<f64>> {
    Diffuser::new(l, *cfg)?.apply(x0)
}

/// Every intermediate state of `n_layers` discrete steps, starting with `x0`.
pub fn discrete_trajectory(
    l: &SheafLaplacian,
    x0: &DVector<f64>,
    alpha: f64,
    n_layers: usize,
) -> Result<Vec<DVector<f64>>> {
    let step = DiffusionConfig::discrete(alpha, 1)?;
    let diffuser = Diffuser::new(l, step)?;
    let mut states = vec![x0.clone()];
    for layer in 1..=n_layers {
        let next = diffuser
            .apply(states.last().expect("non-empty"))
            .map_err(|e| match e {
                Error::Divergence { .. } => Error::Divergence { layer },
                other => other,
            })?;
        states.push(next);
    }
    Ok(states)
}

/// Orthogonal projection of `x0` onto the numerical kernel of `l`
/// (eigenvalues at most `KERNEL_RTOL * lambda_max`).
pub fn kernel_projection(l: &SheafLaplacian, x0: &DVector<f64>) -> Result<DVector<f64>> {
    kernel_projection_with_cap(l, x0, DEFAULT_DENSE_CAP)
}

pub fn kernel_projection_with_cap(
    l: &SheafLaplacian,
    x0: &DVector<f64>,
    cap: usize,
) -> Result<DVector<f64>> {
    require_normalized(l)?;
    check_dim(l, x0)?;
    let spec = Spectrum::of(l, cap)?;
    Ok(spec.apply_fn(x0, spec.kernel_indicator()))
}

/// Dense diffusion matrix: `(I - alpha Delta)^n` or `exp(-t alpha Delta)`.
pub fn diffusion_matrix(l: &SheafLaplacian, cfg: &DiffusionConfig) -> Result<DMatrix<f64>> {
    cfg.validate()?;
    require_normalized(l)?;
    let dim = l.dim();
    if dim > cfg.dense_cap {
        return Err(Error::Size {
            dim,
            cap: cfg.dense_cap,
        });
    }
    match cfg.scheme {
        Scheme::Discrete { n_layers } => {
            let mut d = DMatrix::identity(dim, dim);
            for layer in 1..=n_layers {
                let ld = l.matrix().mul_dense(&d)?;
                d -= ld * cfg.alpha;
                if d.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Divergence { layer });
                }
            }
            Ok(d)
        }
        Scheme::Continuous { t } => {
            let spec = Spectrum::of(l, cfg.dense_cap)?;
            Ok(spec.matrix_fn(|lam| (-t * cfg.alpha * lam).exp()))
        }
    }
}

/// Dense orthogonal projector onto the numerical kernel.
pub fn kernel_projector(l: &SheafLaplacian, cap: usize) -> Result<DMatrix<f64>> {
    require_normalized(l)?;
    let spec = Spectrum::of(l, cap)?;
    Ok(spec.matrix_fn(spec.kernel_indicator()))
}
