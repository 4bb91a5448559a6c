use crate::features::{FeatureMatrix, Real};
use crate::mesh::Vec3;
use crate::{par, Error, Result};

pub const DEFAULT_SIGMA: f64 = 0.25;

/// Isotropic Gaussian mixture on the unit sphere of facet normals.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGmm {
    means: Vec<Vec3>,
    sigmas: Vec<f64>,
    pub train_means: bool,
    pub train_sigmas: bool,
}

impl SphereGmm {
    pub fn new(means: Vec<Vec3>, sigmas: Vec<f64>) -> Result<Self> {
        if means.is_empty() || means.len() != sigmas.len() {
            return Err(Error::Config(format!(
                "{} means and {} sigmas; need the same positive count",
                means.len(),
                sigmas.len()
            )));
        }
        if let Some(t) = means
            .iter()
            .position(|m| ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt() - 1.0).abs() > 1e-9)
        {
            return Err(Error::Config(format!("mean {t} is not a unit vector")));
        }
        if let Some(t) = sigmas.iter().position(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Config(format!("sigma {t} = {} is not positive", sigmas[t])));
        }
        Ok(Self {
            means,
            sigmas,
            train_means: false,
            train_sigmas: true,
        })
    }

    /// [`default_sphere_means`] with every sigma at [`DEFAULT_SIGMA`];
    /// sigmas trainable, means fixed.
    pub fn with_components(components: usize) -> Result<Self> {
        let means = default_sphere_means(components)?;
        Self::new(means, vec![DEFAULT_SIGMA; components])
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn means(&self) -> &[Vec3] {
        &self.means
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// Sets raw parameters without re-validation (used by finite
    /// differences and optimizers, which renormalize means themselves).
    pub fn set_means_unchecked(&mut self, means: Vec<Vec3>) {
        assert_eq!(means.len(), self.means.len());
        self.means = means;
    }

    pub fn set_sigmas_unchecked(&mut self, sigmas: Vec<f64>) {
        assert_eq!(sigmas.len(), self.sigmas.len());
        self.sigmas = sigmas;
    }
}

/// Mixture centres spread over the unit sphere.
///
/// `T = 6` gives `+x, −x, +y, −y, +z, −z`. `T = 18` appends the normalized
/// edge midpoints `(±1,±1,0)`, `(±1,0,±1)`, `(0,±1,±1)`, signs ordered
/// `(+,+), (+,−), (−,+), (−,−)`. Any other count uses a Fibonacci lattice.
pub fn default_sphere_means(components: usize) -> Result<Vec<Vec3>> {
    if components == 0 {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    let axes: Vec<Vec3> = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    match components {
        6 => Ok(axes),
        18 => {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let signs = [(h, h), (h, -h), (-h, h), (-h, -h)];
            let mut means = axes;
            means.extend(signs.iter().map(|&(a, b)| [a, b, 0.0]));
            means.extend(signs.iter().map(|&(a, b)| [a, 0.0, b]));
            means.extend(signs.iter().map(|&(a, b)| [0.0, a, b]));
            Ok(means)
        }
        t => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..t)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / t as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    let p = [r * phi.cos(), r * phi.sin(), z];
                    let l = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                    [p[0] / l, p[1] / l, p[2] / l]
                })
                .collect())
        }
    }
}

#[inline]
fn is_zero(n: &Vec3) -> bool {
    n[0] == 0.0 && n[1] == 0.0 && n[2] == 0.0
}

fn squared_distances(n: &Vec3, gmm: &SphereGmm, z: &mut [f64]) {
    for (t, zt) in z.iter_mut().enumerate() {
        let mu = gmm.means[t];
        let d = [n[0] - mu[0], n[1] - mu[1], n[2] - mu[2]];
        *zt = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (gmm.sigmas[t] * gmm.sigmas[t]);
    }
}

/// Fuzzy coefficients `π_it = softmax_t(−‖n_i − μ_t‖² / σ_t²)`; facets with
/// a zero normal get `1/T`.
pub fn gmm_coefficients<T: Real>(normals: &[Vec3], gmm: &SphereGmm) -> FeatureMatrix<T> {
    let tc = gmm.components();
    let mut pi = FeatureMatrix::zeros(normals.len(), tc);
    pi.fill_rows(|i, row| {
        let n = &normals[i];
        if is_zero(n) {
            row.iter_mut().for_each(|p| *p = T::of(1.0 / tc as f64));
            return;
        }
        let mut z = vec![0.0; tc];
        squared_distances(n, gmm, &mut z);
        let zmin = z.iter().copied().fold(f64::INFINITY, f64::min);
        let mut total = 0.0;
        for zt in z.iter_mut() {
            *zt = (zmin - *zt).exp();
            total += *zt;
        }
        for (p, e) in row.iter_mut().zip(&z) {
            *p = T::of(e / total);
        }
    });
    pi
}

/// Sigma and mean gradients; each present only when that parameter trains.
pub type MixtureGrads = (Option<Vec<f64>>, Option<Vec<Vec3>>);

/// Gradients of the loss with respect to the mixture sigmas and means,
/// given `dL/dπ`. Each is `None` unless the matching trainable flag is set.
/// Mean gradients are ambient (not projected onto the sphere).
pub fn gmm_backward<T: Real>(
    normals: &[Vec3],
    gmm: &SphereGmm,
    pi: &FeatureMatrix<T>,
    grad_pi: &FeatureMatrix<T>,
) -> Result<MixtureGrads> {
    let tc = gmm.components();
    pi.ensure_shape(normals.len(), tc, "fuzzy coefficients")?;
    grad_pi.ensure_shape(normals.len(), tc, "coefficient gradient")?;
    if !gmm.train_means && !gmm.train_sigmas {
        return Ok((None, None));
    }
    // per chunk: [dσ_0..dσ_T, dμ_0x, dμ_0y, dμ_0z, ...]
    let partials = par::chunk_partials(normals.len(), |range| {
        let mut acc = vec![0.0; 4 * tc];
        let mut z = vec![0.0; tc];
        for i in range {
            let n = &normals[i];
            if is_zero(n) {
                continue;
            }
            squared_distances(n, gmm, &mut z);
            let (p, g) = (pi.row(i), grad_pi.row(i));
            let inner: f64 = p.iter().zip(g).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
            for t in 0..tc {
                // gradient w.r.t. the softmax logit −z_it
                let ds = p[t].as_f64() * (g[t].as_f64() - inner);
                let s = gmm.sigmas[t];
                acc[t] += ds * 2.0 * z[t] / s;
                let mu = gmm.means[t];
                for a in 0..3 {
                    acc[tc + 3 * t + a] += ds * 2.0 * (n[a] - mu[a]) / (s * s);
                }
            }
        }
        acc
    });
    let mut total = vec![0.0; 4 * tc];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let sigmas = gmm.train_sigmas.then(|| total[..tc].to_vec());
    let means = gmm
        .train_means
        .then(|| (0..tc).map(|t| [total[tc + 3 * t], total[tc + 3 * t + 1], total[tc + 3 * t + 2]]).collect());
    Ok((sigmas, means))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_means() {
        assert_eq!(default_sphere_means(6).unwrap()[1], [-1.0, 0.0, 0.0]);
        let m = default_sphere_means(18).unwrap();
        assert_eq!(m.len(), 18);
        let mut min_angle = f64::INFINITY;
        for a in 0..18 {
            for b in a + 1..18 {
                let d: f64 = (0..3).map(|k| m[a][k] * m[b][k]).sum();
                min_angle = min_angle.min(d.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!((min_angle - 45.0).abs() < 1e-9);
        for t in [1, 5, 18, 40] {
            for v in default_sphere_means(t).unwrap() {
                assert!(((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt() - 1.0).abs() < 1e-12);
            }
        }
        assert!(default_sphere_means(0).is_err());
    }

    #[test]
    fn single_component_is_one() {
        let g = SphereGmm::with_components(1).unwrap();
        let pi: FeatureMatrix<f64> = gmm_coefficients(&[[0.0, 0.6, 0.8], [0.0; 3]], &g);
        assert_eq!(pi.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn closed_form_softmax() {
        let g = SphereGmm::with_components(6).unwrap();
        let pi: FeatureMatrix<f64> = gmm_coefficients(&[[0.0, 0.0, 1.0], [0.0; 3]], &g);
        // +z sits at squared distance 2 from the four equatorial axes and 4 from −z
        let (za, zb) = (2.0 / 0.0625, 4.0 / 0.0625);
        let expected = 1.0 / (1.0 + 4.0 * f64::exp(-za) + f64::exp(-zb));
        assert!((pi.get(0, 4) - expected).abs() < 1e-15);
        assert!(pi.row(1).iter().all(|&p| p == 1.0 / 6.0));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(SphereGmm::new(vec![[1.0, 1.0, 0.0]], vec![0.2]).is_err());
        assert!(SphereGmm::new(vec![[1.0, 0.0, 0.0]], vec![0.0]).is_err());
        assert!(SphereGmm::new(vec![], vec![]).is_err());
    }
}
