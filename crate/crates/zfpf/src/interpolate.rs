//! Good regions, truncation orders, and the top-level multiplicative
//! estimator.
//!
//! A region is "good" when it comes with a holomorphic map `h` from the
//! unit disc into the region, `h(0) = 0`, whose Taylor coefficients are
//! cheap, together with a preimage `z_x` of the query point. Assuming
//! `|log f| <= M` on the region, the truncated expansion of `log (f o h)`
//! to order `m` misses by at most `(M/delta)(1-delta)^(m+1)` at any point
//! with `|z| <= 1 - delta`, so `m = ceil((1/delta) ln(M/(delta eps)))`
//! suffices for an `eps` log error.

use std::time::Instant;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::family::{log_taylor, BoundedFamily};
use crate::graph::DependencyGraph;
use crate::series::TaylorSeries;

/// Cap on the strip-map polynomial degree; tighter strips need degrees
/// that explode exponentially and are refused instead of truncated.
pub const STRIP_DEGREE_CAP: usize = 1_000_000;

/// What a region was built from; metadata only.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionKind {
    Disc { radius: f64 },
    Strip { beta: Complex64, delta: f64 },
    Convex { x: Complex64, strip_delta: f64 },
    Custom,
}

/// A simply connected region presented through its disc map.
#[derive(Clone, Debug)]
pub struct GoodRegion {
    kind: RegionKind,
    /// Taylor coefficients of the map `h` at 0; `h(0) = 0`.
    map: TaylorSeries,
    /// Preimage of the query point: `h(z_x) = x`.
    z_x: Complex64,
    /// Cost parameter of the map's coefficients; metadata only.
    gamma: f64,
}

impl GoodRegion {
    /// The disc of the given radius, queried at `x`: `h(z) = radius * z`.
    pub fn disc(radius: f64, x: Complex64) -> Result<GoodRegion> {
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::Domain(format!(
                "disc radius must be positive and finite, got {radius}"
            )));
        }
        let z_x = x / radius;
        if z_x.norm() >= 1.0 {
            return Err(Error::OutOfRegime(format!(
                "query point {x} lies outside the open disc of radius {radius}"
            )));
        }
        Ok(GoodRegion {
            kind: RegionKind::Disc { radius },
            map: TaylorSeries::new(vec![Complex64::ZERO, Complex64::new(radius, 0.0)]),
            z_x,
            gamma: 1.0,
        })
    }

    /// A convex region known through a boundary-distance oracle, queried
    /// at `x`: maps the disc into the `delta`-strip of the segment
    /// `[0, x]` with `delta = dist([0, x], boundary) / 2`, which by
    /// convexity is `min(dist(0), dist(x)) / 2`.
    pub fn convex(x: Complex64, dist_to_boundary: impl Fn(Complex64) -> f64) -> Result<GoodRegion> {
        let d0 = dist_to_boundary(Complex64::ZERO);
        let dx = dist_to_boundary(x);
        let strip_delta = (d0.min(dx) / 2.0).min(0.999);
        if !strip_delta.is_finite() || strip_delta <= 0.0 {
            return Err(Error::Domain(
                "boundary distance must be positive at 0 and at the query point".into(),
            ));
        }
        let mut region = strip_map(x, strip_delta)?;
        region.kind = RegionKind::Convex { x, strip_delta };
        Ok(region)
    }

    /// A caller-supplied map: coefficients of `h` (constant term zero) and
    /// the preimage of the query point.
    pub fn custom(map: TaylorSeries, z_x: Complex64, gamma: f64) -> Result<GoodRegion> {
        if map.coeff(0) != Complex64::ZERO {
            return Err(Error::Domain("region map must satisfy h(0) = 0".into()));
        }
        if z_x.norm() >= 1.0 {
            return Err(Error::OutOfRegime(
                "preimage of the query point must lie in the open unit disc".into(),
            ));
        }
        Ok(GoodRegion {
            kind: RegionKind::Custom,
            map,
            z_x,
            gamma,
        })
    }

    pub fn kind(&self) -> &RegionKind {
        &self.kind
    }

    pub fn map(&self) -> &TaylorSeries {
        &self.map
    }

    pub fn z_x(&self) -> Complex64 {
        self.z_x
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Result of one estimator run.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    /// `exp(log_value)`.
    pub value: Complex64,
    pub log_value: Complex64,
    /// Truncation order used.
    pub order: usize,
    /// `(M/delta)(1-delta)^(order+1)`.
    pub truncation_bound: f64,
    pub elapsed_ms: f64,
}

/// Smallest truncation order of the form `ceil((1/delta) ln(M/(delta
/// eps)))`, clamped below at 1.
pub fn required_order(m_bound: f64, delta: f64, eps: f64) -> Result<usize> {
    if !m_bound.is_finite() || m_bound <= 0.0 {
        return Err(Error::Domain(format!(
            "zero-freeness bound M must be positive and finite, got {m_bound}"
        )));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    let raw = ((m_bound / (delta * eps)).ln() / delta).ceil();
    Ok(if raw < 1.0 { 1 } else { raw as usize })
}

/// The tail bound `(M/delta)(1-delta)^(m+1)` of the truncated expansion.
pub fn truncation_error_bound(m_bound: f64, delta: f64, m: usize) -> f64 {
    m_bound / delta * (1.0 - delta).powi(m as i32 + 1)
}

/// Polynomial map of the unit disc into the `delta`-strip of the segment
/// `[0, beta]`, hitting 0 at 0 and `beta` at `z = 1/rho'`.
///
/// With `delta' = delta / (4 |beta|)`, the polynomial is
/// `p(z) = beta * q(rho' * z)` where
/// `q(w) = (sum_{k=1}^{N} (C w)^k / k) / (sum_{k=1}^{N} C^k / k)`,
/// `C = 1 - exp(-1/delta')`, `N = floor((1 + 1/delta') e^{1 + 1/delta'})`
/// and `rho' = (1 - e^{-1 - 1/delta'}) / (1 - e^{-1/delta'})`.
pub fn strip_map(beta: Complex64, delta: f64) -> Result<GoodRegion> {
    if beta == Complex64::ZERO {
        return Err(Error::Domain("strip endpoint beta must be nonzero".into()));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let delta_prime = delta / (4.0 * beta.norm());
    let inv = 1.0 / delta_prime;
    let n_f = ((1.0 + inv) * (1.0 + inv).exp()).floor();
    if !n_f.is_finite() || n_f > STRIP_DEGREE_CAP as f64 {
        return Err(Error::Capability(format!(
            "strip map needs a polynomial of degree {n_f:e}, beyond the cap {STRIP_DEGREE_CAP}; \
             use a larger delta relative to |beta|"
        )));
    }
    let degree = (n_f as usize).max(1);
    let c = 1.0 - (-inv).exp();
    let rho = (1.0 - (-1.0 - inv).exp()) / (1.0 - (-inv).exp());

    // Normalization sum_{k<=N} C^k / k and coefficients of beta * q(rho z):
    // coefficient k is beta * (C rho)^k / (k * norm).
    let mut norm = 0.0f64;
    let mut cpow = 1.0f64;
    for k in 1..=degree {
        cpow *= c;
        norm += cpow / k as f64;
    }
    let mut coeffs = vec![Complex64::ZERO; degree + 1];
    let scaled = c * rho;
    let mut spow = 1.0f64;
    for (k, coeff) in coeffs.iter_mut().enumerate().skip(1) {
        spow *= scaled;
        *coeff = beta * (spow / (k as f64 * norm));
    }
    Ok(GoodRegion {
        kind: RegionKind::Strip { beta, delta },
        map: TaylorSeries::new(coeffs),
        z_x: Complex64::new(1.0 / rho, 0.0),
        gamma: 1.0,
    })
}

/// The family of `f o h` for a region map `h`: coefficients
/// `lambda^h(S, k) = sum_{l<=k} [z^k](h^l) * lambda(S, l)`, with the same
/// support constant.
pub struct ComposedFamily<'a, F: BoundedFamily + ?Sized> {
    inner: &'a F,
    /// `h_powers[l - 1]` holds the coefficients of `h(z)^l` to order `m`.
    h_powers: Vec<TaylorSeries>,
    order: usize,
}

pub fn compose_family<'a, F: BoundedFamily + ?Sized>(
    family: &'a F,
    region: &GoodRegion,
    m: usize,
) -> Result<ComposedFamily<'a, F>> {
    if m == 0 {
        return Err(Error::Domain("composition order must be >= 1".into()));
    }
    let h = region.map().resized(m);
    if h.coeff(0) != Complex64::ZERO {
        return Err(Error::Domain("region map must satisfy h(0) = 0".into()));
    }
    let mut h_powers = Vec::with_capacity(m);
    h_powers.push(h.clone());
    for _ in 2..=m {
        let prev = h_powers.last().unwrap();
        h_powers.push(prev.multiply(&h, m));
    }
    Ok(ComposedFamily {
        inner: family,
        h_powers,
        order: m,
    })
}

impl<F: BoundedFamily + ?Sized> BoundedFamily for ComposedFamily<'_, F> {
    fn alpha(&self) -> usize {
        self.inner.alpha()
    }

    fn f0(&self, n_vertices: usize) -> f64 {
        self.inner.f0(n_vertices)
    }

    fn lambda_batch(&self, subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
        if ell_max > self.order {
            return Err(Error::Domain(format!(
                "composed family prepared to order {}, asked for {ell_max}",
                self.order
            )));
        }
        let inner = self.inner.lambda_batch(subset, ell_max)?;
        let mut out = vec![Complex64::ZERO; ell_max];
        for (i, &lam) in inner.iter().enumerate() {
            if lam == Complex64::ZERO {
                continue;
            }
            let hp = &self.h_powers[i]; // coefficients of h^(i+1)
                                        // h^(i+1) has no terms below z^(i+1)
            for (k, slot) in out.iter_mut().enumerate().skip(i) {
                let c = hp.coeff(k + 1);
                if c != Complex64::ZERO {
                    *slot += c * lam;
                }
            }
        }
        Ok(out)
    }
}

/// Multiplicative estimation of `f_G(x)`.
///
/// Splits `eps` evenly between the truncation budget and floating-point
/// slack, computes `log (f o h)` to the required order and evaluates it at
/// the preimage of `x` by Horner. Zero-freeness (`|log f| <= M` on the
/// region) is assumed, not checked; if it is violated the result is wrong
/// or non-finite.
pub fn estimate<F: BoundedFamily + ?Sized>(
    family: &F,
    g: &DependencyGraph,
    region: &GoodRegion,
    x: Complex64,
    eps: f64,
    m_bound: f64,
    delta: f64,
) -> Result<EstimateReport> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::Domain(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(0.0 < delta && delta < 1.0) {
        return Err(Error::Domain(format!(
            "delta must lie in (0,1), got {delta}"
        )));
    }
    let started = Instant::now();
    let z_x = region.z_x();
    if z_x.norm() > (1.0 - delta) * (1.0 + 1e-12) {
        return Err(Error::OutOfRegime(format!(
            "preimage |z_x| = {} outside the allowed disc of radius 1 - delta = {}",
            z_x.norm(),
            1.0 - delta
        )));
    }
    let mapped = region.map().evaluate(z_x);
    if (mapped - x).norm() > 1e-8 * x.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "region map sends z_x to {mapped}, not to the query point {x}"
        )));
    }
    let m = required_order(m_bound, delta, eps / 2.0)?;
    let composed = compose_family(family, region, m)?;
    let series = log_taylor(&composed, g, m)?;
    let log_value = series.evaluate(z_x);
    let value = log_value.exp();
    if !value.is_finite() || !log_value.is_finite() {
        return Err(Error::Numeric(
            "estimate overflowed; the zero-freeness bound M was likely violated".into(),
        ));
    }
    // Under the assumption, |log f(x)| <= M and the estimate sits within
    // eps of it, so a log estimate far above M proves the bound false.
    if log_value.norm() > m_bound + 2.0 {
        return Err(Error::Numeric(format!(
            "estimated |log f| = {:.3e} exceeds the declared zero-freeness bound M = {m_bound}; \
             the assumption is violated",
            log_value.norm()
        )));
    }
    Ok(EstimateReport {
        value,
        log_value,
        order: m,
        truncation_bound: truncation_error_bound(m_bound, delta, m),
        elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::SyntheticFamily;
    use crate::graph::DependencyGraph;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn required_order_examples() {
        assert_eq!(required_order(4.0, 0.5, 0.01).unwrap(), 14);
        assert_eq!(required_order(0.005, 0.5, 0.01).unwrap(), 1); // clamped
        assert_eq!(required_order(4.0, 0.1, 0.001).unwrap(), 106);
    }

    #[test]
    fn required_order_monotonicity() {
        let base = required_order(5.0, 0.2, 1e-3).unwrap();
        assert!(required_order(5.0, 0.2, 1e-4).unwrap() >= base);
        assert!(required_order(5.0, 0.3, 1e-3).unwrap() <= base);
        assert!(required_order(10.0, 0.2, 1e-3).unwrap() >= base);
    }

    #[test]
    fn truncation_bound_examples() {
        assert!((truncation_error_bound(1.0, 0.5, 0) - 1.0).abs() < 1e-15);
        let b = truncation_error_bound(1.0, 0.9, 10);
        assert!((b - (1.0 / 0.9) * 0.1f64.powi(11)).abs() < 1e-24);
        let mut prev = f64::INFINITY;
        for m in 0..40 {
            let b = truncation_error_bound(3.0, 0.25, m);
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn strip_map_constants_at_quarter_delta_prime() {
        // beta = 0.5, delta = 0.5 gives delta' = 0.25.
        let region = strip_map(c(0.5, 0.0), 0.5).unwrap();
        assert!(matches!(region.kind(), RegionKind::Strip { .. }));
        let c_const = 1.0 - (-4.0f64).exp();
        assert!((c_const - 0.9816844).abs() < 1e-7);
        let rho = (1.0 - (-5.0f64).exp()) / (1.0 - (-4.0f64).exp());
        assert!((rho - 1.0117937).abs() < 1e-7);
        assert!((region.z_x().re - 1.0 / rho).abs() < 1e-12);
    }

    #[test]
    fn strip_map_endpoints() {
        for (beta, delta) in [
            (c(0.7, 0.2), 0.6),
            (c(-0.4, 0.9), 0.9),
            (c(1.5, 0.0), 0.9),
            (c(0.0, -0.8), 0.5),
        ] {
            let region = strip_map(beta, delta).unwrap();
            assert_eq!(region.map().coeff(0), Complex64::ZERO);
            let at_zx = region.map().evaluate(region.z_x());
            assert!(
                (at_zx - beta).norm() <= 1e-10,
                "beta={beta} delta={delta}: {at_zx}"
            );
        }
    }

    #[test]
    fn strip_map_refuses_exploding_degree() {
        let err = strip_map(c(100.0, 0.0), 0.05).unwrap_err();
        assert!(matches!(err, Error::Capability(_)));
    }

    #[test]
    fn compose_disc_scales_lambda() {
        let g = DependencyGraph::edgeless(3);
        let family = SyntheticFamily::new(&g, 1, 5);
        let region = GoodRegion::disc(0.25, c(0.1, 0.0)).unwrap();
        let composed = compose_family(&family, &region, 5).unwrap();
        let inner = family.lambda_batch(&[1], 5).unwrap();
        let outer = composed.lambda_batch(&[1], 5).unwrap();
        for k in 1..=5usize {
            let expect = inner[k - 1] * 0.25f64.powi(k as i32);
            assert!((outer[k - 1] - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn compose_identity_map_is_identity() {
        let g = DependencyGraph::edgeless(2);
        let family = SyntheticFamily::new(&g, 1, 8);
        let region =
            GoodRegion::custom(TaylorSeries::from_real(&[0.0, 1.0]), c(0.3, 0.0), 1.0).unwrap();
        let composed = compose_family(&family, &region, 4).unwrap();
        assert_eq!(
            composed.lambda_batch(&[0], 4).unwrap(),
            family.lambda_batch(&[0], 4).unwrap()
        );
    }

    #[test]
    fn compose_quadratic_map_example() {
        // h(z) = z + z^2, single vertex with lambda(*, 1) = 1, rest 0:
        // composed lambda_k = [z^k] h(z): 1, 1, 0, 0, ...
        struct OneShot;
        impl BoundedFamily for OneShot {
            fn alpha(&self) -> usize {
                1
            }
            fn f0(&self, _: usize) -> f64 {
                1.0
            }
            fn lambda_batch(&self, _subset: &[u32], ell_max: usize) -> Result<Vec<Complex64>> {
                let mut v = vec![Complex64::ZERO; ell_max];
                v[0] = Complex64::ONE;
                Ok(v)
            }
        }
        let region =
            GoodRegion::custom(TaylorSeries::from_real(&[0.0, 1.0, 1.0]), c(0.2, 0.0), 1.0)
                .unwrap();
        let composed = compose_family(&OneShot, &region, 4).unwrap();
        let out = composed.lambda_batch(&[0], 4).unwrap();
        assert_eq!(out[0], Complex64::ONE);
        assert_eq!(out[1], Complex64::ONE);
        assert_eq!(out[2], Complex64::ZERO);
        assert_eq!(out[3], Complex64::ZERO);
    }

    #[test]
    fn estimate_at_origin_is_exact() {
        let g = DependencyGraph::edgeless(4);
        let family = SyntheticFamily::new(&g, 1, 77);
        let region = GoodRegion::disc(1.0, Complex64::ZERO).unwrap();
        let rep = estimate(&family, &g, &region, Complex64::ZERO, 1e-3, 4.0, 0.2).unwrap();
        assert_eq!(rep.value, c(1.0, 0.0)); // f0 = 1 exactly
    }

    #[test]
    fn convex_region_maps_through_the_segment_strip() {
        // A disc of radius 2 about the origin presented as a convex region
        // through its boundary-distance oracle.
        let x = c(0.8, 0.5);
        let region = GoodRegion::convex(x, |z| 2.0 - z.norm()).unwrap();
        let RegionKind::Convex { strip_delta, .. } = region.kind() else {
            panic!("convex constructor must tag the region");
        };
        // dist([0, x], boundary)/2 = (2 - |x|)/2
        assert!((strip_delta - (2.0 - x.norm()) / 2.0).abs() < 1e-12);
        assert_eq!(region.map().coeff(0), Complex64::ZERO);
        let at_zx = region.map().evaluate(region.z_x());
        assert!((at_zx - x).norm() <= 1e-10);
    }

    #[test]
    fn estimate_through_convex_region() {
        // Z = 1 + 0.3 z for one variable with a unary clause: zero at
        // -10/3, so Z is zero-free on the disc of radius 2 with
        // |log Z| <= |log(1 - 0.6)| < 1. Query deep inside so the
        // segment-strip preimage stays away from the disc edge.
        let formula = crate::csp::CspFormula::new(
            1,
            1,
            1,
            vec![crate::csp::CspClause {
                vars: vec![0],
                table: vec![Complex64::ONE, c(0.3, 0.0)],
            }],
        )
        .unwrap();
        let x = c(0.3, 0.0);
        let region = GoodRegion::convex(x, |z| 2.0 - z.norm()).unwrap();
        assert!(region.z_x().norm() < 0.85);
        let family = crate::csp::CspFamily::new(&formula);
        let graph = formula.dependency_graph();
        let rep = estimate(&family, &graph, &region, x, 1e-3, 1.0, 0.15).unwrap();
        let exact = 1.09;
        assert!(
            (rep.value.re / exact - 1.0).abs() <= 1e-3,
            "{} vs {exact}",
            rep.value
        );
    }

    #[test]
    fn estimate_rejects_query_outside_delta_disc() {
        let g = DependencyGraph::edgeless(2);
        let family = SyntheticFamily::new(&g, 1, 4);
        let region = GoodRegion::disc(1.0, c(0.95, 0.0)).unwrap();
        let err = estimate(&family, &g, &region, c(0.95, 0.0), 1e-3, 2.0, 0.2).unwrap_err();
        assert!(matches!(err, Error::OutOfRegime(_)));
    }
}
