//! TOML run configuration.
//!
//! ```toml
//! [torus]
//! dim = 1
//! generators = [[[1.0, 0.0]], [[0.0, 1.0]]]
//! hermitian = [[[1.0, 0.0]]]
//!
//! [[catalog]]            # z on the unit disc
//! radius = 1.0
//! coeffs = [[[0.0, 0.0], [1.0, 0.0]]]
//!
//! [pipeline]
//! stages = 4
//! forms = 32
//! seed = 1
//!
//! [output]
//! dir = "out"
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::disc::LiftedDisc;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::pipeline::PipelineConfig;
use crate::quadrature::QuadratureGrid;
use crate::torus::{LatticeTorus, TorusSpec};

/// A catalog disc: monomial coefficients of each coordinate on `D(0, radius)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSpec {
    pub radius: f64,
    pub coeffs: Vec<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub stages: usize,
    pub forms: usize,
    pub seed: u64,
    pub degree_cap: usize,
    pub fit_degree_cap: usize,
    pub mu_degree_cap: usize,
    pub gap: f64,
    pub k_max: usize,
    pub neck_w0: f64,
    pub neck_floor: f64,
    pub delta0: f64,
    pub delta_floor: f64,
    pub boundary_nodes: usize,
    pub probes: usize,
    pub max_halvings: usize,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::default();
        PipelineSection {
            stages: p.stages,
            forms: p.forms,
            seed: p.seed,
            degree_cap: p.degree_cap,
            fit_degree_cap: p.fit_degree_cap,
            mu_degree_cap: p.mu_degree_cap,
            gap: p.gap,
            k_max: p.k_max,
            neck_w0: p.neck_w0,
            neck_floor: p.neck_floor,
            delta0: p.delta0,
            delta_floor: p.delta_floor,
            boundary_nodes: p.boundary_nodes,
            probes: p.probes,
            max_halvings: p.max_halvings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSection {
    pub n_radial: usize,
    pub n_angular: usize,
    pub max_radial: usize,
    pub max_angular: usize,
    pub rel_tol: f64,
    pub fail_tol: f64,
}

impl Default for QuadratureSection {
    fn default() -> Self {
        let q = QuadratureGrid::default();
        QuadratureSection {
            n_radial: q.n_radial,
            n_angular: q.n_angular,
            max_radial: q.max_radial,
            max_angular: q.max_angular,
            rel_tol: q.rel_tol,
            fail_tol: q.fail_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
    /// Data-parallel numerics (ignored when built without the `parallel` feature).
    pub parallel: bool,
    pub svg: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".into(), parallel: true, svg: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub torus: TorusSpec,
    pub catalog: Vec<DiscSpec>,
    pub pipeline: PipelineSection,
    pub quadrature: QuadratureSection,
    pub output: OutputSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mono = |k: usize, a: f64| {
            let mut c = vec![[0.0, 0.0]; k + 1];
            c[k] = [a, 0.0];
            DiscSpec { radius: 1.0, coeffs: vec![c] }
        };
        RunConfig {
            torus: TorusSpec::default(),
            catalog: vec![mono(1, 1.0), mono(2, 1.0), mono(1, 3.0)],
            pipeline: PipelineSection::default(),
            quadrature: QuadratureSection::default(),
            output: OutputSection::default(),
        }
    }
}

fn bad(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::BadConfig { location: location.into(), message: message.into() }
}

/// 1-based line and column of byte `offset` in `text`.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(text, span.start);
                    format!("line {l}, column {c}")
                }
                None => "input".into(),
            };
            bad(location, e.message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(path.display().to_string(), format!("cannot read: {e}")))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pipeline;
        let counts = [
            ("pipeline.stages", p.stages),
            ("pipeline.forms", p.forms),
            ("pipeline.degree_cap", p.degree_cap),
            ("pipeline.fit_degree_cap", p.fit_degree_cap),
            ("pipeline.mu_degree_cap", p.mu_degree_cap),
            ("pipeline.k_max", p.k_max),
            ("pipeline.boundary_nodes", p.boundary_nodes),
            ("pipeline.probes", p.probes),
            ("quadrature.n_radial", self.quadrature.n_radial),
            ("quadrature.n_angular", self.quadrature.n_angular),
            ("quadrature.max_radial", self.quadrature.max_radial),
            ("quadrature.max_angular", self.quadrature.max_angular),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(bad(name, "must be positive"));
            }
        }
        let reals = [
            ("pipeline.gap", p.gap),
            ("pipeline.neck_w0", p.neck_w0),
            ("pipeline.neck_floor", p.neck_floor),
            ("pipeline.delta0", p.delta0),
            ("pipeline.delta_floor", p.delta_floor),
            ("quadrature.rel_tol", self.quadrature.rel_tol),
            ("quadrature.fail_tol", self.quadrature.fail_tol),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(name, format!("must be a positive finite number, got {v}")));
            }
        }
        if p.delta0 >= 1.0 {
            return Err(bad("pipeline.delta0", "must be below 1"));
        }
        if p.neck_floor > p.neck_w0 {
            return Err(bad("pipeline.neck_floor", "must not exceed pipeline.neck_w0"));
        }
        if p.delta_floor > p.delta0 {
            return Err(bad("pipeline.delta_floor", "must not exceed pipeline.delta0"));
        }
        let q = &self.quadrature;
        if q.max_radial < q.n_radial || q.max_angular < q.n_angular {
            return Err(bad("quadrature", "caps must not be below the starting sizes"));
        }
        if self.catalog.is_empty() {
            return Err(bad("catalog", "needs at least one disc"));
        }
        for (i, d) in self.catalog.iter().enumerate() {
            let at = format!("catalog[{i}]");
            if !(d.radius > 0.0 && d.radius.is_finite()) {
                return Err(bad(format!("{at}.radius"), "must be positive"));
            }
            if d.coeffs.len() != self.torus.dim {
                return Err(bad(
                    format!("{at}.coeffs"),
                    format!("has {} coordinates, torus dimension is {}", d.coeffs.len(), self.torus.dim),
                ));
            }
        }
        LatticeTorus::from_spec(&self.torus).map_err(|e| bad("torus", e.to_string()))?;
        self.catalog()?;
        Ok(())
    }

    pub fn exec(&self) -> Exec {
        if self.output.parallel {
            Exec::default()
        } else {
            Exec::Sequential
        }
    }

    pub fn torus(&self) -> Result<LatticeTorus> {
        LatticeTorus::from_spec(&self.torus).map_err(|e| bad("torus", e.to_string()))
    }

    pub fn grid(&self) -> QuadratureGrid {
        let q = &self.quadrature;
        QuadratureGrid {
            n_radial: q.n_radial,
            n_angular: q.n_angular,
            max_radial: q.max_radial,
            max_angular: q.max_angular,
            rel_tol: q.rel_tol,
            fail_tol: q.fail_tol,
            exec: self.exec(),
        }
    }

    pub fn catalog(&self) -> Result<Vec<LiftedDisc>> {
        self.catalog
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mono = d.coeffs.iter().map(|c| c.iter().map(|v| Complex64::new(v[0], v[1])).collect()).collect();
                let disc = LiftedDisc::from_monomials(Complex64::new(0.0, 0.0), d.radius, mono)
                    .map_err(|e| bad(format!("catalog[{i}]"), e.to_string()))?;
                if disc.is_constant() {
                    return Err(bad(format!("catalog[{i}]"), "disc is constant"));
                }
                Ok(disc.with_degree_cap(self.pipeline.degree_cap))
            })
            .collect()
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let p = &self.pipeline;
        Ok(PipelineConfig {
            torus: self.torus()?,
            catalog: self.catalog()?,
            stages: p.stages,
            forms: p.forms,
            grid: self.grid(),
            degree_cap: p.degree_cap,
            fit_degree_cap: p.fit_degree_cap,
            mu_degree_cap: p.mu_degree_cap,
            gap: p.gap,
            k_max: p.k_max,
            neck_w0: p.neck_w0,
            neck_floor: p.neck_floor,
            delta0: p.delta0,
            delta_floor: p.delta_floor,
            boundary_nodes: p.boundary_nodes,
            probes: p.probes,
            max_halvings: p.max_halvings,
            seed: p.seed,
            exec: self.exec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_the_desk_defaults() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let p = cfg.pipeline().unwrap();
        assert_eq!((p.stages, p.forms, p.catalog.len()), (4, 32, 3));
        assert_eq!(p.catalog[2].monomial_coeffs()[0][1], Complex64::new(3.0, 0.0));
    }

    #[test]
    fn errors_carry_line_or_field() {
        let err = RunConfig::parse("[pipeline]\nstages = 4\nstagez = 3\n").unwrap_err();
        match err {
            Error::BadConfig { location, message } => {
                assert!(location.starts_with("line 3"), "{location}");
                assert!(message.contains("stagez"), "{message}");
            }
            e => panic!("{e}"),
        }
        let err = RunConfig::parse("[pipeline]\nstages = 0\n").unwrap_err();
        assert!(matches!(err, Error::BadConfig { ref location, .. } if location == "pipeline.stages"));
        let err = RunConfig::parse("[pipeline]\nstages = \"four\"\n").unwrap_err();
        assert!(matches!(err, Error::BadConfig { ref location, .. } if location.starts_with("line 2")));
        let err = RunConfig::parse("[[catalog]]\nradius = 1.0\ncoeffs = [[[0.0, 0.0]]]\n").unwrap_err();
        assert!(matches!(err, Error::BadConfig { ref location, .. } if location == "catalog[0]"));
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
    }
}
