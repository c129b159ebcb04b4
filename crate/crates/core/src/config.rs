//! JSON run configuration.
//!
//! One document describes a base simulation plus optional sweep axes; each
//! sweep point is the base with the swept fields replaced.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::field::MagnetizationField;
use crate::gmres::GmresConfig;
use crate::mesh::{generate_structured_cube, load_mesh, Box3, Mesh};
use crate::physics::EffectiveFieldConfig;
use crate::precond::PrecondKind;
use crate::scheme::{SchemeCoefficients, SchemeVariant, SolveSettings};
use crate::tangent::{FrameStrategy, TnCandidate, TnChoice};
use crate::vec3::{self, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Cube {
        #[serde(default)]
        min: Vec3,
        #[serde(default = "unit_max")]
        max: Vec3,
        n: [usize; 3],
    },
    File { path: PathBuf },
}

fn unit_max() -> Vec3 {
    [1.0; 3]
}

impl MeshSpec {
    /// Builds the mesh; relative file paths are resolved against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Mesh> {
        match self {
            MeshSpec::Cube { min, max, n } => generate_structured_cube(Box3 { min: *min, max: *max }, *n),
            MeshSpec::File { path } => {
                let p = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                load_mesh(std::fs::File::open(&p)?)
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            MeshSpec::Cube { n, .. } => format!("{}x{}x{}", n[0], n[1], n[2]),
            MeshSpec::File { path } => path.display().to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Uniform { direction: Vec3 },
    /// `m(x) ∝ (cos(q·x), sin(q·x), tilt)`
    Helix {
        wavevector: Vec3,
        #[serde(default)]
        tilt: f64,
    },
    /// Independent uniformly distributed nodal directions.
    Random { seed: u64 },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Uniform { direction: [1.0, 0.0, 0.0] }
    }
}

impl InitialCondition {
    pub fn build(&self, nodes: &[Vec3]) -> Result<MagnetizationField> {
        match self {
            InitialCondition::Uniform { direction } => MagnetizationField::uniform(nodes.len(), *direction),
            InitialCondition::Helix { wavevector, tilt } => MagnetizationField::normalized(
                nodes
                    .iter()
                    .map(|&x| {
                        let phase = vec3::dot(*wavevector, x);
                        [phase.cos(), phase.sin(), *tilt]
                    })
                    .collect(),
            ),
            InitialCondition::Random { seed } => {
                use rand::SeedableRng;
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(*seed);
                MagnetizationField::new(crate::diagnostics::random_unit_field(&mut rng, nodes.len()))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub restart: usize,
    pub maxit: usize,
    pub reorthogonalize: bool,
}

impl Default for SolverSection {
    fn default() -> Self {
        let g = GmresConfig::default();
        SolverSection { tol: g.tol, restart: g.restart, maxit: g.maxit, reorthogonalize: g.reorthogonalize }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecondSection {
    pub kind: PrecondKind,
    pub alpha_p: f64,
    pub rebuild_every: usize,
}

impl Default for PrecondSection {
    fn default() -> Self {
        PrecondSection { kind: PrecondKind::Practical, alpha_p: 1.0, rebuild_every: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct FrameSection {
    pub tn: TnChoice,
    pub strategy: FrameStrategy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// VTK snapshot every this many steps (0: never).
    pub vtk_every: usize,
    /// Write the GMRES residual history of every step.
    pub residual_csv: bool,
}

/// Sweep axes; an absent axis means "the base value only".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mesh_n: Option<Vec<[usize; 3]>>,
    pub alpha: Option<Vec<f64>>,
    pub alpha_p: Option<Vec<f64>>,
    pub tn: Option<Vec<TnChoice>>,
    pub precond: Option<Vec<PrecondKind>>,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scheme: SchemeVariant,
    pub alpha: f64,
    #[serde(default = "one")]
    pub theta: f64,
    pub ell_ex2: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub k: f64,
    pub mesh: MeshSpec,
    #[serde(default)]
    pub field: EffectiveFieldConfig,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub precond: PrecondSection,
    #[serde(default)]
    pub frame: FrameSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default = "yes")]
    pub projection: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// One resolved sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub config: ExperimentConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        self.coefficients().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.k > 0.0) || !(self.t_final >= 0.0) {
            return bad(format!("need k > 0 and T >= 0, got k = {}, T = {}", self.k, self.t_final));
        }
        if self.scheme == SchemeVariant::Tps2 && self.k >= 1.0 {
            return bad("tps2 needs k < 1".into());
        }
        if !(self.solver.tol > 0.0) || self.solver.restart == 0 || self.solver.maxit == 0 {
            return bad("solver needs tol > 0, restart >= 1, maxit >= 1".into());
        }
        if !(self.precond.alpha_p > 0.0) || self.precond.rebuild_every == 0 {
            return bad("precond needs alpha_p > 0 and rebuild_every >= 1".into());
        }
        self.field.pi.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let InitialCondition::Uniform { direction } = self.initial {
            if !(vec3::norm(direction) > 0.0) {
                return bad("initial direction must be non-zero".into());
            }
        }
        if let Some(s) = &self.sweep {
            let axes: [(&str, Option<usize>); 5] = [
                ("mesh_n", s.mesh_n.as_ref().map(Vec::len)),
                ("alpha", s.alpha.as_ref().map(Vec::len)),
                ("alpha_p", s.alpha_p.as_ref().map(Vec::len)),
                ("tn", s.tn.as_ref().map(Vec::len)),
                ("precond", s.precond.as_ref().map(Vec::len)),
            ];
            for (name, len) in axes {
                if len == Some(0) {
                    return bad(format!("sweep axis {name:?} is empty"));
                }
            }
            if s.mesh_n.is_some() && !matches!(self.mesh, MeshSpec::Cube { .. }) {
                return bad("sweep.mesh_n requires a cube mesh".into());
            }
            for a in s.alpha.iter().flatten() {
                if !(*a > 0.0 && *a <= 1.0) {
                    return bad(format!("swept alpha {a} outside (0, 1]"));
                }
            }
            for a in s.alpha_p.iter().flatten() {
                if !(*a > 0.0) {
                    return bad(format!("swept alpha_p {a} must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Result<SchemeCoefficients> {
        SchemeCoefficients::new(self.scheme, self.alpha, self.theta, self.ell_ex2)
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            gmres: GmresConfig {
                tol: self.solver.tol,
                restart: self.solver.restart,
                maxit: self.solver.maxit,
                reorthogonalize: self.solver.reorthogonalize,
                ..GmresConfig::default()
            },
            precond: self.precond.kind,
            alpha_p: self.precond.alpha_p,
            rebuild_every: self.precond.rebuild_every,
            tn: self.frame.tn,
            frame: self.frame.strategy,
            projection: self.projection,
        }
    }

    pub fn build_space(&self, base: Option<&Path>) -> Result<Arc<FemSpace>> {
        Ok(Arc::new(FemSpace::new(self.mesh.build(base)?)))
    }

    /// Sweep points in a fixed order: mesh (outermost), α, α_P, Tₙ,
    /// preconditioner (innermost).
    pub fn sweep_points(&self) -> Vec<SweepPoint> {
        let s = self.sweep.clone().unwrap_or_default();
        let meshes: Vec<MeshSpec> = match (&s.mesh_n, &self.mesh) {
            (Some(ns), MeshSpec::Cube { min, max, .. }) => ns.iter().map(|&n| MeshSpec::Cube { min: *min, max: *max, n }).collect(),
            _ => vec![self.mesh.clone()],
        };
        let alphas = s.alpha.unwrap_or_else(|| vec![self.alpha]);
        let alpha_ps = s.alpha_p.unwrap_or_else(|| vec![self.precond.alpha_p]);
        let tns = s.tn.unwrap_or_else(|| vec![self.frame.tn]);
        let preconds = s.precond.unwrap_or_else(|| vec![self.precond.kind]);
        let mut out = Vec::new();
        for mesh in &meshes {
            for &alpha in &alphas {
                for &alpha_p in &alpha_ps {
                    for &tn in &tns {
                        for &kind in &preconds {
                            let mut c = self.clone();
                            c.sweep = None;
                            c.mesh = mesh.clone();
                            c.alpha = alpha;
                            c.precond.alpha_p = alpha_p;
                            c.precond.kind = kind;
                            c.frame.tn = tn;
                            out.push(SweepPoint { index: out.len(), config: c });
                        }
                    }
                }
            }
        }
        out
    }

    /// Default configuration: the academic cube problem on a 4³ mesh.
    pub fn academic_default() -> Self {
        ExperimentConfig {
            scheme: SchemeVariant::Tps1,
            alpha: 0.5,
            theta: 1.0,
            ell_ex2: 10.0,
            t_final: 1.0,
            k: 1e-2,
            mesh: MeshSpec::Cube { min: [0.0; 3], max: [1.0; 3], n: [4, 4, 4] },
            field: EffectiveFieldConfig {
                pi: crate::physics::PiKind::Zero,
                applied: crate::physics::AppliedField::Academic { amplitude: 10.0 },
            },
            initial: InitialCondition::Uniform { direction: [1.0, 0.0, 0.0] },
            solver: SolverSection::default(),
            precond: PrecondSection::default(),
            frame: FrameSection { tn: TnChoice::Fixed(TnCandidate::T3Minus), strategy: FrameStrategy::Householder },
            output: OutputSection::default(),
            projection: true,
            sweep: None,
            out_dir: None,
        }
    }
}

/// JSON schema of the configuration file, with defaults and an example.
pub fn print_config_schema() -> String {
    let precond_names: Vec<&str> = PrecondKind::ALL.iter().map(|k| k.name()).collect();
    let tn_names: Vec<&str> = std::iter::once("adaptive").chain(TnCandidate::ALL.iter().map(|c| c.name())).collect();
    let frame_names: Vec<&str> = FrameStrategy::ALL.iter().map(|f| f.name()).collect();
    let solver = SolverSection::default();
    let precond = PrecondSection::default();
    let vec3 = json!({"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3});
    let schema = json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "tangent-plane-llg experiment configuration",
        "type": "object",
        "required": ["alpha", "ell_ex2", "T", "k", "mesh"],
        "properties": {
            "scheme": {"enum": ["tps1", "tps2"], "default": "tps1"},
            "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1, "description": "Gilbert damping"},
            "theta": {"type": "number", "default": 1.0, "description": "first-order scheme parameter"},
            "ell_ex2": {"type": "number", "minimum": 0, "description": "exchange length squared"},
            "T": {"type": "number", "minimum": 0, "description": "final time"},
            "k": {"type": "number", "exclusiveMinimum": 0, "description": "time step"},
            "mesh": {"oneOf": [
                {"type": "object", "properties": {"kind": {"const": "cube"}, "min": vec3, "max": vec3,
                    "n": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 3, "maxItems": 3}},
                 "required": ["kind", "n"]},
                {"type": "object", "properties": {"kind": {"const": "file"}, "path": {"type": "string"}}, "required": ["kind", "path"]}
            ]},
            "field": {"type": "object", "properties": {
                "pi": {"oneOf": [
                    {"properties": {"kind": {"const": "zero"}}},
                    {"properties": {"kind": {"const": "uniaxial"}, "axis": vec3, "strength": {"type": "number"}}},
                    {"properties": {"kind": {"const": "zhang_li"}, "u": vec3, "beta_zl": {"type": "number"}}}
                ], "default": {"kind": "zero"}},
                "applied": {"oneOf": [
                    {"properties": {"kind": {"const": "constant"}, "value": vec3}},
                    {"properties": {"kind": {"const": "academic"}, "amplitude": {"type": "number", "default": 10.0}}},
                    {"properties": {"kind": {"const": "ramp"}, "value": vec3}}
                ], "default": {"kind": "constant", "value": [0.0, 0.0, 0.0]}}
            }},
            "initial": {"oneOf": [
                {"properties": {"kind": {"const": "uniform"}, "direction": vec3}},
                {"properties": {"kind": {"const": "helix"}, "wavevector": vec3, "tilt": {"type": "number", "default": 0.0}}},
                {"properties": {"kind": {"const": "random"}, "seed": {"type": "integer"}}}
            ], "default": {"kind": "uniform", "direction": [1.0, 0.0, 0.0]}},
            "solver": {"type": "object", "properties": {
                "tol": {"type": "number", "default": solver.tol},
                "restart": {"type": "integer", "default": solver.restart},
                "maxit": {"type": "integer", "default": solver.maxit},
                "reorthogonalize": {"type": "boolean", "default": solver.reorthogonalize}
            }},
            "precond": {"type": "object", "properties": {
                "kind": {"enum": precond_names, "default": precond.kind.name()},
                "alpha_p": {"type": "number", "default": precond.alpha_p},
                "rebuild_every": {"type": "integer", "minimum": 1, "default": precond.rebuild_every}
            }},
            "frame": {"type": "object", "properties": {
                "tn": {"enum": tn_names, "default": "adaptive"},
                "strategy": {"enum": frame_names, "default": "householder"}
            }},
            "output": {"type": "object", "properties": {
                "vtk_every": {"type": "integer", "default": 0},
                "residual_csv": {"type": "boolean", "default": false}
            }},
            "projection": {"type": "boolean", "default": true},
            "sweep": {"type": "object", "description": "non-empty lists; absent axes keep the base value", "properties": {
                "mesh_n": {"type": "array", "minItems": 1},
                "alpha": {"type": "array", "minItems": 1},
                "alpha_p": {"type": "array", "minItems": 1},
                "tn": {"type": "array", "minItems": 1, "items": {"enum": tn_names}},
                "precond": {"type": "array", "minItems": 1, "items": {"enum": precond_names}}
            }},
            "out_dir": {"type": "string", "default": "out"}
        },
        "examples": [serde_json::to_value(ExperimentConfig::academic_default()).expect("serializes")]
    });
    serde_json::to_string_pretty(&schema).expect("schema serializes")
}
