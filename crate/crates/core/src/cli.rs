//! Batch front-end: a JSON job spec in, a deterministic report (plus optional
//! DOT/JSON/OFF exports) out.
//!
//! Exit codes: 0 success (including negative verdicts), 1 I/O failure,
//! 2 schema or input error, 3 cap exceeded, 4 unsupported by the oracle.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bass_serre::{build_tree_ball, BallError, DEFAULT_CELL_CAP};
use crate::cayley_abels::{
    check_ca_conditions, coset_graph_ball, quotient_tree_ball, CaError, ConcreteGroup, CosetBall, FiniteHandle, FiniteQuotientKernel, GGraphBall, GogGroup,
    Integers, Lattice2, LatticeLine, SubgroupHandle, TrivialKernel, WordProblem,
};
use crate::complexes::{
    bounded_trivial, dehn_function_sample, grid_ball, hyperbolicity_estimate, link, omega_k, pi1_presentation, CellComplex, ComplexError, DEFAULT_LOOP_CAP,
    DEHN_SAMPLE_SEED,
};
use crate::fineness::{attach_coset_orbit, attach_pair_orbit, fineness_report, qi_certificate, wz_chain, FinenessError, LocalGraph, ZRule};
use crate::graph::Graph;
use crate::graph_of_groups::{fixtures, GogError, GraphOfGroups, GraphOfGroupsDescriptor};
use crate::small_cancellation::{
    check_cprime, check_m_thin, claim_audit, compute_m, presentation_complex_ball, symmetrize, Amalgam, Dehn, Rational, ScError, Syllable,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("cap exceeded: {0}")]
    Cap(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Schema(_) | CliError::Input(_) => 2,
            CliError::Cap(_) => 3,
            CliError::Unsupported(_) => 4,
        }
    }
}

impl From<GogError> for CliError {
    fn from(e: GogError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BallError> for CliError {
    fn from(e: BallError) -> Self {
        match e {
            BallError::CapExceeded(_) => CliError::Cap(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CaError> for CliError {
    fn from(e: CaError) -> Self {
        match e {
            CaError::CapExceeded(_) => CliError::Cap(e.to_string()),
            CaError::Ball(b) => b.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<FinenessError> for CliError {
    fn from(e: FinenessError) -> Self {
        match e {
            FinenessError::PathCap(_) => CliError::Cap(e.to_string()),
            FinenessError::Ca(c) => c.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ScError> for CliError {
    fn from(e: ScError) -> Self {
        match e {
            ScError::Unsupported(_) => CliError::Unsupported(e.to_string()),
            ScError::Ball(b) => b.into(),
            ScError::Ca(c) => c.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ComplexError> for CliError {
    fn from(e: ComplexError) -> Self {
        match e {
            ComplexError::LoopCap(_) => CliError::Cap(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    BuildTree,
    BuildCa,
    CheckCa,
    Fineness,
    WzAudit,
    Attach,
    Qi,
    Symmetrize,
    Cprime,
    ComputeM,
    Dehn,
    PxComplex,
    MThin,
    ClaimAudit,
    OmegaK,
    Link,
    Pi1,
    DehnSample,
    HypEstimate,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GogInput {
    Fixture(String),
    Descriptor(GraphOfGroupsDescriptor),
}

/// Concrete groups with a fixed coset-graph construction.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    /// `ℤ` with `U = 1`, `S = {1}`.
    ZLine,
    /// `ℤ²` with the standard generators, coned off along `⟨(1,0)⟩`.
    ConedZ2,
    /// The Bass–Serre tree of `C4 *_{C2} C6`: `U = A`, one cone per `B`-coset.
    TreeCone,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphInput {
    Cycle(usize),
    Path(usize),
    Complete(usize),
    Wheel(usize),
    Grid(i64),
    Edges { vertices: usize, edges: Vec<(usize, usize)> },
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum CaMode {
    #[default]
    Coset,
    Quotient,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AttachMode {
    #[default]
    Pair,
    Coset,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub radius: Option<usize>,
    pub radii: Option<Vec<usize>>,
    pub k: Option<usize>,
    pub m: Option<usize>,
    /// Exact rational as `"p/q"`.
    pub lambda: Option<String>,
    pub seed: Option<u64>,
    pub cap: Option<usize>,
    pub basepoint: Option<usize>,
    pub mode: Option<CaMode>,
    pub attach: Option<AttachMode>,
    pub u: Option<String>,
    pub v: Option<String>,
    pub a: Option<usize>,
    pub b: Option<usize>,
    pub vertex: Option<usize>,
    pub edge: Option<usize>,
    pub inner: Option<usize>,
    pub corners_only: Option<bool>,
    pub word: Option<Vec<Syllable>>,
    pub lengths: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub effort: Option<usize>,
    pub threshold: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub report: Option<PathBuf>,
    pub dot: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub off: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobSpec {
    pub command: Command,
    pub gog: Option<GogInput>,
    pub model: Option<Model>,
    pub graph: Option<GraphInput>,
    /// Syllables `[vertex, element]` of the relator in an amalgam.
    pub relator: Option<Vec<Syllable>>,
    /// Relators of a finite quotient, for `build-ca` in quotient mode.
    #[serde(default)]
    pub quotient_relators: Vec<Vec<Syllable>>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub outputs: Outputs,
}

/// Parses a job spec; schema errors name the offending path.
pub fn parse_spec(text: &str) -> Result<JobSpec, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(format!("at `{path}`: {}", e.inner()))
    })
}

/// A finished job: the report, the exports, and the exit code.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: Value,
    pub summary: String,
    pub artifacts: Vec<(PathBuf, String)>,
}

struct Ctx {
    spec: JobSpec,
    exports: BTreeMap<&'static str, String>,
    seeds: Vec<u64>,
    summary: String,
}

fn header(digest: &str, seeds: &[u64], cap: usize) -> Value {
    json!({
        "tool": "relgraph",
        "version": VERSION,
        "spec_sha256": digest,
        "seeds": seeds,
        "caps": {"cells": cap, "loops": DEFAULT_LOOP_CAP},
    })
}

/// Runs a job spec given as text. Nothing is written to disk here.
pub fn run_str(text: &str) -> Outcome {
    let digest: String = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
    let spec = match parse_spec(text) {
        Ok(s) => s,
        Err(e) => {
            let report = json!({"header": header(&digest, &[], DEFAULT_CELL_CAP), "status": "error", "error": e.to_string()});
            return Outcome { code: e.exit_code(), summary: e.to_string(), report, artifacts: Vec::new() };
        }
    };
    let cap = spec.params.cap.unwrap_or(DEFAULT_CELL_CAP);
    let command = spec.command;
    let outputs = spec.outputs.clone();
    let mut ctx = Ctx { spec, exports: BTreeMap::new(), seeds: Vec::new(), summary: String::new() };
    let result = dispatch(&mut ctx, command);
    let (code, status, body) = match result {
        Ok(v) => (0, "ok", v),
        Err(e) => {
            let status = match e.exit_code() {
                3 => "cap-exceeded",
                4 => "unsupported",
                _ => "error",
            };
            ctx.summary = e.to_string();
            (e.exit_code(), status, json!({"error": e.to_string()}))
        }
    };
    let report = json!({
        "header": header(&digest, &ctx.seeds, cap),
        "command": command,
        "status": status,
        "result": body,
    });
    let mut artifacts = Vec::new();
    if let Some(p) = &outputs.report {
        artifacts.push((p.clone(), serde_json::to_string_pretty(&report).expect("report serializes") + "\n"));
    }
    for (key, path) in [("dot", &outputs.dot), ("json", &outputs.json), ("off", &outputs.off)] {
        if let (Some(p), Some(text)) = (path, ctx.exports.get(key)) {
            artifacts.push((p.clone(), text.clone()));
        }
    }
    Outcome { code, report, summary: ctx.summary, artifacts }
}

/// Runs a spec file, writing artifacts atomically next to their targets.
/// Relative output paths are resolved against the spec's directory.
pub fn run_file(path: &Path) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut outcome = run_str(&text);
    let base = path.parent().unwrap_or(Path::new("."));
    for (p, text) in &mut outcome.artifacts {
        let target = if p.is_absolute() { p.clone() } else { base.join(&p) };
        write_atomic(&target, text)?;
        *p = target;
    }
    Ok(outcome)
}

fn write_atomic(path: &Path, text: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

fn need<T: Clone>(x: &Option<T>, name: &str) -> Result<T, CliError> {
    x.clone().ok_or_else(|| CliError::Schema(format!("missing `{name}`")))
}

fn parse_rational(s: &str) -> Result<Rational, CliError> {
    let bad = || CliError::Schema(format!("at `params.lambda`: `{s}` is not a rational p/q"));
    let (p, q) = s.split_once('/').unwrap_or((s, "1"));
    let p: i64 = p.trim().parse().map_err(|_| bad())?;
    let q: i64 = q.trim().parse().map_err(|_| bad())?;
    if q == 0 {
        return Err(bad());
    }
    Ok(Ratio::new(p, q))
}

fn build_gog(input: &Option<GogInput>) -> Result<GraphOfGroups, CliError> {
    match need(input, "gog")? {
        GogInput::Fixture(name) => fixtures::by_name(&name).ok_or_else(|| CliError::Schema(format!("at `gog.fixture`: unknown fixture `{name}`"))),
        GogInput::Descriptor(d) => Ok(d.build()?),
    }
}

fn build_graph(input: &Option<GraphInput>) -> Result<(Graph, Vec<bool>), CliError> {
    let g = match need(input, "graph")? {
        GraphInput::Cycle(n) => Graph::cycle(n),
        GraphInput::Path(n) => Graph::path(n),
        GraphInput::Complete(n) => Graph::complete(n),
        GraphInput::Wheel(n) => {
            let mut g = Graph::new(n + 1);
            for i in 0..n {
                g.add_edge(n, i);
                g.add_edge(i, (i + 1) % n);
            }
            g
        }
        GraphInput::Grid(r) => {
            let (g, _, complete) = grid_ball(r);
            return Ok((g, complete));
        }
        GraphInput::Edges { vertices, edges } => {
            if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= vertices || b >= vertices) {
                return Err(CliError::Schema(format!("at `graph.edges`: ({a}, {b}) out of range")));
            }
            Graph::from_edges(vertices, &edges)
        }
    };
    let n = g.vertex_count();
    Ok((g, vec![true; n]))
}

fn model_ball_z(r: usize, cap: usize) -> Result<CosetBall<Integers>, CaError> {
    coset_graph_ball(Integers, vec![0], vec![1], vec![], r, cap)
}

fn model_ball_z2(r: usize, cap: usize) -> Result<CosetBall<Lattice2>, CaError> {
    let h: Arc<dyn SubgroupHandle<Lattice2>> = Arc::new(LatticeLine::new((1, 0)).expect("primitive"));
    coset_graph_ball(Lattice2, vec![(0, 0)], vec![(1, 0), (0, 1)], vec![h], r, cap)
}

fn model_ball_tree(r: usize, cap: usize) -> Result<CosetBall<GogGroup>, CaError> {
    let gog = fixtures::sl2z();
    let g = GogGroup::new(&gog, 0);
    let a: Vec<_> = (0..4).map(|i| g.elem(i)).collect();
    let path = gog.parse_word(&[json!("e"), json!(0), json!("g"), json!(1), json!(0)]).expect("fixture word");
    let b_elems = g.conjugate_vertex_group(&path, 1);
    let hb: Arc<dyn SubgroupHandle<GogGroup>> = Arc::new(FiniteHandle::new("B", b_elems));
    coset_graph_ball(g, a, vec![], vec![hb], r, cap)
}

macro_rules! with_model {
    ($model:expr, $r:expr, $cap:expr, |$cb:ident| $body:expr) => {
        match $model {
            Model::ZLine => {
                let $cb = model_ball_z($r, $cap)?;
                $body
            }
            Model::ConedZ2 => {
                let $cb = model_ball_z2($r, $cap)?;
                $body
            }
            Model::TreeCone => {
                let $cb = model_ball_tree($r, $cap)?;
                $body
            }
        }
    };
}

fn find_label(ball: &GGraphBall, label: &str) -> Result<usize, CliError> {
    let lg = LocalGraph::from(ball);
    Ok(lg.find(label)?)
}

fn ball_summary(ball: &GGraphBall) -> Value {
    json!({
        "vertices": ball.vertex_count(),
        "edges": ball.graph.edge_count(),
        "interior": ball.interior().len(),
    })
}

fn amalgam_and_relator(spec: &JobSpec) -> Result<(Amalgam, Vec<Syllable>), CliError> {
    let gog = build_gog(&spec.gog)?;
    let am = Amalgam::new(&gog)?;
    let r = need(&spec.relator, "relator")?;
    check_syllables(&gog, &r, "relator")?;
    Ok((am, r))
}

fn check_syllables(gog: &GraphOfGroups, w: &[Syllable], at: &str) -> Result<(), CliError> {
    for (i, &(v, g)) in w.iter().enumerate() {
        if v >= gog.vertex_count() || g >= gog.vertex_group(v).order() {
            return Err(CliError::Schema(format!("at `{at}[{i}]`: syllable ({v}, {g}) out of range")));
        }
    }
    Ok(())
}

fn complex_summary(x: &CellComplex) -> Value {
    json!({
        "cells0": x.graph.vertex_count(),
        "cells1": x.graph.edge_count(),
        "cells2": x.cells2.len(),
        "euler_characteristic": x.euler_characteristic(),
    })
}

fn dispatch(ctx: &mut Ctx, command: Command) -> Result<Value, CliError> {
    let spec = ctx.spec.clone();
    let p = &spec.params;
    let cap = p.cap.unwrap_or(DEFAULT_CELL_CAP);
    match command {
        Command::BuildTree => {
            let gog = build_gog(&spec.gog)?;
            let ball = build_tree_ball(&gog, p.basepoint.unwrap_or(0), need(&p.radius, "params.radius")?, cap)?;
            ctx.exports.insert("dot", ball.to_dot());
            ctx.exports.insert("json", serde_json::to_string_pretty(&ball.to_json()).expect("serializes") + "\n");
            let levels = ball.level_counts();
            ctx.summary = format!("tree ball: {} vertices, levels {:?}", ball.vertex_count(), levels);
            Ok(json!({"vertices": ball.vertex_count(), "levels": levels, "is_tree": ball.is_tree(), "degree_violations": ball.degree_violations().len()}))
        }
        Command::BuildCa | Command::CheckCa => {
            let radii: Vec<usize> = match command {
                Command::CheckCa => need(&p.radii, "params.radii")?,
                _ => vec![need(&p.radius, "params.radius")?],
            };
            let mut balls = Vec::new();
            for &r in &radii {
                let ball = match p.mode.unwrap_or_default() {
                    CaMode::Coset => with_model!(need(&spec.model, "model")?, r, cap, |cb| cb.ball),
                    CaMode::Quotient => {
                        let gog = build_gog(&spec.gog)?;
                        let am = Amalgam::new(&gog).ok();
                        let words: Vec<_> = spec
                            .quotient_relators
                            .iter()
                            .map(|w| match &am {
                                Some(am) => Ok(am.to_word(w)),
                                None => Err(CliError::Input("quotient relators are syllable lists of an amalgam".into())),
                            })
                            .collect::<Result<_, _>>()?;
                        let wp: Box<dyn WordProblem> = if words.is_empty() {
                            Box::new(TrivialKernel(&gog))
                        } else {
                            Box::new(FiniteQuotientKernel::new(&gog, &words, cap).map_err(|e| CliError::Cap(e.to_string()))?)
                        };
                        quotient_tree_ball(&gog, p.basepoint.unwrap_or(0), r, wp.as_ref(), cap)?
                    }
                };
                balls.push(ball);
            }
            let last = balls.last().expect("at least one radius");
            ctx.exports.insert("dot", last.to_dot());
            ctx.exports.insert("json", serde_json::to_string_pretty(&last.to_json()).expect("serializes") + "\n");
            if command == Command::BuildCa {
                ctx.summary = format!("G-graph ball: {} vertices, {} edges", last.vertex_count(), last.graph.edge_count());
                return Ok(ball_summary(last));
            }
            let refs: Vec<&GGraphBall> = balls.iter().collect();
            let report = check_ca_conditions(last, &refs);
            ctx.summary = format!("Cayley–Abels conditions: {}", if report.ok { "hold" } else { "fail" });
            Ok(serde_json::to_value(report).expect("serializes"))
        }
        Command::Fineness => {
            let model = need(&spec.model, "model")?;
            let radii = need(&p.radii, "params.radii")?;
            let family = |r: usize| -> Result<LocalGraph, FinenessError> {
                let ball = match model {
                    Model::ZLine => model_ball_z(r, cap)?.ball,
                    Model::ConedZ2 => model_ball_z2(r, cap)?.ball,
                    Model::TreeCone => model_ball_tree(r, cap)?.ball,
                };
                Ok(LocalGraph::from(&ball))
            };
            let report = fineness_report(&family, &need(&p.u, "params.u")?, &need(&p.v, "params.v")?, need(&p.k, "params.k")?, &radii)?;
            ctx.summary = format!("fineness: {:?} {:?}", report.verdict, report.cardinalities);
            Ok(report.to_json())
        }
        Command::WzAudit => {
            let r = need(&p.radius, "params.radius")?;
            let cb = model_ball_tree(r, cap)?;
            let h = FiniteHandle::new("B", cb.peripherals[0].elements(&cb.group).expect("finite"));
            let att = attach_coset_orbit(&cb, 0, &h)?;
            let rule = if p.corners_only.unwrap_or(false) { ZRule::CornersOnly } else { ZRule::Standard };
            let chain = wz_chain(&cb, &att, need(&p.a, "params.a")?, need(&p.b, "params.b")?, need(&p.k, "params.k")?, rule)?;
            ctx.summary = format!("W/Z chain n = {}: containments {}", chain.n, if chain.containments_hold { "hold" } else { "fail" });
            Ok(serde_json::to_value(chain).expect("serializes"))
        }
        Command::Attach | Command::Qi => {
            let model = need(&spec.model, "model")?;
            let r = need(&p.radius, "params.radius")?;
            with_model!(model, r, cap, |cb| {
                let u = find_label(&cb.ball, &need(&p.u, "params.u")?)?;
                let att = match p.attach.unwrap_or_default() {
                    AttachMode::Pair => attach_pair_orbit(&cb, u, find_label(&cb.ball, &need(&p.v, "params.v")?)?)?,
                    AttachMode::Coset => match cb.peripherals.first() {
                        Some(h) => attach_coset_orbit(&cb, u, h.as_ref())?,
                        None => attach_coset_orbit(&cb, u, &FiniteHandle::new("1", vec![cb.group.identity()]))?,
                    },
                };
                let mut out = json!({
                    "ell": att.ell(),
                    "delta_vertices": att.delta.graph.vertex_count(),
                    "delta_edges": att.delta.graph.edge_count(),
                    "outside_hypotheses": att.outside_hypotheses,
                });
                if command == Command::Qi {
                    let depth = p.inner.unwrap_or(r / 2);
                    let inner: Vec<usize> = (0..cb.ball.vertex_count()).filter(|&v| cb.ball.vertices[v].depth <= depth).collect();
                    let cert = qi_certificate(&cb.ball.graph, &att.delta.graph, att.gamma_count, &inner, Some(att.ell().max(1)));
                    ctx.summary = format!("qi ratio {}/{}, ell {}", cert.ratio.0, cert.ratio.1, cert.ell);
                    out["certificate"] = serde_json::to_value(cert).expect("serializes");
                } else {
                    ctx.summary = format!("attached: ell = {}", att.ell());
                }
                Ok(out)
            })
        }
        Command::Symmetrize => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let s = symmetrize(&am, &am.pow(&r, p.m.unwrap_or(1)))?;
            ctx.summary = format!("{} members", s.members.len());
            Ok(serde_json::to_value(s).expect("serializes"))
        }
        Command::Cprime => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let lambda = parse_rational(&need(&p.lambda, "params.lambda")?)?;
            let v = check_cprime(&am, &r, p.m.unwrap_or(1), lambda)?;
            ctx.summary = format!("C'({}) {}", lambda, if v.holds { "holds" } else { "fails" });
            Ok(serde_json::to_value(v).expect("serializes"))
        }
        Command::ComputeM => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let t = compute_m(&am, &r)?;
            let mut out = serde_json::to_value(&t).expect("serializes");
            if let Some(l) = &p.lambda {
                let lambda = parse_rational(l)?;
                out["twelve_lambda_m_below_one"] = json!(crate::small_cancellation::twelve_lambda_m(lambda, t.m_const));
            }
            ctx.summary = format!("k = {}, M = {}", t.k, t.m_const);
            Ok(out)
        }
        Command::Dehn => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let word = need(&p.word, "params.word")?;
            check_syllables(am.gog(), &word, "params.word")?;
            let dehn = Dehn::new(&am, symmetrize(&am, &am.pow(&r, p.m.unwrap_or(1)))?)?;
            let res = dehn.reduce(&word);
            ctx.summary = format!("reduced to length {} with area {}", res.reduced.len(), res.area);
            Ok(serde_json::to_value(res).expect("serializes"))
        }
        Command::PxComplex | Command::MThin | Command::ClaimAudit => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let gog = am.gog().clone();
            let x = presentation_complex_ball(&am, &r, need(&p.m, "params.m")?, p.radius.unwrap_or(1), &TrivialKernel(&gog))?;
            let t = compute_m(&am, &r)?;
            match command {
                Command::PxComplex => {
                    let counts: Vec<usize> = x.cells.iter().map(Vec::len).collect();
                    ctx.summary = format!("{} edges, boundary length {}", counts.len(), x.boundary.len());
                    Ok(json!({"edges": counts.len(), "boundary_length": x.boundary.len(), "cells_per_edge": counts}))
                }
                Command::MThin => {
                    let rep = check_m_thin(&x, t.m_const);
                    ctx.summary = format!("M = {}, max cells on an edge {}", t.m_const, rep.max_count);
                    Ok(serde_json::to_value(rep).expect("serializes"))
                }
                _ => {
                    let e = p.edge.unwrap_or(0);
                    if e >= x.cells.len() {
                        return Err(CliError::Schema(format!("at `params.edge`: no edge {e}")));
                    }
                    let audit = claim_audit(&x, e, t.k);
                    ctx.summary = format!("claims at edge {e}: injective {}, index bound {}", audit.injective, audit.index_bound_holds);
                    Ok(serde_json::to_value(audit).expect("serializes"))
                }
            }
        }
        Command::OmegaK | Command::Link | Command::Pi1 => {
            let (g, complete) = build_graph(&spec.graph)?;
            let x = omega_k(&g, &complete, need(&p.k, "params.k")?, DEFAULT_LOOP_CAP)?;
            match command {
                Command::OmegaK => {
                    ctx.exports.insert("off", x.to_off());
                    ctx.exports.insert("json", serde_json::to_string_pretty(&x.to_json()).expect("serializes") + "\n");
                    ctx.summary = format!("{} 2-cells", x.cells2.len());
                    Ok(complex_summary(&x))
                }
                Command::Link => {
                    let lk = link(&x, need(&p.vertex, "params.vertex")?)?;
                    ctx.summary = format!("link: {} vertices, {} edges", lk.graph.vertex_count(), lk.graph.edge_count());
                    Ok(json!({"vertices": lk.neighbors, "edges": lk.graph.edges(), "components": lk.component_count(), "partial": lk.partial}))
                }
                _ => {
                    let (pres, gens) = pi1_presentation(&x)?;
                    let verdict = bounded_trivial(&pres, p.effort.unwrap_or(10_000));
                    ctx.summary = format!("π1 verdict: {verdict:?}");
                    Ok(json!({"generators": gens, "relators": pres.relators, "verdict": verdict}))
                }
            }
        }
        Command::DehnSample => {
            let (am, r) = amalgam_and_relator(&spec)?;
            let dehn = Dehn::new(&am, symmetrize(&am, &am.pow(&r, p.m.unwrap_or(1)))?)?;
            let seed = p.seed.unwrap_or(DEHN_SAMPLE_SEED);
            ctx.seeds.push(seed);
            let s = dehn_function_sample(&am, &dehn, &need(&p.lengths, "params.lengths")?, p.samples.unwrap_or(50), seed);
            ctx.summary = format!("slope estimate {:?}", s.slope);
            Ok(serde_json::to_value(s).expect("serializes"))
        }
        Command::HypEstimate => {
            let (g, _) = build_graph(&spec.graph)?;
            let seed = p.seed.unwrap_or(1);
            ctx.seeds.push(seed);
            let est = hyperbolicity_estimate(&g, p.threshold.unwrap_or(40), p.samples.unwrap_or(20_000), seed)?;
            ctx.summary = format!("ESTIMATE δ = {}", est.delta());
            Ok(json!({"estimate": est, "delta": est.delta(), "label": "ESTIMATE"}))
        }
    }
}
