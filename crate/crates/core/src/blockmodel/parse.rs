use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use super::{
    Block, BlockKind, Endpoint, ModelGraph, ModelRef, Sign, Subsystem, SubsystemDef, Wire,
    DEFAULT_STEPS,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("duplicate block id `{0}`")]
    DuplicateBlock(String),
    #[error("unknown block kind `{0}`")]
    UnknownKind(String),
    #[error("wire to missing port `{0}`")]
    MissingPort(String),
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
    err(line, ParseErrorKind::Syntax(msg.into()))
}

/// Reads and parses a model file, recording its path in the graph.
pub fn parse_model_file(path: &Path) -> Result<ModelGraph, ParseError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err(0, ParseErrorKind::Invalid(format!("{}: {e}", path.display()))))?;
    let mut graph = parse_model(&text)?;
    graph.source = Some(path.to_path_buf());
    Ok(graph)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Sut,
    Fixture,
    Test,
    Helper,
}

struct RawBody {
    role: Role,
    name: String,
    line: usize,
    inputs: Vec<(String, usize)>,
    outputs: Vec<(String, usize)>,
    blocks: Vec<Block>,
    wires: Vec<(String, String, usize)>,
}

impl RawBody {
    fn new(role: Role, name: String, line: usize) -> Self {
        RawBody {
            role,
            name,
            line,
            inputs: Vec::new(),
            outputs: Vec::new(),
            blocks: Vec::new(),
            wires: Vec::new(),
        }
    }
}

/// Strips a `#` comment. `#` only opens a comment at the start of a token, so
/// `lib.bdm#controller` survives.
fn strip_comment(line: &str) -> &str {
    let mut prev_ws = true;
    for (i, c) in line.char_indices() {
        if c == '#' && prev_ws {
            return &line[..i];
        }
        prev_ws = c.is_whitespace();
    }
    line
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ident(line: usize, s: &str, what: &str) -> Result<String, ParseError> {
    if is_ident(s) {
        Ok(s.to_string())
    } else {
        Err(syntax(line, format!("invalid {what} `{s}`")))
    }
}

fn parse_ref(line: usize, s: &str) -> Result<ModelRef, ParseError> {
    let (path, name) = s
        .rsplit_once('#')
        .ok_or_else(|| syntax(line, format!("expected <path>#<name>, found `{s}`")))?;
    if path.is_empty() {
        return Err(syntax(line, "empty reference path"));
    }
    Ok(ModelRef {
        path: path.to_string(),
        name: ident(line, name, "subsystem name")?,
        line,
    })
}

pub fn parse_model(text: &str) -> Result<ModelGraph, ParseError> {
    let mut suite_name = None;
    let mut steps = None;
    let mut sut: Option<SubsystemDef> = None;
    let mut fixture_raw: Option<RawBody> = None;
    let mut named: Vec<(usize, Result<RawBody, SubsystemDef>)> = Vec::new();
    let mut open: Option<RawBody> = None;
    let mut sut_raw: Option<RawBody> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = strip_comment(raw_line).trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();

        if let Some(body) = open.as_mut() {
            match tokens[0] {
                "}" => {
                    if tokens.len() != 1 {
                        return Err(syntax(line, "`}` must stand alone"));
                    }
                    let body = open.take().expect("open body");
                    match body.role {
                        Role::Sut => sut_raw = Some(body),
                        Role::Fixture => fixture_raw = Some(body),
                        Role::Test | Role::Helper => named.push((body.line, Ok(body))),
                    }
                }
                "in" | "out" => {
                    if tokens.len() != 2 {
                        return Err(syntax(line, format!("expected `{} <port>`", tokens[0])));
                    }
                    let port = ident(line, tokens[1], "port name")?;
                    let list = if tokens[0] == "in" {
                        &mut body.inputs
                    } else {
                        &mut body.outputs
                    };
                    if list.iter().any(|(p, _)| *p == port) {
                        return Err(err(
                            line,
                            ParseErrorKind::Invalid(format!("duplicate port `{port}`")),
                        ));
                    }
                    list.push((port, line));
                }
                "block" => {
                    if tokens.len() < 3 {
                        return Err(syntax(line, "expected `block <id> <kind> <params...>`"));
                    }
                    let id = ident(line, tokens[1], "block id")?;
                    if body.blocks.iter().any(|b| b.id == id) {
                        return Err(err(line, ParseErrorKind::DuplicateBlock(id)));
                    }
                    let kind = parse_kind(line, tokens[2], &tokens[3..])?;
                    body.blocks.push(Block { id, kind, line });
                }
                "wire" => {
                    let rest = content["wire".len()..].trim();
                    let (src, dst) = rest
                        .split_once("->")
                        .ok_or_else(|| syntax(line, "expected `wire <src> -> <dst>`"))?;
                    let (src, dst) = (src.trim(), dst.trim());
                    if src.is_empty()
                        || dst.is_empty()
                        || src.contains(char::is_whitespace)
                        || dst.contains(char::is_whitespace)
                    {
                        return Err(syntax(line, "expected `wire <src> -> <dst>`"));
                    }
                    body.wires.push((src.to_string(), dst.to_string(), line));
                }
                other => {
                    return Err(syntax(line, format!("unexpected `{other}` inside subsystem")))
                }
            }
            continue;
        }

        match tokens[0] {
            "suite" => {
                if tokens.len() != 2 {
                    return Err(syntax(line, "expected `suite <name>`"));
                }
                if suite_name.is_some() {
                    return Err(syntax(line, "duplicate `suite` directive"));
                }
                suite_name = Some(ident(line, tokens[1], "suite name")?);
            }
            "steps" => {
                if tokens.len() != 2 {
                    return Err(syntax(line, "expected `steps <N>`"));
                }
                let n: usize = tokens[1]
                    .parse()
                    .map_err(|_| syntax(line, format!("invalid step count `{}`", tokens[1])))?;
                if n == 0 {
                    return Err(err(line, ParseErrorKind::BadParam("steps must be positive".into())));
                }
                steps = Some(n);
            }
            "sut" => {
                if sut.is_some() || sut_raw.is_some() {
                    return Err(syntax(line, "duplicate `sut`"));
                }
                match tokens.as_slice() {
                    ["sut", "{"] => open = Some(RawBody::new(Role::Sut, "sut".into(), line)),
                    ["sut", "ref", target] => {
                        sut = Some(SubsystemDef::Reference {
                            name: "sut".into(),
                            target: parse_ref(line, target)?,
                        })
                    }
                    _ => return Err(syntax(line, "expected `sut {` or `sut ref <path>#<name>`")),
                }
            }
            "fixture" => {
                if fixture_raw.is_some() {
                    return Err(syntax(line, "duplicate `fixture`"));
                }
                if tokens.as_slice() != ["fixture", "{"] {
                    return Err(syntax(line, "expected `fixture {`"));
                }
                open = Some(RawBody::new(Role::Fixture, "fixture".into(), line));
            }
            "test" | "subsystem" => {
                let name = tokens
                    .get(1)
                    .ok_or_else(|| syntax(line, format!("expected `{} <name>`", tokens[0])))?;
                let name = ident(line, name, "subsystem name")?;
                if tokens[0] == "test" && !name.starts_with("test") {
                    return Err(err(
                        line,
                        ParseErrorKind::Invalid(format!("test name `{name}` must start with `test`")),
                    ));
                }
                if name == "sut" || name == "fixture" {
                    return Err(syntax(line, format!("`{name}` is reserved")));
                }
                if named.iter().any(|(_, n)| match n {
                    Ok(b) => b.name == name,
                    Err(d) => d.name() == name,
                }) {
                    return Err(err(
                        line,
                        ParseErrorKind::Invalid(format!("duplicate subsystem `{name}`")),
                    ));
                }
                let role = if name.starts_with("test") {
                    Role::Test
                } else {
                    Role::Helper
                };
                match &tokens[2..] {
                    ["{"] => open = Some(RawBody::new(role, name, line)),
                    ["ref", target] if tokens[0] == "subsystem" && role == Role::Helper => {
                        named.push((
                            line,
                            Err(SubsystemDef::Reference {
                                name,
                                target: parse_ref(line, target)?,
                            }),
                        ));
                    }
                    ["ref", _] => {
                        return Err(err(
                            line,
                            ParseErrorKind::Invalid(format!("test `{name}` must be inline")),
                        ))
                    }
                    _ => return Err(syntax(line, format!("expected `{} {name} {{`", tokens[0]))),
                }
            }
            "}" => return Err(syntax(line, "unmatched `}`")),
            other => return Err(syntax(line, format!("unexpected `{other}`"))),
        }
    }

    if let Some(body) = open {
        return Err(syntax(body.line, format!("unclosed `{}` body", body.name)));
    }
    let suite_name = suite_name.ok_or_else(|| syntax(1, "missing `suite <name>` directive"))?;

    if let Some(raw) = sut_raw {
        sut = Some(SubsystemDef::Inline(build_subsystem(raw, None)?));
    }
    let inline_sut = sut.as_ref().and_then(SubsystemDef::as_inline).cloned();
    let fixture = match fixture_raw {
        Some(raw) => {
            let line = raw.line;
            let fixture = build_subsystem(raw, None)?;
            if sut.is_none() {
                return Err(err(line, ParseErrorKind::Invalid("fixture without sut".into())));
            }
            if let Some(s) = &inline_sut {
                check_fixture_ports(&fixture, s).map_err(|m| err(line, ParseErrorKind::Invalid(m)))?;
            }
            Some(fixture)
        }
        None => None,
    };

    let mut subsystems = Vec::new();
    for (_, entry) in named {
        match entry {
            Ok(raw) => {
                let is_test = raw.role == Role::Test;
                let line = raw.line;
                let sub = build_subsystem(raw, if is_test { Some((&sut, &inline_sut)) } else { None })?;
                if is_test {
                    if sub.assertion_count() == 0 {
                        return Err(err(
                            line,
                            ParseErrorKind::Invalid(format!(
                                "test `{}` has no assert_eq block",
                                sub.name
                            )),
                        ));
                    }
                    if !sub.inputs.is_empty() || !sub.outputs.is_empty() {
                        return Err(err(
                            line,
                            ParseErrorKind::Invalid(format!(
                                "test `{}` cannot declare boundary ports",
                                sub.name
                            )),
                        ));
                    }
                }
                subsystems.push(SubsystemDef::Inline(sub));
            }
            Err(def) => subsystems.push(def),
        }
    }

    Ok(ModelGraph {
        suite_name,
        source: None,
        steps: steps.unwrap_or(DEFAULT_STEPS),
        sut,
        fixture,
        subsystems,
    })
}

/// Fixture inputs and outputs must both equal the SUT's input port set.
pub(super) fn check_fixture_ports(fixture: &Subsystem, sut: &Subsystem) -> Result<(), String> {
    let want: HashSet<&String> = sut.inputs.iter().collect();
    let ins: HashSet<&String> = fixture.inputs.iter().collect();
    let outs: HashSet<&String> = fixture.outputs.iter().collect();
    if ins != want || outs != want {
        let mut want: Vec<_> = want.into_iter().cloned().collect();
        want.sort();
        return Err(format!(
            "fixture ports must match sut inputs [{}]",
            want.join(", ")
        ));
    }
    Ok(())
}

fn number(line: usize, s: &str) -> Result<f64, ParseError> {
    let v: f64 = s
        .parse()
        .map_err(|_| err(line, ParseErrorKind::BadParam(format!("`{s}` is not a number"))))?;
    if !v.is_finite() {
        return Err(err(line, ParseErrorKind::BadParam(format!("`{s}` is not finite"))));
    }
    Ok(v)
}

fn parse_kind(line: usize, kind: &str, params: &[&str]) -> Result<BlockKind, ParseError> {
    let arity = |min: usize, max: usize| -> Result<(), ParseError> {
        if params.len() < min || params.len() > max {
            Err(err(
                line,
                ParseErrorKind::BadParam(format!(
                    "`{kind}` takes {} parameter(s), found {}",
                    if min == max {
                        min.to_string()
                    } else {
                        format!("{min}..{max}")
                    },
                    params.len()
                )),
            ))
        } else {
            Ok(())
        }
    };
    let opt = |i: usize, default: f64| -> Result<f64, ParseError> {
        params.get(i).map_or(Ok(default), |s| number(line, s))
    };
    Ok(match kind {
        "const" => {
            arity(1, 1)?;
            BlockKind::Const(number(line, params[0])?)
        }
        "step" => {
            if params.len() != 1 && params.len() != 3 {
                return Err(err(
                    line,
                    ParseErrorKind::BadParam("`step` takes <at> [<before> <after>]".into()),
                ));
            }
            let at = params[0].parse().map_err(|_| {
                err(line, ParseErrorKind::BadParam(format!("`{}` is not a step index", params[0])))
            })?;
            BlockKind::Step {
                at,
                before: opt(1, 0.0)?,
                after: opt(2, 1.0)?,
            }
        }
        "sequence" => {
            if params.is_empty() {
                return Err(err(line, ParseErrorKind::BadParam("`sequence` needs values".into())));
            }
            BlockKind::Sequence(params.iter().map(|p| number(line, p)).collect::<Result<_, _>>()?)
        }
        "clock" => {
            arity(0, 1)?;
            BlockKind::Clock { dt: opt(0, 1.0)? }
        }
        "gain" => {
            arity(1, 1)?;
            BlockKind::Gain(number(line, params[0])?)
        }
        "sum" => {
            arity(1, 1)?;
            let signs = params[0]
                .chars()
                .map(|c| match c {
                    '+' => Ok(Sign::Plus),
                    '-' => Ok(Sign::Minus),
                    _ => Err(err(
                        line,
                        ParseErrorKind::BadParam(format!("bad sign string `{}`", params[0])),
                    )),
                })
                .collect::<Result<Vec<_>, _>>()?;
            BlockKind::Sum(signs)
        }
        "product" => {
            arity(0, 1)?;
            let n = match params.first() {
                Some(s) => s.parse().map_err(|_| {
                    err(line, ParseErrorKind::BadParam(format!("`{s}` is not an input count")))
                })?,
                None => 2,
            };
            if n == 0 {
                return Err(err(line, ParseErrorKind::BadParam("product needs inputs".into())));
            }
            BlockKind::Product(n)
        }
        "delay" => {
            arity(0, 1)?;
            BlockKind::Delay { initial: opt(0, 0.0)? }
        }
        "saturate" => {
            arity(2, 2)?;
            let (lo, hi) = (number(line, params[0])?, number(line, params[1])?);
            if lo > hi {
                return Err(err(line, ParseErrorKind::BadParam("saturate needs lo <= hi".into())));
            }
            BlockKind::Saturate { lo, hi }
        }
        "sink" => {
            arity(0, 0)?;
            BlockKind::Sink
        }
        "assert_eq" => {
            arity(0, 1)?;
            let tol = opt(0, 0.0)?;
            if tol < 0.0 {
                return Err(err(line, ParseErrorKind::BadParam("negative tolerance".into())));
            }
            BlockKind::AssertEq { tol }
        }
        other => return Err(err(line, ParseErrorKind::UnknownKind(other.to_string()))),
    })
}

type SutView<'a> = (&'a Option<SubsystemDef>, &'a Option<Subsystem>);

fn build_subsystem(raw: RawBody, sut: Option<SutView<'_>>) -> Result<Subsystem, ParseError> {
    let blocks: HashMap<&str, &Block> = raw.blocks.iter().map(|b| (b.id.as_str(), b)).collect();
    for b in &raw.blocks {
        if b.id == "sut" || raw.inputs.iter().chain(&raw.outputs).any(|(p, _)| *p == b.id) {
            return Err(err(
                b.line,
                ParseErrorKind::Invalid(format!("block id `{}` clashes with a port name", b.id)),
            ));
        }
    }
    let is_input = |n: &str| raw.inputs.iter().any(|(p, _)| p == n);
    let is_output = |n: &str| raw.outputs.iter().any(|(p, _)| p == n);

    let mut wires = Vec::new();
    for (src_text, dst_text, line) in &raw.wires {
        let line = *line;
        let missing = |t: &str| err(line, ParseErrorKind::MissingPort(t.to_string()));
        let resolve = |text: &str, as_src: bool| -> Result<Endpoint, ParseError> {
            let (id, port) = match text.split_once('.') {
                Some((id, port)) => (id, Some(port)),
                None => (text, None),
            };
            if id == "sut" {
                let Some((sut_def, inline)) = sut else {
                    return Err(missing(text));
                };
                if sut_def.is_none() {
                    return Err(err(line, ParseErrorKind::Invalid("test wires to `sut` but no sut is declared".into())));
                }
                let port = port.ok_or_else(|| syntax(line, "`sut` endpoints need a port"))?;
                if let Some(s) = inline {
                    let ok = if as_src {
                        s.outputs.iter().any(|p| p == port)
                    } else {
                        s.inputs.iter().any(|p| p == port)
                    };
                    if !ok {
                        return Err(missing(text));
                    }
                }
                return Ok(Endpoint::Sut(port.to_string()));
            }
            if let Some(block) = blocks.get(id) {
                let port = if as_src {
                    if !block.kind.has_output() || port.is_some_and(|p| p != "out") {
                        return Err(missing(text));
                    }
                    "out".to_string()
                } else {
                    let ins = block.kind.input_ports();
                    match port {
                        Some(p) if ins.iter().any(|i| i == p) => p.to_string(),
                        Some(_) => return Err(missing(text)),
                        None if ins.len() == 1 => ins[0].clone(),
                        None if ins.is_empty() => return Err(missing(text)),
                        None => {
                            return Err(syntax(
                                line,
                                format!("ambiguous port on `{id}`, one of [{}] required", ins.join(", ")),
                            ))
                        }
                    }
                };
                return Ok(Endpoint::Block { id: id.to_string(), port });
            }
            if port.is_none() && ((as_src && is_input(id)) || (!as_src && is_output(id))) {
                return Ok(Endpoint::Boundary(id.to_string()));
            }
            Err(missing(text))
        };
        let src = resolve(src_text, true)?;
        let dst = resolve(dst_text, false)?;
        if wires.iter().any(|w: &Wire| w.dst == dst) {
            return Err(err(line, ParseErrorKind::Invalid(format!("`{dst}` is wired more than once"))));
        }
        wires.push(Wire { src, dst, line });
    }

    for b in &raw.blocks {
        for port in b.kind.input_ports() {
            let ep = Endpoint::Block { id: b.id.clone(), port };
            if !wires.iter().any(|w| w.dst == ep) {
                return Err(err(b.line, ParseErrorKind::Invalid(format!("input `{ep}` is not wired"))));
            }
        }
    }
    for (out, line) in &raw.outputs {
        let ep = Endpoint::Boundary(out.clone());
        if !wires.iter().any(|w| w.dst == ep) {
            return Err(err(*line, ParseErrorKind::Invalid(format!("output `{out}` is not wired"))));
        }
    }

    Ok(Subsystem {
        name: raw.name,
        inputs: raw.inputs.into_iter().map(|(p, _)| p).collect(),
        outputs: raw.outputs.into_iter().map(|(p, _)| p).collect(),
        blocks: raw.blocks,
        wires,
        line: raw.line,
    })
}
