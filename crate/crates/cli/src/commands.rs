use crate::{Command, Common, RunArgs};
use anyhow::{anyhow, Context};
use serde_json::{json, Value};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use tbil::diagram::{InfluenceDiagram, NodeKind};
use tbil::explain::{answer_why, explain, Explanation};
use tbil::knowledge::{parse_scenario, Scenario};
use tbil::learn::{predict_switch, predict_switch_for, BeliefState, LikelihoodModel, Mode, Observation};
use tbil::policy::{compile_tree, evpi, evsi, optimal_policy, rollback, Policy};
use tbil::rational::{format_exact, format_report, parse_rational, to_f64, Prob};
use tbil::sim::{write_trace, SimConfig, Simulator};

/// Exit status 2 for bad invocations, 1 for everything that goes wrong
/// with a well-formed one.
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Failure(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.into())
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

struct Loaded {
    scenario: Scenario,
    explanation: Explanation,
    diagram: InfluenceDiagram,
}

fn load(common: &Common) -> Result<Loaded> {
    let path = common
        .path
        .as_ref()
        .or(common.scenario.as_ref())
        .ok_or_else(|| usage("a scenario file is required (positional or --scenario)"))?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scenario = parse_scenario(&text).with_context(|| format!("scenario {}", path.display()))?;
    let explanation = explain(&scenario)?;
    let mut diagram = explanation.diagram.clone();
    if let Some(c) = &common.cost {
        let cost = parse_cost(c)?;
        for name in diagram.instruments.iter().map(|i| i.name.clone()).collect::<Vec<_>>() {
            diagram = diagram.with_instrument_cost(&name, &cost)?;
        }
    }
    Ok(Loaded { scenario, explanation, diagram })
}

fn parse_cost(c: &str) -> Result<Prob> {
    parse_rational(c).map_err(|_| usage(format!("--cost: `{c}` is not a number")))
}

fn parse_mode(m: &str) -> Result<Mode> {
    m.parse().map_err(|_| usage(format!("--mode must be `aggregate` or `exact`, not `{m}`")))
}

fn emit_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let Some(path) = path else { return Ok(()) };
    let text = serde_json::to_string_pretty(value).expect("json values serialize") + "\n";
    if path == Path::new("-") {
        std::io::stdout().write_all(text.as_bytes())?;
    } else {
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn node(d: &InfluenceDiagram, name: &str) -> Result<usize> {
    d.node_id(name).ok_or_else(|| usage(format!("`{name}` is not a node of the diagram")))
}

fn policy_json(d: &InfluenceDiagram, p: &Policy) -> Value {
    let mut rules = Vec::new();
    for &dec in &d.decision_order {
        let info = d.parents(dec);
        for (values, &a) in p.rules.get(&dec).into_iter().flatten() {
            let context: serde_json::Map<String, Value> = info
                .iter()
                .zip(values)
                .map(|(&q, &v)| (d.name(q).to_string(), Value::from(d.nodes[q].outcomes[v].clone())))
                .collect();
            rules.push(json!({ "decision": d.name(dec), "context": context, "action": d.nodes[dec].outcomes[a] }));
        }
    }
    Value::Array(rules)
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Explain { common, dot, why } => cmd_explain(&common, dot.as_deref(), why.as_deref()),
        Command::Solve { common, tree } => cmd_solve(&common, tree),
        Command::Voi { common, perfect, instrument } => cmd_voi(&common, perfect.as_deref(), instrument.as_deref()),
        Command::Update { common, observation, odds, prior, mode, given } => {
            cmd_update(&common, &observation, odds, prior, &mode, &given)
        }
        Command::Simulate { common, run, seed, trace } => cmd_simulate(&common, &run, seed, trace.as_deref()),
        Command::Replicate { common, run, seed, runs } => cmd_replicate(&common, &run, seed, runs),
        Command::PredictSwitch { common, truth, mode, avg_l, odds, threshold } => {
            cmd_predict(&common, truth.as_deref(), &mode, avg_l, odds, threshold)
        }
    }
}

fn cmd_explain(common: &Common, dot: Option<&Path>, why: Option<&str>) -> Result<()> {
    let l = load(common)?;
    let (s, e, d) = (&l.scenario, &l.explanation, &l.diagram);
    println!("Proof of the example's utility:\n{}", e.proof.render(s));
    println!("Generalized explanation:\n{}", e.graph.render());
    println!("Influence diagram:");
    for (i, n) in d.nodes.iter().enumerate() {
        let parents: Vec<&str> = d.parents(i).iter().map(|&p| d.name(p)).collect();
        let kind = match n.kind {
            NodeKind::Chance => "chance",
            NodeKind::Decision => "decision",
            NodeKind::Value => "value",
        };
        println!("  N{} {} ({kind}) {{{}}} <- [{}]", i + 1, n.name, n.outcomes.join(", "), parents.join(", "));
    }
    let mut why_json = Value::Null;
    if let Some(event) = why {
        let ids = answer_why(&e.graph, event).map_err(|err| usage(err.to_string()))?;
        let names: Vec<String> = ids.iter().map(|&i| e.graph.nodes[i].name.clone()).collect();
        println!("Why {event}: {}", names.join(", "));
        why_json = json!(names);
    }
    if let Some(path) = dot {
        fs::write(path, d.to_dot()).with_context(|| format!("writing {}", path.display()))?;
    }
    let nodes: Vec<Value> = d
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            json!({
                "id": format!("N{}", i + 1),
                "name": n.name,
                "kind": format!("{:?}", n.kind).to_lowercase(),
                "outcomes": n.outcomes,
                "parents": d.parents(i).iter().map(|&p| d.name(p)).collect::<Vec<_>>(),
            })
        })
        .collect();
    let bindings: serde_json::Map<String, Value> =
        e.graph.bindings.iter().map(|(k, v)| (k.clone(), Value::from(v.to_string()))).collect();
    emit_json(common.json.as_deref(), &json!({ "nodes": nodes, "bindings": bindings, "why": why_json }))
}

fn cmd_solve(common: &Common, show_tree: bool) -> Result<()> {
    let l = load(common)?;
    let d = &l.diagram;
    let tree = compile_tree(d)?;
    let (eu, policy) = rollback(&tree);
    println!("EU {}", format_report(&eu));
    println!("Policy:");
    for line in policy.describe(d) {
        println!("  {line}");
    }
    for t in &policy.tie_breaks {
        let tied: Vec<&str> = t.tied.iter().map(|&a| d.nodes[t.node].outcomes[a].as_str()).collect();
        println!("  tie at {}: chose {} over {}", d.name(t.node), d.nodes[t.node].outcomes[t.chosen], tied.join(", "));
    }
    let all = tree.root.terminal_counts();
    let used = tree.root.counts_under(d, &policy);
    println!("Terminals: {} ({} nonzero); under the policy {} ({} nonzero)", all.total, all.nonzero, used.total, used.nonzero);
    if show_tree {
        print!("{}", tree.root.render(d));
    }
    let ties: Vec<Value> = policy
        .tie_breaks
        .iter()
        .map(|t| {
            json!({
                "decision": d.name(t.node),
                "context": t.info.iter().zip(d.parents(t.node)).map(|(&v, &q)| d.nodes[q].outcomes[v].clone()).collect::<Vec<_>>(),
                "chosen": d.nodes[t.node].outcomes[t.chosen],
                "tied": t.tied.iter().map(|&a| d.nodes[t.node].outcomes[a].clone()).collect::<Vec<_>>(),
            })
        })
        .collect();
    emit_json(
        common.json.as_deref(),
        &json!({ "eu": to_f64(&eu), "eu_rational": format_exact(&eu), "policy": policy_json(d, &policy), "tie_breaks": ties }),
    )
}

fn cmd_voi(common: &Common, perfect: Option<&str>, instrument: Option<&str>) -> Result<()> {
    let l = load(common)?;
    let d = &l.diagram;
    let (key, voi) = match (perfect, instrument) {
        (Some(v), _) => ("evpi", evpi(d, node(d, v)?)?),
        (None, Some(name)) => {
            let inst = d.instrument(name).map_err(|e| usage(e.to_string()))?;
            let cost = match &common.cost {
                Some(c) => parse_cost(c)?,
                None => inst.cost.clone(),
            };
            ("evsi", evsi(d, name, &cost)?)
        }
        (None, None) => return Err(usage("one of --perfect or --instrument is required")),
    };
    println!("{} {}", key.to_uppercase(), format_report(&voi.value));
    println!("baseline EU {}", format_report(&voi.baseline_eu));
    println!("informed EU {}", format_report(&voi.informed_eu));
    emit_json(
        common.json.as_deref(),
        &json!({ key: to_f64(&voi.value), "baseline_eu": to_f64(&voi.baseline_eu), "informed_eu": to_f64(&voi.informed_eu) }),
    )
}

fn prior_belief(d: &InfluenceDiagram, m: &LikelihoodModel, odds: Option<f64>, prior: Option<f64>) -> Result<BeliefState> {
    let (h, n) = m.hypothesis_names(d);
    let b = match (odds, prior) {
        (Some(o), _) => BeliefState::from_odds(h, n, o),
        (None, Some(p)) => BeliefState::from_probability(h, n, p),
        (None, None) => BeliefState::from_probability(h, n, to_f64(&d.cpt(m.latent).rows[0][m.hypothesis])),
    };
    b.map_err(|e| usage(e.to_string()))
}

/// Values of the enabling decision's informational parents from `--given`,
/// filling unstated decisions with the policy's choice.
fn context(d: &InfluenceDiagram, m: &LikelihoodModel, p: &Policy, given: &[String]) -> Result<Vec<usize>> {
    let mut values = vec![None; d.nodes.len()];
    for g in given {
        let (name, value) = g.split_once('=').ok_or_else(|| usage(format!("--given expects VAR=VALUE, got `{g}`")))?;
        let id = node(d, name.trim())?;
        let v = d
            .outcome_index(id, value.trim())
            .ok_or_else(|| usage(format!("`{}` is not an outcome of `{name}`", value.trim())))?;
        values[id] = Some(v);
    }
    let mut out = Vec::new();
    for &q in d.parents(m.enabling.0) {
        let v = match values[q] {
            Some(v) => v,
            None if d.kind(q) == NodeKind::Decision => {
                let info: Option<Vec<usize>> = d.parents(q).iter().map(|&r| values[r]).collect();
                let info = info.ok_or_else(|| usage(format!("exact mode needs --given {}=...", d.name(q))))?;
                p.choose(d, q, &info)
            }
            None => return Err(usage(format!("exact mode needs --given {}=...", d.name(q)))),
        };
        values[q] = Some(v);
        out.push(v);
    }
    Ok(out)
}

fn cmd_update(common: &Common, observation: &str, odds: Option<f64>, prior: Option<f64>, mode: &str, given: &[String]) -> Result<()> {
    let l = load(common)?;
    let d = &l.diagram;
    let mode = parse_mode(mode)?;
    let m = LikelihoodModel::from_scenario(&l.scenario, d, mode)?;
    let policy = optimal_policy(d)?;
    let outcome = d
        .outcome_index(m.observed, observation)
        .ok_or_else(|| usage(format!("`{observation}` is not an outcome of `{}`", d.name(m.observed))))?;
    let ctx = match mode {
        Mode::Aggregate => None,
        Mode::Exact => Some(context(d, &m, &policy, given)?),
    };
    let lr = m.likelihood_ratio(d, &policy, &Observation { outcome, context: ctx })?;
    let b = prior_belief(d, &m, odds, prior)?;
    let post = b.update(to_f64(&lr))?;
    println!("likelihood ratio {}", format_report(&lr));
    println!("prior odds {:.6}  P({}) {:.6}", b.odds(), b.hypothesis, b.probability());
    println!("posterior odds {:.6}  P({}) {:.6}  P({}) {:.6}", post.odds(), post.hypothesis, post.probability(), post.alternative, post.probability_alternative());
    let mut posterior = serde_json::Map::new();
    posterior.insert(post.hypothesis.clone(), json!(post.probability()));
    posterior.insert(post.alternative.clone(), json!(post.probability_alternative()));
    emit_json(
        common.json.as_deref(),
        &json!({
            "likelihood_ratio": to_f64(&lr),
            "likelihood_ratio_rational": format_exact(&lr),
            "prior_odds": b.odds(),
            "posterior_odds": post.odds(),
            "posterior": posterior,
        }),
    )
}

fn simulator(l: &Loaded, run: &RunArgs) -> Result<Simulator> {
    let config = SimConfig {
        stages: run.stages.unwrap_or(l.scenario.problem.horizon as usize),
        mode: parse_mode(&run.mode)?,
        truth: run.truth.clone(),
        frozen: run.frozen,
    };
    let m = LikelihoodModel::from_scenario(&l.scenario, &l.diagram, config.mode)?;
    if let Some(t) = &run.truth {
        if l.diagram.outcome_index(m.latent, t).is_none() {
            return Err(usage(format!("--truth: `{t}` is not an outcome of `{}`", l.diagram.name(m.latent))));
        }
    }
    Ok(Simulator::new(l.diagram.clone(), m, config)?)
}

fn cmd_simulate(common: &Common, run: &RunArgs, seed: u64, trace: Option<&Path>) -> Result<()> {
    let l = load(common)?;
    let sim = simulator(&l, run)?;
    let (records, summary) = sim.run(seed)?;
    if let Some(path) = trace {
        let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trace(std::io::BufWriter::new(file), &records)?;
    }
    println!("seed {}  truth {}  stages {}", summary.seed, summary.truth, summary.stages);
    println!("total utility {}", summary.total_utility);
    match summary.switch_stage {
        Some(s) => println!("policy switch after stage {s}"),
        None => println!("policy switch: none"),
    }
    println!("final P({}) {:.6}", sim.initial.hypothesis, summary.final_belief);
    println!("observations {}", summary.observations);
    if let Some(m) = summary.mean_log_likelihood_ratio {
        println!("mean log likelihood ratio {m:.6}");
    }
    emit_json(common.json.as_deref(), &serde_json::to_value(&summary).expect("summary serializes"))
}

fn cmd_replicate(common: &Common, run: &RunArgs, seed: u64, runs: u64) -> Result<()> {
    let l = load(common)?;
    let sim = simulator(&l, run)?;
    let seeds: Vec<u64> = (seed..seed + runs).collect();
    let rep = sim.replicate(&seeds)?;
    println!("runs {}  switched {}", rep.runs, rep.switched);
    let show = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| format!("{v:.6}"));
    println!("switch stage mean {}  median {}", show(rep.mean_switch_stage), show(rep.median_switch_stage));
    println!("total utility mean {:.6}  median {:.6}", rep.mean_total_utility, rep.median_total_utility);
    emit_json(common.json.as_deref(), &serde_json::to_value(&rep).expect("replication serializes"))
}

fn cmd_predict(
    common: &Common,
    truth: Option<&str>,
    mode: &str,
    avg_l: Option<f64>,
    odds: Option<f64>,
    threshold: Option<f64>,
) -> Result<()> {
    let l = load(common)?;
    let d = &l.diagram;
    let m = LikelihoodModel::from_scenario(&l.scenario, d, parse_mode(mode)?)?;
    let truth = match truth {
        Some(t) => d.outcome_index(m.latent, t).ok_or_else(|| usage(format!("--truth: `{t}` is not an outcome")))?,
        None => 1 - m.hypothesis,
    };
    let derived = if avg_l.is_none() || threshold.is_none() || odds.is_some() {
        Some(predict_switch_for(d, &m, truth))
    } else {
        None
    };
    let (threshold_belief, avg) = match (threshold, avg_l, &derived) {
        (Some(t), Some(a), _) => (t, a),
        (t, a, Some(Ok(p))) => (t.unwrap_or(p.threshold_belief), a.unwrap_or(p.avg_likelihood_ratio)),
        (t, a, Some(Err(e))) => {
            // The derived path can fail only on the part not overridden.
            let policy = optimal_policy(d)?;
            let a = match a {
                Some(a) => a,
                None => m.average_likelihood_ratio(d, &policy, truth)?,
            };
            match t {
                Some(t) => (t, a),
                None => return Err(anyhow!("{e}").into()),
            }
        }
        (_, _, None) => unreachable!("derived when anything is missing"),
    };
    if !(threshold_belief > 0.0 && threshold_belief < 1.0) {
        return Err(usage("--threshold must lie in (0, 1)"));
    }
    let b = prior_belief(d, &m, odds, None)?;
    let steps = predict_switch(&b, avg, threshold_belief / (1.0 - threshold_belief))?;
    println!("threshold P({}) {:.6}", b.hypothesis, threshold_belief);
    println!("average likelihood ratio {avg:.6}");
    println!("expected observations {steps:.6}");
    emit_json(
        common.json.as_deref(),
        &json!({ "threshold_belief": threshold_belief, "avg_likelihood_ratio": avg, "expected_steps": steps }),
    )
}
