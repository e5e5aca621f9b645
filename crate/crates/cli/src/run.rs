//! Experiment kinds and the record each run produces.
//!
//! A run never touches the file system: it returns the data files as text
//! together with everything the metadata snapshot needs, and `emit` writes
//! them out.

use std::fmt::Write as _;
use std::time::Instant;

use hybrid_swap::experiments::{
    argmax_ok, bandwidth_sweep, flag_of, node_cm_at, node_entanglement, relative_error,
    stability_report, swap_map, swap_nodes, OperatingPoint, Pair, StabilityReport,
};
use hybrid_swap::node::{LinearModel, NodeParams};
use hybrid_swap::spectral::output_spectrum;
use hybrid_swap::swap::{assemble_two_node_blocks, bell_condition, mc_homodyne_oracle};
use hybrid_swap::Result as CoreResult;
use serde::Serialize;
use toml::{Table, Value};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Stability,
    Spectrum,
    NodeEntanglement,
    BandwidthSweep,
    SwapMap,
    CollisionCompare,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Spectrum => "spectrum",
            Command::NodeEntanglement => "node-entanglement",
            Command::BandwidthSweep => "bandwidth-sweep",
            Command::SwapMap => "swap-map",
            Command::CollisionCompare => "collision-compare",
        }
    }

    fn two_nodes(self) -> bool {
        !matches!(self, Command::Spectrum | Command::NodeEntanglement)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub name: String,
    pub contents: String,
}

/// Everything a run produced.
#[derive(Debug)]
pub struct RunRecord {
    pub command: Command,
    pub config: Config,
    /// Per-node derived parameters, steady state and stability, as TOML tables.
    pub nodes: Table,
    pub files: Vec<DataFile>,
    pub points: usize,
    pub flagged: usize,
    pub quadrature_error: f64,
    /// Experiment-specific summary values (peak positions, oracle checks).
    pub summary: Table,
    pub wall_time: f64,
    /// Fatal condition reached after data was produced.
    pub failure: Option<CliError>,
}

impl RunRecord {
    pub fn exit_code(&self) -> u8 {
        self.failure.as_ref().map_or(0, CliError::exit_code)
    }

    pub fn status(&self) -> &'static str {
        match &self.failure {
            None => "ok",
            Some(CliError::Unstable(_)) => "unstable",
            Some(_) => "failed",
        }
    }

    /// The structured-text snapshot. `files` lists the data files plus itself.
    pub fn metadata(&self, file_name: &str) -> String {
        let mut run = Table::new();
        run.insert("command".into(), self.command.name().into());
        run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
        run.insert("status".into(), self.status().into());
        if let Some(f) = &self.failure {
            run.insert("failure".into(), f.to_string().into());
        }
        run.insert("seed".into(), Value::Integer(self.config.seed as i64));
        run.insert("wall_time_seconds".into(), self.wall_time.into());
        run.insert("points".into(), Value::Integer(self.points as i64));
        run.insert("flagged_points".into(), Value::Integer(self.flagged as i64));
        run.insert(
            "max_relative_quadrature_error".into(),
            self.quadrature_error.into(),
        );
        let mut files: Vec<Value> = self.files.iter().map(|f| f.name.clone().into()).collect();
        files.push(file_name.into());
        run.insert("files".into(), Value::Array(files));

        let mut root = Table::new();
        root.insert("run".into(), Value::Table(run));
        root.insert(
            "config".into(),
            Value::try_from(&self.config).expect("config serializes"),
        );
        root.insert("nodes".into(), Value::Table(self.nodes.clone()));
        if !self.summary.is_empty() {
            root.insert("summary".into(), Value::Table(self.summary.clone()));
        }
        toml::to_string(&root).expect("metadata serializes")
    }
}

/// Builder for one CSV file.
struct Csv {
    name: String,
    text: String,
}

impl Csv {
    fn new(name: &str, command: Command, about: &[String], columns: &[(&str, &str)]) -> Self {
        let mut text = format!(
            "# hybrid-swap {} {}\n",
            env!("CARGO_PKG_VERSION"),
            command.name()
        );
        for line in about {
            let _ = writeln!(text, "# {line}");
        }
        let _ = writeln!(text, "# columns:");
        for (c, doc) in columns {
            let _ = writeln!(text, "#   {c}: {doc}");
        }
        let names: Vec<&str> = columns.iter().map(|c| c.0).collect();
        let _ = writeln!(text, "{}", names.join(","));
        Self {
            name: name.to_string(),
            text,
        }
    }

    fn row(&mut self, cells: &[String]) {
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    fn finish(self) -> DataFile {
        DataFile {
            name: self.name,
            contents: self.text,
        }
    }
}

const FLAG_DOC: &str = "ok, or the reason the point failed (values are NaN then)";

fn num(v: f64) -> String {
    format!("{v:.10e}")
}

fn freq(v: f64) -> String {
    format!("{v:.6}")
}

fn flag<T>(r: &CoreResult<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => flag_of(e).into(),
    }
}

fn column_safe(p: &Pair) -> String {
    format!("{}_{}", p.0, p.1)
}

#[derive(Clone)]
struct Node {
    name: String,
    params: NodeParams,
    model: LinearModel,
    stability: StabilityReport,
}

impl Node {
    fn build(name: impl Into<String>, params: NodeParams) -> Result<Self, CliError> {
        let model = LinearModel::from_params(&params).map_err(CliError::from_core)?;
        let stability = stability_report(&model).map_err(CliError::from_core)?;
        Ok(Self {
            name: name.into(),
            params,
            model,
            stability,
        })
    }

    fn wm(&self) -> f64 {
        self.params.mirror_frequency
    }

    fn wb(&self) -> f64 {
        self.model
            .derived
            .as_ref()
            .map_or(f64::NAN, |d| d.bogoliubov_frequency)
    }

    fn table(&self) -> Table {
        let mut t = Table::new();
        if let Some(d) = &self.model.derived {
            t.insert("derived".into(), to_value(d));
        }
        if let Some(s) = &self.model.steady {
            t.insert("steady_state".into(), to_value(s));
        }
        let mut st = Table::new();
        st.insert("stable".into(), self.stability.stable.into());
        st.insert("max_real_part".into(), self.stability.max_real_part.into());
        t.insert("stability".into(), Value::Table(st));
        t
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    Value::try_from(v).expect("serializable record")
}

/// Output of one experiment before bookkeeping.
#[derive(Default)]
struct Outcome {
    files: Vec<DataFile>,
    points: usize,
    flagged: usize,
    quadrature_error: f64,
    summary: Table,
    failure: Option<CliError>,
}

impl Outcome {
    fn count<T>(&mut self, r: &CoreResult<T>) {
        self.points += 1;
        if r.is_err() {
            self.flagged += 1;
        }
    }
}

/// Runs one experiment. Configuration problems come back as `Err` before any
/// computation; instability and numeric failures after the models are built
/// are recorded in the returned record so that what was computed can still
/// be written.
pub fn run(command: Command, config: &Config) -> Result<RunRecord, CliError> {
    let start = Instant::now();
    config.validate()?;
    let mut nodes = vec![Node::build("node_a", config.node_a_params()?)?];
    if command.two_nodes() {
        nodes.push(Node::build("node_b", config.node_b_params()?)?);
    }
    let mut node_tables = Table::new();
    for n in &nodes {
        node_tables.insert(n.name.clone(), Value::Table(n.table()));
    }

    let unstable: Vec<&Node> = nodes.iter().filter(|n| !n.stability.stable).collect();
    let (outcome, failure) = if command == Command::Stability || !unstable.is_empty() {
        let failure = instability(&nodes);
        (
            Outcome {
                files: vec![stability_file(command, &nodes)],
                ..Default::default()
            },
            failure,
        )
    } else {
        let out = match command {
            Command::Spectrum => spectrum(config, &nodes[0]),
            Command::NodeEntanglement => Ok(entanglement(config, &nodes[0])),
            Command::BandwidthSweep => bandwidth(config, &nodes[0], &nodes[1]),
            Command::SwapMap => map(config, &nodes[0], &nodes[1]),
            Command::CollisionCompare => collision(config, &nodes[0], &nodes[1]),
            Command::Stability => unreachable!(),
        };
        let mut o = out?;
        let failure = o.failure.take().or_else(|| {
            (o.points > 0 && o.flagged == o.points)
                .then(|| CliError::Numeric(format!("all {} sweep points failed", o.points)))
        });
        (o, failure)
    };
    Ok(RunRecord {
        command,
        config: config.clone(),
        nodes: node_tables,
        files: outcome.files,
        points: outcome.points,
        flagged: outcome.flagged,
        quadrature_error: outcome.quadrature_error,
        summary: outcome.summary,
        wall_time: start.elapsed().as_secs_f64(),
        failure,
    })
}

fn instability(nodes: &[Node]) -> Option<CliError> {
    let parts: Vec<String> = nodes
        .iter()
        .filter(|n| !n.stability.stable)
        .map(|n| {
            format!(
                "{} max Re(eigenvalue) = {:e} rad/s",
                n.name, n.stability.max_real_part
            )
        })
        .collect();
    (!parts.is_empty()).then(|| CliError::Unstable(parts.join("; ")))
}

fn stability_file(command: Command, nodes: &[Node]) -> DataFile {
    let about: Vec<String> = nodes
        .iter()
        .map(|n| {
            format!(
                "{}: stable = {}, max Re(eigenvalue) = {:e} rad/s",
                n.name, n.stability.stable, n.stability.max_real_part
            )
        })
        .collect();
    let mut csv = Csv::new(
        "stability.csv",
        command,
        &about,
        &[
            ("node", "node name"),
            (
                "index",
                "eigenvalue index, sorted by imaginary then real part",
            ),
            ("re", "real part of the drift eigenvalue over omega_m"),
            ("im", "imaginary part of the drift eigenvalue over omega_m"),
            ("flag", "ok, or unstable when the real part is not negative"),
        ],
    );
    for n in nodes {
        for (i, (re, im)) in n.stability.eigenvalues.iter().enumerate() {
            let f = if *re < 0.0 { "ok" } else { "unstable" };
            csv.row(&[
                n.name.clone(),
                i.to_string(),
                num(re / n.wm()),
                num(im / n.wm()),
                f.into(),
            ]);
        }
    }
    csv.finish()
}

fn spectrum(config: &Config, node: &Node) -> Result<Outcome, CliError> {
    let grid = config.grid.spectrum.values();
    let wm = node.wm();
    let abs: Vec<f64> = grid.iter().map(|w| w * wm).collect();
    let s = output_spectrum(&node.model, &abs).map_err(CliError::from_core)?;
    let mut csv = Csv::new(
        "spectrum.csv",
        Command::Spectrum,
        &[format!(
            "cavity output spectrum of node_a; peak value {:e}",
            s.peak
        )],
        &[
            ("omega", "detection frequency over omega_m"),
            ("s", "output spectrum above shot noise"),
            (
                "s_normalized",
                "spectrum over its largest value on the grid",
            ),
            ("flag", FLAG_DOC),
        ],
    );
    for (w, v) in grid.iter().zip(&s.values) {
        csv.row(&[freq(*w), num(v * s.peak), num(*v), "ok".into()]);
    }
    let mut out = Outcome {
        files: vec![csv.finish()],
        points: grid.len(),
        ..Default::default()
    };
    let peaks: Vec<Value> = s.local_maxima().iter().map(|&i| grid[i].into()).collect();
    out.summary
        .insert("spectrum_peaks".into(), Value::Array(peaks));
    out.summary
        .insert("bogoliubov_frequency".into(), (node.wb() / wm).into());
    Ok(out)
}

fn entanglement(config: &Config, node: &Node) -> Outcome {
    let grid = config.grid.omega.values();
    let wm = node.wm();
    let abs: Vec<f64> = grid.iter().map(|w| w * wm).collect();
    let eps = config.grid.fixed_epsilon;
    let pts = node_entanglement(&node.model, &abs, eps, config.tolerance);
    let mut csv = Csv::new(
        "node_entanglement.csv",
        Command::NodeEntanglement,
        &[format!(
            "single-node log negativities of node_a at epsilon = {eps}"
        )],
        &[
            ("omega", "filter center over omega_m"),
            ("en_mirror_output", "E_N(mirror, filtered output)"),
            ("en_bec_output", "E_N(bec, filtered output)"),
            ("en_mirror_bec", "E_N(mirror, bec)"),
            (
                "quadrature_error",
                "largest quadrature error estimate relative to sqrt(V_ii V_jj)",
            ),
            ("flag", FLAG_DOC),
        ],
    );
    let mut out = Outcome::default();
    for (w, p) in grid.iter().zip(&pts) {
        out.count(p);
        let cells = match p {
            Ok(p) => {
                out.quadrature_error = out.quadrature_error.max(p.quadrature_error);
                [
                    p.mirror_output,
                    p.bec_output,
                    p.mirror_bec,
                    p.quadrature_error,
                ]
                .map(num)
            }
            Err(_) => [f64::NAN; 4].map(num),
        };
        let mut row = vec![freq(*w)];
        row.extend(cells);
        row.push(flag(p));
        csv.row(&row);
    }
    for (key, value) in [
        ("mirror_output", argmax_ok(&pts, |p| p.mirror_output)),
        ("bec_output", argmax_ok(&pts, |p| p.bec_output)),
    ] {
        if let Some((i, v)) = value {
            let mut t = Table::new();
            t.insert("omega".into(), grid[i].into());
            t.insert("en".into(), v.into());
            out.summary.insert(format!("peak_{key}"), Value::Table(t));
        }
    }
    out.files.push(csv.finish());
    out
}

/// Filter center of `label`'s node at that mode's sideband.
fn sideband(label: &str, a: &Node, b: &Node) -> f64 {
    let node = if label.ends_with("_A") { a } else { b };
    if label.starts_with("mirror") {
        -node.wm()
    } else {
        -node.wb()
    }
}

/// Filter centers `(Ω_A, Ω_B)` at the sidebands of the pair's modes. A node
/// the pair does not touch is filtered at the sideband of the same mode kind.
fn operating_point(pair: &Pair, a: &Node, b: &Node) -> OperatingPoint {
    let on = |suffix: &str| {
        [&pair.0, &pair.1]
            .into_iter()
            .find(|l| l.ends_with(suffix))
            .cloned()
    };
    let la = on("_A").unwrap_or_else(|| pair.0.replace("_B", "_A"));
    let lb = on("_B").unwrap_or_else(|| pair.1.replace("_A", "_B"));
    OperatingPoint {
        pair: pair.clone(),
        omega_a: sideband(&la, a, b),
        omega_b: sideband(&lb, a, b),
    }
}

fn bandwidth(config: &Config, a: &Node, b: &Node) -> Result<Outcome, CliError> {
    let eps = config.grid.epsilon.values();
    let wm = a.wm();
    let mut out = Outcome::default();
    for pair in config.pairs()? {
        let op = operating_point(&pair, a, b);
        let pts = bandwidth_sweep(
            &a.model,
            &b.model,
            &op,
            &eps,
            config.swap.transmissivity,
            config.tolerance,
        );
        let mut csv = Csv::new(
            &format!("bandwidth_{}.csv", column_safe(&pair)),
            Command::BandwidthSweep,
            &[format!(
                "pair {}, filter centers Omega_A = {} omega_m, Omega_B = {} omega_m, transmissivity {}",
                pair.name(),
                freq(op.omega_a / wm),
                freq(op.omega_b / wm),
                config.swap.transmissivity
            )],
            &[
                ("epsilon", "inverse filter bandwidth times omega_m"),
                ("en_remote", "E_N of the pair after the Bell measurement"),
                ("en_local_a", "E_N(mirror_A, bec_A) after the measurement"),
                ("en_local_b", "E_N(mirror_B, bec_B) after the measurement"),
                ("quadrature_error", "largest quadrature error estimate of the two node CMs"),
                ("flag", FLAG_DOC),
            ],
        );
        for (e, p) in eps.iter().zip(&pts) {
            out.count(p);
            let cells = match p {
                Ok(p) => {
                    out.quadrature_error = out.quadrature_error.max(p.quadrature_error);
                    [p.remote, p.local_a, p.local_b, p.quadrature_error].map(num)
                }
                Err(_) => [f64::NAN; 4].map(num),
            };
            let mut row = vec![num(*e)];
            row.extend(cells);
            row.push(flag(p));
            csv.row(&row);
        }
        if let Some((i, v)) = argmax_ok(&pts, |p| p.remote) {
            let mut t = Table::new();
            t.insert("epsilon".into(), eps[i].into());
            t.insert("en".into(), v.into());
            t.insert("omega_a".into(), (op.omega_a / wm).into());
            t.insert("omega_b".into(), (op.omega_b / wm).into());
            out.summary.insert(pair.name(), Value::Table(t));
        }
        out.files.push(csv.finish());
    }
    Ok(out)
}

fn map(config: &Config, a: &Node, b: &Node) -> Result<Outcome, CliError> {
    let grid = config.grid.omega.values();
    let wm = a.wm();
    let abs: Vec<f64> = grid.iter().map(|w| w * wm).collect();
    let pairs = config.pairs()?;
    let eps = config.grid.fixed_epsilon;
    let t = config.swap.transmissivity;
    let m = swap_map(
        &a.model,
        &b.model,
        &abs,
        &abs,
        eps,
        t,
        &pairs,
        config.tolerance,
    );
    let mut columns = vec![
        (
            "omega_a".to_string(),
            "filter center of node A over omega_m".to_string(),
        ),
        (
            "omega_b".to_string(),
            "filter center of node B over omega_m".to_string(),
        ),
    ];
    for p in &pairs {
        columns.push((
            format!("en_{}", column_safe(p)),
            format!("E_N({}, {}) after the Bell measurement", p.0, p.1),
        ));
    }
    columns.push(("flag".into(), FLAG_DOC.into()));
    let cols: Vec<(&str, &str)> = columns
        .iter()
        .map(|(c, d)| (c.as_str(), d.as_str()))
        .collect();
    let mut csv = Csv::new(
        "swap_map.csv",
        Command::SwapMap,
        &[format!(
            "remote log negativities at epsilon = {eps}, transmissivity {t}"
        )],
        &cols,
    );
    let mut out = Outcome {
        quadrature_error: m.quadrature_error,
        ..Default::default()
    };
    for (ia, wa) in grid.iter().enumerate() {
        for (ib, wb) in grid.iter().enumerate() {
            let r = m.at(ia, ib);
            out.count(r);
            let mut row = vec![freq(*wa), freq(*wb)];
            match r {
                Ok(v) => row.extend(v.iter().map(|x| num(*x))),
                Err(_) => row.extend(pairs.iter().map(|_| num(f64::NAN))),
            }
            row.push(flag(r));
            csv.row(&row);
        }
    }
    for (k, p) in pairs.iter().enumerate() {
        let Some((ia, ib, v)) = m.argmax(k) else {
            continue;
        };
        let mut s = Table::new();
        s.insert("omega_a".into(), grid[ia].into());
        s.insert("omega_b".into(), grid[ib].into());
        s.insert("en".into(), v.into());
        if config.swap.mc_samples > 0 {
            let z = mc_check(config, a, b, abs[ia], abs[ib], eps)?;
            s.insert("mc_max_abs_z".into(), z.into());
        }
        out.summary.insert(p.name(), Value::Table(s));
    }
    out.files.push(csv.finish());
    Ok(out)
}

/// Largest |z|-score between the conditioned CM and the seeded Monte-Carlo
/// homodyne estimate at one grid point.
fn mc_check(
    config: &Config,
    a: &Node,
    b: &Node,
    wa: f64,
    wb: f64,
    eps: f64,
) -> Result<f64, CliError> {
    let core = || -> CoreResult<f64> {
        let va = node_cm_at(&a.model, wa, eps, config.tolerance)?;
        let vb = node_cm_at(&b.model, wb, eps, config.tolerance)?;
        let blocks = assemble_two_node_blocks(&va.cm, &vb.cm)?
            .with_transmissivity(config.swap.transmissivity)?;
        let exact = bell_condition(&blocks)?.conditioned;
        let mc = mc_homodyne_oracle(&blocks, config.swap.mc_samples, config.seed)?;
        let e = exact.entries();
        let mut worst = 0.0f64;
        for i in 0..e.nrows() {
            for j in 0..e.ncols() {
                if mc.stderr[(i, j)] > 0.0 {
                    worst = worst.max((mc.estimate[(i, j)] - e[(i, j)]).abs() / mc.stderr[(i, j)]);
                }
            }
        }
        Ok(worst)
    };
    core().map_err(CliError::from_core)
}

fn collision(config: &Config, a: &Node, b: &Node) -> Result<Outcome, CliError> {
    let ratios = &config.collision.ratios;
    let variants: Vec<(Node, Node)> = ratios
        .iter()
        .enumerate()
        .map(|(k, r)| {
            let with = |n: &Node| {
                let mut p = n.params.clone();
                p.bec_collision = r * p.bec_recoil;
                Node::build(format!("{}_collision_{k}", n.name), p)
            };
            Ok((with(a)?, with(b)?))
        })
        .collect::<Result<_, CliError>>()?;
    let all: Vec<Node> = variants
        .iter()
        .flat_map(|(x, y)| [x.clone(), y.clone()])
        .collect();
    if let Some(failure) = instability(&all) {
        let files = vec![stability_file(Command::CollisionCompare, &all)];
        return Ok(Outcome {
            files,
            failure: Some(failure),
            ..Default::default()
        });
    }
    let grid = config.grid.omega.values();
    let wm = a.wm();
    let eps = config.grid.fixed_epsilon;
    let t = config.swap.transmissivity;
    let mut out = Outcome::default();

    // paired curves versus Ω_A, node B held at the sideband of its mode
    for pair in config.pairs()? {
        let mut columns = vec![(
            "omega_a".to_string(),
            "filter center of node A over omega_m".to_string(),
        )];
        let mut about = vec![format!(
            "E_N({}, {}) versus Omega_A at epsilon = {eps}, transmissivity {t}",
            pair.0, pair.1
        )];
        let mut curves = Vec::new();
        for (k, (r, (va, vb))) in ratios.iter().zip(&variants).enumerate() {
            let wb = operating_point(&pair, va, vb).omega_b;
            about.push(format!(
                "curve {k}: omega_sw = {r} omega_R, Omega_B = {} omega_m",
                freq(wb / wm)
            ));
            columns.push((format!("en_{k}"), format!("E_N at omega_sw = {r} omega_R")));
            let vb_cm = node_cm_at(&vb.model, wb, eps, config.tolerance);
            let abs: Vec<f64> = grid.iter().map(|w| w * wm).collect();
            let curve: Vec<CoreResult<(f64, f64)>> =
                hybrid_swap::experiments::node_cm_table(&va.model, &abs, eps, config.tolerance)
                    .into_iter()
                    .map(|va_cm| {
                        let va_cm = va_cm?;
                        let vb_cm = vb_cm.as_ref().map_err(Clone::clone)?;
                        let r = swap_nodes(&va_cm, vb_cm, t)?;
                        let en = hybrid_swap::swap::remote_log_negativity(&r, (&pair.0, &pair.1))?;
                        Ok((en, relative_error(&va_cm).max(relative_error(vb_cm))))
                    })
                    .collect();
            if let Some((i, v)) = argmax_ok(&curve, |c| c.0) {
                let mut s = Table::new();
                s.insert("collision_ratio".into(), (*r).into());
                s.insert("omega_a".into(), grid[i].into());
                s.insert("omega_b".into(), (wb / wm).into());
                s.insert("en".into(), v.into());
                out.summary
                    .entry(pair.name())
                    .or_insert_with(|| Value::Array(Vec::new()))
                    .as_array_mut()
                    .expect("array")
                    .push(Value::Table(s));
            }
            curves.push(curve);
        }
        columns.push((
            "flag".into(),
            "ok, or the reasons the curves failed at this point, joined by ';'".into(),
        ));
        let cols: Vec<(&str, &str)> = columns
            .iter()
            .map(|(c, d)| (c.as_str(), d.as_str()))
            .collect();
        let mut csv = Csv::new(
            &format!("collision_{}.csv", column_safe(&pair)),
            Command::CollisionCompare,
            &about,
            &cols,
        );
        for (i, w) in grid.iter().enumerate() {
            let mut row = vec![freq(*w)];
            let mut flags = Vec::new();
            for c in &curves {
                out.count(&c[i]);
                match &c[i] {
                    Ok((en, q)) => {
                        out.quadrature_error = out.quadrature_error.max(*q);
                        row.push(num(*en));
                    }
                    Err(e) => {
                        row.push(num(f64::NAN));
                        flags.push(flag_of(e));
                    }
                }
            }
            row.push(if flags.is_empty() {
                "ok".into()
            } else {
                flags.join(";")
            });
            csv.row(&row);
        }
        out.files.push(csv.finish());
    }

    // output spectra of node A, one column per collision ratio
    let sgrid = config.grid.spectrum.values();
    let sabs: Vec<f64> = sgrid.iter().map(|w| w * wm).collect();
    let mut columns = vec![(
        "omega".to_string(),
        "detection frequency over omega_m".to_string(),
    )];
    let mut spectra = Vec::new();
    for (k, (r, (va, _))) in ratios.iter().zip(&variants).enumerate() {
        columns.push((
            format!("s_{k}"),
            format!("node A output spectrum at omega_sw = {r} omega_R"),
        ));
        spectra.push(output_spectrum(&va.model, &sabs).map_err(CliError::from_core)?);
    }
    columns.push(("flag".into(), FLAG_DOC.into()));
    let cols: Vec<(&str, &str)> = columns
        .iter()
        .map(|(c, d)| (c.as_str(), d.as_str()))
        .collect();
    let mut csv = Csv::new(
        "collision_spectrum.csv",
        Command::CollisionCompare,
        &["output spectra above shot noise, not normalized".into()],
        &cols,
    );
    for (i, w) in sgrid.iter().enumerate() {
        let mut row = vec![freq(*w)];
        row.extend(spectra.iter().map(|s| num(s.values[i] * s.peak)));
        row.push("ok".into());
        csv.row(&row);
    }
    out.files.push(csv.finish());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Config {
        let mut c = Config::default();
        c.grid.omega = crate::config::Grid::new(-1.2, -0.4, 5);
        c.grid.epsilon = crate::config::Grid {
            log: true,
            ..crate::config::Grid::new(2.0, 30.0, 4)
        };
        c.grid.spectrum = crate::config::Grid::new(-1.5, 1.5, 31);
        c
    }

    #[test]
    fn every_command_produces_flagged_csvs() {
        let c = small();
        for cmd in [
            Command::Stability,
            Command::Spectrum,
            Command::NodeEntanglement,
            Command::BandwidthSweep,
            Command::SwapMap,
            Command::CollisionCompare,
        ] {
            let r = run(cmd, &c).unwrap();
            assert_eq!(r.exit_code(), 0, "{}", cmd.name());
            assert!(!r.files.is_empty());
            for f in &r.files {
                let header = f.contents.lines().find(|l| !l.starts_with('#')).unwrap();
                assert!(header.ends_with(",flag"), "{}: {header}", f.name);
                assert!(f.contents.starts_with("# hybrid-swap"));
            }
        }
    }

    #[test]
    fn swap_map_has_one_row_per_grid_point() {
        let r = run(Command::SwapMap, &small()).unwrap();
        let rows = r.files[0]
            .contents
            .lines()
            .filter(|l| !l.starts_with('#'))
            .count();
        assert_eq!(rows, 1 + 25);
        assert_eq!(r.points, 25);
        assert_eq!(r.flagged, 0);
    }

    #[test]
    fn operating_points_follow_the_sidebands() {
        let c = small();
        let a = Node::build("node_a", c.node_a_params().unwrap()).unwrap();
        let b = Node::build("node_b", c.node_b_params().unwrap()).unwrap();
        let op = operating_point(&Pair::mirror_bec(), &a, &b);
        assert_eq!(op.omega_a, -a.wm());
        assert_eq!(op.omega_b, -b.wb());
        // a same-node pair filters the other node at the second mode's sideband
        let op = operating_point(&Pair::new("mirror_A", "bec_A").unwrap(), &a, &b);
        assert_eq!(op.omega_a, -a.wm());
        assert_eq!(op.omega_b, -b.wb());
    }

    #[test]
    fn unstable_node_stops_with_the_report() {
        let mut c = small();
        c.node.detuning = Some(-NodeParams::paper().mirror_frequency);
        let r = run(Command::SwapMap, &c).unwrap();
        assert_eq!(r.exit_code(), 3);
        assert_eq!(r.files.len(), 1);
        assert_eq!(r.files[0].name, "stability.csv");
        assert!(r
            .metadata("metadata.toml")
            .contains("status = \"unstable\""));
    }
}
